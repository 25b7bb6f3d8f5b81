use std::process::Command;

use heatlab_core::generators::vicsek_tree;
use heatlab_core::io::read_graph;
use heatlab_core::kernel::heat_kernel;

fn heatlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
}

#[test]
fn unknown_preset_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatlab()
        .args(["run-preset", "no-such-preset", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lattice-z1"), "{err}");
}

#[test]
fn generated_graph_round_trips_and_kernel_matches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let status = heatlab()
        .args(["gen", "vicsek", "--level", "2", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let g = read_graph(&path).unwrap();
    let fresh = vicsek_tree(2).unwrap();
    assert_eq!(g.edges(), fresh.edges());
    assert_eq!(g.meta(), fresh.meta());

    let csv_path = dir.path().join("k.csv");
    let status = heatlab()
        .args(["kernel", "--n", "6", "--graph"])
        .arg(&path)
        .arg("--out")
        .arg(&csv_path)
        .status()
        .unwrap();
    assert!(status.success());
    let expected = heat_kernel(&fresh, fresh.root().unwrap(), 6).unwrap();
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let y: usize = rec[0].parse().unwrap();
        let p: f64 = rec[1].parse().unwrap();
        assert_eq!(p.to_bits(), expected.value(y).to_bits());
        rows += 1;
    }
    assert_eq!(rows, expected.values.iter().filter(|&&p| p != 0.0).count());
}

#[test]
fn verify_writes_a_report_and_strict_reflects_failure() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("z.json");
    assert!(heatlab()
        .args(["gen", "lattice", "--dim", "1", "--side", "401", "--out"])
        .arg(&graph)
        .status()
        .unwrap()
        .success());

    let report = dir.path().join("tc.json");
    let out = heatlab()
        .args(["verify", "tc", "--radii", "4,8", "--y-samples", "0", "--strict", "--graph"])
        .arg(&graph)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["check"]["check"], "tc");
    // E(y, 2R) = 4R² for every y on Z
    assert!((v["report"]["sup_statistic"].as_f64().unwrap() - 4.0).abs() < 1e-12);

    // a band limit below 1 cannot hold
    let out = heatlab()
        .args(["verify", "due", "--n-max", "50", "--band", "0.5", "--strict", "--graph"])
        .arg(&graph)
        .arg("--out")
        .arg(dir.path().join("due.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL"));
}

#[test]
fn check_errors_do_not_abort_a_preset() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = heatlab::presets::preset("weighted-vicsek").unwrap();
    // radius far beyond the horizon of a level-3 tree
    p.checks.insert(0, heatlab::CheckSpec::Volume { radii: vec![500] });
    let outcome = heatlab::run_preset(&p, dir.path()).unwrap();
    assert_eq!(outcome.errors(), 1);
    assert!(!outcome.rows[0].error.is_empty());
    assert!(outcome.rows[1..].iter().all(|r| r.error.is_empty()));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), p.checks.len() + 1);
    assert!(dir.path().join("reports/02_p0.json").exists());
}
