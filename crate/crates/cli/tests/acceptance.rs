//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use heatlab::presets::preset;
use heatlab::{run_preset, spread};
use heatlab_core::estimates::{
    check_dg, check_due, check_exit_tail, check_tc, check_two_step, DgConfig, DueConfig, ProfileBook, TailConfig,
    TcConfig, TwoStepConfig,
};
use heatlab_core::generators::{lattice_box, stretched_vicsek, vicsek_tree, weighted_vicsek};
use heatlab_core::isoperimetry::{check_lebar, check_llrv, connected_subsets_containing, subset_families, FamilyBudget};
use heatlab_core::kernel::{kernel_sanity, SanityConfig};
use heatlab_core::montecarlo::simulate_exit;
use heatlab_core::potential::{exit_profile, exit_time_ball, ExitCache};
use heatlab_core::volume::volume_regularity_report;
use heatlab_core::{GraphMeta, VertexSet, WeightedGraph};

type Outcome = Result<(bool, String), String>;

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let status = if pass { "PASS" } else { "FAIL" };
    println!(
        "{status} [{id:>2}] {name}: {detail} ({:.1} s)",
        start.elapsed().as_secs_f64()
    );
    pass
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

/// A box run as a finite graph: no truncation boundary.
fn finite(g: WeightedGraph) -> Result<WeightedGraph, String> {
    let meta = GraphMeta {
        boundary: Vec::new(),
        safe_radius: None,
        ..g.meta().clone()
    };
    g.with_meta(meta).map_err(e)
}

fn exit_times_on_the_line() -> Outcome {
    let g = lattice_box(1, 2001).map_err(e)?;
    let o = g.root().unwrap();
    let mut worst = 0.0f64;
    for r in 1..=50usize {
        let v = exit_time_ball(&g, o, r).map_err(e)?;
        worst = worst.max((v - (r * r) as f64).abs());
    }
    let mut mc = Vec::new();
    for (i, r) in [5usize, 10, 20].into_iter().enumerate() {
        let sim = simulate_exit(&g, &g.ball(o, r), o, 10_000, 11 + i as u64).map_err(e)?;
        let exact = (r * r) as f64;
        mc.push(((sim.estimate - exact) / sim.std_error, sim.agrees_with(exact, 3.0)));
    }
    let z: Vec<String> = mc.iter().map(|m| format!("{:.2}", m.0)).collect();
    Ok((
        worst <= 1e-8 && mc.iter().all(|m| m.1),
        format!("max |E - R^2| = {worst:.2e} for R <= 50; MC z-scores [{}]", z.join(", ")),
    ))
}

fn llrv_across_catalog() -> Outcome {
    let budget = FamilyBudget {
        max_exhaustive_size: 6,
        samples: 100,
        seed: 7,
    };
    let cases: Vec<(&str, WeightedGraph, usize)> = vec![
        ("Z", lattice_box(1, 201).map_err(e)?, 8),
        ("Z2", lattice_box(2, 61).map_err(e)?, 4),
        ("vicsek", vicsek_tree(3).map_err(e)?, 6),
        ("weighted-vicsek", weighted_vicsek(3, &[1.0, 2.0, 4.0, 8.0]).map_err(e)?, 4),
        ("stretched-vicsek", stretched_vicsek(3).map_err(e)?, 6),
    ];
    let mut tested = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for (_, g, r) in &cases {
        let x = g.root().unwrap();
        let family = subset_families(g, x, *r, 3, &budget).map_err(e)?;
        let outer = g.ball(x, 3 * r);
        let mut pairs: Vec<(VertexSet, VertexSet)> =
            family.members.iter().map(|a| (a.clone(), outer.clone())).collect();
        pairs.extend(family.members.iter().map(|a| (a.clone(), a.clone())));
        let rep = check_llrv(g, &pairs).map_err(e)?;
        tested += rep.tested;
        violations += rep.violations;
        worst = worst.max(rep.worst_ratio);
    }
    Ok((
        tested >= 1000 && violations == 0,
        format!("{tested} pairs on {} graphs, {violations} violations, max ratio {worst:.6}", cases.len()),
    ))
}

fn lebar_exhaustive() -> Outcome {
    let mut tested = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for g in [finite(lattice_box(2, 7).map_err(e)?)?, finite(vicsek_tree(2).map_err(e)?)?] {
        let sets = connected_subsets_containing(&g, g.root().unwrap(), 10, None).map_err(e)?;
        let sets: Vec<VertexSet> = sets.into_iter().filter(|s| s.len() < g.vertex_count()).collect();
        let rep = check_lebar(&g, &sets).map_err(e)?;
        tested += rep.tested;
        violations += rep.violations;
        worst = worst.max(rep.worst_ratio);
    }
    Ok((
        violations == 0,
        format!("all {tested} connected sets of size <= 10 (7x7 box, Vicsek level 2), max ratio {worst:.6}"),
    ))
}

fn kernel_identities() -> Outcome {
    let cfg = SanityConfig {
        tuples: 10_000,
        ..SanityConfig::default()
    };
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, g) in [
        ("Z2 15x15", lattice_box(2, 15).map_err(e)?),
        ("vicsek 2", vicsek_tree(2).map_err(e)?),
        ("weighted-vicsek 2", weighted_vicsek(2, &[0.5, 1.0, 3.0]).map_err(e)?),
    ] {
        let s = kernel_sanity(&g, &cfg).map_err(e)?;
        pass &= s.pass() && s.semigroup_tested >= 10_000 && s.first_exit_tested >= 10_000;
        lines.push(format!(
            "{name}: mass {:.1e} sym {:.1e} ck {:.1e} semigroup {}/{} first-exit {}/{}",
            s.mass_error,
            s.symmetry_error,
            s.ck_error,
            s.semigroup_violations,
            s.semigroup_tested,
            s.first_exit_violations,
            s.first_exit_tested
        ));
    }
    Ok((pass, lines.join("; ")))
}

fn due_on_the_plane() -> Outcome {
    let start = Instant::now();
    let g = lattice_box(2, 151).map_err(e)?;
    let o = g.root().unwrap();
    let book = ProfileBook::build(&g, &[o], 75, 1.0).map_err(e)?;
    let cfg = DueConfig {
        n_min: 2,
        n_max: 2000,
        band_limit: 6.0,
        finite: true,
    };
    let rep = check_due(&g, &[o], &book, &cfg).map_err(e)?;
    let elapsed = start.elapsed();
    let band = rep.get("band_ratio").unwrap_or(f64::NAN);
    Ok((
        rep.pass && band <= 6.0 && elapsed < Duration::from_secs(60),
        format!("151x151, n in [2, 2000]: band {band:.4}, sup {:.4}", rep.sup_statistic),
    ))
}

fn dg_on_the_line() -> Outcome {
    let g = lattice_box(1, 13001).map_err(e)?;
    let o = g.root().unwrap();
    let cache = ExitCache::new(&g, 1.0);
    let mut pairs = Vec::new();
    let mut times = Vec::new();
    for d in [20usize, 40, 80] {
        pairs.push(heatlab::ball_pair(&g, o, 5, d).map_err(e)?);
        times.extend([d, d * d / 4, d * d]);
    }
    times.sort_unstable();
    times.dedup();
    let rep = check_dg(&cache, &pairs, &times, &DgConfig::default()).map_err(e)?;
    let c0 = rep.get("c0_violations").unwrap_or(f64::NAN);
    Ok((
        rep.pass && c0 == 0.0 && rep.fitted.c >= 0.05,
        format!("c = 0 violations {c0}, fitted c {:.4}", rep.fitted.c),
    ))
}

fn exit_tail_on_the_line() -> Outcome {
    let g = lattice_box(1, 2001).map_err(e)?;
    let o = g.root().unwrap();
    let cache = ExitCache::new(&g, 1.0);
    let rep = check_exit_tail(&cache, &[o], &[8, 16, 32], &TailConfig::default()).map_err(e)?;
    let mono = rep.get("n_monotone_violations").unwrap_or(f64::NAN) + rep.get("r_monotone_violations").unwrap_or(f64::NAN);
    Ok((
        rep.pass && mono == 0.0 && rep.fitted.big_c <= 10.0 * (1.0 + 1e-12) && rep.fitted.c >= 0.1,
        format!(
            "R in {{8, 16, 32}}: monotonicity violations {mono}, C {:.4}, c {:.4}",
            rep.fitted.big_c, rep.fitted.c
        ),
    ))
}

fn two_step() -> Outcome {
    let cfg = TwoStepConfig::default();
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, g, radii) in [
        ("Z2", lattice_box(2, 81).map_err(e)?, vec![4usize, 8]),
        ("vicsek 3", vicsek_tree(3).map_err(e)?, vec![2, 6]),
    ] {
        let o = g.root().unwrap();
        let samples: Vec<_> = radii.iter().map(|&r| (o, r)).collect();
        let rep = check_two_step(&g, &samples, &cfg).map_err(e)?;
        let get = |k: &str| rep.get(k).unwrap_or(f64::NAN);
        pass &= rep.pass && get("lambda_tested") >= 200.0 && get("lambda_violations") == 0.0;
        lines.push(format!(
            "{name}: measure dev {:.1e}, BBB violations {}, E/E* in [{:.3}, {:.3}], lambda {}/{} violations",
            get("measure_deviation"),
            get("bbb_violations"),
            get("e_ratio_min"),
            get("e_ratio_max"),
            get("lambda_violations"),
            get("lambda_tested")
        ));
    }
    Ok((pass, lines.join("; ")))
}

fn stretched_vicsek_separation() -> Outcome {
    let start = Instant::now();
    let g = stretched_vicsek(5).map_err(e)?;
    let o = g.root().unwrap();
    let p0 = g.check_p0().p0;
    let radii = [64usize, 128, 256];
    let vol = volume_regularity_report(&g, &[o], &radii).map_err(e)?;
    let doubling: Vec<f64> = vol.rows.iter().map(|r| r.doubling).collect();
    let vd_stability = spread(&doubling);
    let cache = ExitCache::new(&g, 1.0);
    let tc_cfg = TcConfig {
        y_samples: 16,
        stability_limit: 4.0,
    };
    let tc = check_tc(&cache, &[o], &radii, &tc_cfg).map_err(e)?;
    let tc_stability = tc.get("stability").unwrap_or(f64::NAN);
    let profile = exit_profile(&g, o, 1024, 1.0).map_err(e)?;
    let slopes: Vec<f64> = profile.local_slopes.iter().map(|s| s.1).collect();
    let drift = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max) - slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let mut book = ProfileBook::default();
    book.insert(profile);
    let due_cfg = DueConfig {
        n_min: 2,
        n_max: 2000,
        band_limit: 10.0,
        finite: false,
    };
    let due = check_due(&g, &[o], &book, &due_cfg).map_err(e)?;
    let band = due.get("band_ratio").unwrap_or(f64::NAN);
    let elapsed = start.elapsed();
    Ok((
        p0 >= 0.25
            && vd_stability <= 4.0
            && tc.pass
            && tc_stability <= 4.0
            && drift >= 0.1
            && due.pass
            && band <= 10.0
            && elapsed < Duration::from_secs(600),
        format!(
            "p0 {p0}, VD stability {vd_stability:.3}, TC stability {tc_stability:.3}, slope drift {drift:.3}, DUE band {band:.3}"
        ),
    ))
}

fn read_tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(e)? {
            let p = entry.map_err(e)?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&p).map_err(e)?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let mut files = 0;
    let mut differing = Vec::new();
    for name in ["lattice-z1", "weighted-vicsek", "vicsek"] {
        let p = preset(name).map_err(e)?;
        let a = tempfile::tempdir().map_err(e)?;
        let b = tempfile::tempdir().map_err(e)?;
        run_preset(&p, a.path()).map_err(e)?;
        run_preset(&p, b.path()).map_err(e)?;
        let (ta, tb) = (read_tree(a.path())?, read_tree(b.path())?);
        files += ta.len();
        if ta.keys().ne(tb.keys()) {
            differing.push(format!("{name}: file sets differ"));
        }
        for (k, v) in &ta {
            if tb.get(k) != Some(v) {
                differing.push(format!("{name}/{k}"));
            }
        }
    }
    Ok((
        differing.is_empty() && files > 0,
        if differing.is_empty() {
            format!("{files} files bitwise identical across two runs of 3 presets")
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

fn main() -> ExitCode {
    let results = [
        run(1, "exit times on Z", exit_times_on_the_line),
        run(2, "eigenvalue-resistance-volume lemma", llrv_across_catalog),
        run(3, "inverse eigenvalue below extreme exit time", lebar_exhaustive),
        run(4, "heat kernel identities", kernel_identities),
        run(5, "diagonal estimate on the 151x151 box", due_on_the_plane),
        run(6, "Davies-Gaffney on Z", dg_on_the_line),
        run(7, "exit-time tail on Z", exit_tail_on_the_line),
        run(8, "two-step graph", two_step),
        run(9, "stretched Vicsek level 5", stretched_vicsek_separation),
        run(10, "run-preset determinism", determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
