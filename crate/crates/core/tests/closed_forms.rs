//! Solver outputs against closed forms and brute-force oracles written
//! independently of the library.

use heatlab_core::generators::{lattice_box, stretched_vicsek, vicsek_tree, weighted_vicsek};
use heatlab_core::isoperimetry::connected_subsets_containing;
use heatlab_core::kernel::{heat_kernel_finite, killed_kernel, survival_probability};
use heatlab_core::montecarlo::{simulate_exit, simulate_tail};
use heatlab_core::potential::{effective_resistance, exit_time_ball, exit_times, mean_exit_time};
use heatlab_core::spectral::lambda_min;
use heatlab_core::{build_graph, VertexSet, WeightedGraph};

fn line(side: usize) -> WeightedGraph {
    lattice_box(1, side).unwrap()
}

/// Gambler's ruin on `{−R, …, R}` absorbed at `±R`: `E_y = R² − y²`.
#[test]
fn gamblers_ruin_exit_times() {
    let g = line(2001);
    let o = g.root().unwrap();
    for r in 1..=50usize {
        let e = exit_time_ball(&g, o, r).unwrap();
        assert!((e - (r * r) as f64).abs() <= 1e-8, "R = {r}: {e}");
    }
    let ball = g.ball(o, 20);
    let e = exit_times(&g, &ball).unwrap();
    for y in -19i64..=19 {
        let v = (o as i64 + y) as usize;
        assert!((e[v] - (400 - y * y) as f64).abs() < 1e-8);
    }
}

/// All walks of length `n` from `x` enumerated explicitly.
fn enumerate_paths(g: &WeightedGraph, x: usize, n: usize, alive: Option<&VertexSet>) -> Vec<f64> {
    let mut out = vec![0.0; g.vertex_count()];
    fn go(g: &WeightedGraph, v: usize, left: usize, prob: f64, alive: Option<&VertexSet>, out: &mut [f64]) {
        if alive.is_some_and(|a| !a.contains(v)) {
            return;
        }
        if left == 0 {
            out[v] += prob;
            return;
        }
        for (w, m) in g.neighbors(v) {
            go(g, w, left - 1, prob * m / g.measure(v), alive, out);
        }
    }
    go(g, x, n, 1.0, alive, &mut out);
    out
}

fn small_weighted() -> WeightedGraph {
    build_graph(&[
        (0, 1, 1.0),
        (1, 2, 2.5),
        (2, 3, 0.5),
        (3, 0, 1.5),
        (1, 3, 3.0),
        (3, 4, 0.25),
        (4, 5, 4.0),
    ])
    .unwrap()
}

#[test]
fn kernels_match_path_enumeration() {
    let g = small_weighted();
    let a = VertexSet::new([0, 1, 2, 3]);
    for x in 0..g.vertex_count() {
        for n in 0..=7 {
            let k = heat_kernel_finite(&g, x, n).unwrap();
            let paths = enumerate_paths(&g, x, n, None);
            for y in 0..g.vertex_count() {
                assert!((k.value(y) * g.measure(y) - paths[y]).abs() < 1e-14);
            }
            if a.contains(x) {
                let kk = killed_kernel(&g, &a, x, n).unwrap();
                let paths = enumerate_paths(&g, x, n, Some(&a));
                for y in 0..g.vertex_count() {
                    assert!((kk.value(y) * g.measure(y) - paths[y]).abs() < 1e-14);
                }
            }
        }
    }
}

#[test]
fn survival_on_the_line_from_paths() {
    let g = line(41);
    let o = g.root().unwrap();
    // P(T < n) = 1 − P(first n − 1 positions stay in the ball)
    for (r, n) in [(2, 3), (3, 5), (4, 9), (5, 12)] {
        let ball = g.ball(o, r);
        let inside: f64 = enumerate_paths(&g, o, n - 1, Some(&ball)).iter().sum();
        let tail = survival_probability(&g, o, r, n).unwrap();
        assert!((tail - (1.0 - inside)).abs() < 1e-14, "R = {r}, n = {n}");
    }
    assert_eq!(survival_probability(&g, o, 2, 3).unwrap(), 0.5);
}

#[test]
fn dirichlet_eigenvalue_of_a_path() {
    let g = line(301);
    let o = g.root().unwrap();
    for r in [3usize, 10, 40, 120] {
        let m = 2 * r - 1;
        let exact = 2.0 * (std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin().powi(2);
        let l = lambda_min(&g, &g.ball(o, r)).unwrap();
        assert!((l.value - exact).abs() < 1e-10 * exact.max(1e-3), "R = {r}");
        assert!(l.certified_interval.0 <= exact * (1.0 + 1e-9) && exact <= l.certified_interval.1 * (1.0 + 1e-9));
    }
}

#[test]
fn resistances_add_in_series_and_parallel() {
    let g = build_graph(&[(0, 1, 2.0), (1, 2, 4.0), (2, 3, 0.5)]).unwrap();
    let r = effective_resistance(&g, &VertexSet::singleton(0), &VertexSet::singleton(3)).unwrap();
    assert!((r - (0.5 + 0.25 + 2.0)).abs() < 1e-12);

    let g = build_graph(&[(0, 1, 1.0), (1, 3, 1.0), (0, 2, 2.0), (2, 3, 2.0)]).unwrap();
    let r = effective_resistance(&g, &VertexSet::singleton(0), &VertexSet::singleton(3)).unwrap();
    assert!((r - 1.0 / (1.0 / 2.0 + 1.0 / 1.0)).abs() < 1e-12);
}

/// Brute-force count over all bitmasks of a small window.
#[test]
fn connected_subset_enumeration_is_complete() {
    let g = lattice_box(2, 5).unwrap();
    let root = g.root().unwrap();
    let n = g.vertex_count();
    let max_size = 6;
    let mut brute = 0usize;
    for mask in 0u32..(1 << n) {
        if mask & (1 << root) == 0 || mask.count_ones() as usize > max_size {
            continue;
        }
        // flood fill from root inside the mask
        let mut seen = 1u32 << root;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for (w, _) in g.neighbors(v) {
                if mask & (1 << w) != 0 && seen & (1 << w) == 0 {
                    seen |= 1 << w;
                    stack.push(w);
                }
            }
        }
        if seen == mask {
            brute += 1;
        }
    }
    let sets = connected_subsets_containing(&g, root, max_size, None).unwrap();
    assert_eq!(sets.len(), brute);
    let unique: std::collections::BTreeSet<_> = sets.iter().cloned().collect();
    assert_eq!(unique.len(), sets.len());
}

#[test]
fn monte_carlo_agrees_with_solvers() {
    let cases: Vec<(WeightedGraph, usize)> = vec![
        (line(101), 10),
        (lattice_box(2, 21).unwrap(), 5),
        (vicsek_tree(2).unwrap(), 6),
        (stretched_vicsek(2).unwrap(), 6),
        (weighted_vicsek(2, &[0.5, 1.0, 3.0]).unwrap(), 5),
    ];
    let mut misses = 0;
    for (i, (g, r)) in cases.iter().enumerate() {
        let o = g.root().unwrap();
        let ball = g.ball(o, *r);
        let exact = mean_exit_time(g, &ball, o).unwrap();
        let sim = simulate_exit(g, &ball, o, 4000, 100 + i as u64).unwrap();
        if !sim.agrees_with(exact, 3.0) {
            misses += 1;
        }
        let n = 2 * r * r;
        let tail = survival_probability(g, o, *r, n).unwrap();
        let sim = simulate_tail(g, o, *r, n, 4000, 200 + i as u64).unwrap();
        if !sim.agrees_with(tail, 3.0) {
            misses += 1;
        }
    }
    // 3σ misses happen about 0.3% of the time; one miss among ten is tolerated
    assert!(misses <= 1, "{misses} Monte Carlo estimates off by more than 3σ");
}
