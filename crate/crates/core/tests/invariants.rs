//! Properties of every reversible walk, checked on random small weighted
//! graphs against dense-matrix oracles.

use nalgebra::DMatrix;
use proptest::prelude::*;

use heatlab_core::isoperimetry::{check_lebar, check_llrv};
use heatlab_core::kernel::{green_function, heat_kernel_finite, kernel_sanity, SanityConfig};
use heatlab_core::potential::effective_resistance;
use heatlab_core::spectral::lambda_min;
use heatlab_core::{build_graph, VertexSet, WeightedGraph};

/// Random connected graph: a random spanning tree plus extra edges.
fn graph_strategy() -> impl Strategy<Value = WeightedGraph> {
    (4usize..12)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            let tree_w = prop::collection::vec(0.1f64..10.0, n - 1);
            let extra = prop::collection::vec((0..n, 0..n, 0.1f64..10.0), 0..n);
            (Just(n), parents, tree_w, extra)
        })
        .prop_map(|(n, parents, tree_w, extra)| {
            let mut edges: Vec<(usize, usize, f64)> =
                parents.iter().enumerate().map(|(i, &p)| (p, i + 1, tree_w[i])).collect();
            for (u, v, w) in extra {
                let (u, v) = (u.min(v), u.max(v));
                if u != v && !edges.iter().any(|e| (e.0.min(e.1), e.0.max(e.1)) == (u, v)) {
                    edges.push((u, v, w));
                }
            }
            let _ = n;
            build_graph(&edges).unwrap()
        })
}

fn transition_matrix(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.vertex_count();
    DMatrix::from_fn(n, n, |x, y| g.weight(x, y) / g.measure(x))
}

fn proper_subset(g: &WeightedGraph, bits: u64) -> VertexSet {
    let n = g.vertex_count();
    let mut a: Vec<usize> = (0..n).filter(|&i| bits & (1 << i) != 0).collect();
    if a.is_empty() {
        a.push(0);
    }
    if a.len() == n {
        a.pop();
    }
    VertexSet::new(a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_matches_matrix_power(g in graph_strategy(), n in 0usize..9) {
        let p = transition_matrix(&g).pow(n as u32);
        for x in 0..g.vertex_count() {
            let k = heat_kernel_finite(&g, x, n).unwrap();
            for y in 0..g.vertex_count() {
                prop_assert!((k.value(y) * g.measure(y) - p[(x, y)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sanity_holds_everywhere(g in graph_strategy(), seed in 0u64..1000) {
        let cfg = SanityConfig { n_max: 5, sets: 4, tuples: 200, seed };
        let rep = kernel_sanity(&g, &cfg).unwrap();
        prop_assert!(rep.pass(), "{:?}", rep);
    }

    #[test]
    fn green_function_is_symmetric(g in graph_strategy(), bits in any::<u64>()) {
        let a = proper_subset(&g, bits);
        // oracle: G = (I − P_A)^{-1}, g = G / μ
        let m = a.len();
        let members = a.members();
        let ia = DMatrix::from_fn(m, m, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - g.weight(members[i], members[j]) / g.measure(members[i])
        });
        let inv = ia.try_inverse().unwrap();
        for (i, &y) in members.iter().enumerate() {
            let row = green_function(&g, &a, y).unwrap();
            for (j, &z) in members.iter().enumerate() {
                prop_assert!((row[z] - inv[(i, j)]).abs() < 1e-8 * inv[(i, j)].abs().max(1.0));
                let other = green_function(&g, &a, z).unwrap();
                prop_assert!((row[z] / g.measure(z) - other[y] / g.measure(y)).abs() < 1e-10 * (row[z] / g.measure(z)).max(1.0));
            }
        }
    }

    #[test]
    fn deleting_an_edge_never_lowers_resistance(g in graph_strategy(), pick in any::<usize>()) {
        let n = g.vertex_count();
        let a = VertexSet::singleton(0);
        let b = VertexSet::singleton(n - 1);
        let before = effective_resistance(&g, &a, &b).unwrap();
        let edges: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
        let k = pick % edges.len();
        let rest: Vec<_> = edges.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, e)| *e).collect();
        if let Ok(h) = build_graph(&rest) {
            if h.vertex_count() == n {
                let after = effective_resistance(&h, &a, &b).unwrap();
                prop_assert!(after >= before - 1e-10 * before);
            }
        }
    }

    #[test]
    fn eigenvalue_and_resistance_lemmas(g in graph_strategy(), bits in any::<u64>(), inner in any::<u64>()) {
        let b = proper_subset(&g, bits);
        let a: VertexSet = b.iter().enumerate().filter(|(i, _)| inner & (1 << i) != 0).map(|(_, x)| x).collect();
        let a = if a.is_empty() { VertexSet::singleton(b.members()[0]) } else { a };
        let llrv = check_llrv(&g, &[(a, b.clone())]).unwrap();
        prop_assert_eq!(llrv.violations, 0, "{:?}", llrv);
        let lebar = check_lebar(&g, &[b.clone()]).unwrap();
        prop_assert_eq!(lebar.violations, 0, "{:?}", lebar);

        // λ from the dense generalized eigenproblem
        let members = b.members();
        let m = members.len();
        let s = DMatrix::from_fn(m, m, |i, j| {
            let (x, y) = (members[i], members[j]);
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - g.weight(x, y) / (g.measure(x) * g.measure(y)).sqrt()
        });
        let exact = s.symmetric_eigen().eigenvalues.min();
        let l = lambda_min(&g, &b).unwrap().value;
        prop_assert!((l - exact).abs() < 1e-9);
    }
}
