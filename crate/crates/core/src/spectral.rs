//! Dirichlet energy and the smallest Dirichlet eigenvalue.
//!
//! `λ(A)` is the smallest eigenvalue of `I − S_A` with
//! `S_A(x, y) = μ_xy / √(μ(x) μ(y))` on `A`. Equivalently it solves the pencil
//! `M_A v = λ D_μ v`, which is what the iterative path works with.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletProblem;
use crate::error::{Error, Result};
use crate::graph::{VertexSet, WeightedGraph};

/// Components up to this size are solved densely.
pub const DENSE_LIMIT: usize = 400;
const MAX_INVERSE_ITERATIONS: usize = 20_000;

/// `E(f, f) = ½ Σ_{x,y} μ_xy (f(x) − f(y))²`.
pub fn dirichlet_energy(g: &WeightedGraph, f: &[f64]) -> f64 {
    g.edges()
        .iter()
        .map(|e| {
            let d = f[e.u] - f[e.v];
            e.weight * d * d
        })
        .sum()
}

/// `Σ f(x)² μ(x)`.
pub fn l2_norm_sq(g: &WeightedGraph, f: &[f64]) -> f64 {
    f.iter().enumerate().map(|(x, &v)| v * v * g.measure(x)).sum()
}

/// `Σ |f(x)| μ(x)`.
pub fn l1_norm(g: &WeightedGraph, f: &[f64]) -> f64 {
    f.iter().enumerate().map(|(x, &v)| v.abs() * g.measure(x)).sum()
}

pub fn rayleigh_quotient(g: &WeightedGraph, f: &[f64]) -> f64 {
    dirichlet_energy(g, f) / l2_norm_sq(g, f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub value: f64,
    /// Eigenfunction on the whole vertex set, zero off `A`, nonnegative, with
    /// `Σ f² μ = 1`.
    pub vector: Vec<f64>,
    /// `‖(I − S) v − λ v‖₂` for the symmetrized vector `v = √μ f`.
    pub residual: f64,
    pub certified_interval: (f64, f64),
}

/// `λ(A)`. Disconnected sets are split into components and the smallest
/// component eigenvalue is returned.
pub fn lambda_min(g: &WeightedGraph, a: &VertexSet) -> Result<EigenResult> {
    if a.is_empty() {
        return Err(Error::EmptySet);
    }
    g.check_set(a)?;
    if a.len() == g.vertex_count() {
        return Err(Error::WholeGraph);
    }
    g.guard_set(a)?;
    let mut best: Option<EigenResult> = None;
    for comp in g.components(a) {
        let res = if comp.len() <= DENSE_LIMIT {
            dense_component(g, &comp)
        } else {
            iterative_component(g, &comp)?
        };
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    Ok(best.expect("nonempty set has a component"))
}

/// `λ(A)⁻¹`.
pub fn inverse_lambda(g: &WeightedGraph, a: &VertexSet) -> Result<f64> {
    Ok(1.0 / lambda_min(g, a)?.value)
}

fn symmetrized(g: &WeightedGraph, comp: &VertexSet) -> DMatrix<f64> {
    let m = comp.members();
    let n = m.len();
    let mut s = DMatrix::<f64>::identity(n, n);
    for (i, &x) in m.iter().enumerate() {
        for (y, w) in g.neighbors(x) {
            if let Ok(j) = m.binary_search(&y) {
                s[(i, j)] -= w / (g.measure(x) * g.measure(y)).sqrt();
            }
        }
    }
    s
}

fn dense_component(g: &WeightedGraph, comp: &VertexSet) -> EigenResult {
    let s = symmetrized(g, comp);
    let eig = SymmetricEigen::new(s);
    let mut k = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    finish(g, comp, v)
}

fn iterative_component(g: &WeightedGraph, comp: &VertexSet) -> Result<EigenResult> {
    let problem = DirichletProblem::new(g, comp)?;
    let mu: Vec<f64> = comp.iter().map(|x| g.measure(x)).collect();
    let n = mu.len();
    // work with f (so M f = λ D f); start from the constant function
    let mut f = vec![1.0; n];
    normalize(&mut f, &mu);
    for _ in 0..MAX_INVERSE_ITERATIONS {
        let rhs: Vec<f64> = f.iter().zip(&mu).map(|(a, b)| a * b).collect();
        let mut next = problem.solve_local(&rhs)?;
        normalize(&mut next, &mu);
        let change = next
            .iter()
            .zip(&f)
            .zip(&mu)
            .map(|((a, b), m)| (a - b) * (a - b) * m)
            .sum::<f64>()
            .sqrt();
        f = next;
        if change <= 1e-14 {
            break;
        }
    }
    let v: Vec<f64> = f.iter().zip(&mu).map(|(a, m)| a * m.sqrt()).collect();
    Ok(finish(g, comp, v))
}

fn normalize(f: &mut [f64], mu: &[f64]) {
    let norm = f.iter().zip(mu).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
    for v in f.iter_mut() {
        *v /= norm;
    }
}

/// Packs a symmetrized eigenvector (local indices) into an [`EigenResult`]
/// with a Collatz–Wielandt / Rayleigh bracket.
fn finish(g: &WeightedGraph, comp: &VertexSet, mut v: Vec<f64>) -> EigenResult {
    let m = comp.members();
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    // everything below is evaluated through differences f(x) − f(y) of
    // f = v / √μ, which avoids the cancellation in 1 − (S v)_i / v_i
    let f: Vec<f64> = m.iter().zip(&v).map(|(&x, a)| a / g.measure(x).sqrt()).collect();
    let local = |y: usize| m.binary_search(&y).ok().map_or(0.0, |j| f[j]);
    let mut energy = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi_cw = f64::NEG_INFINITY;
    let mut residual_sq = 0.0;
    let mut mf = Vec::with_capacity(m.len());
    for (i, &x) in m.iter().enumerate() {
        let mut acc = 0.0;
        for (y, w) in g.neighbors(x) {
            if y != x {
                let d = f[i] - local(y);
                acc += w * d;
                if y > x || !comp.contains(y) {
                    energy += w * d * d;
                }
            }
        }
        mf.push(acc);
        let ratio = acc / (g.measure(x) * f[i]);
        lo = lo.min(ratio);
        hi_cw = hi_cw.max(ratio);
    }
    let norm_sq: f64 = m.iter().zip(&f).map(|(&x, a)| a * a * g.measure(x)).sum();
    let rq = energy / norm_sq;
    for (i, &x) in m.iter().enumerate() {
        let r = mf[i] / g.measure(x).sqrt() - rq * v[i];
        residual_sq += r * r;
    }
    let residual = residual_sq.sqrt();
    let positive = f.iter().all(|&a| a > 0.0);
    let (lo, hi) = if positive {
        (lo, rq.min(hi_cw))
    } else {
        (rq - residual, rq)
    };

    let mut vector = vec![0.0; g.vertex_count()];
    for (i, &x) in m.iter().enumerate() {
        vector[x] = v[i].abs() / g.measure(x).sqrt();
    }
    EigenResult {
        value: rq,
        vector,
        residual,
        certified_interval: (lo, hi),
    }
}

/// Nonnegative functions supported in `support`, each with a random number of
/// nonzero entries; deterministic given the seed.
pub fn random_nonnegative_functions(
    g: &WeightedGraph,
    support: &VertexSet,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = support.members();
    (0..count)
        .map(|_| {
            let mut f = vec![0.0; g.vertex_count()];
            let density: f64 = rng.random_range(0.05..1.0);
            let mut any = false;
            for &x in members {
                if rng.random::<f64>() < density {
                    f[x] = rng.random::<f64>();
                    any = true;
                }
            }
            if !any {
                f[members[rng.random_range(0..members.len())]] = 1.0;
            }
            f
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    pub a: f64,
    pub c: f64,
    pub delta: f64,
    pub functions: usize,
    /// `max a‖f‖₂²(‖f‖₂/‖f‖₁)^{2δ} / (C E(f, f))`.
    pub worst_ratio: f64,
    pub violations: usize,
}

/// Checks `a‖f‖₂²(‖f‖₂/‖f‖₁)^{2δ} ≤ C E(f, f)` on the given functions.
pub fn nash_check(g: &WeightedGraph, a: f64, c: f64, delta: f64, functions: &[Vec<f64>]) -> NashReport {
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for f in functions {
        let l2 = l2_norm_sq(g, f);
        let l1 = l1_norm(g, f);
        if l2 == 0.0 {
            continue;
        }
        let lhs = a * l2 * (l2.sqrt() / l1).powf(2.0 * delta);
        let rhs = c * dirichlet_energy(g, f);
        let ratio = lhs / rhs;
        worst = worst.max(ratio);
        if lhs > rhs * (1.0 + 1e-6) {
            violations += 1;
        }
    }
    NashReport {
        a,
        c,
        delta,
        functions: functions.len(),
        worst_ratio: worst,
        violations,
    }
}

/// Nash constants implied by `λ(A)⁻¹ ≤ K μ(A)^δ` for all `A` in a region:
/// `a = 2^{−δ−1/2}`, `C = K / a`.
pub fn nash_parameters(k: f64, delta: f64) -> (f64, f64) {
    let a = 2f64.powf(-delta - 0.5);
    (a, k / a)
}
