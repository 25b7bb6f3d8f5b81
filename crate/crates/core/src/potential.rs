//! Effective resistance, mean exit times, exit profiles and the
//! sub-Gaussian kernel `k`.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{dirichlet_matrix, DirichletProblem};
use crate::error::{Error, Result};
use crate::graph::{VertexId, VertexSet, WeightedGraph};
use crate::linalg::SpdSolver;
use crate::spectral::{dirichlet_energy, inverse_lambda};
use crate::volume::{dyadic_radii, least_squares_slope};

/// Minimiser of the Dirichlet energy with `f = 1` on `source`, `f = 0` on
/// `sink`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSolution {
    pub potential: Vec<f64>,
    pub energy: f64,
    pub source: VertexSet,
    pub sink: VertexSet,
    /// `max |f(x) − (P f)(x)|` over the free vertices.
    pub residual: f64,
}

impl HarmonicSolution {
    pub fn resistance(&self) -> f64 {
        1.0 / self.energy
    }
}

fn check_pair(g: &WeightedGraph, a: &VertexSet, b: &VertexSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    g.check_set(a)?;
    g.check_set(b)?;
    if let Some(x) = a.first_common(b) {
        return Err(Error::SetsIntersect(x));
    }
    Ok(())
}

/// Solves the Dirichlet problem behind `ρ(A, B)`.
pub fn harmonic_potential(g: &WeightedGraph, a: &VertexSet, b: &VertexSet) -> Result<HarmonicSolution> {
    check_pair(g, a, b)?;
    let fixed = a.union(b);
    let free = g.complement(&fixed);
    let mut potential = vec![0.0; g.vertex_count()];
    for x in a.iter() {
        potential[x] = 1.0;
    }
    let mut residual = 0.0;
    if !free.is_empty() {
        // the Laplacian restricted to the free vertices is M_free
        let m = dirichlet_matrix(g, &free);
        let rhs: Vec<f64> = free
            .iter()
            .map(|x| g.neighbors(x).filter(|&(y, _)| a.contains(y)).map(|(_, w)| w).sum())
            .collect();
        let solver = SpdSolver::new(m)?;
        let sol = solver.solve(&rhs)?;
        for (i, x) in free.iter().enumerate() {
            potential[x] = sol[i];
        }
        for x in free.iter() {
            let mut pf = 0.0;
            for (y, w) in g.neighbors(x) {
                pf += w * potential[y];
            }
            residual = f64::max(residual, (pf / g.measure(x) - potential[x]).abs());
        }
    }
    let energy = dirichlet_energy(g, &potential);
    if energy == 0.0 {
        return Err(Error::NoSeparation);
    }
    Ok(HarmonicSolution {
        potential,
        energy,
        source: a.clone(),
        sink: b.clone(),
        residual,
    })
}

/// `ρ(A, B) = (inf {E(f, f) : f|_A = 1, f|_B = 0})⁻¹`.
pub fn effective_resistance(g: &WeightedGraph, a: &VertexSet, b: &VertexSet) -> Result<f64> {
    Ok(harmonic_potential(g, a, b)?.resistance())
}

/// `ρ(x, r, R) = ρ(B(x, r), Γ \ B(x, R))`.
pub fn annulus_resistance(g: &WeightedGraph, x: VertexId, r: usize, big_r: usize) -> Result<f64> {
    if r == 0 || r >= big_r {
        return Err(Error::RadiusOrder(r, big_r));
    }
    g.check_vertex(x)?;
    g.guard(x, big_r)?;
    let outer = g.complement(&g.ball(x, big_r));
    effective_resistance(g, &g.ball(x, r), &outer)
}

/// `E_y(A)` for every `y` (zero off `A`).
pub fn exit_times(g: &WeightedGraph, a: &VertexSet) -> Result<Vec<f64>> {
    g.guard_set(a)?;
    let problem = DirichletProblem::new(g, a)?;
    Ok(problem.scatter(&problem.exit_times()?))
}

/// `E_x(A) = E(T_A | X_0 = x)`.
pub fn mean_exit_time(g: &WeightedGraph, a: &VertexSet, x: VertexId) -> Result<f64> {
    g.check_vertex(x)?;
    if !a.contains(x) {
        return Err(Error::SourceOutsideSet(x));
    }
    Ok(exit_times(g, a)?[x])
}

/// `Ē(A) = max_{x∈A} E_x(A)` and its smallest maximiser.
pub fn extreme_exit_time(g: &WeightedGraph, a: &VertexSet) -> Result<(f64, VertexId)> {
    let e = exit_times(g, a)?;
    let mut best = (f64::NEG_INFINITY, 0);
    for x in a.iter() {
        if e[x] > best.0 {
            best = (e[x], x);
        }
    }
    Ok(best)
}

/// `E(x, R) = E_x(B(x, R))`, with `E(x, 0) = 0`.
pub fn exit_time_ball(g: &WeightedGraph, x: VertexId, radius: usize) -> Result<f64> {
    g.check_vertex(x)?;
    if radius == 0 {
        return Ok(0.0);
    }
    g.guard(x, radius)?;
    let ball = g.ball(x, radius);
    let problem = DirichletProblem::new(g, &ball)?;
    let e = problem.exit_times()?;
    Ok(e[problem.local_index(x).expect("centre in ball")])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    /// Smallest consecutive dyadic slope.
    pub beta_prime: f64,
    /// RMS deviation of `log E` from the fitted line.
    pub residual: f64,
    /// `(R, log₂(E(2R) / E(R)))` for consecutive dyadic radii.
    pub local_slopes: Vec<(usize, f64)>,
}

/// Least-squares fit of `log E(R)` against `log R` over dyadic `R ≥ 2` (or
/// `R ≥ 1` when that leaves fewer than two points).
pub fn fit_beta(table: &[f64]) -> BetaFit {
    let r_max = table.len().saturating_sub(1);
    let mut radii = dyadic_radii(2, r_max);
    if radii.len() < 2 {
        radii = dyadic_radii(1, r_max);
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| ((r as f64).ln(), table[r].ln()))
        .collect();
    let beta = least_squares_slope(&pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let residual = (pts
        .iter()
        .map(|p| {
            let d = p.1 - (my + beta * (p.0 - mx));
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();
    let local_slopes: Vec<(usize, f64)> = radii
        .windows(2)
        .map(|w| (w[0], (table[w[1]] / table[w[0]]).log2()))
        .collect();
    let beta_prime = local_slopes.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    BetaFit {
        beta,
        beta_prime,
        residual,
        local_slopes,
    }
}

/// `R ↦ E(x, R)` for `R = 0..=r_max` with the fitted walk exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitProfile {
    pub center: VertexId,
    #[serde(rename = "E")]
    pub table: Vec<f64>,
    pub beta: f64,
    pub beta_prime: f64,
    pub fit_residual: f64,
    pub local_slopes: Vec<(usize, f64)>,
    pub q: f64,
}

impl ExitProfile {
    /// Wraps an already computed table.
    pub fn from_table(center: VertexId, table: Vec<f64>, q: f64) -> Self {
        let fit = fit_beta(&table);
        ExitProfile {
            center,
            table,
            beta: fit.beta,
            beta_prime: fit.beta_prime,
            fit_residual: fit.residual,
            local_slopes: fit.local_slopes,
            q,
        }
    }

    pub fn r_max(&self) -> usize {
        self.table.len() - 1
    }

    pub fn exit_time(&self, r: usize) -> f64 {
        self.table[r]
    }

    /// `e(x, n) = min {r : E(x, r) ≥ n}`.
    pub fn inverse(&self, n: f64) -> Result<usize> {
        inverse_exit(self, n)
    }
}

/// Computes `E(x, R)` for every `R ≤ r_max` (in parallel) and fits `β`.
pub fn exit_profile(g: &WeightedGraph, x: VertexId, r_max: usize, q: f64) -> Result<ExitProfile> {
    g.check_vertex(x)?;
    g.guard(x, r_max)?;
    let table: Vec<f64> = (0..=r_max)
        .into_par_iter()
        .map(|r| exit_time_ball(g, x, r))
        .collect::<Result<_>>()?;
    if let Some(r) = (1..table.len()).find(|&r| table[r] <= table[r - 1]) {
        return Err(Error::Solver(format!(
            "exit profile at {x} not strictly increasing at R = {r}"
        )));
    }
    Ok(ExitProfile::from_table(x, table, q))
}

/// `e(x, n) = min {r ∈ ℕ : E(x, r) ≥ n}`.
pub fn inverse_exit(profile: &ExitProfile, n: f64) -> Result<usize> {
    if n <= 0.0 {
        return Ok(0);
    }
    let last = *profile.table.last().expect("profile has E(x, 0)");
    if n > last {
        return Err(Error::BeyondProfile {
            requested: n,
            available: last,
        });
    }
    // solver rounding must not push an exact E(r) = n past r
    let n = n * (1.0 - 1e-12);
    Ok(profile.table.partition_point(|&e| e < n))
}

/// Largest `k ∈ 1..=R` with `n / k ≤ q E(⌊R/k⌋)`, or 0 if there is none.
/// `exit(r)` supplies `E(z, r)`; it is only asked for `r ≥ 1`.
pub fn subgaussian_k_with(
    n: usize,
    radius: usize,
    q: f64,
    mut exit: impl FnMut(usize) -> Result<f64>,
) -> Result<usize> {
    let mut best = 0;
    for k in 1..=radius {
        let r = radius / k;
        if n as f64 / k as f64 <= q * exit(r)? {
            best = k;
        }
    }
    Ok(best)
}

/// `k_z(n, R)` read from a precomputed profile.
pub fn subgaussian_k(profile: &ExitProfile, n: usize, radius: usize) -> Result<usize> {
    if radius > profile.r_max() {
        return Err(Error::BeyondProfile {
            requested: radius as f64,
            available: profile.r_max() as f64,
        });
    }
    subgaussian_k_with(n, radius, profile.q, |r| Ok(profile.table[r]))
}

/// Lazily filled table `(z, r) ↦ E(z, r)`, safe to share between threads.
#[derive(Debug)]
pub struct ExitCache<'g> {
    graph: &'g WeightedGraph,
    q: f64,
    table: Mutex<HashMap<(VertexId, usize), f64>>,
}

impl<'g> ExitCache<'g> {
    pub fn new(g: &'g WeightedGraph, q: f64) -> Self {
        ExitCache {
            graph: g,
            q,
            table: Mutex::new(HashMap::new()),
        }
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.table.lock().expect("exit cache").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `E(z, r)`.
    pub fn exit_time(&self, z: VertexId, r: usize) -> Result<f64> {
        if r == 0 {
            return Ok(0.0);
        }
        if let Some(&e) = self.table.lock().expect("exit cache").get(&(z, r)) {
            return Ok(e);
        }
        let e = exit_time_ball(self.graph, z, r)?;
        self.table.lock().expect("exit cache").insert((z, r), e);
        Ok(e)
    }

    /// Computes the missing entries among `keys` in parallel.
    pub fn prefetch(&self, keys: impl IntoIterator<Item = (VertexId, usize)>) -> Result<()> {
        let missing: Vec<(VertexId, usize)> = {
            let table = self.table.lock().expect("exit cache");
            let set: BTreeSet<(VertexId, usize)> = keys
                .into_iter()
                .filter(|k| k.1 > 0 && !table.contains_key(k))
                .collect();
            set.into_iter().collect()
        };
        let values: Vec<f64> = missing
            .par_iter()
            .map(|&(z, r)| exit_time_ball(self.graph, z, r))
            .collect::<Result<_>>()?;
        let mut table = self.table.lock().expect("exit cache");
        for (k, v) in missing.into_iter().zip(values) {
            table.insert(k, v);
        }
        Ok(())
    }

    /// `k_z(n, R)`.
    pub fn k_z(&self, z: VertexId, n: usize, radius: usize) -> Result<usize> {
        subgaussian_k_with(n, radius, self.q, |r| self.exit_time(z, r))
    }

    /// `k(x, n, R) = min_{z ∈ B(x, R)} k_z(n, R)`.
    pub fn kernel_k(&self, x: VertexId, n: usize, radius: usize) -> Result<usize> {
        let ball = self.graph.ball(x, radius);
        self.min_k_over(&ball, n, radius)
    }

    fn min_k_over(&self, zs: &VertexSet, n: usize, radius: usize) -> Result<usize> {
        let radii: BTreeSet<usize> = (1..=radius).map(|k| radius / k).collect();
        self.prefetch(zs.iter().flat_map(|z| radii.iter().map(move |&r| (z, r))))?;
        let mut best = usize::MAX;
        for z in zs.iter() {
            best = best.min(self.k_z(z, n, radius)?);
            if best == 0 {
                break;
            }
        }
        Ok(if best == usize::MAX { 0 } else { best })
    }

    /// `k(n, A, B) = min_{z ∈ A} k(z, n, d)` with `d = d(A, B)`; the union of
    /// the balls `B(z, d)` is `{w : d(w, A) < d}`.
    pub fn k_sets(&self, n: usize, a: &VertexSet, b: &VertexSet) -> Result<usize> {
        check_pair(self.graph, a, b)?;
        let dist = self.graph.distances_from_set(a);
        let d = b.iter().map(|y| dist[y] as usize).min().expect("nonempty");
        let near: VertexSet = (0..self.graph.vertex_count())
            .filter(|&w| (dist[w] as usize) < d)
            .collect();
        self.min_k_over(&near, n, d)
    }

    /// `κ(n, A, B) = max {k(n, A, B), k(n, B, A)}`.
    pub fn kappa(&self, n: usize, a: &VertexSet, b: &VertexSet) -> Result<usize> {
        Ok(self.k_sets(n, a, b)?.max(self.k_sets(n, b, a)?))
    }
}

/// One row of the comparison between the four scale functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerRow {
    pub center: VertexId,
    pub radius: usize,
    /// `λ⁻¹(B(x, 2R))`.
    pub inverse_lambda: f64,
    /// `E(x, 2R)`.
    pub exit_time: f64,
    /// `Ē(B(x, 2R))`.
    pub extreme_exit: f64,
    /// `ρ(x, R, 2R) v(x, R, 2R)`.
    pub resistance_volume: f64,
    /// max / min of the four.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerReport {
    pub rows: Vec<SerRow>,
    /// All pairwise ratios lie in `[1/C, C]`.
    pub constant: f64,
}

pub fn ser_report(g: &WeightedGraph, centers: &[VertexId], radii: &[usize]) -> Result<SerReport> {
    let jobs: Vec<(VertexId, usize)> = centers
        .iter()
        .flat_map(|&x| radii.iter().map(move |&r| (x, r)))
        .collect();
    let rows: Vec<SerRow> = jobs
        .par_iter()
        .map(|&(x, r)| {
            let big = g.ball(x, 2 * r);
            g.guard(x, 2 * r)?;
            let il = inverse_lambda(g, &big)?;
            let ex = exit_time_ball(g, x, 2 * r)?;
            let (ee, _) = extreme_exit_time(g, &big)?;
            let rv = annulus_resistance(g, x, r, 2 * r)? * g.annulus_volume(x, r, 2 * r)?;
            let vals = [il, ex, ee, rv];
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(SerRow {
                center: x,
                radius: r,
                inverse_lambda: il,
                exit_time: ex,
                extreme_exit: ee,
                resistance_volume: rv,
                spread: hi / lo,
            })
        })
        .collect::<Result<_>>()?;
    let constant = rows.iter().map(|r| r.spread).fold(1.0, f64::max);
    Ok(SerReport { rows, constant })
}

/// Smallest integer `A ≥ 2` with `E(x, A R) ≥ 2 E(x, R)` for every tested
/// radius that the profile reaches; `None` if no such `A` fits.
pub fn exit_anti_doubling(profiles: &[ExitProfile], radii: &[usize]) -> Option<usize> {
    let reach = profiles.iter().map(|p| p.r_max()).min()?;
    for a in 2..=reach.max(2) {
        let mut tested = 0;
        let mut ok = true;
        for p in profiles {
            for &r in radii.iter().filter(|&&r| r >= 1 && a * r <= reach) {
                tested += 1;
                ok &= p.table[a * r] >= 2.0 * p.table[r];
            }
        }
        if tested == 0 {
            return None;
        }
        if ok {
            return Some(a);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLowerReport {
    pub beta: f64,
    /// Largest `c` with `k(x, n, R) + 1 ≥ c (E(x, R)/n)^{1/(β−1)}` on all
    /// tested triples.
    pub c: f64,
    pub triples: usize,
    pub witness: Option<(VertexId, usize, usize)>,
}

/// Fits the constant in the lower bound for `k` over `(x, n, R)` triples.
pub fn k_lower_report(
    cache: &ExitCache<'_>,
    triples: &[(VertexId, usize, usize)],
    beta: f64,
) -> Result<KLowerReport> {
    let mut c = f64::INFINITY;
    let mut witness = None;
    for &(x, n, r) in triples {
        let k = cache.kernel_k(x, n, r)?;
        let e = cache.exit_time(x, r)?;
        let rhs = (e / n as f64).powf(1.0 / (beta - 1.0));
        let ratio = (k as f64 + 1.0) / rhs;
        if ratio < c {
            c = ratio;
            witness = Some((x, n, r));
        }
    }
    Ok(KLowerReport {
        beta,
        c,
        triples: triples.len(),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{lattice_box, vicsek_tree};
    use crate::graph::build_graph;

    #[test]
    fn resistance_examples() {
        let p = build_graph(&[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let r = effective_resistance(&p, &VertexSet::singleton(0), &VertexSet::singleton(2)).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
        let c4 = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
        let r = effective_resistance(&c4, &VertexSet::singleton(0), &VertexSet::singleton(2)).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        let r = effective_resistance(&p, &VertexSet::singleton(0), &VertexSet::singleton(1)).unwrap();
        assert!((r - 1.0).abs() < 1e-14);
        assert_eq!(
            effective_resistance(&p, &VertexSet::new([0, 1]), &VertexSet::new([1, 2])).unwrap_err(),
            Error::SetsIntersect(1)
        );
    }

    #[test]
    fn harmonic_solution_is_harmonic() {
        let g = lattice_box(2, 9).unwrap();
        let o = g.root().unwrap();
        let h = harmonic_potential(&g, &VertexSet::singleton(o), &g.boundary(&g.ball(o, 3))).unwrap();
        assert!(h.residual < 1e-12);
        assert!(h.potential.iter().all(|&v| (-1e-15..=1.0 + 1e-15).contains(&v)));
    }

    #[test]
    fn annulus_examples() {
        let g = lattice_box(1, 41).unwrap();
        let o = g.root().unwrap();
        assert!((annulus_resistance(&g, o, 1, 2).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(annulus_resistance(&g, o, 2, 2).unwrap_err(), Error::RadiusOrder(2, 2));
        assert!(matches!(
            annulus_resistance(&g, o, 1, 21),
            Err(Error::HorizonExceeded { .. })
        ));
    }

    #[test]
    fn exit_time_examples() {
        let g = lattice_box(1, 41).unwrap();
        let o = g.root().unwrap();
        assert_eq!(mean_exit_time(&g, &VertexSet::singleton(o), o).unwrap(), 1.0);
        for r in 1..=10 {
            let e = exit_time_ball(&g, o, r).unwrap();
            assert!((e - (r * r) as f64).abs() < 1e-9);
        }
        let (e, x) = extreme_exit_time(&g, &g.ball(o, 3)).unwrap();
        assert!((e - 9.0).abs() < 1e-12);
        assert_eq!(x, o);
        assert_eq!(
            mean_exit_time(&g, &VertexSet::singleton(o), o + 1).unwrap_err(),
            Error::SourceOutsideSet(o + 1)
        );
    }

    #[test]
    fn extreme_exit_breaks_ties_by_smallest_id() {
        let g = lattice_box(1, 41).unwrap();
        let o = g.root().unwrap();
        // {o, o+1}: both points exit in 2 steps on average
        let (e, x) = extreme_exit_time(&g, &VertexSet::new([o, o + 1])).unwrap();
        assert!((e - 2.0).abs() < 1e-12);
        assert_eq!(x, o);
    }

    #[test]
    fn profile_and_inverse() {
        let g = lattice_box(1, 301).unwrap();
        let p = exit_profile(&g, g.root().unwrap(), 64, 1.0).unwrap();
        assert!((p.beta - 2.0).abs() < 0.1);
        assert!((p.beta_prime - 2.0).abs() < 1e-6);
        assert_eq!(inverse_exit(&p, 10.0).unwrap(), 4);
        assert_eq!(inverse_exit(&p, 16.0).unwrap(), 4);
        assert_eq!(inverse_exit(&p, 0.0).unwrap(), 0);
        assert!(matches!(inverse_exit(&p, 1e6), Err(Error::BeyondProfile { .. })));
        let back: ExitProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn vicsek_walk_dimension() {
        let g = vicsek_tree(4).unwrap();
        let p = exit_profile(&g, g.root().unwrap(), 128, 1.0).unwrap();
        let beta = 15f64.ln() / 3f64.ln();
        assert!((p.beta - beta).abs() < 0.1 * beta, "beta {}", p.beta);
    }

    #[test]
    fn subgaussian_k_examples() {
        let sq = |r: usize| Ok((r * r) as f64);
        assert_eq!(subgaussian_k_with(4, 8, 1.0, sq).unwrap(), 8);
        assert_eq!(subgaussian_k_with(100, 8, 1.0, sq).unwrap(), 0);
        assert_eq!(subgaussian_k_with(1, 50, 1.0, sq).unwrap(), 50);
    }

    #[test]
    fn kappa_is_symmetric_on_a_line() {
        let g = lattice_box(1, 201).unwrap();
        let o = g.root().unwrap();
        let cache = ExitCache::new(&g, 1.0);
        let a = g.ball(o - 10, 3);
        let b = g.ball(o + 10, 3);
        let kab = cache.k_sets(30, &a, &b).unwrap();
        let kba = cache.k_sets(30, &b, &a).unwrap();
        assert_eq!(kab, kba);
        assert_eq!(cache.kappa(30, &a, &b).unwrap(), kab);
        let near_a = VertexSet::singleton(o);
        let near_b = VertexSet::singleton(o + 1);
        assert!(cache.kappa(1000, &near_a, &near_b).unwrap() <= 1);
    }
}
