//! Transition operator, heat kernels, killed walks, Green functions and the
//! two-step graph.
//!
//! Kernels are computed by propagating the distribution `P_n(x, ·)` one sparse
//! step at a time; only the current support is touched, so short times on big
//! graphs stay cheap. `p_n(x, y) = P_n(x, y) / μ(y)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dirichlet::DirichletProblem;
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, GraphMeta, VertexId, VertexSet, WeightedGraph};

/// `(P f)(x) = Σ_y P(x, y) f(y)`.
pub fn transition_step(g: &WeightedGraph, f: &[f64]) -> Vec<f64> {
    (0..g.vertex_count())
        .map(|x| {
            let mut acc = 0.0;
            for (y, w) in g.neighbors(x) {
                acc += w * f[y];
            }
            acc / g.measure(x)
        })
        .collect()
}

/// One row `p_n(source, ·)` of the heat kernel, possibly killed outside a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSlice {
    pub source: VertexId,
    pub time: usize,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub killed_on: Option<VertexSet>,
}

impl KernelSlice {
    pub fn value(&self, y: VertexId) -> f64 {
        self.values[y]
    }

    /// `Σ_y p_n(x, y) μ(y)`, the probability the walk is still alive.
    pub fn mass(&self, g: &WeightedGraph) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(y, &p)| p * g.measure(y))
            .sum()
    }
}

/// Step-by-step evolution of the distribution of the walk started at a vertex,
/// optionally killed on leaving a set.
#[derive(Debug, Clone)]
pub struct HeatFlow<'g> {
    graph: &'g WeightedGraph,
    source: VertexId,
    time: usize,
    /// `P_n(x, y)` (probability, not density).
    dist: Vec<f64>,
    scratch: Vec<f64>,
    support: Vec<VertexId>,
    in_support: Vec<bool>,
    alive: Option<Vec<bool>>,
    killed_on: Option<VertexSet>,
}

impl<'g> HeatFlow<'g> {
    pub fn new(g: &'g WeightedGraph, x: VertexId) -> Result<Self> {
        g.check_vertex(x)?;
        let n = g.vertex_count();
        let mut dist = vec![0.0; n];
        dist[x] = 1.0;
        let mut in_support = vec![false; n];
        in_support[x] = true;
        Ok(HeatFlow {
            graph: g,
            source: x,
            time: 0,
            dist,
            scratch: vec![0.0; n],
            support: vec![x],
            in_support,
            alive: None,
            killed_on: None,
        })
    }

    /// Walk killed on leaving `a`; `x` must lie in `a`.
    pub fn killed(g: &'g WeightedGraph, a: &VertexSet, x: VertexId) -> Result<Self> {
        g.check_set(a)?;
        if !a.contains(x) {
            return Err(Error::SourceOutsideSet(x));
        }
        let mut flow = HeatFlow::new(g, x)?;
        flow.alive = Some(g.mask(a));
        flow.killed_on = Some(a.clone());
        Ok(flow)
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// Advances one step of the (killed) walk.
    pub fn step(&mut self) {
        let g = self.graph;
        let mut new_support = Vec::with_capacity(self.support.len() * 2);
        for &y in &self.support {
            for (z, _) in g.neighbors(y) {
                if !self.in_support[z] && self.alive.as_ref().is_none_or(|m| m[z]) {
                    self.in_support[z] = true;
                    new_support.push(z);
                }
            }
        }
        if !new_support.is_empty() {
            self.support.extend(new_support);
            self.support.sort_unstable();
        }
        // pull form: new(z) = Σ_y dist(y) μ_yz / μ(y), summed in neighbour order
        for &z in &self.support {
            let mut acc = 0.0;
            for (y, w) in g.neighbors(z) {
                if self.in_support[y] {
                    acc += self.dist[y] * w / g.measure(y);
                }
            }
            self.scratch[z] = acc;
        }
        for &z in &self.support {
            self.dist[z] = self.scratch[z];
        }
        self.time += 1;
    }

    /// `P_n(x, y)`.
    pub fn probability(&self, y: VertexId) -> f64 {
        self.dist[y]
    }

    /// `p_n(x, y)`.
    pub fn density(&self, y: VertexId) -> f64 {
        self.dist[y] / self.graph.measure(y)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.dist
    }

    /// `Σ_y P_n(x, y)`, summed in vertex order.
    pub fn total_probability(&self) -> f64 {
        self.support.iter().map(|&y| self.dist[y]).sum()
    }

    pub fn support(&self) -> &[VertexId] {
        &self.support
    }

    pub fn slice(&self) -> KernelSlice {
        KernelSlice {
            source: self.source,
            time: self.time,
            values: (0..self.graph.vertex_count()).map(|y| self.density(y)).collect(),
            killed_on: self.killed_on.clone(),
        }
    }
}

/// `p_n(x, ·)` on the finite graph, with no exactness guard.
pub fn heat_kernel_finite(g: &WeightedGraph, x: VertexId, n: usize) -> Result<KernelSlice> {
    let mut flow = HeatFlow::new(g, x)?;
    for _ in 0..n {
        flow.step();
    }
    Ok(flow.slice())
}

/// `p_n(x, ·)`, guarded so that the result equals the kernel of the infinite
/// graph the finite one stands in for.
pub fn heat_kernel(g: &WeightedGraph, x: VertexId, n: usize) -> Result<KernelSlice> {
    g.check_vertex(x)?;
    g.guard(x, n)?;
    heat_kernel_finite(g, x, n)
}

/// `p_n^A(x, ·)` for the walk killed on leaving `a`.
pub fn killed_kernel(
    g: &WeightedGraph,
    a: &VertexSet,
    x: VertexId,
    n: usize,
) -> Result<KernelSlice> {
    g.guard_set(a)?;
    let mut flow = HeatFlow::killed(g, a, x)?;
    for _ in 0..n {
        flow.step();
    }
    Ok(flow.slice())
}

/// Row `G^A(y, ·) = Σ_k P_k^A(y, ·)` (expected visits before exiting `a`), as
/// a full-length vector vanishing off `a`.
pub fn green_function(g: &WeightedGraph, a: &VertexSet, y: VertexId) -> Result<Vec<f64>> {
    g.check_vertex(y)?;
    if !a.contains(y) {
        return Err(Error::SourceOutsideSet(y));
    }
    let problem = DirichletProblem::new(g, a)?;
    let row = problem.green_kernel_row(y)?;
    let mut out = problem.scatter(&row);
    for (z, v) in out.iter_mut().enumerate() {
        *v *= g.measure(z);
    }
    Ok(out)
}

/// `P_x(T_{B(x,R)} < n)`.
pub fn survival_probability(g: &WeightedGraph, x: VertexId, radius: usize, n: usize) -> Result<f64> {
    if n == 0 || radius == 0 {
        return Err(Error::InvalidParameter(
            "survival probability needs n ≥ 1 and R ≥ 1".into(),
        ));
    }
    Ok(exit_tail_curve(g, x, radius, n)?[n - 1])
}

/// `P_x(T_{B(x,R)} < n)` for `n = 1..=n_max` (entry `n − 1`).
pub fn exit_tail_curve(g: &WeightedGraph, x: VertexId, radius: usize, n_max: usize) -> Result<Vec<f64>> {
    g.check_vertex(x)?;
    g.guard(x, radius)?;
    let ball = g.ball(x, radius);
    let mut flow = HeatFlow::killed(g, &ball, x)?;
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        // P(T ≥ n) = P(X_0, …, X_{n−1} ∈ B)
        while flow.time() < n - 1 {
            flow.step();
        }
        out.push((1.0 - flow.total_probability()).clamp(0.0, 1.0));
    }
    Ok(out)
}

/// The graph `Γ*` of the two-step walk: `μ*_xy = Σ_z μ_xz μ_zy / μ(z)`.
///
/// When `Γ` is bipartite, `Γ*` splits into two parity classes and the one
/// containing the root (vertex 0 if there is no root) is returned with compact
/// ids; `meta.original_ids` maps them back. A vertex of `Γ*` is on the
/// truncation boundary when it is within distance one of the boundary of `Γ`.
pub fn two_step_graph(g: &WeightedGraph) -> Result<WeightedGraph> {
    let n = g.vertex_count();
    let root = g.root().unwrap_or(0);
    let colour = g.bipartition();
    let keep: Vec<bool> = match &colour {
        Some(c) => (0..n).map(|x| c[x] == c[root]).collect(),
        None => vec![true; n],
    };
    let mut new_id = vec![usize::MAX; n];
    let mut original = Vec::new();
    for x in 0..n {
        if keep[x] {
            new_id[x] = original.len();
            original.push(x);
        }
    }

    let mut terms: Vec<(VertexId, VertexId, f64)> = Vec::new();
    for z in 0..n {
        let nb: Vec<(VertexId, f64)> = g.neighbors(z).filter(|&(x, _)| keep[x]).collect();
        for (i, &(x, wx)) in nb.iter().enumerate() {
            for &(y, wy) in &nb[i..] {
                terms.push((new_id[x], new_id[y], wx * wy / g.measure(z)));
            }
        }
    }
    terms.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut edges: Vec<(VertexId, VertexId, f64)> = Vec::new();
    for (u, v, w) in terms {
        match edges.last_mut() {
            Some(last) if last.0 == u && last.1 == v => last.2 += w,
            _ => edges.push((u, v, w)),
        }
    }

    let parent = g.meta();
    let boundary: Vec<VertexId> = if parent.boundary.is_empty() {
        Vec::new()
    } else {
        let near = g.distances_from_set(&VertexSet::new(parent.boundary.iter().copied()));
        original
            .iter()
            .enumerate()
            .filter(|&(_, &x)| near[x] <= 1)
            .map(|(i, _)| i)
            .collect()
    };
    let meta = GraphMeta {
        family: "two_step".into(),
        params: json!({ "parent": parent.family, "parent_params": parent.params })
            .as_object()
            .cloned()
            .unwrap_or_default(),
        safe_radius: None,
        coords: parent
            .coords
            .as_ref()
            .map(|c| original.iter().map(|&x| c[x].clone()).collect()),
        boundary,
        cut_vertices: parent
            .cut_vertices
            .iter()
            .filter(|&&z| keep[z])
            .map(|&z| new_id[z])
            .collect(),
        parity: colour.as_ref().map(|c| c[root]),
        original_ids: Some(original),
    };
    let mut star = GraphBuilder::new()
        .vertex_count(new_id.iter().filter(|&&i| i != usize::MAX).count())
        .allow_self_loops(true)
        .edges(edges)
        .root(new_id[root])
        .meta(meta)
        .build()?;
    star.stamp_safe_radius();
    Ok(star)
}

/// `min_x P(x, x)`, the holding probability bound of a graph with self-loops.
pub fn min_holding_probability(g: &WeightedGraph) -> f64 {
    (0..g.vertex_count())
        .map(|x| g.self_loop_weight(x) / g.measure(x))
        .fold(f64::INFINITY, f64::min)
}

/// Bounded cache of unkilled kernel rows keyed by `(source, time)`.
#[derive(Debug, Default)]
pub struct KernelCache {
    rows: HashMap<(VertexId, usize), KernelSlice>,
    capacity: usize,
}

impl KernelCache {
    pub fn with_capacity(capacity: usize) -> Self {
        KernelCache {
            rows: HashMap::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn get(&mut self, g: &WeightedGraph, x: VertexId, n: usize) -> Result<&KernelSlice> {
        if !self.rows.contains_key(&(x, n)) {
            if self.rows.len() >= self.capacity {
                self.rows.clear();
            }
            let slice = heat_kernel_finite(g, x, n)?;
            self.rows.insert((x, n), slice);
        }
        Ok(&self.rows[&(x, n)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SanityConfig {
    /// Kernels are tabulated for times `0..=2 n_max`.
    pub n_max: usize,
    /// Random connected sets used for killed kernels.
    pub sets: usize,
    /// Sampled tuples for each of the two kernel inequalities.
    pub tuples: usize,
    pub seed: u64,
}

impl Default for SanityConfig {
    fn default() -> Self {
        SanityConfig {
            n_max: 10,
            sets: 20,
            tuples: 10_000,
            seed: 7,
        }
    }
}

/// Identities and inequalities every reversible kernel satisfies, measured on
/// the finite graph itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSanity {
    /// `max |Σ_y P_n(x, y) − 1|`.
    pub mass_error: f64,
    /// `max |p_n(x, y) − p_n(y, x)|`.
    pub symmetry_error: f64,
    /// `max |P_{n+m}(x, y) − Σ_z P_n(x, z) P_m(z, y)|`.
    pub ck_error: f64,
    /// Times `p^A_{2k+2}(x, x) > p^A_{2k}(x, x)`.
    pub even_monotone_violations: usize,
    /// `p^A_{n+m}(x, y) ≤ √(p^A_{2n}(x, x) p^A_{2m}(y, y))`.
    pub semigroup_tested: usize,
    pub semigroup_violations: usize,
    /// First-exit bound `p_n ≤ p^A_n + P_x(T_A < n) max_{z∈∂A, k<n} p_k(z, y)`.
    pub first_exit_tested: usize,
    pub first_exit_violations: usize,
}

impl KernelSanity {
    pub fn pass(&self) -> bool {
        self.mass_error <= 1e-12
            && self.symmetry_error <= 1e-12
            && self.ck_error <= 1e-10
            && self.even_monotone_violations == 0
            && self.semigroup_violations == 0
            && self.first_exit_violations == 0
    }
}

/// `table[n][i]` is the row `P_n(x_i, ·)` (probabilities), optionally killed.
fn kernel_table(g: &WeightedGraph, sources: &[VertexId], killed: Option<&VertexSet>, t_max: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut table = vec![Vec::with_capacity(sources.len()); t_max + 1];
    for &x in sources {
        let mut flow = match killed {
            Some(a) => HeatFlow::killed(g, a, x)?,
            None => HeatFlow::new(g, x)?,
        };
        table[0].push(flow.probabilities().to_vec());
        for row in table.iter_mut().skip(1) {
            flow.step();
            row.push(flow.probabilities().to_vec());
        }
    }
    Ok(table)
}

/// Runs every kernel sanity check on a small graph (at most 2000 vertices).
pub fn kernel_sanity(g: &WeightedGraph, cfg: &SanityConfig) -> Result<KernelSanity> {
    use rand::{Rng, SeedableRng};
    let nv = g.vertex_count();
    if nv > 2000 {
        return Err(Error::InvalidParameter(format!(
            "kernel sanity tabulates dense kernels; {nv} vertices is too many"
        )));
    }
    let t_max = 2 * cfg.n_max;
    let all: Vec<VertexId> = (0..nv).collect();
    let p = kernel_table(g, &all, None, t_max)?;
    let mu = g.measures();

    let mut mass_error: f64 = 0.0;
    let mut symmetry_error: f64 = 0.0;
    for rows in &p {
        for x in 0..nv {
            mass_error = mass_error.max((rows[x].iter().sum::<f64>() - 1.0).abs());
            for y in 0..x {
                symmetry_error = symmetry_error.max((rows[x][y] / mu[y] - rows[y][x] / mu[x]).abs());
            }
        }
    }
    let mut ck_error: f64 = 0.0;
    for n in 0..=cfg.n_max {
        for m in 0..=cfg.n_max {
            for x in 0..nv {
                for y in 0..nv {
                    let composed: f64 = (0..nv).map(|z| p[n][x][z] * p[m][z][y]).sum();
                    ck_error = ck_error.max((p[n + m][x][y] - composed).abs());
                }
            }
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sets = Vec::new();
    for _ in 0..cfg.sets.max(1) {
        let start = rng.random_range(0..nv);
        let size = rng.random_range(1..=(nv / 2).max(1));
        sets.push(crate::graph::random_connected_set(g, start, size, None, &mut rng));
    }
    let mut even_monotone_violations = 0;
    let killed: Vec<Vec<Vec<Vec<f64>>>> = sets
        .iter()
        .map(|a| kernel_table(g, a.members(), Some(a), t_max))
        .collect::<Result<_>>()?;
    for (a, table) in sets.iter().zip(&killed) {
        for (i, x) in a.iter().enumerate() {
            for k in 1..=cfg.n_max {
                if table[2 * k][i][x] > table[2 * k - 2][i][x] * (1.0 + 1e-12) {
                    even_monotone_violations += 1;
                }
            }
        }
    }

    let (mut semigroup_tested, mut semigroup_violations) = (0, 0);
    let (mut first_exit_tested, mut first_exit_violations) = (0, 0);
    for _ in 0..cfg.tuples {
        let s = rng.random_range(0..sets.len());
        let (a, table) = (&sets[s], &killed[s]);
        let i = rng.random_range(0..a.len());
        let j = rng.random_range(0..a.len());
        let (x, y) = (a.members()[i], a.members()[j]);
        let n = rng.random_range(0..=cfg.n_max);
        let m = rng.random_range(0..=cfg.n_max);
        let lhs = table[n + m][i][y] / mu[y];
        let rhs = (table[2 * n][i][x] / mu[x] * table[2 * m][j][y] / mu[y]).sqrt();
        semigroup_tested += 1;
        if lhs > rhs + 1e-12 {
            semigroup_violations += 1;
        }

        let n = rng.random_range(1..=t_max);
        let boundary = g.boundary(a);
        let exit_before: f64 = 1.0 - table[n - 1][i].iter().sum::<f64>();
        let mut far: f64 = 0.0;
        for z in boundary.iter() {
            for row in p.iter().take(n) {
                far = far.max(row[z][y] / mu[y]);
            }
        }
        let bound = table[n][i][y] / mu[y] + exit_before.max(0.0) * far;
        first_exit_tested += 1;
        if p[n][x][y] / mu[y] > bound + 1e-12 {
            first_exit_violations += 1;
        }
    }

    Ok(KernelSanity {
        mass_error,
        symmetry_error,
        ck_error,
        even_monotone_violations,
        semigroup_tested,
        semigroup_violations,
        first_exit_tested,
        first_exit_violations,
    })
}
