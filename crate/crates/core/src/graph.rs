//! Weighted graphs with vertex measures, metric balls and set boundaries.
//!
//! A [`WeightedGraph`] is immutable once built. It stores a symmetric
//! adjacency in compressed-row form, the induced measure
//! `μ(x) = Σ_{y∼x} μ_xy` and the metadata a generator attaches (family,
//! parameters, coordinates, the truncation boundary of a finite piece of an
//! infinite graph).
//!
//! Graphs that stand in for infinite ones carry a non-empty
//! `meta.boundary`: the vertices whose neighbourhood was cut off by the
//! truncation. The distance from a vertex to that set is its *horizon*;
//! every quantity that only looks at `B(x, R)` (or at `n ≤ R` steps of the
//! walk started at `x`) is exact on the infinite graph as long as
//! `R ≤ horizon(x)`.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;

const UNREACHED: u32 = u32::MAX;
const BFS_CACHE_CAPACITY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
}

/// Generator metadata carried alongside the graph and round-tripped through
/// the JSON file format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    /// Largest `R` such that `B(root, 3R + 1)` avoids the truncation boundary;
    /// `None` for a genuinely finite graph.
    #[serde(default)]
    pub safe_radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<i64>>>,
    /// Vertices whose neighbourhood differs from the infinite graph.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<VertexId>,
    /// Cut points `z_0, z_1, …` of Vicsek-family trees.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cut_vertices: Vec<VertexId>,
    /// For derived graphs (the two-step graph), the id of each vertex in the
    /// parent graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_ids: Option<Vec<VertexId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<u8>,
}

/// Finite vertex set, kept sorted and duplicate free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexSet(Vec<VertexId>);

impl VertexSet {
    pub fn new(members: impl IntoIterator<Item = VertexId>) -> Self {
        let mut v: Vec<VertexId> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }

    pub fn singleton(x: VertexId) -> Self {
        VertexSet(vec![x])
    }

    pub fn empty() -> Self {
        VertexSet(Vec::new())
    }

    pub fn members(&self) -> &[VertexId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: VertexId) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        VertexSet::new(self.iter().chain(other.iter()))
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.iter().all(|x| other.contains(x))
    }

    /// First common vertex, if any.
    pub fn first_common(&self, other: &VertexSet) -> Option<VertexId> {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return Some(self.0[i]),
            }
        }
        None
    }

    pub fn into_vec(self) -> Vec<VertexId> {
        self.0
    }
}

impl FromIterator<VertexId> for VertexSet {
    fn from_iter<I: IntoIterator<Item = VertexId>>(iter: I) -> Self {
        VertexSet::new(iter)
    }
}

/// Breadth-first layers around a centre, truncated at some depth.
#[derive(Debug, Clone)]
pub struct Layers {
    pub order: Vec<VertexId>,
    /// `layer_start[k]..layer_start[k + 1]` indexes the vertices at distance `k`.
    pub layer_start: Vec<usize>,
}

impl Layers {
    pub fn num_layers(&self) -> usize {
        self.layer_start.len() - 1
    }

    /// Vertices at distance `< r` (the open ball `B(x, r)`).
    pub fn within(&self, r: usize) -> &[VertexId] {
        &self.order[..self.layer_start[r.min(self.num_layers())]]
    }

    /// Vertices at distance exactly `k`.
    pub fn layer(&self, k: usize) -> &[VertexId] {
        if k >= self.num_layers() {
            return &[];
        }
        &self.order[self.layer_start[k]..self.layer_start[k + 1]]
    }
}

#[derive(Default)]
struct BfsCache {
    map: Mutex<HashMap<VertexId, Arc<Vec<u32>>>>,
}

impl std::fmt::Debug for BfsCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BfsCache")
    }
}

/// Builder accepting raw edge triples.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    vertex_count: Option<usize>,
    edges: Vec<(VertexId, VertexId, f64)>,
    self_loops: bool,
    root: Option<VertexId>,
    meta: GraphMeta,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex_count(mut self, n: usize) -> Self {
        self.vertex_count = Some(n);
        self
    }

    pub fn allow_self_loops(mut self, yes: bool) -> Self {
        self.self_loops = yes;
        self
    }

    pub fn edge(mut self, u: VertexId, v: VertexId, w: f64) -> Self {
        self.edges.push((u, v, w));
        self
    }

    pub fn edges(mut self, edges: impl IntoIterator<Item = (VertexId, VertexId, f64)>) -> Self {
        self.edges.extend(edges);
        self
    }

    pub fn root(mut self, root: VertexId) -> Self {
        self.root = Some(root);
        self
    }

    pub fn meta(mut self, meta: GraphMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn build(self) -> Result<WeightedGraph> {
        WeightedGraph::from_parts(self)
    }
}

/// Builds a validated graph from an edge list with default options.
pub fn build_graph(edges: &[(VertexId, VertexId, f64)]) -> Result<WeightedGraph> {
    GraphBuilder::new().edges(edges.iter().copied()).build()
}

/// Finite connected weighted graph.
#[derive(Debug)]
pub struct WeightedGraph {
    offsets: Vec<usize>,
    neighbors: Vec<VertexId>,
    weights: Vec<f64>,
    measure: Vec<f64>,
    edges: Vec<Edge>,
    self_loops: bool,
    root: Option<VertexId>,
    meta: GraphMeta,
    horizon: Option<Vec<u32>>,
    cache: BfsCache,
}

impl Clone for WeightedGraph {
    fn clone(&self) -> Self {
        WeightedGraph {
            offsets: self.offsets.clone(),
            neighbors: self.neighbors.clone(),
            weights: self.weights.clone(),
            measure: self.measure.clone(),
            edges: self.edges.clone(),
            self_loops: self.self_loops,
            root: self.root,
            meta: self.meta.clone(),
            horizon: self.horizon.clone(),
            cache: BfsCache::default(),
        }
    }
}

impl PartialEq for WeightedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.edges.len() == other.edges.len()
            && self.vertex_count() == other.vertex_count()
            && self
                .edges
                .iter()
                .zip(&other.edges)
                .all(|(a, b)| a.u == b.u && a.v == b.v && a.weight.to_bits() == b.weight.to_bits())
            && self.root == other.root
            && self.meta == other.meta
    }
}

impl WeightedGraph {
    fn from_parts(b: GraphBuilder) -> Result<Self> {
        if b.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let max_id = b.edges.iter().map(|&(u, v, _)| u.max(v)).max().unwrap_or(0);
        let n = b.vertex_count.unwrap_or(max_id + 1);
        let mut canon = Vec::with_capacity(b.edges.len());
        for &(u, v, w) in &b.edges {
            if u >= n {
                return Err(Error::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(Error::VertexOutOfRange(v, n));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::NonPositiveWeight(u, v, w));
            }
            if u == v && !b.self_loops {
                return Err(Error::SelfLoop(u));
            }
            canon.push(Edge {
                u: u.min(v),
                v: u.max(v),
                weight: w,
            });
        }
        canon.sort_by(|a, b| (a.u, a.v).cmp(&(b.u, b.v)));
        let mut edges: Vec<Edge> = Vec::with_capacity(canon.len());
        for e in canon {
            if let Some(last) = edges.last() {
                if last.u == e.u && last.v == e.v {
                    if last.weight.to_bits() != e.weight.to_bits() {
                        return Err(Error::ConflictingWeight(e.u, e.v, last.weight, e.weight));
                    }
                    continue;
                }
            }
            edges.push(e);
        }

        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.u] += 1;
            if e.u != e.v {
                degree[e.v] += 1;
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for x in 0..n {
            offsets[x + 1] = offsets[x] + degree[x];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut weights = vec![0.0f64; offsets[n]];
        // edges are sorted by (u, v), so pushing v into u's row and u into v's
        // row keeps every row sorted by neighbour id once merged below
        for e in &edges {
            neighbors[fill[e.u]] = e.v;
            weights[fill[e.u]] = e.weight;
            fill[e.u] += 1;
            if e.u != e.v {
                neighbors[fill[e.v]] = e.u;
                weights[fill[e.v]] = e.weight;
                fill[e.v] += 1;
            }
        }
        for x in 0..n {
            let (s, t) = (offsets[x], offsets[x + 1]);
            let mut row: Vec<(VertexId, f64)> =
                neighbors[s..t].iter().copied().zip(weights[s..t].iter().copied()).collect();
            row.sort_by_key(|&(y, _)| y);
            for (k, (y, w)) in row.into_iter().enumerate() {
                neighbors[s + k] = y;
                weights[s + k] = w;
            }
        }
        let measure: Vec<f64> = (0..n)
            .map(|x| weights[offsets[x]..offsets[x + 1]].iter().sum())
            .collect();

        let mut g = WeightedGraph {
            offsets,
            neighbors,
            weights,
            measure,
            edges,
            self_loops: b.self_loops,
            root: b.root,
            meta: b.meta,
            horizon: None,
            cache: BfsCache::default(),
        };
        if let Some(r) = g.root {
            g.check_vertex(r)?;
        }
        let dist = g.bfs_full(0);
        if let Some(x) = dist.iter().position(|&d| d == UNREACHED) {
            return Err(Error::DisconnectedGraph(x));
        }
        if !g.meta.boundary.is_empty() {
            for &z in &g.meta.boundary {
                g.check_vertex(z)?;
            }
            let h = g.multi_source_bfs(&g.meta.boundary.clone());
            g.horizon = Some(h);
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> Option<VertexId> {
        self.root
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }

    pub fn allows_self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn measure(&self, x: VertexId) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// `(neighbour, μ_xy)` pairs of `x`, sorted by neighbour id. A self-loop
    /// appears once.
    pub fn neighbors(&self, x: VertexId) -> impl Iterator<Item = (VertexId, f64)> + '_ {
        let (s, t) = (self.offsets[x], self.offsets[x + 1]);
        self.neighbors[s..t]
            .iter()
            .copied()
            .zip(self.weights[s..t].iter().copied())
    }

    pub fn degree(&self, x: VertexId) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    /// Weight of the edge `x ∼ y`, or zero.
    pub fn weight(&self, x: VertexId, y: VertexId) -> f64 {
        let (s, t) = (self.offsets[x], self.offsets[x + 1]);
        match self.neighbors[s..t].binary_search(&y) {
            Ok(k) => self.weights[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn self_loop_weight(&self, x: VertexId) -> f64 {
        self.weight(x, x)
    }

    pub fn transition(&self, x: VertexId, y: VertexId) -> f64 {
        self.weight(x, y) / self.measure[x]
    }

    pub fn check_vertex(&self, x: VertexId) -> Result<()> {
        if x < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(x, self.vertex_count()))
        }
    }

    pub fn check_set(&self, a: &VertexSet) -> Result<()> {
        a.iter().try_for_each(|x| self.check_vertex(x))
    }

    pub fn set_measure(&self, a: &VertexSet) -> f64 {
        a.iter().map(|x| self.measure[x]).sum()
    }

    pub fn all_vertices(&self) -> VertexSet {
        VertexSet((0..self.vertex_count()).collect())
    }

    pub fn complement(&self, a: &VertexSet) -> VertexSet {
        let mask = self.mask(a);
        VertexSet((0..self.vertex_count()).filter(|&x| !mask[x]).collect())
    }

    /// Dense membership mask of `a`.
    pub fn mask(&self, a: &VertexSet) -> Vec<bool> {
        let mut m = vec![false; self.vertex_count()];
        for x in a.iter() {
            m[x] = true;
        }
        m
    }

    // ---------------------------------------------------------------- metric

    fn bfs_full(&self, source: VertexId) -> Vec<u32> {
        self.multi_source_bfs(&[source])
    }

    fn multi_source_bfs(&self, sources: &[VertexId]) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.vertex_count()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] == UNREACHED {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            let d = dist[x] + 1;
            for (y, _) in self.neighbors(x) {
                if dist[y] == UNREACHED {
                    dist[y] = d;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Graph distances from `x` to every vertex (cached per centre).
    pub fn distances(&self, x: VertexId) -> Arc<Vec<u32>> {
        if let Some(d) = self.cache.map.lock().expect("bfs cache").get(&x) {
            return Arc::clone(d);
        }
        let d = Arc::new(self.bfs_full(x));
        let mut map = self.cache.map.lock().expect("bfs cache");
        if map.len() >= BFS_CACHE_CAPACITY {
            map.clear();
        }
        map.insert(x, Arc::clone(&d));
        d
    }

    pub fn distance(&self, x: VertexId, y: VertexId) -> usize {
        self.distances(x)[y] as usize
    }

    /// Distances from the set `a` (zero on `a`).
    pub fn distances_from_set(&self, a: &VertexSet) -> Vec<u32> {
        self.multi_source_bfs(a.members())
    }

    /// `d(A, B) = min_{a∈A, b∈B} d(a, b)`.
    pub fn set_distance(&self, a: &VertexSet, b: &VertexSet) -> usize {
        let d = self.distances_from_set(a);
        b.iter().map(|y| d[y] as usize).min().unwrap_or(usize::MAX)
    }

    /// BFS layers from `x` up to and including distance `max_depth`.
    pub fn layers(&self, x: VertexId, max_depth: usize) -> Layers {
        let mut seen: HashMap<VertexId, ()> = HashMap::new();
        seen.insert(x, ());
        let mut order = vec![x];
        let mut layer_start = vec![0, 1];
        let mut depth = 0;
        while depth < max_depth {
            let (s, t) = (layer_start[depth], layer_start[depth + 1]);
            for i in s..t {
                let v = order[i];
                for (y, _) in self.neighbors(v) {
                    if seen.insert(y, ()).is_none() {
                        order.push(y);
                    }
                }
            }
            if order.len() == t {
                break;
            }
            layer_start.push(order.len());
            depth += 1;
        }
        Layers { order, layer_start }
    }

    /// Open ball `B(x, R) = {y : d(x, y) < R}`.
    pub fn ball(&self, x: VertexId, radius: usize) -> VertexSet {
        if radius == 0 {
            return VertexSet::empty();
        }
        let layers = self.layers(x, radius - 1);
        VertexSet::new(layers.within(radius).iter().copied())
    }

    /// `V(x, R) = μ(B(x, R))`.
    pub fn volume(&self, x: VertexId, radius: usize) -> f64 {
        if radius == 0 {
            return 0.0;
        }
        let layers = self.layers(x, radius - 1);
        layers.within(radius).iter().map(|&y| self.measure[y]).sum()
    }

    /// `V(x, R)` for every `R = 0..=r_max`.
    pub fn volume_profile(&self, x: VertexId, r_max: usize) -> Vec<f64> {
        let layers = self.layers(x, r_max.saturating_sub(1));
        let mut out = Vec::with_capacity(r_max + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for r in 1..=r_max {
            for &y in layers.layer(r - 1) {
                acc += self.measure[y];
            }
            out.push(acc);
        }
        out
    }

    /// `v(x, r, R) = V(x, R) − V(x, r)`.
    pub fn annulus_volume(&self, x: VertexId, r: usize, big_r: usize) -> Result<f64> {
        if r > big_r {
            return Err(Error::RadiusOrder(r, big_r));
        }
        let vp = self.volume_profile(x, big_r);
        Ok(vp[big_r] - vp[r])
    }

    /// `∂A = {z ∉ A : z ∼ y ∈ A}`.
    pub fn boundary(&self, a: &VertexSet) -> VertexSet {
        let inside = self.mask(a);
        let mut out = Vec::new();
        for x in a.iter() {
            for (y, _) in self.neighbors(x) {
                if !inside[y] {
                    out.push(y);
                }
            }
        }
        VertexSet::new(out)
    }

    /// `Ā = A ∪ ∂A`.
    pub fn closure(&self, a: &VertexSet) -> VertexSet {
        a.union(&self.boundary(a))
    }

    /// Connected components of the subgraph induced on `a`, each sorted.
    pub fn components(&self, a: &VertexSet) -> Vec<VertexSet> {
        let inside = self.mask(a);
        let mut seen = vec![false; self.vertex_count()];
        let mut out = Vec::new();
        for s in a.iter() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                i += 1;
                for (y, _) in self.neighbors(v) {
                    if inside[y] && !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                    }
                }
            }
            out.push(VertexSet::new(comp));
        }
        out
    }

    pub fn is_connected_set(&self, a: &VertexSet) -> bool {
        !a.is_empty() && self.components(a).len() == 1
    }

    /// Two-colouring, or `None` when the graph has an odd cycle or a self-loop.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let d = self.bfs_full(0);
        let colour: Vec<u8> = d.iter().map(|&k| (k % 2) as u8).collect();
        for e in &self.edges {
            if colour[e.u] == colour[e.v] {
                return None;
            }
        }
        Some(colour)
    }

    /// Diameter measured by double BFS; exact on trees.
    pub fn double_bfs_diameter(&self) -> usize {
        let d0 = self.bfs_full(0);
        let far = argmax_u32(&d0);
        let d1 = self.bfs_full(far);
        d1.iter().copied().max().unwrap_or(0) as usize
    }

    /// Exact diameter by all-pairs BFS (small graphs only).
    pub fn exact_diameter(&self) -> usize {
        (0..self.vertex_count())
            .map(|x| self.bfs_full(x).into_iter().max().unwrap_or(0) as usize)
            .max()
            .unwrap_or(0)
    }

    // ----------------------------------------------------------- exactness

    /// Distance from `x` to the truncation boundary; `None` if the graph is
    /// genuinely finite.
    pub fn horizon(&self, x: VertexId) -> Option<usize> {
        self.horizon.as_ref().map(|h| h[x] as usize)
    }

    /// Fails with [`Error::HorizonExceeded`] unless `requested ≤ horizon(x)`.
    pub fn guard(&self, x: VertexId, requested: usize) -> Result<()> {
        match self.horizon(x) {
            Some(h) if requested > h => Err(Error::HorizonExceeded {
                vertex: x,
                requested,
                horizon: h,
            }),
            _ => Ok(()),
        }
    }

    /// Fails unless `a` contains no truncation-boundary vertex.
    pub fn guard_set(&self, a: &VertexSet) -> Result<()> {
        if let Some(h) = &self.horizon {
            if let Some(x) = a.iter().find(|&x| h[x] == 0) {
                return Err(Error::HorizonExceeded {
                    vertex: x,
                    requested: 1,
                    horizon: 0,
                });
            }
        }
        Ok(())
    }

    /// `floor((horizon(root) − 1) / 3)`, the largest `R` with
    /// `B(root, 3R + 1)` clear of the truncation boundary.
    pub fn computed_safe_radius(&self) -> Option<usize> {
        let root = self.root?;
        self.horizon(root).map(|h| h.saturating_sub(1) / 3)
    }

    /// Records [`Self::computed_safe_radius`] in the metadata.
    pub(crate) fn stamp_safe_radius(&mut self) {
        self.meta.safe_radius = self.computed_safe_radius();
    }

    /// Copy with replaced metadata; the horizon is recomputed.
    pub fn with_meta(&self, meta: GraphMeta) -> Result<WeightedGraph> {
        let triples = self.edges.iter().map(|e| (e.u, e.v, e.weight));
        let mut b = GraphBuilder::new()
            .vertex_count(self.vertex_count())
            .allow_self_loops(self.self_loops)
            .edges(triples)
            .meta(meta);
        if let Some(r) = self.root {
            b = b.root(r);
        }
        b.build()
    }

    // ----------------------------------------------------------- conditions

    /// Achieved `p₀ = min_{x∼y} μ_xy / μ(x)` together with the degree bound and
    /// the `p₀^{d(x,y)} μ(y) ≤ μ(x)` comparison on sampled centres.
    pub fn check_p0(&self) -> P0Report {
        let mut p0 = f64::INFINITY;
        let mut witness = (0, 0);
        let mut max_degree = 0;
        for x in 0..self.vertex_count() {
            max_degree = max_degree.max(self.degree(x));
            for (y, w) in self.neighbors(x) {
                let p = w / self.measure[x];
                if p < p0 {
                    p0 = p;
                    witness = (x, y);
                }
            }
        }
        let degree_bound = (1.0 / p0 + 1e-9).floor() as usize;
        let degree_ok = max_degree <= degree_bound;
        let mut sampled_pairs = 0usize;
        let mut comparison_violations = 0usize;
        for x in sample_evenly(self.vertex_count(), 16) {
            let d = self.distances(x);
            for y in 0..self.vertex_count() {
                sampled_pairs += 1;
                let lhs = p0.powi(d[y] as i32) * self.measure[y];
                if lhs > self.measure[x] * (1.0 + 1e-12) {
                    comparison_violations += 1;
                }
            }
        }
        P0Report {
            p0,
            witness,
            max_degree,
            degree_bound,
            degree_ok,
            sampled_pairs,
            comparison_violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P0Report {
    pub p0: f64,
    pub witness: (VertexId, VertexId),
    pub max_degree: usize,
    pub degree_bound: usize,
    pub degree_ok: bool,
    pub sampled_pairs: usize,
    pub comparison_violations: usize,
}

fn argmax_u32(v: &[u32]) -> usize {
    let mut best = 0;
    for (i, &d) in v.iter().enumerate() {
        if d > v[best] {
            best = i;
        }
    }
    best
}

/// Up to `k` indices spread evenly over `0..n`, always including 0.
pub fn sample_evenly(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    let mut out: Vec<usize> = (0..k).map(|i| i * n / k).collect();
    out.dedup();
    out
}

/// Random connected set of up to `size` vertices grown from `start` by adding
/// a uniformly chosen frontier vertex at a time, staying inside `allowed`.
pub fn random_connected_set<R: rand::Rng>(
    g: &WeightedGraph,
    start: VertexId,
    size: usize,
    allowed: Option<&[bool]>,
    rng: &mut R,
) -> VertexSet {
    let ok = |v: VertexId| allowed.is_none_or(|m| m[v]);
    let mut inside = vec![false; g.vertex_count()];
    let mut queued = vec![false; g.vertex_count()];
    let mut members = vec![start];
    inside[start] = true;
    let mut frontier: Vec<VertexId> = Vec::new();
    let mut grow = |v: VertexId, frontier: &mut Vec<VertexId>, inside: &[bool]| {
        for (w, _) in g.neighbors(v) {
            if ok(w) && !inside[w] && !queued[w] {
                queued[w] = true;
                frontier.push(w);
            }
        }
    };
    grow(start, &mut frontier, &inside);
    while members.len() < size && !frontier.is_empty() {
        let v = frontier.swap_remove(rng.random_range(0..frontier.len()));
        inside[v] = true;
        members.push(v);
        grow(v, &mut frontier, &inside);
    }
    VertexSet::new(members)
}

/// `p₀` of a graph; convenience wrapper over [`WeightedGraph::check_p0`].
pub fn check_p0(g: &WeightedGraph) -> f64 {
    g.check_p0().p0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> WeightedGraph {
        build_graph(&(0..n - 1).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn single_edge_measure() {
        let g = build_graph(&[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.measure(0), 1.0);
        assert_eq!(g.measure(1), 1.0);
        assert_eq!(g.check_p0().p0, 1.0);
    }

    #[test]
    fn path_measure_and_p0() {
        let g = build_graph(&[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(g.measures(), &[1.0, 2.0, 1.0]);
        let r = g.check_p0();
        assert_eq!(r.p0, 0.5);
        assert_eq!(r.witness.0, 1);
        assert!(r.degree_ok);
        assert_eq!(r.comparison_violations, 0);
    }

    #[test]
    fn disconnected_rejected() {
        assert_eq!(
            build_graph(&[(0, 1, 1.0), (2, 3, 1.0)]).unwrap_err(),
            Error::DisconnectedGraph(2)
        );
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(matches!(
            build_graph(&[(0, 1, 0.0)]),
            Err(Error::NonPositiveWeight(0, 1, _))
        ));
        assert!(matches!(
            build_graph(&[(0, 1, f64::NAN)]),
            Err(Error::NonPositiveWeight(..))
        ));
        assert!(matches!(
            build_graph(&[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(Error::ConflictingWeight(0, 1, _, _))
        ));
        // a consistent duplicate is merged
        let g = build_graph(&[(0, 1, 1.5), (1, 0, 1.5)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(build_graph(&[]).unwrap_err(), Error::EmptyGraph);
    }

    #[test]
    fn self_loops_need_opt_in() {
        assert_eq!(
            build_graph(&[(0, 1, 1.0), (0, 0, 1.0)]).unwrap_err(),
            Error::SelfLoop(0)
        );
        let g = GraphBuilder::new()
            .allow_self_loops(true)
            .edges([(0, 1, 1.0), (0, 0, 2.0)])
            .build()
            .unwrap();
        assert_eq!(g.measure(0), 3.0);
        assert_eq!(g.measure(1), 1.0);
        assert_eq!(g.self_loop_weight(0), 2.0);
        // Σ μ(x) = 2 Σ non-loop weights + Σ loop weights
        assert_eq!(g.total_measure(), 2.0 * 1.0 + 2.0);
    }

    #[test]
    fn balls_on_a_path() {
        let g = path(7);
        assert!(g.ball(3, 0).is_empty());
        assert_eq!(g.ball(3, 1).members(), &[3]);
        assert_eq!(g.ball(3, 2).members(), &[2, 3, 4]);
        assert_eq!(g.volume(3, 2), 6.0);
        assert_eq!(g.annulus_volume(3, 1, 2).unwrap(), 4.0);
        assert_eq!(g.annulus_volume(3, 2, 2).unwrap(), 0.0);
        assert_eq!(g.annulus_volume(3, 0, 3).unwrap(), g.volume(3, 3));
        assert_eq!(g.annulus_volume(3, 3, 2), Err(Error::RadiusOrder(3, 2)));
        assert_eq!(g.volume_profile(3, 4), vec![0.0, 2.0, 6.0, 10.0, 12.0]);
    }

    #[test]
    fn boundary_and_closure() {
        let g = path(7);
        let a = VertexSet::singleton(3);
        assert_eq!(g.boundary(&a).members(), &[2, 4]);
        assert_eq!(g.closure(&a).members(), &[2, 3, 4]);
        assert!(g.boundary(&g.all_vertices()).is_empty());
    }

    #[test]
    fn components_and_bipartition() {
        let g = path(6);
        let a = VertexSet::new([0, 1, 3, 4, 5]);
        let comps = g.components(&a);
        assert_eq!(comps.len(), 2);
        assert!(g.bipartition().is_some());
        let tri = build_graph(&[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        assert!(tri.bipartition().is_none());
        assert_eq!(tri.exact_diameter(), 1);
        assert_eq!(g.double_bfs_diameter(), 5);
    }

    #[test]
    fn horizon_guard() {
        let meta = GraphMeta {
            family: "path".into(),
            boundary: vec![0, 10],
            ..Default::default()
        };
        let g = GraphBuilder::new()
            .edges((0..10).map(|i| (i, i + 1, 1.0)))
            .root(5)
            .meta(meta)
            .build()
            .unwrap();
        assert_eq!(g.horizon(5), Some(5));
        assert!(g.guard(5, 5).is_ok());
        assert!(matches!(g.guard(5, 6), Err(Error::HorizonExceeded { .. })));
        assert_eq!(g.computed_safe_radius(), Some(1));
    }
}
