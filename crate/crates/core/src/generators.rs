//! Test graphs: lattice boxes and the Vicsek family of fractal trees.
//!
//! The Vicsek tree is built on integer coordinates. The level-0 cell is the
//! star joining `(1, 1)` to the corners `(0, 0), (2, 0), (0, 2), (2, 2)`; the
//! level-`i` cell places five copies of the level-`(i − 1)` cell (side
//! `s = 2·3^{i−1}`) at offsets centre `(s, s)`, NW `(0, 2s)`, NE `(2s, 2s)`,
//! SW `(0, 0)`, SE `(2s, 0)`. Coinciding coordinates identify the outer
//! corners of the centre copy with the inner corners of the corner copies.
//! Vertex ids are assigned in order of first appearance, so builds are
//! reproducible.
//!
//! The root `z₀ = (0, 0)` sits at an extreme corner. `G_i`, the level-`i`
//! cell containing the root, is `{max(x, y) ≤ 2·3^i}`; in the infinite tree
//! the finite level-`L` cell is attached to the rest only through its far
//! corner, which is therefore the single truncation-boundary vertex.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, GraphMeta, VertexId, WeightedGraph};

/// Declarative description of a generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    LatticeBox {
        dim: usize,
        side: usize,
    },
    Vicsek {
        level: usize,
    },
    WeightedVicsek {
        level: usize,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    StretchedVicsek {
        level: usize,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<WeightedGraph> {
        match self {
            GeneratorSpec::LatticeBox { dim, side } => lattice_box(*dim, *side),
            GeneratorSpec::Vicsek { level } => vicsek_tree(*level),
            GeneratorSpec::WeightedVicsek { level, weights } => {
                let w = weights
                    .clone()
                    .unwrap_or_else(|| default_block_weights(*level));
                weighted_vicsek(*level, &w)
            }
            GeneratorSpec::StretchedVicsek { level } => stretched_vicsek(*level),
        }
    }
}

/// `{−h..h}^d` with unit weights, `h = (L − 1)/2`, rooted at the origin.
pub fn lattice_box(dim: usize, side: usize) -> Result<WeightedGraph> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!(
            "lattice dimension must be 1, 2 or 3, got {dim}"
        )));
    }
    if side < 3 {
        return Err(Error::SizeTooSmall(format!("lattice side {side} < 3")));
    }
    if side % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "lattice side must be odd so the box has a centre, got {side}"
        )));
    }
    let h = ((side - 1) / 2) as i64;
    let n = side.pow(dim as u32);
    let coord = |mut id: usize| -> Vec<i64> {
        let mut c = vec![0i64; dim];
        for a in (0..dim).rev() {
            c[a] = (id % side) as i64 - h;
            id /= side;
        }
        c
    };
    let mut edges = Vec::with_capacity(dim * n);
    let mut boundary = Vec::new();
    let mut coords = Vec::with_capacity(n);
    for id in 0..n {
        let c = coord(id);
        if c.iter().any(|&x| x.abs() == h) {
            boundary.push(id);
        }
        let mut stride = 1;
        for a in (0..dim).rev() {
            if c[a] < h {
                edges.push((id, id + stride, 1.0));
            }
            stride *= side;
        }
        coords.push(c);
    }
    let root = (n - 1) / 2;
    let meta = GraphMeta {
        family: "lattice_box".into(),
        params: json!({ "dim": dim, "side": side })
            .as_object()
            .cloned()
            .unwrap_or_default(),
        coords: Some(coords),
        boundary,
        ..Default::default()
    };
    finish(
        GraphBuilder::new()
            .vertex_count(n)
            .edges(edges)
            .root(root)
            .meta(meta),
    )
}

fn finish(b: GraphBuilder) -> Result<WeightedGraph> {
    let mut g = b.build()?;
    g.stamp_safe_radius();
    Ok(g)
}

type Point = (i64, i64);

fn vicsek_segments(level: usize) -> Vec<(Point, Point)> {
    let mut segs: Vec<(Point, Point)> = [(0, 2), (2, 2), (0, 0), (2, 0)]
        .iter()
        .map(|&c| ((1, 1), c))
        .collect();
    let mut s = 2i64;
    for _ in 0..level {
        let offsets = [(s, s), (0, 2 * s), (2 * s, 2 * s), (0, 0), (2 * s, 0)];
        let mut next = Vec::with_capacity(segs.len() * 5);
        for &(ox, oy) in &offsets {
            for &((ax, ay), (bx, by)) in &segs {
                next.push(((ax + ox, ay + oy), (bx + ox, by + oy)));
            }
        }
        segs = next;
        s *= 3;
    }
    segs
}

/// `D_i = 2·3^i`, the diameter of the level-`i` cell.
pub fn vicsek_diameter(level: usize) -> usize {
    2 * 3usize.pow(level as u32)
}

/// Block index of a segment: the smallest `i` with both ends in `G_i`.
fn block_of(a: Point, b: Point) -> usize {
    let m = a.0.max(a.1).max(b.0).max(b.1);
    let mut i = 0;
    let mut d = 2i64;
    while m > d {
        d *= 3;
        i += 1;
    }
    i
}

struct VicsekSkeleton {
    points: Vec<Point>,
    edges: Vec<(VertexId, VertexId, usize)>,
    root: VertexId,
    /// `[z₀, corner(G_0), …, corner(G_L)]`.
    cuts: Vec<VertexId>,
}

fn vicsek_skeleton(level: usize) -> VicsekSkeleton {
    let segs = vicsek_segments(level);
    let mut ids: HashMap<Point, VertexId> = HashMap::new();
    let mut points = Vec::new();
    let mut id_of = |p: Point, points: &mut Vec<Point>| -> VertexId {
        *ids.entry(p).or_insert_with(|| {
            points.push(p);
            points.len() - 1
        })
    };
    let mut edges = Vec::with_capacity(segs.len());
    for &(a, b) in &segs {
        let u = id_of(a, &mut points);
        let v = id_of(b, &mut points);
        edges.push((u, v, block_of(a, b)));
    }
    let root = id_of((0, 0), &mut points);
    let mut cuts = vec![root];
    for i in 0..=level {
        let d = vicsek_diameter(i) as i64;
        cuts.push(id_of((d, d), &mut points));
    }
    VicsekSkeleton {
        points,
        edges,
        root,
        cuts,
    }
}

fn vicsek_meta(family: &str, params: serde_json::Value, sk: &VicsekSkeleton) -> GraphMeta {
    GraphMeta {
        family: family.into(),
        params: params.as_object().cloned().unwrap_or_default(),
        boundary: vec![*sk.cuts.last().expect("cut list")],
        cut_vertices: sk.cuts.clone(),
        ..Default::default()
    }
}

/// The level-`i` Vicsek cell with unit weights, rooted at a corner.
pub fn vicsek_tree(level: usize) -> Result<WeightedGraph> {
    let sk = vicsek_skeleton(level);
    let mut meta = vicsek_meta("vicsek", json!({ "level": level }), &sk);
    meta.coords = Some(sk.points.iter().map(|&(x, y)| vec![x, y]).collect());
    finish(
        GraphBuilder::new()
            .vertex_count(sk.points.len())
            .edges(sk.edges.iter().map(|&(u, v, _)| (u, v, 1.0)))
            .root(sk.root)
            .meta(meta),
    )
}

/// `w_i = 2^i`.
pub fn default_block_weights(level: usize) -> Vec<f64> {
    (0..=level).map(|i| (1u64 << i) as f64).collect()
}

/// Vicsek tree whose block-`i` edges (`G_i \ G_{i−1}`, with `G_{−1} = ∅`)
/// carry weight `block_weights[i]`.
pub fn weighted_vicsek(level: usize, block_weights: &[f64]) -> Result<WeightedGraph> {
    if block_weights.len() != level + 1 {
        return Err(Error::BadWeightSequence(format!(
            "expected {} weights, got {}",
            level + 1,
            block_weights.len()
        )));
    }
    if block_weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(Error::BadWeightSequence("weights must be positive".into()));
    }
    if block_weights.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::BadWeightSequence("weights must be nondecreasing".into()));
    }
    let sk = vicsek_skeleton(level);
    let mut meta = vicsek_meta(
        "weighted_vicsek",
        json!({ "level": level, "weights": block_weights }),
        &sk,
    );
    meta.coords = Some(sk.points.iter().map(|&(x, y)| vec![x, y]).collect());
    finish(
        GraphBuilder::new()
            .vertex_count(sk.points.len())
            .edges(sk.edges.iter().map(|&(u, v, b)| (u, v, block_weights[b])))
            .root(sk.root)
            .meta(meta),
    )
}

/// Vicsek tree with every block-`i` edge replaced by a path of `i + 1` unit
/// edges. Original vertices keep their Vicsek ids; subdivision vertices are
/// appended in edge order.
pub fn stretched_vicsek(level: usize) -> Result<WeightedGraph> {
    let sk = vicsek_skeleton(level);
    let mut next = sk.points.len();
    let mut edges = Vec::new();
    for &(u, v, b) in &sk.edges {
        let mut prev = u;
        for _ in 0..b {
            edges.push((prev, next, 1.0));
            prev = next;
            next += 1;
        }
        edges.push((prev, v, 1.0));
    }
    let meta = vicsek_meta("stretched_vicsek", json!({ "level": level }), &sk);
    finish(
        GraphBuilder::new()
            .vertex_count(next)
            .edges(edges)
            .root(sk.root)
            .meta(meta),
    )
}

/// Complete binary tree of the given depth, rooted at the top; a graph
/// without volume doubling.
pub fn binary_tree(depth: usize) -> Result<WeightedGraph> {
    if depth == 0 {
        return Err(Error::SizeTooSmall("binary tree depth 0 has no edges".into()));
    }
    let n = (1usize << (depth + 1)) - 1;
    let edges = (1..n).map(|v| ((v - 1) / 2, v, 1.0));
    let meta = GraphMeta {
        family: "binary_tree".into(),
        params: json!({ "depth": depth }).as_object().cloned().unwrap_or_default(),
        ..Default::default()
    };
    GraphBuilder::new()
        .vertex_count(n)
        .edges(edges)
        .root(0)
        .meta(meta)
        .build()
}
