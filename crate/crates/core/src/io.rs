//! Graph JSON files.
//!
//! ```json
//! {"vertex_count": 3, "edges": [[0, 1, 1.0], [1, 2, 1.0]], "root": 1,
//!  "meta": {"family": "path", "params": {}, "safe_radius": null}}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, GraphMeta, VertexId, WeightedGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertex_count: usize,
    pub edges: Vec<(VertexId, VertexId, f64)>,
    #[serde(default)]
    pub root: Option<VertexId>,
    #[serde(default)]
    pub meta: GraphMeta,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub self_loops: bool,
}

impl GraphFile {
    pub fn from_graph(g: &WeightedGraph) -> Self {
        GraphFile {
            vertex_count: g.vertex_count(),
            edges: g.edges().iter().map(|e| (e.u, e.v, e.weight)).collect(),
            root: g.root(),
            meta: g.meta().clone(),
            self_loops: g.allows_self_loops(),
        }
    }

    pub fn into_graph(self) -> Result<WeightedGraph> {
        let mut b = GraphBuilder::new()
            .vertex_count(self.vertex_count)
            .allow_self_loops(self.self_loops)
            .edges(self.edges)
            .meta(self.meta);
        if let Some(r) = self.root {
            b = b.root(r);
        }
        b.build()
    }
}

pub fn graph_to_json(g: &WeightedGraph) -> String {
    serde_json::to_string(&GraphFile::from_graph(g)).expect("graph serializes")
}

pub fn graph_from_json(text: &str) -> Result<WeightedGraph> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    file.into_graph()
}

pub fn write_graph(g: &WeightedGraph, path: &Path) -> Result<()> {
    fs::write(path, graph_to_json(g)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_graph(path: &Path) -> Result<WeightedGraph> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    graph_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{lattice_box, weighted_vicsek};
    use crate::kernel::two_step_graph;

    #[test]
    fn round_trip_is_exact() {
        for g in [
            lattice_box(2, 7).unwrap(),
            weighted_vicsek(2, &[0.1, 0.3, 0.7]).unwrap(),
            two_step_graph(&lattice_box(1, 9).unwrap()).unwrap(),
        ] {
            let back = graph_from_json(&graph_to_json(&g)).unwrap();
            assert_eq!(back, g);
            assert_eq!(back.meta(), g.meta());
        }
    }

    #[test]
    fn hand_written_file() {
        let g = graph_from_json(r#"{"vertex_count": 3, "edges": [[0,1,1],[1,2,2.5]], "root": 1}"#)
            .unwrap();
        assert_eq!(g.measure(1), 3.5);
        assert_eq!(g.root(), Some(1));
        assert!(matches!(graph_from_json("{"), Err(Error::Format(_))));
        assert!(matches!(
            graph_from_json(r#"{"vertex_count": 2, "edges": [[0,1,-1]]}"#),
            Err(Error::NonPositiveWeight(0, 1, _))
        ));
    }
}
