//! The killed walk on a finite set as a linear system.
//!
//! For `A ⊊ Γ` the matrix `M_A = (D_μ − W)|_A` (diagonal `μ(x) − μ_xx`,
//! off-diagonal `−μ_xy`) is symmetric positive definite, and
//! `(I − P^A)⁻¹ = M_A⁻¹ D_μ`. Exit times, Green functions and the Dirichlet
//! eigenproblem are all solves against `M_A`.

use crate::error::{Error, Result};
use crate::graph::{VertexId, VertexSet, WeightedGraph};
use crate::linalg::{SpdSolver, SymSparse};

/// Factored Dirichlet problem on a set.
#[derive(Debug)]
pub struct DirichletProblem<'g> {
    graph: &'g WeightedGraph,
    set: VertexSet,
    matrix: SymSparse,
    solver: SpdSolver,
}

/// `M_A` in local indices (position in the sorted member list).
pub fn dirichlet_matrix(g: &WeightedGraph, a: &VertexSet) -> SymSparse {
    let members = a.members();
    let mut m = SymSparse::with_size(members.len());
    for (i, &x) in members.iter().enumerate() {
        m.diag[i] = g.measure(x);
        for (y, w) in g.neighbors(x) {
            if y == x {
                m.diag[i] -= w;
            } else if let Ok(j) = members.binary_search(&y) {
                m.off[i].push((j, -w));
            }
        }
    }
    m
}

impl<'g> DirichletProblem<'g> {
    pub fn new(g: &'g WeightedGraph, a: &VertexSet) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptySet);
        }
        g.check_set(a)?;
        if a.len() == g.vertex_count() {
            return Err(Error::AbsorbingSet);
        }
        let matrix = dirichlet_matrix(g, a);
        let solver = SpdSolver::new(matrix.clone())?;
        Ok(DirichletProblem {
            graph: g,
            set: a.clone(),
            matrix,
            solver,
        })
    }

    pub fn set(&self) -> &VertexSet {
        &self.set
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.graph
    }

    pub fn matrix(&self) -> &SymSparse {
        &self.matrix
    }

    pub fn local_index(&self, x: VertexId) -> Option<usize> {
        self.set.members().binary_search(&x).ok()
    }

    /// Solves `M_A u = b` for `b` in local indices.
    pub fn solve_local(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve(b)
    }

    /// Mean exit times `E_x(A)` for every `x ∈ A` (local indices), solving
    /// `(I − P^A) u = 1`.
    pub fn exit_times(&self) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.set.iter().map(|x| self.graph.measure(x)).collect();
        self.solve_local(&rhs)
    }

    /// `x ↦ [M_A⁻¹]_{y x}` in local indices; this is the Green kernel
    /// `g^A(y, ·)`.
    pub fn green_kernel_row(&self, y: VertexId) -> Result<Vec<f64>> {
        let i = self.local_index(y).ok_or(Error::SourceOutsideSet(y))?;
        let mut e = vec![0.0; self.set.len()];
        e[i] = 1.0;
        self.solve_local(&e)
    }

    /// Scatter a local vector into a full-length one (zero off `A`).
    pub fn scatter(&self, local: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.graph.vertex_count()];
        for (i, x) in self.set.iter().enumerate() {
            out[x] = local[i];
        }
        out
    }
}
