//! Sparse symmetric positive definite systems.
//!
//! Every linear problem in the crate (Dirichlet problems for exit times and
//! Green functions, harmonic potentials for resistances, inverse iteration for
//! Dirichlet eigenvalues) reduces to `M x = b` with `M` symmetric positive
//! definite and as sparse as the graph. [`SpdSolver`] factors `M = L D Lᵀ`
//! after a minimum-degree ordering and falls back to Jacobi-preconditioned
//! conjugate gradients when the factor would exceed its fill budget.
//!
//! Both paths use a fixed operation order, so repeated solves are
//! bit-reproducible.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default fill budget (stored off-diagonal factor entries).
pub const DEFAULT_FILL_BUDGET: usize = 30_000_000;
/// Relative residual target of the iterative fallback.
pub const CG_TOLERANCE: f64 = 1e-12;

/// Symmetric sparse matrix, both triangles stored, rows sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparse {
    pub diag: Vec<f64>,
    pub off: Vec<Vec<(usize, f64)>>,
}

impl SymSparse {
    pub fn with_size(n: usize) -> Self {
        SymSparse {
            diag: vec![0.0; n],
            off: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        for i in 0..self.len() {
            let mut acc = self.diag[i] * x[i];
            for &(j, a) in &self.off[i] {
                acc += a * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn nnz_off(&self) -> usize {
        self.off.iter().map(Vec::len).sum()
    }
}

/// `L D Lᵀ` factor in elimination order.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    order: Vec<usize>,
    pivots: Vec<f64>,
    columns: Vec<Vec<(usize, f64)>>,
}

impl LdlFactor {
    /// Factors `m` with a minimum-degree ordering (ties broken by the smaller
    /// index). Returns `Ok(None)` if the factor would hold more than
    /// `fill_budget` entries.
    pub fn new(m: &SymSparse, fill_budget: usize) -> Result<Option<LdlFactor>> {
        let n = m.len();
        let mut adj = m.off.clone();
        let mut diag = m.diag.clone();
        let mut eliminated = vec![false; n];
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
            (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
        let mut order = Vec::with_capacity(n);
        let mut pivots = Vec::with_capacity(n);
        let mut columns = Vec::with_capacity(n);
        let mut stored = 0usize;
        let mut scratch: Vec<(usize, f64)> = Vec::new();

        while let Some(Reverse((deg, v))) = heap.pop() {
            if eliminated[v] || deg != adj[v].len() {
                continue;
            }
            let d = diag[v];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "non-positive pivot {d} at row {v}; matrix is not positive definite"
                )));
            }
            eliminated[v] = true;
            let col = std::mem::take(&mut adj[v]);
            stored += col.len();
            if stored > fill_budget {
                return Ok(None);
            }
            for &(u, a_uv) in &col {
                diag[u] -= a_uv * a_uv / d;
                // adj[u] ← (adj[u] \ {v}) + Schur update from the clique on col
                scratch.clear();
                let row = &adj[u];
                let (mut i, mut j) = (0, 0);
                while i < row.len() || j < col.len() {
                    let ri = row.get(i).map(|e| e.0).unwrap_or(usize::MAX);
                    let cj = col.get(j).map(|e| e.0).unwrap_or(usize::MAX);
                    if ri == v {
                        i += 1;
                        continue;
                    }
                    if cj == u {
                        j += 1;
                        continue;
                    }
                    if ri < cj {
                        scratch.push(row[i]);
                        i += 1;
                    } else if cj < ri {
                        let (w, a_wv) = col[j];
                        scratch.push((w, -a_uv * a_wv / d));
                        j += 1;
                    } else {
                        let (w, a_wv) = col[j];
                        scratch.push((w, row[i].1 - a_uv * a_wv / d));
                        i += 1;
                        j += 1;
                    }
                }
                adj[u].clear();
                adj[u].extend_from_slice(&scratch);
                heap.push(Reverse((adj[u].len(), u)));
            }
            order.push(v);
            pivots.push(d);
            columns.push(col.into_iter().map(|(u, a)| (u, a / d)).collect());
        }
        Ok(Some(LdlFactor {
            order,
            pivots,
            columns,
        }))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn fill(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for (k, &v) in self.order.iter().enumerate() {
            let xv = x[v];
            for &(u, l) in &self.columns[k] {
                x[u] -= l * xv;
            }
        }
        for (k, &v) in self.order.iter().enumerate() {
            x[v] /= self.pivots[k];
        }
        for (k, &v) in self.order.iter().enumerate().rev() {
            let mut acc = x[v];
            for &(u, l) in &self.columns[k] {
                acc -= l * x[u];
            }
            x[v] = acc;
        }
        x
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(
    m: &SymSparse,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = m.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            CgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = m.diag.iter().map(|&d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = m.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver("conjugate gradients lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        if rel <= tol {
            // recompute the true residual before declaring convergence
            let true_rel = residual_norm(m, &x, b) / bnorm;
            if true_rel <= tol * 10.0 {
                return Ok((
                    x,
                    CgStats {
                        iterations: it + 1,
                        relative_residual: true_rel,
                    },
                ));
            }
            let ax = m.matvec(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations"
    )))
}

/// Direct factorization when affordable, conjugate gradients otherwise.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct(LdlFactor),
    Iterative(SymSparse),
}

impl SpdSolver {
    pub fn new(m: SymSparse) -> Result<SpdSolver> {
        Self::with_budget(m, DEFAULT_FILL_BUDGET)
    }

    pub fn with_budget(m: SymSparse, fill_budget: usize) -> Result<SpdSolver> {
        match LdlFactor::new(&m, fill_budget)? {
            Some(f) => Ok(SpdSolver::Direct(f)),
            None => Ok(SpdSolver::Iterative(m)),
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, SpdSolver::Direct(_))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Direct(f) => Ok(f.solve(b)),
            SpdSolver::Iterative(m) => {
                let max_iter = 20 * m.len() + 1000;
                conjugate_gradient(m, b, CG_TOLERANCE, max_iter).map(|(x, _)| x)
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖b − M x‖₂`.
pub fn residual_norm(m: &SymSparse, x: &[f64], b: &[f64]) -> f64 {
    let ax = m.matvec(x);
    ax.iter()
        .zip(b)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tridiagonal 2, −1 matrix (1D Dirichlet Laplacian).
    fn laplace_1d(n: usize) -> SymSparse {
        let mut m = SymSparse::with_size(n);
        for i in 0..n {
            m.diag[i] = 2.0;
            if i > 0 {
                m.off[i].push((i - 1, -1.0));
            }
            if i + 1 < n {
                m.off[i].push((i + 1, -1.0));
            }
        }
        m
    }

    fn grid_2d(k: usize) -> SymSparse {
        let n = k * k;
        let mut m = SymSparse::with_size(n);
        for i in 0..k {
            for j in 0..k {
                let v = i * k + j;
                m.diag[v] = 4.5;
                let mut row = Vec::new();
                if i > 0 {
                    row.push((v - k, -1.0));
                }
                if j > 0 {
                    row.push((v - 1, -1.0));
                }
                if j + 1 < k {
                    row.push((v + 1, -1.0));
                }
                if i + 1 < k {
                    row.push((v + k, -1.0));
                }
                m.off[v] = row;
            }
        }
        m
    }

    #[test]
    fn ldl_solves_tridiagonal_exactly() {
        let m = laplace_1d(9);
        let f = LdlFactor::new(&m, usize::MAX).unwrap().unwrap();
        // tridiagonal: minimum degree eliminates ends first, no fill
        assert_eq!(f.fill(), 8);
        let x_true: Vec<f64> = (0..9).map(|i| (i as f64) * 0.5 - 1.0).collect();
        let b = m.matvec(&x_true);
        let x = f.solve(&b);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn ldl_and_cg_agree_on_grid() {
        let m = grid_2d(12);
        let b: Vec<f64> = (0..m.len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let direct = SpdSolver::new(m.clone()).unwrap();
        assert!(direct.is_direct());
        let xd = direct.solve(&b).unwrap();
        let iter = SpdSolver::with_budget(m.clone(), 10).unwrap();
        assert!(!iter.is_direct());
        let xi = iter.solve(&b).unwrap();
        assert!(residual_norm(&m, &xd, &b) < 1e-11);
        for (a, b) in xd.iter().zip(&xi) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut m = laplace_1d(3);
        m.diag[1] = -1.0;
        assert!(matches!(LdlFactor::new(&m, usize::MAX), Err(Error::Solver(_))));
    }

    #[test]
    fn solves_are_bit_reproducible() {
        let m = grid_2d(7);
        let b: Vec<f64> = (0..m.len()).map(|i| (i as f64).sin()).collect();
        let s = SpdSolver::new(m).unwrap();
        let x1 = s.solve(&b).unwrap();
        let x2 = s.solve(&b).unwrap();
        assert!(x1.iter().zip(&x2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
