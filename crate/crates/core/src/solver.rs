//! Linear solvers for symmetric positive definite sparse systems.

use crate::error::{Error, Result};
use crate::fem::SparseSymMatrix;
use crate::graph::rcm_order_local;

/// Which algorithm solves `A x = b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Division for diagonal matrices, conjugate gradients otherwise.
    #[default]
    Auto,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
    /// Banded Cholesky after reverse Cuthill-McKee reordering.
    Banded,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SolverKind::Auto),
            "cg" => Ok(SolverKind::Cg),
            "banded" => Ok(SolverKind::Banded),
            other => Err(Error::InvalidParameter(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual target `||A x - b|| <= tol ||b||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

/// Solves `A x = rhs`.
pub fn solve_sparse(a: &SparseSymMatrix, rhs: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    if rhs.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: rhs.len(),
        });
    }
    match opts.kind {
        SolverKind::Auto if a.is_diagonal() => solve_diagonal(a, rhs),
        SolverKind::Auto | SolverKind::Cg => pcg(a, rhs, None, opts).map(|(x, _)| x),
        SolverKind::Banded => solve_banded_rcm(a, rhs),
    }
}

/// Exact solve of a diagonal system.
pub fn solve_diagonal(a: &SparseSymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .zip(rhs)
        .enumerate()
        .map(|(i, (&d, &r))| {
            if d > 0.0 {
                Ok(r / d)
            } else {
                Err(Error::NotPositiveDefinite { pivot: i, value: d })
            }
        })
        .collect()
}

/// Iteration count and final relative residual of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned conjugate gradients with the Jacobi preconditioner.
pub fn pcg(a: &SparseSymMatrix, rhs: &[f64], x0: Option<&[f64]>, opts: &SolverOptions) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    let norm_b = norm(rhs);
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], CgStats { iterations: 0, residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NotPositiveDefinite { pivot: i, value: d })
            }
        })
        .collect::<Result<_>>()?;

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = norm(&r) / norm_b;
    for it in 0..opts.max_iter {
        if residual <= opts.tol {
            return Ok((x, CgStats { iterations: it, residual }));
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: it, value: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = norm(&r) / norm_b;
    }
    if residual <= opts.tol {
        Ok((x, CgStats { iterations: opts.max_iter, residual }))
    } else {
        Err(Error::SolverFailure {
            iterations: opts.max_iter,
            residual,
        })
    }
}

/// Cholesky factor of a symmetric band matrix, stored row-wise as
/// `L[i][i - k]` for `k` in `0..=bw`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors `A`; the band is taken from its sparsity pattern.
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        let bw = (0..n)
            .flat_map(|i| a.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0);
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    l[i * w + (i - j)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = l[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (i - k)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (k - i)] * y[k];
            }
            y[i] = s / self.l[i * w];
        }
        y
    }
}

/// Banded Cholesky solve after a bandwidth-reducing reordering of `A`.
pub fn solve_banded_rcm(a: &SparseSymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    let adjacency: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let order = rcm_order_local(&adjacency);
    let permuted = a.principal_submatrix(&order);
    let rhs_p: Vec<f64> = order.iter().map(|&i| rhs[i]).collect();
    let y = BandedCholesky::factor(&permuted)?.solve(&rhs_p);
    let mut x = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        x[i] = y[k];
    }
    Ok(x)
}

/// Relative residual `||A x - b|| / ||b||` (absolute when `b = 0`).
pub fn relative_residual(a: &SparseSymMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(rhs).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let nb = norm(rhs);
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, MassMode};
    use crate::graph::build_grid_graph;

    #[test]
    fn identity_returns_rhs() {
        let a = SparseSymMatrix::from_diagonal(&[1.0; 4]);
        let rhs = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(solve_sparse(&a, &rhs, &SolverOptions::default()).unwrap(), rhs);
    }

    #[test]
    fn mass_matrix_recovers_ones() {
        let g = build_grid_graph(5, 5).unwrap();
        let a = assemble_mass(&g, &vec![1.0; g.num_triangles()], MassMode::Consistent).unwrap();
        let rhs = a.mul_vec(&vec![1.0; 25]);
        let opts = SolverOptions { tol: 1e-12, ..Default::default() };
        for kind in [SolverKind::Cg, SolverKind::Banded, SolverKind::Auto] {
            let x = solve_sparse(&a, &rhs, &SolverOptions { kind, ..opts }).unwrap();
            assert!(relative_residual(&a, &x, &rhs) <= 1e-12, "{kind:?}");
            assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn lumped_is_exact_division() {
        let g = build_grid_graph(4, 4).unwrap();
        let a = assemble_mass(&g, &vec![2.0; g.num_triangles()], MassMode::Lumped).unwrap();
        let rhs: Vec<f64> = (0..16).map(|i| i as f64 - 3.0).collect();
        let x = solve_sparse(&a, &rhs, &SolverOptions::default()).unwrap();
        let d = a.diagonal();
        for i in 0..16 {
            assert_eq!(x[i], rhs[i] / d[i]);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let g = build_grid_graph(6, 6).unwrap();
        let a = assemble_mass(&g, &vec![1.0; g.num_triangles()], MassMode::Consistent).unwrap();
        let rhs: Vec<f64> = (0..36).map(|i| (i as f64).sin()).collect();
        let opts = SolverOptions { kind: SolverKind::Cg, tol: 1e-14, max_iter: 1 };
        assert!(matches!(solve_sparse(&a, &rhs, &opts), Err(Error::SolverFailure { iterations: 1, .. })));
    }

    #[test]
    fn banded_rejects_indefinite() {
        let a = SparseSymMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(BandedCholesky::factor(&a), Err(Error::NotPositiveDefinite { .. })));
    }
}
