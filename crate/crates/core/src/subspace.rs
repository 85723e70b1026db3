//! Singular value decomposition, numerical rank and orthogonal projectors.
//!
//! The SVD is a one-sided (Hestenes) Jacobi iteration with a fixed cyclic
//! pivot order, so a given input always produces the same bits. All work is
//! done in `f64`.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};

/// Relative singular-value cutoff used when none is given.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

const MAX_SWEEPS: usize = 80;
const JACOBI_TOL: f64 = 4.0 * f64::EPSILON;
/// Columns with residual norm at or below this are dropped by the oracle.
const ORACLE_DROP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// D x min(D, K), orthonormal columns.
    pub left_vectors: Matrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// K x min(D, K), orthonormal columns.
    pub right_vectors: Matrix,
}

impl SvdResult {
    /// `U diag(S) W^T`.
    pub fn reconstruct(&self) -> Matrix {
        let u = &self.left_vectors;
        let w = &self.right_vectors;
        let mut us = u.clone();
        for i in 0..u.rows() {
            for (k, s) in self.singular_values.iter().enumerate() {
                us.set(i, k, u.get(i, k) * s);
            }
        }
        us.matmul(&w.transpose())
    }
}

/// Thin SVD of `m`.
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        let t = jacobi_tall(&m.transpose())?;
        Ok(SvdResult {
            left_vectors: t.right_vectors,
            singular_values: t.singular_values,
            right_vectors: t.left_vectors,
        })
    }
}

/// One-sided Jacobi on a matrix with rows >= cols.
fn jacobi_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = cols < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..cols - 1 {
            for j in i + 1..cols {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, i, j, c, s);
                rotate(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure { rows, cols });
    }

    let sigma: Vec<f64> = a.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));

    let sigma_max = order.first().map_or(0.0, |&k| sigma[k]);
    let mut left: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut missing = 0;
    for &k in &order {
        let s = sigma[k];
        if s > 0.0 && s > sigma_max * 1e-300 {
            left.push(a[k].iter().map(|x| x / s).collect());
        } else {
            missing += 1;
        }
    }
    // Zero singular values leave their left vectors undetermined; fill them
    // with standard basis directions orthogonalized against the rest.
    for _ in 0..missing {
        left.push(complete_basis(&left, rows));
    }

    let singular_values: Vec<f64> = order.iter().map(|&k| sigma[k]).collect();
    let right: Vec<Vec<f64>> = order.iter().map(|&k| v[k].clone()).collect();
    Ok(SvdResult {
        left_vectors: Matrix::from_columns(rows, &left)?,
        singular_values,
        right_vectors: Matrix::from_columns(cols, &right)?,
    })
}

fn rotate(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Unit vector orthogonal to every vector in `basis`, picked from the
/// standard basis direction with the largest residual.
fn complete_basis(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..dim {
        let mut r = vec![0.0; dim];
        r[e] = 1.0;
        for _ in 0..2 {
            for q in basis {
                let c = dot(q, &r);
                r.iter_mut().zip(q).for_each(|(x, qv)| *x -= c * qv);
            }
        }
        let n = norm(&r);
        if best.as_ref().map_or(true, |(bn, _)| n > *bn) {
            best = Some((n, r));
        }
    }
    let (n, r) = best.expect("dim >= 1");
    r.into_iter().map(|x| x / n).collect()
}

/// Number of singular values strictly above `rel_tol * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> Result<usize> {
    if !(rel_tol.is_finite() && rel_tol > 0.0) {
        return Err(Error::InvalidInput(format!("rel_tol must be positive, got {rel_tol}")));
    }
    if singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidInput("singular values must be finite and non-negative".into()));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("singular values must be non-increasing".into()));
    }
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let cutoff = rel_tol * sigma_max;
    Ok(singular_values.iter().take_while(|s| **s > cutoff).count())
}

/// Symmetric idempotent matrix together with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: Matrix,
    rank: usize,
    tolerance_used: f64,
}

impl Projector {
    /// Wraps a matrix loaded from disk. Only shape, finiteness and the rank
    /// bound are checked here; callers that need the algebraic invariants use
    /// [`Projector::symmetry_error`] and [`Projector::idempotence_error`].
    pub(crate) fn from_parts(matrix: Matrix, rank: usize, tolerance_used: f64) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::Dimension { expected: matrix.rows(), got: matrix.cols() });
        }
        if rank > matrix.rows() {
            return Err(Error::InvalidData(format!(
                "rank {rank} exceeds dimension {}",
                matrix.rows()
            )));
        }
        Ok(Self { matrix, rank, tolerance_used })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tolerance_used(&self) -> f64 {
        self.tolerance_used
    }

    /// `P v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }

    /// `||P - P^T||_F`.
    pub fn symmetry_error(&self) -> f64 {
        self.matrix.sub(&self.matrix.transpose()).frobenius()
    }

    /// `||P^2 - P||_F`.
    pub fn idempotence_error(&self) -> f64 {
        self.matrix.matmul(&self.matrix).sub(&self.matrix).frobenius()
    }

    /// `|trace(P) - rank|`.
    pub fn trace_error(&self) -> f64 {
        (self.matrix.trace() - self.rank as f64).abs()
    }
}

/// Sum of `q q^T` over the given unit vectors, built so that the result is
/// exactly symmetric.
fn outer_sum(dim: usize, basis: &[Vec<f64>]) -> Matrix {
    let mut p = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = basis.iter().map(|q| q[i] * q[j]).sum();
            p.set(i, j, v);
            p.set(j, i, v);
        }
    }
    p
}

/// Orthogonal projector onto the column space of `m`, spanned by the left
/// singular vectors whose singular values clear the relative cutoff.
pub fn range_projector(m: &Matrix, rel_tol: f64) -> Result<Projector> {
    let s = svd(m)?;
    let rank = numerical_rank(&s.singular_values, rel_tol)?;
    let basis: Vec<Vec<f64>> = (0..rank).map(|k| s.left_vectors.column(k)).collect();
    Ok(Projector {
        matrix: outer_sum(m.rows(), &basis),
        rank,
        tolerance_used: rel_tol,
    })
}

/// `I - P`.
pub fn complement_projector(p: &Projector) -> Projector {
    let dim = p.dim();
    Projector {
        matrix: Matrix::identity(dim).sub(&p.matrix),
        rank: dim - p.rank,
        tolerance_used: p.tolerance_used,
    }
}

/// Moore-Penrose pseudoinverse, inverting only singular values above the
/// relative cutoff.
pub fn pseudoinverse(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let s = svd(m)?;
    let rank = numerical_rank(&s.singular_values, rel_tol)?;
    let (rows, cols) = (m.rows(), m.cols());
    // M^+ = W_r diag(1/s) U_r^T, a cols x rows matrix.
    let mut out = Matrix::zeros(cols, rows);
    for k in 0..rank {
        let inv = 1.0 / s.singular_values[k];
        for i in 0..cols {
            let wik = s.right_vectors.get(i, k) * inv;
            if wik == 0.0 {
                continue;
            }
            for j in 0..rows {
                let cur = out.get(i, j);
                out.set(i, j, cur + wik * s.left_vectors.get(j, k));
            }
        }
    }
    Ok(out)
}

/// Reference projector from modified Gram-Schmidt on the columns of `m`.
///
/// Columns whose residual norm falls to `1e-10` or below are dropped. Meant
/// for verification on small inputs, not for production use.
pub fn oracle_projector(m: &Matrix) -> Projector {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..m.cols() {
        let mut r = m.column(j);
        for q in &basis {
            let c = dot(q, &r);
            r.iter_mut().zip(q).for_each(|(x, qv)| *x -= c * qv);
        }
        let n = norm(&r);
        if n > ORACLE_DROP {
            basis.push(r.into_iter().map(|x| x / n).collect());
        }
    }
    Projector {
        matrix: outer_sum(m.rows(), &basis),
        rank: basis.len(),
        tolerance_used: ORACLE_DROP,
    }
}
