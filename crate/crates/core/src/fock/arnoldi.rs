//! Explicitly restarted Arnoldi iteration for the eigenvalue of largest real
//! part of a sparse non-Hermitian matrix.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::generator::CsrMatrix;
use super::FockError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldiOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Bound on the Ritz residual ‖Av − λv‖ for unit v, relative to
    /// max(1, ‖A + shift·I‖∞).
    pub tol: f64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        ArnoldiOptions { krylov_dim: 160, max_restarts: 400, tol: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub restarts: usize,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvector of the upper-triangular `t` belonging to its `p`-th diagonal
/// entry, by back substitution.
fn triangular_eigenvector(t: &DMatrix<Complex64>, p: usize) -> Vec<Complex64> {
    let n = t.nrows();
    let lambda = t[(p, p)];
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    z[p] = Complex64::new(1.0, 0.0);
    for i in (0..p).rev() {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in i + 1..=p {
            acc += t[(i, j)] * z[j];
        }
        let mut denom = t[(i, i)] - lambda;
        if denom.norm() < 1e-14 * scale {
            denom = Complex64::new(1e-14 * scale, 0.0);
        }
        z[i] = -acc / denom;
    }
    z
}

/// Ritz pair of largest real part for the leading `k×k` block of `h`.
fn rightmost_ritz(h: &DMatrix<Complex64>, k: usize) -> Result<(Complex64, Vec<Complex64>), FockError> {
    let block = h.view((0, 0), (k, k)).into_owned();
    let schur = Schur::try_new(block, 1e-15, 100_000).ok_or(FockError::HessenbergFailure)?;
    let (q, t) = schur.unpack();
    let p = (0..k).max_by(|&i, &j| t[(i, i)].re.total_cmp(&t[(j, j)].re)).expect("non-empty Krylov basis");
    let z = triangular_eigenvector(&t, p);
    let mut y: Vec<Complex64> = (0..k).map(|i| (0..k).map(|j| q[(i, j)] * z[j]).sum()).collect();
    let ny = norm(&y);
    y.iter_mut().for_each(|v| *v /= ny);
    Ok((t[(p, p)], y))
}

/// Eigenvalue of `a` with the largest real part. The iteration runs on
/// `a + shift·I`; the returned value has the shift removed.
pub fn rightmost_eigenpair(
    a: &CsrMatrix,
    shift: f64,
    start: &[Complex64],
    options: &ArnoldiOptions,
) -> Result<Eigenpair, FockError> {
    let n = a.dim();
    let m = options.krylov_dim.min(n).max(1);
    let mut v0: Vec<Complex64> = start.to_vec();
    let nv = norm(&v0);
    if !(nv > 0.0) {
        return Err(FockError::ZeroStartVector);
    }
    v0.iter_mut().for_each(|x| *x /= nv);
    let scale = (a.norm_inf() + shift.abs()).max(1.0);
    let breakdown = 1e-13 * scale;

    let mut last = (Complex64::new(f64::NAN, 0.0), f64::INFINITY);
    for restart in 0..=options.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(v0.clone());
        let mut h = DMatrix::<Complex64>::zeros(m + 1, m);
        let mut k = m;
        let mut w = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..m {
            a.matvec_shifted(&basis[j], shift, &mut w);
            // Classical Gram-Schmidt, applied twice.
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &w);
                    h[(i, j)] += c;
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = norm(&w);
            h[(j + 1, j)] = Complex64::new(beta, 0.0);
            if beta <= breakdown {
                k = j + 1;
                break;
            }
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        let (mu, y) = rightmost_ritz(&h, k)?;
        let residual = h[(k, k - 1)].norm() * y[k - 1].norm();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (coef, b) in y.iter().zip(&basis) {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += coef * bi);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|xi| *xi /= nx);
        let value = mu - shift;
        if residual <= options.tol * scale {
            return Ok(Eigenpair { value, vector: x, residual, restarts: restart });
        }
        last = (value, residual);
        v0 = x;
    }
    Err(FockError::NoConvergence { restarts: options.max_restarts, estimate: last.0.re, residual: last.1 })
}

/// Rightmost eigenpair from a dense Schur decomposition of the whole matrix.
pub fn dense_rightmost_eigenpair(a: &CsrMatrix) -> Result<Eigenpair, FockError> {
    let n = a.dim();
    let mut dense = DMatrix::<Complex64>::zeros(n, n);
    for (r, c, v) in a.triplets() {
        dense[(r, c)] = v;
    }
    let (value, vector) = rightmost_ritz(&dense, n)?;
    let mut image = vec![Complex64::new(0.0, 0.0); n];
    a.matvec_shifted(&vector, 0.0, &mut image);
    let residual = norm(&image.iter().zip(&vector).map(|(y, x)| y - value * x).collect::<Vec<_>>());
    Ok(Eigenpair { value, vector, residual, restarts: 0 })
}
