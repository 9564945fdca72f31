//! Brute-force θ(s): leading eigenvalue of the tilted Lindblad generator on
//! a truncated Fock space. Makes no use of the Gaussian structure.

mod arnoldi;
mod generator;

use std::collections::VecDeque;

use num_complex::Complex64;
use thiserror::Error;

pub use arnoldi::{dense_rightmost_eigenpair, rightmost_eigenpair, ArnoldiOptions, Eigenpair};
pub use generator::{build_generator, CsrMatrix, TruncatedGenerator};

use crate::model::{CountingMode, SystemModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("cutoff {cutoff} below the minimum of {minimum}")]
    CutoffTooSmall { cutoff: usize, minimum: usize },
    #[error("periodic drive gives a time-dependent generator; use the moment equations")]
    PeriodicDriveUnsupported,
    #[error(
        "Arnoldi iteration did not converge after {restarts} restarts (estimate {estimate}, residual {residual:e})"
    )]
    NoConvergence { restarts: usize, estimate: f64, residual: f64 },
    #[error("leading eigenvalue has imaginary part {0:e}")]
    ComplexLeadingEigenvalue(f64),
    #[error("Schur decomposition of the Hessenberg matrix failed")]
    HessenbergFailure,
    #[error("start vector is zero")]
    ZeroStartVector,
    #[error("no cutoff-stable value up to cutoff {cutoff}: last estimates {previous} and {last}")]
    CutoffExceeded { cutoff: usize, previous: f64, last: f64 },
}

const BALANCE_SWEEPS: usize = 50;

/// Largest reduced dimension handed to the dense solver when Arnoldi fails.
pub const DENSE_LIMIT: usize = 64 * 64;

/// Occupation above which the top Fock level is flagged as a truncation
/// artefact.
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub theta: f64,
    pub imaginary: f64,
    pub residual: f64,
    pub cutoff_used: usize,
    pub converged: bool,
    /// Population of level N_f in the biased steady state, relative to its
    /// trace.
    pub top_level_population: f64,
    pub truncation_warning: bool,
}

/// Indices reachable from the support of `start` under repeated application
/// of `matrix`. The Krylov space never leaves this set.
fn reachable(matrix: &CsrMatrix, start: &[Complex64]) -> Vec<usize> {
    let n = matrix.dim();
    let mut by_column: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, _) in matrix.triplets() {
        by_column[c].push(r);
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for (i, v) in start.iter().enumerate() {
        if v.norm() > 0.0 {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(c) = queue.pop_front() {
        for &r in &by_column[c] {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
    }
    (0..n).filter(|&i| seen[i]).collect()
}

/// Diagonal (population) start vector following the undriven s = 0 steady
/// state.
fn thermal_start(generator: &TruncatedGenerator) -> Vec<Complex64> {
    let d = generator.levels();
    let nbar = generator.model.steady_occupation().max(0.0);
    let ratio = if nbar.is_finite() { nbar / (nbar + 1.0) } else { 0.5 };
    let mut v = vec![Complex64::new(0.0, 0.0); d * d];
    let mut p = 1.0_f64;
    for m in 0..d {
        v[generator.index(m, m)] = Complex64::new(p.max(1e-300), 0.0);
        p *= ratio;
    }
    v
}

pub fn leading_eigenvalue(generator: &TruncatedGenerator, tol: f64) -> Result<EigenResult, FockError> {
    let start = thermal_start(generator);
    let support = reachable(&generator.matrix, &start);
    let gauge = generator.symmetrising_scale();
    let initial = support.iter().map(|&i| gauge[i]).collect();
    let (reduced, weights) = generator.matrix.restrict(&support).balanced(initial, BALANCE_SWEEPS);
    let reduced_start: Vec<Complex64> = support.iter().zip(&weights).map(|(&i, d)| start[i] / d).collect();
    let shift = generator.model.derived_rates().delta_plus;
    let options = ArnoldiOptions { tol, ..ArnoldiOptions::default() };
    let pair = match rightmost_eigenpair(&reduced, shift, &reduced_start, &options) {
        Err(FockError::NoConvergence { .. }) if reduced.dim() <= DENSE_LIMIT => dense_rightmost_eigenpair(&reduced)?,
        other => other?,
    };
    let scale = pair.value.re.abs().max(1.0);
    if pair.value.im.abs() > 1e3 * tol * scale {
        return Err(FockError::ComplexLeadingEigenvalue(pair.value.im));
    }

    let d = generator.levels();
    let mut full = vec![Complex64::new(0.0, 0.0); generator.dimension()];
    for (k, &i) in support.iter().enumerate() {
        full[i] = pair.vector[k] * weights[k];
    }
    let trace: Complex64 = (0..d).map(|m| full[generator.index(m, m)]).sum();
    let top = full[generator.index(d - 1, d - 1)];
    let top_level_population = if trace.norm() > 0.0 { (top / trace).norm() } else { f64::NAN };
    Ok(EigenResult {
        theta: pair.value.re,
        imaginary: pair.value.im,
        residual: pair.residual,
        cutoff_used: generator.cutoff,
        converged: true,
        top_level_population,
        truncation_warning: !(top_level_population <= LEAKAGE_THRESHOLD),
    })
}

/// Eigen-solver residual tolerance used by [`converge_cutoff`].
pub const SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffScan {
    pub result: EigenResult,
    /// (cutoff, θ) for every cutoff evaluated.
    pub history: Vec<(usize, f64)>,
}

/// Doubles the cutoff from `cutoff_start` until two successive estimates
/// differ by less than `tol`. The reported result belongs to the larger
/// cutoff of the agreeing pair.
pub fn converge_cutoff(
    model: &SystemModel,
    mode: CountingMode,
    s: f64,
    tol: f64,
    cutoff_start: usize,
    cutoff_max: usize,
) -> Result<CutoffScan, FockError> {
    if cutoff_start < 8 {
        return Err(FockError::CutoffTooSmall { cutoff: cutoff_start, minimum: 8 });
    }
    let mut history = Vec::new();
    let mut cutoff = cutoff_start;
    let mut previous: Option<f64> = None;
    while cutoff <= cutoff_max {
        let generator = build_generator(model, mode, s, cutoff)?;
        let result = leading_eigenvalue(&generator, SOLVER_TOL)?;
        history.push((cutoff, result.theta));
        if let Some(p) = previous {
            if (result.theta - p).abs() < tol {
                return Ok(CutoffScan { result, history });
            }
        }
        previous = Some(result.theta);
        cutoff *= 2;
    }
    let n = history.len();
    let last = history.last().map_or(f64::NAN, |h| h.1);
    let prev = if n >= 2 { history[n - 2].1 } else { f64::NAN };
    Err(FockError::CutoffExceeded { cutoff: history.last().map_or(cutoff_start, |h| h.0), previous: prev, last })
}
