//! Closed-form large-deviation function θ(s) and the quantities derived from
//! it: branch points, steady covariance, drive contributions, activity and
//! Mandel Q.
//!
//! With Σ(s)² = R(s) = [Δ₋ + 2f₋(s)]² − 4f₊(s)[Δ₊ + f₊(s)]:
//!
//! ```text
//!   θ_osc(s) = Δ₋ − Σ(s)
//!   θ_d(s)   = 16 F² ω² f₊ / (Σ² + ω²)                                   constant drive
//!   θ_d(s)   = 8 F² ω² f₊ / (Σ² + δ²) · [1 − 2ω(ω+δ) / (Σ² + (2ω+δ)²)]   F cos((ω+δ)t)
//! ```

use thiserror::Error;

use crate::jet::{Jet, Scalar};
use crate::model::{
    is_zero_frequency, tilt_f, tilt_generic, validate, CountingMode, DriveSpec, SystemModel, ValidationReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LdfError {
    #[error("s = {s} lies outside the branch interval (radicand {radicand:e} < 0)")]
    OutOfDomain { s: f64, radicand: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),
    #[error("activity vanishes; Mandel Q is undefined")]
    ZeroActivity,
    #[error("branch interval is unbounded; no Gallavotti-Cohen midpoint")]
    UnboundedInterval,
}

/// Coefficients of the quadratic u·R(u) = −(A/2)u² + B·u + C/2 in u = eˢ
/// for net-exchange counting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// The interval [s₋, s₊] of counting fields with a stationary biased state.
/// Endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchInterval {
    pub s_minus: f64,
    pub s_plus: f64,
    pub coefficients: BranchCoefficients,
}

impl BranchInterval {
    pub fn contains(&self, s: f64) -> bool {
        self.s_minus <= s && s <= self.s_plus
    }

    pub fn is_bounded(&self) -> bool {
        self.s_minus.is_finite() && self.s_plus.is_finite()
    }

    /// `points` equally spaced values covering the central `fraction` of the
    /// interval.
    pub fn central_grid(&self, fraction: f64, points: usize) -> Vec<f64> {
        let width = self.s_plus - self.s_minus;
        let lo = self.s_minus + 0.5 * (1.0 - fraction) * width;
        let hi = self.s_plus - 0.5 * (1.0 - fraction) * width;
        linspace(lo, hi, points)
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdfResult {
    pub theta: f64,
    pub theta_osc: f64,
    pub theta_drive: f64,
    /// R(s) > 0: strictly inside the branch interval.
    pub in_domain: bool,
}

fn radicand_generic<T: Scalar>(model: &SystemModel, mode: CountingMode, s: T) -> T {
    let rates = model.derived_rates();
    let (fp, fm) = tilt_generic(mode, model.reference(), s);
    if mode == CountingMode::OutgoingFlux {
        // f₊ = f₋ makes the quadratic terms cancel exactly.
        let absorb = rates.delta_plus - rates.delta_minus;
        return T::constant(rates.delta_minus * rates.delta_minus) - T::constant(4.0 * absorb) * fp;
    }
    let dm = T::constant(rates.delta_minus) + T::constant(2.0) * fm;
    dm * dm - T::constant(4.0) * fp * (T::constant(rates.delta_plus) + fp)
}

fn theta_osc_generic<T: Scalar>(model: &SystemModel, radicand: T) -> T {
    T::constant(model.derived_rates().delta_minus) - radicand.sqrt()
}

fn theta_drive_generic<T: Scalar>(model: &SystemModel, mode: CountingMode, s: T, radicand: T) -> T {
    let omega = model.omega();
    let (fp, _) = tilt_generic(mode, model.reference(), s);
    let c = T::constant;
    match model.drive() {
        DriveSpec::None => c(0.0),
        DriveSpec::Constant { amplitude } => constant_drive(amplitude, omega, fp, radicand),
        DriveSpec::Periodic { amplitude, detuning } => {
            if is_zero_frequency(omega, detuning) {
                return constant_drive(amplitude, omega, fp, radicand);
            }
            let pre = c(8.0 * amplitude * amplitude * omega * omega) / (radicand + c(detuning * detuning));
            let far = 2.0 * omega + detuning;
            let bracket = c(1.0) - c(2.0 * omega * (omega + detuning)) / (radicand + c(far * far));
            pre * bracket * fp
        }
    }
}

fn constant_drive<T: Scalar>(amplitude: f64, omega: f64, fp: T, radicand: T) -> T {
    T::constant(16.0 * amplitude * amplitude * omega * omega) * fp / (radicand + T::constant(omega * omega))
}

/// R(s), the expression under the square root of θ_osc. R(0) = Δ₋².
pub fn radicand(model: &SystemModel, mode: CountingMode, s: f64) -> f64 {
    radicand_generic(model, mode, s)
}

/// R(s), with values within rounding of zero clamped to zero so the branch
/// points themselves stay in the domain.
fn checked_radicand(model: &SystemModel, mode: CountingMode, s: f64) -> Result<f64, LdfError> {
    let r = radicand(model, mode, s);
    let rates = model.derived_rates();
    let (fp, fm) = tilt_f(mode, model.reference(), s);
    // Magnitude of the emission and absorption parts that cancel inside f±.
    let parts = (fp + fm).abs() + (fp - fm).abs();
    let size = (rates.delta_minus + parts).powi(2) + 2.0 * parts * (rates.delta_plus + parts);
    if r >= 0.0 {
        Ok(r)
    } else if r >= -16.0 * f64::EPSILON * size {
        Ok(0.0)
    } else {
        Err(LdfError::OutOfDomain { s, radicand: r })
    }
}

/// Σ(s) = √R(s).
pub fn sigma_radicand(model: &SystemModel, mode: CountingMode, s: f64) -> Result<f64, LdfError> {
    checked_radicand(model, mode, s).map(f64::sqrt)
}

pub fn theta_osc(model: &SystemModel, mode: CountingMode, s: f64) -> Result<f64, LdfError> {
    let r = checked_radicand(model, mode, s)?;
    Ok(theta_osc_generic(model, r))
}

pub fn theta_drive(model: &SystemModel, mode: CountingMode, s: f64) -> Result<f64, LdfError> {
    let r = checked_radicand(model, mode, s)?;
    Ok(theta_drive_generic(model, mode, s, r))
}

pub fn theta(model: &SystemModel, mode: CountingMode, s: f64) -> Result<LdfResult, LdfError> {
    let r = checked_radicand(model, mode, s)?;
    let theta_osc = theta_osc_generic(model, r);
    let theta_drive = theta_drive_generic(model, mode, s, r);
    Ok(LdfResult { theta: theta_osc + theta_drive, theta_osc, theta_drive, in_domain: r > 0.0 })
}

/// Steady value of the covariance scalar σ under bias s.
///
/// Near f₊ = 0 (including s = 0) the conjugate form
/// 2(Δ₊ + f₊)/(Δ₋ + 2f₋ + Σ) replaces the 0/0 quotient.
pub fn sigma_st(model: &SystemModel, mode: CountingMode, s: f64) -> Result<f64, LdfError> {
    let r = checked_radicand(model, mode, s)?;
    let rates = model.derived_rates();
    let (fp, fm) = tilt_f(mode, model.reference(), s);
    let sigma = r.sqrt();
    if fp.abs() < 1e-12 * rates.delta_plus {
        Ok(2.0 * (rates.delta_plus + fp) / (rates.delta_minus + 2.0 * fm + sigma))
    } else {
        Ok((rates.delta_minus + 2.0 * fm - sigma) / (2.0 * fp))
    }
}

fn require_valid(model: &SystemModel, mode: CountingMode) -> Result<(), LdfError> {
    let report = validate(model, mode);
    if report.is_valid() {
        Ok(())
    } else {
        Err(LdfError::InvalidModel(report))
    }
}

/// Branch interval [s₋, s₊].
///
/// Net counting uses the closed form e^{s±} = (B ± √(B² + AC))/A, with an
/// infinite endpoint when A or C vanishes. Flux counting has R linear in
/// e⁻ˢ, so s₊ = ∞ and e^{−s₋} = 1 + Δ₋²/(2Γ₁(Δ₊ − Δ₋)).
pub fn branch_points(model: &SystemModel, mode: CountingMode) -> Result<BranchInterval, LdfError> {
    require_valid(model, mode)?;
    let coefficients = branch_coefficients(model);
    if mode == CountingMode::OutgoingFlux {
        let rates = model.derived_rates();
        let absorb = rates.delta_plus - rates.delta_minus;
        let emit = model.reference().gamma_to();
        let s_minus = if absorb > 0.0 && emit > 0.0 {
            -(rates.delta_minus * rates.delta_minus / (2.0 * emit * absorb)).ln_1p()
        } else {
            f64::NEG_INFINITY
        };
        return Ok(BranchInterval { s_minus, s_plus: f64::INFINITY, coefficients });
    }
    let BranchCoefficients { a, b, c } = coefficients;
    let root = (b * b + a * c).max(0.0).sqrt();
    let s_plus = if a > 0.0 { ((b + root) / a).ln() } else { f64::INFINITY };
    // Product of the roots is −C/A; avoids cancellation in B − √(B² + AC).
    let s_minus = if c < 0.0 { (-c / (b + root)).ln() } else { f64::NEG_INFINITY };
    Ok(BranchInterval { s_minus, s_plus, coefficients })
}

/// Branch interval from bracketed bisection on R alone. Independent of the
/// closed form, used as its cross-check.
pub fn branch_points_by_root_finding(model: &SystemModel, mode: CountingMode) -> Result<BranchInterval, LdfError> {
    require_valid(model, mode)?;
    Ok(root_find(model, mode, branch_coefficients(model)))
}

pub fn branch_coefficients(model: &SystemModel) -> BranchCoefficients {
    let rates = model.derived_rates();
    let (dp, dm) = (rates.delta_plus, rates.delta_minus);
    let g = model.reference().gamma_to();
    let gb = model.reference().gamma_from();
    // Δ₊ + Δ₋ − 2Γ₁ and Δ₊ − Δ₋ − 2Γ̄₁ summed over the other baths, so a lone
    // reference bath gives exact zeros.
    let (other_to, other_from) =
        model.baths()[1..].iter().fold((0.0, 0.0), |(t, f), b| (t + b.gamma_to(), f + b.gamma_from()));
    BranchCoefficients {
        a: 8.0 * gb * other_to,
        b: 2.0 * gb * (dp + dm) + 2.0 * g * (dp - dm - 4.0 * gb) + dm * dm,
        c: -8.0 * g * other_from,
    }
}

fn root_find(model: &SystemModel, mode: CountingMode, coefficients: BranchCoefficients) -> BranchInterval {
    let s_plus = bracket_zero(|s| radicand(model, mode, s), 1.0);
    let s_minus = bracket_zero(|s| radicand(model, mode, s), -1.0);
    BranchInterval { s_minus, s_plus, coefficients }
}

/// First sign change of `r` along `direction` starting from s = 0, where
/// r(0) > 0. The bracket [1, u_max] in u = e^{|s|} grows by doubling u_max;
/// an infinite endpoint is returned when no sign change exists below
/// u = 2^1000.
fn bracket_zero(r: impl Fn(f64) -> f64, direction: f64) -> f64 {
    let mut lo = 0.0_f64;
    let mut hi = std::f64::consts::LN_2;
    while r(direction * hi) >= 0.0 {
        lo = hi;
        hi += std::f64::consts::LN_2;
        if hi > 1000.0 * std::f64::consts::LN_2 {
            return direction * f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if r(direction * mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    direction * 0.5 * (lo + hi)
}

/// Gallavotti–Cohen midpoint s₀ = (s₋ + s₊)/2.
pub fn gc_midpoint(interval: &BranchInterval) -> Result<f64, LdfError> {
    if !interval.is_bounded() {
        return Err(LdfError::UnboundedInterval);
    }
    Ok(0.5 * (interval.s_minus + interval.s_plus))
}

/// θ and its first two s-derivatives at `s`, from forward-mode
/// differentiation of the closed form.
pub fn theta_jet(model: &SystemModel, mode: CountingMode, s: f64) -> Result<Jet, LdfError> {
    checked_radicand(model, mode, s)?;
    let x = Jet::variable(s);
    let r = radicand_generic(model, mode, x);
    Ok(theta_osc_generic(model, r) + theta_drive_generic(model, mode, x, r))
}

fn theta_drive_jet(model: &SystemModel, mode: CountingMode) -> Jet {
    let x = Jet::variable(0.0);
    let r = radicand_generic(model, mode, x);
    theta_drive_generic(model, mode, x, r)
}

/// Activity k(0) = −∂θ/∂s at s = 0: mean rate of counted quanta.
pub fn activity(model: &SystemModel, mode: CountingMode) -> Result<f64, LdfError> {
    require_valid(model, mode)?;
    let rates = model.derived_rates();
    let (dp, dm) = (rates.delta_plus, rates.delta_minus);
    let g = model.reference().gamma_to();
    let gb = model.reference().gamma_from();
    let undriven = match mode {
        CountingMode::NetExchange => (g - gb) * dp / dm - (g + gb),
        CountingMode::OutgoingFlux => g * (dp - dm) / dm,
    };
    Ok(undriven - theta_drive_jet(model, mode).d1)
}

/// Mandel Q(0) = −θ''(0)/θ'(0) − 1.
pub fn mandel_q(model: &SystemModel, mode: CountingMode) -> Result<f64, LdfError> {
    require_valid(model, mode)?;
    let jet = theta_jet(model, mode, 0.0)?;
    let scale = model.derived_rates().delta_plus.max(f64::MIN_POSITIVE);
    if jet.d1.abs() <= 1e-14 * scale {
        return Err(LdfError::ZeroActivity);
    }
    Ok(-jet.d2 / jet.d1 - 1.0)
}

/// Activity and Mandel Q from the analytic path alongside Richardson-refined
/// central differences of θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantCheck {
    pub activity: f64,
    pub activity_fd: f64,
    pub mandel_q: Option<f64>,
    pub mandel_q_fd: Option<f64>,
}

pub const FD_STEP: f64 = 1e-5;

pub fn cumulant_self_check(model: &SystemModel, mode: CountingMode) -> Result<CumulantCheck, LdfError> {
    let activity = activity(model, mode)?;
    let th = |s: f64| theta(model, mode, s).map(|r| r.theta);
    let t0 = th(0.0)?;
    let mut d1 = [0.0; 2];
    let mut d2 = [0.0; 2];
    for (i, h) in [FD_STEP, FD_STEP / 2.0].into_iter().enumerate() {
        let (tp, tm) = (th(h)?, th(-h)?);
        d1[i] = (tp - tm) / (2.0 * h);
        d2[i] = (tp - 2.0 * t0 + tm) / (h * h);
    }
    let first = (4.0 * d1[1] - d1[0]) / 3.0;
    let second = (4.0 * d2[1] - d2[0]) / 3.0;
    let mandel_q = match mandel_q(model, mode) {
        Ok(q) => Some(q),
        Err(LdfError::ZeroActivity) => None,
        Err(e) => return Err(e),
    };
    let mandel_q_fd = mandel_q.map(|_| -second / first - 1.0);
    Ok(CumulantCheck { activity, activity_fd: -first, mandel_q, mandel_q_fd })
}
