//! Time integration of the Gaussian-parameter equations of the biased
//! characteristic function, and the long-time slope of ln A(t) as an
//! estimate of θ(s).
//!
//! The state is (x, y, σ, ln A):
//!
//! ```text
//!   σ'    = −2[Δ₋ + 2f₋]σ + 2Δ₊ + 2f₊(σ² + 1)
//!   x'    = −ω y + [2f₊σ − 2f₋ − Δ₋] x
//!   y'    =  ω [x + 4F(t)] + [2f₊σ − 2f₋ − Δ₋] y
//!   ln A' =  f₊ [2σ + x² + y²] − 2f₋
//! ```
//!
//! ln A is integrated directly since A itself over- or underflows on the
//! time scales needed for the slope.

use std::f64::consts::PI;

use thiserror::Error;

use crate::analytic::LdfError;
use crate::model::{is_zero_frequency, tilt_f, validate, CountingMode, DriveSpec, SystemModel};
use crate::ode::{Dopri5, OdeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error(transparent)]
    Ldf(#[from] LdfError),
    #[error("integrator stalled at t = {t} (h = {h:e}); the flow is stiff or blowing up")]
    StiffnessFailure { t: f64, h: f64 },
    #[error("sigma left (0, inf) at t = {t} (sigma = {sigma}); s is outside the branch interval")]
    DomainEscape { t: f64, sigma: f64 },
    #[error("tail window holds too few samples or drive periods for a slope fit")]
    WindowTooShort,
    #[error("invalid integration controls: {0}")]
    InvalidControls(&'static str),
}

impl From<OdeError> for MomentError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepUnderflow { t, h } => MomentError::StiffnessFailure { t, h },
            OdeError::TooManySteps(_) => MomentError::StiffnessFailure { t: f64::NAN, h: f64::NAN },
            OdeError::NonFinite(t) => MomentError::DomainEscape { t, sigma: f64::NAN },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianTrajectoryState {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub log_amplitude: f64,
}

impl GaussianTrajectoryState {
    fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.sigma, self.log_amplitude]
    }

    fn from_array(a: [f64; 4]) -> Self {
        GaussianTrajectoryState { x: a[0], y: a[1], sigma: a[2], log_amplitude: a[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControls {
    pub dt_initial: f64,
    /// Per-step relative tolerance.
    pub tolerance: f64,
    /// Defaults to 100/Δ₋ when `None`.
    pub t_max: Option<f64>,
    pub tail_fraction: f64,
    /// Number of uniformly spaced output samples.
    pub samples: usize,
    /// Initial σ; defaults to the s = 0 steady value Δ₊/Δ₋.
    pub sigma_initial: Option<f64>,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        IntegrationControls {
            dt_initial: 1e-2,
            tolerance: 1e-10,
            t_max: None,
            tail_fraction: 0.5,
            samples: 2048,
            sigma_initial: None,
        }
    }
}

impl IntegrationControls {
    fn check(&self) -> Result<(), MomentError> {
        if !(self.dt_initial > 0.0 && self.tolerance > 0.0) {
            return Err(MomentError::InvalidControls("dt_initial and tolerance must be positive"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(MomentError::InvalidControls("tail_fraction must lie in (0, 1)"));
        }
        if self.samples < 4 {
            return Err(MomentError::InvalidControls("need at least 4 samples"));
        }
        if matches!(self.t_max, Some(t) if !(t > 0.0)) {
            return Err(MomentError::InvalidControls("t_max must be positive"));
        }
        if matches!(self.sigma_initial, Some(v) if !(v > 0.0)) {
            return Err(MomentError::InvalidControls("sigma_initial must be positive"));
        }
        Ok(())
    }
}

/// Coefficients of the moment equations for one (model, mode, s).
#[derive(Debug, Clone, Copy)]
struct MomentSystem {
    omega: f64,
    delta_plus: f64,
    delta_minus: f64,
    f_plus: f64,
    f_minus: f64,
    drive: DriveSpec,
}

impl MomentSystem {
    fn new(model: &SystemModel, mode: CountingMode, s: f64) -> Self {
        let rates = model.derived_rates();
        let (f_plus, f_minus) = tilt_f(mode, model.reference(), s);
        MomentSystem {
            omega: model.omega(),
            delta_plus: rates.delta_plus,
            delta_minus: rates.delta_minus,
            f_plus,
            f_minus,
            drive: model.drive(),
        }
    }

    fn eval(&self, t: f64, u: &[f64; 4]) -> [f64; 4] {
        let [x, y, sigma, _] = *u;
        let (fp, fm) = (self.f_plus, self.f_minus);
        let damping = 2.0 * fp * sigma - 2.0 * fm - self.delta_minus;
        let force = self.drive.force(self.omega, t);
        [
            -self.omega * y + damping * x,
            self.omega * (x + 4.0 * force) + damping * y,
            -2.0 * (self.delta_minus + 2.0 * fm) * sigma + 2.0 * self.delta_plus + 2.0 * fp * (sigma * sigma + 1.0),
            fp * (2.0 * sigma + x * x + y * y) - 2.0 * fm,
        ]
    }
}

/// Time derivative of the Gaussian parameters.
pub fn rhs(
    state: &GaussianTrajectoryState,
    model: &SystemModel,
    mode: CountingMode,
    s: f64,
    t: f64,
) -> GaussianTrajectoryState {
    GaussianTrajectoryState::from_array(MomentSystem::new(model, mode, s).eval(t, &state.to_array()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub s: f64,
    pub times: Vec<f64>,
    pub states: Vec<GaussianTrajectoryState>,
    /// Drive period 2π/(ω+δ) and samples per period for periodic drives.
    pub drive_period: Option<(f64, usize)>,
}

fn drive_period(model: &SystemModel) -> Option<f64> {
    match model.drive() {
        DriveSpec::Periodic { amplitude, detuning }
            if amplitude > 0.0 && !is_zero_frequency(model.omega(), detuning) =>
        {
            Some(2.0 * PI / (model.omega() + detuning).abs())
        }
        _ => None,
    }
}

/// Integrates from x = y = 0, σ = σ(0), ln A = 0 up to `t_max`, recording
/// the state at uniformly spaced sample times. For periodic drives `t_max`
/// is rounded up to a whole number of periods and each period holds the
/// same number of samples.
pub fn integrate(
    model: &SystemModel,
    mode: CountingMode,
    s: f64,
    controls: &IntegrationControls,
) -> Result<TrajectoryRecord, MomentError> {
    controls.check()?;
    let report = validate(model, mode);
    if !report.is_valid() {
        return Err(LdfError::InvalidModel(report).into());
    }
    let system = MomentSystem::new(model, mode, s);
    let t_max = controls.t_max.unwrap_or(100.0 / system.delta_minus);
    let sigma0 = controls.sigma_initial.unwrap_or(system.delta_plus / system.delta_minus);

    let (times, period) = match drive_period(model) {
        Some(p) => {
            let periods = ((t_max / p).ceil() as usize).max(2);
            let per = controls.samples.div_ceil(periods).max(16);
            let times = (0..=periods * per).map(|i| i as f64 * p / per as f64).collect::<Vec<_>>();
            (times, Some((p, per)))
        }
        None => {
            let n = controls.samples;
            let times = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
            (times, None)
        }
    };

    let solver = Dopri5 { rtol: controls.tolerance, atol: controls.tolerance * 1e-2, ..Dopri5::default() };
    let f = |t: f64, u: &[f64; 4]| system.eval(t, u);
    let guard = |t: f64, u: &[f64; 4]| -> Result<(), MomentError> {
        let sigma = u[2];
        if !(sigma > 0.0 && sigma < 1e100) {
            return Err(MomentError::DomainEscape { t, sigma });
        }
        Ok(())
    };

    let mut state = GaussianTrajectoryState { x: 0.0, y: 0.0, sigma: sigma0, log_amplitude: 0.0 }.to_array();
    let mut states = Vec::with_capacity(times.len());
    states.push(GaussianTrajectoryState::from_array(state));
    let mut h = controls.dt_initial;
    for w in times.windows(2) {
        state = solver.advance(&f, w[0], state, w[1], &mut h, guard)?;
        states.push(GaussianTrajectoryState::from_array(state));
    }
    Ok(TrajectoryRecord { s, times, states, drive_period: period })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub theta: f64,
    pub stderr: f64,
    pub window: (f64, f64),
}

/// Asymptotic slope of ln A(t) over the tail window.
///
/// Without periodic drive this is a least-squares line fit with the usual
/// standard error. With periodic drive the window is a whole number of
/// periods and the slope is the exact period-averaged increment; the
/// standard error is half the difference between the two half-window slopes.
pub fn theta_from_slope(
    trajectory: &TrajectoryRecord,
    controls: &IntegrationControls,
) -> Result<SlopeEstimate, MomentError> {
    let n = trajectory.times.len();
    let ln_a = |i: usize| trajectory.states[i].log_amplitude;
    let t = |i: usize| trajectory.times[i];
    if let Some((_, per)) = trajectory.drive_period {
        let periods = (n - 1) / per;
        let tail = ((controls.tail_fraction * periods as f64).floor() as usize) & !1;
        if tail < 2 {
            return Err(MomentError::WindowTooShort);
        }
        let end = n - 1;
        let start = end - tail * per;
        let mid = end - (tail / 2) * per;
        let slope = |a: usize, b: usize| (ln_a(b) - ln_a(a)) / (t(b) - t(a));
        let theta = slope(start, end);
        let stderr = 0.5 * (slope(start, mid) - slope(mid, end)).abs();
        return Ok(SlopeEstimate { theta, stderr, window: (t(start), t(end)) });
    }

    let count = (controls.tail_fraction * n as f64).ceil() as usize;
    if count < 3 || count > n {
        return Err(MomentError::WindowTooShort);
    }
    let range = n - count..n;
    let k = count as f64;
    let t_mean = range.clone().map(t).sum::<f64>() / k;
    let a_mean = range.clone().map(ln_a).sum::<f64>() / k;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in range.clone() {
        let dt = t(i) - t_mean;
        sxx += dt * dt;
        sxy += dt * (ln_a(i) - a_mean);
    }
    let theta = sxy / sxx;
    let intercept = a_mean - theta * t_mean;
    let ssr: f64 = range.clone().map(|i| (ln_a(i) - intercept - theta * t(i)).powi(2)).sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(SlopeEstimate { theta, stderr, window: (t(n - count), t(n - 1)) })
}

/// Integrates and fits in one call.
pub fn theta_estimate(
    model: &SystemModel,
    mode: CountingMode,
    s: f64,
    controls: &IntegrationControls,
) -> Result<SlopeEstimate, MomentError> {
    theta_from_slope(&integrate(model, mode, s, controls)?, controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::model::BathChannel;

    const NET: CountingMode = CountingMode::NetExchange;

    fn two_bath() -> SystemModel {
        SystemModel::thermal(1.0, &[(0.05, 0.3), (0.05, 0.8)]).unwrap()
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let m = two_bath();
        let r = m.derived_rates();
        let st = GaussianTrajectoryState { x: 0.0, y: 0.0, sigma: r.delta_plus / r.delta_minus, log_amplitude: 3.0 };
        let d = rhs(&st, &m, NET, 0.0, 1.0);
        assert!(d.x == 0.0 && d.y == 0.0 && d.log_amplitude == 0.0);
        assert!(d.sigma.abs() < 1e-16);
        let any = GaussianTrajectoryState { x: 0.3, y: -1.0, sigma: 7.0, log_amplitude: 0.0 };
        assert_eq!(rhs(&any, &m, NET, 0.0, 0.0).log_amplitude, 0.0);
    }

    #[test]
    fn sigma_converges_to_sigma_st() {
        let m = two_bath();
        let dm = m.derived_rates().delta_minus;
        for s in [-0.4, 0.2, 0.9] {
            let c = IntegrationControls { t_max: Some(50.0 / dm), sigma_initial: Some(1.0), ..Default::default() };
            let tr = integrate(&m, NET, s, &c).unwrap();
            let last = tr.states.last().unwrap().sigma;
            let expected = analytic::sigma_st(&m, NET, s).unwrap();
            assert!((last - expected).abs() < 1e-8, "{s}: {last} vs {expected}");
            assert!(tr.states.iter().all(|st| st.x == 0.0 && st.y == 0.0));
        }
    }

    #[test]
    fn normalisation_preserved_at_zero_bias() {
        let tr = integrate(&two_bath(), NET, 0.0, &IntegrationControls::default()).unwrap();
        assert!(tr.states.iter().all(|st| st.log_amplitude.abs() < 1e-12));
    }

    #[test]
    fn outside_the_interval_escapes() {
        let m = two_bath();
        let bi = analytic::branch_points(&m, NET).unwrap();
        for s in [bi.s_plus + 0.1, bi.s_minus - 0.1] {
            let r = integrate(&m, NET, s, &IntegrationControls::default());
            assert!(
                matches!(r, Err(MomentError::DomainEscape { .. }) | Err(MomentError::StiffnessFailure { .. })),
                "{s}: {r:?}"
            );
        }
    }

    #[test]
    fn slope_matches_closed_form_undriven() {
        let m = SystemModel::thermal(1.0, &[(0.01, 10.0), (0.02, 20.0)]).unwrap();
        let s = 0.05;
        let est = theta_estimate(&m, NET, s, &IntegrationControls::default()).unwrap();
        let exact = analytic::theta(&m, NET, s).unwrap().theta;
        assert!((est.theta - exact).abs() <= 1e-6 * exact.abs(), "{} vs {exact}", est.theta);
    }

    #[test]
    fn constant_drive_fixed_point_solves_linear_system() {
        let m = two_bath().with_drive(DriveSpec::Constant { amplitude: 0.1 });
        let s = 0.2;
        let tr = integrate(&m, NET, s, &IntegrationControls::default()).unwrap();
        let last = tr.states.last().unwrap();
        // 0 = −ω y − Σ x,  0 = ω (x + 4F) − Σ y
        let sigma_r = analytic::sigma_radicand(&m, NET, s).unwrap();
        let (w, f) = (1.0, 0.1);
        let det = sigma_r * sigma_r + w * w;
        let x = -4.0 * f * w * w / det;
        let y = 4.0 * f * w * sigma_r / det;
        assert!((last.x - x).abs() < 1e-8 && (last.y - y).abs() < 1e-8, "{last:?} vs ({x}, {y})");
    }

    #[test]
    fn constant_and_periodic_slopes() {
        let base = SystemModel::thermal(1.0, &[(0.05, 0.3), (0.05, 0.8)]).unwrap();
        let s = 0.1;
        let c = base.with_drive(DriveSpec::Constant { amplitude: 0.05 });
        let est = theta_estimate(&c, NET, s, &IntegrationControls::default()).unwrap();
        let exact = analytic::theta(&c, NET, s).unwrap().theta;
        assert!((est.theta - exact).abs() <= 1e-5 * exact.abs(), "{} vs {exact}", est.theta);

        let p = base.with_drive(DriveSpec::Periodic { amplitude: 0.05, detuning: 0.0 });
        let est = theta_estimate(&p, NET, s, &IntegrationControls::default()).unwrap();
        let exact = analytic::theta(&p, NET, s).unwrap().theta;
        assert!((est.theta - exact).abs() <= 1e-4 * exact.abs(), "{} vs {exact}", est.theta);
    }

    #[test]
    fn slope_independent_of_initial_sigma() {
        let m = two_bath();
        let s = 0.3;
        let a = theta_estimate(&m, NET, s, &IntegrationControls { sigma_initial: Some(1.0), ..Default::default() })
            .unwrap();
        let b = theta_estimate(&m, NET, s, &IntegrationControls { sigma_initial: Some(10.0), ..Default::default() })
            .unwrap();
        assert!((a.theta - b.theta).abs() < 1e-6 * a.theta.abs());
    }

    #[test]
    fn sigma_relaxes_monotonically() {
        let m = two_bath();
        for sigma0 in [0.5, 10.0] {
            let tr =
                integrate(&m, NET, 0.4, &IntegrationControls { sigma_initial: Some(sigma0), ..Default::default() })
                    .unwrap();
            let sign = (tr.states[1].sigma - tr.states[0].sigma).signum();
            for w in tr.states.windows(2) {
                let d = w[1].sigma - w[0].sigma;
                assert!(d == 0.0 || d.signum() == sign || d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn controls_validated() {
        let m = SystemModel::new(1.0, vec![BathChannel::new(0.5, 0.0).unwrap()], DriveSpec::None).unwrap();
        let bad = IntegrationControls { tail_fraction: 1.5, ..Default::default() };
        assert!(matches!(integrate(&m, NET, 0.0, &bad), Err(MomentError::InvalidControls(_))));
        let tr = integrate(&m, NET, 0.0, &IntegrationControls { samples: 4, ..Default::default() }).unwrap();
        let short = IntegrationControls { tail_fraction: 0.1, samples: 4, ..Default::default() };
        assert_eq!(theta_from_slope(&tr, &short), Err(MomentError::WindowTooShort));
    }
}
