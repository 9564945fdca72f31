//! Quantum-jump Monte Carlo unravelling with per-channel counters, and
//! estimators for activity, Mandel Q and the empirical SCGF.
//!
//! Each trajectory evolves an unnormalised Fock-space wavefunction under
//! H_eff = H − i Σᵢ (Γᵢ a†a + Γ̄ᵢ a a†) until its squared norm falls below a
//! uniform threshold. Time runs on an integer tick grid: a step that would
//! cross the threshold is retried at half the size, down to a single tick,
//! so jump times are resolved to `base_step / 2^REFINE_LEVELS` and the
//! evolution after a jump stays on the grid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{validate, CountingMode, SystemModel, ValidationReport};

/// Number of step halvings available to locate a jump.
pub const REFINE_LEVELS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),
    #[error("invalid controls: {0}")]
    InvalidControls(&'static str),
    #[error("trajectory {trajectory}: population {population:e} reached the top Fock level at t = {time}")]
    CutoffLeak { trajectory: usize, time: f64, population: f64 },
    #[error("no trajectories to estimate from")]
    EmptyInput,
    #[error("trajectories have different durations")]
    InconsistentDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// Sampled from the stationary state: a Fock state drawn from the
    /// thermal distribution, displaced by the coherent steady-state
    /// amplitude for a constant drive.
    #[default]
    Steady,
    Vacuum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McControls {
    pub t_final: f64,
    pub n_traj: usize,
    pub cutoff: usize,
    pub seed: u64,
    pub initial: InitialState,
    pub record_jumps: bool,
    pub leak_tolerance: f64,
}

impl McControls {
    pub fn new(t_final: f64, n_traj: usize, seed: u64) -> Self {
        McControls {
            t_final,
            n_traj,
            cutoff: 30,
            seed,
            initial: InitialState::Steady,
            record_jumps: false,
            leak_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Emission,
    Absorption,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub bath: usize,
    pub kind: JumpKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub index: usize,
    /// Reference-bath emissions minus absorptions.
    pub k_net: i64,
    /// Reference-bath emissions.
    pub k_flux: u64,
    pub reference_absorptions: u64,
    pub t_final: f64,
    pub jumps: Option<Vec<JumpEvent>>,
}

impl TrajectoryOutcome {
    pub fn count(&self, mode: CountingMode) -> f64 {
        match mode {
            CountingMode::NetExchange => self.k_net as f64,
            CountingMode::OutgoingFlux => self.k_flux as f64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Channel {
    bath: usize,
    kind: JumpKind,
    rate: f64,
}

enum Propagator {
    /// exp(−i H_eff Δ/2^j) for j = 0..=REFINE_LEVELS.
    Exact(Vec<DMatrix<Complex64>>),
    /// Fixed-size RK4 steps for a time-dependent drive.
    Rk4 { static_part: DMatrix<Complex64>, coupling: DMatrix<Complex64> },
}

struct Dynamics {
    model: SystemModel,
    levels: usize,
    channels: Vec<Channel>,
    base_step: f64,
    base_steps: u64,
    propagator: Propagator,
    displacement: Option<DMatrix<Complex64>>,
}

fn ladder(d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |i, j| if j == i + 1 { Complex64::from((j as f64).sqrt()) } else { Complex64::from(0.0) })
}

impl Dynamics {
    fn new(model: &SystemModel, controls: &McControls) -> Self {
        let d = controls.cutoff + 1;
        let omega = model.omega();
        let (sum_to, sum_from) = model.total_rates();
        let a = ladder(d);
        let quadrature = &a + a.adjoint();
        let static_part = DMatrix::from_fn(d, d, |i, j| {
            if i != j {
                return Complex64::from(0.0);
            }
            let n = i as f64;
            let above = if i + 1 < d { n + 1.0 } else { 0.0 };
            Complex64::new(omega * n, -(sum_to * n + sum_from * above))
        });
        let minus_i = Complex64::new(0.0, -1.0);

        let drive = model.drive();
        let stationary = drive.is_stationary(omega);
        let g_max = 2.0 * omega * drive.amplitude().abs();
        let mut base_step = if stationary {
            1.0 / (sum_to + sum_from + g_max)
        } else {
            let spread = (omega + sum_to + sum_from) * d as f64 + 2.0 * g_max * (d as f64).sqrt();
            0.05 / spread
        };
        let base_steps = (controls.t_final / base_step).ceil().max(1.0) as u64;
        base_step = controls.t_final / base_steps as f64;

        let propagator = if stationary {
            let h = &static_part + &quadrature * Complex64::from(model.hamiltonian_drive(0.0));
            let us = (0..=REFINE_LEVELS).map(|j| (&h * (minus_i * base_step / (1u64 << j) as f64)).exp()).collect();
            Propagator::Exact(us)
        } else {
            Propagator::Rk4 { static_part, coupling: quadrature }
        };

        let displacement = match (controls.initial, stationary) {
            (InitialState::Steady, true) if model.hamiltonian_drive(0.0) != 0.0 => {
                let delta_minus = model.derived_rates().delta_minus;
                let alpha = Complex64::new(0.0, -model.hamiltonian_drive(0.0)) / Complex64::new(delta_minus, omega);
                let generator = a.adjoint() * alpha - &a * alpha.conj();
                Some(generator.exp())
            }
            _ => None,
        };

        let mut channels = Vec::new();
        for (bath, b) in model.baths().iter().enumerate() {
            if b.gamma_to() > 0.0 {
                channels.push(Channel { bath, kind: JumpKind::Emission, rate: 2.0 * b.gamma_to() });
            }
            if b.gamma_from() > 0.0 {
                channels.push(Channel { bath, kind: JumpKind::Absorption, rate: 2.0 * b.gamma_from() });
            }
        }
        Dynamics { model: model.clone(), levels: d, channels, base_step, base_steps, propagator, displacement }
    }

    fn tick(&self) -> f64 {
        self.base_step / (1u64 << REFINE_LEVELS) as f64
    }

    fn step(&self, psi: &DVector<Complex64>, t: f64, level: u32) -> DVector<Complex64> {
        match &self.propagator {
            Propagator::Exact(us) => &us[level as usize] * psi,
            Propagator::Rk4 { static_part, coupling } => {
                let dt = self.base_step / (1u64 << level) as f64;
                let minus_i = Complex64::new(0.0, -1.0);
                let f = |t: f64, y: &DVector<Complex64>| -> DVector<Complex64> {
                    let g = Complex64::from(self.model.hamiltonian_drive(t));
                    (static_part * y + coupling * y * g) * minus_i
                };
                let k1 = f(t, psi);
                let k2 = f(t + 0.5 * dt, &(psi + &k1 * Complex64::from(0.5 * dt)));
                let k3 = f(t + 0.5 * dt, &(psi + &k2 * Complex64::from(0.5 * dt)));
                let k4 = f(t + dt, &(psi + &k3 * Complex64::from(dt)));
                psi + (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4) * Complex64::from(dt / 6.0)
            }
        }
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng, initial: InitialState) -> DVector<Complex64> {
        let d = self.levels;
        let mut psi = DVector::from_element(d, Complex64::from(0.0));
        let n = match initial {
            InitialState::Vacuum => 0,
            InitialState::Steady => {
                let nbar = self.model.steady_occupation();
                if nbar > 0.0 {
                    let ratio = nbar / (nbar + 1.0);
                    loop {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        let n = (u.ln() / ratio.ln()).floor();
                        if n < d as f64 {
                            break n as usize;
                        }
                    }
                } else {
                    0
                }
            }
        };
        psi[n] = Complex64::from(1.0);
        if let (InitialState::Steady, Some(disp)) = (initial, &self.displacement) {
            psi = disp * psi;
            let norm = psi.norm();
            psi /= Complex64::from(norm);
        }
        psi
    }

    fn channel_weight(&self, channel: &Channel, psi: &DVector<Complex64>) -> f64 {
        let d = self.levels;
        let sum: f64 = match channel.kind {
            JumpKind::Emission => (1..d).map(|n| n as f64 * psi[n].norm_sqr()).sum(),
            JumpKind::Absorption => (0..d - 1).map(|n| (n + 1) as f64 * psi[n].norm_sqr()).sum(),
        };
        channel.rate * sum
    }

    fn apply_jump(&self, kind: JumpKind, psi: &DVector<Complex64>) -> DVector<Complex64> {
        let d = self.levels;
        let mut out = DVector::from_element(d, Complex64::from(0.0));
        match kind {
            JumpKind::Emission => (1..d).for_each(|n| out[n - 1] = psi[n] * (n as f64).sqrt()),
            JumpKind::Absorption => (0..d - 1).for_each(|n| out[n + 1] = psi[n] * ((n + 1) as f64).sqrt()),
        }
        let norm = out.norm();
        out / Complex64::from(norm)
    }

    fn run(&self, index: usize, controls: &McControls) -> Result<TrajectoryOutcome, McError> {
        let mut rng = ChaCha8Rng::seed_from_u64(controls.seed);
        rng.set_stream(index as u64);
        let mut psi = self.initial_state(&mut rng, controls.initial);
        let tick = self.tick();
        let total = self.base_steps << REFINE_LEVELS;
        let top = self.levels - 1;
        let leak = |psi: &DVector<Complex64>, pos: u64| -> Result<(), McError> {
            let population = psi[top].norm_sqr() / psi.norm_squared();
            if population > controls.leak_tolerance {
                return Err(McError::CutoffLeak { trajectory: index, time: pos as f64 * tick, population });
            }
            Ok(())
        };
        leak(&psi, 0)?;

        let mut threshold: f64 = 1.0 - rng.random::<f64>();
        let mut pos: u64 = 0;
        let (mut emissions, mut absorptions) = (0u64, 0u64);
        let mut jumps = controls.record_jumps.then(Vec::new);
        while pos < total {
            let align = if pos == 0 { REFINE_LEVELS } else { pos.trailing_zeros().min(REFINE_LEVELS) };
            let mut level = REFINE_LEVELS - align;
            let t = pos as f64 * tick;
            loop {
                let candidate = self.step(&psi, t, level);
                let width = 1u64 << (REFINE_LEVELS - level);
                if candidate.norm_squared() > threshold {
                    psi = candidate;
                    pos += width;
                    break;
                }
                if level == REFINE_LEVELS {
                    pos += width;
                    let weights: Vec<f64> = self.channels.iter().map(|c| self.channel_weight(c, &candidate)).collect();
                    let sum: f64 = weights.iter().sum();
                    let mut pick = rng.random::<f64>() * sum;
                    let mut chosen = self.channels.len() - 1;
                    for (k, w) in weights.iter().enumerate() {
                        if pick < *w {
                            chosen = k;
                            break;
                        }
                        pick -= w;
                    }
                    let channel = self.channels[chosen];
                    psi = self.apply_jump(channel.kind, &candidate);
                    if channel.bath == 0 {
                        match channel.kind {
                            JumpKind::Emission => emissions += 1,
                            JumpKind::Absorption => absorptions += 1,
                        }
                    }
                    if let Some(log) = jumps.as_mut() {
                        log.push(JumpEvent { time: pos as f64 * tick, bath: channel.bath, kind: channel.kind });
                    }
                    threshold = 1.0 - rng.random::<f64>();
                    break;
                }
                level += 1;
            }
            leak(&psi, pos)?;
        }
        Ok(TrajectoryOutcome {
            index,
            k_net: emissions as i64 - absorptions as i64,
            k_flux: emissions,
            reference_absorptions: absorptions,
            t_final: controls.t_final,
            jumps,
        })
    }
}

/// Runs `controls.n_traj` independent trajectories. Trajectory `i` draws
/// from its own ChaCha stream `(seed, i)`, so results do not depend on
/// thread count or scheduling.
pub fn simulate(model: &SystemModel, controls: &McControls) -> Result<Vec<TrajectoryOutcome>, McError> {
    let report = validate(model, CountingMode::OutgoingFlux);
    if !report.is_valid() {
        return Err(McError::InvalidModel(report));
    }
    if !(controls.t_final > 0.0 && controls.t_final.is_finite()) {
        return Err(McError::InvalidControls("t_final must be positive and finite"));
    }
    if controls.cutoff < 1 {
        return Err(McError::InvalidControls("cutoff must be at least 1"));
    }
    if !(controls.leak_tolerance > 0.0) {
        return Err(McError::InvalidControls("leak_tolerance must be positive"));
    }
    let dynamics = Dynamics::new(model, controls);
    (0..controls.n_traj).into_par_iter().map(|i| dynamics.run(i, controls)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgfSample {
    pub s: f64,
    pub lambda: f64,
    pub stderr: f64,
    /// Effective sample size (Σw)²/Σw² of the weights e^{−sK}.
    pub ess: f64,
    /// False when the effective sample size is below 10% of the trajectories.
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub mode: CountingMode,
    pub n_traj: usize,
    pub t_final: f64,
    pub mean_rate: f64,
    pub mean_rate_stderr: f64,
    /// `None` when the mean count vanishes.
    pub mandel_q: Option<f64>,
    pub mandel_q_stderr: Option<f64>,
    pub scgf: Vec<ScgfSample>,
}

fn mandel_from_sums(n: f64, s1: f64, s2: f64) -> Option<f64> {
    let mean = s1 / n;
    if mean == 0.0 || n < 2.0 {
        return None;
    }
    let var = (s2 - n * mean * mean) / (n - 1.0);
    Some(var / mean - 1.0)
}

fn jackknife_stderr(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    ((n - 1.0) / n * values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt()
}

/// Mean rate, Mandel Q and λ̂(s) = ln(mean e^{−sK})/t with jackknife
/// standard errors.
pub fn estimate(outcomes: &[TrajectoryOutcome], mode: CountingMode, s_grid: &[f64]) -> Result<McEstimate, McError> {
    let first = outcomes.first().ok_or(McError::EmptyInput)?;
    let t = first.t_final;
    if outcomes.iter().any(|o| o.t_final != t) {
        return Err(McError::InconsistentDuration);
    }
    let k: Vec<f64> = outcomes.iter().map(|o| o.count(mode)).collect();
    let n = k.len();
    let nf = n as f64;
    let s1: f64 = k.iter().sum();
    let s2: f64 = k.iter().map(|x| x * x).sum();
    let mean = s1 / nf;
    let var = if n > 1 { (s2 - nf * mean * mean).max(0.0) / (nf - 1.0) } else { 0.0 };

    let mandel_q = mandel_from_sums(nf, s1, s2);
    let mandel_q_stderr = mandel_q.and_then(|_| {
        if n < 3 {
            return None;
        }
        let loo: Option<Vec<f64>> = k.iter().map(|x| mandel_from_sums(nf - 1.0, s1 - x, s2 - x * x)).collect();
        loo.map(|v| jackknife_stderr(&v))
    });

    let scgf = s_grid
        .iter()
        .map(|&s| {
            let exponents: Vec<f64> = k.iter().map(|x| -s * x).collect();
            let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
            let sum: f64 = w.iter().sum();
            let sum_sq: f64 = w.iter().map(|x| x * x).sum();
            let lambda = (m + (sum / nf).ln()) / t;
            let stderr = if n > 1 {
                let mut prefix = vec![0.0; n + 1];
                for i in 0..n {
                    prefix[i + 1] = prefix[i] + w[i];
                }
                let loo: Vec<f64> = (0..n)
                    .map(|i| (m + ((prefix[i] + (sum - prefix[i + 1]).max(0.0)) / (nf - 1.0)).ln()) / t)
                    .collect();
                jackknife_stderr(&loo)
            } else {
                f64::NAN
            };
            let ess = sum * sum / sum_sq;
            ScgfSample { s, lambda, stderr, ess, reliable: ess >= 0.1 * nf }
        })
        .collect();

    Ok(McEstimate {
        mode,
        n_traj: n,
        t_final: t,
        mean_rate: mean / t,
        mean_rate_stderr: (var / nf).sqrt() / t,
        mandel_q,
        mandel_q_stderr,
        scgf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::model::{BathChannel, DriveSpec};

    const NET: CountingMode = CountingMode::NetExchange;
    const FLUX: CountingMode = CountingMode::OutgoingFlux;

    fn cavity(f: f64) -> SystemModel {
        SystemModel::new(1.0, vec![BathChannel::new(0.5, 0.0).unwrap()], DriveSpec::Constant { amplitude: f }).unwrap()
    }

    fn reduced_two_bath() -> SystemModel {
        SystemModel::thermal(1.0, &[(0.05, 0.5), (0.05, 1.0)]).unwrap()
    }

    #[test]
    fn vacuum_emits_nothing() {
        let mut c = McControls::new(20.0, 50, 1);
        c.initial = InitialState::Vacuum;
        let out = simulate(&cavity(0.0), &c).unwrap();
        assert!(out.iter().all(|o| o.k_flux == 0 && o.k_net == 0));
    }

    #[test]
    fn seeds_reproduce_and_streams_are_per_trajectory() {
        let m = reduced_two_bath();
        let mut c = McControls::new(10.0, 16, 7);
        c.record_jumps = true;
        let a = simulate(&m, &c).unwrap();
        let b = simulate(&m, &c).unwrap();
        assert_eq!(a, b);
        c.n_traj = 5;
        let prefix = simulate(&m, &c).unwrap();
        assert_eq!(&a[..5], &prefix[..]);
        c.seed = 8;
        assert_ne!(simulate(&m, &c).unwrap(), prefix);
    }

    #[test]
    fn counters_match_the_jump_log() {
        let m = reduced_two_bath().with_drive(DriveSpec::Constant { amplitude: 0.1 });
        let mut c = McControls::new(30.0, 40, 3);
        c.record_jumps = true;
        for o in simulate(&m, &c).unwrap() {
            let log = o.jumps.as_ref().unwrap();
            let em = log.iter().filter(|j| j.bath == 0 && j.kind == JumpKind::Emission).count() as i64;
            let ab = log.iter().filter(|j| j.bath == 0 && j.kind == JumpKind::Absorption).count() as i64;
            assert_eq!(o.k_net, em - ab);
            assert_eq!(o.k_flux as i64, em);
            assert!(o.k_flux as i64 >= o.k_net.max(0));
            assert!(log.windows(2).all(|w| w[0].time <= w[1].time));
            assert!(log.iter().all(|j| j.time > 0.0 && j.time <= 30.0));
        }
    }

    #[test]
    fn zero_absorption_makes_net_equal_flux() {
        let out = simulate(&cavity(0.2), &McControls::new(20.0, 30, 5)).unwrap();
        assert!(out.iter().all(|o| o.k_net == o.k_flux as i64));
    }

    #[test]
    fn driven_cavity_counts_are_poissonian() {
        let m = cavity(0.2);
        let out = simulate(&m, &McControls::new(50.0, 2000, 11)).unwrap();
        let est = estimate(&out, FLUX, &[]).unwrap();
        let rate = 8.0 * 0.04 * 0.5 / 1.25;
        assert!((est.mean_rate - rate).abs() < 3.0 * est.mean_rate_stderr, "{est:?}");
        let q = est.mandel_q.unwrap();
        assert!(q.abs() < 3.0 * est.mandel_q_stderr.unwrap(), "{est:?}");
    }

    #[test]
    fn single_thermal_bath_has_no_net_current() {
        let m = SystemModel::thermal(1.0, &[(0.1, 0.7)]).unwrap();
        let out = simulate(&m, &McControls::new(40.0, 2000, 13)).unwrap();
        let est = estimate(&out, NET, &[]).unwrap();
        assert!(est.mean_rate.abs() < 3.0 * est.mean_rate_stderr, "{est:?}");
    }

    #[test]
    fn two_bath_net_rate_matches_closed_form() {
        let m = reduced_two_bath();
        let out = simulate(&m, &McControls::new(60.0, 2000, 17)).unwrap();
        let est = estimate(&out, NET, &[]).unwrap();
        let k0 = analytic::activity(&m, NET).unwrap();
        assert!((est.mean_rate - k0).abs() < 3.0 * est.mean_rate_stderr, "{} vs {k0}", est.mean_rate);
    }

    #[test]
    fn leak_is_reported() {
        let m = SystemModel::thermal(1.0, &[(0.1, 2.0)]).unwrap();
        let mut c = McControls::new(20.0, 10, 1);
        c.cutoff = 4;
        assert!(matches!(simulate(&m, &c), Err(McError::CutoffLeak { .. })));
    }

    #[test]
    fn invalid_inputs() {
        let unstable = SystemModel::new(1.0, vec![BathChannel::new(0.1, 0.2).unwrap()], DriveSpec::None).unwrap();
        assert!(matches!(simulate(&unstable, &McControls::new(1.0, 1, 0)), Err(McError::InvalidModel(_))));
        assert!(matches!(simulate(&cavity(0.0), &McControls::new(0.0, 1, 0)), Err(McError::InvalidControls(_))));
        assert_eq!(estimate(&[], NET, &[0.1]), Err(McError::EmptyInput));
    }

    fn synthetic(counts: &[u64], t: f64) -> Vec<TrajectoryOutcome> {
        counts
            .iter()
            .enumerate()
            .map(|(index, &k)| TrajectoryOutcome {
                index,
                k_net: k as i64,
                k_flux: k,
                reference_absorptions: 0,
                t_final: t,
                jumps: None,
            })
            .collect()
    }

    fn poisson_counts(mean: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let limit = (-mean).exp();
                let mut k = 0;
                let mut p: f64 = rng.random();
                while p > limit {
                    k += 1;
                    p *= rng.random::<f64>();
                }
                k
            })
            .collect()
    }

    #[test]
    fn all_zero_counts() {
        let est = estimate(&synthetic(&[0; 20], 5.0), FLUX, &[-0.5, 0.0, 0.5]).unwrap();
        assert_eq!(est.mandel_q, None);
        assert!(est.scgf.iter().all(|p| p.lambda == 0.0 && p.reliable));
    }

    #[test]
    fn synthetic_poisson_scgf() {
        let (rate, t) = (2.0, 5.0);
        let est =
            estimate(&synthetic(&poisson_counts(rate * t, 20000, 1), t), FLUX, &[-0.1, -0.05, 0.05, 0.1]).unwrap();
        for p in &est.scgf {
            let exact = rate * ((-p.s).exp() - 1.0);
            assert!((p.lambda - exact).abs() < 3.0 * p.stderr, "{p:?} vs {exact}");
            assert!(p.reliable);
        }
        assert!(est.mandel_q.unwrap().abs() < 3.0 * est.mandel_q_stderr.unwrap());
        let tail = estimate(&synthetic(&poisson_counts(rate * t, 2000, 2), t), FLUX, &[-3.0]).unwrap();
        assert!(!tail.scgf[0].reliable);
    }

    #[test]
    fn standard_errors_follow_inverse_square_root() {
        let grid = [-0.1, -0.05, 0.05, 0.1];
        let small = estimate(&synthetic(&poisson_counts(10.0, 5000, 3), 5.0), FLUX, &grid).unwrap();
        let large = estimate(&synthetic(&poisson_counts(10.0, 20000, 4), 5.0), FLUX, &grid).unwrap();
        let ratio: f64 =
            small.scgf.iter().zip(&large.scgf).map(|(a, b)| a.stderr / b.stderr).sum::<f64>() / grid.len() as f64;
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn inconsistent_durations_rejected() {
        let mut o = synthetic(&[1, 2], 1.0);
        o[1].t_final = 2.0;
        assert_eq!(estimate(&o, FLUX, &[]), Err(McError::InconsistentDuration));
    }
}
