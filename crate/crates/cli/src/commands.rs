use qho_fcs::analytic::{self, LdfError};
use qho_fcs::fock::{self, FockError};
use qho_fcs::jump::{self, InitialState, McControls, McError};
use qho_fcs::model::occupation_from_temperature;
use qho_fcs::moments::{self, IntegrationControls, MomentError};
use qho_fcs::{BathChannel, CountingMode, DriveSpec, SystemModel};
use rayon::prelude::*;
use serde_json::{json, Value as Json};

use crate::config::{InitialSpec, McSpec, RunConfig};
use crate::table::{Cell, Table};
use crate::CliError;

pub enum Output {
    Table(Table),
    /// Per-format payloads: the CSV table and the JSON report differ.
    Split {
        table: Table,
        report: Json,
    },
    Text(String),
}

fn ldf_error(e: LdfError) -> CliError {
    match e {
        LdfError::InvalidModel(_) => CliError::Config(e.to_string()),
        _ => CliError::Domain(e.to_string()),
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let mut grid: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
            grid[points - 1] = hi;
            grid
        }
    }
}

fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), points).into_iter().map(f64::exp).collect()
}

pub fn theta_sweep(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model();
    let mode = config.mode();
    let spec = &config.theta_sweep;
    let bi = analytic::branch_points(&model, mode).map_err(ldf_error)?;
    let lo = spec.s_min.map_or(bi.s_minus, |s| s.max(bi.s_minus));
    let hi = spec.s_max.map_or(bi.s_plus, |s| s.min(bi.s_plus));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(CliError::Config("unbounded branch interval: set theta_sweep.s_min and s_max".into()));
    }
    if !(lo < hi) || spec.points < 2 {
        return Err(CliError::Config("theta_sweep needs s_min < s_max and at least 2 points".into()));
    }
    let rows: Vec<Result<Vec<Cell>, CliError>> = linspace(lo, hi, spec.points)
        .into_par_iter()
        .map(|s| {
            let r = analytic::theta(&model, mode, s).map_err(ldf_error)?;
            Ok(vec![s.into(), r.theta.into(), r.theta_osc.into(), r.theta_drive.into(), r.in_domain.into()])
        })
        .collect();
    let mut table = Table::new(vec!["s", "theta", "theta_osc", "theta_drive", "in_domain"]);
    table.meta = vec![("mode", mode.to_string().into()), ("s_minus", bi.s_minus.into()), ("s_plus", bi.s_plus.into())];
    for row in rows {
        table.push(row?);
    }
    Ok(Output::Table(table))
}

pub fn activity_scan(config: &RunConfig) -> Result<Output, CliError> {
    let spec = &config.activity_scan;
    let omega = config.model.omega;
    let gammas = config
        .model
        .baths
        .iter()
        .map(|b| b.thermal(omega).map(|t| t.map(|(g, _)| g)))
        .collect::<Result<Vec<_>, _>>()?;
    let (g1, g2) = match gammas.as_slice() {
        [Some(g1), Some(g2)] => (*g1, *g2),
        _ => return Err(CliError::Config("activity-scan needs exactly two thermal baths".into())),
    };
    if !(spec.t1_min > 0.0 && spec.t1_max > spec.t1_min && spec.points >= 2 && spec.ratio > 0.0) {
        return Err(CliError::Config("activity_scan needs 0 < t1_min < t1_max, ratio > 0, points >= 2".into()));
    }
    let mut table = Table::new(vec!["t1", "n1", "n2", "k0"]);
    table.meta = vec![("ratio", spec.ratio.into()), ("gamma1", g1.into()), ("gamma2", g2.into())];
    for t1 in logspace(spec.t1_min, spec.t1_max, spec.points) {
        let n1 = occupation_from_temperature(t1, omega);
        let n2 = occupation_from_temperature(spec.ratio * t1, omega);
        let model = SystemModel::thermal(omega, &[(g1, n1), (g2, n2)]).map_err(|e| CliError::Config(e.to_string()))?;
        let k0 = analytic::activity(&model, CountingMode::NetExchange).map_err(ldf_error)?;
        table.push(vec![t1.into(), n1.into(), n2.into(), k0.into()]);
    }
    Ok(Output::Table(table))
}

pub fn ion(config: &RunConfig) -> Result<Output, CliError> {
    let spec = &config.ion;
    let omega = config.model.omega;
    let mut pairs = spec.rates.clone();
    for &g in &spec.gamma_to {
        for &gb in &spec.gamma_from {
            pairs.push((g, gb));
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Config("ion needs rates or a gamma_to × gamma_from grid".into()));
    }
    let drives = [
        DriveSpec::None,
        DriveSpec::Constant { amplitude: spec.amplitude },
        DriveSpec::Periodic { amplitude: spec.amplitude, detuning: spec.detuning },
    ];
    let mut table = Table::new(vec![
        "gamma_to",
        "gamma_from",
        "valid",
        "n_st",
        "ln_k0_undriven",
        "ln_k0_constant",
        "ln_k0_periodic",
        "q0_undriven",
        "q0_constant",
        "q0_periodic",
    ]);
    table.meta =
        vec![("omega", omega.into()), ("amplitude", spec.amplitude.into()), ("detuning", spec.detuning.into())];
    for (g, gb) in pairs {
        let channel = BathChannel::new(g, gb).map_err(|e| CliError::Config(e.to_string()))?;
        let mut row: Vec<Cell> = vec![g.into(), gb.into()];
        if !(g > gb) {
            row.push(false.into());
            row.extend(std::iter::repeat_n(Cell::Empty, 7));
            table.push(row);
            continue;
        }
        row.push(true.into());
        row.push((gb / (g - gb)).into());
        let mut k = Vec::new();
        let mut q = Vec::new();
        for drive in drives {
            let model = SystemModel::new(omega, vec![channel], drive).map_err(|e| CliError::Config(e.to_string()))?;
            let activity = analytic::activity(&model, CountingMode::OutgoingFlux).map_err(ldf_error)?;
            k.push(Cell::Float(activity.ln()));
            q.push(Cell::from(analytic::mandel_q(&model, CountingMode::OutgoingFlux).ok()));
        }
        row.extend(k);
        row.extend(q);
        table.push(row);
    }
    Ok(Output::Table(table))
}

pub fn branch(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model();
    let mode = config.mode();
    let bi = analytic::branch_points(&model, mode).map_err(ldf_error)?;
    let mut table = Table::new(vec!["mode", "s_minus", "s_plus", "s0", "a", "b", "c"]);
    let c = bi.coefficients;
    table.push(vec![
        mode.to_string().into(),
        bi.s_minus.into(),
        bi.s_plus.into(),
        analytic::gc_midpoint(&bi).ok().into(),
        c.a.into(),
        c.b.into(),
        c.c.into(),
    ]);
    Ok(Output::Table(table))
}

fn moment_error(e: MomentError) -> CliError {
    match e {
        MomentError::InvalidControls(_) => CliError::Config(e.to_string()),
        MomentError::Ldf(inner) => ldf_error(inner),
        _ => CliError::Domain(e.to_string()),
    }
}

pub fn traj_dump(config: &RunConfig) -> Result<Output, CliError> {
    let model = config.model();
    let spec = &config.traj_dump;
    let controls = IntegrationControls { t_max: spec.t_max, samples: spec.samples, ..IntegrationControls::default() };
    let record = moments::integrate(&model, config.mode(), spec.s, &controls).map_err(moment_error)?;
    let mut table = Table::new(vec!["t", "x", "y", "sigma", "lnA"]);
    table.meta = vec![("s", spec.s.into()), ("mode", config.mode().to_string().into())];
    for (t, st) in record.times.iter().zip(&record.states) {
        table.push(vec![(*t).into(), st.x.into(), st.y.into(), st.sigma.into(), st.log_amplitude.into()]);
    }
    Ok(Output::Table(table))
}

pub fn generator_dump(config: &RunConfig) -> Result<Output, CliError> {
    let spec = &config.generator_dump;
    let generator =
        fock::build_generator(&config.model(), config.mode(), spec.s, spec.cutoff).map_err(|e| match e {
            FockError::CutoffTooSmall { .. } | FockError::PeriodicDriveUnsupported => CliError::Config(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        })?;
    let mut buf = Vec::new();
    generator.write_triplets(&mut buf)?;
    Ok(Output::Text(String::from_utf8(buf).expect("ASCII output")))
}

fn mc_controls(spec: &McSpec, seed: u64) -> McControls {
    McControls {
        t_final: spec.t_final,
        n_traj: spec.n_traj,
        cutoff: spec.cutoff,
        seed,
        initial: match spec.initial {
            InitialSpec::Steady => InitialState::Steady,
            InitialSpec::Vacuum => InitialState::Vacuum,
        },
        record_jumps: false,
        leak_tolerance: spec.leak_tolerance,
    }
}

fn mc_error(e: McError) -> CliError {
    match e {
        McError::InvalidModel(_) | McError::InvalidControls(_) => CliError::Config(e.to_string()),
        _ => CliError::Domain(e.to_string()),
    }
}

fn estimate_json(est: &jump::McEstimate) -> Json {
    let scgf: Vec<Json> = est
        .scgf
        .iter()
        .map(|p| json!({"s": p.s, "lambda": p.lambda, "stderr": p.stderr, "ess": p.ess, "reliable": p.reliable}))
        .collect();
    json!({
        "mode": est.mode.to_string(),
        "n_traj": est.n_traj,
        "t_final": est.t_final,
        "mean_rate": est.mean_rate,
        "mean_rate_stderr": est.mean_rate_stderr,
        "mandel_q": est.mandel_q,
        "mandel_q_stderr": est.mandel_q_stderr,
        "scgf": scgf,
    })
}

pub fn mc(config: &RunConfig, seed: u64) -> Result<Output, CliError> {
    let model = config.model();
    let spec = &config.mc;
    let outcomes = jump::simulate(&model, &mc_controls(spec, seed)).map_err(mc_error)?;
    let est = jump::estimate(&outcomes, config.mode(), &spec.s_grid).map_err(mc_error)?;
    let mut table = Table::new(vec!["trajectory_index", "k_net", "k_flux"]);
    table.meta = vec![("seed", Cell::Text(seed.to_string())), ("t_final", spec.t_final.into())];
    for o in &outcomes {
        table.push(vec![o.index.into(), o.k_net.into(), Cell::Int(o.k_flux as i64)]);
    }
    let report = json!({"seed": seed, "estimate": estimate_json(&est)});
    Ok(Output::Split { table, report })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Reference,
    Pass,
    Fail,
    Expected,
    Skipped,
    Unreliable,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Reference => "reference",
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Expected => "expected",
            Status::Skipped => "skipped",
            Status::Unreliable => "unreliable",
        }
    }
}

struct Check {
    method: &'static str,
    quantity: &'static str,
    s: f64,
    value: Option<f64>,
    reference: Option<f64>,
    tolerance: Option<f64>,
    status: Status,
    detail: String,
}

impl Check {
    fn compare(
        method: &'static str,
        quantity: &'static str,
        s: f64,
        value: f64,
        reference: f64,
        tolerance: f64,
    ) -> Self {
        let status = if (value - reference).abs() <= tolerance { Status::Pass } else { Status::Fail };
        Check {
            method,
            quantity,
            s,
            value: Some(value),
            reference: Some(reference),
            tolerance: Some(tolerance),
            status,
            detail: String::new(),
        }
    }

    fn bare(method: &'static str, quantity: &'static str, s: f64, status: Status, detail: String) -> Self {
        Check { method, quantity, s, value: None, reference: None, tolerance: None, status, detail }
    }
}

fn verify_point(model: &SystemModel, mode: CountingMode, s: f64, config: &RunConfig) -> Vec<Check> {
    let spec = &config.verify;
    let mut checks = Vec::new();
    let closed = analytic::theta(model, mode, s);
    let reference = match &closed {
        Ok(r) => {
            let mut c = Check::bare("closed_form", "theta", s, Status::Reference, String::new());
            c.value = Some(r.theta);
            checks.push(c);
            Some(r.theta)
        }
        Err(e @ LdfError::OutOfDomain { .. }) => {
            checks.push(Check::bare("closed_form", "theta", s, Status::Expected, e.to_string()));
            None
        }
        Err(e) => {
            checks.push(Check::bare("closed_form", "theta", s, Status::Fail, e.to_string()));
            return checks;
        }
    };

    let moment = moments::theta_estimate(model, mode, s, &IntegrationControls::default());
    checks.push(match (moment, reference) {
        (Ok(est), Some(r)) => {
            Check::compare("moment_ode", "theta", s, est.theta, r, spec.moment_rel_tol * r.abs() + 1e-12)
        }
        (Err(e), Some(_)) => Check::bare("moment_ode", "theta", s, Status::Fail, e.to_string()),
        (Err(e), None) => Check::bare("moment_ode", "theta", s, Status::Expected, e.to_string()),
        (Ok(est), None) => {
            let mut c = Check::bare("moment_ode", "theta", s, Status::Fail, "finite slope outside the domain".into());
            c.value = Some(est.theta);
            c
        }
    });

    if !model.drive().is_stationary(model.omega()) {
        checks.push(Check::bare("fock_oracle", "theta", s, Status::Skipped, "periodic drive".into()));
        return checks;
    }
    let oracle = fock::converge_cutoff(model, mode, s, 0.01 * spec.fock_abs_tol, spec.cutoff_start, spec.cutoff_max);
    checks.push(match (oracle, reference) {
        (Ok(scan), Some(r)) => {
            let mut c = Check::compare("fock_oracle", "theta", s, scan.result.theta, r, spec.fock_abs_tol);
            c.detail = format!("cutoff {}", scan.result.cutoff_used);
            c
        }
        (Err(e), Some(_)) => Check::bare("fock_oracle", "theta", s, Status::Fail, e.to_string()),
        (Err(e @ FockError::CutoffExceeded { .. }), None) => {
            Check::bare("fock_oracle", "theta", s, Status::Expected, e.to_string())
        }
        (Err(e), None) => Check::bare("fock_oracle", "theta", s, Status::Fail, e.to_string()),
        (Ok(scan), None) => {
            let mut c = Check::bare("fock_oracle", "theta", s, Status::Fail, "converged outside the domain".into());
            c.value = Some(scan.result.theta);
            c
        }
    });
    checks
}

fn verify_mc(model: &SystemModel, mode: CountingMode, spec: &McSpec, sigmas: f64, seed: u64) -> Vec<Check> {
    let outcomes = match jump::simulate(model, &mc_controls(spec, seed)).and_then(|o| {
        let est = jump::estimate(&o, mode, &spec.s_grid)?;
        Ok(est)
    }) {
        Ok(est) => est,
        Err(e) => return vec![Check::bare("jump_mc", "mean_rate", 0.0, Status::Fail, e.to_string())],
    };
    let est = outcomes;
    let mut checks = Vec::new();
    match analytic::activity(model, mode) {
        Ok(k) => {
            checks.push(Check::compare("jump_mc", "mean_rate", 0.0, est.mean_rate, k, sigmas * est.mean_rate_stderr))
        }
        Err(e) => checks.push(Check::bare("jump_mc", "mean_rate", 0.0, Status::Fail, e.to_string())),
    }
    if let (Some(q), Some(err), Ok(exact)) = (est.mandel_q, est.mandel_q_stderr, analytic::mandel_q(model, mode)) {
        checks.push(Check::compare("jump_mc", "mandel_q", 0.0, q, exact, sigmas * err));
    }
    for p in &est.scgf {
        match analytic::theta(model, mode, p.s) {
            Ok(r) if p.reliable => {
                checks.push(Check::compare("jump_mc", "scgf", p.s, p.lambda, r.theta, sigmas * p.stderr))
            }
            Ok(_) => {
                let mut c = Check::bare("jump_mc", "scgf", p.s, Status::Unreliable, format!("ess {:.1}", p.ess));
                c.value = Some(p.lambda);
                checks.push(c);
            }
            Err(e) => checks.push(Check::bare("jump_mc", "scgf", p.s, Status::Expected, e.to_string())),
        }
    }
    checks
}

/// Cross-checks closed form, moment ODE, Fock oracle and, optionally, jump
/// Monte Carlo. Returns the report and whether every check passed.
pub fn verify(config: &RunConfig, seed: u64) -> Result<(Output, bool), CliError> {
    let model = config.model();
    let mode = config.mode();
    let spec = &config.verify;
    let grid = match &spec.s_grid {
        Some(g) => g.clone(),
        None => {
            let bi = analytic::branch_points(&model, mode).map_err(ldf_error)?;
            if !bi.is_bounded() {
                return Err(CliError::Config("unbounded branch interval: set verify.s_grid".into()));
            }
            bi.central_grid(spec.fraction, spec.points)
        }
    };
    let mut checks: Vec<Check> = grid
        .par_iter()
        .map(|&s| verify_point(&model, mode, s, config))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    if let Some(mc) = &spec.mc {
        checks.extend(verify_mc(&model, mode, mc, spec.mc_sigmas, seed));
    }
    let passed = checks.iter().all(|c| c.status != Status::Fail);
    let mut table =
        Table::new(vec!["method", "quantity", "s", "value", "reference", "deviation", "tolerance", "status", "detail"]);
    table.meta = vec![("mode", mode.to_string().into()), ("passed", passed.into())];
    for c in checks {
        let deviation = c.value.zip(c.reference).map(|(v, r)| v - r);
        table.push(vec![
            c.method.into(),
            c.quantity.into(),
            c.s.into(),
            c.value.into(),
            c.reference.into(),
            deviation.into(),
            c.tolerance.into(),
            c.status.label().into(),
            c.detail.into(),
        ]);
    }
    Ok((Output::Table(table), passed))
}
