//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": {
//!     "omega": 1.0,
//!     "baths": [{ "gamma": 0.01, "n": 10 }, { "gamma_to": 0.2, "gamma_from": 0.1 }],
//!     "drive": { "kind": "constant", "amplitude": 0.2 }
//!   },
//!   "mode": "net",
//!   "theta_sweep": { "points": 201 }
//! }
//! ```
//!
//! A bath is given either thermally (`gamma` with exactly one of `n` or
//! `temperature`) or by raw rates (`gamma_to` and `gamma_from`). Every
//! command section is optional and falls back to its defaults.

use std::path::Path;

use qho_fcs::model::occupation_from_temperature;
use qho_fcs::{BathChannel, CountingMode, DriveSpec, SystemModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub description: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub theta_sweep: SweepSpec,
    #[serde(default)]
    pub activity_scan: ActivitySpec,
    #[serde(default)]
    pub ion: IonSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub traj_dump: TrajSpec,
    #[serde(default)]
    pub generator_dump: GeneratorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Net,
    Flux,
}

impl From<ModeSpec> for CountingMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Net => CountingMode::NetExchange,
            ModeSpec::Flux => CountingMode::OutgoingFlux,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub omega: f64,
    pub baths: Vec<BathSpec>,
    #[serde(default)]
    pub drive: DriveConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub gamma: Option<f64>,
    pub n: Option<f64>,
    pub temperature: Option<f64>,
    pub gamma_to: Option<f64>,
    pub gamma_from: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriveConfig {
    #[default]
    None,
    Constant {
        amplitude: f64,
    },
    Periodic {
        amplitude: f64,
        #[serde(default)]
        detuning: f64,
    },
}

impl From<DriveConfig> for DriveSpec {
    fn from(d: DriveConfig) -> Self {
        match d {
            DriveConfig::None => DriveSpec::None,
            DriveConfig::Constant { amplitude } => DriveSpec::Constant { amplitude },
            DriveConfig::Periodic { amplitude, detuning } => DriveSpec::Periodic { amplitude, detuning },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub points: usize,
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { points: 201, s_min: None, s_max: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActivitySpec {
    pub t1_min: f64,
    pub t1_max: f64,
    pub points: usize,
    pub ratio: f64,
}

impl Default for ActivitySpec {
    fn default() -> Self {
        ActivitySpec { t1_min: 0.01, t1_max: 1e4, points: 61, ratio: 2.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IonSpec {
    /// Explicit (Γ₁, Γ̄₁) pairs.
    pub rates: Vec<(f64, f64)>,
    /// Cartesian product grid, appended after `rates`.
    pub gamma_to: Vec<f64>,
    pub gamma_from: Vec<f64>,
    pub amplitude: f64,
    pub detuning: f64,
}

impl Default for IonSpec {
    fn default() -> Self {
        IonSpec { rates: Vec::new(), gamma_to: Vec::new(), gamma_from: Vec::new(), amplitude: 10.0, detuning: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub s_grid: Option<Vec<f64>>,
    pub points: usize,
    pub fraction: f64,
    pub moment_rel_tol: f64,
    pub fock_abs_tol: f64,
    pub cutoff_start: usize,
    pub cutoff_max: usize,
    pub mc: Option<McSpec>,
    pub mc_sigmas: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            s_grid: None,
            points: 9,
            fraction: 0.8,
            moment_rel_tol: 1e-6,
            fock_abs_tol: 1e-7,
            cutoff_start: 8,
            cutoff_max: 128,
            mc: None,
            mc_sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialSpec {
    #[default]
    Steady,
    Vacuum,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub t_final: f64,
    pub n_traj: usize,
    pub cutoff: usize,
    pub initial: InitialSpec,
    pub leak_tolerance: f64,
    pub s_grid: Vec<f64>,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            t_final: 50.0,
            n_traj: 1000,
            cutoff: 30,
            initial: InitialSpec::Steady,
            leak_tolerance: 1e-6,
            s_grid: vec![-0.1, -0.05, 0.0, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajSpec {
    pub s: f64,
    pub t_max: Option<f64>,
    pub samples: usize,
}

impl Default for TrajSpec {
    fn default() -> Self {
        TrajSpec { s: 0.0, t_max: None, samples: 256 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSpec {
    pub s: f64,
    pub cutoff: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec { s: 0.0, cutoff: 4 }
    }
}

impl BathSpec {
    /// Thermal coupling γ and occupation n, if the bath is given thermally.
    pub fn thermal(&self, omega: f64) -> Result<Option<(f64, f64)>, CliError> {
        self.check()?;
        let Some(gamma) = self.gamma else { return Ok(None) };
        let n = match (self.n, self.temperature) {
            (Some(n), None) => n,
            (None, Some(t)) => occupation_from_temperature(t, omega),
            _ => unreachable!("checked above"),
        };
        Ok(Some((gamma, n)))
    }

    fn check(&self) -> Result<(), CliError> {
        let thermal = self.gamma.is_some() || self.n.is_some() || self.temperature.is_some();
        let raw = self.gamma_to.is_some() || self.gamma_from.is_some();
        match (thermal, raw) {
            (true, true) => Err(CliError::Config("bath mixes thermal and raw-rate fields".into())),
            (false, false) => {
                Err(CliError::Config("bath needs {gamma, n|temperature} or {gamma_to, gamma_from}".into()))
            }
            (true, false) => {
                if self.gamma.is_none() {
                    return Err(CliError::Config("thermal bath needs gamma".into()));
                }
                if self.n.is_some() == self.temperature.is_some() {
                    return Err(CliError::Config("thermal bath needs exactly one of n or temperature".into()));
                }
                Ok(())
            }
            (false, true) => {
                if self.gamma_to.is_none() || self.gamma_from.is_none() {
                    return Err(CliError::Config("raw bath needs both gamma_to and gamma_from".into()));
                }
                Ok(())
            }
        }
    }

    pub fn channel(&self, omega: f64) -> Result<BathChannel, CliError> {
        let channel = match self.thermal(omega)? {
            Some((gamma, n)) => BathChannel::thermal(gamma, n),
            None => BathChannel::new(self.gamma_to.unwrap_or(0.0), self.gamma_from.unwrap_or(0.0)),
        };
        channel.map_err(|e| CliError::Config(e.to_string()))
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<SystemModel, CliError> {
        let baths = self.baths.iter().map(|b| b.channel(self.omega)).collect::<Result<Vec<_>, _>>()?;
        SystemModel::new(self.omega, baths, self.drive.into()).map_err(|e| CliError::Config(e.to_string()))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.model.build()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> SystemModel {
        self.model.build().expect("validated on load")
    }

    pub fn mode(&self) -> CountingMode {
        self.mode.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_and_raw_baths() {
        let c = RunConfig::from_json(
            r#"{"model": {"omega": 1, "baths": [{"gamma": 0.01, "n": 10}, {"gamma_to": 0.2, "gamma_from": 0.1}]}}"#,
        )
        .unwrap();
        let m = c.model();
        assert!((m.baths()[0].gamma_to() - 0.055).abs() < 1e-15);
        assert_eq!(m.baths()[1].gamma_from(), 0.1);
        assert_eq!(c.mode(), CountingMode::NetExchange);
        assert_eq!(c.theta_sweep.points, 201);
    }

    #[test]
    fn temperature_maps_to_occupation() {
        let c =
            RunConfig::from_json(r#"{"model": {"omega": 2, "baths": [{"gamma": 0.1, "temperature": 0}]}}"#).unwrap();
        assert_eq!(c.model().baths()[0].gamma_from(), 0.0);
    }

    #[test]
    fn one_source_per_bath() {
        for bad in [
            r#"{"gamma": 0.1, "n": 1, "gamma_to": 0.2, "gamma_from": 0.1}"#,
            r#"{"gamma": 0.1}"#,
            r#"{"gamma": 0.1, "n": 1, "temperature": 2}"#,
            r#"{"gamma_to": 0.2}"#,
            r#"{}"#,
            r#"{"gamma": 0.1, "n": 1, "colour": 3}"#,
        ] {
            let text = format!(r#"{{"model": {{"omega": 1, "baths": [{bad}]}}}}"#);
            assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn drives_and_modes() {
        let c = RunConfig::from_json(
            r#"{"model": {"omega": 1, "baths": [{"gamma_to": 0.5, "gamma_from": 0}],
                "drive": {"kind": "periodic", "amplitude": 10}}, "mode": "flux"}"#,
        )
        .unwrap();
        assert_eq!(c.model().drive(), DriveSpec::Periodic { amplitude: 10.0, detuning: 0.0 });
        assert_eq!(c.mode(), CountingMode::OutgoingFlux);
        assert!(RunConfig::from_json(r#"{"model": {"omega": -1, "baths": [{"gamma": 0.1, "n": 0}]}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": {"omega": 1, "baths": []}}"#).is_err());
    }
}
