//! Physical model: oscillator, bath channels, drive and counting mode.

use std::fmt;

use thiserror::Error;

use crate::jet::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("rate {name} = {value} must be finite and non-negative")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("occupation n = {0} must be finite and non-negative")]
    NegativeOccupation(f64),
    #[error("oscillator frequency omega = {0} must be finite and positive")]
    InvalidFrequency(f64),
    #[error("a model needs at least one bath")]
    NoBaths,
    #[error("drive amplitude {0} must be finite and non-negative")]
    InvalidDrive(f64),
    #[error("bath index {index} out of range for {count} baths")]
    BathIndex { index: usize, count: usize },
}

/// One dissipative channel: rate Γ of quanta lost to the bath and rate Γ̄ of
/// quanta absorbed from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathChannel {
    gamma_to: f64,
    gamma_from: f64,
}

impl BathChannel {
    pub fn new(gamma_to: f64, gamma_from: f64) -> Result<Self, ModelError> {
        check_rate("gamma_to", gamma_to)?;
        check_rate("gamma_from", gamma_from)?;
        Ok(BathChannel { gamma_to, gamma_from })
    }

    /// Thermal bath with coupling γ and mean occupation n:
    /// Γ = γ(n+1)/2, Γ̄ = γn/2.
    pub fn thermal(gamma: f64, n: f64) -> Result<Self, ModelError> {
        check_rate("gamma", gamma)?;
        if !(n.is_finite() && n >= 0.0) {
            return Err(ModelError::NegativeOccupation(n));
        }
        Ok(BathChannel { gamma_to: gamma * (n + 1.0) / 2.0, gamma_from: gamma * n / 2.0 })
    }

    pub fn gamma_to(&self) -> f64 {
        self.gamma_to
    }

    pub fn gamma_from(&self) -> f64 {
        self.gamma_from
    }
}

/// Shorthand for [`BathChannel::thermal`].
pub fn thermal_channel(gamma: f64, n: f64) -> Result<BathChannel, ModelError> {
    BathChannel::thermal(gamma, n)
}

fn check_rate(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::NegativeRate { name, value })
    }
}

/// Bose occupation n(T) = 1/(e^{ω/T} − 1), with n(0) = 0.
pub fn occupation_from_temperature(temperature: f64, omega: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (omega / temperature).exp_m1()
}

/// Coherent driving term F(t)(a† + a) in the conventions of the moment
/// equations. The Lindblad-level Hamiltonian term is `2ωF(t)(a† + a)`, see
/// [`SystemModel::hamiltonian_drive`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DriveSpec {
    #[default]
    None,
    Constant {
        amplitude: f64,
    },
    /// F(t) = F cos((ω + δ) t).
    Periodic {
        amplitude: f64,
        detuning: f64,
    },
}

impl DriveSpec {
    pub fn amplitude(&self) -> f64 {
        match *self {
            DriveSpec::None => 0.0,
            DriveSpec::Constant { amplitude } | DriveSpec::Periodic { amplitude, .. } => amplitude,
        }
    }

    /// F(t) for an oscillator of frequency `omega`.
    pub fn force(&self, omega: f64, t: f64) -> f64 {
        match *self {
            DriveSpec::None => 0.0,
            DriveSpec::Constant { amplitude } => amplitude,
            DriveSpec::Periodic { amplitude, detuning } => amplitude * ((omega + detuning) * t).cos(),
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> DriveSpec {
        match *self {
            DriveSpec::None => DriveSpec::None,
            DriveSpec::Constant { .. } => DriveSpec::Constant { amplitude },
            DriveSpec::Periodic { detuning, .. } => DriveSpec::Periodic { amplitude, detuning },
        }
    }

    /// True when the generator is time independent.
    pub fn is_stationary(&self, omega: f64) -> bool {
        match *self {
            DriveSpec::Periodic { amplitude, detuning } => amplitude == 0.0 || is_zero_frequency(omega, detuning),
            _ => true,
        }
    }
}

/// A periodic drive at δ = −ω is a constant force.
pub(crate) fn is_zero_frequency(omega: f64, detuning: f64) -> bool {
    (omega + detuning).abs() <= 1e-12 * omega.abs()
}

/// What is counted on the reference bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CountingMode {
    /// Emissions into the reference bath minus absorptions from it.
    NetExchange,
    /// Emissions into the reference bath only.
    OutgoingFlux,
}

impl fmt::Display for CountingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountingMode::NetExchange => f.write_str("net"),
            CountingMode::OutgoingFlux => f.write_str("flux"),
        }
    }
}

/// Δ₊ = Σ(Γᵢ + Γ̄ᵢ) and Δ₋ = Σ(Γᵢ − Γ̄ᵢ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub delta_plus: f64,
    pub delta_minus: f64,
}

/// Harmonic oscillator of frequency ω coupled to an ordered list of baths.
/// `baths[0]` is the reference bath on which quanta are counted.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    omega: f64,
    baths: Vec<BathChannel>,
    drive: DriveSpec,
}

impl SystemModel {
    pub fn new(omega: f64, baths: Vec<BathChannel>, drive: DriveSpec) -> Result<Self, ModelError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(ModelError::InvalidFrequency(omega));
        }
        if baths.is_empty() {
            return Err(ModelError::NoBaths);
        }
        let amplitude = drive.amplitude();
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(ModelError::InvalidDrive(amplitude));
        }
        if let DriveSpec::Periodic { detuning, .. } = drive {
            if !detuning.is_finite() {
                return Err(ModelError::InvalidDrive(detuning));
            }
        }
        Ok(SystemModel { omega, baths, drive })
    }

    /// Undriven model built from `(γᵢ, nᵢ)` thermal pairs.
    pub fn thermal(omega: f64, baths: &[(f64, f64)]) -> Result<Self, ModelError> {
        let baths = baths.iter().map(|&(gamma, n)| BathChannel::thermal(gamma, n)).collect::<Result<Vec<_>, _>>()?;
        SystemModel::new(omega, baths, DriveSpec::None)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn baths(&self) -> &[BathChannel] {
        &self.baths
    }

    pub fn reference(&self) -> &BathChannel {
        &self.baths[0]
    }

    pub fn drive(&self) -> DriveSpec {
        self.drive
    }

    pub fn with_drive(&self, drive: DriveSpec) -> SystemModel {
        SystemModel { drive, ..self.clone() }
    }

    /// Same model with `baths[index]` moved to the reference position. The
    /// remaining baths keep their relative order.
    pub fn with_reference(&self, index: usize) -> Result<SystemModel, ModelError> {
        if index >= self.baths.len() {
            return Err(ModelError::BathIndex { index, count: self.baths.len() });
        }
        let mut baths = self.baths.clone();
        let reference = baths.remove(index);
        baths.insert(0, reference);
        Ok(SystemModel { baths, ..self.clone() })
    }

    /// Merges every non-reference bath into a single equivalent channel.
    pub fn merged_superbath(&self) -> SystemModel {
        if self.baths.len() <= 2 {
            return self.clone();
        }
        let (to, from) = self.baths[1..].iter().fold((0.0, 0.0), |(a, b), c| (a + c.gamma_to, b + c.gamma_from));
        let baths = vec![self.baths[0], BathChannel { gamma_to: to, gamma_from: from }];
        SystemModel { baths, ..self.clone() }
    }

    pub fn derived_rates(&self) -> DerivedRates {
        derived_rates(self)
    }

    /// Amplitude G(t) of the Hamiltonian term G(t)(a† + a) that reproduces
    /// the first-moment equations, G = 2ωF(t).
    pub fn hamiltonian_drive(&self, t: f64) -> f64 {
        2.0 * self.omega * self.drive.force(self.omega, t)
    }

    /// Sum of emission rates ΣΓᵢ and absorption rates ΣΓ̄ᵢ over all baths.
    pub fn total_rates(&self) -> (f64, f64) {
        self.baths.iter().fold((0.0, 0.0), |(a, b), c| (a + c.gamma_to, b + c.gamma_from))
    }

    /// Steady-state mean occupation of the undriven oscillator, ΣΓ̄ᵢ/Δ₋.
    pub fn steady_occupation(&self) -> f64 {
        let (_, absorb) = self.total_rates();
        absorb / self.derived_rates().delta_minus
    }
}

pub fn derived_rates(model: &SystemModel) -> DerivedRates {
    let (to, from) = model.total_rates();
    DerivedRates { delta_plus: to + from, delta_minus: to - from }
}

/// Tilt functions (f₊(s), f₋(s)) for the selected counting mode.
pub fn tilt_f(mode: CountingMode, reference: &BathChannel, s: f64) -> (f64, f64) {
    tilt_generic(mode, reference, s)
}

pub(crate) fn tilt_generic<T: Scalar>(mode: CountingMode, reference: &BathChannel, s: T) -> (T, T) {
    let one = T::constant(1.0);
    let emit = T::constant(reference.gamma_to) * ((-s).exp() - one);
    match mode {
        CountingMode::NetExchange => {
            let absorb = T::constant(reference.gamma_from) * (s.exp() - one);
            let half = T::constant(0.5);
            (half * (emit + absorb), half * (emit - absorb))
        }
        CountingMode::OutgoingFlux => {
            let g = emit * T::constant(0.5);
            (g, g)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Δ₋ ≤ 0: no unique steady state.
    NoSteadyState { delta_minus: f64 },
    /// Net counting needs Γ₁ ≥ Γ̄₁ on the reference bath.
    ReferenceAbsorptionDominates { gamma_to: f64, gamma_from: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSteadyState { delta_minus } => {
                write!(f, "no unique steady state: delta_minus = {delta_minus} must be positive")
            }
            Violation::ReferenceAbsorptionDominates { gamma_to, gamma_from } => write!(
                f,
                "reference bath requires gamma_to >= gamma_from for net counting (got {gamma_to} < {gamma_from})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate(model: &SystemModel, mode: CountingMode) -> ValidationReport {
    let mut violations = Vec::new();
    let rates = model.derived_rates();
    if !(rates.delta_minus > 0.0) {
        violations.push(Violation::NoSteadyState { delta_minus: rates.delta_minus });
    }
    let reference = model.reference();
    if mode == CountingMode::NetExchange && reference.gamma_to < reference.gamma_from {
        violations.push(Violation::ReferenceAbsorptionDominates {
            gamma_to: reference.gamma_to,
            gamma_from: reference.gamma_from,
        });
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1(n2: f64) -> SystemModel {
        SystemModel::thermal(1.0, &[(0.01, 10.0), (0.02, n2)]).unwrap()
    }

    #[test]
    fn fig1_rates() {
        let m = fig1(20.0);
        let b = m.baths();
        assert!((b[0].gamma_to() - 0.055).abs() < 1e-15);
        assert!((b[0].gamma_from() - 0.05).abs() < 1e-15);
        assert!((b[1].gamma_to() - 0.21).abs() < 1e-15);
        assert!((b[1].gamma_from() - 0.20).abs() < 1e-15);
        let r = m.derived_rates();
        assert!((r.delta_plus - 0.515).abs() < 1e-15);
        assert!((r.delta_minus - 0.015).abs() < 1e-15);
        assert!(validate(&m, CountingMode::NetExchange).is_valid());
    }

    #[test]
    fn degenerate_rates() {
        let sym = SystemModel::new(1.0, vec![BathChannel::new(0.3, 0.3).unwrap()], DriveSpec::None).unwrap();
        assert_eq!(sym.derived_rates().delta_minus, 0.0);
        let report = validate(&sym, CountingMode::OutgoingFlux);
        assert!(matches!(report.violations[..], [Violation::NoSteadyState { .. }]));

        let cold = SystemModel::new(1.0, vec![BathChannel::new(0.4, 0.0).unwrap()], DriveSpec::None).unwrap();
        let r = cold.derived_rates();
        assert_eq!((r.delta_plus, r.delta_minus), (0.4, 0.4));
    }

    #[test]
    fn net_counting_needs_dominant_emission() {
        let m = SystemModel::new(
            1.0,
            vec![BathChannel::new(0.1, 0.2).unwrap(), BathChannel::new(1.0, 0.0).unwrap()],
            DriveSpec::None,
        )
        .unwrap();
        let report = validate(&m, CountingMode::NetExchange);
        assert!(matches!(report.violations[..], [Violation::ReferenceAbsorptionDominates { .. }]));
        assert!(validate(&m, CountingMode::OutgoingFlux).is_valid());
    }

    #[test]
    fn tilt_examples() {
        let reference = BathChannel::new(0.055, 0.05).unwrap();
        for mode in [CountingMode::NetExchange, CountingMode::OutgoingFlux] {
            assert_eq!(tilt_f(mode, &reference, 0.0), (0.0, 0.0));
        }
        // Frozen from an independent 50-digit evaluation (mpmath).
        let (fp, fm) = tilt_f(CountingMode::NetExchange, &reference, 0.1);
        assert!((fp - 1.2301947880078882e-5).abs() < 1e-18);
        assert!((fm - (-5.246243955902302e-3)).abs() < 1e-17);

        let unit = BathChannel::new(1.0, 0.3).unwrap();
        let (fp, fm) = tilt_f(CountingMode::OutgoingFlux, &unit, 2f64.ln());
        assert!((fp + 0.25).abs() < 1e-15 && (fm + 0.25).abs() < 1e-15);
    }

    #[test]
    fn thermal_examples() {
        let c = thermal_channel(0.01, 10.0).unwrap();
        assert!((c.gamma_to() - 0.055).abs() < 1e-16 && (c.gamma_from() - 0.05).abs() < 1e-16);
        assert_eq!(thermal_channel(0.3, 0.0).unwrap(), BathChannel::new(0.15, 0.0).unwrap());
        assert_eq!(thermal_channel(0.0, 4.0).unwrap(), BathChannel::new(0.0, 0.0).unwrap());
        assert!(thermal_channel(-1.0, 1.0).is_err());
        assert!(thermal_channel(1.0, -1.0).is_err());
    }

    #[test]
    fn occupation_examples() {
        assert_eq!(occupation_from_temperature(0.0, 1.0), 0.0);
        let n = occupation_from_temperature(1.0 / 2f64.ln(), 1.0);
        assert!((n - 1.0).abs() < 1e-14);
        for t in [50.0, 100.0, 1e3, 1e5] {
            let n = occupation_from_temperature(t, 1.0);
            assert!((n - t).abs() / t < 0.01);
        }
    }

    #[test]
    fn reference_reordering_and_superbath() {
        let m = SystemModel::thermal(1.0, &[(0.01, 1.0), (0.02, 2.0), (0.03, 3.0)]).unwrap();
        let r = m.with_reference(2).unwrap();
        assert_eq!(r.reference(), &m.baths()[2]);
        assert_eq!(r.baths()[1], m.baths()[0]);
        assert_eq!(r.baths()[2], m.baths()[1]);
        assert!(m.with_reference(3).is_err());
        let merged = m.merged_superbath();
        assert_eq!(merged.baths().len(), 2);
        let (a, b) = (merged.derived_rates(), m.derived_rates());
        assert!((a.delta_plus - b.delta_plus).abs() < 1e-15);
        assert!((a.delta_minus - b.delta_minus).abs() < 1e-15);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert_eq!(SystemModel::new(1.0, vec![], DriveSpec::None), Err(ModelError::NoBaths));
        let c = BathChannel::new(1.0, 0.0).unwrap();
        assert!(SystemModel::new(0.0, vec![c], DriveSpec::None).is_err());
        assert!(SystemModel::new(1.0, vec![c], DriveSpec::Constant { amplitude: -1.0 }).is_err());
        assert!(BathChannel::new(f64::NAN, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn thermal_channel_identities(gamma in 1e-4f64..10.0, n in 1e-3f64..100.0) {
            let c = thermal_channel(gamma, n).unwrap();
            prop_assert!((c.gamma_to() - c.gamma_from() - gamma / 2.0).abs() <= 1e-12 * gamma * (n + 1.0));
            prop_assert!((c.gamma_to() / c.gamma_from() - (n + 1.0) / n).abs() <= 1e-12 * (n + 1.0) / n);
            prop_assert!(c.gamma_to() >= c.gamma_from());
        }

        #[test]
        fn derived_rates_are_additive(rates in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..5),
                                      extra in (0.0f64..1.0, 0.0f64..1.0)) {
            let baths: Vec<_> = rates.iter().map(|&(a, b)| BathChannel::new(a, b).unwrap()).collect();
            let m = SystemModel::new(1.0, baths.clone(), DriveSpec::None).unwrap();
            let mut more = baths;
            more.push(BathChannel::new(extra.0, extra.1).unwrap());
            let m2 = SystemModel::new(1.0, more, DriveSpec::None).unwrap();
            let (r, r2) = (m.derived_rates(), m2.derived_rates());
            prop_assert!((r2.delta_plus - r.delta_plus - (extra.0 + extra.1)).abs() < 1e-12);
            prop_assert!((r2.delta_minus - r.delta_minus - (extra.0 - extra.1)).abs() < 1e-12);
            prop_assert!(r.delta_plus >= r.delta_minus.abs());
        }

        #[test]
        fn occupation_is_bose(t in 1e-2f64..1e3, dt in 1e-3f64..1.0) {
            let n = occupation_from_temperature(t, 1.0);
            prop_assert!((n * (1.0 / t).exp_m1() - 1.0).abs() < 1e-12);
            prop_assert!(occupation_from_temperature(t + dt, 1.0) > n);
        }
    }
}
