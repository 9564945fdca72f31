use proptest::prelude::*;
use qho_fcs::analytic;
use qho_fcs::fock::{build_generator, converge_cutoff, leading_eigenvalue};
use qho_fcs::moments::{theta_estimate, IntegrationControls};
use qho_fcs::{BathChannel, CountingMode, DriveSpec, SystemModel};

const NET: CountingMode = CountingMode::NetExchange;

fn low_occupation() -> SystemModel {
    SystemModel::thermal(1.0, &[(0.05, 0.3), (0.05, 0.8)]).unwrap()
}

#[test]
fn moment_slope_tracks_closed_form_across_the_interval() {
    let m = low_occupation();
    let bi = analytic::branch_points(&m, NET).unwrap();
    for s in bi.central_grid(0.8, 5) {
        let exact = analytic::theta(&m, NET, s).unwrap().theta;
        let est = theta_estimate(&m, NET, s, &IntegrationControls::default()).unwrap();
        assert!((est.theta - exact).abs() <= 1e-6 * exact.abs().max(1e-12), "s={s}: {} vs {exact}", est.theta);
    }
}

#[test]
fn oracle_respects_gallavotti_cohen() {
    let m = SystemModel::thermal(1.0, &[(0.04, 0.2), (0.06, 0.9)]).unwrap();
    let bi = analytic::branch_points(&m, NET).unwrap();
    let s0 = analytic::gc_midpoint(&bi).unwrap();
    let half = 0.5 * (bi.s_plus - bi.s_minus);
    for frac in [0.1, 0.3, 0.5] {
        let u = frac * half;
        let plus = converge_cutoff(&m, NET, s0 + u, 1e-10, 8, 256).unwrap().result.theta;
        let minus = converge_cutoff(&m, NET, s0 - u, 1e-10, 8, 256).unwrap().result.theta;
        assert!((plus - minus).abs() < 1e-6, "u={u}: {plus} vs {minus}");
    }
}

#[test]
fn methods_agree_under_constant_drive() {
    let m = low_occupation().with_drive(DriveSpec::Constant { amplitude: 0.05 });
    for mode in [NET, CountingMode::OutgoingFlux] {
        let bi = analytic::branch_points(&m, mode).unwrap();
        let s = if bi.s_plus.is_finite() { 0.3 * bi.s_plus } else { 0.2 };
        let exact = analytic::theta(&m, mode, s).unwrap().theta;
        let oracle = converge_cutoff(&m, mode, s, 1e-9, 8, 32).unwrap().result.theta;
        assert!((oracle - exact).abs() < 1e-7, "{mode}: {oracle} vs {exact}");
        let ode = theta_estimate(&m, mode, s, &IntegrationControls::default()).unwrap().theta;
        assert!((ode - exact).abs() <= 1e-6 * exact.abs(), "{mode}: {ode} vs {exact}");
    }
}

fn low_occupation_models() -> impl Strategy<Value = SystemModel> {
    prop::collection::vec((0.005f64..0.1, 0.0f64..1.0), 1..=3)
        .prop_map(|baths| SystemModel::thermal(1.0, &baths).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn oracle_matches_closed_form(m in low_occupation_models(), frac in -0.5f64..0.5) {
        let bi = analytic::branch_points(&m, NET).unwrap();
        prop_assume!(bi.is_bounded());
        let mid = 0.5 * (bi.s_minus + bi.s_plus);
        let s = mid + frac * (bi.s_plus - bi.s_minus);
        let exact = analytic::theta(&m, NET, s).unwrap().theta;
        let oracle = converge_cutoff(&m, NET, s, 1e-10, 8, 512).unwrap().result.theta;
        prop_assert!((oracle - exact).abs() <= 1e-7, "{} vs {}", oracle, exact);
    }

    #[test]
    fn every_method_vanishes_at_zero_bias(m in low_occupation_models(), f in 0.0f64..0.3) {
        let m = m.with_drive(DriveSpec::Constant { amplitude: f });
        for mode in [NET, CountingMode::OutgoingFlux] {
            prop_assert!(analytic::theta(&m, mode, 0.0).unwrap().theta.abs() <= 1e-12);
            let generator = build_generator(&m, mode, 0.0, 8).unwrap();
            prop_assert!(leading_eigenvalue(&generator, 1e-12).unwrap().theta.abs() <= 1e-12);
        }
    }
}

#[test]
fn reference_choice_is_a_relabelling() {
    let m = SystemModel::new(
        1.3,
        vec![BathChannel::new(0.07, 0.02).unwrap(), BathChannel::new(0.03, 0.01).unwrap()],
        DriveSpec::None,
    )
    .unwrap();
    let swapped = m.with_reference(1).unwrap();
    let k = analytic::activity(&m, NET).unwrap();
    let k_swapped = analytic::activity(&swapped, NET).unwrap();
    assert!((k + k_swapped).abs() < 1e-14, "{k} vs {k_swapped}");
}
