use std::collections::BTreeMap;

use proptest::prelude::*;

use debye_cq::config::{preset, Scheme, SimConfig, WeightMethodName};
use debye_cq::discretization::{build_mesh, build_operators, LayoutRegion, MaterialLayout};
use debye_cq::material::{DebyePole, MaterialModel, PhysicalConstants};
use debye_cq::run::{compare_schemes, prepare};
use debye_cq::stepper::{dissipation_residual, energy, AdeStepper, CqStepper, InitialCondition, Stepper};
use debye_cq::weights::{weights_for_layout, WeightMethod};

fn small_preset(n_cells: usize, steps: usize) -> SimConfig {
    let mut c = preset("tissue-interface").unwrap();
    c.domain.n_cells = n_cells;
    c.time.n_steps = steps;
    c.outputs.comparison_path = None;
    c
}

#[test]
fn focq_tracks_ade_on_the_tissue_interface() {
    let c = small_preset(256, 1500);
    let report = compare_schemes(&c, &[Scheme::Ade, Scheme::CqFocq], 1e-6).unwrap();
    assert!(report.passed(), "relative difference {:e}", report.relative_difference());
}

#[test]
fn fft_weights_drive_the_same_trajectory() {
    let mut c = small_preset(256, 400);
    c.weights.method = WeightMethodName::Fft;
    let prep = prepare(&c).unwrap();
    let fft_tables = prep.weight_tables(401).unwrap();
    let exact = weights_for_layout(
        &prep.layout,
        &prep.materials,
        &prep.constants,
        prep.tau,
        401,
        WeightMethod::Recurrence,
    )
    .unwrap();
    let mut a = prep.build_stepper(Scheme::CqDirect, Some(&fft_tables), false).unwrap();
    let mut b = prep.build_stepper(Scheme::CqDirect, Some(&exact), false).unwrap();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for _ in 0..400 {
        a.step().unwrap();
        b.step().unwrap();
        for (x, y) in a.state().h_half.iter().zip(&b.state().h_half) {
            worst = worst.max((x - y).abs());
            peak = peak.max(y.abs());
        }
    }
    assert!(worst <= 1e-6 * peak, "{worst:e} of {peak:e}");
}

#[test]
fn cq_shadow_energy_matches_ade_energy() {
    let c = small_preset(256, 300);
    let prep = prepare(&c).unwrap();
    let mut ade = prep.build_stepper(Scheme::Ade, None, true).unwrap();
    let mut cq = prep.build_stepper(Scheme::CqDirect, None, true).unwrap();
    for _ in 0..300 {
        ade.step().unwrap();
        cq.step().unwrap();
    }
    let ea = energy(ade.state(), &prep.ops);
    let ec = energy(cq.state(), &prep.ops);
    assert!(ea.polarization_included && ec.polarization_included);
    assert!((ea.energy - ec.energy).abs() <= 1e-10 * ea.energy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_balance_holds_for_random_media(
        eps_inf in 0.0f64..10.0,
        delta in prop::collection::vec(0.1f64..100.0, 1..4),
        log_tau in prop::collection::vec(-13.0f64..-8.0, 4),
        fraction in 0.2f64..1.0,
        start in 0.1f64..0.6,
    ) {
        let poles: Vec<DebyePole> = delta.iter().zip(&log_tau).map(|(d, t)| DebyePole::new(*d, 10f64.powf(*t))).collect();
        let model = MaterialModel::new("m", eps_inf, poles).unwrap();
        let mesh = build_mesh(0.0, 1.0, 64).unwrap();
        let layout = MaterialLayout {
            regions: vec![LayoutRegion::new(0.0, start, "air"), LayoutRegion::new(start, 1.0, "m")],
        };
        let mut materials = BTreeMap::new();
        materials.insert("air".to_string(), MaterialModel::vacuum("air"));
        materials.insert("m".to_string(), model);
        let ops = build_operators(&mesh, &layout, &materials, &PhysicalConstants::default()).unwrap();
        let tau = fraction * debye_cq::discretization::cfl_bound(&ops).unwrap().tau_max;
        let ic = InitialCondition::Gaussian { amplitude: 1.0, width: 100.0, center: 0.3 };

        let mut s = AdeStepper::new(ops.clone(), tau, &ic).unwrap();
        let e0 = energy(s.state(), &ops).energy;
        let mut last = e0;
        for _ in 0..150 {
            let prev = s.state().clone();
            s.step().unwrap();
            let r = dissipation_residual(&prev, s.state(), &ops, tau).unwrap();
            prop_assert!(r.energy >= 0.0);
            prop_assert!(r.dissipation.unwrap() >= 0.0);
            prop_assert!(tau * r.residual.unwrap().abs() <= 1e-12 * e0);
            prop_assert!(r.energy <= last * (1.0 + 1e-13));
            last = r.energy;
        }

        let tables = weights_for_layout(&layout, &materials, &PhysicalConstants::default(), tau, 151, WeightMethod::Recurrence).unwrap();
        let mut cq = CqStepper::direct(ops.clone(), tau, &ic, &tables, 150, false).unwrap();
        for _ in 0..150 {
            cq.step().unwrap();
        }
        let peak = s.state().e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in s.state().e.iter().zip(&cq.state().e) {
            prop_assert!((x - y).abs() <= 1e-9 * peak.max(1e-300));
        }
    }
}
