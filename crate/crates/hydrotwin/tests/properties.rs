//! Property suites over the solver and the data layer.

mod common;

use proptest::prelude::*;

use hydrotwin::dataset::{self, SampleRecord, SamplingPlan};
use hydrotwin::fddcore::{validate, ResidualVector, ThresholdVector};
use hydrotwin::hydronet::{
    network_head_loss, pump_head, simulate, solve_operating_point, ComponentVector,
    ControlVector, LoopConfig, ProcessVector,
};

fn theta_strategy() -> impl Strategy<Value = ComponentVector> {
    (
        0.5f64..=1.5,
        0.5f64..=1.5,
        0.5f64..=1.5,
        0.5f64..=1.5,
        0.5f64..=1.5,
        0.5f64..=1.5,
    )
        .prop_map(|(m1, m2, m3, m4, m5, m6)| {
            let n = ComponentVector::NOMINAL;
            ComponentVector {
                loss1: n.loss1 * m1,
                loss3: n.loss3 * m2,
                lossx: n.lossx * m3,
                tank_pressure: n.tank_pressure * m4,
                rated_head: n.rated_head * m5,
                rated_flow: n.rated_flow * m6,
            }
        })
}

fn control_strategy() -> impl Strategy<Value = ControlVector> {
    (0.0f64..=100.0, 0.0f64..=100.0).prop_map(|(u1, u2)| ControlVector::new(u1, u2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loop_closure_holds_everywhere(u in control_strategy(), theta in theta_strategy()) {
        let cfg = LoopConfig::default();
        let y = simulate(&u, &theta, &cfg).unwrap();
        let closure = y.p4
            - cfg.bar_per_meter() * cfg.k_section2 * cfg.velocity_head(y.flow)
            - theta.tank_pressure;
        prop_assert!(closure.abs() < 1e-9, "closure {closure} bar");
        prop_assert!(y.flow >= 0.0);
        prop_assert!(y.p1 >= y.p2);
        if y.flow > 0.0 {
            prop_assert!(y.p3 <= y.p1 && y.p4 <= y.p3);
        }
    }

    #[test]
    fn tank_pressure_only_shifts_the_reference(
        u in control_strategy(),
        theta in theta_strategy(),
        delta in -1.0f64..=1.5,
    ) {
        let cfg = LoopConfig::default();
        let shifted = theta.with_component(4, theta.tank_pressure + delta);
        let base = simulate(&u, &theta, &cfg).unwrap();
        let moved = simulate(&u, &shifted, &cfg).unwrap();
        prop_assert_eq!(base.flow, moved.flow);
        let a = base.as_array();
        let b = moved.as_array();
        for k in 0..4 {
            prop_assert!(((b[k] - a[k]) - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_is_monotone_in_both_setpoints(
        theta in theta_strategy(),
        u1 in 5.0f64..=95.0,
        u2 in 5.0f64..=95.0,
    ) {
        let cfg = LoopConfig::default();
        let q = solve_operating_point(&ControlVector::new(u1, u2), &theta, &cfg).unwrap();
        let q_faster =
            solve_operating_point(&ControlVector::new(u1 + 5.0, u2), &theta, &cfg).unwrap();
        let q_wider =
            solve_operating_point(&ControlVector::new(u1, u2 + 5.0), &theta, &cfg).unwrap();
        prop_assert!(q_faster >= q, "speed up lowered the flow: {q} -> {q_faster}");
        prop_assert!(q_wider >= q, "opening the valve lowered the flow: {q} -> {q_wider}");
    }

    #[test]
    fn head_balance_residual_is_strictly_decreasing(
        u in control_strategy(),
        theta in theta_strategy(),
    ) {
        prop_assume!(u.pump_speed > 1.0);
        let cfg = LoopConfig::default();
        let s = u.pump_speed / 100.0;
        let q_hi = theta.rated_flow * s * (cfg.pump_c0 / cfg.pump_c2).sqrt();
        let mut last = f64::INFINITY;
        for i in 0..=100 {
            let q = q_hi * i as f64 / 100.0;
            let r = pump_head(q, s, &theta, &cfg)
                - network_head_loss(q, u.valve_opening, &theta, &cfg);
            prop_assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn solver_agrees_with_dense_scan_oracle(
        u in control_strategy(),
        theta in theta_strategy(),
    ) {
        prop_assume!(u.pump_speed > 2.0);
        let cfg = LoopConfig::default();
        let q = solve_operating_point(&u, &theta, &cfg).unwrap();
        let oracle = common::oracle_operating_point(&u, &theta, &cfg);
        prop_assert!((q - oracle).abs() < 1e-4, "{q} vs oracle {oracle}");
    }
}

proptest! {
    // The oracle scan is expensive; fewer cases keep the suite quick.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn validation_pass_implies_no_retrigger(
        u in control_strategy(),
        theta in theta_strategy(),
    ) {
        // With the default thresholds (validation at or under detection),
        // any measurement accepted by validation cannot re-trigger
        // detection against the same candidate.
        let cfg = LoopConfig::default();
        let y = simulate(&u, &theta, &cfg).unwrap();
        let v = validate(&y, &theta, &u, &cfg, &ThresholdVector::VALIDATION_DEFAULT);
        prop_assert!(v.passed);
        let residuals = v.residuals.unwrap();
        prop_assert!(!residuals.any_above(&ThresholdVector::DETECTION_DEFAULT));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip_is_bitwise(records in proptest::collection::vec(record_strategy(), 1..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        dataset::save(&records, &path).unwrap();
        let back = dataset::load(&path).unwrap();
        prop_assert_eq!(records, back);
    }

    #[test]
    fn split_is_deterministic_and_partitions(records_seed in 0u64..1000) {
        let plan = SamplingPlan {
            u1_grid: vec![30.0, 60.0, 90.0],
            u2_grid: vec![20.0, 80.0],
            multipliers: vec![0.7, 1.3],
            dead_band: 0.09,
            seed: records_seed,
        };
        let out = dataset::generate(&plan, &ComponentVector::NOMINAL, &LoopConfig::default())
            .unwrap();
        let (a_train, a_test) = dataset::split(&out.records, 0.75, records_seed).unwrap();
        let (b_train, b_test) = dataset::split(&out.records, 0.75, records_seed).unwrap();
        prop_assert_eq!(&a_train, &b_train);
        prop_assert_eq!(&a_test, &b_test);
        prop_assert_eq!(a_train.len() + a_test.len(), out.records.len());
    }
}

fn record_strategy() -> impl Strategy<Value = SampleRecord> {
    (
        control_strategy(),
        (0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0, 0.0f64..40.0),
        1usize..=6,
        0.01f64..400.0,
    )
        .prop_map(|(control, (p1, p2, p3, p4, flow), index, value)| SampleRecord {
            control,
            process: ProcessVector {
                p1,
                p2,
                p3,
                p4,
                flow,
            },
            fault_class: dataset::fault_class_for(index),
            perturbed_index: index,
            true_value: value,
        })
}

#[test]
fn residual_vector_is_componentwise_absolute() {
    let a = ProcessVector {
        p1: 5.0,
        p2: 2.0,
        p3: 3.0,
        p4: 3.1,
        flow: 15.0,
    };
    let b = ProcessVector {
        p1: 4.9,
        p2: 2.2,
        p3: 3.0,
        p4: 3.4,
        flow: 14.0,
    };
    let r = ResidualVector::between(&a, &b);
    for (got, want) in r.0.iter().zip([0.1, 0.2, 0.0, 0.3, 1.0]) {
        assert!((got - want).abs() < 1e-12);
        assert!(*got >= 0.0);
    }
}
