//! One monitoring event end to end: inject a single component fault into
//! the "physical" loop, feed the measurement to the twin, and print the
//! full detect / localize / estimate / validate trace.
//!
//! Uses a mid-size training plan so the whole example runs in seconds.
//!
//! ```bash
//! cargo run --release -p hydrotwin --example detect_and_diagnose
//! ```

use hydrotwin::dataset::{self, SamplingPlan, FAULT_CLASS_COUNT};
use hydrotwin::fddcore::{run_fdd, EstimatorSet, ThresholdVector, TwinState};
use hydrotwin::hydronet::{simulate, ComponentVector, ControlVector, LoopConfig};
use hydrotwin::mlkit::{DecisionTreeModel, SvrModel, SvrParams};

fn quick_twin(cfg: LoopConfig) -> TwinState {
    let plan = SamplingPlan {
        u1_grid: vec![40.0, 50.0, 60.0, 70.0, 80.0],
        u2_grid: vec![30.0, 50.0, 70.0, 90.0],
        multipliers: vec![
            0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 1.4,
        ],
        dead_band: 0.09,
        seed: 3,
    };
    let out = dataset::generate(&plan, &ComponentVector::NOMINAL, &cfg).unwrap();
    let (rows, labels) = dataset::classifier_rows(&out.records);
    let tree = DecisionTreeModel::fit(&rows, &labels, 100, 1).unwrap();
    let mut estimators = EstimatorSet::new();
    for class in 1..=FAULT_CLASS_COUNT {
        let (crows, ctargets) = dataset::estimator_rows(&out.records, class);
        estimators.set(
            class,
            SvrModel::fit(&crows, &ctargets, &SvrParams::default()).unwrap(),
        );
    }
    TwinState::new(
        ComponentVector::NOMINAL,
        cfg,
        tree,
        estimators,
        ThresholdVector::DETECTION_DEFAULT,
        ThresholdVector::VALIDATION_DEFAULT,
    )
    .unwrap()
}

fn main() {
    let cfg = LoopConfig::default();
    println!("training the twin's models on a mid-size database...");
    let mut twin = quick_twin(cfg);
    let u = ControlVector::new(60.0, 70.0);

    // Healthy loop first: the twin agrees with the measurement, nothing
    // triggers.
    let healthy = simulate(&u, &ComponentVector::NOMINAL, &cfg).unwrap();
    let report = run_fdd(&mut twin, &u, &healthy);
    println!();
    println!("healthy measurement:");
    print!("{}", report.to_text());

    // Now the exchanger fouls: its loss coefficient jumps 30%.
    let truth = ComponentVector::NOMINAL.with_component(3, 10.35 * 1.33);
    let measured = simulate(&u, &truth, &cfg).unwrap();
    println!();
    println!(
        "exchanger loss drifts to {:.3} (nominal 10.35); the twin still assumes nominal:",
        truth.lossx
    );
    let report = run_fdd(&mut twin, &u, &measured);
    print!("{}", report.to_text());
    println!();
    match report.committed {
        Some((class, value)) => {
            let rel = (value - truth.lossx).abs() / truth.lossx;
            println!(
                "committed class {class} with value {value:.4}; true value {:.4} (error {:.2}%)",
                truth.lossx,
                100.0 * rel
            );
            println!("twin lossx after the update: {:.4}", twin.theta.lossx);
        }
        None => println!("no update committed"),
    }
}
