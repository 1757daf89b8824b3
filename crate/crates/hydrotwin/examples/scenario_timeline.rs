//! A scenario timeline: the loop runs at fixed setpoints, a fault appears,
//! the twin detects and absorbs it, the loop is repaired (reset to
//! nominal), and the twin tracks back. Prints the per-step story and the
//! campaign metrics.
//!
//! ```bash
//! cargo run --release -p hydrotwin --example scenario_timeline
//! ```

use hydrotwin::dataset::{self, SamplingPlan, FAULT_CLASS_COUNT};
use hydrotwin::fddcore::{EstimatorSet, FddOutcome, ThresholdVector, TwinState};
use hydrotwin::hydronet::{ComponentVector, ControlVector, LoopConfig};
use hydrotwin::mlkit::{DecisionTreeModel, SvrModel, SvrParams};
use hydrotwin::scenario::{run_scenario, FaultEvent, FaultValue, ScenarioSpec};

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

    let spec = ScenarioSpec {
        setpoints: vec![(0, ControlVector::new(60.0, 70.0))],
        events: vec![
            FaultEvent {
                step: 3,
                parameter_index: 2,
                value: FaultValue::Multiplier(1.33),
            },
            FaultEvent {
                step: 10,
                parameter_index: 4,
                value: FaultValue::Multiplier(0.87),
            },
        ],
        resets: vec![7, 14],
        noise_percent: 0.0,
        seed: 21,
        max_steps: 18,
    };
    println!("timeline:");
    print!("{}", spec.to_kv_string());
    println!();

    let result = run_scenario(&spec, &mut twin, ComponentVector::NOMINAL).unwrap();
    println!(
        "{:>4} {:>10} {:>10} {:>18} {:>10}",
        "step", "fl m3/h", "p2 bar", "outcome", "committed"
    );
    for s in &result.steps {
        let outcome = match s.report.outcome {
            FddOutcome::NoFault => "-",
            FddOutcome::Converged => "Converged",
            FddOutcome::FailedToConverge => "Failed",
        };
        let committed = match s.report.committed {
            Some((class, value)) => format!("c{class}={value:.3}"),
            None => String::new(),
        };
        println!(
            "{:>4} {:>10.4} {:>10.4} {:>18} {:>10}",
            s.step, s.measured.flow, s.measured.p2, outcome, committed
        );
    }

    let m = &result.metrics;
    println!();
    println!(
        "events injected {}, converged {}, convergence rate {:.0}%, false triggers {}",
        m.events_injected,
        m.events_converged,
        100.0 * m.convergence_rate,
        m.false_triggers
    );
    let latency: Vec<String> = m
        .detection_latency
        .iter()
        .map(|l| l.map_or("-".into(), |v| v.to_string()))
        .collect();
    println!("detection latency per event: {} steps", latency.join(", "));
    println!(
        "twin component vector at the end: loss3 = {:.4}, tank = {:.4}",
        twin.theta.loss3, twin.theta.tank_pressure
    );
}
