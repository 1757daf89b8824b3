//! The full offline pipeline on the desk-scale database: generate, split,
//! train the localization tree and the five per-class estimators, then
//! print the confusion/accuracy matrices and the estimation-error table.
//!
//! Takes a couple of minutes in release mode; most of it is the five SVR
//! fits.
//!
//! ```bash
//! cargo run --release -p hydrotwin --example train_and_evaluate
//! ```

use std::time::Instant;

use hydrotwin::dataset::{self, SamplingPlan, FAULT_CLASS_COUNT};
use hydrotwin::fddcore::EstimatorSet;
use hydrotwin::hydronet::{ComponentVector, LoopConfig};
use hydrotwin::mlkit::{
    DecisionTreeModel, SvrModel, SvrParams, DEFAULT_MAX_DEPTH, DEFAULT_MIN_SAMPLES_LEAF,
};
use hydrotwin::scenario::{evaluate_estimation, evaluate_localization};

fn main() {
    let plan = SamplingPlan::default();
    let cfg = LoopConfig::default();
    let t0 = Instant::now();
    let outcome = dataset::generate(&plan, &ComponentVector::NOMINAL, &cfg).unwrap();
    let (train, test) = dataset::split(&outcome.records, 0.8, plan.seed).unwrap();
    println!(
        "database: {} records, split {} train / {} test ({:?})",
        outcome.records.len(),
        train.len(),
        test.len(),
        t0.elapsed()
    );

    let t1 = Instant::now();
    let (rows, labels) = dataset::classifier_rows(&train);
    let tree =
        DecisionTreeModel::fit(&rows, &labels, DEFAULT_MAX_DEPTH, DEFAULT_MIN_SAMPLES_LEAF)
            .unwrap();
    println!(
        "classifier: {} nodes, depth {}, fitted in {:?}",
        tree.node_count(),
        tree.depth(),
        t1.elapsed()
    );

    let mut estimators = EstimatorSet::new();
    for class in 1..=FAULT_CLASS_COUNT {
        let t = Instant::now();
        let (crows, ctargets) = dataset::estimator_rows(&train, class);
        let model = SvrModel::fit(&crows, &ctargets, &SvrParams::default()).unwrap();
        println!(
            "estimator {class}: {} rows, {} support vectors, {} sweeps, {:?}",
            crows.len(),
            model.support_vector_count(),
            model.sweeps_used(),
            t.elapsed()
        );
        estimators.set(class, model);
    }

    println!();
    let localization = evaluate_localization(&tree, &test).unwrap();
    print!("{}", localization.to_display_string());
    println!();
    let estimation = evaluate_estimation(&estimators, &tree, &test).unwrap();
    print!("{}", estimation.to_display_string());
    println!();
    println!("total {:?}", t0.elapsed());
}
