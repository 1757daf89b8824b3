//! Simulated physical twin and evaluation campaigns.
//!
//! The "physical" side here is the same loop solver with a hidden component
//! vector plus optional Gaussian sensor noise — the monitoring stack never
//! sees the hidden parameters, only the measured process vector. Scenario
//! timelines inject single faults, optionally reset the loop to nominal,
//! and drive the FDD loop step by step; campaign helpers batch independent
//! injections and compute the localization/estimation metrics.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::{format_full, ConfigError, KvFile};
use crate::dataset::{SampleRecord, FAULT_CLASS_COUNT};
use crate::fddcore::{run_fdd, FddOutcome, FddReport, TwinState};
use crate::hydronet::{
    simulate, ComponentVector, ControlVector, LoopConfig, ProcessVector, SolveError,
    COMPONENT_COUNT,
};
use crate::mlkit::{features_from, DecisionTreeModel};

/// Per-channel noise scales: "percent" noise means this fraction of 1 bar
/// on pressures and of the nominal rated flow on the flow channel.
pub fn noise_channel_scales() -> [f64; 5] {
    [1.0, 1.0, 1.0, 1.0, ComponentVector::NOMINAL.rated_flow]
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("step {step}: new fault event while event at step {pending_step} is unresolved")]
    ScheduleViolation { step: usize, pending_step: usize },
    #[error("scenario spec: {0}")]
    InvalidSpec(String),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("step {step}: physical twin simulation failed: {source}")]
    Solve {
        step: usize,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// The monitored system: hidden true component vector plus sensor noise.
#[derive(Debug, Clone)]
pub struct PhysicalTwin {
    theta: ComponentVector,
    cfg: LoopConfig,
    noise_percent: f64,
    rng: ChaCha8Rng,
}

impl PhysicalTwin {
    pub fn new(theta: ComponentVector, cfg: LoopConfig, noise_percent: f64, seed: u64) -> Self {
        Self {
            theta,
            cfg,
            noise_percent,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The hidden truth; evaluation harnesses need it, the FDD loop must
    /// never see it.
    pub fn theta(&self) -> &ComponentVector {
        &self.theta
    }

    pub fn set_component(&mut self, index: usize, value: f64) {
        self.theta = self.theta.with_component(index, value);
    }

    pub fn reset_to(&mut self, theta: ComponentVector) {
        self.theta = theta;
    }

    /// One measurement: steady state at the setpoints plus per-channel
    /// Gaussian noise. Deterministic for a fixed seed.
    pub fn measure(&mut self, u: &ControlVector) -> Result<ProcessVector, SolveError> {
        let clean = simulate(u, &self.theta, &self.cfg)?;
        if self.noise_percent == 0.0 {
            return Ok(clean);
        }
        let scales = noise_channel_scales();
        let mut values = clean.as_array();
        for (v, scale) in values.iter_mut().zip(&scales) {
            let sigma = self.noise_percent / 100.0 * scale;
            let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
            *v += normal.sample(&mut self.rng);
        }
        Ok(ProcessVector {
            p1: values[0],
            p2: values[1],
            p3: values[2],
            p4: values[3],
            flow: values[4],
        })
    }
}

/// A single-parameter fault applied to the physical twin at a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEvent {
    pub step: usize,
    /// Component index 1..=6.
    pub parameter_index: usize,
    pub value: FaultValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultValue {
    /// New value in the component's native unit.
    Absolute(f64),
    /// Multiplier on the nominal value.
    Multiplier(f64),
}

impl FaultEvent {
    pub fn resolved_value(&self, nominal: &ComponentVector) -> f64 {
        match self.value {
            FaultValue::Absolute(v) => v,
            FaultValue::Multiplier(m) => nominal.component(self.parameter_index) * m,
        }
    }
}

/// Timeline specification: setpoints, ordered fault events, optional
/// resets back to nominal, noise level and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// (step, setpoints); the control holds until the next entry. The first
    /// entry must be at step 0.
    pub setpoints: Vec<(usize, ControlVector)>,
    pub events: Vec<FaultEvent>,
    /// Steps at which the physical component vector returns to nominal.
    pub resets: Vec<usize>,
    /// Gaussian sensor noise stddev as percent of the channel scale; 0
    /// disables noise.
    pub noise_percent: f64,
    pub seed: u64,
    pub max_steps: usize,
}

const SCENARIO_KEYS: &[&str] = &[
    "setpoint",
    "event",
    "reset",
    "noise_percent",
    "seed",
    "max_steps",
];

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.max_steps == 0 {
            return Err(ScenarioError::InvalidSpec("max_steps must be positive".into()));
        }
        match self.setpoints.first() {
            Some((0, _)) => {}
            _ => {
                return Err(ScenarioError::InvalidSpec(
                    "first setpoint must be at step 0".into(),
                ))
            }
        }
        for pair in self.setpoints.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(ScenarioError::InvalidSpec(
                    "setpoint steps must be strictly increasing".into(),
                ));
            }
        }
        for (step, u) in &self.setpoints {
            if !u.is_valid() {
                return Err(ScenarioError::InvalidSpec(format!(
                    "setpoint at step {step} outside 0..=100"
                )));
            }
        }
        for pair in self.events.windows(2) {
            if pair[1].step <= pair[0].step {
                return Err(ScenarioError::InvalidSpec(
                    "event steps must be strictly increasing".into(),
                ));
            }
        }
        for e in &self.events {
            if !(1..=COMPONENT_COUNT).contains(&e.parameter_index) {
                return Err(ScenarioError::InvalidSpec(format!(
                    "event parameter index {} outside 1..=6",
                    e.parameter_index
                )));
            }
            if e.step >= self.max_steps {
                return Err(ScenarioError::InvalidSpec(format!(
                    "event at step {} beyond max_steps {}",
                    e.step, self.max_steps
                )));
            }
        }
        if !(self.noise_percent >= 0.0) {
            return Err(ScenarioError::InvalidSpec(format!(
                "noise_percent must be non-negative, got {}",
                self.noise_percent
            )));
        }
        Ok(())
    }

    /// Load from the shared dialect: repeated `setpoint = step,u1,u2`,
    /// `event = step,index,value` and `reset = step` lines plus scalars.
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let kv = KvFile::load(path)?;
        kv.check_known_keys(SCENARIO_KEYS).map_err(ConfigError::from)?;
        let parse_triple = |line: usize, text: &str, what: &str| -> Result<[f64; 3], ScenarioError> {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != 3 {
                return Err(ScenarioError::InvalidSpec(format!(
                    "line {line}: {what} needs step,a,b"
                )));
            }
            let mut out = [0.0; 3];
            for (slot, p) in out.iter_mut().zip(&parts) {
                *slot = p.trim().parse::<f64>().map_err(|e| {
                    ScenarioError::InvalidSpec(format!("line {line}: {what}: {e}"))
                })?;
            }
            Ok(out)
        };
        let mut setpoints = Vec::new();
        for (line, text) in kv.get_all("setpoint") {
            let [step, u1, u2] = parse_triple(line, text, "setpoint")?;
            setpoints.push((step as usize, ControlVector::new(u1, u2)));
        }
        let mut events = Vec::new();
        for (line, text) in kv.get_all("event") {
            let [step, index, value] = parse_triple(line, text, "event")?;
            events.push(FaultEvent {
                step: step as usize,
                parameter_index: index as usize,
                value: FaultValue::Absolute(value),
            });
        }
        let mut resets = Vec::new();
        for (line, text) in kv.get_all("reset") {
            let step = text.trim().parse::<usize>().map_err(|e| {
                ScenarioError::InvalidSpec(format!("line {line}: reset: {e}"))
            })?;
            resets.push(step);
        }
        let spec = Self {
            setpoints,
            events,
            resets,
            noise_percent: kv.get_f64("noise_percent")?.unwrap_or(0.0),
            seed: kv.get_u64("seed")?.unwrap_or(0),
            max_steps: kv.get_u64("max_steps")?.unwrap_or(0) as usize,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::from("# scenario timeline\n");
        for (step, u) in &self.setpoints {
            out.push_str(&format!(
                "setpoint = {},{},{}\n",
                step,
                format_full(u.pump_speed),
                format_full(u.valve_opening)
            ));
        }
        for e in &self.events {
            let value = e.resolved_value(&ComponentVector::NOMINAL);
            out.push_str(&format!(
                "event = {},{},{}\n",
                e.step,
                e.parameter_index,
                format_full(value)
            ));
        }
        for step in &self.resets {
            out.push_str(&format!("reset = {step}\n"));
        }
        out.push_str(&format!("noise_percent = {}\n", format_full(self.noise_percent)));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("max_steps = {}\n", self.max_steps));
        out
    }
}

/// One scenario step: what was commanded, what was measured, what the FDD
/// loop did.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub control: ControlVector,
    pub measured: ProcessVector,
    pub report: FddReport,
}

/// Aggregates of a scenario run.
#[derive(Debug, Clone, Default)]
pub struct ScenarioMetrics {
    pub steps: usize,
    pub events_injected: usize,
    pub events_converged: usize,
    /// Steps from each event's injection to the first trigger; None when
    /// the fault stayed under the threshold for the whole run.
    pub detection_latency: Vec<Option<usize>>,
    /// Triggers raised while the physical and model vectors agreed exactly.
    pub false_triggers: usize,
    pub convergence_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub steps: Vec<StepRecord>,
    pub metrics: ScenarioMetrics,
}

/// Drive the twin through the timeline. Fault events mutate the hidden
/// vector at their step; the single-perturbation regime requires the
/// previous event to be resolved (a converged FDD pass) or expired (a reset
/// pulled the loop back to nominal) before the next one applies.
///
/// A `reset` models a repair: the physical loop returns to nominal and the
/// monitoring side is recalibrated to match. Leaving the model copy stale
/// would break the single-perturbation regime for every later event.
pub fn run_scenario(
    spec: &ScenarioSpec,
    twin: &mut TwinState,
    initial_physical: ComponentVector,
) -> Result<ScenarioResult, ScenarioError> {
    spec.validate()?;
    let mut physical = PhysicalTwin::new(
        initial_physical,
        twin.cfg,
        spec.noise_percent,
        spec.seed,
    );
    let nominal = initial_physical;
    let mut steps = Vec::with_capacity(spec.max_steps);
    let mut metrics = ScenarioMetrics::default();

    let mut next_setpoint = 0usize;
    let mut control = spec.setpoints[0].1;
    let mut next_event = 0usize;
    let mut next_reset = 0usize;
    // (event index into metrics.detection_latency, injection step)
    let mut pending: Option<(usize, usize)> = None;

    for step in 0..spec.max_steps {
        while next_setpoint < spec.setpoints.len() && spec.setpoints[next_setpoint].0 <= step {
            control = spec.setpoints[next_setpoint].1;
            next_setpoint += 1;
        }
        while next_reset < spec.resets.len() && spec.resets[next_reset] <= step {
            if spec.resets[next_reset] == step {
                physical.reset_to(nominal);
                twin.theta = nominal;
                // An unresolved fault expires when the loop returns to
                // nominal under it.
                pending = None;
            }
            next_reset += 1;
        }
        if next_event < spec.events.len() && spec.events[next_event].step == step {
            if let Some((_, pending_step)) = pending {
                return Err(ScenarioError::ScheduleViolation { step, pending_step });
            }
            let event = &spec.events[next_event];
            physical.set_component(
                event.parameter_index,
                event.resolved_value(&ComponentVector::NOMINAL),
            );
            metrics.detection_latency.push(None);
            pending = Some((metrics.detection_latency.len() - 1, step));
            metrics.events_injected += 1;
            next_event += 1;
        }

        let theta_match = *physical.theta() == twin.theta;
        let measured = physical
            .measure(&control)
            .map_err(|source| ScenarioError::Solve { step, source })?;
        let report = run_fdd(twin, &control, &measured);

        if report.triggered {
            if let Some((event_idx, injected_at)) = pending {
                if metrics.detection_latency[event_idx].is_none() {
                    metrics.detection_latency[event_idx] = Some(step - injected_at);
                }
            } else if theta_match {
                metrics.false_triggers += 1;
            }
        }
        if report.outcome == FddOutcome::Converged && pending.is_some() {
            metrics.events_converged += 1;
            pending = None;
        }

        steps.push(StepRecord {
            step,
            control,
            measured,
            report,
        });
    }

    metrics.steps = steps.len();
    metrics.convergence_rate = if metrics.events_injected == 0 {
        1.0
    } else {
        metrics.events_converged as f64 / metrics.events_injected as f64
    };
    Ok(ScenarioResult { steps, metrics })
}

/// One independent injection of the campaign helper.
#[derive(Debug, Clone)]
pub struct InjectionOutcome {
    pub control: ControlVector,
    pub parameter_index: usize,
    pub true_value: f64,
    pub report: FddReport,
}

/// Batch of independent single-fault events: each starts from a fresh twin
/// (model at nominal), injects one fault, measures noise-free and runs one
/// FDD pass.
pub fn run_injection_campaign(
    twin_template: &TwinState,
    faults: &[(ControlVector, usize, f64)],
) -> Result<Vec<InjectionOutcome>, ScenarioError> {
    let mut outcomes = Vec::with_capacity(faults.len());
    for (i, (u, index, value)) in faults.iter().enumerate() {
        let mut twin = twin_template.clone();
        let theta_true = twin.theta.with_component(*index, *value);
        let measured = simulate(u, &theta_true, &twin.cfg)
            .map_err(|source| ScenarioError::Solve { step: i, source })?;
        let report = run_fdd(&mut twin, u, &measured);
        outcomes.push(InjectionOutcome {
            control: *u,
            parameter_index: *index,
            true_value: *value,
            report,
        });
    }
    Ok(outcomes)
}

/// Confusion and accuracy matrices in the published orientation: rows are
/// classifications, columns are truths; the accuracy matrix normalizes each
/// classification row to 100%.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationMetrics {
    pub confusion: [[usize; FAULT_CLASS_COUNT]; FAULT_CLASS_COUNT],
    pub accuracy: [[f64; FAULT_CLASS_COUNT]; FAULT_CLASS_COUNT],
    pub overall_accuracy: f64,
    pub total: usize,
}

pub const CLASS_NAMES: [&str; FAULT_CLASS_COUNT] =
    ["theta1", "theta2", "theta3", "theta4", "theta5&6"];

impl LocalizationMetrics {
    pub fn from_confusion(confusion: [[usize; FAULT_CLASS_COUNT]; FAULT_CLASS_COUNT]) -> Self {
        let mut accuracy = [[0.0; FAULT_CLASS_COUNT]; FAULT_CLASS_COUNT];
        for (row_acc, row) in accuracy.iter_mut().zip(&confusion) {
            let row_total: usize = row.iter().sum();
            if row_total > 0 {
                for (a, &c) in row_acc.iter_mut().zip(row) {
                    *a = 100.0 * c as f64 / row_total as f64;
                }
            }
        }
        let total: usize = confusion.iter().flatten().sum();
        let diagonal: usize = (0..FAULT_CLASS_COUNT).map(|i| confusion[i][i]).sum();
        Self {
            confusion,
            accuracy,
            overall_accuracy: if total > 0 {
                diagonal as f64 / total as f64
            } else {
                0.0
            },
            total,
        }
    }

    /// Column of the confusion matrix for one truth class.
    pub fn truth_column(&self, class: usize) -> [usize; FAULT_CLASS_COUNT] {
        let mut out = [0; FAULT_CLASS_COUNT];
        for (slot, row) in out.iter_mut().zip(&self.confusion) {
            *slot = row[class - 1];
        }
        out
    }

    pub fn to_display_string(&self) -> String {
        let mut out = String::new();
        out.push_str("Confusion matrix (rows = classification, columns = truth):\n");
        out.push_str(&format!("{:>10}", ""));
        for name in CLASS_NAMES {
            out.push_str(&format!("{name:>10}"));
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&format!("{:>10}", CLASS_NAMES[i]));
            for c in row {
                out.push_str(&format!("{c:>10}"));
            }
            out.push('\n');
        }
        out.push_str("Accuracy matrix (rows normalized to 100%):\n");
        out.push_str(&format!("{:>10}", ""));
        for name in CLASS_NAMES {
            out.push_str(&format!("{name:>10}"));
        }
        out.push('\n');
        for (i, row) in self.accuracy.iter().enumerate() {
            out.push_str(&format!("{:>10}", CLASS_NAMES[i]));
            for a in row {
                out.push_str(&format!("{:>9.2}%", a));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "Overall accuracy: {:.2}%\n",
            100.0 * self.overall_accuracy
        ));
        out
    }

    /// Delimited form: one `classification,truth,count,percent` row per
    /// cell.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("classification,truth,count,percent\n");
        for i in 0..FAULT_CLASS_COUNT {
            for j in 0..FAULT_CLASS_COUNT {
                out.push_str(&format!(
                    "{},{},{},{:.4}\n",
                    CLASS_NAMES[i], CLASS_NAMES[j], self.confusion[i][j], self.accuracy[i][j]
                ));
            }
        }
        out
    }
}

/// Classify every held-out record and tabulate the confusion matrix.
pub fn evaluate_localization(
    classifier: &DecisionTreeModel,
    records: &[SampleRecord],
) -> Result<LocalizationMetrics, ScenarioError> {
    if records.is_empty() {
        return Err(ScenarioError::EmptyTestSet);
    }
    let mut confusion = [[0usize; FAULT_CLASS_COUNT]; FAULT_CLASS_COUNT];
    for r in records {
        let predicted = classifier.predict(&features_from(&r.control, &r.process));
        confusion[predicted - 1][r.fault_class - 1] += 1;
    }
    Ok(LocalizationMetrics::from_confusion(confusion))
}

/// Per-class relative-error samples of the estimators, restricted to
/// correctly-localized records. For the merged pump class only records
/// whose perturbed component is the rated head count — that is the value
/// the class estimator targets.
#[derive(Debug, Clone)]
pub struct EstimationMetrics {
    /// Sorted ascending, per class (index 0 = class 1).
    pub relative_errors: [Vec<f64>; FAULT_CLASS_COUNT],
}

impl EstimationMetrics {
    pub fn median(&self, class: usize) -> Option<f64> {
        percentile(&self.relative_errors[class - 1], 0.5)
    }

    pub fn p90(&self, class: usize) -> Option<f64> {
        percentile(&self.relative_errors[class - 1], 0.9)
    }

    pub fn count(&self, class: usize) -> usize {
        self.relative_errors[class - 1].len()
    }

    /// Summary table, one row per class: `class,count,median_pct,p90_pct`.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("class,count,median_pct,p90_pct\n");
        for class in 1..=FAULT_CLASS_COUNT {
            out.push_str(&format!(
                "{},{},{:.4},{:.4}\n",
                CLASS_NAMES[class - 1],
                self.count(class),
                100.0 * self.median(class).unwrap_or(f64::NAN),
                100.0 * self.p90(class).unwrap_or(f64::NAN),
            ));
        }
        out
    }

    pub fn to_display_string(&self) -> String {
        let mut out = String::from("Estimation error on correctly-localized records:\n");
        out.push_str(&format!(
            "{:>10}{:>8}{:>12}{:>12}\n",
            "class", "count", "median", "p90"
        ));
        for class in 1..=FAULT_CLASS_COUNT {
            out.push_str(&format!(
                "{:>10}{:>8}{:>11.3}%{:>11.3}%\n",
                CLASS_NAMES[class - 1],
                self.count(class),
                100.0 * self.median(class).unwrap_or(f64::NAN),
                100.0 * self.p90(class).unwrap_or(f64::NAN),
            ));
        }
        out
    }
}

fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let idx = ((sorted.len() as f64 * q) as usize).min(sorted.len() - 1);
    Some(sorted[idx])
}

/// Run every held-out record through localize-then-estimate and collect
/// |estimate − truth|/truth for the correctly-localized ones.
pub fn evaluate_estimation(
    estimators: &crate::fddcore::EstimatorSet,
    classifier: &DecisionTreeModel,
    records: &[SampleRecord],
) -> Result<EstimationMetrics, ScenarioError> {
    if records.is_empty() {
        return Err(ScenarioError::EmptyTestSet);
    }
    let mut errors: [Vec<f64>; FAULT_CLASS_COUNT] = Default::default();
    for r in records {
        let predicted = classifier.predict(&features_from(&r.control, &r.process));
        if predicted != r.fault_class {
            continue;
        }
        if r.fault_class == FAULT_CLASS_COUNT && r.perturbed_index != 5 {
            continue;
        }
        if let Ok(est) = crate::fddcore::estimate(estimators, &r.control, &r.process, predicted) {
            errors[r.fault_class - 1].push((est.value - r.true_value).abs() / r.true_value);
        }
    }
    for list in &mut errors {
        list.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    }
    Ok(EstimationMetrics {
        relative_errors: errors,
    })
}
