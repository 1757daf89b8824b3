//! The four-stage fault detection and diagnosis loop.
//!
//! Detection compares the measured process vector against the twin model's
//! simulation of the same setpoints; a componentwise residual above the
//! detection threshold starts the loop: localize the drifted component with
//! the decision tree, estimate its new value with the class's SVR, simulate
//! the candidate component vector and accept it only if the residuals drop
//! under the validation threshold. At most `max_iterations` attempts (3 by
//! default); the twin's component vector changes only on acceptance.

use std::path::Path;

use thiserror::Error;

use crate::config::{format_full, ConfigError, KvFile};
use crate::dataset::FAULT_CLASS_COUNT;
use crate::hydronet::{simulate, ComponentVector, ControlVector, LoopConfig, ProcessVector};
use crate::mlkit::{features_from, DecisionTreeModel, SvrModel};

/// Componentwise residual limits aligned with the process-vector order
/// (p1, p2, p3, p4 in bar; fl in m³/h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdVector(pub [f64; 5]);

impl ThresholdVector {
    /// Default detection threshold: 0.02 bar on each pressure, 1 m³/h on
    /// flow.
    pub const DETECTION_DEFAULT: Self = Self([0.02, 0.02, 0.02, 0.02, 1.0]);
    /// Default validation threshold: 0.01 bar on each pressure, 1 m³/h on
    /// flow.
    pub const VALIDATION_DEFAULT: Self = Self([0.01, 0.01, 0.01, 0.01, 1.0]);

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|v| *v >= 0.0 && v.is_finite())
    }
}

/// Componentwise absolute differences |y_a − y_b|; never negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualVector(pub [f64; 5]);

impl ResidualVector {
    pub fn between(a: &ProcessVector, b: &ProcessVector) -> Self {
        let av = a.as_array();
        let bv = b.as_array();
        let mut out = [0.0; 5];
        for k in 0..5 {
            out[k] = (av[k] - bv[k]).abs();
        }
        Self(out)
    }

    /// Some component strictly exceeds its threshold. Equality does not
    /// count as exceeding.
    pub fn any_above(&self, threshold: &ThresholdVector) -> bool {
        self.0.iter().zip(&threshold.0).any(|(r, t)| r > t)
    }

    /// Every component is strictly below its threshold.
    pub fn all_below(&self, threshold: &ThresholdVector) -> bool {
        self.0.iter().zip(&threshold.0).all(|(r, t)| r < t)
    }
}

const THRESHOLD_KEYS: &[&str] = &["detection", "validation"];

/// Load (detection, validation) threshold vectors from the shared config
/// dialect: `detection = p1,p2,p3,p4,fl` and `validation = ...` lines.
pub fn load_thresholds(path: &Path) -> Result<(ThresholdVector, ThresholdVector), ConfigError> {
    let kv = KvFile::load(path)?;
    kv.check_known_keys(THRESHOLD_KEYS)?;
    let read = |key: &str, default: ThresholdVector| -> Result<ThresholdVector, ConfigError> {
        match kv.get_f64_list(key)? {
            None => Ok(default),
            Some(list) if list.len() == 5 => {
                let mut out = [0.0; 5];
                out.copy_from_slice(&list);
                Ok(ThresholdVector(out))
            }
            Some(list) => Err(ConfigError::Value {
                line: 0,
                key: key.to_string(),
                message: format!("need 5 entries, got {}", list.len()),
            }),
        }
    };
    let detection = read("detection", ThresholdVector::DETECTION_DEFAULT)?;
    let validation = read("validation", ThresholdVector::VALIDATION_DEFAULT)?;
    Ok((detection, validation))
}

pub fn thresholds_to_kv_string(detection: &ThresholdVector, validation: &ThresholdVector) -> String {
    let join = |t: &ThresholdVector| {
        t.0.iter()
            .map(|v| format_full(*v))
            .collect::<Vec<_>>()
            .join(",")
    };
    format!(
        "# residual thresholds (p1,p2,p3,p4 bar; fl m3/h)\ndetection = {}\nvalidation = {}\n",
        join(detection),
        join(validation)
    )
}

#[derive(Debug, Error)]
pub enum FddError {
    #[error("no estimator for fault class {0}")]
    MissingEstimator(usize),
    #[error("fault class {0} outside 1..=5")]
    BadClass(usize),
}

/// Detection stage: residuals between measured and model output; triggered
/// iff at least one component strictly exceeds the detection threshold.
pub fn detect(
    y_measured: &ProcessVector,
    y_model: &ProcessVector,
    detection: &ThresholdVector,
) -> (bool, ResidualVector) {
    let residuals = ResidualVector::between(y_measured, y_model);
    (residuals.any_above(detection), residuals)
}

/// Localization stage: classify the drifted component from setpoints and
/// measurements.
pub fn localize(
    classifier: &DecisionTreeModel,
    u: &ControlVector,
    y_measured: &ProcessVector,
) -> usize {
    classifier.predict(&features_from(u, y_measured))
}

/// The component index a class commits to: classes 1..=4 map to their
/// component, the merged pump class updates the rated head only.
pub fn committed_component(fault_class: usize) -> usize {
    fault_class
}

/// One trained estimator per fault class.
#[derive(Debug, Clone)]
pub struct EstimatorSet {
    models: Vec<Option<SvrModel>>,
}

impl EstimatorSet {
    pub fn new() -> Self {
        Self {
            models: (0..=FAULT_CLASS_COUNT).map(|_| None).collect(),
        }
    }

    pub fn set(&mut self, fault_class: usize, model: SvrModel) {
        assert!(
            (1..=FAULT_CLASS_COUNT).contains(&fault_class),
            "fault class {fault_class} outside 1..=5"
        );
        self.models[fault_class] = Some(model);
    }

    pub fn get(&self, fault_class: usize) -> Result<&SvrModel, FddError> {
        if !(1..=FAULT_CLASS_COUNT).contains(&fault_class) {
            return Err(FddError::BadClass(fault_class));
        }
        self.models[fault_class]
            .as_ref()
            .ok_or(FddError::MissingEstimator(fault_class))
    }

    pub fn is_complete(&self) -> bool {
        (1..=FAULT_CLASS_COUNT).all(|c| self.models[c].is_some())
    }
}

impl Default for EstimatorSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Estimation result: the native-unit value, clamped to stay strictly
/// positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub clamped: bool,
}

/// Estimation stage: the class's SVR maps (U, Y) to the component value.
/// Non-positive predictions are clamped to 1e-6 of the component's nominal
/// value and flagged.
pub fn estimate(
    estimators: &EstimatorSet,
    u: &ControlVector,
    y_measured: &ProcessVector,
    fault_class: usize,
) -> Result<Estimate, FddError> {
    let model = estimators.get(fault_class)?;
    let raw = model.predict(&features_from(u, y_measured));
    let floor = 1e-6 * ComponentVector::NOMINAL.component(committed_component(fault_class));
    if raw <= 0.0 {
        Ok(Estimate {
            value: floor,
            clamped: true,
        })
    } else {
        Ok(Estimate {
            value: raw,
            clamped: false,
        })
    }
}

/// Validation stage outcome. A solver failure on the candidate counts as a
/// failed validation, flagged separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub passed: bool,
    pub residuals: Option<ResidualVector>,
    pub solver_failed: bool,
}

/// Validation stage: simulate the candidate component vector at the same
/// setpoints and require every residual strictly below the validation
/// threshold.
pub fn validate(
    y_measured: &ProcessVector,
    theta_candidate: &ComponentVector,
    u: &ControlVector,
    cfg: &LoopConfig,
    validation: &ThresholdVector,
) -> Validation {
    match simulate(u, theta_candidate, cfg) {
        Ok(y_candidate) => {
            let residuals = ResidualVector::between(y_measured, &y_candidate);
            Validation {
                passed: residuals.all_below(validation),
                residuals: Some(residuals),
                solver_failed: false,
            }
        }
        Err(_) => Validation {
            passed: false,
            residuals: None,
            solver_failed: true,
        },
    }
}

/// Everything the monitoring loop needs: the model-side component vector,
/// the trained models, the thresholds, and the loop constants.
#[derive(Debug, Clone)]
pub struct TwinState {
    pub theta: ComponentVector,
    pub cfg: LoopConfig,
    pub classifier: DecisionTreeModel,
    pub estimators: EstimatorSet,
    pub detection_threshold: ThresholdVector,
    pub validation_threshold: ThresholdVector,
    pub max_iterations: usize,
}

/// Default iteration budget for the localize/estimate/validate loop.
pub const DEFAULT_MAX_ITERATIONS: usize = 3;

impl TwinState {
    /// A consistent twin requires a classifier and all five estimators.
    pub fn new(
        theta: ComponentVector,
        cfg: LoopConfig,
        classifier: DecisionTreeModel,
        estimators: EstimatorSet,
        detection_threshold: ThresholdVector,
        validation_threshold: ThresholdVector,
    ) -> Result<Self, FddError> {
        for class in 1..=FAULT_CLASS_COUNT {
            estimators.get(class)?;
        }
        Ok(Self {
            theta,
            cfg,
            classifier,
            estimators,
            detection_threshold,
            validation_threshold,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FddOutcome {
    /// Residuals stayed under the detection threshold.
    NoFault,
    /// A candidate component vector passed validation and was committed.
    Converged,
    /// The iteration budget ran out; the twin's vector is unchanged.
    FailedToConverge,
}

/// One localize/estimate/validate attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    /// Detection residuals at the start of the iteration.
    pub residuals: ResidualVector,
    pub predicted_class: usize,
    pub estimated_value: f64,
    pub estimate_clamped: bool,
    /// Residuals of the candidate's simulation against the measurement.
    pub validation_residuals: Option<ResidualVector>,
    pub validation_passed: bool,
    pub validation_solver_failed: bool,
}

/// Full record of one monitoring event.
#[derive(Debug, Clone, PartialEq)]
pub struct FddReport {
    pub triggered: bool,
    pub detection_residuals: ResidualVector,
    pub iterations: usize,
    pub trace: Vec<IterationTrace>,
    pub outcome: FddOutcome,
    pub final_theta: ComponentVector,
    /// (class, value) committed on convergence.
    pub committed: Option<(usize, f64)>,
    /// The twin-side simulation itself failed; no diagnosis possible.
    pub model_solver_failed: bool,
}

impl FddReport {
    /// One labeled line per field, one block per iteration.
    pub fn to_text(&self) -> String {
        let fmt5 = |v: &[f64; 5]| {
            v.iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        out.push_str(&format!("triggered = {}\n", self.triggered));
        out.push_str(&format!(
            "detection_residuals = {}\n",
            fmt5(&self.detection_residuals.0)
        ));
        out.push_str(&format!("iterations = {}\n", self.iterations));
        for (i, t) in self.trace.iter().enumerate() {
            out.push_str(&format!("iteration = {}\n", i + 1));
            out.push_str(&format!("  residuals = {}\n", fmt5(&t.residuals.0)));
            out.push_str(&format!("  predicted_class = {}\n", t.predicted_class));
            out.push_str(&format!(
                "  estimated_value = {}\n",
                format_full(t.estimated_value)
            ));
            out.push_str(&format!("  estimate_clamped = {}\n", t.estimate_clamped));
            match &t.validation_residuals {
                Some(r) => out.push_str(&format!("  validation_residuals = {}\n", fmt5(&r.0))),
                None => out.push_str("  validation_residuals = none\n"),
            }
            out.push_str(&format!("  validation_passed = {}\n", t.validation_passed));
        }
        let outcome = match self.outcome {
            FddOutcome::NoFault => "NoFault",
            FddOutcome::Converged => "Converged",
            FddOutcome::FailedToConverge => "FailedToConverge",
        };
        out.push_str(&format!("outcome = {outcome}\n"));
        let t = &self.final_theta;
        out.push_str(&format!(
            "final_theta = {},{},{},{},{},{}\n",
            format_full(t.loss1),
            format_full(t.loss3),
            format_full(t.lossx),
            format_full(t.tank_pressure),
            format_full(t.rated_head),
            format_full(t.rated_flow),
        ));
        out
    }
}

/// Run one monitoring event against the twin. Detection gates the loop; on
/// a validated candidate the twin's component vector is committed and the
/// loop stops. The twin state mutates only on convergence (single-writer
/// per twin instance).
pub fn run_fdd(twin: &mut TwinState, u: &ControlVector, y_measured: &ProcessVector) -> FddReport {
    let y_model = match simulate(u, &twin.theta, &twin.cfg) {
        Ok(y) => y,
        Err(_) => {
            return FddReport {
                triggered: false,
                detection_residuals: ResidualVector([f64::INFINITY; 5]),
                iterations: 0,
                trace: Vec::new(),
                outcome: FddOutcome::FailedToConverge,
                final_theta: twin.theta,
                committed: None,
                model_solver_failed: true,
            }
        }
    };
    let (triggered, detection_residuals) = detect(y_measured, &y_model, &twin.detection_threshold);
    if !triggered {
        return FddReport {
            triggered: false,
            detection_residuals,
            iterations: 0,
            trace: Vec::new(),
            outcome: FddOutcome::NoFault,
            final_theta: twin.theta,
            committed: None,
            model_solver_failed: false,
        };
    }

    let mut trace = Vec::with_capacity(twin.max_iterations);
    let mut outcome = FddOutcome::FailedToConverge;
    let mut committed = None;
    for _ in 0..twin.max_iterations {
        // Each iteration re-runs localization and estimation against the
        // original measurement and the current model state.
        let predicted_class = localize(&twin.classifier, u, y_measured);
        let est = estimate(&twin.estimators, u, y_measured, predicted_class)
            .expect("twin state holds all estimators");
        let candidate = twin
            .theta
            .with_component(committed_component(predicted_class), est.value);
        let validation = validate(
            y_measured,
            &candidate,
            u,
            &twin.cfg,
            &twin.validation_threshold,
        );
        trace.push(IterationTrace {
            residuals: detection_residuals,
            predicted_class,
            estimated_value: est.value,
            estimate_clamped: est.clamped,
            validation_residuals: validation.residuals,
            validation_passed: validation.passed,
            validation_solver_failed: validation.solver_failed,
        });
        if validation.passed {
            twin.theta = candidate;
            outcome = FddOutcome::Converged;
            committed = Some((predicted_class, est.value));
            break;
        }
    }

    FddReport {
        triggered: true,
        detection_residuals,
        iterations: trace.len(),
        trace,
        outcome,
        final_theta: twin.theta,
        committed,
        model_solver_failed: false,
    }
}
