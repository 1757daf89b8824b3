//! Supervised database of single-parameter perturbations: generation from a
//! sampling plan, delimited-text persistence, and stratified splitting.
//!
//! Each record perturbs exactly one component away from nominal; the fault
//! label merges the two coupled pump parameters (rated head and rated flow)
//! into one class because they move every observable the same way.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{format_full, ConfigError, KvFile};
use crate::hydronet::{
    simulate, ComponentVector, ControlVector, LoopConfig, ProcessVector, SolveError,
    COMPONENT_COUNT,
};

/// Number of fault classes: components 1..=4 map to classes 1..=4, the two
/// pump parameters share class 5.
pub const FAULT_CLASS_COUNT: usize = 5;

/// Localization label for a perturbed component index.
pub fn fault_class_for(parameter_index: usize) -> usize {
    assert!(
        (1..=COMPONENT_COUNT).contains(&parameter_index),
        "parameter index {parameter_index} outside 1..=6"
    );
    parameter_index.min(FAULT_CLASS_COUNT)
}

/// One simulated training point: setpoints, observables, and the label of
/// the single perturbed component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRecord {
    pub control: ControlVector,
    pub process: ProcessVector,
    /// Localization label in 1..=5 (5 = merged pump class).
    pub fault_class: usize,
    /// Which component was perturbed, 1..=6.
    pub perturbed_index: usize,
    /// The perturbed component's value in its native unit.
    pub true_value: f64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("sampling plan: {0} grid is empty")]
    EmptyPlan(&'static str),
    #[error("sampling plan: {0}")]
    InvalidPlan(String),
    #[error("class {class} has only {count} record(s); need at least 2 to split")]
    TooFewSamples { class: usize, count: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Grid specification for the database: control setpoints and the relative
/// multipliers applied, one component at a time, to the nominal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub u1_grid: Vec<f64>,
    pub u2_grid: Vec<f64>,
    /// Relative multipliers on the nominal component value; one grid serves
    /// all six components.
    pub multipliers: Vec<f64>,
    /// Multipliers with |m − 1| < dead_band are not faults and are rejected.
    pub dead_band: f64,
    pub seed: u64,
}

fn range_grid(start: f64, step: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let v = start + step * k as f64;
        if v > end + 1e-9 {
            break;
        }
        out.push(v);
        k += 1;
    }
    out
}

impl Default for SamplingPlan {
    /// Desk-scale plan: 14 pump speeds × 13 valve openings × 6 components ×
    /// 14 multipliers = 15,288 points before convergence drops. Multipliers
    /// cover [0.5, 0.9] and [1.1, 1.5] uniformly; faults below 10% sit under
    /// the detection threshold over most of the operating region and only
    /// blur the class boundaries.
    fn default() -> Self {
        let mut multipliers: Vec<f64> = (0..7).map(|k| 0.5 + 0.4 * k as f64 / 6.0).collect();
        multipliers.extend((0..7).map(|k| 1.1 + 0.4 * k as f64 / 6.0));
        Self {
            u1_grid: range_grid(25.0, 5.0, 90.0),
            u2_grid: range_grid(10.0, 7.0, 100.0),
            multipliers,
            dead_band: 0.09,
            seed: 42,
        }
    }
}

const PLAN_KEYS: &[&str] = &["u1", "u2", "multipliers", "dead_band", "seed"];

impl SamplingPlan {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.u1_grid.is_empty() {
            return Err(DatasetError::EmptyPlan("u1"));
        }
        if self.u2_grid.is_empty() {
            return Err(DatasetError::EmptyPlan("u2"));
        }
        if self.multipliers.is_empty() {
            return Err(DatasetError::EmptyPlan("multipliers"));
        }
        for &u in self.u1_grid.iter().chain(self.u2_grid.iter()) {
            if !(0.0..=100.0).contains(&u) {
                return Err(DatasetError::InvalidPlan(format!(
                    "setpoint {u} outside 0..=100"
                )));
            }
        }
        if !(self.dead_band > 0.0) {
            return Err(DatasetError::InvalidPlan(format!(
                "dead_band must be positive, got {}",
                self.dead_band
            )));
        }
        for &m in &self.multipliers {
            if !(m > 0.0) || !m.is_finite() {
                return Err(DatasetError::InvalidPlan(format!(
                    "multiplier {m} must be a positive number"
                )));
            }
            if (m - 1.0).abs() < self.dead_band {
                return Err(DatasetError::InvalidPlan(format!(
                    "multiplier {m} lies inside the dead-band around 1.0 (the nominal value is not a fault)"
                )));
            }
        }
        Ok(())
    }

    /// Record count before convergence drops.
    pub fn record_count(&self) -> usize {
        self.u1_grid.len() * self.u2_grid.len() * COMPONENT_COUNT * self.multipliers.len()
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self, DatasetError> {
        kv.check_known_keys(PLAN_KEYS).map_err(ConfigError::from)?;
        let d = Self::default();
        let plan = Self {
            u1_grid: kv.get_f64_list("u1")?.unwrap_or(d.u1_grid),
            u2_grid: kv.get_f64_list("u2")?.unwrap_or(d.u2_grid),
            multipliers: kv.get_f64_list("multipliers")?.unwrap_or(d.multipliers),
            dead_band: kv.get_f64("dead_band")?.unwrap_or(d.dead_band),
            seed: kv.get_u64("seed")?.unwrap_or(d.seed),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn from_file(path: &Path) -> Result<Self, DatasetError> {
        Self::from_kv(&KvFile::load(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        let join = |grid: &[f64]| {
            grid.iter()
                .map(|v| format_full(*v))
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "# sampling plan\nu1 = {}\nu2 = {}\nmultipliers = {}\ndead_band = {}\nseed = {}\n",
            join(&self.u1_grid),
            join(&self.u2_grid),
            join(&self.multipliers),
            format_full(self.dead_band),
            self.seed
        )
    }
}

/// Output of [`generate`]: the records plus the count of grid points whose
/// simulation failed to converge (physically unreachable configurations,
/// dropped rather than imputed).
#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub records: Vec<SampleRecord>,
    pub dropped: usize,
}

/// Simulate every (u1, u2, component, multiplier) grid point. One record per
/// point in deterministic plan order; a pure function of its arguments.
pub fn generate(
    plan: &SamplingPlan,
    theta_nominal: &ComponentVector,
    cfg: &LoopConfig,
) -> Result<GenerationOutcome, DatasetError> {
    plan.validate()?;
    let mut records = Vec::with_capacity(plan.record_count());
    let mut dropped = 0usize;
    for &u1 in &plan.u1_grid {
        for &u2 in &plan.u2_grid {
            let u = ControlVector::new(u1, u2);
            for index in 1..=COMPONENT_COUNT {
                for &m in &plan.multipliers {
                    let value = theta_nominal.component(index) * m;
                    let theta = theta_nominal.with_component(index, value);
                    match simulate(&u, &theta, cfg) {
                        Ok(process) => records.push(SampleRecord {
                            control: u,
                            process,
                            fault_class: fault_class_for(index),
                            perturbed_index: index,
                            true_value: value,
                        }),
                        Err(SolveError::NoConvergence(_)) => dropped += 1,
                    }
                }
            }
        }
    }
    Ok(GenerationOutcome { records, dropped })
}

/// Feature rows and labels for classifier training.
pub fn classifier_rows(records: &[SampleRecord]) -> (Vec<crate::mlkit::FeatureVector>, Vec<usize>) {
    records
        .iter()
        .map(|r| {
            (
                crate::mlkit::features_from(&r.control, &r.process),
                r.fault_class,
            )
        })
        .unzip()
}

/// Feature rows and native-unit targets for one class's estimator. The
/// merged pump class estimates the rated head, so only rows that perturbed
/// component 5 carry a usable target.
pub fn estimator_rows(
    records: &[SampleRecord],
    fault_class: usize,
) -> (Vec<crate::mlkit::FeatureVector>, Vec<f64>) {
    records
        .iter()
        .filter(|r| {
            if fault_class == FAULT_CLASS_COUNT {
                r.perturbed_index == 5
            } else {
                r.fault_class == fault_class
            }
        })
        .map(|r| {
            (
                crate::mlkit::features_from(&r.control, &r.process),
                r.true_value,
            )
        })
        .unzip()
}

/// Stratified train/test split: per-class proportions preserved within ±1
/// record, reproducible for a fixed seed.
pub fn split(
    records: &[SampleRecord],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(train_fraction));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); FAULT_CLASS_COUNT + 1];
    for (i, r) in records.iter().enumerate() {
        by_class[r.fault_class].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, indices) in by_class.iter_mut().enumerate().skip(1) {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 2 {
            return Err(DatasetError::TooFewSamples {
                class,
                count: indices.len(),
            });
        }
        indices.shuffle(&mut rng);
        let n_train = ((indices.len() as f64 * train_fraction).round() as usize)
            .clamp(1, indices.len() - 1);
        for &i in &indices[..n_train] {
            train.push(records[i]);
        }
        for &i in &indices[n_train..] {
            test.push(records[i]);
        }
    }
    Ok((train, test))
}

pub const DATASET_HEADER: &str = "u1,u2,p1,p2,p3,p4,fl,fault_class,perturbed_index,true_value";

/// Write records as delimited text, full f64 precision.
pub fn save(records: &[SampleRecord], path: &Path) -> Result<(), DatasetError> {
    let mut out = String::with_capacity(records.len() * 200 + 64);
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for r in records {
        let y = r.process;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            format_full(r.control.pump_speed),
            format_full(r.control.valve_opening),
            format_full(y.p1),
            format_full(y.p2),
            format_full(y.p3),
            format_full(y.p4),
            format_full(y.flow),
            r.fault_class,
            r.perturbed_index,
            format_full(r.true_value),
        ));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a dataset written by [`save`]. Header line is mandatory; an empty
/// body is a valid empty dataset.
pub fn load(path: &Path) -> Result<Vec<SampleRecord>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == DATASET_HEADER => {}
        Some((_, header)) => {
            return Err(DatasetError::Parse {
                path: display,
                line: 1,
                message: format!("bad header `{}`", header.trim()),
            })
        }
        None => {
            return Err(DatasetError::Parse {
                path: display,
                line: 1,
                message: "empty file, expected header".to_string(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 10 {
            return Err(DatasetError::Parse {
                path: display,
                line,
                message: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<f64, DatasetError> {
            fields[i].trim().parse::<f64>().map_err(|e| DatasetError::Parse {
                path: display.clone(),
                line,
                message: format!("field {}: {}", i + 1, e),
            })
        };
        let int = |i: usize| -> Result<usize, DatasetError> {
            fields[i]
                .trim()
                .parse::<usize>()
                .map_err(|e| DatasetError::Parse {
                    path: display.clone(),
                    line,
                    message: format!("field {}: {}", i + 1, e),
                })
        };
        records.push(SampleRecord {
            control: ControlVector::new(num(0)?, num(1)?),
            process: ProcessVector {
                p1: num(2)?,
                p2: num(3)?,
                p3: num(4)?,
                p4: num(5)?,
                flow: num(6)?,
            },
            fault_class: int(7)?,
            perturbed_index: int(8)?,
            true_value: num(9)?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_plan() -> SamplingPlan {
        SamplingPlan {
            u1_grid: vec![54.0],
            u2_grid: vec![100.0],
            multipliers: vec![1.3],
            dead_band: 0.02,
            seed: 7,
        }
    }

    #[test]
    fn default_plan_counts_match_desk_scale() {
        let plan = SamplingPlan::default();
        assert_eq!(plan.u1_grid.len(), 14);
        assert_eq!(plan.u2_grid.len(), 13);
        assert_eq!(plan.multipliers.len(), 14);
        assert_eq!(plan.record_count(), 15_288);
        assert!(plan.multipliers.iter().all(|m| (m - 1.0).abs() > 0.09));
        plan.validate().unwrap();
    }

    #[test]
    fn single_point_plan_yields_one_record_per_component() {
        let mut plan = tiny_plan();
        plan.multipliers = vec![1.3];
        let out = generate(&plan, &ComponentVector::NOMINAL, &LoopConfig::default()).unwrap();
        assert_eq!(out.records.len(), 6);
        assert_eq!(out.dropped, 0);
        let classes: Vec<usize> = out.records.iter().map(|r| r.fault_class).collect();
        assert_eq!(classes, vec![1, 2, 3, 4, 5, 5]);
        let fourth = &out.records[3];
        assert_eq!(fourth.fault_class, 4);
        assert_eq!(fourth.perturbed_index, 4);
        assert_eq!(fourth.true_value, 3.0 * 1.3);
    }

    #[test]
    fn nominal_multiplier_rejected_by_validation() {
        let mut plan = tiny_plan();
        plan.multipliers = vec![1.0];
        match generate(&plan, &ComponentVector::NOMINAL, &LoopConfig::default()) {
            Err(DatasetError::InvalidPlan(msg)) => assert!(msg.contains("dead-band")),
            other => panic!("expected dead-band rejection, got {other:?}"),
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let mut plan = tiny_plan();
        plan.u2_grid.clear();
        match plan.validate() {
            Err(DatasetError::EmptyPlan(which)) => assert_eq!(which, "u2"),
            other => panic!("expected EmptyPlan, got {other:?}"),
        }
    }

    #[test]
    fn every_record_replays_exactly() {
        let plan = SamplingPlan {
            u1_grid: vec![30.0, 70.0],
            u2_grid: vec![20.0, 80.0],
            multipliers: vec![0.6, 1.4],
            dead_band: 0.02,
            seed: 1,
        };
        let cfg = LoopConfig::default();
        let nominal = ComponentVector::NOMINAL;
        let out = generate(&plan, &nominal, &cfg).unwrap();
        assert_eq!(out.records.len(), plan.record_count());
        for r in &out.records {
            let theta = nominal.with_component(r.perturbed_index, r.true_value);
            let y = simulate(&r.control, &theta, &cfg).unwrap();
            assert_eq!(y, r.process, "record must replay bit-exactly");
        }
    }

    #[test]
    fn class_balance_is_structural() {
        let plan = SamplingPlan {
            u1_grid: vec![40.0, 60.0],
            u2_grid: vec![50.0],
            multipliers: vec![0.7, 1.3],
            dead_band: 0.02,
            seed: 1,
        };
        let out = generate(&plan, &ComponentVector::NOMINAL, &LoopConfig::default()).unwrap();
        let mut counts = [0usize; FAULT_CLASS_COUNT + 1];
        for r in &out.records {
            counts[r.fault_class] += 1;
        }
        let per_cell = plan.u1_grid.len() * plan.u2_grid.len() * plan.multipliers.len();
        for class in 1..=4 {
            assert_eq!(counts[class], per_cell);
        }
        assert_eq!(counts[5], 2 * per_cell, "merged class carries two components");
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let plan = SamplingPlan {
            u1_grid: vec![30.0, 50.0, 70.0, 90.0],
            u2_grid: vec![20.0, 60.0, 100.0],
            multipliers: vec![0.8, 1.2],
            dead_band: 0.02,
            seed: 1,
        };
        let out = generate(&plan, &ComponentVector::NOMINAL, &LoopConfig::default()).unwrap();
        let (train, test) = split(&out.records, 0.8, 99).unwrap();
        assert_eq!(train.len() + test.len(), out.records.len());
        for class in 1..=FAULT_CLASS_COUNT {
            let total = out.records.iter().filter(|r| r.fault_class == class).count();
            let in_train = train.iter().filter(|r| r.fault_class == class).count();
            let expect = (total as f64 * 0.8).round() as usize;
            assert!(
                in_train.abs_diff(expect) <= 1,
                "class {class}: {in_train} vs {expect}"
            );
        }
        let (train2, test2) = split(&out.records, 0.8, 99).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let (train3, _) = split(&out.records, 0.8, 100).unwrap();
        assert_ne!(train, train3, "different seed should permute the split");
    }

    #[test]
    fn split_rejects_undersized_class() {
        let out = generate(&tiny_plan(), &ComponentVector::NOMINAL, &LoopConfig::default())
            .unwrap();
        match split(&out.records, 0.8, 1) {
            Err(DatasetError::TooFewSamples { .. }) => {}
            other => panic!("expected TooFewSamples, got {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_bitwise() {
        let plan = SamplingPlan {
            u1_grid: vec![33.0, 77.0],
            u2_grid: vec![45.0],
            multipliers: vec![0.55, 1.45],
            dead_band: 0.02,
            seed: 1,
        };
        let out = generate(&plan, &ComponentVector::NOMINAL, &LoopConfig::default()).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("db.csv");
        save(&out.records, &path).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(out.records, back);
    }

    #[test]
    fn header_only_file_is_empty_dataset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, format!("{DATASET_HEADER}\n")).unwrap();
        assert!(load(&path).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, format!("{DATASET_HEADER}\n1,2,3\n")).unwrap();
        match load(&path) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }
}
