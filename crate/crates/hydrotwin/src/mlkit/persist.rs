//! Versioned line-oriented text persistence for the two model kinds.
//!
//! Every file starts with `hydrotwin-model v1 <kind>`. Numbers are written
//! with 17 significant digits so a reload predicts bit-identically.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::config::format_full;

use super::svr::SvrModel;
use super::tree::{DecisionTreeModel, TreeNode};
use super::FEATURE_COUNT;

const MAGIC: &str = "hydrotwin-model";
const VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

struct Reader<'a> {
    path: String,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn new(path: &Path, text: &'a str) -> Self {
        Self {
            path: path.display().to_string(),
            lines: text.lines().enumerate(),
        }
    }

    fn fail<T>(&self, line: usize, message: impl Into<String>) -> Result<T, ModelIoError> {
        Err(ModelIoError::Format {
            path: self.path.clone(),
            line,
            message: message.into(),
        })
    }

    fn next_line(&mut self) -> Result<(usize, &'a str), ModelIoError> {
        match self.lines.next() {
            Some((idx, text)) => Ok((idx + 1, text.trim())),
            None => Err(ModelIoError::Format {
                path: self.path.clone(),
                line: 0,
                message: "unexpected end of file".to_string(),
            }),
        }
    }

    /// Consume a `name <fields...>` line, checking the tag.
    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>), ModelIoError> {
        let (line, text) = self.next_line()?;
        let mut fields = text.split_whitespace();
        match fields.next() {
            Some(t) if t == tag => Ok((line, fields.collect())),
            Some(other) => self.fail(line, format!("expected `{tag}`, got `{other}`")),
            None => self.fail(line, format!("expected `{tag}`, got an empty line")),
        }
    }

    fn expect_header(&mut self, kind: &str) -> Result<(), ModelIoError> {
        let (line, text) = self.next_line()?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != MAGIC {
            return self.fail(line, format!("bad magic, expected `{MAGIC} {VERSION} {kind}`"));
        }
        if fields[1] != VERSION {
            return self.fail(line, format!("unsupported version `{}`", fields[1]));
        }
        if fields[2] != kind {
            return self.fail(
                line,
                format!("model kind is `{}`, expected `{kind}`", fields[2]),
            );
        }
        Ok(())
    }
}

fn parse_f64(path: &str, line: usize, text: &str) -> Result<f64, ModelIoError> {
    text.parse::<f64>().map_err(|e| ModelIoError::Format {
        path: path.to_string(),
        line,
        message: format!("bad number `{text}`: {e}"),
    })
}

fn parse_usize(path: &str, line: usize, text: &str) -> Result<usize, ModelIoError> {
    text.parse::<usize>().map_err(|e| ModelIoError::Format {
        path: path.to_string(),
        line,
        message: format!("bad integer `{text}`: {e}"),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), ModelIoError> {
    fs::write(path, contents).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, ModelIoError> {
    fs::read_to_string(path).map_err(|source| ModelIoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_tree(model: &DecisionTreeModel, path: &Path) -> Result<(), ModelIoError> {
    let mut out = format!("{MAGIC} {VERSION} tree\n");
    out.push_str(&format!(
        "classes {}\n",
        model
            .classes
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));
    out.push_str(&format!("max_depth {}\n", model.max_depth));
    out.push_str(&format!("min_samples_leaf {}\n", model.min_samples_leaf));
    out.push_str(&format!(
        "conflict_warning {}\n",
        model.conflict_warning as u8
    ));
    out.push_str(&format!("nodes {}\n", model.nodes.len()));
    for node in &model.nodes {
        match node {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => out.push_str(&format!(
                "split {feature} {} {left} {right}\n",
                format_full(*threshold)
            )),
            TreeNode::Leaf { label, histogram } => out.push_str(&format!(
                "leaf {label} {}\n",
                histogram
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            )),
        }
    }
    write_file(path, &out)
}

pub fn load_tree(path: &Path) -> Result<DecisionTreeModel, ModelIoError> {
    let text = read_file(path)?;
    let mut r = Reader::new(path, &text);
    r.expect_header("tree")?;

    let (line, fields) = r.tagged("classes")?;
    let classes: Vec<usize> = fields
        .iter()
        .map(|f| parse_usize(&r.path, line, f))
        .collect::<Result<_, _>>()?;
    let (line, fields) = r.tagged("max_depth")?;
    let max_depth = match fields.as_slice() {
        [v] => parse_usize(&r.path, line, v)?,
        _ => return r.fail(line, "max_depth takes one field"),
    };
    let (line, fields) = r.tagged("min_samples_leaf")?;
    let min_samples_leaf = match fields.as_slice() {
        [v] => parse_usize(&r.path, line, v)?,
        _ => return r.fail(line, "min_samples_leaf takes one field"),
    };
    let (line, fields) = r.tagged("conflict_warning")?;
    let conflict_warning = match fields.as_slice() {
        [v] => parse_usize(&r.path, line, v)? != 0,
        _ => return r.fail(line, "conflict_warning takes one field"),
    };
    let (line, fields) = r.tagged("nodes")?;
    let count = match fields.as_slice() {
        [v] => parse_usize(&r.path, line, v)?,
        _ => return r.fail(line, "nodes takes one field"),
    };

    let mut nodes = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, text) = r.next_line()?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        match fields.split_first() {
            Some((&"split", rest)) if rest.len() == 4 => {
                nodes.push(TreeNode::Split {
                    feature: parse_usize(&r.path, line, rest[0])?,
                    threshold: parse_f64(&r.path, line, rest[1])?,
                    left: parse_usize(&r.path, line, rest[2])?,
                    right: parse_usize(&r.path, line, rest[3])?,
                });
            }
            Some((&"leaf", rest)) if !rest.is_empty() => {
                let label = parse_usize(&r.path, line, rest[0])?;
                let histogram: Vec<usize> = rest[1..]
                    .iter()
                    .map(|f| parse_usize(&r.path, line, f))
                    .collect::<Result<_, _>>()?;
                if histogram.len() != classes.len() {
                    return r.fail(line, "leaf histogram length mismatch");
                }
                nodes.push(TreeNode::Leaf { label, histogram });
            }
            _ => return r.fail(line, format!("bad node line `{text}`")),
        }
    }
    if nodes.is_empty() {
        return r.fail(0, "tree has no nodes");
    }
    for (i, node) in nodes.iter().enumerate() {
        if let TreeNode::Split {
            feature,
            left,
            right,
            ..
        } = node
        {
            if *feature >= FEATURE_COUNT || *left >= nodes.len() || *right >= nodes.len() {
                return r.fail(0, format!("node {i} references out of range"));
            }
        }
    }
    Ok(DecisionTreeModel {
        classes,
        nodes,
        max_depth,
        min_samples_leaf,
        conflict_warning,
    })
}

pub fn save_svr(model: &SvrModel, path: &Path) -> Result<(), ModelIoError> {
    let nums = |vals: &[f64]| {
        vals.iter()
            .map(|v| format_full(*v))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = format!("{MAGIC} {VERSION} svr\n");
    out.push_str(&format!("gamma {}\n", format_full(model.gamma)));
    out.push_str(&format!("c {}\n", format_full(model.c)));
    out.push_str(&format!("epsilon {}\n", format_full(model.epsilon)));
    out.push_str(&format!("bias {}\n", format_full(model.bias)));
    out.push_str(&format!("feature_mean {}\n", nums(&model.feature_mean)));
    out.push_str(&format!("feature_std {}\n", nums(&model.feature_std)));
    out.push_str(&format!("target_mean {}\n", format_full(model.target_mean)));
    out.push_str(&format!("target_std {}\n", format_full(model.target_std)));
    out.push_str(&format!("converged {}\n", model.converged as u8));
    out.push_str(&format!("sweeps_used {}\n", model.sweeps_used));
    out.push_str(&format!("kkt_gap {}\n", format_full(model.kkt_gap)));
    out.push_str(&format!(
        "dual_objective {}\n",
        format_full(model.dual_objective)
    ));
    out.push_str(&format!("support_vectors {}\n", model.support_vectors.len()));
    for (sv, beta) in model.support_vectors.iter().zip(&model.dual_coefficients) {
        out.push_str(&format_full(*beta));
        for v in sv {
            out.push(' ');
            out.push_str(&format_full(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn load_svr(path: &Path) -> Result<SvrModel, ModelIoError> {
    let text = read_file(path)?;
    let mut r = Reader::new(path, &text);
    r.expect_header("svr")?;

    let mut scalar = |tag: &str| -> Result<f64, ModelIoError> {
        let (line, fields) = r.tagged(tag)?;
        match fields.as_slice() {
            [v] => parse_f64(&r.path, line, v),
            _ => Err(ModelIoError::Format {
                path: r.path.clone(),
                line,
                message: format!("{tag} takes one field"),
            }),
        }
    };
    let gamma = scalar("gamma")?;
    let c = scalar("c")?;
    let epsilon = scalar("epsilon")?;
    let bias = scalar("bias")?;

    let mut vector = |tag: &str| -> Result<[f64; FEATURE_COUNT], ModelIoError> {
        let (line, fields) = r.tagged(tag)?;
        if fields.len() != FEATURE_COUNT {
            return Err(ModelIoError::Format {
                path: r.path.clone(),
                line,
                message: format!("{tag} needs {FEATURE_COUNT} fields, got {}", fields.len()),
            });
        }
        let mut out = [0.0; FEATURE_COUNT];
        for (slot, f) in out.iter_mut().zip(&fields) {
            *slot = parse_f64(&r.path, line, f)?;
        }
        Ok(out)
    };
    let feature_mean = vector("feature_mean")?;
    let feature_std = vector("feature_std")?;

    let mut scalar = |tag: &str| -> Result<f64, ModelIoError> {
        let (line, fields) = r.tagged(tag)?;
        match fields.as_slice() {
            [v] => parse_f64(&r.path, line, v),
            _ => Err(ModelIoError::Format {
                path: r.path.clone(),
                line,
                message: format!("{tag} takes one field"),
            }),
        }
    };
    let target_mean = scalar("target_mean")?;
    let target_std = scalar("target_std")?;
    let converged = scalar("converged")? != 0.0;
    let sweeps_used = scalar("sweeps_used")? as usize;
    let kkt_gap = scalar("kkt_gap")?;
    let dual_objective = scalar("dual_objective")?;

    let (line, fields) = r.tagged("support_vectors")?;
    let count = match fields.as_slice() {
        [v] => parse_usize(&r.path, line, v)?,
        _ => return r.fail(line, "support_vectors takes one field"),
    };
    let mut support_vectors = Vec::with_capacity(count);
    let mut dual_coefficients = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, text) = r.next_line()?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != FEATURE_COUNT + 1 {
            return r.fail(
                line,
                format!(
                    "support vector row needs {} fields, got {}",
                    FEATURE_COUNT + 1,
                    fields.len()
                ),
            );
        }
        dual_coefficients.push(parse_f64(&r.path, line, fields[0])?);
        let mut sv = [0.0; FEATURE_COUNT];
        for (slot, f) in sv.iter_mut().zip(&fields[1..]) {
            *slot = parse_f64(&r.path, line, f)?;
        }
        support_vectors.push(sv);
    }

    Ok(SvrModel {
        support_vectors,
        dual_coefficients,
        bias,
        gamma,
        c,
        epsilon,
        feature_mean,
        feature_std,
        target_mean,
        target_std,
        converged,
        sweeps_used,
        kkt_gap,
        dual_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlkit::svr::SvrParams;
    use tempfile::tempdir;

    fn fitted_tree() -> DecisionTreeModel {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            let x = i as f64 * 0.5;
            rows.push([x, x.sin(), x * 0.1, 1.0, 0.0, -x, x % 3.0]);
            labels.push(1 + (i % 4));
        }
        DecisionTreeModel::fit(&rows, &labels, 10, 1).unwrap()
    }

    fn fitted_svr() -> SvrModel {
        let rows: Vec<[f64; 7]> = (0..15)
            .map(|i| {
                let x = i as f64 * 0.2;
                [x, x * x, 0.0, 1.0, -x, 0.5, 2.0]
            })
            .collect();
        let targets: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] + r[1]).collect();
        SvrModel::fit(&rows, &targets, &SvrParams::default()).unwrap()
    }

    #[test]
    fn tree_round_trip_predicts_identically() {
        let model = fitted_tree();
        let dir = tempdir().unwrap();
        let path = dir.path().join("tree.model");
        save_tree(&model, &path).unwrap();
        let back = load_tree(&path).unwrap();
        assert_eq!(model, back);
        for i in 0..1000 {
            let x = [
                (i as f64 * 0.37).sin() * 10.0,
                (i as f64 * 0.11).cos(),
                i as f64 * 0.01,
                1.0,
                0.0,
                -(i as f64) * 0.05,
                (i % 7) as f64,
            ];
            assert_eq!(model.predict(&x), back.predict(&x));
        }
    }

    #[test]
    fn svr_round_trip_predicts_identically() {
        let model = fitted_svr();
        let dir = tempdir().unwrap();
        let path = dir.path().join("svr.model");
        save_svr(&model, &path).unwrap();
        let back = load_svr(&path).unwrap();
        for i in 0..100 {
            let x = [
                i as f64 * 0.03,
                (i as f64 * 0.03).powi(2),
                0.0,
                1.0,
                -(i as f64) * 0.03,
                0.5,
                2.0,
            ];
            let a = model.predict(&x);
            let b = back.predict(&x);
            assert!(
                (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                "round-trip prediction drifted: {a} vs {b}"
            );
        }
    }

    #[test]
    fn wrong_kind_is_a_format_error() {
        let model = fitted_svr();
        let dir = tempdir().unwrap();
        let path = dir.path().join("svr.model");
        save_svr(&model, &path).unwrap();
        match load_tree(&path) {
            Err(ModelIoError::Format { message, .. }) => {
                assert!(message.contains("kind"), "message: {message}")
            }
            other => panic!("expected Format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("junk.model");
        std::fs::write(&path, "not a model\n").unwrap();
        assert!(matches!(load_tree(&path), Err(ModelIoError::Format { .. })));
        assert!(matches!(load_svr(&path), Err(ModelIoError::Format { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("absent.model");
        assert!(matches!(load_svr(&path), Err(ModelIoError::Io { .. })));
    }
}
