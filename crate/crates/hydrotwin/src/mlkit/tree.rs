//! CART-style decision tree classifier grown by greedy Gini minimization.
//!
//! The tree is fully deterministic: split thresholds are midpoints between
//! consecutive distinct sorted feature values, impurity is computed from
//! integer class counts, and ties are broken by (lowest feature index,
//! lowest threshold). Refitting on a permuted training set therefore yields
//! identical predictions.

use super::{FeatureVector, FitError, FEATURE_COUNT};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
        /// Training count per class, aligned with the model's class list.
        histogram: Vec<usize>,
    },
}

/// Fitted classification tree over the fixed 7-feature contract.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    pub(crate) classes: Vec<usize>,
    pub(crate) nodes: Vec<TreeNode>,
    pub(crate) max_depth: usize,
    pub(crate) min_samples_leaf: usize,
    /// Set when some leaf held identical rows with conflicting labels; the
    /// leaf takes the majority (ties to the lowest label).
    pub(crate) conflict_warning: bool,
}

// A depth cap of 20 underfits the loop physics badly (the class manifolds
// are curved surfaces in feature space and need many axis-aligned cells);
// 100 is effectively unbounded for desk-scale data while still a guard.
pub const DEFAULT_MAX_DEPTH: usize = 100;
pub const DEFAULT_MIN_SAMPLES_LEAF: usize = 1;

struct Builder<'a> {
    rows: &'a [FeatureVector],
    labels: &'a [usize],
    classes: Vec<usize>,
    max_depth: usize,
    min_samples_leaf: usize,
    nodes: Vec<TreeNode>,
    conflict_warning: bool,
}

impl DecisionTreeModel {
    /// Grow a tree on labeled feature rows.
    pub fn fit(
        rows: &[FeatureVector],
        labels: &[usize],
        max_depth: usize,
        min_samples_leaf: usize,
    ) -> Result<Self, FitError> {
        if rows.is_empty() {
            return Err(FitError::Empty);
        }
        if rows.len() != labels.len() {
            return Err(FitError::LengthMismatch {
                rows: rows.len(),
                targets: labels.len(),
            });
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite);
        }
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(FitError::SingleClass);
        }
        let mut builder = Builder {
            rows,
            labels,
            classes,
            max_depth,
            min_samples_leaf: min_samples_leaf.max(1),
            nodes: Vec::new(),
            conflict_warning: false,
        };
        let all: Vec<usize> = (0..rows.len()).collect();
        builder.build(all, 0);
        Ok(Self {
            classes: builder.classes,
            nodes: builder.nodes,
            max_depth,
            min_samples_leaf,
            conflict_warning: builder.conflict_warning,
        })
    }

    /// Route a feature vector to a leaf: left iff feature ≤ threshold.
    pub fn predict(&self, x: &FeatureVector) -> usize {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { label, .. } => *label,
            _ => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Histogram of the leaf a row routes to, aligned with `classes()`.
    pub fn leaf_histogram(&self, x: &FeatureVector) -> &[usize] {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { histogram, .. } => histogram,
            _ => unreachable!("leaf_index returns a leaf"),
        }
    }

    fn leaf_index(&self, x: &FeatureVector) -> usize {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { .. } => return node,
            }
        }
    }

    /// Fraction of rows whose predicted label matches.
    pub fn accuracy(&self, rows: &[FeatureVector], labels: &[usize]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let hits = rows
            .iter()
            .zip(labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / rows.len() as f64
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn conflict_warning(&self) -> bool {
        self.conflict_warning
    }

    /// Depth of the fitted tree (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn depth_at(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + depth_at(nodes, *left).max(depth_at(nodes, *right))
                }
            }
        }
        depth_at(&self.nodes, 0)
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn class_position(&self, label: usize) -> usize {
        self.classes.binary_search(&label).expect("label seen in fit")
    }

    fn counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for &i in indices {
            counts[self.class_position(self.labels[i])] += 1;
        }
        counts
    }

    /// Gini impurity from integer counts; order-independent.
    fn gini(counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let t = total as f64;
        1.0 - counts
            .iter()
            .map(|&c| {
                let p = c as f64 / t;
                p * p
            })
            .sum::<f64>()
    }

    fn majority_label(&self, counts: &[usize]) -> usize {
        // Ties resolve to the lowest label; classes are sorted ascending.
        let mut best = 0usize;
        for (pos, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = pos;
            }
        }
        self.classes[best]
    }

    fn push_leaf(&mut self, counts: Vec<usize>) -> usize {
        let label = self.majority_label(&counts);
        self.nodes.push(TreeNode::Leaf {
            label,
            histogram: counts,
        });
        self.nodes.len() - 1
    }

    fn build(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&indices);
        let impurity = Self::gini(&counts, indices.len());
        let splittable = indices.len() >= 2 * self.min_samples_leaf;
        if impurity == 0.0 || depth >= self.max_depth || !splittable {
            return self.push_leaf(counts);
        }
        let best = match self.best_split(&indices, &counts) {
            Some(b) => b,
            None => {
                // No feature separates these rows. If labels still conflict
                // the data is degenerate: identical rows, different labels.
                if self.all_rows_identical(&indices) && impurity > 0.0 {
                    self.conflict_warning = true;
                }
                return self.push_leaf(counts);
            }
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.rows[i][best.feature] <= best.threshold);

        let slot = self.nodes.len();
        // Placeholder, patched once both subtrees exist.
        self.nodes.push(TreeNode::Leaf {
            label: 0,
            histogram: Vec::new(),
        });
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    fn all_rows_identical(&self, indices: &[usize]) -> bool {
        let first = self.rows[indices[0]];
        indices.iter().all(|&i| self.rows[i] == first)
    }

    fn best_split(&self, indices: &[usize], parent_counts: &[usize]) -> Option<BestSplit> {
        let n = indices.len();
        let n_classes = self.classes.len();
        let mut best: Option<BestSplit> = None;

        for feature in 0..FEATURE_COUNT {
            // Aggregate class counts per distinct feature value so the scan
            // is independent of row order.
            let mut pairs: Vec<(f64, usize)> = indices
                .iter()
                .map(|&i| (self.rows[i][feature], self.class_position(self.labels[i])))
                .collect();
            pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

            let mut distinct: Vec<(f64, Vec<usize>)> = Vec::new();
            for (v, class_pos) in pairs {
                match distinct.last_mut() {
                    Some((last, counts)) if *last == v => counts[class_pos] += 1,
                    _ => {
                        let mut counts = vec![0usize; n_classes];
                        counts[class_pos] += 1;
                        distinct.push((v, counts));
                    }
                }
            }
            if distinct.len() < 2 {
                continue;
            }

            let mut left_counts = vec![0usize; n_classes];
            let mut left_total = 0usize;
            for w in 0..distinct.len() - 1 {
                let (v, counts) = &distinct[w];
                for (l, c) in left_counts.iter_mut().zip(counts) {
                    *l += c;
                }
                left_total += counts.iter().sum::<usize>();
                let right_total = n - left_total;
                if left_total < self.min_samples_leaf || right_total < self.min_samples_leaf {
                    continue;
                }
                let threshold = 0.5 * (v + distinct[w + 1].0);
                let right_counts: Vec<usize> = parent_counts
                    .iter()
                    .zip(&left_counts)
                    .map(|(p, l)| p - l)
                    .collect();
                let weighted = (left_total as f64 * Self::gini(&left_counts, left_total)
                    + right_total as f64 * Self::gini(&right_counts, right_total))
                    / n as f64;
                // Strict improvement keeps the first (lowest feature,
                // lowest threshold) candidate on ties.
                if best.as_ref().map_or(true, |b| weighted < b.impurity) {
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        impurity: weighted,
                    });
                }
            }
        }
        best
    }
}
