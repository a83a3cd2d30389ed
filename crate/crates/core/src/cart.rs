//! Binary CART classifier with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature. Split quality is compared in exact integer arithmetic, so equal
//! impurity decreases are recognised as ties and resolved by the fixed order
//! (lowest feature, then smallest threshold). A sample goes left iff
//! `value <= threshold`.

use num_traits::{FromPrimitive, Num};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samples::{Sample, TrainingTable};
use crate::scalar::Scalar;
use crate::LandCover;

/// Largest table `train` accepts; keeps split scores inside `u128`.
pub const MAX_TRAINING_ROWS: usize = 1 << 24;

// Below this many (rows x features) a node is searched sequentially.
const PARALLEL_WORK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub min_impurity_decrease: f64,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: 10,
            min_samples_leaf: 1,
            min_samples_split: 2,
            min_impurity_decrease: 0.0,
        }
    }
}

impl CartParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Training(format!("invalid parameters: {m}")));
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if self.min_samples_leaf < 1 {
            return bad("min_samples_leaf must be >= 1");
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be >= 2");
        }
        if !(self.min_impurity_decrease >= 0.0 && self.min_impurity_decrease.is_finite()) {
            return bad("min_impurity_decrease must be finite and >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        class: LandCover,
        /// Training rows per class that reached this leaf.
        counts: [u64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn leaf(counts: [u64; 2]) -> TreeNode {
        TreeNode::Leaf {
            class: majority(counts),
            counts,
        }
    }

    /// Depth of the subtree; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

/// Argmax of the class counts, ties to non-urban.
pub fn majority(counts: [u64; 2]) -> LandCover {
    if counts[1] > counts[0] {
        LandCover::Urban
    } else {
        LandCover::NonUrban
    }
}

/// Gini impurity `1 - sum(p_k^2)`. Generic so it can be evaluated in floating
/// point or exactly over rationals.
pub fn gini<F: Num + FromPrimitive + Copy>(counts: &[u64]) -> Result<F> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Training("gini of an empty node".into()));
    }
    let total_f = F::from_u64(total).expect("count representable");
    let mut acc = F::one();
    for &c in counts {
        let p = F::from_u64(c).expect("count representable") / total_f;
        acc = acc - p * p;
    }
    Ok(acc)
}

/// Chosen split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// `value <= threshold` splits `a` from `b` for any `a < b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a * 0.5 + b * 0.5;
    if a <= m && m < b {
        m
    } else {
        a
    }
}

/// Exact split score `qL/nL + qR/nR` as a fraction, `q = sum of squared
/// class counts`. Maximising it maximises the Gini decrease.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: [u64; 2], right: [u64; 2]) -> Score {
        let q =
            |c: [u64; 2]| u128::from(c[0]) * u128::from(c[0]) + u128::from(c[1]) * u128::from(c[1]);
        let n_l = u128::from(left[0] + left[1]);
        let n_r = u128::from(right[0] + right[1]);
        Score {
            num: q(left) * n_r + q(right) * n_l,
            den: n_l * n_r,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    left: [u64; 2],
    right: [u64; 2],
    score: Score,
}

impl Candidate {
    /// `gini(parent) - nL/n gini(L) - nR/n gini(R)` from one exact fraction.
    fn decrease(&self) -> f64 {
        let parent = [self.left[0] + self.right[0], self.left[1] + self.right[1]];
        let n = i128::from(parent[0] + parent[1]);
        let q_p = i128::from(parent[0]).pow(2) + i128::from(parent[1]).pow(2);
        let n_l = i128::from(self.left[0] + self.left[1]);
        let n_r = i128::from(self.right[0] + self.right[1]);
        let num = self.score.num as i128 * n - q_p * n_l * n_r;
        let den = n_l * n_r * n * n;
        num as f64 / den as f64
    }
}

/// Column-major copy of the training values with labels alongside.
struct Columns {
    cols: Vec<Vec<f64>>,
    labels: Vec<LandCover>,
}

impl Columns {
    fn from_rows<T: Scalar>(feature_count: usize, rows: &[Sample<T>]) -> Result<Columns> {
        let mut cols = vec![Vec::with_capacity(rows.len()); feature_count];
        for (i, row) in rows.iter().enumerate() {
            if row.values.len() != feature_count {
                return Err(Error::FeatureCount {
                    expected: feature_count,
                    actual: row.values.len(),
                });
            }
            for (f, v) in row.values.iter().enumerate() {
                let v = v.to_f64_lossless();
                if !v.is_finite() {
                    return Err(Error::Training(format!(
                        "row {i} feature {f} is not finite"
                    )));
                }
                cols[f].push(v);
            }
        }
        Ok(Columns {
            cols,
            labels: rows.iter().map(|r| r.label).collect(),
        })
    }

    fn counts(&self, idx: &[usize]) -> [u64; 2] {
        let mut c = [0u64; 2];
        for &i in idx {
            c[self.labels[i].index()] += 1;
        }
        c
    }

    /// First-best candidate of one feature, scanning thresholds upward.
    fn best_for_feature(
        &self,
        feature: usize,
        idx: &[usize],
        parent: [u64; 2],
        min_leaf: usize,
    ) -> Option<Candidate> {
        let col = &self.cols[feature];
        let mut sorted: Vec<(f64, LandCover)> =
            idx.iter().map(|&i| (col[i], self.labels[i])).collect();
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let mut left = [0u64; 2];
        let mut best: Option<Candidate> = None;
        for i in 1..n {
            left[sorted[i - 1].1.index()] += 1;
            let (a, b) = (sorted[i - 1].0, sorted[i].0);
            if a == b || i < min_leaf || n - i < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let score = Score::new(left, right);
            if best.as_ref().is_none_or(|c| score.beats(&c.score)) {
                best = Some(Candidate {
                    feature,
                    threshold: midpoint(a, b),
                    left,
                    right,
                    score,
                });
            }
        }
        best
    }

    fn search(&self, idx: &[usize], params: &CartParams) -> Option<Candidate> {
        let parent = self.counts(idx);
        if parent[0] == 0 || parent[1] == 0 {
            return None;
        }
        let features = self.cols.len();
        let per_feature: Vec<Option<Candidate>> = if idx.len() * features >= PARALLEL_WORK {
            (0..features)
                .into_par_iter()
                .map(|f| self.best_for_feature(f, idx, parent, params.min_samples_leaf))
                .collect()
        } else {
            (0..features)
                .map(|f| self.best_for_feature(f, idx, parent, params.min_samples_leaf))
                .collect()
        };
        // Feature order reduction; later features must be strictly better.
        let best = per_feature.into_iter().flatten().reduce(|best, c| {
            if c.score.beats(&best.score) {
                c
            } else {
                best
            }
        })?;
        (best.decrease() >= params.min_impurity_decrease).then_some(best)
    }
}

/// Best split of `rows`, or `None` when the node should be a leaf: the node
/// is pure, no candidate satisfies `min_samples_leaf`, or the best decrease
/// is below `min_impurity_decrease`.
pub fn best_split<T: Scalar>(
    feature_count: usize,
    rows: &[Sample<T>],
    params: &CartParams,
) -> Result<Option<SplitChoice>> {
    params.validate()?;
    if rows.len() < params.min_samples_split {
        return Ok(None);
    }
    let cols = Columns::from_rows(feature_count, rows)?;
    let idx: Vec<usize> = (0..rows.len()).collect();
    Ok(cols.search(&idx, params).map(|c| SplitChoice {
        feature: c.feature,
        threshold: c.threshold,
        decrease: c.decrease(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    feature_count: usize,
    params: CartParams,
    root: TreeNode,
}

struct Builder<'a> {
    cols: &'a Columns,
    params: &'a CartParams,
    leaf_of_row: Vec<usize>,
    leaves: usize,
}

impl Builder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> TreeNode {
        let counts = self.cols.counts(idx);
        let split = if depth >= self.params.max_depth || idx.len() < self.params.min_samples_split {
            None
        } else {
            self.cols.search(idx, self.params)
        };
        let Some(split) = split else {
            for &i in idx.iter() {
                self.leaf_of_row[i] = self.leaves;
            }
            self.leaves += 1;
            return TreeNode::leaf(counts);
        };
        let col = &self.cols.cols[split.feature];
        let mut mid = 0;
        for k in 0..idx.len() {
            if col[idx[k]] <= split.threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        // keep row order stable within each child
        let (l, r) = idx.split_at_mut(mid);
        l.sort_unstable();
        r.sort_unstable();
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

impl DecisionTree {
    /// Trains a tree by recursive partitioning.
    pub fn fit<T: Scalar>(table: &TrainingTable<T>, params: &CartParams) -> Result<DecisionTree> {
        Self::fit_with_leaves(table, params).map(|(tree, _)| tree)
    }

    /// Like [`fit`](Self::fit), also returning the leaf (in depth-first,
    /// left-first order) that each training row reached.
    pub fn fit_with_leaves<T: Scalar>(
        table: &TrainingTable<T>,
        params: &CartParams,
    ) -> Result<(DecisionTree, Vec<usize>)> {
        params.validate()?;
        if table.is_empty() {
            return Err(Error::Training("training table is empty".into()));
        }
        if table.feature_count() == 0 {
            return Err(Error::Training("training table has no features".into()));
        }
        if table.len() > MAX_TRAINING_ROWS {
            return Err(Error::Training(format!(
                "{} rows exceed the limit of {MAX_TRAINING_ROWS}",
                table.len()
            )));
        }
        let counts = table.label_counts();
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::Training(format!(
                "both labels are required, got {} non-urban and {} urban rows",
                counts[0], counts[1]
            )));
        }
        let cols = Columns::from_rows(table.feature_count(), table.rows())?;
        let mut idx: Vec<usize> = (0..table.len()).collect();
        let mut builder = Builder {
            cols: &cols,
            params,
            leaf_of_row: vec![0; table.len()],
            leaves: 0,
        };
        let root = builder.build(&mut idx, 0);
        let tree = DecisionTree {
            feature_count: table.feature_count(),
            params: *params,
            root,
        };
        Ok((tree, builder.leaf_of_row))
    }

    /// Assembles a tree from parts, checking every structural invariant.
    pub fn from_parts(feature_count: usize, params: CartParams, root: TreeNode) -> Result<Self> {
        let tree = DecisionTree {
            feature_count,
            params,
            root,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn params(&self) -> &CartParams {
        &self.params
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    fn check_input<T: Scalar>(&self, features: &[T]) -> Result<()> {
        if features.len() != self.feature_count {
            return Err(Error::FeatureCount {
                expected: self.feature_count,
                actual: features.len(),
            });
        }
        if let Some(f) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { feature: f });
        }
        Ok(())
    }

    /// Routes a validated vector; returns (leaf ordinal, leaf class).
    pub(crate) fn route<T: Scalar>(&self, features: &[T]) -> (usize, LandCover) {
        let mut node = &self.root;
        let mut ordinal = 0;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return (ordinal, *class),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if features[*feature].to_f64_lossless() <= *threshold {
                        node = left;
                    } else {
                        ordinal += left.leaf_count();
                        node = right;
                    }
                }
            }
        }
    }

    pub fn predict<T: Scalar>(&self, features: &[T]) -> Result<LandCover> {
        self.check_input(features)?;
        Ok(self.route(features).1)
    }

    /// Depth-first ordinal of the leaf `features` lands in.
    pub fn leaf_index<T: Scalar>(&self, features: &[T]) -> Result<usize> {
        self.check_input(features)?;
        Ok(self.route(features).0)
    }

    fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| Error::InvalidTree(e.to_string()))?;
        if self.feature_count == 0 {
            return Err(Error::InvalidTree("feature_count must be positive".into()));
        }
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            match node {
                TreeNode::Leaf { class, counts } => {
                    if *class != majority(*counts) {
                        return Err(Error::InvalidTree(format!(
                            "leaf class {} is not the majority of counts {counts:?}",
                            class.code()
                        )));
                    }
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= self.feature_count {
                        return Err(Error::InvalidTree(format!(
                            "split feature {feature} >= feature_count {}",
                            self.feature_count
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::InvalidTree("non-finite threshold".into()));
                    }
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        if self.depth() > self.params.max_depth {
            return Err(Error::InvalidTree(format!(
                "depth {} exceeds max_depth {}",
                self.depth(),
                self.params.max_depth
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json("tree", e))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<DecisionTree> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let tree = DecisionTree::deserialize(&mut de).map_err(|e| Error::json("tree", e))?;
        de.end().map_err(|e| Error::json("tree", e))?;
        tree.validate()?;
        Ok(tree)
    }
}

/// Trains a tree; see [`DecisionTree::fit`].
pub fn train<T: Scalar>(table: &TrainingTable<T>, params: &CartParams) -> Result<DecisionTree> {
    DecisionTree::fit(table, params)
}
