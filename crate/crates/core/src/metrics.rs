//! Accuracy assessment: confusion matrix, overall accuracy, Cohen's kappa,
//! producer's and user's accuracy.

use std::ops::{Add, AddAssign};

use serde::Serialize;

use crate::cart::DecisionTree;
use crate::error::{Error, Result};
use crate::raster::{ByteMap, MapKind, NODATA_CODE};
use crate::samples::TrainingTable;
use crate::scalar::Scalar;

/// `cells[truth][predicted]` pixel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub cells: [[u64; 2]; 2],
}

/// Kappa with a flag for the undefined case `p_e = 1`, reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub value: f64,
    pub degenerate: bool,
}

impl ConfusionMatrix {
    pub fn new(cells: [[u64; 2]; 2]) -> Self {
        ConfusionMatrix { cells }
    }

    pub fn record(&mut self, truth: u8, predicted: u8) {
        self.cells[usize::from(truth)][usize::from(predicted)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        self.cells[0][0] + self.cells[1][1]
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.cells[i][0] + self.cells[i][1]
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.cells[0][j] + self.cells[1][j]
    }

    fn require_total(&self) -> Result<u64> {
        match self.total() {
            0 => Err(Error::Metrics("confusion matrix is empty".into())),
            n => Ok(n),
        }
    }

    pub fn overall_accuracy(&self) -> Result<f64> {
        let n = self.require_total()?;
        Ok(self.trace() as f64 / n as f64)
    }

    /// `(p_o - p_e) / (1 - p_e)`, evaluated as
    /// `(N * trace - sum r_i c_i) / (N^2 - sum r_i c_i)` in integers.
    pub fn kappa(&self) -> Result<Kappa> {
        let n = u128::from(self.require_total()?);
        let chance: u128 = (0..2)
            .map(|i| u128::from(self.row_sum(i)) * u128::from(self.col_sum(i)))
            .sum();
        let den = n * n - chance;
        if den == 0 {
            return Ok(Kappa {
                value: 0.0,
                degenerate: true,
            });
        }
        let num = (n * u128::from(self.trace())) as i128 - chance as i128;
        Ok(Kappa {
            value: num as f64 / den as f64,
            degenerate: false,
        })
    }

    /// Recall of `class`; `None` when no truth pixels have that class.
    pub fn producer_accuracy(&self, class: usize) -> Option<f64> {
        let r = self.row_sum(class);
        (r > 0).then(|| self.cells[class][class] as f64 / r as f64)
    }

    /// Precision of `class`; `None` when nothing was predicted as it.
    pub fn user_accuracy(&self, class: usize) -> Option<f64> {
        let c = self.col_sum(class);
        (c > 0).then(|| self.cells[class][class] as f64 / c as f64)
    }

    pub fn report(&self) -> Result<MetricsReport> {
        let kappa = self.kappa()?;
        Ok(MetricsReport {
            matrix: self.cells,
            overall_accuracy: self.overall_accuracy()?,
            kappa: kappa.value,
            kappa_degenerate: kappa.degenerate,
            producers: [self.producer_accuracy(0), self.producer_accuracy(1)],
            users: [self.user_accuracy(0), self.user_accuracy(1)],
            valid_pixels: self.total(),
        })
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: ConfusionMatrix) {
        for i in 0..2 {
            for j in 0..2 {
                self.cells[i][j] += rhs.cells[i][j];
            }
        }
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(mut self, rhs: ConfusionMatrix) -> ConfusionMatrix {
        self += rhs;
        self
    }
}

/// JSON accuracy report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub matrix: [[u64; 2]; 2],
    pub overall_accuracy: f64,
    pub kappa: f64,
    pub kappa_degenerate: bool,
    pub producers: [Option<f64>; 2],
    pub users: [Option<f64>; 2],
    pub valid_pixels: u64,
}

/// Tallies predicted against reference classes over jointly valid pixels.
pub fn confusion(pred: &ByteMap, truth: &ByteMap) -> Result<ConfusionMatrix> {
    for (name, m) in [("predicted", pred), ("reference", truth)] {
        if m.kind() != MapKind::ClassMap {
            return Err(Error::Mismatch(format!("{name} map is not a classmap")));
        }
    }
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(Error::Mismatch(format!(
            "predicted map is {}x{}, reference is {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in pred.codes().iter().zip(truth.codes()) {
        if p != NODATA_CODE && t != NODATA_CODE {
            m.record(t, p);
        }
    }
    if m.total() == 0 {
        return Err(Error::Metrics("no jointly valid pixels".into()));
    }
    Ok(m)
}

/// Predicts every row of `table` and tabulates against its label.
pub fn holdout_accuracy<T: Scalar>(
    tree: &DecisionTree,
    table: &TrainingTable<T>,
) -> Result<ConfusionMatrix> {
    if table.feature_count() != tree.feature_count() {
        return Err(Error::FeatureCount {
            expected: tree.feature_count(),
            actual: table.feature_count(),
        });
    }
    if table.is_empty() {
        return Err(Error::Metrics("table is empty".into()));
    }
    let mut m = ConfusionMatrix::default();
    for row in table.rows() {
        m.record(row.label.code(), tree.predict(&row.values)?.code());
    }
    Ok(m)
}
