use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, auroc, precision_at_n, Confusion};
use crate::Result;

pub const REPORT_THRESHOLDS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const REPORT_TOP_N: [usize; 7] = [10, 25, 50, 100, 250, 500, 1000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    #[serde(flatten)]
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub n: usize,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub positives: usize,
    pub accuracy: f64,
    pub auroc: f64,
    pub confusion: Vec<ThresholdRow>,
    pub precision_at: Vec<PrecisionRow>,
}

impl EvalReport {
    /// Accuracy at 0.5, AUROC, confusion counts per threshold and
    /// precision@N for every standard N not larger than the input.
    pub fn compute(scores: &[f64], labels: &[bool]) -> Result<Self> {
        let auroc = auroc(scores, labels)?;
        let accuracy = accuracy(scores, labels, 0.5)?;
        let confusion = REPORT_THRESHOLDS
            .iter()
            .map(|&threshold| ThresholdRow {
                threshold,
                confusion: Confusion::at(scores, labels, threshold),
            })
            .collect();
        let precision_at = REPORT_TOP_N
            .iter()
            .filter(|&&n| n <= scores.len())
            .map(|&n| {
                Ok(PrecisionRow {
                    n,
                    precision: precision_at_n(scores, labels, n)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(EvalReport {
            n: scores.len(),
            positives: labels.iter().filter(|&&l| l).count(),
            accuracy,
            auroc,
            confusion,
            precision_at,
        })
    }
}
