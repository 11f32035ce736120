//! Empirical CDFs.

use serde::Serialize;

use crate::error::{Error, Result};

/// Labels attached to a CDF series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesLabel {
    pub k: usize,
    pub n: usize,
    pub xi: f64,
    pub shadow_sigma_db: f64,
    pub correlated: bool,
}

/// Sorted samples together with their empirical CDF levels `i / n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfSeries {
    pub label: SeriesLabel,
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CdfSeries {
    /// Builds the CDF from unordered samples. The result does not depend on
    /// the order in which samples were collected.
    pub fn from_samples(label: SeriesLabel, mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::config("CDF needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::config("CDF samples must not be NaN"));
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let probabilities = (1..=samples.len()).map(|i| i as f64 / n).collect();
        Ok(CdfSeries {
            label,
            values: samples,
            probabilities,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest sample whose CDF level reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        let idx = ((p.clamp(0.0, 1.0) * n as f64).ceil() as usize).clamp(1, n);
        self.values[idx - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}
