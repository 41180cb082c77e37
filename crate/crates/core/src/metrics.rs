//! Relative scheduling error and report statistics.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::Time;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("reference makespan must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("bounds are inverted: lb {lb} > ub {ub}")]
    InvertedBounds { lb: Time, ub: Time },
}

/// `(achieved / reference - 1) * 100`.
pub fn relative_error(achieved: Time, reference: f64) -> Result<f64, MetricError> {
    if !(reference > 0.0) {
        return Err(MetricError::NonPositiveReference(reference));
    }
    Ok((achieved as f64 / reference - 1.0) * 100.0)
}

/// Either a proven optimum or a `[lb, ub]` bracket scored at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceMakespan {
    Exact { optimum: Time },
    Bounds { lb: Time, ub: Time },
}

impl ReferenceMakespan {
    pub fn bounds(lb: Time, ub: Time) -> Result<Self, MetricError> {
        if lb > ub {
            return Err(MetricError::InvertedBounds { lb, ub });
        }
        Ok(ReferenceMakespan::Bounds { lb, ub })
    }

    pub fn value(&self) -> f64 {
        match *self {
            ReferenceMakespan::Exact { optimum } => optimum as f64,
            ReferenceMakespan::Bounds { lb, ub } => (lb as f64 + ub as f64) / 2.0,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ReferenceMakespan::Exact { .. })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    math::sqrt(xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    Summary { count: xs.len(), mean: mean(xs), std: std_dev(xs) }
}

/// Fraction by which `after` reduced `before`; positive means improvement.
pub fn relative_improvement(before: f64, after: f64) -> f64 {
    (before - after) / before
}

pub fn collect_errors<I: IntoIterator<Item = (Time, f64)>>(pairs: I) -> Result<Vec<f64>, MetricError> {
    pairs.into_iter().map(|(a, r)| relative_error(a, r)).collect()
}
