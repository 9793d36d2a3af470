//! Summary statistics and the two significance tests used to compare methods.

mod anova;
mod mann_whitney;
mod special;

use alloc::string::String;
use alloc::vec::Vec;

pub use anova::{anova_oneway, AnovaResult};
pub use mann_whitney::{mann_whitney_two_sided, mann_whitney_with, MannWhitney, MwMethod, EXACT_LIMIT};
pub use special::{f_survival, regularized_incomplete_beta};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attention {
    Attentive,
    Inattentive,
}

impl Attention {
    pub fn name(self) -> &'static str {
        match self {
            Attention::Attentive => "attentive",
            Attention::Inattentive => "inattentive",
        }
    }
}

/// One method's scores for one attention class.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    pub method: String,
    pub attention: Attention,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Computation {
    Exact,
    NormalApproximation,
}

impl Computation {
    pub fn name(self) -> &'static str {
        match self {
            Computation::Exact => "exact",
            Computation::NormalApproximation => "normal_approximation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    /// Always within `[0, 1]`.
    pub p_value: f64,
    pub method: Computation,
}

/// Middle order statistic; mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Attentive median over inattentive median.
pub fn attn_ratio(attentive_median: f64, inattentive_median: f64) -> Result<f64> {
    if !(inattentive_median > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(attentive_median / inattentive_median)
}
