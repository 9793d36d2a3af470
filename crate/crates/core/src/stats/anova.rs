//! One-way analysis of variance.

use super::special::f_survival;
use super::{Computation, TestResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    /// `statistic` is F.
    pub test: TestResult,
}

/// Between-group over within-group mean square, with its F-tail p-value.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter("ANOVA needs at least two groups".into()));
    }
    if let Some(i) = groups.iter().position(|g| g.as_ref().len() < 2) {
        return Err(Error::InvalidParameter(alloc::format!(
            "ANOVA group {i} has fewer than two values"
        )));
    }
    let total_n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand_mean = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / total_n as f64;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for g in groups {
        let g = g.as_ref();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (mean - grand_mean) * (mean - grand_mean);
        ssw += g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    if !ssb.is_finite() || !ssw.is_finite() {
        return Err(Error::NonFiniteValue { index: 0 });
    }
    let df_between = groups.len() - 1;
    let df_within = total_n - groups.len();
    let (f, p) = if ssw == 0.0 {
        if ssb == 0.0 {
            return Err(Error::DegenerateAnova);
        }
        (f64::INFINITY, 0.0)
    } else {
        let f = (ssb / df_between as f64) / (ssw / df_within as f64);
        (f, f_survival(f, df_between as f64, df_within as f64)?)
    };
    Ok(AnovaResult {
        df_between,
        df_within,
        ss_between: ssb,
        ss_within: ssw,
        test: TestResult {
            statistic: f,
            p_value: p,
            method: Computation::Exact,
        },
    })
}
