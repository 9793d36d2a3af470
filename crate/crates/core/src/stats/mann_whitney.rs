//! Two-sided Mann–Whitney U test.

use alloc::vec;
use alloc::vec::Vec;

use super::{Computation, TestResult};
use crate::metrics::average_ranks;
use crate::{Error, Result};

/// Largest `n + m` for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MwMethod {
    /// Exact for small tie-free samples, otherwise the normal approximation.
    #[default]
    Auto,
    /// Exact null distribution; fails on ties.
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    pub u_x: f64,
    pub u_y: f64,
    /// `statistic` is `u_x`.
    pub test: TestResult,
}

/// Two-sided test of `x` against `y`, choosing the computation automatically.
pub fn mann_whitney_two_sided(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    mann_whitney_with(x, y, MwMethod::Auto)
}

pub fn mann_whitney_with(x: &[f64], y: &[f64], method: MwMethod) -> Result<MannWhitney> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = x.iter().chain(y).position(|v| v.is_nan()) {
        return Err(Error::NonFiniteValue { index: i });
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum_x: f64 = ranks[..n].iter().sum();
    let u_x = rank_sum_x - (n * (n + 1)) as f64 / 2.0;
    let u_y = (n * m) as f64 - u_x;
    let ties = tie_groups(&pooled);
    let has_ties = ties.iter().any(|&t| t > 1);

    let exact = match method {
        MwMethod::Auto => n + m <= EXACT_LIMIT && !has_ties,
        MwMethod::Exact => {
            if has_ties {
                return Err(Error::InvalidParameter("exact Mann-Whitney requires tie-free samples".into()));
            }
            true
        }
        MwMethod::NormalApproximation => false,
    };
    let (p_value, computation) = if exact {
        (exact_p(u_x, n, m), Computation::Exact)
    } else {
        (normal_p(u_x, n, m, &ties), Computation::NormalApproximation)
    };
    Ok(MannWhitney {
        u_x,
        u_y,
        test: TestResult {
            statistic: u_x,
            p_value,
            method: computation,
        },
    })
}

fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i + 1;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Number of arrangements giving each `U` in `0..=n*m`, by the recurrence
/// `c(n, m, u) = c(n - 1, m, u - m) + c(n, m - 1, u)`.
fn u_counts(n: usize, m: usize) -> Vec<f64> {
    // table[j][u] holds counts for (current i, j)
    let max_u = n * m;
    let mut table: Vec<Vec<f64>> = (0..=m).map(|_| vec![0.0; max_u + 1]).collect();
    for row in table.iter_mut() {
        row[0] = 1.0;
    }
    for _i in 1..=n {
        let mut next: Vec<Vec<f64>> = (0..=m).map(|_| vec![0.0; max_u + 1]).collect();
        next[0][0] = 1.0;
        for j in 1..=m {
            for u in 0..=max_u {
                let from_x = if u >= j { table[j][u - j] } else { 0.0 };
                next[j][u] = from_x + next[j - 1][u];
            }
        }
        table = next;
    }
    table.swap_remove(m)
}

fn exact_p(u: f64, n: usize, m: usize) -> f64 {
    let counts = u_counts(n, m);
    let total: f64 = counts.iter().sum();
    let k = libm::round(u) as usize;
    let lower: f64 = counts[..=k].iter().sum();
    let upper: f64 = counts[k..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_p(u: f64, n: usize, m: usize, ties: &[usize]) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = if total > 1.0 {
        nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)))
    } else {
        0.0
    };
    if !(variance > 0.0) {
        return 1.0;
    }
    let z = (libm::fabs(u - nf * mf / 2.0) - 0.5).max(0.0) / libm::sqrt(variance);
    libm::erfc(z / core::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_example() {
        let r = mann_whitney_two_sided(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_x, 0.0);
        assert_eq!(r.u_y, 4.0);
        assert_eq!(r.test.method, Computation::Exact);
        assert!((r.test.p_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 5.0, 2.0, 8.0];
        let r = mann_whitney_two_sided(&x, &x).unwrap();
        assert_eq!(r.u_x, 8.0);
        assert_eq!(r.u_y, 8.0);
        assert_eq!(r.test.p_value, 1.0);
    }

    #[test]
    fn counts_sum_to_binomial() {
        let c = u_counts(5, 7);
        assert_eq!(c.iter().sum::<f64>(), 792.0);
        assert_eq!(c.len(), 36);
        // symmetric around nm/2
        for u in 0..c.len() {
            assert_eq!(c[u], c[c.len() - 1 - u]);
        }
    }

    #[test]
    fn asymptotic_reference_value() {
        // reference from an independent statistics library, continuity and tie corrected
        let x = [1.5, 2.0, 2.0, 3.0, 7.0, 8.0, 9.0];
        let y = [2.0, 4.0, 4.0, 5.0, 6.0, 10.0, 11.0, 12.0];
        let r = mann_whitney_two_sided(&x, &y).unwrap();
        assert_eq!(r.test.method, Computation::NormalApproximation);
        assert_eq!(r.u_x, 17.0);
        assert!((r.test.p_value - 0.22223742800515633).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(mann_whitney_two_sided(&[], &[1.0]).unwrap_err(), Error::EmptyInput);
        assert!(mann_whitney_with(&[1.0, 2.0], &[2.0, 3.0], MwMethod::Exact).is_err());
    }
}
