//! Paired model comparison (DeLong, McNemar) and cohort-table tests
//! (Welch t, Pearson chi-square).

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};
use statrs::function::erf::erfc;

use super::metrics::auroc;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    /// Estimated variance of `auc_a - auc_b`.
    pub variance: f64,
    pub z: f64,
    pub p: f64,
}

/// Two-sided p-value of a standard normal statistic.
fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Upper tail of chi-square with one degree of freedom.
fn chi2_1_sf(stat: f64) -> f64 {
    erfc((stat / 2.0).sqrt()).min(1.0)
}

/// Structural components: for each positive, the fraction of negatives it
/// outscores (ties ½); for each negative, the fraction of positives
/// outscoring it.
fn placements(scores: &[f64], labels: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        if y == 1 {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    let mut sorted_pos = pos.clone();
    let mut sorted_neg = neg.clone();
    sorted_pos.sort_by(f64::total_cmp);
    sorted_neg.sort_by(f64::total_cmp);
    let frac = |sorted: &[f64], x: f64| {
        let below = sorted.partition_point(|&v| v < x);
        let not_above = sorted.partition_point(|&v| v <= x);
        (2 * below + (not_above - below)) as f64 / (2 * sorted.len()) as f64
    };
    let v10 = pos.iter().map(|&x| frac(&sorted_neg, x)).collect();
    let v01 = neg.iter().map(|&y| 1.0 - frac(&sorted_pos, y)).collect();
    (v10, v01)
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1) as f64
}

/// DeLong comparison of two correlated AUROCs on the same rows.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[u8]) -> Result<DelongResult> {
    if scores_a.len() != labels.len() || scores_b.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} / {} scores for {} labels",
            scores_a.len(),
            scores_b.len(),
            labels.len()
        )));
    }
    let auc_a = auroc(scores_a, labels)?;
    let auc_b = auroc(scores_b, labels)?;
    let (a10, a01) = placements(scores_a, labels);
    let (b10, b01) = placements(scores_b, labels);
    let (m, n) = (a10.len() as f64, a01.len() as f64);
    let s10 = covariance(&a10, &a10) + covariance(&b10, &b10) - 2.0 * covariance(&a10, &b10);
    let s01 = covariance(&a01, &a01) + covariance(&b01, &b01) - 2.0 * covariance(&a01, &b01);
    let variance = (s10 / m + s01 / n).max(0.0);
    let diff = auc_a - auc_b;
    let (z, p) = if variance > 0.0 {
        let z = diff / variance.sqrt();
        (z, normal_two_sided(z))
    } else if diff == 0.0 {
        (0.0, 1.0)
    } else {
        (diff.signum() * f64::INFINITY, 0.0)
    };
    Ok(DelongResult {
        auc_a,
        auc_b,
        variance,
        z,
        p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Rows model A gets right and model B gets wrong.
    pub b: u64,
    /// Rows model B gets right and model A gets wrong.
    pub c: u64,
    /// Continuity-corrected chi-square statistic.
    pub statistic: f64,
    pub p: f64,
    /// Whether the exact binomial branch (b + c < 25) produced `p`.
    pub exact: bool,
}

pub fn mcnemar_test(preds_a: &[u8], preds_b: &[u8], labels: &[u8]) -> Result<McNemarResult> {
    if preds_a.len() != labels.len() || preds_b.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} / {} predictions for {} labels",
            preds_a.len(),
            preds_b.len(),
            labels.len()
        )));
    }
    let (mut b, mut c) = (0u64, 0u64);
    for ((&pa, &pb), &y) in preds_a.iter().zip(preds_b).zip(labels) {
        match (pa == y, pb == y) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let n = b + c;
    let statistic = if n == 0 {
        0.0
    } else {
        let d = (b.abs_diff(c) as f64 - 1.0).max(0.0);
        d * d / n as f64
    };
    let exact = n < 25;
    let p = if n == 0 {
        1.0
    } else if exact {
        let dist = Binomial::new(0.5, n).expect("valid binomial");
        (2.0 * dist.cdf(b.min(c))).min(1.0)
    } else {
        chi2_1_sf(statistic)
    };
    Ok(McNemarResult {
        b,
        c,
        statistic,
        p,
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test with Satterthwaite degrees of freedom.
/// Two constant groups give p = 1 when equal and p = 0 otherwise.
pub fn welch_ttest(x: &[f64], y: &[f64]) -> Result<TTestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::LengthMismatch(format!(
            "t-test needs at least 2 values per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (ax, ay) = (vx / nx, vy / ny);
    let se2 = ax + ay;
    if se2 == 0.0 {
        let df = nx + ny - 2.0;
        return Ok(if mx == my {
            TTestResult { t: 0.0, df, p: 1.0 }
        } else {
            TTestResult {
                t: (mx - my).signum() * f64::INFINITY,
                df,
                p: 0.0,
            }
        });
    }
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2 / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTestResult { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p: f64,
}

/// Pearson chi-square on a 2×2 table without continuity correction. A zero
/// row or column margin gives χ² = 0, p = 1.
pub fn chi2_test(table: [[u64; 2]; 2]) -> ChiSquareResult {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let n = rows[0] + rows[1];
    if rows.contains(&0) || cols.contains(&0) {
        return ChiSquareResult { statistic: 0.0, p: 1.0 };
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n as f64;
            let d = table[i][j] as f64 - e;
            stat += d * d / e;
        }
    }
    ChiSquareResult {
        statistic: stat,
        p: chi2_1_sf(stat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delong_self_comparison() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.7, 0.2];
        let y = [0, 0, 1, 1, 1, 0];
        let r = delong_test(&s, &s, &y).unwrap();
        assert_eq!((r.z, r.p), (0.0, 1.0));
    }

    #[test]
    fn delong_extremes_and_antisymmetry() {
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let good: Vec<f64> = (0..20).map(|i| (i % 2) as f64 + i as f64 * 0.01).collect();
        let bad: Vec<f64> = good.iter().map(|v| -v).collect();
        let r = delong_test(&good, &bad, &y).unwrap();
        assert_eq!((r.auc_a, r.auc_b), (1.0, 0.0));
        assert!(r.p < 0.01);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = y.iter().map(|&l| l as f64 + rng.random::<f64>() * 1.5).collect();
        let b: Vec<f64> = y.iter().map(|&l| l as f64 * 0.3 + rng.random::<f64>()).collect();
        let ab = delong_test(&a, &b, &y).unwrap();
        let ba = delong_test(&b, &a, &y).unwrap();
        assert_eq!(ab.z, -ba.z);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn mcnemar_examples() {
        let y = vec![1u8; 20];
        let mut a = vec![1u8; 20];
        let mut b = vec![1u8; 20];
        assert_eq!(mcnemar_test(&a, &b, &y).unwrap().p, 1.0);
        for v in a.iter_mut().take(15) {
            *v = 0;
        }
        for v in b.iter_mut().skip(15) {
            *v = 0;
        }
        // b = 5 (A right, B wrong), c = 15
        let r = mcnemar_test(&a, &b, &y).unwrap();
        assert_eq!((r.b, r.c), (5, 15));
        assert_eq!(r.statistic, 4.05);
        assert!(r.exact);
        let r = mcnemar_test(&[1, 1, 0, 0, 0], &[0, 0, 1, 1, 1], &[1; 5]).unwrap();
        assert_eq!((r.b, r.c), (2, 3));
        assert!(r.exact);
        // exact: 2 · P(X ≤ 2), X ~ Bin(5, ½) = 2 · 16/32
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mcnemar_large_sample_branch() {
        let n = 60;
        let y = vec![0u8; n];
        let a: Vec<u8> = (0..n).map(|i| (i < 10) as u8).collect();
        let b: Vec<u8> = (0..n).map(|i| (i >= 10 && i < 40) as u8).collect();
        let r = mcnemar_test(&a, &b, &y).unwrap();
        assert_eq!((r.b, r.c), (30, 10));
        assert!(!r.exact);
        assert_eq!(r.statistic, 19.0 * 19.0 / 40.0);
        assert!((r.p - 0.002663119259138558).abs() < 1e-9);
    }

    #[test]
    fn welch_examples() {
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 3.674).abs() < 1e-3);
        assert!((r.df - 4.0).abs() < 1e-12);
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert_eq!(welch_ttest(&[2.0, 2.0], &[2.0, 2.0]).unwrap().p, 1.0);
        assert_eq!(welch_ttest(&[2.0, 2.0], &[3.0, 3.0]).unwrap().p, 0.0);
        assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn chi_square_examples() {
        let r = chi2_test([[10, 10], [10, 10]]);
        assert_eq!((r.statistic, r.p), (0.0, 1.0));
        assert_eq!(chi2_test([[0, 0], [3, 4]]).p, 1.0);
        // [[20,10],[10,20]]: χ² = 60·(400−100)²/(30·30·30·30) = 6.667
        let r = chi2_test([[20, 10], [10, 20]]);
        assert!((r.statistic - 20.0 / 3.0).abs() < 1e-12);
        assert!((r.p - 0.009823).abs() < 1e-5);
    }
}
