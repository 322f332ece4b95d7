//! Quantile bin boundaries per feature.

use crate::table::FeatureTable;

/// Bin code for a missing value.
pub const MISSING_BIN: u16 = u16::MAX;

/// Sorted, distinct boundaries per feature. A value falls in bin
/// `#{b : b <= v}`; a split at boundary `t` sends `v < boundaries[t]` left.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapper {
    pub boundaries: Vec<Vec<f64>>,
}

/// Point strictly above `a` and at most `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

/// Boundaries for one feature from its non-missing values, at most
/// `border_count - 1` of them. With few distinct values every gap gets a
/// midpoint; otherwise cuts sit at the `i·n/border_count` quantile ranks,
/// moved forward past ties.
pub fn feature_boundaries(values: &[f64], border_count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    let mut distinct = v.clone();
    distinct.dedup();
    let max_bins = border_count.max(1);
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = v.len();
    let mut out: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for i in 1..max_bins {
        let mut pos = i * n / max_bins;
        if pos == 0 {
            continue;
        }
        let below = v[pos - 1];
        while pos < n && v[pos] == below {
            pos += 1;
        }
        if pos == n {
            break;
        }
        let b = midpoint(below, v[pos]);
        if out.last().is_none_or(|&last| b > last) {
            out.push(b);
        }
    }
    out
}

impl BinMapper {
    pub fn fit(table: &FeatureTable, border_count: usize) -> BinMapper {
        let boundaries = (0..table.n_cols())
            .map(|c| feature_boundaries(&table.column(c), border_count))
            .collect();
        BinMapper { boundaries }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.boundaries[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, v: f64) -> u16 {
        if v.is_nan() {
            MISSING_BIN
        } else {
            self.boundaries[feature].partition_point(|&b| b <= v) as u16
        }
    }

    /// Column-major bin codes.
    pub fn transform(&self, table: &FeatureTable) -> Vec<Vec<u16>> {
        (0..table.n_cols())
            .map(|c| (0..table.n_rows()).map(|r| self.bin(c, table.value(r, c))).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_examples() {
        assert!(feature_boundaries(&[4.0; 10], 64).is_empty());
        assert_eq!(feature_boundaries(&[3.0, 1.0, 2.0, 2.0], 64), vec![1.5, 2.5]);
        let many: Vec<f64> = (0..10_000).map(|i| i as f64 * 0.37).collect();
        let b = feature_boundaries(&many, 64);
        assert_eq!(b.len(), 63);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert!(feature_boundaries(&[f64::NAN, f64::NAN], 64).is_empty());
    }

    #[test]
    fn heavy_ties_dedupe() {
        let mut v = vec![0.0; 900];
        v.extend((0..100).map(|i| i as f64 + 1.0));
        let b = feature_boundaries(&v, 16);
        assert!(b.len() <= 15);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(b[0], 0.5);
    }

    #[test]
    fn binning_matches_threshold_rule() {
        let m = BinMapper {
            boundaries: vec![vec![1.5, 2.5]],
        };
        assert_eq!(m.bin(0, 1.0), 0);
        assert_eq!(m.bin(0, 1.5), 1);
        assert_eq!(m.bin(0, 9.0), 2);
        assert_eq!(m.bin(0, f64::NAN), MISSING_BIN);
    }
}
