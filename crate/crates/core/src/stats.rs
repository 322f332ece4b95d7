//! Order-independent descriptive statistics shared by the extractors.

use std::collections::BTreeMap;

/// Counts per integer HU value. Moments computed from it do not depend on
/// the order voxels were visited in.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HuHistogram {
    counts: BTreeMap<i16, u64>,
    n: u64,
}

/// Population moments of a HU sample. Empty samples report zeros; constant
/// samples report zero skewness and kurtosis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

impl Moments {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl HuHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, hu: i16) {
        *self.counts.entry(hu).or_insert(0) += 1;
        self.n += 1;
    }

    pub fn merge(&mut self, other: &HuHistogram) {
        for (&v, &c) in &other.counts {
            *self.counts.entry(v).or_insert(0) += c;
        }
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn min(&self) -> Option<i16> {
        self.counts.keys().next().copied()
    }

    pub fn max(&self) -> Option<i16> {
        self.counts.keys().next_back().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i16, u64)> + '_ {
        self.counts.iter().map(|(&v, &c)| (v, c))
    }

    /// Sums run over values relative to the minimum, so a uniform HU shift
    /// leaves every central moment bit-identical.
    pub fn moments(&self) -> Moments {
        let (Some(lo), Some(hi)) = (self.min(), self.max()) else {
            return Moments::default();
        };
        let n = self.n as f64;
        let rel_sum: i128 = self
            .iter()
            .map(|(v, c)| (v as i128 - lo as i128) * c as i128)
            .sum();
        let rel_mean = rel_sum as f64 / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for (v, c) in self.iter() {
            let d = (v as i32 - lo as i32) as f64 - rel_mean;
            let d2 = d * d;
            let c = c as f64;
            m2 += c * d2;
            m3 += c * d2 * d;
            m4 += c * d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        let (skewness, kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2))
        } else {
            (0.0, 0.0)
        };
        Moments {
            count: self.n,
            min: lo as f64,
            max: hi as f64,
            mean: lo as f64 + rel_mean,
            variance: m2,
            skewness,
            kurtosis,
        }
    }

    /// Nearest-rank percentile: smallest value whose cumulative count reaches
    /// `ceil(p · n)` (at least one).
    pub fn percentile(&self, p: f64) -> Option<i16> {
        if self.n == 0 {
            return None;
        }
        let rank = ((p * self.n as f64).ceil() as u64).clamp(1, self.n);
        let mut cum = 0;
        for (v, c) in self.iter() {
            cum += c;
            if cum >= rank {
                return Some(v);
            }
        }
        self.max()
    }

    /// Counts over fixed-width bins starting at `start`. Values below `start`
    /// are ignored; with `open_top` the last bin takes everything above it,
    /// otherwise the last bin is closed at `start + bins·width`.
    pub fn binned(&self, start: i32, width: i32, bins: usize, open_top: bool) -> Vec<u64> {
        let mut out = vec![0u64; bins];
        let end = start + width * bins as i32;
        for (v, c) in self.iter() {
            let v = v as i32;
            if v < start || (!open_top && v > end) {
                continue;
            }
            let b = (((v - start) / width) as usize).min(bins - 1);
            out[b] += c;
        }
        out
    }
}

/// Shannon entropy in bits of a count vector.
pub fn entropy_bits(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / t;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// Summary of a set of real values, independent of input order. Empty input
/// yields zeros.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = ordered_sum(&v) / n;
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let var = ordered_sum(&sq) / n;
    Summary {
        count: v.len(),
        mean,
        sd: var.sqrt(),
        min: v[0],
        max: v[v.len() - 1],
    }
}

/// Sum after sorting, so permutations of the input give identical bits.
pub fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    ordered_sum(&v)
}

fn ordered_sum(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a + b)
}
