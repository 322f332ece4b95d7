//! Stratified folds and repeated cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auprc, auroc, confusion, ConfusionCounts};
use crate::error::{Error, Result};
use crate::gbdt::{self, GBDTConfig, Model};
use crate::registry::{CALCIUM_PREFIX, CLINICAL_PREFIX, FAT_PREFIX};
use crate::shap::{select_features_cv, SelectionConfig};
use crate::table::FeatureTable;

/// Seed for work unit `index` under `master` (SplitMix64 finalizer), so
/// every unit's stream is fixed regardless of scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    /// Row indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold id of every row.
    pub fn assignment(&self, n_rows: usize) -> Vec<usize> {
        let mut a = vec![usize::MAX; n_rows];
        for (f, rows) in self.folds.iter().enumerate() {
            for &r in rows {
                a[r] = f;
            }
        }
        a
    }

    /// All rows outside fold `f`, ascending.
    pub fn training_rows(&self, f: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, r)| r.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Per-class shuffle, then round-robin dealing. Negatives continue the deal
/// where positives stopped, which keeps fold sizes within one row.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    for count in [pos.len(), neg.len()] {
        if count < k {
            return Err(Error::ClassCountBelowK { count, k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, &r) in pos.iter().enumerate() {
        folds[i % k].push(r);
    }
    let offset = pos.len() % k;
    for (i, &r) in neg.iter().enumerate() {
        folds[(offset + i) % k].push(r);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { seed, folds })
}

/// Column sets of the three nested models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGroup {
    #[serde(rename = "clinical")]
    Clinical,
    #[serde(rename = "clinical+calcium")]
    ClinicalCalcium,
    #[serde(rename = "clinical+calcium+fat")]
    All,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [FeatureGroup::Clinical, FeatureGroup::ClinicalCalcium, FeatureGroup::All];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Clinical => "clinical",
            FeatureGroup::ClinicalCalcium => "clinical+calcium",
            FeatureGroup::All => "clinical+calcium+fat",
        }
    }

    pub fn prefixes(self) -> &'static [&'static str] {
        match self {
            FeatureGroup::Clinical => &[CLINICAL_PREFIX],
            FeatureGroup::ClinicalCalcium => &[CLINICAL_PREFIX, CALCIUM_PREFIX],
            FeatureGroup::All => &[CLINICAL_PREFIX, CALCIUM_PREFIX, FAT_PREFIX],
        }
    }

    pub fn includes(self, column: &str) -> bool {
        self.prefixes().iter().any(|p| column.starts_with(p))
    }

    /// Matching columns of `table`, in table order.
    pub fn columns(self, table: &FeatureTable) -> Vec<String> {
        table.columns().iter().filter(|c| self.includes(c)).cloned().collect()
    }
}

impl std::str::FromStr for FeatureGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown feature group {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub repeats: usize,
    pub threshold: f64,
    pub master_seed: u64,
    /// The early-stopping set is one of this many stratified parts of the
    /// training folds.
    pub early_stopping_folds: usize,
    /// Nested SHAP selection inside each outer training split.
    pub selection: Option<SelectionConfig>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            repeats: 1000,
            threshold: 0.5,
            master_seed: 0,
            early_stopping_folds: 5,
            selection: None,
        }
    }
}

/// Trains on `train_rows` of `table`. With early stopping on, one stratified
/// part of those rows is held out for it; nothing outside `train_rows` is read.
pub fn fit_fold(
    table: &FeatureTable,
    train_rows: &[usize],
    config: &GBDTConfig,
    seed: u64,
    early_stopping_folds: usize,
) -> Result<Model> {
    let train = table.subset_rows(train_rows);
    let cfg = GBDTConfig {
        seed: derive_seed(seed, 1),
        ..config.clone()
    };
    if !config.early_stopping || early_stopping_folds < 2 {
        return gbdt::fit(&train, None, &cfg);
    }
    let inner = stratified_kfold(train.labels(), early_stopping_folds, derive_seed(seed, 0)).map_err(|e| {
        Error::DegenerateFolds(format!("cannot carve an early-stopping split: {e}"))
    })?;
    let fit_rows = inner.training_rows(0);
    gbdt::fit(&train.subset_rows(&fit_rows), Some(&train.subset_rows(&inner.folds[0])), &cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Unbiased sample standard deviation across repeats (0 for one repeat).
    pub sd: Option<f64>,
    /// Repeats where the metric was defined.
    pub n: usize,
}

pub fn summarize_metric(values: &[Option<f64>]) -> MetricSummary {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return MetricSummary { mean: None, sd: None, n: 0 };
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() < 2 {
        0.0
    } else {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MetricSummary {
        mean: Some(mean),
        sd: Some(sd),
        n: v.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    /// Trees kept per fold.
    pub trees_per_fold: Vec<usize>,
    /// Features chosen per fold by nested selection (empty without selection).
    pub selected_features: Vec<Vec<String>>,
    /// Out-of-fold probabilities in table row order.
    #[serde(skip)]
    pub oof_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub accuracy: MetricSummary,
    pub f1: MetricSummary,
    pub auroc: MetricSummary,
    pub auprc: MetricSummary,
}

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub report_version: u32,
    pub group: FeatureGroup,
    pub columns: Vec<String>,
    pub n_rows: usize,
    pub n_positive: usize,
    pub k: usize,
    pub repeats: usize,
    pub threshold: f64,
    pub master_seed: u64,
    pub aggregate: Aggregate,
    pub per_repeat: Vec<RepeatResult>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn run_repeat(table: &FeatureTable, gbdt: &GBDTConfig, cv: &CvConfig, repeat: usize) -> Result<RepeatResult> {
    let seed = derive_seed(cv.master_seed, repeat as u64);
    let plan = stratified_kfold(table.labels(), cv.k, seed)?;
    let mut oof = vec![f64::NAN; table.n_rows()];
    let mut trees_per_fold = Vec::with_capacity(cv.k);
    let mut selected_features = Vec::new();
    for (f, valid_rows) in plan.folds.iter().enumerate() {
        let fold_seed = derive_seed(seed, f as u64 + 1);
        let train_rows = plan.training_rows(f);
        let fold_table = match &cv.selection {
            Some(sel) => {
                let ranking = select_features_cv(&table.subset_rows(&train_rows), gbdt, sel, derive_seed(fold_seed, 7))?;
                selected_features.push(ranking.selected.clone());
                table.select_columns(&ranking.selected)?
            }
            None => table.clone(),
        };
        let model = fit_fold(&fold_table, &train_rows, gbdt, fold_seed, cv.early_stopping_folds)?;
        trees_per_fold.push(model.trees.len());
        let scores = model.predict_table(&fold_table.subset_rows(valid_rows))?;
        for (&r, s) in valid_rows.iter().zip(scores) {
            oof[r] = s;
        }
    }
    let labels = table.labels();
    let counts = confusion(&oof, labels, cv.threshold)?;
    Ok(RepeatResult {
        repeat,
        seed,
        counts,
        sensitivity: counts.sensitivity(),
        specificity: counts.specificity(),
        accuracy: counts.accuracy(),
        f1: counts.f1(),
        auroc: auroc(&oof, labels).ok(),
        auprc: auprc(&oof, labels).ok(),
        trees_per_fold,
        selected_features,
        oof_scores: oof,
    })
}

/// Repeated stratified k-fold CV of one feature group. Repeats run in
/// parallel; each derives its folds and model seeds from the master seed and
/// its own index, so the report does not depend on the thread count.
pub fn repeated_cv(table: &FeatureTable, gbdt: &GBDTConfig, cv: &CvConfig, group: FeatureGroup) -> Result<MetricsReport> {
    if cv.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    gbdt.validate()?;
    let columns = group.columns(table);
    if columns.is_empty() {
        return Err(Error::InvalidConfig(format!("table has no {} columns", group.name())));
    }
    let t = table.select_columns(&columns)?;
    let per_repeat = gbdt::with_threads(gbdt.threads, || {
        (0..cv.repeats)
            .into_par_iter()
            .map(|r| run_repeat(&t, gbdt, cv, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let pick = |f: fn(&RepeatResult) -> Option<f64>| summarize_metric(&per_repeat.iter().map(f).collect::<Vec<_>>());
    let aggregate = Aggregate {
        sensitivity: pick(|r| r.sensitivity),
        specificity: pick(|r| r.specificity),
        accuracy: pick(|r| r.accuracy),
        f1: pick(|r| r.f1),
        auroc: pick(|r| r.auroc),
        auprc: pick(|r| r.auprc),
    };
    Ok(MetricsReport {
        report_version: REPORT_VERSION,
        group,
        columns,
        n_rows: t.n_rows(),
        n_positive: t.class_counts().1,
        k: cv.k,
        repeats: cv.repeats,
        threshold: cv.threshold,
        master_seed: cv.master_seed,
        aggregate,
        per_repeat,
    })
}
