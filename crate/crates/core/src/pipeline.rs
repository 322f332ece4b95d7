//! Batch pipeline behind the command-line tool: manifest-driven extraction,
//! selection, training, evaluation, comparison, grid search and phantom
//! dataset generation. Every command writes its artifacts plus a
//! `run_summary.json` into the output directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calcium::{calcium_feature_vector, calcium_registry, extract_calcium, CalciumConfig};
use crate::error::{Error, Result};
use crate::eval::cv::{derive_seed, fit_fold, repeated_cv, CvConfig, FeatureGroup, MetricsReport};
use crate::eval::metrics::{pr_curve, roc_curve};
use crate::eval::stat_tests::{delong_test, mcnemar_test, DelongResult, McNemarResult};
use crate::fat::{extract_fat, fat_feature_vector, fat_registry, FatConfig};
use crate::gbdt::{self, GBDTConfig};
use crate::phantom::{generate_phantom, random_phantom_spec, Phantom, PhantomSpec};
use crate::registry::{clinical_columns, full_layout, render_registry, validate_clinical, ClinicalEncoding, CLINICAL_VARIABLES};
use crate::shap::{select_features_cv, SelectionConfig};
use crate::table::{format_value, FeatureTable};
use crate::volume::{load_mask, load_volume, save_mask, save_volume, write_atomic, MaskKind, MaskVolume, Volume};

pub const SUMMARY_VERSION: u32 = 1;

/// Obstructive CAD: CAD-RADS 4A, 4B or 5.
pub fn cad_rads_to_label(category: &str) -> Result<u8> {
    match category.trim() {
        "4A" | "4B" | "5" => Ok(1),
        "0" | "1" | "2" | "3" => Ok(0),
        other => Err(Error::UnknownCadRads(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub k: usize,
    pub repeats: usize,
    pub threshold: f64,
    pub master_seed: u64,
    pub early_stopping_folds: usize,
    /// Run SHAP selection inside every outer training split.
    pub nested_selection: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let cv = CvConfig::default();
        EvaluationConfig {
            k: cv.k,
            repeats: cv.repeats,
            threshold: cv.threshold,
            master_seed: cv.master_seed,
            early_stopping_folds: cv.early_stopping_folds,
            nested_selection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub depths: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub iterations: Vec<usize>,
    /// CV repeats per combination.
    pub repeats: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            depths: vec![4, 6],
            learning_rates: vec![0.01, 0.1],
            iterations: vec![300],
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub scores_a: Option<PathBuf>,
    pub scores_b: Option<PathBuf>,
    pub threshold: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            scores_a: None,
            scores_b: None,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomDatasetConfig {
    pub patients: usize,
    pub max_lesions: usize,
    pub seed: u64,
}

impl Default for PhantomDatasetConfig {
    fn default() -> Self {
        PhantomDatasetConfig {
            patients: 20,
            max_lesions: 5,
            seed: 0,
        }
    }
}

/// Everything a run needs. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    /// Feature table read by select/train/evaluate/gridsearch.
    pub features: Option<PathBuf>,
    /// Restrict training to these columns (one per line), e.g. a selection result.
    pub selected_features: Option<PathBuf>,
    pub group: FeatureGroup,
    pub out_dir: PathBuf,
    pub calcium: CalciumConfig,
    pub fat: FatConfig,
    pub gbdt: GBDTConfig,
    pub selection: SelectionConfig,
    pub evaluation: EvaluationConfig,
    pub gridsearch: GridConfig,
    pub compare: CompareConfig,
    pub phantom: PhantomDatasetConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: None,
            features: None,
            selected_features: None,
            group: FeatureGroup::All,
            out_dir: PathBuf::from("out"),
            calcium: CalciumConfig::default(),
            fat: FatConfig::default(),
            gbdt: GBDTConfig::default(),
            selection: SelectionConfig::default(),
            evaluation: EvaluationConfig::default(),
            gridsearch: GridConfig::default(),
            compare: CompareConfig::default(),
            phantom: PhantomDatasetConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Toml {
            path: origin.to_path_buf(),
            source: e,
        })?;
        let base = origin.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.manifest,
            &mut self.features,
            &mut self.selected_features,
            &mut self.compare.scores_a,
            &mut self.compare.scores_b,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out_dir);
    }

    /// One seed for every stochastic stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.gbdt.seed = seed;
        self.evaluation.master_seed = seed;
        self.phantom.seed = seed;
    }

    pub fn set_threads(&mut self, threads: usize) {
        self.gbdt.threads = threads.max(1);
    }

    pub fn cv_config(&self, repeats: usize) -> CvConfig {
        CvConfig {
            k: self.evaluation.k,
            repeats,
            threshold: self.evaluation.threshold,
            master_seed: self.evaluation.master_seed,
            early_stopping_folds: self.evaluation.early_stopping_folds,
            selection: self.evaluation.nested_selection.then(|| self.selection.clone()),
        }
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig(format!("config lacks `{what}`")))?;
        if !p.exists() {
            return Err(Error::InvalidConfig(format!("{what} {} does not exist", p.display())));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Extract,
    Select,
    Train,
    Evaluate,
    Compare,
    Gridsearch,
    Phantom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub item: String,
    pub error: String,
}

/// Machine-readable outcome of one command, always written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub summary_version: u32,
    pub command: Command,
    pub items: usize,
    pub failures: Vec<ItemFailure>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failures.is_empty() && self.error.is_none()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomic(&path, bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Runs `command`, then writes `run_summary.json`. Command-level errors are
/// recorded in the summary as well as returned.
pub fn run(command: Command, config: &PipelineConfig) -> Result<RunSummary> {
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Outputs {
        dir,
        written: Vec::new(),
    };
    let result = gbdt::with_threads(config.gbdt.threads, || match command {
        Command::Extract => cmd_extract(config, &mut out),
        Command::Select => cmd_select(config, &mut out),
        Command::Train => cmd_train(config, &mut out),
        Command::Evaluate => cmd_evaluate(config, &mut out),
        Command::Compare => cmd_compare(config, &mut out),
        Command::Gridsearch => cmd_gridsearch(config, &mut out),
        Command::Phantom => cmd_phantom(config, &mut out),
    });
    let (items, failures, error) = match &result {
        Ok((items, failures)) => (*items, failures.clone(), None),
        Err(e) => (0, Vec::new(), Some(e.to_string())),
    };
    let summary = RunSummary {
        summary_version: SUMMARY_VERSION,
        command,
        items,
        failures,
        outputs: out.written,
        error,
    };
    write_atomic(&dir.join("run_summary.json"), summary.to_json().as_bytes())?;
    result.map(|_| summary)
}

type CmdResult = Result<(usize, Vec<ItemFailure>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub patient_id: String,
    pub volume: PathBuf,
    pub heart_mask: PathBuf,
    pub pericardium_mask: PathBuf,
    pub territory_mask: PathBuf,
    pub cad_rads: String,
    /// Clinical values in manifest column order.
    pub clinical: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub clinical_columns: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

const MANIFEST_FIXED: [&str; 6] = [
    "patient_id",
    "volume",
    "heart_mask",
    "pericardium_mask",
    "territory_mask",
    "cad_rads",
];

/// Reads a manifest CSV; paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < MANIFEST_FIXED.len() || headers[..MANIFEST_FIXED.len()] != MANIFEST_FIXED {
        return Err(Error::InvalidTable(format!(
            "{}: manifest must start with columns {}",
            path.display(),
            MANIFEST_FIXED.join(",")
        )));
    }
    let clinical_columns = headers[MANIFEST_FIXED.len()..].to_vec();
    for c in &clinical_columns {
        if !CLINICAL_VARIABLES.iter().any(|(n, _, _)| n == c) {
            return Err(Error::InvalidTable(format!("{}: unknown clinical column {c:?}", path.display())));
        }
    }
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let clinical = rec
            .iter()
            .skip(MANIFEST_FIXED.len())
            .zip(&clinical_columns)
            .map(|(v, name)| {
                let x = if v.trim().is_empty() {
                    f64::NAN
                } else {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidTable(format!("{name}: not a number: {v:?}")))?
                };
                validate_clinical(name, x).map_err(Error::InvalidTable)?;
                Ok(x)
            })
            .collect::<Result<Vec<f64>>>()?;
        entries.push(ManifestEntry {
            patient_id: rec[0].to_string(),
            volume: base.join(&rec[1]),
            heart_mask: base.join(&rec[2]),
            pericardium_mask: base.join(&rec[3]),
            territory_mask: base.join(&rec[4]),
            cad_rads: rec[5].to_string(),
            clinical,
        });
    }
    Ok(Manifest {
        clinical_columns,
        entries,
    })
}

/// Registry-ordered feature row: clinical values (NaN where absent), then
/// calcium-omics, then fat-omics.
pub fn feature_row(
    volume: &Volume,
    heart: &MaskVolume,
    pericardium: &MaskVolume,
    territory: &MaskVolume,
    clinical: &[(String, f64)],
    calcium: &CalciumConfig,
    fat: &FatConfig,
) -> Result<Vec<f64>> {
    let ca = calcium_feature_vector(&extract_calcium(volume, heart, territory, calcium)?);
    let ft = fat_feature_vector(&extract_fat(volume, pericardium, fat)?);
    let mut row: Vec<f64> = CLINICAL_VARIABLES
        .iter()
        .map(|(name, _, _)| clinical.iter().find(|(c, _)| c == name).map_or(f64::NAN, |(_, v)| *v))
        .collect();
    row.extend(ca.values);
    row.extend(ft.values);
    Ok(row)
}

/// One manifest patient's label and feature row.
pub fn extract_patient(
    entry: &ManifestEntry,
    clinical_columns: &[String],
    calcium: &CalciumConfig,
    fat: &FatConfig,
) -> Result<(u8, Vec<f64>)> {
    let label = cad_rads_to_label(&entry.cad_rads)?;
    let volume = load_volume(&entry.volume)?;
    let heart = load_mask(&entry.heart_mask, MaskKind::Binary)?;
    let pericardium = load_mask(&entry.pericardium_mask, MaskKind::Binary)?;
    let territory = load_mask(&entry.territory_mask, MaskKind::Territory)?;
    let clinical: Vec<(String, f64)> = clinical_columns.iter().cloned().zip(entry.clinical.iter().copied()).collect();
    let row = feature_row(&volume, &heart, &pericardium, &territory, &clinical, calcium, fat)?;
    Ok((label, row))
}

fn cmd_extract(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let manifest = read_manifest(config.require(&config.manifest, "manifest")?)?;
    let results: Vec<Result<(u8, Vec<f64>)>> = manifest
        .entries
        .par_iter()
        .map(|e| extract_patient(e, &manifest.clinical_columns, &config.calcium, &config.fat))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (entry, r) in manifest.entries.iter().zip(results) {
        match r {
            Ok((label, values)) => rows.push((entry.patient_id.clone(), label, values)),
            Err(e) => {
                log::warn!("{}: {e}", entry.patient_id);
                failures.push(ItemFailure {
                    item: entry.patient_id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let layout: Vec<String> = full_layout().into_iter().map(|c| c.name).collect();
    let table = FeatureTable::from_rows(layout, rows)?;
    out.write("features.csv", table.to_csv_string().as_bytes())?;
    let ca = table.filter_columns(|c| c.starts_with(crate::registry::CALCIUM_PREFIX));
    out.write("calcium.csv", ca.to_csv_string().as_bytes())?;
    let ft = table.filter_columns(|c| c.starts_with(crate::registry::FAT_PREFIX));
    out.write("fat.csv", ft.to_csv_string().as_bytes())?;
    out.write("registry_clinical.csv", render_registry("clinical", &clinical_columns()).as_bytes())?;
    out.write("registry_calcium.csv", render_registry("calcium-omics", &calcium_registry()).as_bytes())?;
    out.write("registry_fat.csv", render_registry("fat-omics", &fat_registry()).as_bytes())?;
    Ok((manifest.entries.len(), failures))
}

fn read_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

/// The feature table restricted to the configured group (and selection list).
pub fn load_training_table(config: &PipelineConfig) -> Result<FeatureTable> {
    let table = FeatureTable::read_csv(config.require(&config.features, "features")?)?;
    let mut columns = config.group.columns(&table);
    if let Some(p) = &config.selected_features {
        let keep = read_list(p)?;
        columns.retain(|c| keep.contains(c));
    }
    if columns.is_empty() {
        return Err(Error::InvalidConfig(format!("no {} columns to train on", config.group.name())));
    }
    table.select_columns(&columns)
}

fn cmd_select(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let table = load_training_table(config)?;
    let ranking = select_features_cv(&table, &config.gbdt, &config.selection, config.evaluation.master_seed)?;
    out.write("importance.csv", ranking.to_csv_string().as_bytes())?;
    let mut list = ranking.selected.join("\n");
    list.push('\n');
    out.write("selected_features.txt", list.as_bytes())?;
    Ok((table.n_rows(), Vec::new()))
}

fn cmd_train(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let table = load_training_table(config)?;
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    let model = fit_fold(
        &table,
        &rows,
        &config.gbdt,
        config.gbdt.seed,
        config.evaluation.early_stopping_folds,
    )?;
    out.write("model.json", model.to_json().as_bytes())?;
    Ok((table.n_rows(), Vec::new()))
}

fn scores_csv(table: &FeatureTable, scores: &[f64], threshold: f64) -> String {
    let mut s = String::from("patient_id,label,score,prediction\n");
    for r in 0..table.n_rows() {
        s.push_str(&format!(
            "{},{},{},{}\n",
            table.patient_ids()[r],
            table.label(r),
            format_value(scores[r]),
            (scores[r] >= threshold) as u8
        ));
    }
    s
}

fn curves(scores: &[f64], labels: &[u8]) -> Result<(String, String)> {
    let mut roc = String::from("threshold,fpr,tpr\n");
    for p in roc_curve(scores, labels)? {
        roc.push_str(&format!("{},{},{}\n", format_value(p.threshold), format_value(p.fpr), format_value(p.tpr)));
    }
    let mut pr = String::from("threshold,precision,recall\n");
    for p in pr_curve(scores, labels)? {
        pr.push_str(&format!(
            "{},{},{}\n",
            format_value(p.threshold),
            format_value(p.precision),
            format_value(p.recall)
        ));
    }
    Ok((roc, pr))
}

/// Repeated CV of the configured group. ROC/PR data and `scores.csv` use the
/// first repeat's out-of-fold scores.
pub fn evaluate_table(table: &FeatureTable, config: &PipelineConfig, repeats: usize) -> Result<MetricsReport> {
    repeated_cv(table, &config.gbdt, &config.cv_config(repeats), config.group)
}

fn cmd_evaluate(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let table = load_training_table(config)?;
    let report = evaluate_table(&table, config, config.evaluation.repeats)?;
    out.write("report.json", report.to_json().as_bytes())?;
    let oof = &report.per_repeat[0].oof_scores;
    let (roc, pr) = curves(oof, table.labels())?;
    out.write("roc.csv", roc.as_bytes())?;
    out.write("pr.csv", pr.as_bytes())?;
    out.write("scores.csv", scores_csv(&table, oof, config.evaluation.threshold).as_bytes())?;
    Ok((table.n_rows(), Vec::new()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub patient_ids: Vec<String>,
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

pub fn read_scores(path: &Path) -> Result<ScoreFile> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidTable(format!("{}: missing column {name}", path.display())))
    };
    let (ci, cl, cs) = (col("patient_id")?, col("label")?, col("score")?);
    let mut f = ScoreFile {
        patient_ids: Vec::new(),
        labels: Vec::new(),
        scores: Vec::new(),
    };
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |what: &str| Error::InvalidTable(format!("{}: bad {what} in row {:?}", path.display(), &rec[ci]));
        f.patient_ids.push(rec[ci].to_string());
        f.labels.push(match &rec[cl] {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad("label")),
        });
        f.scores.push(rec[cs].parse().map_err(|_| bad("score"))?);
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub report_version: u32,
    pub n_rows: usize,
    pub threshold: f64,
    pub delong: DelongResult,
    pub mcnemar: McNemarResult,
}

/// DeLong and McNemar between two score sets over the same patients.
pub fn compare_scores(a: &ScoreFile, b: &ScoreFile, threshold: f64) -> Result<CompareReport> {
    let index: HashMap<&str, usize> = b.patient_ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    if index.len() != a.patient_ids.len() {
        return Err(Error::LengthMismatch(format!(
            "{} vs {} scored patients",
            a.patient_ids.len(),
            index.len()
        )));
    }
    let mut sb = Vec::with_capacity(a.scores.len());
    for (i, id) in a.patient_ids.iter().enumerate() {
        let j = *index
            .get(id.as_str())
            .ok_or_else(|| Error::InvalidTable(format!("patient {id} missing from second score file")))?;
        if b.labels[j] != a.labels[i] {
            return Err(Error::InvalidTable(format!("patient {id} has conflicting labels")));
        }
        sb.push(b.scores[j]);
    }
    let pa: Vec<u8> = a.scores.iter().map(|&s| (s >= threshold) as u8).collect();
    let pb: Vec<u8> = sb.iter().map(|&s| (s >= threshold) as u8).collect();
    Ok(CompareReport {
        report_version: 1,
        n_rows: a.scores.len(),
        threshold,
        delong: delong_test(&a.scores, &sb, &a.labels)?,
        mcnemar: mcnemar_test(&pa, &pb, &a.labels)?,
    })
}

fn cmd_compare(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let a = read_scores(config.require(&config.compare.scores_a, "compare.scores_a")?)?;
    let b = read_scores(config.require(&config.compare.scores_b, "compare.scores_b")?)?;
    let report = compare_scores(&a, &b, config.compare.threshold)?;
    let mut s = serde_json::to_string_pretty(&report)?;
    s.push('\n');
    out.write("compare.json", s.as_bytes())?;
    Ok((report.n_rows, Vec::new()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub depth: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub auroc_mean: Option<f64>,
    pub auroc_sd: Option<f64>,
    pub best: bool,
}

/// CV every combination; best = highest mean AUROC, ties to fewer
/// iterations, then shallower trees.
pub fn grid_search(table: &FeatureTable, config: &PipelineConfig) -> Result<Vec<GridRow>> {
    let g = &config.gridsearch;
    let mut rows = Vec::new();
    for &depth in &g.depths {
        for &learning_rate in &g.learning_rates {
            for &iterations in &g.iterations {
                let mut c = config.clone();
                c.gbdt.depth = depth;
                c.gbdt.learning_rate = learning_rate;
                c.gbdt.iterations = iterations;
                let report = evaluate_table(table, &c, g.repeats)?;
                rows.push(GridRow {
                    depth,
                    learning_rate,
                    iterations,
                    auroc_mean: report.aggregate.auroc.mean,
                    auroc_sd: report.aggregate.auroc.sd,
                    best: false,
                });
            }
        }
    }
    let best = (0..rows.len()).min_by(|&a, &b| {
        let (ra, rb) = (&rows[a], &rows[b]);
        let score = |r: &GridRow| r.auroc_mean.unwrap_or(f64::NEG_INFINITY);
        score(rb)
            .total_cmp(&score(ra))
            .then(ra.iterations.cmp(&rb.iterations))
            .then(ra.depth.cmp(&rb.depth))
    });
    if let Some(b) = best {
        rows[b].best = true;
    }
    Ok(rows)
}

fn cmd_gridsearch(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let table = load_training_table(config)?;
    let rows = grid_search(&table, config)?;
    let mut s = String::from("depth,learning_rate,iterations,auroc_mean,auroc_sd,best\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), format_value);
    for r in &rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.depth,
            format_value(r.learning_rate),
            r.iterations,
            opt(r.auroc_mean),
            opt(r.auroc_sd),
            r.best
        ));
    }
    out.write("gridsearch.csv", s.as_bytes())?;
    if let Some(b) = rows.iter().find(|r| r.best) {
        let cfg = GBDTConfig {
            depth: b.depth,
            learning_rate: b.learning_rate,
            iterations: b.iterations,
            ..config.gbdt.clone()
        };
        let text = toml::to_string(&cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        out.write("best_gbdt.toml", text.as_bytes())?;
    }
    Ok((rows.len(), Vec::new()))
}

const CAD_RADS_NEG: [&str; 4] = ["0", "1", "2", "3"];
const CAD_RADS_POS: [&str; 3] = ["4A", "4B", "5"];

/// One synthetic patient: phantom, CAD-RADS reading and clinical values.
#[derive(Debug, Clone)]
pub struct PhantomPatient {
    pub patient_id: String,
    pub spec: PhantomSpec,
    pub phantom: Phantom,
    pub cad_rads: String,
    /// Every clinical registry variable, in registry order.
    pub clinical: Vec<(String, f64)>,
}

/// Patient `index` of a phantom dataset. Calcium burden and fat volume drive
/// the CAD-RADS outcome with similar weight across random phantoms; clinical
/// values are label-independent noise.
pub fn phantom_patient(config: &PhantomDatasetConfig, index: usize) -> Result<PhantomPatient> {
    let seed = derive_seed(config.seed, index as u64);
    let spec = random_phantom_spec(seed, config.max_lesions);
    let phantom = generate_phantom(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let t = &phantom.truth;
    let risk = 1.2 * ((1.0 + t.heart_agatston).ln() - 3.6) + 0.45 * (t.fat.total_ml() - 10.5) - 1.0;
    let positive = rng.random_bool(gbdt::sigmoid(risk));
    let cad = if positive {
        CAD_RADS_POS.choose(&mut rng)
    } else {
        CAD_RADS_NEG.choose(&mut rng)
    };
    let clinical = CLINICAL_VARIABLES
        .iter()
        .map(|(name, enc, _)| {
            let v = match enc {
                ClinicalEncoding::Continuous => (rng.random_range(0.0..100.0f64) * 10.0).round() / 10.0,
                ClinicalEncoding::Binary => rng.random_range(0..2u8) as f64,
                ClinicalEncoding::Smoking => rng.random_range(0..3u8) as f64,
            };
            (name.to_string(), v)
        })
        .collect();
    Ok(PhantomPatient {
        patient_id: format!("PH{index:04}"),
        spec,
        phantom,
        cad_rads: cad.expect("non-empty").to_string(),
        clinical,
    })
}

/// The feature table `extract` would produce from the dataset `phantom`
/// writes, built in memory.
pub fn phantom_feature_table(config: &PipelineConfig) -> Result<FeatureTable> {
    let rows = (0..config.phantom.patients)
        .into_par_iter()
        .map(|i| {
            let p = phantom_patient(&config.phantom, i)?;
            let ph = &p.phantom;
            let row = feature_row(
                &ph.volume,
                &ph.heart,
                &ph.pericardium,
                &ph.territory,
                &p.clinical,
                &config.calcium,
                &config.fat,
            )?;
            Ok((p.patient_id, cad_rads_to_label(&p.cad_rads)?, row))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::from_rows(full_layout().into_iter().map(|c| c.name).collect(), rows)
}

fn cmd_phantom(config: &PipelineConfig, out: &mut Outputs) -> CmdResult {
    let pc = &config.phantom;
    let patients: Vec<(usize, Result<PhantomPatient>)> =
        (0..pc.patients).into_par_iter().map(|i| (i, phantom_patient(pc, i))).collect();
    let mut manifest = MANIFEST_FIXED.join(",");
    for (name, _, _) in CLINICAL_VARIABLES {
        manifest.push(',');
        manifest.push_str(name);
    }
    manifest.push('\n');
    let mut truths = std::collections::BTreeMap::new();
    let mut failures = Vec::new();
    for (i, result) in patients {
        let p = match result {
            Ok(p) => p,
            Err(e) => {
                failures.push(ItemFailure {
                    item: format!("PH{i:04}"),
                    error: e.to_string(),
                });
                continue;
            }
        };
        let id = &p.patient_id;
        let dir = out.dir.join("phantoms");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let ph = &p.phantom;
        save_volume(&ph.volume, dir.join(format!("{id}_ct.json")))?;
        out.written.push(format!("phantoms/{id}_ct.json"));
        for (name, mask) in [("heart", &ph.heart), ("pericardium", &ph.pericardium), ("territory", &ph.territory)] {
            save_mask(mask, dir.join(format!("{id}_{name}.json")))?;
            out.written.push(format!("phantoms/{id}_{name}.json"));
        }
        let spec_text = toml::to_string(&p.spec).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        out.write(&format!("phantoms/{id}_spec.toml"), spec_text.as_bytes())?;
        manifest.push_str(&format!(
            "{id},phantoms/{id}_ct.json,phantoms/{id}_heart.json,phantoms/{id}_pericardium.json,phantoms/{id}_territory.json,{}",
            p.cad_rads
        ));
        for (_, v) in &p.clinical {
            manifest.push(',');
            manifest.push_str(&format_value(*v));
        }
        manifest.push('\n');
        truths.insert(p.patient_id.clone(), p.phantom.truth);
    }
    out.write("manifest.csv", manifest.as_bytes())?;
    let mut gt = serde_json::to_string_pretty(&truths)?;
    gt.push('\n');
    out.write("ground_truth.json", gt.as_bytes())?;
    Ok((pc.patients, failures))
}
