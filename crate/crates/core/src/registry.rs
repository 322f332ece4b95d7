//! Named feature columns and the registry text files that publish them.
//!
//! Column groups are identified by prefix: `clin_` (clinical), `ca_`
//! (calcium-omics) and `fat_` (fat-omics).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const CLINICAL_PREFIX: &str = "clin_";
pub const CALCIUM_PREFIX: &str = "ca_";
pub const FAT_PREFIX: &str = "fat_";

pub const REGISTRY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub scale: String,
    pub unit: String,
}

/// An ordered list of named values, as emitted for one scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureRow {
    pub columns: Vec<ColumnSpec>,
    pub values: Vec<f64>,
}

impl FeatureRow {
    pub fn push(&mut self, name: impl Into<String>, scale: &str, unit: &str, value: f64) {
        self.columns.push(ColumnSpec {
            name: name.into(),
            scale: scale.to_string(),
            unit: unit.to_string(),
        });
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .map(|i| self.values[i])
    }
}

/// Renders a registry as versioned text: a comment line, a header, then one
/// `name,scale,unit` line per column.
pub fn render_registry(family: &str, columns: &[ColumnSpec]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# cadomics {family} registry v{REGISTRY_VERSION} ({} columns)", columns.len());
    out.push_str("name,scale,unit\n");
    for c in columns {
        let _ = writeln!(out, "{},{},{}", c.name, c.scale, c.unit);
    }
    out
}

/// How a clinical variable is coded as a number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClinicalEncoding {
    Continuous,
    /// 0 = no, 1 = yes.
    Binary,
    /// 0 = never, 1 = prior, 2 = current.
    Smoking,
}

impl ClinicalEncoding {
    fn describe(self) -> &'static str {
        match self {
            ClinicalEncoding::Continuous => "continuous",
            ClinicalEncoding::Binary => "binary 0/1",
            ClinicalEncoding::Smoking => "ordinal 0=never 1=prior 2=current",
        }
    }
}

/// The 24 clinical variables, in column order: (name, encoding, unit).
pub const CLINICAL_VARIABLES: [(&str, ClinicalEncoding, &str); 24] = {
    use ClinicalEncoding::*;
    [
        ("clin_male", Binary, "flag"),
        ("clin_bmi", Continuous, "kg/m2"),
        ("clin_age", Continuous, "years"),
        ("clin_bmi_band_ge30", Binary, "flag"),
        ("clin_age_band_60_75", Binary, "flag"),
        ("clin_diabetes", Binary, "flag"),
        ("clin_height", Continuous, "m"),
        ("clin_weight", Continuous, "kg"),
        ("clin_smoking", Smoking, "ordinal"),
        ("clin_cigarettes_per_day", Continuous, "count"),
        ("clin_hypertension", Binary, "flag"),
        ("clin_total_cholesterol", Continuous, "mmol/L"),
        ("clin_hdl_cholesterol", Continuous, "mmol/L"),
        ("clin_chd_family_history", Binary, "flag"),
        ("clin_systolic_bp", Continuous, "mmHg"),
        ("clin_diastolic_bp", Continuous, "mmHg"),
        ("clin_cardiac_chest_pain", Binary, "flag"),
        ("clin_antiplatelet", Binary, "flag"),
        ("clin_statin", Binary, "flag"),
        ("clin_ace_inhibitor", Binary, "flag"),
        ("clin_calcium_blocker", Binary, "flag"),
        ("clin_nitrates", Binary, "flag"),
        ("clin_betablocker", Binary, "flag"),
        ("clin_hyperlipidemia", Binary, "flag"),
    ]
};

pub fn clinical_columns() -> Vec<ColumnSpec> {
    CLINICAL_VARIABLES
        .iter()
        .map(|(name, enc, unit)| ColumnSpec {
            name: name.to_string(),
            scale: enc.describe().to_string(),
            unit: unit.to_string(),
        })
        .collect()
}

/// Checks a clinical value against its declared encoding. Missing values
/// (NaN) are always accepted.
pub fn validate_clinical(name: &str, value: f64) -> Result<(), String> {
    let Some((_, enc, _)) = CLINICAL_VARIABLES.iter().find(|(n, _, _)| *n == name) else {
        return Err(format!("unknown clinical column {name:?}"));
    };
    if value.is_nan() {
        return Ok(());
    }
    let ok = match enc {
        ClinicalEncoding::Continuous => value.is_finite(),
        ClinicalEncoding::Binary => value == 0.0 || value == 1.0,
        ClinicalEncoding::Smoking => value == 0.0 || value == 1.0 || value == 2.0,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{name}: value {value} violates {} encoding", enc.describe()))
    }
}

/// Full 424-column layout: clinical, then calcium-omics, then fat-omics.
pub fn full_layout() -> Vec<ColumnSpec> {
    let mut cols = clinical_columns();
    cols.extend(crate::calcium::calcium_registry());
    cols.extend(crate::fat::fat_registry());
    cols
}
