//! Calcium-omics: lesion, territory and whole-heart calcification features.
//!
//! Lesions are 26-connected components of heart-mask voxels at or above
//! 130 HU. Agatston scoring uses the clinical rule: per axial slice, lesion
//! area (mm²) times a density weight from the slice's peak HU
//! (1: [130,200), 2: [200,300), 3: [300,400), 4: ≥400), skipping slices under
//! 1 mm², scaled by slice spacing / 3 mm.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{ColumnSpec, FeatureRow};
use crate::shape;
use crate::stats::{summarize, sorted_sum, HuHistogram, Moments};
use crate::volume::{self, connected_components, Connectivity, Geometry, MaskVolume, Volume};

/// Territory codes and their column tags.
pub const TERRITORIES: [(u8, &str); 4] = [(1, "LM"), (2, "LAD"), (3, "LCX"), (4, "RCA")];

/// Calcium histogram: 8 bins of 100 HU starting at 130, last bin open.
pub const CALCIUM_HIST_START: i32 = 130;
pub const CALCIUM_HIST_WIDTH: i32 = 100;
pub const CALCIUM_HIST_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalciumConfig {
    pub threshold_hu: i16,
    pub min_area_mm2: f64,
    /// 6, 18 or 26.
    pub connectivity: u8,
    /// mgEq CaHA per mm³ per HU.
    pub mass_calibration: f64,
}

impl Default for CalciumConfig {
    fn default() -> Self {
        CalciumConfig {
            threshold_hu: 130,
            min_area_mm2: 1.0,
            connectivity: 26,
            mass_calibration: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesionRecord {
    /// 1-based, in ascending order of the lesion's smallest voxel index.
    pub id: u32,
    pub territory: u8,
    /// Linear voxel indices, ascending.
    pub voxels: Vec<usize>,
    pub voxel_count: usize,
    pub volume_mm3: f64,
    pub mass_mg_eq: f64,
    pub hu_min: f64,
    pub hu_max: f64,
    pub hu_mean: f64,
    pub hu_variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub hu_histogram: HuHistogram,
    pub centroid_mm: [f64; 3],
    /// Mean voxel index along z, kept for distance-to-top.
    pub centroid_z_index: f64,
    pub max_diameter_mm: f64,
    pub sphericity: f64,
    pub elongation: f64,
    pub dist_next_lesion_mm: f64,
    pub dist_to_top_mm: f64,
    pub agatston: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TerritorySummary {
    pub territory: u8,
    pub lesion_count: usize,
    pub agatston_sum: f64,
    pub volume_sum: f64,
    pub mass_sum: f64,
    pub hu: Moments,
    pub diffusivity: f64,
    pub histogram: [u64; CALCIUM_HIST_BINS],
    pub lesion_volume_mean: f64,
    pub lesion_volume_max: f64,
    pub lesion_agatston_mean: f64,
    pub lesion_agatston_max: f64,
    pub max_diameter_max: f64,
    pub sphericity_mean: f64,
    pub elongation_mean: f64,
    pub dist_to_top_mean: f64,
    pub dist_next_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacCategory {
    Absent,
    Mild,
    Moderate,
    Severe,
}

impl CacCategory {
    pub fn ordinal(self) -> u8 {
        self as u8
    }
}

/// Agatston bands: 0 absent, (0,100] mild, (100,400) moderate, ≥400 severe.
pub fn cac_category(score: f64) -> Result<CacCategory> {
    if score.is_nan() || score < 0.0 {
        return Err(Error::NegativeScore(score));
    }
    Ok(if score == 0.0 {
        CacCategory::Absent
    } else if score <= 100.0 {
        CacCategory::Mild
    } else if score < 400.0 {
        CacCategory::Moderate
    } else {
        CacCategory::Severe
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeartCalciumSummary {
    pub total_agatston: f64,
    pub total_volume: f64,
    pub total_mass: f64,
    pub lesion_count: usize,
    pub hu: Moments,
    pub histogram: [u64; CALCIUM_HIST_BINS],
    pub cac_category: Option<CacCategory>,
    pub territories_involved: usize,
    pub diffusivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalciumFeatures {
    pub lesions: Vec<LesionRecord>,
    pub territories: [TerritorySummary; 4],
    pub heart: HeartCalciumSummary,
}

impl CalciumFeatures {
    pub fn empty() -> Self {
        let territories = TERRITORIES.map(|(code, _)| TerritorySummary {
            territory: code,
            ..Default::default()
        });
        CalciumFeatures {
            lesions: Vec::new(),
            territories,
            heart: HeartCalciumSummary {
                cac_category: Some(CacCategory::Absent),
                ..Default::default()
            },
        }
    }
}

/// Density weight for a slice's peak HU; 0 below 130.
pub fn density_weight(max_hu: i16) -> u8 {
    match max_hu {
        i16::MIN..=129 => 0,
        130..=199 => 1,
        200..=299 => 2,
        300..=399 => 3,
        _ => 4,
    }
}

/// Per-slice voxel count and peak HU, by ascending z.
fn slice_profile(geometry: &Geometry, voxels: &[usize], volume: &Volume) -> BTreeMap<usize, (u64, i16)> {
    let mut slices: BTreeMap<usize, (u64, i16)> = BTreeMap::new();
    for &i in voxels {
        let z = geometry.coords(i)[2];
        let hu = volume.get(i);
        let e = slices.entry(z).or_insert((0, i16::MIN));
        e.0 += 1;
        e.1 = e.1.max(hu);
    }
    slices
}

/// Agatston score of one lesion's voxels.
pub fn agatston_lesion(voxels: &[usize], volume: &Volume, min_area_mm2: f64) -> f64 {
    let g = &volume.geometry;
    let pixel_area = g.spacing_mm[0] * g.spacing_mm[1];
    let mut weighted = 0.0;
    for (count, max_hu) in slice_profile(g, voxels, volume).into_values() {
        let area = count as f64 * pixel_area;
        if area >= min_area_mm2 {
            weighted += area * density_weight(max_hu) as f64;
        }
    }
    (g.spacing_mm[2] / 3.0) * weighted
}

/// volume × mean HU × calibration factor.
pub fn calcium_mass(volume_mm3: f64, hu_mean: f64, calibration: f64) -> f64 {
    volume_mm3 * hu_mean * calibration
}

fn plurality_territory(voxels: &[usize], territory: &MaskVolume) -> Option<u8> {
    let mut counts = [0usize; 5];
    for &i in voxels {
        counts[territory.get(i) as usize] += 1;
    }
    let mut best: Option<(u8, usize)> = None;
    for code in 1..=4u8 {
        let c = counts[code as usize];
        if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
            best = Some((code, c));
        }
    }
    best.map(|(code, _)| code)
}

/// Territory of the labeled voxel nearest to a centroid; ties go to the lower code.
fn nearest_territory(territory: &MaskVolume, centroid_index: [f64; 3]) -> Option<u8> {
    let g = &territory.geometry;
    let s = g.spacing_mm;
    let mut best: Option<(f64, u8)> = None;
    for (i, &code) in territory.labels().iter().enumerate() {
        if code == 0 {
            continue;
        }
        let c = g.coords(i);
        let mut d2 = 0.0;
        for a in 0..3 {
            let t = (c[a] as f64 - centroid_index[a]) * s[a];
            d2 += t * t;
        }
        let better = match best {
            None => true,
            Some((bd, bc)) => d2 < bd || (d2 == bd && code < bc),
        };
        if better {
            best = Some((d2, code));
        }
    }
    best.map(|(_, code)| code)
}

/// Finds calcified lesions inside the heart mask.
///
/// Spatial fields (`dist_next_lesion_mm`, `dist_to_top_mm`) are filled by
/// [`lesion_spatial`].
pub fn extract_lesions(
    volume: &Volume,
    heart: &MaskVolume,
    territory: &MaskVolume,
    config: &CalciumConfig,
) -> Result<Vec<LesionRecord>> {
    let g = volume.geometry;
    g.ensure_same(&heart.geometry, "heart mask")?;
    g.ensure_same(&territory.geometry, "territory mask")?;
    let connectivity = Connectivity::try_from(config.connectivity)?;

    let candidate: Vec<bool> = (0..g.len())
        .map(|i| heart.contains(i) && volume.get(i) >= config.threshold_hu)
        .collect();
    let components = connected_components(&g, &candidate, connectivity);
    let pixel_area = g.spacing_mm[0] * g.spacing_mm[1];
    let vv = g.voxel_volume_mm3();

    let mut lesions = Vec::new();
    for comp in &components.components {
        let voxels = &comp.voxels;
        let profile = slice_profile(&g, voxels, volume);
        let max_area = profile
            .values()
            .map(|&(count, _)| count as f64 * pixel_area)
            .fold(0.0, f64::max);
        if max_area < config.min_area_mm2 {
            continue;
        }

        let mut hist = HuHistogram::new();
        let mut idx_sum = [0u128; 3];
        for &i in voxels {
            hist.add(volume.get(i));
            let c = g.coords(i);
            for a in 0..3 {
                idx_sum[a] += c[a] as u128;
            }
        }
        let n = voxels.len();
        let mean_idx = idx_sum.map(|s| s as f64 / n as f64);
        let centroid_mm = [0, 1, 2].map(|a| g.origin_mm[a] + mean_idx[a] * g.spacing_mm[a]);

        let territory_code = match plurality_territory(voxels, territory) {
            Some(code) => code,
            None => nearest_territory(territory, mean_idx).ok_or(Error::EmptyTerritoryMask)?,
        };

        let m = hist.moments();
        let volume_mm3 = n as f64 * vv;
        let id = comp.id;
        let member = |j: usize| components.label_map[j] == id;
        let faces = shape::exposed_faces(&g, voxels, member);
        let area = shape::surface_area_mm2(&g, faces);
        let sphericity = if area > 0.0 {
            (std::f64::consts::PI.cbrt() * (6.0 * volume_mm3).powf(2.0 / 3.0) / area).min(1.0)
        } else {
            0.0
        };
        let mut cov = shape::center_covariance(&g, voxels);
        for a in 0..3 {
            cov[a][a] += g.spacing_mm[a] * g.spacing_mm[a] / 12.0;
        }
        let eig = shape::sym3_eigenvalues(cov);
        let elongation = if eig[2] > 0.0 { (eig[0] / eig[2]).sqrt().max(1.0) } else { 1.0 };
        let boundary: Vec<usize> = voxels
            .iter()
            .copied()
            .filter(|&i| shape::exposed_faces(&g, &[i], member) != [0, 0, 0])
            .collect();

        lesions.push(LesionRecord {
            id: lesions.len() as u32 + 1,
            territory: territory_code,
            voxels: voxels.clone(),
            voxel_count: n,
            volume_mm3,
            mass_mg_eq: calcium_mass(volume_mm3, m.mean, config.mass_calibration),
            hu_min: m.min,
            hu_max: m.max,
            hu_mean: m.mean,
            hu_variance: m.variance,
            skewness: m.skewness,
            kurtosis: m.kurtosis,
            hu_histogram: hist,
            centroid_mm,
            centroid_z_index: mean_idx[2],
            max_diameter_mm: shape::max_pairwise_distance(&g, &boundary),
            sphericity,
            elongation,
            dist_next_lesion_mm: 0.0,
            dist_to_top_mm: 0.0,
            agatston: agatston_lesion(voxels, volume, config.min_area_mm2),
        });
    }
    Ok(lesions)
}

fn centroid_distance(a: &LesionRecord, b: &LesionRecord) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let t = a.centroid_mm[k] - b.centroid_mm[k];
        d2 += t * t;
    }
    d2.sqrt()
}

/// Fills nearest-neighbor and distance-to-top fields. A lone lesion's
/// nearest-neighbor distance is the heart bounding-box diagonal.
pub fn lesion_spatial(lesions: &mut [LesionRecord], geometry: &Geometry, heart: &MaskVolume) {
    let sentinel = heart.bbox_diagonal_mm();
    let top = (geometry.dims[2] - 1) as f64;
    let nearest: Vec<f64> = (0..lesions.len())
        .map(|i| {
            (0..lesions.len())
                .filter(|&j| j != i)
                .map(|j| centroid_distance(&lesions[i], &lesions[j]))
                .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))))
                .unwrap_or(sentinel)
        })
        .collect();
    for (l, d) in lesions.iter_mut().zip(nearest) {
        l.dist_next_lesion_mm = d;
        l.dist_to_top_mm = ((top - l.centroid_z_index) * geometry.spacing_mm[2]).max(0.0);
    }
}

/// Mean pairwise centroid distance over a diagonal; 0 for no lesions, 1 for one.
fn diffusivity(members: &[&LesionRecord], diagonal_mm: f64) -> f64 {
    match members.len() {
        0 => 0.0,
        1 => 1.0,
        n => {
            let mut d = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    d.push(centroid_distance(members[i], members[j]));
                }
            }
            if diagonal_mm > 0.0 {
                sorted_sum(&d) / d.len() as f64 / diagonal_mm
            } else {
                0.0
            }
        }
    }
}

fn calcium_hist(h: &HuHistogram) -> [u64; CALCIUM_HIST_BINS] {
    let v = h.binned(CALCIUM_HIST_START, CALCIUM_HIST_WIDTH, CALCIUM_HIST_BINS, true);
    let mut out = [0; CALCIUM_HIST_BINS];
    out.copy_from_slice(&v);
    out
}

/// Per-territory aggregates (LM, LAD, LCX, RCA order).
pub fn territory_aggregate(lesions: &[LesionRecord], territory: &MaskVolume) -> [TerritorySummary; 4] {
    TERRITORIES.map(|(code, _)| {
        let members: Vec<&LesionRecord> = lesions.iter().filter(|l| l.territory == code).collect();
        let mut hist = HuHistogram::new();
        for l in &members {
            hist.merge(&l.hu_histogram);
        }
        let diag = volume::bounding_box(
            &territory.geometry,
            territory.labels().iter().enumerate().filter(|(_, &c)| c == code).map(|(i, _)| i),
        )
        .map_or(0.0, |(lo, hi)| volume::bbox_diagonal(&territory.geometry, lo, hi));
        let field = |f: fn(&LesionRecord) -> f64| summarize(&members.iter().map(|l| f(l)).collect::<Vec<_>>());
        let vol = field(|l| l.volume_mm3);
        let aga = field(|l| l.agatston);
        TerritorySummary {
            territory: code,
            lesion_count: members.len(),
            agatston_sum: members.iter().fold(0.0, |a, l| a + l.agatston),
            volume_sum: members.iter().fold(0.0, |a, l| a + l.volume_mm3),
            mass_sum: members.iter().fold(0.0, |a, l| a + l.mass_mg_eq),
            hu: hist.moments(),
            diffusivity: diffusivity(&members, diag),
            histogram: calcium_hist(&hist),
            lesion_volume_mean: vol.mean,
            lesion_volume_max: vol.max,
            lesion_agatston_mean: aga.mean,
            lesion_agatston_max: aga.max,
            max_diameter_max: field(|l| l.max_diameter_mm).max,
            sphericity_mean: field(|l| l.sphericity).mean,
            elongation_mean: field(|l| l.elongation).mean,
            dist_to_top_mean: field(|l| l.dist_to_top_mm).mean,
            dist_next_min: field(|l| l.dist_next_lesion_mm).min,
        }
    })
}

/// Whole-heart aggregate. Totals are sums of the territory sums, in
/// territory order.
pub fn heart_aggregate(
    territories: &[TerritorySummary; 4],
    lesions: &[LesionRecord],
    heart: &MaskVolume,
) -> Result<HeartCalciumSummary> {
    let mut hist = HuHistogram::new();
    for l in lesions {
        hist.merge(&l.hu_histogram);
    }
    let total_agatston = territories.iter().fold(0.0, |a, t| a + t.agatston_sum);
    let members: Vec<&LesionRecord> = lesions.iter().collect();
    Ok(HeartCalciumSummary {
        total_agatston,
        total_volume: territories.iter().fold(0.0, |a, t| a + t.volume_sum),
        total_mass: territories.iter().fold(0.0, |a, t| a + t.mass_sum),
        lesion_count: territories.iter().map(|t| t.lesion_count).sum(),
        hu: hist.moments(),
        histogram: calcium_hist(&hist),
        cac_category: Some(cac_category(total_agatston)?),
        territories_involved: territories.iter().filter(|t| t.lesion_count > 0).count(),
        diffusivity: diffusivity(&members, heart.bbox_diagonal_mm()),
    })
}

/// Full calcium-omics extraction for one scan.
pub fn extract_calcium(
    volume: &Volume,
    heart: &MaskVolume,
    territory: &MaskVolume,
    config: &CalciumConfig,
) -> Result<CalciumFeatures> {
    let mut lesions = extract_lesions(volume, heart, territory, config)?;
    lesion_spatial(&mut lesions, &volume.geometry, heart);
    let territories = territory_aggregate(&lesions, territory);
    let heart_summary = heart_aggregate(&territories, &lesions, heart)?;
    Ok(CalciumFeatures {
        lesions,
        territories,
        heart: heart_summary,
    })
}

const HIST_TAGS: [&str; CALCIUM_HIST_BINS] = [
    "130_230", "230_330", "330_430", "430_530", "530_630", "630_730", "730_830", "830_plus",
];

type LesionField = (&'static str, &'static str, fn(&LesionRecord) -> f64);

const LESION_FIELDS: [LesionField; 14] = [
    ("volume_mm3", "mm3", |l| l.volume_mm3),
    ("mass_mg", "mgEq", |l| l.mass_mg_eq),
    ("hu_min", "HU", |l| l.hu_min),
    ("hu_max", "HU", |l| l.hu_max),
    ("hu_mean", "HU", |l| l.hu_mean),
    ("hu_variance", "HU2", |l| l.hu_variance),
    ("skewness", "1", |l| l.skewness),
    ("kurtosis", "1", |l| l.kurtosis),
    ("max_diameter_mm", "mm", |l| l.max_diameter_mm),
    ("sphericity", "1", |l| l.sphericity),
    ("elongation", "1", |l| l.elongation),
    ("dist_next_mm", "mm", |l| l.dist_next_lesion_mm),
    ("dist_to_top_mm", "mm", |l| l.dist_to_top_mm),
    ("agatston", "score", |l| l.agatston),
];

/// The 189 calcium-omics columns in registry order.
pub fn calcium_feature_vector(f: &CalciumFeatures) -> FeatureRow {
    let mut row = FeatureRow::default();
    for (t, (_, tag)) in f.territories.iter().zip(TERRITORIES) {
        let p = |name: &str| format!("ca_{tag}_{name}");
        let s = "territory";
        row.push(p("lesion_count"), s, "count", t.lesion_count as f64);
        row.push(p("agatston"), s, "score", t.agatston_sum);
        row.push(p("volume_mm3"), s, "mm3", t.volume_sum);
        row.push(p("mass_mg"), s, "mgEq", t.mass_sum);
        row.push(p("hu_mean"), s, "HU", t.hu.mean);
        row.push(p("hu_sd"), s, "HU", t.hu.sd());
        row.push(p("hu_skewness"), s, "1", t.hu.skewness);
        row.push(p("hu_kurtosis"), s, "1", t.hu.kurtosis);
        row.push(p("hu_min"), s, "HU", t.hu.min);
        row.push(p("hu_max"), s, "HU", t.hu.max);
        row.push(p("diffusivity"), s, "1", t.diffusivity);
        for (c, tagh) in t.histogram.iter().zip(HIST_TAGS) {
            row.push(p(&format!("hist_{tagh}")), s, "voxels", *c as f64);
        }
        row.push(p("lesion_volume_mean"), s, "mm3", t.lesion_volume_mean);
        row.push(p("lesion_volume_max"), s, "mm3", t.lesion_volume_max);
        row.push(p("lesion_agatston_mean"), s, "score", t.lesion_agatston_mean);
        row.push(p("lesion_agatston_max"), s, "score", t.lesion_agatston_max);
        row.push(p("max_diameter_max"), s, "mm", t.max_diameter_max);
        row.push(p("sphericity_mean"), s, "1", t.sphericity_mean);
        row.push(p("elongation_mean"), s, "1", t.elongation_mean);
        row.push(p("dist_to_top_mean"), s, "mm", t.dist_to_top_mean);
        row.push(p("dist_next_min"), s, "mm", t.dist_next_min);
    }

    let h = &f.heart;
    let s = "heart";
    row.push("ca_heart_agatston", s, "score", h.total_agatston);
    row.push("ca_heart_volume_mm3", s, "mm3", h.total_volume);
    row.push("ca_heart_mass_mg", s, "mgEq", h.total_mass);
    row.push("ca_heart_lesion_count", s, "count", h.lesion_count as f64);
    row.push("ca_heart_hu_mean", s, "HU", h.hu.mean);
    row.push("ca_heart_hu_sd", s, "HU", h.hu.sd());
    row.push("ca_heart_hu_skewness", s, "1", h.hu.skewness);
    row.push("ca_heart_hu_kurtosis", s, "1", h.hu.kurtosis);
    row.push("ca_heart_hu_min", s, "HU", h.hu.min);
    row.push("ca_heart_hu_max", s, "HU", h.hu.max);
    for (c, tagh) in h.histogram.iter().zip(HIST_TAGS) {
        row.push(format!("ca_heart_hist_{tagh}"), s, "voxels", *c as f64);
    }
    row.push(
        "ca_heart_cac_category",
        s,
        "ordinal",
        h.cac_category.map_or(0.0, |c| c.ordinal() as f64),
    );
    row.push("ca_heart_territories_involved", s, "count", h.territories_involved as f64);
    row.push("ca_heart_diffusivity", s, "1", h.diffusivity);

    for (name, unit, get) in LESION_FIELDS {
        let sm = summarize(&f.lesions.iter().map(get).collect::<Vec<_>>());
        for (stat, v) in [("mean", sm.mean), ("sd", sm.sd), ("min", sm.min), ("max", sm.max)] {
            row.push(format!("ca_lesion_{name}_{stat}"), "lesion", unit, v);
        }
    }
    row
}

pub fn calcium_registry() -> Vec<ColumnSpec> {
    calcium_feature_vector(&CalciumFeatures::empty()).columns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::MaskKind;

    struct Scene {
        volume: Volume,
        heart: MaskVolume,
        territory: MaskVolume,
    }

    fn scene(dims: [usize; 3], spacing: [f64; 3], territory_code: u8) -> Scene {
        let g = Geometry::new(dims, spacing, [0.0; 3]).unwrap();
        Scene {
            volume: Volume::filled(g, 40),
            heart: MaskVolume::new(g, MaskKind::Binary, vec![1; g.len()]).unwrap(),
            territory: MaskVolume::new(g, MaskKind::Territory, vec![territory_code; g.len()]).unwrap(),
        }
    }

    fn paint(s: &mut Scene, lo: [usize; 3], size: [usize; 3], hu: i16) {
        let g = s.volume.geometry;
        for z in lo[2]..lo[2] + size[2] {
            for y in lo[1]..lo[1] + size[1] {
                for x in lo[0]..lo[0] + size[0] {
                    s.volume.set(g.index(x, y, z), hu);
                }
            }
        }
    }

    fn run(s: &Scene) -> CalciumFeatures {
        extract_calcium(&s.volume, &s.heart, &s.territory, &CalciumConfig::default()).unwrap()
    }

    #[test]
    fn no_calcium_no_lesions() {
        let s = scene([8, 8, 4], [1.0; 3], 2);
        let f = run(&s);
        assert!(f.lesions.is_empty());
        assert_eq!(f.heart.total_agatston, 0.0);
        assert_eq!(f.heart.cac_category, Some(CacCategory::Absent));
        assert!(f.territories.iter().all(|t| t.diffusivity == 0.0));
    }

    #[test]
    fn block_in_lad() {
        let mut s = scene([8, 8, 4], [1.0, 1.0, 3.0], 2);
        paint(&mut s, [2, 2, 1], [3, 3, 1], 300);
        let f = run(&s);
        assert_eq!(f.lesions.len(), 1);
        let l = &f.lesions[0];
        assert_eq!(l.voxel_count, 9);
        assert_eq!(l.volume_mm3, 27.0);
        assert_eq!(l.hu_mean, 300.0);
        assert_eq!(l.territory, 2);
        assert!((l.mass_mg_eq - 8.1).abs() < 1e-12);
        // 9 mm² × weight 3 × (3/3)
        assert_eq!(l.agatston, 27.0);
        assert_eq!(f.territories[1].diffusivity, 1.0);
        assert_eq!(f.territories[0].diffusivity, 0.0);
        assert!(l.sphericity > 0.0 && l.sphericity <= 1.0);
        assert!(l.elongation >= 1.0);
    }

    #[test]
    fn agatston_hand_examples() {
        let g = Geometry::new([10, 1, 1], [0.5, 0.5, 3.0], [0.0; 3]).unwrap();
        let mut v = Volume::filled(g, 250);
        let voxels: Vec<usize> = (0..10).collect();
        assert_eq!(agatston_lesion(&voxels, &v, 1.0), 5.0);
        v.set(3, 400);
        assert_eq!(agatston_lesion(&voxels, &v, 1.0), 10.0);
        assert_eq!(agatston_lesion(&[], &v, 1.0), 0.0);
    }

    #[test]
    fn weight_band_edges() {
        assert_eq!(density_weight(129), 0);
        assert_eq!(density_weight(130), 1);
        assert_eq!(density_weight(199), 1);
        assert_eq!(density_weight(200), 2);
        assert_eq!(density_weight(299), 2);
        assert_eq!(density_weight(300), 3);
        assert_eq!(density_weight(399), 3);
        assert_eq!(density_weight(400), 4);
    }

    #[test]
    fn mass_linearity() {
        assert!((calcium_mass(27.0, 300.0, 0.001) - 8.1).abs() < 1e-12);
        assert_eq!(calcium_mass(0.0, 300.0, 0.001), 0.0);
        assert_eq!(calcium_mass(27.0, 300.0, 0.002), 2.0 * calcium_mass(27.0, 300.0, 0.001));
    }

    #[test]
    fn small_lesion_discarded() {
        // one voxel of 0.5 × 0.5 mm is 0.25 mm², below the 1 mm² minimum
        let mut s = scene([6, 6, 3], [0.5, 0.5, 3.0], 1);
        paint(&mut s, [2, 2, 1], [1, 1, 1], 500);
        assert!(run(&s).lesions.is_empty());
    }

    #[test]
    fn plurality_and_tie_break() {
        let mut s = scene([8, 8, 2], [1.0; 3], 0);
        paint(&mut s, [1, 1, 0], [4, 1, 1], 300);
        let g = s.volume.geometry;
        s.territory.set(g.index(1, 1, 0), 3).unwrap();
        s.territory.set(g.index(2, 1, 0), 3).unwrap();
        s.territory.set(g.index(3, 1, 0), 2).unwrap();
        s.territory.set(g.index(4, 1, 0), 2).unwrap();
        assert_eq!(run(&s).lesions[0].territory, 2);
    }

    #[test]
    fn unlabeled_lesion_takes_nearest_territory() {
        let mut s = scene([10, 4, 1], [1.0; 3], 0);
        paint(&mut s, [1, 1, 0], [2, 2, 1], 300);
        let g = s.volume.geometry;
        s.territory.set(g.index(9, 1, 0), 4).unwrap();
        s.territory.set(g.index(5, 1, 0), 3).unwrap();
        assert_eq!(run(&s).lesions[0].territory, 3);
        let empty = MaskVolume::empty(g, MaskKind::Territory);
        let err = extract_calcium(&s.volume, &s.heart, &empty, &CalciumConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyTerritoryMask));
    }

    #[test]
    fn spatial_examples() {
        let mut s = scene([12, 12, 3], [1.0; 3], 1);
        paint(&mut s, [0, 0, 2], [1, 2, 1], 300);
        let f = run(&s);
        // lone lesion: heart bbox diagonal sqrt(11² + 11² + 2²)
        let diag = (121.0f64 + 121.0 + 4.0).sqrt();
        assert_eq!(f.lesions[0].dist_next_lesion_mm, diag);
        assert_eq!(f.lesions[0].dist_to_top_mm, 0.0);

        let mut two = vec![f.lesions[0].clone(), f.lesions[0].clone()];
        two[0].centroid_mm = [0.0, 0.0, 0.0];
        two[1].centroid_mm = [3.0, 4.0, 0.0];
        let g = s.volume.geometry;
        lesion_spatial(&mut two, &g, &s.heart);
        assert_eq!(two[0].dist_next_lesion_mm, 5.0);
        assert_eq!(two[1].dist_next_lesion_mm, 5.0);
    }

    #[test]
    fn diffusivity_two_lesions() {
        let mut s = scene([31, 41, 1], [1.0; 3], 2);
        paint(&mut s, [0, 0, 0], [1, 1, 1], 300);
        paint(&mut s, [6, 8, 0], [1, 1, 1], 300);
        let f = run(&s);
        assert_eq!(f.lesions.len(), 2);
        // centroids 10 mm apart, territory bbox diagonal sqrt(30² + 40²) = 50
        assert!((f.territories[1].diffusivity - 0.2).abs() < 1e-15);
    }

    #[test]
    fn categories() {
        assert_eq!(cac_category(0.0).unwrap(), CacCategory::Absent);
        assert_eq!(cac_category(1.0).unwrap(), CacCategory::Mild);
        assert_eq!(cac_category(100.0).unwrap(), CacCategory::Mild);
        assert_eq!(cac_category(101.0).unwrap(), CacCategory::Moderate);
        assert_eq!(cac_category(399.9).unwrap(), CacCategory::Moderate);
        assert_eq!(cac_category(400.0).unwrap(), CacCategory::Severe);
        assert!(cac_category(-1.0).is_err());
    }

    #[test]
    fn heart_totals_from_territories() {
        let mut t = CalciumFeatures::empty().territories;
        t[0].agatston_sum = 5.0;
        t[1].agatston_sum = 10.0;
        let g = Geometry::unit([2, 2, 2]).unwrap();
        let heart = MaskVolume::new(g, MaskKind::Binary, vec![1; 8]).unwrap();
        let h = heart_aggregate(&t, &[], &heart).unwrap();
        assert_eq!(h.total_agatston, 15.0);
        assert_eq!(h.cac_category, Some(CacCategory::Mild));
    }

    #[test]
    fn mask_isolation() {
        let mut s = scene([10, 10, 4], [0.5, 0.5, 3.0], 3);
        let g = s.volume.geometry;
        for z in 0..4 {
            for y in 0..10 {
                s.heart.set(g.index(0, y, z), 0).unwrap();
            }
        }
        paint(&mut s, [3, 3, 1], [3, 3, 2], 350);
        let a = calcium_feature_vector(&run(&s));
        for z in 0..4 {
            for y in 0..10 {
                s.volume.set(g.index(0, y, z), 1040);
            }
        }
        let b = calcium_feature_vector(&run(&s));
        assert_eq!(a, b);
    }

    #[test]
    fn registry_length_and_zero_vector() {
        let row = calcium_feature_vector(&CalciumFeatures::empty());
        assert_eq!(row.len(), 189);
        assert!(row.values.iter().all(|&v| v == 0.0));
    }
}
