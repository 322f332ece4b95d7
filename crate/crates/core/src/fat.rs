//! Fat-omics: epicardial fat inside the pericardium and its morphology,
//! intensity and slab × ribbon distribution.
//!
//! Slabs Q1..Q4 split the pericardium's axial extent into quarters from
//! inferior to superior. Ribbons R1..R4 are quartiles of the in-plane inward
//! distance from the pericardial boundary, normalized per slice, with R1 the
//! outermost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{ColumnSpec, FeatureRow};
use crate::shape;
use crate::stats::{entropy_bits, sorted_sum, HuHistogram, Moments};
use crate::volume::{distance_transform_2d, distance_transform_3d, Geometry, MaskKind, MaskVolume, Volume};

pub const FAT_HU_MIN: i16 = -190;
pub const FAT_HU_MAX: i16 = -30;
pub const FAT_BAND_WIDTH: i16 = 20;
pub const FAT_BANDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FatConfig {
    pub hu_min: i16,
    pub hu_max: i16,
}

impl Default for FatConfig {
    fn default() -> Self {
        FatConfig {
            hu_min: FAT_HU_MIN,
            hu_max: FAT_HU_MAX,
        }
    }
}

/// Band index of a fat HU value: `[b, b+20)` bins from -190, top bin closed at -30.
pub fn band_index(hu: i16) -> usize {
    (((hu as i32 - FAT_HU_MIN as i32) / FAT_BAND_WIDTH as i32).max(0) as usize).min(FAT_BANDS - 1)
}

/// Band label as used in column names, e.g. `70_50` for [-70, -50).
pub fn band_tag(band: usize) -> String {
    let lo = FAT_HU_MIN as i32 + (band as i32) * FAT_BAND_WIDTH as i32;
    format!("{}_{}", lo.abs(), (lo + FAT_BAND_WIDTH as i32).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FatMask {
    pub mask: MaskVolume,
    /// Fat voxel indices, ascending.
    pub voxels: Vec<usize>,
}

impl FatMask {
    pub fn geometry(&self) -> &Geometry {
        &self.mask.geometry
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Fat = pericardium ∧ HU in [-190, -30].
pub fn segment_fat(volume: &Volume, pericardium: &MaskVolume) -> Result<FatMask> {
    segment_fat_with(volume, pericardium, &FatConfig::default())
}

pub fn segment_fat_with(volume: &Volume, pericardium: &MaskVolume, config: &FatConfig) -> Result<FatMask> {
    let g = volume.geometry;
    g.ensure_same(&pericardium.geometry, "pericardium mask")?;
    if pericardium.count() == 0 {
        return Err(Error::EmptyPericardium);
    }
    let mut labels = vec![0u8; g.len()];
    let mut voxels = Vec::new();
    for (i, label) in labels.iter_mut().enumerate() {
        let hu = volume.get(i);
        if pericardium.contains(i) && hu >= config.hu_min && hu <= config.hu_max {
            *label = 1;
            voxels.push(i);
        }
    }
    Ok(FatMask {
        mask: MaskVolume::new(g, MaskKind::Binary, labels)?,
        voxels,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Morphology {
    pub volume_ml: f64,
    /// Descending.
    pub axis_lengths_mm: [f64; 3],
    pub mean_thickness_mm: f64,
    pub surface_area_mm2: f64,
}

/// Per-voxel local thickness: twice the 3D distance to the nearest non-fat voxel.
fn thickness_map(fat: &FatMask) -> Vec<f64> {
    let inside = fat.mask.to_bools();
    let d = distance_transform_3d(fat.geometry(), &inside);
    fat.voxels.iter().map(|&i| 2.0 * d[i]).collect()
}

fn exposed_area(fat: &FatMask, voxels: &[usize]) -> f64 {
    let faces = shape::exposed_faces(fat.geometry(), voxels, |j| fat.mask.contains(j));
    shape::surface_area_mm2(fat.geometry(), faces)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        sorted_sum(values) / values.len() as f64
    }
}

pub fn morph_features(fat: &FatMask) -> Morphology {
    if fat.is_empty() {
        return Morphology::default();
    }
    let g = fat.geometry();
    let cov = shape::center_covariance(g, &fat.voxels);
    let eig = shape::sym3_eigenvalues(cov);
    Morphology {
        volume_ml: fat.voxels.len() as f64 * g.voxel_volume_mm3() / 1000.0,
        axis_lengths_mm: eig.map(|e| 4.0 * e.max(0.0).sqrt()),
        mean_thickness_mm: mean(&thickness_map(fat)),
        surface_area_mm2: exposed_area(fat, &fat.voxels),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Intensity {
    pub moments: Moments,
    pub entropy_bits: f64,
    pub histogram: [u64; FAT_BANDS],
    pub p10: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p90: f64,
}

fn fat_histogram(h: &HuHistogram) -> [u64; FAT_BANDS] {
    let mut out = [0; FAT_BANDS];
    for (v, c) in h.iter() {
        if (FAT_HU_MIN..=FAT_HU_MAX).contains(&v) {
            out[band_index(v)] += c;
        }
    }
    out
}

fn intensity_of(h: &HuHistogram) -> Intensity {
    if h.is_empty() {
        return Intensity::default();
    }
    let histogram = fat_histogram(h);
    let pct = |p: f64| h.percentile(p).map_or(0.0, f64::from);
    Intensity {
        moments: h.moments(),
        entropy_bits: entropy_bits(&histogram),
        histogram,
        p10: pct(0.10),
        p25: pct(0.25),
        median: pct(0.50),
        p75: pct(0.75),
        p90: pct(0.90),
    }
}

fn histogram_of(volume: &Volume, voxels: impl Iterator<Item = usize>) -> HuHistogram {
    let mut h = HuHistogram::new();
    for i in voxels {
        h.add(volume.get(i));
    }
    h
}

pub fn intensity_features(volume: &Volume, fat: &FatMask) -> Result<Intensity> {
    volume.geometry.ensure_same(fat.geometry(), "fat mask")?;
    if fat.is_empty() {
        return Err(Error::EmptyFat);
    }
    Ok(intensity_of(&histogram_of(volume, fat.voxels.iter().copied())))
}

/// Slab and ribbon per fat voxel (0-based, parallel to `FatMask::voxels`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlabRibbonPartition {
    /// 0 = Q1 (inferior) .. 3 = Q4 (superior).
    pub slab: Vec<u8>,
    /// 0 = R1 (outermost) .. 3 = R4 (innermost).
    pub ribbon: Vec<u8>,
}

/// Slab of slice `z` given the pericardium's inclusive slice range: the
/// slice center's position within the extent, cut at quarters.
pub fn slab_of(z: usize, z_lo: usize, z_hi: usize) -> u8 {
    let n = z_hi - z_lo + 1;
    ((4 * (z - z_lo) + 2) / n).min(3) as u8
}

/// Ribbon from a normalized inward distance in (0, 1].
pub fn ribbon_of(distance: f64, slice_max: f64) -> u8 {
    if slice_max <= 0.0 {
        return 0;
    }
    ((4.0 * distance / slice_max).floor() as i64).clamp(0, 3) as u8
}

pub fn spatial_partition(fat: &FatMask, pericardium: &MaskVolume) -> Result<SlabRibbonPartition> {
    let g = *fat.geometry();
    g.ensure_same(&pericardium.geometry, "pericardium mask")?;
    let Some((lo, hi)) = pericardium.bounding_box() else {
        return Err(Error::EmptyPericardium);
    };
    let [nx, ny, _] = g.dims;
    let plane = g.slice_len();
    let mut slab = Vec::with_capacity(fat.voxels.len());
    let mut ribbon = Vec::with_capacity(fat.voxels.len());

    let mut k = 0;
    while k < fat.voxels.len() {
        let z = g.coords(fat.voxels[k])[2];
        let base = z * plane;
        let slice: Vec<bool> = (0..plane).map(|p| pericardium.contains(base + p)).collect();
        let dist = distance_transform_2d(&slice, [nx, ny], [g.spacing_mm[0], g.spacing_mm[1]]);
        let dmax = slice
            .iter()
            .zip(&dist)
            .filter(|(inside, _)| **inside)
            .map(|(_, d)| *d)
            .fold(0.0, f64::max);
        let s = slab_of(z, lo[2], hi[2]);
        while k < fat.voxels.len() && fat.voxels[k] / plane == z {
            let i = fat.voxels[k];
            slab.push(s);
            ribbon.push(ribbon_of(dist[i - base], dmax));
            k += 1;
        }
    }
    Ok(SlabRibbonPartition { slab, ribbon })
}

/// Integer voxel accounting behind the volume features.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FatCounts {
    pub total: u64,
    pub pericardium: u64,
    pub slab: [u64; 4],
    pub ribbon: [u64; 4],
    pub slab_ribbon: [[u64; 4]; 4],
    pub slab_band: [[u64; FAT_BANDS]; 4],
    pub ribbon_band: [[u64; FAT_BANDS]; 4],
}

pub fn count_partition(volume: &Volume, fat: &FatMask, partition: &SlabRibbonPartition) -> FatCounts {
    let mut c = FatCounts {
        total: fat.voxels.len() as u64,
        ..Default::default()
    };
    for (k, &i) in fat.voxels.iter().enumerate() {
        let s = partition.slab[k] as usize;
        let r = partition.ribbon[k] as usize;
        let b = band_index(volume.get(i));
        c.slab[s] += 1;
        c.ribbon[r] += 1;
        c.slab_ribbon[s][r] += 1;
        c.slab_band[s][b] += 1;
        c.ribbon_band[r][b] += 1;
    }
    c
}

/// Slab × band volumes in mL, indexed `[slab][band]`.
pub fn banded_volumes(volume: &Volume, fat: &FatMask, partition: &SlabRibbonPartition) -> [[f64; FAT_BANDS]; 4] {
    let ml = fat.geometry().voxel_volume_mm3() / 1000.0;
    count_partition(volume, fat, partition).slab_band.map(|row| row.map(|c| c as f64 * ml))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FatFeatures {
    pub counts: FatCounts,
    pub morphology: Morphology,
    pub intensity: Intensity,
    pub pericardium_volume_ml: f64,
    pub slab_intensity: [Moments; 4],
    pub ribbon_intensity: [Moments; 4],
    pub slab_ribbon_intensity: [[Moments; 4]; 4],
    pub slab_thickness_mm: [f64; 4],
    pub slab_surface_mm2: [f64; 4],
    /// mL per voxel.
    pub voxel_ml: f64,
}

impl FatFeatures {
    pub fn volume_ml(&self, count: u64) -> f64 {
        count as f64 * self.voxel_ml
    }

    pub fn total_volume_ml(&self) -> f64 {
        self.volume_ml(self.counts.total)
    }

    pub fn slab_volumes_ml(&self) -> [f64; 4] {
        self.counts.slab.map(|c| self.volume_ml(c))
    }

    pub fn ribbon_volumes_ml(&self) -> [f64; 4] {
        self.counts.ribbon.map(|c| self.volume_ml(c))
    }

    pub fn banded_volumes_ml(&self) -> [[f64; FAT_BANDS]; 4] {
        self.counts.slab_band.map(|row| row.map(|c| self.volume_ml(c)))
    }

    /// Value of a slab × band feature such as `PQ4_Vol_70_50`.
    pub fn banded(&self, slab: usize, band: usize) -> f64 {
        self.volume_ml(self.counts.slab_band[slab][band])
    }
}

/// Full fat-omics extraction for one scan. An empty fat mask yields zero
/// features; an empty pericardium is an error.
pub fn extract_fat(volume: &Volume, pericardium: &MaskVolume, config: &FatConfig) -> Result<FatFeatures> {
    let fat = segment_fat_with(volume, pericardium, config)?;
    let partition = spatial_partition(&fat, pericardium)?;
    let counts = count_partition(volume, &fat, &partition);
    let g = volume.geometry;
    let voxel_ml = g.voxel_volume_mm3() / 1000.0;

    let mut slab_h: [HuHistogram; 4] = Default::default();
    let mut ribbon_h: [HuHistogram; 4] = Default::default();
    let mut cell_h: [[HuHistogram; 4]; 4] = Default::default();
    let mut slab_voxels: [Vec<usize>; 4] = Default::default();
    let mut slab_thick: [Vec<f64>; 4] = Default::default();
    let thickness = if fat.is_empty() { Vec::new() } else { thickness_map(&fat) };
    for (k, &i) in fat.voxels.iter().enumerate() {
        let s = partition.slab[k] as usize;
        let r = partition.ribbon[k] as usize;
        let hu = volume.get(i);
        slab_h[s].add(hu);
        ribbon_h[r].add(hu);
        cell_h[s][r].add(hu);
        slab_voxels[s].push(i);
        slab_thick[s].push(thickness[k]);
    }

    let morphology = if fat.is_empty() {
        Morphology::default()
    } else {
        let cov = shape::center_covariance(&g, &fat.voxels);
        Morphology {
            volume_ml: counts.total as f64 * voxel_ml,
            axis_lengths_mm: shape::sym3_eigenvalues(cov).map(|e| 4.0 * e.max(0.0).sqrt()),
            mean_thickness_mm: mean(&thickness),
            surface_area_mm2: exposed_area(&fat, &fat.voxels),
        }
    };

    Ok(FatFeatures {
        morphology,
        intensity: intensity_of(&histogram_of(volume, fat.voxels.iter().copied())),
        pericardium_volume_ml: pericardium.count() as f64 * voxel_ml,
        slab_intensity: slab_h.each_ref().map(HuHistogram::moments),
        ribbon_intensity: ribbon_h.each_ref().map(HuHistogram::moments),
        slab_ribbon_intensity: cell_h.each_ref().map(|row| row.each_ref().map(HuHistogram::moments)),
        slab_thickness_mm: slab_thick.each_ref().map(|t| mean(t)),
        slab_surface_mm2: slab_voxels.each_ref().map(|v| if v.is_empty() { 0.0 } else { exposed_area(&fat, v) }),
        counts: FatCounts {
            pericardium: pericardium.count() as u64,
            ..counts
        },
        voxel_ml,
    })
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn push_moments(row: &mut FeatureRow, prefix: &str, scale: &str, m: &Moments) {
    row.push(format!("{prefix}_hu_min"), scale, "HU", m.min);
    row.push(format!("{prefix}_hu_max"), scale, "HU", m.max);
    row.push(format!("{prefix}_hu_mean"), scale, "HU", m.mean);
    row.push(format!("{prefix}_hu_sd"), scale, "HU", m.sd());
    row.push(format!("{prefix}_hu_skewness"), scale, "1", m.skewness);
    row.push(format!("{prefix}_hu_kurtosis"), scale, "1", m.kurtosis);
}

/// The 211 fat-omics columns in registry order.
pub fn fat_feature_vector(f: &FatFeatures) -> FeatureRow {
    let mut row = FeatureRow::default();
    let c = &f.counts;
    let m = &f.morphology;
    row.push("fat_volume_ml", "morphology", "mL", m.volume_ml);
    row.push("fat_axis_major_mm", "morphology", "mm", m.axis_lengths_mm[0]);
    row.push("fat_axis_mid_mm", "morphology", "mm", m.axis_lengths_mm[1]);
    row.push("fat_axis_minor_mm", "morphology", "mm", m.axis_lengths_mm[2]);
    row.push("fat_thickness_mean_mm", "morphology", "mm", m.mean_thickness_mm);
    row.push("fat_surface_area_mm2", "morphology", "mm2", m.surface_area_mm2);
    row.push("fat_pericardium_volume_ml", "morphology", "mL", f.pericardium_volume_ml);
    row.push("fat_pericardium_fraction", "morphology", "1", ratio(c.total, c.pericardium));

    let it = &f.intensity;
    push_moments(&mut row, "fat", "intensity", &it.moments);
    row.push("fat_hu_entropy_bits", "intensity", "bits", it.entropy_bits);
    row.push("fat_hu_p10", "intensity", "HU", it.p10);
    row.push("fat_hu_median", "intensity", "HU", it.median);
    row.push("fat_hu_p90", "intensity", "HU", it.p90);
    row.push("fat_hu_iqr", "intensity", "HU", it.p75 - it.p25);
    for (b, n) in it.histogram.iter().enumerate() {
        row.push(format!("fat_hist_{}", band_tag(b)), "intensity", "voxels", *n as f64);
    }

    let sp = "spatial";
    for s in 0..4 {
        row.push(format!("fat_Q{}_volume_ml", s + 1), sp, "mL", f.volume_ml(c.slab[s]));
    }
    for r in 0..4 {
        row.push(format!("fat_R{}_volume_ml", r + 1), sp, "mL", f.volume_ml(c.ribbon[r]));
    }
    for s in 0..4 {
        for r in 0..4 {
            row.push(format!("fat_Q{}R{}_volume_ml", s + 1, r + 1), sp, "mL", f.volume_ml(c.slab_ribbon[s][r]));
        }
    }
    for s in 0..4 {
        for b in 0..FAT_BANDS {
            row.push(format!("fat_PQ{}_Vol_{}", s + 1, band_tag(b)), sp, "mL", f.volume_ml(c.slab_band[s][b]));
        }
    }
    for r in 0..4 {
        for b in 0..FAT_BANDS {
            row.push(format!("fat_PR{}_Vol_{}", r + 1, band_tag(b)), sp, "mL", f.volume_ml(c.ribbon_band[r][b]));
        }
    }
    for s in 0..4 {
        push_moments(&mut row, &format!("fat_Q{}", s + 1), sp, &f.slab_intensity[s]);
    }
    for r in 0..4 {
        push_moments(&mut row, &format!("fat_R{}", r + 1), sp, &f.ribbon_intensity[r]);
    }
    for s in 0..4 {
        for r in 0..4 {
            row.push(format!("fat_Q{}R{}_hu_mean", s + 1, r + 1), sp, "HU", f.slab_ribbon_intensity[s][r].mean);
        }
    }
    for s in 0..4 {
        for r in 0..4 {
            row.push(format!("fat_Q{}R{}_hu_sd", s + 1, r + 1), sp, "HU", f.slab_ribbon_intensity[s][r].sd());
        }
    }
    for s in 0..4 {
        row.push(format!("fat_Q{}_thickness_mean_mm", s + 1), sp, "mm", f.slab_thickness_mm[s]);
    }
    for s in 0..4 {
        row.push(format!("fat_Q{}_surface_area_mm2", s + 1), sp, "mm2", f.slab_surface_mm2[s]);
    }
    for s in 0..4 {
        row.push(format!("fat_Q{}_fraction", s + 1), sp, "1", ratio(c.slab[s], c.total));
    }
    for r in 0..4 {
        row.push(format!("fat_R{}_fraction", r + 1), sp, "1", ratio(c.ribbon[r], c.total));
    }
    row
}

pub fn fat_registry() -> Vec<ColumnSpec> {
    let empty = FatFeatures {
        counts: FatCounts::default(),
        morphology: Morphology::default(),
        intensity: Intensity::default(),
        pericardium_volume_ml: 0.0,
        slab_intensity: Default::default(),
        ribbon_intensity: Default::default(),
        slab_ribbon_intensity: Default::default(),
        slab_thickness_mm: [0.0; 4],
        slab_surface_mm2: [0.0; 4],
        voxel_ml: 0.0,
    };
    fat_feature_vector(&empty).columns
}
