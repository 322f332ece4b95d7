//! Synthetic CT phantoms with counted ground truth, and synthetic cohorts
//! with planted signal.

use rand::distr::{Distribution, Uniform as UniformDist};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal as NormalDist;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fat::{band_index, FAT_BANDS, FAT_HU_MAX, FAT_HU_MIN};
use crate::table::FeatureTable;
use crate::volume::{Geometry, MaskKind, MaskVolume, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipsoid {
    pub center_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
}

impl Ellipsoid {
    /// Whether `p` lies inside after shrinking every semi-axis by `inset`.
    fn contains(&self, p: [f64; 3], inset: f64) -> bool {
        let mut s = 0.0;
        for a in 0..3 {
            let r = self.semi_axes_mm[a] - inset;
            if r <= 0.0 {
                return false;
            }
            let d = (p[a] - self.center_mm[a]) / r;
            s += d * d;
        }
        s <= 1.0
    }
}

/// HU assignment for fat-shell voxels. Every value must lie in [-190, -30].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FatHu {
    Constant { hu: i16 },
    /// One value per slab, inferior first.
    PerSlab { hu: [i16; 4] },
    /// Independent draws from weighted values.
    Mixture { values: Vec<i16>, weights: Vec<f64> },
    /// Independent uniform integer draws from `[lo, hi]`.
    Uniform { lo: i16, hi: i16 },
}

impl FatHu {
    fn values(&self) -> Vec<i16> {
        match self {
            FatHu::Constant { hu } => vec![*hu],
            FatHu::PerSlab { hu } => hu.to_vec(),
            FatHu::Mixture { values, .. } => values.clone(),
            FatHu::Uniform { lo, hi } => vec![*lo, *hi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FatShell {
    pub thickness_mm: f64,
    pub hu: FatHu,
    /// Slabs (0 = inferior .. 3 = superior) that receive fat; all when absent.
    #[serde(default)]
    pub slabs: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Voxels with `center - extent/2 <= p < center + extent/2` on every axis.
    Box { center_mm: [f64; 3], extent_mm: [f64; 3] },
    Sphere { center_mm: [f64; 3], radius_mm: f64 },
}

impl Shape {
    fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            Shape::Box { center_mm, extent_mm } => (0..3).all(|a| {
                let lo = center_mm[a] - extent_mm[a] / 2.0;
                let hi = center_mm[a] + extent_mm[a] / 2.0;
                lo <= p[a] && p[a] < hi
            }),
            Shape::Sphere { center_mm, radius_mm } => {
                let d: f64 = (0..3).map(|a| (p[a] - center_mm[a]).powi(2)).sum();
                d <= radius_mm * radius_mm
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionSpec {
    pub shape: Shape,
    pub hu: i16,
    /// HU of the voxel nearest the shape center, when set.
    #[serde(default)]
    pub peak_hu: Option<i16>,
    pub territory: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    #[serde(default)]
    pub origin_mm: [f64; 3],
    pub background_hu: i16,
    pub heart_interior_hu: i16,
    /// Pericardium and heart mask (the two coincide in phantoms).
    pub pericardium: Ellipsoid,
    #[serde(default)]
    pub fat: Option<FatShell>,
    #[serde(default)]
    pub lesions: Vec<LesionSpec>,
    /// Reject lesions closer than one empty voxel in any direction.
    #[serde(default = "yes")]
    pub require_isolated: bool,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionTruth {
    pub voxel_count: u64,
    pub volume_mm3: f64,
    pub hu_min: i16,
    pub hu_max: i16,
    pub hu_mean: f64,
    pub agatston: f64,
    pub territory: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FatTruth {
    pub voxel_ml: f64,
    pub pericardium_voxels: u64,
    pub total_voxels: u64,
    pub slab_voxels: [u64; 4],
    pub band_voxels: [u64; FAT_BANDS],
    pub slab_band_voxels: [[u64; FAT_BANDS]; 4],
}

impl FatTruth {
    pub fn total_ml(&self) -> f64 {
        self.total_voxels as f64 * self.voxel_ml
    }
}

/// Expected extractor output, counted from the emitted arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub lesions: Vec<LesionTruth>,
    pub territory_agatston: [f64; 4],
    pub heart_agatston: f64,
    pub fat: FatTruth,
    pub notes: String,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub heart: MaskVolume,
    pub pericardium: MaskVolume,
    pub territory: MaskVolume,
    pub truth: GroundTruth,
}

/// Quadrant territory about the pericardium center in the axial plane.
fn quadrant(p: [f64; 3], c: [f64; 3]) -> u8 {
    match (p[0] >= c[0], p[1] >= c[1]) {
        (true, true) => 2,
        (false, true) => 3,
        (false, false) => 4,
        (true, false) => 1,
    }
}

fn hand_weight(peak: i16) -> f64 {
    if peak >= 400 {
        4.0
    } else if peak >= 300 {
        3.0
    } else if peak >= 200 {
        2.0
    } else if peak >= 130 {
        1.0
    } else {
        0.0
    }
}

/// Agatston by the textbook rule over one lesion's voxels: per slice, area
/// (if at least 1 mm²) times the peak-HU weight, scaled by thickness / 3.
fn hand_agatston(g: &Geometry, voxels: &[usize], volume: &Volume) -> f64 {
    let mut slices: Vec<(usize, u64, i16)> = Vec::new();
    let mut sorted = voxels.to_vec();
    sorted.sort_unstable();
    for i in sorted {
        let z = g.coords(i)[2];
        let hu = volume.get(i);
        match slices.last_mut() {
            Some(s) if s.0 == z => {
                s.1 += 1;
                s.2 = s.2.max(hu);
            }
            _ => slices.push((z, 1, hu)),
        }
    }
    let pixel = g.spacing_mm[0] * g.spacing_mm[1];
    let mut sum = 0.0;
    for (_, n, peak) in slices {
        let area = n as f64 * pixel;
        if area >= 1.0 {
            sum += area * hand_weight(peak);
        }
    }
    g.spacing_mm[2] / 3.0 * sum
}

fn validate_fat(fat: &FatShell) -> Result<()> {
    if !(fat.thickness_mm > 0.0) {
        return Err(Error::InvalidConfig("fat thickness must be positive".into()));
    }
    if let Some(v) = fat.hu.values().into_iter().find(|v| !(FAT_HU_MIN..=FAT_HU_MAX).contains(v)) {
        return Err(Error::InvalidConfig(format!("fat HU {v} outside [{FAT_HU_MIN}, {FAT_HU_MAX}]")));
    }
    match &fat.hu {
        FatHu::Mixture { values, weights } => {
            if values.is_empty() || values.len() != weights.len() || weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::InvalidConfig("fat mixture needs matching non-negative weights".into()));
            }
        }
        FatHu::Uniform { lo, hi } if lo > hi => {
            return Err(Error::InvalidConfig("fat uniform range is empty".into()));
        }
        _ => {}
    }
    if let Some(s) = &fat.slabs {
        if s.iter().any(|&q| q > 3) {
            return Err(Error::InvalidConfig("fat slabs must be in 0..=3".into()));
        }
    }
    Ok(())
}

/// Inclusive z range of a slab over the pericardium extent, matching the
/// extractor's quarter cut at slice centers.
fn slab_of_slice(z: usize, z_lo: usize, z_hi: usize) -> usize {
    let n = (z_hi - z_lo + 1) as f64;
    let t = ((z - z_lo) as f64 + 0.5) / n;
    ((t * 4.0).floor() as usize).min(3)
}

/// Voxelizes `spec` (a voxel belongs to a shape iff its center does) and
/// counts the ground truth from the result.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let g = Geometry::new(spec.dims, spec.spacing_mm, spec.origin_mm)?;
    if let Some(f) = &spec.fat {
        validate_fat(f)?;
    }
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per = &spec.pericardium;
    let inside: Vec<bool> = (0..n).map(|i| per.contains(g.position_mm(i), 0.0)).collect();
    let mut labels = vec![0u8; n];
    let mut territory = vec![0u8; n];
    let mut hu = vec![spec.background_hu; n];
    for i in 0..n {
        if inside[i] {
            labels[i] = 1;
            territory[i] = quadrant(g.position_mm(i), per.center_mm);
            hu[i] = spec.heart_interior_hu;
        }
    }
    let z_range = {
        let zs = (0..n).filter(|&i| inside[i]).map(|i| g.coords(i)[2]);
        zs.clone().min().zip(zs.max())
    };

    if let (Some(fat), Some((z_lo, z_hi))) = (&spec.fat, z_range) {
        let mixture = match &fat.hu {
            FatHu::Mixture { values, weights } => Some((
                values,
                rand::distr::weighted::WeightedIndex::new(weights)
                    .map_err(|e| Error::InvalidConfig(format!("fat mixture weights: {e}")))?,
            )),
            _ => None,
        };
        for i in 0..n {
            if !inside[i] || per.contains(g.position_mm(i), fat.thickness_mm) {
                continue;
            }
            let slab = slab_of_slice(g.coords(i)[2], z_lo, z_hi);
            if fat.slabs.as_ref().is_some_and(|s| !s.contains(&(slab as u8))) {
                continue;
            }
            hu[i] = match &fat.hu {
                FatHu::Constant { hu } => *hu,
                FatHu::PerSlab { hu } => hu[slab],
                FatHu::Mixture { .. } => {
                    let (values, idx) = mixture.as_ref().expect("mixture built above");
                    values[idx.sample(&mut rng)]
                }
                FatHu::Uniform { lo, hi } => rng.random_range(*lo..=*hi),
            };
        }
    }

    let mut lesion_voxels: Vec<Vec<usize>> = Vec::with_capacity(spec.lesions.len());
    for (li, l) in spec.lesions.iter().enumerate() {
        if !(1..=4).contains(&l.territory) {
            return Err(Error::InvalidLabel {
                kind: "territory",
                value: l.territory,
            });
        }
        let voxels: Vec<usize> = (0..n).filter(|&i| l.shape.contains(g.position_mm(i))).collect();
        if voxels.is_empty() || voxels.iter().any(|&i| !inside[i]) {
            return Err(Error::LesionOutsideHeart { index: li });
        }
        lesion_voxels.push(voxels);
    }
    if spec.require_isolated {
        for a in 0..lesion_voxels.len() {
            for b in a + 1..lesion_voxels.len() {
                if !isolated(&g, &lesion_voxels[a], &lesion_voxels[b]) {
                    return Err(Error::LesionsNotIsolated { a, b });
                }
            }
        }
    }
    for (l, voxels) in spec.lesions.iter().zip(&lesion_voxels) {
        for &i in voxels {
            hu[i] = l.hu;
            territory[i] = l.territory;
        }
        if let Some(peak) = l.peak_hu {
            let c = match &l.shape {
                Shape::Box { center_mm, .. } | Shape::Sphere { center_mm, .. } => *center_mm,
            };
            let nearest = voxels
                .iter()
                .copied()
                .min_by(|&a, &b| dist2(g.position_mm(a), c).total_cmp(&dist2(g.position_mm(b), c)).then(a.cmp(&b)))
                .expect("lesion is non-empty");
            hu[nearest] = peak;
        }
    }

    let volume = Volume::new(g, hu)?;
    let heart = MaskVolume::new(g, MaskKind::Binary, labels.clone())?;
    let pericardium = MaskVolume::new(g, MaskKind::Binary, labels)?;
    let territory = MaskVolume::new(g, MaskKind::Territory, territory)?;
    let truth = count_truth(&volume, &pericardium, &territory, &lesion_voxels);
    Ok(Phantom {
        volume,
        heart,
        pericardium,
        territory,
        truth,
    })
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

fn isolated(g: &Geometry, a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|&i| {
        let p = g.coords(i);
        b.iter().all(|&j| {
            let q = g.coords(j);
            (0..3).map(|k| p[k].abs_diff(q[k])).max().unwrap_or(0) >= 2
        })
    })
}

fn count_truth(volume: &Volume, pericardium: &MaskVolume, territory: &MaskVolume, lesions: &[Vec<usize>]) -> GroundTruth {
    let g = volume.geometry;
    let voxel_mm3 = g.voxel_volume_mm3();
    let mut out = Vec::with_capacity(lesions.len());
    let mut territory_agatston = [0.0; 4];
    for voxels in lesions {
        let hus: Vec<i16> = voxels.iter().map(|&i| volume.get(i)).collect();
        let agatston = hand_agatston(&g, voxels, volume);
        let t = territory.get(voxels[0]);
        territory_agatston[t as usize - 1] += agatston;
        out.push(LesionTruth {
            voxel_count: voxels.len() as u64,
            volume_mm3: voxels.len() as f64 * voxel_mm3,
            hu_min: *hus.iter().min().expect("non-empty"),
            hu_max: *hus.iter().max().expect("non-empty"),
            hu_mean: hus.iter().map(|&h| h as i64).sum::<i64>() as f64 / hus.len() as f64,
            agatston,
            territory: t,
        });
    }
    let mut fat = FatTruth {
        voxel_ml: voxel_mm3 / 1000.0,
        ..Default::default()
    };
    if let Some((lo, hi)) = pericardium.bounding_box() {
        for i in 0..g.len() {
            if !pericardium.contains(i) {
                continue;
            }
            fat.pericardium_voxels += 1;
            let h = volume.get(i);
            if !(FAT_HU_MIN..=FAT_HU_MAX).contains(&h) {
                continue;
            }
            let s = slab_of_slice(g.coords(i)[2], lo[2], hi[2]);
            let b = band_index(h);
            fat.total_voxels += 1;
            fat.slab_voxels[s] += 1;
            fat.band_voxels[b] += 1;
            fat.slab_band_voxels[s][b] += 1;
        }
    }
    GroundTruth {
        heart_agatston: territory_agatston.iter().sum(),
        territory_agatston,
        lesions: out,
        fat,
        notes: "counted from the emitted volume and masks; voxel-center inclusion, no voxelization tolerance".into(),
    }
}

/// Voxels of an `n`-voxel box around `v` (odd sides centered on `v`, even
/// sides extending one further in +), or `None` past the volume edge.
fn box_voxels(g: &Geometry, v: [usize; 3], n: [usize; 3]) -> Option<Vec<usize>> {
    let mut lo = [0usize; 3];
    for a in 0..3 {
        let start = (v[a] + 1).checked_sub(n[a].div_ceil(2))?;
        if start + n[a] > g.dims[a] {
            return None;
        }
        lo[a] = start;
    }
    let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
    for z in lo[2]..lo[2] + n[2] {
        for y in lo[1]..lo[1] + n[1] {
            for x in lo[0]..lo[0] + n[0] {
                out.push(g.index(x, y, z));
            }
        }
    }
    Some(out)
}

const IN_PLANE_SPACINGS: [f64; 5] = [0.5, 0.625, 0.75, 0.875, 1.0];
const SLICE_SPACINGS: [f64; 2] = [1.5, 3.0];
const BOUNDARY_PEAKS: [i16; 4] = [199, 200, 399, 400];

/// A random but valid spec: dyadic spacings (so every area and Agatston term
/// is exact in binary), a fat shell, and up to `max_lesions` isolated box
/// lesions, some peaking at density-band boundaries.
pub fn random_phantom_spec(seed: u64, max_lesions: usize) -> PhantomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sxy = *IN_PLANE_SPACINGS.choose(&mut rng).expect("non-empty");
    let sz = *SLICE_SPACINGS.choose(&mut rng).expect("non-empty");
    let dims = [48, 48, 24];
    let extent = |a: usize, s: f64| dims[a] as f64 * s;
    let center = [
        (dims[0] / 2) as f64 * sxy,
        (dims[1] / 2) as f64 * sxy,
        (dims[2] / 2) as f64 * sz,
    ];
    let semi = [
        extent(0, sxy) * rng.random_range(0.36..0.46),
        extent(1, sxy) * rng.random_range(0.36..0.46),
        extent(2, sz) * rng.random_range(0.36..0.46),
    ];
    let fat_hu = match rng.random_range(0..3) {
        0 => FatHu::Uniform { lo: FAT_HU_MIN, hi: FAT_HU_MAX },
        1 => FatHu::PerSlab {
            hu: std::array::from_fn(|_| rng.random_range(FAT_HU_MIN..=FAT_HU_MAX)),
        },
        _ => FatHu::Mixture {
            values: vec![-150, -90, -70, -31],
            weights: vec![1.0, 2.0, 3.0, 1.0],
        },
    };
    let mut spec = PhantomSpec {
        dims,
        spacing_mm: [sxy, sxy, sz],
        origin_mm: [0.0; 3],
        background_hu: -1000,
        heart_interior_hu: 40,
        pericardium: Ellipsoid {
            center_mm: center,
            semi_axes_mm: semi,
        },
        fat: Some(FatShell {
            thickness_mm: rng.random_range(2.0..5.0),
            hu: fat_hu,
            slabs: None,
        }),
        lesions: Vec::new(),
        require_isolated: true,
        seed,
    };
    let g = Geometry::new(dims, spec.spacing_mm, [0.0; 3]).expect("valid geometry");
    let inner = Ellipsoid {
        center_mm: center,
        semi_axes_mm: semi.map(|s| s * 0.7),
    };
    let target = rng.random_range(1..=max_lesions.max(1));
    let mut placed: Vec<Vec<usize>> = Vec::new();
    for _ in 0..200 {
        if spec.lesions.len() >= target {
            break;
        }
        let nx = rng.random_range(2..=4usize);
        let ny = rng.random_range(2..=4usize);
        let nz = rng.random_range(1..=3usize);
        let vx = rng.random_range(0..dims[0]);
        let vy = rng.random_range(0..dims[1]);
        let vz = rng.random_range(0..dims[2]);
        let half = |n: usize, s: f64| if n % 2 == 0 { s / 2.0 } else { 0.0 };
        let c = [
            vx as f64 * sxy + half(nx, sxy),
            vy as f64 * sxy + half(ny, sxy),
            vz as f64 * sz + half(nz, sz),
        ];
        let shape = Shape::Box {
            center_mm: c,
            extent_mm: [nx as f64 * sxy, ny as f64 * sxy, nz as f64 * sz],
        };
        let Some(voxels) = box_voxels(&g, [vx, vy, vz], [nx, ny, nz]) else {
            continue;
        };
        if voxels.iter().any(|&i| !inner.contains(g.position_mm(i), 0.0))
            || placed.iter().any(|p| !isolated(&g, p, &voxels))
        {
            continue;
        }
        let peak = if rng.random_bool(0.6) {
            *BOUNDARY_PEAKS.choose(&mut rng).expect("non-empty")
        } else {
            rng.random_range(130..=900)
        };
        let base = rng.random_range(130..=peak);
        spec.lesions.push(LesionSpec {
            shape,
            hu: base,
            peak_hu: Some(peak),
            territory: quadrant(g.position_mm(voxels[0]), center),
        });
        placed.push(voxels);
    }
    spec
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Informative {
    pub index: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSpec {
    pub n_rows: usize,
    pub n_features: usize,
    /// Column names; `x00`, `x01`, .. when absent.
    #[serde(default)]
    pub names: Option<Vec<String>>,
    #[serde(default)]
    pub informative: Vec<Informative>,
    pub noise: Noise,
    pub prevalence: f64,
    pub seed: u64,
}

impl CohortSpec {
    pub fn column_names(&self) -> Vec<String> {
        match &self.names {
            Some(n) => n.clone(),
            None => {
                let w = self.n_features.saturating_sub(1).to_string().len().max(2);
                (0..self.n_features).map(|i| format!("x{i:0w$}")).collect()
            }
        }
    }
}

/// Smallest intercept at which `count(u_i < sigmoid(l_i + b))` reaches
/// `target`. The count is monotone in `b`, so bisection converges.
fn solve_intercept(logits: &[f64], uniforms: &[f64], target: usize) -> f64 {
    let count = |b: f64| {
        logits
            .iter()
            .zip(uniforms)
            .filter(|(&l, &u)| u < crate::gbdt::sigmoid(l + b))
            .count()
    };
    let (mut lo, mut hi) = (-1000.0, 1000.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Noise features, with labels `u_i < sigmoid(Σ coef·x + b)` for uniform
/// draws `u_i`. The intercept b is solved on the drawn features and uniforms
/// so the positive count equals round(n × prevalence).
pub fn generate_cohort(spec: &CohortSpec) -> Result<FeatureTable> {
    let n = spec.n_rows;
    let p = spec.prevalence;
    if !(p > 0.0 && p < 1.0) || (n as f64) * p < 1.0 || (n as f64) * (1.0 - p) < 1.0 {
        return Err(Error::UnreachablePrevalence(p));
    }
    let names = spec.column_names();
    if names.len() != spec.n_features {
        return Err(Error::InvalidConfig(format!(
            "{} names for {} features",
            names.len(),
            spec.n_features
        )));
    }
    for inf in &spec.informative {
        if inf.index >= spec.n_features || !inf.coef.is_finite() {
            return Err(Error::InvalidConfig(format!("bad informative feature {inf:?}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(n * spec.n_features);
    match spec.noise {
        Noise::Normal { mean, sd } => {
            let d = NormalDist::new(mean, sd).map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
            values.extend((0..n * spec.n_features).map(|_| d.sample(&mut rng)));
        }
        Noise::Uniform { lo, hi } => {
            let d = UniformDist::new(lo, hi).map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
            values.extend((0..n * spec.n_features).map(|_| d.sample(&mut rng)));
        }
    }
    let logits: Vec<f64> = (0..n)
        .map(|r| {
            let row = &values[r * spec.n_features..(r + 1) * spec.n_features];
            spec.informative.iter().map(|inf| inf.coef * row[inf.index]).sum()
        })
        .collect();
    let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let target = ((n as f64 * p).round() as usize).clamp(1, n - 1);
    let b = solve_intercept(&logits, &uniforms, target);
    let labels: Vec<u8> = logits
        .iter()
        .zip(&uniforms)
        .map(|(&l, &u)| (u < crate::gbdt::sigmoid(l + b)) as u8)
        .collect();
    let w = n.saturating_sub(1).to_string().len().max(4);
    let ids = (0..n).map(|i| format!("P{i:0w$}")).collect();
    FeatureTable::new(names, ids, labels, values)
}
