//! Volumetric data types and generic voxel utilities.
//!
//! Voxels are stored x-fastest, then y, then z. The z axis points superiorly:
//! the slice with the largest z index is the top of the scan.

mod components;
mod distance;
mod io;

pub use components::{connected_components, Component, ComponentSet, Connectivity};
pub use distance::{distance_transform_2d, distance_transform_3d, squared_distance_transform};
pub use io::{load_mask, load_volume, save_mask, save_volume};
pub(crate) use io::write_atomic;

use crate::error::{Error, Result};

/// Lowest HU kept after load.
pub const HU_MIN: i16 = -1024;
/// Highest HU kept after load.
pub const HU_MAX: i16 = 4095;

/// Grid shape and physical placement shared by a volume and its masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGeometry(format!("dims {dims:?} must all be >= 1")));
        }
        if spacing_mm.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing_mm:?} must be finite and positive"
            )));
        }
        if origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry(format!("origin {origin_mm:?} must be finite")));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidGeometry(format!("dims {dims:?} overflow")))?;
        Ok(Geometry {
            dims,
            spacing_mm,
            origin_mm,
        })
    }

    /// Unit-spaced geometry at the origin.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Physical position of a voxel center.
    pub fn position_mm(&self, index: usize) -> [f64; 3] {
        let c = self.coords(index);
        [
            self.origin_mm[0] + c[0] as f64 * self.spacing_mm[0],
            self.origin_mm[1] + c[1] as f64 * self.spacing_mm[1],
            self.origin_mm[2] + c[2] as f64 * self.spacing_mm[2],
        ]
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm[0] * self.spacing_mm[1] * self.spacing_mm[2]
    }

    pub fn slice_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    /// Decimal strings written to headers. Shortest round-trip formatting, so
    /// parsing them back reproduces the exact binary value.
    pub fn spacing_strings(&self) -> [String; 3] {
        self.spacing_mm.map(decimal)
    }

    pub fn origin_strings(&self) -> [String; 3] {
        self.origin_mm.map(decimal)
    }

    /// Header-level equality: dims plus the decimal strings of spacing and origin.
    pub fn same_as(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self.spacing_strings() == other.spacing_strings()
            && self.origin_strings() == other.origin_strings()
    }

    pub fn ensure_same(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: dims {:?} spacing {:?} origin {:?} vs dims {:?} spacing {:?} origin {:?}",
                self.dims,
                self.spacing_strings(),
                self.origin_strings(),
                other.dims,
                other.spacing_strings(),
                other.origin_strings()
            )))
        }
    }
}

pub(crate) fn decimal(v: f64) -> String {
    format!("{v:?}")
}

/// Product of the voxel spacing components, in mm³.
pub fn voxel_volume_mm3(volume: &Volume) -> f64 {
    volume.geometry.voxel_volume_mm3()
}

/// A CT volume in Hounsfield units.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub geometry: Geometry,
    voxels: Vec<i16>,
}

impl Volume {
    /// Builds a volume, clamping HU into [`HU_MIN`, `HU_MAX`].
    pub fn new(geometry: Geometry, mut voxels: Vec<i16>) -> Result<Self> {
        if voxels.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} voxels for dims {:?}",
                voxels.len(),
                geometry.dims
            )));
        }
        for v in &mut voxels {
            *v = (*v).clamp(HU_MIN, HU_MAX);
        }
        Ok(Volume { geometry, voxels })
    }

    pub fn filled(geometry: Geometry, hu: i16) -> Self {
        Volume {
            geometry,
            voxels: vec![hu.clamp(HU_MIN, HU_MAX); geometry.len()],
        }
    }

    pub fn voxels(&self) -> &[i16] {
        &self.voxels
    }

    #[inline]
    pub fn get(&self, index: usize) -> i16 {
        self.voxels[index]
    }

    pub fn set(&mut self, index: usize, hu: i16) {
        self.voxels[index] = hu.clamp(HU_MIN, HU_MAX);
    }
}

/// What a mask's labels mean, which fixes the allowed code set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Heart or pericardium: 0 outside, 1 inside.
    Binary,
    /// Coronary territories: 0 background, 1 LM, 2 LAD, 3 LCX, 4 RCA.
    Territory,
}

impl MaskKind {
    pub fn max_label(self) -> u8 {
        match self {
            MaskKind::Binary => 1,
            MaskKind::Territory => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskKind::Binary => "binary",
            MaskKind::Territory => "territory",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    pub geometry: Geometry,
    pub kind: MaskKind,
    labels: Vec<u8>,
}

impl MaskVolume {
    pub fn new(geometry: Geometry, kind: MaskKind, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} labels for dims {:?}",
                labels.len(),
                geometry.dims
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > kind.max_label()) {
            return Err(Error::InvalidLabel {
                value: bad,
                kind: kind.name(),
            });
        }
        Ok(MaskVolume {
            geometry,
            kind,
            labels,
        })
    }

    pub fn empty(geometry: Geometry, kind: MaskKind) -> Self {
        MaskVolume {
            geometry,
            kind,
            labels: vec![0; geometry.len()],
        }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, index: usize) -> u8 {
        self.labels[index]
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.labels[index] != 0
    }

    pub fn set(&mut self, index: usize, label: u8) -> Result<()> {
        if label > self.kind.max_label() {
            return Err(Error::InvalidLabel {
                value: label,
                kind: self.kind.name(),
            });
        }
        self.labels[index] = label;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l != 0).collect()
    }

    /// Bounding box of nonzero voxels as inclusive index ranges.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        bounding_box(&self.geometry, self.labels.iter().enumerate().filter(|(_, &l)| l != 0).map(|(i, _)| i))
    }

    /// Diagonal of the bounding box spanned by voxel centers, in mm.
    pub fn bbox_diagonal_mm(&self) -> f64 {
        match self.bounding_box() {
            Some((lo, hi)) => bbox_diagonal(&self.geometry, lo, hi),
            None => 0.0,
        }
    }
}

pub(crate) fn bounding_box(
    geometry: &Geometry,
    indices: impl Iterator<Item = usize>,
) -> Option<([usize; 3], [usize; 3])> {
    let mut bounds: Option<([usize; 3], [usize; 3])> = None;
    for i in indices {
        let c = geometry.coords(i);
        match &mut bounds {
            None => bounds = Some((c, c)),
            Some((lo, hi)) => {
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
        }
    }
    bounds
}

pub(crate) fn bbox_diagonal(geometry: &Geometry, lo: [usize; 3], hi: [usize; 3]) -> f64 {
    let mut sum = 0.0;
    for a in 0..3 {
        let t = (hi[a] - lo[a]) as f64 * geometry.spacing_mm[a];
        sum += t * t;
    }
    sum.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_volume_examples() {
        let g = Geometry::new([1, 1, 1], [1.0, 1.0, 1.0], [0.0; 3]).unwrap();
        assert_eq!(g.voxel_volume_mm3(), 1.0);
        let g = Geometry::new([1, 1, 1], [0.5, 0.5, 3.0], [0.0; 3]).unwrap();
        assert_eq!(g.voxel_volume_mm3(), 0.75);
        let g = Geometry::new([1, 1, 1], [0.488, 0.488, 2.5], [0.0; 3]).unwrap();
        assert!((g.voxel_volume_mm3() - 0.59536).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(Geometry::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(Geometry::new([1, 1, 1], [1.0, f64::NAN, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn clamps_hu() {
        let g = Geometry::unit([3, 1, 1]).unwrap();
        let v = Volume::new(g, vec![-3000, 0, 5000]).unwrap();
        assert_eq!(v.voxels(), &[HU_MIN, 0, HU_MAX]);
    }

    #[test]
    fn mask_label_codes() {
        let g = Geometry::unit([2, 1, 1]).unwrap();
        assert!(MaskVolume::new(g, MaskKind::Binary, vec![0, 2]).is_err());
        assert!(MaskVolume::new(g, MaskKind::Territory, vec![0, 4]).is_ok());
        assert!(MaskVolume::new(g, MaskKind::Territory, vec![5, 0]).is_err());
    }

    #[test]
    fn index_coords_roundtrip() {
        let g = Geometry::unit([3, 4, 5]).unwrap();
        for i in 0..g.len() {
            let [x, y, z] = g.coords(i);
            assert_eq!(g.index(x, y, z), i);
        }
    }

    #[test]
    fn geometry_string_equality() {
        let a = Geometry::new([2, 2, 1], [0.5, 0.5, 3.0], [0.0; 3]).unwrap();
        let mut b = a;
        assert!(a.same_as(&b));
        b.spacing_mm[2] = 3.0000000000000004;
        assert!(!a.same_as(&b));
        assert!(a.ensure_same(&b, "test").is_err());
    }
}
