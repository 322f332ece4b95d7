use cadomics::calcium::{calcium_feature_vector, extract_calcium, CacCategory, CalciumConfig};
use cadomics::fat::{extract_fat, fat_feature_vector, FatConfig};
use cadomics::phantom::{generate_phantom, Ellipsoid, FatHu, FatShell, PhantomSpec};
use cadomics::volume::{Geometry, MaskKind, MaskVolume, Volume};
use cadomics::Error;

fn scan(dims: [usize; 3], spacing: [f64; 3]) -> (Volume, MaskVolume, MaskVolume) {
    let g = Geometry::new(dims, spacing, [0.0; 3]).unwrap();
    let volume = Volume::filled(g, 40);
    let heart = MaskVolume::new(g, MaskKind::Binary, vec![1; g.len()]).unwrap();
    let territory = MaskVolume::new(g, MaskKind::Territory, vec![2; g.len()]).unwrap();
    (volume, heart, territory)
}

fn paint(volume: &mut Volume, lo: [usize; 3], hi: [usize; 3], hu: i16) {
    let g = volume.geometry;
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                volume.set(g.index(x, y, z), hu);
            }
        }
    }
}

#[test]
fn single_slice_block_scores_area_times_weight() {
    let (mut v, heart, territory) = scan([12, 12, 6], [1.0, 1.0, 3.0]);
    paint(&mut v, [4, 4, 2], [7, 7, 3], 300);
    let f = extract_calcium(&v, &heart, &territory, &CalciumConfig::default()).unwrap();
    assert_eq!(f.lesions.len(), 1);
    // 9 mm² × weight 3 × (3 mm / 3 mm)
    assert_eq!(f.heart.total_agatston, 27.0);
    assert_eq!(f.lesions[0].volume_mm3, 27.0);
    assert_eq!(f.heart.cac_category, Some(CacCategory::Mild));
    let row = calcium_feature_vector(&f);
    assert_eq!(row.get("ca_LAD_agatston"), Some(27.0));
    assert_eq!(row.get("ca_RCA_agatston"), Some(0.0));
}

#[test]
fn slice_thickness_scales_the_score() {
    let (mut v, heart, territory) = scan([12, 12, 6], [1.0, 1.0, 1.5]);
    paint(&mut v, [4, 4, 2], [7, 7, 4], 450);
    let f = extract_calcium(&v, &heart, &territory, &CalciumConfig::default()).unwrap();
    // two slices of 9 mm² × weight 4 × 0.5
    assert_eq!(f.heart.total_agatston, 36.0);
}

#[test]
fn sub_millimetre_specks_are_ignored() {
    let (mut v, heart, territory) = scan([12, 12, 4], [0.5, 0.5, 3.0]);
    paint(&mut v, [2, 2, 1], [3, 4, 2], 600);
    let f = extract_calcium(&v, &heart, &territory, &CalciumConfig::default()).unwrap();
    assert!(f.lesions.is_empty());
    assert_eq!(f.heart.total_agatston, 0.0);
    assert_eq!(f.heart.cac_category, Some(CacCategory::Absent));
}

#[test]
fn diagonal_neighbours_depend_on_connectivity() {
    let (mut v, heart, territory) = scan([12, 12, 4], [1.0, 1.0, 3.0]);
    paint(&mut v, [2, 2, 1], [4, 4, 2], 300);
    paint(&mut v, [4, 4, 1], [6, 6, 2], 300);
    let count = |connectivity| {
        let cfg = CalciumConfig { connectivity, ..Default::default() };
        extract_calcium(&v, &heart, &territory, &cfg).unwrap().lesions.len()
    };
    assert_eq!(count(26), 1);
    assert_eq!(count(18), 1);
    assert_eq!(count(6), 2);
}

#[test]
fn calcium_outside_the_heart_is_not_counted() {
    let (mut v, _, territory) = scan([12, 12, 4], [1.0, 1.0, 3.0]);
    let g = v.geometry;
    paint(&mut v, [1, 1, 1], [4, 4, 2], 500);
    let mut heart = MaskVolume::empty(g, MaskKind::Binary);
    for z in 0..4 {
        for y in 6..12 {
            for x in 6..12 {
                heart.set(g.index(x, y, z), 1).unwrap();
            }
        }
    }
    let f = extract_calcium(&v, &heart, &territory, &CalciumConfig::default()).unwrap();
    assert!(f.lesions.is_empty());
}

#[test]
fn shifting_a_lesion_moves_only_its_position_features() {
    let (mut a, heart, territory) = scan([14, 14, 12], [1.0, 1.0, 2.0]);
    let mut b = a.clone();
    paint(&mut a, [4, 4, 3], [7, 6, 5], 350);
    paint(&mut b, [6, 7, 6], [9, 9, 8], 350);
    let cfg = CalciumConfig::default();
    let fa = extract_calcium(&a, &heart, &territory, &cfg).unwrap();
    let fb = extract_calcium(&b, &heart, &territory, &cfg).unwrap();
    let (la, lb) = (&fa.lesions[0], &fb.lesions[0]);
    assert_eq!(la.agatston, lb.agatston);
    assert_eq!(la.volume_mm3, lb.volume_mm3);
    assert_eq!(la.max_diameter_mm, lb.max_diameter_mm);
    assert_eq!(la.sphericity, lb.sphericity);
    assert_eq!((la.dist_to_top_mm - lb.dist_to_top_mm).abs(), 6.0);
}

#[test]
fn mismatched_geometry_is_rejected() {
    let (v, _, territory) = scan([8, 8, 4], [1.0, 1.0, 3.0]);
    let g = Geometry::new([8, 8, 5], [1.0, 1.0, 3.0], [0.0; 3]).unwrap();
    let heart = MaskVolume::new(g, MaskKind::Binary, vec![1; g.len()]).unwrap();
    assert!(matches!(
        extract_calcium(&v, &heart, &territory, &CalciumConfig::default()),
        Err(Error::GeometryMismatch(_))
    ));
}

#[test]
fn uniform_fat_splits_evenly_over_slabs() {
    let g = Geometry::new([10, 10, 8], [1.0, 1.0, 2.0], [0.0; 3]).unwrap();
    let mut v = Volume::filled(g, -1000);
    paint(&mut v, [2, 2, 0], [8, 8, 8], -100);
    let mut peri = MaskVolume::empty(g, MaskKind::Binary);
    for z in 0..8 {
        for y in 2..8 {
            for x in 2..8 {
                peri.set(g.index(x, y, z), 1).unwrap();
            }
        }
    }
    let f = extract_fat(&v, &peri, &FatConfig::default()).unwrap();
    let total = f.total_volume_ml();
    assert!((total - 0.576).abs() < 1e-12);
    for q in f.slab_volumes_ml() {
        assert_eq!(q, total / 4.0);
    }
    let ribbons: u64 = f.counts.ribbon.iter().sum();
    assert_eq!(ribbons, f.counts.total);
}

#[test]
fn hu_window_bounds_are_inclusive() {
    let g = Geometry::new([6, 6, 4], [1.0, 1.0, 1.0], [0.0; 3]).unwrap();
    let mut v = Volume::filled(g, 40);
    let peri = MaskVolume::new(g, MaskKind::Binary, vec![1; g.len()]).unwrap();
    for (i, hu) in [-191, -190, -30, -29].into_iter().enumerate() {
        v.set(g.index(i, 0, 0), hu);
    }
    let f = extract_fat(&v, &peri, &FatConfig::default()).unwrap();
    assert_eq!(f.counts.total, 2);
}

fn shell_phantom(hu: FatHu, slabs: Option<Vec<u8>>) -> PhantomSpec {
    PhantomSpec {
        dims: [40, 40, 24],
        spacing_mm: [0.75, 0.75, 1.5],
        origin_mm: [0.0; 3],
        background_hu: -1000,
        heart_interior_hu: 35,
        pericardium: Ellipsoid {
            center_mm: [15.0, 15.0, 18.0],
            semi_axes_mm: [12.0, 11.0, 15.0],
        },
        fat: Some(FatShell {
            thickness_mm: 2.5,
            hu,
            slabs,
        }),
        lesions: Vec::new(),
        require_isolated: true,
        seed: 1,
    }
}

#[test]
fn superior_fat_lands_in_its_slab_band() {
    let ph = generate_phantom(&shell_phantom(FatHu::Constant { hu: -60 }, Some(vec![3]))).unwrap();
    let f = extract_fat(&ph.volume, &ph.pericardium, &FatConfig::default()).unwrap();
    let row = fat_feature_vector(&f);
    let total = row.get("fat_volume_ml").unwrap();
    assert!(total > 0.0);
    assert_eq!(row.get("fat_PQ4_Vol_70_50"), Some(total));
    for q in 1..=3 {
        assert_eq!(row.get(&format!("fat_Q{q}_volume_ml")), Some(0.0));
    }
    assert_eq!(f.counts.total, ph.truth.fat.total_voxels);
}

#[test]
fn phantom_fat_counts_match_truth() {
    let ph = generate_phantom(&shell_phantom(
        FatHu::Mixture {
            values: vec![-180, -120, -75, -35],
            weights: vec![1.0, 2.0, 2.0, 1.0],
        },
        None,
    ))
    .unwrap();
    let f = extract_fat(&ph.volume, &ph.pericardium, &FatConfig::default()).unwrap();
    let t = &ph.truth.fat;
    assert_eq!(f.counts.total, t.total_voxels);
    assert_eq!(f.counts.slab, t.slab_voxels);
    assert_eq!(f.counts.slab_band, t.slab_band_voxels);
    assert_eq!(f.counts.pericardium, t.pericardium_voxels);
}

#[test]
fn no_fat_gives_zero_volumes() {
    let mut spec = shell_phantom(FatHu::Constant { hu: -100 }, None);
    spec.fat = None;
    let ph = generate_phantom(&spec).unwrap();
    let f = extract_fat(&ph.volume, &ph.pericardium, &FatConfig::default()).unwrap();
    let row = fat_feature_vector(&f);
    assert_eq!(row.get("fat_volume_ml"), Some(0.0));
    assert!(row.get("fat_pericardium_volume_ml").unwrap() > 0.0);
    assert!(row.names().filter(|n| n.ends_with("_volume_ml") && *n != "fat_pericardium_volume_ml").all(|n| row.get(n) == Some(0.0)));
}

#[test]
fn empty_pericardium_is_an_error() {
    let g = Geometry::new([6, 6, 4], [1.0, 1.0, 1.0], [0.0; 3]).unwrap();
    let v = Volume::filled(g, -100);
    let peri = MaskVolume::empty(g, MaskKind::Binary);
    assert!(matches!(extract_fat(&v, &peri, &FatConfig::default()), Err(Error::EmptyPericardium)));
}
