//! Score a two-lesion phantom and check every lesion against its ground truth.

use cadomics::calcium::{extract_calcium, CalciumConfig};
use cadomics::phantom::{generate_phantom, Ellipsoid, LesionSpec, PhantomSpec, Shape};

fn main() -> cadomics::Result<()> {
    let spec = PhantomSpec {
        dims: [64, 64, 32],
        spacing_mm: [0.5, 0.5, 3.0],
        origin_mm: [0.0; 3],
        background_hu: -1000,
        heart_interior_hu: 40,
        pericardium: Ellipsoid {
            center_mm: [16.0, 16.0, 48.0],
            semi_axes_mm: [14.0, 14.0, 40.0],
        },
        fat: None,
        lesions: vec![
            LesionSpec {
                shape: Shape::Box {
                    center_mm: [10.0, 10.0, 45.0],
                    extent_mm: [2.0, 2.0, 6.0],
                },
                hu: 250,
                peak_hu: Some(420),
                territory: 2,
            },
            LesionSpec {
                shape: Shape::Sphere {
                    center_mm: [22.0, 20.0, 60.0],
                    radius_mm: 2.0,
                },
                hu: 180,
                peak_hu: None,
                territory: 4,
            },
        ],
        require_isolated: true,
        seed: 0,
    };
    let ph = generate_phantom(&spec)?;
    let f = extract_calcium(&ph.volume, &ph.heart, &ph.territory, &CalciumConfig::default())?;

    for (lesion, truth) in f.lesions.iter().zip(&ph.truth.lesions) {
        println!(
            "lesion {} territory {}: {} voxels, agatston {:.3} (truth {:.3}), peak {} HU",
            lesion.id, lesion.territory, lesion.voxel_count, lesion.agatston, truth.agatston, lesion.hu_max
        );
    }
    println!(
        "heart agatston {:.3} (truth {:.3}), category {:?}",
        f.heart.total_agatston, ph.truth.heart_agatston, f.heart.cac_category
    );
    for t in &f.territories {
        println!("territory {}: {} lesions, agatston {:.3}", t.territory, t.lesion_count, t.agatston_sum);
    }
    Ok(())
}
