//! Fat shell with a different HU per slab: slab volumes, ribbons and HU bands.

use cadomics::fat::{band_tag, extract_fat, FatConfig, FAT_BANDS};
use cadomics::phantom::{generate_phantom, Ellipsoid, FatHu, FatShell, PhantomSpec};

fn main() -> cadomics::Result<()> {
    let spec = PhantomSpec {
        dims: [48, 48, 24],
        spacing_mm: [0.75, 0.75, 1.5],
        origin_mm: [0.0; 3],
        background_hu: -1000,
        heart_interior_hu: 40,
        pericardium: Ellipsoid {
            center_mm: [18.0, 18.0, 18.0],
            semi_axes_mm: [15.0, 14.0, 16.0],
        },
        fat: Some(FatShell {
            thickness_mm: 3.0,
            hu: FatHu::PerSlab { hu: [-150, -110, -80, -45] },
            slabs: None,
        }),
        lesions: Vec::new(),
        require_isolated: true,
        seed: 3,
    };
    let ph = generate_phantom(&spec)?;
    let f = extract_fat(&ph.volume, &ph.pericardium, &FatConfig::default())?;

    println!(
        "fat {:.3} mL of pericardium {:.3} mL (truth {:.3} mL)",
        f.total_volume_ml(),
        f.pericardium_volume_ml,
        ph.truth.fat.total_ml()
    );
    println!("slabs  {:?}", f.slab_volumes_ml().map(|v| (v * 1000.0).round() / 1000.0));
    println!("ribbons {:?}", f.ribbon_volumes_ml().map(|v| (v * 1000.0).round() / 1000.0));
    for s in 0..4 {
        let line: Vec<String> = (0..FAT_BANDS)
            .filter(|&b| f.banded(s, b) > 0.0)
            .map(|b| format!("{}: {:.3}", band_tag(b), f.banded(s, b)))
            .collect();
        println!("Q{} {}", s + 1, line.join(", "));
    }
    Ok(())
}
