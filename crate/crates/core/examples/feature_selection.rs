//! Rank 30 columns by cross-validated mean |SHAP| and keep the top five.

use cadomics::gbdt::GBDTConfig;
use cadomics::phantom::{generate_cohort, CohortSpec, Informative, Noise};
use cadomics::shap::{select_features_cv, SelectionConfig};

fn main() -> cadomics::Result<()> {
    let spec = CohortSpec {
        n_rows: 500,
        n_features: 30,
        names: None,
        informative: vec![
            Informative { index: 4, coef: 2.5 },
            Informative { index: 17, coef: -2.0 },
            Informative { index: 26, coef: 1.5 },
        ],
        noise: Noise::Uniform { lo: -1.0, hi: 1.0 },
        prevalence: 0.25,
        seed: 4,
    };
    let table = generate_cohort(&spec)?;
    let gbdt = GBDTConfig {
        iterations: 80,
        learning_rate: 0.1,
        depth: 4,
        ..Default::default()
    };
    let selection = SelectionConfig { top_k: 5, ..Default::default() };
    let ranking = select_features_cv(&table, &gbdt, &selection, 7)?;

    for f in ranking.features.iter().take(8) {
        println!("{:>2} {} {:.5}{}", f.rank, f.feature, f.mean_abs_shap, if f.selected { " *" } else { "" });
    }
    println!("selected: {}", ranking.selected.join(", "));
    Ok(())
}
