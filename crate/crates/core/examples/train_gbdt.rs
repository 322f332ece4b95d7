//! Fit a boosted model on a planted cohort, save it, reload it, score rows.

use cadomics::eval::auroc;
use cadomics::gbdt::{fit, GBDTConfig, Model};
use cadomics::phantom::{generate_cohort, CohortSpec, Informative, Noise};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = CohortSpec {
        n_rows: 600,
        n_features: 12,
        names: None,
        informative: vec![Informative { index: 0, coef: 2.0 }, Informative { index: 5, coef: -1.5 }],
        noise: Noise::Normal { mean: 0.0, sd: 1.0 },
        prevalence: 0.25,
        seed: 1,
    };
    let table = generate_cohort(&spec)?;
    let train: Vec<usize> = (0..table.n_rows()).filter(|i| i % 4 != 0).collect();
    let test: Vec<usize> = (0..table.n_rows()).filter(|i| i % 4 == 0).collect();
    let (train, test) = (table.subset_rows(&train), table.subset_rows(&test));

    let config = GBDTConfig {
        iterations: 150,
        learning_rate: 0.05,
        depth: 4,
        early_stopping: false,
        ..Default::default()
    };
    let model = fit(&train, None, &config)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.json");
    model.save(&path)?;
    let reloaded = Model::load(&path)?;

    let scores = reloaded.predict_table(&test)?;
    println!("{} trees, held-out AUROC {:.4}", reloaded.trees.len(), auroc(&scores, test.labels())?);
    println!("reload identical: {}", reloaded.predict_table(&test)? == model.predict_table(&test)?);
    Ok(())
}
