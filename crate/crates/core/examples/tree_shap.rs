//! Exact TreeSHAP for one row: local accuracy and agreement with brute force.

use cadomics::gbdt::{fit, GBDTConfig};
use cadomics::phantom::{generate_cohort, CohortSpec, Informative, Noise};
use cadomics::shap::{brute_force_shap, shap_values};

fn main() -> cadomics::Result<()> {
    let table = generate_cohort(&CohortSpec {
        n_rows: 400,
        n_features: 6,
        names: Some(["age", "bmi", "ldl", "hdl", "sbp", "noise"].map(String::from).to_vec()),
        informative: vec![
            Informative { index: 0, coef: 1.5 },
            Informative { index: 2, coef: 1.0 },
            Informative { index: 3, coef: -1.0 },
        ],
        noise: Noise::Normal { mean: 0.0, sd: 1.0 },
        prevalence: 0.3,
        seed: 9,
    })?;
    let model = fit(
        &table,
        None,
        &GBDTConfig {
            iterations: 40,
            learning_rate: 0.1,
            depth: 3,
            early_stopping: false,
            ..Default::default()
        },
    )?;

    let row = table.row(0);
    let exp = shap_values(&model, row)?;
    let brute = brute_force_shap(&model, row)?;
    println!("base value {:.6}", exp.base_value);
    for (i, name) in model.feature_names.iter().enumerate() {
        println!("{name:>5} {:+.6}  brute force {:+.6}", exp.values[i], brute[i]);
    }
    println!("sum {:.12}  margin {:.12}", exp.margin(), model.predict_margin(row)?);
    Ok(())
}
