//! DeLong and McNemar between a full model and one without the strongest column.

use cadomics::eval::{delong_test, mcnemar_test};
use cadomics::gbdt::{fit, GBDTConfig};
use cadomics::phantom::{generate_cohort, CohortSpec, Informative, Noise};

fn main() -> cadomics::Result<()> {
    let table = generate_cohort(&CohortSpec {
        n_rows: 800,
        n_features: 8,
        names: None,
        informative: vec![Informative { index: 0, coef: 2.0 }, Informative { index: 1, coef: 1.0 }],
        noise: Noise::Normal { mean: 0.0, sd: 1.0 },
        prevalence: 0.3,
        seed: 12,
    })?;
    let train = table.subset_rows(&(0..500).collect::<Vec<_>>());
    let test = table.subset_rows(&(500..800).collect::<Vec<_>>());
    let config = GBDTConfig {
        iterations: 100,
        learning_rate: 0.05,
        depth: 4,
        early_stopping: false,
        ..Default::default()
    };

    let full = fit(&train, None, &config)?;
    let reduced = fit(&train.filter_columns(|c| c != "x00"), None, &config)?;
    let a = full.predict_table(&test)?;
    let b = reduced.predict_table(&test)?;

    let d = delong_test(&a, &b, test.labels())?;
    println!("AUROC {:.4} vs {:.4}, z {:.3}, p {:.2e}", d.auc_a, d.auc_b, d.z, d.p);

    let pa: Vec<u8> = a.iter().map(|&s| (s >= 0.5) as u8).collect();
    let pb: Vec<u8> = b.iter().map(|&s| (s >= 0.5) as u8).collect();
    let m = mcnemar_test(&pa, &pb, test.labels())?;
    println!("McNemar b={} c={} statistic {:.3} p {:.4} exact {}", m.b, m.c, m.statistic, m.p, m.exact);
    Ok(())
}
