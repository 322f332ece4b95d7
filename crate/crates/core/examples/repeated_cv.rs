//! Repeated stratified 5-fold CV of a clinical-only and a full feature set.

use cadomics::eval::{repeated_cv, CvConfig, FeatureGroup};
use cadomics::gbdt::GBDTConfig;
use cadomics::phantom::{generate_cohort, CohortSpec, Informative, Noise};

fn main() -> cadomics::Result<()> {
    let names: Vec<String> = (0..4)
        .map(|i| format!("clin_{i}"))
        .chain((0..4).map(|i| format!("ca_{i}")))
        .chain((0..4).map(|i| format!("fat_{i}")))
        .collect();
    let table = generate_cohort(&CohortSpec {
        n_rows: 300,
        n_features: names.len(),
        names: Some(names),
        informative: vec![
            Informative { index: 0, coef: 0.8 },
            Informative { index: 4, coef: 1.5 },
            Informative { index: 8, coef: 1.5 },
        ],
        noise: Noise::Normal { mean: 0.0, sd: 1.0 },
        prevalence: 0.3,
        seed: 2,
    })?;
    let gbdt = GBDTConfig {
        iterations: 60,
        learning_rate: 0.1,
        depth: 4,
        ..Default::default()
    };
    let cv = CvConfig { repeats: 10, master_seed: 5, ..Default::default() };

    for group in FeatureGroup::ALL {
        let r = repeated_cv(&table, &gbdt, &cv, group)?;
        let a = &r.aggregate;
        let show = |m: &cadomics::eval::MetricSummary| format!("{:.3}±{:.3}", m.mean.unwrap_or(f64::NAN), m.sd.unwrap_or(f64::NAN));
        println!(
            "{:<22} auroc {} auprc {} sens {} spec {} acc {} f1 {}",
            group.name(),
            show(&a.auroc),
            show(&a.auprc),
            show(&a.sensitivity),
            show(&a.specificity),
            show(&a.accuracy),
            show(&a.f1)
        );
    }
    Ok(())
}
