use cadomics::eval::{fit_fold, repeated_cv, stratified_kfold, CvConfig, FeatureGroup};
use cadomics::gbdt::{fit, GBDTConfig, Model, FORMAT_VERSION};
use cadomics::phantom::{generate_cohort, CohortSpec, Informative, Noise};
use cadomics::shap::{select_features_with_folds, shap_values, SelectionConfig};
use cadomics::table::FeatureTable;
use cadomics::Error;
use proptest::prelude::*;

fn cohort(n_rows: usize, n_features: usize, seed: u64) -> FeatureTable {
    generate_cohort(&CohortSpec {
        n_rows,
        n_features,
        names: None,
        informative: vec![
            Informative { index: 1, coef: 2.5 },
            Informative { index: 4, coef: -2.0 },
        ],
        noise: Noise::Normal { mean: 0.0, sd: 1.0 },
        prevalence: 0.3,
        seed,
    })
    .unwrap()
}

fn quick() -> GBDTConfig {
    GBDTConfig {
        iterations: 30,
        learning_rate: 0.1,
        depth: 3,
        threads: 2,
        ..Default::default()
    }
}

#[test]
fn fold_model_ignores_validation_rows() {
    let table = cohort(200, 6, 3);
    let plan = stratified_kfold(table.labels(), 5, 11).unwrap();
    let train = plan.training_rows(2);
    let base = fit_fold(&table, &train, &quick(), 17, 5).unwrap();

    let mut values = Vec::new();
    for r in 0..table.n_rows() {
        let held_out = plan.folds[2].contains(&r);
        values.extend(table.row(r).iter().map(|&v| if held_out { v * -7.0 + 100.0 } else { v }));
    }
    let mut labels = table.labels().to_vec();
    for &r in &plan.folds[2] {
        labels[r] = 1 - labels[r];
    }
    let poisoned = FeatureTable::new(table.columns().to_vec(), table.patient_ids().to_vec(), labels, values).unwrap();
    let other = fit_fold(&poisoned, &train, &quick(), 17, 5).unwrap();
    assert_eq!(base.to_json(), other.to_json());
}

#[test]
fn ranking_ignores_row_order() {
    let table = cohort(180, 8, 5);
    let plan = stratified_kfold(table.labels(), 3, 2).unwrap();
    let fold_of = plan.assignment(table.n_rows());
    let selection = SelectionConfig { folds: 3, top_k: 3, early_stopping_folds: 5 };
    let a = select_features_with_folds(&table, &quick(), &fold_of, &selection, 9).unwrap();

    let order: Vec<usize> = (0..table.n_rows()).rev().collect();
    let reversed = table.subset_rows(&order);
    let fold_rev: Vec<usize> = order.iter().map(|&r| fold_of[r]).collect();
    let b = select_features_with_folds(&reversed, &quick(), &fold_rev, &selection, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn planted_columns_rank_first() {
    let table = cohort(400, 10, 8);
    let plan = stratified_kfold(table.labels(), 5, 1).unwrap();
    let selection = SelectionConfig { top_k: 2, ..Default::default() };
    let r = select_features_with_folds(&table, &quick(), &plan.assignment(table.n_rows()), &selection, 4).unwrap();
    let mut top = r.selected.clone();
    top.sort();
    assert_eq!(top, ["x01", "x04"]);
    assert!(r.features.windows(2).all(|w| w[0].mean_abs_shap >= w[1].mean_abs_shap));
}

#[test]
fn single_class_fold_is_degenerate() {
    let table = cohort(60, 6, 2);
    let fold_of: Vec<usize> = table.labels().iter().map(|&l| l as usize).collect();
    let r = select_features_with_folds(&table, &quick(), &fold_of, &SelectionConfig::default(), 0);
    assert!(matches!(r, Err(Error::DegenerateFolds(_))));
}

#[test]
fn cv_report_is_thread_independent() {
    let table = cohort(150, 6, 4);
    let cv = CvConfig { k: 3, repeats: 4, master_seed: 8, ..Default::default() };
    let one = repeated_cv(&table, &GBDTConfig { threads: 1, ..quick() }, &cv, FeatureGroup::All);
    let four = repeated_cv(&table, &GBDTConfig { threads: 4, ..quick() }, &cv, FeatureGroup::All);
    // cohort columns carry no group prefix
    assert!(one.is_err() && four.is_err());

    let renamed = FeatureTable::new(
        table.columns().iter().map(|c| format!("clin_{c}")).collect(),
        table.patient_ids().to_vec(),
        table.labels().to_vec(),
        (0..table.n_rows()).flat_map(|r| table.row(r).to_vec()).collect(),
    )
    .unwrap();
    let one = repeated_cv(&renamed, &GBDTConfig { threads: 1, ..quick() }, &cv, FeatureGroup::Clinical).unwrap();
    let four = repeated_cv(&renamed, &GBDTConfig { threads: 4, ..quick() }, &cv, FeatureGroup::Clinical).unwrap();
    assert_eq!(one.to_json(), four.to_json());
    assert_eq!(one.per_repeat.len(), 4);
}

#[test]
fn model_document_round_trip() {
    let table = cohort(120, 5, 6);
    let model = fit(&table, None, &quick()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = Model::load(&path).unwrap();
    assert_eq!(back.to_json(), model.to_json());
    assert_eq!(back.predict_table(&table).unwrap(), model.predict_table(&table).unwrap());

    let bumped = model.to_json().replacen(
        &format!("\"version\": \"{FORMAT_VERSION}\""),
        "\"version\": \"99\"",
        1,
    );
    assert_ne!(bumped, model.to_json());
    assert!(matches!(Model::from_json(&bumped), Err(Error::IncompatibleVersion { .. })));
}

#[test]
fn prediction_follows_column_names() {
    let table = cohort(120, 5, 7);
    let model = fit(&table, None, &quick()).unwrap();
    let mut names = table.columns().to_vec();
    names.reverse();
    let shuffled = table.select_columns(&names).unwrap();
    assert_eq!(model.predict_table(&shuffled).unwrap(), model.predict_table(&table).unwrap());
    let missing = table.filter_columns(|c| c != "x02");
    assert!(model.predict_table(&missing).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn folds_partition_and_stratify(pos in 5usize..60, neg in 5usize..60, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(pos >= k && neg >= k);
        let mut labels = vec![1u8; pos];
        labels.extend(std::iter::repeat_n(0u8, neg));
        let plan = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0; labels.len()];
        for fold in &plan.folds {
            let p = fold.iter().filter(|&&r| labels[r] == 1).count();
            prop_assert!(p.abs_diff(pos / k) <= 1);
            prop_assert!(fold.len().abs_diff(labels.len() / k) <= 1);
            for &r in fold {
                seen[r] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(plan, stratified_kfold(&labels, k, seed).unwrap());
    }

    #[test]
    fn shap_sums_to_margin(seed in 0u64..1000, row in 0usize..80) {
        let table = cohort(80, 5, seed);
        let model = fit(&table, None, &GBDTConfig { iterations: 10, seed, ..quick() }).unwrap();
        let r = table.row(row);
        let e = shap_values(&model, r).unwrap();
        prop_assert!((e.margin() - model.predict_margin(r).unwrap()).abs() < 1e-9);
    }
}
