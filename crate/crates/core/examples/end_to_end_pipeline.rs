//! phantom -> extract -> select -> evaluate, the same stages the CLI runs.

use cadomics::pipeline::{run, Command, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut config = PipelineConfig::default();
    config.phantom.patients = 40;
    config.phantom.seed = 21;
    config.gbdt.iterations = 40;
    config.gbdt.learning_rate = 0.1;
    config.selection.top_k = 15;
    config.evaluation.repeats = 3;
    config.set_threads(2);

    config.out_dir = dir.path().join("phantom");
    report(run(Command::Phantom, &config)?);

    config.manifest = Some(config.out_dir.join("manifest.csv"));
    config.out_dir = dir.path().join("extract");
    report(run(Command::Extract, &config)?);

    config.features = Some(config.out_dir.join("features.csv"));
    config.out_dir = dir.path().join("select");
    report(run(Command::Select, &config)?);

    config.selected_features = Some(config.out_dir.join("selected_features.txt"));
    config.out_dir = dir.path().join("evaluate");
    report(run(Command::Evaluate, &config)?);

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config.out_dir.join("report.json"))?)?;
    println!("auroc {}", report["aggregate"]["auroc"]);
    Ok(())
}

fn report(s: cadomics::pipeline::RunSummary) {
    println!("{:?}: {} items, {} failures, {} files", s.command, s.items, s.failures.len(), s.outputs.len());
}
