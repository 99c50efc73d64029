//! Subcommand implementations. Each one rebuilds what it needs from the run
//! config (datasets and splits are cheap and bit-reproducible), reads models
//! from files where an earlier stage wrote them, and prints one line per
//! artifact written.

use std::fs;
use std::path::Path;

use fortiloc_core::attacks::AttackFamily;
use fortiloc_core::dataset::{self, split, Dataset};
use fortiloc_core::ensemble::{
    lambda_table_csv, load_ensemble, save_ensemble, tune_lambda, EnsembleModel,
};
use fortiloc_core::evaluation::{
    attack_sweep, comparison_summary, scatter_export, summary_csv, EvalReport, ModelId,
};
use fortiloc_core::model::{load_model, save_model};
use fortiloc_core::training::{train_robust_pipeline, TrainHistory};
use fortiloc_core::{Error, Result};

use crate::config::{DatasetSource, RunConfig};

fn realize_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Csv { path } => dataset::load_csv(path, None),
        DatasetSource::Synthetic(s) => dataset::generate_synthetic(&s.resolve(), cfg.synth_seed()),
    }
}

/// (train, val, test) splits of the configured dataset.
fn splits(cfg: &RunConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let data = realize_dataset(cfg)?;
    let (rest, test) = split(&data, cfg.test_fraction, cfg.test_split_seed())?;
    let (train_set, val) = split(&rest, cfg.val_fraction, cfg.val_split_seed())?;
    Ok((train_set, val, test))
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn best_val(h: &TrainHistory) -> f64 {
    h.val_loss[h.best_epoch]
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let data = realize_dataset(cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("dataset.csv");
    dataset::write_csv(&data, &path)?;
    println!(
        "wrote {} ({} samples, {} access points)",
        path.display(),
        data.len(),
        data.n_features()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let (train_set, val, _) = splits(cfg)?;
    let specs = cfg.training_attack_specs();
    let train_cfg = cfg.train.resolve(cfg.train_seed());
    let kan_cfg = cfg.kan.resolve(train_set.n_features(), cfg.kan_seed());
    let pipe = train_robust_pipeline(&train_set, &val, &specs, &train_cfg, &kan_cfg)?;

    fs::create_dir_all(&cfg.out_dir)?;
    save_model(&pipe.base.model, cfg.out_dir.join("base_model.json"))?;
    println!(
        "wrote {} (best epoch {}, val loss {:.4})",
        cfg.out_dir.join("base_model.json").display(),
        pipe.base.history.best_epoch,
        best_val(&pipe.base.history)
    );
    save_model(&pipe.robust.model, cfg.out_dir.join("robust_model.json"))?;
    println!(
        "wrote {} (best epoch {}, val loss {:.4})",
        cfg.out_dir.join("robust_model.json").display(),
        pipe.robust.history.best_epoch,
        best_val(&pipe.robust.history)
    );
    write_artifact(
        &cfg.out_dir,
        "base_history.csv",
        &pipe.base.history.to_csv(),
    )?;
    write_artifact(
        &cfg.out_dir,
        "robust_history.csv",
        &pipe.robust.history.to_csv(),
    )?;
    Ok(())
}

pub fn cmd_tune(cfg: &RunConfig, base_path: &Path, robust_path: &Path) -> Result<()> {
    let (_, val, _) = splits(cfg)?;
    let base = load_model(base_path)?;
    let robust = load_model(robust_path)?;
    let objective = cfg.objective_specs();
    let (lambda, table) = tune_lambda(&base, &robust, &val, &objective, &cfg.lambda_grid)?;
    let ens = EnsembleModel::new(base, robust, lambda)?;

    fs::create_dir_all(&cfg.out_dir)?;
    save_ensemble(&ens, cfg.out_dir.join("ensemble_model.json"))?;
    println!(
        "wrote {} (lambda {lambda})",
        cfg.out_dir.join("ensemble_model.json").display()
    );
    write_artifact(&cfg.out_dir, "lambda_table.csv", &lambda_table_csv(&table))?;
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig, ensemble_path: &Path) -> Result<()> {
    let (_, _, test) = splits(cfg)?;
    let ens = load_ensemble(ensemble_path)?;

    let mut report = EvalReport::default();
    if !cfg.sweep.spoofing_strengths.is_empty() {
        report = report.merge(attack_sweep(
            &ens.base,
            &ens.robust,
            &ens,
            &test,
            AttackFamily::Spoofing,
            &cfg.sweep.spoofing_strengths,
            cfg.sweep_seed(),
            cfg.sweep.repeats,
        )?);
    }
    if !cfg.sweep.manipulation_strengths.is_empty() {
        report = report.merge(attack_sweep(
            &ens.base,
            &ens.robust,
            &ens,
            &test,
            AttackFamily::Manipulation,
            &cfg.sweep.manipulation_strengths,
            cfg.sweep_seed(),
            cfg.sweep.repeats,
        )?);
    }
    if report.cells.is_empty() {
        return Err(Error::invalid("sweep: both strength grids are empty"));
    }

    let scatter = scatter_export(&ens.base, ModelId::Base, &test)?
        .merge(scatter_export(&ens.robust, ModelId::Robust, &test)?)
        .merge(scatter_export(&ens, ModelId::Ensemble, &test)?);

    let mut references: Vec<(&str, f64)> = Vec::new();
    if !cfg.sweep.spoofing_strengths.is_empty() {
        references.push(("spoofing", cfg.sweep.reference_spoofing));
    }
    if !cfg.sweep.manipulation_strengths.is_empty() {
        references.push(("manipulation", cfg.sweep.reference_manipulation));
    }
    let summary = comparison_summary(&report, &references)?;

    fs::create_dir_all(&cfg.out_dir)?;
    write_artifact(&cfg.out_dir, "report.csv", &report.to_csv())?;
    write_artifact(&cfg.out_dir, "scatter.csv", &scatter.to_csv())?;
    write_artifact(&cfg.out_dir, "summary.csv", &summary_csv(&summary))?;
    Ok(())
}
