//! The `train` subcommand: dataset generation, model construction, the
//! matching trainer, and artifact emission (canonical config copy,
//! initialization and final archives, history CSV).

use super::Outcome;
use crate::config::{ExperimentConfig, ModelSpec, TrainingSpec};
use crate::CommonOpts;
use ebmlab::archive::{ArchivedModel, ModelArchive, Provenance};
use ebmlab::boltzmann::{train_cd, BoltzmannMachine};
use ebmlab::contrastive::{train_contrastive, MlpEnergy, TrainLoss};
use ebmlab::csv::{atomic_write, g17};
use ebmlab::datasets::Dataset;
use ebmlab::ellipse::EllipseModel;
use ebmlab::hopfield::train_hebbian;
use ebmlab::jepa::{
    train_hjepa, train_jepa, HJepaConfig, JepaModel, JepaTrainConfig, VicregConfig,
};
use ebmlab::regularized::{train_dae, train_masked, Corruption, DenoisingAe, MaskedAe};
use ebmlab::{EbmError, EbmResult, Tensor};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn run(common: &CommonOpts) -> EbmResult<Outcome> {
    let config_path = common
        .config
        .as_ref()
        .ok_or_else(|| EbmError::invalid("train", "--config is required"))?;
    let cfg = crate::config::load_with_overrides(
        config_path,
        &common.sets,
        common.out.as_deref(),
        common.seed,
    )?;
    execute_with(&cfg, None)
}

/// Runs a validated config; shared by `train` and the demos. A demo may
/// inject a fixed dataset in place of a generator.
pub fn execute_with(
    cfg: &ExperimentConfig,
    dataset_override: Option<Dataset>,
) -> EbmResult<Outcome> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    atomic_write(&out_dir.join("config.json"), &cfg.canonical_json())?;

    let dataset = match (dataset_override, &cfg.generator) {
        (Some(ds), _) => Some(ds),
        (None, Some(g)) => Some(g.generate()?),
        (None, None) => None,
    };
    if let Some(ds) = &dataset {
        atomic_write(&out_dir.join("dataset.csv"), &ds.to_csv())?;
    }

    let hash = cfg.sha256();
    match (&cfg.model, &cfg.training) {
        (ModelSpec::MlpEnergy { dx, dy, hidden }, TrainingSpec::Hinge { .. })
        | (ModelSpec::MlpEnergy { dx, dy, hidden }, TrainingSpec::Nll { .. }) => {
            let pairs = pairs_from(dataset.as_ref())?;
            let model = MlpEnergy::new(*dx, *dy, *hidden, cfg.seed);
            train_energy_head(cfg, model, &pairs, &out_dir, &hash)
        }
        (ModelSpec::Hopfield, TrainingSpec::Hebbian) => {
            let patterns = spin_patterns_from(dataset.as_ref())?;
            let net = train_hebbian(&patterns)?;
            atomic_write(
                &out_dir.join("patterns.txt"),
                &ebmlab::hopfield::patterns_to_text(&patterns),
            )?;
            let mut archive = ModelArchive::new(ArchivedModel::Hopfield(net));
            archive.provenance = Provenance {
                config_sha256: Some(hash),
                epochs_trained: 1,
                final_metrics: BTreeMap::new(),
            };
            archive.save(&out_dir.join("model.json"))?;
            Ok(Outcome::Success)
        }
        (
            ModelSpec::Boltzmann {
                n_v,
                n_h,
                restricted,
            },
            TrainingSpec::Cd { k, epochs, lr },
        ) => {
            let data = bit_patterns_from(dataset.as_ref())?;
            for row in &data {
                if row.len() != *n_v {
                    return Err(EbmError::invalid(
                        "dataset",
                        format!("pattern width {} does not match n_v {n_v}", row.len()),
                    ));
                }
            }
            let machine = BoltzmannMachine::new(*n_v, *n_h, *restricted);
            save_archive(
                &out_dir.join("model_init.json"),
                ArchivedModel::Boltzmann(machine.clone()),
                &hash,
                0,
                BTreeMap::new(),
            )?;
            let outcome = train_cd(machine, &data, *k, *epochs, *lr, cfg.seed)?;
            let mut csv = String::from("epoch,exact_nll\n");
            for row in &outcome.history {
                csv.push_str(&format!(
                    "{},{}\n",
                    row.epoch,
                    row.exact_nll.map(g17).unwrap_or_default()
                ));
            }
            atomic_write(&out_dir.join("history.csv"), &csv)?;
            let mut metrics = BTreeMap::new();
            if let Some(nll) = outcome.history.last().and_then(|h| h.exact_nll) {
                metrics.insert("exact_nll".to_string(), nll);
            }
            let trained = outcome.history.len().saturating_sub(1) as u64;
            save_archive(
                &out_dir.join("model.json"),
                ArchivedModel::Boltzmann(outcome.machine),
                &hash,
                trained,
                metrics,
            )?;
            Ok(if outcome.aborted_at.is_some() {
                Outcome::NumericalAbort
            } else {
                Outcome::Success
            })
        }
        (ModelSpec::Ellipse { init_r1, init_r2 }, TrainingSpec::EllipseFit { steps, lr }) => {
            let points = points_from(dataset.as_ref())?;
            save_archive(
                &out_dir.join("model_init.json"),
                ArchivedModel::Ellipse(EllipseModel::new(*init_r1, *init_r2)?),
                &hash,
                0,
                BTreeMap::new(),
            )?;
            let fit = ebmlab::ellipse::fit(&points, (*init_r1, *init_r2), *steps, *lr)?;
            let mut csv = String::from("epoch,mean_energy,r1,r2,clamped\n");
            for row in &fit.history {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.epoch,
                    g17(row.mean_energy),
                    g17(row.r1),
                    g17(row.r2),
                    row.clamped
                ));
            }
            atomic_write(&out_dir.join("history.csv"), &csv)?;
            let mut metrics = BTreeMap::new();
            if let Some(last) = fit.history.last() {
                metrics.insert("mean_energy".to_string(), last.mean_energy);
            }
            save_archive(
                &out_dir.join("model.json"),
                ArchivedModel::Ellipse(fit.model),
                &hash,
                *steps as u64,
                metrics,
            )?;
            Ok(Outcome::Success)
        }
        (
            ModelSpec::DenoisingAe { hidden, code },
            TrainingSpec::Dae {
                sigma,
                epochs,
                lr,
                holdout,
            },
        ) => {
            let rows = rows_from(dataset.as_ref())?;
            let split = ((rows.len() as f64) * (1.0 - holdout)) as usize;
            let (train_rows, eval_rows) = rows.split_at(split.max(1).min(rows.len()));
            let dim = rows[0].len();
            let model = DenoisingAe::new(dim, *hidden, *code, cfg.seed);
            save_archive(
                &out_dir.join("model_init.json"),
                ArchivedModel::DenoisingAe(model.clone()),
                &hash,
                0,
                BTreeMap::new(),
            )?;
            let outcome = train_dae(
                model,
                train_rows,
                eval_rows,
                Corruption::Gaussian { sigma: *sigma },
                *epochs,
                *lr,
                cfg.seed,
            )?;
            let mut csv = String::from("epoch,train_mse,eval_mse\n");
            for row in &outcome.history {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    row.epoch,
                    g17(row.train_mse),
                    g17(row.eval_mse)
                ));
            }
            atomic_write(&out_dir.join("history.csv"), &csv)?;
            let mut metrics = BTreeMap::new();
            if let Some(last) = outcome.history.last() {
                metrics.insert("train_mse".to_string(), last.train_mse);
                metrics.insert("eval_mse".to_string(), last.eval_mse);
            }
            let trained = outcome.history.len().saturating_sub(1) as u64;
            save_archive(
                &out_dir.join("model.json"),
                ArchivedModel::DenoisingAe(outcome.model),
                &hash,
                trained,
                metrics,
            )?;
            Ok(if outcome.aborted_at.is_some() {
                Outcome::NumericalAbort
            } else {
                Outcome::Success
            })
        }
        (
            ModelSpec::MaskedAe { hidden, code },
            TrainingSpec::Masked {
                mask_rate,
                epochs,
                lr,
            },
        ) => {
            let rows = rows_from(dataset.as_ref())?;
            let dim = rows[0].len();
            let model = MaskedAe::new(dim, *hidden, *code, cfg.seed);
            save_archive(
                &out_dir.join("model_init.json"),
                ArchivedModel::MaskedAe(model.clone()),
                &hash,
                0,
                BTreeMap::new(),
            )?;
            let outcome = train_masked(model, &rows, *mask_rate, *epochs, *lr, cfg.seed)?;
            let mut csv = String::from("epoch,masked_mse\n");
            for row in &outcome.history {
                csv.push_str(&format!("{},{}\n", row.epoch, g17(row.masked_mse)));
            }
            atomic_write(&out_dir.join("history.csv"), &csv)?;
            let mut metrics = BTreeMap::new();
            if let Some(last) = outcome.history.last() {
                metrics.insert("masked_mse".to_string(), last.masked_mse);
            }
            let trained = outcome.history.len().saturating_sub(1) as u64;
            save_archive(
                &out_dir.join("model.json"),
                ArchivedModel::MaskedAe(outcome.model),
                &hash,
                trained,
                metrics,
            )?;
            Ok(if outcome.aborted_at.is_some() {
                Outcome::NumericalAbort
            } else {
                Outcome::Success
            })
        }
        (
            ModelSpec::Jepa { d_s, d_z, hidden },
            TrainingSpec::Jepa {
                epochs,
                lr,
                r_weight,
                regularized,
                vicreg,
            },
        ) => {
            let pairs = view_pairs_from(dataset.as_ref())?;
            let d_in = pairs[0].0.len();
            let model = JepaModel::new(d_in, *d_s, *d_z, *hidden, cfg.seed);
            let expander = vicreg.make_expander(*d_s, cfg.seed ^ 0xa5a5);
            save_archive(
                &out_dir.join("model_init.json"),
                ArchivedModel::Jepa {
                    model: model.clone(),
                    expander: expander.clone(),
                },
                &hash,
                0,
                BTreeMap::new(),
            )?;
            let train_cfg = JepaTrainConfig {
                vicreg: vicreg.clone(),
                epochs: *epochs,
                lr: *lr,
                r_weight: *r_weight,
                regularized: *regularized,
                latent_grid: 9,
            };
            let outcome = train_jepa(model, expander, &pairs, &train_cfg, cfg.seed)?;
            atomic_write(
                &out_dir.join("history.csv"),
                &ebmlab::jepa::history_to_csv(&outcome.history),
            )?;
            let mut metrics = BTreeMap::new();
            if let Some(last) = outcome.history.last() {
                metrics.insert("inv".to_string(), last.inv);
                metrics.insert("min_std".to_string(), last.min_std);
            }
            let trained = outcome.history.len().saturating_sub(1) as u64;
            save_archive(
                &out_dir.join("model.json"),
                ArchivedModel::Jepa {
                    model: outcome.model,
                    expander: outcome.expander,
                },
                &hash,
                trained,
                metrics,
            )?;
            Ok(if outcome.aborted_at.is_some() {
                Outcome::NumericalAbort
            } else {
                Outcome::Success
            })
        }
        (
            ModelSpec::Jepa { d_s, hidden, .. },
            TrainingSpec::Hjepa {
                h1,
                h2,
                pool_window,
                epochs,
                lr,
                r_weight,
                vicreg,
            },
        ) => {
            let sequences = sequences_from(dataset.as_ref())?;
            let hcfg = HJepaConfig {
                h1: *h1,
                h2: *h2,
                pool_window: *pool_window,
                d_s: *d_s,
                hidden: *hidden,
                train: JepaTrainConfig {
                    vicreg: vicreg.clone(),
                    epochs: *epochs,
                    lr: *lr,
                    r_weight: *r_weight,
                    regularized: true,
                    latent_grid: 9,
                },
                train_fraction: 0.7,
            };
            let outcome = train_hjepa(&sequences, &hcfg, cfg.seed)?;
            atomic_write(
                &out_dir.join("history_level1.csv"),
                &ebmlab::jepa::history_to_csv(&outcome.level1_history),
            )?;
            atomic_write(
                &out_dir.join("history_level2.csv"),
                &ebmlab::jepa::history_to_csv(&outcome.level2_history),
            )?;
            let forced = ebmlab::jepa::train_level1_at_long_horizon(&sequences, &hcfg, cfg.seed)?;
            let summary = format!(
                "level,horizon,relative_error\n1,{},{}\n2,{},{}\n1-forced,{},{}\n",
                h1,
                g17(outcome.level1_rel_error),
                h2,
                g17(outcome.level2_rel_error),
                h2,
                g17(forced)
            );
            atomic_write(&out_dir.join("summary.csv"), &summary)?;
            let expander = vicreg.make_expander(*d_s, cfg.seed ^ 0xe1);
            save_archive(
                &out_dir.join("model_level1.json"),
                ArchivedModel::Jepa {
                    model: outcome.model.level1,
                    expander: expander.clone(),
                },
                &hash,
                *epochs as u64,
                BTreeMap::new(),
            )?;
            save_archive(
                &out_dir.join("model_level2.json"),
                ArchivedModel::Jepa {
                    model: outcome.model.level2,
                    expander,
                },
                &hash,
                *epochs as u64,
                BTreeMap::new(),
            )?;
            Ok(Outcome::Success)
        }
        (model, training) => Err(EbmError::invalid(
            "config",
            format!(
                "model {model:?} cannot be trained with method {training:?}"
            ),
        )),
    }
}

fn train_energy_head(
    cfg: &ExperimentConfig,
    model: MlpEnergy,
    pairs: &[(Tensor, Tensor)],
    out_dir: &Path,
    hash: &str,
) -> EbmResult<Outcome> {
    let (loss, sampler, epochs, lr) = match &cfg.training {
        TrainingSpec::Hinge {
            epochs,
            lr,
            margin,
            sampler,
        } => (
            TrainLoss::Hinge { margin: *margin },
            sampler.clone(),
            *epochs,
            *lr,
        ),
        TrainingSpec::Nll {
            epochs,
            lr,
            beta,
            grid,
        } => (
            TrainLoss::Nll {
                beta: *beta,
                grid: grid.clone(),
            },
            // The likelihood trainer integrates over its grid; the sampler
            // slot is unused but kept uniform.
            ebmlab::contrastive::ContrastiveSampler::Exhaustive { grid: grid.clone() },
            *epochs,
            *lr,
        ),
        _ => unreachable!("checked by caller"),
    };
    save_archive(
        &out_dir.join("model_init.json"),
        ArchivedModel::MlpEnergy(model.clone()),
        hash,
        0,
        BTreeMap::new(),
    )?;
    let outcome = train_contrastive(model, pairs, &loss, &sampler, epochs, lr, cfg.seed)?;
    atomic_write(
        &out_dir.join("history.csv"),
        &ebmlab::contrastive::history_to_csv(&outcome.history),
    )?;
    let mut metrics = BTreeMap::new();
    if epochs > 0 {
        if let Some(last) = outcome.history.last() {
            metrics.insert("mean_loss".to_string(), last.mean_loss);
            metrics.insert("mean_data_energy".to_string(), last.mean_data_energy);
        }
    }
    let trained = outcome.history.len().saturating_sub(1) as u64;
    save_archive(
        &out_dir.join("model.json"),
        ArchivedModel::MlpEnergy(outcome.model),
        hash,
        trained,
        metrics,
    )?;
    Ok(if outcome.aborted_at.is_some() {
        Outcome::NumericalAbort
    } else {
        Outcome::Success
    })
}

pub fn save_archive(
    path: &Path,
    model: ArchivedModel,
    hash: &str,
    epochs: u64,
    metrics: BTreeMap<String, f64>,
) -> EbmResult<()> {
    let mut archive = ModelArchive::new(model);
    archive.provenance = Provenance {
        config_sha256: Some(hash.to_string()),
        epochs_trained: epochs,
        final_metrics: metrics,
    };
    archive.save(path)
}

// ── dataset adapters ─────────────────────────────────────────────────

fn need(dataset: Option<&Dataset>) -> EbmResult<&Dataset> {
    dataset.ok_or_else(|| EbmError::invalid("config.generator", "this trainer needs a generator"))
}

pub fn pairs_from(dataset: Option<&Dataset>) -> EbmResult<Vec<(Tensor, Tensor)>> {
    match need(dataset)? {
        Dataset::Pairs(rows) => Ok(rows
            .iter()
            .map(|r| (Tensor::vector(vec![r[0]]), Tensor::vector(vec![r[1]])))
            .collect()),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected scalar pairs, got {other:?}"),
        )),
    }
}

fn points_from(dataset: Option<&Dataset>) -> EbmResult<Vec<[f64; 2]>> {
    match need(dataset)? {
        Dataset::Points2(rows) => Ok(rows.clone()),
        Dataset::Spiral(rows) => Ok(rows.iter().map(|p| p.clean).collect()),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected 2-D points, got {other:?}"),
        )),
    }
}

fn rows_from(dataset: Option<&Dataset>) -> EbmResult<Vec<Vec<f64>>> {
    match need(dataset)? {
        Dataset::Points2(rows) => Ok(rows.iter().map(|r| r.to_vec()).collect()),
        Dataset::Spiral(rows) => Ok(rows.iter().map(|p| p.clean.to_vec()).collect()),
        Dataset::Sequence(rows) => Ok(rows.iter().map(|r| r.to_vec()).collect()),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected plain vectors, got {other:?}"),
        )),
    }
}

fn spin_patterns_from(dataset: Option<&Dataset>) -> EbmResult<Vec<Vec<i8>>> {
    match need(dataset)? {
        Dataset::Patterns(rows) => Ok(rows.clone()),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected ±1 patterns, got {other:?}"),
        )),
    }
}

fn bit_patterns_from(dataset: Option<&Dataset>) -> EbmResult<Vec<Vec<u8>>> {
    match need(dataset)? {
        // ±1 patterns map onto {0,1} units.
        Dataset::Patterns(rows) => Ok(rows
            .iter()
            .map(|p| p.iter().map(|&v| if v > 0 { 1u8 } else { 0u8 }).collect())
            .collect()),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected binary patterns, got {other:?}"),
        )),
    }
}

fn view_pairs_from(dataset: Option<&Dataset>) -> EbmResult<Vec<(Vec<f64>, Vec<f64>)>> {
    match need(dataset)? {
        Dataset::PairedViews(rows) => Ok(rows.clone()),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected paired views, got {other:?}"),
        )),
    }
}

fn sequences_from(dataset: Option<&Dataset>) -> EbmResult<Vec<Vec<Vec<f64>>>> {
    match need(dataset)? {
        Dataset::Sequence(rows) => Ok(vec![rows.iter().map(|r| r.to_vec()).collect()]),
        other => Err(EbmError::invalid(
            "dataset",
            format!("expected a sequence, got {other:?}"),
        )),
    }
}
