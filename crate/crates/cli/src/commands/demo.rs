//! Canned, seeded experiments. Every demo writes its resolved config, the
//! dataset, training history, and model archives under the output
//! directory; repeated runs with the same seed produce byte-identical
//! artifacts.

use super::tools::landscape_csv;
use super::train::execute_with;
use super::Outcome;
use crate::config::{ExperimentConfig, ModelSpec, TrainingSpec};
use crate::CommonOpts;
use ebmlab::archive::{ArchivedModel, ModelArchive};
use ebmlab::contrastive::{ContrastiveSampler, MarginFn};
use ebmlab::csv::{atomic_write, g17};
use ebmlab::datasets::{spiral_distance, Dataset, GeneratorKind, GeneratorSpec};
use ebmlab::energy::{infer_y, InferenceConfig};
use ebmlab::grid::GridSpec;
use ebmlab::jepa::VicregConfig;
use ebmlab::{EbmError, EbmResult, Tensor};
use std::path::{Path, PathBuf};

pub fn run(name: &str, common: &CommonOpts) -> EbmResult<Outcome> {
    let (config, dataset_override) = canned(name, common.out.as_deref())?;
    // Apply CLI overrides on top of the canned config.
    let mut value = serde_json::to_value(&config)
        .map_err(|e| EbmError::invalid("demo config", e.to_string()))?;
    for spec in &common.sets {
        crate::config::apply_override(&mut value, spec)?;
    }
    if let Some(seed) = common.seed {
        crate::config::apply_override(&mut value, &format!("seed={seed}"))?;
    }
    let config: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| EbmError::invalid("demo config", e.to_string()))?;
    config.validate()?;

    match name {
        "parabola-hinge" => parabola_hinge(&config),
        "ellipse" => ellipse(&config),
        "spiral-dae" => spiral_dae(&config),
        "rbm-tiny" => rbm_tiny(&config, dataset_override),
        "jepa-collapse" => jepa_collapse(&config),
        "hjepa-seq" => execute_with(&config, None),
        other => Err(EbmError::invalid(
            "demo",
            format!(
                "unknown demo {other:?}; available: parabola-hinge, ellipse, spiral-dae, rbm-tiny, jepa-collapse, hjepa-seq"
            ),
        )),
    }
}

/// The canned configuration per demo name.
fn canned(name: &str, out: Option<&str>) -> EbmResult<(ExperimentConfig, Option<Dataset>)> {
    let out_dir = out
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("out/{name}"));
    let cfg = match name {
        "parabola-hinge" => ExperimentConfig {
            experiment: "parabola-hinge".into(),
            seed: 1234,
            generator: Some(GeneratorSpec {
                kind: GeneratorKind::Parabola,
                n_points: 200,
                seed: 42,
            }),
            model: ModelSpec::MlpEnergy {
                dx: 1,
                dy: 1,
                hidden: 64,
            },
            training: TrainingSpec::Hinge {
                epochs: 600,
                lr: 0.1,
                margin: MarginFn::Scaled(1.0),
                sampler: ContrastiveSampler::MostOffending {
                    steps: 20,
                    lr: 0.1,
                    start_sigma: 0.8,
                    count: 2,
                },
            },
            output_dir: out_dir,
        },
        "ellipse" => ExperimentConfig {
            experiment: "ellipse".into(),
            seed: 7,
            generator: Some(GeneratorSpec {
                kind: GeneratorKind::Ellipse { r1: 2.0, r2: 1.0 },
                n_points: 64,
                seed: 7,
            }),
            model: ModelSpec::Ellipse {
                init_r1: 1.0,
                init_r2: 1.0,
            },
            training: TrainingSpec::EllipseFit {
                steps: 200,
                lr: 0.3,
            },
            output_dir: out_dir,
        },
        "spiral-dae" => ExperimentConfig {
            experiment: "spiral-dae".into(),
            seed: 11,
            generator: Some(GeneratorSpec {
                kind: GeneratorKind::Spiral {
                    a: 0.2,
                    b: 0.15,
                    turns: 2.0,
                    sigma: 0.1,
                },
                n_points: 600,
                seed: 11,
            }),
            model: ModelSpec::DenoisingAe {
                hidden: 48,
                code: 24,
            },
            training: TrainingSpec::Dae {
                sigma: 0.3,
                epochs: 1500,
                lr: 0.02,
                holdout: 0.2,
            },
            output_dir: out_dir,
        },
        "rbm-tiny" => {
            let cfg = ExperimentConfig {
                experiment: "rbm-tiny".into(),
                seed: 7,
                generator: None,
                model: ModelSpec::Boltzmann {
                    n_v: 3,
                    n_h: 8,
                    restricted: true,
                },
                training: TrainingSpec::Cd {
                    k: 1,
                    epochs: 4000,
                    lr: 0.05,
                },
                output_dir: out_dir,
            };
            // The four even-parity 3-bit patterns, in ±1 form.
            let patterns: Vec<Vec<i8>> = [[0u8, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]]
                .iter()
                .map(|p| p.iter().map(|&b| if b == 1 { 1i8 } else { -1 }).collect())
                .collect();
            return Ok((cfg, Some(Dataset::Patterns(patterns))));
        }
        "jepa-collapse" => ExperimentConfig {
            experiment: "jepa-collapse".into(),
            seed: 3,
            generator: Some(GeneratorSpec {
                kind: GeneratorKind::PairedViews {
                    dim: 2,
                    sigma_aug: 0.1,
                },
                n_points: 128,
                seed: 3,
            }),
            model: ModelSpec::Jepa {
                d_s: 4,
                d_z: 1,
                hidden: 16,
            },
            training: TrainingSpec::Jepa {
                epochs: 300,
                lr: 0.05,
                r_weight: 0.1,
                regularized: true,
                vicreg: VicregConfig::default(),
            },
            output_dir: out_dir,
        },
        "hjepa-seq" => ExperimentConfig {
            experiment: "hjepa-seq".into(),
            seed: 5,
            generator: Some(GeneratorSpec {
                kind: GeneratorKind::TwoTimescaleSeq {
                    f_fast: 0.125,
                    f_slow: 0.005,
                    length: 512,
                },
                n_points: 1,
                seed: 5,
            }),
            model: ModelSpec::Jepa {
                d_s: 3,
                d_z: 1,
                hidden: 12,
            },
            training: TrainingSpec::Hjepa {
                h1: 1,
                h2: 32,
                pool_window: 8,
                epochs: 150,
                lr: 0.05,
                r_weight: 0.1,
                vicreg: VicregConfig::default(),
            },
            output_dir: out_dir,
        },
        other => {
            return Err(EbmError::invalid(
                "demo",
                format!(
                    "unknown demo {other:?}; available: parabola-hinge, ellipse, spiral-dae, rbm-tiny, jepa-collapse, hjepa-seq"
                ),
            ))
        }
    };
    Ok((cfg, None))
}

fn parabola_hinge(cfg: &ExperimentConfig) -> EbmResult<Outcome> {
    let outcome = execute_with(cfg, None)?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    let archive = ModelArchive::load(&out_dir.join("model.json"))?;
    let ArchivedModel::MlpEnergy(model) = &archive.model else {
        return Err(EbmError::invalid("demo", "unexpected archive kind"));
    };

    // Inferred minima across the conditioning range.
    let infer_cfg = InferenceConfig {
        grid: vec![101],
        ..InferenceConfig::default()
    };
    let mut argmin = String::from("x,y_hat,target,abs_dev\n");
    for i in 0..21 {
        let x = -1.0 + 2.0 * i as f64 / 20.0;
        let min = infer_y(model, &Tensor::vector(vec![x]), &[-0.5], &[1.5], &infer_cfg)?;
        let target = x * x;
        argmin.push_str(&format!(
            "{},{},{},{}\n",
            g17(x),
            g17(min.point[0]),
            g17(target),
            g17((min.point[0] - target).abs())
        ));
    }
    atomic_write(&out_dir.join("argmin.csv"), &argmin)?;

    let grid = GridSpec::new(vec![-1.0, -0.5], vec![1.0, 1.5], vec![81, 81])?;
    let text = landscape_csv(&grid, &|p: &[f64]| {
        use ebmlab::energy::EnergyModel;
        model.energy(&Tensor::vector(vec![p[0]]), &Tensor::vector(vec![p[1]]))
    })?;
    atomic_write(&out_dir.join("landscape.csv"), &text)?;
    Ok(outcome)
}

fn ellipse(cfg: &ExperimentConfig) -> EbmResult<Outcome> {
    let outcome = execute_with(cfg, None)?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    let archive = ModelArchive::load(&out_dir.join("model.json"))?;
    let ArchivedModel::Ellipse(model) = &archive.model else {
        return Err(EbmError::invalid("demo", "unexpected archive kind"));
    };
    let grid = GridSpec::new(vec![-3.0, -3.0], vec![3.0, 3.0], vec![65, 65])?;
    let min_text = landscape_csv(&grid, &|p: &[f64]| {
        model.free_energy(&[p[0], p[1]], ebmlab::ellipse::FreeEnergyMode::Min)
    })?;
    atomic_write(&out_dir.join("landscape.csv"), &min_text)?;
    let marginal_text = landscape_csv(&grid, &|p: &[f64]| {
        model.free_energy(
            &[p[0], p[1]],
            ebmlab::ellipse::FreeEnergyMode::Marginal { beta: 4.0 },
        )
    })?;
    atomic_write(&out_dir.join("landscape_marginal.csv"), &marginal_text)?;
    Ok(outcome)
}

fn spiral_dae(cfg: &ExperimentConfig) -> EbmResult<Outcome> {
    let outcome = execute_with(cfg, None)?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    let archive = ModelArchive::load(&out_dir.join("model.json"))?;
    let ArchivedModel::DenoisingAe(model) = &archive.model else {
        return Err(EbmError::invalid("demo", "unexpected archive kind"));
    };
    let Some(generator) = &cfg.generator else {
        return Err(EbmError::invalid("demo", "spiral-dae needs its generator"));
    };
    let GeneratorKind::Spiral { a, b, turns, .. } = generator.kind else {
        return Err(EbmError::invalid("demo", "spiral-dae needs a spiral generator"));
    };
    let (sigma, holdout) = match &cfg.training {
        TrainingSpec::Dae { sigma, holdout, .. } => (*sigma, *holdout),
        _ => unreachable!("validated demo config"),
    };
    let Dataset::Spiral(points) = generator.generate()? else {
        unreachable!("spiral generator yields spiral data");
    };
    let split = ((points.len() as f64) * (1.0 - holdout)) as usize;
    let eval = &points[split..];

    // Denoise freshly corrupted held-out points with the run's seed
    // stream, and record distances to the true curve.
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x5ca1e);
    let mut cloud = String::from("x1,x2,kind\n");
    let mut distances = String::from("kind,distance\n");
    let mut denoised_distances = Vec::new();
    for p in eval {
        let corrupted = [
            p.clean[0] + sigma * rng.sample::<f64, _>(StandardNormal),
            p.clean[1] + sigma * rng.sample::<f64, _>(StandardNormal),
        ];
        let denoised = model.reconstruct(&corrupted);
        cloud.push_str(&format!("{},{},clean\n", g17(p.clean[0]), g17(p.clean[1])));
        cloud.push_str(&format!(
            "{},{},corrupted\n",
            g17(corrupted[0]),
            g17(corrupted[1])
        ));
        cloud.push_str(&format!(
            "{},{},denoised\n",
            g17(denoised[0]),
            g17(denoised[1])
        ));
        let d = spiral_distance([denoised[0], denoised[1]], a, b, turns);
        denoised_distances.push(d);
        distances.push_str(&format!("denoised,{}\n", g17(d)));
    }
    atomic_write(&out_dir.join("cloud.csv"), &cloud)?;

    // The equidistant midpoint between adjacent branches: where a
    // single-valued denoiser has no good answer.
    let theta = std::f64::consts::PI;
    let r_mid = a + b * theta + b * std::f64::consts::PI;
    let midpoint = [r_mid * theta.cos(), r_mid * theta.sin()];
    let mid_out = model.reconstruct(&midpoint);
    let mid_distance = spiral_distance([mid_out[0], mid_out[1]], a, b, turns);
    let mut sorted = denoised_distances.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = sorted[sorted.len() / 2];
    distances.push_str(&format!("median_denoised,{}\n", g17(median)));
    distances.push_str(&format!("midpoint_output,{}\n", g17(mid_distance)));
    atomic_write(&out_dir.join("distances.csv"), &distances)?;
    Ok(outcome)
}

fn rbm_tiny(cfg: &ExperimentConfig, dataset: Option<Dataset>) -> EbmResult<Outcome> {
    let outcome = execute_with(cfg, dataset)?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    let archive = ModelArchive::load(&out_dir.join("model.json"))?;
    let ArchivedModel::Boltzmann(machine) = &archive.model else {
        return Err(EbmError::invalid("demo", "unexpected archive kind"));
    };
    let patterns: [[u8; 3]; 4] = [[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]];
    let mut mass = String::from("pattern,probability\n");
    let mut total = 0.0;
    for p in &patterns {
        let prob = machine.visible_probability(&p.to_vec())?;
        total += prob;
        let label: String = p.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
        mass.push_str(&format!("{label},{}\n", g17(prob)));
    }
    mass.push_str(&format!("total,{}\n", g17(total)));
    atomic_write(&out_dir.join("mass.csv"), &mass)?;
    Ok(outcome)
}

fn jepa_collapse(cfg: &ExperimentConfig) -> EbmResult<Outcome> {
    let out_root = PathBuf::from(&cfg.output_dir);
    let mut regularized_cfg = cfg.clone();
    regularized_cfg.output_dir = out_root.join("regularized").to_string_lossy().into_owned();
    let mut unregularized_cfg = cfg.clone();
    unregularized_cfg.output_dir = out_root
        .join("unregularized")
        .to_string_lossy()
        .into_owned();
    if let TrainingSpec::Jepa { regularized, .. } = &mut unregularized_cfg.training {
        *regularized = false;
    }

    let a = execute_with(&regularized_cfg, None)?;
    let b = execute_with(&unregularized_cfg, None)?;

    let summary = format!(
        "run,min_std,mean_abs_offdiag_cov\nregularized,{}\nunregularized,{}\n",
        last_metrics(&out_root.join("regularized/history.csv"))?,
        last_metrics(&out_root.join("unregularized/history.csv"))?,
    );
    atomic_write(&out_root.join("summary.csv"), &summary)?;
    match (a, b) {
        (Outcome::Success, Outcome::Success) => Ok(Outcome::Success),
        _ => Ok(Outcome::NumericalAbort),
    }
}

/// Pulls `min_std,mean_abs_offdiag_cov` off the last row of a collapse
/// history CSV.
fn last_metrics(path: &Path) -> EbmResult<String> {
    let text = std::fs::read_to_string(path)?;
    let last = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .next_back()
        .ok_or(EbmError::Empty {
            what: "history csv",
        })?;
    let fields: Vec<&str> = last.split(',').collect();
    if fields.len() < 6 {
        return Err(EbmError::invalid("history csv", "unexpected column count"));
    }
    Ok(format!("{},{}", fields[4], fields[5]))
}
