//! Experiment configuration: a JSON document that fully determines a run.
//! Configs round-trip losslessly, can be patched with dotted-path
//! overrides, and are hashed in canonical form for provenance.

use ebmlab::contrastive::{ContrastiveSampler, MarginFn};
use ebmlab::datasets::GeneratorSpec;
use ebmlab::grid::GridSpec;
use ebmlab::jepa::VicregConfig;
use ebmlab::{EbmError, EbmResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Free-form experiment identifier recorded in artifacts.
    pub experiment: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    pub model: ModelSpec,
    pub training: TrainingSpec,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    MlpEnergy {
        dx: usize,
        dy: usize,
        hidden: usize,
    },
    Hopfield,
    Boltzmann {
        n_v: usize,
        n_h: usize,
        restricted: bool,
    },
    Ellipse {
        init_r1: f64,
        init_r2: f64,
    },
    DenoisingAe {
        hidden: usize,
        code: usize,
    },
    MaskedAe {
        hidden: usize,
        code: usize,
    },
    Jepa {
        d_s: usize,
        d_z: usize,
        hidden: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TrainingSpec {
    Hinge {
        epochs: usize,
        lr: f64,
        margin: MarginFn,
        sampler: ContrastiveSampler,
    },
    Nll {
        epochs: usize,
        lr: f64,
        beta: f64,
        grid: GridSpec,
    },
    Hebbian,
    Cd {
        k: usize,
        epochs: usize,
        lr: f64,
    },
    EllipseFit {
        steps: usize,
        lr: f64,
    },
    Dae {
        sigma: f64,
        epochs: usize,
        lr: f64,
        /// Fraction of generated points held out for evaluation.
        holdout: f64,
    },
    Masked {
        mask_rate: f64,
        epochs: usize,
        lr: f64,
    },
    Jepa {
        epochs: usize,
        lr: f64,
        r_weight: f64,
        regularized: bool,
        vicreg: VicregConfig,
    },
    Hjepa {
        h1: usize,
        h2: usize,
        pool_window: usize,
        epochs: usize,
        lr: f64,
        r_weight: f64,
        vicreg: VicregConfig,
    },
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> EbmResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            EbmError::invalid("config", format!("{e} (line {}, column {})", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> EbmResult<()> {
        if self.experiment.is_empty() {
            return Err(EbmError::invalid("config.experiment", "must be non-empty"));
        }
        if let Some(g) = &self.generator {
            g.validate()?;
        }
        match &self.training {
            TrainingSpec::Hinge { lr, .. }
            | TrainingSpec::Nll { lr, .. }
            | TrainingSpec::Cd { lr, .. }
            | TrainingSpec::EllipseFit { lr, .. }
            | TrainingSpec::Dae { lr, .. }
            | TrainingSpec::Masked { lr, .. }
            | TrainingSpec::Jepa { lr, .. }
            | TrainingSpec::Hjepa { lr, .. } => {
                if !(lr.is_finite() && *lr >= 0.0) {
                    return Err(EbmError::invalid(
                        "config.training.lr",
                        "must be a finite non-negative number",
                    ));
                }
            }
            TrainingSpec::Hebbian => {}
        }
        if let TrainingSpec::Nll { beta, grid, .. } = &self.training {
            if !(*beta > 0.0) {
                return Err(EbmError::invalid("config.training.beta", "must be > 0"));
            }
            grid.validate()?;
        }
        if let TrainingSpec::Dae { sigma, holdout, .. } = &self.training {
            if !(*sigma > 0.0) {
                return Err(EbmError::invalid("config.training.sigma", "must be > 0"));
            }
            if !(*holdout > 0.0 && *holdout < 1.0) {
                return Err(EbmError::invalid(
                    "config.training.holdout",
                    "must lie in (0, 1)",
                ));
            }
        }
        if let TrainingSpec::Masked { mask_rate, .. } = &self.training {
            if !(*mask_rate > 0.0 && *mask_rate < 1.0) {
                return Err(EbmError::invalid(
                    "config.training.mask_rate",
                    "must lie in (0, 1)",
                ));
            }
        }
        if let TrainingSpec::Hjepa {
            h1,
            h2,
            pool_window,
            ..
        } = &self.training
        {
            if *h2 == 0 || *pool_window == 0 || h2 % pool_window != 0 || h2 <= h1 {
                return Err(EbmError::invalid(
                    "config.training",
                    "need h2 > h1 and h2 a positive multiple of pool_window",
                ));
            }
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and artifact copies.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config to JSON");
        let mut s = ebmlab::archive::to_canonical_json(&value);
        s.push('\n');
        s
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Applies one `key=value` override at a dotted path inside the raw JSON
/// value. Values parse as JSON when possible and fall back to strings.
pub fn apply_override(root: &mut serde_json::Value, spec: &str) -> EbmResult<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        EbmError::invalid("--set", format!("expected key=value, got {spec:?}"))
    })?;
    let value: serde_json::Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw.to_string()),
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if last {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(segment.to_string(), value);
                    return Ok(());
                }
                serde_json::Value::Array(items) => {
                    let idx: usize = segment.parse().map_err(|_| {
                        EbmError::invalid("--set", format!("bad array index {segment:?} in {path}"))
                    })?;
                    if idx >= items.len() {
                        return Err(EbmError::invalid(
                            "--set",
                            format!("index {idx} out of bounds at {path}"),
                        ));
                    }
                    items[idx] = value;
                    return Ok(());
                }
                _ => {
                    return Err(EbmError::invalid(
                        "--set",
                        format!("path {path} does not reach a container"),
                    ))
                }
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map.get_mut(*segment).ok_or_else(|| {
                EbmError::invalid("--set", format!("unknown field {segment:?} in {path}"))
            })?,
            serde_json::Value::Array(items) => {
                let idx: usize = segment.parse().map_err(|_| {
                    EbmError::invalid("--set", format!("bad array index {segment:?} in {path}"))
                })?;
                items.get_mut(idx).ok_or_else(|| {
                    EbmError::invalid("--set", format!("index {idx} out of bounds at {path}"))
                })?
            }
            _ => {
                return Err(EbmError::invalid(
                    "--set",
                    format!("path {path} does not reach a container"),
                ))
            }
        };
    }
    Ok(())
}

/// Loads a config file and applies CLI overrides, re-validating after.
pub fn load_with_overrides(
    path: &std::path::Path,
    sets: &[String],
    out: Option<&str>,
    seed: Option<u64>,
) -> EbmResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| EbmError::invalid("config", e.to_string()))?;
    for spec in sets {
        apply_override(&mut value, spec)?;
    }
    if let Some(out) = out {
        apply_override(&mut value, &format!("output_dir={out}"))?;
    }
    if let Some(seed) = seed {
        apply_override(&mut value, &format!("seed={seed}"))?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| EbmError::invalid("config", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
