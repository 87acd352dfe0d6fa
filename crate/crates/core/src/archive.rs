//! Model persistence: a versioned JSON archive holding the model kind,
//! named parameter tensors as 17-significant-digit decimals, and training
//! provenance.
//!
//! Serialization is canonical — sorted keys, fixed number rendering — so
//! saving the same model twice produces identical bytes, and every f64
//! round-trips bitwise through the decimal form.

use crate::boltzmann::BoltzmannMachine;
use crate::contrastive::MlpEnergy;
use crate::ellipse::EllipseModel;
use crate::error::{EbmError, EbmResult};
use crate::hopfield::HopfieldNet;
use crate::jepa::JepaModel;
use crate::mlp::{Activation, Mlp};
use crate::regularized::{DenoisingAe, MaskedAe};
use crate::Tensor;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    /// SHA-256 of the canonicalized experiment config, when one exists.
    pub config_sha256: Option<String>,
    pub epochs_trained: u64,
    /// Final metrics, e.g. losses at the last epoch.
    pub final_metrics: BTreeMap<String, f64>,
}

impl Provenance {
    pub fn fresh() -> Self {
        Provenance {
            config_sha256: None,
            epochs_trained: 0,
            final_metrics: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum ArchivedModel {
    Hopfield(HopfieldNet),
    Boltzmann(BoltzmannMachine),
    MlpEnergy(MlpEnergy),
    Ellipse(EllipseModel),
    DenoisingAe(DenoisingAe),
    MaskedAe(MaskedAe),
    Jepa { model: JepaModel, expander: Mlp },
}

impl ArchivedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ArchivedModel::Hopfield(_) => "hopfield",
            ArchivedModel::Boltzmann(_) => "boltzmann",
            ArchivedModel::MlpEnergy(_) => "mlp_energy",
            ArchivedModel::Ellipse(_) => "ellipse",
            ArchivedModel::DenoisingAe(_) => "denoising_ae",
            ArchivedModel::MaskedAe(_) => "masked_ae",
            ArchivedModel::Jepa { .. } => "jepa",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelArchive {
    pub model: ArchivedModel,
    pub provenance: Provenance,
}

// ── canonical JSON emission ──────────────────────────────────────────

/// Emits a `serde_json::Value` with sorted keys (the default map is a
/// BTreeMap) and every finite float rendered as a 17-significant-digit
/// decimal, so equal values always produce equal bytes.
pub fn to_canonical_json(value: &Value) -> String {
    let mut out = String::new();
    emit(value, &mut out);
    out
}

fn emit(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&crate::csv::g17(n.as_f64().expect("finite number")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string escaping"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                emit(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("key escaping"));
                out.push(':');
                emit(item, out);
            }
            out.push('}');
        }
    }
}

fn tensor_to_value(name: &str, t: &Tensor) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("name".into(), Value::String(name.to_string()));
    obj.insert(
        "shape".into(),
        Value::Array(t.shape().iter().map(|&e| Value::from(e as u64)).collect()),
    );
    obj.insert(
        "data".into(),
        Value::Array(
            t.data()
                .iter()
                .map(|&v| serde_json::Number::from_f64(v).map(Value::Number).expect("finite"))
                .collect(),
        ),
    );
    Value::Object(obj)
}

fn activations_to_value(acts: &[Activation]) -> Value {
    Value::Array(
        acts.iter()
            .map(|a| {
                Value::String(
                    match a {
                        Activation::Linear => "linear",
                        Activation::Tanh => "tanh",
                        Activation::Relu => "relu",
                        Activation::Sigmoid => "sigmoid",
                    }
                    .to_string(),
                )
            })
            .collect(),
    )
}

fn mlp_to_value(prefix: &str, mlp: &Mlp, tensors: &mut Vec<Value>) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert(
        "sizes".into(),
        Value::Array(mlp.sizes().iter().map(|&s| Value::from(s as u64)).collect()),
    );
    obj.insert("activations".into(), activations_to_value(mlp.activations()));
    for (l, (w, b)) in mlp.weights().iter().zip(mlp.biases()).enumerate() {
        tensors.push(tensor_to_value(&format!("{prefix}.w{l}"), w));
        tensors.push(tensor_to_value(&format!("{prefix}.b{l}"), b));
    }
    Value::Object(obj)
}

struct TensorSet {
    tensors: BTreeMap<String, Tensor>,
}

impl TensorSet {
    fn take(&mut self, name: &str) -> EbmResult<Tensor> {
        self.tensors.remove(name).ok_or_else(|| {
            EbmError::invalid("archive", format!("missing tensor {name:?}"))
        })
    }
}

fn parse_activations(v: &Value) -> EbmResult<Vec<Activation>> {
    v.as_array()
        .ok_or_else(|| EbmError::invalid("archive", "activations must be an array"))?
        .iter()
        .map(|item| match item.as_str() {
            Some("linear") => Ok(Activation::Linear),
            Some("tanh") => Ok(Activation::Tanh),
            Some("relu") => Ok(Activation::Relu),
            Some("sigmoid") => Ok(Activation::Sigmoid),
            other => Err(EbmError::invalid(
                "archive",
                format!("unknown activation {other:?}"),
            )),
        })
        .collect()
}

fn parse_usize_array(v: &Value, what: &str) -> EbmResult<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| EbmError::invalid("archive", format!("{what} must be an array")))?
        .iter()
        .map(|item| {
            item.as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| EbmError::invalid("archive", format!("bad {what} entry")))
        })
        .collect()
}

fn mlp_from_value(prefix: &str, meta: &Value, tensors: &mut TensorSet) -> EbmResult<Mlp> {
    let sizes = parse_usize_array(&meta["sizes"], "sizes")?;
    let activations = parse_activations(&meta["activations"])?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        weights.push(tensors.take(&format!("{prefix}.w{l}"))?);
        biases.push(tensors.take(&format!("{prefix}.b{l}"))?);
    }
    Ok(Mlp::from_parts(sizes, activations, weights, biases))
}

impl ModelArchive {
    pub fn new(model: ArchivedModel) -> Self {
        ModelArchive {
            model,
            provenance: Provenance::fresh(),
        }
    }

    pub fn to_json_value(&self) -> Value {
        let mut tensors: Vec<Value> = Vec::new();
        let mut meta = serde_json::Map::new();
        match &self.model {
            ArchivedModel::Hopfield(net) => {
                meta.insert("units".into(), Value::from(net.units() as u64));
                tensors.push(tensor_to_value(
                    "upper",
                    &Tensor::vector(net.upper_triangle().to_vec()),
                ));
            }
            ArchivedModel::Boltzmann(m) => {
                meta.insert("n_v".into(), Value::from(m.visible_units() as u64));
                meta.insert("n_h".into(), Value::from(m.hidden_units() as u64));
                meta.insert("restricted".into(), Value::Bool(m.is_restricted()));
                tensors.push(tensor_to_value("params", &Tensor::vector(m.flat_params())));
            }
            ArchivedModel::MlpEnergy(m) => {
                let (dx, dy) = m.dims();
                meta.insert("dx".into(), Value::from(dx as u64));
                meta.insert("dy".into(), Value::from(dy as u64));
                meta.insert("mlp".into(), mlp_to_value("mlp", m.mlp(), &mut tensors));
            }
            ArchivedModel::Ellipse(m) => {
                let (r1, r2) = m.semi_axes();
                tensors.push(tensor_to_value("semi_axes", &Tensor::vector(vec![r1, r2])));
            }
            ArchivedModel::DenoisingAe(m) => {
                meta.insert("enc".into(), mlp_to_value("enc", m.encoder(), &mut tensors));
                meta.insert("dec".into(), mlp_to_value("dec", m.decoder(), &mut tensors));
            }
            ArchivedModel::MaskedAe(m) => {
                meta.insert("enc".into(), mlp_to_value("enc", m.encoder(), &mut tensors));
                meta.insert("dec".into(), mlp_to_value("dec", m.decoder(), &mut tensors));
            }
            ArchivedModel::Jepa { model, expander } => {
                let (lo, hi) = model.latent_bounds();
                meta.insert(
                    "enc_x".into(),
                    mlp_to_value("enc_x", model.encoder_x(), &mut tensors),
                );
                meta.insert(
                    "enc_y".into(),
                    mlp_to_value("enc_y", model.encoder_y(), &mut tensors),
                );
                meta.insert(
                    "predictor".into(),
                    mlp_to_value("predictor", model.predictor(), &mut tensors),
                );
                meta.insert(
                    "expander".into(),
                    mlp_to_value("expander", expander, &mut tensors),
                );
                tensors.push(tensor_to_value("latent_lo", &Tensor::vector(lo.to_vec())));
                tensors.push(tensor_to_value("latent_hi", &Tensor::vector(hi.to_vec())));
            }
        }

        let mut prov = serde_json::Map::new();
        prov.insert(
            "config_sha256".into(),
            match &self.provenance.config_sha256 {
                Some(h) => Value::String(h.clone()),
                None => Value::Null,
            },
        );
        prov.insert(
            "epochs_trained".into(),
            Value::from(self.provenance.epochs_trained),
        );
        let metrics: serde_json::Map<String, Value> = self
            .provenance
            .final_metrics
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    serde_json::Number::from_f64(*v)
                        .map(Value::Number)
                        .unwrap_or(Value::Null),
                )
            })
            .collect();
        prov.insert("final_metrics".into(), Value::Object(metrics));

        let mut root = serde_json::Map::new();
        root.insert("format_version".into(), Value::from(FORMAT_VERSION));
        root.insert("kind".into(), Value::String(self.model.kind().to_string()));
        root.insert("meta".into(), Value::Object(meta));
        root.insert("tensors".into(), Value::Array(tensors));
        root.insert("provenance".into(), Value::Object(prov));
        Value::Object(root)
    }

    pub fn to_canonical_string(&self) -> String {
        let mut s = to_canonical_json(&self.to_json_value());
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> EbmResult<()> {
        crate::csv::atomic_write(path, &self.to_canonical_string())
    }

    pub fn from_str(text: &str) -> EbmResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| {
            let offset = line_column_to_offset(text, e.line(), e.column());
            EbmError::Parse {
                offset,
                msg: e.to_string(),
            }
        })?;
        let version = value["format_version"].as_u64().unwrap_or(0);
        if version != FORMAT_VERSION {
            return Err(EbmError::ArchiveVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let kind = value["kind"]
            .as_str()
            .ok_or_else(|| EbmError::invalid("archive", "missing kind"))?
            .to_string();

        let mut tensors = TensorSet {
            tensors: BTreeMap::new(),
        };
        for item in value["tensors"]
            .as_array()
            .ok_or_else(|| EbmError::invalid("archive", "missing tensors"))?
        {
            let name = item["name"]
                .as_str()
                .ok_or_else(|| EbmError::invalid("archive", "tensor without name"))?;
            let shape = parse_usize_array(&item["shape"], "shape")?;
            let data: Vec<f64> = item["data"]
                .as_array()
                .ok_or_else(|| EbmError::invalid("archive", "tensor without data"))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| EbmError::invalid("archive", "non-numeric tensor entry"))
                })
                .collect::<EbmResult<_>>()?;
            tensors
                .tensors
                .insert(name.to_string(), Tensor::from_vec(shape, data)?);
        }
        let meta = &value["meta"];

        let model = match kind.as_str() {
            "hopfield" => {
                let n = meta["units"]
                    .as_u64()
                    .ok_or_else(|| EbmError::invalid("archive", "missing unit count"))?
                    as usize;
                let upper = tensors.take("upper")?;
                ArchivedModel::Hopfield(HopfieldNet::from_upper_triangle(
                    n,
                    upper.into_data(),
                )?)
            }
            "boltzmann" => {
                let n_v = meta["n_v"].as_u64().unwrap_or(0) as usize;
                let n_h = meta["n_h"].as_u64().unwrap_or(0) as usize;
                let restricted = meta["restricted"].as_bool().unwrap_or(false);
                let mut m = BoltzmannMachine::new(n_v, n_h, restricted);
                m.set_flat_params(tensors.take("params")?.data());
                ArchivedModel::Boltzmann(m)
            }
            "mlp_energy" => {
                let dx = meta["dx"].as_u64().unwrap_or(0) as usize;
                let dy = meta["dy"].as_u64().unwrap_or(0) as usize;
                let mlp = mlp_from_value("mlp", &meta["mlp"], &mut tensors)?;
                ArchivedModel::MlpEnergy(MlpEnergy::from_mlp(mlp, dx, dy))
            }
            "ellipse" => {
                let axes = tensors.take("semi_axes")?;
                ArchivedModel::Ellipse(EllipseModel::new(axes.data()[0], axes.data()[1])?)
            }
            "denoising_ae" => {
                let enc = mlp_from_value("enc", &meta["enc"], &mut tensors)?;
                let dec = mlp_from_value("dec", &meta["dec"], &mut tensors)?;
                ArchivedModel::DenoisingAe(DenoisingAe::from_parts(enc, dec)?)
            }
            "masked_ae" => {
                let enc = mlp_from_value("enc", &meta["enc"], &mut tensors)?;
                let dec = mlp_from_value("dec", &meta["dec"], &mut tensors)?;
                ArchivedModel::MaskedAe(MaskedAe::from_parts(enc, dec)?)
            }
            "jepa" => {
                let enc_x = mlp_from_value("enc_x", &meta["enc_x"], &mut tensors)?;
                let enc_y = mlp_from_value("enc_y", &meta["enc_y"], &mut tensors)?;
                let predictor = mlp_from_value("predictor", &meta["predictor"], &mut tensors)?;
                let expander = mlp_from_value("expander", &meta["expander"], &mut tensors)?;
                let lo = tensors.take("latent_lo")?.into_data();
                let hi = tensors.take("latent_hi")?.into_data();
                ArchivedModel::Jepa {
                    model: JepaModel::from_parts(enc_x, enc_y, predictor, lo, hi),
                    expander,
                }
            }
            other => {
                return Err(EbmError::KindMismatch {
                    found: other.to_string(),
                    expected: "a known model kind".to_string(),
                })
            }
        };

        let prov = &value["provenance"];
        let provenance = Provenance {
            config_sha256: prov["config_sha256"].as_str().map(|s| s.to_string()),
            epochs_trained: prov["epochs_trained"].as_u64().unwrap_or(0),
            final_metrics: prov["final_metrics"]
                .as_object()
                .map(|m| {
                    m.iter()
                        .filter_map(|(k, v)| v.as_f64().map(|f| (k.clone(), f)))
                        .collect()
                })
                .unwrap_or_default(),
        };
        Ok(ModelArchive { model, provenance })
    }

    pub fn load(path: &Path) -> EbmResult<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text)
    }
}

fn line_column_to_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0usize;
    for (i, l) in text.lines().enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    offset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::TrainableEnergyModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn roundtrip(archive: &ModelArchive) -> ModelArchive {
        let text = archive.to_canonical_string();
        let loaded = ModelArchive::from_str(&text).expect("load");
        // save → load → save is byte-identical
        assert_eq!(loaded.to_canonical_string(), text);
        loaded
    }

    #[test]
    fn hopfield_roundtrip_is_bitwise() {
        let mut net = HopfieldNet::zeros(6);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for i in 0..6 {
            for j in (i + 1)..6 {
                net.set_weight(i, j, rng.random_range(-2.0..2.0));
            }
        }
        let archive = ModelArchive::new(ArchivedModel::Hopfield(net.clone()));
        let loaded = roundtrip(&archive);
        match loaded.model {
            ArchivedModel::Hopfield(back) => assert_eq!(back, net),
            _ => panic!("kind changed"),
        }
    }

    #[test]
    fn mlp_energy_roundtrip_is_bitwise() {
        let model = MlpEnergy::new(1, 1, 8, 7);
        let mut archive = ModelArchive::new(ArchivedModel::MlpEnergy(model.clone()));
        archive.provenance.epochs_trained = 42;
        archive
            .provenance
            .final_metrics
            .insert("mean_loss".into(), 0.1234567890123456789);
        archive.provenance.config_sha256 = Some("ab".repeat(32));
        let loaded = roundtrip(&archive);
        match loaded.model {
            ArchivedModel::MlpEnergy(back) => {
                assert_eq!(back.flat_params(), model.flat_params());
            }
            _ => panic!("kind changed"),
        }
        assert_eq!(loaded.provenance, archive.provenance);
    }

    #[test]
    fn jepa_roundtrip_is_bitwise() {
        let model = JepaModel::new(2, 3, 1, 6, 9);
        let expander = crate::jepa::VicregConfig::default().make_expander(3, 11);
        let archive = ModelArchive::new(ArchivedModel::Jepa {
            model: model.clone(),
            expander: expander.clone(),
        });
        let loaded = roundtrip(&archive);
        match loaded.model {
            ArchivedModel::Jepa {
                model: m,
                expander: e,
            } => {
                assert_eq!(m.encoder_x().flat_params(), model.encoder_x().flat_params());
                assert_eq!(m.encoder_y().flat_params(), model.encoder_y().flat_params());
                assert_eq!(m.predictor().flat_params(), model.predictor().flat_params());
                assert_eq!(e.flat_params(), expander.flat_params());
            }
            _ => panic!("kind changed"),
        }
    }

    #[test]
    fn unknown_version_rejected_with_found_version() {
        let model = MlpEnergy::new(1, 1, 4, 1);
        let archive = ModelArchive::new(ArchivedModel::MlpEnergy(model));
        let text = archive
            .to_canonical_string()
            .replace("\"format_version\":1", "\"format_version\":99");
        match ModelArchive::from_str(&text) {
            Err(EbmError::ArchiveVersion { found, supported }) => {
                assert_eq!(found, 99);
                assert_eq!(supported, FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_file_reports_byte_offset() {
        let garbage = "{\"format_version\":1,\"kind\":asdf}";
        match ModelArchive::from_str(garbage) {
            Err(EbmError::Parse { offset, .. }) => {
                assert!(offset > 0 && offset < garbage.len());
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn seventeen_digit_decimals_round_trip_every_float() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..200)
            .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-30..30)))
            .collect();
        let mut m = BoltzmannMachine::new(2, 2, true);
        for (i, chunk) in values.chunks(4).take(1).enumerate() {
            for (s, &v) in chunk.iter().enumerate() {
                m.set_wyz(i, s.min(1), v);
            }
        }
        for &v in &values {
            let s = crate::csv::g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
