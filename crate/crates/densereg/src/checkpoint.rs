//! Versioned JSON checkpoints for a trained model, its scalers, and the
//! training configuration it was produced with.
//!
//! The container is plain JSON with every tensor value written as a decimal
//! string with 17 significant digits, which round-trips 64-bit floats
//! exactly while staying human-diffable. A SHA-256 checksum over the
//! canonically serialized payload guards against silent corruption.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec};
use crate::tensor::{Matrix, Rng};
use crate::train::{ScalerParams, TrainConfig};

/// Version of the on-disk schema this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Payload {
    spec: ModelSpec,
    tensors: Vec<TensorRecord>,
    feature_scaler: ScalerParams,
    target_scaler: Option<ScalerParams>,
    train_config: TrainConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    checksum: String,
    payload: Payload,
}

/// Everything a checkpoint restores: the rebuilt model plus the scalers and
/// training configuration it was saved with.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub feature_scaler: ScalerParams,
    pub target_scaler: Option<ScalerParams>,
    pub train_config: TrainConfig,
}

fn checksum_of(payload: &Payload) -> Result<String> {
    let bytes = serde_json::to_string(payload)
        .map_err(|e| Error::json("serializing checkpoint payload", e))?;
    let mut hasher = Sha256::new();
    hasher.update(bytes.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

fn encode_values(m: &Matrix) -> Vec<String> {
    m.iter().map(|v| format!("{v:.16e}")).collect()
}

/// Writes the model, scalers, and training config as a checksummed JSON
/// checkpoint. Serialization is canonical (fixed field order, fixed float
/// formatting), so saving an unmodified loaded checkpoint reproduces the
/// file byte for byte.
pub fn save(
    model: &Model,
    feature_scaler: &ScalerParams,
    target_scaler: Option<&ScalerParams>,
    train_config: &TrainConfig,
    path: &Path,
) -> Result<()> {
    let tensors = model
        .named_tensors()
        .into_iter()
        .map(|(name, m)| TensorRecord {
            name,
            shape: [m.rows(), m.cols()],
            values: encode_values(m),
        })
        .collect();
    let payload = Payload {
        spec: model.spec().clone(),
        tensors,
        feature_scaler: feature_scaler.clone(),
        target_scaler: target_scaler.cloned(),
        train_config: train_config.clone(),
    };
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        checksum: checksum_of(&payload)?,
        payload,
    };
    let body = serde_json::to_string(&file)
        .map_err(|e| Error::json("serializing checkpoint", e))?;
    std::fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads and validates a checkpoint: version, checksum, and tensor layout
/// against the topology rebuilt from the stored spec, in that order, each
/// with its own error.
pub fn load(path: &Path) -> Result<Checkpoint> {
    let display = path.display().to_string();
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;

    #[derive(Deserialize)]
    struct VersionProbe {
        format_version: u32,
    }
    let probe: VersionProbe = serde_json::from_str(&body)
        .map_err(|e| Error::json(format!("parsing checkpoint {display}"), e))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.format_version,
            supported: FORMAT_VERSION,
        });
    }

    let file: CheckpointFile = serde_json::from_str(&body)
        .map_err(|e| Error::json(format!("parsing checkpoint {display}"), e))?;
    let computed = checksum_of(&file.payload)?;
    if computed != file.checksum {
        return Err(Error::ChecksumMismatch {
            stored: file.checksum,
            computed,
        });
    }

    let payload = file.payload;
    payload.spec.validate()?;
    let mut model = Model::build(&payload.spec, &mut Rng::new(0))?;
    {
        let mut targets = model.named_tensors_mut();
        if targets.len() != payload.tensors.len() {
            return Err(Error::TensorMismatch(format!(
                "expected {} tensors for the stored spec, found {}",
                targets.len(),
                payload.tensors.len()
            )));
        }
        for (record, (name, tensor)) in payload.tensors.iter().zip(targets.iter_mut()) {
            if record.name != *name {
                return Err(Error::TensorMismatch(format!(
                    "expected tensor {name}, found {}",
                    record.name
                )));
            }
            if record.shape != [tensor.rows(), tensor.cols()] {
                return Err(Error::TensorMismatch(format!(
                    "tensor {name}: stored shape {:?} does not match expected {:?}",
                    record.shape,
                    [tensor.rows(), tensor.cols()]
                )));
            }
            if record.values.len() != tensor.rows() * tensor.cols() {
                return Err(Error::TensorMismatch(format!(
                    "tensor {name}: {} values for shape {:?}",
                    record.values.len(),
                    record.shape
                )));
            }
            for (slot, text) in tensor.data_mut().iter_mut().zip(&record.values) {
                let value: f64 = text.parse().map_err(|_| {
                    Error::TensorMismatch(format!(
                        "tensor {name}: value {text:?} is not a decimal float"
                    ))
                })?;
                if !value.is_finite() {
                    return Err(Error::TensorMismatch(format!(
                        "tensor {name}: value {text:?} is not finite"
                    )));
                }
                *slot = value;
            }
        }
    }
    Ok(Checkpoint {
        model,
        feature_scaler: payload.feature_scaler,
        target_scaler: payload.target_scaler,
        train_config: payload.train_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::nn::{Mode, Network};

    fn sample_model(seed: u64) -> Model {
        let spec = ModelSpec {
            kind: ModelKind::Densenet,
            input_dim: 3,
            depth: 4,
            width: None,
        };
        Model::build(&spec, &mut Rng::new(seed)).unwrap()
    }

    fn sample_scalers() -> (ScalerParams, ScalerParams) {
        // 3.9929763363055524 regresses the checksum if the JSON parser
        // rounds off the last bit of a shortest-form float literal
        let features = Matrix::from_rows(&[
            vec![0.0, -1.0, 2.0],
            vec![3.9929763363055524, 3.0, 2.5],
            vec![1.0, 0.5, -2.0],
        ])
        .unwrap();
        let targets = Matrix::col_vector(vec![1.0, 5.0, -3.0]).unwrap();
        (
            ScalerParams::fit(&features).unwrap(),
            ScalerParams::fit(&targets).unwrap(),
        )
    }

    fn save_sample(dir: &Path) -> std::path::PathBuf {
        let model = sample_model(42);
        let (fs, ts) = sample_scalers();
        let path = dir.join("model.json");
        save(&model, &fs, Some(&ts), &TrainConfig::default(), &path).unwrap();
        path
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = sample_model(42);
        let (fs, ts) = sample_scalers();
        let path = dir.path().join("model.json");
        save(&model, &fs, Some(&ts), &TrainConfig::default(), &path).unwrap();

        let mut restored = load(&path).unwrap();
        assert_eq!(restored.model.spec(), model.spec());
        assert_eq!(restored.feature_scaler, fs);
        assert_eq!(restored.target_scaler, Some(ts));
        assert_eq!(restored.train_config, TrainConfig::default());
        // exact equality on every tensor, moving statistics included
        assert_eq!(restored.model.state(), model.state());

        let x = Matrix::from_vec(100, 3, Rng::new(9).uniform(300, -2.0, 2.0).unwrap()).unwrap();
        let a = model.forward(&x, Mode::Infer).unwrap();
        let b = restored.model.forward(&x, Mode::Infer).unwrap();
        for (va, vb) in a.iter().zip(b.iter()) {
            assert_eq!(va.to_bits(), vb.to_bits());
        }
    }

    #[test]
    fn resave_reproduces_file_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_sample(dir.path());
        let loaded = load(&path).unwrap();
        let second = dir.path().join("again.json");
        save(
            &loaded.model,
            &loaded.feature_scaler,
            loaded.target_scaler.as_ref(),
            &loaded.train_config,
            &second,
        )
        .unwrap();
        let original = std::fs::read(&path).unwrap();
        let resaved = std::fs::read(&second).unwrap();
        assert_eq!(original, resaved);
    }

    /// Parses the file, applies `mutate` to the JSON tree, restores a
    /// checksum consistent with the mutated payload when asked, and writes
    /// it back.
    fn tamper(
        path: &Path,
        fix_checksum: bool,
        mutate: impl FnOnce(&mut serde_json::Value),
    ) {
        let body = std::fs::read_to_string(path).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&body).unwrap();
        mutate(&mut value);
        if fix_checksum {
            let payload: Payload = serde_json::from_value(value["payload"].clone()).unwrap();
            value["checksum"] = serde_json::Value::String(checksum_of(&payload).unwrap());
        }
        std::fs::write(path, serde_json::to_string(&value).unwrap()).unwrap();
    }

    #[test]
    fn corrupted_value_fails_the_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_sample(dir.path());
        tamper(&path, false, |v| {
            let s = v["payload"]["tensors"][0]["values"][0].as_str().unwrap();
            let flipped = if s.contains('1') {
                s.replacen('1', "2", 1)
            } else {
                s.replacen('0', "1", 1)
            };
            v["payload"]["tensors"][0]["values"][0] = flipped.into();
        });
        match load(&path) {
            Err(Error::ChecksumMismatch { stored, computed }) => assert_ne!(stored, computed),
            other => panic!("expected checksum mismatch, got {other:?}"),
        }
    }

    #[test]
    fn future_version_is_rejected_before_anything_else() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_sample(dir.path());
        tamper(&path, false, |v| {
            v["format_version"] = 2.into();
        });
        match load(&path) {
            Err(Error::UnsupportedVersion { found, supported }) => {
                assert_eq!(found, 2);
                assert_eq!(supported, FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn tensor_count_mismatch_is_reported_distinctly() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_sample(dir.path());
        // claim a deeper topology than the stored tensors provide
        tamper(&path, true, |v| {
            v["payload"]["spec"]["depth"] = 7.into();
        });
        match load(&path) {
            Err(Error::TensorMismatch(msg)) => assert!(msg.contains("tensors"), "{msg}"),
            other => panic!("expected tensor mismatch, got {other:?}"),
        }
    }

    #[test]
    fn tensor_shape_and_name_mismatches_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_sample(dir.path());
        tamper(&path, true, |v| {
            v["payload"]["tensors"][0]["shape"] = serde_json::json!([5, 9]);
        });
        assert!(matches!(load(&path), Err(Error::TensorMismatch(_))));

        let path = save_sample(dir.path());
        tamper(&path, true, |v| {
            v["payload"]["tensors"][0]["name"] = "mystery".into();
        });
        assert!(matches!(load(&path), Err(Error::TensorMismatch(_))));

        let path = save_sample(dir.path());
        tamper(&path, true, |v| {
            v["payload"]["tensors"][0]["values"][0] = "not-a-number".into();
        });
        assert!(matches!(load(&path), Err(Error::TensorMismatch(_))));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.json");
        assert!(matches!(load(&missing), Err(Error::Io { .. })));
    }

    #[test]
    fn seventeen_digit_strings_round_trip_exactly() {
        let mut rng = Rng::new(7);
        let values = rng.uniform(1000, -1e6, 1e6).unwrap();
        for v in values {
            let text = format!("{v:.16e}");
            let back: f64 = text.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{text}");
        }
        for v in [0.0, -0.0, f64::MIN_POSITIVE, 1e-300, -1e300] {
            let back: f64 = format!("{v:.16e}").parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits());
        }
    }
}
