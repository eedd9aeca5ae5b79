//! Trained model container and lossless on-disk persistence.
//!
//! Models are serialized as JSON with every float stored as the hex encoding
//! of its IEEE 754 bit pattern, followed by a sha256 checksum trailer line.
//! Saving is atomic (temp file + rename) and save -> load -> save is
//! byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dtw::BandConstraint;
use crate::error::{DpDtwError, Result};
use crate::prototype::{Prototype, PrototypeSet, Transcript};
use crate::tsc::TscConfig;
use crate::weak_seg::{Encoder, ReferenceSet, SegConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Which task the model was trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Tsc,
    Segmentation,
}

/// Per-epoch (or per-step) loss breakdown recorded during training.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub epoch: u64,
    pub total: f64,
    pub discriminative: f64,
    pub distance: f64,
}

/// A trained model: prototypes, encoder, class vocabulary, the configuration
/// it was trained with, and (for segmentation) the reference transcript set.
#[derive(Debug, Clone)]
pub struct Model {
    pub mode: ModelMode,
    pub vocab: Vec<String>,
    pub protoset: PrototypeSet,
    pub encoder: Encoder,
    pub tsc_config: Option<TscConfig>,
    pub seg_config: Option<SegConfig>,
    pub reference_set: Option<ReferenceSet>,
    pub loss_history: Vec<LossRecord>,
}

fn digest_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn unhex(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| DpDtwError::Data(format!("invalid float encoding {s:?}")))
}

fn hex_vec(it: impl IntoIterator<Item = f64>) -> Vec<String> {
    it.into_iter().map(hex).collect()
}

fn unhex_vec(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| unhex(s)).collect()
}

#[derive(Serialize, Deserialize)]
struct PersistedPrototype {
    class_id: usize,
    values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PersistedEncoder {
    kind: String,
    window: usize,
    in_dim: usize,
    out_dim: usize,
    weight: Vec<String>,
    bias: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PersistedTscConfig {
    lambda: String,
    temperature: String,
    epochs: usize,
    batch_fraction: String,
    learning_rate: String,
    seed: u64,
    band: BandConstraint,
}

#[derive(Serialize, Deserialize)]
struct PersistedSegConfig {
    delta: String,
    lambda: String,
    num_negatives: usize,
    tau_p: usize,
    steps: usize,
    batch_size: usize,
    learning_rate: String,
    seed: u64,
    encoder: crate::weak_seg::EncoderSpec,
}

#[derive(Serialize, Deserialize)]
struct PersistedLossRecord {
    epoch: u64,
    total: String,
    discriminative: String,
    distance: String,
}

#[derive(Serialize, Deserialize)]
struct PersistedModel {
    version: u32,
    mode: String,
    vocab: Vec<String>,
    dim: usize,
    tau_p: usize,
    prototypes: Vec<PersistedPrototype>,
    encoder: Option<PersistedEncoder>,
    tsc_config: Option<PersistedTscConfig>,
    seg_config: Option<PersistedSegConfig>,
    reference_set: Option<Vec<Vec<usize>>>,
    loss_history: Vec<PersistedLossRecord>,
}

fn encoder_to_persisted(enc: &Encoder) -> Option<PersistedEncoder> {
    match enc {
        Encoder::Identity => None,
        Encoder::Affine { weight, bias } => Some(PersistedEncoder {
            kind: "affine".into(),
            window: 1,
            in_dim: weight.ncols(),
            out_dim: weight.nrows(),
            weight: hex_vec(weight.iter().cloned()),
            bias: hex_vec(bias.iter().cloned()),
        }),
        Encoder::WindowLinear { window, in_dim, weight, bias } => Some(PersistedEncoder {
            kind: "window".into(),
            window: *window,
            in_dim: *in_dim,
            out_dim: weight.nrows(),
            weight: hex_vec(weight.iter().cloned()),
            bias: hex_vec(bias.iter().cloned()),
        }),
    }
}

fn encoder_from_persisted(p: Option<&PersistedEncoder>) -> Result<Encoder> {
    let Some(p) = p else { return Ok(Encoder::Identity) };
    let weight_vals = unhex_vec(&p.weight)?;
    let bias_vals = unhex_vec(&p.bias)?;
    let cols = match p.kind.as_str() {
        "affine" => p.in_dim,
        "window" => p.in_dim * p.window,
        other => return Err(DpDtwError::Data(format!("unknown encoder kind {other:?}"))),
    };
    let weight = Array2::from_shape_vec((p.out_dim, cols), weight_vals)
        .map_err(|e| DpDtwError::Data(format!("encoder weight shape: {e}")))?;
    let bias = Array1::from_vec(bias_vals);
    if bias.len() != p.out_dim {
        return Err(DpDtwError::Data("encoder bias length mismatch".into()));
    }
    Ok(match p.kind.as_str() {
        "affine" => Encoder::Affine { weight, bias },
        _ => Encoder::WindowLinear { window: p.window, in_dim: p.in_dim, weight, bias },
    })
}

fn to_persisted(model: &Model) -> PersistedModel {
    PersistedModel {
        version: MODEL_FORMAT_VERSION,
        mode: match model.mode {
            ModelMode::Tsc => "tsc".into(),
            ModelMode::Segmentation => "segmentation".into(),
        },
        vocab: model.vocab.clone(),
        dim: model.protoset.dim(),
        tau_p: model.protoset.tau_p(),
        prototypes: model
            .protoset
            .iter()
            .map(|p| PersistedPrototype {
                class_id: p.class_id,
                values: hex_vec(p.data.iter().cloned()),
            })
            .collect(),
        encoder: encoder_to_persisted(&model.encoder),
        tsc_config: model.tsc_config.as_ref().map(|c| PersistedTscConfig {
            lambda: hex(c.lambda),
            temperature: hex(c.temperature),
            epochs: c.epochs,
            batch_fraction: hex(c.batch_fraction),
            learning_rate: hex(c.learning_rate),
            seed: c.seed,
            band: c.band,
        }),
        seg_config: model.seg_config.as_ref().map(|c| PersistedSegConfig {
            delta: hex(c.delta),
            lambda: hex(c.lambda),
            num_negatives: c.num_negatives,
            tau_p: c.tau_p,
            steps: c.steps,
            batch_size: c.batch_size,
            learning_rate: hex(c.learning_rate),
            seed: c.seed,
            encoder: c.encoder,
        }),
        reference_set: model
            .reference_set
            .as_ref()
            .map(|r| r.transcripts.iter().map(|t| t.entries.clone()).collect()),
        loss_history: model
            .loss_history
            .iter()
            .map(|r| PersistedLossRecord {
                epoch: r.epoch,
                total: hex(r.total),
                discriminative: hex(r.discriminative),
                distance: hex(r.distance),
            })
            .collect(),
    }
}

fn from_persisted(p: PersistedModel) -> Result<Model> {
    if p.version != MODEL_FORMAT_VERSION {
        return Err(DpDtwError::VersionMismatch {
            expected: MODEL_FORMAT_VERSION,
            got: p.version,
        });
    }
    let mode = match p.mode.as_str() {
        "tsc" => ModelMode::Tsc,
        "segmentation" => ModelMode::Segmentation,
        other => return Err(DpDtwError::Data(format!("unknown model mode {other:?}"))),
    };
    let mut prototypes = Vec::with_capacity(p.prototypes.len());
    for pp in &p.prototypes {
        let values = unhex_vec(&pp.values)?;
        let data = Array2::from_shape_vec((p.dim, p.tau_p), values)
            .map_err(|e| DpDtwError::Data(format!("prototype shape: {e}")))?;
        prototypes.push(Prototype { class_id: pp.class_id, data });
    }
    let protoset = PrototypeSet::new(prototypes)?;
    let encoder = encoder_from_persisted(p.encoder.as_ref())?;
    let tsc_config = p
        .tsc_config
        .map(|c| -> Result<TscConfig> {
            Ok(TscConfig {
                lambda: unhex(&c.lambda)?,
                temperature: unhex(&c.temperature)?,
                epochs: c.epochs,
                batch_fraction: unhex(&c.batch_fraction)?,
                learning_rate: unhex(&c.learning_rate)?,
                seed: c.seed,
                band: c.band,
            })
        })
        .transpose()?;
    let seg_config = p
        .seg_config
        .map(|c| -> Result<SegConfig> {
            Ok(SegConfig {
                delta: unhex(&c.delta)?,
                lambda: unhex(&c.lambda)?,
                num_negatives: c.num_negatives,
                tau_p: c.tau_p,
                steps: c.steps,
                batch_size: c.batch_size,
                learning_rate: unhex(&c.learning_rate)?,
                seed: c.seed,
                encoder: c.encoder,
            })
        })
        .transpose()?;
    let reference_set = p
        .reference_set
        .map(|ts| -> Result<ReferenceSet> {
            let transcripts = ts
                .into_iter()
                .map(Transcript::new)
                .collect::<Result<Vec<_>>>()?;
            Ok(ReferenceSet { transcripts })
        })
        .transpose()?;
    let loss_history = p
        .loss_history
        .iter()
        .map(|r| -> Result<LossRecord> {
            Ok(LossRecord {
                epoch: r.epoch,
                total: unhex(&r.total)?,
                discriminative: unhex(&r.discriminative)?,
                distance: unhex(&r.distance)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Model {
        mode,
        vocab: p.vocab,
        protoset,
        encoder,
        tsc_config,
        seg_config,
        reference_set,
        loss_history,
    })
}

impl Model {
    /// Serialize to the checksummed on-disk text format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_string(&to_persisted(self)).expect("model serializes");
        let digest = digest_hex(json.as_bytes());
        let mut out = json.into_bytes();
        out.extend_from_slice(format!("\n#sha256:{digest}\n").as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| DpDtwError::Data("model file is not valid UTF-8".into()))?;
        let mut lines = text.trim_end_matches('\n').lines();
        let json = lines
            .next()
            .ok_or_else(|| DpDtwError::Data("empty model file".into()))?;
        let trailer = lines
            .next()
            .ok_or_else(|| DpDtwError::Data("model file missing checksum trailer".into()))?;
        let stored = trailer
            .strip_prefix("#sha256:")
            .ok_or_else(|| DpDtwError::Data("malformed checksum trailer".into()))?;
        let actual = digest_hex(json.as_bytes());
        if actual != stored {
            return Err(DpDtwError::ChecksumMismatch {
                expected: stored.to_string(),
                got: actual,
            });
        }
        let persisted: PersistedModel = serde_json::from_str(json)
            .map_err(|e| DpDtwError::Data(format!("model parse: {e}")))?;
        from_persisted(persisted)
    }

    /// Atomic save: write to a sibling temp file, then rename into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let tmp = path.with_extension("tmp");
        let io_err = |e: std::io::Error| DpDtwError::Io {
            path: path.display().to_string(),
            source: e,
        };
        {
            let mut f = fs::File::create(&tmp).map_err(io_err)?;
            f.write_all(&bytes).map_err(io_err)?;
            f.sync_all().map_err(io_err)?;
        }
        fs::rename(&tmp, path).map_err(io_err)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| DpDtwError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_bytes(&bytes)
    }
}
