//! Binary checkpoint: magic `ISBT`, a little-endian `u32` version, a `u64`
//! header length, a JSON header, then every tensor as little-endian `f32` in
//! header order. Model tensors come first, then the optimizer moments.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sentinfo_core::{
    encoder::EncoderParams, mi::DiscriminatorParams, AdamState, EmbeddingTable, EncoderConfig, Matrix, Model,
    ModelConfig,
};

use crate::error::{Error, Result};
use crate::io::MetricRow;

pub const MAGIC: &[u8; 4] = b"ISBT";
pub const VERSION: u32 = 1;
const PREFIX: usize = 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub window_sizes: Vec<usize>,
    pub filters_per_window: usize,
    pub d_in: usize,
    pub disc_hidden: usize,
    pub length_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub model: ModelSpec,
    /// `trainable`, `static` or `contextual`.
    pub embeddings: String,
    /// Row tokens of a trainable table, UNK excluded.
    pub vocab: Vec<String>,
    pub seed: u64,
    pub step: u64,
    pub adam_step: u64,
    pub metrics: Vec<MetricRow>,
    pub tensors: Vec<TensorSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub optimizer: AdamState<f32>,
    pub embeddings: String,
    pub seed: u64,
    pub step: u64,
    pub metrics: Vec<MetricRow>,
}

fn spec_of(c: &ModelConfig) -> ModelSpec {
    ModelSpec {
        window_sizes: c.encoder.window_sizes.clone(),
        filters_per_window: c.encoder.filters_per_window,
        d_in: c.encoder.d_in,
        disc_hidden: c.disc_hidden,
        length_norm: c.length_norm,
    }
}

fn config_of(s: &ModelSpec) -> Result<ModelConfig> {
    let encoder = EncoderConfig::new(s.window_sizes.clone(), s.filters_per_window, s.d_in)
        .map_err(|e| Error::CorruptPayload(format!("bad model config: {e}")))?;
    if s.disc_hidden == 0 {
        return Err(Error::CorruptPayload("bad model config: zero discriminator width".into()));
    }
    Ok(ModelConfig { encoder, disc_hidden: s.disc_hidden, length_norm: s.length_norm })
}

/// Parameters only; the optimizer moments follow the same order.
fn model_specs(model: &Model<f32>) -> Vec<TensorSpec> {
    model.tensors().into_iter().map(|t| TensorSpec { name: t.name, shape: t.shape }).collect()
}

fn all_specs(model: &Model<f32>) -> Vec<TensorSpec> {
    let base = model_specs(model);
    let mut out = base.clone();
    for tag in ["m", "v"] {
        out.extend(base.iter().map(|t| TensorSpec { name: format!("adam.{tag}/{}", t.name), shape: t.shape.clone() }));
    }
    out
}

impl Checkpoint {
    pub fn new(model: Model<f32>, embeddings: &str, seed: u64) -> Self {
        let optimizer = AdamState::for_model(&model);
        Self { model, optimizer, embeddings: embeddings.into(), seed, step: 0, metrics: Vec::new() }
    }

    pub fn header(&self) -> Header {
        Header {
            model: spec_of(&self.model.config),
            embeddings: self.embeddings.clone(),
            vocab: self.model.embeddings.as_ref().map_or_else(Vec::new, |t| t.tokens().to_vec()),
            seed: self.seed,
            step: self.step,
            adam_step: self.optimizer.step,
            metrics: self.metrics.clone(),
            tensors: all_specs(&self.model),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header()).map_err(|e| Error::CorruptPayload(e.to_string()))?;
        let tensors = self.model.tensors();
        if self.optimizer.first.len() != tensors.len() || self.optimizer.second.len() != tensors.len() {
            return Err(Error::CorruptPayload("optimizer state does not match model".into()));
        }
        let floats: usize = tensors.iter().map(|t| t.data.len()).sum::<usize>() * 3;
        let mut out = Vec::with_capacity(PREFIX + header.len() + 4 * floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let data = tensors
            .iter()
            .map(|t| t.data)
            .chain(self.optimizer.first.iter().map(Vec::as_slice))
            .chain(self.optimizer.second.iter().map(Vec::as_slice));
        for x in data.flatten() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < PREFIX {
            return Err(Error::CorruptPayload("truncated prefix".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(PREFIX))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| Error::CorruptPayload("header runs past end of file".into()))?;
        let header: Header = serde_json::from_slice(&bytes[PREFIX..header_end])
            .map_err(|e| Error::CorruptPayload(format!("header: {e}")))?;

        let config = config_of(&header.model)?;
        let embeddings = if header.embeddings == "trainable" {
            let rows = header.vocab.len() + 1;
            let matrix = Matrix::zeros(rows, config.encoder.d_in);
            Some(
                EmbeddingTable::from_parts(header.vocab.clone(), matrix, true)
                    .map_err(|e| Error::CorruptPayload(format!("vocabulary: {e}")))?,
            )
        } else {
            None
        };
        let encoder = EncoderParams::zeros(&config.encoder);
        let discriminator = DiscriminatorParams::zeros(config.rep_dim(), config.disc_hidden);
        let mut model = Model { config, embeddings, encoder, discriminator };

        if all_specs(&model) != header.tensors {
            return Err(Error::CorruptPayload("tensor table does not match model config".into()));
        }
        let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();
        let total: usize = sizes.iter().sum::<usize>() * 3;
        let payload = &bytes[header_end..];
        if payload.len() != 4 * total {
            return Err(Error::CorruptPayload(format!("payload is {} bytes, expected {}", payload.len(), 4 * total)));
        }
        let mut values = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        for t in model.tensors_mut() {
            t.iter_mut().zip(&mut values).for_each(|(dst, v)| *dst = v);
        }
        let mut optimizer = AdamState::new(&sizes);
        optimizer.step = header.adam_step;
        for m in optimizer.first.iter_mut().chain(optimizer.second.iter_mut()) {
            m.iter_mut().zip(&mut values).for_each(|(dst, v)| *dst = v);
        }
        Ok(Self {
            model,
            optimizer,
            embeddings: header.embeddings,
            seed: header.seed,
            step: header.step,
            metrics: header.metrics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
