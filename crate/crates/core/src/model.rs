use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Batch;
use crate::embed::{embed_batch, ContextualStore, EmbeddingSource, EmbeddingTable};
use crate::encoder::{encode, EncodedBatch, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::mi::DiscriminatorParams;
use crate::real::Real;
use crate::tensor::{Matrix, Tensor3};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Hidden width of the discriminator; defaults to the representation width.
    pub disc_hidden: usize,
    pub length_norm: bool,
}

impl ModelConfig {
    pub fn new(encoder: EncoderConfig) -> Result<Self> {
        encoder.validate()?;
        let disc_hidden = encoder.output_dim();
        Ok(Self { encoder, disc_hidden, length_norm: true })
    }

    pub fn rep_dim(&self) -> usize {
        self.encoder.output_dim()
    }
}

/// Where input token vectors come from.
#[derive(Debug, Clone, Copy)]
pub enum InputSource<'a, T> {
    /// The model's own trainable table.
    Model,
    Table(&'a EmbeddingTable<T>),
    Contextual(&'a ContextualStore<T>),
}

/// Encoder, discriminator and (optionally) a trainable embedding table.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub embeddings: Option<EmbeddingTable<T>>,
    pub encoder: EncoderParams<T>,
    pub discriminator: DiscriminatorParams<T>,
}

/// A named view of one parameter tensor.
#[derive(Debug)]
pub struct TensorRef<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

fn tensor_refs<'a, T>(
    embeddings: Option<&'a Matrix<T>>,
    encoder: &'a EncoderParams<T>,
    disc: &'a DiscriminatorParams<T>,
) -> Vec<TensorRef<'a, T>>
where
    T: Real,
{
    let mut out = Vec::new();
    if let Some(m) = embeddings {
        out.push(TensorRef { name: "embeddings".into(), shape: m.shape().to_vec(), data: m.as_slice() });
    }
    for (i, l) in encoder.layers.iter().enumerate() {
        out.push(TensorRef {
            name: format!("encoder.{i}.weight"),
            shape: l.weight.shape().to_vec(),
            data: l.weight.as_slice(),
        });
        out.push(TensorRef { name: format!("encoder.{i}.bias"), shape: vec![l.bias.len()], data: &l.bias });
    }
    out.push(TensorRef { name: "discriminator.w1".into(), shape: disc.w1.shape().to_vec(), data: disc.w1.as_slice() });
    out.push(TensorRef { name: "discriminator.b1".into(), shape: vec![disc.b1.len()], data: &disc.b1 });
    out.push(TensorRef { name: "discriminator.u".into(), shape: vec![disc.u.len()], data: &disc.u });
    out.push(TensorRef { name: "discriminator.b0".into(), shape: vec![1], data: core::slice::from_ref(&disc.b0) });
    out
}

fn tensor_muts<'a, T: Real>(
    embeddings: Option<&'a mut Matrix<T>>,
    encoder: &'a mut EncoderParams<T>,
    disc: &'a mut DiscriminatorParams<T>,
) -> Vec<&'a mut [T]> {
    let mut out: Vec<&'a mut [T]> = Vec::new();
    if let Some(m) = embeddings {
        out.push(m.as_mut_slice());
    }
    for l in &mut encoder.layers {
        out.push(l.weight.as_mut_slice());
        out.push(&mut l.bias);
    }
    out.push(disc.w1.as_mut_slice());
    out.push(&mut disc.b1);
    out.push(&mut disc.u);
    out.push(core::slice::from_mut(&mut disc.b0));
    out
}

impl<T: Real> Model<T> {
    /// Fresh parameters. `embeddings`, when given, is trained with the model.
    pub fn init(config: ModelConfig, embeddings: Option<EmbeddingTable<T>>, seed: u64) -> Result<Self> {
        if let Some(t) = &embeddings {
            if t.d_in() != config.encoder.d_in {
                return Err(Error::DimensionMismatch { expected: config.encoder.d_in, found: t.d_in() });
            }
            if !t.trainable() {
                return Err(Error::InvalidConfig("only trainable tables are stored in a model".into()));
            }
        }
        let encoder = EncoderParams::init(&config.encoder, seed)?;
        let discriminator = DiscriminatorParams::init(config.rep_dim(), config.disc_hidden, seed)?;
        Ok(Self { config, embeddings, encoder, discriminator })
    }

    /// Parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        tensor_refs(self.embeddings.as_ref().map(EmbeddingTable::matrix), &self.encoder, &self.discriminator)
    }

    /// Same order as [`Model::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        tensor_muts(self.embeddings.as_mut().map(EmbeddingTable::matrix_mut), &mut self.encoder, &mut self.discriminator)
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|t| t.name).collect()
    }

    pub fn source<'a>(&'a self, input: InputSource<'a, T>) -> Result<EmbeddingSource<'a, T>> {
        let src = match input {
            InputSource::Model => EmbeddingSource::Table(
                self.embeddings
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("model has no embedding table; supply one".into()))?,
            ),
            InputSource::Table(t) => EmbeddingSource::Table(t),
            InputSource::Contextual(c) => EmbeddingSource::Contextual(c),
        };
        if src.d_in() != self.config.encoder.d_in {
            return Err(Error::DimensionMismatch { expected: self.config.encoder.d_in, found: src.d_in() });
        }
        Ok(src)
    }

    /// Embeds and encodes a batch. Returns the input tensor alongside the
    /// encoding; the batch ids are re-keyed for contextual sources.
    pub fn forward(&self, batch: &mut Batch, input: InputSource<'_, T>) -> Result<(Tensor3<T>, EncodedBatch<T>)> {
        let src = self.source(input)?;
        src.resolve_ids(batch)?;
        let h = embed_batch(batch, &src)?;
        let enc = encode(&h, batch.lengths(), &self.encoder, &self.config.encoder)?;
        Ok((h, enc))
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            embeddings: self.embeddings.as_ref().map(EmbeddingTable::cast),
            encoder: self.encoder.cast(),
            discriminator: self.discriminator.cast(),
        }
    }
}

/// Gradients with the same layout as a [`Model`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub embeddings: Option<Matrix<T>>,
    pub encoder: EncoderParams<T>,
    pub discriminator: DiscriminatorParams<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Model<T>) -> Self {
        Self {
            embeddings: model.embeddings.as_ref().map(|t| Matrix::zeros(t.rows(), t.d_in())),
            encoder: EncoderParams::zeros(&model.config.encoder),
            discriminator: DiscriminatorParams::zeros(model.config.rep_dim(), model.config.disc_hidden),
        }
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        tensor_refs(self.embeddings.as_ref(), &self.encoder, &self.discriminator)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        tensor_muts(self.embeddings.as_mut(), &mut self.encoder, &mut self.discriminator)
    }

    /// `self += other`, tensor by tensor.
    pub fn accumulate(&mut self, other: &Gradients<T>) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::real::axpy(T::one(), src.data, dst);
        }
    }
}
