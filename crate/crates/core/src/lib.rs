//! Sentence encoder trained by maximizing a Jensen-Shannon lower bound on the
//! mutual information between a sentence's pooled representation and the
//! n-gram features of its own tokens.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation over in-memory data: tokenization, batching, the convolutional
//! encoder with its hand-written backward pass, the discriminator and
//! contrastive objective, Adam, gradient checking and the evaluation
//! statistics. File formats, checkpoints and the command line live in the
//! `sentinfo` crate.
//!
//! Enable the `parallel` feature to score sentences of a batch on the rayon
//! pool. Reductions are done in a fixed order, so results do not depend on
//! the number of threads.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod embed;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod mi;
pub mod model;
pub mod optim;
pub mod probe;
pub mod real;
pub mod rng;
pub mod stats;
pub mod tensor;
pub mod train;

mod par;

pub use corpus::{Batch, LabeledSentence, ScoredSentencePair, TokenizedSentence};
pub use embed::{ContextualStore, EmbeddingSequence, EmbeddingSource, EmbeddingTable};
pub use encoder::{EncodedBatch, EncoderConfig, EncoderParams};
pub use error::{Error, Result};
pub use mi::{DiscriminatorParams, MiBatchResult};
pub use model::{Gradients, InputSource, Model, ModelConfig};
pub use optim::{AdamConfig, AdamState};
pub use real::Real;
pub use tensor::{Matrix, Tensor3};
pub use train::{StepRecord, TrainConfig};
