//! File formats, checkpoints and the command-line driver around
//! [`sentinfo_core`].

pub mod checkpoint;
pub mod cli;
pub mod embeddings;
pub mod error;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
