use std::path::PathBuf;
use std::str::FromStr;

use sentinfo_core::{ContextualStore, EmbeddingTable, InputSource};

use crate::error::{Error, Result};
use crate::io;

/// `trainable:DIM`, `static:PATH` or `contextual:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingSpec {
    Trainable(usize),
    Static(PathBuf),
    Contextual(PathBuf),
}

impl FromStr for EmbeddingSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| format!("expected KIND:ARG, got {s:?}"))?;
        match kind {
            "trainable" => match arg.parse::<usize>() {
                Ok(d) if d > 0 => Ok(Self::Trainable(d)),
                _ => Err(format!("trainable width must be a positive integer, got {arg:?}")),
            },
            "static" if !arg.is_empty() => Ok(Self::Static(arg.into())),
            "contextual" if !arg.is_empty() => Ok(Self::Contextual(arg.into())),
            _ => Err(format!("unknown embedding source {s:?} (use trainable:DIM, static:PATH or contextual:PATH)")),
        }
    }
}

impl EmbeddingSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Trainable(_) => "trainable",
            Self::Static(_) => "static",
            Self::Contextual(_) => "contextual",
        }
    }

    pub fn load(&self) -> Result<LoadedEmbeddings> {
        Ok(match self {
            Self::Trainable(d) => LoadedEmbeddings::Trainable(*d),
            Self::Static(p) => LoadedEmbeddings::Static(io::load_static_vectors(p)?),
            Self::Contextual(p) => LoadedEmbeddings::Contextual(io::load_contextual(p)?),
        })
    }
}

pub enum LoadedEmbeddings {
    Trainable(usize),
    Static(EmbeddingTable<f32>),
    Contextual(ContextualStore<f32>),
}

impl LoadedEmbeddings {
    pub fn d_in(&self) -> usize {
        match self {
            Self::Trainable(d) => *d,
            Self::Static(t) => t.d_in(),
            Self::Contextual(c) => c.d_in(),
        }
    }

    pub fn input(&self) -> InputSource<'_, f32> {
        match self {
            Self::Trainable(_) => InputSource::Model,
            Self::Static(t) => InputSource::Table(t),
            Self::Contextual(c) => InputSource::Contextual(c),
        }
    }
}

/// Resolves the input source for a stored model: its own table when it has
/// one, otherwise the one named on the command line.
pub fn for_checkpoint(kind: &str, spec: Option<&EmbeddingSpec>) -> Result<LoadedEmbeddings> {
    match (kind, spec) {
        ("trainable", None | Some(EmbeddingSpec::Trainable(_))) => Ok(LoadedEmbeddings::Trainable(0)),
        ("trainable", Some(_)) => {
            Err(Error::Usage("checkpoint carries its own trainable embeddings; drop --embeddings".into()))
        }
        (_, Some(EmbeddingSpec::Trainable(_))) | (_, None) => {
            Err(Error::Usage(format!("checkpoint was trained on {kind} embeddings; pass --embeddings {kind}:PATH")))
        }
        (_, Some(s)) => s.load(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!("trainable:64".parse(), Ok(EmbeddingSpec::Trainable(64)));
        assert_eq!("static:a/b.txt".parse(), Ok(EmbeddingSpec::Static("a/b.txt".into())));
        assert_eq!("contextual:x.jsonl".parse(), Ok(EmbeddingSpec::Contextual("x.jsonl".into())));
        assert!("trainable:0".parse::<EmbeddingSpec>().is_err());
        assert!("bert:x".parse::<EmbeddingSpec>().is_err());
        assert!("static:".parse::<EmbeddingSpec>().is_err());
    }
}
