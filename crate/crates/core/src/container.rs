//! Versioned JSON containers for datasets and models.
//!
//! Floats serialize as shortest round-trip decimals, so save -> load -> save
//! is byte-identical and loaded parameters are bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::gan::AnomiModel;
use crate::target::TargetModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported container version {got} (expected {expected})")]
    Version { got: u32, expected: u32 },
    #[error("container holds a {got}, expected a {expected}")]
    WrongKind {
        got: &'static str,
        expected: &'static str,
    },
    #[error("refusing to serialize non-finite values (field {field})")]
    NonFinite { field: String },
}

#[derive(Serialize, Deserialize)]
pub struct Container {
    pub version: u32,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Dataset(Dataset),
    Target(TargetModel),
    Anomi(AnomiModel),
}

impl Payload {
    fn kind(&self) -> &'static str {
        match self {
            Payload::Dataset(_) => "dataset",
            Payload::Target(_) => "target",
            Payload::Anomi(_) => "anomi",
        }
    }
}

/// Canonical container text: compact JSON plus a trailing newline.
pub fn to_string(payload: &Payload) -> String {
    #[derive(Serialize)]
    struct ContainerRef<'a> {
        version: u32,
        payload: &'a Payload,
    }
    let mut text = serde_json::to_string(&ContainerRef {
        version: FORMAT_VERSION,
        payload,
    })
    .expect("container serializes");
    text.push('\n');
    text
}

pub fn save(path: &Path, payload: &Payload) -> Result<(), ContainerError> {
    if let Payload::Dataset(ds) = payload {
        for (split, records) in [("train", &ds.train), ("test", &ds.test)] {
            for r in records {
                if r.features.iter().any(|v| !v.is_finite()) {
                    return Err(ContainerError::NonFinite {
                        field: format!("{split} records"),
                    });
                }
            }
        }
    }
    fs::write(path, to_string(payload)).map_err(|source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Payload, ContainerError> {
    let text = fs::read_to_string(path).map_err(|source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let container: Container =
        serde_json::from_str(&text).map_err(|source| ContainerError::Json {
            path: path.display().to_string(),
            source,
        })?;
    if container.version != FORMAT_VERSION {
        return Err(ContainerError::Version {
            got: container.version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(container.payload)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, ContainerError> {
    match load(path)? {
        Payload::Dataset(ds) => Ok(ds),
        other => Err(ContainerError::WrongKind {
            got: other.kind(),
            expected: "dataset",
        }),
    }
}

pub fn load_target(path: &Path) -> Result<TargetModel, ContainerError> {
    match load(path)? {
        Payload::Target(t) => Ok(t),
        other => Err(ContainerError::WrongKind {
            got: other.kind(),
            expected: "target",
        }),
    }
}

pub fn load_anomi(path: &Path) -> Result<AnomiModel, ContainerError> {
    match load(path)? {
        Payload::Anomi(m) => Ok(m),
        other => Err(ContainerError::WrongKind {
            got: other.kind(),
            expected: "anomi",
        }),
    }
}
