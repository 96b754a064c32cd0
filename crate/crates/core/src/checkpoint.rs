//! Versioned JSON checkpoints for trained models.
//!
//! Floats are written with round-trip precision, so save followed by load
//! reproduces every parameter bit for bit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::pipeline::HybridModel;
use crate::vqc::VqcModel;

pub const CHECKPOINT_VERSION: u32 = 1;

pub trait Checkpoint: Serialize + DeserializeOwned {
    const FORMAT: &'static str;

    /// Structural checks run after loading.
    fn check(&self) -> Result<()>;
}

impl Checkpoint for VqcModel {
    const FORMAT: &'static str = "qvgc-vqc";

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl Checkpoint for GnnModel {
    const FORMAT: &'static str = "qvgc-gnn";

    fn check(&self) -> Result<()> {
        GnnModel::from_params(self.config, self.params().to_vec()).map(|_| ())
    }
}

impl Checkpoint for HybridModel {
    const FORMAT: &'static str = "qvgc-hybrid";

    fn check(&self) -> Result<()> {
        self.gnn.check()?;
        let mut width = self.gnn.embed_dim();
        if let Some(b) = &self.bottleneck {
            if b.d_in != width {
                return Err(Error::Dimension {
                    expected: width,
                    actual: b.d_in,
                });
            }
            width = b.width;
        }
        if let Some(s) = &self.scaler {
            if s.lo.len() != width || s.hi.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    actual: s.lo.len(),
                });
            }
        }
        if let Some(v) = &self.vqc {
            v.check()?;
            if v.n_features() != width {
                return Err(Error::Dimension {
                    expected: width,
                    actual: v.n_features(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    format: &'a str,
    version: u32,
    model: &'a T,
}

#[derive(Deserialize)]
struct Body<T> {
    model: T,
}

pub fn to_checkpoint_json<T: Checkpoint>(model: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&EnvelopeRef {
        format: T::FORMAT,
        version: CHECKPOINT_VERSION,
        model,
    })?)
}

pub fn from_checkpoint_json<T: Checkpoint>(text: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Header {
        format: String,
        version: u32,
    }
    let header: Header = serde_json::from_str(text)?;
    if header.format != T::FORMAT {
        return Err(Error::Format(format!(
            "expected a {} checkpoint, found {}",
            T::FORMAT,
            header.format
        )));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
    }
    let body: Body<T> = serde_json::from_str(text)?;
    body.model.check()?;
    Ok(body.model)
}

pub fn save_checkpoint<T: Checkpoint>(model: &T, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_checkpoint_json(model)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Checkpoint>(path: impl AsRef<Path>) -> Result<T> {
    from_checkpoint_json(&std::fs::read_to_string(path)?)
}
