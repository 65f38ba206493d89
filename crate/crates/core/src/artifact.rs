//! Versioned model persistence.
//!
//! Artifacts are stored as pretty-printed JSON. Floats are written in
//! shortest-round-trip form, so a reloaded model reproduces its predictions
//! bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::PipelineState;
use crate::svr::SvrModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub target: String,
    pub created_at: String,
    pub seed: u64,
    pub search_summary: String,
}

/// A trained model together with the preprocessing state that feeds it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub pipeline: PipelineState,
    pub model: SvrModel,
    pub metadata: ArtifactMetadata,
}

impl ModelArtifact {
    pub fn new(pipeline: PipelineState, model: SvrModel, metadata: ArtifactMetadata) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            pipeline,
            model,
            metadata,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                supported: FORMAT_VERSION,
            });
        }
        if self.model.support_vectors.n_rows() != self.model.beta.len() {
            return Err(Error::Artifact {
                field: "model.beta".into(),
                message: format!(
                    "{} coefficients for {} support vectors",
                    self.model.beta.len(),
                    self.model.support_vectors.n_rows()
                ),
            });
        }
        if !self.model.beta.iter().all(|v| v.is_finite()) || !self.model.bias.is_finite() {
            return Err(Error::Artifact {
                field: "model".into(),
                message: "non-finite coefficients".into(),
            });
        }
        self.model.kernel.validate()?;
        self.model.hyper.validate()?;
        Ok(())
    }
}

pub fn save_model(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    artifact.validate()?;
    let json = serde_json::to_string_pretty(artifact).map_err(|e| Error::Artifact {
        field: "<root>".into(),
        message: e.to_string(),
    })?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelArtifact> {
    let text = std::fs::read_to_string(path)?;
    // Check the version tag first so version mismatches are reported as such
    // rather than as field errors deeper in the document.
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Artifact {
        field: "<root>".into(),
        message: e.to_string(),
    })?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::UnsupportedVersion {
                found: v as u32,
                supported: FORMAT_VERSION,
            });
        }
        None => {
            return Err(Error::Artifact {
                field: "format_version".into(),
                message: "missing or not an integer".into(),
            });
        }
    }
    let deserializer = &mut serde_json::Deserializer::from_str(&text);
    let artifact: ModelArtifact =
        serde_path_to_error::deserialize(deserializer).map_err(|e| Error::Artifact {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    artifact.validate()?;
    Ok(artifact)
}
