//! Pipeline configuration: one TOML document with a section per stage.
//!
//! ```toml
//! [pipeline]
//! mode = "smoothed"        # or "threshold"
//! udp_port = 9537
//! queue_capacity = 256
//!
//! [smoothed]               # SmoothedParams
//! [threshold]              # ThresholdParams
//! [guard]                  # AccelGuardParams
//! [geometry]               # RigGeometry
//! [limits]                 # SafetyLimits
//! [ik]                     # IkParams
//!
//! [arms.left]
//! chain_file = "left_arm.toml"   # relative to this file
//! ```
//!
//! Every section is optional and falls back to the built-in defaults. An arm
//! may also be given inline as a [`ChainSpec`] (`base_translation`,
//! `base_rpy`, `[[arms.left.joints]]`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{ArmChain, ChainSpec, IkParams};
use crate::rig::{RigGeometry, SafetyLimits};
use crate::synthesis::{AccelGuardParams, SmoothedParams, SynthMode, ThresholdParams};
use crate::telemetry::DEFAULT_UDP_PORT;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub mode: SynthMode,
    pub udp_port: u16,
    /// Bound of the live ingestion queue; the oldest sample is dropped on overflow.
    pub queue_capacity: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            mode: SynthMode::Smoothed,
            udp_port: DEFAULT_UDP_PORT,
            queue_capacity: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFileRef {
    pub chain_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArmSource {
    File(ChainFileRef),
    Inline(ChainSpec),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmsSection {
    pub left: Option<ArmSource>,
    pub right: Option<ArmSource>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: PipelineSection,
    pub smoothed: SmoothedParams,
    pub threshold: ThresholdParams,
    pub guard: AccelGuardParams,
    pub geometry: RigGeometry,
    pub limits: SafetyLimits,
    pub ik: IkParams,
    pub arms: ArmsSection,
}

impl PipelineConfig {
    /// Reads, resolves chain files against the config's directory, and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.resolve_chain_files(path.parent().unwrap_or(Path::new(".")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a config from text; relative chain files resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            source,
        })?;
        cfg.resolve_chain_files(base_dir)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_chain_files(&mut self, base_dir: &Path) -> Result<(), ConfigError> {
        for arm in [&mut self.arms.left, &mut self.arms.right]
            .into_iter()
            .flatten()
        {
            if let ArmSource::File(r) = arm {
                let path = base_dir.join(&r.chain_file);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path: path.clone(),
                    source,
                })?;
                let spec: ChainSpec =
                    toml::from_str(&text).map_err(|source| ConfigError::Parse { path, source })?;
                *arm = ArmSource::Inline(spec);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.smoothed.validate().map_err(invalid)?;
        self.threshold.validate().map_err(invalid)?;
        self.guard.validate().map_err(invalid)?;
        self.geometry.validate().map_err(invalid)?;
        self.limits.validate().map_err(invalid)?;
        self.ik.validate().map_err(invalid)?;
        if self.pipeline.queue_capacity == 0 {
            return Err(invalid("pipeline.queue_capacity must be positive"));
        }
        self.chains()?;
        Ok(())
    }

    /// Builds the (left, right) arm chains, defaulting any arm not configured.
    pub fn chains(&self) -> Result<(ArmChain, ArmChain), ConfigError> {
        let build = |src: &Option<ArmSource>, fallback: fn() -> ArmChain| match src {
            None => Ok(fallback()),
            Some(ArmSource::Inline(spec)) => ArmChain::from_spec(spec).map_err(invalid),
            Some(ArmSource::File(r)) => Err(invalid(format!(
                "chain file {} was not resolved",
                r.chain_file.display()
            ))),
        };
        Ok((
            build(&self.arms.left, ArmChain::default_left)?,
            build(&self.arms.right, ArmChain::default_right)?,
        ))
    }
}
