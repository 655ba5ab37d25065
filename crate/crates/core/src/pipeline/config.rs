//! Strict JSON configuration for the whole pipeline.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blob::BlobFilterConfig;
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::registration::RegistrationConfig;

/// Enhancement applied to both frames of a pair before Phase 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhancementConfig {
    /// Gaussian pre-smoothing against speckle; 0 disables it.
    pub denoise_sigma: f64,
    /// Unsharp-mask blur sigma.
    pub sigma: f64,
    /// Unsharp-mask high-contrast gain.
    pub contrast_gain: f64,
    /// Feed Otsu-binarized frames to the flow stage.
    pub binarize_for_flow: bool,
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        EnhancementConfig {
            denoise_sigma: 0.0,
            sigma: 2.0,
            contrast_gain: 1.0,
            binarize_for_flow: false,
        }
    }
}

impl EnhancementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.denoise_sigma.is_finite() && self.denoise_sigma >= 0.0) {
            return Err(Error::param("enhancement.denoise_sigma must be >= 0"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("enhancement.sigma must be positive"));
        }
        if !(self.contrast_gain.is_finite() && self.contrast_gain >= 1.0) {
            return Err(Error::param("enhancement.contrast_gain must be >= 1"));
        }
        Ok(())
    }
}

/// Conditioning of the frame handed to Phase 2, before equalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobInputConfig {
    /// Gaussian smoothing sigma; 0 disables it.
    pub smoothing_sigma: f64,
    /// Contrast gain about mid-gray; 1 leaves the frame unchanged.
    pub contrast_gain: f64,
}

impl Default for BlobInputConfig {
    fn default() -> Self {
        BlobInputConfig {
            smoothing_sigma: 2.5,
            contrast_gain: 12.0,
        }
    }
}

impl BlobInputConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing_sigma.is_finite() && self.smoothing_sigma >= 0.0) {
            return Err(Error::param("blob_input.smoothing_sigma must be >= 0"));
        }
        if !(self.contrast_gain.is_finite() && self.contrast_gain >= 1.0) {
            return Err(Error::param("blob_input.contrast_gain must be >= 1"));
        }
        Ok(())
    }
}

/// Phase 3 settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Snap confirmed tracked points onto their blob centroid.
    pub recenter_tracked: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { recenter_tracked: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub emit_annotated: bool,
}

/// Every tunable of the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub enhancement: EnhancementConfig,
    pub registration: RegistrationConfig,
    pub flow: FlowConfig,
    pub blob_input: BlobInputConfig,
    pub blob: BlobFilterConfig,
    pub fusion: FusionConfig,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let flow = FlowConfig::default();
        PipelineConfig {
            enhancement: EnhancementConfig::default(),
            registration: RegistrationConfig::default(),
            blob: BlobFilterConfig::for_grid_spacing(flow.spacing),
            flow,
            blob_input: BlobInputConfig::default(),
            fusion: FusionConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.enhancement.validate()?;
        self.registration.validate()?;
        self.flow.validate()?;
        self.blob_input.validate()?;
        self.blob.validate()
    }

    /// Parses and validates. Unknown keys are rejected at every level.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::input(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Input(msg) => Error::input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_json(&c.to_json_pretty()).unwrap(), c);
    }

    #[test]
    fn empty_object_is_default() {
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = PipelineConfig::from_json(r#"{"flow": {"k1": 0.9}}"#).unwrap();
        assert_eq!(c.flow.k1, 0.9);
        assert_eq!(c.flow.k3, FlowConfig::default().k3);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [r#"{"flwo": {}}"#, r#"{"flow": {"k4": 1}}"#, r#"{"blob": {"min_aera": 3}}"#] {
            let err = PipelineConfig::from_json(text).unwrap_err();
            assert!(err.is_input(), "{text}: {err}");
        }
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(PipelineConfig::from_json(r#"{"flow": {"n": 4}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"enhancement": {"contrast_gain": 0.5}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"blob": {"intensity_lo": 200, "intensity_hi": 100}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"registration": {"keep_fraction": 0}}"#).is_err());
    }

    #[test]
    fn threshold_names_are_addressable() {
        let v: serde_json::Value = serde_json::from_str(&PipelineConfig::default().to_json_pretty()).unwrap();
        for key in ["d", "n", "k1", "k2", "k3"] {
            assert!(v["flow"].get(key).is_some(), "{key}");
        }
    }
}
