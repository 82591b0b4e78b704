//! Recognizing activities of daily living from phone motion sensors.
//!
//! The pipeline runs in stages: raw tri-axial captures ([`sensor_model`])
//! are collapsed to magnitude series and low-pass filtered
//! ([`preprocessing`]), summarized into fixed feature blocks per sensor
//! ([`features`]), optionally rescaled ([`normalization`]), and classified
//! by small from-scratch networks ([`neuralnet`]). [`experiments`] wires
//! the stages into seeded train/evaluate runs and comparison grids, and
//! [`synthgen`] produces labeled synthetic captures to drive all of it.
//!
//! Everything downstream of a seed is deterministic: rerunning a grid with
//! the same inputs reproduces every weight and every CSV byte.
//!
//! ```
//! use adl_fusion::experiments::{run_experiment, ExperimentSpec, NormalizationMode, SplitSpec};
//! use adl_fusion::features::{DatasetVariant, FusionConfig};
//! use adl_fusion::neuralnet::NetworkPreset;
//! use adl_fusion::preprocessing::FilterConfig;
//! use adl_fusion::synthgen::{generate_captures, SynthConfig};
//!
//! let mut synth = SynthConfig::new(6, 42);
//! synth.samples_per_window = 100;
//! let captures = generate_captures(&synth)?;
//!
//! let spec = ExperimentSpec {
//!     fusion: FusionConfig::AccMagGyro,
//!     variant: DatasetVariant::D1,
//!     normalization: NormalizationMode::ZScore,
//!     preset: NetworkPreset::MlpBackprop,
//!     budget: 2_000,
//!     seed: 7,
//!     split: SplitSpec::holdout(0.8, 7),
//! };
//! let result = run_experiment(&spec, &captures, FilterConfig::default())?;
//! assert!(result.accuracy >= 0.0 && result.accuracy <= 1.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod experiments;
pub mod features;
pub mod neuralnet;
pub mod normalization;
pub mod preprocessing;
pub mod sensor_model;
pub mod synthgen;

mod book;

pub use experiments::{ExperimentSpec, GridOutcome, NormalizationMode, SplitSpec};
pub use features::{DatasetVariant, FeatureDataset, FusionConfig};
pub use neuralnet::{Network, NetworkConfig, NetworkPreset};
pub use normalization::{NormalizerKind, NormalizerStats};
pub use preprocessing::FilterConfig;
pub use sensor_model::{AdlLabel, Capture, SensorKind, SensorWindow};
