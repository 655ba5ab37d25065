//! Change detection for circular SAR video.
//!
//! Frames pass through unsharp-mask enhancement, optional rigid registration,
//! sparse Lucas-Kanade flow on a point grid (Phase 1), equalized blob
//! analysis (Phase 2) and a square-containment fusion (Phase 3). A synthetic
//! generator with ground truth makes the detector measurable.
//!
//! ```
//! use sarcd::pipeline::{run_pipeline, PipelineConfig};
//! use sarcd::synth::value_noise_frame;
//! use sarcd::geometry::Point;
//!
//! let a = value_noise_frame(96, 96, 1, 160.0, 30.0, 12.0, Point::new(0.0, 0.0))?;
//! let b = value_noise_frame(96, 96, 1, 160.0, 30.0, 12.0, Point::new(1.0, 0.0))?;
//! let out = run_pipeline(&[a, b], &PipelineConfig::default())?;
//! assert_eq!(out.len(), 1);
//! # Ok::<(), sarcd::Error>(())
//! ```

pub mod blob;
pub mod error;
pub mod flow;
pub mod fusion;
pub mod geometry;
pub mod imgproc;
pub mod pipeline;
pub mod registration;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::Point;
pub use imgproc::Frame;
