//! Motion-derived caption enrichment and a context-attuned text-to-motion
//! diffusion model.
//!
//! The crate is organised around the pipeline:
//!
//! - [`layout`], [`motion`], [`codec`], [`io`]: the per-frame feature
//!   representation (263 or 269 floats for 22 joints), conversion to and from
//!   world-space joints, 90° yaw augmentation and the on-disk format.
//! - [`enhance`]: reads body direction, head orientation and hand placement
//!   off the skeleton and appends templated clauses to captions.
//! - [`text`]: sentence/word conditioning behind a pluggable embedder.
//! - [`nn`], [`denoiser`]: the denoising network with hand-written gradients.
//! - [`diffusion`]: noise schedule, training loop and guided sampler.
//! - [`metrics`]: FID, R-precision, MM-Dist, Diversity, MModality and the
//!   status-histogram similarities.
//! - [`synth`]: a procedural, labelled motion generator.
//! - [`cli`]: the `semboost` subcommands and their run manifests.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod codec;
pub mod denoiser;
pub mod desk;
pub mod diffusion;
pub mod enhance;
pub mod error;
pub mod geometry;
pub mod io;
pub mod layout;
pub mod metrics;
pub mod motion;
pub mod nn;
pub mod skeleton;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
