//! Deterministic synthesis of self-blended images (SBIs): forgery-like
//! training fakes blended from two perturbed copies of one pristine face.
//!
//! The engine splits a base image into a source and a target, perturbs one of
//! them (colour and frequency), misaligns the source with a resize and
//! translation, builds a soft blending mask from facial landmarks and blends.
//! Every random choice comes from a counter-based [`rng::RngStream`] and is
//! logged in a [`recipe::RecipeRecord`], so any sample can be regenerated
//! bit-for-bit.

pub mod blend;
pub mod config;
pub mod error;
pub mod ingest;
pub mod mg;
pub mod pipeline;
pub mod raster;
pub mod recipe;
pub mod rng;
pub mod scoring;
pub mod stg;
pub mod synthetic;
pub mod tensor;

pub use blend::blend;
pub use config::PipelineConfig;
pub use error::{Result, SbiError};
pub use pipeline::{generate_batch, generate_sbi, replay, SbiSample};
pub use recipe::RecipeRecord;
pub use rng::RngStream;
pub use tensor::{BlendMask, ImageTensor, Landmarks, Point};
