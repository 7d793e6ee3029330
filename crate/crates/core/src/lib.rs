//! Building blocks for multisensory conversation agents: corpus
//! construction from raw video, speaker assignment, paralinguistic voice
//! descriptions, multimodal fusion, the dialogue model and its evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod checkpoint;
pub mod dataset;
pub mod dialogue;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod nn;
pub mod paralinguistics;
pub mod segment;
pub mod serve;
pub mod speakers;
pub mod synth;

pub use candle_core::{DType, Device, Tensor};
pub use error::{Error, Result};
