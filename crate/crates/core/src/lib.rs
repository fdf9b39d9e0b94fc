//! Self-supervised pretraining and evaluation lab for paired two-view images.
//!
//! The crate covers the full loop: study-level data ingestion into
//! frontal-lateral pairs, a synthetic paired-view generator for desk-scale
//! runs, patch masking, a small ViT-style encoder/decoder with exact
//! reverse-mode gradients, the reconstruction / alignment / contrastive
//! training objectives, and a fine-tune / linear-probe / ensemble
//! evaluation harness reporting macro-AUROC.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod masking;

pub use error::{Error, Result};
