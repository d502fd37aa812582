//! Clothes-changing person re-identification toolkit.
//!
//! The crate implements the full retrieval pipeline downstream of a CNN
//! backbone: a mask-gated biometric pooling head with a clothes-feature
//! fusion layer, identification and batch-hard triplet losses with analytic
//! gradients, a deterministic momentum-SGD trainer, XQDA metric learning,
//! k-reciprocal re-ranking, mAP/CMC evaluation under a
//! query-image-plus-clothes-template protocol, and the dataset partition and
//! identity-association procedures — all exercised on synthetic desk-scale
//! data with exact oracles.
//!
//! Start with the runnable programs under `examples/`; each one demonstrates
//! a single capability end to end. The `reidkit` binary exposes the same
//! pipeline as subcommands (`generate`, `partition`, `train`, `embed`,
//! `xqda-fit`, `evaluate`, `associate`, `sweep-rerank`).

pub mod error;
pub mod gradcheck;
pub mod head;
pub mod rng;
pub mod sample;
pub mod tensor;

pub use error::{Error, Result};
pub use sample::{ClothesSource, LabeledEmbedding, Role, SampleRecord, Split};
pub use tensor::{avg_pool, l2_normalize, Embedding, FeatureMap};
