//! Class-incremental authorship attribution.
//!
//! Authors arrive in disjoint sessions; a shared trunk plus one linear head per
//! session is trained with one of several incremental strategies, and every
//! evaluation covers all authors seen so far.
//!
//! This crate is `no_std` (it needs `alloc`) and holds the numerical core:
//!
//! * [`corpus`] partitions an author corpus into sessions with train/val/test splits.
//! * [`features`] maps text to a hashed character n-gram vector.
//! * [`model`] is the trunk + expanding heads classifier with analytic gradients.
//! * [`strategies`] implements the session trainers (FT, FT+, FZ, FZ+, LWF, EWC, MAS, replay).
//! * [`eval`] computes accuracy matrices, performance drop and average accuracy.
//!
//! File formats, the CLI and synthetic corpora live in the `authcil` crate.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod rng;
pub mod strategies;

pub use corpus::{
    build_cil_data, cumulative_test, AuthorCorpus, AuthorSplit, CilData, DocumentRecord, Session,
    SessionSpec, Split,
};
pub use error::{Error, Result};
pub use eval::{
    average_accuracy, average_accuracy_incremental, evaluate, performance_drop, AccuracyMatrix,
    ConfusionMatrix, EvalItem, EvalReport, SessionEval,
};
pub use features::{featurize, featurize_batch, FeatureVector, Featurizer, FeaturizerConfig};
pub use model::{
    add_head, ce_loss_and_grads, forward, predict, sgd_step, snapshot, softmax, Gradients, HeadSet,
    ModelState, ParamSnapshot, TrainConfig, TrainMask,
};
pub use rng::SeededRng;
pub use strategies::{
    train_session, ExemplarStore, ImportanceMap, SessionData, StrategyConfig, StrategyKind,
    StrategyState,
};
