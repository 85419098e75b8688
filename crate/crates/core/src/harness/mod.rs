//! Masked number prediction at desk scale: a synthetic corpus, an
//! embedding-bag context encoder, one decoder head per representation and
//! the loop that trains and compares them.

pub mod corpus;
pub mod experiment;
pub mod model;
pub mod train;

pub use corpus::{gen_corpus, Corpus, CorpusSpec, MnpExample, Split, TemplateSpec, ValueModel};
pub use experiment::{run_experiment, run_on_corpus, ExperimentConfig, ExperimentReport, HeadResult};
pub use model::{ContextEncoder, EpochRecord, HeadKind, Model};
pub use train::{predict_all, train, TrainConfig};
