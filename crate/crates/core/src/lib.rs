//! Country peace classification from news word frequencies.
//!
//! The crate covers the whole pipeline: loading a country-labelled article
//! corpus, cleaning it into lemma streams, building per-country frequency
//! features over a union vocabulary, labelling countries from five external
//! peace indices, training logistic-regression and random-forest classifiers,
//! evaluating them, and turning the binary logistic model into a 0-100
//! machine-learning peace index.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod indices;
pub mod learners;
pub mod meta;
pub mod scoring;
pub mod seed;
pub mod synthetic;
pub mod text;

pub use corpus::{Article, CorpusManifest, CorpusStats};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, MetricsReport, RunAggregate, SignificanceResult};
pub use features::{FeatureMatrix, FreqTable, Normalization, Vocabulary};
pub use indices::{CountryClass, IndexDescriptor, IndexName, PeaceIndexTable, ScaledIndexTable};
pub use learners::{ImportanceVector, LrHyper, LrModel, RfHyper, RfModel};
pub use scoring::{PeaceScore, WordReportRow};
pub use text::{FilterConfig, Token};
