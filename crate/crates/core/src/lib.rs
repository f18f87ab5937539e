//! Knowledge-graph question answering.
//!
//! The pipeline runs in five stages: tokenize the question, recognize entity
//! mentions (gazetteer plus an optional CRF tagger), match the abstracted
//! question against relation templates, run a one-hop lookup in the triple
//! store, and render a sentence. The [`metrics`] module scores the output.

pub mod engine;
pub mod graph;
pub mod matcher;
pub mod metrics;
pub mod ner;
pub mod text;
pub mod vectors;

pub use engine::{Answer, AnswerStatus, Engine, EngineConfig, ParseError, ParsedQuestion};
pub use graph::{Entity, GraphError, GraphStats, ImportReport, KnowledgeGraph, Triple};
pub use matcher::{Direction, MatchError, MatchResult, Template, TemplateMatcher};
pub use metrics::{ConfusionCounts, EvalRecord, MetricError, MetricReport};
pub use ner::{EntityMention, LabelSet, NerError, NerModel, TagSequence};
pub use text::{normalize, tokenize, Token};
pub use vectors::{EmbeddingTable, SparseVector, TfIdfModel, VectorError};
