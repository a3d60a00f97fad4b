//! Build entity-ambiguity benchmark collections from a knowledge graph
//! and a document corpus, and score retrievers on how well they tell
//! same-named entities apart.
//!
//! Many entity names are ambiguous: "Abe Lincoln" is a president and a
//! jazz trombonist. Retrieval systems lean on name popularity, so queries
//! about the less famous bearers of a name quietly degrade. This crate
//! turns that failure mode into a measurable benchmark:
//!
//! 1. [`kg`] ingests entities and indexes every name they are known by
//! 2. [`sets`] groups same-named entities into ambiguity sets, keeps only
//!    groups with a clear popularity head, and drops facts that cannot be
//!    verified early in some corpus document about their entity
//! 3. [`queries`] turns each surviving fact into a question-answering
//!    query, a slot-filling query, and a supports/refutes claim pair, all
//!    phrased with the shared name
//! 4. [`retrieval`] ranks the corpus per query with a tf-idf scorer, or
//!    loads rankings produced by any external retriever
//! 5. [`metrics`] scores rankings with head/tail accuracy splits,
//!    all-correct rates, entity confusion, and popularity-gap tables
//! 6. [`pipeline`] chains the stages behind one TOML config, and
//!    [`report`] renders the results
//!
//! The `examples/` directory demonstrates each stage on a small bundled
//! fixture; `cargo run --example end_to_end` walks the whole pipeline.
//! The same stages are scriptable through the thin `amber` binary.
//!
//! ```
//! use amber_sets::kg::{build_alias_index, parse_entity_record};
//!
//! let president = parse_entity_record(
//!     r#"{"qid": "Q91", "name": "Abraham Lincoln",
//!         "aliases": ["Abe Lincoln"], "types": ["human"], "tuples": []}"#,
//!     1,
//! )?;
//! let trombonist = parse_entity_record(
//!     r#"{"qid": "Q4666410", "name": "Abe Lincoln",
//!         "aliases": [], "types": ["human"], "tuples": []}"#,
//!     2,
//! )?;
//! let index = build_alias_index([&president, &trombonist]);
//! let shared: Vec<_> = index.polysemous().map(|(name, _)| name.as_str()).collect();
//! assert_eq!(shared, ["Abe Lincoln"]);
//! # Ok::<(), amber_sets::Error>(())
//! ```

#![warn(missing_docs)]

pub mod corpus;
pub mod error;
pub mod hash;
pub mod kg;
pub mod metrics;
pub mod pipeline;
pub mod popularity;
pub mod queries;
pub mod report;
pub mod retrieval;
pub mod sets;

pub use corpus::{DocumentIndex, DocumentRecord, PREFIX_TOKEN_LIMIT};
pub use error::{Error, Result};
pub use kg::{AliasIndex, EntityRecord, FactTuple};
pub use metrics::{evaluate, EvalOptions, MetricsReport, DEFAULT_K};
pub use pipeline::{
    run_all, run_build, run_evaluate, run_generate, run_report, run_retrieve, PipelineConfig,
};
pub use popularity::{popularity_gap, PopularityTable, MIN_POPULARITY_GAP};
pub use queries::{generate_queries, GeneratedQueries, Task, TaskQuery, TemplateBank};
pub use report::{render, ReportFormat};
pub use retrieval::{RetrieverRun, SparseIndex};
pub use sets::{build_collection, AmberSet, BuildInputs, CollectionSpec};
