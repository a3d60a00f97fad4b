//! Stage orchestration: one config file drives build, generate, retrieve,
//! evaluate, and report over a shared output directory.
//!
//! Every artifact under the output directory is written deterministically;
//! running a stage twice on the same inputs produces byte-identical files.
//!
//! Per collection the layout is:
//!
//! ```text
//! <outdir>/<collection>/
//!   sets.jsonl               the ambiguity sets
//!   build_counters.json      filter-cascade counters
//!   qa.jsonl sf.jsonl fc.jsonl   task queries
//!   generate_counters.json   query counters
//!   runs/tfidf.jsonl         built-in retriever rankings
//!   report.json              metrics for the last evaluated run
//!   gap_bins.csv             wide gap table for plotting
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentIndex;
use crate::error::{io_err, Error, Result};
use crate::kg::{build_alias_index, load_entities, KgReader};
use crate::metrics::{
    evaluate, read_report, write_report, EvalOptions, MetricsReport, DEFAULT_K,
};
use crate::popularity::PopularityTable;
use crate::queries::{
    generate_queries, read_queries, write_queries, GenCounters, GeneratedQueries,
    GlobalValueStats, TaskQuery, TemplateBank,
};
use crate::report::{
    render_csv, render_gap_csv, render_json_lines, render_table, ReportFormat, CSV_HEADER,
};
use crate::retrieval::{batch_retrieve, RetrieverRun, SparseIndex};
use crate::sets::{
    build_collection, load_collections, read_sets, write_sets, AmberSet, BuildCounters,
    BuildInputs, CollectionSpec,
};

/// Environment variable overriding the configured output directory.
pub const OUTDIR_ENV: &str = "AMBER_OUTDIR";

/// Resolved pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Knowledge-graph dump, JSONL.
    pub kg: PathBuf,
    /// Document corpus, JSONL.
    pub corpus: PathBuf,
    /// Page-view table, TSV.
    pub pageviews: PathBuf,
    /// Template bank, TOML.
    pub templates: PathBuf,
    /// Collection specs, TOML.
    pub collections_file: PathBuf,
    /// Root of all written artifacts.
    pub outdir: PathBuf,
    /// Subset of collections to process; `None` means all.
    pub collections: Option<Vec<String>>,
    /// Ranking cutoff for retrieval and accuracy tables.
    pub k: usize,
    /// Fail evaluation when a query has no ranking.
    pub strict: bool,
}

#[derive(Deserialize)]
struct PathsWire {
    kg: PathBuf,
    corpus: PathBuf,
    pageviews: PathBuf,
    templates: PathBuf,
    collections: PathBuf,
    outdir: PathBuf,
}

#[derive(Deserialize, Default)]
struct OptionsWire {
    collections: Option<Vec<String>>,
    k: Option<usize>,
    strict: Option<bool>,
}

#[derive(Deserialize)]
struct ConfigWire {
    paths: PathsWire,
    #[serde(default)]
    options: OptionsWire,
}

impl PipelineConfig {
    /// Load a TOML config. Relative paths resolve against the config
    /// file's directory; [`OUTDIR_ENV`] overrides the output directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let wire: ConfigWire = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let outdir = match env::var_os(OUTDIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => resolve(&wire.paths.outdir),
        };
        let config = PipelineConfig {
            kg: resolve(&wire.paths.kg),
            corpus: resolve(&wire.paths.corpus),
            pageviews: resolve(&wire.paths.pageviews),
            templates: resolve(&wire.paths.templates),
            collections_file: resolve(&wire.paths.collections),
            outdir,
            collections: wire.options.collections,
            k: wire.options.k.unwrap_or(DEFAULT_K),
            strict: wire.options.strict.unwrap_or(false),
        };
        for (label, p) in [
            ("kg", &config.kg),
            ("corpus", &config.corpus),
            ("pageviews", &config.pageviews),
            ("templates", &config.templates),
            ("collections", &config.collections_file),
        ] {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "{label} path does not exist: {}",
                    p.display()
                )));
            }
        }
        if config.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(config)
    }

    /// The collection specs this run covers, honoring the subset filter.
    pub fn selected_specs(&self) -> Result<Vec<CollectionSpec>> {
        let specs = load_collections(&self.collections_file)?;
        match &self.collections {
            None => Ok(specs),
            Some(filter) => filter
                .iter()
                .map(|name| {
                    specs
                        .iter()
                        .find(|s| s.name == *name)
                        .cloned()
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "collections file does not define {name:?}"
                            ))
                        })
                })
                .collect(),
        }
    }

    /// Artifact directory for one collection.
    pub fn collection_dir(&self, name: &str) -> PathBuf {
        self.outdir.join(name)
    }
}

/// Serialize a value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, json + "\n").map_err(|e| io_err(path, e))
}

/// Read a JSON file into a typed value.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(1, format!("bad JSON: {e}")).with_path(path))
}

/// Per-collection build counters.
#[derive(Debug, Default)]
pub struct BuildSummary {
    /// Counters keyed by collection.
    pub collections: BTreeMap<String, BuildCounters>,
}

/// Per-collection generation counters.
#[derive(Debug, Default)]
pub struct GenerateSummary {
    /// Counters keyed by collection.
    pub collections: BTreeMap<String, GenCounters>,
}

/// Queries ranked per collection.
#[derive(Debug, Default)]
pub struct RetrieveSummary {
    /// Ranked query counts keyed by collection.
    pub collections: BTreeMap<String, usize>,
}

/// Reports produced per collection.
#[derive(Debug, Default)]
pub struct EvaluateSummary {
    /// Reports keyed by collection.
    pub collections: BTreeMap<String, MetricsReport>,
}

/// Build ambiguity sets for every selected collection.
pub fn run_build(config: &PipelineConfig) -> Result<BuildSummary> {
    let specs = config.selected_specs()?;
    let (entities, stats) = load_entities(&config.kg)?;
    log::info!(
        "loaded {} entities, dropped {} duplicate tuples",
        stats.entities,
        stats.duplicate_tuples
    );
    let aliases = build_alias_index(entities.values());
    let popularity = PopularityTable::load(&config.pageviews)?;
    let corpus = DocumentIndex::load(&config.corpus)?;
    let inputs = BuildInputs {
        entities: &entities,
        aliases: &aliases,
        popularity: &popularity,
        corpus: &corpus,
    };
    let mut summary = BuildSummary::default();
    for spec in &specs {
        let (sets, counters) = build_collection(&inputs, spec)?;
        let dir = config.collection_dir(&spec.name);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        write_sets(&dir.join("sets.jsonl"), &sets)?;
        write_json(&dir.join("build_counters.json"), &counters)?;
        log::info!(
            "collection {}: {} sets from {} candidate groups",
            spec.name,
            counters.sets,
            counters.candidate_groups
        );
        summary.collections.insert(spec.name.clone(), counters);
    }
    Ok(summary)
}

/// Generate task queries for every selected collection.
pub fn run_generate(config: &PipelineConfig) -> Result<GenerateSummary> {
    let specs = config.selected_specs()?;
    let bank = TemplateBank::load(&config.templates)?;
    let mut union_pids = BTreeSet::new();
    for spec in &specs {
        let pids = spec.all_pids();
        bank.validate_against(&pids)?;
        union_pids.extend(pids);
    }

    let mut stats = GlobalValueStats::default();
    let mut reader = KgReader::open(&config.kg)?;
    for record in &mut reader {
        let record = record?;
        for tuple in &record.tuples {
            if union_pids.contains(&tuple.pid) {
                stats.observe(&tuple.pid, &tuple.value_text);
            }
        }
    }

    let mut summary = GenerateSummary::default();
    for spec in &specs {
        let dir = config.collection_dir(&spec.name);
        let sets = read_sets(&dir.join("sets.jsonl"))?;
        let (queries, counters) = generate_queries(&sets, &bank, &stats)?;
        write_queries(&dir.join("qa.jsonl"), &queries.qa)?;
        write_queries(&dir.join("sf.jsonl"), &queries.sf)?;
        write_queries(&dir.join("fc.jsonl"), &queries.fc)?;
        write_json(&dir.join("generate_counters.json"), &counters)?;
        log::info!(
            "collection {}: {} queries from {} facts",
            spec.name,
            counters.qa_queries + counters.sf_queries + counters.fc_queries,
            counters.tuples
        );
        summary.collections.insert(spec.name.clone(), counters);
    }
    Ok(summary)
}

fn read_collection_queries(dir: &Path) -> Result<GeneratedQueries> {
    Ok(GeneratedQueries {
        qa: read_queries(&dir.join("qa.jsonl"))?,
        sf: read_queries(&dir.join("sf.jsonl"))?,
        fc: read_queries(&dir.join("fc.jsonl"))?,
    })
}

/// Rank the corpus for every generated query with the built-in retriever.
pub fn run_retrieve(config: &PipelineConfig) -> Result<RetrieveSummary> {
    let specs = config.selected_specs()?;
    let corpus = DocumentIndex::load(&config.corpus)?;
    let index = SparseIndex::build(&corpus)?;
    let mut summary = RetrieveSummary::default();
    for spec in &specs {
        let dir = config.collection_dir(&spec.name);
        let queries = read_collection_queries(&dir)?;
        let all: Vec<TaskQuery> = queries.all().cloned().collect();
        let run = batch_retrieve(&index, &all, config.k, "tfidf");
        let runs_dir = dir.join("runs");
        fs::create_dir_all(&runs_dir).map_err(|e| io_err(&runs_dir, e))?;
        run.write(&runs_dir.join("tfidf.jsonl"))?;
        log::info!("collection {}: ranked {} queries", spec.name, all.len());
        summary.collections.insert(spec.name.clone(), all.len());
    }
    Ok(summary)
}

/// Score a run for every selected collection and write its report.
///
/// With no `run_path` the built-in rankings are scored. An external run
/// file may cover several collections at once; each collection is scored
/// against its own slice of the file.
pub fn run_evaluate(
    config: &PipelineConfig,
    run_path: Option<&Path>,
) -> Result<EvaluateSummary> {
    let specs = config.selected_specs()?;
    struct Loaded {
        name: String,
        sets: Vec<AmberSet>,
        queries: GeneratedQueries,
        ids: BTreeSet<String>,
    }
    let mut loaded = Vec::new();
    let mut all_ids = BTreeSet::new();
    for spec in &specs {
        let dir = config.collection_dir(&spec.name);
        let sets = read_sets(&dir.join("sets.jsonl"))?;
        let queries = read_collection_queries(&dir)?;
        let ids: BTreeSet<String> = queries.all().map(|q| q.query_id.clone()).collect();
        all_ids.extend(ids.iter().cloned());
        loaded.push(Loaded {
            name: spec.name.clone(),
            sets,
            queries,
            ids,
        });
    }

    let external = match run_path {
        Some(path) => {
            let run_id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("external")
                .to_string();
            Some(RetrieverRun::load(path, &run_id, &all_ids)?)
        }
        None => None,
    };

    let options = EvalOptions {
        k: config.k,
        strict: config.strict,
    };
    let mut summary = EvaluateSummary::default();
    for Loaded {
        name,
        sets,
        queries,
        ids,
    } in &loaded
    {
        let run = match &external {
            Some(run) => RetrieverRun {
                run_id: run.run_id.clone(),
                rankings: run
                    .rankings
                    .iter()
                    .filter(|(id, _)| ids.contains(*id))
                    .map(|(id, docs)| (id.clone(), docs.clone()))
                    .collect(),
            },
            None => {
                let path = config.collection_dir(name).join("runs").join("tfidf.jsonl");
                RetrieverRun::load(&path, "tfidf", ids)?
            }
        };
        let report = evaluate(sets, queries, &run, &options)?;
        let dir = config.collection_dir(name);
        write_report(&dir.join("report.json"), &report)?;
        let gap_csv_path = dir.join("gap_bins.csv");
        fs::write(&gap_csv_path, render_gap_csv(&report))
            .map_err(|e| io_err(&gap_csv_path, e))?;
        summary.collections.insert(name.clone(), report);
    }
    Ok(summary)
}

/// Render the stored report of every selected collection into one
/// document. CSV rows and JSON records gain a leading `collection` field.
pub fn run_report(config: &PipelineConfig, format: ReportFormat) -> Result<String> {
    let specs = config.selected_specs()?;
    let mut reports = Vec::new();
    for spec in &specs {
        let path = config.collection_dir(&spec.name).join("report.json");
        reports.push((spec.name.clone(), read_report(&path)?));
    }
    Ok(match format {
        ReportFormat::Table => {
            let mut out = String::new();
            for (name, report) in &reports {
                out.push_str(&format!("collection {name}\n"));
                out.push_str(&render_table(report));
                out.push('\n');
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = format!("collection,{CSV_HEADER}\n");
            for (name, report) in &reports {
                for line in render_csv(report).lines().skip(1) {
                    out.push_str(name);
                    out.push(',');
                    out.push_str(line);
                    out.push('\n');
                }
            }
            out
        }
        ReportFormat::JsonLines => {
            let mut out = String::new();
            for (name, report) in &reports {
                for line in render_json_lines(report).lines() {
                    let mut value: serde_json::Value =
                        serde_json::from_str(line).expect("rendered record parses");
                    value
                        .as_object_mut()
                        .expect("rendered records are objects")
                        .insert("collection".into(), serde_json::Value::String(name.clone()));
                    out.push_str(&value.to_string());
                    out.push('\n');
                }
            }
            out
        }
    })
}

/// Run build, generate, retrieve, and evaluate in order.
pub fn run_all(config: &PipelineConfig) -> Result<EvaluateSummary> {
    run_build(config)?;
    run_generate(config)?;
    run_retrieve(config)?;
    run_evaluate(config, None)
}
