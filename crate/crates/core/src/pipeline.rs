//! End-to-end run: ingest → annotate → graph → link prediction → evaluation
//! → fairness → representative sample, with a hashed artifact manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::annotate::{annotate_dataset, load_rules, RecordAnnotations, RuleSet};
use crate::config::{LinkFeatures, LinkpredConfig, PipelineConfig};
use crate::evalkbp::{self, KbpMetrics};
use crate::fairness::{self, FairnessConfig, FairnessReport};
use crate::graph::{self, PropertyGraph};
use crate::ingest::{parse_tacred_files, Dataset};
use crate::linkpred::{self, LinkGraph, ModelKind, ModelMetrics, NodeFeatures};
use crate::numcore::rng;
use crate::sketch::{self, SampleResult, SketchConfig};
use crate::table::Table;

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: BoxError,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Wraps an error with the name of the stage it came from.
pub fn at<E: Into<BoxError>>(stage: &'static str) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        source: e.into(),
    }
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Names of the files a full run writes, in stage order.
pub const ARTIFACTS: [&str; 8] = [
    "graph.json",
    "edges.tsv",
    "features.csv",
    "linkpred.metrics.json",
    "kbp_metrics.json",
    "fairness_report.json",
    "samples.csv",
    "projection.csv",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_artifact(dir: &Path, name: &str, content: &str) -> std::io::Result<ArtifactEntry> {
    std::fs::write(dir.join(name), content)?;
    Ok(ArtifactEntry {
        name: name.to_string(),
        sha256: sha256_hex(content.as_bytes()),
        bytes: content.len(),
    })
}

pub fn ingest(records: &[PathBuf]) -> Result<Dataset> {
    parse_tacred_files(records).map_err(at("ingest"))
}

/// The rule set for annotation: none, a directory, or the bundled pack.
pub fn rule_set(rules: Option<&Path>, use_rules: bool) -> Result<RuleSet> {
    if !use_rules {
        return Ok(RuleSet::empty());
    }
    match rules {
        None => Ok(RuleSet::default_pack()),
        Some(dir) if !dir.is_dir() => Err(at("annotate")(format!(
            "rules directory {} does not exist",
            dir.display()
        ))),
        Some(dir) => load_rules(dir).map_err(at("annotate")),
    }
}

pub fn annotate(ds: &Dataset, rules: &RuleSet) -> Vec<RecordAnnotations> {
    annotate_dataset(&ds.records, rules)
}

pub fn features(g: &PropertyGraph) -> Table {
    graph::to_feature_table(g, &graph::default_schema(g))
}

/// Benchmarks both models over seeded splits, then adds the edges predicted
/// by the chosen model.
pub fn link_prediction(g: &PropertyGraph, cfg: &LinkpredConfig, seed: u64) -> Result<(Vec<ModelMetrics>, PropertyGraph)> {
    let stage_seed = rng::substream(seed, "linkpred");
    let lg = LinkGraph::from_property_graph(g);
    let feats = match cfg.features {
        LinkFeatures::Attributes => NodeFeatures::from_attributes(g, cfg.top_features),
        LinkFeatures::Constant => NodeFeatures::constant(g.node_count()),
    };
    let seeds: Vec<u64> = (0..cfg.runs).map(|i| rng::substream(stage_seed, &format!("run{i}"))).collect();
    let metrics = linkpred::benchmark(
        &lg,
        &feats,
        &[ModelKind::Gcn, ModelKind::Pgnn],
        &seeds,
        cfg.test_fraction,
        &cfg.hyperparams,
    )
    .map_err(at("linkpred"))?;
    let split = linkpred::split_edges(&lg, cfg.test_fraction, rng::substream(stage_seed, "augment-split"))
        .map_err(at("linkpred"))?;
    let hp = linkpred::Hyperparams {
        seed: rng::substream(stage_seed, "augment"),
        ..cfg.hyperparams.clone()
    };
    let model = linkpred::train_link_model(cfg.augment_model, &lg, &split, &feats, &hp).map_err(at("linkpred"))?;
    let augmented = linkpred::augment_with_predictions(g, &model, cfg.threshold).map_err(at("linkpred"))?;
    Ok((metrics, augmented))
}

pub fn evaluate(g: &PropertyGraph, queries: &Path, protected_gold: Option<&Path>) -> Result<KbpMetrics> {
    let qs = evalkbp::load_queries(queries).map_err(at("evaluate"))?;
    let gold = protected_gold
        .map(evalkbp::load_protected_gold)
        .transpose()
        .map_err(at("evaluate"))?;
    evalkbp::evaluate(g, &qs, gold.as_ref()).map_err(at("evaluate"))
}

pub fn fairness_stage(table: &Table, cfg: &FairnessConfig) -> Result<FairnessReport> {
    let cfg = FairnessConfig {
        seed: rng::substream(cfg.seed, "fairness"),
        ..cfg.clone()
    };
    fairness::run_fairness(table, &cfg).map_err(at("fairness"))
}

pub fn sample_stage(table: &Table, cfg: &SketchConfig) -> Result<SampleResult> {
    let cfg = SketchConfig {
        seed: rng::substream(cfg.seed, "sample"),
        ..cfg.clone()
    };
    sketch::representative_sample(table, &cfg).map_err(at("sample"))
}

/// Checks that every referenced input exists, naming the stage that needs it.
pub fn validate_paths(cfg: &PipelineConfig) -> Result<()> {
    for r in &cfg.records {
        if !r.is_file() {
            return Err(at("ingest")(format!("records file {} does not exist", r.display())));
        }
    }
    if cfg.use_rules {
        if let Some(dir) = &cfg.rules {
            if !dir.is_dir() {
                return Err(at("annotate")(format!("rules directory {} does not exist", dir.display())));
            }
        }
    }
    for p in cfg.queries.iter().chain(&cfg.protected_gold) {
        if !p.is_file() {
            return Err(at("evaluate")(format!("{} does not exist", p.display())));
        }
    }
    Ok(())
}

/// Runs every stage and writes the artifacts plus `manifest.json` into the
/// output directory. `kbp_metrics.json` is skipped when no query file is set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    validate_paths(cfg)?;
    let out = &cfg.output;
    std::fs::create_dir_all(out).map_err(at("output"))?;
    let write = |name: &str, text: &str| write_artifact(out, name, text).map_err(at("output"));

    let ds = ingest(&cfg.records)?;
    log::info!("ingested {} records", ds.records.len());
    let rules = rule_set(cfg.rules.as_deref(), cfg.use_rules)?;
    let ann = annotate(&ds, &rules);
    let g = graph::build_graph(&ann);
    log::info!("graph has {} persons and {} edges", g.node_count(), g.edge_count());
    let (lp_metrics, augmented) = link_prediction(&g, &cfg.linkpred, cfg.seed)?;
    let table = features(&augmented);

    let mut artifacts = vec![
        write("graph.json", &augmented.to_json())?,
        write("edges.tsv", &graph::edgelist_string(&augmented))?,
        write("features.csv", &table.to_csv())?,
        write("linkpred.metrics.json", &linkpred::metrics_json(&lp_metrics))?,
    ];
    if let Some(q) = &cfg.queries {
        let m = evaluate(&augmented, q, cfg.protected_gold.as_deref())?;
        artifacts.push(write("kbp_metrics.json", &evalkbp::metrics_json(&m))?);
    }
    let report = fairness_stage(&table, &cfg.fairness)?;
    artifacts.push(write(
        "fairness_report.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?);
    let sample = sample_stage(&table, &cfg.sketch)?;
    artifacts.push(write("samples.csv", &sketch::samples_csv(&sample))?);
    artifacts.push(write("projection.csv", &sketch::projection_csv(&sample))?);

    let manifest = Manifest {
        tool: "kbpop".into(),
        version: VERSION.into(),
        seed: cfg.seed,
        artifacts,
    };
    std::fs::write(out.join("manifest.json"), manifest.to_json()).map_err(at("output"))?;
    Ok(manifest)
}
