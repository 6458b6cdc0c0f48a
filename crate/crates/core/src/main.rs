use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kbpop::annotate::RecordAnnotations;
use kbpop::config::RawConfig;
use kbpop::graph::{self, PropertyGraph};
use kbpop::ingest::{parse_records_lenient, validation_report};
use kbpop::inventory::default_relation_inventory;
use kbpop::pipeline::{self as pl, at, PipelineError};
use kbpop::table::Table;
use kbpop::{evalkbp, fairness, linkpred, sketch, synth};

type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Parser)]
#[command(name = "kbpop", about = "Knowledge base population over relation-extraction corpora", disable_version_flag = true)]
struct Cli {
    /// Key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set seed=7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Print version information as JSON.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Check records against the schema and relation inventory.
    Ingest {
        #[arg(required = true)]
        records: Vec<PathBuf>,
    },
    /// Tag entity mentions and relations.
    Annotate {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Use dataset labels only.
        #[arg(long)]
        no_rules: bool,
        #[arg(short, long, default_value = "annotations.json")]
        output: PathBuf,
    },
    /// Build the person graph from annotations.
    BuildGraph {
        annotations: PathBuf,
        #[arg(short, long, default_value = "graph.json")]
        output: PathBuf,
    },
    /// Benchmark link predictors and add predicted edges.
    Linkpred {
        graph: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Write the edge list, triples and feature table of a graph.
    Export {
        graph: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Score slot-filling queries against a graph.
    Evaluate {
        graph: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        protected_gold: Option<PathBuf>,
        #[arg(short, long, default_value = "kbp_metrics.json")]
        output: PathBuf,
    },
    /// Train the link classifier, explain it and audit protected attributes.
    Fairness {
        features: PathBuf,
        #[arg(short, long, default_value = "fairness_report.json")]
        output: PathBuf,
        /// Also write the long-format CSV report.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Pick representative rows and a 2-D projection.
    Sample {
        features: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Write a seeded synthetic corpus with queries and protected gold.
    Synth {
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run every stage from the configuration file.
    Run {
        /// Print the artifact manifest to stdout.
        #[arg(long)]
        manifest: bool,
    },
}

fn read(stage: &'static str, path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| at(stage)(format!("{}: {e}", path.display())))
}

fn write(stage: &'static str, path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(at(stage))?;
    }
    std::fs::write(path, text).map_err(|e| at(stage)(format!("{}: {e}", path.display())))
}

fn load_graph(stage: &'static str, path: &Path) -> Result<PropertyGraph> {
    PropertyGraph::from_json(&read(stage, path)?).map_err(at(stage))
}

fn load_table(stage: &'static str, path: &Path) -> Result<Table> {
    Table::from_csv(&read(stage, path)?).map_err(at(stage))
}

fn raw_config(cli: &Cli) -> Result<RawConfig> {
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p).map_err(at("config"))?,
        None => RawConfig::parse("", std::env::current_dir().unwrap_or_default()).map_err(at("config"))?,
    };
    for o in &cli.overrides {
        raw.apply_override(o).map_err(at("config"))?;
    }
    Ok(raw)
}

fn version_json() -> String {
    serde_json::json!({
        "tool": "kbpop",
        "version": pl::VERSION,
        "artifacts": pl::ARTIFACTS,
    })
    .to_string()
}

fn dispatch(cli: &Cli, command: &Command) -> Result<()> {
    let raw = raw_config(cli)?;
    match command {
        Command::Ingest { records } => {
            let inventory = default_relation_inventory();
            let mut total = 0;
            let mut bad = 0;
            for p in records {
                let recs = parse_records_lenient(&read("ingest", p)?).map_err(at("ingest"))?;
                let report = validation_report(&recs, &inventory);
                print!("{report}");
                total += recs.len();
                bad += report.lines().count();
            }
            eprintln!("{total} records, {bad} violations");
            if bad > 0 {
                return Err(at("ingest")(format!("{bad} schema violations")));
            }
        }
        Command::Annotate {
            records,
            rules,
            no_rules,
            output,
        } => {
            let ds = pl::ingest(records)?;
            let rules_dir = rules.clone().or_else(|| raw.rules_dir());
            let use_rules = !no_rules && raw.use_rules().map_err(at("config"))?;
            let rules = pl::rule_set(rules_dir.as_deref(), use_rules)?;
            let ann = pl::annotate(&ds, &rules);
            let json = serde_json::to_string_pretty(&ann).map_err(at("annotate"))?;
            write("annotate", output, &json)?;
        }
        Command::BuildGraph { annotations, output } => {
            let ann: Vec<RecordAnnotations> =
                serde_json::from_str(&read("graph", annotations)?).map_err(at("graph"))?;
            let g = graph::build_graph(&ann);
            log::info!("{} persons, {} edges", g.node_count(), g.edge_count());
            write("graph", output, &g.to_json())?;
        }
        Command::Linkpred { graph: path, out_dir } => {
            let g = load_graph("linkpred", path)?;
            let seed = raw.seed().map_err(at("config"))?;
            let cfg = raw.linkpred(seed).map_err(at("config"))?;
            let (metrics, augmented) = pl::link_prediction(&g, &cfg, seed)?;
            write("linkpred", &out_dir.join("linkpred.metrics.json"), &linkpred::metrics_json(&metrics))?;
            write("linkpred", &out_dir.join("graph.json"), &augmented.to_json())?;
            write("linkpred", &out_dir.join("edges.tsv"), &graph::edgelist_string(&augmented))?;
        }
        Command::Export { graph: path, out_dir } => {
            let g = load_graph("export", path)?;
            write("export", &out_dir.join("edges.tsv"), &graph::edgelist_string(&g))?;
            let (triples, rows) = graph::triples_string(&g);
            log::info!("{rows} triples");
            write("export", &out_dir.join("triples.txt"), &triples)?;
            write("export", &out_dir.join("features.csv"), &pl::features(&g).to_csv())?;
        }
        Command::Evaluate {
            graph: path,
            queries,
            protected_gold,
            output,
        } => {
            let g = load_graph("evaluate", path)?;
            let m = pl::evaluate(&g, queries, protected_gold.as_deref())?;
            write("evaluate", output, &evalkbp::metrics_json(&m))?;
        }
        Command::Fairness { features, output, csv } => {
            let t = load_table("fairness", features)?;
            let seed = raw.seed().map_err(at("config"))?;
            let cfg = raw.fairness(seed).map_err(at("config"))?;
            let report = pl::fairness_stage(&t, &cfg)?;
            let json = serde_json::to_string_pretty(&report).map_err(at("fairness"))?;
            write("fairness", output, &json)?;
            if let Some(p) = csv {
                write("fairness", p, &fairness::report_csv(&report))?;
            }
        }
        Command::Sample { features, out_dir } => {
            let t = load_table("sample", features)?;
            let seed = raw.seed().map_err(at("config"))?;
            let cfg = raw.sketch(seed).map_err(at("config"))?;
            let res = pl::sample_stage(&t, &cfg)?;
            write("sample", &out_dir.join("samples.csv"), &sketch::samples_csv(&res))?;
            write("sample", &out_dir.join("projection.csv"), &sketch::projection_csv(&res))?;
        }
        Command::Synth { out_dir } => {
            let seed = raw.seed().map_err(at("config"))?;
            let corpus = synth::generate_corpus(seed);
            for (name, text) in synth::corpus_files(&corpus) {
                write("synth", &out_dir.join(name), &text)?;
            }
        }
        Command::Run { manifest } => {
            let cfg = raw.pipeline().map_err(at("config"))?;
            let m = pl::run_pipeline(&cfg)?;
            if *manifest {
                println!("{}", m.to_json());
            } else {
                eprintln!("wrote {} artifacts to {}", m.artifacts.len(), cfg.output.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.version {
        println!("{}", version_json());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("error: no subcommand given; see --help");
        return ExitCode::from(2);
    };
    match dispatch(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
