//! Link classifier over the tabularized graph, with local explanations and a
//! permutation audit of protected attributes.

pub mod audit;
pub mod forest;
pub mod lime;
pub mod report;
pub mod shap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{rng, Matrix, NumError};
use crate::sketch::{scale_and_encode, SketchError, NUMERIC};
use crate::table::Table;

pub use audit::{audit_protected, permutation_importance, protects, AuditEntry, AuditReport, DEFAULT_PROTECTED};
pub use forest::{train_forest, DecisionTree, ForestModel, ForestParams, TreeNode};
pub use lime::{lime_explain, LimeParams};
pub use report::{classification_report, report_from_confusion, report_from_predictions, ClassMetrics, ClassificationReport};
pub use shap::{shap_values, ShapMode, EXACT_FEATURE_LIMIT};

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("explanation failed: {0}")]
    Explanation(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Encode(#[from] SketchError),
}

pub type Result<T> = std::result::Result<T, FairnessError>;

/// Target 0 marks a person with at least one person relation.
pub const CLASS_LABELS: [&str; 2] = ["one or more person related", "no relation"];

/// Anything that maps a feature row to a class-1 score in [0, 1].
pub trait Model {
    fn output(&self, x: &[f64]) -> f64;

    fn classify(&self, x: &[f64]) -> usize {
        usize::from(self.output(x) > 0.5)
    }
}

impl<F: Fn(&[f64]) -> f64> Model for F {
    fn output(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationMethod {
    Lime,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub method: ExplanationMethod,
    pub row: usize,
    pub weights: Vec<f64>,
    /// Surrogate intercept for LIME, base value v(∅) for Shapley values.
    pub intercept: f64,
    pub model_output: f64,
    pub fidelity: Option<f64>,
    pub efficiency_residual: Option<f64>,
}

/// Encoded feature matrix with one name per column and the columns of each
/// source attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
    pub names: Vec<String>,
    pub groups: Vec<(String, Vec<usize>)>,
    pub row_ids: Vec<usize>,
    pub labels: Vec<usize>,
}

impl FeatureMatrix {
    pub fn from_table(table: &Table) -> Result<Self> {
        let e = scale_and_encode(table)?;
        let mut names = Vec::with_capacity(e.column_meta.len());
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (j, meta) in e.column_meta.iter().enumerate() {
            let f = &meta.members[0];
            names.push(if f.value == NUMERIC {
                f.attribute.clone()
            } else {
                format!("{}={}", f.attribute, f.value)
            });
            match groups.last_mut() {
                Some((a, cols)) if *a == f.attribute => cols.push(j),
                _ => groups.push((f.attribute.clone(), vec![j])),
            }
        }
        Ok(FeatureMatrix {
            matrix: e.matrix,
            names,
            groups,
            row_ids: e.row_ids,
            labels: table.target().iter().map(|&t| t as usize).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    pub forest: ForestParams,
    /// Rows explained with LIME and Shapley values, taken from the top.
    pub explain_rows: usize,
    pub lime_samples: usize,
    pub shap_background: usize,
    pub shap_permutations: usize,
    pub protected: Vec<String>,
    pub seed: u64,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        FairnessConfig {
            forest: ForestParams::default(),
            explain_rows: 3,
            lime_samples: 1000,
            shap_background: 20,
            shap_permutations: 200,
            protected: DEFAULT_PROTECTED.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub feature_names: Vec<String>,
    pub classification: ClassificationReport,
    pub lime: Vec<ExplanationReport>,
    pub shap: Vec<ExplanationReport>,
    pub audit: AuditReport,
}

/// Trains the forest on the whole table and reports in-sample metrics,
/// explanations for the first rows and the protected-attribute audit.
pub fn run_fairness(table: &Table, cfg: &FairnessConfig) -> Result<FairnessReport> {
    let fm = FeatureMatrix::from_table(table)?;
    if fm.matrix.cols() == 0 {
        return Err(FairnessError::InvalidArgument("feature table has no usable columns".into()));
    }
    let model = train_forest(&fm.matrix, &fm.labels, &cfg.forest, rng::substream(cfg.seed, "forest"))?;
    let classification = classification_report(&model, &fm.matrix, &fm.labels, &CLASS_LABELS)?;

    let n = fm.matrix.rows();
    let d = fm.matrix.cols();
    let lime_params = LimeParams {
        n_samples: cfg.lime_samples,
        kernel_width: None,
    };
    let bg_seed = rng::substream(cfg.seed, "background");
    let bg_rows: Vec<usize> = {
        let mut r = rng::seeded(bg_seed);
        let mut idx = rand::seq::index::sample(&mut r, n, cfg.shap_background.clamp(1, n)).into_vec();
        idx.sort_unstable();
        idx
    };
    let background = fm.matrix.select_rows(&bg_rows);
    let mode = if d <= EXACT_FEATURE_LIMIT {
        ShapMode::Exact
    } else {
        ShapMode::MonteCarlo {
            permutations: cfg.shap_permutations,
        }
    };
    let mut lime = Vec::new();
    let mut shap = Vec::new();
    for row in 0..cfg.explain_rows.min(n) {
        let x = fm.matrix.row(row);
        let seed = rng::substream(cfg.seed, &format!("lime{row}"));
        match lime_explain(&model, x, &lime_params, seed) {
            Ok(mut e) => {
                e.row = fm.row_ids[row];
                lime.push(e);
            }
            Err(FairnessError::Explanation(msg)) => log::warn!("lime skipped row {row}: {msg}"),
            Err(e) => return Err(e),
        }
        let seed = rng::substream(cfg.seed, &format!("shap{row}"));
        let mut e = shap_values(&model, x, &background, mode, seed)?;
        e.row = fm.row_ids[row];
        shap.push(e);
    }
    let audit = audit_protected(&model, &fm, &cfg.protected, rng::substream(cfg.seed, "audit"))?;
    Ok(FairnessReport {
        feature_names: fm.names,
        classification,
        lime,
        shap,
        audit,
    })
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

/// Long-format twin of the JSON report: `kind,name,metric,value`.
pub fn report_csv(r: &FairnessReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut line = |kind: &str, name: &str, metric: &str, value: String| {
        w.write_record([kind, name, metric, value.as_str()]).expect("writing to memory");
    };
    line("kind", "name", "metric", "value".into());
    let c = &r.classification;
    for m in &c.classes {
        line("class", &m.label, "precision", num(m.precision));
        line("class", &m.label, "recall", num(m.recall));
        line("class", &m.label, "f1", num(m.f1));
        line("class", &m.label, "support", m.support.to_string());
    }
    for (name, a) in [("macro avg", &c.macro_avg), ("weighted avg", &c.weighted_avg)] {
        line("average", name, "precision", num(a.precision));
        line("average", name, "recall", num(a.recall));
        line("average", name, "f1", num(a.f1));
    }
    line("average", "accuracy", "accuracy", num(c.accuracy));
    for e in r.lime.iter().chain(&r.shap) {
        let kind = match e.method {
            ExplanationMethod::Lime => "lime",
            ExplanationMethod::Shap => "shap",
        };
        let row = format!("row{}", e.row);
        for (f, w) in r.feature_names.iter().zip(&e.weights) {
            line(kind, f, &row, num(*w));
        }
        line(kind, "intercept", &row, num(e.intercept));
        if let Some(v) = e.fidelity {
            line(kind, "fidelity", &row, num(v));
        }
        if let Some(v) = e.efficiency_residual {
            line(kind, "efficiency_residual", &row, format!("{v:e}"));
        }
    }
    for a in &r.audit.entries {
        line("importance", &a.feature, "importance", num(a.importance));
        line("importance", &a.feature, "rank", a.rank.to_string());
        if a.protected {
            line("protected", &a.feature, "flagged", a.flagged.to_string());
        }
    }
    for p in &r.audit.absent_protected {
        line("protected", p, "present", "false".into());
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}
