use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::inventory::coarse_type_of;
use crate::numcore::{rng, Matrix};

use super::{FairnessError, FeatureMatrix, Model, Result};

pub const DEFAULT_PROTECTED: [&str; 5] = ["gender", "age", "ethnicity", "location", "religion"];
pub const REPETITIONS: usize = 10;
/// Importances at or below this are treated as noise when flagging.
pub const FLAG_MIN_IMPORTANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub feature: String,
    pub importance: f64,
    /// 1 is the most important.
    pub rank: usize,
    pub protected: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub baseline_accuracy: f64,
    pub repetitions: usize,
    pub entries: Vec<AuditEntry>,
    /// Requested protected attributes with no column in the table.
    pub absent_protected: Vec<String>,
}

/// Whether attribute `column` falls under the protected name: an exact match,
/// or any place-valued attribute for "location".
pub fn protects(name: &str, column: &str) -> bool {
    name == column
        || (name == "location" && matches!(coarse_type_of(column), "CITY" | "COUNTRY" | "STATE_OR_PROVINCE"))
}

fn accuracy(model: &dyn Model, x: &Matrix, y: &[usize]) -> f64 {
    let hits = x.row_iter().zip(y).filter(|(r, &t)| model.classify(r) == t).count();
    hits as f64 / y.len() as f64
}

/// Mean accuracy drop when the columns of each group are shuffled jointly
/// across rows, over `repetitions` seeded shuffles.
pub fn permutation_importance(
    model: &dyn Model,
    x: &Matrix,
    y: &[usize],
    groups: &[(String, Vec<usize>)],
    repetitions: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if x.rows() == 0 || x.rows() != y.len() {
        return Err(FairnessError::InvalidArgument("feature rows and labels must be nonempty and aligned".into()));
    }
    if repetitions == 0 {
        return Err(FairnessError::InvalidArgument("at least one shuffle is needed".into()));
    }
    let base = accuracy(model, x, y);
    let n = x.rows();
    let mut out = Vec::with_capacity(groups.len());
    for (name, cols) in groups {
        let mut r = rng::seeded(rng::substream(seed, name));
        let mut perm: Vec<usize> = (0..n).collect();
        let mut shuffled = x.clone();
        let mut drop = 0.0;
        for _ in 0..repetitions {
            perm.shuffle(&mut r);
            for (i, &src) in perm.iter().enumerate() {
                for &c in cols {
                    shuffled[(i, c)] = x[(src, c)];
                }
            }
            drop += base - accuracy(model, &shuffled, y);
        }
        out.push(drop / repetitions as f64);
    }
    Ok((base, out))
}

/// Ranks every attribute by permutation importance and flags protected ones
/// that land in the top quartile with a non-negligible importance.
pub fn audit_protected(model: &dyn Model, fm: &FeatureMatrix, protected: &[String], seed: u64) -> Result<AuditReport> {
    let (base, imp) = permutation_importance(model, &fm.matrix, &fm.labels, &fm.groups, REPETITIONS, seed)?;
    let g = fm.groups.len();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]).then(a.cmp(&b)));
    let mut rank = vec![0; g];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    let quartile = g.div_ceil(4);
    let entries = fm
        .groups
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let is_protected = protected.iter().any(|p| protects(p, name));
            AuditEntry {
                feature: name.clone(),
                importance: imp[i],
                rank: rank[i],
                protected: is_protected,
                flagged: is_protected && rank[i] <= quartile && imp[i] > FLAG_MIN_IMPORTANCE,
            }
        })
        .collect();
    let absent_protected = protected
        .iter()
        .filter(|p| !fm.groups.iter().any(|(n, _)| protects(p, n)))
        .cloned()
        .collect();
    Ok(AuditReport {
        baseline_accuracy: base,
        repetitions: REPETITIONS,
        entries,
        absent_protected,
    })
}
