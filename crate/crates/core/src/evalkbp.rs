//! Slot-filling evaluation against a populated graph: person→person (hop-0)
//! and person→attribute (hop-1) queries with micro-averaged metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, PropertyGraph};
use crate::inventory::{attribute_kind, relation_attribute, AttributeKind, PERSON_PERSON_RELATIONS};
use crate::numcore::rng;
use crate::text::{normalize, normalize_person};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// The hop-0 query a hop-1 query was derived from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Via {
    pub subject: String,
    pub slot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotQuery {
    pub hop: u8,
    /// A person name, or `person:<node id>`.
    pub subject: String,
    /// A relation for hop-0; an attribute key or `per:` relation for hop-1.
    pub slot: String,
    pub gold: BTreeSet<String>,
    pub via: Option<Via>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HopMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl HopMetrics {
    /// Precision is 1 when nothing was retrieved.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        HopMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            tp,
            fp,
            fn_,
        }
    }

    fn add(&mut self, tp: usize, fp: usize, fn_: usize) {
        *self = HopMetrics::from_counts(self.tp + tp, self.fp + fp, self.fn_ + fn_);
    }
}

/// Pools the counts of both hops and recomputes the rates.
pub fn hop_all(m0: &HopMetrics, m1: &HopMetrics) -> HopMetrics {
    HopMetrics::from_counts(m0.tp + m1.tp, m0.fp + m1.fp, m0.fn_ + m1.fn_)
}

fn resolve_subject(g: &PropertyGraph, subject: &str) -> Option<NodeId> {
    if let Some(id) = subject.strip_prefix("person:").and_then(|s| s.parse::<usize>().ok()) {
        return g.node(id).map(|n| n.node_id);
    }
    g.lookup(subject)
}

fn hop0_answers(g: &PropertyGraph, node: NodeId, slot: &str) -> BTreeSet<String> {
    g.related(node, slot)
        .into_iter()
        .filter_map(|n| g.node(n))
        .map(|n| normalize_person(&n.canonical_name))
        .collect()
}

fn attribute_key(slot: &str) -> &str {
    relation_attribute(slot).unwrap_or(slot)
}

/// Normalized fillers the graph returns for one query.
pub fn retrieve(g: &PropertyGraph, q: &SlotQuery) -> BTreeSet<String> {
    if let Some(via) = &q.via {
        let reached = resolve_subject(g, &via.subject)
            .map(|p| hop0_answers(g, p, &via.slot))
            .unwrap_or_default();
        if !reached.contains(&normalize_person(&q.subject)) {
            return BTreeSet::new();
        }
    }
    let Some(node) = resolve_subject(g, &q.subject) else {
        return BTreeSet::new();
    };
    if q.hop == 0 {
        hop0_answers(g, node, &q.slot)
    } else {
        g.node(node)
            .and_then(|n| n.attributes.get(attribute_key(&q.slot)))
            .map(|vals| vals.iter().map(|v| normalize(v)).collect())
            .unwrap_or_default()
    }
}

fn normalized_gold(q: &SlotQuery) -> BTreeSet<String> {
    q.gold
        .iter()
        .map(|v| if q.hop == 0 { normalize_person(v) } else { normalize(v) })
        .collect()
}

/// Counts for one query: `(tp, fp, fn)`.
pub fn score_query(g: &PropertyGraph, q: &SlotQuery) -> (usize, usize, usize) {
    let gold = normalized_gold(q);
    let got = retrieve(g, q);
    let tp = got.intersection(&gold).count();
    (tp, got.len() - tp, gold.len() - tp)
}

/// Micro-averaged metrics over queries of a single hop level.
pub fn evaluate_hop(g: &PropertyGraph, queries: &[SlotQuery]) -> Result<HopMetrics> {
    if let Some(first) = queries.first() {
        if queries.iter().any(|q| q.hop != first.hop) {
            return Err(EvalError::InvalidArgument("queries mix hop levels".into()));
        }
    }
    let mut m = HopMetrics::from_counts(0, 0, 0);
    for q in queries {
        let (tp, fp, fn_) = score_query(g, q);
        m.add(tp, fp, fn_);
    }
    Ok(m)
}

/// Gold protected values: person → attribute → values.
pub type ProtectedGold = BTreeMap<String, BTreeMap<String, BTreeSet<String>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedMetrics {
    pub per_attribute: BTreeMap<String, HopMetrics>,
    pub aggregate: HopMetrics,
}

/// Per-attribute and pooled recall of the gold protected values.
pub fn protected_recall(g: &PropertyGraph, gold: &ProtectedGold) -> Result<ProtectedMetrics> {
    if gold.is_empty() {
        return Err(EvalError::InvalidArgument("protected gold is empty".into()));
    }
    let mut per_attribute: BTreeMap<String, HopMetrics> = BTreeMap::new();
    for (person, attrs) in gold {
        let node = resolve_subject(g, person).and_then(|id| g.node(id));
        for (attr, values) in attrs {
            let want: BTreeSet<String> = values.iter().map(|v| normalize(v)).collect();
            let got: BTreeSet<String> = node
                .and_then(|n| n.attributes.get(attr))
                .map(|vals| vals.iter().map(|v| normalize(v)).collect())
                .unwrap_or_default();
            let tp = got.intersection(&want).count();
            per_attribute
                .entry(attr.clone())
                .or_insert_with(|| HopMetrics::from_counts(0, 0, 0))
                .add(tp, got.len() - tp, want.len() - tp);
        }
    }
    let mut aggregate = HopMetrics::from_counts(0, 0, 0);
    for m in per_attribute.values() {
        aggregate.add(m.tp, m.fp, m.fn_);
    }
    Ok(ProtectedMetrics { per_attribute, aggregate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbpMetrics {
    pub hop0: HopMetrics,
    pub hop1: HopMetrics,
    pub hopall: HopMetrics,
    pub protected: Option<ProtectedMetrics>,
}

pub fn evaluate(g: &PropertyGraph, queries: &[SlotQuery], gold: Option<&ProtectedGold>) -> Result<KbpMetrics> {
    let (q0, q1): (Vec<SlotQuery>, Vec<SlotQuery>) = queries.iter().cloned().partition(|q| q.hop == 0);
    let hop0 = evaluate_hop(g, &q0)?;
    let hop1 = evaluate_hop(g, &q1)?;
    let protected = gold.map(|gold| protected_recall(g, gold)).transpose()?;
    Ok(KbpMetrics {
        hopall: hop_all(&hop0, &hop1),
        hop0,
        hop1,
        protected,
    })
}

pub fn metrics_json(m: &KbpMetrics) -> String {
    serde_json::to_string_pretty(m).expect("metrics serialize")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `hop<0|1>\t<subject>\t<slot>\t<gold1|gold2|...>` lines. Blank lines
/// and `#` comments are skipped. A hop-1 query is tied to the nearest earlier
/// hop-0 query listing its subject as a gold answer.
pub fn parse_queries(text: &str, file: &str) -> Result<Vec<SlotQuery>> {
    let mut out: Vec<SlotQuery> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| EvalError::Parse {
            file: file.to_string(),
            line: i + 1,
            message,
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let hop = match fields[0] {
            "hop0" => 0,
            "hop1" => 1,
            other => return Err(err(format!("unknown hop level {other:?}"))),
        };
        let gold: BTreeSet<String> = fields[3]
            .split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if gold.is_empty() {
            return Err(err("gold answer list is empty".into()));
        }
        let subject = fields[1].trim().to_string();
        let via = if hop == 1 {
            let key = normalize_person(&subject);
            let parent = out
                .iter()
                .rev()
                .find(|q| q.hop == 0 && q.gold.iter().any(|a| normalize_person(a) == key))
                .ok_or_else(|| err(format!("hop1 subject {subject:?} is not an answer of an earlier hop0 query")))?;
            Some(Via {
                subject: parent.subject.clone(),
                slot: parent.slot.clone(),
            })
        } else {
            None
        };
        out.push(SlotQuery {
            hop,
            subject,
            slot: fields[2].trim().to_string(),
            gold,
            via,
        });
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<SlotQuery>> {
    let path = path.as_ref();
    parse_queries(&read(path)?, &path.display().to_string())
}

pub fn queries_string(queries: &[SlotQuery]) -> String {
    queries
        .iter()
        .map(|q| {
            let gold: Vec<&str> = q.gold.iter().map(String::as_str).collect();
            format!("hop{}\t{}\t{}\t{}\n", q.hop, q.subject, q.slot, gold.join("|"))
        })
        .collect()
}

/// Parses `<person>\t<attribute>\t<value1|value2|...>` lines.
pub fn parse_protected_gold(text: &str, file: &str) -> Result<ProtectedGold> {
    let mut gold = ProtectedGold::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(EvalError::Parse {
                file: file.to_string(),
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let values = gold
            .entry(fields[0].trim().to_string())
            .or_default()
            .entry(fields[1].trim().to_string())
            .or_default();
        values.extend(fields[2].split('|').map(str::trim).filter(|s| !s.is_empty()).map(String::from));
    }
    Ok(gold)
}

pub fn load_protected_gold(path: impl AsRef<Path>) -> Result<ProtectedGold> {
    let path = path.as_ref();
    parse_protected_gold(&read(path)?, &path.display().to_string())
}

/// Samples up to `n_hop0` hop-0 queries from the person relations of a gold
/// graph, each followed by hop-1 queries for every non-text attribute of its
/// answers.
pub fn generate_queries(gold: &PropertyGraph, n_hop0: usize, seed: u64) -> Vec<SlotQuery> {
    let mut candidates: Vec<(NodeId, &str)> = Vec::new();
    for n in gold.nodes() {
        for rel in PERSON_PERSON_RELATIONS {
            if !gold.related(n.node_id, rel).is_empty() {
                candidates.push((n.node_id, rel));
            }
        }
    }
    let mut r = rng::seeded(seed);
    let mut picked = sample(&mut r, candidates.len(), n_hop0.min(candidates.len())).into_vec();
    picked.sort_unstable();
    let mut out = Vec::new();
    for i in picked {
        let (node, rel) = candidates[i];
        let subject = gold.node(node).map(|n| n.canonical_name.clone()).unwrap_or_default();
        let answers: Vec<&str> = gold
            .related(node, rel)
            .into_iter()
            .filter_map(|a| gold.node(a))
            .map(|a| a.canonical_name.as_str())
            .collect();
        out.push(SlotQuery {
            hop: 0,
            subject: subject.clone(),
            slot: rel.to_string(),
            gold: answers.iter().map(|s| s.to_string()).collect(),
            via: None,
        });
        for a in answers {
            let Some(node) = gold.lookup(a).and_then(|id| gold.node(id)) else {
                continue;
            };
            for (key, vals) in &node.attributes {
                if attribute_kind(key) == AttributeKind::Text {
                    continue;
                }
                out.push(SlotQuery {
                    hop: 1,
                    subject: a.to_string(),
                    slot: key.clone(),
                    gold: vals.clone(),
                    via: Some(Via {
                        subject: subject.clone(),
                        slot: rel.to_string(),
                    }),
                });
            }
        }
    }
    out
}
