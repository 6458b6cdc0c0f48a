//! Browser bindings over the core crate. Each export returns a JSON string;
//! the plain `*_json` functions are the same operations for native callers.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use kbpop::annotate::{annotate_record, MentionSource, RuleSet};
use kbpop::graph::build_graph;
use kbpop::ingest::{parse_tacred_str, SentenceRecord, Span};
use kbpop::inventory::NO_RELATION;
use kbpop::numcore::{rng, svd, Matrix};
use kbpop::pipeline::features;
use kbpop::sketch::{frequent_directions, representative_sample, SketchConfig};
use kbpop::table::Table;
use rand::Rng as _;

/// The bundled synthetic corpus, so the page works without uploads.
pub const CORPUS: &str = include_str!("../../core/data/corpus.json");

fn rules(use_rules: bool) -> RuleSet {
    if use_rules {
        RuleSet::default_pack()
    } else {
        RuleSet::empty()
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo output serializes")
}

#[derive(Serialize)]
struct Point {
    id: usize,
    x: f64,
    y: f64,
    cluster: usize,
    selected: bool,
}

#[derive(Serialize)]
struct SampleView {
    rows: usize,
    k: usize,
    representatives: usize,
    points: Vec<Point>,
}

fn sample_table(table: &Table, seed: u64, theta: f64) -> Result<String, String> {
    let cfg = SketchConfig {
        theta,
        seed,
        ..SketchConfig::default()
    };
    let res = representative_sample(table, &cfg).map_err(|e| e.to_string())?;
    let points = res
        .projection
        .iter()
        .zip(&res.clusters)
        .map(|(p, &c)| Point {
            id: p.person_id,
            x: p.x,
            y: p.y,
            cluster: c,
            selected: p.selected,
        })
        .collect();
    Ok(to_json(&SampleView {
        rows: table.rows(),
        k: res.k,
        representatives: res.selected.len(),
        points,
    }))
}

/// Representative sample and 2-D projection of the bundled corpus's person
/// table, annotated with or without the rule pack.
pub fn sample_corpus_json(use_rules: bool, seed: u64, theta: f64) -> Result<String, String> {
    let ds = parse_tacred_str(CORPUS).map_err(|e| e.to_string())?;
    let ann: Vec<_> = ds.records.iter().map(|r| annotate_record(r, &rules(use_rules))).collect();
    sample_table(&features(&build_graph(&ann)), seed, theta)
}

/// Same as [`sample_corpus_json`] for a feature table in CSV form.
pub fn sample_csv_json(csv: &str, seed: u64, theta: f64) -> Result<String, String> {
    let table = Table::from_csv(csv).map_err(|e| e.to_string())?;
    sample_table(&table, seed, theta)
}

#[derive(Serialize)]
struct CurvePoint {
    ell: usize,
    error: f64,
    bound: f64,
}

/// Spectral error of frequent-directions sketches of one random matrix as the
/// sketch size grows, next to the guaranteed bound.
pub fn fd_error_curve_json(rows: usize, cols: usize, seed: u64) -> Result<String, String> {
    if rows == 0 || cols < 2 || rows * cols > 200_000 {
        return Err("need 1+ rows, 2+ columns and at most 200000 entries".into());
    }
    let mut r = rng::seeded(seed);
    let a = Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let gram = a.gram();
    let fro2 = a.frobenius_norm().powi(2);
    let mut out = Vec::new();
    for ell in 2..=cols.min(32) {
        let b = frequent_directions(&a, ell).map_err(|e| e.to_string())?;
        let diff = gram.sub(&b.gram()).map_err(|e| e.to_string())?;
        // symmetric, so the top singular value is the spectral norm
        let error = svd(&diff)
            .map_err(|e| e.to_string())?
            .singular_values
            .first()
            .copied()
            .unwrap_or(0.0);
        out.push(CurvePoint {
            ell,
            error,
            bound: 2.0 * fro2 / ell as f64,
        });
    }
    Ok(to_json(&out))
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let core = word.trim_end_matches(['.', ',', ';', ':', '!', '?']);
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(word[core.len()..].chars().map(String::from));
    }
    out
}

/// Token spans where one of `persons` occurs, leftmost first.
fn person_spans(tokens: &[String], persons: &[Vec<String>]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let hit = persons
            .iter()
            .filter(|p| !p.is_empty() && tokens[i..].starts_with(p))
            .map(Vec::len)
            .max();
        match hit {
            Some(len) => {
                spans.push(Span::new(i, i + len - 1));
                i += len;
            }
            None => i += 1,
        }
    }
    spans
}

#[derive(Serialize)]
struct MentionView {
    surface: String,
    start: usize,
    end: usize,
    fine_type: String,
    source: MentionSource,
}

#[derive(Serialize)]
struct RelationView {
    subject: String,
    relation: String,
    object: String,
}

#[derive(Serialize)]
struct SentenceView {
    tokens: Vec<String>,
    mentions: Vec<MentionView>,
    relations: Vec<RelationView>,
}

/// Runs the entity and relation annotators over one sentence. `persons` is a
/// comma-separated list of the person names in it.
pub fn annotate_sentence_json(text: &str, persons: &str, use_rules: bool) -> Result<String, String> {
    let tokens = tokenize(text);
    let names: Vec<Vec<String>> = persons.split(',').map(|p| p.split_whitespace().map(String::from).collect()).collect();
    let spans = person_spans(&tokens, &names);
    let Some(&first) = spans.first() else {
        return Err("none of the person names occur in the sentence".into());
    };
    let second = spans.get(1).copied().unwrap_or(first);
    let ner = (0..tokens.len())
        .map(|i| if spans.iter().any(|s| s.contains(i)) { "PERSON" } else { "O" }.to_string())
        .collect();
    let record = SentenceRecord {
        id: "demo".into(),
        tokens,
        subj_span: first,
        obj_span: second,
        subj_type: "PERSON".into(),
        obj_type: "PERSON".into(),
        relation: NO_RELATION.into(),
        pos_tags: None,
        ner_tags: Some(ner),
    };
    let ann = annotate_record(&record, &rules(use_rules));
    Ok(to_json(&SentenceView {
        mentions: ann
            .mentions
            .iter()
            .map(|m| MentionView {
                surface: m.surface.clone(),
                start: m.span.start,
                end: m.span.end,
                fine_type: m.fine_type.clone(),
                source: m.provenance,
            })
            .collect(),
        relations: ann
            .relations
            .iter()
            .map(|r| RelationView {
                subject: r.subject.surface.clone(),
                relation: r.relation.clone(),
                object: r.object.surface.clone(),
            })
            .collect(),
        tokens: record.tokens,
    }))
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample_corpus(use_rules: bool, seed: u32, theta: f64) -> Result<String, JsError> {
    js(sample_corpus_json(use_rules, u64::from(seed), theta))
}

#[wasm_bindgen]
pub fn sample_csv(csv: &str, seed: u32, theta: f64) -> Result<String, JsError> {
    js(sample_csv_json(csv, u64::from(seed), theta))
}

#[wasm_bindgen]
pub fn fd_error_curve(rows: u32, cols: u32, seed: u32) -> Result<String, JsError> {
    js(fd_error_curve_json(rows as usize, cols as usize, u64::from(seed)))
}

#[wasm_bindgen]
pub fn annotate_sentence(text: &str, persons: &str, use_rules: bool) -> Result<String, JsError> {
    js(annotate_sentence_json(text, persons, use_rules))
}
