//! TACRED-format record ingestion and validation.
//!
//! Input is a JSON array of objects in the public-release field layout
//! (`id`, `token`, `subj_start`, `subj_end`, `obj_start`, `obj_end`,
//! `subj_type`, `obj_type`, `relation`, optional `stanford_pos` and
//! `stanford_ner`). Other fields such as `stanford_head` are ignored.
//! Spans are zero-based and inclusive on both ends.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inventory::NO_RELATION;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("record {id}: {violation}")]
    Validation { id: String, violation: String },
}

/// Inclusive token span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub subj_span: Span,
    pub obj_span: Span,
    pub subj_type: String,
    pub obj_type: String,
    pub relation: String,
    pub pos_tags: Option<Vec<String>>,
    pub ner_tags: Option<Vec<String>>,
}

impl SentenceRecord {
    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub records: Vec<SentenceRecord>,
    /// Relation labels seen in the records, excluding `no_relation`.
    pub relation_inventory: BTreeSet<String>,
    /// Coarse entity types seen on subject and object spans.
    pub entity_type_inventory: BTreeSet<String>,
}

impl Dataset {
    pub fn from_records(records: Vec<SentenceRecord>) -> Self {
        let mut relation_inventory = BTreeSet::new();
        let mut entity_type_inventory = BTreeSet::new();
        for r in &records {
            if r.relation != NO_RELATION {
                relation_inventory.insert(r.relation.clone());
            }
            entity_type_inventory.insert(r.subj_type.clone());
            entity_type_inventory.insert(r.obj_type.clone());
        }
        Dataset {
            records,
            relation_inventory,
            entity_type_inventory,
        }
    }

    /// `(record id, relation)` for records whose label is outside `known`.
    pub fn unknown_relations(&self, known: &BTreeSet<String>) -> Vec<(String, String)> {
        self.records
            .iter()
            .filter(|r| r.relation != NO_RELATION && !known.contains(&r.relation))
            .map(|r| (r.id.clone(), r.relation.clone()))
            .collect()
    }
}

/// On-disk record layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    token: Vec<String>,
    subj_start: i64,
    subj_end: i64,
    obj_start: i64,
    obj_end: i64,
    subj_type: String,
    obj_type: String,
    relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stanford_pos: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stanford_ner: Option<Vec<String>>,
}

fn to_span(start: i64, end: i64) -> Option<Span> {
    if start < 0 || end < 0 {
        return None;
    }
    Some(Span::new(start as usize, end as usize))
}

impl RawRecord {
    fn into_record(self) -> Result<SentenceRecord, IngestError> {
        let subj = to_span(self.subj_start, self.subj_end).ok_or_else(|| IngestError::Validation {
            id: self.id.clone(),
            violation: "negative subject span index".into(),
        })?;
        let obj = to_span(self.obj_start, self.obj_end).ok_or_else(|| IngestError::Validation {
            id: self.id.clone(),
            violation: "negative object span index".into(),
        })?;
        Ok(SentenceRecord {
            id: self.id,
            tokens: self.token,
            subj_span: subj,
            obj_span: obj,
            subj_type: self.subj_type,
            obj_type: self.obj_type,
            relation: self.relation,
            pos_tags: self.stanford_pos,
            ner_tags: self.stanford_ner,
        })
    }

    fn from_record(r: &SentenceRecord) -> Self {
        RawRecord {
            id: r.id.clone(),
            token: r.tokens.clone(),
            subj_start: r.subj_span.start as i64,
            subj_end: r.subj_span.end as i64,
            obj_start: r.obj_span.start as i64,
            obj_end: r.obj_span.end as i64,
            subj_type: r.subj_type.clone(),
            obj_type: r.obj_type.clone(),
            relation: r.relation.clone(),
            stanford_pos: r.pos_tags.clone(),
            stanford_ner: r.ner_tags.clone(),
        }
    }
}

/// Structural invariants only (spans, tags); relation labels are not checked.
fn structural_violations(r: &SentenceRecord) -> Vec<String> {
    let mut out = Vec::new();
    let n = r.tokens.len();
    let mut spans_ok = true;
    for (name, span) in [("subject", r.subj_span), ("object", r.obj_span)] {
        if span.start > span.end {
            out.push(format!("{name} span start after end {span}"));
            spans_ok = false;
        } else if span.end >= n {
            out.push(format!("{name} span out of bounds {span} for {n} tokens"));
            spans_ok = false;
        }
    }
    if spans_ok && r.subj_span.overlaps(&r.obj_span) {
        out.push(format!("span overlap {} {}", r.subj_span, r.obj_span));
    }
    for (name, tags) in [("pos", &r.pos_tags), ("ner", &r.ner_tags)] {
        if let Some(tags) = tags {
            if tags.len() != n {
                out.push(format!(
                    "tag length mismatch: {} {name} tags for {n} tokens",
                    tags.len()
                ));
            }
        }
    }
    out
}

/// Every violated record invariant, as human-readable descriptions.
pub fn validate_record(r: &SentenceRecord, inventory: &BTreeSet<String>) -> Vec<String> {
    let mut out = structural_violations(r);
    if r.relation != NO_RELATION && !inventory.contains(&r.relation) {
        out.push(format!("unknown relation {}", r.relation));
    }
    out
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len();
    }
    text.len()
}

fn parse_raw(text: &str) -> Result<Vec<RawRecord>, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Parses records without rejecting invariant violations.
pub fn parse_records_lenient(text: &str) -> Result<Vec<SentenceRecord>, IngestError> {
    parse_raw(text)?
        .into_iter()
        .map(RawRecord::into_record)
        .collect()
}

pub fn parse_tacred_str(text: &str) -> Result<Dataset, IngestError> {
    let records = parse_records_lenient(text)?;
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(IngestError::Validation {
                id: r.id.clone(),
                violation: "duplicate record id".into(),
            });
        }
        if let Some(v) = structural_violations(r).into_iter().next() {
            return Err(IngestError::Validation {
                id: r.id.clone(),
                violation: v,
            });
        }
    }
    let ds = Dataset::from_records(records);
    for (id, rel) in ds.unknown_relations(&crate::inventory::default_relation_inventory()) {
        log::warn!("record {id}: relation {rel} is outside the TACRED inventory");
    }
    Ok(ds)
}

pub fn parse_tacred(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tacred_str(&text)
}

/// Parses several files as one dataset.
pub fn parse_tacred_files<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset, IngestError> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(parse_tacred(p)?.records);
    }
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.id.clone()) {
            return Err(IngestError::Validation {
                id: r.id.clone(),
                violation: "duplicate record id".into(),
            });
        }
    }
    Ok(Dataset::from_records(records))
}

pub fn to_tacred_json(ds: &Dataset) -> String {
    let raw: Vec<RawRecord> = ds.records.iter().map(RawRecord::from_record).collect();
    serde_json::to_string_pretty(&raw).expect("records serialize")
}

pub fn write_tacred(ds: &Dataset, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, to_tacred_json(ds))
}

/// Line-oriented validation report: `<record-id>\t<violation>` per line.
pub fn validation_report(records: &[SentenceRecord], inventory: &BTreeSet<String>) -> String {
    let mut out = String::new();
    for r in records {
        for v in validate_record(r, inventory) {
            out.push_str(&r.id);
            out.push('\t');
            out.push_str(&v);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inventory::default_relation_inventory;
    use proptest::prelude::*;

    fn clinton_json() -> &'static str {
        r#"[{"id": "r1", "token": ["Bill", "Clinton", "is", "Baptist"],
             "subj_start": 0, "subj_end": 1, "obj_start": 3, "obj_end": 3,
             "subj_type": "PERSON", "obj_type": "RELIGION", "relation": "per:religion",
             "stanford_head": [2, 0, 2, 3]}]"#
    }

    #[test]
    fn parses_valid_record() {
        let ds = parse_tacred_str(clinton_json()).unwrap();
        assert_eq!(ds.records.len(), 1);
        let r = &ds.records[0];
        assert_eq!(r.subj_span, Span::new(0, 1));
        assert_eq!(r.obj_span, Span::new(3, 3));
        assert_eq!(r.span_text(r.subj_span), "Bill Clinton");
        assert!(ds.relation_inventory.contains("per:religion"));
        assert!(validate_record(r, &default_relation_inventory()).is_empty());
    }

    #[test]
    fn inverted_span_is_rejected_with_id() {
        let text = r#"[{"id": "bad", "token": ["a","b","c","d","e","f"], "subj_start": 5, "subj_end": 3,
            "obj_start": 0, "obj_end": 0, "subj_type": "PERSON", "obj_type": "PERSON", "relation": "no_relation"}]"#;
        match parse_tacred_str(text) {
            Err(IngestError::Validation { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_list() {
        let ds = parse_tacred_str("[]").unwrap();
        assert!(ds.records.is_empty());
        assert!(ds.relation_inventory.is_empty());
        assert!(ds.entity_type_inventory.is_empty());
    }

    #[test]
    fn syntax_error_reports_byte_offset() {
        let text = "[\n  {\"id\": \"x\",, }\n]";
        match parse_tacred_str(text) {
            Err(IngestError::Parse { offset, .. }) => {
                assert_eq!(&text[offset..offset + 1], ",");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tag_mismatch_and_bounds() {
        let text = r#"[{"id": "t", "token": ["a","b"], "subj_start": 0, "subj_end": 0,
            "obj_start": 1, "obj_end": 1, "subj_type": "PERSON", "obj_type": "PERSON",
            "relation": "per:spouse", "stanford_ner": ["PERSON"]}]"#;
        let err = parse_tacred_str(text).unwrap_err();
        assert!(err.to_string().contains("tag length mismatch"), "{err}");
        assert!(err.to_string().contains("record t"));
        let text = text.replace("\"obj_end\": 1", "\"obj_end\": 4");
        let err = parse_tacred_str(&text).unwrap_err();
        assert!(err.to_string().contains("out of bounds"), "{err}");
    }

    #[test]
    fn validate_overlap_and_unknown_relation() {
        let mut r = parse_tacred_str(clinton_json()).unwrap().records.remove(0);
        let inv = default_relation_inventory();
        r.obj_span = Span::new(1, 2);
        let v = validate_record(&r, &inv);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("span overlap"));
        r.obj_span = Span::new(3, 3);
        r.relation = "per:flavor".into();
        let v = validate_record(&r, &inv);
        assert_eq!(v, vec!["unknown relation per:flavor".to_string()]);
        assert_eq!(
            validation_report(&[r], &inv),
            "r1\tunknown relation per:flavor\n"
        );
    }

    #[test]
    fn unknown_relation_is_accepted_and_collected() {
        let text = clinton_json().replace("per:religion", "per:flavor");
        let ds = parse_tacred_str(&text).unwrap();
        assert!(ds.relation_inventory.contains("per:flavor"));
        assert_eq!(ds.unknown_relations(&default_relation_inventory()).len(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let one = clinton_json().trim();
        let inner = &one[1..one.len() - 1];
        let text = format!("[{inner},{inner}]");
        assert!(parse_tacred_str(&text).is_err());
    }

    fn arb_record() -> impl Strategy<Value = SentenceRecord> {
        (
            "[a-z]{1,6}",
            prop::collection::vec("[A-Za-z]{1,8}", 2..10),
            any::<bool>(),
            prop::sample::select(vec!["per:spouse", "no_relation", "per:title"]),
        )
            .prop_flat_map(|(id, tokens, tagged, rel)| {
                let n = tokens.len();
                (Just(id), Just(tokens), Just(tagged), Just(rel), 0..n - 1)
            })
            .prop_map(|(id, tokens, tagged, rel, cut)| {
                let n = tokens.len();
                let tags = tagged.then(|| vec!["O".to_string(); n]);
                SentenceRecord {
                    id,
                    subj_span: Span::new(0, cut),
                    obj_span: Span::new(cut + 1, n - 1),
                    tokens,
                    subj_type: "PERSON".into(),
                    obj_type: "TITLE".into(),
                    relation: rel.into(),
                    pos_tags: tags.clone(),
                    ner_tags: tags,
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip_and_determinism(records in prop::collection::vec(arb_record(), 0..6)) {
            let mut seen = HashSet::new();
            let records: Vec<_> = records.into_iter().filter(|r| seen.insert(r.id.clone())).collect();
            let ds = Dataset::from_records(records);
            let text = to_tacred_json(&ds);
            let back = parse_tacred_str(&text).unwrap();
            prop_assert_eq!(&back, &ds);
            prop_assert_eq!(parse_tacred_str(&text).unwrap(), back.clone());
            for r in &back.records {
                prop_assert!(validate_record(r, &default_relation_inventory()).is_empty());
            }
        }
    }
}
