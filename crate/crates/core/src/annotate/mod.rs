//! Rule-based personal-data annotators.
//!
//! Entity annotation combines three sources: the dataset's own subject and
//! object spans (plus PERSON runs from `stanford_ner` tags when present),
//! gazetteer dictionaries named after a fine entity type, and token
//! patterns. Relation annotation keeps the dataset's gold label and adds
//! labels from window rules: a rule fires when a mention of the subject type
//! precedes a mention of the object type, at most `window` tokens separate
//! them, and one of the trigger phrases occurs in between.
//!
//! Dictionary matching is context free, so a city name that is also part of
//! a person's name is still tagged as a location.

pub mod pattern;
mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{SentenceRecord, Span};
use crate::inventory::{coarse_type_of, fine_type_for_dataset_span, NO_RELATION};
use crate::text::normalize;

pub use rules::{load_rules, ConfigError, Dictionary, RelationRule, RuleSet, Trigger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionSource {
    Dataset,
    Dictionary,
    Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub record_id: String,
    pub span: Span,
    pub surface: String,
    pub coarse_type: String,
    pub fine_type: String,
    pub provenance: MentionSource,
}

/// Ordered so that `Dataset > Rule`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationSource {
    Rule,
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub record_id: String,
    pub subject: EntityMention,
    pub object: EntityMention,
    pub relation: String,
    pub provenance: RelationSource,
    pub confidence: f64,
}

/// Mentions and relations for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordAnnotations {
    pub record_id: String,
    pub mentions: Vec<EntityMention>,
    pub relations: Vec<RelationAnnotation>,
}

fn mention(r: &SentenceRecord, span: Span, coarse: &str, fine: &str, src: MentionSource) -> EntityMention {
    EntityMention {
        record_id: r.id.clone(),
        span,
        surface: r.span_text(span),
        coarse_type: coarse.to_string(),
        fine_type: fine.to_string(),
        provenance: src,
    }
}

fn dataset_subject(r: &SentenceRecord) -> EntityMention {
    let fine = fine_type_for_dataset_span(&r.subj_type, None);
    mention(r, r.subj_span, &r.subj_type, fine, MentionSource::Dataset)
}

fn dataset_object(r: &SentenceRecord) -> EntityMention {
    let rel = (r.relation != NO_RELATION && r.subj_type == "PERSON").then_some(r.relation.as_str());
    let fine = fine_type_for_dataset_span(&r.obj_type, rel);
    mention(r, r.obj_span, &r.obj_type, fine, MentionSource::Dataset)
}

fn ner_person_runs(r: &SentenceRecord) -> Vec<Span> {
    let Some(tags) = &r.ner_tags else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, t) in tags.iter().enumerate() {
        match (t == "PERSON", start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Span::new(s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Span::new(s, tags.len() - 1));
    }
    out
}

/// Leftmost-longest, non-overlapping phrase matches of one dictionary.
fn dictionary_matches(norm_tokens: &[String], phrases: &rules::Dictionary) -> Vec<Span> {
    let mut out = Vec::new();
    let n = norm_tokens.len();
    let mut i = 0;
    while i < n {
        let longest = (1..=phrases.max_tokens.min(n - i))
            .rev()
            .find(|&len| phrases.phrases.contains(&norm_tokens[i..i + len].join(" ")));
        match longest {
            Some(len) => {
                out.push(Span::new(i, i + len - 1));
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

fn pattern_matches(tokens: &[String], patterns: &[pattern::TokenPattern]) -> Vec<Span> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let widest = patterns
            .iter()
            .filter(|p| p.matches_at(tokens, i))
            .map(|p| p.width())
            .max();
        match widest {
            Some(w) => {
                out.push(Span::new(i, i + w - 1));
                i += w;
            }
            None => i += 1,
        }
    }
    out
}

fn sort_mentions(mentions: &mut [EntityMention]) {
    mentions.sort_by(|a, b| {
        (a.span.start, &a.fine_type, a.span.end, a.provenance)
            .cmp(&(b.span.start, &b.fine_type, b.span.end, b.provenance))
    });
}

/// All entity mentions of a record, with no two mentions of one fine type
/// overlapping. On overlap dataset spans win over dictionary hits, which win
/// over pattern hits; then longer spans, then leftmost.
pub fn annotate_entities(r: &SentenceRecord, rules: &RuleSet) -> Vec<EntityMention> {
    let mut candidates = vec![dataset_subject(r), dataset_object(r)];
    for span in ner_person_runs(r) {
        candidates.push(mention(r, span, "PERSON", "name", MentionSource::Dataset));
    }
    let norm_tokens: Vec<String> = r.tokens.iter().map(|t| normalize(t)).collect();
    for (fine, dict) in &rules.dictionaries {
        for span in dictionary_matches(&norm_tokens, dict) {
            candidates.push(mention(r, span, coarse_type_of(fine), fine, MentionSource::Dictionary));
        }
    }
    for (fine, pats) in &rules.patterns {
        for span in pattern_matches(&r.tokens, pats) {
            candidates.push(mention(r, span, coarse_type_of(fine), fine, MentionSource::Pattern));
        }
    }

    candidates.sort_by(|a, b| {
        a.provenance
            .cmp(&b.provenance)
            .then((b.span.end - b.span.start).cmp(&(a.span.end - a.span.start)))
            .then(a.span.start.cmp(&b.span.start))
    });
    let mut kept: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    let mut out = Vec::new();
    for m in candidates {
        let taken = kept.entry(m.fine_type.clone()).or_default();
        if taken.iter().any(|s| s.overlaps(&m.span)) {
            continue;
        }
        taken.push(m.span);
        out.push(m);
    }
    sort_mentions(&mut out);
    out
}

fn trigger_between(norm_tokens: &[String], between: std::ops::Range<usize>, triggers: &[Trigger]) -> bool {
    let window = &norm_tokens[between];
    triggers.iter().any(|t| match t {
        Trigger::Any => true,
        Trigger::Phrase(words) => {
            !words.is_empty()
                && window.len() >= words.len()
                && window.windows(words.len()).any(|w| w == words.as_slice())
        }
    })
}

/// Gold relation (when labelled) plus every firing rule, deduplicated on
/// `(subject span, object span, relation)` keeping the dataset annotation.
pub fn annotate_relations(
    r: &SentenceRecord,
    mentions: &[EntityMention],
    rules: &RuleSet,
) -> Vec<RelationAnnotation> {
    let mut by_key: BTreeMap<(Span, Span, String), RelationAnnotation> = BTreeMap::new();
    let mut offer = |ann: RelationAnnotation| {
        let key = (ann.subject.span, ann.object.span, ann.relation.clone());
        match by_key.get(&key) {
            Some(existing) if existing.provenance >= ann.provenance => {}
            _ => {
                by_key.insert(key, ann);
            }
        }
    };

    if r.relation != NO_RELATION {
        let find = |span: Span, fallback: EntityMention| {
            mentions
                .iter()
                .find(|m| m.span == span && m.provenance == MentionSource::Dataset)
                .cloned()
                .unwrap_or(fallback)
        };
        offer(RelationAnnotation {
            record_id: r.id.clone(),
            subject: find(r.subj_span, dataset_subject(r)),
            object: find(r.obj_span, dataset_object(r)),
            relation: r.relation.clone(),
            provenance: RelationSource::Dataset,
            confidence: 1.0,
        });
    }

    let norm_tokens: Vec<String> = r.tokens.iter().map(|t| normalize(t)).collect();
    for rule in &rules.relation_rules {
        for s in mentions.iter().filter(|m| m.coarse_type == rule.subject_type) {
            for o in mentions
                .iter()
                .filter(|m| m.fine_type == rule.object_type || m.coarse_type == rule.object_type)
            {
                if o.span.start <= s.span.end {
                    continue;
                }
                let between = s.span.end + 1..o.span.start;
                if between.len() > rule.window || !trigger_between(&norm_tokens, between, &rule.triggers) {
                    continue;
                }
                offer(RelationAnnotation {
                    record_id: r.id.clone(),
                    subject: s.clone(),
                    object: o.clone(),
                    relation: rule.relation.clone(),
                    provenance: RelationSource::Rule,
                    confidence: 1.0,
                });
            }
        }
    }

    let mut out: Vec<RelationAnnotation> = by_key.into_values().collect();
    out.sort_by(|a, b| {
        (a.subject.span.start, a.object.span.start, &a.relation)
            .cmp(&(b.subject.span.start, b.object.span.start, &b.relation))
    });
    out
}

pub fn annotate_record(r: &SentenceRecord, rules: &RuleSet) -> RecordAnnotations {
    let mentions = annotate_entities(r, rules);
    let relations = annotate_relations(r, &mentions, rules);
    RecordAnnotations {
        record_id: r.id.clone(),
        mentions,
        relations,
    }
}

pub fn annotate_dataset(records: &[SentenceRecord], rules: &RuleSet) -> Vec<RecordAnnotations> {
    records.iter().map(|r| annotate_record(r, rules)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Span;

    fn record(tokens: &[&str], subj: (usize, usize), obj: (usize, usize), st: &str, ot: &str, rel: &str) -> SentenceRecord {
        SentenceRecord {
            id: "r".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            subj_span: Span::new(subj.0, subj.1),
            obj_span: Span::new(obj.0, obj.1),
            subj_type: st.into(),
            obj_type: ot.into(),
            relation: rel.into(),
            pos_tags: None,
            ner_tags: None,
        }
    }

    fn rules_from(dicts: &[(&str, &[&str])], patterns: &[(&str, &str)], rel_rules: &str) -> RuleSet {
        let mut rs = RuleSet::empty();
        for (fine, phrases) in dicts {
            rs.add_dictionary(fine, phrases.iter().copied()).unwrap();
        }
        for (fine, p) in patterns {
            rs.add_pattern(fine, p).unwrap();
        }
        for line in rel_rules.lines().filter(|l| !l.trim().is_empty()) {
            rs.add_rule_line(line).unwrap();
        }
        rs
    }

    #[test]
    fn email_pattern_mention() {
        let r = record(&["Alice", "Smith", "wrote", "from", "alice@example.com"], (0, 1), (2, 2), "PERSON", "MISC", "no_relation");
        let rules = rules_from(&[], &[("email", r"[\w.%+-]+@[\w.-]+\.\a{2,}")], "");
        let ms = annotate_entities(&r, &rules);
        assert!(ms
            .iter()
            .any(|m| m.fine_type == "email" && m.span == Span::new(4, 4) && m.provenance == MentionSource::Pattern));
    }

    #[test]
    fn no_hits_gives_only_dataset_spans() {
        let r = record(&["Bob", "Jones", "met", "Carol", "King"], (0, 1), (3, 4), "PERSON", "PERSON", "no_relation");
        let rules = rules_from(&[("religion", &["Baptist"])], &[], "");
        let ms = annotate_entities(&r, &rules);
        assert_eq!(ms.len(), 2);
        assert!(ms.iter().all(|m| m.provenance == MentionSource::Dataset));
    }

    #[test]
    fn longest_dictionary_match_wins() {
        let r = record(
            &["Ann", "Lee", "attended", "Brigham", "Young", "University", "."],
            (0, 1),
            (6, 6),
            "PERSON",
            "MISC",
            "no_relation",
        );
        let rules = rules_from(&[("school", &["Brigham Young", "Brigham Young University"])], &[], "");
        let schools: Vec<_> = annotate_entities(&r, &rules)
            .into_iter()
            .filter(|m| m.fine_type == "school")
            .collect();
        assert_eq!(schools.len(), 1);
        assert_eq!(schools[0].span, Span::new(3, 5));
        assert_eq!(schools[0].surface, "Brigham Young University");
        assert_eq!(schools[0].coarse_type, "ORGANIZATION");
    }

    #[test]
    fn location_name_inside_person_name_is_still_tagged() {
        // context-free gazetteer noise: "Paris" is a person's first name here
        let r = record(&["Paris", "Hilton", "met", "reporters", "."], (0, 1), (3, 3), "PERSON", "TITLE", "no_relation");
        let rules = rules_from(&[("location", &["Paris", "London"])], &[], "");
        let ms = annotate_entities(&r, &rules);
        let loc = ms.iter().find(|m| m.fine_type == "location").expect("false positive produced");
        assert_eq!(loc.span, Span::new(0, 0));
        assert_eq!(loc.provenance, MentionSource::Dictionary);
    }

    #[test]
    fn religion_rule_fires() {
        let r = record(&["Bill", "Clinton", "is", "a", "Baptist"], (0, 1), (4, 4), "PERSON", "RELIGION", "no_relation");
        let rules = rules_from(&[("religion", &["Baptist"])], &[], "PERSON\treligion\tper:religion\t4\tis,converted");
        let ms = annotate_entities(&r, &rules);
        let rels = annotate_relations(&r, &ms, &rules);
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].relation, "per:religion");
        assert_eq!(rels[0].provenance, RelationSource::Rule);
        assert_eq!(rels[0].subject.surface, "Bill Clinton");
        assert_eq!(rels[0].object.surface, "Baptist");
    }

    #[test]
    fn window_and_order_limit_rules() {
        let rules_text = "PERSON\treligion\tper:religion\t1\tis";
        let rules = rules_from(&[("religion", &["Baptist"])], &[], rules_text);
        let r = record(&["Bill", "Clinton", "is", "a", "Baptist"], (0, 1), (4, 4), "PERSON", "RELIGION", "no_relation");
        let ms = annotate_entities(&r, &rules);
        assert!(annotate_relations(&r, &ms, &rules).is_empty());
        let r = record(&["Baptist", "is", "Bill", "Clinton"], (2, 3), (0, 0), "PERSON", "RELIGION", "no_relation");
        let ms = annotate_entities(&r, &rules);
        assert!(annotate_relations(&r, &ms, &rules).is_empty());
    }

    #[test]
    fn no_relation_without_rules_is_empty() {
        let r = record(&["Bob", "Jones", "met", "Carol", "King"], (0, 1), (3, 4), "PERSON", "PERSON", "no_relation");
        let rules = RuleSet::empty();
        let ms = annotate_entities(&r, &rules);
        assert!(annotate_relations(&r, &ms, &rules).is_empty());
    }

    #[test]
    fn dataset_wins_dedup() {
        let r = record(&["Bill", "Clinton", "is", "a", "Baptist"], (0, 1), (4, 4), "PERSON", "RELIGION", "per:religion");
        let rules = rules_from(&[("religion", &["Baptist"])], &[], "PERSON\treligion\tper:religion\t4\tis");
        let ms = annotate_entities(&r, &rules);
        // the dictionary hit on the object span is dropped in favour of the dataset span
        assert_eq!(ms.iter().filter(|m| m.fine_type == "religion").count(), 1);
        let rels = annotate_relations(&r, &ms, &rules);
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].provenance, RelationSource::Dataset);
    }

    #[test]
    fn ner_tags_add_person_mentions() {
        let mut r = record(
            &["Ann", "Lee", "married", "Tom", "Hart", "in", "Boston"],
            (0, 1),
            (6, 6),
            "PERSON",
            "CITY",
            "no_relation",
        );
        r.ner_tags = Some(
            ["PERSON", "PERSON", "O", "PERSON", "PERSON", "O", "CITY"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        );
        let rules = rules_from(&[], &[], "PERSON\tPERSON\tper:spouse\t4\tmarried");
        let ms = annotate_entities(&r, &rules);
        assert_eq!(ms.iter().filter(|m| m.coarse_type == "PERSON").count(), 2);
        let rels = annotate_relations(&r, &ms, &rules);
        assert_eq!(rels.len(), 1);
        assert_eq!(rels[0].object.surface, "Tom Hart");
        // without tags the tag-dependent mention disappears
        r.ner_tags = None;
        let ms = annotate_entities(&r, &rules);
        assert!(annotate_relations(&r, &ms, &rules).is_empty());
    }

    #[test]
    fn rules_only_add() {
        let r = record(&["Bill", "Clinton", "is", "a", "Baptist"], (0, 1), (4, 4), "PERSON", "RELIGION", "per:religion");
        let empty = RuleSet::empty();
        let base = annotate_relations(&r, &annotate_entities(&r, &empty), &empty);
        let rules = RuleSet::default_pack();
        let aug = annotate_relations(&r, &annotate_entities(&r, &rules), &rules);
        for b in &base {
            assert!(aug.iter().any(|a| a.relation == b.relation
                && a.subject.span == b.subject.span
                && a.object.span == b.object.span
                && a.provenance == RelationSource::Dataset));
        }
    }
}
