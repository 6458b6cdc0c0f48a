use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::pattern::{PatternError, TokenPattern};
use crate::inventory::{default_relation_inventory, is_person_rooted, is_personal_entity_type};
use crate::text::normalize;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no dictionaries found in {0}")]
    NoDictionaries(String),
    #[error("duplicate entity type {fine_type}: {first} and {second}")]
    DuplicateType {
        fine_type: String,
        first: String,
        second: String,
    },
    #[error("unknown personal entity type {0}")]
    UnknownType(String),
    #[error("{file} line {line}: {source}")]
    Pattern {
        file: String,
        line: usize,
        #[source]
        source: PatternError,
    },
    #[error("{file} line {line}: {message}")]
    Rule {
        file: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Dictionary {
    pub phrases: BTreeSet<String>,
    pub max_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trigger {
    /// `*` in a rules file: fires on proximity alone.
    Any,
    /// Normalized words.
    Phrase(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationRule {
    pub subject_type: String,
    /// Matched against a mention's fine type or coarse type.
    pub object_type: String,
    pub relation: String,
    pub window: usize,
    pub triggers: Vec<Trigger>,
}

#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub dictionaries: BTreeMap<String, Dictionary>,
    pub patterns: BTreeMap<String, Vec<TokenPattern>>,
    pub relation_rules: Vec<RelationRule>,
}

const RULES_FILE: &str = "relations.rules";
const PATTERNS_FILE: &str = "patterns.conf";

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

impl RuleSet {
    /// No dictionaries, patterns or rules: annotation falls back to the dataset spans.
    pub fn empty() -> Self {
        RuleSet::default()
    }

    pub fn add_dictionary<'a>(
        &mut self,
        fine_type: &str,
        phrases: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), ConfigError> {
        if !is_personal_entity_type(fine_type) {
            return Err(ConfigError::UnknownType(fine_type.to_string()));
        }
        let dict = self.dictionaries.entry(fine_type.to_string()).or_default();
        for p in phrases {
            let norm = normalize(p);
            if norm.is_empty() {
                continue;
            }
            dict.max_tokens = dict.max_tokens.max(norm.split(' ').count());
            dict.phrases.insert(norm);
        }
        Ok(())
    }

    pub fn add_pattern(&mut self, fine_type: &str, expr: &str) -> Result<(), ConfigError> {
        self.parse_pattern_line(&format!("{fine_type}\t{expr}"), "<inline>", 1)
    }

    pub fn add_rule_line(&mut self, line: &str) -> Result<(), ConfigError> {
        self.parse_rule_line(line, "<inline>", 1)
    }

    fn parse_pattern_line(&mut self, line: &str, file: &str, lineno: usize) -> Result<(), ConfigError> {
        let (fine, expr) = line.split_once('\t').ok_or_else(|| ConfigError::Rule {
            file: file.into(),
            line: lineno,
            message: "expected <fine_type>\\t<pattern>".into(),
        })?;
        let fine = fine.trim();
        if !is_personal_entity_type(fine) {
            return Err(ConfigError::UnknownType(fine.to_string()));
        }
        let pat = TokenPattern::compile(expr).map_err(|source| ConfigError::Pattern {
            file: file.into(),
            line: lineno,
            source,
        })?;
        self.patterns.entry(fine.to_string()).or_default().push(pat);
        Ok(())
    }

    fn parse_rule_line(&mut self, line: &str, file: &str, lineno: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Rule {
            file: file.into(),
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 tab-separated fields, found {}", fields.len())));
        }
        let relation = fields[2].trim();
        if !default_relation_inventory().contains(relation) {
            return Err(bad(format!("relation {relation} is not in the inventory")));
        }
        let subject_type = fields[0].trim();
        if is_person_rooted(relation) && subject_type != "PERSON" {
            return Err(bad(format!("{relation} needs a PERSON subject, got {subject_type}")));
        }
        let window: usize = fields[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad window '{}'", fields[3])))?;
        let triggers: Vec<Trigger> = fields[4]
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                if t == "*" {
                    Trigger::Any
                } else {
                    Trigger::Phrase(normalize(t).split(' ').map(String::from).collect())
                }
            })
            .collect();
        if triggers.is_empty() {
            return Err(bad("empty trigger list".into()));
        }
        self.relation_rules.push(RelationRule {
            subject_type: subject_type.to_string(),
            object_type: fields[1].trim().to_string(),
            relation: relation.to_string(),
            window,
            triggers,
        });
        Ok(())
    }

    fn parse_patterns(&mut self, text: &str, file: &str) -> Result<(), ConfigError> {
        for (lineno, line) in content_lines(text) {
            self.parse_pattern_line(line, file, lineno)?;
        }
        Ok(())
    }

    fn parse_rules(&mut self, text: &str, file: &str) -> Result<(), ConfigError> {
        for (lineno, line) in content_lines(text) {
            self.parse_rule_line(line, file, lineno)?;
        }
        Ok(())
    }

    /// The bundled personal-data rule pack (same content as `rules/default/`).
    pub fn default_pack() -> Self {
        let mut rs = RuleSet::empty();
        for (fine, text) in DEFAULT_DICTIONARIES {
            rs.add_dictionary(fine, content_lines(text).map(|(_, l)| l))
                .expect("bundled dictionary is valid");
        }
        rs.parse_patterns(DEFAULT_PATTERNS, PATTERNS_FILE)
            .expect("bundled patterns are valid");
        rs.parse_rules(DEFAULT_RULES, RULES_FILE)
            .expect("bundled rules are valid");
        rs
    }
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../rules/default/", $name, ".dict")))),*]
    };
}

const DEFAULT_DICTIONARIES: &[(&str, &str)] = bundled!(
    "cause_of_death",
    "location",
    "organization",
    "religion",
    "school",
    "title",
);
const DEFAULT_PATTERNS: &str = include_str!("../../rules/default/patterns.conf");
const DEFAULT_RULES: &str = include_str!("../../rules/default/relations.rules");

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads `*.dict` files (searched recursively, keyed by file stem) plus the
/// optional top-level `patterns.conf` and `relations.rules`.
pub fn load_rules(dir: impl AsRef<Path>) -> Result<RuleSet, ConfigError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(ConfigError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "rules directory not found"),
        });
    }
    let mut dict_files: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ConfigError::Io {
            path: dir.display().to_string(),
            source: e.into(),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "dict") {
            dict_files.push(entry.into_path());
        }
    }
    if dict_files.is_empty() {
        return Err(ConfigError::NoDictionaries(dir.display().to_string()));
    }

    let mut rs = RuleSet::empty();
    let mut origin: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in dict_files {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if let Some(first) = origin.get(&stem) {
            return Err(ConfigError::DuplicateType {
                fine_type: stem,
                first: first.display().to_string(),
                second: path.display().to_string(),
            });
        }
        let text = read(&path)?;
        rs.add_dictionary(&stem, content_lines(&text).map(|(_, l)| l))?;
        origin.insert(stem, path);
    }

    let patterns = dir.join(PATTERNS_FILE);
    if patterns.is_file() {
        rs.parse_patterns(&read(&patterns)?, &patterns.display().to_string())?;
    }
    let rules = dir.join(RULES_FILE);
    if rules.is_file() {
        rs.parse_rules(&read(&rules)?, &rules.display().to_string())?;
    }
    Ok(rs)
}
