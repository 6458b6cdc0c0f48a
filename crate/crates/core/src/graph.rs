//! Personal property graph: persons are nodes, person-to-person relations are
//! edges and every other personal datum is a node attribute.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{RecordAnnotations, RelationSource};
use crate::inventory::{attribute_kind, converse_relation, is_person_person, relation_attribute, AttributeKind};
use crate::table::{Column, Table};
use crate::text::normalize_person;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonNode {
    pub node_id: NodeId,
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
    pub attributes: BTreeMap<String, BTreeSet<String>>,
}

/// Ordered by strength: a dataset edge outranks a rule edge, which outranks a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeProvenance {
    Predicted,
    Rule,
    Dataset,
}

impl fmt::Display for EdgeProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeProvenance::Predicted => "predicted",
            EdgeProvenance::Rule => "rule",
            EdgeProvenance::Dataset => "dataset",
        })
    }
}

impl From<RelationSource> for EdgeProvenance {
    fn from(s: RelationSource) -> Self {
        match s {
            RelationSource::Dataset => EdgeProvenance::Dataset,
            RelationSource::Rule => EdgeProvenance::Rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub relation: String,
    pub provenance: EdgeProvenance,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphRepr", try_from = "GraphRepr")]
pub struct PropertyGraph {
    nodes: Vec<PersonNode>,
    edges: BTreeMap<(NodeId, NodeId, String), PersonEdge>,
    name_index: BTreeMap<String, NodeId>,
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[PersonNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&PersonNode> {
        self.nodes.get(id)
    }

    /// Edges sorted by `(src, dst, relation)`.
    pub fn edges(&self) -> impl Iterator<Item = &PersonEdge> {
        self.edges.values()
    }

    pub fn lookup(&self, name: &str) -> Option<NodeId> {
        self.name_index.get(&normalize_person(name)).copied()
    }

    /// Existing node for the normalized name, or a new one.
    pub fn resolve_person(&mut self, surface: &str) -> Result<NodeId> {
        let key = normalize_person(surface);
        if key.is_empty() {
            return Err(GraphError::InvalidArgument(format!(
                "person name {surface:?} is empty after normalization"
            )));
        }
        let surface = surface.split_whitespace().collect::<Vec<_>>().join(" ");
        if let Some(&id) = self.name_index.get(&key) {
            let node = &mut self.nodes[id];
            if node.canonical_name != surface {
                node.aliases.insert(surface);
            }
            return Ok(id);
        }
        let id = self.nodes.len();
        self.nodes.push(PersonNode {
            node_id: id,
            canonical_name: surface,
            aliases: BTreeSet::new(),
            attributes: BTreeMap::new(),
        });
        self.name_index.insert(key, id);
        Ok(id)
    }

    pub fn add_attribute(&mut self, node: NodeId, fine_type: &str, value: &str) -> Result<()> {
        let n = self
            .nodes
            .get_mut(node)
            .ok_or_else(|| GraphError::InvalidArgument(format!("unknown node {node}")))?;
        let value = value.split_whitespace().collect::<Vec<_>>().join(" ");
        if value.is_empty() {
            return Ok(());
        }
        n.attributes.entry(fine_type.to_string()).or_default().insert(value);
        Ok(())
    }

    /// Inserts an edge; an existing `(src, dst, relation)` keeps the stronger
    /// provenance. Returns whether the graph changed.
    pub fn add_edge(
        &mut self,
        src: NodeId,
        dst: NodeId,
        relation: &str,
        provenance: EdgeProvenance,
        score: f64,
    ) -> Result<bool> {
        if src == dst {
            return Err(GraphError::InvalidArgument(format!("self-loop on node {src}")));
        }
        if src >= self.nodes.len() || dst >= self.nodes.len() {
            return Err(GraphError::InvalidArgument(format!("edge ({src},{dst}) references an unknown node")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(GraphError::InvalidArgument(format!("edge score {score} outside [0,1]")));
        }
        let score = if provenance == EdgeProvenance::Predicted { score } else { 1.0 };
        let key = (src, dst, relation.to_string());
        if let Some(existing) = self.edges.get(&key) {
            if existing.provenance >= provenance {
                return Ok(false);
            }
        }
        self.edges.insert(
            key,
            PersonEdge {
                src,
                dst,
                relation: relation.to_string(),
                provenance,
                score,
            },
        );
        Ok(true)
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.edges.keys().filter(|(s, d, _)| *s == node || *d == node).count()
    }

    /// Whether any edge joins the two nodes, in either direction.
    pub fn connected(&self, a: NodeId, b: NodeId) -> bool {
        self.edges.keys().any(|(s, d, _)| (*s == a && *d == b) || (*s == b && *d == a))
    }

    /// Undirected, deduplicated node pairs `(min, max)` with at least one edge.
    pub fn undirected_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges.keys().map(|(s, d, _)| ((*s).min(*d), (*s).max(*d))).collect()
    }

    /// Nodes holding `relation` from `node`, reading converse edges too
    /// (a spouse edge stored in either direction, a parents edge stored as children).
    pub fn related(&self, node: NodeId, relation: &str) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let converse = converse_relation(relation);
        for (s, d, r) in self.edges.keys() {
            if *s == node && r == relation {
                out.insert(*d);
            }
            if *d == node && Some(r.as_str()) == converse {
                out.insert(*s);
            }
        }
        out
    }

    /// Removes every edge between `a` and `b` (both directions). Returns the count removed.
    pub fn remove_edges_between(&mut self, a: NodeId, b: NodeId) -> usize {
        let before = self.edges.len();
        self.edges
            .retain(|(s, d, _), _| !((*s == a && *d == b) || (*s == b && *d == a)));
        before - self.edges.len()
    }

    /// Sorted union of attribute keys present on any node.
    pub fn attribute_keys(&self) -> Vec<String> {
        let keys: BTreeSet<&String> = self.nodes.iter().flat_map(|n| n.attributes.keys()).collect();
        keys.into_iter().cloned().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Serialized form: nodes plus a sorted edge list; the name index is rebuilt on load.
#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: Vec<PersonNode>,
    edges: Vec<PersonEdge>,
}

impl From<PropertyGraph> for GraphRepr {
    fn from(g: PropertyGraph) -> Self {
        GraphRepr {
            nodes: g.nodes,
            edges: g.edges.into_values().collect(),
        }
    }
}

impl TryFrom<GraphRepr> for PropertyGraph {
    type Error = String;

    fn try_from(r: GraphRepr) -> std::result::Result<Self, String> {
        let mut g = PropertyGraph::new();
        for (i, n) in r.nodes.into_iter().enumerate() {
            if n.node_id != i {
                return Err(format!("node {} listed at position {i}", n.node_id));
            }
            for name in std::iter::once(&n.canonical_name).chain(&n.aliases) {
                let key = normalize_person(name);
                if key.is_empty() {
                    return Err(format!("node {i} has an empty name"));
                }
                if let Some(other) = g.name_index.insert(key, i) {
                    if other != i {
                        return Err(format!("nodes {other} and {i} share the name {name:?}"));
                    }
                }
            }
            g.nodes.push(n);
        }
        for e in r.edges {
            g.add_edge(e.src, e.dst, &e.relation, e.provenance, e.score)
                .map_err(|err| err.to_string())?;
        }
        Ok(g)
    }
}

/// Adds every PERSON mention as a node, person-to-person relations as edges
/// and every other person-rooted relation as an attribute of the subject.
pub fn build_graph(annotations: &[RecordAnnotations]) -> PropertyGraph {
    let mut g = PropertyGraph::new();
    for rec in annotations {
        for m in rec.mentions.iter().filter(|m| m.coarse_type == "PERSON") {
            // a mention that normalizes to nothing names nobody
            let _ = g.resolve_person(&m.surface);
        }
        for rel in &rec.relations {
            if rel.subject.coarse_type != "PERSON" {
                continue;
            }
            let Ok(src) = g.resolve_person(&rel.subject.surface) else {
                continue;
            };
            if is_person_person(&rel.relation) && rel.object.coarse_type == "PERSON" {
                if let Ok(dst) = g.resolve_person(&rel.object.surface) {
                    if src != dst {
                        g.add_edge(src, dst, &rel.relation, rel.provenance.into(), 1.0)
                            .expect("endpoints exist");
                    }
                }
            } else if let Some(attr) = relation_attribute(&rel.relation) {
                g.add_attribute(src, attr, &rel.object.surface).expect("node exists");
            }
        }
    }
    g
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn format_score(score: f64) -> String {
    format!("{score:.6}")
}

/// Edge-list TSV body: `src\tdst\trelation\tprovenance\tscore`, no header.
pub fn edgelist_string(g: &PropertyGraph) -> String {
    let mut out = String::new();
    for e in g.edges() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.src,
            e.dst,
            e.relation,
            e.provenance,
            format_score(e.score)
        ));
    }
    out
}

pub fn export_edgelist(g: &PropertyGraph, path: impl AsRef<Path>) -> Result<usize> {
    write_file(path.as_ref(), &edgelist_string(g))?;
    Ok(g.edge_count())
}

/// Attribute lines (node, key, value order) followed by edge lines.
pub fn triples_string(g: &PropertyGraph) -> (String, usize) {
    let mut out = String::new();
    let mut rows = 0;
    for n in g.nodes() {
        for (key, values) in &n.attributes {
            for v in values {
                out.push_str(&format!("person:{} {} {}\n", n.node_id, key, v));
                rows += 1;
            }
        }
    }
    for e in g.edges() {
        out.push_str(&format!("person:{} {} person:{}\n", e.src, e.relation, e.dst));
        rows += 1;
    }
    (out, rows)
}

pub fn export_triples(g: &PropertyGraph, path: impl AsRef<Path>) -> Result<usize> {
    let (text, rows) = triples_string(g);
    write_file(path.as_ref(), &text)?;
    Ok(rows)
}

/// One row per person: for each schema attribute the lexicographically first
/// value (or missing), and target 0 when the person has an observed
/// (non-predicted) edge, else 1.
pub fn to_feature_table(g: &PropertyGraph, schema: &[String]) -> Table {
    let columns = schema
        .iter()
        .map(|s| Column {
            name: s.clone(),
            kind: attribute_kind(s),
        })
        .collect();
    let mut linked = vec![false; g.node_count()];
    for e in g.edges().filter(|e| e.provenance != EdgeProvenance::Predicted) {
        linked[e.src] = true;
        linked[e.dst] = true;
    }
    let mut t = Table::new(columns);
    for n in g.nodes() {
        let cells = schema
            .iter()
            .map(|s| n.attributes.get(s).and_then(|v| v.iter().next().cloned()))
            .collect();
        t.push_row(n.node_id, cells, if linked[n.node_id] { 0 } else { 1 });
    }
    t
}

/// Attribute keys usable as model features: every key present, text kinds excluded.
pub fn default_schema(g: &PropertyGraph) -> Vec<String> {
    g.attribute_keys()
        .into_iter()
        .filter(|k| attribute_kind(k) != AttributeKind::Text)
        .collect()
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
