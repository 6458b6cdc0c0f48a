//! Representative-set sampling by matrix sketching. Rows are scaled and
//! one-hot encoded, columns agglomerated, rows clustered with k-means (k by
//! the elbow rule), and each cluster reduced to the rows closest to its
//! frequent directions, dropping rows within a cosine threshold of a pick.

mod cluster;
mod encode;
mod fd;
mod select;

pub use cluster::{choose_k_elbow, elbow_of, kmeans, wcss_curve, KMeansResult, MAX_ITERATIONS};
pub use encode::{
    agglomerate_features, group_mean, pearson, scale_and_encode, ColumnMeta, EncodedTable, SourceFeature, NUMERIC,
};
pub use fd::frequent_directions;
pub use select::{orient, select_representatives, Pick, Selection};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{svd, Matrix, NumError};
use crate::table::Table;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, SketchError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Rows ℓ of each frequent-directions sketch.
    pub sketch_rows: usize,
    pub theta: f64,
    pub target_dim: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        SketchConfig {
            sketch_rows: 8,
            theta: 0.85,
            target_dim: 100,
            k_max: 10,
            seed: 0,
        }
    }
}

impl SketchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sketch_rows < 2 {
            return Err(SketchError::InvalidArgument("sketch_rows must be at least 2".into()));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(SketchError::InvalidArgument(format!("theta {} outside (0,1)", self.theta)));
        }
        if self.target_dim == 0 {
            return Err(SketchError::InvalidArgument("target_dim must be at least 1".into()));
        }
        if self.k_max < 2 {
            return Err(SketchError::InvalidArgument("k_max must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledRow {
    pub person_id: usize,
    pub cluster: usize,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedRow {
    pub person_id: usize,
    pub x: f64,
    pub y: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub k: usize,
    /// Cluster of each input row, in table order.
    pub clusters: Vec<usize>,
    pub selected: Vec<SampledRow>,
    pub projection: Vec<ProjectedRow>,
    /// Per cluster, the selection details keyed by person id.
    pub selections: Vec<Selection>,
    pub encoded: EncodedTable,
}

/// Coordinates of the rows on the top two principal directions of `m`.
pub fn pca_2d(m: &Matrix) -> Result<Vec<(f64, f64)>> {
    let n = m.rows();
    let mean = m.column_means();
    let mut centered = m.clone();
    for i in 0..n {
        for (v, mu) in centered.row_mut(i).iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    if m.cols() == 0 {
        return Ok(vec![(0.0, 0.0); n]);
    }
    let s = svd(&centered)?;
    let k = s.singular_values.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = centered.row(i);
        let mut coord = [0.0; 2];
        for (c, slot) in coord.iter_mut().enumerate().take(k.min(2)) {
            if s.singular_values[c] > 0.0 {
                let mut v = s.v.col(c);
                orient(&mut v);
                *slot = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            }
        }
        out.push((coord[0], coord[1]));
    }
    Ok(out)
}

/// The full sampling pipeline over a person table.
pub fn representative_sample(table: &Table, cfg: &SketchConfig) -> Result<SampleResult> {
    cfg.validate()?;
    let encoded = agglomerate_features(&scale_and_encode(table)?, cfg.target_dim)?;
    let x = &encoded.matrix;
    let n = x.rows();
    let k = if n == 1 {
        1
    } else {
        choose_k_elbow(x, cfg.k_max.min(n).max(2), cfg.seed)?
    };
    let km = kmeans(x, k, cfg.seed)?;
    let mut selected = Vec::new();
    let mut selections = Vec::new();
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| km.assignments[i] == c).collect();
        let ids: Vec<usize> = members.iter().map(|&i| encoded.row_ids[i]).collect();
        let sel = select_representatives(&x.select_rows(&members), &ids, cfg)?;
        selected.extend(sel.picks.iter().map(|p| SampledRow {
            person_id: p.id,
            cluster: c,
            round: p.round,
        }));
        selections.push(sel);
    }
    let chosen: std::collections::BTreeSet<usize> = selected.iter().map(|s| s.person_id).collect();
    let projection = pca_2d(x)?
        .into_iter()
        .zip(&encoded.row_ids)
        .map(|((px, py), &id)| ProjectedRow {
            person_id: id,
            x: px,
            y: py,
            selected: chosen.contains(&id),
        })
        .collect();
    Ok(SampleResult {
        k,
        clusters: km.assignments,
        selected,
        projection,
        selections,
        encoded,
    })
}

pub fn samples_csv(res: &SampleResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["person_id", "cluster", "selection_round"]).expect("in-memory write");
    for s in &res.selected {
        w.write_record([s.person_id.to_string(), s.cluster.to_string(), s.round.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn projection_csv(res: &SampleResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["person_id", "x", "y", "selected_flag"]).expect("in-memory write");
    for p in &res.projection {
        w.write_record([
            p.person_id.to_string(),
            format!("{:.6}", p.x),
            format!("{:.6}", p.y),
            u8::from(p.selected).to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{AttributeKind, Column};

    fn one_column(values: &[&str]) -> Table {
        let mut t = Table::new(vec![Column {
            name: "religion".into(),
            kind: AttributeKind::Categorical,
        }]);
        for (i, v) in values.iter().enumerate() {
            t.push_row(i, vec![Some(v.to_string())], 1);
        }
        t
    }

    #[test]
    fn single_row_selected() {
        let res = representative_sample(&one_column(&["a"]), &SketchConfig::default()).unwrap();
        assert_eq!(res.selected.len(), 1);
        assert_eq!(res.selected[0].person_id, 0);
    }

    #[test]
    fn repeated_row_gives_one() {
        let res = representative_sample(&one_column(&["a"; 100]), &SketchConfig::default()).unwrap();
        assert_eq!(res.k, 1);
        assert_eq!(res.selected.len(), 1);
        assert_eq!(res.projection.len(), 100);
    }

    #[test]
    fn csv_shapes() {
        let res = representative_sample(&one_column(&["a", "b", "a", "c"]), &SketchConfig::default()).unwrap();
        let s = samples_csv(&res);
        assert!(s.starts_with("person_id,cluster,selection_round\n"));
        assert_eq!(projection_csv(&res).lines().count(), 5);
    }

    #[test]
    fn config_validation() {
        let bad = SketchConfig {
            theta: 1.0,
            ..SketchConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
