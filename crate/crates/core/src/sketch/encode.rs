use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::numcore::Matrix;
use crate::table::{AttributeKind, Table};

use super::{Result, SketchError};

/// One source feature: the attribute and either a category value or "numeric".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceFeature {
    pub attribute: String,
    pub value: String,
}

/// An encoded column is the mean of one or more source features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub members: Vec<SourceFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTable {
    pub matrix: Matrix,
    pub row_ids: Vec<usize>,
    pub column_meta: Vec<ColumnMeta>,
}

pub const NUMERIC: &str = "numeric";

/// Min-max scales numeric columns (constant or missing → 0), one-hot encodes
/// categorical columns (missing → all-zero group) and drops text columns.
pub fn scale_and_encode(table: &Table) -> Result<EncodedTable> {
    let n = table.rows();
    if n == 0 {
        return Err(SketchError::InvalidArgument("cannot encode an empty table".into()));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut meta = Vec::new();
    for (c, col) in table.columns().iter().enumerate() {
        match col.kind {
            AttributeKind::Text => {}
            AttributeKind::Numeric => {
                let vals: Vec<Option<f64>> = (0..n)
                    .map(|r| table.cell(r, c).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite()))
                    .collect();
                let present = vals.iter().flatten();
                let lo = present.clone().fold(f64::INFINITY, |a, &b| a.min(b));
                let hi = present.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let span = hi - lo;
                columns.push(
                    vals.iter()
                        .map(|v| match v {
                            Some(v) if span > 0.0 => (v - lo) / span,
                            _ => 0.0,
                        })
                        .collect(),
                );
                meta.push(ColumnMeta {
                    members: vec![SourceFeature {
                        attribute: col.name.clone(),
                        value: NUMERIC.into(),
                    }],
                });
            }
            AttributeKind::Categorical => {
                let cats: BTreeSet<&str> = (0..n).filter_map(|r| table.cell(r, c)).collect();
                for cat in cats {
                    columns.push(
                        (0..n)
                            .map(|r| if table.cell(r, c) == Some(cat) { 1.0 } else { 0.0 })
                            .collect(),
                    );
                    meta.push(ColumnMeta {
                        members: vec![SourceFeature {
                            attribute: col.name.clone(),
                            value: cat.to_string(),
                        }],
                    });
                }
            }
        }
    }
    let d = columns.len();
    let mut m = Matrix::zeros(n, d);
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(EncodedTable {
        matrix: m,
        row_ids: table.ids().to_vec(),
        column_meta: meta,
    })
}

/// Pearson correlation; 0 when either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Mean of the given source columns, summed in member order.
pub fn group_mean(m: &Matrix, members: &[usize]) -> Vec<f64> {
    (0..m.rows())
        .map(|i| members.iter().map(|&j| m[(i, j)]).sum::<f64>() / members.len() as f64)
        .collect()
}

/// Greedy agglomeration: repeatedly merges the two column groups whose mean
/// columns have the largest |Pearson| (ties to the lexicographically first
/// pair) until `target_dim` groups remain. The merged group takes the lower
/// position; members stay sorted by source column.
pub fn agglomerate_features(e: &EncodedTable, target_dim: usize) -> Result<EncodedTable> {
    if target_dim == 0 {
        return Err(SketchError::InvalidArgument("target_dim must be at least 1".into()));
    }
    let d = e.matrix.cols();
    if d <= target_dim {
        return Ok(e.clone());
    }
    let mut groups: Vec<Vec<usize>> = (0..d).map(|j| vec![j]).collect();
    let mut feats: Vec<Vec<f64>> = (0..d).map(|j| e.matrix.col(j)).collect();
    let mut corr: Vec<Vec<f64>> = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            corr[i][j] = pearson(&feats[i], &feats[j]).abs();
        }
    }
    while groups.len() > target_dim {
        let g = groups.len();
        let mut best = (0, 1, f64::NEG_INFINITY);
        for (i, row) in corr.iter().enumerate().take(g) {
            for (j, &c) in row.iter().enumerate().take(g).skip(i + 1) {
                if c > best.2 {
                    best = (i, j, c);
                }
            }
        }
        let (i, j, _) = best;
        let moved = groups.remove(j);
        groups[i].extend(moved);
        groups[i].sort_unstable();
        feats.remove(j);
        feats[i] = group_mean(&e.matrix, &groups[i]);
        corr.remove(j);
        for row in corr.iter_mut() {
            row.remove(j);
        }
        for k in 0..groups.len() {
            if k == i {
                continue;
            }
            let (a, b) = (k.min(i), k.max(i));
            corr[a][b] = pearson(&feats[a], &feats[b]).abs();
        }
    }
    let rows = e.matrix.rows();
    let mut m = Matrix::zeros(rows, groups.len());
    for (j, f) in feats.iter().enumerate() {
        for (r, v) in f.iter().enumerate() {
            m[(r, j)] = *v;
        }
    }
    let column_meta = groups
        .iter()
        .map(|g| ColumnMeta {
            members: g.iter().flat_map(|&j| e.column_meta[j].members.clone()).collect(),
        })
        .collect();
    Ok(EncodedTable {
        matrix: m,
        row_ids: e.row_ids.clone(),
        column_meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::rng;
    use crate::table::Column;
    use rand::Rng as _;

    fn table(cols: &[(&str, AttributeKind)], rows: &[&[Option<&str>]]) -> Table {
        let mut t = Table::new(
            cols.iter()
                .map(|(n, k)| Column {
                    name: n.to_string(),
                    kind: *k,
                })
                .collect(),
        );
        for (i, r) in rows.iter().enumerate() {
            t.push_row(i, r.iter().map(|c| c.map(String::from)).collect(), 0);
        }
        t
    }

    fn encoded(m: Matrix) -> EncodedTable {
        let cols = m.cols();
        EncodedTable {
            row_ids: (0..m.rows()).collect(),
            column_meta: (0..cols)
                .map(|j| ColumnMeta {
                    members: vec![SourceFeature {
                        attribute: format!("c{j}"),
                        value: NUMERIC.into(),
                    }],
                })
                .collect(),
            matrix: m,
        }
    }

    #[test]
    fn numeric_scaling() {
        use AttributeKind::*;
        let t = table(
            &[("age", Numeric), ("x", Numeric)],
            &[&[Some("2"), Some("5")], &[Some("4"), Some("5")], &[Some("6"), Some("5")]],
        );
        let e = scale_and_encode(&t).unwrap();
        assert_eq!(e.matrix.col(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(e.matrix.col(1), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn one_hot_and_text_drop() {
        use AttributeKind::*;
        let t = table(
            &[("religion", Categorical), ("email", Text)],
            &[
                &[Some("a"), Some("x@y.z")],
                &[Some("b"), None],
                &[Some("c"), None],
                &[Some("a"), None],
            ],
        );
        let e = scale_and_encode(&t).unwrap();
        assert_eq!(e.matrix.cols(), 3);
        for r in e.matrix.row_iter() {
            assert_eq!(r.iter().sum::<f64>(), 1.0);
        }
        let empty = Table::new(vec![]);
        assert!(scale_and_encode(&empty).is_err());
    }

    #[test]
    fn identity_when_small() {
        let mut r = rng::seeded(1);
        let m = Matrix::from_vec(10, 50, (0..500).map(|_| r.random::<f64>()).collect()).unwrap();
        let e = encoded(m);
        assert_eq!(agglomerate_features(&e, 100).unwrap(), e);
    }

    #[test]
    fn duplicates_merge_first() {
        let mut r = rng::seeded(2);
        let mut rows = Vec::new();
        for _ in 0..20 {
            let a: f64 = r.random();
            let b: f64 = r.random();
            let c: f64 = r.random();
            rows.push(vec![a, b, c, b]);
        }
        let e = encoded(Matrix::from_rows(&rows).unwrap());
        let out = agglomerate_features(&e, 3).unwrap();
        assert_eq!(out.column_meta[1].members.len(), 2);
        assert_eq!(out.column_meta[1].members[1].attribute, "c3");
        assert_eq!(out.matrix.col(1), e.matrix.col(1));
    }

    /// Recomputes every pairwise correlation from scratch at each merge.
    fn brute_force_groups(m: &Matrix, target: usize) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = (0..m.cols()).map(|j| vec![j]).collect();
        while groups.len() > target {
            let feats: Vec<Vec<f64>> = groups.iter().map(|g| group_mean(m, g)).collect();
            let mut best = (0, 1, f64::NEG_INFINITY);
            for i in 0..groups.len() {
                for j in i + 1..groups.len() {
                    let c = pearson(&feats[i], &feats[j]).abs();
                    if c > best.2 {
                        best = (i, j, c);
                    }
                }
            }
            let moved = groups.remove(best.1);
            groups[best.0].extend(moved);
            groups[best.0].sort_unstable();
        }
        groups
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut r = rng::seeded(30);
        let m = Matrix::from_vec(30, 12, (0..360).map(|_| r.random::<f64>()).collect()).unwrap();
        let e = encoded(m.clone());
        let out = agglomerate_features(&e, 5).unwrap();
        let oracle = brute_force_groups(&m, 5);
        let got: Vec<Vec<usize>> = out
            .column_meta
            .iter()
            .map(|c| c.members.iter().map(|s| s.attribute[1..].parse().unwrap()).collect())
            .collect();
        assert_eq!(got, oracle);
        for (j, g) in oracle.iter().enumerate() {
            assert_eq!(out.matrix.col(j), group_mean(&m, g));
        }
    }
}
