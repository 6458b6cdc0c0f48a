use serde::Serialize;

use crate::numcore::{cosine, norm, Matrix};

use super::fd::frequent_directions;
use super::{Result, SketchConfig, SketchError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pick {
    pub id: usize,
    /// 1-based round of the outer loop that picked this row.
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Selection {
    /// Representatives in selection order.
    pub picks: Vec<Pick>,
    /// `(row id, representative id)` for every row removed as redundant,
    /// representatives themselves included.
    pub removed: Vec<(usize, usize)>,
    /// All-zero rows that cannot be ranked and were left out.
    pub dropped: Vec<usize>,
}

impl Selection {
    pub fn ids(&self) -> Vec<usize> {
        self.picks.iter().map(|p| p.id).collect()
    }
}

/// Flips `v` so its components sum to a non-negative value (first nonzero
/// component positive on a zero sum).
pub fn orient(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    let flip = if s != 0.0 {
        s < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Representative rows of one cluster. Each round sketches the remaining
/// rows; for every nonzero direction the closest remaining row by cosine is
/// picked and every remaining row within `theta` of it is removed. Rounds
/// repeat until no rows remain.
pub fn select_representatives(a: &Matrix, ids: &[usize], cfg: &SketchConfig) -> Result<Selection> {
    cfg.validate()?;
    if a.rows() == 0 || a.rows() != ids.len() {
        return Err(SketchError::InvalidArgument(format!(
            "{} rows with {} ids",
            a.rows(),
            ids.len()
        )));
    }
    let mut order: Vec<usize> = (0..a.rows()).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut out = Selection::default();
    let (zero, mut remaining): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&i| norm(a.row(i)) == 0.0);
    if remaining.is_empty() {
        out.picks.push(Pick { id: ids[zero[0]], round: 1 });
        out.removed.extend(zero.iter().map(|&i| (ids[i], ids[zero[0]])));
        return Ok(out);
    }
    out.dropped = zero.iter().map(|&i| ids[i]).collect();

    let mut round = 0;
    while !remaining.is_empty() {
        round += 1;
        let sub = a.select_rows(&remaining);
        let b = frequent_directions(&sub, cfg.sketch_rows)?;
        let floor = 1e-12 * sub.frobenius_norm();
        let mut directions: Vec<Vec<f64>> = b
            .row_iter()
            .filter(|v| norm(v) > floor)
            .map(|v| v.to_vec())
            .collect();
        directions.iter_mut().for_each(|v| orient(v));

        let mut picked_this_round = false;
        for v in &directions {
            if remaining.is_empty() {
                break;
            }
            let mut best = remaining[0];
            let mut best_c = f64::NEG_INFINITY;
            for &i in &remaining {
                let c = cosine(a.row(i), v)?;
                if c > best_c {
                    best_c = c;
                    best = i;
                }
            }
            prune(a, ids, best, round, cfg.theta, &mut remaining, &mut out)?;
            picked_this_round = true;
        }
        if !picked_this_round {
            // every direction shrank away: fall back to the lowest id
            let first = remaining[0];
            prune(a, ids, first, round, cfg.theta, &mut remaining, &mut out)?;
        }
    }
    Ok(out)
}

fn prune(
    a: &Matrix,
    ids: &[usize],
    rep: usize,
    round: usize,
    theta: f64,
    remaining: &mut Vec<usize>,
    out: &mut Selection,
) -> Result<()> {
    out.picks.push(Pick { id: ids[rep], round });
    let mut keep = Vec::with_capacity(remaining.len());
    for &i in remaining.iter() {
        if i == rep || cosine(a.row(i), a.row(rep))? >= theta {
            out.removed.push((ids[i], ids[rep]));
        } else {
            keep.push(i);
        }
    }
    *remaining = keep;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{rng, svd};
    use rand::Rng as _;

    fn cfg(ell: usize) -> SketchConfig {
        SketchConfig {
            sketch_rows: ell,
            ..SketchConfig::default()
        }
    }

    #[test]
    fn identical_rows_one_pick() {
        let a = Matrix::from_rows(&vec![vec![0.3, 1.0, 0.0]; 12]).unwrap();
        let ids: Vec<usize> = (100..112).collect();
        let s = select_representatives(&a, &ids, &cfg(8)).unwrap();
        assert_eq!(s.ids(), vec![100]);
        assert_eq!(s.removed.len(), 12);
    }

    #[test]
    fn orthogonal_rows_all_picked() {
        let a = Matrix::identity(3);
        let s = select_representatives(&a, &[0, 1, 2], &cfg(4)).unwrap();
        let mut got = s.ids();
        got.sort();
        assert_eq!(got, vec![0, 1, 2]);
        assert!(s.picks.iter().all(|p| p.round == 1));
    }

    #[test]
    fn zero_rows() {
        let a = Matrix::zeros(4, 3);
        let s = select_representatives(&a, &[7, 5, 9, 6], &cfg(4)).unwrap();
        assert_eq!(s.ids(), vec![5]);
        let a = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let s = select_representatives(&a, &[0, 1], &cfg(4)).unwrap();
        assert_eq!((s.ids(), s.dropped), (vec![1], vec![0]));
    }

    #[test]
    fn fully_shrunk_sketch_falls_back() {
        // four equal orthogonal rows fill a 2ℓ buffer with ℓ = 2 and shrink to nothing
        let a = Matrix::identity(4);
        let s = select_representatives(&a, &[0, 1, 2, 3], &cfg(2)).unwrap();
        assert_eq!(s.ids(), vec![0, 1, 2, 3]);
    }

    fn two_direction_cluster(seed: u64) -> Matrix {
        let mut r = rng::seeded(seed);
        let d1 = [1.0, 0.9, 0.0, 0.0, 0.1, 0.0];
        let d2 = [0.0, 0.1, 1.0, 0.8, 0.0, 0.2];
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let base = if i % 3 == 0 { &d2 } else { &d1 };
                let s = 0.5 + r.random::<f64>();
                base.iter().map(|x| s * x + 0.15 * r.random::<f64>()).collect()
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    /// Same loop, directions from a full SVD of the remaining rows.
    fn oracle(a: &Matrix, theta: f64, ell: usize) -> Vec<usize> {
        let mut remaining: Vec<usize> = (0..a.rows()).collect();
        let mut picks = Vec::new();
        while !remaining.is_empty() {
            let s = svd(&a.select_rows(&remaining)).unwrap();
            let mut dirs = Vec::new();
            for j in 0..s.singular_values.len().min(ell) {
                if s.singular_values[j] > 1e-12 {
                    let mut v = s.v.col(j);
                    orient(&mut v);
                    dirs.push(v);
                }
            }
            for v in dirs {
                if remaining.is_empty() {
                    break;
                }
                let best = *remaining
                    .iter()
                    .max_by(|&&x, &&y| {
                        let cx = cosine(a.row(x), &v).unwrap();
                        let cy = cosine(a.row(y), &v).unwrap();
                        cx.partial_cmp(&cy).unwrap().then(y.cmp(&x))
                    })
                    .unwrap();
                picks.push(best);
                remaining.retain(|&i| i != best && cosine(a.row(i), a.row(best)).unwrap() < theta);
            }
        }
        picks
    }

    #[test]
    fn two_direction_cluster_matches_full_svd_oracle() {
        let a = two_direction_cluster(40);
        let ids: Vec<usize> = (0..40).collect();
        let s = select_representatives(&a, &ids, &cfg(8)).unwrap();
        assert_eq!(s.ids(), oracle(&a, 0.85, 8));
    }

    #[test]
    fn coverage_and_scale_invariance() {
        let a = two_direction_cluster(41);
        let ids: Vec<usize> = (0..40).collect();
        let s = select_representatives(&a, &ids, &cfg(8)).unwrap();
        for &(row, rep) in &s.removed {
            assert!(cosine(a.row(row), a.row(rep)).unwrap() >= 0.85 || row == rep);
        }
        let scaled = select_representatives(&a.scale(3.5), &ids, &cfg(8)).unwrap();
        assert_eq!(scaled.ids(), s.ids());
    }
}
