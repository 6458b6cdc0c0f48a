use rand::Rng as _;

use crate::numcore::{rng, Matrix};

use super::{Result, SketchError};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lower cluster index.
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(x: &Matrix, k: usize, r: &mut rng::Rng) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![r.random_range(0..n)];
    let mut d2: Vec<f64> = x.row_iter().map(|p| sq_dist(p, x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // guard against rounding landing on an already-chosen point
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            r.random_range(0..n)
        };
        chosen.push(next);
        for (i, p) in x.row_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

/// Gives every empty cluster the point farthest from its own centroid,
/// taken from clusters that can spare one.
fn fill_empty(x: &Matrix, centroids: &mut Matrix, assignments: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in x.row_iter().enumerate() {
            if sizes[assignments[i]] < 2 {
                continue;
            }
            let d = sq_dist(p, centroids.row(assignments[i]));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let p = far.expect("k <= rows leaves a cluster with two points");
        assignments[p] = empty;
        centroids.row_mut(empty).copy_from_slice(x.row(p));
    }
}

fn means(x: &Matrix, assignments: &[usize], k: usize) -> Matrix {
    let mut c = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (i, p) in x.row_iter().enumerate() {
        let a = assignments[i];
        counts[a] += 1;
        for (o, v) in c.row_mut(a).iter_mut().zip(p) {
            *o += v;
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n > 0 {
            for v in c.row_mut(j) {
                *v /= n as f64;
            }
        }
    }
    c
}

/// Lloyd iterations from a seeded k-means++ start, until the assignment is
/// a fixpoint or `MAX_ITERATIONS` is reached. Every cluster is nonempty.
pub fn kmeans(x: &Matrix, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(SketchError::InvalidArgument(format!("k = {k} with {n} rows")));
    }
    let mut r = rng::seeded(seed);
    let mut centroids = plus_plus_init(x, k, &mut r);
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next: Vec<usize> = x.row_iter().map(|p| nearest(p, &centroids).0).collect();
        fill_empty(x, &mut centroids, &mut next, k);
        let changed = next != assignments;
        assignments = next;
        centroids = means(x, &assignments, k);
        if !changed {
            break;
        }
    }
    let inertia = x
        .row_iter()
        .zip(&assignments)
        .map(|(p, &a)| sq_dist(p, centroids.row(a)))
        .sum();
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        iterations,
    })
}

/// Within-cluster sum of squares for k = 1..=k_max (index 0 holds k = 1).
pub fn wcss_curve(x: &Matrix, k_max: usize, seed: u64) -> Result<Vec<f64>> {
    (1..=k_max).map(|k| Ok(kmeans(x, k, seed)?.inertia)).collect()
}

/// Elbow of a WCSS curve: the k in 2..k_max−1 maximizing the second
/// difference, 1 when W(1) is numerically zero, 2 when k_max is 2.
pub fn elbow_of(w: &[f64]) -> usize {
    if w.is_empty() || w[0].abs() <= 1e-9 {
        return 1;
    }
    if w.len() <= 2 {
        return w.len();
    }
    let mut best = (2, f64::NEG_INFINITY);
    for k in 2..w.len() {
        // w[k-1] is W(k)
        let second = w[k - 2] - 2.0 * w[k - 1] + w[k];
        if second > best.1 {
            best = (k, second);
        }
    }
    best.0
}

pub fn choose_k_elbow(x: &Matrix, k_max: usize, seed: u64) -> Result<usize> {
    if k_max < 2 {
        return Err(SketchError::InvalidArgument(format!("k_max must be at least 2, got {k_max}")));
    }
    if x.rows() < k_max {
        return Err(SketchError::InvalidArgument(format!(
            "{} rows cannot form {k_max} clusters",
            x.rows()
        )));
    }
    Ok(elbow_of(&wcss_curve(x, k_max, seed)?))
}
