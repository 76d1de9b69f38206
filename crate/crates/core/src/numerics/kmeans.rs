//! Lloyd's k-means with k-means++ seeding.

use nalgebra::DMatrix;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::util::{derive_seed, seeded_rng, Rng};

#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            max_iter: 300,
            tol: 1e-6,
            restarts: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// k × d
    pub centroids: DMatrix<f64>,
    /// Member of each cluster closest to its centroid; `None` for an empty cluster.
    pub medoids: Vec<Option<usize>>,
    /// Within-cluster SSE after each assignment step.
    pub sse_trace: Vec<f64>,
}

impl KMeansResult {
    pub fn sse(&self) -> f64 {
        *self.sse_trace.last().unwrap_or(&f64::INFINITY)
    }

    pub fn has_empty_cluster(&self) -> bool {
        self.medoids.iter().any(Option::is_none)
    }
}

struct Rows {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Rows {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster the rows of `points` (N × d) into `k` groups.
pub fn kmeans(points: &DMatrix<f64>, k: usize, config: &KMeansConfig) -> Result<KMeansResult> {
    let (n, d) = points.shape();
    if n == 0 || d == 0 {
        return Err(Error::Invalid("k-means on empty input".into()));
    }
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("k = {k} outside 1..={n}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite k-means input".into()));
    }
    let rows = Rows {
        data: points.transpose().as_slice().to_vec(),
        n,
        d,
    };
    let mut best: Option<KMeansResult> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = seeded_rng(derive_seed(config.seed, &format!("kmeans/{restart}")));
        let result = lloyd(&rows, k, config, &mut rng);
        if best.as_ref().is_none_or(|b| result.sse() < b.sse()) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(rows: &Rows, k: usize, rng: &mut Rng) -> Vec<f64> {
    let (n, d) = (rows.n, rows.d);
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(rows.row(first));
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(rows.row(i), rows.row(first))).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in dist.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every point coincides with a center: fall back to an unused index
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        centers.extend_from_slice(rows.row(next));
        let c = &centers[centers.len() - d..];
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(rows.row(i), c));
        }
    }
    centers
}

fn assign(rows: &Rows, centers: &[f64], k: usize, assignments: &mut [usize]) -> f64 {
    let d = rows.d;
    let mut sse = 0.0;
    for (i, slot) in assignments.iter_mut().enumerate() {
        let x = rows.row(i);
        let mut best = (f64::INFINITY, 0);
        for c in 0..k {
            let dist = sq_dist(x, &centers[c * d..(c + 1) * d]);
            if dist < best.0 {
                best = (dist, c);
            }
        }
        *slot = best.1;
        sse += best.0;
    }
    sse
}

fn lloyd(rows: &Rows, k: usize, config: &KMeansConfig, rng: &mut Rng) -> KMeansResult {
    let (n, d) = (rows.n, rows.d);
    let mut centers = plus_plus(rows, k, rng);
    let mut assignments = vec![0usize; n];
    let mut trace = Vec::new();
    let mut previous: Option<Vec<usize>> = None;
    for _ in 0..config.max_iter.max(1) {
        let sse = assign(rows, &centers, k, &mut assignments);
        let prev_sse = trace.last().copied();
        trace.push(sse);
        let unchanged = previous.as_deref() == Some(&assignments[..]);
        let small = prev_sse.is_some_and(|p: f64| p - sse <= config.tol * p.max(f64::MIN_POSITIVE));
        if unchanged || small {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(rows.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous center
            if counts[c] > 0 {
                for (dst, s) in centers[c * d..(c + 1) * d].iter_mut().zip(&sums[c * d..(c + 1) * d]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        previous = Some(assignments.clone());
    }

    let mut medoids: Vec<Option<(f64, usize)>> = vec![None; k];
    for (i, &c) in assignments.iter().enumerate() {
        let dist = sq_dist(rows.row(i), &centers[c * d..(c + 1) * d]);
        if medoids[c].is_none_or(|(b, _)| dist < b) {
            medoids[c] = Some((dist, i));
        }
    }
    KMeansResult {
        assignments,
        centroids: DMatrix::from_row_slice(k, d, &centers),
        medoids: medoids.into_iter().map(|m| m.map(|(_, i)| i)).collect(),
        sse_trace: trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(xs.len(), 1, xs)
    }

    /// Best 2-partition of points on a line by exhaustive enumeration.
    fn brute_force_two(xs: &[f64]) -> Vec<usize> {
        let n = xs.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1..(1u32 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut sse = 0.0;
            for c in 0..2 {
                let members: Vec<f64> = (0..n).filter(|&i| labels[i] == c).map(|i| xs[i]).collect();
                let m = members.iter().sum::<f64>() / members.len() as f64;
                sse += members.iter().map(|x| (x - m).powi(2)).sum::<f64>();
            }
            if sse < best.0 {
                best = (sse, labels);
            }
        }
        best.1
    }

    #[test]
    fn two_clusters_on_a_line() {
        let xs = [0.0, 0.1, 10.0, 10.1];
        let oracle = brute_force_two(&xs);
        let r = kmeans(&line(&xs), 2, &KMeansConfig::new(3)).unwrap();
        // same partition up to label swap
        let same = |a: usize, b: usize| (r.assignments[a] == r.assignments[b]) == (oracle[a] == oracle[b]);
        assert!((0..4).all(|a| (0..4).all(|b| same(a, b))));
        let mut medoids: Vec<usize> = r.medoids.iter().map(|m| m.unwrap()).collect();
        medoids.sort();
        assert!(medoids[0] < 2 && medoids[1] >= 2);
    }

    #[test]
    fn k_equals_n_selects_every_point() {
        let xs = [0.0, 1.0, 2.5, 7.0, -3.0];
        let r = kmeans(&line(&xs), 5, &KMeansConfig::new(0)).unwrap();
        let mut medoids: Vec<usize> = r.medoids.iter().map(|m| m.unwrap()).collect();
        medoids.sort();
        assert_eq!(medoids, vec![0, 1, 2, 3, 4]);
        assert!(r.sse() < 1e-24);
    }

    #[test]
    fn deterministic_and_monotone() {
        let pts = DMatrix::from_fn(60, 3, |i, j| ((i * 7 + j * 13) % 17) as f64 + 0.1 * (i as f64).sin());
        let a = kmeans(&pts, 5, &KMeansConfig::new(9)).unwrap();
        let b = kmeans(&pts, 5, &KMeansConfig::new(9)).unwrap();
        assert_eq!(a.assignments, b.assignments);
        for w in a.sse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(kmeans(&line(&[1.0, 2.0]), 0, &KMeansConfig::new(0)).is_err());
        assert!(kmeans(&line(&[1.0, 2.0]), 3, &KMeansConfig::new(0)).is_err());
        assert!(kmeans(&DMatrix::zeros(0, 2), 1, &KMeansConfig::new(0)).is_err());
    }
}
