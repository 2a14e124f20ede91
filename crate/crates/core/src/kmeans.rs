//! Unrestricted reference solution: k-means++ seeding and Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::tree::{nearest_center, sq_dist, Assignment, CenterSet, Dataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LloydConfig {
    pub max_iter: usize,
    /// Stop once the relative cost improvement of an iteration drops below this.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for LloydConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            rel_tol: 1e-4,
            seed: 0,
        }
    }
}

impl LloydConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return invalid("max_iter must be >= 1");
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return invalid("rel_tol must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LloydResult {
    pub centers: CenterSet,
    pub assignment: Assignment,
    /// Sum of squared distances of every point to its assigned center.
    pub cost: f64,
    pub iterations: usize,
    /// Cost after the initial assignment and after every iteration.
    pub cost_history: Vec<f64>,
}

/// k-means++ seeding: the first center is a uniformly random row, each
/// further one a row drawn with probability proportional to its squared
/// distance to the closest center chosen so far.
pub fn kmeanspp_init(data: &Dataset, k: usize, seed: u64) -> Result<CenterSet> {
    if k == 0 || k > data.n() {
        return invalid(format!("k = {k} must be in 1..={}", data.n()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];

    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut min_d2: Vec<f64> = data.rows().map(|x| sq_dist(x, data.point(first))).collect();

    while chosen.len() < k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total weight")
        } else {
            // every remaining row duplicates a chosen center
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        taken[pick] = true;
        let c = data.point(pick);
        for (i, x) in data.rows().enumerate() {
            let d = sq_dist(x, c);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }

    let rows: Vec<Vec<f64>> = chosen.iter().map(|&i| data.point(i).to_vec()).collect();
    CenterSet::from_rows(&rows)
}

fn assign(data: &Dataset, centers: &CenterSet) -> (Vec<usize>, Vec<f64>, f64) {
    let mut labels = Vec::with_capacity(data.n());
    let mut dists = Vec::with_capacity(data.n());
    for x in data.rows() {
        let (c, d) = nearest_center(x, centers, 0..centers.k());
        labels.push(c);
        dists.push(d);
    }
    let cost = dists.iter().sum();
    (labels, dists, cost)
}

/// Lloyd iterations from `init` until the relative improvement falls below
/// `cfg.rel_tol` or `cfg.max_iter` is reached.
///
/// A center that ends an iteration with no points is moved onto the point
/// farthest from its assigned center.
pub fn lloyd(data: &Dataset, init: &CenterSet, cfg: &LloydConfig) -> Result<LloydResult> {
    cfg.validate()?;
    if init.d() != data.d() {
        return invalid(format!("centers have dimension {}, data has {}", init.d(), data.d()));
    }
    let (k, d) = (init.k(), data.d());
    let mut centers = init.clone();
    let (mut labels, mut dists, mut cost) = assign(data, &centers);
    let mut history = vec![cost];
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (x, &c) in data.rows().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut used = vec![false; data.n()];
        for c in 0..k {
            if counts[c] > 0 {
                for s in &mut sums[c * d..(c + 1) * d] {
                    *s /= counts[c] as f64;
                }
            } else {
                let far = (0..data.n())
                    .filter(|&i| !used[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k <= n");
                used[far] = true;
                sums[c * d..(c + 1) * d].copy_from_slice(data.point(far));
            }
        }
        centers = CenterSet::new(k, d, sums)?;
        let prev = cost;
        (labels, dists, cost) = assign(data, &centers);
        history.push(cost);
        debug_assert!(cost <= prev * (1.0 + 1e-12) + 1e-12, "lloyd cost increased");
        if prev <= 0.0 || (prev - cost) / prev < cfg.rel_tol {
            break;
        }
    }

    Ok(LloydResult {
        assignment: Assignment::new(labels, k)?,
        centers,
        cost,
        iterations,
        cost_history: history,
    })
}

/// Seeds with k-means++ and runs Lloyd; `cfg.seed` drives the seeding.
pub fn fit(data: &Dataset, k: usize, cfg: &LloydConfig) -> Result<LloydResult> {
    let init = kmeanspp_init(data, k, cfg.seed)?;
    lloyd(data, &init, cfg)
}

/// Sum over all points of the squared distance to the nearest center.
pub fn kmeans_cost(data: &Dataset, centers: &CenterSet) -> Result<f64> {
    let all: Vec<usize> = (0..centers.k()).collect();
    let points: Vec<usize> = (0..data.n()).collect();
    kmeans_cost_subset(data, &points, centers, &all)
}

/// [`kmeans_cost`] restricted to the given point ids and center ids.
pub fn kmeans_cost_subset(data: &Dataset, points: &[usize], centers: &CenterSet, center_ids: &[usize]) -> Result<f64> {
    if center_ids.is_empty() {
        return invalid("cost needs at least one center");
    }
    if data.d() != centers.d() {
        return invalid("dataset and centers differ in dimension");
    }
    Ok(points
        .iter()
        .map(|&p| nearest_center(data.point(p), centers, center_ids.iter().copied()).1)
        .sum())
}
