//! Helpers shared by the integration tests: random instances, a brute-force
//! scoring oracle written independently of the library, and a structural
//! checker for built trees.

#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use shallowtree::kmeans::fit;
use shallowtree::metrics::{wad, waes};
use shallowtree::{CenterSet, Condition, Cut, Dataset, LloydConfig, Node, Side, ThresholdTree};

pub fn iris_path() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv").to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Uniform,
    Mixture,
}

pub struct Instance {
    pub data: Dataset,
    pub centers: CenterSet,
    pub shape: Shape,
}

/// Random instance with `n <= 200`, `d <= 5`, `2 <= k <= 8`. Odd seeds use
/// Lloyd centers, even seeds use distinct data rows as centers.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(10..=200);
        let d = rng.random_range(1..=5);
        let k = rng.random_range(2..=8usize.min(n));
        let shape = if rng.random::<bool>() {
            Shape::Uniform
        } else {
            Shape::Mixture
        };
        let rows = match shape {
            Shape::Uniform => (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
                .collect::<Vec<Vec<f64>>>(),
            Shape::Mixture => {
                let modes: Vec<Vec<f64>> = (0..k)
                    .map(|_| (0..d).map(|_| rng.random_range(-20.0..20.0)).collect())
                    .collect();
                let sigma = rng.random_range(0.5..4.0);
                let noise = Normal::new(0.0, sigma).unwrap();
                (0..n)
                    .map(|_| {
                        let m = &modes[rng.random_range(0..k)];
                        m.iter().map(|&c| c + noise.sample(&mut rng)).collect()
                    })
                    .collect()
            }
        };
        let data = Dataset::from_rows(&rows).unwrap();
        let centers = if seed % 2 == 1 {
            match fit(&data, k, &LloydConfig::with_seed(seed)) {
                Ok(r) => r.centers,
                Err(_) => continue,
            }
        } else {
            let picked: Vec<Vec<f64>> = sample(&mut rng, n, k).iter().map(|i| rows[i].clone()).collect();
            CenterSet::from_rows(&picked).unwrap()
        };
        if has_duplicate_centers(&centers) {
            continue;
        }
        return Instance { data, centers, shape };
    }
}

fn has_duplicate_centers(centers: &CenterSet) -> bool {
    (0..centers.k()).any(|a| (0..a).any(|b| centers.center(a) == centers.center(b)))
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center among `ids`, lower id on ties.
pub fn nearest(x: &[f64], centers: &CenterSet, ids: &[usize]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for &c in ids {
        let dist = sq(x, centers.center(c));
        if dist < best.1 || (dist == best.1 && c < best.0) {
            best = (c, dist);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct OracleScore {
    pub cut: Cut,
    pub induced: f64,
    pub current: f64,
    pub price: f64,
    pub mistakes: usize,
    pub points_left: usize,
    pub centers_left: usize,
}

/// Scores every candidate cut at a node by direct recomputation.
pub fn oracle_scores(data: &Dataset, centers: &CenterSet, points: &[usize], ids: &[usize]) -> Vec<OracleScore> {
    let own: Vec<(usize, f64)> = points.iter().map(|&p| nearest(data.point(p), centers, ids)).collect();
    let current: f64 = own.iter().map(|o| o.1).sum();
    let mut out = Vec::new();
    for dim in 0..data.d() {
        let cmin = ids.iter().map(|&c| centers.value(c, dim)).fold(f64::INFINITY, f64::min);
        let cmax = ids
            .iter()
            .map(|&c| centers.value(c, dim))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut values: Vec<f64> = points
            .iter()
            .map(|&p| data.value(p, dim))
            .chain(ids.iter().map(|&c| centers.value(c, dim)))
            .filter(|&v| cmin <= v && v < cmax)
            .collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for theta in values {
            let left: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&c| centers.value(c, dim) <= theta)
                .collect();
            let right: Vec<usize> = ids.iter().copied().filter(|&c| centers.value(c, dim) > theta).collect();
            let mut induced = 0.0;
            let mut mistakes = 0;
            let mut points_left = 0;
            for (&p, &(own, _)) in points.iter().zip(&own) {
                let x = data.point(p);
                let goes_left = x[dim] <= theta;
                points_left += usize::from(goes_left);
                induced += nearest(x, centers, if goes_left { &left } else { &right }).1;
                if (centers.value(own, dim) <= theta) != goes_left {
                    mistakes += 1;
                }
            }
            let price = if current < 1e-12 {
                if induced < 1e-12 {
                    1.0
                } else {
                    1e300
                }
            } else {
                induced / current
            };
            out.push(OracleScore {
                cut: Cut::new(dim, theta),
                induced,
                current,
                price,
                mistakes,
                points_left,
                centers_left: left.len(),
            });
        }
    }
    out
}

/// Idealized weighted depth, written from the definition.
pub fn oracle_wad(n: f64, k: usize, r_p: f64, r_c: f64) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let mut kl = (k as f64 * r_c + 0.5).floor() as usize;
    kl = kl.max(1).min(k - 1);
    let nl = n * r_p;
    let nr = n - nl;
    1.0 + (nl * oracle_wad(nl, kl, r_p, r_c) + nr * oracle_wad(nr, k - kl, r_p, r_c)) / n
}

/// Depth term of a candidate given the path above the node.
pub fn oracle_dexp(s: &OracleScore, n_points: usize, n_centers: usize, path: &[Condition]) -> f64 {
    if n_points == 0 {
        return 0.0;
    }
    let n = n_points as f64;
    let frac_left = s.points_left as f64 / n;
    let r_p = frac_left.max(1.0 / (n + 1.0)).min(n / (n + 1.0));
    let w = oracle_wad(n, n_centers, r_p, s.centers_left as f64 / n_centers as f64);
    let le = path.iter().any(|c| c.dim == s.cut.dim && c.side == Side::Le);
    let gt = path.iter().any(|c| c.dim == s.cut.dim && c.side == Side::Gt);
    w - if le { frac_left } else { 0.0 } - if gt { 1.0 - frac_left } else { 0.0 }
}

/// First index whose key is within relative `1e-12` of the minimum.
pub fn oracle_argmin(keys: &[f64]) -> usize {
    let m = keys.iter().copied().fold(f64::INFINITY, f64::min);
    keys.iter().position(|&v| v <= m + 1e-12 * m.abs()).unwrap()
}

/// Points and centers that reach `id`.
pub fn subtree(tree: &ThresholdTree, id: usize) -> (Vec<usize>, Vec<usize>) {
    let mut points = Vec::new();
    let mut centers = Vec::new();
    let mut stack = vec![id];
    while let Some(v) = stack.pop() {
        match tree.node(v) {
            Node::Leaf { center, points: p } => {
                centers.push(*center);
                points.extend_from_slice(p);
            }
            Node::Internal { left, right, .. } => {
                stack.push(*right);
                stack.push(*left);
            }
        }
    }
    points.sort_unstable();
    centers.sort_unstable();
    (points, centers)
}

pub fn internal_nodes(tree: &ThresholdTree) -> Vec<usize> {
    (0..tree.nodes().len())
        .filter(|&i| matches!(tree.node(i), Node::Internal { .. }))
        .collect()
}

/// Structural invariants every built tree must satisfy; returns a message
/// for the first violation.
pub fn check_structure(tree: &ThresholdTree, data: &Dataset, k: usize) -> Result<(), String> {
    let leaves = tree.leaf_ids();
    if leaves.len() != k || tree.k() != k {
        return Err(format!("{} leaves for k = {k}", leaves.len()));
    }
    let mut seen_center = vec![false; k];
    let mut seen_point = vec![false; data.n()];
    for &leaf in &leaves {
        let (c, pts) = tree.leaf(leaf).ok_or("leaf id is not a leaf")?;
        if c >= k || std::mem::replace(&mut seen_center[c], true) {
            return Err(format!("center {c} repeated or out of range"));
        }
        if tree.leaf_of_center(c) != leaf {
            return Err(format!("leaf_of_center({c}) is stale"));
        }
        for &p in pts {
            if std::mem::replace(&mut seen_point[p], true) {
                return Err(format!("point {p} stored twice"));
            }
            if tree.route(data.point(p)) != leaf {
                return Err(format!("point {p} routes elsewhere"));
            }
        }
    }
    if seen_point.iter().any(|s| !s) {
        return Err("some point is in no leaf".into());
    }
    let (es, wd, md) = (waes(tree), wad(tree), tree.max_depth());
    if !(es <= wd + 1e-12 && wd <= md as f64 + 1e-12 && md < k.max(1)) {
        return Err(format!(
            "expected waes <= wad <= max depth <= k-1, got {es} / {wd} / {md} / k={k}"
        ));
    }
    Ok(())
}
