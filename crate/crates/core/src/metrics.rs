//! Evaluation of explainable partitions.
//!
//! - partition cost with cluster means as representatives
//! - WAD: size-weighted mean leaf depth
//! - WAES: size-weighted mean number of non-redundant path conditions
//! - NMI against the unrestricted partition

use crate::error::{invalid, Result};
use crate::tree::{sq_dist, Assignment, CenterSet, Condition, Cut, Dataset, NodeId, Side, Sketch, ThresholdTree};

/// Conditions on a root-to-leaf path together with which of them are
/// redundant.
///
/// For each dimension only the tightest `<=` (smallest threshold) and the
/// tightest `>` (largest threshold) condition matter; on equal thresholds
/// the one closest to the root is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub conditions: Vec<Condition>,
    pub redundant: Vec<bool>,
}

impl Explanation {
    pub fn new(conditions: Vec<Condition>) -> Self {
        let redundant = (0..conditions.len())
            .map(|i| {
                let c = conditions[i];
                conditions.iter().enumerate().any(|(j, o)| {
                    j != i
                        && o.dim == c.dim
                        && o.side == c.side
                        && match c.side {
                            Side::Le => o.theta < c.theta || (o.theta == c.theta && j < i),
                            Side::Gt => o.theta > c.theta || (o.theta == c.theta && j < i),
                        }
                })
            })
            .collect();
        Self { conditions, redundant }
    }

    /// Non-redundant conditions, in path order.
    pub fn reduced(&self) -> Vec<Condition> {
        self.conditions
            .iter()
            .zip(&self.redundant)
            .filter(|(_, &r)| !r)
            .map(|(c, _)| *c)
            .collect()
    }

    /// Number of non-redundant conditions.
    pub fn size(&self) -> usize {
        self.redundant.iter().filter(|&&r| !r).count()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// Whether `x` lies in the region described by the full path.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }
}

pub fn explanation(tree: &ThresholdTree, leaf: NodeId) -> Explanation {
    Explanation::new(tree.path(leaf))
}

/// Sum of squared distances of each point to the mean of its cluster.
pub fn partition_cost(data: &Dataset, labels: &Assignment) -> f64 {
    let (k, d) = (labels.k(), data.d());
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (x, &l) in data.rows().zip(labels.labels()) {
        counts[l] += 1;
        for (s, v) in sums[l * d..(l + 1) * d].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (l, &c) in counts.iter().enumerate() {
        if c > 0 {
            for s in &mut sums[l * d..(l + 1) * d] {
                *s /= c as f64;
            }
        }
    }
    data.rows()
        .zip(labels.labels())
        .map(|(x, &l)| sq_dist(x, &sums[l * d..(l + 1) * d]))
        .sum()
}

/// Partition cost of the tree's leaves, each represented by its point mean.
pub fn tree_cost(tree: &ThresholdTree, data: &Dataset) -> f64 {
    partition_cost(data, &tree.assignment())
}

fn weighted_by_leaf(tree: &ThresholdTree, f: impl Fn(NodeId) -> usize) -> f64 {
    let n = tree.n_points();
    if n == 0 {
        return 0.0;
    }
    let total: usize = tree
        .leaf_ids()
        .into_iter()
        .map(|leaf| tree.leaf(leaf).map_or(0, |(_, pts)| pts.len()) * f(leaf))
        .sum();
    total as f64 / n as f64
}

/// Weighted average depth: leaf depths weighted by cluster size.
pub fn wad(tree: &ThresholdTree) -> f64 {
    weighted_by_leaf(tree, |leaf| tree.depth(leaf))
}

/// Weighted average explanation size: non-redundant path lengths weighted
/// by cluster size.
pub fn waes(tree: &ThresholdTree) -> f64 {
    weighted_by_leaf(tree, |leaf| explanation(tree, leaf).size())
}

/// Normalized mutual information with arithmetic-mean normalization and
/// natural logarithms.
///
/// If both labelings are constant the result is 1; if exactly one is, 0.
pub fn nmi(a: &Assignment, b: &Assignment) -> Result<f64> {
    if a.len() != b.len() {
        return invalid(format!("assignments differ in length: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("nmi of empty assignments");
    }
    let n = a.len() as f64;
    let ka = a.labels().iter().max().map_or(0, |&m| m + 1);
    let kb = b.labels().iter().max().map_or(0, |&m| m + 1);
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let entropy = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&ca), entropy(&cb));
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    // identical up to relabeling; the float ratio below can land a ulp short
    let nonzero = joint.iter().filter(|&&c| c > 0).count();
    if nonzero == ca.iter().filter(|&&c| c > 0).count() && nonzero == cb.iter().filter(|&&c| c > 0).count() {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let c = joint[x * kb + y];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (ca[x] as f64 * cb[y] as f64)).ln();
            }
        }
    }
    Ok((mi / ((ha + hb) / 2.0)).clamp(0.0, 1.0))
}

/// The unrestricted partition a tree is compared against: every point
/// assigned to its nearest reference center, costed with cluster means.
#[derive(Debug, Clone)]
pub struct Reference {
    pub assignment: Assignment,
    pub cost: f64,
}

impl Reference {
    pub fn from_centers(data: &Dataset, centers: &CenterSet) -> Self {
        let assignment = Assignment::nearest(data, centers);
        let cost = partition_cost(data, &assignment);
        Self { assignment, cost }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub cost: f64,
    /// `cost` divided by the cost of the reference partition.
    pub normalized_cost: f64,
    pub wad: f64,
    pub waes: f64,
    pub max_depth: usize,
    pub nmi_vs_reference: f64,
    /// Per leaf, ordered by center id.
    pub leaf_sizes: Vec<usize>,
    pub leaf_depths: Vec<usize>,
    pub leaf_explanation_sizes: Vec<usize>,
}

impl MetricsReport {
    pub fn evaluate(tree: &ThresholdTree, data: &Dataset, reference: &Reference) -> Result<Self> {
        let cost = tree_cost(tree, data);
        let normalized_cost = if reference.cost > 0.0 {
            cost / reference.cost
        } else if cost == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        let leaves: Vec<NodeId> = (0..tree.k()).map(|c| tree.leaf_of_center(c)).collect();
        Ok(Self {
            cost,
            normalized_cost,
            wad: wad(tree),
            waes: waes(tree),
            max_depth: tree.max_depth(),
            nmi_vs_reference: nmi(&tree.assignment(), &reference.assignment)?,
            leaf_sizes: leaves
                .iter()
                .map(|&l| tree.leaf(l).map_or(0, |(_, p)| p.len()))
                .collect(),
            leaf_depths: leaves.iter().map(|&l| tree.depth(l)).collect(),
            leaf_explanation_sizes: leaves.iter().map(|&l| explanation(tree, l).size()).collect(),
        })
    }
}

/// `k` nested groups on the diagonal of `R^k`: group `i` (1-based) has
/// `4^i - 1` points, the `j`-th with every coordinate equal to `4^i + j`.
/// Centers are the group means, so the optimal unrestricted partition is
/// the grouping itself.
pub fn synthetic_d1_d4(k: usize) -> Result<(Dataset, CenterSet)> {
    if !(2..=6).contains(&k) {
        return invalid(format!("synthetic instance needs 2 <= k <= 6, got {k}"));
    }
    let mut values = Vec::new();
    let mut centers = Vec::with_capacity(k * k);
    for i in 1..=k {
        let base = 4f64.powi(i as i32);
        let size = (1usize << (2 * i)) - 1;
        for j in 1..=size {
            values.extend(std::iter::repeat_n(base + j as f64, k));
        }
        centers.extend(std::iter::repeat_n(base + base / 2.0, k));
    }
    let n = values.len() / k;
    Ok((Dataset::new(n, k, values)?, CenterSet::new(k, k, centers)?))
}

/// The four chain-shaped trees over [`synthetic_d1_d4`], one internal node
/// per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticTree {
    /// level `i` cuts dimension `i` just above group `i`: deep and verbose
    D1,
    /// level `i` cuts dimension 1 just below group `k - i + 1`: shallow and short
    D2,
    /// like D2 but on dimension `i`: shallow, verbose
    D3,
    /// like D1 but on dimension 1: deep, short
    D4,
}

/// Sketch of one of the [`SyntheticTree`] shapes for a `k`-group instance.
pub fn synthetic_sketch(k: usize, shape: SyntheticTree) -> Sketch {
    // thresholds 2^(2i+1) sit between group i and group i+1
    let gap = |i: usize| 2f64.powi(2 * i as i32 + 1);
    match shape {
        SyntheticTree::D1 | SyntheticTree::D4 => {
            let mut sketch = Sketch::Leaf(k - 1);
            for i in (1..k).rev() {
                let dim = if shape == SyntheticTree::D1 { i - 1 } else { 0 };
                sketch = Sketch::split(Cut::new(dim, gap(i)), Sketch::Leaf(i - 1), sketch);
            }
            sketch
        }
        SyntheticTree::D2 | SyntheticTree::D3 => {
            let mut sketch = Sketch::Leaf(0);
            for i in (1..k).rev() {
                let dim = if shape == SyntheticTree::D3 { i - 1 } else { 0 };
                sketch = Sketch::split(Cut::new(dim, gap(k - i)), sketch, Sketch::Leaf(k - i));
            }
            sketch
        }
    }
}
