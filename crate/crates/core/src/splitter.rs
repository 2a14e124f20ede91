//! Cut machinery for a single tree node.
//!
//! A [`NodeView`] holds the points and reference centers that reach a node,
//! plus one ordering of each per dimension. From it we enumerate one
//! representative per class of equivalent cuts and score all of them in a
//! single sweep per dimension.
//!
//! Candidate thresholds are observed coordinate values: the cut `(i, v)`
//! sends every point and center with `x[i] <= v` left. Candidates are
//! returned sorted by `(dim, theta)`, which is also the tie-break order used
//! when selecting among equal scores.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tree::{sq_dist, CenterSet, Cut, Dataset, Partition};

/// Below this cost a node is treated as already perfectly clustered.
pub const ZERO_COST: f64 = 1e-12;

/// Price assigned to a cut that creates cost at a zero-cost node.
pub const PRICE_SENTINEL: f64 = 1e300;

/// Relative tolerance under which two scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

const MIN_WORK_TO_PARALLELIZE: usize = 1 << 16;

/// Points and centers reaching a node, with per-dimension orderings.
///
/// Orderings store local indices (positions in [`NodeView::points`] and
/// [`NodeView::centers`]) sorted by coordinate value, ties by id.
#[derive(Debug, Clone)]
pub struct NodeView<'a> {
    data: &'a Dataset,
    centers: &'a CenterSet,
    points: Vec<usize>,
    center_ids: Vec<usize>,
    point_order: Vec<Vec<u32>>,
    center_order: Vec<Vec<u32>>,
}

/// Score of one candidate cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub cut: Cut,
    /// Cost after the cut, each point matched to its nearest center on its own side.
    pub induced_cost: f64,
    /// `induced_cost / current_cost`, see [`price`] for the zero-cost case.
    pub price: f64,
    /// Points whose nearest node center lands on the other side.
    pub mistakes: usize,
    pub points_left: usize,
    pub points_right: usize,
    pub centers_left: usize,
    pub centers_right: usize,
}

/// Cost ratio with the zero-denominator convention: a zero-cost node gives
/// price 1 to cuts that keep it at zero cost and [`PRICE_SENTINEL`] to any
/// other cut.
pub fn price(induced_cost: f64, current_cost: f64) -> f64 {
    if current_cost < ZERO_COST {
        if induced_cost < ZERO_COST {
            1.0
        } else {
            PRICE_SENTINEL
        }
    } else {
        induced_cost / current_cost
    }
}

/// Two-level selection key; `secondary` only breaks ties of `primary`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreKey {
    pub primary: f64,
    pub secondary: f64,
}

impl ScoreKey {
    pub fn single(value: f64) -> Self {
        Self {
            primary: value,
            secondary: 0.0,
        }
    }
}

fn strictly_less(a: f64, b: f64) -> bool {
    a < b - TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Index of the smallest key. Keys within [`TIE_TOLERANCE`] of each other
/// are tied and the earliest one wins, so callers pass keys in `(dim, theta)`
/// order.
pub fn argmin(keys: &[ScoreKey]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, key) in keys.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = keys[b];
                let better = strictly_less(key.primary, cur.primary)
                    || (!strictly_less(cur.primary, key.primary) && strictly_less(key.secondary, cur.secondary));
                if better {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Candidates of one dimension, in ascending threshold order.
struct DimCandidates {
    thetas: Vec<f64>,
    /// Number of node points with coordinate `<= theta`.
    n_left_points: Vec<usize>,
    /// Number of node centers with coordinate `<= theta`.
    n_left_centers: Vec<usize>,
}

impl<'a> NodeView<'a> {
    /// View of the root: all points and all centers.
    pub fn root(data: &'a Dataset, centers: &'a CenterSet) -> Result<Self> {
        Self::new(data, centers, (0..data.n()).collect(), (0..centers.k()).collect())
    }

    /// View of an arbitrary node. Ids are sorted and deduplicated.
    pub fn new(
        data: &'a Dataset,
        centers: &'a CenterSet,
        mut points: Vec<usize>,
        mut center_ids: Vec<usize>,
    ) -> Result<Self> {
        if data.d() != centers.d() {
            return Err(Error::InvalidArgument(format!(
                "dataset has dimension {}, centers {}",
                data.d(),
                centers.d()
            )));
        }
        points.sort_unstable();
        points.dedup();
        center_ids.sort_unstable();
        center_ids.dedup();
        if points.last().is_some_and(|&p| p >= data.n()) || center_ids.last().is_some_and(|&c| c >= centers.k()) {
            return Err(Error::InvalidArgument("node id out of range".into()));
        }
        let d = data.d();
        let mut point_order = Vec::with_capacity(d);
        let mut center_order = Vec::with_capacity(d);
        for dim in 0..d {
            let mut po: Vec<u32> = (0..points.len() as u32).collect();
            po.sort_by(|&a, &b| {
                data.value(points[a as usize], dim)
                    .total_cmp(&data.value(points[b as usize], dim))
            });
            let mut co: Vec<u32> = (0..center_ids.len() as u32).collect();
            co.sort_by(|&a, &b| {
                centers
                    .value(center_ids[a as usize], dim)
                    .total_cmp(&centers.value(center_ids[b as usize], dim))
            });
            point_order.push(po);
            center_order.push(co);
        }
        Ok(Self {
            data,
            centers,
            points,
            center_ids,
            point_order,
            center_order,
        })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn center_set(&self) -> &'a CenterSet {
        self.centers
    }

    /// Point ids at this node, ascending.
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Center ids at this node, ascending.
    pub fn centers(&self) -> &[usize] {
        &self.center_ids
    }

    #[inline]
    fn pval(&self, local: u32, dim: usize) -> f64 {
        self.data.value(self.points[local as usize], dim)
    }

    #[inline]
    fn cval(&self, local: u32, dim: usize) -> f64 {
        self.centers.value(self.center_ids[local as usize], dim)
    }

    /// Splits the view by a cut. Orderings are carried over by filtering, so
    /// no re-sorting happens below the root.
    pub fn split(&self, cut: Cut) -> (NodeView<'a>, NodeView<'a>, Partition) {
        let go_left_p: Vec<bool> = self
            .points
            .iter()
            .map(|&p| self.data.value(p, cut.dim) <= cut.theta)
            .collect();
        let go_left_c: Vec<bool> = self
            .center_ids
            .iter()
            .map(|&c| self.centers.value(c, cut.dim) <= cut.theta)
            .collect();
        let (pl, pr, p_new) = remap(&self.points, &go_left_p);
        let (cl, cr, c_new) = remap(&self.center_ids, &go_left_c);
        let filter = |orders: &[Vec<u32>], side: &[bool], new: &[u32], want: bool| -> Vec<Vec<u32>> {
            orders
                .iter()
                .map(|o| {
                    o.iter()
                        .filter(|&&l| side[l as usize] == want)
                        .map(|&l| new[l as usize])
                        .collect()
                })
                .collect()
        };
        let left = NodeView {
            data: self.data,
            centers: self.centers,
            point_order: filter(&self.point_order, &go_left_p, &p_new, true),
            center_order: filter(&self.center_order, &go_left_c, &c_new, true),
            points: pl.clone(),
            center_ids: cl.clone(),
        };
        let right = NodeView {
            data: self.data,
            centers: self.centers,
            point_order: filter(&self.point_order, &go_left_p, &p_new, false),
            center_order: filter(&self.center_order, &go_left_c, &c_new, false),
            points: pr.clone(),
            center_ids: cr.clone(),
        };
        let partition = Partition {
            points_left: pl,
            points_right: pr,
            centers_left: cl,
            centers_right: cr,
        };
        (left, right, partition)
    }

    fn candidates_for_dim(&self, dim: usize) -> DimCandidates {
        let co = &self.center_order[dim];
        let po = &self.point_order[dim];
        let mut out = DimCandidates {
            thetas: Vec::new(),
            n_left_points: Vec::new(),
            n_left_centers: Vec::new(),
        };
        if co.len() < 2 {
            return out;
        }
        let lo = self.cval(co[0], dim);
        let hi = self.cval(co[co.len() - 1], dim);
        let (mut ip, mut ic) = (0usize, 0usize);
        loop {
            let next_p = po.get(ip).map(|&l| self.pval(l, dim));
            let next_c = co.get(ic).map(|&l| self.cval(l, dim));
            let v = match (next_p, next_c) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => break,
            };
            if v >= hi {
                break;
            }
            while ip < po.len() && self.pval(po[ip], dim) <= v {
                ip += 1;
            }
            while ic < co.len() && self.cval(co[ic], dim) <= v {
                ic += 1;
            }
            if v >= lo {
                out.thetas.push(v);
                out.n_left_points.push(ip);
                out.n_left_centers.push(ic);
            }
        }
        out
    }

    /// One representative cut per equivalence class over points and centers,
    /// restricted to classes that leave at least one center on each side.
    pub fn candidate_cuts(&self) -> Result<Vec<Cut>> {
        let cuts: Vec<Cut> = (0..self.data.d())
            .flat_map(|dim| {
                self.candidates_for_dim(dim)
                    .thetas
                    .into_iter()
                    .map(move |theta| Cut { dim, theta })
            })
            .collect();
        if cuts.is_empty() {
            return Err(Error::DegenerateNode {
                centers: self.center_ids.len(),
            });
        }
        Ok(cuts)
    }

    /// Cost of the node with every point matched to its nearest node center.
    pub fn current_cost(&self) -> f64 {
        self.points
            .iter()
            .map(|&p| {
                let x = self.data.point(p);
                self.center_ids
                    .iter()
                    .map(|&c| sq_dist(x, self.centers.center(c)))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    /// Row-major `|points| x |centers|` squared distances.
    fn distances(&self) -> Vec<f64> {
        let kv = self.center_ids.len();
        let mut dist = Vec::with_capacity(self.points.len() * kv);
        for &p in &self.points {
            let x = self.data.point(p);
            dist.extend(self.center_ids.iter().map(|&c| sq_dist(x, self.centers.center(c))));
        }
        dist
    }

    fn nearest_local(dist: &[f64], kv: usize) -> Vec<(u32, f64)> {
        dist.chunks_exact(kv)
            .map(|row| {
                let mut best = (0u32, row[0]);
                for (c, &d) in row.iter().enumerate().skip(1) {
                    if d < best.1 {
                        best = (c as u32, d);
                    }
                }
                best
            })
            .collect()
    }

    fn over_dims<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        let d = self.data.d();
        if self.points.len() * self.center_ids.len() * d >= MIN_WORK_TO_PARALLELIZE {
            (0..d).into_par_iter().map(f).collect()
        } else {
            (0..d).map(f).collect()
        }
    }

    /// Scores every candidate cut.
    ///
    /// Per dimension, the left-side cost with `j` centers on the left is the
    /// sum over left points of their distance to the nearest of the `j`
    /// leftmost centers; these prefix minima are updated in place as `j`
    /// grows, and suffix minima likewise for the right side in a backward
    /// pass. This costs `O(n k)` per dimension on top of one `O(n k d)`
    /// distance table per node.
    pub fn sweep_scores(&self) -> Result<Vec<CandidateScore>> {
        let kv = self.center_ids.len();
        if kv < 2 {
            return Err(Error::DegenerateNode { centers: kv });
        }
        let dist = self.distances();
        let nearest = Self::nearest_local(&dist, kv);
        let current: f64 = nearest.iter().map(|n| n.1).sum();
        let per_dim = self.over_dims(|dim| self.sweep_dim(dim, &dist, &nearest, current));
        let scores: Vec<CandidateScore> = per_dim.into_iter().flatten().collect();
        if scores.is_empty() {
            return Err(Error::DegenerateNode { centers: kv });
        }
        Ok(scores)
    }

    fn sweep_dim(&self, dim: usize, dist: &[f64], nearest: &[(u32, f64)], current: f64) -> Vec<CandidateScore> {
        let cand = self.candidates_for_dim(dim);
        let m = cand.thetas.len();
        if m == 0 {
            return Vec::new();
        }
        let kv = self.center_ids.len();
        let nv = self.points.len();
        let po = &self.point_order[dim];
        let co = &self.center_order[dim];

        let mut left = vec![0.0; m];
        let mut right = vec![0.0; m];

        // forward pass: best[x] = min distance to the j leftmost centers
        let mut best = vec![f64::INFINITY; nv];
        let mut t = 0;
        for j in 1..kv {
            let c = co[j - 1] as usize;
            for (x, b) in best.iter_mut().enumerate() {
                *b = b.min(dist[x * kv + c]);
            }
            if t >= m || cand.n_left_centers[t] != j {
                continue;
            }
            let (mut acc, mut pos) = (0.0, 0);
            while t < m && cand.n_left_centers[t] == j {
                while pos < cand.n_left_points[t] {
                    acc += best[po[pos] as usize];
                    pos += 1;
                }
                left[t] = acc;
                t += 1;
            }
        }

        // backward pass: best[x] = min distance to the kv - j rightmost centers
        best.fill(f64::INFINITY);
        let mut t = m;
        for j in (1..kv).rev() {
            let c = co[j] as usize;
            for (x, b) in best.iter_mut().enumerate() {
                *b = b.min(dist[x * kv + c]);
            }
            if t == 0 || cand.n_left_centers[t - 1] != j {
                continue;
            }
            let (mut acc, mut pos) = (0.0, nv);
            while t > 0 && cand.n_left_centers[t - 1] == j {
                while pos > cand.n_left_points[t - 1] {
                    pos -= 1;
                    acc += best[po[pos] as usize];
                }
                right[t - 1] = acc;
                t -= 1;
            }
        }

        // a point is separated from its nearest center by every threshold in
        // [min(x, c), max(x, c))
        let mut diff = vec![0i64; m + 1];
        for (local, &(c, _)) in nearest.iter().enumerate() {
            let a = self.pval(local as u32, dim);
            let b = self.cval(c, dim);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let start = cand.thetas.partition_point(|&th| th < lo);
            let end = cand.thetas.partition_point(|&th| th < hi);
            if start < end {
                diff[start] += 1;
                diff[end] -= 1;
            }
        }

        let mut running = 0i64;
        (0..m)
            .map(|t| {
                running += diff[t];
                let induced = left[t] + right[t];
                CandidateScore {
                    cut: Cut {
                        dim,
                        theta: cand.thetas[t],
                    },
                    induced_cost: induced,
                    price: price(induced, current),
                    mistakes: running as usize,
                    points_left: cand.n_left_points[t],
                    points_right: nv - cand.n_left_points[t],
                    centers_left: cand.n_left_centers[t],
                    centers_right: kv - cand.n_left_centers[t],
                }
            })
            .collect()
    }

    /// Straightforward per-cut recomputation of [`NodeView::sweep_scores`]:
    /// `O(candidates * n * k)`. Kept as a reference implementation.
    pub fn naive_scores(&self) -> Result<Vec<CandidateScore>> {
        let current = self.current_cost();
        let cuts = self.candidate_cuts()?;
        Ok(cuts
            .into_iter()
            .map(|cut| {
                let (mut induced, mut mistakes) = (0.0, 0);
                let (mut pl, mut cl) = (0, 0);
                let left_c: Vec<usize> = self
                    .center_ids
                    .iter()
                    .copied()
                    .filter(|&c| cut.goes_left(self.centers.center(c)))
                    .collect();
                let right_c: Vec<usize> = self
                    .center_ids
                    .iter()
                    .copied()
                    .filter(|&c| !cut.goes_left(self.centers.center(c)))
                    .collect();
                cl += left_c.len();
                for &p in &self.points {
                    let x = self.data.point(p);
                    let left = cut.goes_left(x);
                    pl += usize::from(left);
                    let side = if left { &left_c } else { &right_c };
                    induced += side
                        .iter()
                        .map(|&c| sq_dist(x, self.centers.center(c)))
                        .fold(f64::INFINITY, f64::min);
                    let mut near = (usize::MAX, f64::INFINITY);
                    for &c in &self.center_ids {
                        let d = sq_dist(x, self.centers.center(c));
                        if d < near.1 {
                            near = (c, d);
                        }
                    }
                    if cut.goes_left(self.centers.center(near.0)) != left {
                        mistakes += 1;
                    }
                }
                CandidateScore {
                    cut,
                    induced_cost: induced,
                    price: price(induced, current),
                    mistakes,
                    points_left: pl,
                    points_right: self.points.len() - pl,
                    centers_left: cl,
                    centers_right: self.center_ids.len() - cl,
                }
            })
            .collect())
    }

    /// ExKMC-style cost of a cut: each side is served by the single node
    /// center on that side that serves it best.
    pub fn exkmc_surrogate_cost(&self, cut: Cut) -> Result<f64> {
        let side_cost = |want_left: bool| -> Option<f64> {
            self.center_ids
                .iter()
                .filter(|&&c| cut.goes_left(self.centers.center(c)) == want_left)
                .map(|&c| {
                    let center = self.centers.center(c);
                    self.points
                        .iter()
                        .map(|&p| self.data.point(p))
                        .filter(|x| cut.goes_left(x) == want_left)
                        .map(|x| sq_dist(x, center))
                        .sum::<f64>()
                })
                .reduce(f64::min)
        };
        match (side_cost(true), side_cost(false)) {
            (Some(l), Some(r)) => Ok(l + r),
            _ => Err(Error::InvalidArgument(format!(
                "cut x[{}] <= {} leaves one side without centers",
                cut.dim, cut.theta
            ))),
        }
    }

    /// [`NodeView::exkmc_surrogate_cost`] for every candidate, aligned with
    /// [`NodeView::candidate_cuts`]. Uses per-center prefix and suffix sums
    /// over each dimension's point ordering.
    pub fn surrogate_scores(&self) -> Result<Vec<f64>> {
        let kv = self.center_ids.len();
        if kv < 2 {
            return Err(Error::DegenerateNode { centers: kv });
        }
        let dist = self.distances();
        let nv = self.points.len();
        let per_dim = self.over_dims(|dim| {
            let cand = self.candidates_for_dim(dim);
            let po = &self.point_order[dim];
            let co = &self.center_order[dim];
            // prefix[t * kv + c]: cost of serving the t leftmost points with c
            let mut prefix = vec![0.0; (nv + 1) * kv];
            let mut suffix = vec![0.0; (nv + 1) * kv];
            for t in 0..nv {
                let x = po[t] as usize;
                for c in 0..kv {
                    prefix[(t + 1) * kv + c] = prefix[t * kv + c] + dist[x * kv + c];
                }
            }
            for t in (0..nv).rev() {
                let x = po[t] as usize;
                for c in 0..kv {
                    suffix[t * kv + c] = suffix[(t + 1) * kv + c] + dist[x * kv + c];
                }
            }
            (0..cand.thetas.len())
                .map(|t| {
                    let (p, j) = (cand.n_left_points[t], cand.n_left_centers[t]);
                    let left = co[..j]
                        .iter()
                        .map(|&c| prefix[p * kv + c as usize])
                        .fold(f64::INFINITY, f64::min);
                    let right = co[j..]
                        .iter()
                        .map(|&c| suffix[p * kv + c as usize])
                        .fold(f64::INFINITY, f64::min);
                    left + right
                })
                .collect::<Vec<f64>>()
        });
        let out: Vec<f64> = per_dim.into_iter().flatten().collect();
        if out.is_empty() {
            return Err(Error::DegenerateNode { centers: kv });
        }
        Ok(out)
    }
}

/// Splits ids by side and returns each element's index within its new side.
fn remap(ids: &[usize], go_left: &[bool]) -> (Vec<usize>, Vec<usize>, Vec<u32>) {
    let (mut l, mut r) = (Vec::new(), Vec::new());
    let mut new = Vec::with_capacity(ids.len());
    for (&id, &left) in ids.iter().zip(go_left) {
        if left {
            new.push(l.len() as u32);
            l.push(id);
        } else {
            new.push(r.len() as u32);
            r.push(id);
        }
    }
    (l, r, new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(values: &[f64]) -> Dataset {
        Dataset::new(values.len(), 1, values.to_vec()).unwrap()
    }

    fn blobs() -> (Dataset, CenterSet) {
        (
            line(&[0.0, 1.0, 10.0, 11.0]),
            CenterSet::new(2, 1, vec![0.5, 10.5]).unwrap(),
        )
    }

    fn random_instance(seed: u64, n: usize, d: usize, k: usize) -> (Dataset, CenterSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // integer grid coordinates so that ties between values occur
        let pts: Vec<f64> = (0..n * d).map(|_| rng.random_range(0..12) as f64).collect();
        let cs: Vec<f64> = (0..k * d).map(|_| rng.random_range(0..12) as f64 + 0.5).collect();
        (Dataset::new(n, d, pts).unwrap(), CenterSet::new(k, d, cs).unwrap())
    }

    #[test]
    fn single_gap_between_two_centers() {
        let data = line(&[1.0, 2.0]);
        let centers = CenterSet::new(2, 1, vec![1.0, 2.0]).unwrap();
        let view = NodeView::root(&data, &centers).unwrap();
        assert_eq!(view.candidate_cuts().unwrap(), vec![Cut::new(0, 1.0)]);
    }

    #[test]
    fn only_separating_dimensions_yield_cuts() {
        let data = Dataset::from_rows(&[vec![0.0, 0.0], vec![1.0, 5.0], vec![2.0, 9.0]]).unwrap();
        let centers = CenterSet::from_rows(&[vec![1.0, 0.0], vec![1.0, 9.0]]).unwrap();
        let view = NodeView::root(&data, &centers).unwrap();
        let cuts = view.candidate_cuts().unwrap();
        assert!(!cuts.is_empty());
        assert!(cuts.iter().all(|c| c.dim == 1));
    }

    #[test]
    fn identical_centers_are_degenerate() {
        let data = line(&[0.0, 1.0]);
        let centers = CenterSet::new(2, 1, vec![0.5, 0.5]).unwrap();
        let view = NodeView::root(&data, &centers).unwrap();
        assert!(matches!(
            view.candidate_cuts(),
            Err(Error::DegenerateNode { centers: 2 })
        ));
        assert!(matches!(view.sweep_scores(), Err(Error::DegenerateNode { .. })));
    }

    #[test]
    fn current_cost_examples() {
        let (data, centers) = blobs();
        let view = NodeView::root(&data, &centers).unwrap();
        assert_eq!(view.current_cost(), 1.0);
        let exact = CenterSet::new(4, 1, vec![0.0, 1.0, 10.0, 11.0]).unwrap();
        assert_eq!(NodeView::root(&data, &exact).unwrap().current_cost(), 0.0);
    }

    #[test]
    fn two_blob_sweep() {
        let (data, centers) = blobs();
        let view = NodeView::root(&data, &centers).unwrap();
        let scores = view.sweep_scores().unwrap();
        // candidates: 0.5, 1.0, 10.0
        let thetas: Vec<f64> = scores.iter().map(|s| s.cut.theta).collect();
        assert_eq!(thetas, vec![0.5, 1.0, 10.0]);
        let gap = scores[1];
        assert_eq!(gap.induced_cost, 1.0);
        assert_eq!(gap.price, 1.0);
        assert_eq!(gap.mistakes, 0);
        assert_eq!(
            (gap.points_left, gap.points_right, gap.centers_left, gap.centers_right),
            (2, 2, 1, 1)
        );
        // theta = 10 moves point 10 next to center 0.5: (9.5)^2 instead of 0.25
        assert_eq!(scores[2].induced_cost, 0.75 + 90.25);
        assert_eq!(scores[2].mistakes, 1);
    }

    #[test]
    fn zero_cost_price_convention() {
        assert_eq!(price(0.0, 0.0), 1.0);
        assert_eq!(price(3.0, 0.0), PRICE_SENTINEL);
        assert_eq!(price(3.0, 2.0), 1.5);
    }

    #[test]
    fn argmin_prefers_first_among_ties() {
        let keys = [
            ScoreKey::single(2.0),
            ScoreKey::single(1.0),
            ScoreKey::single(1.0 + 1e-15),
            ScoreKey::single(1.0),
        ];
        assert_eq!(argmin(&keys), Some(1));
        let keys = [
            ScoreKey {
                primary: 5.0,
                secondary: 3.0,
            },
            ScoreKey {
                primary: 5.0,
                secondary: 2.0,
            },
        ];
        assert_eq!(argmin(&keys), Some(1));
        assert_eq!(argmin(&[]), None);
    }

    #[test]
    fn surrogate_examples() {
        let (data, centers) = blobs();
        let view = NodeView::root(&data, &centers).unwrap();
        // one center per side: surrogate equals induced cost
        for s in view.sweep_scores().unwrap() {
            assert!((view.exkmc_surrogate_cost(s.cut).unwrap() - s.induced_cost).abs() < 1e-12);
        }
        assert!(view.exkmc_surrogate_cost(Cut::new(0, 100.0)).is_err());

        // two centers on the left: the surrogate picks the better one
        let data = line(&[0.0, 1.0, 2.0, 10.0]);
        let centers = CenterSet::new(3, 1, vec![0.0, 2.0, 10.0]).unwrap();
        let view = NodeView::root(&data, &centers).unwrap();
        let s = view.exkmc_surrogate_cost(Cut::new(0, 5.0)).unwrap();
        // center 0 -> 0+1+4, center 2 -> 4+1+0
        assert_eq!(s, 5.0);
    }

    #[test]
    fn split_keeps_orders_consistent() {
        let (data, centers) = random_instance(3, 40, 3, 5);
        let view = NodeView::root(&data, &centers).unwrap();
        let cut = view.candidate_cuts().unwrap()[3];
        let (left, right, part) = view.split(cut);
        for (child, pts, cs) in [
            (&left, &part.points_left, &part.centers_left),
            (&right, &part.points_right, &part.centers_right),
        ] {
            let fresh = NodeView::new(&data, &centers, pts.clone(), cs.clone()).unwrap();
            assert_eq!(child.points(), fresh.points());
            assert_eq!(child.centers(), fresh.centers());
            assert_eq!(child.point_order, fresh.point_order);
            assert_eq!(child.center_order, fresh.center_order);
        }
    }

    /// Brute force: every (dim, observed value) cut, deduplicated by the
    /// bipartition it induces on points and centers.
    fn brute_candidates(view: &NodeView) -> Vec<Cut> {
        let data = view.data();
        let centers = view.center_set();
        let mut classes: Vec<(usize, Vec<bool>, f64)> = Vec::new();
        for dim in 0..data.d() {
            let values: Vec<f64> = view
                .points()
                .iter()
                .map(|&p| data.value(p, dim))
                .chain(view.centers().iter().map(|&c| centers.value(c, dim)))
                .collect();
            for &v in &values {
                let key: Vec<bool> = values.iter().map(|&w| w <= v).collect();
                let cl = key[view.points().len()..].iter().filter(|&&b| b).count();
                if cl == 0 || cl == view.centers().len() {
                    continue;
                }
                match classes.iter_mut().find(|(d, k, _)| *d == dim && *k == key) {
                    Some(entry) => entry.2 = entry.2.max(v),
                    None => classes.push((dim, key, v)),
                }
            }
        }
        let mut cuts: Vec<Cut> = classes.into_iter().map(|(dim, _, theta)| Cut { dim, theta }).collect();
        cuts.sort_by(|a, b| a.dim.cmp(&b.dim).then(a.theta.total_cmp(&b.theta)));
        cuts
    }

    #[test]
    fn candidates_match_brute_force() {
        for seed in 0..20 {
            let (data, centers) = random_instance(seed, 30, 4, 2 + (seed as usize % 5));
            let view = NodeView::root(&data, &centers).unwrap();
            match view.candidate_cuts() {
                Ok(cuts) => assert_eq!(cuts, brute_candidates(&view), "seed {seed}"),
                Err(_) => assert!(brute_candidates(&view).is_empty()),
            }
        }
    }

    #[test]
    fn surrogate_sweep_matches_enumeration() {
        for seed in 0..20 {
            let (data, centers) = random_instance(100 + seed, 50, 3, 2 + (seed as usize % 6));
            let view = NodeView::root(&data, &centers).unwrap();
            let Ok(cuts) = view.candidate_cuts() else { continue };
            let fast = view.surrogate_scores().unwrap();
            for (cut, f) in cuts.iter().zip(&fast) {
                let slow = view.exkmc_surrogate_cost(*cut).unwrap();
                assert!((f - slow).abs() <= 1e-9 * slow.max(1.0), "{f} vs {slow}");
            }
        }
    }

    fn permuted(ids: &[usize], seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = ids.to_vec();
        for i in (1..v.len()).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        v
    }

    proptest! {
        #[test]
        fn mistakes_ignore_point_order(seed in 0u64..500, perm in any::<u64>()) {
            let (data, centers) = random_instance(seed, 25, 2, 3);
            let ids: Vec<usize> = (0..25).collect();
            let a = NodeView::new(&data, &centers, ids.clone(), vec![0, 1, 2]).unwrap();
            let b = NodeView::new(&data, &centers, permuted(&ids, perm), vec![2, 0, 1]).unwrap();
            if let (Ok(sa), Ok(sb)) = (a.sweep_scores(), b.sweep_scores()) {
                let ma: Vec<usize> = sa.iter().map(|s| s.mistakes).collect();
                let mb: Vec<usize> = sb.iter().map(|s| s.mistakes).collect();
                prop_assert_eq!(ma, mb);
            }
        }

        #[test]
        fn partition_is_order_independent(seed in 0u64..500, perm in any::<u64>(), dim in 0usize..3, theta in 0.0f64..12.0) {
            let (data, centers) = random_instance(seed, 20, 3, 4);
            let ids: Vec<usize> = (0..20).collect();
            let cut = Cut::new(dim, theta);
            let a = crate::tree::partition_by_cut(&data, &centers, &ids, &[0, 1, 2, 3], cut);
            let b = crate::tree::partition_by_cut(&data, &centers, &permuted(&ids, perm), &[3, 1, 0, 2], cut);
            let sorted = |mut v: Vec<usize>| { v.sort_unstable(); v };
            prop_assert_eq!(sorted(a.points_left.clone()), sorted(b.points_left));
            prop_assert_eq!(sorted(a.points_right.clone()), sorted(b.points_right));
            prop_assert_eq!(sorted(a.centers_left.clone()), sorted(b.centers_left));
            // naive per-row comparison
            for &p in &a.points_left {
                prop_assert!(data.value(p, dim) <= theta);
            }
            for &p in &a.points_right {
                prop_assert!(data.value(p, dim) > theta);
            }
        }
    }
}
