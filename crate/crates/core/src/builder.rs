//! Top-down construction of threshold trees.
//!
//! Every strategy follows the same recursion: stop when a single reference
//! center remains, otherwise score all candidate cuts at the node, apply the
//! best one and recurse left, then right. Strategies differ only in the
//! score:
//!
//! | strategy | minimizes |
//! |---|---|
//! | [`Strategy::ExShallow`] | `price + lambda * dexp` |
//! | [`Strategy::ExGreedy`] | induced cost |
//! | [`Strategy::Imm`] | points separated from their nearest center |
//! | [`Strategy::ExKmc`] | cost with one original center per side |
//!
//! `dexp` estimates how a cut affects the size-weighted leaf depth of the
//! finished tree ([`eval_wad`]), discounted when the cut makes an earlier
//! condition on the same dimension and direction redundant ([`eval_dexp`]).

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::splitter::{argmin, CandidateScore, NodeView, ScoreKey, PRICE_SENTINEL, ZERO_COST};
use crate::tree::{CenterSet, Cut, Dataset, Node, NodeId, ThresholdTree};

pub const DEFAULT_LAMBDA: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    ExShallow { lambda: f64 },
    ExGreedy,
    Imm,
    ExKmc,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::ExShallow { lambda: DEFAULT_LAMBDA }
    }
}

impl Strategy {
    pub fn exshallow(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return invalid(format!("lambda must be a finite value >= 0, got {lambda}"));
        }
        Ok(Strategy::ExShallow { lambda })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::ExShallow { .. } => "exshallow",
            Strategy::ExGreedy => "exgreedy",
            Strategy::Imm => "imm",
            Strategy::ExKmc => "exkmc",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// Parses a strategy name; ExShallow gets the default lambda.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exshallow" => Ok(Strategy::default()),
            "exgreedy" => Ok(Strategy::ExGreedy),
            "imm" => Ok(Strategy::Imm),
            "exkmc" | "kmc" => Ok(Strategy::ExKmc),
            other => invalid(format!(
                "unknown strategy {other:?} (expected exshallow, exgreedy, imm or exkmc)"
            )),
        }
    }
}

/// Counts, per dimension, the left and right edges on the current
/// root-to-node path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KillerTracker {
    left: Vec<u32>,
    right: Vec<u32>,
}

impl KillerTracker {
    pub fn new(dims: usize) -> Self {
        Self {
            left: vec![0; dims],
            right: vec![0; dims],
        }
    }

    /// A new left edge on `dim` makes an earlier `<=` condition redundant.
    pub fn left_is_killer(&self, dim: usize) -> bool {
        self.left[dim] > 0
    }

    pub fn right_is_killer(&self, dim: usize) -> bool {
        self.right[dim] > 0
    }

    pub fn push(&mut self, dim: usize, left: bool) {
        if left {
            self.left[dim] += 1;
        } else {
            self.right[dim] += 1;
        }
    }

    pub fn pop(&mut self, dim: usize, left: bool) {
        let slot = if left {
            &mut self.left[dim]
        } else {
            &mut self.right[dim]
        };
        debug_assert!(*slot > 0, "tracker underflow");
        *slot -= 1;
    }

    /// Sum of all counters, i.e. the depth of the current node.
    pub fn depth(&self) -> u32 {
        self.left.iter().chain(&self.right).sum()
    }

    pub fn is_clear(&self) -> bool {
        self.depth() == 0
    }

    pub fn counts(&self, dim: usize) -> (u32, u32) {
        (self.left[dim], self.right[dim])
    }
}

/// Size-weighted average leaf depth of an idealized tree over `n` points and
/// `k` centers in which every node splits points and centers in the ratios
/// `r_p` and `r_c`.
///
/// Center counts are kept integral: the left side gets
/// `clamp(round_half_up(k * r_c), 1, k - 1)` centers. Point counts stay real.
pub fn eval_wad(n: f64, k: usize, r_p: f64, r_c: f64) -> Result<f64> {
    if k < 1 {
        return invalid("eval_wad needs k >= 1");
    }
    if n.is_nan() || n <= 0.0 {
        return invalid(format!("eval_wad needs n > 0, got {n}"));
    }
    if !(r_p > 0.0 && r_p < 1.0 && r_c > 0.0 && r_c < 1.0) {
        return invalid(format!("split ratios must lie in (0, 1), got r_p = {r_p}, r_c = {r_c}"));
    }
    Ok(wad_rec(n, k, r_p, r_c))
}

fn wad_rec(n: f64, k: usize, r_p: f64, r_c: f64) -> f64 {
    if k == 1 {
        return 0.0;
    }
    let k_left = ((k as f64 * r_c + 0.5).floor() as usize).clamp(1, k - 1);
    let n_left = n * r_p;
    let n_right = n - n_left;
    1.0 + (n_left * wad_rec(n_left, k_left, r_p, r_c) + n_right * wad_rec(n_right, k - k_left, r_p, r_c)) / n
}

/// Depth-explainability of a cut given the sides it induces at the node
/// and the edges on the path above.
///
/// A node without points contributes nothing and gets 0.
pub fn eval_dexp(score: &CandidateScore, tracker: &KillerTracker) -> f64 {
    let n_points = score.points_left + score.points_right;
    let n_centers = score.centers_left + score.centers_right;
    if n_points == 0 {
        return 0.0;
    }
    let n = n_points as f64;
    let frac_left = score.points_left as f64 / n;
    let r_p = frac_left.clamp(1.0 / (n + 1.0), n / (n + 1.0));
    let r_c = score.centers_left as f64 / n_centers as f64;
    let wad = eval_wad(n, n_centers, r_p, r_c).expect("valid candidate ratios");
    match (
        tracker.left_is_killer(score.cut.dim),
        tracker.right_is_killer(score.cut.dim),
    ) {
        (false, false) => wad,
        (true, false) => wad - frac_left,
        (false, true) => wad - score.points_right as f64 / n,
        (true, true) => wad - 1.0,
    }
}

/// Selection keys for every candidate at a node under `strategy`, in
/// candidate order.
pub fn selection_keys(
    strategy: Strategy,
    view: &NodeView,
    scores: &[CandidateScore],
    tracker: &KillerTracker,
) -> Result<Vec<ScoreKey>> {
    Ok(match strategy {
        Strategy::ExShallow { lambda } => {
            let zero_node = view.current_cost() < ZERO_COST;
            scores
                .iter()
                .map(|s| {
                    let primary = if s.price >= PRICE_SENTINEL {
                        s.price
                    } else {
                        s.price + lambda * eval_dexp(s, tracker)
                    };
                    let secondary = if zero_node && s.price >= PRICE_SENTINEL {
                        s.induced_cost
                    } else {
                        0.0
                    };
                    ScoreKey { primary, secondary }
                })
                .collect()
        }
        Strategy::ExGreedy => scores.iter().map(|s| ScoreKey::single(s.induced_cost)).collect(),
        Strategy::Imm => scores.iter().map(|s| ScoreKey::single(s.mistakes as f64)).collect(),
        Strategy::ExKmc => view.surrogate_scores()?.into_iter().map(ScoreKey::single).collect(),
    })
}

/// Builds trees for one dataset and center set; reusable across strategies.
#[derive(Debug)]
pub struct TreeBuilder<'a> {
    data: &'a Dataset,
    centers: &'a CenterSet,
    tracker: KillerTracker,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(data: &'a Dataset, centers: &'a CenterSet) -> Result<Self> {
        if data.d() != centers.d() {
            return invalid(format!("dataset has dimension {}, centers {}", data.d(), centers.d()));
        }
        Ok(Self {
            data,
            centers,
            tracker: KillerTracker::new(data.d()),
        })
    }

    pub fn tracker(&self) -> &KillerTracker {
        &self.tracker
    }

    pub fn build(&mut self, strategy: Strategy) -> Result<ThresholdTree> {
        if let Strategy::ExShallow { lambda } = strategy {
            Strategy::exshallow(lambda)?;
        }
        let root = NodeView::root(self.data, self.centers)?;
        let mut nodes = Vec::with_capacity(2 * self.centers.k());
        let result = self.grow(strategy, root, &mut nodes);
        if result.is_err() {
            // unwinding a failed build leaves counters set on the failing path
            self.tracker = KillerTracker::new(self.data.d());
        }
        result?;
        debug_assert!(self.tracker.is_clear());
        ThresholdTree::from_nodes(nodes, 0, self.data.d())
    }

    fn grow(&mut self, strategy: Strategy, view: NodeView<'a>, nodes: &mut Vec<Node>) -> Result<NodeId> {
        let id = nodes.len();
        if view.centers().len() == 1 {
            nodes.push(Node::Leaf {
                center: view.centers()[0],
                points: view.points().to_vec(),
            });
            return Ok(id);
        }
        let scores = view.sweep_scores()?;
        let keys = selection_keys(strategy, &view, &scores, &self.tracker)?;
        let best = scores[argmin(&keys).expect("non-empty candidates")];
        let cut = best.cut;
        nodes.push(Node::Internal {
            cut,
            left: usize::MAX,
            right: usize::MAX,
            n_points: view.points().len(),
            mistakes: best.mistakes,
        });
        let (left_view, right_view, _) = view.split(cut);
        drop(view);

        self.tracker.push(cut.dim, true);
        let left = self.grow(strategy, left_view, nodes)?;
        self.tracker.pop(cut.dim, true);

        self.tracker.push(cut.dim, false);
        let right = self.grow(strategy, right_view, nodes)?;
        self.tracker.pop(cut.dim, false);

        if let Node::Internal { left: l, right: r, .. } = &mut nodes[id] {
            *l = left;
            *r = right;
        }
        Ok(id)
    }
}

/// Builds one tree with `strategy`.
pub fn build_tree(data: &Dataset, centers: &CenterSet, strategy: Strategy) -> Result<ThresholdTree> {
    TreeBuilder::new(data, centers)?.build(strategy)
}

/// The cut chosen at the root, mostly useful for diagnostics.
pub fn root_cut(data: &Dataset, centers: &CenterSet, strategy: Strategy) -> Result<Option<Cut>> {
    if centers.k() < 2 {
        return Ok(None);
    }
    let view = NodeView::root(data, centers)?;
    let scores = view.sweep_scores()?;
    let keys = selection_keys(strategy, &view, &scores, &KillerTracker::new(data.d()))?;
    Ok(argmin(&keys).map(|i| scores[i].cut))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn score(dim: usize, pl: usize, pr: usize, cl: usize, cr: usize) -> CandidateScore {
        CandidateScore {
            cut: Cut::new(dim, 0.0),
            induced_cost: 1.0,
            price: 1.0,
            mistakes: 0,
            points_left: pl,
            points_right: pr,
            centers_left: cl,
            centers_right: cr,
        }
    }

    #[test]
    fn wad_reference_values() {
        assert_eq!(eval_wad(128.0, 4, 0.5, 0.5).unwrap(), 2.0);
        assert!((eval_wad(128.0, 4, 0.25, 0.25).unwrap() - 2.3125).abs() < 1e-12);
        assert_eq!(eval_wad(17.0, 1, 0.3, 0.9).unwrap(), 0.0);
        assert_eq!(eval_wad(10.0, 2, 0.1, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn wad_rejects_bad_input() {
        assert!(eval_wad(10.0, 0, 0.5, 0.5).is_err());
        assert!(eval_wad(10.0, 3, 0.0, 0.5).is_err());
        assert!(eval_wad(10.0, 3, 0.5, 1.0).is_err());
        assert!(eval_wad(0.0, 3, 0.5, 0.5).is_err());
    }

    #[test]
    fn wad_stays_within_depth_bounds() {
        for k in 1..30 {
            for &r in &[0.01, 0.2, 0.5, 0.77, 0.99] {
                let w = eval_wad(1000.0, k, r, 1.0 - r).unwrap();
                assert!(w >= 0.0 && w <= (k - 1) as f64 + 1e-12, "k={k} r={r} w={w}");
            }
        }
    }

    #[test]
    fn dexp_at_root_is_plain_wad() {
        let t = KillerTracker::new(2);
        let s = score(0, 40, 60, 2, 3);
        assert_eq!(eval_dexp(&s, &t), eval_wad(100.0, 5, 0.4, 0.4).unwrap());
    }

    #[test]
    fn dexp_discounts_killer_edges() {
        let s = score(1, 40, 60, 2, 3);
        let wad = eval_wad(100.0, 5, 0.4, 0.4).unwrap();
        let mut t = KillerTracker::new(2);
        t.push(1, true);
        assert!((eval_dexp(&s, &t) - (wad - 0.4)).abs() < 1e-15);
        let mut t = KillerTracker::new(2);
        t.push(1, false);
        assert!((eval_dexp(&s, &t) - (wad - 0.6)).abs() < 1e-15);
        t.push(1, true);
        assert!((eval_dexp(&s, &t) - (wad - 1.0)).abs() < 1e-15);
        // edges on another dimension do not count
        let mut t = KillerTracker::new(2);
        t.push(0, true);
        t.push(0, false);
        assert_eq!(eval_dexp(&s, &t), wad);
    }

    #[test]
    fn dexp_clamps_empty_point_side() {
        let t = KillerTracker::new(1);
        let s = score(0, 0, 10, 1, 1);
        assert_eq!(eval_dexp(&s, &t), 1.0);
        assert_eq!(eval_dexp(&score(0, 0, 0, 1, 2), &t), 0.0);
    }

    #[test]
    fn tracker_counts_depth() {
        let mut t = KillerTracker::new(3);
        t.push(2, true);
        t.push(2, false);
        t.push(0, true);
        assert_eq!(t.depth(), 3);
        assert_eq!(t.counts(2), (1, 1));
        t.pop(0, true);
        t.pop(2, false);
        t.pop(2, true);
        assert!(t.is_clear());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::default(), Strategy::ExGreedy, Strategy::Imm, Strategy::ExKmc] {
            assert_eq!(s.name().parse::<Strategy>().unwrap().name(), s.name());
        }
        assert!("cart".parse::<Strategy>().is_err());
        assert!(Strategy::exshallow(-0.1).is_err());
    }

    #[test]
    fn single_center_gives_single_leaf() {
        let data = Dataset::new(3, 1, vec![0.0, 1.0, 5.0]).unwrap();
        let centers = CenterSet::new(1, 1, vec![2.0]).unwrap();
        let tree = build_tree(&data, &centers, Strategy::default()).unwrap();
        assert_eq!(tree.k(), 1);
        assert_eq!(tree.leaf(tree.root()).unwrap().1, &[0, 1, 2]);
    }

    #[test]
    fn duplicate_centers_fail_and_reset_tracker() {
        let data = Dataset::new(4, 1, vec![0.0, 1.0, 5.0, 6.0]).unwrap();
        let centers = CenterSet::new(3, 1, vec![0.5, 5.5, 5.5]).unwrap();
        let mut b = TreeBuilder::new(&data, &centers).unwrap();
        assert!(matches!(
            b.build(Strategy::ExGreedy),
            Err(Error::DegenerateNode { centers: 2 })
        ));
        assert!(b.tracker().is_clear());
    }

    #[test]
    fn exshallow_prefers_reusing_a_dimension() {
        // Four groups along the diagonal. The surrogate may cut through a
        // group, since it prices each side with a single center; the other
        // strategies recover the groups exactly.
        let mut rows = Vec::new();
        let mut cs = Vec::new();
        for g in 0..4 {
            let base = (g * 10) as f64;
            for j in 0..5 {
                rows.push(vec![base + j as f64 * 0.1, base + j as f64 * 0.2]);
            }
            cs.push(vec![base + 0.2, base + 0.4]);
        }
        let data = Dataset::from_rows(&rows).unwrap();
        let centers = CenterSet::from_rows(&cs).unwrap();
        for strategy in [Strategy::default(), Strategy::ExGreedy, Strategy::Imm, Strategy::ExKmc] {
            let mut b = TreeBuilder::new(&data, &centers).unwrap();
            let tree = b.build(strategy).unwrap();
            assert!(b.tracker().is_clear());
            tree.check_against(&data).unwrap();
            assert_eq!(tree.k(), 4);
            if strategy != Strategy::ExKmc {
                for (i, &l) in tree.assignment().labels().iter().enumerate() {
                    assert_eq!(l, i / 5, "{strategy}: {:?}", tree.sketch());
                }
            }
            // ExShallow reuses dimension 0, so every explanation has two conditions at most
            if let Strategy::ExShallow { .. } = strategy {
                assert!(metrics::waes(&tree) <= 2.0);
            }
        }
    }
}
