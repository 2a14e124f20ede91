//! Domain types: the data matrix, reference centers, axis-aligned cuts and
//! the threshold tree they form.
//!
//! Points and centers are always referred to by their row index. Trees store
//! ids, never coordinates.

use std::fmt;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    fn new(rows: usize, cols: usize, values: Vec<f64>, what: &str) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return invalid(format!("{what} must have at least one row and one column"));
        }
        if values.len() != rows * cols {
            return invalid(format!(
                "{what}: expected {} values for {rows}x{cols}, got {}",
                rows * cols,
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!(
                "{what}: non-finite value at row {}, column {}",
                pos / cols,
                pos % cols
            ));
        }
        Ok(Self { rows, cols, values })
    }

    fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return invalid(format!(
                "{what}: row {i} has {} columns, expected {cols}",
                rows[i].len()
            ));
        }
        Self::new(rows.len(), cols, rows.concat(), what)
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// An immutable `n x d` matrix of finite reals; row index = point id.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset(Matrix);

impl Dataset {
    /// Builds a dataset from row-major values.
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        Matrix::new(n, d, values, "dataset").map(Self)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Matrix::from_rows(rows, "dataset").map(Self)
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn d(&self) -> usize {
        self.0.cols
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    #[inline]
    pub fn value(&self, i: usize, dim: usize) -> f64 {
        self.0.values[i * self.0.cols + dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.0.values.chunks_exact(self.0.cols)
    }
}

/// The `k x d` reference centers that a tree must separate; row index = center id.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet(Matrix);

impl CenterSet {
    pub fn new(k: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        Matrix::new(k, d, values, "center set").map(Self)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Matrix::from_rows(rows, "center set").map(Self)
    }

    pub fn k(&self) -> usize {
        self.0.rows
    }

    pub fn d(&self) -> usize {
        self.0.cols
    }

    #[inline]
    pub fn center(&self, c: usize) -> &[f64] {
        self.0.row(c)
    }

    #[inline]
    pub fn value(&self, c: usize, dim: usize) -> f64 {
        self.0.values[c * self.0.cols + dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.0.values.chunks_exact(self.0.cols)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// An axis-aligned test `x[dim] <= theta`. Rows satisfying it go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cut {
    pub dim: usize,
    pub theta: f64,
}

impl Cut {
    pub fn new(dim: usize, theta: f64) -> Self {
        Self { dim, theta }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.dim] <= self.theta
    }
}

/// Direction of an edge condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `x[dim] <= theta`
    Le,
    /// `x[dim] > theta`
    Gt,
}

impl Side {
    pub fn symbol(self) -> &'static str {
        match self {
            Side::Le => "<=",
            Side::Gt => ">",
        }
    }
}

/// One condition on a root-to-leaf path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub dim: usize,
    pub side: Side,
    pub theta: f64,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        match self.side {
            Side::Le => x[self.dim] <= self.theta,
            Side::Gt => x[self.dim] > self.theta,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x[{}] {} {}", self.dim, self.side.symbol(), self.theta)
    }
}

/// Result of splitting a node's points and centers by a cut.
///
/// Each side keeps the relative order of the input ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub points_left: Vec<usize>,
    pub points_right: Vec<usize>,
    pub centers_left: Vec<usize>,
    pub centers_right: Vec<usize>,
}

/// Splits point ids and center ids by `cut`. Empty sides are legal.
pub fn partition_by_cut(
    data: &Dataset,
    centers: &CenterSet,
    points: &[usize],
    center_ids: &[usize],
    cut: Cut,
) -> Partition {
    debug_assert!(cut.dim < data.d());
    let (points_left, points_right) = points.iter().partition(|&&i| data.value(i, cut.dim) <= cut.theta);
    let (centers_left, centers_right) = center_ids
        .iter()
        .partition(|&&c| centers.value(c, cut.dim) <= cut.theta);
    Partition {
        points_left,
        points_right,
        centers_left,
        centers_right,
    }
}

/// Cluster labels in `[0, k)`, one per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return invalid(format!("label {bad} out of range for k = {k}"));
        }
        Ok(Self { labels, k })
    }

    /// Each point labelled with its nearest center; ties go to the lower id.
    pub fn nearest(data: &Dataset, centers: &CenterSet) -> Self {
        let labels = data
            .rows()
            .map(|x| nearest_center(x, centers, 0..centers.k()).0)
            .collect();
        Self { labels, k: centers.k() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Nearest center among `ids` (lowest id wins ties) and its squared distance.
pub(crate) fn nearest_center(x: &[f64], centers: &CenterSet, ids: impl IntoIterator<Item = usize>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for c in ids {
        let d = sq_dist(x, centers.center(c));
        if d < best.1 || (d == best.1 && c < best.0) {
            best = (c, d);
        }
    }
    best
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        cut: Cut,
        left: NodeId,
        right: NodeId,
        /// Points reaching this node.
        n_points: usize,
        /// Points separated from their nearest (node-local) center by `cut`.
        mistakes: usize,
    },
    Leaf {
        center: usize,
        points: Vec<usize>,
    },
}

/// A tree described by its cuts and leaf centers only. Points are routed
/// when it is materialized with [`ThresholdTree::from_sketch`].
#[derive(Debug, Clone, PartialEq)]
pub enum Sketch {
    Leaf(usize),
    Split(Cut, Box<Sketch>, Box<Sketch>),
}

impl Sketch {
    pub fn split(cut: Cut, left: Sketch, right: Sketch) -> Self {
        Sketch::Split(cut, Box::new(left), Box::new(right))
    }

    fn centers(&self, out: &mut Vec<usize>) {
        match self {
            Sketch::Leaf(c) => out.push(*c),
            Sketch::Split(_, l, r) => {
                l.centers(out);
                r.centers(out);
            }
        }
    }
}

/// Binary tree of cuts with exactly one reference center per leaf.
///
/// Nodes live in an arena in pre-order (left subtree first).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTree {
    nodes: Vec<Node>,
    parents: Vec<Option<NodeId>>,
    root: NodeId,
    dims: usize,
    n_points: usize,
    leaf_of_center: Vec<NodeId>,
}

impl ThresholdTree {
    /// Assembles a tree from an arena, checking the structural invariants:
    /// every node reachable exactly once from `root`, leaf centers a
    /// permutation of `[0, k)`, leaf point ids a partition of `[0, n)`, and
    /// every cut dimension below `dims`.
    pub fn from_nodes(nodes: Vec<Node>, root: NodeId, dims: usize) -> Result<Self> {
        let bad = |m: String| Err(Error::MalformedTree(m));
        if root >= nodes.len() {
            return bad(format!("root {root} out of range"));
        }
        let mut parents = vec![None; nodes.len()];
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        seen[root] = true;
        let mut leaves = Vec::new();
        while let Some(id) = stack.pop() {
            match &nodes[id] {
                Node::Internal { cut, left, right, .. } => {
                    if cut.dim >= dims {
                        return bad(format!("node {id} cuts on dimension {} >= {dims}", cut.dim));
                    }
                    if !cut.theta.is_finite() {
                        return bad(format!("node {id} has a non-finite threshold"));
                    }
                    for &child in [right, left] {
                        if child >= nodes.len() || seen[child] {
                            return bad(format!("node {id} has invalid or shared child {child}"));
                        }
                        seen[child] = true;
                        parents[child] = Some(id);
                        stack.push(child);
                    }
                }
                Node::Leaf { .. } => leaves.push(id),
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("arena contains unreachable nodes".into());
        }
        let k = leaves.len();
        let mut leaf_of_center = vec![usize::MAX; k];
        let mut n_points = 0;
        for &id in &leaves {
            if let Node::Leaf { center, points } = &nodes[id] {
                if *center >= k || leaf_of_center[*center] != usize::MAX {
                    return bad(format!("leaf centers are not a permutation of 0..{k}"));
                }
                leaf_of_center[*center] = id;
                n_points += points.len();
            }
        }
        let mut owner = vec![false; n_points];
        for &id in &leaves {
            if let Node::Leaf { points, .. } = &nodes[id] {
                for &p in points {
                    if p >= n_points || owner[p] {
                        return bad(format!("point ids are not a partition of 0..{n_points}"));
                    }
                    owner[p] = true;
                }
            }
        }
        Ok(Self {
            nodes,
            parents,
            root,
            dims,
            n_points,
            leaf_of_center,
        })
    }

    /// Materializes a sketch over a dataset: points are routed through the
    /// cuts and per-node mistakes are counted against the node's centers.
    pub fn from_sketch(sketch: &Sketch, data: &Dataset, centers: &CenterSet) -> Result<Self> {
        if data.d() != centers.d() {
            return invalid("dataset and centers differ in dimension");
        }
        let mut ids = Vec::new();
        sketch.centers(&mut ids);
        if ids.len() != centers.k() {
            return invalid(format!(
                "sketch has {} leaves, center set has {}",
                ids.len(),
                centers.k()
            ));
        }
        let mut nodes = Vec::new();
        let all: Vec<usize> = (0..data.n()).collect();
        Self::grow_sketch(sketch, data, centers, all, &mut nodes);
        Self::from_nodes(nodes, 0, data.d())
    }

    fn grow_sketch(
        sketch: &Sketch,
        data: &Dataset,
        centers: &CenterSet,
        points: Vec<usize>,
        nodes: &mut Vec<Node>,
    ) -> NodeId {
        let id = nodes.len();
        match sketch {
            Sketch::Leaf(c) => nodes.push(Node::Leaf { center: *c, points }),
            Sketch::Split(cut, l, r) => {
                let mut here = Vec::new();
                sketch.centers(&mut here);
                let mistakes = points
                    .iter()
                    .filter(|&&p| {
                        let x = data.point(p);
                        let (c, _) = nearest_center(x, centers, here.iter().copied());
                        cut.goes_left(x) != cut.goes_left(centers.center(c))
                    })
                    .count();
                let n_points = points.len();
                let (left_pts, right_pts): (Vec<usize>, Vec<usize>) =
                    points.into_iter().partition(|&p| cut.goes_left(data.point(p)));
                nodes.push(Node::Internal {
                    cut: *cut,
                    left: usize::MAX,
                    right: usize::MAX,
                    n_points,
                    mistakes,
                });
                let left = Self::grow_sketch(l, data, centers, left_pts, nodes);
                let right = Self::grow_sketch(r, data, centers, right_pts, nodes);
                if let Node::Internal {
                    left: lslot,
                    right: rslot,
                    ..
                } = &mut nodes[id]
                {
                    *lslot = left;
                    *rslot = right;
                }
            }
        }
        id
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parents[id]
    }

    /// Number of leaves, equal to the number of reference centers.
    pub fn k(&self) -> usize {
        self.leaf_of_center.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn leaf_of_center(&self, center: usize) -> NodeId {
        self.leaf_of_center[center]
    }

    /// Leaf ids in left-to-right order.
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.k());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::Internal { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { .. } => out.push(id),
            }
        }
        out
    }

    /// Leaf reached by `x`.
    pub fn route(&self, x: &[f64]) -> NodeId {
        let mut id = self.root;
        while let Node::Internal { cut, left, right, .. } = &self.nodes[id] {
            id = if cut.goes_left(x) { *left } else { *right };
        }
        id
    }

    pub fn depth(&self, mut id: NodeId) -> usize {
        let mut depth = 0;
        while let Some(p) = self.parents[id] {
            depth += 1;
            id = p;
        }
        depth
    }

    pub fn max_depth(&self) -> usize {
        self.leaf_ids().into_iter().map(|l| self.depth(l)).max().unwrap_or(0)
    }

    /// Edge conditions from the root down to `id`, root first.
    pub fn path(&self, mut id: NodeId) -> Vec<Condition> {
        let mut out = Vec::new();
        while let Some(p) = self.parents[id] {
            if let Node::Internal { cut, left, .. } = &self.nodes[p] {
                let side = if *left == id { Side::Le } else { Side::Gt };
                out.push(Condition {
                    dim: cut.dim,
                    side,
                    theta: cut.theta,
                });
            }
            id = p;
        }
        out.reverse();
        out
    }

    /// `(center, points)` stored at a leaf.
    pub fn leaf(&self, id: NodeId) -> Option<(usize, &[usize])> {
        match &self.nodes[id] {
            Node::Leaf { center, points } => Some((*center, points)),
            Node::Internal { .. } => None,
        }
    }

    /// Cluster labels induced by the leaves (label = leaf center id).
    pub fn assignment(&self) -> Assignment {
        let mut labels = vec![0; self.n_points];
        for id in self.leaf_ids() {
            if let Some((center, points)) = self.leaf(id) {
                for &p in points {
                    labels[p] = center;
                }
            }
        }
        Assignment { labels, k: self.k() }
    }

    /// Sketch of this tree (cuts and leaf centers, no points).
    pub fn sketch(&self) -> Sketch {
        self.sketch_at(self.root)
    }

    fn sketch_at(&self, id: NodeId) -> Sketch {
        match &self.nodes[id] {
            Node::Internal { cut, left, right, .. } => {
                Sketch::split(*cut, self.sketch_at(*left), self.sketch_at(*right))
            }
            Node::Leaf { center, .. } => Sketch::Leaf(*center),
        }
    }

    /// Checks the invariants that relate a tree to the data it was built on:
    /// every point routes to the leaf that stores it, and every internal
    /// node's point count matches its subtree.
    pub fn check_against(&self, data: &Dataset) -> Result<()> {
        if data.n() != self.n_points || data.d() != self.dims {
            return Err(Error::MalformedTree(format!(
                "tree covers {}x{}, dataset is {}x{}",
                self.n_points,
                self.dims,
                data.n(),
                data.d()
            )));
        }
        for id in self.leaf_ids() {
            let (_, points) = self.leaf(id).expect("leaf id");
            if let Some(&p) = points.iter().find(|&&p| self.route(data.point(p)) != id) {
                return Err(Error::MalformedTree(format!(
                    "point {p} does not route to its leaf {id}"
                )));
            }
        }
        let mut counts = vec![0usize; self.nodes.len()];
        self.count_points(self.root, &mut counts);
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Internal { n_points, .. } = node {
                if *n_points != counts[id] {
                    return Err(Error::MalformedTree(format!("node {id} point count mismatch")));
                }
            }
        }
        Ok(())
    }

    fn count_points(&self, id: NodeId, counts: &mut [usize]) -> usize {
        let c = match &self.nodes[id] {
            Node::Leaf { points, .. } => points.len(),
            Node::Internal { left, right, .. } => self.count_points(*left, counts) + self.count_points(*right, counts),
        };
        counts[id] = c;
        c
    }
}
