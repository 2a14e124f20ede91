//! Dataset loading and tree serialization.
//!
//! Trees are written as JSON (machine readable, round-trips exactly) or as
//! Graphviz DOT. Every float in JSON is written with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::explanation;
use crate::tree::{Cut, Dataset, Node, NodeId, ThresholdTree};

/// Reads a numeric CSV file. See [`parse_csv`].
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

/// Parses comma-separated finite numbers, one point per line.
///
/// A first row containing any non-numeric cell is taken as a header. Blank
/// lines are skipped; LF and CRLF line endings are accepted.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = cells.iter().map(|c| c.parse::<f64>().ok()).collect();
        if first {
            first = false;
            if parsed.iter().any(Option::is_none) {
                width = Some(cells.len());
                continue;
            }
        }
        match width {
            Some(w) if w != cells.len() => {
                return Err(parse_err(
                    line_no,
                    format!("expected {w} columns, found {}", cells.len()),
                ));
            }
            None => width = Some(cells.len()),
            _ => {}
        }
        for (col, (cell, v)) in cells.iter().zip(parsed).enumerate() {
            match v {
                Some(v) if v.is_finite() => values.push(v),
                Some(_) => {
                    return Err(parse_err(
                        line_no,
                        format!("column {}: non-finite value {cell:?}", col + 1),
                    ))
                }
                None => {
                    return Err(parse_err(
                        line_no,
                        format!("column {}: not a number: {cell:?}", col + 1),
                    ))
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(1, "no data rows".into()));
    }
    Dataset::new(rows, width.unwrap_or(0), values)
}

/// Fixed 17-significant-digit representation; parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(Error::InvalidArgument(format!(
                "unknown export format {other:?} (expected json or dot)"
            ))),
        }
    }
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Dot => "dot",
        }
    }
}

pub fn export_tree(tree: &ThresholdTree, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => tree_to_json(tree),
        ExportFormat::Dot => tree_to_dot(tree),
    }
}

/// JSON document:
///
/// ```text
/// {"dims": d, "k": k, "n_points": n, "root": NODE}
/// NODE = {"dim", "theta", "n_points", "mistakes", "children": [NODE, NODE]}
///      | {"leaf": {"cluster", "size", "explanation": [COND], "points": [ids]}}
/// COND = {"dim", "op": "<=" | ">", "theta"}
/// ```
///
/// `explanation` lists the non-redundant path conditions and is ignored on
/// import.
pub fn tree_to_json(tree: &ThresholdTree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"dims\": {},", tree.dims());
    let _ = writeln!(out, "  \"k\": {},", tree.k());
    let _ = writeln!(out, "  \"n_points\": {},", tree.n_points());
    out.push_str("  \"root\": ");
    json_node(tree, tree.root(), 1, &mut out);
    out.push_str("\n}\n");
    out
}

fn json_node(tree: &ThresholdTree, id: NodeId, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth + 1);
    let close = "  ".repeat(depth);
    match tree.node(id) {
        Node::Internal {
            cut,
            left,
            right,
            n_points,
            mistakes,
        } => {
            let _ = writeln!(out, "{{");
            let _ = writeln!(out, "{pad}\"dim\": {},", cut.dim);
            let _ = writeln!(out, "{pad}\"theta\": {},", fmt_f64(cut.theta));
            let _ = writeln!(out, "{pad}\"n_points\": {n_points},");
            let _ = writeln!(out, "{pad}\"mistakes\": {mistakes},");
            let _ = write!(out, "{pad}\"children\": [");
            json_node(tree, *left, depth + 1, out);
            out.push_str(", ");
            json_node(tree, *right, depth + 1, out);
            let _ = write!(out, "]\n{close}}}");
        }
        Node::Leaf { center, points } => {
            let conds: Vec<String> = explanation(tree, id)
                .reduced()
                .iter()
                .map(|c| {
                    format!(
                        "{{\"dim\": {}, \"op\": \"{}\", \"theta\": {}}}",
                        c.dim,
                        c.side.symbol(),
                        fmt_f64(c.theta)
                    )
                })
                .collect();
            let ids: Vec<String> = points.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{{");
            let _ = writeln!(out, "{pad}\"leaf\": {{");
            let _ = writeln!(out, "{pad}  \"cluster\": {center},");
            let _ = writeln!(out, "{pad}  \"size\": {},", points.len());
            let _ = writeln!(out, "{pad}  \"explanation\": [{}],", conds.join(", "));
            let _ = writeln!(out, "{pad}  \"points\": [{}]", ids.join(", "));
            let _ = write!(out, "{pad}}}\n{close}}}");
        }
    }
}

/// Parses the document written by [`tree_to_json`].
pub fn tree_from_json(text: &str) -> Result<ThresholdTree> {
    let bad = |m: &str| Error::MalformedTree(m.to_string());
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let uint = |v: &Value, key: &str| -> Result<usize> {
        v.get(key)
            .and_then(Value::as_u64)
            .map(|x| x as usize)
            .ok_or_else(|| bad(&format!("missing or invalid \"{key}\"")))
    };
    let dims = uint(&doc, "dims")?;
    let root = doc.get("root").ok_or_else(|| bad("missing \"root\""))?;
    let mut nodes = Vec::new();
    fn walk(v: &Value, nodes: &mut Vec<Node>, uint: &dyn Fn(&Value, &str) -> Result<usize>) -> Result<NodeId> {
        let bad = |m: &str| Error::MalformedTree(m.to_string());
        let id = nodes.len();
        if let Some(leaf) = v.get("leaf") {
            let points = leaf
                .get("points")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("leaf without \"points\""))?
                .iter()
                .map(|p| p.as_u64().map(|x| x as usize).ok_or_else(|| bad("invalid point id")))
                .collect::<Result<Vec<usize>>>()?;
            if uint(leaf, "size")? != points.len() {
                return Err(bad("leaf size does not match its point list"));
            }
            nodes.push(Node::Leaf {
                center: uint(leaf, "cluster")?,
                points,
            });
            return Ok(id);
        }
        let theta = v
            .get("theta")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("internal node without numeric \"theta\""))?;
        let children = v
            .get("children")
            .and_then(Value::as_array)
            .filter(|c| c.len() == 2)
            .ok_or_else(|| bad("internal node needs exactly two \"children\""))?;
        nodes.push(Node::Internal {
            cut: Cut::new(uint(v, "dim")?, theta),
            left: usize::MAX,
            right: usize::MAX,
            n_points: uint(v, "n_points")?,
            mistakes: uint(v, "mistakes")?,
        });
        let left = walk(&children[0], nodes, uint)?;
        let right = walk(&children[1], nodes, uint)?;
        if let Node::Internal { left: l, right: r, .. } = &mut nodes[id] {
            *l = left;
            *r = right;
        }
        Ok(id)
    }
    walk(root, &mut nodes, &uint)?;
    let tree = ThresholdTree::from_nodes(nodes, 0, dims)?;
    if tree.k() != uint(&doc, "k")? || tree.n_points() != uint(&doc, "n_points")? {
        return Err(bad("header counts do not match the tree"));
    }
    Ok(tree)
}

/// Graphviz rendering: internal nodes show their cut, point count and
/// mistakes; leaves show the cluster id, size and reduced explanation size.
pub fn tree_to_dot(tree: &ThresholdTree) -> String {
    let mut out = String::from("digraph tree {\n  node [fontname=\"Helvetica\"];\n");
    let mut edges = String::new();
    let mut stack = vec![tree.root()];
    while let Some(id) = stack.pop() {
        match tree.node(id) {
            Node::Internal {
                cut,
                left,
                right,
                n_points,
                mistakes,
            } => {
                let label = format!(
                    "x[{}] ≤ {}\\nsamples={n_points}\\nmistakes={mistakes}",
                    cut.dim, cut.theta
                );
                let _ = writeln!(out, "  n{id} [shape=ellipse, label=\"{}\"];", label);
                let _ = writeln!(edges, "  n{id} -> n{left} [label=\"≤\"];");
                let _ = writeln!(edges, "  n{id} -> n{right} [label=\">\"];");
                stack.push(*right);
                stack.push(*left);
            }
            Node::Leaf { center, points } => {
                let size = explanation(tree, id).size();
                let _ = writeln!(
                    out,
                    "  n{id} [shape=box, label=\"cluster {center}\\nsize={}\\nexplanation={size}\"];",
                    points.len()
                );
            }
        }
    }
    out.push_str(&edges);
    out.push_str("}\n");
    out
}
