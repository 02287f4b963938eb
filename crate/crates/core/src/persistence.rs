//! Extended persistence of node-valued graphs.
//!
//! The extended filtration runs up through sublevel sets and back down through
//! relative superlevel sets. It is realized as an ordinary filtration of the
//! graph plus a cone: an apex enters first; the ascending pass adds vertices by
//! increasing value with each edge right after its later endpoint; the
//! descending pass adds, by decreasing value, the cone edge `apex–v` for each
//! vertex and the cone triangle `apex–u–v` for each edge once both endpoints are
//! coned. Persistence pairs come from column reduction of that boundary matrix
//! and are classified by which pass created and destroyed them:
//!
//! | creator          | destroyer        | class  |
//! |------------------|------------------|--------|
//! | vertex           | graph edge       | `Ord0` |
//! | vertex           | cone edge        | `Ext0` |
//! | graph edge       | cone triangle    | `Ext1` |
//! | cone edge        | cone triangle    | `Rel1` |
//!
//! Ties in node values are broken by node id.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MapperGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PointClass {
    Ord0,
    Rel1,
    Ext0,
    Ext1,
}

impl PointClass {
    pub const ALL: [PointClass; 4] = [PointClass::Ord0, PointClass::Rel1, PointClass::Ext0, PointClass::Ext1];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub class: PointClass,
    pub birth: f64,
    pub death: f64,
}

impl DiagramPoint {
    pub fn persistence(&self) -> f64 {
        (self.death - self.birth).abs()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtendedDiagram {
    points: Vec<DiagramPoint>,
}

impl ExtendedDiagram {
    /// Sorts points by `(class, birth, death)`.
    pub fn new(mut points: Vec<DiagramPoint>) -> Self {
        points.sort_by(|a, b| {
            a.class
                .cmp(&b.class)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
        });
        Self { points }
    }

    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, class: PointClass) -> usize {
        self.points.iter().filter(|p| p.class == class).count()
    }

    /// `(birth, death)` pairs of one class.
    pub fn class_points(&self, class: PointClass) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.class == class)
            .map(|p| (p.birth, p.death))
            .collect()
    }

    /// Every coordinate moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|p| DiagramPoint {
                    birth: p.birth + delta,
                    death: p.death + delta,
                    ..*p
                })
                .collect(),
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.points).expect("diagram serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let points: Vec<DiagramPoint> = serde_json::from_value(value)?;
        if points.iter().any(|p| !p.birth.is_finite() || !p.death.is_finite()) {
            return Err(Error::data("diagram coordinates must be finite"));
        }
        Ok(Self::new(points))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_json(serde_json::from_str(text)?)
    }
}

/// Extended diagram of a Mapper graph under the given node values, with
/// zero-persistence points discarded.
pub fn extended_diagram(graph: &MapperGraph, values: &[f64]) -> Result<ExtendedDiagram> {
    extended_diagram_with(graph, values, false)
}

pub fn extended_diagram_with(graph: &MapperGraph, values: &[f64], keep_zero: bool) -> Result<ExtendedDiagram> {
    if graph.nodes.is_empty() {
        return Err(Error::data("extended persistence needs a non-empty graph"));
    }
    edge_diagram(graph.nodes.len(), &graph.edges, values, keep_zero)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Apex,
    Vertex,
    Edge,
    ConeEdge,
    ConeTriangle,
}

struct Cell {
    kind: Kind,
    value: f64,
    boundary: Vec<usize>,
}

/// Extended diagram of the graph with `n` vertices and the given edges.
pub fn edge_diagram(n: usize, edges: &[(usize, usize)], values: &[f64], keep_zero: bool) -> Result<ExtendedDiagram> {
    if n == 0 {
        return Err(Error::data("extended persistence needs at least one vertex"));
    }
    if values.len() != n {
        return Err(Error::data(format!("{} values for {n} vertices", values.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::data(format!("node value {i} is not finite")));
    }
    let cells = cone_filtration(n, edges, values)?;
    let pairs = reduce(&cells);

    let mut points = Vec::with_capacity(pairs.len());
    for (creator, destroyer) in pairs {
        let (c, d) = (&cells[creator], &cells[destroyer]);
        let class = match (c.kind, d.kind) {
            (Kind::Vertex, Kind::Edge) => PointClass::Ord0,
            (Kind::Vertex, Kind::ConeEdge) => PointClass::Ext0,
            (Kind::Edge, Kind::ConeTriangle) => PointClass::Ext1,
            (Kind::ConeEdge, Kind::ConeTriangle) => PointClass::Rel1,
            (ck, dk) => {
                return Err(Error::Numeric(format!(
                    "unexpected persistence pair {ck:?} -> {dk:?}"
                )))
            }
        };
        if keep_zero || c.value != d.value {
            points.push(DiagramPoint {
                class,
                birth: c.value,
                death: d.value,
            });
        }
    }
    Ok(ExtendedDiagram::new(points))
}

fn cone_filtration(n: usize, edges: &[(usize, usize)], values: &[f64]) -> Result<Vec<Cell>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    // Edges grouped by their later (ascending pass) and earlier (descending
    // pass) endpoint.
    let mut upper: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut lower: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut normalized = Vec::with_capacity(edges.len());
    for (e, &(a, b)) in edges.iter().enumerate() {
        if a >= n || b >= n || a == b {
            return Err(Error::data(format!("invalid edge ({a}, {b})")));
        }
        let (lo, hi) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
        normalized.push((lo, hi));
        upper[hi].push(e);
        lower[lo].push(e);
    }
    for list in &mut upper {
        list.sort_by_key(|&e| rank[normalized[e].0]);
    }
    for list in &mut lower {
        list.sort_by_key(|&e| std::cmp::Reverse(rank[normalized[e].1]));
    }

    let mut cells = Vec::with_capacity(1 + 2 * n + 2 * edges.len());
    cells.push(Cell {
        kind: Kind::Apex,
        value: f64::NEG_INFINITY,
        boundary: Vec::new(),
    });
    let mut vpos = vec![0usize; n];
    let mut epos = vec![0usize; edges.len()];
    for &v in &order {
        vpos[v] = cells.len();
        cells.push(Cell {
            kind: Kind::Vertex,
            value: values[v],
            boundary: Vec::new(),
        });
        for &e in &upper[v] {
            let (lo, hi) = normalized[e];
            epos[e] = cells.len();
            let mut boundary = vec![vpos[lo], vpos[hi]];
            boundary.sort_unstable();
            cells.push(Cell {
                kind: Kind::Edge,
                value: values[v],
                boundary,
            });
        }
    }
    let mut cpos = vec![0usize; n];
    for &v in order.iter().rev() {
        cpos[v] = cells.len();
        cells.push(Cell {
            kind: Kind::ConeEdge,
            value: values[v],
            boundary: vec![0, vpos[v]],
        });
        for &e in &lower[v] {
            let (lo, hi) = normalized[e];
            let mut boundary = vec![epos[e], cpos[lo], cpos[hi]];
            boundary.sort_unstable();
            cells.push(Cell {
                kind: Kind::ConeTriangle,
                value: values[v],
                boundary,
            });
        }
    }
    Ok(cells)
}

/// Z/2 column reduction with clearing: triangles first, then edges, skipping
/// edges already known to be creators. Returns `(creator, destroyer)` position
/// pairs.
fn reduce(cells: &[Cell]) -> Vec<(usize, usize)> {
    let dim = |k: Kind| match k {
        Kind::Apex | Kind::Vertex => 0,
        Kind::Edge | Kind::ConeEdge => 1,
        Kind::ConeTriangle => 2,
    };
    let mut cleared = vec![false; cells.len()];
    let mut pairs = Vec::new();
    for d in [2, 1] {
        let mut pivot_owner: HashMap<usize, Vec<usize>> = HashMap::new();
        for (j, cell) in cells.iter().enumerate() {
            if dim(cell.kind) != d || cleared[j] {
                continue;
            }
            let mut col = cell.boundary.clone();
            while let Some(&low) = col.last() {
                match pivot_owner.get(&low) {
                    Some(other) => col = symmetric_difference(&col, other),
                    None => break,
                }
            }
            if let Some(&low) = col.last() {
                pairs.push((low, j));
                cleared[low] = true;
                pivot_owner.insert(low, col);
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
