//! Mapper graphs: clusters of each preimage become nodes, and two nodes are
//! joined whenever their member sets intersect.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::FilterValues;
use crate::dbscan::NOISE;
use crate::error::{Error, Result};
use crate::exec;
use crate::json::format_float;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperNode {
    pub id: usize,
    #[serde(rename = "interval")]
    pub interval_index: usize,
    /// Global point indices, ascending.
    pub members: Vec<usize>,
    pub mean_filter: f64,
}

impl MapperNode {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapperGraph {
    pub nodes: Vec<MapperNode>,
    /// Pairs `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    /// Points that fell in at least one preimage and were noise in all of them.
    pub dropped_noise: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub components: usize,
    pub cycle_rank: usize,
    pub node_count: usize,
    pub edge_count: usize,
}

/// Clusters every preimage with `cluster_fn` and assembles the nerve.
///
/// Node ids follow `(interval index, cluster label)`, so running the clustering
/// in parallel cannot reorder them.
pub fn build_nerve<F>(preimages: &[Vec<usize>], cluster_fn: F, filter_values: &FilterValues) -> Result<MapperGraph>
where
    F: Fn(&[usize]) -> Result<Vec<i32>> + Sync + Send,
{
    let labelled = exec::map_slice(preimages, |set| cluster_fn(set));
    let n_points = filter_values.len();
    let mut seen = vec![false; n_points];
    let mut kept = vec![false; n_points];
    let mut nodes: Vec<MapperNode> = Vec::new();
    for (interval_index, (set, labels)) in preimages.iter().zip(labelled).enumerate() {
        let labels = labels?;
        if labels.len() != set.len() {
            return Err(Error::data("clustering returned the wrong number of labels"));
        }
        let clusters = labels.iter().copied().max().unwrap_or(NOISE);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); (clusters + 1).max(0) as usize];
        for (&point, &label) in set.iter().zip(&labels) {
            if point >= n_points {
                return Err(Error::data(format!("preimage index {point} out of range")));
            }
            seen[point] = true;
            if label != NOISE {
                kept[point] = true;
                groups[label as usize].push(point);
            }
        }
        for mut members in groups.into_iter().filter(|g| !g.is_empty()) {
            members.sort_unstable();
            members.dedup();
            let id = nodes.len();
            nodes.push(MapperNode {
                id,
                interval_index,
                mean_filter: mean_of(&members, filter_values),
                members,
            });
        }
    }
    let dropped_noise = seen.iter().zip(&kept).filter(|(s, k)| **s && !**k).count();
    let edges = nerve_edges(&nodes, n_points);
    Ok(MapperGraph {
        nodes,
        edges,
        dropped_noise,
    })
}

fn mean_of(members: &[usize], values: &FilterValues) -> f64 {
    members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64
}

fn nerve_edges(nodes: &[MapperNode], n_points: usize) -> Vec<(usize, usize)> {
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); n_points];
    for node in nodes {
        for &p in &node.members {
            containing[p].push(node.id);
        }
    }
    let mut edges = BTreeSet::new();
    for ids in containing.iter().filter(|ids| ids.len() > 1) {
        for (i, &u) in ids.iter().enumerate() {
            for &v in &ids[i + 1..] {
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }
    edges.into_iter().collect()
}

/// Mean filter value of each node's members; also refreshes `mean_filter`.
pub fn node_values(graph: &mut MapperGraph, filter_values: &FilterValues) -> Vec<f64> {
    for node in &mut graph.nodes {
        node.mean_filter = mean_of(&node.members, filter_values);
    }
    graph.nodes.iter().map(|n| n.mean_filter).collect()
}

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.sets -= 1;
        true
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

pub fn graph_summary(graph: &MapperGraph) -> GraphSummary {
    let v = graph.nodes.len();
    let mut uf = UnionFind::new(v);
    for &(a, b) in &graph.edges {
        uf.union(a, b);
    }
    let components = uf.set_count();
    GraphSummary {
        components,
        cycle_rank: graph.edges.len() + components - v,
        node_count: v,
        edge_count: graph.edges.len(),
    }
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    interval: usize,
    members: Vec<usize>,
    mean_filter: f64,
    size: usize,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    params: serde_json::Value,
    #[serde(default)]
    dropped_noise: usize,
}

impl MapperGraph {
    pub fn to_json(&self, params: serde_json::Value) -> serde_json::Value {
        let doc = GraphDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    interval: n.interval_index,
                    members: n.members.clone(),
                    mean_filter: n.mean_filter,
                    size: n.size(),
                })
                .collect(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            params,
            dropped_noise: self.dropped_noise,
        };
        serde_json::to_value(doc).expect("graph document serializes")
    }

    /// Parses a graph document, returning the graph and its `params` record.
    pub fn from_json(value: serde_json::Value) -> Result<(Self, serde_json::Value)> {
        let doc: GraphDoc = serde_json::from_value(value)?;
        let n = doc.nodes.len();
        let mut nodes = Vec::with_capacity(n);
        for (i, nd) in doc.nodes.into_iter().enumerate() {
            if nd.id != i {
                return Err(Error::data(format!("node ids must be dense from 0; found {} at {i}", nd.id)));
            }
            if nd.members.is_empty() {
                return Err(Error::data(format!("node {i} has no members")));
            }
            if !nd.mean_filter.is_finite() {
                return Err(Error::data(format!("node {i} has a non-finite mean_filter")));
            }
            nodes.push(MapperNode {
                id: nd.id,
                interval_index: nd.interval,
                members: nd.members,
                mean_filter: nd.mean_filter,
            });
        }
        let mut edges = BTreeSet::new();
        for [a, b] in doc.edges {
            if a >= n || b >= n || a == b {
                return Err(Error::data(format!("invalid edge [{a}, {b}]")));
            }
            edges.insert((a.min(b), a.max(b)));
        }
        Ok((
            MapperGraph {
                nodes,
                edges: edges.into_iter().collect(),
                dropped_noise: doc.dropped_noise,
            },
            doc.params,
        ))
    }

    /// Graphviz rendering. Fill colour runs linearly in RGB from `#2c7bb6`
    /// at the smallest `mean_filter` to `#d7191c` at the largest.
    pub fn to_dot(&self) -> String {
        let (lo, hi) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), n| (l.min(n.mean_filter), h.max(n.mean_filter)));
        let mut out = String::from("graph mapper {\n  node [style=filled];\n");
        for n in &self.nodes {
            let t = if hi > lo { (n.mean_filter - lo) / (hi - lo) } else { 0.5 };
            let _ = writeln!(
                out,
                "  {id} [label=\"{id}\", tooltip=\"{size}\", fillcolor=\"{color}\", mean_filter=\"{mean}\"];",
                id = n.id,
                size = n.size(),
                color = ramp(t),
                mean = format_float(n.mean_filter),
            );
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  {a} -- {b};");
        }
        out.push_str("}\n");
        out
    }
}

fn ramp(t: f64) -> String {
    const LOW: [f64; 3] = [44.0, 123.0, 182.0];
    const HIGH: [f64; 3] = [215.0, 25.0, 28.0];
    let c: Vec<u8> = LOW
        .iter()
        .zip(HIGH)
        .map(|(l, h)| (l + t.clamp(0.0, 1.0) * (h - l)).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_cluster(set: &[usize]) -> Result<Vec<i32>> {
        Ok(vec![0; set.len()])
    }

    fn graph_of(n: usize, edges: &[(usize, usize)]) -> MapperGraph {
        MapperGraph {
            nodes: (0..n)
                .map(|id| MapperNode {
                    id,
                    interval_index: id,
                    members: vec![id],
                    mean_filter: 0.0,
                })
                .collect(),
            edges: edges.to_vec(),
            dropped_noise: 0,
        }
    }

    #[test]
    fn shared_point_gives_edge() {
        let fv = FilterValues::new(vec![0.0, 1.0, 2.0]).unwrap();
        let g = build_nerve(&[vec![0, 1], vec![1, 2]], single_cluster, &fv).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!(g.nodes[0].mean_filter, 0.5);
    }

    #[test]
    fn disjoint_preimages_have_no_edges() {
        let fv = FilterValues::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = build_nerve(&[vec![0, 1], vec![2, 3]], single_cluster, &fv).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn noise_points_are_dropped_and_counted() {
        let fv = FilterValues::new(vec![0.0; 5]).unwrap();
        // Point 4 is noise in its only preimage; point 2 is noise in one of two.
        let labels = |set: &[usize]| -> Result<Vec<i32>> {
            Ok(set
                .iter()
                .map(|&p| if p == 4 || (p == 2 && set[0] == 0) { NOISE } else { 0 })
                .collect())
        };
        let g = build_nerve(&[vec![0, 1, 2], vec![2, 3, 4]], labels, &fv).unwrap();
        assert_eq!(g.dropped_noise, 1);
        assert_eq!(g.nodes[0].members, vec![0, 1]);
        assert_eq!(g.nodes[1].members, vec![2, 3]);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn empty_preimages_yield_no_nodes() {
        let fv = FilterValues::new(vec![0.0]).unwrap();
        let g = build_nerve(&[vec![], vec![]], single_cluster, &fv).unwrap();
        assert!(g.nodes.is_empty());
    }

    #[test]
    fn node_values_are_member_means() {
        let fv = FilterValues::new(vec![1.0, 7.0, 3.0]).unwrap();
        let mut g = build_nerve(&[vec![0, 2], vec![1]], single_cluster, &fv).unwrap();
        assert_eq!(node_values(&mut g, &fv), vec![2.0, 7.0]);
    }

    #[test]
    fn summaries() {
        let tri = graph_summary(&graph_of(3, &[(0, 1), (0, 2), (1, 2)]));
        assert_eq!((tri.components, tri.cycle_rank), (1, 1));
        let two = graph_summary(&graph_of(4, &[(0, 1), (2, 3)]));
        assert_eq!((two.components, two.cycle_rank), (2, 0));
        let empty = graph_summary(&MapperGraph::default());
        assert_eq!((empty.components, empty.cycle_rank), (0, 0));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let fv = FilterValues::new(vec![0.0, 1.0, 2.0]).unwrap();
        let g = build_nerve(&[vec![0, 1], vec![1, 2]], single_cluster, &fv).unwrap();
        let j = g.to_json(serde_json::json!({"n": 2}));
        assert_eq!(j["nodes"][1]["size"], 2);
        assert_eq!(j["edges"], serde_json::json!([[0, 1]]));
        let (back, params) = MapperGraph::from_json(j.clone()).unwrap();
        assert_eq!(back, g);
        assert_eq!(params["n"], 2);
        let mut bad = j;
        bad["edges"] = serde_json::json!([[0, 5]]);
        assert!(MapperGraph::from_json(bad).is_err());
    }

    #[test]
    fn dot_output() {
        let fv = FilterValues::new(vec![0.0, 1.0, 2.0]).unwrap();
        let g = build_nerve(&[vec![0, 1], vec![1, 2]], single_cluster, &fv).unwrap();
        let dot = g.to_dot();
        assert!(dot.contains("0 -- 1;"));
        assert!(dot.contains("#2c7bb6") && dot.contains("#d7191c"));
    }
}
