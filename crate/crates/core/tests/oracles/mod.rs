//! Independent reference implementations shared by the integration tests
//! and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use dmapper::graph::UnionFind;
use dmapper::data::MetricSpace;
use dmapper::graph::MapperGraph;
use dmapper::persistence::{edge_diagram, ExtendedDiagram, PointClass};
use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, Copy, PartialEq, Debug)]
enum Cell {
    Apex,
    Vertex(usize),
    Edge(usize),
    Cone(usize),
    Triangle(usize),
}

/// Plain left-to-right reduction of a dense Z/2 matrix stored column by
/// column, no clearing.
fn dense_pairs(boundary: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let m = boundary.len();
    let mut cols: Vec<Vec<bool>> = boundary.to_vec();
    let low = |c: &Vec<bool>| c.iter().rposition(|&b| b);
    let mut pairs = Vec::new();
    for j in 0..m {
        loop {
            let Some(l) = low(&cols[j]) else { break };
            let Some(i) = (0..j).find(|&i| low(&cols[i]) == Some(l)) else { break };
            let other = cols[i].clone();
            for (a, b) in cols[j].iter_mut().zip(other) {
                *a ^= b;
            }
        }
        if let Some(l) = low(&cols[j]) {
            pairs.push((l, j));
        }
    }
    pairs
}

/// Extended diagram from first principles. `ascending` lists the vertices in
/// filtration order; it must be sorted by value.
pub fn persistence_oracle(n: usize, edges: &[(usize, usize)], values: &[f64], ascending: &[usize], keep_zero: bool) -> Vec<(PointClass, f64, f64)> {
    let mut pos_in = vec![0; n];
    for (r, &v) in ascending.iter().enumerate() {
        pos_in[v] = r;
    }
    let mut cells = vec![Cell::Apex];
    for &v in ascending {
        cells.push(Cell::Vertex(v));
        let mut ups: Vec<usize> = (0..edges.len())
            .filter(|&e| {
                let (a, b) = edges[e];
                pos_in[a].max(pos_in[b]) == pos_in[v]
            })
            .collect();
        ups.sort_by_key(|&e| pos_in[edges[e].0].min(pos_in[edges[e].1]));
        cells.extend(ups.into_iter().map(Cell::Edge));
    }
    for &v in ascending.iter().rev() {
        cells.push(Cell::Cone(v));
        let mut downs: Vec<usize> = (0..edges.len())
            .filter(|&e| {
                let (a, b) = edges[e];
                pos_in[a].min(pos_in[b]) == pos_in[v]
            })
            .collect();
        downs.sort_by_key(|&e| std::cmp::Reverse(pos_in[edges[e].0].max(pos_in[edges[e].1])));
        cells.extend(downs.into_iter().map(Cell::Triangle));
    }
    let index = |c: Cell| cells.iter().position(|&x| x == c).unwrap();
    let m = cells.len();
    let mut boundary = vec![vec![false; m]; m];
    for (j, &c) in cells.iter().enumerate() {
        let faces: Vec<Cell> = match c {
            Cell::Apex | Cell::Vertex(_) => vec![],
            Cell::Edge(e) => vec![Cell::Vertex(edges[e].0), Cell::Vertex(edges[e].1)],
            Cell::Cone(v) => vec![Cell::Apex, Cell::Vertex(v)],
            Cell::Triangle(e) => vec![Cell::Edge(e), Cell::Cone(edges[e].0), Cell::Cone(edges[e].1)],
        };
        for f in faces {
            boundary[j][index(f)] = true;
        }
    }
    let value = |c: Cell| match c {
        Cell::Apex => f64::NEG_INFINITY,
        Cell::Vertex(v) | Cell::Cone(v) => values[v],
        Cell::Edge(e) => values[edges[e].0].max(values[edges[e].1]),
        Cell::Triangle(e) => values[edges[e].0].min(values[edges[e].1]),
    };
    let mut out = Vec::new();
    for (i, j) in dense_pairs(&boundary) {
        let class = match (cells[i], cells[j]) {
            (Cell::Vertex(_), Cell::Edge(_)) => PointClass::Ord0,
            (Cell::Vertex(_), Cell::Cone(_)) => PointClass::Ext0,
            (Cell::Edge(_), Cell::Triangle(_)) => PointClass::Ext1,
            (Cell::Cone(_), Cell::Triangle(_)) => PointClass::Rel1,
            other => panic!("impossible pair {other:?}"),
        };
        let (b, d) = (value(cells[i]), value(cells[j]));
        if keep_zero || b != d {
            out.push((class, b, d));
        }
    }
    out.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
    out
}

pub fn flatten(d: &ExtendedDiagram) -> Vec<(PointClass, f64, f64)> {
    d.points().iter().map(|p| (p.class, p.birth, p.death)).collect()
}

pub fn order_by(values: &[f64], reverse_ties: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let by_id = if reverse_ties { b.cmp(&a) } else { a.cmp(&b) };
        values[a].total_cmp(&values[b]).then(by_id)
    });
    order
}

pub fn components_and_rank(n: usize, edges: &[(usize, usize)]) -> (usize, usize) {
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        uf.union(a, b);
    }
    let c = uf.set_count();
    (c, edges.len() + c - n)
}

/// Library diagram against the dense oracle, with and without zero points,
/// under flipped tie-breaking, plus the Ext0/Ext1 count invariants.
pub fn check_persistence_case(n: usize, edges: &[(usize, usize)], values: &[f64]) -> Result<(), String> {
    let same_ties = order_by(values, false);
    for keep_zero in [false, true] {
        let got = flatten(&edge_diagram(n, edges, values, keep_zero).map_err(|e| e.to_string())?);
        let want = persistence_oracle(n, edges, values, &same_ties, keep_zero);
        if got != want {
            return Err(format!("n={n} edges={edges:?} values={values:?} keep_zero={keep_zero}: {got:?} != {want:?}"));
        }
    }
    // Off-diagonal points do not depend on how ties are ordered.
    let flipped = persistence_oracle(n, edges, values, &order_by(values, true), false);
    let got = flatten(&edge_diagram(n, edges, values, false).map_err(|e| e.to_string())?);
    if got != flipped {
        return Err(format!("tie order changed the diagram: edges={edges:?} values={values:?}"));
    }
    let full = edge_diagram(n, edges, values, true).map_err(|e| e.to_string())?;
    let (components, rank) = components_and_rank(n, edges);
    if full.count(PointClass::Ext0) != components || full.count(PointClass::Ext1) != rank {
        return Err(format!(
            "counts Ext0={} Ext1={} vs components={components} rank={rank} for edges={edges:?}",
            full.count(PointClass::Ext0),
            full.count(PointClass::Ext1)
        ));
    }
    Ok(())
}

/// Random graph on `n` vertices; `connected` adds a random spanning path.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, connected: bool) -> Vec<(usize, usize)> {
    let density = rng.gen_range(0.15..0.7);
    let mut edges: Vec<(usize, usize)> = all_pairs(n).into_iter().filter(|_| rng.gen_bool(density)).collect();
    if connected {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for w in order.windows(2) {
            let e = (w[0].min(w[1]), w[0].max(w[1]));
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    edges
}

pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// Smallest adjacency bitmask over all relabellings.
fn canonical(edges: &[(usize, usize)], perms: &[Vec<usize>], slot: &[Vec<usize>]) -> u32 {
    perms
        .iter()
        .map(|p| edges.iter().fold(0u32, |m, &(a, b)| m | 1 << slot[p[a]][p[b]]))
        .min()
        .unwrap_or(0)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn connected_classes(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs = all_pairs(n);
    let perms = permutations(n);
    let mut slot = vec![vec![0; n]; n];
    for (i, &(a, b)) in pairs.iter().enumerate() {
        slot[a][b] = i;
        slot[b][a] = i;
    }
    let mut seen = BTreeSet::new();
    let mut reps = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
        if components_and_rank(n, &edges).0 != 1 {
            continue;
        }
        if seen.insert(canonical(&edges, &perms, &slot)) {
            reps.push(edges);
        }
    }
    reps
}


fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

fn to_diagonal(p: (f64, f64)) -> f64 {
    (p.1 - p.0).abs() / 2.0
}

/// Bottleneck distance by trying every partial injection from `a` into `b`;
/// unmatched points on either side go to the diagonal.
pub fn bottleneck_exhaustive(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    fn search(a: &[(f64, f64)], b: &[(f64, f64)], i: usize, used: &mut Vec<bool>, cost: f64, best: &mut f64) {
        if cost >= *best {
            return;
        }
        if i == a.len() {
            let rest = b
                .iter()
                .zip(used.iter())
                .filter(|(_, &u)| !u)
                .map(|(&q, _)| to_diagonal(q))
                .fold(cost, f64::max);
            *best = best.min(rest);
            return;
        }
        search(a, b, i + 1, used, cost.max(to_diagonal(a[i])), best);
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                search(a, b, i + 1, used, cost.max(linf(a[i], b[j])), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(a, b, 0, &mut vec![false; b.len()], 0.0, &mut best);
    best
}

pub fn bottleneck_diagrams_exhaustive(a: &ExtendedDiagram, b: &ExtendedDiagram) -> f64 {
    PointClass::ALL
        .iter()
        .map(|&c| bottleneck_exhaustive(&a.class_points(c), &b.class_points(c)))
        .fold(0.0, f64::max)
}

/// Quadratic DBSCAN straight from the definitions. Points are neighbours when
/// their squared Euclidean distance (or matrix entry) is within `eps` squared
/// (or `eps`); each point counts itself.
pub fn dbscan_reference(space: &MetricSpace, subset: &[usize], eps: f64, min_samples: usize) -> Vec<i32> {
    let m = subset.len();
    let close = |i: usize, j: usize| match space {
        MetricSpace::Points(pc) => {
            let (x, y) = (pc.point(subset[i]), pc.point(subset[j]));
            x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() <= eps * eps
        }
        MetricSpace::Distances(dm) => dm.get(subset[i], subset[j]) <= eps,
    };
    let neighbours: Vec<Vec<usize>> = (0..m).map(|i| (0..m).filter(|&j| close(i, j)).collect()).collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut labels = vec![-1i32; m];
    let mut next = 0;
    for start in 0..m {
        if !core[start] || labels[start] != -1 {
            continue;
        }
        // Flood the core component; border points are settled afterwards.
        let mut stack = vec![start];
        labels[start] = next;
        while let Some(p) = stack.pop() {
            for &q in &neighbours[p] {
                if core[q] && labels[q] == -1 {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    for p in 0..m {
        if !core[p] {
            if let Some(&c) = neighbours[p].iter().filter(|&&q| core[q]).min_by_key(|&&q| subset[q]) {
                labels[p] = labels[c];
            }
        }
    }
    labels
}

/// Mean per-membership silhouette computed literally, one membership at a time.
pub fn silhouette_reference(graph: &MapperGraph, space: &MetricSpace) -> f64 {
    let mean_to = |x: usize, members: &[usize], skip_self: bool| {
        let total: f64 = members.iter().map(|&m| space.distance(x, m)).sum();
        let count = members.len() - usize::from(skip_self);
        total / count as f64
    };
    let mut scores = Vec::new();
    for x in 0..space.len() {
        for (i, node) in graph.nodes.iter().enumerate() {
            if !node.members.contains(&x) {
                continue;
            }
            if node.members.len() == 1 {
                scores.push(0.0);
                continue;
            }
            let a = mean_to(x, &node.members, true);
            let b = graph
                .nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, other)| mean_to(x, &other.members, false))
                .fold(f64::INFINITY, f64::min);
            scores.push(if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 });
        }
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Inverse normal CDF by bisection on `x`.
pub fn normal_quantile_bisect(q: f64, mean: f64, sd: f64) -> f64 {
    let (mut lo, mut hi) = (mean - 40.0 * sd, mean + 40.0 * sd);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid, mean, sd) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `alpha` for which the intervals `[F1^-1(α/2), F1^-1(1-α/2)]` and
/// `[F2^-1(α/2), F2^-1(1-α/2)]` still meet, found by bisection on `alpha`.
pub fn crossing_alpha_oracle(left: (f64, f64), right: (f64, f64)) -> f64 {
    let meets = |alpha: f64| {
        normal_quantile_bisect(1.0 - alpha / 2.0, left.0, left.1) >= normal_quantile_bisect(alpha / 2.0, right.0, right.1)
    };
    if meets(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
