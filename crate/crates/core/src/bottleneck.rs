//! Exact bottleneck distance between persistence diagrams.
//!
//! Points are compared under the ∞-norm and may be matched to the diagonal at
//! half their persistence. The optimal cost is one of finitely many candidate
//! costs, so the distance is found by binary search over the sorted candidates
//! with a perfect-matching feasibility test (Hopcroft–Karp) at each step.

use std::collections::VecDeque;

use crate::persistence::{ExtendedDiagram, PointClass};

/// Maximum over classes of the class-wise bottleneck distance.
pub fn bottleneck(a: &ExtendedDiagram, b: &ExtendedDiagram) -> f64 {
    PointClass::ALL
        .iter()
        .map(|&c| bottleneck_points(&a.class_points(c), &b.class_points(c)))
        .fold(0.0, f64::max)
}

#[inline]
fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

#[inline]
fn half_persistence(p: (f64, f64)) -> f64 {
    (p.1 - p.0).abs() / 2.0
}

/// Bottleneck distance between two point sets of the same class.
pub fn bottleneck_points(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut candidates: Vec<f64> = Vec::with_capacity(a.len() * b.len() + a.len() + b.len());
    candidates.extend(a.iter().map(|&p| half_persistence(p)));
    candidates.extend(b.iter().map(|&q| half_persistence(q)));
    for &p in a {
        for &q in b {
            candidates.push(linf(p, q));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // Matching everything to the diagonal is feasible at the largest half
    // persistence, which is a candidate, so the search always succeeds.
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching_exists(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Left side: points of `a`, then one diagonal slot per point of `b`.
/// Right side: points of `b`, then one diagonal slot per point of `a`.
fn perfect_matching_exists(a: &[(f64, f64)], b: &[(f64, f64)], cost: f64) -> bool {
    let (m, k) = (a.len(), b.len());
    let size = m + k;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); size];
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            if linf(p, q) <= cost {
                adj[i].push(j);
            }
        }
        if half_persistence(p) <= cost {
            adj[i].push(k + i);
        }
    }
    for (j, &q) in b.iter().enumerate() {
        let row = &mut adj[m + j];
        if half_persistence(q) <= cost {
            row.push(j);
        }
        row.extend((0..m).map(|i| k + i));
    }
    hopcroft_karp(&adj, size) == size
}

fn hopcroft_karp(adj: &[Vec<usize>], right_size: usize) -> usize {
    const FREE: usize = usize::MAX;
    let left_size = adj.len();
    let mut match_left = vec![FREE; left_size];
    let mut match_right = vec![FREE; right_size];
    let mut dist = vec![0usize; left_size];
    let mut matched = 0;
    loop {
        // BFS layering from free left vertices.
        let mut queue = VecDeque::new();
        for u in 0..left_size {
            if match_left[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_right[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matched;
        }
        for u in 0..left_size {
            if match_left[u] == FREE && augment(u, adj, &mut match_left, &mut match_right, &mut dist) {
                matched += 1;
            }
        }
    }
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_left: &mut [usize],
    match_right: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &v in &adj[u] {
        let w = match_right[v];
        if w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, match_left, match_right, dist)) {
            match_left[u] = v;
            match_right[v] = u;
            return true;
        }
    }
    dist[u] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::DiagramPoint;

    fn diag(points: &[(PointClass, f64, f64)]) -> ExtendedDiagram {
        ExtendedDiagram::new(
            points
                .iter()
                .map(|&(class, birth, death)| DiagramPoint { class, birth, death })
                .collect(),
        )
    }

    #[test]
    fn examples() {
        let a = diag(&[(PointClass::Ext0, 0.0, 2.0)]);
        assert_eq!(bottleneck(&a, &a), 0.0);
        assert_eq!(bottleneck(&a, &ExtendedDiagram::default()), 1.0);
        let b = diag(&[(PointClass::Ext0, 0.0, 3.0)]);
        assert_eq!(bottleneck(&a, &b), 1.0);
    }

    #[test]
    fn classes_do_not_mix() {
        let a = diag(&[(PointClass::Ext0, 0.0, 2.0)]);
        let b = diag(&[(PointClass::Ext1, 0.0, 2.0)]);
        assert_eq!(bottleneck(&a, &b), 1.0);
    }

    #[test]
    fn descending_points_use_absolute_persistence() {
        let a = diag(&[(PointClass::Ext1, 4.0, 0.0)]);
        assert_eq!(bottleneck(&a, &ExtendedDiagram::default()), 2.0);
        let b = diag(&[(PointClass::Ext1, 4.5, 0.0)]);
        assert_eq!(bottleneck(&a, &b), 0.5);
    }

    #[test]
    fn prefers_diagonal_when_cheaper() {
        // Matching the two short points directly costs 5; sending both to the
        // diagonal costs 0.5.
        let a = [(0.0, 1.0)];
        let b = [(5.0, 6.0)];
        assert_eq!(bottleneck_points(&a, &b), 0.5);
    }
}
