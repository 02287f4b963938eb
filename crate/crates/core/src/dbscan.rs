//! DBSCAN over a subset of a metric space.
//!
//! A point is core when at least `min_samples` points of the subset (itself
//! included) lie within `eps`. Clusters are the connected components of core
//! points under the `eps` relation; a non-core point within `eps` of some core
//! point joins the cluster of the lowest-index such core point, otherwise it is
//! noise. Cluster labels are numbered by the lowest core index they contain.
//!
//! Euclidean point clouds of dimension at most 3 go through a uniform grid whose
//! cells have diameter below `eps`; everything else uses the direct quadratic
//! scan.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::MetricSpace;
use crate::error::{Error, Result};

pub const NOISE: i32 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbscanMetric {
    Euclidean,
    Precomputed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_samples: usize,
    pub metric: DbscanMetric,
}

impl DbscanParams {
    pub fn euclidean(eps: f64, min_samples: usize) -> Self {
        Self {
            eps,
            min_samples,
            metric: DbscanMetric::Euclidean,
        }
    }

    pub fn precomputed(eps: f64, min_samples: usize) -> Self {
        Self {
            eps,
            min_samples,
            metric: DbscanMetric::Precomputed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::param("eps", format!("radius {} must be positive", self.eps)));
        }
        if self.min_samples == 0 {
            return Err(Error::param("min_samples", "must be at least 1"));
        }
        Ok(())
    }
}

/// Labels for `subset` (same order): cluster ids from 0, or [`NOISE`].
pub fn dbscan(space: &MetricSpace, subset: &[usize], params: &DbscanParams) -> Result<Vec<i32>> {
    params.validate()?;
    match (space, params.metric) {
        (MetricSpace::Points(_), DbscanMetric::Precomputed) => {
            return Err(Error::param(
                "metric",
                "precomputed metric requires a distance matrix",
            ))
        }
        (MetricSpace::Distances(_), DbscanMetric::Euclidean) => {
            return Err(Error::param(
                "metric",
                "euclidean metric requires point coordinates, got a distance matrix",
            ))
        }
        _ => {}
    }
    if subset.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= space.len()) {
        return Err(Error::data(format!("subset index {bad} out of range")));
    }
    match space {
        MetricSpace::Points(pc) if pc.dim() <= 3 => Ok(grid_dbscan(pc, subset, params)),
        _ => Ok(scan_dbscan(space, subset, params)),
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so roots are deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Turns core flags, the core union-find, and each border point's chosen core
/// into labels numbered by lowest core index.
fn finish_labels(subset: &[usize], core: &[bool], dsu: &mut Dsu, border_core: &[Option<usize>]) -> Vec<i32> {
    let m = subset.len();
    let mut first_core = vec![usize::MAX; m];
    for pos in 0..m {
        if core[pos] {
            let r = dsu.find(pos);
            first_core[r] = first_core[r].min(subset[pos]);
        }
    }
    let mut roots: Vec<(usize, usize)> = (0..m)
        .filter(|&r| first_core[r] != usize::MAX)
        .map(|r| (first_core[r], r))
        .collect();
    roots.sort_unstable();
    let mut label_of_root = vec![NOISE; m];
    for (label, &(_, r)) in roots.iter().enumerate() {
        label_of_root[r] = label as i32;
    }
    (0..m)
        .map(|pos| {
            if core[pos] {
                label_of_root[dsu.find(pos)]
            } else if let Some(c) = border_core[pos] {
                label_of_root[dsu.find(c)]
            } else {
                NOISE
            }
        })
        .collect()
}

fn scan_dbscan(space: &MetricSpace, subset: &[usize], params: &DbscanParams) -> Vec<i32> {
    let m = subset.len();
    let eps = params.eps;
    let within = |a: usize, b: usize| -> bool {
        match space {
            MetricSpace::Points(pc) => {
                let (x, y) = (pc.point(subset[a]), pc.point(subset[b]));
                x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() <= eps * eps
            }
            MetricSpace::Distances(dm) => dm.get(subset[a], subset[b]) <= eps,
        }
    };
    let core: Vec<bool> = (0..m)
        .map(|a| {
            let mut count = 0;
            for b in 0..m {
                if within(a, b) {
                    count += 1;
                    if count >= params.min_samples {
                        return true;
                    }
                }
            }
            false
        })
        .collect();
    let mut dsu = Dsu::new(m);
    for a in 0..m {
        if !core[a] {
            continue;
        }
        for b in (a + 1)..m {
            if core[b] && within(a, b) {
                dsu.union(a, b);
            }
        }
    }
    let border: Vec<Option<usize>> = (0..m)
        .map(|a| {
            if core[a] {
                return None;
            }
            (0..m)
                .filter(|&b| core[b] && within(a, b))
                .min_by_key(|&b| subset[b])
        })
        .collect();
    finish_labels(subset, &core, &mut dsu, &border)
}

type CellKey = [i64; 3];

fn grid_dbscan(pc: &crate::data::PointCloud, subset: &[usize], params: &DbscanParams) -> Vec<i32> {
    let m = subset.len();
    let dim = pc.dim();
    let eps = params.eps;
    let eps_sq = eps * eps;
    // Shrunk slightly so two points sharing a cell are always strictly within eps.
    let side = eps / (dim as f64).sqrt() * (1.0 - 1e-9);
    let reach = (eps / side).ceil() as i64;

    let key_of = |p: &[f64]| -> CellKey {
        let mut k = [0i64; 3];
        for (slot, &x) in k.iter_mut().zip(p) {
            *slot = (x / side).floor() as i64;
        }
        k
    };
    let mut cells: HashMap<CellKey, Vec<usize>> = HashMap::new();
    let keys: Vec<CellKey> = subset.iter().map(|&i| key_of(pc.point(i))).collect();
    for (pos, k) in keys.iter().enumerate() {
        cells.entry(*k).or_default().push(pos);
    }

    // Offsets whose cells can hold a point within eps of some point of the
    // centre cell.
    let mut offsets: Vec<CellKey> = Vec::new();
    let span = |d: usize| if d < dim { -reach..=reach } else { 0..=0 };
    for a in span(0) {
        for b in span(1) {
            for c in span(2) {
                let gap: f64 = [a, b, c]
                    .iter()
                    .map(|&o| ((o.abs() - 1).max(0) as f64 * side).powi(2))
                    .sum();
                if gap <= eps_sq * (1.0 + 1e-9) {
                    offsets.push([a, b, c]);
                }
            }
        }
    }
    let shifted = |k: &CellKey, o: &CellKey| [k[0] + o[0], k[1] + o[1], k[2] + o[2]];
    let within = |a: usize, b: usize| -> bool {
        let (x, y) = (pc.point(subset[a]), pc.point(subset[b]));
        x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() <= eps_sq
    };

    let core: Vec<bool> = (0..m)
        .map(|a| {
            let home = &cells[&keys[a]];
            if home.len() >= params.min_samples {
                return true;
            }
            let mut count = 0;
            for o in &offsets {
                if let Some(members) = cells.get(&shifted(&keys[a], o)) {
                    for &b in members {
                        if within(a, b) {
                            count += 1;
                            if count >= params.min_samples {
                                return true;
                            }
                        }
                    }
                }
            }
            false
        })
        .collect();

    let mut dsu = Dsu::new(m);
    let mut core_cells: Vec<(CellKey, Vec<usize>)> = cells
        .iter()
        .filter_map(|(k, members)| {
            let cores: Vec<usize> = members.iter().copied().filter(|&p| core[p]).collect();
            (!cores.is_empty()).then(|| (*k, cores))
        })
        .collect();
    core_cells.sort_unstable_by_key(|(k, _)| *k);
    let core_index: HashMap<CellKey, usize> =
        core_cells.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();
    for (_, cores) in &core_cells {
        for w in cores.windows(2) {
            dsu.union(w[0], w[1]);
        }
    }
    for (k, cores) in &core_cells {
        for o in &offsets {
            if *o <= [0, 0, 0] {
                continue;
            }
            let Some(&other) = core_index.get(&shifted(k, o)) else {
                continue;
            };
            let others = &core_cells[other].1;
            if dsu.find(cores[0]) == dsu.find(others[0]) {
                continue;
            }
            'search: for &a in cores {
                for &b in others {
                    if within(a, b) {
                        dsu.union(a, b);
                        break 'search;
                    }
                }
            }
        }
    }

    let border: Vec<Option<usize>> = (0..m)
        .map(|a| {
            if core[a] {
                return None;
            }
            let mut best: Option<usize> = None;
            for o in &offsets {
                if let Some(&ci) = core_index.get(&shifted(&keys[a], o)) {
                    for &b in &core_cells[ci].1 {
                        if within(a, b) && best.map_or(true, |cur| subset[b] < subset[cur]) {
                            best = Some(b);
                        }
                    }
                }
            }
            best
        })
        .collect();
    finish_labels(subset, &core, &mut dsu, &border)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DistanceMatrix, PointCloud};

    fn pts(rows: &[[f64; 2]]) -> MetricSpace {
        MetricSpace::Points(PointCloud::from_rows(rows).unwrap())
    }

    #[test]
    fn three_close_points_form_one_cluster() {
        let s = pts(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]]);
        let labels = dbscan(&s, &[0, 1, 2], &DbscanParams::euclidean(0.5, 3)).unwrap();
        assert_eq!(labels, vec![0, 0, 0]);
    }

    #[test]
    fn isolated_point_is_noise() {
        let s = pts(&[[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [9.0, 9.0]]);
        let labels = dbscan(&s, &[0, 1, 2, 3], &DbscanParams::euclidean(0.5, 3)).unwrap();
        assert_eq!(labels, vec![0, 0, 0, NOISE]);
    }

    #[test]
    fn border_point_goes_to_lowest_core() {
        // Two dense groups with a shared border point at x = 1.0.
        let s = pts(&[
            [1.0, 0.0],
            [2.0, 0.0],
            [2.05, 0.0],
            [2.1, 0.0],
            [0.0, 0.0],
            [-0.05, 0.0],
            [-0.1, 0.0],
        ]);
        let subset: Vec<usize> = (0..7).collect();
        let labels = dbscan(&s, &subset, &DbscanParams::euclidean(1.0, 4)).unwrap();
        // Point 0 reaches cores 1 and 4; core 1 has the lower index.
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[1], labels[4]);
        assert_eq!(labels[1], 0);
    }

    #[test]
    fn precomputed_matches_points() {
        let rows = [[0.0, 0.0], [0.3, 0.0], [0.6, 0.0], [5.0, 5.0], [5.2, 5.0], [5.4, 5.1]];
        let pc = PointCloud::from_rows(&rows).unwrap();
        let n = rows.len();
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                flat[i * n + j] = pc.distance(i, j);
            }
        }
        let dm = MetricSpace::Distances(DistanceMatrix::from_flat(flat, n).unwrap());
        let subset: Vec<usize> = (0..n).collect();
        let a = dbscan(&MetricSpace::Points(pc), &subset, &DbscanParams::euclidean(0.35, 2)).unwrap();
        let b = dbscan(&dm, &subset, &DbscanParams::precomputed(0.35, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn metric_mismatch_and_bad_params() {
        let s = pts(&[[0.0, 0.0]]);
        assert!(dbscan(&s, &[0], &DbscanParams::precomputed(0.5, 1)).is_err());
        assert!(dbscan(&s, &[0], &DbscanParams::euclidean(0.0, 1)).is_err());
        assert!(dbscan(&s, &[0], &DbscanParams::euclidean(1.0, 0)).is_err());
        assert_eq!(dbscan(&s, &[], &DbscanParams::euclidean(1.0, 1)).unwrap(), Vec::<i32>::new());
    }

    #[test]
    fn duplicates_count_towards_core() {
        let s = pts(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(dbscan(&s, &[0, 1, 2], &DbscanParams::euclidean(0.1, 3)).unwrap(), vec![0, 0, 0]);
    }
}
