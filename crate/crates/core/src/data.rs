//! Point clouds, distance matrices, filter values, and the filter functions
//! that project data onto the real line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::json::format_float;

/// Dense `n × d` matrix of finite coordinates stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::data("point dimension must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::data("point cloud must contain at least one point"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::data(format!(
                "{} coordinates do not form rows of width {dim}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::data(format!("non-finite coordinate in point {}", i / dim)));
        }
        Ok(Self { coords, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::data(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(coords, dim)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Cloud whose `k`-th point is `self.point(indices[k])`.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        Self {
            coords,
            dim: self.dim,
        }
    }

    /// Concatenates two clouds of equal dimension.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::data("cannot concatenate clouds of different dimension"));
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self {
            coords,
            dim: self.dim,
        })
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric `n × n` matrix with zero diagonal and non-negative finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    entries: Vec<f64>,
    n: usize,
}

impl DistanceMatrix {
    pub fn from_flat(entries: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::data(format!(
                "distance matrix needs n*n entries with n >= 1, got {} entries for n = {n}",
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::data(format!("diagonal entry ({i},{i}) is not zero")));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::data(format!(
                        "entry ({i},{j}) = {v} is not a finite non-negative distance"
                    )));
                }
                if v != entries[j * n + i] {
                    return Err(Error::data(format!("matrix is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { entries, n })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::data(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_flat(entries, n)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Matrix restricted to `indices` (with repetition allowed, as in bootstrap
    /// resampling).
    pub fn select(&self, indices: &[usize]) -> Self {
        let m = indices.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                entries.push(self.get(i, j));
            }
        }
        Self { entries, n: m }
    }
}

/// Projected coordinates, one per source point.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterValues(Vec<f64>);

impl FilterValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("filter value {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut it = self.0.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for FilterValues {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The space Mapper clusters in: raw coordinates under the Euclidean metric, or
/// a precomputed distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricSpace {
    Points(PointCloud),
    Distances(DistanceMatrix),
}

impl MetricSpace {
    pub fn len(&self) -> usize {
        match self {
            MetricSpace::Points(pc) => pc.len(),
            MetricSpace::Distances(dm) => dm.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        match self {
            MetricSpace::Points(pc) => pc.distance(i, j),
            MetricSpace::Distances(dm) => dm.get(i, j),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        match self {
            MetricSpace::Points(pc) => MetricSpace::Points(pc.select(indices)),
            MetricSpace::Distances(dm) => MetricSpace::Distances(dm.select(indices)),
        }
    }
}

pub fn project_axis(pc: &PointCloud, axis: usize) -> Result<FilterValues> {
    if axis >= pc.dim() {
        return Err(Error::param(
            "axis",
            format!("axis {axis} out of range for {}-dimensional points", pc.dim()),
        ));
    }
    Ok(FilterValues(pc.rows().map(|r| r[axis]).collect()))
}

pub fn coordinate_sum(pc: &PointCloud) -> FilterValues {
    FilterValues(pc.rows().map(|r| r.iter().sum()).collect())
}

/// Row means of the distance matrix. The zero diagonal is part of the mean,
/// so each row sum is divided by `n`.
pub fn mean_distance_filter(dm: &DistanceMatrix) -> FilterValues {
    let n = dm.len() as f64;
    FilterValues((0..dm.len()).map(|i| dm.row(i).iter().sum::<f64>() / n).collect())
}

/// Min-max scales off-diagonal entries onto `[0, 1]`; the diagonal stays zero.
pub fn minmax_scale(dm: &DistanceMatrix) -> Result<DistanceMatrix> {
    let n = dm.len();
    if n < 2 {
        return Err(Error::data("min-max scaling needs at least two points"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lo = lo.min(dm.get(i, j));
                hi = hi.max(dm.get(i, j));
            }
        }
    }
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::data(
            "all off-diagonal distances are equal; min-max scaling is undefined",
        ));
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = dm.get(i, j);
                // Pin the extremes so min and max land exactly on 0 and 1.
                entries[i * n + j] = if v == lo {
                    0.0
                } else if v == hi {
                    1.0
                } else {
                    ((v - lo) / range).clamp(0.0, 1.0)
                };
            }
        }
    }
    Ok(DistanceMatrix { entries, n })
}

/// Parses numeric rows separated by commas and/or whitespace. Blank lines are
/// skipped; CR characters from CRLF files are ignored.
pub(crate) fn parse_numeric_rows(text: &str, skip_header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if skip_header && idx == 0 {
            continue;
        }
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("`{tok}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_point_cloud_csv(path: impl AsRef<Path>, skip_header: bool) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    let rows = parse_numeric_rows(&text, skip_header)?;
    if rows.is_empty() {
        return Err(Error::data("point cloud file is empty"));
    }
    PointCloud::from_rows(&rows)
}

pub fn read_distance_matrix_csv(path: impl AsRef<Path>, skip_header: bool) -> Result<DistanceMatrix> {
    let text = fs::read_to_string(path)?;
    let rows = parse_numeric_rows(&text, skip_header)?;
    if rows.is_empty() {
        return Err(Error::data("distance matrix file is empty"));
    }
    DistanceMatrix::from_rows(&rows)
}

fn rows_to_csv<'a>(rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn point_cloud_to_csv(pc: &PointCloud) -> String {
    rows_to_csv(pc.rows())
}

pub fn distance_matrix_to_csv(dm: &DistanceMatrix) -> String {
    rows_to_csv((0..dm.len()).map(|i| dm.row(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(rows).unwrap()
    }

    #[test]
    fn axis_projection() {
        let pc = cloud(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(project_axis(&pc, 0).unwrap().as_slice(), &[1.0, 3.0]);
        assert_eq!(project_axis(&pc, 1).unwrap().as_slice(), &[2.0, 4.0]);
        let single = cloud(&[&[5.0]]);
        assert!(matches!(
            project_axis(&single, 2),
            Err(Error::InvalidParameter { name: "axis", .. })
        ));
    }

    #[test]
    fn coordinate_sums() {
        assert_eq!(coordinate_sum(&cloud(&[&[1.0, 2.0, 3.0]])).as_slice(), &[6.0]);
        assert_eq!(coordinate_sum(&cloud(&[&[0.0, 0.0]])).as_slice(), &[0.0]);
    }

    #[test]
    fn mean_distance_includes_diagonal() {
        let dm = DistanceMatrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(mean_distance_filter(&dm).as_slice(), &[1.0, 1.0]);
        let one = DistanceMatrix::from_rows(&[[0.0]]).unwrap();
        assert_eq!(mean_distance_filter(&one).as_slice(), &[0.0]);
    }

    #[test]
    fn minmax_endpoints_and_affine() {
        let dm = DistanceMatrix::from_rows(&[[0.0, 2.0], [2.0, 0.0]]);
        assert!(dm.is_ok());
        let dm = DistanceMatrix::from_rows(&[[0.0, 2.0, 3.0], [2.0, 0.0, 4.0], [3.0, 4.0, 0.0]])
            .unwrap();
        let s = minmax_scale(&dm).unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.get(0, 2), 0.5);
        assert_eq!(s.get(1, 2), 1.0);
        assert_eq!(s.get(2, 2), 0.0);
        assert_eq!(s.get(2, 1), 1.0);

        let two = DistanceMatrix::from_rows(&[[0.0, 2.0, 4.0], [2.0, 0.0, 2.0], [4.0, 2.0, 0.0]])
            .unwrap();
        let s = minmax_scale(&two).unwrap();
        assert_eq!((s.get(0, 1), s.get(0, 2)), (0.0, 1.0));
    }

    #[test]
    fn minmax_rejects_flat_matrix() {
        let dm = DistanceMatrix::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
            .unwrap();
        assert!(matches!(minmax_scale(&dm), Err(Error::Data(_))));
    }

    #[test]
    fn distance_matrix_validation() {
        assert!(DistanceMatrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(&[[0.0, -1.0], [-1.0, 0.0]]).is_err());
    }

    #[test]
    fn csv_parse_handles_crlf_and_errors() {
        let rows = parse_numeric_rows("1,2\r\n3 4\r\n", false).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let rows = parse_numeric_rows("x,y\n1,2\n", true).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0]]);
        match parse_numeric_rows("1,2\n3,abc\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let pc = cloud(&[&[0.5, -1.25], &[3.0, 1e-3]]);
        let text = point_cloud_to_csv(&pc);
        let back = PointCloud::from_rows(&parse_numeric_rows(&text, false).unwrap()).unwrap();
        assert_eq!(back, pc);
    }
}
