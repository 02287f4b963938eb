//! Interval covers of the filter range: the mixture-quantile cover, the upper
//! bound on its quantile level that keeps adjacent intervals overlapping, the
//! classic uniform cover, and pullback of intervals to point index sets.

use serde::{Deserialize, Serialize};

use crate::data::FilterValues;
use crate::error::{Error, Result};
use crate::mixture::GaussianMixture1D;
use crate::normal::{std_normal_sf, Component1D};

/// Closed interval `[start, end]` with `start < end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start < end) || !start.is_finite() || !end.is_finite() {
            return Err(Error::Numeric(format!("degenerate interval [{start}, {end}]")));
        }
        Ok(Self { start, end })
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x <= self.end
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    /// Length of the intersection, zero when disjoint.
    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoverParams {
    Classic { n: usize, p: f64 },
    DMapper { n: usize, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    intervals: Vec<Interval>,
    params: CoverParams,
}

impl Cover {
    pub fn new(mut intervals: Vec<Interval>, params: CoverParams) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::data("a cover needs at least one interval"));
        }
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
        Ok(Self { intervals, params })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn params(&self) -> CoverParams {
        self.params
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let intervals: Vec<[f64; 2]> = self.intervals.iter().map(|u| [u.start, u.end]).collect();
        match self.params {
            CoverParams::Classic { n, p } => serde_json::json!({
                "mode": "classic", "n": n, "p": p, "intervals": intervals,
            }),
            CoverParams::DMapper { n, alpha } => serde_json::json!({
                "mode": "dmapper", "n": n, "alpha": alpha, "intervals": intervals,
            }),
        }
    }
}

/// Interval `i` spans the central `1 - alpha` mass of sorted component `i`.
pub fn quantile_cover(gmm: &GaussianMixture1D, alpha: f64) -> Result<Cover> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} must lie in (0, 1)")));
    }
    let intervals = (0..gmm.n_components())
        .map(|i| {
            let c = gmm.component(i)?;
            Interval::new(c.quantile(alpha / 2.0), c.quantile(1.0 - alpha / 2.0))
        })
        .collect::<Result<Vec<_>>>()?;
    // Components are sorted by mean and the intervals are symmetric around the
    // means, so ordering by start could only differ under extreme spread
    // differences; `Cover::new` sorts by start regardless.
    Cover::new(
        intervals,
        CoverParams::DMapper {
            n: gmm.n_components(),
            alpha,
        },
    )
}

/// The `α` at which the upper end of component `i` meets the lower end of
/// component `i + 1`, for every adjacent sorted pair.
///
/// For Gaussians the crossing solves `μ_i + σ_i z = μ_{i+1} - σ_{i+1} z`, so
/// `α = 2 (1 - Φ(z))` with `z = (μ_{i+1} - μ_i) / (σ_i + σ_{i+1})`, clamped
/// into `(0, 1]`.
pub fn pairwise_crossing_alphas(gmm: &GaussianMixture1D) -> Vec<f64> {
    let (m, s) = (gmm.means(), gmm.stddevs());
    (0..gmm.n_components().saturating_sub(1))
        .map(|i| {
            let z = (m[i + 1] - m[i]) / (s[i] + s[i + 1]);
            (2.0 * std_normal_sf(z)).clamp(f64::MIN_POSITIVE, 1.0)
        })
        .collect()
}

/// Largest `α` keeping every adjacent pair whose crossing level is at least
/// `alpha_star` overlapping. Pairs below `alpha_star` are allowed to separate.
/// Returns 1 when every pair is excluded.
pub fn alpha_upper_bound(gmm: &GaussianMixture1D, alpha_star: f64) -> Result<f64> {
    if gmm.n_components() < 2 {
        return Err(Error::param(
            "n_components",
            "the alpha upper bound needs at least two components",
        ));
    }
    if !(alpha_star > 0.0 && alpha_star < 1.0) {
        return Err(Error::param("alpha_star", format!("{alpha_star} must lie in (0, 1)")));
    }
    Ok(pairwise_crossing_alphas(gmm)
        .into_iter()
        .filter(|&a| a >= alpha_star)
        .fold(1.0, f64::min))
}

/// Crossing level for an arbitrary pair of components by bisection on
/// `left.quantile(1 - α/2) - right.quantile(α/2)`, which is decreasing in `α`.
/// Bracket `(1e-12, 1 - 1e-12)`, tolerance `1e-12`. Returns the bracket end
/// when the sign never changes inside it.
pub fn crossing_alpha_bisect<L: Component1D, R: Component1D>(left: &L, right: &R) -> f64 {
    let gap = |a: f64| left.quantile(1.0 - a / 2.0) - right.quantile(a / 2.0);
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-12);
    if gap(hi) >= 0.0 {
        return 1.0;
    }
    if gap(lo) < 0.0 {
        return lo;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `n` equal intervals over `[min, max]` whose consecutive overlap is the
/// fraction `p` of the interval length.
pub fn uniform_cover(values: &FilterValues, n: usize, p: f64) -> Result<Cover> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param("p", format!("overlap {p} must lie in [0, 1)")));
    }
    let (lo, hi) = values
        .min_max()
        .ok_or_else(|| Error::data("cannot build a cover over no values"))?;
    if !(hi > lo) {
        return Err(Error::data("filter values have zero range"));
    }
    let length = (hi - lo) / (n as f64 - (n as f64 - 1.0) * p);
    let stride = length * (1.0 - p);
    let mut intervals = Vec::with_capacity(n);
    for i in 0..n {
        let start = if i == 0 { lo } else { lo + i as f64 * stride };
        let end = if i + 1 == n { hi } else { start + length };
        intervals.push(Interval::new(start, end)?);
    }
    Cover::new(intervals, CoverParams::Classic { n, p })
}

/// Index sets `{ j : start_i <= values[j] <= end_i }`, one per interval, each
/// in ascending index order.
pub fn pullback(cover: &Cover, values: &FilterValues) -> Vec<Vec<usize>> {
    // Values sorted once; each interval is then a contiguous run.
    let v = values.as_slice();
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| v[i]).collect();
    cover
        .intervals()
        .iter()
        .map(|u| {
            let from = sorted.partition_point(|&x| x < u.start);
            let to = sorted.partition_point(|&x| x <= u.end);
            let mut set = order[from..to.max(from)].to_vec();
            set.sort_unstable();
            set
        })
        .collect()
}

/// Indices of values lying in no interval; empty means full coverage.
pub fn coverage_check(cover: &Cover, values: &FilterValues) -> Vec<usize> {
    values
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &x)| !cover.intervals().iter().any(|u| u.contains(x)))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::Normal;

    fn fv(v: &[f64]) -> FilterValues {
        FilterValues::new(v.to_vec()).unwrap()
    }

    fn mix(means: &[f64], sds: &[f64]) -> GaussianMixture1D {
        let k = means.len();
        GaussianMixture1D::new(vec![1.0 / k as f64; k], means.to_vec(), sds.to_vec()).unwrap()
    }

    #[test]
    fn quantile_cover_single_component() {
        let c = quantile_cover(&mix(&[0.0], &[1.0]), 0.1).unwrap();
        let u = c.intervals()[0];
        assert!((u.start + 1.6449).abs() < 1e-4 && (u.end - 1.6449).abs() < 1e-4);
        assert!(quantile_cover(&mix(&[0.0], &[1.0]), 0.0).is_err());
        assert!(quantile_cover(&mix(&[0.0], &[1.0]), 1.0).is_err());
    }

    #[test]
    fn overlap_and_gap_either_side_of_bound() {
        let g = mix(&[0.0, 3.0], &[1.0, 1.0]);
        let tight = quantile_cover(&g, 0.01).unwrap();
        assert!(tight.intervals()[0].overlap(&tight.intervals()[1]) > 0.0);
        let loose = quantile_cover(&g, 0.2).unwrap();
        assert!(loose.intervals()[0].end < loose.intervals()[1].start);
    }

    #[test]
    fn alpha_bound_examples() {
        let g = mix(&[0.0, 3.0], &[1.0, 1.0]);
        let a = alpha_upper_bound(&g, 0.005).unwrap();
        let oracle = crossing_alpha_bisect(&Normal::new(0.0, 1.0), &Normal::new(3.0, 1.0));
        assert!((a - 0.1336).abs() < 1e-3);
        assert!((a - oracle).abs() < 1e-9);

        let same = mix(&[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(pairwise_crossing_alphas(&same), vec![1.0]);

        let far = mix(&[0.0, 8.0], &[1.0, 1.0]);
        let a = pairwise_crossing_alphas(&far)[0];
        assert!((a - 6.334e-5).abs() < 1e-7);
        assert_eq!(alpha_upper_bound(&far, 0.005).unwrap(), 1.0);

        assert!(alpha_upper_bound(&mix(&[0.0], &[1.0]), 0.005).is_err());
    }

    #[test]
    fn uniform_cover_examples() {
        let v = fv(&[0.0, 3.0, 10.0]);
        let c = uniform_cover(&v, 2, 0.0).unwrap();
        assert_eq!(c.intervals(), &[Interval { start: 0.0, end: 5.0 }, Interval { start: 5.0, end: 10.0 }]);
        let c = uniform_cover(&v, 2, 1.0 / 3.0).unwrap();
        let (a, b) = (c.intervals()[0], c.intervals()[1]);
        assert!((a.length() - 6.0).abs() < 1e-12 && (b.start - 4.0).abs() < 1e-12);
        assert!((a.overlap(&b) / a.length() - 1.0 / 3.0).abs() < 1e-12);
        let c = uniform_cover(&v, 1, 0.4).unwrap();
        assert_eq!(c.intervals(), &[Interval { start: 0.0, end: 10.0 }]);
        assert!(uniform_cover(&fv(&[2.0, 2.0]), 3, 0.1).is_err());
        assert!(uniform_cover(&v, 3, 1.0).is_err());
    }

    #[test]
    fn pullback_closed_membership() {
        let v = fv(&[0.0, 1.0, 2.0]);
        let c = Cover::new(
            vec![Interval::new(0.0, 1.0).unwrap(), Interval::new(1.0, 2.0).unwrap()],
            CoverParams::Classic { n: 2, p: 0.0 },
        )
        .unwrap();
        assert_eq!(pullback(&c, &v), vec![vec![0, 1], vec![1, 2]]);
        assert!(coverage_check(&c, &v).is_empty());

        let out = fv(&[-5.0]);
        let c = Cover::new(vec![Interval::new(0.0, 1.0).unwrap()], CoverParams::Classic { n: 1, p: 0.0 }).unwrap();
        assert_eq!(pullback(&c, &out), vec![Vec::<usize>::new()]);
        assert_eq!(coverage_check(&c, &out), vec![0]);
    }

    #[test]
    fn cover_json() {
        let c = uniform_cover(&fv(&[0.0, 10.0]), 2, 0.0).unwrap();
        let j = c.to_json();
        assert_eq!(j["mode"], "classic");
        assert_eq!(j["intervals"], serde_json::json!([[0.0, 5.0], [5.0, 10.0]]));
        let d = quantile_cover(&mix(&[0.0], &[1.0]), 0.1).unwrap().to_json();
        assert_eq!(d["alpha"], 0.1);
        assert!(d.get("p").is_none());
    }
}
