//! One-dimensional Gaussian mixtures fitted by expectation maximization.
//!
//! Components are kept sorted by mean; the cover construction relies on that
//! order to pair adjacent components.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::FilterValues;
use crate::error::{Error, Result};
use crate::exec;
use crate::normal::{Component1D, Normal};
use crate::seeding::{derive_seed, rng_from_seed};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const DEGENERATE_WEIGHT: f64 = 1e-8;
const NEGLIGIBLE_LOG: f64 = -40.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRepr", into = "MixtureRepr")]
pub struct GaussianMixture1D {
    weights: Vec<f64>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MixtureRepr {
    weights: Vec<f64>,
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

impl TryFrom<MixtureRepr> for GaussianMixture1D {
    type Error = Error;
    fn try_from(r: MixtureRepr) -> Result<Self> {
        GaussianMixture1D::new(r.weights, r.means, r.stddevs)
    }
}

impl From<GaussianMixture1D> for MixtureRepr {
    fn from(m: GaussianMixture1D) -> Self {
        MixtureRepr {
            weights: m.weights,
            means: m.means,
            stddevs: m.stddevs,
        }
    }
}

impl GaussianMixture1D {
    /// Builds a mixture from parallel component vectors. Components are sorted
    /// by mean (stable), and weights must already sum to one.
    pub fn new(weights: Vec<f64>, means: Vec<f64>, stddevs: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || stddevs.len() != k {
            return Err(Error::param(
                "components",
                "weights, means and stddevs must be non-empty and of equal length",
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("weights", "must be finite and non-negative"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::param("weights", "must sum to 1"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::param("means", "must be finite"));
        }
        if stddevs.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::param("stddevs", "must be finite and positive"));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
        Ok(Self {
            weights: order.iter().map(|&i| weights[i]).collect(),
            means: order.iter().map(|&i| means[i]).collect(),
            stddevs: order.iter().map(|&i| stddevs[i]).collect(),
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64] {
        &self.stddevs
    }

    pub fn component(&self, i: usize) -> Result<Normal> {
        if i >= self.n_components() {
            return Err(Error::param(
                "component",
                format!("index {i} out of range for {} components", self.n_components()),
            ));
        }
        Ok(Normal::new(self.means[i], self.stddevs[i]))
    }

    /// Posterior component probabilities for each value.
    pub fn posterior(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let params = Params::from(self);
        let (offsets, inv_sd) = params.kernel();
        values
            .iter()
            .map(|&x| {
                let mut row = vec![0.0; self.n_components()];
                params.responsibilities(x, &offsets, &inv_sd, &mut row);
                row
            })
            .collect()
    }
}

/// `Σ_i log Σ_k w_k φ(v_i; μ_k, σ_k)`, evaluated with log-sum-exp.
pub fn log_likelihood(gmm: &GaussianMixture1D, values: &[f64]) -> f64 {
    Params::from(gmm).log_likelihood(values)
}

pub fn component_quantile(gmm: &GaussianMixture1D, i: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("quantile level {q} must lie in (0, 1)")));
    }
    Ok(gmm.component(i)?.quantile(q))
}

pub fn component_cdf(gmm: &GaussianMixture1D, i: usize, x: f64) -> Result<f64> {
    Ok(gmm.component(i)?.cdf(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when `|ΔLL| <= rel_tol * |LL|`.
    pub rel_tol: f64,
    /// Lower bound on component variance. `None` uses `1e-6 * range²` of the
    /// data (or `1e-12` when the data has zero range).
    pub variance_floor: Option<f64>,
    /// Total starts: one quantile-based start plus `n_init - 1` random ones.
    pub n_init: usize,
    pub seed: u64,
    /// How the first start is seeded.
    pub init: EmInit,
}

/// Seeding of the deterministic first start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmInit {
    /// Means at the `(k - 0.5) / n` quantiles, uniform weights, pooled variance.
    #[default]
    Quantile,
    /// 1-D k-means started from the quantile means; each cluster gives a
    /// component's weight, mean and variance.
    Kmeans,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-8,
            variance_floor: None,
            n_init: 5,
            seed: 0,
            init: EmInit::Quantile,
        }
    }
}

impl EmConfig {
    /// Early-stopping fit from a single k-means start: `rel_tol = 1e-3`, at
    /// most 100 iterations. Components stay close to the k-means partition
    /// instead of collapsing onto density spikes.
    pub fn loose() -> Self {
        Self {
            max_iters: 100,
            rel_tol: 1e-3,
            n_init: 1,
            init: EmInit::Kmeans,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::param("rel_tol", "must be positive"));
        }
        if let Some(f) = self.variance_floor {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::param("variance_floor", "must be positive"));
            }
        }
        if self.n_init == 0 {
            return Err(Error::param("n_init", "must be at least 1"));
        }
        Ok(())
    }
}

/// Per-start record of an EM run.
#[derive(Clone, Debug)]
pub struct RestartTrace {
    /// Log-likelihood of the parameters entering each E-step; the last entry
    /// belongs to the returned parameters.
    pub log_likelihoods: Vec<f64>,
    /// Indices into `log_likelihoods` whose parameters came out of an M-step
    /// that re-seeded a degenerate component.
    pub reinitialized: Vec<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct FitTrace {
    pub model: GaussianMixture1D,
    pub restarts: Vec<RestartTrace>,
    pub best_restart: usize,
}

pub fn fit_gmm(values: &FilterValues, n: usize, cfg: &EmConfig) -> Result<GaussianMixture1D> {
    fit_gmm_traced(values, n, cfg).map(|t| t.model)
}

/// Fits with every restart and returns the winner along with the per-start
/// log-likelihood traces. The winner maximizes final log-likelihood, ties going
/// to the lower restart index.
pub fn fit_gmm_traced(values: &FilterValues, n: usize, cfg: &EmConfig) -> Result<FitTrace> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::param("n", "number of components must be at least 1"));
    }
    let data = values.as_slice();
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut counts: Vec<f64> = Vec::with_capacity(sorted.len());
    for &x in &sorted {
        if distinct.last() == Some(&x) {
            *counts.last_mut().expect("paired with distinct") += 1.0;
        } else {
            distinct.push(x);
            counts.push(1.0);
        }
    }
    if distinct.len() < n {
        return Err(Error::data(format!(
            "{} distinct values cannot support {n} mixture components",
            distinct.len()
        )));
    }
    let range = sorted[sorted.len() - 1] - sorted[0];
    let floor = match cfg.variance_floor {
        Some(f) => f,
        None if range > 0.0 => 1e-6 * range * range,
        None => 1e-12,
    };

    let runs = exec::map_range(cfg.n_init, |restart| {
        let init = if restart == 0 {
            match cfg.init {
                EmInit::Quantile => quantile_init(&sorted, n, floor),
                EmInit::Kmeans => kmeans_init(&distinct, &counts, quantile_init(&sorted, n, floor).means, floor),
            }
        } else {
            random_init(data, &distinct, n, floor, derive_seed(cfg.seed, restart as u64))
        };
        run_em(&distinct, &counts, init, cfg, floor)
    });

    let mut restarts = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, f64, Params)> = None;
    for (i, run) in runs.into_iter().enumerate() {
        let (params, trace) = run?;
        let ll = *trace.log_likelihoods.last().expect("at least one E-step");
        if best.as_ref().map_or(true, |(_, b, _)| ll > *b) {
            best = Some((i, ll, params));
        }
        restarts.push(trace);
    }
    let (best_restart, _, params) = best.expect("n_init >= 1");
    let model = GaussianMixture1D::new(
        normalize(params.weights),
        params.means,
        params.variances.iter().map(|v| v.sqrt()).collect(),
    )?;
    Ok(FitTrace {
        model,
        restarts,
        best_restart,
    })
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

#[derive(Clone, Debug)]
struct Params {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl From<&GaussianMixture1D> for Params {
    fn from(g: &GaussianMixture1D) -> Self {
        Params {
            weights: g.weights.clone(),
            means: g.means.clone(),
            variances: g.stddevs.iter().map(|s| s * s).collect(),
        }
    }
}

/// Responsibility-weighted sums gathered during the E-step, taken relative to
/// the current means so the variance update does not cancel.
struct Moments {
    nk: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            nk: vec![0.0; k],
            s1: vec![0.0; k],
            s2: vec![0.0; k],
        }
    }

    fn clear(&mut self) {
        for v in [&mut self.nk, &mut self.s1, &mut self.s2] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

impl Params {
    /// Log-density offsets and inverse standard deviations per component.
    fn kernel(&self) -> (Vec<f64>, Vec<f64>) {
        let offsets = (0..self.weights.len())
            .map(|j| self.weights[j].ln() - 0.5 * self.variances[j].ln() - LN_SQRT_2PI)
            .collect();
        let inv_sd = self.variances.iter().map(|v| 1.0 / v.sqrt()).collect();
        (offsets, inv_sd)
    }

    /// Normalized responsibilities of `x` written into `row`; returns the
    /// log-likelihood of `x`.
    fn responsibilities(&self, x: f64, offsets: &[f64], inv_sd: &[f64], row: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (j, r) in row.iter_mut().enumerate() {
            let z = (x - self.means[j]) * inv_sd[j];
            *r = offsets[j] - 0.5 * z * z;
            if *r > max {
                max = *r;
            }
        }
        let mut s = 0.0;
        for r in row.iter_mut() {
            let d = *r - max;
            // exp(-40) is below half an ulp of the row sum, which is >= 1.
            *r = if d > NEGLIGIBLE_LOG { d.exp() } else { 0.0 };
            s += *r;
        }
        let inv = 1.0 / s;
        row.iter_mut().for_each(|r| *r *= inv);
        max + s.ln()
    }

    /// One E-step over distinct values with multiplicities. Fills per-value
    /// log-likelihoods and the moments the M-step needs; returns the total
    /// log-likelihood.
    fn e_step(&self, values: &[f64], counts: &[f64], point_ll: &mut [f64], acc: &mut Moments) -> f64 {
        let (offsets, inv_sd) = self.kernel();
        let mut row = vec![0.0; self.weights.len()];
        acc.clear();
        let mut total = 0.0;
        for ((&x, &c), pll) in values.iter().zip(counts).zip(point_ll.iter_mut()) {
            *pll = self.responsibilities(x, &offsets, &inv_sd, &mut row);
            total += c * *pll;
            for (j, &r) in row.iter().enumerate() {
                if r > 0.0 {
                    let w = c * r;
                    let d = x - self.means[j];
                    acc.nk[j] += w;
                    acc.s1[j] += w * d;
                    acc.s2[j] += w * d * d;
                }
            }
        }
        total
    }

    fn log_likelihood(&self, values: &[f64]) -> f64 {
        let (offsets, inv_sd) = self.kernel();
        let mut row = vec![0.0; self.weights.len()];
        values
            .iter()
            .map(|&x| self.responsibilities(x, &offsets, &inv_sd, &mut row))
            .sum()
    }

    /// Returns true when a degenerate component had to be re-seeded.
    fn m_step(&mut self, values: &[f64], counts: &[f64], acc: &Moments, point_ll: &[f64], floor: f64) -> bool {
        let k = self.weights.len();
        let n: f64 = counts.iter().sum();
        for j in 0..k {
            let nk = acc.nk[j];
            self.weights[j] = nk / n;
            if nk > 0.0 {
                let shift = acc.s1[j] / nk;
                self.means[j] += shift;
                self.variances[j] = (acc.s2[j] / nk - shift * shift).max(floor);
            } else {
                self.variances[j] = floor;
            }
        }

        let degenerate: Vec<usize> = (0..k).filter(|&j| self.weights[j] < DEGENERATE_WEIGHT).collect();
        if degenerate.is_empty() {
            return false;
        }
        // Re-seed each degenerate component on the currently worst-explained
        // values, one value per component.
        let mut worst: Vec<usize> = (0..values.len()).collect();
        worst.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in values {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let spread = ((hi - lo) / k as f64).powi(2).max(floor);
        for (slot, &j) in degenerate.iter().enumerate() {
            let at = worst[slot.min(worst.len() - 1)];
            self.means[j] = values[at];
            self.variances[j] = spread;
            self.weights[j] = 1.0 / k as f64;
        }
        let s: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= s);
        true
    }
}

/// EM over distinct `values` with multiplicities `counts`.
fn run_em(values: &[f64], counts: &[f64], mut params: Params, cfg: &EmConfig, floor: f64) -> Result<(Params, RestartTrace)> {
    let mut acc = Moments::new(params.weights.len());
    let mut point_ll = vec![0.0; values.len()];
    let mut trace = RestartTrace {
        log_likelihoods: Vec::new(),
        reinitialized: Vec::new(),
        converged: false,
    };
    let mut previous: Option<f64> = None;
    for iter in 0..=cfg.max_iters {
        let ll = params.e_step(values, counts, &mut point_ll, &mut acc);
        if !ll.is_finite() {
            return Err(Error::Numeric(format!(
                "mixture log-likelihood became non-finite at iteration {iter}"
            )));
        }
        trace.log_likelihoods.push(ll);
        if let Some(prev) = previous {
            if (ll - prev).abs() <= cfg.rel_tol * prev.abs() {
                trace.converged = true;
                break;
            }
        }
        if iter == cfg.max_iters {
            break;
        }
        let reseeded = params.m_step(values, counts, &acc, &point_ll, floor);
        if reseeded {
            trace.reinitialized.push(trace.log_likelihoods.len());
            previous = None;
        } else {
            previous = Some(ll);
        }
    }
    Ok((params, trace))
}

fn pooled_variance(values: &[f64], means: &[f64], floor: f64) -> f64 {
    let ss: f64 = values
        .iter()
        .map(|&x| {
            means
                .iter()
                .map(|m| (x - m) * (x - m))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    (ss / values.len() as f64).max(floor)
}

/// Means at the `(k - 0.5) / n` empirical quantiles, uniform weights, pooled
/// within-group variance.
fn quantile_init(sorted: &[f64], n: usize, floor: f64) -> Params {
    let len = sorted.len();
    let means: Vec<f64> = (1..=n)
        .map(|k| {
            let q = (k as f64 - 0.5) / n as f64;
            let pos = q * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect();
    let var = pooled_variance(sorted, &means, floor);
    Params {
        weights: vec![1.0 / n as f64; n],
        variances: vec![var; n],
        means,
    }
}

/// Lloyd iterations over sorted distinct values with multiplicities, then
/// per-cluster moments. Empty clusters keep their centre and the pooled spread.
fn kmeans_init(values: &[f64], counts: &[f64], mut centres: Vec<f64>, floor: f64) -> Params {
    let k = centres.len();
    let mut bounds = vec![0usize; k + 1];
    for _ in 0..300 {
        bounds[k] = values.len();
        for j in 1..k {
            let mid = 0.5 * (centres[j - 1] + centres[j]);
            bounds[j] = values.partition_point(|&x| x < mid).max(bounds[j - 1]);
        }
        let mut moved = false;
        for j in 0..k {
            let (lo, hi) = (bounds[j], bounds[j + 1]);
            let w: f64 = counts[lo..hi].iter().sum();
            if w > 0.0 {
                let m = values[lo..hi].iter().zip(&counts[lo..hi]).map(|(x, c)| x * c).sum::<f64>() / w;
                moved |= m != centres[j];
                centres[j] = m;
            }
        }
        if !moved {
            break;
        }
    }
    let total: f64 = counts.iter().sum();
    let pooled = {
        let ss: f64 = (0..k)
            .flat_map(|j| (bounds[j]..bounds[j + 1]).map(move |i| (i, j)))
            .map(|(i, j)| counts[i] * (values[i] - centres[j]).powi(2))
            .sum();
        (ss / total).max(floor)
    };
    let mut weights = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for j in 0..k {
        let (lo, hi) = (bounds[j], bounds[j + 1]);
        let w: f64 = counts[lo..hi].iter().sum();
        if w > 0.0 {
            let ss: f64 = values[lo..hi]
                .iter()
                .zip(&counts[lo..hi])
                .map(|(x, c)| c * (x - centres[j]).powi(2))
                .sum();
            weights.push(w / total);
            variances.push((ss / w).max(floor));
        } else {
            weights.push(1.0 / total);
            variances.push(pooled);
        }
    }
    Params {
        weights: normalize(weights),
        means: centres,
        variances,
    }
}

fn random_init(values: &[f64], distinct: &[f64], n: usize, floor: f64, seed: u64) -> Params {
    let mut rng = rng_from_seed(seed);
    let mut means: Vec<f64> = sample(&mut rng, distinct.len(), n)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    means.sort_by(f64::total_cmp);
    let var = pooled_variance(values, &means, floor);
    Params {
        weights: vec![1.0 / n as f64; n],
        variances: vec![var; n],
        means,
    }
}
