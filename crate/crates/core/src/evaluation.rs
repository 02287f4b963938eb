//! Silhouette, bottleneck bootstrap, topological signal rate and grid tuning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bottleneck::bottleneck;
use crate::cover::alpha_upper_bound;
use crate::data::{FilterValues, MetricSpace};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{graph_summary, GraphSummary, MapperGraph};
use crate::mixture::GaussianMixture1D;
use crate::persistence::{extended_diagram, ExtendedDiagram};
use crate::pipeline::{fit_cover_model, run_with_model, CoverSpec, Dataset, FilterSpec, MapperRun, PipelineParams};
use crate::seeding::{derive_seed, rng_from_seed};

/// Largest share of bootstrap replicates allowed to fail.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 100,
            confidence: 0.85,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::param("replicates", "must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param("confidence", format!("{} is not in (0, 1)", self.confidence)));
        }
        Ok(())
    }
}

/// Weights of the adjusted score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { w1: 0.5, w2: 0.5 }
    }
}

/// Mean silhouette over every (point, node) membership.
///
/// Memberships of singleton nodes score 0, as do memberships where both the
/// compactness and the separation are zero.
pub fn silhouette(graph: &MapperGraph, space: &MetricSpace) -> Result<f64> {
    let k = graph.nodes.len();
    if k < 2 {
        return Err(Error::data(format!("silhouette needs at least 2 nodes, graph has {k}")));
    }
    let n = space.len();
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, node) in graph.nodes.iter().enumerate() {
        for &m in &node.members {
            if m >= n {
                return Err(Error::data(format!("node member {m} out of range")));
            }
            owners[m].push(j);
        }
    }
    let points: Vec<usize> = (0..n).filter(|&x| !owners[x].is_empty()).collect();
    let sizes: Vec<f64> = graph.nodes.iter().map(|nd| nd.members.len() as f64).collect();
    let per_point = exec::map_slice(&points, |&x| {
        let sums: Vec<f64> = graph
            .nodes
            .iter()
            .map(|nd| nd.members.iter().map(|&m| space.distance(x, m)).sum())
            .collect();
        owners[x]
            .iter()
            .map(|&i| {
                if graph.nodes[i].members.len() == 1 {
                    return 0.0;
                }
                let a = sums[i] / (sizes[i] - 1.0);
                let b = (0..k)
                    .filter(|&j| j != i)
                    .map(|j| sums[j] / sizes[j])
                    .fold(f64::INFINITY, f64::min);
                let denom = a.max(b);
                if denom > 0.0 {
                    (b - a) / denom
                } else {
                    0.0
                }
            })
            .collect::<Vec<f64>>()
    });
    let mut total = 0.0;
    let mut count = 0usize;
    for scores in per_point {
        count += scores.len();
        total += scores.iter().sum::<f64>();
    }
    Ok(total / count as f64)
}

/// Share of diagram points whose half-persistence exceeds `d_eps`.
pub fn tsr(diagram: &ExtendedDiagram, d_eps: f64) -> Result<f64> {
    if diagram.is_empty() {
        return Err(Error::data("topological signal rate of an empty diagram"));
    }
    if !(d_eps >= 0.0) {
        return Err(Error::param("d_eps", format!("{d_eps} is negative or NaN")));
    }
    let signal = diagram.points().iter().filter(|p| p.persistence() / 2.0 > d_eps).count();
    Ok(signal as f64 / diagram.len() as f64)
}

/// `w1 * (sc + 1) / 2 + w2 * tsr`.
pub fn sc_adj(sc: f64, tsr: f64, w1: f64, w2: f64) -> Result<f64> {
    if !(w1 >= 0.0 && w2 >= 0.0) || ((w1 + w2) - 1.0).abs() > 1e-12 {
        return Err(Error::param("weights", format!("({w1}, {w2}) must be non-negative and sum to 1")));
    }
    if !(-1.0..=1.0).contains(&sc) || !(0.0..=1.0).contains(&tsr) {
        return Err(Error::param("sc_adj", format!("sc {sc} or tsr {tsr} out of range")));
    }
    Ok(w1 * (sc + 1.0) / 2.0 + w2 * tsr)
}

/// Nearest-rank `q`-quantile of an unsorted sample.
pub fn nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// One resample: the drawn indices, its filter values and, for mixture
/// covers, the refitted model (or the reason the fit failed).
#[derive(Clone, Debug)]
struct Replicate {
    indices: Vec<usize>,
    values: FilterValues,
    model: std::result::Result<Option<GaussianMixture1D>, String>,
}

/// Resamples and per-replicate fits shared by every evaluation with the same
/// data, filter, seed and mixture settings. Only the cover parameter may vary.
#[derive(Clone, Debug)]
pub struct BootstrapPlan {
    cfg: BootstrapConfig,
    filter: FilterSpec,
    cover: CoverSpec,
    replicates: Vec<Replicate>,
}

impl BootstrapPlan {
    pub fn new(data: &Dataset, filter: FilterSpec, cover: &CoverSpec, cfg: BootstrapConfig) -> Result<Self> {
        cfg.validate()?;
        let n = data.len();
        if n == 0 {
            return Err(Error::data("cannot bootstrap an empty dataset"));
        }
        let full = data.filter_values(filter)?;
        let replicates = exec::map_range(cfg.replicates, |r| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, r as u64));
            let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let values = full.select(&indices);
            let model = fit_cover_model(&values, cover).map_err(|e| e.to_string());
            Replicate {
                indices,
                values,
                model,
            }
        });
        Ok(Self {
            cfg,
            filter,
            cover: *cover,
            replicates,
        })
    }

    pub fn config(&self) -> &BootstrapConfig {
        &self.cfg
    }

    fn compatible(&self, params: &PipelineParams) -> bool {
        let same_model = match (self.cover, params.cover) {
            (CoverSpec::Classic { n: a, .. }, CoverSpec::Classic { n: b, .. }) => a == b,
            (CoverSpec::DMapper { n: a, em: ea, .. }, CoverSpec::DMapper { n: b, em: eb, .. }) => a == b && ea == eb,
            _ => false,
        };
        same_model && self.filter == params.filter
    }
}

/// Bootstrap distances and the resulting noise band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    pub d_eps: f64,
    /// Distances of the successful replicates, in replicate order.
    pub distances: Vec<f64>,
    pub failed: usize,
}

fn run_replicate(data: &Dataset, params: &PipelineParams, rep: &Replicate, reference: &ExtendedDiagram) -> Result<f64> {
    let model = rep.model.clone().map_err(Error::Numeric)?;
    let sample = data.select(&rep.indices);
    let run = run_with_model(&sample, rep.values.clone(), params, model)?;
    if run.graph.nodes.is_empty() {
        return Err(Error::data("replicate graph has no nodes"));
    }
    let diagram = diagram_of(&run.graph)?;
    Ok(bottleneck(&diagram, reference))
}

/// Bootstraps the noise band around `reference` using a prepared plan.
pub fn bootstrap_with_plan(
    data: &Dataset,
    params: &PipelineParams,
    plan: &BootstrapPlan,
    reference: &ExtendedDiagram,
) -> Result<BootstrapOutcome> {
    if !plan.compatible(params) {
        return Err(Error::param("bootstrap", "plan was built for a different filter or mixture setting"));
    }
    let results = exec::map_slice(&plan.replicates, |rep| run_replicate(data, params, rep, reference));
    let total = results.len();
    let distances: Vec<f64> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failed = total - distances.len();
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        let first = results.into_iter().find_map(|r| r.err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Numeric(format!(
            "{failed} of {total} bootstrap replicates failed (first: {first})"
        )));
    }
    let d_eps = nearest_rank(&distances, plan.cfg.confidence)
        .ok_or_else(|| Error::Numeric("no bootstrap replicate succeeded".into()))?;
    Ok(BootstrapOutcome {
        d_eps,
        distances,
        failed,
    })
}

/// Runs the pipeline on `data` and returns the confidence-quantile of the
/// bottleneck distances between replicate diagrams and the original one.
pub fn bottleneck_bootstrap(data: &Dataset, params: &PipelineParams, cfg: &BootstrapConfig) -> Result<BootstrapOutcome> {
    let values = data.filter_values(params.filter)?;
    let model = fit_cover_model(&values, &params.cover)?;
    let run = run_with_model(data, values, params, model)?;
    let reference = diagram_of(&run.graph)?;
    let plan = BootstrapPlan::new(data, params.filter, &params.cover, *cfg)?;
    bootstrap_with_plan(data, params, &plan, &reference)
}

/// Extended diagram of a graph over its node mean filter values.
pub fn diagram_of(graph: &MapperGraph) -> Result<ExtendedDiagram> {
    let values: Vec<f64> = graph.nodes.iter().map(|n| n.mean_filter).collect();
    extended_diagram(graph, &values)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub sc: f64,
    pub sc_norm: f64,
    pub tsr: f64,
    pub sc_adj: f64,
    pub d_eps: f64,
    pub diagram: ExtendedDiagram,
    pub summary: GraphSummary,
    pub failed_replicates: usize,
    pub replicates: usize,
    pub replicate_distances: Vec<f64>,
}

impl EvalReport {
    /// JSON form; per-replicate distances only when asked for.
    pub fn to_json(&self, with_distances: bool) -> serde_json::Value {
        let mut v = serde_json::json!({
            "sc": self.sc,
            "sc_norm": self.sc_norm,
            "tsr": self.tsr,
            "sc_adj": self.sc_adj,
            "d_eps": self.d_eps,
            "diagram": self.diagram.to_json(),
            "summary": self.summary,
            "failed_replicates": self.failed_replicates,
            "replicates": self.replicates,
        });
        if with_distances {
            v["replicate_distances"] = self.replicate_distances.clone().into();
        }
        v
    }
}

/// Scores a finished run against a bootstrap plan.
pub fn evaluate_run(
    data: &Dataset,
    params: &PipelineParams,
    run: &MapperRun,
    plan: &BootstrapPlan,
    weights: ScoreWeights,
) -> Result<EvalReport> {
    let sc = silhouette(&run.graph, &data.space)?;
    let diagram = diagram_of(&run.graph)?;
    let boot = bootstrap_with_plan(data, params, plan, &diagram)?;
    let t = tsr(&diagram, boot.d_eps)?;
    let adj = sc_adj(sc, t, weights.w1, weights.w2)?;
    Ok(EvalReport {
        sc,
        sc_norm: (sc + 1.0) / 2.0,
        tsr: t,
        sc_adj: adj,
        d_eps: boot.d_eps,
        diagram,
        summary: graph_summary(&run.graph),
        failed_replicates: boot.failed,
        replicates: plan.cfg.replicates,
        replicate_distances: boot.distances,
    })
}

/// Full evaluation: run, silhouette, bootstrap, TSR and adjusted score.
pub fn evaluate(data: &Dataset, params: &PipelineParams, cfg: &BootstrapConfig, weights: ScoreWeights) -> Result<EvalReport> {
    let values = data.filter_values(params.filter)?;
    let model = fit_cover_model(&values, &params.cover)?;
    let run = run_with_model(data, values, params, model)?;
    let plan = BootstrapPlan::new(data, params.filter, &params.cover, *cfg)?;
    evaluate_run(data, params, &run, &plan, weights)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TuneConfig {
    pub grid_count: usize,
    /// Threshold below which crossing levels are ignored when bounding alpha.
    pub alpha_star: f64,
    pub bootstrap: BootstrapConfig,
    pub weights: ScoreWeights,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            grid_count: 50,
            alpha_star: 0.0,
            bootstrap: BootstrapConfig::default(),
            weights: ScoreWeights::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridPoint {
    pub parameter: f64,
    pub report: std::result::Result<EvalReport, String>,
}

#[derive(Clone, Debug)]
pub struct TuneResult {
    /// Upper end of the alpha range; `None` for classic covers.
    pub alpha_bound: Option<f64>,
    pub grid: Vec<GridPoint>,
    pub best: usize,
}

impl TuneResult {
    pub fn best_parameter(&self) -> f64 {
        self.grid[self.best].parameter
    }

    pub fn best_report(&self) -> &EvalReport {
        self.grid[self.best].report.as_ref().expect("best grid point succeeded")
    }
}

/// Index of the largest score; earlier entries win ties, `None` entries are
/// skipped.
pub fn pick_best(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Grid parameters: `k * upper / (grid_count + 1)` for `k = 1..=grid_count`.
pub fn grid_values(upper: f64, grid_count: usize) -> Vec<f64> {
    (1..=grid_count).map(|k| k as f64 * upper / (grid_count + 1) as f64).collect()
}

/// Evaluates a grid of cover parameters and picks the best adjusted score.
///
/// The parameter in `params.cover` is ignored. Mixture covers scan alpha
/// below the bound from the model fitted on the full data; classic covers
/// scan `p` below 0.5. Ties go to the smaller parameter.
pub fn grid_tune(data: &Dataset, params: &PipelineParams, cfg: &TuneConfig) -> Result<TuneResult> {
    if cfg.grid_count == 0 {
        return Err(Error::param("grid_count", "must be at least 1"));
    }
    let values = data.filter_values(params.filter)?;
    let model = fit_cover_model(&values, &params.cover)?;
    let (alpha_bound, upper) = match &model {
        Some(gmm) if gmm.n_components() >= 2 => {
            let bound = alpha_upper_bound(gmm, cfg.alpha_star)?;
            (Some(bound), bound)
        }
        Some(_) => (Some(1.0), 1.0),
        None => (None, 0.5),
    };
    let plan = BootstrapPlan::new(data, params.filter, &params.cover, cfg.bootstrap)?;
    let params_grid = grid_values(upper, cfg.grid_count);
    let reports = exec::map_slice(&params_grid, |&value| {
        let p = PipelineParams {
            cover: params.cover.with_parameter(value),
            ..*params
        };
        run_with_model(data, values.clone(), &p, model.clone())
            .and_then(|run| evaluate_run(data, &p, &run, &plan, cfg.weights))
            .map_err(|e| e.to_string())
    });
    let grid: Vec<GridPoint> = params_grid
        .into_iter()
        .zip(reports)
        .map(|(parameter, report)| GridPoint { parameter, report })
        .collect();
    let scores: Vec<Option<f64>> = grid.iter().map(|g| g.report.as_ref().ok().map(|r| r.sc_adj)).collect();
    let best = pick_best(&scores);
    let best = best.ok_or_else(|| {
        let reason = grid.iter().find_map(|g| g.report.as_ref().err().cloned()).unwrap_or_default();
        Error::Numeric(format!("every grid point failed (first: {reason})"))
    })?;
    Ok(TuneResult { alpha_bound, grid, best })
}
