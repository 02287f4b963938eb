//! End-to-end Mapper runs: filter → cover → pullback → clustering → nerve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cover::{coverage_check, pullback, quantile_cover, uniform_cover, Cover};
use crate::data::{coordinate_sum, mean_distance_filter, project_axis, FilterValues, MetricSpace};
use crate::dbscan::{dbscan, DbscanParams};
use crate::error::{Error, Result};
use crate::graph::{build_nerve, MapperGraph};
use crate::mixture::{fit_gmm, EmConfig, GaussianMixture1D};

/// Filter function projecting the data onto the real line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterSpec {
    /// One coordinate of each point.
    Axis(usize),
    /// Sum of all coordinates.
    Sum,
    /// Row mean of the distance matrix.
    MeanDistance,
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::Axis(k) => write!(f, "axis:{k}"),
            FilterSpec::Sum => f.write_str("sum"),
            FilterSpec::MeanDistance => f.write_str("mean-distance"),
        }
    }
}

impl FromStr for FilterSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(FilterSpec::Sum),
            "mean-distance" => Ok(FilterSpec::MeanDistance),
            _ => s
                .strip_prefix("axis:")
                .and_then(|k| k.parse().ok())
                .map(FilterSpec::Axis)
                .ok_or_else(|| {
                    Error::param("filter", format!("`{s}` is not one of axis:<k>, sum, mean-distance"))
                }),
        }
    }
}

impl Serialize for FilterSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FilterSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMode {
    Classic,
    Dmapper,
}

impl FromStr for CoverMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(CoverMode::Classic),
            "dmapper" | "d-mapper" => Ok(CoverMode::Dmapper),
            _ => Err(Error::param("mode", format!("`{s}` is not classic or dmapper"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoverSpec {
    Classic { n: usize, p: f64 },
    DMapper { n: usize, alpha: f64, em: EmConfig },
}

impl CoverSpec {
    pub fn n(&self) -> usize {
        match *self {
            CoverSpec::Classic { n, .. } | CoverSpec::DMapper { n, .. } => n,
        }
    }

    pub fn mode(&self) -> CoverMode {
        match self {
            CoverSpec::Classic { .. } => CoverMode::Classic,
            CoverSpec::DMapper { .. } => CoverMode::Dmapper,
        }
    }

    /// `p` for classic covers, `alpha` for mixture covers.
    pub fn parameter(&self) -> f64 {
        match *self {
            CoverSpec::Classic { p, .. } => p,
            CoverSpec::DMapper { alpha, .. } => alpha,
        }
    }

    pub fn with_parameter(&self, value: f64) -> Self {
        match *self {
            CoverSpec::Classic { n, .. } => CoverSpec::Classic { n, p: value },
            CoverSpec::DMapper { n, em, .. } => CoverSpec::DMapper { n, alpha: value, em },
        }
    }
}

/// Everything needed to rebuild a Mapper graph from data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineParams {
    pub filter: FilterSpec,
    pub cover: CoverSpec,
    pub clustering: DbscanParams,
}

impl PipelineParams {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "filter": self.filter.to_string(),
            "mode": self.cover.mode(),
            "n": self.cover.n(),
            "eps": self.clustering.eps,
            "min_samples": self.clustering.min_samples,
            "metric": self.clustering.metric,
        });
        match self.cover {
            CoverSpec::Classic { p, .. } => v["p"] = p.into(),
            CoverSpec::DMapper { alpha, .. } => v["alpha"] = alpha.into(),
        }
        v
    }
}

/// Input data: the clustering space, and optionally a separate space the
/// filter is computed on (e.g. raw distances when clustering on scaled ones).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub space: MetricSpace,
    pub filter_space: Option<MetricSpace>,
}

impl Dataset {
    pub fn new(space: MetricSpace) -> Self {
        Self {
            space,
            filter_space: None,
        }
    }

    pub fn with_filter_space(space: MetricSpace, filter_space: MetricSpace) -> Result<Self> {
        if space.len() != filter_space.len() {
            return Err(Error::data("filter space and clustering space differ in size"));
        }
        Ok(Self {
            space,
            filter_space: Some(filter_space),
        })
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            space: self.space.select(indices),
            filter_space: self.filter_space.as_ref().map(|s| s.select(indices)),
        }
    }

    pub fn filter_values(&self, filter: FilterSpec) -> Result<FilterValues> {
        let source = self.filter_space.as_ref().unwrap_or(&self.space);
        match (filter, source) {
            (FilterSpec::Axis(k), MetricSpace::Points(pc)) => project_axis(pc, k),
            (FilterSpec::Sum, MetricSpace::Points(pc)) => Ok(coordinate_sum(pc)),
            (FilterSpec::MeanDistance, MetricSpace::Distances(dm)) => Ok(mean_distance_filter(dm)),
            (FilterSpec::MeanDistance, MetricSpace::Points(_)) => Err(Error::param(
                "filter",
                "mean-distance needs a distance matrix input",
            )),
            (f, MetricSpace::Distances(_)) => Err(Error::param(
                "filter",
                format!("`{f}` needs point coordinates, got a distance matrix"),
            )),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MapperRun {
    pub values: FilterValues,
    pub mixture: Option<GaussianMixture1D>,
    pub cover: Cover,
    pub graph: MapperGraph,
    /// Indices covered by no interval.
    pub uncovered: Vec<usize>,
}

/// Fits the mixture a mixture cover needs; `None` for classic covers.
pub fn fit_cover_model(values: &FilterValues, cover: &CoverSpec) -> Result<Option<GaussianMixture1D>> {
    match cover {
        CoverSpec::Classic { .. } => Ok(None),
        CoverSpec::DMapper { n, em, .. } => fit_gmm(values, *n, em).map(Some),
    }
}

pub fn build_cover(values: &FilterValues, spec: &CoverSpec, model: Option<&GaussianMixture1D>) -> Result<Cover> {
    match spec {
        CoverSpec::Classic { n, p } => uniform_cover(values, *n, *p),
        CoverSpec::DMapper { n, alpha, .. } => {
            let gmm = model.ok_or_else(|| Error::param("mixture", "a mixture cover needs a fitted model"))?;
            if gmm.n_components() != *n {
                return Err(Error::param(
                    "mixture",
                    format!("model has {} components, cover wants {n}", gmm.n_components()),
                ));
            }
            quantile_cover(gmm, *alpha)
        }
    }
}

/// Runs the whole pipeline, fitting the mixture when the cover needs one.
pub fn run_pipeline(data: &Dataset, params: &PipelineParams) -> Result<MapperRun> {
    let values = data.filter_values(params.filter)?;
    let model = fit_cover_model(&values, &params.cover)?;
    run_with_model(data, values, params, model)
}

/// Runs the pipeline on precomputed filter values and a pre-fitted mixture.
pub fn run_with_model(
    data: &Dataset,
    values: FilterValues,
    params: &PipelineParams,
    model: Option<GaussianMixture1D>,
) -> Result<MapperRun> {
    let cover = build_cover(&values, &params.cover, model.as_ref())?;
    let preimages = pullback(&cover, &values);
    let uncovered = coverage_check(&cover, &values);
    let clustering = params.clustering;
    let graph = build_nerve(&preimages, |set| dbscan(&data.space, set, &clustering), &values)?;
    Ok(MapperRun {
        values,
        mixture: model,
        cover,
        graph,
        uncovered,
    })
}
