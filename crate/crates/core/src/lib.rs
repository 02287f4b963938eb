//! Mapper graphs with uniform or mixture-quantile covers, and tools to score
//! them: silhouette, extended persistence, bottleneck bootstrap and tuning.

pub mod bottleneck;
pub mod cover;
pub mod data;
pub mod dbscan;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod graph;
pub mod ingest;
pub mod json;
pub mod mixture;
pub mod normal;
pub mod persistence;
pub mod pipeline;
pub mod seeding;

pub use bottleneck::bottleneck;
pub use cover::{alpha_upper_bound, pullback, quantile_cover, uniform_cover, Cover, CoverParams, Interval};
pub use data::{DistanceMatrix, FilterValues, MetricSpace, PointCloud};
pub use dbscan::{dbscan, DbscanMetric, DbscanParams, NOISE};
pub use error::{Error, Result};
pub use evaluation::{
    bottleneck_bootstrap, evaluate, grid_tune, sc_adj, silhouette, tsr, BootstrapConfig, EvalReport, ScoreWeights,
    TuneConfig, TuneResult,
};
pub use graph::{graph_summary, GraphSummary, MapperGraph, MapperNode};
pub use mixture::{fit_gmm, EmConfig, GaussianMixture1D};
pub use persistence::{extended_diagram, DiagramPoint, ExtendedDiagram, PointClass};
pub use pipeline::{run_pipeline, CoverMode, CoverSpec, Dataset, FilterSpec, MapperRun, PipelineParams};
