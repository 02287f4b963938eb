//! Run configuration: a JSON file, overridden field by field from flags, then
//! validated into the library's parameter types.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use dmapper::evaluation::{BootstrapConfig, ScoreWeights, TuneConfig};
use dmapper::mixture::{EmConfig, EmInit};
use dmapper::{CoverMode, CoverSpec, DbscanMetric, DbscanParams, FilterSpec, PipelineParams};

use crate::error::{Failure, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// Point cloud, one point per row.
    Points,
    /// Point cloud with three columns.
    Xyz,
    /// n x n distance matrix.
    Matrix,
    /// Sequences, turned into k-mer frequency distances.
    Fasta,
}

/// Which matrix the mean-distance filter reads when distances are scaled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FilterSource {
    Scaled,
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmPreset {
    Default,
    Loose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Quantile,
    Kmeans,
}

impl From<InitArg> for EmInit {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Quantile => EmInit::Quantile,
            InitArg::Kmeans => EmInit::Kmeans,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Euclidean,
    Precomputed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub n_init: usize,
    pub init: InitArg,
    /// `null` derives the floor from the data range.
    pub variance_floor: Option<f64>,
}

impl EmSettings {
    fn from_config(c: EmConfig) -> Self {
        Self {
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            n_init: c.n_init,
            init: match c.init {
                EmInit::Quantile => InitArg::Quantile,
                EmInit::Kmeans => InitArg::Kmeans,
            },
            variance_floor: c.variance_floor,
        }
    }

    fn to_config(&self, seed: u64) -> EmConfig {
        EmConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            variance_floor: self.variance_floor,
            n_init: self.n_init,
            seed,
            init: self.init.into(),
        }
    }
}

impl Default for EmSettings {
    fn default() -> Self {
        Self::from_config(EmConfig::default())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Main JSON result; stdout when unset.
    pub out: Option<PathBuf>,
    pub dot: Option<PathBuf>,
    pub cover: Option<PathBuf>,
    pub grid_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: InputFormat,
    pub header: bool,
    /// k-mer length for FASTA input.
    pub k: usize,
    /// Min-max scale distance matrices before clustering.
    pub scale: bool,
    pub filter_source: FilterSource,
    pub filter: FilterSpec,
    pub mode: CoverMode,
    pub n: usize,
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    pub alpha_star: f64,
    pub eps: f64,
    pub min_samples: usize,
    /// Derived from the input format when unset.
    pub metric: Option<MetricArg>,
    pub em: EmSettings,
    pub seed: u64,
    pub replicates: usize,
    pub confidence: f64,
    pub w1: f64,
    pub w2: f64,
    pub grid_count: usize,
    pub strict_cover: bool,
    pub output: Outputs,
}

impl Default for RunConfig {
    fn default() -> Self {
        let boot = BootstrapConfig::default();
        let weights = ScoreWeights::default();
        Self {
            input: None,
            format: InputFormat::Points,
            header: false,
            k: 3,
            scale: false,
            filter_source: FilterSource::Scaled,
            filter: FilterSpec::Axis(0),
            mode: CoverMode::Dmapper,
            n: 10,
            alpha: None,
            p: None,
            alpha_star: 0.005,
            eps: 0.5,
            min_samples: 3,
            metric: None,
            em: EmSettings::default(),
            seed: 0,
            replicates: boot.replicates,
            confidence: boot.confidence,
            w1: weights.w1,
            w2: weights.w2,
            grid_count: TuneConfig::default().grid_count,
            strict_cover: false,
            output: Outputs::default(),
        }
    }
}

/// Flags shared by the commands that build a Mapper graph. Every flag
/// overrides the matching config field.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the fully resolved config here before running.
    #[arg(long, value_name = "PATH")]
    pub emit_config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Skip the first line of CSV input.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub k: Option<usize>,
    /// Min-max scale the distance matrix.
    #[arg(long)]
    pub scale: bool,
    #[arg(long, value_enum)]
    pub filter_source: Option<FilterSource>,
    /// axis:<k>, sum or mean-distance.
    #[arg(long)]
    pub filter: Option<FilterSpec>,
    /// classic or dmapper.
    #[arg(long)]
    pub mode: Option<CoverMode>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha_star: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub min_samples: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    /// Starting point for the EM settings; the individual --em-* flags apply on top.
    #[arg(long, value_enum)]
    pub em_preset: Option<EmPreset>,
    #[arg(long)]
    pub em_max_iters: Option<usize>,
    #[arg(long)]
    pub em_rel_tol: Option<f64>,
    #[arg(long)]
    pub em_n_init: Option<usize>,
    #[arg(long, value_enum)]
    pub em_init: Option<InitArg>,
    #[arg(long)]
    pub em_variance_floor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub w1: Option<f64>,
    #[arg(long)]
    pub w2: Option<f64>,
    #[arg(long)]
    pub grid_count: Option<usize>,
    /// Fail instead of warning when the cover misses points.
    #[arg(long)]
    pub strict_cover: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Write the cover intervals as JSON.
    #[arg(long, value_name = "PATH")]
    pub emit_cover: Option<PathBuf>,
    #[arg(long)]
    pub grid_csv: Option<PathBuf>,
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src.clone() {
            $dst = v;
        }
    };
}

impl ConfigArgs {
    pub fn resolve(&self) -> Outcome<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        set!(cfg.format, self.format);
        cfg.header |= self.header;
        set!(cfg.k, self.k);
        cfg.scale |= self.scale;
        set!(cfg.filter_source, self.filter_source);
        set!(cfg.filter, self.filter);
        if let Some(mode) = self.mode {
            if mode != cfg.mode {
                // The parameter of the other mode cannot carry over.
                match mode {
                    CoverMode::Classic => cfg.alpha = None,
                    CoverMode::Dmapper => cfg.p = None,
                }
            }
            cfg.mode = mode;
        }
        set!(cfg.n, self.n);
        if self.alpha.is_some() {
            cfg.alpha = self.alpha;
        }
        if self.p.is_some() {
            cfg.p = self.p;
        }
        set!(cfg.alpha_star, self.alpha_star);
        set!(cfg.eps, self.eps);
        set!(cfg.min_samples, self.min_samples);
        if self.metric.is_some() {
            cfg.metric = self.metric;
        }
        if let Some(preset) = self.em_preset {
            cfg.em = EmSettings::from_config(match preset {
                EmPreset::Default => EmConfig::default(),
                EmPreset::Loose => EmConfig::loose(),
            });
        }
        set!(cfg.em.max_iters, self.em_max_iters);
        set!(cfg.em.rel_tol, self.em_rel_tol);
        set!(cfg.em.n_init, self.em_n_init);
        set!(cfg.em.init, self.em_init);
        if self.em_variance_floor.is_some() {
            cfg.em.variance_floor = self.em_variance_floor;
        }
        set!(cfg.seed, self.seed);
        set!(cfg.replicates, self.replicates);
        set!(cfg.confidence, self.confidence);
        set!(cfg.w1, self.w1);
        set!(cfg.w2, self.w2);
        set!(cfg.grid_count, self.grid_count);
        cfg.strict_cover |= self.strict_cover;
        let o = &mut cfg.output;
        for (dst, src) in [
            (&mut o.out, &self.out),
            (&mut o.dot, &self.dot),
            (&mut o.cover, &self.emit_cover),
            (&mut o.grid_csv, &self.grid_csv),
        ] {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        if cfg.metric.is_none() {
            cfg.metric = Some(match cfg.format {
                InputFormat::Points | InputFormat::Xyz => MetricArg::Euclidean,
                InputFormat::Matrix | InputFormat::Fasta => MetricArg::Precomputed,
            });
        }
        Ok(cfg)
    }
}

fn load_config(path: &Path) -> Outcome<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn input_path(&self) -> Outcome<&Path> {
        let path = self.input.as_deref().ok_or_else(|| Failure::config("`input` is required"))?;
        if !path.is_file() {
            return Err(Failure::config(format!("input file {} does not exist", path.display())));
        }
        Ok(path)
    }

    /// Checks the mode/parameter pairing. With `need_parameter` false (tuning)
    /// the parameter may be absent, but a parameter of the wrong mode is
    /// still rejected.
    pub fn validate(&self, need_parameter: bool) -> Outcome {
        match (self.mode, self.alpha, self.p) {
            (CoverMode::Classic, Some(_), _) => return Err(Failure::config("`alpha` is set but mode is classic")),
            (CoverMode::Dmapper, _, Some(_)) => return Err(Failure::config("`p` is set but mode is dmapper")),
            (CoverMode::Classic, None, None) if need_parameter => {
                return Err(Failure::config("classic mode needs `p`"))
            }
            (CoverMode::Dmapper, None, None) if need_parameter => {
                return Err(Failure::config("dmapper mode needs `alpha`"))
            }
            _ => {}
        }
        let points = matches!(self.format, InputFormat::Points | InputFormat::Xyz);
        if self.scale && points {
            return Err(Failure::config("`scale` applies to distance input only"));
        }
        match (self.metric, points) {
            (Some(MetricArg::Precomputed), true) => {
                return Err(Failure::config("metric `precomputed` needs matrix or fasta input"))
            }
            (Some(MetricArg::Euclidean), false) => {
                return Err(Failure::config("metric `euclidean` needs point input"))
            }
            _ => {}
        }
        if self.format == InputFormat::Fasta && self.k == 0 {
            return Err(Failure::config("`k` must be at least 1"));
        }
        if self.grid_count == 0 {
            return Err(Failure::config("`grid_count` must be at least 1"));
        }
        if !(self.alpha_star >= 0.0 && self.alpha_star < 1.0) {
            return Err(Failure::config("`alpha_star` must lie in [0, 1)"));
        }
        self.em.to_config(self.seed).validate()?;
        self.bootstrap().validate()?;
        dmapper::sc_adj(0.0, 0.0, self.w1, self.w2)?;
        self.clustering().validate()?;
        Ok(())
    }

    pub fn clustering(&self) -> DbscanParams {
        DbscanParams {
            eps: self.eps,
            min_samples: self.min_samples,
            metric: match self.metric {
                Some(MetricArg::Precomputed) => DbscanMetric::Precomputed,
                _ => DbscanMetric::Euclidean,
            },
        }
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.replicates,
            confidence: self.confidence,
            seed: self.seed,
        }
    }

    pub fn weights(&self) -> ScoreWeights {
        ScoreWeights { w1: self.w1, w2: self.w2 }
    }

    /// Pipeline parameters; a missing α or p becomes a placeholder that
    /// tuning replaces.
    pub fn params(&self) -> PipelineParams {
        let cover = match self.mode {
            CoverMode::Classic => CoverSpec::Classic { n: self.n, p: self.p.unwrap_or(0.0) },
            CoverMode::Dmapper => CoverSpec::DMapper {
                n: self.n,
                alpha: self.alpha.unwrap_or(0.5),
                em: self.em.to_config(self.seed),
            },
        };
        PipelineParams { filter: self.filter, cover, clustering: self.clustering() }
    }

    pub fn tune(&self) -> TuneConfig {
        TuneConfig {
            grid_count: self.grid_count,
            alpha_star: self.alpha_star,
            bootstrap: self.bootstrap(),
            weights: self.weights(),
        }
    }

    /// Parameter record stored next to graphs and reports.
    pub fn params_json(&self, params: &PipelineParams) -> serde_json::Value {
        let mut v = params.to_json();
        v["seed"] = self.seed.into();
        if let CoverSpec::DMapper { .. } = params.cover {
            v["em"] = serde_json::to_value(&self.em).expect("em settings serialize");
        }
        v
    }
}
