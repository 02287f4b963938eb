use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};

use dmapper::data::{distance_matrix_to_csv, minmax_scale, point_cloud_to_csv, read_distance_matrix_csv, read_point_cloud_csv, DistanceMatrix};
use dmapper::evaluation::{evaluate, grid_tune, GridPoint};
use dmapper::ingest::{gen_circle, gen_sequences, gen_two_circles, kmer_freq, load_xyz, pairwise_distance, read_fasta, write_fasta};
use dmapper::json::{format_float, to_canonical_string};
use dmapper::persistence::extended_diagram_with;
use dmapper::{run_pipeline, Dataset, MapperGraph, MetricSpace};

use crate::config::{ConfigArgs, FilterSource, InputFormat, RunConfig};
use crate::error::{Failure, Outcome};

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::data(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::data(format!("cannot write to stdout: {e}")))
        }
    }
}

fn canonical(value: &serde_json::Value) -> Outcome<String> {
    let mut s = to_canonical_string(value)?;
    s.push('\n');
    Ok(s)
}

fn kmer_matrix(path: &Path, k: usize) -> Outcome<DistanceMatrix> {
    let records = read_fasta(path)?;
    let vectors = records
        .iter()
        .map(|r| kmer_freq(r, k).map_err(|e| Failure::data(format!("record `{}`: {e}", r.id()))))
        .collect::<Outcome<Vec<_>>>()?;
    Ok(pairwise_distance(&vectors)?)
}

/// Loads the configured input into a dataset, scaling distances if asked.
pub fn load_dataset(cfg: &RunConfig) -> Outcome<Dataset> {
    let path = cfg.input_path()?;
    let matrix = match cfg.format {
        InputFormat::Points => return Ok(Dataset::new(MetricSpace::Points(read_point_cloud_csv(path, cfg.header)?))),
        InputFormat::Xyz => return Ok(Dataset::new(MetricSpace::Points(load_xyz(path)?))),
        InputFormat::Matrix => read_distance_matrix_csv(path, cfg.header)?,
        InputFormat::Fasta => kmer_matrix(path, cfg.k)?,
    };
    if !cfg.scale {
        return Ok(Dataset::new(MetricSpace::Distances(matrix)));
    }
    let scaled = MetricSpace::Distances(minmax_scale(&matrix)?);
    Ok(match cfg.filter_source {
        FilterSource::Scaled => Dataset::new(scaled),
        FilterSource::Raw => Dataset::with_filter_space(scaled, MetricSpace::Distances(matrix))?,
    })
}

fn prepare(args: &ConfigArgs, need_parameter: bool) -> Outcome<(RunConfig, Dataset)> {
    let cfg = args.resolve()?;
    cfg.validate(need_parameter)?;
    if let Some(path) = &args.emit_config {
        let value = serde_json::to_value(&cfg).expect("config serializes");
        emit(Some(path), &canonical(&value)?)?;
    }
    let data = load_dataset(&cfg)?;
    Ok((cfg, data))
}

fn write_graph_extras(cfg: &RunConfig, graph: &MapperGraph, cover: &dmapper::Cover) -> Outcome {
    if let Some(p) = &cfg.output.dot {
        emit(Some(p), &graph.to_dot())?;
    }
    if let Some(p) = &cfg.output.cover {
        emit(Some(p), &canonical(&cover.to_json())?)?;
    }
    Ok(())
}

fn check_coverage(cfg: &RunConfig, uncovered: &[usize], total: usize) -> Outcome {
    if uncovered.is_empty() {
        return Ok(());
    }
    let message = format!("{} of {total} points lie outside every cover interval", uncovered.len());
    if cfg.strict_cover {
        return Err(Failure::numeric(message));
    }
    eprintln!("warning: {message}");
    Ok(())
}

pub fn run(args: &ConfigArgs) -> Outcome {
    let (cfg, data) = prepare(args, true)?;
    let params = cfg.params();
    let run = run_pipeline(&data, &params)?;
    check_coverage(&cfg, &run.uncovered, data.len())?;
    write_graph_extras(&cfg, &run.graph, &run.cover)?;
    let mut doc = run.graph.to_json(cfg.params_json(&params));
    doc["summary"] = serde_json::to_value(dmapper::graph_summary(&run.graph)).expect("summary serializes");
    doc["uncovered"] = run.uncovered.len().into();
    emit(cfg.output.out.as_deref(), &canonical(&doc)?)
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Include every replicate's bottleneck distance.
    #[arg(long)]
    pub distances: bool,
}

pub fn eval(args: &EvalArgs) -> Outcome {
    let (cfg, data) = prepare(&args.config, true)?;
    let params = cfg.params();
    let report = evaluate(&data, &params, &cfg.bootstrap(), cfg.weights())?;
    let mut doc = report.to_json(args.distances);
    doc["params"] = cfg.params_json(&params);
    emit(cfg.output.out.as_deref(), &canonical(&doc)?)
}

const GRID_HEADER: &str =
    "index,parameter,sc,sc_norm,tsr,sc_adj,d_eps,components,cycle_rank,nodes,edges,failed_replicates,error";

fn grid_csv(grid: &[GridPoint]) -> String {
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for (i, g) in grid.iter().enumerate() {
        let _ = write!(out, "{i},{}", format_float(g.parameter));
        match &g.report {
            Ok(r) => {
                let s = r.summary;
                let _ = writeln!(
                    out,
                    ",{},{},{},{},{},{},{},{},{},{},",
                    format_float(r.sc),
                    format_float(r.sc_norm),
                    format_float(r.tsr),
                    format_float(r.sc_adj),
                    format_float(r.d_eps),
                    s.components,
                    s.cycle_rank,
                    s.node_count,
                    s.edge_count,
                    r.failed_replicates
                );
            }
            Err(e) => {
                let msg = e.replace(['"', '\n'], " ");
                let _ = writeln!(out, ",,,,,,,,,,,\"{msg}\"");
            }
        }
    }
    out
}

pub fn tune(args: &ConfigArgs) -> Outcome {
    let (cfg, data) = prepare(args, false)?;
    let params = cfg.params();
    let result = grid_tune(&data, &params, &cfg.tune())?;
    if let Some(p) = &cfg.output.grid_csv {
        emit(Some(p), &grid_csv(&result.grid))?;
    }
    let best = params.cover.with_parameter(result.best_parameter());
    let best_params = dmapper::PipelineParams { cover: best, ..params };
    if cfg.output.dot.is_some() || cfg.output.cover.is_some() {
        let run = run_pipeline(&data, &best_params)?;
        write_graph_extras(&cfg, &run.graph, &run.cover)?;
    }
    let doc = serde_json::json!({
        "alpha_bound": result.alpha_bound,
        "best_index": result.best,
        "best_parameter": result.best_parameter(),
        "grid_count": result.grid.len(),
        "params": cfg.params_json(&best_params),
        "report": result.best_report().to_json(false),
    });
    emit(cfg.output.out.as_deref(), &canonical(&doc)?)
}

#[derive(Args, Debug)]
pub struct DiagramArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Read a graph document instead of building one from the config.
    #[arg(long, conflicts_with = "input")]
    pub graph: Option<PathBuf>,
    /// Keep zero-persistence points.
    #[arg(long)]
    pub keep_zero: bool,
}

pub fn diagram(args: &DiagramArgs) -> Outcome {
    let (graph, out) = match &args.graph {
        Some(path) => {
            let cfg = args.config.resolve()?;
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            (MapperGraph::from_json(value)?.0, cfg.output.out)
        }
        None => {
            let (cfg, data) = prepare(&args.config, true)?;
            let run = run_pipeline(&data, &cfg.params())?;
            check_coverage(&cfg, &run.uncovered, data.len())?;
            (run.graph, cfg.output.out)
        }
    };
    let values: Vec<f64> = graph.nodes.iter().map(|n| n.mean_filter).collect();
    let dgm = extended_diagram_with(&graph, &values, args.keep_zero)?;
    emit(out.as_deref(), &canonical(&dgm.to_json())?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// Centres (0, 0) and (3, 0).
    Disjoint,
    /// Centres (0, 0) and (1.5, 0).
    Intersecting,
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// Two unit circles, `count` points each.
    TwoCircles {
        #[arg(long, value_enum, default_value = "disjoint")]
        layout: Layout,
        #[arg(long, default_value_t = 5000)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    Circle {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cx: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cy: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 5000)]
        count: usize,
    },
    /// Random sequences descended from a few mutated lineages.
    Fasta {
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 3)]
        lineages: usize,
        #[arg(long, default_value_t = 0.02)]
        mutation_rate: f64,
    },
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

pub fn gen(args: &GenArgs) -> Outcome {
    let text = match args.kind {
        GenKind::TwoCircles { layout, count, radius } => {
            let second = match layout {
                Layout::Disjoint => (3.0, 0.0),
                Layout::Intersecting => (1.5, 0.0),
            };
            point_cloud_to_csv(&gen_two_circles([(0.0, 0.0), second], radius, count, args.seed)?)
        }
        GenKind::Circle { cx, cy, radius, count } => point_cloud_to_csv(&gen_circle((cx, cy), radius, count, args.seed)?),
        GenKind::Fasta { count, length, lineages, mutation_rate } => {
            write_fasta(&gen_sequences(count, length, lineages, mutation_rate, args.seed)?, 70)
        }
    };
    emit(args.out.as_deref(), &text)
}

#[derive(Args, Debug)]
pub struct KmerArgs {
    /// FASTA file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Min-max scale the off-diagonal distances onto [0, 1].
    #[arg(long)]
    pub scale: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn kmer(args: &KmerArgs) -> Outcome {
    if !args.input.is_file() {
        return Err(Failure::config(format!("input file {} does not exist", args.input.display())));
    }
    let mut dm = kmer_matrix(&args.input, args.k)?;
    if args.scale {
        dm = minmax_scale(&dm)?;
    }
    emit(args.out.as_deref(), &distance_matrix_to_csv(&dm))
}
