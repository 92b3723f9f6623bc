//! `shatter` command line: gen, run, verify, bench.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;
use rayon::prelude::*;
use serde_json::json;

use shatter::divide::ThresholdMode;
use shatter::runner::{execute_on, Algorithm, Input, InputSpec, RunConfig};
use shatter::sim::Model;
use shatter::verify::{
    check_defective, check_divide, check_edge_coloring, check_list_coloring, check_split, split_budget, Budget,
    CheckReport,
};
use shatter::{Error, Result};

/// Columns of `shatter bench`, in order.
const CSV_HEADER: &str =
    "algo,n,degree,k,q,eps,seed,pass_rate,max_discrepancy,frozen_fraction,max_bad_component,rounds,bits";

#[derive(Parser)]
#[command(name = "shatter", version, about = "Randomized distributed splitting: simulate, check, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance to a file.
    Gen {
        /// dregular:N:D, gnp:N:D or lists:N:L:T
        #[arg(long)]
        gen: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an algorithm and check its output.
    Run(RunArgs),
    /// Check an existing artifact against an instance.
    Verify {
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        input: PathBuf,
        /// Artifact JSON written by `run`.
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ThresholdArg::Uniform)]
        thresholds: ThresholdArg,
        #[arg(long, default_value_t = 4)]
        q: u32,
    },
    /// Sweep a grid of generated instances and print CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Qdivide,
    Split,
    BipartiteSplit,
    EdgeColor,
    ListColor,
    Defective,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Qdivide => Algorithm::Qdivide,
            AlgoArg::Split => Algorithm::Split,
            AlgoArg::BipartiteSplit => Algorithm::BipartiteSplit,
            AlgoArg::EdgeColor => Algorithm::EdgeColor,
            AlgoArg::ListColor => Algorithm::ListColor,
            AlgoArg::Defective => Algorithm::Defective,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Local,
    Congest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Uniform,
    Local,
}

impl From<ThresholdArg> for ThresholdMode {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::Uniform => ThresholdMode::Uniform,
            ThresholdArg::Local => ThresholdMode::Local,
        }
    }
}

/// Parameters shared by `run` and `bench`.
#[derive(Args, Clone)]
struct Params {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// List coloring slack δ.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Target ratio C for list coloring.
    #[arg(long = "C", default_value_t = 6.0)]
    c_target: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Local)]
    mode: ModeArg,
    /// CONGEST bits per edge per round; default ⌈4·log2 n⌉.
    #[arg(long)]
    bandwidth: Option<u64>,
    /// Full-strength constants; fail on violated preconditions.
    #[arg(long, conflicts_with = "permissive")]
    strict: bool,
    /// Desk-scale constants; warn on violated preconditions (default).
    #[arg(long)]
    permissive: bool,
    /// Admissibility constant c in k ≤ c·ε⁴Δ/ln Δ.
    #[arg(long = "c-const")]
    c_const: Option<f64>,
    /// Parallel Moser-Tardos instances in CONGEST.
    #[arg(long)]
    ell: Option<usize>,
    /// Cluster colors for CONGEST post-shattering.
    #[arg(long = "Q")]
    q_colors: Option<u32>,
    #[arg(long, value_enum, default_value_t = ThresholdArg::Uniform)]
    thresholds: ThresholdArg,
}

impl Params {
    fn config(&self, input: InputSpec, k: u32, q: u32, seed: u64) -> RunConfig {
        RunConfig {
            algorithm: self.algo.into(),
            input,
            k,
            q,
            eps: self.eps,
            delta: self.delta,
            c_target: self.c_target,
            model: match self.mode {
                ModeArg::Local => Model::Local,
                ModeArg::Congest => Model::Congest,
            },
            bandwidth: self.bandwidth,
            strict: self.strict,
            c_const: self.c_const,
            ell: self.ell,
            q_colors: self.q_colors,
            thresholds: self.thresholds.into(),
            seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    params: Params,
    /// Instance file: edge list, bipartite file, or list instance.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    input: Option<PathBuf>,
    /// Generator spec: dregular:N:D, gnp:N:D or lists:N:L:T.
    #[arg(long)]
    gen: Option<String>,
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 4)]
    q: u32,
    #[arg(long)]
    seed: u64,
    /// Artifact path; the report goes next to it as `<out>.report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    params: Params,
    /// Comma-separated node counts.
    #[arg(long, default_value = "1000")]
    n: String,
    /// Comma-separated degrees (d for graphs, L for list instances).
    #[arg(long, default_value = "16")]
    degree: String,
    /// Color degree T for list instances, as a fraction of L.
    #[arg(long, default_value_t = 0.5)]
    t_ratio: f64,
    #[arg(long, default_value = "2")]
    k: String,
    #[arg(long, default_value = "4")]
    q: String,
    /// Seeds 0..seeds per grid point.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Error::InvalidParameter(format!("bad {what} value {x:?}"))))
        .collect()
}

fn report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

fn cmd_gen(gen: &str, seed: u64, out: &Path) -> Result<ExitCode> {
    let spec: InputSpec = gen.parse()?;
    let input = Input::load(&spec, seed)?;
    fs::write(out, input.to_text())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let spec = match (&args.input, &args.gen) {
        (Some(p), _) => InputSpec::File { path: p.clone() },
        (None, Some(g)) => g.parse()?,
        (None, None) => return Err(Error::InvalidParameter("one of --input or --gen is required".into())),
    };
    let config = args.params.config(spec, args.k, args.q, args.seed);
    let input = Input::load(&config.input, config.seed)?;
    let out = execute_on(&config, &input)?;
    let report = json!({ "config": config, "check": out.check, "run": out.report });
    let report_text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => {
            fs::write(path, out.artifact_json())?;
            fs::write(report_path(path), &report_text)?;
            emit(&format!(
                "{}\n",
                serde_json::to_string(&json!({ "pass": out.check.pass, "violations": out.check.violations }))?
            ))?;
        }
        None => emit(&format!("{report_text}\n"))?,
    }
    Ok(if out.check.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn parse_artifact<T: serde::de::DeserializeOwned>(artifact: &serde_json::Value, field: &str) -> Result<T> {
    let v = artifact.get(field).ok_or_else(|| Error::InvalidParameter(format!("artifact has no {field:?} field")))?;
    Ok(serde_json::from_value(v.clone())?)
}

fn cmd_verify(
    algo: Algorithm,
    input_path: &Path,
    artifact_path: &Path,
    (k, eps, q, thresholds): (u32, f64, u32, ThresholdMode),
) -> Result<ExitCode> {
    let input = Input::parse(&fs::read_to_string(input_path)?)?;
    let artifact: serde_json::Value = serde_json::from_str(&fs::read_to_string(artifact_path)?)?;
    let bipartite = || match &input {
        Input::Bipartite(b) => b.clone(),
        Input::Graph(g) => shatter::graph::to_bipartite_split_instance(g),
        Input::Lists(l) => shatter::graph::to_bipartite_split_instance(l.graph()),
    };
    let graph = || match &input {
        Input::Graph(g) => Ok(g.clone()),
        Input::Lists(l) => Ok(l.graph().clone()),
        Input::Bipartite(_) => Err(Error::InvalidParameter(format!("{algo} needs a plain graph"))),
    };
    let check: CheckReport = match algo {
        Algorithm::Qdivide => {
            let inst = bipartite();
            let q = parse_artifact::<u32>(&artifact, "q").unwrap_or(q);
            let schedule =
                shatter::divide::Schedule { q, slots: parse_artifact(&artifact, "slots")?, thresholds: Vec::new() };
            let z = match thresholds {
                ThresholdMode::Uniform => shatter::divide::uniform_thresholds(&inst, q),
                ThresholdMode::Local => shatter::divide::local_thresholds(&inst, q)?,
            };
            check_divide(&inst, &schedule, &z)
        }
        Algorithm::Split | Algorithm::BipartiteSplit => {
            let inst = bipartite();
            let k = parse_artifact::<u32>(&artifact, "k").unwrap_or(k);
            let parts: Vec<i64> = parse_artifact(&artifact, "parts")?;
            if parts.iter().any(|&p| p < 0) {
                return Ok(ExitCode::from(1));
            }
            let parts: Vec<u32> = parts.into_iter().map(|p| p as u32).collect();
            check_split(&inst, &parts, k, &Budget::Uniform(split_budget(eps, inst.max_left_degree(), k)))
        }
        Algorithm::EdgeColor => {
            let g = graph()?;
            let coloring = shatter::color::EdgeColoring {
                palette: parse_artifact(&artifact, "palette")?,
                colors: parse_artifact(&artifact, "colors")?,
            };
            check_edge_coloring(&g, &coloring, shatter::color::edge_budget(g.max_degree(), eps))
        }
        Algorithm::ListColor => {
            let Input::Lists(inst) = &input else {
                return Err(Error::InvalidParameter("list-color needs a list instance".into()));
            };
            check_list_coloring(inst, &parse_artifact::<Vec<u32>>(&artifact, "colors")?)
        }
        Algorithm::Defective => {
            let g = graph()?;
            let k = parse_artifact::<u32>(&artifact, "k").unwrap_or(k);
            let bound = (1.0 + eps) * g.max_degree() as f64 / k as f64;
            check_defective(&g, &parse_artifact::<Vec<u32>>(&artifact, "colors")?, bound)
        }
    };
    emit(&format!("{}\n", serde_json::to_string_pretty(&check)?))?;
    Ok(if check.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

struct Point {
    n: usize,
    degree: usize,
    k: u32,
    q: u32,
    seed: u64,
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode> {
    let ns: Vec<usize> = list(&args.n, "n")?;
    let degrees: Vec<usize> = list(&args.degree, "degree")?;
    let ks: Vec<u32> = list(&args.k, "k")?;
    let qs: Vec<u32> = list(&args.q, "q")?;
    let mut grid = Vec::new();
    for &n in &ns {
        for &degree in &degrees {
            for &k in &ks {
                for &q in &qs {
                    for seed in 0..args.seeds {
                        grid.push(Point { n, degree, k, q, seed });
                    }
                }
            }
        }
    }
    let algo: Algorithm = args.params.algo.into();
    let rows: Vec<String> = grid
        .par_iter()
        .map(|p| {
            let spec = match algo {
                Algorithm::ListColor => InputSpec::Lists {
                    n: p.n,
                    l: p.degree,
                    t: ((p.degree as f64 * args.t_ratio).floor() as usize).max(1),
                },
                _ => InputSpec::DRegular { n: p.n, degree: p.degree },
            };
            let config = args.params.config(spec, p.k, p.q, p.seed);
            let head = format!("{algo},{},{},{},{},{},{}", p.n, p.degree, p.k, p.q, args.params.eps, p.seed);
            let result = Input::load(&config.input, config.seed).and_then(|input| execute_on(&config, &input));
            match result {
                Ok(out) => format!(
                    "{head},{},{},{},{},{},{}",
                    if out.check.pass { 1.0 } else { 0.0 },
                    out.check.summary.max,
                    out.metrics.frozen_fraction,
                    out.metrics.max_bad_component,
                    out.report.rounds,
                    out.report.bits_total
                ),
                Err(e) => {
                    error!("{head}: {e}");
                    format!("{head},0,,,,,")
                }
            }
        })
        .collect();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    match &args.out {
        Some(p) => fs::write(p, csv)?,
        None => emit(&csv)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Writes to stdout; a closed pipe (`shatter ... | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { gen, seed, out } => cmd_gen(gen, *seed, out),
        Command::Run(args) => cmd_run(args),
        Command::Verify { algo, input, artifact, k, eps, thresholds, q } => {
            cmd_verify((*algo).into(), input, artifact, (*k, *eps, *q, (*thresholds).into()))
        }
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
