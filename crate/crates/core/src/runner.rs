//! One configured run: load or generate the input, execute an algorithm, and
//! judge the artifact with its checker. The CLI and the Python bindings both
//! go through here.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color::{
    defective_color, edge_budget, edge_color, list_color, synthetic_list_instance, EdgeColorOptions, ListColorOptions,
    ListGenSpec, ListInstance,
};
use crate::divide::{q_divide, DivideParams, Strictness, ThresholdMode};
use crate::error::{Error, Result};
use crate::graph::gen::{generate, GenModel, GraphGenSpec};
use crate::graph::io::{load_bipartite, load_edge_list};
use crate::graph::{to_bipartite_split_instance, BipartiteGraph, Graph};
use crate::rng::derive_seed;
use crate::sim::{Model, RunReport, SimMode};
use crate::split::{k_split, Constants, SplitParams};
use crate::verify::{
    check_defective, check_divide, check_edge_coloring, check_list_coloring, check_split, split_budget, Budget,
    CheckReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Qdivide,
    Split,
    BipartiteSplit,
    EdgeColor,
    ListColor,
    Defective,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Qdivide,
        Algorithm::Split,
        Algorithm::BipartiteSplit,
        Algorithm::EdgeColor,
        Algorithm::ListColor,
        Algorithm::Defective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Qdivide => "qdivide",
            Algorithm::Split => "split",
            Algorithm::BipartiteSplit => "bipartite-split",
            Algorithm::EdgeColor => "edge-color",
            Algorithm::ListColor => "list-color",
            Algorithm::Defective => "defective",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm {s:?}")))
    }
}

/// Where the instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InputSpec {
    /// Edge list, bipartite file, or list instance, told apart by the header.
    File {
        path: PathBuf,
    },
    DRegular {
        n: usize,
        degree: usize,
    },
    Gnp {
        n: usize,
        degree: usize,
    },
    Lists {
        n: usize,
        l: usize,
        t: usize,
    },
}

impl FromStr for InputSpec {
    type Err = Error;

    /// `dregular:N:D`, `gnp:N:D`, `lists:N:L:T`
    fn from_str(s: &str) -> Result<Self> {
        let bad =
            || Error::InvalidParameter(format!("bad generator {s:?}; expected dregular:N:D, gnp:N:D or lists:N:L:T"));
        let mut it = s.split(':');
        let kind = it.next().ok_or_else(bad)?;
        let nums: Vec<usize> = it.map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        match (kind, nums.as_slice()) {
            ("dregular", &[n, degree]) => Ok(InputSpec::DRegular { n, degree }),
            ("gnp", &[n, degree]) => Ok(InputSpec::Gnp { n, degree }),
            ("lists", &[n, l, t]) => Ok(InputSpec::Lists { n, l, t }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Input {
    Graph(Graph),
    Bipartite(BipartiteGraph),
    Lists(ListInstance),
}

impl Input {
    /// Bipartite files start with `bipartite`, list instances with `lists`.
    pub fn parse(text: &str) -> Result<Input> {
        let head = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("");
        if head.starts_with("bipartite") {
            Ok(Input::Bipartite(load_bipartite(text)?))
        } else if head.starts_with("lists") {
            Ok(Input::Lists(ListInstance::from_text(text)?))
        } else {
            Ok(Input::Graph(load_edge_list(text)?))
        }
    }

    /// Generators draw from `derive_seed(seed, "gen")`.
    pub fn load(spec: &InputSpec, seed: u64) -> Result<Input> {
        let gen_seed = derive_seed(seed, "gen");
        match *spec {
            InputSpec::File { ref path } => Input::parse(&std::fs::read_to_string(path)?),
            InputSpec::DRegular { n, degree } => {
                Ok(Input::Graph(generate(&GraphGenSpec { model: GenModel::DRegular, n, degree, seed: gen_seed })?))
            }
            InputSpec::Gnp { n, degree } => {
                Ok(Input::Graph(generate(&GraphGenSpec { model: GenModel::GnpCapped, n, degree, seed: gen_seed })?))
            }
            InputSpec::Lists { n, l, t } => {
                Ok(Input::Lists(synthetic_list_instance(&ListGenSpec::new(n, l, t, gen_seed))?))
            }
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Input::Graph(g) => crate::graph::io::to_edge_list(g),
            Input::Bipartite(b) => crate::graph::io::to_bipartite_text(b),
            Input::Lists(l) => l.to_text(),
        }
    }

    fn graph(&self, algo: Algorithm) -> Result<&Graph> {
        match self {
            Input::Graph(g) => Ok(g),
            Input::Lists(l) => Ok(l.graph()),
            Input::Bipartite(_) => Err(Error::InvalidParameter(format!("{algo} needs a plain graph"))),
        }
    }

    /// Plain graphs go through the direct translation.
    fn bipartite(&self, algo: Algorithm) -> Result<BipartiteGraph> {
        match self {
            Input::Bipartite(b) => Ok(b.clone()),
            other => Ok(to_bipartite_split_instance(other.graph(algo)?)),
        }
    }

    fn node_count(&self) -> usize {
        match self {
            Input::Graph(g) => g.n(),
            Input::Bipartite(b) => b.n_left() + b.n_right(),
            Input::Lists(l) => l.graph().n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub input: InputSpec,
    pub k: u32,
    pub q: u32,
    pub eps: f64,
    /// List coloring slack `δ`.
    pub delta: f64,
    /// Target ratio `C` before the final list coloring solve.
    pub c_target: f64,
    pub model: Model,
    /// CONGEST bandwidth; default `⌈4·log2 n⌉`.
    pub bandwidth: Option<u64>,
    pub strict: bool,
    /// Admissibility constant `c` in `k ≤ c·ε⁴Δ/ln Δ`.
    pub c_const: Option<f64>,
    pub ell: Option<usize>,
    /// Cluster colors for CONGEST post-shattering.
    pub q_colors: Option<u32>,
    pub thresholds: ThresholdMode,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, input: InputSpec, seed: u64) -> Self {
        RunConfig {
            algorithm,
            input,
            k: 2,
            q: 4,
            eps: 0.5,
            delta: 1.0,
            c_target: 6.0,
            model: Model::Local,
            bandwidth: None,
            strict: false,
            c_const: None,
            ell: None,
            q_colors: None,
            thresholds: ThresholdMode::Uniform,
            seed,
        }
    }

    fn mode(&self, n: usize) -> SimMode {
        match (self.model, self.bandwidth) {
            (Model::Local, _) => SimMode::local(),
            (Model::Congest, Some(b)) => SimMode::congest_with(b),
            (Model::Congest, None) => SimMode::congest(n),
        }
    }

    fn constants(&self) -> Constants {
        let mut c = if self.strict { Constants::strict() } else { Constants::permissive() };
        if let Some(a) = self.c_const {
            c.admissibility = a;
        }
        c
    }

    fn split_params(&self) -> SplitParams {
        let mut p = SplitParams::new(self.k, self.eps);
        p.constants = self.constants();
        p.strict = self.strict;
        p.ell = self.ell;
        p.q_colors = self.q_colors;
        p
    }
}

/// Shattering statistics surfaced for sweeps; zero for other algorithms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunMetrics {
    pub frozen_fraction: f64,
    pub max_bad_component: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    /// The algorithm's output in its documented JSON shape.
    pub artifact: serde_json::Value,
    pub check: CheckReport,
    pub report: RunReport,
    #[serde(skip)]
    pub metrics: RunMetrics,
}

impl RunOutput {
    /// Serialized artifact; keys are sorted, so equal runs give equal bytes.
    pub fn artifact_json(&self) -> String {
        serde_json::to_string_pretty(&self.artifact).expect("JSON values always serialize")
    }
}

pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    let input = Input::load(&config.input, config.seed)?;
    execute_on(config, &input)
}

pub fn execute_on(config: &RunConfig, input: &Input) -> Result<RunOutput> {
    let algo = config.algorithm;
    let mode = config.mode(input.node_count());
    let seed = config.seed;
    let mut metrics = RunMetrics::default();
    let (artifact, check, report) = match algo {
        Algorithm::Qdivide => {
            let inst = input.bipartite(algo)?;
            let params = DivideParams {
                thresholds: config.thresholds,
                strictness: if config.strict { Strictness::Strict } else { Strictness::Permissive },
                ell: config.ell,
                ..DivideParams::new(config.q)
            };
            let (schedule, report) = q_divide(&inst, &params, mode, seed)?;
            let check = check_divide(&inst, &schedule, &schedule.thresholds);
            (serde_json::to_value(&schedule)?, check, report)
        }
        Algorithm::Split | Algorithm::BipartiteSplit => {
            let inst = input.bipartite(algo)?;
            let out = k_split(&inst, &config.split_params(), mode, seed)?;
            metrics = RunMetrics {
                frozen_fraction: out.stats.frozen_fraction,
                max_bad_component: out.stats.max_bad_component,
            };
            let budget = Budget::Uniform(split_budget(config.eps, inst.max_left_degree(), config.k));
            let check = check_split(&inst, &out.parts, config.k, &budget);
            (serde_json::to_value(&out.assignment)?, check, out.report)
        }
        Algorithm::EdgeColor => {
            let g = input.graph(algo)?;
            let opts = EdgeColorOptions { constants: config.constants(), ..EdgeColorOptions::default() };
            let out = edge_color(g, config.eps, mode, seed, &opts)?;
            let check = check_edge_coloring(g, &out.coloring, edge_budget(g.max_degree(), config.eps));
            (serde_json::to_value(&out.coloring)?, check, out.report)
        }
        Algorithm::ListColor => {
            let Input::Lists(inst) = input else {
                return Err(Error::InvalidParameter("list-color needs a list instance".into()));
            };
            let mut opts = ListColorOptions::new(config.delta);
            opts.c_target = config.c_target;
            opts.constants = config.constants();
            opts.mode = mode;
            let (colors, _, report) = list_color(inst, &opts, seed)?;
            let check = check_list_coloring(inst, &colors);
            (serde_json::json!({ "colors": colors }), check, report)
        }
        Algorithm::Defective => {
            let g = input.graph(algo)?;
            let (colors, report) = defective_color(g, config.k, config.eps, mode, seed)?;
            let bound = (1.0 + config.eps) * g.max_degree() as f64 / config.k as f64;
            let check = check_defective(g, &colors, bound);
            (serde_json::json!({ "k": config.k, "colors": colors }), check, report)
        }
    };
    Ok(RunOutput { artifact, check, report, metrics })
}
