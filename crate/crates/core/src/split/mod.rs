//! k-vertex splitting of bipartite event/variable instances: zero-round
//! sampling, FastShattering with retraction and freezing, and the
//! post-shattering LLLs in LOCAL and CONGEST.

mod post;
mod shatter;

pub use post::{post_shatter_congest, post_shatter_local, PostOutcome, PostStats};
pub use shatter::{fast_shattering, FreezeMetric, ShatterTrace, Shattered, SlotTrace};

use log::warn;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{to_bipartite_split_instance, BipartiteGraph, Graph, Origin};
use crate::rng::{derive_seed, keyed_below};
use crate::sim::{RunReport, SimMode};
use crate::verify::{component_stats, split_budget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    ZeroRound,
    Pre,
    Post,
}

impl Phase {
    pub fn code(self) -> i8 {
        match self {
            Phase::ZeroRound => 0,
            Phase::Pre => 1,
            Phase::Post => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartState {
    Unassigned,
    /// Frozen while processing `slot`; belongs to that slot's bad set.
    Frozen {
        slot: u32,
    },
    Assigned {
        part: u32,
        phase: Phase,
        slot: u32,
    },
}

/// Per-variable state. Serialized as `{k, parts, provenance}` where
/// `provenance` holds phase codes (0 zero-round, 1 pre, 2 post, -1 frozen,
/// -2 unassigned) and unfinished parts are `-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartAssignment {
    pub k: u32,
    pub states: Vec<PartState>,
}

impl PartAssignment {
    pub fn new(k: u32, n: usize) -> Self {
        PartAssignment { k, states: vec![PartState::Unassigned; n] }
    }

    pub fn uniform(k: u32, parts: Vec<u32>, phase: Phase) -> Self {
        let states = parts.into_iter().map(|part| PartState::Assigned { part, phase, slot: 0 }).collect();
        PartAssignment { k, states }
    }

    pub fn is_complete(&self) -> bool {
        self.states.iter().all(|s| matches!(s, PartState::Assigned { .. }))
    }

    /// The part of every variable; errors on the first unfinished one.
    pub fn parts(&self) -> Result<Vec<u32>> {
        self.states
            .iter()
            .enumerate()
            .map(|(x, s)| match s {
                PartState::Assigned { part, .. } => Ok(*part),
                _ => Err(Error::Precondition(format!("variable {x} has no part"))),
            })
            .collect()
    }

    pub fn count_phase(&self, phase: Phase) -> usize {
        self.states.iter().filter(|s| matches!(s, PartState::Assigned { phase: p, .. } if *p == phase)).count()
    }
}

impl Serialize for PartAssignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            k: u32,
            parts: Vec<i64>,
            provenance: Vec<i8>,
        }
        let (parts, provenance) = self
            .states
            .iter()
            .map(|st| match *st {
                PartState::Assigned { part, phase, .. } => (part as i64, phase.code()),
                PartState::Frozen { .. } => (-1, -1),
                PartState::Unassigned => (-1, -2),
            })
            .unzip();
        Wire { k: self.k, parts, provenance }.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostRule {
    /// Every post-shattering instance gets `budget(v)/(3q)`.
    PerSlot,
    /// Instances are solved slot by slot, and every event bounds the
    /// deviation of everything assigned so far by its full budget.
    Remaining,
}

/// Knobs standing in for the universal constants of the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// `q = ⌈slot_factor/ε⌉`
    pub slot_factor: f64,
    /// `z_pre(v) = pre_scale·budget(v)/(3q)`, clamped to at least 1.
    pub pre_scale: f64,
    pub post_rule: PostRule,
    /// `c` in the admissibility bound `k ≤ c·ε⁴·Δ_L/ln Δ_L`.
    pub admissibility: f64,
    /// Parallel-instance iterations are `⌈rounds_factor·ln(size + 2)⌉`.
    pub rounds_factor: f64,
    pub retries: u32,
    pub max_iterations: u64,
}

impl Constants {
    pub fn strict() -> Self {
        Constants {
            slot_factor: 24.0,
            pre_scale: 1.0,
            post_rule: PostRule::PerSlot,
            admissibility: 2f64.powi(-19),
            rounds_factor: 8.0,
            retries: 4,
            max_iterations: 10_000,
        }
    }

    pub fn permissive() -> Self {
        Constants { post_rule: PostRule::Remaining, admissibility: 0.125, retries: 8, ..Self::strict() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitParams {
    pub k: u32,
    pub eps: f64,
    pub constants: Constants,
    /// Enforce admissibility and the q-divide bound instead of warning.
    pub strict: bool,
    /// Cluster colors `Q` for CONGEST post-shattering; default ⌈2 ln ln n⌉.
    pub q_colors: Option<u32>,
    /// Parallel instances `ℓ` in CONGEST; default ⌈6 ln n⌉.
    pub ell: Option<usize>,
    /// Per-event discrepancy budgets; default `ε·Δ_L/k` for every event.
    pub budgets: Option<Vec<f64>>,
    /// Use the zero-round path whenever `k ≤ ε²Δ/(9 ln n)`.
    pub allow_zero_round: bool,
}

impl SplitParams {
    pub fn new(k: u32, eps: f64) -> Self {
        SplitParams {
            k,
            eps,
            constants: Constants::permissive(),
            strict: false,
            q_colors: None,
            ell: None,
            budgets: None,
            allow_zero_round: true,
        }
    }

    pub fn slots(&self) -> u32 {
        ((self.constants.slot_factor / self.eps) - 1e-9).ceil().max(1.0) as u32
    }

    pub fn budgets_for(&self, inst: &BipartiteGraph) -> Result<Vec<f64>> {
        match &self.budgets {
            Some(b) if b.len() != inst.n_left() => {
                Err(Error::InvalidParameter(format!("{} budgets for {} events", b.len(), inst.n_left())))
            }
            Some(b) => Ok(b.clone()),
            None => Ok(vec![split_budget(self.eps, inst.max_left_degree(), self.k); inst.n_left()]),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("ε = {} outside (0, 1]", self.eps)));
        }
        Ok(())
    }
}

/// Node count used in the size-regime formulas.
pub fn instance_n(inst: &BipartiteGraph) -> usize {
    match inst.origin() {
        Origin::Plain => inst.n_left(),
        Origin::Native => inst.n_left() + inst.n_right(),
    }
}

/// Largest `k` with `k ≤ c·ε⁴·Δ/ln Δ`.
pub fn admissible_k(c: f64, eps: f64, delta: usize) -> f64 {
    if delta < 2 {
        return 0.0;
    }
    let d = delta as f64;
    c * eps.powi(4) * d / d.ln()
}

/// `k ≤ ε²Δ/(9 ln n)`
pub fn zero_round_applies(k: u32, eps: f64, delta: usize, n: usize) -> bool {
    n >= 2 && (k as f64) <= eps * eps * delta as f64 / (9.0 * (n as f64).ln())
}

/// Every variable picks a uniform part.
pub fn zero_round_split(n_vars: usize, k: u32, seed: u64) -> PartAssignment {
    let s = derive_seed(seed, "zero-round-split");
    let parts = (0..n_vars as u64).map(|x| keyed_below(s, x, 0, k.max(1))).collect();
    PartAssignment::uniform(k.max(1), parts, Phase::ZeroRound)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPath {
    Trivial,
    ZeroRound,
    Shattering,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStats {
    pub path: SplitPath,
    pub k: u32,
    pub eps: f64,
    pub q: u32,
    pub delta_l: usize,
    pub z_pre_min: f64,
    pub z_pre_max: f64,
    pub triggered: usize,
    pub retracted: usize,
    pub frozen_fraction: f64,
    pub bad_sizes: Vec<usize>,
    pub max_bad_component: usize,
    pub post: Option<PostStats>,
    pub admissible_k: f64,
    pub freeze_metric: Option<FreezeMetric>,
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub assignment: PartAssignment,
    pub parts: Vec<u32>,
    pub report: RunReport,
    pub trace: Option<ShatterTrace>,
    pub stats: SplitStats,
}

/// Dispatches to the trivial, zero-round, or shattering path.
pub fn k_split(inst: &BipartiteGraph, params: &SplitParams, mode: SimMode, seed: u64) -> Result<SplitOutcome> {
    params.validate()?;
    let (k, eps) = (params.k, params.eps);
    let delta = inst.max_left_degree();
    let n = instance_n(inst);
    let adm = admissible_k(params.constants.admissibility, eps, delta);
    let mut stats = SplitStats {
        path: SplitPath::Trivial,
        k,
        eps,
        q: 0,
        delta_l: delta,
        z_pre_min: 0.0,
        z_pre_max: 0.0,
        triggered: 0,
        retracted: 0,
        frozen_fraction: 0.0,
        bad_sizes: Vec::new(),
        max_bad_component: 0,
        post: None,
        admissible_k: adm,
        freeze_metric: None,
    };
    let finish = |assignment: PartAssignment, report: RunReport, trace, stats: SplitStats| -> Result<SplitOutcome> {
        let parts = assignment.parts()?;
        let report = RunReport { payload: serde_json::to_value(&stats)?, ..report };
        Ok(SplitOutcome { assignment, parts, report, trace, stats })
    };
    if k == 1 {
        let a = PartAssignment::uniform(1, vec![0; inst.n_right()], Phase::ZeroRound);
        return finish(a, RunReport::empty(seed), None, stats);
    }
    if params.allow_zero_round && zero_round_applies(k, eps, delta, n) {
        stats.path = SplitPath::ZeroRound;
        return finish(zero_round_split(inst.n_right(), k, seed), RunReport::empty(seed), None, stats);
    }
    if (k as f64) > adm {
        let msg = format!("k = {k} exceeds c·ε⁴·Δ/ln Δ = {adm:.4} (c = {})", params.constants.admissibility);
        if params.strict {
            return Err(Error::Precondition(msg));
        }
        warn!("{msg}; continuing");
    }
    stats.path = SplitPath::Shattering;
    let shattered = fast_shattering(inst, params, mode, derive_seed(seed, "pre"))?;
    stats.q = shattered.trace.q;
    stats.z_pre_min = shattered.z_pre.iter().copied().fold(f64::INFINITY, f64::min);
    stats.z_pre_max = shattered.z_pre.iter().copied().fold(0.0, f64::max);
    if inst.n_left() == 0 {
        stats.z_pre_min = 0.0;
    }
    stats.triggered = shattered.trace.slots.iter().map(|s| s.triggered.len()).sum();
    stats.retracted = shattered.trace.slots.iter().map(|s| s.retracted.len()).sum();
    stats.bad_sizes = shattered.trace.bad.iter().map(Vec::len).collect();
    let frozen: usize = stats.bad_sizes.iter().sum();
    stats.frozen_fraction = if inst.n_right() == 0 { 0.0 } else { frozen as f64 / inst.n_right() as f64 };
    stats.freeze_metric = Some(shattered.trace.metric);
    stats.max_bad_component = bad_component_max(inst, &shattered.trace);

    let post = if mode.is_congest() {
        post_shatter_congest(inst, &shattered, params, mode, derive_seed(seed, "post"))?
    } else {
        post_shatter_local(inst, &shattered, params, mode, derive_seed(seed, "post"))?
    };
    let mut ledger = shattered.ledger;
    ledger.then(&post.ledger);
    stats.post = Some(post.stats.clone());
    let report = ledger.report(seed, serde_json::Value::Null);
    finish(post.assignment, report, Some(shattered.trace), stats)
}

/// Largest component of `Bad_j ∪ N(Bad_j)` in the combined instance graph.
fn bad_component_max(inst: &BipartiteGraph, trace: &ShatterTrace) -> usize {
    if trace.bad.iter().all(Vec::is_empty) {
        return 0;
    }
    let combined = inst.as_graph();
    let nl = inst.n_left() as u32;
    let shifted: Vec<Vec<u32>> = trace.bad.iter().map(|b| b.iter().map(|&x| x + nl).collect()).collect();
    component_stats(&combined, &shifted).max
}

/// Plain graphs go through the bipartite translation; parts are per node.
pub fn k_split_graph(g: &Graph, params: &SplitParams, mode: SimMode, seed: u64) -> Result<SplitOutcome> {
    k_split(&to_bipartite_split_instance(g), params, mode, seed)
}
