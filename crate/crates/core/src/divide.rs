//! q-dividing: assign every variable node a slot in `[q]` so that each event
//! node has at most `z(v)` neighbors per slot.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{brief_ids, Error, Result};
use crate::graph::{to_bipartite_split_instance, BipartiteGraph, Graph};
use crate::lll::{moser_tardos_run, parallel_instances_solve, Event, LllInstance, MtOptions, Predicate};
use crate::rng::{derive_indexed, derive_seed, keyed_below};
use crate::sim::{id_bits, run_protocol, BitLedger, NodeCtx, Outbox, Protocol, RunReport, SimMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// `z = 8Δ/q`
    Uniform,
    /// `z(v) = max{8d(v)/q, 48 ln Δ}`
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    Strict,
    Permissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivideParams {
    pub q: u32,
    pub thresholds: ThresholdMode,
    pub strictness: Strictness,
    /// Parallel instances per component in CONGEST; default ⌈6 ln n⌉.
    pub ell: Option<usize>,
    pub retries: u32,
    pub max_iterations: u64,
}

impl DivideParams {
    pub fn new(q: u32) -> Self {
        DivideParams {
            q,
            thresholds: ThresholdMode::Uniform,
            strictness: Strictness::Permissive,
            ell: None,
            retries: 8,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub q: u32,
    /// Slot of every variable node.
    pub slots: Vec<u32>,
    /// Per event node.
    #[serde(skip)]
    pub thresholds: Vec<f64>,
}

impl Schedule {
    /// Variable nodes of each slot.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.q as usize];
        for (x, &s) in self.slots.iter().enumerate() {
            out[s as usize].push(x as u32);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DivideStats {
    pub deselected: usize,
    pub post_components: usize,
    pub max_post_component: usize,
    pub post_iterations: u64,
    pub strict_bound: f64,
}

/// The largest q accepted in strict mode, `Δ/(6 ln Δ)`.
pub fn strict_q_bound(delta: usize) -> f64 {
    if delta < 2 {
        return 0.0;
    }
    let d = delta as f64;
    d / (6.0 * d.ln())
}

/// `8Δ/q`, at least 1.
pub fn uniform_thresholds(inst: &BipartiteGraph, q: u32) -> Vec<f64> {
    vec![(8.0 * inst.max_left_degree() as f64 / q as f64).max(1.0); inst.n_left()]
}

/// `8d/q` when `d ≥ 6q ln Δ`, otherwise `48 ln Δ`.
pub fn local_threshold(d: f64, q: u32, delta: f64) -> f64 {
    let q = q as f64;
    if d >= 6.0 * q * delta.ln() {
        8.0 * d / q
    } else {
        48.0 * delta.ln()
    }
}

pub fn local_thresholds(inst: &BipartiteGraph, q: u32) -> Result<Vec<f64>> {
    let delta = inst.max_left_degree();
    if delta < 2 {
        return Err(Error::InvalidParameter(format!("local thresholds need Δ ≥ 2, got {delta}")));
    }
    Ok((0..inst.n_left() as u32)
        .map(|v| local_threshold(inst.left_neighbors(v).len() as f64, q, delta as f64))
        .collect())
}

fn thresholds_for(inst: &BipartiteGraph, params: &DivideParams) -> Result<Vec<f64>> {
    match params.thresholds {
        ThresholdMode::Uniform => Ok(uniform_thresholds(inst, params.q)),
        ThresholdMode::Local => local_thresholds(inst, params.q),
    }
}

/// Every variable node picks a uniform slot; no communication.
pub fn zero_round_divide(inst: &BipartiteGraph, q: u32, seed: u64) -> Schedule {
    let q = q.max(1);
    let s = derive_seed(seed, "zero-round-divide");
    let slots = (0..inst.n_right() as u64).map(|x| keyed_below(s, x, 0, q)).collect();
    Schedule { q, slots, thresholds: uniform_thresholds(inst, q) }
}

pub fn zero_round_divide_graph(g: &Graph, q: u32, seed: u64) -> Schedule {
    zero_round_divide(&to_bipartite_split_instance(g), q, seed)
}

#[derive(Clone, Copy)]
enum PhaseOneMsg {
    Slot(u32),
    Deselect,
}

struct PhaseOneState {
    slot: u32,
    assigned: bool,
    done: bool,
}

/// Variables sample among the first `half` slots; events deselect overfull slots.
struct PhaseOne<'a> {
    n_left: u32,
    half: u32,
    q: u32,
    thresholds: &'a [f64],
}

impl Protocol for PhaseOne<'_> {
    type State = PhaseOneState;
    type Msg = PhaseOneMsg;

    fn init(&self, _: &NodeCtx<'_>) -> PhaseOneState {
        PhaseOneState { slot: 0, assigned: false, done: false }
    }

    fn round(
        &self,
        ctx: &NodeCtx<'_>,
        s: &mut PhaseOneState,
        inbox: &[(u32, PhaseOneMsg)],
        out: &mut Outbox<PhaseOneMsg>,
    ) {
        let is_event = ctx.node < self.n_left;
        match (ctx.round, is_event) {
            (1, false) => {
                s.slot = ctx.below(self.half);
                s.assigned = true;
                out.broadcast(ctx.neighbors, PhaseOneMsg::Slot(s.slot));
            }
            (2, true) => {
                let mut counts = vec![0u32; self.half as usize];
                for &(_, m) in inbox {
                    if let PhaseOneMsg::Slot(b) = m {
                        counts[b as usize] += 1;
                    }
                }
                let z = self.thresholds[ctx.node as usize];
                for &(from, m) in inbox {
                    if let PhaseOneMsg::Slot(b) = m {
                        if counts[b as usize] as f64 > z {
                            out.send(from, PhaseOneMsg::Deselect);
                        }
                    }
                }
                s.done = true;
            }
            (3, false) => {
                if inbox.iter().any(|&(_, m)| matches!(m, PhaseOneMsg::Deselect)) {
                    s.assigned = false;
                }
                s.done = true;
            }
            _ => {}
        }
    }

    fn halted(&self, s: &PhaseOneState) -> bool {
        s.done
    }

    fn message_bits(&self, m: &PhaseOneMsg) -> u64 {
        match m {
            PhaseOneMsg::Slot(_) => id_bits(self.q as usize),
            PhaseOneMsg::Deselect => 1,
        }
    }
}

/// Groups unassigned variables whose events connect them.
fn post_components(inst: &BipartiteGraph, unassigned: &[bool]) -> Vec<Vec<u32>> {
    let mut parent: Vec<u32> = (0..inst.n_right() as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for v in 0..inst.n_left() as u32 {
        let mut first = None;
        for &x in inst.left_neighbors(v) {
            if !unassigned[x as usize] {
                continue;
            }
            match first {
                None => first = Some(x),
                Some(f) => {
                    let (a, b) = (find(&mut parent, f), find(&mut parent, x));
                    if a != b {
                        parent[a.max(b) as usize] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for x in 0..inst.n_right() as u32 {
        if unassigned[x as usize] {
            let r = find(&mut parent, x);
            groups.entry(r).or_default().push(x);
        }
    }
    groups.into_values().collect()
}

/// ⌈6 ln n⌉ parallel instances.
pub fn default_ell(n: usize) -> usize {
    (6.0 * (n.max(2) as f64).ln()).ceil() as usize
}

/// Phase I outcome kept for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOneTrace {
    pub pre_slots: Vec<u32>,
    pub deselected: Vec<bool>,
}

pub fn q_divide(
    inst: &BipartiteGraph,
    params: &DivideParams,
    mode: SimMode,
    seed: u64,
) -> Result<(Schedule, RunReport)> {
    q_divide_traced(inst, params, mode, seed).map(|(s, r, _)| (s, r))
}

pub fn q_divide_traced(
    inst: &BipartiteGraph,
    params: &DivideParams,
    mode: SimMode,
    seed: u64,
) -> Result<(Schedule, RunReport, PhaseOneTrace)> {
    let q = params.q;
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    let delta = inst.max_left_degree();
    let bound = strict_q_bound(delta);
    let mut stats = DivideStats { strict_bound: bound, ..Default::default() };
    if q > 1 && q as f64 > bound {
        match params.strictness {
            Strictness::Strict => {
                return Err(Error::Precondition(format!("q = {q} exceeds Δ/(6 ln Δ) = {bound:.3} for Δ = {delta}")));
            }
            Strictness::Permissive => warn!("q = {q} exceeds Δ/(6 ln Δ) = {bound:.3}; continuing"),
        }
    }
    let thresholds = thresholds_for(inst, params)?;
    if q == 1 || inst.edge_count() == 0 {
        let schedule = Schedule { q, slots: vec![0; inst.n_right()], thresholds };
        let report = RunReport { payload: serde_json::to_value(&stats)?, ..RunReport::empty(seed) };
        let trace = PhaseOneTrace { pre_slots: schedule.slots.clone(), deselected: vec![false; inst.n_right()] };
        return Ok((schedule, report, trace));
    }
    let half = q.div_ceil(2);
    let post = q - half;
    let combined = inst.as_graph();
    let nl = inst.n_left() as u32;
    let protocol = PhaseOne { n_left: nl, half, q, thresholds: &thresholds };
    let ex = run_protocol(&combined, &protocol, mode, derive_seed(seed, "divide-pre"), 3)?;
    let mut ledger = BitLedger::new(mode);
    ledger.then_report(&ex.report);

    let mut slots = vec![0u32; inst.n_right()];
    let mut unassigned = vec![false; inst.n_right()];
    for x in 0..inst.n_right() {
        let s = &ex.states[nl as usize + x];
        slots[x] = s.slot;
        unassigned[x] = !s.assigned;
    }
    stats.deselected = unassigned.iter().filter(|&&u| u).count();
    let trace = PhaseOneTrace { pre_slots: slots.clone(), deselected: unassigned.clone() };

    if stats.deselected > 0 {
        let comps = post_components(inst, &unassigned);
        stats.post_components = comps.len();
        stats.max_post_component = comps.iter().map(Vec::len).max().unwrap_or(0);
        let mut phase_two = BitLedger::new(mode);
        let post_seed = derive_seed(seed, "divide-post");
        let ell = params.ell.unwrap_or_else(|| default_ell(inst.n_left() + inst.n_right()));
        for (ci, comp) in comps.iter().enumerate() {
            if post == 1 {
                for &x in comp {
                    slots[x as usize] = half;
                }
                continue;
            }
            let (lll, _) = component_instance(inst, comp, &unassigned, &thresholds, post);
            let mut solved = None;
            let mut comp_ledger = BitLedger::new(mode);
            for attempt in 0..=params.retries {
                let s = derive_indexed(post_seed, ((ci as u64) << 16) | attempt as u64);
                if mode.is_congest() {
                    match parallel_instances_solve(&lll, ell, s, None) {
                        Ok(out) => {
                            comp_ledger.idle_rounds(4 * out.rounds_per_instance + 2);
                            stats.post_iterations = stats.post_iterations.max(out.runs[out.winner].iterations);
                            solved = Some(out.assignment);
                            break;
                        }
                        Err(Error::NoWinningInstance { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                } else {
                    let run = moser_tardos_run(
                        &lll,
                        s,
                        MtOptions { max_iterations: params.max_iterations, record_trace: false },
                    );
                    if run.solved() {
                        comp_ledger.idle_rounds(4 * run.iterations + 2);
                        stats.post_iterations = stats.post_iterations.max(run.iterations);
                        solved = Some(run.assignment);
                        break;
                    }
                }
            }
            let values = solved.ok_or_else(|| {
                Error::Precondition(format!(
                    "q-divide post-shattering component {ci} unsolved; variables {}",
                    brief_ids(comp)
                ))
            })?;
            for (i, &x) in comp.iter().enumerate() {
                slots[x as usize] = half + values[i];
            }
            phase_two.alongside(&comp_ledger);
        }
        ledger.then(&phase_two);
    }
    let schedule = Schedule { q, slots, thresholds };
    Ok((schedule, ledger.report(seed, serde_json::to_value(&stats)?), trace))
}

/// LLL over one component: variables choose one of the `post` buckets,
/// events cap each bucket at `z(v)`.
fn component_instance(
    inst: &BipartiteGraph,
    comp: &[u32],
    unassigned: &[bool],
    thresholds: &[f64],
    post: u32,
) -> (LllInstance, Vec<u32>) {
    let mut events_of: Vec<u32> = comp.iter().flat_map(|&x| inst.right_neighbors(x).iter().copied()).collect();
    events_of.sort_unstable();
    events_of.dedup();
    let local = |x: u32| comp.binary_search(&x).unwrap() as u32;
    let events = events_of
        .iter()
        .map(|&v| {
            let scope = inst.left_neighbors(v).iter().copied().filter(|&x| unassigned[x as usize]).map(local).collect();
            Event::new(scope, Predicate::Capacity { cap: thresholds[v as usize] }).with_host(v)
        })
        .collect();
    let hosts = comp.to_vec();
    (LllInstance::with_hosts(vec![post; comp.len()], hosts, events).expect("well-formed component"), events_of)
}

pub fn q_divide_graph(g: &Graph, params: &DivideParams, mode: SimMode, seed: u64) -> Result<(Schedule, RunReport)> {
    q_divide(&to_bipartite_split_instance(g), params, mode, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen::d_regular;
    use crate::verify::check_divide;

    #[test]
    fn isolated_nodes_stay_in_the_first_slot() {
        let g = Graph::empty(5);
        let (s, r) = q_divide_graph(&g, &DivideParams::new(4), SimMode::local(), 1).unwrap();
        assert_eq!(s.slots, vec![0; 5]);
        assert_eq!(r.rounds, 0);
    }

    #[test]
    fn trivial_q_and_single_node() {
        let g = d_regular(10, 3, 1).unwrap();
        assert!(zero_round_divide_graph(&g, 1, 4).slots.iter().all(|&s| s == 0));
        let one = zero_round_divide_graph(&Graph::empty(1), 7, 4);
        assert_eq!(one.slots.len(), 1);
        assert!(one.slots[0] < 7);
    }

    #[test]
    fn uniform_threshold_value() {
        let g = d_regular(100, 48, 2).unwrap();
        let t = uniform_thresholds(&to_bipartite_split_instance(&g), 6);
        assert!(t.iter().all(|&z| z == 64.0));
    }

    #[test]
    fn local_threshold_branches() {
        let e2 = std::f64::consts::E.powi(2);
        assert!((local_threshold(0.0, 4, e2) - 96.0).abs() < 1e-9);
        assert!((local_threshold(10.0, 4, e2) - 96.0).abs() < 1e-9);
        // High-degree branch: d ≥ 6q ln Δ.
        assert!((local_threshold(12.0, 1, e2) - 96.0).abs() < 1e-9);
        assert!((local_threshold(50.0, 1, e2) - 400.0).abs() < 1e-9);
        // Both forms agree.
        for d in 0..200 {
            let d = d as f64;
            let z = local_threshold(d, 3, 40.0);
            assert!((z - (8.0 * d / 3.0).max(48.0 * 40f64.ln())).abs() < 1e-9);
        }
    }

    #[test]
    fn q_two_forces_post_bucket() {
        // A star with a tight threshold: the center deselects its leaves.
        let g = Graph::from_edges(9, (1..9).map(|i| (0, i))).unwrap();
        let inst = to_bipartite_split_instance(&g);
        let (s, _) = q_divide(&inst, &DivideParams::new(2), SimMode::local(), 3).unwrap();
        assert!(s.slots.iter().all(|&x| x < 2));
        // 8 leaves, z = 8·8/2 = 32: nothing is ever deselected.
        assert!(s.slots.iter().all(|&x| x == 0));
        let mut tight = DivideParams::new(2);
        tight.thresholds = ThresholdMode::Local;
        let (s, _, trace) = q_divide_traced(&inst, &tight, SimMode::local(), 3).unwrap();
        for x in 0..9 {
            assert_eq!(s.slots[x], if trace.deselected[x] { 1 } else { 0 });
        }
    }

    #[test]
    fn strict_bound_enforced() {
        let g = d_regular(200, 8, 1).unwrap();
        let mut p = DivideParams::new(4);
        p.strictness = Strictness::Strict;
        assert!(matches!(q_divide_graph(&g, &p, SimMode::local(), 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn shattering_divide_passes_checker() {
        let g = d_regular(2000, 16, 7).unwrap();
        let inst = to_bipartite_split_instance(&g);
        for q in [2, 4, 8] {
            for seed in 0..3 {
                for mode in [SimMode::local(), SimMode::congest(2000)] {
                    let (s, r) = q_divide(&inst, &DivideParams::new(q), mode, seed).unwrap();
                    assert!(check_divide(&inst, &s, &uniform_thresholds(&inst, q)).pass, "q {q} seed {seed}");
                    assert!(r.rounds >= 3);
                }
            }
        }
    }

    #[test]
    fn post_phase_uses_only_upper_slots() {
        // Thresholds low enough that phase I deselects many nodes.
        let g = d_regular(600, 24, 3).unwrap();
        let inst = to_bipartite_split_instance(&g);
        let mut p = DivideParams::new(48);
        p.thresholds = ThresholdMode::Uniform;
        let (s, r, trace) = q_divide_traced(&inst, &p, SimMode::local(), 11).unwrap();
        assert!(r.payload["deselected"].as_u64().unwrap() > 0);
        for x in 0..inst.n_right() {
            if trace.deselected[x] {
                assert!(s.slots[x] >= 24);
            } else {
                assert_eq!(s.slots[x], trace.pre_slots[x]);
                assert!(s.slots[x] < 24);
            }
        }
        assert!(check_divide(&inst, &s, &uniform_thresholds(&inst, 48)).pass);
    }
}
