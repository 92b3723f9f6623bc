//! Post-shattering: one LLL per slot over `Bad_j`, solved per connected
//! component (LOCAL) or cluster by cluster (CONGEST).

use log::warn;
use serde::Serialize;

use super::shatter::Shattered;
use super::{PartAssignment, PartState, Phase, PostRule, SplitParams};
use crate::divide::default_ell;
use crate::error::{brief_ids, Error, Result};
use crate::graph::BipartiteGraph;
use crate::lll::{
    default_rounds_per_instance, moser_tardos_run, parallel_instances_solve, Event, LllInstance, MtOptions, Predicate,
};
use crate::rng::derive_indexed;
use crate::sim::cluster_decompose;
use crate::sim::{id_bits, BitLedger, SimMode};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PostStats {
    pub instances: usize,
    pub components: usize,
    pub max_component_vars: usize,
    pub max_component_events: usize,
    pub max_iterations: u64,
    pub retries_used: u32,
    pub z_post_min: f64,
    pub clusters: usize,
    pub max_cluster_colors: u32,
    pub max_cluster_radius: u32,
    pub unreachable_budgets: usize,
}

#[derive(Debug, Clone)]
pub struct PostOutcome {
    pub assignment: PartAssignment,
    pub ledger: BitLedger,
    pub stats: PostStats,
}

/// Variables of one slot's bad set and the events touching them.
#[derive(Debug, Clone)]
struct Component {
    vars: Vec<u32>,
    events: Vec<u32>,
}

fn find(parent: &mut [u32], mut a: u32) -> u32 {
    while parent[a as usize] != a {
        parent[a as usize] = parent[parent[a as usize] as usize];
        a = parent[a as usize];
    }
    a
}

/// Components of `Bad ∪ N(Bad)` ordered by smallest variable.
fn components(inst: &BipartiteGraph, bad: &[u32]) -> Vec<Component> {
    if bad.is_empty() {
        return Vec::new();
    }
    let mut parent: Vec<u32> = (0..bad.len() as u32).collect();
    let mut first_of_event: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    for (i, &x) in bad.iter().enumerate() {
        for &v in inst.right_neighbors(x) {
            match first_of_event.get(&v) {
                Some(&o) => {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, i as u32));
                    if a != b {
                        parent[a.max(b) as usize] = a.min(b);
                    }
                }
                None => {
                    first_of_event.insert(v, i as u32);
                }
            }
        }
    }
    let mut index: Vec<u32> = vec![u32::MAX; bad.len()];
    let mut out: Vec<Component> = Vec::new();
    for i in 0..bad.len() as u32 {
        let r = find(&mut parent, i);
        if index[r as usize] == u32::MAX {
            index[r as usize] = out.len() as u32;
            out.push(Component { vars: Vec::new(), events: Vec::new() });
        }
        out[index[r as usize] as usize].vars.push(bad[i as usize]);
    }
    for (&v, &i) in &first_of_event {
        let r = find(&mut parent, i);
        out[index[r as usize] as usize].events.push(v);
    }
    for c in &mut out {
        c.events.sort_unstable();
    }
    out
}

/// Smallest achievable `max_i |c_i − total/k|` after adding `f` members to
/// parts already holding `offsets`; filling the emptiest part first is optimal.
pub(crate) fn best_deviation(offsets: &[u32], f: usize) -> f64 {
    let mut c = offsets.to_vec();
    for _ in 0..f {
        let i = (0..c.len()).min_by_key(|&i| c[i]).unwrap();
        c[i] += 1;
    }
    deviation(&c)
}

fn deviation(c: &[u32]) -> f64 {
    let mean = c.iter().sum::<u32>() as f64 / c.len() as f64;
    c.iter().map(|&x| (x as f64 - mean).abs()).fold(0.0, f64::max)
}

/// Per-event threshold for one post-shattering unit (component or cluster).
struct Thresholds<'a> {
    rule: PostRule,
    k: u32,
    base: &'a [f64],
    /// Events whose budget was already exceeded when their unit came up.
    unreachable: std::cell::Cell<usize>,
}

impl Thresholds<'_> {
    fn predicate(&self, inst: &BipartiteGraph, a: &PartAssignment, v: u32, f: usize) -> Predicate {
        match self.rule {
            PostRule::PerSlot => Predicate::Discrepancy { parts: self.k, threshold: self.base[v as usize].max(1.0) },
            PostRule::Remaining => {
                let mut offsets = vec![0u32; self.k as usize];
                for &x in inst.left_neighbors(v) {
                    if let PartState::Assigned { part, .. } = a.states[x as usize] {
                        offsets[part as usize] += 1;
                    }
                }
                let floor = best_deviation(&offsets, f);
                if floor > self.base[v as usize] + 1e-9 {
                    self.unreachable.set(self.unreachable.get() + 1);
                }
                Predicate::OffsetDiscrepancy { threshold: self.base[v as usize].max(floor), offsets }
            }
        }
    }
}

fn unit_instance(
    inst: &BipartiteGraph,
    a: &PartAssignment,
    vars: &[u32],
    events: &[u32],
    k: u32,
    z: &Thresholds<'_>,
) -> LllInstance {
    let local = |x: u32| vars.binary_search(&x).ok().map(|i| i as u32);
    let evs = events
        .iter()
        .map(|&v| {
            let scope: Vec<u32> = inst.left_neighbors(v).iter().filter_map(|&x| local(x)).collect();
            let p = z.predicate(inst, a, v, scope.len());
            Event::new(scope, p).with_host(v)
        })
        .collect();
    LllInstance::with_hosts(vec![k; vars.len()], vars.to_vec(), evs).expect("well-formed post-shattering instance")
}

/// One logical round; in CONGEST a message above the bandwidth is
/// pipelined over several rounds.
fn charge(ledger: &mut BitLedger, edges: u64, bits: u64) {
    let b = ledger.mode.bandwidth_bits;
    if ledger.mode.is_congest() && bits > b && b > 0 {
        let mut left = bits;
        while left > 0 {
            ledger.uniform_round(edges, left.min(b));
            left -= left.min(b);
        }
    } else {
        ledger.uniform_round(edges, bits);
    }
}

fn mt_ledger(mode: SimMode, edges: u64, k: u32, events: usize, iterations: u64, width: u64) -> BitLedger {
    let mut l = BitLedger::new(mode);
    let (vb, ib) = (id_bits(k as usize) * width, id_bits(events.max(1)) * width);
    charge(&mut l, edges, vb);
    l.idle_rounds(1);
    for _ in 0..iterations {
        charge(&mut l, edges, ib);
        charge(&mut l, edges, ib);
        charge(&mut l, edges, width);
        charge(&mut l, edges, vb);
    }
    l
}

fn edges_of(inst: &BipartiteGraph, vars: &[u32]) -> u64 {
    2 * vars.iter().map(|&x| inst.right_neighbors(x).len() as u64).sum::<u64>()
}

fn record(assignment: &mut PartAssignment, vars: &[u32], values: &[u32], slot: u32) {
    for (&x, &part) in vars.iter().zip(values) {
        debug_assert!(matches!(assignment.states[x as usize], PartState::Frozen { .. }));
        assignment.states[x as usize] = PartState::Assigned { part, phase: Phase::Post, slot };
    }
}

fn slot_base(shattered: &Shattered, q: u32, divisor: f64) -> Vec<f64> {
    shattered.budgets.iter().map(|&b| (b / (3.0 * q as f64) / divisor).max(1.0)).collect()
}

/// Every slot's components get their own Moser-Tardos run; all run
/// alongside each other.
pub fn post_shatter_local(
    inst: &BipartiteGraph,
    shattered: &Shattered,
    params: &SplitParams,
    mode: SimMode,
    seed: u64,
) -> Result<PostOutcome> {
    let k = params.k;
    let q = shattered.trace.q;
    let comps: Vec<Vec<Component>> = shattered.trace.bad.iter().map(|b| components(inst, b)).collect();
    let base = match params.constants.post_rule {
        PostRule::PerSlot => slot_base(shattered, q, 1.0),
        PostRule::Remaining => shattered.budgets.clone(),
    };
    let z = Thresholds { rule: params.constants.post_rule, k, base: &base, unreachable: Default::default() };
    let mut assignment = shattered.assignment.clone();
    let mut ledger = BitLedger::new(mode);
    let mut stats = PostStats { z_post_min: f64::INFINITY, ..Default::default() };
    for (j, slot_comps) in comps.iter().enumerate() {
        if !slot_comps.is_empty() {
            stats.instances += 1;
        }
        let mut slot_ledger = BitLedger::new(mode);
        for (ci, comp) in slot_comps.iter().enumerate() {
            let lll = unit_instance(inst, &assignment, &comp.vars, &comp.events, k, &z);
            note_component(&mut stats, &lll);
            let mut solved = None;
            for attempt in 0..=params.constants.retries {
                let s = derive_indexed(seed, ((j as u64) << 40) | ((ci as u64) << 8) | attempt as u64);
                let opts = MtOptions { max_iterations: params.constants.max_iterations, record_trace: false };
                let run = moser_tardos_run(&lll, s, opts);
                if run.solved() {
                    stats.retries_used = stats.retries_used.max(attempt);
                    stats.max_iterations = stats.max_iterations.max(run.iterations);
                    let l = mt_ledger(mode, edges_of(inst, &comp.vars), k, comp.events.len(), run.iterations, 1);
                    slot_ledger.alongside(&l);
                    solved = Some(run.assignment);
                    break;
                }
            }
            let values = solved.ok_or_else(|| Error::PostShattering {
                slot: j as u32,
                component: ci,
                reason: format!(
                    "Moser-Tardos did not converge after {} attempts; variables {}",
                    params.constants.retries + 1,
                    brief_ids(&comp.vars)
                ),
            })?;
            record(&mut assignment, &comp.vars, &values, j as u32);
        }
        chain(&mut ledger, &slot_ledger, params.constants.post_rule);
    }
    finish_stats(&mut stats, &z);
    Ok(PostOutcome { assignment, ledger, stats })
}

/// Slots run alongside each other under the per-slot rule. The remaining-budget
/// rule reads the parts fixed by earlier slots, so slots run in sequence.
fn chain(ledger: &mut BitLedger, slot: &BitLedger, rule: PostRule) {
    match rule {
        PostRule::PerSlot => ledger.alongside(slot),
        PostRule::Remaining => ledger.then(slot),
    }
}

fn note_component(stats: &mut PostStats, lll: &LllInstance) {
    stats.components += 1;
    stats.max_component_vars = stats.max_component_vars.max(lll.var_count());
    stats.max_component_events = stats.max_component_events.max(lll.event_count());
    for e in lll.events() {
        match e.predicate {
            Predicate::Discrepancy { threshold, .. } | Predicate::OffsetDiscrepancy { threshold, .. } => {
                stats.z_post_min = stats.z_post_min.min(threshold);
            }
            _ => {}
        }
    }
}

fn finish_stats(stats: &mut PostStats, z: &Thresholds<'_>) {
    stats.unreachable_budgets = z.unreachable.get();
    if stats.unreachable_budgets > 0 {
        warn!("{} events had exceeded their budget before post-shattering", stats.unreachable_budgets);
    }
    if !stats.z_post_min.is_finite() {
        stats.z_post_min = 0.0;
    }
}

/// Default number of cluster colors, `max(1, ⌈2 ln ln n⌉)`.
pub fn default_q_colors(n: usize) -> u32 {
    let n = (n.max(3)) as f64;
    (2.0 * n.ln().ln()).ceil().max(1.0) as u32
}

struct ClusterUnit {
    slot: u32,
    component: usize,
    color: u32,
    radius: u32,
    vars: Vec<u32>,
    events: Vec<u32>,
}

/// Decomposes every component into clusters with pairwise distance above 3
/// inside a color class, then solves the clusters color by color, each by
/// racing `ℓ` Moser-Tardos runs.
pub fn post_shatter_congest(
    inst: &BipartiteGraph,
    shattered: &Shattered,
    params: &SplitParams,
    mode: SimMode,
    seed: u64,
) -> Result<PostOutcome> {
    let k = params.k;
    let q = shattered.trace.q;
    let n_total = inst.n_left() + inst.n_right();
    let q_colors = params.q_colors.unwrap_or_else(|| default_q_colors(n_total));
    let ell = params.ell.unwrap_or_else(|| default_ell(n_total));
    if q_colors == 0 || ell == 0 {
        return Err(Error::InvalidParameter("Q and ℓ must be at least 1".into()));
    }
    let combined = inst.as_graph();
    let nl = inst.n_left() as u32;
    let mut stats = PostStats { z_post_min: f64::INFINITY, ..Default::default() };

    let mut units: Vec<ClusterUnit> = Vec::new();
    for (j, bad) in shattered.trace.bad.iter().enumerate() {
        let comps = components(inst, bad);
        if !comps.is_empty() {
            stats.instances += 1;
        }
        for (ci, comp) in comps.into_iter().enumerate() {
            stats.components += 1;
            let targets: Vec<u32> = comp.vars.iter().map(|&x| x + nl).collect();
            let mut radius = 2;
            let dec = loop {
                match cluster_decompose(&combined, &targets, 3, q_colors, radius) {
                    Ok(d) => break d,
                    Err(Error::ColorBudget { .. }) if (radius as usize) < 2 * targets.len() + 2 => radius *= 2,
                    Err(e) => return Err(e),
                }
            };
            stats.max_cluster_radius = stats.max_cluster_radius.max(dec.radius);
            for (cl, &color) in dec.clusters.iter().zip(&dec.colors) {
                stats.max_cluster_colors = stats.max_cluster_colors.max(color + 1);
                let vars: Vec<u32> = cl.members.iter().map(|&u| u - nl).collect();
                let mut events: Vec<u32> = vars.iter().flat_map(|&x| inst.right_neighbors(x).iter().copied()).collect();
                events.sort_unstable();
                events.dedup();
                units.push(ClusterUnit { slot: j as u32, component: ci, color, radius: dec.radius, vars, events });
            }
        }
    }
    stats.clusters = units.len();

    let base = match params.constants.post_rule {
        PostRule::PerSlot => slot_base(shattered, q, q_colors as f64),
        PostRule::Remaining => shattered.budgets.clone(),
    };
    let z = Thresholds { rule: params.constants.post_rule, k, base: &base, unreachable: Default::default() };

    let mut assignment = shattered.assignment.clone();
    let mut ledger = BitLedger::new(mode);
    // Colors within a slot run in sequence.
    for j in 0..q {
        let mut slot_ledger = BitLedger::new(mode);
        for color in 0..q_colors {
            let mut color_ledger = BitLedger::new(mode);
            for (ui, u) in units.iter().enumerate().filter(|(_, u)| u.slot == j && u.color == color) {
                let lll = unit_instance(inst, &assignment, &u.vars, &u.events, k, &z);
                note_component(&mut stats, &lll);
                stats.components -= 1;
                let rounds =
                    default_rounds_per_instance(lll.var_count() + lll.event_count(), params.constants.rounds_factor);
                let mut solved = None;
                for attempt in 0..=params.constants.retries {
                    let s = derive_indexed(seed, ((ui as u64) << 8) | attempt as u64);
                    match parallel_instances_solve(&lll, ell, s, Some(rounds)) {
                        Ok(out) => {
                            stats.retries_used = stats.retries_used.max(attempt);
                            stats.max_iterations = stats.max_iterations.max(out.runs[out.winner].iterations);
                            let edges = edges_of(inst, &u.vars);
                            let mut l = mt_ledger(mode, edges, k, u.events.len(), rounds, ell as u64);
                            // Agree on the winner: AND of ℓ-bit vectors up a BFS tree, id back down.
                            for _ in 0..u.radius.max(1) {
                                charge(&mut l, edges, ell as u64);
                            }
                            for _ in 0..u.radius.max(1) {
                                charge(&mut l, edges, id_bits(ell));
                            }
                            color_ledger.alongside(&l);
                            solved = Some(out.assignment);
                            break;
                        }
                        Err(Error::NoWinningInstance { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                }
                let values = solved.ok_or_else(|| Error::PostShattering {
                    slot: u.slot,
                    component: u.component,
                    reason: format!(
                        "no winning instance among {ell} runs in cluster of color {} after {} attempts; variables {}",
                        u.color,
                        params.constants.retries + 1,
                        brief_ids(&u.vars)
                    ),
                })?;
                record(&mut assignment, &u.vars, &values, u.slot);
            }
            slot_ledger.then(&color_ledger);
        }
        chain(&mut ledger, &slot_ledger, params.constants.post_rule);
    }
    finish_stats(&mut stats, &z);
    Ok(PostOutcome { assignment, ledger, stats })
}
