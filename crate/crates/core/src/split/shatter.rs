//! FastShattering: slots of a q-divide are processed one after another. Live
//! variables of the current slot sample a part; an event whose live slot
//! neighbors deviate by more than `z_pre` retracts them and freezes every
//! unassigned later-slot variable within distance 3.

use log::warn;
use serde::Serialize;

use super::{Constants, PartAssignment, PartState, Phase, SplitParams};
use crate::divide::{q_divide, DivideParams, ThresholdMode};
use crate::error::{Error, Result};
use crate::graph::{bfs_distances, BipartiteGraph, Graph, Origin, Topology};
use crate::rng::keyed_below;
use crate::sim::{id_bits, BitLedger, SimMode};

/// How the freeze radius is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreezeMetric {
    /// Hops in the original graph (instances built from a plain graph).
    PlainGraph,
    /// Hops in the combined event/variable graph.
    Bipartite,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SlotTrace {
    pub triggered: Vec<u32>,
    pub retracted: Vec<u32>,
    /// Later-slot variables frozen by this slot's triggers.
    pub frozen: Vec<u32>,
    /// `(v, d̂_j(v))` for every event with a live neighbor in the slot.
    pub live_degrees: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShatterTrace {
    pub q: u32,
    pub metric: FreezeMetric,
    pub slots: Vec<SlotTrace>,
    /// `Bad_j`: retracted plus frozen variables of slot `j`, sorted.
    pub bad: Vec<Vec<u32>>,
}

impl ShatterTrace {
    /// Every event sees retractions among its neighbors in at most one slot.
    pub fn check_one_retraction(&self, inst: &BipartiteGraph) -> std::result::Result<(), String> {
        let mut seen: Vec<u32> = vec![u32::MAX; inst.n_left()];
        for (j, slot) in self.slots.iter().enumerate() {
            for &x in &slot.retracted {
                for &v in inst.right_neighbors(x) {
                    let s = &mut seen[v as usize];
                    if *s == u32::MAX {
                        *s = j as u32;
                    } else if *s != j as u32 {
                        return Err(format!("event {v} saw retractions in slots {} and {j}", *s));
                    }
                }
            }
        }
        Ok(())
    }

    /// Bad sets are pairwise disjoint and equal the union of each slot's
    /// retracted and frozen variables.
    pub fn check_bad_sets(&self, n_vars: usize) -> std::result::Result<(), String> {
        let mut owner = vec![u32::MAX; n_vars];
        for (j, set) in self.bad.iter().enumerate() {
            let mut expect: Vec<u32> = self.slots[j].retracted.iter().chain(&self.slots[j].frozen).copied().collect();
            expect.sort_unstable();
            expect.dedup();
            if &expect != set {
                return Err(format!("Bad_{j} differs from retracted ∪ frozen"));
            }
            for &x in set {
                if owner[x as usize] != u32::MAX {
                    return Err(format!("variable {x} in Bad_{} and Bad_{j}", owner[x as usize]));
                }
                owner[x as usize] = j as u32;
            }
        }
        Ok(())
    }
}

/// The plain graph behind a translated instance: node `v`'s neighbors are
/// the variables of event `v`.
pub(crate) struct PlainView<'a>(pub &'a BipartiteGraph);

impl Topology for PlainView<'_> {
    fn node_count(&self) -> usize {
        self.0.n_left()
    }

    fn neighbors_of(&self, v: u32) -> &[u32] {
        self.0.left_neighbors(v)
    }
}

/// Multi-source distance-3 ball around event nodes, as variable ids.
pub(crate) struct FreezeBall<'a> {
    inst: &'a BipartiteGraph,
    combined: Option<Graph>,
}

impl<'a> FreezeBall<'a> {
    pub(crate) fn new(inst: &'a BipartiteGraph) -> Self {
        let plain = inst.origin() == Origin::Plain && inst.n_left() == inst.n_right();
        FreezeBall { inst, combined: if plain { None } else { Some(inst.as_graph()) } }
    }

    pub(crate) fn metric(&self) -> FreezeMetric {
        if self.combined.is_some() {
            FreezeMetric::Bipartite
        } else {
            FreezeMetric::PlainGraph
        }
    }

    /// Returns the variables within distance 3 of `events` and the
    /// per-layer edge counts of the flood.
    pub(crate) fn around(&self, events: &[u32]) -> (Vec<u32>, [u64; 3]) {
        let mut layers = [0u64; 3];
        match &self.combined {
            None => {
                let view = PlainView(self.inst);
                let dist = bfs_distances(&view, events, 3);
                let mut out = Vec::new();
                for (v, &d) in dist.iter().enumerate() {
                    if d <= 3 {
                        out.push(v as u32);
                        if d < 3 {
                            layers[d as usize] += view.neighbors_of(v as u32).len() as u64;
                        }
                    }
                }
                (out, layers)
            }
            Some(g) => {
                let dist = bfs_distances(g, events, 3);
                let nl = self.inst.n_left();
                let mut out = Vec::new();
                for (u, &d) in dist.iter().enumerate() {
                    if d <= 3 {
                        if u >= nl {
                            out.push((u - nl) as u32);
                        }
                        if d < 3 {
                            layers[d as usize] += g.neighbors(u as u32).len() as u64;
                        }
                    }
                }
                (out, layers)
            }
        }
    }
}

/// Partial assignment after the pre-shattering phase.
#[derive(Debug, Clone)]
pub struct Shattered {
    pub assignment: PartAssignment,
    pub trace: ShatterTrace,
    pub z_pre: Vec<f64>,
    pub budgets: Vec<f64>,
    pub slots: Vec<u32>,
    pub ledger: BitLedger,
}

pub(crate) fn pre_thresholds(budgets: &[f64], q: u32, c: &Constants) -> Vec<f64> {
    let mut clamped = 0usize;
    let z = budgets
        .iter()
        .map(|&b| {
            let z = c.pre_scale * b / (3.0 * q as f64);
            if z < 1.0 {
                clamped += 1;
                1.0
            } else {
                z
            }
        })
        .collect();
    if clamped > 0 {
        warn!("z_pre below 1 for {clamped} events; clamped to 1");
    }
    z
}

pub fn fast_shattering(inst: &BipartiteGraph, params: &SplitParams, mode: SimMode, seed: u64) -> Result<Shattered> {
    let k = params.k;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let q = params.slots();
    let budgets = params.budgets_for(inst)?;
    let z_pre = pre_thresholds(&budgets, q, &params.constants);

    // Degree-local thresholds keep the divide solvable once q outgrows Δ.
    let mut divide = DivideParams::new(q);
    if inst.max_left_degree() >= 2 {
        divide.thresholds = ThresholdMode::Local;
    }
    divide.ell = params.ell;
    divide.retries = params.constants.retries;
    divide.max_iterations = params.constants.max_iterations;
    let (schedule, divide_report) = q_divide(inst, &divide, mode, seed)?;
    let mut ledger = BitLedger::new(mode);
    ledger.then_report(&divide_report);

    let (nl, nr) = (inst.n_left(), inst.n_right());
    let members = schedule.members();
    let ball = FreezeBall::new(inst);
    let mut assignment = PartAssignment::new(k, nr);
    let mut trace = ShatterTrace { q, metric: ball.metric(), slots: Vec::with_capacity(q as usize), bad: Vec::new() };
    let mut counts = vec![0u32; nl * k as usize];
    let mut live_deg = vec![0u32; nl];
    let mut touched: Vec<u32> = Vec::new();
    let mut temp = vec![u32::MAX; nr];
    let part_bits = id_bits(k as usize);
    let kf = k as f64;

    for j in 0..q {
        let live: Vec<u32> = members[j as usize]
            .iter()
            .copied()
            .filter(|&x| assignment.states[x as usize] == PartState::Unassigned)
            .collect();
        let mut sends = 0u64;
        for &x in &live {
            let part = keyed_below(seed, x as u64, j as u64 + 1, k);
            temp[x as usize] = part;
            for &v in inst.right_neighbors(x) {
                if live_deg[v as usize] == 0 {
                    touched.push(v);
                }
                live_deg[v as usize] += 1;
                counts[v as usize * k as usize + part as usize] += 1;
            }
            sends += inst.right_neighbors(x).len() as u64;
        }
        touched.sort_unstable();
        let mut slot = SlotTrace::default();
        for &v in &touched {
            let d = live_deg[v as usize];
            slot.live_degrees.push((v, d));
            let row = &counts[v as usize * k as usize..(v as usize + 1) * k as usize];
            let z = z_pre[v as usize];
            if row.iter().any(|&c| (kf * c as f64 - d as f64).abs() > kf * z) {
                slot.triggered.push(v);
            }
        }
        ledger.uniform_round(sends, part_bits);

        let mut retract_edges = 0u64;
        for &v in &slot.triggered {
            for &x in inst.left_neighbors(v) {
                if temp[x as usize] != u32::MAX {
                    retract_edges += 1;
                    if assignment.states[x as usize] == PartState::Unassigned {
                        assignment.states[x as usize] = PartState::Frozen { slot: j };
                        slot.retracted.push(x);
                    }
                }
            }
        }
        slot.retracted.sort_unstable();
        ledger.uniform_round(retract_edges, 1);

        let layers = if slot.triggered.is_empty() {
            [0; 3]
        } else {
            let (reach, layers) = ball.around(&slot.triggered);
            for x in reach {
                let st = &mut assignment.states[x as usize];
                if *st == PartState::Unassigned && schedule.slots[x as usize] > j {
                    *st = PartState::Frozen { slot: j };
                    slot.frozen.push(x);
                }
            }
            layers
        };
        for e in layers {
            ledger.uniform_round(e, 1);
        }

        for &x in &live {
            if assignment.states[x as usize] == PartState::Unassigned {
                assignment.states[x as usize] =
                    PartState::Assigned { part: temp[x as usize], phase: Phase::Pre, slot: j };
            }
            temp[x as usize] = u32::MAX;
        }
        for &v in &touched {
            live_deg[v as usize] = 0;
            counts[v as usize * k as usize..(v as usize + 1) * k as usize].iter_mut().for_each(|c| *c = 0);
        }
        touched.clear();
        let mut bad: Vec<u32> = slot.retracted.iter().chain(&slot.frozen).copied().collect();
        bad.sort_unstable();
        trace.bad.push(bad);
        trace.slots.push(slot);
    }
    Ok(Shattered { assignment, trace, z_pre, budgets, slots: schedule.slots, ledger })
}
