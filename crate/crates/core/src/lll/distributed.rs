//! Moser-Tardos as a message-passing protocol on the event/variable incidence
//! graph. One iteration takes four rounds:
//!
//! 1. variables send changed values to their events,
//! 2. violated events announce their id to their variables,
//! 3. each variable answers with the smallest violated id it heard,
//! 4. an event that heard only its own id tells its variables to resample.

use super::LllInstance;
use crate::error::Result;
use crate::graph::Graph;
use crate::rng::keyed_below;
use crate::sim::{id_bits, run_protocol, Execution, NodeCtx, Outbox, Protocol, RunReport, SimMode};

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedMt {
    pub assignment: Vec<u32>,
    pub iterations: u64,
    pub report: RunReport,
}

#[derive(Clone, Copy, Debug)]
enum Msg {
    Value(u32),
    Violated(u32),
    Min(u32),
    Resample,
}

enum NodeState {
    Event { values: Vec<u32>, fresh: bool, violated: bool },
    Var { value: u32, dirty: bool },
}

struct MtProtocol<'a> {
    inst: &'a LllInstance,
    m: u32,
    value_bits: u64,
    id_bits: u64,
}

impl MtProtocol<'_> {
    fn scope_pos(&self, e: u32, var_node: u32) -> usize {
        let x = var_node - self.m;
        self.inst.events()[e as usize].scope.iter().position(|&y| y == x).unwrap()
    }
}

impl Protocol for MtProtocol<'_> {
    type State = NodeState;
    type Msg = Msg;

    fn init(&self, ctx: &NodeCtx<'_>) -> NodeState {
        if ctx.node < self.m {
            let len = self.inst.events()[ctx.node as usize].scope.len();
            NodeState::Event { values: vec![0; len], fresh: true, violated: false }
        } else {
            let x = ctx.node - self.m;
            let value = keyed_below(ctx.seed, x as u64, 0, self.inst.domains()[x as usize]);
            NodeState::Var { value, dirty: true }
        }
    }

    fn round(&self, ctx: &NodeCtx<'_>, state: &mut NodeState, inbox: &[(u32, Msg)], out: &mut Outbox<Msg>) {
        let phase = (ctx.round - 1) % 4;
        match state {
            NodeState::Event { values, fresh, violated } => {
                let e = ctx.node;
                for &(from, msg) in inbox {
                    if let Msg::Value(v) = msg {
                        values[self.scope_pos(e, from)] = v;
                    }
                }
                match phase {
                    1 => {
                        *fresh = false;
                        let mut counts = Vec::new();
                        *violated = self.inst.events()[e as usize].predicate.violated(values, &mut counts);
                        if *violated {
                            out.broadcast(ctx.neighbors, Msg::Violated(e));
                        }
                    }
                    3 if *violated => {
                        let is_min = inbox.iter().all(|&(_, msg)| !matches!(msg, Msg::Min(id) if id != e));
                        if is_min {
                            out.broadcast(ctx.neighbors, Msg::Resample);
                        }
                    }
                    _ => {}
                }
            }
            NodeState::Var { value, dirty } => {
                let x = ctx.node - self.m;
                match phase {
                    0 => {
                        if inbox.iter().any(|&(_, msg)| matches!(msg, Msg::Resample)) {
                            let t = (ctx.round - 1) / 4;
                            *value = keyed_below(ctx.seed, x as u64, t, self.inst.domains()[x as usize]);
                            *dirty = true;
                        }
                        if *dirty {
                            out.broadcast(ctx.neighbors, Msg::Value(*value));
                            *dirty = false;
                        }
                    }
                    2 => {
                        let min = inbox
                            .iter()
                            .filter_map(|&(_, msg)| if let Msg::Violated(id) = msg { Some(id) } else { None })
                            .min();
                        if let Some(min) = min {
                            for &(from, msg) in inbox {
                                if matches!(msg, Msg::Violated(_)) {
                                    out.send(from, Msg::Min(min));
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    fn halted(&self, _: &NodeState) -> bool {
        false
    }

    fn idle(&self, state: &NodeState) -> bool {
        match state {
            NodeState::Event { fresh, violated, .. } => !fresh && !violated,
            NodeState::Var { dirty, .. } => !dirty,
        }
    }

    fn message_bits(&self, msg: &Msg) -> u64 {
        match msg {
            Msg::Value(_) => self.value_bits,
            Msg::Violated(_) | Msg::Min(_) => self.id_bits,
            Msg::Resample => 1,
        }
    }
}

/// Event/variable incidence graph: events `[0, m)`, variables `[m, m+n)`.
pub fn incidence_graph(inst: &LllInstance) -> Graph {
    let m = inst.event_count() as u32;
    let mut adj: Vec<Vec<u32>> = inst.events().iter().map(|ev| ev.scope.iter().map(|&x| x + m).collect()).collect();
    for x in 0..inst.var_count() as u32 {
        adj.push(inst.var_events(x).to_vec());
    }
    Graph::from_raw_adjacency(adj)
}

/// Runs the protocol through the simulator. Produces the same assignment as
/// [`super::moser_tardos_run`] with the same seed.
pub fn distributed_moser_tardos(
    inst: &LllInstance,
    seed: u64,
    mode: SimMode,
    max_iterations: u64,
) -> Result<DistributedMt> {
    let g = incidence_graph(inst);
    let max_dom = inst.domains().iter().copied().max().unwrap_or(1) as usize;
    let protocol = MtProtocol {
        inst,
        m: inst.event_count() as u32,
        value_bits: id_bits(max_dom),
        id_bits: id_bits(inst.event_count().max(1)),
    };
    let Execution { states, report } = run_protocol(&g, &protocol, mode, seed, 4 * max_iterations + 2)?;
    let assignment =
        states.iter().filter_map(|s| if let NodeState::Var { value, .. } = s { Some(*value) } else { None }).collect();
    let iterations = report.rounds.saturating_sub(2) / 4;
    Ok(DistributedMt { assignment, iterations, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lll::{moser_tardos_run, Event, MtOptions, Predicate};

    fn chain(len: u32) -> LllInstance {
        let events = (0..len)
            .map(|i| {
                Event::new(vec![i, i + 1, i + 2], Predicate::Forbidden { tuples: vec![vec![0, 0, 0], vec![1, 1, 1]] })
            })
            .collect();
        LllInstance::new(vec![2; len as usize + 2], events).unwrap()
    }

    #[test]
    fn matches_in_process_execution() {
        let inst = chain(40);
        for seed in 0..25 {
            let local = moser_tardos_run(&inst, seed, MtOptions::default());
            let dist = distributed_moser_tardos(&inst, seed, SimMode::local(), 10_000).unwrap();
            assert_eq!(dist.assignment, local.assignment, "seed {seed}");
            assert_eq!(dist.iterations, local.iterations, "seed {seed}");
        }
    }

    #[test]
    fn congest_bits_stay_small() {
        let inst = chain(40);
        let dist = distributed_moser_tardos(&inst, 3, SimMode::congest(inst.event_count() + inst.var_count()), 10_000)
            .unwrap();
        assert_eq!(dist.report.violations, 0);
    }
}
