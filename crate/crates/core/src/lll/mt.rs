//! In-process Moser-Tardos with local-minimum selection.
//!
//! Variable `x` starts at `keyed_below(seed, x, 0, |D_x|)`. In iteration `t`
//! every violated event whose id is smaller than the ids of all violated
//! events sharing a variable with it is selected, and the variables of the
//! selected events take `keyed_below(seed, x, t, |D_x|)`. The distributed
//! protocol reproduces exactly these draws.

use super::LllInstance;
use crate::error::{Error, Result};
use crate::rng::keyed_below;

#[derive(Debug, Clone, Copy)]
pub struct MtOptions {
    pub max_iterations: u64,
    /// Keep the selected event ids of every iteration.
    pub record_trace: bool,
}

impl Default for MtOptions {
    fn default() -> Self {
        MtOptions { max_iterations: 10_000, record_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MtRun {
    pub assignment: Vec<u32>,
    pub iterations: u64,
    pub resampled_events: u64,
    /// Events still violated when the run stopped.
    pub violated: usize,
    pub trace: Vec<Vec<u32>>,
}

impl MtRun {
    pub fn solved(&self) -> bool {
        self.violated == 0
    }
}

pub fn moser_tardos_run(inst: &LllInstance, seed: u64, opts: MtOptions) -> MtRun {
    let doms = inst.domains();
    let mut assignment: Vec<u32> = (0..doms.len()).map(|x| keyed_below(seed, x as u64, 0, doms[x])).collect();
    let m = inst.event_count();
    let (mut values, mut counts) = (Vec::new(), Vec::new());
    let mut viol = vec![false; m];
    let mut list: Vec<u32> = Vec::new();
    for e in 0..m as u32 {
        if inst.event_violated(e, &assignment, &mut values, &mut counts) {
            viol[e as usize] = true;
            list.push(e);
        }
    }
    let mut stamp = vec![0u64; m];
    let mut iterations = 0;
    let mut resampled_events = 0;
    let mut trace = Vec::new();
    while !list.is_empty() && iterations < opts.max_iterations {
        iterations += 1;
        let t = iterations;
        let selected: Vec<u32> = list
            .iter()
            .copied()
            .filter(|&e| {
                inst.events()[e as usize]
                    .scope
                    .iter()
                    .all(|&x| inst.var_events(x).iter().take_while(|&&f| f < e).all(|&f| !viol[f as usize]))
            })
            .collect();
        resampled_events += selected.len() as u64;
        let mut affected = Vec::new();
        for &e in &selected {
            for &x in &inst.events()[e as usize].scope {
                assignment[x as usize] = keyed_below(seed, x as u64, t, doms[x as usize]);
                for &f in inst.var_events(x) {
                    if stamp[f as usize] != t {
                        stamp[f as usize] = t;
                        affected.push(f);
                    }
                }
            }
        }
        for &f in &affected {
            viol[f as usize] = inst.event_violated(f, &assignment, &mut values, &mut counts);
        }
        list.retain(|&e| viol[e as usize]);
        list.extend(affected.iter().copied().filter(|&f| viol[f as usize]));
        list.sort_unstable();
        list.dedup();
        if opts.record_trace {
            trace.push(selected);
        }
    }
    MtRun { assignment, iterations, resampled_events, violated: list.len(), trace }
}

/// Errors with the number of still-violated events when the cap is reached.
pub fn moser_tardos(inst: &LllInstance, seed: u64, max_iterations: u64) -> Result<Vec<u32>> {
    let run = moser_tardos_run(inst, seed, MtOptions { max_iterations, record_trace: false });
    if run.solved() {
        Ok(run.assignment)
    } else {
        Err(Error::IterationCap { iterations: run.iterations, violated: run.violated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lll::{dependency_graph, Event, Predicate};

    #[test]
    fn zero_events_return_initial_sample() {
        let inst = LllInstance::new(vec![3, 5], vec![]).unwrap();
        let run = moser_tardos_run(&inst, 4, MtOptions::default());
        assert_eq!(run.iterations, 0);
        assert_eq!(run.assignment, vec![keyed_below(4, 0, 0, 3), keyed_below(4, 1, 0, 5)]);
    }

    #[test]
    fn single_forbidden_value() {
        let inst = LllInstance::new(vec![2], vec![Event::new(vec![0], Predicate::Forbidden { tuples: vec![vec![0]] })])
            .unwrap();
        for seed in 0..20 {
            assert_eq!(moser_tardos(&inst, seed, 1000).unwrap(), vec![1]);
        }
    }

    #[test]
    fn cap_reports_violations() {
        let inst = LllInstance::new(vec![2], vec![Event::new(vec![0], Predicate::custom(|_| true))]).unwrap();
        match moser_tardos(&inst, 0, 7) {
            Err(Error::IterationCap { iterations: 7, violated: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn selected_events_are_independent() {
        // A chain of "not all equal" events over overlapping triples.
        let events = (0..30u32)
            .map(|i| {
                Event::new(vec![i, i + 1, i + 2], Predicate::Forbidden { tuples: vec![vec![0, 0, 0], vec![1, 1, 1]] })
            })
            .collect();
        let inst = LllInstance::new(vec![2; 32], events).unwrap();
        let dep = dependency_graph(&inst);
        for seed in 0..20 {
            let run = moser_tardos_run(&inst, seed, MtOptions { max_iterations: 1000, record_trace: true });
            assert!(run.solved());
            assert!(inst.violated_events(&run.assignment).is_empty());
            for sel in &run.trace {
                for (i, &a) in sel.iter().enumerate() {
                    assert!(sel[i + 1..].iter().all(|&b| !dep.has_edge(a, b)));
                }
            }
        }
    }
}
