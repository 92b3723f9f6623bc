//! Racing independent Moser-Tardos executions and agreeing on a winner.

use super::{moser_tardos_run, LllInstance, MtOptions, MtRun};
use crate::error::{Error, Result};
use crate::rng::derive_indexed;

/// ⌈factor·ln(size + 2)⌉ iterations per instance.
pub fn default_rounds_per_instance(size: usize, factor: f64) -> u64 {
    (factor * ((size + 2) as f64).ln()).ceil().max(1.0) as u64
}

#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    pub winner: usize,
    pub assignment: Vec<u32>,
    pub runs: Vec<MtRun>,
    pub rounds_per_instance: u64,
}

/// Runs `ell` executions with seeds derived from `seed`, each capped at
/// `rounds_per_instance` iterations. Every event computes the bit vector of
/// instances that satisfy it; the AND over all events marks the winning
/// instances and the lowest index wins.
pub fn parallel_instances_solve(
    inst: &LllInstance,
    ell: usize,
    seed: u64,
    rounds_per_instance: Option<u64>,
) -> Result<ParallelOutcome> {
    if ell == 0 {
        return Err(Error::InvalidParameter("at least one instance is required".into()));
    }
    let rounds =
        rounds_per_instance.unwrap_or_else(|| default_rounds_per_instance(inst.var_count() + inst.event_count(), 8.0));
    let runs: Vec<MtRun> = (0..ell)
        .map(|i| {
            let opts = MtOptions { max_iterations: rounds, record_trace: false };
            moser_tardos_run(inst, derive_indexed(seed, i as u64), opts)
        })
        .collect();
    let words = ell.div_ceil(64);
    let mut agreed = vec![u64::MAX; words];
    if !ell.is_multiple_of(64) {
        agreed[words - 1] = (1u64 << (ell % 64)) - 1;
    }
    let (mut values, mut counts) = (Vec::new(), Vec::new());
    for e in 0..inst.event_count() as u32 {
        let mut bits = vec![0u64; words];
        for (i, run) in runs.iter().enumerate() {
            if !inst.event_violated(e, &run.assignment, &mut values, &mut counts) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        for (a, b) in agreed.iter_mut().zip(&bits) {
            *a &= b;
        }
    }
    let winner = agreed
        .iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
        .ok_or(Error::NoWinningInstance { instances: ell })?;
    Ok(ParallelOutcome { winner, assignment: runs[winner].assignment.clone(), runs, rounds_per_instance: rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lll::{moser_tardos, Event, Predicate};

    #[test]
    fn single_instance_matches_moser_tardos() {
        let inst = LllInstance::new(vec![2], vec![Event::new(vec![0], Predicate::Forbidden { tuples: vec![vec![0]] })])
            .unwrap();
        let out = parallel_instances_solve(&inst, 1, 5, Some(100)).unwrap();
        assert_eq!(out.winner, 0);
        assert_eq!(out.assignment, moser_tardos(&inst, derive_indexed(5, 0), 100).unwrap());
    }

    #[test]
    fn zero_events_pick_instance_zero() {
        let inst = LllInstance::new(vec![4, 4], vec![]).unwrap();
        for ell in [1, 7, 70] {
            assert_eq!(parallel_instances_solve(&inst, ell, 1, None).unwrap().winner, 0);
        }
    }

    #[test]
    fn unsatisfiable_has_no_winner() {
        let inst = LllInstance::new(vec![2], vec![Event::new(vec![0], Predicate::custom(|_| true))]).unwrap();
        assert!(matches!(
            parallel_instances_solve(&inst, 65, 1, Some(3)),
            Err(Error::NoWinningInstance { instances: 65 })
        ));
    }

    #[test]
    fn winner_is_lowest_satisfying_run() {
        let events =
            (0..10u32).map(|i| Event::new(vec![i, i + 1], Predicate::Forbidden { tuples: vec![vec![0, 0]] })).collect();
        let inst = LllInstance::new(vec![2; 11], events).unwrap();
        let out = parallel_instances_solve(&inst, 32, 9, Some(1)).unwrap();
        assert!(out.runs[out.winner].solved());
        assert!(out.runs[..out.winner].iter().all(|r| !r.solved()));
        assert_eq!(out.assignment, out.runs[out.winner].assignment);
    }
}
