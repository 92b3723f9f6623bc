use proptest::prelude::*;

use shatter::color::misra_gries;
use shatter::divide::{q_divide_graph, uniform_thresholds, zero_round_divide_graph, DivideParams};
use shatter::graph::gen::{d_regular, gnp_capped};
use shatter::graph::io::{load_edge_list, to_edge_list};
use shatter::graph::{to_bipartite_split_instance, Graph};
use shatter::lll::{discrepancy_exceeds, moser_tardos, Event, LllInstance, Predicate};
use shatter::rng::{derive_indexed, keyed_below, keyed_unit};
use shatter::runner::{execute, Algorithm, InputSpec, RunConfig};
use shatter::sim::SimMode;
use shatter::split::{k_split, SplitParams};
use shatter::verify::{check_divide, check_edge_coloring, check_split, Budget};

fn graph() -> impl Strategy<Value = Graph> {
    (2usize..40).prop_flat_map(|n| {
        proptest::collection::vec((0..n as u32, 0..n as u32), 0..120).prop_map(move |pairs| {
            let mut edges: Vec<(u32, u32)> =
                pairs.into_iter().filter(|(u, v)| u != v).map(|(u, v)| (u.min(v), u.max(v))).collect();
            edges.sort_unstable();
            edges.dedup();
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edge_list_round_trips(g in graph()) {
        prop_assert!(g.check_invariants().is_ok());
        let back = load_edge_list(&to_edge_list(&g)).unwrap();
        prop_assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
    }

    #[test]
    fn misra_gries_is_proper_with_delta_plus_one(g in graph()) {
        let c = misra_gries(&g);
        prop_assert_eq!(c.colors.len(), g.m());
        prop_assert!(c.palette as usize <= g.max_degree() + 1);
        prop_assert!(check_edge_coloring(&g, &c, (g.max_degree() + 1) as f64).pass);
    }

    #[test]
    fn one_part_always_splits(g in graph(), seed in any::<u64>()) {
        let inst = to_bipartite_split_instance(&g);
        let out = k_split(&inst, &SplitParams::new(1, 0.5), SimMode::local(), seed).unwrap();
        prop_assert!(out.parts.iter().all(|&p| p == 0));
        prop_assert!(check_split(&inst, &out.parts, 1, &Budget::Uniform(0.0)).pass);
    }

    #[test]
    fn zero_offsets_match_plain_discrepancy(values in proptest::collection::vec(0u32..3, 0..12), t in 0.0f64..4.0) {
        let plain = Predicate::Discrepancy { parts: 3, threshold: t };
        let offset = Predicate::OffsetDiscrepancy { offsets: vec![0; 3], threshold: t };
        let mut scratch = Vec::new();
        prop_assert_eq!(plain.violated(&values, &mut scratch), offset.violated(&values, &mut scratch));
    }

    #[test]
    fn offsets_count_like_fixed_members(
        fixed in proptest::collection::vec(0u32..3, 0..10),
        values in proptest::collection::vec(0u32..3, 0..10),
        t in 0.0f64..4.0,
    ) {
        let mut offsets = vec![0u32; 3];
        fixed.iter().for_each(|&p| offsets[p as usize] += 1);
        let all: Vec<u32> = fixed.iter().chain(&values).copied().collect();
        let mut scratch = Vec::new();
        let whole = Predicate::Discrepancy { parts: 3, threshold: t }.violated(&all, &mut scratch);
        let split = Predicate::OffsetDiscrepancy { offsets, threshold: t }.violated(&values, &mut scratch);
        prop_assert_eq!(whole, split);
    }

    #[test]
    fn discrepancy_matches_definition(counts in proptest::collection::vec(0u32..20, 1..5), t in 0.0f64..6.0) {
        let total: u32 = counts.iter().sum();
        let mean = total as f64 / counts.len() as f64;
        let direct = counts.iter().any(|&c| (c as f64 - mean).abs() > t + 1e-9);
        let exact = discrepancy_exceeds(&counts, total as usize, t);
        // Only disagreement allowed is exactly at the boundary.
        if direct != exact {
            prop_assert!(counts.iter().any(|&c| ((c as f64 - mean).abs() - t).abs() < 1e-6));
        }
    }

    #[test]
    fn keyed_draws_stay_in_range(seed in any::<u64>(), stream in any::<u64>(), round in 0u64..1000, n in 1u32..1000) {
        prop_assert!(keyed_below(seed, stream, round, n) < n);
        let u = keyed_unit(seed, stream, round);
        prop_assert!((0.0..1.0).contains(&u));
        prop_assert_eq!(keyed_below(seed, stream, round, n), keyed_below(seed, stream, round, n));
    }

    #[test]
    fn zero_round_divide_uses_q_slots(g in graph(), q in 1u32..10, seed in any::<u64>()) {
        let s = zero_round_divide_graph(&g, q, seed);
        prop_assert_eq!(s.slots.len(), g.n());
        prop_assert!(s.slots.iter().all(|&b| b < q));
        prop_assert_eq!(s, zero_round_divide_graph(&g, q, seed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moser_tardos_returns_a_satisfying_assignment(
        scopes in proptest::collection::vec(proptest::collection::btree_set(0u32..30, 3), 1..20),
        seed in any::<u64>(),
    ) {
        // One forbidden tuple per event over binary variables: p = 1/8 and
        // each event shares a variable with few others, so a solution exists.
        let events: Vec<Event> = scopes
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let bad = (0..3).map(|j| ((i >> j) & 1) as u32).collect();
                Event::new(s.into_iter().collect(), Predicate::Forbidden { tuples: vec![bad] })
            })
            .collect();
        let inst = LllInstance::new(vec![2; 30], events).unwrap();
        let a = moser_tardos(&inst, seed, 100_000).unwrap();
        prop_assert!(inst.violated_events(&a).is_empty());
        prop_assert_eq!(a, moser_tardos(&inst, seed, 100_000).unwrap());
    }

    #[test]
    fn q_divide_meets_its_thresholds(n in 40usize..120, seed in 0u64..1000) {
        let g = d_regular(n - n % 2, 12, derive_indexed(seed, 0)).unwrap();
        let params = DivideParams::new(4);
        let (schedule, _) = q_divide_graph(&g, &params, SimMode::local(), seed).unwrap();
        let inst = to_bipartite_split_instance(&g);
        let check = check_divide(&inst, &schedule, &uniform_thresholds(&inst, 4));
        prop_assert!(check.pass, "{:?}", check.worst);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn shattering_retracts_at_most_once_and_is_deterministic(seed in 0u64..1_000_000) {
        let g = d_regular(600, 32, derive_indexed(seed, 1)).unwrap();
        let inst = to_bipartite_split_instance(&g);
        let params = SplitParams::new(2, 0.5);
        let a = k_split(&inst, &params, SimMode::local(), seed).unwrap();
        if let Some(trace) = &a.trace {
            prop_assert!(trace.check_one_retraction(&inst).is_ok());
            prop_assert!(trace.check_bad_sets(inst.n_right()).is_ok());
        }
        let b = k_split(&inst, &params, SimMode::local(), seed).unwrap();
        prop_assert_eq!(a.parts, b.parts);
        prop_assert_eq!(a.report.rounds, b.report.rounds);
    }

    #[test]
    fn runner_artifacts_are_reproducible(seed in any::<u64>(), pick in 0usize..Algorithm::ALL.len()) {
        let algo = Algorithm::ALL[pick];
        let input: InputSpec = match algo {
            Algorithm::ListColor => "lists:120:12:4".parse().unwrap(),
            _ => "gnp:150:10".parse().unwrap(),
        };
        let config = RunConfig::new(algo, input, seed);
        match (execute(&config), execute(&config)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.artifact_json(), b.artifact_json()),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "runs diverged"),
        }
    }
}

#[test]
fn capped_gnp_respects_its_cap() {
    for seed in 0..5 {
        let g = gnp_capped(300, 16, seed).unwrap();
        assert!(g.max_degree() <= 16);
        assert!(g.check_invariants().is_ok());
    }
}
