//! Desk-scale acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::E;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use shatter::color::{
    amplify_ratio, amplify_rounds, edge_color, list_color, list_sparsify, rs_nibble_iteration, synthetic_list_instance,
    EdgeColorOptions, ListColorOptions, ListGenSpec, ListInstance, NibbleState, SparsifyOptions,
};
use shatter::divide::{q_divide, DivideParams, ThresholdMode};
use shatter::graph::gen::{d_regular, gnp_capped};
use shatter::graph::{to_bipartite_split_instance, BipartiteGraph, Graph};
use shatter::lll::{brute_force_solve, moser_tardos, parallel_instances_solve, Event, LllInstance, Predicate};
use shatter::rng::derive_indexed;
use shatter::runner::{execute, Algorithm, InputSpec, RunConfig};
use shatter::sim::{Model, SimMode};
use shatter::split::{k_split, k_split_graph, zero_round_applies, zero_round_split, SplitParams, SplitPath};
use shatter::verify::{
    check_divide, check_edge_coloring, check_list_coloring, check_sparsification, check_split, check_split_graph,
    chernoff_bound, split_budget, Budget,
};

const SEEDS: u64 = 20;

/// Runs `f` over `items` on all cores, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(1);
    let chunk = items.len().div_ceil(threads).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    })
}

struct Verdict {
    pass: bool,
    detail: String,
}

type Criterion<'a> = Box<dyn Fn() -> Verdict + 'a>;

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn graph_seed(tag: u64, seed: u64) -> u64 {
    derive_indexed(tag, seed)
}

// Criteria 1 and 2 share their runs.
struct SplitRun {
    d: usize,
    pass: bool,
    retraction_ok: bool,
    elapsed: Duration,
    max_dev: f64,
}

fn split_runs() -> Vec<SplitRun> {
    let jobs: Vec<(usize, u64)> = [32usize, 64].iter().flat_map(|&d| (0..SEEDS).map(move |s| (d, s))).collect();
    par_map(&jobs, |&(d, seed)| {
        let g = d_regular(20_000, d, graph_seed(1, seed)).unwrap();
        let inst = to_bipartite_split_instance(&g);
        let start = Instant::now();
        let out = k_split(&inst, &SplitParams::new(2, 0.5), SimMode::local(), seed);
        let elapsed = start.elapsed();
        match out {
            Ok(out) => {
                let check = check_split(&inst, &out.parts, 2, &Budget::Uniform(split_budget(0.5, d, 2)));
                let retraction_ok = match (&out.trace, out.stats.path) {
                    (Some(t), SplitPath::Shattering) => t.check_one_retraction(&inst).is_ok(),
                    _ => false,
                };
                SplitRun { d, pass: check.pass, retraction_ok, elapsed, max_dev: check.summary.max }
            }
            Err(_) => SplitRun { d, pass: false, retraction_ok: false, elapsed, max_dev: f64::NAN },
        }
    })
}

fn criterion_1(runs: &[SplitRun]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [32, 64] {
        let rs: Vec<&SplitRun> = runs.iter().filter(|r| r.d == d).collect();
        let passed = rs.iter().filter(|r| r.pass).count();
        let slowest = rs.iter().map(|r| r.elapsed).max().unwrap_or_default();
        let worst = rs.iter().map(|r| r.max_dev).fold(0.0, f64::max);
        ok &= passed >= 19 && slowest < Duration::from_secs(60);
        parts.push(format!(
            "d={d}: {passed}/{} pass, max deviation {worst} (budget {}), slowest {:.2}s",
            rs.len(),
            split_budget(0.5, d, 2),
            slowest.as_secs_f64()
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_2(runs: &[SplitRun]) -> Verdict {
    let bad = runs.iter().filter(|r| !r.retraction_ok).count();
    verdict(bad == 0, format!("{} runs checked, {bad} with a node retracted in two slots", runs.len()))
}

fn criterion_3() -> Verdict {
    let jobs: Vec<(usize, u32, u64)> = [32usize, 64]
        .iter()
        .flat_map(|&d| [2u32, 4].into_iter().flat_map(move |q| (0..SEEDS).map(move |s| (d, q, s))))
        .collect();
    let results = par_map(&jobs, |&(d, q, seed)| {
        let g = d_regular(20_000, d, graph_seed(3, seed)).unwrap();
        let inst = to_bipartite_split_instance(&g);
        let delta = inst.max_left_degree() as f64;
        let uniform = q_divide(&inst, &DivideParams::new(q), SimMode::local(), seed)
            .map(|(s, _)| check_divide(&inst, &s, &vec![8.0 * delta / q as f64; inst.n_left()]).pass)
            .unwrap_or(false);
        let local_z: Vec<f64> = (0..inst.n_left() as u32)
            .map(|v| (8.0 * inst.left_neighbors(v).len() as f64 / q as f64).max(48.0 * delta.ln()))
            .collect();
        let params = DivideParams { thresholds: ThresholdMode::Local, ..DivideParams::new(q) };
        let local = q_divide(&inst, &params, SimMode::local(), seed)
            .map(|(s, _)| check_divide(&inst, &s, &local_z).pass)
            .unwrap_or(false);
        (uniform, local)
    });
    let u = results.iter().filter(|r| r.0).count();
    let l = results.iter().filter(|r| r.1).count();
    verdict(
        u == jobs.len() && l == jobs.len(),
        format!("uniform {u}/{}, local {l}/{} (d ∈ {{32, 64}}, q ∈ {{2, 4}})", jobs.len(), jobs.len()),
    )
}

fn criterion_4() -> Verdict {
    let (n, delta, eps, k) = (20_000usize, 400usize, 0.5, 2u32);
    let bound = eps * eps * delta as f64 / (9.0 * (n as f64).ln());
    let seeds: Vec<u64> = (0..SEEDS).collect();
    let passed = par_map(&seeds, |&seed| {
        let g = d_regular(n, delta, graph_seed(4, seed)).unwrap();
        let a = zero_round_split(g.n(), k, seed);
        check_split_graph(&g, &a.parts().unwrap(), k, eps).pass
    })
    .into_iter()
    .filter(|&p| p)
    .count();
    verdict(
        passed >= 19,
        format!(
            "{passed}/{SEEDS} pass; ε²Δ/(9 ln n) = {bound:.3}, so k = {k} is {} the stated regime",
            if zero_round_applies(k, eps, delta, n) { "inside" } else { "outside" }
        ),
    )
}

/// Satisfiable instances with at most 8 binary variables and 6 events.
fn lll_corpus() -> Vec<LllInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::new();
    while out.len() < 200 {
        let nv = rng.gen_range(1..=8u32);
        let ne = rng.gen_range(1..=6usize);
        let vars: Vec<u32> = (0..nv).collect();
        let events = (0..ne)
            .map(|_| {
                let size = rng.gen_range(1..=nv.min(3)) as usize;
                let mut scope: Vec<u32> = vars.choose_multiple(&mut rng, size).copied().collect();
                scope.sort_unstable();
                let space = 1u32 << size;
                let forbid = rng.gen_range(1..space);
                let mut codes: Vec<u32> = (0..space).collect();
                codes.shuffle(&mut rng);
                let tuples =
                    codes[..forbid as usize].iter().map(|&c| (0..size).map(|i| (c >> i) & 1).collect()).collect();
                Event::new(scope, Predicate::Forbidden { tuples })
            })
            .collect();
        let inst = LllInstance::new(vec![2; nv as usize], events).unwrap();
        if brute_force_solve(&inst, 1 << 16).unwrap().is_some() {
            out.push(inst);
        }
    }
    out
}

/// Independent scan: no event's forbidden tuple matches the assignment.
fn violations(inst: &LllInstance, a: &[u32]) -> usize {
    inst.events()
        .iter()
        .filter(|e| match &e.predicate {
            Predicate::Forbidden { tuples } => {
                let vals: Vec<u32> = e.scope.iter().map(|&x| a[x as usize]).collect();
                tuples.contains(&vals)
            }
            _ => unreachable!(),
        })
        .count()
}

fn criterion_5(corpus: &[LllInstance]) -> Verdict {
    let mut unsolved = 0;
    let mut dirty = 0;
    for inst in corpus {
        let mut any = false;
        for seed in 0..10 {
            if let Ok(a) = moser_tardos(inst, seed, 10_000) {
                if violations(inst, &a) == 0 {
                    any = true;
                } else {
                    dirty += 1;
                }
            }
        }
        if !any {
            unsolved += 1;
        }
    }
    verdict(
        unsolved == 0 && dirty == 0,
        format!(
            "{} instances: {unsolved} unsolved by all 10 seeds, {dirty} returned assignments with violations",
            corpus.len()
        ),
    )
}

fn criterion_6(corpus: &[LllInstance]) -> Verdict {
    let (mut wins, mut total, mut mismatched) = (0usize, 0usize, 0usize);
    for inst in corpus {
        for seed in 0..10 {
            total += 1;
            if let Ok(out) = parallel_instances_solve(inst, 32, seed, None) {
                wins += 1;
                let from_run = out.runs.iter().any(|r| r.assignment == out.assignment)
                    && out.runs[out.winner].assignment == out.assignment;
                if !from_run || violations(inst, &out.assignment) != 0 {
                    mismatched += 1;
                }
            }
        }
    }
    let rate = wins as f64 / total as f64;
    verdict(
        rate >= 0.99 && mismatched == 0,
        format!(
            "winner in {wins}/{total} pairs ({:.2}%), {mismatched} outputs not equal to a winning run",
            100.0 * rate
        ),
    )
}

fn criterion_7() -> Verdict {
    let (eps, d) = (0.5, 64usize);
    let budget = (1.0 + eps) * d as f64;
    let seeds: Vec<u64> = (0..SEEDS).collect();
    let results = par_map(&seeds, |&seed| {
        let g = d_regular(20_000, d, graph_seed(7, seed)).unwrap();
        match edge_color(&g, eps, SimMode::local(), seed, &EdgeColorOptions::default()) {
            Ok(out) => {
                let check = check_edge_coloring(&g, &out.coloring, budget);
                let s = &out.stats;
                let lhs = s.k1 as f64 * s.k2 as f64 * (1.0 + eps / 6.0) * s.delta2 as f64;
                (check.pass, lhs <= budget + 1e-9, out.coloring.palette, lhs)
            }
            Err(_) => (false, false, 0, f64::NAN),
        }
    });
    let proper = results.iter().filter(|r| r.0).count();
    let chain = results.iter().filter(|r| r.1).count();
    let palette = results.iter().map(|r| r.2).max().unwrap_or(0);
    let lhs = results.iter().map(|r| r.3).fold(0.0, f64::max);
    verdict(
        proper == seeds.len() && chain == seeds.len(),
        format!(
            "{proper}/{SEEDS} proper within {budget}, largest palette {palette}; chain k·k′·(1+ε/6)Δ″ ≤ (1+ε)Δ on {chain}/{SEEDS} (max lhs {lhs:.2})"
        ),
    )
}

/// Sparsification bounds recounted from the raw lists.
fn sparsify_holds(inst: &ListInstance, new_lists: &[Vec<u32>], k: u32, eps: f64) -> bool {
    let (l, t, kf) = (inst.l() as f64, inst.t() as f64, k as f64);
    let g = inst.graph();
    (0..g.n() as u32).all(|v| {
        let new = &new_lists[v as usize];
        let sizes_ok = (new.len() as f64 - l / kf).abs() <= eps * l / kf + 1e-9;
        let subset = new.iter().all(|c| inst.list(v).contains(c));
        let degrees_ok = new.iter().all(|c| {
            let deg = g.neighbors(v).iter().filter(|&&u| new_lists[u as usize].contains(c)).count();
            deg as f64 <= t / kf + eps * t / kf + 1e-9
        });
        sizes_ok && subset && degrees_ok
    })
}

fn criterion_8() -> Verdict {
    let seeds: Vec<u64> = (0..SEEDS).collect();
    let results = par_map(&seeds, |&seed| {
        let inst = synthetic_list_instance(&ListGenSpec::new(5000, 40, 20, graph_seed(8, seed))).unwrap();
        let colored = list_color(&inst, &ListColorOptions::new(1.0), seed)
            .map(|(c, _, _)| check_list_coloring(&inst, &c).pass)
            .unwrap_or(false);
        let sparsified = list_sparsify(&inst, &SparsifyOptions::new(2, 0.5), seed)
            .map(|o| {
                sparsify_holds(&inst, &o.new_lists, 2, 0.5) && check_sparsification(&inst, &o.new_lists, 2, 0.5).pass
            })
            .unwrap_or(false);
        (colored, sparsified)
    });
    let colored = results.iter().filter(|r| r.0).count();
    let sparsified = results.iter().filter(|r| r.1).count();
    verdict(
        colored >= 18 && sparsified == seeds.len(),
        format!("list coloring {colored}/{SEEDS} valid; sparsification bounds hold on {sparsified}/{SEEDS}"),
    )
}

/// Live color degrees recounted from lists.
fn color_degree(g: &Graph, s: &NibbleState, v: u32) -> usize {
    s.lists[v as usize]
        .iter()
        .map(|c| {
            g.neighbors(v)
                .iter()
                .filter(|&&u| s.colors[u as usize].is_none() && s.lists[u as usize].contains(c))
                .count()
        })
        .max()
        .unwrap_or(0)
}

fn criterion_9() -> Verdict {
    let (mut accepted, mut bad) = (0usize, 0usize);
    for &(n, degree, palette, t) in
        &[(30usize, 4usize, 200u32, 4usize), (40, 3, 600, 3), (60, 6, 300, 6), (200, 12, 160, 20)]
    {
        for seed in 0..10 {
            let inst = synthetic_list_instance(&ListGenSpec { n, degree, palette, l: 40, t, seed }).unwrap();
            let g = inst.graph();
            let mut state = NibbleState::new(&inst, 1.0, None);
            for i in 0..6 {
                let Ok((next, _)) = rs_nibble_iteration(g, &state, derive_indexed(seed, i), 100) else { break };
                accepted += 1;
                let ln_g = state.g.ln();
                let fl = 1.0 - 1.0 / ((1.0 + 0.75 * state.delta) * ln_g);
                let ft = 1.0 - 1.0 / ((1.0 + 0.25 * state.delta) * ln_g);
                for v in 0..g.n() as u32 {
                    if next.colors[v as usize].is_some() {
                        continue;
                    }
                    let (lb, la) = (state.lists[v as usize].len() as f64, next.lists[v as usize].len() as f64);
                    let (tb, ta) = (color_degree(g, &state, v) as f64, color_degree(g, &next, v) as f64);
                    if la < fl.max(0.0) * lb || ta > ft.max(0.0) * tb {
                        bad += 1;
                    }
                }
                state = next;
            }
        }
    }
    let r = amplify_rounds(1.0, E, E);
    let (mut exact, mut runs) = (0, 0);
    for seed in 0..10 {
        let inst = synthetic_list_instance(&ListGenSpec { n: 40, degree: 3, palette: 600, l: 40, t: 3, seed }).unwrap();
        runs += 1;
        if let Ok(s) = amplify_ratio(&inst, E, 1.0, Some(E), seed, 100) {
            if s.iteration == 5 {
                exact += 1;
            }
        }
    }
    verdict(
        bad == 0 && accepted > 0 && r == 5 && exact == runs,
        format!("{accepted} accepted iterations, {bad} factor violations; r = {r}, exactly 5 accepted in {exact}/{runs} amplify runs"),
    )
}

fn criterion_10() -> Verdict {
    let trials = 100_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut points, mut failures) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for n in [10u64, 30, 100, 400, 1000] {
        for k in [2u32, 3, 5, 8] {
            let mean = n as f64 / k as f64;
            for frac in [0.1, 0.25, 0.5, 0.75, 1.0] {
                let z = frac * mean;
                let bin = Binomial::new(n, 1.0 / k as f64).unwrap();
                let hits = (0..trials).filter(|_| (bin.sample(&mut rng) as f64 - mean).abs() > z).count();
                let p = hits as f64 / trials as f64;
                let se = (p * (1.0 - p) / trials as f64).sqrt();
                let bound = chernoff_bound(n, k, z);
                points += 1;
                worst = worst.max(p - bound);
                if p > bound + 3.0 * se {
                    failures += 1;
                }
            }
        }
    }
    verdict(
        failures == 0,
        format!("{points} grid points, {failures} above bound + 3 SE (largest frequency − bound {worst:.4})"),
    )
}

fn criterion_11() -> Verdict {
    let mut configs = vec![
        RunConfig::new(Algorithm::Split, InputSpec::DRegular { n: 2000, degree: 16 }, 42),
        RunConfig::new(Algorithm::Qdivide, InputSpec::DRegular { n: 2000, degree: 32 }, 42),
        RunConfig::new(Algorithm::EdgeColor, InputSpec::DRegular { n: 1000, degree: 20 }, 42),
        RunConfig::new(Algorithm::ListColor, InputSpec::Lists { n: 500, l: 40, t: 20 }, 42),
        RunConfig::new(Algorithm::Defective, InputSpec::Gnp { n: 1000, degree: 24 }, 42),
    ];
    let mut congest = RunConfig::new(Algorithm::Split, InputSpec::DRegular { n: 1000, degree: 16 }, 7);
    congest.model = Model::Congest;
    configs.push(congest);
    let mut identical = 0;
    for c in &configs {
        let a = execute(c).map(|o| o.artifact_json());
        let b = execute(c).map(|o| o.artifact_json());
        if let (Ok(a), Ok(b)) = (a, b) {
            if a == b {
                identical += 1;
            }
        }
    }
    verdict(
        identical == configs.len(),
        format!("{identical}/{} configurations byte-identical across reruns", configs.len()),
    )
}

fn criterion_12() -> Verdict {
    let seeds: Vec<u64> = (0..10).collect();
    let results = par_map(&seeds, |&seed| {
        let g = gnp_capped(200, 16, graph_seed(12, seed)).unwrap();
        assert!(g.max_degree() <= 16);
        let inst: BipartiteGraph = to_bipartite_split_instance(&g);
        let out = k_split_graph(&g, &SplitParams::new(2, 0.5), SimMode::local(), seed).unwrap();
        // The algorithm's output plus two arbitrary assignments, one of them poor.
        let candidates = [out.parts, (0..200).map(|v| v % 2).collect(), vec![0; 200]];
        candidates.iter().all(|parts| {
            let bip = check_split(&inst, parts, 2, &Budget::Uniform(split_budget(0.5, inst.max_left_degree(), 2)));
            let plain = check_split_graph(&g, parts, 2, 0.5);
            bip.pass == plain.pass && bip.violations == plain.violations && bip.summary.max == plain.summary.max
        })
    });
    let agree = results.iter().filter(|&&a| a).count();
    verdict(agree == seeds.len(), format!("checker judgments agree on {agree}/{} seeds", seeds.len()))
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes us skips the run.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let start = Instant::now();
    let runs = split_runs();
    let corpus = lll_corpus();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("splitting contract", Box::new(|| criterion_1(&runs))),
        ("one-retraction invariant", Box::new(|| criterion_2(&runs))),
        ("q-divide contract", Box::new(criterion_3)),
        ("zero-round splitting", Box::new(criterion_4)),
        ("Moser-Tardos oracle equivalence", Box::new(|| criterion_5(&corpus))),
        ("parallel-instance winner", Box::new(|| criterion_6(&corpus))),
        ("edge coloring", Box::new(criterion_7)),
        ("list coloring", Box::new(criterion_8)),
        ("nibble factor bounds", Box::new(criterion_9)),
        ("Chernoff dominance", Box::new(criterion_10)),
        ("determinism", Box::new(criterion_11)),
        ("bipartite/plain equivalence", Box::new(criterion_12)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} [{name}] {} ({:.1}s)",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria pass in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
