//! (L, T)-list coloring: sparsify the lists by bipartite splitting, amplify
//! the ratio L/T with the Reed–Sudakov nibble, then finish with
//! Moser-Tardos on Reed's edge/color events.

use log::warn;
use serde::Serialize;

use super::ListInstance;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, Graph};
use crate::lll::{moser_tardos_run, Event, LllInstance, MtOptions, Predicate};
use crate::rng::{derive_indexed, derive_seed, keyed_below, keyed_unit};
use crate::sim::{BitLedger, RunReport, SimMode};
use crate::split::{k_split, Constants, SplitParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyOptions {
    pub k: u32,
    pub eps: f64,
    pub constants: Constants,
    pub mode: SimMode,
    /// Lists longer than this are sampled independently; default `(ln n)³`.
    pub zero_round_above: Option<f64>,
}

impl SparsifyOptions {
    pub fn new(k: u32, eps: f64) -> Self {
        SparsifyOptions { k, eps, constants: Constants::permissive(), mode: SimMode::local(), zero_round_above: None }
    }
}

#[derive(Debug, Clone)]
pub struct SparsifyOutcome {
    /// `L′(v)` before trimming.
    pub new_lists: Vec<Vec<u32>>,
    pub instance: ListInstance,
    pub zero_round: bool,
    pub report: RunReport,
}

/// Splitting instance: variable `v_c` for every node `v` and `c ∈ L(v)`;
/// event `B_v` over all `v_c`, and event `B_{v,c}` over the `u_c` with
/// `u ∈ N(v)`. Returns the instance and per-event budgets.
fn sparsify_instance(inst: &ListInstance, k: u32, eps: f64) -> Result<(BipartiteGraph, Vec<f64>)> {
    let g = inst.graph();
    let n = g.n();
    let mut offset = vec![0usize; n + 1];
    for v in 0..n {
        offset[v + 1] = offset[v] + inst.list(v as u32).len();
    }
    let vars = offset[n];
    let mut edges = Vec::new();
    for v in 0..n as u32 {
        for i in 0..inst.list(v).len() {
            edges.push((v, (offset[v as usize] + i) as u32));
        }
    }
    for v in 0..n as u32 {
        for (i, c) in inst.list(v).iter().enumerate() {
            let event = (n + offset[v as usize] + i) as u32;
            for &u in g.neighbors(v) {
                if let Ok(j) = inst.list(u).binary_search(c) {
                    edges.push((event, (offset[u as usize] + j) as u32));
                }
            }
        }
    }
    let b = BipartiteGraph::from_edges(n + vars, vars, edges)?;
    let kf = k as f64;
    let mut budgets = vec![eps * inst.l() as f64 / kf; n];
    budgets.resize(n + vars, eps * inst.t() as f64 / kf);
    Ok((b, budgets))
}

/// Keeps part 0 of a k-split of the list instance's splitting instance.
pub fn list_sparsify(inst: &ListInstance, opts: &SparsifyOptions, seed: u64) -> Result<SparsifyOutcome> {
    let n = inst.graph().n();
    if opts.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if opts.k == 1 {
        return Ok(SparsifyOutcome {
            new_lists: inst.lists().to_vec(),
            instance: inst.clone(),
            zero_round: false,
            report: RunReport::empty(seed),
        });
    }
    if inst.t() >= inst.l() {
        warn!("sparsifying with T = {} ≥ L = {}", inst.t(), inst.l());
    }
    let threshold = opts.zero_round_above.unwrap_or_else(|| (n.max(2) as f64).ln().powi(3));
    let zero_round = inst.l() as f64 > threshold;
    let (new_lists, report) = if zero_round {
        let s = derive_seed(seed, "sparsify-zero-round");
        let mut next = 0u64;
        let lists = inst
            .lists()
            .iter()
            .map(|l| {
                l.iter()
                    .copied()
                    .filter(|_| {
                        next += 1;
                        keyed_below(s, next, 0, opts.k) == 0
                    })
                    .collect()
            })
            .collect();
        (lists, RunReport::empty(seed))
    } else {
        let (b, budgets) = sparsify_instance(inst, opts.k, opts.eps)?;
        let mut params = SplitParams::new(opts.k, opts.eps);
        params.constants = opts.constants;
        params.budgets = Some(budgets);
        let out = k_split(&b, &params, opts.mode, derive_seed(seed, "sparsify-split"))?;
        let mut lists = Vec::with_capacity(n);
        let mut x = 0;
        for v in 0..n as u32 {
            let kept: Vec<u32> =
                inst.list(v).iter().enumerate().filter(|&(i, _)| out.parts[x + i] == 0).map(|(_, &c)| c).collect();
            x += inst.list(v).len();
            lists.push(kept);
        }
        (lists, out.report)
    };
    if let Some(v) = new_lists.iter().position(|l: &Vec<u32>| l.is_empty()) {
        return Err(Error::EmptyList { node: v as u32 });
    }
    let instance = ListInstance::new(inst.graph(), new_lists.clone(), None)?;
    Ok(SparsifyOutcome { new_lists, instance, zero_round, report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NibbleState {
    pub iteration: u64,
    pub colors: Vec<Option<u32>>,
    pub lists: Vec<Vec<u32>>,
    /// `T_i(v)`: largest number of live neighbors sharing a color of `v`.
    pub t_node: Vec<u32>,
    pub g: f64,
    pub delta: f64,
}

impl NibbleState {
    pub fn new(inst: &ListInstance, delta: f64, g: Option<f64>) -> Self {
        let g = g.unwrap_or(inst.t() as f64);
        let lists = inst.lists().to_vec();
        let colors = vec![None; lists.len()];
        let t_node = color_degrees(inst.graph(), &lists, &colors);
        NibbleState { iteration: 0, colors, lists, t_node, g, delta }
    }

    pub fn live(&self) -> impl Iterator<Item = u32> + '_ {
        self.colors.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(v, _)| v as u32)
    }

    pub fn activation(&self) -> f64 {
        (1.0 / self.g.ln()).clamp(0.0, 1.0)
    }

    /// `1 − 1/((1+3δ/4) ln g)`, at least 0.
    pub fn list_factor(&self) -> f64 {
        (1.0 - 1.0 / ((1.0 + 0.75 * self.delta) * self.g.ln())).max(0.0)
    }

    /// `1 − 1/((1+δ/4) ln g)`, at least 0.
    pub fn degree_factor(&self) -> f64 {
        (1.0 - 1.0 / ((1.0 + 0.25 * self.delta) * self.g.ln())).max(0.0)
    }

    /// Smallest live list over largest live color degree.
    pub fn ratio(&self) -> f64 {
        let l = self.live().map(|v| self.lists[v as usize].len()).min();
        let t = self.live().map(|v| self.t_node[v as usize]).max().unwrap_or(0);
        match l {
            None => f64::INFINITY,
            Some(_) if t == 0 => f64::INFINITY,
            Some(l) => l as f64 / t as f64,
        }
    }
}

fn color_degrees(g: &Graph, lists: &[Vec<u32>], colors: &[Option<u32>]) -> Vec<u32> {
    (0..g.n())
        .map(|v| {
            if colors[v].is_some() {
                return 0;
            }
            lists[v]
                .iter()
                .map(|c| {
                    g.neighbors(v as u32)
                        .iter()
                        .filter(|&&u| colors[u as usize].is_none() && lists[u as usize].binary_search(c).is_ok())
                        .count() as u32
                })
                .max()
                .unwrap_or(0)
        })
        .collect()
}

fn nibble_pass(g: &Graph, state: &NibbleState, seed: u64) -> NibbleState {
    let n = g.n();
    let p = state.activation();
    let mut pick: Vec<Option<u32>> = vec![None; n];
    for v in state.live() {
        let l = &state.lists[v as usize];
        if !l.is_empty() && keyed_unit(seed, v as u64, 0) < p {
            pick[v as usize] = Some(l[keyed_below(seed, v as u64, 1, l.len() as u32) as usize]);
        }
    }
    let mut next = state.clone();
    next.iteration += 1;
    for v in state.live() {
        let nb = g.neighbors(v);
        if let Some(c) = pick[v as usize] {
            if nb.iter().all(|&u| pick[u as usize] != Some(c)) {
                next.colors[v as usize] = Some(c);
                next.lists[v as usize] = vec![c];
                continue;
            }
        }
        let removed: Vec<u32> = nb.iter().filter_map(|&u| pick[u as usize]).collect();
        next.lists[v as usize].retain(|c| !removed.contains(c));
    }
    next.t_node = color_degrees(g, &next.lists, &next.colors);
    next
}

/// Live nodes of `after` that violate either factor bound relative to
/// `before`, recounted from the lists.
pub fn nibble_bad_nodes(g: &Graph, before: &NibbleState, after: &NibbleState) -> Vec<u32> {
    let t_after = color_degrees(g, &after.lists, &after.colors);
    let (fl, ft) = (before.list_factor(), before.degree_factor());
    after
        .live()
        .filter(|&v| {
            let (lb, la) = (before.lists[v as usize].len() as f64, after.lists[v as usize].len() as f64);
            let (tb, ta) = (before.t_node[v as usize] as f64, t_after[v as usize] as f64);
            la < fl * lb || ta > ft * tb
        })
        .collect()
}

/// One accepted Reed–Sudakov iteration, re-run with fresh randomness until
/// no bad event holds. Returns the state and the number of attempts.
pub fn rs_nibble_iteration(g: &Graph, state: &NibbleState, seed: u64, retry_cap: u32) -> Result<(NibbleState, u32)> {
    let short: Vec<u32> = state
        .live()
        .filter(|&v| (state.lists[v as usize].len() as f64) < (1.0 + state.delta) * state.t_node[v as usize] as f64)
        .collect();
    if !short.is_empty() {
        warn!("{} live nodes have |L_i(v)| < (1+δ)T_i(v)", short.len());
    }
    let mut last = Vec::new();
    for attempt in 0..retry_cap.max(1) {
        let next = nibble_pass(g, state, derive_indexed(seed, attempt as u64));
        last = nibble_bad_nodes(g, state, &next);
        if last.is_empty() {
            return Ok((next, attempt + 1));
        }
    }
    Err(Error::NibbleRetries { attempts: retry_cap.max(1), nodes: last })
}

/// `r = ⌈(5/δ)·ln C·ln g⌉`
pub fn amplify_rounds(delta: f64, c: f64, g: f64) -> u64 {
    ((5.0 / delta) * c.ln() * g.ln() - 1e-9).ceil().max(0.0) as u64
}

/// Runs exactly `r` accepted iterations. Errors when a live list empties.
pub fn amplify_ratio(
    inst: &ListInstance,
    c: f64,
    delta: f64,
    g: Option<f64>,
    seed: u64,
    retry_cap: u32,
) -> Result<NibbleState> {
    let mut state = NibbleState::new(inst, delta, g);
    let r = amplify_rounds(delta, c, state.g);
    for i in 0..r {
        let (next, _) = rs_nibble_iteration(inst.graph(), &state, derive_indexed(seed, i), retry_cap)?;
        if let Some(v) = next.live().find(|&v| next.lists[v as usize].is_empty()) {
            return Err(Error::EmptyList { node: v });
        }
        state = next;
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ListColorOptions {
    pub delta: f64,
    /// Target ratio before the final solve.
    pub c_target: f64,
    pub sparsify_eps: f64,
    pub constants: Constants,
    pub mode: SimMode,
    pub retry_cap: u32,
    pub max_iterations: u64,
}

impl ListColorOptions {
    pub fn new(delta: f64) -> Self {
        ListColorOptions {
            delta,
            c_target: 6.0,
            sparsify_eps: 0.5,
            constants: Constants::permissive(),
            mode: SimMode::local(),
            retry_cap: 100,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsifyStage {
    pub k: u32,
    pub eps: f64,
    pub zero_round: bool,
    pub l_before: usize,
    pub t_before: usize,
    pub new_l: usize,
    pub new_t: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ListColorStats {
    pub sparsify: Vec<SparsifyStage>,
    /// Set when the shattering-based sparsification failed and the pipeline
    /// went on with the unsparsified lists.
    pub sparsify_skipped: Option<String>,
    pub amplify_planned: u64,
    pub amplify_accepted: u64,
    pub amplify_attempts: u64,
    pub ratio_before: f64,
    pub ratio_after: f64,
    pub colored_by_nibble: usize,
    pub final_nodes: usize,
    pub final_events: usize,
    pub final_iterations: u64,
}

/// Full pipeline; the returned coloring uses colors from the instance lists.
pub fn list_color(
    inst: &ListInstance,
    opts: &ListColorOptions,
    seed: u64,
) -> Result<(Vec<u32>, ListColorStats, RunReport)> {
    let g = inst.graph();
    let n = g.n();
    let mut stats = ListColorStats::default();
    let mut ledger = BitLedger::new(opts.mode);
    if (inst.l() as f64) < (1.0 + opts.delta) * inst.t() as f64 {
        warn!("L = {} < (1+δ)T = {}", inst.l(), (1.0 + opts.delta) * inst.t() as f64);
    }
    if g.m() == 0 {
        let colors = (0..n as u32).map(|v| inst.list(v)[0]).collect();
        return Ok((colors, stats, ledger.report(seed, serde_json::Value::Null)));
    }

    let ln_n = (n.max(3) as f64).ln();
    let mut current = inst.clone();
    let big = ln_n.powi(3);
    let small = ln_n.ln().powi(3).max(1.0);
    let mut stage_seeds = 0u64;
    let mut skipped = None;
    let mut sparsify = |current: &mut ListInstance, k: u32, zero: bool, ledger: &mut BitLedger| -> Result<()> {
        let mut o = SparsifyOptions::new(k, opts.sparsify_eps);
        o.constants = opts.constants;
        o.mode = opts.mode;
        o.zero_round_above = Some(if zero { 0.0 } else { f64::INFINITY });
        let out = list_sparsify(current, &o, derive_indexed(derive_seed(seed, "sparsify"), stage_seeds))?;
        stage_seeds += 1;
        ledger.then_report(&out.report);
        let new_l = out.new_lists.iter().map(Vec::len).min().unwrap_or(0);
        stats.sparsify.push(SparsifyStage {
            k,
            eps: opts.sparsify_eps,
            zero_round: out.zero_round,
            l_before: current.l(),
            t_before: current.t(),
            new_l,
            new_t: out.instance.t(),
        });
        *current = out.instance;
        Ok(())
    };
    if current.l() as f64 > big {
        let k = ((current.l() as f64 / big).floor() as u32).max(1);
        if k > 1 {
            sparsify(&mut current, k, true, &mut ledger)?;
        }
    }
    if current.l() as f64 > small && current.t() < current.l() && current.t() > 0 {
        let k = ((current.l() as f64 / small).floor() as u32).clamp(1, 2);
        if k > 1 {
            match sparsify(&mut current, k, false, &mut ledger) {
                Err(e @ Error::PostShattering { .. }) => {
                    warn!("sparsification skipped: {e}");
                    skipped = Some(e.to_string());
                }
                other => other?,
            }
        }
    }
    stats.sparsify_skipped = skipped;

    let mut state = NibbleState::new(&current, opts.delta, None);
    stats.ratio_before = state.ratio();
    if state.g > 1.0 {
        let r = amplify_rounds(opts.delta, opts.c_target, state.g);
        stats.amplify_planned = r;
        let nibble_seed = derive_seed(seed, "nibble");
        for i in 0..r {
            if state.ratio() >= opts.c_target {
                break;
            }
            match rs_nibble_iteration(current.graph(), &state, derive_indexed(nibble_seed, i), opts.retry_cap) {
                Ok((next, attempts)) => {
                    stats.amplify_attempts += attempts as u64;
                    ledger.idle_rounds(2 * attempts as u64);
                    if next.live().any(|v| next.lists[v as usize].is_empty()) {
                        break;
                    }
                    state = next;
                    stats.amplify_accepted += 1;
                }
                Err(Error::NibbleRetries { attempts, .. }) => {
                    stats.amplify_attempts += attempts as u64;
                    ledger.idle_rounds(2 * attempts as u64);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    stats.ratio_after = state.ratio();
    stats.colored_by_nibble = state.colors.iter().filter(|c| c.is_some()).count();

    let live: Vec<u32> = state.live().collect();
    let mut local = vec![u32::MAX; n];
    for (i, &v) in live.iter().enumerate() {
        local[v as usize] = i as u32;
        if state.lists[v as usize].is_empty() {
            return Err(Error::EmptyList { node: v });
        }
    }
    let cg = current.graph();
    let mut events = Vec::new();
    for &v in &live {
        for &u in cg.neighbors(v) {
            if u <= v || local[u as usize] == u32::MAX {
                continue;
            }
            let (lv, lu) = (&state.lists[v as usize], &state.lists[u as usize]);
            for (i, c) in lv.iter().enumerate() {
                if let Ok(j) = lu.binary_search(c) {
                    let e = Event::new(
                        vec![local[v as usize], local[u as usize]],
                        Predicate::Forbidden { tuples: vec![vec![i as u32, j as u32]] },
                    );
                    events.push(e.with_p(1.0 / (lv.len() * lu.len()) as f64).with_host(v));
                }
            }
        }
    }
    stats.final_nodes = live.len();
    stats.final_events = events.len();
    let domains: Vec<u32> = live.iter().map(|&v| state.lists[v as usize].len() as u32).collect();
    let lll = LllInstance::with_hosts(domains, live.clone(), events)?;
    let run = moser_tardos_run(
        &lll,
        derive_seed(seed, "reed"),
        MtOptions { max_iterations: opts.max_iterations, record_trace: false },
    );
    if !run.solved() {
        return Err(Error::IterationCap { iterations: run.iterations, violated: run.violated });
    }
    stats.final_iterations = run.iterations;
    ledger.idle_rounds(4 * run.iterations + 2);

    let mut colors: Vec<u32> = state.colors.iter().map(|c| c.unwrap_or(u32::MAX)).collect();
    for (i, &v) in live.iter().enumerate() {
        let free = lll.var_events(i as u32).is_empty();
        let l = &state.lists[v as usize];
        colors[v as usize] = if free { l[0] } else { l[run.assignment[i] as usize] };
    }
    let report = ledger.report(seed, serde_json::to_value(&stats)?);
    Ok((colors, stats, report))
}
