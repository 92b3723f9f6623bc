//! Independent checkers. Each recomputes counts from raw adjacency and never
//! looks at algorithm traces or caches.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::color::{EdgeColoring, ListInstance};
use crate::divide::Schedule;
use crate::graph::{BipartiteGraph, Graph, Topology};
use crate::sim::connected_components;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    pub id: u64,
    pub detail: String,
    pub measured: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub count: u64,
    pub max: f64,
    pub mean: f64,
    /// `(floor(value), occurrences)`
    pub histogram: Vec<(i64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub pass: bool,
    pub violations: u64,
    /// Largest `measured − bound`, whether or not it violates.
    pub worst: Option<Offender>,
    pub summary: Summary,
}

/// Accumulates measured values against bounds.
struct Tally {
    violations: u64,
    worst: Option<Offender>,
    sum: f64,
    count: u64,
    max: f64,
    hist: BTreeMap<i64, u64>,
    structural: Option<Offender>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            violations: 0,
            worst: None,
            sum: 0.0,
            count: 0,
            max: f64::NEG_INFINITY,
            hist: BTreeMap::new(),
            structural: None,
        }
    }

    fn record(&mut self, id: u64, measured: f64, bound: f64, violated: bool, detail: impl FnOnce() -> String) {
        self.count += 1;
        self.sum += measured;
        self.max = self.max.max(measured);
        *self.hist.entry(measured.floor() as i64).or_default() += 1;
        if violated {
            self.violations += 1;
        }
        let excess = measured - bound;
        let worse = match &self.worst {
            None => true,
            Some(w) => excess > w.measured - w.bound,
        };
        if worse {
            self.worst = Some(Offender { id, detail: detail(), measured, bound });
        }
    }

    /// A malformed artifact fails outright.
    fn structural(&mut self, id: u64, detail: String) {
        self.violations += 1;
        if self.structural.is_none() {
            self.structural = Some(Offender { id, detail, measured: f64::NAN, bound: f64::NAN });
        }
    }

    fn finish(self) -> CheckReport {
        let summary = Summary {
            count: self.count,
            max: if self.count == 0 { 0.0 } else { self.max },
            mean: if self.count == 0 { 0.0 } else { self.sum / self.count as f64 },
            histogram: self.hist.into_iter().collect(),
        };
        CheckReport {
            pass: self.violations == 0,
            violations: self.violations,
            worst: self.structural.or(self.worst),
            summary,
        }
    }
}

/// Every event node has at most `z(v)` neighbors in every slot.
pub fn check_divide(inst: &BipartiteGraph, schedule: &Schedule, thresholds: &[f64]) -> CheckReport {
    let mut t = Tally::new();
    if schedule.slots.len() != inst.n_right() {
        t.structural(0, format!("{} slots for {} variable nodes", schedule.slots.len(), inst.n_right()));
        return t.finish();
    }
    if let Some(x) = schedule.slots.iter().position(|&s| s >= schedule.q) {
        t.structural(x as u64, format!("slot {} outside [0, {})", schedule.slots[x], schedule.q));
        return t.finish();
    }
    let mut counts = vec![0u32; schedule.q as usize];
    for v in 0..inst.n_left() as u32 {
        counts.iter_mut().for_each(|c| *c = 0);
        for &x in inst.left_neighbors(v) {
            counts[schedule.slots[x as usize] as usize] += 1;
        }
        let (b, &c) = counts.iter().enumerate().max_by_key(|&(_, c)| *c).unwrap_or((0, &0));
        let z = thresholds[v as usize];
        t.record(v as u64, c as f64, z, c as f64 > z, || format!("event {v}: {c} neighbors in slot {b}"));
    }
    t.finish()
}

/// Per-event discrepancy budgets.
#[derive(Debug, Clone, PartialEq)]
pub enum Budget {
    Uniform(f64),
    PerEvent(Vec<f64>),
}

impl Budget {
    pub fn get(&self, v: u32) -> f64 {
        match self {
            Budget::Uniform(b) => *b,
            Budget::PerEvent(bs) => bs[v as usize],
        }
    }
}

/// `ε·Δ_L/k`
pub fn split_budget(eps: f64, delta_l: usize, k: u32) -> f64 {
    eps * delta_l as f64 / k as f64
}

fn split_tally<F>(n_events: usize, neighbors: F, parts: &[u32], k: u32, budget: &Budget) -> CheckReport
where
    F: Fn(u32) -> Vec<u32>,
{
    let mut t = Tally::new();
    if let Some(x) = parts.iter().position(|&p| p >= k) {
        t.structural(x as u64, format!("part {} outside [0, {k})", parts[x]));
        return t.finish();
    }
    let kf = k as f64;
    let mut counts = vec![0u32; k as usize];
    for v in 0..n_events as u32 {
        counts.iter_mut().for_each(|c| *c = 0);
        let nb = neighbors(v);
        for &x in &nb {
            counts[parts[x as usize] as usize] += 1;
        }
        let d = nb.len() as f64;
        let (i, dev_k) = counts.iter().map(|&c| (c as f64 * kf - d).abs()).enumerate().fold((0, 0.0), |acc, (i, x)| {
            if x > acc.1 {
                (i, x)
            } else {
                acc
            }
        });
        let bound = budget.get(v);
        t.record(v as u64, dev_k / kf, bound, dev_k > bound * kf, || {
            format!("event {v}: {} of {} neighbors in part {i}", counts[i], nb.len())
        });
    }
    t.finish()
}

/// Every event node `v` and part `i`: `| |N(v) ∩ V_i| − d(v)/k | ≤ budget(v)`.
pub fn check_split(inst: &BipartiteGraph, parts: &[u32], k: u32, budget: &Budget) -> CheckReport {
    if parts.len() != inst.n_right() {
        let mut t = Tally::new();
        t.structural(0, format!("{} parts for {} variable nodes", parts.len(), inst.n_right()));
        return t.finish();
    }
    split_tally(inst.n_left(), |v| inst.left_neighbors(v).to_vec(), parts, k, budget)
}

/// The plain-graph contract with budget `ε·Δ/k`.
pub fn check_split_graph(g: &Graph, parts: &[u32], k: u32, eps: f64) -> CheckReport {
    if parts.len() != g.n() {
        let mut t = Tally::new();
        t.structural(0, format!("{} parts for {} nodes", parts.len(), g.n()));
        return t.finish();
    }
    let delta = (0..g.n() as u32).map(|v| g.neighbors(v).len()).max().unwrap_or(0);
    split_tally(g.n(), |v| g.neighbors(v).to_vec(), parts, k, &Budget::Uniform(split_budget(eps, delta, k)))
}

/// Each node has at most `bound` neighbors of its own color.
pub fn check_defective(g: &Graph, colors: &[u32], bound: f64) -> CheckReport {
    let mut t = Tally::new();
    if colors.len() != g.n() {
        t.structural(0, "coloring length differs from node count".into());
        return t.finish();
    }
    for v in 0..g.n() as u32 {
        let same = g.neighbors(v).iter().filter(|&&u| colors[u as usize] == colors[v as usize]).count();
        t.record(v as u64, same as f64, bound, same as f64 > bound, || {
            format!("node {v}: {same} same-colored neighbors")
        });
    }
    t.finish()
}

/// Properness plus `palette ≤ budget`, where palette is the largest color + 1.
pub fn check_edge_coloring(g: &Graph, coloring: &EdgeColoring, budget: f64) -> CheckReport {
    let mut t = Tally::new();
    let mut expected: Vec<(u32, u32)> = g.edges().collect();
    let mut given: Vec<(u32, u32)> = coloring.colors.iter().map(|&(u, v, _)| (u.min(v), u.max(v))).collect();
    expected.sort_unstable();
    given.sort_unstable();
    if expected != given {
        t.structural(0, format!("coloring covers {} edges, graph has {}", given.len(), expected.len()));
        return t.finish();
    }
    let mut at: Vec<Vec<u32>> = vec![Vec::new(); g.n()];
    let mut max_color = None;
    for &(u, v, c) in &coloring.colors {
        at[u as usize].push(c);
        at[v as usize].push(c);
        max_color = max_color.max(Some(c));
    }
    for (v, cs) in at.iter_mut().enumerate() {
        cs.sort_unstable();
        let clashes = cs.windows(2).filter(|w| w[0] == w[1]).count();
        t.record(v as u64, clashes as f64, 0.0, clashes > 0, || format!("node {v}: {clashes} repeated colors"));
    }
    let palette = max_color.map_or(0, |c| c as u64 + 1);
    if palette as f64 > budget {
        t.structural(u64::MAX, format!("palette {palette} exceeds budget {budget:.3}"));
    }
    if palette != coloring.palette as u64 {
        t.structural(u64::MAX, format!("declared palette {} but {} used", coloring.palette, palette));
    }
    t.finish()
}

/// Colors come from the instance lists and no edge is monochromatic.
pub fn check_list_coloring(inst: &ListInstance, coloring: &[u32]) -> CheckReport {
    let mut t = Tally::new();
    let g = inst.graph();
    if coloring.len() != g.n() {
        t.structural(0, "coloring length differs from node count".into());
        return t.finish();
    }
    for v in 0..g.n() as u32 {
        let c = coloring[v as usize];
        if inst.list(v).binary_search(&c).is_err() {
            t.structural(v as u64, format!("node {v} colored {c}, not in its list"));
        }
        let clashes = g.neighbors(v).iter().filter(|&&u| coloring[u as usize] == c).count();
        t.record(v as u64, clashes as f64, 0.0, clashes > 0, || {
            format!("node {v}: {clashes} neighbors share color {c}")
        });
    }
    t.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsifyCheck {
    pub pass: bool,
    /// `|L′(v) − L/k| ≤ εL/k`
    pub lists: CheckReport,
    /// `T′(v, c) ≤ T/k + εT/k` for `c ∈ L′(v)`
    pub degrees: CheckReport,
    pub new_l: usize,
    pub new_t: usize,
}

pub fn check_sparsification(inst: &ListInstance, new_lists: &[Vec<u32>], k: u32, eps: f64) -> SparsifyCheck {
    let g = inst.graph();
    let (l, tt, kf) = (inst.l() as f64, inst.t() as f64, k as f64);
    let mut lists = Tally::new();
    let mut degrees = Tally::new();
    let mut new_l = usize::MAX;
    let mut new_t = 0;
    for v in 0..g.n() as u32 {
        let new = &new_lists[v as usize];
        if !new.iter().all(|c| inst.list(v).binary_search(c).is_ok()) {
            lists.structural(v as u64, format!("node {v}: new list is not a subset"));
        }
        new_l = new_l.min(new.len());
        let size = new.len() as f64;
        let dev = (size * kf - l).abs();
        lists.record(v as u64, dev / kf, eps * l / kf, dev > eps * l, || format!("node {v}: |L′| = {}", new.len()));
        for &c in new {
            let deg = g.neighbors(v).iter().filter(|&&u| new_lists[u as usize].binary_search(&c).is_ok()).count();
            new_t = new_t.max(deg);
            let bound = (1.0 + eps) * tt / kf;
            degrees.record(v as u64, deg as f64, bound, deg as f64 > bound, || {
                format!("node {v}, color {c}: degree {deg}")
            });
        }
    }
    let (lists, degrees) = (lists.finish(), degrees.finish());
    SparsifyCheck {
        pass: lists.pass && degrees.pass,
        lists,
        degrees,
        new_l: if new_l == usize::MAX { 0 } else { new_l },
        new_t,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SlotComponents {
    pub sizes: Vec<usize>,
    pub max: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComponentStats {
    pub per_slot: Vec<SlotComponents>,
    pub max: usize,
    /// Sizes of all components, `(size, occurrences)`.
    pub histogram: Vec<(usize, u64)>,
}

/// Component sizes of `g[Bad_j ∪ N(Bad_j)]` for every `j`.
pub fn component_stats<T: Topology + ?Sized>(g: &T, bad: &[Vec<u32>]) -> ComponentStats {
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut per_slot = Vec::with_capacity(bad.len());
    let mut in_set = vec![false; g.node_count()];
    for set in bad {
        let mut nodes = Vec::new();
        for &v in set {
            for u in std::iter::once(v).chain(g.neighbors_of(v).iter().copied()) {
                if !in_set[u as usize] {
                    in_set[u as usize] = true;
                    nodes.push(u);
                }
            }
        }
        for &u in &nodes {
            in_set[u as usize] = false;
        }
        let mut sizes: Vec<usize> = connected_components(g, &nodes).iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        for &s in &sizes {
            *hist.entry(s).or_default() += 1;
        }
        per_slot.push(SlotComponents { max: sizes.first().copied().unwrap_or(0), sizes });
    }
    ComponentStats {
        max: per_slot.iter().map(|s| s.max).max().unwrap_or(0),
        per_slot,
        histogram: hist.into_iter().collect(),
    }
}

/// `2·exp(−z²k/(3N))`
pub fn chernoff_bound(n: u64, k: u32, z: f64) -> f64 {
    if z == 0.0 || n == 0 {
        return 2.0;
    }
    2.0 * (-(z * z) * k as f64 / (3.0 * n as f64)).exp()
}
