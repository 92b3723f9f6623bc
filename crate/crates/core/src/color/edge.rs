//! (1+ε)Δ edge coloring: random edge groups, a bipartite split of every
//! group's edge/vertex incidence instance, and a Δ+1 base coloring of each
//! low-degree piece with its own palette.

use serde::Serialize;

use super::EdgeColoring;
use crate::error::{Error, Result};
use crate::graph::{edge_incidence_instance, Graph};
use crate::rng::{derive_indexed, derive_seed, keyed_below};
use crate::sim::{BitLedger, RunReport, SimMode};
use crate::split::{k_split, Constants, SplitParams};

const NONE: u32 = u32::MAX;

/// Misra–Gries fan recoloring; proper with at most `Δ + 1` colors.
pub fn misra_gries(g: &Graph) -> EdgeColoring {
    let n = g.n();
    let p = g.max_degree() + 1;
    // at[v·p + c] = neighbor joined to v by an edge of color c
    let mut at = vec![NONE; n * p];
    let idx = |v: u32, c: u32| v as usize * p + c as usize;
    let free = |at: &[u32], v: u32, c: u32| at[idx(v, c)] == NONE;
    let first_free =
        |at: &[u32], v: u32| (0..p as u32).find(|&c| at[idx(v, c)] == NONE).expect("Δ+1 colors leave one free");

    for (u, v) in g.edges() {
        let mut fan = vec![v];
        let mut fan_colors = vec![NONE];
        loop {
            let last = *fan.last().unwrap();
            let next = (0..p as u32).find(|&c| {
                let w = at[idx(u, c)];
                free(&at, last, c) && w != NONE && !fan.contains(&w)
            });
            match next {
                Some(c) => {
                    fan.push(at[idx(u, c)]);
                    fan_colors.push(c);
                }
                None => break,
            }
        }
        let c = first_free(&at, u);
        let d = first_free(&at, *fan.last().unwrap());
        if c != d && !free(&at, u, d) {
            // Invert the cd-path that leaves u on a d-edge.
            let mut path = Vec::new();
            let (mut x, mut col) = (u, d);
            loop {
                let y = at[idx(x, col)];
                if y == NONE {
                    break;
                }
                path.push((x, y, col));
                x = y;
                col = if col == d { c } else { d };
            }
            for &(a, b, col) in &path {
                at[idx(a, col)] = NONE;
                at[idx(b, col)] = NONE;
            }
            for &(a, b, col) in &path {
                let other = if col == d { c } else { d };
                at[idx(a, other)] = b;
                at[idx(b, other)] = a;
            }
        }
        // The inversion may have turned the fan edge colored d into c.
        for i in 1..fan.len() {
            if fan_colors[i] == d && at[idx(u, d)] != fan[i] {
                fan_colors[i] = c;
            }
        }
        let mut w = None;
        for i in 0..fan.len() {
            if i > 0 {
                let ci = fan_colors[i];
                if at[idx(u, ci)] != fan[i] || !free(&at, fan[i - 1], ci) {
                    break;
                }
            }
            if free(&at, fan[i], d) {
                w = Some(i);
                break;
            }
        }
        let w = w.expect("a fan prefix ends in a vertex missing d");
        for i in 1..=w {
            let ci = fan_colors[i];
            at[idx(u, ci)] = NONE;
            at[idx(fan[i], ci)] = NONE;
        }
        for i in 0..w {
            let ci = fan_colors[i + 1];
            at[idx(u, ci)] = fan[i];
            at[idx(fan[i], ci)] = u;
        }
        at[idx(u, d)] = fan[w];
        at[idx(fan[w], d)] = u;
    }

    let mut colors = Vec::with_capacity(g.m());
    for v in 0..n as u32 {
        for c in 0..p as u32 {
            let w = at[idx(v, c)];
            if w != NONE && v < w {
                colors.push((v, w, c));
            }
        }
    }
    colors.sort_unstable();
    let palette = colors.iter().map(|&(_, _, c)| c + 1).max().unwrap_or(0);
    EdgeColoring { palette, colors }
}

/// Base-case colorer for the low-degree pieces.
pub fn vizing_base_color(g: &Graph) -> EdgeColoring {
    misra_gries(g)
}

/// `(1+ε)Δ`, raised to `Δ+1` when `Δ < 6/ε` so that the base colorer
/// alone is always within budget.
pub fn edge_budget(delta: usize, eps: f64) -> f64 {
    let d = delta as f64;
    let b = (1.0 + eps) * d;
    if delta > 0 && d < 6.0 / eps {
        b.max(d + 1.0)
    } else {
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeColorOptions {
    /// Smallest degree worth splitting further; never below `⌈6/ε⌉`.
    pub delta0: usize,
    pub constants: Constants,
    /// Forces the second-level split factor.
    pub k2_override: Option<u32>,
    /// Forces the first-level group count.
    pub k1_override: Option<u32>,
}

impl Default for EdgeColorOptions {
    fn default() -> Self {
        EdgeColorOptions { delta0: 16, constants: Constants::permissive(), k2_override: None, k1_override: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeColorStats {
    pub eps: f64,
    pub delta: usize,
    pub k1: u32,
    /// Largest degree among the first-level groups.
    pub delta1: usize,
    pub delta1_bound: f64,
    pub k2: u32,
    /// Largest degree among the final pieces.
    pub delta2: usize,
    pub delta2_bound: f64,
    pub palette: u32,
    /// `k·k′·(1+ε/6)·Δ″`
    pub chain_lhs: f64,
    /// `(1+ε)Δ`
    pub chain_rhs: f64,
    /// `Σ (Δ(G_ij) + 1)` over the pieces; the base colorer stays below it.
    pub base_palette_bound: u64,
}

impl EdgeColorStats {
    pub fn chain_holds(&self) -> bool {
        self.chain_lhs <= self.chain_rhs + 1e-9
    }
}

#[derive(Debug, Clone)]
pub struct EdgeColorOutcome {
    pub coloring: EdgeColoring,
    pub stats: EdgeColorStats,
    pub report: RunReport,
}

fn subgraph(n: usize, edges: &[(u32, u32)], keep: impl Fn(usize) -> bool) -> Result<Graph> {
    Graph::from_edges(n, edges.iter().enumerate().filter(|&(i, _)| keep(i)).map(|(_, &e)| e))
}

pub fn edge_color(g: &Graph, eps: f64, mode: SimMode, seed: u64, opts: &EdgeColorOptions) -> Result<EdgeColorOutcome> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("ε = {eps} outside (0, 1]")));
    }
    let n = g.n();
    let delta = g.max_degree();
    let eps1 = eps / 6.0;
    let ln_n = (n.max(2) as f64).ln();
    let edges: Vec<(u32, u32)> = g.edges().collect();

    let k1 = match opts.k1_override {
        Some(k) => k.max(1),
        None if delta as f64 > ln_n.powi(3) => ((eps1 * eps1 * delta as f64 / (9.0 * ln_n)).floor() as u32).max(1),
        None => 1,
    };
    let groups: Vec<Graph> = if k1 == 1 {
        vec![g.clone()]
    } else {
        let s = derive_seed(seed, "edge-groups");
        let group: Vec<u32> = (0..edges.len() as u64).map(|i| keyed_below(s, i, 0, k1)).collect();
        (0..k1).map(|j| subgraph(n, &edges, |i| group[i] == j)).collect::<Result<_>>()?
    };
    let delta1 = groups.iter().map(Graph::max_degree).max().unwrap_or(0);
    let delta1_bound = (1.0 + eps1) * delta as f64 / k1 as f64;

    let d1 = delta1 as f64;
    let k2 = match opts.k2_override {
        Some(k) => k.max(1),
        None if delta1 >= 2 => {
            let delta0 = opts.delta0.max((6.0 / eps).ceil() as usize);
            let by_degree = d1 / delta0 as f64;
            let by_constant = opts.constants.admissibility * eps1.powi(4) * d1 / d1.ln();
            (by_degree.min(by_constant).floor() as u32).max(1)
        }
        None => 1,
    };
    let delta2_bound = (1.0 + eps1) * d1 / k2 as f64;

    let mut ledger = BitLedger::new(mode);
    let mut pieces: Vec<Graph> = Vec::new();
    for (gi, group) in groups.iter().enumerate() {
        if k2 == 1 {
            pieces.push(group.clone());
            continue;
        }
        let inst = edge_incidence_instance(group);
        let mut params = SplitParams::new(k2, eps1);
        params.constants = opts.constants;
        // Every group is held to the common bound ε′Δ′/k′.
        params.budgets = Some(vec![eps1 * d1 / k2 as f64; inst.n_left()]);
        let out = k_split(&inst, &params, mode, derive_indexed(derive_seed(seed, "edge-split"), gi as u64))?;
        let ledger_part = BitLedger {
            mode,
            rounds: out.report.rounds,
            bits_total: out.report.bits_total,
            bits_max_edge_round: out.report.bits_max_edge_round,
            violations: out.report.violations,
        };
        ledger.alongside(&ledger_part);
        let group_edges: Vec<(u32, u32)> = group.edges().collect();
        for j in 0..k2 {
            pieces.push(subgraph(n, &group_edges, |i| out.parts[i] == j)?);
        }
    }
    let delta2 = pieces.iter().map(Graph::max_degree).max().unwrap_or(0);
    if k2 > 1 && delta2 as f64 > delta2_bound + 1e-9 {
        return Err(Error::BaseDegree { measured: delta2, bound: delta2_bound });
    }

    let mut colors = Vec::with_capacity(edges.len());
    let mut offset = 0u32;
    let mut base_palette_bound = 0u64;
    for piece in &pieces {
        let c = vizing_base_color(piece);
        colors.extend(c.colors.iter().map(|&(u, v, col)| (u, v, col + offset)));
        offset += c.palette;
        if piece.m() > 0 {
            base_palette_bound += piece.max_degree() as u64 + 1;
        }
    }
    colors.sort_unstable();
    let palette = colors.iter().map(|&(_, _, c)| c + 1).max().unwrap_or(0);
    let stats = EdgeColorStats {
        eps,
        delta,
        k1,
        delta1,
        delta1_bound,
        k2,
        delta2,
        delta2_bound,
        palette,
        chain_lhs: k1 as f64 * k2 as f64 * (1.0 + eps1) * delta2 as f64,
        chain_rhs: (1.0 + eps) * delta as f64,
        base_palette_bound,
    };
    let report = ledger.report(seed, serde_json::to_value(&stats)?);
    Ok(EdgeColorOutcome { coloring: EdgeColoring { palette, colors }, stats, report })
}
