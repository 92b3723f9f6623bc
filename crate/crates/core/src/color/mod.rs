//! Applications of splitting: edge coloring, list coloring, and defective
//! coloring.

mod edge;
mod list;

pub use edge::{
    edge_budget, edge_color, misra_gries, vizing_base_color, EdgeColorOptions, EdgeColorOutcome, EdgeColorStats,
};
pub use list::{
    amplify_ratio, amplify_rounds, list_color, list_sparsify, nibble_bad_nodes, rs_nibble_iteration, ListColorOptions,
    ListColorStats, NibbleState, SparsifyOptions, SparsifyOutcome, SparsifyStage,
};

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::gen::d_regular;
use crate::graph::Graph;
use crate::rng::{derive_seed, keyed_below, keyed_rng};
use crate::sim::{RunReport, SimMode};
use crate::split::{k_split_graph, SplitParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeColoring {
    pub palette: u32,
    /// `(u, v, color)` with `u < v`.
    pub colors: Vec<(u32, u32, u32)>,
}

/// An `(L, T)`-list-coloring instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ListInstance {
    graph: Graph,
    lists: Vec<Vec<u32>>,
    l: usize,
    t: usize,
}

impl ListInstance {
    /// Sorts lists, trims every list to the smallest list size, and drops
    /// edges whose endpoint lists are disjoint. `T` is the measured maximum
    /// color degree, or `declared` when that is larger.
    pub fn new(g: &Graph, lists: Vec<Vec<u32>>, declared_t: Option<usize>) -> Result<Self> {
        if lists.len() != g.n() {
            return Err(Error::InvalidParameter(format!("{} lists for {} nodes", lists.len(), g.n())));
        }
        let mut lists: Vec<Vec<u32>> = lists
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        let l = lists.iter().map(Vec::len).min().unwrap_or(0);
        if let Some(v) = lists.iter().position(Vec::is_empty) {
            return Err(Error::EmptyList { node: v as u32 });
        }
        for list in &mut lists {
            list.truncate(l);
        }
        let edges = g.edges().filter(|&(u, v)| intersects(&lists[u as usize], &lists[v as usize]));
        let graph = Graph::from_edges(g.n(), edges)?;
        let mut inst = ListInstance { graph, lists, l, t: 0 };
        let measured = (0..inst.graph.n() as u32).map(|v| inst.max_color_degree(v)).max().unwrap_or(0);
        inst.t = measured.max(declared_t.unwrap_or(0));
        Ok(inst)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn list(&self, v: u32) -> &[u32] {
        &self.lists[v as usize]
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `|{u ∈ N(v) : c ∈ L(u)}|`
    pub fn color_degree(&self, v: u32, c: u32) -> usize {
        self.graph.neighbors(v).iter().filter(|&&u| self.lists[u as usize].binary_search(&c).is_ok()).count()
    }

    pub fn max_color_degree(&self, v: u32) -> usize {
        self.lists[v as usize].iter().map(|&c| self.color_degree(v, c)).max().unwrap_or(0)
    }

    /// `lists n`, one `v: c1 c2 …` line per node, then `u v` edge lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("lists {}\n", self.graph.n());
        for (v, l) in self.lists.iter().enumerate() {
            let _ = write!(s, "{v}:");
            for c in l {
                let _ = write!(s, " {c}");
            }
            s.push('\n');
        }
        for (u, v) in self.graph.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut lists: Vec<Option<Vec<u32>>> = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line: line_no, message };
            let num = |t: &str| t.parse::<u32>().map_err(|_| perr(format!("not a non-negative integer: {t:?}")));
            let Some(n) = n else {
                let mut parts = line.split_whitespace();
                if parts.next() != Some("lists") {
                    return Err(perr("expected header `lists n`".into()));
                }
                let count = parts.next().ok_or_else(|| perr("missing node count".into()))?;
                let count = num(count)? as usize;
                n = Some(count);
                lists = vec![None; count];
                continue;
            };
            if let Some((head, rest)) = line.split_once(':') {
                let v = num(head.trim())?;
                if v as usize >= n {
                    return Err(perr(format!("node {v} outside [0, {n})")));
                }
                let colors = rest.split_whitespace().map(num).collect::<Result<Vec<u32>>>()?;
                lists[v as usize] = Some(colors);
            } else {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(perr("expected `v: colors…` or `u v`".into()));
                }
                let (u, v) = (num(parts[0])?, num(parts[1])?);
                if u as usize >= n || v as usize >= n {
                    return Err(Error::UnknownNode(u.max(v) as u64));
                }
                edges.push((u, v));
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, message: "empty input".into() })?;
        let lists = lists
            .into_iter()
            .enumerate()
            .map(|(v, l)| l.ok_or(Error::Parse { line: 0, message: format!("node {v} has no list") }))
            .collect::<Result<Vec<_>>>()?;
        let mut edges: Vec<(u32, u32)> = edges.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        edges.sort_unstable();
        edges.dedup();
        ListInstance::new(&Graph::from_edges(n, edges)?, lists, None)
    }
}

fn intersects(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ListGenSpec {
    pub n: usize,
    pub degree: usize,
    pub palette: u32,
    pub l: usize,
    pub t: usize,
    pub seed: u64,
}

impl ListGenSpec {
    /// d-regular base graph of degree 40 with lists of size `l` from a
    /// palette of `4l` colors.
    pub fn new(n: usize, l: usize, t: usize, seed: u64) -> Self {
        ListGenSpec { n, degree: 40, palette: 4 * l as u32, l, t, seed }
    }
}

/// Random lists on a random regular graph; edges are admitted in random order
/// only while no color degree exceeds `t`.
pub fn synthetic_list_instance(spec: &ListGenSpec) -> Result<ListInstance> {
    if spec.l == 0 || spec.l > spec.palette as usize {
        return Err(Error::InvalidParameter(format!("list size {} with palette {}", spec.l, spec.palette)));
    }
    let base = d_regular(spec.n, spec.degree, derive_seed(spec.seed, "list-graph"))?;
    let ls = derive_seed(spec.seed, "lists");
    let lists: Vec<Vec<u32>> = (0..spec.n)
        .map(|v| {
            let mut rng = keyed_rng(ls, v as u64, 0);
            let mut l = rand::seq::index::sample(&mut rng, spec.palette as usize, spec.l)
                .into_iter()
                .map(|c| c as u32)
                .collect::<Vec<u32>>();
            l.sort_unstable();
            l
        })
        .collect();
    let mut edges: Vec<(u32, u32)> = base.edges().collect();
    let es = derive_seed(spec.seed, "edge-order");
    let mut keyed: Vec<(u64, (u32, u32))> =
        edges.drain(..).enumerate().map(|(i, e)| (crate::rng::mix(es, i as u64, 0), e)).collect();
    keyed.sort_unstable();
    // deg[v][position of c in L(v)]
    let mut deg: Vec<Vec<u32>> = lists.iter().map(|l| vec![0; l.len()]).collect();
    let mut kept = Vec::new();
    for (_, (u, v)) in keyed {
        let (lu, lv) = (&lists[u as usize], &lists[v as usize]);
        let shared: Vec<(usize, usize)> =
            lu.iter().enumerate().filter_map(|(i, c)| lv.binary_search(c).ok().map(|j| (i, j))).collect();
        if shared.is_empty() {
            continue;
        }
        let fits = shared
            .iter()
            .all(|&(i, j)| (deg[u as usize][i] as usize) < spec.t && (deg[v as usize][j] as usize) < spec.t);
        if fits {
            for &(i, j) in &shared {
                deg[u as usize][i] += 1;
                deg[v as usize][j] += 1;
            }
            kept.push((u, v));
        }
    }
    ListInstance::new(&Graph::from_edges(spec.n, kept)?, lists, Some(spec.t))
}

/// Part index of a k-splitting as color: every node has at most
/// `d(v)/k + εΔ/k` neighbors of its own color.
pub fn defective_color(g: &Graph, k: u32, eps: f64, mode: SimMode, seed: u64) -> Result<(Vec<u32>, RunReport)> {
    let out = k_split_graph(g, &SplitParams::new(k, eps), mode, seed)?;
    Ok((out.parts, out.report))
}

/// Uniform color per node; used by tests as a baseline.
pub fn random_coloring(n: usize, colors: u32, seed: u64) -> Vec<u32> {
    (0..n as u64).map(|v| keyed_below(seed, v, 0, colors)).collect()
}
