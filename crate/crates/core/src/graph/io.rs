//! Text formats.
//!
//! Edge lists hold one `u v` pair per line; `#` starts a comment. A
//! `# nodes N` line fixes the node count and disables id compaction, which is
//! how isolated nodes survive a round trip. Bipartite files start with
//! `bipartite <nL> <nR>` and use left ids in `[0, nL)` and right ids in
//! `[nL, nL+nR)`.

use std::fmt::Write as _;

use super::{BipartiteGraph, Graph};
use crate::error::{Error, Result};

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Strips comments; returns the `# nodes N` value if this line carries one.
fn split_line(raw: &str, lineno: usize) -> Result<(Option<u64>, &str)> {
    match raw.find('#') {
        Some(pos) => {
            let comment = raw[pos + 1..].trim();
            let mut directive = None;
            if let Some(rest) = comment.strip_prefix("nodes") {
                let n = rest
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| parse_error(lineno, format!("bad node directive {comment:?}")))?;
                directive = Some(n);
            }
            Ok((directive, &raw[..pos]))
        }
        None => Ok((None, raw)),
    }
}

fn parse_pair(body: &str, lineno: usize) -> Result<Option<(u64, u64)>> {
    let mut it = body.split_whitespace();
    let Some(a) = it.next() else { return Ok(None) };
    let b = it.next().ok_or_else(|| parse_error(lineno, "expected two node ids"))?;
    if it.next().is_some() {
        return Err(parse_error(lineno, "trailing tokens after edge"));
    }
    let id = |s: &str| s.parse::<u64>().map_err(|_| parse_error(lineno, format!("bad node id {s:?}")));
    Ok(Some((id(a)?, id(b)?)))
}

pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut declared = None;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let (directive, body) = split_line(raw, lineno)?;
        if directive.is_some() {
            declared = directive;
        }
        if let Some((u, v)) = parse_pair(body, lineno)? {
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            pairs.push((lineno, u, v));
        }
    }
    match declared {
        Some(n) => {
            let mut edges = Vec::with_capacity(pairs.len());
            for (lineno, u, v) in pairs {
                if u >= n || v >= n {
                    return Err(parse_error(lineno, format!("id out of range for {n} nodes")));
                }
                edges.push((u as u32, v as u32));
            }
            Graph::from_edges(n as usize, edges)
        }
        None => {
            let mut ids: Vec<u64> = pairs.iter().flat_map(|&(_, u, v)| [u, v]).collect();
            ids.sort_unstable();
            ids.dedup();
            let index = |x: u64| ids.binary_search(&x).unwrap() as u32;
            let edges: Vec<_> = pairs.iter().map(|&(_, u, v)| (index(u), index(v))).collect();
            Graph::from_edges(ids.len(), edges)
        }
    }
}

/// Inverse of [`load_edge_list`]. The node directive is written only when an
/// isolated node would otherwise be lost.
pub fn to_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    if (0..g.n() as u32).any(|v| g.degree(v) == 0) {
        writeln!(out, "# nodes {}", g.n()).unwrap();
    }
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    out
}

pub fn load_bipartite(text: &str) -> Result<BipartiteGraph> {
    let mut header: Option<(u64, u64)> = None;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let (_, body) = split_line(raw, lineno)?;
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if header.is_none() {
            let mut it = body.split_whitespace();
            if it.next() != Some("bipartite") {
                return Err(parse_error(lineno, "expected header `bipartite <nL> <nR>`"));
            }
            let mut num = || {
                it.next().and_then(|s| s.parse::<u64>().ok()).ok_or_else(|| parse_error(lineno, "bad bipartite header"))
            };
            header = Some((num()?, num()?));
            continue;
        }
        let (nl, nr) = header.unwrap();
        let (a, b) = parse_pair(body, lineno)?.unwrap();
        let (l, r) = if a < nl { (a, b) } else { (b, a) };
        if l >= nl || r < nl || r >= nl + nr {
            return Err(parse_error(lineno, "edge must join a left id and a right id"));
        }
        edges.push((l as u32, (r - nl) as u32));
    }
    let (nl, nr) = header.unwrap_or((0, 0));
    BipartiteGraph::from_edges(nl as usize, nr as usize, edges)
}

pub fn to_bipartite_text(b: &BipartiteGraph) -> String {
    let mut out = format!("bipartite {} {}\n", b.n_left(), b.n_right());
    let nl = b.n_left();
    for l in 0..nl as u32 {
        for &r in b.left_neighbors(l) {
            writeln!(out, "{l} {}", r as usize + nl).unwrap();
        }
    }
    out
}
