//! Seeded graph generators.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{derive_indexed, derive_seed, keyed_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenModel {
    GnpCapped,
    DRegular,
    EdgeListFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphGenSpec {
    pub model: GenModel,
    pub n: usize,
    pub degree: usize,
    pub seed: u64,
}

pub fn generate(spec: &GraphGenSpec) -> Result<Graph> {
    match &spec.model {
        GenModel::GnpCapped => gnp_capped(spec.n, spec.degree, spec.seed),
        GenModel::DRegular => d_regular(spec.n, spec.degree, spec.seed),
        GenModel::EdgeListFile(path) => super::io::load_edge_list(&std::fs::read_to_string(path)?),
    }
}

const REGULAR_ATTEMPTS: u64 = 1000;

/// Uniform stub pairing followed by double-edge swaps that remove self-loops
/// and parallel edges. Restarts from a fresh pairing if the repair stalls.
pub fn d_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Ok(Graph::empty(0));
    }
    if d >= n {
        return Err(Error::InvalidParameter(format!("degree {d} must be below n = {n}")));
    }
    if (n * d) % 2 == 1 {
        return Err(Error::InvalidParameter(format!("n·d = {} is odd", n * d)));
    }
    let base = derive_seed(seed, "d-regular");
    for attempt in 0..REGULAR_ATTEMPTS {
        if let Some(pairs) = try_pairing(n, d, derive_indexed(base, attempt)) {
            return Graph::from_edges(n, pairs);
        }
    }
    Err(Error::InvalidParameter(format!(
        "no simple {d}-regular graph on {n} nodes found in {REGULAR_ATTEMPTS} attempts"
    )))
}

fn norm(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn try_pairing(n: usize, d: usize, seed: u64) -> Option<Vec<(u32, u32)>> {
    let mut rng = keyed_rng(seed, 0, 0);
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    stubs.shuffle(&mut rng);
    let mut pairs: Vec<(u32, u32)> = stubs.chunks_exact(2).map(|c| norm(c[0], c[1])).collect();
    if pairs.is_empty() {
        return Some(pairs);
    }
    let mut count: HashMap<(u32, u32), u32> = HashMap::with_capacity(pairs.len());
    for &p in &pairs {
        *count.entry(p).or_default() += 1;
    }
    let bad = |p: (u32, u32), count: &HashMap<(u32, u32), u32>| p.0 == p.1 || count[&p] > 1;
    let mut pending: Vec<usize> = (0..pairs.len()).filter(|&i| bad(pairs[i], &count)).collect();
    pending.reverse();
    let mut budget = 200 * pairs.len() + 10_000;
    while let Some(i) = pending.pop() {
        if !bad(pairs[i], &count) {
            continue;
        }
        let mut fixed = false;
        while budget > 0 {
            budget -= 1;
            let j = rng.gen_range(0..pairs.len());
            if j == i {
                continue;
            }
            let ((a, b), (c, e)) = (pairs[i], pairs[j]);
            let (x, y) = if rng.gen::<bool>() { (norm(a, c), norm(b, e)) } else { (norm(a, e), norm(b, c)) };
            if x.0 == x.1 || y.0 == y.1 || x == y {
                continue;
            }
            if count.get(&x).copied().unwrap_or(0) > 0 || count.get(&y).copied().unwrap_or(0) > 0 {
                continue;
            }
            for old in [pairs[i], pairs[j]] {
                *count.get_mut(&old).unwrap() -= 1;
            }
            *count.entry(x).or_default() += 1;
            *count.entry(y).or_default() += 1;
            pairs[i] = x;
            pairs[j] = y;
            fixed = true;
            break;
        }
        if !fixed {
            return None;
        }
    }
    Some(pairs)
}

/// G(n, p) with `p = target/(n-1)`, then random edges at nodes above `target`
/// are dropped until Δ ≤ target.
pub fn gnp_capped(n: usize, target: usize, seed: u64) -> Result<Graph> {
    if n > 0 && target >= n {
        return Err(Error::InvalidParameter(format!("degree target {target} must be below n = {n}")));
    }
    if n < 2 || target == 0 {
        return Ok(Graph::empty(n));
    }
    let mut rng = keyed_rng(derive_seed(seed, "gnp-capped"), 0, 0);
    let p = target as f64 / (n - 1) as f64;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    if p >= 1.0 {
        for u in 0..n as u32 {
            for v in u + 1..n as u32 {
                adj[u as usize].push(v);
                adj[v as usize].push(u);
            }
        }
    } else {
        // Geometric skipping over the lower triangle.
        let log_q = (1.0 - p).ln();
        let (mut v, mut w): (i64, i64) = (1, -1);
        let n = n as i64;
        while v < n {
            let r: f64 = rng.gen();
            w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
            while w >= v && v < n {
                w -= v;
                v += 1;
            }
            if v < n {
                adj[v as usize].push(w as u32);
                adj[w as usize].push(v as u32);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    for v in 0..n {
        while adj[v].len() > target {
            let idx = rng.gen_range(0..adj[v].len());
            let u = adj[v].remove(idx);
            let pos = adj[u as usize].binary_search(&(v as u32)).unwrap();
            adj[u as usize].remove(pos);
        }
    }
    Ok(Graph::from_raw_adjacency(adj))
}
