//! Components, balls, and BFS-ball cluster decompositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, Topology};

/// Connected components of `g[subset]`, each sorted, ordered by smallest id.
pub fn connected_components<T: Topology + ?Sized>(g: &T, subset: &[u32]) -> Vec<Vec<u32>> {
    let mut inside = vec![false; g.node_count()];
    for &v in subset {
        inside[v as usize] = true;
    }
    let mut seen = vec![false; g.node_count()];
    let mut order: Vec<u32> = subset.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for &s in &order {
        if seen[s as usize] {
            continue;
        }
        seen[s as usize] = true;
        stack.push(s);
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &u in g.neighbors_of(v) {
                if inside[u as usize] && !seen[u as usize] {
                    seen[u as usize] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// All nodes within `r` hops of `v`, sorted.
pub fn ball<T: Topology + ?Sized>(g: &T, v: u32, r: u32) -> Vec<u32> {
    let dist = bfs_distances(g, &[v], r);
    (0..g.node_count() as u32).filter(|&u| dist[u as usize] != u32::MAX).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: u32,
    pub members: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    pub clusters: Vec<Cluster>,
    pub colors: Vec<u32>,
    pub q: u32,
    pub separation: u32,
    pub radius: u32,
}

/// Sparse BFS with a reusable distance table.
struct Bfs {
    dist: Vec<u32>,
    touched: Vec<u32>,
    queue: std::collections::VecDeque<u32>,
}

impl Bfs {
    fn new(n: usize) -> Self {
        Bfs { dist: vec![u32::MAX; n], touched: Vec::new(), queue: Default::default() }
    }

    /// Visits every node within `radius` of the sources; returns them.
    fn run<T: Topology + ?Sized>(&mut self, g: &T, sources: &[u32], radius: u32) -> &[u32] {
        for &v in &self.touched {
            self.dist[v as usize] = u32::MAX;
        }
        self.touched.clear();
        for &s in sources {
            if self.dist[s as usize] == u32::MAX {
                self.dist[s as usize] = 0;
                self.touched.push(s);
                self.queue.push_back(s);
            }
        }
        while let Some(v) = self.queue.pop_front() {
            let d = self.dist[v as usize];
            if d == radius {
                continue;
            }
            for &u in g.neighbors_of(v) {
                if self.dist[u as usize] == u32::MAX {
                    self.dist[u as usize] = d + 1;
                    self.touched.push(u);
                    self.queue.push_back(u);
                }
            }
        }
        &self.touched
    }
}

/// Carves balls of radius ≤ `radius` around the smallest uncovered node of
/// `nodes`, then colors the cluster graph (clusters within distance
/// `separation` are adjacent) greedily in carving order.
pub fn cluster_decompose<T: Topology + ?Sized>(
    g: &T,
    nodes: &[u32],
    separation: u32,
    q: u32,
    radius: u32,
) -> Result<ClusterDecomposition> {
    if separation == 0 || q == 0 {
        return Err(Error::InvalidParameter("separation and Q must be at least 1".into()));
    }
    let n = g.node_count();
    let mut order: Vec<u32> = nodes.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut owner = vec![u32::MAX; n];
    let mut target = vec![false; n];
    for &v in &order {
        target[v as usize] = true;
    }
    let mut bfs = Bfs::new(n);
    let mut clusters: Vec<Cluster> = Vec::new();
    for &c in &order {
        if owner[c as usize] != u32::MAX {
            continue;
        }
        let id = clusters.len() as u32;
        let mut members: Vec<u32> = bfs
            .run(g, &[c], radius)
            .iter()
            .copied()
            .filter(|&u| target[u as usize] && owner[u as usize] == u32::MAX)
            .collect();
        members.sort_unstable();
        for &u in &members {
            owner[u as usize] = id;
        }
        clusters.push(Cluster { center: c, members });
    }

    let mut colors: Vec<u32> = Vec::with_capacity(clusters.len());
    let mut needed = 0;
    for (id, cl) in clusters.iter().enumerate() {
        let mut taken: Vec<u32> = bfs
            .run(g, &cl.members, separation)
            .iter()
            .map(|&u| owner[u as usize])
            .filter(|&o| o != u32::MAX && (o as usize) < id)
            .map(|o| colors[o as usize])
            .collect();
        taken.sort_unstable();
        taken.dedup();
        let color =
            taken.iter().enumerate().find(|&(i, &c)| i as u32 != c).map_or(taken.len() as u32, |(i, _)| i as u32);
        needed = needed.max(color + 1);
        colors.push(color);
    }
    if needed > q {
        return Err(Error::ColorBudget { needed, budget: q });
    }
    Ok(ClusterDecomposition { clusters, colors, q, separation, radius })
}

impl ClusterDecomposition {
    /// Checks partition, radius, and separation by BFS.
    pub fn verify<T: Topology + ?Sized>(&self, g: &T, nodes: &[u32]) -> std::result::Result<(), String> {
        let n = g.node_count();
        let mut owner = vec![u32::MAX; n];
        for (id, cl) in self.clusters.iter().enumerate() {
            for &u in &cl.members {
                if owner[u as usize] != u32::MAX {
                    return Err(format!("node {u} in two clusters"));
                }
                owner[u as usize] = id as u32;
            }
        }
        let mut expected: Vec<u32> = nodes.to_vec();
        expected.sort_unstable();
        expected.dedup();
        let mut covered: Vec<u32> = self.clusters.iter().flat_map(|c| c.members.iter().copied()).collect();
        covered.sort_unstable();
        if covered != expected {
            return Err("clusters do not partition the node set".into());
        }
        for (id, cl) in self.clusters.iter().enumerate() {
            if self.colors[id] >= self.q {
                return Err(format!("cluster {id} has color {} ≥ Q", self.colors[id]));
            }
            let from_center = bfs_distances(g, &[cl.center], self.radius);
            if let Some(u) = cl.members.iter().find(|&&u| from_center[u as usize] == u32::MAX) {
                return Err(format!("node {u} farther than {} from center {}", self.radius, cl.center));
            }
            let near = bfs_distances(g, &cl.members, self.separation);
            for (other, oc) in self.clusters.iter().enumerate() {
                if other != id
                    && self.colors[other] == self.colors[id]
                    && oc.members.iter().any(|&u| near[u as usize] != u32::MAX)
                {
                    return Err(format!("same-color clusters {id} and {other} within distance {}", self.separation));
                }
            }
        }
        Ok(())
    }
}
