//! Graphs, bipartite event/variable instances, and the structural translations
//! between them.

pub mod gen;
pub mod io;

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Anything the round simulator can run on: a node count and neighbor lists.
pub trait Topology {
    fn node_count(&self) -> usize;
    fn neighbors_of(&self, v: u32) -> &[u32];
}

/// Simple undirected graph with dense ids and sorted adjacency.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    edge_count: usize,
    max_degree: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n], edge_count: 0, max_degree: 0 }
    }

    /// Builds a graph from an edge iterator. Duplicates (in either orientation)
    /// collapse; self-loops and out-of-range ids are errors.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u == v {
                return Err(Error::SelfLoop(u as u64));
            }
            for x in [u, v] {
                if x as usize >= n {
                    return Err(Error::UnknownNode(x as u64));
                }
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        Ok(Self::from_raw_adjacency(adj))
    }

    /// Sorts and deduplicates each list. The caller guarantees symmetry.
    pub(crate) fn from_raw_adjacency(mut adj: Vec<Vec<u32>>) -> Self {
        let mut twice = 0;
        let mut max_degree = 0;
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
            max_degree = max_degree.max(list.len());
        }
        Graph { adj, edge_count: twice / 2, max_degree }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.edge_count
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            let u = u as u32;
            list.iter().copied().filter(move |&v| u < v).map(move |v| (u, v))
        })
    }

    /// Full scan of the structural invariants.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut twice = 0;
        let mut max_degree = 0;
        for (u, list) in self.adj.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {u} not strictly sorted"));
            }
            for &v in list {
                if v as usize == u {
                    return Err(format!("self-loop at {u}"));
                }
                if v as usize >= self.n() {
                    return Err(format!("neighbor {v} of {u} out of range"));
                }
                if !self.has_edge(v, u as u32) {
                    return Err(format!("edge {u}-{v} not symmetric"));
                }
            }
            twice += list.len();
            max_degree = max_degree.max(list.len());
        }
        if max_degree != self.max_degree {
            return Err(format!("cached max degree {} but true {}", self.max_degree, max_degree));
        }
        if twice != 2 * self.edge_count {
            return Err(format!("cached edge count {} but true {}", self.edge_count, twice / 2));
        }
        Ok(())
    }
}

impl Topology for Graph {
    fn node_count(&self) -> usize {
        self.n()
    }
    fn neighbors_of(&self, v: u32) -> &[u32] {
        self.neighbors(v)
    }
}

/// Where a bipartite instance came from. The splitting algorithms use this to
/// pick the metric for freeze distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Built directly as an event/variable instance.
    Native,
    /// Translation of a plain graph: left `i` and right `i` are both node `i`,
    /// so the left adjacency doubles as the adjacency of the plain graph.
    Plain,
}

/// Event nodes on the left, variable nodes on the right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    left_adj: Vec<Vec<u32>>,
    right_adj: Vec<Vec<u32>>,
    max_left: usize,
    max_right: usize,
    origin: Origin,
}

impl BipartiteGraph {
    /// `edges` are `(left, right)` pairs with local ids on each side.
    pub fn from_edges<I>(n_left: usize, n_right: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut left_adj = vec![Vec::new(); n_left];
        for (l, r) in edges {
            if l as usize >= n_left {
                return Err(Error::UnknownNode(l as u64));
            }
            if r as usize >= n_right {
                return Err(Error::UnknownNode(n_left as u64 + r as u64));
            }
            left_adj[l as usize].push(r);
        }
        Ok(Self::from_left_adjacency(left_adj, n_right, Origin::Native))
    }

    pub(crate) fn from_left_adjacency(mut left_adj: Vec<Vec<u32>>, n_right: usize, origin: Origin) -> Self {
        let mut right_adj = vec![Vec::new(); n_right];
        for (l, list) in left_adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &r in list.iter() {
                right_adj[r as usize].push(l as u32);
            }
        }
        let max_left = left_adj.iter().map(Vec::len).max().unwrap_or(0);
        let max_right = right_adj.iter().map(Vec::len).max().unwrap_or(0);
        BipartiteGraph { left_adj, right_adj, max_left, max_right, origin }
    }

    pub fn n_left(&self) -> usize {
        self.left_adj.len()
    }

    pub fn n_right(&self) -> usize {
        self.right_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.left_adj.iter().map(Vec::len).sum()
    }

    /// Δ_L, the maximum event degree.
    pub fn max_left_degree(&self) -> usize {
        self.max_left
    }

    /// Δ_R, the maximum variable degree.
    pub fn max_right_degree(&self) -> usize {
        self.max_right
    }

    pub fn left_neighbors(&self, l: u32) -> &[u32] {
        &self.left_adj[l as usize]
    }

    pub fn right_neighbors(&self, r: u32) -> &[u32] {
        &self.right_adj[r as usize]
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// Combined graph with left ids in `[0, nL)` and right ids in `[nL, nL+nR)`.
    pub fn as_graph(&self) -> Graph {
        let nl = self.n_left() as u32;
        let mut adj: Vec<Vec<u32>> = Vec::with_capacity(self.n_left() + self.n_right());
        for list in &self.left_adj {
            adj.push(list.iter().map(|&r| r + nl).collect());
        }
        for list in &self.right_adj {
            adj.push(list.clone());
        }
        Graph::from_raw_adjacency(adj)
    }

    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (l, list) in self.left_adj.iter().enumerate() {
            for &r in list {
                if r as usize >= self.n_right() {
                    return Err(format!("left {l} lists right {r} out of range"));
                }
                if self.right_adj[r as usize].binary_search(&(l as u32)).is_err() {
                    return Err(format!("edge L{l}-R{r} missing on the right side"));
                }
            }
        }
        let back: usize = self.right_adj.iter().map(Vec::len).sum();
        if back != self.edge_count() {
            return Err("side edge counts disagree".into());
        }
        let ml = self.left_adj.iter().map(Vec::len).max().unwrap_or(0);
        let mr = self.right_adj.iter().map(Vec::len).max().unwrap_or(0);
        if ml != self.max_left || mr != self.max_right {
            return Err("cached side maxima are stale".into());
        }
        Ok(())
    }
}

/// Left node `i` is adjacent to right node `j` iff `ij` is an edge of `g`.
pub fn to_bipartite_split_instance(g: &Graph) -> BipartiteGraph {
    BipartiteGraph {
        left_adj: g.adj.clone(),
        right_adj: g.adj.clone(),
        max_left: g.max_degree(),
        max_right: g.max_degree(),
        origin: Origin::Plain,
    }
}

/// Variables are the edges of `g` (in [`Graph::edges`] order), events its vertices.
pub fn edge_incidence_instance(g: &Graph) -> BipartiteGraph {
    let mut left_adj = vec![Vec::new(); g.n()];
    for (e, (u, v)) in g.edges().enumerate() {
        left_adj[u as usize].push(e as u32);
        left_adj[v as usize].push(e as u32);
    }
    BipartiteGraph::from_left_adjacency(left_adj, g.m(), Origin::Native)
}

/// Subgraph plus the original id of every new node.
#[derive(Debug, Clone)]
pub struct Induced {
    pub graph: Graph,
    pub original: Vec<u32>,
}

/// What to keep in [`induced_subgraph`].
pub enum Keep<'a> {
    Nodes(&'a [u32]),
    Edges(&'a [(u32, u32)]),
}

pub fn induced_subgraph(g: &Graph, keep: Keep<'_>) -> Result<Induced> {
    let mut original: Vec<u32> = match &keep {
        Keep::Nodes(nodes) => nodes.to_vec(),
        Keep::Edges(edges) => edges.iter().flat_map(|&(u, v)| [u, v]).collect(),
    };
    original.sort_unstable();
    original.dedup();
    if let Some(&bad) = original.iter().find(|&&v| v as usize >= g.n()) {
        return Err(Error::UnknownNode(bad as u64));
    }
    let mut index = vec![u32::MAX; g.n()];
    for (i, &v) in original.iter().enumerate() {
        index[v as usize] = i as u32;
    }
    let mut adj = vec![Vec::new(); original.len()];
    match keep {
        Keep::Nodes(_) => {
            for (i, &v) in original.iter().enumerate() {
                adj[i] = g
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| index[u as usize] != u32::MAX)
                    .map(|&u| index[u as usize])
                    .collect();
            }
        }
        Keep::Edges(edges) => {
            for &(u, v) in edges {
                if !g.has_edge(u, v) {
                    return Err(Error::InvalidParameter(format!("{u}-{v} is not an edge")));
                }
                let (a, b) = (index[u as usize], index[v as usize]);
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
    }
    Ok(Induced { graph: Graph::from_raw_adjacency(adj), original })
}

/// Multi-source BFS on a topology. Returns hop distances (`u32::MAX` when
/// unreached or beyond `radius`).
pub fn bfs_distances<T: Topology + ?Sized>(t: &T, sources: &[u32], radius: u32) -> Vec<u32> {
    let mut dist = vec![u32::MAX; t.node_count()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s as usize] != 0 {
            dist[s as usize] = 0;
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v as usize];
        if d == radius {
            continue;
        }
        for &u in t.neighbors_of(v) {
            if dist[u as usize] == u32::MAX {
                dist[u as usize] = d + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(n: u32) -> Graph {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Graph::from_edges(n as usize, edges).unwrap()
    }

    fn cycle(n: u32) -> Graph {
        Graph::from_edges(n as usize, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn dedup_and_degree_cache() {
        let g = Graph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.m(), 1);
        assert_eq!(g.max_degree(), 1);
        g.check_invariants().unwrap();
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(Graph::from_edges(3, [(2, 2)]), Err(Error::SelfLoop(2))));
    }

    #[test]
    fn triangle_translation() {
        let b = to_bipartite_split_instance(&k(3));
        assert_eq!((b.n_left(), b.n_right()), (3, 3));
        assert_eq!((b.max_left_degree(), b.max_right_degree()), (2, 2));
        assert_eq!(b.left_neighbors(0), &[1, 2]);
        b.check_invariants().unwrap();
    }

    #[test]
    fn star_translation() {
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let b = to_bipartite_split_instance(&g);
        assert_eq!(b.left_neighbors(0).len(), 3);
        for leaf in 1..4 {
            assert_eq!(b.left_neighbors(leaf), &[0]);
        }
    }

    #[test]
    fn incidence_of_small_graphs() {
        let single = edge_incidence_instance(&Graph::from_edges(2, [(0, 1)]).unwrap());
        assert_eq!((single.n_left(), single.n_right()), (2, 1));
        assert_eq!(single.right_neighbors(0), &[0, 1]);

        let tri = edge_incidence_instance(&k(3));
        assert_eq!(tri.n_right(), 3);
        assert!((0..3).all(|r| tri.right_neighbors(r).len() == 2));
        assert!((0..3).all(|l| tri.left_neighbors(l).len() == 2));

        let p3 = edge_incidence_instance(&Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap());
        assert_eq!(p3.n_right(), 2);
        assert_eq!(p3.left_neighbors(1).len(), 2);
    }

    #[test]
    fn induced_examples() {
        let sub = induced_subgraph(&k(4), Keep::Nodes(&[1, 3])).unwrap();
        assert_eq!((sub.graph.n(), sub.graph.m()), (2, 1));
        assert_eq!(sub.original, vec![1, 3]);

        let none = induced_subgraph(&k(4), Keep::Nodes(&[])).unwrap();
        assert_eq!(none.graph.n(), 0);

        let p3 = induced_subgraph(&cycle(5), Keep::Nodes(&[2, 3, 4])).unwrap();
        assert_eq!(p3.graph.m(), 2);
        assert_eq!(p3.graph.max_degree(), 2);

        assert!(induced_subgraph(&k(4), Keep::Nodes(&[9])).is_err());

        let by_edge = induced_subgraph(&cycle(5), Keep::Edges(&[(0, 1), (1, 2)])).unwrap();
        assert_eq!((by_edge.graph.n(), by_edge.graph.m()), (3, 2));
    }

    #[test]
    fn bipartite_combined_view() {
        let b = BipartiteGraph::from_edges(2, 3, [(0, 0), (0, 2), (1, 2)]).unwrap();
        let g = b.as_graph();
        assert_eq!(g.n(), 5);
        assert_eq!(g.neighbors(4), &[0, 1]);
        g.check_invariants().unwrap();
    }
}
