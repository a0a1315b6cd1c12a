//! Per-document word co-occurrence network and its path primitives.
//!
//! Nodes are kept in lexicographic order and adjacency lists are sorted, so a
//! graph rebuilt from its edge-list dump is identical node-for-node and every
//! traversal (and therefore every floating point accumulation) happens in the
//! same order.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::corpus::TokenSeq;
use crate::error::{Error, Result};
use crate::scalar::Weight;

pub const DEFAULT_WINDOW: usize = 5;

/// Undirected, unweighted, loop-free word graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CooccurrenceGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
    window: usize,
}

/// Hop counts from one source; `None` marks an unreachable node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMap {
    pub source: String,
    pub distances: HashMap<String, Option<usize>>,
}

impl DistanceMap {
    pub fn get(&self, node: &str) -> Option<Option<usize>> {
        self.distances.get(node).copied()
    }
}

impl CooccurrenceGraph {
    fn from_parts(nodes: BTreeSet<String>, edges: &BTreeSet<(String, String)>, window: usize) -> Self {
        let nodes: Vec<String> = nodes.into_iter().collect();
        let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (a, b) in edges {
            let (ia, ib) = (index[a], index[b]);
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        CooccurrenceGraph { nodes, index, adjacency, window }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn contains(&self, node: &str) -> bool {
        self.index.contains_key(node)
    }

    fn require(&self, node: &str) -> Result<usize> {
        self.node_index(node).ok_or_else(|| Error::MissingNode(node.to_string()))
    }

    pub fn neighbors(&self, node: &str) -> Result<impl Iterator<Item = &str> + '_> {
        let i = self.require(node)?;
        Ok(self.adjacency[i].iter().map(move |&j| self.nodes[j].as_str()))
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.node_index(a), self.node_index(b)) {
            (Some(i), Some(j)) => self.adjacency[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// Edges as `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.adjacency.iter().enumerate().flat_map(move |(i, list)| {
            list.iter().filter(move |&&j| j > i).map(move |&j| (self.nodes[i].as_str(), self.nodes[j].as_str()))
        })
    }

    pub fn degree(&self, node: &str) -> Result<usize> {
        Ok(self.adjacency[self.require(node)?].len())
    }

    pub(crate) fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.nodes.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].expect("queued nodes have a distance") + 1;
            for &w in &self.adjacency[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn bfs_distances(&self, source: &str) -> Result<DistanceMap> {
        let s = self.require(source)?;
        let distances =
            self.distances_from(s).into_iter().enumerate().map(|(i, d)| (self.nodes[i].clone(), d)).collect();
        Ok(DistanceMap { source: source.to_string(), distances })
    }

    /// Betweenness of every node, indexed like [`nodes`](Self::nodes).
    ///
    /// Brandes accumulation over unordered pairs with endpoints excluded:
    /// each pair {j, k} adds the fraction of shortest j–k paths that pass
    /// through the node as an interior vertex.
    pub fn betweenness_all<T: Weight>(&self) -> Vec<T> {
        let n = self.nodes.len();
        let mut score = vec![T::zero(); n];
        let mut order = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![T::zero(); n];
        let mut dist: Vec<Option<usize>> = vec![None; n];
        let mut delta = vec![T::zero(); n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            order.clear();
            for v in 0..n {
                preds[v].clear();
                sigma[v] = T::zero();
                dist[v] = None;
                delta[v] = T::zero();
            }
            sigma[s] = T::one();
            dist[s] = Some(0);
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let dv = dist[v].expect("queued");
                for &w in &self.adjacency[v] {
                    if dist[w].is_none() {
                        dist[w] = Some(dv + 1);
                        queue.push_back(w);
                    }
                    if dist[w] == Some(dv + 1) {
                        sigma[w] = sigma[w].clone() + sigma[v].clone();
                        preds[w].push(v);
                    }
                }
            }
            while let Some(w) = order.pop() {
                let coeff = (T::one() + delta[w].clone()) / sigma[w].clone();
                for &v in &preds[w] {
                    delta[v] = delta[v].clone() + sigma[v].clone() * coeff.clone();
                }
                if w != s {
                    score[w] = score[w].clone() + delta[w].clone();
                }
            }
        }
        // Every unordered pair was counted from both endpoints.
        let two = T::from_count(2);
        score.into_iter().map(|x| x / two.clone()).collect()
    }

    pub fn betweenness<T: Weight>(&self, node: &str) -> Result<T> {
        let i = self.require(node)?;
        Ok(self.betweenness_all::<T>().swap_remove(i))
    }

    /// Tab-separated edge list, one edge per line with `a < b`. Isolated
    /// nodes appear alone on a line. The first line records the window.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# window={}\n", self.window);
        for (i, list) in self.adjacency.iter().enumerate() {
            if list.is_empty() {
                writeln!(out, "{}", self.nodes[i]).expect("string write");
            }
        }
        for (a, b) in self.edges() {
            writeln!(out, "{a}\t{b}").expect("string write");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut window = None;
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(w) = rest.trim().strip_prefix("window=") {
                    window = Some(
                        w.trim()
                            .parse()
                            .map_err(|_| Error::Parse { line: i + 1, message: format!("bad window {w:?}") })?,
                    );
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                [a] => {
                    nodes.insert(a.to_string());
                }
                [a, b] if a != b => {
                    nodes.insert(a.to_string());
                    nodes.insert(b.to_string());
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    edges.insert((a.to_string(), b.to_string()));
                }
                _ => return Err(Error::Parse { line: i + 1, message: format!("bad edge line {line:?}") }),
            }
        }
        Ok(Self::from_parts(nodes, &edges, window.unwrap_or(DEFAULT_WINDOW)))
    }
}

/// Connects distinct tokens that fall within `window` consecutive positions.
pub fn build_cooccurrence(seq: &TokenSeq, window: usize) -> Result<CooccurrenceGraph> {
    if window < 2 {
        return Err(Error::Config(format!("co-occurrence window must be at least 2, got {window}")));
    }
    let tokens = &seq.tokens;
    let nodes: BTreeSet<String> = tokens.iter().cloned().collect();
    let mut edges = BTreeSet::new();
    for i in 0..tokens.len() {
        for j in i + 1..(i + window).min(tokens.len()) {
            let (a, b) = (&tokens[i], &tokens[j]);
            if a != b {
                let pair = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                edges.insert(pair);
            }
        }
    }
    Ok(CooccurrenceGraph::from_parts(nodes, &edges, window))
}
