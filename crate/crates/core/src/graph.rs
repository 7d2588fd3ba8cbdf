//! Undirected agent graphs and κ-hop neighborhood queries.
//!
//! Agents are dense indices `0..n`. Every neighborhood is returned sorted
//! ascending, which fixes the concatenation order of local state and action
//! windows everywhere else in the crate.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// An undirected simple graph over `n` agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    /// Build a topology from an undirected edge list.
    ///
    /// Self-loops, duplicate edges (in either orientation) and out-of-range
    /// endpoints are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("graph needs at least one agent".into()));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({u}, {v}) references an agent outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidTopology(format!("self-loop at agent {u}")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidTopology(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self { n, adjacency })
    }

    /// Circular topology: agent `i` is adjacent to `i-1` and `i+1` modulo `n`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidTopology(format!("ring needs n >= 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    /// Parse the edge-list text format: one `i j` pair per line.
    ///
    /// Blank lines and `#` comments are ignored. The agent count is one more
    /// than the largest index unless a `# n = N` line declares it (needed for
    /// trailing isolated agents).
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut declared = None;
        let mut max_index = None::<usize>;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(rest) = comment.trim().strip_prefix("n") {
                    if let Some(value) = rest.trim().strip_prefix('=') {
                        let n = value.trim().parse::<usize>().map_err(|_| {
                            Error::InvalidTopology(format!("line {}: bad agent count", lineno + 1))
                        })?;
                        declared = Some(n);
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut next = || -> Result<usize> {
                fields
                    .next()
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| Error::InvalidTopology(format!("line {}: expected `i j`", lineno + 1)))
            };
            let (u, v) = (next()?, next()?);
            if fields.next().is_some() {
                return Err(Error::InvalidTopology(format!(
                    "line {}: trailing fields",
                    lineno + 1
                )));
            }
            max_index = Some(max_index.unwrap_or(0).max(u).max(v));
            edges.push((u, v));
        }
        let n = declared.or(max_index.map(|m| m + 1)).ok_or_else(|| {
            Error::InvalidTopology("edge list contains no edges and no `# n = N` line".into())
        })?;
        Self::new(n, &edges)
    }

    /// Render in the edge-list text format accepted by [`Topology::from_edge_list`].
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n = {}\n", self.n);
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted 1-hop neighbors of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            out.extend(nbrs.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::Index { index: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Shortest-path hop counts from `i`; `None` for unreachable agents.
    pub fn distances_from(&self, i: usize) -> Result<Vec<Option<usize>>> {
        self.check(i)?;
        let mut dist = vec![None; self.n];
        dist[i] = Some(0);
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Agents within hop distance `kappa` of `i` (including `i`), sorted.
    pub fn khop(&self, i: usize, kappa: usize) -> Result<Vec<usize>> {
        Ok(self
            .distances_from(i)?
            .into_iter()
            .enumerate()
            .filter_map(|(j, d)| d.filter(|&d| d <= kappa).map(|_| j))
            .collect())
    }

    /// Agents strictly outside the κ-hop neighborhood of `i`, sorted.
    pub fn khop_complement(&self, i: usize, kappa: usize) -> Result<Vec<usize>> {
        Ok(self
            .distances_from(i)?
            .into_iter()
            .enumerate()
            .filter_map(|(j, d)| match d {
                Some(d) if d <= kappa => None,
                _ => Some(j),
            })
            .collect())
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(0)
            .map(|d| d.iter().all(Option::is_some))
            .unwrap_or(false)
    }

    /// Largest hop distance from `i` to any agent.
    pub fn eccentricity(&self, i: usize) -> Result<usize> {
        self.distances_from(i)?
            .into_iter()
            .try_fold(0, |acc, d| d.map(|d| acc.max(d)).ok_or(Error::Disconnected))
    }

    /// Maximum shortest-path distance over all agent pairs.
    pub fn diameter(&self) -> Result<usize> {
        (0..self.n).try_fold(0, |acc, i| Ok(acc.max(self.eccentricity(i)?)))
    }

    /// Reject disconnected graphs; experiments with global objectives need this.
    pub fn require_connected(self) -> Result<Self> {
        if self.is_connected() {
            Ok(self)
        } else {
            Err(Error::Disconnected)
        }
    }
}
