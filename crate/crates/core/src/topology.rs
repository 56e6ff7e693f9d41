//! Undirected random topologies and neighbor sampling.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use crate::aggregate::NodeId;
use crate::error::{Error, Result};

/// Immutable undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl Topology {
    /// Builds a topology from an edge list. Duplicate edges are merged;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::config("topology", format!("edge {u}-{v} outside [0, {n})")));
            }
            if u == v {
                return Err(Error::config("topology", format!("self-loop at {u}")));
            }
            adjacency[u].push(NodeId::from(v));
            adjacency[v].push(NodeId::from(u));
        }
        let mut edge_count = 0;
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
            edge_count += adj.len();
        }
        Ok(Topology {
            adjacency,
            edge_count: edge_count / 2,
        })
    }

    /// Every pair of distinct nodes is connected.
    pub fn complete(n: usize) -> Self {
        let adjacency = (0..n)
            .map(|u| (0..n).filter(|&v| v != u).map(NodeId::from).collect())
            .collect();
        Topology {
            adjacency,
            edge_count: n * n.saturating_sub(1) / 2,
        }
    }

    /// G(n, p) with `p = avg_degree / (n - 1)`; pairs are visited in
    /// lexicographic order so the graph is a pure function of the rng state.
    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, avg_degree: f64, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("nodes", format!("need at least 2 nodes, got {n}")));
        }
        if !(avg_degree > 0.0 && avg_degree <= (n - 1) as f64) {
            return Err(Error::config(
                "degree",
                format!("average degree must lie in (0, {}], got {avg_degree}", n - 1),
            ));
        }
        let p = avg_degree / (n - 1) as f64;
        let mut adjacency = vec![Vec::new(); n];
        let mut edge_count = 0;
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen::<f64>() < p {
                    adjacency[u].push(NodeId::from(v));
                    adjacency[v].push(NodeId::from(u));
                    edge_count += 1;
                }
            }
        }
        // neighbors were appended in increasing order for both endpoints
        Ok(Topology { adjacency, edge_count })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u.index()]
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = self.adjacency.iter().map(Vec::len);
        DegreeStats {
            min: degrees.clone().min().unwrap_or(0),
            max: degrees.clone().max().unwrap_or(0),
            mean: if self.is_empty() {
                0.0
            } else {
                2.0 * self.edge_count as f64 / self.len() as f64
            },
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, adj)| {
            let u = NodeId::from(u);
            adj.iter().filter(move |&&v| v > u).map(move |&v| (u, v))
        })
    }

    /// Checks symmetry, loop-freedom, sortedness and the edge count.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let mut directed = 0;
        for (u, adj) in self.adjacency.iter().enumerate() {
            directed += adj.len();
            for w in adj.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::config(
                        "topology",
                        format!("adjacency of {u} not strictly sorted"),
                    ));
                }
            }
            for &v in adj {
                if v.index() >= n {
                    return Err(Error::config("topology", format!("{u} links to out-of-range {v}")));
                }
                if v.index() == u {
                    return Err(Error::config("topology", format!("self-loop at {u}")));
                }
                if self.adjacency[v.index()].binary_search(&NodeId::from(u)).is_err() {
                    return Err(Error::config("topology", format!("edge {u}->{v} has no reverse")));
                }
            }
        }
        if directed != 2 * self.edge_count {
            return Err(Error::config("topology", "edge count does not match adjacency"));
        }
        Ok(())
    }

    /// Nodes of the largest connected component, sorted. Ties go to the
    /// component containing the smallest id.
    pub fn largest_connected_component(&self) -> Vec<NodeId> {
        let n = self.len();
        let mut component = vec![usize::MAX; n];
        let mut best: Vec<NodeId> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut members = vec![NodeId::from(start)];
            component[start] = start;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if component[v.index()] == usize::MAX {
                        component[v.index()] = start;
                        members.push(v);
                        queue.push_back(v.index());
                    }
                }
            }
            if members.len() > best.len() {
                best = members;
            }
        }
        best.sort_unstable();
        best
    }

    /// Subgraph induced by `nodes` (sorted, distinct), relabelled to
    /// `0..nodes.len()` in the given order.
    pub fn induced(&self, nodes: &[NodeId]) -> Topology {
        let mut relabel = vec![u32::MAX; self.len()];
        for (i, v) in nodes.iter().enumerate() {
            relabel[v.index()] = i as u32;
        }
        let mut edge_count = 0;
        let adjacency: Vec<Vec<NodeId>> = nodes
            .iter()
            .map(|u| {
                let mut adj: Vec<NodeId> = self.adjacency[u.index()]
                    .iter()
                    .filter(|v| relabel[v.index()] != u32::MAX)
                    .map(|v| NodeId(relabel[v.index()]))
                    .collect();
                adj.sort_unstable();
                edge_count += adj.len();
                adj
            })
            .collect();
        Topology {
            adjacency,
            edge_count: edge_count / 2,
        }
    }

    /// Uniform choice among the neighbors of `u` accepted by `filter`.
    pub fn sample_neighbor<R, F>(&self, u: NodeId, filter: F, rng: &mut R) -> Option<NodeId>
    where
        R: Rng + ?Sized,
        F: Fn(NodeId) -> bool,
    {
        let adj = self.neighbors(u);
        let count = adj.iter().filter(|&&v| filter(v)).count();
        if count == 0 {
            return None;
        }
        let k = rng.gen_range(0..count);
        adj.iter().copied().filter(|&v| filter(v)).nth(k)
    }

    /// Edge-list dump: header `# n=<n> seed=<seed>`, then one `u v` per edge.
    pub fn write_edge_list<W: Write>(&self, out: &mut W, seed: u64) -> std::io::Result<()> {
        writeln!(out, "# n={} seed={}", self.len(), seed)?;
        let mut line = String::new();
        for (u, v) in self.edges() {
            line.clear();
            let _ = writeln!(line, "{u} {v}");
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn save_edge_list(&self, path: &Path, seed: u64) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_edge_list(&mut out, seed).map_err(io_err)?;
        out.flush().map_err(io_err)
    }

    /// Parses the format written by [`Topology::write_edge_list`], returning
    /// the topology and the recorded seed.
    pub fn read_edge_list<R: BufRead>(input: R) -> Result<(Self, u64)> {
        let bad = |msg: String| Error::config("topology", msg);
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty edge list".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let mut n = None;
        let mut seed = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = field.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("seed=") {
                seed = v.parse::<u64>().ok();
            }
        }
        let (n, seed) = match (n, seed) {
            (Some(n), Some(s)) => (n, s),
            _ => return Err(bad(format!("malformed header `{header}`"))),
        };
        let mut edges = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => return Err(bad(format!("malformed edge line `{line}`"))),
            }
        }
        Ok((Topology::from_edges(n, edges)?, seed))
    }
}
