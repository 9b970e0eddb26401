//! Graph structure of the transmission network.
//!
//! Nodes are generator buses, edges are transmission lines. Every edge has a
//! fixed orientation (initial node, terminal node) taken from the order in
//! which it was listed. The incidence matrix maps node outputs to edge inputs
//! (`Qᵀ y`) and edge outputs back to node inputs (`±Q y_c`).

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, GridError, Result};

/// An oriented edge with 0-based endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

/// Feedback sign used when edge outputs are aggregated onto nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interconnection {
    /// `u_p = Q y_c`; used by the angle loop.
    Positive,
    /// `u_p = -Q y_c`; used by the voltage loop.
    Negative,
}

impl Interconnection {
    fn sign(self) -> f64 {
        match self {
            Interconnection::Positive => 1.0,
            Interconnection::Negative => -1.0,
        }
    }
}

/// Connected undirected graph with a fixed edge orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    node_count: usize,
    edges: Vec<Edge>,
}

impl Network {
    /// Builds a network from 1-based `(initial, terminal)` pairs.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(GridError::InvalidNetwork("network needs at least one node".into()));
        }
        let mut seen = HashSet::new();
        let mut internal = Vec::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a == 0 || b == 0 || a > node_count || b > node_count {
                return Err(GridError::InvalidNetwork(format!(
                    "edge {} = ({a}, {b}) references a node outside 1..={node_count}",
                    k + 1
                )));
            }
            if a == b {
                return Err(GridError::InvalidNetwork(format!(
                    "edge {} is a self-loop on node {a}",
                    k + 1
                )));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GridError::InvalidNetwork(format!(
                    "edge {} = ({a}, {b}) duplicates an earlier edge",
                    k + 1
                )));
            }
            internal.push(Edge { from: a - 1, to: b - 1 });
        }
        let network = Network {
            node_count,
            edges: internal,
        };
        let unreachable = network.unreachable_from_first();
        if !unreachable.is_empty() {
            return Err(GridError::Disconnected {
                unreachable: unreachable.into_iter().map(|i| i + 1).collect(),
            });
        }
        Ok(network)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges with 0-based endpoints, in configuration order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edges as 1-based pairs, as they appear in external formats.
    pub fn edges_one_based(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.from + 1, e.to + 1)).collect()
    }

    /// 0-based neighbours of `node`.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.from == node {
                    Some(e.to)
                } else if e.to == node {
                    Some(e.from)
                } else {
                    None
                }
            })
            .collect()
    }

    fn unreachable_from_first(&self) -> Vec<usize> {
        let mut adjacency = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adjacency[e.from].push(e.to);
            adjacency[e.to].push(e.from);
        }
        let mut visited = vec![false; self.node_count];
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        (0..self.node_count).filter(|&i| !visited[i]).collect()
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        build_incidence(self)
    }
}

/// N×L node-edge incidence matrix with entries in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    // row-major
    entries: Vec<i8>,
    edges: Vec<Edge>,
}

/// +1 where the node is the initial end of the edge, -1 at the terminal end.
pub fn build_incidence(network: &Network) -> IncidenceMatrix {
    let rows = network.node_count();
    let cols = network.edge_count();
    let mut entries = vec![0i8; rows * cols];
    for (l, e) in network.edges().iter().enumerate() {
        entries[e.from * cols + l] = 1;
        entries[e.to * cols + l] = -1;
    }
    IncidenceMatrix {
        rows,
        cols,
        entries,
        edges: network.edges().to_vec(),
    }
}

impl IncidenceMatrix {
    pub fn node_count(&self) -> usize {
        self.rows
    }

    pub fn edge_count(&self) -> usize {
        self.cols
    }

    /// Entry `q_il` with 0-based indices.
    pub fn get(&self, node: usize, edge: usize) -> i8 {
        self.entries[node * self.cols + edge]
    }

    pub fn row(&self, node: usize) -> &[i8] {
        &self.entries[node * self.cols..(node + 1) * self.cols]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, l| f64::from(self.get(i, l)))
    }

    pub fn rank(&self) -> usize {
        if self.cols == 0 {
            return 0;
        }
        self.to_dmatrix().rank(1e-9)
    }

    /// Edge inputs `(Qᵀ ⊗ I_m) Y`: row `l` is `y_i - y_j` for edge `l = (i, j)`.
    ///
    /// `node_outputs` is N×m with one row per node.
    pub fn edge_inputs(&self, node_outputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len("node outputs", self.rows, node_outputs.nrows())?;
        let m = node_outputs.ncols();
        Ok(DMatrix::from_fn(self.cols, m, |l, k| {
            let e = self.edges[l];
            node_outputs[(e.from, k)] - node_outputs[(e.to, k)]
        }))
    }

    /// Node inputs `±(Q ⊗ I_m) Y_c` for an L×m matrix of edge outputs.
    pub fn node_inputs(
        &self,
        edge_outputs: &DMatrix<f64>,
        sign: Interconnection,
    ) -> Result<DMatrix<f64>> {
        check_len("edge outputs", self.cols, edge_outputs.nrows())?;
        let m = edge_outputs.ncols();
        let s = sign.sign();
        let mut out = DMatrix::zeros(self.rows, m);
        for (l, e) in self.edges.iter().enumerate() {
            for k in 0..m {
                out[(e.from, k)] += s * edge_outputs[(l, k)];
                out[(e.to, k)] -= s * edge_outputs[(l, k)];
            }
        }
        Ok(out)
    }

    /// Scalar-channel (m = 1) version of [`Self::edge_inputs`] writing into `out`.
    pub fn edge_differences(&self, node_outputs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(node_outputs.len(), self.rows);
        for (slot, e) in out.iter_mut().zip(&self.edges) {
            *slot = node_outputs[e.from] - node_outputs[e.to];
        }
    }

    /// Scalar-channel (m = 1) version of [`Self::node_inputs`] writing into `out`.
    pub fn aggregate(&self, edge_outputs: &[f64], sign: Interconnection, out: &mut [f64]) {
        debug_assert_eq!(edge_outputs.len(), self.cols);
        let s = sign.sign();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (y, e) in edge_outputs.iter().zip(&self.edges) {
            out[e.from] += s * y;
            out[e.to] -= s * y;
        }
    }
}

/// Deterministic random connected graph on `n` nodes.
///
/// A random recursive spanning tree is laid down first, then every remaining
/// node pair is added with probability 0.3. Edges are oriented from the
/// lower to the higher node id.
pub fn random_connected_graph(n: usize, seed: u64) -> Result<Network> {
    if n < 2 {
        return Err(GridError::InvalidParameter(format!(
            "random graph needs n >= 2, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=n).collect();
    order[1..].shuffle(&mut rng);

    let mut pairs = Vec::new();
    let mut present = HashSet::new();
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        let child = order[k];
        present.insert((parent.min(child), parent.max(child)));
        pairs.push((parent.min(child), parent.max(child)));
    }
    for a in 1..=n {
        for b in (a + 1)..=n {
            if !present.contains(&(a, b)) && rng.gen_bool(0.3) {
                pairs.push((a, b));
            }
        }
    }
    Network::new(n, &pairs)
}
