//! Communication topologies, random link failures and Laplacian spectra.

use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{symmetric_eigenvalues, DenseMatrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    InvalidParameter(&'static str),
    SelfLoop(usize),
    NodeOutOfRange { node: usize, n: usize },
    InvalidWeight { i: usize, j: usize },
    DuplicateEdge { i: usize, j: usize },
    MismatchedSize { expected: usize, found: usize },
    EmptyUnion,
    Disconnected,
    DegenerateThreshold { mean_degree: f64 },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Self::SelfLoop(i) => write!(f, "self-loop at node {i}"),
            Self::NodeOutOfRange { node, n } => write!(f, "node {node} out of range for n={n}"),
            Self::InvalidWeight { i, j } => {
                write!(f, "edge ({i},{j}) weight must be finite and positive")
            }
            Self::DuplicateEdge { i, j } => write!(f, "duplicate edge ({i},{j})"),
            Self::MismatchedSize { expected, found } => {
                write!(f, "topology size mismatch: expected {expected}, found {found}")
            }
            Self::EmptyUnion => write!(f, "union over an empty sequence of topologies"),
            Self::Disconnected => write!(f, "graph is disconnected"),
            Self::DegenerateThreshold { mean_degree } => write!(
                f,
                "percolation threshold undefined for mean degree {mean_degree} <= 1"
            ),
        }
    }
}

impl core::error::Error for GraphError {}

/// Undirected weighted edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Symmetric weighted graph over agents `0..n`.
///
/// Each undirected edge carries a single weight used in both directions, so
/// the weight matrix is symmetric and therefore weight-balanced. Edges are
/// kept sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    edges: Vec<Edge>,
}

impl Topology {
    pub fn new<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::InvalidWeight { i, j });
            }
            out.push(Edge { i, j, weight: w });
        }
        out.sort_by_key(|e| (e.i, e.j));
        if let Some(d) = out.windows(2).find(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j)) {
            return Err(GraphError::DuplicateEdge { i: d[0].i, j: d[0].j });
        }
        Ok(Self { n, edges: out })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    pub fn complete(n: usize, weight: f64) -> Result<Self, GraphError> {
        Self::new(
            n,
            (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, weight))),
        )
    }

    pub fn path(n: usize, weight: f64) -> Result<Self, GraphError> {
        Self::new(n, (1..n).map(|j| (j - 1, j, weight)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges
            .binary_search_by_key(&key, |e| (e.i, e.j))
            .is_ok()
    }

    /// Weight of edge `{i, j}`, or `0.0` when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges
            .binary_search_by_key(&key, |e| (e.i, e.j))
            .map(|k| self.edges[k].weight)
            .unwrap_or(0.0)
    }

    /// Stable identifier for the unordered pair `{i, j}`.
    pub fn pair_key(&self, i: usize, j: usize) -> u64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        (a as u64) * (self.n as u64) + b as u64
    }

    /// Dense symmetric weight matrix `W`.
    pub fn weight_matrix(&self) -> DenseMatrix {
        let mut w = DenseMatrix::zeros(self.n);
        for e in &self.edges {
            w.set(e.i, e.j, e.weight);
            w.set(e.j, e.i, e.weight);
        }
        w
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = alloc::vec![0; self.n];
        for e in &self.edges {
            d[e.i] += 1;
            d[e.j] += 1;
        }
        d
    }
}

/// Samples an Erdős–Rényi graph: every unordered pair is an edge with
/// probability `p`, each with weight `w`.
pub fn generate_er(n: usize, p: f64, w: f64, seed: u64) -> Result<Topology, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter("n must be at least 2"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidParameter("p must lie in (0, 1]"));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(GraphError::InvalidParameter("w must be positive"));
    }
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng::unit_f64(&mut r) < p {
                edges.push(Edge { i, j, weight: w });
            }
        }
    }
    Ok(Topology { n, edges })
}

/// `L = D − W`.
pub fn laplacian(t: &Topology) -> DenseMatrix {
    let mut l = DenseMatrix::zeros(t.n);
    for e in &t.edges {
        l.set(e.i, e.j, -e.weight);
        l.set(e.j, e.i, -e.weight);
        l.add(e.i, e.i, e.weight);
        l.add(e.j, e.j, e.weight);
    }
    l
}

/// Smallest non-zero and largest Laplacian eigenvalues of a connected graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInfo {
    pub lambda2: f64,
    pub lambda_n: f64,
}

pub fn spectral_bounds(t: &Topology) -> Result<SpectralInfo, GraphError> {
    if t.n < 2 {
        return Err(GraphError::InvalidParameter("spectrum needs at least 2 nodes"));
    }
    if !is_connected(t) {
        return Err(GraphError::Disconnected);
    }
    let eig = symmetric_eigenvalues(&laplacian(t));
    Ok(SpectralInfo {
        lambda2: eig[1],
        lambda_n: eig[t.n - 1],
    })
}

/// Edge union of a sequence of realizations. An edge present in several
/// realizations keeps the weight of its first occurrence.
pub fn union_graph(realizations: &[Topology]) -> Result<Topology, GraphError> {
    let first = realizations.first().ok_or(GraphError::EmptyUnion)?;
    let n = first.n;
    let mut edges: Vec<Edge> = Vec::new();
    for t in realizations {
        if t.n != n {
            return Err(GraphError::MismatchedSize {
                expected: n,
                found: t.n,
            });
        }
        edges.extend_from_slice(&t.edges);
    }
    // stable sort keeps first occurrences ahead of later duplicates
    edges.sort_by_key(|e| (e.i, e.j));
    edges.dedup_by_key(|e| (e.i, e.j));
    Ok(Topology { n, edges })
}

pub fn is_connected(t: &Topology) -> bool {
    if t.n <= 1 {
        return true;
    }
    let mut parent: Vec<usize> = (0..t.n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = t.n;
    for e in &t.edges {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
            components -= 1;
            if components == 1 {
                return true;
            }
        }
    }
    components == 1
}

/// Bond-percolation threshold `1 − 1/d̄` with `d̄ = p(n−1)/2`.
pub fn percolation_threshold(n: usize, p: f64) -> Result<f64, GraphError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidParameter("p must lie in (0, 1]"));
    }
    let mean_degree = p * (n as f64 - 1.0) / 2.0;
    if mean_degree <= 1.0 {
        return Err(GraphError::DegenerateThreshold { mean_degree });
    }
    Ok(1.0 - 1.0 / mean_degree)
}

/// A base topology whose edges fail independently each round.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingNetwork {
    base: Topology,
    failure_rate: f64,
    seed: u64,
    window: usize,
}

impl SwitchingNetwork {
    pub fn new(
        base: Topology,
        failure_rate: f64,
        seed: u64,
        window: usize,
    ) -> Result<Self, GraphError> {
        if !(0.0..1.0).contains(&failure_rate) {
            return Err(GraphError::InvalidParameter("failure rate must lie in [0, 1)"));
        }
        if window == 0 {
            return Err(GraphError::InvalidParameter("window must be positive"));
        }
        Ok(Self {
            base,
            failure_rate,
            seed,
            window,
        })
    }

    /// A network whose links never fail.
    pub fn fixed(base: Topology) -> Self {
        Self {
            base,
            failure_rate: 0.0,
            seed: 0,
            window: 1,
        }
    }

    pub fn base(&self) -> &Topology {
        &self.base
    }

    pub fn failure_rate(&self) -> f64 {
        self.failure_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    /// The subgraph of surviving links at round `k`. Each draw depends only on
    /// `(seed, k, edge)`.
    pub fn realize(&self, k: u64) -> Topology {
        if self.failure_rate == 0.0 {
            return self.base.clone();
        }
        let edges = self
            .base
            .edges
            .iter()
            .filter(|e| {
                let key = self.base.pair_key(e.i, e.j);
                rng::counter_unit(self.seed, rng::STREAM_FAILURE, k, key) >= self.failure_rate
            })
            .copied()
            .collect();
        Topology {
            n: self.base.n,
            edges,
        }
    }

    /// Union of the realizations over rounds `[start, start + len)`.
    pub fn union_window(&self, start: u64, len: usize) -> Topology {
        let realizations: Vec<Topology> =
            (0..len as u64).map(|r| self.realize(start + r)).collect();
        union_graph(&realizations).unwrap_or_else(|_| Topology::empty(self.base.n))
    }

    pub fn check_b_connectivity(&self, start: u64, window: usize) -> bool {
        window > 0 && is_connected(&self.union_window(start, window))
    }

    /// B-connectivity over the network's own window.
    pub fn is_b_connected_at(&self, start: u64) -> bool {
        self.check_b_connectivity(start, self.window)
    }
}
