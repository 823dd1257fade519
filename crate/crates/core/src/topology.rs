//! Network topology: graph generation, Metropolis mixing matrices, spectral
//! statistics, and the neighbor-exchange primitive.
//!
//! Every piece of inter-node communication in this crate flows through
//! [`neighbor_exchange`] (or its scalar variant), which also maintains the
//! communication counters. The exchange only ever reads values held by graph
//! neighbors, so the simulation cannot accidentally rely on non-local state.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Family a graph was generated from (or `Imported` for parsed edge lists).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Line,
    Complete,
    Random,
    Imported,
}

/// A connected undirected simple graph on nodes `0..n`.
///
/// Edges are stored as ordered pairs `(i, j)` with `i < j`, sorted and
/// deduplicated. Connectivity is validated at construction.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    kind: GraphKind,
}

impl Graph {
    /// Builds a graph from an edge list, normalizing pair order and checking
    /// the type invariants (no self-loops, no duplicates, connected).
    pub fn new(n: usize, edges: Vec<(usize, usize)>, kind: GraphKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph must have n >= 1 nodes".into()));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let g = Graph { n, edges: norm, kind };
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Edge density `2|E| / (n(n-1))`; zero for a single node.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / (self.n as f64 * (self.n - 1) as f64)
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }

    /// Serializes to the plain-text edge-list format: first line `n <count>`,
    /// then one `i j` pair per line (0-based).
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }

    /// Parses the edge-list format produced by [`Graph::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, msg: "empty edge list".into() })?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next()) {
            (Some("n"), Some(v)) => v.parse::<usize>().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("bad node count {v:?}"),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: "expected header `n <count>`".into(),
                })
            }
        };
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok()).ok_or(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected `i j` pair, got {line:?}"),
                })
            };
            let i = parse(it.next())?;
            let j = parse(it.next())?;
            edges.push((i, j));
        }
        Graph::new(n, edges, GraphKind::Imported)
    }
}

/// Generates a connected graph of the requested family.
///
/// `density` and `seed` are only consulted for `GraphKind::Random`, which is
/// built as a uniform random spanning tree (random Prufer sequence) plus
/// uniformly chosen extra edges until `round(density * n(n-1)/2)` edges
/// exist. The minimum feasible density is `2/n`, the density of a tree.
pub fn generate_graph(n: usize, kind: GraphKind, density: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidArgument("graph must have n >= 1 nodes".into()));
    }
    match kind {
        GraphKind::Line => {
            let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
            Graph::new(n, edges, GraphKind::Line)
        }
        GraphKind::Complete => {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    edges.push((i, j));
                }
            }
            Graph::new(n, edges, GraphKind::Complete)
        }
        GraphKind::Random => {
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "random graphs need n >= 2 nodes".into(),
                ));
            }
            let minimum = 2.0 / n as f64;
            if density < minimum || density > 1.0 {
                return Err(Error::InfeasibleDensity { requested: density, minimum });
            }
            let max_edges = n * (n - 1) / 2;
            let target = (density * max_edges as f64).round() as usize;
            let target = target.clamp(n - 1, max_edges);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = prufer_spanning_tree(n, &mut rng);
            let present: std::collections::BTreeSet<_> = edges.iter().copied().collect();
            let mut rest: Vec<(usize, usize)> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if !present.contains(&(i, j)) {
                        rest.push((i, j));
                    }
                }
            }
            rest.shuffle(&mut rng);
            edges.extend(rest.into_iter().take(target - edges.len()));
            Graph::new(n, edges, GraphKind::Random)
        }
        GraphKind::Imported => Err(Error::InvalidArgument(
            "imported graphs come from edge lists, not the generator".into(),
        )),
    }
}

/// Uniform random labeled tree on `n >= 2` nodes via a random Prufer sequence.
fn prufer_spanning_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &x in &seq {
        degree[x] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> =
        (0..n).filter(|&i| degree[i] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &x in &seq {
        let leaf = *leaves.iter().next().expect("tree always has a leaf");
        leaves.remove(&leaf);
        edges.push((leaf.min(x), leaf.max(x)));
        degree[x] -= 1;
        if degree[x] == 1 {
            leaves.insert(x);
        }
    }
    let mut it = leaves.into_iter();
    let (u, v) = (it.next().unwrap(), it.next().unwrap());
    edges.push((u.min(v), u.max(v)));
    edges
}

/// Symmetric doubly stochastic mixing matrix with the graph's support.
///
/// Carries the spectral statistics of `I - W`: `rho` (largest eigenvalue),
/// `sigma` (second smallest) and their ratio `kappa_g`, the condition number
/// of the network. For a single-node graph the fields are `(0, 0, 1)` by
/// convention.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    /// Per-node weighted adjacency (neighbor index, weight), self included.
    neighbors: Vec<Vec<(usize, f64)>>,
    edge_count: usize,
    rho: f64,
    sigma: f64,
    kappa_g: f64,
}

impl MixingMatrix {
    pub fn node_count(&self) -> usize {
        self.w.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Dense view of the matrix; reference computations only. The solvers go
    /// through [`neighbor_exchange`], which walks the adjacency lists.
    pub fn dense(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    /// Largest eigenvalue of `I - W`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Second-smallest eigenvalue of `I - W`; positive iff connected.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Network condition number `rho / sigma`.
    pub fn kappa_g(&self) -> f64 {
        self.kappa_g
    }

    /// `1 / (1 - W_ii)` per node, the diagonal scaling used by the dual
    /// correction. Finite because every node with a neighbor has `W_ii < 1`.
    pub fn diag_correction(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| 1.0 / (1.0 - self.w[(i, i)])).collect()
    }

    pub fn neighbors_of(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }
}

/// Builds the Metropolis constant edge weight matrix of a connected graph:
/// `W_ij = 1 / (max(deg i, deg j) + 1)` on edges, zero off the support, and
/// the diagonal absorbs the remainder so rows sum to one.
pub fn metropolis_weights(g: &Graph) -> MixingMatrix {
    let n = g.node_count();
    let deg = g.degrees();
    let mut w = DMatrix::<f64>::zeros(n, n);
    for &(i, j) in g.edges() {
        let wij = 1.0 / (deg[i].max(deg[j]) as f64 + 1.0);
        w[(i, j)] = wij;
        w[(j, i)] = wij;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    let (rho, sigma, kappa_g) = if n == 1 {
        (0.0, 0.0, 1.0)
    } else {
        spectral_of(&w)
    };
    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        neighbors[i].push((i, w[(i, i)]));
    }
    for &(i, j) in g.edges() {
        neighbors[i].push((j, w[(i, j)]));
        neighbors[j].push((i, w[(i, j)]));
    }
    for list in &mut neighbors {
        list.sort_unstable_by_key(|&(j, _)| j);
    }
    MixingMatrix {
        w,
        neighbors,
        edge_count: g.edge_count(),
        rho,
        sigma,
        kappa_g,
    }
}

fn spectral_of(w: &DMatrix<f64>) -> (f64, f64, f64) {
    let n = w.nrows();
    let z = DMatrix::<f64>::identity(n, n) - w;
    let mut eigs: Vec<f64> = z.symmetric_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rho = eigs[n - 1];
    let sigma = eigs[1];
    (rho, sigma, rho / sigma)
}

/// Recomputes `(rho, sigma, kappa_g)` of `I - W` by dense symmetric
/// eigendecomposition, failing when the spectral gap indicates a
/// disconnected support.
pub fn spectral_stats(m: &MixingMatrix) -> Result<(f64, f64, f64)> {
    let n = m.node_count();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "spectral stats need at least two nodes".into(),
        ));
    }
    let (rho, sigma, kappa_g) = spectral_of(&m.w);
    if sigma <= 1e-12 {
        return Err(Error::DisconnectedGraph);
    }
    Ok((rho, sigma, kappa_g))
}

/// Communication counters, advanced only by the exchange primitives.
///
/// A round of dimension `q > 1` counts as one vector round transmitting
/// `|E| * q` entries (one vector per edge); `q == 1` rounds use the scalar
/// counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RoundCounter {
    pub vector_rounds: u64,
    pub scalar_rounds: u64,
    pub vector_entries: u64,
    pub scalar_entries: u64,
}

impl RoundCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_rounds(&self) -> u64 {
        self.vector_rounds + self.scalar_rounds
    }

    fn record(&mut self, q: usize, edges: usize) {
        if q == 1 {
            self.scalar_rounds += 1;
            self.scalar_entries += edges as u64;
        } else {
            self.vector_rounds += 1;
            self.vector_entries += (edges * q) as u64;
        }
    }
}

/// One synchronous gossip round: node `i` receives the weighted sum
/// `sum_{j in N(i)} W_ij v_j`, its own term included.
///
/// Only neighbor slots are read, so values held by non-neighbors can never
/// leak into the result. The counter advances by one round of the vectors'
/// dimension.
pub fn neighbor_exchange(
    values: &[DVector<f64>],
    m: &MixingMatrix,
    counter: &mut RoundCounter,
) -> Result<Vec<DVector<f64>>> {
    let n = m.node_count();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    let q = values.first().map_or(0, |v| v.len());
    if q == 0 {
        return Err(Error::InvalidArgument("exchange needs dimension >= 1".into()));
    }
    for v in values {
        if v.len() != q {
            return Err(Error::DimensionMismatch { expected: q, got: v.len() });
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = DVector::<f64>::zeros(q);
        for &(j, wij) in &m.neighbors[i] {
            acc.axpy(wij, &values[j], 1.0);
        }
        out.push(acc);
    }
    counter.record(q, m.edge_count);
    Ok(out)
}

/// Scalar gossip round (dimension 1); advances the scalar counters.
pub fn scalar_exchange(values: &[f64], m: &MixingMatrix, counter: &mut RoundCounter) -> Result<Vec<f64>> {
    let n = m.node_count();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: values.len() });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for &(j, wij) in &m.neighbors[i] {
            acc += wij * values[j];
        }
        out.push(acc);
    }
    counter.record(1, m.edge_count);
    Ok(out)
}
