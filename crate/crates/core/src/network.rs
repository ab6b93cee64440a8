//! Communication graphs and doubly stochastic mixing.
//!
//! Mixing matrices are built with Metropolis weights, which only need the
//! degrees of the two endpoints of every edge. The contraction factor
//! `δ = ‖W - 11'/n‖₂` is obtained by power iteration on `B'B` with
//! `B = W - 11'/n`.

use std::borrow::Cow;
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{consensus_seminorm, frobenius_norm, StackedMatrix};

/// Row/column sums of a mixing matrix must be 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

const POWER_ITERATION_TOL: f64 = 1e-12;
const POWER_ITERATION_CAP: usize = 10_000;

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    node_count: usize,
    // stored with i < j
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at node {a}")));
            }
            if a >= node_count || b >= node_count {
                return Err(Error::invalid(format!(
                    "edge ({a},{b}) outside node range 0..{node_count}"
                )));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::invalid(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(Self {
            node_count,
            edges: set,
        })
    }

    pub fn empty(node_count: usize) -> Self {
        Self {
            node_count,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self {
            node_count: n,
            edges,
        }
    }

    pub fn path(n: usize) -> Self {
        Self {
            node_count: n,
            edges: (1..n).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn ring(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.edges.insert((0, n - 1));
        }
        g
    }

    pub fn star(n: usize) -> Self {
        Self {
            node_count: n,
            edges: (1..n).map(|i| (0, i)).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// BFS from node 0.
    pub fn is_connected(&self) -> bool {
        if self.node_count <= 1 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.node_count
    }

    /// Edge-list text: header `n <count>` followed by one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.node_count);
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing `n <count>` header"))?;
        let count = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", c] => c
                .parse::<usize>()
                .map_err(|e| Error::parse(line_no, format!("bad node count: {e}")))?,
            _ => return Err(Error::parse(line_no, "expected `n <count>` header")),
        };
        let mut edges = Vec::new();
        for (line_no, line) in lines {
            let parts: Vec<_> = line.split_whitespace().collect();
            let [a, b] = parts.as_slice() else {
                return Err(Error::parse(line_no, "expected `i j` edge"));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::parse(line_no, format!("bad node index `{s}`: {e}")))
            };
            edges.push((parse(a)?, parse(b)?));
        }
        Graph::new(count, edges)
    }
}

/// Nonnegative doubly stochastic weights with a lazily computed δ.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    weights: StackedMatrix,
    delta: OnceLock<f64>,
}

impl PartialEq for MixingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl MixingMatrix {
    pub fn from_weights(weights: StackedMatrix) -> Result<Self> {
        check_doubly_stochastic(&weights)?;
        Ok(Self {
            weights,
            delta: OnceLock::new(),
        })
    }

    /// `W = 11'/n`, one round of exact averaging.
    pub fn complete_averaging(n: usize) -> Self {
        let v = 1.0 / n as f64;
        Self {
            weights: StackedMatrix::from_fn(n, n, |_, _| v),
            delta: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            weights: StackedMatrix::identity(n),
            delta: OnceLock::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &StackedMatrix {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(i, j)
    }

    pub fn delta(&self) -> f64 {
        *self
            .delta
            .get_or_init(|| power_iteration_delta(&self.weights))
    }

    /// One mixing round `W · m`.
    pub fn apply(&self, m: &StackedMatrix) -> Result<StackedMatrix> {
        self.weights.matmul(m)
    }

    /// Positive off-diagonal weights only on graph edges.
    pub fn complies_with(&self, g: &Graph) -> bool {
        let n = self.size();
        g.node_count() == n
            && (0..n)
                .all(|i| (0..n).all(|j| i == j || self.weight(i, j) == 0.0 || g.has_edge(i, j)))
    }
}

fn check_doubly_stochastic(w: &StackedMatrix) -> Result<()> {
    let (n, m) = w.shape();
    if n != m || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: "non-empty square matrix".into(),
            actual: format!("{n}x{m}"),
        });
    }
    if let Some(&neg) = w.as_slice().iter().find(|&&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::NotDoublyStochastic { deviation: neg });
    }
    let col_dev = w
        .column_sums()
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max);
    let row_dev = (0..n)
        .map(|i| (w.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let deviation = col_dev.max(row_dev);
    if deviation > STOCHASTIC_TOL {
        return Err(Error::NotDoublyStochastic { deviation });
    }
    Ok(())
}

/// `W_ij = 1/(1 + max(deg_i, deg_j))` on edges, diagonal fills the row to 1.
pub fn metropolis_weights(g: &Graph) -> MixingMatrix {
    let n = g.node_count();
    let deg = g.degrees();
    let mut w = StackedMatrix::zeros(n, n);
    for (a, b) in g.edges() {
        let v = 1.0 / (1.0 + deg[a].max(deg[b]) as f64);
        w.set(a, b, v);
        w.set(b, a, v);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w.get(i, j)).sum();
        w.set(i, i, 1.0 - off);
    }
    MixingMatrix {
        weights: w,
        delta: OnceLock::new(),
    }
}

/// Spectral norm of `W - 11'/n`.
pub fn contraction_factor(weights: &StackedMatrix) -> Result<f64> {
    check_doubly_stochastic(weights)?;
    Ok(power_iteration_delta(weights))
}

// v ↦ (W - 11'/n) v
fn deflated_mul(w: &StackedMatrix, v: &[f64], transpose: bool) -> Vec<f64> {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|i| {
            let dot: f64 = if transpose {
                (0..n).map(|l| w.get(l, i) * v[l]).sum()
            } else {
                w.row(i).iter().zip(v).map(|(a, b)| a * b).sum()
            };
            dot - mean
        })
        .collect()
}

fn power_iteration_delta(w: &StackedMatrix) -> f64 {
    let n = w.rows();
    if n <= 1 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_de17a);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = crate::linalg::vector_norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);

    let mut prev = f64::NAN;
    let mut rayleigh = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let u = deflated_mul(w, &v, false);
        // ‖Bv‖² for unit v is the Rayleigh quotient of B'B
        rayleigh = u.iter().map(|x| x * x).sum::<f64>();
        let next = deflated_mul(w, &u, true);
        let norm = crate::linalg::vector_norm(&next);
        if norm == 0.0 {
            return 0.0;
        }
        if (rayleigh - prev).abs() < POWER_ITERATION_TOL {
            break;
        }
        prev = rayleigh;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    rayleigh.sqrt()
}

/// `‖W y‖_Ł / ‖y‖_Ł`, zero when `y` is consensual up to rounding.
pub fn contraction_ratio(w: &MixingMatrix, y: &StackedMatrix) -> Result<f64> {
    let denom = consensus_seminorm(y);
    if denom <= 1e-14 * frobenius_norm(y) {
        return Ok(0.0);
    }
    Ok(consensus_seminorm(&w.apply(y)?) / denom)
}

/// Largest observed contraction ratio over random `n x 3` matrices.
pub fn verify_contraction(w: &MixingMatrix, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid(
            "verify_contraction needs at least one trial",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = w.size();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let y = StackedMatrix::from_fn(n, 3, |_, _| rng.sample(StandardNormal));
        worst = worst.max(contraction_ratio(w, &y)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSequence {
    Static(Graph),
    /// Fresh connected graph each iteration: uniform random spanning tree
    /// plus each remaining pair independently with `edge_probability`.
    TimeVarying {
        node_count: usize,
        edge_probability: f64,
        seed: u64,
    },
}

impl GraphSequence {
    pub fn time_varying(node_count: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid("graph sequence needs at least one node"));
        }
        if !(0.0..=1.0).contains(&edge_probability) {
            return Err(Error::invalid(format!(
                "edge probability {edge_probability} outside [0,1]"
            )));
        }
        Ok(GraphSequence::TimeVarying {
            node_count,
            edge_probability,
            seed,
        })
    }

    pub fn node_count(&self) -> usize {
        match self {
            GraphSequence::Static(g) => g.node_count(),
            GraphSequence::TimeVarying { node_count, .. } => *node_count,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, GraphSequence::Static(_))
    }

    /// Graph in force at iteration `k`; a pure function of `(seed, k)`.
    pub fn next_graph(&self, k: usize) -> Cow<'_, Graph> {
        match self {
            GraphSequence::Static(g) => Cow::Borrowed(g),
            GraphSequence::TimeVarying {
                node_count,
                edge_probability,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(k as u64);
                Cow::Owned(random_connected_graph(
                    *node_count,
                    *edge_probability,
                    &mut rng,
                ))
            }
        }
    }
}

fn random_connected_graph(n: usize, q: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = random_spanning_tree(n, rng);
    for i in 0..n {
        for j in i + 1..n {
            // one draw per pair keeps the stream layout independent of the tree
            let keep = rng.random::<f64>() < q;
            if keep {
                edges.insert((i, j));
            }
        }
    }
    Graph {
        node_count: n,
        edges,
    }
}

/// Uniform labelled spanning tree of `K_n` via a random Prüfer sequence.
fn random_spanning_tree(n: usize, rng: &mut impl Rng) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    if n < 2 {
        return edges;
    }
    if n == 2 {
        edges.insert((0, 1));
        return edges;
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    for &c in &code {
        let leaf = leaves
            .pop_first()
            .expect("Prüfer decoding always has a leaf");
        edges.insert((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let a = leaves.pop_first().expect("two leaves remain");
    let b = leaves.pop_first().expect("two leaves remain");
    edges.insert((a, b));
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn metropolis_two_node_path() {
        let w = metropolis_weights(&Graph::path(2));
        for i in 0..2 {
            for j in 0..2 {
                assert_close(w.weight(i, j), 0.5, 1e-15);
            }
        }
    }

    #[test]
    fn metropolis_single_node() {
        let w = metropolis_weights(&Graph::empty(1));
        assert_eq!(w.weight(0, 0), 1.0);
        assert_eq!(w.delta(), 0.0);
    }

    #[test]
    fn metropolis_three_node_path() {
        let w = metropolis_weights(&Graph::path(3));
        let expected = [
            [2.0 / 3.0, 1.0 / 3.0, 0.0],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.0, 1.0 / 3.0, 2.0 / 3.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_close(w.weight(i, j), expected[i][j], 1e-15);
            }
        }
        assert!(w.complies_with(&Graph::path(3)));
        assert_close(w.delta(), 2.0 / 3.0, 1e-9);
    }

    #[test]
    fn delta_of_complete_averaging_is_zero() {
        let w = MixingMatrix::complete_averaging(5);
        assert!(w.delta() < 1e-12);
        // complete graph Metropolis weights are exactly 1/n
        let m = metropolis_weights(&Graph::complete(5));
        assert!(m.delta() < 1e-12);
    }

    #[test]
    fn identity_has_no_mixing() {
        let w = MixingMatrix::identity(2);
        assert_close(w.delta(), 1.0, 1e-12);
        assert!(!Graph::empty(2).is_connected());
    }

    #[test]
    fn contraction_factor_rejects_non_stochastic() {
        let w = StackedMatrix::from_rows(&[vec![0.9, 0.0], vec![0.1, 1.0]]).unwrap();
        assert!(matches!(
            contraction_factor(&w),
            Err(Error::NotDoublyStochastic { .. })
        ));
        let w = StackedMatrix::from_rows(&[vec![1.5, -0.5], vec![-0.5, 1.5]]).unwrap();
        assert!(contraction_factor(&w).is_err());
    }

    #[test]
    fn contraction_ratio_edge_cases() {
        let avg = MixingMatrix::complete_averaging(4);
        let y = StackedMatrix::from_fn(4, 2, |i, j| (i * 3 + j) as f64);
        assert!(contraction_ratio(&avg, &y).unwrap() < 1e-14);
        let consensual = StackedMatrix::consensual(4, &[1.0, 2.0]);
        let w = metropolis_weights(&Graph::ring(4));
        assert_eq!(contraction_ratio(&w, &consensual).unwrap(), 0.0);
    }

    #[test]
    fn path_contraction_bounded_by_delta() {
        let w = metropolis_weights(&Graph::path(3));
        let worst = verify_contraction(&w, 1000, 9).unwrap();
        assert!(worst <= 2.0 / 3.0 + 1e-9);
        assert!(worst > 0.5);
    }

    #[test]
    fn static_sequence_returns_same_graph() {
        let g = Graph::ring(5);
        let seq = GraphSequence::Static(g.clone());
        assert!(matches!(seq.next_graph(0), Cow::Borrowed(_)));
        assert_eq!(*seq.next_graph(17), g);
    }

    #[test]
    fn time_varying_is_deterministic_and_connected() {
        let seq = GraphSequence::time_varying(12, 0.3, 42).unwrap();
        assert_eq!(seq.next_graph(5), seq.next_graph(5));
        assert_ne!(seq.next_graph(5), seq.next_graph(6));
        for k in 0..100 {
            let g = seq.next_graph(k);
            assert!(g.is_connected(), "draw {k} disconnected");
            assert!(g.edge_count() >= 11);
        }
    }

    #[test]
    fn sparse_time_varying_is_a_tree() {
        let seq = GraphSequence::time_varying(9, 0.0, 1).unwrap();
        for k in 0..20 {
            let g = seq.next_graph(k);
            assert_eq!(g.edge_count(), 8);
            assert!(g.is_connected());
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Graph::new(5, [(0, 3), (4, 1), (2, 3)]).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("n 5\n"));
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
    }

    #[test]
    fn edge_list_errors() {
        assert!(Graph::from_edge_list("").is_err());
        assert!(Graph::from_edge_list("nodes 3\n").is_err());
        assert!(matches!(
            Graph::from_edge_list("n 3\n0 1\n1 x\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(Graph::from_edge_list("n 3\n0 0\n").is_err());
        assert!(Graph::from_edge_list("n 3\n0 1\n1 0\n").is_err());
        assert!(Graph::from_edge_list("n 3\n0 5\n").is_err());
    }
}
