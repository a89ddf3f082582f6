//! Communication graph with bidirectional arcs and the block operators
//! derived from it: arc source/destination matrices, oriented and
//! unoriented incidence, extended degree and Laplacian.
//!
//! Vertices are numbered `0..n`. Every undirected edge `{i, j}` with `i < j`
//! yields two arcs: `i → j` followed immediately by `j → i`. Edges are
//! ordered by `(min, max)` endpoint, so arc labels are deterministic.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::denselin::{kron_identity, SymMatrix};
use crate::error::{Error, Result};

/// A directed copy of an undirected edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arc {
    pub source: usize,
    pub dest: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    n: usize,
    p: usize,
    edges: Vec<(usize, usize)>,
    arcs: Vec<Arc>,
    neighbors: Vec<Vec<usize>>,
}

impl NetworkGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of arcs, twice the number of edges.
    pub fn m(&self) -> usize {
        self.arcs.len()
    }

    /// Block dimension, the length of each local variable.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Undirected edges as `(min, max)` pairs in label order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Arcs in label order; the label of `arcs()[a]` is `a`.
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Number of neighbors of `i`.
    pub fn neighbor_count(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Zero-based label of the arc `i → j`, if it exists.
    pub fn arc_label(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (i.min(j), i.max(j));
        let e = self.edges.binary_search(&(lo, hi)).ok()?;
        Some(if i < j { 2 * e } else { 2 * e + 1 })
    }

    /// Same topology with a different block dimension.
    pub fn with_block_dim(&self, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::ZeroBlockDim);
        }
        Ok(Self { p, ..self.clone() })
    }

    /// Diagonal of the graph-level extended degree matrix `D_G`.
    ///
    /// With two arcs per edge this is twice the neighbor count.
    pub fn degree_diag(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n,
            self.neighbors.iter().map(|nb| 2.0 * nb.len() as f64),
        )
    }

    /// Graph-level `L_G = E_oᵀE_o` (base, before lifting).
    pub fn laplacian(&self) -> SymMatrix {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            l[(i, i)] += 2.0;
            l[(j, j)] += 2.0;
            l[(i, j)] -= 2.0;
            l[(j, i)] -= 2.0;
        }
        SymMatrix::symmetrize(l)
    }

    /// Graph-level `E_uᵀE_u`.
    pub fn unoriented_gram(&self) -> SymMatrix {
        let mut u = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            u[(i, i)] += 2.0;
            u[(j, j)] += 2.0;
            u[(i, j)] += 2.0;
            u[(j, i)] += 2.0;
        }
        SymMatrix::symmetrize(u)
    }
}

/// Builds a connected graph from an undirected edge list.
pub fn build_graph(n: usize, edges: &[(usize, usize)], p: usize) -> Result<NetworkGraph> {
    if n < 2 || edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if p == 0 {
        return Err(Error::ZeroBlockDim);
    }
    let mut set = BTreeSet::new();
    for &(a, b) in edges {
        for v in [a, b] {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
        }
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        if !set.insert((a.min(b), a.max(b))) {
            return Err(Error::DuplicateEdge(a.min(b), a.max(b)));
        }
    }
    let edges: Vec<(usize, usize)> = set.into_iter().collect();
    let mut neighbors = vec![Vec::new(); n];
    let mut arcs = Vec::with_capacity(2 * edges.len());
    for &(i, j) in &edges {
        arcs.push(Arc { source: i, dest: j });
        arcs.push(Arc { source: j, dest: i });
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }

    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &neighbors[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    if let Some(unreachable) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected { unreachable });
    }

    Ok(NetworkGraph {
        n,
        p,
        edges,
        arcs,
        neighbors,
    })
}

/// A block matrix `base ⊗ I_p`. Only the graph-level base is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    base: DMatrix<f64>,
    p: usize,
}

impl BlockOperator {
    pub fn new(base: DMatrix<f64>, p: usize) -> Self {
        Self { base, p }
    }

    pub fn base(&self) -> &DMatrix<f64> {
        &self.base
    }

    pub fn block_dim(&self) -> usize {
        self.p
    }

    pub fn block_rows(&self) -> usize {
        self.base.nrows()
    }

    pub fn block_cols(&self) -> usize {
        self.base.ncols()
    }

    /// `(base ⊗ I_p) x`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        apply_blocks(&self.base, self.p, x)
    }

    /// `(base ⊗ I_p)ᵀ y`.
    pub fn apply_transpose(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        apply_blocks(&self.base.transpose(), self.p, y)
    }

    /// The materialized lift `base ⊗ I_p`.
    pub fn lifted(&self) -> DMatrix<f64> {
        kron_identity(&self.base, self.p)
    }

    /// Graph-level Gram matrix `baseᵀ base`.
    pub fn gram(&self) -> SymMatrix {
        SymMatrix::symmetrize(self.base.transpose() * &self.base)
    }
}

/// Applies `base ⊗ I_p` to a vector stacked as blocks of length `p`.
pub(crate) fn apply_blocks(
    base: &DMatrix<f64>,
    p: usize,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let expected = base.ncols() * p;
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    // rows of `blocks` are the p-blocks of x
    let blocks = DMatrix::from_row_slice(base.ncols(), p, x.as_slice());
    let out = base * blocks;
    Ok(DVector::from_iterator(
        base.nrows() * p,
        out.transpose().iter().copied(),
    ))
}

/// Block arc source and destination matrices `(A_s, A_d)`, each `m × n` blocks.
pub fn arc_matrices(g: &NetworkGraph) -> (BlockOperator, BlockOperator) {
    let mut a_s = DMatrix::zeros(g.m(), g.n());
    let mut a_d = DMatrix::zeros(g.m(), g.n());
    for (a, arc) in g.arcs().iter().enumerate() {
        a_s[(a, arc.source)] = 1.0;
        a_d[(a, arc.dest)] = 1.0;
    }
    (
        BlockOperator::new(a_s, g.p()),
        BlockOperator::new(a_d, g.p()),
    )
}

/// Incidence-derived operators of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceOperators {
    /// `E_o = A_s − A_d`.
    pub oriented: BlockOperator,
    /// `E_u = A_s + A_d`.
    pub unoriented: BlockOperator,
    /// Extended degree `D = ½(E_oᵀE_o + E_uᵀE_u)`.
    pub degree: BlockOperator,
    /// `L` with `E_oᵀE_o = L ⊗ I_p`.
    pub laplacian: BlockOperator,
}

pub fn incidence_operators(g: &NetworkGraph) -> IncidenceOperators {
    let (a_s, a_d) = arc_matrices(g);
    let eo = a_s.base() - a_d.base();
    let eu = a_s.base() + a_d.base();
    let lap = eo.transpose() * &eo;
    let ugram = eu.transpose() * &eu;
    let degree = (&lap + &ugram) * 0.5;
    let p = g.p();
    IncidenceOperators {
        oriented: BlockOperator::new(eo, p),
        unoriented: BlockOperator::new(eu, p),
        degree: BlockOperator::new(degree, p),
        laplacian: BlockOperator::new(lap, p),
    }
}

/// `‖E_o x‖₂`; zero exactly when `x` is consensual.
pub fn consensuality_residual(g: &NetworkGraph, x: &DVector<f64>) -> Result<f64> {
    let expected = g.n() * g.p();
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    let p = g.p();
    let mut acc = 0.0;
    for arc in g.arcs() {
        for k in 0..p {
            let d = x[arc.source * p + k] - x[arc.dest * p + k];
            acc += d * d;
        }
    }
    Ok(acc.sqrt())
}

/// Writes a graph-level matrix as comma-separated rows.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{}", m[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Edge-list generators for common topologies.
pub mod topology {
    use super::*;

    /// Named graph families, for configuration files and test matrices.
    #[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
    #[serde(rename_all = "kebab-case", tag = "kind")]
    pub enum Topology {
        Path,
        Ring,
        Complete,
        RingWithChords { chords: usize },
        RandomConnected { extra_prob: f64 },
    }

    impl Topology {
        pub fn edges<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(usize, usize)> {
            match *self {
                Topology::Path => path(n),
                Topology::Ring => ring(n),
                Topology::Complete => complete(n),
                Topology::RingWithChords { chords } => ring_with_chords(n, chords, rng),
                Topology::RandomConnected { extra_prob } => random_connected(n, extra_prob, rng),
            }
        }
    }

    pub fn path(n: usize) -> Vec<(usize, usize)> {
        (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect()
    }

    /// Cycle through all vertices; for `n = 2` this is the single edge.
    pub fn ring(n: usize) -> Vec<(usize, usize)> {
        let mut e = path(n);
        if n >= 3 {
            e.push((0, n - 1));
        }
        e
    }

    pub fn complete(n: usize) -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect()
    }

    /// Ring plus `chords` distinct random non-ring edges (fewer if the
    /// graph saturates).
    pub fn ring_with_chords<R: Rng + ?Sized>(
        n: usize,
        chords: usize,
        rng: &mut R,
    ) -> Vec<(usize, usize)> {
        let mut e = ring(n);
        let present: BTreeSet<(usize, usize)> =
            e.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let mut candidates: Vec<(usize, usize)> = complete(n)
            .into_iter()
            .filter(|c| !present.contains(c))
            .collect();
        candidates.shuffle(rng);
        e.extend(candidates.into_iter().take(chords));
        e
    }

    /// Random spanning tree (each vertex attaches to a random earlier one,
    /// under a random vertex order) plus each remaining pair with
    /// probability `extra_prob`.
    pub fn random_connected<R: Rng + ?Sized>(
        n: usize,
        extra_prob: f64,
        rng: &mut R,
    ) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut set = BTreeSet::new();
        for k in 1..n {
            let parent = order[rng.random_range(0..k)];
            let v = order[k];
            set.insert((v.min(parent), v.max(parent)));
        }
        for (i, j) in complete(n) {
            if !set.contains(&(i, j)) && rng.random_bool(extra_prob) {
                set.insert((i, j));
            }
        }
        set.into_iter().collect()
    }
}
