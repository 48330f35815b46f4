//! Finite directed automata with a distinguished initial vertex and labeled
//! edges, together with exact path counting, enumeration, uniform sampling,
//! and growth classification of vertices and strongly connected components.

use std::collections::VecDeque;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;
use crate::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;
pub type LabelId = usize;

/// Resource guard on sphere horizons.
pub const MAX_HORIZON: usize = 1 << 20;
/// Default cap on full path enumeration.
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;

/// Relative tolerance used for spectral radii and class membership.
pub const SPECTRAL_REL_TOL: f64 = 1e-9;
/// Iteration cap for power iteration.
pub const SPECTRAL_MAX_ITERS: usize = 100_000;

// ---------------------------------------------------------------------------
// Alphabet
// ---------------------------------------------------------------------------

/// Finite generator alphabet with an involution. A token named `x^-1` is the
/// inverse of the token named `x`; a token without a partner is an involution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    inverse: Vec<LabelId>,
}

impl Alphabet {
    /// Builds an alphabet from token names (sorted internally, so label ids
    /// are canonical given the name set).
    pub fn new(mut names: Vec<String>) -> Result<Self> {
        names.sort();
        names.dedup();
        let mut inverse = vec![0; names.len()];
        for (i, name) in names.iter().enumerate() {
            let partner = match name.strip_suffix("^-1") {
                Some(base) => base.to_string(),
                None => format!("{name}^-1"),
            };
            inverse[i] = match names.binary_search(&partner) {
                Ok(j) => j,
                Err(_) if name.ends_with("^-1") => {
                    return Err(Error::InvalidGraph(format!(
                        "alphabet has `{name}` without its base token"
                    )))
                }
                Err(_) => i, // involution
            };
        }
        Ok(Alphabet { names, inverse })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: LabelId) -> &str {
        &self.names[id]
    }

    pub fn id_of(&self, name: &str) -> Option<LabelId> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn inverse(&self, id: LabelId) -> LabelId {
        self.inverse[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

// ---------------------------------------------------------------------------
// CombingGraph
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub label: LabelId,
}

/// Finite directed automaton: a distinguished initial vertex, edges labeled by
/// generator tokens, out-edges of each vertex carrying pairwise distinct
/// labels, and every vertex reachable from the initial one.
#[derive(Clone, Debug)]
pub struct CombingGraph {
    alphabet: Alphabet,
    vertex_names: Vec<String>,
    initial: VertexId,
    edges: Vec<Edge>,
    out: Vec<Vec<EdgeId>>,
    into: Vec<Vec<EdgeId>>,
}

impl CombingGraph {
    pub fn new(
        alphabet: Alphabet,
        vertex_names: Vec<String>,
        initial: VertexId,
        edge_list: Vec<(VertexId, VertexId, LabelId)>,
    ) -> Result<Self> {
        let n = vertex_names.len();
        if initial >= n {
            return Err(Error::InvalidGraph("initial vertex out of range".into()));
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut out = vec![Vec::new(); n];
        let mut into = vec![Vec::new(); n];
        for (from, to, label) in edge_list {
            if from >= n || to >= n {
                return Err(Error::InvalidGraph("edge endpoint out of range".into()));
            }
            if label >= alphabet.len() {
                return Err(Error::InvalidGraph("edge label out of range".into()));
            }
            let id = edges.len();
            edges.push(Edge { from, to, label });
            out[from].push(id);
            into[to].push(id);
        }
        // Out-edges ordered by label; `enumerate_paths` relies on this order.
        for list in &mut out {
            list.sort_by_key(|&e| edges[e].label);
        }
        Ok(CombingGraph { alphabet, vertex_names, initial, edges, out, into })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn initial(&self) -> VertexId {
        self.initial
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v]
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e]
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.into[v]
    }

    /// Adjacency rows as `(target, multiplicity)` pairs.
    pub fn adjacency(&self) -> Vec<Vec<(VertexId, u64)>> {
        let mut rows = vec![Vec::<(VertexId, u64)>::new(); self.vertex_count()];
        for (v, row) in rows.iter_mut().enumerate() {
            let mut targets: Vec<VertexId> = self.out[v].iter().map(|&e| self.edges[e].to).collect();
            targets.sort_unstable();
            for t in targets {
                match row.last_mut() {
                    Some(last) if last.0 == t => last.1 += 1,
                    _ => row.push((t, 1)),
                }
            }
        }
        rows
    }

    pub fn validate(&self) -> ValidationReport {
        let n = self.vertex_count();
        let mut reachable = vec![false; n];
        let mut queue = VecDeque::from([self.initial]);
        reachable[self.initial] = true;
        while let Some(v) = queue.pop_front() {
            for &e in &self.out[v] {
                let w = self.edges[e].to;
                if !reachable[w] {
                    reachable[w] = true;
                    queue.push_back(w);
                }
            }
        }
        let unreachable: Vec<VertexId> = (0..n).filter(|&v| !reachable[v]).collect();

        let mut duplicate_labels = Vec::new();
        for v in 0..n {
            for pair in self.out[v].windows(2) {
                if self.edges[pair[0]].label == self.edges[pair[1]].label {
                    duplicate_labels.push((v, self.edges[pair[0]].label));
                }
            }
        }

        let edges_into_initial: Vec<EdgeId> =
            (0..self.edges.len()).filter(|&e| self.edges[e].to == self.initial).collect();

        ValidationReport { unreachable, duplicate_labels, edges_into_initial }
    }

    pub fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(report.describe(self)))
        }
    }
}

/// Outcome of [`CombingGraph::validate`].
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub unreachable: Vec<VertexId>,
    pub duplicate_labels: Vec<(VertexId, LabelId)>,
    pub edges_into_initial: Vec<EdgeId>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.unreachable.is_empty()
            && self.duplicate_labels.is_empty()
            && self.edges_into_initial.is_empty()
    }

    pub fn describe(&self, graph: &CombingGraph) -> String {
        let mut parts = Vec::new();
        if let Some(&v) = self.unreachable.first() {
            parts.push(format!("vertex `{}` unreachable from the initial vertex", graph.vertex_name(v)));
        }
        if let Some(&(v, l)) = self.duplicate_labels.first() {
            parts.push(format!(
                "vertex `{}` has two out-edges labeled `{}`",
                graph.vertex_name(v),
                graph.alphabet().name(l)
            ));
        }
        if let Some(&e) = self.edges_into_initial.first() {
            parts.push(format!(
                "edge from `{}` targets the initial vertex",
                graph.vertex_name(graph.edge(e).from)
            ));
        }
        if parts.is_empty() {
            "valid".into()
        } else {
            parts.join("; ")
        }
    }
}

// ---------------------------------------------------------------------------
// Serialization (external JSON schema)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EdgeFile {
    from: String,
    to: String,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    vertices: Vec<String>,
    initial: String,
    edges: Vec<EdgeFile>,
}

impl CombingGraph {
    pub fn to_json(&self) -> serde_json::Value {
        let file = GraphFile {
            vertices: self.vertex_names.clone(),
            initial: self.vertex_names[self.initial].clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeFile {
                    from: self.vertex_names[e.from].clone(),
                    to: self.vertex_names[e.to].clone(),
                    label: self.alphabet.name(e.label).to_string(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("graph serialization")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let file: GraphFile = serde_json::from_value(value.clone())?;
        let find = |name: &str, names: &[String]| -> Result<usize> {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown vertex `{name}`")))
        };
        let alphabet = Alphabet::new(file.edges.iter().map(|e| e.label.clone()).collect())?;
        let initial = find(&file.initial, &file.vertices)?;
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in &file.edges {
            let from = find(&e.from, &file.vertices)?;
            let to = find(&e.to, &file.vertices)?;
            let label = alphabet
                .id_of(&e.label)
                .ok_or_else(|| Error::InvalidGraph(format!("unknown label `{}`", e.label)))?;
            edges.push((from, to, label));
        }
        CombingGraph::new(alphabet, file.vertices, initial, edges)
    }
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// A directed path: a start vertex and an edge sequence with matching
/// endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GraphPath {
    pub start: VertexId,
    pub edges: Vec<EdgeId>,
}

impl GraphPath {
    pub fn empty(start: VertexId) -> Self {
        GraphPath { start, edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn terminal(&self, graph: &CombingGraph) -> VertexId {
        self.edges.last().map_or(self.start, |&e| graph.edge(e).to)
    }

    pub fn labels<'g>(&'g self, graph: &'g CombingGraph) -> impl Iterator<Item = LabelId> + 'g {
        self.edges.iter().map(move |&e| graph.edge(e).label)
    }

    /// Spelled word, one token per edge.
    pub fn word(&self, graph: &CombingGraph) -> Vec<String> {
        self.labels(graph).map(|l| graph.alphabet().name(l).to_string()).collect()
    }

    pub fn is_consistent(&self, graph: &CombingGraph) -> bool {
        let mut at = self.start;
        for &e in &self.edges {
            if graph.edge(e).from != at {
                return false;
            }
            at = graph.edge(e).to;
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Path counting
// ---------------------------------------------------------------------------

/// Exact path counts: `count(v, n)` is the number of length-`n` paths
/// starting at `v`. Satisfies `N[v][n+1] = sum over out-edges v->w of N[w][n]`.
#[derive(Clone, Debug)]
pub struct PathCountTable {
    levels: Vec<Vec<BigUint>>, // levels[n][v]
    initial: VertexId,
}

impl PathCountTable {
    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn count(&self, v: VertexId, n: usize) -> &BigUint {
        &self.levels[n][v]
    }

    /// `#S_n`: paths of length `n` from the initial vertex.
    pub fn sphere(&self, n: usize) -> &BigUint {
        &self.levels[n][self.initial]
    }

    /// `#B_n`: paths of length at most `n` from the initial vertex.
    pub fn ball(&self, n: usize) -> BigUint {
        (0..=n).map(|k| self.sphere(k)).sum()
    }
}

pub fn count_spheres(graph: &CombingGraph, horizon: usize) -> Result<PathCountTable> {
    if horizon >= MAX_HORIZON {
        return Err(Error::HorizonTooLarge(horizon));
    }
    let n = graph.vertex_count();
    let mut levels = Vec::with_capacity(horizon + 1);
    levels.push(vec![BigUint::one(); n]);
    for _ in 0..horizon {
        let prev = levels.last().unwrap();
        let mut next = vec![BigUint::zero(); n];
        for (v, slot) in next.iter_mut().enumerate() {
            for &e in graph.out_edges(v) {
                *slot += &prev[graph.edge(e).to];
            }
        }
        levels.push(next);
    }
    Ok(PathCountTable { levels, initial: graph.initial() })
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

/// Depth-first streaming enumeration of the length-`n` paths from a vertex,
/// in lexicographic edge order.
pub struct PathEnumerator<'g> {
    graph: &'g CombingGraph,
    start: VertexId,
    n: usize,
    stack: Vec<(VertexId, usize)>, // (vertex, next out-edge index to try)
    edges: Vec<EdgeId>,
    done: bool,
}

impl<'g> PathEnumerator<'g> {
    fn new(graph: &'g CombingGraph, start: VertexId, n: usize) -> Self {
        PathEnumerator { graph, start, n, stack: vec![(start, 0)], edges: Vec::new(), done: false }
    }
}

impl Iterator for PathEnumerator<'_> {
    type Item = GraphPath;

    fn next(&mut self) -> Option<GraphPath> {
        if self.done {
            return None;
        }
        loop {
            if self.edges.len() == self.n {
                let path = GraphPath { start: self.start, edges: self.edges.clone() };
                // Backtrack once so the next call continues the search.
                if self.n == 0 {
                    self.done = true;
                } else {
                    self.stack.pop();
                    self.edges.pop();
                }
                return Some(path);
            }
            let (v, idx) = *self.stack.last()?;
            match self.graph.out_edges(v).get(idx) {
                Some(&e) => {
                    self.stack.last_mut().unwrap().1 += 1;
                    self.stack.push((self.graph.edge(e).to, 0));
                    self.edges.push(e);
                }
                None => {
                    self.stack.pop();
                    self.edges.pop();
                    if self.stack.is_empty() {
                        self.done = true;
                        return None;
                    }
                }
            }
        }
    }
}

/// Streams every length-`n` path from the initial vertex, refusing when the
/// sphere exceeds `cap`.
pub fn enumerate_paths(graph: &CombingGraph, n: usize, cap: u64) -> Result<PathEnumerator<'_>> {
    let table = count_spheres(graph, n)?;
    if table.sphere(n) > &BigUint::from(cap) {
        return Err(Error::EnumerationCap { count: table.sphere(n).to_string(), cap });
    }
    Ok(PathEnumerator::new(graph, graph.initial(), n))
}

/// All length-`n` paths from `v` back to `v`. With `primitive`, only loops
/// with no intermediate visit to `v`. The search is pruned by a reverse count
/// table, so the cost is proportional to the number of loops, not of paths.
pub fn loop_paths(
    graph: &CombingGraph,
    v: VertexId,
    n: usize,
    primitive: bool,
    cap: u64,
) -> Result<Vec<GraphPath>> {
    let count = count_loops(graph, v, n)?;
    if count > BigUint::from(cap) {
        return Err(Error::EnumerationCap { count: count.to_string(), cap });
    }
    // to_v[k][w] = number of length-k paths from w to v.
    let m = graph.vertex_count();
    let mut to_v = vec![vec![BigUint::zero(); m]];
    to_v[0][v] = BigUint::one();
    for k in 0..n {
        let mut next = vec![BigUint::zero(); m];
        for (w, slot) in next.iter_mut().enumerate() {
            for &e in graph.out_edges(w) {
                *slot += &to_v[k][graph.edge(e).to];
            }
        }
        to_v.push(next);
    }

    let mut loops = Vec::new();
    if n == 0 {
        loops.push(GraphPath::empty(v));
        return Ok(loops);
    }
    let mut edges: Vec<EdgeId> = Vec::new();
    let mut cursor: Vec<usize> = vec![0];
    let mut at: Vec<VertexId> = vec![v];
    while let Some(&idx) = cursor.last() {
        let depth = cursor.len() - 1;
        let here = at[depth];
        match graph.out_edges(here).get(idx) {
            Some(&e) if depth < n => {
                *cursor.last_mut().unwrap() += 1;
                let w = graph.edge(e).to;
                let remaining = n - depth - 1;
                if to_v[remaining][w].is_zero() || (primitive && remaining > 0 && w == v) {
                    continue;
                }
                edges.push(e);
                if remaining == 0 {
                    loops.push(GraphPath { start: v, edges: edges.clone() });
                    edges.pop();
                } else {
                    cursor.push(0);
                    at.push(w);
                }
            }
            _ => {
                cursor.pop();
                at.pop();
                edges.pop();
            }
        }
    }
    Ok(loops)
}

/// Number of length-`n` loops based at `v` (the `(A^n)_{vv}` entry), exact.
pub fn count_loops(graph: &CombingGraph, v: VertexId, n: usize) -> Result<BigUint> {
    if n >= MAX_HORIZON {
        return Err(Error::HorizonTooLarge(n));
    }
    let mut cur = vec![BigUint::zero(); graph.vertex_count()];
    cur[v] = BigUint::one();
    for _ in 0..n {
        let mut next = vec![BigUint::zero(); graph.vertex_count()];
        for (w, c) in cur.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for &e in graph.out_edges(w) {
                next[graph.edge(e).to] += c;
            }
        }
        cur = next;
    }
    Ok(std::mem::take(&mut cur[v]))
}

// ---------------------------------------------------------------------------
// Uniform sampling
// ---------------------------------------------------------------------------

/// Draws a path exactly uniformly from `S_n` by backward dynamic programming
/// over the exact count table.
pub fn sample_uniform_path(
    graph: &CombingGraph,
    table: &PathCountTable,
    n: usize,
    rng: &mut CounterRng,
) -> Result<GraphPath> {
    assert!(table.horizon() >= n, "count table horizon too small");
    if table.sphere(n).is_zero() {
        return Err(Error::EmptySphere(n));
    }
    let mut path = GraphPath::empty(graph.initial());
    let mut at = graph.initial();
    for remaining in (1..=n).rev() {
        let total = table.count(at, remaining);
        // Weights fit machine words for every workload we run; fall back to
        // big-integer draws beyond that.
        let chosen = if let Ok(small) = u64::try_from(total) {
            let mut x = rng.next_below(small);
            let mut pick = None;
            for &e in graph.out_edges(at) {
                let w = table.count(graph.edge(e).to, remaining - 1).to_u64().unwrap();
                if x < w {
                    pick = Some(e);
                    break;
                }
                x -= w;
            }
            pick.expect("weights sum to the total")
        } else {
            let mut x = rng.next_biguint_below(total);
            let mut pick = None;
            for &e in graph.out_edges(at) {
                let w = table.count(graph.edge(e).to, remaining - 1);
                if &x < w {
                    pick = Some(e);
                    break;
                }
                x -= w;
            }
            pick.expect("weights sum to the total")
        };
        path.edges.push(chosen);
        at = graph.edge(chosen).to;
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Counting measure
// ---------------------------------------------------------------------------

/// Exact rational or Monte Carlo estimate of a counting-measure value.
#[derive(Clone, Debug)]
pub enum MeasureValue {
    Exact(Ratio<BigInt>),
    Estimate { value: f64, ci_low: f64, ci_high: f64, samples: u64 },
}

impl MeasureValue {
    pub fn as_f64(&self) -> f64 {
        match self {
            MeasureValue::Exact(r) => ratio_to_f64(r),
            MeasureValue::Estimate { value, .. } => *value,
        }
    }
}

pub fn ratio_to_f64(r: &Ratio<BigInt>) -> f64 {
    let num = r.numer().to_f64().unwrap_or(f64::NAN);
    let den = r.denom().to_f64().unwrap_or(f64::NAN);
    if num.is_finite() && den.is_finite() && den != 0.0 {
        num / den
    } else {
        // Scale both down; exact counting values stay far from this path.
        let shift = (r.denom().bits().max(r.numer().bits())).saturating_sub(900);
        let num = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let den = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        num / den
    }
}

/// z for two-sided 99% intervals.
pub const Z99: f64 = 2.5758293035489004;

/// Wilson score interval.
pub fn wilson_interval(hits: u64, samples: u64, z: f64) -> (f64, f64) {
    if samples == 0 {
        return (0.0, 1.0);
    }
    let n = samples as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt());
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `P^n(A) = #(S_n \cap A) / #S_n` by full enumeration.
pub fn counting_measure_exact(
    graph: &CombingGraph,
    n: usize,
    cap: u64,
    mut predicate: impl FnMut(&GraphPath) -> bool,
) -> Result<Ratio<BigInt>> {
    let mut hits = BigUint::zero();
    let mut total = BigUint::zero();
    for path in enumerate_paths(graph, n, cap)? {
        total += 1u32;
        if predicate(&path) {
            hits += 1u32;
        }
    }
    if total.is_zero() {
        return Err(Error::EmptySphere(n));
    }
    Ok(Ratio::new(BigInt::from(hits), BigInt::from(total)))
}

/// `P^n(A)` estimated from uniform samples, with a Wilson 99% interval.
pub fn counting_measure_sampled(
    graph: &CombingGraph,
    table: &PathCountTable,
    n: usize,
    samples: u64,
    rng: &CounterRng,
    predicate: impl Fn(&GraphPath) -> bool,
) -> Result<MeasureValue> {
    let mut hits = 0u64;
    for i in 0..samples {
        let mut sub = rng.substream(i);
        let path = sample_uniform_path(graph, table, n, &mut sub)?;
        if predicate(&path) {
            hits += 1;
        }
    }
    let (lo, hi) = wilson_interval(hits, samples, Z99);
    Ok(MeasureValue::Estimate { value: hits as f64 / samples as f64, ci_low: lo, ci_high: hi, samples })
}

/// Enumerates when `#S_n <= cap`, otherwise samples.
pub fn counting_measure(
    graph: &CombingGraph,
    table: &PathCountTable,
    n: usize,
    cap: u64,
    samples: u64,
    rng: &CounterRng,
    predicate: impl Fn(&GraphPath) -> bool,
) -> Result<MeasureValue> {
    if table.sphere(n) <= &BigUint::from(cap) {
        counting_measure_exact(graph, n, cap, predicate).map(MeasureValue::Exact)
    } else {
        counting_measure_sampled(graph, table, n, samples, rng, predicate)
    }
}

// ---------------------------------------------------------------------------
// Growth classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexClass {
    Maximal,
    Large,
    Small,
}

/// SCC decomposition with per-component spectral radii and the induced
/// maximal / large / small classification of vertices.
#[derive(Clone, Debug)]
pub struct GrowthClassification {
    pub scc_of: Vec<usize>,
    pub sccs: Vec<Vec<VertexId>>,
    /// Condensation DAG: for each SCC, the distinct successor SCCs.
    pub condensation: Vec<Vec<usize>>,
    pub nontrivial: Vec<bool>,
    pub scc_radius: Vec<f64>,
    pub lambda: f64,
    /// Set when the Collatz-Wielandt bounds collapse onto an integer.
    pub lambda_exact: Option<u64>,
    pub maximal_scc: Vec<bool>,
    pub class: Vec<VertexClass>,
    pub iterations: usize,
}

impl GrowthClassification {
    pub fn is_exponential(&self) -> bool {
        self.lambda > 1.0 + SPECTRAL_REL_TOL
    }

    pub fn is_large(&self, v: VertexId) -> bool {
        self.class[v] != VertexClass::Small
    }

    pub fn maximal_scc_ids(&self) -> Vec<usize> {
        (0..self.sccs.len()).filter(|&c| self.maximal_scc[c]).collect()
    }
}

/// Iterative Tarjan SCC. Components are returned in reverse topological
/// order (every edge goes from a later component to an earlier one).
pub fn tarjan_scc(adj: &[Vec<(usize, u64)>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next_index = 0;

    // Explicit DFS frames: (vertex, next child position).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root, 0));
        while let Some(&(v, child)) = frames.last() {
            if child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if child < adj[v].len() {
                frames.last_mut().unwrap().1 += 1;
                let w = adj[v][child].0;
                if index[w] == usize::MAX {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    comps
}

/// Spectral radius of a nonnegative integer matrix given by adjacency rows,
/// assumed irreducible (one SCC). Power iteration runs on `A + I`, which is
/// primitive whenever `A` is irreducible, so the Collatz-Wielandt bounds
/// tighten geometrically regardless of the period of `A`.
pub fn irreducible_spectral_radius(rows: &[Vec<(usize, u64)>]) -> Result<(f64, Option<u64>, usize)> {
    let n = rows.len();
    if n == 0 {
        return Ok((0.0, Some(0), 0));
    }
    if rows.iter().all(|r| r.is_empty()) {
        return Ok((0.0, Some(0), 0));
    }
    let mut x = vec![1.0f64; n];
    let mut y = vec![0.0f64; n];
    for iter in 1..=SPECTRAL_MAX_ITERS {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..n {
            let mut acc = x[i]; // the +I shift
            for &(j, m) in &rows[i] {
                acc += m as f64 * x[j];
            }
            y[i] = acc;
            let ratio = acc / x[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        let norm = y.iter().cloned().fold(0.0f64, f64::max);
        for (xi, yi) in x.iter_mut().zip(y.iter()) {
            *xi = yi / norm;
        }
        if hi - lo <= SPECTRAL_REL_TOL * hi {
            let lambda = (lo + hi) / 2.0 - 1.0;
            let rounded = lambda.round();
            let exact = if (hi - lo) == 0.0 && (lambda - rounded).abs() < 1e-12 && rounded >= 0.0 {
                Some(rounded as u64)
            } else {
                None
            };
            return Ok((lambda, exact, iter));
        }
    }
    Err(Error::NonConvergence(SPECTRAL_MAX_ITERS))
}

pub fn classify_growth(graph: &CombingGraph) -> Result<GrowthClassification> {
    graph.require_valid()?;
    let adj = graph.adjacency();
    let n = graph.vertex_count();
    let sccs = tarjan_scc(&adj);
    let mut scc_of = vec![0usize; n];
    for (cid, comp) in sccs.iter().enumerate() {
        for &v in comp {
            scc_of[v] = cid;
        }
    }

    let mut condensation = vec![Vec::new(); sccs.len()];
    for v in 0..n {
        for &(w, _) in &adj[v] {
            let (cv, cw) = (scc_of[v], scc_of[w]);
            if cv != cw {
                condensation[cv].push(cw);
            }
        }
    }
    for row in &mut condensation {
        row.sort_unstable();
        row.dedup();
    }

    let mut nontrivial = vec![false; sccs.len()];
    let mut scc_radius = vec![0.0f64; sccs.len()];
    let mut scc_exact = vec![None; sccs.len()];
    let mut iterations = 0usize;
    for (cid, comp) in sccs.iter().enumerate() {
        let has_cycle = comp.len() > 1
            || adj[comp[0]].iter().any(|&(w, _)| w == comp[0]);
        nontrivial[cid] = has_cycle;
        if !has_cycle {
            scc_radius[cid] = 0.0;
            scc_exact[cid] = Some(0);
            continue;
        }
        let pos: std::collections::HashMap<usize, usize> =
            comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let rows: Vec<Vec<(usize, u64)>> = comp
            .iter()
            .map(|&v| {
                adj[v]
                    .iter()
                    .filter_map(|&(w, m)| pos.get(&w).map(|&j| (j, m)))
                    .collect()
            })
            .collect();
        let (radius, exact, iters) = irreducible_spectral_radius(&rows)?;
        scc_radius[cid] = radius;
        scc_exact[cid] = exact;
        iterations = iterations.max(iters);
    }

    let lambda = scc_radius.iter().cloned().fold(0.0f64, f64::max);
    let lambda_exact = scc_radius
        .iter()
        .zip(&scc_exact)
        .filter(|(r, _)| **r >= lambda * (1.0 - SPECTRAL_REL_TOL))
        .map(|(_, e)| *e)
        .try_fold(None::<u64>, |best, e| {
            e.map(|val| Some(best.map_or(val, |b: u64| b.max(val))))
        })
        .flatten();

    let maximal_scc: Vec<bool> = scc_radius
        .iter()
        .map(|&r| r >= lambda * (1.0 - SPECTRAL_REL_TOL) && lambda > 0.0)
        .collect();

    // A vertex is large iff its SCC reaches a maximal SCC in the condensation.
    let mut reaches = maximal_scc.clone();
    // Tarjan order is reverse topological: successors appear before their
    // predecessors, so one forward pass suffices.
    for cid in 0..sccs.len() {
        if !reaches[cid] {
            reaches[cid] = condensation[cid].iter().any(|&succ| reaches[succ]);
        }
    }
    let class: Vec<VertexClass> = (0..n)
        .map(|v| {
            let cid = scc_of[v];
            if maximal_scc[cid] {
                VertexClass::Maximal
            } else if reaches[cid] {
                VertexClass::Large
            } else {
                VertexClass::Small
            }
        })
        .collect();

    Ok(GrowthClassification {
        scc_of,
        sccs,
        condensation,
        nontrivial,
        scc_radius,
        lambda,
        lambda_exact,
        maximal_scc,
        class,
        iterations,
    })
}

/// Period of an SCC: gcd of `depth(u) + 1 - depth(v)` over internal edges
/// `u -> v`, depths from a BFS tree. This is the gcd of all cycle lengths.
pub fn scc_period(adj: &[Vec<(usize, u64)>], comp: &[usize]) -> usize {
    use num_integer::Integer;
    let pos: std::collections::HashMap<usize, usize> =
        comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut depth = vec![i64::MIN; comp.len()];
    depth[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    let mut g: i64 = 0;
    while let Some(i) = queue.pop_front() {
        let v = comp[i];
        for &(w, _) in &adj[v] {
            let Some(&j) = pos.get(&w) else { continue };
            if depth[j] == i64::MIN {
                depth[j] = depth[i] + 1;
                queue.push_back(j);
            } else {
                g = g.gcd(&(depth[i] + 1 - depth[j]));
            }
        }
    }
    g.unsigned_abs() as usize
}

/// True iff exactly one SCC contains a cycle; the witness is that SCC's id.
/// A recurrent combing automaton has this shape, which certifies thickness.
#[derive(Clone, Debug)]
pub struct ThicknessCertificate {
    pub thick: bool,
    pub witness: Option<usize>,
    pub nontrivial_count: usize,
}

pub fn single_nontrivial_component_certificate(graph: &CombingGraph) -> Result<ThicknessCertificate> {
    let class = classify_growth(graph)?;
    let ids: Vec<usize> = (0..class.sccs.len()).filter(|&c| class.nontrivial[c]).collect();
    Ok(ThicknessCertificate {
        thick: ids.len() == 1,
        witness: if ids.len() == 1 { Some(ids[0]) } else { None },
        nontrivial_count: ids.len(),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
