//! Exact arithmetic in graph products of groups.
//!
//! Elements are kept in a canonical syllable normal form (the leftmost-greedy
//! pile: every syllable is moved as far left as commutation allows, with ties
//! broken by the vertex order), which makes equality, hashing, word length,
//! and sphere enumeration exact. This module is deliberately independent of
//! the combing automata: it is the oracle they are verified against.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Combinatorial guard for `ball_elements`.
pub const MAX_BALL_RADIUS: u64 = 4;
/// Default cap on BFS sphere enumeration (total elements).
pub const DEFAULT_SPHERE_CAP: u64 = 10_000_000;

// ---------------------------------------------------------------------------
// Vertex groups
// ---------------------------------------------------------------------------

/// A finite group given by its multiplication table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    pub table: Vec<Vec<usize>>,
    pub identity: usize,
    /// Generating subset, closed under inverse.
    pub generators: Vec<usize>,
    inverse: Vec<usize>,
    /// Geodesic length of each element over `generators` (BFS distance).
    geodesic_len: Vec<u32>,
}

impl FiniteGroup {
    pub fn new(table: Vec<Vec<usize>>, identity: usize, generators: Vec<usize>) -> Result<Self> {
        let n = table.len();
        let fail = |msg: String| Err(Error::InvalidPresentation(msg));
        if n == 0 {
            return fail("empty multiplication table".into());
        }
        if table.iter().any(|row| row.len() != n || row.iter().any(|&x| x >= n)) {
            return fail("multiplication table is not square over 0..n".into());
        }
        if identity >= n {
            return fail("identity index out of range".into());
        }
        for g in 0..n {
            if table[identity][g] != g || table[g][identity] != g {
                return fail(format!("element {identity} is not a two-sided identity"));
            }
        }
        // Associativity; tables are small, cubic cost is fine.
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return fail(format!("table is not associative at ({a},{b},{c})"));
                    }
                }
            }
        }
        let mut inverse = vec![usize::MAX; n];
        for a in 0..n {
            for b in 0..n {
                if table[a][b] == identity && table[b][a] == identity {
                    inverse[a] = b;
                }
            }
            if inverse[a] == usize::MAX {
                return fail(format!("element {a} has no two-sided inverse"));
            }
        }
        let mut generators = generators;
        generators.sort_unstable();
        generators.dedup();
        if generators.iter().any(|&g| g >= n || g == identity) {
            return fail("generators must be non-identity elements".into());
        }
        for &g in &generators {
            if generators.binary_search(&inverse[g]).is_err() {
                return fail(format!("generator set is not closed under inverse (element {g})"));
            }
        }
        // Geodesic lengths by BFS; the generators must generate.
        let mut geodesic_len = vec![u32::MAX; n];
        geodesic_len[identity] = 0;
        let mut queue = VecDeque::from([identity]);
        while let Some(g) = queue.pop_front() {
            for &s in &generators {
                let h = table[g][s];
                if geodesic_len[h] == u32::MAX {
                    geodesic_len[h] = geodesic_len[g] + 1;
                    queue.push_back(h);
                }
            }
        }
        if geodesic_len.contains(&u32::MAX) {
            return fail("declared generators do not generate the group".into());
        }
        Ok(FiniteGroup { table, identity, generators, inverse, geodesic_len })
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn len_of(&self, a: usize) -> u32 {
        self.geodesic_len[a]
    }

    /// Z/2: the one-generator involution group.
    pub fn z2() -> Self {
        FiniteGroup::new(vec![vec![0, 1], vec![1, 0]], 0, vec![1]).unwrap()
    }

    /// Cyclic group of order `m` generated by `{1, m-1}`.
    pub fn cyclic(m: usize) -> Self {
        let table = (0..m).map(|a| (0..m).map(|b| (a + b) % m).collect()).collect();
        let generators = if m == 2 { vec![1] } else { vec![1, m - 1] };
        FiniteGroup::new(table, 0, generators).unwrap()
    }

    /// The symmetric group S3 generated by the two adjacent transpositions.
    /// Elements are indexed as permutations of {0,1,2} in lexicographic
    /// order: 012, 021, 102, 120, 201, 210.
    pub fn s3() -> Self {
        let perms: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let index = |p: [usize; 3]| perms.iter().position(|&q| q == p).unwrap();
        let mut table = vec![vec![0; 6]; 6];
        for (i, p) in perms.iter().enumerate() {
            for (j, q) in perms.iter().enumerate() {
                // (p * q)(x) = p(q(x))
                table[i][j] = index([p[q[0]], p[q[1]], p[q[2]]]);
            }
        }
        let swap01 = index([1, 0, 2]);
        let swap12 = index([0, 2, 1]);
        FiniteGroup::new(table, 0, vec![swap01, swap12]).unwrap()
    }
}

/// The group sitting at a vertex of the presentation graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexGroup {
    /// The integers, generated by `t` and `t^-1`.
    Integers,
    Finite(FiniteGroup),
}

impl VertexGroup {
    pub fn is_z2_like(&self) -> bool {
        match self {
            VertexGroup::Integers => false,
            VertexGroup::Finite(f) => f.order() == 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Presentation graphs
// ---------------------------------------------------------------------------

/// The defining data of a graph product: a finite simplicial graph with a
/// group attached to each vertex. Adjacent vertex groups commute.
#[derive(Clone, Debug)]
pub struct PresentationGraph {
    names: Vec<String>,
    groups: Vec<VertexGroup>,
    adj: Vec<Vec<bool>>,
}

impl PresentationGraph {
    pub fn new(
        names: Vec<String>,
        groups: Vec<VertexGroup>,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        if names.len() != groups.len() {
            return Err(Error::InvalidPresentation("names/groups length mismatch".into()));
        }
        {
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != names.len() {
                return Err(Error::InvalidPresentation("duplicate vertex names".into()));
            }
        }
        let n = names.len();
        let mut adj = vec![vec![false; n]; n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidPresentation("edge endpoint out of range".into()));
            }
            if u == v {
                return Err(Error::InvalidPresentation("loops are not allowed".into()));
            }
            adj[u][v] = true;
            adj[v][u] = true;
        }
        Ok(PresentationGraph { names, groups, adj })
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn group(&self, v: usize) -> &VertexGroup {
        &self.groups[v]
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u][v]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.vertex_count();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if self.adj[u][v] {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// The identity element.
    pub fn one(&self) -> GpElement {
        GpElement { syllables: Vec::new() }
    }

    /// Induced sub-presentation on `keep` (order preserved).
    pub fn induced(&self, keep: &[usize]) -> Result<PresentationGraph> {
        let names = keep.iter().map(|&v| self.names[v].clone()).collect();
        let groups = keep.iter().map(|&v| self.groups[v].clone()).collect();
        let mut edges = Vec::new();
        for (i, &u) in keep.iter().enumerate() {
            for (j, &v) in keep.iter().enumerate().skip(i + 1) {
                if self.adj[u][v] {
                    edges.push((i, j));
                }
            }
        }
        PresentationGraph::new(names, groups, &edges)
    }

    /// Connected components of the complement graph. One component means the
    /// presentation is anticonnected; in general the components are the join
    /// factors of the graph product.
    pub fn complement_components(&self) -> Vec<Vec<usize>> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for v in 0..n {
                    if v != u && !self.adj[u][v] && !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

// ---------------------------------------------------------------------------
// Elements and the normal form
// ---------------------------------------------------------------------------

/// A nontrivial vertex-group element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SylElem {
    /// Nonzero exponent of the Z generator.
    Int(i64),
    /// Non-identity element index of a finite vertex group.
    Fin(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Syllable {
    pub vertex: u32,
    pub elem: SylElem,
}

/// A graph-product element in canonical syllable normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct GpElement {
    syllables: Vec<Syllable>,
}

impl GpElement {
    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }
}

impl PresentationGraph {
    fn vertex_group_mul(&self, v: u32, a: SylElem, b: SylElem) -> Result<Option<SylElem>> {
        match (&self.groups[v as usize], a, b) {
            (VertexGroup::Integers, SylElem::Int(x), SylElem::Int(y)) => {
                let sum = x.checked_add(y).ok_or(Error::ExponentOverflow)?;
                if sum == i64::MIN {
                    return Err(Error::ExponentOverflow); // negation must stay representable
                }
                Ok((sum != 0).then_some(SylElem::Int(sum)))
            }
            (VertexGroup::Finite(f), SylElem::Fin(x), SylElem::Fin(y)) => {
                let prod = f.mul(x, y);
                Ok((prod != f.identity).then_some(SylElem::Fin(prod)))
            }
            _ => Err(Error::InvalidPresentation("syllable does not match its vertex group".into())),
        }
    }

    fn vertex_group_inv(&self, v: u32, a: SylElem) -> SylElem {
        match (&self.groups[v as usize], a) {
            (VertexGroup::Integers, SylElem::Int(x)) => SylElem::Int(-x),
            (VertexGroup::Finite(f), SylElem::Fin(x)) => SylElem::Fin(f.inv(x)),
            _ => unreachable!("syllable does not match its vertex group"),
        }
    }

    fn syllable_is_identity(&self, v: u32, a: SylElem) -> bool {
        match (&self.groups[v as usize], a) {
            (VertexGroup::Integers, SylElem::Int(x)) => x == 0,
            (VertexGroup::Finite(f), SylElem::Fin(x)) => x == f.identity,
            _ => false,
        }
    }

    /// Appends one syllable to a normal form, keeping it normal. Returns
    /// `true` if a cancellation removed a syllable (the caller then reruns
    /// the pile pass, since a removal may expose further merges or let
    /// later syllables slide left).
    fn push_syllable(&self, out: &mut Vec<Syllable>, syl: Syllable) -> Result<bool> {
        if self.syllable_is_identity(syl.vertex, syl.elem) {
            return Ok(false);
        }
        if syl.elem == SylElem::Int(i64::MIN) {
            return Err(Error::ExponentOverflow);
        }
        // Scan the maximal suffix commuting with the new syllable.
        let mut j = out.len();
        while j > 0 {
            let s = out[j - 1];
            if s.vertex == syl.vertex {
                match self.vertex_group_mul(syl.vertex, s.elem, syl.elem)? {
                    Some(merged) => out[j - 1].elem = merged,
                    None => {
                        out.remove(j - 1);
                        return Ok(true);
                    }
                }
                return Ok(false);
            } else if self.adjacent(s.vertex as usize, syl.vertex as usize) {
                j -= 1;
            } else {
                break;
            }
        }
        // No merge partner. Every position in [j, len] is legal; the
        // lexicographically least result puts the new syllable right before
        // the first window syllable on a larger vertex.
        let mut k = j;
        while k < out.len() && out[k].vertex < syl.vertex {
            k += 1;
        }
        out.insert(k, syl);
        Ok(false)
    }

    /// Canonical normal form of an arbitrary syllable word.
    pub fn normal_form(&self, word: impl IntoIterator<Item = Syllable>) -> Result<GpElement> {
        let mut current: Vec<Syllable> = word.into_iter().collect();
        loop {
            let mut next = Vec::with_capacity(current.len());
            let mut cancelled = false;
            for syl in current.drain(..) {
                cancelled |= self.push_syllable(&mut next, syl)?;
            }
            if !cancelled {
                return Ok(GpElement { syllables: next });
            }
            current = next;
        }
    }

    pub fn multiply(&self, a: &GpElement, b: &GpElement) -> Result<GpElement> {
        self.normal_form(a.syllables.iter().chain(b.syllables.iter()).copied())
    }

    pub fn invert(&self, a: &GpElement) -> Result<GpElement> {
        self.normal_form(
            a.syllables
                .iter()
                .rev()
                .map(|s| Syllable { vertex: s.vertex, elem: self.vertex_group_inv(s.vertex, s.elem) }),
        )
    }

    /// Word length for the standard generating set: the sum of the geodesic
    /// lengths of the syllables in their vertex groups.
    pub fn word_length(&self, a: &GpElement) -> u64 {
        a.syllables
            .iter()
            .map(|s| match (&self.groups[s.vertex as usize], s.elem) {
                (VertexGroup::Integers, SylElem::Int(x)) => x.unsigned_abs(),
                (VertexGroup::Finite(f), SylElem::Fin(x)) => f.len_of(x) as u64,
                _ => unreachable!(),
            })
            .sum()
    }

    pub fn syllable(&self, vertex: usize, elem: SylElem) -> Result<GpElement> {
        self.normal_form([Syllable { vertex: vertex as u32, elem }])
    }
}

// ---------------------------------------------------------------------------
// Standard generators
// ---------------------------------------------------------------------------

/// A standard generator: a token name plus the syllable it evaluates to.
#[derive(Clone, Debug)]
pub struct Generator {
    pub token: String,
    pub vertex: usize,
    pub elem: SylElem,
}

impl PresentationGraph {
    /// The standard generating set `S`, the union of the vertex-group
    /// generators. Token naming: a Z vertex `x` contributes `x` and `x^-1`;
    /// a finite vertex with a single involution generator contributes the
    /// bare vertex name; other finite generators get `x.<k>` (with `^-1`
    /// marking the inverse of a non-involution).
    pub fn standard_generators(&self) -> Vec<Generator> {
        let mut gens = Vec::new();
        for (v, group) in self.groups.iter().enumerate() {
            let name = &self.names[v];
            match group {
                VertexGroup::Integers => {
                    gens.push(Generator { token: name.clone(), vertex: v, elem: SylElem::Int(1) });
                    gens.push(Generator {
                        token: format!("{name}^-1"),
                        vertex: v,
                        elem: SylElem::Int(-1),
                    });
                }
                VertexGroup::Finite(f) => {
                    let single_involution =
                        f.generators.len() == 1 && f.inv(f.generators[0]) == f.generators[0];
                    for &g in &f.generators {
                        let token = if single_involution {
                            name.clone()
                        } else if f.inv(g) == g || g < f.inv(g) {
                            format!("{name}.{g}")
                        } else {
                            format!("{name}.{}^-1", f.inv(g))
                        };
                        gens.push(Generator { token, vertex: v, elem: SylElem::Fin(g) });
                    }
                }
            }
        }
        gens
    }

    pub fn generator_by_token(&self, token: &str) -> Option<Generator> {
        self.standard_generators().into_iter().find(|g| g.token == token)
    }

    /// Evaluates a token word to a group element.
    pub fn evaluate_word(&self, tokens: &[String]) -> Result<GpElement> {
        let gens = self.standard_generators();
        let mut syls = Vec::with_capacity(tokens.len());
        for t in tokens {
            let g = gens
                .iter()
                .find(|g| &g.token == t)
                .ok_or_else(|| Error::InvalidPresentation(format!("unknown token `{t}`")))?;
            syls.push(Syllable { vertex: g.vertex as u32, elem: g.elem });
        }
        self.normal_form(syls)
    }
}

// ---------------------------------------------------------------------------
// BFS oracle
// ---------------------------------------------------------------------------

/// Exact spheres of the Cayley graph of the graph product, computed by BFS
/// over canonical forms. Independent of any combing automaton.
#[derive(Clone, Debug)]
pub struct SphereOracle {
    pub spheres: Vec<Vec<GpElement>>,
}

impl SphereOracle {
    pub fn sphere(&self, n: usize) -> &[GpElement] {
        &self.spheres[n]
    }

    pub fn sphere_sizes(&self) -> Vec<usize> {
        self.spheres.iter().map(|s| s.len()).collect()
    }

    pub fn ball_size(&self, n: usize) -> usize {
        self.spheres[..=n].iter().map(|s| s.len()).sum()
    }
}

pub fn bfs_sphere_oracle(p: &PresentationGraph, n_max: usize, cap: u64) -> Result<SphereOracle> {
    let gens = p.standard_generators();
    let mut seen: HashMap<GpElement, u32> = HashMap::new();
    let mut spheres: Vec<Vec<GpElement>> = vec![vec![p.one()]];
    seen.insert(p.one(), 0);
    let mut total: u64 = 1;
    for n in 1..=n_max {
        let mut next = Vec::new();
        let parents = std::mem::take(&mut spheres[n - 1]);
        for g in &parents {
            for gen in &gens {
                let h = p.multiply(
                    g,
                    &GpElement {
                        syllables: vec![Syllable { vertex: gen.vertex as u32, elem: gen.elem }],
                    },
                )?;
                if !seen.contains_key(&h) {
                    seen.insert(h.clone(), n as u32);
                    next.push(h);
                    total += 1;
                    if total > cap {
                        return Err(Error::EnumerationCap { count: format!(">{cap}"), cap });
                    }
                }
            }
        }
        spheres[n - 1] = parents;
        spheres.push(next);
    }
    Ok(SphereOracle { spheres })
}

/// All elements of the ball of radius `c`; guarded combinatorially.
pub fn ball_elements(p: &PresentationGraph, c: u64) -> Result<Vec<GpElement>> {
    if c > MAX_BALL_RADIUS {
        return Err(Error::BallRadius(c, MAX_BALL_RADIUS));
    }
    let oracle = bfs_sphere_oracle(p, c as usize, DEFAULT_SPHERE_CAP)?;
    Ok(oracle.spheres.into_iter().flatten().collect())
}

// ---------------------------------------------------------------------------
// Projections (kill all vertex groups outside a kept set)
// ---------------------------------------------------------------------------

/// The homomorphism `G(Lambda) -> G(Lambda[keep])` that kills every vertex
/// group outside `keep`. For a non-adjacent pair this is the quotient onto
/// the free product of the two surviving vertex groups.
#[derive(Clone, Debug)]
pub struct VertexSpanProjection {
    pub keep: Vec<usize>,
    pub target: PresentationGraph,
    index_of: Vec<Option<u32>>,
}

impl VertexSpanProjection {
    pub fn apply(&self, g: &GpElement) -> Result<GpElement> {
        self.target.normal_form(g.syllables().iter().filter_map(|s| {
            self.index_of[s.vertex as usize]
                .map(|v| Syllable { vertex: v, elem: s.elem })
        }))
    }
}

pub fn kill_except(p: &PresentationGraph, keep: &[usize]) -> Result<VertexSpanProjection> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&v| v >= p.vertex_count()) {
        return Err(Error::InvalidPresentation("kept vertex out of range".into()));
    }
    let target = p.induced(&keep)?;
    let mut index_of = vec![None; p.vertex_count()];
    for (i, &v) in keep.iter().enumerate() {
        index_of[v] = Some(i as u32);
    }
    Ok(VertexSpanProjection { keep, target, index_of })
}

/// The quotient onto the free product of two non-adjacent vertex groups.
pub fn quotient_to_free(p: &PresentationGraph, pair: (usize, usize)) -> Result<VertexSpanProjection> {
    let (u, v) = pair;
    if u == v || p.adjacent(u, v) {
        return Err(Error::AdjacentPair(p.name(u).to_string(), p.name(v).to_string()));
    }
    kill_except(p, &[u, v])
}

// ---------------------------------------------------------------------------
// Serialization (external JSON schema)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GroupFile {
    Z(String),
    Finite { table: Vec<Vec<usize>>, identity: usize, generators: Vec<usize> },
}

#[derive(Serialize, Deserialize)]
struct VertexFile {
    name: String,
    group: GroupFile,
}

#[derive(Serialize, Deserialize)]
struct PresentationFile {
    vertices: Vec<VertexFile>,
    edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<String>>,
}

impl PresentationGraph {
    pub fn to_json(&self) -> serde_json::Value {
        let file = PresentationFile {
            vertices: self
                .names
                .iter()
                .zip(&self.groups)
                .map(|(name, group)| VertexFile {
                    name: name.clone(),
                    group: match group {
                        VertexGroup::Integers => GroupFile::Z("Z".into()),
                        VertexGroup::Finite(f) => GroupFile::Finite {
                            table: f.table.clone(),
                            identity: f.identity,
                            generators: f.generators.clone(),
                        },
                    },
                })
                .collect(),
            edges: self
                .edges()
                .iter()
                .map(|&(u, v)| (self.names[u].clone(), self.names[v].clone()))
                .collect(),
            order: None,
        };
        serde_json::to_value(file).expect("presentation serialization")
    }

    /// Parses the JSON schema; returns the presentation and the declared
    /// vertex order (defaulting to the vertex list order).
    pub fn from_json(value: &serde_json::Value) -> Result<(Self, Vec<String>)> {
        let file: PresentationFile = serde_json::from_value(value.clone())?;
        let names: Vec<String> = file.vertices.iter().map(|v| v.name.clone()).collect();
        let mut groups = Vec::new();
        for v in &file.vertices {
            groups.push(match &v.group {
                GroupFile::Z(tag) if tag == "Z" => VertexGroup::Integers,
                GroupFile::Z(tag) => {
                    return Err(Error::InvalidPresentation(format!("unknown group tag `{tag}`")))
                }
                GroupFile::Finite { table, identity, generators } => VertexGroup::Finite(
                    FiniteGroup::new(table.clone(), *identity, generators.clone())?,
                ),
            });
        }
        let mut edges = Vec::new();
        for (a, b) in &file.edges {
            let find = |n: &str| {
                names
                    .iter()
                    .position(|x| x == n)
                    .ok_or_else(|| Error::InvalidPresentation(format!("unknown vertex `{n}`")))
            };
            edges.push((find(a)?, find(b)?));
        }
        let p = PresentationGraph::new(names.clone(), groups, &edges)?;
        let order = file.order.unwrap_or(names);
        Ok((p, order))
    }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

impl PresentationGraph {
    fn letter_names(k: usize) -> Vec<String> {
        (0..k).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
    }

    /// Free group of rank `k`: edgeless graph of Z vertices.
    pub fn free_group(k: usize) -> Self {
        PresentationGraph::new(Self::letter_names(k), vec![VertexGroup::Integers; k], &[]).unwrap()
    }

    /// Right-angled Artin group on the path a-b-c-...
    pub fn raag_path(k: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..k.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        PresentationGraph::new(Self::letter_names(k), vec![VertexGroup::Integers; k], &edges)
            .unwrap()
    }

    /// Right-angled Artin group on the k-cycle.
    pub fn raag_cycle(k: usize) -> Self {
        let mut edges: Vec<(usize, usize)> = (0..k - 1).map(|i| (i, i + 1)).collect();
        edges.push((k - 1, 0));
        PresentationGraph::new(Self::letter_names(k), vec![VertexGroup::Integers; k], &edges)
            .unwrap()
    }

    /// Right-angled Coxeter group on the k-cycle.
    pub fn racg_cycle(k: usize) -> Self {
        let mut edges: Vec<(usize, usize)> = (0..k - 1).map(|i| (i, i + 1)).collect();
        edges.push((k - 1, 0));
        PresentationGraph::new(
            Self::letter_names(k),
            vec![VertexGroup::Finite(FiniteGroup::z2()); k],
            &edges,
        )
        .unwrap()
    }

    /// Free product of `k` copies of Z/2.
    pub fn free_product_z2(k: usize) -> Self {
        PresentationGraph::new(
            Self::letter_names(k),
            vec![VertexGroup::Finite(FiniteGroup::z2()); k],
            &[],
        )
        .unwrap()
    }

    /// F_m x F_n as the RAAG on the complete bipartite graph K_{m,n}.
    pub fn raag_complete_bipartite(m: usize, n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..m {
            for j in 0..n {
                edges.push((i, m + j));
            }
        }
        PresentationGraph::new(
            Self::letter_names(m + n),
            vec![VertexGroup::Integers; m + n],
            &edges,
        )
        .unwrap()
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn random_element(p: &PresentationGraph, rng: &mut CounterRng, len: usize) -> GpElement {
        let gens = p.standard_generators();
        let mut acc = p.one();
        for _ in 0..len {
            let g = &gens[rng.next_below(gens.len() as u64) as usize];
            let s = p.syllable(g.vertex, g.elem).unwrap();
            acc = p.multiply(&acc, &s).unwrap();
        }
        acc
    }

    #[test]
    fn identity_and_inverses() {
        let p = PresentationGraph::raag_path(4);
        let mut rng = CounterRng::new(3);
        for i in 0..200 {
            let g = random_element(&p, &mut rng, (i % 12) as usize);
            let gi = p.invert(&g).unwrap();
            assert!(p.multiply(&g, &gi).unwrap().is_identity());
            assert_eq!(p.invert(&gi).unwrap(), g);
        }
    }

    #[test]
    fn defining_relations() {
        // In A(P4) with edge a-b: ab = ba; with non-edge a-c: ac != ca.
        let p = PresentationGraph::raag_path(4);
        let a = p.syllable(0, SylElem::Int(1)).unwrap();
        let b = p.syllable(1, SylElem::Int(1)).unwrap();
        let c = p.syllable(2, SylElem::Int(1)).unwrap();
        assert_eq!(p.multiply(&a, &b).unwrap(), p.multiply(&b, &a).unwrap());
        assert_ne!(p.multiply(&a, &c).unwrap(), p.multiply(&c, &a).unwrap());
    }

    #[test]
    fn associativity_randomized() {
        let p = PresentationGraph::raag_cycle(5);
        let mut rng = CounterRng::new(9);
        for _ in 0..10_000 {
            let a = random_element(&p, &mut rng, 4);
            let b = random_element(&p, &mut rng, 4);
            let c = random_element(&p, &mut rng, 4);
            let ab_c = p.multiply(&p.multiply(&a, &b).unwrap(), &c).unwrap();
            let a_bc = p.multiply(&a, &p.multiply(&b, &c).unwrap()).unwrap();
            assert_eq!(ab_c, a_bc);
        }
    }

    #[test]
    fn normal_form_confluence_under_shuffles() {
        // Normalizing any shuffle-equivalent spelling yields the same form.
        let p = PresentationGraph::raag_path(4);
        let mut rng = CounterRng::new(17);
        for _ in 0..10_000 {
            let g = random_element(&p, &mut rng, 10);
            let mut word: Vec<Syllable> = g.syllables().to_vec();
            // Apply random legal adjacent swaps and random syllable splits.
            for _ in 0..12 {
                if word.len() >= 2 {
                    let i = rng.next_below((word.len() - 1) as u64) as usize;
                    if word[i].vertex != word[i + 1].vertex
                        && p.adjacent(word[i].vertex as usize, word[i + 1].vertex as usize)
                    {
                        word.swap(i, i + 1);
                    }
                }
                if !word.is_empty() {
                    let i = rng.next_below(word.len() as u64) as usize;
                    if let SylElem::Int(x) = word[i].elem {
                        if x.abs() > 1 {
                            let v = word[i].vertex;
                            word[i].elem = SylElem::Int(x - x.signum());
                            word.insert(i + 1, Syllable { vertex: v, elem: SylElem::Int(x.signum()) });
                        }
                    }
                }
            }
            assert_eq!(p.normal_form(word).unwrap(), g);
        }
    }

    #[test]
    fn word_length_properties() {
        let p = PresentationGraph::raag_path(4);
        assert_eq!(p.word_length(&p.one()), 0);
        let a3 = p.syllable(0, SylElem::Int(-3)).unwrap();
        assert_eq!(p.word_length(&a3), 3);
        let mut rng = CounterRng::new(23);
        for _ in 0..5_000 {
            let g = random_element(&p, &mut rng, 6);
            let h = random_element(&p, &mut rng, 6);
            let gh = p.multiply(&g, &h).unwrap();
            assert!(p.word_length(&gh) <= p.word_length(&g) + p.word_length(&h));
        }
    }

    #[test]
    fn free_group_spheres() {
        let p = PresentationGraph::free_group(2);
        let oracle = bfs_sphere_oracle(&p, 3, 100_000).unwrap();
        assert_eq!(oracle.sphere_sizes(), vec![1, 4, 12, 36]);
    }

    #[test]
    fn product_spheres_are_convolutions() {
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let oracle = bfs_sphere_oracle(&p, 2, 100_000).unwrap();
        assert_eq!(oracle.sphere(1).len(), 10);
        assert_eq!(oracle.sphere(2).len(), 66); // 12*1 + 4*6 + 1*30
    }

    #[test]
    fn word_length_matches_bfs_distance() {
        for p in [
            PresentationGraph::raag_path(4),
            PresentationGraph::free_product_z2(3),
            PresentationGraph::racg_cycle(5),
        ] {
            let oracle = bfs_sphere_oracle(&p, 6, 1_000_000).unwrap();
            for (n, sphere) in oracle.spheres.iter().enumerate() {
                for g in sphere {
                    assert_eq!(p.word_length(g), n as u64);
                }
            }
        }
    }

    #[test]
    fn free_reduction_matches_on_edgeless_graph() {
        // On an edgeless Z graph the product is free: the normal form of a
        // random spelling is the free reduction.
        let p = PresentationGraph::free_group(2);
        let mut rng = CounterRng::new(4);
        for _ in 0..2_000 {
            let g = random_element(&p, &mut rng, 12);
            let total: u64 = g
                .syllables()
                .iter()
                .map(|s| match s.elem {
                    SylElem::Int(x) => x.unsigned_abs(),
                    _ => 0,
                })
                .sum();
            assert_eq!(p.word_length(&g), total);
            // Adjacent syllables never share a vertex in a free product.
            for w in g.syllables().windows(2) {
                assert_ne!(w[0].vertex, w[1].vertex);
            }
        }
    }

    #[test]
    fn quotient_kills_middle_vertices() {
        let p = PresentationGraph::raag_path(4);
        let proj = quotient_to_free(&p, (0, 3)).unwrap();
        // phi(a b d) = a d in the free group on {a, d}.
        let abd = p.evaluate_word(&["a".into(), "b".into(), "d".into()]).unwrap();
        let image = proj.apply(&abd).unwrap();
        let expect = proj.target.evaluate_word(&["a".into(), "d".into()]).unwrap();
        assert_eq!(image, expect);
        // phi(b) = identity.
        let b = p.syllable(1, SylElem::Int(1)).unwrap();
        assert!(proj.apply(&b).unwrap().is_identity());
    }

    #[test]
    fn quotient_rejects_adjacent_pair() {
        let p = PresentationGraph::raag_path(4);
        assert!(matches!(quotient_to_free(&p, (0, 1)), Err(Error::AdjacentPair(..))));
    }

    #[test]
    fn quotient_is_homomorphism_randomized() {
        let p = PresentationGraph::raag_path(4);
        let proj = quotient_to_free(&p, (0, 3)).unwrap();
        let mut rng = CounterRng::new(31);
        for _ in 0..10_000 {
            let g = random_element(&p, &mut rng, 6);
            let h = random_element(&p, &mut rng, 6);
            let lhs = proj.apply(&p.multiply(&g, &h).unwrap()).unwrap();
            let rhs = proj
                .target
                .multiply(&proj.apply(&g).unwrap(), &proj.apply(&h).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn balls_match_oracle_partial_sums() {
        let p = PresentationGraph::free_group(2);
        let ball = ball_elements(&p, 1).unwrap();
        assert_eq!(ball.len(), 5);
        let oracle = bfs_sphere_oracle(&p, 3, 100_000).unwrap();
        let b3 = ball_elements(&p, 3).unwrap();
        assert_eq!(b3.len(), oracle.ball_size(3));
        assert!(matches!(ball_elements(&p, 5), Err(Error::BallRadius(..))));
    }

    #[test]
    fn finite_group_validation() {
        assert!(FiniteGroup::new(vec![vec![0, 1], vec![1, 1]], 0, vec![1]).is_err());
        let s3 = FiniteGroup::s3();
        assert_eq!(s3.order(), 6);
        // Sphere sizes of S3 over two transpositions: 1, 2, 2, 1.
        let p = PresentationGraph::new(
            vec!["s".into()],
            vec![VertexGroup::Finite(s3)],
            &[],
        )
        .unwrap();
        let oracle = bfs_sphere_oracle(&p, 3, 1000).unwrap();
        assert_eq!(oracle.sphere_sizes(), vec![1, 2, 2, 1]);
    }

    #[test]
    fn exponent_overflow_is_an_error() {
        let p = PresentationGraph::free_group(1);
        let big = p.syllable(0, SylElem::Int(i64::MAX)).unwrap();
        let one = p.syllable(0, SylElem::Int(1)).unwrap();
        assert!(matches!(p.multiply(&big, &one), Err(Error::ExponentOverflow)));
    }

    #[test]
    fn complement_components_detect_join_factors() {
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let comps = p.complement_components();
        assert_eq!(comps, vec![vec![0, 1], vec![2, 3, 4]]);
        let q = PresentationGraph::raag_path(4);
        assert_eq!(q.complement_components().len(), 1);
    }

    /// Brute-force confluence oracle: the normal form of every short word
    /// equals the lexicographically least minimal-length member of its
    /// rewriting class (BFS over swaps, merges, cancellations).
    #[test]
    fn normal_form_matches_bruteforce_lexmin() {
        use std::collections::{HashSet, VecDeque};
        let p = PresentationGraph::raag_path(4);
        let neighbors = |w: &Vec<Syllable>| -> Vec<Vec<Syllable>> {
            let mut out = Vec::new();
            for i in 0..w.len().saturating_sub(1) {
                let (x, y) = (w[i], w[i + 1]);
                if x.vertex != y.vertex && p.adjacent(x.vertex as usize, y.vertex as usize) {
                    let mut v = w.clone();
                    v.swap(i, i + 1);
                    out.push(v);
                }
                if x.vertex == y.vertex {
                    let (SylElem::Int(a), SylElem::Int(b)) = (x.elem, y.elem) else { continue };
                    let mut v = w.clone();
                    v.remove(i + 1);
                    if a + b == 0 {
                        v.remove(i);
                    } else {
                        v[i].elem = SylElem::Int(a + b);
                    }
                    out.push(v);
                }
            }
            out
        };
        let gens: Vec<Syllable> = (0..4u32)
            .flat_map(|v| {
                [
                    Syllable { vertex: v, elem: SylElem::Int(1) },
                    Syllable { vertex: v, elem: SylElem::Int(-1) },
                ]
            })
            .collect();
        let mut words: Vec<Vec<Syllable>> = vec![vec![]];
        for _ in 0..4 {
            let mut next = Vec::new();
            for w in &words {
                for &g in &gens {
                    let mut w2 = w.clone();
                    w2.push(g);
                    next.push(w2);
                }
            }
            for w in &next {
                let direct = p.normal_form(w.iter().copied()).unwrap();
                let mut class: HashSet<Vec<Syllable>> = HashSet::new();
                let mut queue = VecDeque::from([w.clone()]);
                class.insert(w.clone());
                while let Some(u) = queue.pop_front() {
                    for v in neighbors(&u) {
                        if class.insert(v.clone()) {
                            queue.push_back(v);
                        }
                    }
                }
                let min_len = class.iter().map(|u| u.len()).min().unwrap();
                let best = class
                    .iter()
                    .filter(|u| u.len() == min_len)
                    .min_by_key(|u| u.iter().map(|s| (s.vertex, s.elem)).collect::<Vec<_>>())
                    .unwrap();
                assert_eq!(direct.syllables(), best.as_slice(), "word {w:?}");
            }
            words = next;
        }
    }

    #[test]
    fn presentation_json_round_trip() {
        let p = PresentationGraph::racg_cycle(5);
        let v = p.to_json();
        let (q, order) = PresentationGraph::from_json(&v).unwrap();
        assert_eq!(q.to_json(), v);
        assert_eq!(order, p.names().to_vec());
    }
}
