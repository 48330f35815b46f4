//! Recurrent geodesic combings for graph products with standard generators.
//!
//! The construction follows the Hermiller-Meier normal-form automaton, in
//! three stages:
//!
//! 1. For an ordered presentation graph and each non-adjacent pair `I > J`,
//!    the `(I, J)`-admissible tree enumerates the words `I J K_1 ... K_r`
//!    with `J < K_1 < ... < K_r` where every `K_i <= I` fails to commute
//!    with some earlier letter.
//! 2. The trees are glued into a letter automaton. The reference gluing
//!    ([`build_racg_header`]) routes increasing words through a header graph
//!    and is not recurrent; the recurrent gluing ([`build_racg_recurrent`])
//!    drops the header and instead starts inside the `(B, A)`-tree of the two
//!    smallest letters, recognizing the same language.
//! 3. [`expand_with_vertex_groups`] substitutes a geodesic combing of each
//!    vertex group for each letter state, producing a combing of the full
//!    graph product over the standard generators.
//!
//! A note on stage 2: gluing the initial vertex to *every* vertex of the
//! `(B, A)`-tree would duplicate labels on its out-edges (the tree repeats
//! letters across branches), so the initial vertex instead copies the
//! out-edges of the tree root and of its `A`-child. Those are exactly the
//! entry points the increasing-word argument uses, and language equality
//! with the header construction is checked in tests.

use std::collections::{HashMap, HashSet};

use crate::graph::{
    classify_growth, scc_period, Alphabet, CombingGraph, LabelId, VertexId,
};
use crate::group::{bfs_sphere_oracle, GpElement, PresentationGraph, SylElem, VertexGroup};
use crate::{Error, Result};

/// Construction tag recorded in combing metadata.
pub const CONSTRUCTION_ID: &str = "HM-recurrent-v1";

// ---------------------------------------------------------------------------
// Vertex orders
// ---------------------------------------------------------------------------

/// A total order on the vertices of the presentation graph in which the two
/// smallest vertices are non-adjacent.
#[derive(Clone, Debug)]
pub struct VertexOrder {
    /// `by_rank[r]` is the vertex at order position `r`.
    pub by_rank: Vec<usize>,
    /// `rank[v]` is the order position of vertex `v`.
    pub rank: Vec<usize>,
}

impl VertexOrder {
    pub fn from_by_rank(by_rank: Vec<usize>, p: &PresentationGraph) -> Result<Self> {
        let n = p.vertex_count();
        let mut rank = vec![usize::MAX; n];
        if by_rank.len() != n {
            return Err(Error::Combing("order must list every vertex exactly once".into()));
        }
        for (r, &v) in by_rank.iter().enumerate() {
            if v >= n || rank[v] != usize::MAX {
                return Err(Error::Combing("order must list every vertex exactly once".into()));
            }
            rank[v] = r;
        }
        if n >= 2 && p.adjacent(by_rank[0], by_rank[1]) {
            return Err(Error::Combing("the first two vertices in the order are adjacent".into()));
        }
        Ok(VertexOrder { by_rank, rank })
    }

    pub fn names(&self, p: &PresentationGraph) -> Vec<String> {
        self.by_rank.iter().map(|&v| p.name(v).to_string()).collect()
    }
}

/// True iff the complement of the presentation graph is connected.
pub fn is_anticonnected(p: &PresentationGraph) -> bool {
    p.complement_components().len() == 1
}

/// Rearranges the input order minimally: the first non-adjacent pair (in
/// input order) is promoted to positions 1-2, the rest keep input order.
pub fn choose_order(p: &PresentationGraph) -> Result<VertexOrder> {
    let n = p.vertex_count();
    for i in 0..n {
        for j in i + 1..n {
            if !p.adjacent(i, j) {
                let mut by_rank = vec![i, j];
                by_rank.extend((0..n).filter(|&v| v != i && v != j));
                return VertexOrder::from_by_rank(by_rank, p);
            }
        }
    }
    Err(Error::CompleteGraph)
}

/// Order given explicitly by vertex names (the `--order` override).
pub fn order_from_names(p: &PresentationGraph, names: &[String]) -> Result<VertexOrder> {
    let mut by_rank = Vec::with_capacity(names.len());
    for n in names {
        by_rank.push(
            p.vertex_by_name(n)
                .ok_or_else(|| Error::Combing(format!("unknown vertex `{n}` in order")))?,
        );
    }
    VertexOrder::from_by_rank(by_rank, p)
}

// ---------------------------------------------------------------------------
// Admissible trees
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub letter: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// The `(I, J)`-admissible tree: node 0 is the root (labeled `I`), node 1 its
/// single child (labeled `J`); root-to-node label sequences are exactly the
/// `(I, J)`-admissible words.
#[derive(Clone, Debug)]
pub struct AdmissibleTree {
    pub top: usize,
    pub second: usize,
    pub nodes: Vec<TreeNode>,
}

impl AdmissibleTree {
    /// Letters along the root-to-node path.
    pub fn word_of(&self, mut node: usize) -> Vec<usize> {
        let mut letters = Vec::new();
        loop {
            letters.push(self.nodes[node].letter);
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => break,
            }
        }
        letters.reverse();
        letters
    }

    /// True iff `letters` is spelled by a root-to-node path.
    pub fn is_admissible_word(&self, letters: &[usize]) -> bool {
        if letters.first() != Some(&self.top) {
            return false;
        }
        let mut at = 0usize;
        for &l in &letters[1..] {
            match self.nodes[at].children.iter().find(|&&c| self.nodes[c].letter == l) {
                Some(&c) => at = c,
                None => return false,
            }
        }
        true
    }
}

/// Builds the `(I, J)`-admissible tree. Requires `I > J` in the order and
/// `I`, `J` non-adjacent.
pub fn build_admissible_tree(
    p: &PresentationGraph,
    order: &VertexOrder,
    top: usize,
    second: usize,
) -> Result<AdmissibleTree> {
    if order.rank[top] <= order.rank[second] {
        return Err(Error::Combing(format!(
            "admissible tree requires {} > {} in the order",
            p.name(top),
            p.name(second)
        )));
    }
    if p.adjacent(top, second) {
        return Err(Error::AdjacentPair(p.name(top).to_string(), p.name(second).to_string()));
    }
    let mut nodes = vec![
        TreeNode { letter: top, parent: None, children: vec![1] },
        TreeNode { letter: second, parent: Some(0), children: vec![] },
    ];
    let mut stack = vec![(1usize, vec![top, second])];
    while let Some((node, prefix)) = stack.pop() {
        let last = *prefix.last().unwrap();
        for &k in &order.by_rank {
            if order.rank[k] <= order.rank[last] {
                continue;
            }
            if order.rank[k] <= order.rank[top] {
                // A letter no larger than the root must fail to commute with
                // some earlier, distinct letter; otherwise it could shuffle
                // leftward and the word would not be normal.
                let blocked = prefix.iter().any(|&w| w != k && !p.adjacent(w, k));
                if !blocked {
                    continue;
                }
            }
            let id = nodes.len();
            nodes.push(TreeNode { letter: k, parent: Some(node), children: vec![] });
            nodes[node].children.push(id);
            let mut next_prefix = prefix.clone();
            next_prefix.push(k);
            stack.push((id, next_prefix));
        }
    }
    Ok(AdmissibleTree { top, second, nodes })
}

fn build_all_trees(
    p: &PresentationGraph,
    order: &VertexOrder,
) -> Result<(Vec<AdmissibleTree>, HashMap<(usize, usize), usize>)> {
    let mut trees = Vec::new();
    let mut index = HashMap::new();
    for ri in 1..order.by_rank.len() {
        for rj in 0..ri {
            let (i, j) = (order.by_rank[ri], order.by_rank[rj]);
            if !p.adjacent(i, j) {
                index.insert((i, j), trees.len());
                trees.push(build_admissible_tree(p, order, i, j)?);
            }
        }
    }
    Ok((trees, index))
}

// ---------------------------------------------------------------------------
// Letter automata (RACG skeletons)
// ---------------------------------------------------------------------------

/// A letter automaton over the vertices of the presentation graph: the
/// combing of the associated right-angled Coxeter group, and the skeleton of
/// the general expansion.
#[derive(Clone, Debug)]
pub struct Skeleton {
    pub graph: CombingGraph,
    /// Letter of each automaton vertex (`None` for the initial vertex).
    pub letter: Vec<Option<usize>>,
    pub order: VertexOrder,
}

struct SkeletonBuilder<'p> {
    p: &'p PresentationGraph,
    names: Vec<String>,
    letters: Vec<Option<usize>>,
    edges: Vec<(usize, usize, usize)>, // (from, to, letter)
}

impl<'p> SkeletonBuilder<'p> {
    fn new(p: &'p PresentationGraph) -> Self {
        SkeletonBuilder { p, names: vec!["v0".into()], letters: vec![None], edges: Vec::new() }
    }

    fn add_vertex(&mut self, name: String, letter: usize) -> usize {
        self.names.push(name);
        self.letters.push(Some(letter));
        self.names.len() - 1
    }

    fn finish(self, order: VertexOrder) -> Result<Skeleton> {
        let alphabet = Alphabet::new(self.p.names().to_vec())?;
        let edges = self
            .edges
            .into_iter()
            .map(|(f, t, letter)| {
                let label = alphabet.id_of(self.p.name(letter)).expect("letter token");
                (f, t, label)
            })
            .collect();
        let graph = CombingGraph::new(alphabet, self.names, 0, edges)?;
        graph.require_valid()?;
        Ok(Skeleton { graph, letter: self.letters, order })
    }
}

/// Places every non-root tree node, the in-tree edges, and the cross-tree
/// edges; returns the automaton vertex of each tree node.
fn place_trees(
    b: &mut SkeletonBuilder,
    p: &PresentationGraph,
    order: &VertexOrder,
    trees: &[AdmissibleTree],
    tree_index: &HashMap<(usize, usize), usize>,
) -> Vec<Vec<usize>> {
    let mut node_vertex: Vec<Vec<usize>> = Vec::with_capacity(trees.len());
    for tree in trees {
        let mut ids = vec![usize::MAX; tree.nodes.len()];
        for (node, data) in tree.nodes.iter().enumerate().skip(1) {
            let word: Vec<&str> = tree.word_of(node)[1..].iter().map(|&l| p.name(l)).collect();
            let name =
                format!("{}.{}:{}", p.name(tree.top), p.name(tree.second), word.join("-"));
            ids[node] = b.add_vertex(name, data.letter);
        }
        node_vertex.push(ids);
    }
    for (t, tree) in trees.iter().enumerate() {
        for (node, data) in tree.nodes.iter().enumerate().skip(1) {
            // In-tree edges (the root's single edge is attached by the caller).
            for &child in &data.children {
                b.edges.push((
                    node_vertex[t][node],
                    node_vertex[t][child],
                    tree.nodes[child].letter,
                ));
            }
            // Cross-tree edges: a vertex labeled A feeds the B-entry of the
            // (A, B)-tree for every smaller non-adjacent B.
            let a = data.letter;
            for &bv in &order.by_rank {
                if order.rank[bv] < order.rank[a] && !p.adjacent(a, bv) {
                    let target_tree = tree_index[&(a, bv)];
                    b.edges.push((node_vertex[t][node], node_vertex[target_tree][1], bv));
                }
            }
        }
    }
    node_vertex
}

/// The reference (header-graph) construction. Not recurrent: increasing
/// words are spelled in a directed acyclic header. Used to cross-check the
/// language of the recurrent construction.
pub fn build_racg_header(p: &PresentationGraph, order: &VertexOrder) -> Result<Skeleton> {
    if !is_anticonnected(p) {
        return Err(Error::NotAnticonnected);
    }
    let (trees, tree_index) = build_all_trees(p, order)?;
    let mut b = SkeletonBuilder::new(p);
    let header: Vec<usize> =
        order.by_rank.iter().map(|&l| b.add_vertex(format!("h:{}", p.name(l)), l)).collect();
    let node_vertex = place_trees(&mut b, p, order, &trees, &tree_index);

    for (r, &h) in header.iter().enumerate() {
        let letter = order.by_rank[r];
        // Initial vertex reaches every header vertex.
        b.edges.push((0, h, letter));
        // Header edges increase in the order.
        for (r2, &h2) in header.iter().enumerate().skip(r + 1) {
            b.edges.push((h, h2, order.by_rank[r2]));
        }
        // The header vertex is the root of its admissible trees.
        for (t, tree) in trees.iter().enumerate() {
            if tree.top == letter {
                b.edges.push((h, node_vertex[t][1], tree.second));
            }
        }
    }
    b.finish(order.clone())
}

/// The recurrent construction: the header is removed and the initial vertex
/// enters the `(B, A)`-tree of the two smallest letters directly.
pub fn build_racg_recurrent(p: &PresentationGraph, order: &VertexOrder) -> Result<Skeleton> {
    if !is_anticonnected(p) {
        return Err(Error::NotAnticonnected);
    }
    if p.vertex_count() < 2 {
        return Err(Error::CompleteGraph);
    }
    let (trees, tree_index) = build_all_trees(p, order)?;
    let mut b = SkeletonBuilder::new(p);
    let node_vertex = place_trees(&mut b, p, order, &trees, &tree_index);

    let first = order.by_rank[0];
    let second = order.by_rank[1];
    let t0 = tree_index[&(second, first)];
    // The initial vertex copies the out-edges of the (B, A)-tree root (its
    // single A-edge) and of the A-child (one edge per larger letter).
    b.edges.push((0, node_vertex[t0][1], first));
    for &child in &trees[t0].nodes[1].children {
        b.edges.push((0, node_vertex[t0][child], trees[t0].nodes[child].letter));
    }
    b.finish(order.clone())
}

// ---------------------------------------------------------------------------
// Vertex-group automata
// ---------------------------------------------------------------------------

/// Geodesic combing automaton of a single vertex group over its own tokens.
/// For the integers: a three-state automaton with one sign state per
/// direction. For a finite group: the ShortLex spanning tree of the BFS over
/// the declared generators (generator order breaks ties).
pub fn vertex_group_automaton(p: &PresentationGraph, vertex: usize) -> Result<CombingGraph> {
    let name = p.name(vertex);
    let gens: Vec<_> = p.standard_generators().into_iter().filter(|g| g.vertex == vertex).collect();
    let alphabet = Alphabet::new(gens.iter().map(|g| g.token.clone()).collect())?;
    match p.group(vertex) {
        VertexGroup::Integers => {
            let names = vec!["v0".into(), format!("{name}:+"), format!("{name}:-")];
            let pos = alphabet.id_of(name).expect("positive token");
            let neg = alphabet.id_of(&format!("{name}^-1")).expect("negative token");
            let edges = vec![(0, 1, pos), (0, 2, neg), (1, 1, pos), (2, 2, neg)];
            CombingGraph::new(alphabet, names, 0, edges)
        }
        VertexGroup::Finite(f) => {
            // BFS spanning tree over the declared generators; FIFO order with
            // generators tried in declaration order yields ShortLex parents.
            let mut state_of = vec![usize::MAX; f.order()];
            let mut names = vec!["v0".to_string()];
            let mut edges = Vec::new();
            state_of[f.identity] = 0;
            let mut queue = std::collections::VecDeque::from([f.identity]);
            while let Some(g) = queue.pop_front() {
                for gen in &gens {
                    let SylElem::Fin(s) = gen.elem else { unreachable!() };
                    let h = f.mul(g, s);
                    if state_of[h] != usize::MAX {
                        continue;
                    }
                    state_of[h] = names.len();
                    names.push(format!("{name}:{h}"));
                    queue.push_back(h);
                    let label = alphabet.id_of(&gen.token).expect("generator token");
                    edges.push((state_of[g], state_of[h], label));
                }
            }
            CombingGraph::new(alphabet, names, 0, edges)
        }
    }
}

// ---------------------------------------------------------------------------
// Expansion to the full graph product
// ---------------------------------------------------------------------------

/// Type tag of a combing-automaton vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Initial,
    /// Skeleton vertex, its presentation-graph letter, and the state name of
    /// the vertex-group automaton copy.
    Expanded { skeleton: usize, letter: usize, state: String },
}

/// A built combing automaton with its metadata sidecar.
#[derive(Clone, Debug)]
pub struct Combing {
    pub graph: CombingGraph,
    pub kinds: Vec<VertexKind>,
    pub order: Vec<String>,
    pub flags: Vec<String>,
    pub construction: String,
    pub lambda_hint: f64,
}

impl Combing {
    pub fn meta_json(&self) -> serde_json::Value {
        serde_json::json!({
            "order": self.order,
            "lambda_hint": self.lambda_hint,
            "flags": self.flags,
            "construction": self.construction,
        })
    }
}

/// Substitutes each letter state of the skeleton with a copy of the vertex
/// group's combing automaton (minus its initial state). Every edge into a
/// letter-`J` skeleton vertex becomes one edge per depth-one state of `J`'s
/// automaton, labeled by that state's entry generator.
pub fn expand_with_vertex_groups(skel: &Skeleton, p: &PresentationGraph) -> Result<Combing> {
    let vg: Vec<CombingGraph> =
        (0..p.vertex_count()).map(|v| vertex_group_automaton(p, v)).collect::<Result<_>>()?;
    // Entry edges (token, target state) and internal edges per vertex group.
    let mut entries: Vec<Vec<(String, VertexId)>> = Vec::new();
    let mut internal: Vec<Vec<(VertexId, VertexId, String)>> = Vec::new();
    for a in &vg {
        entries.push(
            a.out_edges(a.initial())
                .iter()
                .map(|&e| {
                    let edge = a.edge(e);
                    (a.alphabet().name(edge.label).to_string(), edge.to)
                })
                .collect(),
        );
        internal.push(
            (0..a.edge_count())
                .map(|id| a.edge(id))
                .filter(|e| e.from != a.initial())
                .map(|e| (e.from, e.to, a.alphabet().name(e.label).to_string()))
                .collect(),
        );
    }

    let alphabet = Alphabet::new(p.standard_generators().into_iter().map(|g| g.token).collect())?;
    let mut names = vec!["v0".to_string()];
    let mut kinds = vec![VertexKind::Initial];
    // block[u][group state] = expanded vertex id, for skeleton vertex u.
    let skel_n = skel.graph.vertex_count();
    let mut block: Vec<HashMap<VertexId, usize>> = vec![HashMap::new(); skel_n];
    for u in 0..skel_n {
        let Some(letter) = skel.letter[u] else { continue };
        let a = &vg[letter];
        for s in 0..a.vertex_count() {
            if s == a.initial() {
                continue;
            }
            let id = names.len();
            names.push(format!("{}|{}", skel.graph.vertex_name(u), a.vertex_name(s)));
            kinds.push(VertexKind::Expanded {
                skeleton: u,
                letter,
                state: a.vertex_name(s).to_string(),
            });
            block[u].insert(s, id);
        }
    }

    let mut edges: Vec<(usize, usize, LabelId)> = Vec::new();
    let attach = |from: usize, to_skel: usize, edges: &mut Vec<(usize, usize, LabelId)>| {
        let letter = skel.letter[to_skel].expect("skeleton targets carry letters");
        for (token, target_state) in &entries[letter] {
            let label = alphabet.id_of(token).expect("generator token");
            edges.push((from, block[to_skel][target_state], label));
        }
    };
    for id in 0..skel.graph.edge_count() {
        let e = skel.graph.edge(id);
        if e.from == skel.graph.initial() {
            attach(0, e.to, &mut edges);
        } else {
            let mut sources: Vec<usize> = block[e.from].values().copied().collect();
            sources.sort_unstable();
            for src in sources {
                attach(src, e.to, &mut edges);
            }
        }
    }
    for u in 0..skel_n {
        let Some(letter) = skel.letter[u] else { continue };
        for (s, t, token) in &internal[letter] {
            let label = alphabet.id_of(token).expect("generator token");
            edges.push((block[u][s], block[u][t], label));
        }
    }

    let graph = CombingGraph::new(alphabet, names, 0, edges)?;
    graph.require_valid()?;

    let class = classify_growth(&graph)?;
    let adj = graph.adjacency();
    let mut flags = Vec::new();
    let nontrivial: Vec<usize> = (0..class.sccs.len()).filter(|&c| class.nontrivial[c]).collect();
    if nontrivial.len() == 1 {
        let period = scc_period(&adj, &class.sccs[nontrivial[0]]);
        flags.push(if period == 1 { "aperiodic".into() } else { format!("period{period}") });
    } else {
        flags.push(format!("components{}", nontrivial.len()));
    }

    Ok(Combing {
        graph,
        kinds,
        order: skel.order.names(p),
        flags,
        construction: CONSTRUCTION_ID.into(),
        lambda_hint: class.lambda,
    })
}

/// Builds the recurrent combing of a graph product end to end.
pub fn build_combing(p: &PresentationGraph, order_override: Option<&[String]>) -> Result<Combing> {
    let order = match order_override {
        Some(names) => order_from_names(p, names)?,
        None => choose_order(p)?,
    };
    let skel = build_racg_recurrent(p, &order)?;
    expand_with_vertex_groups(&skel, p)
}

// ---------------------------------------------------------------------------
// Language extraction (for cross-checking constructions)
// ---------------------------------------------------------------------------

/// Every word of length `n` recognized by the automaton.
pub fn language_at(graph: &CombingGraph, n: usize) -> HashSet<Vec<String>> {
    let mut level: Vec<(VertexId, Vec<String>)> = vec![(graph.initial(), Vec::new())];
    for _ in 0..n {
        let mut next = Vec::new();
        for (v, word) in &level {
            for &e in graph.out_edges(*v) {
                let edge = graph.edge(e);
                let mut w = word.clone();
                w.push(graph.alphabet().name(edge.label).to_string());
                next.push((edge.to, w));
            }
        }
        level = next;
    }
    level.into_iter().map(|(_, w)| w).collect()
}

// ---------------------------------------------------------------------------
// Verification against the group oracle
// ---------------------------------------------------------------------------

/// Per-level verification outcome.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub n_max: usize,
    pub sphere_sizes: Vec<u64>,
}

/// Checks, for each `n <= n_max`, that evaluation is injective on length-`n`
/// paths, that its image is exactly the oracle sphere, and that every path
/// evaluates to an element of word length `n`. Any violation is a hard error
/// naming a witness.
pub fn verify_combing(
    combing: &Combing,
    p: &PresentationGraph,
    n_max: usize,
    cap: u64,
) -> Result<VerifyReport> {
    let graph = &combing.graph;
    graph.require_valid()?;
    let oracle = bfs_sphere_oracle(p, n_max, cap)?;

    // Label id -> generator syllable.
    let gens = p.standard_generators();
    let mut gen_of_label: Vec<Option<(usize, SylElem)>> = vec![None; graph.alphabet().len()];
    for g in &gens {
        if let Some(id) = graph.alphabet().id_of(&g.token) {
            gen_of_label[id] = Some((g.vertex, g.elem));
        }
    }

    // Level-synchronous evaluation with parent pointers for witnesses.
    let mut meta: Vec<Vec<(u32, u32, u32)>> =
        vec![vec![(graph.initial() as u32, u32::MAX, u32::MAX)]];
    let mut elems: Vec<GpElement> = vec![p.one()];
    let mut sizes = vec![1u64];

    let witness_word = |meta: &[Vec<(u32, u32, u32)>], mut level: usize, mut idx: usize| -> String {
        let mut labels = Vec::new();
        while level > 0 {
            let (_, parent, edge) = meta[level][idx];
            labels.push(graph.alphabet().name(graph.edge(edge as usize).label).to_string());
            idx = parent as usize;
            level -= 1;
        }
        labels.reverse();
        labels.join(" ")
    };

    for n in 1..=n_max {
        let mut next_meta = Vec::new();
        let mut next_elems = Vec::new();
        for (i, &(v, _, _)) in meta[n - 1].iter().enumerate() {
            for &e in graph.out_edges(v as usize) {
                let edge = graph.edge(e);
                let (vertex, elem) = gen_of_label[edge.label].ok_or_else(|| {
                    Error::VerifyFailure(format!(
                        "label `{}` is not a standard generator",
                        graph.alphabet().name(edge.label)
                    ))
                })?;
                let g = p.multiply(&elems[i], &p.syllable(vertex, elem)?)?;
                next_meta.push((edge.to as u32, i as u32, e as u32));
                next_elems.push(g);
            }
        }
        if next_elems.len() as u64 > cap {
            return Err(Error::EnumerationCap { count: next_elems.len().to_string(), cap });
        }
        meta.push(next_meta);

        // Injectivity.
        let mut seen: HashMap<&GpElement, usize> = HashMap::with_capacity(next_elems.len());
        for (i, g) in next_elems.iter().enumerate() {
            if let Some(&j) = seen.get(g) {
                return Err(Error::VerifyFailure(format!(
                    "paths `{}` and `{}` evaluate to the same element at n={n}",
                    witness_word(&meta, n, j),
                    witness_word(&meta, n, i)
                )));
            }
            seen.insert(g, i);
        }
        // Geodesic lengths.
        for (i, g) in next_elems.iter().enumerate() {
            if p.word_length(g) != n as u64 {
                return Err(Error::VerifyFailure(format!(
                    "path `{}` has length {n} but |ev| = {}",
                    witness_word(&meta, n, i),
                    p.word_length(g)
                )));
            }
        }
        // Image equals the oracle sphere.
        let sphere = oracle.sphere(n);
        if sphere.len() != next_elems.len() {
            // Injectivity holds, so a size mismatch means a missing element.
            let image: HashSet<&GpElement> = next_elems.iter().collect();
            let missing = sphere.iter().find(|g| !image.contains(g));
            return Err(Error::VerifyFailure(format!(
                "sphere size mismatch at n={n}: automaton {} vs group {}{}",
                next_elems.len(),
                sphere.len(),
                missing.map_or(String::new(), |g| format!(
                    "; an element of length {} is missing from the image",
                    p.word_length(g)
                ))
            )));
        }
        let oracle_set: HashSet<&GpElement> = sphere.iter().collect();
        for (i, g) in next_elems.iter().enumerate() {
            if !oracle_set.contains(g) {
                return Err(Error::VerifyFailure(format!(
                    "path `{}` evaluates outside the sphere at n={n}",
                    witness_word(&meta, n, i)
                )));
            }
        }

        sizes.push(next_elems.len() as u64);
        elems = next_elems;
    }
    Ok(VerifyReport { n_max, sphere_sizes: sizes })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
