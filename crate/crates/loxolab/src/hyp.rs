//! Isometric actions on trees: Cayley trees of free products whose factors
//! are Z or Z/2, acted on through a homomorphism from a combed group.
//!
//! Restricting the factors keeps the word-metric Cayley graph a genuine tree
//! (delta = 0), so distances, Gromov products, shadows, and translation
//! lengths are all exact integer or half-integer quantities. Half-integers
//! are carried doubled in `i64` throughout.
//!
//! Every formula keeps its delta term written out, so the delta = 0
//! specialization is visible at the use site.

use crate::group::{
    kill_except, GpElement, PresentationGraph, SylElem, VertexSpanProjection,
};
use crate::rng::CounterRng;
use crate::{Error, Result};

/// Points of the space: group elements of the free product, acting on
/// themselves; the basepoint is the identity.
pub type Point = GpElement;

/// Hyperbolicity constant of a tree, doubled (so, zero).
pub const DELTA2: i64 = 0;

// ---------------------------------------------------------------------------
// Tree spaces
// ---------------------------------------------------------------------------

/// The Cayley tree of a free product of Z and Z/2 factors, with basepoint at
/// the identity.
#[derive(Clone, Debug)]
pub struct TreeSpace {
    pres: PresentationGraph,
}

impl TreeSpace {
    /// Validates that the presentation is a free product of Z and Z/2
    /// factors; those are exactly the ones whose standard Cayley graph is a
    /// tree.
    pub fn new(pres: PresentationGraph) -> Result<Self> {
        if !pres.edges().is_empty() {
            return Err(Error::TreeSpace(
                "tree targets must be free products (edgeless presentation graphs)".into(),
            ));
        }
        for v in 0..pres.vertex_count() {
            match pres.group(v) {
                crate::group::VertexGroup::Integers => {}
                g if g.is_z2_like() => {}
                _ => {
                    return Err(Error::TreeSpace(format!(
                        "factor `{}` is not Z or Z/2; its Cayley graph is not a tree",
                        pres.name(v)
                    )))
                }
            }
        }
        Ok(TreeSpace { pres })
    }

    pub fn presentation(&self) -> &PresentationGraph {
        &self.pres
    }

    pub fn basepoint(&self) -> Point {
        self.pres.one()
    }

    /// Tree distance: `d(p, q) = |p^{-1} q|`.
    pub fn dist(&self, p: &Point, q: &Point) -> u64 {
        let diff = self
            .pres
            .multiply(&self.pres.invert(p).expect("tree element"), q)
            .expect("tree element");
        self.pres.word_length(&diff)
    }

    pub fn dist_to_base(&self, p: &Point) -> u64 {
        self.pres.word_length(p)
    }

    /// Twice the Gromov product `(p, q)_x` at the basepoint.
    pub fn gromov2(&self, p: &Point, q: &Point) -> i64 {
        self.dist_to_base(p) as i64 + self.dist_to_base(q) as i64 - self.dist(p, q) as i64
    }

    /// Twice the Gromov product `(p, q)_b` at an arbitrary base.
    pub fn gromov2_at(&self, base: &Point, p: &Point, q: &Point) -> i64 {
        self.dist(base, p) as i64 + self.dist(base, q) as i64 - self.dist(p, q) as i64
    }

    /// Length of the common prefix of the geodesic letter spellings of `p`
    /// and `q` from the basepoint. On a tree this equals the Gromov product.
    pub fn common_prefix_len(&self, p: &Point, q: &Point) -> u64 {
        let mut total = 0u64;
        let mut it_p = p.syllables().iter();
        let mut it_q = q.syllables().iter();
        loop {
            match (it_p.next(), it_q.next()) {
                (Some(a), Some(b)) => {
                    if a == b {
                        total += self.syllable_len(a);
                        continue;
                    }
                    if a.vertex == b.vertex {
                        if let (SylElem::Int(x), SylElem::Int(y)) = (a.elem, b.elem) {
                            if x.signum() == y.signum() {
                                total += x.unsigned_abs().min(y.unsigned_abs());
                            }
                        }
                    }
                    return total;
                }
                _ => return total,
            }
        }
    }

    fn syllable_len(&self, s: &crate::group::Syllable) -> u64 {
        match s.elem {
            SylElem::Int(x) => x.unsigned_abs(),
            SylElem::Fin(_) => 1,
        }
    }

    /// The geodesic letter spelling of `p` from the basepoint.
    pub fn letters(&self, p: &Point) -> Vec<Letter> {
        let mut out = Vec::new();
        for s in p.syllables() {
            match s.elem {
                SylElem::Int(x) => {
                    let letter =
                        if x > 0 { Letter::Pos(s.vertex) } else { Letter::Neg(s.vertex) };
                    for _ in 0..x.unsigned_abs() {
                        out.push(letter);
                    }
                }
                SylElem::Fin(_) => out.push(Letter::Invol(s.vertex)),
            }
        }
        out
    }
}

/// One edge step in the tree, by factor and direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    Pos(u32),
    Neg(u32),
    Invol(u32),
}

// ---------------------------------------------------------------------------
// Shadows
// ---------------------------------------------------------------------------

/// The shadow around `center` seen from the basepoint, with doubled radius
/// parameter: `z` lies in it iff `(center, z)_x >= d(x, z) - R`.
#[derive(Clone, Debug)]
pub struct Shadow {
    pub center: Point,
    pub radius2: i64,
}

impl Shadow {
    pub fn new(center: Point, radius2: i64) -> Self {
        Shadow { center, radius2 }
    }

    /// Twice the distance parameter `r = d(x, center) - R`.
    pub fn distance_parameter2(&self, space: &TreeSpace) -> i64 {
        2 * space.dist_to_base(&self.center) as i64 - self.radius2
    }
}

pub fn in_shadow(space: &TreeSpace, shadow: &Shadow, z: &Point) -> bool {
    space.gromov2(&shadow.center, z) >= 2 * space.dist_to_base(z) as i64 - shadow.radius2
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum ActionKind {
    /// The free product acting on its own tree by left multiplication.
    SelfAction,
    /// Kill every vertex group outside `keep` and act through the quotient.
    /// Covers both factor projections of direct products and the
    /// non-adjacent-pair quotients.
    KillExcept { keep: Vec<usize> },
    /// Everything acts as the identity.
    Trivial,
}

/// An isometric action of a combed group on a tree, given by a homomorphism
/// into the tree's deck group.
#[derive(Clone, Debug)]
pub struct ActionHandle {
    pub source: PresentationGraph,
    pub kind: ActionKind,
    pub space: TreeSpace,
    /// `max_s d(x, s x)` over the standard generators of the source.
    pub lipschitz: u64,
    proj: Option<VertexSpanProjection>,
}

impl ActionHandle {
    pub fn self_action(source: PresentationGraph) -> Result<Self> {
        let space = TreeSpace::new(source.clone())?;
        Self::finish(source, ActionKind::SelfAction, space, None)
    }

    pub fn kill_except(source: PresentationGraph, keep: &[usize]) -> Result<Self> {
        let proj = kill_except(&source, keep)?;
        let space = TreeSpace::new(proj.target.clone())?;
        Self::finish(source, ActionKind::KillExcept { keep: proj.keep.clone() }, space, Some(proj))
    }

    pub fn kill_except_names(source: PresentationGraph, keep: &[String]) -> Result<Self> {
        let ids: Vec<usize> = keep
            .iter()
            .map(|n| {
                source
                    .vertex_by_name(n)
                    .ok_or_else(|| Error::Action(format!("unknown vertex `{n}`")))
            })
            .collect::<Result<_>>()?;
        Self::kill_except(source, &ids)
    }

    /// Projection of a direct product onto one join factor: `keep` must be a
    /// connected component of the complement graph.
    pub fn factor_projection(source: PresentationGraph, keep: &[usize]) -> Result<Self> {
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        if !source.complement_components().contains(&keep_sorted) {
            return Err(Error::Action("kept set is not a join factor of the product".into()));
        }
        Self::kill_except(source, keep)
    }

    pub fn trivial(source: PresentationGraph, space: TreeSpace) -> Result<Self> {
        Self::finish(source, ActionKind::Trivial, space, None)
    }

    fn finish(
        source: PresentationGraph,
        kind: ActionKind,
        space: TreeSpace,
        proj: Option<VertexSpanProjection>,
    ) -> Result<Self> {
        let mut handle = ActionHandle { source, kind, space, lipschitz: 0, proj };
        handle.lipschitz = handle
            .source
            .standard_generators()
            .iter()
            .map(|g| {
                let s = handle.source.syllable(g.vertex, g.elem).expect("generator syllable");
                handle.space.dist_to_base(&handle.apply(&s).expect("generator image"))
            })
            .max()
            .unwrap_or(0);
        handle.spot_check_homomorphism(1000)?;
        Ok(handle)
    }

    /// The image of a group element in the deck group of the tree.
    pub fn apply(&self, g: &GpElement) -> Result<Point> {
        match &self.kind {
            ActionKind::SelfAction => Ok(g.clone()),
            ActionKind::KillExcept { .. } => {
                self.proj.as_ref().expect("projection present").apply(g)
            }
            ActionKind::Trivial => Ok(self.space.basepoint()),
        }
    }

    /// The orbit point `g x`.
    pub fn orbit(&self, g: &GpElement) -> Result<Point> {
        self.apply(g)
    }

    fn spot_check_homomorphism(&self, trials: u64) -> Result<()> {
        let gens = self.source.standard_generators();
        if gens.is_empty() {
            return Ok(());
        }
        let mut rng = CounterRng::new(0x9eac_7f00);
        let random = |rng: &mut CounterRng| -> Result<GpElement> {
            let len = rng.next_below(6);
            let mut acc = self.source.one();
            for _ in 0..len {
                let g = &gens[rng.next_below(gens.len() as u64) as usize];
                acc = self.source.multiply(&acc, &self.source.syllable(g.vertex, g.elem)?)?;
            }
            Ok(acc)
        };
        let target = self.space.presentation();
        for _ in 0..trials {
            let a = random(&mut rng)?;
            let b = random(&mut rng)?;
            let lhs = self.apply(&self.source.multiply(&a, &b)?)?;
            let rhs = target.multiply(&self.apply(&a)?, &self.apply(&b)?)?;
            if lhs != rhs {
                return Err(Error::Action("homomorphism spot check failed".into()));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Translation length
// ---------------------------------------------------------------------------

/// The displacement-based estimate `d(x, gx) - 2 (gx, g^{-1}x)_x` (doubled),
/// clamped at zero, and whether the hypothesis
/// `d(x, gx) >= 2 (gx, g^{-1}x)_x + c(delta)` held (with `c(0) = 0`).
/// On a tree the estimate is exact whenever the hypothesis holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TauEstimate {
    pub value2: i64,
    pub hypothesis_met: bool,
}

pub fn translation_length_estimate(space: &TreeSpace, image: &Point) -> Result<TauEstimate> {
    let p = space.presentation();
    let inverse = p.invert(image)?;
    let d2 = 2 * space.dist_to_base(image) as i64;
    let prod2 = space.gromov2(image, &inverse);
    let raw = d2 - 2 * prod2 - DELTA2; // c(delta) = 0 on trees
    Ok(TauEstimate { value2: raw.max(0), hypothesis_met: raw >= 0 })
}

/// Cyclic reduction `g = u r u^{-1}` with `r` cyclically reduced: either
/// trivial, a single syllable, or a word whose first and last syllables lie
/// in different factors.
pub fn cyclic_reduction(space: &TreeSpace, image: &Point) -> Result<(Point, Point)> {
    let p = space.presentation();
    let mut conjugator = p.one();
    let mut core = image.clone();
    loop {
        let syls = core.syllables();
        if syls.len() < 2 || syls[0].vertex != syls[syls.len() - 1].vertex {
            return Ok((conjugator, core));
        }
        let first = p.normal_form([syls[0]])?;
        conjugator = p.multiply(&conjugator, &first)?;
        let first_inv = p.invert(&first)?;
        core = p.multiply(&p.multiply(&first_inv, &core)?, &first)?;
    }
}

/// Exact translation length on the tree: the length of the cyclic reduction
/// (zero for torsion cores, the exponent for a single Z syllable).
pub fn translation_length_exact_tree(space: &TreeSpace, image: &Point) -> Result<u64> {
    let (_, core) = cyclic_reduction(space, image)?;
    let syls = core.syllables();
    Ok(match syls.len() {
        0 => 0,
        1 => match syls[0].elem {
            SylElem::Int(x) => x.unsigned_abs(),
            SylElem::Fin(_) => 0,
        },
        _ => space.presentation().word_length(&core),
    })
}

pub fn is_loxodromic(space: &TreeSpace, image: &Point) -> Result<bool> {
    Ok(translation_length_exact_tree(space, image)? > 0)
}

// ---------------------------------------------------------------------------
// Fellow traveling
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FellowTravel {
    HypothesesNotMet,
    Verified,
}

/// Fellow traveling is contagious: if `(a, b)_x >= A`, `(c, d)_x >= A` and
/// `(a, c)_x <= A - 3 delta`, then `(a, c)_x` and `(b, d)_x` differ by at
/// most `2 delta`. At `delta = 0` the third hypothesis must be strict: on
/// the boundary `(a, c)_x = A` the pairs `b, d` may keep traveling together
/// past the split point of `a` and `c`, so strictness is what the lattice
/// version of `A - 3 delta` means here. Conclusion violations are hard
/// errors; they would falsify the implementation.
pub fn fellow_travel_check(
    space: &TreeSpace,
    a: &Point,
    b: &Point,
    c: &Point,
    d: &Point,
    a_param2: i64,
) -> Result<FellowTravel> {
    let ab2 = space.gromov2(a, b);
    let cd2 = space.gromov2(c, d);
    let ac2 = space.gromov2(a, c);
    let strictness = if DELTA2 == 0 { 1 } else { 0 };
    if !(ab2 >= a_param2 && cd2 >= a_param2 && ac2 <= a_param2 - 3 * DELTA2 - strictness) {
        return Ok(FellowTravel::HypothesesNotMet);
    }
    let bd2 = space.gromov2(b, d);
    if (ac2 - bd2).abs() > 2 * DELTA2 {
        return Err(Error::FellowTravelViolation(
            format!("(a,c)_x = {}/2", ac2),
            format!("(b,d)_x = {}/2", bd2),
        ));
    }
    Ok(FellowTravel::Verified)
}

// ---------------------------------------------------------------------------
// Independent loxodromics
// ---------------------------------------------------------------------------

/// A finite certificate for an axis endpoint: the eventually periodic letter
/// ray `prefix . cycle^infinity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EndpointKey {
    prefix: Vec<Letter>,
    cycle: Vec<Letter>,
}

impl EndpointKey {
    fn letter_at(&self, i: usize) -> Letter {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Exact equality of the infinite rays: two eventually periodic letter
    /// sequences agreeing past both preperiods for a full sum of periods
    /// agree everywhere.
    pub fn same_ray(&self, other: &EndpointKey) -> bool {
        let horizon =
            self.prefix.len().max(other.prefix.len()) + self.cycle.len() + other.cycle.len() + 1;
        (0..horizon).all(|i| self.letter_at(i) == other.letter_at(i))
    }
}

/// Both axis endpoints of a loxodromic image, as letter rays; `None` for
/// elliptic images.
pub fn axis_endpoints(space: &TreeSpace, image: &Point) -> Result<Option<(EndpointKey, EndpointKey)>> {
    let tau = translation_length_exact_tree(space, image)?;
    if tau == 0 {
        return Ok(None);
    }
    let (u, r) = cyclic_reduction(space, image)?;
    let p = space.presentation();
    let forward = ray_key(space, &u, &r)?;
    let backward = ray_key(space, &u, &p.invert(&r)?)?;
    Ok(Some((forward, backward)))
}

/// The ray toward `lim u r^m x` as an eventually periodic letter sequence:
/// iterate until two consecutive powers spell nested words growing by
/// exactly `|r|` letters, then split into prefix and cycle.
fn ray_key(space: &TreeSpace, u: &Point, r: &Point) -> Result<EndpointKey> {
    let p = space.presentation();
    let mut power = p.multiply(u, r)?;
    let mut letters = space.letters(&power);
    loop {
        let next_power = p.multiply(&power, r)?;
        let next_letters = space.letters(&next_power);
        let grows_by_tau =
            next_letters.len() == letters.len() + space.dist_to_base(r) as usize;
        if grows_by_tau && next_letters[..letters.len()] == letters[..] {
            return Ok(EndpointKey {
                prefix: letters.clone(),
                cycle: next_letters[letters.len()..].to_vec(),
            });
        }
        power = next_power;
        letters = next_letters;
    }
}

/// Searches the ball of the source group for two loxodromics with disjoint
/// endpoint pairs. Inconclusive (`None`) if none is found by `search_depth`.
pub fn find_independent_loxodromics(
    action: &ActionHandle,
    search_depth: usize,
    cap: u64,
) -> Result<Option<(GpElement, GpElement)>> {
    let oracle = crate::group::bfs_sphere_oracle(&action.source, search_depth, cap)?;
    let mut first: Option<(GpElement, (EndpointKey, EndpointKey))> = None;
    for sphere in &oracle.spheres {
        for g in sphere {
            let image = action.apply(g)?;
            let Some(ends) = axis_endpoints(&action.space, &image)? else { continue };
            match &first {
                None => first = Some((g.clone(), ends)),
                Some((g0, ends0)) => {
                    let disjoint = !ends.0.same_ray(&ends0.0)
                        && !ends.0.same_ray(&ends0.1)
                        && !ends.1.same_ray(&ends0.0)
                        && !ends.1.same_ray(&ends0.1);
                    if disjoint {
                        return Ok(Some((g0.clone(), g.clone())));
                    }
                }
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
