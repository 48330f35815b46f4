//! The counting experiments, wired end to end: presentation -> combing ->
//! spectral data -> action -> report rows.
//!
//! Every experiment runs in exact mode (full enumeration or count-table
//! arithmetic) when the relevant sphere fits the configured cap, and
//! otherwise in Monte Carlo mode with seeded substreams and 99% intervals.
//! Reports are deterministic given `(config, seed)`.

pub mod report;

use std::path::PathBuf;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::combing::{build_combing, verify_combing, Combing};
use crate::graph::{
    classify_growth, count_spheres, enumerate_paths, sample_uniform_path, wilson_interval,
    CombingGraph, GraphPath, GrowthClassification, PathCountTable, Z99,
};
use crate::group::{GpElement, PresentationGraph, SylElem, Syllable, VertexGroup};
use crate::hyp::{translation_length_exact_tree, ActionHandle, ActionKind, Point, TreeSpace};
use crate::par::{self, ExecMode};
use crate::rng::CounterRng;
use crate::spectral::{build_markov, perron_with, sample_markov_path, MarkovChain, PerronData};
use crate::{Error, Result};

use report::{Report, RowMode, Value};

// Substream salts, one per experiment.
const SALT_DRIFT: u64 = 2;
const SALT_DISPLACEMENT: u64 = 3;
const SALT_TRANSLATION: u64 = 4;
const SALT_MARKOV: u64 = 5;
const SALT_SUBGROUP: u64 = 6;
const SALT_GROMOV: u64 = 7;
const SALT_SHADOW: u64 = 8;
const SALT_QUASI: u64 = 9;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

fn default_samples() -> u64 {
    100_000
}
fn default_n_values() -> Vec<usize> {
    vec![8, 16, 24]
}
fn default_c() -> u64 {
    2
}
fn default_horizon() -> usize {
    200
}
fn default_cap() -> u64 {
    10_000_000
}
fn default_verify_nmax() -> usize {
    6
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path of the presentation JSON; optional when the presentation is
    /// supplied programmatically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presentation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_override: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Vertex span generating the subgroup for density experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<Vec<String>>,
    /// Token word for quasitightness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<Vec<String>>,
    #[serde(default = "default_c")]
    pub almost_contain_c: u64,
    /// Token word for the shadow center; a sampled default otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_center: Option<Vec<String>>,
    /// Distance parameters for shadow profiles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<u64>>,
    #[serde(default = "default_horizon")]
    pub drift_horizon: usize,
    #[serde(default = "default_cap")]
    pub exact_cap: u64,
    #[serde(default = "default_verify_nmax")]
    pub verify_nmax: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            presentation: None,
            order_override: None,
            action: None,
            n_values: default_n_values(),
            samples: default_samples(),
            seed: 0,
            epsilon: None,
            subgroup: None,
            word: None,
            almost_contain_c: default_c(),
            shadow_center: None,
            radii: None,
            drift_horizon: default_horizon(),
            exact_cap: default_cap(),
            verify_nmax: default_verify_nmax(),
            out: None,
            format: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Hex prefix of the SHA-256 of the canonical config serialization.
    /// Output destination and format are not inputs, so they do not hash.
    pub fn config_hash(&self) -> String {
        let mut inputs = self.clone();
        inputs.out = None;
        inputs.format = None;
        let canonical = serde_json::to_string(&inputs).expect("config serialization");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Action specification: the tree and the homomorphism onto its deck group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActionSpec {
    pub space: SpaceSpec,
    pub hom: HomSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(rename = "type")]
    pub kind: String, // "free_product"
    pub factors: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomSpec {
    #[serde(rename = "type")]
    pub kind: String, // "identity" | "factor_projection" | "kill_except" | "trivial"
    #[serde(default)]
    pub keep: Vec<String>,
}

impl ActionSpec {
    pub fn build(&self, source: &PresentationGraph) -> Result<ActionHandle> {
        if self.space.kind != "free_product" {
            return Err(Error::Config(format!("unknown space type `{}`", self.space.kind)));
        }
        let handle = match self.hom.kind.as_str() {
            "identity" => ActionHandle::self_action(source.clone())?,
            "kill_except" => ActionHandle::kill_except_names(source.clone(), &self.hom.keep)?,
            "factor_projection" => {
                let ids: Vec<usize> = self
                    .hom
                    .keep
                    .iter()
                    .map(|n| {
                        source
                            .vertex_by_name(n)
                            .ok_or_else(|| Error::Config(format!("unknown vertex `{n}`")))
                    })
                    .collect::<Result<_>>()?;
                ActionHandle::factor_projection(source.clone(), &ids)?
            }
            "trivial" => {
                let space = TreeSpace::new(self.space_presentation()?)?;
                ActionHandle::trivial(source.clone(), space)?
            }
            other => return Err(Error::Config(format!("unknown hom type `{other}`"))),
        };
        // The declared space must match the derived one.
        let declared = self.space_presentation()?;
        let derived = handle.space.presentation();
        if declared.to_json() != derived.to_json() {
            return Err(Error::Config(
                "declared space does not match the homomorphism image".into(),
            ));
        }
        Ok(handle)
    }

    fn space_presentation(&self) -> Result<PresentationGraph> {
        let value = serde_json::json!({ "vertices": self.space.factors, "edges": [] });
        Ok(PresentationGraph::from_json(&value)?.0)
    }

    /// The `ActionSpec` describing an existing handle.
    pub fn describe(handle: &ActionHandle) -> Self {
        let factors = handle.space.presentation().to_json()["vertices"].clone();
        let (kind, keep) = match &handle.kind {
            ActionKind::SelfAction => ("identity", Vec::new()),
            ActionKind::KillExcept { keep } => (
                "kill_except",
                keep.iter().map(|&v| handle.source.name(v).to_string()).collect(),
            ),
            ActionKind::Trivial => ("trivial", Vec::new()),
        };
        ActionSpec {
            space: SpaceSpec { kind: "free_product".into(), factors },
            hom: HomSpec { kind: kind.into(), keep },
        }
    }
}

// ---------------------------------------------------------------------------
// Sphere counts for arbitrary graph products
// ---------------------------------------------------------------------------

/// Exact sphere sizes of a graph product for the standard generators, for
/// any presentation: via the combing automaton when the graph is
/// anticonnected, by convolution over the join factors otherwise, and
/// directly for single vertices.
pub fn sphere_counts(p: &PresentationGraph, n_max: usize) -> Result<Vec<BigUint>> {
    if p.vertex_count() == 0 {
        let mut out = vec![BigUint::zero(); n_max + 1];
        out[0] = BigUint::one();
        return Ok(out);
    }
    if p.vertex_count() == 1 {
        return Ok(match p.group(0) {
            VertexGroup::Integers => {
                let mut out = vec![BigUint::from(2u32); n_max + 1];
                out[0] = BigUint::one();
                out
            }
            VertexGroup::Finite(_) => {
                let oracle = crate::group::bfs_sphere_oracle(p, n_max, u64::MAX)?;
                (0..=n_max).map(|n| BigUint::from(oracle.sphere(n).len())).collect()
            }
        });
    }
    let components = p.complement_components();
    if components.len() == 1 {
        let combing = build_combing(p, None)?;
        let table = count_spheres(&combing.graph, n_max)?;
        return Ok((0..=n_max).map(|n| table.sphere(n).clone()).collect());
    }
    // Join of factors: word length is additive, so spheres convolve.
    let mut acc = vec![BigUint::zero(); n_max + 1];
    acc[0] = BigUint::one();
    for comp in components {
        let factor = sphere_counts(&p.induced(&comp)?, n_max)?;
        let mut next = vec![BigUint::zero(); n_max + 1];
        for (i, a) in acc.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, f) in factor.iter().take(n_max + 1 - i).enumerate() {
                if !f.is_zero() {
                    next[i + j] += a * f;
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Exact ball sizes (partial sums of [`sphere_counts`]).
pub fn ball_counts(p: &PresentationGraph, n_max: usize) -> Result<Vec<BigUint>> {
    let spheres = sphere_counts(p, n_max)?;
    let mut acc = BigUint::zero();
    Ok(spheres
        .into_iter()
        .map(|s| {
            acc += s;
            acc.clone()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Workbench
// ---------------------------------------------------------------------------

/// Resolved inputs shared by the experiments: the presentation, its combing
/// and spectral data (absent for direct products), the action, and the
/// sampling configuration.
pub struct Workbench {
    pub pres: PresentationGraph,
    pub cfg: ExperimentConfig,
    pub config_hash: String,
    pub combing: Option<Combing>,
    pub class: Option<GrowthClassification>,
    pub table: Option<PathCountTable>,
    pub perron: Option<PerronData>,
    pub chain: Option<MarkovChain>,
    pub action: Option<ActionHandle>,
    /// Combing label id -> source-group syllable.
    label_syl: Vec<(u32, SylElem)>,
    /// Combing label id -> image syllable under the action (None: killed).
    image_syl: Vec<Option<(u32, SylElem)>>,
    l_hat_cache: OnceLock<f64>,
}

impl Workbench {
    pub fn from_config(cfg: ExperimentConfig) -> Result<Self> {
        let path = cfg
            .presentation
            .clone()
            .ok_or_else(|| Error::Config("config has no presentation path".into()))?;
        let text = std::fs::read_to_string(&path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let (pres, order) = PresentationGraph::from_json(&value)?;
        let mut cfg = cfg;
        if cfg.order_override.is_none() && order != pres.names() {
            cfg.order_override = Some(order);
        }
        Self::from_parts(pres, cfg)
    }

    pub fn from_parts(pres: PresentationGraph, cfg: ExperimentConfig) -> Result<Self> {
        let config_hash = cfg.config_hash();
        let horizon = cfg
            .n_values
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(cfg.drift_horizon)
            .max(41);

        let anticonnected = crate::combing::is_anticonnected(&pres) && pres.vertex_count() >= 2;
        let (combing, class, table, perron, chain) = if anticonnected {
            let combing = build_combing(&pres, cfg.order_override.as_deref())?;
            let class = classify_growth(&combing.graph)?;
            let table = count_spheres(&combing.graph, horizon)?;
            let perron = perron_with(&combing.graph, &class)?;
            let chain = build_markov(&combing.graph, &perron, &class)?;
            (Some(combing), Some(class), Some(table), Some(perron), Some(chain))
        } else {
            (None, None, None, None, None)
        };

        let action = match &cfg.action {
            Some(spec) => Some(spec.build(&pres)?),
            None => None,
        };

        let (label_syl, image_syl) = match (&combing, &action) {
            (Some(c), action) => {
                let gens = pres.standard_generators();
                let alphabet = c.graph.alphabet();
                let mut label_syl = vec![(0u32, SylElem::Int(1)); alphabet.len()];
                let mut image_syl = vec![None; alphabet.len()];
                for g in &gens {
                    let Some(id) = alphabet.id_of(&g.token) else { continue };
                    label_syl[id] = (g.vertex as u32, g.elem);
                    if let Some(a) = action {
                        let src = pres.syllable(g.vertex, g.elem)?;
                        let img = a.apply(&src)?;
                        image_syl[id] =
                            img.syllables().first().copied().map(|s| (s.vertex, s.elem));
                    }
                }
                (label_syl, image_syl)
            }
            _ => (Vec::new(), Vec::new()),
        };

        Ok(Workbench {
            pres,
            cfg,
            config_hash,
            combing,
            class,
            table,
            perron,
            chain,
            action,
            label_syl,
            image_syl,
            l_hat_cache: OnceLock::new(),
        })
    }

    pub fn is_product(&self) -> bool {
        self.combing.is_none()
    }

    pub fn combing(&self) -> Result<&Combing> {
        self.combing.as_ref().ok_or_else(|| {
            Error::Config(
                "the presentation is a direct product (not anticonnected); this experiment needs a combing"
                    .into(),
            )
        })
    }

    fn graph(&self) -> Result<&CombingGraph> {
        Ok(&self.combing()?.graph)
    }

    fn table(&self) -> Result<&PathCountTable> {
        self.table.as_ref().ok_or_else(|| Error::Config("no count table for a product".into()))
    }

    fn chain(&self) -> Result<&MarkovChain> {
        self.chain.as_ref().ok_or_else(|| Error::Config("no Markov chain for a product".into()))
    }

    pub fn action(&self) -> Result<&ActionHandle> {
        self.action
            .as_ref()
            .ok_or_else(|| Error::Config("this experiment needs an action".into()))
    }

    fn space(&self) -> Result<&TreeSpace> {
        Ok(&self.action()?.space)
    }

    fn rng(&self, salt: u64) -> CounterRng {
        CounterRng::new(self.cfg.seed).substream(salt)
    }

    /// Evaluates a combing path in the source group.
    pub fn eval_source(&self, graph: &CombingGraph, path: &GraphPath) -> Result<GpElement> {
        self.pres.normal_form(path.labels(graph).map(|l| {
            let (vertex, elem) = self.label_syl[l];
            Syllable { vertex, elem }
        }))
    }

    /// Evaluates the image of a combing path in the tree's deck group.
    pub fn eval_image(&self, graph: &CombingGraph, path: &GraphPath) -> Result<Point> {
        let target = self.space()?.presentation();
        target.normal_form(
            path.labels(graph)
                .filter_map(|l| self.image_syl[l].map(|(vertex, elem)| Syllable { vertex, elem })),
        )
    }

    /// Images of the first `split` edges and of the rest.
    pub fn eval_image_split(
        &self,
        graph: &CombingGraph,
        path: &GraphPath,
        split: usize,
    ) -> Result<(Point, Point)> {
        let target = self.space()?.presentation();
        let to_syl = |l: usize| self.image_syl[l].map(|(vertex, elem)| Syllable { vertex, elem });
        let head = target
            .normal_form(path.edges[..split].iter().filter_map(|&e| to_syl(graph.edge(e).label)))?;
        let tail = target
            .normal_form(path.edges[split..].iter().filter_map(|&e| to_syl(graph.edge(e).label)))?;
        Ok((head, tail))
    }

    /// The empirical smallest drift over the recurrent components, cached.
    pub fn l_hat(&self) -> Result<f64> {
        if let Some(&v) = self.l_hat_cache.get() {
            return Ok(v);
        }
        let report = exp_drift(self)?;
        let v = report
            .meta_value("L_hat")
            .map(|v| v.as_f64())
            .ok_or_else(|| Error::Config("drift produced no L_hat".into()))?;
        let _ = self.l_hat_cache.set(v);
        Ok(v)
    }

    /// Threshold slope `L_hat - epsilon`, with `epsilon` defaulting to
    /// `L_hat / 2`.
    pub fn threshold_slope(&self) -> Result<f64> {
        let l = self.l_hat()?;
        let eps = self.cfg.epsilon.unwrap_or(l / 2.0);
        Ok(l - eps)
    }

    fn report(&self, experiment: &str) -> Report {
        Report::new(experiment, self.cfg.seed, &self.config_hash)
    }
}

// ---------------------------------------------------------------------------
// Sampling helpers
// ---------------------------------------------------------------------------

/// Chunked deterministic Monte Carlo count of `pred` over uniform sphere
/// samples at radius `n`.
fn mc_sphere_fraction(
    wb: &Workbench,
    n: usize,
    salt: u64,
    pred: impl Fn(&GraphPath) -> bool + Sync,
) -> Result<(f64, (f64, f64))> {
    let graph = wb.graph()?;
    let table = wb.table()?;
    let samples = wb.cfg.samples;
    let base = wb.rng(salt).substream(n as u64);
    let lens = par::chunk_lens(samples);
    let hits: u64 = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
        let chunk_rng = base.substream(ci as u64);
        let mut hits = 0u64;
        for k in 0..lens[ci] {
            let mut rng = chunk_rng.substream(k);
            let path = sample_uniform_path(graph, table, n, &mut rng).expect("nonempty sphere");
            if pred(&path) {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let value = hits as f64 / samples as f64;
    Ok((value, wilson_interval(hits, samples, Z99)))
}

/// Exact fraction of `S_n` satisfying `pred`, by streaming enumeration.
fn exact_sphere_fraction(
    wb: &Workbench,
    n: usize,
    mut pred: impl FnMut(&GraphPath) -> bool,
) -> Result<Ratio<BigInt>> {
    let graph = wb.graph()?;
    let mut hits = BigUint::zero();
    let mut total = BigUint::zero();
    for path in enumerate_paths(graph, n, wb.cfg.exact_cap)? {
        total += 1u32;
        if pred(&path) {
            hits += 1u32;
        }
    }
    Ok(Ratio::new(BigInt::from(hits), BigInt::from(total)))
}

fn sphere_fits_cap(wb: &Workbench, n: usize) -> Result<bool> {
    Ok(wb.table()?.sphere(n) <= &BigUint::from(wb.cfg.exact_cap))
}

/// Emits a fraction row in exact or Monte Carlo mode depending on the cap.
fn fraction_row(
    wb: &Workbench,
    report: &mut Report,
    n: usize,
    statistic: &str,
    salt: u64,
    pred: impl Fn(&GraphPath) -> bool + Sync,
) -> Result<()> {
    if sphere_fits_cap(wb, n)? {
        let value = exact_sphere_fraction(wb, n, &pred)?;
        report.exact(n as u64, statistic, value);
    } else {
        let (value, ci) = mc_sphere_fraction(wb, n, salt, &pred)?;
        report.mc(n as u64, statistic, value, ci);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// exact growth
// ---------------------------------------------------------------------------

pub fn exp_exact_growth(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("exact-growth");
    let graph = wb.graph()?;
    let perron = wb.perron.as_ref().expect("perron data present with combing");
    let window_end = 40usize;
    let table;
    let table_ref = if wb.table()?.horizon() >= window_end {
        wb.table()?
    } else {
        table = count_spheres(graph, window_end)?;
        &table
    };
    let gc = crate::spectral::growth_constant(table_ref, perron, 1..=window_end)?;

    report.meta("lambda", Value::Float(perron.lambda));
    if let Some(l) = perron.lambda_exact {
        report.meta("lambda_exact", Value::Int(l as i64));
    }
    for (n, v) in &gc.window {
        report.exact(
            *n as u64,
            "sphere_size",
            Ratio::from_integer(BigInt::from(table_ref.sphere(*n).clone())),
        );
        match &gc.window_exact {
            Some(exact) => {
                let (_, r) = &exact[*n - 1];
                report.exact(*n as u64, "sn_over_lambda_n", r.clone());
            }
            None => {
                report.push(report::Row {
                    n: Some(*n as u64),
                    statistic: "sn_over_lambda_n".into(),
                    value: Value::Float(*v),
                    ci_low: None,
                    ci_high: None,
                    mode: RowMode::Exact,
                });
            }
        }
    }
    report.meta("growth_constant", Value::Float(gc.constant));
    if gc.subsequential.len() > 1 {
        for (k, c) in gc.subsequential.iter().enumerate() {
            report.meta(&format!("growth_constant_phase{k}"), Value::Float(*c));
        }
    }

    if wb.cfg.verify_nmax > 0 {
        let combing = wb.combing()?;
        verify_combing(combing, &wb.pres, wb.cfg.verify_nmax, wb.cfg.exact_cap)?;
        report.meta("verify_horizon", Value::Int(wb.cfg.verify_nmax as i64));
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// drift
// ---------------------------------------------------------------------------

/// Per recurrent component, the Monte Carlo drift of chain paths conditioned
/// to end in that component; `L_hat` is the minimum.
pub fn exp_drift(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("drift");
    let graph = wb.graph()?;
    let chain = wb.chain()?;
    let class = wb.class.as_ref().expect("classification present");
    let action = wb.action()?;
    let space = &action.space;
    let horizon = wb.cfg.drift_horizon;
    let samples = wb.cfg.samples.min(10_000);
    let recurrent = crate::spectral::recurrent_components(graph, class, chain);

    let base = wb.rng(SALT_DRIFT);
    let lens = par::chunk_lens(samples);
    // Per chunk and component: (count, sum, sum of squares) of d(w_n x, x)/n.
    let stats: Vec<Vec<(u64, f64, f64)>> = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
        let chunk_rng = base.substream(ci as u64);
        let mut acc = vec![(0u64, 0.0f64, 0.0f64); recurrent.len()];
        for k in 0..lens[ci] {
            let mut rng = chunk_rng.substream(k);
            let sample = sample_markov_path(chain, graph, horizon, &mut rng);
            if sample.absorbed_at.is_some() {
                continue;
            }
            let terminal = sample.path.terminal(graph);
            let Some(slot) = recurrent.iter().position(|&c| c == class.scc_of[terminal]) else {
                continue;
            };
            let image = wb.eval_image(graph, &sample.path).expect("image evaluation");
            let d = space.dist_to_base(&image) as f64 / horizon as f64;
            acc[slot].0 += 1;
            acc[slot].1 += d;
            acc[slot].2 += d * d;
        }
        acc
    });

    let mut l_hat = f64::INFINITY;
    for (slot, &scc) in recurrent.iter().enumerate() {
        let (count, sum, sumsq) = stats.iter().fold((0u64, 0.0, 0.0), |a, chunk| {
            (a.0 + chunk[slot].0, a.1 + chunk[slot].1, a.2 + chunk[slot].2)
        });
        if count == 0 {
            continue;
        }
        let mean = sum / count as f64;
        let var = (sumsq / count as f64 - mean * mean).max(0.0);
        let half = Z99 * (var / count as f64).sqrt();
        report.push(report::Row {
            n: Some(horizon as u64),
            statistic: format!("drift_L_component{scc}"),
            value: Value::Float(mean),
            ci_low: Some(mean - half),
            ci_high: Some(mean + half),
            mode: RowMode::Mc,
        });
        l_hat = l_hat.min(mean);
    }
    if !l_hat.is_finite() {
        return Err(Error::Config("no chain path reached a recurrent component".into()));
    }
    report.meta("L_hat", Value::Float(l_hat));
    report.meta("lipschitz", Value::Int(action.lipschitz as i64));
    Ok(report)
}

// ---------------------------------------------------------------------------
// displacement
// ---------------------------------------------------------------------------

/// Fraction of the sphere whose orbit displacement is at least
/// `(L_hat - epsilon) n`. For a direct product with a factor action the
/// fraction is exact (displacement is the kept-factor length, so the count
/// is a truncated sphere convolution); there the threshold is
/// `(1 - epsilon) n`, since no drift is measurable and displacement per
/// step is at most one.
pub fn exp_displacement(wb: &Workbench) -> Result<Report> {
    if wb.is_product() {
        return product_displacement_fractions(wb);
    }
    let mut report = wb.report("displacement");
    let graph = wb.graph()?;
    let space = wb.space()?;
    let slope = wb.threshold_slope()?;
    report.meta("threshold_slope", Value::Float(slope));
    for &n in &wb.cfg.n_values {
        let bound = (slope * n as f64).ceil() as u64;
        fraction_row(wb, &mut report, n, "displacement_fraction", SALT_DISPLACEMENT, |path| {
            let image = wb.eval_image(graph, path).expect("image evaluation");
            space.dist_to_base(&image) >= bound
        })?;
    }
    Ok(report)
}

fn product_displacement_fractions(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("displacement");
    let (keep, kernel) = product_split(wb)?;
    let eps = wb
        .cfg
        .epsilon
        .ok_or_else(|| Error::Config("product displacement needs an explicit epsilon".into()))?;
    let slope = 1.0 - eps;
    report.meta("threshold_slope", Value::Float(slope));
    let n_max = wb.cfg.n_values.iter().copied().max().unwrap_or(0);
    let keep_spheres = sphere_counts(&wb.pres.induced(&keep)?, n_max)?;
    let kernel_spheres = sphere_counts(&wb.pres.induced(&kernel)?, n_max)?;
    for &n in &wb.cfg.n_values {
        let bound = (slope * n as f64).ceil() as usize;
        // #{g in S_n : |kept part| >= bound}, by convolution.
        let mut hits = BigUint::zero();
        let mut total = BigUint::zero();
        for i in 0..=n {
            let term = &keep_spheres[i] * &kernel_spheres[n - i];
            if i >= bound {
                hits += &term;
            }
            total += term;
        }
        report.exact(
            n as u64,
            "displacement_fraction",
            Ratio::new(BigInt::from(hits), BigInt::from(total)),
        );
    }
    Ok(report)
}

/// The `(keep, kernel)` join split of a product workbench, validated.
fn product_split(wb: &Workbench) -> Result<(Vec<usize>, Vec<usize>)> {
    let action = wb.action()?;
    let ActionKind::KillExcept { keep } = &action.kind else {
        return Err(Error::Config("product mode needs a factor projection action".into()));
    };
    let mut keep_sorted = keep.clone();
    keep_sorted.sort_unstable();
    if !wb.pres.complement_components().contains(&keep_sorted) {
        return Err(Error::Config("kept set is not a join factor of the product".into()));
    }
    let kernel = (0..wb.pres.vertex_count()).filter(|v| !keep.contains(v)).collect();
    Ok((keep_sorted, kernel))
}

// ---------------------------------------------------------------------------
// translation-length genericity
// ---------------------------------------------------------------------------

/// Fractions of the sphere that are loxodromic and whose translation length
/// grows linearly. For direct products with a factor action, the loxodromic
/// fraction is computed exactly from the kernel ball counts instead.
pub fn exp_translation_genericity(wb: &Workbench) -> Result<Report> {
    if wb.is_product() {
        return product_lox_fractions(wb);
    }
    let mut report = wb.report("translation-genericity");
    let graph = wb.graph()?;
    let space = wb.space()?;
    let slope = wb.threshold_slope()?;
    report.meta("threshold_slope", Value::Float(slope));
    for &n in &wb.cfg.n_values {
        let bound = (slope * n as f64).ceil() as u64;
        fraction_row(wb, &mut report, n, "lox_fraction", SALT_TRANSLATION, |path| {
            let image = wb.eval_image(graph, path).expect("image evaluation");
            translation_length_exact_tree(space, &image).expect("tau") > 0
        })?;
        fraction_row(wb, &mut report, n, "tau_linear_fraction", SALT_TRANSLATION + 100, |path| {
            let image = wb.eval_image(graph, path).expect("image evaluation");
            translation_length_exact_tree(space, &image).expect("tau") >= bound
        })?;
    }
    Ok(report)
}

/// Exact loxodromic fractions for a product acting through a join-factor
/// projection: an element is elliptic iff it lies in the kernel factor, so
/// the fractions reduce to kernel sphere/ball counts.
fn product_lox_fractions(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("translation-genericity");
    let (keep, kernel) = product_split(wb)?;
    for &v in &keep {
        if !matches!(wb.pres.group(v), VertexGroup::Integers) {
            return Err(Error::Config(
                "product lox fractions need torsion-free (Z) kept factors".into(),
            ));
        }
    }
    let kernel_pres = wb.pres.induced(&kernel)?;
    let n_max = wb.cfg.n_values.iter().copied().max().unwrap_or(0);
    let group_spheres = sphere_counts(&wb.pres, n_max)?;
    let kernel_spheres = sphere_counts(&kernel_pres, n_max)?;
    let mut gb = BigUint::zero();
    let mut kb = BigUint::zero();
    let mut group_balls = Vec::with_capacity(n_max + 1);
    let mut kernel_balls = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        gb += &group_spheres[n];
        kb += &kernel_spheres[n];
        group_balls.push(gb.clone());
        kernel_balls.push(kb.clone());
    }
    for &n in &wb.cfg.n_values {
        let sphere = Ratio::new(
            BigInt::from(&group_spheres[n] - &kernel_spheres[n]),
            BigInt::from(group_spheres[n].clone()),
        );
        report.exact(n as u64, "lox_fraction_sphere", sphere);
        let ball = Ratio::new(
            BigInt::from(&group_balls[n] - &kernel_balls[n]),
            BigInt::from(group_balls[n].clone()),
        );
        report.exact(n as u64, "lox_fraction_ball", ball);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Markov genericity
// ---------------------------------------------------------------------------

/// `P(tau(w_n) >= (L_hat - eps) n)` and `P(w_n loxodromic)` over chain paths.
pub fn exp_markov_genericity(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("markov-genericity");
    let graph = wb.graph()?;
    let chain = wb.chain()?;
    let space = wb.space()?;
    let slope = wb.threshold_slope()?;
    report.meta("threshold_slope", Value::Float(slope));
    let base = wb.rng(SALT_MARKOV);
    for &n in &wb.cfg.n_values {
        let bound = (slope * n as f64).ceil() as u64;
        let n_rng = base.substream(n as u64);
        let lens = par::chunk_lens(wb.cfg.samples);
        let sums: Vec<(u64, u64)> = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
            let chunk_rng = n_rng.substream(ci as u64);
            let mut lox = 0u64;
            let mut linear = 0u64;
            for k in 0..lens[ci] {
                let mut rng = chunk_rng.substream(k);
                let sample = sample_markov_path(chain, graph, n, &mut rng);
                let image = wb.eval_image(graph, &sample.path).expect("image evaluation");
                let tau = translation_length_exact_tree(space, &image).expect("tau");
                if tau > 0 {
                    lox += 1;
                }
                if tau >= bound {
                    linear += 1;
                }
            }
            (lox, linear)
        });
        let (lox, linear) = sums.iter().fold((0u64, 0u64), |a, &(x, y)| (a.0 + x, a.1 + y));
        let total = wb.cfg.samples;
        report.mc(
            n as u64,
            "markov_lox_prob",
            lox as f64 / total as f64,
            wilson_interval(lox, total, Z99),
        );
        report.mc(
            n as u64,
            "markov_tau_linear_prob",
            linear as f64 / total as f64,
            wilson_interval(linear, total, Z99),
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// subgroup density
// ---------------------------------------------------------------------------

/// Density of the vertex-span subgroup `H` in balls: exact at every `n` via
/// the isometrically embedded span counts, cross-checked by the membership
/// oracle (full ball enumeration when it fits, Monte Carlo otherwise).
pub fn exp_subgroup_density(wb: &Workbench) -> Result<Report> {
    let span_names = wb
        .cfg
        .subgroup
        .as_ref()
        .ok_or_else(|| Error::Config("subgroup density needs cfg.subgroup".into()))?;
    let span: Vec<usize> = span_names
        .iter()
        .map(|n| {
            wb.pres.vertex_by_name(n).ok_or_else(|| Error::Config(format!("unknown vertex `{n}`")))
        })
        .collect::<Result<_>>()?;
    let mut report = wb.report("subgroup-density");
    let sub_pres = wb.pres.induced(&span)?;
    let n_max = wb.cfg.n_values.iter().copied().max().unwrap_or(0);
    let group_balls = ball_counts(&wb.pres, n_max)?;
    let sub_balls = ball_counts(&sub_pres, n_max)?;

    // Membership oracle on canonical forms: every syllable lies in the span.
    let in_span =
        |g: &GpElement| g.syllables().iter().all(|s| span.contains(&(s.vertex as usize)));

    for &n in &wb.cfg.n_values {
        report.exact(
            n as u64,
            "density",
            Ratio::new(BigInt::from(sub_balls[n].clone()), BigInt::from(group_balls[n].clone())),
        );
        // Membership-oracle route (needs the combing for enumeration or
        // sampling; skipped for products).
        if wb.is_product() {
            continue;
        }
        let graph = wb.graph()?;
        let table = wb.table()?;
        if table.ball(n) <= BigUint::from(wb.cfg.exact_cap) {
            let mut hits = BigUint::zero();
            for m in 0..=n {
                for path in enumerate_paths(graph, m, wb.cfg.exact_cap)? {
                    if in_span(&wb.eval_source(graph, &path)?) {
                        hits += 1u32;
                    }
                }
            }
            report.exact(
                n as u64,
                "density_oracle",
                Ratio::new(BigInt::from(hits), BigInt::from(table.ball(n))),
            );
        } else {
            // Uniform ball sampling: radius by sphere weight, then a uniform
            // sphere path.
            let ball = table.ball(n);
            let base = wb.rng(SALT_SUBGROUP).substream(n as u64);
            let lens = par::chunk_lens(wb.cfg.samples);
            let hits: u64 = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
                let chunk_rng = base.substream(ci as u64);
                let mut hits = 0u64;
                for k in 0..lens[ci] {
                    let mut rng = chunk_rng.substream(k);
                    let mut x = rng.next_biguint_below(&ball);
                    let mut radius = 0usize;
                    while x >= *table.sphere(radius) {
                        x -= table.sphere(radius);
                        radius += 1;
                    }
                    let path = sample_uniform_path(graph, table, radius, &mut rng).expect("sphere");
                    if in_span(&wb.eval_source(graph, &path).expect("evaluation")) {
                        hits += 1;
                    }
                }
                hits
            })
            .into_iter()
            .sum();
            report.mc(
                n as u64,
                "density_oracle",
                hits as f64 / wb.cfg.samples as f64,
                wilson_interval(hits, wb.cfg.samples, Z99),
            );
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Gromov products
// ---------------------------------------------------------------------------

/// Distributions of `(gx, g^{-1}x)_x`, `(i(g)x, t(g)^{-1}x)_x` and
/// `(i(g)x, gx)_x` over the sphere (sampled). Product mode samples the
/// sphere by factor decomposition and reports `(gx, g^{-1}x)_x` only (the
/// half-splitting needs combing paths): there the product depends only on
/// the kept part, and a positive fraction keeps it large — the opposite of
/// the anticonnected case.
pub fn exp_gromov_products(wb: &Workbench) -> Result<Report> {
    if wb.is_product() {
        return product_gromov_products(wb);
    }
    let mut report = wb.report("gromov-products");
    let graph = wb.graph()?;
    let table = wb.table()?;
    let space = wb.space()?;
    let target = space.presentation().clone();
    let base = wb.rng(SALT_GROMOV);
    for &n in &wb.cfg.n_values {
        let split = n / 2;
        let n_rng = base.substream(n as u64);
        let lens = par::chunk_lens(wb.cfg.samples);
        // Doubled products, gathered per chunk.
        let chunks: Vec<(Vec<i64>, Vec<i64>, Vec<i64>)> =
            par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
                let chunk_rng = n_rng.substream(ci as u64);
                let mut gg = Vec::with_capacity(lens[ci] as usize);
                let mut it = Vec::with_capacity(lens[ci] as usize);
                let mut ig = Vec::with_capacity(lens[ci] as usize);
                for k in 0..lens[ci] {
                    let mut rng = chunk_rng.substream(k);
                    let path = sample_uniform_path(graph, table, n, &mut rng).expect("sphere");
                    let g = wb.eval_image(graph, &path).expect("image");
                    let ginv = target.invert(&g).expect("inverse");
                    let (head, tail) =
                        wb.eval_image_split(graph, &path, split).expect("split image");
                    let tail_inv = target.invert(&tail).expect("inverse");
                    gg.push(space.gromov2(&g, &ginv));
                    it.push(space.gromov2(&head, &tail_inv));
                    ig.push(space.gromov2(&head, &g));
                }
                (gg, it, ig)
            });
        let mut gg = Vec::new();
        let mut it = Vec::new();
        let mut ig = Vec::new();
        for (a, b, c) in chunks {
            gg.extend(a);
            it.extend(b);
            ig.extend(c);
        }
        for (name, values) in [("gp_g_ginv", gg), ("gp_i_tinv", it), ("gp_i_g", ig)] {
            emit_gromov_stats(&mut report, n, name, values);
        }
    }
    Ok(report)
}

fn emit_gromov_stats(report: &mut Report, n: usize, name: &str, mut values2: Vec<i64>) {
    values2.sort_unstable();
    let med = values2[values2.len() / 2] as f64 / 2.0;
    let q90 = values2[(values2.len() * 9) / 10] as f64 / 2.0;
    let mean = values2.iter().sum::<i64>() as f64 / (2.0 * values2.len() as f64);
    let ge1 = values2.iter().filter(|&&v| v >= 2).count() as u64;
    let total = values2.len() as u64;
    report.mc(n as u64, &format!("{name}_median"), med, (med, med));
    report.mc(n as u64, &format!("{name}_q90"), q90, (q90, q90));
    report.mc(n as u64, &format!("{name}_mean"), mean, (mean, mean));
    report.mc(
        n as u64,
        &format!("{name}_frac_ge1"),
        ge1 as f64 / total as f64,
        wilson_interval(ge1, total, Z99),
    );
}

/// Product-mode Gromov products: sample the sphere of `keep x kernel` by
/// drawing the radius split from the exact convolution weights, then a
/// uniform kept-factor sphere element; `(gx, g^{-1}x)_x = (ux, u^{-1}x)_x`
/// for `g = (u, v)`.
fn product_gromov_products(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("gromov-products");
    let (keep, kernel) = product_split(wb)?;
    let keep_pres = wb.pres.induced(&keep)?;
    let space = &wb.action()?.space;
    let keep_combing = build_combing(&keep_pres, None)?;
    let n_max = wb.cfg.n_values.iter().copied().max().unwrap_or(0);
    let keep_table = count_spheres(&keep_combing.graph, n_max)?;
    let kernel_spheres = sphere_counts(&wb.pres.induced(&kernel)?, n_max)?;
    // Combing label -> syllable of the kept presentation.
    let gens = keep_pres.standard_generators();
    let alphabet = keep_combing.graph.alphabet();
    let mut label_syl = vec![(0u32, SylElem::Int(1)); alphabet.len()];
    for g in &gens {
        if let Some(id) = alphabet.id_of(&g.token) {
            label_syl[id] = (g.vertex as u32, g.elem);
        }
    }

    let base = wb.rng(SALT_GROMOV);
    for &n in &wb.cfg.n_values {
        // Split weights: #\{(u, v) : |u| = i\} = s_i(keep) * s_{n-i}(kernel).
        let weights: Vec<BigUint> =
            (0..=n).map(|i| keep_table.sphere(i) * &kernel_spheres[n - i]).collect();
        let total: BigUint = weights.iter().sum();
        if total.is_zero() {
            continue;
        }
        let n_rng = base.substream(n as u64);
        let lens = par::chunk_lens(wb.cfg.samples);
        let chunks: Vec<Vec<i64>> = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
            let chunk_rng = n_rng.substream(ci as u64);
            let mut out = Vec::with_capacity(lens[ci] as usize);
            for k in 0..lens[ci] {
                let mut rng = chunk_rng.substream(k);
                let mut x = rng.next_biguint_below(&total);
                let mut i = 0usize;
                while x >= weights[i] {
                    x -= &weights[i];
                    i += 1;
                }
                let path = sample_uniform_path(&keep_combing.graph, &keep_table, i, &mut rng)
                    .expect("kept sphere");
                let u = keep_pres
                    .normal_form(path.labels(&keep_combing.graph).map(|l| {
                        let (vertex, elem) = label_syl[l];
                        Syllable { vertex, elem }
                    }))
                    .expect("kept element");
                let uinv = keep_pres.invert(&u).expect("inverse");
                out.push(space.gromov2(&u, &uinv));
            }
            out
        });
        let values: Vec<i64> = chunks.into_iter().flatten().collect();
        emit_gromov_stats(&mut report, n, "gp_g_ginv", values);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// shadow decay
// ---------------------------------------------------------------------------

/// Counting-measure mass of shadows around `gx` for a grid of distance
/// parameters, plus the chain's ever-hit probability. Each sample's maximal
/// shadow depth is computed once, so profiles are monotone by construction.
pub fn exp_shadow_decay(wb: &Workbench) -> Result<Report> {
    let mut report = wb.report("shadow-decay");
    let graph = wb.graph()?;
    let table = wb.table()?;
    let space = wb.space()?;
    let n_max = wb.cfg.n_values.iter().copied().max().unwrap_or(8);

    // Shadow center: configured word, or a deterministic sampled element.
    let center: Point = match &wb.cfg.shadow_center {
        Some(tokens) => {
            let g = wb.pres.evaluate_word(tokens)?;
            wb.action()?.apply(&g)?
        }
        None => {
            let mut rng = wb.rng(SALT_SHADOW).substream(0xcafe);
            let path = sample_uniform_path(graph, table, n_max, &mut rng)?;
            wb.eval_image(graph, &path)?
        }
    };
    let d_center = space.dist_to_base(&center) as i64;
    report.meta("shadow_center_distance", Value::Int(d_center));
    let radii: Vec<u64> =
        wb.cfg.radii.clone().unwrap_or_else(|| (0..=(d_center.max(0) as u64).min(10)).collect());

    // Depth of z into the shadow family: m(z) = 2 (y, z)_x - 2 d(x, z);
    // z lies in S_x(y, R) iff m(z) >= -2R, and r = d(x, y) - R.
    let depth2 = |z: &Point| space.gromov2(&center, z) - 2 * space.dist_to_base(z) as i64;
    let in_shadow_r = |m2: i64, r: u64| m2 >= 2 * (r as i64 - d_center);

    for &n in &wb.cfg.n_values {
        if sphere_fits_cap(wb, n)? {
            let mut total = BigUint::zero();
            let mut hits = vec![BigUint::zero(); radii.len()];
            for path in enumerate_paths(graph, n, wb.cfg.exact_cap)? {
                let m2 = depth2(&wb.eval_image(graph, &path)?);
                total += 1u32;
                for (slot, &r) in radii.iter().enumerate() {
                    if in_shadow_r(m2, r) {
                        hits[slot] += 1u32;
                    }
                }
            }
            for (slot, &r) in radii.iter().enumerate() {
                report.exact(
                    n as u64,
                    &format!("pn_shadow_r{r}"),
                    Ratio::new(BigInt::from(hits[slot].clone()), BigInt::from(total.clone())),
                );
            }
        } else {
            let base = wb.rng(SALT_SHADOW).substream(n as u64);
            let lens = par::chunk_lens(wb.cfg.samples);
            let counts: Vec<Vec<u64>> = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
                let chunk_rng = base.substream(ci as u64);
                let mut hits = vec![0u64; radii.len()];
                for k in 0..lens[ci] {
                    let mut rng = chunk_rng.substream(k);
                    let path = sample_uniform_path(graph, table, n, &mut rng).expect("sphere");
                    let m2 = depth2(&wb.eval_image(graph, &path).expect("image"));
                    for (slot, &r) in radii.iter().enumerate() {
                        if in_shadow_r(m2, r) {
                            hits[slot] += 1;
                        }
                    }
                }
                hits
            });
            for (slot, &r) in radii.iter().enumerate() {
                let h: u64 = counts.iter().map(|c| c[slot]).sum();
                report.mc(
                    n as u64,
                    &format!("pn_shadow_r{r}"),
                    h as f64 / wb.cfg.samples as f64,
                    wilson_interval(h, wb.cfg.samples, Z99),
                );
            }
        }
    }

    // Ever-hit probability for the Markov chain up to the horizon.
    let chain = wb.chain()?;
    let horizon = wb.cfg.drift_horizon.min(200);
    let base = wb.rng(SALT_SHADOW).substream(0xbeef);
    let lens = par::chunk_lens(wb.cfg.samples.min(10_000));
    let hit_samples: u64 = lens.iter().sum();
    let target = space.presentation().clone();
    let counts: Vec<Vec<u64>> = par::map_chunks(ExecMode::auto(), lens.len(), |ci| {
        let chunk_rng = base.substream(ci as u64);
        let mut hits = vec![0u64; radii.len()];
        for k in 0..lens[ci] {
            let mut rng = chunk_rng.substream(k);
            let sample = sample_markov_path(chain, graph, horizon, &mut rng);
            // Maximal depth over the orbit prefix.
            let mut image = target.one();
            let mut best = depth2(&image);
            for &e in &sample.path.edges {
                if let Some((vertex, elem)) = wb.image_syl[graph.edge(e).label] {
                    image = target
                        .multiply(
                            &image,
                            &target.syllable(vertex as usize, elem).expect("syllable"),
                        )
                        .expect("image step");
                }
                best = best.max(depth2(&image));
            }
            for (slot, &r) in radii.iter().enumerate() {
                if in_shadow_r(best, r) {
                    hits[slot] += 1;
                }
            }
        }
        hits
    });
    for (slot, &r) in radii.iter().enumerate() {
        let h: u64 = counts.iter().map(|c| c[slot]).sum();
        report.mc(
            horizon as u64,
            &format!("hit_prob_r{r}"),
            h as f64 / hit_samples as f64,
            wilson_interval(h, hit_samples, Z99),
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// growth quasitightness
// ---------------------------------------------------------------------------

/// `P^n(Y_{w,c})`: the measure of paths that do NOT `c`-almost contain `w`.
/// A path almost contains `w` iff some subpath evaluates into
/// `B_c^{-1} w B_c^{-1}`; geodesicity confines candidate subpaths to lengths
/// within `[|w| - 2c, |w| + 2c]`.
pub fn exp_quasitightness(wb: &Workbench) -> Result<Report> {
    let word_tokens = wb
        .cfg
        .word
        .as_ref()
        .ok_or_else(|| Error::Config("quasitightness needs cfg.word".into()))?;
    let c = wb.cfg.almost_contain_c;
    let mut report = wb.report("quasitightness");
    let graph = wb.graph()?;
    let table = wb.table()?;
    let w = wb.pres.evaluate_word(word_tokens)?;
    let w_len = wb.pres.word_length(&w);
    report.meta("w_length", Value::Int(w_len as i64));
    report.meta("c", Value::Int(c as i64));

    // Target set: canonical forms of a^{-1} w b^{-1} for a, b in B_c.
    let ball = crate::group::ball_elements(&wb.pres, c)?;
    let mut targets = std::collections::HashSet::new();
    for a in &ball {
        let left = wb.pres.multiply(&wb.pres.invert(a)?, &w)?;
        for b in &ball {
            targets.insert(wb.pres.multiply(&left, &wb.pres.invert(b)?)?);
        }
    }
    let min_len = w_len.saturating_sub(2 * c) as usize;
    let max_len = (w_len + 2 * c) as usize;

    let avoids = |path: &GraphPath| -> bool {
        // The subpath from i to j evaluates to p_i^{-1} p_j; slide a window
        // of admissible lengths over each start i.
        let n = path.len();
        for i in 0..=n {
            let mut sub = wb.pres.one();
            let hi = (i + max_len).min(n);
            if min_len == 0 && targets.contains(&sub) {
                return false;
            }
            for (offset, &e) in path.edges[i..hi].iter().enumerate() {
                let (vertex, elem) = wb.label_syl[graph.edge(e).label];
                sub = wb
                    .pres
                    .multiply(&sub, &wb.pres.syllable(vertex as usize, elem).expect("syllable"))
                    .expect("subword");
                let len = offset + 1;
                if len >= min_len.max(1) && targets.contains(&sub) {
                    return false;
                }
            }
        }
        true
    };

    for &n in &wb.cfg.n_values {
        if sphere_fits_cap(wb, n)? && table.sphere(n).to_u64().unwrap_or(u64::MAX) <= 100_000 {
            let value = exact_sphere_fraction(wb, n, avoids)?;
            report.exact(n as u64, "avoid_prob", value);
        } else {
            let (value, ci) = mc_sphere_fraction(wb, n, SALT_QUASI, avoids)?;
            report.mc(n as u64, "avoid_prob", value, ci);
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

pub const EXPERIMENT_IDS: &[&str] = &[
    "exact-growth",
    "drift",
    "displacement",
    "translation-genericity",
    "markov-genericity",
    "subgroup-density",
    "gromov-products",
    "shadow-decay",
    "quasitightness",
];

pub fn run_experiment(id: &str, wb: &Workbench) -> Result<Report> {
    match id {
        "exact-growth" => exp_exact_growth(wb),
        "drift" => exp_drift(wb),
        "displacement" => exp_displacement(wb),
        "translation-genericity" => exp_translation_genericity(wb),
        "markov-genericity" => exp_markov_genericity(wb),
        "subgroup-density" => exp_subgroup_density(wb),
        "gromov-products" => exp_gromov_products(wb),
        "shadow-decay" => exp_shadow_decay(wb),
        "quasitightness" => exp_quasitightness(wb),
        other => Err(Error::Config(format!(
            "unknown experiment `{other}`; known: {}",
            EXPERIMENT_IDS.join(", ")
        ))),
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn f2_self_config() -> ExperimentConfig {
        ExperimentConfig {
            action: Some(ActionSpec {
                space: SpaceSpec {
                    kind: "free_product".into(),
                    factors: serde_json::json!([
                        {"name": "a", "group": "Z"},
                        {"name": "b", "group": "Z"}
                    ]),
                },
                hom: HomSpec { kind: "identity".into(), keep: vec![] },
            }),
            n_values: vec![4, 6],
            samples: 2_000,
            seed: 11,
            drift_horizon: 60,
            ..Default::default()
        }
    }

    fn f2_bench() -> Workbench {
        Workbench::from_parts(PresentationGraph::free_group(2), f2_self_config()).unwrap()
    }

    #[test]
    fn sphere_counts_handle_products() {
        // F2 x F3: convolution of free-group spheres.
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let counts = sphere_counts(&p, 3).unwrap();
        assert_eq!(counts[1].to_u64(), Some(10));
        assert_eq!(counts[2].to_u64(), Some(66));
        // n = 3: 36*1 + 12*6 + 4*30 + 1*150 = 378.
        assert_eq!(counts[3].to_u64(), Some(378));
        // Matches the BFS oracle on the full product.
        let oracle = crate::group::bfs_sphere_oracle(&p, 3, 1_000_000).unwrap();
        assert_eq!(oracle.sphere_sizes(), vec![1, 10, 66, 378]);
    }

    #[test]
    fn sphere_counts_single_vertices() {
        let z = PresentationGraph::free_group(1);
        assert_eq!(
            sphere_counts(&z, 4).unwrap().iter().map(|b| b.to_u64().unwrap()).collect::<Vec<_>>(),
            vec![1, 2, 2, 2, 2]
        );
        let z2 = PresentationGraph::free_product_z2(1);
        assert_eq!(
            sphere_counts(&z2, 3).unwrap().iter().map(|b| b.to_u64().unwrap()).collect::<Vec<_>>(),
            vec![1, 1, 0, 0]
        );
    }

    #[test]
    fn drift_of_free_group_on_its_tree_is_one() {
        // Every chain path spells a reduced word mapping to itself: d = n.
        let wb = f2_bench();
        let report = exp_drift(&wb).unwrap();
        let l = report.meta_value("L_hat").unwrap().as_f64();
        assert!((l - 1.0).abs() < 1e-12, "L_hat = {l}");
    }

    #[test]
    fn displacement_fraction_is_one_for_self_action() {
        let wb = f2_bench();
        let report = exp_displacement(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            let v = report.value_at("displacement_fraction", n as u64).unwrap();
            assert_eq!(v.as_f64(), 1.0, "n = {n}");
        }
    }

    #[test]
    fn lox_fraction_is_one_for_self_action() {
        // Every nontrivial free-group element is loxodromic on its own tree.
        let wb = f2_bench();
        let report = exp_translation_genericity(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            let v = report.value_at("lox_fraction", n as u64).unwrap();
            assert_eq!(v.as_f64(), 1.0, "n = {n}");
        }
    }

    #[test]
    fn product_control_matches_known_values() {
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let cfg = ExperimentConfig {
            action: Some(ActionSpec {
                space: SpaceSpec {
                    kind: "free_product".into(),
                    factors: serde_json::json!([
                        {"name": "a", "group": "Z"},
                        {"name": "b", "group": "Z"}
                    ]),
                },
                hom: HomSpec {
                    kind: "factor_projection".into(),
                    keep: vec!["a".into(), "b".into()],
                },
            }),
            n_values: vec![2, 5],
            ..Default::default()
        };
        let wb = Workbench::from_parts(p, cfg).unwrap();
        assert!(wb.is_product());
        let report = exp_translation_genericity(&wb).unwrap();
        // Sphere fraction at n = 2 is 36/66.
        match report.value_at("lox_fraction_sphere", 2).unwrap() {
            Value::Exact(r) => {
                assert_eq!(r, &Ratio::new(BigInt::from(36), BigInt::from(66)));
            }
            other => panic!("expected exact, got {other:?}"),
        }
    }

    #[test]
    fn product_displacement_decays() {
        // F2 x F3 on the F2 tree: the fraction of the sphere with
        // displacement >= 0.9 n tends to zero; exact convolution values.
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let cfg = ExperimentConfig {
            action: Some(ActionSpec {
                space: SpaceSpec {
                    kind: "free_product".into(),
                    factors: serde_json::json!([
                        {"name": "a", "group": "Z"},
                        {"name": "b", "group": "Z"}
                    ]),
                },
                hom: HomSpec {
                    kind: "factor_projection".into(),
                    keep: vec!["a".into(), "b".into()],
                },
            }),
            n_values: vec![10, 20, 30],
            epsilon: Some(0.1),
            ..Default::default()
        };
        let wb = Workbench::from_parts(p, cfg).unwrap();
        let report = exp_displacement(&wb).unwrap();
        let f10 = report.value_at("displacement_fraction", 10).unwrap().as_f64();
        let f20 = report.value_at("displacement_fraction", 20).unwrap().as_f64();
        let f30 = report.value_at("displacement_fraction", 30).unwrap().as_f64();
        assert!(f10 > f20 && f20 > f30, "fractions should decay: {f10} {f20} {f30}");
        assert!(f30 < 0.01, "f30 = {f30}");
        // Missing epsilon is a config error in product mode.
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let mut cfg2 = p4_like_product_cfg();
        cfg2.epsilon = None;
        let wb2 = Workbench::from_parts(p, cfg2).unwrap();
        assert!(matches!(exp_displacement(&wb2), Err(Error::Config(_))));

        fn p4_like_product_cfg() -> ExperimentConfig {
            ExperimentConfig {
                action: Some(ActionSpec {
                    space: SpaceSpec {
                        kind: "free_product".into(),
                        factors: serde_json::json!([
                            {"name": "a", "group": "Z"},
                            {"name": "b", "group": "Z"}
                        ]),
                    },
                    hom: HomSpec {
                        kind: "factor_projection".into(),
                        keep: vec!["a".into(), "b".into()],
                    },
                }),
                n_values: vec![6],
                ..Default::default()
            }
        }
    }

    #[test]
    fn product_gromov_products_stay_positive() {
        // In the product a positive fraction of the ball has a large
        // (gx, g^-1 x)_x: the kept part is trivial or symmetric often
        // enough. Contrast: combing-mode medians on a self-action are 0.
        let p = PresentationGraph::raag_complete_bipartite(2, 3);
        let cfg = ExperimentConfig {
            action: Some(ActionSpec {
                space: SpaceSpec {
                    kind: "free_product".into(),
                    factors: serde_json::json!([
                        {"name": "a", "group": "Z"},
                        {"name": "b", "group": "Z"}
                    ]),
                },
                hom: HomSpec {
                    kind: "factor_projection".into(),
                    keep: vec!["a".into(), "b".into()],
                },
            }),
            n_values: vec![12, 24],
            samples: 4_000,
            seed: 3,
            ..Default::default()
        };
        let wb = Workbench::from_parts(p, cfg).unwrap();
        let report = exp_gromov_products(&wb).unwrap();
        let f12 = report.value_at("gp_g_ginv_frac_ge1", 12).unwrap().as_f64();
        let f24 = report.value_at("gp_g_ginv_frac_ge1", 24).unwrap().as_f64();
        // Bounded away from zero at both horizons (the defect of the
        // product action); generic combed actions drive this to zero.
        assert!(f12 > 0.02 && f24 > 0.02, "fractions: {f12} {f24}");
    }

    #[test]
    fn subgroup_density_f2_exact_value() {
        // <a> in F2 at n = 3: (2n+1)/(2*3^n - 1) = 7/53.
        let cfg = ExperimentConfig {
            subgroup: Some(vec!["a".into()]),
            n_values: vec![3],
            samples: 1_000,
            ..Default::default()
        };
        let wb = Workbench::from_parts(PresentationGraph::free_group(2), cfg).unwrap();
        let report = exp_subgroup_density(&wb).unwrap();
        match report.value_at("density", 3).unwrap() {
            Value::Exact(r) => assert_eq!(r, &Ratio::new(BigInt::from(7), BigInt::from(53))),
            other => panic!("expected exact, got {other:?}"),
        }
        // The membership-oracle route agrees.
        match report.value_at("density_oracle", 3).unwrap() {
            Value::Exact(r) => assert_eq!(r, &Ratio::new(BigInt::from(7), BigInt::from(53))),
            other => panic!("expected exact, got {other:?}"),
        }
    }

    #[test]
    fn gromov_products_prefix_identity() {
        // For the self-action, (i(g)x, gx)_x = n/2 exactly on every path.
        let wb = f2_bench();
        let report = exp_gromov_products(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            let med = report.value_at("gp_i_g_median", n as u64).unwrap().as_f64();
            assert_eq!(med, (n / 2) as f64);
        }
    }

    #[test]
    fn gromov_median_sublinear_on_quotient_action() {
        // Median of (gx, g^-1 x)_x grows slower than n/10 on the A(P4)
        // quotient action.
        let p = PresentationGraph::raag_path(4);
        let cfg = ExperimentConfig {
            n_values: vec![8, 16, 24],
            samples: 4_000,
            seed: 21,
            ..p4_quotient_cfg()
        };
        let wb = Workbench::from_parts(p, cfg).unwrap();
        let report = exp_gromov_products(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            let med = report.value_at("gp_g_ginv_median", n as u64).unwrap().as_f64();
            assert!(med < n as f64 / 10.0, "median {med} at n = {n}");
        }

        fn p4_quotient_cfg() -> ExperimentConfig {
            ExperimentConfig {
                action: Some(ActionSpec {
                    space: SpaceSpec {
                        kind: "free_product".into(),
                        factors: serde_json::json!([
                            {"name": "a", "group": "Z"},
                            {"name": "d", "group": "Z"}
                        ]),
                    },
                    hom: HomSpec {
                        kind: "kill_except".into(),
                        keep: vec!["a".into(), "d".into()],
                    },
                }),
                ..Default::default()
            }
        }
    }

    #[test]
    fn shadow_profile_halves_geometrically_on_free_group() {
        // Exact F2 self-action profiles: the sphere mass of a shadow drops
        // by at least half per unit of distance parameter (it is 3^{-r} up
        // to the flat region where the shadow swallows the whole sphere).
        let cfg = ExperimentConfig {
            n_values: vec![6],
            shadow_center: Some(vec!["a".into(), "b".into(), "a".into()]),
            radii: Some((0..=6).collect()),
            ..f2_self_config()
        };
        let wb = Workbench::from_parts(PresentationGraph::free_group(2), cfg).unwrap();
        let report = exp_shadow_decay(&wb).unwrap();
        let profile: Vec<f64> = (0..=6)
            .map(|r| report.value_at(&format!("pn_shadow_r{r}"), 6).unwrap().as_f64())
            .collect();
        for w in profile.windows(2) {
            if w[0] > 0.0 && w[0] < 1.0 {
                assert!(w[1] <= 0.51 * w[0], "profile does not halve: {profile:?}");
            }
        }
        assert!(profile[0] > 0.0);
    }

    #[test]
    fn shadow_profiles_are_monotone() {
        let wb = f2_bench();
        let report = exp_shadow_decay(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            let mut last = f64::INFINITY;
            let mut r = 0;
            while let Some(v) = report.value_at(&format!("pn_shadow_r{r}"), n as u64) {
                let v = v.as_f64();
                assert!(v <= last + 1e-12, "profile not monotone at n={n}, r={r}");
                last = v;
                r += 1;
            }
            assert!(r > 2, "expected several radii");
        }
    }

    #[test]
    fn quasitightness_identity_word_is_always_contained() {
        let cfg = ExperimentConfig {
            word: Some(vec![]),
            almost_contain_c: 0,
            n_values: vec![4],
            samples: 500,
            ..Default::default()
        };
        let wb = Workbench::from_parts(PresentationGraph::free_group(2), cfg).unwrap();
        let report = exp_quasitightness(&wb).unwrap();
        assert_eq!(report.value_at("avoid_prob", 4).unwrap().as_f64(), 0.0);
    }

    #[test]
    fn quasitightness_ab_avoidance_decays() {
        let cfg = ExperimentConfig {
            word: Some(vec!["a".into(), "b".into()]),
            almost_contain_c: 0,
            n_values: vec![4, 8, 12],
            samples: 4_000,
            seed: 5,
            ..Default::default()
        };
        let wb = Workbench::from_parts(PresentationGraph::free_group(2), cfg).unwrap();
        let report = exp_quasitightness(&wb).unwrap();
        let v4 = report.value_at("avoid_prob", 4).unwrap().as_f64();
        let v8 = report.value_at("avoid_prob", 8).unwrap().as_f64();
        let v12 = report.value_at("avoid_prob", 12).unwrap().as_f64();
        assert!(v4 > v8 && v8 > v12, "avoidance should decay: {v4} {v8} {v12}");
    }

    #[test]
    fn drift_ci_excludes_zero_on_quotient_action() {
        let p = PresentationGraph::raag_path(4);
        let cfg = ExperimentConfig {
            action: Some(ActionSpec {
                space: SpaceSpec {
                    kind: "free_product".into(),
                    factors: serde_json::json!([
                        {"name": "a", "group": "Z"},
                        {"name": "d", "group": "Z"}
                    ]),
                },
                hom: HomSpec { kind: "kill_except".into(), keep: vec!["a".into(), "d".into()] },
            }),
            samples: 10_000,
            drift_horizon: 200,
            seed: 17,
            ..Default::default()
        };
        let wb = Workbench::from_parts(p, cfg).unwrap();
        let report = exp_drift(&wb).unwrap();
        let row = report
            .rows
            .iter()
            .find(|r| r.statistic.starts_with("drift_L_component"))
            .expect("a recurrent component row");
        assert!(row.ci_low.unwrap() > 0.0, "99% CI must exclude zero: {row:?}");
        assert!(report.meta_value("L_hat").unwrap().as_f64() > 0.0);
    }

    #[test]
    fn trivial_action_markov_lox_probability_is_zero() {
        let p = PresentationGraph::raag_path(4);
        let cfg = ExperimentConfig {
            action: Some(ActionSpec {
                space: SpaceSpec {
                    kind: "free_product".into(),
                    factors: serde_json::json!([
                        {"name": "a", "group": "Z"},
                        {"name": "d", "group": "Z"}
                    ]),
                },
                hom: HomSpec { kind: "trivial".into(), keep: vec![] },
            }),
            n_values: vec![5, 9],
            samples: 500,
            epsilon: Some(0.1),
            drift_horizon: 40,
            ..Default::default()
        };
        let wb = Workbench::from_parts(p, cfg).unwrap();
        let report = exp_markov_genericity(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            assert_eq!(report.value_at("markov_lox_prob", n as u64).unwrap().as_f64(), 0.0);
        }
    }

    #[test]
    fn quasitightness_on_raag_path() {
        // Any w no longer than 2c is trivially almost-contained through the
        // empty subpath, so avoidance vanishes identically at c = 2 ...
        let base = ExperimentConfig {
            word: Some(vec!["a".into(), "b".into()]),
            n_values: vec![12, 24],
            samples: 2_000,
            seed: 13,
            ..Default::default()
        };
        let cfg = ExperimentConfig { almost_contain_c: 2, ..base.clone() };
        let wb = Workbench::from_parts(PresentationGraph::raag_path(4), cfg).unwrap();
        let report = exp_quasitightness(&wb).unwrap();
        let v12 = report.value_at("avoid_prob", 12).unwrap().as_f64();
        let v24 = report.value_at("avoid_prob", 24).unwrap().as_f64();
        assert!(v24 <= v12);
        assert_eq!(v24, 0.0);
        // ... while at c = 0 the avoidance is positive and strictly decays.
        let cfg = ExperimentConfig { almost_contain_c: 0, ..base };
        let wb = Workbench::from_parts(PresentationGraph::raag_path(4), cfg).unwrap();
        let report = exp_quasitightness(&wb).unwrap();
        let v12 = report.value_at("avoid_prob", 12).unwrap().as_f64();
        let v24 = report.value_at("avoid_prob", 24).unwrap().as_f64();
        assert!(v12 > v24, "strict decay expected: {v12} vs {v24}");
    }

    #[test]
    fn exact_growth_report_for_f2() {
        let cfg = ExperimentConfig { verify_nmax: 4, ..f2_self_config() };
        let wb = Workbench::from_parts(PresentationGraph::free_group(2), cfg).unwrap();
        let report = exp_exact_growth(&wb).unwrap();
        assert_eq!(report.meta_value("lambda_exact").unwrap().as_f64(), 3.0);
        match report.value_at("sn_over_lambda_n", 40).unwrap() {
            Value::Exact(r) => assert_eq!(r, &Ratio::new(BigInt::from(4), BigInt::from(3))),
            other => panic!("expected exact, got {other:?}"),
        }
        assert_eq!(report.meta_value("verify_horizon").unwrap().as_f64(), 4.0);
    }

    #[test]
    fn markov_genericity_on_f2() {
        let wb = f2_bench();
        let report = exp_markov_genericity(&wb).unwrap();
        for &n in &wb.cfg.n_values {
            assert_eq!(report.value_at("markov_lox_prob", n as u64).unwrap().as_f64(), 1.0);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let wb1 = f2_bench();
        let wb2 = f2_bench();
        for id in ["drift", "translation-genericity", "gromov-products"] {
            let r1 = run_experiment(id, &wb1).unwrap();
            let r2 = run_experiment(id, &wb2).unwrap();
            assert_eq!(r1.to_csv(), r2.to_csv(), "experiment {id}");
            assert_eq!(
                serde_json::to_string(&r1.to_json()).unwrap(),
                serde_json::to_string(&r2.to_json()).unwrap()
            );
        }
    }

    #[test]
    fn config_hash_stable_and_sensitive() {
        let a = f2_self_config();
        let mut b = f2_self_config();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 12;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn unknown_experiment_is_a_config_error() {
        let wb = f2_bench();
        assert!(matches!(run_experiment("nope", &wb), Err(Error::Config(_))));
    }
}
