//! Orchestration behind the command-line tool: the simplicity analysis and
//! the single-operation checks, each producing a serializable report.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::bimod::{self, GradedOperator};
use crate::document::{ConjugateSource, Loaded};
use crate::error::{Error, Result};
use crate::fock::{self, RelationResiduals, TruncatedFock};
use crate::freeness::{self, WitnessSummary};
use crate::hmod::{self, ModuleVector};
use crate::ideal_graph::{self, ExternalCertificate, SimplicityReport, Verdict};
use crate::index_theory;
use crate::linalg::C64;
use crate::mmalg::DEFAULT_TOL;
use crate::random;

pub const ROUTE_CONJUGATE: &str = "conjugate-vector witness with R*R above 1 (real or pseudoreal bimodule)";
pub const ROUTE_JONES: &str = "Jones-projection witness of a finite-index inclusion";
pub const ROUTE_CYLINDER: &str = "cylinder-projection witness under condition (I)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Options {
    pub tol: f64,
    pub depth_cap: usize,
    pub fock_level: usize,
    pub seed: u64,
    pub witness_level: usize,
    pub weights: Option<Vec<f64>>,
}

impl Default for Options {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, depth_cap: 8, fock_level: fock::DEFAULT_LEVEL, seed: 0, witness_level: 1, weights: None }
    }
}

impl Options {
    /// Defaults overridden by the document's `options` block.
    pub fn from_document(loaded: &Loaded) -> Self {
        let mut o = Self::default();
        if let Some(spec) = &loaded.doc.options {
            o.tol = spec.tol.unwrap_or(o.tol);
            o.depth_cap = spec.depth_cap.unwrap_or(o.depth_cap);
            o.fock_level = spec.fock_level.unwrap_or(o.fock_level);
            o.seed = spec.seed.unwrap_or(o.seed);
            o.witness_level = spec.witness_level.unwrap_or(o.witness_level);
            o.weights = spec.weights.clone();
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessAttempt {
    pub route: String,
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessSummary>,
    pub detail: String,
}

impl WitnessAttempt {
    fn from_result(route: &str, r: Result<(freeness::Witness, String)>) -> Self {
        match r {
            Ok((w, detail)) => Self { route: route.into(), certified: true, witness: Some(w.summary()), detail },
            Err(e) => Self { route: route.into(), certified: false, witness: None, detail: e.to_string() },
        }
    }
}

/// Runs whichever witness routes the document supports, in order:
/// conjugate data, then an inclusion, then the cylinder search.
pub fn witness_attempts(loaded: &Loaded, opts: &Options) -> Vec<WitnessAttempt> {
    let b = &loaded.bimodule;
    let k = opts.witness_level.max(1);
    let mut out = Vec::new();
    if let Some(src) = &loaded.conjugate {
        let datum = match src {
            ConjugateSource::Vector(d) => Ok(d.clone()),
            ConjugateSource::Map(f) => freeness::conjugate_from_f(b, f, opts.tol),
        };
        let r = datum.and_then(|d| freeness::real_witness(&d, k, opts.tol)).map(|w| {
            let detail = format!("‖(R*R)^-1‖ = {:.6}, ‖S*σ(S)‖ = {:.6}", w.inverse_rtr_norm, w.first_overlap);
            (w.witness, detail)
        });
        out.push(WitnessAttempt::from_result(ROUTE_CONJUGATE, r));
    }
    if let Some(inc) = &loaded.inclusion {
        let r = freeness::jones_witness(inc, k, opts.tol).map(|w| {
            let detail = format!("q_k σ^m(q_k) residual {:.1e}", w.orthogonality_residual);
            (w.witness, detail)
        });
        out.push(WitnessAttempt::from_result(ROUTE_JONES, r));
    }
    if out.is_empty() {
        let r = freeness::ck_witness(b, k, 1, opts.depth_cap, opts.tol).map(|w| {
            let words: Vec<String> = w.words.iter().map(|x| format!("{:?}", x.iter().map(|v| v + 1).collect::<Vec<_>>())).collect();
            (w.witness, format!("words {} at depth {}", words.join(" "), w.depth))
        });
        out.push(WitnessAttempt::from_result(ROUTE_CYLINDER, r));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub name: Option<String>,
    pub seed: u64,
    pub tol: f64,
    pub verdict: Verdict,
    pub certified_by: String,
    pub simplicity: SimplicityReport,
    pub witnesses: Vec<WitnessAttempt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<IndexReport>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl AnalysisReport {
    /// `NOT SIMPLE` is certified by its ideal and `SIMPLE` by its witness.
    pub fn certified(&self) -> bool {
        self.verdict != Verdict::Undecided
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e3 * 100.0).round() / 100.0
}

pub fn analyze(loaded: &Loaded, opts: &Options) -> Result<AnalysisReport> {
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let graph = ideal_graph::simplicity_verdict(&loaded.bimodule).map_err(Error::in_stage("ideal analysis"))?;
    timings.insert("ideals".into(), elapsed_ms(t));

    let t = Instant::now();
    let witnesses = if graph.verdict == Verdict::NotSimple { Vec::new() } else { witness_attempts(loaded, opts) };
    timings.insert("witnesses".into(), elapsed_ms(t));

    let cert = witnesses.iter().find(|w| w.certified).map(|w| ExternalCertificate { name: w.route.clone() });
    let simplicity = ideal_graph::simplicity_verdict_with(&loaded.bimodule, cert.as_ref())
        .map_err(Error::in_stage("ideal analysis"))?;

    let index = match &loaded.inclusion {
        Some(_) => {
            let t = Instant::now();
            let r = index_report(loaded, opts).map_err(Error::in_stage("index"))?;
            timings.insert("index".into(), elapsed_ms(t));
            Some(r)
        }
        None => None,
    };
    Ok(AnalysisReport {
        name: loaded.doc.name.clone(),
        seed: opts.seed,
        tol: opts.tol,
        verdict: simplicity.verdict,
        certified_by: simplicity.certified_by.clone(),
        simplicity,
        witnesses,
        index,
        timings_ms: timings,
    })
}

impl fmt::Display for WitnessAttempt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.certified { "certified" } else { "rejected" };
        write!(f, "{}: {status} ({})", self.route, self.detail)?;
        if let Some(w) = &self.witness {
            write!(f, "\n    level {} degrees {:?} ‖T*σ^k(T)‖ = {:.6}", w.level, w.degrees, w.norm_tst)?;
        }
        Ok(())
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            writeln!(f, "{n}")?;
        }
        writeln!(f, "{}", self.simplicity)?;
        for w in &self.witnesses {
            writeln!(f, "witness {w}")?;
        }
        if let Some(i) = &self.index {
            write!(f, "{i}")?;
        }
        writeln!(f, "seed: {}", self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    /// Central values of `Index E`, one per block of `B`.
    pub index: Vec<f64>,
    pub trivial: bool,
    /// Rank of `e_A` per block of `A`.
    pub jones_rank: Vec<usize>,
    /// `r-Ind` of the finite-type structure, per block of `A`.
    pub r_ind: Vec<f64>,
    /// `‖ι(r-Ind) − Index E‖` entrywise.
    pub discrepancy: f64,
    /// Index E from two quasi-bases built on different frames.
    pub frame_discrepancy: f64,
    pub consistent: bool,
}

pub fn index_report(loaded: &Loaded, opts: &Options) -> Result<IndexReport> {
    let pres = loaded
        .presented
        .as_ref()
        .ok_or_else(|| Error::Schema { path: "inclusion".into(), message: "the index needs an inclusion".into() })?;
    let qb = index_theory::quasi_basis(pres, opts.tol)?;
    let e = index_theory::jones_projection(pres, opts.tol)?;
    let traced = e.matrix().partial_trace();
    let jones_rank: Vec<usize> = traced
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let n = pres.bimodule().shape().block_size(i) as f64;
            (crate::linalg::trace(b).re / n).round() as usize
        })
        .collect();
    let fts = index_theory::finite_type_structure(pres.bimodule(), opts.weights.as_deref(), opts.tol)?;
    let index: Vec<f64> = qb.index.central_values().iter().map(|z| z.re).collect();
    let r_ind: Vec<f64> = fts.r_ind().central_values().iter().map(|z| z.re).collect();
    // Index E lives in the centre of B, r-Ind in the centre of A.
    let discrepancy = pres.inclusion().embed(fts.r_ind()).sub(&qb.index).max_abs();
    let second = index_theory::quasi_basis_with_frame(pres, index_theory::SECOND_FRAME_SEED);
    let frame_discrepancy = second.index.sub(&qb.index).max_abs();
    Ok(IndexReport {
        index,
        trivial: qb.is_trivial(1e-9),
        jones_rank,
        r_ind,
        discrepancy,
        frame_discrepancy,
        consistent: discrepancy <= 1e-8 && frame_discrepancy <= 1e-8,
    })
}

impl fmt::Display for IndexReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
        writeln!(f, "Index E = ({})", show(&self.index))?;
        writeln!(f, "Jones projection rank per block: {:?}", self.jones_rank)?;
        writeln!(f, "r-Ind = ({}), differs from Index E by {:.1e}", show(&self.r_ind), self.discrepancy)?;
        writeln!(f, "second quasi-basis differs by {:.1e}", self.frame_discrepancy)?;
        writeln!(f, "trivial inclusion: {}", self.trivial)
    }
}

fn random_vectors(b: &bimod::Bimodule, count: usize, rng: &mut random::Rng64) -> Vec<ModuleVector> {
    (0..count)
        .map(|_| b.module().project(&random::matrix(rng, b.shape(), b.k(), 1)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormInstance {
    pub gram: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub seed: u64,
    pub instances: Vec<NormInstance>,
    pub max_difference: f64,
    pub agree: bool,
}

/// `‖Σ θ_{x_i,y_i}‖` by the Gram formula against the flattened operator.
pub fn norm_check(loaded: &Loaded, opts: &Options, count: usize) -> Result<NormReport> {
    let b = &loaded.bimodule;
    let mut rng = random::rng(opts.seed);
    let mut instances = Vec::new();
    for n in 1..=count {
        let xs = random_vectors(b, n, &mut rng);
        let ys = random_vectors(b, n, &mut rng);
        let gram = hmod::op_norm_via_gram(&xs, &ys)?;
        let mut sum = hmod::theta(&xs[0], &ys[0]);
        for (x, y) in xs.iter().zip(&ys).skip(1) {
            sum = sum.add(&hmod::theta(x, y))?;
        }
        instances.push(NormInstance { gram, oracle: sum.norm() });
    }
    let max_difference = instances.iter().map(|i| (i.gram - i.oracle).abs()).fold(0.0, f64::max);
    Ok(NormReport { seed: opts.seed, instances, max_difference, agree: max_difference <= 1e-8 })
}

impl fmt::Display for NormReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4} {:>14} {:>14}", "n", "gram", "oracle")?;
        for (i, x) in self.instances.iter().enumerate() {
            writeln!(f, "{:>4} {:>14.10} {:>14.10}", i + 1, x.gram, x.oracle)?;
        }
        writeln!(f, "max difference {:.2e}: {}", self.max_difference, if self.agree { "agree" } else { "DISAGREE" })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorReport {
    pub level: usize,
    pub coordinates: usize,
    pub dim: usize,
    pub block_ranks: Vec<usize>,
    /// `max |(x⊗y|x′⊗y′) − (y|φ((x|x′))y′)|` over random vectors.
    pub inner_residual: f64,
    pub ok: bool,
}

pub fn tensor_check(loaded: &Loaded, opts: &Options, level: usize) -> Result<TensorReport> {
    let b = &loaded.bimodule;
    let tp = bimod::tensor_power(b, level);
    let mut residual: f64 = 0.0;
    if level >= 1 {
        let lower = bimod::tensor_power(b, level - 1);
        let mut rng = random::rng(opts.seed);
        for _ in 0..5 {
            let m = lower.module();
            let draw = |rng: &mut random::Rng64| m.project(&random::matrix(rng, b.shape(), m.k(), 1));
            let (x, x2) = (draw(&mut rng), draw(&mut rng));
            let ys = random_vectors(b, 2, &mut rng);
            let lhs = hmod::inner(&lower.simple_tensor(&x, &ys[0])?, &lower.simple_tensor(&x2, &ys[1])?)?;
            let mid = b.phi(&hmod::inner(&x, &x2)?).mul(ys[1].coords());
            let rhs = ys[0].coords().adjoint().mul(&mid).entry(0, 0);
            residual = residual.max(lhs.sub(&rhs).max_abs());
        }
    }
    Ok(TensorReport {
        level,
        coordinates: tp.module().k(),
        dim: tp.dim(),
        block_ranks: tp.module().block_ranks(),
        inner_residual: residual,
        ok: residual <= opts.tol.max(1e-9) * 10.0,
    })
}

impl fmt::Display for TensorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "level {}: {} coordinates, complex dimension {}", self.level, self.coordinates, self.dim)?;
        writeln!(f, "ranks per block: {:?}", self.block_ranks)?;
        writeln!(f, "inner product residual {:.2e}", self.inner_residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplificationSummary {
    pub epsilon: f64,
    pub q: usize,
    pub base_overlap: f64,
    pub overlap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub attempts: Vec<WitnessAttempt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplification: Option<AmplificationSummary>,
}

impl WitnessReport {
    pub fn certified(&self) -> bool {
        self.attempts.iter().any(|a| a.certified)
    }
}

/// Witness routes, optionally amplifying the first certified operator until `‖T′*σ(T′)‖ < ε`.
pub fn witness_check(loaded: &Loaded, opts: &Options, epsilon: Option<f64>) -> Result<WitnessReport> {
    let attempts = witness_attempts(loaded, opts);
    let amplification = match epsilon {
        None => None,
        Some(eps) => {
            let op = first_witness_operator(loaded, opts)?;
            let a = freeness::amplify(&op, eps, opts.tol)?;
            Some(AmplificationSummary {
                epsilon: eps,
                q: a.q,
                base_overlap: a.base_overlap,
                overlap: a.overlap,
                bound: a.base_overlap.powi(a.q as i32 + 1),
            })
        }
    };
    Ok(WitnessReport { attempts, amplification })
}

fn first_witness_operator(loaded: &Loaded, opts: &Options) -> Result<GradedOperator> {
    let b = &loaded.bimodule;
    if let Some(src) = &loaded.conjugate {
        let datum = match src {
            ConjugateSource::Vector(d) => d.clone(),
            ConjugateSource::Map(f) => freeness::conjugate_from_f(b, f, opts.tol)?,
        };
        return freeness::normalized_vector(&datum, opts.tol);
    }
    if let Some(inc) = &loaded.inclusion {
        return Ok(freeness::jones_witness(inc, 1, opts.tol)?.witness.operator);
    }
    Ok(freeness::ck_witness(b, 1, 1, opts.depth_cap, opts.tol)?.witness.operator)
}

impl fmt::Display for WitnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.attempts {
            writeln!(f, "{a}")?;
        }
        if let Some(a) = &self.amplification {
            writeln!(
                f,
                "amplified with q = {} for ε = {}: ‖T′*σ(T′)‖ = {:.6} ≤ {:.6}^{} = {:.6}",
                a.q,
                a.epsilon,
                a.overlap,
                a.base_overlap,
                a.q + 1,
                a.bound
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockReport {
    pub level: usize,
    pub dim: usize,
    pub residuals: Vec<RelationResiduals>,
    pub max_toeplitz_below_cut: f64,
    /// `max |‖U(t)T_xU(t)*‖ − ‖tT_x‖|`-style defect: `‖U(t)T_xU(t)* − tT_x‖`.
    pub gauge_defect: f64,
    /// `max(‖m₀(B)‖ − ‖B‖, 0)` over random degree-bounded `B`.
    pub averaging_excess: f64,
    pub ok: bool,
}

pub fn fock_check(loaded: &Loaded, opts: &Options) -> Result<FockReport> {
    let b = &loaded.bimodule;
    let f = TruncatedFock::new(b, opts.fock_level)?;
    let mut rng = random::rng(opts.seed);
    let frame = hmod::frame(b.module());
    let mut residuals = Vec::new();
    for x in &frame {
        for y in &frame {
            residuals.push(fock::relation_residuals(&f, x, y)?);
        }
    }
    let rand = random_vectors(b, 2, &mut rng);
    residuals.push(fock::relation_residuals(&f, &rand[0], &rand[1])?);
    let max_below = residuals.iter().map(|r| r.toeplitz_below_cut).fold(0.0, f64::max);

    let tx = fock::creation(&f, &rand[0])?;
    let angle = 0.9;
    let gauge_defect = fock::gauge_conjugate(&tx, angle).sub(&tx.scale(C64::from_polar(1.0, angle))).norm();

    let mut excess: f64 = 0.0;
    for _ in 0..5 {
        let mut coeffs = BTreeMap::new();
        for d in -1isize..=1 {
            let (p, q) = if d >= 0 { (0, d as usize) } else { ((-d) as usize, 0) };
            let (np, nq) = (b.level(p).module().k(), b.level(q).module().k());
            coeffs.insert(d, GradedOperator::new(b, p, q, &random::matrix(&mut rng, b.shape(), nq, np))?);
        }
        let r = fock::graded_inequality_check(&f, &coeffs, None, opts.tol)?;
        excess = excess.max(r.degree_zero_norm - r.norm);
    }
    let ok = max_below <= 1e-10 && gauge_defect <= 1e-10 && excess <= 1e-10;
    Ok(FockReport {
        level: opts.fock_level,
        dim: f.dim(),
        residuals,
        max_toeplitz_below_cut: max_below,
        gauge_defect,
        averaging_excess: excess.max(0.0),
        ok,
    })
}

impl fmt::Display for FockReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Fock space cut at N = {} (complex dimension {})", self.level, self.dim)?;
        writeln!(f, "{:>12} {:>12} {:>12} {:>12} {:>12}", "below cut", "top", "frame", "bottom", "cross")?;
        for r in &self.residuals {
            writeln!(
                f,
                "{:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e}",
                r.toeplitz_below_cut, r.toeplitz_top, r.frame_residual, r.bottom_defect, r.cross_relation
            )?;
        }
        writeln!(f, "(`top` is the defect on level N and `bottom` the vacuum gap; both are expected to be nonzero)")?;
        writeln!(f, "gauge defect {:.2e}", self.gauge_defect)?;
        writeln!(f, "‖m₀(B)‖ − ‖B‖ at most {:.2e}", self.averaging_excess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{self, ConjugateSpec};
    use crate::mmalg::AMatrix;

    fn cuntz(n: usize) -> Loaded {
        let b = bimod::Bimodule::cuntz(n);
        let mut doc = document::explicit_document("O_n", &b);
        let mut r = AMatrix::zeros(b.shape(), n * n, 1);
        for i in 0..n {
            r.block_mut(0)[(i * n + i, 0)] = crate::linalg::cr(1.0);
        }
        doc.conjugate = Some(ConjugateSpec { sign: 1, r: Some(r.to_wire()), f: None });
        document::load(doc).unwrap()
    }

    #[test]
    fn cuntz_is_simple_by_conjugate_route() {
        let l = cuntz(3);
        let r = analyze(&l, &Options::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Simple);
        assert_eq!(r.certified_by, ROUTE_CONJUGATE);
    }

    #[test]
    fn permutation_graph_is_undecided() {
        let b = ideal_graph::graph_bimodule(&[vec![0, 1], vec![1, 0]]).unwrap();
        let doc = document::explicit_document("perm", &b);
        let r = analyze(&document::load(doc).unwrap(), &Options::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Undecided);
        assert!(!r.witnesses[0].certified);
    }

    #[test]
    fn subcommand_reports() {
        let l = cuntz(2);
        let o = Options::default();
        assert!(norm_check(&l, &o, 3).unwrap().agree);
        assert!(tensor_check(&l, &o, 2).unwrap().ok);
        let w = witness_check(&l, &o, Some(0.3)).unwrap();
        assert!(w.certified());
        assert_eq!(w.amplification.unwrap().q, 1);
        assert!(fock_check(&l, &o).unwrap().ok);
    }
}
