//! The JSON specification format: a versioned, self-describing file holding
//! an algebra, a bimodule (explicit, from a graph, or from an inclusion), and
//! optional conjugate data and analysis options.

use serde::{Deserialize, Serialize};

use crate::bimod::{make_bimodule, Bimodule};
use crate::error::{Error, Result};
use crate::freeness::{ConjugateDatum, ConjugateLinearMap};
use crate::hmod::HilbertModule;
use crate::ideal_graph;
use crate::index_theory::{self, Inclusion, PresentedInclusion};
use crate::mmalg::{AMatrix, AlgebraElement, AlgebraShape, DEFAULT_TOL};
use crate::wire::{mat_to_wire, wire_to_mat, WireBlocks, WireMatrix};

pub const FORMAT_VERSION: &str = "cstar-bimod/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// Block sizes of `A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<ModuleSpec>,
    /// Images of the matrix units of `A`, block-major and row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<WireBlocks>>,
    /// Multiplicity matrix; the bimodule is the graph bimodule over the given algebra (default `C^d`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugate: Option<ConjugateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion: Option<InclusionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    pub k: usize,
    /// Omitted for the free module `A^k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<WireBlocks>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateSpec {
    #[serde(default = "default_sign")]
    pub sign: i8,
    /// Coordinates of `R ∈ X ⊗ X` as a `k² × 1` matrix over `A`.
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<WireBlocks>,
    /// `K` in `F(x) = K·conj(x)` on flattened coordinates.
    #[serde(default, rename = "F", skip_serializing_if = "Option::is_none")]
    pub f: Option<WireMatrix>,
}

fn default_sign() -> i8 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSpec {
    #[serde(rename = "A")]
    pub a: Vec<usize>,
    #[serde(rename = "B")]
    pub b: Vec<usize>,
    /// Images in `B` of the matrix units of `A`.
    pub embed: Vec<WireBlocks>,
    /// `E` in matrix-unit coordinates, `dim A × dim B`.
    #[serde(rename = "E")]
    pub e: WireMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

/// Where the conjugate datum came from.
#[derive(Debug, Clone)]
pub enum ConjugateSource {
    Vector(ConjugateDatum),
    Map(ConjugateLinearMap),
}

/// A document that passed every structural check.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub doc: SpecDocument,
    pub bimodule: Bimodule,
    pub inclusion: Option<Inclusion>,
    pub presented: Option<PresentedInclusion>,
    pub conjugate: Option<ConjugateSource>,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

/// Re-tags a mathematical failure with the document path that caused it.
fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Schema { .. } | Error::Parse(_) | Error::InvariantViolation { .. } => e,
        other => Error::InvariantViolation { path: path.into(), message: other.to_string() },
    }
}

pub fn parse_str(text: &str) -> Result<SpecDocument> {
    let doc: SpecDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(schema("version", format!("unrecognized version {:?}, expected {FORMAT_VERSION:?}", doc.version)));
    }
    Ok(doc)
}

pub fn to_string(doc: &SpecDocument) -> String {
    serde_json::to_string_pretty(doc).expect("documents serialize")
}

pub fn validate(path: &std::path::Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    load(parse_str(&text)?)
}

fn shape_from(sizes: &[usize], path: &str) -> Result<AlgebraShape> {
    AlgebraShape::new(sizes.to_vec()).map_err(|e| schema(path, e.to_string()))
}

pub fn load(doc: SpecDocument) -> Result<Loaded> {
    let tol = doc.options.as_ref().and_then(|o| o.tol).unwrap_or(DEFAULT_TOL);
    let inclusion = match &doc.inclusion {
        Some(spec) => Some(load_inclusion(spec, tol)?),
        None => None,
    };
    let sources = [doc.module.is_some() || doc.phi.is_some(), doc.graph.is_some(), inclusion.is_some()];
    let explicit = sources[0];
    if sources.iter().filter(|&&s| s).count() == 0 {
        return Err(schema("", "one of module+phi, graph or inclusion is required"));
    }
    if explicit && doc.graph.is_some() {
        return Err(schema("graph", "graph cannot be combined with module/phi"));
    }
    let mut presented = None;
    let bimodule = if explicit {
        load_explicit(&doc, tol)?
    } else if let Some(m) = &doc.graph {
        let shape = match &doc.algebra {
            Some(sizes) => shape_from(sizes, "algebra")?,
            None => AlgebraShape::commutative(m.len()),
        };
        ideal_graph::multiplicity_bimodule(&shape, m).map_err(at("graph"))?
    } else {
        let inc = inclusion.as_ref().expect("checked above");
        let pres = index_theory::present_module(inc, tol).map_err(at("inclusion.E"))?;
        let b = pres.bimodule().clone();
        presented = Some(pres);
        b
    };
    if let (Some(inc), None) = (&inclusion, &presented) {
        presented = Some(index_theory::present_module(inc, tol).map_err(at("inclusion.E"))?);
    }
    let conjugate = match &doc.conjugate {
        Some(spec) => Some(load_conjugate(spec, &bimodule, tol)?),
        None => None,
    };
    Ok(Loaded { doc, bimodule, inclusion, presented, conjugate })
}

fn load_explicit(doc: &SpecDocument, tol: f64) -> Result<Bimodule> {
    let sizes = doc.algebra.as_ref().ok_or_else(|| schema("algebra", "required with module/phi"))?;
    let shape = shape_from(sizes, "algebra")?;
    let spec = doc.module.as_ref().ok_or_else(|| schema("module", "required with phi"))?;
    let k = spec.k;
    if k == 0 {
        return Err(schema("module.k", "must be positive"));
    }
    let module = match &spec.p {
        None => HilbertModule::free(&shape, k),
        Some(w) => {
            let p = AMatrix::from_wire(&shape, k, k, w, "module.p")?;
            HilbertModule::new(p, tol.max(1e-9)).map_err(at("module.p"))?
        }
    };
    let phi = doc.phi.as_ref().ok_or_else(|| schema("phi", "required with module"))?;
    if phi.len() != shape.dim() {
        return Err(schema("phi", format!("{} images for an algebra of dimension {}", phi.len(), shape.dim())));
    }
    let images = phi
        .iter()
        .enumerate()
        .map(|(u, w)| AMatrix::from_wire(&shape, k, k, w, &format!("phi[{u}]")))
        .collect::<Result<Vec<_>>>()?;
    make_bimodule(module, images, tol.max(1e-9)).map_err(at("phi"))
}

fn load_inclusion(spec: &InclusionSpec, tol: f64) -> Result<Inclusion> {
    let a = shape_from(&spec.a, "inclusion.A")?;
    let b = shape_from(&spec.b, "inclusion.B")?;
    if spec.embed.len() != a.dim() {
        return Err(schema("inclusion.embed", format!("{} images for dim A = {}", spec.embed.len(), a.dim())));
    }
    let embed = spec
        .embed
        .iter()
        .enumerate()
        .map(|(u, w)| AlgebraElement::from_wire(&b, w, &format!("inclusion.embed[{u}]")))
        .collect::<Result<Vec<_>>>()?;
    let e = wire_to_mat(&spec.e, Some((a.dim(), b.dim())), "inclusion.E")?;
    Inclusion::new(a, b, embed, e, tol.max(1e-9)).map_err(|err| {
        let path = if matches!(err, Error::BadEmbedding(_)) { "inclusion.embed" } else { "inclusion.E" };
        at(path)(err)
    })
}

fn load_conjugate(spec: &ConjugateSpec, b: &Bimodule, tol: f64) -> Result<ConjugateSource> {
    match (&spec.r, &spec.f) {
        (Some(w), None) => {
            let k = b.k();
            let r = AMatrix::from_wire(b.shape(), k * k, 1, w, "conjugate.R")?;
            let datum = ConjugateDatum::new(b, &r, spec.sign, tol.max(1e-9)).map_err(at("conjugate.R"))?;
            Ok(ConjugateSource::Vector(datum))
        }
        (None, Some(w)) => {
            let dim: usize = b.shape().block_sizes().iter().map(|n| b.k() * n * n).sum();
            let m = wire_to_mat(w, Some((dim, dim)), "conjugate.F")?;
            Ok(ConjugateSource::Map(ConjugateLinearMap { matrix: m }))
        }
        _ => Err(schema("conjugate", "exactly one of R or F is required")),
    }
}

/// The document for a bimodule given explicitly.
pub fn explicit_document(name: &str, b: &Bimodule) -> SpecDocument {
    let module = b.module();
    SpecDocument {
        version: FORMAT_VERSION.into(),
        name: Some(name.into()),
        notes: None,
        algebra: Some(b.shape().block_sizes().to_vec()),
        module: Some(ModuleSpec { k: b.k(), p: (!module.is_free()).then(|| module.projection().to_wire()) }),
        phi: Some(b.phi_images().iter().map(AMatrix::to_wire).collect()),
        graph: None,
        conjugate: None,
        inclusion: None,
        options: None,
    }
}

pub fn inclusion_spec(inc: &Inclusion) -> InclusionSpec {
    InclusionSpec {
        a: inc.a_shape().block_sizes().to_vec(),
        b: inc.b_shape().block_sizes().to_vec(),
        embed: inc.embedding().iter().map(AlgebraElement::to_wire).collect(),
        e: mat_to_wire(inc.expectation_matrix()),
    }
}
