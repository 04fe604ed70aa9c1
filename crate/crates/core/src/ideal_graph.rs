//! Invariant ideals, the block graph of a bimodule, condition (I), and the
//! simplicity verdict for the generated Cuntz–Pimsner algebra.
//!
//! Block `i` points to block `j` when `φ(p_i)` has a nonzero component in the
//! `j`-th right block; every ideal-theoretic question reduces to that graph.

use std::fmt;

use serde::Serialize;

use crate::bimod::{make_bimodule, Bimodule};
use crate::error::{Error, Result};
use crate::hmod::HilbertModule;
use crate::linalg::{self, cr};
use crate::mmalg::{self, AMatrix, AlgebraElement, AlgebraShape, IdealMask};

/// Enumeration of ideals is exhaustive up to this many blocks.
pub const MAX_ENUMERATED_BLOCKS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjacencyData {
    pub adjacency: Vec<Vec<u8>>,
    pub multiplicity: Vec<Vec<usize>>,
}

impl AdjacencyData {
    pub fn num_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j] == 1
    }
}

pub fn adjacency(b: &Bimodule) -> AdjacencyData {
    let shape = b.shape();
    let d = shape.num_blocks();
    let mut adj = vec![vec![0u8; d]; d];
    let mut mult = vec![vec![0usize; d]; d];
    for i in 0..d {
        let pi = b.phi(&AlgebraElement::central_projection(shape, i));
        for j in 0..d {
            let blk = pi.block(j);
            if linalg::spectral_norm(blk) > 1e-9 {
                adj[i][j] = 1;
                let rank = linalg::trace(blk).re.round() as usize;
                mult[i][j] = rank / shape.block_size(i);
            }
        }
    }
    AdjacencyData { adjacency: adj, multiplicity: mult }
}

/// The bimodule whose block graph carries `m[i][j]` parallel edges `i → j`.
///
/// Each edge `i → j` contributes the `(M_{n_i}, M_{n_j})` bimodule of
/// `n_i × n_j` matrices, presented as `n_i` copies of a row of `M_{n_j}`.
pub fn multiplicity_bimodule(shape: &AlgebraShape, m: &[Vec<usize>]) -> Result<Bimodule> {
    let d = shape.num_blocks();
    if m.len() != d || m.iter().any(|row| row.len() != d) {
        return Err(Error::ShapeMismatch(format!("multiplicity matrix must be {d} x {d}")));
    }
    if let Some(i) = m.iter().position(|row| row.iter().all(|&x| x == 0)) {
        return Err(Error::ZeroRow(i));
    }
    // Coordinates: one per (edge, row of the source block).
    let mut coords: Vec<(usize, usize, usize)> = Vec::new(); // (source, target, row)
    for i in 0..d {
        for j in 0..d {
            for _ in 0..m[i][j] {
                for row in 0..shape.block_size(i) {
                    coords.push((i, j, row));
                }
            }
        }
    }
    let k = coords.len();
    let mut p = AMatrix::zeros(shape, k, k);
    for (a, &(_, j, _)) in coords.iter().enumerate() {
        let nj = shape.block_size(j);
        p.block_mut(j)[(a * nj, a * nj)] = cr(1.0);
    }
    let mut phi = Vec::new();
    for (i, r, s) in shape.matrix_units() {
        let mut img = AMatrix::zeros(shape, k, k);
        // Pair coordinate (e, r) with (e, s) on every edge leaving i.
        let mut a = 0;
        while a < k {
            let (src, tgt, _) = coords[a];
            let ns = shape.block_size(src);
            if src == i {
                let nt = shape.block_size(tgt);
                img.block_mut(tgt)[((a + r) * nt, (a + s) * nt)] = cr(1.0);
            }
            a += ns;
        }
        phi.push(img);
    }
    make_bimodule(HilbertModule::new(p, 1e-9)?, phi, 1e-9)
}

/// The graph bimodule over `C^d` for a 0-1 (or multiplicity) matrix.
pub fn graph_bimodule(m: &[Vec<usize>]) -> Result<Bimodule> {
    multiplicity_bimodule(&AlgebraShape::commutative(m.len()), m)
}

fn check_mask(b: &Bimodule, j: &IdealMask) -> Result<()> {
    if j.num_blocks() != b.shape().num_blocks() {
        return Err(Error::ShapeMismatch("mask length differs from block count".into()));
    }
    Ok(())
}

fn invariant_by_graph(adj: &AdjacencyData, j: &IdealMask) -> bool {
    j.indices()
        .iter()
        .all(|&i| j.complement_indices().iter().all(|&t| !adj.edge(i, t)))
}

/// `(u_a | φ(p_i) u_b) ∈ J` for all frame pairs and all `i ∈ J`. Over the
/// column frame of `p` these inner products are the entries of `p φ(p_i) p`.
pub fn is_invariant_direct(b: &Bimodule, j: &IdealMask, tol: f64) -> bool {
    let p = b.module().projection();
    let shape = b.shape();
    j.indices().iter().all(|&i| {
        let gram = p.mul(&b.phi(&AlgebraElement::central_projection(shape, i))).mul(p);
        j.complement_indices().iter().all(|&t| linalg::max_abs(gram.block(t)) <= tol)
    })
}

/// No edge leaves `J`; cross-checked against the inner-product definition.
pub fn is_invariant(b: &Bimodule, j: &IdealMask) -> Result<bool> {
    check_mask(b, j)?;
    let graph = invariant_by_graph(&adjacency(b), j);
    if graph != is_invariant_direct(b, j, 1e-9) {
        return Err(Error::InternalDisagreement);
    }
    Ok(graph)
}

fn saturation_of(adj: &AdjacencyData, j: &IdealMask) -> IdealMask {
    let d = adj.num_vertices();
    let comp = j.complement_indices();
    IdealMask::new((0..d).map(|i| comp.iter().all(|&t| !adj.edge(i, t))).collect())
}

/// `J_X = {i : every edge from i lands in J}`.
pub fn saturation(b: &Bimodule, j: &IdealMask) -> Result<IdealMask> {
    check_mask(b, j)?;
    Ok(saturation_of(&adjacency(b), j))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantIdeal {
    pub mask: IdealMask,
    pub saturation: IdealMask,
    pub saturated: bool,
}

fn enumerate_invariant(adj: &AdjacencyData) -> Result<Vec<InvariantIdeal>> {
    let d = adj.num_vertices();
    if d > MAX_ENUMERATED_BLOCKS {
        return Err(Error::TooManyBlocks(d));
    }
    let mut out = Vec::new();
    for bits in 0..(1u32 << d) {
        let mask = IdealMask::from_bits(d, bits);
        if invariant_by_graph(adj, &mask) {
            let sat = saturation_of(adj, &mask);
            let saturated = sat == mask;
            out.push(InvariantIdeal { mask, saturation: sat, saturated });
        }
    }
    out.sort_by_key(|e| (e.mask.len(), e.mask.indices()));
    Ok(out)
}

/// All invariant ideals with their saturations.
pub fn invariant_ideals(b: &Bimodule) -> Result<Vec<InvariantIdeal>> {
    enumerate_invariant(&adjacency(b))
}

/// Strong connectivity of the 0-1 matrix.
pub fn is_irreducible(adj: &[Vec<u8>]) -> bool {
    let d = adj.len();
    let reach = |start: usize, forward: bool| -> Vec<bool> {
        let mut seen = vec![false; d];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for w in 0..d {
                let e = if forward { adj[v][w] } else { adj[w][v] };
                if e == 1 && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    d > 0 && reach(0, true).iter().all(|&x| x) && reach(0, false).iter().all(|&x| x)
}

/// No proper nonzero invariant ideal; decided by enumeration and by
/// irreducibility, which must agree.
pub fn is_x_simple(b: &Bimodule) -> Result<bool> {
    let adj = adjacency(b);
    let irreducible = is_irreducible(&adj.adjacency);
    if adj.num_vertices() > MAX_ENUMERATED_BLOCKS {
        return Ok(irreducible);
    }
    let by_enum = enumerate_invariant(&adj)?
        .iter()
        .all(|e| e.mask.is_empty() || e.mask.is_full());
    if by_enum != irreducible {
        return Err(Error::InternalDisagreement);
    }
    Ok(by_enum)
}

fn no_exitless_cycle(out_degree: &[usize], succ: impl Fn(usize) -> usize) -> bool {
    let d = out_degree.len();
    for start in 0..d {
        if out_degree[start] != 1 {
            continue;
        }
        let mut v = succ(start);
        for _ in 0..d {
            if out_degree[v] != 1 {
                break;
            }
            if v == start {
                return false;
            }
            v = succ(v);
        }
    }
    true
}

/// Every cycle has an exit (and every vertex emits an edge).
pub fn condition_i(adj: &[Vec<u8>]) -> Result<bool> {
    if let Some(i) = adj.iter().position(|row| row.iter().all(|&x| x == 0)) {
        return Err(Error::ZeroRow(i));
    }
    let deg: Vec<usize> = adj.iter().map(|row| row.iter().filter(|&&x| x == 1).count()).collect();
    Ok(no_exitless_cycle(&deg, |v| adj[v].iter().position(|&x| x == 1).expect("nonzero row")))
}

/// Condition (I) counting parallel edges, so a doubled loop has an exit.
pub fn condition_i_multigraph(m: &[Vec<usize>]) -> Result<bool> {
    if let Some(i) = m.iter().position(|row| row.iter().all(|&x| x == 0)) {
        return Err(Error::ZeroRow(i));
    }
    let deg: Vec<usize> = m.iter().map(|row| row.iter().sum()).collect();
    Ok(no_exitless_cycle(&deg, |v| m[v].iter().position(|&x| x > 0).expect("nonzero row")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubshiftWords {
    pub n: usize,
    /// Zero-based vertex words.
    pub words: Vec<Vec<usize>>,
}

impl SubshiftWords {
    /// Number of words starting at each vertex.
    pub fn cylinder_counts(&self, d: usize) -> Vec<usize> {
        let mut c = vec![0; d];
        for w in &self.words {
            c[w[0]] += 1;
        }
        c
    }
}

/// Admissible words of length `n`, in lexicographic order.
pub fn subshift_words(adj: &[Vec<u8>], n: usize) -> SubshiftWords {
    let d = adj.len();
    let mut words: Vec<Vec<usize>> = if n == 0 { vec![Vec::new()] } else { (0..d).map(|i| vec![i]).collect() };
    for _ in 1..n {
        words = words
            .into_iter()
            .flat_map(|w| {
                let last = *w.last().expect("nonempty");
                (0..d)
                    .filter(move |&t| adj[last][t] == 1)
                    .map(move |t| {
                        let mut w2 = w.clone();
                        w2.push(t);
                        w2
                    })
            })
            .collect();
    }
    SubshiftWords { n, words }
}

/// `X/X_J` over `A/J` with the induced left action.
pub fn quotient_bimodule(b: &Bimodule, j: &IdealMask) -> Result<Bimodule> {
    check_mask(b, j)?;
    if !is_invariant(b, j)? {
        return Err(Error::NotInvariant(j.clone()));
    }
    if j.is_empty() {
        return Ok(b.clone());
    }
    let sat = saturation(b, j)?;
    if sat != *j {
        let kernel = IdealMask::new((0..j.num_blocks()).map(|i| sat.contains(i) && !j.contains(i)).collect());
        return Err(Error::NotSaturated { kernel });
    }
    let (target, qmap) = mmalg::quotient(b.shape(), j)?;
    let module = HilbertModule::new(qmap.apply_matrix(b.module().projection()), 1e-9)?;
    let mut phi = Vec::new();
    for (u, (i, _, _)) in b.shape().matrix_units().into_iter().enumerate() {
        if !j.contains(i) {
            phi.push(qmap.apply_matrix(&b.phi_images()[u]));
        }
    }
    debug_assert_eq!(phi.len(), target.dim());
    make_bimodule(module, phi, 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Simple,
    NotSimple,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Simple => "SIMPLE",
            Verdict::NotSimple => "NOT SIMPLE",
            Verdict::Undecided => "UNDECIDED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealEntry {
    pub mask: IdealMask,
    pub saturated: bool,
    /// Condition (I) of the quotient's 0-1 matrix; `None` when not saturated.
    pub quotient_condition_i: Option<bool>,
    pub quotient_condition_i_multigraph: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplicityReport {
    pub adjacency: Vec<Vec<u8>>,
    pub multiplicity: Vec<Vec<usize>>,
    pub x_simple: bool,
    pub condition_i: bool,
    pub condition_i_multigraph: bool,
    pub ideals: Vec<IdealEntry>,
    /// Every saturated invariant quotient passes condition (I).
    pub ii_free: bool,
    /// Complete ideal lattice of the Cuntz–Pimsner algebra, when known.
    pub ideal_lattice: Option<Vec<IdealMask>>,
    pub verdict: Verdict,
    pub certified_by: String,
    pub witness_ideal: Option<IdealMask>,
}

/// Certificate supplied from outside the graph analysis (e.g. a verified
/// conjugate-equation or Jones-projection witness).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCertificate {
    pub name: String,
}

pub fn simplicity_verdict(b: &Bimodule) -> Result<SimplicityReport> {
    simplicity_verdict_with(b, None)
}

pub fn simplicity_verdict_with(b: &Bimodule, extra: Option<&ExternalCertificate>) -> Result<SimplicityReport> {
    let adj = adjacency(b);
    let d = adj.num_vertices();
    let x_simple = is_x_simple(b)?;
    let cond_strict = condition_i(&adj.adjacency)?;
    let cond_multi = condition_i_multigraph(&adj.multiplicity)?;

    let mut ideals = Vec::new();
    let mut ii_free = true;
    let mut witness_ideal = None;
    for inv in enumerate_invariant(&adj)? {
        let (qs, qm) = if inv.saturated && !inv.mask.is_full() {
            let q = quotient_bimodule(b, &inv.mask)?;
            let qa = adjacency(&q);
            let strict = condition_i(&qa.adjacency)?;
            let multi = condition_i_multigraph(&qa.multiplicity)?;
            if !(strict || multi) {
                ii_free = false;
            }
            (Some(strict), Some(multi))
        } else {
            (None, None)
        };
        if inv.saturated && !inv.mask.is_empty() && !inv.mask.is_full() && witness_ideal.is_none() {
            witness_ideal = Some(inv.mask.clone());
        }
        ideals.push(IdealEntry {
            mask: inv.mask,
            saturated: inv.saturated,
            quotient_condition_i: qs,
            quotient_condition_i_multigraph: qm,
        });
    }

    let (verdict, certified_by) = if let Some(w) = &witness_ideal {
        (
            Verdict::NotSimple,
            format!("proper saturated invariant ideal {w} gives a nonzero quotient Cuntz-Pimsner algebra"),
        )
    } else if let (true, Some(cert)) = (x_simple, extra) {
        (Verdict::Simple, cert.name.clone())
    } else if x_simple && cond_strict && d > 1 {
        (Verdict::Simple, "irreducible block graph satisfying condition (I)".to_string())
    } else if x_simple && cond_multi {
        (Verdict::Simple, "irreducible block graph satisfying condition (I) with multiplicities".to_string())
    } else {
        (Verdict::Undecided, "no certificate applies".to_string())
    };

    let ideal_lattice = ii_free.then(|| {
        ideals.iter().filter(|e| e.saturated).map(|e| e.mask.clone()).collect()
    });

    Ok(SimplicityReport {
        adjacency: adj.adjacency,
        multiplicity: adj.multiplicity,
        x_simple,
        condition_i: cond_strict,
        condition_i_multigraph: cond_multi,
        ideals,
        ii_free,
        ideal_lattice,
        verdict,
        certified_by,
        witness_ideal,
    })
}

impl fmt::Display for SimplicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "adjacency: {:?}", self.adjacency)?;
        writeln!(f, "multiplicity: {:?}", self.multiplicity)?;
        writeln!(f, "X-simple: {}", self.x_simple)?;
        writeln!(f, "condition (I): {} (with multiplicities: {})", self.condition_i, self.condition_i_multigraph)?;
        writeln!(f, "invariant ideals:")?;
        for e in &self.ideals {
            let q = match (e.quotient_condition_i, e.quotient_condition_i_multigraph) {
                (Some(s), Some(m)) => format!(", quotient condition (I): {s} (with multiplicities: {m})"),
                _ => String::new(),
            };
            writeln!(f, "  {} saturated={}{}", e.mask, e.saturated, q)?;
        }
        writeln!(f, "(II)-free: {}", self.ii_free)?;
        if let Some(l) = &self.ideal_lattice {
            let parts: Vec<String> = l.iter().map(|m| m.to_string()).collect();
            writeln!(f, "ideal lattice: {}", parts.join(" "))?;
        }
        writeln!(f, "verdict: {}", self.verdict)?;
        write!(f, "certified by: {}", self.certified_by)
    }
}
