//! Witnesses of (I)-freeness and the three ways of building them: conjugate
//! vectors, Jones projections and cylinder projections of a block graph.
//!
//! A witness is a norm-one `T` in the relative commutant such that
//! `a ↦ φ(a)T*T` is completely isometric and `‖T*σ^k(T)‖ < 1`. Every
//! constructor ends by running [`verify_witness`] on its output.

use serde::Serialize;

use crate::bimod::{self, graded_compose, right_extend_by, Bimodule, GradedOperator};
use crate::error::{Error, Result};
use crate::hmod::{self, ModuleVector};
use crate::ideal_graph;
use crate::index_theory;
use crate::linalg::{self, cr, C64};
use crate::mmalg::{self, AMatrix, AlgebraElement};

/// Gap demanded by strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Witness {
    pub operator: GradedOperator,
    pub level: usize,
    pub norm: f64,
    /// `‖φ(p_i)·T*T‖` per central block.
    pub block_isometry: Vec<f64>,
    /// `‖T*σ^k(T)‖`.
    pub overlap_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSummary {
    pub level: usize,
    pub degrees: [usize; 2],
    #[serde(rename = "norm_TsT")]
    pub norm_tst: f64,
    pub blocks_isometry: Vec<f64>,
    pub certified: bool,
}

impl Witness {
    pub fn summary(&self) -> WitnessSummary {
        let (p, q) = self.operator.levels();
        WitnessSummary {
            level: self.level,
            degrees: [p, q],
            norm_tst: self.overlap_norm,
            blocks_isometry: self.block_isometry.clone(),
            certified: true,
        }
    }
}

/// `‖T*σ^k(T)‖`.
pub fn overlap_norm(t: &GradedOperator, k: usize, tol: f64) -> Result<f64> {
    let shifted = bimod::sigma_power(t, k, tol)?;
    Ok(graded_compose(&t.adjoint(), &shifted).norm())
}

/// `‖φ(p_i) T*T‖` for every block `i`.
pub fn block_isometry_norms(t: &GradedOperator) -> Vec<f64> {
    let base = t.base();
    let shape = base.shape();
    let tt = graded_compose(&t.adjoint(), t);
    (0..shape.num_blocks())
        .map(|i| {
            let p = GradedOperator::left_action(base, 0, &AlgebraElement::central_projection(shape, i));
            graded_compose(&p, &tt).norm()
        })
        .collect()
}

pub fn verify_witness(t: &GradedOperator, k: usize, tol: f64) -> Result<Witness> {
    let defect = bimod::commutator_defect(t);
    if defect > tol * t.matrix().max_abs().max(1.0) {
        return Err(Error::NotCommutant(defect));
    }
    let norm = t.norm();
    if (norm - 1.0).abs() > tol {
        return Err(Error::NotNormOne(norm));
    }
    let blocks = block_isometry_norms(t);
    if let Some((block, &n)) = blocks.iter().enumerate().find(|(_, &n)| (n - 1.0).abs() > tol) {
        return Err(Error::NotCompletelyIsometric { block, norm: n });
    }
    let overlap = overlap_norm(t, k, tol)?;
    if overlap >= 1.0 - STRICT_MARGIN {
        return Err(Error::Condition42Fails(overlap));
    }
    Ok(Witness { operator: t.clone(), level: k, norm, block_isometry: blocks, overlap_norm: overlap })
}

#[derive(Debug, Clone)]
pub struct Amplified {
    pub operator: GradedOperator,
    pub q: usize,
    /// `‖T*σ(T)‖` of the input.
    pub base_overlap: f64,
    /// `‖T′*σ(T′)‖`, checked against `base_overlap^{q+1}`.
    pub overlap: f64,
    pub block_isometry: Vec<f64>,
}

/// Largest `k^L · max n_i` the amplified product may reach.
pub const AMPLIFY_GUARD: usize = 4096;

/// `T′ = T σ^{r}(T) ⋯ σ^{qr}(T)` with `r` the level of `T*σ(T)`.
pub fn amplify(t: &GradedOperator, epsilon: f64, tol: f64) -> Result<Amplified> {
    let base_overlap = overlap_norm(t, 1, tol)?;
    if base_overlap >= 1.0 - STRICT_MARGIN {
        return Err(Error::MarginTooSmall(base_overlap));
    }
    let blocks = block_isometry_norms(t);
    if let Some((block, &n)) = blocks.iter().enumerate().find(|(_, &n)| (n - 1.0).abs() > tol) {
        return Err(Error::NotCompletelyIsometric { block, norm: n });
    }
    let mut q = 0;
    while base_overlap.powi(q as i32 + 1) >= epsilon {
        q += 1;
    }
    let r1 = t.levels().0 + 1;
    let (lo, hi) = t.levels();
    let top = lo.max(hi) + q * r1 + 1;
    let base = t.base();
    let n = base.shape().block_sizes().iter().copied().max().unwrap_or(1);
    let coords = u32::try_from(top).ok().and_then(|e| base.k().checked_pow(e)).and_then(|c| c.checked_mul(n));
    match coords {
        Some(c) if c <= AMPLIFY_GUARD => {}
        other => return Err(Error::DimensionGuard { dim: other.unwrap_or(usize::MAX), limit: AMPLIFY_GUARD }),
    }
    let mut out = t.clone();
    for j in 1..=q {
        out = graded_compose(&out, &bimod::sigma_power(t, j * r1, tol)?);
    }
    let overlap = overlap_norm(&out, 1, tol)?;
    let bound = base_overlap.powi(q as i32 + 1);
    if overlap > bound + tol {
        return Err(Error::InvariantViolation {
            path: "amplify".into(),
            message: format!("overlap {overlap:.3e} exceeds the power bound {bound:.3e}"),
        });
    }
    let block_isometry = block_isometry_norms(&out);
    if let Some((block, &n)) = block_isometry.iter().enumerate().find(|(_, &n)| (n - 1.0).abs() > tol) {
        return Err(Error::NotCompletelyIsometric { block, norm: n });
    }
    Ok(Amplified { operator: out, q, base_overlap, overlap, block_isometry })
}

/// A central vector `R ∈ X ⊗ X` solving the conjugate equations with `R̄ = sign·R`.
#[derive(Debug, Clone)]
pub struct ConjugateDatum {
    r: GradedOperator,
    sign: i8,
    rtr: AlgebraElement,
}

impl ConjugateDatum {
    /// `coords` are the `k² × 1` coordinates of `R` at level 2.
    pub fn new(base: &Bimodule, coords: &AMatrix, sign: i8, tol: f64) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::Schema { path: "conjugate.sign".into(), message: "sign must be 1 or -1".into() });
        }
        let r = GradedOperator::new(base, 0, 2, coords)?;
        let drift = r.matrix().sub(coords).max_abs();
        if drift > tol * coords.max_abs().max(1.0) {
            return Err(Error::NotProjection(drift));
        }
        let defect = bimod::commutator_defect(&r);
        if defect > tol * coords.max_abs().max(1.0) {
            return Err(Error::NotCentral(defect));
        }
        let eq = conjugate_equation_defect(&r, sign, tol)?;
        if eq > tol.max(1e-8) {
            return Err(Error::ConjugateEquationsFail(eq));
        }
        let rtr = graded_compose(&r.adjoint(), &r).matrix().entry(0, 0);
        Ok(Self { r, sign, rtr })
    }

    pub fn vector(&self) -> &GradedOperator {
        &self.r
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// `R*R`, a central element of `A`.
    pub fn rtr(&self) -> &AlgebraElement {
        &self.rtr
    }
}

/// `‖sign·(R*⊗1)(1⊗R) − 1_X‖`; with `R̄ = sign·R` both equations reduce to this one.
fn conjugate_equation_defect(r: &GradedOperator, sign: i8, tol: f64) -> Result<f64> {
    let base = r.base();
    let lhs = graded_compose(&right_extend_by(&r.adjoint(), 1), &bimod::sigma_shift(r, tol)?)
        .scale(cr(sign as f64));
    lhs.distance(&GradedOperator::identity(base, 1))
}

/// `‖(R*R)^{-1}‖`.
pub fn inverse_rtr_norm(datum: &ConjugateDatum, tol: f64) -> Result<f64> {
    let inv = mmalg::psd_inv_sqrt(datum.rtr(), tol)?;
    Ok(inv.mul(&inv).norm())
}

/// `S = R(R*R)^{-1/2}`, an isometric central vector.
pub fn normalized_vector(datum: &ConjugateDatum, tol: f64) -> Result<GradedOperator> {
    let inv_sqrt = mmalg::psd_inv_sqrt(datum.rtr(), tol)?;
    let r = datum.vector();
    GradedOperator::new(r.base(), 0, 2, &r.matrix().right_mul_element(&inv_sqrt))
}

/// `S_n = σ^{n−1}(S) ⋯ σ(S) S`, an operator from level 0 to level `2n`.
pub fn iterated_vector(s: &GradedOperator, n: usize, tol: f64) -> Result<GradedOperator> {
    let mut out = s.clone();
    for j in 1..n {
        out = graded_compose(&bimod::sigma_power(s, j, tol)?, &out);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RealWitness {
    pub witness: Witness,
    pub inverse_rtr_norm: f64,
    /// `‖S*σ(S)‖`.
    pub first_overlap: f64,
}

/// The witness `S_k` built from a conjugate datum.
pub fn real_witness(datum: &ConjugateDatum, k: usize, tol: f64) -> Result<RealWitness> {
    let inv = inverse_rtr_norm(datum, tol)?;
    if inv >= 1.0 - STRICT_MARGIN {
        return Err(Error::IndexTooSmall(inv));
    }
    let s = normalized_vector(datum, tol)?;
    let sts = graded_compose(&s.adjoint(), &s);
    let iso = sts.distance(&GradedOperator::identity(s.base(), 0))?;
    if iso > tol {
        return Err(Error::NotNormOne(1.0 + iso));
    }
    let first_overlap = overlap_norm(&s, 1, tol)?;
    let sk = iterated_vector(&s, k.max(1), tol)?;
    let witness = verify_witness(&sk, k, tol)?;
    let bound = inv.powi(k as i32);
    if witness.overlap_norm > bound + tol {
        return Err(Error::InvariantViolation {
            path: "real_witness".into(),
            message: format!("overlap {:.3e} exceeds the decay bound {bound:.3e}", witness.overlap_norm),
        });
    }
    Ok(RealWitness { witness, inverse_rtr_norm: inv, first_overlap })
}

/// Flattened complex coordinates of a module vector (blocks concatenated).
pub fn flatten_vector(x: &AMatrix) -> Vec<C64> {
    x.blocks().iter().flat_map(linalg::vec_of).collect()
}

pub fn unflatten_vector(template: &AMatrix, v: &[C64]) -> AMatrix {
    let mut out = template.clone();
    let mut off = 0;
    for i in 0..template.blocks().len() {
        let (r, c) = template.block(i).shape();
        *out.block_mut(i) = linalg::from_vec(r, c, &v[off..off + r * c]);
        off += r * c;
    }
    out
}

/// A conjugate-linear map on `X`, `x ↦ K·conj(x)` in flattened coordinates.
#[derive(Debug, Clone)]
pub struct ConjugateLinearMap {
    pub matrix: linalg::CMat,
}

impl ConjugateLinearMap {
    pub fn apply(&self, x: &AMatrix) -> AMatrix {
        let v: Vec<C64> = flatten_vector(x).iter().map(|z| z.conj()).collect();
        let w = &self.matrix * nalgebra::DVector::from_vec(v);
        unflatten_vector(x, w.as_slice())
    }
}

/// Builds `R = Σ u_a ⊗ F(u_a)` from a conjugate-linear `F` with
/// `F(a x b) = b* F(x) a*` and `F² = ±μ`, after rescaling `F` by `μ^{-1/2}`.
pub fn conjugate_from_f(base: &Bimodule, f: &ConjugateLinearMap, tol: f64) -> Result<ConjugateDatum> {
    let dim = flatten_vector(&AMatrix::zeros(base.shape(), base.k(), 1)).len();
    if f.matrix.shape() != (dim, dim) {
        return Err(Error::BadF(format!("matrix must be {dim} x {dim}")));
    }
    let shape = base.shape();
    let span: Vec<AMatrix> = hmod::complex_spanning_set(base.module()).into_iter().map(|v| v.coords().clone()).collect();
    let p = base.module().projection();
    // F maps X into X.
    for v in &span {
        let fv = f.apply(v);
        if p.mul(&fv).sub(&fv).max_abs() > tol * fv.max_abs().max(1.0) {
            return Err(Error::BadF("F leaves the module".into()));
        }
    }
    // F² = λ·1 with λ real and nonzero.
    let mut lambda: Option<C64> = None;
    for v in &span {
        let ffv = f.apply(&f.apply(v));
        let (idx, _) = flatten_vector(v)
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let l = flatten_vector(&ffv)[idx] / flatten_vector(v)[idx];
        if ffv.sub(&v.scale(l)).max_abs() > tol * ffv.max_abs().max(1.0) {
            return Err(Error::BadF("F squared is not a multiple of the identity".into()));
        }
        match lambda {
            None => lambda = Some(l),
            Some(l0) if (l0 - l).norm() > tol * l0.norm().max(1.0) => {
                return Err(Error::BadF("F squared is not a multiple of the identity".into()));
            }
            _ => {}
        }
    }
    let lambda = lambda.ok_or_else(|| Error::BadF("module is zero".into()))?;
    if lambda.im.abs() > tol * lambda.norm().max(1.0) || lambda.re.abs() <= tol {
        return Err(Error::BadF(format!("F squared is {lambda}, not a nonzero real multiple of 1")));
    }
    let sign: i8 = if lambda.re > 0.0 { 1 } else { -1 };
    let scaled = ConjugateLinearMap { matrix: &f.matrix / cr(lambda.re.abs().sqrt()) };
    // Bimodule compatibility on matrix units.
    for v in &span {
        let fv = scaled.apply(v);
        for (i, r, s) in shape.matrix_units() {
            let e = AlgebraElement::matrix_unit(shape, i, r, s);
            let right = scaled.apply(&v.right_mul_element(&e));
            let want = base.phi(&e.adjoint()).mul(&fv);
            if right.sub(&want).max_abs() > tol * fv.max_abs().max(1.0) {
                return Err(Error::BadF("F(x a) differs from a* F(x)".into()));
            }
            let left = scaled.apply(&base.phi(&e).mul(v));
            let want = fv.right_mul_element(&e.adjoint());
            if left.sub(&want).max_abs() > tol * fv.max_abs().max(1.0) {
                return Err(Error::BadF("F(a x) differs from F(x) a*".into()));
            }
        }
    }
    let t1 = bimod::tensor_power(base, 1);
    let mut coords = AMatrix::zeros(shape, base.k() * base.k(), 1);
    for u in hmod::frame(base.module()) {
        let fu = ModuleVector::from_parts(base.module().clone(), scaled.apply(u.coords()));
        coords = coords.add(t1.simple_tensor(&u, &fu)?.coords());
    }
    ConjugateDatum::new(base, &coords, sign, tol.max(1e-9))
        .map_err(|e| Error::ConstructionFailed(format!("R = Σ u ⊗ F(u) rejected: {e}")))
}

#[derive(Debug, Clone)]
pub struct JonesWitness {
    pub witness: Witness,
    pub index: AlgebraElement,
    /// `max_m ‖q_k σ^m(q_k)‖` over `1 ≤ m ≤ k`.
    pub orthogonality_residual: f64,
}

/// `q_k = e_A ⊗ ⋯ ⊗ e_A ⊗ (1 − e_A)` at level `k + 1`.
pub fn jones_witness(inc: &index_theory::Inclusion, k: usize, tol: f64) -> Result<JonesWitness> {
    let pres = index_theory::present_module(inc, tol)?;
    let qb = index_theory::quasi_basis(&pres, tol)?;
    if qb.is_trivial(tol.max(1e-9)) {
        return Err(Error::TrivialIndex);
    }
    let (dim_j, mask) = inc.degenerate_ideal(tol.max(1e-9));
    if dim_j > 0 {
        return Err(Error::DegenerateIdealNonzero(mask));
    }
    let base = pres.bimodule();
    let e = GradedOperator::from_module_operator(base, 1, 1, &index_theory::jones_projection(&pres, tol)?)?;
    let co = GradedOperator::identity(base, 1).sub(&e)?;
    let k = k.max(1);
    let mut q = e.clone();
    for m in 1..k {
        q = graded_compose(&right_extend_by(&q, 1), &bimod::sigma_power(&e, m, tol)?);
    }
    q = graded_compose(&right_extend_by(&q, 1), &bimod::sigma_power(&co, k, tol)?);
    if q.norm() <= 1e-9 {
        return Err(Error::TrivialIndex);
    }
    let mut residual: f64 = 0.0;
    for m in 1..=k {
        residual = residual.max(graded_compose(&q, &bimod::sigma_power(&q, m, tol)?).norm());
    }
    if residual > 1e-10 {
        return Err(Error::InvariantViolation {
            path: "jones_witness".into(),
            message: format!("q_k σ^m(q_k) residual {residual:.3e}"),
        });
    }
    let witness = verify_witness(&q, k, tol)?;
    Ok(JonesWitness { witness, index: qb.index, orthogonality_residual: residual })
}

/// Cylinder projection of a vertex word `(x_0, …, x_p)` at level `p`:
/// paths of length `p` starting at `x_0` whose `j`-th edge ends at `x_j`.
pub fn cylinder_projection(base: &Bimodule, word: &[usize]) -> GradedOperator {
    let shape = base.shape();
    let p = word.len() - 1;
    let mut q = GradedOperator::left_action(base, p, &AlgebraElement::central_projection(shape, word[0]));
    for (j, &v) in word.iter().enumerate().skip(1) {
        let right = base.level(j).module().right_central(&AlgebraElement::central_projection(shape, v));
        let rj = GradedOperator::from_module_operator(base, j, j, &right).expect("level module");
        q = graded_compose(&q, &right_extend_by(&rj, p - j));
    }
    q
}

/// Whether the cylinders of `a` and `b` overlap after shifting `b` by `j`.
fn cylinders_meet(adj: &[Vec<u8>], a: &[usize], b: &[usize], j: usize) -> bool {
    let p = a.len() - 1;
    if j <= p {
        a[j..] == b[..=p - j]
    } else {
        // A path of exactly j − p edges from the end of a to the start of b.
        let d = adj.len();
        let mut cur = vec![false; d];
        cur[a[p]] = true;
        for _ in 0..(j - p) {
            let mut next = vec![false; d];
            for v in 0..d {
                if cur[v] {
                    for w in 0..d {
                        if adj[v][w] == 1 {
                            next[w] = true;
                        }
                    }
                }
            }
            cur = next;
        }
        cur[b[0]]
    }
}

#[derive(Debug, Clone)]
pub struct CylinderWitness {
    pub witness: Witness,
    pub words: Vec<Vec<usize>>,
    pub depth: usize,
}

/// Searches unions of cylinder projections `q` with `q σ^j(q) = 0` for
/// `1 ≤ j ≤ k` and one word per vertex, and certifies `σ^r(q)`.
pub fn ck_witness(base: &Bimodule, k: usize, r: usize, depth_cap: usize, tol: f64) -> Result<CylinderWitness> {
    let adj = ideal_graph::adjacency(base).adjacency;
    if !ideal_graph::condition_i(&adj)? {
        return Err(Error::ConditionIFails);
    }
    let d = adj.len();
    for depth in 1..=depth_cap {
        let words = ideal_graph::subshift_words(&adj, depth + 1).words;
        let by_start: Vec<Vec<&Vec<usize>>> =
            (0..d).map(|v| words.iter().filter(|w| w[0] == v).collect()).collect();
        let mut chosen: Vec<&Vec<usize>> = Vec::new();
        if search(&adj, &by_start, k, &mut chosen) {
            let words: Vec<Vec<usize>> = chosen.iter().map(|w| (*w).clone()).collect();
            let mut q = cylinder_projection(base, &words[0]);
            for w in &words[1..] {
                q = q.add(&cylinder_projection(base, w))?;
            }
            let t = bimod::sigma_power(&q, r, tol)?;
            // q σ^j(q) = 0 exactly for the chosen words.
            for j in 1..=k {
                let prod = graded_compose(&q, &bimod::sigma_power(&q, j, tol)?);
                if prod.norm() > 1e-10 {
                    return Err(Error::InvariantViolation {
                        path: "ck_witness".into(),
                        message: format!("cylinder overlap at shift {j} is {:.3e}", prod.norm()),
                    });
                }
            }
            let witness = verify_witness(&t, k, tol)?;
            return Ok(CylinderWitness { witness, words, depth });
        }
    }
    Err(Error::SearchExhausted(depth_cap))
}

fn search<'a>(adj: &[Vec<u8>], by_start: &[Vec<&'a Vec<usize>>], k: usize, chosen: &mut Vec<&'a Vec<usize>>) -> bool {
    let v = chosen.len();
    if v == by_start.len() {
        return true;
    }
    for &w in &by_start[v] {
        let ok = (1..=k).all(|j| {
            !cylinders_meet(adj, w, w, j)
                && chosen.iter().all(|&c| !cylinders_meet(adj, w, c, j) && !cylinders_meet(adj, c, w, j))
        });
        if ok {
            chosen.push(w);
            if search(adj, by_start, k, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}
