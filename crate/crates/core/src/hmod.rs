//! Finite projective right Hilbert modules `p·A^k`.
//!
//! Vectors are `k × 1` matrices over `A` fixed by `p`; operators between two
//! modules are rectangular matrices over `A` compressed by the projections.
//! Adjointable maps and compact maps coincide here, so every operator is a
//! finite sum of `θ_{x,y}`.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::mmalg::{self, AMatrix, AlgebraElement, AlgebraShape, DEFAULT_TOL};

#[derive(Debug)]
struct ModuleData {
    shape: AlgebraShape,
    k: usize,
    /// Left unset for free modules, so large identity presentations stay implicit.
    p: OnceLock<AMatrix>,
    /// Per block: `p_i` is the identity, so compressions can be skipped.
    identity_blocks: Vec<bool>,
}

/// The module `p·A^k`. Cloning is cheap; clones refer to the same module.
#[derive(Debug, Clone)]
pub struct HilbertModule {
    data: Arc<ModuleData>,
}

impl PartialEq for HilbertModule {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
            || (self.data.k == other.data.k
                && self.data.shape == other.data.shape
                && self.data.identity_blocks == other.data.identity_blocks
                && self.projection() == other.projection())
    }
}

impl HilbertModule {
    /// Validates `p = p* = p²`.
    pub fn new(p: AMatrix, tol: f64) -> Result<Self> {
        if p.rows() != p.cols() {
            return Err(Error::ShapeMismatch("projection must be square".into()));
        }
        let defect = p.projection_defect();
        if defect > tol.max(1e-12) * 10.0 {
            return Err(Error::NotProjection(defect));
        }
        Ok(Self::from_projection_unchecked(p))
    }

    pub(crate) fn from_projection_unchecked(p: AMatrix) -> Self {
        let identity_blocks = p.blocks().iter().map(|b| linalg::is_identity(b, 1e-13)).collect();
        let cell = OnceLock::new();
        let _ = cell.set(p.clone());
        let data = ModuleData { shape: p.shape().clone(), k: p.rows(), p: cell, identity_blocks };
        Self { data: Arc::new(data) }
    }

    /// The free module `A^k`.
    pub fn free(shape: &AlgebraShape, k: usize) -> Self {
        let data = ModuleData {
            shape: shape.clone(),
            k,
            p: OnceLock::new(),
            identity_blocks: vec![true; shape.num_blocks()],
        };
        Self { data: Arc::new(data) }
    }

    /// Whether `p = 1`, i.e. the module is `A^k` itself.
    pub fn is_free(&self) -> bool {
        self.data.identity_blocks.iter().all(|&b| b)
    }

    /// Presents the closed span of `k × 1` columns `xs` inside `A^k` by
    /// projecting onto the range of `X = [x_1 … x_m]`.
    pub fn from_spanning(shape: &AlgebraShape, xs: &[AMatrix], cutoff: f64) -> Result<Self> {
        let k = xs.first().map(|x| x.rows()).ok_or(Error::LengthMismatch(0, 1))?;
        let m = xs.len();
        let mut big = AMatrix::zeros(shape, k, m);
        for (a, x) in xs.iter().enumerate() {
            if x.rows() != k || x.cols() != 1 {
                return Err(Error::ShapeMismatch("spanning vectors must be k x 1".into()));
            }
            for b in 0..k {
                big.set_entry(b, a, &x.entry(b, 0));
            }
        }
        let p = big.map(|b| {
            let q = b * b.adjoint();
            linalg::herm_fn(&q, |v| if v > cutoff { 1.0 } else { 0.0 })
        });
        Ok(Self::from_projection_unchecked(p))
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.data.shape
    }

    pub fn k(&self) -> usize {
        self.data.k
    }

    pub fn projection(&self) -> &AMatrix {
        self.data.p.get_or_init(|| AMatrix::identity(&self.data.shape, self.data.k))
    }

    pub fn identity_blocks(&self) -> &[bool] {
        &self.data.identity_blocks
    }

    /// Rank of `p` in each block: the complex dimension of `X·e^{(i)}_{11}`.
    pub fn block_ranks(&self) -> Vec<usize> {
        if self.is_free() {
            return self.shape().block_sizes().iter().map(|n| self.k() * n).collect();
        }
        self.projection()
            .blocks()
            .iter()
            .map(|b| linalg::trace(b).re.round().max(0.0) as usize)
            .collect()
    }

    /// Complex dimension of the module.
    pub fn dim(&self) -> usize {
        self.block_ranks()
            .iter()
            .zip(self.shape().block_sizes())
            .map(|(r, n)| r * n)
            .sum()
    }

    /// `q·m` with the identity shortcut.
    pub(crate) fn compress_left(&self, m: &AMatrix) -> AMatrix {
        let mut out = m.clone();
        for (i, &id) in self.data.identity_blocks.iter().enumerate() {
            if !id {
                *out.block_mut(i) = self.projection().block(i) * m.block(i);
            }
        }
        out
    }

    pub(crate) fn compress_right(&self, m: &AMatrix) -> AMatrix {
        let mut out = m.clone();
        for (i, &id) in self.data.identity_blocks.iter().enumerate() {
            if !id {
                *out.block_mut(i) = m.block(i) * self.projection().block(i);
            }
        }
        out
    }

    /// Wraps coordinates after checking `p·x = x`.
    pub fn vector(&self, coords: AMatrix, tol: f64) -> Result<ModuleVector> {
        if coords.rows() != self.k() || coords.cols() != 1 || coords.shape() != self.shape() {
            return Err(Error::ShapeMismatch(format!("vector must be {} x 1", self.k())));
        }
        let defect = self.compress_left(&coords).sub(&coords).max_abs();
        if defect > tol * coords.max_abs().max(1.0) {
            return Err(Error::NotProjection(defect));
        }
        Ok(ModuleVector { module: self.clone(), coords })
    }

    /// Projects arbitrary coordinates into the module.
    pub fn project(&self, coords: &AMatrix) -> ModuleVector {
        ModuleVector { module: self.clone(), coords: self.compress_left(coords) }
    }

    pub fn zero_vector(&self) -> ModuleVector {
        ModuleVector { module: self.clone(), coords: AMatrix::zeros(self.shape(), self.k(), 1) }
    }

    pub fn identity_operator(&self) -> ModuleOperator {
        ModuleOperator { domain: self.clone(), codomain: self.clone(), mat: self.projection().clone() }
    }

    /// Compresses `m` (a `k_Y × k_X` matrix) between `codomain` and `domain`.
    pub fn operator(domain: &Self, codomain: &Self, m: &AMatrix) -> ModuleOperator {
        let mat = codomain.compress_left(&domain.compress_right(m));
        ModuleOperator { domain: domain.clone(), codomain: codomain.clone(), mat }
    }

    /// Checks that `m` already satisfies `q·m·p = m`.
    pub fn checked_operator(domain: &Self, codomain: &Self, m: AMatrix, tol: f64) -> Result<ModuleOperator> {
        if m.rows() != codomain.k() || m.cols() != domain.k() {
            return Err(Error::ShapeMismatch("operator size does not match modules".into()));
        }
        let op = Self::operator(domain, codomain, &m);
        let defect = op.mat.sub(&m).max_abs();
        if defect > tol * m.max_abs().max(1.0) {
            return Err(Error::NotProjection(defect));
        }
        Ok(op)
    }

    /// Right multiplication `x ↦ x·a` by a central element.
    pub fn right_central(&self, a: &AlgebraElement) -> ModuleOperator {
        let m = self.projection().right_mul_element(a);
        ModuleOperator { domain: self.clone(), codomain: self.clone(), mat: m }
    }
}

#[derive(Debug, Clone)]
pub struct ModuleVector {
    module: HilbertModule,
    coords: AMatrix,
}

impl ModuleVector {
    pub(crate) fn from_parts(module: HilbertModule, coords: AMatrix) -> Self {
        Self { module, coords }
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn coords(&self) -> &AMatrix {
        &self.coords
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same(&self.module, &other.module)?;
        Ok(Self { module: self.module.clone(), coords: self.coords.add(&other.coords) })
    }

    pub fn scale(&self, z: crate::linalg::C64) -> Self {
        Self { module: self.module.clone(), coords: self.coords.scale(z) }
    }

    /// `x·a`.
    pub fn right_mul(&self, a: &AlgebraElement) -> Self {
        Self { module: self.module.clone(), coords: self.coords.right_mul_element(a) }
    }

    /// `‖x‖ = ‖(x|x)‖^{1/2}`.
    pub fn norm(&self) -> f64 {
        inner_unchecked(self, self).norm().sqrt()
    }
}

fn same(a: &HilbertModule, b: &HilbertModule) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::ModuleMismatch)
    }
}

fn inner_unchecked(x: &ModuleVector, y: &ModuleVector) -> AlgebraElement {
    x.coords.adjoint().mul(&y.coords).entry(0, 0)
}

/// `(x|y) = Σ x_i* y_i`, linear in `y`.
pub fn inner(x: &ModuleVector, y: &ModuleVector) -> Result<AlgebraElement> {
    same(&x.module, &y.module)?;
    Ok(inner_unchecked(x, y))
}

/// The columns of `p`. Reconstruction `x = Σ u_i (u_i|x)` holds because `p x = x`.
pub fn frame(module: &HilbertModule) -> Vec<ModuleVector> {
    let p = module.projection();
    let k = module.k();
    (0..k)
        .map(|a| {
            let coords = AMatrix::from_entries(module.shape(), k, 1, |b, _| p.entry(b, a));
            ModuleVector { module: module.clone(), coords }
        })
        .collect()
}

/// The columns of `p·U` for a seeded random unitary `U`: another frame, generally not orthogonal.
pub fn rotated_frame(module: &HilbertModule, seed: u64) -> Vec<ModuleVector> {
    let mut rng = crate::random::rng(seed);
    let pu = module.projection().mul(&crate::random::unitary(&mut rng, module.shape(), module.k()));
    let k = module.k();
    (0..k)
        .map(|a| ModuleVector { module: module.clone(), coords: AMatrix::from_entries(module.shape(), k, 1, |b, _| pu.entry(b, a)) })
        .collect()
}

/// Vectors `u·e_irs` over the frame and the matrix units; they span `X` over `C`.
pub fn complex_spanning_set(module: &HilbertModule) -> Vec<ModuleVector> {
    let shape = module.shape();
    let mut out = Vec::new();
    for u in frame(module) {
        for (i, r, s) in shape.matrix_units() {
            let v = u.right_mul(&AlgebraElement::matrix_unit(shape, i, r, s));
            if v.coords.max_abs() > 1e-12 {
                out.push(v);
            }
        }
    }
    out
}

/// Whether `(u_i|u_j) = 0` for `i ≠ j`.
pub fn is_orthogonal(frame: &[ModuleVector], tol: f64) -> bool {
    frame.iter().enumerate().all(|(i, u)| {
        frame
            .iter()
            .enumerate()
            .all(|(j, v)| i == j || inner_unchecked(u, v).max_abs() <= tol)
    })
}

#[derive(Debug, Clone)]
pub struct ModuleOperator {
    domain: HilbertModule,
    codomain: HilbertModule,
    mat: AMatrix,
}

impl ModuleOperator {
    pub(crate) fn from_parts(domain: HilbertModule, codomain: HilbertModule, mat: AMatrix) -> Self {
        Self { domain, codomain, mat }
    }

    pub fn domain(&self) -> &HilbertModule {
        &self.domain
    }

    pub fn codomain(&self) -> &HilbertModule {
        &self.codomain
    }

    pub fn matrix(&self) -> &AMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> AMatrix {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { domain: self.codomain.clone(), codomain: self.domain.clone(), mat: self.mat.adjoint() }
    }

    pub fn apply(&self, x: &ModuleVector) -> Result<ModuleVector> {
        same(&self.domain, &x.module)?;
        Ok(ModuleVector { module: self.codomain.clone(), coords: self.mat.mul(&x.coords) })
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        same(&other.codomain, &self.domain)?;
        Ok(Self { domain: other.domain.clone(), codomain: self.codomain.clone(), mat: self.mat.mul(&other.mat) })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same(&self.domain, &other.domain)?;
        same(&self.codomain, &other.codomain)?;
        Ok(Self { domain: self.domain.clone(), codomain: self.codomain.clone(), mat: self.mat.add(&other.mat) })
    }

    pub fn scale(&self, z: crate::linalg::C64) -> Self {
        Self { domain: self.domain.clone(), codomain: self.codomain.clone(), mat: self.mat.scale(z) }
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }
}

/// `θ_{x,y}(z) = x (y|z)`, an operator from `y`'s module to `x`'s.
pub fn theta(x: &ModuleVector, y: &ModuleVector) -> ModuleOperator {
    ModuleOperator {
        domain: y.module.clone(),
        codomain: x.module.clone(),
        mat: x.coords.mul(&y.coords.adjoint()),
    }
}

fn columns(xs: &[ModuleVector]) -> AMatrix {
    let shape = xs[0].module.shape();
    let k = xs[0].module.k();
    let mut m = AMatrix::zeros(shape, k, xs.len());
    for (a, x) in xs.iter().enumerate() {
        for b in 0..k {
            m.set_entry(b, a, &x.coords.entry(b, 0));
        }
    }
    m
}

/// Gram matrix `((x_i|x_j))_{ij}` over `A`.
pub fn gram(xs: &[ModuleVector]) -> AMatrix {
    let c = columns(xs);
    c.adjoint().mul(&c)
}

/// `‖Σ θ_{x_i,y_i}‖` computed as `‖G_x^{1/2} G_y^{1/2}‖`.
pub fn op_norm_via_gram(xs: &[ModuleVector], ys: &[ModuleVector]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.is_empty() {
        return Err(Error::LengthMismatch(0, 1));
    }
    for v in xs.iter().skip(1) {
        same(&xs[0].module, &v.module)?;
    }
    for v in ys.iter().skip(1) {
        same(&ys[0].module, &v.module)?;
    }
    // Gram matrices are positive up to rounding; clamp at a loose tolerance.
    let gx = mmalg::psd_sqrt_matrix(&gram(xs), 1e-8)?;
    let gy = mmalg::psd_sqrt_matrix(&gram(ys), 1e-8)?;
    Ok(gx.mul(&gy).norm())
}

/// Blocks on which `p` vanishes (zero-based).
pub fn untouched_blocks(module: &HilbertModule) -> Vec<usize> {
    if module.is_free() {
        return Vec::new();
    }
    module
        .projection()
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| linalg::max_abs(b) <= DEFAULT_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// `span{(x|y)} = A`, decided blockwise.
pub fn is_full(module: &HilbertModule) -> bool {
    untouched_blocks(module).is_empty()
}

/// Vectors `y_j` with `Σ (y_j|y_j) = 1`.
///
/// Takes `u_a·e^{(i)}_{rs}` over frame vectors and matrix units: the sum of
/// their inner products in block `i` is `rank(p_i)·1`, so dividing by
/// `rank(p_i)^{1/2}` gives the unit.
pub fn unit_multiplet(module: &HilbertModule) -> Result<Vec<ModuleVector>> {
    let untouched = untouched_blocks(module);
    if !untouched.is_empty() {
        return Err(Error::NotFull(untouched));
    }
    let shape = module.shape();
    let ranks: Vec<f64> = module.projection().blocks().iter().map(|b| linalg::trace(b).re).collect();
    let mut out = Vec::new();
    for u in frame(module) {
        for (i, r, s) in shape.matrix_units() {
            let e = AlgebraElement::matrix_unit(shape, i, r, s).scale(cr(1.0 / ranks[i].sqrt()));
            let y = u.right_mul(&e);
            if y.coords.max_abs() > 1e-14 {
                out.push(y);
            }
        }
    }
    let mut sum = AlgebraElement::zero(shape);
    for y in &out {
        sum = sum.add(&inner_unchecked(y, y));
    }
    let defect = sum.sub(&AlgebraElement::one(shape)).norm();
    if defect > 1e-9 {
        return Err(Error::BadMultiplet(defect));
    }
    Ok(out)
}

/// The center of `L_A(X) = p M_k(A) p`, checked against `{r(a) : a ∈ Z(A)}`.
///
/// Block `i` of `L_A(X)` is the full matrix algebra on the range of `p_i`;
/// its center is found by solving the commutation equations against the
/// matrix units of that range, then compared with right multiplication by
/// the minimal central projections.
pub fn center_of_endomorphisms(module: &HilbertModule) -> Result<Vec<ModuleOperator>> {
    let untouched = untouched_blocks(module);
    if !untouched.is_empty() {
        return Err(Error::NotFull(untouched));
    }
    let shape = module.shape();
    let k = module.k();
    let mut basis = Vec::new();
    for (i, p_i) in module.projection().blocks().iter().enumerate() {
        let v = linalg::range_basis(p_i, 0.5);
        let m = v.ncols();
        let mut gens = Vec::new();
        for a in 0..m.saturating_sub(1) {
            let mut g = CMat::zeros(m, m);
            g[(a, a + 1)] = cr(1.0);
            gens.push(g.adjoint());
            gens.push(g);
        }
        if m == 1 {
            gens.push(linalg::eye(1));
        }
        for z in linalg::commutant_basis(&gens, m, 1e-9) {
            let mut mat = AMatrix::zeros(shape, k, k);
            *mat.block_mut(i) = &v * z * v.adjoint();
            basis.push(ModuleOperator { domain: module.clone(), codomain: module.clone(), mat });
        }
    }
    let expected: Vec<ModuleOperator> = (0..shape.num_blocks())
        .map(|i| module.right_central(&AlgebraElement::central_projection(shape, i)))
        .collect();
    if !same_span(&basis, &expected, 1e-9) {
        return Err(Error::InvariantViolation {
            path: "center".into(),
            message: "center differs from right multiplication by Z(A)".into(),
        });
    }
    Ok(basis)
}

/// Whether two families of operators span the same subspace.
pub(crate) fn same_span(a: &[ModuleOperator], b: &[ModuleOperator], tol: f64) -> bool {
    let flat = |ops: &[ModuleOperator]| -> CMat {
        let vecs: Vec<Vec<_>> = ops.iter().map(|o| linalg::vec_of(&o.mat.flatten())).collect();
        let len = vecs.first().map_or(0, |v| v.len());
        CMat::from_fn(len, vecs.len(), |r, c| vecs[c][r])
    };
    let rank = |m: &CMat| -> usize {
        if m.ncols() == 0 {
            return 0;
        }
        let g = m.adjoint() * m;
        let (vals, _) = linalg::herm_eig(&g);
        let top = vals.last().cloned().unwrap_or(0.0).max(1.0);
        vals.iter().filter(|&&v| v > tol * top).count()
    };
    let fa = flat(a);
    let fb = flat(b);
    let ra = rank(&fa);
    let rb = rank(&fb);
    if ra != rb {
        return false;
    }
    let mut both = CMat::zeros(fa.nrows(), fa.ncols() + fb.ncols());
    both.view_mut((0, 0), fa.shape()).copy_from(&fa);
    both.view_mut((0, fa.ncols()), fb.shape()).copy_from(&fb);
    rank(&both) == ra
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    fn sample_module(seed: u64) -> HilbertModule {
        let mut rng = random::rng(seed);
        let shape = AlgebraShape::new(vec![1, 2]).unwrap();
        let p = random::projection(&mut rng, &shape, 2, &[1, 3]);
        HilbertModule::new(p, 1e-9).unwrap()
    }

    #[test]
    fn free_and_explicit_identity_agree_on_dimension() {
        let shape = AlgebraShape::new(vec![1, 2]).unwrap();
        let free = HilbertModule::free(&shape, 2);
        let explicit = HilbertModule::new(AMatrix::identity(&shape, 2), 1e-9).unwrap();
        assert_eq!(free.block_ranks(), explicit.block_ranks());
        assert_eq!(free.dim(), 2 * (1 + 4));
        assert_eq!(sample_module(3).dim(), 1 + 3 * 2);
    }

    #[test]
    fn inner_on_a_is_product() {
        let shape = AlgebraShape::new(vec![2]).unwrap();
        let x_mod = HilbertModule::free(&shape, 1);
        let mut rng = random::rng(1);
        let a = random::element(&mut rng, &shape);
        let b = random::element(&mut rng, &shape);
        let x = x_mod.vector(AMatrix::from_element(&a), 1e-9).unwrap();
        let y = x_mod.vector(AMatrix::from_element(&b), 1e-9).unwrap();
        let ip = inner(&x, &y).unwrap();
        assert!(ip.sub(&a.adjoint().mul(&b)).max_abs() < 1e-14);
        assert_eq!(inner(&x_mod.zero_vector(), &y).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn frame_reconstructs() {
        let m = sample_module(3);
        let u = frame(&m);
        let mut rng = random::rng(4);
        for _ in 0..20 {
            let x = m.project(&random::matrix(&mut rng, m.shape(), 2, 1));
            let mut acc = m.zero_vector();
            for ui in &u {
                acc = acc.add(&ui.right_mul(&inner(ui, &x).unwrap())).unwrap();
            }
            assert!(acc.coords().sub(x.coords()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn frame_of_free_module_is_standard() {
        let shape = AlgebraShape::scalars();
        assert_eq!(frame(&HilbertModule::free(&shape, 1)).len(), 1);
        let f = frame(&HilbertModule::free(&shape, 2));
        assert!(is_orthogonal(&f, 1e-12));
    }

    #[test]
    fn theta_laws() {
        let m = sample_module(5);
        let mut rng = random::rng(6);
        let x = m.project(&random::matrix(&mut rng, m.shape(), 2, 1));
        let y = m.project(&random::matrix(&mut rng, m.shape(), 2, 1));
        let lhs = theta(&x, &y).compose(&theta(&y, &x)).unwrap();
        let rhs = theta(&x.right_mul(&inner(&y, &y).unwrap()), &x);
        assert!(lhs.matrix().sub(rhs.matrix()).max_abs() < 1e-12);
        assert!(theta(&x, &y).adjoint().matrix().sub(theta(&y, &x).matrix()).max_abs() < 1e-14);
        let mut sum = theta(&frame(&m)[0], &frame(&m)[0]);
        for u in frame(&m).iter().skip(1) {
            sum = sum.add(&theta(u, u)).unwrap();
        }
        assert!(sum.matrix().sub(m.projection()).max_abs() < 1e-12);
    }

    #[test]
    fn gram_norm_formula_matches_direct() {
        let m = sample_module(7);
        let mut rng = random::rng(8);
        let xs: Vec<_> = (0..3).map(|_| m.project(&random::matrix(&mut rng, m.shape(), 2, 1))).collect();
        let ys: Vec<_> = (0..3).map(|_| m.project(&random::matrix(&mut rng, m.shape(), 2, 1))).collect();
        let mut direct = theta(&xs[0], &ys[0]);
        for i in 1..3 {
            direct = direct.add(&theta(&xs[i], &ys[i])).unwrap();
        }
        let via = op_norm_via_gram(&xs, &ys).unwrap();
        assert!((via - direct.norm()).abs() < 1e-8);
        assert_eq!(op_norm_via_gram(&xs, &ys[..2]), Err(Error::LengthMismatch(3, 2)));
    }

    #[test]
    fn multiplet_sums_to_one() {
        let m = sample_module(9);
        let ys = unit_multiplet(&m).unwrap();
        let mut sum = AlgebraElement::zero(m.shape());
        for y in &ys {
            sum = sum.add(&inner(y, y).unwrap());
        }
        assert!(sum.sub(&AlgebraElement::one(m.shape())).norm() < 1e-9);
    }

    #[test]
    fn fullness() {
        let cc = AlgebraShape::commutative(2);
        assert!(is_full(&HilbertModule::free(&cc, 1)));
        let p = AMatrix::from_element(&AlgebraElement::central_projection(&cc, 0));
        let half = HilbertModule::new(p, 1e-9).unwrap();
        assert!(!is_full(&half));
        assert!(matches!(unit_multiplet(&half), Err(Error::NotFull(_))));
        assert!(matches!(center_of_endomorphisms(&half), Err(Error::NotFull(_))));
    }

    #[test]
    fn center_dimensions() {
        let c1 = AlgebraShape::scalars();
        assert_eq!(center_of_endomorphisms(&HilbertModule::free(&c1, 1)).unwrap().len(), 1);
        assert_eq!(center_of_endomorphisms(&HilbertModule::free(&c1, 2)).unwrap().len(), 1);
        let cc = AlgebraShape::commutative(2);
        assert_eq!(center_of_endomorphisms(&HilbertModule::free(&cc, 2)).unwrap().len(), 2);
        assert_eq!(center_of_endomorphisms(&sample_module(11)).unwrap().len(), 2);
    }

    #[test]
    fn rejects_non_projection() {
        let shape = AlgebraShape::scalars();
        let p = AMatrix::identity(&shape, 2).scale(cr(0.5));
        assert!(matches!(HilbertModule::new(p, 1e-9), Err(Error::NotProjection(_))));
    }
}
