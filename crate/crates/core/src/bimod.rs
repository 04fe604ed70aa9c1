//! Hilbert bimodules, their tensor powers, and operators between powers.
//!
//! `X^{⊗(r+1)}` is presented inside `A^{k^{r+1}}` through
//! `ι(x ⊗ y) = [φ(x_α) y]_α`, so the first tensor factor is the most
//! significant index. In this picture `T ⊗ 1_X` is the entrywise map
//! `T ↦ [φ(T_{αβ})]`, called `ext` below; it is a *-homomorphism between
//! matrix algebras over `A`, and every tensor-power datum is obtained from
//! level zero by repeated `ext`.

use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::hmod::{self, HilbertModule, ModuleOperator, ModuleVector};
use crate::linalg::{self, cr, CMat, C64};
use crate::mmalg::{AMatrix, AlgebraElement, AlgebraShape};

/// One tensor power `X^{⊗r}` with its left action.
#[derive(Debug)]
pub struct Level {
    r: usize,
    module: HilbertModule,
    /// `φ_r` on the matrix units of `A`, filled on first use.
    phi: OnceLock<Vec<AMatrix>>,
}

impl Level {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }
}

#[derive(Debug)]
struct BimoduleData {
    module: HilbertModule,
    /// Images of the matrix units, in `AlgebraShape::matrix_units` order.
    phi: Vec<AMatrix>,
    /// `(unit, target block)` pairs whose image is nonzero.
    support: Vec<(usize, usize)>,
    levels: RwLock<Vec<Arc<Level>>>,
}

/// A right Hilbert module with a unital injective left action.
#[derive(Debug, Clone)]
pub struct Bimodule {
    data: Arc<BimoduleData>,
}

impl PartialEq for Bimodule {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data) || (self.data.module == other.data.module && self.data.phi == other.data.phi)
    }
}

/// Validates left-action data and builds the bimodule.
pub fn make_bimodule(module: HilbertModule, phi_images: Vec<AMatrix>, tol: f64) -> Result<Bimodule> {
    let shape = module.shape().clone();
    let units = shape.matrix_units();
    if phi_images.len() != units.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} left-action images for an algebra of dimension {}",
            phi_images.len(),
            units.len()
        )));
    }
    let k = module.k();
    for m in &phi_images {
        if m.rows() != k || m.cols() != k || m.shape() != &shape {
            return Err(Error::ShapeMismatch(format!("left-action images must be {k} x {k}")));
        }
    }
    let p = module.projection();
    let index = |i: usize, r: usize, s: usize| -> usize {
        shape.block_sizes()[..i].iter().map(|n| n * n).sum::<usize>() + r * shape.block_size(i) + s
    };
    let scale = phi_images.iter().map(|m| m.max_abs()).fold(1.0, f64::max);
    let tol_h = tol * scale * scale;

    // Images live in L_A(X) = p M_k(A) p.
    let mut defect: f64 = 0.0;
    for m in &phi_images {
        defect = defect.max(p.mul(m).sub(m).max_abs()).max(m.mul(p).sub(m).max_abs());
    }
    // *-homomorphism on matrix units.
    for &(i, r, s) in &units {
        let e = &phi_images[index(i, r, s)];
        defect = defect.max(e.adjoint().sub(&phi_images[index(i, s, r)]).max_abs());
        for &(j, t, u) in &units {
            let prod = e.mul(&phi_images[index(j, t, u)]);
            let expected = if i == j && s == t {
                phi_images[index(i, r, u)].clone()
            } else {
                AMatrix::zeros(&shape, k, k)
            };
            defect = defect.max(prod.sub(&expected).max_abs());
        }
    }
    if defect > tol_h {
        return Err(Error::NotHomomorphism(defect));
    }
    let mut one = AMatrix::zeros(&shape, k, k);
    for i in 0..shape.num_blocks() {
        for r in 0..shape.block_size(i) {
            one = one.add(&phi_images[index(i, r, r)]);
        }
    }
    let unital = one.sub(p).max_abs();
    if unital > tol_h {
        return Err(Error::NotUnital(unital));
    }
    for i in 0..shape.num_blocks() {
        if phi_images[index(i, 0, 0)].max_abs() <= tol {
            return Err(Error::NotInjective(i));
        }
    }
    Ok(Bimodule::from_parts_unchecked(module, phi_images))
}

impl Bimodule {
    pub(crate) fn from_parts_unchecked(module: HilbertModule, phi: Vec<AMatrix>) -> Self {
        let support = phi
            .iter()
            .enumerate()
            .flat_map(|(u, m)| {
                m.blocks()
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| linalg::max_abs(b) > 0.0)
                    .map(move |(j, _)| (u, j))
                    .collect::<Vec<_>>()
            })
            .collect();
        let shape = module.shape().clone();
        let level0 = Arc::new(Level { r: 0, module: HilbertModule::free(&shape, 1), phi: OnceLock::new() });
        let _ = level0.phi.set(
            shape
                .matrix_units()
                .iter()
                .map(|&(i, r, s)| AMatrix::from_element(&AlgebraElement::matrix_unit(&shape, i, r, s)))
                .collect(),
        );
        let level1 = Arc::new(Level { r: 1, module: module.clone(), phi: OnceLock::new() });
        let _ = level1.phi.set(phi.clone());
        let data = BimoduleData { module, phi, support, levels: RwLock::new(vec![level0, level1]) };
        Self { data: Arc::new(data) }
    }

    /// `X = A` with left multiplication.
    pub fn trivial(shape: &AlgebraShape) -> Self {
        let phi = shape
            .matrix_units()
            .iter()
            .map(|&(i, r, s)| AMatrix::from_element(&AlgebraElement::matrix_unit(shape, i, r, s)))
            .collect();
        Self::from_parts_unchecked(HilbertModule::free(shape, 1), phi)
    }

    /// `X = C^n` over `C` with scalar left action (the Cuntz algebra `O_n`).
    pub fn cuntz(n: usize) -> Self {
        let shape = AlgebraShape::scalars();
        Self::from_parts_unchecked(HilbertModule::free(&shape, n), vec![AMatrix::identity(&shape, n)])
    }

    pub fn shape(&self) -> &AlgebraShape {
        self.data.module.shape()
    }

    pub fn module(&self) -> &HilbertModule {
        &self.data.module
    }

    pub fn k(&self) -> usize {
        self.data.module.k()
    }

    pub fn phi_images(&self) -> &[AMatrix] {
        &self.data.phi
    }

    /// `φ(a)` as a `k × k` matrix over `A`.
    pub fn phi(&self, a: &AlgebraElement) -> AMatrix {
        let shape = self.shape();
        let mut acc = AMatrix::zeros(shape, self.k(), self.k());
        for (u, (i, r, s)) in shape.matrix_units().into_iter().enumerate() {
            let z = a.block(i)[(r, s)];
            if z != C64::new(0.0, 0.0) {
                acc = acc.add(&self.data.phi[u].scale(z));
            }
        }
        acc
    }

    /// `T ↦ T ⊗ 1_X` on an `N × N'` matrix over `A`.
    pub fn ext(&self, t: &AMatrix) -> AMatrix {
        let shape = self.shape();
        let k = self.k();
        let (n, n2) = (t.rows(), t.cols());
        let units = shape.matrix_units();
        let mut blocks: Vec<CMat> = shape
            .block_sizes()
            .iter()
            .map(|&nj| CMat::zeros(n * k * nj, n2 * k * nj))
            .collect();
        let mut slices: Vec<Option<CMat>> = vec![None; units.len()];
        for &(u, j) in &self.data.support {
            let (i, r, s) = units[u];
            let slice = slices[u].get_or_insert_with(|| t.slice_at(i, r, s));
            if linalg::max_abs(slice) == 0.0 {
                continue;
            }
            blocks[j] += linalg::kron(slice, self.data.phi[u].block(j));
        }
        AMatrix::from_blocks(shape, n * k, n2 * k, blocks).expect("ext keeps block shapes")
    }

    pub fn ext_by(&self, t: &AMatrix, m: usize) -> AMatrix {
        let mut out = t.clone();
        for _ in 0..m {
            out = self.ext(&out);
        }
        out
    }

    /// The cached level `X^{⊗r}`.
    pub fn level(&self, r: usize) -> Arc<Level> {
        if let Some(l) = self.data.levels.read().expect("level cache").get(r) {
            return l.clone();
        }
        let mut levels = self.data.levels.write().expect("level cache");
        while levels.len() <= r {
            let prev = levels.last().expect("levels 0 and 1 exist").clone();
            let next_r = prev.r + 1;
            let base_ids = self.data.module.identity_blocks();
            let module = if prev.module.is_free() && base_ids.iter().all(|&b| b) {
                HilbertModule::free(self.shape(), prev.module.k() * self.k())
            } else {
                HilbertModule::from_projection_unchecked(self.ext(prev.module.projection()))
            };
            levels.push(Arc::new(Level { r: next_r, module, phi: OnceLock::new() }));
        }
        levels[r].clone()
    }

    /// `φ_r` on the matrix units, computed on first use.
    pub fn level_phi(&self, r: usize) -> Vec<AMatrix> {
        let level = self.level(r);
        if let Some(p) = level.phi.get() {
            return p.clone();
        }
        let prev = self.level_phi(r - 1);
        let phi: Vec<AMatrix> = prev.iter().map(|m| self.ext(m)).collect();
        let _ = level.phi.set(phi);
        level.phi.get().expect("just set").clone()
    }

    /// `φ_r(a)`.
    pub fn phi_at(&self, r: usize, a: &AlgebraElement) -> AMatrix {
        self.ext_by(&AMatrix::from_element(a), r)
    }

    /// `X^{⊗r}` as a bimodule in its own right.
    pub fn power_bimodule(&self, r: usize) -> Bimodule {
        if r == 1 {
            return self.clone();
        }
        Bimodule::from_parts_unchecked(self.level(r).module.clone(), self.level_phi(r))
    }
}

/// `X^{⊗r}` with its presentation and left action.
#[derive(Debug, Clone)]
pub struct TensorPower {
    base: Bimodule,
    level: Arc<Level>,
}

pub fn tensor_power(base: &Bimodule, r: usize) -> TensorPower {
    TensorPower { base: base.clone(), level: base.level(r) }
}

impl TensorPower {
    pub fn r(&self) -> usize {
        self.level.r
    }

    pub fn module(&self) -> &HilbertModule {
        &self.level.module
    }

    pub fn base(&self) -> &Bimodule {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.level.module.dim()
    }

    pub fn phi(&self, a: &AlgebraElement) -> AMatrix {
        self.base.phi_at(self.level.r, a)
    }

    pub fn as_bimodule(&self) -> Bimodule {
        if self.level.r == 0 {
            return Bimodule::trivial(self.base.shape());
        }
        self.base.power_bimodule(self.level.r)
    }

    /// `ι(x ⊗ y)` for `x ∈ X^{⊗r}`, `y ∈ X`.
    pub fn simple_tensor(&self, x: &ModuleVector, y: &ModuleVector) -> Result<ModuleVector> {
        if x.module() != self.module() || y.module() != self.base.module() {
            return Err(Error::ModuleMismatch);
        }
        let coords = self.base.ext(x.coords()).mul(y.coords());
        let next = self.base.level(self.level.r + 1);
        Ok(ModuleVector::from_parts(next.module.clone(), coords))
    }
}

/// An operator `X^{⊗r} → X^{⊗s}`, the degree `s − r` part of the graded algebra.
#[derive(Debug, Clone)]
pub struct GradedOperator {
    base: Bimodule,
    r: usize,
    s: usize,
    mat: AMatrix,
}

impl GradedOperator {
    /// Compresses `mat` between the level projections.
    pub fn new(base: &Bimodule, r: usize, s: usize, mat: &AMatrix) -> Result<Self> {
        let dom = base.level(r);
        let cod = base.level(s);
        if mat.rows() != cod.module.k() || mat.cols() != dom.module.k() {
            return Err(Error::DegreeMismatch(format!(
                "matrix is {}x{}, levels ({r},{s}) need {}x{}",
                mat.rows(),
                mat.cols(),
                cod.module.k(),
                dom.module.k()
            )));
        }
        let mat = cod.module.compress_left(&dom.module.compress_right(mat));
        Ok(Self { base: base.clone(), r, s, mat })
    }

    pub fn identity(base: &Bimodule, r: usize) -> Self {
        let mat = base.level(r).module.projection().clone();
        Self { base: base.clone(), r, s: r, mat }
    }

    pub fn zero(base: &Bimodule, r: usize, s: usize) -> Self {
        let mat = AMatrix::zeros(base.shape(), base.level(s).module.k(), base.level(r).module.k());
        Self { base: base.clone(), r, s, mat }
    }

    /// `φ_r(a)` at `(r, r)`.
    pub fn left_action(base: &Bimodule, r: usize, a: &AlgebraElement) -> Self {
        Self { base: base.clone(), r, s: r, mat: base.phi_at(r, a) }
    }

    /// The creation operator `z ↦ x ⊗ z` at `(0, s)` for `x ∈ X^{⊗s}`.
    pub fn creation(base: &Bimodule, s: usize, x: &ModuleVector) -> Result<Self> {
        if x.module() != &base.level(s).module {
            return Err(Error::ModuleMismatch);
        }
        Ok(Self { base: base.clone(), r: 0, s, mat: x.coords().clone() })
    }

    pub fn from_module_operator(base: &Bimodule, r: usize, s: usize, op: &ModuleOperator) -> Result<Self> {
        if op.domain() != &base.level(r).module || op.codomain() != &base.level(s).module {
            return Err(Error::ModuleMismatch);
        }
        Ok(Self { base: base.clone(), r, s, mat: op.matrix().clone() })
    }

    pub fn to_module_operator(&self) -> ModuleOperator {
        ModuleOperator::from_parts(
            self.base.level(self.r).module.clone(),
            self.base.level(self.s).module.clone(),
            self.mat.clone(),
        )
    }

    pub fn base(&self) -> &Bimodule {
        &self.base
    }

    /// `(domain level, codomain level)`.
    pub fn levels(&self) -> (usize, usize) {
        (self.r, self.s)
    }

    pub fn degree(&self) -> isize {
        self.s as isize - self.r as isize
    }

    pub fn matrix(&self) -> &AMatrix {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { base: self.base.clone(), r: self.s, s: self.r, mat: self.mat.adjoint() }
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { base: self.base.clone(), r: self.r, s: self.s, mat: self.mat.scale(z) }
    }

    /// Sum of two operators of the same degree, matched at a common level.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.degree() != other.degree() {
            return Err(Error::DegreeMismatch(format!("{} vs {}", self.degree(), other.degree())));
        }
        let (a, b) = if self.r >= other.r {
            (self.clone(), right_extend_by(other, self.r - other.r))
        } else {
            (right_extend_by(self, other.r - self.r), other.clone())
        };
        Ok(Self { base: a.base.clone(), r: a.r, s: a.s, mat: a.mat.add(&b.mat) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(cr(-1.0)))
    }

    /// Largest entry deviation after matching levels.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }
}

/// `T ↦ T ⊗ 1_X`.
pub fn right_extend(t: &GradedOperator) -> GradedOperator {
    GradedOperator { base: t.base.clone(), r: t.r + 1, s: t.s + 1, mat: t.base.ext(&t.mat) }
}

pub fn right_extend_by(t: &GradedOperator, m: usize) -> GradedOperator {
    GradedOperator { base: t.base.clone(), r: t.r + m, s: t.s + m, mat: t.base.ext_by(&t.mat, m) }
}

/// `S ∘ T`, right-extending whichever factor sits lower so the levels meet.
pub fn graded_compose(s_op: &GradedOperator, t_op: &GradedOperator) -> GradedOperator {
    if t_op.s == s_op.r {
        return GradedOperator { base: s_op.base.clone(), r: t_op.r, s: s_op.s, mat: s_op.mat.mul(&t_op.mat) };
    }
    if t_op.s < s_op.r {
        graded_compose(s_op, &right_extend_by(t_op, s_op.r - t_op.s))
    } else {
        graded_compose(&right_extend_by(s_op, t_op.s - s_op.r), t_op)
    }
}

/// `max_a ‖T φ_r(a) − φ_s(a) T‖` over the matrix units.
pub fn commutator_defect(t: &GradedOperator) -> f64 {
    let phi_r = t.base.level_phi(t.r);
    let phi_s = t.base.level_phi(t.s);
    phi_r
        .iter()
        .zip(&phi_s)
        .map(|(pr, ps)| t.mat.mul(pr).sub(&ps.mul(&t.mat)).max_abs())
        .fold(0.0, f64::max)
}

pub fn is_in_relative_commutant(t: &GradedOperator, tol: f64) -> bool {
    commutator_defect(t) <= tol * t.mat.max_abs().max(1.0)
}

/// `T ↦ 1_X ⊗ T`, defined on operators commuting with the left action.
pub fn sigma_shift(t: &GradedOperator, tol: f64) -> Result<GradedOperator> {
    let defect = commutator_defect(t);
    if defect > tol * t.mat.max_abs().max(1.0) {
        return Err(Error::NotLeftCommutant(defect));
    }
    Ok(sigma_shift_unchecked(t))
}

/// `σ^m(T)`, checking the commutation once.
pub fn sigma_power(t: &GradedOperator, m: usize, tol: f64) -> Result<GradedOperator> {
    if m == 0 {
        return Ok(t.clone());
    }
    let mut out = sigma_shift(t, tol)?;
    for _ in 1..m {
        out = sigma_shift_unchecked(&out);
    }
    Ok(out)
}

pub(crate) fn sigma_shift_unchecked(t: &GradedOperator) -> GradedOperator {
    let k = t.base.k();
    let dom = t.base.level(t.r + 1);
    let mat = dom.module.compress_right(&t.mat.identity_kron(k));
    GradedOperator { base: t.base.clone(), r: t.r + 1, s: t.s + 1, mat }
}

/// `Σ_i S_{u_i} T S_{u_i}*` for frame vectors `u_i ∈ X`.
pub fn cp_sigma(t: &GradedOperator, frame: &[ModuleVector]) -> Result<GradedOperator> {
    let base = &t.base;
    let mut acc = GradedOperator::zero(base, t.r + 1, t.s + 1);
    for u in frame {
        let cu = GradedOperator::creation(base, 1, u)?;
        let left = right_extend_by(&cu, t.s);
        let right = right_extend_by(&cu, t.r).adjoint();
        let term = GradedOperator {
            base: base.clone(),
            r: t.r + 1,
            s: t.s + 1,
            mat: left.mat.mul(&t.mat).mul(&right.mat),
        };
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// Orthonormal basis of `A′ ∩ L_A(X^{⊗r})`.
pub fn relative_commutant(base: &Bimodule, r: usize) -> Vec<GradedOperator> {
    let level = base.level(r);
    let phi = base.level_phi(r);
    let shape = base.shape();
    let n = level.module.k();
    let mut out = Vec::new();
    for j in 0..shape.num_blocks() {
        let v = if level.module.identity_blocks()[j] {
            linalg::eye(n * shape.block_size(j))
        } else {
            linalg::range_basis(level.module.projection().block(j), 0.5)
        };
        let m = v.ncols();
        if m == 0 {
            continue;
        }
        let vh = v.adjoint();
        let gens: Vec<CMat> = phi.iter().map(|f| &vh * f.block(j) * &v).collect();
        for z in linalg::commutant_basis(&gens, m, 1e-9) {
            let mut mat = AMatrix::zeros(shape, n, n);
            *mat.block_mut(j) = &v * z * &vh;
            out.push(GradedOperator { base: base.clone(), r, s: r, mat });
        }
    }
    out
}

/// `Σ_i S_{y_i}* T′ S_{y_i}` for a multiplet with `Σ (y_i|y_i) = 1`.
pub fn phi_inverse_map(tp: &GradedOperator, multiplet: &[ModuleVector]) -> Result<GradedOperator> {
    if tp.r != tp.s || tp.r == 0 {
        return Err(Error::DegreeMismatch(format!("expected (m+1, m+1), got ({}, {})", tp.r, tp.s)));
    }
    let base = &tp.base;
    let shape = base.shape();
    let mut sum = AlgebraElement::zero(shape);
    for y in multiplet {
        sum = sum.add(&hmod::inner(y, y)?);
    }
    let defect = sum.sub(&AlgebraElement::one(shape)).norm();
    if defect > 1e-9 {
        return Err(Error::BadMultiplet(defect));
    }
    let m = tp.r - 1;
    let mut acc = GradedOperator::zero(base, m, m);
    for y in multiplet {
        let cy = right_extend_by(&GradedOperator::creation(base, 1, y)?, m);
        let term = GradedOperator { base: base.clone(), r: m, s: m, mat: cy.mat.adjoint().mul(&tp.mat).mul(&cy.mat) };
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

/// `‖σ^m(T) S_x − S_x T‖` for `T ∈ A′ ∩ L_A(X^{⊗m})` and `x ∈ X^{⊗m}`.
pub fn intertwine_check(t: &GradedOperator, x: &ModuleVector, tol: f64) -> Result<f64> {
    let (r, s) = t.levels();
    if r != s {
        return Err(Error::DegreeMismatch(format!("expected (m, m), got ({r}, {s})")));
    }
    let sx = GradedOperator::creation(&t.base, r, x)?;
    let lhs = graded_compose(&sigma_power(t, r, tol)?, &sx);
    let rhs = graded_compose(&sx, t);
    lhs.distance(&rhs)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::random;

    /// `X = X_1 ⊕ X_2` over `C ⊕ C`: `C^2` on the first summand, `C` on the second.
    pub(crate) fn two_vertex() -> Bimodule {
        let shape = AlgebraShape::commutative(2);
        let diag = |v: [f64; 3], blk: usize| {
            let mut m = AMatrix::zeros(&shape, 3, 3);
            for (a, &x) in v.iter().enumerate() {
                m.block_mut(blk)[(a, a)] = cr(x);
            }
            m
        };
        let mut p = diag([1.0, 1.0, 0.0], 0);
        *p.block_mut(1) = diag([0.0, 0.0, 1.0], 1).block(1).clone();
        let module = HilbertModule::new(p, 1e-9).unwrap();
        let mut p1 = diag([1.0, 1.0, 0.0], 0);
        *p1.block_mut(1) = CMat::zeros(3, 3);
        let mut p2 = AMatrix::zeros(&shape, 3, 3);
        *p2.block_mut(1) = diag([0.0, 0.0, 1.0], 1).block(1).clone();
        make_bimodule(module, vec![p1, p2], 1e-9).unwrap()
    }

    fn random_matrix_bimodule(seed: u64) -> Bimodule {
        // A = C ⊕ M_2, X = A ⊕ A with φ(a) = diag(a, u a u*) twisted by a
        // unitary of A, so the left action is non-trivial on both summands.
        let shape = AlgebraShape::new(vec![1, 2]).unwrap();
        let mut rng = random::rng(seed);
        let u = random::unitary(&mut rng, &shape, 1);
        let ue = u.entry(0, 0);
        let phi = shape
            .matrix_units()
            .iter()
            .map(|&(i, r, s)| {
                let e = AlgebraElement::matrix_unit(&shape, i, r, s);
                let twisted = ue.mul(&e).mul(&ue.adjoint());
                AMatrix::from_entries(&shape, 2, 2, |a, b| match (a, b) {
                    (0, 0) => e.clone(),
                    (1, 1) => twisted.clone(),
                    _ => AlgebraElement::zero(&shape),
                })
            })
            .collect();
        make_bimodule(HilbertModule::free(&shape, 2), phi, 1e-9).unwrap()
    }

    #[test]
    fn validation() {
        assert!(make_bimodule(HilbertModule::free(&AlgebraShape::scalars(), 2), vec![AMatrix::identity(&AlgebraShape::scalars(), 2)], 1e-9).is_ok());
        let cc = AlgebraShape::commutative(2);
        let zero = AMatrix::zeros(&cc, 1, 1);
        let one = AMatrix::identity(&cc, 1);
        assert!(matches!(make_bimodule(HilbertModule::free(&cc, 1), vec![zero, one.clone()], 1e-9), Err(Error::NotInjective(0))));
        let s = AlgebraShape::scalars();
        let half = AMatrix::identity(&s, 1).scale(cr(0.5));
        assert!(matches!(make_bimodule(HilbertModule::free(&s, 1), vec![half], 1e-9), Err(Error::NotHomomorphism(_))));
    }

    #[test]
    fn tensor_dimensions() {
        let b = Bimodule::cuntz(3);
        assert_eq!(tensor_power(&b, 0).dim(), 1);
        assert_eq!(tensor_power(&b, 2).dim(), 9);
        let e = two_vertex();
        // X_1^{⊗2} ⊕ X_2^{⊗2}: 4 + 1.
        assert_eq!(tensor_power(&e, 2).dim(), 5);
        assert_eq!(tensor_power(&e, 3).dim(), 9);
    }

    #[test]
    fn balanced_inner_product() {
        let b = random_matrix_bimodule(2);
        let t1 = tensor_power(&b, 1);
        let mut rng = random::rng(3);
        for _ in 0..10 {
            let x1 = b.module().project(&random::matrix(&mut rng, b.shape(), 2, 1));
            let x2 = b.module().project(&random::matrix(&mut rng, b.shape(), 2, 1));
            let y1 = b.module().project(&random::matrix(&mut rng, b.shape(), 2, 1));
            let y2 = b.module().project(&random::matrix(&mut rng, b.shape(), 2, 1));
            let lhs = hmod::inner(&t1.simple_tensor(&x1, &y1).unwrap(), &t1.simple_tensor(&x2, &y2).unwrap()).unwrap();
            let a = hmod::inner(&x1, &x2).unwrap();
            let rhs = y1.coords().adjoint().mul(&b.phi(&a)).mul(y2.coords()).entry(0, 0);
            assert!(lhs.sub(&rhs).max_abs() < 1e-10);
        }
    }

    #[test]
    fn right_extend_is_isometric_and_functorial() {
        let b = random_matrix_bimodule(4);
        let mut rng = random::rng(5);
        let t = GradedOperator::new(&b, 1, 1, &random::matrix(&mut rng, b.shape(), 2, 2)).unwrap();
        let s = GradedOperator::new(&b, 1, 1, &random::matrix(&mut rng, b.shape(), 2, 2)).unwrap();
        assert!((right_extend(&t).norm() - t.norm()).abs() < 1e-10);
        let lhs = right_extend(&graded_compose(&s, &t));
        let rhs = graded_compose(&right_extend(&s), &right_extend(&t));
        assert!(lhs.distance(&rhs).unwrap() < 1e-10);
        let id = GradedOperator::identity(&b, 1);
        assert!(right_extend(&id).distance(&GradedOperator::identity(&b, 2)).unwrap() < 1e-12);
    }

    #[test]
    fn creation_adjoint_gives_inner_product() {
        let b = two_vertex();
        let mut rng = random::rng(6);
        let x = b.module().project(&random::matrix(&mut rng, b.shape(), 3, 1));
        let y = b.module().project(&random::matrix(&mut rng, b.shape(), 3, 1));
        let sx = GradedOperator::creation(&b, 1, &x).unwrap();
        let sy = GradedOperator::creation(&b, 1, &y).unwrap();
        let prod = graded_compose(&sx.adjoint(), &sy);
        assert_eq!(prod.levels(), (0, 0));
        assert!(prod.matrix().entry(0, 0).sub(&hmod::inner(&x, &y).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn sigma_agrees_with_cp_sigma_on_commutant() {
        let b = two_vertex();
        let basis = relative_commutant(&b, 1);
        let frame = hmod::frame(b.module());
        for t in &basis {
            let a = sigma_shift(t, 1e-9).unwrap();
            let c2 = cp_sigma(t, &frame).unwrap();
            assert!(a.distance(&c2).unwrap() < 1e-10);
            assert!((a.norm() - t.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_rejects_non_commuting() {
        let b = two_vertex();
        let mut m = AMatrix::zeros(b.shape(), 3, 3);
        m.block_mut(0)[(0, 1)] = cr(1.0);
        // lives in block 0 only, commutes; move mass between summands instead
        m.block_mut(1)[(2, 2)] = cr(1.0);
        let t = GradedOperator::new(&b, 1, 1, &m).unwrap();
        assert!(sigma_shift(&t, 1e-9).is_ok());
        let cross = GradedOperator::new(&Bimodule::trivial(&AlgebraShape::new(vec![2]).unwrap()), 1, 1, &{
            let s = AlgebraShape::new(vec![2]).unwrap();
            let mut x = AMatrix::zeros(&s, 1, 1);
            x.block_mut(0)[(0, 1)] = cr(1.0);
            x
        })
        .unwrap();
        assert!(matches!(sigma_shift(&cross, 1e-9), Err(Error::NotLeftCommutant(_))));
    }

    #[test]
    fn commutant_dimensions() {
        assert_eq!(relative_commutant(&Bimodule::cuntz(2), 1).len(), 4);
        assert_eq!(relative_commutant(&Bimodule::cuntz(2), 2).len(), 16);
        let s = AlgebraShape::new(vec![1, 2]).unwrap();
        assert_eq!(relative_commutant(&Bimodule::trivial(&s), 1).len(), 2);
        // Example one: L(X) commutant = M_2 ⊕ C.
        assert_eq!(relative_commutant(&two_vertex(), 1).len(), 5);
    }

    #[test]
    fn phi_inverse_undoes_sigma() {
        let b = random_matrix_bimodule(7);
        let ys = hmod::unit_multiplet(b.module()).unwrap();
        for r in 1..=2 {
            for t in relative_commutant(&b, r) {
                let back = phi_inverse_map(&sigma_shift(&t, 1e-9).unwrap(), &ys).unwrap();
                assert!(back.distance(&t).unwrap() < 1e-10);
            }
        }
        let one = GradedOperator::identity(&b, 1);
        assert!(phi_inverse_map(&one, &ys).unwrap().distance(&GradedOperator::identity(&b, 0)).unwrap() < 1e-10);
    }

    #[test]
    fn intertwiner_vanishes() {
        let b = two_vertex();
        let mut rng = random::rng(8);
        for m in 1..=2 {
            let basis = relative_commutant(&b, m);
            let level = b.level(m);
            let x = level.module().project(&random::matrix(&mut rng, b.shape(), level.module().k(), 1));
            let mut t = GradedOperator::zero(&b, m, m);
            for f in &basis {
                t = t.add(&f.scale(c(rng_val(&mut rng), rng_val(&mut rng)))).unwrap();
            }
            assert!(intertwine_check(&t, &x, 1e-9).unwrap() < 1e-9);
        }
    }

    fn rng_val(rng: &mut random::Rng64) -> f64 {
        use rand::Rng;
        rng.random_range(-1.0..1.0)
    }

    #[test]
    fn sigma_commutes_with_right_extension() {
        let b = random_matrix_bimodule(9);
        for t in relative_commutant(&b, 1) {
            let a = sigma_shift(&right_extend(&t), 1e-9).unwrap();
            let c2 = right_extend(&sigma_shift(&t, 1e-9).unwrap());
            assert!(a.distance(&c2).unwrap() < 1e-10);
        }
    }
}
