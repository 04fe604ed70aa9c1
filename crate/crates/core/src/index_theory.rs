//! Finite-index inclusions `A ⊆ B`, the bimodule `B_A`, and finite-type left
//! inner products with the expectations they induce on tensor powers.

use crate::bimod::{Bimodule, GradedOperator};
use crate::error::{Error, Result};
use crate::hmod::{self, HilbertModule, ModuleOperator, ModuleVector};
use crate::linalg::{self, CMat, C64};
use crate::mmalg::{self, AMatrix, AlgebraElement, AlgebraShape, IdealMask, TraceExpectation};
use crate::random;

/// Coefficients of `x` on the matrix units, in `matrix_units()` order.
pub fn unit_coords(x: &AlgebraElement) -> Vec<C64> {
    x.shape().matrix_units().iter().map(|&(i, r, s)| x.block(i)[(r, s)]).collect()
}

pub fn from_unit_coords(shape: &AlgebraShape, v: &[C64]) -> AlgebraElement {
    let mut out = AlgebraElement::zero(shape);
    for (&(i, r, s), z) in shape.matrix_units().iter().zip(v) {
        out.block_mut(i)[(r, s)] = *z;
    }
    out
}

/// The matrix over `A` whose entries are the scalars `c_{αβ}·1`.
pub fn scalar_matrix(shape: &AlgebraShape, c: &CMat) -> AMatrix {
    let blocks = shape.block_sizes().iter().map(|&n| linalg::kron(c, &linalg::eye(n))).collect();
    AMatrix::from_blocks(shape, c.nrows(), c.ncols(), blocks).expect("scalar matrix")
}

/// `A ⊆ B` with an expectation `E: B → A`, both in matrix-unit coordinates.
#[derive(Debug, Clone)]
pub struct Inclusion {
    a: AlgebraShape,
    b: AlgebraShape,
    embed: Vec<AlgebraElement>,
    e: CMat,
}

impl Inclusion {
    pub fn new(a: AlgebraShape, b: AlgebraShape, embed: Vec<AlgebraElement>, e: CMat, tol: f64) -> Result<Self> {
        let inc = Self { a, b, embed, e };
        inc.check_embedding(tol)?;
        inc.check_expectation(tol)?;
        Ok(inc)
    }

    /// The expectation preserving `Σ w_i tr_i` on `B`.
    pub fn with_trace(a: AlgebraShape, b: AlgebraShape, embed: Vec<AlgebraElement>, weights: Option<&[f64]>, tol: f64) -> Result<Self> {
        let probe = Self { a: a.clone(), b: b.clone(), embed, e: CMat::zeros(a.dim(), b.dim()) };
        probe.check_embedding(tol)?;
        let spanning: Vec<AMatrix> = probe.embed.iter().map(AMatrix::from_element).collect();
        let te = mmalg::trace_expectation(&spanning, &AMatrix::identity(&b, 1), weights, tol)?;
        let mut e = CMat::zeros(a.dim(), b.dim());
        for (beta, &(i, r, s)) in b.matrix_units().iter().enumerate() {
            let f = AMatrix::from_element(&AlgebraElement::matrix_unit(&b, i, r, s));
            let image = probe.pull_back(&te.apply(&f).entry(0, 0));
            for (alpha, z) in unit_coords(&image).into_iter().enumerate() {
                e[(alpha, beta)] = z;
            }
        }
        Self::new(a, b, probe.embed, e, tol)
    }

    /// `C ⊆ C^n` with the uniform average, the group algebra of `Z/n` after Fourier transform.
    pub fn cyclic_group(n: usize) -> Result<Self> {
        let a = AlgebraShape::scalars();
        let b = AlgebraShape::commutative(n);
        let embed = vec![AlgebraElement::one(&b)];
        Self::with_trace(a, b, embed, None, mmalg::DEFAULT_TOL)
    }

    /// `A = B` with `E = id`.
    pub fn identity(shape: &AlgebraShape) -> Self {
        let embed = shape.matrix_units().iter().map(|&(i, r, s)| AlgebraElement::matrix_unit(shape, i, r, s)).collect();
        Self { a: shape.clone(), b: shape.clone(), embed, e: linalg::eye(shape.dim()) }
    }

    pub fn a_shape(&self) -> &AlgebraShape {
        &self.a
    }

    pub fn b_shape(&self) -> &AlgebraShape {
        &self.b
    }

    pub fn embedding(&self) -> &[AlgebraElement] {
        &self.embed
    }

    pub fn expectation_matrix(&self) -> &CMat {
        &self.e
    }

    pub fn embed(&self, x: &AlgebraElement) -> AlgebraElement {
        let mut acc = AlgebraElement::zero(&self.b);
        for (z, img) in unit_coords(x).into_iter().zip(&self.embed) {
            if z != C64::new(0.0, 0.0) {
                acc = acc.add(&img.scale(z));
            }
        }
        acc
    }

    pub fn expect(&self, y: &AlgebraElement) -> AlgebraElement {
        let v = &self.e * nalgebra::DVector::from_vec(unit_coords(y));
        from_unit_coords(&self.a, v.as_slice())
    }

    /// Inverse of the embedding on its range, via the trace-orthogonality of matrix-unit images.
    fn pull_back(&self, y: &AlgebraElement) -> AlgebraElement {
        let coeffs: Vec<C64> = self
            .embed
            .iter()
            .map(|img| {
                let num: C64 = img.blocks().iter().zip(y.blocks()).map(|(f, g)| linalg::hs_inner(f, g)).sum();
                let den: C64 = img.blocks().iter().map(|f| linalg::hs_inner(f, f)).sum();
                num / den
            })
            .collect();
        from_unit_coords(&self.a, &coeffs)
    }

    fn b_units(&self) -> Vec<AlgebraElement> {
        self.b.matrix_units().iter().map(|&(i, r, s)| AlgebraElement::matrix_unit(&self.b, i, r, s)).collect()
    }

    fn check_embedding(&self, tol: f64) -> Result<()> {
        let units = self.a.matrix_units();
        if self.embed.len() != units.len() {
            return Err(Error::BadEmbedding(format!("{} images for dim A = {}", self.embed.len(), units.len())));
        }
        if self.embed.iter().any(|x| x.shape() != &self.b) {
            return Err(Error::BadEmbedding("images must live in B".into()));
        }
        let pos = |i: usize, r: usize, s: usize| units.iter().position(|&u| u == (i, r, s)).unwrap();
        let mut defect: f64 = 0.0;
        for (u, &(i, r, s)) in units.iter().enumerate() {
            defect = defect.max(self.embed[u].adjoint().sub(&self.embed[pos(i, s, r)]).max_abs());
            for (v, &(j, t, w)) in units.iter().enumerate() {
                let prod = self.embed[u].mul(&self.embed[v]);
                let want = if i == j && s == t { self.embed[pos(i, r, w)].clone() } else { AlgebraElement::zero(&self.b) };
                defect = defect.max(prod.sub(&want).max_abs());
            }
        }
        if defect > tol {
            return Err(Error::BadEmbedding(format!("not a *-homomorphism (defect {defect:.3e})")));
        }
        let one = self.embed(&AlgebraElement::one(&self.a));
        if one.sub(&AlgebraElement::one(&self.b)).max_abs() > tol {
            return Err(Error::BadEmbedding("not unital".into()));
        }
        for i in 0..self.a.num_blocks() {
            if self.embed[pos(i, 0, 0)].max_abs() <= tol {
                return Err(Error::BadEmbedding(format!("block {} of A is killed", i + 1)));
            }
        }
        Ok(())
    }

    fn check_expectation(&self, tol: f64) -> Result<()> {
        if self.e.shape() != (self.a.dim(), self.b.dim()) {
            return Err(Error::NotExpectation(format!("E must be {} x {}", self.a.dim(), self.b.dim())));
        }
        let one = AlgebraElement::one(&self.a);
        if self.expect(&AlgebraElement::one(&self.b)).sub(&one).max_abs() > tol {
            return Err(Error::NotExpectation("E(1) differs from 1".into()));
        }
        let a_units: Vec<AlgebraElement> =
            self.a.matrix_units().iter().map(|&(i, r, s)| AlgebraElement::matrix_unit(&self.a, i, r, s)).collect();
        for u in &a_units {
            if self.expect(&self.embed(u)).sub(u).max_abs() > tol {
                return Err(Error::NotExpectation("E is not the identity on A".into()));
            }
        }
        for f in self.b_units() {
            let ef = self.expect(&f);
            for u in &a_units {
                for v in &a_units {
                    let lhs = self.expect(&self.embed(u).mul(&f).mul(&self.embed(v)));
                    if lhs.sub(&u.mul(&ef).mul(v)).max_abs() > tol {
                        return Err(Error::NotExpectation("E is not A-bimodular".into()));
                    }
                }
            }
        }
        let g = self.gram();
        let min = g.blocks().iter().map(|b| linalg::herm_eig(b).0.first().cloned().unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
        if !g.is_self_adjoint(tol) || min < -tol {
            return Err(Error::NotExpectation(format!("E is not positive (eigenvalue {min:.3e})")));
        }
        Ok(())
    }

    /// `G_{αβ} = E(f_α* f_β)` over the matrix units of `B`.
    pub fn gram(&self) -> AMatrix {
        let f = self.b_units();
        AMatrix::from_entries(&self.a, f.len(), f.len(), |x, y| self.expect(&f[x].adjoint().mul(&f[y])))
    }

    /// `{a ∈ A : ab = aE(b) for all b}`; the mask lists blocks it contains.
    pub fn degenerate_ideal(&self, tol: f64) -> (usize, IdealMask) {
        let a_units = self.a.matrix_units();
        let f = self.b_units();
        let rows: Vec<Vec<C64>> = f
            .iter()
            .map(|fb| fb.sub(&self.embed(&self.expect(fb))))
            .flat_map(|d| {
                let cols: Vec<Vec<C64>> = self.embed.iter().map(|img| unit_coords(&img.mul(&d))).collect();
                (0..self.b.dim()).map(move |row| cols.iter().map(|c| c[row]).collect::<Vec<C64>>())
            })
            .collect();
        let mut sys = CMat::zeros(rows.len(), a_units.len());
        for (x, row) in rows.iter().enumerate() {
            for (y, z) in row.iter().enumerate() {
                sys[(x, y)] = *z;
            }
        }
        let ns = linalg::null_space(&sys, tol);
        let mask: Vec<bool> = (0..self.a.num_blocks())
            .map(|i| {
                let p = unit_coords(&AlgebraElement::central_projection(&self.a, i));
                let v = &sys * nalgebra::DVector::from_vec(p);
                v.iter().map(|z| z.norm()).fold(0.0, f64::max) <= tol
            })
            .collect();
        (ns.ncols(), IdealMask::new(mask))
    }
}

/// `B_A` presented as `pA^k` through `ι(f_β) = G^{1/2} e_β`.
#[derive(Debug, Clone)]
pub struct PresentedInclusion {
    inclusion: Inclusion,
    bimodule: Bimodule,
    sqrt_gram: AMatrix,
    pinv_sqrt_gram: AMatrix,
}

pub fn present_module(inc: &Inclusion, tol: f64) -> Result<PresentedInclusion> {
    let g = inc.gram();
    let shape = inc.a_shape();
    let k = inc.b_shape().dim();
    // Faithfulness: the trace of E(x*x) must be definite on B as a complex space.
    let mut h = CMat::zeros(k, k);
    for x in 0..k {
        for y in 0..k {
            h[(x, y)] = linalg::trace(&g.entry(x, y).blocks().iter().fold(CMat::zeros(1, 1), |acc, b| acc + CMat::from_element(1, 1, linalg::trace(b))));
        }
    }
    let (vals, _) = linalg::herm_eig(&h);
    let top = vals.last().cloned().unwrap_or(0.0);
    let low = vals.first().cloned().unwrap_or(0.0);
    if low <= tol * top.max(1.0) {
        return Err(Error::DegenerateExpectation(low));
    }
    let cutoff = tol * g.max_abs().max(1.0);
    let sqrt_gram = g.map(|b| linalg::herm_fn(b, |x| x.max(0.0).sqrt()));
    let pinv_sqrt_gram = mmalg::support_inv_sqrt_matrix(&g, cutoff);
    let p = mmalg::support_projection(&g, cutoff);
    let module = HilbertModule::new(p, tol.max(1e-9))?;
    let b = inc.b_shape();
    let f: Vec<AlgebraElement> = b.matrix_units().iter().map(|&(i, r, s)| AlgebraElement::matrix_unit(b, i, r, s)).collect();
    let phi: Vec<AMatrix> = inc
        .embedding()
        .iter()
        .map(|img| {
            let mut c = CMat::zeros(k, k);
            for (beta, fb) in f.iter().enumerate() {
                for (alpha, z) in unit_coords(&img.mul(fb)).into_iter().enumerate() {
                    c[(alpha, beta)] = z;
                }
            }
            sqrt_gram.mul(&scalar_matrix(shape, &c)).mul(&pinv_sqrt_gram)
        })
        .collect();
    let bimodule = crate::bimod::make_bimodule(module, phi, tol.max(1e-9))?;
    let out = PresentedInclusion { inclusion: inc.clone(), bimodule, sqrt_gram, pinv_sqrt_gram };
    // (ι(x)|ι(y)) = E(x*y) on the matrix units.
    let iotas: Vec<ModuleVector> = f.iter().map(|x| out.iota(x)).collect();
    for (x, fx) in f.iter().enumerate() {
        for (y, fy) in f.iter().enumerate() {
            let d = hmod::inner(&iotas[x], &iotas[y])?.sub(&inc.expect(&fx.adjoint().mul(fy))).max_abs();
            if d > tol.max(1e-9) * 10.0 {
                return Err(Error::InvariantViolation {
                    path: "present_module".into(),
                    message: format!("inner product drift {d:.3e}"),
                });
            }
        }
    }
    Ok(out)
}

impl PresentedInclusion {
    pub fn inclusion(&self) -> &Inclusion {
        &self.inclusion
    }

    pub fn bimodule(&self) -> &Bimodule {
        &self.bimodule
    }

    pub fn iota(&self, x: &AlgebraElement) -> ModuleVector {
        let c = CMat::from_column_slice(x.shape().dim(), 1, &unit_coords(x));
        let coords = self.sqrt_gram.mul(&scalar_matrix(self.inclusion.a_shape(), &c));
        self.bimodule.module().project(&coords)
    }

    /// The element of `B` presented by a module vector.
    pub fn iota_inverse(&self, v: &ModuleVector) -> AlgebraElement {
        let w = self.pinv_sqrt_gram.mul(v.coords());
        let b = self.inclusion.b_shape();
        let mut acc = AlgebraElement::zero(b);
        for (beta, &(i, r, s)) in b.matrix_units().iter().enumerate() {
            let fb = AlgebraElement::matrix_unit(b, i, r, s);
            acc = acc.add(&fb.mul(&self.inclusion.embed(&w.entry(beta, 0))));
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct QuasiBasis {
    pub elements: Vec<AlgebraElement>,
    /// `Index E = Σ u_i u_i*`, central in `B`.
    pub index: AlgebraElement,
}

impl QuasiBasis {
    pub fn is_trivial(&self, tol: f64) -> bool {
        self.index.sub(&AlgebraElement::one(self.index.shape())).max_abs() <= tol
    }
}

fn pulled_back_basis(pres: &PresentedInclusion, frame: &[ModuleVector]) -> QuasiBasis {
    let elements: Vec<AlgebraElement> = frame.iter().map(|u| pres.iota_inverse(u)).collect();
    let b = pres.inclusion.b_shape();
    let index = elements.iter().fold(AlgebraElement::zero(b), |acc, u| acc.add(&u.mul(&u.adjoint())));
    QuasiBasis { elements, index }
}

/// Columns of `pU` for a seeded random unitary `U`, a second Parseval frame.
/// Seed of the rotated frame used for basis-independence checks.
pub const SECOND_FRAME_SEED: u64 = 0x5eed;

/// The quasi-basis pulled back from a frame rotated by a seeded random unitary.
pub fn quasi_basis_with_frame(pres: &PresentedInclusion, seed: u64) -> QuasiBasis {
    pulled_back_basis(pres, &hmod::rotated_frame(pres.bimodule().module(), seed))
}

pub fn quasi_basis(pres: &PresentedInclusion, tol: f64) -> Result<QuasiBasis> {
    let inc = pres.inclusion();
    let module = pres.bimodule().module();
    let qb = pulled_back_basis(pres, &hmod::frame(module));
    let violation = |message: String| Error::InvariantViolation { path: "quasi_basis".into(), message };
    for f in inc.b_units() {
        let rebuilt = qb
            .elements
            .iter()
            .fold(AlgebraElement::zero(inc.b_shape()), |acc, u| acc.add(&u.mul(&inc.embed(&inc.expect(&u.adjoint().mul(&f))))));
        let d = rebuilt.sub(&f).max_abs();
        if d > tol.max(1e-9) * 10.0 {
            return Err(violation(format!("reconstruction drift {d:.3e}")));
        }
    }
    let scale = qb.index.max_abs().max(1.0);
    if !qb.index.is_central(tol * scale) {
        return Err(violation("index is not central".into()));
    }
    if qb.index.min_eigenvalue() < 1.0 - tol.max(1e-9) * scale {
        return Err(violation(format!("index has eigenvalue {:.6} below 1", qb.index.min_eigenvalue())));
    }
    let other = pulled_back_basis(pres, &hmod::rotated_frame(module, SECOND_FRAME_SEED));
    let d = other.index.sub(&qb.index).max_abs();
    if d > tol.max(1e-9) * scale {
        return Err(violation(format!("index depends on the basis (drift {d:.3e})")));
    }
    Ok(qb)
}

/// `e_A: ι(x) ↦ ι(E(x))`.
pub fn jones_projection(pres: &PresentedInclusion, tol: f64) -> Result<ModuleOperator> {
    let inc = pres.inclusion();
    let b = inc.b_shape();
    let k = b.dim();
    let mut d = CMat::zeros(k, k);
    for (beta, fb) in inc.b_units().iter().enumerate() {
        for (alpha, z) in unit_coords(&inc.embed(&inc.expect(fb))).into_iter().enumerate() {
            d[(alpha, beta)] = z;
        }
    }
    let m = pres.sqrt_gram.mul(&scalar_matrix(inc.a_shape(), &d)).mul(&pres.pinv_sqrt_gram);
    let module = pres.bimodule().module();
    let e = HilbertModule::checked_operator(module, module, m, tol.max(1e-9) * 10.0)?;
    let violation = |message: String| Error::InvariantViolation { path: "jones_projection".into(), message };
    let defect = e.matrix().projection_defect();
    if defect > tol.max(1e-9) * 10.0 {
        return Err(violation(format!("not a projection (defect {defect:.3e})")));
    }
    for img in pres.bimodule().phi_images() {
        let c = img.mul(e.matrix()).sub(&e.matrix().mul(img)).max_abs();
        if c > tol.max(1e-9) * 10.0 {
            return Err(violation(format!("does not commute with the left action ({c:.3e})")));
        }
    }
    let one = pres.iota(&AlgebraElement::one(b));
    let fixed = e.apply(&one)?.coords().sub(one.coords()).max_abs();
    if fixed > tol.max(1e-9) * 10.0 {
        return Err(violation("does not fix ι(1)".into()));
    }
    Ok(e)
}

/// The matrix unit `x_0` of `B` moved furthest by `e_A`, with the distance.
pub fn jones_moved_vector(pres: &PresentedInclusion, e: &ModuleOperator) -> Result<(AlgebraElement, f64)> {
    let mut best = (AlgebraElement::one(pres.inclusion.b_shape()), 0.0);
    for f in pres.inclusion.b_units() {
        let v = pres.iota(&f);
        let d = e.apply(&v)?.coords().sub(v.coords()).norm();
        if d > best.1 {
            best = (f, d);
        }
    }
    Ok(best)
}

/// Inverse of the left action on its range; images of matrix units are trace-orthogonal.
#[derive(Debug, Clone)]
struct PhiInverse {
    images: Vec<AMatrix>,
    norms: Vec<C64>,
    shape: AlgebraShape,
}

impl PhiInverse {
    fn new(base: &Bimodule) -> Self {
        let images = base.phi_images().to_vec();
        let norms = images.iter().map(|m| m.blocks().iter().map(|b| linalg::hs_inner(b, b)).sum()).collect();
        Self { images, norms, shape: base.shape().clone() }
    }

    fn apply(&self, m: &AMatrix) -> AlgebraElement {
        let coeffs: Vec<C64> = self
            .images
            .iter()
            .zip(&self.norms)
            .map(|(img, n)| img.blocks().iter().zip(m.blocks()).map(|(f, g)| linalg::hs_inner(f, g)).sum::<C64>() / n)
            .collect();
        from_unit_coords(&self.shape, &coeffs)
    }
}

/// A left inner product `_A(x|y) = c·φ^{-1}(E_φ(θ_{x,y}))` with its certificates.
#[derive(Debug, Clone)]
pub struct FiniteTypeStructure {
    base: Bimodule,
    expectation: TraceExpectation,
    phi_inv: PhiInverse,
    normalization: AlgebraElement,
    frame: Vec<ModuleVector>,
    r_ind: AlgebraElement,
}

impl FiniteTypeStructure {
    pub fn base(&self) -> &Bimodule {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        self.expectation.weights()
    }

    /// The central scalars `c`.
    pub fn normalization(&self) -> &AlgebraElement {
        &self.normalization
    }

    pub fn frame(&self) -> &[ModuleVector] {
        &self.frame
    }

    /// `r-Ind[X] = Σ_i _A(u_i|u_i)`.
    pub fn r_ind(&self) -> &AlgebraElement {
        &self.r_ind
    }

    fn raw_inner(&self, x: &AMatrix, y: &AMatrix) -> AlgebraElement {
        self.phi_inv.apply(&self.expectation.apply(&x.mul(&y.adjoint())))
    }

    /// `_A(x|y)`, linear in `x`.
    pub fn left_inner(&self, x: &AMatrix, y: &AMatrix) -> AlgebraElement {
        self.normalization.mul(&self.raw_inner(x, y))
    }

    fn index_of(&self, frame: &[ModuleVector]) -> AlgebraElement {
        frame
            .iter()
            .fold(AlgebraElement::zero(self.base.shape()), |acc, u| acc.add(&self.left_inner(u.coords(), u.coords())))
    }

    /// `F(S) = r-Ind^{-1} Σ_i _A(S u_i|u_i)` for `S ∈ L_A(X)`.
    fn slice(&self, s: &AMatrix, ind_inv: &AlgebraElement) -> AlgebraElement {
        let sum = self
            .frame
            .iter()
            .fold(AlgebraElement::zero(self.base.shape()), |acc, u| acc.add(&self.left_inner(&s.mul(u.coords()), u.coords())));
        ind_inv.mul(&sum)
    }
}

pub fn finite_type_structure(base: &Bimodule, weights: Option<&[f64]>, tol: f64) -> Result<FiniteTypeStructure> {
    let shape = base.shape();
    let module = base.module();
    let fail = |m: String| Error::NotFiniteType(m);
    let expectation = mmalg::trace_expectation(base.phi_images(), module.projection(), weights, tol.max(1e-9))?;
    let phi_inv = PhiInverse::new(base);
    let frame = hmod::frame(module);
    let mut fts = FiniteTypeStructure {
        base: base.clone(),
        expectation,
        phi_inv,
        normalization: AlgebraElement::one(shape),
        frame,
        r_ind: AlgebraElement::zero(shape),
    };
    let span: Vec<AMatrix> = hmod::complex_spanning_set(module).into_iter().map(|v| v.coords().clone()).collect();

    // Solve φ(c)·Σ_j φ(_A⁰(x|u_j)) u_j = x for central c by least squares.
    let d = shape.num_blocks();
    let reconstruct = |f: &FiniteTypeStructure, x: &AMatrix| {
        f.frame.iter().fold(AMatrix::zeros(shape, module.k(), 1), |acc, u| {
            acc.add(&base.phi(&f.left_inner(x, u.coords())).mul(u.coords()))
        })
    };
    let mut cols: Vec<Vec<C64>> = vec![Vec::new(); d];
    let mut target: Vec<C64> = Vec::new();
    for x in &span {
        let l = reconstruct(&fts, x);
        for (i, col) in cols.iter_mut().enumerate() {
            let pi = base.phi(&AlgebraElement::central_projection(shape, i));
            col.extend(crate::freeness::flatten_vector(&pi.mul(&l)));
        }
        target.extend(crate::freeness::flatten_vector(x));
    }
    let n = target.len();
    let v = CMat::from_fn(n, d, |r, i| cols[i][r]);
    let t = CMat::from_column_slice(n, 1, &target);
    let normal = v.adjoint() * &v;
    let top = linalg::herm_eig(&normal).0.last().cloned().unwrap_or(0.0);
    if linalg::herm_eig(&normal).0.first().cloned().unwrap_or(0.0) <= 1e-12 * top.max(1.0) {
        return Err(fail("left frame reconstruction is degenerate on some block".into()));
    }
    let c = linalg::herm_fn(&normal, |x| 1.0 / x) * v.adjoint() * t;
    fts.normalization = AlgebraElement::central(shape, c.as_slice());
    let tol8 = tol.max(1e-8);
    for x in &span {
        let drift = reconstruct(&fts, x).sub(x).max_abs();
        if drift > tol8 * x.max_abs().max(1.0) {
            return Err(fail(format!("left frame reconstruction drift {drift:.3e}")));
        }
    }

    // Left Hilbert-module axioms on the spanning set and random vectors.
    let mut rng = random::rng(0xf17e);
    let mut probes = span.clone();
    for _ in 0..6 {
        let raw = random::matrix(&mut rng, shape, module.k(), 1);
        probes.push(module.project(&raw).coords().clone());
    }
    let units: Vec<AlgebraElement> = shape.matrix_units().iter().map(|&(i, r, s)| AlgebraElement::matrix_unit(shape, i, r, s)).collect();
    for x in &probes {
        let xx = fts.left_inner(x, x);
        let scale = xx.max_abs().max(1.0);
        if !xx.is_self_adjoint(tol8 * scale) || xx.min_eigenvalue() < -tol8 * scale {
            return Err(fail("_A(x|x) is not positive".into()));
        }
        for y in probes.iter().take(8) {
            let xy = fts.left_inner(x, y);
            if xy.adjoint().sub(&fts.left_inner(y, x)).max_abs() > tol8 * scale {
                return Err(fail("_A(x|y)* differs from _A(y|x)".into()));
            }
            for a in &units {
                let lhs = fts.left_inner(&base.phi(a).mul(x), y);
                if lhs.sub(&a.mul(&xy)).max_abs() > tol8 * scale {
                    return Err(fail("_A(φ(a)x|y) differs from a·_A(x|y)".into()));
                }
            }
        }
    }
    fts.r_ind = fts.index_of(&fts.frame);
    let scale = fts.r_ind.max_abs().max(1.0);
    if !fts.r_ind.is_central(tol8 * scale) {
        return Err(fail("r-Ind is not central".into()));
    }
    let other = fts.index_of(&hmod::rotated_frame(module, SECOND_FRAME_SEED));
    if other.sub(&fts.r_ind).max_abs() > tol8 * scale {
        return Err(fail("r-Ind depends on the frame".into()));
    }
    Ok(fts)
}

/// `E_r^{r+k}: L_A(X^{⊗(r+k)}) → L_A(X^{⊗r})`.
#[derive(Debug, Clone)]
pub struct ExpectationMap {
    base: Bimodule,
    r: usize,
    k: usize,
    slice: Option<(FiniteTypeStructure, AlgebraElement)>,
}

impl ExpectationMap {
    pub fn levels(&self) -> (usize, usize) {
        (self.r, self.k)
    }

    pub fn apply(&self, t: &GradedOperator) -> Result<GradedOperator> {
        let (p, q) = t.levels();
        if p != q || p != self.r + self.k {
            return Err(Error::DegreeMismatch(format!(
                "expected an operator on level {}, got {p} -> {q}",
                self.r + self.k
            )));
        }
        let Some((fts, ind_inv)) = &self.slice else {
            return Ok(t.clone());
        };
        let shape = self.base.shape();
        let outer = self.base.level(self.r).module().k();
        let inner = fts.base().k();
        let m = t.matrix();
        let out = AMatrix::from_entries(shape, outer, outer, |a, b| {
            let blocks = shape
                .block_sizes()
                .iter()
                .enumerate()
                .map(|(i, &n)| m.block(i).view((a * inner * n, b * inner * n), (inner * n, inner * n)).into_owned())
                .collect();
            let s = AMatrix::from_blocks(shape, inner, inner, blocks).expect("sub-block");
            fts.slice(&s, ind_inv)
        });
        GradedOperator::new(&self.base, self.r, self.r, &out)
    }
}

fn raw_map(base: &Bimodule, weights: &[f64], r: usize, k: usize, tol: f64) -> Result<ExpectationMap> {
    if k == 0 {
        return Ok(ExpectationMap { base: base.clone(), r, k, slice: None });
    }
    let fts = finite_type_structure(&base.power_bimodule(k), Some(weights), tol)?;
    let ind_inv = mmalg::psd_inv_sqrt(fts.r_ind(), tol)
        .map(|s| s.mul(&s))
        .map_err(|_| Error::SingularIndex(fts.r_ind().min_eigenvalue()))?;
    Ok(ExpectationMap { base: base.clone(), r, k, slice: Some((fts, ind_inv)) })
}

/// Builds `E_r^{r+k}` and checks it on seeded random inputs: unital, bimodular
/// over `L_A(X^{⊗r})`, positive, contractive, idempotent, and compatible with `E_r^{r+1}`.
pub fn expectation_chain(fts: &FiniteTypeStructure, r: usize, k: usize, tol: f64) -> Result<ExpectationMap> {
    let base = fts.base();
    let map = raw_map(base, fts.weights(), r, k, tol)?;
    if k == 0 {
        return Ok(map);
    }
    let fail = |m: &str| Error::NotFiniteType(format!("E_{r}^{}: {m}", r + k));
    let tol8 = tol.max(1e-8);
    let one = GradedOperator::identity(base, r + k);
    if map.apply(&one)?.distance(&GradedOperator::identity(base, r))? > tol8 {
        return Err(fail("not unital"));
    }
    let shape = base.shape();
    let mut rng = random::rng(0xc4a1 + (r * 31 + k) as u64);
    let lower = if k > 1 { Some(raw_map(base, fts.weights(), r, 1, tol)?) } else { None };
    let upper = if k > 1 { Some(raw_map(base, fts.weights(), r + 1, k - 1, tol)?) } else { None };
    for _ in 0..4 {
        let n = base.level(r + k).module().k();
        let t = GradedOperator::new(base, r + k, r + k, &random::matrix(&mut rng, shape, n, n))?;
        let nr = base.level(r).module().k();
        let s = GradedOperator::new(base, r, r, &random::matrix(&mut rng, shape, nr, nr))?;
        let et = map.apply(&t)?;
        let scale = t.norm().max(1.0);
        let sx = crate::bimod::right_extend_by(&s, k);
        let lhs = map.apply(&crate::bimod::graded_compose(&crate::bimod::graded_compose(&sx, &t), &sx.adjoint()))?;
        let rhs = crate::bimod::graded_compose(&crate::bimod::graded_compose(&s, &et), &s.adjoint());
        if lhs.distance(&rhs)? > tol8 * scale * s.norm().powi(2).max(1.0) {
            return Err(fail("not bimodular"));
        }
        let pos = map.apply(&crate::bimod::graded_compose(&t.adjoint(), &t))?;
        let min = pos.matrix().blocks().iter().map(|b| linalg::herm_eig(b).0.first().cloned().unwrap_or(0.0)).fold(0.0, f64::min);
        if min < -tol8 * scale * scale {
            return Err(fail("not positive"));
        }
        if et.norm() > t.norm() * (1.0 + tol8) {
            return Err(fail("not contractive"));
        }
        if map.apply(&crate::bimod::right_extend_by(&et, k))?.distance(&et)? > tol8 * scale {
            return Err(fail("not idempotent"));
        }
        if let (Some(lo), Some(up)) = (&lower, &upper) {
            let tower = lo.apply(&up.apply(&t)?)?;
            if tower.distance(&et)? > tol8 * scale {
                return Err(fail("tower compatibility fails"));
            }
        }
    }
    Ok(map)
}

/// The expectation of the Cuntz–Pimsner algebra onto `A` on a formal sum of
/// graded terms: nonzero degrees vanish, each `T ∈ L_A(X^{⊗r})` goes to `E_0^r(T)`.
pub fn coefficient_expectation(fts: &FiniteTypeStructure, terms: &[GradedOperator], tol: f64) -> Result<AlgebraElement> {
    let shape = fts.base().shape();
    let mut acc = AlgebraElement::zero(shape);
    for t in terms.iter().filter(|t| t.degree() == 0) {
        let r = t.levels().0;
        let map = if r == 0 { raw_map(fts.base(), fts.weights(), 0, 0, tol)? } else { raw_map(fts.base(), fts.weights(), 0, r, tol)? };
        acc = acc.add(&map.apply(t)?.matrix().entry(0, 0));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bimod::{graded_compose, right_extend};
    use crate::linalg::cr;

    fn two_vertex_inclusion() -> Inclusion {
        let a = AlgebraShape::scalars();
        let b = AlgebraShape::commutative(2);
        let mut e = CMat::zeros(1, 2);
        e[(0, 0)] = cr(0.5);
        e[(0, 1)] = cr(0.5);
        Inclusion::new(a, b.clone(), vec![AlgebraElement::one(&b)], e, 1e-9).unwrap()
    }

    #[test]
    fn two_point_inclusion() {
        let inc = two_vertex_inclusion();
        let pres = present_module(&inc, 1e-9).unwrap();
        assert_eq!(pres.bimodule().module().dim(), 2);
        let qb = quasi_basis(&pres, 1e-9).unwrap();
        assert!(qb.index.sub(&AlgebraElement::scalar(inc.b_shape(), cr(2.0))).max_abs() < 1e-9);
        let e = jones_projection(&pres, 1e-9).unwrap();
        assert!((linalg::trace(&e.matrix().block(0)).re - 1.0).abs() < 1e-9);
        assert!(jones_moved_vector(&pres, &e).unwrap().1 > 0.1);
        assert_eq!(inc.degenerate_ideal(1e-9).0, 0);
    }

    #[test]
    fn trivial_inclusion() {
        let shape = AlgebraShape::new(vec![1, 2]).unwrap();
        let inc = Inclusion::identity(&shape);
        let pres = present_module(&inc, 1e-9).unwrap();
        assert!(quasi_basis(&pres, 1e-9).unwrap().is_trivial(1e-9));
        let e = jones_projection(&pres, 1e-9).unwrap();
        assert!(e.matrix().sub(pres.bimodule().module().projection()).max_abs() < 1e-9);
    }

    #[test]
    fn group_algebras() {
        for n in 2..=4 {
            let inc = Inclusion::cyclic_group(n).unwrap();
            let pres = present_module(&inc, 1e-9).unwrap();
            let qb = quasi_basis(&pres, 1e-9).unwrap();
            assert!(qb.index.sub(&AlgebraElement::scalar(inc.b_shape(), cr(n as f64))).max_abs() < 1e-9);
            // φ acts by scalars since A = C.
            assert!(pres.bimodule().phi_images()[0].sub(pres.bimodule().module().projection()).max_abs() < 1e-12);
        }
    }

    #[test]
    fn bad_expectation_rejected() {
        let a = AlgebraShape::scalars();
        let b = AlgebraShape::commutative(2);
        let mut e = CMat::zeros(1, 2);
        e[(0, 0)] = cr(1.5);
        e[(0, 1)] = cr(-0.5);
        assert!(matches!(Inclusion::new(a.clone(), b.clone(), vec![AlgebraElement::one(&b)], e, 1e-9), Err(Error::NotExpectation(_))));
        let mut e = CMat::zeros(1, 2);
        e[(0, 0)] = cr(1.0);
        let inc = Inclusion::new(a, b.clone(), vec![AlgebraElement::one(&b)], e, 1e-9).unwrap();
        assert!(matches!(present_module(&inc, 1e-9), Err(Error::DegenerateExpectation(_))));
    }

    #[test]
    fn finite_type_examples() {
        let shape = AlgebraShape::new(vec![1, 2]).unwrap();
        let fts = finite_type_structure(&Bimodule::trivial(&shape), None, 1e-9).unwrap();
        assert!(fts.r_ind().sub(&AlgebraElement::one(&shape)).max_abs() < 1e-9);
        for n in 1..=3 {
            let fts = finite_type_structure(&Bimodule::cuntz(n), None, 1e-9).unwrap();
            assert!((fts.r_ind().block(0)[(0, 0)] - cr(n as f64)).norm() < 1e-9);
        }
        let inc = two_vertex_inclusion();
        let pres = present_module(&inc, 1e-9).unwrap();
        let fts = finite_type_structure(pres.bimodule(), None, 1e-9).unwrap();
        assert!((fts.r_ind().block(0)[(0, 0)] - cr(2.0)).norm() < 1e-8);
        let fts = finite_type_structure(&crate::bimod::tests::two_vertex(), None, 1e-9).unwrap();
        assert!(fts.r_ind().is_central(1e-8));
    }

    #[test]
    fn expectations_on_cuntz() {
        let b = Bimodule::cuntz(2);
        let fts = finite_type_structure(&b, None, 1e-9).unwrap();
        let e01 = expectation_chain(&fts, 0, 1, 1e-9).unwrap();
        let mut m = AMatrix::zeros(b.shape(), 2, 2);
        m.block_mut(0)[(0, 0)] = cr(1.0);
        m.block_mut(0)[(1, 0)] = cr(3.0);
        let t = GradedOperator::new(&b, 1, 1, &m).unwrap();
        assert!((e01.apply(&t).unwrap().matrix().block(0)[(0, 0)] - cr(0.5)).norm() < 1e-12);
        expectation_chain(&fts, 1, 2, 1e-9).unwrap();
        let id = expectation_chain(&fts, 2, 0, 1e-9).unwrap();
        assert_eq!(id.apply(&t.clone()).is_err(), true);
    }

    #[test]
    fn expectations_on_two_vertex() {
        let b = crate::bimod::tests::two_vertex();
        let fts = finite_type_structure(&b, None, 1e-9).unwrap();
        expectation_chain(&fts, 0, 1, 1e-9).unwrap();
        expectation_chain(&fts, 0, 2, 1e-9).unwrap();
        expectation_chain(&fts, 1, 1, 1e-9).unwrap();
    }

    #[test]
    fn coefficient_expectation_kills_degrees() {
        let b = Bimodule::cuntz(2);
        let fts = finite_type_structure(&b, None, 1e-9).unwrap();
        let a = GradedOperator::left_action(&b, 0, &AlgebraElement::scalar(b.shape(), cr(3.0)));
        let x = hmod::frame(b.module())[0].clone();
        let s = GradedOperator::creation(&b, 1, &x).unwrap();
        let ss = graded_compose(&s, &s.adjoint());
        let out = coefficient_expectation(&fts, &[a.clone(), s, ss.clone()], 1e-9).unwrap();
        assert!((out.block(0)[(0, 0)] - cr(3.5)).norm() < 1e-12);
        let wide = right_extend(&ss);
        let again = coefficient_expectation(&fts, &[wide], 1e-9).unwrap();
        assert!((again.block(0)[(0, 0)] - cr(0.5)).norm() < 1e-12);
    }
}
