//! The Fock space `⊕_{m ≤ N} X^{⊗m}` cut at level `N`, with creation
//! operators, the gauge action and degree bookkeeping.
//!
//! Creation operators kill the top level, so `T_x*T_y = (x|y)` holds exactly
//! below the cut and fails only on level `N`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bimod::{self, graded_compose, right_extend_by, Bimodule, GradedOperator};
use crate::error::{Error, Result};
use crate::freeness::Witness;
use crate::hmod::{self, ModuleVector};
use crate::linalg::{c, C64};
use crate::mmalg::{AMatrix, AlgebraElement};

/// Largest admissible `Σ_m dim_C X^{⊗m}`.
pub const DIMENSION_GUARD: usize = 20_000;

pub const DEFAULT_LEVEL: usize = 4;

#[derive(Debug, Clone)]
pub struct TruncatedFock {
    base: Bimodule,
    n: usize,
    /// Coordinate offset of each level; the last entry is the total.
    offsets: Vec<usize>,
}

impl TruncatedFock {
    pub fn new(base: &Bimodule, n: usize) -> Result<Self> {
        let mut dim = 0usize;
        let mut offsets = vec![0];
        for m in 0..=n {
            let level = base.level(m);
            dim = dim.saturating_add(level.module().dim());
            if dim > DIMENSION_GUARD {
                return Err(Error::DimensionGuard { dim, limit: DIMENSION_GUARD });
            }
            offsets.push(offsets[m] + level.module().k());
        }
        Ok(Self { base: base.clone(), n, offsets })
    }

    pub fn base(&self) -> &Bimodule {
        &self.base
    }

    pub fn top(&self) -> usize {
        self.n
    }

    /// `Σ_m dim_C X^{⊗m}`.
    pub fn dim(&self) -> usize {
        (0..=self.n).map(|m| self.base.level(m).module().dim()).sum()
    }

    fn coords(&self) -> usize {
        self.offsets[self.n + 1]
    }

    fn zero_matrix(&self) -> AMatrix {
        AMatrix::zeros(self.base.shape(), self.coords(), self.coords())
    }

    fn place(&self, target: &mut AMatrix, row_level: usize, col_level: usize, sub: &AMatrix) {
        for (i, &n) in self.base.shape().block_sizes().iter().enumerate() {
            let (r0, c0) = (self.offsets[row_level] * n, self.offsets[col_level] * n);
            target.block_mut(i).view_mut((r0, c0), (sub.rows() * n, sub.cols() * n)).copy_from(sub.block(i));
        }
    }

    fn extract(&self, m: &AMatrix, row_level: usize, col_level: usize) -> AMatrix {
        let rows = self.offsets[row_level + 1] - self.offsets[row_level];
        let cols = self.offsets[col_level + 1] - self.offsets[col_level];
        let blocks = self
            .base
            .shape()
            .block_sizes()
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                m.block(i)
                    .view((self.offsets[row_level] * n, self.offsets[col_level] * n), (rows * n, cols * n))
                    .into_owned()
            })
            .collect();
        AMatrix::from_blocks(self.base.shape(), rows, cols, blocks).expect("level block")
    }

    fn operator(&self, mat: AMatrix) -> FockOperator {
        FockOperator { fock: self.clone(), mat }
    }

    pub fn identity(&self) -> FockOperator {
        let mut mat = self.zero_matrix();
        for m in 0..=self.n {
            self.place(&mut mat, m, m, self.base.level(m).module().projection());
        }
        self.operator(mat)
    }

    /// Projection onto level `m`.
    pub fn level_projection(&self, m: usize) -> FockOperator {
        let mut mat = self.zero_matrix();
        self.place(&mut mat, m, m, self.base.level(m).module().projection());
        self.operator(mat)
    }

    /// `ρ(a)`: the left action on every level.
    pub fn left_action(&self, a: &AlgebraElement) -> FockOperator {
        let mut mat = self.zero_matrix();
        for m in 0..=self.n {
            self.place(&mut mat, m, m, &self.base.phi_at(m, a));
        }
        self.operator(mat)
    }

    /// A graded `T: X^{⊗p} → X^{⊗q}` acting as `T ⊗ 1` wherever both ends fit below the cut.
    pub fn represent(&self, t: &GradedOperator) -> FockOperator {
        let (p, q) = t.levels();
        let mut mat = self.zero_matrix();
        let mut m = 0;
        while p + m <= self.n && q + m <= self.n {
            self.place(&mut mat, q + m, p + m, right_extend_by(t, m).matrix());
            m += 1;
        }
        self.operator(mat)
    }
}

#[derive(Debug, Clone)]
pub struct FockOperator {
    fock: TruncatedFock,
    mat: AMatrix,
}

impl FockOperator {
    pub fn fock(&self) -> &TruncatedFock {
        &self.fock
    }

    pub fn matrix(&self) -> &AMatrix {
        &self.mat
    }

    /// The block from level `col` to level `row`.
    pub fn level_block(&self, row: usize, col: usize) -> AMatrix {
        self.fock.extract(&self.mat, row, col)
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn adjoint(&self) -> Self {
        self.fock.operator(self.mat.adjoint())
    }

    pub fn compose(&self, other: &Self) -> Self {
        self.fock.operator(self.mat.mul(&other.mat))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.fock.operator(self.mat.add(&other.mat))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.fock.operator(self.mat.sub(&other.mat))
    }

    pub fn scale(&self, z: C64) -> Self {
        self.fock.operator(self.mat.scale(z))
    }

    /// Degrees `row − col` carrying a block above `tol`.
    pub fn degree_support(&self, tol: f64) -> Vec<isize> {
        let n = self.fock.n;
        let mut out: Vec<isize> = Vec::new();
        for row in 0..=n {
            for col in 0..=n {
                let d = row as isize - col as isize;
                if !out.contains(&d) && self.level_block(row, col).max_abs() > tol {
                    out.push(d);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The homogeneous part of degree `d`.
    pub fn degree_part(&self, d: isize) -> Self {
        let f = &self.fock;
        let mut mat = f.zero_matrix();
        for col in 0..=f.n {
            let row = col as isize + d;
            if (0..=f.n as isize).contains(&row) {
                f.place(&mut mat, row as usize, col, &self.level_block(row as usize, col));
            }
        }
        f.operator(mat)
    }
}

/// `T_x`: level `m` to level `m + 1`, zero on level `N`.
pub fn creation(f: &TruncatedFock, x: &ModuleVector) -> Result<FockOperator> {
    Ok(f.represent(&GradedOperator::creation(&f.base, 1, x)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationResiduals {
    /// `‖(T_x*T_y − ρ((x|y)))·P_{<N}‖`.
    pub toeplitz_below_cut: f64,
    /// The same defect on level `N`, where truncation breaks it.
    pub toeplitz_top: f64,
    /// `‖Σ_i T_{u_i}T_{u_i}* − (1 − P_0)‖` over the frame.
    pub frame_residual: f64,
    /// `‖1 − Σ_i T_{u_i}T_{u_i}*‖`, carried by level 0.
    pub bottom_defect: f64,
    /// `max_a ‖ρ(a)T_x − Σ_i T_{u_i}ρ((u_i|φ(a)x))‖` over matrix units.
    pub cross_relation: f64,
}

pub fn relation_residuals(f: &TruncatedFock, x: &ModuleVector, y: &ModuleVector) -> Result<RelationResiduals> {
    let tx = creation(f, x)?;
    let ty = creation(f, y)?;
    let defect = tx.adjoint().compose(&ty).sub(&f.left_action(&hmod::inner(x, y)?));
    let top = f.level_projection(f.n);
    let below = f.identity().sub(&top);
    let frame = hmod::frame(f.base.module());
    let mut sum = f.identity().scale(c(0.0, 0.0));
    let creations: Vec<FockOperator> = frame.iter().map(|u| creation(f, u)).collect::<Result<_>>()?;
    for t in &creations {
        sum = sum.add(&t.compose(&t.adjoint()));
    }
    let one = f.identity();
    let frame_residual = sum.sub(&one.sub(&f.level_projection(0))).norm();
    let bottom_defect = one.sub(&sum).norm();
    let shape = f.base.shape();
    let mut cross: f64 = 0.0;
    for (i, r, s) in shape.matrix_units() {
        let a = AlgebraElement::matrix_unit(shape, i, r, s);
        let ax = f.base.module().project(&f.base.phi(&a).mul(x.coords()));
        let lhs = f.left_action(&a).compose(&tx);
        let mut rhs = f.identity().scale(c(0.0, 0.0));
        for (u, t) in frame.iter().zip(&creations) {
            rhs = rhs.add(&t.compose(&f.left_action(&hmod::inner(u, &ax)?)));
        }
        cross = cross.max(lhs.sub(&rhs).norm());
    }
    Ok(RelationResiduals {
        toeplitz_below_cut: defect.compose(&below).norm(),
        toeplitz_top: defect.compose(&top).norm(),
        frame_residual,
        bottom_defect,
        cross_relation: cross,
    })
}

/// `U(t)`, multiplication by `t^m` on level `m`, with `t = e^{iθ}`.
pub fn gauge(f: &TruncatedFock, angle: f64) -> FockOperator {
    let t = C64::from_polar(1.0, angle);
    let mut mat = f.zero_matrix();
    for m in 0..=f.n {
        let p = f.base.level(m).module().projection().scale(t.powu(m as u32));
        f.place(&mut mat, m, m, &p);
    }
    f.operator(mat)
}

/// `U(t) T U(t)*`.
pub fn gauge_conjugate(t: &FockOperator, angle: f64) -> FockOperator {
    let u = gauge(&t.fock, angle);
    u.compose(t).compose(&u.adjoint())
}

/// The average of `U(ω^j) T U(ω^j)*` over the `2·maxdeg + 1` roots of unity.
pub fn degree_average(t: &FockOperator, maxdeg: usize) -> Result<FockOperator> {
    let tol = 1e-12 * t.norm().max(1.0);
    if let Some(&d) = t.degree_support(tol).iter().find(|d| d.unsigned_abs() > maxdeg) {
        return Err(Error::DegreeOverflow { degree: d, limit: maxdeg });
    }
    let count = 2 * maxdeg + 1;
    let mut acc = t.scale(c(0.0, 0.0));
    for j in 0..count {
        let angle = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
        acc = acc.add(&gauge_conjugate(t, angle));
    }
    Ok(acc.scale(c(1.0 / count as f64, 0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeContraction {
    pub degree: isize,
    pub norm: f64,
    /// `‖σ^p(T*) B_j σ^p(T)‖`.
    pub conjugated_norm: f64,
    /// `‖T*σ^{|j|}(T)‖·‖B_j‖`, or `‖B_j‖` for `j = 0`.
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub level: usize,
    pub norm: f64,
    pub degree_zero_norm: f64,
    pub holds: bool,
    pub shift: Option<usize>,
    pub contractions: Vec<DegreeContraction>,
}

/// Assembles `B = Σ_j B_j` on `F_N`, compares `‖m₀(B)‖` with `‖B‖`, and with a
/// witness tracks `σ^p(T*) B_j σ^p(T)` degree by degree.
pub fn graded_inequality_check(
    f: &TruncatedFock,
    coefficients: &BTreeMap<isize, GradedOperator>,
    witness: Option<&Witness>,
    tol: f64,
) -> Result<InequalityReport> {
    let mut b = f.identity().scale(c(0.0, 0.0));
    let mut maxdeg = 0usize;
    for (&d, t) in coefficients {
        if t.degree() != d {
            return Err(Error::DegreeMismatch(format!("coefficient filed under degree {d} has degree {}", t.degree())));
        }
        maxdeg = maxdeg.max(d.unsigned_abs());
        b = b.add(&f.represent(t));
    }
    let norm = b.norm();
    let degree_zero_norm = degree_average(&b, maxdeg)?.norm();
    let holds = degree_zero_norm <= norm + tol;
    let mut contractions = Vec::new();
    let mut shift = None;
    if let Some(w) = witness {
        let t = &w.operator;
        let p = coefficients.values().map(|bj| bj.levels().0.max(bj.levels().1)).max().unwrap_or(0);
        shift = Some(p);
        let sp = bimod::sigma_power(t, p, tol)?;
        for (&d, bj) in coefficients {
            let conj = graded_compose(&graded_compose(&sp.adjoint(), bj), &sp);
            let n = bj.norm();
            let cn = conj.norm();
            let bound = if d == 0 {
                n
            } else {
                crate::freeness::overlap_norm(t, d.unsigned_abs(), tol)? * n
            };
            let within_bound = if d == 0 { (cn - n).abs() <= 1e-9 * n.max(1.0) } else { cn <= bound + 1e-6 };
            contractions.push(DegreeContraction { degree: d, norm: n, conjugated_norm: cn, bound, within_bound });
        }
    }
    Ok(InequalityReport { level: f.n, norm, degree_zero_norm, holds, shift, contractions })
}
