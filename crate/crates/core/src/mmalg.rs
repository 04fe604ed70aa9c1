//! Multi-matrix C*-algebras `M_{n_1}(C) ⊕ … ⊕ M_{n_d}(C)`.
//!
//! An element is stored as one dense complex matrix per central block. A
//! matrix over the algebra (`AMatrix`, possibly rectangular) is stored the same
//! way: block `i` of an `r × c` matrix is the `(r·n_i) × (c·n_i)` complex matrix
//! whose row index is `(row, inner)` with the outer row most significant. This
//! is the *-isomorphism `M_{r×c}(A) ≅ ⊕_i M_{r n_i × c n_i}(C)`, so norms,
//! products and adjoints are all computed blockwise.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, C64};
use crate::wire::{mat_to_wire, wire_to_mat, WireBlocks};

/// Default spectral tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlgebraShape {
    block_sizes: Vec<usize>,
}

impl AlgebraShape {
    pub fn new(block_sizes: Vec<usize>) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::ShapeMismatch("an algebra needs at least one block".into()));
        }
        if let Some(i) = block_sizes.iter().position(|&n| n == 0) {
            return Err(Error::ShapeMismatch(format!("block {i} has size 0")));
        }
        Ok(Self { block_sizes })
    }

    /// `C^d`, the commutative algebra with `d` one-dimensional blocks.
    pub fn commutative(d: usize) -> Self {
        Self::new(vec![1; d]).expect("d >= 1")
    }

    pub fn scalars() -> Self {
        Self::commutative(1)
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.block_sizes[i]
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Complex dimension `Σ n_i²`.
    pub fn dim(&self) -> usize {
        self.block_sizes.iter().map(|n| n * n).sum()
    }

    /// Matrix units `e^{(i)}_{rs}` in block-major, row-major order.
    pub fn matrix_units(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.dim());
        for (i, &n) in self.block_sizes.iter().enumerate() {
            for r in 0..n {
                for s in 0..n {
                    out.push((i, r, s));
                }
            }
        }
        out
    }
}

impl fmt::Display for AlgebraShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .block_sizes
            .iter()
            .map(|&n| if n == 1 { "C".to_string() } else { format!("M{n}") })
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    shape: AlgebraShape,
    blocks: Vec<CMat>,
}

impl AlgebraElement {
    pub fn from_blocks(shape: &AlgebraShape, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != shape.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for shape {shape}",
                blocks.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            let n = shape.block_size(i);
            if b.shape() != (n, n) {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} is {:?}, expected {n}x{n}",
                    b.shape()
                )));
            }
        }
        Ok(Self { shape: shape.clone(), blocks })
    }

    pub fn zero(shape: &AlgebraShape) -> Self {
        let blocks = shape.block_sizes().iter().map(|&n| CMat::zeros(n, n)).collect();
        Self { shape: shape.clone(), blocks }
    }

    pub fn one(shape: &AlgebraShape) -> Self {
        let blocks = shape.block_sizes().iter().map(|&n| linalg::eye(n)).collect();
        Self { shape: shape.clone(), blocks }
    }

    pub fn scalar(shape: &AlgebraShape, z: C64) -> Self {
        Self::one(shape).scale(z)
    }

    /// The minimal central projection `p_i`.
    pub fn central_projection(shape: &AlgebraShape, i: usize) -> Self {
        let mut e = Self::zero(shape);
        e.blocks[i] = linalg::eye(shape.block_size(i));
        e
    }

    pub fn matrix_unit(shape: &AlgebraShape, i: usize, r: usize, s: usize) -> Self {
        let mut e = Self::zero(shape);
        e.blocks[i][(r, s)] = cr(1.0);
        e
    }

    /// Element with the given per-block scalars `Σ λ_i p_i`.
    pub fn central(shape: &AlgebraShape, values: &[C64]) -> Self {
        let blocks = shape
            .block_sizes()
            .iter()
            .zip(values)
            .map(|(&n, &z)| linalg::eye(n) * z)
            .collect();
        Self { shape: shape.clone(), blocks }
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut CMat {
        &mut self.blocks[i]
    }

    pub fn adjoint(&self) -> Self {
        self.map(|b| b.adjoint())
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self { shape: self.shape.clone(), blocks: self.blocks.iter().map(f).collect() }
    }

    fn zip(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        assert_eq!(self.shape, other.shape, "algebra shape mismatch");
        Self {
            shape: self.shape.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, z: C64) -> Self {
        self.map(|b| b * z)
    }

    /// Operator norm: the largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(linalg::spectral_norm).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| linalg::is_hermitian(b, tol))
    }

    /// True when every block is a multiple of the identity.
    pub fn is_central(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| {
            let n = b.nrows();
            let mean = linalg::trace(b) / cr(n as f64);
            linalg::max_abs(&(b - linalg::eye(n) * mean)) <= tol
        })
    }

    /// Smallest eigenvalue of a self-adjoint element.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| linalg::herm_eig(b).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-block scalar value of a central element (block trace / size).
    pub fn central_values(&self) -> Vec<C64> {
        self.blocks.iter().map(|b| linalg::trace(b) / cr(b.nrows() as f64)).collect()
    }

    /// Weighted trace `Σ_i w_i tr(a_i)`.
    pub fn weighted_trace(&self, weights: &[f64]) -> C64 {
        self.blocks.iter().zip(weights).map(|(b, &w)| linalg::trace(b) * w).sum()
    }

    pub fn to_wire(&self) -> WireBlocks {
        WireBlocks { blocks: self.blocks.iter().map(mat_to_wire).collect() }
    }

    pub fn from_wire(shape: &AlgebraShape, w: &WireBlocks, path: &str) -> Result<Self> {
        if w.blocks.len() != shape.num_blocks() {
            return Err(Error::Schema {
                path: format!("{path}.blocks"),
                message: format!("expected {} blocks, got {}", shape.num_blocks(), w.blocks.len()),
            });
        }
        let blocks = w
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let n = shape.block_size(i);
                wire_to_mat(b, Some((n, n)), &format!("{path}.blocks[{i}]"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_blocks(shape, blocks)
    }
}

/// Operator norm of an algebra element.
pub fn norm(a: &AlgebraElement) -> f64 {
    a.norm()
}

fn check_self_adjoint_blocks(blocks: &[CMat], tol: f64) -> Result<()> {
    for b in blocks {
        let dev = linalg::max_abs(&(b - b.adjoint()));
        let scale = linalg::max_abs(b).max(1.0);
        if dev > tol * scale {
            return Err(Error::NotSelfAdjoint(dev));
        }
    }
    Ok(())
}

fn psd_sqrt_blocks(blocks: &[CMat], tol: f64) -> Result<Vec<CMat>> {
    check_self_adjoint_blocks(blocks, tol)?;
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (vals, _) = linalg::herm_eig(b);
        if let Some(&lo) = vals.first() {
            if lo < -tol {
                return Err(Error::NotPositive(lo));
            }
        }
        out.push(linalg::herm_fn(b, |x| x.max(0.0).sqrt()));
    }
    Ok(out)
}

fn psd_inv_sqrt_blocks(blocks: &[CMat], tol: f64) -> Result<Vec<CMat>> {
    check_self_adjoint_blocks(blocks, tol)?;
    let mut out = Vec::with_capacity(blocks.len());
    for b in blocks {
        let (vals, _) = linalg::herm_eig(b);
        if let Some(&lo) = vals.first() {
            if lo < tol {
                return Err(Error::NotInvertible(lo));
            }
        }
        out.push(linalg::herm_fn(b, |x| 1.0 / x.sqrt()));
    }
    Ok(out)
}

/// Positive square root. Eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn psd_sqrt(a: &AlgebraElement, tol: f64) -> Result<AlgebraElement> {
    let blocks = psd_sqrt_blocks(&a.blocks, tol)?;
    Ok(AlgebraElement { shape: a.shape.clone(), blocks })
}

/// Inverse square root of a strictly positive element (`a ≥ tol·1`).
pub fn psd_inv_sqrt(a: &AlgebraElement, tol: f64) -> Result<AlgebraElement> {
    let blocks = psd_inv_sqrt_blocks(&a.blocks, tol)?;
    Ok(AlgebraElement { shape: a.shape.clone(), blocks })
}

/// A (possibly rectangular) matrix with entries in the algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AMatrix {
    shape: AlgebraShape,
    rows: usize,
    cols: usize,
    blocks: Vec<CMat>,
}

/// Square matrices over the algebra; the spec-level name.
pub type MatrixOverA = AMatrix;

impl AMatrix {
    pub fn zeros(shape: &AlgebraShape, rows: usize, cols: usize) -> Self {
        let blocks = shape
            .block_sizes()
            .iter()
            .map(|&n| CMat::zeros(rows * n, cols * n))
            .collect();
        Self { shape: shape.clone(), rows, cols, blocks }
    }

    pub fn identity(shape: &AlgebraShape, n: usize) -> Self {
        let blocks = shape.block_sizes().iter().map(|&b| linalg::eye(n * b)).collect();
        Self { shape: shape.clone(), rows: n, cols: n, blocks }
    }

    pub fn from_blocks(shape: &AlgebraShape, rows: usize, cols: usize, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != shape.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for shape {shape}",
                blocks.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            let n = shape.block_size(i);
            if b.shape() != (rows * n, cols * n) {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} is {:?}, expected {}x{}",
                    b.shape(),
                    rows * n,
                    cols * n
                )));
            }
        }
        Ok(Self { shape: shape.clone(), rows, cols, blocks })
    }

    /// Builds a matrix entry by entry.
    pub fn from_entries(
        shape: &AlgebraShape,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> AlgebraElement,
    ) -> Self {
        let mut m = Self::zeros(shape, rows, cols);
        for a in 0..rows {
            for b in 0..cols {
                m.set_entry(a, b, &f(a, b));
            }
        }
        m
    }

    /// 1×1 matrix holding `a`.
    pub fn from_element(a: &AlgebraElement) -> Self {
        Self { shape: a.shape.clone(), rows: 1, cols: 1, blocks: a.blocks.clone() }
    }

    /// Column vector from entries.
    pub fn column(entries: &[AlgebraElement]) -> Self {
        let shape = entries[0].shape().clone();
        Self::from_entries(&shape, entries.len(), 1, |a, _| entries[a].clone())
    }

    pub fn shape(&self) -> &AlgebraShape {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut CMat {
        &mut self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn entry(&self, a: usize, b: usize) -> AlgebraElement {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let n = self.shape.block_size(i);
                m.view((a * n, b * n), (n, n)).into_owned()
            })
            .collect();
        AlgebraElement { shape: self.shape.clone(), blocks }
    }

    pub fn set_entry(&mut self, a: usize, b: usize, v: &AlgebraElement) {
        for (i, m) in self.blocks.iter_mut().enumerate() {
            let n = self.shape.block_size(i);
            m.view_mut((a * n, b * n), (n, n)).copy_from(&v.blocks[i]);
        }
    }

    /// The `rows × cols` complex matrix of `(row, col)` entries at inner
    /// position `(r, s)` of block `i`.
    pub fn slice_at(&self, i: usize, r: usize, s: usize) -> CMat {
        let n = self.shape.block_size(i);
        let m = &self.blocks[i];
        CMat::from_fn(self.rows, self.cols, |a, b| m[(a * n + r, b * n + s)])
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            rows: self.cols,
            cols: self.rows,
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        let blocks: Vec<CMat> = self.blocks.iter().map(f).collect();
        let n0 = self.shape.block_size(0);
        Self {
            shape: self.shape.clone(),
            rows: blocks[0].nrows() / n0,
            cols: blocks[0].ncols() / n0,
            blocks,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.shape, other.shape, "algebra shape mismatch");
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        Self {
            shape: self.shape.clone(),
            rows: self.rows,
            cols: other.cols,
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "size mismatch");
        Self {
            shape: self.shape.clone(),
            rows: self.rows,
            cols: self.cols,
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(cr(-1.0)))
    }

    pub fn scale(&self, z: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            rows: self.rows,
            cols: self.cols,
            blocks: self.blocks.iter().map(|b| b * z).collect(),
        }
    }

    /// Multiplies every entry on the right by the algebra element `a`.
    pub fn right_mul_element(&self, a: &AlgebraElement) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, m)| m * linalg::kron(&linalg::eye(self.cols), &a.blocks[i]))
            .collect();
        Self { shape: self.shape.clone(), rows: self.rows, cols: self.cols, blocks }
    }

    /// Multiplies every entry on the left by the algebra element `a`.
    pub fn left_mul_element(&self, a: &AlgebraElement) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, m)| linalg::kron(&linalg::eye(self.rows), &a.blocks[i]) * m)
            .collect();
        Self { shape: self.shape.clone(), rows: self.rows, cols: self.cols, blocks }
    }

    /// `I_k ⊗ self` (block diagonal with `k` copies).
    pub fn identity_kron(&self, k: usize) -> Self {
        Self {
            shape: self.shape.clone(),
            rows: self.rows * k,
            cols: self.cols * k,
            blocks: self.blocks.iter().map(|b| linalg::kron(&linalg::eye(k), b)).collect(),
        }
    }

    /// Operator norm in `M_{r×c}(A)`.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks.iter().map(linalg::spectral_norm).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.rows == self.cols && self.blocks.iter().all(|b| linalg::is_hermitian(b, tol))
    }

    /// Deviation from being a projection: `max(‖p − p*‖, ‖p² − p‖)`.
    pub fn projection_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let adj = self.sub(&self.adjoint()).max_abs();
        let sq = self.mul(self).sub(self).max_abs();
        adj.max(sq)
    }

    /// Trace over the matrix index: `Σ_a m_{aa} ∈ A`.
    pub fn partial_trace(&self) -> AlgebraElement {
        let mut acc = AlgebraElement::zero(&self.shape);
        for a in 0..self.rows.min(self.cols) {
            acc = acc.add(&self.entry(a, a));
        }
        acc
    }

    /// The flattened complex matrix `⊕_i M_{r n_i × c n_i}` laid out block-diagonally.
    pub fn flatten(&self) -> CMat {
        let r: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let c: usize = self.blocks.iter().map(|b| b.ncols()).sum();
        let mut out = CMat::zeros(r, c);
        let (mut ro, mut co) = (0, 0);
        for b in &self.blocks {
            out.view_mut((ro, co), b.shape()).copy_from(b);
            ro += b.nrows();
            co += b.ncols();
        }
        out
    }

    pub fn to_wire(&self) -> WireBlocks {
        WireBlocks { blocks: self.blocks.iter().map(mat_to_wire).collect() }
    }

    pub fn from_wire(shape: &AlgebraShape, rows: usize, cols: usize, w: &WireBlocks, path: &str) -> Result<Self> {
        if w.blocks.len() != shape.num_blocks() {
            return Err(Error::Schema {
                path: format!("{path}.blocks"),
                message: format!("expected {} blocks, got {}", shape.num_blocks(), w.blocks.len()),
            });
        }
        let blocks = w
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let n = shape.block_size(i);
                wire_to_mat(b, Some((rows * n, cols * n)), &format!("{path}.blocks[{i}]"))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_blocks(shape, rows, cols, blocks)
    }
}

/// Operator norm of a matrix over the algebra.
pub fn matrix_norm(m: &AMatrix) -> f64 {
    m.norm()
}

/// Positive square root of a self-adjoint matrix over the algebra.
pub fn psd_sqrt_matrix(m: &AMatrix, tol: f64) -> Result<AMatrix> {
    let blocks = psd_sqrt_blocks(&m.blocks, tol)?;
    AMatrix::from_blocks(&m.shape, m.rows, m.cols, blocks)
}

pub fn psd_inv_sqrt_matrix(m: &AMatrix, tol: f64) -> Result<AMatrix> {
    let blocks = psd_inv_sqrt_blocks(&m.blocks, tol)?;
    AMatrix::from_blocks(&m.shape, m.rows, m.cols, blocks)
}

/// Moore–Penrose style inverse square root on the support: eigenvalues at or
/// below `cutoff` are sent to zero.
pub fn support_inv_sqrt_matrix(m: &AMatrix, cutoff: f64) -> AMatrix {
    m.map(|b| linalg::herm_fn(b, |x| if x > cutoff { 1.0 / x.sqrt() } else { 0.0 }))
}

/// Support projection of a positive matrix (eigenvalues above `cutoff`).
pub fn support_projection(m: &AMatrix, cutoff: f64) -> AMatrix {
    m.map(|b| linalg::herm_fn(b, |x| if x > cutoff { 1.0 } else { 0.0 }))
}

/// A closed two-sided ideal: the span of the selected central blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IdealMask {
    selected: Vec<bool>,
}

impl IdealMask {
    pub fn new(selected: Vec<bool>) -> Self {
        Self { selected }
    }

    pub fn empty(d: usize) -> Self {
        Self { selected: vec![false; d] }
    }

    pub fn full(d: usize) -> Self {
        Self { selected: vec![true; d] }
    }

    /// From zero-based block indices.
    pub fn from_indices(d: usize, idx: &[usize]) -> Self {
        let mut selected = vec![false; d];
        for &i in idx {
            selected[i] = true;
        }
        Self { selected }
    }

    /// The `bits`-th mask in binary enumeration (bit `i` selects block `i`).
    pub fn from_bits(d: usize, bits: u32) -> Self {
        Self { selected: (0..d).map(|i| bits >> i & 1 == 1).collect() }
    }

    pub fn num_blocks(&self) -> usize {
        self.selected.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.selected[i]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.selected.len()).filter(|&i| self.selected[i]).collect()
    }

    pub fn complement_indices(&self) -> Vec<usize> {
        (0..self.selected.len()).filter(|&i| !self.selected[i]).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.selected.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.selected.iter().all(|&b| b)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.selected.iter().zip(&other.selected).all(|(&a, &b)| !a || b)
    }

    pub fn len(&self) -> usize {
        self.selected.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    /// One-based indices, the convention used in reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.indices().into_iter().map(|i| i + 1).collect()
    }

    /// Whether `a` lies in the ideal (all blocks outside vanish).
    pub fn contains_element(&self, a: &AlgebraElement, tol: f64) -> bool {
        self.complement_indices()
            .iter()
            .all(|&i| linalg::max_abs(a.block(i)) <= tol)
    }
}

impl fmt::Display for IdealMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl Serialize for IdealMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

/// Blockwise projection onto `A/J`: keeps the blocks outside `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientMap {
    source: AlgebraShape,
    target: AlgebraShape,
    kept: Vec<usize>,
}

impl QuotientMap {
    pub fn source(&self) -> &AlgebraShape {
        &self.source
    }

    pub fn target(&self) -> &AlgebraShape {
        &self.target
    }

    /// Source block index of each target block.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        let blocks = self.kept.iter().map(|&i| a.block(i).clone()).collect();
        AlgebraElement { shape: self.target.clone(), blocks }
    }

    pub fn apply_matrix(&self, m: &AMatrix) -> AMatrix {
        let blocks = self.kept.iter().map(|&i| m.block(i).clone()).collect();
        AMatrix { shape: self.target.clone(), rows: m.rows, cols: m.cols, blocks }
    }
}

/// `A/J` for an ideal given by a block mask.
pub fn quotient(shape: &AlgebraShape, j: &IdealMask) -> Result<(AlgebraShape, QuotientMap)> {
    if j.num_blocks() != shape.num_blocks() {
        return Err(Error::ShapeMismatch("mask length differs from block count".into()));
    }
    if j.is_full() {
        return Err(Error::FullIdeal);
    }
    let kept = j.complement_indices();
    let target = AlgebraShape::new(kept.iter().map(|&i| shape.block_size(i)).collect())?;
    Ok((target.clone(), QuotientMap { source: shape.clone(), target, kept }))
}

/// The weighted-trace-preserving conditional expectation onto a unital
/// *-subalgebra of a corner `q M_N(A) q`, realized as the orthogonal
/// projection for `⟨x, y⟩ = Σ_i w_i tr((x* y)_i)`.
#[derive(Debug, Clone)]
pub struct TraceExpectation {
    weights: Vec<f64>,
    basis: Vec<AMatrix>,
}

impl TraceExpectation {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Orthonormal basis of the subalgebra.
    pub fn basis(&self) -> &[AMatrix] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn inner(&self, x: &AMatrix, y: &AMatrix) -> C64 {
        x.blocks
            .iter()
            .zip(&y.blocks)
            .zip(&self.weights)
            .map(|((a, b), &w)| linalg::hs_inner(a, b) * w)
            .sum()
    }

    /// Coefficients of `E(x)` in the orthonormal basis.
    pub fn coefficients(&self, x: &AMatrix) -> Vec<C64> {
        self.basis.iter().map(|f| self.inner(f, x)).collect()
    }

    pub fn apply(&self, x: &AMatrix) -> AMatrix {
        let mut acc = AMatrix::zeros(x.shape(), x.rows(), x.cols());
        for (f, z) in self.basis.iter().zip(self.coefficients(x)) {
            acc = acc.add(&f.scale(z));
        }
        acc
    }
}

/// Builds the trace-preserving expectation onto the span of `spanning`,
/// inside the corner cut down by `corner`.
pub fn trace_expectation(
    spanning: &[AMatrix],
    corner: &AMatrix,
    weights: Option<&[f64]>,
    tol: f64,
) -> Result<TraceExpectation> {
    let shape = corner.shape().clone();
    let d = shape.num_blocks();
    let weights: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != d || w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::BadWeights);
            }
            w.to_vec()
        }
        None => vec![1.0; d],
    };
    let n = corner.rows();
    for s in spanning {
        if s.rows() != n || s.cols() != n || s.shape() != &shape {
            return Err(Error::ShapeMismatch("spanning element does not fit the corner".into()));
        }
    }
    // Orthonormalize the spanning set under the weighted trace.
    let pre = TraceExpectation { weights: weights.clone(), basis: Vec::new() };
    let m = spanning.len();
    let mut gram = CMat::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            gram[(a, b)] = pre.inner(&spanning[a], &spanning[b]);
        }
    }
    let (vals, vecs) = linalg::herm_eig(&gram);
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let mut basis = Vec::new();
    for (col, &v) in vals.iter().enumerate() {
        if v <= tol * top.max(1.0) {
            continue;
        }
        let mut acc = AMatrix::zeros(&shape, n, n);
        for a in 0..m {
            acc = acc.add(&spanning[a].scale(vecs[(a, col)] / cr(v.sqrt())));
        }
        basis.push(acc);
    }
    let e = TraceExpectation { weights, basis };

    // Closure checks: the corner unit, adjoints and products stay in the span.
    let mut defect: f64 = 0.0;
    let residual = |x: &AMatrix| x.sub(&e.apply(x)).max_abs();
    defect = defect.max(residual(corner));
    for f in &e.basis {
        defect = defect.max(corner.mul(f).mul(corner).sub(f).max_abs());
        defect = defect.max(residual(&f.adjoint()));
        for g in &e.basis {
            defect = defect.max(residual(&f.mul(g)));
        }
    }
    if defect > tol.max(1e-9) * 10.0 {
        return Err(Error::NotSubalgebra(defect));
    }
    Ok(e)
}
