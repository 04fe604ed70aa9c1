//! Seeded generators for test data and the CLI's `--seed`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, c, CMat};
use crate::mmalg::{AMatrix, AlgebraElement, AlgebraShape};

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in the unit square `[-1,1] + i[-1,1]`.
pub fn complex_matrix(rng: &mut Rng64, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn element(rng: &mut Rng64, shape: &AlgebraShape) -> AlgebraElement {
    let blocks = shape.block_sizes().iter().map(|&n| complex_matrix(rng, n, n)).collect();
    AlgebraElement::from_blocks(shape, blocks).expect("conforming blocks")
}

pub fn matrix(rng: &mut Rng64, shape: &AlgebraShape, rows: usize, cols: usize) -> AMatrix {
    let blocks = shape
        .block_sizes()
        .iter()
        .map(|&n| complex_matrix(rng, rows * n, cols * n))
        .collect();
    AMatrix::from_blocks(shape, rows, cols, blocks).expect("conforming blocks")
}

/// Unitary from the QR factorization of a random matrix.
pub fn unitary_mat(rng: &mut Rng64, n: usize) -> CMat {
    complex_matrix(rng, n, n).qr().q()
}

/// Random unitary in `M_n(A)`.
pub fn unitary(rng: &mut Rng64, shape: &AlgebraShape, n: usize) -> AMatrix {
    let blocks = shape.block_sizes().iter().map(|&b| unitary_mat(rng, n * b)).collect();
    AMatrix::from_blocks(shape, n, n, blocks).expect("conforming blocks")
}

/// Random projection in `M_k(A)` whose block `i` has rank `ranks[i]`.
pub fn projection(rng: &mut Rng64, shape: &AlgebraShape, k: usize, ranks: &[usize]) -> AMatrix {
    let blocks = shape
        .block_sizes()
        .iter()
        .zip(ranks)
        .map(|(&n, &r)| {
            let u = unitary_mat(rng, k * n);
            let v = u.columns(0, r.min(k * n)).into_owned();
            &v * v.adjoint()
        })
        .collect();
    AMatrix::from_blocks(shape, k, k, blocks).expect("conforming blocks")
}

/// Random positive element `a*a`.
pub fn positive(rng: &mut Rng64, shape: &AlgebraShape) -> AlgebraElement {
    let a = element(rng, shape);
    a.adjoint().mul(&a)
}

pub fn hermitian_mat(rng: &mut Rng64, n: usize) -> CMat {
    linalg::hermitian_part(&complex_matrix(rng, n, n))
}
