#![allow(dead_code)]

use std::path::PathBuf;

use cstar_bimod::bimod::{make_bimodule, Bimodule, GradedOperator};
use cstar_bimod::document::{self, Loaded};
use cstar_bimod::hmod::HilbertModule;
use cstar_bimod::ideal_graph;
use cstar_bimod::linalg::{c, CMat};
use cstar_bimod::mmalg::{AMatrix, AlgebraElement, AlgebraShape};
use cstar_bimod::random::{self, Rng64};
use rand::Rng;

pub fn fixture(name: &str) -> Loaded {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    document::validate(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn random_shape(rng: &mut Rng64, max_blocks: usize, max_size: usize) -> AlgebraShape {
    let d = rng.random_range(1..=max_blocks);
    AlgebraShape::new((0..d).map(|_| rng.random_range(1..=max_size)).collect()).unwrap()
}

/// `pA^k` with a random projection, nonzero on at least one block.
pub fn random_module(rng: &mut Rng64, shape: &AlgebraShape, max_k: usize) -> HilbertModule {
    let k = rng.random_range(1..=max_k);
    let mut ranks: Vec<usize> = shape.block_sizes().iter().map(|&n| rng.random_range(0..=k * n)).collect();
    if ranks.iter().all(|&r| r == 0) {
        ranks[0] = 1;
    }
    HilbertModule::new(random::projection(rng, shape, k, &ranks), 1e-9).unwrap()
}

/// `X = A ⊕ A` with `φ(a) = diag(a, u a u*)` for a random unitary `u ∈ A`.
pub fn twisted_bimodule(rng: &mut Rng64, shape: &AlgebraShape) -> Bimodule {
    let u = random::unitary(rng, shape, 1).entry(0, 0);
    let phi = shape
        .matrix_units()
        .iter()
        .map(|&(i, r, s)| {
            let e = AlgebraElement::matrix_unit(shape, i, r, s);
            let twisted = u.mul(&e).mul(&u.adjoint());
            AMatrix::from_entries(shape, 2, 2, |a, b| match (a, b) {
                (0, 0) => e.clone(),
                (1, 1) => twisted.clone(),
                _ => AlgebraElement::zero(shape),
            })
        })
        .collect();
    make_bimodule(HilbertModule::free(shape, 2), phi, 1e-9).unwrap()
}

/// Random multiplicities in `0..=max` with no zero row and no zero column.
pub fn random_multiplicities(rng: &mut Rng64, d: usize, max: usize) -> Vec<Vec<usize>> {
    loop {
        let m: Vec<Vec<usize>> = (0..d).map(|_| (0..d).map(|_| rng.random_range(0..=max)).collect()).collect();
        let rows = m.iter().all(|r| r.iter().any(|&x| x > 0));
        let cols = (0..d).all(|j| m.iter().any(|r| r[j] > 0));
        if rows && cols {
            return m;
        }
    }
}

pub fn random_multiplicity_bimodule(rng: &mut Rng64) -> (Vec<Vec<usize>>, Bimodule) {
    let shape = random_shape(rng, 3, 2);
    let m = random_multiplicities(rng, shape.num_blocks(), 2);
    let b = ideal_graph::multiplicity_bimodule(&shape, &m).unwrap();
    (m, b)
}

pub fn uniform(rng: &mut Rng64) -> f64 {
    rng.random_range(-1.0..1.0)
}

/// A random element of the relative commutant at level `r`.
pub fn random_commutant(rng: &mut Rng64, b: &Bimodule, r: usize) -> GradedOperator {
    let basis = cstar_bimod::bimod::relative_commutant(b, r);
    basis
        .iter()
        .fold(GradedOperator::zero(b, r, r), |acc, f| acc.add(&f.scale(c(uniform(rng), uniform(rng)))).unwrap())
}

/// A random operator from level `from` to level `to`.
pub fn random_graded(rng: &mut Rng64, b: &Bimodule, from: usize, to: usize) -> GradedOperator {
    let rows = b.level(to).module().k();
    let cols = b.level(from).module().k();
    GradedOperator::new(b, from, to, &random::matrix(rng, b.shape(), rows, cols)).unwrap()
}

/// `Σ_i x_i y_i*` blockwise, as plain complex matrices.
pub fn flattened_theta_sum(xs: &[AMatrix], ys: &[AMatrix]) -> Vec<CMat> {
    let d = xs[0].shape().num_blocks();
    (0..d)
        .map(|i| {
            xs.iter()
                .zip(ys)
                .map(|(x, y)| x.block(i) * y.block(i).adjoint())
                .reduce(|a, b| a + b)
                .unwrap()
        })
        .collect()
}

pub fn largest_singular_value(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}
