mod common;

use common::*;
use cstar_bimod::bimod::{self, right_extend, sigma_shift, tensor_power, Bimodule};
use cstar_bimod::document;
use cstar_bimod::fock::TruncatedFock;
use cstar_bimod::freeness::{self, ConjugateDatum};
use cstar_bimod::hmod::{self, HilbertModule, ModuleVector};
use cstar_bimod::ideal_graph;
use cstar_bimod::index_theory::{self, Inclusion};
use cstar_bimod::linalg::{cr, herm_eig, CMat};
use cstar_bimod::mmalg::{self, AMatrix, AlgebraElement, AlgebraShape, IdealMask};
use cstar_bimod::random::{self, Rng64};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-9;

fn rng_from(seed: u64) -> Rng64 {
    random::rng(seed)
}

fn random_vector(rng: &mut Rng64, module: &HilbertModule) -> ModuleVector {
    module.project(&random::matrix(rng, module.shape(), module.k(), 1))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn min_eig(a: &AlgebraElement) -> f64 {
    a.blocks().iter().flat_map(|b| herm_eig(b).0).fold(f64::INFINITY, f64::min)
}

fn mat_power(m: &[Vec<usize>], r: usize) -> Vec<Vec<usize>> {
    let d = m.len();
    let mut out: Vec<Vec<usize>> = (0..d).map(|i| (0..d).map(|j| usize::from(i == j)).collect()).collect();
    for _ in 0..r {
        out = (0..d).map(|i| (0..d).map(|j| (0..d).map(|l| out[i][l] * m[l][j]).sum()).collect()).collect();
    }
    out
}

/// `A = C^m ⊆ B = C^n`, each point of `B` assigned to one point of `A`.
fn partition_inclusion(rng: &mut Rng64, m: usize, n: usize) -> Inclusion {
    let mut owner: Vec<usize> = (0..n).map(|j| if j < m { j } else { rng.random_range(0..m) }).collect();
    for j in (1..n).rev() {
        owner.swap(j, rng.random_range(0..=j));
    }
    let b = AlgebraShape::commutative(n);
    let embed = (0..m)
        .map(|a| AlgebraElement::from_blocks(&b, owner.iter().map(|&o| CMat::from_element(1, 1, cr(f64::from(u8::from(o == a))))).collect()).unwrap())
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    Inclusion::with_trace(AlgebraShape::commutative(m), b, embed, Some(&weights), TOL).unwrap()
}

/// `R = Σ e_a ⊗ O e_a` over `C^n` for a real orthogonal `O` with `O² = sign`.
fn conjugate_datum(rng: &mut Rng64, n: usize, sign: i8) -> ConjugateDatum {
    let g = nalgebra::DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let mut core = nalgebra::DMatrix::<f64>::zeros(n, n);
    if sign == 1 {
        for i in 0..n {
            core[(i, i)] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
    } else {
        for i in (0..n).step_by(2) {
            core[(i, i + 1)] = 1.0;
            core[(i + 1, i)] = -1.0;
        }
    }
    let o = &q * core * q.transpose();
    let b = Bimodule::cuntz(n);
    let mut r = AMatrix::zeros(b.shape(), n * n, 1);
    for a in 0..n {
        for c in 0..n {
            r.block_mut(0)[(a * n + c, 0)] = cr(o[(c, a)]);
        }
    }
    ConjugateDatum::new(&b, &r, sign, 1e-8).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn c_star_identity(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 3, 3);
        let a = random::element(&mut rng, &shape);
        let n = a.norm();
        prop_assert!(close(a.adjoint().mul(&a).norm(), n * n, 1e-10));
        let k = rng.random_range(1..=3);
        let m = random::matrix(&mut rng, &shape, k, k);
        let nm = m.norm();
        prop_assert!(close(m.adjoint().mul(&m).norm(), nm * nm, 1e-10));
    }

    #[test]
    fn matrix_norm_is_unitarily_invariant(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 3, 2);
        let k = rng.random_range(1..=3);
        let m = random::matrix(&mut rng, &shape, k, k);
        let u = random::unitary(&mut rng, &shape, k);
        let v = random::unitary(&mut rng, &shape, k);
        prop_assert!(close(u.mul(&m).mul(&v).norm(), m.norm(), 1e-10));
        prop_assert!(close(mmalg::matrix_norm(&m), m.norm(), 1e-10));
    }

    #[test]
    fn quotient_norm_is_the_largest_surviving_block(seed: u64, bits: u32) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 4, 3);
        let d = shape.num_blocks();
        let j = IdealMask::from_bits(d, bits % ((1 << d) - 1));
        let (target, q) = mmalg::quotient(&shape, &j).unwrap();
        prop_assert_eq!(target.num_blocks(), d - j.len());
        let a = random::element(&mut rng, &shape);
        let expected = j.complement_indices().iter().map(|&i| a.block_norms()[i]).fold(0.0, f64::max);
        prop_assert!(close(q.apply(&a).norm(), expected, 1e-12));
        let b = random::element(&mut rng, &shape);
        prop_assert!(q.apply(&a.mul(&b)).sub(&q.apply(&a).mul(&q.apply(&b))).max_abs() < 1e-12);
    }

    #[test]
    fn trace_expectation_is_a_trace_preserving_projection(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 2, 2);
        let b = twisted_bimodule(&mut rng, &shape);
        let weights: Vec<f64> = (0..shape.num_blocks()).map(|_| rng.random_range(0.5..2.0)).collect();
        let e = mmalg::trace_expectation(b.phi_images(), b.module().projection(), Some(&weights), TOL).unwrap();
        let x = random::matrix(&mut rng, &shape, 2, 2);
        let ex = e.apply(&x);
        prop_assert!(e.apply(&ex).sub(&ex).max_abs() < 1e-9);
        let tr = |m: &AMatrix| m.blocks().iter().zip(&weights).map(|(blk, &w)| blk.trace() * cr(w)).sum::<cstar_bimod::linalg::C64>();
        prop_assert!((tr(&ex) - tr(&x)).norm() < 1e-9 * x.norm().max(1.0));
        for img in b.phi_images() {
            prop_assert!(e.apply(img).sub(img).max_abs() < 1e-9);
        }
        let pos = e.apply(&x.adjoint().mul(&x));
        let lowest = pos.blocks().iter().flat_map(|blk| herm_eig(blk).0).fold(f64::INFINITY, f64::min);
        prop_assert!(lowest > -1e-9);
    }

    #[test]
    fn cauchy_schwarz(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 3, 2);
        let module = random_module(&mut rng, &shape, 3);
        let x = random_vector(&mut rng, &module);
        let y = random_vector(&mut rng, &module);
        let xy = hmod::inner(&x, &y).unwrap();
        let xx = hmod::inner(&x, &x).unwrap();
        let yy = hmod::inner(&y, &y).unwrap();
        // (y|x)(x|y) ≤ ‖(x|x)‖ (y|y)
        let gap = yy.scale(cr(xx.norm())).sub(&xy.adjoint().mul(&xy));
        prop_assert!(min_eig(&gap) > -1e-9);
        prop_assert!(min_eig(&xx) > -1e-12);
    }

    #[test]
    fn frame_reconstructs_vectors(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 3, 2);
        let module = random_module(&mut rng, &shape, 3);
        let x = random_vector(&mut rng, &module);
        let rebuilt = hmod::frame(&module)
            .iter()
            .fold(module.zero_vector(), |acc, u| acc.add(&u.right_mul(&hmod::inner(u, &x).unwrap())).unwrap());
        prop_assert!(rebuilt.coords().sub(x.coords()).max_abs() < 1e-9);
    }

    #[test]
    fn unit_multiplet_sums_to_one(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 3, 2);
        let module = random_module(&mut rng, &shape, 3);
        match hmod::unit_multiplet(&module) {
            Ok(ys) => {
                let sum = ys.iter().fold(AlgebraElement::zero(&shape), |acc, y| acc.add(&hmod::inner(y, y).unwrap()));
                prop_assert!(sum.sub(&AlgebraElement::one(&shape)).max_abs() < 1e-9);
            }
            Err(_) => prop_assert!(!hmod::is_full(&module)),
        }
    }

    #[test]
    fn gram_norm_matches_flattened_norm(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 2, 2);
        let module = random_module(&mut rng, &shape, 3);
        let n = rng.random_range(1..=3);
        let xs: Vec<ModuleVector> = (0..n).map(|_| random_vector(&mut rng, &module)).collect();
        let ys: Vec<ModuleVector> = (0..n).map(|_| random_vector(&mut rng, &module)).collect();
        let via_gram = hmod::op_norm_via_gram(&xs, &ys).unwrap();
        let xc: Vec<AMatrix> = xs.iter().map(|v| v.coords().clone()).collect();
        let yc: Vec<AMatrix> = ys.iter().map(|v| v.coords().clone()).collect();
        let oracle = flattened_theta_sum(&xc, &yc).iter().map(largest_singular_value).fold(0.0, f64::max);
        prop_assert!(close(via_gram, oracle, 1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simple_tensor_inner_product(seed: u64) {
        let mut rng = rng_from(seed);
        let (_, b) = random_multiplicity_bimodule(&mut rng);
        let m = b.module();
        let (x, x2, y, y2) = (random_vector(&mut rng, m), random_vector(&mut rng, m), random_vector(&mut rng, m), random_vector(&mut rng, m));
        let tp = tensor_power(&b, 1);
        let lhs = hmod::inner(&tp.simple_tensor(&x, &y).unwrap(), &tp.simple_tensor(&x2, &y2).unwrap()).unwrap();
        let acted = m.project(&b.phi(&hmod::inner(&x, &x2).unwrap()).mul(y2.coords()));
        let rhs = hmod::inner(&y, &acted).unwrap();
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn tensor_dimension_follows_multiplicity_powers(seed: u64) {
        let mut rng = rng_from(seed);
        let (mult, b) = random_multiplicity_bimodule(&mut rng);
        let sizes = b.shape().block_sizes().to_vec();
        let top = if b.k() <= 4 { 3 } else { 2 };
        for r in 1..=top {
            let mr = mat_power(&mult, r);
            let expected: usize = (0..sizes.len()).flat_map(|i| (0..sizes.len()).map(move |j| (i, j))).map(|(i, j)| mr[i][j] * sizes[i] * sizes[j]).sum();
            prop_assert_eq!(b.level(r).module().dim(), expected, "level {}", r);
        }
    }

    #[test]
    fn right_extension_commutes_with_sigma(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 2, 2);
        let b = twisted_bimodule(&mut rng, &shape);
        let t = random_commutant(&mut rng, &b, 1);
        let one_way = sigma_shift(&right_extend(&t), TOL).unwrap();
        let other = right_extend(&sigma_shift(&t, TOL).unwrap());
        prop_assert!(one_way.distance(&other).unwrap() < 1e-9 * t.norm().max(1.0));
        prop_assert!(bimod::is_in_relative_commutant(&one_way, 1e-8));
    }

    #[test]
    fn saturation_is_monotone_and_idempotent(seed: u64) {
        let mut rng = rng_from(seed);
        let (_, b) = random_multiplicity_bimodule(&mut rng);
        let ideals: Vec<IdealMask> = ideal_graph::invariant_ideals(&b).unwrap().into_iter().map(|i| i.mask).collect();
        for j in &ideals {
            let sj = ideal_graph::saturation(&b, j).unwrap();
            prop_assert!(j.is_subset(&sj), "{} ⊄ {}", j, sj);
            prop_assert_eq!(&ideal_graph::saturation(&b, &sj).unwrap(), &sj, "J = {}", j);
            for k in ideals.iter().filter(|k| j.is_subset(k)) {
                prop_assert!(sj.is_subset(&ideal_graph::saturation(&b, k).unwrap()));
            }
        }
    }

    #[test]
    fn graph_invariance_matches_direct_check(seed: u64, bits: u32) {
        let mut rng = rng_from(seed);
        let (_, b) = random_multiplicity_bimodule(&mut rng);
        let d = b.shape().num_blocks();
        let j = IdealMask::from_bits(d, bits % (1 << d));
        prop_assert_eq!(ideal_graph::is_invariant(&b, &j).unwrap(), ideal_graph::is_invariant_direct(&b, &j, 1e-9));
    }

    #[test]
    fn quotient_graph_deletes_the_ideal(seed: u64) {
        let mut rng = rng_from(seed);
        let (_, b) = random_multiplicity_bimodule(&mut rng);
        let adj = ideal_graph::adjacency(&b);
        for ideal in ideal_graph::invariant_ideals(&b).unwrap() {
            let j = &ideal.mask;
            if !ideal.saturated || j.is_empty() || j.is_full() {
                continue;
            }
            let q = ideal_graph::quotient_bimodule(&b, j).unwrap();
            let kept = j.complement_indices();
            let qa = ideal_graph::adjacency(&q);
            for (a, &i) in kept.iter().enumerate() {
                for (c, &l) in kept.iter().enumerate() {
                    prop_assert_eq!(qa.adjacency[a][c], adj.adjacency[i][l]);
                    prop_assert_eq!(qa.multiplicity[a][c], adj.multiplicity[i][l]);
                }
            }
        }
    }

    #[test]
    fn document_round_trip(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 2, 2);
        let b = twisted_bimodule(&mut rng, &shape);
        let text = document::to_string(&document::explicit_document("round trip", &b));
        let back = document::load(document::parse_str(&text).unwrap()).unwrap();
        prop_assert!(back.bimodule.module().projection().sub(b.module().projection()).max_abs() < 1e-12);
        for (x, y) in back.bimodule.phi_images().iter().zip(b.phi_images()) {
            prop_assert!(x.sub(y).max_abs() < 1e-12);
        }
        prop_assert_eq!(document::to_string(&back.doc), text);
    }

    #[test]
    fn index_is_central_at_least_one_and_frame_free(seed: u64) {
        let mut rng = rng_from(seed);
        let m = rng.random_range(1..=3);
        let n = rng.random_range(m..=4);
        let inc = partition_inclusion(&mut rng, m, n);
        let pres = index_theory::present_module(&inc, TOL).unwrap();
        let qb = index_theory::quasi_basis(&pres, TOL).unwrap();
        prop_assert!(qb.index.is_central(1e-9));
        prop_assert!(qb.index.min_eigenvalue() >= 1.0 - 1e-9);
        let other = index_theory::quasi_basis_with_frame(&pres, seed);
        prop_assert!(other.index.sub(&qb.index).max_abs() < 1e-8);
        let e = index_theory::jones_projection(&pres, TOL).unwrap();
        let e_is_one = e.matrix().sub(pres.bimodule().module().projection()).max_abs() < 1e-9;
        prop_assert_eq!(qb.is_trivial(1e-9), n == m);
        prop_assert_eq!(e_is_one, n == m);
    }

    #[test]
    fn expectation_chain_is_positive_and_contractive(seed: u64) {
        let mut rng = rng_from(seed);
        // Uniform weights need not give a finite-type structure on every
        // multiplicity graph, so draw from families where they always do.
        let b = if rng.random_bool(0.5) {
            let shape = random_shape(&mut rng, 2, 2);
            twisted_bimodule(&mut rng, &shape)
        } else {
            Bimodule::cuntz(rng.random_range(1..=3))
        };
        let fts = index_theory::finite_type_structure(&b, None, TOL).unwrap();
        let r = rng.random_range(0..=1);
        let k = rng.random_range(1..=2);
        let map = index_theory::expectation_chain(&fts, r, k, TOL).unwrap();
        let t = random_graded(&mut rng, &b, r + k, r + k);
        let et = map.apply(&t).unwrap();
        prop_assert!(et.norm() <= t.norm() * (1.0 + 1e-8));
        let pos = map.apply(&bimod::graded_compose(&t.adjoint(), &t)).unwrap();
        let lowest = pos.matrix().blocks().iter().flat_map(|blk| herm_eig(blk).0).fold(0.0, f64::min);
        prop_assert!(lowest >= -1e-8 * t.norm().powi(2).max(1.0));
    }

    #[test]
    fn truncated_norms_grow_with_the_cut(seed: u64) {
        let mut rng = rng_from(seed);
        let shape = random_shape(&mut rng, 2, 2);
        let b = twisted_bimodule(&mut rng, &shape);
        let terms = [random_graded(&mut rng, &b, 0, 1), random_graded(&mut rng, &b, 1, 1), random_graded(&mut rng, &b, 2, 1)];
        let mut last = 0.0;
        for n in 2..=5 {
            let f = TruncatedFock::new(&b, n).unwrap();
            let sum = terms.iter().skip(1).fold(f.represent(&terms[0]), |acc, t| acc.add(&f.represent(t)));
            let norm = sum.norm();
            prop_assert!(norm >= last - 1e-9, "N = {}: {} < {}", n, norm, last);
            last = norm;
        }
    }

    #[test]
    fn real_witness_overlap_decays(seed: u64) {
        let mut rng = rng_from(seed);
        let n = rng.random_range(2..=4);
        let sign = if n % 2 == 0 && rng.random_bool(0.5) { -1 } else { 1 };
        // S_k lives at level 2k and σ^k(S_k) at 3k, so larger n stops earlier.
        let depth = if n == 2 { 4 } else { 2 };
        let datum = conjugate_datum(&mut rng, n, sign);
        let inv = freeness::inverse_rtr_norm(&datum, TOL).unwrap();
        prop_assert!(close(inv, 1.0 / n as f64, 1e-9));
        let mut last = 1.0;
        for k in 1..=depth {
            let w = freeness::real_witness(&datum, k, TOL).unwrap();
            let overlap = w.witness.overlap_norm;
            prop_assert!(overlap <= inv.powi(k as i32) + 1e-9, "k = {}: {}", k, overlap);
            prop_assert!(overlap <= last + 1e-12);
            last = overlap;
        }
    }
}
