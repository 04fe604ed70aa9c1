//! Dense complex helpers shared by every module.
//!
//! Everything in the crate eventually reduces to per-block complex matrices,
//! so the handful of spectral routines live here once.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Kronecker product with `a` as the outer (most significant) index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            let mut view = out.view_mut((i * br, j * bc), (br, bc));
            view.zip_apply(b, |o, v| *o = s * v);
        }
    }
    out
}

/// Largest singular value. Empty matrices have norm zero.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.iter().all(|z| z.norm_sqr() == 0.0) {
        return 0.0;
    }
    if m.nrows().min(m.ncols()) <= 96 {
        let sv = m.clone().svd(false, false).singular_values;
        return sv.iter().cloned().fold(0.0_f64, f64::max);
    }
    // Large case: top eigenvalue of the smaller Gram matrix is the squared norm.
    let gram = if m.nrows() >= m.ncols() {
        m.adjoint() * m
    } else {
        m * m.adjoint()
    };
    let (vals, _) = herm_eig(&gram);
    vals.iter().cloned().fold(0.0_f64, f64::max).max(0.0).sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - m.adjoint())) <= tol
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = hermitian_part(m);
    // Zero rows split off exactly; the tridiagonal solver can return NaN on
    // matrices that are mostly zero, so only the live core is decomposed.
    let live: Vec<usize> = (0..n).filter(|&i| h.row(i).iter().any(|z| z.norm_sqr() > 0.0)).collect();
    if live.is_empty() {
        return (vec![0.0; n], eye(n));
    }
    let core = CMat::from_fn(live.len(), live.len(), |a, b| h[(live[a], live[b])]);
    let eig = core.symmetric_eigen();
    assert!(
        eig.eigenvalues.iter().all(|x| x.is_finite()),
        "Hermitian eigensolver did not converge on a {}x{} core",
        live.len(),
        live.len()
    );
    let mut pairs: Vec<(f64, CMat)> = (0..live.len())
        .map(|c| {
            let mut v = CMat::zeros(n, 1);
            for (a, &i) in live.iter().enumerate() {
                v[(i, 0)] = eig.eigenvectors[(a, c)];
            }
            (eig.eigenvalues[c], v)
        })
        .collect();
    for i in (0..n).filter(|i| !live.contains(i)) {
        let mut v = CMat::zeros(n, 1);
        v[(i, 0)] = cr(1.0);
        pairs.push((0.0, v));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vecs = CMat::zeros(n, n);
    for (col, (_, v)) in pairs.iter().enumerate() {
        vecs.set_column(col, &v.column(0));
    }
    (pairs.iter().map(|p| p.0).collect(), vecs)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eig(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Orthonormal basis (columns) of the kernel of `m`, using the cutoff `tol`
/// on singular values.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return eye(n);
    }
    let gram = m.adjoint() * m;
    let (vals, vecs) = herm_eig(&gram);
    // Squared singular values carry rounding of order eps·‖m‖², so the
    // cutoff cannot go below that floor.
    let top = vals.last().cloned().unwrap_or(0.0).max(0.0);
    let cut = (tol * tol).max(1e-13 * top);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] <= cut).collect();
    let mut out = CMat::zeros(n, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &vecs.column(i));
    }
    out
}

/// Orthonormal basis of the range of a Hermitian positive matrix, keeping
/// eigenvalues above `cutoff`.
pub fn range_basis(m: &CMat, cutoff: f64) -> CMat {
    let (vals, vecs) = herm_eig(m);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > cutoff).collect();
    let mut out = CMat::zeros(m.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &vecs.column(i));
    }
    out
}

/// Column-major vectorisation.
pub fn vec_of(m: &CMat) -> Vec<C64> {
    m.iter().cloned().collect()
}

pub fn from_vec(rows: usize, cols: usize, v: &[C64]) -> CMat {
    CMat::from_column_slice(rows, cols, v)
}

/// Hilbert–Schmidt inner product `tr(a* b)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn is_identity(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs(&(m - eye(m.nrows()))) <= tol
}

pub fn is_zero(m: &CMat, tol: f64) -> bool {
    max_abs(m) <= tol
}


/// Basis (as `m × m` matrices) of the commutant `{Z : ZG = GZ for all G}`.
pub fn commutant_basis(generators: &[CMat], m: usize, tol: f64) -> Vec<CMat> {
    if m == 0 {
        return Vec::new();
    }
    if generators.is_empty() {
        return (0..m * m)
            .map(|t| {
                let mut z = CMat::zeros(m, m);
                z[(t % m, t / m)] = cr(1.0);
                z
            })
            .collect();
    }
    // vec(ZG - GZ) = (G^T ⊗ I - I ⊗ G) vec(Z) for column-major vec.
    let mut sys = CMat::zeros(generators.len() * m * m, m * m);
    for (g_idx, g) in generators.iter().enumerate() {
        let blk = kron(&g.transpose(), &eye(m)) - kron(&eye(m), g);
        sys.view_mut((g_idx * m * m, 0), (m * m, m * m)).copy_from(&blk);
    }
    let ns = null_space(&sys, tol);
    (0..ns.ncols())
        .map(|j| from_vec(m, m, &ns.column(j).iter().cloned().collect::<Vec<_>>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_of_mostly_zero_matrix() {
        let idx = [3, 40, 41, 77, 120];
        let g = CMat::from_fn(5, 5, |a, b| c((a + 2 * b) as f64 * 0.1, a as f64 - b as f64));
        let core = g.adjoint() * &g;
        let mut m = zeros(121, 121);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = core[(a, b)];
            }
        }
        assert_eq!(herm_eig(&zeros(3, 3)).0, vec![0.0; 3]);
        let (vals, vecs) = herm_eig(&m);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(121, vals.iter().map(|&x| cr(x))));
        assert!(max_abs(&(&vecs * d * vecs.adjoint() - &m)) < 1e-10);
        assert!(is_identity(&(vecs.adjoint() * &vecs), 1e-10));
    }

    #[test]
    fn kron_orders_outer_index_first() {
        let a = CMat::from_row_slice(2, 1, &[cr(1.0), cr(2.0)]);
        let b = CMat::from_row_slice(1, 2, &[cr(3.0), cr(5.0)]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (2, 2));
        assert_eq!(k[(1, 1)], cr(10.0));
        assert_eq!(k[(0, 1)], cr(5.0));
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(1.0), cr(-3.0)]));
        assert!((spectral_norm(&m) - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&zeros(3, 0)), 0.0);
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = CMat::from_row_slice(1, 2, &[cr(1.0), cr(1.0)]);
        let ns = null_space(&m, 1e-9);
        assert_eq!(ns.ncols(), 1);
        assert!(max_abs(&(&m * &ns)) < 1e-12);
    }
}
