//! Dense complex linear algebra helpers shared by the monad modules.
//!
//! Everything here is a thin layer over nalgebra: Hermitian square roots,
//! polar factors, eigenvector extraction from a complex Schur form, and
//! orthonormal image/complement bases from an SVD.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::error::{MonadError, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Frobenius norm.
pub fn frob(m: &CMat) -> f64 {
    m.norm()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// exp(H) for Hermitian H via eigendecomposition.
pub fn herm_exp(h: &CMat) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| c64(x.exp(), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Square root of a Hermitian positive semi-definite matrix.
///
/// Fails if the smallest eigenvalue is below `-tol`.
pub fn herm_sqrt(m: &CMat, what: &'static str) -> Result<CMat> {
    herm_power(m, 0.5, what)
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn herm_inv_sqrt(m: &CMat, what: &'static str) -> Result<CMat> {
    herm_power(m, -0.5, what)
}

fn herm_power(m: &CMat, p: f64, what: &'static str) -> Result<CMat> {
    let eig = hermitian_part(m).symmetric_eigen();
    let floor = 1e-13 * eig.eigenvalues.amax().max(1e-300);
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= floor && p < 0.0 {
            return Err(MonadError::NotPositiveDefinite { what });
        }
        if ev < -floor {
            return Err(MonadError::NotPositiveDefinite { what });
        }
        d[(i, i)] = c64(ev.max(0.0).powf(p), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Unitary polar factor U of M = U |M|; identity when M is (numerically) zero.
pub fn polar_unitary(m: &CMat) -> CMat {
    if frob(m) < 1e-200 {
        return CMat::identity(m.nrows(), m.ncols());
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    u * vt
}

/// Inverse through LU; fails with the supplied tag when the matrix is singular.
pub fn inverse(m: &CMat, what: &'static str) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or(MonadError::NotPositiveDefinite { what })
}

/// Eigenvalues of a general complex matrix from its Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let (_, t) = m.clone().schur().unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Eigenpairs of a general complex matrix.
///
/// For each diagonal entry of the Schur triangle a candidate eigenvector is
/// produced by back-substitution; for defective matrices some candidates may
/// coincide, so callers are expected to verify residuals.
pub fn eigen_pairs(m: &CMat) -> Vec<(C64, CVec)> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![(m[(0, 0)], CVec::from_element(1, c64(1.0, 0.0)))];
    }
    let (q, t) = m.clone().schur().unpack();
    let scale = frob(m).max(1e-300);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = t[(i, i)];
        // Solve (T - lambda I) y = 0 with y[i] = 1, y[j] = 0 for j > i.
        let mut y = CVec::zeros(n);
        y[i] = c64(1.0, 0.0);
        for j in (0..i).rev() {
            let mut rhs = C64::new(0.0, 0.0);
            for l in (j + 1)..=i {
                rhs -= t[(j, l)] * y[l];
            }
            let piv = t[(j, j)] - lambda;
            // Near-zero pivot: repeated eigenvalue; perturb to stay finite.
            let piv = if piv.norm() < 1e-14 * scale {
                piv + c64(1e-14 * scale, 0.0)
            } else {
                piv
            };
            y[j] = rhs / piv;
        }
        let v = &q * y;
        let nrm = v.norm();
        out.push((lambda, v.unscale(nrm.max(1e-300))));
    }
    out
}

/// Orthonormal bases of the image of `m` and its orthogonal complement.
///
/// Returns (image basis, complement basis, numerical rank).
pub fn image_and_complement(m: &CMat, rel_tol: f64) -> (CMat, CMat, usize) {
    let rows = m.nrows();
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd with u");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rel_tol * smax.max(1e-300))
        .count();
    let img = u.columns(0, rank).into_owned();
    // Complete the basis: project the standard basis off the image.
    let mut comp_cols: Vec<CVec> = Vec::new();
    let proj = &img * img.adjoint();
    for j in 0..rows {
        if comp_cols.len() == rows - rank {
            break;
        }
        let mut v = CVec::zeros(rows);
        v[j] = c64(1.0, 0.0);
        let mut w = &v - &proj * &v;
        for c in &comp_cols {
            let inner = c.dotc(&w);
            w -= c * inner;
        }
        let nrm = w.norm();
        if nrm > 1e-8 {
            comp_cols.push(w.unscale(nrm));
        }
    }
    let comp = CMat::from_columns(&comp_cols);
    (img, comp, rank)
}

/// Random complex matrix with independent standard-normal real and
/// imaginary parts, scaled by `scale`.
pub fn random_cmat<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c64(scale * normal(rng), scale * normal(rng))
    })
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; two uniforms per sample is plenty here.
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Orthonormal basis of Hermitian k x k matrices (real dimension k^2).
pub fn hermitian_basis(k: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(k * k);
    for i in 0..k {
        let mut e = CMat::zeros(k, k);
        e[(i, i)] = c64(1.0, 0.0);
        basis.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..k {
        for j in (i + 1)..k {
            let mut e = CMat::zeros(k, k);
            e[(i, j)] = c64(s, 0.0);
            e[(j, i)] = c64(s, 0.0);
            basis.push(e);
            let mut f = CMat::zeros(k, k);
            f[(i, j)] = c64(0.0, s);
            f[(j, i)] = c64(0.0, -s);
            basis.push(f);
        }
    }
    basis
}

/// Real inner product tr(A* B).re on matrices.
pub fn real_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn herm_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_cmat(&mut rng, 4, 4, 1.0);
        let h = &m * m.adjoint() + CMat::identity(4, 4);
        let s = herm_sqrt(&h, "h").unwrap();
        assert!(frob(&(&s * &s - &h)) < 1e-10);
        let si = herm_inv_sqrt(&h, "h").unwrap();
        assert!(frob(&(&s * &si - CMat::identity(4, 4))) < 1e-10);
    }

    #[test]
    fn polar_factor_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_cmat(&mut rng, 3, 3, 1.0);
        let u = polar_unitary(&m);
        assert!(frob(&(&u * u.adjoint() - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn eigen_pairs_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_cmat(&mut rng, 5, 5, 1.0);
        for (lambda, v) in eigen_pairs(&m) {
            let res = (&m * &v - v.scale(1.0).map(|x| x * lambda)).norm();
            assert!(res < 1e-9, "eigenvector residual {res}");
        }
    }

    #[test]
    fn image_complement_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_cmat(&mut rng, 5, 2, 1.0);
        let (img, comp, rank) = image_and_complement(&m, 1e-12);
        assert_eq!(rank, 2);
        assert_eq!(comp.ncols(), 3);
        assert!(frob(&(img.adjoint() * &comp)) < 1e-10);
        let full = CMat::from_fn(5, 5, |i, j| {
            if j < 2 {
                img[(i, j)]
            } else {
                comp[(i, j - 2)]
            }
        });
        assert!(frob(&(full.adjoint() * &full - CMat::identity(5, 5))) < 1e-10);
    }
}
