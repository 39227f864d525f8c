//! ADHM monad data in Donaldson standard form.
//!
//! A monad is the pair of pencils
//!
//! ```text
//! A(z) = [ z0 I + a0 ]        B(z) = [ z1 I + a1, -(z0 I + a0), b2 ]
//!        [ z1 I + a1 ]
//!        [     a2    ]
//! ```
//!
//! on W = K + K + R with dim K = k (the charge) and dim R = r (the rank).
//! The module validates the monad condition a1 a0 - a0 a1 + b2 a2 = 0 and
//! the reality condition
//! a0 a0* - a0* a0 + a1 a1* - a1* a1 + b2 b2* - a2* a2 = 0,
//! locates degeneracy points, and moves data around the GL(k) orbit
//! (unitarization, translation, dilation).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MonadError, Result};
use crate::linalg::{
    c64, eigen_pairs, eigenvalues, frob, herm_exp, hermitian_basis, real_inner, C64, CMat, CVec,
};

/// Default tolerance for both the monad-condition and reality residuals.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Seed of the generic linear combination used by the common-eigenvector
/// search in [`MonadData::degeneracy_points`].
pub const DEGENERACY_SEED: u64 = 0;

/// A point of the affine chart C^2 inside P2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinePoint {
    pub z0: (f64, f64),
    pub z1: (f64, f64),
}

impl AffinePoint {
    pub fn new(z0: C64, z1: C64) -> Self {
        AffinePoint {
            z0: (z0.re, z0.im),
            z1: (z1.re, z1.im),
        }
    }

    pub fn origin() -> Self {
        Self::new(c64(0.0, 0.0), c64(0.0, 0.0))
    }

    pub fn z0(&self) -> C64 {
        c64(self.z0.0, self.z0.1)
    }

    pub fn z1(&self) -> C64 {
        c64(self.z1.0, self.z1.1)
    }

    /// Euclidean distance in R^4.
    pub fn dist(&self, other: &AffinePoint) -> f64 {
        ((self.z0() - other.z0()).norm_sqr() + (self.z1() - other.z1()).norm_sqr()).sqrt()
    }
}

/// ADHM matrices (a0, a1, a2, b2) together with the rank r and charge k.
#[derive(Debug, Clone, PartialEq)]
pub struct MonadData {
    r: usize,
    k: usize,
    a0: CMat,
    a1: CMat,
    a2: CMat,
    b2: CMat,
}

/// Thresholded residuals and the degeneracy locus of a monad.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub monad_residual: f64,
    pub reality_residual: f64,
    pub degeneracy_points: Vec<AffinePoint>,
    pub is_valid_monad: bool,
    pub is_unitary: bool,
    pub is_nondegenerate: bool,
}

/// Options for the moment-map descent in [`MonadData::unitarize`].
#[derive(Debug, Clone, Copy)]
pub struct UnitarizeOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for UnitarizeOptions {
    fn default() -> Self {
        UnitarizeOptions {
            max_iter: 2000,
            tol: DEFAULT_TOL,
        }
    }
}

impl MonadData {
    pub fn new(r: usize, k: usize, a0: CMat, a1: CMat, a2: CMat, b2: CMat) -> Result<Self> {
        check_dims("a0", &a0, k, k)?;
        check_dims("a1", &a1, k, k)?;
        check_dims("a2", &a2, r, k)?;
        check_dims("b2", &b2, k, r)?;
        if r == 0 || k == 0 {
            return Err(MonadError::InvalidParameter {
                what: format!("rank and charge must be positive (r={r}, k={k})"),
            });
        }
        Ok(MonadData {
            r,
            k,
            a0,
            a1,
            a2,
            b2,
        })
    }

    /// The basic one-instanton at the origin with scale `lambda` (rank 2).
    pub fn basic_instanton(lambda: f64) -> Self {
        let zero = CMat::zeros(1, 1);
        let mut a2 = CMat::zeros(2, 1);
        a2[(0, 0)] = c64(lambda, 0.0);
        let mut b2 = CMat::zeros(1, 2);
        b2[(0, 1)] = c64(lambda, 0.0);
        MonadData {
            r: 2,
            k: 1,
            a0: zero.clone(),
            a1: zero,
            a2,
            b2,
        }
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn charge(&self) -> usize {
        self.k
    }

    pub fn a0(&self) -> &CMat {
        &self.a0
    }

    pub fn a1(&self) -> &CMat {
        &self.a1
    }

    pub fn a2(&self) -> &CMat {
        &self.a2
    }

    pub fn b2(&self) -> &CMat {
        &self.b2
    }

    /// dim W = 2k + r.
    pub fn dim_w(&self) -> usize {
        2 * self.k + self.r
    }

    /// The pencils (A(z), B(z)) at an affine point.
    pub fn assemble(&self, p: &AffinePoint) -> (CMat, CMat) {
        let (k, r) = (self.k, self.r);
        let id = CMat::identity(k, k);
        let top = &id * p.z0() + &self.a0;
        let mid = &id * p.z1() + &self.a1;
        let mut a = CMat::zeros(2 * k + r, k);
        a.view_mut((0, 0), (k, k)).copy_from(&top);
        a.view_mut((k, 0), (k, k)).copy_from(&mid);
        a.view_mut((2 * k, 0), (r, k)).copy_from(&self.a2);
        let mut b = CMat::zeros(k, 2 * k + r);
        b.view_mut((0, 0), (k, k)).copy_from(&mid);
        b.view_mut((0, k), (k, k)).copy_from(&(-&top));
        b.view_mut((0, 2 * k), (k, r)).copy_from(&self.b2);
        (a, b)
    }

    /// The point-independent matrix B(z) A(z) = a1 a0 - a0 a1 + b2 a2.
    pub fn monad_condition_matrix(&self) -> CMat {
        &self.a1 * &self.a0 - &self.a0 * &self.a1 + &self.b2 * &self.a2
    }

    pub fn monad_residual(&self) -> f64 {
        frob(&self.monad_condition_matrix())
    }

    /// The moment-map matrix mu = a0 a0* - a0* a0 + a1 a1* - a1* a1 + b2 b2* - a2* a2.
    pub fn reality_matrix(&self) -> CMat {
        &self.a0 * self.a0.adjoint() - self.a0.adjoint() * &self.a0
            + &self.a1 * self.a1.adjoint()
            - self.a1.adjoint() * &self.a1
            + &self.b2 * self.b2.adjoint()
            - self.a2.adjoint() * &self.a2
    }

    pub fn reality_residual(&self) -> f64 {
        frob(&self.reality_matrix())
    }

    /// Residuals in Frobenius norm plus the degeneracy locus.
    pub fn validate(&self, tol_monad: f64, tol_reality: f64) -> Result<ValidationReport> {
        if tol_monad <= 0.0 || tol_reality <= 0.0 {
            return Err(MonadError::InvalidParameter {
                what: "validation tolerances must be positive".into(),
            });
        }
        let monad_residual = self.monad_residual();
        let reality_residual = self.reality_residual();
        let degeneracy_points = self.degeneracy_points();
        Ok(ValidationReport {
            monad_residual,
            reality_residual,
            is_valid_monad: monad_residual <= tol_monad,
            is_unitary: reality_residual <= tol_reality,
            is_nondegenerate: degeneracy_points.is_empty(),
            degeneracy_points,
        })
    }

    /// Affine points where A(z) fails injectivity or B(z) fails surjectivity.
    ///
    /// A(z) drops rank at z = (-l0, -l1) iff some nonzero v in ker a2 has
    /// a0 v = l0 v and a1 v = l1 v; dually for B with left-eigenvectors
    /// annihilating b2.  Candidates come from the eigenvectors of a generic
    /// linear combination t a0 + (1-t) a1 and are verified against both
    /// matrices, which removes the false positives a fragile exact
    /// simultaneous-eigenspace computation would produce.
    pub fn degeneracy_points(&self) -> Vec<AffinePoint> {
        self.degeneracy_points_seeded(DEGENERACY_SEED)
    }

    pub fn degeneracy_points_seeded(&self, seed: u64) -> Vec<AffinePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = c64(0.3 + 0.4 * rng.gen::<f64>(), 0.1 + 0.2 * rng.gen::<f64>());
        let one = c64(1.0, 0.0);
        let mut points: Vec<AffinePoint> = Vec::new();

        // Right side: v with a2 v = 0, common eigenvector of (a0, a1).
        let comb = &self.a0 * t + &self.a1 * (one - t);
        for (_, v) in eigen_pairs(&comb) {
            if let Some(p) = self.verify_right_candidate(&v) {
                push_dedup(&mut points, p);
            }
        }
        // Left side: u with u b2 = 0, common left-eigenvector of (a0, a1).
        // Left-eigenvectors of m are eigenvectors of m^T (plain transpose).
        let comb_t = comb.transpose();
        for (_, w) in eigen_pairs(&comb_t) {
            if let Some(p) = self.verify_left_candidate(&w) {
                push_dedup(&mut points, p);
            }
        }
        points.sort_by(|a, b| {
            (a.z0.0, a.z0.1, a.z1.0, a.z1.1)
                .partial_cmp(&(b.z0.0, b.z0.1, b.z1.0, b.z1.1))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        points
    }

    fn verify_right_candidate(&self, v: &CVec) -> Option<AffinePoint> {
        let tol = 1e-8;
        let scale = self.data_norm().max(1.0);
        if (&self.a2 * v).norm() > tol * scale {
            return None;
        }
        let l0 = v.dotc(&(&self.a0 * v));
        let l1 = v.dotc(&(&self.a1 * v));
        let r0 = (&self.a0 * v - v * l0).norm();
        let r1 = (&self.a1 * v - v * l1).norm();
        if r0 <= tol * scale && r1 <= tol * scale {
            Some(AffinePoint::new(-l0, -l1))
        } else {
            None
        }
    }

    fn verify_left_candidate(&self, w: &CVec) -> Option<AffinePoint> {
        let tol = 1e-8;
        let scale = self.data_norm().max(1.0);
        if (self.b2.transpose() * w).norm() > tol * scale {
            return None;
        }
        let a0t = self.a0.transpose();
        let a1t = self.a1.transpose();
        let l0 = w.dotc(&(&a0t * w));
        let l1 = w.dotc(&(&a1t * w));
        let r0 = (&a0t * w - w * l0).norm();
        let r1 = (&a1t * w - w * l1).norm();
        if r0 <= tol * scale && r1 <= tol * scale {
            Some(AffinePoint::new(-l0, -l1))
        } else {
            None
        }
    }

    fn data_norm(&self) -> f64 {
        frob(&self.a0) + frob(&self.a1) + frob(&self.a2) + frob(&self.b2)
    }

    /// Pull back under the translation z -> z + lambda:
    /// (a0, a1) -> (a0 + l0 I, a1 + l1 I), a2 and b2 unchanged.
    pub fn translate(&self, l0: C64, l1: C64) -> MonadData {
        let id = CMat::identity(self.k, self.k);
        MonadData {
            r: self.r,
            k: self.k,
            a0: &self.a0 + &id * l0,
            a1: &self.a1 + &id * l1,
            a2: self.a2.clone(),
            b2: self.b2.clone(),
        }
    }

    /// Pull back under z -> z / s: all four matrices scale by s.
    pub fn dilate(&self, s: f64) -> Result<MonadData> {
        if !(s > 0.0) {
            return Err(MonadError::InvalidParameter {
                what: format!("dilation factor must be positive, got {s}"),
            });
        }
        let sc = c64(s, 0.0);
        Ok(MonadData {
            r: self.r,
            k: self.k,
            a0: &self.a0 * sc,
            a1: &self.a1 * sc,
            a2: &self.a2 * sc,
            b2: &self.b2 * sc,
        })
    }

    /// Move to the unitary representative of the GL(k) orbit.
    ///
    /// Minimizes |mu|^2 for mu the reality matrix over g = exp(H) with H
    /// Hermitian, by descent with backtracking line search: plain gradient
    /// steps far from the zero set, Gauss-Newton steps on the equation
    /// mu = 0 once |mu| is small.  The GL(k) action preserves the monad
    /// condition exactly, so only the reality residual moves.
    pub fn unitarize(&self, opts: UnitarizeOptions) -> Result<MonadData> {
        let degeneracies = self.degeneracy_points();
        if !degeneracies.is_empty() {
            return Err(MonadError::DegenerateMonad {
                points: degeneracies,
            });
        }
        let mut cur = self.clone();
        let basis = hermitian_basis(self.k);
        let mut eta = 0.05;
        let mut best = cur.reality_residual();
        for it in 0..opts.max_iter {
            let mu = cur.reality_matrix();
            let nrm = frob(&mu);
            best = best.min(nrm);
            if nrm <= opts.tol {
                return Ok(cur);
            }
            let dir = if nrm < 0.5 {
                cur.gauss_newton_direction(&mu, &basis)
            } else {
                None
            };
            let step_dir = match dir {
                Some(h) => h,
                None => {
                    let g = cur.mu_norm_gradient(&mu);
                    -g * c64(eta / nrm.powi(2).max(1.0), 0.0)
                }
            };
            // Backtracking on |mu|^2; accepted steps never increase it.
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let g = herm_exp(&(&step_dir * c64(t, 0.0)));
                let cand = cur.act(&g)?;
                if cand.reality_residual() < nrm {
                    cur = cand;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(MonadError::NonConvergence {
                    what: "unitarize",
                    residual: nrm,
                    iterations: it,
                });
            }
            eta = (eta * 1.5).min(1.0);
        }
        Err(MonadError::NonConvergence {
            what: "unitarize",
            residual: best,
            iterations: opts.max_iter,
        })
    }

    /// Apply g in GL(k): a_i -> g a_i g^-1, a2 -> a2 g^-1, b2 -> g b2.
    pub fn act(&self, g: &CMat) -> Result<MonadData> {
        let gi = g
            .clone()
            .try_inverse()
            .ok_or(MonadError::NotPositiveDefinite { what: "gauge g" })?;
        Ok(MonadData {
            r: self.r,
            k: self.k,
            a0: g * &self.a0 * &gi,
            a1: g * &self.a1 * &gi,
            a2: &self.a2 * &gi,
            b2: g * &self.b2,
        })
    }

    /// Gradient of |mu|^2 with respect to a Hermitian step H at g = 1.
    fn mu_norm_gradient(&self, mu: &CMat) -> CMat {
        let mut g = CMat::zeros(self.k, self.k);
        for a in [&self.a0, &self.a1] {
            let aa = a * a.adjoint();
            let ata = a.adjoint() * a;
            g += &aa * mu + mu * &aa + &ata * mu + mu * &ata
                - (a.adjoint() * mu * a) * c64(2.0, 0.0)
                - (a * mu * a.adjoint()) * c64(2.0, 0.0);
        }
        let bb = &self.b2 * self.b2.adjoint();
        let ca = self.a2.adjoint() * &self.a2;
        g += &bb * mu + mu * &bb + &ca * mu + mu * &ca;
        g * c64(2.0, 0.0)
    }

    /// Directional derivative of mu under a Hermitian step H.
    fn mu_derivative(&self, h: &CMat) -> CMat {
        let mut out = CMat::zeros(self.k, self.k);
        for a in [&self.a0, &self.a1] {
            let s = a * a.adjoint() + a.adjoint() * a;
            out += h * &s + &s * h
                - (a * h * a.adjoint()) * c64(2.0, 0.0)
                - (a.adjoint() * h * a) * c64(2.0, 0.0);
        }
        let t = &self.b2 * self.b2.adjoint() + self.a2.adjoint() * &self.a2;
        out += h * &t + &t * h;
        out
    }

    /// Solve d mu(H) = -mu in least squares over the Hermitian basis.
    fn gauss_newton_direction(&self, mu: &CMat, basis: &[CMat]) -> Option<CMat> {
        let n = basis.len();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for (j, e) in basis.iter().enumerate() {
            let le = self.mu_derivative(e);
            for (i, f) in basis.iter().enumerate() {
                l[(i, j)] = real_inner(f, &le);
            }
        }
        let rhs =
            nalgebra::DVector::<f64>::from_iterator(n, basis.iter().map(|f| -real_inner(f, mu)));
        let svd = l.svd(true, true);
        let coef = svd.solve(&rhs, 1e-12).ok()?;
        let mut h = CMat::zeros(self.k, self.k);
        for (c, e) in coef.iter().zip(basis.iter()) {
            h += e * c64(*c, 0.0);
        }
        Some(h)
    }

    /// Instanton centers estimated from the pencil spectra:
    /// (-mean eig a0, -mean eig a1).
    pub fn spectral_center(&self) -> AffinePoint {
        let mean = |m: &CMat| -> C64 {
            let ev = eigenvalues(m);
            let s: C64 = ev.iter().sum();
            s / c64(ev.len() as f64, 0.0)
        };
        AffinePoint::new(-mean(&self.a0), -mean(&self.a1))
    }
}

fn check_dims(field: &'static str, m: &CMat, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(MonadError::DimensionMismatch {
            field,
            expected_rows: rows,
            expected_cols: cols,
            got_rows: m.nrows(),
            got_cols: m.ncols(),
        });
    }
    Ok(())
}

fn push_dedup(points: &mut Vec<AffinePoint>, p: AffinePoint) {
    if !points.iter().any(|q| q.dist(&p) < 1e-6) {
        points.push(p);
    }
}

// --- JSON monad file format -------------------------------------------------

/// Wire form: integer `rank` and `charge`, each matrix a row-major array of
/// [re, im] pairs.
#[derive(Debug, Serialize, Deserialize)]
pub struct MonadFile {
    pub rank: usize,
    pub charge: usize,
    pub a0: Vec<[f64; 2]>,
    pub a1: Vec<[f64; 2]>,
    pub a2: Vec<[f64; 2]>,
    pub b2: Vec<[f64; 2]>,
}

impl MonadFile {
    pub fn from_monad(m: &MonadData) -> Self {
        MonadFile {
            rank: m.rank(),
            charge: m.charge(),
            a0: mat_to_pairs(m.a0()),
            a1: mat_to_pairs(m.a1()),
            a2: mat_to_pairs(m.a2()),
            b2: mat_to_pairs(m.b2()),
        }
    }

    pub fn into_monad(self) -> Result<MonadData> {
        let (k, r) = (self.charge, self.rank);
        let a0 = pairs_to_mat("a0", &self.a0, k, k)?;
        let a1 = pairs_to_mat("a1", &self.a1, k, k)?;
        let a2 = pairs_to_mat("a2", &self.a2, r, k)?;
        let b2 = pairs_to_mat("b2", &self.b2, k, r)?;
        MonadData::new(r, k, a0, a1, a2, b2)
    }
}

fn mat_to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn pairs_to_mat(field: &'static str, pairs: &[[f64; 2]], rows: usize, cols: usize) -> Result<CMat> {
    if pairs.len() != rows * cols {
        return Err(MonadError::DimensionMismatch {
            field,
            expected_rows: rows,
            expected_cols: cols,
            got_rows: pairs.len(),
            got_cols: 1,
        });
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        let p = pairs[i * cols + j];
        c64(p[0], p[1])
    }))
}
