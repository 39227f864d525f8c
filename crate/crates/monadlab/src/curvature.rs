//! Curvature and charge density of the unitary connection cut out by a monad.
//!
//! At a nondegenerate affine point the orthogonal projection onto the
//! cohomology E = ker B / im A is
//!
//! ```text
//! pi_E = 1 - A (A*A)^-1 A* - B* (B B*)^-1 B,       psi := A*A ( = B B* )
//! ```
//!
//! and the curvature is carried by the four K-blocks of pi_E weighted by
//! psi^-1.  With p_ij the (i,j)-th K-block of pi_E, the charge density is
//!
//! ```text
//! *tr F^2 = 8 tr[(p00 psi^-1 + p11 psi^-1)^2
//!                + 2 (p00 psi^-1 p11 psi^-1 - p01 psi^-1 p10 psi^-1)]
//! ```
//!
//! and |F| <= 4 (r - tr p22) tr psi^-1 <= 4 r tr psi^-1 pointwise.  The
//! total charge is the integral of the density over C^2 divided by 8 pi^2.

use serde::Serialize;

use crate::adhm::{AffinePoint, MonadData};
use crate::error::{MonadError, Result};
use crate::linalg::{c64, frob, inverse, C64, CMat};
use crate::par::{map_points, ExecPolicy};

/// 2-form labels for the curvature blocks of Eq.-style `F = pi [..] i_E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwoForm {
    /// dz0 ^ dzbar0 - dz1 ^ dzbar1
    Omega,
    /// 2 dz0 ^ dzbar1
    TwoDz0Dzbar1,
    /// 2 dz1 ^ dzbar0
    TwoDz1Dzbar0,
    /// -(dz0 ^ dzbar0 - dz1 ^ dzbar1)
    MinusOmega,
}

/// Pointwise evaluation of psi, the projector, the curvature blocks and the
/// charge density.
#[derive(Debug, Clone)]
pub struct CurvatureSample {
    pub point: AffinePoint,
    pub psi: CMat,
    pub projector: CMat,
    /// The four k x k blocks p_ij psi^-1 paired with their 2-form labels.
    pub f_blocks: [(CMat, TwoForm); 4],
    pub charge_density: f64,
    /// Pointwise |F| = sqrt(*tr F^2).
    pub f_norm: f64,
    /// The bound 4 r tr psi^-1 recorded alongside for direct comparison.
    pub f_norm_bound: f64,
}

/// Radial-shell integration grid.
///
/// `samples_per_axis` counts the shells; the sphere factor uses twice as
/// many points on S^3 (a Hopf-coordinate product lattice).  Shells are
/// graded toward the center (r = R u^2 with u sampled by midpoint), which
/// resolves the concentrated cores this quadrature is built for.
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub center: AffinePoint,
    pub half_width: f64,
    pub samples_per_axis: usize,
}

impl GridSpec {
    pub fn new(center: AffinePoint, half_width: f64, samples_per_axis: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(MonadError::InvalidParameter {
                what: format!("grid half_width must be positive, got {half_width}"),
            });
        }
        if samples_per_axis < 2 {
            return Err(MonadError::InvalidParameter {
                what: "samples_per_axis must be at least 2".into(),
            });
        }
        Ok(GridSpec {
            center,
            half_width,
            samples_per_axis,
        })
    }

    /// Default grid for a monad: centered at its spectral center with
    /// R = 50 x data scale and 64 shells.
    pub fn default_for(m: &MonadData) -> Result<Self> {
        let center = m.spectral_center();
        let scale = local_scale(m, &center)?;
        GridSpec::new(center, 50.0 * scale, 64)
    }
}

/// Finite-difference report for the psi-potential identities.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma35Report {
    pub point: AffinePoint,
    pub f_value: f64,
    pub g_value: f64,
    /// |df|^2 <= k (+ slack)
    pub check_a: bool,
    /// |dg|^2 <= 4k f^-2 (+ slack)
    pub check_c: bool,
    /// |Delta_FD(f^-2) - 4 tr[psi^-1 (p00+p11) psi^-1]|
    pub residual_b: f64,
    /// |Delta_FD(g) + 4 tr psi^-1 + 2 tr[psi^-1 (p00+p11)]|
    pub residual_d: f64,
    /// Delta_FD[f^-p (c-g)^q] >= 2q f^(-p-2) (c-g)^(q-1) - slack
    pub check_36: bool,
}

/// Parameters for the `check_36` inequality; the hypothesis needs
/// c >= g + 2k(2q-2+p)/(2-p) on the sampled region.
#[derive(Debug, Clone, Copy)]
pub struct Lemma36Params {
    pub p: f64,
    pub q: f64,
    pub c: f64,
}

impl Lemma36Params {
    /// The default choice (p, q) = (1, 1), c = 5k.
    pub fn default_for_charge(k: usize) -> Self {
        Lemma36Params {
            p: 1.0,
            q: 1.0,
            c: 5.0 * k as f64,
        }
    }
}

pub const LEMMA35_SLACK: f64 = 1e-6;

/// psi(p) = A(p)* A(p).
pub fn psi_at(m: &MonadData, p: &AffinePoint) -> CMat {
    let (a, _) = m.assemble(p);
    a.adjoint() * a
}

/// f = (tr psi^-1)^(-1/2), the local concentration scale.
pub fn local_scale(m: &MonadData, p: &AffinePoint) -> Result<f64> {
    let psi = psi_at(m, p);
    let tri = inverse(&psi, "psi").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let t = tri.trace().re;
    if !(t > 0.0) {
        return Err(MonadError::SingularPsi { point: *p });
    }
    Ok(t.powf(-0.5))
}

/// Orthogonal projection of W onto E at p.
pub fn projector_at(m: &MonadData, p: &AffinePoint) -> Result<CMat> {
    let (a, b) = m.assemble(p);
    let psi = a.adjoint() * &a;
    let psi_inv = inverse(&psi, "psi").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let psib = &b * b.adjoint();
    let psib_inv = inverse(&psib, "B B*").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let n = m.dim_w();
    Ok(CMat::identity(n, n) - &a * psi_inv * a.adjoint() - b.adjoint() * psib_inv * &b)
}

/// Full curvature sample at p.
pub fn curvature_at(m: &MonadData, p: &AffinePoint) -> Result<CurvatureSample> {
    let k = m.charge();
    let r = m.rank();
    let (a, b) = m.assemble(p);
    let psi = a.adjoint() * &a;
    let psi_inv = inverse(&psi, "psi").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let psib = &b * b.adjoint();
    let psib_inv = inverse(&psib, "B B*").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let n = m.dim_w();
    let projector = CMat::identity(n, n) - &a * &psi_inv * a.adjoint() - b.adjoint() * psib_inv * &b;

    let block = |bi: usize, bj: usize| -> CMat {
        projector.view((bi * k, bj * k), (k, k)).into_owned() * &psi_inv
    };
    let f_blocks = [
        (block(0, 0), TwoForm::Omega),
        (block(0, 1), TwoForm::TwoDz0Dzbar1),
        (block(1, 0), TwoForm::TwoDz1Dzbar0),
        (block(1, 1), TwoForm::MinusOmega),
    ];
    let charge_density = density_from_blocks(&f_blocks);
    let f_norm = charge_density.max(0.0).sqrt();
    let f_norm_bound = 4.0 * r as f64 * psi_inv.trace().re;
    Ok(CurvatureSample {
        point: *p,
        psi,
        projector,
        f_blocks,
        charge_density,
        f_norm,
        f_norm_bound,
    })
}

fn density_from_blocks(blocks: &[(CMat, TwoForm); 4]) -> f64 {
    let (p00, p01, p10, p11) = (&blocks[0].0, &blocks[1].0, &blocks[2].0, &blocks[3].0);
    let s = p00 + p11;
    let t = (&s * &s + (p00 * p11 - p01 * p10) * c64(2.0, 0.0)).trace();
    8.0 * t.re
}

/// Charge density 8 tr[(p00 psi^-1 + p11 psi^-1)^2 + 2(p00 psi^-1 p11 psi^-1
/// - p01 psi^-1 p10 psi^-1)] at p.
pub fn charge_density_at(m: &MonadData, p: &AffinePoint) -> Result<f64> {
    Ok(curvature_at(m, p)?.charge_density)
}

// --- quadrature --------------------------------------------------------------

/// One row of the shell-major evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub point: AffinePoint,
    /// Quadrature weight already including the radial Jacobian r^3 and the
    /// sphere measure.
    pub weight: f64,
    pub shell: usize,
}

/// Deterministic Hopf-coordinate lattice on S^3 with equal weights.
///
/// S^3 of radius 1 in Hopf coordinates: (w0, w1) = (cos(eta) e^{i xi1},
/// sin(eta) e^{i xi2}) with measure (1/2) du dxi1 dxi2 after u = sin^2(eta).
fn sphere_points(target: usize) -> Vec<(C64, C64)> {
    let m_angle = (((target as f64) / 2.0).cbrt().round() as usize).max(2);
    let m_u = (target / (m_angle * m_angle)).max(2);
    let mut pts = Vec::with_capacity(m_u * m_angle * m_angle);
    for iu in 0..m_u {
        let u = (iu as f64 + 0.5) / m_u as f64;
        let (sn, cs) = (u.sqrt(), (1.0 - u).sqrt());
        for i1 in 0..m_angle {
            let x1 = 2.0 * std::f64::consts::PI * (i1 as f64 + 0.5) / m_angle as f64;
            for i2 in 0..m_angle {
                let x2 = 2.0 * std::f64::consts::PI * (i2 as f64 + 0.5) / m_angle as f64;
                pts.push((
                    c64(cs * x1.cos(), cs * x1.sin()),
                    c64(sn * x2.cos(), sn * x2.sin()),
                ));
            }
        }
    }
    pts
}

/// The shell-major list of sample points and weights for a grid.
pub fn grid_points(grid: &GridSpec) -> Vec<GridPoint> {
    let n = grid.samples_per_axis;
    let r_max = grid.half_width;
    let sphere = sphere_points(2 * n);
    let w_sphere = 2.0 * std::f64::consts::PI.powi(2) / sphere.len() as f64;
    let mut out = Vec::with_capacity(n * sphere.len());
    for shell in 0..n {
        let u = (shell as f64 + 0.5) / n as f64;
        let radius = r_max * u * u;
        let dr_du = 2.0 * r_max * u;
        let w_radial = dr_du / n as f64 * radius.powi(3);
        for (w0, w1) in &sphere {
            out.push(GridPoint {
                point: AffinePoint::new(
                    grid.center.z0() + w0 * c64(radius, 0.0),
                    grid.center.z1() + w1 * c64(radius, 0.0),
                ),
                weight: w_radial * w_sphere,
                shell,
            });
        }
    }
    out
}

fn check_grid_clear_of_degeneracies(m: &MonadData, grid: &GridSpec) -> Result<()> {
    for p in m.degeneracy_points() {
        if p.dist(&grid.center) <= grid.half_width {
            return Err(MonadError::GridContainsDegeneracy { point: p });
        }
    }
    Ok(())
}

/// Integral of the charge density over the grid divided by 8 pi^2.
///
/// Converges to the charge k as the grid covers C^2 (the density decays
/// like |z|^-8).  The reduction runs in fixed shell-major order so the
/// result is bit-identical across execution policies.
pub fn total_charge(m: &MonadData, grid: &GridSpec) -> Result<f64> {
    total_charge_with(m, grid, ExecPolicy::default())
}

pub fn total_charge_with(m: &MonadData, grid: &GridSpec, policy: ExecPolicy) -> Result<f64> {
    check_grid_clear_of_degeneracies(m, grid)?;
    let pts = grid_points(grid);
    let vals = map_points(policy, &pts, |gp| {
        charge_density_at(m, &gp.point).map(|d| d * gp.weight)
    });
    let mut acc = 0.0;
    for v in vals {
        acc += v?;
    }
    Ok(acc / (8.0 * std::f64::consts::PI.powi(2)))
}

/// Fraction of the total charge inside balls of the given radii about
/// `center`.  Radii must be strictly increasing; the result is monotone by
/// construction (cumulative sums of a nonnegative integrand).
pub fn concentration_profile(
    m: &MonadData,
    center: &AffinePoint,
    radii: &[f64],
) -> Result<Vec<f64>> {
    concentration_profile_with(m, center, radii, ExecPolicy::default())
}

pub fn concentration_profile_with(
    m: &MonadData,
    center: &AffinePoint,
    radii: &[f64],
    policy: ExecPolicy,
) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Ok(Vec::new());
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] <= 0.0 {
        return Err(MonadError::InvalidParameter {
            what: "radii must be positive and strictly increasing".into(),
        });
    }
    let total = total_charge_with(m, &GridSpec::default_for(m)?, policy)?;
    if !(total.abs() > 1e-12) {
        return Err(MonadError::InvalidParameter {
            what: "total charge vanishes; no profile".into(),
        });
    }
    let r_max = *radii.last().unwrap();
    // One graded radial grid out to r_max, cut at the requested radii.
    let shells_per_unit = 64.0 / r_max.min(64.0).max(1e-9);
    let n = ((r_max * shells_per_unit).ceil() as usize).clamp(64, 512);
    let grid = GridSpec::new(*center, r_max, n)?;
    check_grid_clear_of_degeneracies(m, &grid)?;
    let pts = grid_points(&grid);
    let vals = map_points(policy, &pts, |gp| {
        charge_density_at(m, &gp.point).map(|d| d * gp.weight)
    });
    let n_sphere = pts.len() / n;
    let mut cumulative = vec![0.0; n];
    let mut acc = 0.0;
    for (i, v) in vals.into_iter().enumerate() {
        acc += v?;
        let shell = i / n_sphere;
        cumulative[shell] = acc;
    }
    let shell_radius = |i: usize| -> f64 {
        let u = (i as f64 + 0.5) / n as f64;
        r_max * u * u
    };
    let norm = 8.0 * std::f64::consts::PI.powi(2) * total;
    let fractions = radii
        .iter()
        .map(|&rad| {
            let mut inside = 0.0;
            for i in 0..n {
                if shell_radius(i) <= rad {
                    inside = cumulative[i];
                }
            }
            inside / norm
        })
        .collect();
    Ok(fractions)
}

// --- finite-difference checks -------------------------------------------------

fn f_and_g(m: &MonadData, p: &AffinePoint) -> Result<(f64, f64)> {
    let psi = psi_at(m, p);
    let inv = inverse(&psi, "psi").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let tri = inv.trace().re;
    // log det of the Hermitian psi via its LU determinant (real positive).
    let det = psi.determinant().re;
    if !(tri > 0.0) || !(det > 0.0) {
        return Err(MonadError::SingularPsi { point: *p });
    }
    Ok((tri.powf(-0.5), det.ln()))
}

/// Central-difference gradients and Laplacians of f and g at `p`, compared
/// with the analytic right sides; the Laplacian sign convention is
/// Delta = -(sum of second derivatives along the 4 real axes).
pub fn lemma35_residuals(
    m: &MonadData,
    p: &AffinePoint,
    h: f64,
    params: Lemma36Params,
) -> Result<Lemma35Report> {
    if !(h > 0.0) {
        return Err(MonadError::InvalidParameter {
            what: format!("finite-difference step must be positive, got {h}"),
        });
    }
    let k = m.charge() as f64;
    let (f0, g0) = f_and_g(m, p)?;
    let phi = |f: f64, g: f64| f.powf(-params.p) * (params.c - g).powf(params.q);

    let offsets: [(C64, C64); 4] = [
        (c64(h, 0.0), c64(0.0, 0.0)),
        (c64(0.0, h), c64(0.0, 0.0)),
        (c64(0.0, 0.0), c64(h, 0.0)),
        (c64(0.0, 0.0), c64(0.0, h)),
    ];
    let mut grad_f2 = 0.0;
    let mut grad_g2 = 0.0;
    let mut lap_finv2 = 0.0;
    let mut lap_g = 0.0;
    let mut lap_phi = 0.0;
    let finv2_0 = f0.powi(-2);
    let phi_0 = phi(f0, g0);
    for (d0, d1) in offsets {
        let pp = AffinePoint::new(p.z0() + d0, p.z1() + d1);
        let pm = AffinePoint::new(p.z0() - d0, p.z1() - d1);
        let (fp, gp) = f_and_g(m, &pp)?;
        let (fm, gm) = f_and_g(m, &pm)?;
        grad_f2 += ((fp - fm) / (2.0 * h)).powi(2);
        grad_g2 += ((gp - gm) / (2.0 * h)).powi(2);
        lap_finv2 -= (fp.powi(-2) - 2.0 * finv2_0 + fm.powi(-2)) / (h * h);
        lap_g -= (gp - 2.0 * g0 + gm) / (h * h);
        lap_phi -= (phi(fp, gp) - 2.0 * phi_0 + phi(fm, gm)) / (h * h);
    }
    if !(grad_f2.is_finite() && lap_finv2.is_finite() && lap_g.is_finite() && lap_phi.is_finite()) {
        return Err(MonadError::NonFinite {
            what: "finite differences of f, g",
        });
    }

    let kk = m.charge();
    let sample = curvature_at(m, p)?;
    let psi_inv = inverse(&sample.psi, "psi").map_err(|_| MonadError::SingularPsi { point: *p })?;
    let p00 = sample.projector.view((0, 0), (kk, kk)).into_owned();
    let p11 = sample.projector.view((kk, kk), (kk, kk)).into_owned();
    let p_sum = &p00 + &p11;
    let rhs_b = 4.0 * (&psi_inv * &p_sum * &psi_inv).trace().re;
    let rhs_d = -4.0 * psi_inv.trace().re - 2.0 * (&psi_inv * &p_sum).trace().re;
    let rhs_36 =
        2.0 * params.q * f0.powf(-params.p - 2.0) * (params.c - g0).powf(params.q - 1.0);

    Ok(Lemma35Report {
        point: *p,
        f_value: f0,
        g_value: g0,
        check_a: grad_f2 <= k + LEMMA35_SLACK,
        check_c: grad_g2 <= 4.0 * k * f0.powi(-2) + LEMMA35_SLACK,
        residual_b: (lap_finv2 - rhs_b).abs(),
        residual_d: (lap_g - rhs_d).abs(),
        check_36: lap_phi >= rhs_36 - LEMMA35_SLACK,
    })
}

// --- exports ------------------------------------------------------------------

/// One CSV row per grid point, shell-major:
/// `x0,y0,x1,y1,density,f_norm,tr_psi_inv`.
pub fn field_csv(m: &MonadData, grid: &GridSpec) -> Result<String> {
    field_csv_with(m, grid, ExecPolicy::default())
}

pub fn field_csv_with(m: &MonadData, grid: &GridSpec, policy: ExecPolicy) -> Result<String> {
    check_grid_clear_of_degeneracies(m, grid)?;
    let pts = grid_points(grid);
    let rows = map_points(policy, &pts, |gp| -> Result<String> {
        let s = curvature_at(m, &gp.point)?;
        let tr_psi_inv = inverse(&s.psi, "psi")
            .map_err(|_| MonadError::SingularPsi { point: gp.point })?
            .trace()
            .re;
        Ok(format!(
            "{},{},{},{},{},{},{}",
            gp.point.z0.0, gp.point.z0.1, gp.point.z1.0, gp.point.z1.1,
            s.charge_density, s.f_norm, tr_psi_inv
        ))
    });
    let mut out = String::from("x0,y0,x1,y1,density,f_norm,tr_psi_inv\n");
    for row in rows {
        out.push_str(&row?);
        out.push('\n');
    }
    Ok(out)
}

/// JSON summary of a field evaluation: the total charge, the grid and the
/// residual maxima over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSummary {
    pub total_charge: f64,
    pub grid: GridSpec,
    pub max_density: f64,
    pub max_f_norm: f64,
    pub max_bound_violation: f64,
}

pub fn field_summary(m: &MonadData, grid: &GridSpec) -> Result<FieldSummary> {
    check_grid_clear_of_degeneracies(m, grid)?;
    let pts = grid_points(grid);
    let vals = map_points(ExecPolicy::default(), &pts, |gp| {
        curvature_at(m, &gp.point).map(|s| (s.charge_density, s.f_norm, s.f_norm_bound, gp.weight))
    });
    let mut total = 0.0;
    let mut max_density: f64 = 0.0;
    let mut max_f_norm: f64 = 0.0;
    let mut max_violation: f64 = 0.0;
    for v in vals {
        let (d, fnorm, bound, w) = v?;
        total += d * w;
        max_density = max_density.max(d);
        max_f_norm = max_f_norm.max(fnorm);
        max_violation = max_violation.max(fnorm - bound);
    }
    Ok(FieldSummary {
        total_charge: total / (8.0 * std::f64::consts::PI.powi(2)),
        grid: grid.clone(),
        max_density,
        max_f_norm,
        max_bound_violation: max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhm::MonadData;
    use crate::testutil::random_unitary_monad;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m0() -> MonadData {
        MonadData::basic_instanton(1.0)
    }

    #[test]
    fn psi_of_basic_instanton() {
        let m = m0();
        let p = psi_at(&m, &AffinePoint::origin());
        assert_relative_eq!(p[(0, 0)].re, 1.0);
        let p = psi_at(&m, &AffinePoint::new(c64(1.0, 0.0), c64(0.0, 0.0)));
        assert_relative_eq!(p[(0, 0)].re, 2.0);
    }

    #[test]
    fn psi_of_zero_data_is_flat() {
        let m = MonadData::new(
            2,
            1,
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::zeros(2, 1),
            CMat::zeros(1, 2),
        )
        .unwrap();
        let z = AffinePoint::new(c64(0.3, 0.4), c64(-1.0, 0.2));
        let p = psi_at(&m, &z);
        let expect = z.z0().norm_sqr() + z.z1().norm_sqr();
        assert_relative_eq!(p[(0, 0)].re, expect, max_relative = 1e-14);
    }

    #[test]
    fn projector_of_basic_instanton_at_origin() {
        let pi = projector_at(&m0(), &AffinePoint::origin()).unwrap();
        for (i, expect) in [1.0, 1.0, 0.0, 0.0].iter().enumerate() {
            assert_relative_eq!(pi[(i, i)].re, expect, epsilon = 1e-14);
        }
        assert!(frob(&(&pi * &pi - &pi)) < 1e-13);
    }

    #[test]
    fn projector_contracts_at_random_points() {
        let m = m0();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = AffinePoint::new(
                c64(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0),
                c64(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0),
            );
            let pi = projector_at(&m, &p).unwrap();
            let (a, _) = m.assemble(&p);
            assert!((pi.trace().re - 2.0).abs() < 1e-10);
            assert!(frob(&(&pi * &a)) < 1e-12);
        }
    }

    #[test]
    fn projector_errors_at_degeneracy() {
        let m = MonadData::new(
            2,
            1,
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::zeros(2, 1),
            CMat::zeros(1, 2),
        )
        .unwrap();
        assert!(matches!(
            projector_at(&m, &AffinePoint::origin()),
            Err(MonadError::SingularPsi { .. })
        ));
    }

    #[test]
    fn density_closed_form_profile() {
        // k=1 profile: 48 lam^4 / (lam^2 + |z|^2)^4.
        let m = m0();
        assert_relative_eq!(
            charge_density_at(&m, &AffinePoint::origin()).unwrap(),
            48.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            charge_density_at(&m, &AffinePoint::new(c64(1.0, 0.0), c64(0.0, 0.0))).unwrap(),
            3.0,
            max_relative = 1e-12
        );
        let lam = 0.6;
        let md = m.dilate(lam).unwrap();
        let z = AffinePoint::new(c64(0.2, -0.5), c64(0.7, 0.1));
        let r2 = z.z0().norm_sqr() + z.z1().norm_sqr();
        let expect = 48.0 * lam.powi(4) / (lam * lam + r2).powi(4);
        assert_relative_eq!(charge_density_at(&md, &z).unwrap(), expect, max_relative = 1e-10);
    }

    #[test]
    fn zero_data_is_flat_away_from_origin() {
        let m = MonadData::new(
            2,
            1,
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::zeros(2, 1),
            CMat::zeros(1, 2),
        )
        .unwrap();
        let p = AffinePoint::new(c64(1.0, 0.3), c64(-0.2, 0.5));
        assert!(charge_density_at(&m, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn basic_instanton_total_charge() {
        let m = m0();
        let grid = GridSpec::default_for(&m).unwrap();
        assert_relative_eq!(grid.half_width, 50.0, max_relative = 1e-12);
        let c = total_charge(&m, &grid).unwrap();
        assert!((c - 1.0).abs() < 0.02, "total {c}");
    }

    #[test]
    fn total_charge_policy_bit_identical() {
        let m = m0();
        let grid = GridSpec::new(AffinePoint::origin(), 30.0, 24).unwrap();
        let seq = total_charge_with(&m, &grid, ExecPolicy::Sequential).unwrap();
        let def = total_charge(&m, &grid).unwrap();
        assert_eq!(seq.to_bits(), def.to_bits());
    }

    #[test]
    fn total_charge_scale_and_translation_invariance() {
        let m = m0();
        let base = total_charge(&m, &GridSpec::default_for(&m).unwrap()).unwrap();
        let d = m.dilate(0.25).unwrap();
        let cd = total_charge(&d, &GridSpec::default_for(&d).unwrap()).unwrap();
        assert!((cd - base).abs() < 0.01, "dilate changed charge: {base} vs {cd}");
        let t = m.translate(c64(0.3, -0.1), c64(0.2, 0.4));
        let ct = total_charge(&t, &GridSpec::default_for(&t).unwrap()).unwrap();
        assert!((ct - base).abs() < 0.02, "translate changed charge: {base} vs {ct}");
    }

    #[test]
    fn total_charge_concentrated_k2() {
        let m = random_unitary_monad(2, 2, 0.12, 61);
        let c = total_charge(&m, &GridSpec::default_for(&m).unwrap()).unwrap();
        assert!((c - 2.0).abs() < 0.05, "k=2 total {c}");
    }

    #[test]
    fn grid_degeneracy_detection() {
        let m = MonadData::new(
            1,
            1,
            CMat::from_element(1, 1, c64(0.5, 0.0)),
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
        )
        .unwrap();
        // Degeneracy at (-0.5, 0): a grid around the origin must refuse.
        let grid = GridSpec::new(AffinePoint::origin(), 2.0, 8).unwrap();
        assert!(matches!(
            total_charge(&m, &grid),
            Err(MonadError::GridContainsDegeneracy { .. })
        ));
    }

    #[test]
    fn profile_of_basic_instanton() {
        let m = m0();
        let fr = concentration_profile(&m, &AffinePoint::origin(), &[1.0, 10.0, 45.0]).unwrap();
        assert!(fr.windows(2).all(|w| w[0] <= w[1]), "monotone {fr:?}");
        // closed form: fraction inside radius R is 1 - (1+3R^2)/(1+R^2)^3
        let closed = |rr: f64| {
            let x = rr * rr;
            1.0 - (1.0 + 3.0 * x) / (1.0 + x).powi(3)
        };
        assert!((fr[0] - closed(1.0)).abs() < 0.02, "{} vs {}", fr[0], closed(1.0));
        assert!(fr[2] > 0.999);
    }

    #[test]
    fn profile_concentrated_dilation() {
        let m = m0().dilate(0.01).unwrap();
        let fr = concentration_profile(&m, &AffinePoint::origin(), &[0.1]).unwrap();
        assert!(fr[0] >= 0.99, "concentrated profile {fr:?}");
    }

    #[test]
    fn profile_far_center_sees_no_charge() {
        let m = m0().translate(c64(5.0, 0.0), c64(0.0, 0.0));
        // the instanton now sits at (-5, 0); a unit ball at the origin is empty
        let fr = concentration_profile(&m, &AffinePoint::origin(), &[1.0]).unwrap();
        assert!(fr[0] <= 0.01, "{fr:?}");
    }

    #[test]
    fn lemma35_closed_form_at_origin() {
        let m = m0();
        let rep = lemma35_residuals(
            &m,
            &AffinePoint::origin(),
            1e-3,
            Lemma36Params::default_for_charge(1),
        )
        .unwrap();
        // both Delta f^-2 and its right side equal 8; Delta g and its exact
        // right side equal -8
        assert!(rep.residual_b < 1e-4, "residual_b {}", rep.residual_b);
        assert!(rep.residual_d < 1e-4, "residual_d {}", rep.residual_d);
        assert!(rep.check_a && rep.check_c && rep.check_36);
    }

    #[test]
    fn lemma35_on_commuting_two_instanton() {
        // a0 = diag(1, -1), a1 = 0, 't Hooft-style a2 and b2 with b2 a2 = 0
        // and b2 b2* = a2* a2.
        let mut a0 = CMat::zeros(2, 2);
        a0[(0, 0)] = c64(1.0, 0.0);
        a0[(1, 1)] = c64(-1.0, 0.0);
        let mut a2 = CMat::zeros(2, 2);
        a2[(0, 0)] = c64(1.0, 0.0);
        a2[(0, 1)] = c64(1.0, 0.0);
        let mut b2 = CMat::zeros(2, 2);
        b2[(0, 1)] = c64(1.0, 0.0);
        b2[(1, 1)] = c64(1.0, 0.0);
        let m = MonadData::new(2, 2, a0, CMat::zeros(2, 2), a2, b2).unwrap();
        assert!(m.monad_residual() < 1e-14);
        assert!(m.reality_residual() < 1e-14);
        assert!(m.degeneracy_points().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = AffinePoint::new(
                c64(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0),
                c64(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0),
            );
            let rep =
                lemma35_residuals(&m, &p, 1e-3, Lemma36Params::default_for_charge(2)).unwrap();
            assert!(rep.check_a && rep.check_c, "at {p:?}");
        }
    }

    #[test]
    fn f_norm_bound_everywhere_sampled() {
        let m = random_unitary_monad(2, 2, 0.3, 71);
        let grid = GridSpec::new(m.spectral_center(), 8.0, 12).unwrap();
        for gp in grid_points(&grid) {
            let s = curvature_at(&m, &gp.point).unwrap();
            assert!(
                s.f_norm <= s.f_norm_bound + 1e-6,
                "bound violated at {:?}: {} > {}",
                gp.point,
                s.f_norm,
                s.f_norm_bound
            );
            assert!(s.charge_density >= -1e-9);
        }
    }

    #[test]
    fn psi_consistency_with_reality_residual() {
        // |A*A - B B*| equals the reality matrix norm, point-independently.
        let m = random_unitary_monad(2, 3, 0.4, 81);
        let p = AffinePoint::new(c64(0.4, -0.7), c64(0.1, 0.9));
        let (a, b) = m.assemble(&p);
        let diff = frob(&(a.adjoint() * &a - &b * b.adjoint()));
        assert!(diff <= 10.0 * m.reality_residual() + 1e-12);
    }

    #[test]
    fn field_csv_shape() {
        let m = m0();
        let grid = GridSpec::new(AffinePoint::origin(), 5.0, 4).unwrap();
        let csv = field_csv(&m, &grid).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x0,y0,x1,y1,density,f_norm,tr_psi_inv");
        // 4 shells x 8 sphere points (m_angle=2 -> wait: target 8 -> m_angle=2, m_u=2)
        assert_eq!(lines.len() - 1, grid_points(&grid).len());
    }
}
