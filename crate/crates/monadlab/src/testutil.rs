//! Seeded generators for monad data, used by the test suites and benches.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adhm::{MonadData, UnitarizeOptions};
use crate::linalg::{c64, eigen_pairs, frob, random_cmat, C64, CMat};

/// Random data satisfying the monad condition a1 a0 - a0 a1 + b2 a2 = 0.
///
/// For r >= k, b2 is solved from the commutator through the pseudo-inverse
/// of a random full-rank a2 (plus a kernel part for genericity).  For k > r
/// the commutator equation is solved for a0 in the eigenbasis of a1 after
/// correcting a2 so that the right side has vanishing diagonal there.
/// Retries with fresh randomness if the draw comes out degenerate.
pub fn random_monad_condition(k: usize, r: usize, scale: f64, seed: u64) -> MonadData {
    for attempt in 0..32 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt * 0x9e37));
        let m = if r >= k {
            monad_condition_wide(&mut rng, k, r, scale)
        } else {
            monad_condition_tall(&mut rng, k, r, scale)
        };
        if let Some(m) = m {
            if m.monad_residual() < 1e-9 && m.degeneracy_points().is_empty() {
                return m;
            }
        }
    }
    panic!("could not generate nondegenerate monad-condition data for k={k}, r={r}");
}

/// Random valid *unitary* nondegenerate monad: a monad-condition draw pushed
/// to the zero set of the moment map by `unitarize`.
pub fn random_unitary_monad(k: usize, r: usize, scale: f64, seed: u64) -> MonadData {
    for attempt in 0..16 {
        let m = random_monad_condition(k, r, scale, seed.wrapping_add(attempt * 0x51ed));
        if let Ok(u) = m.unitarize(UnitarizeOptions {
            max_iter: 4000,
            tol: 1e-11,
        }) {
            if u.degeneracy_points().is_empty() {
                return u;
            }
        }
    }
    panic!("could not generate unitary monad for k={k}, r={r}");
}

fn monad_condition_wide(rng: &mut ChaCha8Rng, k: usize, r: usize, scale: f64) -> Option<MonadData> {
    let a0 = random_cmat(rng, k, k, scale);
    let a1 = random_cmat(rng, k, k, scale);
    let a2 = random_cmat(rng, r, k, scale);
    let pinv = a2.clone().svd(true, true).pseudo_inverse(1e-12).ok()?;
    let comm = &a0 * &a1 - &a1 * &a0;
    let mut b2 = &comm * &pinv;
    // kernel part keeps b2 generic without touching b2 a2
    let y = random_cmat(rng, k, r, scale);
    b2 += &y * (CMat::identity(r, r) - &a2 * &pinv);
    MonadData::new(r, k, a0, a1, a2, b2).ok()
}

fn monad_condition_tall(rng: &mut ChaCha8Rng, k: usize, r: usize, scale: f64) -> Option<MonadData> {
    let a1 = random_cmat(rng, k, k, scale);
    let b2 = random_cmat(rng, k, r, scale);
    let mut a2 = random_cmat(rng, r, k, scale);
    let pairs = eigen_pairs(&a1);
    let lam: Vec<C64> = pairs.iter().map(|(l, _)| *l).collect();
    let p = CMat::from_columns(&pairs.into_iter().map(|(_, v)| v).collect::<Vec<_>>());
    let pi = p.clone().try_inverse()?;

    // Correct a2 so that diag(P^-1 (-b2 a2) P) = 0: k linear equations in
    // the r*k entries of a correction d, solved in least squares.
    let u = &pi * &b2; // k x r
    let mut rows = DMatrix::<C64>::zeros(k, r * k);
    for i in 0..k {
        for a in 0..r {
            for b in 0..k {
                rows[(i, a * k + b)] = u[(i, a)] * p[(b, i)];
            }
        }
    }
    let mt = &pi * (-(&b2 * &a2)) * &p;
    let rhs = nalgebra::DVector::<C64>::from_iterator(k, (0..k).map(|i| mt[(i, i)]));
    let d = rows.svd(true, true).solve(&rhs, 1e-12).ok()?;
    for a in 0..r {
        for b in 0..k {
            a2[(a, b)] += d[a * k + b];
        }
    }

    // With the diagonal killed, a0 = P X P^-1 with X_ij = Mt_ij/(lam_i - lam_j).
    let mt = &pi * (-(&b2 * &a2)) * &p;
    let mut x = CMat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let den = lam[i] - lam[j];
                if den.norm() < 1e-10 {
                    return None;
                }
                x[(i, j)] = mt[(i, j)] / den;
            }
        }
    }
    for i in 0..k {
        x[(i, i)] = c64(scale, 0.0) * random_cmat(rng, 1, 1, 1.0)[(0, 0)];
    }
    let a0 = &p * x * &pi;
    MonadData::new(r, k, a0, a1, a2, b2).ok()
}

/// Rescale unitary data so that |a0| + |a1| + |a2| <= bound (dilation
/// preserves both the monad and reality conditions).
pub fn shrink_to_norm_bound(m: &MonadData, bound: f64) -> MonadData {
    let s = frob(m.a0()) + frob(m.a1()) + frob(m.a2());
    if s <= bound {
        m.clone()
    } else {
        m.dilate(bound / s).expect("positive dilation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_and_tall_generators() {
        for (k, r, seed) in [(1, 2, 1), (2, 2, 2), (2, 3, 3), (3, 2, 4), (3, 3, 5)] {
            let m = random_monad_condition(k, r, 0.4, seed);
            assert!(m.monad_residual() < 1e-9, "k={k} r={r}");
            assert!(m.degeneracy_points().is_empty());
        }
    }

    #[test]
    fn unitary_generator_reaches_zero_set() {
        let m = random_unitary_monad(2, 2, 0.4, 7);
        assert!(m.reality_residual() <= 1e-11);
        assert!(m.monad_residual() < 1e-11);
    }
}
