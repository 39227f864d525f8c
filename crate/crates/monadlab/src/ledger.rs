//! Exact arithmetic for charges, degrees, blowup volumes and blowup budgets.
//!
//! Everything in this module is computed over arbitrary-precision rationals;
//! no floating point enters.  The charge of an r-bundle is
//! C = c2 - (r-1)/(2r) c1^2, with c1^2 taken in the intersection form
//! (base Gram matrix) + diag(-1, ..., -1) on the exceptional classes.
//!
//! Orientation: the i-th exceptional basis class is the one written O(1) =
//! O(-L_i) in the blowup construction; it has self-intersection -1 and pairs
//! to +alpha_i against the metric class.  Note that for surfaces with odd
//! first Betti number the degree depends on the metric representative and
//! not only on c1; the ledger models only the cohomological pairing.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{MonadError, Result};

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// Topological data of a bundle: rank, c1 in a fixed basis of H^2 (base
/// classes followed by exceptional classes) and rational c2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleTopology {
    pub rank: u32,
    /// Integer c1 vector, base entries first.
    pub c1: Vec<i64>,
    /// Symmetric Gram matrix of the base classes (row-major square).
    pub base_gram: Vec<Vec<i64>>,
    /// Number of exceptional classes; c1.len() = base_gram.len() + this.
    pub exceptional: usize,
    #[serde(with = "rational_string")]
    pub c2: Rat,
}

impl BundleTopology {
    pub fn new(
        rank: u32,
        c1: Vec<i64>,
        base_gram: Vec<Vec<i64>>,
        exceptional: usize,
        c2: Rat,
    ) -> Result<Self> {
        if rank == 0 {
            return Err(MonadError::InvalidParameter {
                what: "bundle rank must be positive".into(),
            });
        }
        let nb = base_gram.len();
        if base_gram.iter().any(|row| row.len() != nb) {
            return Err(MonadError::InvalidParameter {
                what: "base Gram matrix must be square".into(),
            });
        }
        for i in 0..nb {
            for j in 0..nb {
                if base_gram[i][j] != base_gram[j][i] {
                    return Err(MonadError::InvalidParameter {
                        what: "base Gram matrix must be symmetric".into(),
                    });
                }
            }
        }
        if c1.len() != nb + exceptional {
            return Err(MonadError::InvalidParameter {
                what: format!(
                    "c1 has {} entries, expected {} base + {} exceptional",
                    c1.len(),
                    nb,
                    exceptional
                ),
            });
        }
        Ok(BundleTopology {
            rank,
            c1,
            base_gram,
            exceptional,
            c2,
        })
    }

    /// A bundle on the minimal surface with one base class of given
    /// self-intersection.
    pub fn on_base(rank: u32, c1_base: i64, self_intersection: i64, c2: Rat) -> Self {
        BundleTopology {
            rank,
            c1: vec![c1_base],
            base_gram: vec![vec![self_intersection]],
            exceptional: 0,
            c2,
        }
    }

    fn base_dim(&self) -> usize {
        self.base_gram.len()
    }

    /// c1 . c1 under (base Gram) + diag(-1).
    pub fn c1_squared(&self) -> Rat {
        let nb = self.base_dim();
        let mut acc = Rat::zero();
        for i in 0..nb {
            for j in 0..nb {
                acc += rat_int(self.c1[i]) * rat_int(self.base_gram[i][j]) * rat_int(self.c1[j]);
            }
        }
        for e in &self.c1[nb..] {
            acc -= rat_int(*e) * rat_int(*e);
        }
        acc
    }

    /// Twist by a line bundle with first Chern class `l` (same basis):
    /// c1 -> c1 + r l, c2 -> c2 + (r-1) c1.l + r(r-1)/2 l^2.
    pub fn twist(&self, l: &[i64]) -> Result<BundleTopology> {
        if l.len() != self.c1.len() {
            return Err(MonadError::InvalidParameter {
                what: "twist class has wrong dimension".into(),
            });
        }
        let r = rat_int(self.rank as i64);
        let c1_dot_l = self.pair(&self.c1, l);
        let l_topo = BundleTopology {
            rank: 1,
            c1: l.to_vec(),
            base_gram: self.base_gram.clone(),
            exceptional: self.exceptional,
            c2: Rat::zero(),
        };
        let l2 = l_topo.c1_squared();
        let mut c1 = self.c1.clone();
        for (ci, li) in c1.iter_mut().zip(l.iter()) {
            *ci += self.rank as i64 * li;
        }
        let c2 = self.c2.clone()
            + (r.clone() - rat_int(1)) * c1_dot_l
            + r.clone() * (r - rat_int(1)) / rat_int(2) * l2;
        Ok(BundleTopology {
            rank: self.rank,
            c1,
            base_gram: self.base_gram.clone(),
            exceptional: self.exceptional,
            c2,
        })
    }

    /// Intersection pairing of two vectors in this basis.
    pub fn pair(&self, x: &[i64], y: &[i64]) -> Rat {
        let nb = self.base_dim();
        let mut acc = Rat::zero();
        for i in 0..nb {
            for j in 0..nb {
                acc += rat_int(x[i]) * rat_int(self.base_gram[i][j]) * rat_int(y[j]);
            }
        }
        for i in nb..x.len() {
            acc -= rat_int(x[i]) * rat_int(y[i]);
        }
        acc
    }
}

/// Degrees of the base classes against omega plus positive exceptional
/// weights alpha_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricClass {
    #[serde(with = "rational_vec_string")]
    pub omega_pairing: Vec<Rat>,
    #[serde(with = "rational_vec_string")]
    pub alpha: Vec<Rat>,
}

impl MetricClass {
    pub fn new(omega_pairing: Vec<Rat>, alpha: Vec<Rat>) -> Result<Self> {
        if alpha.iter().any(|a| !a.is_positive()) {
            return Err(MonadError::InvalidParameter {
                what: "all exceptional weights alpha_i must be positive".into(),
            });
        }
        Ok(MetricClass {
            omega_pairing,
            alpha,
        })
    }
}

/// C(E) = c2 - (r-1)/(2r) c1^2.
pub fn charge_of(t: &BundleTopology) -> Rat {
    let r = rat_int(t.rank as i64);
    t.c2.clone() - (r.clone() - rat_int(1)) / (rat_int(2) * r) * t.c1_squared()
}

/// C(E (x) A) = a C(E) + r C(A) for a = rank(A), r = rank(E).
pub fn tensor_charge(e: &BundleTopology, a: &BundleTopology) -> Rat {
    rat_int(a.rank as i64) * charge_of(e) + rat_int(e.rank as i64) * charge_of(a)
}

/// Pull back to a blowup at n further points: c1 extends by n zeros and the
/// form by diag(-1)^n; the charge is unchanged.
pub fn blowup_topology(t: &BundleTopology, n: usize) -> BundleTopology {
    let mut c1 = t.c1.clone();
    c1.extend(std::iter::repeat(0).take(n));
    BundleTopology {
        rank: t.rank,
        c1,
        base_gram: t.base_gram.clone(),
        exceptional: t.exceptional + n,
        c2: t.c2.clone(),
    }
}

/// Vol(X~, omega_alpha) = V - |alpha|^2 / 2; errors when the drop exhausts
/// the volume (alpha not suitable at this volume).
pub fn volume_after_blowup(v: &Rat, mc: &MetricClass) -> Result<Rat> {
    let mut drop = Rat::zero();
    for a in &mc.alpha {
        drop += a.clone() * a.clone();
    }
    let out = v.clone() - drop / rat_int(2);
    if !out.is_positive() {
        return Err(MonadError::InvalidParameter {
            what: format!("volume {v} exhausted by blowup weights (result {out})"),
        });
    }
    Ok(out)
}

/// Which blowup budget applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetTheorem {
    /// n <= 2 C(E_top) - 2 C(E) - 1
    General,
    /// n <= 2 C(E_top) - 1 (rank-2 bundles)
    Rank2,
}

/// Integer floor of the blowup bound, clamped at zero.
pub fn blowup_budget(c_top: &Rat, c_limit: &Rat, theorem: BudgetTheorem) -> Result<u64> {
    let bound = match theorem {
        BudgetTheorem::General => {
            if c_top < c_limit {
                return Err(MonadError::InvalidParameter {
                    what: format!("need C_top >= C_limit, got {c_top} < {c_limit}"),
                });
            }
            rat_int(2) * c_top.clone() - rat_int(2) * c_limit.clone() - rat_int(1)
        }
        BudgetTheorem::Rank2 => {
            if c_top.is_negative() {
                return Err(MonadError::InvalidParameter {
                    what: format!("need C_top >= 0, got {c_top}"),
                });
            }
            rat_int(2) * c_top.clone() - rat_int(1)
        }
    };
    if bound.is_negative() {
        return Ok(0);
    }
    let fl = bound.floor().to_integer();
    Ok(u64::try_from(fl).unwrap_or(0))
}

/// deg(c1) = (base part) . omega + sum_i c1_exc_i alpha_i.
pub fn degree(c1: &[i64], t_base_dim: usize, mc: &MetricClass) -> Result<Rat> {
    if t_base_dim != mc.omega_pairing.len() || c1.len() != t_base_dim + mc.alpha.len() {
        return Err(MonadError::InvalidParameter {
            what: format!(
                "degree: c1 has {} entries, metric expects {} base + {} exceptional",
                c1.len(),
                mc.omega_pairing.len(),
                mc.alpha.len()
            ),
        });
    }
    let mut acc = Rat::zero();
    for (ci, w) in c1[..t_base_dim].iter().zip(&mc.omega_pairing) {
        acc += rat_int(*ci) * w.clone();
    }
    for (ci, a) in c1[t_base_dim..].iter().zip(&mc.alpha) {
        acc += rat_int(*ci) * a.clone();
    }
    Ok(acc)
}

// serde helpers: rationals as "n/d" strings so exactness survives JSON.
mod rational_string {
    use super::Rat;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let text = String::deserialize(d)?;
        Rat::from_str(&text).map_err(serde::de::Error::custom)
    }
}

mod rational_vec_string {
    use super::Rat;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&r.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let texts: Vec<String> = Vec::deserialize(d)?;
        texts
            .iter()
            .map(|t| Rat::from_str(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2_bundle(rank: u32, c1: i64, c2: Rat) -> BundleTopology {
        // base = hyperplane class on the plane, self-intersection +1
        BundleTopology::on_base(rank, c1, 1, c2)
    }

    #[test]
    fn charge_trivial_cases() {
        assert_eq!(charge_of(&p2_bundle(2, 0, rat_int(1))), rat_int(1));
        // one exceptional class, self-intersection -1: C = 0 - (1/4)(-1) = 1/4
        let t = BundleTopology::new(2, vec![0, 1], vec![vec![1]], 1, Rat::zero()).unwrap();
        assert_eq!(charge_of(&t), rat(1, 4));
    }

    #[test]
    fn charge_invariant_under_twist() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = BundleTopology::new(
                2 + rng.gen_range(0..3),
                vec![
                    rng.gen_range(-3..4),
                    rng.gen_range(-3..4),
                    rng.gen_range(-3..4),
                ],
                vec![vec![1]],
                2,
                rat(rng.gen_range(-6..7), 1 + rng.gen_range(0..3)),
            )
            .unwrap();
            let l = vec![
                rng.gen_range(-2..3),
                rng.gen_range(-2..3),
                rng.gen_range(-2..3),
            ];
            let tw = t.twist(&l).unwrap();
            assert_eq!(charge_of(&tw), charge_of(&t), "twist by {l:?}");
        }
    }

    #[test]
    fn tensor_charge_formula_and_oracle() {
        // E = A of rank 2 and charge 1 each: 2*1 + 2*1 = 4.
        let e = p2_bundle(2, 0, rat_int(1));
        assert_eq!(tensor_charge(&e, &e), rat_int(4));
        // line bundle leaves the charge fixed
        let l = p2_bundle(1, 3, Rat::zero());
        assert_eq!(charge_of(&l), Rat::zero() - rat_int(0));
        assert_eq!(tensor_charge(&e, &l), charge_of(&e));

        // oracle: direct Chern classes of a tensor product for rank x rank
        // via ch(E (x) A) = ch(E) ch(A) truncated in degree 2:
        // c1 = a c1E + r c1A,
            // ch2 = r ch2A + c1E.c1A + a ch2E, c2 = (c1^2 - 2 ch2)/2.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let re = 1 + rng.gen_range(0..3) as u32;
            let ra = 1 + rng.gen_range(0..3) as u32;
            let e = p2_bundle(re, rng.gen_range(-3..4), rat(rng.gen_range(-5..6), 1));
            let a = p2_bundle(ra, rng.gen_range(-3..4), rat(rng.gen_range(-5..6), 1));
            let ch2 = |t: &BundleTopology| {
                (t.c1_squared() - rat_int(2) * t.c2.clone()) / rat_int(2)
            };
            let c1_t = (ra as i64) * e.c1[0] + (re as i64) * a.c1[0];
            let ch2_t = rat_int(re as i64) * ch2(&a)
                + rat_int(e.c1[0]) * rat_int(a.c1[0])
                + rat_int(ra as i64) * ch2(&e);
            let c2_t = (rat_int(c1_t) * rat_int(c1_t) - rat_int(2) * ch2_t) / rat_int(2);
            let tprod = p2_bundle(re * ra, c1_t, c2_t);
            assert_eq!(
                charge_of(&tprod),
                tensor_charge(&e, &a),
                "tensor oracle mismatch"
            );
        }
    }

    #[test]
    fn blowup_preserves_charge_and_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t = BundleTopology::new(
                1 + rng.gen_range(0..4),
                vec![rng.gen_range(-3..4), rng.gen_range(-3..4)],
                vec![vec![1]],
                1,
                rat(rng.gen_range(-6..7), 1 + rng.gen_range(0..4)),
            )
            .unwrap();
            let n = rng.gen_range(0..5);
            let up = blowup_topology(&t, n);
            assert_eq!(charge_of(&up), charge_of(&t));
            assert_eq!(up.rank, t.rank);
            assert_eq!(up.c1.len(), t.c1.len() + n);
        }
        let t = p2_bundle(2, 1, rat_int(2));
        assert_eq!(blowup_topology(&t, 0), t);
    }

    #[test]
    fn volume_drops_by_half_alpha_squared() {
        let mc = MetricClass::new(vec![rat_int(1)], vec![rat_int(1)]).unwrap();
        assert_eq!(
            volume_after_blowup(&rat_int(10), &mc).unwrap(),
            rat(19, 2)
        );
        let empty = MetricClass::new(vec![rat_int(1)], vec![]).unwrap();
        assert_eq!(volume_after_blowup(&rat_int(10), &empty).unwrap(), rat_int(10));
        let halves = MetricClass::new(vec![rat_int(1)], vec![rat(1, 2), rat(1, 2)]).unwrap();
        assert_eq!(volume_after_blowup(&rat_int(1), &halves).unwrap(), rat(3, 4));
        // exhausting the volume errors
        let big = MetricClass::new(vec![rat_int(1)], vec![rat_int(2)]).unwrap();
        assert!(volume_after_blowup(&rat_int(2), &big).is_err());
    }

    #[test]
    fn budget_values_and_clamp() {
        assert_eq!(
            blowup_budget(&rat_int(2), &rat_int(0), BudgetTheorem::General).unwrap(),
            3
        );
        assert_eq!(
            blowup_budget(&rat_int(2), &rat_int(0), BudgetTheorem::Rank2).unwrap(),
            3
        );
        assert_eq!(
            blowup_budget(&rat_int(2), &rat_int(2), BudgetTheorem::General).unwrap(),
            0
        );
        assert!(blowup_budget(&rat_int(1), &rat_int(2), BudgetTheorem::General).is_err());
    }

    #[test]
    fn budget_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = rat(rng.gen_range(0..8), 1 + rng.gen_range(0..3));
            let b = rat(rng.gen_range(0..8), 1 + rng.gen_range(0..3));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let n1 = blowup_budget(&hi, &lo, BudgetTheorem::General).unwrap();
            let n2 = blowup_budget(&(hi.clone() + rat_int(1)), &lo, BudgetTheorem::General).unwrap();
            assert!(n2 >= n1);
            let n3 = blowup_budget(&(hi.clone() + rat_int(1)), &hi, BudgetTheorem::General).unwrap();
            assert!(n3 <= n2);
        }
    }

    #[test]
    fn degree_pairing() {
        let mc = MetricClass::new(vec![rat_int(3)], vec![rat(1, 2)]).unwrap();
        assert_eq!(degree(&[0, 0], 1, &mc).unwrap(), Rat::zero());
        assert_eq!(degree(&[1, 0], 1, &mc).unwrap(), rat_int(3));
        // pull-back class: degree independent of alpha
        let mc2 = MetricClass::new(vec![rat_int(3)], vec![rat(1, 7)]).unwrap();
        assert_eq!(
            degree(&[2, 0], 1, &mc).unwrap(),
            degree(&[2, 0], 1, &mc2).unwrap()
        );
        // exceptional entry pairs to +alpha
        assert_eq!(degree(&[0, 1], 1, &mc).unwrap(), rat(1, 2));
        assert!(degree(&[1], 1, &mc).is_err());
    }

    #[test]
    fn metric_class_requires_positive_alpha() {
        assert!(MetricClass::new(vec![], vec![Rat::zero()]).is_err());
    }

    #[test]
    fn rational_serde_round_trip() {
        let t = BundleTopology::new(2, vec![1, -2], vec![vec![1]], 1, rat(7, 3)).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: BundleTopology = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
