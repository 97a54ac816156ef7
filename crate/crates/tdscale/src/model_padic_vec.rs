//! `Q_p^n` with box lattices and monomial automorphisms.

use num_bigint::BigUint;
use num_traits::Pow;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::monomial::{ascending_join, forward_meet, Monomial};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VecModel {
    pub p: u64,
    pub n: usize,
}

/// `∏ p^{k_i} Z_p`, where a coordinate bound may also be `NegInf` (the line)
/// or `PosInf` (zero).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxLattice {
    pub vals: Vec<Ext>,
}

impl BoxLattice {
    pub fn is_compact(&self) -> bool {
        !self.vals.contains(&Ext::NegInf)
    }

    pub fn is_open(&self) -> bool {
        !self.vals.contains(&Ext::PosInf)
    }
}

impl VecModel {
    pub fn new(p: u64, n: usize) -> Result<Self> {
        if !crate::is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if n == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        Ok(VecModel { p, n })
    }

    pub fn lattice(&self, vals: Vec<Ext>) -> Result<BoxLattice> {
        if vals.len() != self.n {
            return Err(Error::Invalid(format!(
                "box of length {} in Q_p^{}",
                vals.len(),
                self.n
            )));
        }
        Ok(BoxLattice { vals })
    }

    pub fn standard(&self) -> BoxLattice {
        BoxLattice {
            vals: vec![Ext::Fin(0); self.n],
        }
    }

    pub fn whole(&self) -> BoxLattice {
        BoxLattice {
            vals: vec![Ext::NegInf; self.n],
        }
    }

    pub fn trivial(&self) -> BoxLattice {
        BoxLattice {
            vals: vec![Ext::PosInf; self.n],
        }
    }

    pub fn check_auto(&self, a: &Monomial) -> Result<()> {
        if a.dim() != self.n {
            return Err(Error::UnsupportedAutomorphism(format!(
                "monomial of size {} on Q_p^{}",
                a.dim(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn apply(&self, a: &Monomial, u: &BoxLattice) -> BoxLattice {
        BoxLattice { vals: a.act(&u.vals) }
    }

    pub fn intersect(&self, u: &BoxLattice, v: &BoxLattice) -> BoxLattice {
        BoxLattice {
            vals: u.vals.iter().zip(&v.vals).map(|(a, b)| *a.max(b)).collect(),
        }
    }

    pub fn sum(&self, u: &BoxLattice, v: &BoxLattice) -> BoxLattice {
        BoxLattice {
            vals: u.vals.iter().zip(&v.vals).map(|(a, b)| *a.min(b)).collect(),
        }
    }

    /// `u ≤ v` as subgroups.
    pub fn le(&self, u: &BoxLattice, v: &BoxLattice) -> bool {
        u.vals.iter().zip(&v.vals).all(|(a, b)| a >= b)
    }

    /// `[V : U]` for `U ≤ V`.
    pub fn index(&self, v: &BoxLattice, u: &BoxLattice) -> Result<BigUint> {
        if !self.le(u, v) {
            return Err(Error::NotSubgroup("box is not contained in the larger box".into()));
        }
        let mut e: u64 = 0;
        for (a, b) in u.vals.iter().zip(&v.vals) {
            match (a, b) {
                (Ext::Fin(x), Ext::Fin(y)) => e += (x - y) as u64,
                _ if a == b => {}
                _ => return Err(Error::InfiniteIndex),
            }
        }
        Ok(BigUint::from(self.p).pow(e))
    }

    pub fn product_equals(&self, u: &BoxLattice, a: &BoxLattice, b: &BoxLattice) -> bool {
        self.sum(a, b) == *u
    }

    pub fn forward_limit(&self, u: &BoxLattice, a: &Monomial) -> BoxLattice {
        BoxLattice {
            vals: forward_meet(a, &u.vals),
        }
    }

    pub fn ascending_limit(&self, u: &BoxLattice, a: &Monomial) -> BoxLattice {
        BoxLattice {
            vals: ascending_join(a, &u.vals),
        }
    }

    fn by_drift(&self, a: &Monomial, keep: impl Fn(i64) -> bool) -> BoxLattice {
        BoxLattice {
            vals: a
                .drift()
                .into_iter()
                .map(|(_, d)| if keep(d) { Ext::NegInf } else { Ext::PosInf })
                .collect(),
        }
    }

    /// Contraction group: the lines on cycles with positive drift. Always closed.
    pub fn con(&self, a: &Monomial) -> BoxLattice {
        self.by_drift(a, |d| d > 0)
    }

    pub fn parabolic(&self, a: &Monomial) -> BoxLattice {
        self.by_drift(a, |d| d >= 0)
    }

    pub fn levi(&self, a: &Monomial) -> BoxLattice {
        self.by_drift(a, |d| d == 0)
    }

    /// Closed form `(s(a), s(a⁻¹))`.
    pub fn scale(&self, a: &Monomial) -> (BigUint, BigUint) {
        let (mut up, mut down) = (0u64, 0u64);
        for c in a.cycles() {
            let d: i64 = c.iter().map(|&i| a.val[i]).sum();
            if d < 0 {
                up += d.unsigned_abs();
            } else {
                down += d as u64;
            }
        }
        let p = BigUint::from(self.p);
        (p.clone().pow(up), p.pow(down))
    }

    /// Membership of an element given by its coordinate valuations.
    pub fn contains(&self, u: &BoxLattice, x: &[Ext]) -> bool {
        x.iter().zip(&u.vals).all(|(xv, k)| xv >= k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[i64]) -> BoxLattice {
        BoxLattice {
            vals: v.iter().map(|&k| Ext::Fin(k)).collect(),
        }
    }

    #[test]
    fn scalar_p_contracts() {
        let m = VecModel::new(5, 3).unwrap();
        let a = Monomial::diag(vec![1, 1, 1]);
        assert_eq!(m.apply(&a, &m.standard()), b(&[1, 1, 1]));
        let (s, si) = m.scale(&a);
        assert_eq!(s, BigUint::from(1u32));
        assert_eq!(si, BigUint::from(125u32));
    }

    #[test]
    fn diag_p_pinv() {
        let m = VecModel::new(3, 2).unwrap();
        let a = Monomial::diag(vec![1, -1]);
        assert_eq!(m.scale(&a), (BigUint::from(3u32), BigUint::from(3u32)));
        assert_eq!(m.con(&a).vals, vec![Ext::NegInf, Ext::PosInf]);
        assert_eq!(m.parabolic(&a).vals, vec![Ext::NegInf, Ext::PosInf]);
        let u = m.standard();
        assert_eq!(m.forward_limit(&u, &a).vals, vec![Ext::PosInf, Ext::Fin(0)]);
        assert_eq!(m.forward_limit(&u, &a.inverse()).vals, vec![Ext::Fin(0), Ext::PosInf]);
    }

    #[test]
    fn index_of_boxes() {
        let m = VecModel::new(7, 2).unwrap();
        assert_eq!(m.index(&b(&[0, 0]), &b(&[1, 2])).unwrap(), BigUint::from(343u32));
        assert_eq!(
            m.index(&b(&[1, 0]), &b(&[0, 0])),
            Err(Error::NotSubgroup("box is not contained in the larger box".into()))
        );
        let half = BoxLattice {
            vals: vec![Ext::Fin(0), Ext::PosInf],
        };
        assert_eq!(m.index(&b(&[0, 0]), &half), Err(Error::InfiniteIndex));
    }

    #[test]
    fn con_of_weighted_diagonal() {
        // beta multiplies coordinate i (1-based) by p^{i-2}
        let m = VecModel::new(2, 4).unwrap();
        let beta = Monomial::diag(vec![-1, 0, 1, 2]);
        use Ext::*;
        assert_eq!(m.con(&beta).vals, vec![PosInf, PosInf, NegInf, NegInf]);
        assert_eq!(m.con(&beta.inverse()).vals, vec![NegInf, PosInf, PosInf, PosInf]);
    }
}
