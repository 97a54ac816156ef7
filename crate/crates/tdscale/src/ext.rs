//! Integers extended by the two infinities, used as valuation bounds.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg};

use serde::{Deserialize, Serialize};

/// `NegInf < Fin(_) < PosInf`.
///
/// As a valuation bound, `Fin(k)` cuts out `p^k Z_p`, `NegInf` the whole line
/// and `PosInf` the zero subgroup. Addition uses `NegInf + PosInf = PosInf`:
/// a product with a forced-zero factor is zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ext {
    NegInf,
    Fin(i64),
    PosInf,
}

impl Ext {
    pub fn is_finite(self) -> bool {
        matches!(self, Ext::Fin(_))
    }

    pub fn fin(self) -> Option<i64> {
        match self {
            Ext::Fin(k) => Some(k),
            _ => None,
        }
    }

    pub fn shift(self, d: i64) -> Ext {
        match self {
            Ext::Fin(k) => Ext::Fin(k + d),
            e => e,
        }
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        match (self, rhs) {
            (Ext::PosInf, _) | (_, Ext::PosInf) => Ext::PosInf,
            (Ext::NegInf, _) | (_, Ext::NegInf) => Ext::NegInf,
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin(a + b),
        }
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        match self {
            Ext::NegInf => Ext::PosInf,
            Ext::PosInf => Ext::NegInf,
            Ext::Fin(k) => Ext::Fin(-k),
        }
    }
}

impl From<i64> for Ext {
    fn from(k: i64) -> Ext {
        Ext::Fin(k)
    }
}

impl PartialEq<i64> for Ext {
    fn eq(&self, other: &i64) -> bool {
        *self == Ext::Fin(*other)
    }
}

impl PartialOrd<i64> for Ext {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Ext::Fin(*other)))
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::NegInf => write!(f, "-inf"),
            Ext::PosInf => write!(f, "inf"),
            Ext::Fin(k) => write!(f, "{k}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_sum() {
        assert!(Ext::NegInf < Ext::Fin(-5));
        assert!(Ext::Fin(7) < Ext::PosInf);
        assert_eq!(Ext::NegInf + Ext::PosInf, Ext::PosInf);
        assert_eq!(Ext::Fin(2) + Ext::NegInf, Ext::NegInf);
        assert_eq!(Ext::Fin(2) + Ext::Fin(-3), Ext::Fin(-1));
        assert_eq!(-Ext::NegInf, Ext::PosInf);
    }
}
