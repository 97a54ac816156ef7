use std::fmt;
use std::ops::Mul;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::{Serialize, Serializer};

/// A positive rational number in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexRatio {
    num: BigUint,
    den: BigUint,
}

impl IndexRatio {
    /// Panics if either argument is zero.
    pub fn new(num: BigUint, den: BigUint) -> Self {
        assert!(num > BigUint::ZERO && den > BigUint::ZERO, "index ratio of zero");
        let g = num.gcd(&den);
        IndexRatio {
            num: num / &g,
            den: den / g,
        }
    }

    pub fn one() -> Self {
        IndexRatio {
            num: BigUint::one(),
            den: BigUint::one(),
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn denominator(&self) -> &BigUint {
        &self.den
    }

    pub fn inv(&self) -> Self {
        IndexRatio {
            num: self.den.clone(),
            den: self.num.clone(),
        }
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }
}

impl From<BigUint> for IndexRatio {
    fn from(n: BigUint) -> Self {
        IndexRatio::new(n, BigUint::one())
    }
}

impl Mul for &IndexRatio {
    type Output = IndexRatio;
    fn mul(self, rhs: &IndexRatio) -> IndexRatio {
        IndexRatio::new(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl fmt::Display for IndexRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for IndexRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
