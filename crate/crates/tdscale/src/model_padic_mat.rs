//! `SL_n(Q_p)` with valuation-pattern subgroups and monomial conjugation.
//!
//! A pattern `M` cuts out `{g : v(g_ij) ≥ M_ij for i ≠ j}` together with a
//! diagonal condition: `Units` (`v(g_ii) ≥ 0`) or `One` (`g_ii = 1`, used for
//! unipotent groups such as root subgroups and contraction groups).

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{unrepresentable, Error, Result};
use crate::ext::Ext;
use crate::monomial::{ascending_join, forward_meet, Monomial};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatModel {
    pub p: u64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Diag {
    Units,
    One,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern {
    /// Row-major `n × n`; diagonal entries are stored as `Fin(0)` and ignored.
    pub m: Vec<Vec<Ext>>,
    pub diag: Diag,
}

impl Pattern {
    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Ext {
        self.m[i][j]
    }

    fn off_diag(&self) -> Vec<Ext> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out.push(self.m[i][j]);
                }
            }
        }
        out
    }

    fn from_off_diag(n: usize, v: &[Ext], diag: Diag) -> Pattern {
        let mut m = vec![vec![Ext::Fin(0); n]; n];
        let mut it = v.iter();
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                if i != j {
                    *e = *it.next().expect("entry count");
                }
            }
        }
        Pattern { m, diag }
    }

    pub fn is_compact(&self) -> bool {
        !self.off_diag().contains(&Ext::NegInf)
    }

    pub fn is_open(&self) -> bool {
        self.diag == Diag::Units && self.off_diag().iter().all(|e| e.is_finite())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .m
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cells: Vec<String> = r
                    .iter()
                    .enumerate()
                    .map(|(j, e)| if i == j { "*".to_string() } else { e.to_string() })
                    .collect();
                cells.join(" ")
            })
            .collect();
        let d = match self.diag {
            Diag::Units => "units",
            Diag::One => "one",
        };
        write!(f, "[{}; diag={d}]", rows.join(" | "))
    }
}

/// `[b]_p! = ∏_{k=1}^{b} (p^k − 1)/(p − 1)`.
fn q_factorial(p: &BigUint, b: usize) -> BigUint {
    let mut acc = BigUint::one();
    let pm1 = p - BigUint::one();
    for k in 1..=b {
        acc *= (p.pow(k as u32) - BigUint::one()) / &pm1;
    }
    acc
}

/// Haar measure as an exact rational `p^exp · num / den` in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Measure {
    num: BigUint,
    den: BigUint,
}

impl Measure {
    fn mul(&self, o: &Measure) -> Measure {
        Measure {
            num: &self.num * &o.num,
            den: &self.den * &o.den,
        }
    }

    fn same(&self, o: &Measure) -> bool {
        &self.num * &o.den == &o.num * &self.den
    }
}

impl MatModel {
    pub fn new(p: u64, n: usize) -> Result<Self> {
        if !crate::is_prime(p) {
            return Err(Error::Invalid(format!("{p} is not prime")));
        }
        if n < 2 {
            return Err(Error::Invalid("SL_n needs n ≥ 2".into()));
        }
        Ok(MatModel { p, n })
    }

    fn big_p(&self) -> BigUint {
        BigUint::from(self.p)
    }

    pub fn pattern(&self, m: Vec<Vec<Ext>>, diag: Diag) -> Result<Pattern> {
        let n = self.n;
        if m.len() != n || m.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(format!("pattern must be {n}×{n}")));
        }
        let mut m = m;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Ext::Fin(0);
        }
        let pat = Pattern { m, diag };
        self.validate(&pat)?;
        Ok(pat)
    }

    pub fn validate(&self, pat: &Pattern) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let pair = pat.m[i][j] + pat.m[j][i];
                match pat.diag {
                    Diag::Units if pair < Ext::Fin(0) => {
                        return Err(Error::NotSubgroup(format!(
                            "entries ({i},{j}) and ({j},{i}) sum below 0"
                        )))
                    }
                    Diag::One if pair != Ext::PosInf => {
                        return Err(Error::NotSubgroup(format!(
                            "unipotent pattern has both ({i},{j}) and ({j},{i}) nonzero"
                        )))
                    }
                    _ => {}
                }
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    if pat.m[i][k] > pat.m[i][j] + pat.m[j][k] {
                        return Err(Error::NotSubgroup(format!("triangle condition fails at ({i},{j},{k})")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `SL_n(Z_p)`.
    pub fn standard(&self) -> Pattern {
        Pattern {
            m: vec![vec![Ext::Fin(0); self.n]; self.n],
            diag: Diag::Units,
        }
    }

    /// Iwahori subgroup: `a_ij ∈ pZ_p` for `i > j`.
    pub fn iwahori(&self) -> Pattern {
        let n = self.n;
        let m = (0..n)
            .map(|i| (0..n).map(|j| Ext::Fin(if i > j { 1 } else { 0 })).collect())
            .collect();
        Pattern { m, diag: Diag::Units }
    }

    /// Diagonal matrices with unit entries.
    pub fn diagonal_units(&self) -> Pattern {
        let n = self.n;
        Pattern {
            m: (0..n)
                .map(|i| (0..n).map(|j| if i == j { Ext::Fin(0) } else { Ext::PosInf }).collect())
                .collect(),
            diag: Diag::Units,
        }
    }

    pub fn trivial(&self) -> Pattern {
        let mut t = self.diagonal_units();
        t.diag = Diag::One;
        t
    }

    /// `{1 + a E_ij : a ∈ Q_p}`.
    pub fn root_subgroup(&self, i: usize, j: usize) -> Result<Pattern> {
        if i == j || i >= self.n || j >= self.n {
            return Err(Error::Invalid(format!("no root subgroup ({i},{j})")));
        }
        let mut t = self.trivial();
        t.m[i][j] = Ext::NegInf;
        Ok(t)
    }

    pub fn check_auto(&self, a: &Monomial) -> Result<()> {
        if a.dim() != self.n {
            return Err(Error::UnsupportedAutomorphism(format!(
                "monomial of size {} on SL_{}",
                a.dim(),
                self.n
            )));
        }
        Ok(())
    }

    /// Conjugation by `m = P_π diag(p^v)` seen as a monomial map on the
    /// off-diagonal entries.
    fn entry_action(&self, a: &Monomial) -> Monomial {
        let n = self.n;
        let idx = |i: usize, j: usize| i * (n - 1) + if j > i { j - 1 } else { j };
        let size = n * (n - 1);
        let mut perm = vec![0; size];
        let mut val = vec![0; size];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    perm[idx(i, j)] = idx(a.perm[i], a.perm[j]);
                    val[idx(i, j)] = a.val[i] - a.val[j];
                }
            }
        }
        Monomial { perm, val }
    }

    pub fn apply(&self, a: &Monomial, u: &Pattern) -> Pattern {
        let act = self.entry_action(a);
        Pattern::from_off_diag(self.n, &act.act(&u.off_diag()), u.diag)
    }

    pub fn intersect(&self, u: &Pattern, v: &Pattern) -> Pattern {
        let n = self.n;
        let m = (0..n)
            .map(|i| (0..n).map(|j| u.m[i][j].max(v.m[i][j])).collect())
            .collect();
        let diag = if u.diag == Diag::One || v.diag == Diag::One {
            Diag::One
        } else {
            Diag::Units
        };
        Pattern { m, diag }
    }

    /// `u ≤ v`.
    pub fn le(&self, u: &Pattern, v: &Pattern) -> bool {
        let entries = (0..self.n).all(|i| (0..self.n).all(|j| i == j || u.m[i][j] >= v.m[i][j]));
        entries && (u.diag == Diag::One || v.diag == Diag::Units)
    }

    /// Block sizes of the relation `i ~ j ⇔ M_ij + M_ji = 0`.
    fn blocks(&self, pat: &Pattern) -> Vec<usize> {
        let n = self.n;
        let mut comp: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                if pat.m[i][j] + pat.m[j][i] == Ext::Fin(0) {
                    let (a, b) = (comp[i], comp[j]);
                    for c in comp.iter_mut() {
                        if *c == b {
                            *c = a;
                        }
                    }
                }
            }
        }
        let mut sizes = vec![0; n];
        for c in comp {
            sizes[c] += 1;
        }
        sizes.into_iter().filter(|&s| s > 0).collect()
    }

    /// Haar measure of a pattern whose diagonal is congruent to 1 modulo
    /// `p^level` (`level = 0` means units). Only finite entries contribute, so
    /// two patterns must share their infinite entries to be compared.
    fn measure(&self, pat: &Pattern, level: u32) -> Measure {
        let p = self.big_p();
        let mut num = BigUint::one();
        let mut den = BigUint::one();
        for i in 0..self.n {
            for j in 0..self.n {
                if let (true, Ext::Fin(k)) = (i != j, pat.m[i][j]) {
                    if k >= 0 {
                        den *= p.pow(k as u32);
                    } else {
                        num *= p.pow((-k) as u32);
                    }
                }
            }
        }
        for b in self.blocks(pat) {
            num *= q_factorial(&p, b);
            den *= p.pow((b * (b - 1) / 2) as u32);
        }
        if level > 0 {
            let t = (&p - BigUint::one()) * p.pow(level - 1);
            den *= t.pow((self.n - 1) as u32);
        }
        Measure { num, den }
    }

    /// `[V : U]` for `U ≤ V`.
    pub fn index(&self, v: &Pattern, u: &Pattern) -> Result<BigUint> {
        if !self.le(u, v) {
            return Err(Error::NotSubgroup(
                "pattern is not contained in the larger pattern".into(),
            ));
        }
        if u.diag != v.diag {
            return Err(Error::InfiniteIndex);
        }
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && !u.m[i][j].is_finite() && u.m[i][j] != v.m[i][j] {
                    return Err(Error::InfiniteIndex);
                }
            }
        }
        let mv = self.measure(v, 0);
        let mu = self.measure(u, 0);
        let num = &mv.num * &mu.den;
        let den = &mv.den * &mu.num;
        if (&num % &den).is_zero() {
            Ok(num / den)
        } else {
            Err(Error::NotSubgroup("non-integral pattern index".into()))
        }
    }

    /// Decides `A·B = U` for a compact open `U` by thickening with the normal
    /// filtration `K_k = {g : v((g−1)_ij) ≥ U_ij + k}`: `AB = U` iff
    /// `(AK_k)(BK_k) = U` for all `k`, and each side is a Haar-measure count.
    pub fn product_equals(&self, u: &Pattern, a: &Pattern, b: &Pattern) -> Result<bool> {
        if (a == u && self.le(b, u)) || (b == u && self.le(a, u)) {
            return Ok(true);
        }
        if !u.is_open() {
            return Err(unrepresentable("product test needs a compact open pattern"));
        }
        if !self.le(a, u) || !self.le(b, u) {
            return Err(Error::NotSubgroup("factor not contained in U".into()));
        }
        let n = self.n;
        let mut gap = 0i64;
        for x in [a, b] {
            for i in 0..n {
                for j in 0..n {
                    if let (true, Ext::Fin(k), Ext::Fin(base)) = (i != j, x.m[i][j], u.m[i][j]) {
                        gap = gap.max(k - base);
                    }
                }
            }
        }
        let mu_u = self.measure(u, 0);
        for k in (gap + 1)..=(gap + 3) {
            let thick = |x: &Pattern| -> (Pattern, u32) {
                let m = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                if i == j {
                                    Ext::Fin(0)
                                } else {
                                    x.m[i][j].min(u.m[i][j].shift(k))
                                }
                            })
                            .collect()
                    })
                    .collect();
                let level = if x.diag == Diag::One { k as u32 } else { 0 };
                (Pattern { m, diag: Diag::Units }, level)
            };
            let (ak, la) = thick(a);
            let (bk, lb) = thick(b);
            let meet = self.intersect(&ak, &bk);
            let lhs = self.measure(&ak, la).mul(&self.measure(&bk, lb));
            let rhs = mu_u.mul(&self.measure(&meet, la.max(lb)));
            if !lhs.same(&rhs) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn forward_limit(&self, u: &Pattern, a: &Monomial) -> Pattern {
        let act = self.entry_action(a);
        Pattern::from_off_diag(self.n, &forward_meet(&act, &u.off_diag()), u.diag)
    }

    pub fn ascending_limit(&self, u: &Pattern, a: &Monomial) -> Pattern {
        let act = self.entry_action(a);
        Pattern::from_off_diag(self.n, &ascending_join(&act, &u.off_diag()), u.diag)
    }

    /// `con(a)`: the unipotent group on entries with positive drift.
    pub fn con(&self, a: &Monomial) -> Pattern {
        let act = self.entry_action(a);
        let v: Vec<Ext> = act
            .drift()
            .into_iter()
            .map(|(_, d)| if d > 0 { Ext::NegInf } else { Ext::PosInf })
            .collect();
        Pattern::from_off_diag(self.n, &v, Diag::One)
    }

    /// Closed form `(s(a), s(a⁻¹))`.
    pub fn scale(&self, a: &Monomial) -> (BigUint, BigUint) {
        let act = self.entry_action(a);
        let (mut up, mut down) = (0u64, 0u64);
        for c in act.cycles() {
            let d: i64 = c.iter().map(|&i| act.val[i]).sum();
            if d < 0 {
                up += d.unsigned_abs();
            } else {
                down += d as u64;
            }
        }
        let p = self.big_p();
        (p.pow(up as u32), p.pow(down as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iwahori_index_is_p_plus_one() {
        for p in [2u64, 3, 5, 7] {
            let m = MatModel::new(p, 2).unwrap();
            assert_eq!(m.index(&m.standard(), &m.iwahori()).unwrap(), BigUint::from(p + 1));
        }
    }

    #[test]
    fn sl3_flag_count() {
        // |SL_3(F_p) / B(F_p)| = (p^2+p+1)(p+1)
        let m = MatModel::new(3, 3).unwrap();
        assert_eq!(m.index(&m.standard(), &m.iwahori()).unwrap(), BigUint::from(13u32 * 4));
    }

    #[test]
    fn scale_of_weight_diag() {
        let m = MatModel::new(3, 3).unwrap();
        let a = Monomial::diag(vec![0, 1, 2]);
        assert_eq!(m.scale(&a), (BigUint::from(81u32), BigUint::from(81u32)));
    }

    #[test]
    fn iwahori_conjugate_meet() {
        let m = MatModel::new(3, 2).unwrap();
        let i = m.iwahori();
        let c = m.apply(&Monomial::diag(vec![0, 1]), &i);
        assert_eq!(c.m[0][1], Ext::Fin(-1));
        assert_eq!(c.m[1][0], Ext::Fin(2));
        let meet = m.intersect(&i, &c);
        assert_eq!(m.index(&i, &meet).unwrap(), BigUint::from(3u32));
        assert_eq!(m.index(&c, &meet).unwrap(), BigUint::from(3u32));
    }

    #[test]
    fn con_is_root_group_closure() {
        let m = MatModel::new(3, 2).unwrap();
        let a = Monomial::diag(vec![0, 1]);
        // Ad(diag(1,p)) multiplies g_21 by p
        assert_eq!(m.con(&a), m.root_subgroup(1, 0).unwrap());
        let lim = m.forward_limit(&m.standard(), &a);
        assert_eq!(lim.m[0][1], Ext::Fin(0));
        assert_eq!(lim.m[1][0], Ext::PosInf);
    }

    #[test]
    fn rejects_broken_triangle() {
        let m = MatModel::new(2, 3).unwrap();
        let e = |k| Ext::Fin(k);
        let bad = vec![vec![e(0), e(0), e(5)], vec![e(0), e(0), e(0)], vec![e(0), e(0), e(0)]];
        assert!(m.pattern(bad, Diag::Units).is_err());
    }

    #[test]
    fn borel_halves_multiply_to_iwahori() {
        let m = MatModel::new(2, 2).unwrap();
        let i = m.iwahori();
        let a = Monomial::diag(vec![1, 0]);
        let plus = m.forward_limit(&i, &a);
        let minus = m.forward_limit(&i, &a.inverse());
        assert!(m.product_equals(&i, &plus, &minus).unwrap());
        let s = m.standard();
        let plus = m.forward_limit(&s, &a);
        let minus = m.forward_limit(&s, &a.inverse());
        assert!(!m.product_equals(&s, &plus, &minus).unwrap());
    }
}
