//! Model-generic subgroups and automorphism words, and the direct product of
//! two models.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{unrepresentable, Error, Result};
use crate::ext::Ext;
use crate::model_padic_mat::{MatModel, Pattern};
use crate::model_padic_vec::{BoxLattice, VecModel};
use crate::model_shift::{word_pow, SeqElement, ShiftGen, ShiftLetter, ShiftModel, WindowSub};
use crate::model_tree::{TreeModel, TreeSub};
use crate::monomial::Monomial;
use crate::ratio::IndexRatio;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    Shift(ShiftModel),
    Vec(VecModel),
    Mat(MatModel),
    Tree(TreeModel),
    Product(Box<Model>, Box<Model>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sub {
    Shift(WindowSub),
    Vec(BoxLattice),
    Mat(Pattern),
    Tree(TreeSub),
    Product(Box<Sub>, Box<Sub>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compactness {
    CompactOpen,
    CompactClosed,
    ClosedNoncompact,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gen {
    Shift(ShiftGen),
    Mono(Monomial),
    X,
    Left(Box<Gen>),
    Right(Box<Gen>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub gen: Gen,
    pub exp: i64,
}

/// Letters apply right to left.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    pub letters: Vec<Letter>,
}

/// Normal form of an automorphism inside one model.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Auto {
    Shift(Vec<ShiftLetter>),
    Mono(Monomial),
    Tree(i64),
    Product(Box<Auto>, Box<Auto>),
}

/// An element, for models with element arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Elem {
    Shift(SeqElement),
    /// Coordinate valuations; `PosInf` is a zero coordinate.
    Vec(Vec<Ext>),
    Product(Box<Elem>, Box<Elem>),
}

fn mismatch() -> Error {
    Error::ModelMismatch("subgroup or automorphism from another model".into())
}

// ---- generator names ----

fn ints(s: &str, sep: char) -> Result<Vec<i64>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(sep)
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::Invalid(format!("bad integer '{t}'")))
        })
        .collect()
}

fn bracketed<'a>(name: &'a str, head: &str) -> Option<&'a str> {
    name.strip_prefix(head)?.strip_prefix('(')?.strip_suffix(')')
}

impl Gen {
    /// Parses a generator name for `model`: `tau_c`, `swap_i_j`,
    /// `beta_i_j_m_n` (shift); `d_i`, `diag(v..)`, `mono(perm..;v..)`,
    /// `swap_i_j` (p-adic); `x` (tree); `L.<name>`, `R.<name>` (product).
    pub fn parse(model: &Model, name: &str) -> Result<Gen> {
        let bad = || Error::UnsupportedAutomorphism(format!("unknown generator '{name}'"));
        match model {
            Model::Product(l, r) => {
                if let Some(rest) = name.strip_prefix("L.") {
                    Ok(Gen::Left(Box::new(Gen::parse(l, rest)?)))
                } else if let Some(rest) = name.strip_prefix("R.") {
                    Ok(Gen::Right(Box::new(Gen::parse(r, rest)?)))
                } else {
                    Err(bad())
                }
            }
            Model::Tree(_) => (name == "x").then_some(Gen::X).ok_or_else(bad),
            Model::Shift(m) => {
                let parts: Vec<&str> = name.split('_').collect();
                let nums = |xs: &[&str]| -> Result<Vec<i64>> {
                    xs.iter().map(|t| t.parse::<i64>().map_err(|_| bad())).collect()
                };
                let g = match parts.as_slice() {
                    ["tau", rest @ ..] if rest.len() == 1 => ShiftGen::Tau(nums(rest)?[0] as usize),
                    ["swap", rest @ ..] if rest.len() == 2 => {
                        let v = nums(rest)?;
                        ShiftGen::Swap(v[0] as usize, v[1] as usize)
                    }
                    ["beta", rest @ ..] if rest.len() == 4 => {
                        let v = nums(rest)?;
                        ShiftGen::Beta {
                            from: v[0] as usize,
                            to: v[1] as usize,
                            m: v[2],
                            n: v[3],
                        }
                    }
                    _ => return Err(bad()),
                };
                m.check_word(&[(g.clone(), 1)])?;
                Ok(Gen::Shift(g))
            }
            Model::Vec(VecModel { n, .. }) | Model::Mat(MatModel { n, .. }) => {
                let n = *n;
                let mono = if let Some(i) = name.strip_prefix("d_") {
                    let i: usize = i.parse().map_err(|_| bad())?;
                    if i >= n {
                        return Err(bad());
                    }
                    let mut v = vec![0; n];
                    v[i] = 1;
                    Monomial::diag(v)
                } else if let Some(rest) = name.strip_prefix("swap_") {
                    let v = ints(rest, '_')?;
                    if v.len() != 2 || v.iter().any(|&i| i < 0 || i as usize >= n) {
                        return Err(bad());
                    }
                    Monomial::transposition(n, v[0] as usize, v[1] as usize)
                } else if let Some(body) = bracketed(name, "diag") {
                    Monomial::diag(ints(body, ',')?)
                } else if let Some(body) = bracketed(name, "mono") {
                    let (p, v) = body.split_once(';').ok_or_else(bad)?;
                    let perm = ints(p, ',')?;
                    if perm.iter().any(|&i| i < 0) {
                        return Err(bad());
                    }
                    Monomial::new(perm.into_iter().map(|i| i as usize).collect(), ints(v, ',')?)?
                } else {
                    return Err(bad());
                };
                if mono.dim() != n {
                    return Err(Error::UnsupportedAutomorphism(format!(
                        "'{name}' has size {} but the model has dimension {n}",
                        mono.dim()
                    )));
                }
                Ok(Gen::Mono(mono))
            }
        }
    }
}

impl fmt::Display for Gen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gen::Shift(g) => write!(f, "{g}"),
            Gen::Mono(m) => write!(f, "{m}"),
            Gen::X => write!(f, "x"),
            Gen::Left(g) => write!(f, "L.{g}"),
            Gen::Right(g) => write!(f, "R.{g}"),
        }
    }
}

impl Word {
    pub fn identity() -> Self {
        Word::default()
    }

    pub fn gen(g: Gen, exp: i64) -> Self {
        Word::from_letters(vec![Letter { gen: g, exp }])
    }

    /// Merges adjacent letters with the same generator and drops zero exponents.
    pub fn from_letters(letters: Vec<Letter>) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
        for l in letters {
            if l.exp == 0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.gen == l.gen => {
                    last.exp += l.exp;
                    if last.exp == 0 {
                        out.pop();
                    }
                }
                _ => out.push(l),
            }
        }
        Word { letters: out }
    }

    pub fn parse(model: &Model, letters: &[(String, i64)]) -> Result<Self> {
        let ls = letters
            .iter()
            .map(|(n, e)| {
                Ok(Letter {
                    gen: Gen::parse(model, n)?,
                    exp: *e,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Word::from_letters(ls))
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Word::from_letters(
            self.letters
                .iter()
                .rev()
                .map(|l| Letter {
                    gen: l.gen.clone(),
                    exp: -l.exp,
                })
                .collect(),
        )
    }

    /// `self ∘ other`.
    pub fn then_after(&self, other: &Word) -> Self {
        let mut ls = self.letters.clone();
        ls.extend(other.letters.iter().cloned());
        Word::from_letters(ls)
    }

    pub fn pow(&self, k: i64) -> Self {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut ls = Vec::new();
        for _ in 0..k.unsigned_abs() {
            ls.extend(base.letters.iter().cloned());
        }
        Word::from_letters(ls)
    }

    pub fn commutator(a: &Word, b: &Word) -> Word {
        a.then_after(b).then_after(&a.inverse()).then_after(&b.inverse())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "id");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| {
                if l.exp == 1 {
                    l.gen.to_string()
                } else {
                    format!("{}^{}", l.gen, l.exp)
                }
            })
            .collect();
        write!(f, "{}", parts.join("·"))
    }
}

impl Auto {
    pub fn pow(&self, k: i64) -> Auto {
        match self {
            Auto::Shift(w) => Auto::Shift(word_pow(w, k)),
            Auto::Mono(m) => Auto::Mono(m.pow(k)),
            Auto::Tree(d) => Auto::Tree(d * k),
            Auto::Product(a, b) => Auto::Product(Box::new(a.pow(k)), Box::new(b.pow(k))),
        }
    }

    pub fn inverse(&self) -> Auto {
        self.pow(-1)
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Auto::Shift(w) => w.iter().all(|(_, k)| *k == 0),
            Auto::Mono(m) => m.is_identity(),
            Auto::Tree(d) => *d == 0,
            Auto::Product(a, b) => a.is_identity() && b.is_identity(),
        }
    }
}

impl fmt::Display for Sub {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sub::Shift(u) => write!(f, "{u}"),
            Sub::Vec(u) => {
                let v: Vec<String> = u.vals.iter().map(|x| x.to_string()).collect();
                write!(f, "box({})", v.join(","))
            }
            Sub::Mat(u) => write!(f, "{u}"),
            Sub::Tree(u) => write!(f, "{u}"),
            Sub::Product(a, b) => write!(f, "({a}) x ({b})"),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::Shift(m) => {
                let c: Vec<String> = m.coords.iter().map(|s| format!("{s:?}")).collect();
                write!(f, "shift(F_{}; {})", m.p, c.join(","))
            }
            Model::Vec(m) => write!(f, "Q_{}^{}", m.p, m.n),
            Model::Mat(m) => write!(f, "SL_{}(Q_{})", m.n, m.p),
            Model::Tree(m) => write!(f, "Aut(T_{})", m.q + 1),
            Model::Product(a, b) => write!(f, "{a} x {b}"),
        }
    }
}

macro_rules! pair {
    ($u:expr, $v:expr, $pat:ident) => {
        match ($u, $v) {
            (Sub::$pat(a), Sub::$pat(b)) => (a, b),
            _ => return Err(mismatch()),
        }
    };
}

impl Model {
    pub fn direct_product(a: Model, b: Model) -> Model {
        Model::Product(Box::new(a), Box::new(b))
    }

    /// Normal form of a word.
    pub fn eval(&self, w: &Word) -> Result<Auto> {
        match self {
            Model::Shift(m) => {
                let mut out = Vec::new();
                for l in &w.letters {
                    match &l.gen {
                        Gen::Shift(g) => out.push((g.clone(), l.exp)),
                        g => return Err(Error::UnsupportedAutomorphism(format!("{g} on a shift model"))),
                    }
                }
                m.check_word(&out)?;
                Ok(Auto::Shift(out))
            }
            Model::Vec(VecModel { n, .. }) | Model::Mat(MatModel { n, .. }) => {
                let mut acc = Monomial::identity(*n);
                for l in &w.letters {
                    match &l.gen {
                        Gen::Mono(m) if m.dim() == *n => acc = acc.compose(&m.pow(l.exp)),
                        g => {
                            return Err(Error::UnsupportedAutomorphism(format!("{g} on {self}")));
                        }
                    }
                }
                Ok(Auto::Mono(acc))
            }
            Model::Tree(_) => {
                let mut k = 0;
                for l in &w.letters {
                    match &l.gen {
                        Gen::X => k += l.exp,
                        g => return Err(Error::UnsupportedAutomorphism(format!("{g} on a tree"))),
                    }
                }
                Ok(Auto::Tree(k))
            }
            Model::Product(a, b) => {
                let (mut left, mut right) = (Vec::new(), Vec::new());
                for l in &w.letters {
                    match &l.gen {
                        Gen::Left(g) => left.push(Letter {
                            gen: (**g).clone(),
                            exp: l.exp,
                        }),
                        Gen::Right(g) => right.push(Letter {
                            gen: (**g).clone(),
                            exp: l.exp,
                        }),
                        g => {
                            return Err(Error::UnsupportedAutomorphism(format!(
                                "{g} on a product (use L./R. prefixes)"
                            )))
                        }
                    }
                }
                Ok(Auto::Product(
                    Box::new(a.eval(&Word::from_letters(left))?),
                    Box::new(b.eval(&Word::from_letters(right))?),
                ))
            }
        }
    }

    /// The canonical compact open subgroup.
    pub fn standard(&self) -> Sub {
        match self {
            Model::Shift(m) => Sub::Shift(m.standard()),
            Model::Vec(m) => Sub::Vec(m.standard()),
            Model::Mat(m) => Sub::Mat(m.standard()),
            Model::Tree(m) => Sub::Tree(m.standard()),
            Model::Product(a, b) => Sub::Product(Box::new(a.standard()), Box::new(b.standard())),
        }
    }

    pub fn whole(&self) -> Sub {
        match self {
            Model::Shift(m) => Sub::Shift(m.whole()),
            Model::Vec(m) => Sub::Vec(m.whole()),
            Model::Mat(m) => Sub::Mat(
                m.pattern(vec![vec![Ext::NegInf; m.n]; m.n], crate::model_padic_mat::Diag::Units)
                    .expect("whole group pattern"),
            ),
            Model::Tree(m) => Sub::Tree(m.whole()),
            Model::Product(a, b) => Sub::Product(Box::new(a.whole()), Box::new(b.whole())),
        }
    }

    pub fn trivial(&self) -> Result<Sub> {
        Ok(match self {
            Model::Shift(m) => Sub::Shift(m.trivial()),
            Model::Vec(m) => Sub::Vec(m.trivial()),
            Model::Mat(m) => Sub::Mat(m.trivial()),
            Model::Tree(_) => return Err(unrepresentable("the trivial subgroup of a tree group")),
            Model::Product(a, b) => Sub::Product(Box::new(a.trivial()?), Box::new(b.trivial()?)),
        })
    }

    /// Member `k` of a decreasing neighbourhood basis of the identity.
    pub fn neighbourhood(&self, k: i64) -> Result<Sub> {
        Ok(match self {
            Model::Shift(m) => Sub::Shift(m.neighbourhood(k)),
            Model::Vec(m) => Sub::Vec(m.lattice(vec![Ext::Fin(k); m.n])?),
            Model::Mat(m) => {
                let mut rows = vec![vec![Ext::Fin(k.max(0)); m.n]; m.n];
                for (i, r) in rows.iter_mut().enumerate() {
                    r[i] = Ext::Fin(0);
                }
                Sub::Mat(m.pattern(rows, crate::model_padic_mat::Diag::Units)?)
            }
            Model::Tree(m) => {
                let v0 = crate::model_tree::Vertex::axis(0);
                Sub::Tree(m.fix(m.ball(&v0, k.max(0) as usize))?)
            }
            Model::Product(a, b) => Sub::Product(Box::new(a.neighbourhood(k)?), Box::new(b.neighbourhood(k)?)),
        })
    }

    pub fn compactness(&self, u: &Sub) -> Result<Compactness> {
        let (c, o) = self.flags(u)?;
        Ok(match (c, o) {
            (true, true) => Compactness::CompactOpen,
            (true, false) => Compactness::CompactClosed,
            _ => Compactness::ClosedNoncompact,
        })
    }

    fn flags(&self, u: &Sub) -> Result<(bool, bool)> {
        Ok(match (self, u) {
            (Model::Shift(m), Sub::Shift(u)) => (m.is_compact(u), m.is_open(u)),
            (Model::Vec(_), Sub::Vec(u)) => (u.is_compact(), u.is_open()),
            (Model::Mat(_), Sub::Mat(u)) => (u.is_compact(), u.is_open()),
            (Model::Tree(m), Sub::Tree(u)) => (m.is_compact(u), m.is_open(u)),
            (Model::Product(a, b), Sub::Product(x, y)) => {
                let (c1, o1) = a.flags(x)?;
                let (c2, o2) = b.flags(y)?;
                (c1 && c2, o1 && o2)
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn is_compact_open(&self, u: &Sub) -> Result<bool> {
        Ok(self.compactness(u)? == Compactness::CompactOpen)
    }

    pub fn apply(&self, a: &Auto, u: &Sub) -> Result<Sub> {
        Ok(match (self, a, u) {
            (Model::Shift(m), Auto::Shift(w), Sub::Shift(u)) => Sub::Shift(m.apply(w, u)),
            (Model::Vec(m), Auto::Mono(a), Sub::Vec(u)) => Sub::Vec(m.apply(a, u)),
            (Model::Mat(m), Auto::Mono(a), Sub::Mat(u)) => Sub::Mat(m.apply(a, u)),
            (Model::Tree(m), Auto::Tree(k), Sub::Tree(u)) => Sub::Tree(m.apply(*k, u)),
            (Model::Product(l, r), Auto::Product(a, b), Sub::Product(x, y)) => {
                Sub::Product(Box::new(l.apply(a, x)?), Box::new(r.apply(b, y)?))
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn intersect(&self, u: &Sub, v: &Sub) -> Result<Sub> {
        Ok(match self {
            Model::Shift(m) => {
                let (a, b) = pair!(u, v, Shift);
                Sub::Shift(m.intersect(a, b))
            }
            Model::Vec(m) => {
                let (a, b) = pair!(u, v, Vec);
                Sub::Vec(m.intersect(a, b))
            }
            Model::Mat(m) => {
                let (a, b) = pair!(u, v, Mat);
                Sub::Mat(m.intersect(a, b))
            }
            Model::Tree(m) => {
                let (a, b) = pair!(u, v, Tree);
                Sub::Tree(m.intersect(a, b)?)
            }
            Model::Product(l, r) => {
                let ((x1, y1), (x2, y2)) = (split(u)?, split(v)?);
                Sub::Product(Box::new(l.intersect(x1, x2)?), Box::new(r.intersect(y1, y2)?))
            }
        })
    }

    /// Closed subgroup generated by `u` and `v`, where the model can say.
    pub fn join(&self, u: &Sub, v: &Sub) -> Result<Sub> {
        if self.le(u, v)? {
            return Ok(v.clone());
        }
        if self.le(v, u)? {
            return Ok(u.clone());
        }
        Ok(match self {
            Model::Shift(m) => {
                let (a, b) = pair!(u, v, Shift);
                Sub::Shift(m.sum(a, b))
            }
            Model::Vec(m) => {
                let (a, b) = pair!(u, v, Vec);
                Sub::Vec(m.sum(a, b))
            }
            Model::Mat(_) | Model::Tree(_) => {
                return Err(unrepresentable(
                    "closed subgroup generated by two incomparable subgroups",
                ))
            }
            Model::Product(l, r) => {
                let ((x1, y1), (x2, y2)) = (split(u)?, split(v)?);
                Sub::Product(Box::new(l.join(x1, x2)?), Box::new(r.join(y1, y2)?))
            }
        })
    }

    pub fn le(&self, u: &Sub, v: &Sub) -> Result<bool> {
        Ok(match self {
            Model::Shift(m) => {
                let (a, b) = pair!(u, v, Shift);
                m.le(a, b)
            }
            Model::Vec(m) => {
                let (a, b) = pair!(u, v, Vec);
                m.le(a, b)
            }
            Model::Mat(m) => {
                let (a, b) = pair!(u, v, Mat);
                m.le(a, b)
            }
            Model::Tree(m) => {
                let (a, b) = pair!(u, v, Tree);
                m.le(a, b)
            }
            Model::Product(l, r) => {
                let ((x1, y1), (x2, y2)) = (split(u)?, split(v)?);
                l.le(x1, x2)? && r.le(y1, y2)?
            }
        })
    }

    /// `[V : U]` for `U ≤ V`.
    pub fn index(&self, v: &Sub, u: &Sub) -> Result<BigUint> {
        match self {
            Model::Shift(m) => {
                let (a, b) = pair!(v, u, Shift);
                m.index(a, b)
            }
            Model::Vec(m) => {
                let (a, b) = pair!(v, u, Vec);
                m.index(a, b)
            }
            Model::Mat(m) => {
                let (a, b) = pair!(v, u, Mat);
                m.index(a, b)
            }
            Model::Tree(m) => {
                let (a, b) = pair!(v, u, Tree);
                m.index(a, b)
            }
            Model::Product(l, r) => {
                let ((x1, y1), (x2, y2)) = (split(v)?, split(u)?);
                Ok(l.index(x1, x2)? * r.index(y1, y2)?)
            }
        }
    }

    /// Haar measure ratio `m(U)/m(V)` of commensurable subgroups.
    pub fn haar_ratio(&self, u: &Sub, v: &Sub) -> Result<IndexRatio> {
        let w = self.intersect(u, v)?;
        let fix = |e: Error| {
            if e == Error::InfiniteIndex {
                Error::NotCommensurable
            } else {
                e
            }
        };
        let a = self.index(u, &w).map_err(fix)?;
        let b = self.index(v, &w).map_err(fix)?;
        Ok(IndexRatio::new(a, b))
    }

    /// Whether the set product `A·B` equals `U`.
    pub fn product_equals(&self, u: &Sub, a: &Sub, b: &Sub) -> Result<bool> {
        if !self.le(a, u)? || !self.le(b, u)? {
            return Err(Error::NotSubgroup("product factors must lie in the target".into()));
        }
        match (self, u, a, b) {
            (Model::Shift(m), Sub::Shift(u), Sub::Shift(a), Sub::Shift(b)) => Ok(m.product_equals(u, a, b)),
            (Model::Vec(m), Sub::Vec(u), Sub::Vec(a), Sub::Vec(b)) => Ok(m.product_equals(u, a, b)),
            (Model::Mat(m), Sub::Mat(u), Sub::Mat(a), Sub::Mat(b)) => m.product_equals(u, a, b),
            (Model::Tree(m), Sub::Tree(u), Sub::Tree(a), Sub::Tree(b)) => m.product_equals(u, a, b),
            (Model::Product(l, r), Sub::Product(u1, u2), Sub::Product(a1, a2), Sub::Product(b1, b2)) => {
                Ok(l.product_equals(u1, a1, b1)? && r.product_equals(u2, a2, b2)?)
            }
            _ => Err(mismatch()),
        }
    }

    /// `⋂_{n≥0} a^n(U)`.
    pub fn forward_limit(&self, u: &Sub, a: &Auto) -> Result<Sub> {
        Ok(match (self, a, u) {
            (Model::Shift(m), Auto::Shift(w), Sub::Shift(u)) => Sub::Shift(m.forward_limit(u, w)?),
            (Model::Vec(m), Auto::Mono(a), Sub::Vec(u)) => Sub::Vec(m.forward_limit(u, a)),
            (Model::Mat(m), Auto::Mono(a), Sub::Mat(u)) => Sub::Mat(m.forward_limit(u, a)),
            (Model::Tree(m), Auto::Tree(k), Sub::Tree(u)) => Sub::Tree(m.forward_limit(u, *k)?),
            (Model::Product(l, r), Auto::Product(a, b), Sub::Product(x, y)) => {
                Sub::Product(Box::new(l.forward_limit(x, a)?), Box::new(r.forward_limit(y, b)?))
            }
            _ => return Err(mismatch()),
        })
    }

    /// Closure of the increasing union `⋃_{n≥0} a^n(U)`.
    pub fn ascending_limit(&self, u: &Sub, a: &Auto) -> Result<Sub> {
        Ok(match (self, a, u) {
            (Model::Shift(m), Auto::Shift(w), Sub::Shift(u)) => Sub::Shift(m.ascending_limit(u, w)?),
            (Model::Vec(m), Auto::Mono(a), Sub::Vec(u)) => Sub::Vec(m.ascending_limit(u, a)),
            (Model::Mat(m), Auto::Mono(a), Sub::Mat(u)) => Sub::Mat(m.ascending_limit(u, a)),
            (Model::Tree(m), Auto::Tree(k), Sub::Tree(u)) => Sub::Tree(m.ascending_limit(u, *k)?),
            (Model::Product(l, r), Auto::Product(a, b), Sub::Product(x, y)) => {
                Sub::Product(Box::new(l.ascending_limit(x, a)?), Box::new(r.ascending_limit(y, b)?))
            }
            _ => return Err(mismatch()),
        })
    }

    /// Closure of `con(a)`.
    pub fn con_closure(&self, a: &Auto) -> Result<Sub> {
        Ok(match (self, a) {
            (Model::Shift(m), Auto::Shift(w)) => Sub::Shift(m.con_closure(w)?),
            (Model::Vec(m), Auto::Mono(a)) => Sub::Vec(m.con(a)),
            (Model::Mat(m), Auto::Mono(a)) => Sub::Mat(m.con(a)),
            (Model::Tree(_), Auto::Tree(_)) => return Err(unrepresentable("contraction groups of tree translations")),
            (Model::Product(l, r), Auto::Product(a, b)) => {
                Sub::Product(Box::new(l.con_closure(a)?), Box::new(r.con_closure(b)?))
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn nub(&self, a: &Auto) -> Result<Sub> {
        Ok(match (self, a) {
            (Model::Shift(m), Auto::Shift(w)) => Sub::Shift(m.nub(w)?),
            (Model::Vec(m), Auto::Mono(_)) => Sub::Vec(m.trivial()),
            (Model::Mat(m), Auto::Mono(_)) => Sub::Mat(m.trivial()),
            (Model::Tree(m), Auto::Tree(k)) => Sub::Tree(m.nub(*k)?),
            (Model::Product(l, r), Auto::Product(a, b)) => Sub::Product(Box::new(l.nub(a)?), Box::new(r.nub(b)?)),
            _ => return Err(mismatch()),
        })
    }

    pub fn parabolic(&self, a: &Auto) -> Result<Sub> {
        Ok(match (self, a) {
            (Model::Shift(m), Auto::Shift(w)) => Sub::Shift(m.parabolic(w)?),
            (Model::Vec(m), Auto::Mono(a)) => Sub::Vec(m.parabolic(a)),
            (Model::Mat(_), _) | (Model::Tree(_), _) => {
                return Err(unrepresentable("parabolic subgroups outside the abelian models"))
            }
            (Model::Product(l, r), Auto::Product(a, b)) => {
                Sub::Product(Box::new(l.parabolic(a)?), Box::new(r.parabolic(b)?))
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn levi(&self, a: &Auto) -> Result<Sub> {
        Ok(match (self, a) {
            (Model::Shift(m), Auto::Shift(w)) => Sub::Shift(m.levi(w)?),
            (Model::Vec(m), Auto::Mono(a)) => Sub::Vec(m.levi(a)),
            (Model::Mat(_), _) | (Model::Tree(_), _) => {
                return Err(unrepresentable("Levi subgroups outside the abelian models"))
            }
            (Model::Product(l, r), Auto::Product(a, b)) => Sub::Product(Box::new(l.levi(a)?), Box::new(r.levi(b)?)),
            _ => return Err(mismatch()),
        })
    }

    /// Adjoins a compact `a`-stable subgroup `L` to `V`: `(⋂_{l∈L} lVl⁻¹)·L`.
    pub fn adjoin(&self, v: &Sub, l: &Sub) -> Result<Sub> {
        Ok(match self {
            Model::Shift(_) | Model::Vec(_) => self.join(v, l)?,
            Model::Mat(_) => {
                if self.le(l, v)? {
                    v.clone()
                } else {
                    return Err(unrepresentable("adjoining a non-trivial compact group in SL_n"));
                }
            }
            Model::Tree(m) => {
                let (a, b) = pair!(v, l, Tree);
                Sub::Tree(m.adjoin(a, b)?)
            }
            Model::Product(lm, rm) => {
                let ((x1, y1), (x2, y2)) = (split(v)?, split(l)?);
                Sub::Product(Box::new(lm.adjoin(x1, x2)?), Box::new(rm.adjoin(y1, y2)?))
            }
        })
    }

    // ---- elements ----

    pub fn apply_elem(&self, a: &Auto, x: &Elem) -> Result<Elem> {
        Ok(match (self, a, x) {
            (Model::Shift(m), Auto::Shift(w), Elem::Shift(x)) => Elem::Shift(m.apply_element(w, x)),
            (Model::Vec(_), Auto::Mono(a), Elem::Vec(x)) => Elem::Vec(a.act(x)),
            (Model::Product(l, r), Auto::Product(a, b), Elem::Product(x, y)) => {
                Elem::Product(Box::new(l.apply_elem(a, x)?), Box::new(r.apply_elem(b, y)?))
            }
            (Model::Mat(_), ..) | (Model::Tree(_), ..) => {
                return Err(unrepresentable("element arithmetic in this model"))
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn contains(&self, u: &Sub, x: &Elem) -> Result<bool> {
        Ok(match (self, u, x) {
            (Model::Shift(m), Sub::Shift(u), Elem::Shift(x)) => m.contains(u, x),
            (Model::Vec(m), Sub::Vec(u), Elem::Vec(x)) => m.contains(u, x),
            (Model::Product(l, r), Sub::Product(u, v), Elem::Product(x, y)) => l.contains(u, x)? && r.contains(v, y)?,
            (Model::Mat(_), ..) | (Model::Tree(_), ..) => {
                return Err(unrepresentable("element arithmetic in this model"))
            }
            _ => return Err(mismatch()),
        })
    }

    pub fn is_identity_elem(&self, x: &Elem) -> bool {
        match x {
            Elem::Shift(s) => s.is_zero(),
            Elem::Vec(v) => v.iter().all(|e| *e == Ext::PosInf),
            Elem::Product(a, b) => self.is_identity_elem(a) && self.is_identity_elem(b),
        }
    }

    /// A bound on how far one application of `a` moves window data; used to
    /// size scan horizons.
    pub fn drift_bound(&self, a: &Auto) -> u64 {
        match a {
            Auto::Shift(w) => w
                .iter()
                .map(|(g, k)| match g {
                    ShiftGen::Beta { m, n, .. } => (m - n).unsigned_abs() + 1,
                    _ => k.unsigned_abs(),
                })
                .sum::<u64>()
                .max(1),
            Auto::Mono(m) => m.val.iter().map(|v| v.unsigned_abs()).sum::<u64>().max(1) * m.period() as u64,
            Auto::Tree(k) => k.unsigned_abs().max(1),
            Auto::Product(a, b) => self.drift_bound(a).max(self.drift_bound(b)),
        }
    }
}

fn split(u: &Sub) -> Result<(&Sub, &Sub)> {
    match u {
        Sub::Product(a, b) => Ok((a, b)),
        _ => Err(mismatch()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_shift::Support;

    fn lr2() -> Model {
        Model::Shift(ShiftModel::new(2, vec![Support::LeftRestricted]).unwrap())
    }

    #[test]
    fn words_reduce_and_invert() {
        let m = lr2();
        let w = Word::parse(&m, &[("tau_0".into(), 2), ("tau_0".into(), -2)]).unwrap();
        assert!(w.is_empty());
        let a = Word::parse(&m, &[("tau_0".into(), 1), ("beta_0_0_1_1".into(), 1)]);
        assert!(a.is_err());
        let v = Model::Vec(VecModel::new(3, 2).unwrap());
        let b = Word::parse(&v, &[("d_0".into(), 1), ("diag(0,-1)".into(), 1)]).unwrap();
        assert!(v.eval(&b.then_after(&b.inverse())).unwrap().is_identity());
    }

    #[test]
    fn left_shift_moves_window_down() {
        let m = lr2();
        let left = m.eval(&Word::parse(&m, &[("tau_0".into(), -1)]).unwrap()).unwrap();
        let u = m.standard();
        let img = m.apply(&left, &u).unwrap();
        assert_eq!(m.index(&img, &u).unwrap(), BigUint::from(2u32));
        assert_eq!(m.apply(&Auto::Shift(vec![]), &u).unwrap(), u);
    }

    #[test]
    fn haar_ratios() {
        let v = Model::Vec(VecModel::new(5, 1).unwrap());
        let z = v.standard();
        let pz = Sub::Vec(BoxLattice {
            vals: vec![Ext::Fin(1)],
        });
        assert_eq!(
            v.haar_ratio(&z, &pz).unwrap(),
            IndexRatio::new(BigUint::from(5u32), BigUint::from(1u32))
        );
        let m = Model::Shift(ShiftModel::new(3, vec![Support::LeftRestricted]).unwrap());
        let a = m.eval(&Word::parse(&m, &[("tau_0".into(), 2)]).unwrap()).unwrap();
        let u = m.standard();
        let r = m.haar_ratio(&u, &m.apply(&a, &u).unwrap()).unwrap();
        assert_eq!(r, IndexRatio::new(BigUint::from(9u32), BigUint::from(1u32)));
    }

    #[test]
    fn products_are_componentwise() {
        let p = Model::direct_product(lr2(), Model::Tree(TreeModel::new(2).unwrap()));
        let w = Word::parse(&p, &[("L.tau_0".into(), -1), ("R.x".into(), 1)]).unwrap();
        let a = p.eval(&w).unwrap();
        let u = p.standard();
        let img = p.apply(&a, &u).unwrap();
        let meet = p.intersect(&u, &img).unwrap();
        // 2 from the shift factor, 3 from the tree factor
        assert_eq!(p.index(&img, &meet).unwrap(), BigUint::from(6u32));
    }
}
