//! Sequence groups over `F_p`: full shifts `F^Z`, left-restricted shifts
//! (the additive group of `F_p((t))`) and finite direct sums, together with
//! shifts, coordinate swaps and elementary unipotent maps.
//!
//! A subgroup is stored as a window `[lo, hi)` common to all coordinates, an
//! `F_p`-subspace of the window coordinates, and for each coordinate a flag
//! saying whether the positions below/above the window are free or zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{unrepresentable, Error, Result};

const LIMIT_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// `F^Z` with the product topology (compact).
    Full,
    /// Sequences vanishing far to the left, i.e. `F_p((t))`.
    LeftRestricted,
    /// Finitely supported sequences with the discrete topology.
    Finite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Trivial,
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShiftModel {
    pub p: u64,
    pub coords: Vec<Support>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShiftGen {
    /// Multiplication by `t` on one coordinate: `(tau f)(n) = f(n-1)`.
    Tau(usize),
    Swap(usize, usize),
    /// `f_to += f_from(m) * u_n`.
    Beta {
        from: usize,
        to: usize,
        m: i64,
        n: i64,
    },
}

impl fmt::Display for ShiftGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShiftGen::Tau(c) => write!(f, "tau_{c}"),
            ShiftGen::Swap(i, j) => write!(f, "swap_{i}_{j}"),
            ShiftGen::Beta { from, to, m, n } => write!(f, "beta_{from}_{to}_{m}_{n}"),
        }
    }
}

/// Letters applied right to left.
pub type ShiftLetter = (ShiftGen, i64);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSub {
    pub lo: i64,
    pub hi: i64,
    pub below: Vec<Tail>,
    pub above: Vec<Tail>,
    /// Reduced row echelon basis; column `c * (hi - lo) + (n - lo)`.
    pub rows: Vec<Vec<u32>>,
}

impl WindowSub {
    fn width(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    fn col(&self, c: usize, n: i64) -> usize {
        c * self.width() + (n - self.lo) as usize
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }
}

impl fmt::Display for WindowSub {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = |v: &[Tail]| -> String { v.iter().map(|x| if *x == Tail::Full { 'F' } else { '0' }).collect() };
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect::<String>())
            .collect();
        write!(
            f,
            "win[{},{}) below={} above={} basis=[{}]",
            self.lo,
            self.hi,
            t(&self.below),
            t(&self.above),
            rows.join(",")
        )
    }
}

/// A finitely supported element: per coordinate, the nonzero values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeqElement {
    pub coords: Vec<BTreeMap<i64, u32>>,
}

impl SeqElement {
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|m| m.is_empty())
    }
}

// ---- F_p linear algebra -------------------------------------------------

fn inv_mod(a: u32, p: u32) -> u32 {
    let (mut r, mut b, mut e) = (1u64, a as u64, (p - 2) as u64);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    r as u32
}

fn rref(mut rows: Vec<Vec<u32>>, p: u32) -> Vec<Vec<u32>> {
    let ncols = rows.first().map_or(0, |r| r.len());
    let pp = p as u64;
    let mut r = 0;
    for col in 0..ncols {
        let Some(piv) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, piv);
        let inv = inv_mod(rows[r][col], p) as u64;
        for x in rows[r].iter_mut() {
            *x = (*x as u64 * inv % pp) as u32;
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[col] != 0 {
                let f = row[col] as u64;
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x = ((*x as u64 + pp - f * *y as u64 % pp) % pp) as u32;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows
}

fn in_span(basis: &[Vec<u32>], v: &[u32], p: u32) -> bool {
    let pp = p as u64;
    let mut v = v.to_vec();
    for row in basis {
        let pc = row.iter().position(|&x| x != 0).expect("nonzero row");
        if v[pc] != 0 {
            let f = v[pc] as u64;
            for (x, y) in v.iter_mut().zip(row) {
                *x = ((*x as u64 + pp - f * *y as u64 % pp) % pp) as u32;
            }
        }
    }
    v.iter().all(|&x| x == 0)
}

fn meet_spaces(a: &[Vec<u32>], b: &[Vec<u32>], n: usize, p: u32) -> Vec<Vec<u32>> {
    // Zassenhaus: rows [a | a] and [b | 0]
    let mut rows = Vec::new();
    for x in a {
        let mut r = x.clone();
        r.extend_from_slice(x);
        rows.push(r);
    }
    for x in b {
        let mut r = x.clone();
        r.extend(std::iter::repeat_n(0, n));
        rows.push(r);
    }
    let red = rref(rows, p);
    let out: Vec<Vec<u32>> = red
        .into_iter()
        .filter(|r| r[..n].iter().all(|&x| x == 0))
        .map(|r| r[n..].to_vec())
        .collect();
    rref(out, p)
}

fn unit(len: usize, i: usize) -> Vec<u32> {
    let mut v = vec![0; len];
    v[i] = 1;
    v
}

/// All subspaces of `F_p^n`, as reduced row echelon bases.
pub fn all_subspaces(p: u32, n: usize) -> Vec<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let pivots: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        // free slots: (row, col) with col > pivot, col not a pivot
        let slots: Vec<(usize, usize)> = pivots
            .iter()
            .enumerate()
            .flat_map(|(r, &pc)| {
                let pivots = &pivots;
                ((pc + 1)..n).filter(move |c| !pivots.contains(c)).map(move |c| (r, c))
            })
            .collect();
        let total = (p as u64).pow(slots.len() as u32);
        for code in 0..total {
            let mut rows: Vec<Vec<u32>> = pivots.iter().map(|&pc| unit(n, pc)).collect();
            let mut c = code;
            for &(r, col) in &slots {
                rows[r][col] = (c % p as u64) as u32;
                c /= p as u64;
            }
            out.push(rows);
        }
    }
    out
}

// ---- the model ----------------------------------------------------------

/// Coordinate permutation and per-coordinate translation of a word, ignoring
/// unipotent letters: content of coordinate `c` ends at `target[c]` moved by
/// `shift[c]`.
#[derive(Clone, Debug)]
struct MonoPart {
    target: Vec<usize>,
    shift: Vec<i64>,
}

impl MonoPart {
    fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.target.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut c = vec![s];
            seen[s] = true;
            let mut t = self.target[s];
            while t != s {
                seen[t] = true;
                c.push(t);
                t = self.target[t];
            }
            out.push(c);
        }
        out
    }

    fn order(&self) -> usize {
        self.cycles().iter().fold(1, |acc, c| num_integer::lcm(acc, c.len()))
    }

    /// Per coordinate: total translation over its cycle.
    fn cycle_drift(&self) -> Vec<i64> {
        let mut out = vec![0; self.target.len()];
        for c in self.cycles() {
            let e: i64 = c.iter().map(|&i| self.shift[i]).sum();
            for &i in &c {
                out[i] = e;
            }
        }
        out
    }
}

pub fn word_pow(word: &[ShiftLetter], k: i64) -> Vec<ShiftLetter> {
    let base: Vec<ShiftLetter> = if k >= 0 {
        word.to_vec()
    } else {
        word.iter().rev().map(|(g, e)| (g.clone(), -e)).collect()
    };
    let mut out = Vec::new();
    for _ in 0..k.unsigned_abs() {
        out.extend(base.iter().cloned());
    }
    out
}

impl ShiftModel {
    pub fn new(p: u64, coords: Vec<Support>) -> Result<Self> {
        if !crate::is_prime(p) {
            return Err(Error::Invalid(format!(
                "alphabet order {p} is not prime; only F_p alphabets are supported"
            )));
        }
        if p > u32::MAX as u64 {
            return Err(Error::Invalid("alphabet order too large".into()));
        }
        if coords.is_empty() {
            return Err(Error::Invalid("at least one coordinate is required".into()));
        }
        Ok(ShiftModel { p, coords })
    }

    fn pp(&self) -> u32 {
        self.p as u32
    }

    fn nc(&self) -> usize {
        self.coords.len()
    }

    pub fn check_word(&self, word: &[ShiftLetter]) -> Result<()> {
        let nc = self.nc();
        for (g, _) in word {
            let ok = match g {
                ShiftGen::Tau(c) => *c < nc,
                ShiftGen::Swap(i, j) => *i < nc && *j < nc && self.coords[*i] == self.coords[*j],
                ShiftGen::Beta { from, to, .. } => *from < nc && *to < nc && from != to,
            };
            if !ok {
                return Err(Error::UnsupportedAutomorphism(format!(
                    "{g} is not defined on this sequence group"
                )));
            }
        }
        Ok(())
    }

    // ---- constructors ----

    fn raw(&self, lo: i64, hi: i64, below: Vec<Tail>, above: Vec<Tail>, rows: Vec<Vec<u32>>) -> WindowSub {
        let rows = rref(rows, self.pp());
        self.canon(WindowSub {
            lo,
            hi,
            below,
            above,
            rows,
        })
    }

    /// Validated constructor; `basis` vectors use the column layout of
    /// [`WindowSub::rows`] and are closed under span automatically.
    pub fn window(
        &self,
        lo: i64,
        hi: i64,
        below: Vec<Tail>,
        above: Vec<Tail>,
        basis: Vec<Vec<u32>>,
    ) -> Result<WindowSub> {
        let nc = self.nc();
        if hi < lo || below.len() != nc || above.len() != nc {
            return Err(Error::Invalid("malformed window subgroup".into()));
        }
        let len = nc * (hi - lo) as usize;
        if basis
            .iter()
            .any(|v| v.len() != len || v.iter().any(|&x| x as u64 >= self.p))
        {
            return Err(Error::NotSubgroup(format!(
                "window vectors must have {len} entries in F_{}",
                self.p
            )));
        }
        Ok(self.raw(lo, hi, below, above, basis))
    }

    pub fn whole(&self) -> WindowSub {
        let nc = self.nc();
        self.raw(0, 0, vec![Tail::Full; nc], vec![Tail::Full; nc], vec![])
    }

    pub fn trivial(&self) -> WindowSub {
        let nc = self.nc();
        self.raw(0, 0, vec![Tail::Trivial; nc], vec![Tail::Trivial; nc], vec![])
    }

    /// The canonical compact open subgroup: everything on full coordinates,
    /// `F_p[[t]]` on left-restricted ones, zero on finite ones.
    pub fn standard(&self) -> WindowSub {
        let below = self
            .coords
            .iter()
            .map(|s| if *s == Support::Full { Tail::Full } else { Tail::Trivial })
            .collect();
        let above = self
            .coords
            .iter()
            .map(|s| {
                if *s == Support::Finite {
                    Tail::Trivial
                } else {
                    Tail::Full
                }
            })
            .collect();
        self.raw(0, 0, below, above, vec![])
    }

    /// Whole coordinate `c`, zero elsewhere.
    pub fn coordinate(&self, c: usize) -> WindowSub {
        let nc = self.nc();
        let mut t = vec![Tail::Trivial; nc];
        t[c] = Tail::Full;
        self.raw(0, 0, t.clone(), t, vec![])
    }

    fn bounds(points: &BTreeSet<(usize, i64)>) -> (i64, i64) {
        let lo = points.iter().map(|x| x.1).min().unwrap_or(0);
        let hi = points.iter().map(|x| x.1 + 1).max().unwrap_or(0);
        (lo, hi)
    }

    /// `{f : f_c(n) = 0 for (c, n) in points}`.
    pub fn zero_set(&self, points: &BTreeSet<(usize, i64)>) -> WindowSub {
        let nc = self.nc();
        let (lo, hi) = Self::bounds(points);
        let w = (hi - lo) as usize;
        let rows = (0..nc)
            .flat_map(|c| (lo..hi).map(move |n| (c, n)))
            .filter(|x| !points.contains(x))
            .map(|(c, n)| unit(nc * w, c * w + (n - lo) as usize))
            .collect();
        self.raw(lo, hi, vec![Tail::Full; nc], vec![Tail::Full; nc], rows)
    }

    /// Sequences supported on `points`.
    pub fn free_set(&self, points: &BTreeSet<(usize, i64)>) -> WindowSub {
        let nc = self.nc();
        let (lo, hi) = Self::bounds(points);
        let w = (hi - lo) as usize;
        let rows = points
            .iter()
            .map(|&(c, n)| unit(nc * w, c * w + (n - lo) as usize))
            .collect();
        self.raw(lo, hi, vec![Tail::Trivial; nc], vec![Tail::Trivial; nc], rows)
    }

    pub fn is_compact(&self, u: &WindowSub) -> bool {
        self.coords.iter().enumerate().all(|(c, s)| match s {
            Support::Full => true,
            Support::LeftRestricted => u.below[c] == Tail::Trivial,
            Support::Finite => u.below[c] == Tail::Trivial && u.above[c] == Tail::Trivial,
        })
    }

    pub fn is_open(&self, u: &WindowSub) -> bool {
        self.coords.iter().enumerate().all(|(c, s)| match s {
            Support::Full => u.below[c] == Tail::Full && u.above[c] == Tail::Full,
            Support::LeftRestricted => u.above[c] == Tail::Full,
            Support::Finite => true,
        })
    }

    // ---- normal form ----

    fn extend(&self, u: &WindowSub, lo: i64, hi: i64) -> WindowSub {
        let (lo, hi) = (lo.min(u.lo), hi.max(u.hi));
        if lo == u.lo && hi == u.hi {
            return u.clone();
        }
        let nc = self.nc();
        let w = (hi - lo) as usize;
        let idx = |c: usize, n: i64| c * w + (n - lo) as usize;
        let mut rows = Vec::with_capacity(u.rows.len());
        for r in &u.rows {
            let mut x = vec![0; nc * w];
            for c in 0..nc {
                for n in u.lo..u.hi {
                    x[idx(c, n)] = r[u.col(c, n)];
                }
            }
            rows.push(x);
        }
        for c in 0..nc {
            for n in lo..hi {
                let free = (n < u.lo && u.below[c] == Tail::Full) || (n >= u.hi && u.above[c] == Tail::Full);
                if free {
                    rows.push(unit(nc * w, idx(c, n)));
                }
            }
        }
        WindowSub {
            lo,
            hi,
            below: u.below.clone(),
            above: u.above.clone(),
            rows: rref(rows, self.pp()),
        }
    }

    fn absorbable(&self, u: &WindowSub, n: i64, tails: &[Tail]) -> bool {
        let len = self.nc() * u.width();
        (0..self.nc()).all(|c| {
            let col = u.col(c, n);
            match tails[c] {
                Tail::Trivial => u.rows.iter().all(|r| r[col] == 0),
                Tail::Full => in_span(&u.rows, &unit(len, col), self.pp()),
            }
        })
    }

    fn drop_position(&self, u: &WindowSub, left: bool) -> WindowSub {
        let n = if left { u.lo } else { u.hi - 1 };
        let nc = self.nc();
        let keep: Vec<usize> = (0..nc)
            .flat_map(|c| (u.lo..u.hi).filter(move |&m| m != n).map(move |m| (c, m)))
            .map(|(c, m)| u.col(c, m))
            .collect();
        let rows = u
            .rows
            .iter()
            .map(|r| keep.iter().map(|&i| r[i]).collect::<Vec<u32>>())
            .filter(|r: &Vec<u32>| r.iter().any(|&x| x != 0))
            .collect();
        let (lo, hi) = if left { (u.lo + 1, u.hi) } else { (u.lo, u.hi - 1) };
        WindowSub {
            lo,
            hi,
            below: u.below.clone(),
            above: u.above.clone(),
            rows: rref(rows, self.pp()),
        }
    }

    fn canon(&self, mut u: WindowSub) -> WindowSub {
        while u.lo < u.hi && self.absorbable(&u, u.lo, &u.below.clone()) {
            u = self.drop_position(&u, true);
        }
        while u.lo < u.hi && self.absorbable(&u, u.hi - 1, &u.above.clone()) {
            u = self.drop_position(&u, false);
        }
        if u.lo == u.hi && u.below == u.above {
            u.lo = 0;
            u.hi = 0;
        }
        u
    }

    fn common(&self, u: &WindowSub, v: &WindowSub) -> (WindowSub, WindowSub) {
        let (lo, hi) = (u.lo.min(v.lo), u.hi.max(v.hi));
        (self.extend(u, lo, hi), self.extend(v, lo, hi))
    }

    // ---- lattice operations ----

    pub fn intersect(&self, u: &WindowSub, v: &WindowSub) -> WindowSub {
        let (a, b) = self.common(u, v);
        let meet = |x: &[Tail], y: &[Tail]| -> Vec<Tail> { x.iter().zip(y).map(|(s, t)| (*s).min(*t)).collect() };
        let n = self.nc() * a.width();
        let rows = meet_spaces(&a.rows, &b.rows, n, self.pp());
        self.canon(WindowSub {
            lo: a.lo,
            hi: a.hi,
            below: meet(&a.below, &b.below),
            above: meet(&a.above, &b.above),
            rows,
        })
    }

    pub fn sum(&self, u: &WindowSub, v: &WindowSub) -> WindowSub {
        let (a, b) = self.common(u, v);
        let join = |x: &[Tail], y: &[Tail]| -> Vec<Tail> { x.iter().zip(y).map(|(s, t)| (*s).max(*t)).collect() };
        let mut rows = a.rows.clone();
        rows.extend(b.rows.iter().cloned());
        self.raw(a.lo, a.hi, join(&a.below, &b.below), join(&a.above, &b.above), rows)
    }

    pub fn le(&self, u: &WindowSub, v: &WindowSub) -> bool {
        let tails =
            u.below.iter().zip(&v.below).all(|(a, b)| a <= b) && u.above.iter().zip(&v.above).all(|(a, b)| a <= b);
        if !tails {
            return false;
        }
        let (a, b) = self.common(u, v);
        a.rows.iter().all(|r| in_span(&b.rows, r, self.pp()))
    }

    /// `[V : U]` for `U ≤ V`.
    pub fn index(&self, v: &WindowSub, u: &WindowSub) -> Result<BigUint> {
        if !self.le(u, v) {
            return Err(Error::NotSubgroup(
                "window subgroup is not contained in the larger one".into(),
            ));
        }
        if u.below != v.below || u.above != v.above {
            return Err(Error::InfiniteIndex);
        }
        let (a, b) = self.common(u, v);
        Ok(BigUint::from(self.p).pow((b.dim() - a.dim()) as u32))
    }

    /// Abelian group: `A·B = U` iff `A + B = U`.
    pub fn product_equals(&self, u: &WindowSub, a: &WindowSub, b: &WindowSub) -> bool {
        self.sum(a, b) == *u
    }

    // ---- automorphisms ----

    fn apply_letter(&self, u: &WindowSub, g: &ShiftGen, k: i64) -> WindowSub {
        let nc = self.nc();
        match g {
            ShiftGen::Tau(c) => {
                let c = *c;
                let m = k.abs();
                let e = self.extend(u, u.lo - m, u.hi + m);
                let w = e.width();
                let mut rows = Vec::with_capacity(e.rows.len() + 2 * m as usize);
                for r in &e.rows {
                    let mut x = vec![0; nc * w];
                    for cc in 0..nc {
                        for n in e.lo..e.hi {
                            let v = r[e.col(cc, n)];
                            if cc != c {
                                x[e.col(cc, n)] = v;
                            } else if (e.lo..e.hi).contains(&(n + k)) {
                                x[e.col(cc, n + k)] = v;
                            }
                        }
                    }
                    rows.push(x);
                }
                for n in e.lo..e.hi {
                    let src = n - k;
                    let free = (src < e.lo && e.below[c] == Tail::Full) || (src >= e.hi && e.above[c] == Tail::Full);
                    if free {
                        rows.push(unit(nc * w, e.col(c, n)));
                    }
                }
                self.raw(e.lo, e.hi, e.below, e.above, rows)
            }
            ShiftGen::Swap(i, j) => {
                if k.rem_euclid(2) == 0 {
                    return u.clone();
                }
                let (i, j) = (*i, *j);
                let w = u.width();
                let sw = |c: usize| {
                    if c == i {
                        j
                    } else if c == j {
                        i
                    } else {
                        c
                    }
                };
                let rows = u
                    .rows
                    .iter()
                    .map(|r| {
                        let mut x = vec![0; nc * w];
                        for c in 0..nc {
                            for n in u.lo..u.hi {
                                x[u.col(sw(c), n)] = r[u.col(c, n)];
                            }
                        }
                        x
                    })
                    .collect();
                let mut below = u.below.clone();
                let mut above = u.above.clone();
                below.swap(i, j);
                above.swap(i, j);
                self.raw(u.lo, u.hi, below, above, rows)
            }
            ShiftGen::Beta { from, to, m, n } => {
                let coef = k.rem_euclid(self.p as i64) as u64;
                if coef == 0 {
                    return u.clone();
                }
                let lo = u.lo.min(*m).min(*n);
                let hi = u.hi.max(m + 1).max(n + 1);
                let e = self.extend(u, lo, hi);
                let (src, dst) = (e.col(*from, *m), e.col(*to, *n));
                let pp = self.p;
                let rows = e
                    .rows
                    .iter()
                    .map(|r| {
                        let mut x = r.clone();
                        x[dst] = ((x[dst] as u64 + coef * x[src] as u64) % pp) as u32;
                        x
                    })
                    .collect();
                self.raw(e.lo, e.hi, e.below, e.above, rows)
            }
        }
    }

    pub fn apply(&self, word: &[ShiftLetter], u: &WindowSub) -> WindowSub {
        word.iter()
            .rev()
            .fold(u.clone(), |acc, (g, k)| self.apply_letter(&acc, g, *k))
    }

    pub fn apply_element(&self, word: &[ShiftLetter], x: &SeqElement) -> SeqElement {
        let mut cur = x.clone();
        let pp = self.p;
        for (g, k) in word.iter().rev() {
            match g {
                ShiftGen::Tau(c) => {
                    let moved = cur.coords[*c].iter().map(|(n, v)| (n + k, *v)).collect();
                    cur.coords[*c] = moved;
                }
                ShiftGen::Swap(i, j) => {
                    if k.rem_euclid(2) == 1 {
                        cur.coords.swap(*i, *j);
                    }
                }
                ShiftGen::Beta { from, to, m, n } => {
                    let coef = k.rem_euclid(pp as i64) as u64;
                    let a = *cur.coords[*from].get(m).unwrap_or(&0) as u64;
                    let b = *cur.coords[*to].get(n).unwrap_or(&0) as u64;
                    let v = ((b + coef * a) % pp) as u32;
                    if v == 0 {
                        cur.coords[*to].remove(n);
                    } else {
                        cur.coords[*to].insert(*n, v);
                    }
                }
            }
        }
        cur
    }

    pub fn contains(&self, u: &WindowSub, x: &SeqElement) -> bool {
        let nc = self.nc();
        let w = u.width();
        let mut v = vec![0; nc * w];
        for (c, m) in x.coords.iter().enumerate() {
            for (&n, &val) in m {
                if val == 0 {
                    continue;
                }
                if n < u.lo {
                    if u.below[c] == Tail::Trivial {
                        return false;
                    }
                } else if n >= u.hi {
                    if u.above[c] == Tail::Trivial {
                        return false;
                    }
                } else {
                    v[u.col(c, n)] = val % self.p as u32;
                }
            }
        }
        in_span(&u.rows, &v, self.pp())
    }

    fn mono_part(&self, word: &[ShiftLetter]) -> MonoPart {
        let nc = self.nc();
        let mut target: Vec<usize> = (0..nc).collect();
        let mut shift = vec![0i64; nc];
        for (g, k) in word.iter().rev() {
            match g {
                ShiftGen::Tau(x) => {
                    for c in 0..nc {
                        if target[c] == *x {
                            shift[c] += k;
                        }
                    }
                }
                ShiftGen::Swap(i, j) => {
                    if k.rem_euclid(2) == 1 {
                        for t in target.iter_mut() {
                            if *t == *i {
                                *t = *j;
                            } else if *t == *j {
                                *t = *i;
                            }
                        }
                    }
                }
                ShiftGen::Beta { .. } => {}
            }
        }
        MonoPart { target, shift }
    }

    /// Period after which a unipotent-free word moves every coordinate by its
    /// cycle drift; `None` when the word has unipotent letters.
    pub fn orbit_period(&self, word: &[ShiftLetter]) -> Option<usize> {
        (!Self::has_beta(word)).then(|| self.mono_part(word).order())
    }

    fn has_beta(word: &[ShiftLetter]) -> bool {
        word.iter().any(|(g, _)| matches!(g, ShiftGen::Beta { .. }))
    }

    fn radius(word: &[ShiftLetter]) -> i64 {
        let b = word
            .iter()
            .filter_map(|(g, _)| match g {
                ShiftGen::Beta { m, n, .. } => Some(m.abs().max(n.abs())),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let t: i64 = word
            .iter()
            .filter_map(|(g, k)| matches!(g, ShiftGen::Tau(_)).then_some(k.abs()))
            .sum();
        b + t
    }

    // ---- iterated limits ----

    /// `⋂_{n≥0} a^n(U)`.
    pub fn forward_limit(&self, u: &WindowSub, word: &[ShiftLetter]) -> Result<WindowSub> {
        self.limit(u, word, true)
    }

    /// Closure of `⋃_{n≥0} a^n(W)` (more precisely of the increasing sums
    /// `W + a(W) + … + a^n(W)`).
    pub fn ascending_limit(&self, w: &WindowSub, word: &[ShiftLetter]) -> Result<WindowSub> {
        self.limit(w, word, false)
    }

    fn limit(&self, u: &WindowSub, word: &[ShiftLetter], meet: bool) -> Result<WindowSub> {
        let l0 = self.mono_part(word).order();
        let mut periods = vec![l0];
        if Self::has_beta(word) {
            periods.push(l0 * self.p as usize);
        }
        let mut seq = vec![u.clone()];
        for _ in 0..LIMIT_CAP {
            let last = seq.last().expect("nonempty");
            let img = self.apply(word, last);
            let next = if meet {
                self.intersect(u, &img)
            } else {
                self.sum(u, &img)
            };
            if next == *last {
                return Ok(next);
            }
            seq.push(next);
            for &l in &periods {
                if seq.len() > l {
                    let k = seq.len() - 1 - l;
                    if let Some(lim) = self.certificate(&seq[k], &seq[k + l], word, l, meet)? {
                        return Ok(lim);
                    }
                }
            }
        }
        Err(Error::NoStabilizationCertificate(format!(
            "no periodic certificate within {LIMIT_CAP} iterations"
        )))
    }

    /// Checks `later = earlier ∩ Zero(Z)` (or `earlier + Free(Z)`) with
    /// `a^L` moving every constrained point rigidly, and returns the limit.
    fn certificate(
        &self,
        earlier: &WindowSub,
        later: &WindowSub,
        word: &[ShiftLetter],
        l: usize,
        meet: bool,
    ) -> Result<Option<WindowSub>> {
        if earlier.below != later.below || earlier.above != later.above {
            return Ok(None);
        }
        let (a, b) = self.common(earlier, later);
        let nc = self.nc();
        let len = nc * a.width();
        let mut z = BTreeSet::new();
        for c in 0..nc {
            for n in a.lo..a.hi {
                let col = a.col(c, n);
                let hit = if meet {
                    a.rows.iter().any(|r| r[col] != 0) && b.rows.iter().all(|r| r[col] == 0)
                } else {
                    let e = unit(len, col);
                    in_span(&b.rows, &e, self.pp()) && !in_span(&a.rows, &e, self.pp())
                };
                if hit {
                    z.insert((c, n));
                }
            }
        }
        if z.is_empty() {
            return Ok(None);
        }
        let piece = |pts: &BTreeSet<(usize, i64)>| {
            if meet {
                self.zero_set(pts)
            } else {
                self.free_set(pts)
            }
        };
        let rebuilt = if meet {
            self.intersect(earlier, &piece(&z))
        } else {
            self.sum(earlier, &piece(&z))
        };
        if rebuilt != *later {
            return Ok(None);
        }
        let power = word_pow(word, l as i64);
        let mono = self.mono_part(&power);
        if mono.target.iter().enumerate().any(|(i, &t)| i != t) {
            return Ok(None);
        }
        let d = mono.shift;
        let radius = Self::radius(&power) + 1;
        for &(c, n0) in &z {
            let mut n = n0;
            loop {
                let one: BTreeSet<_> = [(c, n)].into();
                let moved: BTreeSet<_> = [(c, n + d[c])].into();
                if self.apply(&power, &piece(&one)) != piece(&moved) {
                    return Ok(None);
                }
                let escaped = d[c] == 0 || (d[c] > 0 && n > radius) || (d[c] < 0 && n < -radius);
                if escaped {
                    break;
                }
                n += d[c];
            }
        }
        let inf = self.progression_set(&z, &d, meet)?;
        Ok(Some(if meet {
            self.intersect(earlier, &inf)
        } else {
            self.sum(earlier, &inf)
        }))
    }

    /// `Zero` (or `Free`) of `⋃_{j≥0} (Z + j d)`.
    fn progression_set(&self, z: &BTreeSet<(usize, i64)>, d: &[i64], meet: bool) -> Result<WindowSub> {
        let nc = self.nc();
        let mut explicit: BTreeSet<(usize, i64)> = BTreeSet::new();
        // per coordinate: half-line start and direction
        let mut half: Vec<Option<(i64, i64)>> = vec![None; nc];
        for c in 0..nc {
            let pts: Vec<i64> = z.iter().filter(|x| x.0 == c).map(|x| x.1).collect();
            if pts.is_empty() {
                continue;
            }
            let dc = d[c];
            if dc == 0 {
                explicit.extend(pts.iter().map(|&n| (c, n)));
                continue;
            }
            let step = dc.abs();
            let mut first: BTreeMap<i64, i64> = BTreeMap::new();
            for &n in &pts {
                let r = n.rem_euclid(step);
                let e = first.entry(r).or_insert(n);
                *e = if dc > 0 { (*e).min(n) } else { (*e).max(n) };
            }
            if first.len() as i64 != step {
                return Err(unrepresentable(
                    "iterated limit constrains an arithmetic progression, not a half-line",
                ));
            }
            let start = if dc > 0 {
                *first.values().max().expect("nonempty")
            } else {
                *first.values().min().expect("nonempty")
            };
            for &m in first.values() {
                let mut n = m;
                while (dc > 0 && n < start) || (dc < 0 && n > start) {
                    explicit.insert((c, n));
                    n += dc;
                }
            }
            half[c] = Some((start, dc.signum()));
        }
        let (mut lo, mut hi) = Self::bounds(&explicit);
        if explicit.is_empty() {
            lo = i64::MAX;
            hi = i64::MIN;
        }
        for (s, _) in half.iter().flatten() {
            lo = lo.min(*s);
            hi = hi.max(*s + 1);
        }
        if lo > hi {
            lo = 0;
            hi = 0;
        }
        let w = (hi - lo) as usize;
        let member = |c: usize, n: i64| -> bool {
            explicit.contains(&(c, n))
                || match half[c] {
                    Some((s, 1)) => n >= s,
                    Some((s, _)) => n <= s,
                    None => false,
                }
        };
        let (inside, outside) = if meet {
            (Tail::Trivial, Tail::Full)
        } else {
            (Tail::Full, Tail::Trivial)
        };
        let mut below = vec![outside; nc];
        let mut above = vec![outside; nc];
        for c in 0..nc {
            match half[c] {
                Some((_, 1)) => above[c] = inside,
                Some(_) => below[c] = inside,
                None => {}
            }
        }
        let mut rows = Vec::new();
        for c in 0..nc {
            for n in lo..hi {
                let m = member(c, n);
                if m != meet {
                    rows.push(unit(nc * w, c * w + (n - lo) as usize));
                }
            }
        }
        Ok(self.raw(lo, hi, below, above, rows))
    }

    // ---- contraction, nub, Levi, parabolic ----

    fn per_coordinate(&self, full: impl Fn(usize) -> bool) -> WindowSub {
        let t: Vec<Tail> = (0..self.nc())
            .map(|c| if full(c) { Tail::Full } else { Tail::Trivial })
            .collect();
        self.raw(0, 0, t.clone(), t, vec![])
    }

    /// Product of the whole coordinates with `full[c]`, zero elsewhere.
    pub fn coordinates(&self, full: &[bool]) -> WindowSub {
        self.per_coordinate(|c| full[c])
    }

    /// Zero on `[-k, k)` of every non-finite coordinate and on all of every
    /// finite one: a neighbourhood basis of the identity.
    pub fn neighbourhood(&self, k: i64) -> WindowSub {
        let k = k.max(0);
        let below = self
            .coords
            .iter()
            .map(|s| if *s == Support::Full { Tail::Full } else { Tail::Trivial })
            .collect();
        let above = self
            .coords
            .iter()
            .map(|s| {
                if *s == Support::Finite {
                    Tail::Trivial
                } else {
                    Tail::Full
                }
            })
            .collect();
        self.raw(-k, k, below, above, vec![])
    }

    /// Closure of `con(a)`.
    pub fn con_closure(&self, word: &[ShiftLetter]) -> Result<WindowSub> {
        let mono = self.mono_part(word);
        let has_shift = mono.shift.iter().any(|&s| s != 0) || mono.target.iter().enumerate().any(|(i, &t)| i != t);
        if Self::has_beta(word) {
            if has_shift {
                return Err(unrepresentable(
                    "contraction group of a word mixing shifts and unipotent maps",
                ));
            }
            // a finite-rank perturbation of the identity has finite order
            return Ok(self.trivial());
        }
        let e = mono.cycle_drift();
        Ok(self.per_coordinate(|c| match self.coords[c] {
            Support::Full => e[c] != 0,
            Support::LeftRestricted => e[c] > 0,
            Support::Finite => false,
        }))
    }

    pub fn nub(&self, word: &[ShiftLetter]) -> Result<WindowSub> {
        let mono = self.mono_part(word);
        let e = mono.cycle_drift();
        let mono_nub = |c: usize| self.coords[c] == Support::Full && e[c] != 0;
        if Self::has_beta(word) {
            let mut sources = BTreeSet::new();
            let mut targets = BTreeSet::new();
            for (g, _) in word {
                if let ShiftGen::Beta { from, to, .. } = g {
                    sources.insert(*from);
                    targets.insert(*to);
                }
            }
            let stable = sources.iter().all(|&s| sources.contains(&mono.target[s]));
            if !stable || !sources.is_disjoint(&targets) || sources.iter().any(|&s| mono_nub(s)) {
                return Err(unrepresentable(
                    "nub of a word whose unipotent letters are not triangular over a nub-free quotient",
                ));
            }
        }
        Ok(self.per_coordinate(mono_nub))
    }

    /// Elements with relatively compact forward orbit.
    pub fn parabolic(&self, word: &[ShiftLetter]) -> Result<WindowSub> {
        if Self::has_beta(word) {
            let mono = self.mono_part(word);
            if mono.shift.iter().any(|&s| s != 0) || mono.target.iter().enumerate().any(|(i, &t)| i != t) {
                return Err(unrepresentable("parabolic subgroup of a mixed word"));
            }
            return Ok(self.whole());
        }
        let e = self.mono_part(word).cycle_drift();
        Ok(self.per_coordinate(|c| match self.coords[c] {
            Support::Full => true,
            Support::LeftRestricted => e[c] >= 0,
            Support::Finite => e[c] == 0,
        }))
    }

    pub fn levi(&self, word: &[ShiftLetter]) -> Result<WindowSub> {
        let a = self.parabolic(word)?;
        let b = self.parabolic(&word_pow(word, -1))?;
        Ok(self.intersect(&a, &b))
    }

    /// Smallest subgroup containing `u` that is invariant under every
    /// `beta_{m,n}` from coordinate `from` to coordinate `to`.
    /// Coset representatives of `small` in `big`, at most `cap` of them.
    pub fn transversal(&self, big: &WindowSub, small: &WindowSub, cap: usize) -> Result<Vec<SeqElement>> {
        let idx = self.index(big, small)?;
        if idx > BigUint::from(cap) {
            return Err(Error::EnumerationTooLarge(format!("{idx} cosets")));
        }
        let (b, sm) = self.common(big, small);
        let p = self.pp();
        let mut span = sm.rows.clone();
        let mut picked = Vec::new();
        for r in &b.rows {
            if !in_span(&span, r, p) {
                span.push(r.clone());
                span = rref(span, p);
                picked.push(r.clone());
            }
        }
        let len = self.nc() * b.width();
        let mut vecs = vec![vec![0u32; len]];
        for r in &picked {
            vecs = vecs
                .into_iter()
                .flat_map(|v| {
                    (0..p).map(move |c| {
                        v.iter()
                            .zip(r)
                            .map(|(&x, &y)| ((x as u64 + c as u64 * y as u64) % p as u64) as u32)
                            .collect::<Vec<u32>>()
                    })
                })
                .collect();
        }
        Ok(vecs
            .into_iter()
            .map(|v| SeqElement {
                coords: (0..self.nc())
                    .map(|c| {
                        (b.lo..b.hi)
                            .filter_map(|n| {
                                let x = v[b.col(c, n)];
                                (x != 0).then_some((n, x))
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect())
    }

    /// `x + k·y` coordinatewise.
    pub fn elem_axpy(&self, x: &SeqElement, k: u32, y: &SeqElement) -> SeqElement {
        let p = self.p;
        let mut out = x.clone();
        for (c, m) in y.coords.iter().enumerate() {
            for (&n, &v) in m {
                let e = out.coords[c].entry(n).or_insert(0);
                *e = ((*e as u64 + k as u64 * v as u64) % p) as u32;
                if *e == 0 {
                    out.coords[c].remove(&n);
                }
            }
        }
        out
    }

    pub fn elem_zero(&self) -> SeqElement {
        SeqElement {
            coords: vec![BTreeMap::new(); self.nc()],
        }
    }

    pub fn family_hull(&self, u: &WindowSub, from: usize, to: usize) -> WindowSub {
        let touches = u.below[from] == Tail::Full
            || u.above[from] == Tail::Full
            || u.rows.iter().any(|r| (u.lo..u.hi).any(|n| r[u.col(from, n)] != 0));
        if touches {
            self.sum(u, &self.coordinate(to))
        } else {
            u.clone()
        }
    }

    /// Compact open window subgroups on `[0, w)`, `w ≤ width`, up to equality.
    pub fn enumerate_compact_open(&self, width: usize) -> Result<Vec<WindowSub>> {
        let nc = self.nc();
        let total = nc * width;
        if (self.p as f64).powf((total * total) as f64 / 4.0) > 1e6 {
            return Err(Error::EnumerationTooLarge(format!("subspaces of F_{}^{total}", self.p)));
        }
        let below: Vec<Tail> = self
            .coords
            .iter()
            .map(|s| if *s == Support::Full { Tail::Full } else { Tail::Trivial })
            .collect();
        let above: Vec<Tail> = self
            .coords
            .iter()
            .map(|s| {
                if *s == Support::Finite {
                    Tail::Trivial
                } else {
                    Tail::Full
                }
            })
            .collect();
        let mut seen = BTreeSet::new();
        for w in 0..=width {
            for rows in all_subspaces(self.pp(), nc * w) {
                seen.insert(self.raw(0, w as i64, below.clone(), above.clone(), rows));
            }
        }
        Ok(seen.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lr(p: u64) -> ShiftModel {
        ShiftModel::new(p, vec![Support::LeftRestricted]).unwrap()
    }

    fn tau(k: i64) -> Vec<ShiftLetter> {
        vec![(ShiftGen::Tau(0), k)]
    }

    /// `t^n F[[t]]`
    fn ball(m: &ShiftModel, n: i64) -> WindowSub {
        m.window(n, n, vec![Tail::Trivial], vec![Tail::Full], vec![]).unwrap()
    }

    #[test]
    fn subspace_counts() {
        // Gaussian binomials: F_2^4 has 67 subspaces, F_3^2 has 6
        assert_eq!(all_subspaces(2, 4).len(), 67);
        assert_eq!(all_subspaces(3, 2).len(), 6);
    }

    #[test]
    fn tau_moves_balls() {
        let m = lr(2);
        assert_eq!(m.apply(&tau(1), &ball(&m, 0)), ball(&m, 1));
        assert_eq!(m.apply(&tau(-3), &ball(&m, 0)), ball(&m, -3));
        assert_eq!(m.index(&ball(&m, 0), &ball(&m, 3)).unwrap(), BigUint::from(8u32));
    }

    #[test]
    fn canonical_form_is_minimal_window() {
        let m = lr(2);
        // window [0,2) with data {f(0)=0} is t F[[t]]
        let u = m
            .window(0, 2, vec![Tail::Trivial], vec![Tail::Full], vec![vec![0, 1]])
            .unwrap();
        assert_eq!(u, ball(&m, 1));
    }

    #[test]
    fn limits_on_laurent_series() {
        let m = lr(3);
        let u = ball(&m, 0);
        assert_eq!(m.forward_limit(&u, &tau(1)).unwrap(), m.trivial());
        assert_eq!(m.forward_limit(&u, &tau(-1)).unwrap(), u);
        assert_eq!(m.ascending_limit(&u, &tau(-2)).unwrap(), m.whole());
        // window data f(0)=f(1)
        let v = m
            .window(0, 2, vec![Tail::Trivial], vec![Tail::Full], vec![vec![1, 1]])
            .unwrap();
        assert_eq!(m.forward_limit(&v, &tau(1)).unwrap(), m.trivial());
        assert_eq!(m.forward_limit(&v, &tau(-1)).unwrap(), ball(&m, 2));
    }

    #[test]
    fn full_shift_zero_progression() {
        let m = ShiftModel::new(2, vec![Support::Full]).unwrap();
        let u2 = m.zero_set(&[(0, 0), (0, 2)].into());
        let lim = m.forward_limit(&u2, &tau(1)).unwrap();
        let expect = m.window(0, 0, vec![Tail::Full], vec![Tail::Trivial], vec![]).unwrap();
        assert_eq!(lim, expect);
    }

    #[test]
    fn beta_and_hull() {
        let m = ShiftModel::new(2, vec![Support::LeftRestricted, Support::Full]).unwrap();
        let beta = vec![(
            ShiftGen::Beta {
                from: 0,
                to: 1,
                m: 0,
                n: 5,
            },
            1,
        )];
        let std = m.standard();
        assert_eq!(m.apply(&beta, &std), std);
        let x = SeqElement {
            coords: vec![[(0, 1)].into(), BTreeMap::new()],
        };
        let y = m.apply_element(&beta, &x);
        assert_eq!(y.coords[1], [(5, 1)].into());
        assert_eq!(
            m.apply_element(&beta, &y),
            SeqElement {
                coords: vec![[(0, 1)].into(), [].into()]
            }
        );
        let small = m.intersect(&std, &m.zero_set(&[(1, 5)].into()));
        assert_ne!(m.apply(&beta, &small), small);
        assert_eq!(m.family_hull(&small, 0, 1), std);
    }

    #[test]
    fn nubs_and_contraction() {
        let m = ShiftModel::new(2, vec![Support::LeftRestricted, Support::Full]).unwrap();
        let sigma = vec![(ShiftGen::Tau(1), 1)];
        let t0 = vec![(ShiftGen::Tau(0), 1)];
        assert_eq!(m.nub(&sigma).unwrap(), m.coordinate(1));
        assert_eq!(m.nub(&t0).unwrap(), m.trivial());
        assert_eq!(m.con_closure(&t0).unwrap(), m.coordinate(0));
        assert_eq!(m.con_closure(&word_pow(&t0, -1)).unwrap(), m.trivial());
        let mixed = vec![
            (ShiftGen::Tau(1), 1),
            (
                ShiftGen::Beta {
                    from: 0,
                    to: 1,
                    m: 0,
                    n: 0,
                },
                1,
            ),
        ];
        assert_eq!(m.nub(&mixed).unwrap(), m.coordinate(1));
    }

    #[test]
    fn mixed_word_limit() {
        let m = ShiftModel::new(2, vec![Support::LeftRestricted, Support::Full]).unwrap();
        let w = vec![
            (ShiftGen::Tau(0), 1),
            (
                ShiftGen::Beta {
                    from: 0,
                    to: 1,
                    m: 0,
                    n: 0,
                },
                1,
            ),
        ];
        let std = m.standard();
        let plus = m.forward_limit(&std, &w).unwrap();
        assert_eq!(plus, m.coordinate(1));
        let minus = m.forward_limit(&std, &word_pow(&w, -1)).unwrap();
        assert_eq!(minus, std);
    }

    #[test]
    fn finite_sum_window() {
        let m = ShiftModel::new(2, vec![Support::Finite]).unwrap();
        let all = m.enumerate_compact_open(2).unwrap();
        // subspaces of F_2^0, F_2^1, F_2^2 up to the window they fit in: {0}, F@0, F@1, diag, F^2
        assert_eq!(all.len(), 5);
        let u = all.iter().max_by_key(|u| u.dim()).unwrap();
        assert_eq!(m.forward_limit(u, &tau(1)).unwrap(), m.trivial());
    }
}
