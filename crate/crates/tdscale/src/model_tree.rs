//! Automorphisms of the regular tree `T_{q+1}` acted on by powers of the
//! translation `x` along a fixed axis, and fixators of closed convex vertex
//! sets.
//!
//! Axis vertices are `v_n`. A vertex off the axis is addressed by the axis
//! vertex it hangs from and a branch word: the first letter is one of the
//! `q - 1` branch directions at the axis, later letters one of `q` children.
//! `x.v_n = v_{n-1}`, branches carried along.
//!
//! A vertex set is stored by axis column: an explicit window of columns plus,
//! toward either end, an optional periodic tail of column contents.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{unrepresentable, Error, Result};

pub type Path = Vec<u8>;
pub type Column = BTreeSet<Path>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeModel {
    pub q: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub n: i64,
    pub path: Path,
}

impl Vertex {
    pub fn axis(n: i64) -> Self {
        Vertex { n, path: vec![] }
    }

    pub fn new(n: i64, path: Path) -> Self {
        Vertex { n, path }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "v{}", self.n)
        } else {
            let w: Vec<String> = self.path.iter().map(|b| b.to_string()).collect();
            write!(f, "v{}.{}", self.n, w.join(""))
        }
    }
}

/// Column `n` has content `decos[n mod len]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Periodic {
    pub decos: Vec<Column>,
}

impl Periodic {
    pub fn at(&self, n: i64) -> &Column {
        &self.decos[n.rem_euclid(self.decos.len() as i64) as usize]
    }

    fn period(&self) -> i64 {
        self.decos.len() as i64
    }

    fn from_fn(period: i64, f: impl Fn(i64) -> Column) -> Self {
        Periodic {
            decos: (0..period).map(f).collect(),
        }
    }

    fn minimize(&mut self) {
        let p = self.decos.len();
        for d in 1..=p {
            if p.is_multiple_of(d) && (0..p).all(|i| self.decos[i] == self.decos[i % d]) {
                self.decos.truncate(d);
                return;
            }
        }
    }

    /// Reindex by `n -> n - k`.
    fn translate(&self, k: i64) -> Self {
        Periodic::from_fn(self.period(), |r| self.at(r + k).clone())
    }

    fn mirror(&self) -> Self {
        Periodic::from_fn(self.period(), |r| self.at(-r).clone())
    }

    fn zip(&self, other: &Periodic, f: impl Fn(&Column, &Column) -> Column) -> Self {
        let p = self.period().lcm(&other.period());
        let mut t = Periodic::from_fn(p, |r| f(self.at(r), other.at(r)));
        t.minimize();
        t
    }

    fn covers(&self, other: &Periodic) -> bool {
        let p = self.period().lcm(&other.period());
        (0..p).all(|r| other.at(r).is_subset(self.at(r)))
    }
}

/// The fixed vertex set of a fixator, closed and convex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexSet {
    pub lo: i64,
    pub hi: i64,
    pub cols: Vec<Column>,
    pub minus: Option<Periodic>,
    pub plus: Option<Periodic>,
}

impl VertexSet {
    fn empty() -> Self {
        VertexSet {
            lo: 0,
            hi: 0,
            cols: vec![],
            minus: None,
            plus: None,
        }
    }

    pub fn column(&self, n: i64) -> Column {
        if n >= self.lo && n < self.hi {
            self.cols[(n - self.lo) as usize].clone()
        } else if n >= self.hi {
            self.plus.as_ref().map(|t| t.at(n).clone()).unwrap_or_default()
        } else {
            self.minus.as_ref().map(|t| t.at(n).clone()).unwrap_or_default()
        }
    }

    pub fn has(&self, v: &Vertex) -> bool {
        if v.n >= self.lo && v.n < self.hi {
            self.cols[(v.n - self.lo) as usize].contains(&v.path)
        } else if v.n >= self.hi {
            self.plus.as_ref().is_some_and(|t| t.at(v.n).contains(&v.path))
        } else {
            self.minus.as_ref().is_some_and(|t| t.at(v.n).contains(&v.path))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.minus.is_none() && self.plus.is_none() && self.cols.iter().all(|c| c.is_empty())
    }

    pub fn is_finite(&self) -> bool {
        self.minus.is_none() && self.plus.is_none()
    }

    /// Explicit vertices in the window.
    pub fn window_vertices(&self) -> Vec<Vertex> {
        (self.lo..self.hi)
            .flat_map(|n| {
                self.cols[(n - self.lo) as usize]
                    .iter()
                    .map(move |w| Vertex::new(n, w.clone()))
            })
            .collect()
    }

    fn widen(&self, lo: i64, hi: i64) -> Self {
        let (lo, hi) = (lo.min(self.lo), hi.max(self.hi));
        VertexSet {
            lo,
            hi,
            cols: (lo..hi).map(|n| self.column(n)).collect(),
            minus: self.minus.clone(),
            plus: self.plus.clone(),
        }
    }

    fn mirror(&self) -> Self {
        VertexSet {
            lo: 1 - self.hi,
            hi: 1 - self.lo,
            cols: self.cols.iter().rev().cloned().collect(),
            minus: self.plus.as_ref().map(Periodic::mirror),
            plus: self.minus.as_ref().map(Periodic::mirror),
        }
    }

    fn translate(&self, k: i64) -> Self {
        VertexSet {
            lo: self.lo - k,
            hi: self.hi - k,
            cols: self.cols.clone(),
            minus: self.minus.as_ref().map(|t| t.translate(k)),
            plus: self.plus.as_ref().map(|t| t.translate(k)),
        }
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tail = |t: &Option<Periodic>| match t {
            None => "-".to_string(),
            Some(t) => format!("{} col(s)", t.decos.len()),
        };
        let vs: Vec<String> = self.window_vertices().iter().map(|v| v.to_string()).collect();
        write!(
            f,
            "{{{}}} minus-tail={} plus-tail={}",
            vs.join(","),
            tail(&self.minus),
            tail(&self.plus)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Minus,
    Plus,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TreeSub {
    /// Pointwise fixator of a closed convex set.
    Fix(VertexSet),
    /// Elements fixing the decorated ray toward `end` from some column on.
    Eventual { end: End, tail: Periodic },
}

impl fmt::Display for TreeSub {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSub::Fix(s) => write!(f, "Fix{s}"),
            TreeSub::Eventual { end, tail } => {
                write!(f, "eventual fixator toward {end:?} ({} col period)", tail.decos.len())
            }
        }
    }
}

fn fixset(u: &TreeSub) -> Result<&VertexSet> {
    match u {
        TreeSub::Fix(s) => Ok(s),
        TreeSub::Eventual { .. } => Err(unrepresentable("operation on an eventual ray fixator")),
    }
}

impl TreeModel {
    pub fn new(q: u64) -> Result<Self> {
        if !(2..=64).contains(&q) {
            return Err(Error::Invalid(format!(
                "tree valence q+1 needs 2 <= q <= 64, got q={q}"
            )));
        }
        Ok(TreeModel { q })
    }

    fn letters(&self, path: &[u8]) -> u8 {
        if path.is_empty() {
            (self.q - 1) as u8
        } else {
            self.q as u8
        }
    }

    pub fn valid_vertex(&self, v: &Vertex) -> bool {
        v.path.iter().enumerate().all(|(i, &b)| b < self.letters(&v.path[..i]))
    }

    pub fn neighbours(&self, v: &Vertex) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.q as usize + 1);
        if v.path.is_empty() {
            out.push(Vertex::axis(v.n - 1));
            out.push(Vertex::axis(v.n + 1));
        } else {
            out.push(Vertex::new(v.n, v.path[..v.path.len() - 1].to_vec()));
        }
        for b in 0..self.letters(&v.path) {
            let mut w = v.path.clone();
            w.push(b);
            out.push(Vertex::new(v.n, w));
        }
        out
    }

    /// Vertices within distance `r` of `center`.
    pub fn ball(&self, center: &Vertex, r: usize) -> Vec<Vertex> {
        let mut seen: BTreeSet<Vertex> = [center.clone()].into();
        let mut frontier = vec![center.clone()];
        for _ in 0..r {
            let mut next = Vec::new();
            for v in &frontier {
                for u in self.neighbours(v) {
                    if seen.insert(u.clone()) {
                        next.push(u);
                    }
                }
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    // ---- constructors ----

    pub fn whole(&self) -> TreeSub {
        TreeSub::Fix(VertexSet::empty())
    }

    pub fn fix<I: IntoIterator<Item = Vertex>>(&self, vs: I) -> Result<TreeSub> {
        let vs: Vec<Vertex> = vs.into_iter().collect();
        if let Some(v) = vs.iter().find(|v| !self.valid_vertex(v)) {
            return Err(Error::Invalid(format!("{v} is not a vertex of T_{}", self.q + 1)));
        }
        if vs.is_empty() {
            return Ok(self.whole());
        }
        let lo = vs.iter().map(|v| v.n).min().expect("nonempty");
        let hi = vs.iter().map(|v| v.n + 1).max().expect("nonempty");
        let mut cols = vec![Column::new(); (hi - lo) as usize];
        for v in vs {
            cols[(v.n - lo) as usize].insert(v.path);
        }
        Ok(TreeSub::Fix(self.close(VertexSet {
            lo,
            hi,
            cols,
            minus: None,
            plus: None,
        })))
    }

    /// `stab(v_0)`.
    pub fn standard(&self) -> TreeSub {
        self.fix([Vertex::axis(0)]).expect("v_0 is a vertex")
    }

    /// Fixator of the whole axis.
    pub fn axis_fixator(&self) -> TreeSub {
        let tail = Periodic {
            decos: vec![[vec![]].into()],
        };
        TreeSub::Fix(self.close(VertexSet {
            lo: 0,
            hi: 0,
            cols: vec![],
            minus: Some(tail.clone()),
            plus: Some(tail),
        }))
    }

    /// Fixator of the axis ray `{v_n : n >= start}` (or `n <= start`).
    pub fn ray_fixator(&self, end: End, start: i64) -> TreeSub {
        let tail = Some(Periodic {
            decos: vec![[vec![]].into()],
        });
        let s = match end {
            End::Plus => VertexSet {
                lo: start,
                hi: start,
                cols: vec![],
                minus: None,
                plus: tail,
            },
            End::Minus => VertexSet {
                lo: start + 1,
                hi: start + 1,
                cols: vec![],
                minus: tail,
                plus: None,
            },
        };
        TreeSub::Fix(self.close(s))
    }

    pub fn is_compact(&self, u: &TreeSub) -> bool {
        matches!(u, TreeSub::Fix(s) if !s.is_empty())
    }

    pub fn is_open(&self, u: &TreeSub) -> bool {
        matches!(u, TreeSub::Fix(s) if s.is_finite())
    }

    // ---- closure ----

    fn close_tail(&self, t: &mut Periodic) {
        for col in t.decos.iter_mut() {
            let prefixes: Vec<Path> = col
                .iter()
                .flat_map(|w| (0..w.len()).map(move |i| w[..i].to_vec()))
                .collect();
            col.extend(prefixes);
            col.insert(vec![]);
        }
        loop {
            let mut added = false;
            for col in t.decos.iter_mut() {
                let snapshot: Vec<Path> = col.iter().cloned().collect();
                for w in snapshot {
                    // axis neighbours of a tail column are in the tail
                    let fixed_base = 1 + usize::from(w.is_empty());
                    let kids: Vec<Path> = (0..self.letters(&w))
                        .map(|b| {
                            let mut c = w.clone();
                            c.push(b);
                            c
                        })
                        .collect();
                    let missing: Vec<&Path> = kids.iter().filter(|c| !col.contains(*c)).collect();
                    let total = self.q as usize + 1;
                    if missing.len() == 1 && fixed_base + kids.len() - 1 == total - 1 {
                        col.insert(missing[0].clone());
                        added = true;
                    }
                }
            }
            if !added {
                break;
            }
        }
        t.minimize();
    }

    fn hull_step(&self, s: &mut VertexSet) -> bool {
        let verts = s.window_vertices();
        let occupied: BTreeSet<i64> = verts.iter().map(|v| v.n).collect();
        let spans = s.minus.is_some() || s.plus.is_some() || occupied.len() > 1;
        let mut add: Vec<Vertex> = Vec::new();
        if spans {
            let lo = if s.minus.is_some() {
                s.lo
            } else {
                *occupied.first().unwrap_or(&s.hi)
            };
            let hi = if s.plus.is_some() {
                s.hi - 1
            } else {
                *occupied.last().unwrap_or(&(s.lo - 1))
            };
            for n in lo.max(s.lo)..=hi.min(s.hi - 1) {
                add.push(Vertex::axis(n));
            }
            for v in &verts {
                for i in 0..v.path.len() {
                    add.push(Vertex::new(v.n, v.path[..i].to_vec()));
                }
            }
        } else if let Some(&n) = occupied.first() {
            let col = &s.cols[(n - s.lo) as usize];
            let first: BTreeSet<u8> = col.iter().filter_map(|w| w.first().copied()).collect();
            let keep = if col.contains(&vec![]) || first.len() > 1 {
                0
            } else {
                let mut it = col.iter();
                let mut lcp = it.next().expect("nonempty").clone();
                for w in it {
                    let l = lcp.iter().zip(w).take_while(|(a, b)| a == b).count();
                    lcp.truncate(l);
                }
                lcp.len()
            };
            for w in col {
                for i in keep..w.len() {
                    add.push(Vertex::new(n, w[..i].to_vec()));
                }
            }
        }
        let mut changed = false;
        for v in add {
            changed |= s.cols[(v.n - s.lo) as usize].insert(v.path);
        }
        changed
    }

    fn closure_step(&self, s: &mut VertexSet) -> bool {
        let mut changed = false;
        for v in s.window_vertices() {
            let missing: Vec<Vertex> = self.neighbours(&v).into_iter().filter(|u| !s.has(u)).collect();
            if missing.len() == 1 {
                let u = &missing[0];
                if u.n >= s.lo && u.n < s.hi {
                    changed |= s.cols[(u.n - s.lo) as usize].insert(u.path.clone());
                }
            }
        }
        changed
    }

    /// Closed convex hull, in canonical form.
    fn close(&self, s: VertexSet) -> VertexSet {
        if s.is_empty() {
            return VertexSet::empty();
        }
        let mut s = s.widen(s.lo - 2, s.hi + 2);
        if let Some(t) = s.minus.as_mut() {
            self.close_tail(t);
        }
        if let Some(t) = s.plus.as_mut() {
            self.close_tail(t);
        }
        loop {
            let a = self.hull_step(&mut s);
            let b = self.closure_step(&mut s);
            if !a && !b {
                break;
            }
        }
        let expect = |t: &Option<Periodic>, n: i64| t.as_ref().map(|t| t.at(n).clone()).unwrap_or_default();
        while s.lo < s.hi && *s.cols.last().expect("nonempty") == expect(&s.plus, s.hi - 1) {
            s.cols.pop();
            s.hi -= 1;
        }
        while s.lo < s.hi && s.cols[0] == expect(&s.minus, s.lo) {
            s.cols.remove(0);
            s.lo += 1;
        }
        if s.lo == s.hi && s.minus == s.plus {
            s.lo = 0;
            s.hi = 0;
        }
        s
    }

    // ---- lattice operations ----

    pub fn apply(&self, k: i64, u: &TreeSub) -> TreeSub {
        match u {
            TreeSub::Fix(s) => TreeSub::Fix(self.close(s.translate(k))),
            TreeSub::Eventual { end, tail } => {
                let mut t = tail.translate(k);
                t.minimize();
                TreeSub::Eventual { end: *end, tail: t }
            }
        }
    }

    fn union(&self, a: &VertexSet, b: &VertexSet) -> VertexSet {
        let lo = a.lo.min(b.lo);
        let hi = a.hi.max(b.hi);
        let (a, b) = (a.widen(lo, hi), b.widen(lo, hi));
        let join = |x: &Option<Periodic>, y: &Option<Periodic>| match (x, y) {
            (Some(x), Some(y)) => Some(x.zip(y, |p, q| p.union(q).cloned().collect())),
            (Some(x), None) | (None, Some(x)) => Some(x.clone()),
            (None, None) => None,
        };
        VertexSet {
            lo,
            hi,
            cols: a
                .cols
                .iter()
                .zip(&b.cols)
                .map(|(x, y)| x.union(y).cloned().collect())
                .collect(),
            minus: join(&a.minus, &b.minus),
            plus: join(&a.plus, &b.plus),
        }
    }

    fn meet_sets(&self, a: &VertexSet, b: &VertexSet) -> VertexSet {
        let lo = a.lo.min(b.lo);
        let hi = a.hi.max(b.hi);
        let (a, b) = (a.widen(lo, hi), b.widen(lo, hi));
        let meet = |x: &Option<Periodic>, y: &Option<Periodic>| match (x, y) {
            (Some(x), Some(y)) => Some(x.zip(y, |p, q| p.intersection(q).cloned().collect())),
            _ => None,
        };
        VertexSet {
            lo,
            hi,
            cols: a
                .cols
                .iter()
                .zip(&b.cols)
                .map(|(x, y)| x.intersection(y).cloned().collect())
                .collect(),
            minus: meet(&a.minus, &b.minus),
            plus: meet(&a.plus, &b.plus),
        }
    }

    pub fn intersect(&self, u: &TreeSub, v: &TreeSub) -> Result<TreeSub> {
        let (a, b) = (fixset(u)?, fixset(v)?);
        Ok(TreeSub::Fix(self.close(self.union(a, b))))
    }

    fn contains_set(&self, big: &VertexSet, small: &VertexSet) -> bool {
        let tail_ok = |b: &Option<Periodic>, s: &Option<Periodic>| match (b, s) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(b), Some(s)) => b.covers(s),
        };
        if !tail_ok(&big.minus, &small.minus) || !tail_ok(&big.plus, &small.plus) {
            return false;
        }
        let lo = big.lo.min(small.lo);
        let hi = big.hi.max(small.hi);
        (lo..hi).all(|n| small.column(n).is_subset(&big.column(n)))
    }

    /// `u ≤ v` as subgroups.
    pub fn le(&self, u: &TreeSub, v: &TreeSub) -> bool {
        match (u, v) {
            (TreeSub::Fix(a), TreeSub::Fix(b)) => self.contains_set(a, b),
            (TreeSub::Fix(a), TreeSub::Eventual { end, tail }) => {
                let t = if *end == End::Plus { &a.plus } else { &a.minus };
                t.as_ref().is_some_and(|t| t.covers(tail))
            }
            (TreeSub::Eventual { .. }, TreeSub::Fix(b)) => b.is_empty(),
            (TreeSub::Eventual { end: e1, tail: t1 }, TreeSub::Eventual { end: e2, tail: t2 }) => {
                e1 == e2 && t1.covers(t2)
            }
        }
    }

    /// `[V : U]` for `U ≤ V`.
    pub fn index(&self, v: &TreeSub, u: &TreeSub) -> Result<BigUint> {
        if !self.le(u, v) {
            return Err(Error::NotSubgroup("fixator is not contained in the larger one".into()));
        }
        let (small, big) = match (v, u) {
            (TreeSub::Fix(a), TreeSub::Fix(b)) => (a, b),
            _ if u == v => return Ok(BigUint::one()),
            _ => return Err(Error::InfiniteIndex),
        };
        if small.minus != big.minus || small.plus != big.plus {
            return Err(Error::InfiniteIndex);
        }
        if small.is_empty() {
            return if big.is_empty() {
                Ok(BigUint::one())
            } else {
                Err(Error::InfiniteIndex)
            };
        }
        let lo = small.lo.min(big.lo);
        let hi = small.hi.max(big.hi);
        let mut cur = small.widen(lo, hi);
        let mut todo: Vec<Vertex> = big
            .widen(lo, hi)
            .window_vertices()
            .into_iter()
            .filter(|x| !cur.has(x))
            .collect();
        let mut index = BigUint::one();
        while !todo.is_empty() {
            let pos = todo
                .iter()
                .position(|x| self.neighbours(x).iter().any(|y| cur.has(y)))
                .expect("convex sets grow along edges");
            let x = todo.swap_remove(pos);
            let at = self.neighbours(&x).into_iter().find(|y| cur.has(y)).expect("attached");
            let free = self.neighbours(&at).iter().filter(|y| !cur.has(y)).count();
            index *= BigUint::from(free);
            cur.cols[(x.n - cur.lo) as usize].insert(x.path);
        }
        Ok(index)
    }

    /// `Fix(H) = Fix(A)·Fix(B)` iff no vertex of `H` has neighbours in both
    /// `A \ H` and `B \ H`.
    pub fn product_equals(&self, u: &TreeSub, a: &TreeSub, b: &TreeSub) -> Result<bool> {
        let h = fixset(u)?;
        if !self.is_compact(u) || !self.is_open(u) {
            return Err(unrepresentable("product test needs a compact open fixator"));
        }
        let (fa, fb) = (fixset(a)?, fixset(b)?);
        if !self.contains_set(fa, h) || !self.contains_set(fb, h) {
            return Err(Error::NotSubgroup("factor not contained in the product target".into()));
        }
        for v in h.window_vertices() {
            let out: Vec<Vertex> = self.neighbours(&v).into_iter().filter(|y| !h.has(y)).collect();
            if out.iter().any(|y| fa.has(y)) && out.iter().any(|y| fb.has(y)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    // ---- limits ----

    /// `⋃_{j≥0} (S - kj)` for `k > 0`.
    fn sweep_down(&self, s: &VertexSet, k: i64) -> VertexSet {
        let pm = s.minus.as_ref().map_or(1, Periodic::period);
        let pp = s.plus.as_ref().map_or(1, Periodic::period);
        let q = k.lcm(&pm.lcm(&pp));
        let reach = |c: i64| -> Column {
            let steps = (s.hi - c).max(0) / k + pp + 1;
            (0..=steps).flat_map(|j| s.column(c + k * j)).collect()
        };
        let lo = s.lo - k * pm - q;
        let tail = Periodic::from_fn(q, |r| {
            // representative column below `lo` in residue class r
            let c = lo - q + (r - (lo - q)).rem_euclid(q);
            reach(c)
        });
        let plus = s
            .plus
            .as_ref()
            .map(|t| Periodic::from_fn(pp, |r| (0..=pp).flat_map(|j| t.at(r + k * j).clone()).collect()));
        self.close(VertexSet {
            lo,
            hi: s.hi,
            cols: (lo..s.hi).map(reach).collect(),
            minus: Some(tail),
            plus,
        })
    }

    /// `⋂_{n≥0} x^{kn}(U)`.
    pub fn forward_limit(&self, u: &TreeSub, k: i64) -> Result<TreeSub> {
        let s = fixset(u)?;
        if k == 0 || s.is_empty() {
            return Ok(u.clone());
        }
        let out = if k > 0 {
            self.sweep_down(s, k)
        } else {
            self.sweep_down(&s.mirror(), -k).mirror()
        };
        Ok(TreeSub::Fix(self.close(out)))
    }

    /// `⋃_{n≥0} x^{kn}(U)` for `U ≤ x^k(U)`.
    pub fn ascending_limit(&self, u: &TreeSub, k: i64) -> Result<TreeSub> {
        let img = self.apply(k, u);
        if img == *u {
            return Ok(u.clone());
        }
        if !self.le(u, &img) {
            return Err(unrepresentable("ascending union of non-nested fixators"));
        }
        let s = fixset(u)?;
        let (end, ahead, behind) = if k > 0 {
            (End::Minus, &s.plus, &s.minus)
        } else {
            (End::Plus, &s.minus, &s.plus)
        };
        match (ahead, behind) {
            (None, Some(t)) => Ok(TreeSub::Eventual { end, tail: t.clone() }),
            _ => Err(unrepresentable("ascending union of fixators of doubly infinite sets")),
        }
    }

    // ---- nub and tidying support ----

    pub fn nub(&self, k: i64) -> Result<TreeSub> {
        if k == 0 {
            return Err(Error::IdentityAutomorphism);
        }
        Ok(self.axis_fixator())
    }

    /// Orbit of column content `x` under the fixator of `fl`.
    fn spread(&self, x: &Column, fl: &Column) -> Column {
        let mut out = Column::new();
        for w in x {
            let keep = (0..=w.len())
                .rev()
                .find(|&i| fl.contains(&w[..i].to_vec()))
                .unwrap_or(0);
            if keep == w.len() {
                out.insert(w.clone());
                continue;
            }
            let mut layer: Vec<Path> = vec![w[..keep].to_vec()];
            for depth in keep..w.len() {
                let mut next = Vec::new();
                for p in &layer {
                    for b in 0..self.letters(p) {
                        let mut c = p.clone();
                        c.push(b);
                        if depth == keep && fl.contains(&c) {
                            continue;
                        }
                        next.push(c);
                    }
                }
                layer = next;
            }
            out.extend(layer);
        }
        out
    }

    /// Adjoin a compact `a`-stable fixator `L` to `V`: the group
    /// `(⋂_{l∈L} lVl⁻¹)·L`, which is again a fixator.
    pub fn adjoin(&self, v: &TreeSub, l: &TreeSub) -> Result<TreeSub> {
        let (a, f) = (fixset(v)?, fixset(l)?);
        let lo = a.lo.min(f.lo);
        let hi = a.hi.max(f.hi);
        let (aw, fw) = (a.widen(lo, hi), f.widen(lo, hi));
        let tail = |x: &Option<Periodic>, y: &Option<Periodic>| match (x, y) {
            (Some(x), Some(y)) => Some(x.zip(y, |p, q| self.spread(p, q))),
            (Some(x), None) => Some(x.clone()),
            _ => None,
        };
        let spread = VertexSet {
            lo,
            hi,
            cols: aw.cols.iter().zip(&fw.cols).map(|(x, y)| self.spread(x, y)).collect(),
            minus: tail(&aw.minus, &fw.minus),
            plus: tail(&aw.plus, &fw.plus),
        };
        let closed = self.close(spread);
        Ok(TreeSub::Fix(self.close(self.meet_sets(&closed, f))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn ball_sizes() {
        let t = TreeModel::new(2).unwrap();
        assert_eq!(t.ball(&Vertex::axis(0), 3).len(), 22);
        let t3 = TreeModel::new(3).unwrap();
        assert_eq!(t3.ball(&Vertex::axis(5), 2).len(), 17);
        assert!(t3.ball(&Vertex::axis(0), 3).iter().all(|v| t3.valid_vertex(v)));
    }

    #[test]
    fn edge_index_and_translation() {
        let t = TreeModel::new(3).unwrap();
        let u = t.standard();
        let e = t.fix([Vertex::axis(0), Vertex::axis(1)]).unwrap();
        assert_eq!(t.index(&u, &e).unwrap(), n(4));
        let xu = t.apply(1, &u);
        assert_eq!(xu, t.fix([Vertex::axis(-1)]).unwrap());
        let meet = t.intersect(&xu, &u).unwrap();
        assert_eq!(t.index(&xu, &meet).unwrap(), n(4));
    }

    #[test]
    fn q2_closure_adds_branches() {
        let t = TreeModel::new(2).unwrap();
        // v_{-1}, v_0, v_1 fixed forces the single branch at v_0
        let s = t.fix([Vertex::axis(-1), Vertex::axis(1)]).unwrap();
        assert!(matches!(&s, TreeSub::Fix(vs) if vs.has(&Vertex::new(0, vec![0]))));
        let TreeSub::Fix(ax) = t.axis_fixator() else {
            unreachable!()
        };
        assert!(ax.has(&Vertex::new(7, vec![0])));
        assert!(!ax.has(&Vertex::new(7, vec![0, 1])));
    }

    #[test]
    fn limits_of_an_edge() {
        let t = TreeModel::new(2).unwrap();
        let e = t.fix([Vertex::axis(0), Vertex::axis(1)]).unwrap();
        let plus = t.forward_limit(&e, 1).unwrap();
        let minus = t.forward_limit(&e, -1).unwrap();
        assert_eq!(plus, t.ray_fixator(End::Minus, 1));
        assert_eq!(minus, t.ray_fixator(End::Plus, 0));
        assert!(t.product_equals(&e, &plus, &minus).unwrap());
        let v = t.standard();
        let vp = t.forward_limit(&v, 1).unwrap();
        let vm = t.forward_limit(&v, -1).unwrap();
        assert!(!t.product_equals(&v, &vp, &vm).unwrap());
        assert!(t.le(&t.nub(1).unwrap(), &e));
    }

    #[test]
    fn off_axis_sweep_is_periodic() {
        let t = TreeModel::new(3).unwrap();
        let w = t.fix([Vertex::new(0, vec![1, 2])]).unwrap();
        let lim = t.forward_limit(&w, 2).unwrap();
        let TreeSub::Fix(s) = &lim else { unreachable!() };
        assert!(s.has(&Vertex::new(-4, vec![1, 2])));
        assert!(!s.has(&Vertex::new(-3, vec![1, 2])));
        assert!(s.has(&Vertex::axis(-3)));
        assert!(!s.has(&Vertex::axis(1)));
        assert_eq!(s.minus.as_ref().unwrap().decos.len(), 2);
    }

    #[test]
    fn ascending_limit_is_eventual() {
        let t = TreeModel::new(2).unwrap();
        let e = t.fix([Vertex::axis(0), Vertex::axis(1)]).unwrap();
        let plus = t.forward_limit(&e, 1).unwrap();
        let pp = t.ascending_limit(&plus, 1).unwrap();
        assert!(matches!(pp, TreeSub::Eventual { end: End::Minus, .. }));
        assert!(t.le(&plus, &pp));
        assert_eq!(t.apply(3, &pp), pp);
    }

    #[test]
    fn adjoin_axis() {
        let t = TreeModel::new(3).unwrap();
        let v = t
            .fix([Vertex::axis(0), Vertex::axis(1), Vertex::new(0, vec![0])])
            .unwrap();
        let w = t.adjoin(&v, &t.nub(1).unwrap()).unwrap();
        // the orbit of the branch fills every branch at v_0, which forces v_{-1}
        assert_eq!(w, t.fix([Vertex::axis(-1), Vertex::axis(1)]).unwrap());
        let v2 = t.fix([Vertex::axis(0), Vertex::new(0, vec![0, 2])]).unwrap();
        let w2 = t.adjoin(&v2, &t.nub(1).unwrap()).unwrap();
        assert_eq!(w2, t.standard());
    }
}
