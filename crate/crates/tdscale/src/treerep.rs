//! Finite balls of the tree on which `U₊₊ ⋊ ⟨a⟩` acts.
//!
//! Vertices are cosets `x·aⁿ·U₊` with `x ∈ U₊₊`, stored as a level `n` and a
//! representative `x` of `x + aⁿ(U₊)`. The parent of a vertex at level `n`
//! is the coset of `a^{n+1}(U₊)` containing it. Only the abelian models
//! (shift and p-adic vector) carry explicit group elements.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::core::{Auto, Model, Sub};
use crate::dynamics::{displacement, is_tidy, plus_part};
use crate::error::{unrepresentable, Error, Result};
use crate::ext::Ext;
use crate::model_padic_vec::{BoxLattice, VecModel};
use crate::model_shift::{SeqElement, ShiftModel};
use crate::monomial::Monomial;

/// Largest ball that will be built.
pub const VERTEX_CAP: usize = 200_000;

/// `m·p^e`, normalized so that `p ∤ m`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct PNum {
    m: BigInt,
    e: i64,
}

impl PNum {
    fn zero() -> Self {
        PNum {
            m: BigInt::zero(),
            e: 0,
        }
    }

    fn new(mut m: BigInt, mut e: i64, p: &BigInt) -> Self {
        if m.is_zero() {
            return PNum::zero();
        }
        while (&m % p).is_zero() {
            m /= p;
            e += 1;
        }
        PNum { m, e }
    }

    fn val(&self) -> Ext {
        if self.m.is_zero() {
            Ext::PosInf
        } else {
            Ext::Fin(self.e)
        }
    }

    fn add(&self, o: &PNum, p: &BigInt) -> PNum {
        if self.m.is_zero() {
            return o.clone();
        }
        if o.m.is_zero() {
            return self.clone();
        }
        let e = self.e.min(o.e);
        let lift = |x: &PNum| &x.m * p.pow((x.e - e) as u32);
        PNum::new(lift(self) + lift(o), e, p)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Point {
    Shift(SeqElement),
    Vec(Vec<PNum>),
}

enum Space<'a> {
    Shift(&'a ShiftModel),
    Vec(&'a VecModel),
}

impl Space<'_> {
    fn of(m: &Model) -> Result<Space<'_>> {
        match m {
            Model::Shift(s) => Ok(Space::Shift(s)),
            Model::Vec(v) => Ok(Space::Vec(v)),
            _ => Err(unrepresentable("explicit coset representatives for this model")),
        }
    }

    fn zero(&self) -> Point {
        match self {
            Space::Shift(s) => Point::Shift(s.elem_zero()),
            Space::Vec(v) => Point::Vec(vec![PNum::zero(); v.n]),
        }
    }

    fn p(&self) -> BigInt {
        match self {
            Space::Shift(s) => BigInt::from(s.p),
            Space::Vec(v) => BigInt::from(v.p),
        }
    }

    /// `x + k·y` for `k = ±1`.
    fn axpy(&self, x: &Point, k: i64, y: &Point) -> Point {
        match (self, x, y) {
            (Space::Shift(s), Point::Shift(x), Point::Shift(y)) => {
                let kk = k.rem_euclid(s.p as i64) as u32;
                Point::Shift(s.elem_axpy(x, kk, y))
            }
            (Space::Vec(_), Point::Vec(x), Point::Vec(y)) => {
                let p = self.p();
                Point::Vec(
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| a.add(&PNum { m: &b.m * k, e: b.e }, &p))
                        .collect(),
                )
            }
            _ => unreachable!("points match their space"),
        }
    }

    fn act(&self, a: &Auto, x: &Point) -> Point {
        match (self, a, x) {
            (Space::Shift(s), Auto::Shift(w), Point::Shift(x)) => Point::Shift(s.apply_element(w, x)),
            (Space::Vec(_), Auto::Mono(mono), Point::Vec(x)) => Point::Vec(act_mono(mono, x)),
            _ => unreachable!("automorphisms match their space"),
        }
    }

    fn member(&self, u: &Sub, x: &Point) -> bool {
        match (self, u, x) {
            (Space::Shift(s), Sub::Shift(u), Point::Shift(x)) => s.contains(u, x),
            (Space::Vec(_), Sub::Vec(b), Point::Vec(x)) => x.iter().zip(&b.vals).all(|(c, k)| c.val() >= *k),
            _ => unreachable!("subgroups match their space"),
        }
    }

    fn transversal(&self, big: &Sub, small: &Sub, cap: usize) -> Result<Vec<Point>> {
        match (self, big, small) {
            (Space::Shift(s), Sub::Shift(b), Sub::Shift(sm)) => {
                Ok(s.transversal(b, sm, cap)?.into_iter().map(Point::Shift).collect())
            }
            (Space::Vec(v), Sub::Vec(b), Sub::Vec(sm)) => vec_transversal(v, b, sm, cap),
            _ => unreachable!("subgroups match their space"),
        }
    }
}

fn act_mono(a: &Monomial, x: &[PNum]) -> Vec<PNum> {
    let mut out = vec![PNum::zero(); x.len()];
    for (i, xi) in x.iter().enumerate() {
        if !xi.m.is_zero() {
            out[a.perm[i]] = PNum {
                m: xi.m.clone(),
                e: xi.e + a.val[i],
            };
        }
    }
    out
}

fn vec_transversal(v: &VecModel, big: &BoxLattice, small: &BoxLattice, cap: usize) -> Result<Vec<Point>> {
    let mut ranges = Vec::new();
    let mut count = BigUint::one();
    for (b, s) in big.vals.iter().zip(&small.vals) {
        match (b, s) {
            (Ext::Fin(k), Ext::Fin(l)) if k <= l => {
                ranges.push((*k, *l));
                count *= BigUint::from(v.p).pow((l - k) as u32);
            }
            _ if b == s => ranges.push((0, 0)),
            _ => return Err(Error::InfiniteIndex),
        }
    }
    if count > BigUint::from(cap) {
        return Err(Error::EnumerationTooLarge(format!("{count} cosets")));
    }
    let p = BigInt::from(v.p);
    let mut pts: Vec<Vec<PNum>> = vec![vec![]];
    for &(k, l) in &ranges {
        // residues 0..p^(l-k), scaled by p^k
        let span = (l - k) as u32;
        let n = v.p.pow(span);
        pts = pts
            .into_iter()
            .flat_map(|pt| {
                let p = p.clone();
                (0..n).map(move |r| {
                    let mut q = pt.clone();
                    q.push(PNum::new(BigInt::from(r), k, &p));
                    q
                })
            })
            .collect();
    }
    Ok(pts.into_iter().map(Point::Vec).collect())
}

fn show_point(x: &Point) -> String {
    match x {
        Point::Shift(s) => {
            let parts: Vec<String> = s
                .coords
                .iter()
                .enumerate()
                .flat_map(|(c, m)| m.iter().map(move |(n, v)| format!("{v}e{c}@{n}")))
                .collect();
            if parts.is_empty() {
                "0".into()
            } else {
                parts.join("+")
            }
        }
        Point::Vec(v) => {
            let parts: Vec<String> = v
                .iter()
                .map(|c| {
                    if c.m.is_zero() {
                        "0".into()
                    } else {
                        format!("{}p^{}", c.m, c.e)
                    }
                })
                .collect();
            format!("({})", parts.join(","))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TreeVertex {
    pub id: usize,
    /// `ancestor level; digits` path from the base ray
    pub label: String,
    /// `x` in `x·aⁿ·U₊`
    pub rep: String,
    pub level: i64,
    pub distance: usize,
    pub on_axis: bool,
    /// on the ray from the base vertex toward the attracting end
    pub on_ray: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TreeChecks {
    pub cosets_distinct: bool,
    pub edges_nested: bool,
    pub acyclic_connected: bool,
    pub interior_degree: bool,
    /// `a` maps each axis vertex to the next one up
    pub axis_translation_one: bool,
    /// sampled elements of `U₊` fix the base ray
    pub ray_fixed: bool,
    /// `x·aⁿ` maps the base vertex to `x·aⁿ·U₊` for every vertex
    pub transitive: bool,
}

impl TreeChecks {
    pub fn all(&self) -> bool {
        self.cosets_distinct
            && self.edges_nested
            && self.acyclic_connected
            && self.interior_degree
            && self.axis_translation_one
            && self.ray_fixed
            && self.transitive
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CosetTree {
    pub s: u64,
    pub radius: usize,
    pub vertices: Vec<TreeVertex>,
    /// `(child, parent)`: the parent is one level up.
    pub edges: Vec<(usize, usize)>,
    pub checks: TreeChecks,
}

impl CosetTree {
    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(a, b)| *a == v || *b == v).count()
    }
}

struct Builder<'a> {
    sp: Space<'a>,
    m: &'a Model,
    a: &'a Auto,
    plus: Sub,
    levels: BTreeMap<i64, Sub>,
    pts: Vec<(i64, Point)>,
}

impl Builder<'_> {
    fn level(&mut self, n: i64) -> Result<Sub> {
        if let Some(s) = self.levels.get(&n) {
            return Ok(s.clone());
        }
        let s = self.m.apply(&self.a.pow(n), &self.plus)?;
        self.levels.insert(n, s.clone());
        Ok(s)
    }

    fn same(&mut self, n: i64, x: &Point, y: &Point) -> Result<bool> {
        let l = self.level(n)?;
        Ok(self.sp.member(&l, &self.sp.axpy(x, -1, y)))
    }

    /// Vertex holding the coset `x + aⁿ(U₊)`, if it lies in the ball.
    fn find(&mut self, n: i64, x: &Point) -> Result<Option<usize>> {
        for i in 0..self.pts.len() {
            if self.pts[i].0 == n {
                let y = self.pts[i].1.clone();
                if self.same(n, x, &y)? {
                    return Ok(Some(i));
                }
            }
        }
        Ok(None)
    }

    /// `(x·a^k)` applied to the vertex `y·aⁿ·U₊`.
    fn act(&self, x: &Point, k: i64, n: i64, y: &Point) -> (i64, Point) {
        let moved = self.sp.act(&self.a.pow(k), y);
        (n + k, self.sp.axpy(x, 1, &moved))
    }
}

/// Ball of radius `radius` around the vertex `U₊`, for `U` tidy for `a`.
pub fn build_tree(m: &Model, u: &Sub, a: &Auto, radius: usize) -> Result<CosetTree> {
    let sp = Space::of(m)?;
    if !is_tidy(m, u, a)? {
        return Err(Error::Invalid(format!("{u} is not tidy for the automorphism")));
    }
    let s_big = displacement(m, u, a)?;
    if s_big.is_one() {
        return Err(Error::ScaleOne);
    }
    let s = s_big
        .to_u64()
        .filter(|&s| s < VERTEX_CAP as u64)
        .ok_or_else(|| Error::EnumerationTooLarge(format!("scale {s_big}")))?;
    let mut size: u128 = 1;
    let mut shell: u128 = s as u128 + 1;
    for _ in 0..radius {
        size += shell;
        shell *= s as u128;
        if size > VERTEX_CAP as u128 {
            return Err(Error::EnumerationTooLarge(format!(
                "ball of radius {radius} at scale {s}"
            )));
        }
    }
    let plus = plus_part(m, u, a)?;
    let mut b = Builder {
        sp,
        m,
        a,
        plus: plus.clone(),
        levels: BTreeMap::new(),
        pts: vec![],
    };
    let up = b.level(1)?;
    let digits = b.sp.transversal(&up, &plus, VERTEX_CAP)?;
    if digits.len() as u64 != s || !b.sp.member(&plus, &digits[0]) {
        return Err(Error::Invalid("coset transversal does not match the scale".into()));
    }
    let zero = b.sp.zero();
    let r = radius as i64;
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    // base ray (k, 0) for k = 0..=r, then the subtrees hanging off it
    let mut ray_ids = Vec::new();
    for k in 0..=r {
        let id = vertices.len();
        vertices.push(TreeVertex {
            id,
            label: format!("[{k};]"),
            rep: show_point(&zero),
            level: k,
            distance: k as usize,
            on_axis: true,
            on_ray: true,
        });
        b.pts.push((k, zero.clone()));
        if k > 0 {
            edges.push((id - 1, id));
        }
        ray_ids.push(id);
    }
    for k in 0..=r {
        // (parent id, level, rep, digits, distance)
        let mut stack = vec![(ray_ids[k as usize], k, zero.clone(), String::new(), k as usize)];
        while let Some((pid, n, x, path, dist)) = stack.pop() {
            if dist as i64 >= r {
                continue;
            }
            for (d, t) in digits.iter().enumerate().rev() {
                let on_ray_child = d == 0 && path.is_empty() && k > 0;
                if on_ray_child {
                    continue;
                }
                let step = b.sp.act(&a.pow(n - 1), t);
                let y = b.sp.axpy(&x, 1, &step);
                let id = vertices.len();
                let label = if path.is_empty() {
                    format!("[{k};{d}]")
                } else {
                    format!("{}.{d}]", &path[..path.len() - 1])
                };
                let on_axis = k == 0
                    && label
                        .trim_start_matches("[0;")
                        .chars()
                        .all(|c| c == '0' || c == '.' || c == ']');
                vertices.push(TreeVertex {
                    id,
                    label: label.clone(),
                    rep: show_point(&y),
                    level: n - 1,
                    distance: dist + 1,
                    on_axis,
                    on_ray: false,
                });
                b.pts.push((n - 1, y.clone()));
                edges.push((id, pid));
                stack.push((id, n - 1, y, label, dist + 1));
            }
        }
    }
    // stable order: by distance, then label
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&i, &j| (vertices[i].distance, &vertices[i].label).cmp(&(vertices[j].distance, &vertices[j].label)));
    let mut new_id = vec![0; vertices.len()];
    for (new, &old) in order.iter().enumerate() {
        new_id[old] = new;
    }
    let vertices: Vec<TreeVertex> = order
        .iter()
        .enumerate()
        .map(|(new, &old)| TreeVertex {
            id: new,
            ..vertices[old].clone()
        })
        .collect();
    b.pts = order.iter().map(|&old| b.pts[old].clone()).collect();
    let mut edges: Vec<(usize, usize)> = edges.iter().map(|&(c, p)| (new_id[c], new_id[p])).collect();
    edges.sort();

    let checks = verify(&mut b, &vertices, &edges, s, radius, &digits)?;
    Ok(CosetTree {
        s,
        radius,
        vertices,
        edges,
        checks,
    })
}

fn verify(
    b: &mut Builder,
    vertices: &[TreeVertex],
    edges: &[(usize, usize)],
    s: u64,
    radius: usize,
    digits: &[Point],
) -> Result<TreeChecks> {
    let nv = vertices.len();
    let mut cosets_distinct = true;
    for i in 0..nv {
        for j in i + 1..nv {
            if b.pts[i].0 == b.pts[j].0 {
                let (n, x, y) = (b.pts[i].0, b.pts[i].1.clone(), b.pts[j].1.clone());
                if b.same(n, &x, &y)? {
                    cosets_distinct = false;
                }
            }
        }
    }
    let mut edges_nested = true;
    for &(c, p) in edges {
        let (n, x) = b.pts[p].clone();
        edges_nested &= b.pts[c].0 + 1 == n && b.same(n, &b.pts[c].1.clone(), &x)?;
    }
    // BFS from the base vertex
    let mut adj = vec![Vec::new(); nv];
    for &(c, p) in edges {
        adj[c].push(p);
        adj[p].push(c);
    }
    let base = vertices.iter().position(|v| v.distance == 0).expect("base vertex");
    let mut dist = vec![usize::MAX; nv];
    dist[base] = 0;
    let mut q = VecDeque::from([base]);
    while let Some(v) = q.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                q.push_back(w);
            }
        }
    }
    let acyclic_connected =
        edges.len() + 1 == nv && dist.iter().zip(vertices).all(|(&d, v)| d == v.distance && d <= radius);
    let interior_degree = (0..nv).all(|v| dist[v] == radius || adj[v].len() as u64 == s + 1);

    let zero = b.sp.zero();
    let mut axis_translation_one = true;
    for v in vertices.iter().filter(|v| v.on_axis && v.level < radius as i64) {
        let (n, x) = b.act(&zero, 1, v.level, &b.pts[v.id].1.clone());
        let target = b.find(n, &x)?;
        axis_translation_one &= target.is_some_and(|t| vertices[t].on_axis && vertices[t].level == v.level + 1);
    }

    // elements of U₊ built from digits pushed down to level -radius
    let mut sample = vec![zero.clone()];
    for j in 1..=radius.max(1) as i64 {
        for t in digits {
            sample.push(b.sp.act(&b.a.pow(-j), t));
        }
    }
    let mut ray_fixed = true;
    for x in &sample {
        ray_fixed &= b.sp.member(&b.plus, x);
        for v in vertices.iter().filter(|v| v.on_ray) {
            let (n, y) = b.act(x, 0, v.level, &b.pts[v.id].1.clone());
            ray_fixed &= b.find(n, &y)? == Some(v.id);
        }
    }

    let mut transitive = true;
    for v in vertices {
        let (n, x) = b.pts[v.id].clone();
        let (m, y) = b.act(&x, n, 0, &zero);
        transitive &= b.find(m, &y)? == Some(v.id);
    }
    Ok(TreeChecks {
        cosets_distinct,
        edges_nested,
        acyclic_connected,
        interior_degree,
        axis_translation_one,
        ray_fixed,
        transitive,
    })
}

/// DOT text with edges pointing toward the attracting end; the axis is drawn
/// bold red.
pub fn export_dot(t: &CosetTree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph coset_tree {{");
    let _ = writeln!(out, "  rankdir=BT;");
    let _ = writeln!(
        out,
        "  label=\"s={} radius={}; edges point toward the attracting end\";",
        t.s, t.radius
    );
    for v in &t.vertices {
        let style = if v.on_axis { ", color=red, style=bold" } else { "" };
        let _ = writeln!(
            out,
            "  v{} [label=\"{} n={}\"{}];",
            v.id,
            v.label.replace('"', "'"),
            v.level,
            style
        );
    }
    for &(c, p) in &t.edges {
        let axis = t.vertices[c].on_axis && t.vertices[p].on_axis;
        let style = if axis { " [color=red, penwidth=2]" } else { "" };
        let _ = writeln!(out, "  v{c} -> v{p}{style};");
    }
    let _ = writeln!(out, "}}");
    out
}

/// Vertex count of a ball in the `(s+1)`-regular tree.
pub fn ball_size(s: u64, radius: usize) -> u64 {
    (0..radius)
        .fold((1u64, s + 1), |(acc, shell), _| (acc + shell, shell * s))
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Word;
    use crate::model_shift::Support;

    fn lr2() -> Model {
        Model::Shift(ShiftModel::new(2, vec![Support::LeftRestricted]).unwrap())
    }

    fn expanding(m: &Model, name: &str) -> Auto {
        let w = Word::parse(m, &[(name.to_string(), 1)]).unwrap();
        let a = m.eval(&w).unwrap();
        if displacement(m, &m.standard(), &a).unwrap().is_one() {
            a.inverse()
        } else {
            a
        }
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball_size(2, 3), 22);
        assert_eq!(ball_size(3, 2), 17);
        assert_eq!(ball_size(5, 0), 1);
    }

    #[test]
    fn binary_ball() {
        let m = lr2();
        let a = expanding(&m, "tau_0");
        let t = build_tree(&m, &m.standard(), &a, 3).unwrap();
        assert_eq!(t.s, 2);
        assert_eq!(t.vertices.len(), 22);
        assert_eq!(t.edges.len(), 21);
        assert!(t.checks.all(), "{:?}", t.checks);
        assert_eq!(t.vertices.iter().filter(|v| v.on_axis).count(), 7);
        assert_eq!(
            export_dot(&t),
            export_dot(&build_tree(&m, &m.standard(), &a, 3).unwrap())
        );
    }

    #[test]
    fn radius_zero() {
        let m = lr2();
        let a = expanding(&m, "tau_0");
        let t = build_tree(&m, &m.standard(), &a, 0).unwrap();
        assert_eq!(t.vertices.len(), 1);
        assert!(export_dot(&t).matches("->").count() == 0);
    }

    #[test]
    fn padic_line() {
        let m = Model::Vec(VecModel::new(3, 1).unwrap());
        let a = expanding(&m, "diag(1)");
        let t = build_tree(&m, &m.standard(), &a, 2).unwrap();
        assert_eq!(t.s, 3);
        assert_eq!(t.vertices.len(), 17);
        assert!(t.checks.all(), "{:?}", t.checks);
    }

    #[test]
    fn scale_one_rejected() {
        let m = lr2();
        let a = expanding(&m, "tau_0").inverse();
        assert_eq!(build_tree(&m, &m.standard(), &a, 2).unwrap_err(), Error::ScaleOne);
    }
}
