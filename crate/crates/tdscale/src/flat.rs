//! Flat groups of automorphisms: common tidy subgroups, bisection, roots, the
//! root map and the ordered factorization of a tidy subgroup.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::core::{Auto, Model, Sub, Word};
use crate::dynamics::{
    displacement, is_tidy, minus_part, minusminus_part, plus_part, plusplus_part, tidying, zero_part,
};
use crate::error::{unrepresentable, Error, Result};

/// Round cap for the round-robin tidying search.
pub const ROUND_CAP: usize = 32;
/// Cap on the exponent in the bisection search.
pub const BISECT_CAP: usize = 64;
/// Size cap of the exponent box searched for mixing words.
pub const MIXING_BOX: i64 = 2000;

/// A finitely generated group of automorphisms, optionally extended on a
/// shift model by whole families `{beta_{m,n} : m, n ∈ Z}` from one
/// coordinate to another.
#[derive(Clone, Debug)]
pub struct FlatSpec {
    pub model: Model,
    pub gens: Vec<(String, Word)>,
    pub families: Vec<(usize, usize)>,
}

impl FlatSpec {
    pub fn new(model: Model, gens: Vec<(String, Word)>) -> Self {
        FlatSpec {
            model,
            gens,
            families: vec![],
        }
    }

    pub fn with_family(mut self, from: usize, to: usize) -> Self {
        self.families.push((from, to));
        self
    }

    pub fn autos(&self) -> Result<Vec<Auto>> {
        self.gens.iter().map(|(_, w)| self.model.eval(w)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.gens.is_empty() && self.families.is_empty() {
            return Err(Error::Invalid("a flat group needs at least one generator".into()));
        }
        if !self.families.is_empty() {
            let Model::Shift(sm) = &self.model else {
                return Err(Error::Invalid("generator families exist only on shift models".into()));
            };
            for &(i, j) in &self.families {
                if i == j || i >= sm.coords.len() || j >= sm.coords.len() {
                    return Err(Error::Invalid(format!("bad family {i}->{j}")));
                }
            }
        }
        Ok(())
    }

    /// Smallest family-invariant subgroup containing `u`.
    pub fn family_hull(&self, u: &Sub) -> Result<Sub> {
        let Model::Shift(sm) = &self.model else {
            return Ok(u.clone());
        };
        let Sub::Shift(mut w) = u.clone() else {
            return Err(Error::ModelMismatch("not a shift subgroup".into()));
        };
        loop {
            let before = w.clone();
            for &(i, j) in &self.families {
                w = sm.family_hull(&w, i, j);
            }
            if w == before {
                return Ok(Sub::Shift(w));
            }
        }
    }

    /// Largest family-invariant subgroup of `v`.
    fn family_core(&self, v: &Sub) -> Result<Sub> {
        let Model::Shift(sm) = &self.model else {
            return Ok(v.clone());
        };
        let Sub::Shift(mut w) = v.clone() else {
            return Err(Error::ModelMismatch("not a shift subgroup".into()));
        };
        loop {
            let before = w.clone();
            for &(i, j) in &self.families {
                if sm.family_hull(&w, i, j) != w {
                    let mut keep = vec![true; sm.coords.len()];
                    keep[i] = false;
                    w = sm.intersect(&w, &sm.coordinates(&keep));
                }
            }
            if w == before {
                return Ok(Sub::Shift(w));
            }
        }
    }

    /// Words `g^e` and `g^e h^f` with `e, f = ±1`, deduplicated.
    pub fn short_words(&self) -> Result<Vec<(String, Auto)>> {
        let mut singles = Vec::new();
        for (name, w) in &self.gens {
            for e in [1i64, -1] {
                singles.push((if e == 1 { name.clone() } else { format!("{name}^-1") }, w.pow(e)));
            }
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut push = |label: String, w: &Word| -> Result<()> {
            let a = self.model.eval(w)?;
            if !a.is_identity() && seen.insert(a.clone()) {
                out.push((label, a));
            }
            Ok(())
        };
        for (l, w) in &singles {
            push(l.clone(), w)?;
        }
        for (l1, w1) in &singles {
            for (l2, w2) in &singles {
                push(format!("{l1}·{l2}"), &w1.then_after(w2))?;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonTidy {
    pub u: Sub,
    pub rounds: usize,
    /// Tidiness was checked for every word of at most this length.
    pub certified_depth: usize,
}

fn check_flat(spec: &FlatSpec, u: &Sub) -> Result<Option<String>> {
    for (label, a) in spec.short_words()? {
        if !is_tidy(&spec.model, u, &a)? {
            return Ok(Some(label));
        }
    }
    Ok(None)
}

/// Round-robin tidying over the generators until nothing changes, then a
/// tidiness check for every word of length at most 2.
pub fn find_common_tidy(spec: &FlatSpec, start: Option<&Sub>) -> Result<CommonTidy> {
    spec.validate()?;
    let m = &spec.model;
    let autos = spec.autos()?;
    let mut u = spec.family_hull(&start.cloned().unwrap_or_else(|| m.standard()))?;
    for round in 1..=ROUND_CAP {
        let before = u.clone();
        for a in &autos {
            u = tidying(m, &u, a)?.tidy;
            u = spec.family_hull(&u)?;
        }
        if u == before {
            return match check_flat(spec, &u)? {
                None => Ok(CommonTidy {
                    u,
                    rounds: round,
                    certified_depth: 2,
                }),
                Some(w) => Err(Error::FlatnessUnverified(format!("fixpoint {u} is not tidy for {w}"))),
            };
        }
    }
    Err(Error::FlatnessUnverified(format!(
        "no fixpoint within {ROUND_CAP} rounds"
    )))
}

/// Whether `U` is tidy for every word of length at most 2 and invariant
/// under the families.
pub fn is_tidy_for_group(spec: &FlatSpec, u: &Sub) -> Result<bool> {
    spec.validate()?;
    Ok(spec.family_hull(u)? == *u && check_flat(spec, u)?.is_none())
}

/// `flag_i ⟺ γ_i(U) = U`.
pub fn uniscalar_flags(spec: &FlatSpec, u: &Sub) -> Result<Vec<bool>> {
    spec.autos()?
        .iter()
        .map(|a| Ok(spec.model.apply(a, u)? == *u))
        .collect()
}

// ---- factoring by several automorphisms ----

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiFactor {
    /// `(signs, U_ε)` in lexicographic order with `-` before `+`.
    pub factors: Vec<(String, Sub)>,
    /// Every node of the splitting tree is the product of its two children.
    pub verified: bool,
}

/// `U_ε = ⋂_i U_{a_i ε_i}` for `U` tidy for every `a_i`.
pub fn factor_multi(m: &Model, u: &Sub, autos: &[Auto]) -> Result<MultiFactor> {
    if autos.is_empty() || autos.len() > 3 {
        return Err(Error::Invalid("factor_multi takes one to three automorphisms".into()));
    }
    let parts: Vec<(Sub, Sub)> = autos
        .iter()
        .map(|a| Ok((minus_part(m, u, a)?, plus_part(m, u, a)?)))
        .collect::<Result<_>>()?;
    let mut factors = Vec::new();
    let mut verified = true;
    fn rec(
        m: &Model,
        v: Sub,
        parts: &[(Sub, Sub)],
        label: String,
        out: &mut Vec<(String, Sub)>,
        ok: &mut bool,
    ) -> Result<()> {
        let Some(((minus, plus), rest)) = parts.split_first() else {
            out.push((label, v));
            return Ok(());
        };
        let a = m.intersect(&v, minus)?;
        let b = m.intersect(&v, plus)?;
        *ok &= m.product_equals(&v, &a, &b)?;
        rec(m, a, rest, format!("{label}-"), out, ok)?;
        rec(m, b, rest, format!("{label}+"), out, ok)
    }
    rec(m, u.clone(), &parts, String::new(), &mut factors, &mut verified)?;
    Ok(MultiFactor { factors, verified })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShrinkingFactor {
    /// `U_{a--} ∩ lev(b)`
    pub lev_part: Sub,
    /// `U_{a--} ∩ U_{b--}`
    pub minus_part: Sub,
    /// `U_{a--} ∩ U_{b++}`
    pub plus_part: Sub,
    /// The three factors generate `U_{a--}`; `None` if the model cannot join.
    pub product: Option<bool>,
    /// `b` stabilizes the first two factors.
    pub b_invariant: (bool, bool),
    /// `b(third) ≤ third · b(U_{a0})`; `None` if the model cannot join.
    pub third_bound: Option<bool>,
}

pub fn shrinking_factor(m: &Model, u: &Sub, a: &Auto, b: &Auto) -> Result<ShrinkingFactor> {
    let x = minusminus_part(m, u, a)?;
    let lev_part = m.intersect(&x, &m.levi(b)?)?;
    let minus = m.intersect(&x, &minusminus_part(m, u, b)?)?;
    let plus = m.intersect(&x, &plusplus_part(m, u, b)?)?;
    let product = m
        .join(&lev_part, &minus)
        .and_then(|y| m.join(&y, &plus))
        .ok()
        .map(|y| y == x);
    let b_invariant = (m.apply(b, &lev_part)? == lev_part, m.apply(b, &minus)? == minus);
    let bz = m.apply(b, &zero_part(m, u, a)?)?;
    let third_bound = match m.join(&plus, &bz) {
        Ok(y) => Some(m.le(&m.apply(b, &plus)?, &y)?),
        Err(_) => None,
    };
    Ok(ShrinkingFactor {
        lev_part,
        minus_part: minus,
        plus_part: plus,
        product,
        b_invariant,
        third_bound,
    })
}

/// `(b(U_{a--}) ≰ U_{a--}, b(U_{a--}) ≤ U_{a--}·b(U_{a0}))`.
pub fn shrinking_invariance(m: &Model, u: &Sub, a: &Auto, b: &Auto) -> Result<(bool, bool)> {
    let x = minusminus_part(m, u, a)?;
    let bx = m.apply(b, &x)?;
    let bz = m.apply(b, &zero_part(m, u, a)?)?;
    Ok((!m.le(&bx, &x)?, m.le(&bx, &m.join(&x, &bz)?)?))
}

// ---- bisection and contraction factors ----

/// A flat group with a tidy subgroup `U` and a compact stable `N ≥ nub`.
#[derive(Clone, Debug)]
pub struct FlatCtx {
    pub model: Model,
    pub gens: Vec<Word>,
    pub u: Sub,
    pub n: Sub,
    candidates: Vec<Word>,
}

impl FlatCtx {
    pub fn new(spec: &FlatSpec, u: Sub, n: Sub) -> Result<Self> {
        let gens: Vec<Word> = spec.gens.iter().map(|(_, w)| w.clone()).collect();
        let m = &spec.model;
        if !m.le(&n, &u)? {
            return Err(Error::NotSubgroup(format!("{n} is not contained in {u}")));
        }
        // exponent vectors in the largest box with at most MIXING_BOX points, shortest first
        let k = gens.len() as u32;
        let r: i64 = (1..)
            .take_while(|&r: &i64| (2 * r + 1).pow(k) <= MIXING_BOX)
            .last()
            .unwrap_or(1);
        let mut vecs: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..k {
            vecs = vecs
                .into_iter()
                .flat_map(|v| (-r..=r).map(move |e| [v.clone(), vec![e]].concat()))
                .collect();
        }
        vecs.retain(|v| v.iter().any(|&e| e != 0));
        vecs.sort_by_key(|v| {
            (
                v.iter().map(|e| e.abs()).sum::<i64>(),
                v.iter().map(|e| -e).collect::<Vec<_>>(),
            )
        });
        let candidates = vecs
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&gens)
                    .fold(Word::identity(), |acc, (&e, g)| acc.then_after(&g.pow(e)))
            })
            .collect();
        Ok(FlatCtx {
            model: m.clone(),
            gens,
            u,
            n,
            candidates,
        })
    }

    fn eval(&self, w: &Word) -> Result<Auto> {
        self.model.eval(w)
    }

    /// `con(a/N) = con(a)‾·N`.
    pub fn con_mod(&self, a: &Auto) -> Result<Sub> {
        self.model.join(&self.model.con_closure(a)?, &self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bisection {
    pub gamma: Word,
    pub n: usize,
    /// `con(γ/N) = con(b/N)` inside `G`.
    pub con_equal: bool,
    /// `con(γ⁻¹/N) ∩ U = U_{b+}` inside `G`.
    pub plus_equal: bool,
    /// `U_{b++} = con(γ⁻¹/N) ∩ G`, when representable.
    pub plusplus_equal: Option<bool>,
}

/// `γ = b^n a⁻¹` with `n` least such that `b^n a⁻²(C_b) ≤ C_b`, where
/// `C_b = con(b/N) ∩ U ∩ G` and `G = con(a/N)` (or a stable piece of it).
pub fn bisect(ctx: &FlatCtx, g: &Sub, a: &Word, b: &Word) -> Result<Bisection> {
    let m = &ctx.model;
    let ug = m.intersect(&ctx.u, g)?;
    let bauto = ctx.eval(b)?;
    let cb = m.intersect(&ctx.con_mod(&bauto)?, &ug)?;
    let target = m.apply(&ctx.eval(&a.pow(-2))?, &cb)?;
    let n = (0..=BISECT_CAP)
        .find(|&n| {
            ctx.eval(&b.pow(n as i64))
                .and_then(|bn| m.apply(&bn, &target))
                .and_then(|x| m.le(&x, &cb))
                .unwrap_or(false)
        })
        .ok_or(Error::NoSuchN)?;
    let gamma = b.pow(n as i64).then_after(&a.inverse());
    let ga = ctx.eval(&gamma)?;
    let con_g = m.intersect(&ctx.con_mod(&ga)?, g)?;
    let con_b = m.intersect(&ctx.con_mod(&bauto)?, g)?;
    let con_gi = m.intersect(&ctx.con_mod(&ga.inverse())?, g)?;
    let plus = plus_part(m, &ug, &bauto)?;
    let plus_equal = m.intersect(&con_gi, &ug)? == plus;
    let plusplus_equal = m.ascending_limit(&plus, &bauto).ok().map(|pp| pp == con_gi);
    Ok(Bisection {
        gamma,
        n,
        con_equal: con_g == con_b,
        plus_equal,
        plusplus_equal,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractionFactor {
    pub handle: Sub,
    /// `s(a⁻¹|H)`
    pub s: BigUint,
    /// the bisections that cut this factor out, outermost first
    pub path: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contraction {
    pub factors: Vec<ContractionFactor>,
    /// `s(a⁻¹)`
    pub s_inv: BigUint,
    /// number of prime factors of `s(a⁻¹)` with multiplicity
    pub omega: u32,
}

/// Number of prime factors with multiplicity.
pub fn big_omega(n: &BigUint) -> u32 {
    let mut n = n.clone();
    let mut count = 0;
    let mut d = BigUint::from(2u32);
    while &d * &d <= n {
        while (&n % &d).is_zero() {
            n /= &d;
            count += 1;
        }
        d += 1u32;
    }
    if n > BigUint::one() {
        count += 1;
    }
    count
}

/// Splits `con(a/N)` into scaling subgroups by repeated bisection.
pub fn factor_contraction(ctx: &FlatCtx, a: &Word) -> Result<Contraction> {
    let m = &ctx.model;
    let aa = ctx.eval(a)?;
    let ainv = aa.inverse();
    let s_inv = displacement(m, &ctx.u, &ainv)?;
    let omega = big_omega(&s_inv);
    let mut factors = Vec::new();
    if s_inv.is_one() {
        return Ok(Contraction { factors, s_inv, omega });
    }
    let g0 = ctx.con_mod(&aa)?;
    let mut stack = vec![(g0, Vec::<String>::new())];
    while let Some((g, path)) = stack.pop() {
        let ug = m.intersect(&ctx.u, &g)?;
        let mut mixing = None;
        for w in &ctx.candidates {
            let b = ctx.eval(w)?;
            if displacement(m, &ug, &b)? > BigUint::one() && displacement(m, &ug, &b.inverse())? > BigUint::one() {
                mixing = Some(w.clone());
                break;
            }
        }
        let Some(b) = mixing else {
            let s = displacement(m, &ug, &ainv)?;
            factors.push(ContractionFactor { handle: g, s, path });
            continue;
        };
        if factors.len() + stack.len() + 2 > omega as usize {
            return Err(Error::Invalid(
                "bisection produced more factors than prime factors of the scale".into(),
            ));
        }
        let bis = bisect(ctx, &g, a, &b)?;
        let gam = ctx.eval(&bis.gamma)?;
        let plus = m.intersect(&ctx.con_mod(&gam)?, &g)?;
        let minus = m.intersect(&ctx.con_mod(&gam.inverse())?, &g)?;
        if plus == g || minus == g {
            return Err(Error::Invalid(format!("bisection by {} did not split {g}", bis.gamma)));
        }
        let mut p1 = path.clone();
        p1.push(format!("con({})", bis.gamma));
        let mut p2 = path;
        p2.push(format!("con(({})^-1)", bis.gamma));
        // popped in order: con(γ) part first
        stack.push((minus, p2));
        stack.push((plus, p1));
    }
    Ok(Contraction { factors, s_inv, omega })
}

// ---- roots ----

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Root {
    pub id: String,
    pub s_rho: BigUint,
    /// `ρ(γ_i)` per generator
    pub values: Vec<i64>,
    pub handle: Sub,
}

fn ilog(base: &BigUint, x: &BigUint) -> Option<i64> {
    let mut acc = BigUint::one();
    let mut k = 0;
    while &acc < x {
        acc *= base;
        k += 1;
    }
    (&acc == x).then_some(k)
}

/// `(s_ρ, values)` with `Δ_j = s_ρ^{values_j}`.
fn root_values(deltas: &[(BigUint, BigUint)]) -> Result<Option<(BigUint, Vec<i64>)>> {
    let one = BigUint::one();
    let mut mags = Vec::new();
    for (s, si) in deltas {
        let g = num_integer::Integer::gcd(s, si);
        let (a, b) = (s / &g, si / &g);
        if a > one && b > one {
            return Err(Error::Invalid("factor is not scaling".into()));
        }
        mags.push(if a > one { (a, 1) } else { (b, -1) });
    }
    let Some(t) = mags.iter().map(|(r, _)| r).filter(|r| **r > one).min().cloned() else {
        return Ok(None);
    };
    let bits = t.bits() as u32;
    for d in (1..=bits).rev() {
        let base = t.nth_root(d);
        if base <= one || base.pow(d) != t {
            continue;
        }
        let vals: Option<Vec<i64>> = mags.iter().map(|(r, sg)| ilog(&base, r).map(|k| k * sg)).collect();
        if let Some(v) = vals {
            return Ok(Some((base, v)));
        }
    }
    unreachable!("d = 1 always succeeds")
}

/// Roots from the contraction factors of every generator and its inverse,
/// deduplicated by scaling subgroup and by `(s_ρ, values)`.
pub fn roots(ctx: &FlatCtx) -> Result<Vec<Root>> {
    let m = &ctx.model;
    let autos: Vec<Auto> = ctx.gens.iter().map(|w| ctx.eval(w)).collect::<Result<_>>()?;
    let mut out: Vec<Root> = Vec::new();
    for g in &ctx.gens {
        for e in [1, -1] {
            let c = factor_contraction(ctx, &g.pow(e))?;
            for f in c.factors {
                let uh = m.intersect(&ctx.u, &f.handle)?;
                let deltas: Vec<(BigUint, BigUint)> = autos
                    .iter()
                    .map(|a| Ok((displacement(m, &uh, a)?, displacement(m, &uh, &a.inverse())?)))
                    .collect::<Result<_>>()?;
                let Some((s_rho, values)) = root_values(&deltas)? else {
                    continue;
                };
                if out
                    .iter()
                    .any(|r| r.handle == f.handle || (r.s_rho == s_rho && r.values == values))
                {
                    continue;
                }
                out.push(Root {
                    id: String::new(),
                    s_rho,
                    values,
                    handle: f.handle,
                });
            }
        }
    }
    out.sort_by_key(|r| r.handle.to_string());
    for (i, r) in out.iter_mut().enumerate() {
        r.id = format!("rho{}", i + 1);
    }
    Ok(out)
}

/// Rows: generators; columns: roots.
pub fn root_map(roots: &[Root], ngens: usize) -> Vec<Vec<i64>> {
    (0..ngens)
        .map(|i| roots.iter().map(|r| r.values[i]).collect())
        .collect()
}

/// Nonzero diagonal entries of the Smith normal form.
pub fn smith_invariants(mat: &[Vec<i64>]) -> Vec<i64> {
    let mut a: Vec<Vec<i128>> = mat.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut out = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: smallest nonzero magnitude in the remaining block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if a[i][j] != 0 && best.is_none_or(|(bi, bj)| a[i][j].abs() < a[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap(t, pi);
        for r in a.iter_mut() {
            r.swap(t, pj);
        }
        let mut clean = true;
        for i in t + 1..rows {
            let q = a[i][t] / a[t][t];
            for j in t..cols {
                a[i][j] -= q * a[t][j];
            }
            clean &= a[i][t] == 0;
        }
        for j in t + 1..cols {
            let q = a[t][j] / a[t][t];
            for i in t..rows {
                a[i][j] -= q * a[i][t];
            }
            clean &= a[t][j] == 0;
        }
        if !clean {
            continue;
        }
        // divisibility of the rest
        let p = a[t][t];
        if let Some((i, _)) = (t + 1..rows)
            .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
            .find(|&(i, j)| a[i][j] % p != 0)
        {
            for j in t..cols {
                a[t][j] += a[i][j];
            }
            continue;
        }
        out.push(p.abs() as i64);
        t += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RootMapSummary {
    pub rank: usize,
    /// Invariant factors greater than one of `Z^roots / R(H)`.
    pub torsion: Vec<i64>,
    /// Generators whose row of the root map is zero.
    pub kernel_rows: Vec<bool>,
}

pub fn summarize_root_map(r: &[Vec<i64>]) -> RootMapSummary {
    let inv = smith_invariants(r);
    RootMapSummary {
        rank: inv.len(),
        torsion: inv.into_iter().filter(|&d| d > 1).collect(),
        kernel_rows: r.iter().map(|row| row.iter().all(|&x| x == 0)).collect(),
    }
}

// ---- Levi part, nubs, ordered factorization ----

/// `U ∩ lev(H) = ⋂ {α(U) : α ∈ H}`, computed as the fixpoint of the
/// two-sided limits of the generators.
pub fn levi_meet(spec: &FlatSpec, u: &Sub) -> Result<Sub> {
    let m = &spec.model;
    let autos = spec.autos()?;
    let mut v = spec.family_core(u)?;
    for _ in 0..ROUND_CAP {
        let before = v.clone();
        for a in &autos {
            v = zero_part(m, &v, a)?;
        }
        v = spec.family_core(&v)?;
        if v == before {
            return Ok(v);
        }
    }
    Err(Error::NoStabilizationCertificate(
        "Levi intersection did not stabilize".into(),
    ))
}

/// Closed subgroup generated by the nubs of all words of length at most 2.
pub fn lnub_flat(spec: &FlatSpec) -> Result<Sub> {
    spec.validate()?;
    let m = &spec.model;
    let mut acc: Option<Sub> = None;
    for (_, a) in spec.short_words()? {
        let n = m.nub(&a)?;
        acc = Some(match acc {
            None => n,
            Some(x) => m.join(&x, &n)?,
        });
    }
    match acc {
        Some(x) => Ok(x),
        None => m.trivial(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NubFlat {
    pub nub: Sub,
    /// Tidy witnesses below `nub + K_j` were found for `j = 1..=levels`.
    pub levels: usize,
}

/// Levels of the neighbourhood basis certified by `nub_flat`.
pub const NUB_LEVELS: usize = 4;

/// `nub(H)`: the lower bound `lnub + (subgroups forced by the families)`,
/// certified by tidy subgroups inside `bound + K_j` for `j ≤ NUB_LEVELS`.
pub fn nub_flat(spec: &FlatSpec) -> Result<NubFlat> {
    spec.validate()?;
    let m = &spec.model;
    if spec.families.is_empty() && spec.gens.len() == 1 {
        let a = m.eval(&spec.gens[0].1)?;
        let nub = if a.is_identity() { m.trivial()? } else { m.nub(&a)? };
        return Ok(NubFlat {
            nub,
            levels: usize::MAX,
        });
    }
    fn basis_ok(m: &Model) -> bool {
        match m {
            Model::Shift(_) | Model::Vec(_) => true,
            Model::Product(a, b) => basis_ok(a) && basis_ok(b),
            _ => false,
        }
    }
    if !basis_ok(m) {
        return Err(unrepresentable(
            "a neighbourhood basis of tidy witnesses for this model (diagonal congruence subgroups, tree fixators)",
        ));
    }
    let mut bound = lnub_flat(spec)?;
    if let Model::Shift(sm) = m {
        for &(_, j) in &spec.families {
            bound = m.join(&bound, &Sub::Shift(sm.coordinate(j)))?;
        }
    }
    for j in 1..=NUB_LEVELS {
        let target = m.join(&bound, &m.neighbourhood(j as i64)?)?;
        let mut found = false;
        for k in j..j + 8 {
            let start = m.join(&bound, &m.neighbourhood(k as i64)?)?;
            let w = find_common_tidy(spec, Some(&start))?.u;
            if !m.le(&bound, &w)? {
                return Err(Error::Invalid(format!(
                    "tidy subgroup {w} misses the nub bound {bound}"
                )));
            }
            if m.le(&w, &target)? {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::NoStabilizationCertificate(format!(
                "no tidy witness at level {j}"
            )));
        }
    }
    Ok(NubFlat {
        nub: bound,
        levels: NUB_LEVELS,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    /// `U_{H0}` first, then `U ∩ H_ρ` per root, in product order.
    pub factors: Vec<(String, Sub)>,
    /// The factors generate `U` (abelian models only).
    pub join_equal: Option<bool>,
    /// `[U : U∩K]` and `∏ [F : F∩K]` for a deep neighbourhood `K`.
    pub index_lhs: BigUint,
    pub index_rhs: BigUint,
}

/// Orders the roots as in the rank induction: split by the sign of the last
/// generator (zero, positive, negative), then recurse on the earlier ones.
pub fn order_roots(roots: &[Root]) -> Vec<&Root> {
    let class = |v: i64| match v.signum() {
        0 => 0,
        1 => 1,
        _ => 2,
    };
    let mut out: Vec<&Root> = roots.iter().collect();
    out.sort_by_key(|r| {
        let key: Vec<u8> = r.values.iter().rev().map(|&v| class(v)).collect();
        (key, r.handle.to_string())
    });
    out
}

pub fn factor_tidy(spec: &FlatSpec, ctx: &FlatCtx, roots: &[Root]) -> Result<Factorization> {
    let m = &spec.model;
    let u = &ctx.u;
    let mut factors = vec![("U_H0".to_string(), levi_meet(spec, u)?)];
    for r in order_roots(roots) {
        factors.push((r.id.clone(), m.intersect(u, &r.handle)?));
    }
    let join_equal = factors
        .iter()
        .skip(1)
        .try_fold(factors[0].1.clone(), |acc, (_, f)| m.join(&acc, f))
        .ok()
        .map(|j| j == *u);
    let k = deep_level(u);
    let kk = m.neighbourhood(k)?;
    let idx = |x: &Sub| -> Result<BigUint> { m.index(x, &m.intersect(x, &kk)?) };
    let index_lhs = idx(u)?;
    let mut index_rhs = BigUint::one();
    for (_, f) in &factors {
        index_rhs *= idx(f)?;
    }
    Ok(Factorization {
        factors,
        join_equal,
        index_lhs,
        index_rhs,
    })
}

/// A neighbourhood level well inside `u`.
fn deep_level(u: &Sub) -> i64 {
    fn span(u: &Sub) -> i64 {
        match u {
            Sub::Shift(w) => w.lo.abs().max(w.hi.abs()),
            Sub::Vec(b) => b.vals.iter().filter_map(|e| e.fin()).map(i64::abs).max().unwrap_or(0),
            Sub::Mat(p) => {
                p.m.iter()
                    .flatten()
                    .filter_map(|e| e.fin())
                    .map(i64::abs)
                    .max()
                    .unwrap_or(0)
            }
            Sub::Tree(_) => 2,
            Sub::Product(a, b) => span(a).max(span(b)),
        }
    }
    span(u) + 3
}

// ---- full analysis ----

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatReport {
    pub tidy: CommonTidy,
    pub uniscalar: Vec<bool>,
    pub nub: Sub,
    /// `false` when `nub` is the trivial group assumed for a model without
    /// a certifying neighbourhood basis.
    pub nub_certified: bool,
    pub lnub: Sub,
    pub roots: Vec<Root>,
    pub root_map: Vec<Vec<i64>>,
    pub summary: RootMapSummary,
    pub factorization: Factorization,
}

/// Tidy subgroup, uniscalar flags, nubs, roots, root map and the ordered
/// factorization of the tidy subgroup.
pub fn analyze(spec: &FlatSpec, start: Option<&Sub>) -> Result<FlatReport> {
    let m = &spec.model;
    let tidy = find_common_tidy(spec, start)?;
    let uniscalar = uniscalar_flags(spec, &tidy.u)?;
    let (nub, nub_certified) = match nub_flat(spec) {
        Ok(n) => (n.nub, true),
        Err(Error::NotRepresentable(_)) if matches!(m, Model::Mat(_)) => (m.trivial()?, false),
        Err(e) => return Err(e),
    };
    let lnub = lnub_flat(spec)?;
    let ctx = FlatCtx::new(spec, tidy.u.clone(), nub.clone())?;
    let roots = roots(&ctx)?;
    let rm = root_map(&roots, spec.gens.len());
    let summary = summarize_root_map(&rm);
    let factorization = factor_tidy(spec, &ctx, &roots)?;
    Ok(FlatReport {
        tidy,
        uniscalar,
        nub,
        nub_certified,
        lnub,
        roots,
        root_map: rm,
        summary,
        factorization,
    })
}

/// Product of the scales `s(a⁻¹|H_i)`.
pub fn scale_product(c: &Contraction) -> BigUint {
    c.factors.iter().fold(BigUint::one(), |acc, f| acc * &f.s)
}

/// The handles of a contraction factoring, as sorted display strings.
pub fn handle_multiset(c: &Contraction) -> Vec<String> {
    let mut v: Vec<String> = c.factors.iter().map(|f| f.handle.to_string()).collect();
    v.sort();
    v
}

/// `s(a)` as a machine integer, for display.
pub fn small(n: &BigUint) -> Option<u64> {
    n.to_u64()
}
