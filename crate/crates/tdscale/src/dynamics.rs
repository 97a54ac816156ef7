//! Dynamics of a single automorphism: the subgroups `U_±`, `U_0`, `U_±±`,
//! tidiness, the tidying procedure, the scale and the module.

use num_bigint::BigUint;
use num_traits::One;
use serde::Serialize;

use crate::core::{Auto, Elem, Model, Sub};
use crate::error::{Error, Result};
use crate::ratio::IndexRatio;

/// Hard cap on the step-1 depth search.
pub const DEPTH_CAP: usize = 64;

fn require_compact_open(m: &Model, u: &Sub) -> Result<()> {
    if m.is_compact_open(u)? {
        Ok(())
    } else {
        Err(Error::NotSubgroup(format!("{u} is not compact open")))
    }
}

/// `U_+ = ⋂_{n≥0} a^n(U)`.
pub fn plus_part(m: &Model, u: &Sub, a: &Auto) -> Result<Sub> {
    m.forward_limit(u, a)
}

/// `U_- = ⋂_{n≥0} a^{-n}(U)`.
pub fn minus_part(m: &Model, u: &Sub, a: &Auto) -> Result<Sub> {
    m.forward_limit(u, &a.inverse())
}

/// `U_0 = ⋂_{n∈Z} a^n(U)`.
pub fn zero_part(m: &Model, u: &Sub, a: &Auto) -> Result<Sub> {
    m.intersect(&plus_part(m, u, a)?, &minus_part(m, u, a)?)
}

/// `U_{++} = ⋃_{n≥0} a^n(U_+)`, closed.
pub fn plusplus_part(m: &Model, u: &Sub, a: &Auto) -> Result<Sub> {
    m.ascending_limit(&plus_part(m, u, a)?, a)
}

/// `U_{--} = ⋃_{n≥0} a^{-n}(U_-)`, closed.
pub fn minusminus_part(m: &Model, u: &Sub, a: &Auto) -> Result<Sub> {
    m.ascending_limit(&minus_part(m, u, a)?, &a.inverse())
}

/// `[a(U) : a(U) ∩ U]`.
pub fn displacement(m: &Model, u: &Sub, a: &Auto) -> Result<BigUint> {
    let au = m.apply(a, u)?;
    m.index(&au, &m.intersect(&au, u)?)
}

pub fn is_tidy_above(m: &Model, u: &Sub, a: &Auto) -> Result<bool> {
    require_compact_open(m, u)?;
    if a.is_identity() {
        return Ok(true);
    }
    m.product_equals(u, &plus_part(m, u, a)?, &minus_part(m, u, a)?)
}

/// Tidy below iff `nub(a) ≤ U`.
pub fn is_tidy_below(m: &Model, u: &Sub, a: &Auto) -> Result<bool> {
    require_compact_open(m, u)?;
    if a.is_identity() {
        return Ok(true);
    }
    m.le(&m.nub(a)?, u)
}

pub fn is_tidy(m: &Model, u: &Sub, a: &Auto) -> Result<bool> {
    Ok(is_tidy_above(m, u, a)? && is_tidy_below(m, u, a)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TraceStep {
    /// `V = ⋂_{k=0}^n a^k(U)` is tidy above.
    Depth {
        n: usize,
        subgroup: String,
        displacement: String,
    },
    /// The nub was adjoined unless already contained in `V`.
    Nub {
        nub: Option<String>,
        adjoined: bool,
        subgroup: String,
        displacement: String,
    },
    Normalize {
        tidy_above: bool,
        tidy_below: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TidyReport {
    pub input: Sub,
    pub tidy: Sub,
    pub s: BigUint,
    pub s_inv: BigUint,
    pub delta: IndexRatio,
    pub trace: Vec<TraceStep>,
    /// Displacement index of the input and of each intermediate subgroup.
    pub displacements: Vec<BigUint>,
}

/// The three-step tidying procedure.
pub fn tidying(m: &Model, u: &Sub, a: &Auto) -> Result<TidyReport> {
    require_compact_open(m, u)?;
    let one = BigUint::one();
    if a.is_identity() {
        return Ok(TidyReport {
            input: u.clone(),
            tidy: u.clone(),
            s: one.clone(),
            s_inv: one.clone(),
            delta: IndexRatio::one(),
            trace: vec![
                TraceStep::Depth {
                    n: 0,
                    subgroup: u.to_string(),
                    displacement: "1".into(),
                },
                TraceStep::Normalize {
                    tidy_above: true,
                    tidy_below: true,
                },
            ],
            displacements: vec![one],
        });
    }
    let mut displacements = vec![displacement(m, u, a)?];
    let mut trace = Vec::new();

    // step 1
    let mut v = u.clone();
    let mut ak = u.clone();
    let mut depth = None;
    for n in 0..=DEPTH_CAP {
        if n > 0 {
            ak = m.apply(a, &ak)?;
            v = m.intersect(&v, &ak)?;
        }
        if is_tidy_above(m, &v, a)? {
            depth = Some(n);
            break;
        }
    }
    let n = depth.ok_or_else(|| {
        Error::NoStabilizationCertificate(format!("no tidy-above intersection within depth {DEPTH_CAP}"))
    })?;
    let dv = displacement(m, &v, a)?;
    trace.push(TraceStep::Depth {
        n,
        subgroup: v.to_string(),
        displacement: dv.to_string(),
    });
    displacements.push(dv);

    // step 2 and 3
    let nub = m.nub(a)?;
    let adjoined = !m.le(&nub, &v)?;
    let w = if adjoined { m.adjoin(&v, &nub)? } else { v };
    let s = displacement(m, &w, a)?;
    trace.push(TraceStep::Nub {
        nub: Some(nub.to_string()),
        adjoined,
        subgroup: w.to_string(),
        displacement: s.to_string(),
    });
    displacements.push(s.clone());
    let (ta, tb) = (is_tidy_above(m, &w, a)?, is_tidy_below(m, &w, a)?);
    trace.push(TraceStep::Normalize {
        tidy_above: ta,
        tidy_below: tb,
    });
    if !(ta && tb) {
        return Err(Error::Invalid(format!("tidying produced {w}, which is not tidy")));
    }
    let s_inv = displacement(m, &w, &a.inverse())?;
    Ok(TidyReport {
        input: u.clone(),
        tidy: w,
        delta: IndexRatio::new(s.clone(), s_inv.clone()),
        s,
        s_inv,
        trace,
        displacements,
    })
}

/// `(s(a), s(a⁻¹))`, by tidying the model's standard subgroup.
pub fn scale_pair(m: &Model, a: &Auto) -> Result<(BigUint, BigUint)> {
    let r = tidying(m, &m.standard(), a)?;
    Ok((r.s, r.s_inv))
}

pub fn scale(m: &Model, a: &Auto) -> Result<BigUint> {
    Ok(scale_pair(m, a)?.0)
}

/// `Δ(a) = s(a)/s(a⁻¹)`.
pub fn modular(m: &Model, a: &Auto) -> Result<IndexRatio> {
    let (s, si) = scale_pair(m, a)?;
    Ok(IndexRatio::new(s, si))
}

pub fn parabolic(m: &Model, a: &Auto) -> Result<Sub> {
    m.parabolic(a)
}

pub fn levi(m: &Model, a: &Auto) -> Result<Sub> {
    m.levi(a)
}

pub fn contraction(m: &Model, a: &Auto) -> Result<Sub> {
    m.con_closure(a)
}

pub fn nub(m: &Model, a: &Auto) -> Result<Sub> {
    m.nub(a)
}

/// `con(a/K) = con(a)‾·K` for a closed `a`-stable `K`.
pub fn rel_con(m: &Model, a: &Auto, k: &Sub) -> Result<Sub> {
    if m.apply(a, k)? != *k {
        return Err(Error::NotSubgroup(format!("{k} is not stable under the automorphism")));
    }
    m.join(&m.con_closure(a)?, k)
}

// ---- orbits ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum OrbitCase {
    /// `{a^k x : k ≥ m}`
    A { m: i64 },
    /// `{a^k x : k ≤ n}`
    B { n: i64 },
    /// `{a^k x : m ≤ k ≤ n}`
    C { m: i64, n: i64 },
    /// the whole orbit
    D,
    /// empty
    E,
}

impl OrbitCase {
    pub fn tag(&self) -> char {
        match self {
            OrbitCase::A { .. } => 'a',
            OrbitCase::B { .. } => 'b',
            OrbitCase::C { .. } => 'c',
            OrbitCase::D => 'd',
            OrbitCase::E => 'e',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitReport {
    pub case: OrbitCase,
    /// Whether `x` lies in `U_{--}`, `U_{++}`, `U_0` for cases a, b, d;
    /// `None` when the limit is not representable or the case is c or e.
    pub limit_member: Option<bool>,
    /// Whether the scan range came from a model certificate.
    pub certified: bool,
}

/// `(K, L)`: membership of `a^k x` in `U` for `|k| > K` is periodic with
/// period `L` and constant on each side.
fn settle(m: &Model, a: &Auto, x: &Elem, u: &Sub) -> Option<(i64, i64)> {
    match (m, a, x, u) {
        (Model::Vec(_), Auto::Mono(mono), Elem::Vec(xv), Sub::Vec(b)) => {
            let l = mono.period() as i64;
            let maxabs = |v: &[crate::ext::Ext]| v.iter().filter_map(|e| e.fin()).map(i64::abs).max().unwrap_or(0);
            let step: i64 = mono.val.iter().map(|v| v.abs()).sum();
            let big = maxabs(xv) + l * step + maxabs(&b.vals) + 1;
            Some((l * big, l))
        }
        (Model::Shift(sm), Auto::Shift(w), Elem::Shift(xs), Sub::Shift(b)) => {
            let l = sm.orbit_period(w)? as i64;
            let step: i64 = w.iter().map(|(_, k)| k.abs()).sum();
            let pos = xs
                .coords
                .iter()
                .flat_map(|c| c.keys())
                .map(|n| n.abs())
                .max()
                .unwrap_or(0);
            let big = pos + l * step + b.lo.abs().max(b.hi.abs()) + 1;
            Some((l * big, l))
        }
        (Model::Product(ml, mr), Auto::Product(al, ar), Elem::Product(xl, xr), Sub::Product(ul, ur)) => {
            let (k1, l1) = settle(ml, al, xl, ul)?;
            let (k2, l2) = settle(mr, ar, xr, ur)?;
            Some((k1.max(k2), num_integer::lcm(l1, l2)))
        }
        _ => None,
    }
}

/// Memberships of `a^k x` in `U` for `k ∈ [-r, r]`, indexed by `k + r`.
fn scan(m: &Model, a: &Auto, x: &Elem, u: &Sub, r: i64) -> Result<Vec<bool>> {
    let mut fwd = Vec::new();
    let mut y = x.clone();
    for _ in 0..=r {
        fwd.push(m.contains(u, &y)?);
        y = m.apply_elem(a, &y)?;
    }
    let inv = a.inverse();
    let mut back = Vec::new();
    let mut y = m.apply_elem(&inv, x)?;
    for _ in 0..r {
        back.push(m.contains(u, &y)?);
        y = m.apply_elem(&inv, &y)?;
    }
    back.reverse();
    back.extend(fwd);
    Ok(back)
}

fn nth(m: &Model, a: &Auto, x: &Elem, k: i64) -> Result<Elem> {
    m.apply_elem(&a.pow(k), x)
}

/// Which of the five shapes `{a^k x} ∩ U` has, for `U` tidy for `a`.
/// `horizon` bounds the scan when the model has no periodicity certificate
/// (default `4 × drift bound`).
pub fn classify_orbit(m: &Model, x: &Elem, u: &Sub, a: &Auto, horizon: Option<u64>) -> Result<OrbitReport> {
    if a.is_identity() {
        let inside = m.contains(u, x)?;
        let case = if inside { OrbitCase::D } else { OrbitCase::E };
        return Ok(OrbitReport {
            case,
            limit_member: inside.then_some(true),
            certified: true,
        });
    }
    let cert = settle(m, a, x, u);
    let (r, fwd_inf, back_inf, certified) = match cert {
        Some((k0, l)) => {
            let r = k0 + l;
            let s = scan(m, a, x, u, r)?;
            let tail = |blk: &[bool]| -> Result<bool> {
                if blk.iter().all(|&b| b) {
                    Ok(true)
                } else if blk.iter().all(|&b| !b) {
                    Ok(false)
                } else {
                    Err(Error::Invalid(
                        "orbit membership is not eventually constant; U is not tidy".into(),
                    ))
                }
            };
            let n = s.len();
            let f = tail(&s[n - l as usize..])?;
            let b = tail(&s[..l as usize])?;
            (r, f, b, Some(s))
        }
        None => {
            let r = horizon.unwrap_or(4 * m.drift_bound(a)) as i64;
            let f = m.contains(&minus_part(m, u, a)?, &nth(m, a, x, r)?)?;
            let b = m.contains(&plus_part(m, u, a)?, &nth(m, a, x, -r)?)?;
            (r, f, b, None)
        }
    };
    let is_cert = certified.is_some();
    let s = match certified {
        Some(s) => s,
        None => scan(m, a, x, u, r)?,
    };
    let members: Vec<i64> = s
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as i64 - r)
        .collect();
    if let (Some(&lo), Some(&hi)) = (members.first(), members.last()) {
        if (hi - lo + 1) as usize != members.len() {
            return Err(Error::Invalid("orbit meets U in a non-interval; U is not tidy".into()));
        }
    }
    let case = match (members.first(), members.last(), fwd_inf, back_inf) {
        (None, _, false, false) if is_cert => OrbitCase::E,
        (None, ..) => return Err(Error::HorizonInconclusive),
        (Some(_), Some(_), true, true) => OrbitCase::D,
        (Some(&lo), _, true, false) if lo > -r || is_cert => OrbitCase::A { m: lo },
        (_, Some(&hi), false, true) if hi < r || is_cert => OrbitCase::B { n: hi },
        (Some(&lo), Some(&hi), false, false) if (lo > -r && hi < r) || is_cert => OrbitCase::C { m: lo, n: hi },
        _ => return Err(Error::HorizonInconclusive),
    };
    let limit = match case {
        OrbitCase::A { .. } => minusminus_part(m, u, a),
        OrbitCase::B { .. } => plusplus_part(m, u, a),
        OrbitCase::D => zero_part(m, u, a),
        _ => Err(Error::NotRepresentable(String::new())),
    };
    let limit_member = match limit {
        Ok(l) => Some(m.contains(&l, x)?),
        Err(_) => None,
    };
    Ok(OrbitReport {
        case,
        limit_member,
        certified: is_cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::Word;
    use crate::ext::Ext;
    use crate::model_padic_mat::MatModel;
    use crate::model_padic_vec::VecModel;
    use crate::model_shift::{SeqElement, ShiftModel, Support};
    use crate::model_tree::TreeModel;
    use std::collections::BTreeMap;

    fn auto(m: &Model, w: &[(&str, i64)]) -> Auto {
        let w: Vec<(String, i64)> = w.iter().map(|(n, e)| (n.to_string(), *e)).collect();
        m.eval(&Word::parse(m, &w).unwrap()).unwrap()
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn laurent_parts() {
        let m = Model::Shift(ShiftModel::new(2, vec![Support::LeftRestricted]).unwrap());
        let a = auto(&m, &[("tau_0", -1)]);
        let u = m.standard();
        assert_eq!(plus_part(&m, &u, &a).unwrap(), u);
        let triv = m.trivial().unwrap();
        assert_eq!(minus_part(&m, &u, &a).unwrap(), triv);
        assert_eq!(zero_part(&m, &u, &a).unwrap(), triv);
        assert_eq!(plusplus_part(&m, &u, &a).unwrap(), m.whole());
        assert!(is_tidy(&m, &u, &a).unwrap());
        assert_eq!(scale_pair(&m, &a).unwrap(), (big(2), big(1)));
    }

    #[test]
    fn identity_is_trivial() {
        let m = Model::Tree(TreeModel::new(2).unwrap());
        let id = auto(&m, &[]);
        let u = m.standard();
        for part in [plus_part, minus_part, zero_part] {
            assert_eq!(part(&m, &u, &id).unwrap(), u);
        }
        let r = tidying(&m, &u, &id).unwrap();
        assert_eq!((r.s, r.tidy), (big(1), u));
    }

    #[test]
    fn tree_scales() {
        for q in [2u64, 3] {
            let m = Model::Tree(TreeModel::new(q).unwrap());
            for d in 1..=3i64 {
                let a = auto(&m, &[("x", d)]);
                let r = tidying(&m, &m.standard(), &a).unwrap();
                assert_eq!(r.s, big(q.pow(d as u32)));
                assert_eq!(r.s_inv, r.s);
                // stab(v0) is not tidy, so the input displacement is larger
                assert!(r.displacements[0] > r.s);
            }
        }
    }

    #[test]
    fn sl3_scale_matches_closed_form() {
        let mm = MatModel::new(3, 3).unwrap();
        let m = Model::Mat(mm.clone());
        let a = auto(&m, &[("diag(0,1,2)", 1)]);
        let (s, si) = scale_pair(&m, &a).unwrap();
        assert_eq!(s, big(81));
        let Auto::Mono(mono) = &a else { unreachable!() };
        assert_eq!((s, si), mm.scale(mono));
        assert!(modular(&m, &a).unwrap().is_one());
    }

    #[test]
    fn full_shift_tidies_to_everything() {
        let m = Model::Shift(ShiftModel::new(2, vec![Support::Full]).unwrap());
        let a = auto(&m, &[("tau_0", 1)]);
        let Model::Shift(sm) = &m else { unreachable!() };
        let u = Sub::Shift(sm.zero_set(&[(0, 0), (0, 1)].into_iter().collect()));
        assert!(!is_tidy_below(&m, &u, &a).unwrap());
        let r = tidying(&m, &u, &a).unwrap();
        assert_eq!(r.tidy, m.whole());
        assert_eq!(r.s, big(1));
    }

    #[test]
    fn orbits() {
        let m = Model::Shift(ShiftModel::new(2, vec![Support::LeftRestricted]).unwrap());
        let u = m.standard();
        let x = Elem::Shift(SeqElement {
            coords: vec![BTreeMap::from([(3, 1)])],
        });
        let t = auto(&m, &[("tau_0", 1)]);
        let r = classify_orbit(&m, &x, &u, &t, None).unwrap();
        assert_eq!(r.case, OrbitCase::A { m: -3 });
        assert_eq!(r.limit_member, Some(true));
        let r = classify_orbit(&m, &x, &u, &t.inverse(), None).unwrap();
        assert_eq!(r.case, OrbitCase::B { n: 3 });

        let v = Model::Vec(VecModel::new(3, 2).unwrap());
        let a = auto(&v, &[("diag(1,-1)", 1)]);
        let z = v.standard();
        let one = Elem::Vec(vec![Ext::Fin(0), Ext::Fin(0)]);
        assert_eq!(
            classify_orbit(&v, &one, &z, &a, None).unwrap().case,
            OrbitCase::C { m: 0, n: 0 }
        );
        let far = Elem::Vec(vec![Ext::Fin(-1), Ext::Fin(-1)]);
        assert_eq!(classify_orbit(&v, &far, &z, &a, None).unwrap().case, OrbitCase::E);
        let zero_coord = Elem::Vec(vec![Ext::PosInf, Ext::Fin(0)]);
        let r = classify_orbit(&v, &zero_coord, &z, &a, None).unwrap();
        assert_eq!(r.case, OrbitCase::B { n: 0 });
        let unit = Model::Vec(VecModel::new(3, 1).unwrap());
        let id_like = auto(&unit, &[("swap_0_0", 1)]);
        let r = classify_orbit(&unit, &Elem::Vec(vec![Ext::Fin(0)]), &unit.standard(), &id_like, None).unwrap();
        assert_eq!(r.case, OrbitCase::D);
    }

    #[test]
    fn relative_contraction() {
        let m = Model::Shift(ShiftModel::new(2, vec![Support::LeftRestricted, Support::Full]).unwrap());
        let a = auto(&m, &[("tau_0", 1)]);
        let Model::Shift(sm) = &m else { unreachable!() };
        let k = Sub::Shift(sm.coordinate(1));
        let rc = rel_con(&m, &a, &k).unwrap();
        assert_eq!(rc, m.join(&Sub::Shift(sm.coordinate(0)), &k).unwrap());
    }
}
