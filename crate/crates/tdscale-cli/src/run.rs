//! Command execution: a resolved scenario in, a JSON report out.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use tdscale::core::{Auto, Model, Sub, Word};
use tdscale::dynamics::{
    self, is_tidy_above, is_tidy_below, minus_part, minusminus_part, plus_part, plusplus_part, tidying, zero_part,
};
use tdscale::flat::{self, FlatCtx, FlatSpec};
use tdscale::treerep;
use tdscale::Error;

use crate::scenario::{Command, Resolved};

/// Exit status for certified-negative answers.
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

/// Error codes that are answers rather than failures.
pub fn is_negative(e: &Error) -> bool {
    matches!(
        e,
        Error::FlatnessUnverified(_) | Error::NoSuchN | Error::ScaleOne | Error::NotCommensurable
    )
}

pub fn num(n: &BigUint) -> Value {
    match n.to_u64() {
        Some(x) => json!(x),
        None => json!(n.to_string()),
    }
}

pub fn error_json(e: &Error) -> Value {
    json!({ "error": { "code": e.code(), "message": e.to_string() } })
}

fn sub_or_error(r: tdscale::Result<Sub>) -> Value {
    match r {
        Ok(s) => json!(s.to_string()),
        Err(e) => json!({ "error": e.code() }),
    }
}

pub struct Outcome {
    pub report: Value,
    pub exit: i32,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome { report, exit: 0 }
    }
}

fn pick_auto(r: &Resolved) -> tdscale::Result<(String, Word)> {
    if let Some(name) = &r.params.automorphism {
        return Ok((name.clone(), r.autos[name].clone()));
    }
    if let (Some(d), Model::Tree(_)) = (r.params.d, &r.model) {
        let w = Word::parse(&r.model, &[("x".to_string(), d)])?;
        return Ok((format!("x^{d}"), w));
    }
    r.autos
        .iter()
        .next()
        .map(|(n, w)| (n.clone(), w.clone()))
        .ok_or_else(|| Error::Invalid("no automorphism given".into()))
}

fn pick_sub(r: &Resolved, key: &Option<String>) -> Sub {
    key.as_ref()
        .map(|n| r.subs[n].clone())
        .unwrap_or_else(|| r.model.standard())
}

fn flat_spec(r: &Resolved) -> tdscale::Result<FlatSpec> {
    let names: Vec<String> = match &r.params.generators {
        Some(g) => g.clone(),
        None => r.autos.keys().cloned().collect(),
    };
    let gens = names.iter().map(|n| (n.clone(), r.autos[n].clone())).collect();
    let mut spec = FlatSpec::new(r.model.clone(), gens);
    spec.families = r.params.families.clone();
    Ok(spec)
}

pub fn execute(r: &Resolved) -> Outcome {
    match dispatch(r) {
        Ok(v) => Outcome::ok(v),
        Err(e) => Outcome {
            exit: if is_negative(&e) { EXIT_NEGATIVE } else { EXIT_ERROR },
            report: error_json(&e),
        },
    }
}

fn dispatch(r: &Resolved) -> tdscale::Result<Value> {
    let m = &r.model;
    match r.command {
        Command::Scale => {
            let (name, w) = pick_auto(r)?;
            let a = m.eval(&w)?;
            let (s, si) = dynamics::scale_pair(m, &a)?;
            let delta = dynamics::modular(m, &a)?;
            Ok(
                json!({ "automorphism": name, "word": w.to_string(), "s": num(&s), "s_inv": num(&si), "delta": delta.to_string() }),
            )
        }
        Command::Tidy => {
            let (name, w) = pick_auto(r)?;
            let a = m.eval(&w)?;
            let u = pick_sub(r, &r.params.subgroup);
            let above = is_tidy_above(m, &u, &a)?;
            let below = is_tidy_below(m, &u, &a)?;
            let rep = tidying(m, &u, &a)?;
            Ok(json!({
                "automorphism": name,
                "input": rep.input.to_string(),
                "input_tidy_above": above,
                "input_tidy_below": below,
                "tidy": rep.tidy.to_string(),
                "s": num(&rep.s),
                "s_inv": num(&rep.s_inv),
                "delta": rep.delta.to_string(),
                "trace": serde_json::to_value(&rep.trace).expect("trace serializes"),
                "displacements": rep.displacements.iter().map(num).collect::<Vec<_>>(),
            }))
        }
        Command::Subgroups => {
            let (name, w) = pick_auto(r)?;
            let a = m.eval(&w)?;
            let u = pick_sub(r, &r.params.subgroup);
            Ok(json!({
                "automorphism": name,
                "subgroup": u.to_string(),
                "plus": sub_or_error(plus_part(m, &u, &a)),
                "minus": sub_or_error(minus_part(m, &u, &a)),
                "zero": sub_or_error(zero_part(m, &u, &a)),
                "plusplus": sub_or_error(plusplus_part(m, &u, &a)),
                "minusminus": sub_or_error(minusminus_part(m, &u, &a)),
                "parabolic": sub_or_error(dynamics::parabolic(m, &a)),
                "levi": sub_or_error(dynamics::levi(m, &a)),
                "contraction": sub_or_error(dynamics::contraction(m, &a)),
                "nub": sub_or_error(dynamics::nub(m, &a)),
            }))
        }
        Command::Flat => {
            let spec = flat_spec(r)?;
            let start = r.params.start.as_ref().map(|n| r.subs[n].clone());
            let rep = flat::analyze(&spec, start.as_ref())?;
            Ok(flat_json(&spec, &rep))
        }
        Command::Factor => {
            let spec = flat_spec(r)?;
            let (name, w) = pick_auto(r)?;
            let start = r.params.start.as_ref().map(|n| r.subs[n].clone());
            let tidy = flat::find_common_tidy(&spec, start.as_ref())?;
            let (nub, certified) = nub_for(&spec)?;
            let ctx = FlatCtx::new(&spec, tidy.u.clone(), nub.clone())?;
            let c = flat::factor_contraction(&ctx, &w)?;
            Ok(json!({
                "automorphism": name,
                "tidy": tidy.u.to_string(),
                "nub": nub.to_string(),
                "nub_certified": certified,
                "s_inv": num(&c.s_inv),
                "omega": c.omega,
                "product_ok": flat::scale_product(&c) == c.s_inv,
                "factors": c.factors.iter().map(|f| json!({
                    "handle": f.handle.to_string(),
                    "s": num(&f.s),
                    "path": f.path,
                })).collect::<Vec<_>>(),
            }))
        }
        Command::Treerep => {
            let (_, w) = pick_auto(r)?;
            let a = m.eval(&w)?;
            let u = pick_sub(r, &r.params.subgroup);
            let t = treerep::build_tree(m, &u, &a, r.params.radius.unwrap_or(2))?;
            Ok(serde_json::to_value(&t).expect("tree serializes"))
        }
        Command::Catalog => {
            let rows = crate::catalog::run_catalog(None);
            Ok(crate::catalog::rows_json(&rows))
        }
    }
}

/// `nub(H)` when certifiable; the trivial group on matrix models otherwise.
pub fn nub_for(spec: &FlatSpec) -> tdscale::Result<(Sub, bool)> {
    match flat::nub_flat(spec) {
        Ok(n) => Ok((n.nub, true)),
        Err(Error::NotRepresentable(_)) if matches!(spec.model, Model::Mat(_)) => Ok((spec.model.trivial()?, false)),
        Err(e) => Err(e),
    }
}

pub fn flat_json(spec: &FlatSpec, rep: &flat::FlatReport) -> Value {
    let f = &rep.factorization;
    json!({
        "generators": spec.gens.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "families": spec.families,
        "tidy": rep.tidy.u.to_string(),
        "rounds": rep.tidy.rounds,
        "certified_depth": rep.tidy.certified_depth,
        "uniscalar": rep.uniscalar,
        "nub": rep.nub.to_string(),
        "nub_certified": rep.nub_certified,
        "lnub": rep.lnub.to_string(),
        "roots": rep.roots.iter().map(|r| json!({
            "id": r.id,
            "s_rho": num(&r.s_rho),
            "values": r.values,
            "handle": r.handle.to_string(),
        })).collect::<Vec<_>>(),
        "root_map": rep.root_map,
        "rank": rep.summary.rank,
        "torsion": rep.summary.torsion,
        "kernel_rows": rep.summary.kernel_rows,
        "factorization": {
            "factors": f.factors.iter().map(|(l, s)| json!({ "label": l, "subgroup": s.to_string() })).collect::<Vec<_>>(),
            "join_equal": f.join_equal,
            "index_lhs": num(&f.index_lhs),
            "index_rhs": num(&f.index_rhs),
        },
    })
}

/// `U` for `a` on the model, used by the `treerep` subcommand.
pub fn tree_for(r: &Resolved, radius: usize) -> tdscale::Result<treerep::CosetTree> {
    let (_, w) = pick_auto(r)?;
    let a: Auto = r.model.eval(&w)?;
    let u = pick_sub(r, &r.params.subgroup);
    treerep::build_tree(&r.model, &u, &a, radius)
}
