//! Scenario files: schema, parsing with line-anchored errors, and resolution
//! into models, words and subgroups.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use tdscale::core::{Model, Sub, Word};
use tdscale::model_padic_mat::{Diag, MatModel};
use tdscale::model_padic_vec::VecModel;
use tdscale::model_shift::{ShiftModel, Support};
use tdscale::model_tree::{TreeModel, Vertex};
use tdscale::Ext;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelDesc {
    Shift {
        p: u64,
        coords: Vec<Support>,
    },
    PadicVec {
        p: u64,
        n: usize,
    },
    PadicMat {
        p: u64,
        n: usize,
    },
    Tree {
        q: u64,
    },
    Product {
        left: Box<ModelDesc>,
        right: Box<ModelDesc>,
    },
}

impl ModelDesc {
    pub fn build(&self) -> tdscale::Result<Model> {
        Ok(match self {
            ModelDesc::Shift { p, coords } => Model::Shift(ShiftModel::new(*p, coords.clone())?),
            ModelDesc::PadicVec { p, n } => Model::Vec(VecModel::new(*p, *n)?),
            ModelDesc::PadicMat { p, n } => Model::Mat(MatModel::new(*p, *n)?),
            ModelDesc::Tree { q } => Model::Tree(TreeModel::new(*q)?),
            ModelDesc::Product { left, right } => Model::direct_product(left.build()?, right.build()?),
        })
    }
}

/// `"tau_0^-1·swap_0_1"` or `[["tau_0", -1], ["swap_0_1", 1]]`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum AutoDesc {
    Text(String),
    Letters(Vec<(String, i64)>),
}

/// Splits a word written as `g^k·h·...` (also `*`) into letters; `id` and the
/// empty string are the identity.
pub fn parse_letters(text: &str) -> Result<Vec<(String, i64)>> {
    let t = text.trim();
    if t.is_empty() || t == "id" {
        return Ok(vec![]);
    }
    t.split(['·', '*'])
        .map(|tok| {
            let tok: String = tok.chars().filter(|c| !c.is_whitespace()).collect();
            if tok.is_empty() {
                bail!("empty letter in word '{text}'");
            }
            match tok.rsplit_once('^') {
                Some((name, e)) if !e.contains(')') => {
                    let e: i64 = e.parse().map_err(|_| anyhow!("bad exponent '{e}' in word '{text}'"))?;
                    Ok((name.to_string(), e))
                }
                _ => Ok((tok, 1)),
            }
        })
        .collect()
}

/// Valuation bound: an integer, `"inf"` (the zero subgroup) or `"-inf"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ExtDesc {
    Int(i64),
    Text(String),
}

impl ExtDesc {
    fn ext(&self) -> Result<Ext> {
        match self {
            ExtDesc::Int(k) => Ok(Ext::Fin(*k)),
            ExtDesc::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(Ext::PosInf),
                "-inf" => Ok(Ext::NegInf),
                _ => bail!("bad valuation bound '{s}'"),
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDesc {
    pub n: i64,
    #[serde(default)]
    pub path: Vec<u8>,
}

impl VertexDesc {
    fn vertex(&self) -> Vertex {
        Vertex::new(self.n, self.path.clone())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SubDesc {
    Standard,
    Whole,
    Trivial,
    Neighbourhood {
        k: i64,
    },
    /// Shift: zero at the listed `(coordinate, position)` points.
    ZeroSet {
        points: Vec<(usize, i64)>,
    },
    /// Shift: free at the listed points, zero elsewhere.
    FreeSet {
        points: Vec<(usize, i64)>,
    },
    /// Shift: one whole coordinate.
    Coordinate {
        c: usize,
    },
    /// p-adic vectors: `∏ p^{k_i} Z_p`.
    Box {
        vals: Vec<ExtDesc>,
    },
    Iwahori,
    Pattern {
        m: Vec<Vec<ExtDesc>>,
        #[serde(default)]
        diag_one: bool,
    },
    /// Tree: pointwise fixator of a ball.
    FixBall {
        center: VertexDesc,
        r: usize,
    },
    FixVertices {
        vertices: Vec<VertexDesc>,
    },
    Product {
        left: Box<SubDesc>,
        right: Box<SubDesc>,
    },
    Meet {
        of: Vec<String>,
    },
    Apply {
        automorphism: String,
        subgroup: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Scale,
    Tidy,
    Subgroups,
    Flat,
    Factor,
    Treerep,
    Catalog,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub automorphism: Option<String>,
    pub subgroup: Option<String>,
    pub generators: Option<Vec<String>>,
    #[serde(default)]
    pub families: Vec<(usize, usize)>,
    pub start: Option<String>,
    pub radius: Option<usize>,
    pub d: Option<i64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub model: ModelDesc,
    #[serde(default)]
    pub automorphisms: BTreeMap<String, AutoDesc>,
    #[serde(default)]
    pub subgroups: BTreeMap<String, SubDesc>,
    pub command: Command,
    #[serde(default)]
    pub params: Params,
    /// Shorthand for `params.d` (tree translation length).
    pub d: Option<i64>,
}

/// A scenario with every name resolved.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub model: Model,
    pub autos: BTreeMap<String, Word>,
    pub subs: BTreeMap<String, Sub>,
    pub command: Command,
    pub params: Params,
}

/// Line (1-based) of the first occurrence of `"name"` in the source.
fn line_of(src: &str, name: &str) -> Option<usize> {
    let needle = format!("\"{name}\"");
    src.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn anchored(src: &str, name: &str, msg: String) -> anyhow::Error {
    match line_of(src, name) {
        Some(l) => anyhow!("line {l}: {msg}"),
        None => anyhow!(msg),
    }
}

pub fn parse(src: &str) -> Result<Scenario> {
    let sc: Scenario = serde_json::from_str(src).map_err(|e| anyhow!("line {}: {e}", e.line()))?;
    if sc.schema_version != SCHEMA_VERSION {
        return Err(anchored(
            src,
            "schema_version",
            format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                sc.schema_version
            ),
        ));
    }
    Ok(sc)
}

pub fn resolve(src: &str, sc: &Scenario) -> Result<Resolved> {
    let model = sc
        .model
        .build()
        .map_err(|e| anchored(src, "model", format!("model: {e}")))?;
    let mut autos = BTreeMap::new();
    for (name, desc) in &sc.automorphisms {
        let letters = match desc {
            AutoDesc::Text(t) => {
                parse_letters(t).map_err(|e| anchored(src, name, format!("automorphism '{name}': {e}")))?
            }
            AutoDesc::Letters(l) => l.clone(),
        };
        let w =
            Word::parse(&model, &letters).map_err(|e| anchored(src, name, format!("automorphism '{name}': {e}")))?;
        autos.insert(name.clone(), w);
    }
    let mut subs = BTreeMap::new();
    let mut visiting = BTreeSet::new();
    for name in sc.subgroups.keys() {
        resolve_sub(src, sc, &model, &autos, name, &mut subs, &mut visiting)?;
    }
    let mut params = sc.params.clone();
    if params.d.is_none() {
        params.d = sc.d;
    }
    for (key, name) in [
        ("automorphism", &params.automorphism),
        ("start", &params.start),
        ("subgroup", &params.subgroup),
    ] {
        if let Some(n) = name {
            let known = if key == "automorphism" {
                autos.contains_key(n)
            } else {
                subs.contains_key(n)
            };
            if !known {
                return Err(anchored(src, key, format!("params.{key}: unknown name '{n}'")));
            }
        }
    }
    for g in params.generators.iter().flatten() {
        if !autos.contains_key(g) {
            return Err(anchored(
                src,
                "generators",
                format!("params.generators: unknown automorphism '{g}'"),
            ));
        }
    }
    Ok(Resolved {
        model,
        autos,
        subs,
        command: sc.command,
        params,
    })
}

fn resolve_sub(
    src: &str,
    sc: &Scenario,
    model: &Model,
    autos: &BTreeMap<String, Word>,
    name: &str,
    done: &mut BTreeMap<String, Sub>,
    visiting: &mut BTreeSet<String>,
) -> Result<Sub> {
    if let Some(s) = done.get(name) {
        return Ok(s.clone());
    }
    let Some(desc) = sc.subgroups.get(name) else {
        return Err(anchored(src, name, format!("unknown subgroup '{name}'")));
    };
    if !visiting.insert(name.to_string()) {
        return Err(anchored(src, name, format!("subgroup '{name}' refers to itself")));
    }
    let mut lookup = |n: &str| resolve_sub(src, sc, model, autos, n, done, visiting);
    let built = build_sub(model, desc, autos, &mut lookup)
        .map_err(|e| anchored(src, name, format!("subgroup '{name}': {e}")))?;
    visiting.remove(name);
    done.insert(name.to_string(), built.clone());
    Ok(built)
}

fn build_sub(
    model: &Model,
    desc: &SubDesc,
    autos: &BTreeMap<String, Word>,
    lookup: &mut dyn FnMut(&str) -> Result<Sub>,
) -> Result<Sub> {
    let wrong = |what: &str| anyhow!("'{what}' does not fit this model");
    Ok(match desc {
        SubDesc::Standard => model.standard(),
        SubDesc::Whole => model.whole(),
        SubDesc::Trivial => model.trivial()?,
        SubDesc::Neighbourhood { k } => model.neighbourhood(*k)?,
        SubDesc::ZeroSet { points } => {
            let Model::Shift(m) = model else {
                return Err(wrong("shift subgroup"));
            };
            check_coords(m, points)?;
            Sub::Shift(m.zero_set(&points.iter().cloned().collect()))
        }
        SubDesc::FreeSet { points } => {
            let Model::Shift(m) = model else {
                return Err(wrong("shift subgroup"));
            };
            check_coords(m, points)?;
            Sub::Shift(m.free_set(&points.iter().cloned().collect()))
        }
        SubDesc::Coordinate { c } => {
            let Model::Shift(m) = model else {
                return Err(wrong("shift subgroup"));
            };
            if *c >= m.coords.len() {
                bail!("coordinate {c} out of range");
            }
            Sub::Shift(m.coordinate(*c))
        }
        SubDesc::Box { vals } => {
            let Model::Vec(m) = model else { return Err(wrong("box")) };
            let v = vals.iter().map(ExtDesc::ext).collect::<Result<Vec<_>>>()?;
            Sub::Vec(m.lattice(v)?)
        }
        SubDesc::Iwahori => {
            let Model::Mat(m) = model else {
                return Err(wrong("iwahori"));
            };
            Sub::Mat(m.iwahori())
        }
        SubDesc::Pattern { m: rows, diag_one } => {
            let Model::Mat(m) = model else {
                return Err(wrong("pattern"));
            };
            let rows = rows
                .iter()
                .map(|r| r.iter().map(ExtDesc::ext).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Sub::Mat(m.pattern(rows, if *diag_one { Diag::One } else { Diag::Units })?)
        }
        SubDesc::FixBall { center, r } => {
            let Model::Tree(m) = model else {
                return Err(wrong("fix_ball"));
            };
            let c = center.vertex();
            if !m.valid_vertex(&c) {
                bail!("vertex {c} is not in the tree");
            }
            Sub::Tree(m.fix(m.ball(&c, *r))?)
        }
        SubDesc::FixVertices { vertices } => {
            let Model::Tree(m) = model else {
                return Err(wrong("fix_vertices"));
            };
            let vs: Vec<Vertex> = vertices.iter().map(VertexDesc::vertex).collect();
            if let Some(bad) = vs.iter().find(|v| !m.valid_vertex(v)) {
                bail!("vertex {bad} is not in the tree");
            }
            Sub::Tree(m.fix(vs)?)
        }
        SubDesc::Product { left, right } => {
            let Model::Product(l, r) = model else {
                return Err(wrong("product"));
            };
            Sub::Product(
                Box::new(build_sub(l, left, &BTreeMap::new(), lookup)?),
                Box::new(build_sub(r, right, &BTreeMap::new(), lookup)?),
            )
        }
        SubDesc::Meet { of } => {
            let mut it = of.iter();
            let first = it.next().ok_or_else(|| anyhow!("meet of nothing"))?;
            let mut acc = lookup(first)?;
            for n in it {
                acc = model.intersect(&acc, &lookup(n)?)?;
            }
            acc
        }
        SubDesc::Apply { automorphism, subgroup } => {
            let w = autos
                .get(automorphism)
                .ok_or_else(|| anyhow!("unknown automorphism '{automorphism}'"))?;
            let u = lookup(subgroup)?;
            model.apply(&model.eval(w)?, &u).context("apply")?
        }
    })
}

fn check_coords(m: &ShiftModel, points: &[(usize, i64)]) -> Result<()> {
    if let Some((c, _)) = points.iter().find(|(c, _)| *c >= m.coords.len()) {
        bail!("coordinate {c} out of range");
    }
    if points.is_empty() {
        bail!("empty point set");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters() {
        assert_eq!(
            parse_letters("tau_0^-1·swap_0_1").unwrap(),
            vec![("tau_0".into(), -1), ("swap_0_1".into(), 1)]
        );
        assert_eq!(
            parse_letters("diag(1, 0, -1)^2").unwrap(),
            vec![("diag(1,0,-1)".into(), 2)]
        );
        assert_eq!(parse_letters("id").unwrap(), vec![]);
        assert!(parse_letters("x^y").is_err());
    }

    #[test]
    fn errors_carry_lines() {
        let src = "{\n  \"schema_version\": 1,\n  \"model\": {\"kind\": \"tree\", \"q\": 2},\n  \"automorphisms\": {\"a\": \"y\"},\n  \"command\": \"scale\"\n}";
        let sc = parse(src).unwrap();
        let e = resolve(src, &sc).unwrap_err().to_string();
        assert!(e.starts_with("line 4:"), "{e}");
        let bad = "{\n  \"schema_version\": 1,\n  \"command\": \"nope\"\n}";
        assert!(parse(bad).unwrap_err().to_string().starts_with("line "));
    }
}
