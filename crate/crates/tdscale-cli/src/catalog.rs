//! The built-in example catalog: small groups and automorphisms with known
//! answers, evaluated as independent rows.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use tdscale::core::{Auto, Model, Sub, Word};
use tdscale::dynamics::{
    displacement, is_tidy, is_tidy_above, is_tidy_below, minus_part, plus_part, plusplus_part, scale, tidying,
};
use tdscale::flat::{self, FlatCtx, FlatSpec};
use tdscale::model_padic_mat::MatModel;
use tdscale::model_padic_vec::VecModel;
use tdscale::model_shift::{ShiftModel, Support};
use tdscale::model_tree::{TreeModel, Vertex};
use tdscale::treerep;

use crate::scenario::parse_letters;

type Res<T> = std::result::Result<T, tdscale::Error>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Row {
    pub id: String,
    pub check: String,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

// ---- shared builders ----

pub fn shift(p: u64, coords: &[Support]) -> Model {
    Model::Shift(ShiftModel::new(p, coords.to_vec()).expect("catalog shift model"))
}

pub fn vec_model(p: u64, n: usize) -> Model {
    Model::Vec(VecModel::new(p, n).expect("catalog vector model"))
}

pub fn mat(p: u64, n: usize) -> Model {
    Model::Mat(MatModel::new(p, n).expect("catalog matrix model"))
}

pub fn tree(q: u64) -> Model {
    Model::Tree(TreeModel::new(q).expect("catalog tree model"))
}

/// A word written as `g^k·h`.
pub fn word(m: &Model, text: &str) -> Word {
    let letters = parse_letters(text).expect("catalog word syntax");
    Word::parse(m, &letters).unwrap_or_else(|e| panic!("catalog word '{text}': {e}"))
}

pub fn auto(m: &Model, text: &str) -> Auto {
    m.eval(&word(m, text)).expect("catalog word evaluates")
}

use Support::{Finite, Full, LeftRestricted as LR};

/// `F_p((t)) × F_p^Z`.
pub fn laurent_times_full(p: u64) -> Model {
    shift(p, &[LR, Full])
}

#[derive(Clone, Debug)]
pub struct CatalogAuto {
    pub id: &'static str,
    pub model: Model,
    pub word: Word,
}

/// Every automorphism the catalog exercises.
pub fn catalog_automorphisms() -> Vec<CatalogAuto> {
    let entries: Vec<(&'static str, Model, &'static str)> = vec![
        ("tree.q2.x", tree(2), "x"),
        ("tree.q3.x2", tree(3), "x^2"),
        ("tree.q2.x-1", tree(2), "x^-1"),
        ("shift.lr2.tau", shift(2, &[LR]), "tau_0^-1"),
        ("shift.lr3.tau2", shift(3, &[LR]), "tau_0^2"),
        ("shift.full2.sigma", shift(2, &[Full]), "tau_0"),
        ("shift.fin2.shift", shift(2, &[Finite]), "tau_0"),
        ("shift.B.tau", laurent_times_full(2), "tau_0"),
        ("shift.B.sigma_tau", laurent_times_full(2), "tau_0·tau_1"),
        ("shift.B.beta", laurent_times_full(2), "beta_0_1_0_0"),
        ("shift.lr2x2.mixed", shift(2, &[LR, LR]), "tau_0·tau_1^-1"),
        ("shift.lr2x2.swap", shift(2, &[LR, LR]), "swap_0_1·tau_0"),
        ("vec.q3.hyper", vec_model(3, 2), "diag(1,-1)"),
        ("vec.q3.perm", vec_model(3, 2), "mono(1,0;1,0)"),
        ("vec.q2.weights", vec_model(2, 3), "diag(1,0,-1)"),
        ("vec.q5.scalar", vec_model(5, 3), "diag(1,1,1)"),
        ("mat.sl2.p3", mat(3, 2), "diag(1,0)"),
        ("mat.sl3.p2", mat(2, 3), "diag(0,1,2)"),
        ("mat.sl3.p3.weyl", mat(3, 3), "d_0·swap_1_2"),
        (
            "product.shift_vec",
            Model::direct_product(shift(2, &[LR]), vec_model(3, 1)),
            "L.tau_0·R.diag(-1)",
        ),
    ];
    entries
        .into_iter()
        .map(|(id, model, text)| {
            let w = word(&model, text);
            CatalogAuto { id, model, word: w }
        })
        .collect()
}

/// Compact open subgroups of a model used for the intersection checks:
/// a small family plus everything the tidying procedure produces from it.
pub fn catalog_subgroups(m: &Model) -> Vec<Sub> {
    let mut out: BTreeSet<String> = BTreeSet::new();
    let mut subs = Vec::new();
    let mut push = |s: Sub| {
        if out.insert(s.to_string()) {
            subs.push(s);
        }
    };
    match m {
        Model::Shift(sm) => {
            let width = if sm.coords.len() == 1 { 3 } else { 1 };
            for w in sm.enumerate_compact_open(width).unwrap_or_default() {
                push(Sub::Shift(w));
            }
        }
        Model::Vec(vm) => {
            let mut vals: Vec<Vec<i64>> = vec![vec![]];
            for _ in 0..vm.n {
                vals = vals
                    .into_iter()
                    .flat_map(|v| (-1..=1).map(move |k| [v.clone(), vec![k]].concat()))
                    .collect();
            }
            for v in vals {
                push(Sub::Vec(
                    vm.lattice(v.into_iter().map(tdscale::Ext::Fin).collect()).expect("box"),
                ));
            }
        }
        Model::Mat(mm) => {
            push(Sub::Mat(mm.standard()));
            push(Sub::Mat(mm.iwahori()));
            for k in 1..=2 {
                push(m.neighbourhood(k).expect("neighbourhood"));
            }
            let iw = Sub::Mat(mm.iwahori());
            for i in 0..mm.n {
                let d = m.eval(&word(m, &format!("d_{i}"))).expect("diagonal");
                push(m.apply(&d, &iw).expect("apply"));
            }
        }
        Model::Tree(tm) => {
            let v0 = Vertex::axis(0);
            let w0 = Vertex::new(0, vec![0]);
            for r in 0..=2 {
                push(Sub::Tree(tm.fix(tm.ball(&v0, r)).expect("fix")));
                push(Sub::Tree(tm.fix(tm.ball(&w0, r)).expect("fix")));
            }
            push(Sub::Tree(tm.fix([v0.clone(), Vertex::axis(1)]).expect("fix")));
            push(Sub::Tree(tm.fix([w0, Vertex::axis(2)]).expect("fix")));
        }
        Model::Product(_, _) => {
            push(m.standard());
            for k in 0..=2 {
                push(m.neighbourhood(k).expect("neighbourhood"));
            }
        }
    }
    subs
}

// ---- rows ----

struct Check {
    expected: String,
    computed: String,
    pass: bool,
}

fn eq<T: PartialEq + std::fmt::Debug>(expected: T, computed: T) -> Res<Check> {
    Ok(Check {
        pass: expected == computed,
        expected: format!("{expected:?}"),
        computed: format!("{computed:?}"),
    })
}

fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

type RowFn = Box<dyn Fn() -> Res<Check> + Send + Sync>;

fn row(
    id: impl Into<String>,
    check: &str,
    f: impl Fn() -> Res<Check> + Send + Sync + 'static,
) -> (String, String, RowFn) {
    (id.into(), check.to_string(), Box::new(f))
}

fn all_rows() -> Vec<(String, String, RowFn)> {
    let mut rows = Vec::new();

    // trees
    for q in [2u64, 3] {
        for d in 1..=3i64 {
            rows.push(row(format!("tree.scale.q{q}.d{d}"), "s(x^d) = q^d", move || {
                let m = tree(q);
                eq(big(q.pow(d as u32)), scale(&m, &auto(&m, &format!("x^{d}")))?)
            }));
        }
    }
    rows.push(row(
        "tree.stab_v0",
        "[x(U):x(U)∩U] = q+1 for U = stab(v0), so U is not tidy",
        || {
            let m = tree(2);
            let Model::Tree(t) = &m else { unreachable!() };
            let (u, a) = (Sub::Tree(t.fix([Vertex::axis(0)])?), auto(&m, "x"));
            eq((big(3), false), (displacement(&m, &u, &a)?, is_tidy(&m, &u, &a)?))
        },
    ));
    rows.push(row("tree.stab_edge.tidy", "fixator of an axis edge is tidy", || {
        let m = tree(2);
        let Model::Tree(t) = &m else { unreachable!() };
        eq(
            true,
            is_tidy(
                &m,
                &Sub::Tree(t.fix([Vertex::axis(0), Vertex::axis(1)])?),
                &auto(&m, "x"),
            )?,
        )
    }));
    rows.push(row(
        "tree.stab_w0.not_tidy",
        "stabilizer of an off-axis vertex is not tidy",
        || {
            let m = tree(2);
            let Model::Tree(t) = &m else { unreachable!() };
            eq(
                false,
                is_tidy(&m, &Sub::Tree(t.fix([Vertex::new(0, vec![0])])?), &auto(&m, "x"))?,
            )
        },
    ));
    rows.push(row("tree.stab_w0.tidying", "tidying stab(w0) reaches scale 2", || {
        let m = tree(2);
        let Model::Tree(t) = &m else { unreachable!() };
        let a = auto(&m, "x");
        let rep = tidying(&m, &Sub::Tree(t.fix([Vertex::new(0, vec![0])])?), &a)?;
        eq((big(2), true), (rep.s, is_tidy(&m, &rep.tidy, &a)?))
    }));

    // sequence groups
    rows.push(row(
        "shift.discrete_window.not_tidy_above",
        "window [0,5] in the discrete direct sum",
        || {
            let m = shift(2, &[Finite]);
            let Model::Shift(sm) = &m else { unreachable!() };
            let u = Sub::Shift(sm.free_set(&(0..=5).map(|n| (0usize, n)).collect()));
            eq(false, is_tidy_above(&m, &u, &auto(&m, "tau_0"))?)
        },
    ));
    for (name, pts, idx, above) in [("U1", vec![0i64], 2u64, true), ("U2", vec![0, 2], 4, false)] {
        rows.push(row(
            format!("shift.full.{name}"),
            "[σ(U):σ(U)∩U], tidy above, tidy below",
            move || {
                let m = shift(2, &[Full]);
                let Model::Shift(sm) = &m else { unreachable!() };
                let u = Sub::Shift(sm.zero_set(&pts.iter().map(|&n| (0usize, n)).collect()));
                let a = auto(&m, "tau_0");
                eq(
                    (big(idx), above, false),
                    (
                        displacement(&m, &u, &a)?,
                        is_tidy_above(&m, &u, &a)?,
                        is_tidy_below(&m, &u, &a)?,
                    ),
                )
            },
        ));
    }
    rows.push(row("shift.full.scale", "s(σ) = 1 and the whole group is tidy", || {
        let m = shift(2, &[Full]);
        let Model::Shift(sm) = &m else { unreachable!() };
        let u = Sub::Shift(sm.zero_set(&[(0usize, 0i64)].into_iter().collect()));
        let rep = tidying(&m, &u, &auto(&m, "tau_0"))?;
        eq((big(1), m.whole().to_string()), (rep.s, rep.tidy.to_string()))
    }));
    rows.push(row("shift.laurent.U_N_tidy", "U_N is tidy for the shift", || {
        let m = shift(2, &[LR]);
        let Model::Shift(sm) = &m else { unreachable!() };
        let u = Sub::Shift(sm.zero_set(&(-3..=0).map(|n| (0usize, n)).collect()));
        let u = m.intersect(&u, &m.standard())?;
        eq(true, is_tidy(&m, &u, &auto(&m, "tau_0"))?)
    }));

    // p-adic vectors
    rows.push(row("vec.standard_tidy", "Z_p^n is tidy for monomial maps", || {
        let m = vec_model(3, 3);
        let mut ok = true;
        for w in ["diag(1,0,-1)", "diag(2,-1,0)·swap_0_2", "mono(1,2,0;0,0,0)"] {
            ok &= is_tidy(&m, &m.standard(), &auto(&m, w))?;
        }
        eq(true, ok)
    }));
    rows.push(row(
        "vec.minus_part_splits",
        "U_{α-} = (U_{α-}∩U_{β+})(U_{α-}∩U_{β-})",
        || {
            let m = vec_model(3, 3);
            let (a, b) = (auto(&m, "diag(1,1,1)"), auto(&m, "diag(-1,0,1)"));
            let u = m.standard();
            let um = minus_part(&m, &u, &a)?;
            let x = m.intersect(&um, &plus_part(&m, &u, &b)?)?;
            let y = m.intersect(&um, &minus_part(&m, &u, &b)?)?;
            eq(true, m.product_equals(&um, &x, &y)?)
        },
    ));
    rows.push(row(
        "vec.bisection",
        "least n = 2 and U_{β++} ≠ con(γ⁻¹/N)",
        || {
            let m = vec_model(3, 3);
            let spec = FlatSpec::new(
                m.clone(),
                vec![
                    ("alpha".into(), word(&m, "diag(1,1,1)")),
                    ("beta".into(), word(&m, "diag(1,0,-1)")),
                ],
            );
            let ctx = FlatCtx::new(&spec, m.standard(), m.trivial()?)?;
            let (a, b) = (&spec.gens[0].1, &spec.gens[1].1);
            let g = ctx.con_mod(&m.eval(a)?)?;
            let bis = flat::bisect(&ctx, &g, a, b)?;
            let upp = plusplus_part(&m, &m.standard(), &m.eval(b)?)?;
            let con_gi = ctx.con_mod(&m.eval(&bis.gamma)?.inverse())?;
            eq(
                (2usize, true, true, true),
                (bis.n, bis.con_equal, bis.plus_equal, upp != con_gi),
            )
        },
    ));
    rows.push(row(
        "vec.rank_weights",
        "p·id and diag(p^{i-2}) give n distinct roots",
        || {
            let m = vec_model(2, 4);
            let spec = FlatSpec::new(
                m.clone(),
                vec![
                    ("alpha".into(), word(&m, "diag(1,1,1,1)")),
                    ("beta".into(), word(&m, "diag(-1,0,1,2)")),
                ],
            );
            let r = flat::analyze(&spec, None)?;
            eq((4usize, 2usize), (r.roots.len(), r.summary.rank))
        },
    ));
    rows.push(row("vec.root_map_torsion", "Z^2 / R(H) for (p,p), (p,p⁻¹)", || {
        let m = vec_model(3, 2);
        let spec = FlatSpec::new(
            m.clone(),
            vec![
                ("alpha".into(), word(&m, "diag(1,1)")),
                ("beta".into(), word(&m, "diag(1,-1)")),
            ],
        );
        let r = flat::analyze(&spec, None)?;
        eq(vec![2i64], r.summary.torsion)
    }));
    rows.push(row(
        "vec.factor_scalar",
        "⟨p·id⟩ on Q_p^2: one factor of scale p^2",
        || {
            let m = vec_model(5, 2);
            let spec = FlatSpec::new(m.clone(), vec![("alpha".into(), word(&m, "diag(1,1)"))]);
            let ctx = FlatCtx::new(&spec, m.standard(), m.trivial()?)?;
            let c = flat::factor_contraction(&ctx, &spec.gens[0].1)?;
            eq(
                (vec![big(25)], 2u32),
                (c.factors.iter().map(|f| f.s.clone()).collect(), c.omega),
            )
        },
    ));
    rows.push(row(
        "vec.factor_scalar_coord",
        "⟨p·id, diag(p,1)⟩ on Q_p^2: two factors of scale p",
        || {
            let m = vec_model(5, 2);
            let spec = FlatSpec::new(
                m.clone(),
                vec![
                    ("alpha".into(), word(&m, "diag(1,1)")),
                    ("beta".into(), word(&m, "diag(1,0)")),
                ],
            );
            let ctx = FlatCtx::new(&spec, m.standard(), m.trivial()?)?;
            let c = flat::factor_contraction(&ctx, &spec.gens[0].1)?;
            let mut s: Vec<BigUint> = c.factors.iter().map(|f| f.s.clone()).collect();
            s.sort();
            eq(vec![big(5), big(5)], s)
        },
    ));
    rows.push(row(
        "flat.single_generator_rank",
        "⟨α⟩ with s(α) > 1 has rank 1",
        || {
            let m = vec_model(3, 2);
            let spec = FlatSpec::new(m.clone(), vec![("alpha".into(), word(&m, "diag(1,-1)"))]);
            eq(1usize, flat::analyze(&spec, None)?.summary.rank)
        },
    ));

    // SL_n
    rows.push(row(
        "mat.sl3.iwahori_tidy",
        "Iwahori subgroup is tidy for the diagonal group",
        || {
            let (m, spec, iw) = sl3();
            eq(
                true,
                flat::is_tidy_for_group(&spec, &iw).map(|t| t && m.is_compact_open(&iw).unwrap_or(false))?,
            )
        },
    ));
    rows.push(row("mat.sl3.roots", "six roots, rank 2", || {
        let (_, spec, iw) = sl3();
        let r = flat::analyze(&spec, Some(&iw))?;
        eq((6usize, 2usize), (r.roots.len(), r.summary.rank))
    }));
    rows.push(row(
        "mat.sl3.factorization",
        "[U:U∩K] = [U_0:U_0∩K]·∏[U_ρ:U_ρ∩K]",
        || {
            let (_, spec, iw) = sl3();
            let f = flat::analyze(&spec, Some(&iw))?.factorization;
            eq(true, f.index_lhs == f.index_rhs && f.factors.len() == 7)
        },
    ));
    rows.push(row("mat.sl3.scale", "s(Ad diag(1,p,p^2)) = p^4", || {
        let m = mat(3, 3);
        eq(big(81), scale(&m, &auto(&m, "diag(0,1,2)"))?)
    }));
    rows.push(row(
        "mat.sl2.factor_multi",
        "diagonal pair splits the Iwahori subgroup into 4 factors",
        || {
            let m = mat(3, 2);
            let Model::Mat(mm) = &m else { unreachable!() };
            let iw = Sub::Mat(mm.iwahori());
            let f = flat::factor_multi(&m, &iw, &[auto(&m, "d_0"), auto(&m, "d_1")])?;
            eq((4usize, true), (f.factors.len(), f.verified))
        },
    ));

    // nubs of flat groups
    rows.push(row("shift.lnub.B", "nub(B) = {0}×F^Z and lnub(B) = {0}", || {
        let m = laurent_times_full(2);
        let Model::Shift(sm) = &m else { unreachable!() };
        let spec = FlatSpec::new(m.clone(), vec![]).with_family(0, 1);
        let fiber = Sub::Shift(sm.coordinate(1));
        let got = (
            flat::nub_flat(&spec)?.nub.to_string(),
            flat::lnub_flat(&spec)?.to_string(),
        );
        eq((fiber.to_string(), m.trivial()?.to_string()), got)
    }));
    rows.push(row("shift.lnub.H", "nub(⟨τ, B⟩) = {0}×F^Z", || {
        let m = laurent_times_full(2);
        let Model::Shift(sm) = &m else { unreachable!() };
        let spec = FlatSpec::new(m.clone(), vec![("tau".into(), word(&m, "tau_0"))]).with_family(0, 1);
        eq(
            Sub::Shift(sm.coordinate(1)).to_string(),
            flat::nub_flat(&spec)?.nub.to_string(),
        )
    }));
    rows.push(row("shift.lnub.K", "nub(K) = lnub(K)", || {
        let m = laurent_times_full(2);
        let spec = k_spec(&m);
        eq(
            flat::lnub_flat(&spec)?.to_string(),
            flat::nub_flat(&spec)?.nub.to_string(),
        )
    }));
    rows.push(row(
        "shift.lnub.K.tidy",
        "tidy subgroup for K is t^m F[[t]] × F^Z",
        || {
            let m = laurent_times_full(2);
            let Model::Shift(sm) = &m else { unreachable!() };
            let u = flat::find_common_tidy(&k_spec(&m), None)?.u;
            let fiber = Sub::Shift(sm.coordinate(1));
            let tau = auto(&m, "tau_0");
            let comparable = m.le(&m.apply(&tau, &u)?, &u)? || m.le(&u, &m.apply(&tau, &u)?)?;
            eq(true, m.le(&fiber, &u)? && comparable && m.is_compact_open(&u)?)
        },
    ));
    rows.push(row(
        "shift.nub_smaller",
        "restriction to con(β/nub) has a strictly smaller nub",
        || {
            let (full, restricted) = nub_smaller()?;
            eq(true, restricted < full)
        },
    ));
    rows.push(row(
        "shift.shrinking_not_invariant",
        "β(U_{α--}) ≰ U_{α--} and β(U_{α--}) ≤ U_{α--}·β(U_{α0})",
        || {
            let m = shift(2, &[LR, LR]);
            let (a, b) = (auto(&m, "tau_0"), auto(&m, "tau_1^-1"));
            eq((true, true), flat::shrinking_invariance(&m, &m.standard(), &a, &b)?)
        },
    ));

    // trees of cosets
    rows.push(row("treerep.binary", "ball of radius 3 at s = 2", || {
        let m = shift(2, &[LR]);
        let t = treerep::build_tree(&m, &m.standard(), &auto(&m, "tau_0^-1"), 3)?;
        eq((22usize, true), (t.vertices.len(), t.checks.all()))
    }));
    rows.push(row("treerep.padic", "ball of radius 2 for p^-1 on Q_3", || {
        let m = vec_model(3, 1);
        let t = treerep::build_tree(&m, &m.standard(), &auto(&m, "diag(-1)"), 2)?;
        eq((17usize, true), (t.vertices.len(), t.checks.all()))
    }));

    // scale laws on every catalog automorphism
    for ca in catalog_automorphisms() {
        rows.push(row(
            format!("scale.power.{}", ca.id),
            "s(a^n) = s(a)^n for n ≤ 5",
            move || {
                let s1 = scale(&ca.model, &ca.model.eval(&ca.word)?)?;
                let mut computed = Vec::new();
                for n in 1..=5u32 {
                    computed.push(scale(&ca.model, &ca.model.eval(&ca.word.pow(n as i64))?)?);
                }
                let expected: Vec<BigUint> = (1..=5u32).map(|n| s1.pow(n)).collect();
                eq(expected, computed)
            },
        ));
    }
    rows
}

/// SL_3(Q_2) with its diagonal generators and the Iwahori subgroup.
pub fn sl3() -> (Model, FlatSpec, Sub) {
    let m = mat(2, 3);
    let Model::Mat(mm) = &m else { unreachable!() };
    let iw = Sub::Mat(mm.iwahori());
    let gens = (0..3)
        .map(|i| (format!("d_{i}"), word(&m, &format!("d_{i}"))))
        .collect();
    (m.clone(), FlatSpec::new(m, gens), iw)
}

/// `K = ⟨σ, τ, B⟩` on `F_p((t)) × F_p^Z`.
pub fn k_spec(m: &Model) -> FlatSpec {
    FlatSpec::new(
        m.clone(),
        vec![("sigma".into(), word(m, "tau_1")), ("tau".into(), word(m, "tau_0"))],
    )
    .with_family(0, 1)
}

/// Number of nontrivial coordinates of the nub of `H × H` and of its
/// restriction to `con(β/nub)` with `β = (τ, τ⁻¹)`.
pub fn nub_smaller() -> Res<(usize, usize)> {
    let m = shift(2, &[LR, Full, LR, Full]);
    let Model::Shift(sm) = &m else { unreachable!() };
    let spec = FlatSpec::new(
        m.clone(),
        vec![("tau1".into(), word(&m, "tau_0")), ("tau2".into(), word(&m, "tau_2"))],
    )
    .with_family(0, 1)
    .with_family(2, 3);
    let nub = flat::nub_flat(&spec)?.nub;
    let expected_nub = m.join(&Sub::Shift(sm.coordinate(1)), &Sub::Shift(sm.coordinate(3)))?;
    if nub != expected_nub {
        return Err(tdscale::Error::Invalid(format!("nub of the product is {nub}")));
    }
    let beta = auto(&m, "tau_0·tau_2^-1");
    let rc = m.join(&m.con_closure(&beta)?, &nub)?;
    // con(β/nub) = (F((t)) × F^Z) × ({0} × F^Z)
    let present: Vec<bool> = (0..4)
        .map(|c| {
            let coord = Sub::Shift(sm.coordinate(c));
            m.le(&coord, &rc)
        })
        .collect::<Res<_>>()?;
    if present != [true, true, false, true] {
        return Err(tdscale::Error::Invalid(format!("con(β/nub) is {rc}")));
    }
    // the restricted group: coordinates 0, 1, 3; the second factor acts trivially on 3
    let r = shift(2, &[LR, Full, Full]);
    let Model::Shift(rs) = &r else { unreachable!() };
    let rspec = FlatSpec::new(r.clone(), vec![("tau1".into(), word(&r, "tau_0"))]).with_family(0, 1);
    let rnub = flat::nub_flat(&rspec)?.nub;
    let count = |model: &Model, s: &ShiftModel, n: &Sub| -> Res<usize> {
        let mut k = 0;
        for c in 0..s.coords.len() {
            if model.le(&Sub::Shift(s.coordinate(c)), n)? {
                k += 1;
            }
        }
        Ok(k)
    };
    Ok((count(&m, sm, &nub)?, count(&r, rs, &rnub)?))
}

pub fn rows_len() -> usize {
    all_rows().len()
}

/// Evaluates every row, on `jobs` threads when given; output is sorted by id.
pub fn run_catalog(jobs: Option<usize>) -> Vec<Row> {
    let rows = all_rows();
    let eval = |(id, check, f): &(String, String, RowFn)| {
        let (expected, computed, pass) = match f() {
            Ok(c) => (c.expected, c.computed, c.pass),
            Err(e) => ("no error".to_string(), e.code().to_string(), false),
        };
        Row {
            id: id.clone(),
            check: check.clone(),
            expected,
            computed,
            pass,
        }
    };
    let mut out: Vec<Row> = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(|| rows.par_iter().map(eval).collect()),
        None => rows.par_iter().map(eval).collect(),
    };
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

pub fn rows_json(rows: &[Row]) -> Value {
    json!({
        "rows": rows,
        "passed": rows.iter().filter(|r| r.pass).count(),
        "total": rows.len(),
    })
}

pub fn render_table(rows: &[Row]) -> String {
    let w = rows.iter().map(|r| r.id.len()).max().unwrap_or(2);
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{:<w$}  {}  expected {}  computed {}\n",
            r.id,
            if r.pass { "pass" } else { "FAIL" },
            r.expected,
            r.computed,
        ));
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    out.push_str(&format!("{passed}/{} rows pass\n", rows.len()));
    out
}
