//! Pattern indices and product tests against brute-force enumeration of
//! `SL_n(Z/p^K)`.

use std::collections::HashSet;

use num_bigint::BigUint;
use tdscale::model_padic_mat::{Diag, MatModel, Pattern};
use tdscale::Ext;

fn all_sl(p: u64, k: u32, n: usize) -> Vec<Vec<u64>> {
    let q = p.pow(k);
    let total = (q as usize).pow((n * n) as u32);
    let mut out = Vec::new();
    for mut code in 0..total {
        let mut g = vec![0u64; n * n];
        for x in g.iter_mut() {
            *x = (code % q as usize) as u64;
            code /= q as usize;
        }
        if det(&g, n, q) == 1 {
            out.push(g);
        }
    }
    out
}

fn det(g: &[u64], n: usize, q: u64) -> u64 {
    let m = |i: usize, j: usize| g[i * n + j] as i128;
    let q = q as i128;
    let d = match n {
        2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
        3 => {
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
        _ => unreachable!(),
    };
    d.rem_euclid(q) as u64
}

fn val_at_least(x: u64, e: Ext, p: u64, k: u32) -> bool {
    match e {
        Ext::NegInf => true,
        Ext::PosInf => x == 0,
        Ext::Fin(e) if e <= 0 => true,
        Ext::Fin(e) if e as u32 >= k => x == 0,
        Ext::Fin(e) => x.is_multiple_of(p.pow(e as u32)),
    }
}

fn member(g: &[u64], pat: &Pattern, p: u64, k: u32) -> bool {
    let n = pat.n();
    (0..n).all(|i| {
        (0..n).all(|j| {
            if i == j {
                pat.diag == Diag::Units || g[i * n + i] == 1
            } else {
                val_at_least(g[i * n + j], pat.get(i, j), p, k)
            }
        })
    })
}

fn mul(a: &[u64], b: &[u64], n: usize, q: u64) -> Vec<u64> {
    let mut c = vec![0u64; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = (0..n).map(|t| a[i * n + t] * b[t * n + j]).sum::<u64>() % q;
        }
    }
    c
}

fn subgroup(all: &[Vec<u64>], pat: &Pattern, p: u64, k: u32) -> Vec<Vec<u64>> {
    all.iter().filter(|g| member(g, pat, p, k)).cloned().collect()
}

fn sl2_patterns(m: &MatModel, k: u32) -> Vec<Pattern> {
    let mut entries: Vec<Ext> = (0..=k as i64).map(Ext::Fin).collect();
    entries.push(Ext::PosInf);
    let mut out = Vec::new();
    for &a in &entries {
        for &b in &entries {
            for diag in [Diag::Units, Diag::One] {
                let mat = vec![vec![Ext::Fin(0), a], vec![b, Ext::Fin(0)]];
                if let Ok(pat) = m.pattern(mat, diag) {
                    out.push(pat);
                }
            }
        }
    }
    out
}

#[test]
fn sl2_indices_match_counts() {
    for (p, k) in [(2u64, 3u32), (3, 2), (3, 3)] {
        let m = MatModel::new(p, 2).unwrap();
        let all = all_sl(p, k, 2);
        let pats: Vec<Pattern> = sl2_patterns(&m, k)
            .into_iter()
            .filter(|x| x.diag == Diag::Units && x.is_open())
            .collect();
        let sizes: Vec<usize> = pats.iter().map(|x| subgroup(&all, x, p, k).len()).collect();
        for (v, sv) in pats.iter().zip(&sizes) {
            for (u, su) in pats.iter().zip(&sizes) {
                if m.le(u, v) {
                    assert_eq!(
                        m.index(v, u).unwrap(),
                        BigUint::from((sv / su) as u64),
                        "p={p} [{v} : {u}]"
                    );
                }
            }
        }
    }
}

#[test]
fn sl3_mod4_indices_match_counts() {
    let (p, k) = (2u64, 2u32);
    let m = MatModel::new(p, 3).unwrap();
    let all = all_sl(p, k, 3);
    assert_eq!(all.len(), 43008);
    let mut pats = Vec::new();
    // every valid pattern with entries in {0,1,2}
    for code in 0..3usize.pow(6) {
        let mut c = code;
        let mut mat = vec![vec![Ext::Fin(0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    mat[i][j] = Ext::Fin((c % 3) as i64);
                    c /= 3;
                }
            }
        }
        if let Ok(pat) = m.pattern(mat, Diag::Units) {
            pats.push(pat);
        }
    }
    assert!(pats.len() > 20);
    let std = m.standard();
    for u in &pats {
        let count = subgroup(&all, u, p, k).len();
        assert_eq!(
            m.index(&std, u).unwrap(),
            BigUint::from((all.len() / count) as u64),
            "[SL_3 : {u}]"
        );
    }
}

fn brute_product(a: &[Vec<u64>], b: &[Vec<u64>], n: usize, q: u64) -> HashSet<Vec<u64>> {
    let mut out = HashSet::new();
    for x in a {
        for y in b {
            out.insert(mul(x, y, n, q));
        }
    }
    out
}

#[test]
fn sl2_products_match_enumeration() {
    for (p, k) in [(2u64, 3u32), (3, 2)] {
        let q = p.pow(k);
        let m = MatModel::new(p, 2).unwrap();
        let all = all_sl(p, k, 2);
        // keep the entries small so the residue ring sees every thickening step
        let pats: Vec<Pattern> = sl2_patterns(&m, k)
            .into_iter()
            .filter(|x| (0..2).all(|i| (0..2).all(|j| x.get(i, j) <= Ext::Fin(1) || x.get(i, j) == Ext::PosInf)))
            .collect();
        let sets: Vec<Vec<Vec<u64>>> = pats.iter().map(|x| subgroup(&all, x, p, k)).collect();
        let mut seen = [0usize; 2];
        for (u, su) in pats.iter().zip(&sets) {
            if !u.is_open() {
                continue;
            }
            let uset: HashSet<Vec<u64>> = su.iter().cloned().collect();
            for (a, sa) in pats.iter().zip(&sets) {
                for (b, sb) in pats.iter().zip(&sets) {
                    if !m.le(a, u) || !m.le(b, u) {
                        continue;
                    }
                    let brute = brute_product(sa, sb, 2, q) == uset;
                    assert_eq!(m.product_equals(u, a, b).unwrap(), brute, "p={p} {u} = {a}·{b}");
                    seen[brute as usize] += 1;
                }
            }
        }
        assert!(seen[0] > 10 && seen[1] > 10, "{seen:?}");
    }
}
