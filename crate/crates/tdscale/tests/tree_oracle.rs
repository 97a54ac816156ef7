//! Fixator indices and products checked against the automorphism group of a
//! finite ball, enumerated by brute force. Ball automorphisms fix the centre,
//! so every compared set contains `v_0`; the restriction map from the
//! fixator in the tree onto the fixator in the ball is then surjective.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use tdscale::model_tree::{TreeModel, Vertex};

struct Ball {
    verts: Vec<Vertex>,
    autos: Vec<Vec<usize>>,
    cache: HashMap<BTreeSet<usize>, usize>,
}

impl Ball {
    fn new(t: &TreeModel, r: usize) -> Ball {
        let center = Vertex::axis(0);
        let verts = t.ball(&center, r);
        let pos: HashMap<Vertex, usize> = verts.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        // children of each vertex when rooted at the centre
        let mut depth = vec![usize::MAX; verts.len()];
        depth[pos[&center]] = 0;
        let mut order = vec![pos[&center]];
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            for w in t.neighbours(&verts[u]) {
                if let Some(&j) = pos.get(&w) {
                    if depth[j] == usize::MAX {
                        depth[j] = depth[u] + 1;
                        order.push(j);
                    }
                }
            }
            i += 1;
        }
        let children: Vec<Vec<usize>> = (0..verts.len())
            .map(|u| {
                t.neighbours(&verts[u])
                    .iter()
                    .filter_map(|w| pos.get(w).copied())
                    .filter(|&j| depth[j] == depth[u] + 1)
                    .collect()
            })
            .collect();
        let mut autos = Vec::new();
        let mut map = vec![usize::MAX; verts.len()];
        map[pos[&center]] = pos[&center];
        extend(&children, &order, 0, &mut map, &mut autos);
        Ball {
            verts,
            autos,
            cache: HashMap::new(),
        }
    }

    fn index_of(&self, v: &Vertex) -> usize {
        self.verts.iter().position(|x| x == v).unwrap()
    }

    fn fix_count(&mut self, s: &[usize]) -> usize {
        let key: BTreeSet<usize> = s.iter().copied().collect();
        if let Some(&c) = self.cache.get(&key) {
            return c;
        }
        let c = self.autos.iter().filter(|g| key.iter().all(|&i| g[i] == i)).count();
        self.cache.insert(key, c);
        c
    }
}

/// Every automorphism of the rooted ball, built by choosing a bijection of
/// children below each already mapped vertex in BFS order.
fn extend(children: &[Vec<usize>], order: &[usize], k: usize, map: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k == order.len() {
        out.push(map.clone());
        return;
    }
    let u = order[k];
    let src = &children[u];
    let dst = &children[map[u]];
    if src.is_empty() {
        extend(children, order, k + 1, map, out);
        return;
    }
    let mut perm: Vec<usize> = (0..dst.len()).collect();
    permutations(&mut perm, 0, &mut |p| {
        for (a, &b) in src.iter().zip(p) {
            map[*a] = dst[b];
        }
        extend(children, order, k + 1, map, out);
    });
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

#[test]
fn ball_automorphism_counts() {
    let t2 = TreeModel::new(2).unwrap();
    assert_eq!(Ball::new(&t2, 3).autos.len(), 3072);
    let t3 = TreeModel::new(3).unwrap();
    assert_eq!(Ball::new(&t3, 2).autos.len(), 31104);
}

fn check_indices(q: u64, r: usize) {
    let t = TreeModel::new(q).unwrap();
    let mut ball = Ball::new(&t, r);
    let verts = ball.verts.clone();
    let o = Vertex::axis(0);
    let io = ball.index_of(&o);
    for x in &verts {
        let ux = t.fix([o.clone(), x.clone()]).unwrap();
        for y in &verts {
            let uxy = t.fix([o.clone(), x.clone(), y.clone()]).unwrap();
            let (ix, iy) = (ball.index_of(x), ball.index_of(y));
            let brute = ball.fix_count(&[io, ix]) / ball.fix_count(&[io, ix, iy]);
            assert_eq!(
                t.index(&ux, &uxy).unwrap(),
                BigUint::from(brute),
                "q={q} [{x} : {x},{y}]"
            );
        }
    }
}

#[test]
fn indices_q2_radius3() {
    check_indices(2, 3);
}

#[test]
fn indices_q3_radius2() {
    check_indices(3, 2);
}

fn check_products(q: u64, r: usize) {
    let t = TreeModel::new(q).unwrap();
    let mut ball = Ball::new(&t, r);
    let verts = ball.verts.clone();
    let inner = t.ball(&Vertex::axis(0), 1);
    let mut seen = [0usize; 2];
    let x = &Vertex::axis(0);
    {
        for y in &inner {
            let h = t.fix([x.clone(), y.clone()]).unwrap();
            let hs = [ball.index_of(x), ball.index_of(y)];
            for a in &verts {
                for b in &verts {
                    let fa = t.fix([x.clone(), y.clone(), a.clone()]).unwrap();
                    let fb = t.fix([x.clone(), y.clone(), b.clone()]).unwrap();
                    let (ia, ib) = (ball.index_of(a), ball.index_of(b));
                    let nh = ball.fix_count(&hs);
                    let na = ball.fix_count(&[hs[0], hs[1], ia]);
                    let nb = ball.fix_count(&[hs[0], hs[1], ib]);
                    let nab = ball.fix_count(&[hs[0], hs[1], ia, ib]);
                    let brute = na * nb == nh * nab;
                    assert_eq!(
                        t.product_equals(&h, &fa, &fb).unwrap(),
                        brute,
                        "q={q} H={x},{y} a={a} b={b}"
                    );
                    seen[brute as usize] += 1;
                }
            }
        }
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn products_q2_radius3() {
    check_products(2, 3);
}

#[test]
fn products_q3_radius2() {
    check_products(3, 2);
}
