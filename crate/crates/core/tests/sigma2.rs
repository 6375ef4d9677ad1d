mod common;

use common::{good_vectors, indicator, Expanded};
use revrand::gen;
use revrand::sigma2::{cover, cover_contains, find_b, good_check, ladder, thin_w2_to_sigma2, GoodVerdict};
use revrand::{BitStr, Rat};

fn r(s: &str) -> Rat {
    s.parse().unwrap()
}

#[test]
fn find_b_matches_exhaustive_search() {
    let q = r("1/4");
    let rr = r("5/16");
    for seed in 0..40 {
        let mut g = gen::rng(seed);
        let k = 2 + seed as usize % 6;
        let u = gen::random_family(&mut g, k, 8, &q);
        let e = Expanded::new(&u, 8);
        for a in 0..k {
            let got = find_b(&u, a, &q, &rr).unwrap();
            let cap = (a + 1).max(k - 1) + 1;
            let expect = (a + 1..)
                .find(|&b| {
                    let base = e.inter(a, b, None);
                    (b + 1..=cap.max(b + 1))
                        .all(|i| common::density(&common::or(&base, e.at(i, None)), 8) <= rr)
                })
                .unwrap();
            assert_eq!(got, expect, "seed {seed}, a = {a}");
        }
    }
}

#[test]
fn good_sequence_is_unique_and_cover_contains() {
    let q = r("1/4");
    let p = r("1/2");
    for seed in 0..20 {
        let mut g = gen::rng(100 + seed);
        let k = 1 + seed as usize % 5;
        let u = gen::random_family(&mut g, k, 8, &q);
        let c = cover(&u, &q, &p).unwrap();
        assert_eq!(good_check(&c.spine, &u).unwrap(), GoodVerdict::Good);
        let e = Expanded::new(&u, 8);
        let bounds = ladder(&q, &p, k).unwrap();
        for n in 1..=k.min(3) {
            let found = good_vectors(&e, &bounds, n, k + 2);
            assert_eq!(found, vec![c.spine.bs()[..n].to_vec()], "seed {seed}, n = {n}");
        }
        let d = c.code.depth();
        for n_lo in 0..=k + 1 {
            assert!(cover_contains(&u, &c, n_lo).unwrap().is_empty());
            let mut inside = vec![true; 1 << 8];
            for i in n_lo.min(k - 1)..k {
                inside = common::and(&inside, &indicator(&u.rows[i].limit(), 8));
            }
            for (idx, hit) in inside.iter().enumerate() {
                if *hit {
                    let x = BitStr::from_index(idx as u128, 8).unwrap();
                    assert!(c.code.covers_cylinder(&x).unwrap(), "seed {seed}, N = {n_lo}, x = {x}");
                }
            }
        }
        let top = c.code.level_union(d).unwrap();
        assert!(Rat::dyadic(top.len() as u64, d) <= p);
    }
}

#[test]
fn thinning_keeps_captured_strings() {
    for seed in 0..20 {
        let mut g = gen::rng(200 + seed);
        let w2 = gen::random_w2(&mut g, 2 + seed as usize % 6, 8);
        let t = thin_w2_to_sigma2(&w2).unwrap();
        let mut all = vec![true; 1 << 8];
        for row in &w2.seq().rows {
            all = common::and(&all, &indicator(&row.limit(), 8));
        }
        for (idx, hit) in all.iter().enumerate() {
            if *hit {
                let x = BitStr::from_index(idx as u128, 8).unwrap();
                assert!(t.test.covers_cylinder(&x).unwrap());
            }
        }
        for (n, row) in t.test.rows().iter().enumerate() {
            let m = t.least_m[n];
            let d = row.depth();
            let expect = w2.seq().rows[m].limit().cylinder_members(d).unwrap();
            assert_eq!(row.level_union(d).unwrap(), expect, "seed {seed} row {n}");
        }
    }
}
