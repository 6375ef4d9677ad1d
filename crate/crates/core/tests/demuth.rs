use std::collections::BTreeMap;

use rand::Rng;
use revrand::demuth::{
    balanced_split, certify_split, change_count, interleave, limit_index, normalize_changes, weakly_passes,
    DemuthTestCode, HREFn, Role,
};
use revrand::opensets::captures;
use revrand::{gen, BitStr, Capture, OpenCode, Rat};

#[test]
fn change_counts_match_direct_scan() {
    for seed in 0..50 {
        let mut g = gen::rng(1100 + seed);
        let rows: Vec<Vec<u64>> = (0..5)
            .map(|_| (0..g.gen_range(1..8)).map(|_| g.gen_range(0..3)).collect())
            .collect();
        let h = vec![8; 5];
        let f = HREFn::new(rows.clone(), h, true).unwrap();
        for (n, row) in rows.iter().enumerate() {
            let mut count = 0;
            let mut last_change = None;
            for s in 1..row.len() {
                if row[s] != row[s - 1] {
                    count += 1;
                    last_change = Some(s);
                }
            }
            assert_eq!(change_count(&f, n).unwrap(), count);
            assert_eq!(f.last_change(n), last_change);
            let lim = limit_index(&f, n).unwrap();
            assert_eq!(lim, row[last_change.unwrap_or(0)]);
        }
    }
}

#[test]
fn zero_change_tests_behave_as_ml_tests() {
    for seed in 0..30 {
        let mut g = gen::rng(1200 + seed);
        let rows: Vec<OpenCode> = (0..5)
            .map(|n| gen::random_code(&mut g, 1, 6, &Rat::pow2_neg(n), None))
            .collect();
        let registry: BTreeMap<u64, OpenCode> = rows.iter().cloned().enumerate().map(|(i, c)| (i as u64, c)).collect();
        let f = HREFn::new((0..5).map(|n| vec![n as u64; 3]).collect(), vec![0; 5], true).unwrap();
        let t = DemuthTestCode::new(f, registry, Some(1)).unwrap();
        let seq = revrand::UniformSeq::new(rows);
        for x in BitStr::all_of_len(6).unwrap() {
            assert_eq!(weakly_passes(&x, &t).unwrap(), captures(&seq, &x).unwrap());
        }
    }
}

#[test]
fn normalization_keeps_limits() {
    for seed in 0..20 {
        let mut g = gen::rng(1300 + seed);
        let x0 = gen::random_string(&mut g, 6, 6);
        let x1 = gen::random_string(&mut g, 6, 6);
        let (t0, _) = gen::demuth_pair(&mut g, 5, 3, &x0, &x1);
        let n = normalize_changes(&t0);
        for r in 0..t0.rows() {
            assert!(change_count(n.g(), r).unwrap() >= 1);
            assert_eq!(
                n.registry()[&limit_index(n.g(), r).unwrap()],
                t0.registry()[&limit_index(t0.g(), r).unwrap()]
            );
        }
    }
}

#[test]
fn split_measures_and_capture_transfer_on_random_pairs() {
    for seed in 0..25 {
        let mut g = gen::rng(1400 + seed);
        let x0 = gen::random_string(&mut g, 6, 6);
        let x1 = gen::random_string(&mut g, 6, 6);
        let c = g.gen_range(1..=4);
        let rows = g.gen_range(2..=6);
        let (t0, t1) = gen::demuth_pair(&mut g, rows, c, &x0, &x1);
        let x = interleave(&x0, &x1).unwrap();
        assert_eq!(weakly_passes(&x0, &t0).unwrap(), Capture::CapturedSoFar);
        let n0 = normalize_changes(&t0);
        let n1 = normalize_changes(&t1);
        for role in [Role::Last0, Role::Last1] {
            let b = balanced_split(&t0, &t1, role).unwrap();
            for (n, row) in b.test.rows().iter().enumerate() {
                for m in row.stage_measures() {
                    assert!(m <= Rat::pow2_neg(n));
                }
            }
            for i in 0..rows {
                let (a, o) = if role == Role::Last0 { (&n0, &n1) } else { (&n1, &n0) };
                if a.g().last_change(i) >= o.g().last_change(i) {
                    assert!(b.o[i].limit().meets(&x), "seed {seed} row {i}");
                }
            }
        }
        let report = certify_split(&t0, &t1, &x0, &x1).unwrap();
        for (role, last) in &report.last_change_rows {
            if last.len() == rows {
                let hit = &report.captured_rows.iter().find(|(r, _)| r == role).unwrap().1;
                let b = balanced_split(&t0, &t1, *role).unwrap();
                assert_eq!(hit.len(), revrand::demuth::checkable_rows(&b));
            }
        }
    }
}

#[test]
fn hand_built_fixture_certifies_the_first_role() {
    let (t0, t1) = gen::demuth_last_change_fixture(6, 6);
    let x0 = BitStr::zeros(6).unwrap();
    let x1 = BitStr::repeat(true, 6).unwrap();
    let r = certify_split(&t0, &t1, &x0, &x1).unwrap();
    assert_eq!(r.certified, Some(Role::Last0));
    let b = balanced_split(&t0, &t1, Role::Last0).unwrap();
    assert_eq!(b.c, 2);
    assert_eq!(b.k, 2);
    let x = interleave(&x0, &x1).unwrap();
    for n in 0..revrand::demuth::checkable_rows(&b) {
        assert!(b.test.rows()[n].limit().meets(&x));
    }
}
