use fnc_stance::gbdt::{find_best_split, fit, grad_hess, softmax, DenseMatrix, TrainParams, TreeNode};
use fnc_testkit::oracle::{exhaustive_split, numeric_derivatives, random_data, rel_close};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let k = rng.gen_range(2..=4);
        let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y = rng.gen_range(0..k);
        let (g, h) = grad_hess(&[y], &softmax(&z), k).unwrap();
        for c in 0..k {
            let (ng, nh) = numeric_derivatives(&z, y, c);
            assert!(rel_close(g[c], ng, 1e-5), "g {} vs {ng}", g[c]);
            assert!(rel_close(h[c], nh, 1e-5), "h {} vs {nh}", h[c]);
        }
    }
}

#[test]
fn full_sample_loss_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (x, y) = random_data(&mut rng, 150, 4, 3);
    let params = TrainParams {
        n_rounds: 200,
        max_depth: 3,
        ..Default::default()
    };
    let m = fit(&x, &y, 3, &params).unwrap();
    assert_eq!(m.train_loss.len(), 200);
    for w in m.train_loss.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn subsampled_loss_trends_down() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, y) = random_data(&mut rng, 200, 5, 3);
    let params = TrainParams {
        n_rounds: 200,
        max_depth: 3,
        subsample: 0.7,
        colsample: 0.6,
        seed: 11,
        ..Default::default()
    };
    let m = fit(&x, &y, 3, &params).unwrap();
    for start in (0..150).step_by(25) {
        assert!(m.train_loss[start + 49] < m.train_loss[start]);
    }
    let again = fit(&x, &y, 3, &params).unwrap();
    assert_eq!(m.to_json().unwrap(), again.to_json().unwrap());
}

#[test]
fn root_split_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..20 {
        let n = rng.gen_range(20..=200);
        let d = rng.gen_range(1..=5);
        let (x, y) = random_data(&mut rng, n, d, 3);
        let params = TrainParams {
            n_rounds: 1,
            max_depth: 1,
            learning_rate: 1.0,
            ..Default::default()
        };
        // first-round gradients for class 0 at uniform probabilities
        let g: Vec<f64> = y.iter().map(|&c| 1.0 / 3.0 - if c == 0 { 1.0 } else { 0.0 }).collect();
        let h = vec![2.0 / 9.0; n];
        let oracle = exhaustive_split(&x, &g, &h, &params);

        let model = fit(&x, &y, 3, &params).unwrap();
        match (&model.trees[0][0], oracle) {
            (TreeNode::Split { feature, threshold, .. }, Some((f, thr, gain))) => {
                assert_eq!(*feature, f, "case {case}");
                assert!((threshold - thr).abs() < 1e-12, "case {case}");
                let col: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
                let single = find_best_split(&col, &g, &h, &params).unwrap();
                assert!((single.gain - gain).abs() < 1e-9, "case {case}");
            }
            (TreeNode::Leaf { .. }, None) => {}
            (t, o) => panic!("case {case}: tree {t:?} vs oracle {o:?}"),
        }
        for f in 0..d {
            let col: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
            let one = DenseMatrix::new(n, 1, col.clone()).unwrap();
            let expect = exhaustive_split(&one, &g, &h, &params);
            let got = find_best_split(&col, &g, &h, &params);
            match (got, expect) {
                (Some(s), Some((_, thr, gain))) => {
                    assert!((s.gain - gain).abs() < 1e-9);
                    assert!((s.threshold - thr).abs() < 1e-12);
                }
                (None, None) => {}
                other => panic!("case {case} feature {f}: {other:?}"),
            }
        }
    }
}

#[test]
fn depth_limit_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (x, y) = random_data(&mut rng, 200, 3, 4);
    for depth in [0, 1, 2, 4] {
        let m = fit(
            &x,
            &y,
            4,
            &TrainParams {
                n_rounds: 5,
                max_depth: depth,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.trees.iter().flatten().all(|t| t.depth() <= depth));
    }
}
