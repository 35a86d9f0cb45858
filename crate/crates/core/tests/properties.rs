use e2c_core::forest::{fit_forest, write_forest, Forest, ForestParams, Node, RegressionTree, SampleView};
use e2c_core::importance::{mdi_importance, permutation_importance, Permutation};
use e2c_core::structural::{
    creditgrades_spread, creditgrades_survival, e2c_spread, mad_ratio, ModelParams, SpreadInputs,
};
use proptest::prelude::*;

fn inputs(s: f64, vol: f64, d: f64) -> SpreadInputs {
    SpreadInputs::new(s, vol, d).unwrap()
}

/// Small integer-valued features (so ties occur) and a noisy target.
fn dataset(max_rows: usize, p: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..max_rows).prop_flat_map(move |n| {
        (
            proptest::collection::vec(-20i32..20, n * p),
            proptest::collection::vec(-50.0..50.0f64, n),
        )
            .prop_map(|(x, y)| (x.into_iter().map(f64::from).collect(), y))
    })
}

fn fit(x: &[f64], y: &[f64], p: usize, params: &ForestParams, workers: usize) -> Forest {
    let view = SampleView::new(x, p, y).unwrap();
    fit_forest(&view, params, Some(workers)).unwrap()
}

fn params(seed: u64, m: usize, depth: usize) -> ForestParams {
    ForestParams {
        n_trees: 6,
        features_per_node: m,
        max_depth: depth,
        seed,
        ..ForestParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn e2c_is_monotone(s in 1.0..500.0f64, vol in 0.01..1.5f64, d in 0.01..500.0f64, k in 1.01..3.0f64) {
        let p = ModelParams::default();
        let base = e2c_spread(&inputs(s, vol, d), &p).unwrap();
        prop_assert!(base > 0.0);
        prop_assert!(e2c_spread(&inputs(s, vol, d * k), &p).unwrap() > base);
        prop_assert!(e2c_spread(&inputs(s, vol * k, d), &p).unwrap() > base);
        prop_assert!(e2c_spread(&inputs(s * k, vol, d), &p).unwrap() < base);
    }

    #[test]
    fn mad_ratio_stays_below_one(s in 1e-3..1e4f64, d in 0.0..1e6f64, lbar in 0.01..1.0f64) {
        let r = mad_ratio(&inputs(s, 0.3, d), lbar).unwrap();
        prop_assert!((0.0..1.0).contains(&r));
        prop_assert_eq!(r == 0.0, d == 0.0);
    }

    #[test]
    fn survival_is_a_probability_falling_with_time(
        s in 1.0..500.0f64, vol in 0.01..2.0f64, d in 0.0..2000.0f64, t in 0.01..30.0f64,
    ) {
        let p = ModelParams::default();
        let x = inputs(s, vol, d);
        let q = creditgrades_survival(&x, &p, t).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!(creditgrades_survival(&x, &p, t * 1.5).unwrap() <= q);
        let spread = creditgrades_spread(&x, &p).unwrap();
        prop_assert!(spread.is_finite() && spread >= 0.0);
    }

    #[test]
    fn trees_satisfy_their_structural_invariants(
        (x, y) in dataset(40, 3), seed in any::<u64>(), depth in 1usize..6,
    ) {
        let p = 3;
        let forest = fit(&x, &y, p, &params(seed, 2, depth), 1);
        let n = y.len();
        for (tree, bag) in forest.trees().iter().zip(forest.bags()) {
            prop_assert!(tree.depth() <= depth);
            prop_assert!(RegressionTree::from_nodes(tree.nodes().to_vec(), depth).is_ok());
            let leaves = tree.nodes().len();
            let mut weight = vec![0.0; leaves];
            let mut sum = vec![0.0; leaves];
            for &i in &bag.draws {
                let i = i as usize;
                let leaf = tree.leaf_index(&x[i * p..(i + 1) * p]);
                weight[leaf] += 1.0;
                sum[leaf] += y[i];
            }
            prop_assert_eq!(bag.draws.len(), n);
            for (k, node) in tree.nodes().iter().enumerate() {
                match *node {
                    Node::Split { improvement, .. } => prop_assert!(improvement >= 0.0),
                    Node::Leaf { value, samples } => {
                        prop_assert_eq!(samples as f64, weight[k]);
                        let mean = sum[k] / weight[k];
                        prop_assert!((value - mean).abs() <= 1e-9 * mean.abs().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn training_ignores_the_worker_count((x, y) in dataset(60, 4), seed in any::<u64>(), workers in 2usize..6) {
        let ps = params(seed, 3, 8);
        let one = fit(&x, &y, 4, &ps, 1);
        let many = fit(&x, &y, 4, &ps, workers);
        prop_assert_eq!(write_forest(&one), write_forest(&many));
    }

    #[test]
    fn increasing_transform_keeps_predictions((x, y) in dataset(50, 3), seed in any::<u64>(), j in 0usize..3) {
        let p = 3;
        let ps = params(seed, 2, 10);
        let mut z = x.clone();
        for row in z.chunks_mut(p) {
            let v = row[j];
            row[j] = v * v * v + v;
        }
        let a = fit(&x, &y, p, &ps, 1);
        let b = fit(&z, &y, p, &ps, 1);
        for i in 0..y.len() {
            let pa = a.predict(&x[i * p..(i + 1) * p]).unwrap();
            let pb = b.predict(&z[i * p..(i + 1) * p]).unwrap();
            prop_assert_eq!(pa.to_bits(), pb.to_bits());
        }
    }

    #[test]
    fn mdi_is_normalized_and_constant_features_score_zero(
        (x, y) in dataset(60, 3), seed in any::<u64>(),
    ) {
        // append a constant fourth column that can never split
        let p = 4;
        let wide: Vec<f64> = x.chunks(3).flat_map(|r| [r[0], r[1], r[2], 7.0]).collect();
        let forest = fit(&wide, &y, p, &params(seed, 4, 6), 1);
        let mdi = mdi_importance(&forest);
        prop_assert_eq!(mdi[3], 0.0);
        let splits = forest
            .trees()
            .iter()
            .any(|t| t.nodes().iter().any(|n| matches!(n, Node::Split { improvement, .. } if *improvement > 0.0)));
        if splits {
            prop_assert!((mdi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let view = SampleView::new(&wide, p, &y).unwrap();
        if let Ok(vi) = permutation_importance(&forest, &view, Permutation::Shuffle { seed }) {
            prop_assert_eq!(vi.scores[3], 0.0);
            let again = permutation_importance(&forest, &view, Permutation::Shuffle { seed }).unwrap();
            prop_assert_eq!(vi, again);
        }
    }
}
