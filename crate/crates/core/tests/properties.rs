use assist::assist::{fit, ideal_aggregate, predict};
use assist::io::{dataset_from_str, dataset_to_string};
use assist::loss::{hinge, psi, sgn};
use assist::projection::{is_feasible, project_sparse_lowrank};
use assist::simgen::gen_monotone_transform;
use assist::tuning::kfold_split;
use assist::{Dataset, DenseMatrix, Hyperparams, LevelGrid, ResponseScale};
use proptest::prelude::*;

fn matrix(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-2.0f64..2.0, r * c).prop_map(move |v| DenseMatrix::new(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn aggregation_is_within_one_over_h(f in -1.0f64..=1.0, h in 1usize..60) {
        let a = ideal_aggregate(&[f], h).unwrap()[0];
        prop_assert!((a - f).abs() <= 1.0 / h as f64);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn aggregation_is_monotone(f in -1.0f64..=1.0, g in -1.0f64..=1.0, h in 1usize..30) {
        let v = ideal_aggregate(&[f.min(g), f.max(g)], h).unwrap();
        prop_assert!(v[0] <= v[1]);
    }

    #[test]
    fn grid_is_symmetric(h in 1usize..100) {
        let grid = LevelGrid::new(h).unwrap();
        let l = grid.levels();
        prop_assert_eq!(l.len(), 2 * h + 1);
        prop_assert_eq!((l[0], l[h], l[2 * h]), (-1.0, 0.0, 1.0));
        for k in 0..l.len() {
            prop_assert_eq!(l[k], -l[2 * h - k]);
        }
    }

    #[test]
    fn psi_is_bounded_and_below_twice_hinge(z in -10.0f64..10.0) {
        prop_assert!(psi(z) <= 2.0 && psi(z) >= 0.0);
        prop_assert!(psi(z) <= 2.0 * hinge(z));
        let zero_one = if sgn(z) < 0.0 { 1.0 } else { 0.0 };
        prop_assert!(hinge(z) >= zero_one);
    }

    #[test]
    fn projection_is_feasible_idempotent_and_contracting(m in matrix(5), r in 1usize..3, s1 in 1usize..4, s2 in 1usize..4) {
        let (d1, d2) = m.shape();
        prop_assume!(r <= s1.min(s2) && s1 <= d1 && s2 <= d2);
        let p = project_sparse_lowrank(&m, r, s1, s2, 20).unwrap();
        prop_assert!(is_feasible(&p, r, s1, s2));
        prop_assert_eq!(project_sparse_lowrank(&p, r, s1, s2, 20).unwrap(), p.clone());
        prop_assert!(p.sub(&m).frobenius_norm() <= m.frobenius_norm() + 1e-12);
    }

    #[test]
    fn monotone_transform_preserves_signs(b in -3.0f64..3.0, pi in -3.0f64..3.0, c in 0.1f64..10.0) {
        let g = |x: f64| gen_monotone_transform(&DenseMatrix::new(1, 1, vec![x]).unwrap(), c).get(0, 0);
        prop_assume!((b - pi).abs() > 1e-9);
        prop_assert_eq!(sgn(g(b) - g(pi)), sgn(b - pi));
    }

    #[test]
    fn response_scale_round_trips(ys in proptest::collection::vec(-1e3f64..1e3, 1..30)) {
        let scale = ResponseScale::fit(&ys).unwrap();
        for y in &ys {
            let z = scale.forward(*y);
            prop_assert!((-1.0..=1.0).contains(&z));
            prop_assert!((scale.inverse(z) - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn kfold_is_a_partition(n in 2usize..80, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = kfold_split(n, k, seed).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.1.clone()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn dataset_text_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 18)) {
        let xs: Vec<DenseMatrix> = values.chunks(6).map(|c| DenseMatrix::new(2, 2, c[..4].to_vec()).unwrap()).collect();
        let ws: Vec<Vec<f64>> = values.chunks(6).map(|c| vec![c[4]]).collect();
        let ys: Vec<f64> = values.chunks(6).map(|c| c[5]).collect();
        let data = Dataset::from_raw(xs, ws, &ys).unwrap();
        let back = dataset_from_str(&dataset_to_string(&data)).unwrap();
        for (a, b) in data.raw_responses().iter().zip(back.raw_responses()) {
            prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0) * 4.0);
        }
        for (a, b) in data.samples().iter().zip(back.samples()) {
            prop_assert_eq!(&a.predictor, &b.predictor);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn predictions_stay_in_the_response_range(seed in any::<u64>()) {
        let xs: Vec<DenseMatrix> = (0..20u64)
            .map(|i| DenseMatrix::from_fn(3, 3, |a, b| ((seed ^ (i * 31 + a as u64 * 7 + b as u64)) % 97) as f64 / 97.0))
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| 10.0 * x.get(0, 0) - 3.0).collect();
        let data = Dataset::from_raw(xs.clone(), vec![], &ys).unwrap();
        let mut hp = Hyperparams::for_sample_size(20).with_budgets(1, 2, 2);
        hp.n_starts = 1;
        hp.seed = seed;
        let model = fit(&data, &hp).unwrap();
        let (lo, hi) = model.scale.raw_range();
        for x in &xs {
            let p = predict(&model, x, &[]).unwrap();
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }
}
