use emgtorque::activation::{activate, ActivationParams};
use emgtorque::data::manifest::ForearmLever;
use emgtorque::data::{BodyParameters, Condition, Movement};
use emgtorque::eval::filters::savgol_filter;
use emgtorque::eval::metrics::{pearson, r2, rmse};
use emgtorque::eval::MeanStd;
use emgtorque::features::WindowPlan;
use emgtorque::nn::bundle::Bundle;
use emgtorque::post::{split, stack_history, Pca, SplitSpec};
use emgtorque::preprocess::filter::Sos;
use emgtorque::preprocess::variance::RunningVariance;
use emgtorque::torque::{pose_torque, AnthropometricTable, MinMaxScaler};
use ndarray::{Array2, ArrayD, IxDyn};
use proptest::prelude::*;

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, len)
}

fn simplex() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        (a, b - a, 1.0 - b)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn running_variance_matches_exact_window(x in series(60..400), w in 2usize..40) {
        let mut rv = RunningVariance::new(w).unwrap();
        for (t, &v) in x.iter().enumerate() {
            let got = rv.update(v);
            if t + 1 >= w {
                let win = &x[t + 1 - w..=t];
                let mean = win.iter().sum::<f64>() / w as f64;
                let exact = win.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (w - 1) as f64;
                prop_assert!((got - exact).abs() <= 1e-9 * exact.max(1e-6), "t {t}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn activation_stays_in_unit_interval(
        (a, b1, b2) in simplex(),
        d in 0usize..30,
        e in prop::collection::vec(0.0..=1.0f64, 1..300),
    ) {
        let p = ActivationParams::new(a, b1, b2, d).unwrap();
        for v in activate(&e, &p).unwrap() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn activation_is_linear_in_its_input(
        (a, b1, b2) in simplex(),
        d in 0usize..10,
        e in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..200),
        s in 0.0..=1.0f64,
    ) {
        let p = ActivationParams::new(a, b1, b2, d).unwrap();
        let (e1, e2): (Vec<f64>, Vec<f64>) = e.into_iter().unzip();
        let mix: Vec<f64> = e1.iter().zip(&e2).map(|(u, v)| s * u + (1.0 - s) * v).collect();
        let (p1, p2, pm) = (activate(&e1, &p).unwrap(), activate(&e2, &p).unwrap(), activate(&mix, &p).unwrap());
        for t in 0..pm.len() {
            prop_assert!((pm[t] - (s * p1[t] + (1.0 - s) * p2[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_activation_params_rejected(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.05..1.0f64) {
        prop_assert!(ActivationParams::new(a, b, 1.0 - a - b + c, 0).is_err());
        prop_assert!(ActivationParams::new(-c, 0.5, 0.5 + c, 0).is_err());
    }

    #[test]
    fn window_plan_formula(n in 1usize..5000, w in 1usize..200) {
        let hop = (w / 2).max(1);
        match WindowPlan::new(n, w, hop) {
            Ok(plan) => {
                prop_assert!(n >= w);
                prop_assert_eq!(plan.n_windows, (n - w) / hop + 1);
                prop_assert!(plan.start(plan.n_windows - 1) + w <= n);
                prop_assert!(plan.start(plan.n_windows) + w > n);
            }
            Err(_) => prop_assert!(n < w),
        }
    }

    #[test]
    fn bandpass_edges_validated(lo in -10.0..300.0f64, hi in -10.0..300.0f64, order in 0usize..9) {
        let legal = lo > 0.0 && lo < hi && hi < 250.0 && order >= 2 && order % 2 == 0;
        prop_assert_eq!(Sos::bandpass(order, lo, hi, 500.0).is_ok(), legal);
    }

    #[test]
    fn pca_components_orthonormal(rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 8..40)) {
        let x = Array2::from_shape_fn((rows.len(), 6), |(i, j)| rows[i][j] * (1.0 + j as f64));
        let Ok(pca) = Pca::fit(x.view(), 0.95) else { return Ok(()) };
        let gram = pca.components.dot(&pca.components.t());
        for i in 0..pca.k() {
            for j in 0..pca.k() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[[i, j]] - want).abs() < 1e-8);
            }
        }
        prop_assert!(pca.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(pca.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn history_never_crosses_groups(lens in prop::collection::vec(1usize..12, 1..6), depth in 0usize..5) {
        let groups: Vec<usize> = lens.iter().enumerate().flat_map(|(g, &n)| std::iter::repeat_n(g, n)).collect();
        let n = groups.len();
        // column 0 carries the group id so every stacked copy reveals its source group
        let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { groups[i] as f64 } else { i as f64 });
        let out = stack_history(x.view(), &groups, depth).unwrap();
        prop_assert_eq!(out.ncols(), 2 * (depth + 1));
        for t in 0..n {
            for h in 0..=depth {
                prop_assert_eq!(out[[t, 2 * h]], groups[t] as f64);
                prop_assert!(out[[t, 2 * h + 1]] <= t as f64);
            }
            prop_assert_eq!(out[[t, 2 * depth + 1]], t as f64);
        }
    }

    #[test]
    fn split_is_stratified_and_disjoint(counts in prop::collection::vec(20usize..200, 1..6)) {
        let conds: Vec<Condition> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| {
                let c = Condition::new(i as f64 * 0.5, Movement::ALL[i % 2]).unwrap();
                std::iter::repeat_n(c, n)
            })
            .collect();
        let s = split(&conds, &SplitSpec::default()).unwrap();
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), conds.len());
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), conds.len());
        for c in conds.iter().collect::<std::collections::BTreeSet<_>>() {
            let has = |idx: &[usize]| idx.iter().any(|&i| conds[i] == *c);
            prop_assert!(has(&s.train) && has(&s.val) && has(&s.test));
        }
    }

    #[test]
    fn torque_projection_and_affine_mass(
        ts in 0.0..std::f64::consts::FRAC_PI_2,
        rel in 0.0..std::f64::consts::FRAC_PI_2,
        m1 in 0.0..5.0f64,
        m2 in 0.0..5.0f64,
    ) {
        let body = BodyParameters::default();
        let table = AnthropometricTable::MALE;
        let te = ts + rel;
        let a = pose_torque(ts, te, &body, &table, m1, ForearmLever::AsPrinted);
        let b = pose_torque(ts, te, &body, &table, m2, ForearmLever::AsPrinted);
        let mid = pose_torque(ts, te, &body, &table, 0.5 * (m1 + m2), ForearmLever::AsPrinted);
        prop_assert!((a.front.powi(2) + a.side.powi(2) - a.shoulder.powi(2)).abs() < 1e-9);
        prop_assert!((mid.elbow - 0.5 * (a.elbow + b.elbow)).abs() < 1e-9);
        prop_assert!((mid.shoulder - 0.5 * (a.shoulder + b.shoulder)).abs() < 1e-9);
    }

    #[test]
    fn scaler_maps_into_unit_box_and_inverts(rows in prop::collection::vec((-50.0..50.0f64, -1.0..1.0f64, 3.0..3.0001f64), 1..60)) {
        let y = Array2::from_shape_fn((rows.len(), 3), |(i, j)| match j { 0 => rows[i].0, 1 => rows[i].1, _ => rows[i].2 });
        let s = MinMaxScaler::fit(&y).unwrap();
        let z = s.transform(&y);
        prop_assert!(z.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
        let back = s.inverse(&z);
        for (u, v) in back.iter().zip(&y) {
            prop_assert!((u - v).abs() < 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn metrics_bounded_and_two_pass(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..200)) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let n = t.len() as f64;
        let mt = t.iter().sum::<f64>() / n;
        let ss_tot: f64 = t.iter().map(|v| (v - mt).powi(2)).sum();
        prop_assume!(ss_tot > 1e-9);
        let ss_res: f64 = p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!((rmse(&p, &t).unwrap() - (ss_res / n).sqrt()).abs() < 1e-12);
        let r = r2(&p, &t).unwrap();
        prop_assert!(r <= 1.0);
        prop_assert!((r - (1.0 - ss_res / ss_tot)).abs() < 1e-12);
        if let Ok(rho) = pearson(&p, &t) {
            prop_assert!((-1.0..=1.0).contains(&rho));
        }
        let ms = MeanStd::of(&p);
        prop_assert!(ms.std >= 0.0);
    }

    #[test]
    fn savgol_keeps_quadratics(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -1.0..1.0f64, n in 21usize..150) {
        let x: Vec<f64> = (0..n).map(|i| { let u = i as f64 / 10.0; a + b * u + c * u * u }).collect();
        for (u, v) in savgol_filter(&x, 21, 2).iter().zip(&x) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn bundle_round_trips_bit_identically(
        vals in prop::collection::vec(prop::num::f64::ANY, 0..50),
        text in "[ -~]{0,40}",
    ) {
        let mut b = Bundle::new();
        b.put_text("note", text.clone());
        b.put_vec("v", &vals);
        b.put_tensor("t", ArrayD::from_shape_vec(IxDyn(&[vals.len(), 1]), vals.clone()).unwrap());
        let bytes = b.to_bytes();
        let back = Bundle::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.text("note").unwrap(), text.as_str());
        let got = back.vec("v").unwrap();
        prop_assert!(got.iter().zip(&vals).all(|(u, v)| u.to_bits() == v.to_bits()));
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
