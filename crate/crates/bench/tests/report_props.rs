use mfd_bench::report::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn order_recovers_power_laws(
        c in 1e-3f64..1e3,
        q in 0.5f64..4.0,
        hs in prop::collection::vec(1e-3f64..1.0, 3..8),
    ) {
        prop_assume!(hs.iter().any(|h| (h / hs[0] - 1.0).abs() > 1e-3));
        let err: Vec<f64> = hs.iter().map(|h| c * h.powf(q)).collect();
        let o = fit_order(&hs, &err).unwrap();
        prop_assert!((o - q).abs() < 1e-8);
    }

    #[test]
    fn fewer_than_three_resolutions_give_no_order(hs in prop::collection::vec(1e-3f64..1.0, 0..3)) {
        let err: Vec<f64> = hs.iter().map(|h| h * h).collect();
        prop_assert_eq!(fit_order(&hs, &err), None);
    }

    #[test]
    fn report_orders_need_three_records(n in 0usize..6) {
        let mut rep = BenchReport::new("t", 0, serde_json::json!({}));
        for k in 0..n {
            let h = 0.5f64.powi(k as i32);
            rep.records.push(RunRecord { method: "M".into(), h, max_error: Some(h * h), ..RunRecord::default() });
        }
        rep.fit_orders();
        prop_assert_eq!(rep.orders.contains_key("M"), n >= 3);
    }
}
