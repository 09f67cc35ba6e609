use curvature::atlas::{bias_safe_window, example1, example2, example3, example4, Example3Options};

#[test]
fn example1_dominated_by_cubic_tail() {
    for n in [10, 20] {
        let r = example1(n).unwrap().report;
        assert!(r.residuals.passed(), "{}", r.residuals);
        // Σ_{k=5}^{N} k² = N(N+1)(2N+1)/6 − 30
        let tail = (n * (n + 1) * (2 * n + 1)) as f64 / 6.0 - 30.0;
        assert!((r.tail_sum - tail).abs() < 1e-9 * tail);
        assert!(r.div1 > r.tail_sum);
    }
}

#[test]
fn example2_buy_and_hold_at_every_level() {
    for n in [6, 12, 24] {
        let r = example2(n, &[0.0, 1.0]).unwrap().report;
        assert!(r.residuals.passed(), "{}", r.residuals);
        assert!(r.div2[0].1 < 0.0 && r.div2[1].1 < r.div2[0].1);
    }
}

#[test]
fn example3_gap_is_level_stable() {
    let gaps: Vec<f64> = [14, 16, 20]
        .iter()
        .map(|&n| {
            let opts = Example3Options { window: Some(bias_safe_window(n)), points: 2 };
            example3(n, &opts).unwrap().report.gap
        })
        .collect();
    assert!(gaps.windows(2).all(|w| (w[1] - w[0]).abs() < 5e-3), "{gaps:?}");
}

#[test]
fn example4_law_is_calibrated() {
    let e = example4().unwrap();
    let mean: f64 = e.report.probs.iter().zip(&e.report.support).map(|(p, s)| p / s).sum();
    assert!((mean - 1.0).abs() < 1e-14);
    assert!(e.report.prob_zero > 0.0);
}
