use algtrend::backtest::score_positions;
use algtrend::forecast::{classify_position, confidence_band, taylor_extrapolate};
use algtrend::gbm::oscillation_probabilities;
use algtrend::kernel::{build_kernel_bank, EstimatorSpec};
use algtrend::moments::{moment_tracks, rolling_central_moment};
use algtrend::series::{read_prices, returns, write_prices, ColumnSpec, PriceSeries, ReturnKind};
use algtrend::trend::{oscillation_score, sliding_filter, sliding_trend, OscillationConfig};
use algtrend::{GbmParams, Position, Side};
use proptest::prelude::*;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + scale)
}

fn signal(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, min..max)
}

fn spec() -> impl Strategy<Value = EstimatorSpec> {
    (0usize..3, 0usize..12, 1usize..3)
        .prop_map(|(n, extra, k)| EstimatorSpec::new(n, n + 2 + extra).with_smoothing(k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_is_linear(spec in spec(), x in signal(40, 60), y in signal(40, 60), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        let bank = build_kernel_bank(&spec).unwrap();
        let combo: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        let fx = sliding_filter(x, &bank).unwrap();
        let fy = sliding_filter(y, &bank).unwrap();
        let fc = sliding_filter(&combo, &bank).unwrap();
        for order in 0..=spec.degree {
            for i in 0..fc[order].len() {
                let expect = a * fx[order][i] + b * fy[order][i];
                prop_assert!(close(fc[order][i], expect, expect.abs() + 600.0));
            }
        }
    }

    #[test]
    fn constant_shift_moves_trend_only(spec in spec(), x in signal(30, 50), c in -50.0..50.0f64) {
        let bank = build_kernel_bank(&spec).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let f = sliding_filter(&x, &bank).unwrap();
        let g = sliding_filter(&shifted, &bank).unwrap();
        for i in 0..f[0].len() {
            prop_assert!(close(g[0][i], f[0][i] + c, 200.0));
            for order in 1..=spec.degree {
                prop_assert!(close(g[order][i], f[order][i], 200.0));
            }
        }
    }

    #[test]
    fn sign_flip(x in signal(30, 50)) {
        let bank = build_kernel_bank(&EstimatorSpec::new(2, 11)).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let f = sliding_filter(&x, &bank).unwrap();
        let g = sliding_filter(&neg, &bank).unwrap();
        for order in 0..3 {
            for i in 0..f[order].len() {
                prop_assert_eq!(g[order][i], -f[order][i]);
            }
        }
    }

    #[test]
    fn moments_scale_with_amplitude(x in signal(30, 60), s in 0.1..10.0f64) {
        let y: Vec<f64> = x.iter().map(|v| s * v).collect();
        for k in 2..=4u32 {
            let a = rolling_central_moment(&x, k, 10).unwrap();
            let b = rolling_central_moment(&y, k, 10).unwrap();
            for (p, q) in a.iter().zip(&b) {
                let expect = s.powi(k as i32) * p;
                prop_assert!((q - expect).abs() <= 1e-9 * (expect.abs() + s.powi(k as i32) * 1e4_f64.powi(k as i32 / 2)));
            }
        }
    }

    #[test]
    fn kurtosis_at_least_skew_squared_plus_one(x in signal(20, 60)) {
        let t = moment_tracks(&x, 9).unwrap();
        for (s, k) in t.skew.iter().zip(&t.kurt) {
            if let (Some(s), Some(k)) = (s, k) {
                prop_assert!(*k >= s * s + 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn score_invariant_under_permutation(
        pairs in prop::collection::vec((0u8..3, any::<bool>()), 1..50),
        seed in any::<u64>(),
    ) {
        let pos = |c: u8| match c { 0 => Position::Above, 1 => Position::Under, _ => Position::NoDecision };
        let side = |b: bool| if b { Side::Above } else { Side::Under };
        let p: Vec<Position> = pairs.iter().map(|(c, _)| pos(*c)).collect();
        let r: Vec<Side> = pairs.iter().map(|(_, b)| side(*b)).collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut state = seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let pp: Vec<Position> = order.iter().map(|&i| p[i]).collect();
        let rr: Vec<Side> = order.iter().map(|&i| r[i]).collect();
        let a = score_positions(&p, &r).unwrap();
        let b = score_positions(&pp, &rr).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((a.exact_pct + a.nodecision_pct + a.wrong_pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn taylor_is_linear_in_state(
        s1 in prop::array::uniform3(-10.0..10.0f64),
        s2 in prop::array::uniform3(-10.0..10.0f64),
        h in 0.0..20.0f64,
    ) {
        let sum = taylor_extrapolate(s1[0] + s2[0], s1[1] + s2[1], s1[2] + s2[2], h);
        let parts = taylor_extrapolate(s1[0], s1[1], s1[2], h) + taylor_extrapolate(s2[0], s2[1], s2[2], h);
        prop_assert!(close(sum, parts, 4000.0));
        prop_assert_eq!(taylor_extrapolate(s1[0], s1[1], s1[2], 0.0), s1[0]);
    }

    #[test]
    fn band_symmetric_and_monotone(center in -1e3..1e3f64, std in 0.0..50.0f64, l1 in 0.5..0.98f64, dl in 0.001..0.019f64) {
        let (lo, hi) = confidence_band(center, std, l1).unwrap();
        prop_assert!(close(center - lo, hi - center, 1e3));
        let (lo2, hi2) = confidence_band(center, std, l1 + dl).unwrap();
        prop_assert!(lo2 <= lo && hi2 >= hi);
    }

    #[test]
    fn classify_antisymmetric(p in -100.0..100.0f64, t in -100.0..100.0f64, band in 0.0..5.0f64) {
        let a = classify_position(p, t, band);
        let b = classify_position(-p, -t, band);
        let flipped = match a {
            Position::Above => Position::Under,
            Position::Under => Position::Above,
            Position::NoDecision => Position::NoDecision,
        };
        prop_assert_eq!(b, flipped);
    }

    #[test]
    fn log_return_is_log_of_simple(x in prop::collection::vec(0.01..1e4f64, 2..40)) {
        let s = PriceSeries::new("x", x).unwrap();
        let simple = returns(&s, ReturnKind::Simple);
        let log = returns(&s, ReturnKind::Logarithmic);
        for (r, l) in simple.values.iter().zip(&log.values) {
            prop_assert!((l - r.ln_1p()).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn csv_round_trip(x in prop::collection::vec(1e-6..1e6f64, 2..30)) {
        let cols = ColumnSpec::default();
        let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        let dates = (0..x.len() as i64).map(|i| start + chrono::Duration::days(i)).collect();
        let s = PriceSeries::new("x", x).unwrap().with_dates(dates).unwrap();
        let mut buf = Vec::new();
        write_prices(&s, &mut buf, &cols).unwrap();
        let back = read_prices(buf.as_slice(), "x", &cols).unwrap();
        prop_assert_eq!(back.values(), s.values());
        prop_assert_eq!(back.dates(), s.dates());
        let mut again = Vec::new();
        write_prices(&back, &mut again, &cols).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn oscillation_score_ignores_sign(x in signal(20, 60)) {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let cfg = OscillationConfig::default();
        let full = oscillation_score(&centered, &cfg, None).unwrap();
        let negated: Vec<f64> = centered.iter().map(|v| -v).collect();
        prop_assert_eq!(full.score, oscillation_score(&negated, &cfg, None).unwrap().score);
    }
}

#[test]
fn identity_holds_bit_for_bit() {
    let x: Vec<f64> = (0..300)
        .map(|i| 50.0 + (i as f64 * 0.37).sin() * 3.0 + (i % 7) as f64 * 0.01)
        .collect();
    let s = PriceSeries::new("x", x).unwrap();
    let dec = sliding_trend(&s, &build_kernel_bank(&EstimatorSpec::default()).unwrap()).unwrap();
    for k in 0..dec.len() {
        assert_eq!(dec.trend()[k] + dec.fluctuation()[k], dec.price()[k]);
    }
}

#[test]
fn exceedance_probability_decreases_with_epsilon() {
    let p = GbmParams {
        steps: 200,
        paths: 2000,
        seed: 11,
        ..GbmParams::default()
    };
    let eps = [0.001, 0.01, 0.03, 0.05, 0.1, 0.2, 0.5];
    let stats = oscillation_probabilities(&p, &eps).unwrap();
    for w in stats.windows(2) {
        assert!(w[1].p_hat <= w[0].p_hat);
    }
}
