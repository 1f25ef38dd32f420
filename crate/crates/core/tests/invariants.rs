use proptest::prelude::*;
use synthanom_core::activation::approx_sign;
use synthanom_core::data::{ClassTag, FeatureLayout, Normalizer, RawDataset, RawValue, Schema};
use synthanom_core::metrics::aupr;
use synthanom_core::problem::{example1_problem, example2_problem};
use synthanom_core::sampler::{resolve_count, sample_synthetic, CountPolicy};
use synthanom_core::theory::{convergence_cell, ExperimentGrid};

fn numeric_rows(rows: &[Vec<f64>]) -> RawDataset {
    let d = rows[0].len();
    RawDataset {
        schema: Schema::numeric(d),
        rows: rows.iter().map(|r| r.iter().map(|&v| RawValue::Numeric(Some(v))).collect()).collect(),
        tags: vec![ClassTag::Normal; rows.len()],
        subtypes: vec![None; rows.len()],
        source: "mem".into(),
    }
}

proptest! {
    #[test]
    fn regression_function_is_bounded_and_signs_the_bayes_rule(
        s in 0.01f64..0.99, st in 0.0f64..=1.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0,
    ) {
        for (p, pt) in [(example1_problem(s, st).unwrap(), vec![x]), (example2_problem(2, s, st).unwrap(), vec![x, y])] {
            let f = p.regression_function(&pt).unwrap();
            prop_assert!((-1.0..=1.0).contains(&f));
            prop_assert_eq!(p.bayes_classifier(&pt).sign(), if f >= 0.0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn approx_sign_stays_in_the_unit_band(x in -10.0f64..10.0, tau in 0.01f64..1.0, k in 1u32..5) {
        let v = approx_sign(x, tau, k).unwrap();
        prop_assert!((-1.0..=1.0).contains(&v));
    }

    #[test]
    fn aupr_depends_only_on_the_ranking(
        raw in prop::collection::vec((0i64..6, any::<bool>()), 2..40),
    ) {
        let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64).collect();
        let stretched: Vec<f64> = scores.iter().map(|v| v * v * v + 7.0 * v - 3.0).collect();
        let a = aupr(&scores, &labels).unwrap();
        prop_assert_eq!(a, aupr(&stretched, &labels).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn synthetic_rows_fill_the_unit_box(count in 0usize..200, seed in any::<u64>()) {
        let m = sample_synthetic(&FeatureLayout::numeric(3), count, seed);
        prop_assert_eq!(m.rows(), count);
        prop_assert!(m.iter_rows().flatten().all(|&v| (0.0..1.0).contains(&v)));
        prop_assert_eq!(m, sample_synthetic(&FeatureLayout::numeric(3), count, seed));
    }

    #[test]
    fn multiplier_counts_scale_the_real_sample(n in 0usize..1000, n_minus in 0usize..1000, m in 0.0f64..20.0) {
        let c = resolve_count(CountPolicy::Multiplier(m), n, n_minus).unwrap();
        prop_assert!((c as f64 - m * (n + n_minus) as f64).abs() <= 0.5 + 1e-9);
        prop_assert_eq!(resolve_count(CountPolicy::MatchReal, n, n_minus).unwrap(), n + n_minus);
    }

    #[test]
    fn normalizer_round_trips_training_rows(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2), 2..30),
    ) {
        let raw = numeric_rows(&rows);
        let norm = Normalizer::fit(&raw).unwrap();
        let data = norm.apply(&raw).unwrap();
        prop_assert!(data.features.iter_rows().flatten().all(|&v| (0.0..=1.0).contains(&v)));
        for (enc, orig) in data.features.iter_rows().zip(&rows) {
            for (back, want) in norm.decode_row(enc).iter().zip(orig) {
                let RawValue::Numeric(Some(v)) = back else { panic!("{back:?}") };
                prop_assert!((v - want).abs() <= 1e-9, "{} vs {}", v, want);
            }
        }
    }
}

#[test]
fn convergence_runs_reproduce_bit_for_bit() {
    let mut grid = ExperimentGrid::example1(vec![60], vec![4]);
    grid.train.max_epochs = 5;
    let a = convergence_cell(&grid, 60, 4).unwrap();
    let b = convergence_cell(&grid, 60, 4).unwrap();
    assert!(a.failure.is_none());
    assert_eq!(a.excess_risk.map(f64::to_bits), b.excess_risk.map(f64::to_bits));
    assert_eq!(a, b);
}
