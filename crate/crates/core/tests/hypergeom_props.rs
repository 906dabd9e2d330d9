use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use propssl::hypergeom::{self, mean_and_covariance, population_from_proportions, ClassCounts};
use propssl::ProportionVector;

fn population() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..40, 1..6).prop_filter("non-empty", |v| v.iter().sum::<usize>() > 0)
}

proptest! {
    #[test]
    fn draws_respect_population(pop in population(), frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let pop = ClassCounts::new(pop);
        let n = (frac * pop.total() as f64).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = hypergeom::sample(&pop, n, &mut rng).unwrap();
        prop_assert_eq!(d.total(), n);
        for (x, p) in d.as_slice().iter().zip(pop.as_slice()) {
            prop_assert!(x <= p);
        }
        prop_assert!(hypergeom::pmf(&pop, &d).unwrap() > 0.0);
    }

    #[test]
    fn rounding_preserves_size(w in prop::collection::vec(0.0f64..1.0, 1..8), size in 0usize..500) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let q = ProportionVector::from_weights(&w).unwrap();
        let pop = population_from_proportions(&q, size);
        prop_assert_eq!(pop.total(), size);
        for (c, p) in pop.as_slice().iter().zip(q.as_slice()) {
            prop_assert!((*c as f64 - p * size as f64).abs() < 1.0);
        }
    }

    #[test]
    fn covariance_rows_sum_to_zero(pop in population(), frac in 0.0f64..=1.0) {
        let pop = ClassCounts::new(pop);
        let n = (frac * pop.total() as f64).floor() as usize;
        let (mean, cov) = mean_and_covariance(&pop, n).unwrap();
        prop_assert!((mean.iter().sum::<f64>() - n as f64).abs() < 1e-9);
        for row in &cov {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}

#[test]
fn full_draw_returns_population() {
    let pop = ClassCounts::new(vec![3, 0, 5, 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        assert_eq!(hypergeom::sample(&pop, 9, &mut rng).unwrap(), pop);
    }
}

#[test]
fn oversized_draw_is_rejected() {
    let pop = ClassCounts::new(vec![1, 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(hypergeom::sample(&pop, 3, &mut rng).is_err());
}

#[test]
fn two_class_pmf_matches_closed_form() {
    // C(a,x) C(b,n-x) / C(a+b,n) by direct integer arithmetic.
    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }
    let (a, b, n) = (7u64, 5u64, 6u64);
    let pop = ClassCounts::new(vec![a as usize, b as usize]);
    for x in 1..=n {
        let want = choose(a, x) * choose(b, n - x) / choose(a + b, n);
        let got = hypergeom::pmf(&pop, &ClassCounts::new(vec![x as usize, (n - x) as usize])).unwrap();
        assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
    }
}

#[test]
fn sample_mean_within_four_standard_errors() {
    let pop = ClassCounts::new(vec![500, 300, 150, 40, 10]);
    let n = 112;
    let (mean, cov) = mean_and_covariance(&pop, n).unwrap();
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sums = vec![0.0; pop.num_classes()];
    for _ in 0..draws {
        let d = hypergeom::sample(&pop, n, &mut rng).unwrap();
        for (s, &c) in sums.iter_mut().zip(d.as_slice()) {
            *s += c as f64;
        }
    }
    for k in 0..pop.num_classes() {
        let m = sums[k] / draws as f64;
        let se = (cov[k][k] / draws as f64).sqrt();
        assert!((m - mean[k]).abs() < 4.0 * se, "class {k}: {m} vs {} (se {se})", mean[k]);
    }
}
