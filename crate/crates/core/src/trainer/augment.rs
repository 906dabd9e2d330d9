//! Noise-model augmentations for feature vectors.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;

/// Adds i.i.d. `N(0, sigma²)` noise to every feature.
pub fn augment_weak<R: Rng + ?Sized>(batch: &Matrix, sigma: f64, rng: &mut R) -> Matrix {
    let mut out = batch.clone();
    if sigma > 0.0 {
        for x in out.as_mut_slice() {
            *x += sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// Gaussian noise followed by independent per-feature zeroing with
/// probability `dropout_rate`.
pub fn augment_strong<R: Rng + ?Sized>(batch: &Matrix, sigma: f64, dropout_rate: f64, rng: &mut R) -> Matrix {
    let mut out = augment_weak(batch, sigma, rng);
    if dropout_rate > 0.0 {
        for x in out.as_mut_slice() {
            if rng.random::<f64>() < dropout_rate {
                *x = 0.0;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, vec![1.0; rows * cols])
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = ones(3, 4);
        assert_eq!(augment_weak(&x, 0.0, &mut rng), x);
        assert_eq!(augment_strong(&x, 0.0, 0.0, &mut rng), x);
    }

    #[test]
    fn fixed_seed_reproduces_noise() {
        let x = ones(2, 5);
        let a = augment_weak(&x, 0.3, &mut ChaCha8Rng::seed_from_u64(4));
        let b = augment_weak(&x, 0.3, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn weak_perturbation_norm_matches_chi_mean() {
        // E‖ε‖ for ε ~ N(0, σ² I_100) is σ·√2·Γ(50.5)/Γ(50) ≈ 0.9975 at σ = 0.1.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Matrix::zeros(2000, 100);
        let y = augment_weak(&x, 0.1, &mut rng);
        let mean_norm = y.iter_rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / 2000.0;
        // Per-sample std of the norm is about σ/√2 ≈ 0.0707; 4 standard errors ≈ 0.0063.
        assert!((mean_norm - 0.9975).abs() < 0.0063, "{mean_norm}");
    }

    #[test]
    fn half_dropout_zeroes_about_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = ones(10, 1000);
        let y = augment_strong(&x, 0.0, 0.5, &mut rng);
        let zeros = y.as_slice().iter().filter(|v| **v == 0.0).count() as f64;
        // Binomial(10000, 0.5): sd = 50.
        assert!((zeros - 5000.0).abs() < 200.0, "{zeros}");
    }

    #[test]
    fn strong_differs_from_weak() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ones(4, 8);
        let w = augment_weak(&x, 0.1, &mut rng);
        let s = augment_strong(&x, 0.1, 0.2, &mut rng);
        assert_ne!(w, s);
    }
}
