//! Exact multivariate hypergeometric draws and the proportion targets they
//! produce.
//!
//!     cargo run --release --example hypergeom_sampling

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use propssl::hypergeom::{self, mean_and_covariance, population_from_proportions};
use propssl::trainer::proportion_target;
use propssl::{ClassCounts, ProportionVector};

fn main() -> propssl::Result<()> {
    let pop = ClassCounts::new(vec![2, 2]);
    println!("population {:?}, drawing 2:", pop.as_slice());
    for draw in [[0, 2], [1, 1], [2, 0]] {
        let p = hypergeom::pmf(&pop, &ClassCounts::new(draw.to_vec()))?;
        println!("  P({draw:?}) = {p:.6}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pop = ClassCounts::new(vec![500, 300, 150, 40, 10]);
    let n = 64;
    let (mean, cov) = mean_and_covariance(&pop, n)?;
    let draws = 20_000;
    let mut sums = vec![0.0; pop.num_classes()];
    for _ in 0..draws {
        for (s, c) in sums.iter_mut().zip(hypergeom::sample(&pop, n, &mut rng)?.as_slice()) {
            *s += *c as f64;
        }
    }
    println!("\npopulation {:?}, n = {n}, {draws} draws", pop.as_slice());
    println!("class  exact mean  empirical  exact sd");
    for k in 0..pop.num_classes() {
        println!("{k:>5}  {:>10.3}  {:>9.3}  {:>8.3}", mean[k], sums[k] / draws as f64, cov[k][k].sqrt());
    }

    // The training loop perturbs the labeled proportions this way once per
    // iteration.
    let q_hat = ProportionVector::new(vec![0.55, 0.25, 0.12, 0.05, 0.03])?;
    let pool = population_from_proportions(&q_hat, 1000);
    println!("\nq_hat {:?} -> pool of 1000 {:?}", q_hat.as_slice(), pool.as_slice());
    for _ in 0..4 {
        let t = proportion_target(&q_hat, 1000, 112, true, &mut rng)?;
        let shown: Vec<String> = t.as_slice().iter().map(|p| format!("{p:.3}")).collect();
        println!("  perturbed target [{}]", shown.join(", "));
    }
    Ok(())
}
