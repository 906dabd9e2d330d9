//! Analytic logit gradients of the three losses against central finite
//! differences.
//!
//!     cargo run --example gradient_check

use propssl::losses::{consistency_loss, proportion_loss, supervised_ce, Branch, LossOutput};
use propssl::{Matrix, ProportionVector};

fn numeric(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..x.as_slice().len())
        .map(|i| {
            let mut up = x.clone();
            up.as_mut_slice()[i] += h;
            let mut down = x.clone();
            down.as_mut_slice()[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

fn report(name: &str, out: &LossOutput, branch: Branch, num: &[f64]) {
    let ana = out.grads.get(branch).expect("loss touches branch").as_slice();
    let max = ana.iter().zip(num).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    println!("{name:<12} loss {:>8.5}  max |analytic - numeric| {max:.2e}", out.value);
}

fn main() -> propssl::Result<()> {
    let logits = Matrix::from_rows(
        &[[2.0, 0.5, -1.0], [0.1, 0.2, 0.3], [-0.7, 1.5, 0.0], [4.0, -2.0, 1.0]],
        3,
    );
    let q = ProportionVector::new(vec![0.5, 0.3, 0.2])?;
    let out = proportion_loss(&logits, &q, 1e-8)?;
    report("proportion", &out, Branch::Weak, &numeric(&logits, |x| proportion_loss(x, &q, 1e-8).unwrap().value));

    let y = [0, 2, 1, 0];
    let out = supervised_ce(&logits, &y)?;
    report("supervised", &out, Branch::Labeled, &numeric(&logits, |x| supervised_ce(x, &y).unwrap().value));

    let weak = Matrix::from_rows(&[[5.0, 0.0, 0.0], [0.0, 0.0, 0.1], [0.0, 6.0, 0.0], [0.0, 0.0, 4.0]], 3);
    let out = consistency_loss(&weak, &logits, 0.9)?;
    report(
        "consistency",
        &out,
        Branch::Strong,
        &numeric(&logits, |x| consistency_loss(&weak, x, 0.9).unwrap().value),
    );
    println!("mask rate {:?}", out.aux.mask_rate);
    Ok(())
}
