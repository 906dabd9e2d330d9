//! One seed of the synthetic long-tailed task, with and without the
//! proportion loss.
//!
//!     cargo run --release --example train_fixmatch_prop [LAMBDA]

use propssl::trainer::{train, DataSource};
use propssl::{SplitSpec, TrainConfig};

fn main() -> propssl::Result<()> {
    let lambda: f64 = std::env::args().nth(1).map_or(1.0, |s| s.parse().expect("lambda is a number"));
    let spec = SplitSpec {
        classes: 6,
        largest_class: 600,
        gamma: 10.0,
        beta: 0.04,
        val_per_class: 50,
        test_per_class: 200,
        seed: 1,
    };
    let split = DataSource::Synthetic { dim: 20, separation: 3.0 }.split(&spec, 1)?;
    println!(
        "labeled {:?}, unlabeled {:?}",
        split.class_counts_labeled.as_slice(),
        split.class_counts_unlabeled().as_slice()
    );

    for lambda_prop in [0.0, lambda] {
        let cfg = TrainConfig {
            lambda_prop,
            seed: 1,
            ..TrainConfig::default()
        };
        let run = train(&split, &cfg)?;
        println!("\nlambda_prop = {lambda_prop}");
        println!("epoch  loss_sup  loss_cons  loss_prop  mask   val    test");
        for m in run.records.iter().step_by(10) {
            println!(
                "{:>5}  {:>8.4}  {:>9.4}  {:>9.4}  {:.3}  {:.3}  {:.3}",
                m.epoch,
                m.loss_sup,
                m.loss_cons,
                m.loss_prop,
                m.mask_rate,
                m.val_balanced_accuracy,
                m.balanced_test_accuracy
            );
        }
        let best = run.best_record();
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        println!(
            "best epoch {} test {:.4}\n  true unlabeled  [{}]\n  estimated       [{}]\n  pl recall       [{}]",
            run.best_epoch,
            run.test_accuracy_at_best,
            fmt(run.true_unlabeled_proportions.as_slice()),
            fmt(best.estimated_unlabeled_proportions.as_slice()),
            fmt(&best.pseudo_label_recall_per_class)
        );
    }
    Ok(())
}
