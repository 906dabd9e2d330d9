//! Tunes the proportion-loss weight on validation accuracy over several
//! seeds and reports test accuracy for the chosen weight only.
//!
//!     cargo run --release --example lambda_sweep

use propssl::trainer::{run_splits, sweep_lambdas, DataSource};
use propssl::{SplitSpec, TrainConfig};

fn main() -> propssl::Result<()> {
    let spec = SplitSpec {
        classes: 6,
        largest_class: 600,
        gamma: 10.0,
        beta: 0.04,
        val_per_class: 50,
        test_per_class: 200,
        seed: 0,
    };
    let source = DataSource::Synthetic { dim: 20, separation: 3.0 };
    let splits = [1u64, 2, 3]
        .iter()
        .map(|&s| Ok((s, source.split(&spec, s)?)))
        .collect::<propssl::Result<Vec<_>>>()?;
    let cfg = TrainConfig::default();

    let baseline = run_splits(&splits, &TrainConfig { lambda_prop: 0.0, ..cfg.clone() })?;
    let tuned = sweep_lambdas(&splits, &cfg, &[0.25, 0.5, 1.0])?;
    for (l, s) in tuned.lambdas.iter().zip(&tuned.sweeps) {
        let v = s.stat("val_bal_acc").unwrap();
        println!("lambda {l:<5} val {:.4} ± {:.4}", v.mean, v.std);
    }
    let show = |name: &str, s: &propssl::trainer::SeedSweep| {
        let t = s.stat("test_bal_acc").unwrap();
        let d = s.stat("prop_l1_dev").unwrap();
        println!("{name:<22} test {:.4} ± {:.4}  proportion L1 {:.4}", t.mean, t.std, d.mean);
    };
    show("baseline", &baseline);
    show(&format!("lambda* = {}", tuned.lambda_star()), tuned.selected_sweep());
    Ok(())
}
