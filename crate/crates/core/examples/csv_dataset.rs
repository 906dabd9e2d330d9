//! Trains from a CSV file instead of the built-in generator. The file needs a
//! header, a 0-based integer `label` column and numeric feature columns.
//!
//!     cargo run --release --example csv_dataset

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use propssl::cli::ExperimentConfig;
use propssl::trainer::run_seeds;

fn main() -> propssl::Result<()> {
    // Three ring-shaped classes in two dimensions.
    let dir = std::env::temp_dir().join("propssl_csv_example");
    std::fs::create_dir_all(&dir).map_err(|e| propssl::Error::Data(e.to_string()))?;
    let path = dir.join("rings.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut text = String::from("id,x,y,label\n");
    for k in 0..3 {
        for i in 0..400 {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = 1.0 + k as f64 + rng.random_range(-0.3..0.3);
            let _ = writeln!(text, "{},{},{},{k}", k * 400 + i, r * angle.cos(), r * angle.sin());
        }
    }
    std::fs::write(&path, text).map_err(|e| propssl::Error::Data(e.to_string()))?;

    let cfg = ExperimentConfig::load(
        None,
        &[
            ("source".into(), "csv".into()),
            ("csv_path".into(), path.display().to_string()),
            ("feature_columns".into(), "x,y".into()),
            ("classes".into(), "3".into()),
            ("largest_class".into(), "300".into()),
            ("gamma".into(), "6".into()),
            ("beta".into(), "0.1".into()),
            ("val_per_class".into(), "30".into()),
            ("test_per_class".into(), "60".into()),
            ("epochs".into(), "20".into()),
            ("lambda_prop".into(), "1".into()),
        ],
    )?;
    let spec = cfg.split_for(cfg.cells()[0]);
    let sweep = run_seeds(&spec, &cfg.data_source()?, &cfg.train, &[1, 2])?;
    for s in &sweep.stats {
        println!("{:<18} {:.4} ± {:.4}", s.name, s.mean, s.std);
    }
    Ok(())
}
