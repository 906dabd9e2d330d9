//! Trains baseline and regularized variants through the command layer and
//! renders the deviation, recall and accuracy charts.
//!
//!     cargo run --release --example report_charts [OUT_DIR]

use std::path::PathBuf;

use propssl::cli::{cmd_report, cmd_train, ExperimentConfig};

const CONFIG: &str = "
[split]
gamma = 20
beta = 0.04

[train]
epochs = 30
lambda_prop = 1

[sweep]
seeds = 1,2,3
variants = baseline,prop
";

fn main() -> propssl::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/report_charts"), PathBuf::from);
    let mut cfg = ExperimentConfig::parse(CONFIG, "example")?;
    cfg.out = out.join("runs");
    cfg.validate()?;
    for e in cmd_train(&cfg)? {
        println!("{:<9} test {:.4} ± {:.4}", e.variant.name(), e.test_mean, e.test_std);
    }
    let cell = cfg.out.join(cfg.cells()[0].name());
    let report = out.join("report");
    cmd_report(&[cell.join("baseline"), cell.join("prop")], &report)?;
    let mut files: Vec<_> = std::fs::read_dir(&report)
        .map_err(|e| propssl::Error::Data(e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    files.sort();
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
