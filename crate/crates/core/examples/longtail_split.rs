//! Long-tailed class sizes and a labeled/unlabeled/validation/test split,
//! written to disk as CSV.
//!
//!     cargo run --release --example longtail_split [OUT_DIR]

use std::path::PathBuf;

use propssl::ltdata::{longtail_counts, split_manifest, write_split};
use propssl::trainer::DataSource;
use propssl::SplitSpec;

fn main() -> propssl::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("out/longtail_split"), PathBuf::from);

    println!("(gamma, beta) grid with 4500 samples in the largest class:");
    for (gamma, beta) in [(10.0, 0.02), (20.0, 0.04), (50.0, 0.10), (100.0, 0.20)] {
        let spec = SplitSpec {
            classes: 10,
            largest_class: 4500,
            gamma,
            beta,
            val_per_class: 0,
            test_per_class: 0,
            seed: 0,
        };
        let sizes = longtail_counts(&spec)?;
        let labeled: Vec<usize> = sizes
            .as_slice()
            .iter()
            .map(|&n| propssl::ltdata::labeled_count(n, beta))
            .collect();
        println!("  ({gamma:>3}, {:>2}%) sizes {:?}", beta * 100.0, sizes.as_slice());
        println!("             labeled {labeled:?}");
    }

    let spec = SplitSpec {
        classes: 6,
        largest_class: 600,
        gamma: 10.0,
        beta: 0.04,
        val_per_class: 50,
        test_per_class: 200,
        seed: 1,
    };
    let split = DataSource::Synthetic { dim: 20, separation: 3.0 }.split(&spec, spec.seed)?;
    print!("\n{}", split_manifest(&split, &spec));
    for p in write_split(&out, &split, &spec)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
