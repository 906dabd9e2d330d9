//! Plain-text model checkpoints.
//!
//! ```text
//! propssl-checkpoint v1
//! layers=20,64,6
//! seed=1
//! step=3000
//! tensor w1 64 20
//! <one matrix row per line, space separated>
//! tensor b1 1 64
//! ...
//! tensor momentum.w1 64 20
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip `f64` formatting, so a checkpoint
//! reloads bit-exactly and identical parameters always produce identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{LayerSizes, ModelParams, Tensors};

const MAGIC: &str = "propssl-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
    pub step: usize,
}

fn write_tensors(out: &mut String, prefix: &str, t: &Tensors) {
    let shapes = [
        (t.w1.rows(), t.w1.cols()),
        (1, t.b1.len()),
        (t.w2.rows(), t.w2.cols()),
        (1, t.b2.len()),
    ];
    for ((name, values), (rows, cols)) in t.views().into_iter().zip(shapes) {
        let _ = writeln!(out, "tensor {prefix}{name} {rows} {cols}");
        for r in 0..rows {
            let line: Vec<String> = values[r * cols..(r + 1) * cols].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
}

pub fn to_string(ckpt: &Checkpoint) -> String {
    let s = ckpt.params.sizes;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "layers={},{},{}", s.input, s.hidden, s.classes);
    let _ = writeln!(out, "seed={}", ckpt.seed);
    let _ = writeln!(out, "step={}", ckpt.step);
    write_tensors(&mut out, "", &ckpt.params.weights);
    write_tensors(&mut out, "momentum.", &ckpt.params.momentum);
    out
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, to_string(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|(line, message)| Error::Ingest {
        path: path.to_path_buf(),
        line,
        message,
    })
}

/// Parses checkpoint text. Errors carry a 1-based line number.
pub fn parse(text: &str) -> std::result::Result<Checkpoint, (u64, String)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let mut next = |what: &str| lines.next().ok_or((0, format!("unexpected end of file, expected {what}")));

    let (n, magic) = next("header")?;
    if magic != MAGIC {
        return Err((n, format!("bad header `{magic}`")));
    }
    let mut field = |key: &str| -> std::result::Result<(u64, String), (u64, String)> {
        let (n, line) = next(key)?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(|v| (n, v.to_string()))
            .ok_or((n, format!("expected `{key}=`")))
    };
    let (n, layers) = field("layers")?;
    let dims: Vec<usize> = layers
        .split(',')
        .map(|d| d.parse().map_err(|_| (n, format!("bad layer size `{d}`"))))
        .collect::<std::result::Result<_, _>>()?;
    let [input, hidden, classes] = dims[..] else {
        return Err((n, "expected three layer sizes".into()));
    };
    let (n, seed) = field("seed")?;
    let seed = seed.parse().map_err(|_| (n, "bad seed".to_string()))?;
    let (n, step) = field("step")?;
    let step = step.parse().map_err(|_| (n, "bad step".to_string()))?;

    let sizes = LayerSizes { input, hidden, classes };
    let mut params = ModelParams::zeros(sizes);
    for prefix in ["", "momentum."] {
        let target = if prefix.is_empty() {
            &mut params.weights
        } else {
            &mut params.momentum
        };
        for (name, values) in target.views_mut() {
            let (n, header) = next("tensor header")?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            let expected = format!("{prefix}{name}");
            if parts.len() != 4 || parts[0] != "tensor" || parts[1] != expected {
                return Err((n, format!("expected `tensor {expected} <rows> <cols>`")));
            }
            let rows: usize = parts[2].parse().map_err(|_| (n, "bad row count".to_string()))?;
            let cols: usize = parts[3].parse().map_err(|_| (n, "bad column count".to_string()))?;
            if rows * cols != values.len() {
                return Err((n, format!("tensor {expected} is {rows}x{cols}, layers imply {} values", values.len())));
            }
            for r in 0..rows {
                let (n, line) = next("tensor row")?;
                let row: Vec<f64> = line
                    .split_whitespace()
                    .map(|v| v.parse().map_err(|_| (n, format!("bad value `{v}`"))))
                    .collect::<std::result::Result<_, _>>()?;
                if row.len() != cols {
                    return Err((n, format!("expected {cols} values, found {}", row.len())));
                }
                values[r * cols..(r + 1) * cols].copy_from_slice(&row);
            }
        }
    }
    Ok(Checkpoint { params, seed, step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trips_bit_exactly() {
        let sizes = LayerSizes { input: 3, hidden: 5, classes: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut params = ModelParams::init(sizes, &mut rng);
        params.momentum.b2 = vec![1e-300, -0.1, 3.0, f64::MIN_POSITIVE];
        let ckpt = Checkpoint { params, seed: 8, step: 42 };
        let text = to_string(&ckpt);
        assert_eq!(parse(&text).unwrap(), ckpt);
        assert_eq!(to_string(&parse(&text).unwrap()), text);
    }

    #[test]
    fn truncated_file_reports_line() {
        let sizes = LayerSizes { input: 2, hidden: 2, classes: 2 };
        let ckpt = Checkpoint { params: ModelParams::zeros(sizes), seed: 0, step: 0 };
        let text = to_string(&ckpt);
        let cut: String = text.lines().take(6).collect::<Vec<_>>().join("\n");
        assert!(parse(&cut).is_err());
        let bad = text.replacen("tensor b1", "tensor bx", 1);
        let (line, _) = parse(&bad).unwrap_err();
        assert_eq!(line, 8);
    }
}
