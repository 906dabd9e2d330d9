//! Charts and tables from finished run directories.
//!
//! A run directory is a variant directory written by `train` or `sweep`
//! (holding `seed_<s>/` subdirectories, or `selected.txt` pointing at the
//! chosen `lambda_<λ>/`), or a single seed directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trainer::metrics::{read_metrics_csv, KeyValues, MetricsRow};
use crate::trainer::MetricStat;

use super::svg::{self, Series};

/// One seed of a method, as read back from disk.
#[derive(Debug, Clone)]
pub struct SeedRecord {
    pub seed_dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    /// Row index of the best epoch in `rows`.
    pub best_row: usize,
    pub true_prop: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Method {
    pub label: String,
    pub seeds: Vec<SeedRecord>,
}

impl Method {
    pub fn num_classes(&self) -> usize {
        self.seeds[0].true_prop.len()
    }

    /// Mean signed deviation per class at each seed's best epoch.
    pub fn deviation(&self) -> Vec<MetricStat> {
        (0..self.num_classes())
            .map(|k| {
                let v: Vec<f64> = self
                    .seeds
                    .iter()
                    .map(|s| s.rows[s.best_row].est_prop[k] - s.true_prop[k])
                    .collect();
                MetricStat::from_values(&k.to_string(), &v)
            })
            .collect()
    }

    /// Seed-mean pseudo-label recall of `class` per epoch, over epochs all
    /// seeds share.
    pub fn recall_curve(&self, class: usize) -> Vec<(f64, f64)> {
        let epochs = self.seeds.iter().map(|s| s.rows.len()).min().unwrap_or(0);
        (0..epochs)
            .map(|e| {
                let v: Vec<f64> = self.seeds.iter().map(|s| s.rows[e].pl_recall[class]).collect();
                (self.seeds[0].rows[e].epoch as f64, MetricStat::from_values("", &v).mean)
            })
            .collect()
    }

    pub fn accuracy(&self) -> (MetricStat, MetricStat) {
        let test: Vec<f64> = self.seeds.iter().map(|s| s.rows[s.best_row].test_bal_acc).collect();
        let val: Vec<f64> = self.seeds.iter().map(|s| s.rows[s.best_row].val_bal_acc).collect();
        (
            MetricStat::from_values("test_bal_acc", &test),
            MetricStat::from_values("val_bal_acc", &val),
        )
    }
}

fn ingest(path: &Path, message: String) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        line: 0,
        message,
    }
}

fn summary_key<'a>(kv: &'a KeyValues, path: &Path, key: &str) -> Result<&'a str> {
    kv.get(key).ok_or_else(|| ingest(path, format!("missing key `{key}`")))
}

fn load_seed(dir: &Path) -> Result<SeedRecord> {
    let metrics = dir.join("metrics.csv");
    if !metrics.is_file() {
        return Err(ingest(&metrics, "file not found".into()));
    }
    let rows = read_metrics_csv(&metrics)?;
    let summary_path = dir.join("summary.txt");
    if !summary_path.is_file() {
        return Err(ingest(&summary_path, "file not found".into()));
    }
    let kv = KeyValues::read(&summary_path)?;
    let best_epoch: usize = summary_key(&kv, &summary_path, "best_epoch")?
        .parse()
        .map_err(|_| ingest(&summary_path, "key `best_epoch` is not an integer".into()))?;
    summary_key(&kv, &summary_path, "true_prop")?;
    let true_prop = kv
        .get_list("true_prop")
        .ok_or_else(|| ingest(&summary_path, "key `true_prop` is not a number list".into()))?;
    let pos = rows
        .iter()
        .position(|r| r.epoch == best_epoch)
        .ok_or_else(|| ingest(&metrics, format!("column `epoch` has no row for best epoch {best_epoch}")))?;
    let classes = rows.first().map_or(0, |r| r.est_prop.len());
    if classes != true_prop.len() {
        return Err(ingest(
            &metrics,
            format!(
                "columns `est_prop_*` give {classes} classes but summary `true_prop` has {}",
                true_prop.len()
            ),
        ));
    }
    Ok(SeedRecord {
        seed_dir: dir.to_path_buf(),
        rows,
        best_row: pos,
        true_prop,
    })
}

fn seed_number(p: &Path) -> Option<u64> {
    p.file_name()?.to_str()?.strip_prefix("seed_")?.parse().ok()
}

/// Loads every seed of a run directory.
pub fn load_method(dir: &Path) -> Result<Vec<SeedRecord>> {
    if !dir.is_dir() {
        return Err(ingest(dir, "run directory not found".into()));
    }
    let selected = dir.join("selected.txt");
    if selected.is_file() {
        let kv = KeyValues::read(&selected)?;
        let sub = summary_key(&kv, &selected, "selected_dir")?;
        return load_method(&dir.join(sub));
    }
    if dir.join("metrics.csv").is_file() {
        return Ok(vec![load_seed(dir)?]);
    }
    let mut seeds: Vec<(u64, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| seed_number(&p).map(|s| (s, p)))
        .collect();
    seeds.sort();
    if seeds.is_empty() {
        return Err(ingest(dir, "no metrics.csv and no seed_* directories".into()));
    }
    seeds.iter().map(|(_, p)| load_seed(p)).collect()
}

fn labels(dirs: &[PathBuf]) -> Vec<String> {
    let tail = |p: &Path, n: usize| {
        let parts: Vec<String> = p
            .components()
            .rev()
            .take(n)
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        parts.into_iter().rev().collect::<Vec<_>>().join("/")
    };
    let short: Vec<String> = dirs.iter().map(|d| tail(d, 1)).collect();
    short
        .iter()
        .zip(dirs)
        .map(|(s, d)| {
            if short.iter().filter(|o| *o == s).count() > 1 {
                tail(d, 2)
            } else {
                s.clone()
            }
        })
        .collect()
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes deviation bars, recall curves and the accuracy table for `run_dirs`.
pub fn cmd_report(run_dirs: &[PathBuf], out: &Path) -> Result<Vec<Method>> {
    if run_dirs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let methods = labels(run_dirs)
        .into_iter()
        .zip(run_dirs)
        .map(|(label, d)| Ok(Method { label, seeds: load_method(d)? }))
        .collect::<Result<Vec<_>>>()?;
    let k = methods[0].num_classes();
    if let Some(m) = methods.iter().find(|m| m.num_classes() != k) {
        return Err(ingest(
            &m.seeds[0].seed_dir.join("metrics.csv"),
            format!("columns `est_prop_*` give {} classes, expected {k}", m.num_classes()),
        ));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut dev_rows = Vec::new();
    for m in &methods {
        let dev = m.deviation();
        for (c, s) in dev.iter().enumerate() {
            dev_rows.push(vec![m.label.clone(), c.to_string(), s.mean.to_string(), s.std.to_string()]);
        }
        let class_labels: Vec<String> = (0..k).map(|c| c.to_string()).collect();
        let values: Vec<f64> = dev.iter().map(|s| s.mean).collect();
        write_text(
            &out.join(format!("deviation_{}.svg", file_stem(&m.label))),
            &svg::signed_bar_chart(
                &format!("Estimated minus true unlabeled proportion: {}", m.label),
                &class_labels,
                &values,
                "deviation",
            ),
        )?;
    }
    write_csv(
        &out.join("proportion_deviation.csv"),
        &["method", "class", "deviation_mean", "deviation_std"],
        &dev_rows,
    )?;

    let mut recall_rows = Vec::new();
    let mut major = Vec::new();
    let mut minor = Vec::new();
    for m in &methods {
        let a = m.recall_curve(0);
        let b = m.recall_curve(k - 1);
        for (&(e, ra), &(_, rb)) in a.iter().zip(&b) {
            recall_rows.push(vec![m.label.clone(), e.to_string(), ra.to_string(), rb.to_string()]);
        }
        major.push(Series { name: m.label.clone(), points: a });
        minor.push(Series { name: m.label.clone(), points: b });
    }
    write_csv(
        &out.join("pl_recall.csv"),
        &["method", "epoch", "recall_major", "recall_minor"],
        &recall_rows,
    )?;
    write_text(
        &out.join("pl_recall_major.svg"),
        &svg::line_chart("Pseudo-label recall, class 0 (most major)", "epoch", "recall", &major),
    )?;
    write_text(
        &out.join("pl_recall_minor.svg"),
        &svg::line_chart(
            &format!("Pseudo-label recall, class {} (most minor)", k - 1),
            "epoch",
            "recall",
            &minor,
        ),
    )?;

    let mut acc_rows = Vec::new();
    let mut grid = vec![vec![
        "method".to_string(),
        "seeds".to_string(),
        "test bal. acc. (%)".to_string(),
        "val bal. acc. (%)".to_string(),
    ]];
    for m in &methods {
        let (test, val) = m.accuracy();
        acc_rows.push(vec![
            m.label.clone(),
            m.seeds.len().to_string(),
            test.mean.to_string(),
            test.std.to_string(),
            val.mean.to_string(),
            val.std.to_string(),
        ]);
        grid.push(vec![
            m.label.clone(),
            m.seeds.len().to_string(),
            format!("{:.2}±{:.2}", test.mean * 100.0, test.std * 100.0),
            format!("{:.2}±{:.2}", val.mean * 100.0, val.std * 100.0),
        ]);
    }
    write_csv(
        &out.join("accuracy.csv"),
        &["method", "seeds", "test_mean", "test_std", "val_mean", "val_std"],
        &acc_rows,
    )?;
    write_text(&out.join("accuracy.svg"), &svg::table("Balanced accuracy at the best checkpoint", &grid))?;
    Ok(methods)
}
