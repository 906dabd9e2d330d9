//! Evaluation metrics and their file formats.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hypergeom::ProportionVector;
use crate::ltdata::{feature_matrix, Sample};
use crate::losses::argmax;
use crate::matrix::Matrix;
use crate::nn::{forward, softmax, ModelParams, ProbMatrix};

/// Rows per forward pass during evaluation.
const EVAL_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Mean of the per-class recalls over classes present in the input.
    pub balanced_accuracy: f64,
    /// Recall per class; `NaN` for classes with no samples.
    pub per_class_recall: Vec<f64>,
    /// Mean softmax output.
    pub mean_softmax: ProportionVector,
    /// Normalized histogram of argmax predictions.
    pub argmax_proportions: ProportionVector,
    /// Per class: samples predicted correctly with confidence at least the
    /// threshold, divided by all samples of that class.
    pub confident_recall: Vec<f64>,
}

pub(crate) fn predict(params: &ModelParams, samples: &[Sample]) -> Result<ProbMatrix> {
    let dim = params.sizes.input;
    let mut parts = Vec::new();
    for chunk in samples.chunks(EVAL_CHUNK) {
        let x = feature_matrix(chunk.iter().map(|s| s.features.as_slice()), dim);
        let (logits, _) = forward(params, &x)?;
        parts.push(softmax(&logits));
    }
    if parts.is_empty() {
        return Ok(Matrix::zeros(0, params.sizes.classes));
    }
    Ok(Matrix::vstack(&parts.iter().collect::<Vec<_>>()))
}

/// Scores labeled samples. `threshold` only affects `confident_recall`.
pub fn evaluate_with_threshold(params: &ModelParams, samples: &[Sample], threshold: f64) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Argument("cannot evaluate an empty sample set".into()));
    }
    let probs = predict(params, samples)?;
    summarize(&probs, samples, threshold)
}

pub fn evaluate(params: &ModelParams, samples: &[Sample]) -> Result<Evaluation> {
    evaluate_with_threshold(params, samples, 0.0)
}

/// Metrics from precomputed probabilities.
pub fn summarize(probs: &ProbMatrix, samples: &[Sample], threshold: f64) -> Result<Evaluation> {
    let k = probs.cols();
    let n = samples.len();
    let mut support = vec![0usize; k];
    let mut correct = vec![0usize; k];
    let mut confident = vec![0usize; k];
    let mut mean = vec![0.0; k];
    let mut hist = vec![0usize; k];
    for (row, s) in probs.iter_rows().zip(samples) {
        let y = s
            .label
            .ok_or_else(|| Error::Argument("evaluation sample has no label".into()))?;
        let (pred, conf) = argmax(row);
        support[y] += 1;
        hist[pred] += 1;
        if pred == y {
            correct[y] += 1;
            if conf >= threshold {
                confident[y] += 1;
            }
        }
        for (m, p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    let ratio = |num: &[usize]| -> Vec<f64> {
        num.iter()
            .zip(&support)
            .map(|(&c, &s)| if s == 0 { f64::NAN } else { c as f64 / s as f64 })
            .collect()
    };
    let per_class_recall = ratio(&correct);
    let present: Vec<f64> = per_class_recall.iter().copied().filter(|r| !r.is_nan()).collect();
    let balanced_accuracy = present.iter().sum::<f64>() / present.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let hist: Vec<f64> = hist.iter().map(|&h| h as f64).collect();
    Ok(Evaluation {
        balanced_accuracy,
        per_class_recall,
        mean_softmax: ProportionVector::from_weights(&mean)?,
        argmax_proportions: ProportionVector::from_weights(&hist)?,
        confident_recall: ratio(&confident),
    })
}

/// Diagnostics for one epoch. Epoch 0 describes the initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Per-epoch means of the per-iteration loss components.
    pub loss_sup: f64,
    pub loss_cons: f64,
    pub loss_prop: f64,
    pub mask_rate: f64,
    /// Learning rate of the epoch's last iteration.
    pub learning_rate: f64,
    pub val_balanced_accuracy: f64,
    pub balanced_test_accuracy: f64,
    pub per_class_test_recall: Vec<f64>,
    /// Mean softmax over the whole unlabeled pool.
    pub estimated_unlabeled_proportions: ProportionVector,
    pub argmax_proportions: ProportionVector,
    pub pseudo_label_recall_per_class: Vec<f64>,
}

/// Column names of the per-epoch metrics file, in order.
pub fn metrics_header(classes: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "epoch",
        "loss_sup",
        "loss_cons",
        "loss_prop",
        "mask_rate",
        "lr",
        "val_bal_acc",
        "test_bal_acc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..classes).map(|k| format!("est_prop_{k}")));
    h.extend((0..classes).map(|k| format!("pl_recall_{k}")));
    h
}

fn record_row(r: &MetricsRecord) -> Vec<String> {
    let mut row = vec![
        r.epoch.to_string(),
        r.loss_sup.to_string(),
        r.loss_cons.to_string(),
        r.loss_prop.to_string(),
        r.mask_rate.to_string(),
        r.learning_rate.to_string(),
        r.val_balanced_accuracy.to_string(),
        r.balanced_test_accuracy.to_string(),
    ];
    row.extend(r.estimated_unlabeled_proportions.as_slice().iter().map(|v| v.to_string()));
    row.extend(r.pseudo_label_recall_per_class.iter().map(|v| v.to_string()));
    row
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord], classes: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(metrics_header(classes)).map_err(csv_err)?;
    for r in records {
        w.write_record(record_row(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a metrics file as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: usize,
    pub loss_sup: f64,
    pub loss_cons: f64,
    pub loss_prop: f64,
    pub mask_rate: f64,
    pub lr: f64,
    pub val_bal_acc: f64,
    pub test_bal_acc: f64,
    pub est_prop: Vec<f64>,
    pub pl_recall: Vec<f64>,
}

/// Reads a metrics file, checking the column layout.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let schema_err = |line: u64, message: String| Error::Ingest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| schema_err(0, e.to_string()))?;
    let headers = r.headers().map_err(|e| schema_err(1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let fixed = 8;
    if cols.len() < fixed + 2 || !(cols.len() - fixed).is_multiple_of(2) {
        return Err(schema_err(1, format!("unexpected column count {}", cols.len())));
    }
    let classes = (cols.len() - fixed) / 2;
    for (i, want) in metrics_header(classes).iter().enumerate() {
        if cols[i] != want {
            return Err(schema_err(1, format!("column {i} is `{}`, expected `{want}`", cols[i])));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| schema_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals: Vec<f64> = rec
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.parse::<f64>()
                    .map_err(|_| schema_err(line, format!("column `{}`: bad number `{v}`", cols[i])))
            })
            .collect::<Result<_>>()?;
        rows.push(MetricsRow {
            epoch: vals[0] as usize,
            loss_sup: vals[1],
            loss_cons: vals[2],
            loss_prop: vals[3],
            mask_rate: vals[4],
            lr: vals[5],
            val_bal_acc: vals[6],
            test_bal_acc: vals[7],
            est_prop: vals[fixed..fixed + classes].to_vec(),
            pl_recall: vals[fixed + classes..].to_vec(),
        });
    }
    Ok(rows)
}

/// Ordered `key=value` pairs, the format of run summaries and manifests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn push_list(&mut self, key: &str, values: &[f64]) {
        let joined = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        self.push(key, joined);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn get_list(&self, key: &str) -> Option<Vec<f64>> {
        self.get(key)?.split(',').map(|v| v.parse().ok()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        KeyValues(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect(),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(KeyValues::parse(&text))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}
