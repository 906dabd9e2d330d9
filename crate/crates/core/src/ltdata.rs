//! Long-tailed dataset construction.
//!
//! Class sizes decay exponentially from `N_1` down to `N_1 / γ`; each class is
//! then split into labeled and unlabeled training samples, with balanced
//! validation and test sets drawn from the rest of the class pool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hypergeom::{ClassCounts, ProportionVector};
use crate::matrix::Matrix;

/// Samples grouped by class index.
pub type ClassPools = Vec<Vec<Sample>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub classes: usize,
    /// Size of the largest (first) class before splitting.
    pub largest_class: usize,
    /// Imbalance ratio `N_1 / N_K`.
    pub gamma: f64,
    /// Labeled fraction of every class.
    pub beta: f64,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config(format!("classes = {} must be at least 2", self.classes)));
        }
        if self.largest_class < 1 {
            return Err(Error::Config("largest_class must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 1.0) {
            return Err(Error::Config(format!("gamma = {} must be >= 1", self.gamma)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta = {} must lie in (0, 1]", self.beta)));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// 0-based class index.
    pub label: Option<usize>,
}

impl Sample {
    pub fn labeled(features: Vec<f64>, label: usize) -> Self {
        Sample {
            features,
            label: Some(label),
        }
    }
}

/// Unlabeled training samples. Ground truth is kept for diagnostics only and
/// is not reachable through [`UnlabeledPool::view`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledPool {
    features: Vec<Vec<f64>>,
    hidden_labels: Vec<usize>,
}

/// Label-free view of an unlabeled pool. This is all the training objective
/// ever sees.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledView<'a> {
    features: &'a [Vec<f64>],
}

impl<'a> UnlabeledView<'a> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self, i: usize) -> &'a [f64] {
        &self.features[i]
    }
}

impl UnlabeledPool {
    pub fn new(features: Vec<Vec<f64>>, hidden_labels: Vec<usize>) -> Self {
        assert_eq!(features.len(), hidden_labels.len());
        UnlabeledPool {
            features,
            hidden_labels,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn view(&self) -> UnlabeledView<'_> {
        UnlabeledView {
            features: &self.features,
        }
    }

    /// Ground-truth labels, for evaluation and reporting.
    pub fn ground_truth(&self) -> &[usize] {
        &self.hidden_labels
    }

    /// Mutable ground truth. Lets tests corrupt labels to show the training
    /// objective never reads them.
    pub fn ground_truth_mut(&mut self) -> &mut [usize] {
        &mut self.hidden_labels
    }

    /// The pool as evaluation samples with their hidden labels attached.
    pub fn as_samples(&self) -> Vec<Sample> {
        self.features
            .iter()
            .zip(&self.hidden_labels)
            .map(|(f, &y)| Sample::labeled(f.clone(), y))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub labeled: Vec<Sample>,
    pub unlabeled: UnlabeledPool,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub class_counts_total: ClassCounts,
    pub class_counts_labeled: ClassCounts,
}

impl DatasetSplit {
    pub fn num_classes(&self) -> usize {
        self.class_counts_total.num_classes()
    }

    pub fn feature_dim(&self) -> usize {
        self.labeled.first().map_or(0, |s| s.features.len())
    }

    /// True class composition of the unlabeled pool.
    pub fn class_counts_unlabeled(&self) -> ClassCounts {
        ClassCounts::new(
            self.class_counts_total
                .as_slice()
                .iter()
                .zip(self.class_counts_labeled.as_slice())
                .map(|(t, l)| t - l)
                .collect(),
        )
    }

    /// Class proportions estimated from the labeled set.
    pub fn labeled_proportions(&self) -> Result<ProportionVector> {
        self.class_counts_labeled.proportions()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Per-class training sizes `N_k = round(N_1 · γ^{−(k−1)/(K−1)})`.
pub fn longtail_counts(spec: &SplitSpec) -> Result<ClassCounts> {
    spec.validate()?;
    let k = spec.classes;
    let counts: Vec<usize> = (0..k)
        .map(|i| {
            let exponent = -(i as f64) / (k - 1) as f64;
            round_half_up(spec.largest_class as f64 * spec.gamma.powf(exponent))
        })
        .collect();
    if counts[k - 1] == 0 {
        return Err(Error::Config(format!(
            "largest_class = {} with gamma = {} leaves the smallest class empty",
            spec.largest_class, spec.gamma
        )));
    }
    Ok(ClassCounts::new(counts))
}

/// Labeled samples taken from a class of `class_size` training samples.
pub fn labeled_count(class_size: usize, beta: f64) -> usize {
    round_half_up(beta * class_size as f64).max(1).min(class_size)
}

pub fn make_split<R: Rng + ?Sized>(pools: &[Vec<Sample>], spec: &SplitSpec, rng: &mut R) -> Result<DatasetSplit> {
    let sizes = longtail_counts(spec)?;
    if pools.len() != spec.classes {
        return Err(Error::Config(format!(
            "pool has {} classes, split expects {}",
            pools.len(),
            spec.classes
        )));
    }
    let mut labeled = Vec::new();
    let mut unlabeled_features = Vec::new();
    let mut unlabeled_labels = Vec::new();
    let mut validation = Vec::new();
    let mut test = Vec::new();
    let mut labeled_counts = Vec::with_capacity(spec.classes);

    for (class, pool) in pools.iter().enumerate() {
        let train = sizes.get(class);
        let needed = train + spec.val_per_class + spec.test_per_class;
        if pool.len() < needed {
            return Err(Error::Config(format!(
                "class {class} has {} samples but the split needs {needed} \
                 ({train} train + {} validation + {} test)",
                pool.len(),
                spec.val_per_class,
                spec.test_per_class
            )));
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(rng);
        let n_labeled = labeled_count(train, spec.beta);
        labeled_counts.push(n_labeled);

        let take = |idx: &[usize]| -> Vec<Sample> {
            idx.iter()
                .map(|&i| Sample::labeled(pool[i].features.clone(), class))
                .collect()
        };
        let (train_idx, rest) = order.split_at(train);
        let (val_idx, rest) = rest.split_at(spec.val_per_class);
        let test_idx = &rest[..spec.test_per_class];
        labeled.extend(take(&train_idx[..n_labeled]));
        for &i in &train_idx[n_labeled..] {
            unlabeled_features.push(pool[i].features.clone());
            unlabeled_labels.push(class);
        }
        validation.extend(take(val_idx));
        test.extend(take(test_idx));
    }

    Ok(DatasetSplit {
        labeled,
        unlabeled: UnlabeledPool::new(unlabeled_features, unlabeled_labels),
        validation,
        test,
        class_counts_total: sizes,
        class_counts_labeled: ClassCounts::new(labeled_counts),
    })
}

/// Isotropic unit-variance Gaussian classes centered at `separation · u_k`.
///
/// The unit directions `u_k` are the standard basis vectors when `K <= d`
/// (pairwise center distance `separation · √2`), otherwise `K` evenly spaced
/// points on the unit circle in the first two coordinates.
pub fn synth_gaussian_mixture<R: Rng + ?Sized>(
    classes: usize,
    dim: usize,
    separation: f64,
    per_class: usize,
    rng: &mut R,
) -> Result<ClassPools> {
    if classes < 2 || dim < 2 {
        return Err(Error::Argument(format!(
            "mixture needs at least 2 classes and 2 dimensions, got {classes} and {dim}"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::Argument(format!("separation = {separation} must be >= 0")));
    }
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|k| {
            let mut c = vec![0.0; dim];
            if classes <= dim {
                c[k] = separation;
            } else {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / classes as f64;
                c[0] = separation * angle.cos();
                c[1] = separation * angle.sin();
            }
            c
        })
        .collect();
    Ok(centers
        .iter()
        .enumerate()
        .map(|(k, center)| {
            (0..per_class)
                .map(|_| {
                    let x = center
                        .iter()
                        .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    Sample::labeled(x, k)
                })
                .collect()
        })
        .collect())
}

/// Column layout of an ingestible CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub num_classes: usize,
}

impl CsvSchema {
    /// Features named `f0 .. f{dim-1}` and a `label` column, as written by
    /// [`write_split`].
    pub fn positional(dim: usize, num_classes: usize) -> Self {
        CsvSchema {
            feature_columns: (0..dim).map(|i| format!("f{i}")).collect(),
            label_column: "label".into(),
            num_classes,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub pools: ClassPools,
    pub warnings: Vec<String>,
}

/// Reads a comma-separated file with a header row into per-class pools.
/// Labels are 0-based integers below `schema.num_classes`.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadedCsv> {
    let ingest = |line: u64, message: String| Error::Ingest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| ingest(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| ingest(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ingest(1, format!("header is missing column `{name}`")))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;
    let label_idx = column(&schema.label_column)?;

    let mut pools: ClassPools = vec![Vec::new(); schema.num_classes];
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            ingest(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        let features = feature_idx
            .iter()
            .zip(&schema.feature_columns)
            .map(|(&i, name)| {
                cell(i).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    ingest(line, format!("column `{name}`: `{}` is not a finite number", cell(i)))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let raw = cell(label_idx);
        let label = raw
            .parse::<usize>()
            .ok()
            .filter(|&y| y < schema.num_classes)
            .ok_or_else(|| {
                ingest(
                    line,
                    format!("unknown label `{raw}` (expected 0..{})", schema.num_classes),
                )
            })?;
        pools[label].push(Sample::labeled(features, label));
        rows += 1;
    }
    let mut warnings = Vec::new();
    if rows == 0 {
        warnings.push(format!("{}: no data rows", path.display()));
    }
    Ok(LoadedCsv { pools, warnings })
}

pub const PARTITIONS: [&str; 4] = ["labeled", "unlabeled", "validation", "test"];

/// Writes `<partition>.csv` for every partition plus `manifest.txt`.
///
/// CSV columns: `partition,label,f0,...`. Rows of the unlabeled partition
/// carry their hidden ground truth in `label`.
pub fn write_split(dir: &Path, split: &DatasetSplit, spec: &SplitSpec) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = split.feature_dim();
    let unlabeled = split.unlabeled.as_samples();
    let parts: [(&str, &[Sample]); 4] = [
        ("labeled", &split.labeled),
        ("unlabeled", &unlabeled),
        ("validation", &split.validation),
        ("test", &split.test),
    ];
    let mut written = Vec::new();
    for (name, samples) in parts {
        let path = dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Data(e.to_string()))?;
        let mut header = vec!["partition".to_string(), "label".to_string()];
        header.extend((0..dim).map(|i| format!("f{i}")));
        w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
        for s in samples {
            let mut row = vec![name.to_string(), s.label.map_or(String::new(), |y| y.to_string())];
            row.extend(s.features.iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, split_manifest(split, spec)).map_err(|e| Error::io(&manifest, e))?;
    written.push(manifest);
    Ok(written)
}

fn join(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn class_histogram(samples: &[Sample], classes: usize) -> Vec<usize> {
    let mut h = vec![0; classes];
    for s in samples {
        if let Some(y) = s.label {
            h[y] += 1;
        }
    }
    h
}

/// Plain-text `key=value` description of a split.
pub fn split_manifest(split: &DatasetSplit, spec: &SplitSpec) -> String {
    let k = split.num_classes();
    let mut out = String::new();
    let _ = writeln!(out, "classes={}", spec.classes);
    let _ = writeln!(out, "largest_class={}", spec.largest_class);
    let _ = writeln!(out, "gamma={}", spec.gamma);
    let _ = writeln!(out, "beta={}", spec.beta);
    let _ = writeln!(out, "val_per_class={}", spec.val_per_class);
    let _ = writeln!(out, "test_per_class={}", spec.test_per_class);
    let _ = writeln!(out, "seed={}", spec.seed);
    let _ = writeln!(out, "feature_dim={}", split.feature_dim());
    let _ = writeln!(out, "counts_total={}", join(split.class_counts_total.as_slice()));
    let _ = writeln!(out, "counts_labeled={}", join(split.class_counts_labeled.as_slice()));
    let _ = writeln!(out, "counts_unlabeled={}", join(split.class_counts_unlabeled().as_slice()));
    let _ = writeln!(out, "counts_validation={}", join(&class_histogram(&split.validation, k)));
    let _ = writeln!(out, "counts_test={}", join(&class_histogram(&split.test, k)));
    out
}

/// Stacks sample features into a matrix.
pub fn feature_matrix<'a, I>(rows: I, dim: usize) -> Matrix
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        data.extend_from_slice(r);
        n += 1;
    }
    Matrix::from_vec(n, dim, data)
}
