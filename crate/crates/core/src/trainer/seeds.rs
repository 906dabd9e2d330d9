use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ltdata::{make_split, synth_gaussian_mixture, ClassPools, DatasetSplit, SplitSpec};

use super::{train, RunResult, TrainConfig};

/// Where a run's samples come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Gaussian mixture regenerated for every seed.
    Synthetic { dim: usize, separation: f64 },
    /// A fixed pool (e.g. loaded from CSV); only the split is reseeded.
    Pools(ClassPools),
}

impl DataSource {
    /// Pools for `seed`. Synthetic pools hold exactly as many samples per class
    /// as the largest class needs.
    pub fn pools(&self, spec: &SplitSpec, seed: u64) -> Result<ClassPools> {
        match self {
            DataSource::Synthetic { dim, separation } => {
                let per_class = spec.largest_class + spec.val_per_class + spec.test_per_class;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(5);
                synth_gaussian_mixture(spec.classes, *dim, *separation, per_class, &mut rng)
            }
            DataSource::Pools(p) => Ok(p.clone()),
        }
    }

    pub fn split(&self, spec: &SplitSpec, seed: u64) -> Result<DatasetSplit> {
        let spec = SplitSpec { seed, ..spec.clone() };
        let pools = self.pools(&spec, seed)?;
        make_split(&pools, &spec, &mut spec.rng())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub result: RunResult,
}

impl SeedRun {
    /// Scalar metrics of the selected checkpoint, in [`SeedRun::METRICS`] order.
    pub fn metrics(&self) -> Vec<f64> {
        let r = &self.result;
        let best = r.best_record();
        let k = r.true_unlabeled_proportions.num_classes();
        vec![
            r.best_validation_accuracy,
            r.test_accuracy_at_best,
            r.records.last().map_or(f64::NAN, |m| m.balanced_test_accuracy),
            best.estimated_unlabeled_proportions.l1_distance(&r.true_unlabeled_proportions),
            best.pseudo_label_recall_per_class[0],
            best.pseudo_label_recall_per_class[k - 1],
            r.best_epoch as f64,
        ]
    }

    pub const METRICS: [&'static str; 7] = [
        "val_bal_acc",
        "test_bal_acc",
        "final_test_bal_acc",
        "prop_l1_dev",
        "pl_recall_major",
        "pl_recall_minor",
        "best_epoch",
    ];
}

/// Mean and population standard deviation (divisor `n`) of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricStat {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

impl MetricStat {
    pub fn from_values(name: &str, values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MetricStat {
            name: name.to_string(),
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSweep {
    pub runs: Vec<SeedRun>,
    pub stats: Vec<MetricStat>,
}

impl SeedSweep {
    pub fn stat(&self, name: &str) -> Option<&MetricStat> {
        self.stats.iter().find(|s| s.name == name)
    }

    fn from_runs(runs: Vec<SeedRun>) -> Self {
        let per_run: Vec<Vec<f64>> = runs.iter().map(SeedRun::metrics).collect();
        let stats = SeedRun::METRICS
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let column: Vec<f64> = per_run.iter().map(|m| m[i]).collect();
                MetricStat::from_values(name, &column)
            })
            .collect();
        SeedSweep { runs, stats }
    }
}

/// Builds the split for `seed` and trains on it with `config.seed = seed`.
pub fn run_single_seed(spec: &SplitSpec, source: &DataSource, config: &TrainConfig, seed: u64) -> Result<SeedRun> {
    let split = source.split(spec, seed)?;
    let config = TrainConfig { seed, ..config.clone() };
    Ok(SeedRun {
        seed,
        result: train(&split, &config)?,
    })
}

/// Runs every seed sequentially and aggregates the selected-checkpoint metrics.
pub fn run_seeds(spec: &SplitSpec, source: &DataSource, config: &TrainConfig, seeds: &[u64]) -> Result<SeedSweep> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let splits = seeds
        .iter()
        .map(|&s| Ok((s, source.split(spec, s)?)))
        .collect::<Result<Vec<_>>>()?;
    run_splits(&splits, config)
}

/// Trains on prebuilt `(seed, split)` pairs.
pub fn run_splits(splits: &[(u64, DatasetSplit)], config: &TrainConfig) -> Result<SeedSweep> {
    if splits.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let runs = splits
        .iter()
        .map(|(seed, split)| {
            let config = TrainConfig { seed: *seed, ..config.clone() };
            Ok(SeedRun {
                seed: *seed,
                result: train(split, &config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedSweep::from_runs(runs))
}

/// Result of tuning `lambda_prop` on validation accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSweep {
    pub lambdas: Vec<f64>,
    pub sweeps: Vec<SeedSweep>,
    /// Index into `lambdas` of the selected weight.
    pub selected: usize,
}

impl LambdaSweep {
    pub fn lambda_star(&self) -> f64 {
        self.lambdas[self.selected]
    }

    pub fn selected_sweep(&self) -> &SeedSweep {
        &self.sweeps[self.selected]
    }
}

/// Index of the largest value, earliest on ties. NaN never wins.
pub fn select_max(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Trains every `lambda_prop` in `lambdas` on the same splits and keeps the
/// one with the highest mean validation accuracy.
pub fn sweep_lambdas(splits: &[(u64, DatasetSplit)], config: &TrainConfig, lambdas: &[f64]) -> Result<LambdaSweep> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda list is empty".into()));
    }
    let sweeps = lambdas
        .iter()
        .map(|&l| run_splits(splits, &TrainConfig { lambda_prop: l, ..config.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let val: Vec<f64> = sweeps
        .iter()
        .map(|s| s.stat("val_bal_acc").map_or(f64::NAN, |m| m.mean))
        .collect();
    let selected = select_max(&val).unwrap_or(0);
    Ok(LambdaSweep {
        lambdas: lambdas.to_vec(),
        sweeps,
        selected,
    })
}
