//! `split`, `train`, `sweep` and `sample-hg`.
//!
//! Output layout under `out/`:
//!
//! ```text
//! config.resolved.txt
//! split/<cell>/{labeled,unlabeled,validation,test}.csv, manifest.txt
//! <cell>/<variant>/seed_<s>/{metrics.csv, summary.txt, checkpoint_best.txt, checkpoint_final.txt}
//! <cell>/<variant>/aggregate.csv
//! <cell>/<variant>/lambda_<λ>/seed_<s>/...      (sweep only)
//! <cell>/<variant>/{sweep.csv, selected.txt}     (sweep only)
//! table.csv, table.txt, table.svg
//! sample_hg.csv, sample_hg_moments.csv, sample_hg_pmf.csv
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{self, Checkpoint};
use crate::error::{Error, Result};
use crate::hypergeom::{self, ClassCounts};
use crate::ltdata::{write_split, DatasetSplit};
use crate::trainer::metrics::{write_metrics_csv, KeyValues};
use crate::trainer::{run_splits, sweep_lambdas, SeedRun, SeedSweep, TrainConfig};

use super::config::{Cell, ExperimentConfig, Variant};
use super::svg;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes the partitions of every grid cell using the `[split]` seed.
pub fn cmd_split(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.echo_to(&cfg.out)?;
    let source = cfg.data_source()?;
    let mut written = Vec::new();
    for cell in cfg.cells() {
        let spec = cfg.split_for(cell);
        let split = source.split(&spec, spec.seed)?;
        written.extend(write_split(&cfg.out.join("split").join(cell.name()), &split, &spec)?);
    }
    Ok(written)
}

fn build_splits(cfg: &ExperimentConfig, cell: Cell) -> Result<Vec<(u64, DatasetSplit)>> {
    let source = cfg.data_source()?;
    let spec = cfg.split_for(cell);
    cfg.sweep
        .seeds
        .iter()
        .map(|&s| Ok((s, source.split(&spec, s)?)))
        .collect()
}

/// Per-seed summary of a finished run.
pub fn run_summary(run: &SeedRun, variant: &str) -> KeyValues {
    let r = &run.result;
    let best = r.best_record();
    let mut kv = KeyValues::default();
    kv.push("seed", run.seed);
    kv.push("variant", variant);
    kv.push("lambda_prop", r.config.lambda_prop);
    kv.push("perturb_proportions", r.config.perturb_proportions);
    kv.push("epochs", r.config.epochs);
    kv.push("best_epoch", r.best_epoch);
    kv.push("best_val_bal_acc", r.best_validation_accuracy);
    kv.push("test_bal_acc_at_best", r.test_accuracy_at_best);
    kv.push(
        "final_test_bal_acc",
        r.records.last().map_or(f64::NAN, |m| m.balanced_test_accuracy),
    );
    kv.push(
        "prop_l1_dev",
        best.estimated_unlabeled_proportions.l1_distance(&r.true_unlabeled_proportions),
    );
    kv.push_list("true_prop", r.true_unlabeled_proportions.as_slice());
    kv.push_list("est_prop_at_best", best.estimated_unlabeled_proportions.as_slice());
    kv.push_list("pl_recall_at_best", &best.pseudo_label_recall_per_class);
    kv.push_list("test_recall_at_best", &best.per_class_test_recall);
    kv.push("hypergeom_draws", r.hypergeom_draws);
    kv.push("total_steps", r.total_steps);
    kv
}

/// Writes one directory per seed plus `aggregate.csv`.
pub fn write_sweep(dir: &Path, sweep: &SeedSweep, variant: &str) -> Result<()> {
    create_dir(dir)?;
    for run in &sweep.runs {
        let seed_dir = dir.join(format!("seed_{}", run.seed));
        create_dir(&seed_dir)?;
        let r = &run.result;
        let k = r.true_unlabeled_proportions.num_classes();
        write_metrics_csv(&seed_dir.join("metrics.csv"), &r.records, k)?;
        run_summary(run, variant).write(&seed_dir.join("summary.txt"))?;
        let ckpt = |params: &crate::nn::ModelParams, step: usize| Checkpoint {
            params: params.clone(),
            seed: run.seed,
            step,
        };
        let best_step = r.best_epoch * r.config.iters_per_epoch;
        checkpoint::save(&seed_dir.join("checkpoint_best.txt"), &ckpt(&r.best_params, best_step))?;
        checkpoint::save(&seed_dir.join("checkpoint_final.txt"), &ckpt(&r.final_params, r.total_steps))?;
    }
    let rows: Vec<Vec<String>> = sweep
        .stats
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                s.mean.to_string(),
                s.std.to_string(),
                sweep.runs.len().to_string(),
            ]
        })
        .collect();
    write_rows(&dir.join("aggregate.csv"), &strings(&["metric", "mean", "std", "n"]), &rows)
}

/// One cell of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub variant: Variant,
    pub cell: Cell,
    pub lambda: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub val_mean: f64,
    pub seeds: usize,
}

impl TableEntry {
    fn from_sweep(variant: Variant, cell: Cell, lambda: f64, sweep: &SeedSweep) -> Self {
        let stat = |n: &str| sweep.stat(n).map_or((f64::NAN, f64::NAN), |s| (s.mean, s.std));
        let (test_mean, test_std) = stat("test_bal_acc");
        TableEntry {
            variant,
            cell,
            lambda,
            test_mean,
            test_std,
            val_mean: stat("val_bal_acc").0,
            seeds: sweep.runs.len(),
        }
    }
}

/// Writes `table.csv` (long form) and `table.txt` / `table.svg` with
/// variants as rows and cells as columns, test accuracy as `mean±std` in %.
pub fn write_table(out: &Path, cells: &[Cell], entries: &[TableEntry]) -> Result<()> {
    let header = strings(&[
        "variant", "gamma", "beta", "lambda_prop", "test_mean", "test_std", "val_mean", "seeds",
    ]);
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            vec![
                e.variant.name().to_string(),
                e.cell.gamma.to_string(),
                e.cell.beta.to_string(),
                e.lambda.to_string(),
                e.test_mean.to_string(),
                e.test_std.to_string(),
                e.val_mean.to_string(),
                e.seeds.to_string(),
            ]
        })
        .collect();
    write_rows(&out.join("table.csv"), &header, &rows)?;

    let mut variants: Vec<Variant> = Vec::new();
    for e in entries {
        if !variants.contains(&e.variant) {
            variants.push(e.variant);
        }
    }
    let mut grid = vec![std::iter::once("method".to_string())
        .chain(cells.iter().map(Cell::title))
        .collect::<Vec<_>>()];
    for v in &variants {
        let mut row = vec![v.name().to_string()];
        for c in cells {
            let cell = entries
                .iter()
                .find(|e| e.variant == *v && e.cell == *c)
                .map_or("-".to_string(), |e| {
                    format!("{:.2}±{:.2}", e.test_mean * 100.0, e.test_std * 100.0)
                });
            row.push(cell);
        }
        grid.push(row);
    }
    let mut text = String::new();
    for row in &grid {
        let _ = writeln!(text, "{}", row.join("\t"));
    }
    write_file(&out.join("table.txt"), &text)?;
    write_file(
        &out.join("table.svg"),
        &svg::table("Balanced test accuracy (%) at the best-validation checkpoint", &grid),
    )
}

/// Trains every variant of every cell at `[train] lambda_prop`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<TableEntry>> {
    cfg.echo_to(&cfg.out)?;
    let cells = cfg.cells();
    let mut entries = Vec::new();
    for &cell in &cells {
        let splits = build_splits(cfg, cell)?;
        for &variant in &cfg.sweep.variants {
            let config = variant.configure(&cfg.train, cfg.train.lambda_prop);
            let sweep = run_splits(&splits, &config)?;
            write_sweep(&cfg.out.join(cell.name()).join(variant.name()), &sweep, variant.name())?;
            entries.push(TableEntry::from_sweep(variant, cell, config.lambda_prop, &sweep));
        }
    }
    write_table(&cfg.out, &cells, &entries)?;
    Ok(entries)
}

fn lambda_dir(lambda: f64) -> String {
    format!("lambda_{lambda}")
}

/// Tunes `lambda_prop` per cell and proportion variant on validation
/// accuracy. Test accuracy is reported for the selected weight only.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<TableEntry>> {
    cfg.echo_to(&cfg.out)?;
    let cells = cfg.cells();
    let mut entries = Vec::new();
    for &cell in &cells {
        let splits = build_splits(cfg, cell)?;
        for &variant in &cfg.sweep.variants {
            let dir = cfg.out.join(cell.name()).join(variant.name());
            if variant == Variant::Baseline {
                let sweep = run_splits(&splits, &variant.configure(&cfg.train, 0.0))?;
                write_sweep(&dir, &sweep, variant.name())?;
                entries.push(TableEntry::from_sweep(variant, cell, 0.0, &sweep));
                continue;
            }
            let base: TrainConfig = variant.configure(&cfg.train, cfg.train.lambda_prop);
            let tuned = sweep_lambdas(&splits, &base, &cfg.sweep.lambdas)?;
            let mut rows = Vec::new();
            for (&l, s) in tuned.lambdas.iter().zip(&tuned.sweeps) {
                write_sweep(&dir.join(lambda_dir(l)), s, variant.name())?;
                let val = s.stat("val_bal_acc").expect("val_bal_acc is always aggregated");
                rows.push(vec![
                    l.to_string(),
                    val.mean.to_string(),
                    val.std.to_string(),
                    s.runs.len().to_string(),
                ]);
            }
            write_rows(
                &dir.join("sweep.csv"),
                &strings(&["lambda_prop", "val_mean", "val_std", "seeds"]),
                &rows,
            )?;
            let chosen = tuned.selected_sweep();
            let entry = TableEntry::from_sweep(variant, cell, tuned.lambda_star(), chosen);
            let mut kv = KeyValues::default();
            kv.push("lambda_star", tuned.lambda_star());
            kv.push("selected_dir", lambda_dir(tuned.lambda_star()));
            kv.push("val_mean", entry.val_mean);
            kv.push("test_mean", entry.test_mean);
            kv.push("test_std", entry.test_std);
            kv.push("seeds", entry.seeds);
            kv.write(&dir.join("selected.txt"))?;
            entries.push(entry);
        }
    }
    write_table(&cfg.out, &cells, &entries)?;
    Ok(entries)
}

/// All draws of `n` items from `population`, in lexicographic order.
fn enumerate_draws(population: &[usize], n: usize) -> Vec<Vec<usize>> {
    fn rec(pop: &[usize], left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let i = cur.len();
        if i == pop.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let rest: usize = pop[i + 1..].iter().sum();
        let lo = left.saturating_sub(rest);
        for c in lo..=pop[i].min(left) {
            cur.push(c);
            rec(pop, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(population, n, &mut Vec::new(), &mut out);
    out
}

const MAX_PMF_OUTCOMES: usize = 10_000;

/// Draws `draws` samples and writes them with exact vs empirical moments
/// (and the full pmf when the support is small).
pub fn cmd_sample_hg(cfg: &ExperimentConfig) -> Result<Vec<Vec<usize>>> {
    cfg.echo_to(&cfg.out)?;
    let hg = &cfg.sample_hg;
    let pop = ClassCounts::new(hg.population.clone());
    let (mean, cov) = hypergeom::mean_and_covariance(&pop, hg.draw_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hg.sample_seed);
    let samples = (0..hg.draws)
        .map(|_| hypergeom::sample(&pop, hg.draw_size, &mut rng).map(ClassCounts::into_vec))
        .collect::<Result<Vec<_>>>()?;

    let k = pop.num_classes();
    let mut header = vec!["draw".to_string()];
    header.extend((0..k).map(|i| format!("c{i}")));
    let rows: Vec<Vec<String>> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| std::iter::once(i.to_string()).chain(s.iter().map(|c| c.to_string())).collect())
        .collect();
    write_rows(&cfg.out.join("sample_hg.csv"), &header, &rows)?;

    let d = samples.len() as f64;
    let moments: Vec<Vec<String>> = (0..k)
        .map(|i| {
            let col = samples.iter().map(|s| s[i] as f64);
            let m = col.clone().sum::<f64>() / d;
            let v = col.map(|x| (x - m) * (x - m)).sum::<f64>() / d;
            vec![
                i.to_string(),
                mean[i].to_string(),
                m.to_string(),
                cov[i][i].to_string(),
                v.to_string(),
            ]
        })
        .collect();
    write_rows(
        &cfg.out.join("sample_hg_moments.csv"),
        &strings(&["class", "exact_mean", "empirical_mean", "exact_var", "empirical_var"]),
        &moments,
    )?;

    let outcomes = enumerate_draws(&hg.population, hg.draw_size);
    if outcomes.len() <= MAX_PMF_OUTCOMES {
        let rows = outcomes
            .iter()
            .map(|o| {
                let p = hypergeom::pmf(&pop, &ClassCounts::new(o.clone()))?;
                let hits = samples.iter().filter(|s| *s == o).count() as f64;
                let label = o.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
                Ok(vec![label, p.to_string(), (hits / d).to_string()])
            })
            .collect::<Result<Vec<_>>>()?;
        write_rows(
            &cfg.out.join("sample_hg_pmf.csv"),
            &strings(&["outcome", "exact_pmf", "empirical_freq"]),
            &rows,
        )?;
    }
    Ok(samples)
}
