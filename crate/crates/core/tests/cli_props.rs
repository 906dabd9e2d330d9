use std::fs;
use std::path::{Path, PathBuf};

use propssl::cli::commands::{cmd_sample_hg, cmd_split, cmd_sweep, cmd_train};
use propssl::cli::{cmd_report, main_with_args, ExperimentConfig};
use propssl::trainer::metrics::{metrics_header, read_metrics_csv, KeyValues};
use propssl::trainer::{sweep_lambdas, DataSource};
use propssl::{SplitSpec, TrainConfig};

fn tiny(out: &Path, extra: &[(&str, &str)]) -> ExperimentConfig {
    let mut overrides: Vec<(String, String)> = vec![
        ("output.out".into(), out.display().to_string()),
        ("seeds".into(), "1".into()),
        ("epochs".into(), "2".into()),
        ("iters_per_epoch".into(), "8".into()),
        ("largest_class".into(), "150".into()),
        ("val_per_class".into(), "20".into()),
        ("test_per_class".into(), "30".into()),
        ("dim".into(), "6".into()),
        ("hidden".into(), "16".into()),
    ];
    overrides.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    ExperimentConfig::load(None, &overrides).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn parse_svg(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text
}

// ------------------------------------------------------------ config

#[test]
fn empty_file_plus_flags_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.cfg");
    fs::write(&p, "").unwrap();
    let cfg = ExperimentConfig::load(
        Some(&p),
        &[("classes".into(), "3".into()), ("split.gamma".into(), "4".into())],
    )
    .unwrap();
    assert_eq!(cfg.split.classes, 3);
    assert_eq!(cfg.split.gamma, 4.0);
}

#[test]
fn resolved_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("lambda_prop", "0.75")]);
    cmd_split(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("config.resolved.txt")).unwrap();
    assert!(text.contains("lambda_prop = 0.75"), "{text}");
    assert_eq!(ExperimentConfig::parse(&text, "echo").unwrap(), cfg);
}

#[test]
fn bin_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    assert_eq!(main_with_args(["propssl", "train", "--out", &out, "--set", "nope=1"]), 2);
    assert_eq!(main_with_args(["propssl", "frobnicate"]), 2);
    assert_eq!(main_with_args(["propssl", "split", "--out", &out, "--set", "gamma=0.5"]), 2);
    assert_eq!(main_with_args(["propssl", "report", "--out", &out, "/nonexistent/run"]), 3);
    assert_eq!(
        main_with_args(["propssl", "sample-hg", "--out", &out, "--population", "2,2", "-n", "2", "--draws", "5"]),
        0
    );
    assert_eq!(
        main_with_args(["propssl", "train", "--out", &out, "--seeds", "1", "--set", "epochs=1", "--set", "lr0=1e200"]),
        4
    );
}

// ------------------------------------------------------------ split

#[test]
fn split_manifest_minor_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(
        dir.path(),
        &[("classes", "10"), ("largest_class", "90"), ("gamma", "10"), ("val_per_class", "2"), ("test_per_class", "2")],
    );
    cmd_split(&cfg).unwrap();
    let kv = KeyValues::read(&dir.path().join("split/g10_b0.04/manifest.txt")).unwrap();
    assert!(kv.get("counts_total").unwrap().ends_with(",9"));

    let before = fs::read(dir.path().join("split/g10_b0.04/unlabeled.csv")).unwrap();
    cmd_split(&cfg).unwrap();
    assert_eq!(before, fs::read(dir.path().join("split/g10_b0.04/unlabeled.csv")).unwrap());
}

#[test]
fn split_gamma_one_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("gamma", "1")]);
    cmd_split(&cfg).unwrap();
    let kv = KeyValues::read(&dir.path().join("split/g1_b0.04/manifest.txt")).unwrap();
    assert_eq!(kv.get("counts_total"), Some("150,150,150,150,150,150"));
}

// ------------------------------------------------------------ train

#[test]
fn zero_epoch_train_writes_init_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("epochs", "0"), ("variants", "baseline")]);
    cmd_train(&cfg).unwrap();
    let seed_dir = dir.path().join("g10_b0.04/baseline/seed_1");
    let kv = KeyValues::read(&seed_dir.join("summary.txt")).unwrap();
    assert_eq!(kv.get("best_epoch"), Some("0"));
    let rows = read_metrics_csv(&seed_dir.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(kv.get_f64("test_bal_acc_at_best"), Some(rows[0].test_bal_acc));
    assert!(seed_dir.join("checkpoint_best.txt").is_file());
}

#[test]
fn train_emits_one_row_per_variant_with_std() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("seeds", "1,2,3,4,5"), ("lambda_prop", "0.5")]);
    let entries = cmd_train(&cfg).unwrap();
    assert_eq!(entries.len(), 2);
    let (header, rows) = read_csv(&dir.path().join("table.csv"));
    assert_eq!(rows.len(), 2);
    let std_col = header.iter().position(|h| h == "test_std").unwrap();
    for r in &rows {
        let s: f64 = r[std_col].parse().unwrap();
        assert!(s.is_finite() && s > 0.0, "{r:?}");
    }
    let text = fs::read_to_string(dir.path().join("table.txt")).unwrap();
    assert!(text.starts_with("method\t(10,4%)"), "{text}");
    assert!(text.contains("baseline\t") && text.contains("prop\t"));
    parse_svg(&dir.path().join("table.svg"));
}

#[test]
fn metrics_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("variants", "prop"), ("lambda_prop", "1")]);
    cmd_train(&cfg).unwrap();
    let path = dir.path().join("g10_b0.04/prop/seed_1/metrics.csv");
    let (header, raw) = read_csv(&path);
    assert_eq!(header, metrics_header(6));
    let rows = read_metrics_csv(&path).unwrap();
    assert_eq!(rows.len(), raw.len());
    for (row, cells) in rows.iter().zip(&raw) {
        assert_eq!(row.val_bal_acc.to_string(), cells[6]);
        assert_eq!(row.est_prop[5].to_string(), cells[13]);
    }
}

// ------------------------------------------------------------ sweep

fn val_means(path: &Path) -> Vec<(f64, f64)> {
    let (_, rows) = read_csv(path);
    rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect()
}

#[test]
fn sweep_selects_max_validation_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("seeds", "1,2"), ("lambdas", "0,0.25,0.5,1"), ("variants", "prop")]);
    cmd_sweep(&cfg).unwrap();
    let vdir = dir.path().join("g10_b0.04/prop");
    let means = val_means(&vdir.join("sweep.csv"));
    let best = means.iter().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    let first_best = means.iter().find(|m| m.1 == best).unwrap().0;
    let kv = KeyValues::read(&vdir.join("selected.txt")).unwrap();
    assert_eq!(kv.get_f64("lambda_star"), Some(first_best));
    let (header, _) = read_csv(&vdir.join("sweep.csv"));
    assert!(header.iter().all(|h| !h.contains("test")), "{header:?}");
}

#[test]
fn sweep_of_zero_equals_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("lambdas", "0"), ("variants", "baseline,prop")]);
    let entries = cmd_sweep(&cfg).unwrap();
    assert_eq!(entries[1].lambda, 0.0);
    assert_eq!(entries[0].test_mean, entries[1].test_mean);
    let a = fs::read(dir.path().join("g10_b0.04/baseline/seed_1/metrics.csv")).unwrap();
    let b = fs::read(dir.path().join("g10_b0.04/prop/lambda_0/seed_1/metrics.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_lambda_is_selected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("lambdas", "0.3"), ("variants", "prop_fixed")]);
    let entries = cmd_sweep(&cfg).unwrap();
    assert_eq!(entries[0].lambda, 0.3);
}

#[test]
fn test_labels_do_not_influence_selection() {
    let spec = SplitSpec {
        classes: 4,
        largest_class: 150,
        gamma: 8.0,
        beta: 0.06,
        val_per_class: 20,
        test_per_class: 30,
        seed: 0,
    };
    let source = DataSource::Synthetic { dim: 6, separation: 2.5 };
    let splits: Vec<_> = [1u64, 2, 3].iter().map(|&s| (s, source.split(&spec, s).unwrap())).collect();
    let mut corrupted = splits.clone();
    for (_, split) in &mut corrupted {
        for s in &mut split.test {
            s.label = s.label.map(|y| (y + 1) % 4);
        }
    }
    let cfg = TrainConfig {
        epochs: 5,
        iters_per_epoch: 10,
        hidden: 16,
        ..TrainConfig::default()
    };
    let lambdas = [0.0, 0.25, 0.5, 1.0];
    let clean = sweep_lambdas(&splits, &cfg, &lambdas).unwrap();
    let dirty = sweep_lambdas(&corrupted, &cfg, &lambdas).unwrap();
    assert_eq!(clean.selected, dirty.selected);
    for (a, b) in clean.sweeps.iter().zip(&dirty.sweeps) {
        for (x, y) in a.runs.iter().zip(&b.runs) {
            assert_eq!(x.result.best_epoch, y.result.best_epoch);
            assert_eq!(x.result.best_params, y.result.best_params);
            assert_eq!(x.result.best_validation_accuracy, y.result.best_validation_accuracy);
        }
    }
    let changed = clean.sweeps[0].runs[0].result.test_accuracy_at_best != dirty.sweeps[0].runs[0].result.test_accuracy_at_best;
    assert!(changed, "corruption should be visible in test accuracy");
}

// ------------------------------------------------------------ report

/// A hand-written one-seed run whose estimates equal the truth.
fn fake_run(dir: &Path, est: &[f64], truth: &[f64]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let k = truth.len();
    let mut text = metrics_header(k).join(",") + "\n";
    for epoch in 0..3 {
        let mut row = vec![epoch.to_string(), "0".into(), "0".into(), "0".into(), "0".into(), "0.1".into()];
        row.push("1".into());
        row.push("1".into());
        row.extend(est.iter().map(f64::to_string));
        row.extend((0..k).map(|c| (0.5 + 0.1 * (epoch + c) as f64).to_string()));
        text += &(row.join(",") + "\n");
    }
    fs::write(dir.join("metrics.csv"), text).unwrap();
    let mut kv = KeyValues::default();
    kv.push("best_epoch", 2);
    kv.push_list("true_prop", truth);
    kv.write(&dir.join("summary.txt")).unwrap();
    dir.to_path_buf()
}

#[test]
fn perfect_predictor_has_flat_bars() {
    let dir = tempfile::tempdir().unwrap();
    let q = [0.5, 0.3, 0.2];
    let run = fake_run(&dir.path().join("perfect"), &q, &q);
    let out = dir.path().join("report");
    cmd_report(&[run], &out).unwrap();
    let svg = parse_svg(&out.join("deviation_perfect.svg"));
    assert_eq!(svg.matches(r#"height="0.0""#).count(), 3, "{svg}");
    let (_, rows) = read_csv(&out.join("proportion_deviation.csv"));
    assert!(rows.iter().all(|r| r[2].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn one_run_one_line_two_runs_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    let a = fake_run(&dir.path().join("a"), &[0.6, 0.3, 0.1], &[0.5, 0.3, 0.2]);
    let b = fake_run(&dir.path().join("b"), &[0.5, 0.3, 0.2], &[0.5, 0.3, 0.2]);
    let out1 = dir.path().join("r1");
    cmd_report(std::slice::from_ref(&a), &out1).unwrap();
    for f in ["pl_recall_major.svg", "pl_recall_minor.svg"] {
        assert_eq!(parse_svg(&out1.join(f)).matches("<polyline").count(), 1);
    }
    let out2 = dir.path().join("r2");
    cmd_report(&[a, b], &out2).unwrap();
    assert_eq!(parse_svg(&out2.join("pl_recall_minor.svg")).matches("<polyline").count(), 2);
    let deviation = parse_svg(&out2.join("deviation_a.svg"));
    assert!(deviation.contains("#d62728") && deviation.contains("#1f77b4"));
    parse_svg(&out2.join("accuracy.svg"));
    let (_, acc) = read_csv(&out2.join("accuracy.csv"));
    assert_eq!(acc.len(), 2);
}

#[test]
fn report_reads_real_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("seeds", "1,2"), ("lambdas", "0.5"), ("variants", "baseline,prop")]);
    cmd_sweep(&cfg).unwrap();
    let cell = dir.path().join("g10_b0.04");
    let out = dir.path().join("report");
    let methods = cmd_report(&[cell.join("baseline"), cell.join("prop")], &out).unwrap();
    assert_eq!(methods.len(), 2);
    assert_eq!(methods[1].seeds.len(), 2);
    assert!(methods[1].seeds[0].seed_dir.ends_with("prop/lambda_0.5/seed_1"));
    let (_, rows) = read_csv(&out.join("pl_recall.csv"));
    assert_eq!(rows.len(), 2 * 3);
}

#[test]
fn report_errors_name_file_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let run = fake_run(&dir.path().join("bad"), &[0.5, 0.5], &[0.5, 0.5]);
    let text = fs::read_to_string(run.join("metrics.csv")).unwrap().replacen("val_bal_acc", "val_acc", 1);
    fs::write(run.join("metrics.csv"), text).unwrap();
    let e = cmd_report(std::slice::from_ref(&run), &dir.path().join("r")).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("metrics.csv") && msg.contains("val_bal_acc"), "{msg}");
    assert_eq!(e.exit_code(), 3);

    let run = fake_run(&dir.path().join("nosummary"), &[0.5, 0.5], &[0.5, 0.5]);
    fs::write(run.join("summary.txt"), "best_epoch=1\n").unwrap();
    let msg = cmd_report(&[run], &dir.path().join("r")).unwrap_err().to_string();
    assert!(msg.contains("summary.txt") && msg.contains("true_prop"), "{msg}");
}

// ------------------------------------------------------------ sample-hg

#[test]
fn full_draw_rows_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("population", "3,1,2"), ("draw_size", "6"), ("draws", "25")]);
    cmd_sample_hg(&cfg).unwrap();
    let (_, rows) = read_csv(&dir.path().join("sample_hg.csv"));
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r[1..] == ["3", "1", "2"]));
}

#[test]
fn zero_draws_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("population", "2,2"), ("draw_size", "2"), ("draws", "0")]);
    cmd_sample_hg(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("sample_hg.csv")).unwrap();
    assert_eq!(text, "draw,c0,c1\n");
}

#[test]
fn empirical_pmf_matches_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), &[("population", "2,2"), ("draw_size", "2"), ("draws", "60000")]);
    cmd_sample_hg(&cfg).unwrap();
    let (_, rows) = read_csv(&dir.path().join("sample_hg_pmf.csv"));
    let mid = rows.iter().find(|r| r[0] == "1 1").unwrap();
    let exact: f64 = mid[1].parse().unwrap();
    let freq: f64 = mid[2].parse().unwrap();
    assert!((exact - 2.0 / 3.0).abs() < 1e-12);
    assert!((freq - 2.0 / 3.0).abs() < 0.01, "{freq}");
    let (_, moments) = read_csv(&dir.path().join("sample_hg_moments.csv"));
    assert_eq!(moments[0][1], "1");
}
