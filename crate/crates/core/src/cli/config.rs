//! `key=value` experiment configuration with `[section]` headers.
//!
//! ```text
//! [split]
//! classes = 6
//! gamma = 10
//!
//! [train]
//! lambda_prop = 0.5
//!
//! [sweep]
//! seeds = 1,2,3
//! ```
//!
//! Every key belongs to exactly one section. Overrides given as
//! `section.key=value` or bare `key=value` are applied after the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ltdata::{load_csv, CsvSchema, SplitSpec};
use crate::trainer::{DataSource, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DataKind {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    pub dim: usize,
    pub separation: f64,
    pub csv_path: Option<PathBuf>,
    pub label_column: String,
    /// Empty means `f0 .. f{dim-1}`.
    pub feature_columns: Vec<String>,
}

/// One `(γ, β)` cell of the imbalance grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub gamma: f64,
    pub beta: f64,
}

impl Cell {
    /// Directory name, e.g. `g10_b0.04`.
    pub fn name(&self) -> String {
        format!("g{}_b{}", self.gamma, self.beta)
    }

    /// Column title in the Table 1 layout, e.g. `(10,4%)`.
    pub fn title(&self) -> String {
        format!("({},{}%)", self.gamma, self.beta * 100.0)
    }
}

/// A method row of the results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `lambda_prop = 0`.
    Baseline,
    /// Proportion loss with a hypergeometrically perturbed target.
    Prop,
    /// Proportion loss with the fixed labeled-proportion target.
    PropFixed,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Prop => "prop",
            Variant::PropFixed => "prop_fixed",
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "prop" => Ok(Variant::Prop),
            "prop_fixed" => Ok(Variant::PropFixed),
            _ => Err(format!("unknown variant `{s}` (baseline, prop, prop_fixed)")),
        }
    }

    /// Training config of this variant at proportion weight `lambda`.
    pub fn configure(&self, base: &TrainConfig, lambda: f64) -> TrainConfig {
        match self {
            Variant::Baseline => TrainConfig {
                lambda_prop: 0.0,
                ..base.clone()
            },
            Variant::Prop => TrainConfig {
                lambda_prop: lambda,
                perturb_proportions: true,
                ..base.clone()
            },
            Variant::PropFixed => TrainConfig {
                lambda_prop: lambda,
                perturb_proportions: false,
                ..base.clone()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    /// Empty means the single cell of `[split]`.
    pub cells: Vec<Cell>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleHgConfig {
    pub population: Vec<usize>,
    pub draw_size: usize,
    pub draws: usize,
    pub sample_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    pub sample_hg: SampleHgConfig,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    /// The synthetic desk task.
    fn default() -> Self {
        ExperimentConfig {
            data: DataConfig {
                kind: DataKind::Synthetic,
                dim: 20,
                separation: 3.0,
                csv_path: None,
                label_column: "label".into(),
                feature_columns: Vec::new(),
            },
            split: SplitSpec {
                classes: 6,
                largest_class: 600,
                gamma: 10.0,
                beta: 0.04,
                val_per_class: 50,
                test_per_class: 200,
                seed: 1,
            },
            train: TrainConfig::default(),
            sweep: SweepConfig {
                seeds: vec![1, 2, 3, 4, 5],
                lambdas: vec![0.25, 0.5, 1.0],
                cells: Vec::new(),
                variants: vec![Variant::Baseline, Variant::Prop],
            },
            sample_hg: SampleHgConfig {
                population: vec![2, 2],
                draw_size: 2,
                draws: 1000,
                sample_seed: 0,
            },
            out: PathBuf::from("out"),
        }
    }
}

type Setter = fn(&mut ExperimentConfig, &str) -> std::result::Result<(), String>;
type Getter = fn(&ExperimentConfig) -> String;

struct Key {
    section: &'static str,
    name: &'static str,
    set: Setter,
    get: Getter,
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("`{v}` is not a valid {}", std::any::type_name::<T>()))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(num).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn cells(v: &str) -> std::result::Result<Vec<Cell>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|c| {
            let (g, b) = c
                .split_once(':')
                .ok_or_else(|| format!("cell `{c}` must look like gamma:beta"))?;
            Ok(Cell {
                gamma: num(g)?,
                beta: num(b)?,
            })
        })
        .collect()
}

macro_rules! key {
    ($section:literal, $name:literal, $($field:ident).+, $parse:expr, $show:expr) => {
        Key {
            section: $section,
            name: $name,
            set: |c, v| {
                c.$($field).+ = $parse(v)?;
                Ok(())
            },
            get: |c| $show(&c.$($field).+),
        }
    };
}

fn show<T: ToString>(v: &T) -> String {
    v.to_string()
}

const KEYS: &[Key] = &[
    Key {
        section: "data",
        name: "source",
        set: |c, v| {
            c.data.kind = match v.trim() {
                "synthetic" => DataKind::Synthetic,
                "csv" => DataKind::Csv,
                _ => return Err(format!("`{v}` is not a source (synthetic, csv)")),
            };
            Ok(())
        },
        get: |c| match c.data.kind {
            DataKind::Synthetic => "synthetic".into(),
            DataKind::Csv => "csv".into(),
        },
    },
    key!("data", "dim", data.dim, num, show),
    key!("data", "separation", data.separation, num, show),
    Key {
        section: "data",
        name: "csv_path",
        set: |c, v| {
            c.data.csv_path = (!v.trim().is_empty()).then(|| PathBuf::from(v.trim()));
            Ok(())
        },
        get: |c| c.data.csv_path.as_ref().map_or(String::new(), |p| p.display().to_string()),
    },
    key!("data", "label_column", data.label_column, |v: &str| Ok::<_, String>(v.trim().to_string()), show),
    Key {
        section: "data",
        name: "feature_columns",
        set: |c, v| {
            c.data.feature_columns = v
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            Ok(())
        },
        get: |c| c.data.feature_columns.join(","),
    },
    key!("split", "classes", split.classes, num, show),
    key!("split", "largest_class", split.largest_class, num, show),
    key!("split", "gamma", split.gamma, num, show),
    key!("split", "beta", split.beta, num, show),
    key!("split", "val_per_class", split.val_per_class, num, show),
    key!("split", "test_per_class", split.test_per_class, num, show),
    key!("split", "seed", split.seed, num, show),
    key!("train", "epochs", train.epochs, num, show),
    key!("train", "iters_per_epoch", train.iters_per_epoch, num, show),
    key!("train", "labeled_batch", train.labeled_batch, num, show),
    key!("train", "mu", train.mu, num, show),
    key!("train", "hidden", train.hidden, num, show),
    key!("train", "lr0", train.lr0, num, show),
    key!("train", "momentum", train.momentum, num, show),
    key!("train", "weight_decay", train.weight_decay, num, show),
    key!("train", "tau", train.tau, num, show),
    key!("train", "lambda_u", train.lambda_u, num, show),
    key!("train", "lambda_prop", train.lambda_prop, num, show),
    key!("train", "perturb_proportions", train.perturb_proportions, boolean, show),
    key!("train", "prop_on_strong", train.prop_on_strong, boolean, show),
    key!("train", "prop_epsilon", train.prop_epsilon, num, show),
    key!("train", "weak_noise_sigma", train.weak_noise_sigma, num, show),
    key!("train", "strong_noise_sigma", train.strong_noise_sigma, num, show),
    key!("train", "strong_dropout_rate", train.strong_dropout_rate, num, show),
    key!("sweep", "seeds", sweep.seeds, list, |v: &Vec<u64>| join(v)),
    key!("sweep", "lambdas", sweep.lambdas, list, |v: &Vec<f64>| join(v)),
    key!("sweep", "cells", sweep.cells, cells, |v: &Vec<Cell>| v
        .iter()
        .map(|c| format!("{}:{}", c.gamma, c.beta))
        .collect::<Vec<_>>()
        .join(",")),
    Key {
        section: "sweep",
        name: "variants",
        set: |c, v| {
            c.sweep.variants = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Variant::parse)
                .collect::<std::result::Result<_, _>>()?;
            Ok(())
        },
        get: |c| c.sweep.variants.iter().map(Variant::name).collect::<Vec<_>>().join(","),
    },
    key!("sample_hg", "population", sample_hg.population, list, |v: &Vec<usize>| join(v)),
    key!("sample_hg", "draw_size", sample_hg.draw_size, num, show),
    key!("sample_hg", "draws", sample_hg.draws, num, show),
    key!("sample_hg", "sample_seed", sample_hg.sample_seed, num, show),
    Key {
        section: "output",
        name: "out",
        set: |c, v| {
            c.out = PathBuf::from(v.trim());
            Ok(())
        },
        get: |c| c.out.display().to_string(),
    },
];

const SECTIONS: [&str; 6] = ["data", "split", "train", "sweep", "sample_hg", "output"];

fn find_key(section: Option<&str>, name: &str) -> Option<&'static Key> {
    KEYS.iter()
        .find(|k| k.name == name && section.is_none_or(|s| s == k.section))
}

impl ExperimentConfig {
    /// Sets one value. `key` is `section.name` or a bare `name`.
    pub fn set(&mut self, key: &str, value: &str, location: &str) -> Result<()> {
        let (section, name) = match key.trim().split_once('.') {
            Some((s, n)) => (Some(s), n),
            None => (None, key.trim()),
        };
        let spec = find_key(section, name).ok_or_else(|| match section {
            Some(s) => Error::Config(format!("{location}: unknown key `{name}` in section [{s}]")),
            None => Error::Config(format!("{location}: unknown key `{name}`")),
        })?;
        (spec.set)(self, value).map_err(|m| Error::Config(format!("{location}: key `{}`: {m}", spec.name)))
    }

    /// Parses configuration text on top of the defaults.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text, origin)?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let location = format!("{origin}:{}", i + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("{location}: malformed section header `{line}`")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config(format!("{location}: unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{location}: expected key = value, got `{line}`")))?;
            let k = k.trim();
            let section = section
                .as_deref()
                .ok_or_else(|| Error::Config(format!("{location}: key `{k}` appears before any [section]")))?;
            self.set(&format!("{section}.{k}"), v, &location)?;
        }
        Ok(())
    }

    /// File (if any) then overrides, then validation.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            cfg.apply_text(&text, &p.display().to_string())?;
        }
        for (k, v) in overrides {
            cfg.set(k, v, "--set")?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.train.validate()?;
        for c in &self.sweep.cells {
            SplitSpec {
                gamma: c.gamma,
                beta: c.beta,
                ..self.split.clone()
            }
            .validate()?;
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::Config("key `seeds`: list is empty".into()));
        }
        if self.sweep.lambdas.is_empty() {
            return Err(Error::Config("key `lambdas`: list is empty".into()));
        }
        if self.sweep.variants.is_empty() {
            return Err(Error::Config("key `variants`: list is empty".into()));
        }
        match self.data.kind {
            DataKind::Csv => match &self.data.csv_path {
                None => return Err(Error::Config("key `csv_path` is required when source = csv".into())),
                Some(p) if !p.is_file() => {
                    return Err(Error::Config(format!("key `csv_path`: {} does not exist", p.display())))
                }
                Some(_) => {}
            },
            DataKind::Synthetic => {
                if self.data.dim == 0 {
                    return Err(Error::Config("key `dim` must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// The fully resolved configuration, in the format [`ExperimentConfig::parse`] reads.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, section) in SECTIONS.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            for k in KEYS.iter().filter(|k| k.section == *section) {
                let _ = writeln!(out, "{} = {}", k.name, (k.get)(self));
            }
        }
        out
    }

    /// Writes [`ExperimentConfig::render`] to `dir/config.resolved.txt`.
    pub fn echo_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("config.resolved.txt");
        fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))
    }

    /// Grid cells to run; the `[split]` cell when none are listed.
    pub fn cells(&self) -> Vec<Cell> {
        if self.sweep.cells.is_empty() {
            vec![Cell {
                gamma: self.split.gamma,
                beta: self.split.beta,
            }]
        } else {
            self.sweep.cells.clone()
        }
    }

    pub fn split_for(&self, cell: Cell) -> SplitSpec {
        SplitSpec {
            gamma: cell.gamma,
            beta: cell.beta,
            ..self.split.clone()
        }
    }

    pub fn data_source(&self) -> Result<DataSource> {
        match self.data.kind {
            DataKind::Synthetic => Ok(DataSource::Synthetic {
                dim: self.data.dim,
                separation: self.data.separation,
            }),
            DataKind::Csv => {
                let path = self
                    .data
                    .csv_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("key `csv_path` is required when source = csv".into()))?;
                let features = if self.data.feature_columns.is_empty() {
                    (0..self.data.dim).map(|i| format!("f{i}")).collect()
                } else {
                    self.data.feature_columns.clone()
                };
                let schema = CsvSchema {
                    feature_columns: features,
                    label_column: self.data.label_column.clone(),
                    num_classes: self.split.classes,
                };
                let loaded = load_csv(path, &schema)?;
                for w in &loaded.warnings {
                    eprintln!("warning: {w}");
                }
                Ok(DataSource::Pools(loaded.pools))
            }
        }
    }
}

/// Splits `key=value` as given to `--set`.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{arg}`")))
}
