//! FixMatch-style training with an optional proportion regularizer.
//!
//! Every iteration draws a labeled batch and `μ` times as many unlabeled
//! samples, makes a weak and a strong view of the unlabeled batch, and
//! minimizes
//!
//! ```text
//! CE(labeled) + λ_u · consistency(weak → strong) + λ_prop · proportion(view, target)
//! ```
//!
//! The proportion target is the labeled class frequency `q̂`, or, with
//! perturbation enabled, the class frequencies of a multivariate
//! hypergeometric draw of one batch from an unlabeled pool of size `M`
//! composed according to `q̂`.

mod augment;
pub mod metrics;
mod seeds;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use augment::{augment_strong, augment_weak};
pub use metrics::{evaluate, evaluate_with_threshold, Evaluation, MetricsRecord};
pub use seeds::{
    run_seeds, run_single_seed, run_splits, select_max, sweep_lambdas, DataSource, LambdaSweep, MetricStat, SeedRun,
    SeedSweep,
};

use crate::error::{Error, Result};
use crate::hypergeom::{self, ProportionVector};
use crate::losses::{
    combined_loss, consistency_loss, proportion_loss, supervised_ce, Branch, BranchGrads, LossAux, LossOutput,
};
use crate::ltdata::{feature_matrix, DatasetSplit, Sample, UnlabeledView};
use crate::matrix::Matrix;
use crate::nn::{backward, cosine_lr, forward, sgd_step, LayerSizes, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub labeled_batch: usize,
    /// Unlabeled batch size is `mu * labeled_batch`.
    pub mu: usize,
    pub hidden: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Confidence threshold for pseudo-labels.
    pub tau: f64,
    pub lambda_u: f64,
    pub lambda_prop: f64,
    pub perturb_proportions: bool,
    /// Apply the proportion loss to the strong view instead of the weak one.
    pub prop_on_strong: bool,
    pub prop_epsilon: f64,
    pub weak_noise_sigma: f64,
    pub strong_noise_sigma: f64,
    pub strong_dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            iters_per_epoch: 50,
            labeled_batch: 16,
            mu: 7,
            hidden: 64,
            lr0: 0.03,
            momentum: 0.9,
            weight_decay: 5e-4,
            tau: 0.95,
            lambda_u: 1.0,
            lambda_prop: 0.0,
            perturb_proportions: true,
            prop_on_strong: false,
            prop_epsilon: crate::losses::PROPORTION_EPSILON,
            weak_noise_sigma: 0.1,
            strong_noise_sigma: 0.4,
            strong_dropout_rate: 0.02,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn unlabeled_batch(&self) -> usize {
        self.mu * self.labeled_batch
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.labeled_batch == 0 || self.mu == 0 || self.hidden == 0 {
            return fail("labeled_batch, mu and hidden must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return fail(format!("tau = {} must lie in [0, 1]", self.tau));
        }
        if !(0.0..1.0).contains(&self.strong_dropout_rate) {
            return fail(format!("strong_dropout_rate = {} must lie in [0, 1)", self.strong_dropout_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail(format!("momentum = {} must lie in [0, 1)", self.momentum));
        }
        let nonneg = [
            ("lr0", self.lr0),
            ("weight_decay", self.weight_decay),
            ("lambda_u", self.lambda_u),
            ("lambda_prop", self.lambda_prop),
            ("prop_epsilon", self.prop_epsilon),
            ("weak_noise_sigma", self.weak_noise_sigma),
            ("strong_noise_sigma", self.strong_noise_sigma),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} = {v} must be a finite value >= 0"));
            }
        }
        Ok(())
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Epoch with the highest validation accuracy, earliest on ties.
    pub best_epoch: usize,
    pub best_validation_accuracy: f64,
    pub test_accuracy_at_best: f64,
    /// One record per epoch, starting with the initialization at epoch 0.
    pub records: Vec<MetricsRecord>,
    pub final_params: ModelParams,
    pub best_params: ModelParams,
    pub config: TrainConfig,
    /// True class composition of the unlabeled pool.
    pub true_unlabeled_proportions: ProportionVector,
    /// Number of multivariate hypergeometric draws taken.
    pub hypergeom_draws: usize,
    pub total_steps: usize,
}

impl RunResult {
    pub fn best_record(&self) -> &MetricsRecord {
        &self.records[self.best_epoch]
    }
}

/// Supervision target for the proportion loss.
///
/// Without perturbation this is `q_hat`. With it, a population of size
/// `population` is formed from `q_hat` and one batch is drawn from it; the
/// drawn class frequencies are the target.
pub fn proportion_target<R: Rng + ?Sized>(
    q_hat: &ProportionVector,
    population: usize,
    batch_size: usize,
    perturb: bool,
    rng: &mut R,
) -> Result<ProportionVector> {
    if !perturb {
        return Ok(q_hat.clone());
    }
    if batch_size == 0 || batch_size > population {
        return Err(Error::Argument(format!(
            "batch size {batch_size} must lie in 1..={population}"
        )));
    }
    let pool = hypergeom::population_from_proportions(q_hat, population);
    let draw = hypergeom::sample(&pool, batch_size, rng)?;
    ProportionVector::new(
        draw.as_slice()
            .iter()
            .map(|&c| c as f64 / batch_size as f64)
            .collect(),
    )
}

/// Cycles through a shuffled index set, reshuffling after each pass.
struct IndexCycler {
    order: Vec<usize>,
    pos: usize,
}

impl IndexCycler {
    fn new<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        IndexCycler { order, pos: 0 }
    }

    fn next_batch<R: Rng + ?Sized>(&mut self, size: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            out.push(self.order[self.pos]);
            self.pos += 1;
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
        }
        out
    }
}

/// Independent random streams of one run.
struct Streams {
    init: ChaCha8Rng,
    batches: ChaCha8Rng,
    augment: ChaCha8Rng,
    proportions: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            init: stream(1),
            batches: stream(2),
            augment: stream(3),
            proportions: stream(4),
        }
    }
}

/// Inputs the objective may see in one iteration. There is no route from here
/// to unlabeled ground truth.
struct StepBatch<'a> {
    labeled: &'a [Sample],
    labeled_idx: &'a [usize],
    unlabeled: UnlabeledView<'a>,
    unlabeled_idx: &'a [usize],
}

struct StepOutcome {
    sup: f64,
    cons: f64,
    prop: f64,
    mask_rate: f64,
}

struct Objective<'a> {
    config: &'a TrainConfig,
    q_hat: ProportionVector,
    population: usize,
}

impl Objective<'_> {
    /// Forward, loss, backward and one SGD step. `PROP = false` removes the
    /// proportion branch from the compiled path.
    fn step<const PROP: bool>(
        &self,
        params: &mut ModelParams,
        batch: &StepBatch<'_>,
        lr: f64,
        streams: &mut Streams,
        draws: &mut usize,
    ) -> Result<StepOutcome> {
        let cfg = self.config;
        let dim = params.sizes.input;
        let x_l = feature_matrix(batch.labeled_idx.iter().map(|&i| batch.labeled[i].features.as_slice()), dim);
        let y_l: Vec<usize> = batch
            .labeled_idx
            .iter()
            .map(|&i| batch.labeled[i].label.expect("labeled sample without label"))
            .collect();
        let u = feature_matrix(batch.unlabeled_idx.iter().map(|&i| batch.unlabeled.features(i)), dim);

        let x_l = augment_weak(&x_l, cfg.weak_noise_sigma, &mut streams.augment);
        let weak = augment_weak(&u, cfg.weak_noise_sigma, &mut streams.augment);
        let strong = augment_strong(&u, cfg.strong_noise_sigma, cfg.strong_dropout_rate, &mut streams.augment);

        let (nl, nu) = (x_l.rows(), u.rows());
        let inputs = Matrix::vstack(&[&x_l, &weak, &strong]);
        let (logits, cache) = forward(params, &inputs)?;
        let logits_l = logits.slice_rows(0, nl);
        let logits_w = logits.slice_rows(nl, nl + nu);
        let logits_s = logits.slice_rows(nl + nu, nl + 2 * nu);

        let sup = supervised_ce(&logits_l, &y_l)?;
        let cons = consistency_loss(&logits_w, &logits_s, cfg.tau)?;
        let prop = if PROP && cfg.lambda_prop != 0.0 {
            let target = proportion_target(
                &self.q_hat,
                self.population,
                nu,
                cfg.perturb_proportions,
                &mut streams.proportions,
            )?;
            if cfg.perturb_proportions {
                *draws += 1;
            }
            if cfg.prop_on_strong {
                proportion_loss(&logits_s, &target, cfg.prop_epsilon)?.moved_to(Branch::Strong)
            } else {
                proportion_loss(&logits_w, &target, cfg.prop_epsilon)?
            }
        } else {
            LossOutput {
                value: 0.0,
                grads: BranchGrads::default(),
                aux: LossAux::default(),
            }
        };
        let total = combined_loss(&sup, &cons, &prop, cfg.lambda_u, cfg.lambda_prop);
        if !total.value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss (sup {}, cons {}, prop {}) at lr {lr}; labeled batch {:?}; unlabeled batch {:?}",
                sup.value, cons.value, prop.value, batch.labeled_idx, batch.unlabeled_idx
            )));
        }

        let k = params.sizes.classes;
        let part = |g: Option<&Matrix>, rows: usize| g.cloned().unwrap_or_else(|| Matrix::zeros(rows, k));
        let grad_logits = Matrix::vstack(&[
            &part(total.grads.get(Branch::Labeled), nl),
            &part(total.grads.get(Branch::Weak), nu),
            &part(total.grads.get(Branch::Strong), nu),
        ]);
        let grads = backward(params, &cache, &grad_logits)?;
        sgd_step(params, &grads, lr, cfg.momentum, cfg.weight_decay)?;
        if !params.weights.all_finite() {
            return Err(Error::Numerical(format!(
                "parameters became non-finite at lr {lr}; labeled batch {:?}; unlabeled batch {:?}",
                batch.labeled_idx, batch.unlabeled_idx
            )));
        }
        Ok(StepOutcome {
            sup: sup.value,
            cons: cons.value,
            prop: prop.value,
            mask_rate: cons.aux.mask_rate.unwrap_or(0.0),
        })
    }
}

fn check_split(split: &DatasetSplit, config: &TrainConfig) -> Result<()> {
    let degenerate = |m: String| Err(Error::Data(format!("degenerate split: {m}")));
    if split.labeled.is_empty() {
        return degenerate("no labeled samples".into());
    }
    if let Some(k) = split.class_counts_labeled.as_slice().iter().position(|&c| c == 0) {
        return degenerate(format!("class {k} has no labeled sample"));
    }
    if split.unlabeled.is_empty() {
        return degenerate("no unlabeled samples".into());
    }
    if split.validation.is_empty() || split.test.is_empty() {
        return degenerate("validation and test sets must be non-empty".into());
    }
    if config.lambda_prop != 0.0 && config.perturb_proportions && config.unlabeled_batch() > split.unlabeled.len() {
        return degenerate(format!(
            "unlabeled batch {} exceeds the unlabeled pool of {}",
            config.unlabeled_batch(),
            split.unlabeled.len()
        ));
    }
    Ok(())
}

/// Trains with the full objective.
pub fn train(split: &DatasetSplit, config: &TrainConfig) -> Result<RunResult> {
    train_impl::<true>(split, config)
}

/// Trains the FixMatch-style baseline, with the proportion branch compiled out.
/// `config.lambda_prop` is ignored.
pub fn train_baseline(split: &DatasetSplit, config: &TrainConfig) -> Result<RunResult> {
    train_impl::<false>(split, config)
}

fn train_impl<const PROP: bool>(split: &DatasetSplit, config: &TrainConfig) -> Result<RunResult> {
    config.validate()?;
    check_split(split, config)?;
    let sizes = LayerSizes {
        input: split.feature_dim(),
        hidden: config.hidden,
        classes: split.num_classes(),
    };
    let mut streams = Streams::new(config.seed);
    let mut params = ModelParams::init(sizes, &mut streams.init);
    let objective = Objective {
        config,
        q_hat: split.labeled_proportions()?,
        population: split.unlabeled.len(),
    };
    let unlabeled_view = split.unlabeled.view();
    // Evaluation-only copy of the unlabeled pool with ground truth attached.
    let unlabeled_eval = split.unlabeled.as_samples();
    let true_props = split.class_counts_unlabeled().proportions()?;

    let mut labeled_cycle = IndexCycler::new(split.labeled.len(), &mut streams.batches);
    let mut unlabeled_cycle = IndexCycler::new(unlabeled_view.len(), &mut streams.batches);
    let total_steps = config.epochs * config.iters_per_epoch;

    let eval_epoch = |params: &ModelParams, epoch: usize, sums: [f64; 4], lr: f64| -> Result<MetricsRecord> {
        let val = evaluate(params, &split.validation)?;
        let test = evaluate(params, &split.test)?;
        let unl = evaluate_with_threshold(params, &unlabeled_eval, config.tau)?;
        Ok(MetricsRecord {
            epoch,
            loss_sup: sums[0],
            loss_cons: sums[1],
            loss_prop: sums[2],
            mask_rate: sums[3],
            learning_rate: lr,
            val_balanced_accuracy: val.balanced_accuracy,
            balanced_test_accuracy: test.balanced_accuracy,
            per_class_test_recall: test.per_class_recall,
            estimated_unlabeled_proportions: unl.mean_softmax,
            argmax_proportions: unl.argmax_proportions,
            pseudo_label_recall_per_class: unl.confident_recall,
        })
    };

    let mut records = vec![eval_epoch(&params, 0, [0.0; 4], config.lr0)?];
    let mut best_epoch = 0;
    let mut best_params = params.clone();
    let mut draws = 0usize;

    for epoch in 1..=config.epochs {
        let mut sums = [0.0; 4];
        let mut lr = config.lr0;
        for it in 0..config.iters_per_epoch {
            let step = (epoch - 1) * config.iters_per_epoch + it;
            lr = cosine_lr(step, total_steps, config.lr0);
            let labeled_idx = labeled_cycle.next_batch(config.labeled_batch, &mut streams.batches);
            let unlabeled_idx = unlabeled_cycle.next_batch(config.unlabeled_batch(), &mut streams.batches);
            let batch = StepBatch {
                labeled: &split.labeled,
                labeled_idx: &labeled_idx,
                unlabeled: unlabeled_view,
                unlabeled_idx: &unlabeled_idx,
            };
            let out = objective
                .step::<PROP>(&mut params, &batch, lr, &mut streams, &mut draws)
                .map_err(|e| match e {
                    Error::Numerical(m) => Error::Numerical(format!("epoch {epoch} iteration {it}: {m}")),
                    other => other,
                })?;
            sums[0] += out.sup;
            sums[1] += out.cons;
            sums[2] += out.prop;
            sums[3] += out.mask_rate;
        }
        let iters = config.iters_per_epoch.max(1) as f64;
        sums.iter_mut().for_each(|s| *s /= iters);
        let record = eval_epoch(&params, epoch, sums, lr)?;
        if record.val_balanced_accuracy > records[best_epoch].val_balanced_accuracy {
            best_epoch = epoch;
            best_params = params.clone();
        }
        records.push(record);
    }

    Ok(RunResult {
        best_epoch,
        best_validation_accuracy: records[best_epoch].val_balanced_accuracy,
        test_accuracy_at_best: records[best_epoch].balanced_test_accuracy,
        records,
        final_params: params,
        best_params,
        config: config.clone(),
        true_unlabeled_proportions: true_props,
        hypergeom_draws: draws,
        total_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergeom::ClassCounts;

    #[test]
    fn unperturbed_target_is_q_hat() {
        let q = ProportionVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(proportion_target(&q, 100, 10, false, &mut rng).unwrap(), q);
    }

    #[test]
    fn full_draw_returns_rounded_population() {
        let q = ProportionVector::new(vec![0.7, 0.2, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = proportion_target(&q, 20, 20, true, &mut rng).unwrap();
        let pop = hypergeom::population_from_proportions(&q, 20);
        assert_eq!(pop, ClassCounts::new(vec![14, 4, 2]));
        assert_eq!(t.as_slice(), &[0.7, 0.2, 0.1]);
    }

    #[test]
    fn oversized_batch_is_rejected() {
        let q = ProportionVector::uniform(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(proportion_target(&q, 5, 6, true, &mut rng).is_err());
        assert!(proportion_target(&q, 5, 6, false, &mut rng).is_ok());
    }

    #[test]
    fn cycler_visits_everything_each_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = IndexCycler::new(5, &mut rng);
        let mut first = c.next_batch(5, &mut rng);
        first.sort();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.next_batch(12, &mut rng).len(), 12);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { tau: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { strong_dropout_rate: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { lambda_prop: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
