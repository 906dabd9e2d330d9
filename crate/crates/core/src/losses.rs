//! Training objectives with analytic gradients with respect to logits.
//!
//! Each loss reports its gradient against the batch branch it consumed:
//! labeled logits, weak-view unlabeled logits, or strong-view unlabeled
//! logits. [`combined_loss`] adds the branches with their weights.

use crate::error::{Error, Result};
use crate::hypergeom::ProportionVector;
use crate::matrix::Matrix;
use crate::nn::{softmax, LogitMatrix};

/// Default stabilizer inside the proportion-loss logarithm.
pub const PROPORTION_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Labeled,
    Weak,
    Strong,
}

/// Logit gradients keyed by input branch. `None` means the loss does not
/// touch that branch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchGrads {
    pub labeled: Option<Matrix>,
    pub weak: Option<Matrix>,
    pub strong: Option<Matrix>,
}

impl BranchGrads {
    pub fn get(&self, branch: Branch) -> Option<&Matrix> {
        match branch {
            Branch::Labeled => self.labeled.as_ref(),
            Branch::Weak => self.weak.as_ref(),
            Branch::Strong => self.strong.as_ref(),
        }
    }

    fn slot(&mut self, branch: Branch) -> &mut Option<Matrix> {
        match branch {
            Branch::Labeled => &mut self.labeled,
            Branch::Weak => &mut self.weak,
            Branch::Strong => &mut self.strong,
        }
    }

    fn accumulate(&mut self, other: &BranchGrads, coeff: f64) {
        for branch in [Branch::Labeled, Branch::Weak, Branch::Strong] {
            if let Some(g) = other.get(branch) {
                match self.slot(branch) {
                    Some(acc) => acc.add_scaled(g, coeff),
                    slot @ None => {
                        let mut g = g.clone();
                        g.scale(coeff);
                        *slot = Some(g);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossAux {
    /// Fraction of unlabeled samples whose pseudo-label passed the threshold.
    pub mask_rate: Option<f64>,
    /// Confident pseudo-labels per class.
    pub pseudo_label_counts: Option<Vec<usize>>,
    /// Batch-mean predicted proportions.
    pub batch_proportions: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grads: BranchGrads,
    pub aux: LossAux,
}

impl LossOutput {
    /// Re-labels every gradient as belonging to `branch`. Used to apply the
    /// proportion loss to the strong view instead of the weak one.
    pub fn moved_to(mut self, branch: Branch) -> Self {
        let g = self
            .grads
            .labeled
            .take()
            .or(self.grads.weak.take())
            .or(self.grads.strong.take());
        let mut grads = BranchGrads::default();
        *grads.slot(branch) = g;
        self.grads = grads;
        self
    }
}

/// Cross-entropy between `target` and the batch-mean softmax:
/// `−Σ_l q_l log(p̂_l + ε)` with `p̂ = mean_i softmax(z_i)`.
pub fn proportion_loss(logits: &LogitMatrix, target: &ProportionVector, epsilon: f64) -> Result<LossOutput> {
    let n = logits.rows();
    let k = logits.cols();
    if n == 0 {
        return Err(Error::Argument("proportion loss needs a non-empty batch".into()));
    }
    if target.num_classes() != k {
        return Err(Error::Argument(format!(
            "target has {} classes, logits have {k}",
            target.num_classes()
        )));
    }
    let probs = softmax(logits);
    let mut mean = vec![0.0; k];
    for row in probs.iter_rows() {
        for (m, p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let q = target.as_slice();
    let mut value = 0.0;
    // a_l = ∂L/∂p_il = −q_l / (n (p̂_l + ε)), identical for every row i.
    let mut a = vec![0.0; k];
    for l in 0..k {
        if q[l] == 0.0 {
            continue;
        }
        value -= q[l] * (mean[l] + epsilon).ln();
        a[l] = -q[l] / (n as f64 * (mean[l] + epsilon));
    }

    let mut grad = Matrix::zeros(n, k);
    for i in 0..n {
        let p = probs.row(i);
        let inner: f64 = a.iter().zip(p).map(|(al, pl)| al * pl).sum();
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = p[j] * (a[j] - inner);
        }
    }
    Ok(LossOutput {
        value,
        grads: BranchGrads {
            weak: Some(grad),
            ..Default::default()
        },
        aux: LossAux {
            batch_proportions: Some(mean),
            ..Default::default()
        },
    })
}

/// Mean negative log-likelihood of `labels` (0-based) under softmax(logits).
pub fn supervised_ce(logits: &LogitMatrix, labels: &[usize]) -> Result<LossOutput> {
    let n = logits.rows();
    if n == 0 {
        return Err(Error::Argument("cross-entropy needs a non-empty batch".into()));
    }
    if labels.len() != n {
        return Err(Error::Argument(format!(
            "{} labels for {n} logit rows",
            labels.len()
        )));
    }
    let k = logits.cols();
    if let Some(bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Argument(format!("label {bad} out of range for {k} classes")));
    }
    let mut value = 0.0;
    let mut grad = softmax(logits);
    for (i, &y) in labels.iter().enumerate() {
        value -= log_softmax_at(logits.row(i), y);
        let row = grad.row_mut(i);
        row[y] -= 1.0;
        row.iter_mut().for_each(|g| *g /= n as f64);
    }
    Ok(LossOutput {
        value: value / n as f64,
        grads: BranchGrads {
            labeled: Some(grad),
            ..Default::default()
        },
        aux: LossAux::default(),
    })
}

/// Thresholded hard pseudo-label consistency.
///
/// Pseudo-labels come from the weak view with no gradient; the strong view is
/// trained toward them where the weak confidence is at least `tau`. The sum is
/// divided by the full batch size, masked rows included.
pub fn consistency_loss(weak: &LogitMatrix, strong: &LogitMatrix, tau: f64) -> Result<LossOutput> {
    if weak.shape() != strong.shape() {
        return Err(Error::Argument(format!(
            "weak view {:?} and strong view {:?} differ in shape",
            weak.shape(),
            strong.shape()
        )));
    }
    let (n, k) = weak.shape();
    if n == 0 {
        return Err(Error::Argument("consistency loss needs a non-empty batch".into()));
    }
    let weak_probs = softmax(weak);
    let strong_probs = softmax(strong);
    let mut value = 0.0;
    let mut kept = 0usize;
    let mut counts = vec![0usize; k];
    let mut grad = Matrix::zeros(n, k);
    for i in 0..n {
        let (label, confidence) = argmax(weak_probs.row(i));
        if confidence < tau {
            continue;
        }
        kept += 1;
        counts[label] += 1;
        value -= log_softmax_at(strong.row(i), label);
        let g = grad.row_mut(i);
        g.copy_from_slice(strong_probs.row(i));
        g[label] -= 1.0;
        g.iter_mut().for_each(|x| *x /= n as f64);
    }
    Ok(LossOutput {
        value: value / n as f64,
        grads: BranchGrads {
            weak: Some(Matrix::zeros(n, k)),
            strong: Some(grad),
            ..Default::default()
        },
        aux: LossAux {
            mask_rate: Some(kept as f64 / n as f64),
            pseudo_label_counts: Some(counts),
            ..Default::default()
        },
    })
}

/// `sup + λ_u · cons + λ_prop · prop`, branch by branch.
pub fn combined_loss(
    sup: &LossOutput,
    cons: &LossOutput,
    prop: &LossOutput,
    lambda_u: f64,
    lambda_prop: f64,
) -> LossOutput {
    let mut grads = BranchGrads::default();
    grads.accumulate(&sup.grads, 1.0);
    grads.accumulate(&cons.grads, lambda_u);
    grads.accumulate(&prop.grads, lambda_prop);
    LossOutput {
        value: sup.value + lambda_u * cons.value + lambda_prop * prop.value,
        grads,
        aux: LossAux {
            mask_rate: cons.aux.mask_rate,
            pseudo_label_counts: cons.aux.pseudo_label_counts.clone(),
            batch_proportions: prop.aux.batch_proportions.clone(),
        },
    }
}

/// Index and value of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = j;
        }
    }
    (best, row[best])
}

fn log_softmax_at(row: &[f64], class: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    row[class] - lse
}
