//! Exact multivariate hypergeometric distribution.
//!
//! A population is a [`ClassCounts`] vector `c` with `M = Σ c_l` items. Drawing
//! `n` items without replacement yields per-class counts `k` with probability
//!
//! ```text
//! P(k) = Π_l C(c_l, k_l) / C(M, n)
//! ```
//!
//! Sampling conditions class by class: the count of class `l` is a univariate
//! hypergeometric draw from what is left of the population after classes
//! `0..l`, and the last class takes whatever remains. Each univariate draw is
//! an inverse-CDF walk over log-space probabilities, so it is exact for any
//! population size that fits in memory.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ p = 1` for a [`ProportionVector`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Nonnegative per-class sample counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassCounts(Vec<usize>);

impl ClassCounts {
    pub fn new(counts: Vec<usize>) -> Self {
        ClassCounts(counts)
    }

    pub fn zeros(num_classes: usize) -> Self {
        ClassCounts(vec![0; num_classes])
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, class: usize) -> usize {
        self.0[class]
    }

    /// Relative frequencies. Fails on an all-zero vector.
    pub fn proportions(&self) -> Result<ProportionVector> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Validation(
                "cannot form proportions from empty class counts".into(),
            ));
        }
        ProportionVector::new(self.0.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for ClassCounts {
    fn from(counts: Vec<usize>) -> Self {
        ClassCounts(counts)
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProportionVector(Vec<f64>);

impl ProportionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("proportion vector is empty".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::Validation(format!(
                "proportion entry {i} = {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::Validation(format!(
                "proportions sum to {sum}, expected 1"
            )));
        }
        Ok(ProportionVector(probs))
    }

    pub fn uniform(num_classes: usize) -> Self {
        ProportionVector(vec![1.0 / num_classes as f64; num_classes])
    }

    /// Normalizes nonnegative weights. Fails if they sum to zero.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Validation(format!(
                "cannot normalize weights {weights:?}"
            )));
        }
        ProportionVector::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, class: usize) -> f64 {
        self.0[class]
    }

    /// `Σ |self_l − other_l|`.
    pub fn l1_distance(&self, other: &ProportionVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Rounds `M · q` to integer counts summing exactly to `M`.
///
/// Each class gets `floor(M q_l)`; leftover units go to the largest fractional
/// parts, lower class index first on ties.
pub fn population_from_proportions(q: &ProportionVector, size: usize) -> ClassCounts {
    let sum: f64 = q.as_slice().iter().sum();
    let scaled: Vec<f64> = q.as_slice().iter().map(|p| p / sum * size as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let frac: Vec<f64> = scaled
        .iter()
        .zip(&counts)
        .map(|(x, c)| x - *c as f64)
        .collect();

    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps lower indices first among equal fractional parts.
    order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));

    let assigned: usize = counts.iter().sum();
    if assigned <= size {
        for &class in order.iter().cycle().take(size - assigned) {
            counts[class] += 1;
        }
    } else {
        // Only reachable through floating-point excess; take back from the
        // smallest fractional parts.
        let mut excess = assigned - size;
        for &class in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if counts[class] > 0 {
                counts[class] -= 1;
                excess -= 1;
            }
        }
    }
    ClassCounts(counts)
}

/// Univariate hypergeometric draw by inverse CDF: the number of marked items
/// among `draws` taken from `total` items of which `marked` are marked.
fn draw_univariate<R: Rng + ?Sized>(total: usize, marked: usize, draws: usize, rng: &mut R) -> usize {
    let lo = draws.saturating_sub(total - marked);
    let hi = marked.min(draws);
    if lo == hi {
        return lo;
    }
    let ln_denom = ln_choose(total, draws);
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for k in lo..=hi {
        cumulative += (ln_choose(marked, k) + ln_choose(total - marked, draws - k) - ln_denom).exp();
        if u < cumulative {
            return k;
        }
    }
    hi
}

/// Draws `n` items without replacement from `population` and returns the
/// per-class counts.
pub fn sample<R: Rng + ?Sized>(population: &ClassCounts, n: usize, rng: &mut R) -> Result<ClassCounts> {
    let mut remaining_total = population.total();
    if n > remaining_total {
        return Err(Error::Argument(format!(
            "cannot draw {n} items from a population of {remaining_total}"
        )));
    }
    let classes = population.num_classes();
    let mut remaining_draws = n;
    let mut out = Vec::with_capacity(classes);
    for (l, &count) in population.as_slice().iter().enumerate() {
        let k = if l + 1 == classes {
            remaining_draws
        } else {
            draw_univariate(remaining_total, count, remaining_draws, rng)
        };
        out.push(k);
        remaining_total -= count;
        remaining_draws -= k;
    }
    Ok(ClassCounts(out))
}

/// Log-probability of `draw` under sampling `Σ draw` items from `population`.
pub fn ln_pmf(population: &ClassCounts, draw: &ClassCounts) -> Result<f64> {
    if population.num_classes() != draw.num_classes() {
        return Err(Error::Argument(format!(
            "draw has {} classes, population has {}",
            draw.num_classes(),
            population.num_classes()
        )));
    }
    let mut ln_num = 0.0;
    for (l, (&c, &k)) in population.as_slice().iter().zip(draw.as_slice()).enumerate() {
        if k > c {
            return Err(Error::Argument(format!(
                "draw takes {k} items of class {l} but the population holds {c}"
            )));
        }
        ln_num += ln_choose(c, k);
    }
    Ok(ln_num - ln_choose(population.total(), draw.total()))
}

pub fn pmf(population: &ClassCounts, draw: &ClassCounts) -> Result<f64> {
    ln_pmf(population, draw).map(f64::exp)
}

/// Closed-form mean vector and covariance matrix of a size-`n` draw.
pub fn mean_and_covariance(population: &ClassCounts, n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let total = population.total();
    if n > total {
        return Err(Error::Argument(format!(
            "cannot draw {n} items from a population of {total}"
        )));
    }
    let k = population.num_classes();
    if total == 0 {
        return Ok((vec![0.0; k], vec![vec![0.0; k]; k]));
    }
    let m = total as f64;
    let nf = n as f64;
    let share: Vec<f64> = population.as_slice().iter().map(|&c| c as f64 / m).collect();
    let mean = share.iter().map(|s| nf * s).collect();
    let mut cov = vec![vec![0.0; k]; k];
    if total > 1 {
        let fpc = (m - nf) / (m - 1.0);
        for l in 0..k {
            for j in 0..k {
                let delta = if l == j { 1.0 } else { 0.0 };
                cov[l][j] = nf * share[l] * (delta - share[j]) * fpc;
            }
        }
    }
    Ok((mean, cov))
}
