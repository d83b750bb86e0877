//! Linear probe: multinomial logistic regression on frozen features,
//! evaluated with stratified k-fold cross-validation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub folds: usize,
    /// L2 penalty on the weights (not the intercepts).
    pub l2: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { folds: 10, l2: 1e-4, seed: 42, max_iter: 5000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Softmax regression over standardized features, fit by full-batch gradient
/// descent with step `1/L` for a bound `L` on the loss curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    classes: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `classes x (dim + 1)`, intercept last.
    weights: Vec<f64>,
    pub iterations: usize,
}

impl LogisticRegression {
    pub fn fit(x: &[&[f64]], y: &[usize], classes: usize, cfg: &ProbeConfig) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::EmptyInput("training examples"));
        }
        let dim = x[0].len();
        if let Some(bad) = x.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
        }
        if let Some(&label) = y.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let mut mean = vec![0.0; dim];
        for r in x {
            for (m, &v) in mean.iter_mut().zip(*r) {
                *m += v / n as f64;
            }
        }
        let mut scale = vec![0.0; dim];
        for r in x {
            for ((s, &v), &m) in scale.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m) / n as f64;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { 1.0 / libm::sqrt(*s) } else { 1.0 };
        }
        let mut model = Self { classes, mean, scale, weights: vec![0.0; classes * (dim + 1)], iterations: 0 };
        let xs: Vec<Vec<f64>> = x.iter().map(|r| model.features(r)).collect();

        let step = 1.0 / (0.5 * 1.1 * top_eigenvalue(&xs) + cfg.l2);
        let width = dim + 1;
        let mut grad = vec![0.0; model.weights.len()];
        let mut probs = vec![0.0; classes];
        for it in 0..cfg.max_iter {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (row, &label) in xs.iter().zip(y) {
                model.softmax(row, &mut probs);
                for c in 0..classes {
                    let err = (probs[c] - if c == label { 1.0 } else { 0.0 }) / n as f64;
                    let g = &mut grad[c * width..(c + 1) * width];
                    for (gk, &xk) in g.iter_mut().zip(row) {
                        *gk += err * xk;
                    }
                }
            }
            for c in 0..classes {
                for k in 0..dim {
                    grad[c * width + k] += cfg.l2 * model.weights[c * width + k];
                }
            }
            let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
            model.iterations = it;
            if norm < cfg.tol {
                break;
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= step * g;
            }
            model.iterations = it + 1;
        }
        Ok(model)
    }

    /// Standardized features with a trailing 1.
    fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&self.mean).zip(&self.scale).map(|((&v, &m), &s)| (v - m) * s).collect();
        out.push(1.0);
        out
    }

    fn softmax(&self, row: &[f64], out: &mut [f64]) {
        let width = row.len();
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.weights[c * width..(c + 1) * width].iter().zip(row).map(|(w, x)| w * x).sum();
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for o in out.iter_mut() {
            *o = libm::exp(*o - max);
            z += *o;
        }
        out.iter_mut().for_each(|o| *o /= z);
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let row = self.features(x);
        let mut probs = vec![0.0; self.classes];
        self.softmax(&row, &mut probs);
        // first maximal class on ties
        let mut best = 0;
        for c in 1..self.classes {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        best
    }
}

/// Largest eigenvalue of `X^T X / n` by power iteration.
fn top_eigenvalue(xs: &[Vec<f64>]) -> f64 {
    let dim = xs[0].len();
    let n = xs.len() as f64;
    let mut v = vec![1.0 / libm::sqrt(dim as f64); dim];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mut next = vec![0.0; dim];
        for row in xs {
            let p: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (nk, &xk) in next.iter_mut().zip(row) {
                *nk += p * xk / n;
            }
        }
        let norm = libm::sqrt(next.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            return 1.0;
        }
        lambda = norm;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    lambda.max(1e-12)
}

/// Fold index for each example; every class is spread round-robin over the
/// folds after a seeded shuffle.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let mut assignment = vec![0; labels.len()];
    let mut r = rng::seeded(seed, rng::stream::PROBE);
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::ClassTooSmall { class, count: members.len(), folds });
        }
        rng::shuffle(&mut r, &mut members);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// k-fold accuracy of a logistic-regression probe on fixed features.
pub fn probe_classification(features: &[Vec<f64>], labels: &[usize], cfg: &ProbeConfig) -> Result<ProbeReport> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), found: labels.len() });
    }
    if features.is_empty() {
        return Err(Error::EmptyInput("labeled examples"));
    }
    let classes = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
    let fold_of = stratified_folds(labels, cfg.folds, cfg.seed)?;
    let mut fold_accuracies = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let (mut train_x, mut train_y) = (Vec::new(), Vec::new());
        for (i, f) in features.iter().enumerate() {
            if fold_of[i] != fold {
                train_x.push(f.as_slice());
                train_y.push(labels[i]);
            }
        }
        let clf = LogisticRegression::fit(&train_x, &train_y, classes, cfg)?;
        let (mut correct, mut total) = (0usize, 0usize);
        for (i, f) in features.iter().enumerate() {
            if fold_of[i] == fold {
                total += 1;
                correct += usize::from(clf.predict(f) == labels[i]);
            }
        }
        fold_accuracies.push(correct as f64 / total as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(ProbeReport { fold_accuracies, mean_accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n_per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng::seeded(seed, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for class in 0..2 {
            for _ in 0..n_per {
                let mut v: Vec<f64> = (0..4).map(|_| r.random::<f64>() - 0.5).collect();
                v[0] += if class == 0 { -2.0 } else { 2.0 };
                x.push(v);
                y.push(class);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_are_classified_perfectly() {
        let (x, y) = blobs(30, 1);
        let r = probe_classification(&x, &y, &ProbeConfig { max_iter: 500, ..ProbeConfig::default() }).unwrap();
        assert_eq!(r.fold_accuracies.len(), 10);
        assert_eq!(r.mean_accuracy, 1.0);
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let f = stratified_folds(&y, 10, 3).unwrap();
        for fold in 0..10 {
            let members: Vec<_> = (0..40).filter(|&i| f[i] == fold).collect();
            assert_eq!(members.len(), 4);
            assert_eq!(members.iter().filter(|&&i| y[i] == 0).count(), 2);
        }
    }

    #[test]
    fn too_many_folds_for_class() {
        let y = vec![0, 0, 0, 1, 1, 1];
        assert_eq!(stratified_folds(&y, 4, 0).unwrap_err(), Error::ClassTooSmall { class: 0, count: 3, folds: 4 });
    }

    #[test]
    fn converges_on_easy_problem() {
        let x: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        let y = [0, 0, 1, 1];
        let clf = LogisticRegression::fit(&rows, &y, 2, &ProbeConfig { l2: 0.1, tol: 1e-6, ..ProbeConfig::default() }).unwrap();
        assert!(clf.iterations < 5000);
        assert_eq!(clf.predict(&[-1.0]), 0);
        assert_eq!(clf.predict(&[4.0]), 1);
    }
}
