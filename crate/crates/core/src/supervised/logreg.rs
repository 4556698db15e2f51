//! L2-regularized binary logistic regression fit by limited-memory BFGS
//! with a backtracking line search (plain gradient steps as fallback), plus
//! 10-fold cross-validation over the regularizer grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 2000;
const LBFGS_MEMORY: usize = 10;

/// JSON form: {weights, bias, l2, means, stds, feature_names}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(rename = "l2")]
    pub l2_strength: f64,
    #[serde(rename = "means")]
    pub feature_means: Vec<f64>,
    #[serde(rename = "stds")]
    pub feature_stds: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl ClassifierModel {
    /// Probability of the positive (same-topic) class.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut z = self.bias;
        for ((&x, &w), (&mean, &std)) in features
            .iter()
            .zip(&self.weights)
            .zip(self.feature_means.iter().zip(&self.feature_stds))
        {
            z += w * (x - mean) / std;
        }
        sigmoid(z)
    }

    /// Feature importance report: (name, |weight|) sorted descending.
    pub fn importance(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self
            .feature_names
            .iter()
            .cloned()
            .zip(self.weights.iter().map(|w| w.abs()))
            .collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        rows
    }

    pub fn save_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus (l2/2)||w||^2 (bias unregularized),
/// with its gradient. The parameter vector packs [weights..., bias].
pub fn loss_and_gradient(
    params: &[f64],
    xs: &[Vec<f64>],
    ys: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = xs.len() as f64;
    let dim = params.len() - 1;
    let bias = params[dim];
    let mut loss = 0.0;
    let mut grad = vec![0.0f64; params.len()];
    for (x, &y) in xs.iter().zip(ys) {
        let mut z = bias;
        for (xi, wi) in x.iter().zip(&params[..dim]) {
            z += xi * wi;
        }
        let p = sigmoid(z);
        // Numerically safe cross-entropy.
        let eps = 1e-12;
        loss -= y * p.max(eps).ln() + (1.0 - y) * (1.0 - p).max(eps).ln();
        let delta = p - y;
        for (gi, xi) in grad[..dim].iter_mut().zip(x) {
            *gi += delta * xi;
        }
        grad[dim] += delta;
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (gi, wi) in grad[..dim].iter_mut().zip(&params[..dim]) {
        *gi += l2 * wi;
        loss += 0.5 * l2 * wi * wi;
    }
    (loss, grad)
}

fn grad_norm(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// Minimize the regularized loss by L-BFGS with backtracking Armijo line
/// search. Falls back to a plain gradient step whenever the quasi-Newton
/// direction is not a descent direction. Returns (params, trajectory of
/// accepted losses).
fn minimize(xs: &[Vec<f64>], ys: &[f64], l2: f64, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut params = vec![0.0f64; dim + 1];
    let (mut loss, mut grad) = loss_and_gradient(&params, xs, ys, l2);
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, y, rho)
    let mut trajectory = vec![loss];

    for _ in 0..MAX_ITERS {
        if grad_norm(&grad) < GRAD_TOL {
            break;
        }
        let mut direction = lbfgs_direction(&grad, &history);
        let descent: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if descent >= 0.0 {
            direction = grad.iter().map(|g| -g).collect();
        }

        // Backtracking line search on the Armijo condition.
        let slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate: Vec<f64> =
                params.iter().zip(&direction).map(|(p, d)| p + step * d).collect();
            let (new_loss, new_grad) = loss_and_gradient(&candidate, xs, ys, l2);
            if new_loss <= loss + 1e-4 * step * slope {
                accepted = Some((candidate, new_loss, new_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((new_params, new_loss, new_grad)) = accepted else { break };

        let s: Vec<f64> = new_params.iter().zip(&params).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            history.push((s, yv, 1.0 / sy));
            if history.len() > LBFGS_MEMORY {
                history.remove(0);
            }
        }
        params = new_params;
        loss = new_loss;
        grad = new_grad;
        trajectory.push(loss);
    }
    (params, trajectory)
}

/// Two-loop recursion producing the L-BFGS search direction.
fn lbfgs_direction(grad: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.last() {
        let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if yy > 0.0 {
            let scale = sy / yy;
            for qi in q.iter_mut() {
                *qi *= scale;
            }
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Train on labeled feature vectors (label 1 = same topic). Features are
/// standardized; the stored statistics are reused at inference.
pub fn train_classifier(
    pairs: &[(Vec<f64>, bool)],
    l2_strength: f64,
    feature_names: &[String],
) -> Result<ClassifierModel> {
    let n = pairs.len();
    if n == 0 {
        return Err(Error::DegenerateTraining("no training pairs"));
    }
    let positives = pairs.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateTraining("need at least one example of each class"));
    }
    let dim = pairs[0].0.len();

    let mut means = vec![0.0f64; dim];
    for (x, _) in pairs {
        for (m, xi) in means.iter_mut().zip(x) {
            *m += xi;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut stds = vec![0.0f64; dim];
    for (x, _) in pairs {
        for ((sd, xi), m) in stds.iter_mut().zip(x).zip(&means) {
            *sd += (xi - m) * (xi - m);
        }
    }
    for sd in stds.iter_mut() {
        *sd = (*sd / n as f64).sqrt();
        if *sd < 1e-12 {
            *sd = 1.0;
        }
    }

    let xs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(x, _)| {
            x.iter().zip(means.iter().zip(&stds)).map(|(xi, (m, sd))| (xi - m) / sd).collect()
        })
        .collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, y)| f64::from(*y)).collect();

    let (params, trajectory) = minimize(&xs, &ys, l2_strength, dim);
    debug_assert!(trajectory.windows(2).all(|w| w[1] <= w[0] + 1e-12));

    Ok(ClassifierModel {
        weights: params[..dim].to_vec(),
        bias: params[dim],
        l2_strength,
        feature_means: means,
        feature_stds: stds,
        feature_names: feature_names.to_vec(),
    })
}

/// Pick the regularizer from {0.01, 0.1, 1, 10} by 10-fold cross-validated
/// accuracy (contiguous folds; ties prefer the stronger regularizer), then
/// train on everything.
pub fn train_with_cv(
    pairs: &[(Vec<f64>, bool)],
    feature_names: &[String],
) -> Result<ClassifierModel> {
    let grid = [0.01, 0.1, 1.0, 10.0];
    let folds = 10.min(pairs.len());
    let mut best: Option<(f64, f64)> = None; // (accuracy, l2)
    for &l2 in &grid {
        let mut correct = 0usize;
        let mut total = 0usize;
        for fold in 0..folds {
            let lo = fold * pairs.len() / folds;
            let hi = (fold + 1) * pairs.len() / folds;
            let train: Vec<(Vec<f64>, bool)> = pairs[..lo]
                .iter()
                .chain(&pairs[hi..])
                .cloned()
                .collect();
            let test = &pairs[lo..hi];
            let Ok(model) = train_classifier(&train, l2, feature_names) else {
                continue;
            };
            for (x, y) in test {
                total += 1;
                if (model.predict(x) >= 0.5) == *y {
                    correct += 1;
                }
            }
        }
        if total == 0 {
            continue;
        }
        let acc = correct as f64 / total as f64;
        if best.is_none_or(|(ba, bl)| acc > ba || (acc == ba && l2 > bl)) {
            best = Some((acc, l2));
        }
    }
    let l2 = best.map(|(_, l2)| l2).unwrap_or(1.0);
    train_classifier(pairs, l2, feature_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_model_predicts_half() {
        let model = ClassifierModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            l2_strength: 0.1,
            feature_means: vec![0.0, 0.0],
            feature_stds: vec![1.0, 1.0],
            feature_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(model.predict(&[3.0, -1.0]), 0.5);
    }

    fn separable_set() -> Vec<(Vec<f64>, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        (0..80)
            .map(|i| {
                let y = i % 2 == 0;
                let base = if y { 2.0 } else { -2.0 };
                (vec![base + rng.gen::<f64>() * 0.5, rng.gen::<f64>()], y)
            })
            .collect()
    }

    #[test]
    fn separable_set_reaches_full_training_accuracy() {
        let pairs = separable_set();
        let names = vec!["signal".to_string(), "noise".to_string()];
        let model = train_classifier(&pairs, 0.01, &names).unwrap();
        let correct = pairs
            .iter()
            .filter(|(x, y)| (model.predict(x) >= 0.5) == *y)
            .count();
        assert_eq!(correct, pairs.len());
        assert!(model.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn degenerate_single_class_errors() {
        let pairs: Vec<(Vec<f64>, bool)> = (0..5).map(|i| (vec![i as f64], true)).collect();
        assert!(matches!(
            train_classifier(&pairs, 0.1, &["x".to_string()]),
            Err(Error::DegenerateTraining(_))
        ));
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let ys: Vec<f64> = (0..30).map(|_| f64::from(rng.gen::<bool>())).collect();
        let l2 = 0.3;
        for _ in 0..50 {
            let params: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let (_, grad) = loss_and_gradient(&params, &xs, &ys, l2);
            let h = 1e-6;
            for d in 0..params.len() {
                let mut plus = params.clone();
                plus[d] += h;
                let mut minus = params.clone();
                minus[d] -= h;
                let (lp, _) = loss_and_gradient(&plus, &xs, &ys, l2);
                let (lm, _) = loss_and_gradient(&minus, &xs, &ys, l2);
                let numeric = (lp - lm) / (2.0 * h);
                let denom = numeric.abs().max(grad[d].abs()).max(1e-8);
                let rel = (grad[d] - numeric).abs() / denom;
                assert!(rel < 1e-4, "dim {d}: analytic {} vs numeric {numeric}", grad[d]);
            }
        }
    }

    #[test]
    fn final_gradient_norm_below_tolerance() {
        let pairs = separable_set();
        let names = vec!["signal".to_string(), "noise".to_string()];
        let model = train_classifier(&pairs, 0.5, &names).unwrap();
        // Rebuild the standardized problem and check the gradient at the
        // returned parameters.
        let xs: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(model.feature_means.iter().zip(&model.feature_stds))
                    .map(|(xi, (m, sd))| (xi - m) / sd)
                    .collect()
            })
            .collect();
        let ys: Vec<f64> = pairs.iter().map(|(_, y)| f64::from(*y)).collect();
        let mut params = model.weights.clone();
        params.push(model.bias);
        let (_, grad) = loss_and_gradient(&params, &xs, &ys, 0.5);
        assert!(grad_norm(&grad) < GRAD_TOL, "final gradient norm {}", grad_norm(&grad));
    }

    #[test]
    fn standardization_round_trip_parity() {
        // Shifting and scaling raw features must not change predictions
        // once the model is trained on the transformed data.
        let pairs = separable_set();
        let names = vec!["signal".to_string(), "noise".to_string()];
        let shifted: Vec<(Vec<f64>, bool)> = pairs
            .iter()
            .map(|(x, y)| (vec![x[0] * 3.0 + 7.0, x[1] * 0.5 - 2.0], *y))
            .collect();
        let m1 = train_classifier(&pairs, 0.1, &names).unwrap();
        let m2 = train_classifier(&shifted, 0.1, &names).unwrap();
        for ((x1, _), (x2, _)) in pairs.iter().zip(&shifted) {
            assert!((m1.predict(x1) - m2.predict(x2)).abs() < 1e-6);
        }
    }

    #[test]
    fn cv_picks_some_grid_value() {
        let pairs = separable_set();
        let names = vec!["signal".to_string(), "noise".to_string()];
        let model = train_with_cv(&pairs, &names).unwrap();
        assert!([0.01, 0.1, 1.0, 10.0].contains(&model.l2_strength));
    }

    #[test]
    fn importance_sorted_by_weight_magnitude() {
        let pairs = separable_set();
        let names = vec!["signal".to_string(), "noise".to_string()];
        let model = train_classifier(&pairs, 0.1, &names).unwrap();
        let importance = model.importance();
        assert_eq!(importance[0].0, "signal");
        assert!(importance[0].1 >= importance[1].1);
    }
}
