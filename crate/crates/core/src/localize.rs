//! Feed-forward network mapping feature vectors to damage coordinates.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::damage_db::Split;
use crate::error::{invalid, Error, Result};
use crate::features::Standardizer;

/// Hidden layer widths.
pub const HIDDEN: [usize; 3] = [150, 150, 150];
pub const OUTPUTS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct NnModel {
    pub layer_dims: Vec<usize>,
    /// `weights[l]` maps layer `l` to layer `l + 1`, shape `dims[l+1] × dims[l]`.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub features: Standardizer,
    pub targets: Standardizer,
}

impl NnModel {
    /// Network with the standard hidden widths, uniform weights in `±sqrt(3 / fan_in)`.
    pub fn new(input_dim: usize, seed: u64) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend(HIDDEN);
        dims.push(OUTPUTS);
        Self::with_dims(&dims, seed)
    }

    pub fn with_dims(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(invalid("layer_dims", format!("{dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let limit = (3.0 / w[0] as f64).sqrt();
            weights.push(DMatrix::from_fn(w[1], w[0], |_, _| {
                rng.random_range(-limit..limit)
            }));
            biases.push(DVector::zeros(w[1]));
        }
        Ok(Self {
            layer_dims: dims.to_vec(),
            weights,
            biases,
            features: Standardizer::identity(dims[0]),
            targets: Standardizer::identity(dims[dims.len() - 1]),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Weights (row-major) then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for i in 0..w.nrows() {
                out.extend(w.row(i).iter());
            }
            out.extend(b.iter());
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let mut it = p.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    w[(i, j)] = it.next().unwrap_or_default();
                }
            }
            for v in b.iter_mut() {
                *v = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    /// Activations of every layer for standardized inputs stored as columns.
    fn activations(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = vec![x.clone()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * &acts[l];
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l < last {
                z.apply(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    fn to_columns(&self, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let d = self.input_dim();
        let mut m = DMatrix::zeros(d, rows.len());
        for (j, r) in rows.iter().enumerate() {
            let z = self.features.apply(r)?;
            m.column_mut(j).copy_from_slice(&z);
        }
        Ok(m)
    }

    /// Predicted coordinates for raw feature rows.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let x = self.to_columns(rows)?;
        let out = self.activations(&x).pop().unwrap_or_default();
        out.column_iter()
            .map(|c| self.targets.invert(c.as_slice()))
            .collect()
    }
}

/// Predicted `(x, y)` for one feature vector.
pub fn nn_forward(model: &NnModel, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        });
    }
    let p = model.predict(&[x.to_vec()])?;
    Ok((p[0][0], p[0][1]))
}

/// Mean squared error over samples and outputs, with the gradient in [`NnModel::params`] order.
pub fn loss_and_gradient(model: &NnModel, x: &DMatrix<f64>, t: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let acts = model.activations(x);
    let out = &acts[acts.len() - 1];
    let scale = 1.0 / (t.len() as f64);
    let diff = out - t;
    let loss = diff.norm_squared() * scale;
    let mut delta = diff * (2.0 * scale);
    let nl = model.weights.len();
    let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(nl);
    for l in (0..nl).rev() {
        let dw = &delta * acts[l].transpose();
        let db = delta.column_sum();
        if l > 0 {
            let mut back = model.weights[l].transpose() * &delta;
            back.zip_apply(&acts[l], |g, a| *g *= 1.0 - a * a);
            delta = back;
        }
        grads.push((dw, db));
    }
    grads.reverse();
    let mut flat = Vec::with_capacity(model.n_params());
    for (dw, db) in grads {
        for i in 0..dw.nrows() {
            flat.extend(dw.row(i).iter());
        }
        flat.extend(db.iter());
    }
    (loss, flat)
}

fn loss_only(model: &NnModel, x: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let out = model.activations(x).pop().unwrap_or_default();
    (out - t).norm_squared() / t.len() as f64
}

/// Largest relative difference between backprop and central differences
/// over `n_checks` randomly chosen parameters.
pub fn gradient_check(
    model: &NnModel,
    x: &DMatrix<f64>,
    t: &DMatrix<f64>,
    n_checks: usize,
    seed: u64,
) -> f64 {
    let (_, grad) = loss_and_gradient(model, x, t);
    let base = model.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut worst = 0.0_f64;
    for _ in 0..n_checks {
        let i = rng.random_range(0..base.len());
        let h = 1e-6 * (1.0 + base[i].abs());
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p).ok();
        let up = loss_only(&probe, x, t);
        p[i] = base[i] - h;
        probe.set_params(&p).ok();
        let down = loss_only(&probe, x, t);
        let fd = (up - down) / (2.0 * h);
        let denom = grad[i].abs().max(fd.abs()).max(1e-10);
        worst = worst.max((grad[i] - fd).abs() / denom);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Grow the rate after an improving step and halve it (rejecting the step) otherwise.
    pub adaptive: bool,
    /// Stop once the standardized training loss falls below this value.
    pub target_loss: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 3000,
            learning_rate: 1e-2,
            seed: 0,
            adaptive: true,
            target_loss: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: NnModel,
    /// Training loss before each accepted step, then the final loss.
    pub loss_history: Vec<f64>,
}

fn target_columns(st: &Standardizer, targets: &[(f64, f64)]) -> Result<DMatrix<f64>> {
    let mut t = DMatrix::zeros(OUTPUTS, targets.len());
    for (j, (x, y)) in targets.iter().enumerate() {
        t.column_mut(j).copy_from_slice(&st.apply(&[*x, *y])?);
    }
    Ok(t)
}

/// Full-batch gradient descent on the standardized mean squared error.
pub fn nn_train(
    features: &[Vec<f64>],
    targets: &[(f64, f64)],
    config: &TrainConfig,
) -> Result<Trained> {
    if features.is_empty() {
        return Err(invalid("features", "no training samples"));
    }
    if features.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: targets.len(),
        });
    }
    if config.max_epochs == 0 || !(config.learning_rate > 0.0) {
        return Err(invalid(
            "train config",
            "epochs and learning rate must be positive",
        ));
    }
    let dim = features[0].len();
    let mut model = NnModel::new(dim, config.seed)?;
    // a single sample carries no spread to normalize by
    if features.len() >= 2 {
        model.features = Standardizer::fit(features)?;
        let t: Vec<Vec<f64>> = targets.iter().map(|(x, y)| vec![*x, *y]).collect();
        model.targets = Standardizer::fit(&t)?;
    }
    let x = model.to_columns(features)?;
    let t = target_columns(&model.targets, targets)?;

    let mut params = model.params();
    let (mut loss, mut grad) = loss_and_gradient(&model, &x, &t);
    if !loss.is_finite() {
        return Err(Error::Diverged);
    }
    let mut rate = config.learning_rate;
    let mut history = vec![loss];
    let mut trial = model.clone();
    for _ in 0..config.max_epochs {
        if loss < config.target_loss {
            break;
        }
        let next: Vec<f64> = params
            .iter()
            .zip(&grad)
            .map(|(p, g)| p - rate * g)
            .collect();
        trial.set_params(&next)?;
        let (l, g) = loss_and_gradient(&trial, &x, &t);
        if config.adaptive {
            if l.is_finite() && l < loss {
                params = next;
                loss = l;
                grad = g;
                rate *= 1.05;
                history.push(loss);
            } else {
                rate *= 0.5;
                if rate < 1e-300 {
                    break;
                }
            }
        } else {
            if !l.is_finite() {
                return Err(Error::Diverged);
            }
            params = next;
            loss = l;
            grad = g;
            history.push(loss);
        }
    }
    model.set_params(&params)?;
    Ok(Trained {
        model,
        loss_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePrediction {
    pub label: String,
    pub x_true: f64,
    pub y_true: f64,
    pub x_pred: f64,
    pub y_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `100 · mean|pred − true| / range` per coordinate.
    pub x_error_pct: f64,
    pub y_error_pct: f64,
    pub x_range_m: f64,
    pub y_range_m: f64,
    pub cases: Vec<CasePrediction>,
}

pub fn nn_evaluate(
    model: &NnModel,
    features: &[Vec<f64>],
    targets: &[(f64, f64)],
    labels: &[String],
    ranges_m: (f64, f64),
) -> Result<EvalReport> {
    if features.len() != targets.len() || labels.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: features.len().min(labels.len()),
        });
    }
    if !(ranges_m.0 > 0.0 && ranges_m.1 > 0.0) {
        return Err(invalid("ranges_m", "coordinate ranges must be positive"));
    }
    let preds = model.predict(features)?;
    let cases: Vec<CasePrediction> = preds
        .iter()
        .zip(targets)
        .zip(labels)
        .map(|((p, (x, y)), label)| CasePrediction {
            label: label.clone(),
            x_true: *x,
            y_true: *y,
            x_pred: p[0],
            y_pred: p[1],
        })
        .collect();
    let n = cases.len().max(1) as f64;
    let ex = cases
        .iter()
        .map(|c| (c.x_pred - c.x_true).abs())
        .sum::<f64>()
        / n;
    let ey = cases
        .iter()
        .map(|c| (c.y_pred - c.y_true).abs())
        .sum::<f64>()
        / n;
    Ok(EvalReport {
        x_error_pct: 100.0 * ex / ranges_m.0,
        y_error_pct: 100.0 * ey / ranges_m.1,
        x_range_m: ranges_m.0,
        y_range_m: ranges_m.1,
        cases,
    })
}

/// Extent of each coordinate over the given targets.
pub fn coordinate_ranges(targets: &[(f64, f64)]) -> (f64, f64) {
    let span = |f: fn(&(f64, f64)) -> f64| {
        let lo = targets.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = targets.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    (span(|t| t.0), span(|t| t.1))
}

/// Outcome of training on the train split and scoring both splits.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub trained: Trained,
    pub train: EvalReport,
    pub test: EvalReport,
}

/// Trains on the rows marked [`Split::Train`] and evaluates both splits,
/// with errors normalized by `ranges_m`.
pub fn train_and_evaluate(
    features: &[Vec<f64>],
    targets: &[(f64, f64)],
    labels: &[String],
    splits: &[Split],
    ranges_m: (f64, f64),
    config: &TrainConfig,
) -> Result<SplitResult> {
    let n = features.len();
    if targets.len() != n || labels.len() != n || splits.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len().min(labels.len()).min(splits.len()),
        });
    }
    let pick = |which: Split| {
        let idx: Vec<usize> = (0..n).filter(|i| splits[*i] == which).collect();
        (
            idx.iter().map(|i| features[*i].clone()).collect::<Vec<_>>(),
            idx.iter().map(|i| targets[*i]).collect::<Vec<_>>(),
            idx.iter().map(|i| labels[*i].clone()).collect::<Vec<_>>(),
        )
    };
    let (xf, xt, xl) = pick(Split::Train);
    let (tf, tt, tl) = pick(Split::Test);
    let trained = nn_train(&xf, &xt, config)?;
    let train = nn_evaluate(&trained.model, &xf, &xt, &xl, ranges_m)?;
    let test = nn_evaluate(&trained.model, &tf, &tt, &tl, ranges_m)?;
    Ok(SplitResult {
        trained,
        train,
        test,
    })
}

/// On-disk form of an [`NnModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnModelFile {
    pub layer_dims: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    /// Row-major, one array per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub feature_standardizer: Standardizer,
    pub target_standardizer: Standardizer,
}

impl From<&NnModel> for NnModelFile {
    fn from(m: &NnModel) -> Self {
        Self {
            layer_dims: m.layer_dims.clone(),
            hidden_activation: "tanh".into(),
            output_activation: "linear".into(),
            weights: m
                .weights
                .iter()
                .map(|w| {
                    (0..w.nrows())
                        .flat_map(|i| w.row(i).iter().copied().collect::<Vec<_>>())
                        .collect()
                })
                .collect(),
            biases: m
                .biases
                .iter()
                .map(|b| b.iter().copied().collect())
                .collect(),
            feature_standardizer: m.features.clone(),
            target_standardizer: m.targets.clone(),
        }
    }
}

impl TryFrom<NnModelFile> for NnModel {
    type Error = Error;

    fn try_from(f: NnModelFile) -> Result<Self> {
        let dims = f.layer_dims;
        if dims.len() < 2 || f.weights.len() != dims.len() - 1 || f.biases.len() != dims.len() - 1 {
            return Err(invalid("model", "layer count does not match layer_dims"));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, (w, b)) in f.weights.into_iter().zip(f.biases).enumerate() {
            let (rows, cols) = (dims[l + 1], dims[l]);
            if w.len() != rows * cols || b.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows * cols,
                    got: w.len(),
                });
            }
            if w.iter().chain(&b).any(|v| !v.is_finite()) {
                return Err(invalid("model", "non-finite parameter"));
            }
            weights.push(DMatrix::from_row_slice(rows, cols, &w));
            biases.push(DVector::from_vec(b));
        }
        if f.feature_standardizer.dim() != dims[0]
            || f.target_standardizer.dim() != dims[dims.len() - 1]
        {
            return Err(invalid(
                "model",
                "standardizer size does not match layer_dims",
            ));
        }
        Ok(Self {
            layer_dims: dims,
            weights,
            biases,
            features: f.feature_standardizer,
            targets: f.target_standardizer,
        })
    }
}

pub fn save_model(model: &NnModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string(&NnModelFile::from(model))?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NnModel> {
    let f: NnModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    NnModel::try_from(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn architecture() {
        let m = NnModel::new(48, 1).unwrap();
        assert_eq!(m.layer_dims, vec![48, 150, 150, 150, 2]);
        assert_eq!(
            m.n_params(),
            48 * 150 + 150 + 2 * (150 * 150 + 150) + 150 * 2 + 2
        );
        let p = m.params();
        let mut n = m.clone();
        n.set_params(&p).unwrap();
        assert_eq!(m, n);
    }

    #[test]
    fn zero_model_predicts_target_mean() {
        let mut m = NnModel::new(4, 0).unwrap();
        let zeros = vec![0.0; m.n_params()];
        m.set_params(&zeros).unwrap();
        m.targets = Standardizer {
            mean: vec![0.12, 0.14],
            scale: vec![0.05, 0.01],
        };
        let (x, y) = nn_forward(&m, &[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!((x, y), (0.12, 0.14));
        assert!(matches!(
            nn_forward(&m, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hidden_activations_stay_bounded() {
        let m = NnModel::new(3, 4).unwrap();
        let x = DMatrix::from_column_slice(3, 1, &[1e6, -3e6, 2e6]);
        let acts = m.activations(&x);
        for a in &acts[1..acts.len() - 1] {
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn forward_matches_plain_loops() {
        let m = NnModel::new(6, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (px, py) = nn_forward(&m, &x).unwrap();
        let mut a = x.clone();
        for (l, (w, b)) in m.weights.iter().zip(&m.biases).enumerate() {
            let mut z = vec![0.0; w.nrows()];
            for i in 0..w.nrows() {
                let mut s = b[i];
                for (j, v) in a.iter().enumerate() {
                    s += w[(i, j)] * v;
                }
                z[i] = if l + 1 < m.weights.len() { s.tanh() } else { s };
            }
            a = z;
        }
        assert!((px - a[0]).abs() < 1e-12);
        assert!((py - a[1]).abs() < 1e-12);
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = NnModel::new(10, 5).unwrap();
        let x = DMatrix::from_fn(10, 8, |_, _| rng.random_range(-1.0..1.0));
        let t = DMatrix::from_fn(2, 8, |_, _| rng.random_range(-1.0..1.0));
        let err = gradient_check(&m, &x, &t, 20, 7);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn memorizes_one_sample() {
        let cfg = TrainConfig {
            max_epochs: 5000,
            ..TrainConfig::default()
        };
        let tr = nn_train(&[vec![0.3, -0.2, 0.8]], &[(0.1, 0.13)], &cfg).unwrap();
        assert!(*tr.loss_history.last().unwrap() < 1e-8);
        let (x, y) = nn_forward(&tr.model, &[0.3, -0.2, 0.8]).unwrap();
        assert!((x - 0.1).abs() < 1e-3 && (y - 0.13).abs() < 1e-3);
    }

    #[test]
    fn learns_a_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows = random_rows(&mut rng, 450, 5);
        let a = [
            [0.03, -0.02, 0.01, 0.04, 0.0],
            [0.0, 0.005, -0.004, 0.002, 0.006],
        ];
        let target = |r: &Vec<f64>| {
            let f = |w: &[f64; 5]| w.iter().zip(r).map(|(a, b)| a * b).sum::<f64>();
            (0.125 + f(&a[0]), 0.1375 + f(&a[1]))
        };
        let targets: Vec<_> = rows.iter().map(target).collect();
        let (train, test) = rows.split_at(400);
        let (tt, te) = targets.split_at(400);
        let cfg = TrainConfig {
            max_epochs: 1000,
            ..TrainConfig::default()
        };
        let tr = nn_train(train, tt, &cfg).unwrap();
        let h = &tr.loss_history;
        assert!(h.last() < h.first());
        let range = |i: usize| {
            let v: Vec<f64> = targets
                .iter()
                .map(|t| if i == 0 { t.0 } else { t.1 })
                .collect();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let labels: Vec<String> = (0..50).map(|i| i.to_string()).collect();
        let rep = nn_evaluate(&tr.model, test, te, &labels, (range(0), range(1))).unwrap();
        assert!(rep.x_error_pct < 2.0 && rep.y_error_pct < 2.0, "{rep:?}");
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let mut m = NnModel::with_dims(&[1, 2], 0).unwrap();
        m.set_params(&[1.0, 2.0, 0.0, 0.0]).unwrap();
        let feats = vec![vec![0.1], vec![0.2]];
        let targets = vec![(0.1, 0.2), (0.2, 0.4)];
        let labels = vec!["a".into(), "b".into()];
        let rep = nn_evaluate(&m, &feats, &targets, &labels, (0.1, 0.2)).unwrap();
        assert!(rep.x_error_pct.abs() < 1e-12 && rep.y_error_pct.abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_and_saves() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = random_rows(&mut rng, 10, 4);
        let targets: Vec<_> = rows.iter().map(|r| (r[0], r[1] * r[2])).collect();
        let cfg = TrainConfig {
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let a = nn_train(&rows, &targets, &cfg).unwrap();
        let b = nn_train(&rows, &targets, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&a.model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(
            a.model.predict(&rows).unwrap(),
            back.predict(&rows).unwrap()
        );
    }

    #[test]
    fn fixed_rate_blowup_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = random_rows(&mut rng, 10, 4);
        let targets: Vec<_> = rows.iter().map(|r| (r[0], r[1])).collect();
        let cfg = TrainConfig {
            max_epochs: 200,
            learning_rate: 1e6,
            adaptive: false,
            ..TrainConfig::default()
        };
        assert!(matches!(
            nn_train(&rows, &targets, &cfg),
            Err(Error::Diverged)
        ));
    }
}
