use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::nets::LinParams;
use super::params::{ModelKind, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    pub l2: f64,
    pub seed: u64,
    /// Hidden units (per direction for the BiRNN).
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    /// Global gradient-norm bound for the BiRNN; 0 disables clipping.
    pub clip_norm: f64,
    /// Solve Lin in closed form instead of by gradient descent.
    pub exact_lin: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 500,
            patience: 25,
            l2: 1e-4,
            seed: 0,
            hidden: 20,
            optimizer: OptimizerKind::Momentum,
            momentum: 0.9,
            clip_norm: 5.0,
            exact_lin: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::Config("clip_norm must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Loss per epoch (epoch 0 is the initial state) and the stopping decision.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainingLog {
    /// The loss that drove early stopping for `rec`.
    pub fn monitored(rec: &EpochRecord) -> f64 {
        rec.val_loss.unwrap_or(rec.train_loss)
    }

    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

/// One prepared piece: standardized inputs and the target.
pub type Piece = (Array2<f64>, Array1<f64>);

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Model(format!(
            "prediction has {} steps, target {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Model("empty curves".into()));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Mean squared error pooled over every step of every piece.
pub fn pooled_mse(params: &Params, pieces: &[Piece]) -> f64 {
    let (sum, n) = pieces.iter().fold((0.0, 0usize), |(s, n), (x, y)| {
        let r = params.predict(x.view()) - y;
        (s + r.mapv(|v| v * v).sum(), n + y.len())
    });
    sum / n as f64
}

/// Piece MSE plus `l2 · Σ w²` over penalized weights.
pub fn objective(params: &Params, piece: &Piece, l2: f64) -> f64 {
    let (x, y) = piece;
    let mse = (params.predict(x.view()) - y).mapv(|v| v * v).mean().unwrap_or(0.0);
    let flat = params.to_flat();
    let penalty: f64 = flat
        .iter()
        .zip(params.penalty_mask())
        .filter(|(_, m)| *m)
        .map(|(w, _)| w * w)
        .sum();
    mse + l2 * penalty
}

/// Flat gradient of [`objective`].
pub fn objective_gradient(params: &Params, piece: &Piece, l2: f64) -> Vec<f64> {
    let (x, y) = piece;
    let n = y.len() as f64;
    let dy = (params.predict(x.view()) - y).mapv(|r| 2.0 * r / n);
    let mut g = params.backward(x.view(), dy.view());
    if l2 > 0.0 {
        for ((gi, w), m) in g.iter_mut().zip(params.to_flat()).zip(params.penalty_mask()) {
            if m {
                *gi += 2.0 * l2 * w;
            }
        }
    }
    g
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    clip: Option<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    fn new(config: &TrainConfig, kind: ModelKind, size: usize) -> Self {
        Optimizer {
            kind: config.optimizer,
            lr: config.learning_rate,
            momentum: config.momentum,
            clip: (kind == ModelKind::Birnn && config.clip_norm > 0.0).then_some(config.clip_norm),
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], mut g: Vec<f64>) {
        if let Some(c) = self.clip {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > c {
                g.iter_mut().for_each(|v| *v *= c / norm);
            }
        }
        match self.kind {
            OptimizerKind::Momentum => {
                for ((th, vel), gi) in theta.iter_mut().zip(&mut self.m).zip(&g) {
                    *vel = self.momentum * *vel - self.lr * gi;
                    *th += *vel;
                }
            }
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                self.t += 1;
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for (((th, m), v), gi) in theta.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(&g) {
                    *m = B1 * *m + (1.0 - B1) * gi;
                    *v = B2 * *v + (1.0 - B2) * gi * gi;
                    *th -= self.lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                }
            }
        }
    }
}

/// Columns that carry any nonzero training value.
pub fn active_columns(pieces: &[Piece]) -> Vec<bool> {
    let k = pieces.first().map_or(0, |(x, _)| x.ncols());
    (0..k)
        .map(|j| pieces.iter().any(|(x, _)| x.column(j).iter().any(|&v| v != 0.0)))
        .collect()
}

/// Gradient descent over whole pieces with early stopping; the returned
/// parameters are those of the epoch with the lowest monitored loss.
pub fn train_params(
    kind: ModelKind,
    train: &[Piece],
    validation: &[Piece],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Params, TrainingLog)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Model("empty training set".into()));
    }
    let k = train[0].0.ncols();
    let active = active_columns(train);
    let init = Params::init(kind, k, config.hidden, &active, rng)?;

    if kind == ModelKind::Lin && config.exact_lin {
        let params = Params::Lin(solve_ridge(train, config.l2, &active)?);
        let rec = record(0, &params, train, validation);
        return Ok((params, TrainingLog { epochs: vec![rec], stopped_epoch: 0, best_epoch: 0 }));
    }

    let mut theta = init.to_flat();
    let mut opt = Optimizer::new(config, kind, theta.len());
    let mut current = init;
    let mut epochs = vec![record(0, &current, train, validation)];
    let mut best = (TrainingLog::monitored(&epochs[0]), 0usize, current.clone());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopped = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        for &i in &order {
            let g = objective_gradient(&current, &train[i], config.l2);
            opt.step(&mut theta, g);
            current = current.with_flat(&theta);
        }
        let rec = record(epoch, &current, train, validation);
        let monitored = TrainingLog::monitored(&rec);
        if !rec.train_loss.is_finite() || !monitored.is_finite() {
            return Err(Error::Divergence { epoch, learning_rate: config.learning_rate });
        }
        log::debug!("epoch {epoch}: train {:.6} monitored {:.6}", rec.train_loss, monitored);
        epochs.push(rec);
        stopped = epoch;
        if monitored < best.0 {
            best = (monitored, epoch, current.clone());
        } else if epoch - best.1 >= config.patience {
            break;
        }
    }
    Ok((best.2, TrainingLog { epochs, stopped_epoch: stopped, best_epoch: best.1 }))
}

fn record(epoch: usize, params: &Params, train: &[Piece], validation: &[Piece]) -> EpochRecord {
    EpochRecord {
        epoch,
        train_loss: pooled_mse(params, train),
        val_loss: (!validation.is_empty()).then(|| pooled_mse(params, validation)),
    }
}

/// Fine-tunes `pretrained` on one piece. Stops after `max_epochs` or when the
/// fit MSE improved by less than 1e-6 over the last `patience` epochs, and
/// returns the parameters with the lowest fit MSE seen.
pub fn fit_params(pretrained: &Params, piece: &Piece, config: &TrainConfig) -> Result<(Params, TrainingLog)> {
    config.validate_common()?;
    let pieces = std::slice::from_ref(piece);
    let mut epochs = vec![record(0, pretrained, pieces, &[])];
    let mut best = (epochs[0].train_loss, 0usize, pretrained.clone());
    let mut theta = pretrained.to_flat();
    let mut opt = Optimizer::new(config, pretrained.kind(), theta.len());
    let mut current = pretrained.clone();
    let mut stopped = 0;
    for epoch in 1..=config.max_epochs {
        let g = objective_gradient(&current, piece, config.l2);
        opt.step(&mut theta, g);
        current = current.with_flat(&theta);
        let rec = record(epoch, &current, pieces, &[]);
        if !rec.train_loss.is_finite() {
            return Err(Error::Divergence { epoch, learning_rate: config.learning_rate });
        }
        let loss = rec.train_loss;
        epochs.push(rec);
        stopped = epoch;
        if loss < best.0 {
            best = (loss, epoch, current.clone());
        }
        if epoch >= config.patience && epochs[epoch - config.patience].train_loss - loss < 1e-6 {
            break;
        }
    }
    Ok((best.2, TrainingLog { epochs, stopped_epoch: stopped, best_epoch: best.1 }))
}

/// Closed-form ridge regression over the pooled steps with an unpenalized
/// bias: minimizes `(1/N)·|Xw + b − y|² + l2·|w|²`. Inactive columns get 0.
pub fn solve_ridge(pieces: &[Piece], l2: f64, active: &[bool]) -> Result<LinParams> {
    let cols: Vec<usize> = (0..active.len()).filter(|&j| active[j]).collect();
    let n: usize = pieces.iter().map(|(_, y)| y.len()).sum();
    let p = cols.len() + 1;
    let mut a = DMatrix::<f64>::zeros(n, p);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut row = 0;
    for (x, y) in pieces {
        for t in 0..y.len() {
            for (c, &j) in cols.iter().enumerate() {
                a[(row, c)] = x[[t, j]];
            }
            a[(row, p - 1)] = 1.0;
            rhs[row] = y[t];
            row += 1;
        }
    }
    let mut gram = a.transpose() * &a;
    for c in 0..cols.len() {
        gram[(c, c)] += n as f64 * l2;
    }
    let b = a.transpose() * rhs;
    let theta = gram
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Model(format!("ridge solve failed: {e}")))?;
    let mut w = Array1::zeros(active.len());
    for (c, &j) in cols.iter().enumerate() {
        w[j] = theta[c];
    }
    Ok(LinParams { w, b: theta[p - 1] })
}
