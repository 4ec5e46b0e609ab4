use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ensemble::{Combine, Snapshot, SnapshotEnsemble};
use super::mlp::{Gradients, MlpHead, Mode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub l2_strength: f64,
    pub dropout_rate: f64,
    pub patience_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub snapshot_min_epoch: usize,
    pub snapshot_interval: usize,
    pub combine: Combine,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_strength: 0.09,
            dropout_rate: 0.3,
            patience_epochs: 40,
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 1000,
            validation_fraction: 0.1,
            snapshot_min_epoch: 275,
            snapshot_interval: 5,
            combine: Combine::Mean,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.patience_epochs == 0 {
            return bad("patience_epochs must be >= 1".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.snapshot_interval == 0 {
            return bad("batch_size, max_epochs and snapshot_interval must be >= 1".into());
        }
        if !(self.l2_strength >= 0.0 && self.learning_rate >= 0.0) {
            return bad("l2_strength and learning_rate must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation_fraction {} outside [0, 1)",
                self.validation_fraction
            ));
        }
        Ok(())
    }
}

/// Tracks the best validation loss; signals a stop after `patience`
/// consecutive epochs without a strictly lower loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.stale >= self.patience)
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub best: MlpHead<T>,
    pub log: TrainLog,
    pub ensemble: SnapshotEnsemble<T>,
}

struct Adam<T> {
    m: Gradients<T>,
    v: Gradients<T>,
    step: i32,
    lr: f64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

impl<T: Scalar> Adam<T> {
    fn new(head: &MlpHead<T>, lr: f64) -> Self {
        Adam {
            m: head.zero_gradients(),
            v: head.zero_gradients(),
            step: 0,
            lr,
        }
    }

    fn apply(&mut self, head: &mut MlpHead<T>, grads: &Gradients<T>) {
        self.step += 1;
        let b1 = T::of(BETA1);
        let b2 = T::of(BETA2);
        let one = T::one();
        let c1 = T::of(1.0 - BETA1.powi(self.step));
        let c2 = T::of(1.0 - BETA2.powi(self.step));
        let lr = T::of(self.lr);
        let eps = T::of(EPSILON);
        let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (i, layer) in head.layers_mut().iter_mut().enumerate() {
            Zip::from(&mut layer.weights)
                .and(&mut self.m.weights[i])
                .and(&mut self.v.weights[i])
                .and(&grads.weights[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut self.m.bias[i])
                .and(&mut self.v.bias[i])
                .and(&grads.bias[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

fn gather<T: Scalar>(x: ArrayView2<T>, idx: &[usize]) -> Array2<T> {
    x.select(Axis(0), idx)
}

/// Mean cross-entropy plus the L2 penalty, in eval mode.
pub fn evaluate_loss<T: Scalar>(
    head: &MlpHead<T>,
    x: ArrayView2<T>,
    y: &[usize],
    l2: f64,
) -> Result<f64> {
    let probs = head.forward(x, Mode::Eval)?;
    let floor = super::mlp::PROB_FLOOR;
    let ce: f64 = probs
        .axis_iter(Axis(0))
        .zip(y)
        .map(|(row, &label)| -row[label].as_f64().max(floor).ln())
        .sum();
    Ok(ce / y.len() as f64 + l2 * head.weight_norm_sq().as_f64())
}

/// Mini-batch Adam training with early stopping on validation loss.
///
/// The returned `best` head holds the parameters from the epoch with the
/// lowest validation loss. Snapshots are taken at epochs
/// `min_epoch, min_epoch + interval, ...` until training stops; if none were
/// taken the ensemble holds just the best head.
pub fn train<T: Scalar>(
    mut head: MlpHead<T>,
    train_x: ArrayView2<T>,
    train_y: &[usize],
    val_x: ArrayView2<T>,
    val_y: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_x.nrows() == 0 || val_x.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if train_x.nrows() != train_y.len() || val_x.nrows() != val_y.len() {
        return Err(Error::InvalidArgument(
            "feature and label counts differ".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&head, cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs);
    let mut log = TrainLog::default();
    let mut best = head.clone();
    let mut snapshots = Vec::new();
    let mut order: Vec<usize> = (0..train_x.nrows()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = gather(train_x, chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| train_y[i]).collect();
            let (loss, grads) = head.loss_and_grad(
                xb.view(),
                &yb,
                cfg.l2_strength,
                Mode::Train {
                    dropout: cfg.dropout_rate,
                    rng: &mut rng,
                },
            )?;
            epoch_loss += loss.as_f64() * chunk.len() as f64;
            adam.apply(&mut head, &grads);
        }
        log.train_loss.push(epoch_loss / order.len() as f64);

        let val = evaluate_loss(&head, val_x, val_y, cfg.l2_strength)?;
        log.val_loss.push(val);
        log.epochs_run = epoch;

        if epoch >= cfg.snapshot_min_epoch
            && (epoch - cfg.snapshot_min_epoch).is_multiple_of(cfg.snapshot_interval)
        {
            snapshots.push(Snapshot {
                epoch,
                head: head.clone(),
            });
        }

        let (improved, stop) = stopper.observe(epoch, val);
        if improved {
            best = head.clone();
        }
        if stop {
            log.stopped_early = true;
            break;
        }
    }
    log.best_epoch = stopper.best_epoch();

    if snapshots.is_empty() {
        snapshots.push(Snapshot {
            epoch: log.best_epoch,
            head: best.clone(),
        });
    }
    let ensemble = SnapshotEnsemble::new(
        snapshots,
        cfg.snapshot_min_epoch,
        cfg.snapshot_interval,
        cfg.combine,
    )?;
    Ok(TrainOutcome {
        best,
        log,
        ensemble,
    })
}

/// Splits indices into (train, validation), holding out the last
/// `fraction` of each class's members in index order.
pub fn stratified_tail_split(labels: &[usize], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut held = vec![false; labels.len()];
    for members in &by_class {
        let n_val = (members.len() as f64 * fraction).round() as usize;
        let n_val = n_val.min(members.len().saturating_sub(1));
        for &i in &members[members.len() - n_val..] {
            held[i] = true;
        }
    }
    if fraction > 0.0 && !held.iter().any(|&h| h) && labels.len() > 1 {
        held[labels.len() - 1] = true;
    }
    let (val, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| held[i]);
    (train, val)
}

/// One-hot helper used by tests and callers that need targets as a matrix.
pub fn one_hot<T: Scalar>(labels: &[usize], classes: usize) -> Array2<T> {
    let mut m = Array2::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        m[[i, l]] = T::one();
    }
    m
}
