//! Mini-batch training with class-weighted binary cross-entropy and Adam,
//! early stopping on validation loss, and seeded repeat runs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::qasa::QasaModel;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub n_repeats: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Weight positives by the train-split class ratio.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 16,
            seed: 0,
            n_repeats: 5,
            patience: 15,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be >= 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param("learning_rate", "must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be >= 1"));
        }
        if self.n_repeats == 0 {
            return Err(Error::param("n_repeats", "must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::param("patience", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::param("beta1", "Adam betas must lie in [0, 1) and eps be positive"));
        }
        Ok(())
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped away from 0 and 1.
pub fn bce_loss(p: f64, y: u8) -> Result<f64> {
    weighted_bce(p, y, 1.0)
}

pub fn weighted_bce(p: f64, y: u8, pos_weight: f64) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} is not a probability")));
    }
    let p = clamp_prob(p);
    Ok(match y {
        1 => -pos_weight * p.ln(),
        _ => -(1.0 - p).ln(),
    })
}

/// `d loss / d p`.
pub fn bce_grad(p: f64, y: u8) -> f64 {
    let p = clamp_prob(p);
    if y == 1 {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    }
}

/// `d loss / d logit` for `p = sigmoid(logit)`. Unclamped so the gradient
/// never vanishes on a confident mistake.
fn logit_grad(p: f64, y: u8, pos_weight: f64) -> f64 {
    if y == 1 {
        pos_weight * (p - 1.0)
    } else {
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub seed: u64,
    pub config: TrainConfig,
    /// Best-validation checkpoint.
    pub checkpoint: QasaModel,
    pub losses: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub positive_weight: f64,
}

impl RunArtifact {
    /// `epoch,train_loss,val_loss` rows.
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for l in &self.losses {
            out.push_str(&format!("{},{},{}\n", l.epoch, l.train, l.val));
        }
        out
    }
}

pub fn predict(model: &QasaModel, samples: &[Sample]) -> Result<Vec<f64>> {
    samples.par_iter().map(|s| model.forward(&s.tokens)).collect()
}

pub fn accuracy(probs: &[f64], samples: &[Sample], threshold: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = probs
        .iter()
        .zip(samples)
        .filter(|(p, s)| u8::from(**p >= threshold) == s.label)
        .count();
    hits as f64 / samples.len() as f64
}

/// Mean weighted BCE over `samples`.
pub fn mean_loss(model: &QasaModel, samples: &[Sample], pos_weight: f64) -> Result<f64> {
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| weighted_bce(model.forward(&s.tokens)?, s.label, pos_weight))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn batch_gradient(model: &QasaModel, batch: &[&Sample], pos_weight: f64) -> Result<Vec<f64>> {
    let grads: Vec<Vec<f64>> = batch
        .par_iter()
        .map(|s| {
            let cache = model.forward_cached(&s.tokens)?;
            let dlogit = logit_grad(cache.probability(), s.label, pos_weight);
            Ok(model.backward(&cache, dlogit)?.to_vec())
        })
        .collect::<Result<_>>()?;
    // fixed summation order keeps runs bit-identical regardless of threads
    let mut total = vec![0.0; model.n_params()];
    for g in &grads {
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
    let n = batch.len() as f64;
    total.iter_mut().for_each(|t| *t /= n);
    Ok(total)
}

/// Trains on the train split, selects on validation loss, never reads test.
pub fn train(model: QasaModel, dataset: &Dataset, cfg: &TrainConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    model.validate()?;
    let train_set = dataset.train();
    let val_set = dataset.val();
    if train_set.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if val_set.is_empty() {
        return Err(Error::EmptySplit("val"));
    }
    let pos_weight = if cfg.class_weighting {
        dataset.positive_weight()
    } else {
        1.0
    };
    let mut model = model;
    model.scaler = dataset.scaler;
    model.token_mode = dataset.spec.token_mode;

    let mut params = model.params();
    let mut adam = Adam::new(params.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = model.clone();
    let mut best_val = mean_loss(&model, val_set, pos_weight)?;
    let mut best_epoch = 0;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let grad = batch_gradient(&model, &batch, pos_weight)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            adam.update(&mut params, &grad);
            model.set_params(&params)?;
        }
        let train_loss = mean_loss(&model, train_set, pos_weight)?;
        let val_loss = mean_loss(&model, val_set, pos_weight)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("train {train_loss}, val {val_loss}"),
            });
        }
        log::debug!("seed {} epoch {epoch}: train {train_loss:.5} val {val_loss:.5}", cfg.seed);
        losses.push(EpochLoss {
            epoch,
            train: train_loss,
            val: val_loss,
        });
        if val_loss < best_val {
            best_val = val_loss;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::info!("seed {}: early stop at epoch {epoch}, best {best_epoch}", cfg.seed);
                break;
            }
        }
    }
    Ok(RunArtifact {
        seed: cfg.seed,
        config: cfg.clone(),
        checkpoint: best,
        losses,
        best_epoch,
        positive_weight: pos_weight,
    })
}

/// Trains `n_repeats` models with seeds `seed, seed + 1, ...` in parallel.
pub fn repeat_runs<F>(factory: F, dataset: &Dataset, cfg: &TrainConfig) -> Result<Vec<RunArtifact>>
where
    F: Fn(u64) -> Result<QasaModel> + Sync,
{
    cfg.validate()?;
    (0..cfg.n_repeats as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let run_cfg = TrainConfig {
                seed,
                ..cfg.clone()
            };
            train(factory(seed)?, dataset, &run_cfg)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, sd }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetSpec;
    use crate::marketdata::chronological_split;
    use crate::qasa::Variant;
    use rand::Rng;

    #[test]
    fn bce_examples() {
        for y in [0, 1] {
            assert!((bce_loss(0.5, y).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        }
        assert!(bce_loss(1.0 - 1e-12, 1).unwrap() < 1e-6);
        assert!(bce_loss(1e-12, 0).unwrap() < 1e-6);
        assert!(bce_loss(0.0, 1).unwrap().is_finite());
        assert!(bce_loss(1.5, 1).is_err());
        assert!(bce_loss(f64::NAN, 1).is_err());
        assert_eq!(bce_grad(0.5, 1), -2.0);
        assert_eq!(weighted_bce(0.5, 1, 3.0).unwrap(), 3.0 * std::f64::consts::LN_2);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(2, &cfg);
        let mut p = vec![1.0, -1.0];
        adam.update(&mut p, &[0.3, -2.0]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn mean_sd_conventions() {
        assert_eq!(MeanSd::of(&[0.3]).sd, 0.0);
        assert_eq!(MeanSd::of(&[0.2; 5]).sd, 0.0);
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.sd), (2.0, 1.0));
    }

    /// Single-feature toy data: each sample is one amplitude-encoded token
    /// pointing either along `|00>` or `|11>`.
    fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Sample> = (0..n)
            .map(|bar| {
                let label = u8::from(rng.random::<f64>() < 0.5);
                let jitter: f64 = rng.random_range(-0.1..0.1);
                let token = if label == 1 {
                    vec![jitter, 0.0, 0.0, 1.0]
                } else {
                    vec![1.0, 0.0, 0.0, jitter]
                };
                Sample {
                    bar,
                    tokens: vec![token],
                    label,
                }
            })
            .collect();
        Dataset {
            spec: DatasetSpec {
                window: 4,
                ..DatasetSpec::default()
            },
            start: 0,
            split: chronological_split(n, (0.7, 0.15, 0.15)).unwrap(),
            samples,
            scaler: None,
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let data = separable(40, 1);
        let model = QasaModel::init(Variant::Sequence, 4, 1, 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            patience: 100,
            ..TrainConfig::default()
        };
        let run = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(run.checkpoint.params(), model.params());
        assert_eq!(run.losses.len(), 3);
    }

    #[test]
    fn learns_separable_data_deterministically() {
        let data = separable(80, 2);
        let cfg = TrainConfig {
            epochs: 200,
            patience: 200,
            ..TrainConfig::default()
        };
        let model = QasaModel::init(Variant::Sequence, 4, 1, 5).unwrap();
        let run = train(model.clone(), &data, &cfg).unwrap();
        let probs = predict(&run.checkpoint, data.train()).unwrap();
        assert!(accuracy(&probs, data.train(), 0.5) >= 0.95);
        assert!(run.losses.iter().all(|l| l.train.is_finite() && l.val.is_finite()));

        let again = train(model, &data, &cfg).unwrap();
        assert_eq!(run.losses, again.losses);
    }

    #[test]
    fn repeats_use_consecutive_seeds() {
        let data = separable(40, 3);
        let cfg = TrainConfig {
            epochs: 2,
            n_repeats: 3,
            seed: 10,
            ..TrainConfig::default()
        };
        let runs = repeat_runs(|s| QasaModel::init(Variant::Sequence, 4, 1, s), &data, &cfg).unwrap();
        let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![10, 11, 12]);
    }

    #[test]
    fn rejects_empty_splits() {
        let mut data = separable(40, 4);
        data.split.val = data.split.val.start..data.split.val.start;
        let model = QasaModel::init(Variant::Sequence, 4, 1, 0).unwrap();
        assert!(matches!(
            train(model, &data, &TrainConfig::default()),
            Err(Error::EmptySplit("val"))
        ));
    }
}
