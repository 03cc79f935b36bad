//! Feedforward pushing policy: contours in, push endpoints out.
//!
//! The network maps the stacked current and near contours (`4N` values) to
//! `(u_S, v_S, u_E, v_E)`. Inputs and outputs are min/max scaled on the
//! training split; training minimizes mean squared error in scaled units
//! with minibatch gradient descent and momentum.

mod io;
mod model;

pub use io::{load, read_model, save, write_model, FORMAT_VERSION, MAGIC};
pub use model::{Gradients, Layer, MlpModel, Scaling};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::PushTriplet;

pub const DEFAULT_DIMS: [usize; 5] = [40, 100, 100, 100, 4];

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty evaluation set")]
    EmptySet,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LearnerError> = std::result::Result<T, E>;

/// What one training episode means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeUnit {
    /// One minibatch update.
    #[default]
    Minibatch,
    /// One pass over the training split.
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub episode_unit: EpisodeUnit,
    /// Split each minibatch over threads; reduction order stays fixed.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 25_000,
            split: [0.8, 0.1, 0.1],
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 64,
            seed: 0,
            hidden: vec![100, 100, 100],
            episode_unit: EpisodeUnit::Minibatch,
            parallel: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LearnerError::Config(m.to_string()));
        if self.episodes == 0 {
            return bad("episodes must be >= 1");
        }
        if self.split.iter().any(|f| !(0.0..=1.0).contains(f)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("split fractions must be in [0, 1] and sum to 1");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rate must be > 0 and momentum in [0, 1)");
        }
        if self.batch_size == 0 || self.hidden.iter().any(|&h| h == 0) {
            return bad("batch size and hidden widths must be >= 1");
        }
        Ok(())
    }
}

/// Mean absolute error per output, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae_u_s: f64,
    pub mae_v_s: f64,
    pub mae_u_e: f64,
    pub mae_v_e: f64,
    pub samples: usize,
}

impl EvalReport {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mae_u_s, self.mae_v_s, self.mae_u_e, self.mae_v_e]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_samples: usize,
    pub validation_samples: usize,
    pub test_samples: usize,
    pub test: EvalReport,
    pub validation: Option<EvalReport>,
    /// Training-batch loss (scaled MSE) after each episode.
    pub loss_curve: Vec<f64>,
}

impl TrainReport {
    pub fn first_loss(&self) -> f64 {
        self.loss_curve[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_curve.last().unwrap()
    }

    /// Mean loss over `window` episodes ending `offset` episodes before the end.
    pub fn window_mean(&self, window: usize, offset: usize) -> Option<f64> {
        let end = self.loss_curve.len().checked_sub(offset)?;
        let start = end.checked_sub(window)?;
        Some(self.loss_curve[start..end].iter().sum::<f64>() / window as f64)
    }
}

/// A training pair in data units.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl From<&PushTriplet> for Sample {
    fn from(t: &PushTriplet) -> Self {
        Self {
            input: t.input(),
            target: t.p.to_vec(),
        }
    }
}

pub const MIN_SAMPLES: usize = 10;

pub fn train(triplets: &[PushTriplet], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    let samples: Vec<Sample> = triplets.iter().map(Sample::from).collect();
    train_samples(&samples, cfg)
}

/// Seeded 80/10/10-style split, scaling fit on the training part, then
/// `episodes` updates. The returned model is the one after the final episode.
pub fn train_samples(samples: &[Sample], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if samples.len() < MIN_SAMPLES {
        return Err(LearnerError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let in_dim = samples[0].input.len();
    let out_dim = samples[0].target.len();
    for s in samples {
        if s.input.len() != in_dim {
            return Err(LearnerError::DimensionMismatch { expected: in_dim, got: s.input.len() });
        }
        if s.target.len() != out_dim {
            return Err(LearnerError::DimensionMismatch { expected: out_dim, got: s.target.len() });
        }
        if s.input.iter().chain(&s.target).any(|v| !v.is_finite()) {
            return Err(LearnerError::NonFinite);
        }
    }

    let mut split_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    split_rng.set_stream(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut split_rng);
    let n = samples.len();
    let n_train = ((cfg.split[0] * n as f64).round() as usize).clamp(1, n);
    let n_val = ((cfg.split[1] * n as f64).round() as usize).min(n - n_train);
    let (train_idx, rest) = order.split_at(n_train);
    let (val_idx, test_idx) = rest.split_at(n_val);

    let mut dims = vec![in_dim];
    dims.extend(&cfg.hidden);
    dims.push(out_dim);
    let mut model = MlpModel::new(&dims, cfg.seed);
    model.set_scalings(
        Scaling::fit(train_idx.iter().map(|&i| samples[i].input.as_slice()), in_dim),
        Scaling::fit(train_idx.iter().map(|&i| samples[i].target.as_slice()), out_dim),
    )?;
    let xs: Vec<Vec<f64>> = train_idx.iter().map(|&i| model.input_scaling.scale(&samples[i].input)).collect();
    let ts: Vec<Vec<f64>> = train_idx.iter().map(|&i| model.output_scaling.scale(&samples[i].target)).collect();

    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(2);
    let mut velocity = Gradients::zeros_like(&model);
    let mut perm: Vec<usize> = (0..xs.len()).collect();
    let mut cursor = perm.len();
    let batch = cfg.batch_size.min(perm.len());
    let batches_per_episode = match cfg.episode_unit {
        EpisodeUnit::Minibatch => 1,
        EpisodeUnit::Epoch => perm.len().div_ceil(batch),
    };
    let mut loss_curve = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let mut episode_loss = 0.0;
        for _ in 0..batches_per_episode {
            if cursor + batch > perm.len() {
                perm.shuffle(&mut batch_rng);
                cursor = 0;
            }
            let ids = &perm[cursor..cursor + batch];
            cursor += batch;
            let bx: Vec<&[f64]> = ids.iter().map(|&i| xs[i].as_slice()).collect();
            let bt: Vec<&[f64]> = ids.iter().map(|&i| ts[i].as_slice()).collect();
            let (loss, grads) = if cfg.parallel {
                parallel_gradients(&model, &bx, &bt)
            } else {
                model.gradients(&bx, &bt)
            };
            model.apply_momentum(&mut velocity, &grads, cfg.learning_rate, cfg.momentum);
            episode_loss += loss;
        }
        loss_curve.push(episode_loss / batches_per_episode as f64);
    }

    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let test = if test_idx.is_empty() {
        evaluate_samples(&model, &pick(train_idx))?
    } else {
        evaluate_samples(&model, &pick(test_idx))?
    };
    let validation = if val_idx.is_empty() {
        None
    } else {
        Some(evaluate_samples(&model, &pick(val_idx))?)
    };
    Ok((
        model,
        TrainReport {
            train_samples: train_idx.len(),
            validation_samples: val_idx.len(),
            test_samples: test_idx.len(),
            test,
            validation,
            loss_curve,
        },
    ))
}

const PARALLEL_CHUNK: usize = 8;

/// Same value as [`MlpModel::gradients`] up to summation order, which is
/// fixed by the chunking and so independent of the thread count.
fn parallel_gradients(model: &MlpModel, xs: &[&[f64]], ts: &[&[f64]]) -> (f64, Gradients) {
    let parts: Vec<(f64, Gradients)> = xs
        .par_chunks(PARALLEL_CHUNK)
        .zip(ts.par_chunks(PARALLEL_CHUNK))
        .map(|(x, t)| model.accumulate(x, t))
        .collect();
    let mut total = Gradients::zeros_like(model);
    let mut sse = 0.0;
    for (s, g) in &parts {
        sse += s;
        total.add_assign(g);
    }
    let denom = xs.len() as f64 * model.output_dim() as f64;
    total.scale(1.0 / denom);
    (sse / denom, total)
}

pub fn evaluate(model: &MlpModel, triplets: &[PushTriplet]) -> Result<EvalReport> {
    let samples: Vec<Sample> = triplets.iter().map(Sample::from).collect();
    evaluate_samples(model, &samples)
}

pub fn evaluate_samples(model: &MlpModel, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(LearnerError::EmptySet);
    }
    if model.output_dim() != 4 {
        return Err(LearnerError::DimensionMismatch { expected: 4, got: model.output_dim() });
    }
    let mut sums = [0.0; 4];
    for s in samples {
        let y = model.predict(&s.input)?;
        if s.target.len() != 4 {
            return Err(LearnerError::DimensionMismatch { expected: 4, got: s.target.len() });
        }
        for k in 0..4 {
            sums[k] += (y[k] - s.target[k]).abs();
        }
    }
    let n = samples.len() as f64;
    Ok(EvalReport {
        mae_u_s: sums[0] / n,
        mae_v_s: sums[1] / n,
        mae_u_e: sums[2] / n,
        mae_v_e: sums[3] / n,
        samples: samples.len(),
    })
}
