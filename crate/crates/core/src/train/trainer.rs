use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use candle_core::backprop::GradStore;
use candle_core::{DType, Var};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use serde::{Deserialize, Serialize};

use super::checkpoint::{self, CheckpointMeta, CHECKPOINT_VERSION};
use super::loss::{head_losses, LossWeights};
use crate::data::{make_batches, Batch, Corpus};
use crate::error::{Error, Result};
use crate::eval::{fr_f1, tf_f1, Greedy};
use crate::graph::ConversionRules;
use crate::nn::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Global gradient-norm limit; 0 disables clipping.
    pub grad_clip: f64,
    pub max_steps: usize,
    /// Steps between validation runs; 0 disables them.
    pub eval_interval: usize,
    pub seed: u64,
    /// Event cap per step during validation decoding.
    pub max_events: usize,
    pub multi_mode: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 5e-4,
            weight_decay: 0.01,
            grad_clip: 1.0,
            max_steps: 2000,
            eval_interval: 200,
            seed: 0,
            max_events: 100,
            multi_mode: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_events == 0 {
            return Err(Error::Invalid("batch_size and max_events must be positive".into()));
        }
        let rates = [self.learning_rate, self.weight_decay, self.grad_clip];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Invalid("rates must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub total: f64,
    /// type, src, dst, label
    pub heads: [f64; 4],
}

/// Reported after every step; `validation` is set on evaluation steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub stats: StepStats,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub losses: Vec<f64>,
    pub validations: Vec<(usize, f64)>,
    pub best: Option<(usize, f64)>,
    pub last_checkpoint: Option<PathBuf>,
    pub best_checkpoint: Option<PathBuf>,
}

pub struct Trainer {
    model: Model,
    weights: LossWeights,
    config: TrainConfig,
    rules: ConversionRules,
    seed: u64,
    params: Vec<Var>,
    opt: AdamW,
    weight_opt: AdamW,
    step: usize,
    epoch: u64,
}

impl Trainer {
    /// `seed` is the model's initialization seed, echoed into checkpoints.
    pub fn new(model: Model, config: TrainConfig, rules: ConversionRules, seed: u64) -> Result<Self> {
        config.validate()?;
        let weights = LossWeights::new(model.dtype(), model.device())?;
        let params = model.params().trainable();
        let adam = |decay| ParamsAdamW {
            lr: config.learning_rate,
            weight_decay: decay,
            ..Default::default()
        };
        let opt = AdamW::new(params.clone(), adam(config.weight_decay))?;
        let weight_opt = AdamW::new(vec![weights.var().clone()], adam(0.0))?;
        Ok(Self {
            model,
            weights,
            config,
            rules,
            seed,
            params,
            opt,
            weight_opt,
            step: 0,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    fn clip(&self, grads: &mut GradStore) -> Result<()> {
        if self.config.grad_clip <= 0.0 {
            return Ok(());
        }
        let mut sq = 0.0;
        for var in &self.params {
            if let Some(g) = grads.get(var.as_tensor()) {
                sq += g.sqr()?.sum_all()?.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            }
        }
        let norm = sq.sqrt();
        if norm > self.config.grad_clip {
            let scale = self.config.grad_clip / norm;
            for var in &self.params {
                if let Some(g) = grads.remove(var.as_tensor()) {
                    grads.insert(var.as_tensor(), (g * scale)?);
                }
            }
        }
        Ok(())
    }

    /// One optimization step on `batch`. `batch_id` names the batch in a
    /// divergence error.
    pub fn train_step(&mut self, batch: &Batch, batch_id: usize) -> Result<StepStats> {
        let out = self.model.teacher_forward(batch)?;
        let losses = head_losses(&out)?;
        let total = self.weights.total(&losses.stack()?)?;
        let value = total.to_dtype(DType::F64)?.to_scalar::<f64>()?;
        if !value.is_finite() {
            return Err(Error::Divergence {
                step: self.step,
                batch: batch_id,
            });
        }
        let mut grads = total.backward()?;
        self.clip(&mut grads)?;
        self.opt.step(&grads)?;
        self.weight_opt.step(&grads)?;
        self.step += 1;
        Ok(StepStats {
            step: self.step,
            total: value,
            heads: losses.values()?,
        })
    }

    /// Validation score: teacher-forced F1, or free-run F1 in multi mode.
    pub fn validate(&self, corpus: &Corpus) -> Result<f64> {
        let greedy = Greedy {
            model: &self.model,
            max_events: self.config.max_events,
        };
        if self.config.multi_mode {
            fr_f1(&greedy, &corpus.trajectories, Some(&self.rules))
        } else {
            tf_f1(&greedy, &corpus.datapoints)
        }
    }

    pub fn meta(&self) -> CheckpointMeta {
        CheckpointMeta {
            version: CHECKPOINT_VERSION,
            model: self.model.config().clone(),
            vocab: self.model.vocab().clone(),
            rules: self.rules.clone(),
            multi_mode: self.config.multi_mode,
            seed: self.seed,
            step: self.step,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.model, &self.weights, &self.meta())
    }

    /// Trains until `max_steps` total steps over reshuffled epochs of `train`.
    /// A call stopped early by the callback can be resumed by calling again;
    /// it continues with the next epoch.
    /// Validates on `dev` every `eval_interval` steps, keeping the best
    /// checkpoint next to the last one when `out_dir` is given. The callback
    /// may stop training early.
    pub fn fit(
        &mut self,
        train: &Corpus,
        dev: Option<&Corpus>,
        out_dir: Option<&Path>,
        mut on_step: impl FnMut(&Progress) -> ControlFlow<()>,
    ) -> Result<TrainSummary> {
        if train.datapoints.is_empty() {
            return Err(Error::Invalid("empty training split".into()));
        }
        let mut summary = TrainSummary::default();
        let last = out_dir.map(|d| d.join("last.safetensors"));
        let best = out_dir.map(|d| d.join("best.safetensors"));
        let vocab = self.model.vocab().clone();
        'outer: while self.step < self.config.max_steps {
            let shuffle = self.config.seed.wrapping_add(self.epoch);
            self.epoch += 1;
            for (batch_id, batch) in
                make_batches(&train.datapoints, &vocab, self.config.batch_size, Some(shuffle)).enumerate()
            {
                if self.step >= self.config.max_steps {
                    break 'outer;
                }
                let stats = self.train_step(&batch, batch_id)?;
                summary.losses.push(stats.total);
                let interval = self.config.eval_interval;
                let validation = match dev {
                    Some(dev)
                        if interval > 0
                            && (self.step.is_multiple_of(interval) || self.step == self.config.max_steps) =>
                    {
                        Some(self.validate(dev)?)
                    }
                    _ => None,
                };
                if let Some(score) = validation {
                    log::info!("step {}: validation {score:.4}", self.step);
                    summary.validations.push((self.step, score));
                    if summary.best.is_none_or(|(_, b)| score > b) {
                        summary.best = Some((self.step, score));
                        if let Some(path) = &best {
                            self.save(path)?;
                            summary.best_checkpoint = Some(path.clone());
                        }
                    }
                }
                log::debug!("step {}: loss {:.4} heads {:?}", stats.step, stats.total, stats.heads);
                if on_step(&Progress { stats, validation }).is_break() {
                    break 'outer;
                }
            }
        }
        summary.steps = self.step;
        if let Some(path) = &last {
            self.save(path)?;
            summary.last_checkpoint = Some(path.clone());
            if summary.best_checkpoint.is_none() {
                if let Some(b) = &best {
                    self.save(b)?;
                    summary.best_checkpoint = Some(b.clone());
                }
            }
        }
        Ok(summary)
    }
}
