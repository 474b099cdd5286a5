//! Teacher-forced minibatch training with AdaDelta, hybrid genre mixing,
//! early stopping and checkpoints.

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Genre, TrainingExample};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numerics::{AdaDeltaConfig, AdaDeltaState, Gradients, Parameterized};

/// Which genres an epoch trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenreMode {
    #[serde(rename = "5")]
    FiveOnly,
    #[serde(rename = "7")]
    SevenOnly,
    Hybrid,
}

impl GenreMode {
    pub fn admits(self, genre: Genre) -> bool {
        match self {
            GenreMode::FiveOnly => genre == Genre::FiveChar,
            GenreMode::SevenOnly => genre == Genre::SevenChar,
            GenreMode::Hybrid => true,
        }
    }
}

impl FromStr for GenreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "5" | "five" => Ok(GenreMode::FiveOnly),
            "7" | "seven" => Ok(GenreMode::SevenOnly),
            "hybrid" => Ok(GenreMode::Hybrid),
            _ => Err(Error::Config(format!("unknown genre mode {s:?}; use 5, 7 or hybrid"))),
        }
    }
}

impl fmt::Display for GenreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenreMode::FiveOnly => "5",
            GenreMode::SevenOnly => "7",
            GenreMode::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adadelta: AdaDeltaConfig,
    pub shuffle: bool,
    /// Validation rounds without improvement before stopping.
    pub patience: usize,
    pub genre_mode: GenreMode,
    /// Stop once an epoch's mean loss falls below this value.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            seed: 0,
            adadelta: AdaDeltaConfig::default(),
            shuffle: true,
            patience: 5,
            genre_mode: GenreMode::Hybrid,
            target_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Summary of one pass over the training examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_loss: f64,
    pub loss_five: Option<f64>,
    pub loss_seven: Option<f64>,
    pub examples: usize,
    /// Optimizer steps taken so far.
    pub step: u64,
}

impl EpochReport {
    pub fn genre_loss(&self, genre: Genre) -> Option<f64> {
        match genre {
            Genre::FiveChar => self.loss_five,
            Genre::SevenChar => self.loss_seven,
        }
    }
}

/// Mean per-position cross-entropy of one example and its gradients.
pub fn sequence_loss(example: &TrainingExample, params: &ModelParams) -> Result<(f64, Gradients)> {
    let mut grads = params.zeros_like();
    let loss = params.loss_and_grad(&example.input_ids, &example.target_ids, example.genre, &mut grads)?;
    Ok((loss, Gradients::from_params(&grads)))
}

/// The examples an epoch uses under `mode`, checking the mode's precondition.
pub fn select_examples(examples: &[TrainingExample], mode: GenreMode) -> Result<Vec<&TrainingExample>> {
    if examples.is_empty() {
        return Err(Error::Precondition("no training examples".into()));
    }
    if mode == GenreMode::Hybrid {
        for g in Genre::ALL {
            if !examples.iter().any(|e| e.genre == g) {
                return Err(Error::Precondition(format!(
                    "hybrid training needs both genres, but no {g}-character poems are present"
                )));
            }
        }
    }
    let chosen: Vec<&TrainingExample> = examples.iter().filter(|e| mode.admits(e.genre)).collect();
    if chosen.is_empty() {
        return Err(Error::Precondition(format!("no examples match genre mode {mode}")));
    }
    Ok(chosen)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// One epoch of minibatch training. Gradients are computed per example,
/// averaged over the minibatch and applied with one AdaDelta step.
pub fn train_epoch(
    examples: &[TrainingExample],
    params: &mut ModelParams,
    opt: &mut AdaDeltaState,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochReport> {
    config.validate()?;
    let chosen = select_examples(examples, config.genre_mode)?;
    let mut order: Vec<usize> = (0..chosen.len()).collect();
    if config.shuffle {
        order.shuffle(&mut epoch_rng(config.seed, epoch));
    }

    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    let mut steps = 0u64;
    let mut grads = params.zeros_like();
    for batch in order.chunks(config.batch_size) {
        grads.visit_mut(&mut |_, t| t.fill(0.0));
        for &i in batch {
            let ex = chosen[i];
            let loss = params.loss_and_grad(&ex.input_ids, &ex.target_ids, ex.genre, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss {
                    example: ex.source_id.clone(),
                });
            }
            sums[ex.genre.index()] += loss;
            counts[ex.genre.index()] += 1;
        }
        let inv = 1.0 / batch.len() as f64;
        grads.visit_mut(&mut |_, t| t.scale(inv));
        opt.step(params, &Gradients::from_params(&grads))?;
        steps += 1;
    }

    let n = counts[0] + counts[1];
    let mean = |g: usize| (counts[g] > 0).then(|| sums[g] / counts[g] as f64);
    Ok(EpochReport {
        epoch,
        mean_loss: (sums[0] + sums[1]) / n as f64,
        loss_five: mean(0),
        loss_seven: mean(1),
        examples: n,
        step: steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EpochLimit,
    TargetLoss,
    EarlyStop,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub reports: Vec<EpochReport>,
    pub stop: StopReason,
    /// Best validation score and the epoch it was reached, when validated.
    pub best: Option<(f64, usize)>,
    pub steps: u64,
}

impl FitOutcome {
    pub fn losses(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.mean_loss).collect()
    }
}

/// Runs epochs until the epoch limit, the target loss, or early stopping.
///
/// `after_epoch` sees the parameters and report of each epoch and may return
/// a validation score (higher is better). After `patience` scores without
/// improvement the parameters of the best-scoring epoch are restored.
pub fn fit<F>(
    examples: &[TrainingExample],
    params: &mut ModelParams,
    opt: &mut AdaDeltaState,
    config: &TrainConfig,
    mut after_epoch: F,
) -> Result<FitOutcome>
where
    F: FnMut(&ModelParams, &EpochReport) -> Result<Option<f64>>,
{
    config.validate()?;
    let mut reports = Vec::new();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut stale = 0;
    let mut steps = 0;
    let mut stop = StopReason::EpochLimit;
    for epoch in 1..=config.epochs {
        let mut report = train_epoch(examples, params, opt, config, epoch)?;
        steps += report.step;
        report.step = steps;
        log::debug!("epoch {epoch}: loss {:.6}", report.mean_loss);
        let score = after_epoch(params, &report)?;
        let reached = config.target_loss.is_some_and(|t| report.mean_loss < t);
        reports.push(report);
        if let Some(s) = score {
            match &best {
                Some((b, _, _)) if s <= *b => stale += 1,
                _ => {
                    best = Some((s, epoch, params.clone()));
                    stale = 0;
                }
            }
            if stale >= config.patience.max(1) {
                if let Some((_, _, p)) = &best {
                    *params = p.clone();
                }
                stop = StopReason::EarlyStop;
                break;
            }
        }
        if reached {
            stop = StopReason::TargetLoss;
            break;
        }
    }
    Ok(FitOutcome {
        reports,
        stop,
        best: best.map(|(s, e, _)| (s, e)),
        steps,
    })
}
