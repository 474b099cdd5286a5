use serde::{Deserialize, Serialize};

use super::{mean_bleu, KeywordScore, ReferenceIndex, AGGREGATION, DEFAULT_MAX_REFERENCES};
use crate::corpus::{build_training_sequence_with, build_vocab, Genre, Poem, Vocab};
use crate::embeddings::{train_skipgram, SkipGramConfig};
use crate::error::{Error, Result};
use crate::generation::{beam_search_generate, GenRequest};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::AdaDeltaState;
use crate::prosody::ProsodyRules;
use crate::training::{fit, FitOutcome, GenreMode, TrainConfig};

/// The four enhancement techniques, each switchable on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Techniques {
    /// Initialize the embedding matrix from skip-gram vectors trained on
    /// the training split; random otherwise.
    pub char_vectors: bool,
    /// Append line 1 again after line 4 in the training target.
    pub reconstruction: bool,
    /// Attend over input character embeddings as well as hidden states.
    pub input_attention: bool,
    /// One model for both genres with type indicators; otherwise one
    /// model per genre.
    pub hybrid: bool,
}

impl Techniques {
    pub const NONE: Techniques = Techniques {
        char_vectors: false,
        reconstruction: false,
        input_attention: false,
        hybrid: false,
    };

    pub const ALL: Techniques = Techniques {
        char_vectors: true,
        reconstruction: true,
        input_attention: true,
        hybrid: true,
    };

    /// The cumulative rows of the enhancement table.
    pub fn table_rows() -> Vec<(&'static str, Techniques)> {
        let mut t = Techniques::NONE;
        let mut rows = vec![("Basic model", t)];
        t.char_vectors = true;
        rows.push(("+ Character vectors", t));
        t.reconstruction = true;
        rows.push(("+ Input reconstruction", t));
        t.input_attention = true;
        rows.push(("+ Input vector attention", t));
        t.hybrid = true;
        rows.push(("+ Hybrid training", t));
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub attn_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Held-out BLEU evaluations without improvement before stopping.
    pub patience: usize,
    /// Score the held-out split every this many epochs; 0 disables
    /// early stopping.
    pub validate_every: usize,
    pub scoring: HeldoutScoring,
    /// Every `holdout_every`-th poem of each genre is held out.
    pub holdout_every: usize,
    pub skipgram: SkipGramConfig,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            enc_hidden: 32,
            dec_hidden: 64,
            attn_dim: 32,
            epochs: 30,
            batch_size: 8,
            patience: 5,
            validate_every: 5,
            scoring: HeldoutScoring::default(),
            holdout_every: 5,
            skipgram: SkipGramConfig {
                epochs: 5,
                ..SkipGramConfig::default()
            },
            seed: 0,
        }
    }
}

/// Splits each genre so that every `every`-th poem (1-based) is held out.
pub fn split_heldout(poems: &[Poem], every: usize) -> Result<(Vec<Poem>, Vec<Poem>)> {
    if every < 2 {
        return Err(Error::Config("holdout_every must be at least 2".into()));
    }
    let (mut train, mut held) = (Vec::new(), Vec::new());
    let mut seen = [0usize; 2];
    for p in poems {
        seen[p.genre.index()] += 1;
        if seen[p.genre.index()] % every == 0 {
            held.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    Ok((train, held))
}

/// Models trained for one technique combination: a single hybrid model or
/// one model per genre.
#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub techniques: Techniques,
    pub models: Vec<(GenreMode, ModelParams, FitOutcome)>,
}

impl TrainedVariant {
    pub fn model_for(&self, genre: Genre) -> Option<&ModelParams> {
        self.models
            .iter()
            .find(|(m, _, _)| m.admits(genre))
            .map(|(_, p, _)| p)
    }
}

/// How held-out poems are turned into scored generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutScoring {
    pub beam_width: usize,
    /// Leading characters of a held-out poem's first line used as keywords.
    pub keyword_chars: usize,
    pub max_references: usize,
    pub seed: u64,
}

impl Default for HeldoutScoring {
    fn default() -> Self {
        Self {
            beam_width: 3,
            keyword_chars: 2,
            max_references: DEFAULT_MAX_REFERENCES,
            seed: 0,
        }
    }
}

/// Generates from each admitted held-out poem's keywords and scores the
/// result against `index`.
pub fn score_heldout(
    params: &ModelParams,
    heldout: &[Poem],
    mode: GenreMode,
    vocab: &Vocab,
    rules: &ProsodyRules,
    index: &ReferenceIndex,
    scoring: &HeldoutScoring,
) -> Result<Vec<KeywordScore>> {
    let mut out = Vec::new();
    for poem in heldout.iter().filter(|p| mode.admits(p.genre)) {
        let keyword: String = poem.lines[0].iter().take(scoring.keyword_chars).collect();
        let mut req = GenRequest::new(&keyword, poem.genre);
        req.beam_width = scoring.beam_width;
        req.seed = scoring.seed;
        req.log_top_k = 0;
        let g = beam_search_generate(&req, params, vocab, rules)?;
        out.push(KeywordScore::score(&keyword, poem.genre, &g.poem, index, scoring.max_references)?);
    }
    Ok(out)
}

/// Trains the model(s) for `techniques`, early-stopping on held-out BLEU.
pub fn train_variant(
    train: &[Poem],
    heldout: &[Poem],
    vocab: &Vocab,
    rules: &ProsodyRules,
    index: &ReferenceIndex,
    techniques: Techniques,
    config: &AblationConfig,
) -> Result<TrainedVariant> {
    let examples: Vec<_> = train
        .iter()
        .map(|p| build_training_sequence_with(p, vocab, techniques.reconstruction))
        .collect();
    let pretrained = if techniques.char_vectors {
        let seqs: Vec<Vec<usize>> = train
            .iter()
            .map(|p| vocab.encode(&p.chars().collect::<Vec<_>>()))
            .collect();
        let sg = SkipGramConfig {
            dim: config.embed_dim,
            seed: config.seed,
            ..config.skipgram.clone()
        };
        Some(train_skipgram(&seqs, vocab.len(), &sg)?)
    } else {
        None
    };
    let modes = if techniques.hybrid {
        vec![GenreMode::Hybrid]
    } else {
        vec![GenreMode::FiveOnly, GenreMode::SevenOnly]
    };
    let mut models = Vec::new();
    for mode in modes {
        let mc = ModelConfig {
            embed_dim: config.embed_dim,
            enc_hidden: config.enc_hidden,
            dec_hidden: config.dec_hidden,
            attn_dim: config.attn_dim,
            input_attention: techniques.input_attention,
            type_indicator: techniques.hybrid,
            ..ModelConfig::new(vocab.len())
        };
        let mut params = ModelParams::new(mc, config.seed)?;
        if let Some(m) = &pretrained {
            params.embedding = m.clone();
        }
        let tc = TrainConfig {
            epochs: config.epochs,
            batch_size: config.batch_size,
            seed: config.seed,
            patience: config.patience,
            genre_mode: mode,
            ..TrainConfig::default()
        };
        let mut opt = AdaDeltaState::new(tc.adadelta, &params)?;
        let outcome = fit(&examples, &mut params, &mut opt, &tc, |p, report| {
            if config.validate_every == 0 || report.epoch % config.validate_every != 0 {
                return Ok(None);
            }
            let scores = score_heldout(p, heldout, mode, vocab, rules, index, &config.scoring)?;
            Ok(Some(mean_bleu(&scores, None).unwrap_or(0.0)))
        })?;
        models.push((mode, params, outcome));
    }
    Ok(TrainedVariant { techniques, models })
}

/// One row of the enhancement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub techniques: Techniques,
    pub bleu_five: Option<f64>,
    pub bleu_seven: Option<f64>,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub records: Vec<KeywordScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub aggregation: String,
    pub train_poems: usize,
    pub heldout_poems: usize,
    pub vocab_size: usize,
    pub config: AblationConfig,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Fixed-width text table: model, 5-char BLEU, 7-char BLEU.
    pub fn to_table(&self) -> String {
        let cell = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
        let mut s = format!("{:<28} {:>7} {:>7}\n", "Model", "5-char", "7-char");
        for r in &self.rows {
            s.push_str(&format!("{:<28} {:>7} {:>7}\n", r.label, cell(r.bleu_five), cell(r.bleu_seven)));
        }
        s
    }
}

/// Splits `poems`, trains every row's variant on the training split and
/// scores generations for held-out keywords against the full corpus.
pub fn run_ablation(
    poems: &[Poem],
    rules: &ProsodyRules,
    config: &AblationConfig,
    rows: &[(&str, Techniques)],
) -> Result<AblationReport> {
    let (train, heldout) = split_heldout(poems, config.holdout_every)?;
    if heldout.is_empty() {
        return Err(Error::Precondition("held-out split is empty".into()));
    }
    let vocab = build_vocab(&train, 1)?;
    let index = ReferenceIndex::new(poems);
    let mut out = Vec::new();
    for &(label, t) in rows {
        log::info!("ablation row {label:?}");
        let v = train_variant(&train, &heldout, &vocab, rules, &index, t, config)?;
        let mut records = Vec::new();
        let mut epochs_run = 0;
        let mut loss = 0.0;
        for (mode, params, outcome) in &v.models {
            records.extend(score_heldout(params, &heldout, *mode, &vocab, rules, &index, &config.scoring)?);
            epochs_run += outcome.reports.len();
            loss += outcome.reports.last().map_or(f64::NAN, |r| r.mean_loss) / v.models.len() as f64;
        }
        out.push(AblationRow {
            label: label.to_string(),
            techniques: t,
            bleu_five: mean_bleu(&records, Some(Genre::FiveChar)),
            bleu_seven: mean_bleu(&records, Some(Genre::SevenChar)),
            epochs_run,
            final_loss: loss,
            records,
        });
    }
    Ok(AblationReport {
        aggregation: AGGREGATION.to_string(),
        train_poems: train.len(),
        heldout_poems: heldout.len(),
        vocab_size: vocab.len(),
        config: config.clone(),
        rows: out,
    })
}
