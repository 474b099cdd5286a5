//! Skip-gram character vectors with negative sampling, their text format,
//! and injection into the model's embedding matrix.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Vocab, RESERVED};
use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, dot, sigmoid};
use crate::numerics::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial SGD step, decayed linearly to 1e-4 of itself.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

/// Row vectors for a list of named tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Tensor,
}

impl EmbeddingMatrix {
    pub fn new(tokens: Vec<String>, matrix: Tensor) -> Result<Self> {
        if matrix.shape().len() != 2 || matrix.rows() != tokens.len() {
            return Err(Error::DimensionMismatch {
                expected: tokens.len(),
                found: matrix.shape()[0],
            });
        }
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { tokens, index, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.matrix.row(i))
    }

    /// `V d` header, then `token v1 … vd` per row. Values round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.len(), self.dim());
        for (i, t) in self.tokens.iter().enumerate() {
            s.push_str(t);
            for v in self.matrix.row(i) {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let bad = |line: usize, m: String| Error::Parse {
            path: source.into(),
            line,
            message: m,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "missing `V d` header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|x| x.parse().map_err(|_| bad(1, format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [v, d] = dims[..] else {
            return Err(bad(1, format!("header must be `V d`, found {header:?}")));
        };
        let mut tokens = Vec::with_capacity(v);
        let mut data = Vec::with_capacity(v * d);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let tok = cols.next().expect("non-empty line");
            let row: Vec<f64> = cols
                .map(|x| x.parse().map_err(|_| bad(i + 2, format!("bad number {x:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != d {
                return Err(bad(i + 2, format!("expected {d} values, found {}", row.len())));
            }
            tokens.push(tok.to_string());
            data.extend(row);
        }
        if tokens.len() != v || v == 0 || d == 0 {
            return Err(bad(1, format!("header promises {v} rows of {d}, found {} rows", tokens.len())));
        }
        let matrix = Tensor::new(&[v, d], data).map_err(|e| bad(1, e.to_string()))?;
        Self::new(tokens, matrix)
    }
}

pub fn save_embeddings(path: impl AsRef<Path>, emb: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, emb.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_text(&text, &path.display().to_string())
}

/// `(center, context)` pairs within `window` on either side, center-major,
/// left context before right.
pub fn skipgram_pairs<T: Copy>(seq: &[T], window: usize) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for i in 0..seq.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(seq.len() - 1);
        for j in lo..=hi {
            if j != i {
                out.push((seq[i], seq[j]));
            }
        }
    }
    out
}

/// Noise distribution `count^0.75 / Σ count^0.75`.
pub fn negative_distribution(counts: &[u64]) -> Vec<f64> {
    let w: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return vec![0.0; counts.len()];
    }
    w.iter().map(|x| x / total).collect()
}

/// Gradients of [`pair_loss`] with respect to each vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGrad {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// `−ln σ(u·v) − Σ ln σ(−u·v_neg)` and its gradient.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (f64, PairGrad) {
    let s = dot(center, context);
    let mut loss = -sigmoid(s).ln();
    let g = sigmoid(s) - 1.0;
    let mut dcenter: Vec<f64> = context.iter().map(|v| g * v).collect();
    let dcontext: Vec<f64> = center.iter().map(|u| g * u).collect();
    let mut dnegs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let sn = dot(center, n);
        loss -= sigmoid(-sn).ln();
        let gn = sigmoid(sn);
        axpy(gn, n, &mut dcenter);
        dnegs.push(center.iter().map(|u| gn * u).collect());
    }
    (
        loss,
        PairGrad {
            center: dcenter,
            context: dcontext,
            negatives: dnegs,
        },
    )
}

/// Trains center vectors over id sequences with `vocab_size` rows.
/// Context windows never cross sequence boundaries.
pub fn train_skipgram(sequences: &[Vec<usize>], vocab_size: usize, config: &SkipGramConfig) -> Result<Tensor> {
    if config.window < 1 || config.negatives < 1 || config.dim < 2 {
        return Err(Error::Config("skip-gram needs window >= 1, negatives >= 1 and dim >= 2".into()));
    }
    let total_tokens: usize = sequences.iter().map(Vec::len).sum();
    if total_tokens < config.window + 1 {
        return Err(Error::Precondition(format!(
            "corpus has {total_tokens} characters, fewer than window + 1 = {}",
            config.window + 1
        )));
    }
    if let Some(&bad) = sequences.iter().flatten().find(|&&id| id >= vocab_size) {
        return Err(Error::Precondition(format!("token id {bad} outside vocabulary of {vocab_size}")));
    }
    let mut counts = vec![0u64; vocab_size];
    for &id in sequences.iter().flatten() {
        counts[id] += 1;
    }
    let noise = WeightedIndex::new(negative_distribution(&counts)).map_err(|e| Error::Precondition(e.to_string()))?;

    let d = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w_in = Tensor::uniform(&[vocab_size, d], 0.5 / d as f64, &mut rng);
    let mut w_out = Tensor::zeros(&[vocab_size, d]);

    let pairs_per_epoch: usize = sequences.iter().map(|s| skipgram_pairs(s, config.window).len()).sum();
    let total = (pairs_per_epoch * config.epochs).max(1) as f64;
    let mut seen = 0usize;
    let mut negs = Vec::with_capacity(config.negatives);
    for _ in 0..config.epochs {
        for seq in sequences {
            for (center, context) in skipgram_pairs(seq, config.window) {
                let lr = config.learning_rate * (1.0 - seen as f64 / total).max(1e-4);
                seen += 1;
                negs.clear();
                for _ in 0..config.negatives {
                    let n = noise.sample(&mut rng);
                    if n != context {
                        negs.push(n);
                    }
                }
                let neg_rows: Vec<&[f64]> = negs.iter().map(|&n| w_out.row(n)).collect();
                let (_, g) = pair_loss(w_in.row(center), w_out.row(context), &neg_rows);
                axpy(-lr, &g.center, w_in.row_mut(center));
                axpy(-lr, &g.context, w_out.row_mut(context));
                for (&n, gn) in negs.iter().zip(&g.negatives) {
                    axpy(-lr, gn, w_out.row_mut(n));
                }
            }
        }
    }
    Ok(w_in)
}

/// Skip-gram vectors for every id of `vocab`, trained on its id sequences.
pub fn train_vocab_embeddings(sequences: &[Vec<usize>], vocab: &Vocab, config: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    let m = train_skipgram(sequences, vocab.len(), config)?;
    EmbeddingMatrix::new((0..vocab.len()).map(|i| vocab.token_name(i)).collect(), m)
}

/// Model embedding matrix: pretrained rows for characters the pretraining
/// knows, `U[-0.08, 0.08]` from `seed` for everything else.
pub fn init_embedding_matrix(pretrained: &EmbeddingMatrix, vocab: &Vocab, dim: usize, seed: u64) -> Result<Tensor> {
    if pretrained.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: pretrained.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Tensor::zeros(&[vocab.len(), dim]);
    for id in 0..vocab.len() {
        let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.08..=0.08)).collect();
        let src = (id >= RESERVED)
            .then(|| pretrained.vector(&vocab.token_name(id)))
            .flatten();
        m.row_mut(id).copy_from_slice(src.unwrap_or(&row));
    }
    Ok(m)
}
