use super::gru::GruStep;
use super::params::{AttentionParams, ModelParams};
use crate::corpus::Genre;
use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, dot, matvec, matvec_acc, softmax_into};

/// Encoder states and embedded inputs for one input sequence.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    pub(crate) ids: Vec<usize>,
    /// `[f_i ; b_i]` per position.
    pub(crate) states: Vec<Vec<f64>>,
    pub(crate) input_vectors: Vec<Vec<f64>>,
    /// `U h_i` for hidden-state attention.
    pub(crate) keys_h: Vec<Vec<f64>>,
    /// `U x_i` for input attention; empty when it is off.
    pub(crate) keys_x: Vec<Vec<f64>>,
    pub(crate) fwd_steps: Vec<GruStep>,
    pub(crate) bwd_steps: Vec<GruStep>,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn input_vectors(&self) -> &[Vec<f64>] {
        &self.input_vectors
    }

    /// Backward-direction state at the first position, i.e. after reading
    /// the whole input right to left.
    pub fn final_backward(&self) -> &[f64] {
        &self.bwd_steps[0].h
    }
}

/// Attention weights and contexts for one decoder step.
#[derive(Debug, Clone)]
pub struct Attention {
    pub alpha_h: Vec<f64>,
    pub context_h: Vec<f64>,
    /// Empty when input attention is off.
    pub alpha_x: Vec<f64>,
    pub context_x: Vec<f64>,
    /// `tanh(W s + U k_i)` per position, kept for the backward pass.
    pub(crate) act_h: Vec<Vec<f64>>,
    pub(crate) act_x: Vec<Vec<f64>>,
}

/// One decoder step.
#[derive(Debug, Clone)]
pub struct DecodeStep {
    pub state: Vec<f64>,
    /// Next-token distribution over the whole vocabulary.
    pub dist: Vec<f64>,
    pub attention: Attention,
    pub(crate) gru: GruStep,
    pub(crate) features: Vec<f64>,
}

/// Weights and `tanh` activations over a key sequence.
pub(crate) fn attend(
    att: &AttentionParams,
    s_prev: &[f64],
    keys: &[Vec<f64>],
    values: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let a = att.attn_dim();
    let mut query = vec![0.0; a];
    matvec(att.w.data(), s_prev.len(), s_prev, &mut query);
    let mut acts = Vec::with_capacity(keys.len());
    let mut scores = Vec::with_capacity(keys.len());
    for k in keys {
        let act: Vec<f64> = query.iter().zip(k).map(|(q, k)| (q + k).tanh()).collect();
        scores.push(dot(att.v.data(), &act));
        acts.push(act);
    }
    let mut alpha = vec![0.0; keys.len()];
    softmax_into(&scores, &mut alpha);
    let mut context = vec![0.0; values[0].len()];
    for (w, v) in alpha.iter().zip(values) {
        axpy(*w, v, &mut context);
    }
    (alpha, context, acts)
}

pub(crate) fn keys_for(att: &AttentionParams, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut k = vec![0.0; att.attn_dim()];
            matvec(att.u.data(), r.len(), r, &mut k);
            k
        })
        .collect()
}

impl ModelParams {
    /// Runs both encoder directions over `input_ids` from zero states.
    pub fn encode(&self, input_ids: &[usize]) -> Result<EncoderOutput> {
        if input_ids.is_empty() {
            return Err(Error::EmptyInput("encode"));
        }
        let v = self.config.vocab_size;
        if let Some(&bad) = input_ids.iter().find(|&&id| id >= v) {
            return Err(Error::Precondition(format!("token id {bad} outside vocabulary of {v}")));
        }
        let h = self.config.enc_hidden;
        let xs: Vec<Vec<f64>> = input_ids
            .iter()
            .map(|&id| self.embedding.row(id).to_vec())
            .collect();

        let mut fwd_steps: Vec<GruStep> = Vec::with_capacity(xs.len());
        let mut state = vec![0.0; h];
        for x in &xs {
            let step = self.enc_fwd.forward(x, &state);
            state.clone_from(&step.h);
            fwd_steps.push(step);
        }
        let mut bwd_steps: Vec<GruStep> = Vec::with_capacity(xs.len());
        let mut state = vec![0.0; h];
        for x in xs.iter().rev() {
            let step = self.enc_bwd.forward(x, &state);
            state.clone_from(&step.h);
            bwd_steps.push(step);
        }
        bwd_steps.reverse();

        let states: Vec<Vec<f64>> = fwd_steps
            .iter()
            .zip(&bwd_steps)
            .map(|(f, b)| [f.h.as_slice(), b.h.as_slice()].concat())
            .collect();
        let keys_h = keys_for(&self.att_h, &states);
        let keys_x = match &self.att_x {
            Some(att) => keys_for(att, &xs),
            None => Vec::new(),
        };
        Ok(EncoderOutput {
            ids: input_ids.to_vec(),
            states,
            input_vectors: xs,
            keys_h,
            keys_x,
            fwd_steps,
            bwd_steps,
        })
    }

    /// Attention of the decoder state `s_prev` over encoder states and, when
    /// enabled, over the embedded inputs.
    pub fn attention(&self, s_prev: &[f64], enc: &EncoderOutput) -> Attention {
        let (alpha_h, context_h, act_h) = attend(&self.att_h, s_prev, &enc.keys_h, &enc.states);
        let (alpha_x, context_x, act_x) = match &self.att_x {
            Some(att) => attend(att, s_prev, &enc.keys_x, &enc.input_vectors),
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        Attention {
            alpha_h,
            context_h,
            alpha_x,
            context_x,
            act_h,
            act_x,
        }
    }

    /// `s₀ = tanh(W [b₀ ; indicator(genre)] + b)`; the indicator is omitted
    /// when type indicators are disabled.
    pub fn init_decoder_state(&self, enc: &EncoderOutput, genre: Genre) -> Vec<f64> {
        let input = self.init_input(enc, genre);
        let mut s = self.init_b.data().to_vec();
        matvec_acc(self.init_w.data(), input.len(), &input, &mut s);
        s.iter_mut().for_each(|v| *v = v.tanh());
        s
    }

    pub(crate) fn init_input(&self, enc: &EncoderOutput, genre: Genre) -> Vec<f64> {
        let mut input = enc.final_backward().to_vec();
        if self.config.type_indicator {
            input.extend_from_slice(self.indicator(genre).data());
        }
        input
    }

    /// Consumes `y_prev` and returns the new state with the distribution over
    /// the next token.
    pub fn decode_step(&self, s_prev: &[f64], y_prev: usize, enc: &EncoderOutput) -> DecodeStep {
        let attention = self.attention(s_prev, enc);
        let input = [
            self.embedding.row(y_prev),
            &attention.context_h,
            &attention.context_x,
        ]
        .concat();
        let gru = self.dec.forward(&input, s_prev);
        let features = [gru.h.as_slice(), &attention.context_h, &attention.context_x].concat();
        let mut logits = self.out_b.data().to_vec();
        matvec_acc(self.out_w.data(), features.len(), &features, &mut logits);
        let mut dist = vec![0.0; logits.len()];
        softmax_into(&logits, &mut dist);
        DecodeStep {
            state: gru.h.clone(),
            dist,
            attention,
            gru,
            features,
        }
    }
}
