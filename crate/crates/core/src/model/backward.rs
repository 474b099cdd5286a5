//! Teacher-forced forward pass over a whole target sequence and its
//! hand-derived reverse pass.

use super::network::{attend, keys_for, DecodeStep, EncoderOutput};
use super::params::{AttentionParams, ModelParams};
use crate::corpus::{Genre, BOS};
use crate::error::{Error, Result};
use crate::numerics::ops::{axpy, dot, matvec_t_acc, outer_acc, softmax_backward, PROB_FLOOR};

/// Activations of one teacher-forced pass, sufficient for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub genre: Genre,
    pub targets: Vec<usize>,
    /// Mean per-position cross-entropy.
    pub loss: f64,
    pub enc: EncoderOutput,
    pub(crate) init_input: Vec<f64>,
    pub(crate) s0: Vec<f64>,
    pub steps: Vec<DecodeStep>,
}

impl ForwardTrace {
    /// Most probable token at every position (first index wins ties).
    pub fn argmax_tokens(&self) -> Vec<usize> {
        self.steps
            .iter()
            .map(|s| {
                let mut best = 0;
                for (i, &p) in s.dist.iter().enumerate() {
                    if p > s.dist[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// Reverse pass through one attention block. Accumulates into `grads`,
/// `dvalues`, `dkeys` and `ds_prev`.
#[allow(clippy::too_many_arguments)]
fn attention_backward(
    att: &AttentionParams,
    grads: &mut AttentionParams,
    s_prev: &[f64],
    alpha: &[f64],
    acts: &[Vec<f64>],
    values: &[Vec<f64>],
    dcontext: &[f64],
    dvalues: &mut [Vec<f64>],
    dkeys: &mut [Vec<f64>],
    ds_prev: &mut [f64],
) {
    let t = alpha.len();
    let dalpha: Vec<f64> = values.iter().map(|v| dot(dcontext, v)).collect();
    for (dv, &a) in dvalues.iter_mut().zip(alpha) {
        axpy(a, dcontext, dv);
    }
    let mut dscore = vec![0.0; t];
    softmax_backward(alpha, &dalpha, &mut dscore);
    let mut dquery = vec![0.0; att.attn_dim()];
    for i in 0..t {
        let act = &acts[i];
        axpy(dscore[i], act, grads.v.data_mut());
        for (k, (dq, a)) in dquery.iter_mut().zip(act).enumerate() {
            let dpre = dscore[i] * att.v.data()[k] * (1.0 - a * a);
            *dq += dpre;
            dkeys[i][k] += dpre;
        }
    }
    outer_acc(grads.w.data_mut(), &dquery, s_prev);
    matvec_t_acc(att.w.data(), s_prev.len(), &dquery, ds_prev);
}

/// Additive attention of `query` over `memory`, whose rows serve as values
/// and, through `U`, as keys. Returns `(α, context)`.
pub fn additive_attention(att: &AttentionParams, query: &[f64], memory: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_attention(att, query, memory)?;
    let (alpha, context, _) = attend(att, query, &keys_for(att, memory), memory);
    Ok((alpha, context))
}

/// Gradients of [`additive_attention`] with respect to its context output.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub params: AttentionParams,
    pub dquery: Vec<f64>,
    pub dmemory: Vec<Vec<f64>>,
}

pub fn additive_attention_backward(
    att: &AttentionParams,
    query: &[f64],
    memory: &[Vec<f64>],
    dcontext: &[f64],
) -> Result<AttentionGrads> {
    check_attention(att, query, memory)?;
    if dcontext.len() != att.key_dim() {
        return Err(Error::DimensionMismatch {
            expected: att.key_dim(),
            found: dcontext.len(),
        });
    }
    let (alpha, _, acts) = attend(att, query, &keys_for(att, memory), memory);
    let mut params = AttentionParams::zeros(att.attn_dim(), query.len(), att.key_dim());
    let mut dmemory = vec![vec![0.0; att.key_dim()]; memory.len()];
    let mut dkeys = vec![vec![0.0; att.attn_dim()]; memory.len()];
    let mut dquery = vec![0.0; query.len()];
    attention_backward(
        att, &mut params, query, &alpha, &acts, memory, dcontext, &mut dmemory, &mut dkeys, &mut dquery,
    );
    for ((dk, m), dm) in dkeys.iter().zip(memory).zip(dmemory.iter_mut()) {
        outer_acc(params.u.data_mut(), dk, m);
        matvec_t_acc(att.u.data(), m.len(), dk, dm);
    }
    Ok(AttentionGrads { params, dquery, dmemory })
}

fn check_attention(att: &AttentionParams, query: &[f64], memory: &[Vec<f64>]) -> Result<()> {
    if memory.is_empty() {
        return Err(Error::EmptyInput("attention memory"));
    }
    if query.len() != att.w.cols() {
        return Err(Error::DimensionMismatch {
            expected: att.w.cols(),
            found: query.len(),
        });
    }
    if let Some(m) = memory.iter().find(|m| m.len() != att.key_dim()) {
        return Err(Error::DimensionMismatch {
            expected: att.key_dim(),
            found: m.len(),
        });
    }
    Ok(())
}

impl ModelParams {
    /// Encodes `input_ids` and decodes `target_ids` with teacher forcing:
    /// BOS first, then each gold token.
    pub fn forward_teacher(&self, input_ids: &[usize], target_ids: &[usize], genre: Genre) -> Result<ForwardTrace> {
        if target_ids.is_empty() {
            return Err(Error::EmptyInput("target sequence"));
        }
        let v = self.config.vocab_size;
        if let Some(&bad) = target_ids.iter().find(|&&id| id >= v) {
            return Err(Error::Precondition(format!("token id {bad} outside vocabulary of {v}")));
        }
        let enc = self.encode(input_ids)?;
        let init_input = self.init_input(&enc, genre);
        let s0 = self.init_decoder_state(&enc, genre);
        let mut steps = Vec::with_capacity(target_ids.len());
        let mut loss = 0.0;
        let mut state = s0.clone();
        let mut prev = BOS;
        for &y in target_ids {
            let step = self.decode_step(&state, prev, &enc);
            let p = step.dist[y];
            loss -= if p < PROB_FLOOR { PROB_FLOOR } else { p }.ln();
            state.clone_from(&step.state);
            prev = y;
            steps.push(step);
        }
        Ok(ForwardTrace {
            genre,
            targets: target_ids.to_vec(),
            loss: loss / target_ids.len() as f64,
            enc,
            init_input,
            s0,
            steps,
        })
    }

    /// Adds the gradient of `trace.loss` with respect to every trainable
    /// tensor into `grads`, which must share this model's config.
    pub fn backward(&self, trace: &ForwardTrace, grads: &mut ModelParams) {
        let c = &self.config;
        let (d, h, hd) = (c.embed_dim, c.enc_hidden, c.dec_hidden);
        let (ch, cx) = (c.ctx_h_dim(), c.ctx_x_dim());
        let enc = &trace.enc;
        let t_in = enc.len();
        let n = trace.targets.len() as f64;
        let feat_dim = c.output_feature_dim();

        let mut dstates = vec![vec![0.0; ch]; t_in];
        let mut dinputs = vec![vec![0.0; d]; t_in];
        let mut dkeys_h = vec![vec![0.0; c.attn_dim]; t_in];
        let mut dkeys_x = vec![vec![0.0; c.attn_dim]; t_in];

        let mut ds = vec![0.0; hd];
        for (t, step) in trace.steps.iter().enumerate().rev() {
            let s_prev = if t == 0 { &trace.s0 } else { &trace.steps[t - 1].state };
            let y_prev = if t == 0 { BOS } else { trace.targets[t - 1] };

            let mut dlogits: Vec<f64> = step.dist.iter().map(|p| p / n).collect();
            dlogits[trace.targets[t]] -= 1.0 / n;
            outer_acc(grads.out_w.data_mut(), &dlogits, &step.features);
            axpy(1.0, &dlogits, grads.out_b.data_mut());
            let mut dfeat = vec![0.0; feat_dim];
            matvec_t_acc(self.out_w.data(), feat_dim, &dlogits, &mut dfeat);

            axpy(1.0, &dfeat[..hd], &mut ds);
            let mut dctx_h = dfeat[hd..hd + ch].to_vec();
            let mut dctx_x = dfeat[hd + ch..].to_vec();

            let mut dinput = vec![0.0; c.decoder_input_dim()];
            let mut ds_prev = vec![0.0; hd];
            self.dec.backward(&step.gru, &ds, &mut grads.dec, &mut dinput, &mut ds_prev);
            axpy(1.0, &dinput[..d], grads.embedding.row_mut(y_prev));
            axpy(1.0, &dinput[d..d + ch], &mut dctx_h);
            axpy(1.0, &dinput[d + ch..], &mut dctx_x);

            let att = &step.attention;
            attention_backward(
                &self.att_h,
                &mut grads.att_h,
                s_prev,
                &att.alpha_h,
                &att.act_h,
                &enc.states,
                &dctx_h,
                &mut dstates,
                &mut dkeys_h,
                &mut ds_prev,
            );
            if let (Some(ax), Some(gx)) = (&self.att_x, grads.att_x.as_mut()) {
                debug_assert_eq!(dctx_x.len(), cx);
                attention_backward(
                    ax,
                    gx,
                    s_prev,
                    &att.alpha_x,
                    &att.act_x,
                    &enc.input_vectors,
                    &dctx_x,
                    &mut dinputs,
                    &mut dkeys_x,
                    &mut ds_prev,
                );
            }
            ds = ds_prev;
        }

        // initial state
        let dpre: Vec<f64> = ds.iter().zip(&trace.s0).map(|(g, s)| g * (1.0 - s * s)).collect();
        outer_acc(grads.init_w.data_mut(), &dpre, &trace.init_input);
        axpy(1.0, &dpre, grads.init_b.data_mut());
        let mut dinit = vec![0.0; trace.init_input.len()];
        matvec_t_acc(self.init_w.data(), trace.init_input.len(), &dpre, &mut dinit);

        // precomputed keys
        for i in 0..t_in {
            outer_acc(grads.att_h.u.data_mut(), &dkeys_h[i], &enc.states[i]);
            matvec_t_acc(self.att_h.u.data(), ch, &dkeys_h[i], &mut dstates[i]);
            if let (Some(ax), Some(gx)) = (&self.att_x, grads.att_x.as_mut()) {
                outer_acc(gx.u.data_mut(), &dkeys_x[i], &enc.input_vectors[i]);
                matvec_t_acc(ax.u.data(), d, &dkeys_x[i], &mut dinputs[i]);
            }
        }

        // forward chain, right to left
        let mut carry = vec![0.0; h];
        for i in (0..t_in).rev() {
            let mut dh = dstates[i][..h].to_vec();
            axpy(1.0, &carry, &mut dh);
            let mut next = vec![0.0; h];
            self.enc_fwd
                .backward(&enc.fwd_steps[i], &dh, &mut grads.enc_fwd, &mut dinputs[i], &mut next);
            carry = next;
        }
        // backward chain, left to right; b₀ also feeds the initial state
        let mut carry = dinit[..h].to_vec();
        for i in 0..t_in {
            let mut dh = dstates[i][h..].to_vec();
            axpy(1.0, &carry, &mut dh);
            let mut next = vec![0.0; h];
            self.enc_bwd
                .backward(&enc.bwd_steps[i], &dh, &mut grads.enc_bwd, &mut dinputs[i], &mut next);
            carry = next;
        }

        for (i, &id) in enc.ids.iter().enumerate() {
            axpy(1.0, &dinputs[i], grads.embedding.row_mut(id));
        }
    }

    /// Mean cross-entropy of a teacher-forced pass; gradients are added to `grads`.
    pub fn loss_and_grad(
        &self,
        input_ids: &[usize],
        target_ids: &[usize],
        genre: Genre,
        grads: &mut ModelParams,
    ) -> Result<f64> {
        let trace = self.forward_teacher(input_ids, target_ids, genre)?;
        self.backward(&trace, grads);
        Ok(trace.loss)
    }
}
