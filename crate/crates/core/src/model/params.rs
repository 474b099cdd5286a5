use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gru::GruParams;
use super::indicators::make_type_indicators;
use super::ModelConfig;
use crate::corpus::Genre;
use crate::error::Result;
use crate::numerics::{Parameterized, Tensor};

/// Additive scoring `e_i = v · tanh(W s + U k_i)` over a key sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `A × H_dec`, applied to the decoder query.
    pub w: Tensor,
    /// `A × key_dim`, applied to each key.
    pub u: Tensor,
    /// `A`
    pub v: Tensor,
}

impl AttentionParams {
    pub fn zeros(attn: usize, query: usize, key: usize) -> Self {
        Self {
            w: Tensor::zeros(&[attn, query]),
            u: Tensor::zeros(&[attn, key]),
            v: Tensor::zeros(&[attn]),
        }
    }

    pub fn attn_dim(&self) -> usize {
        self.v.len()
    }

    pub fn key_dim(&self) -> usize {
        self.u.cols()
    }

    fn for_each(&self, mut f: impl FnMut(&'static str, &Tensor)) {
        f("w", &self.w);
        f("u", &self.u);
        f("v", &self.v);
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&'static str, &mut Tensor)) {
        f("w", &mut self.w);
        f("u", &mut self.u);
        f("v", &mut self.v);
    }
}

/// All tensors of the network.
///
/// The genre indicators are fixed and are not visited as trainable
/// parameters. `att_x` exists only when input attention is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embedding: Tensor,
    pub enc_fwd: GruParams,
    pub enc_bwd: GruParams,
    pub dec: GruParams,
    pub att_h: AttentionParams,
    pub att_x: Option<AttentionParams>,
    pub out_w: Tensor,
    pub out_b: Tensor,
    pub init_w: Tensor,
    pub init_b: Tensor,
    pub indicators: [Tensor; 2],
}

impl ModelParams {
    /// Uniform initialization in `[-init_scale, init_scale]`; indicators come
    /// from the same seed.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut p = Self::zeros_with_indicators(config, make_type_indicators(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = p.config.init_scale;
        p.visit_mut(&mut |_, t| *t = Tensor::uniform(t.shape(), scale, &mut rng));
        Ok(p)
    }

    /// Every trainable tensor zero; indicators still derived from `seed`.
    pub fn zeros(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self::zeros_with_indicators(config, make_type_indicators(seed)))
    }

    pub fn zeros_with_indicators(config: ModelConfig, indicators: [Tensor; 2]) -> Self {
        let c = &config;
        let (v, d, h, hd, a) = (c.vocab_size, c.embed_dim, c.enc_hidden, c.dec_hidden, c.attn_dim);
        Self {
            embedding: Tensor::zeros(&[v, d]),
            enc_fwd: GruParams::zeros(d, h),
            enc_bwd: GruParams::zeros(d, h),
            dec: GruParams::zeros(c.decoder_input_dim(), hd),
            att_h: AttentionParams::zeros(a, hd, 2 * h),
            att_x: c.input_attention.then(|| AttentionParams::zeros(a, hd, d)),
            out_w: Tensor::zeros(&[v, c.output_feature_dim()]),
            out_b: Tensor::zeros(&[v]),
            init_w: Tensor::zeros(&[hd, c.init_input_dim()]),
            init_b: Tensor::zeros(&[hd]),
            indicators,
            config,
        }
    }

    /// Zero tensors of the same shapes, sharing the indicators; used as a
    /// gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self::zeros_with_indicators(self.config.clone(), self.indicators.clone())
    }

    pub fn indicator(&self, genre: Genre) -> &Tensor {
        &self.indicators[genre.index()]
    }
}

impl Parameterized for ModelParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("embedding", &self.embedding);
        self.enc_fwd.for_each(|n, t| f(&format!("enc_fwd.{n}"), t));
        self.enc_bwd.for_each(|n, t| f(&format!("enc_bwd.{n}"), t));
        self.dec.for_each(|n, t| f(&format!("dec.{n}"), t));
        self.att_h.for_each(|n, t| f(&format!("att_h.{n}"), t));
        if let Some(att) = &self.att_x {
            att.for_each(|n, t| f(&format!("att_x.{n}"), t));
        }
        f("out.w", &self.out_w);
        f("out.b", &self.out_b);
        f("init.w", &self.init_w);
        f("init.b", &self.init_b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("embedding", &mut self.embedding);
        self.enc_fwd.for_each_mut(|n, t| f(&format!("enc_fwd.{n}"), t));
        self.enc_bwd.for_each_mut(|n, t| f(&format!("enc_bwd.{n}"), t));
        self.dec.for_each_mut(|n, t| f(&format!("dec.{n}"), t));
        self.att_h.for_each_mut(|n, t| f(&format!("att_h.{n}"), t));
        if let Some(att) = &mut self.att_x {
            att.for_each_mut(|n, t| f(&format!("att_x.{n}"), t));
        }
        f("out.w", &mut self.out_w);
        f("out.b", &mut self.out_b);
        f("init.w", &mut self.init_w);
        f("init.b", &mut self.init_b);
    }
}
