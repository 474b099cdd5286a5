//! The encoder-decoder network: bidirectional GRU encoder, GRU decoder with
//! attention over both encoder states and input embeddings, and genre type
//! indicators feeding the decoder's initial state.

mod backward;
mod gru;
mod indicators;
mod network;
mod params;

pub use backward::{additive_attention, additive_attention_backward, AttentionGrads, ForwardTrace};
pub use gru::{gru_cell, gru_cell_backward, GruGrads, GruParams};
pub use indicators::{indicators_from_matrix, make_type_indicators, INDICATOR_DIM};
pub use network::{Attention, DecodeStep, EncoderOutput};
pub use params::{AttentionParams, ModelParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub attn_dim: usize,
    /// Attend over the embedded input characters as well as the encoder states.
    pub input_attention: bool,
    /// Feed the genre indicator into the decoder's initial state.
    pub type_indicator: bool,
    pub init_scale: f64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 128,
            enc_hidden: 128,
            dec_hidden: 256,
            attn_dim: 128,
            input_attention: true,
            type_indicator: true,
            init_scale: 0.08,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("enc_hidden", self.enc_hidden),
            ("dec_hidden", self.dec_hidden),
            ("attn_dim", self.attn_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Config(format!("bad init_scale {}", self.init_scale)));
        }
        Ok(())
    }

    /// Width of the hidden-state context `2H`.
    pub fn ctx_h_dim(&self) -> usize {
        2 * self.enc_hidden
    }

    /// Width of the input-vector context; zero when input attention is off.
    pub fn ctx_x_dim(&self) -> usize {
        if self.input_attention {
            self.embed_dim
        } else {
            0
        }
    }

    pub fn decoder_input_dim(&self) -> usize {
        self.embed_dim + self.ctx_h_dim() + self.ctx_x_dim()
    }

    pub fn output_feature_dim(&self) -> usize {
        self.dec_hidden + self.ctx_h_dim() + self.ctx_x_dim()
    }

    pub fn init_input_dim(&self) -> usize {
        self.enc_hidden + if self.type_indicator { INDICATOR_DIM } else { 0 }
    }
}
