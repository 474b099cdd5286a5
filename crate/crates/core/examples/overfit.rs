//! Drives the loss on four poems toward zero, then checks that each poem is
//! reproduced from the first characters of its opening line.
//!
//! cargo run --release --example overfit

use qgen::corpus::{build_training_sequence, build_vocab, parse_corpus_str, Genre};
use qgen::generation::{beam_search_generate, GenRequest};
use qgen::model::{ModelConfig, ModelParams};
use qgen::numerics::AdaDeltaState;
use qgen::prosody::ProsodyRules;
use qgen::training::{fit, TrainConfig};

fn main() -> qgen::Result<()> {
    let all = parse_corpus_str(include_str!("../data/sample_corpus.txt"), "sample", None).poems;
    let mut poems: Vec<_> = all.iter().filter(|p| p.genre == Genre::FiveChar).take(2).cloned().collect();
    poems.extend(all.iter().filter(|p| p.genre == Genre::SevenChar).take(2).cloned());
    let vocab = build_vocab(&poems, 1)?;
    let examples: Vec<_> = poems.iter().map(|p| build_training_sequence(p, &vocab)).collect();

    let config = ModelConfig {
        embed_dim: 32,
        enc_hidden: 64,
        dec_hidden: 128,
        attn_dim: 64,
        ..ModelConfig::new(vocab.len())
    };
    let mut params = ModelParams::new(config, 1)?;
    let tc = TrainConfig {
        epochs: 400,
        batch_size: 1,
        seed: 1,
        target_loss: Some(0.1),
        ..TrainConfig::default()
    };
    let mut opt = AdaDeltaState::new(tc.adadelta, &params)?;
    let outcome = fit(&examples, &mut params, &mut opt, &tc, |_, r| {
        if r.epoch % 10 == 0 {
            println!("epoch {:>3}  loss {:.4}", r.epoch, r.mean_loss);
        }
        Ok(None)
    })?;
    println!("stopped after {} epochs: {:?}", outcome.reports.len(), outcome.stop);

    let rules = ProsodyRules::bundled();
    for p in &poems {
        let kw: String = p.lines[0].iter().take(2).collect();
        let mut req = GenRequest::new(&kw, p.genre);
        req.tone = false;
        req.rhyme = false;
        let g = beam_search_generate(&req, &params, &vocab, &rules)?;
        let same = g.poem.lines == p.lines;
        println!("{kw}: {} {}", g.poem.to_record(), if same { "ok" } else { "differs" });
    }
    Ok(())
}
