//! Trains a small hybrid model on the sample corpus, round-trips it through
//! a checkpoint file and generates one poem of each genre.
//!
//! cargo run --release --example train_generate -- 40

use qgen::corpus::{build_training_sequence, build_vocab, parse_corpus_str, Genre};
use qgen::generation::{beam_search_generate, GenRequest};
use qgen::model::{ModelConfig, ModelParams};
use qgen::numerics::AdaDeltaState;
use qgen::prosody::{check_compliance, ProsodyRules};
use qgen::training::{fit, load_checkpoint, save_checkpoint, Checkpoint, TrainConfig};

fn main() -> qgen::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let poems = parse_corpus_str(include_str!("../data/sample_corpus.txt"), "sample", None).poems;
    let vocab = build_vocab(&poems, 1)?;
    let examples: Vec<_> = poems.iter().map(|p| build_training_sequence(p, &vocab)).collect();

    let config = ModelConfig {
        embed_dim: 32,
        enc_hidden: 32,
        dec_hidden: 64,
        attn_dim: 32,
        ..ModelConfig::new(vocab.len())
    };
    let mut params = ModelParams::new(config, 3)?;
    let tc = TrainConfig {
        epochs,
        seed: 3,
        ..TrainConfig::default()
    };
    let mut opt = AdaDeltaState::new(tc.adadelta, &params)?;
    let outcome = fit(&examples, &mut params, &mut opt, &tc, |_, r| {
        println!("epoch {:>3}  loss {:.4}", r.epoch, r.mean_loss);
        Ok(None)
    })?;

    let path = std::env::temp_dir().join("qgen-example.ckpt");
    let ck = Checkpoint {
        params,
        vocab,
        optimizer: Some(opt),
        step: outcome.steps,
        seed: 3,
    };
    save_checkpoint(&path, &ck)?;
    let ck = load_checkpoint(&path)?;
    println!("checkpoint written to {}", path.display());

    let rules = ProsodyRules::bundled();
    for (kw, genre) in [("春风", Genre::FiveChar), ("明月", Genre::SevenChar)] {
        let mut req = GenRequest::new(kw, genre);
        req.log_top_k = 3;
        let g = beam_search_generate(&req, &ck.params, &ck.vocab, &rules)?;
        println!("\n{kw} ({} chars), score {:.3}", genre.line_len(), g.score);
        for i in 0..4 {
            println!("  {}", g.poem.line_string(i));
        }
        let report = check_compliance(&g.poem.lines, &rules);
        println!("  compliant: {}", report.is_compliant());
        if let Some(step) = g.log.first() {
            let top: Vec<String> = step.top_k.iter().map(|c| format!("{} {:.3}", c.token, c.prob)).collect();
            println!("  first step candidates: {}", top.join(", "));
            println!("  attention over keyword states: {:.3?}", step.alpha_h);
        }
    }
    Ok(())
}
