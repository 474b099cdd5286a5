//! Trains the cumulative technique variants on the sample corpus and prints
//! held-out BLEU per genre. Sizes are tiny, so the numbers are noisy.
//!
//! cargo run --release --example ablation -- 15

use qgen::corpus::parse_corpus_str;
use qgen::evaluation::{run_ablation, AblationConfig, Techniques};
use qgen::prosody::ProsodyRules;

fn main() -> qgen::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(15);
    let poems = parse_corpus_str(include_str!("../data/sample_corpus.txt"), "sample", None).poems;
    let config = AblationConfig {
        embed_dim: 16,
        enc_hidden: 16,
        dec_hidden: 32,
        attn_dim: 16,
        epochs,
        validate_every: 0,
        ..AblationConfig::default()
    };
    let report = run_ablation(&poems, &ProsodyRules::bundled(), &config, &Techniques::table_rows())?;
    println!(
        "{} training poems, {} held out, vocabulary {}",
        report.train_poems, report.heldout_poems, report.vocab_size
    );
    print!("{}", report.to_table());
    Ok(())
}
