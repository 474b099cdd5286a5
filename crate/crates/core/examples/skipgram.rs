//! Trains skip-gram character vectors on the sample corpus and prints the
//! nearest neighbours of a few characters.
//!
//! cargo run --release --example skipgram

use qgen::corpus::{build_vocab, parse_corpus_str};
use qgen::embeddings::{train_vocab_embeddings, EmbeddingMatrix, SkipGramConfig};
use qgen::numerics::ops::dot;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt()).max(1e-12)
}

fn neighbours<'a>(emb: &'a EmbeddingMatrix, c: &str, k: usize) -> Vec<(&'a str, f64)> {
    let Some(v) = emb.vector(c) else { return Vec::new() };
    let mut all: Vec<(&str, f64)> = emb
        .tokens()
        .iter()
        .filter(|t| t.as_str() != c && !t.starts_with('<'))
        .map(|t| (t.as_str(), cosine(v, emb.vector(t).unwrap())))
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1));
    all.truncate(k);
    all
}

fn main() {
    let poems = parse_corpus_str(include_str!("../data/sample_corpus.txt"), "sample", None).poems;
    let vocab = build_vocab(&poems, 1).unwrap();
    let seqs: Vec<Vec<usize>> = poems.iter().map(|p| vocab.encode(&p.chars().collect::<Vec<_>>())).collect();
    let cfg = SkipGramConfig {
        dim: 32,
        window: 2,
        epochs: 30,
        seed: 7,
        ..SkipGramConfig::default()
    };
    let emb = train_vocab_embeddings(&seqs, &vocab, &cfg).unwrap();
    println!("{} characters, dimension {}", emb.len(), emb.dim());
    for c in ["月", "山", "春", "风"] {
        let near: Vec<String> = neighbours(&emb, c, 5).iter().map(|(t, s)| format!("{t} {s:.2}")).collect();
        println!("{c}: {}", near.join("  "));
    }
    let text = emb.to_text();
    println!("text export starts with {:?}", text.lines().next().unwrap());
}
