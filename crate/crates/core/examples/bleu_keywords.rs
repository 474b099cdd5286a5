//! BLEU-1/2 of a hypothesis against the references retrieved for a keyword.
//!
//! cargo run --example bleu_keywords -- 月 "床前明月光|疑是地上霜|举头望明月|低头思故乡"

use qgen::corpus::parse_corpus_str;
use qgen::evaluation::{bleu, ReferenceIndex, DEFAULT_MAX_REFERENCES};

fn main() {
    let mut args = std::env::args().skip(1);
    let keyword = args.next().unwrap_or_else(|| "月".into());
    let hyp: Vec<char> = args
        .next()
        .unwrap_or_else(|| "明月照高楼|清风入我怀|山中多白云|独坐思故乡".into())
        .chars()
        .filter(|&c| c != '|')
        .collect();

    let toy = bleu(&['A', 'A', 'B', 'B'], &[vec!['A', 'B', 'B', 'C']]).unwrap();
    println!("AABB vs ABBC: p1 {:.4} p2 {:.4} bleu {:.5}", toy.p1, toy.p2, toy.bleu);

    let corpus = parse_corpus_str(include_str!("../data/sample_corpus.txt"), "sample", None).poems;
    let index = ReferenceIndex::new(&corpus);
    let ids = index.lookup(&keyword, None, DEFAULT_MAX_REFERENCES);
    println!("{} references contain {keyword}:", ids.len());
    for &i in &ids {
        println!("  {} {}", index.source_id(i), corpus[i].to_record());
    }
    let refs = index.references(&keyword, None, DEFAULT_MAX_REFERENCES);
    if refs.is_empty() {
        println!("no references; BLEU undefined");
        return;
    }
    let b = bleu(&hyp, &refs).unwrap();
    println!(
        "hypothesis {}: p1 {:.4} p2 {:.4} BP {:.4} BLEU {:.4}",
        hyp.iter().collect::<String>(),
        b.p1,
        b.p2,
        b.brevity_penalty,
        b.bleu
    );
}
