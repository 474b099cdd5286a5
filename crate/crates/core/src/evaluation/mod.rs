//! BLEU-1/2 against keyword-indexed reference poems, and the ablation harness.
//!
//! Poems are flattened to their characters without line separators before
//! n-gram counting. Scores are sentence-level and averaged over keywords.

mod ablation;

pub use ablation::{
    run_ablation, score_heldout, split_heldout, train_variant, AblationConfig, AblationReport, AblationRow,
    HeldoutScoring, Techniques, TrainedVariant,
};

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::corpus::{Genre, Poem};
use crate::error::{Error, Result};

/// Default cap on references per keyword.
pub const DEFAULT_MAX_REFERENCES: usize = 20;

/// How per-keyword scores are aggregated; written into reports.
pub const AGGREGATION: &str = "sentence-level BLEU averaged over keywords";

fn ngram_counts<T: Eq + Hash + Copy>(seq: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Modified n-gram precision: each hypothesis n-gram is credited up to its
/// largest count in any single reference.
pub fn ngram_precision<T: Eq + Hash + Copy, R: AsRef<[T]>>(hyp: &[T], refs: &[R], n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be positive");
    if hyp.len() < n {
        log::warn!("hypothesis of length {} has no {n}-grams; precision 0", hyp.len());
        return 0.0;
    }
    let mut max_ref: HashMap<&[T], usize> = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r.as_ref(), n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched: usize = ngram_counts(hyp, n)
        .into_iter()
        .map(|(g, c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    matched as f64 / (hyp.len() + 1 - n) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub p1: f64,
    pub p2: f64,
    pub brevity_penalty: f64,
    pub bleu: f64,
    pub hyp_len: usize,
    /// Length of the reference closest in length to the hypothesis.
    pub ref_len: usize,
    /// Set when either precision is zero, which forces `bleu` to 0.
    pub zero_precision: bool,
}

/// Reference length closest to `hyp_len`; ties go to the shorter one.
pub fn closest_ref_len(hyp_len: usize, ref_lens: impl IntoIterator<Item = usize>) -> Option<usize> {
    ref_lens
        .into_iter()
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
}

/// BLEU with orders 1 and 2 weighted equally, no smoothing.
pub fn bleu<T: Eq + Hash + Copy, R: AsRef<[T]>>(hyp: &[T], refs: &[R]) -> Result<BleuReport> {
    let r = closest_ref_len(hyp.len(), refs.iter().map(|r| r.as_ref().len()))
        .ok_or_else(|| Error::Precondition("BLEU needs at least one reference".into()))?;
    let p1 = ngram_precision(hyp, refs, 1);
    let p2 = ngram_precision(hyp, refs, 2);
    let c = hyp.len();
    let bp = if c >= r {
        1.0
    } else if c == 0 {
        0.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    let zero = p1 == 0.0 || p2 == 0.0;
    let score = if zero { 0.0 } else { bp * (0.5 * p1.ln() + 0.5 * p2.ln()).exp() };
    Ok(BleuReport {
        p1,
        p2,
        brevity_penalty: bp,
        bleu: score,
        hyp_len: c,
        ref_len: r,
        zero_precision: zero,
    })
}

fn keyword_chars(keyword: &str) -> Vec<char> {
    let mut ks: Vec<char> = Vec::new();
    for c in keyword.chars().filter(|c| !c.is_whitespace()) {
        if !ks.contains(&c) {
            ks.push(c);
        }
    }
    ks
}

/// Flattened corpus poems that can be queried by keyword.
#[derive(Debug, Clone, Default)]
pub struct ReferenceIndex {
    poems: Vec<Vec<char>>,
    source_ids: Vec<String>,
    genres: Vec<Genre>,
}

impl ReferenceIndex {
    pub fn new(corpus: &[Poem]) -> Self {
        Self {
            poems: corpus.iter().map(|p| p.chars().collect()).collect(),
            source_ids: corpus.iter().map(|p| p.source_id.clone()).collect(),
            genres: corpus.iter().map(|p| p.genre).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.poems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poems.is_empty()
    }

    /// Indices of poems containing every keyword character, ordered by the
    /// number of keyword-character occurrences (descending, then corpus
    /// order), at most `cap`. Optionally restricted to one genre.
    pub fn lookup(&self, keyword: &str, genre: Option<Genre>, cap: usize) -> Vec<usize> {
        let ks = keyword_chars(keyword);
        if ks.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<(usize, usize)> = self
            .poems
            .iter()
            .enumerate()
            .filter(|(i, _)| genre.is_none_or(|g| self.genres[*i] == g))
            .filter(|(_, p)| ks.iter().all(|k| p.contains(k)))
            .map(|(i, p)| (i, p.iter().filter(|c| ks.contains(c)).count()))
            .collect();
        hits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.into_iter().take(cap).map(|(i, _)| i).collect()
    }

    pub fn references(&self, keyword: &str, genre: Option<Genre>, cap: usize) -> Vec<&[char]> {
        self.lookup(keyword, genre, cap)
            .into_iter()
            .map(|i| self.poems[i].as_slice())
            .collect()
    }

    pub fn source_id(&self, i: usize) -> &str {
        &self.source_ids[i]
    }
}

/// References for `keyword`: every corpus poem containing all of its
/// characters, at most `cap`, most keyword-dense first.
pub fn build_reference_set(keyword: &str, corpus: &[Poem], cap: usize) -> Vec<Vec<char>> {
    ReferenceIndex::new(corpus)
        .references(keyword, None, cap)
        .into_iter()
        .map(<[char]>::to_vec)
        .collect()
}

/// One scored (keyword, hypothesis) pair. `report` is absent when the
/// keyword has no references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub keyword: String,
    pub genre: Genre,
    pub hypothesis: String,
    pub references: usize,
    pub report: Option<BleuReport>,
}

impl KeywordScore {
    pub fn score(keyword: &str, genre: Genre, hypothesis: &Poem, index: &ReferenceIndex, cap: usize) -> Result<Self> {
        let hyp: Vec<char> = hypothesis.chars().collect();
        let refs = index.references(keyword, None, cap);
        let report = if refs.is_empty() { None } else { Some(bleu(&hyp, &refs)?) };
        Ok(Self {
            keyword: keyword.to_string(),
            genre,
            hypothesis: hyp.iter().collect(),
            references: refs.len(),
            report,
        })
    }
}

/// Mean BLEU over the scored records of `genre`, or `None` if none scored.
pub fn mean_bleu(records: &[KeywordScore], genre: Option<Genre>) -> Option<f64> {
    let xs: Vec<f64> = records
        .iter()
        .filter(|r| genre.is_none_or(|g| r.genre == g))
        .filter_map(|r| r.report.map(|b| b.bleu))
        .collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus_str;
    use proptest::prelude::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn hand_counted_fixture() {
        let h = chars("AABB");
        let r = [chars("ABBC")];
        assert_eq!(ngram_precision(&h, &r, 1), 0.75);
        assert!((ngram_precision(&h, &r, 2) - 2.0 / 3.0).abs() < 1e-15);
        let b = bleu(&h, &r).unwrap();
        assert_eq!(b.brevity_penalty, 1.0);
        assert!((b.bleu - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(format!("{:.5}", b.bleu) == "0.70711");
    }

    #[test]
    fn identity_and_disjoint() {
        let h = chars("春眠不觉晓");
        let b = bleu(&h, std::slice::from_ref(&h)).unwrap();
        assert_eq!((b.p1, b.p2, b.bleu), (1.0, 1.0, 1.0));
        let b = bleu(&h, &[chars("处处闻啼鸟")]).unwrap();
        assert_eq!(b.bleu, 0.0);
        assert!(b.zero_precision);
    }

    #[test]
    fn short_hypothesis_and_no_refs() {
        let h = chars("A");
        assert_eq!(ngram_precision(&h, &[chars("AB")], 2), 0.0);
        let b = bleu(&h, &[chars("AB")]).unwrap();
        assert_eq!(b.bleu, 0.0);
        assert!(bleu(&h, &Vec::<Vec<char>>::new()).is_err());
    }

    #[test]
    fn brevity_against_closest_shorter_on_tie() {
        assert_eq!(closest_ref_len(5, [3, 7]), Some(3));
        let b = bleu(&chars("ABCDE"), &[chars("ABC"), chars("ABCDEFG")]).unwrap();
        assert_eq!(b.ref_len, 3);
        assert_eq!(b.brevity_penalty, 1.0);
        let b = bleu(&chars("AB"), &[chars("ABCD")]).unwrap();
        assert!((b.brevity_penalty - (-1.0f64).exp()).abs() < 1e-15);
    }

    fn brute_bleu(h: &[u8], refs: &[Vec<u8>]) -> f64 {
        let prec = |n: usize| -> f64 {
            if h.len() < n {
                return 0.0;
            }
            let grams: Vec<&[u8]> = h.windows(n).collect();
            let mut credit = 0usize;
            let mut done: Vec<&[u8]> = Vec::new();
            for g in &grams {
                if done.contains(g) {
                    continue;
                }
                done.push(g);
                let hc = grams.iter().filter(|x| *x == g).count();
                let rc = refs
                    .iter()
                    .map(|r| if r.len() < n { 0 } else { r.windows(n).filter(|x| x == g).count() })
                    .max()
                    .unwrap();
                credit += hc.min(rc);
            }
            credit as f64 / grams.len() as f64
        };
        let (p1, p2) = (prec(1), prec(2));
        if p1 == 0.0 || p2 == 0.0 {
            return 0.0;
        }
        let mut best = refs[0].len();
        for r in refs {
            let d = (r.len() as i64 - h.len() as i64).abs();
            let bd = (best as i64 - h.len() as i64).abs();
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        let bp = if h.len() >= best { 1.0 } else { (1.0 - best as f64 / h.len() as f64).exp() };
        bp * (p1 * p2).sqrt()
    }

    fn text() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..4, 0..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_brute_force(h in text(), refs in prop::collection::vec(text(), 1..4)) {
            let b = bleu(&h, &refs).unwrap();
            prop_assert!((b.bleu - brute_bleu(&h, &refs)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&b.bleu));
            prop_assert!((0.0..=1.0).contains(&b.p1) && (0.0..=1.0).contains(&b.p2));
        }

        #[test]
        fn reference_order_is_irrelevant(h in text(), mut refs in prop::collection::vec(text(), 1..5)) {
            let a = bleu(&h, &refs).unwrap();
            refs.reverse();
            prop_assert_eq!(a, bleu(&h, &refs).unwrap());
        }

        #[test]
        fn more_references_never_lower_precision(h in text(), refs in prop::collection::vec(text(), 1..4), extra in text()) {
            let mut more = refs.clone();
            more.push(extra);
            for n in 1..=2 {
                prop_assert!(ngram_precision(&h, &more, n) >= ngram_precision(&h, &refs, n));
            }
        }
    }

    fn sample() -> Vec<Poem> {
        parse_corpus_str(include_str!("../../data/sample_corpus.txt"), "sample", None).poems
    }

    #[test]
    fn references_contain_keyword() {
        let poems = sample();
        let refs = build_reference_set("月", &poems, 100);
        assert!(refs.len() >= 3);
        assert!(refs.iter().all(|r| r.contains(&'月')));
        assert!(build_reference_set("龘", &poems, 20).is_empty());
    }

    #[test]
    fn cap_keeps_densest_first() {
        let poems: Vec<Poem> = [
            "白日依山尽|黄河入海流|欲穷千里目|更上一层楼",
            "山中何所有|岭上多白云|只可自怡悦|青山不见山",
            "空山不见人|但闻人语响|返景入深林|复照青苔山",
            "山光悦鸟性|潭影空人心|万籁此俱寂|山山钟磬音",
            "千山鸟飞绝|万径人踪灭|孤舟蓑笠翁|独钓寒江雪",
            "床前明月光|疑是地上霜|举头望明月|低头思故乡",
        ]
        .iter()
        .enumerate()
        .map(|(i, r)| Poem::parse_record(r, format!("p{i}")).unwrap())
        .collect();
        let index = ReferenceIndex::new(&poems);
        assert_eq!(index.lookup("山", None, 2), vec![1, 3]);
        assert_eq!(index.lookup("山", None, 20), vec![1, 3, 2, 0, 4]);
        assert_eq!(index.lookup("山鸟", None, 20), vec![3, 4]);
        assert_eq!(index.lookup("山", Some(Genre::SevenChar), 20), Vec::<usize>::new());
    }

    #[test]
    fn mean_skips_absent() {
        let rec = |g, r: Option<f64>| KeywordScore {
            keyword: "k".into(),
            genre: g,
            hypothesis: String::new(),
            references: usize::from(r.is_some()),
            report: r.map(|bleu| BleuReport {
                p1: 1.0,
                p2: 1.0,
                brevity_penalty: 1.0,
                bleu,
                hyp_len: 1,
                ref_len: 1,
                zero_precision: false,
            }),
        };
        let rs = [rec(Genre::FiveChar, Some(0.2)), rec(Genre::FiveChar, None), rec(Genre::SevenChar, Some(0.6))];
        assert_eq!(mean_bleu(&rs, Some(Genre::FiveChar)), Some(0.2));
        assert_eq!(mean_bleu(&rs, None), Some(0.4));
        assert_eq!(mean_bleu(&rs[1..2], None), None);
    }
}
