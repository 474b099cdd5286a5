//! Poem records, the character vocabulary, corpus cleaning and the
//! line 1-2-3-4-1 training sequences.
//!
//! Corpus files are UTF-8 with one poem per line and the four poem lines
//! separated by `|`. Blank lines and lines starting with `#` are ignored.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const SEP: usize = 3;
pub const UNK: usize = 4;
/// Number of reserved ids; character ids start here.
pub const RESERVED: usize = 5;

const RESERVED_NAMES: [&str; RESERVED] = ["<pad>", "<bos>", "<eos>", "<sep>", "<unk>"];

/// Quatrain genre, determined by characters per line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Genre {
    FiveChar,
    SevenChar,
}

impl Genre {
    pub const ALL: [Genre; 2] = [Genre::FiveChar, Genre::SevenChar];

    pub fn line_len(self) -> usize {
        match self {
            Genre::FiveChar => 5,
            Genre::SevenChar => 7,
        }
    }

    pub fn from_line_len(n: usize) -> Option<Genre> {
        match n {
            5 => Some(Genre::FiveChar),
            7 => Some(Genre::SevenChar),
            _ => None,
        }
    }

    /// 0 for five-character, 1 for seven-character poems.
    pub fn index(self) -> usize {
        match self {
            Genre::FiveChar => 0,
            Genre::SevenChar => 1,
        }
    }
}

impl fmt::Display for Genre {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.line_len())
    }
}

/// A four-line quatrain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poem {
    pub genre: Genre,
    pub lines: Vec<Vec<char>>,
    pub source_id: String,
}

impl Poem {
    /// Checks the four-line, uniform five/seven character structure.
    pub fn new(lines: Vec<Vec<char>>, source_id: impl Into<String>) -> Result<Self> {
        if lines.len() != 4 {
            return Err(Error::Structure(format!("expected 4 lines, found {}", lines.len())));
        }
        let first = lines[0].len();
        if let Some((i, l)) = lines.iter().enumerate().find(|(_, l)| l.len() != first) {
            return Err(Error::Structure(format!(
                "mixed line lengths: line 1 has {first} characters, line {} has {}",
                i + 1,
                l.len()
            )));
        }
        let genre = Genre::from_line_len(first).ok_or_else(|| {
            Error::Structure(format!("lines have {first} characters, expected 5 or 7"))
        })?;
        Ok(Self {
            genre,
            lines,
            source_id: source_id.into(),
        })
    }

    /// Parses a `line|line|line|line` record.
    pub fn parse_record(record: &str, source_id: impl Into<String>) -> Result<Self> {
        let lines = record
            .trim()
            .split('|')
            .map(|l| l.trim().chars().collect())
            .collect();
        Self::new(lines, source_id)
    }

    /// All characters in reading order, without line boundaries.
    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.lines.iter().flatten().copied()
    }

    pub fn line_string(&self, i: usize) -> String {
        self.lines[i].iter().collect()
    }

    pub fn to_record(&self) -> String {
        (0..4).map(|i| self.line_string(i)).collect::<Vec<_>>().join("|")
    }
}

impl fmt::Display for Poem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..4 {
            writeln!(f, "{}", self.line_string(i))?;
        }
        Ok(())
    }
}

/// A corpus record that failed the structural check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCorpus {
    pub poems: Vec<Poem>,
    pub rejected: Vec<Rejection>,
}

impl ParsedCorpus {
    pub fn reject_count(&self) -> usize {
        self.rejected.len()
    }
}

/// Reads a corpus file; see [`parse_corpus_str`].
pub fn parse_corpus(path: impl AsRef<Path>, genre_filter: Option<Genre>) -> Result<ParsedCorpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse_corpus_str(&text, &name, genre_filter))
}

/// Parses corpus text. Malformed records are skipped and listed in
/// `rejected`; poems outside `genre_filter` are silently dropped.
pub fn parse_corpus_str(text: &str, source_name: &str, genre_filter: Option<Genre>) -> ParsedCorpus {
    let mut out = ParsedCorpus::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match Poem::parse_record(line, format!("{source_name}:{}", i + 1)) {
            Ok(p) if genre_filter.is_none_or(|g| g == p.genre) => out.poems.push(p),
            Ok(_) => {}
            Err(e) => out.rejected.push(Rejection {
                line: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Bidirectional character/id map with reserved special tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<char>,
    char_to_id: HashMap<char, usize>,
    freqs: Vec<u64>,
    /// Every character seen during construction, in first-occurrence order.
    counts: Vec<(char, u64)>,
}

impl Vocab {
    /// Vocabulary holding only the reserved tokens.
    pub fn empty() -> Self {
        Self::from_chars(Vec::new(), Vec::new())
    }

    /// Builds a vocabulary whose character ids follow `chars` in order.
    pub fn from_chars(chars: Vec<char>, freqs: Vec<u64>) -> Self {
        let freqs = if freqs.len() == chars.len() {
            freqs
        } else {
            vec![0; chars.len()]
        };
        let char_to_id = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + RESERVED))
            .collect();
        let counts = chars.iter().copied().zip(freqs.iter().copied()).collect();
        Self {
            chars,
            char_to_id,
            freqs,
            counts,
        }
    }

    /// Counts characters over `sequences`; characters reaching `min_count`
    /// get ids by descending frequency, ties by first occurrence.
    pub fn from_sequences<'a, I>(sequences: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [char]>,
    {
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut order: Vec<(char, u64)> = Vec::new();
        let mut slot: HashMap<char, usize> = HashMap::new();
        for seq in sequences {
            for &c in seq {
                let i = *slot.entry(c).or_insert_with(|| {
                    order.push((c, 0));
                    order.len() - 1
                });
                order[i].1 += 1;
            }
        }
        let mut kept: Vec<(usize, char, u64)> = order
            .iter()
            .enumerate()
            .filter(|(_, (_, n))| *n >= min_count)
            .map(|(i, &(c, n))| (i, c, n))
            .collect();
        // stable on first-occurrence index
        kept.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
        let mut v = Self::from_chars(
            kept.iter().map(|k| k.1).collect(),
            kept.iter().map(|k| k.2).collect(),
        );
        v.counts = order;
        Ok(v)
    }

    /// Total number of ids, reserved tokens included.
    pub fn len(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn get(&self, c: char) -> Option<usize> {
        self.char_to_id.get(&c).copied()
    }

    /// Id for `c`, or [`UNK`].
    pub fn id(&self, c: char) -> usize {
        self.get(c).unwrap_or(UNK)
    }

    /// Character for a character id; `None` for reserved or out-of-range ids.
    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(RESERVED).and_then(|i| self.chars.get(i).copied())
    }

    pub fn is_char_id(&self, id: usize) -> bool {
        id >= RESERVED && id < self.len()
    }

    /// Printable name for any id.
    pub fn token_name(&self, id: usize) -> String {
        if id < RESERVED {
            RESERVED_NAMES[id].to_string()
        } else {
            self.char_of(id).map(String::from).unwrap_or_else(|| "<?>".into())
        }
    }

    /// Id for a printable name produced by [`token_name`](Self::token_name).
    pub fn id_of_name(&self, name: &str) -> Option<usize> {
        if let Some(i) = RESERVED_NAMES.iter().position(|&n| n == name) {
            return Some(i);
        }
        let mut it = name.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => self.get(c),
            _ => None,
        }
    }

    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|&c| self.id(c)).collect()
    }

    /// Character ids in id order.
    pub fn char_ids(&self) -> std::ops::Range<usize> {
        RESERVED..self.len()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Frequency of an in-vocabulary id (0 for reserved tokens).
    pub fn frequency(&self, id: usize) -> u64 {
        id.checked_sub(RESERVED)
            .and_then(|i| self.freqs.get(i).copied())
            .unwrap_or(0)
    }

    /// Raw counts of every character seen, including those below threshold.
    pub fn counts(&self) -> &[(char, u64)] {
        &self.counts
    }

    /// `char \t id \t frequency` rows, reserved tokens first.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for id in 0..self.len() {
            s.push_str(&format!("{}\t{}\t{}\n", self.token_name(id), id, self.frequency(id)));
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut chars = Vec::new();
        let mut freqs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                path: "<vocab>".into(),
                line: i + 1,
                message: m.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected 3 tab-separated columns"));
            }
            let id: usize = cols[1].parse().map_err(|_| bad("bad id"))?;
            let freq: u64 = cols[2].parse().map_err(|_| bad("bad frequency"))?;
            if id < RESERVED {
                if cols[0] != RESERVED_NAMES[id] {
                    return Err(bad("reserved id with unexpected name"));
                }
                continue;
            }
            if id != chars.len() + RESERVED {
                return Err(bad("ids must be dense and ascending"));
            }
            let mut it = cols[0].chars();
            let c = match (it.next(), it.next()) {
                (Some(c), None) => c,
                _ => return Err(bad("token must be a single character")),
            };
            chars.push(c);
            freqs.push(freq);
        }
        Ok(Self::from_chars(chars, freqs))
    }
}

/// Vocabulary over all poem characters; see [`Vocab::from_sequences`].
pub fn build_vocab(poems: &[Poem], min_count: u64) -> Result<Vocab> {
    let flat: Vec<Vec<char>> = poems.iter().map(|p| p.chars().collect()).collect();
    Vocab::from_sequences(flat.iter().map(|v| v.as_slice()), min_count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Poem>,
    pub removed: usize,
}

/// Fraction of a poem's characters that fall outside `vocab`.
pub fn unk_fraction(poem: &Poem, vocab: &Vocab) -> f64 {
    let total = poem.chars().count();
    let unk = poem.chars().filter(|&c| vocab.get(c).is_none()).count();
    unk as f64 / total as f64
}

/// Drops poems whose out-of-vocabulary fraction exceeds `max_unk_fraction`.
pub fn filter_poems(poems: Vec<Poem>, vocab: &Vocab, max_unk_fraction: f64) -> Result<FilterOutcome> {
    if !(0.0..=1.0).contains(&max_unk_fraction) {
        return Err(Error::Config(format!(
            "max_unk_fraction must lie in [0, 1], got {max_unk_fraction}"
        )));
    }
    let before = poems.len();
    let kept: Vec<Poem> = poems
        .into_iter()
        .filter(|p| unk_fraction(p, vocab) <= max_unk_fraction)
        .collect();
    let removed = before - kept.len();
    Ok(FilterOutcome { kept, removed })
}

/// Encoder input and decoder target for one poem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub input_ids: Vec<usize>,
    pub target_ids: Vec<usize>,
    pub genre: Genre,
    pub source_id: String,
}

/// Input = line 1; target = L1 SEP L2 SEP L3 SEP L4 SEP L1 EOS.
pub fn build_training_sequence(poem: &Poem, vocab: &Vocab) -> TrainingExample {
    build_training_sequence_with(poem, vocab, true)
}

/// Same as [`build_training_sequence`]; with `reconstruct == false` the
/// target stops after line 4: L1 SEP L2 SEP L3 SEP L4 EOS.
pub fn build_training_sequence_with(poem: &Poem, vocab: &Vocab, reconstruct: bool) -> TrainingExample {
    let lines: Vec<Vec<usize>> = poem.lines.iter().map(|l| vocab.encode(l)).collect();
    let mut parts: Vec<&[usize]> = lines.iter().map(|l| l.as_slice()).collect();
    if reconstruct {
        parts.push(&lines[0]);
    }
    let mut target = Vec::with_capacity(poem.genre.line_len() * parts.len() + parts.len());
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            target.push(SEP);
        }
        target.extend_from_slice(part);
    }
    target.push(EOS);
    TrainingExample {
        input_ids: lines[0].clone(),
        target_ids: target,
        genre: poem.genre,
        source_id: poem.source_id.clone(),
    }
}
