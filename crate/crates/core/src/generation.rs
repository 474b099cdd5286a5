//! Keyword-conditioned quatrain generation by beam search under structure,
//! tone and rhyme constraints.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Genre, Poem, Vocab, BOS, SEP};
use crate::error::{Error, Result};
use crate::model::{EncoderOutput, ModelParams};
use crate::prosody::{ProsodyRules, Slot, TonalTemplate, Tone};

/// What to generate and under which constraints. Structure is always enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    /// Joined in order into one character sequence.
    pub keywords: Vec<String>,
    pub genre: Genre,
    pub beam_width: usize,
    pub tone: bool,
    pub rhyme: bool,
    /// Bind the rhyme group at line 1 instead of line 2. Only templates
    /// whose first line ends on a level slot are used.
    pub line1_rhyme: bool,
    /// Put a SEP token between consecutive keywords.
    pub keyword_separator: bool,
    pub seed: u64,
    /// Candidates recorded per step in the log.
    pub log_top_k: usize,
}

impl GenRequest {
    pub fn new(keywords: &str, genre: Genre) -> Self {
        Self {
            keywords: vec![keywords.to_string()],
            genre,
            beam_width: 5,
            tone: true,
            rhyme: true,
            line1_rhyme: false,
            keyword_separator: false,
            seed: 0,
            log_top_k: 5,
        }
    }

    /// Encoder input ids. Unknown characters become UNK with a warning.
    pub fn input_ids(&self, vocab: &Vocab) -> Result<Vec<usize>> {
        let mut ids = Vec::new();
        for (i, k) in self.keywords.iter().enumerate() {
            if i > 0 && self.keyword_separator {
                ids.push(SEP);
            }
            for c in k.chars() {
                if vocab.get(c).is_none() {
                    log::warn!("keyword character {c} is not in the vocabulary; using <unk>");
                }
                ids.push(vocab.id(c));
            }
        }
        if ids.is_empty() {
            return Err(Error::EmptyInput("keywords"));
        }
        Ok(ids)
    }
}

/// Where a decoding step falls in the poem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Position {
    Char { line: usize, pos: usize },
    /// Separator after the given line.
    Sep { after: usize },
}

/// Number of decoding steps: four lines and three separators.
pub fn total_steps(genre: Genre) -> usize {
    4 * genre.line_len() + 3
}

pub fn position_at(genre: Genre, step: usize) -> Option<Position> {
    let w = genre.line_len() + 1;
    if step >= total_steps(genre) {
        return None;
    }
    let (line, pos) = (step / w, step % w);
    Some(if pos == genre.line_len() {
        Position::Sep { after: line }
    } else {
        Position::Char { line, pos }
    })
}

/// Tone and interned rhyme group for every vocabulary id.
#[derive(Debug, Clone)]
pub struct TokenTable {
    is_char: Vec<bool>,
    tones: Vec<Tone>,
    groups: Vec<Option<u32>>,
    group_names: Vec<String>,
}

impl TokenTable {
    pub fn new(vocab: &Vocab, rules: &ProsodyRules) -> Self {
        let mut intern: HashMap<&str, u32> = HashMap::new();
        let mut group_names = Vec::new();
        let n = vocab.len();
        let mut t = Self {
            is_char: vec![false; n],
            tones: vec![Tone::Unknown; n],
            groups: vec![None; n],
            group_names: Vec::new(),
        };
        for id in vocab.char_ids() {
            let c = vocab.char_of(id).expect("character id");
            t.is_char[id] = true;
            t.tones[id] = rules.dict.tone(c);
            t.groups[id] = rules.dict.rhyme_group(c).map(|g| {
                *intern.entry(g).or_insert_with(|| {
                    group_names.push(g.to_string());
                    group_names.len() as u32 - 1
                })
            });
        }
        t.group_names = group_names;
        t
    }

    pub fn len(&self) -> usize {
        self.is_char.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_char.is_empty()
    }

    pub fn group_name(&self, g: u32) -> &str {
        &self.group_names[g as usize]
    }
}

/// Rhyme requirement at one position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhymeRule {
    Free,
    /// Any character with a known group.
    RequireKnown,
    /// A character of this group.
    Match(u32),
}

/// Constraints in force at one step of one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskContext {
    pub position: Position,
    /// Tonal slot of the bound template; `None` when tone is not enforced.
    pub slot: Option<Slot>,
    pub rhyme: RhymeRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relaxation {
    Rhyme,
    Tone,
}

/// A constrained, renormalized distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Masked {
    /// Zero outside the allowed set; sums to 1 unless nothing survived.
    pub dist: Vec<f64>,
    pub relaxed: Vec<Relaxation>,
}

impl Masked {
    pub fn is_empty(&self) -> bool {
        self.dist.iter().all(|&p| p == 0.0)
    }
}

/// Zeroes tokens the context forbids and renormalizes. When nothing
/// survives, the rhyme and then the tone constraint is dropped.
pub fn constraint_mask(ctx: &MaskContext, dist: &[f64], table: &TokenTable) -> Masked {
    let tone_ok = |id: usize, slot: Option<Slot>| slot.is_none_or(|s| s.accepts(table.tones[id]));
    let rhyme_ok = |id: usize, rule: RhymeRule| match rule {
        RhymeRule::Free => true,
        RhymeRule::RequireKnown => table.groups[id].is_some(),
        RhymeRule::Match(g) => table.groups[id] == Some(g),
    };
    let apply = |slot: Option<Slot>, rule: RhymeRule| -> Option<Vec<f64>> {
        let mut out = vec![0.0; dist.len()];
        let mut mass = 0.0;
        for (id, &p) in dist.iter().enumerate() {
            let keep = match ctx.position {
                Position::Sep { .. } => id == SEP,
                Position::Char { .. } => table.is_char[id] && tone_ok(id, slot) && rhyme_ok(id, rule),
            };
            if keep {
                out[id] = p;
                mass += p;
            }
        }
        (mass > 0.0).then(|| {
            out.iter_mut().for_each(|q| *q /= mass);
            out
        })
    };

    let mut relaxed = Vec::new();
    let mut slot = ctx.slot;
    let mut rule = ctx.rhyme;
    loop {
        if let Some(dist) = apply(slot, rule) {
            return Masked { dist, relaxed };
        }
        if rule != RhymeRule::Free {
            log::info!("no candidate satisfies the rhyme constraint at {:?}; relaxing it", ctx.position);
            rule = RhymeRule::Free;
            relaxed.push(Relaxation::Rhyme);
        } else if slot.is_some() {
            log::info!("no candidate satisfies the tone constraint at {:?}; relaxing it", ctx.position);
            slot = None;
            relaxed.push(Relaxation::Tone);
        } else {
            return Masked {
                dist: vec![0.0; dist.len()],
                relaxed,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub token: String,
    pub prob: f64,
}

/// One line of the generation log, for the step that produced `token` on
/// the returned hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub position: Position,
    pub token: String,
    /// Highest constrained probabilities at this step.
    pub top_k: Vec<Candidate>,
    pub alpha_h: Vec<f64>,
    pub alpha_x: Vec<f64>,
    pub relaxations: Vec<Relaxation>,
}

#[derive(Debug, Clone)]
pub struct Generation {
    pub poem: Poem,
    pub tokens: Vec<usize>,
    /// Sum of model log-probabilities of the emitted tokens.
    pub score: f64,
    pub template: Option<usize>,
    pub rhyme_group: Option<String>,
    pub log: Vec<StepLog>,
    /// Scores of every candidate considered at the final step.
    pub final_scores: Vec<f64>,
}

impl Generation {
    /// The log as line-oriented JSON.
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|s| serde_json::to_string(s).expect("log entries serialize") + "\n")
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<usize>,
    state: Vec<f64>,
    score: f64,
    template: Option<usize>,
    group: Option<u32>,
    log: Vec<StepLog>,
}

struct Search<'a> {
    req: &'a GenRequest,
    params: &'a ModelParams,
    vocab: &'a Vocab,
    templates: Vec<&'a TonalTemplate>,
    table: TokenTable,
    rank: Vec<usize>,
    enc: EncoderOutput,
}

struct Expansion {
    parent: usize,
    template: Option<usize>,
    raw: Vec<f64>,
    masked: Masked,
    alpha_h: Vec<f64>,
    alpha_x: Vec<f64>,
    state: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Scored {
    score: f64,
    rank: usize,
    template: usize,
    parent: usize,
    expansion: usize,
    token: usize,
}

/// Higher score first, then lower tie-break rank, template and parent.
fn order(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.rank.cmp(&b.rank))
        .then(a.template.cmp(&b.template))
        .then(a.parent.cmp(&b.parent))
}

impl<'a> Search<'a> {
    fn new(req: &'a GenRequest, params: &'a ModelParams, vocab: &'a Vocab, rules: &'a ProsodyRules) -> Result<Self> {
        if req.beam_width < 1 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        if vocab.len() != params.config.vocab_size {
            return Err(Error::DimensionMismatch {
                expected: params.config.vocab_size,
                found: vocab.len(),
            });
        }
        let templates: Vec<&TonalTemplate> = rules
            .templates_for(req.genre)
            .filter(|t| !(req.line1_rhyme && t.lines[0].last() == Some(&Slot::Z)))
            .collect();
        if req.tone && templates.is_empty() {
            return Err(Error::Config(format!(
                "tone constraints need at least one {}-character template",
                req.genre
            )));
        }
        let enc = params.encode(&req.input_ids(vocab)?)?;
        let mut rank_order: Vec<usize> = (0..vocab.len()).collect();
        rank_order.shuffle(&mut ChaCha8Rng::seed_from_u64(req.seed));
        let mut rank = vec![0; vocab.len()];
        for (r, &id) in rank_order.iter().enumerate() {
            rank[id] = r;
        }
        Ok(Self {
            req,
            params,
            vocab,
            templates,
            table: TokenTable::new(vocab, rules),
            rank,
            enc,
        })
    }

    fn rhyme_rule(&self, position: Position, group: Option<u32>) -> RhymeRule {
        let Position::Char { line, pos } = position else {
            return RhymeRule::Free;
        };
        if !self.req.rhyme || pos + 1 != self.req.genre.line_len() {
            return RhymeRule::Free;
        }
        let binding = if self.req.line1_rhyme { 0 } else { 1 };
        if line == binding {
            RhymeRule::RequireKnown
        } else if line == 3 || (self.req.line1_rhyme && line == 1) {
            group.map_or(RhymeRule::Free, RhymeRule::Match)
        } else {
            RhymeRule::Free
        }
    }

    /// Template choices a hypothesis has at `step`: every template before
    /// the first character, afterwards its bound one.
    fn template_options(&self, step: usize, bound: Option<usize>) -> Vec<Option<usize>> {
        if !self.req.tone {
            vec![None]
        } else if step == 0 {
            (0..self.templates.len()).map(Some).collect()
        } else {
            vec![bound]
        }
    }

    fn expand(&self, step: usize, position: Position, parent: usize, hyp: &Hyp, out: &mut Vec<Expansion>) {
        let prev = hyp.tokens.last().copied().unwrap_or(BOS);
        let ds = self.params.decode_step(&hyp.state, prev, &self.enc);
        for template in self.template_options(step, hyp.template) {
            let slot = match (position, template) {
                (Position::Char { line, pos }, Some(t)) => Some(self.templates[t].slot(line, pos)),
                _ => None,
            };
            let ctx = MaskContext {
                position,
                slot,
                rhyme: self.rhyme_rule(position, hyp.group),
            };
            out.push(Expansion {
                parent,
                template,
                masked: constraint_mask(&ctx, &ds.dist, &self.table),
                raw: ds.dist.clone(),
                alpha_h: ds.attention.alpha_h.clone(),
                alpha_x: ds.attention.alpha_x.clone(),
                state: ds.state.clone(),
            });
        }
    }

    fn scored(&self, beam: &[Hyp], expansions: &[Expansion]) -> Vec<Scored> {
        let mut all = Vec::new();
        for (e, ex) in expansions.iter().enumerate() {
            for (token, &q) in ex.masked.dist.iter().enumerate() {
                if q > 0.0 {
                    all.push(Scored {
                        score: beam[ex.parent].score + ex.raw[token].max(f64::MIN_POSITIVE).ln(),
                        rank: self.rank[token],
                        template: ex.template.unwrap_or(0),
                        parent: ex.parent,
                        expansion: e,
                        token,
                    });
                }
            }
        }
        all
    }

    fn top_k(&self, masked: &Masked) -> Vec<Candidate> {
        let mut ids: Vec<usize> = (0..masked.dist.len()).filter(|&i| masked.dist[i] > 0.0).collect();
        ids.sort_by(|&a, &b| masked.dist[b].total_cmp(&masked.dist[a]).then(self.rank[a].cmp(&self.rank[b])));
        ids.truncate(self.req.log_top_k);
        ids.into_iter()
            .map(|i| Candidate {
                token: self.vocab.token_name(i),
                prob: masked.dist[i],
            })
            .collect()
    }

    fn extend(&self, step: usize, position: Position, beam: &[Hyp], expansions: &[Expansion], pick: &Scored) -> Hyp {
        let parent = &beam[pick.parent];
        let ex = &expansions[pick.expansion];
        let mut group = parent.group;
        if let RhymeRule::RequireKnown = self.rhyme_rule(position, parent.group) {
            group = self.table.groups[pick.token];
        }
        let mut log = parent.log.clone();
        log.push(StepLog {
            step,
            position,
            token: self.vocab.token_name(pick.token),
            top_k: self.top_k(&ex.masked),
            alpha_h: ex.alpha_h.clone(),
            alpha_x: ex.alpha_x.clone(),
            relaxations: ex.masked.relaxed.clone(),
        });
        let mut tokens = parent.tokens.clone();
        tokens.push(pick.token);
        Hyp {
            tokens,
            state: ex.state.clone(),
            score: pick.score,
            template: ex.template.or(parent.template),
            group,
            log,
        }
    }

    fn run(&self, width: usize) -> Result<Generation> {
        let s0 = self.params.init_decoder_state(&self.enc, self.req.genre);
        let mut beam = vec![Hyp {
            tokens: Vec::new(),
            state: s0,
            score: 0.0,
            template: None,
            group: None,
            log: Vec::new(),
        }];
        let mut final_scores = Vec::new();
        for step in 0..total_steps(self.req.genre) {
            let position = position_at(self.req.genre, step).expect("step in range");
            let mut expansions = Vec::new();
            for (i, hyp) in beam.iter().enumerate() {
                self.expand(step, position, i, hyp, &mut expansions);
            }
            let mut scored = self.scored(&beam, &expansions);
            if scored.is_empty() {
                return Err(Error::BeamExhausted { step });
            }
            scored.sort_by(order);
            if step + 1 == total_steps(self.req.genre) {
                final_scores = scored.iter().map(|s| s.score).collect();
            }
            beam = scored
                .iter()
                .take(width)
                .map(|pick| self.extend(step, position, &beam, &expansions, pick))
                .collect();
        }
        self.finish(beam.swap_remove(0), final_scores)
    }

    fn finish(&self, best: Hyp, final_scores: Vec<f64>) -> Result<Generation> {
        let lines: Vec<Vec<char>> = best
            .tokens
            .split(|&t| t == SEP)
            .map(|line| line.iter().filter_map(|&t| self.vocab.char_of(t)).collect())
            .collect();
        let poem = Poem::new(lines, "generated")?;
        if poem.genre != self.req.genre {
            return Err(Error::Structure(format!("generated a {}-character poem", poem.genre)));
        }
        Ok(Generation {
            poem,
            score: best.score,
            template: best.template.map(|t| self.templates[t].id),
            rhyme_group: best.group.map(|g| self.table.group_name(g).to_string()),
            tokens: best.tokens,
            log: best.log,
            final_scores,
        })
    }
}

/// Beam search over decoder steps with constrained distributions.
///
/// Hypotheses are scored by the summed model log-probability of their
/// tokens and bind a tonal template at the first character. Ties are broken
/// by a permutation of token ids drawn from `req.seed`.
pub fn beam_search_generate(
    req: &GenRequest,
    params: &ModelParams,
    vocab: &Vocab,
    rules: &ProsodyRules,
) -> Result<Generation> {
    let search = Search::new(req, params, vocab, rules)?;
    search.run(req.beam_width)
}

/// Constrained greedy decoding: at each step the single best token under
/// the same constraints, scoring and tie-breaking as the beam search.
pub fn greedy_generate(req: &GenRequest, params: &ModelParams, vocab: &Vocab, rules: &ProsodyRules) -> Result<Generation> {
    let search = Search::new(req, params, vocab, rules)?;
    let s0 = params.init_decoder_state(&search.enc, req.genre);
    let mut hyp = Hyp {
        tokens: Vec::new(),
        state: s0,
        score: 0.0,
        template: None,
        group: None,
        log: Vec::new(),
    };
    let mut final_scores = Vec::new();
    for step in 0..total_steps(req.genre) {
        let position = position_at(req.genre, step).expect("step in range");
        let mut expansions = Vec::new();
        search.expand(step, position, 0, &hyp, &mut expansions);
        let beam = [hyp];
        let scored = search.scored(&beam, &expansions);
        let best = scored
            .iter()
            .min_by(|a, b| order(a, b))
            .copied()
            .ok_or(Error::BeamExhausted { step })?;
        if step + 1 == total_steps(req.genre) {
            final_scores = scored.iter().map(|s| s.score).collect();
        }
        hyp = search.extend(step, position, &beam, &expansions, &best);
    }
    search.finish(hyp, final_scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::prosody::{check_compliance, parse_templates, ToneDict};

    fn two_char_table() -> (Vocab, TokenTable) {
        let vocab = Vocab::from_chars(vec!['高', '夜'], vec![1, 1]);
        let dict = ToneDict::parse("高\tP\tao_level\n夜\tZ\tie_oblique\n", "t").unwrap();
        let rules = ProsodyRules::new(dict, Vec::new());
        let table = TokenTable::new(&vocab, &rules);
        (vocab, table)
    }

    #[test]
    fn p_slot_keeps_only_level_characters() {
        let (_, table) = two_char_table();
        let dist = vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.2, 0.3];
        let ctx = MaskContext {
            position: Position::Char { line: 0, pos: 0 },
            slot: Some(Slot::P),
            rhyme: RhymeRule::Free,
        };
        let m = constraint_mask(&ctx, &dist, &table);
        assert_eq!(m.dist, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(m.relaxed.is_empty());
    }

    #[test]
    fn free_slot_renormalizes_over_characters() {
        let (_, table) = two_char_table();
        let dist = vec![0.1, 0.1, 0.1, 0.1, 0.1, 0.2, 0.3];
        let ctx = MaskContext {
            position: Position::Char { line: 2, pos: 1 },
            slot: Some(Slot::Any),
            rhyme: RhymeRule::Free,
        };
        let m = constraint_mask(&ctx, &dist, &table);
        assert!((m.dist[5] - 0.4).abs() < 1e-15 && (m.dist[6] - 0.6).abs() < 1e-15);
        assert!(m.dist[..5].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn uniform_half_masked_is_uniform_over_survivors() {
        let chars: Vec<char> = "春夏秋冬风花雪月".chars().collect();
        let vocab = Vocab::from_chars(chars.clone(), vec![1; 8]);
        let mut dict = ToneDict::new();
        for (i, &c) in chars.iter().enumerate() {
            dict.insert(c, if i % 2 == 0 { Tone::Ping } else { Tone::Ze }, None);
        }
        let table = TokenTable::new(&vocab, &ProsodyRules::new(dict, Vec::new()));
        let v = vocab.len();
        let ctx = MaskContext {
            position: Position::Char { line: 0, pos: 0 },
            slot: Some(Slot::Z),
            rhyme: RhymeRule::Free,
        };
        let m = constraint_mask(&ctx, &vec![1.0 / v as f64; v], &table);
        let survivors: Vec<f64> = m.dist.iter().copied().filter(|&p| p > 0.0).collect();
        assert_eq!(survivors.len(), 4);
        assert!(survivors.iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn separator_positions_allow_only_sep() {
        let (_, table) = two_char_table();
        let ctx = MaskContext {
            position: Position::Sep { after: 0 },
            slot: None,
            rhyme: RhymeRule::Free,
        };
        let m = constraint_mask(&ctx, &[0.1, 0.1, 0.1, 0.05, 0.05, 0.3, 0.3], &table);
        assert_eq!(m.dist[SEP], 1.0);
        assert_eq!(m.dist.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn relaxes_rhyme_before_tone() {
        let (_, table) = two_char_table();
        let dist = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5];
        // only 夜 is oblique and nothing is in group 7
        let ctx = MaskContext {
            position: Position::Char { line: 3, pos: 4 },
            slot: Some(Slot::Z),
            rhyme: RhymeRule::Match(7),
        };
        let m = constraint_mask(&ctx, &dist, &table);
        assert_eq!(m.relaxed, vec![Relaxation::Rhyme]);
        assert_eq!(m.dist[6], 1.0);
        let zero_z = vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let m = constraint_mask(&ctx, &zero_z, &table);
        assert_eq!(m.relaxed, vec![Relaxation::Rhyme, Relaxation::Tone]);
        assert_eq!(m.dist[5], 1.0);
    }

    #[test]
    fn positions_cover_lines_and_separators() {
        let g = Genre::FiveChar;
        assert_eq!(total_steps(g), 23);
        assert_eq!(position_at(g, 0), Some(Position::Char { line: 0, pos: 0 }));
        assert_eq!(position_at(g, 5), Some(Position::Sep { after: 0 }));
        assert_eq!(position_at(g, 22), Some(Position::Char { line: 3, pos: 4 }));
        assert_eq!(position_at(g, 23), None);
    }

    fn toy_setup(seed: u64) -> (ModelParams, Vocab, ProsodyRules) {
        let text = include_str!("../data/overfit32.txt");
        let poems = crate::corpus::parse_corpus_str(text, "t", None).poems;
        let vocab = crate::corpus::build_vocab(&poems, 1).unwrap();
        let rules = ProsodyRules::new(
            ToneDict::parse(include_str!("../data/tone_dict.tsv"), "t").unwrap(),
            parse_templates(include_str!("../data/templates.txt"), "t").unwrap(),
        );
        let cfg = ModelConfig {
            embed_dim: 8,
            enc_hidden: 6,
            dec_hidden: 10,
            attn_dim: 6,
            init_scale: 0.5,
            ..ModelConfig::new(vocab.len())
        };
        (ModelParams::new(cfg, seed).unwrap(), vocab, rules)
    }

    #[test]
    fn beam_one_equals_greedy() {
        let (p, vocab, rules) = toy_setup(1);
        for (kw, genre, tone) in [("春风", Genre::FiveChar, true), ("明月", Genre::SevenChar, false)] {
            let mut req = GenRequest::new(kw, genre);
            req.beam_width = 1;
            req.tone = tone;
            req.rhyme = tone;
            let a = beam_search_generate(&req, &p, &vocab, &rules).unwrap();
            let b = greedy_generate(&req, &p, &vocab, &rules).unwrap();
            assert_eq!(a.tokens, b.tokens);
            assert_eq!(a.score.to_bits(), b.score.to_bits());
        }
    }

    #[test]
    fn unconstrained_greedy_is_structural_argmax() {
        let (p, vocab, rules) = toy_setup(2);
        let mut req = GenRequest::new("白日", Genre::FiveChar);
        req.tone = false;
        req.rhyme = false;
        let g = greedy_generate(&req, &p, &vocab, &rules).unwrap();
        let enc = p.encode(&req.input_ids(&vocab).unwrap()).unwrap();
        let mut s = p.init_decoder_state(&enc, req.genre);
        let mut prev = BOS;
        for (step, &tok) in g.tokens.iter().enumerate() {
            let ds = p.decode_step(&s, prev, &enc);
            let best = match position_at(req.genre, step).unwrap() {
                Position::Sep { .. } => SEP,
                Position::Char { .. } => vocab
                    .char_ids()
                    .max_by(|&a, &b| ds.dist[a].total_cmp(&ds.dist[b]))
                    .unwrap(),
            };
            assert_eq!(tok, best);
            s = ds.state;
            prev = tok;
        }
    }

    #[test]
    fn constrained_output_is_compliant_and_deterministic() {
        let (p, vocab, rules) = toy_setup(3);
        for (i, kw) in ["山", "春风", "明月光", "江上"].iter().enumerate() {
            for genre in Genre::ALL {
                let mut req = GenRequest::new(kw, genre);
                req.seed = i as u64;
                req.beam_width = 3;
                let a = beam_search_generate(&req, &p, &vocab, &rules).unwrap();
                let rep = check_compliance(&a.poem.lines, &rules);
                assert!(rep.is_compliant(), "{} {:?}", a.poem, rep);
                assert!(a.final_scores.iter().all(|&s| s <= a.score));
                assert_eq!(a.log.len(), total_steps(genre));
                let b = beam_search_generate(&req, &p, &vocab, &rules).unwrap();
                assert_eq!(a.tokens, b.tokens);
            }
        }
    }

    #[test]
    fn line_one_rhyme_binds_three_lines() {
        let (p, vocab, rules) = toy_setup(4);
        let mut req = GenRequest::new("风", Genre::FiveChar);
        req.line1_rhyme = true;
        let g = beam_search_generate(&req, &p, &vocab, &rules).unwrap();
        let last = |i: usize| rules.dict.rhyme_group(*g.poem.lines[i].last().unwrap());
        assert_eq!(last(0), last(1));
        assert_eq!(last(1), last(3));
    }

    #[test]
    fn bad_requests() {
        let (p, vocab, rules) = toy_setup(5);
        let mut req = GenRequest::new("", Genre::FiveChar);
        assert!(matches!(
            beam_search_generate(&req, &p, &vocab, &rules),
            Err(Error::EmptyInput(_))
        ));
        req.keywords = vec!["山".into()];
        req.beam_width = 0;
        assert!(beam_search_generate(&req, &p, &vocab, &rules).is_err());
        req.beam_width = 2;
        assert!(beam_search_generate(&req, &p, &vocab, &ProsodyRules::default()).is_err());
    }

    #[test]
    fn log_is_json_lines() {
        let (p, vocab, rules) = toy_setup(6);
        let g = beam_search_generate(&GenRequest::new("雪", Genre::FiveChar), &p, &vocab, &rules).unwrap();
        let text = g.log_jsonl();
        assert_eq!(text.lines().count(), 23);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["alpha_h"].as_array().unwrap().len(), 1);
        assert!(first["top_k"].as_array().unwrap().len() <= 5);
    }
}
