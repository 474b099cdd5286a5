//! The `qgen` command line.
//!
//! Subcommands: `train`, `generate`, `validate`, `bleu`, `embed`, `ablate`
//! and `replay`. Every command writes a [`RunManifest`] recording its fully
//! resolved configuration; `replay MANIFEST` runs it again.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 negative
//! validation result.
//!
//! If `QGEN_CONFIG` names a TOML file, its keys supply flag defaults.
//! Top-level keys apply to every subcommand that has the flag, `[train]`,
//! `[generate]` … sections to one subcommand. Keys use flag names with
//! `_` or `-`. Flags given on the command line win.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{build_training_sequence_with, build_vocab, filter_poems, parse_corpus, Genre, Poem};
use crate::embeddings::{init_embedding_matrix, load_embeddings, save_embeddings, train_vocab_embeddings, SkipGramConfig};
use crate::error::Error;
use crate::evaluation::{
    bleu, mean_bleu, run_ablation, score_heldout, AblationConfig, HeldoutScoring, KeywordScore, ReferenceIndex,
    Techniques, AGGREGATION,
};
use crate::generation::{beam_search_generate, GenRequest};
use crate::model::{ModelConfig, ModelParams};
use crate::numerics::{AdaDeltaConfig, AdaDeltaState};
use crate::prosody::{check_compliance, ProsodyRules};
use crate::training::{fit, load_checkpoint, save_checkpoint, Checkpoint, EpochReport, GenreMode, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

pub const CONFIG_ENV: &str = "QGEN_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "qgen", version, about = "Attention-based classical Chinese quatrain generator")]
pub struct Cli {
    /// Where to write the run manifest (default depends on the command).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Command {
    /// Train a model and write a checkpoint.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Generate a quatrain from keywords.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Check a poem against the structure, tone and rhyme rules.
    #[command(args_override_self = true)]
    Validate(ValidateArgs),
    /// BLEU-1/2 of a hypothesis against references.
    #[command(args_override_self = true)]
    Bleu(BleuArgs),
    /// Train skip-gram character vectors and export them as text.
    #[command(args_override_self = true)]
    Embed(EmbedArgs),
    /// Run the enhancement ablation on a held-out split.
    #[command(args_override_self = true)]
    Ablate(AblateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train(_) => "train",
            Command::Generate(_) => "generate",
            Command::Validate(_) => "validate",
            Command::Bleu(_) => "bleu",
            Command::Embed(_) => "embed",
            Command::Ablate(_) => "ablate",
            Command::Replay(_) => "replay",
        }
    }
}

fn parse_genre(s: &str) -> Result<Genre, String> {
    match s {
        "5" | "five" => Ok(Genre::FiveChar),
        "7" | "seven" => Ok(Genre::SevenChar),
        _ => Err(format!("unknown genre {s:?}; use 5 or 7")),
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RuleArgs {
    /// Tone dictionary TSV (default: bundled fixture).
    #[arg(long)]
    pub tone_dict: Option<PathBuf>,
    /// Tonal template file (default: bundled fixture).
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

impl RuleArgs {
    fn load(&self) -> Result<ProsodyRules, Failure> {
        let dict = match &self.tone_dict {
            Some(p) => crate::prosody::load_tone_dict(require_file(p, "--tone-dict")?)?,
            None => ProsodyRules::bundled().dict,
        };
        let templates = match &self.templates {
            Some(p) => crate::prosody::load_templates(require_file(p, "--templates")?)?,
            None => ProsodyRules::bundled().templates,
        };
        Ok(ProsodyRules::new(dict, templates))
    }

    fn paths(&self) -> Vec<PathBuf> {
        self.tone_dict.iter().chain(&self.templates).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Corpus file, one `line|line|line|line` poem per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// `5`, `7` or `hybrid`.
    #[arg(long, default_value = "hybrid")]
    pub genre: GenreMode,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop once the epoch mean loss falls below this.
    #[arg(long)]
    pub target_loss: Option<f64>,
    #[arg(long, default_value_t = 128)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 128)]
    pub enc_hidden: usize,
    #[arg(long, default_value_t = 256)]
    pub dec_hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub attn_dim: usize,
    #[arg(long)]
    pub no_input_attention: bool,
    #[arg(long)]
    pub no_reconstruction: bool,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long, default_value_t = 0.99)]
    pub max_unk_fraction: f64,
    #[arg(long, default_value_t = 0.95)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// Text embeddings from `embed`, copied into the embedding matrix.
    #[arg(long)]
    pub pretrained_embeddings: Option<PathBuf>,
    /// Held-out corpus for BLEU early stopping.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub validate_every: usize,
    /// Held-out evaluations without improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 3)]
    pub beam: usize,
    #[arg(long, default_value_t = 2)]
    pub keyword_chars: usize,
    /// Also write the line-JSON epoch log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub rules: RuleArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Keywords, separated by whitespace or commas.
    #[arg(long)]
    pub keywords: String,
    #[arg(long, default_value = "5", value_parser = parse_genre)]
    pub genre: Genre,
    #[arg(long, default_value_t = 5)]
    pub beam: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_tone: bool,
    #[arg(long)]
    pub no_rhyme: bool,
    /// Rhyme line 1 with lines 2 and 4.
    #[arg(long)]
    pub line1_rhyme: bool,
    /// Put a separator token between keywords.
    #[arg(long)]
    pub keyword_sep: bool,
    /// Line-JSON decoding log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[command(flatten)]
    pub rules: RuleArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Poem file: four lines, or one `a|b|c|d` record. `#` lines are ignored.
    #[arg(long, required_unless_present = "text", conflicts_with = "text")]
    pub poem: Option<PathBuf>,
    /// Poem given inline as `a|b|c|d`.
    #[arg(long)]
    pub text: Option<String>,
    #[command(flatten)]
    pub rules: RuleArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BleuArgs {
    /// Hypothesis file; all its characters form one hypothesis.
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference file, one reference per line.
    #[arg(long, conflicts_with_all = ["corpus", "keyword"])]
    pub refs: Option<PathBuf>,
    /// Corpus to draw keyword references from.
    #[arg(long, requires = "keyword")]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    pub keyword: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub max_refs: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EmbedArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Full JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated techniques for a single variant (`char-vectors`,
    /// `reconstruction`, `input-attention`, `hybrid`, or `none`). May be
    /// repeated; without it the cumulative table is run.
    #[arg(long)]
    pub variant: Vec<String>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub enc_hidden: usize,
    #[arg(long, default_value_t = 64)]
    pub dec_hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub attn_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub holdout_every: usize,
    #[arg(long, default_value_t = 5)]
    pub validate_every: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 3)]
    pub beam: usize,
    #[arg(long, default_value_t = 2)]
    pub keyword_chars: usize,
    #[arg(long, default_value_t = 20)]
    pub max_refs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub rules: RuleArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest_file: PathBuf,
}

/// What a command ran with and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub build_id: String,
    pub started_unix_ms: u128,
    pub wall_time_secs: f64,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// The recorded command with its resolved configuration.
    pub fn invocation(&self) -> crate::Result<Command> {
        serde_json::from_value(serde_json::json!({ "command": self.command, "config": self.config }))
            .map_err(|e| Error::Config(format!("manifest does not describe a command: {e}")))
    }
}

pub fn build_id() -> String {
    match option_env!("QGEN_BUILD_ID") {
        Some(id) => format!("qgen {} ({id})", env!("CARGO_PKG_VERSION")),
        None => format!("qgen {}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
    Negative,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            e => Failure::Runtime(e),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn require_file<'a>(p: &'a Path, flag: &str) -> Outcome<&'a Path> {
    if p.is_file() {
        Ok(p)
    } else {
        Err(Failure::Usage(format!("{flag}: {} does not exist", p.display())))
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, contents).map_err(|e| Failure::Runtime(Error::io(path, e)))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn is_punctuation(c: char) -> bool {
    c.is_whitespace() || c == '|' || c.is_ascii_punctuation() || "，。？！、；：“”‘’《》（）".contains(c)
}

/// Poem lines from a file or string: four lines, or one `a|b|c|d` record,
/// ignoring `#` lines and punctuation.
pub fn poem_lines(text: &str) -> Vec<Vec<char>> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let raw: Vec<&str> = if rows.len() == 1 { rows[0].split('|').collect() } else { rows };
    raw.iter()
        .map(|l| l.chars().filter(|&c| !is_punctuation(c)).collect())
        .collect()
}

fn flat_chars(text: &str) -> Vec<char> {
    text.chars().filter(|&c| !is_punctuation(c)).collect()
}

fn read_text(p: &Path, flag: &str) -> Outcome<String> {
    let p = require_file(p, flag)?;
    fs::read_to_string(p).map_err(|e| Failure::Runtime(Error::io(p, e)))
}

fn load_poems(p: &Path, flag: &str) -> Outcome<Vec<Poem>> {
    let parsed = parse_corpus(require_file(p, flag)?, None)?;
    if parsed.reject_count() > 0 {
        log::warn!("{}: {} malformed records skipped", p.display(), parsed.reject_count());
    }
    Ok(parsed.poems)
}

#[derive(Serialize)]
struct EpochLine<'a> {
    #[serde(flatten)]
    report: &'a EpochReport,
    heldout_bleu: Option<f64>,
}

fn cmd_train(a: &TrainArgs, io: &mut Io) -> Outcome {
    io.inputs.push(a.corpus.clone());
    io.inputs.extend(a.pretrained_embeddings.iter().cloned());
    io.inputs.extend(a.heldout.iter().cloned());
    io.inputs.extend(a.rules.paths());
    let poems = load_poems(&a.corpus, "--corpus")?;
    if !(0.0..=1.0).contains(&a.max_unk_fraction) {
        return Err(Failure::Usage("--max-unk-fraction must lie in [0, 1]".into()));
    }
    if a.min_count < 1 {
        return Err(Failure::Usage("--min-count must be at least 1".into()));
    }
    let vocab = build_vocab(&poems, a.min_count)?;
    let filtered = filter_poems(poems, &vocab, a.max_unk_fraction)?;
    if filtered.removed > 0 {
        log::warn!("{} poems removed for unknown characters", filtered.removed);
    }
    let poems = filtered.kept;
    let examples: Vec<_> = poems
        .iter()
        .map(|p| build_training_sequence_with(p, &vocab, !a.no_reconstruction))
        .collect();

    let mc = ModelConfig {
        embed_dim: a.embed_dim,
        enc_hidden: a.enc_hidden,
        dec_hidden: a.dec_hidden,
        attn_dim: a.attn_dim,
        input_attention: !a.no_input_attention,
        type_indicator: a.genre == GenreMode::Hybrid,
        ..ModelConfig::new(vocab.len())
    };
    mc.validate()?;
    let mut params = ModelParams::new(mc, a.seed)?;
    if let Some(p) = &a.pretrained_embeddings {
        let pre = load_embeddings(require_file(p, "--pretrained-embeddings")?)?;
        if pre.dim() != a.embed_dim {
            return Err(Failure::Usage(format!(
                "--pretrained-embeddings has dimension {}, but --embed-dim is {}",
                pre.dim(),
                a.embed_dim
            )));
        }
        params.embedding = init_embedding_matrix(&pre, &vocab, a.embed_dim, a.seed)?;
    }

    let adadelta = AdaDeltaConfig {
        rho: a.rho,
        epsilon: a.epsilon,
    };
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        adadelta,
        shuffle: true,
        patience: a.patience,
        genre_mode: a.genre,
        target_loss: a.target_loss,
    };
    tc.validate()?;
    let mut opt = AdaDeltaState::new(adadelta, &params)?;

    let validation = match &a.heldout {
        Some(p) => {
            let held = load_poems(p, "--heldout")?;
            let rules = a.rules.load()?;
            let index = ReferenceIndex::new(&[poems.clone(), held.clone()].concat());
            Some((held, rules, index))
        }
        None => None,
    };
    let scoring = HeldoutScoring {
        beam_width: a.beam,
        keyword_chars: a.keyword_chars,
        seed: a.seed,
        ..HeldoutScoring::default()
    };

    let mut log_file = match &a.log {
        Some(p) => Some(fs::File::create(p).map_err(|e| Failure::Runtime(Error::io(p, e)))?),
        None => None,
    };
    let stdout = std::io::stdout();
    let outcome = fit(&examples, &mut params, &mut opt, &tc, |p, report| {
        let mut score = None;
        if let Some((held, rules, index)) = &validation {
            if a.validate_every > 0 && report.epoch % a.validate_every == 0 {
                let recs = score_heldout(p, held, a.genre, &vocab, rules, index, &scoring)?;
                score = Some(mean_bleu(&recs, None).unwrap_or(0.0));
            }
        }
        let line = json(&EpochLine {
            report,
            heldout_bleu: score,
        });
        writeln!(stdout.lock(), "{line}").ok();
        if let (Some(f), Some(path)) = (log_file.as_mut(), &a.log) {
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(score)
    })?;
    io.outputs.extend(a.log.iter().cloned());

    let ck = Checkpoint {
        params,
        vocab,
        optimizer: Some(opt),
        step: outcome.steps,
        seed: a.seed,
    };
    save_checkpoint(&a.out, &ck)?;
    io.outputs.push(a.out.clone());
    eprintln!(
        "trained {} epochs ({:?}), final loss {:.6}; checkpoint {}",
        outcome.reports.len(),
        outcome.stop,
        outcome.reports.last().map_or(f64::NAN, |r| r.mean_loss),
        a.out.display()
    );
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, io: &mut Io) -> Outcome {
    io.inputs.push(a.checkpoint.clone());
    io.inputs.extend(a.rules.paths());
    let ck = load_checkpoint(require_file(&a.checkpoint, "--checkpoint")?)?;
    let rules = a.rules.load()?;
    let keywords: Vec<String> = a
        .keywords
        .split(|c: char| c.is_whitespace() || c == ',' || c == '，')
        .filter(|k| !k.is_empty())
        .map(str::to_string)
        .collect();
    if keywords.is_empty() {
        return Err(Failure::Usage("--keywords is empty".into()));
    }
    if a.beam == 0 {
        return Err(Failure::Usage("--beam must be at least 1".into()));
    }
    let req = GenRequest {
        keywords,
        genre: a.genre,
        beam_width: a.beam,
        tone: !a.no_tone,
        rhyme: !a.no_rhyme,
        line1_rhyme: a.line1_rhyme,
        keyword_separator: a.keyword_sep,
        seed: a.seed,
        log_top_k: a.top_k,
    };
    let g = beam_search_generate(&req, &ck.params, &ck.vocab, &rules)?;
    let report = check_compliance(&g.poem.lines, &rules);
    let mut out = String::new();
    for i in 0..4 {
        out.push_str(&g.poem.line_string(i));
        out.push('\n');
    }
    out.push_str(&format!("# compliance {}\n", json(&report)));
    print!("{out}");
    if let Some(p) = &a.log {
        write_file(p, g.log_jsonl())?;
        io.outputs.push(p.clone());
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, io: &mut Io) -> Outcome {
    io.inputs.extend(a.poem.iter().cloned());
    io.inputs.extend(a.rules.paths());
    let text = match (&a.poem, &a.text) {
        (Some(p), _) => read_text(p, "--poem")?,
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(Failure::Usage("give --poem or --text".into())),
    };
    let rules = a.rules.load()?;
    let report = check_compliance(&poem_lines(&text), &rules);
    println!("{}", json(&report));
    if report.is_compliant() {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

fn cmd_bleu(a: &BleuArgs, io: &mut Io) -> Outcome {
    io.inputs.push(a.hyp.clone());
    let hyp = flat_chars(&read_text(&a.hyp, "--hyp")?);
    match (&a.refs, &a.corpus, &a.keyword) {
        (Some(r), _, _) => {
            io.inputs.push(r.clone());
            let refs: Vec<Vec<char>> = read_text(r, "--refs")?
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .map(flat_chars)
                .collect();
            if refs.is_empty() {
                return Err(Failure::Usage(format!("--refs {} holds no references", r.display())));
            }
            let b = bleu(&hyp, &refs)?;
            println!("{}", json(&b));
            println!("BLEU {:.5} (p1 {:.5}, p2 {:.5}, BP {:.5})", b.bleu, b.p1, b.p2, b.brevity_penalty);
        }
        (None, Some(c), Some(k)) => {
            io.inputs.push(c.clone());
            let poems = load_poems(c, "--corpus")?;
            let index = ReferenceIndex::new(&poems);
            let genre = Genre::from_line_len(hyp.len() / 4).unwrap_or(Genre::FiveChar);
            let refs = index.references(k, None, a.max_refs);
            let record = KeywordScore {
                keyword: k.clone(),
                genre,
                hypothesis: hyp.iter().collect(),
                references: refs.len(),
                report: if refs.is_empty() { None } else { Some(bleu(&hyp, &refs)?) },
            };
            println!("{}", json(&record));
            match record.report {
                Some(b) => println!("BLEU {:.5} over {} references", b.bleu, refs.len()),
                None => println!("BLEU undefined: no corpus poem contains {k:?}"),
            }
        }
        _ => return Err(Failure::Usage("give --refs, or --corpus with --keyword".into())),
    }
    Ok(())
}

fn cmd_embed(a: &EmbedArgs, io: &mut Io) -> Outcome {
    io.inputs.push(a.corpus.clone());
    let poems = load_poems(&a.corpus, "--corpus")?;
    if a.min_count < 1 {
        return Err(Failure::Usage("--min-count must be at least 1".into()));
    }
    let vocab = build_vocab(&poems, a.min_count)?;
    let seqs: Vec<Vec<usize>> = poems
        .iter()
        .map(|p| vocab.encode(&p.chars().collect::<Vec<_>>()))
        .collect();
    let cfg = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        seed: a.seed,
    };
    let emb = train_vocab_embeddings(&seqs, &vocab, &cfg)?;
    save_embeddings(&a.out, &emb)?;
    io.outputs.push(a.out.clone());
    eprintln!("{} vectors of dimension {} written to {}", emb.len(), emb.dim(), a.out.display());
    Ok(())
}

fn parse_variant(spec: &str) -> Outcome<Techniques> {
    let mut t = Techniques::NONE;
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "none" => {}
            "all" => t = Techniques::ALL,
            "char-vectors" | "char_vectors" => t.char_vectors = true,
            "reconstruction" => t.reconstruction = true,
            "input-attention" | "input_attention" => t.input_attention = true,
            "hybrid" => t.hybrid = true,
            other => return Err(Failure::Usage(format!("unknown technique {other:?}"))),
        }
    }
    Ok(t)
}

#[derive(Serialize)]
struct RowRecord<'a> {
    row: &'a str,
    #[serde(flatten)]
    record: &'a KeywordScore,
}

#[derive(Serialize)]
struct RowSummary<'a> {
    row: &'a str,
    techniques: Techniques,
    bleu_five: Option<f64>,
    bleu_seven: Option<f64>,
    aggregation: &'a str,
}

fn cmd_ablate(a: &AblateArgs, io: &mut Io) -> Outcome {
    io.inputs.push(a.corpus.clone());
    io.inputs.extend(a.rules.paths());
    let poems = load_poems(&a.corpus, "--corpus")?;
    let rules = a.rules.load()?;
    let labels: Vec<String>;
    let rows: Vec<(&str, Techniques)> = if a.variant.is_empty() {
        Techniques::table_rows()
    } else {
        let ts = a.variant.iter().map(|v| parse_variant(v)).collect::<Outcome<Vec<_>>>()?;
        labels = a.variant.clone();
        labels.iter().map(String::as_str).zip(ts).collect()
    };
    let config = AblationConfig {
        embed_dim: a.embed_dim,
        enc_hidden: a.enc_hidden,
        dec_hidden: a.dec_hidden,
        attn_dim: a.attn_dim,
        epochs: a.epochs,
        batch_size: a.batch_size,
        patience: a.patience,
        validate_every: a.validate_every,
        scoring: HeldoutScoring {
            beam_width: a.beam,
            keyword_chars: a.keyword_chars,
            max_references: a.max_refs,
            seed: a.seed,
        },
        holdout_every: a.holdout_every,
        seed: a.seed,
        ..AblationConfig::default()
    };
    let report = run_ablation(&poems, &rules, &config, &rows)?;
    let mut out = String::new();
    for row in &report.rows {
        for r in &row.records {
            out.push_str(&json(&RowRecord { row: &row.label, record: r }));
            out.push('\n');
        }
    }
    for row in &report.rows {
        out.push_str(&json(&RowSummary {
            row: &row.label,
            techniques: row.techniques,
            bleu_five: row.bleu_five,
            bleu_seven: row.bleu_seven,
            aggregation: AGGREGATION,
        }));
        out.push('\n');
    }
    print!("{out}");
    eprint!("{}", report.to_table());
    if let Some(p) = &a.out {
        write_file(p, serde_json::to_string_pretty(&report).expect("serializable"))?;
        io.outputs.push(p.clone());
    }
    Ok(())
}

fn command_seed(c: &Command) -> Option<u64> {
    match c {
        Command::Train(a) => Some(a.seed),
        Command::Generate(a) => Some(a.seed),
        Command::Embed(a) => Some(a.seed),
        Command::Ablate(a) => Some(a.seed),
        _ => None,
    }
}

fn default_manifest_path(c: &Command) -> PathBuf {
    match c {
        Command::Train(a) => with_suffix(&a.out, ".manifest.json"),
        Command::Embed(a) => with_suffix(&a.out, ".manifest.json"),
        Command::Ablate(AblateArgs { out: Some(o), .. }) => with_suffix(o, ".manifest.json"),
        c => PathBuf::from(format!("qgen-{}.manifest.json", c.name())),
    }
}

fn execute(command: &Command, manifest: Option<&Path>) -> i32 {
    if let Command::Replay(r) = command {
        let recorded = match RunManifest::load(&r.manifest_file).and_then(|m| m.invocation()) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        if matches!(recorded, Command::Replay(_)) {
            eprintln!("error: a replay manifest cannot be replayed");
            return EXIT_USAGE;
        }
        return execute(&recorded, manifest);
    }

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
    let clock = Instant::now();
    let mut io = Io::default();
    let result = match command {
        Command::Train(a) => cmd_train(a, &mut io),
        Command::Generate(a) => cmd_generate(a, &mut io),
        Command::Validate(a) => cmd_validate(a, &mut io),
        Command::Bleu(a) => cmd_bleu(a, &mut io),
        Command::Embed(a) => cmd_embed(a, &mut io),
        Command::Ablate(a) => cmd_ablate(a, &mut io),
        Command::Replay(_) => unreachable!(),
    };
    let code = match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Negative) => EXIT_NEGATIVE,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    };

    let value = serde_json::to_value(command).expect("serializable");
    let run = RunManifest {
        command: command.name().to_string(),
        config: value["config"].clone(),
        seed: command_seed(command),
        inputs: io.inputs,
        outputs: io.outputs,
        build_id: build_id(),
        started_unix_ms: started,
        wall_time_secs: clock.elapsed().as_secs_f64(),
        exit_code: code,
    };
    let path = manifest.map_or_else(|| default_manifest_path(command), Path::to_path_buf);
    let text = serde_json::to_string_pretty(&run).expect("serializable");
    if let Err(e) = fs::write(&path, text) {
        eprintln!("warning: could not write manifest {}: {e}", path.display());
    }
    code
}

fn toml_value_args(flag: &str, v: &toml::Value, out: &mut Vec<String>) -> Result<(), String> {
    match v {
        toml::Value::Boolean(true) => out.push(format!("--{flag}")),
        toml::Value::Boolean(false) => {}
        toml::Value::String(s) => out.push(format!("--{flag}={s}")),
        toml::Value::Integer(i) => out.push(format!("--{flag}={i}")),
        toml::Value::Float(x) => out.push(format!("--{flag}={x}")),
        toml::Value::Array(xs) => {
            for x in xs {
                toml_value_args(flag, x, out)?;
            }
        }
        other => return Err(format!("unsupported value for {flag}: {other}")),
    }
    Ok(())
}

/// Inserts flag defaults from a TOML file right after the subcommand so
/// that explicit flags override them.
pub fn apply_config_defaults(argv: Vec<String>, toml_text: &str) -> Result<Vec<String>, String> {
    let table: toml::Table = toml_text.parse().map_err(|e| format!("{CONFIG_ENV}: {e}"))?;
    let cmd = Cli::command();
    let Some((pos, sub)) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, a)| cmd.find_subcommand(a).map(|s| (i, s)))
    else {
        return Ok(argv);
    };
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let mut merged: Vec<(String, toml::Value)> = Vec::new();
    let section = table.get(sub.get_name()).and_then(toml::Value::as_table);
    for (k, v) in table.iter().filter(|(_, v)| !v.is_table()).chain(section.into_iter().flatten()) {
        let flag = k.replace('_', "-");
        if !known.contains(&flag) || flag == "manifest" {
            continue;
        }
        merged.retain(|(f, _)| *f != flag);
        merged.push((flag, v.clone()));
    }
    let mut extra = Vec::new();
    for (flag, v) in &merged {
        toml_value_args(flag, v, &mut extra)?;
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}

/// Parses `argv` (program name first) and runs the command.
pub fn run(argv: Vec<String>) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let argv = match std::env::var_os(CONFIG_ENV) {
        Some(path) => {
            let path = PathBuf::from(path);
            let merged = fs::read_to_string(&path)
                .map_err(|e| format!("{CONFIG_ENV}={}: {e}", path.display()))
                .and_then(|t| apply_config_defaults(argv, &t));
            match merged {
                Ok(a) => a,
                Err(m) => {
                    eprintln!("usage error: {m}");
                    return EXIT_USAGE;
                }
            }
        }
        None => argv,
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    execute(&cli.command, cli.manifest.as_deref())
}

pub fn run_from_env() -> i32 {
    run(std::env::args().collect())
}
