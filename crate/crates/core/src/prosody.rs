//! Quatrain regulations: line structure, level/oblique tonal templates and
//! rhyme groups.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Genre, Poem};
use crate::error::{Error, Result};

/// Tonal class of a character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tone {
    /// Level tone.
    Ping,
    /// Oblique tone.
    Ze,
    Unknown,
}

/// One position of a tonal template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    P,
    Z,
    Any,
}

impl Slot {
    /// Unknown tones satisfy every slot.
    pub fn accepts(self, tone: Tone) -> bool {
        matches!(
            (self, tone),
            (Slot::Any, _) | (_, Tone::Unknown) | (Slot::P, Tone::Ping) | (Slot::Z, Tone::Ze)
        )
    }

    fn from_symbol(c: char) -> Option<Slot> {
        match c {
            'P' => Some(Slot::P),
            'Z' => Some(Slot::Z),
            '*' => Some(Slot::Any),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Slot::P => 'P',
            Slot::Z => 'Z',
            Slot::Any => '*',
        }
    }
}

/// Character tones and rhyme groups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToneDict {
    entries: HashMap<char, (Tone, Option<String>)>,
}

impl ToneDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, c: char, tone: Tone, group: Option<String>) {
        self.entries.insert(c, (tone, group));
    }

    pub fn tone(&self, c: char) -> Tone {
        self.entries.get(&c).map_or(Tone::Unknown, |e| e.0)
    }

    pub fn rhyme_group(&self, c: char) -> Option<&str> {
        self.entries.get(&c).and_then(|e| e.1.as_deref())
    }

    pub fn contains(&self, c: char) -> bool {
        self.entries.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `char \t P|Z \t rhyme_group` rows. `#` lines and blank lines
    /// are skipped; the group column may be omitted. A repeated character
    /// keeps its last row.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut dict = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::Parse {
                path: source.into(),
                line: i + 1,
                message: m,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&cols.len()) {
                return Err(bad(format!("expected 2 or 3 tab-separated columns, found {}", cols.len())));
            }
            let mut chars = cols[0].chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => return Err(bad(format!("{:?} is not a single character", cols[0]))),
            };
            let tone = match cols[1] {
                "P" => Tone::Ping,
                "Z" => Tone::Ze,
                other => return Err(bad(format!("tone must be P or Z, found {other:?}"))),
            };
            let group = cols.get(2).map(|g| g.trim()).filter(|g| !g.is_empty()).map(str::to_string);
            if dict.contains(c) {
                log::warn!("{source}:{}: duplicate entry for {c}; the later row wins", i + 1);
            }
            dict.insert(c, tone, group);
        }
        Ok(dict)
    }
}

pub fn load_tone_dict(path: impl AsRef<Path>) -> Result<ToneDict> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ToneDict::parse(&text, &path.display().to_string())
}

/// Four lines of slots for one genre.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TonalTemplate {
    pub id: usize,
    pub name: String,
    pub genre: Genre,
    pub lines: Vec<Vec<Slot>>,
}

impl TonalTemplate {
    pub fn slot(&self, line: usize, pos: usize) -> Slot {
        self.lines[line][pos]
    }
}

impl fmt::Display for TonalTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.lines.iter().map(|l| l.iter().map(|s| s.symbol()).collect()).collect();
        write!(f, "{}", lines.join("/"))
    }
}

/// Parses blank-line separated blocks of four `P`/`Z`/`*` lines, each
/// optionally headed by `@ name`. Ids follow file order.
pub fn parse_templates(text: &str, source: &str) -> Result<Vec<TonalTemplate>> {
    let mut out = Vec::new();
    let mut name: Option<String> = None;
    let mut lines: Vec<Vec<Slot>> = Vec::new();
    let mut start = 0;
    let finish = |name: &mut Option<String>, lines: &mut Vec<Vec<Slot>>, start: usize, out: &mut Vec<TonalTemplate>| {
        if lines.is_empty() {
            if name.is_some() {
                return Err(Error::Parse {
                    path: source.into(),
                    line: start,
                    message: "template header without lines".into(),
                });
            }
            return Ok(());
        }
        let bad = |m: String| Error::Parse {
            path: source.into(),
            line: start,
            message: m,
        };
        if lines.len() != 4 {
            return Err(bad(format!("template has {} lines, expected 4", lines.len())));
        }
        let genre = Genre::from_line_len(lines[0].len())
            .filter(|g| lines.iter().all(|l| l.len() == g.line_len()))
            .ok_or_else(|| bad("template lines must all have 5 or all have 7 slots".into()))?;
        let id = out.len();
        out.push(TonalTemplate {
            id,
            name: name.take().unwrap_or_else(|| format!("template-{id}")),
            genre,
            lines: std::mem::take(lines),
        });
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            finish(&mut name, &mut lines, start, &mut out)?;
            continue;
        }
        if lines.is_empty() && name.is_none() {
            start = i + 1;
        }
        if let Some(n) = line.strip_prefix('@') {
            if !lines.is_empty() || name.is_some() {
                return Err(Error::Parse {
                    path: source.into(),
                    line: i + 1,
                    message: "template header must start a block".into(),
                });
            }
            name = Some(n.trim().to_string());
            continue;
        }
        let slots: Option<Vec<Slot>> = line.chars().map(Slot::from_symbol).collect();
        match slots {
            Some(s) => lines.push(s),
            None => {
                return Err(Error::Parse {
                    path: source.into(),
                    line: i + 1,
                    message: format!("slots must be P, Z or *, found {line:?}"),
                })
            }
        }
    }
    finish(&mut name, &mut lines, start, &mut out)?;
    Ok(out)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<TonalTemplate>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_templates(&text, &path.display().to_string())
}

/// Tone dictionary plus the template family.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProsodyRules {
    pub dict: ToneDict,
    pub templates: Vec<TonalTemplate>,
}

impl ProsodyRules {
    pub fn new(dict: ToneDict, templates: Vec<TonalTemplate>) -> Self {
        Self { dict, templates }
    }

    pub fn load(dict_path: impl AsRef<Path>, templates_path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(load_tone_dict(dict_path)?, load_templates(templates_path)?))
    }

    /// The tone dictionary and templates shipped in `data/`.
    pub fn bundled() -> Self {
        let dict = ToneDict::parse(include_str!("../data/tone_dict.tsv"), "data/tone_dict.tsv")
            .expect("bundled tone dictionary parses");
        let templates =
            parse_templates(include_str!("../data/templates.txt"), "data/templates.txt").expect("bundled templates parse");
        Self::new(dict, templates)
    }

    pub fn templates_for(&self, genre: Genre) -> impl Iterator<Item = &TonalTemplate> {
        self.templates.iter().filter(move |t| t.genre == genre)
    }
}

/// Genre of four equal lines of five or seven characters.
pub fn validate_structure(lines: &[Vec<char>]) -> Result<Genre> {
    let mut problems = Vec::new();
    if lines.len() != 4 {
        problems.push(format!("expected 4 lines, found {}", lines.len()));
    }
    let genre = lines.first().and_then(|l| Genre::from_line_len(l.len()));
    for (i, l) in lines.iter().enumerate() {
        let ok = match genre {
            Some(g) => l.len() == g.line_len(),
            None => false,
        };
        if !ok {
            problems.push(format!("line {} has {} characters", i + 1, l.len()));
        }
    }
    match genre {
        Some(g) if problems.is_empty() => Ok(g),
        _ => Err(Error::Structure(problems.join("; "))),
    }
}

/// A known tone sitting in a slot that forbids it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToneViolation {
    /// Zero-based line index.
    pub line: usize,
    /// Zero-based character index.
    pub position: usize,
    pub expected: Slot,
    pub found: Tone,
}

fn violations(poem: &Poem, dict: &ToneDict, t: &TonalTemplate) -> Vec<ToneViolation> {
    let mut out = Vec::new();
    for (li, line) in poem.lines.iter().enumerate() {
        for (pi, &c) in line.iter().enumerate() {
            let tone = dict.tone(c);
            let slot = t.slot(li, pi);
            if !slot.accepts(tone) {
                out.push(ToneViolation {
                    line: li,
                    position: pi,
                    expected: slot,
                    found: tone,
                });
            }
        }
    }
    out
}

/// Template of the poem's genre satisfying the most known-tone positions
/// (lowest id on ties) with its violations; `None` when no template exists
/// for the genre.
pub fn match_tonal_template<'a>(
    poem: &Poem,
    dict: &ToneDict,
    templates: &'a [TonalTemplate],
) -> Option<(&'a TonalTemplate, Vec<ToneViolation>)> {
    let mut best: Option<(&TonalTemplate, Vec<ToneViolation>)> = None;
    for t in templates.iter().filter(|t| t.genre == poem.genre) {
        let v = violations(poem, dict, t);
        let better = match &best {
            None => true,
            Some((b, bv)) => v.len() < bv.len() || (v.len() == bv.len() && t.id < b.id),
        };
        if better {
            best = Some((t, v));
        }
    }
    best
}

/// Outcome of the line-2 / line-4 rhyme check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeCheck {
    pub rhyme_ok: bool,
    pub line1_group: Option<String>,
    pub line2_group: Option<String>,
    pub line4_group: Option<String>,
    /// Whether line 1 also ends in the shared group.
    pub line1_rhymes: bool,
    pub reason: Option<String>,
}

pub fn validate_rhyme(poem: &Poem, dict: &ToneDict) -> RhymeCheck {
    let group = |i: usize| {
        poem.lines[i]
            .last()
            .and_then(|&c| dict.rhyme_group(c))
            .map(str::to_string)
    };
    let (g1, g2, g4) = (group(0), group(1), group(3));
    let (rhyme_ok, reason) = match (&g2, &g4) {
        (Some(a), Some(b)) if a == b => (true, None),
        (Some(_), Some(_)) => (false, Some("different groups".to_string())),
        _ => (false, Some("unknown".to_string())),
    };
    let line1_rhymes = rhyme_ok && g1.is_some() && g1 == g2;
    RhymeCheck {
        rhyme_ok,
        line1_group: g1,
        line2_group: g2,
        line4_group: g4,
        line1_rhymes,
        reason,
    }
}

/// Full regulation check of a candidate poem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub structure_ok: bool,
    pub structure_error: Option<String>,
    pub genre: Option<Genre>,
    pub best_template: Option<usize>,
    pub best_template_name: Option<String>,
    pub tone_violations: Vec<ToneViolation>,
    pub rhyme_ok: bool,
    pub rhyme: Option<RhymeCheck>,
    pub unknown_chars: Vec<char>,
}

impl ComplianceReport {
    /// Structure valid, a template matched with no violations, and rhyme holds.
    pub fn is_compliant(&self) -> bool {
        self.structure_ok && self.best_template.is_some() && self.tone_violations.is_empty() && self.rhyme_ok
    }
}

pub fn check_compliance(lines: &[Vec<char>], rules: &ProsodyRules) -> ComplianceReport {
    let mut unknown_chars: Vec<char> = Vec::new();
    for &c in lines.iter().flatten() {
        if rules.dict.tone(c) == Tone::Unknown && !unknown_chars.contains(&c) {
            unknown_chars.push(c);
        }
    }
    let poem = validate_structure(lines).and_then(|_| Poem::new(lines.to_vec(), "candidate"));
    match poem {
        Err(e) => ComplianceReport {
            structure_ok: false,
            structure_error: Some(e.to_string()),
            genre: None,
            best_template: None,
            best_template_name: None,
            tone_violations: Vec::new(),
            rhyme_ok: false,
            rhyme: None,
            unknown_chars,
        },
        Ok(poem) => {
            let matched = match_tonal_template(&poem, &rules.dict, &rules.templates);
            let rhyme = validate_rhyme(&poem, &rules.dict);
            ComplianceReport {
                structure_ok: true,
                structure_error: None,
                genre: Some(poem.genre),
                best_template: matched.as_ref().map(|m| m.0.id),
                best_template_name: matched.as_ref().map(|m| m.0.name.clone()),
                tone_violations: matched.map(|m| m.1).unwrap_or_default(),
                rhyme_ok: rhyme.rhyme_ok,
                rhyme: Some(rhyme),
                unknown_chars,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DICT: &str = include_str!("../data/tone_dict.tsv");
    const TEMPLATES: &str = include_str!("../data/templates.txt");
    const TABLE1: &str = "月黑雁飞高|单于夜遁逃|欲将轻骑逐|大雪满弓刀";

    fn rules() -> ProsodyRules {
        ProsodyRules::new(
            ToneDict::parse(DICT, "fixture").unwrap(),
            parse_templates(TEMPLATES, "fixture").unwrap(),
        )
    }

    fn lines(s: &str) -> Vec<Vec<char>> {
        s.split('|').map(|l| l.chars().collect()).collect()
    }

    #[test]
    fn fixture_rows() {
        let d = ToneDict::parse("高\tP\tao_level\n", "t").unwrap();
        assert_eq!(d.tone('高'), Tone::Ping);
        assert_eq!(d.rhyme_group('高'), Some("ao_level"));
        assert_eq!(d.tone('夜'), Tone::Unknown);
        assert_eq!(d.rhyme_group('夜'), None);
        assert!(ToneDict::parse("", "t").unwrap().is_empty());
    }

    #[test]
    fn duplicates_keep_last_and_bad_rows_name_their_line() {
        let d = ToneDict::parse("高\tP\ta\n高\tZ\tb\n", "t").unwrap();
        assert_eq!(d.tone('高'), Tone::Ze);
        assert_eq!(d.rhyme_group('高'), Some("b"));
        match ToneDict::parse("# c\n高\tP\ta\n夜\tX\tb\n", "t") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(ToneDict::parse("高夜\tP\ta\n", "t").is_err());
    }

    #[test]
    fn templates_parse() {
        let t = parse_templates(TEMPLATES, "fixture").unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.iter().filter(|t| t.genre == Genre::FiveChar).count(), 4);
        assert_eq!(t[0].to_string(), "*ZZPP/PPZZP/*PPZZ/*ZZPP");
        assert!(parse_templates("PPZ\nPPZ\nPPZ\nPPZ\n", "t").is_err());
        assert!(parse_templates("PPZZP\nPPZZP\nPPZZP\n", "t").is_err());
        assert!(parse_templates("PPZZX\nPPZZP\nPPZZP\nPPZZP\n", "t").is_err());
    }

    #[test]
    fn structure() {
        assert_eq!(validate_structure(&lines(TABLE1)).unwrap(), Genre::FiveChar);
        assert!(validate_structure(&lines("月黑雁飞高高|单于夜遁逃逃|欲将轻骑逐逐|大雪满弓刀刀")).is_err());
        assert!(validate_structure(&lines("月黑雁飞高|单于夜遁逃|欲将轻骑逐|大雪满弓刀|大雪满弓刀")).is_err());
        match validate_structure(&lines("月黑雁飞高|单于夜遁|欲将轻骑逐|大雪满弓刀")) {
            Err(Error::Structure(m)) => assert!(m.contains("line 2"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn table_one_matches_first_template() {
        let r = rules();
        let poem = Poem::parse_record(TABLE1, "t1").unwrap();
        let (t, v) = match_tonal_template(&poem, &r.dict, &r.templates).unwrap();
        assert_eq!(t.to_string(), "*ZZPP/PPZZP/*PPZZ/*ZZPP");
        assert!(v.is_empty(), "{v:?}");
        let rhyme = validate_rhyme(&poem, &r.dict);
        assert!(rhyme.rhyme_ok);
        assert_eq!(rhyme.line2_group.as_deref(), Some("ao_level"));
        assert!(rhyme.line1_rhymes);
        assert!(check_compliance(&lines(TABLE1), &r).is_compliant());
    }

    #[test]
    fn single_flip_gives_one_violation() {
        let mut r = rules();
        let poem = Poem::parse_record(TABLE1, "t1").unwrap();
        // 飞 sits in a P slot of line 1 in every five-character template
        r.dict.insert('飞', Tone::Ze, None);
        let (t, v) = match_tonal_template(&poem, &r.dict, &r.templates).unwrap();
        assert_eq!(t.id, 0);
        assert_eq!(
            v,
            vec![ToneViolation {
                line: 0,
                position: 3,
                expected: Slot::P,
                found: Tone::Ze
            }]
        );
    }

    #[test]
    fn unknown_chars_never_violate() {
        let r = rules();
        let poem = Poem::parse_record("ＡＢＣＤＥ|ＦＧＨＩＪ|ＫＬＭＮＯ|ＰＱＲＳＴ", "x").unwrap();
        for t in r.templates.iter().filter(|t| t.genre == Genre::FiveChar) {
            assert!(violations(&poem, &r.dict, t).is_empty());
        }
        let rep = check_compliance(&poem.lines, &r);
        assert_eq!(rep.unknown_chars.len(), 20);
        assert!(!rep.rhyme_ok);
        assert_eq!(rep.rhyme.unwrap().reason.as_deref(), Some("unknown"));
    }

    #[test]
    fn rhyme_cases() {
        let r = rules();
        let same = Poem::parse_record("月黑雁飞高|单于夜遁逃|欲将轻骑逐|大雪满弓逃", "x").unwrap();
        assert!(validate_rhyme(&same, &r.dict).rhyme_ok);
        let unknown = Poem::parse_record("月黑雁飞高|单于夜遁逃|欲将轻骑逐|大雪满弓Ｑ", "x").unwrap();
        let c = validate_rhyme(&unknown, &r.dict);
        assert!(!c.rhyme_ok);
        assert_eq!(c.reason.as_deref(), Some("unknown"));
    }

    #[test]
    fn broken_structure_leaves_other_fields_empty() {
        let rep = check_compliance(&lines("月黑雁飞高高|单于夜遁逃|欲将轻骑逐|大雪满弓刀"), &rules());
        assert!(!rep.structure_ok);
        assert!(rep.best_template.is_none() && rep.rhyme.is_none() && rep.tone_violations.is_empty());
        assert!(!rep.is_compliant());
    }

    fn arb_poem(genre_len: usize) -> impl Strategy<Value = Vec<Vec<char>>> {
        let chars: Vec<char> = DICT
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(|l| l.chars().next())
            .collect();
        prop::collection::vec(prop::collection::vec(prop::sample::select(chars), genre_len), 4)
    }

    proptest! {
        #[test]
        fn forgetting_a_tone_never_adds_violations(lines in arb_poem(7), pick in 0usize..28) {
            let r = rules();
            let poem = Poem::new(lines.clone(), "p").unwrap();
            let before = match_tonal_template(&poem, &r.dict, &r.templates).unwrap().1.len();
            let mut d = r.dict.clone();
            d.insert(lines[pick / 7][pick % 7], Tone::Unknown, None);
            let after = match_tonal_template(&poem, &d, &r.templates).unwrap().1.len();
            prop_assert!(after <= before);
        }

        #[test]
        fn rhyme_is_symmetric_in_lines_two_and_four(lines in arb_poem(5)) {
            let r = rules();
            let a = Poem::new(lines.clone(), "a").unwrap();
            let mut swapped = lines;
            swapped.swap(1, 3);
            let b = Poem::new(swapped, "b").unwrap();
            prop_assert_eq!(validate_rhyme(&a, &r.dict).rhyme_ok, validate_rhyme(&b, &r.dict).rhyme_ok);
        }
    }

    #[test]
    fn synthetic_poem_fits_its_template() {
        let r = rules();
        let ping = r.dict.entries.iter().find(|e| e.1 .0 == Tone::Ping).map(|e| *e.0).unwrap();
        let ze = r.dict.entries.iter().find(|e| e.1 .0 == Tone::Ze).map(|e| *e.0).unwrap();
        for t in &r.templates {
            let lines: Vec<Vec<char>> = t
                .lines
                .iter()
                .map(|l| l.iter().map(|s| if *s == Slot::Z { ze } else { ping }).collect())
                .collect();
            let poem = Poem::new(lines, "s").unwrap();
            assert!(violations(&poem, &r.dict, t).is_empty(), "{}", t.name);
        }
    }
}
