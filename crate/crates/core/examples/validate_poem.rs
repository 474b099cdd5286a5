//! Checks a quatrain against the structural, tonal and rhyme regulations.
//!
//! cargo run --example validate_poem -- "月黑雁飞高|单于夜遁逃|欲将轻骑逐|大雪满弓刀"

use qgen::prosody::{check_compliance, ProsodyRules, Tone};

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "月黑雁飞高|单于夜遁逃|欲将轻骑逐|大雪满弓刀".to_string());
    let lines: Vec<Vec<char>> = text.split('|').map(|l| l.trim().chars().collect()).collect();
    let rules = ProsodyRules::bundled();
    let report = check_compliance(&lines, &rules);

    for line in &lines {
        let tones: String = line
            .iter()
            .map(|&c| match rules.dict.tone(c) {
                Tone::Ping => 'P',
                Tone::Ze => 'Z',
                Tone::Unknown => '?',
            })
            .collect();
        println!("{}  {}", line.iter().collect::<String>(), tones);
    }
    println!();
    match (&report.best_template_name, report.structure_ok) {
        (Some(name), true) => println!("closest template: {name}"),
        _ => println!("structure: {}", report.structure_error.as_deref().unwrap_or("invalid")),
    }
    for v in &report.tone_violations {
        println!("  line {} char {}: wants {:?}, has {:?}", v.line + 1, v.position + 1, v.expected, v.found);
    }
    println!("rhyme ok: {}", report.rhyme_ok);
    println!("compliant: {}", report.is_compliant());
}
