//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` (or as part of `cargo test`).

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use qgen::corpus::{build_training_sequence, build_vocab, parse_corpus_str, Genre, Poem, TrainingExample, Vocab};
use qgen::embeddings::pair_loss;
use qgen::evaluation::{bleu, run_ablation, AblationConfig, HeldoutScoring, Techniques};
use qgen::generation::{beam_search_generate, GenRequest};
use qgen::model::{
    additive_attention, additive_attention_backward, gru_cell, gru_cell_backward, AttentionParams, GruParams,
    ModelConfig, ModelParams,
};
use qgen::numerics::ops::{
    affine, affine_backward, cross_entropy, cross_entropy_logit_grad, sigmoid, softmax, softmax_backward,
};
use qgen::numerics::{grad_check, AdaDeltaConfig, AdaDeltaState, Gradients, Parameterized, Tensor};
use qgen::prosody::{check_compliance, validate_structure, ProsodyRules};
use qgen::training::{encode_checkpoint, fit, Checkpoint, FitOutcome, GenreMode, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: usize = 20;
const GRAD_BUDGET_SECS: f64 = 120.0;
const OVERFIT_LOSS: f64 = 0.15;
const OVERFIT_EPOCHS: usize = 2000;
const OVERFIT_BUDGET_SECS: f64 = 600.0;
const OVERFIT_ECHO_RATE: f64 = 0.90;
const FIDELITY_RATE: f64 = 0.80;
const COMPLIANCE_RUNS: usize = 100;
const BLEU_CASES: usize = 200;
const BLEU_TOL: f64 = 1e-12;
const ADADELTA_TOL: f64 = 1e-9;
const GENRE_RUNS: usize = 50;

const OVERFIT_CORPUS: &str = include_str!("../data/overfit32.txt");
const SAMPLE_CORPUS: &str = include_str!("../data/sample_corpus.txt");

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Runs `GRAD_INSTANCES` seeded checks of one operation and returns the
/// worst relative error. `make` returns the flat point, the analytic
/// gradient, and the scalar objective.
fn check_op<F>(label: &str, worst: &mut Vec<(String, f64)>, mut make: F)
where
    F: FnMut(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Box<dyn Fn(&[f64]) -> f64>),
{
    let mut max = 0.0f64;
    for seed in 0..GRAD_INSTANCES as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + 1);
        let (mut x, analytic, f) = make(&mut rng);
        let r = grad_check(|p| f(p), &mut x, &analytic);
        max = max.max(r.max_rel_error);
    }
    worst.push((label.to_string(), max));
}

fn gru_tensors(p: &GruParams) -> [&Tensor; 9] {
    [&p.w_z, &p.u_z, &p.b_z, &p.w_r, &p.u_r, &p.b_r, &p.w_h, &p.u_h, &p.b_h]
}

fn gru_from_flat(n: usize, h: usize, flat: &[f64]) -> GruParams {
    let mut p = GruParams::zeros(n, h);
    let mut off = 0;
    for t in [
        &mut p.w_z, &mut p.u_z, &mut p.b_z, &mut p.w_r, &mut p.u_r, &mut p.b_r, &mut p.w_h, &mut p.u_h, &mut p.b_h,
    ] {
        let len = t.len();
        t.data_mut().copy_from_slice(&flat[off..off + len]);
        off += len;
    }
    p
}

fn criterion_gradients() -> Line {
    let start = Instant::now();
    let mut worst = Vec::new();

    check_op("affine", &mut worst, |rng| {
        let (m, n) = (4, 5);
        let c = uniform(rng, m, 1.0);
        let x = uniform(rng, m * n + n + m, 1.0);
        let split = move |x: &[f64]| {
            (
                Tensor::new(&[m, n], x[..m * n].to_vec()).unwrap(),
                Tensor::vector(x[m * n..m * n + n].to_vec()),
                Tensor::vector(x[m * n + n..].to_vec()),
            )
        };
        let (w, xv, _) = split(&x);
        let g = affine_backward(&w, &xv, &Tensor::vector(c.clone())).unwrap();
        let analytic = [g.dw.data(), g.dx.data(), g.db.data()].concat();
        let f = move |x: &[f64]| {
            let (w, xv, b) = split(x);
            affine(&w, &xv, &b).unwrap().data().iter().zip(&c).map(|(y, c)| y * c).sum()
        };
        (x, analytic, Box::new(f))
    });

    check_op("softmax", &mut worst, |rng| {
        let c = uniform(rng, 6, 1.0);
        let z = uniform(rng, 6, 3.0);
        let p = softmax(&Tensor::vector(z.clone())).unwrap();
        let mut dz = vec![0.0; 6];
        softmax_backward(p.data(), &c, &mut dz);
        let f = move |z: &[f64]| {
            softmax(&Tensor::vector(z.to_vec())).unwrap().data().iter().zip(&c).map(|(p, c)| p * c).sum()
        };
        (z, dz, Box::new(f))
    });

    check_op("cross-entropy", &mut worst, |rng| {
        let z = uniform(rng, 7, 3.0);
        let target = rng.gen_range(0..7);
        let p = softmax(&Tensor::vector(z.clone())).unwrap();
        let dz = cross_entropy_logit_grad(&p, target).unwrap().into_data();
        let f = move |z: &[f64]| {
            cross_entropy(&softmax(&Tensor::vector(z.to_vec())).unwrap(), target).unwrap().loss
        };
        (z, dz, Box::new(f))
    });

    check_op("sigmoid/tanh", &mut worst, |rng| {
        let c = uniform(rng, 8, 1.0);
        let x = uniform(rng, 8, 3.0);
        let analytic: Vec<f64> = x
            .iter()
            .zip(&c)
            .enumerate()
            .map(|(i, (&v, &c))| {
                if i % 2 == 0 {
                    c * sigmoid(v) * (1.0 - sigmoid(v))
                } else {
                    c * (1.0 - v.tanh().powi(2))
                }
            })
            .collect();
        let f = move |x: &[f64]| {
            x.iter()
                .zip(&c)
                .enumerate()
                .map(|(i, (&v, &c))| c * if i % 2 == 0 { sigmoid(v) } else { v.tanh() })
                .sum()
        };
        (x, analytic, Box::new(f))
    });

    check_op("gru cell", &mut worst, |rng| {
        let (n, h) = (4, 3);
        let p = GruParams::uniform(n, h, 0.8, rng);
        let x = uniform(rng, n, 1.0);
        let hp = uniform(rng, h, 1.0);
        let c = uniform(rng, h, 1.0);
        let g = gru_cell_backward(&Tensor::vector(x.clone()), &Tensor::vector(hp.clone()), &p, &Tensor::vector(c.clone()))
            .unwrap();
        let mut flat: Vec<f64> = gru_tensors(&p).iter().flat_map(|t| t.data().to_vec()).collect();
        let np = flat.len();
        flat.extend(&x);
        flat.extend(&hp);
        let mut analytic: Vec<f64> = gru_tensors(&g.params).iter().flat_map(|t| t.data().to_vec()).collect();
        analytic.extend(g.dx.data());
        analytic.extend(g.dh_prev.data());
        let f = move |v: &[f64]| {
            let p = gru_from_flat(n, h, &v[..np]);
            let out = gru_cell(
                &Tensor::vector(v[np..np + n].to_vec()),
                &Tensor::vector(v[np + n..].to_vec()),
                &p,
            )
            .unwrap();
            out.data().iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        (flat, analytic, Box::new(f))
    });

    check_op("attention", &mut worst, |rng| {
        let (a, q, k, t) = (3, 4, 5, 4);
        let split = move |v: &[f64]| {
            let mut att = AttentionParams::zeros(a, q, k);
            let (w, rest) = v.split_at(a * q);
            let (u, rest) = rest.split_at(a * k);
            let (vv, rest) = rest.split_at(a);
            let (query, rest) = rest.split_at(q);
            att.w.data_mut().copy_from_slice(w);
            att.u.data_mut().copy_from_slice(u);
            att.v.data_mut().copy_from_slice(vv);
            let memory: Vec<Vec<f64>> = rest.chunks(k).map(<[f64]>::to_vec).collect();
            (att, query.to_vec(), memory)
        };
        let flat = uniform(rng, a * q + a * k + a + q + t * k, 1.0);
        let c = uniform(rng, k, 1.0);
        let (att, query, memory) = split(&flat);
        let g = additive_attention_backward(&att, &query, &memory, &c).unwrap();
        let analytic = [
            g.params.w.data().to_vec(),
            g.params.u.data().to_vec(),
            g.params.v.data().to_vec(),
            g.dquery.clone(),
            g.dmemory.concat(),
        ]
        .concat();
        let f = move |v: &[f64]| {
            let (att, query, memory) = split(v);
            let (_, ctx) = additive_attention(&att, &query, &memory).unwrap();
            ctx.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        (flat, analytic, Box::new(f))
    });

    check_op("skip-gram pair", &mut worst, |rng| {
        let d = 6;
        let x = uniform(rng, 4 * d, 1.0);
        let g = pair_loss(&x[..d], &x[d..2 * d], &[&x[2 * d..3 * d], &x[3 * d..]]).1;
        let analytic = [g.center, g.context, g.negatives.concat()].concat();
        let f = move |x: &[f64]| pair_loss(&x[..d], &x[d..2 * d], &[&x[2 * d..3 * d], &x[3 * d..]]).0;
        (x, analytic, Box::new(f))
    });

    check_op("sequence loss", &mut worst, |rng| {
        let cfg = ModelConfig {
            embed_dim: 4,
            enc_hidden: 3,
            dec_hidden: 5,
            attn_dim: 3,
            input_attention: true,
            type_indicator: true,
            ..ModelConfig::new(12)
        };
        let mut params = ModelParams::new(cfg, rng.gen()).unwrap();
        let n = params.flatten().len();
        params.assign_flat(&uniform(rng, n, 0.5));
        let input: Vec<usize> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(5..12)).collect();
        let target: Vec<usize> = (0..rng.gen_range(1..7)).map(|_| rng.gen_range(0..12)).collect();
        let genre = if rng.gen() { Genre::FiveChar } else { Genre::SevenChar };
        let mut grads = params.zeros_like();
        params.loss_and_grad(&input, &target, genre, &mut grads).unwrap();
        let flat = params.flatten();
        let f = move |v: &[f64]| {
            let mut p = params.clone();
            p.assign_flat(v);
            p.forward_teacher(&input, &target, genre).unwrap().loss
        };
        (flat, grads.flatten(), Box::new(f))
    });

    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let pass = max < GRAD_TOL && secs < GRAD_BUDGET_SECS;
    let per_op: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    Line {
        id: 1,
        name: "gradient integrity",
        pass,
        detail: format!(
            "max rel err {max:.2e} < {GRAD_TOL:.0e} over {GRAD_INSTANCES} instances per op ({}), {secs:.1}s < {GRAD_BUDGET_SECS}s",
            per_op.join(", ")
        ),
    }
}

struct Overfit {
    params: ModelParams,
    vocab: Vocab,
    poems: Vec<Poem>,
    examples: Vec<TrainingExample>,
    outcome: FitOutcome,
    secs: f64,
}

fn overfit_config(vocab: &Vocab) -> ModelConfig {
    ModelConfig {
        embed_dim: 32,
        enc_hidden: 64,
        dec_hidden: 128,
        attn_dim: 64,
        input_attention: true,
        type_indicator: true,
        ..ModelConfig::new(vocab.len())
    }
}

fn overfit_train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 1,
        seed: 1,
        genre_mode: GenreMode::Hybrid,
        target_loss: Some(OVERFIT_LOSS),
        ..TrainConfig::default()
    }
}

fn train_overfit(epochs: usize) -> Overfit {
    let poems = parse_corpus_str(OVERFIT_CORPUS, "overfit32", None).poems;
    let vocab = build_vocab(&poems, 1).unwrap();
    let examples: Vec<_> = poems.iter().map(|p| build_training_sequence(p, &vocab)).collect();
    let mut params = ModelParams::new(overfit_config(&vocab), 1).unwrap();
    let tc = overfit_train_config(epochs);
    let mut opt = AdaDeltaState::new(tc.adadelta, &params).unwrap();
    let start = Instant::now();
    let outcome = fit(&examples, &mut params, &mut opt, &tc, |_, _| Ok(None)).unwrap();
    Overfit {
        params,
        vocab,
        poems,
        examples,
        outcome,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn criterion_overfit(o: &Overfit) -> Line {
    let final_loss = o.outcome.reports.last().unwrap().mean_loss;
    let mut exact = 0;
    let mut echo = 0;
    for ex in &o.examples {
        let trace = o.params.forward_teacher(&ex.input_ids, &ex.target_ids, ex.genre).unwrap();
        let pred = trace.argmax_tokens();
        exact += usize::from(pred == ex.target_ids);
        let l = ex.genre.line_len();
        let n = pred.len();
        // last line before EOS is the reconstructed first line
        echo += usize::from(n > l && pred[n - 1 - l..n - 1] == ex.input_ids[..]);
    }
    let total = o.examples.len();
    let rate = exact as f64 / total as f64;
    let pass = final_loss < OVERFIT_LOSS
        && o.outcome.reports.len() <= OVERFIT_EPOCHS
        && o.secs < OVERFIT_BUDGET_SECS
        && rate >= OVERFIT_ECHO_RATE;
    Line {
        id: 2,
        name: "overfit and echo",
        pass,
        detail: format!(
            "loss {final_loss:.4} < {OVERFIT_LOSS} after {} epochs (limit {OVERFIT_EPOCHS}) in {:.0}s; exact argmax {exact}/{total} = {:.1}% >= {:.0}%; reconstruction echo {echo}/{total}",
            o.outcome.reports.len(),
            o.secs,
            100.0 * rate,
            100.0 * OVERFIT_ECHO_RATE
        ),
    }
}

fn criterion_fidelity(o: &Overfit, rules: &ProsodyRules) -> Line {
    let mut hits = 0;
    for p in &o.poems {
        let mut req = GenRequest::new(&p.line_string(0), p.genre);
        req.tone = false;
        req.rhyme = false;
        let g = beam_search_generate(&req, &o.params, &o.vocab, rules).unwrap();
        hits += usize::from(g.poem.lines[1..] == p.lines[1..]);
    }
    let rate = hits as f64 / o.poems.len() as f64;
    Line {
        id: 3,
        name: "keyword fidelity",
        pass: rate >= FIDELITY_RATE,
        detail: format!(
            "lines 2-4 reproduced for {hits}/{} poems = {:.1}% >= {:.0}% (beam 5, structure-only decoding)",
            o.poems.len(),
            100.0 * rate,
            100.0 * FIDELITY_RATE
        ),
    }
}

fn keyword_for(poems: &[Poem], i: usize) -> (String, Genre) {
    let p = &poems[i % poems.len()];
    let line = (i / poems.len()) % 4;
    (p.lines[line].iter().take(2).collect(), p.genre)
}

fn criterion_compliance(o: &Overfit, rules: &ProsodyRules) -> Line {
    let mut ok = 0;
    let mut first_failure = None;
    for i in 0..COMPLIANCE_RUNS {
        let (kw, genre) = keyword_for(&o.poems, i);
        let mut req = GenRequest::new(&kw, genre);
        req.seed = i as u64;
        let g = beam_search_generate(&req, &o.params, &o.vocab, rules).unwrap();
        let report = check_compliance(&g.poem.lines, rules);
        if report.is_compliant() {
            ok += 1;
        } else if first_failure.is_none() {
            first_failure = Some(format!("{kw}: {}", g.poem.to_record()));
        }
    }
    Line {
        id: 4,
        name: "prosody compliance",
        pass: ok == COMPLIANCE_RUNS,
        detail: format!(
            "{ok}/{COMPLIANCE_RUNS} constrained generations pass structure, zero known-tone violations and line 2/4 rhyme{}",
            first_failure.map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    }
}

fn brute_bleu(h: &[u8], refs: &[Vec<u8>]) -> f64 {
    let precision = |n: usize| -> f64 {
        if h.len() < n {
            return 0.0;
        }
        let mut hc: HashMap<Vec<u8>, usize> = HashMap::new();
        for i in 0..=h.len() - n {
            *hc.entry(h[i..i + n].to_vec()).or_default() += 1;
        }
        let mut credit = 0;
        for (g, c) in &hc {
            let mut best = 0;
            for r in refs {
                let mut k = 0;
                for i in 0..r.len().saturating_sub(n - 1) {
                    if r[i..i + n] == g[..] {
                        k += 1;
                    }
                }
                best = best.max(k);
            }
            credit += (*c).min(best);
        }
        credit as f64 / (h.len() - n + 1) as f64
    };
    let (p1, p2) = (precision(1), precision(2));
    if p1 == 0.0 || p2 == 0.0 {
        return 0.0;
    }
    let mut lens: Vec<usize> = refs.iter().map(Vec::len).collect();
    lens.sort();
    let c = h.len() as i64;
    let r = *lens.iter().min_by_key(|&&l| (l as i64 - c).abs()).unwrap();
    let bp = if h.len() >= r { 1.0 } else { (1.0 - r as f64 / h.len() as f64).exp() };
    bp * (p1 * p2).sqrt()
}

fn criterion_bleu() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut max_diff = 0.0f64;
    let mut nonzero = 0;
    for _ in 0..BLEU_CASES {
        let text = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.gen_range(0..16);
            (0..n).map(|_| rng.gen_range(b'a'..b'f')).collect()
        };
        let h = text(&mut rng);
        let refs: Vec<Vec<u8>> = (0..rng.gen_range(1..5)).map(|_| text(&mut rng)).collect();
        let ours = bleu(&h, &refs).unwrap().bleu;
        let oracle = brute_bleu(&h, &refs);
        nonzero += usize::from(oracle > 0.0);
        max_diff = max_diff.max((ours - oracle).abs());
    }
    let fixture = bleu(&"AABB".chars().collect::<Vec<_>>(), &["ABBC".chars().collect::<Vec<_>>()]).unwrap();
    let expected = (0.75f64 * (2.0 / 3.0)).sqrt();
    let fixture_ok = (fixture.bleu - expected).abs() < BLEU_TOL && format!("{:.5}", fixture.bleu) == "0.70711";
    Line {
        id: 5,
        name: "BLEU oracle equivalence",
        pass: max_diff <= BLEU_TOL && fixture_ok,
        detail: format!(
            "max |diff| {max_diff:.1e} <= {BLEU_TOL:.0e} over {BLEU_CASES} random cases ({nonzero} nonzero); AABB vs ABBC = {:.5}",
            fixture.bleu
        ),
    }
}

fn criterion_adadelta() -> Line {
    let cfg = AdaDeltaConfig::default();
    let mut params = Gradients::new();
    params.insert("x", Tensor::vector(vec![0.0]));
    let mut grads = Gradients::new();
    grads.insert("x", Tensor::vector(vec![1.0]));
    let mut state = AdaDeltaState::new(cfg, &params).unwrap();
    state.step(&mut params, &grads).unwrap();
    let dx = params.get("x").unwrap().data()[0];
    let eg2 = (1.0 - 0.95) * 1.0;
    let expected = -(0.0f64 + 1e-6).sqrt() / (eg2 + 1e-6f64).sqrt() * 1.0;
    let pass = (cfg.rho, cfg.epsilon) == (0.95, 1e-6)
        && (dx - expected).abs() < ADADELTA_TOL
        && (dx - -4.4721e-3).abs() < 5e-8;
    Line {
        id: 6,
        name: "AdaDelta single step",
        pass,
        detail: format!("dx = {dx:.6e}, hand value {expected:.6e}, |diff| {:.1e} < {ADADELTA_TOL:.0e}", (dx - expected).abs()),
    }
}

fn criterion_genre(o: &Overfit, rules: &ProsodyRules) -> Line {
    let mut ok = [0usize; 2];
    for genre in Genre::ALL {
        for i in 0..GENRE_RUNS {
            let (kw, _) = keyword_for(&o.poems, i * 3 + genre.index());
            let mut req = GenRequest::new(&kw, genre);
            req.tone = false;
            req.rhyme = false;
            req.seed = i as u64;
            let g = beam_search_generate(&req, &o.params, &o.vocab, rules).unwrap();
            ok[genre.index()] += usize::from(validate_structure(&g.poem.lines).ok() == Some(genre));
        }
    }
    Line {
        id: 7,
        name: "hybrid genre control",
        pass: ok == [GENRE_RUNS; 2],
        detail: format!(
            "5-char indicator {}/{GENRE_RUNS} give 5x4, 7-char indicator {}/{GENRE_RUNS} give 7x4 (keywords drawn from both genres)",
            ok[0], ok[1]
        ),
    }
}

fn criterion_determinism(o: &Overfit, rules: &ProsodyRules) -> Line {
    let run = || {
        let mut params = ModelParams::new(overfit_config(&o.vocab), 1).unwrap();
        let tc = overfit_train_config(8);
        let mut opt = AdaDeltaState::new(tc.adadelta, &params).unwrap();
        let out = fit(&o.examples, &mut params, &mut opt, &tc, |_, _| Ok(None)).unwrap();
        let bytes = encode_checkpoint(&Checkpoint {
            params,
            vocab: o.vocab.clone(),
            optimizer: Some(opt),
            step: out.steps,
            seed: 1,
        })
        .unwrap();
        (out.losses().iter().map(|l| l.to_bits()).collect::<Vec<_>>(), bytes)
    };
    let (l1, b1) = run();
    let (l2, b2) = run();
    let mut gen_same = 0;
    for i in 0..10 {
        let (kw, genre) = keyword_for(&o.poems, i);
        let mut req = GenRequest::new(&kw, genre);
        req.seed = 3;
        let a = beam_search_generate(&req, &o.params, &o.vocab, rules).unwrap();
        let b = beam_search_generate(&req, &o.params, &o.vocab, rules).unwrap();
        gen_same += usize::from(a.tokens == b.tokens && a.score.to_bits() == b.score.to_bits());
    }
    let pass = l1 == l2 && b1 == b2 && gen_same == 10;
    Line {
        id: 8,
        name: "determinism",
        pass,
        detail: format!(
            "two {}-epoch runs: loss trajectories bit-identical {}, checkpoints byte-identical {}; repeated generations identical {gen_same}/10",
            l1.len(),
            l1 == l2,
            b1 == b2
        ),
    }
}

fn criterion_ablation(rules: &ProsodyRules) -> Line {
    let poems = parse_corpus_str(SAMPLE_CORPUS, "sample", None).poems;
    let config = AblationConfig {
        embed_dim: 16,
        enc_hidden: 16,
        dec_hidden: 32,
        attn_dim: 16,
        epochs: 4,
        batch_size: 4,
        patience: 2,
        validate_every: 2,
        scoring: HeldoutScoring {
            beam_width: 2,
            ..HeldoutScoring::default()
        },
        holdout_every: 5,
        ..AblationConfig::default()
    };
    let start = Instant::now();
    let report = run_ablation(&poems, rules, &config, &Techniques::table_rows()).unwrap();
    let finite = report
        .rows
        .iter()
        .all(|r| r.bleu_five.is_some_and(f64::is_finite) && r.bleu_seven.is_some_and(f64::is_finite));
    let cells: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} {:.3}/{:.3}", r.label, r.bleu_five.unwrap_or(f64::NAN), r.bleu_seven.unwrap_or(f64::NAN)))
        .collect();
    Line {
        id: 9,
        name: "ablation harness (scores not reproduced)",
        pass: finite && report.rows.len() == 5,
        detail: format!(
            "{} rows on {} train / {} held-out poems in {:.0}s, all 5-char/7-char BLEU finite: {}. Full-corpus BLEU targets, human ratings and expert-panel outcomes need the full corpus and human judges; their values carry no tolerance here",
            report.rows.len(),
            report.train_poems,
            report.heldout_poems,
            start.elapsed().as_secs_f64(),
            cells.join("; ")
        ),
    }
}

fn main() -> ExitCode {
    let rules = ProsodyRules::bundled();
    let mut lines = vec![criterion_gradients()];
    report(&lines[0]);
    let o = train_overfit(OVERFIT_EPOCHS);
    for l in [
        criterion_overfit(&o),
        criterion_fidelity(&o, &rules),
        criterion_compliance(&o, &rules),
        criterion_bleu(),
        criterion_adadelta(),
        criterion_genre(&o, &rules),
        criterion_determinism(&o, &rules),
        criterion_ablation(&rules),
    ] {
        report(&l);
        lines.push(l);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("acceptance: {}/{} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn report(l: &Line) {
    println!("{} [{}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.name, l.detail);
}
