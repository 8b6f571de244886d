//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p ankle-keys --test acceptance`.

mod common;

use std::collections::HashSet;
use std::fs;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ankle_keys::corpus::{Lexicon, PhraseSet};
use ankle_keys::decoder::{Decoder, SpatialModel, SIGMA_FLOOR};
use ankle_keys::geometry::{Keyboard, NormalizedPosition, Posture};
use ankle_keys::input::{Foot, GestureEvent, GestureKind};
use ankle_keys::layout::disambiguation::DisambiguationScorer;
use ankle_keys::layout::enumerate::{layout_count, rank, LayoutEnumerator};
use ankle_keys::layout::gmm::{fit_gmm_1d, GmmParams};
use ankle_keys::layout::sweep::{run_sweep, SweepConfig, SweepControl};
use ankle_keys::service::{Body, Client, ClockPayload, HelloRequest, Message, MetricsRequest, Registry, Server};
use ankle_keys::session::{compute_metrics, log_to_string, Effect, LogRecord, Session, SessionConfig};
use ankle_keys::simulator::{key_hit_rate, monte_carlo_compare, Contender, TypistModel};
use rand::seq::IndexedRandom;
use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use statrs::distribution::{Continuous, Normal as StatNormal};
use statrs::function::erf::erf;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn choose(n: u64, k: u64) -> u64 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128) as u64
}

fn partition_counts() -> Outcome {
    let start = Instant::now();
    let out = Command::new(common::bin())
        .args(["enumerate", "--k-min", "5", "--k-max", "13", "--count-only"])
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let printed = String::from_utf8_lossy(&out.stdout).trim().to_string();
    let total_ok = out.status.success() && printed == "16774590";
    let per_k_ok = (5..=13).all(|k| layout_count(k).unwrap() == choose(25, k as u64 - 1));
    let mut exhaustive_ok = true;
    for k in 1..=6 {
        let mut seen = HashSet::new();
        let mut n = 0u64;
        for (j, ll) in LayoutEnumerator::new(k).unwrap().enumerate() {
            let cuts = ll.cuts();
            let groups = ll.groups();
            let contiguous = groups.concat() == "abcdefghijklmnopqrstuvwxyz" && groups.iter().all(|g| !g.is_empty());
            exhaustive_ok &= contiguous && groups.len() == k && rank(&cuts) == j as u64 && seen.insert(cuts);
            n += 1;
        }
        exhaustive_ok &= n == choose(25, k as u64 - 1);
    }
    outcome(
        total_ok && per_k_ok && exhaustive_ok && elapsed < Duration::from_secs(1),
        format!(
            "printed {printed}, per-k C(25,k-1) {per_k_ok}, exhaustive k<=6 {exhaustive_ok}, {:.3}s (< 1 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn disambiguation_oracle() -> Outcome {
    let lex = common::lexicon(200);
    let cfg = SweepConfig {
        k_min: 5,
        k_max: 5,
        per_k: 12_650,
        workers: 1,
        ..SweepConfig::default()
    };
    let start = Instant::now();
    let set = run_sweep(&cfg, &lex, &SweepControl { checkpoint: None, resume: false, max_blocks: None })
        .unwrap()
        .unwrap();
    let elapsed = start.elapsed();
    let mut mismatches = 0;
    for c in set.iter() {
        let kb = Keyboard::uniform(Posture::Standing, c.layout.clone()).unwrap();
        let dec = Decoder::from_keyboard(kb, lex.clone()).unwrap();
        let literal = lex
            .entries()
            .iter()
            .filter(|e| {
                let list = dec.exact(&dec.keyboard().signature(&e.word).unwrap(), 3).unwrap();
                list.words().contains(&e.word.as_str())
            })
            .count() as u32;
        if literal != c.successes {
            mismatches += 1;
        }
    }
    outcome(
        set.len() == 12_650 && mismatches == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{} layouts, {mismatches} mismatches, streaming {:.2}s (< 60 s)",
            set.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn refinement_monotonicity() -> Outcome {
    let lex = common::lexicon(200);
    let mut scorer = DisambiguationScorer::new(&lex, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut decreases = 0;
    for _ in 0..1000 {
        let k = rng.random_range(5..=12);
        let j = rng.random_range(0..layout_count(k).unwrap());
        let ll = LayoutEnumerator::with_range(k, j..j + 1).unwrap().next().unwrap();
        let splittable: Vec<usize> = (0..ll.n_groups()).filter(|&g| ll.groups()[g].len() > 1).collect();
        let g = *splittable.choose(&mut rng).unwrap();
        let at = rng.random_range(1..ll.groups()[g].len());
        let finer = ll.split_group(g, at).unwrap();
        if scorer.score(&finer).successes < scorer.score(&ll).successes {
            decreases += 1;
        }
    }
    outcome(decreases == 0, format!("1000 splits, {decreases} decreases"))
}

fn gmm_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_drop = 0.0f64;
    for d in 0..100 {
        let n_true = rng.random_range(1..=5);
        let centers: Vec<f64> = (0..n_true).map(|_| rng.random_range(0.05..0.95)).collect();
        let n = rng.random_range(200..800);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let c = centers[rng.random_range(0..n_true)];
                Normal::new(c, rng.random_range(0.01..0.1)).unwrap().sample(&mut rng)
            })
            .collect();
        let comps = rng.random_range(2..=6);
        let params = GmmParams { seed: d, n_init: 1, ..GmmParams::default() };
        let m = fit_gmm_1d(&xs, comps, &params).unwrap();
        for w in m.trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    let monotone = worst_drop <= 1e-9;

    let errors: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
            let sigma = 0.02;
            let means: Vec<f64> = (0..9).map(|i| 0.1 + 0.1 * i as f64).collect();
            let xs: Vec<f64> = (0..5000)
                .map(|i| Normal::new(means[i % 9], sigma).unwrap().sample(&mut rng))
                .collect();
            let m = fit_gmm_1d(&xs, 9, &GmmParams { seed: run, ..GmmParams::default() }).unwrap();
            m.components
                .iter()
                .zip(&means)
                .map(|(c, mu)| (c.mean - mu).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let recovered = errors.iter().filter(|&&e| e <= 0.01).count();
    let worst_err = errors.iter().copied().fold(0.0, f64::max);
    outcome(
        monotone && recovered >= 95,
        format!(
            "largest log-likelihood drop {worst_drop:.2e} (<= 1e-9), planted means recovered in {recovered}/100 (>= 95), worst mean error {worst_err:.4}"
        ),
    )
}

fn synthetic_pipeline() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sig = Uniform::new(0.070, 0.169).unwrap();
    let mut csv = String::from("participant,posture,letter,normalized_position\n");
    let mut samples = vec![Vec::new(), Vec::new()];
    for (pi, posture) in Posture::ALL.iter().enumerate() {
        // targets in order a..m, space, n..z across the span
        let targets: Vec<(String, f64, f64)> = (0..27)
            .map(|t| {
                let label = match t {
                    13 => "space".to_string(),
                    t if t < 13 => ((b'a' + t as u8) as char).to_string(),
                    t => ((b'a' + t as u8 - 1) as char).to_string(),
                };
                (label, 0.03 + t as f64 * 0.94 / 26.0, sig.sample(&mut rng))
            })
            .collect();
        for part in 0..10 {
            for (label, mu, s) in &targets {
                let reps = if label == "space" { 30 } else { 6 };
                for _ in 0..reps {
                    let x: f64 = Normal::new(*mu, *s).unwrap().sample(&mut rng).clamp(0.0, 1.0);
                    samples[pi].push(x);
                    csv.push_str(&format!("p{part},{posture},{label},{x}\n"));
                }
            }
        }
    }
    fs::write(p("taps.csv"), csv).unwrap();
    let lex = common::lexicon_path();
    let lex = lex.to_str().unwrap();
    let run = |args: &[&str]| {
        let out = Command::new(common::bin()).args(args).output().unwrap();
        if !out.status.success() {
            eprintln!("{}", String::from_utf8_lossy(&out.stderr));
        }
        out.status.success()
    };
    let steps = [
        run(&["disambiguate", "--lexicon", lex, "--lexicon-top", "200", "--k-min", "7", "--k-max", "9", "--per-k", "20", "--workers", "4", "--out", &p("cands.tsv")]),
        run(&["cluster", "--taps", &p("taps.csv"), "--n-min", "6", "--n-max", "14", "--seed", "3", "--out", &p("clusters.toml")]),
        run(&["score", "--candidates", &p("cands.tsv"), "--clusters", &p("clusters.toml"), "--taps", &p("taps.csv"), "--lexicon", lex, "--out", &p("scores.tsv")]),
        run(&["select", "--scores", &p("scores.tsv"), "--candidates", &p("cands.tsv"), "--clusters", &p("clusters.toml"), "--keys", "9", "--out-dir", &p("kb")]),
    ];
    if !steps.iter().all(|&s| s) {
        return outcome(false, format!("pipeline step status {steps:?}"));
    }
    let mut detail = Vec::new();
    let mut pass = true;
    for (pi, name) in ["keyboard-standing.toml", "keyboard-sitting.toml"].iter().enumerate() {
        let kb = Keyboard::from_toml_str(&fs::read_to_string(dir.path().join("kb").join(name)).unwrap()).unwrap();
        let mut counts = vec![0usize; kb.n_keys()];
        for &x in &samples[pi] {
            counts[kb.normalized_to_key(NormalizedPosition::new(x).unwrap())] += 1;
        }
        let densest = (0..counts.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
        let ok = kb.n_keys() == 9 && kb.letter_layout().n_groups() == 8 && kb.space_key_index() == densest;
        pass &= ok;
        detail.push(format!(
            "{}: {} keys, {} letter keys, space key {} densest {}",
            kb.posture(),
            kb.n_keys(),
            kb.letter_layout().n_groups(),
            kb.space_key_index(),
            densest
        ));
    }
    outcome(pass, detail.join("; "))
}

fn decoder_oracle() -> Outcome {
    let lex = common::lexicon(50);
    let kb = common::pad_keyboard(Posture::Standing);
    let sm = SpatialModel::from_keyboard(&kb).unwrap().with_sigma(0.06).unwrap();
    let dec = Decoder::new(kb.clone(), sm.clone(), lex.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rel = 0.0f64;
    let mut order_ok = true;
    for _ in 0..200 {
        let len = rng.random_range(1..=5);
        let xs: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1.0)).collect();
        let pos: Vec<NormalizedPosition> = xs.iter().map(|&x| NormalizedPosition::new(x).unwrap()).collect();
        let got = dec.bayes(&pos, 100).unwrap();
        let mut brute: Vec<(usize, f64)> = lex
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.word.len() == len)
            .map(|(r, e)| {
                let ll: f64 = e
                    .word
                    .chars()
                    .zip(&xs)
                    .map(|(c, &x)| {
                        let g = sm.get(kb.letter_to_key(c).unwrap()).unwrap();
                        StatNormal::new(g.center, g.sigma).unwrap().ln_pdf(x)
                    })
                    .sum();
                (r, e.frequency.ln() + ll)
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let max = brute.first().map_or(0.0, |b| b.1);
        let z: f64 = brute.iter().map(|b| (b.1 - max).exp()).sum();
        order_ok &= got.len() == brute.len();
        for (c, (r, s)) in got.candidates.iter().zip(&brute) {
            order_ok &= c.word == lex.entries()[*r].word;
            let p = (s - max).exp() / z;
            worst_rel = worst_rel.max(((c.score - p) / p).abs());
        }
    }

    let mut invariant = 0;
    for case in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + case);
        let scale = 10f64.powf(rng.random_range(-6.0..6.0));
        let scaled = Lexicon::from_pairs(lex.entries().iter().map(|e| (e.word.as_str(), e.frequency * scale))).unwrap();
        let dec2 = Decoder::new(kb.clone(), sm.clone(), scaled).unwrap();
        let len = rng.random_range(1..=4);
        let pos: Vec<NormalizedPosition> = (0..len).map(|_| NormalizedPosition::new(rng.random_range(0.0..1.0)).unwrap()).collect();
        if dec.bayes(&pos, 100).unwrap().words() == dec2.bayes(&pos, 100).unwrap().words() {
            invariant += 1;
        }
    }

    let sharp = Decoder::new(kb.clone(), sm.with_sigma(SIGMA_FLOOR).unwrap(), lex.clone()).unwrap();
    let mut limit_ok = 0;
    for e in lex.entries() {
        let sig = kb.signature(&e.word).unwrap();
        let exact = sharp.exact(&sig, 100).unwrap();
        let centers: Vec<NormalizedPosition> = sig.iter().map(|&k| NormalizedPosition::new(kb.keys()[k].center).unwrap()).collect();
        let bayes = sharp.bayes(&centers, 100).unwrap();
        if bayes.words()[..exact.len()] == exact.words()[..] {
            limit_ok += 1;
        }
    }
    outcome(
        worst_rel <= 1e-9 && order_ok && invariant == 100 && limit_ok == lex.len(),
        format!(
            "max relative score error {worst_rel:.2e} (<= 1e-9), order matches {order_ok}, scale invariance {invariant}/100, sigma->0 agreement {limit_ok}/{}",
            lex.len()
        ),
    )
}

fn metrics_fixtures() -> Outcome {
    let tap = |seq, t| LogRecord::Gesture {
        seq,
        phrase: 0,
        event: GestureEvent { kind: GestureKind::ForefootTap, foot: Foot::Right, timestamp: t },
        effect: Effect::None,
        digest: String::new(),
    };
    let done = |seq, p: &str, t: &str| LogRecord::PhraseComplete {
        seq,
        phrase: 0,
        timestamp: 0,
        presented: p.into(),
        transcribed: t.into(),
        digest: String::new(),
    };
    let wpm = compute_metrics(&[tap(1, 1000), tap(2, 13_000), done(3, "hello world", "hello world")], None)
        .unwrap()
        .wpm;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.log");
    fs::write(&path, log_to_string(&[done(1, "the", "thw")])).unwrap();
    let out = Command::new(common::bin()).arg("metrics").arg("--log").arg(&path).output().unwrap();
    let printed = String::from_utf8_lossy(&out.stdout);
    let ter_line = printed.lines().find(|l| l.starts_with("TER")).unwrap_or("").to_string();
    let zero = compute_metrics(&[done(1, "the cat", "the cat")], None).unwrap();
    outcome(
        wpm == 10.0 && ter_line == "TER 33.33%" && zero.ter == 0.0 && zero.ncer == 0.0,
        format!("WPM {wpm}, {ter_line}, zero fixture TER {} NCER {}", zero.ter, zero.ncer),
    )
}

fn simulator_calibration() -> Outcome {
    let kb = common::pad_keyboard(Posture::Standing);
    let center = kb.n_keys() / 2;
    let half = 0.5 / kb.n_keys() as f64;
    let expected = erf(half / (0.07 * 2f64.sqrt()));
    let rate = key_hit_rate(&kb, center, 0.07, 10_000, 42);

    let lex = common::lexicon(400);
    let dec = Arc::new(Decoder::from_keyboard(kb.clone(), lex).unwrap());
    let grid = [0.02, 0.05, 0.08, 0.12];
    let contenders: Vec<Contender> = grid
        .iter()
        .map(|&s| Contender {
            label: format!("sigma={s}"),
            model: TypistModel::with_sigma(&kb, s, 0),
            decoder: dec.clone(),
            config: SessionConfig::default(),
        })
        .collect();
    let seeds: Vec<u64> = (1..=8).collect();
    let report = monte_carlo_compare(&contenders, &common::phrases(), 10, &seeds).unwrap();
    let ters: Vec<f64> = report.iter().map(|e| e.ter.mean).collect();
    let monotone = ters.windows(2).all(|w| w[0] <= w[1]);
    outcome(
        (rate - expected).abs() <= 0.02 && monotone,
        format!(
            "hit rate {rate:.4} vs closed form {expected:.4} (+/- 0.02); TER over sigma {grid:?}: {}",
            ters.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn scripted_agent() -> Outcome {
    let kb = common::pad_keyboard(Posture::Standing);
    let dec = Arc::new(Decoder::from_keyboard(kb, common::lexicon(400)).unwrap());
    let phrases = common::phrases();
    let mut session = Session::new(SessionConfig::default(), dec.clone(), phrases.clone()).unwrap();
    let dt = 350;
    let mut expected = Vec::new();
    let mut t0 = 5_000;
    for phrase in phrases.phrases() {
        let mut script = common::Script::new(t0, dt);
        let commands = script.phrase(&dec, phrase);
        for ev in &script.events {
            session.apply_event(ev).unwrap();
        }
        session.advance_phrase(script.next_t).unwrap();
        expected.push(common::analytic_wpm(phrase, commands, dt));
        t0 = script.next_t + 2_000;
    }
    let m = session.metrics().unwrap();
    let worst = m
        .phrases
        .iter()
        .zip(&expected)
        .map(|(p, e)| ((p.wpm - e) / e).abs())
        .fold(0.0, f64::max);
    let mean_expected = expected.iter().sum::<f64>() / expected.len() as f64;
    outcome(
        m.ter == 0.0 && worst <= 0.01,
        format!(
            "TER {}, WPM {:.3} vs analytic {:.3}, worst per-phrase deviation {:.4}% (<= 1%)",
            m.ter,
            m.wpm,
            mean_expected,
            100.0 * worst
        ),
    )
}

fn service_equivalence() -> Outcome {
    let kb = common::pad_keyboard(Posture::Standing);
    let dec = Arc::new(Decoder::from_keyboard(kb.clone(), common::lexicon(400)).unwrap());
    let texts: Vec<String> = common::phrases().phrases()[..5].to_vec();
    let phrases = PhraseSet::new(&texts).unwrap();
    let mut scripts = Vec::new();
    let mut t0 = 1_000;
    for (i, text) in texts.iter().enumerate() {
        let mut s = common::Script::new(t0, 300);
        if i == 2 {
            // a slip that gets corrected
            s.letter(&kb, 'z');
            s.delete();
        }
        s.phrase(&dec, text);
        t0 = s.next_t + 1_500;
        scripts.push(s);
    }

    let mut direct = Session::new(SessionConfig::default(), dec.clone(), phrases.clone()).unwrap();
    for s in &scripts {
        for ev in &s.events {
            direct.apply_event(ev).unwrap();
        }
        direct.advance_phrase(s.next_t).unwrap();
    }
    let direct_log = log_to_string(direct.log());
    let direct_metrics = serde_json::to_string(&direct.metrics().unwrap()).unwrap();

    let server = Server::bind("127.0.0.1:0", Registry::new(dec, phrases, SessionConfig::default())).unwrap();
    let addr = server.local_addr().unwrap();
    server.spawn();
    let mut client = Client::connect(addr).unwrap();
    let ack = client
        .request(&Message::new(None, Body::Hello(HelloRequest { phrases: Some(texts.clone()), ..Default::default() })))
        .unwrap();
    let Body::HelloAck(ack) = ack.body else {
        return outcome(false, "no hello ack");
    };
    let sid = Some(ack.session_id);
    let mut last_seq = 0;
    let mut monotone = true;
    for s in &scripts {
        let msgs = s
            .events
            .iter()
            .map(|ev| Body::EmulatedGesture(*ev))
            .chain([Body::PhraseAdvance(ClockPayload { now: s.next_t })]);
        for body in msgs {
            match client.request(&Message::new(sid.clone(), body)).unwrap().body {
                Body::StateSnapshot(snap) => {
                    monotone &= snap.seq > last_seq;
                    last_seq = snap.seq;
                }
                other => return outcome(false, format!("unexpected reply {other:?}")),
            }
        }
    }
    let reply = client
        .request(&Message::new(sid, Body::Metrics(MetricsRequest { close: true, include_log: true })))
        .unwrap();
    let Body::MetricsReply(r) = reply.body else {
        return outcome(false, "no metrics reply");
    };
    let wire_log = r.log.unwrap_or_default();
    let wire_metrics = serde_json::to_string(&r.report.unwrap()).unwrap();
    let same_log = wire_log == direct_log;
    let same_metrics = wire_metrics == direct_metrics;
    outcome(
        same_log && same_metrics && monotone,
        format!(
            "5 phrases, {} log bytes, log identical {same_log}, metrics identical {same_metrics}, snapshot seq increasing {monotone}",
            direct_log.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("partition count", partition_counts),
        ("disambiguation oracle equivalence", disambiguation_oracle),
        ("refinement monotonicity", refinement_monotonicity),
        ("GMM correctness", gmm_correctness),
        ("synthetic tap pipeline", synthetic_pipeline),
        ("decoder oracle", decoder_oracle),
        ("metrics fixtures", metrics_fixtures),
        ("simulator calibration", simulator_calibration),
        ("scripted error-free agent", scripted_agent),
        ("service/library equivalence", service_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
