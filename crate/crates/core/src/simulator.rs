//! A synthetic typist that drives sessions with Gaussian tap noise.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::PhraseSet;
use crate::decoder::{Decoder, SpatialModel};
use crate::error::{Error, Result};
use crate::geometry::{Keyboard, NormalizedPosition};
use crate::input::{GestureEvent, GestureKind};
use crate::session::{word_slot_center, word_slots, Area, Effect, LogRecord, MetricsReport, Session, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum CorrectionPolicy {
    Never,
    /// Deletes and retries a letter whose key came out wrong, up to `max_retries` times.
    Always { max_retries: u32 },
}

/// Where the typist aims and how much it scatters, per letter key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypistKey {
    pub key_index: usize,
    pub center: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypistModel {
    pub keys: Vec<TypistKey>,
    pub inter_tap_ms: f64,
    pub jitter_ms: f64,
    pub correction: CorrectionPolicy,
    /// How deep into the candidate list the typist looks for its word.
    pub max_candidates_scanned: Option<usize>,
    pub seed: u64,
}

impl TypistModel {
    pub fn from_spatial(sm: &SpatialModel, seed: u64) -> Self {
        TypistModel {
            keys: sm
                .keys()
                .iter()
                .map(|k| TypistKey {
                    key_index: k.key_index,
                    center: k.center,
                    sigma: k.sigma,
                })
                .collect(),
            inter_tap_ms: 400.0,
            jitter_ms: 0.0,
            correction: CorrectionPolicy::Never,
            max_candidates_scanned: None,
            seed,
        }
    }

    /// Aims at the keyboard's key centers with one shared sigma (zero allowed).
    pub fn with_sigma(kb: &Keyboard, sigma: f64, seed: u64) -> Self {
        let keys = (0..kb.n_keys())
            .filter(|&i| kb.is_letter_key(i))
            .map(|i| TypistKey {
                key_index: i,
                center: kb.keys()[i].center,
                sigma,
            })
            .collect();
        TypistModel {
            keys,
            ..TypistModel::from_spatial(&SpatialModel::from_keyboard(kb).expect("keyboard keys are ordered"), seed)
        }
    }

    pub fn validate(&self, kb: &Keyboard) -> Result<()> {
        for k in &self.keys {
            if !(k.sigma >= 0.0) || !k.sigma.is_finite() || !k.center.is_finite() {
                return Err(Error::Input(format!("typist key {}: bad center or sigma", k.key_index)));
            }
        }
        for i in (0..kb.n_keys()).filter(|&i| kb.is_letter_key(i)) {
            if !self.keys.iter().any(|k| k.key_index == i) {
                return Err(Error::Input(format!("typist model has no entry for key {i}")));
            }
        }
        if !(self.inter_tap_ms >= 1.0) || !(self.jitter_ms >= 0.0) || self.jitter_ms >= self.inter_tap_ms {
            return Err(Error::Input("inter-tap timing must satisfy 0 <= jitter < mean, mean >= 1 ms".into()));
        }
        Ok(())
    }

    fn key(&self, key: usize) -> &TypistKey {
        self.keys.iter().find(|k| k.key_index == key).expect("validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyHits {
    pub key: usize,
    pub taps: u64,
    pub hits: u64,
}

impl KeyHits {
    pub fn rate(&self) -> f64 {
        if self.taps == 0 {
            0.0
        } else {
            self.hits as f64 / self.taps as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub metrics: MetricsReport,
    pub hits: Vec<KeyHits>,
    pub log: Vec<LogRecord>,
    pub wrong_word_commits: u64,
    pub forced_failures: u64,
}

struct Typist<'a> {
    model: &'a TypistModel,
    session: Session,
    noise: ChaCha8Rng,
    timing: ChaCha8Rng,
    now: u64,
    hits: Vec<KeyHits>,
    wrong: u64,
    forced: u64,
}

impl Typist<'_> {
    fn tick(&mut self) -> u64 {
        let j = self.model.jitter_ms;
        let dt = if j > 0.0 {
            self.model.inter_tap_ms + self.timing.random_range(-j..=j)
        } else {
            self.model.inter_tap_ms
        };
        self.now += dt.round().max(1.0) as u64;
        self.now
    }

    fn send(&mut self, kind: GestureKind) -> Result<Effect> {
        let foot = if kind.is_command() {
            self.session.config().strategy.strategy.command_foot()
        } else {
            self.session.config().strategy.strategy.navigation_foot()
        };
        self.session.apply_event(&GestureEvent {
            kind,
            foot,
            timestamp: self.now,
        })
    }

    /// Cursor move (if any) and command at the next tick.
    fn command(&mut self, at: Option<NormalizedPosition>, kind: GestureKind) -> Result<Effect> {
        self.tick();
        if let Some(position) = at {
            self.send(GestureKind::CursorMove { position })?;
        }
        self.send(kind)
    }

    fn tap_letter(&mut self, target: usize) -> Result<()> {
        let retries = match self.model.correction {
            CorrectionPolicy::Never => 0,
            CorrectionPolicy::Always { max_retries } => max_retries,
        };
        let tk = *self.model.key(target);
        for attempt in 0..=retries {
            let z: f64 = self.noise.sample(StandardNormal);
            let pos = NormalizedPosition::clamped(tk.center + tk.sigma * z);
            let effect = self.command(Some(pos), GestureKind::ForefootTap)?;
            let landed = self.session.decoder().keyboard().normalized_to_key(pos);
            let slot = self.hits.iter_mut().find(|h| h.key == target).expect("letter key");
            slot.taps += 1;
            slot.hits += u64::from(landed == target);
            let ok = effect == Effect::KeyAdded { key: target };
            if ok || attempt == retries {
                return Ok(());
            }
            if matches!(effect, Effect::KeyAdded { .. }) {
                self.command(None, GestureKind::RearfootTap)?;
            }
        }
        Ok(())
    }

    fn type_word(&mut self, word: &str) -> Result<()> {
        if self.session.state().area == Area::WordArea {
            self.command(None, GestureKind::FlatBackward)?;
        }
        for c in word.chars() {
            let key = self.session.decoder().keyboard().letter_to_key(c)?;
            self.tap_letter(key)?;
        }
        let entered = self.command(None, GestureKind::FlatForward)?;
        if matches!(entered, Effect::Rejected { .. }) {
            self.forced += 1;
            return Ok(());
        }
        let state = self.session.state();
        let list = state.candidates.clone().unwrap_or_else(|| crate::decoder::CandidateList::empty(1));
        if list.is_empty() {
            self.forced += 1;
            let n = state.pending.len();
            self.command(None, GestureKind::FlatBackward)?;
            for _ in 0..n {
                self.command(None, GestureKind::RearfootTap)?;
            }
            return Ok(());
        }
        let scan = self.model.max_candidates_scanned.unwrap_or(usize::MAX);
        let idx = list.candidates.iter().take(scan).position(|c| c.word == word);
        if idx.is_none() {
            self.wrong += 1;
        }
        let idx = idx.unwrap_or(0);
        let page_size = self.session.decoder().page_size();
        for _ in 0..idx / page_size {
            let next = word_slot_center(word_slots(page_size) - 1, page_size);
            self.command(Some(next), GestureKind::ForefootTap)?;
        }
        let slot = word_slot_center(idx % page_size + 1, page_size);
        self.command(Some(slot), GestureKind::ForefootTap)?;
        Ok(())
    }
}

fn phrase_rngs(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    let mut timing = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(1);
    timing.set_stream(2);
    (noise, timing)
}

/// Types every phrase of `phrases` in order through a fresh session.
pub fn simulate_session(
    model: &TypistModel,
    decoder: Arc<Decoder>,
    phrases: &PhraseSet,
    cfg: SessionConfig,
) -> Result<SimulationResult> {
    model.validate(decoder.keyboard())?;
    let kb = decoder.keyboard().clone();
    let (noise, timing) = phrase_rngs(model.seed);
    let mut t = Typist {
        model,
        session: Session::new(cfg, decoder, phrases.clone())?,
        noise,
        timing,
        now: 0,
        hits: (0..kb.n_keys())
            .filter(|&i| kb.is_letter_key(i))
            .map(|key| KeyHits { key, taps: 0, hits: 0 })
            .collect(),
        wrong: 0,
        forced: 0,
    };
    for phrase in phrases.phrases() {
        for word in phrase.split(' ') {
            t.type_word(word)?;
        }
        let now = t.tick();
        t.session.advance_phrase(now)?;
    }
    Ok(SimulationResult {
        metrics: t.session.metrics()?,
        hits: t.hits,
        log: t.session.log().to_vec(),
        wrong_word_commits: t.wrong,
        forced_failures: t.forced,
    })
}

/// Event log of a single phrase.
pub fn simulate_phrase(model: &TypistModel, decoder: Arc<Decoder>, phrase: &str, cfg: SessionConfig) -> Result<Vec<LogRecord>> {
    let set = PhraseSet::new(&[phrase])?;
    Ok(simulate_session(model, decoder, &set, cfg)?.log)
}

/// Fraction of `n` taps aimed at `key`'s center with spread `sigma` that
/// land on that key.
pub fn key_hit_rate(kb: &Keyboard, key: usize, sigma: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = kb.keys()[key].center;
    let hits = (0..n)
        .filter(|_| {
            let z: f64 = rng.sample(StandardNormal);
            kb.normalized_to_key(NormalizedPosition::clamped(c + sigma * z)) == key
        })
        .count();
    hits as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    /// Mean with a normal-approximation 95% band.
    pub fn of(xs: &[f64]) -> Band {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * sd / n.sqrt();
        Band {
            mean,
            sd,
            lo: mean - half,
            hi: mean + half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareEntry {
    pub label: String,
    pub wpm: Band,
    pub ter: Band,
    pub ncer: Band,
    pub wrong_word_commits: u64,
    pub forced_failures: u64,
    pub runs: Vec<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct Contender {
    pub label: String,
    pub model: TypistModel,
    pub decoder: Arc<Decoder>,
    pub config: SessionConfig,
}

/// `n` phrases picked without replacement, in draw order.
pub fn draw_phrases(phrases: &PhraseSet, n: usize, seed: u64) -> Result<PhraseSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<&String> = phrases.phrases().choose_multiple(&mut rng, n.min(phrases.len())).collect();
    PhraseSet::new(&picked)
}

/// Runs every contender on the same seeded phrase draws. Seed `s` picks
/// `n_phrases` phrases and replaces each model's own seed.
pub fn monte_carlo_compare(
    contenders: &[Contender],
    phrases: &PhraseSet,
    n_phrases: usize,
    seeds: &[u64],
) -> Result<Vec<CompareEntry>> {
    if n_phrases == 0 {
        return Err(Error::Input("n_phrases must be at least 1".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Input("at least one seed is required".into()));
    }
    let draws: Vec<PhraseSet> = seeds
        .iter()
        .map(|&s| draw_phrases(phrases, n_phrases, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..contenders.len())
        .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
        .collect();
    let results: Vec<SimulationResult> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let ct = &contenders[c];
            let model = TypistModel {
                seed: seeds[s],
                ..ct.model.clone()
            };
            simulate_session(&model, ct.decoder.clone(), &draws[s], ct.config)
        })
        .collect::<Result<_>>()?;
    Ok(contenders
        .iter()
        .enumerate()
        .map(|(c, ct)| {
            let mine = &results[c * seeds.len()..(c + 1) * seeds.len()];
            let pick = |f: fn(&MetricsReport) -> f64| Band::of(&mine.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
            CompareEntry {
                label: ct.label.clone(),
                wpm: pick(|m| m.wpm),
                ter: pick(|m| m.ter),
                ncer: pick(|m| m.ncer),
                wrong_word_commits: mine.iter().map(|r| r.wrong_word_commits).sum(),
                forced_failures: mine.iter().map(|r| r.forced_failures).sum(),
                runs: mine.iter().map(|r| r.metrics.clone()).collect(),
            }
        })
        .collect())
}

pub fn compare_table(entries: &[CompareEntry]) -> String {
    let mut out = String::from("label\twpm\twpm_lo\twpm_hi\tter\tter_lo\tter_hi\tncer\twrong_words\tforced_failures\n");
    for e in entries {
        out.push_str(&format!(
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.5}\t{:.5}\t{:.5}\t{:.5}\t{}\t{}\n",
            e.label, e.wpm.mean, e.wpm.lo, e.wpm.hi, e.ter.mean, e.ter.lo, e.ter.hi, e.ncer.mean, e.wrong_word_commits, e.forced_failures
        ));
    }
    out
}
