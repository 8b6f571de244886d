//! Transcription sessions: typing state, cheat sheet and the event log.

pub mod metrics;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PhraseSet;
use crate::decoder::{CandidateList, Decoder, KeySequence};
use crate::error::{Error, Result};
use crate::geometry::{CalibrationProfile, NormalizedPosition};
use crate::input::{GestureEngine, GestureEvent, GestureKind, SensorFrame, StrategyConfig};

pub use metrics::{compute_metrics, MetricsReport, PhraseMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Visual,
    Blind,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "visual" => Ok(Mode::Visual),
            "blind" => Ok(Mode::Blind),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Visual => "visual",
            Mode::Blind => "blind",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Exact,
    Bayes,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(DecodeMode::Exact),
            "bayes" => Ok(DecodeMode::Bayes),
            _ => Err(Error::Config(format!("unknown decode mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Area {
    LetterArea,
    WordArea,
}

pub const CHEAT_SHEET_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub mode: Mode,
    pub strategy: StrategyConfig,
    pub decode_mode: DecodeMode,
    pub max_candidates: usize,
    pub cheat_sheet_duration_ms: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: Mode::Visual,
            strategy: StrategyConfig::default(),
            decode_mode: DecodeMode::Exact,
            max_candidates: 50,
            cheat_sheet_duration_ms: CHEAT_SHEET_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingTap {
    pub key: usize,
    pub position: NormalizedPosition,
}

/// Live typing state of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypingState {
    pub area: Area,
    pub cursor: Option<NormalizedPosition>,
    pub pending: Vec<PendingTap>,
    pub candidates: Option<CandidateList>,
    pub candidate_page: usize,
    /// Word-area slot under the cursor: 0 = previous page, last = next page.
    pub selected_slot: Option<usize>,
    pub committed: Vec<String>,
    pub phrase_index: usize,
    pub first_input_ms: Option<u64>,
    pub last_input_ms: Option<u64>,
    pub cheat_sheet_requests: u32,
    pub cheat_sheet_until: Option<u64>,
}

impl Default for TypingState {
    fn default() -> Self {
        TypingState {
            area: Area::LetterArea,
            cursor: None,
            pending: Vec::new(),
            candidates: None,
            candidate_page: 0,
            selected_slot: None,
            committed: Vec::new(),
            phrase_index: 0,
            first_input_ms: None,
            last_input_ms: None,
            cheat_sheet_requests: 0,
            cheat_sheet_until: None,
        }
    }
}

impl TypingState {
    pub fn pending_keys(&self) -> Vec<usize> {
        self.pending.iter().map(|p| p.key).collect()
    }

    /// Committed words separated by single spaces, without the trailing
    /// implicit space.
    pub fn transcribed(&self) -> String {
        self.committed.join(" ")
    }

    pub fn current_page(&self) -> Vec<String> {
        self.candidates
            .as_ref()
            .map(|c| c.page(self.candidate_page).iter().map(|c| c.word.clone()).collect())
            .unwrap_or_default()
    }

    pub fn cheat_sheet_visible(&self, now: u64) -> bool {
        self.cheat_sheet_until.is_some_and(|t| now < t)
    }

    pub fn cheat_sheet_remaining_ms(&self, now: u64) -> u64 {
        self.cheat_sheet_until.map_or(0, |t| t.saturating_sub(now))
    }

    /// Short hex digest of the canonical serialized state.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        let hash = Sha256::digest(&json);
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Number of word-area slots: one candidate per page entry plus two pagers.
pub fn word_slots(page_size: usize) -> usize {
    page_size + 2
}

pub fn word_slot_at(pos: NormalizedPosition, page_size: usize) -> usize {
    let n = word_slots(page_size);
    ((pos.value() * n as f64) as usize).min(n - 1)
}

/// Cursor position at the middle of a word-area slot.
pub fn word_slot_center(slot: usize, page_size: usize) -> NormalizedPosition {
    NormalizedPosition::clamped((slot as f64 + 0.5) / word_slots(page_size) as f64)
}

/// What a gesture did to the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    None,
    CursorMoved,
    KeyAdded { key: usize },
    KeyRemoved { key: usize },
    EnteredWordArea { candidates: usize },
    ReturnedToLetterArea,
    PageChanged { page: usize },
    Committed { word: String },
    WordDeleted { word: String },
    Rejected { reason: String },
}

/// Pure state transition for one gesture.
pub fn apply_event(state: &TypingState, ev: &GestureEvent, decoder: &Decoder, cfg: &SessionConfig) -> (TypingState, Effect) {
    let mut s = state.clone();
    let page_size = decoder.page_size();
    if ev.kind.is_command() {
        s.first_input_ms.get_or_insert(ev.timestamp);
        s.last_input_ms = Some(ev.timestamp);
    }
    let reject = |s: TypingState, why: &str| (s, Effect::Rejected { reason: why.to_string() });
    match (s.area, ev.kind) {
        (_, GestureKind::CursorMove { position }) => {
            s.cursor = Some(position);
            if s.area == Area::WordArea {
                s.selected_slot = Some(word_slot_at(position, page_size));
            }
            (s, Effect::CursorMoved)
        }
        (Area::LetterArea, GestureKind::ForefootTap) => {
            let Some(position) = s.cursor else {
                return reject(s, "cursor position unknown");
            };
            let key = decoder.keyboard().normalized_to_key(position);
            if !decoder.keyboard().is_letter_key(key) {
                return reject(s, "space key has no letters");
            }
            s.pending.push(PendingTap { key, position });
            (s, Effect::KeyAdded { key })
        }
        (Area::LetterArea, GestureKind::RearfootTap) => match s.pending.pop() {
            Some(p) => (s, Effect::KeyRemoved { key: p.key }),
            None => (s, Effect::None),
        },
        (Area::LetterArea, GestureKind::FlatForward) => {
            if s.pending.is_empty() {
                return reject(s, "no keys to decode");
            }
            let seq = match cfg.decode_mode {
                DecodeMode::Exact => KeySequence::Keys(s.pending_keys()),
                DecodeMode::Bayes => KeySequence::Positions(s.pending.iter().map(|p| p.position).collect()),
            };
            let list = decoder
                .decode(&seq, cfg.max_candidates)
                .expect("pending keys are valid letter keys");
            let n = list.len();
            s.candidates = Some(list);
            s.candidate_page = 0;
            s.area = Area::WordArea;
            s.selected_slot = s.cursor.map(|p| word_slot_at(p, page_size));
            (s, Effect::EnteredWordArea { candidates: n })
        }
        (Area::LetterArea, GestureKind::FlatBackward) => (s, Effect::None),
        (Area::WordArea, GestureKind::ForefootTap) => {
            let Some(slot) = s.selected_slot else {
                return reject(s, "no word slot selected");
            };
            let n_pages = s.candidates.as_ref().map_or(0, |c| c.n_pages());
            if slot == 0 {
                if s.candidate_page == 0 {
                    return reject(s, "already on the first page");
                }
                s.candidate_page -= 1;
                let page = s.candidate_page;
                return (s, Effect::PageChanged { page });
            }
            if slot == word_slots(page_size) - 1 {
                if s.candidate_page + 1 >= n_pages {
                    return reject(s, "already on the last page");
                }
                s.candidate_page += 1;
                let page = s.candidate_page;
                return (s, Effect::PageChanged { page });
            }
            let word = s
                .candidates
                .as_ref()
                .and_then(|c| c.page(s.candidate_page).get(slot - 1))
                .map(|c| c.word.clone());
            let Some(word) = word else {
                return reject(s, "no candidate in this slot");
            };
            s.committed.push(word.clone());
            s.pending.clear();
            s.candidates = None;
            s.candidate_page = 0;
            (s, Effect::Committed { word })
        }
        (Area::WordArea, GestureKind::RearfootTap) => match s.committed.pop() {
            Some(word) => (s, Effect::WordDeleted { word }),
            None => (s, Effect::None),
        },
        (Area::WordArea, GestureKind::FlatBackward) => {
            s.area = Area::LetterArea;
            s.candidates = None;
            s.candidate_page = 0;
            s.selected_slot = None;
            (s, Effect::ReturnedToLetterArea)
        }
        (Area::WordArea, GestureKind::FlatForward) => (s, Effect::None),
    }
}

/// One line of the session event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Gesture {
        seq: u64,
        phrase: usize,
        event: GestureEvent,
        #[serde(flatten)]
        effect: Effect,
        digest: String,
    },
    CheatSheet {
        seq: u64,
        phrase: usize,
        timestamp: u64,
        visible_until: u64,
        digest: String,
    },
    PageSelect {
        seq: u64,
        phrase: usize,
        timestamp: u64,
        page: usize,
        digest: String,
    },
    PhraseComplete {
        seq: u64,
        phrase: usize,
        timestamp: u64,
        presented: String,
        transcribed: String,
        digest: String,
    },
}

impl LogRecord {
    pub fn seq(&self) -> u64 {
        match self {
            LogRecord::Gesture { seq, .. }
            | LogRecord::CheatSheet { seq, .. }
            | LogRecord::PageSelect { seq, .. }
            | LogRecord::PhraseComplete { seq, .. } => *seq,
        }
    }
}

pub fn write_log<W: Write>(mut w: W, log: &[LogRecord]) -> Result<()> {
    for r in log {
        writeln!(w, "{}", serde_json::to_string(r).expect("log records serialize"))?;
    }
    Ok(())
}

pub fn log_to_string(log: &[LogRecord]) -> String {
    let mut buf = Vec::new();
    write_log(&mut buf, log).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a log; blank and `#` header lines are skipped.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(t).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// A running transcription session over a phrase set.
#[derive(Debug, Clone)]
pub struct Session {
    cfg: SessionConfig,
    decoder: Arc<Decoder>,
    phrases: PhraseSet,
    state: TypingState,
    log: Vec<LogRecord>,
    engine: Option<GestureEngine>,
    seq: u64,
}

impl Session {
    pub fn new(cfg: SessionConfig, decoder: Arc<Decoder>, phrases: PhraseSet) -> Result<Self> {
        cfg.strategy.validate()?;
        if phrases.is_empty() {
            return Err(Error::Input("session needs at least one phrase".into()));
        }
        if cfg.max_candidates == 0 {
            return Err(Error::Config("max_candidates must be at least 1".into()));
        }
        if cfg.strategy.strategy.posture() != decoder.keyboard().posture() {
            return Err(Error::Config(format!(
                "{} strategy used with a {} keyboard",
                cfg.strategy.strategy,
                decoder.keyboard().posture()
            )));
        }
        Ok(Session {
            cfg,
            decoder,
            phrases,
            state: TypingState::default(),
            log: Vec::new(),
            engine: None,
            seq: 0,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn phrases(&self) -> &PhraseSet {
        &self.phrases
    }

    pub fn state(&self) -> &TypingState {
        &self.state
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn current_phrase(&self) -> Option<&str> {
        self.phrases.get(self.state.phrase_index)
    }

    pub fn is_finished(&self) -> bool {
        self.state.phrase_index >= self.phrases.len()
    }

    fn ensure_active(&self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Sequencing("all phrases are complete".into()));
        }
        Ok(())
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    pub fn apply_event(&mut self, ev: &GestureEvent) -> Result<Effect> {
        self.ensure_active()?;
        let (state, effect) = apply_event(&self.state, ev, &self.decoder, &self.cfg);
        self.state = state;
        let seq = self.next_seq();
        self.log.push(LogRecord::Gesture {
            seq,
            phrase: self.state.phrase_index,
            event: *ev,
            effect: effect.clone(),
            digest: self.state.digest(),
        });
        Ok(effect)
    }

    /// Installs (or replaces) the calibration used for sensor frames.
    pub fn calibrate(&mut self, cal: CalibrationProfile) -> Result<()> {
        match &mut self.engine {
            Some(e) => e.recalibrate(cal),
            None => {
                self.engine = Some(GestureEngine::new(self.cfg.strategy, cal)?);
                Ok(())
            }
        }
    }

    pub fn process_frame(&mut self, frame: &SensorFrame) -> Result<Vec<(GestureEvent, Effect)>> {
        self.ensure_active()?;
        let engine = self
            .engine
            .as_mut()
            .ok_or_else(|| Error::Sequencing("frames received before calibration".into()))?;
        let events = engine.process_frame(frame)?;
        events.into_iter().map(|ev| Ok((ev, self.apply_event(&ev)?))).collect()
    }

    pub fn request_cheat_sheet(&mut self, now: u64) -> Result<()> {
        if self.cfg.mode != Mode::Blind {
            return Err(Error::Mode("the cheat sheet is only available in blind mode".into()));
        }
        self.ensure_active()?;
        self.state.cheat_sheet_requests += 1;
        let until = now + self.cfg.cheat_sheet_duration_ms;
        self.state.cheat_sheet_until = Some(until);
        let seq = self.next_seq();
        self.log.push(LogRecord::CheatSheet {
            seq,
            phrase: self.state.phrase_index,
            timestamp: now,
            visible_until: until,
            digest: self.state.digest(),
        });
        Ok(())
    }

    /// Jumps straight to a candidate page (side-selector shortcut).
    pub fn select_page(&mut self, page: usize, now: u64) -> Result<()> {
        self.ensure_active()?;
        let n_pages = match (&self.state.area, &self.state.candidates) {
            (Area::WordArea, Some(c)) => c.n_pages(),
            _ => return Err(Error::Sequencing("no candidate list is showing".into())),
        };
        if page >= n_pages {
            return Err(Error::Input(format!("page {page} out of range ({n_pages} pages)")));
        }
        self.state.candidate_page = page;
        let seq = self.next_seq();
        self.log.push(LogRecord::PageSelect {
            seq,
            phrase: self.state.phrase_index,
            timestamp: now,
            page,
            digest: self.state.digest(),
        });
        Ok(())
    }

    /// Closes the current phrase and moves to the next one.
    pub fn advance_phrase(&mut self, now: u64) -> Result<()> {
        self.ensure_active()?;
        let presented = self.current_phrase().expect("active session").to_string();
        let transcribed = self.state.transcribed();
        let phrase = self.state.phrase_index;
        self.state = TypingState {
            cursor: self.state.cursor,
            phrase_index: phrase + 1,
            cheat_sheet_until: self.state.cheat_sheet_until,
            ..TypingState::default()
        };
        let seq = self.next_seq();
        self.log.push(LogRecord::PhraseComplete {
            seq,
            phrase,
            timestamp: now,
            presented,
            transcribed,
            digest: self.state.digest(),
        });
        Ok(())
    }

    /// Metrics over the phrases completed so far.
    pub fn metrics(&self) -> Result<MetricsReport> {
        compute_metrics(&self.log, Some(&self.phrases))
    }
}
