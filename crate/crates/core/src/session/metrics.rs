//! Text-entry metrics from a session log.
//!
//! Per phrase, with presented text P and transcribed text T:
//! `MSD = levenshtein(P, T)`, `INF = MSD`, `C = max(|P|, |T|) - MSD`,
//! `IF` = characters removed by delete gestures (a deleted word counts its
//! letters plus the implicit space), `TER = (INF + IF) / (C + INF + IF)`,
//! `NCER = INF / (C + INF + IF)`, and `WPM = (|T| - 1) / seconds * 12`
//! with seconds measured from the first to the last command gesture.
//! Session values are per-phrase means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Effect, LogRecord};
use crate::corpus::PhraseSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseMetrics {
    pub phrase: usize,
    pub presented: String,
    pub transcribed: String,
    pub seconds: f64,
    pub wpm: f64,
    pub correct: usize,
    pub inf: usize,
    pub if_: usize,
    pub ter: f64,
    pub ncer: f64,
    pub cheat_sheet_requests: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub wpm: f64,
    pub ter: f64,
    pub ncer: f64,
    pub cheat_sheet_requests: u32,
    pub phrases: Vec<PhraseMetrics>,
}

impl MetricsReport {
    pub fn summary_table(&self) -> String {
        let mut out = String::from("phrase\tseconds\twpm\tC\tINF\tIF\tTER\tNCER\tcheat_sheet\n");
        for p in &self.phrases {
            out.push_str(&format!(
                "{}\t{:.3}\t{:.2}\t{}\t{}\t{}\t{:.2}%\t{:.2}%\t{}\n",
                p.phrase,
                p.seconds,
                p.wpm,
                p.correct,
                p.inf,
                p.if_,
                100.0 * p.ter,
                100.0 * p.ncer,
                p.cheat_sheet_requests
            ));
        }
        out.push_str(&format!(
            "mean\t\t{:.2}\t\t\t\t{:.2}%\t{:.2}%\t{}\n",
            self.wpm,
            100.0 * self.ter,
            100.0 * self.ncer,
            self.cheat_sheet_requests
        ));
        out
    }
}

/// Words per minute for `chars` transcribed characters over `seconds`.
pub fn wpm(chars: usize, seconds: f64) -> f64 {
    if chars <= 1 || !(seconds > 0.0) {
        0.0
    } else {
        (chars - 1) as f64 / seconds * 12.0
    }
}

/// (C, INF) from the minimum string distance alignment.
pub fn msd_classes(presented: &str, transcribed: &str) -> (usize, usize) {
    let msd = strsim::levenshtein(presented, transcribed);
    let longest = presented.chars().count().max(transcribed.chars().count());
    (longest - msd, msd)
}

pub fn error_rates(correct: usize, inf: usize, if_: usize) -> (f64, f64) {
    let total = correct + inf + if_;
    if total == 0 {
        return (0.0, 0.0);
    }
    let t = total as f64;
    ((inf + if_) as f64 / t, inf as f64 / t)
}

pub fn phrase_metrics(
    phrase: usize,
    presented: &str,
    transcribed: &str,
    seconds: f64,
    if_: usize,
    cheat_sheet_requests: u32,
) -> PhraseMetrics {
    let (correct, inf) = msd_classes(presented, transcribed);
    let (ter, ncer) = error_rates(correct, inf, if_);
    PhraseMetrics {
        phrase,
        presented: presented.to_string(),
        transcribed: transcribed.to_string(),
        seconds,
        wpm: wpm(transcribed.chars().count(), seconds),
        correct,
        inf,
        if_,
        ter,
        ncer,
        cheat_sheet_requests,
    }
}

#[derive(Default)]
struct Accum {
    first: Option<u64>,
    last: Option<u64>,
    if_: usize,
    cheat: u32,
}

/// Metrics over every completed phrase in the log. When `presented` is
/// given, each phrase's recorded text must match it.
pub fn compute_metrics(log: &[LogRecord], presented: Option<&PhraseSet>) -> Result<MetricsReport> {
    if log.is_empty() {
        return Err(Error::Input("empty session log".into()));
    }
    let mut open: BTreeMap<usize, Accum> = BTreeMap::new();
    let mut phrases = Vec::new();
    for r in log {
        match r {
            LogRecord::Gesture { phrase, event, effect, .. } => {
                let a = open.entry(*phrase).or_default();
                if event.kind.is_command() {
                    a.first.get_or_insert(event.timestamp);
                    a.last = Some(event.timestamp);
                }
                a.if_ += match effect {
                    Effect::KeyRemoved { .. } => 1,
                    Effect::WordDeleted { word } => word.chars().count() + 1,
                    _ => 0,
                };
            }
            LogRecord::CheatSheet { phrase, .. } => open.entry(*phrase).or_default().cheat += 1,
            LogRecord::PageSelect { .. } => {}
            LogRecord::PhraseComplete {
                phrase,
                presented: text,
                transcribed,
                ..
            } => {
                if let Some(set) = presented {
                    if set.get(*phrase) != Some(text.as_str()) {
                        return Err(Error::Input(format!(
                            "phrase {phrase} in the log ({text:?}) does not match the phrase set"
                        )));
                    }
                }
                let a = open.remove(phrase).unwrap_or_default();
                let seconds = match (a.first, a.last) {
                    (Some(f), Some(l)) => (l - f) as f64 / 1000.0,
                    _ => 0.0,
                };
                phrases.push(phrase_metrics(*phrase, text, transcribed, seconds, a.if_, a.cheat));
            }
        }
    }
    if phrases.is_empty() {
        return Err(Error::Input("log contains no completed phrase".into()));
    }
    let n = phrases.len() as f64;
    Ok(MetricsReport {
        wpm: phrases.iter().map(|p| p.wpm).sum::<f64>() / n,
        ter: phrases.iter().map(|p| p.ter).sum::<f64>() / n,
        ncer: phrases.iter().map(|p| p.ncer).sum::<f64>() / n,
        cheat_sheet_requests: phrases.iter().map(|p| p.cheat_sheet_requests).sum(),
        phrases,
    })
}
