//! Labeled eyes-free tap samples and their CSV form.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{index_letter, letter_index, NormalizedPosition, Posture};

/// What the participant was trying to hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TapTarget {
    Letter(u8),
    Space,
}

impl fmt::Display for TapTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapTarget::Letter(l) => write!(f, "{}", index_letter(*l as usize)),
            TapTarget::Space => f.write_str("space"),
        }
    }
}

impl FromStr for TapTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "space" || t == "_" || s == " " {
            return Ok(TapTarget::Space);
        }
        let mut chars = t.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => letter_index(c)
                .map(|i| TapTarget::Letter(i as u8))
                .ok_or_else(|| Error::Input(format!("bad tap target {s:?}"))),
            _ => Err(Error::Input(format!("bad tap target {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapSample {
    pub participant: String,
    pub posture: Posture,
    pub target: TapTarget,
    pub position: NormalizedPosition,
}

#[derive(Debug, Serialize, Deserialize)]
struct TapRow {
    participant: String,
    posture: String,
    letter: String,
    normalized_position: f64,
}

/// Reads the `participant,posture,letter,normalized_position` CSV. The
/// header row is required.
pub fn read_taps<R: Read>(reader: R) -> Result<Vec<TapSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    let expected = ["participant", "posture", "letter", "normalized_position"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(1, format!("expected header {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<TapRow>() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = out.len() + 2;
        let posture = rec.posture.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let target = rec.letter.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let position = NormalizedPosition::new(rec.normalized_position)
            .map_err(|e| Error::parse(line, e.to_string()))?;
        out.push(TapSample {
            participant: rec.participant,
            posture,
            target,
            position,
        });
    }
    Ok(out)
}

pub fn write_taps<W: Write>(writer: W, taps: &[TapSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for t in taps {
        w.serialize(TapRow {
            participant: t.participant.clone(),
            posture: t.posture.to_string(),
            letter: t.target.to_string(),
            normalized_position: t.position.value(),
        })
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// A tap in raw device units (e.g. degrees) before per-user scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTap {
    pub participant: String,
    pub posture: Posture,
    pub target: TapTarget,
    pub value: f64,
}

/// Min-max scales each (participant, posture) group onto `[0, 1]` so that
/// taps from users with different rotation ranges can be pooled.
pub fn min_max_normalize(raw: &[RawTap]) -> Result<Vec<TapSample>> {
    let mut ranges: BTreeMap<(&str, Posture), (f64, f64)> = BTreeMap::new();
    for t in raw {
        if !t.value.is_finite() {
            return Err(Error::Input(format!("non-finite tap value for {}", t.participant)));
        }
        let r = ranges
            .entry((t.participant.as_str(), t.posture))
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        r.0 = r.0.min(t.value);
        r.1 = r.1.max(t.value);
    }
    raw.iter()
        .map(|t| {
            let (lo, hi) = ranges[&(t.participant.as_str(), t.posture)];
            if !(hi > lo) {
                return Err(Error::Degenerate(format!(
                    "participant {} has no spread in {} taps",
                    t.participant, t.posture
                )));
            }
            Ok(TapSample {
                participant: t.participant.clone(),
                posture: t.posture,
                target: t.target,
                position: NormalizedPosition::clamped((t.value - lo) / (hi - lo)),
            })
        })
        .collect()
}

pub fn positions(taps: &[TapSample], posture: Posture) -> Vec<f64> {
    taps.iter()
        .filter(|t| t.posture == posture)
        .map(|t| t.position.value())
        .collect()
}
