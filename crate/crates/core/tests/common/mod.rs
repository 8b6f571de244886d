#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use ankle_keys::corpus::{Lexicon, PhraseSet};
use ankle_keys::decoder::Decoder;
use ankle_keys::geometry::{Keyboard, LetterLayout, Posture};
use ankle_keys::input::{Foot, GestureEvent, GestureKind};
use ankle_keys::session::{word_slot_center, word_slots};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn lexicon_path() -> PathBuf {
    data_dir().join("lexicon.tsv")
}

pub fn phrases_path() -> PathBuf {
    data_dir().join("phrases.txt")
}

pub fn lexicon(top: usize) -> Lexicon {
    Lexicon::parse_str(&fs::read_to_string(lexicon_path()).unwrap())
        .unwrap()
        .truncated(top)
}

pub fn phrases() -> PhraseSet {
    PhraseSet::parse_str(&fs::read_to_string(phrases_path()).unwrap()).unwrap()
}

/// Nine uniform keys, space in the middle, phone-pad letter groups.
pub fn pad_keyboard(posture: Posture) -> Keyboard {
    let ll = LetterLayout::new(&["abc", "def", "ghi", "jkl", "mno", "pqrs", "tuv", "wxyz"]).unwrap();
    Keyboard::uniform(posture, ll).unwrap()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ankle-keys")
}

/// Gesture script of a typist who never misses: every command gesture is
/// `dt` ms after the previous one, and each tap is preceded by a cursor
/// move at the same timestamp.
pub struct Script {
    pub events: Vec<GestureEvent>,
    pub next_t: u64,
    pub dt: u64,
    pub foot: Foot,
}

impl Script {
    pub fn new(t0: u64, dt: u64) -> Self {
        Script { events: Vec::new(), next_t: t0, dt, foot: Foot::Right }
    }

    fn command(&mut self, kind: GestureKind) -> u64 {
        let t = self.next_t;
        self.events.push(GestureEvent { kind, foot: self.foot, timestamp: t });
        self.next_t += self.dt;
        t
    }

    fn tap_at(&mut self, x: f64) {
        let position = ankle_keys::geometry::NormalizedPosition::new(x).unwrap();
        self.events.push(GestureEvent {
            kind: GestureKind::CursorMove { position },
            foot: self.foot,
            timestamp: self.next_t,
        });
        self.command(GestureKind::ForefootTap);
    }

    pub fn letter(&mut self, kb: &Keyboard, c: char) {
        let key = kb.letter_to_key(c).unwrap();
        self.tap_at(kb.keys()[key].center);
    }

    pub fn delete(&mut self) {
        self.command(GestureKind::RearfootTap);
    }

    /// Types `word` and commits it; returns the number of page turns.
    pub fn word(&mut self, dec: &Decoder, word: &str, in_word_area: bool) -> usize {
        let kb = dec.keyboard();
        if in_word_area {
            self.command(GestureKind::FlatBackward);
        }
        for c in word.chars() {
            self.letter(kb, c);
        }
        self.command(GestureKind::FlatForward);
        let list = dec.exact(&kb.signature(word).unwrap(), 50).unwrap();
        let idx = list.words().iter().position(|w| *w == word).expect("word is decodable");
        let ps = dec.page_size();
        let pages = idx / ps;
        for _ in 0..pages {
            self.tap_at(word_slot_center(word_slots(ps) - 1, ps).value());
        }
        self.tap_at(word_slot_center(idx % ps + 1, ps).value());
        pages
    }

    /// Types a whole phrase; returns the analytic count of command gestures.
    pub fn phrase(&mut self, dec: &Decoder, phrase: &str) -> usize {
        let mut commands = 0;
        for (i, w) in phrase.split(' ').enumerate() {
            let pages = self.word(dec, w, i > 0);
            commands += w.len() + 2 + pages + usize::from(i > 0);
        }
        commands
    }
}

/// Words per minute a flawless typist reaches on `phrase` when command
/// gestures are `dt` ms apart.
pub fn analytic_wpm(phrase: &str, commands: usize, dt: u64) -> f64 {
    let seconds = (commands - 1) as f64 * dt as f64 / 1000.0;
    (phrase.chars().count() - 1) as f64 / seconds * 12.0
}
