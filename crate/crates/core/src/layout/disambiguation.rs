//! Word disambiguation score: the share of lexicon words that land in the
//! top `top_n` of the frequency-ordered candidate list for their key
//! signature.

use std::collections::HashMap;

use crate::corpus::Lexicon;
use crate::error::{Error, Result};
use crate::geometry::{LetterLayout, ALPHABET_LEN};

pub const DEFAULT_TOP_N: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DisambiguationScore {
    pub layout: LetterLayout,
    pub successes: u32,
    pub total: u32,
}

impl DisambiguationScore {
    pub fn k_letters(&self) -> usize {
        self.layout.n_groups()
    }

    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.successes as f64 / self.total as f64
        }
    }
}

/// Reusable scorer over one lexicon.
///
/// Words are visited in rank order; a word succeeds iff fewer than `top_n`
/// earlier words share its signature. One hash pass per layout.
#[derive(Debug, Clone)]
pub struct DisambiguationScorer {
    words: Vec<Vec<u8>>,
    top_n: u32,
    packed: HashMap<u128, u32>,
    long: HashMap<Vec<u8>, u32>,
}

impl DisambiguationScorer {
    pub fn new(lex: &Lexicon, top_n: usize) -> Result<Self> {
        if top_n == 0 {
            return Err(Error::Input("top_n must be at least 1".into()));
        }
        Ok(DisambiguationScorer {
            words: lex.encoded_words(),
            top_n: top_n as u32,
            packed: HashMap::with_capacity(lex.len()),
            long: HashMap::new(),
        })
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    /// Successful words for the partition given as a letter→group table.
    pub fn successes(&mut self, letter_group: &[u8; ALPHABET_LEN], n_groups: usize) -> u32 {
        self.packed.clear();
        self.long.clear();
        let base = n_groups as u128 + 1;
        let mut ok = 0;
        for w in &self.words {
            let count = match pack(w, letter_group, base) {
                Some(key) => self.packed.entry(key).or_insert(0),
                None => self
                    .long
                    .entry(w.iter().map(|&l| letter_group[l as usize]).collect())
                    .or_insert(0),
            };
            if *count < self.top_n {
                ok += 1;
            }
            *count += 1;
        }
        ok
    }

    pub fn score(&mut self, layout: &LetterLayout) -> DisambiguationScore {
        let successes = self.successes(layout.letter_groups(), layout.n_groups());
        DisambiguationScore {
            layout: layout.clone(),
            successes,
            total: self.words.len() as u32,
        }
    }
}

// Digits are group + 1 so signatures of different lengths never collide.
fn pack(word: &[u8], letter_group: &[u8; ALPHABET_LEN], base: u128) -> Option<u128> {
    let mut key: u128 = 0;
    for &l in word {
        key = key
            .checked_mul(base)?
            .checked_add(letter_group[l as usize] as u128 + 1)?;
    }
    Some(key)
}

pub fn disambiguation_score(layout: &LetterLayout, lex: &Lexicon, top_n: usize) -> Result<DisambiguationScore> {
    Ok(DisambiguationScorer::new(lex, top_n)?.score(layout))
}
