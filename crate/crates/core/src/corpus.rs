//! Word lexicon, letter-frequency table and transcription phrases.

use std::collections::HashMap;
use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{index_letter, letter_index, ALPHABET_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub frequency: f64,
}

/// Words ordered by descending frequency. Ties keep input order, so an
/// entry's position is its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    ranks: HashMap<String, usize>,
}

fn is_lower_alpha(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase())
}

impl Lexicon {
    /// Validates and sorts `(word, frequency)` pairs. Words are lowercased.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut entries = Vec::new();
        for (i, (word, frequency)) in pairs.into_iter().enumerate() {
            entries.push((i + 1, word.as_ref().to_lowercase(), frequency));
        }
        Self::build(entries)
    }

    fn build(rows: Vec<(usize, String, f64)>) -> Result<Self> {
        let mut seen: HashMap<String, usize> = HashMap::with_capacity(rows.len());
        let mut entries = Vec::with_capacity(rows.len());
        for (line, word, frequency) in rows {
            if !is_lower_alpha(&word) {
                return Err(Error::parse(line, format!("word {word:?} is not alphabetic a-z")));
            }
            if !(frequency > 0.0) || !frequency.is_finite() {
                return Err(Error::parse(line, format!("frequency {frequency} must be positive")));
            }
            if let Some(first) = seen.insert(word.clone(), line) {
                return Err(Error::parse(
                    line,
                    format!("duplicate word {word:?} (first seen at line {first})"),
                ));
            }
            entries.push(LexiconEntry { word, frequency });
        }
        // stable sort keeps file order among equal frequencies
        entries.sort_by(|a, b| b.frequency.total_cmp(&a.frequency));
        let ranks = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Ok(Lexicon { entries, ranks })
    }

    /// Reads `word<TAB>frequency` rows. Blank lines and `#` comments are skipped.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    line_no,
                    format!("expected `word<TAB>frequency`, got {} fields", fields.len()),
                ));
            }
            let frequency: f64 = fields[1]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad frequency {:?}", fields[1])))?;
            rows.push((line_no, fields[0].to_lowercase(), frequency));
        }
        Self::build(rows)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::load(text.as_bytes())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank(&self, word: &str) -> Option<usize> {
        self.ranks.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ranks.contains_key(word)
    }

    /// The `n` most frequent entries.
    pub fn truncated(&self, n: usize) -> Lexicon {
        let entries: Vec<LexiconEntry> = self.entries.iter().take(n).cloned().collect();
        let ranks = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Lexicon { entries, ranks }
    }

    /// Letter indices of every word, in rank order.
    pub fn encoded_words(&self) -> Vec<Vec<u8>> {
        self.entries
            .iter()
            .map(|e| e.word.bytes().map(|b| b - b'a').collect())
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\n", e.word, e.frequency));
        }
        out
    }
}

/// Relative frequency of each letter; sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterFrequencyTable {
    freq: [f64; ALPHABET_LEN],
}

impl LetterFrequencyTable {
    /// Normalizes raw non-negative weights. Logs a warning when the input
    /// was not already normalized to within 1e-9.
    pub fn from_weights(weights: [f64; ALPHABET_LEN]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("letter weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("letter weights sum to zero".into()));
        }
        if (total - 1.0).abs() > 1e-9 {
            warn!("letter frequency table sums to {total}; renormalizing");
        }
        let mut freq = weights;
        for f in &mut freq {
            *f /= total;
        }
        Ok(LetterFrequencyTable { freq })
    }

    /// Frequency-weighted letter counts over the lexicon.
    pub fn from_lexicon(lex: &Lexicon) -> Result<Self> {
        if lex.is_empty() {
            return Err(Error::Degenerate("cannot derive letter frequencies from an empty lexicon".into()));
        }
        let mut weights = [0.0; ALPHABET_LEN];
        for e in lex.entries() {
            for b in e.word.bytes() {
                weights[(b - b'a') as usize] += e.frequency;
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(LetterFrequencyTable { freq: weights })
    }

    /// Reads 26 `letter<TAB>weight` rows.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut weights = [f64::NAN; ALPHABET_LEN];
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(line_no, "expected `letter<TAB>weight`"));
            }
            let mut chars = fields[0].chars();
            let idx = match (chars.next().map(|c| c.to_ascii_lowercase()), chars.next()) {
                (Some(c), None) => letter_index(c),
                _ => None,
            }
            .ok_or_else(|| Error::parse(line_no, format!("bad letter {:?}", fields[0])))?;
            if !weights[idx].is_nan() {
                return Err(Error::parse(line_no, format!("letter {:?} repeated", fields[0])));
            }
            let w = fields[1]
                .trim_end_matches('%')
                .parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("bad weight {:?}", fields[1])))?;
            weights[idx] = w;
        }
        if let Some(missing) = weights.iter().position(|w| w.is_nan()) {
            return Err(Error::Input(format!(
                "letter frequency table is missing {:?}",
                index_letter(missing)
            )));
        }
        Self::from_weights(weights)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::load(text.as_bytes())
    }

    pub fn get(&self, c: char) -> Option<f64> {
        letter_index(c).map(|i| self.freq[i])
    }

    pub fn by_index(&self, letter: usize) -> f64 {
        self.freq[letter]
    }

    pub fn as_array(&self) -> &[f64; ALPHABET_LEN] {
        &self.freq
    }
}

/// Lowercase phrases over a-z and single spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSet {
    phrases: Vec<String>,
}

impl PhraseSet {
    pub fn new<S: AsRef<str>>(phrases: &[S]) -> Result<Self> {
        let phrases = phrases
            .iter()
            .enumerate()
            .map(|(i, p)| normalize_phrase(p.as_ref()).map_err(|m| Error::parse(i + 1, m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PhraseSet { phrases })
    }

    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut phrases = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            phrases.push(normalize_phrase(&line).map_err(|m| Error::parse(i + 1, m))?);
        }
        Ok(PhraseSet { phrases })
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::load(text.as_bytes())
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&str> {
        self.phrases.get(i).map(String::as_str)
    }
}

fn normalize_phrase(raw: &str) -> std::result::Result<String, String> {
    let lower = raw.to_lowercase();
    if let Some(bad) = lower.chars().find(|c| !(c.is_ascii_lowercase() || *c == ' ' || *c == '\t')) {
        return Err(format!("phrase {raw:?} contains invalid character {bad:?}"));
    }
    let words: Vec<&str> = lower.split_whitespace().collect();
    if words.is_empty() {
        return Err("empty phrase".into());
    }
    Ok(words.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lexicon_orders_by_frequency() {
        let a = Lexicon::parse_str("the\t100\nto\t80\n").unwrap();
        let b = Lexicon::parse_str("to 80\nthe 100\n").unwrap();
        let words = |l: &Lexicon| l.entries().iter().map(|e| e.word.clone()).collect::<Vec<_>>();
        assert_eq!(words(&a), ["the", "to"]);
        assert_eq!(words(&b), ["the", "to"]);
        assert_eq!(b.rank("to"), Some(1));
    }

    #[test]
    fn lexicon_ties_keep_file_order() {
        let l = Lexicon::parse_str("# header\nzeta\t5\nalpha\t5\nbeta\t9\n").unwrap();
        let words: Vec<_> = l.entries().iter().map(|e| e.word.as_str()).collect();
        assert_eq!(words, ["beta", "zeta", "alpha"]);
    }

    #[test]
    fn lexicon_errors_carry_line_numbers() {
        match Lexicon::parse_str("a 1\na 2\n") {
            Err(Error::Parse { line: 2, message }) => assert!(message.contains("duplicate")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Lexicon::parse_str("ok 1\nno1 3"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Lexicon::parse_str("ok 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Lexicon::parse_str("ok -3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Lexicon::parse_str("ok"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Lexicon::parse_str("x 1\ny 2 3"), Err(Error::Parse { line: 2, .. })));
        assert_eq!(Lexicon::parse_str("The 3").unwrap().entries()[0].word, "the");
    }

    #[test]
    fn letter_frequencies_from_lexicon() {
        let l = Lexicon::parse_str("aa 1").unwrap();
        let f = LetterFrequencyTable::from_lexicon(&l).unwrap();
        assert_eq!(f.get('a'), Some(1.0));
        assert_eq!(f.get('b'), Some(0.0));

        let l = Lexicon::parse_str("ab 1\nb 1").unwrap();
        let f = LetterFrequencyTable::from_lexicon(&l).unwrap();
        assert!((f.get('a').unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((f.get('b').unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let empty = Lexicon::from_pairs(Vec::<(String, f64)>::new()).unwrap();
        assert!(matches!(LetterFrequencyTable::from_lexicon(&empty), Err(Error::Degenerate(_))));
    }

    #[test]
    fn external_table_renormalized() {
        let mut text = String::new();
        for i in 0..26 {
            let w = match i {
                0 => 0.5,
                1 => 0.499,
                _ => 0.0,
            };
            text.push_str(&format!("{}\t{}\n", index_letter(i), w));
        }
        let t = LetterFrequencyTable::parse_str(&text).unwrap();
        assert!((t.get('a').unwrap() - 0.5 / 0.999).abs() < 1e-15);
        let s: f64 = t.as_array().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);

        let missing = "a\t1\nb\t2\n";
        assert!(LetterFrequencyTable::parse_str(missing).is_err());
    }

    #[test]
    fn phrases() {
        let p = PhraseSet::parse_str("Hello World\nvideo camera with a zoom lens\n").unwrap();
        assert_eq!(p.phrases(), ["hello world", "video camera with a zoom lens"]);
        assert!(matches!(PhraseSet::parse_str("ok\n3 cats"), Err(Error::Parse { line: 2, .. })));
        assert!(PhraseSet::parse_str("it's").is_err());
        assert_eq!(PhraseSet::parse_str("  two   spaces ").unwrap().phrases(), ["two spaces"]);
    }

    proptest! {
        #[test]
        fn derived_frequencies_sum_to_one(
            words in proptest::collection::btree_map("[a-z]{1,12}", 1u32..100_000, 1..60)
        ) {
            let lex = Lexicon::from_pairs(words.iter().map(|(w, f)| (w.as_str(), *f as f64))).unwrap();
            let t = LetterFrequencyTable::from_lexicon(&lex).unwrap();
            let s: f64 = t.as_array().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9);
            for w in lex.entries().windows(2) {
                prop_assert!(w[0].frequency >= w[1].frequency);
            }
        }
    }
}
