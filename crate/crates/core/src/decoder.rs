//! Word decoding from key sequences (exact) or tap positions (Bayes).
//!
//! Bayes mode scores a word `w` of the same length as the tap sequence by
//! `ln freq(w) + sum_i ln N(x_i; center(key(w_i)), sigma(key(w_i)))` and
//! normalizes the emitted list with log-sum-exp.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::Lexicon;
use crate::error::{Error, Result};
use crate::geometry::{Keyboard, NormalizedPosition, Posture, ALPHABET_LEN};
use crate::layout::gmm::log_normal_pdf;

pub const SIGMA_FLOOR: f64 = 1e-4;
pub const DEFAULT_PAGE_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeySequence {
    Keys(Vec<usize>),
    Positions(Vec<NormalizedPosition>),
}

impl KeySequence {
    pub fn len(&self) -> usize {
        match self {
            KeySequence::Keys(k) => k.len(),
            KeySequence::Positions(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyGaussian {
    pub key_index: usize,
    pub center: f64,
    pub sigma: f64,
}

/// Per-letter-key Gaussian tap model.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialModel {
    pub posture: Posture,
    keys: Vec<KeyGaussian>,
}

impl SpatialModel {
    /// Sigmas below the floor are raised to it. Keys must be listed in
    /// increasing index order with strictly increasing centers.
    pub fn new(posture: Posture, mut keys: Vec<KeyGaussian>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::Input("spatial model has no keys".into()));
        }
        keys.sort_by_key(|k| k.key_index);
        for w in keys.windows(2) {
            if w[0].key_index == w[1].key_index {
                return Err(Error::Input(format!("key {} listed twice", w[0].key_index)));
            }
            if w[0].center >= w[1].center {
                return Err(Error::Input(format!(
                    "centers must increase with key index (key {} at {}, key {} at {})",
                    w[0].key_index, w[0].center, w[1].key_index, w[1].center
                )));
            }
        }
        for k in &mut keys {
            if !k.center.is_finite() || !(k.sigma > 0.0) || !k.sigma.is_finite() {
                return Err(Error::Input(format!("key {}: bad center or sigma", k.key_index)));
            }
            k.sigma = k.sigma.max(SIGMA_FLOOR);
        }
        Ok(SpatialModel { posture, keys })
    }

    /// Cluster centers and dispersions of the keyboard's letter keys.
    pub fn from_keyboard(kb: &Keyboard) -> Result<Self> {
        let keys = kb
            .keys()
            .iter()
            .enumerate()
            .filter(|(i, _)| kb.is_letter_key(*i))
            .map(|(i, k)| KeyGaussian {
                key_index: i,
                center: k.center,
                sigma: k.sigma,
            })
            .collect();
        SpatialModel::new(kb.posture(), keys)
    }

    /// Same centers, every sigma replaced.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        let keys = self.keys.iter().map(|k| KeyGaussian { sigma, ..*k }).collect();
        SpatialModel::new(self.posture, keys)
    }

    /// Rows of `key_index\tcenter\tsigma`; blank and `#` lines skipped.
    pub fn load<R: BufRead>(posture: Posture, reader: R) -> Result<Self> {
        let mut keys = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = t.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(line_no, "expected key_index, center and sigma"));
            }
            let key_index = f[0]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad key index {:?}", f[0])))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number {s:?}")));
            keys.push(KeyGaussian {
                key_index,
                center: num(f[1])?,
                sigma: num(f[2])?,
            });
        }
        SpatialModel::new(posture, keys)
    }

    pub fn parse_str(posture: Posture, text: &str) -> Result<Self> {
        SpatialModel::load(posture, text.as_bytes())
    }

    pub fn to_tsv(&self) -> String {
        self.keys
            .iter()
            .map(|k| format!("{}\t{}\t{}\n", k.key_index, k.center, k.sigma))
            .collect()
    }

    pub fn keys(&self) -> &[KeyGaussian] {
        &self.keys
    }

    pub fn get(&self, key_index: usize) -> Option<&KeyGaussian> {
        self.keys.iter().find(|k| k.key_index == key_index)
    }

    /// Errors unless the model covers exactly the keyboard's letter keys.
    pub fn check_against(&self, kb: &Keyboard) -> Result<()> {
        let expected: Vec<usize> = (0..kb.n_keys()).filter(|&i| kb.is_letter_key(i)).collect();
        let have: Vec<usize> = self.keys.iter().map(|k| k.key_index).collect();
        if expected != have {
            return Err(Error::Input(format!(
                "spatial model keys {have:?} do not match keyboard letter keys {expected:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub word: String,
    /// Normalized probability in Bayes mode; relative frequency share in
    /// exact mode.
    pub score: f64,
    /// Unnormalized log score.
    pub log_score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub candidates: Vec<Candidate>,
    pub page_size: usize,
}

impl CandidateList {
    pub fn empty(page_size: usize) -> Self {
        CandidateList {
            candidates: Vec::new(),
            page_size,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn words(&self) -> Vec<&str> {
        self.candidates.iter().map(|c| c.word.as_str()).collect()
    }

    pub fn n_pages(&self) -> usize {
        self.candidates.len().div_ceil(self.page_size.max(1))
    }

    /// Slice `[page*size, (page+1)*size)`, empty past the end.
    pub fn page(&self, page_index: usize) -> &[Candidate] {
        let size = self.page_size.max(1);
        let lo = page_index.saturating_mul(size).min(self.candidates.len());
        let hi = lo.saturating_add(size).min(self.candidates.len());
        &self.candidates[lo..hi]
    }
}

fn normalize(mut scored: Vec<(usize, f64)>, lex: &Lexicon, max_out: usize, page_size: usize) -> CandidateList {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(max_out);
    let m = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let z = m + scored.iter().map(|s| (s.1 - m).exp()).sum::<f64>().ln();
    CandidateList {
        candidates: scored
            .into_iter()
            .map(|(rank, ls)| Candidate {
                word: lex.entries()[rank].word.clone(),
                score: (ls - z).exp(),
                log_score: ls,
                rank,
            })
            .collect(),
        page_size,
    }
}

/// A keyboard and lexicon indexed for repeated decoding.
#[derive(Debug, Clone)]
pub struct Decoder {
    keyboard: Keyboard,
    spatial: SpatialModel,
    lexicon: Lexicon,
    letter_key: [usize; ALPHABET_LEN],
    by_signature: HashMap<Vec<usize>, Vec<usize>>,
    by_length: HashMap<usize, Vec<usize>>,
    page_size: usize,
}

impl Decoder {
    pub fn new(keyboard: Keyboard, spatial: SpatialModel, lexicon: Lexicon) -> Result<Self> {
        spatial.check_against(&keyboard)?;
        let mut letter_key = [0; ALPHABET_LEN];
        for (l, k) in letter_key.iter_mut().enumerate() {
            *k = keyboard.letter_index_to_key(l);
        }
        let mut by_signature: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        let mut by_length: HashMap<usize, Vec<usize>> = HashMap::new();
        for (rank, w) in lexicon.encoded_words().into_iter().enumerate() {
            by_length.entry(w.len()).or_default().push(rank);
            let sig = w.iter().map(|&l| letter_key[l as usize]).collect();
            by_signature.entry(sig).or_default().push(rank);
        }
        Ok(Decoder {
            keyboard,
            spatial,
            lexicon,
            letter_key,
            by_signature,
            by_length,
            page_size: DEFAULT_PAGE_SIZE,
        })
    }

    pub fn from_keyboard(keyboard: Keyboard, lexicon: Lexicon) -> Result<Self> {
        let spatial = SpatialModel::from_keyboard(&keyboard)?;
        Decoder::new(keyboard, spatial, lexicon)
    }

    pub fn with_page_size(mut self, page_size: usize) -> Result<Self> {
        if page_size == 0 {
            return Err(Error::Input("page size must be at least 1".into()));
        }
        self.page_size = page_size;
        Ok(self)
    }

    pub fn keyboard(&self) -> &Keyboard {
        &self.keyboard
    }

    pub fn spatial(&self) -> &SpatialModel {
        &self.spatial
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    /// Words whose key signature equals `keys`, in lexicon rank order.
    pub fn exact(&self, keys: &[usize], max_out: usize) -> Result<CandidateList> {
        if keys.is_empty() {
            return Err(Error::Input("cannot decode an empty key sequence".into()));
        }
        if let Some(&bad) = keys.iter().find(|&&k| !self.keyboard.is_letter_key(k)) {
            return Err(Error::Input(format!("key {bad} is not a letter key")));
        }
        let Some(ranks) = self.by_signature.get(keys) else {
            return Ok(CandidateList::empty(self.page_size));
        };
        let scored = ranks
            .iter()
            .map(|&r| (r, self.lexicon.entries()[r].frequency.ln()))
            .collect();
        Ok(normalize(scored, &self.lexicon, max_out, self.page_size))
    }

    /// All words of the same length, ranked by posterior.
    pub fn bayes(&self, positions: &[NormalizedPosition], max_out: usize) -> Result<CandidateList> {
        if positions.is_empty() {
            return Err(Error::Input("cannot decode an empty tap sequence".into()));
        }
        let Some(ranks) = self.by_length.get(&positions.len()) else {
            return Ok(CandidateList::empty(self.page_size));
        };
        let n_keys = self.keyboard.n_keys();
        // table[i * n_keys + key] = ln N(x_i; key)
        let mut table = vec![f64::NEG_INFINITY; positions.len() * n_keys];
        for (i, x) in positions.iter().enumerate() {
            for g in self.spatial.keys() {
                table[i * n_keys + g.key_index] = log_normal_pdf(x.value(), g.center, g.sigma * g.sigma);
            }
        }
        let entries = self.lexicon.entries();
        let scored = ranks
            .iter()
            .map(|&r| {
                let ll: f64 = entries[r]
                    .word
                    .bytes()
                    .enumerate()
                    .map(|(i, b)| table[i * n_keys + self.letter_key[(b - b'a') as usize]])
                    .sum();
                (r, entries[r].frequency.ln() + ll)
            })
            .collect();
        Ok(normalize(scored, &self.lexicon, max_out, self.page_size))
    }

    pub fn decode(&self, seq: &KeySequence, max_out: usize) -> Result<CandidateList> {
        match seq {
            KeySequence::Keys(k) => self.exact(k, max_out),
            KeySequence::Positions(p) => self.bayes(p, max_out),
        }
    }
}

pub fn decode_exact(keys: &[usize], kb: &Keyboard, lex: &Lexicon, max_out: usize) -> Result<CandidateList> {
    Decoder::from_keyboard(kb.clone(), lex.clone())?.exact(keys, max_out)
}

pub fn decode_bayes(
    positions: &[NormalizedPosition],
    kb: &Keyboard,
    sm: &SpatialModel,
    lex: &Lexicon,
    max_out: usize,
) -> Result<CandidateList> {
    Decoder::new(kb.clone(), sm.clone(), lex.clone())?.bayes(positions, max_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClusterLayout, LetterLayout};

    fn two_group_kb() -> Keyboard {
        // space at key 0, so a-m is key 1 and n-z key 2
        let cl = ClusterLayout::uniform(Posture::Standing, 3, 0).unwrap();
        Keyboard::new(cl, LetterLayout::new(&["abcdefghijklm", "nopqrstuvwxyz"]).unwrap()).unwrap()
    }

    fn pos(x: f64) -> NormalizedPosition {
        NormalizedPosition::new(x).unwrap()
    }

    #[test]
    fn exact_hand_signatures() {
        let lex = Lexicon::parse_str("the 100\nshe 90").unwrap();
        let c = decode_exact(&[2, 1, 1], &two_group_kb(), &lex, 10).unwrap();
        assert_eq!(c.words(), vec!["the", "she"]);
        assert!(decode_exact(&[1, 1, 1], &two_group_kb(), &lex, 10).unwrap().is_empty());
        assert!(decode_exact(&[], &two_group_kb(), &lex, 10).is_err());
        assert!(decode_exact(&[0], &two_group_kb(), &lex, 10).is_err());
    }

    #[test]
    fn exact_singletons_are_unique() {
        let lex = Lexicon::parse_str("cat 5\nact 4\ntac 3").unwrap();
        let kb = Keyboard::uniform(Posture::Sitting, LetterLayout::singletons()).unwrap();
        let keys = kb.signature("cat").unwrap();
        assert_eq!(decode_exact(&keys, &kb, &lex, 10).unwrap().words(), vec!["cat"]);
    }

    #[test]
    fn bayes_frequency_breaks_shared_key_ties() {
        let lex = Lexicon::parse_str("to 80\nta 10").unwrap();
        let kb = two_group_kb();
        let c1 = kb.keys()[2].center;
        let c0 = kb.keys()[1].center;
        let sm = SpatialModel::from_keyboard(&kb).unwrap().with_sigma(0.05).unwrap();
        let c = decode_bayes(&[pos(c1), pos(c0)], &kb, &sm, &lex, 10).unwrap();
        // 'o' and 'a' are on different keys here; 't' then a-m favours "ta"
        assert_eq!(c.words(), vec!["ta", "to"]);
        let c = decode_bayes(&[pos(c1), pos(c1)], &kb, &sm, &lex, 10).unwrap();
        assert_eq!(c.words(), vec!["to", "ta"]);
        let one = Keyboard::new(
            ClusterLayout::uniform(Posture::Standing, 2, 0).unwrap(),
            LetterLayout::new(&["abcdefghijklmnopqrstuvwxyz"]).unwrap(),
        )
        .unwrap();
        let sm = SpatialModel::from_keyboard(&one).unwrap();
        let x = pos(one.keys()[1].center);
        let c = decode_bayes(&[x, x], &one, &sm, &lex, 10).unwrap();
        assert_eq!(c.words(), vec!["to", "ta"]);
        assert!((c.candidates[0].score - 80.0 / 90.0).abs() < 1e-12);
    }

    #[test]
    fn bayes_scores_are_normalized_and_sorted() {
        let lex = Lexicon::parse_str("in 9\non 8\nno 7\nit 6\nat 5\nan 4\nam 3").unwrap();
        let kb = two_group_kb();
        let sm = SpatialModel::from_keyboard(&kb).unwrap();
        let c = decode_bayes(&[pos(0.4), pos(0.9)], &kb, &sm, &lex, 4).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c.candidates.iter().map(|c| c.score).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.candidates.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(decode_bayes(&[pos(0.1); 5], &kb, &sm, &lex, 4).unwrap().is_empty());
    }

    #[test]
    fn long_words_do_not_underflow() {
        let word = "z".repeat(30);
        let lex = Lexicon::from_pairs([(word.as_str(), 1.0)]).unwrap();
        let kb = two_group_kb();
        let sm = SpatialModel::from_keyboard(&kb).unwrap().with_sigma(1e-4).unwrap();
        let c = decode_bayes(&vec![pos(0.0); 30], &kb, &sm, &lex, 4).unwrap();
        assert!(c.candidates[0].log_score.is_finite());
        assert_eq!(c.candidates[0].score, 1.0);
    }

    #[test]
    fn paging() {
        let words = ["a", "b", "c", "d", "e", "f", "g"];
        let lex = Lexicon::from_pairs(words.iter().enumerate().map(|(i, w)| (*w, 10.0 - i as f64))).unwrap();
        let kb = two_group_kb();
        let c = decode_exact(&[1], &kb, &lex, 100).unwrap();
        assert_eq!(c.len(), 7);
        assert_eq!(c.page(0).len(), 5);
        assert_eq!(c.page(1).iter().map(|c| c.word.as_str()).collect::<Vec<_>>(), vec!["f", "g"]);
        assert!(c.page(2).is_empty());
        assert_eq!(c.n_pages(), 2);
    }

    #[test]
    fn spatial_model_file() {
        let sm = SpatialModel::parse_str(Posture::Standing, "# k c s\n1\t0.5\t0.07\n2\t0.83\t0.00001\n").unwrap();
        assert_eq!(sm.get(2).unwrap().sigma, SIGMA_FLOOR);
        sm.check_against(&two_group_kb()).unwrap();
        let back = SpatialModel::parse_str(Posture::Standing, &sm.to_tsv()).unwrap();
        assert_eq!(back, sm);
        assert!(SpatialModel::parse_str(Posture::Standing, "1\t0.5\t0.1\n2\t0.4\t0.1\n").is_err());
        assert!(SpatialModel::parse_str(Posture::Standing, "1\t0.5\n").is_err());
        let other = SpatialModel::parse_str(Posture::Standing, "0\t0.1\t0.1\n1\t0.5\t0.1\n").unwrap();
        assert!(other.check_against(&two_group_kb()).is_err());
    }
}
