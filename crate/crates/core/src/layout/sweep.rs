//! The layout sweep: score every contiguous layout for each letter-key count
//! and keep the best `per_k`.
//!
//! Work is cut into blocks of `checkpoint_every` layouts. Each block is split
//! across workers and merged with a fixed total order (successes descending,
//! then enumeration index), so the result does not depend on the worker
//! count. After every block the partial state can be written to a
//! checkpoint file and later resumed.

use std::collections::{BTreeMap, BinaryHeap};
use std::fs;
use std::io::Write;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::disambiguation::{DisambiguationScorer, DEFAULT_TOP_N};
use super::enumerate::{layout_count, LayoutEnumerator};
use crate::corpus::Lexicon;
use crate::error::{Error, Result};
use crate::geometry::LetterLayout;

pub const MIN_LETTER_KEYS: usize = 5;
pub const MAX_LETTER_KEYS: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub per_k: usize,
    pub top_n: usize,
    pub workers: usize,
    pub checkpoint_every: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_min: MIN_LETTER_KEYS,
            k_max: MAX_LETTER_KEYS,
            per_k: 100,
            top_n: DEFAULT_TOP_N,
            workers: 1,
            checkpoint_every: 100_000,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < MIN_LETTER_KEYS || self.k_max > MAX_LETTER_KEYS || self.k_min > self.k_max {
            return Err(Error::Input(format!(
                "letter-key range {}..={} must lie within {MIN_LETTER_KEYS}..={MAX_LETTER_KEYS}",
                self.k_min, self.k_max
            )));
        }
        if self.per_k == 0 || self.top_n == 0 || self.workers == 0 || self.checkpoint_every == 0 {
            return Err(Error::Input("per_k, top_n, workers and checkpoint interval must be positive".into()));
        }
        Ok(())
    }
}

/// A scored letter layout; `index` is its enumeration index within `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutCandidate {
    pub k: usize,
    pub index: u64,
    pub successes: u32,
    pub total: u32,
    pub layout: LetterLayout,
}

impl LayoutCandidate {
    pub fn l(&self) -> f64 {
        self.successes as f64 / self.total.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ranked {
    successes: u32,
    index: u64,
}

// Larger = worse, so a max-heap keeps the worst retained entry on top.
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .successes
            .cmp(&self.successes)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn push_bounded(heap: &mut BinaryHeap<Ranked>, item: Ranked, cap: usize) {
    if heap.len() < cap {
        heap.push(item);
    } else if let Some(worst) = heap.peek() {
        if item < *worst {
            heap.pop();
            heap.push(item);
        }
    }
}

fn merge(mut lists: Vec<Ranked>, cap: usize) -> Vec<Ranked> {
    lists.sort();
    lists.dedup();
    lists.truncate(cap);
    lists
}

fn score_range(scorer: &mut DisambiguationScorer, k: usize, start: u64, end: u64, cap: usize) -> Result<Vec<Ranked>> {
    let mut heap = BinaryHeap::with_capacity(cap + 1);
    let mut e = LayoutEnumerator::with_range(k, start..end)?;
    let mut groups = [0u8; 26];
    while let Some((index, cuts)) = e.next_cuts() {
        fill_groups(cuts, &mut groups);
        let successes = scorer.successes(&groups, k);
        push_bounded(&mut heap, Ranked { successes, index }, cap);
    }
    Ok(heap.into_vec())
}

fn fill_groups(cuts: &[u8], groups: &mut [u8; 26]) {
    let mut g = 0u8;
    let mut next_cut = cuts.first().copied();
    let mut ci = 0;
    for (l, slot) in groups.iter_mut().enumerate() {
        if Some(l as u8) == next_cut {
            g += 1;
            ci += 1;
            next_cut = cuts.get(ci).copied();
        }
        *slot = g;
    }
}

/// Top layouts per letter-key count.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub top_n: usize,
    pub n_words: u32,
    pub per_k: BTreeMap<usize, Vec<LayoutCandidate>>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.per_k.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize, index: u64) -> Option<&LayoutCandidate> {
        self.per_k.get(&k)?.iter().find(|c| c.index == index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LayoutCandidate> {
        self.per_k.values().flatten()
    }

    /// Tab-separated rows `k index successes total L groups`, after `header`.
    pub fn to_tsv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("k\tj\tsuccesses\ttotal\tL\tlayout\n");
        for c in self.iter() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                c.k,
                c.index,
                c.successes,
                c.total,
                c.l(),
                c.layout
            ));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut per_k: BTreeMap<usize, Vec<LayoutCandidate>> = BTreeMap::new();
        let mut n_words = 0;
        let mut seen_header = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                seen_header = true;
                if line.starts_with("k\t") {
                    continue;
                }
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(Error::parse(line_no, "expected 6 tab-separated columns"));
            }
            let num = |s: &str| -> Result<u64> {
                s.parse().map_err(|_| Error::parse(line_no, format!("bad number {s:?}")))
            };
            let layout: LetterLayout = f[5].parse().map_err(|e: Error| Error::parse(line_no, e.to_string()))?;
            let k = num(f[0])? as usize;
            if layout.n_groups() != k {
                return Err(Error::parse(line_no, "layout group count does not match k"));
            }
            n_words = num(f[3])? as u32;
            per_k.entry(k).or_default().push(LayoutCandidate {
                k,
                index: num(f[1])?,
                successes: num(f[2])? as u32,
                total: n_words,
                layout,
            });
        }
        Ok(CandidateSet {
            top_n: DEFAULT_TOP_N,
            n_words,
            per_k,
        })
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"AKCP";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
struct SweepState {
    fingerprint: [u8; 16],
    k: usize,
    next_index: u64,
    done: BTreeMap<usize, Vec<Ranked>>,
    current: Vec<Ranked>,
}

impl SweepState {
    fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(CHECKPOINT_MAGIC);
        b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        b.extend_from_slice(&self.fingerprint);
        b.extend_from_slice(&(self.k as u32).to_le_bytes());
        b.extend_from_slice(&self.next_index.to_le_bytes());
        let lists: Vec<(usize, &Vec<Ranked>)> = self
            .done
            .iter()
            .map(|(k, v)| (*k, v))
            .chain(std::iter::once((self.k, &self.current)))
            .collect();
        b.extend_from_slice(&(lists.len() as u32).to_le_bytes());
        for (k, list) in lists {
            b.extend_from_slice(&(k as u32).to_le_bytes());
            b.extend_from_slice(&(list.len() as u32).to_le_bytes());
            for r in list {
                b.extend_from_slice(&r.index.to_le_bytes());
                b.extend_from_slice(&r.successes.to_le_bytes());
            }
        }
        b
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Input("corrupt checkpoint file".into());
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(bad)?;
            pos += n;
            Ok(s)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(bad());
        }
        let u32_of = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let u64_of = |s: &[u8]| u64::from_le_bytes(s.try_into().unwrap());
        let version = u32_of(take(4)?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Input(format!("unsupported checkpoint version {version}")));
        }
        let mut fingerprint = [0u8; 16];
        fingerprint.copy_from_slice(take(16)?);
        let k = u32_of(take(4)?) as usize;
        let next_index = u64_of(take(8)?);
        let n_lists = u32_of(take(4)?);
        let mut done = BTreeMap::new();
        let mut current = Vec::new();
        for _ in 0..n_lists {
            let lk = u32_of(take(4)?) as usize;
            let len = u32_of(take(4)?);
            let mut list = Vec::with_capacity(len as usize);
            for _ in 0..len {
                let index = u64_of(take(8)?);
                let successes = u32_of(take(4)?);
                list.push(Ranked { successes, index });
            }
            if lk == k {
                current = list;
            } else {
                done.insert(lk, list);
            }
        }
        if take(1).is_ok() {
            return Err(bad());
        }
        Ok(SweepState {
            fingerprint,
            k,
            next_index,
            done,
            current,
        })
    }
}

fn fingerprint(cfg: &SweepConfig, lex: &Lexicon) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update(format!("{} {} {} {}\n", cfg.k_min, cfg.k_max, cfg.per_k, cfg.top_n));
    for e in lex.entries() {
        h.update(e.word.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

fn write_checkpoint(path: &Path, state: &SweepState) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&state.encode())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Checkpoint file and resume behaviour for [`run_sweep`].
#[derive(Debug, Clone, Default)]
pub struct SweepControl<'a> {
    pub checkpoint: Option<&'a Path>,
    pub resume: bool,
    /// Stop (leaving the checkpoint in place) once this many blocks ran.
    pub max_blocks: Option<usize>,
}

/// Runs the sweep. Returns `None` when stopped early by `max_blocks`.
pub fn run_sweep(cfg: &SweepConfig, lex: &Lexicon, control: &SweepControl<'_>) -> Result<Option<CandidateSet>> {
    cfg.validate()?;
    if lex.is_empty() {
        return Err(Error::Degenerate("empty lexicon".into()));
    }
    let fp = fingerprint(cfg, lex);
    let mut state = match (control.resume, control.checkpoint) {
        (true, Some(path)) if path.exists() => {
            let st = SweepState::decode(&fs::read(path)?)?;
            if st.fingerprint != fp {
                return Err(Error::Input(
                    "checkpoint was written for a different lexicon or sweep configuration".into(),
                ));
            }
            info!("resuming sweep at k={} index={}", st.k, st.next_index);
            st
        }
        (true, None) => return Err(Error::Input("--resume requires a checkpoint path".into())),
        _ => SweepState {
            fingerprint: fp,
            k: cfg.k_min,
            next_index: 0,
            done: BTreeMap::new(),
            current: Vec::new(),
        },
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let base = DisambiguationScorer::new(lex, cfg.top_n)?;
    let mut blocks = 0usize;

    while state.k <= cfg.k_max {
        let k = state.k;
        let n = layout_count(k)?;
        while state.next_index < n {
            if control.max_blocks.is_some_and(|m| blocks >= m) {
                return Ok(None);
            }
            let start = state.next_index;
            let end = (start + cfg.checkpoint_every).min(n);
            let parts = split_range(start, end, cfg.workers);
            let local: Vec<Vec<Ranked>> = pool.install(|| {
                parts
                    .par_iter()
                    .map(|&(a, b)| score_range(&mut base.clone(), k, a, b, cfg.per_k))
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut all = std::mem::take(&mut state.current);
            all.extend(local.into_iter().flatten());
            state.current = merge(all, cfg.per_k);
            state.next_index = end;
            blocks += 1;
            if let Some(path) = control.checkpoint {
                write_checkpoint(path, &state)?;
            }
        }
        info!("k={k}: best {} of {} words", state.current.first().map_or(0, |r| r.successes), lex.len());
        state.done.insert(k, std::mem::take(&mut state.current));
        state.k += 1;
        state.next_index = 0;
        if let Some(path) = control.checkpoint {
            write_checkpoint(path, &state)?;
        }
    }

    let n_words = lex.len() as u32;
    let mut per_k = BTreeMap::new();
    for (k, list) in state.done {
        let cands = list
            .into_iter()
            .map(|r| {
                Ok(LayoutCandidate {
                    k,
                    index: r.index,
                    successes: r.successes,
                    total: n_words,
                    layout: LetterLayout::from_cuts(&super::enumerate::unrank(k, r.index)?)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        per_k.insert(k, cands);
    }
    Ok(Some(CandidateSet {
        top_n: cfg.top_n,
        n_words,
        per_k,
    }))
}

fn split_range(start: u64, end: u64, parts: usize) -> Vec<(u64, u64)> {
    let len = end - start;
    let parts = (parts as u64).clamp(1, len.max(1));
    (0..parts)
        .map(|i| (start + len * i / parts, start + len * (i + 1) / parts))
        .filter(|(a, b)| a < b)
        .collect()
}

/// Convenience wrapper: the top `per_k` layouts for every `k` in the range.
pub fn top_layout_candidates(lex: &Lexicon, k_min: usize, k_max: usize, per_k: usize) -> Result<CandidateSet> {
    let cfg = SweepConfig {
        k_min,
        k_max,
        per_k,
        ..SweepConfig::default()
    };
    Ok(run_sweep(&cfg, lex, &SweepControl::default())?.expect("unbounded sweep always completes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_groups_matches_layout() {
        let cuts = [3u8, 10, 20];
        let mut g = [0u8; 26];
        fill_groups(&cuts, &mut g);
        assert_eq!(&g, LetterLayout::from_cuts(&cuts).unwrap().letter_groups());
    }

    #[test]
    fn ranked_order() {
        let a = Ranked { successes: 10, index: 5 };
        let b = Ranked { successes: 10, index: 7 };
        let c = Ranked { successes: 9, index: 0 };
        let mut v = vec![c, b, a];
        v.sort();
        assert_eq!(v, vec![a, b, c]);
    }

    #[test]
    fn checkpoint_codec_round_trip() {
        let st = SweepState {
            fingerprint: [7; 16],
            k: 6,
            next_index: 1234,
            done: BTreeMap::from([(5, vec![Ranked { successes: 3, index: 9 }])]),
            current: vec![Ranked { successes: 2, index: 1 }, Ranked { successes: 1, index: 4 }],
        };
        let bytes = st.encode();
        assert_eq!(&bytes[..4], b"AKCP");
        assert_eq!(SweepState::decode(&bytes).unwrap(), st);
        assert!(SweepState::decode(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn config_range_checked() {
        let lex = Lexicon::parse_str("a 1").unwrap();
        let cfg = SweepConfig { k_min: 4, ..SweepConfig::default() };
        assert!(run_sweep(&cfg, &lex, &SweepControl::default()).is_err());
        let cfg = SweepConfig { k_max: 14, ..SweepConfig::default() };
        assert!(run_sweep(&cfg, &lex, &SweepControl::default()).is_err());
    }

    #[test]
    fn split_is_exhaustive() {
        let parts = split_range(10, 27, 4);
        assert_eq!(parts.first().unwrap().0, 10);
        assert_eq!(parts.last().unwrap().1, 27);
        for w in parts.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert_eq!(split_range(0, 2, 8).len(), 2);
    }
}
