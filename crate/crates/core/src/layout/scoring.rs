//! Spatial matching, joint and final scores, and keyboard selection.
//!
//! For a cluster layout and a letter layout with the same number of letter
//! keys, letter `l` scores `n_l / N_l * f_l`: the share of its taps that land
//! on the key holding it, weighted by its corpus frequency. The pair score
//! `S` sums that over the alphabet. Standing and sitting scores are added
//! (`S_joint`), and the final score adds the disambiguation score
//! (`F = L + S_joint`).

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::sweep::CandidateSet;
use crate::corpus::LetterFrequencyTable;
use crate::error::{Error, Result};
use crate::geometry::{index_letter, ClusterLayout, Keyboard, LetterLayout, Posture, ALPHABET_LEN};
use crate::taps::{TapSample, TapTarget};

/// Per-letter tap counts on each key of one cluster layout.
#[derive(Debug, Clone)]
pub struct LetterHits {
    posture: Posture,
    letter_keys: Vec<usize>,
    hits: Vec<[u32; ALPHABET_LEN]>,
    totals: [u32; ALPHABET_LEN],
}

impl LetterHits {
    pub fn new(cl: &ClusterLayout, taps: &[TapSample]) -> Result<Self> {
        let mut hits = vec![[0u32; ALPHABET_LEN]; cl.n_keys()];
        let mut totals = [0u32; ALPHABET_LEN];
        for t in taps {
            if t.posture != cl.posture {
                return Err(Error::Input(format!(
                    "tap from {} posture scored against a {} layout",
                    t.posture, cl.posture
                )));
            }
            if let TapTarget::Letter(l) = t.target {
                let l = l as usize;
                totals[l] += 1;
                hits[cl.key_at(t.position)][l] += 1;
            }
        }
        Ok(LetterHits {
            posture: cl.posture,
            letter_keys: cl.letter_key_indices(),
            hits,
            totals,
        })
    }

    pub fn posture(&self) -> Posture {
        self.posture
    }

    pub fn score(&self, ll: &LetterLayout, f: &LetterFrequencyTable) -> Result<SpatialScore> {
        if ll.n_groups() != self.letter_keys.len() {
            return Err(Error::Input(format!(
                "{} letter groups vs {} letter keys",
                ll.n_groups(),
                self.letter_keys.len()
            )));
        }
        let mut per_letter = [0.0; ALPHABET_LEN];
        let mut missing = Vec::new();
        for l in 0..ALPHABET_LEN {
            let n_total = self.totals[l];
            if n_total == 0 {
                missing.push(index_letter(l));
                continue;
            }
            let key = self.letter_keys[ll.group_of_index(l)];
            per_letter[l] = self.hits[key][l] as f64 / n_total as f64 * f.by_index(l);
        }
        Ok(SpatialScore {
            per_letter,
            total: per_letter.iter().sum(),
            missing,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialScore {
    pub per_letter: [f64; ALPHABET_LEN],
    pub total: f64,
    /// Letters with no taps; they contribute zero.
    pub missing: Vec<char>,
}

pub fn spatial_match_score(
    cl: &ClusterLayout,
    ll: &LetterLayout,
    taps: &[TapSample],
    f: &LetterFrequencyTable,
) -> Result<SpatialScore> {
    let s = LetterHits::new(cl, taps)?.score(ll, f)?;
    if !s.missing.is_empty() {
        warn!("no taps recorded for letters {:?}; they score zero", s.missing);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub k_letters: usize,
    /// Cluster layout id: its total key count, space included.
    pub n_keys: usize,
    /// Letter layout id: enumeration index within `k_letters`.
    pub j: u64,
    pub l: f64,
    pub s_stand: f64,
    pub s_sit: f64,
    pub s_joint: f64,
    pub f: f64,
}

impl ScoreRecord {
    pub fn new(k_letters: usize, j: u64, l: f64, s_stand: f64, s_sit: f64) -> Self {
        let s_joint = s_stand + s_sit;
        ScoreRecord {
            k_letters,
            n_keys: k_letters + 1,
            j,
            l,
            s_stand,
            s_sit,
            s_joint,
            f: l + s_joint,
        }
    }
}

/// F descending, then L descending, then enumeration index.
fn best_first(a: &ScoreRecord, b: &ScoreRecord) -> std::cmp::Ordering {
    b.f.total_cmp(&a.f).then(b.l.total_cmp(&a.l)).then(a.j.cmp(&b.j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyCountSummary {
    pub k_letters: usize,
    pub n_keys: usize,
    pub records: usize,
    pub mean_top_f: f64,
    pub mean_top_l: f64,
    pub mean_top_s_joint: f64,
}

pub const SUMMARY_TOP: usize = 10;

/// Mean F (and the L and S_joint of the same records) over the best ten
/// records of every key count.
pub fn summarize(records: &[ScoreRecord]) -> Vec<KeyCountSummary> {
    let mut by_k: BTreeMap<usize, Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        by_k.entry(r.k_letters).or_default().push(*r);
    }
    by_k.into_iter()
        .map(|(k, mut rs)| {
            rs.sort_by(best_first);
            let top = &rs[..rs.len().min(SUMMARY_TOP)];
            let n = top.len() as f64;
            KeyCountSummary {
                k_letters: k,
                n_keys: k + 1,
                records: rs.len(),
                mean_top_f: top.iter().map(|r| r.f).sum::<f64>() / n,
                mean_top_l: top.iter().map(|r| r.l).sum::<f64>() / n,
                mean_top_s_joint: top.iter().map(|r| r.s_joint).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Everything needed to pick and build the final keyboards.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub records: Vec<ScoreRecord>,
    pub clusters: BTreeMap<(Posture, usize), ClusterLayout>,
    pub layouts: BTreeMap<(usize, u64), LetterLayout>,
}

impl ScoreTable {
    pub fn summaries(&self) -> Vec<KeyCountSummary> {
        summarize(&self.records)
    }

    pub fn to_tsv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("k\ti\tj\tL\tS_stand\tS_sit\tS_joint\tF\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.k_letters, r.n_keys, r.j, r.l, r.s_stand, r.s_sit, r.s_joint, r.f
            ));
        }
        out
    }

    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("n_keys\tk\trecords\tmean_top10_F\tmean_top10_L\tmean_top10_S_joint\n");
        for s in self.summaries() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\n",
                s.n_keys, s.k_letters, s.records, s.mean_top_f, s.mean_top_l, s.mean_top_s_joint
            ));
        }
        out
    }
}

pub fn parse_score_records(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("k\t") {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(Error::parse(line_no, "expected 8 tab-separated columns"));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::parse(line_no, format!("bad integer {s:?}")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(line_no, format!("bad number {s:?}")));
        out.push(ScoreRecord {
            k_letters: int(f[0])? as usize,
            n_keys: int(f[1])? as usize,
            j: int(f[2])?,
            l: num(f[3])?,
            s_stand: num(f[4])?,
            s_sit: num(f[5])?,
            s_joint: num(f[6])?,
            f: num(f[7])?,
        });
    }
    Ok(out)
}

/// Scores every candidate letter layout against the standing and sitting
/// cluster layouts with one extra key for space.
pub fn joint_and_final_scores(
    candidates: &CandidateSet,
    clusters: &[ClusterLayout],
    taps: &[TapSample],
    freq: &LetterFrequencyTable,
) -> Result<ScoreTable> {
    let mut cluster_map = BTreeMap::new();
    for cl in clusters {
        cluster_map.insert((cl.posture, cl.n_keys()), cl.clone());
    }
    let mut records = Vec::new();
    let mut layouts = BTreeMap::new();
    for (&k, cands) in &candidates.per_k {
        let mut hits = Vec::with_capacity(2);
        for posture in Posture::ALL {
            let cl = cluster_map.get(&(posture, k + 1)).ok_or_else(|| {
                Error::Input(format!("no {posture} cluster layout with {} keys for k={k}", k + 1))
            })?;
            let posture_taps: Vec<TapSample> = taps.iter().filter(|t| t.posture == posture).cloned().collect();
            hits.push(LetterHits::new(cl, &posture_taps)?);
        }
        for c in cands {
            let s_stand = hits[0].score(&c.layout, freq)?.total;
            let s_sit = hits[1].score(&c.layout, freq)?.total;
            records.push(ScoreRecord::new(k, c.index, c.l(), s_stand, s_sit));
            layouts.insert((k, c.index), c.layout.clone());
        }
    }
    Ok(ScoreTable {
        records,
        clusters: cluster_map,
        layouts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Total key count including space.
    ExplicitKeys(usize),
    /// Sharpest downward bend of the S_joint curve.
    Knee,
}

/// Key count at the most negative second difference of the summary
/// S_joint curve. Falls back to the best mean F with fewer than three points.
pub fn knee_key_count(summaries: &[KeyCountSummary]) -> Option<usize> {
    if summaries.len() < 3 {
        return summaries
            .iter()
            .max_by(|a, b| a.mean_top_f.total_cmp(&b.mean_top_f).then(b.n_keys.cmp(&a.n_keys)))
            .map(|s| s.n_keys);
    }
    let mut best: Option<(f64, usize)> = None;
    for w in summaries.windows(3) {
        let bend = -(w[0].mean_top_s_joint - 2.0 * w[1].mean_top_s_joint + w[2].mean_top_s_joint);
        if best.is_none_or(|(b, _)| bend > b) {
            best = Some((bend, w[1].n_keys));
        }
    }
    best.map(|(_, n)| n)
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub record: ScoreRecord,
    pub standing: Keyboard,
    pub sitting: Keyboard,
}

pub fn select_keyboard(table: &ScoreTable, policy: SelectionPolicy) -> Result<Selection> {
    if table.records.is_empty() {
        return Err(Error::Input("no score records to select from".into()));
    }
    let n_keys = match policy {
        SelectionPolicy::ExplicitKeys(n) => n,
        SelectionPolicy::Knee => knee_key_count(&table.summaries()).expect("records are non-empty"),
    };
    let record = table
        .records
        .iter()
        .filter(|r| r.n_keys == n_keys)
        .min_by(|a, b| best_first(a, b))
        .copied()
        .ok_or_else(|| Error::Input(format!("no records with {n_keys} keys")))?;
    let layout = table
        .layouts
        .get(&(record.k_letters, record.j))
        .ok_or_else(|| Error::Input(format!("letter layout {} for k={} missing", record.j, record.k_letters)))?;
    let build = |posture: Posture| -> Result<Keyboard> {
        let cl = table
            .clusters
            .get(&(posture, n_keys))
            .ok_or_else(|| Error::Input(format!("no {posture} cluster layout with {n_keys} keys")))?;
        Keyboard::new(cl.clone(), layout.clone())
    };
    Ok(Selection {
        record,
        standing: build(Posture::Standing)?,
        sitting: build(Posture::Sitting)?,
    })
}
