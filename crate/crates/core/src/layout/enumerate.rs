//! Contiguous alphabetical partitions, enumerated as lexicographic
//! combinations of cut positions.
//!
//! A layout with `k` groups is a choice of `k - 1` cut points among the 25
//! gaps between letters, so there are `C(25, k - 1)` of them. Every layout
//! has a stable index within its `k`, which lets a sweep be split into
//! disjoint ranges and resumed from a checkpoint.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::{LetterLayout, ALPHABET_LEN};

const GAPS: u64 = (ALPHABET_LEN - 1) as u64;

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn check_k(k: usize) -> Result<()> {
    if (1..=ALPHABET_LEN).contains(&k) {
        Ok(())
    } else {
        Err(Error::Input(format!("group count {k} outside 1..=26")))
    }
}

/// Number of contiguous layouts with `k` groups.
pub fn layout_count(k: usize) -> Result<u64> {
    check_k(k)?;
    Ok(binomial(GAPS, k as u64 - 1))
}

pub fn layout_count_range(k_min: usize, k_max: usize) -> Result<u64> {
    if k_min > k_max {
        return Err(Error::Input(format!("empty k range {k_min}..={k_max}")));
    }
    (k_min..=k_max).map(layout_count).sum()
}

/// Cut positions of the layout with the given index (lexicographic order).
pub fn unrank(k: usize, mut index: u64) -> Result<Vec<u8>> {
    let total = layout_count(k)?;
    if index >= total {
        return Err(Error::Input(format!("layout index {index} out of range for k={k} ({total})")));
    }
    let m = k as u64 - 1;
    let mut cuts = Vec::with_capacity(m as usize);
    let mut c: u64 = 1;
    for p in 0..m {
        loop {
            // combinations whose element at position p is c
            let count = binomial(GAPS - c, m - p - 1);
            if index < count {
                break;
            }
            index -= count;
            c += 1;
        }
        cuts.push(c as u8);
        c += 1;
    }
    Ok(cuts)
}

/// Inverse of [`unrank`].
pub fn rank(cuts: &[u8]) -> u64 {
    let m = cuts.len() as u64;
    let mut index = 0;
    let mut prev: u64 = 0;
    for (p, &cut) in cuts.iter().enumerate() {
        for c in prev + 1..cut as u64 {
            index += binomial(GAPS - c, m - p as u64 - 1);
        }
        prev = cut as u64;
    }
    index
}

/// Walks layouts with `k` groups over an index range.
#[derive(Debug, Clone)]
pub struct LayoutEnumerator {
    k: usize,
    next_index: u64,
    end: u64,
    cuts: Vec<u8>,
    started: bool,
}

impl LayoutEnumerator {
    pub fn new(k: usize) -> Result<Self> {
        let n = layout_count(k)?;
        Self::with_range(k, 0..n)
    }

    pub fn with_range(k: usize, range: Range<u64>) -> Result<Self> {
        let n = layout_count(k)?;
        if range.start > range.end || range.end > n {
            return Err(Error::Input(format!("range {range:?} out of bounds for k={k} ({n})")));
        }
        let cuts = if range.start < n { unrank(k, range.start)? } else { Vec::new() };
        Ok(LayoutEnumerator {
            k,
            next_index: range.start,
            end: range.end,
            cuts,
            started: false,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Advances to the next cut combination in place. Returns `(index, cuts)`.
    pub fn next_cuts(&mut self) -> Option<(u64, &[u8])> {
        if self.next_index >= self.end {
            return None;
        }
        if self.started {
            advance(&mut self.cuts);
        }
        self.started = true;
        let index = self.next_index;
        self.next_index += 1;
        Some((index, &self.cuts))
    }

    pub fn remaining(&self) -> u64 {
        self.end - self.next_index
    }
}

fn advance(cuts: &mut [u8]) {
    let m = cuts.len();
    let mut i = m;
    while i > 0 {
        i -= 1;
        let max_here = (GAPS as usize - (m - 1 - i)) as u8;
        if cuts[i] < max_here {
            cuts[i] += 1;
            for j in i + 1..m {
                cuts[j] = cuts[j - 1] + 1;
            }
            return;
        }
    }
}

impl Iterator for LayoutEnumerator {
    type Item = LetterLayout;

    fn next(&mut self) -> Option<LetterLayout> {
        self.next_cuts().map(|(_, cuts)| LetterLayout::from_cuts_unchecked(cuts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    // independent oracle: recursive generation of all increasing cut tuples
    fn brute_force(m: usize, from: u8, acc: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if acc.len() == m {
            out.push(acc.clone());
            return;
        }
        for c in from..=25 {
            acc.push(c);
            brute_force(m, c + 1, acc, out);
            acc.pop();
        }
    }

    #[test]
    fn counts_match_closed_form() {
        assert_eq!(layout_count(2).unwrap(), 25);
        assert_eq!(layout_count(13).unwrap(), 5_200_300);
        assert_eq!(layout_count(5).unwrap(), 12_650);
        assert_eq!(layout_count_range(5, 13).unwrap(), 16_774_590);
        assert!(layout_count(0).is_err());
        assert!(layout_count(27).is_err());
    }

    #[test]
    fn exhaustive_generation_for_small_k() {
        for k in 1..=6 {
            let mut oracle = Vec::new();
            brute_force(k - 1, 1, &mut Vec::new(), &mut oracle);
            let mut e = LayoutEnumerator::new(k).unwrap();
            let mut got = Vec::new();
            while let Some((i, cuts)) = e.next_cuts() {
                assert_eq!(i as usize, got.len());
                got.push(cuts.to_vec());
            }
            assert_eq!(got, oracle, "k={k}");
            assert_eq!(got.len() as u64, layout_count(k).unwrap());
            let distinct: HashSet<_> = LayoutEnumerator::new(k).unwrap().map(|l| l.to_string()).collect();
            assert_eq!(distinct.len(), got.len());
        }
    }

    #[test]
    fn rank_unrank_and_ranges() {
        for k in [2, 5, 9, 14] {
            let n = layout_count(k).unwrap();
            for idx in [0, 1, n / 3, n / 2, n - 1] {
                let cuts = unrank(k, idx).unwrap();
                assert_eq!(rank(&cuts), idx);
            }
        }
        let full: Vec<String> = LayoutEnumerator::new(5).unwrap().map(|l| l.to_string()).collect();
        let mut split = Vec::new();
        for r in [0..1000, 1000..1000, 1000..7777, 7777..12_650] {
            split.extend(LayoutEnumerator::with_range(5, r).unwrap().map(|l| l.to_string()));
        }
        assert_eq!(full, split);
        assert!(LayoutEnumerator::with_range(5, 0..12_651).is_err());
    }

    #[test]
    fn enumeration_count_for_k_up_to_fourteen() {
        for k in 7..=8 {
            assert_eq!(LayoutEnumerator::new(k).unwrap().count() as u64, layout_count(k).unwrap());
        }
        for k in 2..=14 {
            let last = unrank(k, layout_count(k).unwrap() - 1).unwrap();
            let expected: Vec<u8> = (26 - k as u8 + 1..=25).collect();
            assert_eq!(last, expected);
        }
    }
}
