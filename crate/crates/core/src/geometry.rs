//! Keyboard geometry: calibration, the normalized cursor coordinate, letter
//! layouts and the key intervals produced by clustering.
//!
//! Everything here is an immutable value. Positions live on a single axis,
//! 0 at the calibrated far-left rotation and 1 at the far-right one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz";
pub const ALPHABET_LEN: usize = 26;

/// Index of a lowercase ASCII letter in the alphabet.
pub fn letter_index(c: char) -> Option<usize> {
    if c.is_ascii_lowercase() {
        Some(c as usize - 'a' as usize)
    } else {
        None
    }
}

pub fn index_letter(i: usize) -> char {
    (b'a' + i as u8) as char
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Posture {
    Standing,
    Sitting,
}

impl Posture {
    pub const ALL: [Posture; 2] = [Posture::Standing, Posture::Sitting];

    pub fn as_str(&self) -> &'static str {
        match self {
            Posture::Standing => "standing",
            Posture::Sitting => "sitting",
        }
    }
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Posture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standing" | "stand" => Ok(Posture::Standing),
            "sitting" | "sit" => Ok(Posture::Sitting),
            other => Err(Error::Input(format!("unknown posture {other:?}"))),
        }
    }
}

/// A position on the keyboard axis, always inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormalizedPosition(f64);

impl NormalizedPosition {
    pub const LEFT: NormalizedPosition = NormalizedPosition(0.0);
    pub const RIGHT: NormalizedPosition = NormalizedPosition(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(NormalizedPosition(value))
        } else {
            Err(Error::Input(format!(
                "normalized position {value} outside [0, 1]"
            )))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            NormalizedPosition(0.0)
        } else {
            NormalizedPosition(value.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for NormalizedPosition {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        NormalizedPosition::new(value)
    }
}

impl From<NormalizedPosition> for f64 {
    fn from(p: NormalizedPosition) -> f64 {
        p.0
    }
}

/// Per-user rotation anchors for one posture, in degrees of yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub posture: Posture,
    pub far_left_deg: f64,
    pub rest_deg: f64,
    pub far_right_deg: f64,
}

impl CalibrationProfile {
    pub fn new(posture: Posture, far_left_deg: f64, rest_deg: f64, far_right_deg: f64) -> Result<Self> {
        let cal = CalibrationProfile {
            posture,
            far_left_deg,
            rest_deg,
            far_right_deg,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.far_left_deg.is_finite() && self.rest_deg.is_finite() && self.far_right_deg.is_finite();
        if !finite || !(self.far_left_deg < self.rest_deg && self.rest_deg < self.far_right_deg) {
            return Err(Error::Calibration(format!(
                "anchors must be strictly increasing, got far-left {} / rest {} / far-right {}",
                self.far_left_deg, self.rest_deg, self.far_right_deg
            )));
        }
        Ok(())
    }

    /// Share of the total span that lies left of the rest position.
    pub fn left_proportion(&self) -> f64 {
        (self.rest_deg - self.far_left_deg) / (self.far_right_deg - self.far_left_deg)
    }

    /// Piecewise-linear map from yaw to the keyboard axis.
    ///
    /// The left range maps onto `[0, p]` and the right range onto `[p, 1]`,
    /// where `p` is [`left_proportion`](Self::left_proportion). Yaw outside the
    /// calibrated span clamps to the nearest end.
    pub fn angle_to_normalized(&self, yaw_deg: f64) -> Result<NormalizedPosition> {
        self.validate()?;
        let p = self.left_proportion();
        let v = if yaw_deg.is_nan() {
            return Err(Error::Input("yaw is NaN".into()));
        } else if yaw_deg <= self.far_left_deg {
            0.0
        } else if yaw_deg >= self.far_right_deg {
            1.0
        } else if yaw_deg <= self.rest_deg {
            p * ((yaw_deg - self.far_left_deg) / (self.rest_deg - self.far_left_deg))
        } else {
            p + (1.0 - p) * ((yaw_deg - self.rest_deg) / (self.far_right_deg - self.rest_deg))
        };
        Ok(NormalizedPosition::clamped(v))
    }
}

/// An ordered partition of the alphabet into contiguous groups.
///
/// Any group count from 1 to 26 is representable; the optimizer sweep
/// restricts itself to 5..=13 letter keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LetterLayout {
    groups: Vec<String>,
    letter_group: [u8; ALPHABET_LEN],
}

impl LetterLayout {
    pub fn new<S: AsRef<str>>(groups: &[S]) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Input("letter layout needs at least one group".into()));
        }
        let mut joined = String::with_capacity(ALPHABET_LEN);
        for g in groups {
            let g = g.as_ref();
            if g.is_empty() {
                return Err(Error::Input("letter layout contains an empty group".into()));
            }
            joined.push_str(g);
        }
        if joined != ALPHABET {
            return Err(Error::Input(format!(
                "groups {:?} are not a contiguous alphabetical partition",
                groups.iter().map(|g| g.as_ref()).collect::<Vec<_>>()
            )));
        }
        let mut letter_group = [0u8; ALPHABET_LEN];
        let mut pos = 0;
        for (gi, g) in groups.iter().enumerate() {
            for _ in g.as_ref().chars() {
                letter_group[pos] = gi as u8;
                pos += 1;
            }
        }
        Ok(LetterLayout {
            groups: groups.iter().map(|g| g.as_ref().to_string()).collect(),
            letter_group,
        })
    }

    /// Builds a layout from the letter positions where a new group starts.
    /// `cuts` must be strictly increasing values in `1..=25`.
    pub fn from_cuts(cuts: &[u8]) -> Result<Self> {
        let mut prev = 0u8;
        for &c in cuts {
            if c <= prev || c as usize >= ALPHABET_LEN {
                return Err(Error::Input(format!("invalid cut positions {cuts:?}")));
            }
            prev = c;
        }
        Ok(Self::from_cuts_unchecked(cuts))
    }

    pub(crate) fn from_cuts_unchecked(cuts: &[u8]) -> Self {
        let mut groups = Vec::with_capacity(cuts.len() + 1);
        let mut letter_group = [0u8; ALPHABET_LEN];
        let mut start = 0usize;
        for (gi, end) in cuts.iter().map(|&c| c as usize).chain(std::iter::once(ALPHABET_LEN)).enumerate() {
            groups.push(ALPHABET[start..end].to_string());
            for slot in &mut letter_group[start..end] {
                *slot = gi as u8;
            }
            start = end;
        }
        LetterLayout { groups, letter_group }
    }

    /// 26 single-letter groups.
    pub fn singletons() -> Self {
        let cuts: Vec<u8> = (1..ALPHABET_LEN as u8).collect();
        Self::from_cuts_unchecked(&cuts)
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_of_index(&self, letter: usize) -> usize {
        self.letter_group[letter] as usize
    }

    pub fn group_of(&self, c: char) -> Result<usize> {
        letter_index(c)
            .map(|i| self.letter_group[i] as usize)
            .ok_or_else(|| Error::Input(format!("{c:?} is not a letter a-z")))
    }

    pub fn letter_groups(&self) -> &[u8; ALPHABET_LEN] {
        &self.letter_group
    }

    pub fn cuts(&self) -> Vec<u8> {
        let mut cuts = Vec::with_capacity(self.groups.len().saturating_sub(1));
        let mut pos = 0;
        for g in &self.groups[..self.groups.len() - 1] {
            pos += g.len();
            cuts.push(pos as u8);
        }
        cuts
    }

    /// Splits group `group` so that its first `at` letters stay and the rest
    /// form a new group. Returns `None` if the split would create an empty group.
    pub fn split_group(&self, group: usize, at: usize) -> Option<LetterLayout> {
        let g = self.groups.get(group)?;
        if at == 0 || at >= g.len() {
            return None;
        }
        let mut groups = self.groups.clone();
        let tail = groups[group].split_off(at);
        groups.insert(group + 1, tail);
        LetterLayout::new(&groups).ok()
    }
}

impl fmt::Display for LetterLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.groups.join("|"))
    }
}

impl FromStr for LetterLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let groups: Vec<&str> = s.trim().split('|').collect();
        LetterLayout::new(&groups)
    }
}

/// One key on the axis: half-open `[lo, hi)` (the last key is closed),
/// plus the cluster center and dispersion it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyInterval {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub sigma: f64,
}

impl KeyInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Key geometry for one posture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLayout {
    pub posture: Posture,
    keys: Vec<KeyInterval>,
    space_key_index: usize,
}

impl ClusterLayout {
    pub fn new(posture: Posture, keys: Vec<KeyInterval>, space_key_index: usize) -> Result<Self> {
        if keys.len() < 2 {
            return Err(Error::Input(format!(
                "a cluster layout needs a space key and at least one letter key, got {} keys",
                keys.len()
            )));
        }
        if space_key_index >= keys.len() {
            return Err(Error::Input(format!(
                "space key index {space_key_index} out of range for {} keys",
                keys.len()
            )));
        }
        if keys[0].lo != 0.0 || keys[keys.len() - 1].hi != 1.0 {
            return Err(Error::Input("key intervals must cover [0, 1]".into()));
        }
        for (i, k) in keys.iter().enumerate() {
            if !(k.lo < k.hi) || !k.center.is_finite() || !(k.sigma > 0.0) {
                return Err(Error::Input(format!("key {i} has an invalid interval {k:?}")));
            }
            if i + 1 < keys.len() && k.hi != keys[i + 1].lo {
                return Err(Error::Input(format!("keys {i} and {} are not adjacent", i + 1)));
            }
        }
        Ok(ClusterLayout {
            posture,
            keys,
            space_key_index,
        })
    }

    /// `n_keys` equal-width keys; sigma is half a key width.
    pub fn uniform(posture: Posture, n_keys: usize, space_key_index: usize) -> Result<Self> {
        if n_keys == 0 {
            return Err(Error::Input("n_keys must be positive".into()));
        }
        let boundaries: Vec<f64> = (0..=n_keys).map(|i| i as f64 / n_keys as f64).collect();
        let keys = boundaries
            .windows(2)
            .map(|w| KeyInterval {
                lo: w[0],
                hi: w[1],
                center: 0.5 * (w[0] + w[1]),
                sigma: 0.5 * (w[1] - w[0]),
            })
            .collect();
        ClusterLayout::new(posture, keys, space_key_index)
    }

    pub fn keys(&self) -> &[KeyInterval] {
        &self.keys
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    pub fn space_key_index(&self) -> usize {
        self.space_key_index
    }

    /// Key indices other than the space key, left to right.
    pub fn letter_key_indices(&self) -> Vec<usize> {
        (0..self.keys.len()).filter(|&i| i != self.space_key_index).collect()
    }

    pub fn key_at(&self, pos: NormalizedPosition) -> usize {
        let v = pos.value();
        // first key whose upper bound exceeds v; v == 1.0 falls through to the last key
        self.keys
            .partition_point(|k| k.hi <= v)
            .min(self.keys.len() - 1)
    }
}

/// A cluster layout with letter groups assigned to its non-space keys in
/// left-to-right order.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyboard {
    cluster_layout: ClusterLayout,
    letter_layout: LetterLayout,
    letter_key: [usize; ALPHABET_LEN],
    key_group: Vec<Option<usize>>,
}

pub const KEYBOARD_FORMAT_VERSION: u32 = 1;

impl Keyboard {
    pub fn new(cluster_layout: ClusterLayout, letter_layout: LetterLayout) -> Result<Self> {
        let letter_keys = cluster_layout.letter_key_indices();
        if letter_keys.len() != letter_layout.n_groups() {
            return Err(Error::Input(format!(
                "{} letter groups cannot be assigned to {} non-space keys",
                letter_layout.n_groups(),
                letter_keys.len()
            )));
        }
        let mut key_group = vec![None; cluster_layout.n_keys()];
        for (g, &k) in letter_keys.iter().enumerate() {
            key_group[k] = Some(g);
        }
        let mut letter_key = [0usize; ALPHABET_LEN];
        for (l, slot) in letter_key.iter_mut().enumerate() {
            *slot = letter_keys[letter_layout.group_of_index(l)];
        }
        Ok(Keyboard {
            cluster_layout,
            letter_layout,
            letter_key,
            key_group,
        })
    }

    /// Equal-width keys with the space key in the middle slot.
    pub fn uniform(posture: Posture, letter_layout: LetterLayout) -> Result<Self> {
        let n_keys = letter_layout.n_groups() + 1;
        let cl = ClusterLayout::uniform(posture, n_keys, n_keys / 2)?;
        Keyboard::new(cl, letter_layout)
    }

    pub fn cluster_layout(&self) -> &ClusterLayout {
        &self.cluster_layout
    }

    pub fn letter_layout(&self) -> &LetterLayout {
        &self.letter_layout
    }

    pub fn posture(&self) -> Posture {
        self.cluster_layout.posture
    }

    pub fn n_keys(&self) -> usize {
        self.cluster_layout.n_keys()
    }

    pub fn space_key_index(&self) -> usize {
        self.cluster_layout.space_key_index()
    }

    pub fn keys(&self) -> &[KeyInterval] {
        self.cluster_layout.keys()
    }

    pub fn normalized_to_key(&self, pos: NormalizedPosition) -> usize {
        self.cluster_layout.key_at(pos)
    }

    pub fn letter_to_key(&self, c: char) -> Result<usize> {
        letter_index(c)
            .map(|i| self.letter_key[i])
            .ok_or_else(|| Error::Input(format!("{c:?} is not a letter a-z")))
    }

    pub fn letter_index_to_key(&self, letter: usize) -> usize {
        self.letter_key[letter]
    }

    /// Letter group on a key, `None` for the space key.
    pub fn key_letters(&self, key: usize) -> Option<&str> {
        self.key_group
            .get(key)
            .copied()
            .flatten()
            .map(|g| self.letter_layout.groups()[g].as_str())
    }

    pub fn is_letter_key(&self, key: usize) -> bool {
        matches!(self.key_group.get(key), Some(Some(_)))
    }

    /// Key indices typed for `word`.
    pub fn signature(&self, word: &str) -> Result<Vec<usize>> {
        word.chars().map(|c| self.letter_to_key(c)).collect()
    }

    pub fn to_document(&self) -> KeyboardDocument {
        KeyboardDocument {
            version: KEYBOARD_FORMAT_VERSION,
            posture: self.posture(),
            space_key_index: self.space_key_index(),
            groups: self.letter_layout.groups().to_vec(),
            keys: self.keys().to_vec(),
        }
    }

    pub fn from_document(doc: KeyboardDocument) -> Result<Self> {
        if doc.version != KEYBOARD_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported keyboard format version {}",
                doc.version
            )));
        }
        let cl = ClusterLayout::new(doc.posture, doc.keys, doc.space_key_index)?;
        Keyboard::new(cl, LetterLayout::new(&doc.groups)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.to_document()).expect("keyboard document is always serializable")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let doc: KeyboardDocument =
            toml::from_str(s).map_err(|e| Error::Input(format!("keyboard file: {e}")))?;
        Keyboard::from_document(doc)
    }
}

/// On-disk form of a [`Keyboard`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyboardDocument {
    pub version: u32,
    pub posture: Posture,
    pub space_key_index: usize,
    pub groups: Vec<String>,
    pub keys: Vec<KeyInterval>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cal(l: f64, r: f64, rr: f64) -> CalibrationProfile {
        CalibrationProfile::new(Posture::Standing, l, r, rr).unwrap()
    }

    #[test]
    fn angle_endpoints_and_rest() {
        let c = cal(-30.0, 0.0, 50.0);
        assert_eq!(c.angle_to_normalized(-30.0).unwrap().value(), 0.0);
        assert_eq!(c.angle_to_normalized(0.0).unwrap().value(), 0.375);
        assert_eq!(c.angle_to_normalized(50.0).unwrap().value(), 1.0);
        assert_eq!(c.angle_to_normalized(-90.0).unwrap().value(), 0.0);
        assert_eq!(c.angle_to_normalized(90.0).unwrap().value(), 1.0);
    }

    #[test]
    fn mean_standing_ranges_put_rest_near_forty_percent() {
        let c = cal(-33.66, 0.0, 50.77);
        let v = c.angle_to_normalized(0.0).unwrap().value();
        assert!((v - 0.399).abs() < 5e-4, "{v}");
    }

    #[test]
    fn bad_calibration_rejected() {
        assert!(CalibrationProfile::new(Posture::Sitting, 0.0, 0.0, 10.0).is_err());
        assert!(CalibrationProfile::new(Posture::Sitting, 10.0, 0.0, 20.0).is_err());
        let raw = CalibrationProfile {
            posture: Posture::Sitting,
            far_left_deg: 5.0,
            rest_deg: 1.0,
            far_right_deg: 9.0,
        };
        assert!(matches!(raw.angle_to_normalized(3.0), Err(Error::Calibration(_))));
    }

    #[test]
    fn uniform_nine_key_lookup() {
        let cl = ClusterLayout::uniform(Posture::Standing, 9, 4).unwrap();
        assert_eq!(cl.key_at(NormalizedPosition::new(0.0).unwrap()), 0);
        assert_eq!(cl.key_at(NormalizedPosition::new(0.5).unwrap()), 4);
        assert_eq!(cl.key_at(NormalizedPosition::new(1.0).unwrap()), 8);
        assert_eq!(cl.key_at(NormalizedPosition::new(1.0 / 9.0).unwrap()), 1);
    }

    #[test]
    fn letter_lookup() {
        let ll = LetterLayout::new(&["abcde", "fghij", "klmno", "pqrst", "uvwxyz"]).unwrap();
        let kb = Keyboard::uniform(Posture::Standing, ll).unwrap();
        // space sits at index 3 of 6 keys, so the second letter group is key 1
        assert_eq!(kb.letter_to_key('h').unwrap(), 1);
        assert_eq!(kb.letter_to_key('a').unwrap(), 0);
        assert_eq!(kb.letter_to_key('p').unwrap(), 4);
        assert!(kb.letter_to_key('A').is_err());
        assert!(kb.letter_to_key('-').is_err());

        let kb = Keyboard::uniform(Posture::Standing, LetterLayout::singletons()).unwrap();
        let z = kb.letter_to_key('z').unwrap();
        assert_eq!(z, kb.cluster_layout().letter_key_indices()[25]);
        assert_eq!(kb.key_letters(z), Some("z"));
    }

    #[test]
    fn letter_layout_validation() {
        assert!(LetterLayout::new(&["abc", "defghijklmnopqrstuvwxyz"]).is_ok());
        assert!(LetterLayout::new(&["acb", "defghijklmnopqrstuvwxyz"]).is_err());
        assert!(LetterLayout::new(&["abc", "", "defghijklmnopqrstuvwxyz"]).is_err());
        assert!(LetterLayout::new(&["abc", "defghijklmnopqrstuvwxy"]).is_err());
        let ll: LetterLayout = "abc|def|ghijklmnopqrstuvwxyz".parse().unwrap();
        assert_eq!(ll.cuts(), vec![3, 6]);
        assert_eq!(LetterLayout::from_cuts(&[3, 6]).unwrap(), ll);
        assert!(LetterLayout::from_cuts(&[6, 3]).is_err());
        assert!(LetterLayout::from_cuts(&[26]).is_err());
    }

    #[test]
    fn keyboard_group_count_must_match() {
        let cl = ClusterLayout::uniform(Posture::Sitting, 4, 1).unwrap();
        let ll = LetterLayout::new(&["abcdefghijklm", "nopqrstuvwxyz"]).unwrap();
        assert!(Keyboard::new(cl, ll).is_err());
    }

    #[test]
    fn keyboard_toml_round_trip() {
        let keys = vec![
            KeyInterval { lo: 0.0, hi: 0.1234567890123, center: 0.05, sigma: 0.0712 },
            KeyInterval { lo: 0.1234567890123, hi: 0.6, center: 0.4, sigma: 0.1 },
            KeyInterval { lo: 0.6, hi: 1.0, center: 0.8, sigma: 0.169 },
        ];
        let cl = ClusterLayout::new(Posture::Sitting, keys, 1).unwrap();
        let kb = Keyboard::new(cl, LetterLayout::new(&["abcdefghijklm", "nopqrstuvwxyz"]).unwrap()).unwrap();
        let text = kb.to_toml_string();
        assert!(text.contains("version = 1"));
        let back = Keyboard::from_toml_str(&text).unwrap();
        assert_eq!(back, kb);
        for (a, b) in back.keys().iter().zip(kb.keys()) {
            assert!((a.lo - b.lo).abs() <= 1e-12 && (a.hi - b.hi).abs() <= 1e-12);
        }
        let bumped = text.replace("version = 1", "version = 7");
        assert!(Keyboard::from_toml_str(&bumped).is_err());
    }

    proptest! {
        #[test]
        fn angle_map_is_monotone(
            left in 1.0f64..60.0, right in 1.0f64..80.0, rest in -20.0f64..20.0,
            a in -120.0f64..120.0, b in -120.0f64..120.0,
        ) {
            let c = CalibrationProfile::new(Posture::Sitting, rest - left, rest, rest + right).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let vlo = c.angle_to_normalized(lo).unwrap().value();
            let vhi = c.angle_to_normalized(hi).unwrap().value();
            prop_assert!(vlo <= vhi);
            prop_assert!((0.0..=1.0).contains(&vlo) && (0.0..=1.0).contains(&vhi));
            prop_assert_eq!(c.angle_to_normalized(rest).unwrap().value(), c.left_proportion());
        }

        #[test]
        fn key_lookup_is_total(n in 2usize..20, pos in 0.0f64..=1.0) {
            let cl = ClusterLayout::uniform(Posture::Standing, n, n / 2).unwrap();
            let k = cl.key_at(NormalizedPosition::new(pos).unwrap());
            let key = cl.keys()[k];
            prop_assert!(key.lo <= pos);
            prop_assert!(pos < key.hi || (k == n - 1 && pos <= key.hi));
        }

        #[test]
        fn random_cuts_make_valid_layouts(mut cuts in proptest::collection::btree_set(1u8..26, 0..25)) {
            let cuts: Vec<u8> = std::mem::take(&mut cuts).into_iter().collect();
            let ll = LetterLayout::from_cuts(&cuts).unwrap();
            prop_assert_eq!(ll.groups().concat(), ALPHABET);
            prop_assert_eq!(LetterLayout::new(ll.groups()).unwrap(), ll.clone());
            prop_assert_eq!(ll.cuts(), cuts);
        }
    }
}
