//! Gesture recognition from per-foot sensor frames.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CalibrationProfile, NormalizedPosition, Posture};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    fn slot(self) -> usize {
        match self {
            Foot::Left => 0,
            Foot::Right => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    #[serde(rename = "timestamp")]
    pub timestamp_ms: u64,
    pub foot: Foot,
    pub yaw_deg: f64,
    pub forward_disp_m: f64,
    #[serde(rename = "ff")]
    pub forefoot_contact: bool,
    #[serde(rename = "rf")]
    pub rearfoot_contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GestureKind {
    ForefootTap,
    RearfootTap,
    FlatForward,
    FlatBackward,
    CursorMove { position: NormalizedPosition },
}

impl GestureKind {
    pub fn name(&self) -> &'static str {
        match self {
            GestureKind::ForefootTap => "forefoot_tap",
            GestureKind::RearfootTap => "rearfoot_tap",
            GestureKind::FlatForward => "flat_forward",
            GestureKind::FlatBackward => "flat_backward",
            GestureKind::CursorMove { .. } => "cursor_move",
        }
    }

    pub fn is_command(&self) -> bool {
        !matches!(self, GestureKind::CursorMove { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    #[serde(flatten)]
    pub kind: GestureKind,
    pub foot: Foot,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    UPStand,
    UPSit,
    BPStand,
    BPSit,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::UPStand, Strategy::UPSit, Strategy::BPStand, Strategy::BPSit];

    pub fn posture(self) -> Posture {
        match self {
            Strategy::UPStand | Strategy::BPStand => Posture::Standing,
            Strategy::UPSit | Strategy::BPSit => Posture::Sitting,
        }
    }

    pub fn navigation_foot(self) -> Foot {
        Foot::Right
    }

    pub fn command_foot(self) -> Foot {
        match self {
            Strategy::UPStand | Strategy::UPSit => Foot::Right,
            Strategy::BPStand | Strategy::BPSit => Foot::Left,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub tap_max_ms: u64,
    pub tap_min_air_ms: u64,
    pub slide_threshold_m: f64,
    pub slide_window_ms: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig::new(Strategy::UPStand)
    }
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        StrategyConfig {
            strategy,
            tap_max_ms: 500,
            tap_min_air_ms: 30,
            slide_threshold_m: 0.05,
            slide_window_ms: 600,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_max_ms == 0 || !(self.slide_threshold_m > 0.0) || self.slide_window_ms == 0 {
            return Err(Error::Config("debounce parameters must be positive".into()));
        }
        Ok(())
    }
}

/// On/off history of one contact sensor.
#[derive(Debug, Clone, Default, PartialEq)]
struct ContactTracker {
    on: Option<bool>,
    on_since: u64,
    off_since: Option<u64>,
    air_ok: bool,
    suppressed: bool,
}

impl ContactTracker {
    /// True when this frame completes a tap.
    fn update(&mut self, t: u64, contact: bool, cfg: &StrategyConfig) -> bool {
        let mut fired = false;
        match (self.on, contact) {
            (Some(true), true) => {}
            (_, true) => {
                self.air_ok = self.off_since.is_some_and(|s| t - s >= cfg.tap_min_air_ms);
                self.on_since = t;
                self.suppressed = false;
            }
            (Some(true), false) => {
                fired = !self.suppressed && self.air_ok && t - self.on_since <= cfg.tap_max_ms;
                self.off_since = Some(t);
            }
            (None, false) => self.off_since = Some(t),
            (Some(false), false) => {}
        }
        self.on = Some(contact);
        fired
    }

    fn is_on(&self) -> bool {
        self.on == Some(true)
    }
}

/// The gesture state machine for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureEngine {
    cfg: StrategyConfig,
    cal: CalibrationProfile,
    last_ts: [Option<u64>; 2],
    cursor: Option<NormalizedPosition>,
    last_yaw: Option<f64>,
    resync: bool,
    forefoot: ContactTracker,
    rearfoot: ContactTracker,
    window: VecDeque<(u64, f64)>,
    slid: bool,
}

impl GestureEngine {
    pub fn new(cfg: StrategyConfig, cal: CalibrationProfile) -> Result<Self> {
        cfg.validate()?;
        cal.validate()?;
        if cal.posture != cfg.strategy.posture() {
            return Err(Error::Config(format!(
                "{} calibration used with {} strategy",
                cal.posture, cfg.strategy
            )));
        }
        Ok(GestureEngine {
            cfg,
            cal,
            last_ts: [None; 2],
            cursor: None,
            last_yaw: None,
            resync: true,
            forefoot: ContactTracker::default(),
            rearfoot: ContactTracker::default(),
            window: VecDeque::new(),
            slid: false,
        })
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.cfg
    }

    pub fn calibration(&self) -> &CalibrationProfile {
        &self.cal
    }

    pub fn cursor(&self) -> Option<NormalizedPosition> {
        self.cursor
    }

    /// Installs a new calibration; the next navigation frame re-emits the cursor.
    pub fn recalibrate(&mut self, cal: CalibrationProfile) -> Result<()> {
        cal.validate()?;
        if cal.posture != self.cfg.strategy.posture() {
            return Err(Error::Config(format!("{} calibration used with {} strategy", cal.posture, self.cfg.strategy)));
        }
        self.cal = cal;
        self.resync = true;
        Ok(())
    }

    /// Drops contact episodes and slide windows; keeps the cursor.
    pub fn reset(&mut self) {
        self.forefoot = ContactTracker::default();
        self.rearfoot = ContactTracker::default();
        self.window.clear();
        self.slid = false;
        self.resync = true;
    }

    pub fn process_frame(&mut self, frame: &SensorFrame) -> Result<Vec<GestureEvent>> {
        let slot = frame.foot.slot();
        if let Some(last) = self.last_ts[slot] {
            if frame.timestamp_ms <= last {
                return Err(Error::Sequencing(format!(
                    "{:?} frame at {} ms after {} ms",
                    frame.foot, frame.timestamp_ms, last
                )));
            }
        }
        let strategy = self.cfg.strategy;
        let nav = frame.foot == strategy.navigation_foot();
        let cmd = frame.foot == strategy.command_foot();
        // validate before mutating anything
        let position = if nav {
            Some(self.cal.angle_to_normalized(frame.yaw_deg)?)
        } else {
            None
        };
        if cmd && !frame.forward_disp_m.is_finite() {
            return Err(Error::Input("non-finite forward displacement".into()));
        }
        self.last_ts[slot] = Some(frame.timestamp_ms);

        let t = frame.timestamp_ms;
        let mut events = Vec::new();
        let mut emit = |kind| events.push(GestureEvent { kind, foot: frame.foot, timestamp: t });
        if let Some(p) = position {
            if self.resync || self.last_yaw != Some(frame.yaw_deg) {
                self.resync = false;
                self.last_yaw = Some(frame.yaw_deg);
                self.cursor = Some(p);
                emit(GestureKind::CursorMove { position: p });
            }
        }
        if cmd {
            if self.forefoot.update(t, frame.forefoot_contact, &self.cfg) {
                emit(GestureKind::ForefootTap);
            }
            if self.rearfoot.update(t, frame.rearfoot_contact, &self.cfg) {
                emit(GestureKind::RearfootTap);
            }
            if self.forefoot.is_on() && self.rearfoot.is_on() {
                if let Some(kind) = self.slide(t, frame.forward_disp_m) {
                    emit(kind);
                }
            } else {
                self.window.clear();
                self.slid = false;
            }
        }
        Ok(events)
    }

    fn slide(&mut self, t: u64, d: f64) -> Option<GestureKind> {
        if self.slid {
            return None;
        }
        self.window.push_back((t, d));
        while self.window.front().is_some_and(|&(t0, _)| t - t0 > self.cfg.slide_window_ms) {
            self.window.pop_front();
        }
        let delta = self
            .window
            .iter()
            .map(|&(_, d0)| d - d0)
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))?;
        if delta.abs() + 1e-12 < self.cfg.slide_threshold_m {
            return None;
        }
        self.slid = true;
        self.window.clear();
        self.forefoot.suppressed = true;
        self.rearfoot.suppressed = true;
        Some(if delta > 0.0 {
            GestureKind::FlatForward
        } else {
            GestureKind::FlatBackward
        })
    }
}

pub fn read_frame_log<R: BufRead>(reader: R) -> Result<Vec<SensorFrame>> {
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        frames.push(serde_json::from_str(t).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(frames)
}

pub fn write_frame_log<W: Write>(mut w: W, frames: &[SensorFrame]) -> Result<()> {
    for f in frames {
        writeln!(w, "{}", serde_json::to_string(f).expect("frames serialize"))?;
    }
    Ok(())
}

/// Runs a whole frame stream through a fresh engine.
pub fn replay(cfg: StrategyConfig, cal: CalibrationProfile, frames: &[SensorFrame]) -> Result<Vec<GestureEvent>> {
    let mut engine = GestureEngine::new(cfg, cal)?;
    let mut out = Vec::new();
    for f in frames {
        out.extend(engine.process_frame(f)?);
    }
    Ok(out)
}
