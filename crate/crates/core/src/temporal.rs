//! Per-sequence temporal state: box smoothing, box correction and the
//! dynamic template FIFO, run in exactly that order once per frame.
//!
//! The bank is generic over its entry type so the state machine can be
//! driven with cheap stand-ins (ids, boxes) as well as real template
//! features.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::bbox::BBox;
use crate::error::{Error, Result};

pub const DYNAMIC_SLOTS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    /// Weight of the current prediction when blending with the previous box.
    pub alpha: f64,
    /// Displacement threshold as a fraction of the previous box diagonal.
    pub theta_d: f64,
    /// Area-ratio threshold (> 1).
    pub theta_s: f64,
    pub update_interval: usize,
    pub conf_th: f64,
    pub enable_smoothing: bool,
    pub enable_correction: bool,
    /// Also reject shrinkage below `1 / theta_s`.
    pub two_sided_scale: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            theta_d: 0.5,
            theta_s: 2.0,
            update_interval: 10,
            conf_th: 0.6,
            enable_smoothing: true,
            enable_correction: true,
            two_sided_scale: false,
        }
    }
}

impl TrackerConfig {
    /// Smoothing, correction and template updates all switched off.
    pub fn disabled() -> Self {
        Self { enable_smoothing: false, enable_correction: false, conf_th: f64::INFINITY, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.theta_d > 0.0) || !self.theta_d.is_finite() {
            return Err(Error::Config(format!("theta_d {} must be positive", self.theta_d)));
        }
        if !(self.theta_s > 1.0) {
            return Err(Error::Config(format!("theta_s {} must exceed 1", self.theta_s)));
        }
        if self.update_interval == 0 {
            return Err(Error::Config("update_interval must be at least 1".into()));
        }
        // values above 1 (including +inf) disable updates
        if !(self.conf_th >= 0.0) {
            return Err(Error::Config(format!("conf_th {} must be non-negative", self.conf_th)));
        }
        Ok(())
    }
}

/// Blend of the current and previous box, componentwise over (x, y, w, h).
pub fn smooth_box(y_i: &BBox, s_prev: Option<&BBox>, cfg: &TrackerConfig) -> BBox {
    match s_prev {
        Some(p) if cfg.enable_smoothing => {
            let a = cfg.alpha;
            let [x, y, w, h] = y_i.as_array();
            let [px, py, pw, ph] = p.as_array();
            BBox::new(
                a * x + (1.0 - a) * px,
                a * y + (1.0 - a) * py,
                a * w + (1.0 - a) * pw,
                a * h + (1.0 - a) * ph,
            )
        }
        _ => *y_i,
    }
}

/// Centre displacement and area ratio of `y_is` relative to `s_prev`.
pub fn deviation(y_is: &BBox, s_prev: &BBox) -> Result<(f64, f64)> {
    if !(s_prev.area() > 0.0) {
        return Err(Error::Invariant(format!("previous box {s_prev} has zero area")));
    }
    let (cx, cy) = y_is.center();
    let (px, py) = s_prev.center();
    Ok(((cx - px).hypot(cy - py), y_is.area() / s_prev.area()))
}

/// True when `y_is` jumps or grows too far from `s_prev`.
pub fn is_implausible(y_is: &BBox, s_prev: &BBox, cfg: &TrackerConfig) -> Result<bool> {
    let (d, r) = deviation(y_is, s_prev)?;
    let limit = cfg.theta_d * s_prev.diag();
    Ok(d > limit || r > cfg.theta_s || (cfg.two_sided_scale && r < 1.0 / cfg.theta_s))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slot<T> {
    /// Frame the template was extracted from.
    pub source_frame: usize,
    pub entry: T,
}

/// Static template plus a FIFO of four dynamic templates (oldest first).
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateBank<T> {
    t1: Slot<T>,
    dynamic: VecDeque<Slot<T>>,
}

impl<T: Clone> TemplateBank<T> {
    /// Every dynamic slot starts as a copy of the static template.
    pub fn new(t1: T, source_frame: usize) -> Self {
        let t1 = Slot { source_frame, entry: t1 };
        let dynamic = std::iter::repeat_n(t1.clone(), DYNAMIC_SLOTS).collect();
        Self { t1, dynamic }
    }

    pub fn static_slot(&self) -> &Slot<T> {
        &self.t1
    }

    pub fn dynamic_slots(&self) -> impl Iterator<Item = &Slot<T>> {
        self.dynamic.iter()
    }

    /// T₁ through T₅.
    pub fn slots(&self) -> impl Iterator<Item = &Slot<T>> {
        std::iter::once(&self.t1).chain(self.dynamic.iter())
    }

    /// The static template followed by the newest `count - 1` dynamic ones.
    pub fn active(&self, count: usize) -> Vec<&T> {
        let dyn_count = count.clamp(1, DYNAMIC_SLOTS + 1) - 1;
        std::iter::once(&self.t1.entry)
            .chain(self.dynamic.iter().skip(DYNAMIC_SLOTS - dyn_count).map(|s| &s.entry))
            .collect()
    }

    /// Drops the oldest dynamic template and appends `slot`.
    pub fn push(&mut self, slot: Slot<T>) {
        self.dynamic.pop_front();
        self.dynamic.push_back(slot);
    }

    /// Overwrites all dynamic templates with `slot`.
    pub fn reset_dynamic(&mut self, slot: Slot<T>) {
        for d in self.dynamic.iter_mut() {
            *d = slot.clone();
        }
    }

    pub fn provenance(&self) -> Vec<usize> {
        self.slots().map(|s| s.source_frame).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Smooth,
    Correct,
    Update,
}

impl Phase {
    fn name(self) -> &'static str {
        match self {
            Phase::Smooth => "smooth",
            Phase::Correct => "correct",
            Phase::Update => "update",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Correction {
    pub y_ic: BBox,
    /// The prediction was rejected and a previous box reinstated.
    pub reinstated: bool,
    /// Dynamic templates were overwritten with a re-extraction at `y_ic`.
    pub templates_reset: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState<T> {
    s_prev: Option<BBox>,
    s_stable: Option<BBox>,
    frame_index: usize,
    bank: TemplateBank<T>,
    phase: Phase,
}

impl<T: Clone> TrackerState<T> {
    /// Fresh state with no box history, about to process `frame_index`.
    pub fn new(bank: TemplateBank<T>, frame_index: usize) -> Self {
        Self { s_prev: None, s_stable: None, frame_index, bank, phase: Phase::Smooth }
    }

    /// State after initializing on a known box at frame 0: that box is both
    /// the previous and the last stable box, and frame 1 is next.
    pub fn initialized(init: BBox, bank: TemplateBank<T>) -> Result<Self> {
        if !init.is_valid() {
            return Err(Error::Validation(format!("initial box {init} is not valid")));
        }
        Ok(Self { s_prev: Some(init), s_stable: Some(init), frame_index: 1, bank, phase: Phase::Smooth })
    }

    pub fn s_prev(&self) -> Option<BBox> {
        self.s_prev
    }

    pub fn s_stable(&self) -> Option<BBox> {
        self.s_stable
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn bank(&self) -> &TemplateBank<T> {
        &self.bank
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn expect_phase(&self, want: Phase) -> Result<()> {
        if self.phase != want {
            return Err(Error::OutOfOrder { expected: self.phase.name(), got: want.name() });
        }
        Ok(())
    }

    /// Box smoothing for the current frame.
    pub fn smooth(&mut self, y_i: &BBox, cfg: &TrackerConfig) -> Result<BBox> {
        self.expect_phase(Phase::Smooth)?;
        let y_is = smooth_box(y_i, self.s_prev.as_ref(), cfg);
        self.phase = Phase::Correct;
        Ok(y_is)
    }

    /// Box correction. On rejection the dynamic templates are re-extracted
    /// at the reinstated box via `extract`; if that fails the bank is kept.
    pub fn correct(
        &mut self,
        y_is: &BBox,
        cfg: &TrackerConfig,
        extract: impl FnOnce(&BBox) -> Result<T>,
    ) -> Result<Correction> {
        self.expect_phase(Phase::Correct)?;
        let mut out = Correction { y_ic: *y_is, reinstated: false, templates_reset: false };
        if let (true, Some(prev)) = (cfg.enable_correction, self.s_prev) {
            if is_implausible(y_is, &prev, cfg)? {
                out.y_ic = self.s_stable.unwrap_or(prev);
                out.reinstated = true;
                match extract(&out.y_ic) {
                    Ok(entry) => {
                        self.bank.reset_dynamic(Slot { source_frame: self.frame_index, entry });
                        out.templates_reset = true;
                    }
                    Err(e) => warn!("frame {}: template reset skipped: {e}", self.frame_index),
                }
            } else {
                self.s_stable = Some(*y_is);
            }
        }
        self.s_prev = Some(out.y_ic);
        self.phase = Phase::Update;
        Ok(out)
    }

    /// Dynamic template update; advances to the next frame. Returns whether
    /// a new template entered the bank.
    pub fn update(
        &mut self,
        y_ic: &BBox,
        conf: f64,
        cfg: &TrackerConfig,
        extract: impl FnOnce(&BBox) -> Result<T>,
    ) -> Result<bool> {
        self.expect_phase(Phase::Update)?;
        let mut pushed = false;
        if self.frame_index % cfg.update_interval == 0 && conf >= cfg.conf_th {
            match extract(y_ic) {
                Ok(entry) => {
                    self.bank.push(Slot { source_frame: self.frame_index, entry });
                    pushed = true;
                }
                Err(e) => warn!("frame {}: template update skipped: {e}", self.frame_index),
            }
        }
        self.frame_index += 1;
        self.phase = Phase::Smooth;
        Ok(pushed)
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            frame_index: self.frame_index,
            s_prev: self.s_prev,
            s_stable: self.s_stable,
            provenance: self.bank.provenance(),
        }
    }
}

/// Text-serializable view of a [`TrackerState`]:
///
/// ```text
/// frame_index 12
/// s_prev 10,20,30,40
/// s_stable none
/// slots 0 0 0 10 10
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct StateSnapshot {
    pub frame_index: usize,
    pub s_prev: Option<BBox>,
    pub s_stable: Option<BBox>,
    /// Source frame of T₁..T₅.
    pub provenance: Vec<usize>,
}

impl fmt::Display for StateSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |b: &Option<BBox>| b.map_or("none".to_string(), |b| b.to_string());
        writeln!(f, "frame_index {}", self.frame_index)?;
        writeln!(f, "s_prev {}", opt(&self.s_prev))?;
        writeln!(f, "s_stable {}", opt(&self.s_stable))?;
        let slots: Vec<String> = self.provenance.iter().map(|v| v.to_string()).collect();
        writeln!(f, "slots {}", slots.join(" "))
    }
}

impl FromStr for StateSnapshot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("state snapshot: {m}"));
        let mut fields = std::collections::HashMap::new();
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(' ').ok_or_else(|| bad(line))?;
            fields.insert(k, v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing {k}")));
        let opt_box = |v: &str| -> Result<Option<BBox>> {
            if v == "none" {
                return Ok(None);
            }
            let vals: Vec<f64> = v.split(',').map(|t| t.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad(v))?;
            match vals[..] {
                [x, y, w, h] => Ok(Some(BBox::new(x, y, w, h))),
                _ => Err(bad(v)),
            }
        };
        Ok(Self {
            frame_index: get("frame_index")?.parse().map_err(|_| bad("frame_index"))?,
            s_prev: opt_box(get("s_prev")?)?,
            s_stable: opt_box(get("s_stable")?)?,
            provenance: get("slots")?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad(t)))
                .collect::<Result<_>>()?,
        })
    }
}
