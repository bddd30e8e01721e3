//! Deterministic synthetic tracking sequences: a textured target drifting
//! over a smooth background, look-alike distractors, and occluders that
//! partially or fully hide the target over configured frame intervals.
//!
//! Everything is a function of the config (including its seed). Per-frame
//! noise uses its own ChaCha stream, so frames render identically in any
//! order.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::eval::write_boxes;
use crate::image::Image;
use crate::tensor::Tensor;

pub const GT_FILE: &str = "groundtruth.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coverage {
    Partial,
    Full,
}

/// Inclusive frame interval during which an occluder covers the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occlusion {
    pub start: usize,
    pub end: usize,
    pub coverage: Coverage,
}

impl Occlusion {
    pub fn contains(&self, t: usize) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

impl fmt::Display for Occlusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.coverage {
            Coverage::Partial => "partial",
            Coverage::Full => "full",
        };
        write!(f, "{}-{}:{c}", self.start, self.end)
    }
}

impl FromStr for Occlusion {
    type Err = Error;

    /// `start-end:partial` or `start-end:full`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad occlusion interval {s:?}, expected start-end:partial|full"));
        let (range, kind) = s.trim().split_once(':').ok_or_else(bad)?;
        let (a, b) = range.split_once('-').ok_or_else(bad)?;
        let coverage = match kind.trim() {
            "partial" => Coverage::Partial,
            "full" => Coverage::Full,
            _ => return Err(bad()),
        };
        Ok(Self {
            start: a.trim().parse().map_err(|_| bad())?,
            end: b.trim().parse().map_err(|_| bad())?,
            coverage,
        })
    }
}

pub fn parse_occlusions(s: &str) -> Result<Vec<Occlusion>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrameFormat {
    #[default]
    Ppm,
    Raw,
}

impl FrameFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FrameFormat::Ppm => "ppm",
            FrameFormat::Raw => "raw",
        }
    }
}

impl FromStr for FrameFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppm" => Ok(Self::Ppm),
            "raw" => Ok(Self::Raw),
            _ => Err(Error::Config(format!("unknown frame format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub target_w: f64,
    pub target_h: f64,
    /// Pixels per frame.
    pub vx: f64,
    pub vy: f64,
    pub jitter_amp: f64,
    /// Frames per jitter cycle.
    pub jitter_period: f64,
    /// Relative size change per frame.
    pub scale_drift: f64,
    pub distractors: usize,
    /// 0 gives unrelated distractor textures, 1 copies the target texture.
    pub distractor_similarity: f64,
    pub occlusions: Vec<Occlusion>,
    /// Standard deviation of per-pixel Gaussian noise.
    pub noise: f64,
    pub format: FrameFormat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 320,
            height: 320,
            frames: 100,
            target_w: 40.0,
            target_h: 32.0,
            vx: 1.0,
            vy: 0.5,
            jitter_amp: 2.0,
            jitter_period: 25.0,
            scale_drift: 0.0,
            distractors: 2,
            distractor_similarity: 0.5,
            occlusions: Vec::new(),
            noise: 0.01,
            format: FrameFormat::Ppm,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width < 16 || self.height < 16 || self.frames == 0 {
            return bad(format!("frame size {}×{} or length {} too small", self.width, self.height, self.frames));
        }
        if !(self.target_w >= 4.0 && self.target_h >= 4.0)
            || 2.0 * self.target_w > self.width as f64
            || 2.0 * self.target_h > self.height as f64
        {
            return bad(format!("target {}×{} does not fit the frame", self.target_w, self.target_h));
        }
        for v in [self.vx, self.vy, self.jitter_amp, self.scale_drift] {
            if !v.is_finite() {
                return bad("motion parameters must be finite".into());
            }
        }
        if !(self.jitter_period > 0.0) || !(self.noise >= 0.0) || self.scale_drift.abs() >= 0.1 {
            return bad("jitter_period must be positive, noise non-negative, |scale_drift| < 0.1".into());
        }
        if !(0.0..=1.0).contains(&self.distractor_similarity) {
            return bad(format!("distractor_similarity {} outside [0, 1]", self.distractor_similarity));
        }
        let mut occ = self.occlusions.clone();
        occ.sort_by_key(|o| o.start);
        for (i, o) in occ.iter().enumerate() {
            if o.start == 0 || o.start > o.end || o.end >= self.frames {
                return bad(format!("occlusion {o} outside frames 1..{}", self.frames - 1));
            }
            if i > 0 && occ[i - 1].end >= o.start {
                return bad(format!("occlusions {} and {o} overlap", occ[i - 1]));
            }
        }
        Ok(())
    }
}

/// Two-colour sinusoidal stripe pattern with a checker overlay, in object
/// coordinates `(u, v) ∈ [0, 1)²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub base: [f32; 3],
    pub accent: [f32; 3],
    pub fu: f32,
    pub fv: f32,
    pub phase: f32,
    pub checker: f32,
}

impl Texture {
    pub fn solid(rgb: [f32; 3]) -> Self {
        Self { base: rgb, accent: rgb, fu: 0.0, fv: 0.0, phase: 0.0, checker: 0.0 }
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut color = || [rng.gen_range(0.0..1.0f32), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let (base, accent) = (color(), color());
        Self {
            base,
            accent,
            fu: rng.gen_range(1.0..3.0),
            fv: rng.gen_range(0.0..2.0),
            phase: rng.gen_range(0.0..std::f32::consts::TAU),
            checker: rng.gen_range(0.2..0.5),
        }
    }

    fn lerp(&self, other: &Texture, s: f32) -> Texture {
        let l = |a: f32, b: f32| a + (b - a) * s;
        let l3 = |a: [f32; 3], b: [f32; 3]| [l(a[0], b[0]), l(a[1], b[1]), l(a[2], b[2])];
        Texture {
            base: l3(self.base, other.base),
            accent: l3(self.accent, other.accent),
            fu: l(self.fu, other.fu),
            fv: l(self.fv, other.fv),
            phase: l(self.phase, other.phase),
            checker: l(self.checker, other.checker),
        }
    }

    fn at(&self, u: f32, v: f32) -> [f32; 3] {
        let s = 0.5 + 0.5 * (std::f32::consts::TAU * (self.fu * u + self.fv * v) + self.phase).sin();
        let cell = ((u * 3.0).floor() as i32 + (v * 3.0).floor() as i32).rem_euclid(2) as f32;
        let m = (s * (1.0 - self.checker) + cell * self.checker).clamp(0.0, 1.0);
        [0, 1, 2].map(|c| self.base[c] * (1.0 - m) + self.accent[c] * m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    Partial,
    Hidden,
}

/// Scene layout of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameState {
    pub target: BBox,
    pub distractors: Vec<BBox>,
    pub occluder: Option<BBox>,
    pub visibility: Visibility,
}

#[derive(Clone, Debug)]
struct Background {
    base: [f32; 3],
    grad: [f32; 2],
    waves: Vec<(f32, f32, f32, f32)>,
}

impl Background {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let g = rng.gen_range(0.35..0.55f32);
        let base = [g + rng.gen_range(-0.05..0.05), g + rng.gen_range(-0.05..0.05), g + rng.gen_range(-0.05..0.05)];
        let grad = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        let waves = (0..3)
            .map(|_| (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.0..6.3), rng.gen_range(0.01..0.04)))
            .collect();
        Self { base, grad, waves }
    }

    fn at(&self, u: f32, v: f32) -> [f32; 3] {
        let mut d = self.grad[0] * (u - 0.5) + self.grad[1] * (v - 0.5);
        for &(fu, fv, ph, amp) in &self.waves {
            d += amp * (std::f32::consts::TAU * (fu * u + fv * v) + ph).sin();
        }
        self.base.map(|b| b + d)
    }
}

/// Mirrors `x` back into `[lo, hi]`.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return lo;
    }
    let m = (x - lo).rem_euclid(2.0 * span);
    lo + if m > span { 2.0 * span - m } else { m }
}

/// Occluder rectangle covering `target` fully (with a margin) or its left
/// two thirds.
fn occluder_for(target: &BBox, coverage: Coverage) -> BBox {
    let m = 4.0;
    match coverage {
        Coverage::Full => BBox::new(target.x - m, target.y - m, target.w + 2.0 * m, target.h + 2.0 * m),
        Coverage::Partial => BBox::new(target.x - m, target.y - m, target.w * 0.65 + m, target.h + 2.0 * m),
    }
}

/// Pixel `(x, y)` belongs to `b` when its centre does (half-open edges).
fn covers(b: &BBox, x: usize, y: usize) -> bool {
    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
    px >= b.x && px < b.x2() && py >= b.y && py < b.y2()
}

#[derive(Clone, Debug)]
pub struct SynthSequence {
    cfg: SynthConfig,
    background: Background,
    target_texture: Texture,
    distractor_textures: Vec<Texture>,
    occluder_texture: Texture,
    states: Vec<FrameState>,
}

impl SynthSequence {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (fw, fh) = (cfg.width as f64, cfg.height as f64);
        let background = Background::random(&mut rng);
        let target_texture = Texture::random(&mut rng);
        let s = cfg.distractor_similarity as f32;
        let distractor_textures: Vec<Texture> =
            (0..cfg.distractors).map(|_| Texture::random(&mut rng).lerp(&target_texture, s)).collect();
        let occluder_texture = Texture {
            base: [0.2, 0.22, 0.3],
            accent: [0.3, 0.3, 0.38],
            fu: 0.0,
            fv: 4.0,
            phase: 0.0,
            checker: 0.0,
        };

        let c0 = (rng.gen_range(0.3..0.7) * fw, rng.gen_range(0.3..0.7) * fh);
        let jitter_phase = rng.gen_range(0.0..TAU);
        let target_at = |t: usize| {
            let tf = t as f64;
            let scale = (1.0 + cfg.scale_drift).powf(tf).clamp(0.5, 2.0);
            let (w, h) = (cfg.target_w * scale, cfg.target_h * scale);
            let jx = cfg.jitter_amp * (TAU * tf / cfg.jitter_period + jitter_phase).sin();
            let jy = cfg.jitter_amp * (TAU * tf / (1.3 * cfg.jitter_period) + jitter_phase).cos();
            let cx = reflect(c0.0 + cfg.vx * tf + jx, w / 2.0 + 2.0, fw - w / 2.0 - 2.0);
            let cy = reflect(c0.1 + cfg.vy * tf + jy, h / 2.0 + 2.0, fh - h / 2.0 - 2.0);
            BBox::from_center(cx, cy, w, h)
        };

        // distractors start clear of the target
        let t0 = target_at(0);
        let speed = cfg.vx.hypot(cfg.vy);
        let mut movers = Vec::new();
        for _ in 0..cfg.distractors {
            let k = rng.gen_range(0.8..1.2);
            let (w, h) = (cfg.target_w * k, cfg.target_h * k);
            let mut c = (0.0, 0.0);
            for _ in 0..100 {
                c = (rng.gen_range(w / 2.0..fw - w / 2.0), rng.gen_range(h / 2.0..fh - h / 2.0));
                if crate::bbox::iou(&BBox::from_center(c.0, c.1, w, h), &t0) == 0.0
                    && (c.0 - t0.center().0).hypot(c.1 - t0.center().1) > 1.5 * t0.diag()
                {
                    break;
                }
            }
            let sp = rng.gen_range(0.5..1.5) * speed + 0.5;
            let dir = rng.gen_range(0.0..TAU);
            movers.push((c, (sp * dir.cos(), sp * dir.sin()), (w, h)));
        }

        let states = (0..cfg.frames)
            .map(|t| {
                let target = target_at(t);
                let tf = t as f64;
                let distractors = movers
                    .iter()
                    .map(|&((cx, cy), (vx, vy), (w, h))| {
                        BBox::from_center(
                            reflect(cx + vx * tf, w / 2.0, fw - w / 2.0),
                            reflect(cy + vy * tf, h / 2.0, fh - h / 2.0),
                            w,
                            h,
                        )
                    })
                    .collect();
                let occ = cfg.occlusions.iter().find(|o| o.contains(t));
                let occluder = occ.map(|o| occluder_for(&target, o.coverage));
                let visibility = match occ.map(|o| o.coverage) {
                    None => Visibility::Visible,
                    Some(Coverage::Partial) => Visibility::Partial,
                    Some(Coverage::Full) => Visibility::Hidden,
                };
                FrameState { target, distractors, occluder, visibility }
            })
            .collect();
        Ok(Self { cfg: cfg.clone(), background, target_texture, distractor_textures, occluder_texture, states })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &FrameState {
        &self.states[t]
    }

    /// True target boxes, including frames where it is hidden.
    pub fn target_boxes(&self) -> Vec<BBox> {
        self.states.iter().map(|s| s.target).collect()
    }

    /// Annotation as written to disk: hidden frames become `0,0,0,0`.
    pub fn ground_truth(&self) -> Vec<BBox> {
        self.states
            .iter()
            .map(|s| match s.visibility {
                Visibility::Hidden => BBox::new(0.0, 0.0, 0.0, 0.0),
                _ => s.target,
            })
            .collect()
    }

    pub fn render(&self, t: usize) -> Image {
        self.render_with(t, &self.target_texture)
    }

    /// Renders frame `t` with the target painted in `target_texture`.
    pub fn render_with(&self, t: usize, target_texture: &Texture) -> Image {
        let (w, h) = (self.cfg.width, self.cfg.height);
        let st = &self.states[t];
        let mut rgb = vec![[0.0f32; 3]; w * h];
        let (fw, fh) = (w as f32, h as f32);
        for y in 0..h {
            for x in 0..w {
                rgb[y * w + x] = self.background.at((x as f32 + 0.5) / fw, (y as f32 + 0.5) / fh);
            }
        }
        let paint = |rgb: &mut Vec<[f32; 3]>, b: &BBox, tex: &Texture| {
            let x0 = b.x.floor().max(0.0) as usize;
            let y0 = b.y.floor().max(0.0) as usize;
            let x1 = (b.x2().ceil().max(0.0) as usize).min(w);
            let y1 = (b.y2().ceil().max(0.0) as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    if covers(b, x, y) {
                        let u = ((x as f64 + 0.5 - b.x) / b.w) as f32;
                        let v = ((y as f64 + 0.5 - b.y) / b.h) as f32;
                        rgb[y * w + x] = tex.at(u, v);
                    }
                }
            }
        };
        for (b, tex) in st.distractors.iter().zip(&self.distractor_textures) {
            paint(&mut rgb, b, tex);
        }
        paint(&mut rgb, &st.target, target_texture);
        if let Some(o) = &st.occluder {
            paint(&mut rgb, o, &self.occluder_texture);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(t as u64 + 1);
        let noise = Normal::new(0.0f32, self.cfg.noise as f32).expect("noise is validated");
        let mut data = vec![0.0f32; 3 * w * h];
        for c in 0..3 {
            for i in 0..w * h {
                let n = if self.cfg.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                data[c * w * h + i] = (rgb[i][c] + n).clamp(0.0, 1.0);
            }
        }
        Image::new(Tensor::new(vec![3, h, w], data).expect("frame shape")).expect("finite frame")
    }

    /// Fraction of target pixels visible in frame `t`, measured from the
    /// rendered images alone: pixels that change when the target is painted
    /// black instead of white.
    pub fn pixel_audit(&self, t: usize) -> f64 {
        let a = self.render_with(t, &Texture::solid([0.0; 3]));
        let b = self.render_with(t, &Texture::solid([1.0; 3]));
        let target = &self.states[t].target;
        let (mut inside, mut changed) = (0usize, 0usize);
        for y in 0..self.cfg.height {
            for x in 0..self.cfg.width {
                if covers(target, x, y) {
                    inside += 1;
                    changed += usize::from(a.rgb(y, x) != b.rgb(y, x));
                }
            }
        }
        changed as f64 / inside.max(1) as f64
    }

    pub fn frame_path(dir: &Path, t: usize, format: FrameFormat) -> PathBuf {
        dir.join(format!("{t:05}.{}", format.extension()))
    }

    /// Writes numbered frames and the annotation file into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for t in 0..self.len() {
            let img = self.render(t);
            let path = Self::frame_path(dir, t, self.cfg.format);
            match self.cfg.format {
                FrameFormat::Ppm => img.write_ppm(&path)?,
                FrameFormat::Raw => img.write_raw(&path)?,
            }
        }
        write_boxes(&dir.join(GT_FILE), &self.ground_truth())
    }
}
