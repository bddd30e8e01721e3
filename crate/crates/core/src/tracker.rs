//! End-to-end tracker: model parameters, run configuration, and the
//! per-frame pipeline
//! crop → backbone → adapt → TPN → fuse → predict → smooth → correct → update.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{DEFAULT_HEADS, MODEL_DIM};
use crate::backbone::{extract_pyramid, BackboneParams};
use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::fusion::{
    combine_templates, cross_correlation, fuse, CombineMode, FusedFeatures, FusionMode, FusionParams, TEMPLATE_SLOTS,
};
use crate::head::{predict, HeadParams, LossWeights, Prediction, HEAD_HIDDEN};
use crate::image::{CropWindow, Image};
use crate::params::{ParamStore, Params};
use crate::temporal::{Correction, TemplateBank, TrackerConfig, TrackerState};
use crate::tensor::FeatureMap;
use crate::tpn::{adapt_features, tpn_forward, AdaptParams, TpnParams};

pub const SEARCH_SIZE: usize = 320;
pub const TEMPLATE_SIZE: usize = 80;
pub const SEARCH_CONTEXT: f64 = 4.0;
pub const TEMPLATE_CONTEXT: f64 = 2.0;
/// Smallest box side the tracker will emit, in pixels.
pub const MIN_BOX_SIDE: f64 = 4.0;

/// Head fine-tuning settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    /// Training samples drawn per configuration.
    pub samples: usize,
    /// Number of synthetic training sequences.
    pub sequences: usize,
    /// Seed of the training sequences and sample order.
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            lr: 1e-3,
            batch: 4,
            samples: 160,
            sequences: 8,
            seed: 1_000_003,
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch == 0 || self.samples == 0 || self.sequences == 0 || !(self.lr > 0.0) {
            return Err(Error::Config("train batch, samples, sequences and lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    /// Master switch for smoothing, correction and template updates.
    pub temporal: bool,
    pub fusion: FusionMode,
    pub combine: CombineMode,
    /// Active templates: the static one plus the newest `templates - 1`
    /// dynamic ones.
    pub templates: usize,
    pub mpa: bool,
    /// Initial modulation gain of every MPA block.
    pub gamma: f32,
    pub model_seed: u64,
    pub heads: usize,
    pub head_hidden: usize,
    pub search_context: f64,
    pub template_context: f64,
    /// Trained parameter file to load over the seeded initialization.
    pub params: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            temporal: true,
            fusion: FusionMode::Attention,
            combine: CombineMode::Concat,
            templates: TEMPLATE_SLOTS,
            mpa: true,
            gamma: 1.0,
            model_seed: 7,
            heads: DEFAULT_HEADS,
            head_hidden: HEAD_HIDDEN,
            search_context: SEARCH_CONTEXT,
            template_context: TEMPLATE_CONTEXT,
            params: None,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Temporal module off, a single template, cross-correlation matching
    /// and plain pooling attention.
    pub fn baseline() -> Self {
        Self {
            temporal: false,
            fusion: FusionMode::CrossCorrelation,
            templates: 1,
            mpa: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.train.validate()?;
        if !(1..=TEMPLATE_SLOTS).contains(&self.templates) {
            return Err(Error::Config(format!("template count {} outside 1..={TEMPLATE_SLOTS}", self.templates)));
        }
        if self.heads == 0 || MODEL_DIM % self.heads != 0 {
            return Err(Error::Config(format!("{} heads do not divide {MODEL_DIM} channels", self.heads)));
        }
        if self.head_hidden == 0 || !self.gamma.is_finite() {
            return Err(Error::Config("head_hidden must be positive and gamma finite".into()));
        }
        if !(self.search_context > 0.0 && self.template_context > 0.0) {
            return Err(Error::Config("crop contexts must be positive".into()));
        }
        Ok(())
    }

    /// Temporal settings actually applied.
    pub fn effective_tracker(&self) -> TrackerConfig {
        if self.temporal {
            self.tracker.clone()
        } else {
            TrackerConfig { two_sided_scale: false, ..TrackerConfig::disabled() }
        }
    }

    /// Input width of the fusion key/value projections.
    pub fn kv_dim(&self) -> usize {
        match self.combine {
            CombineMode::Concat => TEMPLATE_SLOTS * MODEL_DIM,
            _ => MODEL_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerModel {
    pub backbone: BackboneParams,
    pub adapt: AdaptParams,
    pub tpn: TpnParams,
    pub fusion: FusionParams,
    pub head: HeadParams,
}

impl TrackerModel {
    /// Seeded initialization; everything derives from `cfg.model_seed`.
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let backbone = BackboneParams::new(cfg.model_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.model_seed);
        rng.set_stream(1);
        let adapt = AdaptParams::random(&mut rng, MODEL_DIM);
        let mut tpn = TpnParams::random(&mut rng, cfg.heads, cfg.gamma)?;
        tpn.use_mpa = cfg.mpa;
        let mut fusion = FusionParams::random(&mut rng, cfg.kv_dim(), cfg.heads, cfg.gamma)?;
        fusion.use_mpa = cfg.mpa;
        let head = HeadParams::random(&mut rng, MODEL_DIM, cfg.head_hidden);
        Ok(Self { backbone, adapt, tpn, fusion, head })
    }

    /// Seeded initialization, then `cfg.params` loaded on top if set.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let mut m = Self::new(cfg)?;
        if let Some(p) = &cfg.params {
            m.assign("", &ParamStore::load(p)?)?;
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut store = ParamStore::default();
        self.collect("", &mut store);
        store.save(path)
    }

    /// Backbone → channel adaptation → TPN, giving a stage-3 resolution map.
    pub fn features(&self, img: &Image) -> Result<FeatureMap> {
        let pyr = extract_pyramid(img, &self.backbone)?;
        tpn_forward(&adapt_features(&pyr, &self.adapt)?, &self.tpn)
    }

    /// Features of the `size×size` crop of `context × max(w, h)` around `b`.
    pub fn crop_features(&self, frame: &Image, b: &BBox, context: f64, size: usize) -> Result<FeatureMap> {
        if !b.is_valid() {
            return Err(Error::Extraction(format!("cannot crop around box {b}")));
        }
        self.features(&frame.crop_resample(&CropWindow::around(b, context), size)?)
    }

    /// Template–search integration for the active templates (static first).
    pub fn fuse(&self, search: &FeatureMap, templates: &[&FeatureMap], cfg: &RunConfig, fusion: &FusionParams) -> Result<FusedFeatures> {
        let slots: Vec<FeatureMap> = templates.iter().map(|t| (*t).clone()).collect();
        match cfg.fusion {
            FusionMode::Attention => {
                let kv = combine_templates(&slots, cfg.combine)?;
                fuse(search, &kv, fusion)
            }
            FusionMode::CrossCorrelation => {
                cross_correlation(search, &combine_templates(&slots, CombineMode::Mean)?)
            }
        }
    }

    /// Fusion parameters restricted to `templates` concatenated slots.
    pub fn fusion_for(&self, cfg: &RunConfig) -> Result<FusionParams> {
        match cfg.combine {
            CombineMode::Concat => self.fusion.truncated_kv(cfg.templates * MODEL_DIM),
            _ => Ok(self.fusion.clone()),
        }
    }
}

impl Params for TrackerModel {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        self.backbone.collect(&crate::params::join(prefix, "backbone"), out);
        self.adapt.collect(&crate::params::join(prefix, "adapt"), out);
        self.tpn.collect(&crate::params::join(prefix, "tpn"), out);
        self.fusion.collect(&crate::params::join(prefix, "fusion"), out);
        self.head.collect(&crate::params::join(prefix, "head"), out);
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        self.backbone.assign(&crate::params::join(prefix, "backbone"), src)?;
        self.adapt.assign(&crate::params::join(prefix, "adapt"), src)?;
        self.tpn.assign(&crate::params::join(prefix, "tpn"), src)?;
        self.fusion.assign(&crate::params::join(prefix, "fusion"), src)?;
        self.head.assign(&crate::params::join(prefix, "head"), src)
    }
}

/// Everything the pipeline produced for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutput {
    /// Head prediction mapped to frame coordinates.
    pub raw: BBox,
    pub smoothed: BBox,
    pub correction: Correction,
    pub conf: f64,
    pub template_pushed: bool,
}

impl FrameOutput {
    pub fn bbox(&self) -> BBox {
        self.correction.y_ic
    }
}

/// Clips `b` to the frame and enforces a minimum side.
fn clip_to_frame(b: &BBox, width: usize, height: usize) -> BBox {
    let (fw, fh) = (width as f64, height as f64);
    let w = b.w.clamp(MIN_BOX_SIDE, fw);
    let h = b.h.clamp(MIN_BOX_SIDE, fh);
    let (cx, cy) = b.center();
    let cx = cx.clamp(w / 2.0, fw - w / 2.0);
    let cy = cy.clamp(h / 2.0, fh - h / 2.0);
    BBox::from_center(cx, cy, w, h)
}

/// One-pass tracker over a single sequence.
pub struct Tracker<'m> {
    model: &'m TrackerModel,
    cfg: RunConfig,
    temporal: TrackerConfig,
    fusion: FusionParams,
    state: TrackerState<FeatureMap>,
}

impl<'m> Tracker<'m> {
    /// Initializes on frame 0 with its known box.
    pub fn new(model: &'m TrackerModel, cfg: &RunConfig, frame0: &Image, init: BBox) -> Result<Self> {
        cfg.validate()?;
        if !init.is_valid() {
            return Err(Error::Validation(format!("frame 0 box {init} is not a valid target")));
        }
        let t1 = model.crop_features(frame0, &init, cfg.template_context, TEMPLATE_SIZE)?;
        let state = TrackerState::initialized(init, TemplateBank::new(t1, 0))?;
        Ok(Self { model, cfg: cfg.clone(), temporal: cfg.effective_tracker(), fusion: model.fusion_for(cfg)?, state })
    }

    pub fn state(&self) -> &TrackerState<FeatureMap> {
        &self.state
    }

    /// Head prediction for `frame` around the previous box, in frame
    /// coordinates, before any temporal processing.
    pub fn predict(&self, frame: &Image) -> Result<(BBox, Prediction)> {
        let prev = self.state.s_prev().expect("initialized tracker has a previous box");
        let window = CropWindow::around(&prev, self.cfg.search_context);
        let search = self.model.features(&frame.crop_resample(&window, SEARCH_SIZE)?)?;
        let active = self.state.bank().active(self.cfg.templates);
        let fused = self.model.fuse(&search, &active, &self.cfg, &self.fusion)?;
        let pred = predict(&fused, &self.model.head)?;
        let b = window.to_frame(&pred.bbox, SEARCH_SIZE);
        Ok((clip_to_frame(&b, frame.width(), frame.height()), pred))
    }

    /// Runs the full pipeline on the next frame.
    pub fn step(&mut self, frame: &Image) -> Result<FrameOutput> {
        let (raw, pred) = self.predict(frame)?;
        let (model, context) = (self.model, self.cfg.template_context);
        let extract = |b: &BBox| model.crop_features(frame, b, context, TEMPLATE_SIZE);
        let smoothed = self.state.smooth(&raw, &self.temporal)?;
        let correction = self.state.correct(&smoothed, &self.temporal, extract)?;
        let template_pushed = self.state.update(&correction.y_ic, pred.conf, &self.temporal, extract)?;
        Ok(FrameOutput { raw, smoothed, correction, conf: pred.conf, template_pushed })
    }
}

/// Tracks a whole sequence; the first output is the initialization box.
pub fn track_frames(
    model: &TrackerModel,
    cfg: &RunConfig,
    mut frames: impl Iterator<Item = Result<Image>>,
    init: BBox,
) -> Result<Vec<BBox>> {
    let first = frames.next().ok_or_else(|| Error::Validation("sequence has no frames".into()))??;
    let mut tracker = Tracker::new(model, cfg, &first, init)?;
    let mut out = vec![init];
    for f in frames {
        out.push(tracker.step(&f?)?.bbox());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{SynthConfig, SynthSequence};

    fn small_cfg() -> RunConfig {
        RunConfig { head_hidden: 16, ..RunConfig::default() }
    }

    #[test]
    fn baseline_switches() {
        let b = RunConfig::baseline();
        assert!(!b.temporal && !b.mpa && b.templates == 1);
        assert_eq!(b.fusion, FusionMode::CrossCorrelation);
        let eff = b.effective_tracker();
        assert!(!eff.enable_smoothing && !eff.enable_correction && eff.conf_th.is_infinite());
        assert_eq!(RunConfig::default().templates, 5);
    }

    #[test]
    fn validation() {
        assert!(RunConfig { templates: 6, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { templates: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { heads: 5, ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn kv_width_follows_combine_mode() {
        let m = TrackerModel::new(&small_cfg()).unwrap();
        assert_eq!(m.fusion.attn.kv_dim(), 960);
        let c3 = RunConfig { templates: 3, ..small_cfg() };
        assert_eq!(m.fusion_for(&c3).unwrap().attn.kv_dim(), 576);
        let mean = RunConfig { combine: CombineMode::Mean, ..small_cfg() };
        assert_eq!(TrackerModel::new(&mean).unwrap().fusion.attn.kv_dim(), 192);
    }

    #[test]
    fn params_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sprm");
        let m = TrackerModel::new(&small_cfg()).unwrap();
        m.save(&path).unwrap();
        let other = RunConfig { model_seed: 99, params: Some(path), ..small_cfg() };
        let (mut a, mut b) = (ParamStore::default(), ParamStore::default());
        m.collect("", &mut a);
        TrackerModel::load(&other).unwrap().collect("", &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn clip_keeps_boxes_inside() {
        let b = clip_to_frame(&BBox::new(-50.0, 10.0, 20.0, 1.0), 100, 100);
        assert_eq!(b, BBox::new(0.0, 8.5, 20.0, 4.0));
        let b = clip_to_frame(&BBox::new(0.0, 0.0, 500.0, 50.0), 100, 100);
        assert_eq!(b.w, 100.0);
    }

    #[test]
    fn tracks_a_short_sequence_deterministically() {
        let seq = SynthSequence::generate(&SynthConfig { frames: 4, seed: 3, ..SynthConfig::default() }).unwrap();
        let cfg = RunConfig { tracker: TrackerConfig { update_interval: 2, conf_th: 0.0, ..TrackerConfig::default() }, ..small_cfg() };
        let m = TrackerModel::new(&cfg).unwrap();
        let run = || {
            let frames = (0..seq.len()).map(|t| Ok(seq.render(t)));
            track_frames(&m, &cfg, frames, seq.ground_truth()[0]).unwrap()
        };
        let a = run();
        assert_eq!(a.len(), 4);
        assert_eq!(a[0], seq.ground_truth()[0]);
        assert!(a.iter().all(|b| b.is_valid()));
        assert_eq!(a, run());
    }

    #[test]
    fn pipeline_runs_phases_in_order() {
        let seq = SynthSequence::generate(&SynthConfig { frames: 3, seed: 4, ..SynthConfig::default() }).unwrap();
        let cfg = RunConfig { tracker: TrackerConfig { update_interval: 1, conf_th: 0.0, ..TrackerConfig::default() }, ..small_cfg() };
        let m = TrackerModel::new(&cfg).unwrap();
        let mut tr = Tracker::new(&m, &cfg, &seq.render(0), seq.ground_truth()[0]).unwrap();
        let out = tr.step(&seq.render(1)).unwrap();
        assert_eq!(tr.state().frame_index(), 2);
        assert_eq!(tr.state().s_prev(), Some(out.bbox()));
        // with U = 1 and no confidence gate the frame-1 template enters the bank
        assert!(out.template_pushed);
        assert_eq!(tr.state().bank().provenance(), vec![0, 0, 0, 0, 1]);
    }
}
