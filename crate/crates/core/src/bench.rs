//! Parameter and multiply-accumulate accounting.
//!
//! [`analytic`] derives both counts from closed-form expressions over the
//! layer shapes. [`measure`] runs the network once and reads the kernel MAC
//! counter and the collected parameter tensors. The two must agree exactly.

use std::fmt;

use serde::Serialize;

use crate::attention::{FFN_EXPANSION, MODEL_DIM, SE_REDUCTION};
use crate::backbone::{extract_pyramid, STAGE_CHANNELS};
use crate::error::{Error, Result};
use crate::fusion::{CombineMode, FusedFeatures, FusionMode, FUSION_RATIO};
use crate::head::predict;
use crate::image::Image;
use crate::params::Params;
use crate::tensor::{mac_count, reset_mac_count, FeatureMap};
use crate::tpn::{adapt_features, tpn_forward, BRANCH_RATIOS, REFINE_ITERATIONS, REFINE_RATIO};
use crate::tracker::{RunConfig, TrackerModel, TEMPLATE_SIZE};

const PATCH: [usize; 3] = [8, 2, 2];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Cost {
    pub params: u64,
    pub macs: u64,
}

impl std::ops::Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost { params: self.params + o.params, macs: self.macs + o.macs }
    }
}

/// Per-component counts for one search frame. `template` is the cost of one
/// template extraction (initialization, updates and corrections), which is
/// not part of the per-frame total.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BenchReport {
    pub search_size: usize,
    pub template_size: usize,
    pub templates: usize,
    pub backbone: Cost,
    /// Channel adaptation plus the pyramid attention network.
    pub tpn: Cost,
    pub fusion: Cost,
    pub head: Cost,
    pub template_macs: u64,
}

impl BenchReport {
    pub fn total(&self) -> Cost {
        self.backbone + self.tpn + self.fusion + self.head
    }

    pub fn components(&self) -> [(&'static str, Cost); 4] {
        [("backbone", self.backbone), ("tpn", self.tpn), ("fusion", self.fusion), ("head", self.head)]
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "search {0}x{0}, template {1}x{1}, {2} templates",
            self.search_size, self.template_size, self.templates
        )?;
        writeln!(f, "{:<10} {:>12} {:>16}", "component", "params", "macs/frame")?;
        for (name, c) in self.components() {
            writeln!(f, "{name:<10} {:>12} {:>16}", c.params, c.macs)?;
        }
        let t = self.total();
        writeln!(f, "{:<10} {:>12} {:>16}", "total", t.params, t.macs)?;
        writeln!(f, "template extraction macs {}", self.template_macs)
    }
}

fn grid(side: usize) -> [usize; 3] {
    let s2 = side.div_ceil(PATCH[0]);
    let s3 = s2.div_ceil(PATCH[1]);
    [s2, s3, s3.div_ceil(PATCH[2])]
}

fn sq(n: usize) -> u64 {
    (n * n) as u64
}

fn backbone_params() -> u64 {
    let mut cin = 3;
    let mut n = 0;
    for (c, p) in STAGE_CHANNELS.iter().zip(PATCH) {
        n += (c * cin * p * p + c) as u64;
        cin = *c;
    }
    n
}

fn backbone_macs(side: usize) -> u64 {
    let mut cin = 3;
    let mut n = 0;
    for ((c, p), g) in STAGE_CHANNELS.iter().zip(PATCH).zip(grid(side)) {
        n += sq(g) * (c * cin * p * p) as u64;
        cin = *c;
    }
    n
}

fn adapt_params(d: usize) -> u64 {
    STAGE_CHANNELS.iter().map(|c| (d * c + d) as u64).sum()
}

fn adapt_macs(d: usize, side: usize) -> u64 {
    STAGE_CHANNELS.iter().zip(grid(side)).map(|(c, g)| sq(g) * (d * c) as u64).sum()
}

fn attention_params(d: usize, kv: usize) -> u64 {
    let f = FFN_EXPANSION * d;
    (2 * (d * d + d) + 2 * (d * kv + d) + (f * d + f) + (d * f + d) + 4 * d) as u64
}

/// Pooling-attention block with `nq` query tokens and `nk` pooled key/value
/// tokens of width `kv`.
pub fn attention_macs(d: usize, kv: usize, nq: u64, nk: u64) -> u64 {
    let d = d as u64;
    let f = FFN_EXPANSION as u64 * d;
    // q and output projections, k and v projections, logits and weighted
    // sum across all heads, feed-forward
    2 * nq * d * d + 2 * nk * kv as u64 * d + 2 * nq * nk * d + 2 * nq * d * f
}

fn modulation_params(d: usize) -> u64 {
    let r = d / SE_REDUCTION;
    (d * 2 * d + d + r * d + r + d * r + d + 1) as u64
}

fn modulation_macs(d: usize, nq: u64) -> u64 {
    let r = (d / SE_REDUCTION) as u64;
    let d = d as u64;
    nq * d * 2 * d + 2 * r * d
}

fn tpn_params(d: usize, mpa: bool) -> u64 {
    let blocks = 3 + REFINE_ITERATIONS as u64;
    adapt_params(d) + blocks * attention_params(d, d) + if mpa { 2 * modulation_params(d) } else { 0 }
}

fn tpn_macs(d: usize, side: usize, mpa: bool) -> u64 {
    let [g2, g3, g4] = grid(side);
    let nq = sq(g3);
    let [r2, r3, r4] = BRANCH_RATIOS;
    let mut n = adapt_macs(d, side);
    n += attention_macs(d, d, nq, sq(g2.div_ceil(r2)));
    n += attention_macs(d, d, nq, sq(g3.div_ceil(r3)));
    n += attention_macs(d, d, nq, sq(g4.div_ceil(r4)));
    if mpa {
        n += 2 * modulation_macs(d, nq);
    }
    n + REFINE_ITERATIONS as u64 * attention_macs(d, d, nq, sq(g3.div_ceil(REFINE_RATIO)))
}

/// Number of in-bounds taps of a `t`-wide kernel centred at `t / 2` over
/// an `s`-wide zero-padded signal, summed over output positions.
fn xcorr_taps(s: usize, t: usize) -> u64 {
    let o = (t / 2) as isize;
    (0..s as isize)
        .map(|y| (0..t as isize).filter(|k| (0..s as isize).contains(&(y + k - o))).count() as u64)
        .sum()
}

fn kv_width(cfg: &RunConfig, d: usize) -> usize {
    match cfg.combine {
        CombineMode::Concat => cfg.templates * d,
        CombineMode::Mean | CombineMode::Sum => d,
    }
}

fn fusion_cost(cfg: &RunConfig, d: usize, search: usize, template: usize) -> Cost {
    let s3 = grid(search)[1];
    let t3 = grid(template)[1];
    match cfg.fusion {
        FusionMode::CrossCorrelation => {
            Cost { params: 0, macs: d as u64 * xcorr_taps(s3, t3) * xcorr_taps(s3, t3) }
        }
        FusionMode::Attention => {
            let kv = kv_width(cfg, d);
            let nq = sq(s3);
            let nk = sq(t3.div_ceil(FUSION_RATIO));
            let mut c = Cost { params: attention_params(d, kv), macs: attention_macs(d, kv, nq, nk) };
            if cfg.mpa {
                c.params += modulation_params(d);
                c.macs += modulation_macs(d, nq);
            }
            c
        }
    }
}

fn head_cost(d: usize, hidden: usize, search: usize) -> Cost {
    let n = sq(grid(search)[1]);
    let tower = |out: usize| Cost {
        params: (hidden * d + hidden + out * hidden + out) as u64,
        macs: n * (hidden * d + out * hidden) as u64,
    };
    tower(1) + tower(4)
}

/// Closed-form counts for `cfg` with the given crop sides.
pub fn analytic(cfg: &RunConfig, search: usize, template: usize) -> BenchReport {
    let d = MODEL_DIM;
    BenchReport {
        search_size: search,
        template_size: template,
        templates: cfg.templates,
        backbone: Cost { params: backbone_params(), macs: backbone_macs(search) },
        tpn: Cost { params: tpn_params(d, cfg.mpa), macs: tpn_macs(d, search, cfg.mpa) },
        fusion: fusion_cost(cfg, d, search, template),
        head: head_cost(d, cfg.head_hidden, search),
        template_macs: backbone_macs(template) + tpn_macs(d, template, cfg.mpa),
    }
}

fn counted<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, u64)> {
    reset_mac_count();
    let out = f()?;
    Ok((out, mac_count()))
}

fn params_of(p: &impl Params) -> u64 {
    p.num_params() as u64
}

fn mid_grey(side: usize) -> Image {
    Image::filled(side, side, [0.5, 0.5, 0.5])
}

/// Runs one template extraction and one search frame through `model`,
/// counting every kernel call. Parameters are those the frame touches.
pub fn measure(model: &TrackerModel, cfg: &RunConfig, search: usize, template: usize) -> Result<BenchReport> {
    if search % 16 != 0 || template % 16 != 0 {
        return Err(Error::Validation(format!("crop sides {search} and {template} must be multiples of 16")));
    }
    let (t, template_macs) = counted(|| model.features(&mid_grey(template)))?;
    let slots: Vec<&FeatureMap> = (0..cfg.templates).map(|_| &t).collect();

    let (pyr, backbone_macs) = counted(|| extract_pyramid(&mid_grey(search), &model.backbone))?;
    let (s, tpn_macs) = counted(|| tpn_forward(&adapt_features(&pyr, &model.adapt)?, &model.tpn))?;
    let fusion = model.fusion_for(cfg)?;
    let (fused, fusion_macs): (FusedFeatures, u64) = counted(|| model.fuse(&s, &slots, cfg, &fusion))?;
    let (_, head_macs) = counted(|| predict(&fused, &model.head))?;

    let fusion_params = match cfg.fusion {
        FusionMode::Attention => params_of(&fusion),
        FusionMode::CrossCorrelation => 0,
    };
    Ok(BenchReport {
        search_size: search,
        template_size: template,
        templates: cfg.templates,
        backbone: Cost { params: params_of(&model.backbone), macs: backbone_macs },
        tpn: Cost { params: params_of(&model.adapt) + params_of(&model.tpn), macs: tpn_macs },
        fusion: Cost { params: fusion_params, macs: fusion_macs },
        head: Cost { params: params_of(&model.head), macs: head_macs },
        template_macs,
    })
}

/// Measured counts at the tracker's crop sizes.
pub fn bench(model: &TrackerModel, cfg: &RunConfig, search: usize) -> Result<BenchReport> {
    measure(model, cfg, search, TEMPLATE_SIZE)
}
