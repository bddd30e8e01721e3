//! Deterministic stand-in for the pretrained lightweight backbone.
//!
//! Each stage flattens non-overlapping patches of the previous stage (8×8
//! pixels for stage 2, 2×2 cells afterwards), projects them with a seeded
//! linear map and squashes with `tanh`. The output pyramid has the usual
//! stage-2/3/4 channel counts (116, 232, 464) at strides 8, 16 and 32.
//! Inputs must be divisible by 16; stage 4 rounds up (an 80×80 template
//! gives a 3×3 stage-4 map).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::params::{dense_init, join, ParamStore, Params};
use crate::tensor::{add_row_bias, matmul_bt, FeatureMap, Tensor};

pub const STAGE_CHANNELS: [usize; 3] = [116, 232, 464];
pub const STAGE_STRIDES: [usize; 3] = [8, 16, 32];
/// Patch side of each stage relative to its input.
const STAGE_PATCH: [usize; 3] = [8, 2, 2];

#[derive(Clone, Debug, PartialEq)]
pub struct StageProjection {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneParams {
    pub seed: u64,
    pub stages: [StageProjection; 3],
}

impl BackboneParams {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cin = 3;
        let stages = [0, 1, 2].map(|s| {
            let fan_in = cin * STAGE_PATCH[s] * STAGE_PATCH[s];
            let (weight, bias) = dense_init(&mut rng, STAGE_CHANNELS[s], fan_in);
            cin = STAGE_CHANNELS[s];
            StageProjection { weight, bias }
        });
        Self { seed, stages }
    }
}

impl Params for BackboneParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        for (i, s) in self.stages.iter().enumerate() {
            out.insert(join(prefix, &format!("stage{}.weight", i + 2)), s.weight.clone());
            out.insert(join(prefix, &format!("stage{}.bias", i + 2)), s.bias.clone());
        }
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        for (i, s) in self.stages.iter_mut().enumerate() {
            src.load_into(&join(prefix, &format!("stage{}.weight", i + 2)), &mut s.weight)?;
            src.load_into(&join(prefix, &format!("stage{}.bias", i + 2)), &mut s.bias)?;
        }
        Ok(())
    }
}

/// Stage-2/3/4 feature maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid {
    pub p2: FeatureMap,
    pub p3: FeatureMap,
    pub p4: FeatureMap,
}

/// `C×H×W` → `(⌈H/p⌉ · ⌈W/p⌉) × (C·p·p)`, one row per patch; within a row
/// the layout is channel-major, then patch row, then patch column. Patches
/// hanging over the bottom/right edge are zero padded.
fn patchify(data: &[f32], c: usize, h: usize, w: usize, p: usize) -> Tensor {
    let (ho, wo) = (h.div_ceil(p), w.div_ceil(p));
    let k = c * p * p;
    let mut out = vec![0.0f32; ho * wo * k];
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &mut out[(oy * wo + ox) * k..(oy * wo + ox + 1) * k];
            let cols = p.min(w - ox * p);
            for ch in 0..c {
                for dy in 0..p.min(h - oy * p) {
                    let src = (ch * h + oy * p + dy) * w + ox * p;
                    let dst = (ch * p + dy) * p;
                    row[dst..dst + cols].copy_from_slice(&data[src..src + cols]);
                }
            }
        }
    }
    Tensor::new(vec![ho * wo, k], out).expect("patchify shape")
}

fn run_stage(
    data: &[f32],
    (c, h, w): (usize, usize, usize),
    p: usize,
    proj: &StageProjection,
    stride: usize,
) -> Result<FeatureMap> {
    let patches = patchify(data, c, h, w, p);
    let mut tokens = matmul_bt(&patches, &proj.weight)?;
    add_row_bias(&mut tokens, &proj.bias)?;
    let tokens = tokens.map(f32::tanh);
    // tokens are (Ho·Wo)×C′; the map is C′×Ho×Wo
    let t = tokens.transpose2d()?;
    FeatureMap::new(t.reshape(&[proj.weight.shape()[0], h.div_ceil(p), w.div_ceil(p)])?, stride)
}

/// Runs the three stages hierarchically on `img`.
pub fn extract_pyramid(img: &Image, params: &BackboneParams) -> Result<Pyramid> {
    let (h, w) = (img.height(), img.width());
    if h % 16 != 0 || w % 16 != 0 {
        return Err(Error::dim(format!("image {h}×{w} is not divisible by 16")));
    }
    let centered: Vec<f32> = img.tensor().data().iter().map(|v| v - 0.5).collect();
    let p2 = run_stage(&centered, (3, h, w), STAGE_PATCH[0], &params.stages[0], STAGE_STRIDES[0])?;
    let p3 = run_stage(p2.data(), p2.dims(), STAGE_PATCH[1], &params.stages[1], STAGE_STRIDES[1])?;
    let p4 = run_stage(p3.data(), p3.dims(), STAGE_PATCH[2], &params.stages[2], STAGE_STRIDES[2])?;
    Ok(Pyramid { p2, p3, p4 })
}
