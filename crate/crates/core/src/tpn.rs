//! Feature adaptation and the pyramid transformer: cross-scale fusion onto
//! the stage-3 grid followed by two self-attention refinement blocks.

use rand_chacha::ChaCha8Rng;

use crate::attention::{mpa_block, pa_block, AttentionParams, ModulationParams, MODEL_DIM};
use crate::backbone::{Pyramid, STAGE_CHANNELS};
use crate::error::{Error, Result};
use crate::params::{dense_init, join, ParamStore, Params};
use crate::tensor::{conv1x1, FeatureMap, Tensor};

/// Key/value pooling ratios of the stage-2, stage-3 and stage-4 branches.
pub const BRANCH_RATIOS: [usize; 3] = [4, 2, 1];
pub const REFINE_RATIO: usize = 2;
pub const REFINE_ITERATIONS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedFeatures {
    pub p2a: FeatureMap,
    pub p3a: FeatureMap,
    pub p4a: FeatureMap,
}

/// 1×1 projections from the backbone widths down to the model width.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptParams {
    pub weights: [Tensor; 3],
    pub biases: [Tensor; 3],
}

impl AdaptParams {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let [a, b, c] = STAGE_CHANNELS.map(|ci| dense_init(rng, dim, ci));
        Self { weights: [a.0, b.0, c.0], biases: [a.1, b.1, c.1] }
    }
}

impl Params for AdaptParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        for i in 0..3 {
            out.insert(join(prefix, &format!("p{}.weight", i + 2)), self.weights[i].clone());
            out.insert(join(prefix, &format!("p{}.bias", i + 2)), self.biases[i].clone());
        }
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        for i in 0..3 {
            src.load_into(&join(prefix, &format!("p{}.weight", i + 2)), &mut self.weights[i])?;
            src.load_into(&join(prefix, &format!("p{}.bias", i + 2)), &mut self.biases[i])?;
        }
        Ok(())
    }
}

pub fn adapt_features(pyr: &Pyramid, params: &AdaptParams) -> Result<AdaptedFeatures> {
    let (h3, w3) = (pyr.p3.height(), pyr.p3.width());
    if pyr.p2.height() != 2 * h3 || pyr.p2.width() != 2 * w3 {
        return Err(Error::dim(format!(
            "stage-2 map {}×{} is not twice stage-3 {h3}×{w3}",
            pyr.p2.height(),
            pyr.p2.width()
        )));
    }
    Ok(AdaptedFeatures {
        p2a: conv1x1(&pyr.p2, &params.weights[0], &params.biases[0])?,
        p3a: conv1x1(&pyr.p3, &params.weights[1], &params.biases[1])?,
        p4a: conv1x1(&pyr.p4, &params.weights[2], &params.biases[2])?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TpnParams {
    pub branch2: AttentionParams,
    pub branch2_mod: ModulationParams,
    pub branch3: AttentionParams,
    pub branch4: AttentionParams,
    pub branch4_mod: ModulationParams,
    pub refine: [AttentionParams; REFINE_ITERATIONS],
    /// When false the stage-2 and stage-4 branches run plain PA blocks.
    pub use_mpa: bool,
}

impl TpnParams {
    pub fn random(rng: &mut ChaCha8Rng, heads: usize, gamma: f32) -> Result<Self> {
        let d = MODEL_DIM;
        Ok(Self {
            branch2: AttentionParams::random(rng, d, d, heads)?,
            branch2_mod: ModulationParams::random(rng, d, gamma),
            branch3: AttentionParams::random(rng, d, d, heads)?,
            branch4: AttentionParams::random(rng, d, d, heads)?,
            branch4_mod: ModulationParams::random(rng, d, gamma),
            refine: [AttentionParams::random(rng, d, d, heads)?, AttentionParams::random(rng, d, d, heads)?],
            use_mpa: true,
        })
    }
}

impl Params for TpnParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        self.branch2.collect(&join(prefix, "branch2"), out);
        self.branch3.collect(&join(prefix, "branch3"), out);
        self.branch4.collect(&join(prefix, "branch4"), out);
        if self.use_mpa {
            self.branch2_mod.collect(&join(prefix, "branch2_mod"), out);
            self.branch4_mod.collect(&join(prefix, "branch4_mod"), out);
        }
        for (i, r) in self.refine.iter().enumerate() {
            r.collect(&join(prefix, &format!("refine{i}")), out);
        }
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        self.branch2.assign(&join(prefix, "branch2"), src)?;
        self.branch3.assign(&join(prefix, "branch3"), src)?;
        self.branch4.assign(&join(prefix, "branch4"), src)?;
        if self.use_mpa {
            self.branch2_mod.assign(&join(prefix, "branch2_mod"), src)?;
            self.branch4_mod.assign(&join(prefix, "branch4_mod"), src)?;
        }
        for (i, r) in self.refine.iter_mut().enumerate() {
            r.assign(&join(prefix, &format!("refine{i}")), src)?;
        }
        Ok(())
    }
}

/// The three branch outputs before summation: stage-2 cross attention,
/// stage-3 self attention, stage-4 cross attention, all on the stage-3 grid.
pub fn tpn_branches(a: &AdaptedFeatures, p: &TpnParams) -> Result<[FeatureMap; 3]> {
    let [r2, r3, r4] = BRANCH_RATIOS;
    let b2 = if p.use_mpa {
        mpa_block(&a.p3a, &a.p2a, &a.p2a, r2, &p.branch2, &p.branch2_mod)?
    } else {
        pa_block(&a.p3a, &a.p2a, &a.p2a, r2, &p.branch2)?
    };
    let b3 = pa_block(&a.p3a, &a.p3a, &a.p3a, r3, &p.branch3)?;
    let b4 = if p.use_mpa {
        mpa_block(&a.p3a, &a.p4a, &a.p4a, r4, &p.branch4, &p.branch4_mod)?
    } else {
        pa_block(&a.p3a, &a.p4a, &a.p4a, r4, &p.branch4)?
    };
    Ok([b2, b3, b4])
}

/// Elementwise sum of the three branches.
pub fn tpn_fuse(a: &AdaptedFeatures, p: &TpnParams) -> Result<FeatureMap> {
    let [b2, b3, b4] = tpn_branches(a, p)?;
    b2.add(&b3)?.add(&b4)
}

/// Two stacked self-attention PA blocks with independent parameters.
pub fn tpn_refine(fused: &FeatureMap, p: &TpnParams) -> Result<FeatureMap> {
    if fused.channels() != p.refine[0].dim() {
        return Err(Error::dim(format!("refine input has {} channels", fused.channels())));
    }
    p.refine
        .iter()
        .try_fold(fused.clone(), |x, blk| pa_block(&x, &x, &x, REFINE_RATIO, blk))
}

pub fn tpn_forward(a: &AdaptedFeatures, p: &TpnParams) -> Result<FeatureMap> {
    tpn_refine(&tpn_fuse(a, p)?, p)
}
