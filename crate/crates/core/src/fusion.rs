//! Template/search integration. The template bank's stage-3 features are
//! combined into one key/value map and the search features attend to it
//! through a single MPA block (no pooling). A depthwise cross-correlation
//! path is kept for the ablation harness.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::attention::{
    mpa_block_with_weights, pa_block_with_weights, AttentionParams, ModulationParams, MODEL_DIM,
};
use crate::error::{Error, Result};
use crate::params::{join, ParamStore, Params};
use crate::tensor::{add_macs, concat_channels, FeatureMap, Tensor};

/// One static plus four dynamic templates.
pub const TEMPLATE_SLOTS: usize = 5;
pub const FUSION_RATIO: usize = 1;

/// How template feature maps are merged into the key/value map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CombineMode {
    /// Channel concatenation: `n·C′` channels.
    #[default]
    Concat,
    Mean,
    Sum,
}

impl FromStr for CombineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Self::Concat),
            "mean" => Ok(Self::Mean),
            "sum" => Ok(Self::Sum),
            _ => Err(Error::Config(format!("unknown combine mode {s:?}"))),
        }
    }
}

impl fmt::Display for CombineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Concat => "concat",
            Self::Mean => "mean",
            Self::Sum => "sum",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FusionMode {
    #[default]
    Attention,
    CrossCorrelation,
}

impl FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Self::Attention),
            "cross_correlation" | "xcorr" => Ok(Self::CrossCorrelation),
            _ => Err(Error::Config(format!("unknown fusion mode {s:?}"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Attention => "attention",
            Self::CrossCorrelation => "cross_correlation",
        })
    }
}

/// Exactly five equally shaped template slots, static template first.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateFeatures {
    slots: Vec<FeatureMap>,
}

impl TemplateFeatures {
    pub fn new(slots: Vec<FeatureMap>) -> Result<Self> {
        if slots.len() != TEMPLATE_SLOTS {
            return Err(Error::dim(format!("{} template slots, expected {TEMPLATE_SLOTS}", slots.len())));
        }
        check_same_shape(&slots)?;
        Ok(Self { slots })
    }

    /// Cold start: every slot holds the static template.
    pub fn replicated(t1: &FeatureMap) -> Self {
        Self { slots: vec![t1.clone(); TEMPLATE_SLOTS] }
    }

    pub fn slots(&self) -> &[FeatureMap] {
        &self.slots
    }
}

fn check_same_shape(slots: &[FeatureMap]) -> Result<()> {
    let first = slots.first().ok_or_else(|| Error::dim("no template slots"))?;
    if let Some(bad) = slots.iter().find(|s| s.dims() != first.dims()) {
        return Err(Error::dim(format!(
            "template slot shape {:?} differs from {:?}",
            bad.dims(),
            first.dims()
        )));
    }
    Ok(())
}

/// Channel concatenation of the template slots in order.
pub fn build_template_kv(t: &TemplateFeatures) -> Result<FeatureMap> {
    combine_templates(t.slots(), CombineMode::Concat)
}

/// Merges any number of equally shaped slots according to `mode`.
pub fn combine_templates(slots: &[FeatureMap], mode: CombineMode) -> Result<FeatureMap> {
    check_same_shape(slots)?;
    match mode {
        CombineMode::Concat => concat_channels(&slots.iter().collect::<Vec<_>>()),
        CombineMode::Sum | CombineMode::Mean => {
            let mut acc = slots[0].clone();
            for s in &slots[1..] {
                acc = acc.add(s)?;
            }
            if mode == CombineMode::Mean {
                let k = 1.0 / slots.len() as f32;
                acc.data_mut().iter_mut().for_each(|v| *v *= k);
            }
            Ok(acc)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    /// Key/value projections take `kv_dim` input channels.
    pub attn: AttentionParams,
    pub modulation: ModulationParams,
    /// Plain PA when false.
    pub use_mpa: bool,
}

impl FusionParams {
    pub fn random(rng: &mut ChaCha8Rng, kv_dim: usize, heads: usize, gamma: f32) -> Result<Self> {
        Ok(Self {
            attn: AttentionParams::random(rng, MODEL_DIM, kv_dim, heads)?,
            modulation: ModulationParams::random(rng, MODEL_DIM, gamma),
            use_mpa: true,
        })
    }

    /// Restricts the key/value projections to their first `kv_dim` input
    /// columns, giving the nested model for a smaller template bank.
    pub fn truncated_kv(&self, kv_dim: usize) -> Result<Self> {
        let full = self.attn.kv_dim();
        if kv_dim == 0 || kv_dim > full {
            return Err(Error::dim(format!("cannot narrow {full} key/value channels to {kv_dim}")));
        }
        let narrow = |w: &Tensor| -> Result<Tensor> {
            let rows = w.shape()[0];
            let data = (0..rows).flat_map(|r| w.row(r)[..kv_dim].to_vec()).collect();
            Tensor::new(vec![rows, kv_dim], data)
        };
        let mut out = self.clone();
        out.attn.wk = narrow(&self.attn.wk)?;
        out.attn.wv = narrow(&self.attn.wv)?;
        Ok(out)
    }
}

impl Params for FusionParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        self.attn.collect(&join(prefix, "attn"), out);
        if self.use_mpa {
            self.modulation.collect(&join(prefix, "mod"), out);
        }
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        self.attn.assign(&join(prefix, "attn"), src)?;
        if self.use_mpa {
            self.modulation.assign(&join(prefix, "mod"), src)?;
        }
        Ok(())
    }
}

/// Search features after template integration; same shape as the search map.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedFeatures {
    pub map: FeatureMap,
}

/// Search map as query, template key/value map as both key and value.
pub fn fuse(search: &FeatureMap, kv: &FeatureMap, params: &FusionParams) -> Result<FusedFeatures> {
    fuse_with_weights(search, kv, params).map(|(f, _)| f)
}

/// [`fuse`] plus the per-head attention weights (debug hook).
pub fn fuse_with_weights(
    search: &FeatureMap,
    kv: &FeatureMap,
    params: &FusionParams,
) -> Result<(FusedFeatures, Vec<Tensor>)> {
    if search.channels() != params.attn.dim() || kv.channels() != params.attn.kv_dim() {
        return Err(Error::dim(format!(
            "fusion expects {}-channel search and {}-channel key/value maps, got {} and {}",
            params.attn.dim(),
            params.attn.kv_dim(),
            search.channels(),
            kv.channels()
        )));
    }
    let (map, w) = if params.use_mpa {
        mpa_block_with_weights(search, kv, kv, FUSION_RATIO, &params.attn, &params.modulation)?
    } else {
        pa_block_with_weights(search, kv, kv, FUSION_RATIO, &params.attn)?
    };
    Ok((FusedFeatures { map }, w))
}

/// Depthwise cross-correlation of `template` over `search`, zero padded so
/// the output keeps the search extent, averaged over template cells.
pub fn cross_correlation(search: &FeatureMap, template: &FeatureMap) -> Result<FusedFeatures> {
    let (c, h, w) = search.dims();
    let (ct, th, tw) = template.dims();
    if c != ct {
        return Err(Error::dim(format!("cross-correlation of {ct}-channel template on {c}-channel search")));
    }
    let (oy, ox) = ((th / 2) as isize, (tw / 2) as isize);
    let norm = 1.0 / (th * tw) as f32;
    let mut out = vec![0.0f32; c * h * w];
    let mut taps = 0usize;
    for ch in 0..c {
        let s = search.plane(ch);
        let t = template.plane(ch);
        let o = &mut out[ch * h * w..(ch + 1) * h * w];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0f32;
                for ty in 0..th as isize {
                    let sy = y + ty - oy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for tx in 0..tw as isize {
                        let sx = x + tx - ox;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        acc += s[(sy * w as isize + sx) as usize] * t[(ty * tw as isize + tx) as usize];
                        taps += 1;
                    }
                }
                o[(y * w as isize + x) as usize] = acc * norm;
            }
        }
    }
    add_macs(taps);
    Ok(FusedFeatures { map: FeatureMap::new(Tensor::new(vec![c, h, w], out)?, search.stride())? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_map(r: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::new(Tensor::from_fn(&[c, h, w], |_| r.gen_range(-1.0..1.0)), 16).unwrap()
    }

    fn argmax(row: &[f32]) -> usize {
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn template_kv_concat_layout() {
        let mut r = rng(1);
        let slots: Vec<_> = (0..5).map(|_| random_map(&mut r, 192, 5, 5)).collect();
        let t = TemplateFeatures::new(slots.clone()).unwrap();
        let kv = build_template_kv(&t).unwrap();
        assert_eq!(kv.dims(), (960, 5, 5));
        for (k, s) in slots.iter().enumerate() {
            assert_eq!(&kv.channel_block(192 * k, 192).unwrap(), s);
        }
        let cold = build_template_kv(&TemplateFeatures::replicated(&slots[0])).unwrap();
        for k in 0..5 {
            assert_eq!(cold.channel_block(192 * k, 192).unwrap(), slots[0]);
        }
    }

    #[test]
    fn template_slot_validation() {
        let mut r = rng(2);
        let mut slots: Vec<_> = (0..5).map(|_| random_map(&mut r, 192, 5, 5)).collect();
        assert!(TemplateFeatures::new(slots[..4].to_vec()).is_err());
        slots[3] = random_map(&mut r, 192, 4, 5);
        assert!(matches!(TemplateFeatures::new(slots), Err(Error::Dimension(_))));
    }

    #[test]
    fn mean_and_sum_keep_model_width() {
        let mut r = rng(3);
        let slots: Vec<_> = (0..3).map(|_| random_map(&mut r, 8, 2, 2)).collect();
        let sum = combine_templates(&slots, CombineMode::Sum).unwrap();
        let mean = combine_templates(&slots, CombineMode::Mean).unwrap();
        assert_eq!(sum.dims(), (8, 2, 2));
        assert!(mean.tensor().max_abs_diff(&sum.tensor().scale(1.0 / 3.0)) < 1e-6);
    }

    #[test]
    fn fusion_shapes_and_token_count() {
        let mut r = rng(4);
        let params = FusionParams::random(&mut r, 960, 6, 0.5).unwrap();
        let search = random_map(&mut r, 192, 20, 20);
        let kv = random_map(&mut r, 960, 5, 5);
        let (fused, w) = fuse_with_weights(&search, &kv, &params).unwrap();
        assert_eq!(fused.map.dims(), (192, 20, 20));
        assert_eq!(w.len(), 6);
        assert_eq!(w[0].shape(), &[400, 25]);
        assert!(fused.map.data().iter().all(|v| v.is_finite()));
        assert!(fuse(&kv, &kv, &params).is_err());
    }

    #[test]
    fn fusion_gamma_zero_returns_search() {
        let mut r = rng(5);
        let params = FusionParams::random(&mut r, 960, 6, 0.0).unwrap();
        let search = random_map(&mut r, 192, 20, 20);
        let kv = random_map(&mut r, 960, 5, 5);
        assert_eq!(fuse(&search, &kv, &params).unwrap().map, search);
    }

    #[test]
    fn kv_scaling_keeps_logit_order() {
        let mut r = rng(6);
        let mut params = FusionParams::random(&mut r, 960, 6, 0.5).unwrap();
        params.attn.bk.data_mut().fill(0.0);
        let search = random_map(&mut r, 192, 6, 6);
        let kv = random_map(&mut r, 960, 5, 5);
        let doubled = FeatureMap::new(kv.tensor().scale(2.0), 16).unwrap();
        let (_, w1) = fuse_with_weights(&search, &kv, &params).unwrap();
        let (_, w2) = fuse_with_weights(&search, &doubled, &params).unwrap();
        for (a, b) in w1.iter().zip(&w2) {
            for i in 0..36 {
                assert_eq!(argmax(a.row(i)), argmax(b.row(i)));
                // softmax is monotone: weight order follows logit order
                let (ra, rb) = (a.row(i), b.row(i));
                for j in 0..25 {
                    for k in 0..25 {
                        if ra[j] > ra[k] {
                            assert!(rb[j] >= rb[k]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn truncated_kv_matches_nested_columns() {
        let mut r = rng(7);
        let params = FusionParams::random(&mut r, 960, 6, 0.5).unwrap();
        let small = params.truncated_kv(384).unwrap();
        assert_eq!(small.attn.kv_dim(), 384);
        assert_eq!(small.attn.wk.row(3), &params.attn.wk.row(3)[..384]);
        assert!(params.truncated_kv(1000).is_err());
    }

    #[test]
    fn cross_correlation_hand_case() {
        // single channel 3×3 search, 1×1 template of value 2 → search doubled
        let s = FeatureMap::new(Tensor::from_fn(&[1, 3, 3], |i| i as f32), 16).unwrap();
        let t = FeatureMap::new(Tensor::full(&[1, 1, 1], 2.0), 16).unwrap();
        let out = cross_correlation(&s, &t).unwrap().map;
        assert_eq!(out.data(), s.tensor().scale(2.0).data());
        // 3×3 box template averages the zero-padded neighbourhood
        let ones = FeatureMap::new(Tensor::full(&[1, 3, 3], 1.0), 16).unwrap();
        let out = cross_correlation(&s, &ones).unwrap().map;
        assert!((out.data()[4] - 36.0 / 9.0).abs() < 1e-6);
        assert!((out.data()[0] - (0.0 + 1.0 + 3.0 + 4.0) / 9.0).abs() < 1e-6);
        let mut r = rng(8);
        let big = cross_correlation(&random_map(&mut r, 192, 20, 20), &random_map(&mut r, 192, 5, 5)).unwrap();
        assert_eq!(big.map.dims(), (192, 20, 20));
    }
}
