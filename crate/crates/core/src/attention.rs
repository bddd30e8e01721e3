//! Multi-head pooling attention (PA) and modulated pooling attention (MPA).
//!
//! A PA block attends from the query map to spatially pooled key/value maps,
//! then applies post-norm residual attention and a 4× feed-forward layer.
//! MPA wraps a PA block with a channel-modulation branch:
//!
//! ```text
//! y = PA(x, k, v, r)
//! z = Conv1x1(Concat(x, y))
//! w = FC2(ReLU(FC1(AvgPool(y))))
//! out = x + gamma * (z ⊙ w)
//! ```

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params::{dense_init, join, ParamStore, Params};
use crate::tensor::{
    adaptive_avg_pool, add_row_bias, concat_channels, conv1x1, flatten_spatial, layer_norm_rows,
    linear, matmul, matmul_bt, relu, softmax_in_place, spatial_pool, unflatten_spatial, FeatureMap,
    Tensor,
};

pub const DEFAULT_HEADS: usize = 6;
pub const MODEL_DIM: usize = 192;
pub const FFN_EXPANSION: usize = 4;
pub const SE_REDUCTION: usize = 4;
const LN_EPS: f32 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub heads: usize,
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ffn1: Tensor,
    pub ffn1_b: Tensor,
    pub ffn2: Tensor,
    pub ffn2_b: Tensor,
    pub ln1_scale: Tensor,
    pub ln1_shift: Tensor,
    pub ln2_scale: Tensor,
    pub ln2_shift: Tensor,
}

impl AttentionParams {
    /// Random projections for a `dim`-wide query path and `kv_dim`-wide key
    /// and value inputs. Layer norms start at unit scale and zero shift.
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, kv_dim: usize, heads: usize) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::Config(format!("{dim} channels not divisible by {heads} heads")));
        }
        let (wq, bq) = dense_init(rng, dim, dim);
        let (wk, bk) = dense_init(rng, dim, kv_dim);
        let (wv, bv) = dense_init(rng, dim, kv_dim);
        let (wo, bo) = dense_init(rng, dim, dim);
        let (ffn1, ffn1_b) = dense_init(rng, FFN_EXPANSION * dim, dim);
        let (ffn2, ffn2_b) = dense_init(rng, dim, FFN_EXPANSION * dim);
        Ok(Self {
            heads,
            wq,
            bq,
            wk,
            bk,
            wv,
            bv,
            wo,
            bo,
            ffn1,
            ffn1_b,
            ffn2,
            ffn2_b,
            ln1_scale: Tensor::full(&[dim], 1.0),
            ln1_shift: Tensor::zeros(&[dim]),
            ln2_scale: Tensor::full(&[dim], 1.0),
            ln2_shift: Tensor::zeros(&[dim]),
        })
    }

    pub fn dim(&self) -> usize {
        self.wq.shape()[0]
    }

    pub fn kv_dim(&self) -> usize {
        self.wk.shape()[1]
    }

    pub fn head_dim(&self) -> usize {
        self.dim() / self.heads
    }

    /// Zeroes the attention and feed-forward output projections so the block
    /// reduces to its residual path followed by the two layer norms.
    pub fn zero_output_projections(&mut self) {
        for t in [&mut self.wo, &mut self.bo, &mut self.ffn2, &mut self.ffn2_b] {
            t.data_mut().fill(0.0);
        }
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 16] {
        [
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
            ("ffn1", &self.ffn1),
            ("ffn1_b", &self.ffn1_b),
            ("ffn2", &self.ffn2),
            ("ffn2_b", &self.ffn2_b),
            ("ln1_scale", &self.ln1_scale),
            ("ln1_shift", &self.ln1_shift),
            ("ln2_scale", &self.ln2_scale),
            ("ln2_shift", &self.ln2_shift),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 16] {
        [
            ("wq", &mut self.wq),
            ("bq", &mut self.bq),
            ("wk", &mut self.wk),
            ("bk", &mut self.bk),
            ("wv", &mut self.wv),
            ("bv", &mut self.bv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
            ("ffn1", &mut self.ffn1),
            ("ffn1_b", &mut self.ffn1_b),
            ("ffn2", &mut self.ffn2),
            ("ffn2_b", &mut self.ffn2_b),
            ("ln1_scale", &mut self.ln1_scale),
            ("ln1_shift", &mut self.ln1_shift),
            ("ln2_scale", &mut self.ln2_scale),
            ("ln2_shift", &mut self.ln2_shift),
        ]
    }
}

impl Params for AttentionParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        for (name, t) in self.tensors() {
            out.insert(join(prefix, name), t.clone());
        }
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        for (name, t) in self.tensors_mut() {
            src.load_into(&join(prefix, name), t)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulationParams {
    /// `C′×2C′` 1×1 convolution over `Concat(x, y)`.
    pub wz: Tensor,
    pub bz: Tensor,
    pub fc1: Tensor,
    pub fc1_b: Tensor,
    pub fc2: Tensor,
    pub fc2_b: Tensor,
    pub gamma: f32,
}

impl ModulationParams {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, gamma: f32) -> Self {
        let (wz, bz) = dense_init(rng, dim, 2 * dim);
        let (fc1, fc1_b) = dense_init(rng, dim / SE_REDUCTION, dim);
        let (fc2, fc2_b) = dense_init(rng, dim, dim / SE_REDUCTION);
        Self { wz, bz, fc1, fc1_b, fc2, fc2_b, gamma }
    }
}

impl Params for ModulationParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        for (name, t) in [
            ("wz", &self.wz),
            ("bz", &self.bz),
            ("fc1", &self.fc1),
            ("fc1_b", &self.fc1_b),
            ("fc2", &self.fc2),
            ("fc2_b", &self.fc2_b),
        ] {
            out.insert(join(prefix, name), t.clone());
        }
        out.insert(join(prefix, "gamma"), Tensor::full(&[1], self.gamma));
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        for (name, t) in [
            ("wz", &mut self.wz),
            ("bz", &mut self.bz),
            ("fc1", &mut self.fc1),
            ("fc1_b", &mut self.fc1_b),
            ("fc2", &mut self.fc2),
            ("fc2_b", &mut self.fc2_b),
        ] {
            src.load_into(&join(prefix, name), t)?;
        }
        let mut g = Tensor::zeros(&[1]);
        src.load_into(&join(prefix, "gamma"), &mut g)?;
        self.gamma = g.data()[0];
        Ok(())
    }
}

fn project(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut y = matmul_bt(x, w)?;
    add_row_bias(&mut y, b)?;
    Ok(y)
}

/// Columns `[start, start + len)` of a row-major matrix, copied.
fn columns(m: &Tensor, start: usize, len: usize) -> Tensor {
    let (r, c) = m.dims2().expect("2-D");
    let mut out = Vec::with_capacity(r * len);
    for i in 0..r {
        out.extend_from_slice(&m.data()[i * c + start..i * c + start + len]);
    }
    Tensor::new(vec![r, len], out).expect("column block")
}

/// Scaled dot-product attention over `heads` heads, followed by the output
/// projection. Token inputs are `Nq×C′` and `Nk×d_in`.
pub fn multi_head_attention(q: &Tensor, k: &Tensor, v: &Tensor, p: &AttentionParams) -> Result<Tensor> {
    attention_impl(q, k, v, p, false).map(|(o, _)| o)
}

/// Same as [`multi_head_attention`], also returning each head's `Nq×Nk`
/// attention-weight matrix.
pub fn multi_head_attention_with_weights(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    p: &AttentionParams,
) -> Result<(Tensor, Vec<Tensor>)> {
    attention_impl(q, k, v, p, true)
}

fn attention_impl(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    p: &AttentionParams,
    keep_weights: bool,
) -> Result<(Tensor, Vec<Tensor>)> {
    let (nq, dq) = q.dims2()?;
    let (nk, dk) = k.dims2()?;
    let (nv, dv) = v.dims2()?;
    if nk != nv {
        return Err(Error::dim(format!("{nk} keys but {nv} values")));
    }
    if dq != p.dim() || dk != p.kv_dim() || dv != p.kv_dim() {
        return Err(Error::dim(format!(
            "attention inputs q {:?}, k {:?}, v {:?} against dim {} / kv dim {}",
            q.shape(),
            k.shape(),
            v.shape(),
            p.dim(),
            p.kv_dim()
        )));
    }
    let qp = project(q, &p.wq, &p.bq)?;
    let kp = project(k, &p.wk, &p.bk)?;
    let vp = project(v, &p.wv, &p.bv)?;
    let (c, hd) = (p.dim(), p.head_dim());
    let scale = 1.0 / (hd as f32).sqrt();
    let mut merged = vec![0.0f32; nq * c];
    let mut weights = Vec::new();
    for h in 0..p.heads {
        let qh = columns(&qp, h * hd, hd);
        let kh = columns(&kp, h * hd, hd);
        let vh = columns(&vp, h * hd, hd);
        let mut logits = matmul_bt(&qh, &kh)?;
        for row in logits.data_mut().chunks_mut(nk) {
            for x in row.iter_mut() {
                *x *= scale;
            }
            softmax_in_place(row);
        }
        let oh = matmul(&logits, &vh)?;
        for i in 0..nq {
            merged[i * c + h * hd..i * c + (h + 1) * hd].copy_from_slice(oh.row(i));
        }
        if keep_weights {
            weights.push(logits);
        }
    }
    let merged = Tensor::new(vec![nq, c], merged)?;
    Ok((project(&merged, &p.wo, &p.bo)?, weights))
}

fn feed_forward(x: &Tensor, p: &AttentionParams) -> Result<Tensor> {
    let hidden = relu(&project(x, &p.ffn1, &p.ffn1_b)?);
    project(&hidden, &p.ffn2, &p.ffn2_b)
}

/// Pooling-attention block. `k_map` and `v_map` are pooled by `r`; the
/// output has the query map's spatial extent.
pub fn pa_block(
    q_map: &FeatureMap,
    k_map: &FeatureMap,
    v_map: &FeatureMap,
    r: usize,
    p: &AttentionParams,
) -> Result<FeatureMap> {
    pa_block_traced(q_map, k_map, v_map, r, p, false).map(|(m, _)| m)
}

/// [`pa_block`] that also returns per-head attention weights.
pub fn pa_block_with_weights(
    q_map: &FeatureMap,
    k_map: &FeatureMap,
    v_map: &FeatureMap,
    r: usize,
    p: &AttentionParams,
) -> Result<(FeatureMap, Vec<Tensor>)> {
    pa_block_traced(q_map, k_map, v_map, r, p, true)
}

fn pa_block_traced(
    q_map: &FeatureMap,
    k_map: &FeatureMap,
    v_map: &FeatureMap,
    r: usize,
    p: &AttentionParams,
    keep_weights: bool,
) -> Result<(FeatureMap, Vec<Tensor>)> {
    if q_map.channels() != p.dim() {
        return Err(Error::dim(format!(
            "query map has {} channels, block expects {}",
            q_map.channels(),
            p.dim()
        )));
    }
    let q = flatten_spatial(q_map);
    let k = flatten_spatial(&spatial_pool(k_map, r)?);
    let v = flatten_spatial(&spatial_pool(v_map, r)?);
    let (attn, weights) = attention_impl(&q, &k, &v, p, keep_weights)?;
    let x = layer_norm_rows(&q.add(&attn)?, &p.ln1_scale, &p.ln1_shift, LN_EPS)?;
    let ff = feed_forward(&x, p)?;
    let out = layer_norm_rows(&x.add(&ff)?, &p.ln2_scale, &p.ln2_shift, LN_EPS)?;
    Ok((unflatten_spatial(&out, q_map.height(), q_map.width(), q_map.stride())?, weights))
}

/// Modulated pooling attention.
pub fn mpa_block(
    x_map: &FeatureMap,
    k_map: &FeatureMap,
    v_map: &FeatureMap,
    r: usize,
    p: &AttentionParams,
    m: &ModulationParams,
) -> Result<FeatureMap> {
    mpa_block_with_weights(x_map, k_map, v_map, r, p, m).map(|(o, _)| o)
}

pub fn mpa_block_with_weights(
    x_map: &FeatureMap,
    k_map: &FeatureMap,
    v_map: &FeatureMap,
    r: usize,
    p: &AttentionParams,
    m: &ModulationParams,
) -> Result<(FeatureMap, Vec<Tensor>)> {
    let (y, weights) = pa_block_traced(x_map, k_map, v_map, r, p, true)?;
    let z = conv1x1(&concat_channels(&[x_map, &y])?, &m.wz, &m.bz)?;
    let pooled = adaptive_avg_pool(&y);
    let hidden = relu(&linear(&pooled, &m.fc1, &m.fc1_b)?);
    let w = linear(&hidden, &m.fc2, &m.fc2_b)?;
    let mut out = x_map.clone();
    // gamma == 0 leaves x untouched bit for bit (x + 0.0 would flip -0.0)
    if m.gamma != 0.0 {
        let hw = x_map.spatial();
        for (ch, wc) in w.data().iter().enumerate() {
            let zc = &z.data()[ch * hw..(ch + 1) * hw];
            for (o, zv) in out.data_mut()[ch * hw..(ch + 1) * hw].iter_mut().zip(zc) {
                *o += m.gamma * (zv * wc);
            }
        }
    }
    Ok((out, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    fn fmap(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap {
        FeatureMap::new(random(rng, &[c, h, w]), 16).unwrap()
    }

    /// Straight per-head loop with explicit dot products.
    fn oracle_mha(q: &Tensor, k: &Tensor, v: &Tensor, p: &AttentionParams) -> Tensor {
        let proj = |x: &Tensor, w: &Tensor, b: &Tensor| -> Vec<Vec<f64>> {
            let (n, d) = x.dims2().unwrap();
            let o = w.shape()[0];
            (0..n)
                .map(|i| {
                    (0..o)
                        .map(|j| {
                            b.data()[j] as f64
                                + (0..d).map(|t| w.data()[j * d + t] as f64 * x.data()[i * d + t] as f64).sum::<f64>()
                        })
                        .collect()
                })
                .collect()
        };
        let (qp, kp, vp) = (proj(q, &p.wq, &p.bq), proj(k, &p.wk, &p.bk), proj(v, &p.wv, &p.bv));
        let (c, hd) = (p.dim(), p.head_dim());
        let mut merged = vec![vec![0.0f64; c]; qp.len()];
        for h in 0..p.heads {
            for (i, qi) in qp.iter().enumerate() {
                let logits: Vec<f64> = kp
                    .iter()
                    .map(|kj| (0..hd).map(|t| qi[h * hd + t] * kj[h * hd + t]).sum::<f64>() / (hd as f64).sqrt())
                    .collect();
                let mx = logits.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
                let s: f64 = e.iter().sum();
                for t in 0..hd {
                    merged[i][h * hd + t] = e.iter().zip(&vp).map(|(a, vj)| a / s * vj[h * hd + t]).sum();
                }
            }
        }
        let flat: Vec<f32> = merged.concat().iter().map(|&x| x as f32).collect();
        let m = Tensor::new(vec![qp.len(), c], flat).unwrap();
        let out = proj(&m, &p.wo, &p.bo);
        Tensor::new(vec![out.len(), c], out.concat().iter().map(|&x| x as f32).collect()).unwrap()
    }

    #[test]
    fn mha_matches_per_head_oracle() {
        let mut r = rng(1);
        let p = AttentionParams::random(&mut r, 12, 20, 3).unwrap();
        let q = random(&mut r, &[4, 12]);
        let k = random(&mut r, &[4, 20]);
        let v = random(&mut r, &[4, 20]);
        let got = multi_head_attention(&q, &k, &v, &p).unwrap();
        assert!(got.max_abs_diff(&oracle_mha(&q, &k, &v, &p)) < 1e-5);
    }

    #[test]
    fn single_key_returns_projected_value() {
        let mut r = rng(2);
        let p = AttentionParams::random(&mut r, 12, 12, 3).unwrap();
        let k = random(&mut r, &[1, 12]);
        let v = random(&mut r, &[1, 12]);
        let a = multi_head_attention(&random(&mut r, &[3, 12]), &k, &v, &p).unwrap();
        let b = multi_head_attention(&random(&mut r, &[3, 12]), &k, &v, &p).unwrap();
        let expected = project(&project(&v, &p.wv, &p.bv).unwrap(), &p.wo, &p.bo).unwrap();
        for i in 0..3 {
            for (x, y) in a.row(i).iter().zip(expected.row(0)) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        assert!(a.max_abs_diff(&b) < 1e-6);
    }

    #[test]
    fn zero_queries_and_keys_attend_uniformly() {
        let mut r = rng(3);
        let mut p = AttentionParams::random(&mut r, 12, 12, 2).unwrap();
        p.wq = Tensor::eye(12);
        p.wk = Tensor::eye(12);
        p.bq.data_mut().fill(0.0);
        p.bk.data_mut().fill(0.0);
        let z = Tensor::zeros(&[5, 12]);
        let (_, w) = multi_head_attention_with_weights(&z, &z, &random(&mut r, &[5, 12]), &p).unwrap();
        for head in &w {
            assert!(head.data().iter().all(|&x| (x - 0.2).abs() < 1e-7));
        }
    }

    #[test]
    fn mha_rejects_mismatched_tokens() {
        let mut r = rng(4);
        let p = AttentionParams::random(&mut r, 12, 12, 2).unwrap();
        let err = multi_head_attention(
            &Tensor::zeros(&[2, 12]),
            &Tensor::zeros(&[3, 12]),
            &Tensor::zeros(&[4, 12]),
            &p,
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
        assert!(AttentionParams::random(&mut r, 10, 10, 3).is_err());
    }

    #[test]
    fn key_permutation_equivariance() {
        let mut r = rng(5);
        let p = AttentionParams::random(&mut r, 12, 12, 3).unwrap();
        let q = random(&mut r, &[4, 12]);
        let k = random(&mut r, &[6, 12]);
        let v = random(&mut r, &[6, 12]);
        let perm = [3, 0, 5, 1, 4, 2];
        let pk = Tensor::new(vec![6, 12], perm.iter().flat_map(|&i| k.row(i).to_vec()).collect()).unwrap();
        let pv = Tensor::new(vec![6, 12], perm.iter().flat_map(|&i| v.row(i).to_vec()).collect()).unwrap();
        let a = multi_head_attention(&q, &k, &v, &p).unwrap();
        let b = multi_head_attention(&q, &pk, &pv, &p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-5);
    }

    #[test]
    fn pa_block_pools_keys_with_ceil_mode() {
        let mut r = rng(6);
        let p = AttentionParams::random(&mut r, 192, 192, 6).unwrap();
        let x = fmap(&mut r, 192, 5, 5);
        let (out, w) = pa_block_with_weights(&x, &x, &x, 2, &p).unwrap();
        assert_eq!(out.dims(), (192, 5, 5));
        assert_eq!(w[0].shape(), &[25, 9]);
        let (_, w) = pa_block_with_weights(&x, &x, &x, 1, &p).unwrap();
        assert_eq!(w[0].shape(), &[25, 25]);
        for head in &w {
            for i in 0..25 {
                let s: f64 = head.row(i).iter().map(|&v| v as f64).sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pa_block_keeps_query_extent() {
        let mut r = rng(7);
        let p = AttentionParams::random(&mut r, 24, 24, 6).unwrap();
        let q = fmap(&mut r, 24, 6, 4);
        for (kh, kw, ratio) in [(12, 8, 4), (3, 2, 1), (7, 7, 2)] {
            let k = fmap(&mut r, 24, kh, kw);
            assert_eq!(pa_block(&q, &k, &k, ratio, &p).unwrap().dims(), (24, 6, 4));
        }
    }

    #[test]
    fn mpa_gamma_zero_is_identity() {
        let mut r = rng(8);
        let p = AttentionParams::random(&mut r, 24, 24, 6).unwrap();
        let m = ModulationParams::random(&mut r, 24, 0.0);
        let x = fmap(&mut r, 24, 4, 4);
        let k = fmap(&mut r, 24, 8, 8);
        let out = mpa_block(&x, &k, &k, 4, &p, &m).unwrap();
        assert_eq!(out, x);
        let m1 = ModulationParams { gamma: 0.5, ..m };
        assert_ne!(mpa_block(&x, &k, &k, 4, &p, &m1).unwrap(), x);
    }

    #[test]
    fn mpa_hand_arithmetic_on_single_pixel() {
        // One channel pair (C′ = 4, 1×1 spatial). With all attention weights
        // zero, y = LN(x) = LN of a known vector; z and w are built from unit
        // weights so out = x + z * w can be computed by hand.
        let mut r = rng(9);
        let dim = 4;
        let mut p = AttentionParams::random(&mut r, dim, dim, 1).unwrap();
        for t in [&mut p.wq, &mut p.bq, &mut p.wk, &mut p.bk, &mut p.wv, &mut p.bv, &mut p.wo, &mut p.bo] {
            t.data_mut().fill(0.0);
        }
        p.zero_output_projections();
        let x = FeatureMap::new(Tensor::new(vec![4, 1, 1], vec![1.0, -1.0, 1.0, -1.0]).unwrap(), 16).unwrap();
        // LN of [1,-1,1,-1]: mean 0, var 1 → y = x/√(1+ε)
        let yscale = 1.0 / (1.0f64 + 1e-5).sqrt();
        let m = ModulationParams {
            // z_c = x_c + y_c
            wz: Tensor::new(vec![4, 8], (0..32).map(|i| if i % 8 == i / 8 || i % 8 == i / 8 + 4 { 1.0 } else { 0.0 }).collect()).unwrap(),
            bz: Tensor::zeros(&[4]),
            // avgpool(y) = y; fc1 = zero weight, bias 1 → hidden 1; fc2 = zero weight, bias 2 → w = 2
            fc1: Tensor::zeros(&[1, 4]),
            fc1_b: Tensor::full(&[1], 1.0),
            fc2: Tensor::zeros(&[4, 1]),
            fc2_b: Tensor::full(&[4], 2.0),
            gamma: 1.0,
        };
        let out = mpa_block(&x, &x, &x, 1, &p, &m).unwrap();
        for (o, xv) in out.data().iter().zip(x.data()) {
            let xv = *xv as f64;
            let expected = xv + (xv + xv * yscale) * 2.0;
            assert!((*o as f64 - expected).abs() < 1e-5, "{o} vs {expected}");
        }
    }

    #[test]
    fn params_round_trip_through_store() {
        let mut r = rng(10);
        let p = AttentionParams::random(&mut r, 12, 24, 3).unwrap();
        let m = ModulationParams::random(&mut r, 12, 0.25);
        let mut store = ParamStore::default();
        p.collect("blk", &mut store);
        m.collect("mod", &mut store);
        let mut p2 = AttentionParams::random(&mut r, 12, 24, 3).unwrap();
        let mut m2 = ModulationParams::random(&mut r, 12, 0.0);
        p2.assign("blk", &store).unwrap();
        m2.assign("mod", &store).unwrap();
        assert_eq!((p, m), (p2, m2));
    }
}
