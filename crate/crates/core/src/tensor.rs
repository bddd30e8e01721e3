//! Dense row-major `f32` tensors and the handful of kernels the network
//! blocks are built from.
//!
//! Every kernel is a pure function of its inputs. Matrix products are
//! routed through [`matmul`]/[`matmul_bt`], which also feed a per-thread
//! multiply-accumulate counter used by the complexity accounting.

use std::cell::Cell;
use std::fmt;

use crate::error::{Error, Result};

thread_local! {
    static MACS: Cell<u64> = const { Cell::new(0) };
}

/// Multiply-accumulates executed by matrix-product kernels on this thread
/// since the last [`reset_mac_count`].
pub fn mac_count() -> u64 {
    MACS.with(|c| c.get())
}

pub fn reset_mac_count() {
    MACS.with(|c| c.set(0));
}

pub(crate) fn add_macs(n: usize) {
    MACS.with(|c| c.set(c.get() + n as u64));
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::dim(format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero extent in {shape:?}");
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(&mut f).collect();
        Self::new(shape.to_vec(), data).expect("from_fn shape")
    }

    /// `n`×`n` identity matrix.
    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Rows and columns of a 2-D tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::dim(format!("expected 2-D tensor, got {:?}", self.shape))),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let c = *self.shape.last().unwrap();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn transpose2d(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Self::new(vec![c, r], out)
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dim(format!(
                "elementwise add of {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn scale(&self, k: f32) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|v| v * k).collect() }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// A `C×H×W` activation map together with its stride in input pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    tensor: Tensor,
    stride: usize,
}

impl FeatureMap {
    pub fn new(tensor: Tensor, stride: usize) -> Result<Self> {
        if tensor.ndim() != 3 {
            return Err(Error::dim(format!(
                "feature map must be C×H×W, got {:?}",
                tensor.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::dim("feature map stride must be positive"));
        }
        Ok(Self { tensor, stride })
    }

    pub fn zeros(c: usize, h: usize, w: usize, stride: usize) -> Self {
        Self { tensor: Tensor::zeros(&[c, h, w]), stride }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor {
        self.tensor
    }

    pub fn data(&self) -> &[f32] {
        self.tensor.data()
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        self.tensor.data_mut()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }

    /// (C, H, W)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels(), self.height(), self.width())
    }

    pub fn spatial(&self) -> usize {
        self.height() * self.width()
    }

    /// Contiguous `H×W` plane of channel `c`.
    pub fn plane(&self, c: usize) -> &[f32] {
        let hw = self.spatial();
        &self.data()[c * hw..(c + 1) * hw]
    }

    pub fn add(&self, other: &FeatureMap) -> Result<Self> {
        Ok(Self { tensor: self.tensor.add(&other.tensor)?, stride: self.stride })
    }

    /// Channels `[start, start + len)` as a new map.
    pub fn channel_block(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.channels() || len == 0 {
            return Err(Error::dim(format!(
                "channel block {start}..{} out of range for {} channels",
                start + len,
                self.channels()
            )));
        }
        let hw = self.spatial();
        let data = self.data()[start * hw..(start + len) * hw].to_vec();
        Self::new(Tensor::new(vec![len, self.height(), self.width()], data)?, self.stride)
    }
}

unsafe fn sgemm_raw(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (isize, isize),
    b: &[f32],
    (rsb, csb): (isize, isize),
    c: &mut [f32],
) {
    matrixmultiply::sgemm(
        m,
        k,
        n,
        1.0,
        a.as_ptr(),
        rsa,
        csa,
        b.as_ptr(),
        rsb,
        csb,
        0.0,
        c.as_mut_ptr(),
        n as isize,
        1,
    );
}

/// `a (M×K) · b (K×N)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner extents differ: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0f32; m * n];
    // SAFETY: extents checked above; the strides describe dense row-major buffers.
    unsafe {
        sgemm_raw(m, k, n, a.data(), (k as isize, 1), b.data(), (n as isize, 1), &mut out);
    }
    add_macs(m * k * n);
    Tensor::new(vec![m, n], out)
}

/// `a (M×K) · bᵀ` where `b` is `N×K`. Weight matrices are stored `out×in`,
/// so token projections go through here without materializing a transpose.
pub fn matmul_bt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (n, k2) = b.dims2()?;
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul_bt inner extents differ: {:?} x {:?}ᵀ",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0f32; m * n];
    // SAFETY: `b` viewed with swapped strides is its K×N transpose.
    unsafe {
        sgemm_raw(m, k, n, a.data(), (k as isize, 1), b.data(), (1, k as isize), &mut out);
    }
    add_macs(m * k * n);
    Tensor::new(vec![m, n], out)
}

/// Adds `bias[j]` to column `j` of every row.
pub fn add_row_bias(m: &mut Tensor, bias: &Tensor) -> Result<()> {
    let (_, c) = m.dims2()?;
    if bias.len() != c {
        return Err(Error::dim(format!(
            "bias of length {} for {c} columns",
            bias.len()
        )));
    }
    for row in m.data_mut().chunks_mut(c) {
        for (v, b) in row.iter_mut().zip(bias.data()) {
            *v += b;
        }
    }
    Ok(())
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(m: &Tensor) -> Result<Tensor> {
    let (_, c) = m.dims2()?;
    let mut out = m.clone();
    for row in out.data_mut().chunks_mut(c) {
        softmax_in_place(row);
    }
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f64;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v as f64;
    }
    let inv = (1.0 / sum) as f32;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Per-pixel linear map `C×H×W → C′×H×W` with `weight: C′×C`.
pub fn conv1x1(input: &FeatureMap, weight: &Tensor, bias: &Tensor) -> Result<FeatureMap> {
    let (c, h, w) = input.dims();
    let (co, ci) = weight.dims2()?;
    if ci != c {
        return Err(Error::dim(format!(
            "conv1x1 weight {:?} against {c} input channels",
            weight.shape()
        )));
    }
    if bias.len() != co {
        return Err(Error::dim(format!("conv1x1 bias of length {} for {co} outputs", bias.len())));
    }
    let x = Tensor::new(vec![c, h * w], input.data().to_vec())?;
    let mut y = matmul(weight, &x)?.into_data();
    for (plane, b) in y.chunks_mut(h * w).zip(bias.data()) {
        for v in plane {
            *v += b;
        }
    }
    FeatureMap::new(Tensor::new(vec![co, h, w], y)?, input.stride())
}

/// Global average pool to `C×1×1`.
pub fn adaptive_avg_pool(input: &FeatureMap) -> Tensor {
    let (c, _, _) = input.dims();
    let hw = input.spatial();
    let data = (0..c)
        .map(|ch| {
            let s: f64 = input.plane(ch).iter().map(|&v| v as f64).sum();
            (s / hw as f64) as f32
        })
        .collect();
    Tensor::new(vec![c, 1, 1], data).expect("pool shape")
}

/// Affine map `weight · x + bias` for a vector `x`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = weight.dims2()?;
    if x.len() != n || bias.len() != m {
        return Err(Error::dim(format!(
            "linear: weight {:?}, input {:?}, bias {:?}",
            weight.shape(),
            x.shape(),
            bias.shape()
        )));
    }
    let data = (0..m)
        .map(|i| {
            let dot: f64 = weight
                .row(i)
                .iter()
                .zip(x.data())
                .map(|(&w, &v)| w as f64 * v as f64)
                .sum();
            (dot + bias.data()[i] as f64) as f32
        })
        .collect();
    add_macs(m * n);
    Tensor::new(vec![m], data)
}

/// Channel concatenation in argument order.
pub fn concat_channels(maps: &[&FeatureMap]) -> Result<FeatureMap> {
    let first = maps.first().ok_or_else(|| Error::dim("concat of zero maps"))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(maps.iter().map(|m| m.data().len()).sum());
    let mut c = 0;
    for m in maps {
        if m.height() != h || m.width() != w {
            return Err(Error::dim(format!(
                "concat spatial mismatch: {h}×{w} vs {}×{}",
                m.height(),
                m.width()
            )));
        }
        data.extend_from_slice(m.data());
        c += m.channels();
    }
    FeatureMap::new(Tensor::new(vec![c, h, w], data)?, first.stride())
}

/// Average pooling with an `r×r` window and stride `r`, ceil mode: partial
/// edge windows average only the cells they cover.
pub fn spatial_pool(input: &FeatureMap, r: usize) -> Result<FeatureMap> {
    if r == 0 {
        return Err(Error::dim("pooling ratio must be positive"));
    }
    if r == 1 {
        return Ok(input.clone());
    }
    let (c, h, w) = input.dims();
    let (ho, wo) = (h.div_ceil(r), w.div_ceil(r));
    let mut out = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        let plane = input.plane(ch);
        for oy in 0..ho {
            let (y0, y1) = (oy * r, ((oy + 1) * r).min(h));
            for ox in 0..wo {
                let (x0, x1) = (ox * r, ((ox + 1) * r).min(w));
                let mut s = 0.0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        s += plane[y * w + x] as f64;
                    }
                }
                out.push((s / ((y1 - y0) * (x1 - x0)) as f64) as f32);
            }
        }
    }
    FeatureMap::new(Tensor::new(vec![c, ho, wo], out)?, input.stride() * r)
}

/// `C×H×W → (H·W)×C`; row `k` is the channel vector at row-major spatial index `k`.
pub fn flatten_spatial(input: &FeatureMap) -> Tensor {
    let (c, h, w) = input.dims();
    Tensor::new(vec![c, h * w], input.data().to_vec())
        .and_then(|t| t.transpose2d())
        .expect("flatten shape")
}

/// Inverse of [`flatten_spatial`].
pub fn unflatten_spatial(tokens: &Tensor, h: usize, w: usize, stride: usize) -> Result<FeatureMap> {
    let (n, c) = tokens.dims2()?;
    if n != h * w {
        return Err(Error::dim(format!("{n} tokens cannot form a {h}×{w} grid")));
    }
    let t = tokens.transpose2d()?;
    FeatureMap::new(t.reshape(&[c, h, w])?, stride)
}

/// Per-row layer normalization over the last axis.
pub fn layer_norm_rows(m: &Tensor, scale: &Tensor, shift: &Tensor, eps: f32) -> Result<Tensor> {
    let (_, c) = m.dims2()?;
    if scale.len() != c || shift.len() != c {
        return Err(Error::dim(format!("layer norm parameters for {c} features")));
    }
    let mut out = m.clone();
    for row in out.data_mut().chunks_mut(c) {
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / c as f64;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + eps as f64).sqrt();
        for ((v, g), b) in row.iter_mut().zip(scale.data()).zip(shift.data()) {
            *v = ((*v as f64 - mean) * inv) as f32 * g + b;
        }
    }
    Ok(out)
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| v.max(0.0))
}
