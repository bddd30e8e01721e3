//! Classification/regression head, box decoding and the training loss.
//!
//! Each tower is `conv1x1 → GELU → conv1x1`. The regression tower emits log
//! edge distances (left, top, right, bottom) in feature cells; decoding
//! exponentiates them and scales by the stride around the cell centre
//! `((col + 0.5)·stride, (row + 0.5)·stride)`.
//!
//! Training runs in `f64` on a flat parameter vector (see [`FlatLayout`]) so
//! that finite-difference checks are meaningful.

use rand_chacha::ChaCha8Rng;

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::fusion::FusedFeatures;
use crate::params::{dense_init, join, ParamStore, Params};
use crate::tensor::{conv1x1, FeatureMap, Tensor};

pub const HEAD_HIDDEN: usize = 192;
/// Log distances are clamped to `±RAW_CLAMP` before exponentiation.
pub const RAW_CLAMP: f64 = 8.0;

const GELU_K: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_C: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Edge distance from a raw regression output.
pub fn reg_activation(raw: f64) -> f64 {
    raw.clamp(-RAW_CLAMP, RAW_CLAMP).exp()
}

fn reg_activation_grad(raw: f64) -> f64 {
    if raw.abs() < RAW_CLAMP {
        raw.exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tower {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl Tower {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, hidden: usize, out: usize) -> Self {
        let (w1, b1) = dense_init(rng, hidden, dim);
        let (w2, b2) = dense_init(rng, out, hidden);
        Self { w1, b1, w2, b2 }
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<FeatureMap> {
        let h = conv1x1(x, &self.w1, &self.b1)?;
        let a = FeatureMap::new(h.tensor().map(|v| gelu(v as f64) as f32), h.stride())?;
        conv1x1(&a, &self.w2, &self.b2)
    }

    fn tensors(&self) -> [&Tensor; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

const TOWER_NAMES: [&str; 4] = ["w1", "b1", "w2", "b2"];

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub cls: Tower,
    pub reg: Tower,
}

impl HeadParams {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, hidden: usize) -> Self {
        let cls = Tower::random(rng, dim, hidden, 1);
        let reg = Tower::random(rng, dim, hidden, 4);
        Self { cls, reg }
    }

    pub fn layout(&self) -> FlatLayout {
        FlatLayout { dim: self.cls.w1.shape()[1], hidden: self.cls.w1.shape()[0] }
    }

    /// Parameters in [`FlatLayout`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.cls
            .tensors()
            .into_iter()
            .chain(self.reg.tensors())
            .flat_map(|t| t.data().iter().map(|&v| v as f64))
            .collect()
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        let n = self.layout().len();
        if theta.len() != n {
            return Err(Error::dim(format!("flat head vector of length {} for {n} parameters", theta.len())));
        }
        let mut it = theta.iter();
        for t in self.cls.tensors_mut().into_iter().chain(self.reg.tensors_mut()) {
            for v in t.data_mut() {
                *v = *it.next().unwrap() as f32;
            }
        }
        Ok(())
    }
}

impl Params for HeadParams {
    fn collect(&self, prefix: &str, out: &mut ParamStore) {
        for (tower, name) in [(&self.cls, "cls"), (&self.reg, "reg")] {
            for (t, n) in tower.tensors().into_iter().zip(TOWER_NAMES) {
                out.insert(join(prefix, &format!("{name}.{n}")), t.clone());
            }
        }
    }

    fn assign(&mut self, prefix: &str, src: &ParamStore) -> Result<()> {
        for (tower, name) in [(&mut self.cls, "cls"), (&mut self.reg, "reg")] {
            for (t, n) in tower.tensors_mut().into_iter().zip(TOWER_NAMES) {
                src.load_into(&join(prefix, &format!("{name}.{n}")), t)?;
            }
        }
        Ok(())
    }
}

/// Offsets of the head parameters in the flat vector:
/// `cls.w1, cls.b1, cls.w2, cls.b2, reg.w1, reg.b1, reg.w2, reg.b2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlatLayout {
    pub dim: usize,
    pub hidden: usize,
}

impl FlatLayout {
    fn tower_len(&self, out: usize) -> usize {
        self.hidden * self.dim + self.hidden + out * self.hidden + out
    }

    pub fn len(&self) -> usize {
        self.tower_len(1) + self.tower_len(4)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Start of the regression tower.
    pub fn reg_offset(&self) -> usize {
        self.tower_len(1)
    }
}

/// Decoded head output for one search map.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// `1×H×W` classification logits.
    pub cls_map: Tensor,
    /// `4×H×W` edge distances in feature cells.
    pub reg_map: Tensor,
    /// Row-major index of the selected cell.
    pub cell: usize,
    /// Decoded box in the coordinates of the search crop.
    pub bbox: BBox,
    pub conf: f64,
}

fn cell_center(n: usize, width: usize, stride: f64) -> (f64, f64) {
    (((n % width) as f64 + 0.5) * stride, ((n / width) as f64 + 0.5) * stride)
}

fn cell_box(cx: f64, cy: f64, d: [f64; 4], stride: f64) -> [f64; 4] {
    [cx - d[0] * stride, cy - d[1] * stride, cx + d[2] * stride, cy + d[3] * stride]
}

/// Picks the highest-scoring cell (lowest index on ties) and decodes its box.
pub fn decode(cls_map: Tensor, reg_map: Tensor, stride: usize) -> Result<Prediction> {
    let (&[1, h, w], &[4, h2, w2]) = (cls_map.shape(), reg_map.shape()) else {
        return Err(Error::dim(format!(
            "head maps {:?} and {:?} are not 1×H×W and 4×H×W",
            cls_map.shape(),
            reg_map.shape()
        )));
    };
    if (h, w) != (h2, w2) {
        return Err(Error::dim(format!("cls map {h}×{w} against reg map {h2}×{w2}")));
    }
    let mut cell = 0;
    for (i, &v) in cls_map.data().iter().enumerate() {
        if v > cls_map.data()[cell] {
            cell = i;
        }
    }
    let n = h * w;
    let d = [0, 1, 2, 3].map(|k| reg_map.data()[k * n + cell] as f64);
    let s = stride as f64;
    let (cx, cy) = cell_center(cell, w, s);
    let [x1, y1, x2, y2] = cell_box(cx, cy, d, s);
    let conf = sigmoid(cls_map.data()[cell] as f64);
    Ok(Prediction { cls_map, reg_map, cell, bbox: BBox::from_corners(x1, y1, x2, y2), conf })
}

pub fn predict(fused: &FusedFeatures, p: &HeadParams) -> Result<Prediction> {
    let cls = p.cls.forward(&fused.map)?;
    let reg = p.reg.forward(&fused.map)?;
    let reg_map = reg.tensor().map(|v| reg_activation(v as f64) as f32);
    decode(cls.into_tensor(), reg_map, fused.map.stride())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub cls: f64,
    pub iou: f64,
    pub reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { cls: 5.0, iou: 2.0, reg: 2.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.cls, self.iou, self.reg].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("loss weights {self:?} must be non-negative")))
        }
    }

    pub fn combine(&self, c: &LossComponents) -> f64 {
        self.cls * c.cls + self.iou * c.iou + self.reg * c.reg
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub cls: f64,
    pub iou: f64,
    pub reg: f64,
}

/// Ground truth for one `H×W` map: cells whose centres fall inside `gt` are
/// positive. `gt = None` marks an absent target (all cells negative).
#[derive(Clone, Debug, PartialEq)]
pub struct HeadTargets {
    pub gt: Option<BBox>,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
}

impl HeadTargets {
    pub fn labels(&self) -> Vec<bool> {
        let s = self.stride as f64;
        (0..self.height * self.width)
            .map(|n| {
                let (cx, cy) = cell_center(n, self.width, s);
                self.gt.is_some_and(|g| g.contains_point(cx, cy))
            })
            .collect()
    }
}

/// GIoU of two corner boxes `[x1, y1, x2, y2]` and its gradient with
/// respect to the first box.
pub fn giou_with_grad(p: [f64; 4], g: [f64; 4]) -> (f64, [f64; 4]) {
    let [x1, y1, x2, y2] = p;
    let [gx1, gy1, gx2, gy2] = g;
    let (pw, ph) = (x2 - x1, y2 - y1);
    let ap = pw * ph;
    let ag = (gx2 - gx1) * (gy2 - gy1);
    let (ix1, ix2, iy1, iy2) = (x1.max(gx1), x2.min(gx2), y1.max(gy1), y2.min(gy2));
    let (iw, ih) = ((ix2 - ix1).max(0.0), (iy2 - iy1).max(0.0));
    let inter = iw * ih;
    let union = ap + ag - inter;
    let (cw, ch) = (x2.max(gx2) - x1.min(gx1), y2.max(gy2) - y1.min(gy1));
    let hull = cw * ch;
    let value = inter / union - 1.0 + union / hull;

    let live_x = iw > 0.0;
    let live_y = ih > 0.0;
    let d_inter = [
        if live_x && x1 > gx1 { -ih } else { 0.0 },
        if live_y && y1 > gy1 { -iw } else { 0.0 },
        if live_x && x2 < gx2 { ih } else { 0.0 },
        if live_y && y2 < gy2 { iw } else { 0.0 },
    ];
    let d_ap = [-ph, -pw, ph, pw];
    let d_hull = [
        if x1 < gx1 { -ch } else { 0.0 },
        if y1 < gy1 { -cw } else { 0.0 },
        if x2 > gx2 { ch } else { 0.0 },
        if y2 > gy2 { cw } else { 0.0 },
    ];
    let grad = [0, 1, 2, 3].map(|k| {
        let d_union = d_ap[k] - d_inter[k];
        (d_inter[k] * union - inter * d_union) / (union * union)
            + (d_union * hull - union * d_hull[k]) / (hull * hull)
    });
    (value, grad)
}

/// Loss of raw head maps plus its gradient with respect to them.
#[derive(Clone, Debug, PartialEq)]
pub struct MapLoss {
    pub components: LossComponents,
    pub total: f64,
    /// Gradient with respect to the `H·W` classification logits.
    pub d_cls: Vec<f64>,
    /// Gradient with respect to the `4·H·W` raw (log) regression outputs.
    pub d_raw: Vec<f64>,
}

/// Weighted sum of mean BCE over all cells, mean GIoU loss over positive
/// cells and mean L1 edge-distance error over positive cells. Without
/// positive cells only the classification term contributes.
pub fn total_loss(cls: &[f64], raw: &[f64], targets: &HeadTargets, w: &LossWeights) -> Result<MapLoss> {
    let n = targets.height * targets.width;
    if cls.len() != n || raw.len() != 4 * n {
        return Err(Error::dim(format!(
            "loss maps of length {} and {} for a {}×{} target grid",
            cls.len(),
            raw.len(),
            targets.height,
            targets.width
        )));
    }
    let labels = targets.labels();
    let s = targets.stride as f64;
    let mut c = LossComponents::default();
    let mut d_cls = vec![0.0; n];
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let y = if labels[i] { 1.0 } else { 0.0 };
        c.cls += (softplus(cls[i]) - y * cls[i]) * inv_n;
        d_cls[i] = w.cls * (sigmoid(cls[i]) - y) * inv_n;
    }

    let mut d_raw = vec![0.0; 4 * n];
    let positives: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
    if let (Some(gt), false) = (targets.gt, positives.is_empty()) {
        let g = [gt.x, gt.y, gt.x2(), gt.y2()];
        let inv_p = 1.0 / positives.len() as f64;
        for &i in &positives {
            let (cx, cy) = cell_center(i, targets.width, s);
            let r = [0, 1, 2, 3].map(|k| raw[k * n + i]);
            let d = r.map(reg_activation);
            let (gi, gg) = giou_with_grad(cell_box(cx, cy, d, s), g);
            c.iou += (1.0 - gi) * inv_p;
            let target = [(cx - g[0]) / s, (cy - g[1]) / s, (g[2] - cx) / s, (g[3] - cy) / s];
            // corner k moves by ∓stride per unit distance
            let sign = [-1.0, -1.0, 1.0, 1.0];
            for k in 0..4 {
                let diff = d[k] - target[k];
                c.reg += diff.abs() * inv_p * 0.25;
                let dd = w.iou * (-gg[k] * sign[k] * s) * inv_p + w.reg * diff.signum() * inv_p * 0.25;
                d_raw[k * n + i] = dd * reg_activation_grad(r[k]);
            }
        }
    }
    let total = w.combine(&c);
    Ok(MapLoss { components: c, total, d_cls, d_raw })
}

/// `c = a·b` with explicit strides (row, column) for each operand.
#[allow(clippy::too_many_arguments)]
fn dgemm(m: usize, k: usize, n: usize, a: &[f64], a_s: (usize, usize), b: &[f64], b_s: (usize, usize), c: &mut [f64]) {
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: the caller's strides keep every index inside `a`, `b` and `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_s.0 as isize,
            a_s.1 as isize,
            b.as_ptr(),
            b_s.0 as isize,
            b_s.1 as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Cached activations of one tower.
#[derive(Clone, Debug)]
struct TowerPass {
    pre: Vec<f64>,
    act: Vec<f64>,
    out: Vec<f64>,
}

/// Views of one tower inside the flat vector.
struct TowerView<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

impl<'a> TowerView<'a> {
    fn split(theta: &'a [f64], dim: usize, hidden: usize, out: usize) -> Self {
        let (w1, rest) = theta.split_at(hidden * dim);
        let (b1, rest) = rest.split_at(hidden);
        let (w2, rest) = rest.split_at(out * hidden);
        Self { w1, b1, w2, b2: &rest[..out] }
    }
}

/// Head loss on one fused map as a function of the flat parameter vector.
#[derive(Clone, Debug)]
pub struct HeadObjective {
    layout: FlatLayout,
    /// `dim × N` input features.
    x: Vec<f64>,
    n: usize,
    pub targets: HeadTargets,
    pub weights: LossWeights,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadEval {
    pub components: LossComponents,
    pub total: f64,
    pub grad: Vec<f64>,
    /// Gradient with respect to the `dim × H × W` input map.
    pub grad_input: Vec<f64>,
}

impl HeadObjective {
    pub fn new(layout: FlatLayout, input: &FeatureMap, gt: Option<BBox>, weights: LossWeights) -> Result<Self> {
        let (c, h, w) = input.dims();
        if c != layout.dim {
            return Err(Error::dim(format!("head over {} channels given a {c}-channel map", layout.dim)));
        }
        Ok(Self {
            layout,
            x: input.data().iter().map(|&v| v as f64).collect(),
            n: h * w,
            targets: HeadTargets { gt, stride: input.stride(), height: h, width: w },
            weights,
        })
    }

    pub fn layout(&self) -> FlatLayout {
        self.layout
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.layout.len() {
            return Err(Error::dim(format!(
                "flat head vector of length {} for {} parameters",
                theta.len(),
                self.layout.len()
            )));
        }
        Ok(())
    }

    fn towers<'a>(&self, theta: &'a [f64]) -> (TowerView<'a>, TowerView<'a>) {
        let FlatLayout { dim, hidden } = self.layout;
        let (cls, reg) = theta.split_at(self.layout.reg_offset());
        (TowerView::split(cls, dim, hidden, 1), TowerView::split(reg, dim, hidden, 4))
    }

    fn tower_forward(&self, t: &TowerView, out: usize) -> TowerPass {
        let FlatLayout { dim, hidden } = self.layout;
        let n = self.n;
        let mut pre = vec![0.0; hidden * n];
        dgemm(hidden, dim, n, t.w1, (dim, 1), &self.x, (n, 1), &mut pre);
        for (row, b) in pre.chunks_mut(n).zip(t.b1) {
            row.iter_mut().for_each(|v| *v += b);
        }
        let act: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
        let mut o = vec![0.0; out * n];
        dgemm(out, hidden, n, t.w2, (hidden, 1), &act, (n, 1), &mut o);
        for (row, b) in o.chunks_mut(n).zip(t.b2) {
            row.iter_mut().for_each(|v| *v += b);
        }
        TowerPass { pre, act, out: o }
    }

    /// Accumulates parameter gradients into `grad` (tower-local slice) and
    /// input gradients into `gx`.
    fn tower_backward(&self, t: &TowerView, pass: &TowerPass, d_out: &[f64], out: usize, grad: &mut [f64], gx: &mut [f64]) {
        let FlatLayout { dim, hidden } = self.layout;
        let n = self.n;
        let (g_w1, rest) = grad.split_at_mut(hidden * dim);
        let (g_b1, rest) = rest.split_at_mut(hidden);
        let (g_w2, g_b2) = rest.split_at_mut(out * hidden);
        // d_out: out×N, act: hidden×N
        dgemm(out, n, hidden, d_out, (n, 1), &pass.act, (1, n), g_w2);
        for (g, row) in g_b2.iter_mut().zip(d_out.chunks(n)) {
            *g = row.iter().sum();
        }
        let mut d_pre = vec![0.0; hidden * n];
        dgemm(hidden, out, n, t.w2, (1, hidden), d_out, (n, 1), &mut d_pre);
        for (d, &p) in d_pre.iter_mut().zip(&pass.pre) {
            *d *= gelu_grad(p);
        }
        dgemm(hidden, n, dim, &d_pre, (n, 1), &self.x, (1, n), g_w1);
        for (g, row) in g_b1.iter_mut().zip(d_pre.chunks(n)) {
            *g = row.iter().sum();
        }
        let mut d_x = vec![0.0; dim * n];
        dgemm(dim, hidden, n, t.w1, (1, dim), &d_pre, (n, 1), &mut d_x);
        gx.iter_mut().zip(d_x).for_each(|(a, b)| *a += b);
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        let (c, r) = self.towers(theta);
        let pc = self.tower_forward(&c, 1);
        let pr = self.tower_forward(&r, 4);
        Ok(total_loss(&pc.out, &pr.out, &self.targets, &self.weights)?.total)
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<HeadEval> {
        self.check(theta)?;
        let (c, r) = self.towers(theta);
        let pc = self.tower_forward(&c, 1);
        let pr = self.tower_forward(&r, 4);
        let ml = total_loss(&pc.out, &pr.out, &self.targets, &self.weights)?;
        let mut grad = vec![0.0; theta.len()];
        let mut grad_input = vec![0.0; self.x.len()];
        let (gc, gr) = grad.split_at_mut(self.layout.reg_offset());
        self.tower_backward(&c, &pc, &ml.d_cls, 1, gc, &mut grad_input);
        self.tower_backward(&r, &pr, &ml.d_raw, 4, gr, &mut grad_input);
        Ok(HeadEval { components: ml.components, total: ml.total, grad, grad_input })
    }

    /// Forward pass cached at `theta` for cheap single-coordinate probes.
    pub fn probe(&self, theta: &[f64]) -> Result<HeadProbe<'_>> {
        self.check(theta)?;
        let (c, r) = self.towers(theta);
        let passes = [self.tower_forward(&c, 1), self.tower_forward(&r, 4)];
        Ok(HeadProbe { obj: self, theta: theta.to_vec(), passes })
    }
}

/// Loss at `theta` with one coordinate replaced, recomputing only the
/// activations that coordinate reaches.
pub struct HeadProbe<'a> {
    obj: &'a HeadObjective,
    theta: Vec<f64>,
    passes: [TowerPass; 2],
}

impl HeadProbe<'_> {
    pub fn loss_with(&self, index: usize, value: f64) -> Result<f64> {
        let FlatLayout { dim, hidden } = self.obj.layout;
        let n = self.obj.n;
        let split = self.obj.layout.reg_offset();
        let (tower, local, out) = if index < split { (0, index, 1) } else { (1, index - split, 4) };
        let base = if tower == 0 { 0 } else { split };
        let w2 = &self.theta[base + hidden * dim + hidden..base + hidden * dim + hidden + out * hidden];
        let pass = &self.passes[tower];
        let delta = value - self.theta[index];
        let mut o = pass.out.clone();
        if local < hidden * dim + hidden {
            // first layer: one hidden unit changes
            let (i, xrow) = if local < hidden * dim {
                (local / dim, Some(local % dim))
            } else {
                (local - hidden * dim, None)
            };
            for col in 0..n {
                let dx = xrow.map_or(1.0, |j| self.obj.x[j * n + col]);
                let a_new = gelu(pass.pre[i * n + col] + delta * dx);
                let da = a_new - pass.act[i * n + col];
                for k in 0..out {
                    o[k * n + col] += w2[k * hidden + i] * da;
                }
            }
        } else {
            let local = local - hidden * dim - hidden;
            if local < out * hidden {
                let (k, i) = (local / hidden, local % hidden);
                for col in 0..n {
                    o[k * n + col] += delta * pass.act[i * n + col];
                }
            } else {
                let k = local - out * hidden;
                o[k * n..(k + 1) * n].iter_mut().for_each(|v| *v += delta);
            }
        }
        let (cls, raw) = if tower == 0 { (&o, &self.passes[1].out) } else { (&self.passes[0].out, &o) };
        Ok(total_loss(cls, raw, &self.obj.targets, &self.obj.weights)?.total)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Worst relative error between `analytic` and central differences of
/// `loss_at(i, v)`, the loss with coordinate `i` set to `v`.
pub fn grad_check_coordinates(
    mut loss_at: impl FnMut(usize, f64) -> f64,
    params: &[f64],
    analytic: &[f64],
    eps: f64,
) -> f64 {
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let mut worst = 0.0f64;
    for (i, (&p, &a)) in params.iter().zip(analytic).enumerate() {
        let numeric = (loss_at(i, p + eps) - loss_at(i, p - eps)) / (2.0 * eps);
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}

/// [`grad_check_coordinates`] for a loss over the whole parameter vector.
pub fn grad_check(mut loss_fn: impl FnMut(&[f64]) -> f64, params: &[f64], analytic: &[f64], eps: f64) -> f64 {
    let mut theta = params.to_vec();
    grad_check_coordinates(
        |i, v| {
            let old = theta[i];
            theta[i] = v;
            let l = loss_fn(&theta);
            theta[i] = old;
            l
        },
        params,
        analytic,
        eps,
    )
}
