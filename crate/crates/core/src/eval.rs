//! One-pass evaluation: success, precision and normalized precision curves,
//! average overlap and success rates, plus result/annotation file I/O.
//!
//! Frames whose ground truth has a non-positive width or height mark an
//! absent target and are left out of every metric.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bbox::{cle, iou, BBox};
use crate::error::{Error, Result};

pub const SUCCESS_STEPS: usize = 20;
pub const PRECISION_MAX_PX: usize = 50;
pub const PRECISION_REPORT_PX: usize = 20;
pub const NORM_STEPS: usize = 50;
/// Normalized thresholds run 0..0.5 in steps of 0.01.
const NORM_SCALE: f64 = 100.0;

pub fn success_thresholds() -> Vec<f64> {
    (0..=SUCCESS_STEPS).map(|k| k as f64 / SUCCESS_STEPS as f64).collect()
}

pub fn precision_thresholds() -> Vec<f64> {
    (0..=PRECISION_MAX_PX).map(|k| k as f64).collect()
}

pub fn norm_precision_thresholds() -> Vec<f64> {
    (0..=NORM_STEPS).map(|k| k as f64 / NORM_SCALE).collect()
}

/// Centre error divided componentwise by the ground-truth size.
pub fn normalized_cle(pred: &BBox, gt: &BBox) -> f64 {
    let (px, py) = pred.center();
    let (gx, gy) = gt.center();
    ((px - gx) / gt.w).hypot((py - gy) / gt.h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceResult {
    pred: Vec<BBox>,
    gt: Vec<BBox>,
}

impl SequenceResult {
    /// Pairs predictions with ground truth. Frame 0 must be the
    /// initialization box.
    pub fn new(pred: Vec<BBox>, gt: Vec<BBox>) -> Result<Self> {
        if pred.len() != gt.len() {
            return Err(Error::Validation(format!("{} predictions for {} ground-truth frames", pred.len(), gt.len())));
        }
        if let (Some(p), Some(g)) = (pred.first(), gt.first()) {
            let off = p.as_array().iter().zip(g.as_array()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if off > 1e-6 {
                return Err(Error::Validation(format!("frame 0 prediction {p} differs from ground truth {g}")));
            }
        }
        Ok(Self { pred, gt })
    }

    pub fn pred(&self) -> &[BBox] {
        &self.pred
    }

    pub fn gt(&self) -> &[BBox] {
        &self.gt
    }

    pub fn len(&self) -> usize {
        self.gt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gt.is_empty()
    }

    /// Per-frame validity: false where the target is absent.
    pub fn valid(&self) -> Vec<bool> {
        self.gt.iter().map(BBox::is_valid).collect()
    }

    fn valid_pairs(&self) -> impl Iterator<Item = (&BBox, &BBox)> {
        self.pred.iter().zip(&self.gt).filter(|(_, g)| g.is_valid())
    }
}

/// Threshold hit counts, summable across sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalStats {
    pub frames: usize,
    pub success: Vec<usize>,
    pub precision: Vec<usize>,
    pub norm_precision: Vec<usize>,
    pub iou_sum: f64,
}

impl Default for EvalStats {
    fn default() -> Self {
        Self {
            frames: 0,
            success: vec![0; SUCCESS_STEPS + 1],
            precision: vec![0; PRECISION_MAX_PX + 1],
            norm_precision: vec![0; NORM_STEPS + 1],
            iou_sum: 0.0,
        }
    }
}

impl EvalStats {
    pub fn from_sequence(r: &SequenceResult) -> Self {
        let mut s = Self::default();
        let (st, pt, nt) = (success_thresholds(), precision_thresholds(), norm_precision_thresholds());
        for (p, g) in r.valid_pairs() {
            s.frames += 1;
            let o = iou(p, g);
            s.iou_sum += o;
            for (c, t) in s.success.iter_mut().zip(&st) {
                *c += usize::from(o > *t);
            }
            let e = cle(p, g);
            for (c, t) in s.precision.iter_mut().zip(&pt) {
                *c += usize::from(e <= *t);
            }
            let ne = normalized_cle(p, g);
            for (c, t) in s.norm_precision.iter_mut().zip(&nt) {
                *c += usize::from(ne <= *t);
            }
        }
        s
    }

    pub fn merge(&mut self, other: &EvalStats) {
        self.frames += other.frames;
        for (a, b) in [
            (&mut self.success, &other.success),
            (&mut self.precision, &other.precision),
            (&mut self.norm_precision, &other.norm_precision),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.iou_sum += other.iou_sum;
    }

    pub fn report(&self) -> Result<MetricReport> {
        if self.frames == 0 {
            return Err(Error::Validation("no valid ground-truth frames to evaluate".into()));
        }
        let n = self.frames as f64;
        let curve = |counts: &[usize], ts: Vec<f64>| -> Vec<(f64, f64)> {
            ts.into_iter().zip(counts).map(|(t, &c)| (t, c as f64 / n)).collect()
        };
        let auc = |counts: &[usize]| counts.iter().sum::<usize>() as f64 / (n * counts.len() as f64);
        let sr = |t: f64| self.success[(t * SUCCESS_STEPS as f64).round() as usize] as f64 / n;
        Ok(MetricReport {
            frames: self.frames,
            success_auc: auc(&self.success),
            precision_at_20: self.precision[PRECISION_REPORT_PX] as f64 / n,
            norm_precision_auc: auc(&self.norm_precision),
            ao: self.iou_sum / n,
            sr_050: sr(0.5),
            sr_075: sr(0.75),
            success_curve: curve(&self.success, success_thresholds()),
            precision_curve: curve(&self.precision, precision_thresholds()),
            norm_precision_curve: curve(&self.norm_precision, norm_precision_thresholds()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Valid frames the metrics were computed over.
    pub frames: usize,
    pub success_auc: f64,
    pub precision_at_20: f64,
    pub norm_precision_auc: f64,
    pub ao: f64,
    pub sr_050: f64,
    pub sr_075: f64,
    /// (IoU threshold, fraction with IoU above it).
    pub success_curve: Vec<(f64, f64)>,
    /// (pixel threshold, fraction with centre error at most it).
    pub precision_curve: Vec<(f64, f64)>,
    pub norm_precision_curve: Vec<(f64, f64)>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `kind,key,value` rows: the six summary metrics, then every curve point.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,key,value\n");
        for (k, v) in self.summary() {
            let _ = writeln!(s, "metric,{k},{v}");
        }
        let _ = writeln!(s, "metric,frames,{}", self.frames);
        for (name, curve) in [
            ("success", &self.success_curve),
            ("precision", &self.precision_curve),
            ("norm_precision", &self.norm_precision_curve),
        ] {
            for (t, v) in curve {
                let _ = writeln!(s, "{name},{t},{v}");
            }
        }
        s
    }

    pub fn summary(&self) -> [(&'static str, f64); 6] {
        [
            ("success_auc", self.success_auc),
            ("precision_at_20", self.precision_at_20),
            ("norm_precision_auc", self.norm_precision_auc),
            ("ao", self.ao),
            ("sr_050", self.sr_050),
            ("sr_075", self.sr_075),
        ]
    }

    /// Frame-weighted mean of several reports.
    pub fn merge(reports: &[MetricReport]) -> Result<MetricReport> {
        let total: usize = reports.iter().map(|r| r.frames).sum();
        let Some(first) = reports.first().filter(|_| total > 0) else {
            return Err(Error::Validation("no frames to merge".into()));
        };
        let wmean = |f: &dyn Fn(&MetricReport) -> f64| {
            reports.iter().map(|r| f(r) * r.frames as f64).sum::<f64>() / total as f64
        };
        let curve = |f: &dyn Fn(&MetricReport) -> &Vec<(f64, f64)>| -> Vec<(f64, f64)> {
            f(first)
                .iter()
                .enumerate()
                .map(|(i, &(t, _))| (t, wmean(&|r| f(r)[i].1)))
                .collect()
        };
        Ok(MetricReport {
            frames: total,
            success_auc: wmean(&|r| r.success_auc),
            precision_at_20: wmean(&|r| r.precision_at_20),
            norm_precision_auc: wmean(&|r| r.norm_precision_auc),
            ao: wmean(&|r| r.ao),
            sr_050: wmean(&|r| r.sr_050),
            sr_075: wmean(&|r| r.sr_075),
            success_curve: curve(&|r| &r.success_curve),
            precision_curve: curve(&|r| &r.precision_curve),
            norm_precision_curve: curve(&|r| &r.norm_precision_curve),
        })
    }
}

pub fn evaluate(r: &SequenceResult) -> Result<MetricReport> {
    EvalStats::from_sequence(r).report()
}

/// Evaluates several sequences as one pooled set of frames.
pub fn evaluate_all(results: &[SequenceResult]) -> Result<MetricReport> {
    let mut s = EvalStats::default();
    for r in results {
        s.merge(&EvalStats::from_sequence(r));
    }
    s.report()
}

/// Parses `x,y,w,h` lines; blank lines are skipped.
pub fn parse_boxes(text: &str, path: &Path) -> Result<Vec<BBox>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let vals = line
            .split(',')
            .map(|t| {
                let t = t.trim();
                match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(_) => Err(err(format!("non-finite value {t:?}"))),
                    Err(_) => Err(err(format!("bad number {t:?}"))),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let [x, y, w, h] = vals[..] else {
            return Err(err(format!("expected 4 fields, found {}", vals.len())));
        };
        out.push(BBox::new(x, y, w, h));
    }
    Ok(out)
}

pub fn read_boxes(path: &Path) -> Result<Vec<BBox>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_boxes(&text, path)
}

pub fn format_boxes(boxes: &[BBox]) -> String {
    boxes.iter().map(|b| format!("{b}\n")).collect()
}

pub fn write_boxes(path: &Path, boxes: &[BBox]) -> Result<()> {
    std::fs::write(path, format_boxes(boxes)).map_err(|e| Error::io(path, e))
}

pub fn read_results(results: &Path, gt: &Path) -> Result<SequenceResult> {
    SequenceResult::new(read_boxes(results)?, read_boxes(gt)?)
}
