//! Head fine-tuning: minibatch Adam on fused search features drawn from
//! synthetic training sequences. Everything upstream of the head keeps its
//! seeded initialization.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::head::{FlatLayout, HeadObjective};
use crate::image::CropWindow;
use crate::synth::{parse_occlusions, SynthConfig, SynthSequence, Visibility};
use crate::tensor::FeatureMap;
use crate::tracker::{RunConfig, TrackerModel, SEARCH_SIZE, TEMPLATE_SIZE};

/// Fused search features with the target box in search-crop coordinates
/// (`None` when the target is hidden).
#[derive(Clone, Debug)]
pub struct Sample {
    pub fused: FeatureMap,
    pub gt: Option<BBox>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Training sequence configs. Seeds are offset from `seed` so they never
/// coincide with small evaluation seeds.
pub fn training_configs(seed: u64, count: usize) -> Vec<SynthConfig> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let frames = 60;
            let start = rng.gen_range(15..35);
            let occ = if i % 2 == 0 {
                format!("{start}-{}:full", start + 8)
            } else {
                format!("{start}-{}:partial", start + 8)
            };
            SynthConfig {
                seed: seed.wrapping_add(1000 + i as u64),
                frames,
                target_w: rng.gen_range(28.0..48.0),
                target_h: rng.gen_range(24.0..40.0),
                vx: rng.gen_range(-1.5..1.5),
                vy: rng.gen_range(-1.5..1.5),
                distractors: rng.gen_range(1..4),
                distractor_similarity: rng.gen_range(0.3..0.7),
                occlusions: parse_occlusions(&occ).expect("fixed pattern"),
                ..SynthConfig::default()
            }
        })
        .collect()
}

/// Samples search crops around jittered true boxes and fuses them with the
/// templates the tracker would hold at that frame: the static template plus
/// true-box templates from every tenth earlier frame.
pub fn collect_samples(model: &TrackerModel, run: &RunConfig, seqs: &[SynthSequence], count: usize, seed: u64) -> Result<Vec<Sample>> {
    if seqs.is_empty() {
        return Err(Error::Config("no training sequences".into()));
    }
    let fusion = model.fusion_for(run)?;
    let interval = run.tracker.update_interval.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let seq = &seqs[i % seqs.len()];
        let t = rng.gen_range(1..seq.len());
        let truth = seq.state(t).target;
        let template_at = |f: usize| -> Result<FeatureMap> {
            let st = seq.state(f);
            let f = if st.visibility == Visibility::Visible { f } else { 0 };
            model.crop_features(&seq.render(f), &seq.state(f).target, run.template_context, TEMPLATE_SIZE)
        };
        let t1 = template_at(0)?;
        let last_update = ((t - 1) / interval) * interval;
        let dynamic: Vec<FeatureMap> = (1..run.templates)
            .rev()
            .map(|j| template_at(last_update.saturating_sub((j - 1) * interval)))
            .collect::<Result<_>>()?;
        let mut active = vec![&t1];
        active.extend(dynamic.iter());

        let (dx, dy) = (rng.gen_range(-0.5..0.5) * truth.w, rng.gen_range(-0.5..0.5) * truth.h);
        let k = rng.gen_range(0.85..1.15);
        let (cx, cy) = truth.center();
        let around = BBox::from_center(cx + dx, cy + dy, truth.w * k, truth.h * k);
        let window = CropWindow::around(&around, run.search_context);
        let frame = seq.render(t);
        let search = model.features(&frame.crop_resample(&window, SEARCH_SIZE)?)?;
        let fused = model.fuse(&search, &active, run, &fusion)?.map;
        let s = SEARCH_SIZE as f64 / window.side;
        let gt = (seq.state(t).visibility != Visibility::Hidden)
            .then(|| BBox::new((truth.x - window.x0) * s, (truth.y - window.y0) * s, truth.w * s, truth.h * s));
        out.push(Sample { fused, gt });
    }
    Ok(out)
}

fn mean_loss(layout: FlatLayout, theta: &[f64], samples: &[Sample], run: &RunConfig) -> Result<f64> {
    let mut acc = 0.0;
    for s in samples {
        acc += HeadObjective::new(layout, &s.fused, s.gt, run.train.weights)?.loss(theta)?;
    }
    Ok(acc / samples.len() as f64)
}

/// Per-channel mean and standard deviation over every cell of every sample.
pub fn channel_stats(samples: &[Sample]) -> (Vec<f64>, Vec<f64>) {
    let c = samples.first().map_or(0, |s| s.fused.channels());
    let (mut sum, mut sq, mut n) = (vec![0.0f64; c], vec![0.0f64; c], 0.0f64);
    for s in samples {
        for (k, (a, b)) in sum.iter_mut().zip(sq.iter_mut()).enumerate() {
            for &v in s.fused.plane(k) {
                *a += v as f64;
                *b += (v as f64) * (v as f64);
            }
        }
        n += s.fused.spatial() as f64;
    }
    let mean: Vec<f64> = sum.iter().map(|a| a / n).collect();
    let std = sq.iter().zip(&mean).map(|(b, m)| (b / n - m * m).max(0.0).sqrt().max(1e-3)).collect();
    (mean, std)
}

fn standardize(samples: &[Sample], mean: &[f64], std: &[f64]) -> Result<Vec<Sample>> {
    samples
        .iter()
        .map(|s| {
            let mut fused = s.fused.clone();
            let hw = fused.spatial();
            for (k, plane) in fused.data_mut().chunks_mut(hw).enumerate() {
                plane.iter_mut().for_each(|v| *v = ((*v as f64 - mean[k]) / std[k]) as f32);
            }
            Ok(Sample { fused, gt: s.gt })
        })
        .collect()
}

/// Folds `x' = (x - mean) / std` into the first layer of both towers so the
/// deployed head reads raw fused features.
fn fold_standardization(theta: &mut [f64], layout: FlatLayout, mean: &[f64], std: &[f64]) {
    let (d, h) = (layout.dim, layout.hidden);
    for base in [0, layout.reg_offset()] {
        let (w1, rest) = theta[base..].split_at_mut(h * d);
        let b1 = &mut rest[..h];
        for (row, b) in w1.chunks_mut(d).zip(b1.iter_mut()) {
            for (k, w) in row.iter_mut().enumerate() {
                *w /= std[k];
                *b -= *w * mean[k];
            }
        }
    }
}

/// Adam with the usual defaults.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64, grad_scale: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for ((p, g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let g = g * grad_scale;
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Minibatch Adam on the head parameters. Head inputs are standardized
/// per channel during training, with the statistics folded back into the
/// first layer afterwards, so every fusion variant trains on equal footing.
pub fn train_head(model: &mut TrackerModel, samples: &[Sample], run: &RunConfig) -> Result<TrainReport> {
    let tc = &run.train;
    if samples.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    let (mean, std) = channel_stats(samples);
    let samples = &standardize(samples, &mean, &std)?;
    let layout = model.head.layout();
    let mut theta = model.head.to_flat();
    let initial_loss = mean_loss(layout, &theta, samples, run)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut adam = Adam::new(theta.len());
    for step in 0..tc.steps {
        let mut grad = vec![0.0; theta.len()];
        let mut loss = 0.0;
        for _ in 0..tc.batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let s = &samples[order[cursor]];
            cursor += 1;
            let ev = HeadObjective::new(layout, &s.fused, s.gt, tc.weights)?.evaluate(&theta)?;
            loss += ev.total;
            grad.iter_mut().zip(&ev.grad).for_each(|(g, e)| *g += e);
        }
        adam.step(&mut theta, &grad, tc.lr, 1.0 / tc.batch as f64);
        if step % 50 == 0 {
            debug!("step {step}: batch loss {:.4}", loss / tc.batch as f64);
        }
    }
    let final_loss = mean_loss(layout, &theta, samples, run)?;
    fold_standardization(&mut theta, layout, &mean, &std);
    model.head.set_flat(&theta)?;
    info!("head fine-tuning: {} steps, loss {initial_loss:.4} -> {final_loss:.4}", tc.steps);
    Ok(TrainReport { steps: tc.steps, initial_loss, final_loss })
}

/// Seeded model with its head fine-tuned for `run`.
pub fn finetune(run: &RunConfig) -> Result<(TrackerModel, TrainReport)> {
    let mut model = TrackerModel::new(run)?;
    let seqs = training_configs(run.train.seed, run.train.sequences)
        .iter()
        .map(SynthSequence::generate)
        .collect::<Result<Vec<_>>>()?;
    let samples = collect_samples(&model, run, &seqs, run.train.samples, run.train.seed)?;
    let report = train_head(&mut model, &samples, run)?;
    Ok((model, report))
}
