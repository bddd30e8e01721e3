//! Pinned synthetic occlusion suite and helpers to compare configurations
//! on it.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::eval::{evaluate_all, MetricReport, SequenceResult};
use crate::synth::{Coverage, Occlusion, SynthConfig, SynthSequence};
use crate::tracker::{track_frames, RunConfig, TrackerModel};
use crate::train::finetune;

pub const SUITE_SIZE: usize = 20;
pub const SUITE_SEED: u64 = 20_240;
pub const SUITE_FRAMES: usize = 60;

/// The frozen benchmark: every sequence has one full occlusion and one
/// partial occlusion, plus look-alike distractors.
pub fn pinned_suite() -> Vec<SynthConfig> {
    (0..SUITE_SIZE)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + i as u64);
            let full_start = rng.gen_range(20..30);
            let partial_start = rng.gen_range(8..14);
            SynthConfig {
                seed: SUITE_SEED + 100 + i as u64,
                frames: SUITE_FRAMES,
                target_w: rng.gen_range(28.0..48.0),
                target_h: rng.gen_range(24.0..40.0),
                vx: rng.gen_range(-1.5..1.5),
                vy: rng.gen_range(-1.5..1.5),
                distractors: 2,
                distractor_similarity: 0.5,
                occlusions: vec![
                    Occlusion { start: partial_start, end: partial_start + 5, coverage: Coverage::Partial },
                    Occlusion { start: full_start, end: full_start + 9, coverage: Coverage::Full },
                ],
                ..SynthConfig::default()
            }
        })
        .collect()
}

pub fn generate(configs: &[SynthConfig]) -> Result<Vec<SynthSequence>> {
    configs.iter().map(SynthSequence::generate).collect()
}

/// Tracks every sequence, one tracker per worker, and evaluates the pooled
/// frames. Results keep the input order.
pub fn run_suite(model: &TrackerModel, run: &RunConfig, seqs: &[SynthSequence]) -> Result<(MetricReport, Vec<SequenceResult>)> {
    let results = seqs
        .par_iter()
        .map(|seq| {
            let gt = seq.ground_truth();
            let pred = track_frames(model, run, (0..seq.len()).map(|t| Ok(seq.render(t))), gt[0])?;
            SequenceResult::new(pred, gt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((evaluate_all(&results)?, results))
}

/// Fine-tunes a head for `run` and evaluates it on `seqs`.
pub fn evaluate_config(run: &RunConfig, seqs: &[SynthSequence]) -> Result<MetricReport> {
    let (model, rep) = finetune(run)?;
    let (report, _) = run_suite(&model, run, seqs)?;
    info!(
        "fusion {} / templates {} / temporal {}: train loss {:.3} -> {:.3}, success AUC {:.4}",
        run.fusion, run.templates, run.temporal, rep.initial_loss, rep.final_loss, report.success_auc
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_pinned_and_valid() {
        let a = pinned_suite();
        assert_eq!(a.len(), SUITE_SIZE);
        assert_eq!(a, pinned_suite());
        assert!(a.iter().all(|c| c.validate().is_ok()));
        assert!(a.iter().all(|c| c.occlusions.iter().any(|o| o.coverage == Coverage::Full)));
    }
}
