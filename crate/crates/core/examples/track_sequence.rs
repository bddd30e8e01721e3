//! End-to-end tracking: fine-tune a small head, track a synthetic sequence
//! and score it.

use siamtrack::eval::{evaluate, SequenceResult};
use siamtrack::synth::{parse_occlusions, SynthConfig, SynthSequence};
use siamtrack::tracker::{track_frames, RunConfig, TrainConfig};
use siamtrack::train::finetune;

fn main() -> siamtrack::Result<()> {
    let run = RunConfig {
        head_hidden: 64,
        train: TrainConfig { steps: 100, samples: 48, sequences: 4, ..TrainConfig::default() },
        ..RunConfig::default()
    };
    let (model, rep) = finetune(&run)?;
    println!("fine-tuning loss {:.3} -> {:.3}", rep.initial_loss, rep.final_loss);

    let cfg = SynthConfig { seed: 42, frames: 40, occlusions: parse_occlusions("20-24:full")?, ..SynthConfig::default() };
    let seq = SynthSequence::generate(&cfg)?;
    let gt = seq.ground_truth();
    let pred = track_frames(&model, &run, (0..seq.len()).map(|t| Ok(seq.render(t))), gt[0])?;
    for t in (0..seq.len()).step_by(8) {
        println!("frame {t:>2}: predicted {} truth {}", pred[t], gt[t]);
    }
    let r = evaluate(&SequenceResult::new(pred, gt)?)?;
    println!("success AUC {:.3}, precision@20 {:.3}", r.success_auc, r.precision_at_20);
    Ok(())
}
