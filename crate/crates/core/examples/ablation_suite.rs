//! Baseline against the full configuration on the pinned occlusion suite.
//! Each configuration fine-tunes its own head, so this takes a few minutes.

use siamtrack::ablation::{generate, pinned_suite, run_suite};
use siamtrack::tracker::RunConfig;
use siamtrack::train::finetune;

fn main() -> siamtrack::Result<()> {
    env_logger::init();
    let seqs = generate(&pinned_suite())?;
    for (name, run) in [("baseline", RunConfig::baseline()), ("full", RunConfig::default())] {
        let (model, rep) = finetune(&run)?;
        let (report, _) = run_suite(&model, &run, &seqs)?;
        println!(
            "{name:<9} loss {:.3} -> {:.3}  success AUC {:.4}  precision@20 {:.4}  AO {:.4}",
            rep.initial_loss, rep.final_loss, report.success_auc, report.precision_at_20, report.ao
        );
    }
    Ok(())
}
