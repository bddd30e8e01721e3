//! Synthetic sequences with distractors and occluders, written to disk.
//!
//! Usage: `synth_sequence [OUT_DIR]`

use siamtrack::synth::{parse_occlusions, SynthConfig, SynthSequence, Visibility};

fn main() -> siamtrack::Result<()> {
    let cfg = SynthConfig { seed: 5, frames: 40, occlusions: parse_occlusions("10-14:partial,25-30:full")?, ..SynthConfig::default() };
    let seq = SynthSequence::generate(&cfg)?;
    for t in [0, 12, 27, 39] {
        let st = seq.state(t);
        let vis = match st.visibility {
            Visibility::Visible => "visible",
            Visibility::Partial => "partial",
            Visibility::Hidden => "hidden",
        };
        println!("frame {t:>2}: target {} {vis}, {:.0}% of target pixels shown", st.target, 100.0 * seq.pixel_audit(t));
    }
    if let Some(dir) = std::env::args().nth(1) {
        seq.write(std::path::Path::new(&dir))?;
        println!("wrote {} frames to {dir}", seq.len());
    }
    Ok(())
}
