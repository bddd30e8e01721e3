//! Parameter and multiply-accumulate accounting per component.

use siamtrack::bench::{analytic, bench};
use siamtrack::fusion::CombineMode;
use siamtrack::tracker::{RunConfig, TrackerModel};

fn main() -> siamtrack::Result<()> {
    for combine in [CombineMode::Concat, CombineMode::Sum] {
        let cfg = RunConfig { combine, ..RunConfig::default() };
        let measured = bench(&TrackerModel::new(&cfg)?, &cfg, 320)?;
        println!("combine = {combine}");
        print!("{measured}");
        println!("matches closed form: {}\n", measured == analytic(&cfg, 320, 80));
    }
    let big = analytic(&RunConfig::default(), 640, 80);
    println!("640x640 search: {} MACs per frame", big.total().macs);
    Ok(())
}
