//! Reading a flat key = value configuration with command-line overrides.

use std::path::Path;

use siamtrack::config::Config;

const TEXT: &str = "\
# synthetic sequence
seed = 9
frames = 60
occlusions = 20-29:full
# tracker
fusion = attention
templates = 3
temporal = on
alpha = 0.6
";

fn main() -> siamtrack::Result<()> {
    let mut cfg = Config::parse(TEXT, Path::new("inline.cfg"))?;
    cfg.apply_overrides(&["templates=5", "mpa=off"])?;
    println!("synth: seed {} frames {} occlusions {:?}", cfg.synth.seed, cfg.synth.frames, cfg.synth.occlusions);
    println!(
        "run: fusion {} templates {} mpa {} alpha {}",
        cfg.run.fusion, cfg.run.templates, cfg.run.mpa, cfg.run.tracker.alpha
    );
    match Config::parse("templates = 3\nwidht = 10\n", Path::new("typo.cfg")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
