//! Flat `key = value` configuration files.
//!
//! One file can carry both synthetic-sequence keys and run keys. Blank lines
//! and `#` comments are ignored; unknown keys are errors. Booleans accept
//! `on/off`, `true/false` and `1/0`.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::synth::{parse_occlusions, SynthConfig};
use crate::tracker::RunConfig;

/// Origin name used for command-line overrides in error messages.
pub const OVERRIDE_SOURCE: &str = "<override>";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub synth: SynthConfig,
    pub run: RunConfig,
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("expected on/off, got {v:?}")),
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    v.parse().map_err(|e: T::Err| format!("{v:?}: {e}"))
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.apply_text(text, path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            self.set(k.trim(), v.trim()).map_err(err)?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides, numbering them from 1 in errors.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for (i, o) in overrides.iter().enumerate() {
            let o = o.as_ref();
            let err = |msg: String| Error::Parse { path: PathBuf::from(OVERRIDE_SOURCE), line: i + 1, msg };
            let (k, v) = o.split_once('=').ok_or_else(|| err(format!("expected key=value, got {o:?}")))?;
            self.set(k.trim(), v.trim()).map_err(err)?;
        }
        Ok(())
    }

    /// Sets one key. The message of the error names the problem only; the
    /// caller adds the location.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let s = &mut self.synth;
        let r = &mut self.run;
        match key {
            "seed" => s.seed = num(v)?,
            "width" => s.width = num(v)?,
            "height" => s.height = num(v)?,
            "frames" => s.frames = num(v)?,
            "target_w" => s.target_w = num(v)?,
            "target_h" => s.target_h = num(v)?,
            "vx" => s.vx = num(v)?,
            "vy" => s.vy = num(v)?,
            "jitter_amp" => s.jitter_amp = num(v)?,
            "jitter_period" => s.jitter_period = num(v)?,
            "scale_drift" => s.scale_drift = num(v)?,
            "distractors" => s.distractors = num(v)?,
            "distractor_similarity" => s.distractor_similarity = num(v)?,
            "occlusions" => s.occlusions = parse_occlusions(v).map_err(|e| e.to_string())?,
            "noise" => s.noise = num(v)?,
            "format" => s.format = num(v)?,

            "alpha" => r.tracker.alpha = num(v)?,
            "theta_d" => r.tracker.theta_d = num(v)?,
            "theta_s" => r.tracker.theta_s = num(v)?,
            "update_interval" => r.tracker.update_interval = num(v)?,
            "conf_th" => r.tracker.conf_th = num(v)?,
            "smoothing" => r.tracker.enable_smoothing = parse_bool(v)?,
            "correction" => r.tracker.enable_correction = parse_bool(v)?,
            "two_sided_scale" => r.tracker.two_sided_scale = parse_bool(v)?,
            "temporal" => r.temporal = parse_bool(v)?,
            "fusion" => r.fusion = num(v)?,
            "combine" => r.combine = num(v)?,
            "templates" => r.templates = num(v)?,
            "mpa" => r.mpa = parse_bool(v)?,
            "gamma" => r.gamma = num(v)?,
            "model_seed" => r.model_seed = num(v)?,
            "heads" => r.heads = num(v)?,
            "head_hidden" => r.head_hidden = num(v)?,
            "search_context" => r.search_context = num(v)?,
            "template_context" => r.template_context = num(v)?,
            "params" => r.params = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "lambda_cls" => r.train.weights.cls = num(v)?,
            "lambda_iou" => r.train.weights.iou = num(v)?,
            "lambda_reg" => r.train.weights.reg = num(v)?,
            "train_steps" => r.train.steps = num(v)?,
            "train_lr" => r.train.lr = num(v)?,
            "train_batch" => r.train.batch = num(v)?,
            "train_samples" => r.train.samples = num(v)?,
            "train_sequences" => r.train.sequences = num(v)?,
            "train_seed" => r.train.seed = num(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Config file plus overrides. `None` starts from the defaults.
    pub fn resolve<S: AsRef<str>>(path: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::FusionMode;
    use crate::synth::{Coverage, FrameFormat};

    fn parse(text: &str) -> Result<Config> {
        Config::parse(text, Path::new("t.cfg"))
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse("\n# nothing\n").unwrap(), Config::default());
    }

    #[test]
    fn sets_both_halves() {
        let c = parse(
            "seed = 9\nframes=40 # short\nocclusions = 5-9:full, 20-25:partial\nformat = raw\n\
             fusion = cross_correlation\ntemporal = off\ntemplates = 3\nlambda_cls = 1.5\ntrain_steps = 10\n",
        )
        .unwrap();
        assert_eq!((c.synth.seed, c.synth.frames, c.synth.format), (9, 40, FrameFormat::Raw));
        assert_eq!(c.synth.occlusions[1].coverage, Coverage::Partial);
        assert_eq!(c.run.fusion, FusionMode::CrossCorrelation);
        assert!(!c.run.temporal);
        assert_eq!((c.run.templates, c.run.train.steps), (3, 10));
        assert_eq!(c.run.train.weights.cls, 1.5);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse("seed = 1\n\nbogus = 2\n") {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("frames = many"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("mpa = maybe"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("just words"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn overrides_win() {
        let mut c = parse("alpha = 0.3").unwrap();
        c.apply_overrides(&["alpha=0.9", "conf_th=inf"]).unwrap();
        assert_eq!(c.run.tracker.alpha, 0.9);
        assert!(c.run.tracker.conf_th.is_infinite());
        assert!(matches!(c.apply_overrides(&["nokey"]), Err(Error::Parse { line: 1, .. })));
    }
}
