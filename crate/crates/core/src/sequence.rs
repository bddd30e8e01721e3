//! On-disk sequences: numbered frame files plus a ground-truth box file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::eval::read_boxes;
use crate::image::Image;
use crate::synth::GT_FILE;

const FRAME_EXTENSIONS: [&str; 4] = ["ppm", "pgm", "raw", "simg"];

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDir {
    pub dir: PathBuf,
    /// Frame files in lexicographic order.
    pub frames: Vec<PathBuf>,
    pub gt: Vec<BBox>,
}

impl SequenceDir {
    /// Lists the frames of `dir` and reads its ground truth. Frame and box
    /// counts must agree, and the first box must be a valid target.
    pub fn open(dir: &Path) -> Result<Self> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut frames = Vec::new();
        for e in entries {
            let p = e.map_err(|e| Error::io(dir, e))?.path();
            let ext = p.extension().and_then(|x| x.to_str()).unwrap_or("");
            if FRAME_EXTENSIONS.contains(&ext) {
                frames.push(p);
            }
        }
        frames.sort();
        if frames.is_empty() {
            return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "no frame files")));
        }
        let gt = read_boxes(&dir.join(GT_FILE))?;
        if gt.len() != frames.len() {
            return Err(Error::Validation(format!(
                "{}: {} frames but {} ground-truth boxes",
                dir.display(),
                frames.len(),
                gt.len()
            )));
        }
        if !gt[0].is_valid() {
            return Err(Error::Validation(format!("{}: frame 0 has no target box", dir.display())));
        }
        Ok(Self { dir: dir.to_path_buf(), frames, gt })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, t: usize) -> Result<Image> {
        Image::load(&self.frames[t])
    }

    /// Lazily decoded frames in order.
    pub fn iter_frames(&self) -> impl Iterator<Item = Result<Image>> + '_ {
        (0..self.len()).map(|t| self.frame(t))
    }
}
