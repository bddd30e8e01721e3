//! Temporal Siamese tracking with pyramid attention fusion over a bank of
//! static and dynamic templates.
//!
//! The pipeline per search frame is: crop → backbone → channel adaptation →
//! pyramid attention → template fusion → head → box smoothing → box
//! correction → template update. Each stage lives in its own module and can
//! be driven independently; [`tracker::Tracker`] wires them together.

pub mod ablation;
pub mod attention;
pub mod backbone;
pub mod bench;
pub mod config;
pub mod bbox;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod head;
pub mod image;
pub mod params;
pub mod sequence;
pub mod synth;
pub mod temporal;
pub mod tensor;
pub mod tpn;
pub mod tracker;
pub mod train;

pub use bbox::BBox;
pub use error::{Error, Result};
