//! The per-frame smooth → correct → update cycle on stand-in templates.

use siamtrack::bbox::BBox;
use siamtrack::temporal::{TemplateBank, TrackerConfig, TrackerState};

fn main() -> siamtrack::Result<()> {
    let cfg = TrackerConfig { update_interval: 3, ..TrackerConfig::default() };
    let init = BBox::new(100.0, 80.0, 40.0, 30.0);
    // templates are just the frame index here
    let mut st = TrackerState::initialized(init, TemplateBank::new(0usize, 0))?;
    let raw = [
        BBox::new(103.0, 81.0, 40.0, 30.0),
        BBox::new(106.0, 83.0, 41.0, 30.0),
        BBox::new(190.0, 83.0, 41.0, 30.0),
        BBox::new(110.0, 84.0, 42.0, 31.0),
        BBox::new(113.0, 85.0, 42.0, 31.0),
        BBox::new(116.0, 86.0, 42.0, 31.0),
    ];
    for y in raw {
        let frame = st.frame_index();
        let ys = st.smooth(&y, &cfg)?;
        let c = st.correct(&ys, &cfg, |_| Ok(frame))?;
        let pushed = st.update(&c.y_ic, 0.9, &cfg, |_| Ok(frame))?;
        println!(
            "frame {frame}: raw {y} smoothed {ys} -> {}{}{}",
            c.y_ic,
            if c.reinstated { " (reinstated)" } else { "" },
            if pushed { " (template pushed)" } else { "" }
        );
    }
    print!("{}", st.snapshot());
    Ok(())
}
