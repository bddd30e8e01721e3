//! Stage-2/3/4 feature maps from the deterministic backbone stand-in.

use siamtrack::backbone::{extract_pyramid, BackboneParams};
use siamtrack::image::Image;

fn main() -> siamtrack::Result<()> {
    let params = BackboneParams::new(7);
    for side in [320, 80] {
        let img = Image::filled(side, side, [0.2, 0.5, 0.8]);
        let p = extract_pyramid(&img, &params)?;
        println!(
            "{side}x{side}: p2 {:?} /{}, p3 {:?} /{}, p4 {:?} /{}",
            p.p2.dims(),
            p.p2.stride(),
            p.p3.dims(),
            p.p3.stride(),
            p.p4.dims(),
            p.p4.stride()
        );
    }
    Ok(())
}
