//! Channel adaptation and the pyramid attention network on one crop.

use siamtrack::backbone::{extract_pyramid, BackboneParams};
use siamtrack::image::Image;
use siamtrack::tracker::{RunConfig, TrackerModel};
use siamtrack::tpn::{adapt_features, tpn_branches, tpn_forward};

fn main() -> siamtrack::Result<()> {
    let model = TrackerModel::new(&RunConfig::default())?;
    let img = Image::filled(320, 320, [0.4, 0.4, 0.6]);
    let pyr = extract_pyramid(&img, &BackboneParams::new(7))?;
    let a = adapt_features(&pyr, &model.adapt)?;
    println!("adapted: {:?} {:?} {:?}", a.p2a.dims(), a.p3a.dims(), a.p4a.dims());
    for (name, b) in ["stage-2 cross", "stage-3 self", "stage-4 cross"].iter().zip(tpn_branches(&a, &model.tpn)?) {
        println!("{name} branch -> {:?}", b.dims());
    }
    println!("refined output -> {:?}", tpn_forward(&a, &model.tpn)?.dims());
    Ok(())
}
