//! Template/search integration: attention over concatenated, summed or
//! averaged templates, and the cross-correlation baseline.

use siamtrack::fusion::{CombineMode, FusionMode};
use siamtrack::image::Image;
use siamtrack::tensor::FeatureMap;
use siamtrack::tracker::{RunConfig, TrackerModel};

fn main() -> siamtrack::Result<()> {
    let search_img = Image::filled(320, 320, [0.3, 0.6, 0.3]);
    for (fusion, combine) in [
        (FusionMode::Attention, CombineMode::Concat),
        (FusionMode::Attention, CombineMode::Sum),
        (FusionMode::Attention, CombineMode::Mean),
        (FusionMode::CrossCorrelation, CombineMode::Mean),
    ] {
        let cfg = RunConfig { fusion, combine, ..RunConfig::default() };
        let model = TrackerModel::new(&cfg)?;
        let search = model.features(&search_img)?;
        let templates: Vec<FeatureMap> = (0..cfg.templates)
            .map(|i| model.features(&Image::filled(80, 80, [0.1 * i as f32, 0.5, 0.5])))
            .collect::<siamtrack::Result<_>>()?;
        let refs: Vec<&FeatureMap> = templates.iter().collect();
        let params = model.fusion_for(&cfg)?;
        let fused = model.fuse(&search, &refs, &cfg, &params)?;
        println!(
            "{fusion}/{combine}: key/value width {}, fused {:?}",
            params.attn.kv_dim(),
            fused.map.dims()
        );
    }
    Ok(())
}
