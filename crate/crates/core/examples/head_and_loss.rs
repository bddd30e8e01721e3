//! Prediction head, the three-term loss and a finite-difference check of
//! its gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siamtrack::bbox::BBox;
use siamtrack::fusion::FusedFeatures;
use siamtrack::head::{grad_check_coordinates, predict, HeadObjective, HeadParams, LossWeights};
use siamtrack::tensor::{FeatureMap, Tensor};

fn main() -> siamtrack::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let head = HeadParams::random(&mut rng, 192, 64);
    let map = FeatureMap::new(Tensor::from_fn(&[192, 5, 5], |_| rng.gen_range(-1.0..1.0)), 16)?;

    let pred = predict(&FusedFeatures { map: map.clone() }, &head)?;
    println!("best cell {} conf {:.3} box {}", pred.cell, pred.conf, pred.bbox);

    let gt = BBox::new(18.0, 13.0, 41.0, 37.0);
    let obj = HeadObjective::new(head.layout(), &map, Some(gt), LossWeights::default())?;
    let theta = head.to_flat();
    let ev = obj.evaluate(&theta)?;
    let c = ev.components;
    println!("cls {:.4} giou {:.4} l1 {:.4} total {:.4}", c.cls, c.iou, c.reg, ev.total);

    let probe = obj.probe(&theta)?;
    let err = grad_check_coordinates(|i, v| probe.loss_with(i, v).unwrap(), &theta, &ev.grad, 1e-4);
    println!("{} parameters, worst relative gradient error {err:.2e}", theta.len());
    Ok(())
}
