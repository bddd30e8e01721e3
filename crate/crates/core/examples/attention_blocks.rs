//! Multi-head attention, pooling attention and the modulated variant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siamtrack::attention::{mpa_block, multi_head_attention_with_weights, pa_block, AttentionParams, ModulationParams};
use siamtrack::tensor::{FeatureMap, Tensor};

fn main() -> siamtrack::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = AttentionParams::random(&mut rng, 192, 192, 6)?;

    let q = Tensor::from_fn(&[16, 192], |_| rng.gen_range(-1.0..1.0));
    let kv = Tensor::from_fn(&[9, 192], |_| rng.gen_range(-1.0..1.0));
    let (out, weights) = multi_head_attention_with_weights(&q, &kv, &kv, &p)?;
    let row0: f32 = weights[0].row(0).iter().sum();
    println!("attention out {:?}, {} heads, first row sums to {row0}", out.shape(), weights.len());

    let x = FeatureMap::new(Tensor::from_fn(&[192, 20, 20], |_| rng.gen_range(-1.0..1.0)), 16)?;
    let y = pa_block(&x, &x, &x, 2, &p)?;
    println!("PA over a 20x20 map with 2x2 pooled keys -> {:?}", y.dims());

    for gamma in [0.0, 1.0] {
        let m = ModulationParams::random(&mut rng, 192, gamma);
        let z = mpa_block(&x, &x, &x, 2, &p, &m)?;
        let moved = z.data().iter().zip(x.data()).filter(|(a, b)| a != b).count();
        println!("MPA gamma {gamma}: {moved} of {} values differ from the input", x.data().len());
    }
    Ok(())
}
