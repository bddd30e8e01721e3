//! Dense kernels and the multiply-accumulate counter.

use siamtrack::tensor::{conv1x1, mac_count, matmul, reset_mac_count, softmax_rows, spatial_pool, FeatureMap, Tensor};

fn main() -> siamtrack::Result<()> {
    let a = Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])?;
    let b = Tensor::eye(3);
    reset_mac_count();
    let c = matmul(&a, &b)?;
    println!("A·I = {:?} ({} MACs)", c.data(), mac_count());

    let s = softmax_rows(&a)?;
    println!("softmax rows: {:?}", s.data());

    let x = FeatureMap::new(Tensor::from_fn(&[232, 20, 20], |i| (i % 7) as f32 * 0.1), 16)?;
    reset_mac_count();
    let y = conv1x1(&x, &Tensor::full(&[192, 232], 0.01), &Tensor::zeros(&[192]))?;
    println!("conv1x1 {:?} -> {:?}: {} MACs", x.dims(), y.dims(), mac_count());

    let p = spatial_pool(&y, 4)?;
    println!("4x4 average pool -> {:?}, stride {}", p.dims(), p.stride());
    Ok(())
}
