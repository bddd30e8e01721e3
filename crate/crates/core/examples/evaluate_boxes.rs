//! One-pass evaluation of a prediction list, printed as text, JSON and CSV.

use siamtrack::bbox::BBox;
use siamtrack::eval::{evaluate, SequenceResult};

fn main() -> siamtrack::Result<()> {
    let gt: Vec<BBox> = (0..6).map(|t| BBox::new(10.0 + 4.0 * t as f64, 20.0, 30.0, 20.0)).collect();
    let mut pred = gt.clone();
    pred[2].x += 6.0;
    pred[3] = BBox::new(150.0, 150.0, 30.0, 20.0);
    pred[4].w *= 1.5;
    let report = evaluate(&SequenceResult::new(pred, gt)?)?;
    for (k, v) in report.summary() {
        println!("{k:<20} {v:.4}");
    }
    println!("{}", report.to_json());
    print!("{}", report.to_csv().lines().take(8).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
