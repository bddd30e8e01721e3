use std::fmt;

use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixels: top-left corner plus extents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x: x1, y: y1, w: x2 - x1, h: y2 - y1 }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diag(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn x2(&self) -> f64 {
        self.x + self.w
    }

    pub fn y2(&self) -> f64 {
        self.y + self.h
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.x2().min(other.x2()) - self.x.max(other.x)).max(0.0);
        let ih = (self.y2().min(other.y2()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }

    /// Smallest box containing both.
    pub fn enclosing(&self, other: &BBox) -> BBox {
        BBox::from_corners(
            self.x.min(other.x),
            self.y.min(other.y),
            self.x2().max(other.x2()),
            self.y2().max(other.y2()),
        )
    }

    pub fn scaled(&self, k: f64) -> BBox {
        BBox::new(self.x * k, self.y * k, self.w * k, self.h * k)
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.x2() && py >= self.y && py <= self.y2()
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

/// Intersection over union; zero when either box is degenerate.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Centre location error.
pub fn cle(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Generalized IoU: `IoU - |C \ (A ∪ B)| / |C|` with `C` the enclosing box.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let hull = a.enclosing(b).area();
    if union <= 0.0 || hull <= 0.0 {
        return 0.0;
    }
    inter / union - (hull - union) / hull
}

pub fn giou_loss(a: &BBox, b: &BBox) -> f64 {
    1.0 - giou(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn giou_hand_cases() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0);
        assert_eq!(giou(&a, &a), 1.0);
        assert_eq!(giou_loss(&a, &a), 0.0);
        let b = BBox::new(9.0, 0.0, 1.0, 1.0);
        assert!((giou(&a, &b) + 0.8).abs() < 1e-12);
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        let b = BBox::new(0.0, 0.0, 2.0, 1.0);
        assert!((giou(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn giou_tends_to_minus_one() {
        let a = BBox::new(0.0, 0.0, 1.0, 1.0);
        let far = BBox::new(1e6, 0.0, 1.0, 1.0);
        assert!(giou(&a, &far) < -0.999);
    }

    #[test]
    fn iou_cases() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((iou(&a, &BBox::new(1.0, 0.0, 2.0, 2.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cle_cases() {
        let a = BBox::from_center(0.0, 0.0, 2.0, 2.0);
        assert_eq!(cle(&a, &a), 0.0);
        assert_eq!(cle(&a, &BBox::from_center(3.0, 4.0, 7.0, 1.0)), 5.0);
    }

    #[test]
    fn geometry() {
        let b = BBox::new(0.0, 0.0, 30.0, 40.0);
        assert_eq!(b.diag(), 50.0);
        assert_eq!(b.center(), (15.0, 20.0));
        assert_eq!(b.area(), 1200.0);
        assert!(!BBox::new(0.0, 0.0, 0.0, 1.0).is_valid());
    }
}
