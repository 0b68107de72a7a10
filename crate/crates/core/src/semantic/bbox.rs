use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// Axis-aligned box in continuous pixel coordinates, `[min, max)` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn from_center(center: Point2, width: f64, height: f64) -> Self {
        Self::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }

    pub fn is_valid(&self) -> bool {
        self.max_x > self.min_x && self.max_y > self.min_y
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min_x && p.x < self.max_x && p.y >= self.min_y && p.y < self.max_y
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox::new(
            self.min_x.min(other.min_x),
            self.min_y.min(other.min_y),
            self.max_x.max(other.max_x),
            self.max_y.max(other.max_y),
        )
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox::new(
            self.min_x.max(other.min_x),
            self.min_y.max(other.min_y),
            self.max_x.min(other.max_x),
            self.max_y.min(other.max_y),
        );
        b.is_valid().then_some(b)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other).map_or(0.0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    /// Same center, sides multiplied by `s`.
    pub fn scaled(&self, s: f64) -> BBox {
        BBox::from_center(self.center(), self.width() * s, self.height() * s)
    }

    pub fn clamp_to(&self, width: usize, height: usize) -> BBox {
        BBox::new(
            self.min_x.clamp(0.0, width as f64),
            self.min_y.clamp(0.0, height as f64),
            self.max_x.clamp(0.0, width as f64),
            self.max_y.clamp(0.0, height as f64),
        )
    }

    /// Pixel index ranges whose centers lie inside the box, clipped to the image.
    pub fn pixel_range(&self, width: usize, height: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (
            center_range(self.min_x, self.max_x, width),
            center_range(self.min_y, self.max_y, height),
        )
    }
}

fn center_range(lo: f64, hi: f64, n: usize) -> std::ops::Range<usize> {
    let a = (lo - 0.5).ceil().max(0.0);
    let b = (hi - 0.5).ceil().max(0.0);
    let a = (a as usize).min(n);
    let b = (b as usize).min(n);
    a..b.max(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_box_covers_its_pixels() {
        let b = BBox::new(2.0, 3.0, 5.0, 4.0);
        let (xs, ys) = b.pixel_range(10, 10);
        assert_eq!(xs, 2..5);
        assert_eq!(ys, 3..4);
    }

    #[test]
    fn ranges_clip_to_image() {
        let b = BBox::new(-4.0, -1.0, 40.0, 3.0);
        let (xs, ys) = b.pixel_range(10, 10);
        assert_eq!(xs, 0..10);
        assert_eq!(ys, 0..3);
    }

    #[test]
    fn iou_of_half_overlap() {
        let a = BBox::new(0.0, 0.0, 2.0, 1.0);
        let b = BBox::new(1.0, 0.0, 3.0, 1.0);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
    }
}
