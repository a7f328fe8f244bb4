use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate box ({0}, {1}, {2}, {3}): need x_min < x_max and y_min < y_max")]
    Degenerate(f64, f64, f64, f64),
    #[error("box ({0}, {1}, {2}, {3}) leaves the {4}x{5} frame")]
    OutOfFrame(f64, f64, f64, f64, f64, f64),
}

/// Pixel coordinates, origin top-left, y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSize {
    pub width: f64,
    pub height: f64,
}

impl FrameSize {
    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    pub fn contains_box(&self, b: &BBox) -> bool {
        b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= self.width && b.y_max <= self.height
    }
}

impl Default for FrameSize {
    fn default() -> Self {
        FrameSize {
            width: 1280.0,
            height: 720.0,
        }
    }
}

/// Axis-aligned bounding box `(x_min, y_min, x_max, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::Degenerate(x_min, y_min, x_max, y_max));
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn centered(center: Point, width: f64, height: f64) -> Result<Self, GeometryError> {
        BBox::new(
            center.x - width / 2.0,
            center.y - height / 2.0,
            center.x + width / 2.0,
            center.y + height / 2.0,
        )
    }

    pub fn within(self, frame: FrameSize) -> Result<Self, GeometryError> {
        if frame.contains_box(&self) {
            Ok(self)
        } else {
            Err(GeometryError::OutOfFrame(
                self.x_min,
                self.y_min,
                self.x_max,
                self.y_max,
                frame.width,
                frame.height,
            ))
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> Point {
        bbox_center(self)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Largest per-coordinate deviation from another box.
    pub fn max_abs_diff(&self, other: &BBox) -> f64 {
        (self.x_min - other.x_min)
            .abs()
            .max((self.y_min - other.y_min).abs())
            .max((self.x_max - other.x_max).abs())
            .max((self.y_max - other.y_max).abs())
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

pub fn bbox_center(b: &BBox) -> Point {
    Point::new((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centers() {
        assert_eq!(
            bbox_center(&BBox::new(0.0, 0.0, 10.0, 10.0).unwrap()),
            Point::new(5.0, 5.0)
        );
        assert_eq!(
            bbox_center(&BBox::new(-4.0, -4.0, 4.0, 4.0).unwrap()),
            Point::new(0.0, 0.0)
        );
    }

    #[test]
    fn rejects_degenerate_and_out_of_frame() {
        assert!(BBox::new(1.0, 0.0, 1.0, 5.0).is_err());
        assert!(BBox::new(0.0, 5.0, 1.0, 2.0).is_err());
        let b = BBox::new(1200.0, 10.0, 1300.0, 50.0).unwrap();
        assert!(b.within(FrameSize::default()).is_err());
    }

    #[test]
    fn iou_basics() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        assert_eq!(a.iou(&a), 1.0);
        let b = BBox::new(5.0, 0.0, 15.0, 10.0).unwrap();
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        let c = BBox::new(20.0, 20.0, 30.0, 30.0).unwrap();
        assert_eq!(a.iou(&c), 0.0);
    }

    #[test]
    fn serde_as_quadruple() {
        let b = BBox::new(1.0, 2.0, 3.0, 4.0).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1.0,2.0,3.0,4.0]");
        assert!(serde_json::from_str::<BBox>("[3.0,2.0,1.0,4.0]").is_err());
    }

    proptest! {
        #[test]
        fn center_inside_box(x in -500.0f64..500.0, y in -500.0f64..500.0, w in 0.01f64..300.0, h in 0.01f64..300.0) {
            let b = BBox::new(x, y, x + w, y + h).unwrap();
            prop_assert!(b.contains(b.center()));
        }
    }
}
