//! Planar primitives: points, poses and axis-aligned rectangles.

use serde::{Deserialize, Serialize};

use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    pub fn origin() -> Self {
        Point::new(T::zero(), T::zero())
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Global planar pose. Heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Pose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }

    pub fn distance(&self, other: &Pose<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Expresses a global point in this pose's body frame (x forward, y left).
    pub fn to_local(&self, p: &Point<T>) -> Point<T> {
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        let (s, c) = self.theta.sin_cos();
        Point::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Inverse of [`Pose::to_local`].
    pub fn to_global(&self, p: &Point<T>) -> Point<T> {
        let (s, c) = self.theta.sin_cos();
        Point::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Closed axis-aligned rectangle `[min_x, max_x] x [min_y, max_y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Real> Rect<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Square of side `side` centred on the origin.
    pub fn centered_square(side: T) -> Self {
        let h = side / (T::one() + T::one());
        Rect::new(-h, -h, h, h)
    }

    pub fn width(&self) -> T {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> T {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point<T> {
        let two = T::one() + T::one();
        Point::new(
            (self.min_x + self.max_x) / two,
            (self.min_y + self.max_y) / two,
        )
    }

    pub fn is_valid(&self) -> bool {
        self.min_x <= self.max_x && self.min_y <= self.max_y
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn contains_rect(&self, other: &Rect<T>) -> bool {
        other.min_x >= self.min_x
            && other.max_x <= self.max_x
            && other.min_y >= self.min_y
            && other.max_y <= self.max_y
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance<T: Real>(p: &Point<T>, a: &Point<T>, b: &Point<T>) -> T {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    if len2 == T::zero() {
        return p.distance(a);
    }
    let t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / len2;
    let t = t.max(T::zero()).min(T::one());
    let q = Point::new(a.x + t * abx, a.y + t * aby);
    p.distance(&q)
}
