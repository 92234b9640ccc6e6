//! Planar projective geometry: 4-point homography estimation, application and
//! inversion.
//!
//! A [`Homography`] is always stored with `h33 == 1`. Applying it to a point
//! produces a homogeneous triple `(S·x', S·y', S)`; the scale factor `S` is
//! divided out per point and never stored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|S|` below this is treated as a point on the vanishing line.
pub const SCALE_EPSILON: f64 = 1e-12;

/// Minimum Hadamard ratio `|det| / (|r1|·|r2|·|r3|)` of an invertible homography.
pub const DETERMINANT_FLOOR: f64 = 1e-14;

/// Relative pivot guard for the 8×8 estimation system.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Collinearity tolerance on the cross product of normalized points.
const COLLINEAR_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2 { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2 { x, y }
    }
}

/// z-component of `(b - a) × (c - a)`.
pub(crate) fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// 3×3 projective map, row-major, normalized so that `h33 == 1`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    h: [f64; 9],
}

impl fmt::Debug for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.h;
        write!(
            f,
            "Homography[[{}, {}, {}], [{}, {}, {}], [{}, {}, {}]]",
            h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]
        )
    }
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = Error;

    fn try_from(h: [f64; 9]) -> Result<Self> {
        Homography::from_coefficients(h)
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        h.h
    }
}

impl Homography {
    pub const IDENTITY: Homography = Homography { h: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0] };

    /// Builds a homography from 9 row-major coefficients, dividing through by
    /// `h33`.
    pub fn from_coefficients(h: [f64; 9]) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidHomography("coefficients must be finite".into()));
        }
        let max = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if h[8].abs() <= SCALE_EPSILON * max.max(1.0) {
            return Err(Error::InvalidHomography("h33 is zero; the map cannot be normalized".into()));
        }
        let s = h[8];
        let mut n = h.map(|v| v / s);
        n[8] = 1.0;
        let out = Homography { h: n };
        if !out.is_invertible() {
            return Err(Error::SingularMatrix(format!("determinant {} below floor", out.determinant())));
        }
        Ok(out)
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography { h: [1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0] }
    }

    /// Axis scaling `(x, y) -> (sx·x, sy·y)`.
    pub fn scaling(sx: f64, sy: f64) -> Result<Self> {
        Homography::from_coefficients([sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn coefficients(&self) -> [f64; 9] {
        self.h
    }

    pub fn determinant(&self) -> f64 {
        det3(&self.h)
    }

    /// Hadamard ratio `|det| / (|r1|·|r2|·|r3|)`: 1 for orthogonal rows, 0
    /// for singular ones, and unaffected by scaling any row.
    fn is_invertible(&self) -> bool {
        let norm = |r: usize| self.h[3 * r..3 * r + 3].iter().map(|v| v * v).sum::<f64>().sqrt();
        let rows = norm(0) * norm(1) * norm(2);
        rows > 0.0 && self.determinant().abs() / rows > DETERMINANT_FLOOR
    }

    /// Homogeneous scale `S = h31·x + h32·y + 1` at `p`.
    pub fn scale_at(&self, p: Point2) -> f64 {
        self.h[6] * p.x + self.h[7] * p.y + self.h[8]
    }

    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let h = &self.h;
        let s = h[6] * p.x + h[7] * p.y + h[8];
        if !(s.abs() >= SCALE_EPSILON) {
            return Err(Error::PointAtInfinity { x: p.x, y: p.y });
        }
        let x = (h[0] * p.x + h[1] * p.y + h[2]) / s;
        let y = (h[3] * p.x + h[4] * p.y + h[5]) / s;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::PointAtInfinity { x: p.x, y: p.y });
        }
        Ok(Point2 { x, y })
    }

    pub fn inverse(&self) -> Result<Homography> {
        if !self.is_invertible() {
            return Err(Error::SingularMatrix(format!("determinant {} below floor", self.determinant())));
        }
        let h = &self.h;
        let det = self.determinant();
        let adj = [
            h[4] * h[8] - h[5] * h[7],
            h[2] * h[7] - h[1] * h[8],
            h[1] * h[5] - h[2] * h[4],
            h[5] * h[6] - h[3] * h[8],
            h[0] * h[8] - h[2] * h[6],
            h[2] * h[3] - h[0] * h[5],
            h[3] * h[7] - h[4] * h[6],
            h[1] * h[6] - h[0] * h[7],
            h[0] * h[4] - h[1] * h[3],
        ];
        Homography::from_coefficients(adj.map(|v| v / det))
    }

    /// `self ∘ first`: the map that applies `first`, then `self`.
    pub fn after(&self, first: &Homography) -> Result<Homography> {
        Homography::from_coefficients(mul3(&self.h, &first.h))
    }
}

fn det3(h: &[f64; 9]) -> f64 {
    h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6])
        + h[2] * (h[3] * h[7] - h[4] * h[6])
}

fn mul3(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = (0..3).map(|k| a[r * 3 + k] * b[k * 3 + c]).sum();
        }
    }
    out
}

/// Free-function form of [`Homography::apply`].
pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2> {
    h.apply(p)
}

/// Free-function form of [`Homography::inverse`].
pub fn invert_homography(h: &Homography) -> Result<Homography> {
    h.inverse()
}

/// Four point pairs, `src[i] -> dst[i]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondences {
    pub src: [Point2; 4],
    pub dst: [Point2; 4],
}

impl Correspondences {
    pub fn new(src: [Point2; 4], dst: [Point2; 4]) -> Result<Self> {
        let c = Correspondences { src, dst };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (side, pts) in [("src", &self.src), ("dst", &self.dst)] {
            if let Some(p) = pts.iter().find(|p| !p.is_finite()) {
                return Err(Error::DegenerateCorrespondences {
                    reason: format!("{side} point ({}, {}) is not finite", p.x, p.y),
                    corners: None,
                });
            }
            let norm = Normalizer::fit(pts);
            let n = pts.map(|p| norm.forward(p));
            for triple in [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]] {
                let [a, b, c] = triple.map(|i| n[i]);
                if cross(a, b, c).abs() < COLLINEAR_EPSILON {
                    return Err(Error::DegenerateCorrespondences {
                        reason: format!(
                            "{side} corners {}, {} and {} are collinear",
                            triple[0], triple[1], triple[2]
                        ),
                        corners: Some(triple),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Similarity that moves the centroid to the origin and sets the mean
/// distance from it to √2.
#[derive(Debug, Clone, Copy)]
struct Normalizer {
    cx: f64,
    cy: f64,
    scale: f64,
}

impl Normalizer {
    fn fit(pts: &[Point2; 4]) -> Normalizer {
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
        let mean = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
        // coincident points keep unit scale and fail the collinearity test
        let scale = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
        Normalizer { cx, cy, scale }
    }

    fn forward(&self, p: Point2) -> Point2 {
        Point2::new((p.x - self.cx) * self.scale, (p.y - self.cy) * self.scale)
    }

    fn matrix(&self) -> [f64; 9] {
        let s = self.scale;
        [s, 0.0, -s * self.cx, 0.0, s, -s * self.cy, 0.0, 0.0, 1.0]
    }

    fn inverse_matrix(&self) -> [f64; 9] {
        let s = self.scale;
        [1.0 / s, 0.0, self.cx, 0.0, 1.0 / s, self.cy, 0.0, 0.0, 1.0]
    }
}

/// Estimates the homography that maps each `src[i]` onto `dst[i]`.
///
/// Both point sets are normalized (centroid at origin, mean radius √2), the
/// eight linear equations in `h11..h32` are solved exactly by Gaussian
/// elimination with partial pivoting, and the result is de-normalized and
/// rescaled to `h33 == 1`.
pub fn homography_from_correspondences(c: &Correspondences) -> Result<Homography> {
    c.validate()?;
    let ns = Normalizer::fit(&c.src);
    let nd = Normalizer::fit(&c.dst);

    let mut a = [[0.0_f64; 8]; 8];
    let mut b = [0.0_f64; 8];
    for i in 0..4 {
        let Point2 { x, y } = ns.forward(c.src[i]);
        let Point2 { x: u, y: v } = nd.forward(c.dst[i]);
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y];
        b[2 * i] = u;
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y];
        b[2 * i + 1] = v;
    }
    let sol = solve8(a, b)?;
    let normalized = [sol[0], sol[1], sol[2], sol[3], sol[4], sol[5], sol[6], sol[7], 1.0];
    let h = mul3(&nd.inverse_matrix(), &mul3(&normalized, &ns.matrix()));
    Homography::from_coefficients(h).map_err(|e| Error::DegenerateCorrespondences {
        reason: format!("estimated map is unusable: {e}"),
        corners: None,
    })
}

fn solve8(mut a: [[f64; 8]; 8], mut b: [f64; 8]) -> Result<[f64; 8]> {
    let scale = a.iter().flat_map(|row| row.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    let floor = PIVOT_FLOOR * scale;
    for col in 0..8 {
        let (pivot_row, pivot) =
            (col..8)
                .map(|r| (r, a[r][col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot > floor) {
            return Err(Error::DegenerateCorrespondences {
                reason: format!("pivot {pivot:e} in column {col} below {floor:e}"),
                corners: None,
            });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..8 {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let pivot_row = a[col];
            for (dst, src) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 8];
    for r in (0..8).rev() {
        let tail: f64 = (r + 1..8).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Ok(x)
}
