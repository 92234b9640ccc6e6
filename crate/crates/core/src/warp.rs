//! Region of interest handling and the two image preparations compared in the
//! experiment: case 1 crops to the ROI bounding rectangle and blacks out
//! everything outside the quadrilateral; case 2 resamples the ROI into a
//! bird's-eye rectangle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross, homography_from_correspondences, Correspondences, Homography, Point2};
use crate::raster::Raster;

/// Road quadrilateral in source pixels.
///
/// Corners are ordered near-left, near-right, far-right, far-left. In the
/// y-down image frame this is a clockwise turn on screen, so every
/// consecutive cross product is negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub corners: [Point2; 4],
    pub road_width_m: f64,
    pub length_m: f64,
}

pub const NEAR_LEFT: usize = 0;
pub const NEAR_RIGHT: usize = 1;
pub const FAR_RIGHT: usize = 2;
pub const FAR_LEFT: usize = 3;

impl Roi {
    pub fn new(corners: [Point2; 4], road_width_m: f64, length_m: f64) -> Result<Self> {
        let roi = Roi { corners, road_width_m, length_m };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.road_width_m > 0.0 && self.road_width_m.is_finite()) {
            return Err(Error::InvalidRoi(format!(
                "road_width_m must be positive, got {}",
                self.road_width_m
            )));
        }
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return Err(Error::InvalidRoi(format!("length_m must be positive, got {}", self.length_m)));
        }
        if let Some((i, p)) = self.corners.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(Error::InvalidRoi(format!("corner {i} ({}, {}) is not finite", p.x, p.y)));
        }
        // Collinear triples are reported by the correspondence check so the
        // caller sees which corners are at fault.
        Correspondences { src: self.corners, dst: self.world_corners() }.validate()?;
        for i in 0..4 {
            let turn = cross(self.corners[i], self.corners[(i + 1) % 4], self.corners[(i + 2) % 4]);
            if !(turn < 0.0) {
                return Err(Error::InvalidRoi(format!(
                    "corners must form a convex quadrilateral ordered near-left, near-right, \
                     far-right, far-left (turn at corner {} is {turn})",
                    (i + 1) % 4
                )));
            }
        }
        Ok(())
    }

    /// Road-plane meters: x across the road from the left edge, y along the
    /// driving direction from the near edge.
    pub fn world_corners(&self) -> [Point2; 4] {
        let (w, l) = (self.road_width_m, self.length_m);
        [(0.0, 0.0), (w, 0.0), (w, l), (0.0, l)].map(Point2::from)
    }

    pub fn image_to_world(&self) -> Result<Homography> {
        homography_from_correspondences(&Correspondences::new(self.corners, self.world_corners())?)
    }

    pub fn near_edge_length(&self) -> f64 {
        self.corners[NEAR_LEFT].distance(&self.corners[NEAR_RIGHT])
    }

    /// One output pixel per near-edge pixel across, with rows scaled so that
    /// a warped pixel covers a square patch of road.
    pub fn default_output_size(&self) -> (u32, u32) {
        let w = self.near_edge_length().round().max(2.0);
        let h = (w * self.length_m / self.road_width_m).round().max(2.0);
        (w as u32, h as u32)
    }

    /// Integer pixel rectangle `(x0, y0, x1, y1)`, inclusive, enclosing all
    /// corners.
    pub fn bounding_rect(&self) -> (i64, i64, i64, i64) {
        let xs = self.corners.map(|p| p.x);
        let ys = self.corners.map(|p| p.y);
        let min = |v: [f64; 4]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: [f64; 4]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min(xs).floor() as i64, min(ys).floor() as i64, max(xs).ceil() as i64, max(ys).ceil() as i64)
    }

    /// Inclusive point-in-quadrilateral test.
    pub fn contains(&self, p: Point2) -> bool {
        (0..4).all(|i| {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % 4];
            cross(a, b, p) <= 1e-9 * a.distance(&b)
        })
    }

    pub fn check_inside(&self, width: u32, height: u32) -> Result<()> {
        for (corner, p) in self.corners.iter().enumerate() {
            let inside = p.x >= 0.0 && p.y >= 0.0 && p.x <= (width - 1) as f64 && p.y <= (height - 1) as f64;
            if !inside {
                return Err(Error::RoiOutOfBounds { corner, x: p.x, y: p.y, width, height });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpPlan {
    pub h_src_to_dst: Homography,
    pub out_width: u32,
    pub out_height: u32,
    pub fill: u8,
}

impl WarpPlan {
    pub fn new(h_src_to_dst: Homography, out_width: u32, out_height: u32, fill: u8) -> Result<Self> {
        if out_width == 0 || out_height == 0 {
            return Err(Error::InvalidParameter(format!(
                "output size {out_width}x{out_height} must be at least 1x1"
            )));
        }
        Ok(WarpPlan { h_src_to_dst, out_width, out_height, fill })
    }
}

/// Maps the ROI onto the pixel-center rectangle `(0,0)..(w-1,h-1)`: the near
/// edge lands on the bottom row and the far edge on the top row.
pub fn plan_warp(roi: &Roi, out_width: u32, out_height: u32) -> Result<WarpPlan> {
    roi.validate()?;
    if out_width < 2 || out_height < 2 {
        return Err(Error::InvalidParameter(format!(
            "warp output {out_width}x{out_height} must be at least 2x2"
        )));
    }
    let (r, b) = ((out_width - 1) as f64, (out_height - 1) as f64);
    let dst = [(0.0, b), (r, b), (r, 0.0), (0.0, 0.0)].map(Point2::from);
    let h = homography_from_correspondences(&Correspondences::new(roi.corners, dst)?)?;
    WarpPlan::new(h, out_width, out_height, 0)
}

/// Bilinear sample at `(sx, sy)`; `None` outside the half-pixel border.
///
/// Neighbours are clamped to the raster, so the outermost half pixel reads
/// the edge value.
#[inline]
pub fn sample_bilinear(src: &Raster, sx: f64, sy: f64, channel: usize) -> Option<u8> {
    let (w, h) = (src.width() as f64, src.height() as f64);
    if !(sx >= -0.5 && sx < w - 0.5 && sy >= -0.5 && sy < h - 0.5) {
        return None;
    }
    let x0f = sx.floor();
    let y0f = sy.floor();
    let fx = sx - x0f;
    let fy = sy - y0f;
    let max_x = src.width() as i64 - 1;
    let max_y = src.height() as i64 - 1;
    let x0 = (x0f as i64).clamp(0, max_x) as u32;
    let x1 = (x0f as i64 + 1).clamp(0, max_x) as u32;
    let y0 = (y0f as i64).clamp(0, max_y) as u32;
    let y1 = (y0f as i64 + 1).clamp(0, max_y) as u32;
    let p00 = src.pixel(x0, y0)[channel] as f64;
    let p10 = src.pixel(x1, y0)[channel] as f64;
    let p01 = src.pixel(x0, y1)[channel] as f64;
    let p11 = src.pixel(x1, y1)[channel] as f64;
    let top = p00 * (1.0 - fx) + p10 * fx;
    let bottom = p01 * (1.0 - fx) + p11 * fx;
    let v = top * (1.0 - fy) + bottom * fy;
    Some(v.round().clamp(0.0, 255.0) as u8)
}

/// Inverse-maps every output pixel center into `src` and samples it
/// bilinearly. Rows are processed in parallel; each pixel depends only on its
/// own coordinates, so the result is identical to a sequential pass.
pub fn warp_image(src: &Raster, plan: &WarpPlan) -> Result<Raster> {
    let inverse = plan.h_src_to_dst.inverse()?;
    let channels = src.channels() as usize;
    let mut out = Raster::filled(plan.out_width, plan.out_height, src.channels(), plan.fill)?;
    let row_len = out.row_len();
    out.data_mut().par_chunks_mut(row_len).enumerate().for_each(|(v, row)| {
        for u in 0..plan.out_width as usize {
            let Ok(s) = inverse.apply(Point2::new(u as f64, v as f64)) else {
                continue;
            };
            for c in 0..channels {
                if let Some(value) = sample_bilinear(src, s.x, s.y, c) {
                    row[u * channels + c] = value;
                }
            }
        }
    });
    Ok(out)
}

/// Crops `src` to the ROI's bounding rectangle and sets every pixel whose
/// center lies outside the quadrilateral to black. Pixels inside are copied
/// unchanged. Returns the crop together with its top-left offset in `src`.
pub fn crop_and_mask(src: &Raster, roi: &Roi) -> Result<(Raster, Point2)> {
    roi.validate()?;
    roi.check_inside(src.width(), src.height())?;
    let (x0, y0, x1, y1) = roi.bounding_rect();
    let (cw, ch) = ((x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
    let channels = src.channels() as usize;
    let mut out = Raster::filled(cw, ch, src.channels(), 0)?;
    let row_len = out.row_len();
    out.data_mut().par_chunks_mut(row_len).enumerate().for_each(|(j, row)| {
        let sy = y0 + j as i64;
        for i in 0..cw as usize {
            let sx = x0 + i as i64;
            if roi.contains(Point2::new(sx as f64, sy as f64)) {
                let px = src.pixel(sx as u32, sy as u32);
                row[i * channels..(i + 1) * channels].copy_from_slice(px);
            }
        }
    });
    Ok((out, Point2::new(x0 as f64, y0 as f64)))
}
