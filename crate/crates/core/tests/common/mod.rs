#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tunnel_ipm_core::geometry::{homography_from_correspondences, Correspondences, Homography, Point2};
use tunnel_ipm_core::{Annotation, BBox, Case, DatasetManifest, ImageRecord, Raster, Roi};

pub const BIN: &str = env!("CARGO_BIN_EXE_tunnel-ipm");

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn tunnel-ipm")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = run_cli(args);
    assert!(
        out.status.success(),
        "tunnel-ipm {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest `|sin|` over the four interior angles of a quadrilateral.
pub fn min_corner_sine(q: &[Point2; 4]) -> f64 {
    (0..4)
        .map(|i| {
            let (a, b, c) = (q[(i + 3) % 4], q[i], q[(i + 1) % 4]);
            let (ux, uy, vx, vy) = (a.x - b.x, a.y - b.y, c.x - b.x, c.y - b.y);
            ((ux * vy - uy * vx) / (ux.hypot(uy) * vx.hypot(vy))).abs()
        })
        .fold(1.0, f64::min)
}

/// Non-degenerate convex quadrilateral: one corner per quadrant around a
/// random center, every interior angle between 15 and 165 degrees.
pub fn random_convex_quad(r: &mut ChaCha8Rng) -> [Point2; 4] {
    let min_sine = 15f64.to_radians().sin();
    loop {
        let cx = r.random_range(-200.0..800.0);
        let cy = r.random_range(-200.0..500.0);
        let q = [0.25, 0.75, 1.25, 1.75].map(|q: f64| {
            let angle = (q + r.random_range(-0.15..0.15)) * std::f64::consts::PI;
            let radius = r.random_range(60.0..400.0);
            Point2::new(cx + radius * angle.cos(), cy + radius * angle.sin())
        });
        if min_corner_sine(&q) >= min_sine {
            return q;
        }
    }
}

/// Perspective maps of a `w x h` frame onto itself with corners displaced by
/// up to `jitter` pixels.
pub fn random_frame_homography(r: &mut ChaCha8Rng, w: u32, h: u32, jitter: f64) -> Homography {
    let (rx, by) = ((w - 1) as f64, (h - 1) as f64);
    let src = [(0.0, 0.0), (rx, 0.0), (rx, by), (0.0, by)].map(Point2::from);
    let dst = src
        .map(|p| Point2::new(p.x + r.random_range(-jitter..jitter), p.y + r.random_range(-jitter..jitter)));
    homography_from_correspondences(&Correspondences::new(src, dst).unwrap()).unwrap()
}

pub fn checkerboard(w: u32, h: u32, cell: u32) -> Raster {
    let mut data = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let dark = ((x / cell) + (y / cell)).is_multiple_of(2);
            // a faint gradient keeps bilinear weights from hiding behind flat cells
            let g = ((x + 2 * y) % 40) as u8;
            data.push(if dark { 20 + g } else { 190 + g });
        }
    }
    Raster::new(w, h, 1, data).unwrap()
}

/// Per-pixel inverse-mapping resampler written without the library's warp
/// code: homogeneous division, half-pixel border test, clamped neighbours,
/// bilinear blend, round.
pub fn reference_warp(src: &Raster, h_src_to_dst: &Homography, out_w: u32, out_h: u32, fill: u8) -> Vec<u8> {
    let m = h_src_to_dst.inverse().unwrap().coefficients();
    let (sw, sh) = (src.width() as i64, src.height() as i64);
    let px = |x: i64, y: i64| -> f64 {
        let x = x.max(0).min(sw - 1);
        let y = y.max(0).min(sh - 1);
        src.data()[(y * sw + x) as usize] as f64
    };
    let mut out = Vec::with_capacity((out_w * out_h) as usize);
    for v in 0..out_h {
        for u in 0..out_w {
            let (u, v) = (u as f64, v as f64);
            let s = m[6] * u + m[7] * v + m[8];
            if s.abs() < 1e-12 {
                out.push(fill);
                continue;
            }
            let x = (m[0] * u + m[1] * v + m[2]) / s;
            let y = (m[3] * u + m[4] * v + m[5]) / s;
            let inside = x >= -0.5 && x < sw as f64 - 0.5 && y >= -0.5 && y < sh as f64 - 0.5;
            if !inside {
                out.push(fill);
                continue;
            }
            let (xf, yf) = (x.floor(), y.floor());
            let (ax, ay) = (x - xf, y - yf);
            let (xi, yi) = (xf as i64, yf as i64);
            let top = px(xi, yi) * (1.0 - ax) + px(xi + 1, yi) * ax;
            let bottom = px(xi, yi + 1) * (1.0 - ax) + px(xi + 1, yi + 1) * ax;
            let value = top * (1.0 - ay) + bottom * ay;
            out.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// The full 646x324 frame as ROI: near edge along the bottom row, 7.2 m by
/// 200 m of road.
pub fn frame_roi() -> Roi {
    Roi::new([(0.0, 323.0), (645.0, 323.0), (645.0, 0.0), (0.0, 0.0)].map(Point2::from), 7.2, 200.0).unwrap()
}

/// Image row whose road distance is `world_y` under [`frame_roi`].
pub fn frame_row(world_y: f64) -> f64 {
    323.0 - world_y / 200.0 * 323.0
}

/// 106-image case-1 test manifest distributed over the four 50 m sections
/// as (images, objects) = (58, 111), (55, 87), (63, 83), (70, 92).
pub fn section_fixture() -> DatasetManifest {
    let rows = [(0usize, 58usize, 111usize), (58, 55, 87), (7, 63, 83), (70, 70, 92)];
    let n = 106;
    let mut m = DatasetManifest::new(Case::Case1);
    m.roi = Some(frame_roi());
    m.homography = Some(Homography::IDENTITY);
    for i in 0..n {
        let id = format!("test_{i:03}");
        m.images.push(ImageRecord { file: format!("images/{id}.png"), id, width: 646, height: 324 });
    }
    for (section, (start, images, objects)) in rows.into_iter().enumerate() {
        let cy = frame_row(25.0 + 50.0 * section as f64);
        for k in 0..objects {
            let img = (start + k % images) % n;
            let x = 40.0 + 60.0 * (k / images) as f64 + 150.0 * (section % 2) as f64;
            let b = BBox::new(x, cy - 4.0, x + 40.0, cy + 4.0).unwrap();
            m.annotations.push(Annotation::ground_truth(m.images[img].id.clone(), "car", b));
        }
    }
    m
}
