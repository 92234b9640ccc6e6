mod common;

use proptest::prelude::*;
use tunnel_ipm_core::geometry::{Homography, Point2};
use tunnel_ipm_core::warp::{crop_and_mask, plan_warp, warp_image, Roi, WarpPlan};
use tunnel_ipm_core::Raster;

#[test]
fn checkerboard_warp_matches_reference_resampler() {
    let src = common::checkerboard(646, 324, 17);
    let mut r = common::rng(7);
    for _ in 0..3 {
        let h = common::random_frame_homography(&mut r, 646, 324, 90.0);
        let plan = WarpPlan::new(h, 646, 324, 0).unwrap();
        let got = warp_image(&src, &plan).unwrap();
        let want = common::reference_warp(&src, &h, 646, 324, 0);
        assert!(got.data() == want.as_slice());
    }
}

#[test]
fn roi_warp_matches_reference_resampler() {
    let src = common::checkerboard(646, 324, 9);
    let roi = Roi::new([(100., 300.), (540., 300.), (380., 60.), (260., 60.)].map(Point2::from), 7.2, 200.0)
        .unwrap();
    let plan = plan_warp(&roi, 120, 700).unwrap();
    let got = warp_image(&src, &plan).unwrap();
    let want = common::reference_warp(&src, &plan.h_src_to_dst, 120, 700, 0);
    assert!(got.data() == want.as_slice());
}

/// Shoelace area of a polygon.
fn shoelace(p: &[Point2]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i].x * p[(i + 1) % n].y - p[(i + 1) % n].x * p[i].y).sum::<f64>().abs() / 2.0
}

/// Pixel centers inside a convex polygon, counted row by row from the exact
/// edge crossings.
fn scanline_count(p: &[Point2], height: u32) -> u64 {
    let n = p.len();
    let mut total = 0;
    for y in 0..height {
        let yc = y as f64;
        let mut xs = Vec::new();
        for i in 0..n {
            let (a, b) = (p[i], p[(i + 1) % n]);
            if (a.y - yc) * (b.y - yc) <= 0.0 && a.y != b.y {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        if xs.len() >= 2 {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            total += (hi.floor() - lo.ceil() + 1.0).max(0.0) as u64;
        }
    }
    total
}

#[test]
fn crop_interior_matches_shoelace_and_scanline() {
    let corners = [(40., 320.), (600., 320.), (400., 20.), (240., 20.)].map(Point2::from);
    let roi = Roi::new(corners, 7.2, 200.0).unwrap();
    let white = Raster::filled(646, 324, 1, 255).unwrap();
    let (crop, off) = crop_and_mask(&white, &roi).unwrap();
    let lit = crop.data().iter().filter(|v| **v == 255).count() as f64;
    let area = shoelace(&corners);
    assert!((lit - area).abs() / area <= 0.005, "{lit} vs {area}");
    let shifted: Vec<Point2> = corners.iter().map(|p| Point2::new(p.x - off.x, p.y - off.y)).collect();
    assert_eq!(lit as u64, scanline_count(&shifted, crop.height()));
}

#[test]
fn crop_keeps_interior_pixels_exactly() {
    let src = common::checkerboard(646, 324, 5);
    let roi = Roi::new([(100., 300.), (540., 300.), (380., 60.), (260., 60.)].map(Point2::from), 7.2, 200.0)
        .unwrap();
    let (crop, off) = crop_and_mask(&src, &roi).unwrap();
    for y in 0..crop.height() {
        for x in 0..crop.width() {
            let (sx, sy) = (x + off.x as u32, y + off.y as u32);
            let v = crop.pixel(x, y)[0];
            if roi.contains(Point2::new(sx as f64, sy as f64)) {
                assert_eq!(v, src.pixel(sx, sy)[0]);
            } else {
                assert_eq!(v, 0);
            }
        }
    }
}

fn smooth(w: u32, h: u32) -> Raster {
    let mut data = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = 128.0 + 60.0 * (x as f64 / 23.0).sin() + 50.0 * (y as f64 / 17.0).cos();
            data.push(v.round() as u8);
        }
    }
    Raster::new(w, h, 1, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn round_trip_loses_at_most_interpolation_error(seed in any::<u64>()) {
        let (w, h) = (160u32, 96u32);
        let src = smooth(w, h);
        let mut r = common::rng(seed);
        let fwd = common::random_frame_homography(&mut r, w, h, 12.0);
        let there = warp_image(&src, &WarpPlan::new(fwd, w, h, 0).unwrap()).unwrap();
        let back = warp_image(&there, &WarpPlan::new(fwd.inverse().unwrap(), w, h, 0).unwrap()).unwrap();
        let inv = fwd.inverse().unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for y in 0..h {
            for x in 0..w {
                // skip pixels whose round trip touches the fill or the clamped rim
                let p = fwd.apply(Point2::new(x as f64, y as f64)).unwrap();
                let inside = |q: Point2| q.x >= 1.0 && q.x <= (w - 2) as f64 && q.y >= 1.0 && q.y <= (h - 2) as f64;
                if !inside(p) || !inside(inv.apply(p).unwrap()) || x < 2 || y < 2 || x + 2 >= w || y + 2 >= h {
                    continue;
                }
                sum += (back.pixel(x, y)[0] as f64 - src.pixel(x, y)[0] as f64).abs();
                n += 1;
            }
        }
        prop_assert!(n > (w * h / 2) as usize);
        prop_assert!(sum / n as f64 <= 2.0, "mean abs error {}", sum / n as f64);
    }

    #[test]
    fn samples_outside_the_source_take_the_fill(seed in any::<u64>(), fill in any::<u8>()) {
        let src = Raster::filled(40, 30, 1, 7).unwrap();
        let mut r = common::rng(seed);
        let h = common::random_frame_homography(&mut r, 40, 30, 8.0);
        // output twice as large, shifted, so much of it maps outside the source
        let shifted = Homography::translation(20.0, 15.0).after(&h).unwrap();
        let out = warp_image(&src, &WarpPlan::new(shifted, 80, 60, fill).unwrap()).unwrap();
        let inv = shifted.inverse().unwrap();
        for y in 0..60u32 {
            for x in 0..80u32 {
                let s = inv.apply(Point2::new(x as f64, y as f64)).unwrap();
                let inside = s.x >= -0.5 && s.x < 39.5 && s.y >= -0.5 && s.y < 29.5;
                prop_assert_eq!(out.pixel(x, y)[0], if inside { 7 } else { fill });
            }
        }
    }

    #[test]
    fn warping_is_deterministic(seed in any::<u64>()) {
        let src = common::checkerboard(120, 80, 7);
        let mut r = common::rng(seed);
        let h = common::random_frame_homography(&mut r, 120, 80, 20.0);
        let plan = WarpPlan::new(h, 120, 80, 0).unwrap();
        prop_assert_eq!(warp_image(&src, &plan).unwrap(), warp_image(&src, &plan).unwrap());
    }
}
