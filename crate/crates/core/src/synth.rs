//! Synthetic tunnel road scenes with exact ground truth.
//!
//! A pinhole camera looks down the road from a low mount. World coordinates
//! are meters on the road plane: `x` across the road from its left edge, `y`
//! along the driving direction from the ROI near edge, `z` up. The camera
//! stands `setback_m` behind the near edge.
//!
//! Vehicles are flat-shaded boxes; their annotation is the axis-aligned hull
//! of the 8 projected corners. The simulated detector finds each object with
//! a probability that grows with its pixel area, which reproduces the
//! far-distance failure of detectors on perspective footage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Annotation, BBox, Case, DatasetManifest, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::{cross, Homography, Point2};
use crate::raster::Raster;
use crate::warp::Roi;

pub const CATEGORY: &str = "car";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub focal_px: f64,
    pub principal_point: Point2,
    pub height_m: f64,
    /// Downward tilt of the optical axis.
    pub pitch_rad: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Camera position across the road.
    pub position_x_m: f64,
    /// Ground distance from the camera foot to the ROI near edge.
    pub setback_m: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            focal_px: 700.0,
            principal_point: Point2::new(322.5, 161.5),
            height_m: 5.0,
            pitch_rad: 6f64.to_radians(),
            image_width: 646,
            image_height: 324,
            position_x_m: 3.6,
            setback_m: 20.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.focal_px > 0.0) {
            return bad(format!("focal length must be positive, got {}", self.focal_px));
        }
        if !(self.height_m > 0.0) {
            return bad(format!("mount height must be positive, got {}", self.height_m));
        }
        if !(self.pitch_rad >= 0.0 && self.pitch_rad < std::f64::consts::FRAC_PI_2) {
            return bad(format!("pitch must lie in [0, pi/2), got {}", self.pitch_rad));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image size must be at least 1x1".into());
        }
        if !(self.principal_point.is_finite() && self.position_x_m.is_finite() && self.setback_m.is_finite())
        {
            return bad("camera placement must be finite".into());
        }
        Ok(())
    }

    /// Camera-frame coordinates (right, down, forward) of a world point.
    fn camera_coords(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.pitch_rad.sin_cos();
        let rx = p[0] - self.position_x_m;
        let ry = p[1] + self.setback_m;
        let rz = p[2] - self.height_m;
        [rx, -ry * s - rz * c, ry * c - rz * s]
    }

    pub fn project_point(&self, world: [f64; 3]) -> Result<Point2> {
        let [x, y, z] = self.camera_coords(world);
        if !(z > 1e-9) {
            return Err(Error::BehindCamera { x: world[0], y: world[1], z: world[2] });
        }
        Ok(Point2::new(
            self.principal_point.x + self.focal_px * x / z,
            self.principal_point.y + self.focal_px * y / z,
        ))
    }

    /// Closed-form map from road-plane meters `(x, y)` to image pixels.
    pub fn ground_homography(&self) -> Result<Homography> {
        let (s, c) = self.pitch_rad.sin_cos();
        let (f, cx, cy) = (self.focal_px, self.principal_point.x, self.principal_point.y);
        let (h, d) = (self.height_m, self.setback_m);
        // camera coordinates as affine functions of (x, y, 1) on z = 0
        let xc = [1.0, 0.0, -self.position_x_m];
        let yc = [0.0, -s, -d * s + h * c];
        let zc = [0.0, c, d * c + h * s];
        let mut m = [0.0; 9];
        for k in 0..3 {
            m[k] = f * xc[k] + cx * zc[k];
            m[3 + k] = f * yc[k] + cy * zc[k];
            m[6 + k] = zc[k];
        }
        Homography::from_coefficients(m)
    }

    /// Road point seen through pixel `(u, v)`, if the ray hits the ground.
    pub fn pixel_to_ground(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let (s, c) = self.pitch_rad.sin_cos();
        let a = (u - self.principal_point.x) / self.focal_px;
        let b = (v - self.principal_point.y) / self.focal_px;
        // world direction = a·right + b·down + forward
        let dy = -b * s + c;
        let dz = -b * c - s;
        if dz >= -1e-12 {
            return None;
        }
        let t = self.height_m / -dz;
        Some((self.position_x_m + t * a, -self.setback_m + t * dy))
    }

    /// ROI spanned by the road edges at `y = 0` and `y = length_m`.
    pub fn roi(&self, road_width_m: f64, length_m: f64) -> Result<Roi> {
        let corners =
            [[0.0, 0.0, 0.0], [road_width_m, 0.0, 0.0], [road_width_m, length_m, 0.0], [0.0, length_m, 0.0]];
        let mut pts = [Point2::default(); 4];
        for (p, w) in pts.iter_mut().zip(corners) {
            *p = self.project_point(w)?;
        }
        Roi::new(pts, road_width_m, length_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    /// Footprint center across the road.
    pub x_m: f64,
    /// Footprint center along the road.
    pub y_m: f64,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub gray: u8,
}

impl Vehicle {
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (hx, hy) = (self.width_m / 2.0, self.length_m / 2.0);
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for dx in [-hx, hx] {
            for dy in [-hy, hy] {
                for z in [0.0, self.height_m] {
                    out[i] = [self.x_m + dx, self.y_m + dy, z];
                    i += 1;
                }
            }
        }
        out
    }

    /// Ground-contact rectangle, ordered like ROI corners.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (hx, hy) = (self.width_m / 2.0, self.length_m / 2.0);
        [
            [self.x_m - hx, self.y_m - hy],
            [self.x_m + hx, self.y_m - hy],
            [self.x_m + hx, self.y_m + hy],
            [self.x_m - hx, self.y_m + hy],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub road_width_m: f64,
    pub lane_count: u32,
    pub roi_length_m: f64,
    pub vehicles: Vec<Vehicle>,
    /// Amplitude of uniform per-pixel noise; 0 renders exact flat shading.
    #[serde(default)]
    pub pixel_noise: u8,
    pub seed: u64,
}

impl Scene {
    pub fn empty(road_width_m: f64, lane_count: u32, roi_length_m: f64) -> Self {
        Scene { road_width_m, lane_count, roi_length_m, vehicles: Vec::new(), pixel_noise: 0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.road_width_m > 0.0 && self.roi_length_m > 0.0) || self.lane_count == 0 {
            return Err(Error::InvalidParameter(
                "road width, ROI length and lane count must be positive".into(),
            ));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let inside = v.x_m - v.width_m / 2.0 >= 0.0
                && v.x_m + v.width_m / 2.0 <= self.road_width_m
                && v.y_m >= 0.0;
            let sized = v.length_m > 0.0 && v.width_m > 0.0 && v.height_m >= 0.0;
            if !inside || !sized {
                return Err(Error::InvalidParameter(format!("vehicle {i} is malformed or outside the road")));
            }
        }
        Ok(())
    }
}

const CEILING: u8 = 30;
const WALL: u8 = 55;
const ROAD: u8 = 95;
const EDGE_PAINT: u8 = 225;
const LANE_PAINT: u8 = 200;

/// Road, walls and ceiling without vehicles.
pub fn render_background(cam: &CameraModel, scene: &Scene) -> Result<Raster> {
    cam.validate()?;
    let (w, h) = (cam.image_width, cam.image_height);
    let mut img = Raster::filled(w, h, 1, CEILING)?;
    let width = scene.road_width_m;
    let lanes = scene.lane_count.max(1);
    img.data_mut().par_chunks_mut(w as usize).enumerate().for_each(|(v, row)| {
        for (u, px) in row.iter_mut().enumerate() {
            let Some((x, y)) = cam.pixel_to_ground(u as f64, v as f64) else {
                continue;
            };
            *px = if !(0.0..=width).contains(&x) {
                WALL
            } else if x < 0.15 || x > width - 0.15 {
                EDGE_PAINT
            } else {
                let divider = (1..lanes).any(|k| (x - width * k as f64 / lanes as f64).abs() < 0.075);
                if divider && y.rem_euclid(9.0) < 3.0 {
                    LANE_PAINT
                } else {
                    ROAD
                }
            };
        }
    });
    Ok(img)
}

/// Andrew's monotone chain; counter-clockwise in the `cross > 0` sense.
fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn projected_corners(cam: &CameraModel, v: &Vehicle) -> Option<Vec<Point2>> {
    v.corners().iter().map(|c| cam.project_point(*c).ok()).collect()
}

/// Annotation box of a vehicle: hull of its projected corners clipped to the
/// image. `None` when the vehicle is off-image or behind the camera.
pub fn vehicle_bbox(cam: &CameraModel, v: &Vehicle) -> Option<BBox> {
    let pts = projected_corners(cam, v)?;
    let hull = BBox {
        x_min: pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        y_min: pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        x_max: pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        y_max: pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    };
    hull.clamp_to(cam.image_width, cam.image_height)
}

/// Ground-truth annotations in drawing order (far to near).
pub fn scene_annotations(cam: &CameraModel, scene: &Scene, image_id: &str) -> Vec<Annotation> {
    draw_order(scene)
        .into_iter()
        .filter_map(|v| vehicle_bbox(cam, v))
        .map(|b| Annotation::ground_truth(image_id, CATEGORY, b))
        .collect()
}

fn draw_order(scene: &Scene) -> Vec<&Vehicle> {
    let mut vs: Vec<&Vehicle> = scene.vehicles.iter().collect();
    vs.sort_by(|a, b| b.y_m.total_cmp(&a.y_m));
    vs
}

fn paint_vehicles(cam: &CameraModel, scene: &Scene, img: &mut Raster) {
    let (w, h) = (cam.image_width, cam.image_height);
    for v in draw_order(scene) {
        let Some(pts) = projected_corners(cam, v) else {
            continue;
        };
        let Some(bb) = vehicle_bbox(cam, v) else {
            continue;
        };
        let hull = convex_hull(pts);
        let n = hull.len();
        let (x0, x1) = (bb.x_min.ceil() as u32, (bb.x_max.floor() as u32).min(w - 1));
        let (y0, y1) = (bb.y_min.ceil() as u32, (bb.y_max.floor() as u32).min(h - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = Point2::new(x as f64, y as f64);
                if (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= -1e-9) {
                    img.pixel_mut(x, y)[0] = v.gray;
                }
            }
        }
    }
}

fn add_noise(img: &mut Raster, amplitude: u8, seed: u64) {
    if amplitude == 0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = amplitude as i32;
    for px in img.data_mut() {
        let n: i32 = rng.random_range(-a..=a);
        *px = (*px as i32 + n).clamp(0, 255) as u8;
    }
}

fn render_on(background: &Raster, cam: &CameraModel, scene: &Scene) -> Raster {
    let mut img = background.clone();
    paint_vehicles(cam, scene, &mut img);
    add_noise(&mut img, scene.pixel_noise, scene.seed);
    img
}

/// Renders a gray frame and its ground truth.
pub fn render_scene(cam: &CameraModel, scene: &Scene, image_id: &str) -> Result<(Raster, Vec<Annotation>)> {
    scene.validate()?;
    let bg = render_background(cam, scene)?;
    Ok((render_on(&bg, cam, scene), scene_annotations(cam, scene, image_id)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleTemplate {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub gray_min: u8,
    pub gray_max: u8,
}

impl Default for VehicleTemplate {
    fn default() -> Self {
        VehicleTemplate { length_m: 4.5, width_m: 1.8, height_m: 1.5, gray_min: 150, gray_max: 240 }
    }
}

/// Per-lane conveyor traffic: each lane moves at its own constant speed and
/// vehicles enter with exponentially distributed headways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    /// Mean of the exponential part of the gap between consecutive vehicles.
    pub mean_headway_m: f64,
    /// Clear distance always kept between bumpers.
    pub min_gap_m: f64,
    pub speed_min_m_per_frame: f64,
    pub speed_max_m_per_frame: f64,
    pub lateral_jitter_m: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            mean_headway_m: 25.0,
            min_gap_m: 6.0,
            speed_min_m_per_frame: 18.0,
            speed_max_m_per_frame: 28.0,
            lateral_jitter_m: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneTemplate {
    pub road_width_m: f64,
    pub lane_count: u32,
    pub roi_length_m: f64,
    pub vehicle: VehicleTemplate,
    pub traffic: TrafficConfig,
    pub pixel_noise: u8,
}

impl Default for SceneTemplate {
    fn default() -> Self {
        SceneTemplate {
            road_width_m: 7.2,
            lane_count: 2,
            roi_length_m: 200.0,
            vehicle: VehicleTemplate::default(),
            traffic: TrafficConfig::default(),
            pixel_noise: 0,
        }
    }
}

impl SceneTemplate {
    pub fn validate(&self) -> Result<()> {
        let t = &self.traffic;
        let v = &self.vehicle;
        let lane_w = self.road_width_m / self.lane_count.max(1) as f64;
        let ok = self.road_width_m > 0.0
            && self.roi_length_m > v.length_m
            && self.lane_count > 0
            && v.length_m > 0.0
            && v.width_m > 0.0
            && v.height_m >= 0.0
            && v.gray_min <= v.gray_max
            && v.width_m + 2.0 * t.lateral_jitter_m <= lane_w
            && t.mean_headway_m > 0.0
            && t.min_gap_m >= 0.0
            && t.speed_min_m_per_frame > 0.0
            && t.speed_min_m_per_frame <= t.speed_max_m_per_frame;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("inconsistent scene template".into()))
        }
    }
}

struct Lane {
    center_x: f64,
    speed: f64,
    vehicles: Vec<Vehicle>,
    /// Center of the next vehicle to enter; below the entry point until it
    /// has arrived.
    pending_y: f64,
}

struct Traffic<'a> {
    template: &'a SceneTemplate,
    lanes: Vec<Lane>,
    gap: Exp<f64>,
    rng: ChaCha8Rng,
}

impl<'a> Traffic<'a> {
    fn entry(&self) -> f64 {
        -self.template.vehicle.length_m / 2.0
    }

    fn exit(&self) -> f64 {
        self.template.roi_length_m + self.template.vehicle.length_m / 2.0
    }

    fn sample_gap(&mut self) -> f64 {
        let t = &self.template;
        t.vehicle.length_m + t.traffic.min_gap_m + self.gap.sample(&mut self.rng)
    }

    fn spawn(&mut self, lane: usize, y: f64) -> Vehicle {
        let t = self.template;
        let j = t.traffic.lateral_jitter_m;
        let dx = if j > 0.0 { self.rng.random_range(-j..=j) } else { 0.0 };
        let gray = self.rng.random_range(t.vehicle.gray_min..=t.vehicle.gray_max);
        Vehicle {
            x_m: self.lanes[lane].center_x + dx,
            y_m: y,
            length_m: t.vehicle.length_m,
            width_m: t.vehicle.width_m,
            height_m: t.vehicle.height_m,
            gray,
        }
    }

    fn new(template: &'a SceneTemplate, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gap = Exp::new(1.0 / template.traffic.mean_headway_m)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let lane_w = template.road_width_m / template.lane_count as f64;
        let t = &template.traffic;
        let lanes = (0..template.lane_count)
            .map(|k| Lane {
                center_x: lane_w * (k as f64 + 0.5),
                speed: rng.random_range(t.speed_min_m_per_frame..=t.speed_max_m_per_frame),
                vehicles: Vec::new(),
                pending_y: 0.0,
            })
            .collect();
        let mut traffic = Traffic { template, lanes, gap, rng };
        // start from a populated road
        let (entry, exit) = (traffic.entry(), traffic.exit());
        for lane in 0..traffic.lanes.len() {
            let first = exit - traffic.rng.random::<f64>() * traffic.sample_gap();
            let mut y = first;
            while y >= entry {
                let v = traffic.spawn(lane, y);
                traffic.lanes[lane].vehicles.push(v);
                y -= traffic.sample_gap();
            }
            traffic.lanes[lane].pending_y = y;
        }
        Ok(traffic)
    }

    fn step(&mut self) {
        let (entry, exit) = (self.entry(), self.exit());
        for lane in 0..self.lanes.len() {
            let speed = self.lanes[lane].speed;
            for v in &mut self.lanes[lane].vehicles {
                v.y_m += speed;
            }
            self.lanes[lane].vehicles.retain(|v| v.y_m <= exit);
            self.lanes[lane].pending_y += speed;
            while self.lanes[lane].pending_y >= entry {
                let y = self.lanes[lane].pending_y;
                let v = self.spawn(lane, y);
                self.lanes[lane].vehicles.push(v);
                let g = self.sample_gap();
                self.lanes[lane].pending_y -= g;
            }
        }
    }

    /// Vehicles whose footprint lies entirely inside the ROI.
    fn snapshot(&self) -> Vec<Vehicle> {
        let l = self.template.roi_length_m;
        let mut out: Vec<Vehicle> = self
            .lanes
            .iter()
            .flat_map(|lane| lane.vehicles.iter())
            .filter(|v| v.y_m - v.length_m / 2.0 >= 0.0 && v.y_m + v.length_m / 2.0 <= l)
            .copied()
            .collect();
        out.sort_by(|a, b| a.y_m.total_cmp(&b.y_m).then(a.x_m.total_cmp(&b.x_m)));
        out
    }
}

fn frame_seed(seed: u64, frame: usize) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add((frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn frame_id(frame: usize) -> String {
    format!("frame_{frame:05}")
}

/// A generated sequence: one scene per frame plus the original-frame
/// manifest. Frames are rendered on demand.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub camera: CameraModel,
    pub roi: Roi,
    pub scenes: Vec<Scene>,
    pub manifest: DatasetManifest,
    background: Raster,
}

impl SyntheticSequence {
    pub fn render(&self, frame: usize) -> Raster {
        render_on(&self.background, &self.camera, &self.scenes[frame])
    }

    /// Renders every frame; per-frame seeds make the result independent of
    /// scheduling.
    pub fn render_all(&self) -> Vec<Raster> {
        (0..self.scenes.len()).into_par_iter().map(|i| self.render(i)).collect()
    }
}

/// Simulates `frames` frames of traffic and records ground truth for every
/// vehicle fully inside the ROI.
pub fn generate_sequence(
    cam: &CameraModel,
    template: &SceneTemplate,
    frames: usize,
    seed: u64,
) -> Result<SyntheticSequence> {
    cam.validate()?;
    template.validate()?;
    if frames == 0 {
        return Err(Error::InvalidParameter("frame count must be at least 1".into()));
    }
    let roi = cam.roi(template.road_width_m, template.roi_length_m)?;
    let mut traffic = Traffic::new(template, seed)?;
    let mut scenes = Vec::with_capacity(frames);
    for frame in 0..frames {
        if frame > 0 {
            traffic.step();
        }
        scenes.push(Scene {
            road_width_m: template.road_width_m,
            lane_count: template.lane_count,
            roi_length_m: template.roi_length_m,
            vehicles: traffic.snapshot(),
            pixel_noise: template.pixel_noise,
            seed: frame_seed(seed, frame),
        });
    }
    let mut manifest = DatasetManifest::new(Case::Original);
    manifest.roi = Some(roi);
    manifest.seed = Some(seed);
    for (i, scene) in scenes.iter().enumerate() {
        let id = frame_id(i);
        manifest.annotations.extend(scene_annotations(cam, scene, &id));
        manifest.images.push(ImageRecord {
            file: format!("frames/{id}.png"),
            id,
            width: cam.image_width,
            height: cam.image_height,
        });
    }
    let background = render_background(cam, &scenes[0])?;
    Ok(SyntheticSequence { camera: *cam, roi, scenes, manifest, background })
}

/// Size-dependent detector stand-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissModel {
    /// Pixel area at which detection becomes certain.
    pub reference_area_px: f64,
    pub recall_floor: f64,
    /// Standard deviation of the confidence noise.
    pub confidence_noise: f64,
    /// Edge jitter as a fraction of box width/height.
    pub box_jitter: f64,
    /// Additional absolute edge jitter in pixels.
    pub box_jitter_px: f64,
    pub seed: u64,
}

impl Default for MissModel {
    fn default() -> Self {
        MissModel {
            reference_area_px: 400.0,
            recall_floor: 0.0,
            confidence_noise: 0.05,
            box_jitter: 0.04,
            box_jitter_px: 0.5,
            seed: 42,
        }
    }
}

impl MissModel {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.recall_floor)
            && self.reference_area_px >= 0.0
            && self.confidence_noise >= 0.0
            && self.box_jitter >= 0.0
            && self.box_jitter_px >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid miss model".into()))
        }
    }

    /// `floor + (1 - floor)·min(1, area / reference_area)`.
    pub fn detection_probability(&self, area: f64) -> f64 {
        let ratio =
            if self.reference_area_px <= 0.0 { 1.0 } else { (area / self.reference_area_px).min(1.0) };
        self.recall_floor + (1.0 - self.recall_floor) * ratio
    }

    fn base_confidence(&self, area: f64) -> f64 {
        if self.reference_area_px <= 0.0 {
            1.0
        } else {
            area / (area + self.reference_area_px)
        }
    }
}

/// Turns ground truth into detections: each object survives with
/// [`MissModel::detection_probability`], survivors get jittered edges and a
/// confidence that grows with their pixel area.
pub fn simulate_detector(gts: &[Annotation], miss: &MissModel) -> Result<Vec<Annotation>> {
    miss.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(miss.seed);
    let mut out = Vec::new();
    for g in gts {
        let b = g.bbox;
        let area = b.area();
        let keep = rng.random::<f64>() < miss.detection_probability(area);
        let noise: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if !keep {
            continue;
        }
        let sx = miss.box_jitter * b.width() + miss.box_jitter_px;
        let sy = miss.box_jitter * b.height() + miss.box_jitter_px;
        let (x0, x1) = (b.x_min + sx * noise[0], b.x_max + sx * noise[1]);
        let (y0, y1) = (b.y_min + sy * noise[2], b.y_max + sy * noise[3]);
        let bbox = BBox::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)).unwrap_or(b);
        let confidence = (miss.base_confidence(area) + miss.confidence_noise * noise[4]).clamp(0.0, 1.0);
        out.push(Annotation::detection(g.image_id.clone(), g.category.clone(), bbox, confidence));
    }
    Ok(out)
}
