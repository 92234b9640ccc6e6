//! Dataset manifests, box transformation between frames, train/test
//! splitting and distance-section binning.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Homography, Point2, SCALE_EPSILON};
use crate::warp::Roi;

pub const DEFAULT_SECTION_LENGTH_M: f64 = 50.0;
pub const DEFAULT_SECTION_COUNT: usize = 4;

/// Axis-aligned box `[x_min, y_min, x_max, y_max]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from([x_min, y_min, x_max, y_max]: [f64; 4]) -> Result<Self> {
        BBox::new(x_min, y_min, x_max, y_max)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let all_finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !all_finite || !(x_min < x_max) || !(y_min < y_max) {
            return Err(Error::InvalidManifest(format!("invalid box [{x_min}, {y_min}, {x_max}, {y_max}]")));
        }
        Ok(BBox { x_min, y_min, x_max, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// `(x-center, mean of y_min and y_max)`.
    pub fn center(&self) -> Point2 {
        Point2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        ]
        .map(Point2::from)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    /// Clamps to the pixel-center extent `[0, width-1] x [0, height-1]`;
    /// `None` when nothing of positive area remains.
    pub fn clamp_to(&self, width: u32, height: u32) -> Option<BBox> {
        let (r, b) = (width.saturating_sub(1) as f64, height.saturating_sub(1) as f64);
        let c = BBox {
            x_min: self.x_min.clamp(0.0, r),
            y_min: self.y_min.clamp(0.0, b),
            x_max: self.x_max.clamp(0.0, r),
            y_max: self.y_max.clamp(0.0, b),
        };
        (c.x_min < c.x_max && c.y_min < c.y_max).then_some(c)
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: String,
    pub category: String,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Annotation {
    pub fn ground_truth(image_id: impl Into<String>, category: impl Into<String>, bbox: BBox) -> Self {
        Annotation { image_id: image_id.into(), category: category.into(), bbox, confidence: None }
    }

    pub fn detection(
        image_id: impl Into<String>,
        category: impl Into<String>,
        bbox: BBox,
        confidence: f64,
    ) -> Self {
        Annotation {
            image_id: image_id.into(),
            category: category.into(),
            bbox,
            confidence: Some(confidence),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub file: String,
    pub width: u32,
    pub height: u32,
}

/// Which frame a manifest lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Uncropped camera frames.
    Original,
    /// Cropped to the ROI rectangle, outside masked black.
    Case1,
    /// Inverse-perspective warped.
    Case2,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Original => "original",
            Case::Case1 => "case1",
            Case::Case2 => "case2",
        })
    }
}

/// Images plus annotations for one experiment arm.
///
/// `homography`, when present, maps the original camera frame into this
/// manifest's frame; `roi` is given in the original camera frame. Together
/// they recover the image-to-road mapping used for section binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub case: Case,
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<Homography>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roi: Option<Roi>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DatasetManifest {
    pub fn new(case: Case) -> Self {
        DatasetManifest {
            case,
            images: Vec::new(),
            annotations: Vec::new(),
            homography: None,
            roi: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for img in &self.images {
            if !ids.insert(img.id.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate image id {:?}", img.id)));
            }
            if img.width == 0 || img.height == 0 {
                return Err(Error::InvalidManifest(format!("image {:?} has zero size", img.id)));
            }
        }
        if let Some(first) = self.images.first() {
            if let Some(odd) = self.images.iter().find(|i| (i.width, i.height) != (first.width, first.height))
            {
                return Err(Error::InvalidManifest(format!(
                    "image {:?} is {}x{} but {:?} is {}x{}",
                    odd.id, odd.width, odd.height, first.id, first.width, first.height
                )));
            }
        }
        for (i, a) in self.annotations.iter().enumerate() {
            if !ids.contains(a.image_id.as_str()) {
                return Err(Error::InvalidManifest(format!(
                    "annotation {i} refers to unknown image {:?}",
                    a.image_id
                )));
            }
            if let Some(c) = a.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidManifest(format!(
                        "annotation {i} has confidence {c} outside [0, 1]"
                    )));
                }
            }
        }
        if let Some(roi) = &self.roi {
            roi.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| Error::InvalidManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        m.validate().map_err(|e| Error::InvalidManifest(format!("{}: {e}", path.display())))?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn image_size(&self) -> Option<(u32, u32)> {
        self.images.first().map(|i| (i.width, i.height))
    }

    /// Image-to-road mapping for this manifest's frame.
    pub fn image_to_world(&self) -> Result<Homography> {
        let roi = self
            .roi
            .as_ref()
            .ok_or_else(|| Error::InvalidManifest("manifest has no roi; cannot locate sections".into()))?;
        let source_to_world = roi.image_to_world()?;
        match &self.homography {
            None => Ok(source_to_world),
            Some(h) => source_to_world.after(&h.inverse()?),
        }
    }

    pub fn section_map(&self, section_length_m: f64, section_count: usize) -> Result<SectionMap> {
        SectionMap::new(self.image_to_world()?, section_length_m, section_count)
    }
}

/// Image frame to road meters, cut into equal bands along the driving
/// direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionMap {
    pub h_image_to_world: Homography,
    pub section_length_m: f64,
    pub section_count: usize,
}

impl SectionMap {
    pub fn new(h_image_to_world: Homography, section_length_m: f64, section_count: usize) -> Result<Self> {
        if !(section_length_m > 0.0 && section_length_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "section length must be positive, got {section_length_m}"
            )));
        }
        if section_count == 0 {
            return Err(Error::InvalidParameter("section count must be at least 1".into()));
        }
        Ok(SectionMap { h_image_to_world, section_length_m, section_count })
    }

    /// Band index of a road distance, half-open `[k·len, (k+1)·len)`,
    /// clamped into `0..section_count`.
    pub fn section_of_distance(&self, world_y: f64) -> usize {
        let k = (world_y / self.section_length_m).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.section_count - 1)
        }
    }
}

/// Axis-aligned hull of the four mapped corners of `b`, clamped to
/// `out_width x out_height`. `Ok(None)` when the clamped box is empty.
pub fn transform_bbox(h: &Homography, b: &BBox, out_width: u32, out_height: u32) -> Result<Option<BBox>> {
    let corners = b.corners();
    let scales = corners.map(|p| h.scale_at(p));
    // a box straddling the vanishing line has no finite image
    let positive = scales[0] > 0.0;
    for (p, s) in corners.iter().zip(scales) {
        if s.abs() < SCALE_EPSILON || (s > 0.0) != positive {
            return Err(Error::PointAtInfinity { x: p.x, y: p.y });
        }
    }
    let mut mapped = [Point2::default(); 4];
    for (m, p) in mapped.iter_mut().zip(corners) {
        *m = h.apply(p)?;
    }
    let hull = BBox {
        x_min: mapped.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        y_min: mapped.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        x_max: mapped.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        y_max: mapped.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(hull.clamp_to(out_width, out_height))
}

/// Section of a box, located by projecting `(x-center, (y_min + y_max)/2)`
/// onto the road.
pub fn assign_section(b: &BBox, m: &SectionMap) -> Result<usize> {
    let world = m.h_image_to_world.apply(b.center())?;
    Ok(m.section_of_distance(world.y))
}

/// Keeps the annotations that fall in `section`. Boxes whose center cannot be
/// projected onto the road belong to no section.
pub fn filter_by_section(annotations: &[Annotation], m: &SectionMap, section: usize) -> Vec<Annotation> {
    annotations
        .iter()
        .filter(|a| matches!(assign_section(&a.bbox, m), Ok(s) if s == section))
        .cloned()
        .collect()
}

/// Partitions by image. `floor(n·ratio)` images go to train, the rest to
/// test; membership depends only on the image count and `seed`, and each
/// half keeps the input order.
pub fn split_train_test(
    d: &DatasetManifest,
    ratio: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("train ratio must lie in (0, 1), got {ratio}")));
    }
    let n = d.images.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let n_train = ((n as f64) * ratio + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_idx: BTreeSet<usize> = order[..n_train].iter().copied().collect();

    let mut train = DatasetManifest { images: Vec::new(), annotations: Vec::new(), ..d.clone() };
    let mut test = train.clone();
    let mut in_train = HashMap::new();
    for (i, img) in d.images.iter().enumerate() {
        let is_train = train_idx.contains(&i);
        in_train.insert(img.id.as_str(), is_train);
        if is_train {
            train.images.push(img.clone());
        } else {
            test.images.push(img.clone());
        }
    }
    for a in &d.annotations {
        match in_train.get(a.image_id.as_str()) {
            Some(true) => train.annotations.push(a.clone()),
            Some(false) => test.annotations.push(a.clone()),
            None => {
                return Err(Error::InvalidManifest(format!(
                    "annotation refers to unknown image {:?}",
                    a.image_id
                )))
            }
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SectionCount {
    /// 0-based section index.
    pub section: usize,
    /// Images with at least one object in this section.
    pub images: usize,
    pub objects: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetReport {
    pub case: Case,
    pub sections: Vec<SectionCount>,
    pub total_images: usize,
    pub total_objects: usize,
}

/// Per-section image and object counts. An image counts toward every section
/// holding one of its objects, so section image counts can add up to more
/// than the number of distinct images.
pub fn dataset_report(d: &DatasetManifest, m: &SectionMap) -> DatasetReport {
    let mut images: Vec<HashSet<&str>> = vec![HashSet::new(); m.section_count];
    let mut objects = vec![0usize; m.section_count];
    for a in &d.annotations {
        if let Ok(s) = assign_section(&a.bbox, m) {
            images[s].insert(a.image_id.as_str());
            objects[s] += 1;
        }
    }
    DatasetReport {
        case: d.case,
        sections: (0..m.section_count)
            .map(|s| SectionCount { section: s, images: images[s].len(), objects: objects[s] })
            .collect(),
        total_images: d.images.len(),
        total_objects: objects.iter().sum(),
    }
}

impl DatasetReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case,section,images,objects\n");
        for s in &self.sections {
            out += &format!("{},{},{},{}\n", self.case, s.section + 1, s.images, s.objects);
        }
        out += &format!("{},total,{},{}\n", self.case, self.total_images, self.total_objects);
        out
    }
}

impl fmt::Display for DatasetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:<10} {:>8} {:>8}", "case", "section", "images", "objects")?;
        for s in &self.sections {
            writeln!(
                f,
                "{:<8} {:<10} {:>8} {:>8}",
                self.case.to_string(),
                format!("section {}", s.section + 1),
                s.images,
                s.objects
            )?;
        }
        writeln!(
            f,
            "{:<8} {:<10} {:>8} {:>8}",
            self.case.to_string(),
            "total",
            self.total_images,
            self.total_objects
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    /// Image rows map linearly onto 0..200 m: row 199 is the near edge.
    fn linear_map() -> SectionMap {
        let h = Homography::from_coefficients([1., 0., 0., 0., -1., 199., 0., 0., 1.]).unwrap();
        SectionMap::new(h, 50., 4).unwrap()
    }

    fn at_distance(d: f64) -> BBox {
        let y = 199.0 - d;
        b(10., y - 1., 20., y + 1.)
    }

    #[test]
    fn bbox_rejects_inverted() {
        assert!(BBox::new(2., 0., 1., 1.).is_err());
        assert!(BBox::new(0., 0., 1., 0.).is_err());
        assert!(BBox::new(0., f64::NAN, 1., 1.).is_err());
        assert!(serde_json::from_str::<BBox>("[5,5,1,1]").is_err());
    }

    #[test]
    fn transform_bbox_examples() {
        let bx = b(10., 10., 20., 20.);
        assert_eq!(transform_bbox(&Homography::IDENTITY, &bx, 100, 100).unwrap(), Some(bx));
        let s = Homography::scaling(2., 2.).unwrap();
        assert_eq!(transform_bbox(&s, &bx, 100, 100).unwrap(), Some(b(20., 20., 40., 40.)));
        // clamping
        assert_eq!(transform_bbox(&s, &bx, 30, 100).unwrap(), Some(b(20., 20., 29., 40.)));
        // fully outside
        assert_eq!(transform_bbox(&s, &bx, 15, 15).unwrap(), None);
    }

    #[test]
    fn transform_bbox_straddling_horizon_fails() {
        let h = Homography::from_coefficients([1., 0., 0., 0., 1., 0., 0., 0.1, 1.]).unwrap();
        let r = transform_bbox(&h, &b(0., -20., 5., 5.), 100, 100);
        assert!(matches!(r, Err(Error::PointAtInfinity { .. })));
    }

    #[test]
    fn section_examples() {
        let m = linear_map();
        assert_eq!(assign_section(&at_distance(25.), &m).unwrap(), 0);
        assert_eq!(assign_section(&at_distance(125.), &m).unwrap(), 2);
        assert_eq!(assign_section(&at_distance(50.), &m).unwrap(), 1);
        assert_eq!(assign_section(&at_distance(199.), &m).unwrap(), 3);
        assert_eq!(m.section_of_distance(260.0), 3);
        assert_eq!(m.section_of_distance(-3.0), 0);
    }

    #[test]
    fn filter_examples() {
        let m = linear_map();
        let anns: Vec<_> =
            [5., 20., 40.].iter().map(|d| Annotation::ground_truth("a", "car", at_distance(*d))).collect();
        assert_eq!(filter_by_section(&anns, &m, 0), anns);
        assert!(filter_by_section(&anns, &m, 3).is_empty());
    }

    #[test]
    fn section_map_rejects_bad_params() {
        assert!(SectionMap::new(Homography::IDENTITY, 0.0, 4).is_err());
        assert!(SectionMap::new(Homography::IDENTITY, 50.0, 0).is_err());
    }

    fn manifest(n: usize) -> DatasetManifest {
        let mut d = DatasetManifest::new(Case::Case1);
        for i in 0..n {
            let id = format!("img{i:03}");
            d.images.push(ImageRecord { id: id.clone(), file: format!("{id}.png"), width: 100, height: 200 });
            for k in 0..(i % 3) {
                d.annotations.push(Annotation::ground_truth(&id, "car", at_distance(10. + 40. * k as f64)));
            }
        }
        d
    }

    #[test]
    fn split_of_527_images() {
        let (train, test) = split_train_test(&manifest(527), 0.8, 42).unwrap();
        assert_eq!((train.images.len(), test.images.len()), (421, 106));
    }

    #[test]
    fn split_is_deterministic_disjoint_and_complete() {
        let d = manifest(10);
        let (a1, b1) = split_train_test(&d, 0.8, 7).unwrap();
        let (a2, b2) = split_train_test(&d, 0.8, 7).unwrap();
        assert_eq!((&a1, &b1), (&a2, &b2));
        assert_eq!((a1.images.len(), b1.images.len()), (8, 2));
        let tr: HashSet<_> = a1.images.iter().map(|i| &i.id).collect();
        let te: HashSet<_> = b1.images.iter().map(|i| &i.id).collect();
        assert!(tr.is_disjoint(&te));
        assert_eq!(tr.len() + te.len(), 10);
        assert_eq!(a1.annotations.len() + b1.annotations.len(), d.annotations.len());
        for a in &a1.annotations {
            assert!(tr.contains(&a.image_id));
        }
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split_train_test(&DatasetManifest::new(Case::Case1), 0.8, 1),
            Err(Error::EmptyDataset)
        ));
        assert!(split_train_test(&manifest(3), 1.0, 1).is_err());
    }

    #[test]
    fn report_on_hand_countable_manifest() {
        // img000: none; img001: one at 10 m; img002: 10 m and 50 m
        let d = manifest(3);
        let r = dataset_report(&d, &linear_map());
        let rows: Vec<_> = r.sections.iter().map(|s| (s.images, s.objects)).collect();
        assert_eq!(rows, vec![(2, 2), (1, 1), (0, 0), (0, 0)]);
        assert_eq!((r.total_images, r.total_objects), (3, 3));
    }

    #[test]
    fn report_on_empty_manifest() {
        let r = dataset_report(&DatasetManifest::new(Case::Case2), &linear_map());
        assert!(r.sections.iter().all(|s| s.images == 0 && s.objects == 0));
        assert_eq!((r.total_images, r.total_objects), (0, 0));
    }

    #[test]
    fn manifest_validation() {
        let mut d = manifest(2);
        d.annotations.push(Annotation::ground_truth("nope", "car", b(0., 0., 1., 1.)));
        assert!(d.validate().is_err());
        let mut d = manifest(2);
        d.images[1].width = 50;
        assert!(d.validate().is_err());
        let mut d = manifest(2);
        d.annotations[0].confidence = Some(1.5);
        assert!(d.validate().is_err());
        let mut d = manifest(2);
        d.images.push(d.images[0].clone());
        assert!(d.validate().is_err());
    }

    #[test]
    fn manifest_json_shape() {
        let mut d = manifest(2);
        d.annotations[0].confidence = Some(0.5);
        let v: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(v["case"], "case1");
        assert_eq!(v["images"][1]["file"], "img001.png");
        assert_eq!(v["annotations"][0]["bbox"].as_array().unwrap().len(), 4);
        assert_eq!(v["annotations"][0]["confidence"], 0.5);
        assert!(v.get("homography").is_none());
    }

    #[test]
    fn world_map_composes_frame_homography() {
        let roi =
            Roi::new([(0., 199.), (99., 199.), (99., 0.), (0., 0.)].map(Point2::from), 9.9, 199.).unwrap();
        let mut d = manifest(1);
        d.roi = Some(roi);
        let m = d.section_map(50., 4).unwrap();
        let w = m.h_image_to_world.apply(Point2::new(0., 149.)).unwrap();
        assert!((w.y - 50.).abs() < 1e-9);
        // cropped frame shifted by (0, 100): row 49 is the same place
        d.homography = Some(Homography::translation(0., -100.));
        let m = d.section_map(50., 4).unwrap();
        let w = m.h_image_to_world.apply(Point2::new(0., 49.)).unwrap();
        assert!((w.y - 50.).abs() < 1e-9);
    }
}
