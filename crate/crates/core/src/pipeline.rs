//! Calibration files and the manifest-level halves of the case-1 / case-2
//! transforms. Image work lives in [`crate::warp`]; this module keeps the
//! annotations consistent with it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{transform_bbox, Case, DatasetManifest, ImageRecord, SectionMap};
use crate::error::{Error, Result};
use crate::geometry::{Homography, Point2};
use crate::warp::{plan_warp, Roi, WarpPlan};

/// ROI config file: the ROI plus an optional forced warp size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiConfig {
    #[serde(flatten)]
    pub roi: Roi,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_height: Option<u32>,
}

impl RoiConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn out_size(&self) -> Option<(u32, u32)> {
        self.out_width.zip(self.out_height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub roi: Roi,
    pub out_width: u32,
    pub out_height: u32,
    /// Source image to warped image.
    pub homography: Homography,
    pub inverse: Homography,
    /// Source image to road meters.
    pub image_to_world: Homography,
    pub section_length_m: f64,
    pub section_count: usize,
    /// Distance between each mapped ROI corner and its target, in warped
    /// pixels.
    pub residuals_px: [f64; 4],
    pub seed: u64,
}

impl Calibration {
    pub fn new(
        roi: &Roi,
        out_size: Option<(u32, u32)>,
        section_length_m: f64,
        section_count: usize,
        seed: u64,
    ) -> Result<Self> {
        roi.validate()?;
        let (w, h) = out_size.unwrap_or_else(|| roi.default_output_size());
        let plan = plan_warp(roi, w, h)?;
        let image_to_world = roi.image_to_world()?;
        SectionMap::new(image_to_world, section_length_m, section_count)?;
        let targets =
            [(0, h - 1), (w - 1, h - 1), (w - 1, 0), (0, 0)].map(|(x, y)| Point2::new(x as f64, y as f64));
        let mut residuals_px = [0.0; 4];
        for i in 0..4 {
            residuals_px[i] = plan.h_src_to_dst.apply(roi.corners[i])?.distance(&targets[i]);
        }
        Ok(Calibration {
            roi: *roi,
            out_width: w,
            out_height: h,
            homography: plan.h_src_to_dst,
            inverse: plan.h_src_to_dst.inverse()?,
            image_to_world,
            section_length_m,
            section_count,
            residuals_px,
            seed,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Calibration = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        c.roi.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serialization is infallible")
    }

    pub fn plan(&self, fill: u8) -> Result<WarpPlan> {
        WarpPlan::new(self.homography, self.out_width, self.out_height, fill)
    }

    /// Same ROI, different warp size.
    pub fn resized(&self, out_width: u32, out_height: u32) -> Result<Self> {
        Calibration::new(
            &self.roi,
            Some((out_width, out_height)),
            self.section_length_m,
            self.section_count,
            self.seed,
        )
    }
}

fn require_original(src: &DatasetManifest) -> Result<()> {
    if src.case != Case::Original || src.homography.is_some() {
        return Err(Error::InvalidManifest(format!(
            "transform expects an original-frame manifest, got {}",
            src.case
        )));
    }
    Ok(())
}

fn image_file(id: &str) -> String {
    format!("images/{id}.png")
}

/// Case-1 manifest: boxes shifted by the crop offset and clipped to the crop.
/// Returns the offset used.
pub fn case1_manifest(src: &DatasetManifest, roi: &Roi) -> Result<(DatasetManifest, Point2)> {
    require_original(src)?;
    if let Some((w, h)) = src.image_size() {
        roi.check_inside(w, h)?;
    }
    let (x0, y0, x1, y1) = roi.bounding_rect();
    let (cw, ch) = ((x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
    let (dx, dy) = (-(x0 as f64), -(y0 as f64));
    let mut out = DatasetManifest {
        case: Case::Case1,
        images: Vec::with_capacity(src.images.len()),
        annotations: Vec::with_capacity(src.annotations.len()),
        homography: Some(Homography::translation(dx, dy)),
        roi: Some(*roi),
        seed: src.seed,
    };
    out.images = src
        .images
        .iter()
        .map(|i| ImageRecord { id: i.id.clone(), file: image_file(&i.id), width: cw, height: ch })
        .collect();
    for a in &src.annotations {
        if let Some(bbox) = a.bbox.translate(dx, dy).clamp_to(cw, ch) {
            out.annotations.push(crate::dataset::Annotation { bbox, ..a.clone() });
        }
    }
    Ok((out, Point2::new(x0 as f64, y0 as f64)))
}

/// Case-2 manifest: every box replaced by the hull of its warped corners.
/// Boxes that straddle the horizon or leave the warped frame are dropped.
pub fn case2_manifest(src: &DatasetManifest, cal: &Calibration) -> Result<DatasetManifest> {
    require_original(src)?;
    let mut out = DatasetManifest {
        case: Case::Case2,
        images: Vec::with_capacity(src.images.len()),
        annotations: Vec::with_capacity(src.annotations.len()),
        homography: Some(cal.homography),
        roi: Some(cal.roi),
        seed: src.seed,
    };
    out.images = src
        .images
        .iter()
        .map(|i| ImageRecord {
            id: i.id.clone(),
            file: image_file(&i.id),
            width: cal.out_width,
            height: cal.out_height,
        })
        .collect();
    for a in &src.annotations {
        match transform_bbox(&cal.homography, &a.bbox, cal.out_width, cal.out_height) {
            Ok(Some(bbox)) => out.annotations.push(crate::dataset::Annotation { bbox, ..a.clone() }),
            Ok(None) | Err(Error::PointAtInfinity { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Annotation, BBox};

    fn roi() -> Roi {
        Roi::new([(20., 90.), (80., 90.), (60., 10.), (40., 10.)].map(Point2::from), 7.2, 100.).unwrap()
    }

    fn original() -> DatasetManifest {
        let mut d = DatasetManifest::new(Case::Original);
        d.images.push(ImageRecord { id: "a".into(), file: "a.png".into(), width: 100, height: 100 });
        d.annotations.push(Annotation::ground_truth("a", "car", BBox::new(45., 50., 55., 60.).unwrap()));
        d.annotations.push(Annotation::ground_truth("a", "car", BBox::new(0., 0., 5., 5.).unwrap()));
        d.roi = Some(roi());
        d
    }

    #[test]
    fn calibration_residuals_are_tiny() {
        let c = Calibration::new(&roi(), None, 50., 4, 42).unwrap();
        assert_eq!((c.out_width, c.out_height), (60, 833));
        assert!(c.residuals_px.iter().all(|r| *r < 1e-6));
        let text = c.to_json();
        let back: Calibration = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn case1_shifts_and_drops() {
        let (m, off) = case1_manifest(&original(), &roi()).unwrap();
        assert_eq!(off, Point2::new(20., 10.));
        assert_eq!(m.images[0].width, 61);
        assert_eq!(m.images[0].height, 81);
        assert_eq!(m.annotations.len(), 1);
        assert_eq!(m.annotations[0].bbox, BBox::new(25., 40., 35., 50.).unwrap());
        // section lookup in the cropped frame equals the one in the source frame
        let src_map = original().section_map(50., 4).unwrap();
        let crop_map = m.section_map(50., 4).unwrap();
        let a = src_map.h_image_to_world.apply(Point2::new(50., 55.)).unwrap();
        let b = crop_map.h_image_to_world.apply(Point2::new(30., 45.)).unwrap();
        assert!(a.distance(&b) < 1e-9);
    }

    #[test]
    fn case2_maps_boxes_through_homography() {
        let cal = Calibration::new(&roi(), Some((60, 100)), 50., 4, 42).unwrap();
        let m = case2_manifest(&original(), &cal).unwrap();
        let want =
            transform_bbox(&cal.homography, &original().annotations[0].bbox, 60, 100).unwrap().unwrap();
        assert_eq!(m.annotations[0].bbox, want);
        assert_eq!(m.case, Case::Case2);
    }

    #[test]
    fn transforms_require_original_frame() {
        let (m, _) = case1_manifest(&original(), &roi()).unwrap();
        assert!(case1_manifest(&m, &roi()).is_err());
    }
}
