//! Python bindings for `tunnel_ipm_core`.
//!
//! Boxes are `(x_min, y_min, x_max, y_max)` tuples, points `(x, y)` tuples,
//! and manifests are passed as JSON text or file paths.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use tunnel_ipm_core::dataset::{self, SectionMap};
use tunnel_ipm_core::geometry::{self, Correspondences, Point2};
use tunnel_ipm_core::metrics::{self, LabeledDetection};
use tunnel_ipm_core::synth::{self, MissModel, SceneTemplate};
use tunnel_ipm_core::{warp, BBox, DatasetManifest, Raster};

create_exception!(tunnel_ipm, TunnelIpmError, PyException);

fn err(e: tunnel_ipm_core::Error) -> PyErr {
    TunnelIpmError::new_err(e.to_string())
}

type Box4 = (f64, f64, f64, f64);

fn bbox(b: Box4) -> PyResult<BBox> {
    BBox::new(b.0, b.1, b.2, b.3).map_err(err)
}

fn quad(points: [(f64, f64); 4]) -> [Point2; 4] {
    points.map(Point2::from)
}

/// Planar projective map with `h33 = 1`.
#[pyclass(name = "Homography", module = "tunnel_ipm", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyHomography(geometry::Homography);

#[pymethods]
impl PyHomography {
    /// From 9 row-major coefficients; divided through by the last one.
    #[new]
    fn new(coefficients: [f64; 9]) -> PyResult<Self> {
        geometry::Homography::from_coefficients(coefficients).map(Self).map_err(err)
    }

    #[staticmethod]
    fn identity() -> Self {
        Self(geometry::Homography::IDENTITY)
    }

    /// Map taking each of four `src` points onto the matching `dst` point.
    #[staticmethod]
    fn from_points(src: [(f64, f64); 4], dst: [(f64, f64); 4]) -> PyResult<Self> {
        let c = Correspondences::new(quad(src), quad(dst)).map_err(err)?;
        geometry::homography_from_correspondences(&c).map(Self).map_err(err)
    }

    fn apply(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        let p = self.0.apply(Point2::new(x, y)).map_err(err)?;
        Ok((p.x, p.y))
    }

    fn inverse(&self) -> PyResult<Self> {
        self.0.inverse().map(Self).map_err(err)
    }

    /// `self ∘ first`.
    fn after(&self, first: &PyHomography) -> PyResult<Self> {
        self.0.after(&first.0).map(Self).map_err(err)
    }

    fn coefficients(&self) -> [f64; 9] {
        self.0.coefficients()
    }

    fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    fn __repr__(&self) -> String {
        format!("Homography({:?})", self.0.coefficients())
    }
}

/// Road region given by four image corners: near-left, near-right,
/// far-right, far-left.
#[pyclass(name = "Roi", module = "tunnel_ipm", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyRoi(warp::Roi);

#[pymethods]
impl PyRoi {
    #[new]
    fn new(corners: [(f64, f64); 4], road_width_m: f64, length_m: f64) -> PyResult<Self> {
        warp::Roi::new(quad(corners), road_width_m, length_m).map(Self).map_err(err)
    }

    #[getter]
    fn corners(&self) -> [(f64, f64); 4] {
        self.0.corners.map(|p| (p.x, p.y))
    }

    fn image_to_world(&self) -> PyResult<PyHomography> {
        self.0.image_to_world().map(PyHomography).map_err(err)
    }

    fn default_output_size(&self) -> (u32, u32) {
        self.0.default_output_size()
    }

    /// Homography from the source image onto an `out_width x out_height`
    /// top-down view.
    fn warp_homography(&self, out_width: u32, out_height: u32) -> PyResult<PyHomography> {
        warp::plan_warp(&self.0, out_width, out_height).map(|p| PyHomography(p.h_src_to_dst)).map_err(err)
    }
}

/// Pinhole camera over the road plane.
#[pyclass(name = "CameraModel", module = "tunnel_ipm", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyCameraModel(synth::CameraModel);

#[pymethods]
impl PyCameraModel {
    #[new]
    #[pyo3(signature = (focal_px=None, height_m=None, pitch_deg=None, image_width=None, image_height=None))]
    fn new(
        focal_px: Option<f64>,
        height_m: Option<f64>,
        pitch_deg: Option<f64>,
        image_width: Option<u32>,
        image_height: Option<u32>,
    ) -> PyResult<Self> {
        let mut c = synth::CameraModel::default();
        if let Some(f) = focal_px {
            c.focal_px = f;
        }
        if let Some(h) = height_m {
            c.height_m = h;
        }
        if let Some(p) = pitch_deg {
            c.pitch_rad = p.to_radians();
        }
        if let (Some(w), Some(h)) = (image_width, image_height) {
            c.image_width = w;
            c.image_height = h;
            c.principal_point = Point2::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        }
        c.validate().map_err(err)?;
        Ok(Self(c))
    }

    /// Pixel of the road-frame point `(x, y, z)` in meters.
    fn project_point(&self, x: f64, y: f64, z: f64) -> PyResult<(f64, f64)> {
        let p = self.0.project_point([x, y, z]).map_err(err)?;
        Ok((p.x, p.y))
    }

    #[pyo3(signature = (road_width_m=7.2, length_m=200.0))]
    fn roi(&self, road_width_m: f64, length_m: f64) -> PyResult<PyRoi> {
        self.0.roi(road_width_m, length_m).map(PyRoi).map_err(err)
    }
}

#[pyfunction]
fn iou(a: Box4, b: Box4) -> PyResult<f64> {
    Ok(metrics::iou(&bbox(a)?, &bbox(b)?))
}

/// All-points interpolated AP of ranked detections.
#[pyfunction]
fn average_precision(confidences: Vec<f64>, true_positive: Vec<bool>, total_gt: usize) -> PyResult<f64> {
    if confidences.len() != true_positive.len() {
        return Err(TunnelIpmError::new_err("confidences and true_positive differ in length"));
    }
    let labeled: Vec<LabeledDetection> = confidences
        .into_iter()
        .zip(true_positive)
        .enumerate()
        .map(|(index, (confidence, tp))| LabeledDetection {
            index,
            confidence,
            true_positive: tp,
            matched: None,
        })
        .collect();
    Ok(metrics::average_precision(&labeled, total_gt))
}

/// 0-based distance section of a box.
#[pyfunction]
#[pyo3(signature = (bbox, image_to_world, section_length_m=50.0, section_count=4))]
fn assign_section(
    bbox: Box4,
    image_to_world: &PyHomography,
    section_length_m: f64,
    section_count: usize,
) -> PyResult<usize> {
    let m = SectionMap::new(image_to_world.0, section_length_m, section_count).map_err(err)?;
    dataset::assign_section(&self::bbox(bbox)?, &m).map_err(err)
}

/// Bounding box of the mapped corners clipped to the output frame, or
/// `None` when nothing is left.
#[pyfunction]
fn transform_bbox(h: &PyHomography, bbox: Box4, out_width: u32, out_height: u32) -> PyResult<Option<Box4>> {
    let b = dataset::transform_bbox(&h.0, &self::bbox(bbox)?, out_width, out_height).map_err(err)?;
    Ok(b.map(|b| (b.x_min, b.y_min, b.x_max, b.y_max)))
}

/// Warps an 8-bit image given as raw row-major bytes.
#[pyfunction]
#[pyo3(signature = (data, width, height, channels, h, out_width, out_height, fill=0))]
#[allow(clippy::too_many_arguments)]
fn warp_image<'py>(
    py: Python<'py>,
    data: Vec<u8>,
    width: u32,
    height: u32,
    channels: u8,
    h: &PyHomography,
    out_width: u32,
    out_height: u32,
    fill: u8,
) -> PyResult<Bound<'py, PyBytes>> {
    let src = Raster::new(width, height, channels, data).map_err(err)?;
    let plan = warp::WarpPlan::new(h.0, out_width, out_height, fill).map_err(err)?;
    let out = warp::warp_image(&src, &plan).map_err(err)?;
    Ok(PyBytes::new(py, out.data()))
}

/// Ground-truth manifest JSON of a seeded synthetic sequence.
#[pyfunction]
#[pyo3(signature = (frames, seed=42))]
fn generate_manifest(frames: usize, seed: u64) -> PyResult<String> {
    let seq =
        synth::generate_sequence(&synth::CameraModel::default(), &SceneTemplate::default(), frames, seed)
            .map_err(err)?;
    Ok(seq.manifest.to_json())
}

/// Simulated detections for a ground-truth manifest, as manifest JSON.
#[pyfunction]
#[pyo3(signature = (manifest_json, seed=42))]
fn simulate_detections(manifest_json: &str, seed: u64) -> PyResult<String> {
    let mut m = DatasetManifest::from_json(manifest_json).map_err(err)?;
    let miss = MissModel { seed, ..MissModel::default() };
    m.annotations = synth::simulate_detector(&m.annotations, &miss).map_err(err)?;
    Ok(m.to_json())
}

/// Per-section AP plus the pooled AP, both from manifest JSON text.
#[pyfunction]
#[pyo3(signature = (gt_json, dets_json, iou_threshold=0.5, section_length_m=50.0, section_count=4))]
fn evaluate(
    gt_json: &str,
    dets_json: &str,
    iou_threshold: f64,
    section_length_m: f64,
    section_count: usize,
) -> PyResult<(Vec<f64>, f64)> {
    let gt = DatasetManifest::from_json(gt_json).map_err(err)?;
    let dets = DatasetManifest::from_json(dets_json).map_err(err)?;
    let map = gt.section_map(section_length_m, section_count).map_err(err)?;
    let r =
        metrics::evaluate_by_section(&gt.annotations, &dets.annotations, &map, iou_threshold).map_err(err)?;
    Ok((r.section_aps(), r.overall.ap))
}

#[pymodule]
fn tunnel_ipm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TunnelIpmError", m.py().get_type::<TunnelIpmError>())?;
    m.add_class::<PyHomography>()?;
    m.add_class::<PyRoi>()?;
    m.add_class::<PyCameraModel>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(assign_section, m)?)?;
    m.add_function(wrap_pyfunction!(transform_bbox, m)?)?;
    m.add_function(wrap_pyfunction!(warp_image, m)?)?;
    m.add_function(wrap_pyfunction!(generate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_detections, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
