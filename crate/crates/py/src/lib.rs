//! Python bindings: images, flow fields, transforms, losses, matchers and the
//! benchmark runner. Heavy data crosses the boundary as flat lists or files.

use std::path::PathBuf;

use markerforge::benchmark::{
    self, BenchmarkConfig, DenseEstimator, DvlConfig, Estimator, FlowDirEstimator,
    HomographyEstimator, OracleEstimator,
};
use markerforge::flyingmarkers::{self, SamplerConfig};
use markerforge::geometry::FundamentalMatrix;
use markerforge::matcher::{self, DenseConfig, MatchOutcome};
use markerforge::{losses, GeometricTransform, Point2, ValidRegion};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyValueError};
use pyo3::prelude::*;

create_exception!(pymarkerforge, MarkerforgeError, PyException);

fn err(e: markerforge::Error) -> PyErr {
    MarkerforgeError::new_err(e.to_string())
}

/// Float image with values in `[0, 1]`, stored row-major and interleaved.
#[pyclass(name = "Image", module = "pymarkerforge", skip_from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: markerforge::Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> PyResult<Self> {
        markerforge::Image::new(width, height, channels, data).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        markerforge::Image::load(path).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn texture(width: usize, height: usize, seed: u64) -> Self {
        Self { inner: markerforge::imaging::procedural_texture(width, height, seed) }
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_png(path).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn get(&self, x: usize, y: usize, c: usize) -> PyResult<f64> {
        let i = &self.inner;
        if x >= i.width() || y >= i.height() || c >= i.channels() {
            return Err(PyIndexError::new_err("pixel out of range"));
        }
        Ok(i.get(x, y, c))
    }

    fn to_list(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{}x{})", self.inner.width(), self.inner.height(), self.inner.channels())
    }
}

/// Per-pixel absolute target positions with a validity mask.
#[pyclass(name = "FlowField", module = "pymarkerforge", skip_from_py_object)]
#[derive(Clone)]
pub struct PyFlowField {
    inner: markerforge::FlowField,
}

#[pymethods]
impl PyFlowField {
    #[staticmethod]
    fn identity(width: usize, height: usize) -> Self {
        Self { inner: markerforge::FlowField::identity(width, height) }
    }

    #[staticmethod]
    fn invalid(width: usize, height: usize) -> Self {
        Self { inner: markerforge::FlowField::invalid(width, height) }
    }

    #[staticmethod]
    fn read_flo(path: PathBuf) -> PyResult<Self> {
        markerforge::FlowField::read_flo(path).map(|inner| Self { inner }).map_err(err)
    }

    fn write_flo(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_flo(path).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn valid_count(&self) -> usize {
        self.inner.valid_count()
    }

    /// Target `(x, y)` of marker pixel `(x, y)`, or `None` where invalid.
    fn get(&self, x: usize, y: usize) -> PyResult<Option<(f64, f64)>> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyIndexError::new_err("pixel out of range"));
        }
        Ok(self.inner.get(x, y).map(|p| (p.x, p.y)))
    }

    #[pyo3(signature = (x, y, target))]
    fn set(&mut self, x: usize, y: usize, target: Option<(f64, f64)>) -> PyResult<()> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyIndexError::new_err("pixel out of range"));
        }
        self.inner.set(x, y, target.map(|(a, b)| Point2::new(a, b)));
        Ok(())
    }

    /// Copy shifted by a constant displacement.
    fn offset(&self, dx: f64, dy: f64) -> Self {
        Self { inner: self.inner.offset(Point2::new(dx, dy)) }
    }

    fn __repr__(&self) -> String {
        format!("FlowField({}x{}, {} valid)", self.inner.width(), self.inner.height(), self.inner.valid_count())
    }
}

/// A marker-to-reference map (affine, homography or thin-plate spline).
#[pyclass(name = "Transform", module = "pymarkerforge", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTransform {
    inner: GeometricTransform,
}

#[pymethods]
impl PyTransform {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        GeometricTransform::from_json(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    fn apply(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        self.inner.apply(Point2::new(x, y)).map(|p| (p.x, p.y)).map_err(err)
    }

    fn apply_inverse(&self, x: f64, y: f64) -> PyResult<(f64, f64)> {
        self.inner.apply_inverse(Point2::new(x, y)).map(|p| (p.x, p.y)).map_err(err)
    }

    /// Ground-truth flow over the marker grid; `clip` drops off-canvas targets.
    #[pyo3(signature = (clip = true))]
    fn flow(&self, clip: bool) -> PyResult<PyFlowField> {
        flyingmarkers::transform_flow(&self.inner, clip).map(|inner| PyFlowField { inner }).map_err(err)
    }
}

fn fundamental(rows: [[f64; 3]; 3]) -> PyResult<FundamentalMatrix> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    FundamentalMatrix::new(nalgebra::Matrix3::from_row_slice(&flat)).map_err(err)
}

/// Mean supervised L1 loss of `flow` against `transform`.
#[pyfunction]
fn l_syn(flow: &PyFlowField, transform: &PyTransform) -> PyResult<f64> {
    losses::l_syn(&flow.inner, &transform.inner).map(|r| r.mean).map_err(err)
}

/// Mean symmetric epipolar distance of `flow` under a row-major 3x3 `f`.
#[pyfunction]
fn l_sed(flow: &PyFlowField, f: [[f64; 3]; 3]) -> PyResult<f64> {
    losses::l_sed(&flow.inner, &fundamental(f)?).map(|r| r.mean).map_err(err)
}

/// `(checked, failures)` from a finite-difference check of the L1 gradient.
#[pyfunction]
#[pyo3(signature = (flow, transform, h = 1e-4, abs_tol = 1e-3, rel_tol = 1e-4))]
fn gradcheck_syn(flow: &PyFlowField, transform: &PyTransform, h: f64, abs_tol: f64, rel_tol: f64) -> PyResult<(usize, usize)> {
    losses::gradcheck_syn(&flow.inner, &transform.inner, h, abs_tol, rel_tol)
        .map(|r| (r.checked, r.failures))
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, mask = None))]
fn ssim(a: &PyImage, b: &PyImage, mask: Option<Vec<bool>>) -> PyResult<f64> {
    let region = region(a, mask)?;
    markerforge::imaging::ssim_value(&a.inner, &b.inner, &region).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, mask = None))]
fn psnr(a: &PyImage, b: &PyImage, mask: Option<Vec<bool>>) -> PyResult<f64> {
    let region = region(a, mask)?;
    markerforge::imaging::psnr_value(&a.inner, &b.inner, &region).map_err(err)
}

fn region(a: &PyImage, mask: Option<Vec<bool>>) -> PyResult<ValidRegion> {
    let (w, h) = a.inner.size();
    match mask {
        Some(m) => ValidRegion::new(w, h, m).map_err(err),
        None => Ok(ValidRegion::full(w, h)),
    }
}

/// Mean endpoint error over pixels valid in both fields.
#[pyfunction]
fn epe(pred: &PyFlowField, gt: &PyFlowField) -> PyResult<f64> {
    benchmark::epe(&pred.inner, &gt.inner).map(|r| r.mean).map_err(err)
}

#[pyfunction]
fn pck(pred: &PyFlowField, gt: &PyFlowField, delta: f64) -> PyResult<f64> {
    benchmark::pck(&pred.inner, &gt.inner, delta).map_err(err)
}

/// `(ssim, psnr)` of the marker warped into the reference by `flow`.
#[pyfunction]
#[pyo3(signature = (marker, flow, reference, twin = None))]
fn alignment(marker: &PyImage, flow: &PyFlowField, reference: &PyImage, twin: Option<&PyImage>) -> PyResult<(f64, f64)> {
    benchmark::alignment_eval(&marker.inner, &flow.inner, &reference.inner, twin.map(|t| &t.inner))
        .map(|a| (a.ssim, a.psnr))
        .map_err(err)
}

fn outcome(o: MatchOutcome) -> PyResult<PyFlowField> {
    match o {
        MatchOutcome::Flow(inner) => Ok(PyFlowField { inner }),
        MatchOutcome::Failed(reason) => Err(MarkerforgeError::new_err(format!("{}: {reason}", reason.code()))),
    }
}

/// Sparse baseline: corners, descriptors and a RANSAC homography.
/// Raises `MarkerforgeError` when no model can be fitted.
#[pyfunction]
fn match_homography(py: Python<'_>, marker: &PyImage, reference: &PyImage) -> PyResult<PyFlowField> {
    let (m, r) = (marker.inner.clone(), reference.inner.clone());
    let est = HomographyEstimator::default();
    outcome(py.detach(move || {
        let ka = matcher::detect_corners(&m, est.max_corners);
        let kb = matcher::detect_corners(&r, est.max_corners);
        let matches = matcher::match_descriptors(&m, &ka, &r, &kb);
        matcher::ransac_homography(&matches, &est.ransac, m.size())
    }))
}

/// Coarse-to-fine dense matcher; unmatched pixels are invalid.
#[pyfunction]
fn match_dense(py: Python<'_>, marker: &PyImage, reference: &PyImage) -> PyFlowField {
    let (m, r) = (marker.inner.clone(), reference.inner.clone());
    let inner = py.detach(move || matcher::dense_match(&m, &r, &DenseConfig::default()));
    PyFlowField { inner }
}

/// Writes a synthetic dataset and returns the number of samples.
#[pyfunction]
#[pyo3(signature = (markers, backgrounds, out, count = 100, seed = 0, workers = 1))]
fn generate_dataset(
    py: Python<'_>,
    markers: PathBuf,
    backgrounds: PathBuf,
    out: PathBuf,
    count: usize,
    seed: u64,
    workers: usize,
) -> PyResult<usize> {
    py.detach(move || {
        let m = flyingmarkers::list_images(markers)?;
        let b = flyingmarkers::list_images(backgrounds)?;
        let cfg = SamplerConfig { count, seed, ..SamplerConfig::default() };
        flyingmarkers::generate_dataset(&cfg, &m, &b, out, workers).map(|d| d.records.len())
    })
    .map_err(err)
}

/// Writes the procedural deformation/viewpoint/lighting set; returns the record count.
#[pyfunction]
fn generate_dvl(py: Python<'_>, out: PathBuf) -> PyResult<usize> {
    py.detach(move || benchmark::generate_dvl(&DvlConfig::default(), out).map(|e| e.len())).map_err(err)
}

/// Runs `method` (`oracle`, `homography`, `dense` or `flowdir`) over a
/// benchmark manifest and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (manifest, method = "homography", flows = None, workers = 1))]
fn run_benchmark(
    py: Python<'_>,
    manifest: PathBuf,
    method: &str,
    flows: Option<PathBuf>,
    workers: usize,
) -> PyResult<String> {
    let estimator: Box<dyn Estimator> = match (method, flows) {
        ("oracle", _) => Box::new(OracleEstimator),
        ("homography", _) => Box::new(HomographyEstimator::default()),
        ("dense", _) => Box::new(DenseEstimator::default()),
        ("flowdir", Some(dir)) => Box::new(FlowDirEstimator::new(dir)),
        ("flowdir", None) => return Err(PyValueError::new_err("flowdir needs a flows directory")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    py.detach(move || {
        let entries = benchmark::load_manifest(&manifest)?;
        let base = manifest.parent().map(PathBuf::from).unwrap_or_default();
        benchmark::run_manifest(&entries, &base, estimator.as_ref(), &BenchmarkConfig { workers })
            .map(|r| r.to_json())
    })
    .map_err(err)
}

#[pymodule]
fn pymarkerforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MarkerforgeError", m.py().get_type::<MarkerforgeError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyFlowField>()?;
    m.add_class::<PyTransform>()?;
    m.add_function(wrap_pyfunction!(l_syn, m)?)?;
    m.add_function(wrap_pyfunction!(l_sed, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck_syn, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(epe, m)?)?;
    m.add_function(wrap_pyfunction!(pck, m)?)?;
    m.add_function(wrap_pyfunction!(alignment, m)?)?;
    m.add_function(wrap_pyfunction!(match_homography, m)?)?;
    m.add_function(wrap_pyfunction!(match_dense, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dvl, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
