//! Python bindings for `cloi-instance`.
//!
//! Lengths are in meters. Instance ids are `int` or `None` for noise and
//! unlabeled points.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use cloi_instance::boundary::{detect_class_boundaries, BoundaryParams};
use cloi_instance::pointcloud::{farthest_point_indices, save_pts};
use cloi_instance::synth::{generate_scene, make_benchmark_suite, SceneSpec};
use cloi_instance::{
    load_pts, score as score_labelings, ClassLabel, Error, InstanceLabeling, LabeledPointCloud, Point3,
    PointRecord, RadiusIndex, SegmentationParams,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_class(name: &str) -> PyResult<ClassLabel> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown class `{name}`")))
}

/// A labeled point cloud.
#[pyclass(name = "PointCloud", module = "cloi_instance_py", frozen)]
struct PyPointCloud {
    inner: LabeledPointCloud,
}

#[pymethods]
impl PyPointCloud {
    /// Builds a cloud from positions, class names and optional
    /// ground-truth ids.
    #[new]
    #[pyo3(signature = (positions, classes, gt_instances=None))]
    fn new(
        positions: Vec<(f64, f64, f64)>,
        classes: Vec<String>,
        gt_instances: Option<Vec<Option<u32>>>,
    ) -> PyResult<Self> {
        if positions.len() != classes.len() {
            return Err(PyValueError::new_err("positions and classes differ in length"));
        }
        let gt = gt_instances.unwrap_or_else(|| vec![None; positions.len()]);
        if gt.len() != positions.len() {
            return Err(PyValueError::new_err("positions and gt_instances differ in length"));
        }
        let records = positions
            .into_iter()
            .zip(classes)
            .zip(gt)
            .map(|(((x, y, z), c), g)| Ok(PointRecord::new(Point3::new(x, y, z), parse_class(&c)?, g)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: LabeledPointCloud::new(records).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_pts(path).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (path, predictions=false))]
    fn save(&self, path: &str, predictions: bool) -> PyResult<()> {
        save_pts(&self.inner, path, predictions).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn positions(&self) -> Vec<(f64, f64, f64)> {
        self.inner.points().iter().map(|p| (p.position.x, p.position.y, p.position.z)).collect()
    }

    fn classes(&self) -> Vec<&'static str> {
        self.inner.points().iter().map(|p| p.class_label.name()).collect()
    }

    fn gt_instances(&self) -> Vec<Option<u32>> {
        self.inner.points().iter().map(|p| p.gt_instance).collect()
    }

    /// Predicted ids, or `None` everywhere when the cloud has none.
    fn predictions(&self) -> Vec<Option<u32>> {
        self.inner
            .points()
            .iter()
            .map(|p| p.pred_instance.and_then(|q| q.instance()))
            .collect()
    }

    /// Copy with the given predictions attached.
    fn with_predictions(&self, assignment: Vec<Option<u32>>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_predictions(&assignment).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("PointCloud(n={})", self.inner.len())
    }
}

/// Per-point class-boundary flags.
#[pyfunction]
#[pyo3(signature = (cloud, radius=0.04))]
fn class_boundaries(py: Python<'_>, cloud: &PyPointCloud, radius: f64) -> PyResult<Vec<bool>> {
    let params = BoundaryParams::new(radius).map_err(to_py)?;
    py.detach(|| {
        let index = RadiusIndex::build(&cloud.inner.positions()).map_err(to_py)?;
        Ok(detect_class_boundaries(&cloud.inner, &index, params))
    })
}

/// Instance id per point (`None` for noise).
#[pyfunction]
#[pyo3(signature = (cloud, epsilon=0.04, mu=20, boundary_radius=None))]
fn segment(
    py: Python<'_>,
    cloud: &PyPointCloud,
    epsilon: f64,
    mu: usize,
    boundary_radius: Option<f64>,
) -> PyResult<Vec<Option<u32>>> {
    let params = SegmentationParams::new(epsilon, mu, boundary_radius).map_err(to_py)?;
    Ok(py.detach(|| cloi_instance::segment(&cloud.inner, &params).assignment().to_vec()))
}

/// Scores the cloud's predictions against its ground truth.
///
/// Returns `{threshold: {"mprec", "mrec", "per_class": {class: (tp, fp, fn, precision, recall)}}}`.
#[pyfunction]
#[pyo3(signature = (cloud, thresholds=vec![0.25, 0.5, 0.75]))]
#[allow(clippy::type_complexity)]
fn score(
    py: Python<'_>,
    cloud: &PyPointCloud,
    thresholds: Vec<f64>,
) -> PyResult<BTreeMap<String, BTreeMap<String, Py<PyAny>>>> {
    if !cloud.inner.has_ground_truth() {
        return Err(PyValueError::new_err("every point needs a ground-truth instance"));
    }
    let pred = InstanceLabeling::predictions(&cloud.inner).map_err(to_py)?;
    let gt = InstanceLabeling::ground_truth(&cloud.inner);
    let report = score_labelings(&pred, &gt, &thresholds).map_err(to_py)?;
    let mut out = BTreeMap::new();
    for r in &report.thresholds {
        let per_class: BTreeMap<&str, (usize, usize, usize, Option<f64>, Option<f64>)> = r
            .per_class
            .iter()
            .map(|(c, s)| (c.name(), (s.tp, s.fp, s.fn_, s.precision, s.recall)))
            .collect();
        let mut entry = BTreeMap::new();
        entry.insert("mprec".to_string(), r.m_prec.into_pyobject(py)?.into_any().unbind());
        entry.insert("mrec".to_string(), r.m_rec.into_pyobject(py)?.into_any().unbind());
        entry.insert("per_class".to_string(), per_class.into_pyobject(py)?.into_any().unbind());
        out.insert(r.threshold.to_string(), entry);
    }
    Ok(out)
}

/// Synthetic scene from a benchmark profile.
#[pyfunction]
#[pyo3(signature = (profile, seed=0))]
fn synth_profile(profile: &str, seed: u64) -> PyResult<PyPointCloud> {
    let (spec, _) = make_benchmark_suite(profile, seed).map_err(to_py)?.remove(0);
    Ok(PyPointCloud {
        inner: generate_scene(&spec).map_err(to_py)?,
    })
}

/// Synthetic scene from a JSON scene description.
#[pyfunction]
fn synth_json(spec: &str) -> PyResult<PyPointCloud> {
    let spec = SceneSpec::from_json(spec).map_err(to_py)?;
    Ok(PyPointCloud {
        inner: generate_scene(&spec).map_err(to_py)?,
    })
}

/// Indices picked by farthest-point sampling from a seeded start.
#[pyfunction]
#[pyo3(signature = (positions, k, seed=0))]
fn farthest_points(positions: Vec<(f64, f64, f64)>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    let pts: Vec<Point3> = positions.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
    farthest_point_indices(&pts, k, seed).map_err(to_py)
}

#[pymodule]
fn cloi_instance_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointCloud>()?;
    m.add_function(wrap_pyfunction!(class_boundaries, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(synth_profile, m)?)?;
    m.add_function(wrap_pyfunction!(synth_json, m)?)?;
    m.add_function(wrap_pyfunction!(farthest_points, m)?)?;
    Ok(())
}
