//! Python bindings: models, simulation, EL and likelihood fits, and the
//! bootstrap specification test. Results come back as plain dicts.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use ccf_el::baselines::mle_fit;
use ccf_el::el::{estimate_el, ElOptions};
use ccf_el::init::start_values;
use ccf_el::io::{EstimateReport, DEFAULT_DELTA};
use ccf_el::spectest::{bootstrap_test, TestOptions};
use ccf_el::{ModelKind, ModelSpec, SamplePath};

create_exception!(ccfel, CcfElError, PyException);

fn err(e: ccf_el::Error) -> PyErr {
    CcfElError::new_err(format!("{e} (exit code {})", e.exit_code()))
}

fn parse_kind(name: &str) -> PyResult<ModelKind> {
    name.parse().map_err(err)
}

/// A scalar, or one value per state coordinate.
#[derive(FromPyObject)]
enum Vector {
    Scalar(f64),
    Many(Vec<f64>),
}

impl Vector {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Vector::Scalar(v) => vec![v],
            Vector::Many(v) => v,
        }
    }
}

/// A univariate series, or rows of a bivariate one.
#[derive(FromPyObject)]
enum Series {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

fn sample_path(series: Series, delta: f64) -> PyResult<SamplePath> {
    match series {
        Series::Flat(v) => SamplePath::univariate(v, delta),
        Series::Rows(rows) => {
            let dim = rows.first().map_or(1, Vec::len);
            SamplePath::new(dim, rows.into_iter().flatten().collect(), delta)
        }
    }
    .map_err(err)
}

fn series_object(py: Python<'_>, path: &SamplePath) -> PyResult<Py<PyAny>> {
    if path.dim() == 1 {
        Ok(path.data().to_vec().into_pyobject(py)?.into_any().unbind())
    } else {
        let rows: Vec<Vec<f64>> = path.data().chunks(path.dim()).map(<[f64]>::to_vec).collect();
        Ok(rows.into_pyobject(py)?.into_any().unbind())
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| CcfElError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (kind, theta, delta = DEFAULT_DELTA))]
    fn new(kind: &str, theta: Vec<f64>, delta: f64) -> PyResult<Self> {
        Ok(PyModel { inner: ModelSpec::new(parse_kind(kind)?, theta, delta).map_err(err)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().slug()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta().to_vec()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn param_names(&self) -> Vec<&'static str> {
        self.inner.kind().param_names().to_vec()
    }

    /// E[exp(i u'X_{t+δ}) | X_t = x].
    fn ccf(&self, u: Vector, x: Vector) -> PyResult<Complex64> {
        Ok(ccf_el::ccf(&self.inner, &u.into_vec(), &x.into_vec()).map_err(err)?.value())
    }

    #[pyo3(signature = (n, seed = 1, x0 = None))]
    fn simulate(&self, py: Python<'_>, n: usize, seed: u64, x0: Option<Vector>) -> PyResult<Py<PyAny>> {
        let x0 = x0.map(Vector::into_vec);
        let path = py.detach(|| ccf_el::simulate_seeded(&self.inner, n, seed, 0, x0.as_deref())).map_err(err)?;
        series_object(py, &path)
    }

    fn __repr__(&self) -> String {
        format!("Model({:?}, {:?}, delta={})", self.inner.kind().slug(), self.inner.theta(), self.inner.delta())
    }
}

/// Fits `model` to `data` by EL (default), MLE or AMLE.
#[pyfunction]
#[pyo3(signature = (model, data, delta = DEFAULT_DELTA, estimator = "el", start = None))]
fn estimate(
    py: Python<'_>,
    model: &str,
    data: Series,
    delta: f64,
    estimator: &str,
    start: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let kind = parse_kind(model)?;
    let data = sample_path(data, delta)?;
    let report = py
        .detach(|| -> ccf_el::Result<EstimateReport> {
            match estimator {
                "el" => Ok(EstimateReport::from(&estimate_el(kind, &data, start.as_deref(), &ElOptions::default())?)),
                "mle" | "amle" => {
                    let init = match start {
                        Some(s) => s,
                        None => start_values(kind, &data)?,
                    };
                    Ok(EstimateReport::from(&mle_fit(kind, &data, &init)?))
                }
                other => Err(ccf_el::Error::Config(format!("unknown estimator {other:?}"))),
            }
        })
        .map_err(err)?;
    to_dict(py, &report)
}

/// Bootstrap specification test of `null_model`.
#[pyfunction]
#[pyo3(signature = (null_model, data, delta = DEFAULT_DELTA, bootstrap = 99, alpha = 0.05, seed = 1, bandwidths = None))]
#[allow(clippy::too_many_arguments)]
fn spec_test(
    py: Python<'_>,
    null_model: &str,
    data: Series,
    delta: f64,
    bootstrap: usize,
    alpha: f64,
    seed: u64,
    bandwidths: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let kind = parse_kind(null_model)?;
    let data = sample_path(data, delta)?;
    let mut opts = TestOptions::new(bootstrap, alpha, seed);
    opts.bandwidths = bandwidths;
    let result = py.detach(|| bootstrap_test(kind, &data, &opts)).map_err(err)?;
    to_dict(py, &result)
}

/// The simulated stand-in for the monthly T-bill series.
#[pyfunction]
#[pyo3(signature = (seed = ccf_el::study::SYNTHETIC_TBILL_SEED))]
fn synthetic_tbill(py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
    let path = ccf_el::study::synthetic_tbill(seed).map_err(err)?;
    series_object(py, &path)
}

/// Reads a `t,x` (or `t,x1,x2`) CSV file.
#[pyfunction]
#[pyo3(signature = (path, delta = DEFAULT_DELTA))]
fn read_csv(py: Python<'_>, path: std::path::PathBuf, delta: f64) -> PyResult<Py<PyAny>> {
    let data = ccf_el::io::ingest_csv(&path, delta).map_err(err)?;
    series_object(py, &data)
}

#[pymodule]
fn ccfel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CcfElError", m.py().get_type::<CcfElError>())?;
    m.add("DEFAULT_DELTA", DEFAULT_DELTA)?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(spec_test, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_tbill, m)?)?;
    m.add_function(wrap_pyfunction!(read_csv, m)?)?;
    Ok(())
}
