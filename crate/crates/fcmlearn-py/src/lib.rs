//! Python bindings for the map-learning library: thin wrappers around the
//! weight matrix and response-set types plus the operations a notebook
//! actually needs — generate, simulate, perturb, learn (convex and swarm),
//! tune, and score. Values cross the boundary as plain lists so the module
//! works without any array dependency on either side.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

use fcmlearn as fcm;
use fcmlearn::{ActivationFamily, ActivationSpec, LearnConfig, StateVector};

fn py_err(e: fcm::Error) -> PyErr {
    match &e {
        fcm::Error::InvalidParameter(_)
        | fcm::Error::DimensionMismatch(_)
        | fcm::Error::DataFormat { .. } => PyValueError::new_err(e.to_string()),
        fcm::Error::NonFinite(_) => PyArithmeticError::new_err(e.to_string()),
        fcm::Error::Io { .. } | fcm::Error::Json { .. } => PyIOError::new_err(e.to_string()),
    }
}

fn parse_family(name: &str) -> PyResult<ActivationFamily> {
    name.parse().map_err(py_err)
}

fn spec(family: &str, lambda_: f64) -> PyResult<ActivationSpec> {
    ActivationSpec::new(parse_family(family)?, lambda_).map_err(py_err)
}

fn rows_to_array(rows: &[Vec<f64>], what: &str) -> PyResult<Array2<f64>> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err(PyValueError::new_err(format!("{what} must be non-empty")));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err(format!(
            "{what} rows must all have the same length"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((height, width), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn array_to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn state_vectors(initials: Vec<Vec<f64>>) -> PyResult<Vec<StateVector>> {
    initials
        .into_iter()
        .map(|v| StateVector::from_vec(v).map_err(py_err))
        .collect()
}

/// An n×n map of causal link weights; entry (j, i) drives node i from
/// node j. All entries live in [-1, 1].
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct WeightMatrix {
    inner: fcm::WeightMatrix,
}

#[pymethods]
impl WeightMatrix {
    /// Build from a square list of rows.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let array = rows_to_array(&rows, "a weight matrix")?;
        Ok(WeightMatrix {
            inner: fcm::WeightMatrix::new(array).map_err(py_err)?,
        })
    }

    /// The matrix as a list of rows.
    fn to_rows(&self) -> Vec<Vec<f64>> {
        array_to_rows(self.inner.weights())
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// The weight of the link from node j to node i.
    fn get(&self, j: usize, i: usize) -> PyResult<f64> {
        let n = self.inner.n();
        if j >= n || i >= n {
            return Err(PyValueError::new_err(format!(
                "index ({j}, {i}) out of range for n = {n}"
            )));
        }
        Ok(self.inner.get(j, i))
    }

    /// Read a matrix from its JSON file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(WeightMatrix {
            inner: fcm::io::load_weight_matrix(&path).map_err(py_err)?,
        })
    }

    /// Write the matrix to a JSON file.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        fcm::io::save_weight_matrix(&path, &self.inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("WeightMatrix(n={})", self.inner.n())
    }
}

/// A set of m observed sequences over the same n nodes: each pairs an
/// initial state vector with the k states that followed it.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct ResponseSet {
    inner: fcm::ResponseSet,
}

#[pymethods]
impl ResponseSet {
    /// Build from initial vectors and, per sequence, a k×n list of the
    /// states that followed.
    #[staticmethod]
    fn from_sequences(initials: Vec<Vec<f64>>, sequences: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let arrays = sequences
            .iter()
            .map(|s| rows_to_array(s, "a sequence"))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(ResponseSet {
            inner: fcm::ResponseSet::new(state_vectors(initials)?, arrays).map_err(py_err)?,
        })
    }

    /// Read sequences from a canonical CSV file (or a directory handled by
    /// the CLI; here a single file).
    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(ResponseSet {
            inner: fcm::io::load_timeseries_csv(&path).map_err(py_err)?,
        })
    }

    /// Write all sequences to one canonical CSV file.
    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        fcm::io::save_timeseries_csv(&path, &self.inner, 0).map_err(py_err)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn initials(&self) -> Vec<Vec<f64>> {
        self.inner
            .initials()
            .iter()
            .map(|v| v.values().to_vec())
            .collect()
    }

    fn sequences(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.sequences().iter().map(array_to_rows).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ResponseSet(m={}, k={}, n={})",
            self.inner.m(),
            self.inner.k(),
            self.inner.n()
        )
    }
}

/// The winning hyperparameter triple of a random search, its full-data
/// reproduction error, and the weights it learned.
#[pyclass(frozen)]
struct SearchResult {
    #[pyo3(get)]
    alpha: f64,
    #[pyo3(get)]
    beta: f64,
    #[pyo3(get)]
    lambda_: f64,
    #[pyo3(get)]
    data_error: f64,
    #[pyo3(get)]
    weights: WeightMatrix,
}

#[pymethods]
impl SearchResult {
    fn __repr__(&self) -> String {
        format!(
            "SearchResult(alpha={}, beta={}, lambda_={}, data_error={})",
            self.alpha, self.beta, self.lambda_, self.data_error
        )
    }
}

/// Draw a random map: weights uniform in [-1, 1] kept with the given
/// density, magnitudes below the prune threshold snapped to zero.
#[pyfunction]
#[pyo3(signature = (n, density, family, lambda_, seed, prune_threshold=0.05))]
fn generate_map(
    n: usize,
    density: f64,
    family: &str,
    lambda_: f64,
    seed: u64,
    prune_threshold: f64,
) -> PyResult<WeightMatrix> {
    let spec = spec(family, lambda_)?;
    let inner = fcm::datagen::generate_fcm(&fcm::datagen::RandomFcmSpec {
        n,
        density,
        activation: spec,
        seed,
        prune_threshold,
    })
    .map_err(py_err)?;
    Ok(WeightMatrix { inner })
}

/// Draw m initial state vectors inside the family's value range.
#[pyfunction]
fn generate_initials(m: usize, n: usize, family: &str, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let vectors =
        fcm::datagen::generate_initials(m, n, parse_family(family)?, seed).map_err(py_err)?;
    Ok(vectors.into_iter().map(|v| v.values().to_vec()).collect())
}

/// Run the map forward for `steps` transitions from each initial vector.
#[pyfunction]
fn simulate(
    weights: &WeightMatrix,
    family: &str,
    lambda_: f64,
    initials: Vec<Vec<f64>>,
    steps: usize,
) -> PyResult<ResponseSet> {
    let spec = spec(family, lambda_)?;
    let inner = fcm::datagen::generate_responses(
        &weights.inner,
        &spec,
        &state_vectors(initials)?,
        steps,
    )
    .map_err(py_err)?;
    Ok(ResponseSet { inner })
}

/// Add Gaussian observation noise to every stored state (initials stay
/// untouched, mirroring how measurements of a known start would behave).
#[pyfunction]
#[pyo3(signature = (data, sigma, seed, mu=0.0))]
fn add_noise(data: &ResponseSet, sigma: f64, seed: u64, mu: f64) -> PyResult<ResponseSet> {
    let inner = fcm::datagen::add_noise(&data.inner, &fcm::datagen::NoiseSpec { mu, sigma, seed })
        .map_err(py_err)?;
    Ok(ResponseSet { inner })
}

/// Learn a weight matrix by per-node convex optimization: least-squares fit
/// with an optional sparsity penalty (beta) and entropy bonus (alpha).
#[pyfunction]
#[pyo3(signature = (data, family, lambda_, alpha=0.0, beta=0.0))]
fn learn(
    data: &ResponseSet,
    family: &str,
    lambda_: f64,
    alpha: f64,
    beta: f64,
) -> PyResult<WeightMatrix> {
    let cfg = LearnConfig::new(alpha, beta, spec(family, lambda_)?).map_err(py_err)?;
    Ok(WeightMatrix {
        inner: fcm::learn(&data.inner, &cfg).map_err(py_err)?,
    })
}

/// Fit a weight matrix with the particle-swarm baseline.
#[pyfunction]
#[pyo3(signature = (data, family, lambda_, seed, population=20, iters=500))]
fn pso_learn(
    data: &ResponseSet,
    family: &str,
    lambda_: f64,
    seed: u64,
    population: usize,
    iters: usize,
) -> PyResult<WeightMatrix> {
    let mut cfg = fcm::PsoConfig::new(seed);
    cfg.population_size = population;
    cfg.max_iters = iters;
    Ok(WeightMatrix {
        inner: fcm::pso_learn(&data.inner, &spec(family, lambda_)?, &cfg).map_err(py_err)?,
    })
}

/// Tune (alpha, beta, lambda) by uniform random search over open intervals,
/// minimizing the free-run reproduction error on the given data.
#[pyfunction]
#[pyo3(signature = (data, family, budget=200, seed=0,
                    alpha_range=(0.0, 0.3), beta_range=(0.0, 0.5), lambda_range=(0.0, 5.5)))]
fn random_search(
    data: &ResponseSet,
    family: &str,
    budget: usize,
    seed: u64,
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    lambda_range: (f64, f64),
) -> PyResult<SearchResult> {
    let space = fcm::SearchSpace {
        alpha_range,
        beta_range,
        lambda_range,
        budget,
        seed,
    };
    let base = LearnConfig::new(0.0, 0.0, spec(family, 1.0)?).map_err(py_err)?;
    let outcome = fcm::random_search(&data.inner, &space, &base).map_err(py_err)?;
    Ok(SearchResult {
        alpha: outcome.alpha,
        beta: outcome.beta,
        lambda_: outcome.lambda,
        data_error: outcome.data_error,
        weights: WeightMatrix {
            inner: outcome.weights,
        },
    })
}

/// Mean squared error between the stored sequences and a free run of the
/// map from each stored initial vector.
#[pyfunction]
fn data_error(data: &ResponseSet, weights: &WeightMatrix, family: &str, lambda_: f64) -> PyResult<f64> {
    fcm::metrics::data_error(&data.inner, &weights.inner, &spec(family, lambda_)?).map_err(py_err)
}

/// Mean absolute difference between two maps' entries.
#[pyfunction]
fn model_error(target: &WeightMatrix, learned: &WeightMatrix) -> PyResult<f64> {
    fcm::metrics::model_error(&target.inner, &learned.inner).map_err(py_err)
}

/// Harmonic mean of link-detection specificity and sensitivity after
/// binarizing both maps at the threshold.
#[pyfunction]
#[pyo3(signature = (target, learned, threshold=0.05))]
fn ss_mean(target: &WeightMatrix, learned: &WeightMatrix, threshold: f64) -> PyResult<f64> {
    fcm::metrics::ss_mean(&target.inner, &learned.inner, threshold).map_err(py_err)
}

/// Mean absolute gap between the trajectories of two maps free-run from the
/// same fresh initial vectors.
#[pyfunction]
fn out_of_sample_error(
    target: &WeightMatrix,
    learned: &WeightMatrix,
    family: &str,
    lambda_: f64,
    initials: Vec<Vec<f64>>,
    steps: usize,
) -> PyResult<f64> {
    fcm::metrics::out_of_sample_error(
        &target.inner,
        &learned.inner,
        &spec(family, lambda_)?,
        &state_vectors(initials)?,
        steps,
    )
    .map_err(py_err)
}

#[pymodule]
fn fcmlearn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<WeightMatrix>()?;
    m.add_class::<ResponseSet>()?;
    m.add_class::<SearchResult>()?;
    m.add_function(wrap_pyfunction!(generate_map, m)?)?;
    m.add_function(wrap_pyfunction!(generate_initials, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(pso_learn, m)?)?;
    m.add_function(wrap_pyfunction!(random_search, m)?)?;
    m.add_function(wrap_pyfunction!(data_error, m)?)?;
    m.add_function(wrap_pyfunction!(model_error, m)?)?;
    m.add_function(wrap_pyfunction!(ss_mean, m)?)?;
    m.add_function(wrap_pyfunction!(out_of_sample_error, m)?)?;
    Ok(())
}
