//! Python bindings for the stacked-metasurface channel simulator.
//!
//! Matrices cross the boundary as nested lists of Python complex numbers
//! (row-major); experiment configs and CSV records cross as plain strings in
//! the same formats the CLI uses.

// The pymethods/pyfunction expansions insert error conversions that clippy
// attributes to our spans.
#![allow(clippy::useless_conversion)]

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use simstack::harness;
use simstack::matrix::ComplexMatrix;
use simstack::model::{self, LayerArchitecture, SimStack};
use simstack::network::{self, PartitionedScattering};
use simstack::optimize;
use simstack::propagation::{self, RngSeed, SimGeometry};

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn matrix_from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<ComplexMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(value_err("rows must all have the same length"));
    }
    let entries: Vec<Complex64> = rows.into_iter().flatten().collect();
    ComplexMatrix::new(r, c, entries).map_err(value_err)
}

fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect())
        .collect()
}

fn parse_architecture(name: &str) -> PyResult<LayerArchitecture> {
    name.parse().map_err(value_err)
}

/// Partitioned scattering matrix of a multiport network.
#[pyclass(name = "Network")]
#[derive(Clone)]
struct PyNetwork {
    inner: PartitionedScattering,
}

#[pymethods]
impl PyNetwork {
    /// Builds a network from its full scattering matrix and the port split.
    #[new]
    fn new(full: Vec<Vec<Complex64>>, n1: usize, n2: usize) -> PyResult<Self> {
        let full = matrix_from_rows(full)?;
        let inner = PartitionedScattering::from_full(&full, n1, n2).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Ideal through-line on n port pairs.
    #[staticmethod]
    fn through(n: usize) -> Self {
        Self {
            inner: PartitionedScattering::ideal_through(n),
        }
    }

    /// Connects this network's trailing ports to another's leading ports.
    fn cascade(&self, other: &PyNetwork) -> PyResult<Self> {
        Ok(Self {
            inner: network::cascade(&self.inner, &other.inner).map_err(value_err)?,
        })
    }

    /// Same composition, solved from the stacked wave equations.
    fn cascade_by_wave_oracle(&self, other: &PyNetwork) -> PyResult<Self> {
        Ok(Self {
            inner: network::solve_waves_oracle(&self.inner, &other.inner).map_err(value_err)?,
        })
    }

    fn full_matrix(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.inner.to_full())
    }

    fn transmission(&self) -> Vec<Vec<Complex64>> {
        matrix_to_rows(&self.inner.s21)
    }

    fn is_reciprocal(&self) -> bool {
        self.inner.is_reciprocal(None)
    }

    fn is_lossless(&self) -> bool {
        self.inner.is_lossless(None)
    }

    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1
    }

    #[getter]
    fn n2(&self) -> usize {
        self.inner.n2
    }
}

/// Transmitter and layer placement for the physical experiments.
#[pyclass(name = "Geometry")]
#[derive(Clone)]
struct PyGeometry {
    inner: SimGeometry,
}

#[pymethods]
impl PyGeometry {
    /// Standard setup: layers one wavelength apart, elements half a
    /// wavelength apart, transmitter at the origin.
    #[new]
    fn new(wavelength: f64, nx: usize, ny: usize) -> PyResult<Self> {
        Ok(Self {
            inner: SimGeometry::standard(wavelength, nx, ny).map_err(value_err)?,
        })
    }

    #[getter]
    fn elements(&self) -> usize {
        self.inner.elements()
    }

    fn layer_positions(&self, layer_index: usize) -> Vec<(f64, f64, f64)> {
        propagation::upa_positions(&self.inner, layer_index)
            .into_iter()
            .map(|p| (p[0], p[1], p[2]))
            .collect()
    }
}

/// A full layered stack between transmitter and receiver.
#[pyclass(name = "Stack")]
#[derive(Clone)]
struct PyStack {
    inner: SimStack,
}

#[pymethods]
impl PyStack {
    /// Physical stack: diffraction stages between layers, seeded Rayleigh
    /// fading to the receiver.
    #[staticmethod]
    #[pyo3(signature = (geometry, layers, seed, architecture = "dris"))]
    fn build(geometry: &PyGeometry, layers: usize, seed: u64, architecture: &str) -> PyResult<Self> {
        let arch = parse_architecture(architecture)?;
        let inner = propagation::build_stack(&geometry.inner, layers, 1, arch, RngSeed(seed))
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(Self {
            inner: SimStack::from_json(json).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn layers(&self) -> usize {
        self.inner.layer_count()
    }

    #[getter]
    fn elements(&self) -> usize {
        self.inner.elements_per_layer()
    }

    /// Channel matrix of the product-form model.
    fn simplified_channel(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(matrix_to_rows(
            &model::simplified_channel(&self.inner).map_err(value_err)?,
        ))
    }

    /// Channel matrix of the exact composed model under matched
    /// terminations.
    fn general_channel(&self) -> PyResult<Vec<Vec<Complex64>>> {
        let s = model::assemble_general(&self.inner).map_err(value_err)?;
        Ok(matrix_to_rows(
            &model::extract_channel(&s).map_err(value_err)?,
        ))
    }

    /// Scalar channel gain |h|^2 (single-antenna stacks).
    fn gain(&self) -> PyResult<f64> {
        let h = model::simplified_channel(&self.inner).map_err(value_err)?;
        model::channel_gain(&h).map_err(value_err)
    }
}

/// Outcome of the iterative diagonal-layer optimizer.
#[pyclass(name = "OptimizationResult")]
struct PyOptimizationResult {
    #[pyo3(get)]
    gains: Vec<f64>,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
}

/// Optimizes all diagonal phase-shift layers of a stack.
///
/// `init_seed = None` starts from zero phases; otherwise phases start
/// uniformly random from the given seed. Returns the optimized stack and the
/// per-sweep gain trace.
#[pyfunction]
#[pyo3(signature = (stack, max_sweeps = 200, rel_tolerance = simstack::tolerances::CONVERGENCE_REL, init_seed = None))]
fn dris_optimize(
    stack: &PyStack,
    max_sweeps: usize,
    rel_tolerance: f64,
    init_seed: Option<u64>,
) -> PyResult<(PyStack, Py<PyOptimizationResult>)> {
    let cfg = optimize::DRisOptimizerConfig {
        max_sweeps,
        rel_tolerance,
        init_policy: match init_seed {
            None => optimize::InitPolicy::ZeroPhase,
            Some(seed) => optimize::InitPolicy::UniformRandomPhase(RngSeed(seed)),
        },
        sweep_order: optimize::SweepOrder::FirstToLast,
    };
    let (optimized, trace) = optimize::dris_optimize(&stack.inner, &cfg).map_err(value_err)?;
    let result = Python::with_gil(|py| {
        Py::new(
            py,
            PyOptimizationResult {
                gains: trace.gains,
                iterations: trace.iterations_used,
                converged: trace.converged,
            },
        )
    })?;
    Ok((PyStack { inner: optimized }, result))
}

/// Closed-form optimal symmetric-unitary layer for a one-layer link.
/// Returns (transmission block, achieved gain).
#[pyfunction]
fn bdris_optimal(
    h_r: Vec<Complex64>,
    h_1: Vec<Complex64>,
) -> PyResult<(Vec<Vec<Complex64>>, f64)> {
    let layer = optimize::bdris_optimal(&h_r, &h_1).map_err(value_err)?;
    let b_h1 = layer.transmission().mul_vec(&h_1);
    let h: Complex64 = h_r.iter().zip(&b_h1).map(|(r, x)| r * x).sum();
    Ok((matrix_to_rows(layer.transmission()), h.norm_sqr()))
}

/// Loose gain bound for diagonal-layer stacks.
#[pyfunction]
fn dris_upper_bound(stack: &PyStack) -> PyResult<f64> {
    optimize::dris_upper_bound(&stack.inner).map_err(value_err)
}

/// Tunable impedance count: 3NL for `dris`, 4N-1 for `bdris-tree`.
#[pyfunction]
fn circuit_complexity(architecture: &str, n: usize, l: usize) -> PyResult<u64> {
    optimize::circuit_complexity(parse_architecture(architecture)?, n, l).map_err(value_err)
}

/// Largest singular value of a complex matrix.
#[pyfunction]
fn spectral_norm(matrix: Vec<Vec<Complex64>>) -> PyResult<f64> {
    Ok(matrix_from_rows(matrix)?.spectral_norm())
}

/// Near-field diffraction channel between two point sets.
#[pyfunction]
fn rs_channel(
    src: Vec<(f64, f64, f64)>,
    dst: Vec<(f64, f64, f64)>,
    wavelength: f64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let src: Vec<[f64; 3]> = src.into_iter().map(|(x, y, z)| [x, y, z]).collect();
    let dst: Vec<[f64; 3]> = dst.into_iter().map(|(x, y, z)| [x, y, z]).collect();
    Ok(matrix_to_rows(
        &propagation::rs_channel(&src, &dst, wavelength).map_err(value_err)?,
    ))
}

/// Seeded i.i.d. Rayleigh fading matrix.
#[pyfunction]
fn rayleigh_channel(k: usize, n: usize, seed: u64) -> Vec<Vec<Complex64>> {
    matrix_to_rows(&propagation::rayleigh_channel(k, n, RngSeed(seed)))
}

/// Runs a full experiment from a config document (same `key = value` format
/// as the CLI) and returns the CSV records.
#[pyfunction]
fn run_experiment_config(config_text: &str) -> PyResult<String> {
    let cfg = harness::ExperimentConfig::parse(config_text).map_err(value_err)?;
    cfg.validate().map_err(value_err)?;
    let records = harness::run_experiment(&cfg).map_err(value_err)?;
    Ok(harness::write_csv(&records))
}

/// Aggregates CSV records into the per-(architecture, N, L) summary table.
#[pyfunction]
fn summarize_csv(csv_text: &str) -> PyResult<String> {
    let records = harness::read_csv(csv_text).map_err(value_err)?;
    let rows = harness::summarize(&records).map_err(value_err)?;
    Ok(harness::render_summary(&rows))
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[pymodule]
fn simstack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyStack>()?;
    m.add_class::<PyOptimizationResult>()?;
    m.add_function(wrap_pyfunction!(dris_optimize, m)?)?;
    m.add_function(wrap_pyfunction!(bdris_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(dris_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(circuit_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(rs_channel, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh_channel, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_config, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_csv, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
