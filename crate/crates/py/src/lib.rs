//! Python bindings for the wave laboratory. The module exposes the domain
//! and weight types, lattice certification, the explicit stochastic solver
//! and the ensemble estimates, plus a config-driven `run` entry point that
//! mirrors the command-line tool and writes the same artifacts.
//!
//! Validation errors raise `ValueError`; numerical failures (weight
//! saturation, blow-up, a failed certification or observability check)
//! raise `RuntimeError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use carleman_wave_lab::config::{Command, ExperimentConfig};
use carleman_wave_lab::estimates::{self, EnsembleSpec};
use carleman_wave_lab::geometry::{DomainSpec, Shape};
use carleman_wave_lab::grid::UniformGrid;
use carleman_wave_lab::profile::{Profile1d, SeparableField};
use carleman_wave_lab::runner;
use carleman_wave_lab::spde::{self, CoefficientSet, NoisePath, SolutionPath};
use carleman_wave_lab::weights::{
    certify_positivity, CertificationConfig, PositivityCertificate, WeightParams,
};
use carleman_wave_lab::Error;

fn pyerr(e: Error) -> PyErr {
    match e {
        Error::Saturation { .. }
        | Error::NonFinite { .. }
        | Error::CertificationFailed { .. }
        | Error::ObservabilityViolation { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Spatial domain together with the exterior observation center x0.
#[pyclass(frozen)]
struct Domain {
    inner: DomainSpec,
}

#[pymethods]
impl Domain {
    /// Open interval (a, b); x0 must lie strictly outside its closure.
    #[staticmethod]
    fn interval(a: f64, b: f64, x0: (f64, f64)) -> PyResult<Self> {
        DomainSpec::new(Shape::Interval { a, b }, [x0.0, x0.1])
            .map(|inner| Domain { inner })
            .map_err(pyerr)
    }

    /// Open axis-aligned rectangle (a[0], b[0]) x (a[1], b[1]).
    #[staticmethod]
    fn rectangle(a: (f64, f64), b: (f64, f64), x0: (f64, f64)) -> PyResult<Self> {
        DomainSpec::new(Shape::Rectangle { a: [a.0, a.1], b: [b.0, b.1] }, [x0.0, x0.1])
            .map(|inner| Domain { inner })
            .map_err(pyerr)
    }

    /// Open disk of the given center and radius.
    #[staticmethod]
    fn disk(center: (f64, f64), radius: f64, x0: (f64, f64)) -> PyResult<Self> {
        DomainSpec::new(Shape::Disk { center: [center.0, center.1], radius }, [x0.0, x0.1])
            .map(|inner| Domain { inner })
            .map_err(pyerr)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn x0(&self) -> (f64, f64) {
        (self.inner.x0[0], self.inner.x0[1])
    }

    #[getter]
    fn measure(&self) -> f64 {
        self.inner.measure()
    }

    /// (R0, R1): the least and greatest distance from x0 to the closure.
    fn radii(&self) -> (f64, f64) {
        self.inner.radii()
    }

    /// Largest coupling c for which an admissible horizon exists.
    fn critical_coupling(&self) -> f64 {
        self.inner.critical_coupling()
    }

    /// Open horizon interval (2 R1 / k, 2 R0 / sqrt(c)) for the split
    /// k = 1 - c; raises ValueError when it is empty.
    fn admissible_time_window(&self, c: f64) -> PyResult<(f64, f64)> {
        self.inner.admissible_time_window(c).map_err(pyerr)
    }

    fn __repr__(&self) -> String {
        let (r0, r1) = self.inner.radii();
        format!(
            "Domain(dim={}, x0=({}, {}), radii=({r0}, {r1}))",
            self.inner.dim(),
            self.inner.x0[0],
            self.inner.x0[1]
        )
    }
}

/// Radial weight family ell(t, x) = |x - x0|^2 - c (t - T/2)^2 + shift and
/// the exponential theta^2 = exp(2 lambda ell) with the time bump of rate
/// beta. `lam` is the large parameter lambda.
#[pyclass(frozen)]
struct Weights {
    inner: WeightParams,
}

#[pymethods]
impl Weights {
    #[new]
    #[pyo3(signature = (lam, c, k, t_final, beta, x0, ell_shift = 0.0))]
    fn new(
        lam: f64,
        c: f64,
        k: f64,
        t_final: f64,
        beta: f64,
        x0: (f64, f64),
        ell_shift: f64,
    ) -> PyResult<Self> {
        WeightParams::new(lam, c, k, t_final, beta, [x0.0, x0.1], ell_shift)
            .map(|inner| Weights { inner })
            .map_err(pyerr)
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }

    #[getter]
    fn ell_shift(&self) -> f64 {
        self.inner.ell_shift
    }

    fn ell(&self, t: f64, x: (f64, f64)) -> f64 {
        self.inner.ell(t, [x.0, x.1])
    }

    fn ell_t(&self, t: f64) -> f64 {
        self.inner.ell_t(t)
    }

    fn grad_ell(&self, x: (f64, f64)) -> (f64, f64) {
        let g = self.inner.grad_ell([x.0, x.1]);
        (g[0], g[1])
    }

    /// log of theta^2; always finite, unlike theta^2 itself.
    fn theta_sq_log(&self, t: f64, x: (f64, f64)) -> f64 {
        self.inner.theta_sq_log(t, [x.0, x.1])
    }

    /// theta^2 = exp(2 lambda ell); raises RuntimeError on overflow.
    fn theta_sq(&self, t: f64, x: (f64, f64)) -> PyResult<f64> {
        self.inner.theta_sq(t, [x.0, x.1]).map_err(pyerr)
    }

    /// Order-lambda drift coefficient A(t, x).
    fn big_a(&self, t: f64, x: (f64, f64)) -> f64 {
        self.inner.big_a(t, [x.0, x.1])
    }

    /// (leading, remainder) split of the zero-order coefficient B; the
    /// remainder is the exact value minus the lambda^3 leading term.
    fn big_b(&self, t: f64, x: (f64, f64), dim: usize) -> (f64, f64) {
        self.inner.big_b(t, [x.0, x.1], dim)
    }

    /// Interior lower-bound constant psi = 2 - c (4 + dim).
    fn psi(&self, dim: usize) -> f64 {
        self.inner.psi(dim)
    }

    /// Time bump exp(-beta s (T - s)) scaled to 1 at the midpoint.
    fn bump(&self, t: f64) -> f64 {
        self.inner.bump(t)
    }

    fn __repr__(&self) -> String {
        format!(
            "Weights(lam={}, c={}, k={}, t_final={}, beta={})",
            self.inner.lambda, self.inner.c, self.inner.k, self.inner.t_final, self.inner.beta
        )
    }
}

/// Proof object from a successful lattice scan: the certifying ladder pair
/// (lambda0, beta0), the three lattice minima and the estimate constant c0.
#[pyclass(frozen)]
struct Certificate {
    inner: PositivityCertificate,
}

#[pymethods]
impl Certificate {
    #[getter]
    fn r0(&self) -> f64 {
        self.inner.r0
    }

    #[getter]
    fn r1(&self) -> f64 {
        self.inner.r1
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0
    }

    #[getter]
    fn beta0(&self) -> f64 {
        self.inner.beta0
    }

    #[getter]
    fn min_f1(&self) -> f64 {
        self.inner.min_f1
    }

    #[getter]
    fn min_f2(&self) -> f64 {
        self.inner.min_f2
    }

    #[getter]
    fn min_g(&self) -> f64 {
        self.inner.min_g
    }

    #[getter]
    fn delta0(&self) -> f64 {
        self.inner.delta0
    }

    #[getter]
    fn c0(&self) -> f64 {
        self.inner.c0
    }

    #[getter]
    fn lattice(&self) -> (usize, usize) {
        self.inner.lattice
    }

    /// Re-scan on a lattice refined by the given factor; returns the three
    /// refined minima or raises RuntimeError if positivity breaks.
    fn verify_at_scale(&self, scale: usize) -> PyResult<(f64, f64, f64)> {
        self.inner.verify_at_scale(scale).map_err(pyerr)
    }

    /// Weight parameters at the certified (lambda0, beta0) pair, centered
    /// on the given x0.
    fn weights(&self, x0: (f64, f64)) -> Weights {
        Weights { inner: self.inner.params([x0.0, x0.1]) }
    }

    fn __repr__(&self) -> String {
        format!(
            "Certificate(lambda0={}, beta0={}, c0={})",
            self.inner.lambda0, self.inner.beta0, self.inner.c0
        )
    }
}

/// Certify weight positivity on the annulus R0 <= |x - x0| <= R1 by a
/// lattice scan over the ladder of (lambda, beta) candidates.
#[pyfunction]
#[pyo3(signature = (r0, r1, dim, c, k, t_final, lattice = (200, 200)))]
fn certify(
    r0: f64,
    r1: f64,
    dim: usize,
    c: f64,
    k: f64,
    t_final: f64,
    lattice: (usize, usize),
) -> PyResult<Certificate> {
    let mut cfg = CertificationConfig::new(r0, r1, dim, c, k, t_final);
    cfg.lattice = lattice;
    certify_positivity(&cfg).map(|inner| Certificate { inner }).map_err(pyerr)
}

/// Uniform Dirichlet grid over a domain; nodes on the boundary hold the
/// value zero throughout.
#[pyclass(frozen)]
struct Grid {
    inner: UniformGrid,
}

#[pymethods]
impl Grid {
    /// `cells` counts per axis; pass `cells_y` for an anisotropic
    /// rectangle grid.
    #[new]
    #[pyo3(signature = (domain, cells, cells_y = None))]
    fn new(domain: &Domain, cells: usize, cells_y: Option<usize>) -> PyResult<Self> {
        let g = match cells_y {
            Some(ny) => UniformGrid::with_cells(&domain.inner, cells, ny),
            None => UniformGrid::new(&domain.inner, cells),
        };
        g.map(|inner| Grid { inner }).map_err(pyerr)
    }

    #[getter]
    fn dims(&self) -> usize {
        self.inner.dims()
    }

    #[getter]
    fn cells(&self) -> (usize, usize) {
        let c = self.inner.cells();
        (c[0], c[1])
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn h_min(&self) -> f64 {
        self.inner.h_min()
    }

    /// Largest stable explicit time step for this grid.
    #[getter]
    fn cfl_limit(&self) -> f64 {
        spde::cfl_limit(&self.inner)
    }

    fn node(&self, idx: usize) -> PyResult<(f64, f64)> {
        if idx >= self.inner.num_nodes() {
            return Err(PyValueError::new_err(format!(
                "node index {idx} out of range for {} nodes",
                self.inner.num_nodes()
            )));
        }
        let p = self.inner.node(idx);
        Ok((p[0], p[1]))
    }

    /// All node coordinates in index order.
    fn nodes(&self) -> Vec<(f64, f64)> {
        (0..self.inner.num_nodes())
            .map(|i| {
                let p = self.inner.node(i);
                (p[0], p[1])
            })
            .collect()
    }

    fn is_boundary(&self, idx: usize) -> bool {
        self.inner.is_boundary(idx)
    }

    /// Trapezoidal integral of a nodal field over the domain.
    fn integrate(&self, field: Vec<f64>) -> PyResult<f64> {
        if field.len() != self.inner.num_nodes() {
            return Err(PyValueError::new_err(format!(
                "field has {} values, grid has {} nodes",
                field.len(),
                self.inner.num_nodes()
            )));
        }
        Ok(self.inner.integrate(&field))
    }

    fn __repr__(&self) -> String {
        let c = self.inner.cells();
        format!("Grid(dims={}, cells=({}, {}))", self.inner.dims(), c[0], c[1])
    }
}

/// First-order coefficients, sources and the noise pair of the equation.
/// Starts from the zero set; every unset term stays switched off.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Coefficients {
    inner: CoefficientSet,
}

#[pymethods]
impl Coefficients {
    #[new]
    fn new() -> Self {
        Coefficients { inner: CoefficientSet::zero() }
    }

    /// Set one term to a space-time constant. Names: a1 (velocity), a2x
    /// and a2y (gradient), a3 (zero order), a4 (noise gain), f and g
    /// (deterministic sources of the drift and the noise).
    fn set_constant(&mut self, name: &str, value: f64) -> PyResult<()> {
        let field = SeparableField {
            time: Profile1d::Constant { value },
            fx: Profile1d::one(),
            fy: Profile1d::one(),
        };
        match name {
            "a1" => self.inner.a1 = field,
            "a2x" => self.inner.a2[0] = field,
            "a2y" => self.inner.a2[1] = field,
            "a3" => self.inner.a3 = field,
            "a4" => self.inner.a4 = field,
            "f" => self.inner.f = field,
            "g" => self.inner.g = field,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown coefficient {other:?}; expected one of a1, a2x, a2y, a3, a4, f, g"
                )))
            }
        }
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!("Coefficients({:?})", self.inner)
    }
}

/// One trajectory of the explicit scheme: states at every step plus the
/// realized Brownian increments.
#[pyclass(frozen)]
struct Solution {
    inner: SolutionPath,
}

#[pymethods]
impl Solution {
    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    fn time(&self, n: usize) -> PyResult<f64> {
        self.check_step(n)?;
        Ok(self.inner.time(n))
    }

    /// Nodal displacement at step n.
    fn state(&self, n: usize) -> PyResult<Vec<f64>> {
        self.check_step(n)?;
        Ok(self.inner.state(n).to_vec())
    }

    /// Centered-difference velocity at step n.
    fn velocity(&self, n: usize) -> PyResult<Vec<f64>> {
        self.check_step(n)?;
        Ok(self.inner.velocity(n))
    }

    /// Discrete energy (kinetic plus gradient) at step n.
    fn energy(&self, n: usize) -> PyResult<f64> {
        self.check_step(n)?;
        Ok(self.inner.energy(n))
    }

    /// Squared graded norm |(y, y_t)|^2 at step n.
    fn norm_sq(&self, n: usize) -> PyResult<f64> {
        self.check_step(n)?;
        Ok(self.inner.norm_sq(n))
    }

    /// Realized Brownian increments; empty for noise-free runs.
    fn increments(&self) -> Vec<f64> {
        self.inner.increments.clone()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

impl Solution {
    fn check_step(&self, n: usize) -> PyResult<()> {
        if n > self.inner.n_steps() {
            return Err(PyValueError::new_err(format!(
                "step {n} out of range for {} steps",
                self.inner.n_steps()
            )));
        }
        Ok(())
    }
}

/// Run the explicit scheme once. `seed` switches the Brownian forcing on;
/// without it the noise-free wave is propagated. `dt` defaults to the
/// stability limit of the grid.
#[pyfunction]
#[pyo3(signature = (grid, y0, v0, t_final, dt = None, coeffs = None, seed = None, path = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    grid: &Grid,
    y0: Vec<f64>,
    v0: Vec<f64>,
    t_final: f64,
    dt: Option<f64>,
    coeffs: Option<&Coefficients>,
    seed: Option<u64>,
    path: u64,
) -> PyResult<Solution> {
    let zero = CoefficientSet::zero();
    let cs = coeffs.map_or(&zero, |c| &c.inner);
    let dt = dt.unwrap_or_else(|| spde::cfl_limit(&grid.inner));
    let noise = seed.map(|s| NoisePath { seed: s, path });
    spde::simulate(&grid.inner, cs, &y0, &v0, t_final, dt, noise)
        .map(|inner| Solution { inner })
        .map_err(pyerr)
}

fn ensemble(
    grid: &Grid,
    y0: Vec<f64>,
    v0: Vec<f64>,
    t_final: f64,
    dt: Option<f64>,
    num_paths: usize,
    seed: u64,
) -> EnsembleSpec {
    EnsembleSpec {
        y0,
        v0,
        t_final,
        dt: dt.unwrap_or_else(|| spde::cfl_limit(&grid.inner)),
        num_paths,
        seed,
    }
}

/// Smallest lambda the absorption argument needs for the given
/// coefficients, from their sup and space norms over the horizon.
#[pyfunction]
#[pyo3(signature = (grid, coeffs, t_final, c = 1.0))]
fn lambda_star(grid: &Grid, coeffs: &Coefficients, t_final: f64, c: f64) -> f64 {
    let norms = spde::coefficient_norms(&coeffs.inner, &grid.inner, t_final, 256);
    estimates::lambda_star(&norms, c)
}

/// Evaluate both sides of the weighted energy estimate on a fresh
/// ensemble. The horizon is taken from the weights; the certificate must
/// cover them. Returns a dict of the report rows with the pre-absorption
/// chain nested under "chain".
#[pyfunction]
#[pyo3(signature = (grid, weights, certificate, y0, v0, num_paths, seed, dt = None, coeffs = None))]
#[allow(clippy::too_many_arguments)]
fn carleman_budget<'py>(
    py: Python<'py>,
    grid: &Grid,
    weights: &Weights,
    certificate: &Certificate,
    y0: Vec<f64>,
    v0: Vec<f64>,
    num_paths: usize,
    seed: u64,
    dt: Option<f64>,
    coeffs: Option<&Coefficients>,
) -> PyResult<Bound<'py, PyDict>> {
    let ens = ensemble(grid, y0, v0, weights.inner.t_final, dt, num_paths, seed);
    let cs = coeffs.map_or_else(CoefficientSet::zero, |c| c.inner.clone());
    let r = estimates::carleman_budget(&ens, &grid.inner, &weights.inner, &certificate.inner, &cs)
        .map_err(pyerr)?;
    let chain = PyDict::new(py);
    chain.set_item("interior_positive", r.chain.interior_positive)?;
    chain.set_item("multiplier_square", r.chain.multiplier_square)?;
    chain.set_item("pairing", r.chain.pairing)?;
    chain.set_item("ito", r.chain.ito)?;
    chain.set_item("boundary_flux", r.chain.boundary_flux)?;
    chain.set_item("se_multiplier_square", r.chain.se_multiplier_square)?;
    chain.set_item("se_pairing", r.chain.se_pairing)?;
    chain.set_item("se_ito", r.chain.se_ito)?;
    chain.set_item("se_boundary_flux", r.chain.se_boundary_flux)?;
    let d = PyDict::new(py);
    d.set_item("lambda", r.lambda)?;
    d.set_item("num_paths", r.num_paths)?;
    d.set_item("lhs", r.lhs)?;
    d.set_item("lhs_velocity", r.lhs_velocity)?;
    d.set_item("lhs_gradient", r.lhs_gradient)?;
    d.set_item("lhs_zero_order", r.lhs_zero_order)?;
    d.set_item("rhs_boundary", r.rhs_boundary)?;
    d.set_item("rhs_boundary_full", r.rhs_boundary_full)?;
    d.set_item("rhs_source", r.rhs_source)?;
    d.set_item("empirical_c", r.empirical_c)?;
    d.set_item("se_lhs", r.se_lhs)?;
    d.set_item("se_boundary", r.se_boundary)?;
    d.set_item("chain", chain)?;
    Ok(d)
}

/// Terminal graded norm against the observed boundary trace and the
/// sources. The horizon must exceed twice the largest node distance from
/// x0. Returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (grid, x0, y0, v0, t_final, num_paths, seed, dt = None, coeffs = None))]
#[allow(clippy::too_many_arguments)]
fn observability_ratio<'py>(
    py: Python<'py>,
    grid: &Grid,
    x0: (f64, f64),
    y0: Vec<f64>,
    v0: Vec<f64>,
    t_final: f64,
    num_paths: usize,
    seed: u64,
    dt: Option<f64>,
    coeffs: Option<&Coefficients>,
) -> PyResult<Bound<'py, PyDict>> {
    let ens = ensemble(grid, y0, v0, t_final, dt, num_paths, seed);
    let cs = coeffs.map_or_else(CoefficientSet::zero, |c| c.inner.clone());
    let r = estimates::observability_ratio(&ens, &grid.inner, [x0.0, x0.1], &cs).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("terminal_norm", r.terminal_norm)?;
    d.set_item("trace_term", r.trace_term)?;
    d.set_item("f_term", r.f_term)?;
    d.set_item("g_term", r.g_term)?;
    d.set_item("coefficient_norm_exponent", r.coefficient_norm_exponent)?;
    d.set_item("empirical_ratio", r.empirical_ratio)?;
    d.set_item("num_paths", r.num_paths)?;
    d.set_item("se_terminal_sq", r.se_terminal_sq)?;
    d.set_item("se_trace_sq", r.se_trace_sq)?;
    Ok(d)
}

/// Full-boundary trace norm of an ensemble against the shape of its
/// a-priori bound with all constants set to one. Returns a dict.
#[pyfunction]
#[pyo3(signature = (grid, y0, v0, t_final, num_paths, seed, dt = None, coeffs = None))]
#[allow(clippy::too_many_arguments)]
fn hidden_regularity<'py>(
    py: Python<'py>,
    grid: &Grid,
    y0: Vec<f64>,
    v0: Vec<f64>,
    t_final: f64,
    num_paths: usize,
    seed: u64,
    dt: Option<f64>,
    coeffs: Option<&Coefficients>,
) -> PyResult<Bound<'py, PyDict>> {
    let ens = ensemble(grid, y0, v0, t_final, dt, num_paths, seed);
    let cs = coeffs.map_or_else(CoefficientSet::zero, |c| c.inner.clone());
    let r = estimates::hidden_regularity_check(&ens, &grid.inner, &cs).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("trace_norm", r.trace_norm)?;
    d.set_item("rhs_bound_shape", r.rhs_bound_shape)?;
    d.set_item("data_norm", r.data_norm)?;
    d.set_item("f_norm", r.f_norm)?;
    d.set_item("g_norm", r.g_norm)?;
    d.set_item("coefficient_norm_exponent", r.coefficient_norm_exponent)?;
    Ok(d)
}

/// Run one laboratory command from a TOML config string, writing the same
/// artifacts as the command-line tool. `out` and `seed` override the
/// config. Returns {"out_dir", "passed", "headline", "metric"}.
#[pyfunction]
#[pyo3(signature = (command, config_toml, out = None, seed = None))]
fn run<'py>(
    py: Python<'py>,
    command: &str,
    config_toml: &str,
    out: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cmd: Command = command.parse().map_err(pyerr)?;
    let mut cfg = ExperimentConfig::from_toml_str(config_toml).map_err(pyerr)?;
    cfg.apply_overrides(seed, out);
    let art = runner::run(&cfg, cmd).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("out_dir", art.out_dir.to_string_lossy().into_owned())?;
    d.set_item("passed", art.passed)?;
    d.set_item("headline", art.headline)?;
    d.set_item("metric", art.metric)?;
    Ok(d)
}

#[pymodule]
fn carleman_wave_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Domain>()?;
    m.add_class::<Weights>()?;
    m.add_class::<Certificate>()?;
    m.add_class::<Grid>()?;
    m.add_class::<Coefficients>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(carleman_budget, m)?)?;
    m.add_function(wrap_pyfunction!(observability_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(hidden_regularity, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
