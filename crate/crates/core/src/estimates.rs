//! Monte Carlo evaluation of the integrated weighted energy estimate, the
//! terminal observability ratio, and the boundary trace bound.
//!
//! Each estimator simulates its ensemble path by path, reduces the
//! space-time integrals immediately and drops the trajectory, so memory
//! stays proportional to a single path regardless of the path count. All
//! singular weight factors are assembled in log space before a single
//! exponential, with the shared saturation cap enforced up front.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::{BoundaryGridNode, UniformGrid};
use crate::numerics::{mean_and_se, pairwise_sum};
use crate::profile::{Profile1d, SeparableField};
use crate::spde::{self, CoefficientNorms, CoefficientSet, NoisePath, SolutionPath};
use crate::weights::{PositivityCertificate, WeightParams, EXPONENT_CAP};

/// Ensemble recipe: shared deterministic initial data, horizon and step
/// request, plus the seeded Brownian path count. `num_paths = 0` runs the
/// noise-free scheme once, which serves as the deterministic baseline.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub y0: Vec<f64>,
    pub v0: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub num_paths: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    fn runs(&self) -> usize {
        self.num_paths.max(1)
    }

    fn noise(&self, path: usize) -> Option<NoisePath> {
        if self.num_paths == 0 {
            None
        } else {
            Some(NoisePath { seed: self.seed, path: path as u64 })
        }
    }
}

/// Pre-absorption budget of the integrated inequality: the two positive
/// left-side rows and the three realized right-side rows, each an ensemble
/// mean with its standard error. The chain direction is
/// `interior_positive + multiplier_square <= pairing - ito + boundary_flux`
/// up to discretization and Monte Carlo error.
#[derive(Debug, Clone, Serialize)]
pub struct ChainBudget {
    /// c0 lambda E int Theta theta^2 (y_t^2 + |grad y|^2 + lambda^2 y^2).
    pub interior_positive: f64,
    /// E int Theta theta^2 m^2 for the multiplier m.
    pub multiplier_square: f64,
    /// E int Theta theta^2 m (dy_t - lap y dt), left-point in time.
    pub pairing: f64,
    /// E int Theta theta^2 ell_t (realized noise increment)^2.
    pub ito: f64,
    /// 2 lambda E int over the boundary of Theta theta^2 (x - x0).nu
    /// |d_nu y|^2; signed, so unobserved faces may subtract.
    pub boundary_flux: f64,
    pub se_multiplier_square: f64,
    pub se_pairing: f64,
    pub se_ito: f64,
    pub se_boundary_flux: f64,
}

/// Two-sided budget of the weighted energy estimate on one ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct CarlemanReport {
    pub lambda: f64,
    /// Paths actually run (1 for the deterministic baseline).
    pub num_paths: usize,
    /// lambda E int Theta theta^2 (y_t^2 + |grad y|^2 + lambda^2 y^2).
    pub lhs: f64,
    pub lhs_velocity: f64,
    pub lhs_gradient: f64,
    /// lambda^3-weighted zero-order part of the left side.
    pub lhs_zero_order: f64,
    /// lambda E int of Theta theta^2 |d_nu y|^2 over the observed part.
    pub rhs_boundary: f64,
    /// Same integral over the whole boundary; never below `rhs_boundary`.
    pub rhs_boundary_full: f64,
    /// E int Theta theta^2 (f^2 + lambda g^2); sources are deterministic.
    pub rhs_source: f64,
    /// lhs / (rhs_boundary + rhs_source); 0 when both sides vanish.
    pub empirical_c: f64,
    pub se_lhs: f64,
    pub se_boundary: f64,
    pub chain: ChainBudget,
}

/// Terminal-state observability budget.
#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityReport {
    /// RMS over paths of the discrete graded norm |(y(T), y_t(T))|.
    pub terminal_norm: f64,
    /// RMS boundary trace over the observed part, unweighted in time.
    pub trace_term: f64,
    pub f_term: f64,
    pub g_term: f64,
    /// Sum of squared coefficient norms; the growth exponent with unit
    /// constant.
    pub coefficient_norm_exponent: f64,
    /// terminal_norm / (trace_term + f_term + g_term); 0 when 0 / 0.
    pub empirical_ratio: f64,
    pub num_paths: usize,
    pub se_terminal_sq: f64,
    pub se_trace_sq: f64,
}

/// Full-boundary trace norm against the shape of its a-priori bound.
#[derive(Debug, Clone, Serialize)]
pub struct HiddenRegularityReport {
    /// RMS of the full-boundary trace over the ensemble.
    pub trace_norm: f64,
    /// (data_norm + f_norm + g_norm) exp(coefficient_norm_exponent); the
    /// bound with every constant set to one, shape only.
    pub rhs_bound_shape: f64,
    pub data_norm: f64,
    pub f_norm: f64,
    pub g_norm: f64,
    pub coefficient_norm_exponent: f64,
}

/// Sum of the squared coefficient norms: the (a1, a4) pair contributes both
/// squared sups, a2 its squared sup, a3 its dimension-indexed space norm.
pub fn coefficient_exponent(norms: &CoefficientNorms) -> f64 {
    norms.a1_sup * norms.a1_sup
        + norms.a4_sup * norms.a4_sup
        + norms.a2_sup * norms.a2_sup
        + norms.a3_ln * norms.a3_ln
}

/// Parameter-size rule for the weight scale: C_user (1 + sum of squared
/// coefficient norms). Used as the default lambda for budget runs.
pub fn lambda_star(norms: &CoefficientNorms, c_user: f64) -> f64 {
    debug_assert!(c_user > 0.0);
    c_user * (1.0 + coefficient_exponent(norms))
}

/// Time samples used when reducing coefficient fields to norms.
const NORM_TIME_SAMPLES: usize = 256;

// ---- shared assembly pieces ----

/// Singular weight exp(log Theta + 2 ell) tabulated over the full
/// space-time lattice, plus the weight derivatives the multiplier needs.
struct WeightTables {
    n_steps: usize,
    dt: f64,
    nn: usize,
    /// Row-major (time node, grid node).
    w_node: Vec<f64>,
    /// Same factor at x-edge midpoints, in gradient-loop order.
    w_ex: Vec<f64>,
    /// y-edge midpoints; empty in one dimension.
    w_ey: Vec<f64>,
    ell_t: Vec<f64>,
    grad_ell: Vec<Point>,
    psi: f64,
}

fn weight_at(w: &WeightParams, blog: f64, t: f64, x: Point) -> Result<f64> {
    let e = blog + w.theta_sq_log(t, x);
    if e > EXPONENT_CAP {
        return Err(Error::Saturation { exponent: e, cap: EXPONENT_CAP, t, lambda: w.lambda });
    }
    Ok(e.exp())
}

fn weight_tables(grid: &UniformGrid, w: &WeightParams, t_final: f64, dt_request: f64) -> Result<WeightTables> {
    let (n_steps, dt) = spde::resolve_steps(t_final, dt_request)?;
    let nn = grid.num_nodes();
    let [nx, ny] = grid.cells();
    let wrow = nx + 1;
    let mut ex_pts = Vec::new();
    let mut ey_pts = Vec::new();
    if grid.dims() == 1 {
        for i in 0..nx {
            let a = grid.node(i);
            ex_pts.push([a[0] + 0.5 * grid.hx(), a[1]]);
        }
    } else {
        for j in 0..=ny {
            for i in 0..nx {
                let a = grid.node(j * wrow + i);
                ex_pts.push([a[0] + 0.5 * grid.hx(), a[1]]);
            }
        }
        for j in 0..ny {
            for i in 0..=nx {
                let a = grid.node(j * wrow + i);
                ey_pts.push([a[0], a[1] + 0.5 * grid.hy()]);
            }
        }
    }
    let mut w_node = Vec::with_capacity((n_steps + 1) * nn);
    let mut w_ex = Vec::with_capacity((n_steps + 1) * ex_pts.len());
    let mut w_ey = Vec::with_capacity((n_steps + 1) * ey_pts.len());
    for n in 0..=n_steps {
        let t = n as f64 * dt;
        let blog = w.bump_log(t);
        for idx in 0..nn {
            w_node.push(weight_at(w, blog, t, grid.node(idx))?);
        }
        for &x in &ex_pts {
            w_ex.push(weight_at(w, blog, t, x)?);
        }
        for &x in &ey_pts {
            w_ey.push(weight_at(w, blog, t, x)?);
        }
    }
    let ell_t = (0..=n_steps).map(|n| w.ell_t(n as f64 * dt)).collect();
    let grad_ell = (0..nn).map(|idx| w.grad_ell(grid.node(idx))).collect();
    Ok(WeightTables { n_steps, dt, nn, w_node, w_ex, w_ey, ell_t, grad_ell, psi: w.psi(grid.dims()) })
}

/// The certificate must cover these weight parameters: matching shape
/// constants, lambda at or above the certified threshold, and every grid
/// node inside the certified radial shell.
fn check_certificate(grid: &UniformGrid, w: &WeightParams, cert: &PositivityCertificate) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    if !close(w.c, cert.c) || !close(w.k, cert.k) || !close(w.beta, cert.beta0) || !close(w.t_final, cert.t_final) {
        return Err(Error::MissingCertificate(format!(
            "weight shape (c, k, beta, T) = ({}, {}, {}, {}) differs from the certified ({}, {}, {}, {})",
            w.c, w.k, w.beta, w.t_final, cert.c, cert.k, cert.beta0, cert.t_final
        )));
    }
    if w.lambda < cert.lambda0 * (1.0 - 1e-12) {
        return Err(Error::MissingCertificate(format!(
            "lambda = {} is below the certified threshold {}",
            w.lambda, cert.lambda0
        )));
    }
    for idx in 0..grid.num_nodes() {
        let rho = w.rho(grid.node(idx));
        if rho < cert.r0 - 1e-9 || rho > cert.r1 + 1e-9 {
            return Err(Error::MissingCertificate(format!(
                "grid node at radius {rho:.6} falls outside the certified shell [{}, {}]",
                cert.r0, cert.r1
            )));
        }
    }
    Ok(())
}

/// Strictly positive outward component of x - x0 marks the observed part.
fn observation_mask(bnodes: &[BoundaryGridNode], x0: Point) -> Vec<bool> {
    bnodes
        .iter()
        .map(|b| (b.x[0] - x0[0]) * b.nu[0] + (b.x[1] - x0[1]) * b.nu[1] > 0.0)
        .collect()
}

/// Discrete |(y, v)|^2 in the graded norm: nodal trapezoid for v^2 plus
/// edge-midpoint squared differences for the gradient, transverse endpoint
/// rows halved. Matches the scheme's energy up to the factor 2.
fn graded_norm_sq(grid: &UniformGrid, y: &[f64], v: &[f64]) -> f64 {
    let mut terms: Vec<f64> = (0..y.len()).map(|i| grid.quad_weight(i) * v[i] * v[i]).collect();
    let [nx, ny] = grid.cells();
    let wrow = nx + 1;
    if grid.dims() == 1 {
        for i in 0..nx {
            let d = (y[i + 1] - y[i]) / grid.hx();
            terms.push(grid.hx() * d * d);
        }
    } else {
        for j in 0..=ny {
            let tj = if j == 0 || j == ny { 0.5 } else { 1.0 };
            for i in 0..nx {
                let idx = j * wrow + i;
                let d = (y[idx + 1] - y[idx]) / grid.hx();
                terms.push(tj * grid.hx() * grid.hy() * d * d);
            }
        }
        for j in 0..ny {
            for i in 0..=nx {
                let ti = if i == 0 || i == nx { 0.5 } else { 1.0 };
                let idx = j * wrow + i;
                let d = (y[idx + wrow] - y[idx]) / grid.hy();
                terms.push(ti * grid.hx() * grid.hy() * d * d);
            }
        }
    }
    pairwise_sum(&terms)
}

fn space_profile(field: &SeparableField, grid: &UniformGrid) -> Vec<f64> {
    grid.sample(|x| field.fx.eval(x[0]).v * field.fy.eval(x[1]).v)
}

fn column_stats(xs: &[f64]) -> (f64, f64) {
    if xs.len() < 2 {
        (xs[0], 0.0)
    } else {
        mean_and_se(xs)
    }
}

/// Ratio with the zero-data convention: 0 / 0 is 0, while a positive left
/// side over a vanished right side is reported as a violation.
fn guarded_ratio(lhs: f64, rhs: f64) -> Result<f64> {
    if rhs > 0.0 {
        Ok(lhs / rhs)
    } else if lhs == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::ObservabilityViolation { lhs })
    }
}

/// Unweighted squared L^2(Q) norm of a separable source.
fn source_norm_sq(field: &SeparableField, grid: &UniformGrid, n_steps: usize, dt: f64) -> f64 {
    let sp = space_profile(field, grid);
    let mut total = 0.0;
    for n in 0..=n_steps {
        let tw = if n == 0 || n == n_steps { 0.5 * dt } else { dt };
        let tf = field.time.eval(n as f64 * dt).v;
        let mut r = 0.0;
        for (idx, s) in sp.iter().enumerate() {
            let v = tf * s;
            r += grid.quad_weight(idx) * v * v;
        }
        total += tw * r;
    }
    total
}

// ---- the weighted energy budget ----

struct PathSamples {
    lhs_vt: f64,
    lhs_grad: f64,
    lhs_ysq: f64,
    bnd_masked: f64,
    bnd_full: f64,
    flux: f64,
    msq: f64,
    pairing: f64,
    ito: f64,
}

struct BudgetContext<'a> {
    grid: &'a UniformGrid,
    lambda: f64,
    x0: Point,
    tabs: &'a WeightTables,
    interior: &'a [usize],
    bnodes: &'a [BoundaryGridNode],
    mask: &'a [bool],
    a4_space: &'a [f64],
    g_space: &'a [f64],
    a4_time: &'a Profile1d,
    g_time: &'a Profile1d,
}

fn path_samples(cx: &BudgetContext, path: &SolutionPath) -> PathSamples {
    let g = cx.grid;
    let nn = cx.tabs.nn;
    let dt = cx.tabs.dt;
    let n_steps = cx.tabs.n_steps;
    debug_assert_eq!(n_steps, path.n_steps());
    let psi = cx.tabs.psi;
    let [nx, ny] = g.cells();
    let wrow = nx + 1;

    let mut vt_sq = 0.0;
    let mut grad_sq = 0.0;
    let mut y_sq = 0.0;
    let mut msq = 0.0;
    let mut bnd_masked = 0.0;
    let mut bnd_full = 0.0;
    let mut flux = 0.0;
    let mut pairing = 0.0;
    let mut ito = 0.0;

    for n in 0..=n_steps {
        let tw = if n == 0 || n == n_steps { 0.5 * dt } else { dt };
        let y = path.state(n);
        let row = &cx.tabs.w_node[n * nn..(n + 1) * nn];
        let v = path.velocity(n);
        let lt = cx.tabs.ell_t[n];

        let mut r_vt = 0.0;
        let mut r_y = 0.0;
        for idx in 0..nn {
            let q = g.quad_weight(idx) * row[idx];
            r_vt += q * v[idx] * v[idx];
            r_y += q * y[idx] * y[idx];
        }

        let mut r_gr = 0.0;
        if g.dims() == 1 {
            let re = &cx.tabs.w_ex[n * nx..(n + 1) * nx];
            for i in 0..nx {
                let d = (y[i + 1] - y[i]) / g.hx();
                r_gr += g.hx() * re[i] * d * d;
            }
        } else {
            let ex_count = nx * (ny + 1);
            let re = &cx.tabs.w_ex[n * ex_count..(n + 1) * ex_count];
            let mut e = 0;
            for j in 0..=ny {
                let tj = if j == 0 || j == ny { 0.5 } else { 1.0 };
                for i in 0..nx {
                    let idx = j * wrow + i;
                    let d = (y[idx + 1] - y[idx]) / g.hx();
                    r_gr += tj * g.hx() * g.hy() * re[e] * d * d;
                    e += 1;
                }
            }
            let ey_count = (nx + 1) * ny;
            let rey = &cx.tabs.w_ey[n * ey_count..(n + 1) * ey_count];
            e = 0;
            for j in 0..ny {
                for i in 0..=nx {
                    let ti = if i == 0 || i == nx { 0.5 } else { 1.0 };
                    let idx = j * wrow + i;
                    let d = (y[idx + wrow] - y[idx]) / g.hy();
                    r_gr += ti * g.hx() * g.hy() * rey[e] * d * d;
                    e += 1;
                }
            }
        }

        // Multiplier square: centered gradients inside, normal derivative
        // on the boundary where the tangential part vanishes.
        let mut r_m = 0.0;
        for &idx in cx.interior {
            let gr = g.gradient(y, idx);
            let gl = cx.tabs.grad_ell[idx];
            let vt = v[idx] + lt * y[idx];
            let vx0 = gr[0] + gl[0] * y[idx];
            let vx1 = gr[1] + gl[1] * y[idx];
            let m = -2.0 * lt * vt + 2.0 * (gl[0] * vx0 + gl[1] * vx1) + psi * y[idx];
            r_m += g.quad_weight(idx) * row[idx] * m * m;
        }

        let mut r_bm = 0.0;
        let mut r_bf = 0.0;
        let mut r_fx = 0.0;
        for (b, node) in cx.bnodes.iter().enumerate() {
            let tr = g.normal_derivative(y, node);
            let gl = cx.tabs.grad_ell[node.idx];
            let m = 2.0 * (gl[0] * node.nu[0] + gl[1] * node.nu[1]) * tr;
            r_m += g.quad_weight(node.idx) * row[node.idx] * m * m;
            let sgn = (node.x[0] - cx.x0[0]) * node.nu[0] + (node.x[1] - cx.x0[1]) * node.nu[1];
            let wtr = node.weight * row[node.idx] * tr * tr;
            r_bf += wtr;
            if cx.mask[b] {
                r_bm += wtr;
            }
            r_fx += wtr * sgn;
        }

        vt_sq += tw * r_vt;
        y_sq += tw * r_y;
        grad_sq += tw * r_gr;
        msq += tw * r_m;
        bnd_masked += tw * r_bm;
        bnd_full += tw * r_bf;
        flux += tw * r_fx;

        // Left-point stochastic rows over the step starting at t_n. The
        // adapted velocity is the staggered one, known before the step's
        // increment; the realized d y_t recovers exactly from the states.
        if n < n_steps {
            let t = n as f64 * dt;
            let dw = if path.increments.is_empty() { 0.0 } else { path.increments[n] };
            let a4f = cx.a4_time.eval(t).v;
            let gf = cx.g_time.eval(t).v;
            let y_next = path.state(n + 1);
            let y_prev = if n > 0 { Some(path.state(n - 1)) } else { None };
            let mut r_pair = 0.0;
            let mut r_ito = 0.0;
            for &idx in cx.interior {
                let z_cur = match y_prev {
                    Some(yp) => (y[idx] - yp[idx]) / dt,
                    None => path.z0[idx],
                };
                let dz = (y_next[idx] - y[idx]) / dt - z_cur;
                let val = dz - dt * g.laplacian(y, idx);
                let gr = g.gradient(y, idx);
                let gl = cx.tabs.grad_ell[idx];
                let vt_a = z_cur + lt * y[idx];
                let vx0 = gr[0] + gl[0] * y[idx];
                let vx1 = gr[1] + gl[1] * y[idx];
                let m = -2.0 * lt * vt_a + 2.0 * (gl[0] * vx0 + gl[1] * vx1) + psi * y[idx];
                let q = g.quad_weight(idx) * row[idx];
                r_pair += q * m * val;
                let di = (a4f * cx.a4_space[idx] * y[idx] + gf * cx.g_space[idx]) * dw;
                r_ito += q * lt * di * di;
            }
            pairing += r_pair;
            ito += r_ito;
        }
    }

    let lam = cx.lambda;
    PathSamples {
        lhs_vt: lam * vt_sq,
        lhs_grad: lam * grad_sq,
        lhs_ysq: lam * lam * lam * y_sq,
        bnd_masked: lam * bnd_masked,
        bnd_full: lam * bnd_full,
        flux: 2.0 * lam * flux,
        msq,
        pairing,
        ito,
    }
}

/// Weighted squared sources E int Theta theta^2 (f^2 + lambda g^2).
fn weighted_source(grid: &UniformGrid, lambda: f64, tabs: &WeightTables, coeffs: &CoefficientSet) -> f64 {
    let f_sp = space_profile(&coeffs.f, grid);
    let g_sp = space_profile(&coeffs.g, grid);
    let mut total = 0.0;
    for n in 0..=tabs.n_steps {
        let tw = if n == 0 || n == tabs.n_steps { 0.5 * tabs.dt } else { tabs.dt };
        let t = n as f64 * tabs.dt;
        let ff = coeffs.f.time.eval(t).v;
        let gg = coeffs.g.time.eval(t).v;
        let row = &tabs.w_node[n * tabs.nn..(n + 1) * tabs.nn];
        let mut r = 0.0;
        for idx in 0..tabs.nn {
            let fv = ff * f_sp[idx];
            let gv = gg * g_sp[idx];
            r += grid.quad_weight(idx) * row[idx] * (fv * fv + lambda * gv * gv);
        }
        total += tw * r;
    }
    total
}

fn reduce(samples: &[PathSamples], pick: impl Fn(&PathSamples) -> f64) -> (f64, f64) {
    let xs: Vec<f64> = samples.iter().map(pick).collect();
    column_stats(&xs)
}

/// Evaluates both sides of the weighted energy estimate on a fresh
/// ensemble, together with the pre-absorption budget rows. Requires a
/// certificate covering the weight parameters with lambda at or above the
/// certified threshold.
pub fn carleman_budget(
    ens: &EnsembleSpec,
    grid: &UniformGrid,
    w: &WeightParams,
    cert: &PositivityCertificate,
    coeffs: &CoefficientSet,
) -> Result<CarlemanReport> {
    check_certificate(grid, w, cert)?;
    if (ens.t_final - w.t_final).abs() > 1e-12 * w.t_final {
        return Err(Error::MissingCertificate(format!(
            "ensemble horizon {} differs from the certified horizon {}",
            ens.t_final, w.t_final
        )));
    }
    let tabs = weight_tables(grid, w, ens.t_final, ens.dt)?;
    let interior = grid.interior_indices();
    let bnodes = grid.boundary_nodes();
    let mask = observation_mask(&bnodes, w.x0);
    let a4_space = space_profile(&coeffs.a4, grid);
    let g_space = space_profile(&coeffs.g, grid);
    let cx = BudgetContext {
        grid,
        lambda: w.lambda,
        x0: w.x0,
        tabs: &tabs,
        interior: &interior,
        bnodes: &bnodes,
        mask: &mask,
        a4_space: &a4_space,
        g_space: &g_space,
        a4_time: &coeffs.a4.time,
        g_time: &coeffs.g.time,
    };
    let samples: Vec<PathSamples> = (0..ens.runs())
        .into_par_iter()
        .map(|p| {
            let path = spde::simulate(grid, coeffs, &ens.y0, &ens.v0, ens.t_final, ens.dt, ens.noise(p))?;
            Ok(path_samples(&cx, &path))
        })
        .collect::<Result<Vec<_>>>()?;

    let rhs_source = weighted_source(grid, w.lambda, &tabs, coeffs);
    let (lhs, se_lhs) = reduce(&samples, |s| s.lhs_vt + s.lhs_grad + s.lhs_ysq);
    let (lhs_velocity, _) = reduce(&samples, |s| s.lhs_vt);
    let (lhs_gradient, _) = reduce(&samples, |s| s.lhs_grad);
    let (lhs_zero_order, _) = reduce(&samples, |s| s.lhs_ysq);
    let (rhs_boundary, se_boundary) = reduce(&samples, |s| s.bnd_masked);
    let (rhs_boundary_full, _) = reduce(&samples, |s| s.bnd_full);
    let (msq, se_msq) = reduce(&samples, |s| s.msq);
    let (pairing, se_pairing) = reduce(&samples, |s| s.pairing);
    let (ito, se_ito) = reduce(&samples, |s| s.ito);
    let (boundary_flux, se_flux) = reduce(&samples, |s| s.flux);

    let denom = rhs_boundary + rhs_source;
    let empirical_c = if denom > 0.0 {
        lhs / denom
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    Ok(CarlemanReport {
        lambda: w.lambda,
        num_paths: ens.runs(),
        lhs,
        lhs_velocity,
        lhs_gradient,
        lhs_zero_order,
        rhs_boundary,
        rhs_boundary_full,
        rhs_source,
        empirical_c,
        se_lhs,
        se_boundary,
        chain: ChainBudget {
            interior_positive: cert.c0 * lhs,
            multiplier_square: msq,
            pairing,
            ito,
            boundary_flux,
            se_multiplier_square: se_msq,
            se_pairing,
            se_ito,
            se_boundary_flux: se_flux,
        },
    })
}

// ---- observability and trace bounds ----

/// Terminal graded norm against the observed trace and the sources. The
/// horizon must exceed twice the largest distance from the observation
/// center, the geometric threshold for waves to reach the observed part.
pub fn observability_ratio(
    ens: &EnsembleSpec,
    grid: &UniformGrid,
    x0: Point,
    coeffs: &CoefficientSet,
) -> Result<ObservabilityReport> {
    let r_max = (0..grid.num_nodes())
        .map(|i| {
            let p = grid.node(i);
            ((p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2)).sqrt()
        })
        .fold(0.0, f64::max);
    if ens.t_final <= 2.0 * r_max {
        return Err(Error::InvalidDomain(format!(
            "t_final = {} does not exceed twice the observation radius {:.6}",
            ens.t_final, r_max
        )));
    }
    let (n_steps, dt) = spde::resolve_steps(ens.t_final, ens.dt)?;
    let bnodes = grid.boundary_nodes();
    let mask = observation_mask(&bnodes, x0);
    let per: Vec<[f64; 2]> = (0..ens.runs())
        .into_par_iter()
        .map(|p| {
            let path = spde::simulate(grid, coeffs, &ens.y0, &ens.v0, ens.t_final, ens.dt, ens.noise(p))?;
            let last = path.n_steps();
            let terminal = graded_norm_sq(grid, path.state(last), &path.velocity(last));
            let mut trace = 0.0;
            for n in 0..=last {
                let tw = if n == 0 || n == last { 0.5 * path.dt } else { path.dt };
                let mut r = 0.0;
                for (b, node) in bnodes.iter().enumerate() {
                    if !mask[b] {
                        continue;
                    }
                    let tr = grid.normal_derivative(path.state(n), node);
                    r += node.weight * tr * tr;
                }
                trace += tw * r;
            }
            Ok([terminal, trace])
        })
        .collect::<Result<Vec<_>>>()?;
    let term_col: Vec<f64> = per.iter().map(|s| s[0]).collect();
    let trace_col: Vec<f64> = per.iter().map(|s| s[1]).collect();
    let (term_sq, se_terminal_sq) = column_stats(&term_col);
    let (trace_sq, se_trace_sq) = column_stats(&trace_col);
    let f_term = source_norm_sq(&coeffs.f, grid, n_steps, dt).sqrt();
    let g_term = source_norm_sq(&coeffs.g, grid, n_steps, dt).sqrt();
    let norms = spde::coefficient_norms(coeffs, grid, ens.t_final, NORM_TIME_SAMPLES);
    let terminal_norm = term_sq.max(0.0).sqrt();
    let trace_term = trace_sq.max(0.0).sqrt();
    let empirical_ratio = guarded_ratio(terminal_norm, trace_term + f_term + g_term)?;
    Ok(ObservabilityReport {
        terminal_norm,
        trace_term,
        f_term,
        g_term,
        coefficient_norm_exponent: coefficient_exponent(&norms),
        empirical_ratio,
        num_paths: ens.runs(),
        se_terminal_sq,
        se_trace_sq,
    })
}

/// Full-boundary trace norm of the ensemble against the shape of its
/// a-priori bound with all constants set to one.
pub fn hidden_regularity_check(
    ens: &EnsembleSpec,
    grid: &UniformGrid,
    coeffs: &CoefficientSet,
) -> Result<HiddenRegularityReport> {
    let (n_steps, dt) = spde::resolve_steps(ens.t_final, ens.dt)?;
    let bnodes = grid.boundary_nodes();
    let per: Vec<f64> = (0..ens.runs())
        .into_par_iter()
        .map(|p| {
            let path = spde::simulate(grid, coeffs, &ens.y0, &ens.v0, ens.t_final, ens.dt, ens.noise(p))?;
            let last = path.n_steps();
            let mut trace = 0.0;
            for n in 0..=last {
                let tw = if n == 0 || n == last { 0.5 * path.dt } else { path.dt };
                let mut r = 0.0;
                for node in &bnodes {
                    let tr = grid.normal_derivative(path.state(n), node);
                    r += node.weight * tr * tr;
                }
                trace += tw * r;
            }
            Ok(trace)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (trace_sq, _) = column_stats(&per);
    let mut y0 = ens.y0.clone();
    let mut v0 = ens.v0.clone();
    grid.project_dirichlet(&mut y0);
    grid.project_dirichlet(&mut v0);
    let data_norm = graded_norm_sq(grid, &y0, &v0).sqrt();
    let f_norm = source_norm_sq(&coeffs.f, grid, n_steps, dt).sqrt();
    let g_norm = source_norm_sq(&coeffs.g, grid, n_steps, dt).sqrt();
    let exponent = coefficient_exponent(&spde::coefficient_norms(coeffs, grid, ens.t_final, NORM_TIME_SAMPLES));
    Ok(HiddenRegularityReport {
        trace_norm: trace_sq.max(0.0).sqrt(),
        rhs_bound_shape: (data_norm + f_norm + g_norm) * exponent.exp(),
        data_norm,
        f_norm,
        g_norm,
        coefficient_norm_exponent: exponent,
    })
}
