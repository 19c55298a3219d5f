//! Explicit solver for the stochastic wave equation
//!
//!   dy_t = (Lap y + a1 y_t + a2 . grad y + a3 y + f) dt + (a4 y + g) dw
//!
//! with homogeneous Dirichlet data on a uniform grid, driven by one scalar
//! Brownian path shared across space.
//!
//! The scheme staggers velocity by half a step: z lives at t_{n-1/2} and
//!
//!   z^{n+1} = z^n + dt (Lap_h y^n + a1 z^n + a2 . grad_h y^n + a3 y^n + f^n)
//!           + (a4 y^n + g^n) dW^n,
//!   y^{n+1} = y^n + dt z^{n+1}.
//!
//! With the matching half-step initialization this is second order in
//! (h, dt) for the pure wave part; the a1 damping term is evaluated at the
//! staggered point and costs one order there. Noise coefficients multiply
//! the state at the left time point, so increments are independent of the
//! state they multiply and expectations obey the noise-free recursion
//! exactly.

use crate::error::{Error, Result};
use crate::grid::{BoundaryGridNode, UniformGrid};
use crate::numerics::pairwise_sum;
use crate::profile::SeparableField;
use crate::rng;
use serde::{Deserialize, Serialize};

/// CFL safety factor applied to h_min / sqrt(dims).
pub const CFL_FRACTION: f64 = 0.9;

/// First-order coefficients, sources and the noise pair. All separable in
/// time and space; `zero()` profiles switch a term off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a1: SeparableField,
    pub a2: [SeparableField; 2],
    pub a3: SeparableField,
    pub a4: SeparableField,
    pub f: SeparableField,
    pub g: SeparableField,
}

impl CoefficientSet {
    pub fn zero() -> Self {
        use crate::profile::Profile1d;
        let z = || SeparableField {
            time: Profile1d::zero(),
            fx: Profile1d::one(),
            fy: Profile1d::one(),
        };
        CoefficientSet { a1: z(), a2: [z(), z()], a3: z(), a4: z(), f: z(), g: z() }
    }
}

/// Brownian path address; `None` in `simulate` runs the noise-free scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisePath {
    pub seed: u64,
    pub path: u64,
}

/// One coefficient pre-split into a time profile and nodal space values;
/// evaluation per step is one profile call plus a vector scale.
struct SpaceTable {
    time: crate::profile::Profile1d,
    space: Vec<f64>,
}

impl SpaceTable {
    fn build(field: &SeparableField, grid: &UniformGrid) -> Self {
        let space = grid.sample(|x| field.fx.eval(x[0]).v * field.fy.eval(x[1]).v);
        SpaceTable { time: field.time.clone(), space }
    }

    #[inline]
    fn factor(&self, t: f64) -> f64 {
        self.time.eval(t).v
    }
}

/// Complete trajectory: every nodal state, the Brownian increments that
/// produced it, and the initial staggered velocity. Velocities at integer
/// times are reconstructed by centered differences of the stored states.
pub struct SolutionPath {
    pub grid: UniformGrid,
    pub dt: f64,
    /// States y^0 .. y^N, each of length grid.num_nodes().
    pub states: Vec<Vec<f64>>,
    /// Brownian increments dW^0 .. dW^{N-1}; empty for noise-free runs.
    pub increments: Vec<f64>,
    /// Staggered velocity z^0 = v(-dt/2) fixed by the initialization.
    pub z0: Vec<f64>,
}

impl std::fmt::Debug for SolutionPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolutionPath")
            .field("dt", &self.dt)
            .field("steps", &(self.states.len() - 1))
            .field("nodes", &self.states[0].len())
            .field("noisy", &!self.increments.is_empty())
            .finish()
    }
}

pub fn cfl_limit(grid: &UniformGrid) -> f64 {
    CFL_FRACTION * grid.h_min() / (grid.dims() as f64).sqrt()
}

/// Step count and exact step size the scheme uses for a requested dt: the
/// horizon is divided evenly by the smallest count that honors the request.
pub fn resolve_steps(t_final: f64, dt_request: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0) || !(dt_request > 0.0) {
        return Err(Error::InvalidDomain("t_final and dt must be positive".into()));
    }
    let n_steps = (t_final / dt_request).ceil().max(1.0) as usize;
    Ok((n_steps, t_final / n_steps as f64))
}

pub fn simulate(
    grid: &UniformGrid,
    coeffs: &CoefficientSet,
    y0: &[f64],
    v0: &[f64],
    t_final: f64,
    dt_request: f64,
    noise: Option<NoisePath>,
) -> Result<SolutionPath> {
    let nn = grid.num_nodes();
    if y0.len() != nn || v0.len() != nn {
        return Err(Error::DataShapeMismatch { got: y0.len().min(v0.len()), want: nn });
    }
    let (n_steps, dt) = resolve_steps(t_final, dt_request)?;
    let limit = cfl_limit(grid);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }

    let t_a1 = SpaceTable::build(&coeffs.a1, grid);
    let t_a2x = SpaceTable::build(&coeffs.a2[0], grid);
    let t_a2y = SpaceTable::build(&coeffs.a2[1], grid);
    let t_a3 = SpaceTable::build(&coeffs.a3, grid);
    let t_a4 = SpaceTable::build(&coeffs.a4, grid);
    let t_f = SpaceTable::build(&coeffs.f, grid);
    let t_g = SpaceTable::build(&coeffs.g, grid);

    let interior = grid.interior_indices();
    let mut y = y0.to_vec();
    grid.project_dirichlet(&mut y);
    let mut v = v0.to_vec();
    grid.project_dirichlet(&mut v);

    // Half-step-back initialization: z^0 = v(0) - (dt/2) y_tt(0), with the
    // acceleration read off the equation at t = 0.
    let mut z = vec![0.0; nn];
    {
        let (c1, c2x, c2y, c3, cf) =
            (t_a1.factor(0.0), t_a2x.factor(0.0), t_a2y.factor(0.0), t_a3.factor(0.0), t_f.factor(0.0));
        for &idx in &interior {
            let lap = grid.laplacian(&y, idx);
            let gr = grid.gradient(&y, idx);
            let accel = lap
                + c1 * t_a1.space[idx] * v[idx]
                + c2x * t_a2x.space[idx] * gr[0]
                + c2y * t_a2y.space[idx] * gr[1]
                + c3 * t_a3.space[idx] * y[idx]
                + cf * t_f.space[idx];
            z[idx] = v[idx] - 0.5 * dt * accel;
        }
    }
    let z0 = z.clone();

    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(y.clone());
    let mut increments = Vec::with_capacity(if noise.is_some() { n_steps } else { 0 });
    let mut z_next = vec![0.0; nn];
    let probe = interior[interior.len() / 2];

    for step in 0..n_steps {
        let t = step as f64 * dt;
        let dw = match noise {
            Some(np) => {
                let w = rng::wiener_increment(np.seed, np.path, step as u64, dt);
                increments.push(w);
                w
            }
            None => 0.0,
        };
        let (c1, c2x, c2y, c3, c4, cf, cg) = (
            t_a1.factor(t),
            t_a2x.factor(t),
            t_a2y.factor(t),
            t_a3.factor(t),
            t_a4.factor(t),
            t_f.factor(t),
            t_g.factor(t),
        );
        z_next.copy_from_slice(&z);
        for &idx in &interior {
            let lap = grid.laplacian(&y, idx);
            let gr = grid.gradient(&y, idx);
            let drift = lap
                + c1 * t_a1.space[idx] * z[idx]
                + c2x * t_a2x.space[idx] * gr[0]
                + c2y * t_a2y.space[idx] * gr[1]
                + c3 * t_a3.space[idx] * y[idx]
                + cf * t_f.space[idx];
            let diffusion = c4 * t_a4.space[idx] * y[idx] + cg * t_g.space[idx];
            z_next[idx] = z[idx] + dt * drift + diffusion * dw;
        }
        std::mem::swap(&mut z, &mut z_next);
        for &idx in &interior {
            y[idx] += dt * z[idx];
        }
        states.push(y.clone());

        let t_next = (step + 1) as f64 * dt;
        if !y[probe].is_finite()
            || (step % 8 == 7 && y.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite { step: step + 1, t: t_next });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: n_steps, t: t_final });
    }

    Ok(SolutionPath { grid: grid.clone(), dt, states, increments, z0 })
}

impl SolutionPath {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    /// Staggered velocity z^m = v(t_m - dt/2), recovered exactly from the
    /// update rule for m >= 1.
    fn staggered(&self, m: usize, idx: usize) -> f64 {
        if m == 0 {
            self.z0[idx]
        } else {
            (self.states[m][idx] - self.states[m - 1][idx]) / self.dt
        }
    }

    /// Velocity at the integer time t_n: average of the adjacent staggered
    /// values inside, one-sided extrapolation at the final step.
    pub fn velocity(&self, n: usize) -> Vec<f64> {
        let nn = self.states[0].len();
        let last = self.n_steps();
        (0..nn)
            .map(|idx| {
                if n < last {
                    0.5 * (self.staggered(n, idx) + self.staggered(n + 1, idx))
                } else {
                    1.5 * self.staggered(last, idx) - 0.5 * self.staggered(last - 1, idx)
                }
            })
            .collect()
    }

    /// Discrete energy (1/2) int v^2 + |grad y|^2: nodal trapezoid rule for
    /// the velocity, edge-midpoint differences for the gradient.
    pub fn energy(&self, n: usize) -> f64 {
        let v = self.velocity(n);
        let y = &self.states[n];
        let g = &self.grid;
        let mut terms: Vec<f64> =
            (0..y.len()).map(|idx| g.quad_weight(idx) * v[idx] * v[idx]).collect();
        let [nx, ny] = g.cells();
        let w = nx + 1;
        if g.dims() == 1 {
            for i in 0..nx {
                let d = (y[i + 1] - y[i]) / g.hx();
                terms.push(g.hx() * d * d);
            }
        } else {
            for j in 0..=ny {
                let tj = if j == 0 || j == ny { 0.5 } else { 1.0 };
                for i in 0..nx {
                    let idx = j * w + i;
                    let d = (y[idx + 1] - y[idx]) / g.hx();
                    terms.push(tj * g.hx() * g.hy() * d * d);
                }
            }
            for j in 0..ny {
                for i in 0..=nx {
                    let ti = if i == 0 || i == nx { 0.5 } else { 1.0 };
                    let idx = j * w + i;
                    let d = (y[idx + w] - y[idx]) / g.hy();
                    terms.push(ti * g.hx() * g.hy() * d * d);
                }
            }
        }
        0.5 * pairwise_sum(&terms)
    }

    /// L2 norm squared of the state at t_n.
    pub fn norm_sq(&self, n: usize) -> f64 {
        let y = &self.states[n];
        let terms: Vec<f64> =
            (0..y.len()).map(|idx| self.grid.quad_weight(idx) * y[idx] * y[idx]).collect();
        pairwise_sum(&terms)
    }

    /// Outward normal derivative time series at one boundary node.
    pub fn normal_trace(&self, node: &BoundaryGridNode, n: usize) -> f64 {
        self.grid.normal_derivative(&self.states[n], node)
    }
}

/// Norms of the lower-order coefficients that drive the parameter-size
/// rule: sup over the space-time lattice for a1, a2, a4; sup in time of the
/// L^dims space norm for a3.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoefficientNorms {
    pub a1_sup: f64,
    pub a2_sup: f64,
    pub a3_ln: f64,
    pub a4_sup: f64,
}

pub fn coefficient_norms(
    coeffs: &CoefficientSet,
    grid: &UniformGrid,
    t_final: f64,
    time_samples: usize,
) -> CoefficientNorms {
    let n = grid.dims();
    let mut a1_sup: f64 = 0.0;
    let mut a2_sup: f64 = 0.0;
    let mut a3_ln: f64 = 0.0;
    let mut a4_sup: f64 = 0.0;
    for m in 0..=time_samples {
        let t = t_final * m as f64 / time_samples as f64;
        let mut a3_terms = Vec::with_capacity(grid.num_nodes());
        for idx in 0..grid.num_nodes() {
            let x = grid.node(idx);
            a1_sup = a1_sup.max(coeffs.a1.value(t, x).abs());
            let a2x = coeffs.a2[0].value(t, x);
            let a2y = coeffs.a2[1].value(t, x);
            a2_sup = a2_sup.max((a2x * a2x + a2y * a2y).sqrt());
            a4_sup = a4_sup.max(coeffs.a4.value(t, x).abs());
            a3_terms.push(grid.quad_weight(idx) * coeffs.a3.value(t, x).abs().powi(n as i32));
        }
        a3_ln = a3_ln.max(pairwise_sum(&a3_terms).powf(1.0 / n as f64));
    }
    CoefficientNorms { a1_sup, a2_sup, a3_ln, a4_sup }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, Shape};
    use crate::numerics::ls_slope;
    use crate::profile::{Profile1d, SeparableField};
    use std::f64::consts::PI;

    fn unit_interval_grid(cells: usize) -> UniformGrid {
        let d = DomainSpec::new(Shape::Interval { a: 0.0, b: 1.0 }, [2.0, 0.0]).unwrap();
        UniformGrid::new(&d, cells).unwrap()
    }

    fn free_wave_run(cells: usize) -> (SolutionPath, f64) {
        // y = cos(pi t) sin(pi x) solves the free wave equation.
        let grid = unit_interval_grid(cells);
        let y0 = grid.sample(|x| (PI * x[0]).sin());
        let v0 = vec![0.0; grid.num_nodes()];
        let path = simulate(
            &grid,
            &CoefficientSet::zero(),
            &y0,
            &v0,
            1.0,
            CFL_FRACTION * grid.h_min(),
            None,
        )
        .unwrap();
        let last = path.n_steps();
        let err = (0..grid.num_nodes())
            .map(|idx| {
                let exact = (PI * 1.0f64).cos() * (PI * grid.node(idx)[0]).sin();
                (path.state(last)[idx] - exact).abs()
            })
            .fold(0.0f64, f64::max)
            .to_owned();
        (path, err)
    }

    #[test]
    fn free_wave_terminal_error_is_small() {
        let (_, err) = free_wave_run(64);
        assert!(err < 3e-4, "sup error {err}");
    }

    #[test]
    fn free_wave_converges_at_second_order() {
        let errs: Vec<f64> = [32usize, 64, 128].iter().map(|&c| free_wave_run(c).1).collect();
        assert!(errs[0] / errs[1] >= 3.5, "ratio {}", errs[0] / errs[1]);
        assert!(errs[1] / errs[2] >= 3.5, "ratio {}", errs[1] / errs[2]);
        let hs: Vec<f64> = [32.0f64, 64.0, 128.0].iter().map(|c| (1.0 / c).ln()).collect();
        let ls: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let slope = ls_slope(&hs, &ls);
        assert!(slope >= 1.8, "order {slope}");
    }

    #[test]
    fn free_wave_energy_is_conserved_to_scheme_order() {
        let (path, _) = free_wave_run(64);
        let e0 = path.energy(0);
        assert!((e0 - PI * PI / 4.0).abs() < 1e-3 * e0);
        for n in 0..=path.n_steps() {
            let drift = (path.energy(n) - e0).abs() / e0;
            assert!(drift < 1e-3, "drift {drift} at step {n}");
        }
    }

    #[test]
    fn zero_data_stays_zero_even_with_noise() {
        let grid = unit_interval_grid(16);
        let zeros = vec![0.0; grid.num_nodes()];
        let mut coeffs = CoefficientSet::zero();
        coeffs.a4 =
            SeparableField::new_1d(Profile1d::one(), Profile1d::Constant { value: 0.5 });
        let path = simulate(
            &grid,
            &coeffs,
            &zeros,
            &zeros,
            1.0,
            0.9 / 16.0,
            Some(NoisePath { seed: 7, path: 0 }),
        )
        .unwrap();
        for n in 0..=path.n_steps() {
            assert!(path.state(n).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dirichlet_boundary_holds_under_noise_and_sources() {
        let grid = unit_interval_grid(32);
        let y0 = grid.sample(|x| (PI * x[0]).sin());
        let v0 = vec![0.0; grid.num_nodes()];
        let mut coeffs = CoefficientSet::zero();
        coeffs.g = SeparableField::new_1d(Profile1d::one(), Profile1d::sine(PI));
        coeffs.a4 = SeparableField::new_1d(Profile1d::one(), Profile1d::Constant { value: 1.0 });
        coeffs.f = SeparableField::new_1d(Profile1d::one(), Profile1d::one());
        let path = simulate(
            &grid,
            &coeffs,
            &y0,
            &v0,
            0.5,
            0.9 / 32.0,
            Some(NoisePath { seed: 3, path: 5 }),
        )
        .unwrap();
        let last = path.n_steps();
        for n in [0, 1, last / 2, last] {
            let s = path.state(n);
            assert_eq!(s[0], 0.0);
            assert_eq!(s[grid.num_nodes() - 1], 0.0);
        }
    }

    #[test]
    fn solution_map_is_linear_in_the_data_for_a_fixed_path() {
        let grid = unit_interval_grid(24);
        let mut coeffs = CoefficientSet::zero();
        coeffs.a1 = SeparableField::new_1d(Profile1d::one(), Profile1d::Constant { value: 0.3 });
        coeffs.a4 = SeparableField::new_1d(Profile1d::one(), Profile1d::Constant { value: 0.7 });
        let noise = Some(NoisePath { seed: 11, path: 2 });
        let u0 = grid.sample(|x| (PI * x[0]).sin());
        let w0 = grid.sample(|x| (2.0 * PI * x[0]).sin());
        let zeros = vec![0.0; grid.num_nodes()];
        let run = |y0: &[f64]| {
            simulate(&grid, &coeffs, y0, &zeros, 0.7, 0.9 / 24.0, noise).unwrap()
        };
        let pa = run(&u0);
        let pb = run(&w0);
        let combo: Vec<f64> =
            (0..grid.num_nodes()).map(|i| 2.0 * u0[i] - 0.5 * w0[i]).collect();
        let pc = run(&combo);
        let last = pa.n_steps();
        for idx in 0..grid.num_nodes() {
            let expect = 2.0 * pa.state(last)[idx] - 0.5 * pb.state(last)[idx];
            let got = pc.state(last)[idx];
            assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn same_path_reproduces_bitwise_and_paths_differ() {
        let grid = unit_interval_grid(16);
        let y0 = grid.sample(|x| (PI * x[0]).sin());
        let v0 = vec![0.0; grid.num_nodes()];
        let mut coeffs = CoefficientSet::zero();
        coeffs.a4 = SeparableField::new_1d(Profile1d::one(), Profile1d::one());
        let run = |path: u64| {
            simulate(
                &grid,
                &coeffs,
                &y0,
                &v0,
                0.5,
                0.9 / 16.0,
                Some(NoisePath { seed: 42, path }),
            )
            .unwrap()
        };
        let a = run(0);
        let b = run(0);
        let c = run(1);
        assert_eq!(a.state(a.n_steps()), b.state(b.n_steps()));
        assert_ne!(a.state(a.n_steps()), c.state(c.n_steps()));
        assert_eq!(a.increments, b.increments);
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn path_mean_matches_the_noise_free_recursion() {
        // E[y] obeys the dW = 0 recursion exactly, so the ensemble mean of
        // any linear functional differs from the deterministic value only
        // by sampling error.
        let grid = unit_interval_grid(32);
        let y0 = grid.sample(|x| (PI * x[0]).sin());
        let v0 = vec![0.0; grid.num_nodes()];
        let mut coeffs = CoefficientSet::zero();
        coeffs.a4 = SeparableField::new_1d(Profile1d::one(), Profile1d::Constant { value: 0.4 });
        coeffs.g = SeparableField::new_1d(Profile1d::one(), Profile1d::sine(PI));
        let functional = |p: &SolutionPath| {
            let last = p.n_steps();
            let y = p.state(last);
            let terms: Vec<f64> =
                (0..y.len()).map(|i| p.grid.quad_weight(i) * y[i]).collect();
            pairwise_sum(&terms)
        };
        let det = simulate(&grid, &coeffs, &y0, &v0, 1.0, 0.9 / 32.0, None).unwrap();
        let det_val = functional(&det);
        let m = 200;
        let samples: Vec<f64> = (0..m)
            .map(|p| {
                let path = simulate(
                    &grid,
                    &coeffs,
                    &y0,
                    &v0,
                    1.0,
                    0.9 / 32.0,
                    Some(NoisePath { seed: 1234, path: p }),
                )
                .unwrap();
                functional(&path)
            })
            .collect();
        let (mean, se) = crate::numerics::mean_and_se(&samples);
        assert!(se > 0.0, "noise must actually enter the functional");
        assert!(
            (mean - det_val).abs() < 3.0 * se,
            "mean {mean} vs deterministic {det_val}, se {se}"
        );
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let grid = unit_interval_grid(16);
        let zeros = vec![0.0; grid.num_nodes()];
        let err = simulate(&grid, &CoefficientSet::zero(), &zeros, &zeros, 1.0, 0.5, None);
        assert!(matches!(err, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn blowup_is_reported_not_propagated() {
        let grid = unit_interval_grid(32);
        let y0 = grid.sample(|x| (PI * x[0]).sin());
        let v0 = vec![0.0; grid.num_nodes()];
        let mut coeffs = CoefficientSet::zero();
        coeffs.a3 =
            SeparableField::new_1d(Profile1d::one(), Profile1d::Constant { value: -1e30 });
        match simulate(&grid, &coeffs, &y0, &v0, 1.0, 0.9 / 32.0, None) {
            Err(Error::NonFinite { step, .. }) => assert!(step > 0),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let grid = unit_interval_grid(16);
        let bad = vec![0.0; 5];
        let good = vec![0.0; grid.num_nodes()];
        assert!(matches!(
            simulate(&grid, &CoefficientSet::zero(), &bad, &good, 1.0, 0.9 / 16.0, None),
            Err(Error::DataShapeMismatch { .. })
        ));
    }

    #[test]
    fn velocity_reconstruction_tracks_the_exact_derivative() {
        let (path, _) = free_wave_run(64);
        let grid = &path.grid;
        // y_t = -pi sin(pi t) sin(pi x), checked mid-run and at the end.
        for &n in &[path.n_steps() / 2, path.n_steps()] {
            let t = path.time(n);
            let v = path.velocity(n);
            for idx in 0..grid.num_nodes() {
                let exact = -PI * (PI * t).sin() * (PI * grid.node(idx)[0]).sin();
                assert!(
                    (v[idx] - exact).abs() < 2e-3,
                    "n={n} idx={idx}: {} vs {exact}",
                    v[idx]
                );
            }
        }
    }

    #[test]
    fn coefficient_norms_reference_values() {
        let grid = unit_interval_grid(64);
        let mut coeffs = CoefficientSet::zero();
        // a3(x) = x on (0, 1): sup-in-time of the L^1 norm is 1/2, exact
        // under the trapezoid rule.
        coeffs.a3 =
            SeparableField::new_1d(Profile1d::one(), Profile1d::Poly { coeffs: vec![0.0, 1.0] });
        coeffs.a1 = SeparableField::new_1d(Profile1d::sine(1.0), Profile1d::one());
        let norms = coefficient_norms(&coeffs, &grid, PI / 2.0, 50);
        assert!((norms.a3_ln - 0.5).abs() < 1e-12);
        assert!((norms.a1_sup - 1.0).abs() < 1e-3);
        assert_eq!(norms.a4_sup, 0.0);
    }
}
