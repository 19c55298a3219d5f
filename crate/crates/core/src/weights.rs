//! The Carleman weight family and its positivity certification.
//!
//! The radial-quadratic weight is
//!
//!   ell(t, x) = lambda (|x - x0|^2 - c (t - T/2)^2) + shift,
//!   theta = exp(ell),
//!
//! damped in time by the boundary-flat bump Theta(t) = exp(-beta/(t(T-t))).
//! The multiplier machinery built on theta produces three coefficient
//! functions F1, F2, G (weights of v_t^2, |grad v|^2 and lambda^2 v^2 in the
//! damped lower bound); an estimate constant exists whenever all three are
//! strictly positive on the space-time cylinder. `certify_positivity`
//! searches a (beta, lambda) ladder and certifies positivity by scanning a
//! lattice in (t, |x - x0|), which covers every domain shape because all
//! three functions depend on x only through the radius.
//!
//! All lambda-expansions carry their exact remainders (no dropped
//! O(1/lambda) terms), so the certified minima are rigorous up to floating
//! point and lattice resolution.

use crate::error::{Error, Result, ViolationNode};
use crate::geometry::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exponent bound for assembling exp() factors; e^709 overflows f64, and
/// anything above this cap is treated as a saturation failure rather than
/// silently producing inf.
pub const EXPONENT_CAP: f64 = 700.0;

/// Parameters of the weight family. `t_final` is the horizon T; `k` tunes
/// the multiplier (the lower-order split uses k = 1 - c); `ell_shift` is an
/// additive normalization of ell that rescales theta^2 without touching any
/// derivative or coefficient function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub lambda: f64,
    pub c: f64,
    pub k: f64,
    pub t_final: f64,
    pub beta: f64,
    pub x0: Point,
    pub ell_shift: f64,
}

impl WeightParams {
    pub fn new(
        lambda: f64,
        c: f64,
        k: f64,
        t_final: f64,
        beta: f64,
        x0: Point,
        ell_shift: f64,
    ) -> Result<Self> {
        let check = |v: f64, name: &str| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                Err(Error::InvalidWeightParams(format!("{name} must be positive, got {v}")))
            } else {
                Ok(())
            }
        };
        check(lambda, "lambda")?;
        check(c, "c")?;
        check(t_final, "t_final")?;
        check(beta, "beta")?;
        if !k.is_finite() || !ell_shift.is_finite() || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeightParams("k, shift and x0 must be finite".into()));
        }
        Ok(WeightParams { lambda, c, k, t_final, beta, x0, ell_shift })
    }

    /// Multiplier tuning used by the lower-order positivity split.
    pub fn split_k(c: f64) -> f64 {
        1.0 - c
    }

    #[inline]
    pub fn rho(&self, x: Point) -> f64 {
        let dx = x[0] - self.x0[0];
        let dy = x[1] - self.x0[1];
        (dx * dx + dy * dy).sqrt()
    }

    /// Point at radius rho from x0 along the first axis; the coefficient
    /// functions are radial, so this suffices for radial evaluation.
    pub fn radial_point(&self, rho: f64) -> Point {
        [self.x0[0] + rho, self.x0[1]]
    }

    // ---- the weight ell and its derivatives (all closed forms) ----

    /// ell(t, x) including the additive shift.
    pub fn ell(&self, t: f64, x: Point) -> f64 {
        let rho = self.rho(x);
        let dt = t - 0.5 * self.t_final;
        self.lambda * (rho * rho - self.c * dt * dt) + self.ell_shift
    }

    #[inline]
    pub fn ell_t(&self, t: f64) -> f64 {
        -2.0 * self.lambda * self.c * (t - 0.5 * self.t_final)
    }

    #[inline]
    pub fn ell_tt(&self) -> f64 {
        -2.0 * self.lambda * self.c
    }

    #[inline]
    pub fn grad_ell(&self, x: Point) -> Point {
        [2.0 * self.lambda * (x[0] - self.x0[0]), 2.0 * self.lambda * (x[1] - self.x0[1])]
    }

    /// Spatial Hessian of ell is 2 lambda times the identity.
    #[inline]
    pub fn ell_xx(&self) -> f64 {
        2.0 * self.lambda
    }

    /// log(theta^2) = 2 ell; the natural quantity for assembling weighted
    /// integrands without overflow.
    #[inline]
    pub fn theta_sq_log(&self, t: f64, x: Point) -> f64 {
        2.0 * self.ell(t, x)
    }

    /// theta^2 with an explicit saturation error above the exponent cap.
    /// Deep underflow returns 0, which is harmless in integrands.
    pub fn theta_sq(&self, t: f64, x: Point) -> Result<f64> {
        let e = self.theta_sq_log(t, x);
        if e > EXPONENT_CAP {
            return Err(Error::Saturation { exponent: e, cap: EXPONENT_CAP, t, lambda: self.lambda });
        }
        Ok(e.exp())
    }

    /// theta itself, same saturation policy.
    pub fn theta(&self, t: f64, x: Point) -> Result<f64> {
        let e = self.ell(t, x);
        if e > EXPONENT_CAP {
            return Err(Error::Saturation { exponent: e, cap: EXPONENT_CAP, t, lambda: self.lambda });
        }
        Ok(e.exp())
    }

    // ---- the time bump Theta and its singular companions ----

    /// log Theta(t) = -beta / (t (T - t)); -inf outside (0, T).
    pub fn bump_log(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.t_final {
            f64::NEG_INFINITY
        } else {
            -self.beta / (t * (self.t_final - t))
        }
    }

    /// Theta(t), clamped to 0 at and outside the endpoints.
    pub fn bump(&self, t: f64) -> f64 {
        let lg = self.bump_log(t);
        if lg == f64::NEG_INFINITY {
            0.0
        } else {
            lg.exp()
        }
    }

    /// Signed derivative factor: Theta'(t) = Theta(t) * bump_sigma_signed(t).
    #[inline]
    pub fn bump_sigma_signed(&self, t: f64) -> f64 {
        let tf = self.t_final;
        self.beta * (tf - 2.0 * t) / (t * t * (tf - t) * (tf - t))
    }

    /// |Theta'/Theta|: the singular factor multiplying the endpoint terms.
    #[inline]
    pub fn bump_sigma(&self, t: f64) -> f64 {
        self.bump_sigma_signed(t).abs()
    }

    // ---- multiplier coefficients ----

    /// Psi = (2n - 2c - 1 + k) lambda for spatial dimension n.
    pub fn psi(&self, n: usize) -> f64 {
        (2.0 * n as f64 - 2.0 * self.c - 1.0 + self.k) * self.lambda
    }

    /// Zeroth-order symbol A in closed polynomial form:
    /// 4 lambda^2 [c^2 (t - T/2)^2 - |x - x0|^2] + lambda (4c + 1 - k).
    pub fn big_a(&self, t: f64, x: Point) -> f64 {
        let rho = self.rho(x);
        let dt = t - 0.5 * self.t_final;
        let s = self.c * self.c * dt * dt;
        4.0 * self.lambda * self.lambda * (s - rho * rho)
            + self.lambda * (4.0 * self.c + 1.0 - self.k)
    }

    /// A assembled from the generic derivative recipe
    /// (ell_t^2 - ell_tt) - (|grad ell|^2 - tr Hess ell) - Psi
    /// for the identity metric; an independent floating-point route used to
    /// cross-check `big_a`.
    pub fn big_a_from_derivatives(&self, t: f64, x: Point, n: usize) -> f64 {
        let lt = self.ell_t(t);
        let g = self.grad_ell(x);
        let grad_sq = g[0] * g[0] + g[1] * g[1];
        let trace_hess = n as f64 * self.ell_xx();
        (lt * lt - self.ell_tt()) - (grad_sq - trace_hess) - self.psi(n)
    }

    /// Zeroth-order coefficient B = A Psi + (A ell_t)_t - div(A grad ell),
    /// split into the lambda^3 leading part
    /// 4 [(4c+5-k)|x-x0|^2 - (8c+1-k) c^2 (t-T/2)^2] lambda^3
    /// and the exact remainder (a pure lambda^2 term for this weight).
    /// All derivatives of A are polynomials, evaluated in closed form.
    pub fn big_b(&self, t: f64, x: Point, n: usize) -> (f64, f64) {
        let lam = self.lambda;
        let c = self.c;
        let k = self.k;
        let rho = self.rho(x);
        let q = rho * rho;
        let dt = t - 0.5 * self.t_final;
        let s = c * c * dt * dt;

        let leading = 4.0 * ((4.0 * c + 5.0 - k) * q - (8.0 * c + 1.0 - k) * s) * lam * lam * lam;

        let a = self.big_a(t, x);
        let a_t = 8.0 * lam * lam * c * c * dt;
        // sum_i dA/dx_i * ell_i = -8 lam^2 (x - x0) . 2 lam (x - x0)
        let grad_a_dot_grad_ell = -16.0 * lam * lam * lam * q;
        let exact = a * self.psi(n) + a_t * self.ell_t(t) + a * self.ell_tt()
            - grad_a_dot_grad_ell
            - n as f64 * self.ell_xx() * a;
        (leading, exact - leading)
    }

    // ---- positivity coefficient functions (radial) ----

    /// F1(t, rho): weight of v_t^2. Base (1 - k), plus the bump bonus
    /// c beta (T-2t)^2 / (t^2 (T-t)^2), minus the endpoint-singular charge
    /// sigma (2 rho + 1/lambda).
    pub fn f1(&self, t: f64, rho: f64) -> f64 {
        let sig = self.bump_sigma(t);
        let bonus = self.c * self.beta * sq_factor(t, self.t_final);
        (1.0 - self.k) + bonus - sig * (2.0 * rho + 1.0 / self.lambda)
    }

    /// F2(t, rho): weight of |grad v|^2, base (k + 3 - 4c).
    pub fn f2(&self, t: f64, rho: f64) -> f64 {
        let sig = self.bump_sigma(t);
        let bonus = self.c * self.beta * sq_factor(t, self.t_final);
        (self.k + 3.0 - 4.0 * self.c) + bonus - sig * 2.0 * rho
    }

    /// G(t, rho) split as (smooth part, endpoint-singular part); the full
    /// coefficient of lambda^3 v^2 is their sum. Both parts carry the exact
    /// 1/lambda remainders of the lambda-expansion.
    pub fn g_split(&self, t: f64, rho: f64, n: usize) -> (f64, f64) {
        let c = self.c;
        let k = self.k;
        let lam = self.lambda;
        let q = rho * rho;
        let dt = t - 0.5 * self.t_final;
        let s = c * c * dt * dt;
        let abs_t2t = (self.t_final - 2.0 * t).abs();
        let psi_bar = 2.0 * n as f64 - 2.0 * c - 1.0 + k;

        let g0 = 4.0 * ((4.0 * c + 5.0 - k) * q - (8.0 * c + 1.0 - k) * s)
            - (4.0 * c + 1.0 - k) * (4.0 * c + 1.0 - k) / lam;
        let g1 = self.bump_sigma(t)
            * (4.0 * c * abs_t2t * (s - q)
                + (c * abs_t2t * (4.0 * c + 1.0 - k) - psi_bar * psi_bar / 4.0) / lam);
        (g0, g1)
    }

    /// G assembled directly from B, A and the bump derivative:
    /// lambda^3 G = B + Theta'/Theta ell_t A - sigma Psi^2 / 4.
    /// Second route for consistency tests.
    pub fn g_direct(&self, t: f64, rho: f64, n: usize) -> f64 {
        let x = self.radial_point(rho);
        let (b_lead, b_rem) = self.big_b(t, x, n);
        let b = b_lead + b_rem;
        let psi = self.psi(n);
        let lam3 = self.lambda * self.lambda * self.lambda;
        (b + self.bump_sigma_signed(t) * self.ell_t(t) * self.big_a(t, x)
            - self.bump_sigma(t) * psi * psi / 4.0)
            / lam3
    }
}

/// (T - 2t)^2 / (t^2 (T - t)^2); the square companion of bump_sigma.
#[inline]
fn sq_factor(t: f64, tf: f64) -> f64 {
    let num = tf - 2.0 * t;
    num * num / (t * t * (tf - t) * (tf - t))
}

/// Ladder of lambda candidates: 2^0 .. 2^20.
pub fn lambda_ladder_default() -> Vec<f64> {
    (0..=20).map(|j| (1u64 << j) as f64).collect()
}

/// Ladder of beta candidates {1e-1 .. 1e-6} T^2/4, so the bump exponent at
/// t = T/2 equals the dimensionless rung value.
pub fn beta_ladder_default(t_final: f64) -> Vec<f64> {
    (1..=6).map(|j| 10f64.powi(-j) * t_final * t_final / 4.0).collect()
}

/// Certification problem: radii and weight shape plus the search ladders
/// and the scan lattice (time nodes x radial nodes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificationConfig {
    pub r0: f64,
    pub r1: f64,
    pub n: usize,
    pub c: f64,
    pub k: f64,
    pub t_final: f64,
    pub lattice: (usize, usize),
    pub lambda_ladder: Vec<f64>,
    pub beta_ladder: Vec<f64>,
}

impl CertificationConfig {
    /// Reference ladders and a 200 x 200 lattice.
    pub fn new(r0: f64, r1: f64, n: usize, c: f64, k: f64, t_final: f64) -> Self {
        CertificationConfig {
            r0,
            r1,
            n,
            c,
            k,
            t_final,
            lattice: (200, 200),
            lambda_ladder: lambda_ladder_default(),
            beta_ladder: beta_ladder_default(t_final),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r1 >= self.r0) {
            return Err(Error::InvalidWeightParams(format!(
                "radii must satisfy 0 < R0 <= R1, got ({}, {})",
                self.r0, self.r1
            )));
        }
        if !(self.c > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::InvalidWeightParams("c and t_final must be positive".into()));
        }
        if self.n != 1 && self.n != 2 {
            return Err(Error::InvalidWeightParams(format!("dimension must be 1 or 2, got {}", self.n)));
        }
        if self.lattice.0 < 2 || self.lattice.1 < 2 {
            return Err(Error::InvalidWeightParams("lattice must be at least 2 x 2".into()));
        }
        if self.lambda_ladder.is_empty() || self.beta_ladder.is_empty() {
            return Err(Error::InvalidWeightParams("ladders must be nonempty".into()));
        }
        for &l in &self.lambda_ladder {
            if !(l > 0.0) {
                return Err(Error::InvalidWeightParams(format!("lambda ladder entry {l} not positive")));
            }
        }
        for &b in &self.beta_ladder {
            if !(b > 0.0) {
                return Err(Error::InvalidWeightParams(format!("beta ladder entry {b} not positive")));
            }
        }
        Ok(())
    }

    fn params(&self, lambda: f64, beta: f64) -> WeightParams {
        WeightParams {
            lambda,
            c: self.c,
            k: self.k,
            t_final: self.t_final,
            beta,
            x0: [0.0, 0.0],
            ell_shift: 0.0,
        }
    }
}

/// Proof object produced by a successful lattice scan: the certifying
/// ladder pair, the three lattice minima, the endpoint margin delta0 inside
/// which the singular parts are themselves nonnegative, and the resulting
/// estimate constant c0 = min(min F1, min F2, min G / lambda0^2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub r0: f64,
    pub r1: f64,
    pub n: usize,
    pub c: f64,
    pub k: f64,
    pub t_final: f64,
    pub lambda0: f64,
    pub beta0: f64,
    pub min_f1: f64,
    pub min_f2: f64,
    pub min_g: f64,
    pub delta0: f64,
    pub c0: f64,
    pub lattice: (usize, usize),
}

struct ScanOutcome {
    min_f1: f64,
    min_f2: f64,
    min_g: f64,
    worst: ViolationNode,
    violations: usize,
}

/// Scan minima of F1, F2, G over the (t, rho) lattice: open midpoint nodes
/// in t (the singular factors are undefined at the endpoints), closed nodes
/// in rho so the extreme radii are represented.
fn scan(p: &WeightParams, r0: f64, r1: f64, n: usize, nt: usize, nr: usize) -> ScanOutcome {
    let tf = p.t_final;
    let rows: Vec<ScanOutcome> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let t = tf * (i as f64 + 0.5) / nt as f64;
            let mut out = ScanOutcome {
                min_f1: f64::INFINITY,
                min_f2: f64::INFINITY,
                min_g: f64::INFINITY,
                worst: ViolationNode { t, rho: r0, which: "F1", value: f64::INFINITY },
                violations: 0,
            };
            for j in 0..nr {
                let rho = r0 + (r1 - r0) * j as f64 / (nr - 1) as f64;
                let f1 = p.f1(t, rho);
                let f2 = p.f2(t, rho);
                let (g0, g1) = p.g_split(t, rho, n);
                let g = g0 + g1;
                for (val, which) in [(f1, "F1"), (f2, "F2"), (g, "G")] {
                    if val <= 0.0 {
                        out.violations += 1;
                        if val < out.worst.value {
                            out.worst = ViolationNode { t, rho, which, value: val };
                        }
                    }
                }
                out.min_f1 = out.min_f1.min(f1);
                out.min_f2 = out.min_f2.min(f2);
                out.min_g = out.min_g.min(g);
            }
            out
        })
        .collect();
    rows.into_iter()
        .reduce(|a, b| ScanOutcome {
            min_f1: a.min_f1.min(b.min_f1),
            min_f2: a.min_f2.min(b.min_f2),
            min_g: a.min_g.min(b.min_g),
            worst: if b.worst.value < a.worst.value { b.worst } else { a.worst },
            violations: a.violations + b.violations,
        })
        .expect("lattice has at least one row")
}

/// Largest time margin delta0 such that on every lattice node with
/// t <= delta0 (and by symmetry t >= T - delta0) the endpoint-singular
/// parts of F1, F2 and G are all nonnegative across the radial range.
fn endpoint_margin(p: &WeightParams, r0: f64, r1: f64, n: usize, nt: usize, nr: usize) -> f64 {
    let tf = p.t_final;
    let psi_bar = 2.0 * n as f64 - 2.0 * p.c - 1.0 + p.k;
    let mut delta0 = tf * 0.25 / nt as f64; // half the first node's t
    for i in 0..nt / 2 {
        let t = tf * (i as f64 + 0.5) / nt as f64;
        let sig = p.bump_sigma(t);
        let sq = p.beta * sq_factor(t, tf);
        let abs_t2t = (tf - 2.0 * t).abs();
        let dt = t - 0.5 * tf;
        let s = p.c * p.c * dt * dt;
        let mut ok = true;
        for j in 0..nr {
            let rho = r0 + (r1 - r0) * j as f64 / (nr - 1) as f64;
            let f1s = p.c * sq - sig * (2.0 * rho + 1.0 / p.lambda);
            let f2s = p.c * sq - sig * 2.0 * rho;
            let g1s = sig
                * (4.0 * p.c * abs_t2t * (s - rho * rho)
                    + (p.c * abs_t2t * (4.0 * p.c + 1.0 - p.k) - psi_bar * psi_bar / 4.0)
                        / p.lambda);
            if f1s < 0.0 || f2s < 0.0 || g1s < 0.0 {
                ok = false;
                break;
            }
        }
        if ok {
            delta0 = t;
        } else {
            break;
        }
    }
    delta0
}

/// Search the ladders for the first (beta, lambda) pair whose lattice
/// minima are all strictly positive. Failure reports the best attempt's
/// worst violating node.
pub fn certify_positivity(cfg: &CertificationConfig) -> Result<PositivityCertificate> {
    cfg.validate()?;
    let (nt, nr) = cfg.lattice;
    let mut best: Option<ScanOutcome> = None;
    for &beta in &cfg.beta_ladder {
        for &lambda in &cfg.lambda_ladder {
            let p = cfg.params(lambda, beta);
            let out = scan(&p, cfg.r0, cfg.r1, cfg.n, nt, nr);
            if out.min_f1 > 0.0 && out.min_f2 > 0.0 && out.min_g > 0.0 {
                let delta0 = endpoint_margin(&p, cfg.r0, cfg.r1, cfg.n, nt, nr);
                let c0 = out.min_f1.min(out.min_f2).min(out.min_g / (lambda * lambda));
                return Ok(PositivityCertificate {
                    r0: cfg.r0,
                    r1: cfg.r1,
                    n: cfg.n,
                    c: cfg.c,
                    k: cfg.k,
                    t_final: cfg.t_final,
                    lambda0: lambda,
                    beta0: beta,
                    min_f1: out.min_f1,
                    min_f2: out.min_f2,
                    min_g: out.min_g,
                    delta0,
                    c0,
                    lattice: (nt, nr),
                });
            }
            let better = match &best {
                None => true,
                Some(b) => out.worst.value > b.worst.value,
            };
            if better {
                best = Some(out);
            }
        }
    }
    let best = best.expect("ladders are nonempty");
    Err(Error::CertificationFailed { worst: best.worst, count: best.violations.max(1) })
}

impl PositivityCertificate {
    /// The weight parameters this certificate vouches for (shift left 0).
    pub fn params(&self, x0: Point) -> WeightParams {
        WeightParams {
            lambda: self.lambda0,
            c: self.c,
            k: self.k,
            t_final: self.t_final,
            beta: self.beta0,
            x0,
            ell_shift: 0.0,
        }
    }

    /// Re-scan the certified pair on a lattice `scale` times finer in both
    /// directions; errors if any minimum drops to zero or below.
    pub fn verify_at_scale(&self, scale: usize) -> Result<(f64, f64, f64)> {
        assert!(scale >= 1);
        let p = self.params([0.0, 0.0]);
        let (nt, nr) = (self.lattice.0 * scale, self.lattice.1 * scale);
        let out = scan(&p, self.r0, self.r1, self.n, nt, nr);
        if out.min_f1 > 0.0 && out.min_f2 > 0.0 && out.min_g > 0.0 {
            Ok((out.min_f1, out.min_f2, out.min_g))
        } else {
            Err(Error::CertificationFailed { worst: out.worst, count: out.violations })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> WeightParams {
        WeightParams::new(1.0, 0.1, 0.9, 40.0, 1.0, [0.0, 0.0], 0.0).unwrap()
    }

    #[test]
    fn parameter_validation_rejects_nonpositive_entries() {
        assert!(WeightParams::new(0.0, 0.1, 0.9, 1.0, 1.0, [0.0, 0.0], 0.0).is_err());
        assert!(WeightParams::new(1.0, -0.1, 0.9, 1.0, 1.0, [0.0, 0.0], 0.0).is_err());
        assert!(WeightParams::new(1.0, 0.1, 0.9, 0.0, 1.0, [0.0, 0.0], 0.0).is_err());
        assert!(WeightParams::new(1.0, 0.1, 0.9, 1.0, 0.0, [0.0, 0.0], 0.0).is_err());
        assert!(WeightParams::new(1.0, 0.1, f64::NAN, 1.0, 1.0, [0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn ell_closed_form_values() {
        let p = reference_params();
        // At t = T/2 the time part vanishes: ell = lambda rho^2.
        assert_eq!(p.ell(20.0, [1.0, 0.0]), 1.0);
        // At t = 0 with rho = 1: 1 - 0.1 * 400 = -39.
        assert_eq!(p.ell(0.0, [1.0, 0.0]), -39.0);
        // Shift is purely additive.
        let q = WeightParams { ell_shift: 5.0, ..p };
        assert_eq!(q.ell(0.0, [1.0, 0.0]), -34.0);
    }

    #[test]
    fn ell_derivatives_match_finite_differences() {
        let p = WeightParams::new(3.0, 0.2, 0.8, 7.0, 1.0, [0.3, -0.1], 0.4).unwrap();
        let (t, x) = (2.1, [1.2, 0.7]);
        let eps = 1e-6;
        let dt_num = (p.ell(t + eps, x) - p.ell(t - eps, x)) / (2.0 * eps);
        assert!((p.ell_t(t) - dt_num).abs() < 1e-6);
        let dtt_num = (p.ell(t + eps, x) - 2.0 * p.ell(t, x) + p.ell(t - eps, x)) / (eps * eps);
        assert!((p.ell_tt() - dtt_num).abs() < 1e-3);
        let dx_num = (p.ell(t, [x[0] + eps, x[1]]) - p.ell(t, [x[0] - eps, x[1]])) / (2.0 * eps);
        assert!((p.grad_ell(x)[0] - dx_num).abs() < 1e-6);
        let dy_num = (p.ell(t, [x[0], x[1] + eps]) - p.ell(t, [x[0], x[1] - eps])) / (2.0 * eps);
        assert!((p.grad_ell(x)[1] - dy_num).abs() < 1e-6);
    }

    #[test]
    fn bump_midpoint_value_and_endpoint_clamp() {
        let p = WeightParams::new(1.0, 0.1, 0.9, 4.0, 1.0, [0.0, 0.0], 0.0).unwrap();
        // Theta(T/2) = exp(-beta/(T^2/4)) = exp(-1/4).
        assert!((p.bump(2.0) - (-0.25f64).exp()).abs() < 1e-15);
        assert_eq!(p.bump(0.0), 0.0);
        assert_eq!(p.bump(4.0), 0.0);
        assert_eq!(p.bump(-1.0), 0.0);
        assert_eq!(p.bump(5.0), 0.0);
        // No NaN from the log form near the ends.
        assert!(p.bump(1e-12) == 0.0 || p.bump(1e-12) > 0.0);
    }

    #[test]
    fn bump_is_symmetric_and_monotone_on_the_left_half() {
        let p = WeightParams::new(1.0, 0.1, 0.9, 4.0, 0.7, [0.0, 0.0], 0.0).unwrap();
        for i in 1..40 {
            let t = 4.0 * i as f64 / 40.0;
            assert!((p.bump(t) - p.bump(4.0 - t)).abs() < 1e-15 * (1.0 + p.bump(t)));
        }
        let mut prev = 0.0;
        for i in 1..=20 {
            let t = 2.0 * i as f64 / 20.0;
            let b = p.bump(t);
            assert!(b >= prev);
            prev = b;
        }
        // Larger beta damps harder everywhere inside.
        let q = WeightParams { beta: 1.4, ..p };
        for i in 1..40 {
            let t = 4.0 * i as f64 / 40.0;
            assert!(q.bump(t) <= p.bump(t));
        }
    }

    #[test]
    fn bump_derivative_factor_matches_finite_differences() {
        let p = WeightParams::new(1.0, 0.1, 0.9, 4.0, 0.7, [0.0, 0.0], 0.0).unwrap();
        for &t in &[0.5, 1.0, 1.9, 2.7, 3.5] {
            let eps = 1e-6;
            let num = (p.bump(t + eps) - p.bump(t - eps)) / (2.0 * eps);
            let exact = p.bump(t) * p.bump_sigma_signed(t);
            assert!((num - exact).abs() < 1e-6 * (1.0 + exact.abs()), "t = {t}");
        }
    }

    #[test]
    fn psi_reference_values() {
        let p = reference_params();
        assert!((p.psi(1) - 1.7).abs() < 1e-15);
        assert!((p.psi(2) - 3.7).abs() < 1e-15);
        let q = WeightParams { lambda: 10.0, ..p };
        assert!((q.psi(1) - 17.0).abs() < 1e-14);
    }

    #[test]
    fn big_a_reference_value_and_quadratic_vanishing() {
        let p = reference_params();
        // t = T/2, rho = 1: 4 (0 - 1) + (0.4 + 1 - 0.9) = -3.5.
        assert!((p.big_a(20.0, [1.0, 0.0]) + 3.5).abs() < 1e-12);
        // Where c^2 (t - T/2)^2 = rho^2 the quadratic part cancels and
        // A = lambda (4c + 1 - k).
        let t = 30.0; // c (t - T/2) = 1
        let a = p.big_a(t, [1.0, 0.0]);
        assert!((a - (4.0 * 0.1 + 1.0 - 0.9)).abs() < 1e-12);
    }

    #[test]
    fn big_a_routes_agree_to_machine_precision() {
        // 10^4 pseudo-random parameter/point samples, relative error 1e-12.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut uniform = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let lambda = 10f64.powf(3.0 * uniform());
            let c = 0.05 + 0.25 * uniform();
            let k = 1.5 * uniform();
            let tf = 1.0 + 50.0 * uniform();
            let t = tf * uniform();
            let rho = 0.1 + 3.0 * uniform();
            let n = if uniform() < 0.5 { 1 } else { 2 };
            let p = WeightParams::new(lambda, c, k, tf, 1.0, [0.0, 0.0], 0.0).unwrap();
            let x = if n == 1 {
                [rho, 0.0]
            } else {
                let phi = std::f64::consts::TAU * uniform();
                [rho * phi.cos(), rho * phi.sin()]
            };
            let a1 = p.big_a(t, x);
            let a2 = p.big_a_from_derivatives(t, x, n);
            let scale = a1.abs().max(a2.abs()).max(1.0);
            assert!(
                (a1 - a2).abs() <= 1e-12 * scale,
                "lambda={lambda} c={c} k={k} t={t} rho={rho}: {a1} vs {a2}"
            );
        }
    }

    #[test]
    fn big_b_leading_at_midtime_and_exact_remainder() {
        let p = reference_params();
        let (lead, rem) = p.big_b(20.0, [1.0, 0.0], 1);
        // Leading: 4 (4c + 5 - k) rho^2 lambda^3.
        assert!((lead - 4.0 * (0.4 + 5.0 - 0.9)).abs() < 1e-12);
        // Exact remainder is -(4c + 1 - k)^2 lambda^2 for this weight family.
        assert!((rem + (0.4 + 1.0 - 0.9f64).powi(2)).abs() < 1e-10);
        // The remainder formula holds at any (t, x), not just midtime.
        for &lam in &[10.0, 100.0, 1000.0] {
            let q = WeightParams { lambda: lam, ..p };
            let (_, rem) = q.big_b(7.3, [1.6, 0.0], 1);
            let expect = -(0.4 + 1.0 - 0.9f64).powi(2) * lam * lam;
            assert!(
                (rem - expect).abs() < 1e-8 * expect.abs(),
                "lambda={lam}: {rem} vs {expect}"
            );
        }
    }

    #[test]
    fn big_b_remainder_grows_no_faster_than_lambda_squared() {
        let p = reference_params();
        let lams = [10.0, 100.0, 1000.0, 10000.0];
        let mut logs_x = Vec::new();
        let mut logs_y = Vec::new();
        for &lam in &lams {
            let q = WeightParams { lambda: lam, ..p };
            let (_, rem) = q.big_b(11.0, [1.3, 0.0], 1);
            logs_x.push(lam.ln());
            logs_y.push(rem.abs().ln());
        }
        let slope = crate::numerics::ls_slope(&logs_x, &logs_y);
        assert!(slope <= 2.05, "remainder log-log slope {slope}");
        assert!(slope >= 1.95, "remainder should scale like lambda^2, slope {slope}");
    }

    #[test]
    fn big_b_scales_exactly_under_lambda_doubling() {
        // Powers of two make the cubic/quadratic scalings exact in floating
        // point, so doubling lambda multiplies the parts by exactly 8 and 4.
        let p = WeightParams::new(64.0, 0.1, 0.9, 40.0, 1.0, [0.0, 0.0], 0.0).unwrap();
        let q = WeightParams { lambda: 128.0, ..p };
        let (l1, r1) = p.big_b(13.0, [1.7, 0.0], 1);
        let (l2, r2) = q.big_b(13.0, [1.7, 0.0], 1);
        assert_eq!(l2, 8.0 * l1);
        assert_eq!(r2, 4.0 * r1);
    }

    #[test]
    fn coefficient_functions_at_midtime() {
        // k = 1 - c: F1 = c and F2 = 4 - 5c at t = T/2 where the bump
        // factors vanish.
        let c = 0.1;
        let p = WeightParams::new(8.0, c, 1.0 - c, 42.0, 44.1, [0.0, 0.0], 0.0).unwrap();
        assert!((p.f1(21.0, 2.0) - c).abs() < 1e-14);
        assert!((p.f2(21.0, 2.0) - (4.0 - 5.0 * c)).abs() < 1e-14);
        let (g0, g1) = p.g_split(21.0, 1.0, 1);
        assert_eq!(g1, 0.0);
        // G0 = 4 (4 + 5c) rho^2 - (5c)^2 / lambda.
        assert!((g0 - (4.0 * (4.0 + 5.0 * c) - 0.25 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn g_routes_agree() {
        let p = WeightParams::new(16.0, 0.1, 0.9, 42.0, 44.1, [0.0, 0.0], 0.0).unwrap();
        for &t in &[1.0, 5.0, 13.0, 21.0, 33.0, 41.0] {
            for &rho in &[1.0, 1.5, 2.0] {
                for n in [1usize, 2] {
                    let (g0, g1) = p.g_split(t, rho, n);
                    let split = g0 + g1;
                    let direct = p.g_direct(t, rho, n);
                    let scale = split.abs().max(direct.abs()).max(1.0);
                    assert!(
                        (split - direct).abs() < 1e-11 * scale,
                        "t={t} rho={rho} n={n}: {split} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn coefficient_functions_ignore_the_shift() {
        let p = WeightParams::new(16.0, 0.1, 0.9, 42.0, 44.1, [0.0, 0.0], 0.0).unwrap();
        let q = WeightParams { ell_shift: 123.0, ..p };
        assert_eq!(p.f1(3.0, 1.4), q.f1(3.0, 1.4));
        assert_eq!(p.f2(3.0, 1.4), q.f2(3.0, 1.4));
        assert_eq!(p.g_split(3.0, 1.4, 1), q.g_split(3.0, 1.4, 1));
        assert_eq!(p.big_a(3.0, [1.4, 0.0]), q.big_a(3.0, [1.4, 0.0]));
    }

    #[test]
    fn theta_sq_log_space_and_saturation() {
        let p = reference_params();
        // ell = 0 at t = T/2, rho = 0 is outside the domain of interest but
        // exercises the identity exp(0) = 1.
        assert_eq!(p.theta_sq(20.0, [0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(p.theta_sq_log(20.0, [1.0, 0.0]), 2.0);
        // Large negative exponents underflow to zero silently.
        assert_eq!(p.theta_sq(0.0, [1.0, 0.0]).unwrap(), (-78.0f64).exp());
        let big = WeightParams { lambda: 400.0, ..p };
        match big.theta_sq(20.0, [1.0, 0.0]) {
            Err(Error::Saturation { exponent, .. }) => assert_eq!(exponent, 800.0),
            other => panic!("expected saturation, got {other:?}"),
        }
    }

    #[test]
    fn certificate_for_the_reference_configuration() {
        // Frozen against an independent lattice-scan oracle.
        let cfg = CertificationConfig::new(1.0, 2.0, 1, 0.1, 0.9, 42.0);
        let cert = certify_positivity(&cfg).unwrap();
        assert_eq!(cert.beta0, 44.1);
        assert_eq!(cert.lambda0, 16.0);
        let tol = 1e-9;
        assert!((cert.min_f1 - 0.023726626541269003).abs() < tol);
        assert!((cert.min_f2 - 3.4476308908794806).abs() < tol);
        assert!((cert.min_g - 9.254910837193268).abs() < tol);
        assert!((cert.delta0 - 0.525).abs() < 1e-12);
        assert!((cert.c0 - 0.023726626541269003).abs() < tol);
        assert!(cert.delta0 > 0.0 && cert.delta0 < cert.t_final / 2.0);
    }

    #[test]
    fn certificate_survives_lattice_refinement() {
        let cfg = CertificationConfig::new(1.0, 2.0, 1, 0.1, 0.9, 42.0);
        let cert = certify_positivity(&cfg).unwrap();
        let (f1, f2, g) = cert.verify_at_scale(10).unwrap();
        assert!(f1 > 0.0 && f2 > 0.0 && g > 0.0);
        // The lattices are not nested (midpoint nodes in t), so refined
        // minima may land on either side of the certified ones, but both
        // sample the same continuum minima and must agree closely.
        assert!((f1 - cert.min_f1).abs() <= 1e-3 * cert.min_f1);
        assert!((f2 - cert.min_f2).abs() <= 1e-3 * cert.min_f2);
        assert!((g - cert.min_g).abs() <= 1e-3 * cert.min_g);
    }

    #[test]
    fn horizon_outside_the_window_is_infeasible_for_every_ladder_pair() {
        let cfg = CertificationConfig::new(1.0, 2.0, 1, 0.1, 0.9, 100.0);
        match certify_positivity(&cfg) {
            Err(Error::CertificationFailed { worst, count }) => {
                assert!(count > 0);
                assert!(worst.value <= 0.0);
            }
            other => panic!("expected CertificationFailed, got {other:?}"),
        }
    }

    #[test]
    fn invalid_ladders_are_rejected() {
        let mut cfg = CertificationConfig::new(1.0, 2.0, 1, 0.1, 0.9, 42.0);
        cfg.beta_ladder = vec![0.0];
        assert!(matches!(certify_positivity(&cfg), Err(Error::InvalidWeightParams(_))));
        let mut cfg = CertificationConfig::new(1.0, 2.0, 1, 0.1, 0.9, 42.0);
        cfg.lambda_ladder.clear();
        assert!(certify_positivity(&cfg).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bump_symmetry_everywhere(beta in 0.01f64..100.0, tf in 0.5f64..50.0, frac in 0.001f64..0.999) {
                let p = WeightParams::new(1.0, 0.1, 0.9, tf, beta, [0.0, 0.0], 0.0).unwrap();
                let t = tf * frac;
                let a = p.bump(t);
                let b = p.bump(tf - t);
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }

            #[test]
            fn theta_sq_shift_scaling(shift in -5.0f64..5.0, t in 0.1f64..39.9, rho in 0.2f64..2.0) {
                let p = reference_params();
                let q = WeightParams { ell_shift: shift, ..p };
                let base = p.theta_sq(t, [rho, 0.0]).unwrap();
                let shifted = q.theta_sq(t, [rho, 0.0]).unwrap();
                let expect = base * (2.0 * shift).exp();
                prop_assert!((shifted - expect).abs() <= 1e-9 * expect.abs().max(1e-300));
            }
        }
    }
}
