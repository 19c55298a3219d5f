//! Closed-form 1-D profiles and separable space-time fields.
//!
//! Profiles evaluate to second-order jets (value, first, second derivative)
//! so manufactured solutions and variable coefficients come with exact
//! derivatives wherever the machinery needs them. Separable fields combine
//! a time profile with per-axis space profiles.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::numerics::smoothstep5;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile1d {
    Constant { value: f64 },
    /// amp * sin(freq s + phase); phase pi/2 gives a cosine.
    Sin { amp: f64, freq: f64, phase: f64 },
    /// base + amp * sin(freq s + phase); sinusoid around a constant level.
    Sinusoid { base: f64, amp: f64, freq: f64, phase: f64 },
    /// Coefficients from constant term upward.
    Poly { coeffs: Vec<f64> },
    /// C^2 plateau: 0 outside (a, b), 1 on [a + margin, b - margin],
    /// quintic ramps between.
    SmoothWindow { a: f64, b: f64, margin: f64 },
}

impl Profile1d {
    pub fn one() -> Self {
        Profile1d::Constant { value: 1.0 }
    }

    pub fn zero() -> Self {
        Profile1d::Constant { value: 0.0 }
    }

    pub fn sine(freq: f64) -> Self {
        Profile1d::Sin { amp: 1.0, freq, phase: 0.0 }
    }

    pub fn cosine(freq: f64) -> Self {
        Profile1d::Sin { amp: 1.0, freq, phase: std::f64::consts::FRAC_PI_2 }
    }

    /// Validated smooth window; requires room for both ramps.
    pub fn smooth_window(a: f64, b: f64, margin: f64) -> Result<Self> {
        if !(margin > 0.0) || 2.0 * margin > b - a {
            return Err(Error::InvalidDomain(format!(
                "smooth window needs 0 < 2 margin <= b - a, got ({a}, {b}) margin {margin}"
            )));
        }
        Ok(Profile1d::SmoothWindow { a, b, margin })
    }

    pub fn eval(&self, s: f64) -> Jet {
        match self {
            Profile1d::Constant { value } => Jet { v: *value, d: 0.0, dd: 0.0 },
            Profile1d::Sin { amp, freq, phase } => {
                let arg = freq * s + phase;
                Jet {
                    v: amp * arg.sin(),
                    d: amp * freq * arg.cos(),
                    dd: -amp * freq * freq * arg.sin(),
                }
            }
            Profile1d::Sinusoid { base, amp, freq, phase } => {
                let arg = freq * s + phase;
                Jet {
                    v: base + amp * arg.sin(),
                    d: amp * freq * arg.cos(),
                    dd: -amp * freq * freq * arg.sin(),
                }
            }
            Profile1d::Poly { coeffs } => {
                // Horner's rule for the value and both derivatives.
                let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    dd = dd * s + 2.0 * d;
                    d = d * s + v;
                    v = v * s + c;
                }
                Jet { v, d, dd }
            }
            Profile1d::SmoothWindow { a, b, margin } => {
                let up = smoothstep5((s - a) / margin);
                let down = smoothstep5((b - s) / margin);
                let (u, du, ddu) = (up.0, up.1 / margin, up.2 / (margin * margin));
                let (w, dw, ddw) = (down.0, -down.1 / margin, down.2 / (margin * margin));
                Jet {
                    v: u * w,
                    d: du * w + u * dw,
                    dd: ddu * w + 2.0 * du * dw + u * ddw,
                }
            }
        }
    }
}

/// Product of 1-D factors evaluated jointly by the product rule; an empty
/// product is the constant 1. Used where a profile needs an extra factor,
/// e.g. a solution factor times a compact cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductProfile(pub Vec<Profile1d>);

impl ProductProfile {
    pub fn single(p: Profile1d) -> Self {
        ProductProfile(vec![p])
    }

    pub fn push(&mut self, p: Profile1d) {
        self.0.push(p);
    }

    pub fn eval(&self, s: f64) -> Jet {
        let mut acc = Jet { v: 1.0, d: 0.0, dd: 0.0 };
        for p in &self.0 {
            let j = p.eval(s);
            acc = Jet {
                v: acc.v * j.v,
                d: acc.d * j.v + acc.v * j.d,
                dd: acc.dd * j.v + 2.0 * acc.d * j.d + acc.v * j.dd,
            };
        }
        acc
    }
}

/// Full second-order jet of a scalar field u(t, x): time derivatives,
/// spatial gradient and Hessian, and the mixed time-space derivatives that
/// enter the energy brackets.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub v: f64,
    pub dt: f64,
    pub dtt: f64,
    pub dx: [f64; 2],
    /// Hessian diagonal [u_xx, u_yy].
    pub dxx: [f64; 2],
    pub dxy: f64,
    pub dtx: [f64; 2],
}

/// u(t, x) = time(t) * fx(x_1) * fy(x_2); fy is the constant 1 in one
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableField {
    pub time: Profile1d,
    pub fx: Profile1d,
    pub fy: Profile1d,
}

/// Assemble the jet of time(t) * fx(x_1) * fy(x_2) from its factor jets.
pub fn combine_jets(tau: Jet, a: Jet, b: Jet) -> FieldJet {
    FieldJet {
        v: tau.v * a.v * b.v,
        dt: tau.d * a.v * b.v,
        dtt: tau.dd * a.v * b.v,
        dx: [tau.v * a.d * b.v, tau.v * a.v * b.d],
        dxx: [tau.v * a.dd * b.v, tau.v * a.v * b.dd],
        dxy: tau.v * a.d * b.d,
        dtx: [tau.d * a.d * b.v, tau.d * a.v * b.d],
    }
}

impl SeparableField {
    pub fn new_1d(time: Profile1d, fx: Profile1d) -> Self {
        SeparableField { time, fx, fy: Profile1d::one() }
    }

    pub fn value(&self, t: f64, x: Point) -> f64 {
        self.time.eval(t).v * self.fx.eval(x[0]).v * self.fy.eval(x[1]).v
    }

    pub fn jet(&self, t: f64, x: Point) -> FieldJet {
        combine_jets(self.time.eval(t), self.fx.eval(x[0]), self.fy.eval(x[1]))
    }
}
