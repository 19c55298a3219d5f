//! Domain geometry for the observability experiments.
//!
//! A domain is an interval, an axis-aligned rectangle or a disk, together
//! with an exterior reference point x0. All geometric quantities needed by
//! the weight machinery are analytic for these shapes:
//!
//! * the radial bounds R0 = min_{x in cl G} |x - x0|, R1 = max |x - x0|,
//! * the observed boundary part Gamma0 = { x on Gamma : (x - x0) . nu(x) > 0 }
//!   (strict inequality; tangency is excluded),
//! * the largest admissible coupling c with (4 + 5c) R0^2 > 9 c R1^2,
//! * the admissible horizon window 2 R1 / c < T < 2 sqrt((4+5c) R0^2 / (9 c^3)).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spatial point; one-dimensional domains use component 0 only.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Open interval (a, b).
    Interval { a: f64, b: f64 },
    /// Open axis-aligned rectangle (a[0], b[0]) x (a[1], b[1]).
    Rectangle { a: [f64; 2], b: [f64; 2] },
    /// Open disk of given center and radius.
    Disk { center: [f64; 2], radius: f64 },
}

/// A domain shape plus the exterior reference point x0 the radial weight is
/// centered on. x0 must lie strictly outside the closure so that R0 > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub x0: Point,
}

/// One quadrature node of the boundary, with outward normal and surface
/// weight. Interval endpoints carry weight 1 (point evaluations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub x: Point,
    pub nu: Point,
    pub weight: f64,
    /// Whether the node belongs to the observed part Gamma0.
    pub observed: bool,
}

/// Analytic geometric summary of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub r0: f64,
    pub r1: f64,
    /// Largest coupling wall: valid couplings satisfy 0 < c < c_critical.
    pub c_critical: f64,
    /// Coupling actually selected (user value or the midpoint default).
    pub c: f64,
    /// Admissible horizon window for the selected coupling.
    pub t_window: (f64, f64),
}

fn dist2(p: Point, q: Point) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    dx * dx + dy * dy
}

impl DomainSpec {
    /// Validates the shape and that x0 keeps a positive distance from the
    /// closure of G.
    pub fn new(shape: Shape, x0: Point) -> Result<Self> {
        match shape {
            Shape::Interval { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidDomain(format!(
                        "interval needs a < b, got ({a}, {b})"
                    )));
                }
            }
            Shape::Rectangle { a, b } => {
                if !(a[0] < b[0] && a[1] < b[1])
                    || a.iter().chain(b.iter()).any(|v| !v.is_finite())
                {
                    return Err(Error::InvalidDomain(format!(
                        "rectangle needs a < b componentwise, got ({a:?}, {b:?})"
                    )));
                }
            }
            Shape::Disk { radius, center } => {
                if !(radius > 0.0) || !radius.is_finite() || center.iter().any(|v| !v.is_finite())
                {
                    return Err(Error::InvalidDomain(format!(
                        "disk needs radius > 0, got {radius}"
                    )));
                }
            }
        }
        let spec = DomainSpec { shape, x0 };
        let (r0, _) = spec.radii();
        if !(r0 > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "reference point {x0:?} touches the closure of the domain (R0 = {r0})"
            )));
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Lebesgue measure of G.
    pub fn measure(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Rectangle { a, b } => (b[0] - a[0]) * (b[1] - a[1]),
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// (R0, R1): extreme distances from x0 to the closure of G.
    pub fn radii(&self) -> (f64, f64) {
        let x0 = self.x0;
        match self.shape {
            Shape::Interval { a, b } => {
                let p = x0[0];
                let r0 = if p < a {
                    a - p
                } else if p > b {
                    p - b
                } else {
                    0.0
                };
                let r1 = (p - a).abs().max((p - b).abs());
                (r0, r1)
            }
            Shape::Rectangle { a, b } => {
                let clamped = [x0[0].clamp(a[0], b[0]), x0[1].clamp(a[1], b[1])];
                let r0 = dist2(x0, clamped).sqrt();
                let corners = [[a[0], a[1]], [a[0], b[1]], [b[0], a[1]], [b[0], b[1]]];
                let r1 = corners
                    .iter()
                    .map(|&c| dist2(x0, c).sqrt())
                    .fold(0.0f64, f64::max);
                (r0, r1)
            }
            Shape::Disk { center, radius } => {
                let d = dist2(x0, center).sqrt();
                ((d - radius).max(0.0), d + radius)
            }
        }
    }

    /// Boundary quadrature nodes with outward normals and the observed-part
    /// flag. `h` controls the node spacing on curves; it is ignored for the
    /// interval whose boundary is two points.
    pub fn observation_boundary(&self, h: f64) -> Result<Vec<BoundaryNode>> {
        if !(h > 0.0) {
            return Err(Error::InvalidDomain(format!("boundary spacing must be positive, got {h}")));
        }
        let x0 = self.x0;
        let observed = |x: Point, nu: Point| (x[0] - x0[0]) * nu[0] + (x[1] - x0[1]) * nu[1] > 0.0;
        let mut nodes = Vec::new();
        match self.shape {
            Shape::Interval { a, b } => {
                for (x, nu) in [([a, 0.0], [-1.0, 0.0]), ([b, 0.0], [1.0, 0.0])] {
                    nodes.push(BoundaryNode { x, nu, weight: 1.0, observed: observed(x, nu) });
                }
            }
            Shape::Rectangle { a, b } => {
                // Face-interior nodes only; the four corners carry no
                // well-defined normal and zero surface measure.
                let mut face = |len: f64, point: &dyn Fn(f64) -> Point, nu: Point| {
                    let n = (len / h).ceil() as usize;
                    let w = len / n as f64;
                    for i in 0..n {
                        let x = point((i as f64 + 0.5) * w);
                        nodes.push(BoundaryNode { x, nu, weight: w, observed: observed(x, nu) });
                    }
                };
                face(b[0] - a[0], &|s| [a[0] + s, a[1]], [0.0, -1.0]);
                face(b[0] - a[0], &|s| [a[0] + s, b[1]], [0.0, 1.0]);
                face(b[1] - a[1], &|s| [a[0], a[1] + s], [-1.0, 0.0]);
                face(b[1] - a[1], &|s| [b[0], a[1] + s], [1.0, 0.0]);
            }
            Shape::Disk { center, radius } => {
                let n = (std::f64::consts::TAU * radius / h).ceil().max(8.0) as usize;
                let w = std::f64::consts::TAU * radius / n as f64;
                for i in 0..n {
                    let phi = std::f64::consts::TAU * (i as f64 + 0.5) / n as f64;
                    let nu = [phi.cos(), phi.sin()];
                    let x = [center[0] + radius * nu[0], center[1] + radius * nu[1]];
                    nodes.push(BoundaryNode { x, nu, weight: w, observed: observed(x, nu) });
                }
            }
        }
        Ok(nodes)
    }

    /// Largest coupling for which (4 + 5c) R0^2 > 9 c R1^2 can hold; valid
    /// couplings are 0 < c < critical.
    pub fn critical_coupling(&self) -> f64 {
        let (r0, r1) = self.radii();
        4.0 * r0 * r0 / (9.0 * r1 * r1 - 5.0 * r0 * r0)
    }

    /// Validates a user coupling against the radii, or picks the midpoint
    /// of the feasible range (0, critical) when none is given.
    pub fn select_c(&self, user: Option<f64>) -> Result<f64> {
        let critical = self.critical_coupling();
        match user {
            Some(c) => {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(Error::InvalidDomain(format!("coupling must be positive, got {c}")));
                }
                if c >= critical {
                    let (r0, r1) = self.radii();
                    return Err(Error::CouplingTooLarge { c, r0, r1, critical });
                }
                Ok(c)
            }
            None => Ok(0.5 * critical),
        }
    }

    /// Admissible horizon window (lower, upper) for the given coupling:
    /// both 2 R1 < c T (waves from x0 cross G before T) and
    /// c^2 T^2 < 4 (4 + 5c) R0^2 / (9 c) must hold.
    pub fn admissible_time_window(&self, c: f64) -> Result<(f64, f64)> {
        if !(c > 0.0) {
            return Err(Error::InvalidDomain(format!("coupling must be positive, got {c}")));
        }
        let (r0, r1) = self.radii();
        let lower = (2.0 * r1 / c).max(2.0 * r1);
        let upper = 2.0 * ((4.0 + 5.0 * c) * r0 * r0 / (9.0 * c * c * c)).sqrt();
        if lower >= upper {
            return Err(Error::EmptyTimeWindow { lower, upper });
        }
        Ok((lower, upper))
    }

    /// Full analytic summary for a selected (or defaulted) coupling.
    pub fn report(&self, user_c: Option<f64>) -> Result<GeometryReport> {
        let (r0, r1) = self.radii();
        let c = self.select_c(user_c)?;
        let t_window = self.admissible_time_window(c)?;
        Ok(GeometryReport { r0, r1, c_critical: self.critical_coupling(), c, t_window })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(a: f64, b: f64, x0: f64) -> DomainSpec {
        DomainSpec::new(Shape::Interval { a, b }, [x0, 0.0]).unwrap()
    }

    /// Brute-force radii by scanning a fine grid over the closure of G.
    fn brute_force_radii(spec: &DomainSpec, h: f64) -> (f64, f64) {
        let mut min2 = f64::INFINITY;
        let mut max2 = 0.0f64;
        let mut visit = |p: Point| {
            let d2 = dist2(p, spec.x0);
            min2 = min2.min(d2);
            max2 = max2.max(d2);
        };
        match spec.shape {
            Shape::Interval { a, b } => {
                let n = ((b - a) / h).ceil() as usize;
                for i in 0..=n {
                    visit([a + (b - a) * i as f64 / n as f64, 0.0]);
                }
            }
            Shape::Rectangle { a, b } => {
                let nx = ((b[0] - a[0]) / h).ceil() as usize;
                let ny = ((b[1] - a[1]) / h).ceil() as usize;
                for i in 0..=nx {
                    for j in 0..=ny {
                        visit([
                            a[0] + (b[0] - a[0]) * i as f64 / nx as f64,
                            a[1] + (b[1] - a[1]) * j as f64 / ny as f64,
                        ]);
                    }
                }
            }
            Shape::Disk { center, radius } => {
                let n = (2.0 * radius / h).ceil() as usize;
                for i in 0..=n {
                    for j in 0..=n {
                        let p = [
                            center[0] - radius + 2.0 * radius * i as f64 / n as f64,
                            center[1] - radius + 2.0 * radius * j as f64 / n as f64,
                        ];
                        if dist2(p, center).sqrt() <= radius {
                            visit(p);
                        }
                    }
                }
            }
        }
        (min2.sqrt(), max2.sqrt())
    }

    #[test]
    fn interval_radii_are_endpoint_distances() {
        let spec = interval(1.0, 2.0, 0.0);
        assert_eq!(spec.radii(), (1.0, 2.0));
    }

    #[test]
    fn square_radii_match_nearest_face_and_farthest_corner() {
        let spec =
            DomainSpec::new(Shape::Rectangle { a: [0.0, 0.0], b: [1.0, 1.0] }, [-1.0, 0.0])
                .unwrap();
        let (r0, r1) = spec.radii();
        assert!((r0 - 1.0).abs() < 1e-15);
        assert!((r1 - 5.0f64.sqrt()).abs() < 1e-15);
        // Independent check: scan the closure on a fine lattice.
        let (b0, b1) = brute_force_radii(&spec, 1e-3);
        assert!((r0 - b0).abs() < 1e-3 && (r1 - b1).abs() < 1e-3);
    }

    #[test]
    fn disk_radii_are_center_distance_plus_minus_radius() {
        let spec =
            DomainSpec::new(Shape::Disk { center: [3.0, 0.0], radius: 1.0 }, [0.0, 0.0]).unwrap();
        assert_eq!(spec.radii(), (2.0, 4.0));
        let (b0, b1) = brute_force_radii(&spec, 1e-3);
        assert!((2.0 - b0).abs() < 2e-3 && (4.0 - b1).abs() < 2e-3);
    }

    #[test]
    fn reference_point_on_or_inside_closure_is_rejected() {
        assert!(DomainSpec::new(Shape::Interval { a: 1.0, b: 2.0 }, [1.0, 0.0]).is_err());
        assert!(DomainSpec::new(Shape::Interval { a: 1.0, b: 2.0 }, [1.5, 0.0]).is_err());
        assert!(
            DomainSpec::new(Shape::Rectangle { a: [0.0, 0.0], b: [1.0, 1.0] }, [0.5, 0.5])
                .is_err()
        );
        assert!(DomainSpec::new(Shape::Disk { center: [0.0, 0.0], radius: 2.0 }, [1.0, 0.0])
            .is_err());
    }

    #[test]
    fn degenerate_shapes_are_rejected() {
        assert!(DomainSpec::new(Shape::Interval { a: 2.0, b: 1.0 }, [0.0, 0.0]).is_err());
        assert!(DomainSpec::new(Shape::Interval { a: 1.0, b: 1.0 }, [0.0, 0.0]).is_err());
        assert!(DomainSpec::new(Shape::Disk { center: [0.0, 0.0], radius: 0.0 }, [5.0, 0.0])
            .is_err());
    }

    #[test]
    fn interval_observed_part_is_the_far_endpoint() {
        let spec = interval(1.0, 2.0, 0.0);
        let nodes = spec.observation_boundary(0.1).unwrap();
        assert_eq!(nodes.len(), 2);
        // At x = 1 the outward normal is -1 and (x - x0) nu = -1 < 0.
        assert!(!nodes[0].observed);
        // At x = 2 the outward normal is +1 and (x - x0) nu = +2 > 0.
        assert!(nodes[1].observed);
    }

    #[test]
    fn square_observed_faces_follow_the_normal_dot_sign() {
        // x0 left of the unit square at mid height: every face except the
        // near (left) one has (x - x0) . nu > 0. On the bottom face the dot
        // product is (0 - 0.5)(-1) = +0.5, symmetric to the top face.
        let spec =
            DomainSpec::new(Shape::Rectangle { a: [0.0, 0.0], b: [1.0, 1.0] }, [-1.0, 0.5])
                .unwrap();
        let nodes = spec.observation_boundary(0.25).unwrap();
        for n in &nodes {
            let expect = if n.nu == [-1.0, 0.0] { false } else { true };
            assert_eq!(n.observed, expect, "node {:?}", n);
        }
    }

    #[test]
    fn tangent_boundary_points_are_excluded() {
        // x0 level with the bottom face: there (x - x0) . nu == 0 exactly,
        // and the strict inequality keeps the face out of Gamma0.
        let spec =
            DomainSpec::new(Shape::Rectangle { a: [0.0, 0.0], b: [1.0, 1.0] }, [-1.0, 0.0])
                .unwrap();
        for n in spec.observation_boundary(0.25).unwrap() {
            if n.nu == [0.0, -1.0] {
                assert!(!n.observed);
            }
        }
    }

    #[test]
    fn boundary_weights_sum_to_the_perimeter() {
        let spec =
            DomainSpec::new(Shape::Rectangle { a: [0.0, 0.0], b: [2.0, 1.0] }, [-1.0, 0.5])
                .unwrap();
        let total: f64 = spec.observation_boundary(0.1).unwrap().iter().map(|n| n.weight).sum();
        assert!((total - 6.0).abs() < 1e-12);

        let disk =
            DomainSpec::new(Shape::Disk { center: [0.0, 0.0], radius: 2.0 }, [5.0, 0.0]).unwrap();
        let total: f64 = disk.observation_boundary(0.05).unwrap().iter().map(|n| n.weight).sum();
        assert!((total - std::f64::consts::TAU * 2.0).abs() < 1e-9);
    }

    #[test]
    fn critical_coupling_for_unit_interval_pair() {
        let spec = interval(1.0, 2.0, 0.0);
        assert!((spec.critical_coupling() - 4.0 / 31.0).abs() < 1e-15);
        // c = 0.1 < 4/31 is accepted unchanged.
        assert_eq!(spec.select_c(Some(0.1)).unwrap(), 0.1);
        // c = 0.25 > 4/31 is rejected and the error names the wall.
        match spec.select_c(Some(0.25)) {
            Err(Error::CouplingTooLarge { critical, .. }) => {
                assert!((critical - 4.0 / 31.0).abs() < 1e-15)
            }
            other => panic!("expected CouplingTooLarge, got {other:?}"),
        }
        // Default is the midpoint of the feasible range.
        assert!((spec.select_c(None).unwrap() - 2.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn time_window_for_the_reference_configuration() {
        let spec = interval(1.0, 2.0, 0.0);
        let (lo, hi) = spec.admissible_time_window(0.1).unwrap();
        assert!((lo - 40.0).abs() < 1e-12);
        assert!((hi - 2000.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn near_equal_radii_give_a_narrow_but_open_window() {
        // x0 = 0 next to (1, 1.0001) gives (R0, R1) = (1, 1.0001).
        let spec = interval(1.0, 1.0001, 0.0);
        let (r0, r1) = spec.radii();
        assert!((r0 - 1.0).abs() < 1e-14 && (r1 - 1.0001).abs() < 1e-14);
        let (lo, hi) = spec.admissible_time_window(0.5).unwrap();
        assert!((lo - 4.0004).abs() < 1e-12);
        // Direct evaluation of 2 sqrt((4 + 5c) R0^2 / (9 c^3)) at c = 1/2.
        let expect = 2.0 * (6.5f64 / (9.0 * 0.125)).sqrt();
        assert!((hi - expect).abs() < 1e-12);
        assert!((hi - 4.807401700618654).abs() < 1e-12);
    }

    #[test]
    fn critical_coupling_empties_the_window() {
        let spec = interval(1.0, 2.0, 0.0);
        let c = spec.critical_coupling();
        // At the wall itself rounding may leave a sliver; just beyond it the
        // window must be gone and at the wall any sliver is O(eps).
        match spec.admissible_time_window(c * (1.0 + 1e-12)) {
            Err(Error::EmptyTimeWindow { lower, upper }) => assert!(lower >= upper),
            other => panic!("expected EmptyTimeWindow, got {other:?}"),
        }
        match spec.admissible_time_window(c) {
            Err(Error::EmptyTimeWindow { lower, upper }) => {
                assert!((lower - upper).abs() < 1e-9 * lower)
            }
            Ok((lo, hi)) => assert!(hi - lo < 1e-9 * lo),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_bounds_are_sharp_against_the_defining_inequalities() {
        let spec = interval(1.0, 2.0, 0.0);
        let c = 0.1;
        let (r0, r1) = spec.radii();
        let (lo, hi) = spec.admissible_time_window(c).unwrap();
        let lower_ok = |t: f64| c * t > 2.0 * r1;
        let upper_ok = |t: f64| c * c * t * t < 4.0 * (4.0 + 5.0 * c) * r0 * r0 / (9.0 * c);
        assert!(lower_ok(lo * (1.0 + 1e-9)) && !lower_ok(lo * (1.0 - 1e-9)));
        assert!(upper_ok(hi * (1.0 - 1e-9)) && !upper_ok(hi * (1.0 + 1e-9)));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_spec() -> impl Strategy<Value = DomainSpec> {
            let interval = (0.0f64..4.0, 0.1f64..4.0, 0.05f64..3.0, proptest::bool::ANY).prop_map(
                |(a, len, gap, left)| {
                    let x0 = if left { a - gap } else { a + len + gap };
                    DomainSpec::new(Shape::Interval { a, b: a + len }, [x0, 0.0]).unwrap()
                },
            );
            let rect = (0.1f64..3.0, 0.1f64..3.0, 0.05f64..3.0, -1.0f64..2.0).prop_map(
                |(w, h, gap, yoff)| {
                    DomainSpec::new(
                        Shape::Rectangle { a: [0.0, 0.0], b: [w, h] },
                        [-gap, yoff * h],
                    )
                    .unwrap()
                },
            );
            let disk = (0.1f64..2.0, 0.05f64..3.0, 0.0f64..std::f64::consts::TAU).prop_map(
                |(r, gap, phi)| {
                    let d = r + gap;
                    DomainSpec::new(
                        Shape::Disk { center: [0.0, 0.0], radius: r },
                        [d * phi.cos(), d * phi.sin()],
                    )
                    .unwrap()
                },
            );
            prop_oneof![interval, rect, disk]
        }

        proptest! {
            #[test]
            fn radii_are_ordered_and_match_brute_force(spec in arb_spec()) {
                let (r0, r1) = spec.radii();
                prop_assert!(r0 > 0.0);
                prop_assert!(r0 <= r1);
                let (b0, b1) = brute_force_radii(&spec, 5e-3);
                let scale = r1.max(1.0);
                prop_assert!((r0 - b0).abs() < 2e-2 * scale);
                prop_assert!((r1 - b1).abs() < 2e-2 * scale);
            }

            #[test]
            fn selected_coupling_always_leaves_an_open_window(spec in arb_spec()) {
                let c = spec.select_c(None).unwrap();
                let (lo, hi) = spec.admissible_time_window(c).unwrap();
                prop_assert!(lo < hi);
                prop_assert!(lo >= 2.0 * spec.radii().1);
            }

            #[test]
            fn observed_mask_is_strictly_positive_dot(spec in arb_spec()) {
                for n in spec.observation_boundary(0.05).unwrap() {
                    let dot = (n.x[0] - spec.x0[0]) * n.nu[0] + (n.x[1] - spec.x0[1]) * n.nu[1];
                    prop_assert_eq!(n.observed, dot > 0.0);
                }
            }
        }
    }
}
