//! Uniform tensor grids on intervals and rectangles.
//!
//! Nodes include the Dirichlet boundary; fields are flat `Vec<f64>` in
//! row-major order (x fastest). Disks are accepted by the geometry layer
//! for reporting but have no grid, so construction rejects them.

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Point, Shape};
use crate::numerics::trapezoid_weight;

#[derive(Debug, Clone)]
pub struct UniformGrid {
    dims: usize,
    /// Cells per axis; `cells[1] == 0` in one dimension.
    cells: [usize; 2],
    origin: Point,
    h: [f64; 2],
}

/// Boundary node with outward normal and a quadrature weight for surface
/// sums. Rectangle corners carry no node: the normal is ambiguous there and
/// the face-interior trapezoid rule does not need them.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryGridNode {
    pub idx: usize,
    pub x: Point,
    pub nu: Point,
    pub weight: f64,
}

impl UniformGrid {
    /// Grid with `nx` cells along the first axis; rectangles get a second
    /// axis with cells chosen to keep the aspect ratio near one.
    pub fn new(domain: &DomainSpec, nx: usize) -> Result<Self> {
        match domain.shape {
            Shape::Interval { .. } => Self::with_cells(domain, nx, 0),
            Shape::Rectangle { a, b } => {
                let lx = b[0] - a[0];
                let ly = b[1] - a[1];
                let ny = ((nx as f64 * ly / lx).round() as usize).max(1);
                Self::with_cells(domain, nx, ny)
            }
            Shape::Disk { .. } => Err(Error::Unsupported(
                "disk domains are report-only; no finite-difference grid".into(),
            )),
        }
    }

    pub fn with_cells(domain: &DomainSpec, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 {
            return Err(Error::InvalidDomain(format!("need at least 2 cells per axis, got {nx}")));
        }
        match domain.shape {
            Shape::Interval { a, b } => Ok(UniformGrid {
                dims: 1,
                cells: [nx, 0],
                origin: [a, 0.0],
                h: [(b - a) / nx as f64, 0.0],
            }),
            Shape::Rectangle { a, b } => {
                if ny < 2 {
                    return Err(Error::InvalidDomain(format!(
                        "need at least 2 cells per axis, got ny = {ny}"
                    )));
                }
                Ok(UniformGrid {
                    dims: 2,
                    cells: [nx, ny],
                    origin: a,
                    h: [(b[0] - a[0]) / nx as f64, (b[1] - a[1]) / ny as f64],
                })
            }
            Shape::Disk { .. } => Err(Error::Unsupported(
                "disk domains are report-only; no finite-difference grid".into(),
            )),
        }
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    /// Smallest mesh width, the one that controls the explicit time step.
    #[inline]
    pub fn h_min(&self) -> f64 {
        if self.dims == 1 {
            self.h[0]
        } else {
            self.h[0].min(self.h[1])
        }
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.h[0]
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.h[1]
    }

    pub fn num_nodes(&self) -> usize {
        if self.dims == 1 {
            self.cells[0] + 1
        } else {
            (self.cells[0] + 1) * (self.cells[1] + 1)
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.cells[0] + 1) + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        let w = self.cells[0] + 1;
        (idx % w, idx / w)
    }

    pub fn node(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        [self.origin[0] + i as f64 * self.h[0], self.origin[1] + j as f64 * self.h[1]]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.coords(idx);
        if self.dims == 1 {
            i == 0 || i == self.cells[0]
        } else {
            i == 0 || i == self.cells[0] || j == 0 || j == self.cells[1]
        }
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if self.dims == 1 {
            out.extend(1..self.cells[0]);
        } else {
            for j in 1..self.cells[1] {
                for i in 1..self.cells[0] {
                    out.push(self.index(i, j));
                }
            }
        }
        out
    }

    /// Evaluate a pointwise function on every node.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.num_nodes()).map(|idx| f(self.node(idx))).collect()
    }

    /// Zero the Dirichlet boundary in place.
    pub fn project_dirichlet(&self, field: &mut [f64]) {
        for idx in 0..field.len() {
            if self.is_boundary(idx) {
                field[idx] = 0.0;
            }
        }
    }

    /// Five-point (three-point in one dimension) Laplacian at an interior
    /// node.
    #[inline]
    pub fn laplacian(&self, field: &[f64], idx: usize) -> f64 {
        let (i, j) = self.coords(idx);
        debug_assert!(!self.is_boundary(idx));
        let w = self.cells[0] + 1;
        let hx2 = self.h[0] * self.h[0];
        let mut lap = (field[idx - 1] - 2.0 * field[idx] + field[idx + 1]) / hx2;
        if self.dims == 2 {
            let hy2 = self.h[1] * self.h[1];
            lap += (field[idx - w] - 2.0 * field[idx] + field[idx + w]) / hy2;
        }
        let _ = (i, j);
        lap
    }

    /// Centered gradient at an interior node.
    #[inline]
    pub fn gradient(&self, field: &[f64], idx: usize) -> Point {
        debug_assert!(!self.is_boundary(idx));
        let w = self.cells[0] + 1;
        let gx = (field[idx + 1] - field[idx - 1]) / (2.0 * self.h[0]);
        let gy = if self.dims == 2 {
            (field[idx + w] - field[idx - w]) / (2.0 * self.h[1])
        } else {
            0.0
        };
        [gx, gy]
    }

    /// Trapezoid quadrature weight of a node (product rule in 2-D).
    pub fn quad_weight(&self, idx: usize) -> f64 {
        let (i, j) = self.coords(idx);
        let wx = trapezoid_weight(i, self.cells[0], self.h[0]);
        if self.dims == 1 {
            wx
        } else {
            wx * trapezoid_weight(j, self.cells[1], self.h[1])
        }
    }

    /// Trapezoid sum of a nodal field over the domain.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        let terms: Vec<f64> =
            (0..field.len()).map(|idx| self.quad_weight(idx) * field[idx]).collect();
        crate::numerics::pairwise_sum(&terms)
    }

    /// Full Dirichlet boundary with outward normals and surface quadrature
    /// weights. Interval endpoints carry weight 1 (counting measure on a
    /// two-point boundary); rectangle faces use the trapezoid rule on the
    /// face interior, corners excluded.
    pub fn boundary_nodes(&self) -> Vec<BoundaryGridNode> {
        let mut out = Vec::new();
        if self.dims == 1 {
            let last = self.cells[0];
            out.push(BoundaryGridNode {
                idx: 0,
                x: self.node(0),
                nu: [-1.0, 0.0],
                weight: 1.0,
            });
            out.push(BoundaryGridNode {
                idx: last,
                x: self.node(last),
                nu: [1.0, 0.0],
                weight: 1.0,
            });
            return out;
        }
        let (nx, ny) = (self.cells[0], self.cells[1]);
        for i in 1..nx {
            for (j, ny_sign) in [(0usize, -1.0), (ny, 1.0)] {
                let idx = self.index(i, j);
                out.push(BoundaryGridNode {
                    idx,
                    x: self.node(idx),
                    nu: [0.0, ny_sign],
                    weight: self.h[0],
                });
            }
        }
        for j in 1..ny {
            for (i, nx_sign) in [(0usize, -1.0), (nx, 1.0)] {
                let idx = self.index(i, j);
                out.push(BoundaryGridNode {
                    idx,
                    x: self.node(idx),
                    nu: [nx_sign, 0.0],
                    weight: self.h[1],
                });
            }
        }
        out
    }

    /// Outward normal derivative at a boundary node by the second-order
    /// one-sided three-point formula along the inward grid line.
    pub fn normal_derivative(&self, field: &[f64], node: &BoundaryGridNode) -> f64 {
        let (i, j) = self.coords(node.idx);
        let w = self.cells[0] + 1;
        let (stride, h) = if node.nu[0] != 0.0 {
            (if i == 0 { 1isize } else { -1 }, self.h[0])
        } else {
            (if j == 0 { w as isize } else { -(w as isize) }, self.h[1])
        };
        let b = field[node.idx];
        let in1 = field[(node.idx as isize + stride) as usize];
        let in2 = field[(node.idx as isize + 2 * stride) as usize];
        // Inward derivative is (-3b + 4 in1 - in2) / 2h; outward flips sign.
        (3.0 * b - 4.0 * in1 + in2) / (2.0 * h)
    }
}
