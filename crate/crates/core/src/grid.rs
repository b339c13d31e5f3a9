//! Structured rectangular grids: node classification against the problem
//! geometry and bilinear interpolation of node fields.

use crate::error::{Error, Result};

/// Bounding box and node counts of a rectangular lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Node count along x (not cells).
    pub nx: usize,
    /// Node count along y.
    pub ny: usize,
}

impl GridSpec {
    /// Square lattice on [-1,1]^2 with `cells` cells per side, the layout used
    /// by every built-in problem. `cells` cells means `cells + 1` nodes.
    pub fn unit_square(cells: usize) -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
            nx: cells + 1,
            ny: cells + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.x_min < self.x_max) || !(self.y_min < self.y_max) {
            return Err(Error::InvalidGrid(
                "bounding box must have positive extent".into(),
            ));
        }
        let dx = (self.x_max - self.x_min) / (self.nx - 1) as f64;
        let dy = (self.y_max - self.y_min) / (self.ny - 1) as f64;
        if !dx.is_finite() || !dy.is_finite() || dx <= 0.0 || dy <= 0.0 {
            return Err(Error::InvalidGrid("degenerate spacing".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }
}

/// Domain and exit-set geometry. The bounding box always coincides with the
/// grid spec; the geometry decides which nodes carry exit data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainGeometry {
    /// Open box, exit set = the whole outer edge.
    SquareBoundary,
    /// Horizontal strip: exit set = the two vertical edges only; the top and
    /// bottom rows are ordinary interior nodes.
    VerticalEdges,
    /// Box minus a closed center ball; exit set = the ball. Nodes inside the
    /// closed ball carry exit data.
    BallTarget { rho: f64 },
}

/// Classification of one lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Node where the fixed-point operator updates the value.
    Interior,
    /// Node on the exit set (or its grid-resolution thickening): carries the
    /// exit cost.
    Boundary,
    /// Node outside the closed domain: holds the sentinel value.
    Ghost,
}

/// Immutable lattice: spec, spacings and per-node classes. Safe to share
/// across threads; interpolation is a pure function of (grid, field, point).
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub geometry: DomainGeometry,
    classes: Vec<NodeClass>,
    dx: f64,
    dy: f64,
    n_interior: usize,
    n_boundary: usize,
    n_ghost: usize,
}

/// Builds the lattice and classifies every node against the geometry.
///
/// Nodes on/inside the exit set are `Boundary` (curve targets are thickened
/// to half a cell so a zero-measure curve still lands on nodes); everything
/// else inside the closed domain is `Interior`.
pub fn build_grid(spec: GridSpec, geometry: DomainGeometry) -> Result<Grid> {
    spec.validate()?;
    if let DomainGeometry::BallTarget { rho } = geometry {
        if rho <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "ball target radius must be positive, got {rho}"
            )));
        }
    }
    let dx = spec.dx();
    let dy = spec.dy();
    let edge_tol = 0.5 * dx.max(dy);
    let mut classes = Vec::with_capacity(spec.node_count());
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let x = spec.x_min + i as f64 * dx;
            let y = spec.y_min + j as f64 * dy;
            let class = match geometry {
                DomainGeometry::SquareBoundary => {
                    let on_edge = i == 0 || i == spec.nx - 1 || j == 0 || j == spec.ny - 1;
                    // half-cell thickening covers only the edge rows themselves
                    let _ = edge_tol;
                    if on_edge {
                        NodeClass::Boundary
                    } else {
                        NodeClass::Interior
                    }
                }
                DomainGeometry::VerticalEdges => {
                    if i == 0 || i == spec.nx - 1 {
                        NodeClass::Boundary
                    } else {
                        NodeClass::Interior
                    }
                }
                DomainGeometry::BallTarget { rho } => {
                    if x * x + y * y <= rho * rho {
                        NodeClass::Boundary
                    } else {
                        NodeClass::Interior
                    }
                }
            };
            classes.push(class);
        }
    }
    let n_interior = classes.iter().filter(|c| **c == NodeClass::Interior).count();
    let n_boundary = classes.iter().filter(|c| **c == NodeClass::Boundary).count();
    let n_ghost = classes.len() - n_interior - n_boundary;
    if n_boundary == 0 {
        return Err(Error::NoBoundaryNodes);
    }
    Ok(Grid {
        spec,
        geometry,
        classes,
        dx,
        dy,
        n_interior,
        n_boundary,
        n_ghost,
    })
}

impl Grid {
    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn node_count(&self) -> usize {
        self.classes.len()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    /// The scalar mesh size used in thresholds: the larger of the two axis
    /// spacings.
    pub fn dx_max(&self) -> f64 {
        self.dx.max(self.dy)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.spec.nx && j < self.spec.ny);
        j * self.spec.nx + i
    }

    #[inline]
    pub fn ij(&self, index: usize) -> (usize, usize) {
        (index % self.spec.nx, index / self.spec.nx)
    }

    #[inline]
    pub fn position(&self, index: usize) -> [f64; 2] {
        let (i, j) = self.ij(index);
        [
            self.spec.x_min + i as f64 * self.dx,
            self.spec.y_min + j as f64 * self.dy,
        ]
    }

    #[inline]
    pub fn class(&self, index: usize) -> NodeClass {
        self.classes[index]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn interior_count(&self) -> usize {
        self.n_interior
    }

    pub fn boundary_count(&self) -> usize {
        self.n_boundary
    }

    pub fn ghost_count(&self) -> usize {
        self.n_ghost
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == NodeClass::Boundary)
            .map(|(i, _)| i)
    }

    #[inline]
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.spec.x_min
            && p[0] <= self.spec.x_max
            && p[1] >= self.spec.y_min
            && p[1] <= self.spec.y_max
    }

    /// Pulls a point within rounding distance of the box back onto it, so
    /// characteristic feet that hit the boundary exactly are not rejected for
    /// a last-bit overshoot. Returns `None` for genuinely exterior points.
    #[inline]
    pub(crate) fn clamp_into_box(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let tol_x = (self.spec.x_max - self.spec.x_min) * 1e-12;
        let tol_y = (self.spec.y_max - self.spec.y_min) * 1e-12;
        if p[0] < self.spec.x_min - tol_x
            || p[0] > self.spec.x_max + tol_x
            || p[1] < self.spec.y_min - tol_y
            || p[1] > self.spec.y_max + tol_y
        {
            return None;
        }
        Some([
            p[0].clamp(self.spec.x_min, self.spec.x_max),
            p[1].clamp(self.spec.y_min, self.spec.y_max),
        ])
    }

    /// Bilinear interpolation of `values` at `p`. Errors if `p` is outside
    /// the bounding box; never extrapolates.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> Result<f64> {
        if values.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                found: values.len(),
            });
        }
        if !self.contains(p) {
            return Err(Error::OutOfDomain(p[0], p[1]));
        }
        Ok(self.interpolate_unchecked(values, p))
    }

    /// Interpolation fast path for callers that already guarantee `p` lies in
    /// the box and `values` matches the grid.
    #[inline]
    pub(crate) fn interpolate_unchecked(&self, values: &[f64], p: [f64; 2]) -> f64 {
        let fx = (p[0] - self.spec.x_min) / self.dx;
        let fy = (p[1] - self.spec.y_min) / self.dy;
        let mut ci = fx as usize;
        let mut cj = fy as usize;
        if ci >= self.spec.nx - 1 {
            ci = self.spec.nx - 2;
        }
        if cj >= self.spec.ny - 1 {
            cj = self.spec.ny - 2;
        }
        let tx = fx - ci as f64;
        let ty = fy - cj as f64;
        let base = cj * self.spec.nx + ci;
        let v00 = values[base];
        let v10 = values[base + 1];
        let v01 = values[base + self.spec.nx];
        let v11 = values[base + self.spec.nx + 1];
        let a = v00 + tx * (v10 - v00);
        let b = v01 + tx * (v11 - v01);
        a + ty * (b - a)
    }
}
