//! Semi-Lagrangian fixed-point operator and masked value iteration.
//!
//! One operator application maps a node field V to
//!
//! ```text
//! T(V)(x) = max over b of min over a of { h l(x,a,b) + I[V](x + h f(x,a,b)) / (1 + lambda h) }
//! ```
//!
//! at interior nodes, reproduces the exit cost at target nodes and holds the
//! sentinel at ghost nodes. Feet landing outside the bounding box evaluate to
//! the sentinel, so controls that leave the box are never selected.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, NodeClass};
use crate::problems::{ControlGrid, ProblemDef};

/// One scalar value per grid node.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub values: Vec<f64>,
    /// Which problem / boundary cost produced the field.
    pub tag: String,
}

impl ValueField {
    pub fn new(values: Vec<f64>, tag: impl Into<String>) -> Self {
        Self {
            values,
            tag: tag.into(),
        }
    }

    pub fn constant(grid: &Grid, value: f64, tag: impl Into<String>) -> Self {
        Self::new(vec![value; grid.node_count()], tag)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How the fictitious time step is derived from the mesh size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// h = dx (the usual choice for games).
    Dx,
    /// h = dx^(2/3), balancing the two error terms of the optimal-control
    /// estimate.
    DxTwoThirds,
}

impl StepMode {
    pub fn step(&self, dx: f64) -> f64 {
        match self {
            StepMode::Dx => dx,
            StepMode::DxTwoThirds => dx.powf(2.0 / 3.0),
        }
    }
}

impl std::str::FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "dx" => Ok(StepMode::Dx),
            "dx23" => Ok(StepMode::DxTwoThirds),
            other => Err(Error::InvalidArgs(format!(
                "unknown step mode `{other}` (expected dx or dx23)"
            ))),
        }
    }
}

pub const DEFAULT_SENTINEL: f64 = 1e6;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Iteration parameters.
#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    /// Fictitious time step.
    pub h: f64,
    /// Stopping tolerance on the sup-norm residual between iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Large finite stand-in for +infinity at ghost nodes and out-of-box
    /// feet. Must comfortably exceed any attainable value — an order of
    /// magnitude above `max l * diameter + max |g| + 1 / max(lambda, h)`;
    /// the default of 1e6 towers over every built-in problem's range.
    pub sentinel: f64,
}

impl SolveParams {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            sentinel: DEFAULT_SENTINEL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidParam(format!("h must be positive: {}", self.h)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tol must be positive: {}",
                self.tol
            )));
        }
        if !(self.sentinel > 0.0) || !self.sentinel.is_finite() {
            return Err(Error::InvalidParam("sentinel must be finite positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one value iteration.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub wall_time_secs: f64,
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn node_update(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    prev: &[f64],
    x: [f64; 2],
    h: f64,
    inv_discount: f64,
    sentinel: f64,
) -> (f64, bool) {
    let mut best_b = f64::NEG_INFINITY;
    let mut any_foot_inside = false;
    for &b in &controls.b {
        let mut best_a = f64::INFINITY;
        for &a in &controls.a {
            let f = problem.dynamics.eval(x, a, b);
            let foot = [x[0] + h * f[0], x[1] + h * f[1]];
            let interp = if let Some(foot) = grid.clamp_into_box(foot) {
                any_foot_inside = true;
                grid.interpolate_unchecked(prev, foot)
            } else {
                sentinel
            };
            let cand = h * problem.running_cost.eval(x, a, b) + inv_discount * interp;
            if cand < best_a {
                best_a = cand;
            }
        }
        if best_a > best_b {
            best_b = best_a;
        }
    }
    // values never exceed the sentinel; keeps unreached nodes stationary
    (best_b.min(sentinel), any_foot_inside)
}

/// Applies the operator once. `mask` restricts the update to member nodes;
/// non-members are copied unchanged. Ghost nodes always hold the sentinel and
/// target nodes in the mask always hold `boundary_cost`.
///
/// The update is simultaneous (reads only `field`), so the result does not
/// depend on node order or worker count.
#[allow(clippy::too_many_arguments)]
pub fn apply_operator(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    field: &ValueField,
    h: f64,
    mask: Option<&[bool]>,
    boundary_cost: &(dyn Fn([f64; 2]) -> f64 + Sync),
    sentinel: f64,
) -> Result<ValueField> {
    if field.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: field.len(),
        });
    }
    if let Some(m) = mask {
        if m.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                found: m.len(),
            });
        }
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParam(format!("h must be positive: {h}")));
    }
    let inv_discount = 1.0 / (1.0 + problem.lambda * h);
    let prev = &field.values[..];
    let results: Vec<(f64, bool)> = (0..grid.node_count())
        .into_par_iter()
        .map(|idx| {
            if mask.is_some_and(|m| !m[idx]) {
                return (prev[idx], true);
            }
            match grid.class(idx) {
                NodeClass::Ghost => (sentinel, true),
                NodeClass::Boundary => (boundary_cost(grid.position(idx)), true),
                NodeClass::Interior => node_update(
                    problem,
                    grid,
                    controls,
                    prev,
                    grid.position(idx),
                    h,
                    inv_discount,
                    sentinel,
                ),
            }
        })
        .collect();

    let mut updated_interior = 0usize;
    let mut all_out = 0usize;
    for (idx, (_, inside)) in results.iter().enumerate() {
        let in_mask = mask.is_none_or(|m| m[idx]);
        if in_mask && grid.class(idx) == NodeClass::Interior {
            updated_interior += 1;
            if !inside {
                all_out += 1;
            }
        }
    }
    // a few outward-flow nodes are normal (they are simply unreachable); the
    // step is broken only when no updated node kept any foot in the box
    if updated_interior > 0 && all_out == updated_interior {
        return Err(Error::StepTooLarge { h });
    }

    Ok(ValueField::new(
        results.into_iter().map(|(v, _)| v).collect(),
        field.tag.clone(),
    ))
}

/// Builds the starting iterate: exit cost on target nodes inside the mask,
/// sentinel everywhere else.
pub fn initial_field(
    grid: &Grid,
    mask: Option<&[bool]>,
    boundary_cost: &(dyn Fn([f64; 2]) -> f64 + Sync),
    sentinel: f64,
    tag: impl Into<String>,
) -> ValueField {
    let mut values = vec![sentinel; grid.node_count()];
    for idx in grid.boundary_nodes() {
        if mask.is_none_or(|m| m[idx]) {
            values[idx] = boundary_cost(grid.position(idx));
        }
    }
    ValueField::new(values, tag)
}

/// Value iteration to the fixed point: iterates until the sup-norm residual
/// drops to `params.tol` or `params.max_iter` is reached. Non-convergence is
/// reported in the result, not hidden.
///
/// Exit, ghost and out-of-mask values never change between iterations, so
/// the sweep is double-buffered and touches only the updatable nodes; the
/// iterates are bit-identical to repeated `apply_operator` calls.
#[allow(clippy::too_many_arguments)]
pub fn solve(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    params: &SolveParams,
    mask: Option<&[bool]>,
    boundary_cost: &(dyn Fn([f64; 2]) -> f64 + Sync),
    tag: impl Into<String>,
) -> Result<(ValueField, SolveReport)> {
    solve_impl(
        problem,
        grid,
        controls,
        params,
        mask,
        boundary_cost,
        tag,
        true,
    )
}

/// Same iteration with the row sweep kept on the calling thread. For callers
/// that already run one solve per worker (the per-part stages); the iterates
/// are bit-identical to [`solve`].
#[allow(clippy::too_many_arguments)]
pub fn solve_serial_rows(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    params: &SolveParams,
    mask: Option<&[bool]>,
    boundary_cost: &(dyn Fn([f64; 2]) -> f64 + Sync),
    tag: impl Into<String>,
) -> Result<(ValueField, SolveReport)> {
    solve_impl(
        problem,
        grid,
        controls,
        params,
        mask,
        boundary_cost,
        tag,
        false,
    )
}

#[allow(clippy::too_many_arguments)]
fn solve_impl(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    params: &SolveParams,
    mask: Option<&[bool]>,
    boundary_cost: &(dyn Fn([f64; 2]) -> f64 + Sync),
    tag: impl Into<String>,
    row_parallel: bool,
) -> Result<(ValueField, SolveReport)> {
    params.validate()?;
    if let Some(m) = mask {
        if m.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                found: m.len(),
            });
        }
    }
    let start = Instant::now();
    let field = initial_field(grid, mask, boundary_cost, params.sentinel, tag);
    let mut current = field.values;
    let mut next = current.clone();

    let updatable: Vec<bool> = (0..grid.node_count())
        .map(|idx| {
            grid.class(idx) == NodeClass::Interior && mask.is_none_or(|m| m[idx])
        })
        .collect();
    let active_total: usize = updatable.iter().filter(|u| **u).count();
    let nx = grid.nx();
    let inv_discount = 1.0 / (1.0 + problem.lambda * params.h);

    #[allow(clippy::needless_range_loop)]
    let sweep_row = |j: usize, row: &mut [f64], prev: &[f64]| -> (f64, usize) {
        let mut local_max = 0.0f64;
        let mut local_out = 0usize;
        let base = j * nx;
        for i in 0..nx {
            let idx = base + i;
            if !updatable[idx] {
                continue;
            }
            let (v, inside) = node_update(
                problem,
                grid,
                controls,
                prev,
                grid.position(idx),
                params.h,
                inv_discount,
                params.sentinel,
            );
            if !inside {
                local_out += 1;
            }
            let d = (v - prev[idx]).abs();
            if d > local_max {
                local_max = d;
            }
            row[i] = v;
        }
        (local_max, local_out)
    };

    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    while iterations < params.max_iter {
        let prev = &current[..];
        let (row_max, all_out_count) = if row_parallel {
            next.par_chunks_mut(nx)
                .enumerate()
                .map(|(j, row)| sweep_row(j, row, prev))
                .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1))
        } else {
            next.chunks_mut(nx)
                .enumerate()
                .map(|(j, row)| sweep_row(j, row, prev))
                .fold((0.0f64, 0usize), |a, b| (a.0.max(b.0), a.1 + b.1))
        };
        if active_total > 0 && all_out_count == active_total {
            return Err(Error::StepTooLarge { h: params.h });
        }
        std::mem::swap(&mut current, &mut next);
        residual = row_max;
        iterations += 1;
        if residual <= params.tol {
            break;
        }
    }
    let report = SolveReport {
        iterations,
        final_residual: residual,
        converged: residual <= params.tol,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((ValueField::new(current, field.tag), report))
}
