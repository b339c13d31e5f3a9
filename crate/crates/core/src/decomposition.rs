//! Boundary partitioning, penalized auxiliary problems, pointwise-minimum
//! reconstruction and the threshold test that recovers the approximate
//! independent sub-domains.
//!
//! The pipeline: split the exit set into parts, solve one auxiliary problem
//! per part (exit cost raised off the part), take the nodewise minimum to
//! recover the original value function, then collect per part every node
//! whose auxiliary value sits within `2 (C dx^q + M dx)` of the minimum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DomainGeometry, Grid, GridSpec, NodeClass};
use crate::problems::{hamiltonian, ControlGrid, ProblemDef};
use crate::solver::{self, SolveParams, SolveReport, ValueField};
use crate::util::SplitMix64;

/// Geometric extent of one boundary part.
#[derive(Debug, Clone)]
pub enum PartRegion {
    /// Union of closed segments (square edges, strip edges).
    Segments(Vec<([f64; 2], [f64; 2])>),
    /// Closed pie slice of the target ball: angles in [theta0, theta1],
    /// radius up to rho.
    Sector { theta0: f64, theta1: f64, rho: f64 },
    /// The entire exit set (m = 1).
    WholeBoundary,
    /// Explicit anchor points (programmatic partitions).
    Points(Vec<[f64; 2]>),
}

const CONTAIN_TOL: f64 = 1e-9;

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

impl PartRegion {
    /// Euclidean distance from `p` to the part's region (0 inside).
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        match self {
            PartRegion::Segments(segs) => segs
                .iter()
                .map(|(a, b)| segment_distance(p, *a, *b))
                .fold(f64::INFINITY, f64::min),
            PartRegion::Sector { theta0, theta1, rho } => {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if r < CONTAIN_TOL {
                    return 0.0;
                }
                let tau = std::f64::consts::TAU;
                let full = *theta1 - *theta0 >= tau - 1e-12;
                let mut ang = p[1].atan2(p[0]);
                if ang < 0.0 {
                    ang += tau;
                }
                let in_angle = full
                    || (ang >= theta0 - CONTAIN_TOL && ang <= theta1 + CONTAIN_TOL)
                    || (ang + tau >= theta0 - CONTAIN_TOL && ang + tau <= theta1 + CONTAIN_TOL);
                if in_angle {
                    return (r - rho).max(0.0);
                }
                let e0 = [rho * theta0.cos(), rho * theta0.sin()];
                let e1 = [rho * theta1.cos(), rho * theta1.sin()];
                segment_distance(p, [0.0, 0.0], e0).min(segment_distance(p, [0.0, 0.0], e1))
            }
            PartRegion::WholeBoundary => 0.0,
            PartRegion::Points(pts) => pts
                .iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Membership of a boundary node (seam nodes belong to every adjacent
    /// part).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.distance(p) <= CONTAIN_TOL
    }
}

/// Built-in partition layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionScheme {
    /// Square edge walk, counterclockwise from the bottom edge. m = 2 pairs
    /// adjacent edges, m = 4 gives one edge per part, m = 8 half-edges.
    SquareEdges,
    /// Pie slices of the target ball, width 2 pi / m starting at angle 0.
    BallSectors,
    /// Left / right edge columns of the strip.
    VerticalEdges,
    Custom,
}

impl PartitionScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionScheme::SquareEdges => "square",
            PartitionScheme::BallSectors => "ball",
            PartitionScheme::VerticalEdges => "vertical",
            PartitionScheme::Custom => "custom",
        }
    }
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "square" => Ok(PartitionScheme::SquareEdges),
            "ball" => Ok(PartitionScheme::BallSectors),
            "vertical" => Ok(PartitionScheme::VerticalEdges),
            "custom" => Ok(PartitionScheme::Custom),
            other => Err(Error::InvalidArgs(format!(
                "unknown partition scheme `{other}`"
            ))),
        }
    }
}

/// A covering family of boundary parts.
#[derive(Debug, Clone)]
pub struct BoundaryPartition {
    pub scheme: PartitionScheme,
    pub parts: Vec<PartRegion>,
}

impl BoundaryPartition {
    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    /// Indices of the grid's boundary nodes belonging to part `i`.
    pub fn part_nodes(&self, grid: &Grid, i: usize) -> Vec<usize> {
        grid.boundary_nodes()
            .filter(|&idx| self.parts[i].contains(grid.position(idx)))
            .collect()
    }

    pub fn from_regions(parts: Vec<PartRegion>) -> Self {
        Self {
            scheme: PartitionScheme::Custom,
            parts,
        }
    }
}

fn square_edge_segments(spec: &GridSpec) -> [([f64; 2], [f64; 2]); 4] {
    let (x0, x1, y0, y1) = (spec.x_min, spec.x_max, spec.y_min, spec.y_max);
    [
        ([x0, y0], [x1, y0]), // bottom
        ([x1, y0], [x1, y1]), // right
        ([x1, y1], [x0, y1]), // top
        ([x0, y1], [x0, y0]), // left
    ]
}

/// Splits the exit set into `m` covering parts.
pub fn partition_boundary(
    grid: &Grid,
    geometry: DomainGeometry,
    m: usize,
    scheme: PartitionScheme,
) -> Result<BoundaryPartition> {
    let unsupported = || Error::UnsupportedPartition {
        scheme: scheme.as_str().to_string(),
        m,
    };
    let parts: Vec<PartRegion> = match (scheme, geometry) {
        (PartitionScheme::SquareEdges, DomainGeometry::SquareBoundary) => {
            let edges = square_edge_segments(&grid.spec);
            match m {
                1 => vec![PartRegion::WholeBoundary],
                2 => vec![
                    PartRegion::Segments(vec![edges[0], edges[3]]), // bottom + left
                    PartRegion::Segments(vec![edges[2], edges[1]]), // top + right
                ],
                4 => edges
                    .iter()
                    .map(|e| PartRegion::Segments(vec![*e]))
                    .collect(),
                8 => {
                    let mut out = Vec::with_capacity(8);
                    for (a, b) in edges {
                        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                        out.push(PartRegion::Segments(vec![(a, mid)]));
                        out.push(PartRegion::Segments(vec![(mid, b)]));
                    }
                    out
                }
                _ => return Err(unsupported()),
            }
        }
        (PartitionScheme::BallSectors, DomainGeometry::BallTarget { rho }) => {
            if !matches!(m, 1 | 2 | 4 | 8) {
                return Err(unsupported());
            }
            let tau = std::f64::consts::TAU;
            (0..m)
                .map(|k| PartRegion::Sector {
                    theta0: tau * k as f64 / m as f64,
                    theta1: tau * (k + 1) as f64 / m as f64,
                    rho,
                })
                .collect()
        }
        (PartitionScheme::VerticalEdges, DomainGeometry::VerticalEdges) => {
            let (x0, x1, y0, y1) = (
                grid.spec.x_min,
                grid.spec.x_max,
                grid.spec.y_min,
                grid.spec.y_max,
            );
            match m {
                1 => vec![PartRegion::WholeBoundary],
                2 => vec![
                    PartRegion::Segments(vec![([x0, y0], [x0, y1])]),
                    PartRegion::Segments(vec![([x1, y0], [x1, y1])]),
                ],
                _ => return Err(unsupported()),
            }
        }
        _ => return Err(unsupported()),
    };

    let partition = BoundaryPartition { scheme, parts };
    // covering: every exit node must land in at least one part
    for idx in grid.boundary_nodes() {
        let p = grid.position(idx);
        if !partition.parts.iter().any(|r| r.contains(p)) {
            return Err(Error::CoverageViolation {
                count: 1,
                first: idx,
            });
        }
    }
    Ok(partition)
}

/// How the exit cost is raised off the part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyScheme {
    /// g + gamma off the part.
    ConstantBump,
    /// g + gamma * dist(x, part): the linear ramp of the square example
    /// (gamma (1 + x2) seen from the bottom edge).
    DistanceRamp,
}

impl std::str::FromStr for PenaltyScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "constant" => Ok(PenaltyScheme::ConstantBump),
            "ramp" => Ok(PenaltyScheme::DistanceRamp),
            other => Err(Error::InvalidArgs(format!("unknown penalty scheme `{other}`"))),
        }
    }
}

/// Exit cost of one auxiliary problem: equals g on the part, strictly larger
/// on the rest of the exit set.
#[derive(Clone)]
pub struct AuxiliaryCost {
    pub part: usize,
    region: PartRegion,
    base: crate::problems::ExitCost,
    pub gamma: f64,
    pub scheme: PenaltyScheme,
}

impl AuxiliaryCost {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let g = self.base.eval(x);
        if self.region.contains(x) {
            g
        } else {
            match self.scheme {
                PenaltyScheme::ConstantBump => g + self.gamma,
                PenaltyScheme::DistanceRamp => g + self.gamma * self.region.distance(x),
            }
        }
    }
}

pub fn build_auxiliary_cost(
    problem: &ProblemDef,
    partition: &BoundaryPartition,
    part: usize,
    gamma: f64,
    scheme: PenaltyScheme,
) -> Result<AuxiliaryCost> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParam(format!(
            "penalty gamma must be positive, got {gamma}"
        )));
    }
    if part >= partition.part_count() {
        return Err(Error::InvalidParam(format!(
            "part {part} out of range (m = {})",
            partition.part_count()
        )));
    }
    Ok(AuxiliaryCost {
        part,
        region: partition.parts[part].clone(),
        base: problem.exit_cost.clone(),
        gamma,
        scheme,
    })
}

/// Thresholding constants for the sub-domain reconstruction.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructionParams {
    /// Scheme convergence constant (the C of the error bound C dx^q).
    pub error_coeff: f64,
    /// Bound on the Lipschitz constants of the auxiliary solutions.
    pub lipschitz_bound: f64,
    /// Convergence order q in (0, 1].
    pub order: f64,
    /// Penalty amplitude gamma of the auxiliary exit costs.
    pub penalty: f64,
    /// Tolerance for calling two auxiliary values tied at a node.
    pub tie_tol: f64,
}

impl ReconstructionParams {
    pub fn new(error_coeff: f64, lipschitz_bound: f64, order: f64, penalty: f64) -> Self {
        Self {
            error_coeff,
            lipschitz_bound,
            order,
            penalty,
            tie_tol: solver::DEFAULT_TOL * 10.0,
        }
    }

    pub fn with_tie_tol(mut self, tie_tol: f64) -> Self {
        self.tie_tol = tie_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("C", self.error_coeff),
            ("M", self.lipschitz_bound),
            ("q", self.order),
            ("gamma", self.penalty),
            ("tie_tol", self.tie_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        if self.order > 1.0 {
            return Err(Error::InvalidParam(format!(
                "order q must lie in (0, 1], got {}",
                self.order
            )));
        }
        Ok(())
    }
}

/// The reconstruction threshold `2 (C dx^q + M dx)`.
pub fn ra_threshold(params: &ReconstructionParams, dx: f64) -> f64 {
    2.0 * (params.error_coeff * dx.powf(params.order) + params.lipschitz_bound * dx)
}

/// Per-node membership of one approximate independent sub-domain.
#[derive(Debug, Clone)]
pub struct SubdomainMask {
    pub part: usize,
    pub members: Vec<bool>,
    /// Spec of the grid the mask was built on, kept for compatibility checks.
    pub spec: GridSpec,
}

impl SubdomainMask {
    pub fn member_count(&self) -> usize {
        self.members.iter().filter(|m| **m).count()
    }

    pub fn full(grid: &Grid, part: usize) -> Self {
        Self {
            part,
            members: vec![true; grid.node_count()],
            spec: grid.spec,
        }
    }
}

/// Per-node set of auxiliary fields attaining the minimum (within tie_tol),
/// stored as bit masks. Nodes carrying two or more active indices form the
/// overlap set.
#[derive(Debug, Clone)]
pub struct ActiveIndexField {
    bits: Vec<u32>,
    pub tie_tol: f64,
}

impl ActiveIndexField {
    pub fn active(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let word = self.bits[node];
        (0..32).filter(move |k| word & (1 << k) != 0)
    }

    pub fn count(&self, node: usize) -> usize {
        self.bits[node].count_ones() as usize
    }

    pub fn is_overlap(&self, node: usize) -> bool {
        self.count(node) > 1
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Nodewise minimum of the auxiliary fields plus the active index sets.
pub fn min_combine(fields: &[ValueField], tie_tol: f64) -> Result<(ValueField, ActiveIndexField)> {
    if fields.is_empty() {
        return Err(Error::EmptyFieldList);
    }
    if fields.len() > 32 {
        return Err(Error::InvalidParam(format!(
            "at most 32 parts supported, got {}",
            fields.len()
        )));
    }
    let n = fields[0].len();
    for f in fields {
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: f.len(),
            });
        }
    }
    let mut values = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for node in 0..n {
        let mut lo = f64::INFINITY;
        for f in fields {
            let v = f.values[node];
            if v < lo {
                lo = v;
            }
        }
        let mut word = 0u32;
        for (k, f) in fields.iter().enumerate() {
            if f.values[node] <= lo + tie_tol {
                word |= 1 << k;
            }
        }
        values.push(lo);
        bits.push(word);
    }
    Ok((
        ValueField::new(values, "min-combined"),
        ActiveIndexField { bits, tie_tol },
    ))
}

/// Solves the m auxiliary problems (in parallel) with the raised exit costs.
/// A part that fails to converge is reported with its index.
#[allow(clippy::too_many_arguments)]
pub fn solve_auxiliaries(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    params: &SolveParams,
    partition: &BoundaryPartition,
    gamma: f64,
    scheme: PenaltyScheme,
) -> Result<Vec<(ValueField, SolveReport)>> {
    let costs: Vec<AuxiliaryCost> = (0..partition.part_count())
        .map(|i| build_auxiliary_cost(problem, partition, i, gamma, scheme))
        .collect::<Result<_>>()?;
    // one part per worker; the row sweep inside each solve stays serial so
    // concurrent parts do not fight over the same cores
    let solved: Vec<Result<(ValueField, SolveReport)>> = costs
        .par_iter()
        .map(|cost| {
            let tag = format!("{}:aux{}", problem.name, cost.part);
            let bc = |x: [f64; 2]| cost.eval(x);
            if costs.len() > 1 {
                solver::solve_serial_rows(problem, grid, controls, params, None, &bc, tag)
            } else {
                solver::solve(problem, grid, controls, params, None, &bc, tag)
            }
        })
        .collect();
    let mut out = Vec::with_capacity(solved.len());
    for (part, item) in solved.into_iter().enumerate() {
        let (field, report) = item?;
        if !report.converged {
            return Err(Error::PartNotConverged {
                part,
                iterations: report.iterations,
                residual: report.final_residual,
            });
        }
        out.push((field, report));
    }
    Ok(out)
}

/// Collects per part every non-ghost node whose auxiliary value sits within
/// the threshold of the combined minimum, plus the part's own exit nodes.
/// Errs if some non-ghost node ends up in no mask.
pub fn reconstruct_subdomains(
    fields: &[ValueField],
    combined: &ValueField,
    partition: &BoundaryPartition,
    grid: &Grid,
    params: &ReconstructionParams,
    dx: f64,
) -> Result<Vec<SubdomainMask>> {
    params.validate()?;
    if fields.len() != partition.part_count() {
        return Err(Error::InvalidParam(format!(
            "{} fields for {} parts",
            fields.len(),
            partition.part_count()
        )));
    }
    for f in fields {
        if f.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                found: f.len(),
            });
        }
    }
    if combined.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: combined.len(),
        });
    }
    let threshold = ra_threshold(params, dx);
    let mut masks = Vec::with_capacity(fields.len());
    for (part, field) in fields.iter().enumerate() {
        let mut members: Vec<bool> = (0..grid.node_count())
            .map(|idx| {
                grid.class(idx) != NodeClass::Ghost
                    && (field.values[idx] - combined.values[idx]).abs() <= threshold
            })
            .collect();
        for idx in partition.part_nodes(grid, part) {
            members[idx] = true;
        }
        masks.push(SubdomainMask {
            part,
            members,
            spec: grid.spec,
        });
    }
    let mut uncovered = 0usize;
    let mut first = 0usize;
    for idx in 0..grid.node_count() {
        if grid.class(idx) == NodeClass::Ghost {
            continue;
        }
        if !masks.iter().any(|m| m.members[idx]) {
            if uncovered == 0 {
                first = idx;
            }
            uncovered += 1;
        }
    }
    if uncovered > 0 {
        return Err(Error::CoverageViolation {
            count: uncovered,
            first,
        });
    }
    Ok(masks)
}

/// Result of the numerical decomposability check on the overlap set.
#[derive(Debug, Clone)]
pub struct H2Report {
    pub nodes_checked: usize,
    pub nodes_skipped: usize,
    pub combos_per_node: usize,
    /// Largest lambda v + H(x, sum alpha_i p_i) seen; -inf when no node was
    /// checked.
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

fn gradient_component(
    values: &[f64],
    grid: &Grid,
    i: usize,
    j: usize,
    axis: usize,
    cutoff: f64,
) -> Option<f64> {
    let (n, d) = if axis == 0 {
        (grid.nx(), grid.dx())
    } else {
        (grid.ny(), grid.dy())
    };
    let k = if axis == 0 { i } else { j };
    let at = |k: usize| -> f64 {
        if axis == 0 {
            values[grid.index(k, j)]
        } else {
            values[grid.index(i, k)]
        }
    };
    let ok = |v: f64| v.abs() < cutoff;
    let center = at(k);
    if !ok(center) {
        return None;
    }
    // one-sided stencils only at the lattice edge; a sentinel-scale neighbor
    // means the node sits against ghost-like data and is skipped instead
    let minus = if k > 0 { Some(at(k - 1)) } else { None };
    let plus = if k + 1 < n { Some(at(k + 1)) } else { None };
    match (minus, plus) {
        (Some(a), Some(b)) => (ok(a) && ok(b)).then(|| (b - a) / (2.0 * d)),
        (None, Some(b)) => ok(b).then(|| (b - center) / d),
        (Some(a), None) => ok(a).then(|| (center - a) / d),
        (None, None) => None,
    }
}

/// Checks the decomposability inequality at overlap nodes: gradients of each
/// active auxiliary field by finite differences, vertex weights plus random
/// convex combinations, residual lambda v + H. Nodes touching sentinel or
/// ghost values are skipped and counted; `frontier_margin` additionally skips
/// everything within that coordinate distance of sentinel-scale data, where
/// the value function may jump and finite differences measure the jump
/// instead of a gradient. Zero disables the margin.
#[allow(clippy::too_many_arguments)]
pub fn check_h2(
    problem: &ProblemDef,
    controls: &ControlGrid,
    fields: &[ValueField],
    combined: &ValueField,
    active: &ActiveIndexField,
    grid: &Grid,
    n_combo: usize,
    tol: f64,
    sentinel_cutoff: f64,
    frontier_margin: f64,
) -> Result<H2Report> {
    if n_combo < 1 {
        return Err(Error::InvalidParam("n_combo must be at least 1".into()));
    }
    let near_frontier = if frontier_margin > 0.0 {
        let nx = grid.nx();
        let ny = grid.ny();
        let bad: Vec<bool> = (0..grid.node_count())
            .map(|idx| {
                combined.values[idx].abs() >= sentinel_cutoff
                    || fields.iter().any(|f| f.values[idx].abs() >= sentinel_cutoff)
            })
            .collect();
        let ri = (frontier_margin / grid.dx()).ceil() as usize;
        let rj = (frontier_margin / grid.dy()).ceil() as usize;
        let mut out = vec![false; grid.node_count()];
        for j in 0..ny {
            for i in 0..nx {
                'scan: for jj in j.saturating_sub(rj)..=(j + rj).min(ny - 1) {
                    for ii in i.saturating_sub(ri)..=(i + ri).min(nx - 1) {
                        if bad[jj * nx + ii] {
                            out[j * nx + i] = true;
                            break 'scan;
                        }
                    }
                }
            }
        }
        Some(out)
    } else {
        None
    };
    let mut nodes_checked = 0usize;
    let mut nodes_skipped = 0usize;
    let mut max_residual = f64::NEG_INFINITY;
    for idx in 0..grid.node_count() {
        if grid.class(idx) != NodeClass::Interior || !active.is_overlap(idx) {
            continue;
        }
        if near_frontier.as_ref().is_some_and(|nf| nf[idx]) {
            nodes_skipped += 1;
            continue;
        }
        let (i, j) = grid.ij(idx);
        let indices: Vec<usize> = active.active(idx).collect();
        let mut grads = Vec::with_capacity(indices.len());
        let mut usable = true;
        for &k in &indices {
            let gx = gradient_component(&fields[k].values, grid, i, j, 0, sentinel_cutoff);
            let gy = gradient_component(&fields[k].values, grid, i, j, 1, sentinel_cutoff);
            match (gx, gy) {
                (Some(gx), Some(gy)) => grads.push([gx, gy]),
                _ => {
                    usable = false;
                    break;
                }
            }
        }
        if !usable || combined.values[idx].abs() >= sentinel_cutoff {
            nodes_skipped += 1;
            continue;
        }
        nodes_checked += 1;
        let x = grid.position(idx);
        let mut weights: Vec<Vec<f64>> = Vec::with_capacity(indices.len() + n_combo);
        for v in 0..indices.len() {
            let mut w = vec![0.0; indices.len()];
            w[v] = 1.0;
            weights.push(w);
        }
        let mut rng = SplitMix64::new(0x5eed_c0de ^ idx as u64);
        for _ in 0..n_combo {
            let mut w: Vec<f64> = (0..indices.len()).map(|_| rng.next_f64() + 1e-12).collect();
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= sum);
            weights.push(w);
        }
        for w in &weights {
            let mut p = [0.0, 0.0];
            for (wk, g) in w.iter().zip(grads.iter()) {
                p[0] += wk * g[0];
                p[1] += wk * g[1];
            }
            let res = problem.lambda * combined.values[idx] + hamiltonian(problem, controls, x, p);
            if res > max_residual {
                max_residual = res;
            }
        }
    }
    let combos_per_node = n_combo;
    let pass = nodes_checked == 0 || max_residual <= tol;
    Ok(H2Report {
        nodes_checked,
        nodes_skipped,
        combos_per_node,
        max_residual,
        tol,
        pass,
    })
}

/// Everything one reconstruction run produces.
#[derive(Debug, Clone)]
pub struct ReconstructionOutcome {
    pub aux_fields: Vec<ValueField>,
    pub aux_reports: Vec<SolveReport>,
    pub combined: ValueField,
    pub active: ActiveIndexField,
    pub masks: Vec<SubdomainMask>,
}

/// Full reconstruction pass: auxiliary solves, minimum assembly, threshold
/// masks.
pub fn run_reconstruction(
    problem: &ProblemDef,
    grid: &Grid,
    controls: &ControlGrid,
    solve_params: &SolveParams,
    partition: &BoundaryPartition,
    params: &ReconstructionParams,
    penalty_scheme: PenaltyScheme,
) -> Result<ReconstructionOutcome> {
    params.validate()?;
    let solved = solve_auxiliaries(
        problem,
        grid,
        controls,
        solve_params,
        partition,
        params.penalty,
        penalty_scheme,
    )?;
    let (aux_fields, aux_reports): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let (combined, active) = min_combine(&aux_fields, params.tie_tol)?;
    let masks = reconstruct_subdomains(
        &aux_fields,
        &combined,
        partition,
        grid,
        params,
        grid.dx_max(),
    )?;
    Ok(ReconstructionOutcome {
        aux_fields,
        aux_reports,
        combined,
        active,
        masks,
    })
}
