//! Error norms, closed-form oracles, coverage fractions and the benchmark
//! harness behind the `bench` command.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::decomposition::{
    partition_boundary, run_reconstruction, PartitionScheme, PenaltyScheme, ReconstructionParams,
    SubdomainMask,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, GridSpec, NodeClass};
use crate::io;
use crate::problems::{make_builtin, sample_controls, BuiltinName, BuiltinParams};
use crate::solver::{self, SolveParams, StepMode, ValueField};
use crate::twogrid::{run_two_grid, TwoGridConfig, TwoGridResult};

/// Sup and mean absolute deviation of a field from an oracle, over the nodes
/// that carry data (ghost and sentinel-scale entries are skipped and
/// counted).
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub delta_inf: f64,
    pub delta_1: f64,
    pub n_nodes: usize,
    pub excluded: usize,
}

/// Default cutoff above which a value is treated as a sentinel stand-in.
pub fn sentinel_cutoff(sentinel: f64) -> f64 {
    sentinel * 1e-3
}

fn norms_impl<F>(field: &ValueField, grid: &Grid, cutoff: f64, oracle_at: F) -> Result<ErrorReport>
where
    F: Fn(usize) -> Option<f64>,
{
    if field.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: field.len(),
        });
    }
    let mut sup = 0.0f64;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for idx in 0..grid.node_count() {
        if grid.class(idx) == NodeClass::Ghost || field.values[idx].abs() >= cutoff {
            excluded += 1;
            continue;
        }
        let Some(reference) = oracle_at(idx) else {
            excluded += 1;
            continue;
        };
        let d = (field.values[idx] - reference).abs();
        sup = sup.max(d);
        sum += d;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidParam(
            "every node was excluded from the error norms".into(),
        ));
    }
    Ok(ErrorReport {
        delta_inf: sup,
        delta_1: sum / n as f64,
        n_nodes: n,
        excluded,
    })
}

/// Norms of (field - oracle) with the oracle given as a point evaluator.
pub fn error_norms(
    field: &ValueField,
    grid: &Grid,
    oracle: &dyn Fn([f64; 2]) -> f64,
    cutoff: f64,
) -> Result<ErrorReport> {
    norms_impl(field, grid, cutoff, |idx| Some(oracle(grid.position(idx))))
}

/// Norms of (field - reference) for two fields on the same grid; nodes where
/// either side is sentinel-scale are skipped.
pub fn error_norms_against(
    field: &ValueField,
    reference: &ValueField,
    grid: &Grid,
    cutoff: f64,
) -> Result<ErrorReport> {
    if reference.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: reference.len(),
        });
    }
    norms_impl(field, grid, cutoff, |idx| {
        let r = reference.values[idx];
        (r.abs() < cutoff).then_some(r)
    })
}

/// Cutoff separating genuine values from unreachable-region values in the
/// ball-target benchmarks (real values stay below ~2; forced-exit nodes hold
/// discounted sentinel residue well above).
pub const REACHABLE_CUTOFF: f64 = 10.0;

/// Tighter cutoff for the overlap check: the largest attainable discounted
/// cost over the built-ins is max l / lambda < 1.5, so anything above 2 is
/// sentinel residue, not a value.
pub const CHECK_CUTOFF: f64 = 2.0;

/// Physical margin stripped around the unreachable set when two resolutions
/// are compared: within this band the reachability frontier itself moves
/// between grids and pointwise differences measure the frontier, not the
/// scheme.
pub const FRONTIER_MARGIN: f64 = 0.16;

/// Norms of (field - reference) restricted to the common reachable core:
/// drops every node within `margin` (in coordinate units) of a node that is
/// ghost or sentinel-scale in either field.
pub fn error_norms_reachable(
    field: &ValueField,
    reference: &ValueField,
    grid: &Grid,
    cutoff: f64,
    margin: f64,
) -> Result<ErrorReport> {
    if field.len() != grid.node_count() || reference.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: grid.node_count(),
            found: field.len().max(reference.len()),
        });
    }
    let nx = grid.nx();
    let ny = grid.ny();
    let bad: Vec<bool> = (0..grid.node_count())
        .map(|idx| {
            grid.class(idx) == NodeClass::Ghost
                || field.values[idx].abs() >= cutoff
                || reference.values[idx].abs() >= cutoff
        })
        .collect();
    let ri = (margin / grid.dx()).ceil() as usize;
    let rj = (margin / grid.dy()).ceil() as usize;
    let mut sup = 0.0f64;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    let mut excluded = 0usize;
    for j in 0..ny {
        for i in 0..nx {
            let mut near_bad = false;
            'scan: for jj in j.saturating_sub(rj)..=(j + rj).min(ny - 1) {
                for ii in i.saturating_sub(ri)..=(i + ri).min(nx - 1) {
                    if bad[jj * nx + ii] {
                        near_bad = true;
                        break 'scan;
                    }
                }
            }
            if near_bad {
                excluded += 1;
                continue;
            }
            let idx = j * nx + i;
            let d = (field.values[idx] - reference.values[idx]).abs();
            sup = sup.max(d);
            sum += d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidParam(
            "every node was excluded from the error norms".into(),
        ));
    }
    Ok(ErrorReport {
        delta_inf: sup,
        delta_1: sum / n as f64,
        n_nodes: n,
        excluded,
    })
}

/// Closed-form solutions available for the square benchmarks.
#[derive(Debug, Clone, Copy)]
pub enum ExactForm {
    /// 1 - max(|x1|, |x2|): distance to the box edge.
    BoxDistance,
    /// Shifted box-distance forms, one per edge (indexed bottom 0, right 1,
    /// top 2, left 3, the partition order): form k vanishes on edge k,
    /// dominates the distance function everywhere, equals it exactly on the
    /// wedge facing edge k, and the minimum of the four recovers it. Each
    /// agrees with the bump-penalized auxiliary solution on the region where
    /// exiting through its edge governs.
    BoxDistanceAux { edge: usize, gamma: f64 },
    /// 1 - e^(max(|x1|,|x2|) - 1): the discounted transform of the box
    /// distance.
    TransformedBoxDistance,
}

pub fn exact_solution(form: &ExactForm, p: [f64; 2]) -> f64 {
    let (x, y) = (p[0], p[1]);
    match *form {
        ExactForm::BoxDistance => 1.0 - x.abs().max(y.abs()),
        ExactForm::BoxDistanceAux { edge, gamma } => match edge {
            0 => (1.0 + gamma) - (y - gamma).abs().max(x.abs()),
            1 => (1.0 + gamma) - (x + gamma).abs().max(y.abs()),
            2 => (1.0 + gamma) - (y + gamma).abs().max(x.abs()),
            _ => (1.0 + gamma) - (x - gamma).abs().max(y.abs()),
        },
        ExactForm::TransformedBoxDistance => 1.0 - (x.abs().max(y.abs()) - 1.0).exp(),
    }
}

/// The closed form solved by a built-in problem, when one exists.
pub fn exact_form_for(name: BuiltinName) -> Result<ExactForm> {
    match name {
        BuiltinName::EikonalSquare => Ok(ExactForm::BoxDistance),
        BuiltinName::EikonalKruzkov => Ok(ExactForm::TransformedBoxDistance),
        other => Err(Error::NoClosedForm(other.as_str().into())),
    }
}

/// Exact membership of the independent sub-domain attached to edge `edge` of
/// the box-distance problem: the closed wedge facing that edge.
pub fn box_distance_wedge(edge: usize, p: [f64; 2]) -> bool {
    let (x, y) = (p[0], p[1]);
    match edge {
        0 => -y >= x.abs() - 1e-12,
        1 => x >= y.abs() - 1e-12,
        2 => y >= x.abs() - 1e-12,
        _ => -x >= y.abs() - 1e-12,
    }
}

/// Fraction of non-ghost nodes belonging to the mask.
pub fn area_fraction(mask: &SubdomainMask, grid: &Grid) -> f64 {
    let mut members = 0usize;
    let mut total = 0usize;
    for idx in 0..grid.node_count() {
        if grid.class(idx) == NodeClass::Ghost {
            continue;
        }
        total += 1;
        if mask.members[idx] {
            members += 1;
        }
    }
    members as f64 / total as f64
}

/// Reconstruction constants shipped with the benchmark scenarios.
///
/// The tables' effective thresholds correspond to much smaller constants than
/// the worst-case convergence bounds: with C = M = 1 the threshold
/// 2 (C dx^q + M dx) already exceeds the value range of the discounted
/// problems at every tabulated coarse step, which marks every node and makes
/// the decomposition trivial. The shipped constants keep the threshold a few
/// node layers wide instead.
pub fn table_recon_params(problem: BuiltinName) -> ReconstructionParams {
    match problem {
        // the ball-target games decompose into heavily unbalanced sets (the
        // sub-domains share the whole unreachable region), so the shipped
        // threshold concedes the saturated decomposition: every mask covers
        // the domain and the assembled field equals the direct solve
        BuiltinName::VanDerPol => ReconstructionParams::new(0.05, 2.0, 0.75, 1.0),
        BuiltinName::PursuitEvasion => ReconstructionParams::new(0.05, 2.0, 0.5, 1.0),
        _ => ReconstructionParams::new(0.05, 0.45, 0.5, 1.0),
    }
}

/// Penalty shape used by the shipped scenarios: the distance ramp. The raised
/// exit cost stays small next to the part, so the threshold picks up the seam
/// ring of exit nodes; with the constant bump the projected cells between two
/// parts can lose both their triangles and leave fine nodes uncovered.
pub fn table_penalty(_problem: BuiltinName) -> PenaltyScheme {
    PenaltyScheme::DistanceRamp
}

/// What a benchmark scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    /// Direct solve on the fine grid.
    Direct,
    /// Sub-domain reconstruction on the coarse grid only.
    Reconstruction,
    /// The full coarse-to-fine pipeline.
    TwoGrid,
    /// Direct solve and pipeline back to back (timing comparisons).
    Compare,
}

/// One benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchScenario {
    pub problem: BuiltinName,
    pub problem_params: BuiltinParams,
    pub scheme: PartitionScheme,
    pub parts: usize,
    pub coarse_cells: usize,
    pub fine_cells: usize,
    pub recon: ReconstructionParams,
    pub penalty_scheme: PenaltyScheme,
    pub step_mode: StepMode,
    pub n_a: usize,
    pub n_b: usize,
    pub tol: f64,
    pub workers: usize,
    /// Compare against the closed form when available; `reference_dir` takes
    /// precedence when set (stored fine-grid reference).
    pub reference_dir: Option<PathBuf>,
    pub mode: BenchMode,
}

impl BenchScenario {
    pub fn new(problem: BuiltinName, mode: BenchMode) -> Self {
        let (n_a, n_b) = default_samples(problem);
        Self {
            problem,
            problem_params: BuiltinParams::default(),
            scheme: default_scheme(problem),
            parts: 4,
            coarse_cells: 20,
            fine_cells: 100,
            recon: table_recon_params(problem),
            penalty_scheme: table_penalty(problem),
            step_mode: StepMode::Dx,
            n_a,
            n_b,
            tol: solver::DEFAULT_TOL,
            workers: default_workers(),
            reference_dir: None,
            mode,
        }
    }
}

pub fn default_scheme(problem: BuiltinName) -> PartitionScheme {
    match problem {
        BuiltinName::EikonalSquare | BuiltinName::EikonalKruzkov => PartitionScheme::SquareEdges,
        BuiltinName::StripFlat => PartitionScheme::VerticalEdges,
        BuiltinName::VanDerPol | BuiltinName::PursuitEvasion => PartitionScheme::BallSectors,
    }
}

pub fn default_samples(problem: BuiltinName) -> (usize, usize) {
    match problem {
        BuiltinName::VanDerPol => (33, 1),
        BuiltinName::PursuitEvasion => (32, 16),
        _ => (64, 1),
    }
}

pub fn default_workers() -> usize {
    std::env::var("HJP_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|w| *w > 0)
        .unwrap_or(4)
}

/// One CSV output row.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub problem: String,
    pub scheme: String,
    pub parts: usize,
    pub coarse_nx: usize,
    pub fine_nx: usize,
    pub error_coeff: f64,
    pub lipschitz_bound: f64,
    pub order: f64,
    pub penalty: f64,
    pub stage: String,
    pub seconds: f64,
    pub delta_inf: Option<f64>,
    pub delta_1: Option<f64>,
    pub max_fraction: Option<f64>,
}

pub const BENCH_HEADER: &str =
    "problem,scheme,parts,coarse_nx,fine_nx,C,M,q,gamma,stage,seconds,delta_inf,delta_1,max_fraction";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{},{},{}",
            self.problem,
            self.scheme,
            self.parts,
            self.coarse_nx,
            self.fine_nx,
            self.error_coeff,
            self.lipschitz_bound,
            self.order,
            self.penalty,
            self.stage,
            self.seconds,
            opt(self.delta_inf),
            opt(self.delta_1),
            opt(self.max_fraction),
        )
    }
}

/// File holding the stored fine-grid reference for a problem.
pub fn reference_path(dir: &Path, problem: BuiltinName) -> PathBuf {
    dir.join(format!("{}-400.txt", problem.as_str()))
}

pub const REFERENCE_CELLS: usize = 400;
pub const REFERENCE_TOL: f64 = 1e-8;

/// Solves the problem once on the reference grid and stores the dump.
pub fn generate_reference(dir: &Path, problem_name: BuiltinName) -> Result<(GridSpec, ValueField)> {
    let problem = make_builtin(problem_name, &BuiltinParams::default())?;
    let spec = GridSpec::unit_square(REFERENCE_CELLS);
    let grid = build_grid(spec, problem.geometry)?;
    let (n_a, n_b) = default_samples(problem_name);
    let controls = sample_controls(&problem, n_a, n_b)?;
    let params = SolveParams::new(grid.dx()).with_tol(REFERENCE_TOL);
    let exit_cost = problem.exit_cost.clone();
    let bc = move |x: [f64; 2]| exit_cost.eval(x);
    let (field, report) = solver::solve(
        &problem,
        &grid,
        &controls,
        &params,
        None,
        &bc,
        format!("{}:reference", problem.name),
    )?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    std::fs::create_dir_all(dir)?;
    io::write_field(&reference_path(dir, problem_name), &spec, &field)?;
    Ok((spec, field))
}

pub fn load_reference(dir: &Path, problem: BuiltinName) -> Result<(GridSpec, ValueField)> {
    let path = reference_path(dir, problem);
    if !path.exists() {
        return Err(Error::MissingReference(path));
    }
    io::read_field(&path)
}

/// Restriction of a reference field to a nested coarser grid (the coarse
/// cells must divide the reference cells, so nodes coincide and no
/// interpolation error enters the comparison).
pub fn subsample_reference(
    ref_spec: &GridSpec,
    ref_field: &ValueField,
    target: &GridSpec,
) -> Result<ValueField> {
    let same_box = ref_spec.x_min == target.x_min
        && ref_spec.x_max == target.x_max
        && ref_spec.y_min == target.y_min
        && ref_spec.y_max == target.y_max;
    if !same_box {
        return Err(Error::GridMismatch);
    }
    let rc = ref_spec.nx - 1;
    let tc = target.nx - 1;
    if ref_spec.ny - 1 != rc || target.ny - 1 != tc || !rc.is_multiple_of(tc) {
        return Err(Error::GridMismatch);
    }
    let step = rc / tc;
    let mut values = Vec::with_capacity(target.node_count());
    for j in 0..target.ny {
        for i in 0..target.nx {
            values.push(ref_field.values[(j * step) * ref_spec.nx + i * step]);
        }
    }
    Ok(ValueField::new(values, format!("{}@{}", ref_field.tag, tc)))
}

fn base_row(scenario: &BenchScenario, stage: &str, seconds: f64) -> BenchRow {
    BenchRow {
        problem: scenario.problem.as_str().into(),
        scheme: scenario.scheme.as_str().into(),
        parts: scenario.parts,
        coarse_nx: scenario.coarse_cells + 1,
        fine_nx: scenario.fine_cells + 1,
        error_coeff: scenario.recon.error_coeff,
        lipschitz_bound: scenario.recon.lipschitz_bound,
        order: scenario.recon.order,
        penalty: scenario.recon.penalty,
        stage: stage.into(),
        seconds,
        delta_inf: None,
        delta_1: None,
        max_fraction: None,
    }
}

fn scenario_oracle(scenario: &BenchScenario, spec: &GridSpec) -> Result<Option<ValueField>> {
    if let Some(dir) = &scenario.reference_dir {
        let (ref_spec, ref_field) = load_reference(dir, scenario.problem)?;
        return Ok(Some(subsample_reference(&ref_spec, &ref_field, spec)?));
    }
    match exact_form_for(scenario.problem) {
        Ok(form) => {
            let mut values = Vec::with_capacity(spec.node_count());
            let dx = spec.dx();
            let dy = spec.dy();
            for j in 0..spec.ny {
                for i in 0..spec.nx {
                    let p = [spec.x_min + i as f64 * dx, spec.y_min + j as f64 * dy];
                    values.push(exact_solution(&form, p));
                }
            }
            Ok(Some(ValueField::new(values, "closed-form")))
        }
        Err(_) => Ok(None),
    }
}

fn direct_solve(
    scenario: &BenchScenario,
) -> Result<(Grid, ValueField, solver::SolveReport)> {
    let problem = make_builtin(scenario.problem, &scenario.problem_params)?;
    let grid = build_grid(GridSpec::unit_square(scenario.fine_cells), problem.geometry)?;
    let controls = sample_controls(&problem, scenario.n_a, scenario.n_b)?;
    let params = SolveParams {
        h: scenario.step_mode.step(grid.dx_max()),
        tol: scenario.tol,
        max_iter: solver::DEFAULT_MAX_ITER,
        sentinel: solver::DEFAULT_SENTINEL,
    };
    let exit_cost = problem.exit_cost.clone();
    let bc = move |x: [f64; 2]| exit_cost.eval(x);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    let (field, report) = pool.install(|| {
        solver::solve(
            &problem,
            &grid,
            &controls,
            &params,
            None,
            &bc,
            problem.name.clone(),
        )
    })?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    Ok((grid, field, report))
}

pub fn two_grid_config(scenario: &BenchScenario) -> TwoGridConfig {
    TwoGridConfig {
        coarse: GridSpec::unit_square(scenario.coarse_cells),
        fine: GridSpec::unit_square(scenario.fine_cells),
        scheme: scenario.scheme,
        parts: scenario.parts,
        recon: scenario.recon,
        penalty_scheme: scenario.penalty_scheme,
        step_mode: scenario.step_mode,
        tol: scenario.tol,
        max_iter: solver::DEFAULT_MAX_ITER,
        sentinel: solver::DEFAULT_SENTINEL,
        n_a: scenario.n_a,
        n_b: scenario.n_b,
        workers: scenario.workers,
    }
}

fn run_pipeline(scenario: &BenchScenario) -> Result<(Grid, TwoGridResult)> {
    let problem = make_builtin(scenario.problem, &scenario.problem_params)?;
    let config = two_grid_config(scenario);
    let fine = build_grid(config.fine, problem.geometry)?;
    let result = run_two_grid(&problem, &config)?;
    Ok((fine, result))
}

/// Executes one scenario and emits its CSV rows (one per stage, with error
/// norms and the worst coverage fraction where applicable).
pub fn bench_run(scenario: &BenchScenario) -> Result<Vec<BenchRow>> {
    let cutoff = sentinel_cutoff(solver::DEFAULT_SENTINEL);
    let mut rows = Vec::new();
    match scenario.mode {
        BenchMode::Direct | BenchMode::Compare => {
            let start = Instant::now();
            let (grid, field, _report) = direct_solve(scenario)?;
            let seconds = start.elapsed().as_secs_f64();
            let mut row = base_row(scenario, "direct", seconds);
            if let Some(oracle) = scenario_oracle(scenario, &grid.spec)? {
                let report = if scenario.reference_dir.is_some() {
                    error_norms_reachable(&field, &oracle, &grid, REACHABLE_CUTOFF, FRONTIER_MARGIN)?
                } else {
                    error_norms_against(&field, &oracle, &grid, cutoff)?
                };
                row.delta_inf = Some(report.delta_inf);
                row.delta_1 = Some(report.delta_1);
            }
            rows.push(row);
            if scenario.mode == BenchMode::Direct {
                return Ok(rows);
            }
        }
        _ => {}
    }
    match scenario.mode {
        BenchMode::Reconstruction => {
            let problem = make_builtin(scenario.problem, &scenario.problem_params)?;
            let grid = build_grid(
                GridSpec::unit_square(scenario.coarse_cells),
                problem.geometry,
            )?;
            let controls = sample_controls(&problem, scenario.n_a, scenario.n_b)?;
            let partition =
                partition_boundary(&grid, problem.geometry, scenario.parts, scenario.scheme)?;
            let params = SolveParams {
                h: scenario.step_mode.step(grid.dx_max()),
                tol: scenario.tol,
                max_iter: solver::DEFAULT_MAX_ITER,
                sentinel: solver::DEFAULT_SENTINEL,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(scenario.workers)
                .build()
                .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
            let start = Instant::now();
            let outcome = pool.install(|| {
                run_reconstruction(
                    &problem,
                    &grid,
                    &controls,
                    &params,
                    &partition,
                    &scenario.recon,
                    scenario.penalty_scheme,
                )
            })?;
            let seconds = start.elapsed().as_secs_f64();
            let max_fraction = outcome
                .masks
                .iter()
                .map(|m| area_fraction(m, &grid))
                .fold(0.0f64, f64::max);
            let mut row = base_row(scenario, "reconstruction", seconds);
            row.fine_nx = scenario.coarse_cells + 1;
            row.max_fraction = Some(max_fraction);
            rows.push(row);
        }
        BenchMode::TwoGrid | BenchMode::Compare => {
            let (fine, result) = run_pipeline(scenario)?;
            for stage in &result.stages {
                let name = match stage.part {
                    Some(p) => format!("{}:{}", stage.stage, p),
                    None => stage.stage.clone(),
                };
                rows.push(base_row(scenario, &name, stage.seconds));
            }
            let mut total = base_row(scenario, "twogrid_total", result.total_seconds());
            if let Some(oracle) = scenario_oracle(scenario, &fine.spec)? {
                let report = if scenario.reference_dir.is_some() {
                    error_norms_reachable(
                        &result.field,
                        &oracle,
                        &fine,
                        REACHABLE_CUTOFF,
                        FRONTIER_MARGIN,
                    )?
                } else {
                    error_norms_against(&result.field, &oracle, &fine, cutoff)?
                };
                total.delta_inf = Some(report.delta_inf);
                total.delta_1 = Some(report.delta_1);
            }
            let coarse_grid = build_grid(
                GridSpec::unit_square(scenario.coarse_cells),
                make_builtin(scenario.problem, &scenario.problem_params)?.geometry,
            )?;
            total.max_fraction = Some(
                result
                    .coarse_stage
                    .masks
                    .iter()
                    .map(|m| area_fraction(m, &coarse_grid))
                    .fold(0.0f64, f64::max),
            );
            rows.push(total);
        }
        _ => {}
    }
    Ok(rows)
}

/// The shipped tables. `t1`/`t4`: coverage fractions over coarse steps;
/// `t2`: direct vs pipeline timings; `t3`/`t5`: accuracy over fine grids.
pub fn table_scenarios(table: &str, reference_dir: Option<&Path>) -> Result<Vec<BenchScenario>> {
    let t = table.trim().to_lowercase();
    let mut out = Vec::new();
    match t.as_str() {
        "t1" => {
            for cells in [5usize, 7, 10, 15, 20, 30, 40, 50] {
                let mut s = BenchScenario::new(BuiltinName::EikonalKruzkov, BenchMode::Reconstruction);
                s.coarse_cells = cells;
                out.push(s);
            }
        }
        "t2" => {
            for cells in [25usize, 50, 75, 100] {
                let mut s = BenchScenario::new(BuiltinName::EikonalKruzkov, BenchMode::Compare);
                s.fine_cells = cells;
                s.coarse_cells = (cells / 5).max(5);
                out.push(s);
            }
        }
        "t3" => {
            for parts in [1usize, 2, 4, 8] {
                for cells in [50usize, 100, 200] {
                    let mut s = BenchScenario::new(
                        BuiltinName::EikonalKruzkov,
                        if parts == 1 {
                            BenchMode::Direct
                        } else {
                            BenchMode::TwoGrid
                        },
                    );
                    s.parts = parts.max(1);
                    s.fine_cells = cells;
                    s.coarse_cells = 20;
                    out.push(s);
                }
            }
        }
        "t4" => {
            // 5 cells would leave no lattice node inside the target ball
            for cells in [10usize, 20, 30, 40, 50] {
                let mut s = BenchScenario::new(BuiltinName::VanDerPol, BenchMode::Reconstruction);
                s.coarse_cells = cells;
                // no projection stage here, so the bump's sharper sector
                // separation is usable; the fractions still sit on the
                // unreachable-region floor
                s.penalty_scheme = PenaltyScheme::ConstantBump;
                s.recon = ReconstructionParams::new(0.01, 0.10, 0.75, 1.0);
                out.push(s);
            }
        }
        "t5" => {
            let dir = reference_dir.ok_or_else(|| {
                Error::InvalidArgs("table t5 needs a reference directory".into())
            })?;
            for parts in [1usize, 2, 4] {
                for cells in [50usize, 100, 200] {
                    let mut s = BenchScenario::new(
                        BuiltinName::VanDerPol,
                        if parts == 1 {
                            BenchMode::Direct
                        } else {
                            BenchMode::TwoGrid
                        },
                    );
                    s.parts = parts;
                    s.fine_cells = cells;
                    s.coarse_cells = 20;
                    s.reference_dir = Some(dir.to_path_buf());
                    out.push(s);
                }
            }
        }
        other => {
            return Err(Error::InvalidArgs(format!(
                "unknown table `{other}` (expected t1..t5)"
            )))
        }
    }
    Ok(out)
}
