//! Coarse-to-fine parallel pipeline: reconstruct approximate independent
//! sub-domains on a coarse grid, project the masks onto the fine grid through
//! the marked-triangle hull, solve the original problem on each fine mask
//! concurrently, and assemble the final field as the nodewise minimum.

use std::time::Instant;

use rayon::prelude::*;

use crate::decomposition::{
    partition_boundary, run_reconstruction, PartRegion, PartitionScheme, PenaltyScheme,
    ReconstructionOutcome, ReconstructionParams, SubdomainMask,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, GridSpec, NodeClass};
use crate::problems::{sample_controls, ProblemDef};
use crate::solver::{self, SolveParams, SolveReport, StepMode, ValueField};

/// Configuration of one pipeline run.
#[derive(Debug, Clone)]
pub struct TwoGridConfig {
    pub coarse: GridSpec,
    pub fine: GridSpec,
    pub scheme: PartitionScheme,
    pub parts: usize,
    pub recon: ReconstructionParams,
    pub penalty_scheme: PenaltyScheme,
    pub step_mode: StepMode,
    pub tol: f64,
    pub max_iter: usize,
    pub sentinel: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub workers: usize,
}

impl TwoGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse.node_count() >= self.fine.node_count() {
            return Err(Error::InvalidParam(format!(
                "coarse grid ({} nodes) must be strictly smaller than the fine grid ({} nodes)",
                self.coarse.node_count(),
                self.fine.node_count()
            )));
        }
        let same_box = self.coarse.x_min == self.fine.x_min
            && self.coarse.x_max == self.fine.x_max
            && self.coarse.y_min == self.fine.y_min
            && self.coarse.y_max == self.fine.y_max;
        if !same_box {
            return Err(Error::GridMismatch);
        }
        if self.workers == 0 {
            return Err(Error::InvalidParam("workers must be at least 1".into()));
        }
        self.recon.validate()?;
        Ok(())
    }

    fn solve_params(&self, grid: &Grid) -> SolveParams {
        SolveParams {
            h: self.step_mode.step(grid.dx_max()),
            tol: self.tol,
            max_iter: self.max_iter,
            sentinel: self.sentinel,
        }
    }
}

/// One timing row: stage name, optional part, optional iteration count,
/// elapsed seconds.
#[derive(Debug, Clone)]
pub struct StageRow {
    pub stage: String,
    pub part: Option<usize>,
    pub iterations: Option<usize>,
    pub seconds: f64,
}

/// Output of a pipeline run.
#[derive(Debug)]
pub struct TwoGridResult {
    /// Assembled value field on the fine grid.
    pub field: ValueField,
    /// Projected fine masks, one per part.
    pub masks: Vec<SubdomainMask>,
    /// Reports of the masked fine solves.
    pub part_reports: Vec<SolveReport>,
    /// Everything the coarse stage produced.
    pub coarse_stage: ReconstructionOutcome,
    pub stages: Vec<StageRow>,
    /// Fine nodes covered by two or more masks.
    pub overlap_nodes: usize,
}

impl TwoGridResult {
    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

/// Projects a coarse mask onto the fine grid: a fine node is a member iff it
/// lies in a coarse triangle (cells split along the lower-left to upper-right
/// diagonal) whose three vertices are all mask members. Fine exit nodes of
/// the part's own region are always members.
pub fn project_mask(
    coarse: &Grid,
    mask: &SubdomainMask,
    fine: &Grid,
    part_region: Option<&PartRegion>,
) -> Result<SubdomainMask> {
    if mask.spec != coarse.spec {
        return Err(Error::GridMismatch);
    }
    if mask.members.len() != coarse.node_count() {
        return Err(Error::DimensionMismatch {
            expected: coarse.node_count(),
            found: mask.members.len(),
        });
    }
    let same_box = coarse.spec.x_min == fine.spec.x_min
        && coarse.spec.x_max == fine.spec.x_max
        && coarse.spec.y_min == fine.spec.y_min
        && coarse.spec.y_max == fine.spec.y_max;
    if !same_box {
        return Err(Error::GridMismatch);
    }

    let mut members: Vec<bool> = (0..fine.node_count())
        .into_par_iter()
        .map(|idx| hull_contains(coarse, &mask.members, fine.position(idx)))
        .collect();
    if let Some(region) = part_region {
        for idx in fine.boundary_nodes() {
            if region.contains(fine.position(idx)) {
                members[idx] = true;
            }
        }
    }
    let members = members;
    Ok(SubdomainMask {
        part: mask.part,
        members,
        spec: fine.spec,
    })
}

/// Whether `p` lies in the hull region spanned by the marked nodes: the
/// union of grid triangles (cells split along the lower-left to upper-right
/// diagonal) whose three vertices are all members.
pub fn hull_contains(grid: &Grid, members: &[bool], p: [f64; 2]) -> bool {
    let nxc = grid.nx();
    let eps = 1e-9;
    let fx = (p[0] - grid.spec.x_min) / grid.dx();
    let fy = (p[1] - grid.spec.y_min) / grid.dy();
    let ci0 = fx.floor() as isize;
    let cj0 = fy.floor() as isize;
    for ci in [ci0 - 1, ci0] {
        if ci < 0 || ci as usize >= nxc - 1 {
            continue;
        }
        for cj in [cj0 - 1, cj0] {
            if cj < 0 || cj as usize >= grid.ny() - 1 {
                continue;
            }
            let u = fx - ci as f64;
            let v = fy - cj as f64;
            if !(-eps..=1.0 + eps).contains(&u) || !(-eps..=1.0 + eps).contains(&v) {
                continue;
            }
            let ll = grid.index(ci as usize, cj as usize);
            let lr = ll + 1;
            let ul = ll + nxc;
            let ur = ul + 1;
            if v <= u + eps && members[ll] && members[lr] && members[ur] {
                return true;
            }
            if v >= u - eps && members[ll] && members[ur] && members[ul] {
                return true;
            }
        }
    }
    false
}

/// Non-ghost nodes missing from every mask. An empty list is a pass.
pub fn coverage_check(masks: &[SubdomainMask], grid: &Grid) -> Vec<usize> {
    (0..grid.node_count())
        .filter(|&idx| {
            grid.class(idx) != NodeClass::Ghost && !masks.iter().any(|m| m.members[idx])
        })
        .collect()
}

/// Runs the full pipeline. All stages run inside a dedicated thread pool of
/// `config.workers` threads; the result is bit-identical for any worker
/// count.
pub fn run_two_grid(problem: &ProblemDef, config: &TwoGridConfig) -> Result<TwoGridResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    pool.install(|| run_two_grid_inner(problem, config))
}

fn run_two_grid_inner(problem: &ProblemDef, config: &TwoGridConfig) -> Result<TwoGridResult> {
    let coarse = build_grid(config.coarse, problem.geometry)?;
    let fine = build_grid(config.fine, problem.geometry)?;
    let controls = sample_controls(problem, config.n_a, config.n_b)?;
    let partition = partition_boundary(&coarse, problem.geometry, config.parts, config.scheme)?;
    let mut stages: Vec<StageRow> = Vec::new();

    // stage 1: sub-domain reconstruction on the coarse grid
    let t0 = Instant::now();
    let coarse_params = config.solve_params(&coarse);
    let coarse_stage = run_reconstruction(
        problem,
        &coarse,
        &controls,
        &coarse_params,
        &partition,
        &config.recon,
        config.penalty_scheme,
    )?;
    let coarse_secs = t0.elapsed().as_secs_f64();
    for (part, report) in coarse_stage.aux_reports.iter().enumerate() {
        stages.push(StageRow {
            stage: "coarse_aux".into(),
            part: Some(part),
            iterations: Some(report.iterations),
            seconds: report.wall_time_secs,
        });
    }
    let aux_total: f64 = coarse_stage
        .aux_reports
        .iter()
        .map(|r| r.wall_time_secs)
        .sum();
    stages.push(StageRow {
        stage: "coarse_reduce".into(),
        part: None,
        iterations: None,
        seconds: (coarse_secs - aux_total).max(0.0),
    });

    // stage 2: projection of each mask onto the fine grid
    let t1 = Instant::now();
    let masks: Vec<SubdomainMask> = coarse_stage
        .masks
        .iter()
        .map(|mask| {
            project_mask(
                &coarse,
                mask,
                &fine,
                Some(&partition.parts[mask.part]),
            )
        })
        .collect::<Result<_>>()?;
    stages.push(StageRow {
        stage: "project".into(),
        part: None,
        iterations: None,
        seconds: t1.elapsed().as_secs_f64(),
    });

    // stage 3: masked fine solves of the original problem, concurrently
    let fine_params = config.solve_params(&fine);
    let exit_cost = problem.exit_cost.clone();
    let t2 = Instant::now();
    let solved: Vec<Result<(ValueField, SolveReport)>> = masks
        .par_iter()
        .map(|mask| {
            let bc = |x: [f64; 2]| exit_cost.eval(x);
            let tag = format!("{}:part{}", problem.name, mask.part);
            if masks.len() > 1 {
                solver::solve_serial_rows(
                    problem,
                    &fine,
                    &controls,
                    &fine_params,
                    Some(&mask.members),
                    &bc,
                    tag,
                )
            } else {
                solver::solve(
                    problem,
                    &fine,
                    &controls,
                    &fine_params,
                    Some(&mask.members),
                    &bc,
                    tag,
                )
            }
        })
        .collect();
    let fine_secs = t2.elapsed().as_secs_f64();
    let mut part_fields = Vec::with_capacity(solved.len());
    let mut part_reports = Vec::with_capacity(solved.len());
    for (part, item) in solved.into_iter().enumerate() {
        let (field, report) = item?;
        if !report.converged {
            return Err(Error::PartNotConverged {
                part,
                iterations: report.iterations,
                residual: report.final_residual,
            });
        }
        part_fields.push(field);
        part_reports.push(report);
    }
    for (part, report) in part_reports.iter().enumerate() {
        stages.push(StageRow {
            stage: "fine_solve".into(),
            part: Some(part),
            iterations: Some(report.iterations),
            seconds: report.wall_time_secs,
        });
    }
    let _ = fine_secs;

    // stage 4: nodewise-minimum assembly over the covering masks
    let t3 = Instant::now();
    let mut values = vec![config.sentinel; fine.node_count()];
    let mut overlap_nodes = 0usize;
    let mut uncovered = 0usize;
    let mut first_uncovered = 0usize;
    #[allow(clippy::needless_range_loop)]
    for idx in 0..fine.node_count() {
        if fine.class(idx) == NodeClass::Ghost {
            continue;
        }
        let mut best = f64::INFINITY;
        let mut covering = 0usize;
        for (mask, field) in masks.iter().zip(part_fields.iter()) {
            if mask.members[idx] {
                covering += 1;
                if field.values[idx] < best {
                    best = field.values[idx];
                }
            }
        }
        match covering {
            0 => {
                if uncovered == 0 {
                    first_uncovered = idx;
                }
                uncovered += 1;
            }
            1 => values[idx] = best,
            _ => {
                overlap_nodes += 1;
                values[idx] = best;
            }
        }
    }
    if uncovered > 0 {
        return Err(Error::CoverageViolation {
            count: uncovered,
            first: first_uncovered,
        });
    }
    stages.push(StageRow {
        stage: "assembly".into(),
        part: None,
        iterations: None,
        seconds: t3.elapsed().as_secs_f64(),
    });

    Ok(TwoGridResult {
        field: ValueField::new(values, format!("{}:assembled", problem.name)),
        masks,
        part_reports,
        coarse_stage,
        stages,
        overlap_nodes,
    })
}
