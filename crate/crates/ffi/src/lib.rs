//! C ABI for the hjdecomp solver.
//!
//! Handles are opaque pointers created and released by this library; every
//! fallible call returns an [`HjdStatus`] and leaves a message retrievable
//! through [`hjd_last_error_message`] on failure. Functions never unwind
//! across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hjdecomp::analysis;
use hjdecomp::decomposition::ReconstructionParams;
use hjdecomp::grid::{build_grid, GridSpec};
use hjdecomp::problems::{make_builtin, sample_controls, BuiltinName, BuiltinParams, ProblemDef};
use hjdecomp::solver::{self, SolveParams, StepMode, ValueField};
use hjdecomp::twogrid::{run_two_grid, TwoGridConfig, TwoGridResult};
use hjdecomp::Error;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    NotConverged = 4,
    CoverageViolation = 5,
    Io = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> HjdStatus {
    match err {
        Error::NotConverged { .. } | Error::PartNotConverged { .. } => HjdStatus::NotConverged,
        Error::CoverageViolation { .. } => HjdStatus::CoverageViolation,
        Error::Io(_) => HjdStatus::Io,
        _ => HjdStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> HjdStatus {
    set_error(&err.to_string());
    status_for(err)
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call from the same thread.
#[no_mangle]
pub extern "C" fn hjd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn parse_cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, HjdStatus> {
    if ptr.is_null() {
        set_error(&format!("{what} is null"));
        return Err(HjdStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        HjdStatus::InvalidUtf8
    })
}

fn guarded<F: FnOnce() -> HjdStatus>(f: F) -> HjdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HjdStatus::Panic
        }
    }
}

/// Opaque problem handle.
pub struct HjdProblem {
    problem: ProblemDef,
    name: BuiltinName,
}

/// Opaque node field handle: grid layout plus one value per node.
pub struct HjdField {
    spec: GridSpec,
    field: ValueField,
}

/// Opaque result of a pipeline run.
pub struct HjdIsaResult {
    fine_spec: GridSpec,
    result: TwoGridResult,
}

/// Statistics of one value iteration.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HjdSolveStats {
    pub iterations: u64,
    pub final_residual: f64,
    pub seconds: f64,
    pub converged: bool,
}

/// Step rule selector: 0 = h = dx, 1 = h = dx^(2/3).
fn step_mode_from(raw: u32) -> Result<StepMode, HjdStatus> {
    match raw {
        0 => Ok(StepMode::Dx),
        1 => Ok(StepMode::DxTwoThirds),
        other => {
            set_error(&format!("unknown step mode {other}"));
            Err(HjdStatus::InvalidArgument)
        }
    }
}

/// Creates a built-in problem. `name` is one of `eikonal-square`,
/// `eikonal-kruzkov`, `strip-flat`, `van-der-pol`, `pursuit-evasion`;
/// `params` is an optional comma-separated `key=value` list (`rho`, `delta`).
///
/// # Safety
/// `name` and (when non-null) `params` must point to NUL-terminated strings;
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hjd_problem_builtin(
    name: *const c_char,
    params: *const c_char,
    out: *mut *mut HjdProblem,
) -> HjdStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return HjdStatus::NullPointer;
        }
        let name = match parse_cstr(name, "problem name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let builtin: BuiltinName = match name.parse() {
            Ok(b) => b,
            Err(e) => return fail(&e),
        };
        let mut builtin_params = BuiltinParams::default();
        if !params.is_null() {
            let text = match parse_cstr(params, "problem params") {
                Ok(s) => s,
                Err(status) => return status,
            };
            for pair in text.split(',').filter(|p| !p.trim().is_empty()) {
                let Some((key, value)) = pair.split_once('=') else {
                    set_error(&format!("expected key=value, got `{pair}`"));
                    return HjdStatus::InvalidArgument;
                };
                let Ok(value) = value.trim().parse::<f64>() else {
                    set_error(&format!("bad number in `{pair}`"));
                    return HjdStatus::InvalidArgument;
                };
                match key.trim() {
                    "rho" => builtin_params.rho = value,
                    "delta" => builtin_params.delta = value,
                    other => {
                        set_error(&format!("unknown problem parameter `{other}`"));
                        return HjdStatus::InvalidArgument;
                    }
                }
            }
        }
        match make_builtin(builtin, &builtin_params) {
            Ok(problem) => {
                *out = Box::into_raw(Box::new(HjdProblem {
                    problem,
                    name: builtin,
                }));
                HjdStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a problem handle. NULL is ignored.
///
/// # Safety
/// `problem` must come from [`hjd_problem_builtin`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hjd_problem_free(problem: *mut HjdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Direct value iteration on a square lattice of `cells` cells per side.
/// Pass 0 for `n_a`/`n_b` to get the problem's default sample counts and a
/// non-positive `tol` for the default tolerance.
///
/// # Safety
/// `problem` must be a live handle; `out` must point to writable storage;
/// `stats` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hjd_solve(
    problem: *const HjdProblem,
    cells: u32,
    n_a: u32,
    n_b: u32,
    h_mode: u32,
    tol: f64,
    max_iter: u64,
    out: *mut *mut HjdField,
    stats: *mut HjdSolveStats,
) -> HjdStatus {
    guarded(|| {
        if problem.is_null() || out.is_null() {
            set_error("null handle");
            return HjdStatus::NullPointer;
        }
        let handle = &*problem;
        let mode = match step_mode_from(h_mode) {
            Ok(m) => m,
            Err(status) => return status,
        };
        let (default_na, default_nb) = analysis::default_samples(handle.name);
        let n_a = if n_a == 0 { default_na } else { n_a as usize };
        let n_b = if n_b == 0 { default_nb } else { n_b as usize };
        let run = || -> hjdecomp::Result<(GridSpec, ValueField, solver::SolveReport)> {
            let spec = GridSpec::unit_square(cells as usize);
            let grid = build_grid(spec, handle.problem.geometry)?;
            let controls = sample_controls(&handle.problem, n_a, n_b)?;
            let params = SolveParams {
                h: mode.step(grid.dx_max()),
                tol: if tol > 0.0 { tol } else { solver::DEFAULT_TOL },
                max_iter: if max_iter == 0 {
                    solver::DEFAULT_MAX_ITER
                } else {
                    max_iter as usize
                },
                sentinel: solver::DEFAULT_SENTINEL,
            };
            let exit_cost = handle.problem.exit_cost.clone();
            let bc = move |x: [f64; 2]| exit_cost.eval(x);
            let (field, report) = solver::solve(
                &handle.problem,
                &grid,
                &controls,
                &params,
                None,
                &bc,
                handle.problem.name.clone(),
            )?;
            Ok((spec, field, report))
        };
        match run() {
            Ok((spec, field, report)) => {
                if !stats.is_null() {
                    *stats = HjdSolveStats {
                        iterations: report.iterations as u64,
                        final_residual: report.final_residual,
                        seconds: report.wall_time_secs,
                        converged: report.converged,
                    };
                }
                if !report.converged {
                    set_error(&format!(
                        "did not converge: residual {:e} after {} iterations",
                        report.final_residual, report.iterations
                    ));
                    return HjdStatus::NotConverged;
                }
                *out = Box::into_raw(Box::new(HjdField { spec, field }));
                HjdStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Runs the coarse-to-fine pipeline: reconstruction on `coarse_cells`,
/// projection, `parts` concurrent masked fine solves, minimum assembly.
/// Zero-valued optional arguments select defaults (`n_a`, `n_b`, `workers`,
/// `tol <= 0`).
///
/// # Safety
/// `problem` must be a live handle; `out` must point to writable storage.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hjd_isa_run(
    problem: *const HjdProblem,
    coarse_cells: u32,
    fine_cells: u32,
    parts: u32,
    error_coeff: f64,
    lipschitz_bound: f64,
    order: f64,
    penalty: f64,
    tol: f64,
    workers: u32,
    n_a: u32,
    n_b: u32,
    out: *mut *mut HjdIsaResult,
) -> HjdStatus {
    guarded(|| {
        if problem.is_null() || out.is_null() {
            set_error("null handle");
            return HjdStatus::NullPointer;
        }
        let handle = &*problem;
        let (default_na, default_nb) = analysis::default_samples(handle.name);
        let recon = ReconstructionParams::new(error_coeff, lipschitz_bound, order, penalty);
        let config = TwoGridConfig {
            coarse: GridSpec::unit_square(coarse_cells as usize),
            fine: GridSpec::unit_square(fine_cells as usize),
            scheme: analysis::default_scheme(handle.name),
            parts: parts as usize,
            recon,
            penalty_scheme: analysis::table_penalty(handle.name),
            step_mode: StepMode::Dx,
            tol: if tol > 0.0 { tol } else { solver::DEFAULT_TOL },
            max_iter: solver::DEFAULT_MAX_ITER,
            sentinel: solver::DEFAULT_SENTINEL,
            n_a: if n_a == 0 { default_na } else { n_a as usize },
            n_b: if n_b == 0 { default_nb } else { n_b as usize },
            workers: if workers == 0 {
                analysis::default_workers()
            } else {
                workers as usize
            },
        };
        match run_two_grid(&handle.problem, &config) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(HjdIsaResult {
                    fine_spec: config.fine,
                    result,
                }));
                HjdStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Node count along x.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hjd_field_nx(field: *const HjdField) -> u32 {
    if field.is_null() {
        return 0;
    }
    (*field).spec.nx as u32
}

/// Node count along y.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hjd_field_ny(field: *const HjdField) -> u32 {
    if field.is_null() {
        return 0;
    }
    (*field).spec.ny as u32
}

/// Borrowed pointer to the nx*ny node values in row-major order (j outer).
/// Valid while the field handle lives. `len` (optional) receives the count.
///
/// # Safety
/// `field` must be a live handle; `len` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hjd_field_values(
    field: *const HjdField,
    len: *mut usize,
) -> *const f64 {
    if field.is_null() {
        if !len.is_null() {
            *len = 0;
        }
        return ptr::null();
    }
    let f = &*field;
    if !len.is_null() {
        *len = f.field.values.len();
    }
    f.field.values.as_ptr()
}

/// Writes the field in the text dump format.
///
/// # Safety
/// `field` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hjd_field_write_text(
    field: *const HjdField,
    path: *const c_char,
) -> HjdStatus {
    guarded(|| {
        if field.is_null() {
            set_error("field handle is null");
            return HjdStatus::NullPointer;
        }
        let path = match parse_cstr(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let f = &*field;
        match hjdecomp::io::write_field(Path::new(path), &f.spec, &f.field) {
            Ok(()) => HjdStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Releases a field handle. NULL is ignored.
///
/// # Safety
/// `field` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hjd_field_free(field: *mut HjdField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Copies the assembled fine field out of a pipeline result.
///
/// # Safety
/// `result` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn hjd_isa_field(
    result: *const HjdIsaResult,
    out: *mut *mut HjdField,
) -> HjdStatus {
    guarded(|| {
        if result.is_null() || out.is_null() {
            set_error("null handle");
            return HjdStatus::NullPointer;
        }
        let r = &*result;
        *out = Box::into_raw(Box::new(HjdField {
            spec: r.fine_spec,
            field: r.result.field.clone(),
        }));
        HjdStatus::Ok
    })
}

/// Number of boundary parts / fine masks.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hjd_isa_parts(result: *const HjdIsaResult) -> u32 {
    if result.is_null() {
        return 0;
    }
    (*result).result.masks.len() as u32
}

/// Mask membership of fine node (i, j) for one part: 1 member, 0 not,
/// -1 on bad arguments.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hjd_isa_mask_member(
    result: *const HjdIsaResult,
    part: u32,
    i: u32,
    j: u32,
) -> i32 {
    if result.is_null() {
        return -1;
    }
    let r = &*result;
    let (nx, ny) = (r.fine_spec.nx as u32, r.fine_spec.ny as u32);
    if part as usize >= r.result.masks.len() || i >= nx || j >= ny {
        return -1;
    }
    r.result.masks[part as usize].members[(j * nx + i) as usize] as i32
}

/// Wall-clock sum over all pipeline stages, in seconds.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hjd_isa_total_seconds(result: *const HjdIsaResult) -> f64 {
    if result.is_null() {
        return 0.0;
    }
    (*result).result.total_seconds()
}

/// Fine nodes covered by two or more masks.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hjd_isa_overlap_nodes(result: *const HjdIsaResult) -> u64 {
    if result.is_null() {
        return 0;
    }
    (*result).result.overlap_nodes as u64
}

/// Releases a pipeline result. NULL is ignored.
///
/// # Safety
/// `result` must come from [`hjd_isa_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hjd_isa_free(result: *mut HjdIsaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
