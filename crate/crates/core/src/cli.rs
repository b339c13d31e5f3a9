//! Command-line front end: `solve`, `decompose`, `isa` and `bench`.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    self, area_fraction, bench_run, table_scenarios, BenchMode, BENCH_HEADER,
};
use crate::decomposition::{
    check_h2, partition_boundary, run_reconstruction, PartitionScheme, PenaltyScheme,
    ReconstructionParams,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, GridSpec};
use crate::io;
use crate::problems::{make_builtin, sample_controls, BuiltinName, BuiltinParams};
use crate::solver::{self, SolveParams, StepMode};
use crate::twogrid::run_two_grid;

#[derive(Debug, Parser)]
#[command(
    name = "hjdecomp",
    about = "Semi-Lagrangian Hamilton-Jacobi solver with independent-subdomain decomposition",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Direct value iteration on one grid.
    Solve(SolveArgs),
    /// Sub-domain reconstruction on one grid (auxiliary solves, minimum
    /// assembly, threshold masks).
    Decompose(DecomposeArgs),
    /// Coarse-grid reconstruction, mask projection and parallel masked fine
    /// solves.
    Isa(IsaArgs),
    /// Built-in benchmark tables (CSV output).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Problem name: eikonal-square | eikonal-kruzkov | strip-flat |
    /// van-der-pol | pursuit-evasion.
    #[arg(long)]
    problem: Option<String>,

    /// Problem parameter as key=value (rho, delta); repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// Player control samples.
    #[arg(long)]
    na: Option<usize>,

    /// Adversary control samples.
    #[arg(long)]
    nb: Option<usize>,

    /// Step rule: dx | dx23.
    #[arg(long = "h-mode")]
    h_mode: Option<String>,

    /// Fixed-point stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,

    /// Iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,

    /// Worker threads (default: HJP_WORKERS or 4).
    #[arg(long)]
    workers: Option<usize>,

    /// Reserved; every pipeline here is deterministic.
    #[arg(long)]
    #[allow(dead_code)]
    seed: Option<u64>,

    /// key=value file providing defaults for any long flag.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Grid resolution in cells per side (nodes = cells + 1).
    #[arg(long)]
    nx: Option<usize>,

    /// Field dump output path.
    #[arg(long = "out-field")]
    out_field: Option<PathBuf>,

    /// CSV report path (problem,nx,iters,residual,seconds).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    common: CommonArgs,

    #[arg(long)]
    nx: Option<usize>,

    /// Number of boundary parts.
    #[arg(long)]
    parts: Option<usize>,

    /// Partition layout: square | ball | vertical (default per problem).
    #[arg(long)]
    scheme: Option<String>,

    /// Convergence constant of the threshold.
    #[arg(long = "C")]
    error_coeff: Option<f64>,

    /// Lipschitz bound of the threshold.
    #[arg(long = "M")]
    lipschitz: Option<f64>,

    /// Convergence order q.
    #[arg(long = "q")]
    order: Option<f64>,

    /// Penalty amplitude of the auxiliary exit costs.
    #[arg(long)]
    gamma: Option<f64>,

    /// Active-set tie tolerance.
    #[arg(long = "tie-tol")]
    tie_tol: Option<f64>,

    /// Penalty shape: constant | ramp.
    #[arg(long)]
    penalty: Option<String>,

    /// Run the decomposability check on the overlap set and print it.
    #[arg(long = "check-h2")]
    check_h2: bool,

    /// Dump of the reassembled minimum field.
    #[arg(long = "out-field")]
    out_field: Option<PathBuf>,

    /// Directory for mask exports (PGM per part + masks.txt).
    #[arg(long = "out-masks")]
    out_masks: Option<PathBuf>,

    /// CSV report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IsaArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Coarse resolution in cells per side.
    #[arg(long)]
    coarse: Option<usize>,

    /// Fine resolution in cells per side.
    #[arg(long)]
    fine: Option<usize>,

    #[arg(long)]
    parts: Option<usize>,

    #[arg(long)]
    scheme: Option<String>,

    #[arg(long = "C")]
    error_coeff: Option<f64>,

    #[arg(long = "M")]
    lipschitz: Option<f64>,

    #[arg(long = "q")]
    order: Option<f64>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    penalty: Option<String>,

    #[arg(long = "out-field")]
    out_field: Option<PathBuf>,

    #[arg(long = "out-masks")]
    out_masks: Option<PathBuf>,

    /// Stage CSV path (stage,part,iters,seconds).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Table to reproduce: t1 | t2 | t3 | t4 | t5.
    #[arg(long)]
    table: Option<String>,

    /// CSV output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Directory holding stored reference fields.
    #[arg(long = "ref-dir")]
    ref_dir: Option<PathBuf>,

    /// Generate missing reference fields before running.
    #[arg(long = "make-refs")]
    make_refs: bool,

    /// Override the grid sizes of the table (cells per side); repeatable.
    #[arg(long = "size")]
    sizes: Vec<usize>,
}

/// key=value defaults loaded from --config; explicit flags win.
#[derive(Debug, Default)]
struct ConfigMap(HashMap<String, String>);

impl ConfigMap {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            for (lineno, line) in fs::read_to_string(path)?.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::InvalidArgs(format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidArgs(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
        }
    }
}

fn resolve<T: FromStr>(flag: Option<T>, cfg: &ConfigMap, key: &str) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn required<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidArgs(format!("missing required option --{what}")))
}

struct CommonResolved {
    problem: BuiltinName,
    problem_params: BuiltinParams,
    n_a: usize,
    n_b: usize,
    step_mode: StepMode,
    tol: f64,
    max_iter: usize,
    workers: usize,
}

fn resolve_common(args: &CommonArgs, cfg: &ConfigMap) -> Result<CommonResolved> {
    let name_str = required(
        resolve(args.problem.clone(), cfg, "problem")?,
        "problem",
    )?;
    let problem: BuiltinName = name_str.parse()?;
    let mut problem_params = BuiltinParams::default();
    let mut kv: Vec<String> = Vec::new();
    if let Some(from_cfg) = cfg.0.get("param") {
        kv.push(from_cfg.clone());
    }
    kv.extend(args.params.iter().cloned());
    for pair in &kv {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgs(format!("--param expects key=value, got `{pair}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgs(format!("--param {key}: bad number `{value}`")))?;
        match key.trim() {
            "rho" => problem_params.rho = value,
            "delta" => problem_params.delta = value,
            other => {
                return Err(Error::InvalidArgs(format!(
                    "unknown problem parameter `{other}` (expected rho or delta)"
                )))
            }
        }
    }
    let (default_na, default_nb) = analysis::default_samples(problem);
    let step_mode: StepMode = resolve(args.h_mode.clone(), cfg, "h-mode")?
        .map(|s: String| s.parse())
        .transpose()?
        .unwrap_or(StepMode::Dx);
    Ok(CommonResolved {
        problem,
        problem_params,
        n_a: resolve(args.na, cfg, "na")?.unwrap_or(default_na),
        n_b: resolve(args.nb, cfg, "nb")?.unwrap_or(default_nb),
        step_mode,
        tol: resolve(args.tol, cfg, "tol")?.unwrap_or(solver::DEFAULT_TOL),
        max_iter: resolve(args.max_iter, cfg, "max-iter")?.unwrap_or(solver::DEFAULT_MAX_ITER),
        workers: resolve(args.workers, cfg, "workers")?.unwrap_or_else(analysis::default_workers),
    })
}

fn recon_from_flags(
    error_coeff: Option<f64>,
    lipschitz: Option<f64>,
    order: Option<f64>,
    gamma: Option<f64>,
    tie_tol: Option<f64>,
    cfg: &ConfigMap,
    tol: f64,
) -> Result<ReconstructionParams> {
    let mut params = ReconstructionParams::new(
        resolve(error_coeff, cfg, "C")?.unwrap_or(1.0),
        resolve(lipschitz, cfg, "M")?.unwrap_or(1.0),
        resolve(order, cfg, "q")?.unwrap_or(0.5),
        resolve(gamma, cfg, "gamma")?.unwrap_or(1.0),
    );
    params.tie_tol = resolve(tie_tol, cfg, "tie-tol")?.unwrap_or(tol * 10.0);
    params.validate()?;
    Ok(params)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))
}

fn write_masks(
    dir: &Path,
    grid: &crate::grid::Grid,
    masks: &[crate::decomposition::SubdomainMask],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for mask in masks {
        io::write_mask_pgm(
            &dir.join(format!("mask_{}.pgm", mask.part)),
            grid,
            &mask.members,
        )?;
    }
    let list: Vec<(usize, &[bool])> = masks
        .iter()
        .map(|m| (m.part, m.members.as_slice()))
        .collect();
    io::write_mask_list(&dir.join("masks.txt"), &list)?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &cfg)?;
    let cells = required(resolve(args.nx, &cfg, "nx")?, "nx")?;
    if cells < 1 {
        return Err(Error::InvalidArgs("nx must be at least 1 cell".into()));
    }
    let problem = make_builtin(common.problem, &common.problem_params)?;
    let grid = build_grid(GridSpec::unit_square(cells), problem.geometry)?;
    let controls = sample_controls(&problem, common.n_a, common.n_b)?;
    let params = SolveParams {
        h: common.step_mode.step(grid.dx_max()),
        tol: common.tol,
        max_iter: common.max_iter,
        sentinel: solver::DEFAULT_SENTINEL,
    };
    let exit_cost = problem.exit_cost.clone();
    let bc = move |x: [f64; 2]| exit_cost.eval(x);
    let pool = build_pool(common.workers)?;
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
    if let Some(path) = &args.out_field {
        io::write_field(path, &grid.spec, &field)?;
    }
    if let Some(path) = &args.report {
        let mut file = fs::File::create(path)?;
        writeln!(file, "{}", io::SOLVE_REPORT_HEADER)?;
        writeln!(file, "{}", io::solve_report_row(&problem.name, grid.nx(), &report))?;
    }
    println!(
        "{}: {} nodes, {} iterations, residual {:.3e}, {:.3}s",
        problem.name,
        grid.node_count(),
        report.iterations,
        report.final_residual,
        report.wall_time_secs
    );
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        });
    }
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &cfg)?;
    let cells = required(resolve(args.nx, &cfg, "nx")?, "nx")?;
    let parts = resolve(args.parts, &cfg, "parts")?.unwrap_or(4);
    let problem = make_builtin(common.problem, &common.problem_params)?;
    let scheme: PartitionScheme = match resolve(args.scheme.clone(), &cfg, "scheme")? {
        Some(s) => s.parse()?,
        None => analysis::default_scheme(common.problem),
    };
    let penalty_scheme: PenaltyScheme = match resolve(args.penalty.clone(), &cfg, "penalty")? {
        Some(s) => s.parse()?,
        None => PenaltyScheme::ConstantBump,
    };
    let recon = recon_from_flags(
        args.error_coeff,
        args.lipschitz,
        args.order,
        args.gamma,
        args.tie_tol,
        &cfg,
        common.tol,
    )?;
    let grid = build_grid(GridSpec::unit_square(cells), problem.geometry)?;
    // reject bad scheme/part combinations before any solve starts
    let partition = partition_boundary(&grid, problem.geometry, parts, scheme)?;
    let controls = sample_controls(&problem, common.n_a, common.n_b)?;
    let params = SolveParams {
        h: common.step_mode.step(grid.dx_max()),
        tol: common.tol,
        max_iter: common.max_iter,
        sentinel: solver::DEFAULT_SENTINEL,
    };
    let pool = build_pool(common.workers)?;
    let outcome = pool.install(|| {
        run_reconstruction(
            &problem,
            &grid,
            &controls,
            &params,
            &partition,
            &recon,
            penalty_scheme,
        )
    })?;
    for mask in &outcome.masks {
        println!(
            "part {}: {} nodes, fraction {:.4}",
            mask.part,
            mask.member_count(),
            area_fraction(mask, &grid)
        );
    }
    if args.check_h2 {
        let report = check_h2(
            &problem,
            &controls,
            &outcome.aux_fields,
            &outcome.combined,
            &outcome.active,
            &grid,
            16,
            10.0 * grid.dx_max(),
            analysis::CHECK_CUTOFF,
            analysis::FRONTIER_MARGIN,
        )?;
        println!(
            "overlap check: {} nodes checked, {} skipped, max residual {:.3e}, tol {:.3e}: {}",
            report.nodes_checked,
            report.nodes_skipped,
            report.max_residual,
            report.tol,
            if report.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(path) = &args.out_field {
        io::write_field(path, &grid.spec, &outcome.combined)?;
    }
    if let Some(dir) = &args.out_masks {
        write_masks(dir, &grid, &outcome.masks)?;
    }
    if let Some(path) = &args.report {
        let mut file = fs::File::create(path)?;
        writeln!(file, "{}", io::SOLVE_REPORT_HEADER)?;
        for (part, report) in outcome.aux_reports.iter().enumerate() {
            writeln!(
                file,
                "{}",
                io::solve_report_row(&format!("{}:aux{}", problem.name, part), grid.nx(), report)
            )?;
        }
    }
    Ok(())
}

fn cmd_isa(args: &IsaArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let common = resolve_common(&args.common, &cfg)?;
    let coarse = required(resolve(args.coarse, &cfg, "coarse")?, "coarse")?;
    let fine = required(resolve(args.fine, &cfg, "fine")?, "fine")?;
    let parts = resolve(args.parts, &cfg, "parts")?.unwrap_or(4);
    let problem = make_builtin(common.problem, &common.problem_params)?;
    let scheme: PartitionScheme = match resolve(args.scheme.clone(), &cfg, "scheme")? {
        Some(s) => s.parse()?,
        None => analysis::default_scheme(common.problem),
    };
    // the ramp keeps the seam ring of exit nodes inside the masks, which the
    // triangle projection needs for corner coverage
    let penalty_scheme: PenaltyScheme = match resolve(args.penalty.clone(), &cfg, "penalty")? {
        Some(s) => s.parse()?,
        None => PenaltyScheme::DistanceRamp,
    };
    let recon = recon_from_flags(
        args.error_coeff,
        args.lipschitz,
        args.order,
        args.gamma,
        None,
        &cfg,
        common.tol,
    )?;
    // cheap validation before the heavy stages
    {
        let probe = build_grid(GridSpec::unit_square(coarse), problem.geometry)?;
        partition_boundary(&probe, problem.geometry, parts, scheme)?;
    }
    let config = crate::twogrid::TwoGridConfig {
        coarse: GridSpec::unit_square(coarse),
        fine: GridSpec::unit_square(fine),
        scheme,
        parts,
        recon,
        penalty_scheme,
        step_mode: common.step_mode,
        tol: common.tol,
        max_iter: common.max_iter,
        sentinel: solver::DEFAULT_SENTINEL,
        n_a: common.n_a,
        n_b: common.n_b,
        workers: common.workers,
    };
    let result = run_two_grid(&problem, &config)?;
    let fine_grid = build_grid(config.fine, problem.geometry)?;
    if let Some(path) = &args.out_field {
        io::write_field(path, &fine_grid.spec, &result.field)?;
    }
    if let Some(dir) = &args.out_masks {
        write_masks(dir, &fine_grid, &result.masks)?;
    }
    if let Some(path) = &args.report {
        let mut file = fs::File::create(path)?;
        writeln!(file, "stage,part,iters,seconds")?;
        for row in &result.stages {
            writeln!(
                file,
                "{},{},{},{:.6}",
                row.stage,
                row.part.map(|p| p.to_string()).unwrap_or_default(),
                row.iterations.map(|i| i.to_string()).unwrap_or_default(),
                row.seconds
            )?;
        }
    }
    println!(
        "{}: assembled {} fine nodes from {} parts, {} overlap nodes, {:.3}s total",
        problem.name,
        fine_grid.node_count(),
        parts,
        result.overlap_nodes,
        result.total_seconds()
    );
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = ConfigMap::load(args.common.config.as_deref())?;
    let table = required(resolve(args.table.clone(), &cfg, "table")?, "table")?;
    let ref_dir = match resolve(args.ref_dir.clone(), &cfg, "ref-dir")? {
        Some(d) => Some(d),
        None => (table.trim() == "t5").then(|| PathBuf::from("bench_refs")),
    };
    if args.make_refs {
        if let Some(dir) = &ref_dir {
            for problem in [BuiltinName::VanDerPol] {
                if !analysis::reference_path(dir, problem).exists() {
                    eprintln!("generating {} reference field...", problem);
                    analysis::generate_reference(dir, problem)?;
                }
            }
        }
    }
    let mut scenarios = table_scenarios(&table, ref_dir.as_deref())?;
    if !args.sizes.is_empty() {
        let template = scenarios[0].clone();
        scenarios = args
            .sizes
            .iter()
            .map(|&cells| {
                let mut s = template.clone();
                match s.mode {
                    BenchMode::Reconstruction => s.coarse_cells = cells,
                    _ => s.fine_cells = cells,
                }
                s
            })
            .collect();
    }
    let workers = resolve(args.common.workers, &cfg, "workers")?;
    let mut lines = vec![BENCH_HEADER.to_string()];
    for mut scenario in scenarios {
        if let Some(w) = workers {
            scenario.workers = w;
        }
        for row in bench_run(&scenario)? {
            lines.push(row.to_csv());
        }
    }
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}


/// Parses the argument list, runs the selected pipeline and returns the
/// process exit status; every module error becomes a one-line diagnostic.
pub fn parse_and_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap already formats help/version/usage errors
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Isa(args) => cmd_isa(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
