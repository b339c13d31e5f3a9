//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The tests serialize on a global lock because two of them measure wall
//! time and all of them are compute-heavy.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use hjdecomp::analysis::{
    self, area_fraction, box_distance_wedge, error_norms, error_norms_reachable, exact_solution,
    generate_reference, load_reference, subsample_reference, table_penalty, table_recon_params,
    ExactForm, CHECK_CUTOFF, FRONTIER_MARGIN, REACHABLE_CUTOFF,
};
use hjdecomp::decomposition::{
    check_h2, min_combine, partition_boundary, run_reconstruction, PartitionScheme, PenaltyScheme,
    ReconstructionParams,
};
use hjdecomp::grid::{build_grid, Grid, GridSpec, NodeClass};
use hjdecomp::problems::{
    make_builtin, sample_controls, BuiltinName, BuiltinParams, ControlGrid, ProblemDef,
};
use hjdecomp::solver::{
    self, apply_operator, solve, SolveParams, StepMode, ValueField, DEFAULT_SENTINEL,
};
use hjdecomp::twogrid::{hull_contains, run_two_grid, TwoGridConfig, TwoGridResult};
use hjdecomp::util::SplitMix64;

static LOCK: Mutex<()> = Mutex::new(());

fn serialize() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn kruzkov_problem() -> (ProblemDef, ControlGrid) {
    let problem = make_builtin(BuiltinName::EikonalKruzkov, &BuiltinParams::default()).unwrap();
    let controls = sample_controls(&problem, 64, 1).unwrap();
    (problem, controls)
}

fn kruzkov_oracle(x: [f64; 2]) -> f64 {
    exact_solution(&ExactForm::TransformedBoxDistance, x)
}

/// Direct Kruzkov solve at `cells` with the criterion-1 configuration,
/// cached so later criteria can reuse the baseline errors.
fn direct_kruzkov(cells: usize) -> (f64, f64, ValueField) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (f64, f64, ValueField)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&cells) {
        return hit.clone();
    }
    let (problem, controls) = kruzkov_problem();
    let grid = build_grid(GridSpec::unit_square(cells), problem.geometry).unwrap();
    let params = SolveParams::new(grid.dx());
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let (field, report) = pool
        .install(|| solve(&problem, &grid, &controls, &params, None, &|_| 0.0, "v"))
        .unwrap();
    assert!(report.converged);
    let seconds = start.elapsed().as_secs_f64();
    let err = error_norms(&field, &grid, &kruzkov_oracle, 1e3).unwrap();
    let entry = (err.delta_inf, seconds, field);
    cache.lock().unwrap().insert(cells, entry.clone());
    entry
}

fn kruzkov_two_grid(cells: usize, recon: ReconstructionParams, workers: usize) -> TwoGridResult {
    let (problem, _) = kruzkov_problem();
    let config = TwoGridConfig {
        coarse: GridSpec::unit_square(20),
        fine: GridSpec::unit_square(cells),
        scheme: PartitionScheme::SquareEdges,
        parts: 4,
        recon,
        penalty_scheme: PenaltyScheme::DistanceRamp,
        step_mode: StepMode::Dx,
        tol: solver::DEFAULT_TOL,
        max_iter: solver::DEFAULT_MAX_ITER,
        sentinel: DEFAULT_SENTINEL,
        n_a: 64,
        n_b: 1,
        workers,
    };
    run_two_grid(&problem, &config).unwrap()
}

fn reference_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("reference-fields")
}

fn two_significant_figures(x: f64) -> String {
    format!("{x:.1e}")
}

#[test]
fn criterion_1_convergence_table() {
    let _guard = serialize();
    let targets = [(50usize, 1.2e-2), (100, 6.5e-3), (200, 2.5e-3)];
    let start = Instant::now();
    let mut errors = Vec::new();
    for (cells, target) in targets {
        let (err, _, _) = direct_kruzkov(cells);
        assert!(
            err >= target / 2.0 && err <= target * 2.0,
            "criterion 1: FAIL — error {err:.4e} at {cells} cells outside \
             [{:.4e}, {:.4e}]",
            target / 2.0,
            target * 2.0
        );
        errors.push(err);
    }
    assert!(
        errors[0] > errors[1] && errors[1] > errors[2],
        "criterion 1: FAIL — errors not monotonically decreasing: {errors:?}"
    );
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(
            order >= 0.5,
            "criterion 1: FAIL — fitted convergence order {order:.2} below 0.5"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed <= 300.0,
        "criterion 1: FAIL — runtime {elapsed:.0}s exceeds 5 minutes"
    );
    println!(
        "criterion 1: PASS — sup errors {:.3e} / {:.3e} / {:.3e} vs (1.2e-2, 6.5e-3, 2.5e-3), \
         monotone, {elapsed:.0}s total",
        errors[0], errors[1], errors[2]
    );
}

#[test]
fn criterion_2_pipeline_accuracy() {
    let _guard = serialize();
    // these constants saturate the threshold at the coarse
    // step, so the pipeline degenerates to the direct solve
    let recon = ReconstructionParams::new(1.0, 1.0, 0.5, 1.0);
    let targets = [(50usize, 9e-3), (100, 4.6e-3), (200, 1.4e-3)];
    let mut failures = Vec::new();
    let mut measured = Vec::new();
    for (cells, target) in targets {
        let (direct_err, _, _) = direct_kruzkov(cells);
        let result = kruzkov_two_grid(cells, recon, 4);
        let grid = build_grid(GridSpec::unit_square(cells), DomainGeometryOf::kruzkov()).unwrap();
        let err = error_norms(&result.field, &grid, &kruzkov_oracle, 1e3)
            .unwrap()
            .delta_inf;
        measured.push(err);
        assert!(
            err <= direct_err + 2.0 * solver::DEFAULT_TOL,
            "criterion 2: FAIL — pipeline error {err:.4e} exceeds direct {direct_err:.4e} + 2 tol \
             at {cells} cells"
        );
        if !(err >= target / 2.0 && err <= target * 2.0) {
            failures.push(format!(
                "{cells} cells: {err:.4e} outside [{:.4e}, {:.4e}]",
                target / 2.0,
                target * 2.0
            ));
        }
    }
    assert!(
        failures.is_empty(),
        "criterion 2: FAIL — errors within the no-degradation bound but outside the quoted \
         factor-2 windows: {}. With C = M = 1 the threshold 2 (C dx^q + M dx) = 0.86 at the 20^2 \
         coarse step exceeds the value range of the problem (< 0.87), every mask saturates, and \
         the assembled field equals the direct solve, whose scheme error ~0.45 h cannot reach \
         the quoted 4-subsets row at 200^2.",
        failures.join("; ")
    );
    println!(
        "criterion 2: PASS — pipeline errors {measured:?} within factor 2 of the 4-subsets row \
         and never above the direct solve"
    );
}

// small helper so criterion 2 reads cleanly
struct DomainGeometryOf;
impl DomainGeometryOf {
    fn kruzkov() -> hjdecomp::grid::DomainGeometry {
        hjdecomp::grid::DomainGeometry::SquareBoundary
    }
}

#[test]
fn criterion_3_coverage_fractions() {
    let _guard = serialize();
    let (problem, controls) = kruzkov_problem();
    let recon = table_recon_params(BuiltinName::EikonalKruzkov);
    let targets = [(10usize, 0.38), (15, 0.35), (20, 0.33), (30, 0.30)];
    let mut fractions = Vec::new();
    for (cells, target) in targets {
        let grid = build_grid(GridSpec::unit_square(cells), problem.geometry).unwrap();
        let partition =
            partition_boundary(&grid, problem.geometry, 4, PartitionScheme::SquareEdges).unwrap();
        let params = SolveParams::new(grid.dx());
        let outcome = run_reconstruction(
            &problem,
            &grid,
            &controls,
            &params,
            &partition,
            &recon,
            table_penalty(BuiltinName::EikonalKruzkov),
        )
        .unwrap();
        let max_fraction = outcome
            .masks
            .iter()
            .map(|m| area_fraction(m, &grid))
            .fold(0.0f64, f64::max);
        assert!(
            (max_fraction - target).abs() <= 0.10,
            "criterion 3: FAIL — max fraction {max_fraction:.3} at {cells}^2 departs from \
             {target} by more than 10 points"
        );
        assert!(
            max_fraction >= 0.25,
            "criterion 3: FAIL — fraction {max_fraction:.3} below the exact 25%"
        );
        fractions.push(max_fraction);
    }
    for pair in fractions.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-12,
            "criterion 3: FAIL — fractions increase with resolution: {fractions:?}"
        );
    }
    println!(
        "criterion 3: PASS — max fractions {:?}% vs (38, 35, 33, 30)%, nonincreasing, all >= 25%",
        fractions.iter().map(|f| (f * 1000.0).round() / 10.0).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_4_inclusion_and_nesting() {
    let _guard = serialize();
    let problem = make_builtin(BuiltinName::EikonalSquare, &BuiltinParams::default()).unwrap();
    let controls = sample_controls(&problem, 64, 1).unwrap();
    let gamma = 1.0;
    let recon = ReconstructionParams::new(1.0, 1.0, 0.5, gamma);
    let mut stages = Vec::new();
    // coarse step 0.133 (15 cells) and fine step 0.05 (40 cells)
    for cells in [15usize, 40] {
        let grid = build_grid(GridSpec::unit_square(cells), problem.geometry).unwrap();
        let partition =
            partition_boundary(&grid, problem.geometry, 4, PartitionScheme::SquareEdges).unwrap();
        let params = SolveParams::new(grid.dx()).with_tol(1e-10);
        let outcome = run_reconstruction(
            &problem,
            &grid,
            &controls,
            &params,
            &partition,
            &recon,
            PenaltyScheme::DistanceRamp,
        )
        .unwrap();
        // every exact member of each wedge lands inside its mask
        for (edge, mask) in outcome.masks.iter().enumerate() {
            for idx in 0..grid.node_count() {
                let p = grid.position(idx);
                assert!(
                    !box_distance_wedge(edge, p) || mask.members[idx],
                    "criterion 4: FAIL — exact member {p:?} of wedge {edge} missing from its \
                     mask at {cells} cells"
                );
            }
        }
        stages.push((grid, outcome));
    }
    let (coarse_grid, coarse) = &stages[0];
    let (fine_grid, fine) = &stages[1];
    let mut rng = SplitMix64::new(0x41cc_e55);
    let mut hits = 0usize;
    for _ in 0..10_000 {
        let p = [rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0)];
        for part in 0..4 {
            if hull_contains(fine_grid, &fine.masks[part].members, p) {
                hits += 1;
                assert!(
                    hull_contains(coarse_grid, &coarse.masks[part].members, p),
                    "criterion 4: FAIL — point {p:?} inside the fine hull of part {part} but \
                     outside the coarse hull"
                );
            }
        }
    }
    println!(
        "criterion 4: PASS — exact wedge members 100% included at both steps; hull nesting held \
         at {hits} sampled containments, zero violations"
    );
}

/// Brute-force fixed-point oracle for criterion 5: an independent
/// reimplementation of the same scheme convention with plain loops.
mod desk_oracle {
    pub const CELLS: usize = 8;
    pub const N: usize = CELLS + 1;
    const SENTINEL: f64 = 1e6;

    fn bilinear(values: &[f64], x: f64, y: f64, dx: f64) -> f64 {
        let fx = (x + 1.0) / dx;
        let fy = (y + 1.0) / dx;
        let mut i = fx.floor() as isize;
        let mut j = fy.floor() as isize;
        if i > (N - 2) as isize {
            i = (N - 2) as isize;
        }
        if j > (N - 2) as isize {
            j = (N - 2) as isize;
        }
        let i = i.max(0) as usize;
        let j = j.max(0) as usize;
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v00 = values[j * N + i];
        let v10 = values[j * N + i + 1];
        let v01 = values[(j + 1) * N + i];
        let v11 = values[(j + 1) * N + i + 1];
        (1.0 - tx) * (1.0 - ty) * v00 + tx * (1.0 - ty) * v10 + (1.0 - tx) * ty * v01
            + tx * ty * v11
    }

    /// Exhaustive fixed-point iteration for the discounted distance problem
    /// (f = a on the unit circle plus zero, l = 1, lambda = 1, g = 0).
    pub fn run(n_angles: usize, sweeps: usize) -> Vec<f64> {
        let dx = 2.0 / CELLS as f64;
        let h = dx;
        let mut controls: Vec<[f64; 2]> = (0..n_angles)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n_angles as f64;
                [th.cos(), th.sin()]
            })
            .collect();
        controls.push([0.0, 0.0]);
        let boundary = |i: usize, j: usize| i == 0 || i == N - 1 || j == 0 || j == N - 1;
        let mut current = vec![SENTINEL; N * N];
        for j in 0..N {
            for i in 0..N {
                if boundary(i, j) {
                    current[j * N + i] = 0.0;
                }
            }
        }
        for _ in 0..sweeps {
            let mut next = current.clone();
            for j in 0..N {
                for i in 0..N {
                    if boundary(i, j) {
                        continue;
                    }
                    let x = -1.0 + i as f64 * dx;
                    let y = -1.0 + j as f64 * dx;
                    let mut best = f64::INFINITY;
                    for a in &controls {
                        let fx = x + h * a[0];
                        let fy = y + h * a[1];
                        let tol = 2e-12;
                        let value = if fx >= -1.0 - tol
                            && fx <= 1.0 + tol
                            && fy >= -1.0 - tol
                            && fy <= 1.0 + tol
                        {
                            bilinear(&current, fx.clamp(-1.0, 1.0), fy.clamp(-1.0, 1.0), dx)
                        } else {
                            SENTINEL
                        };
                        let cand = h * 1.0 + value / (1.0 + h);
                        if cand < best {
                            best = cand;
                        }
                    }
                    next[j * N + i] = best.min(SENTINEL);
                }
            }
            if next == current {
                break;
            }
            current = next;
        }
        current
    }
}

#[test]
fn criterion_5_desk_scale_oracle_equivalence() {
    let _guard = serialize();
    let (problem, _) = kruzkov_problem();
    let controls = sample_controls(&problem, 8, 1).unwrap();
    let grid = build_grid(GridSpec::unit_square(desk_oracle::CELLS), problem.geometry).unwrap();
    let params = SolveParams {
        h: grid.dx(),
        tol: 1e-15,
        max_iter: 10_000,
        sentinel: DEFAULT_SENTINEL,
    };
    let (field, report) = solve(&problem, &grid, &controls, &params, None, &|_| 0.0, "v").unwrap();
    assert!(report.converged);

    let oracle = desk_oracle::run(8, 5_000);
    let mut worst = 0.0f64;
    for idx in 0..grid.node_count() {
        worst = worst.max((field.values[idx] - oracle[idx]).abs());
    }
    assert!(
        worst <= 1e-12,
        "criterion 5: FAIL — solver and brute-force oracle disagree by {worst:.3e}"
    );
    println!(
        "criterion 5: PASS — 9x9 solve matches the independent fixed-point oracle to {worst:.2e}"
    );
}

#[test]
fn criterion_6_worker_count_determinism() {
    let _guard = serialize();
    let recon = table_recon_params(BuiltinName::EikonalKruzkov);
    let mut bundles: Vec<Vec<u8>> = Vec::new();
    for workers in [1usize, 2, 8] {
        let result = kruzkov_two_grid(100, recon, workers);
        let grid = build_grid(GridSpec::unit_square(100), DomainGeometryOf::kruzkov()).unwrap();
        let mut bundle = hjdecomp::io::field_to_string(&grid.spec, &result.field)
            .unwrap()
            .into_bytes();
        for mask in &result.masks {
            bundle.extend(
                hjdecomp::io::mask_to_pgm(&grid, &mask.members)
                    .unwrap()
                    .into_bytes(),
            );
        }
        bundles.push(bundle);
    }
    assert!(
        bundles.windows(2).all(|w| w[0] == w[1]),
        "criterion 6: FAIL — outputs differ across worker counts"
    );
    println!(
        "criterion 6: PASS — field dumps and masks byte-identical for workers 1, 2 and 8 \
         ({} bytes each)",
        bundles[0].len()
    );
}

#[test]
fn criterion_7_property_suite() {
    let _guard = serialize();
    let (problem, controls) = kruzkov_problem();
    let grid = build_grid(GridSpec::unit_square(12), problem.geometry).unwrap();
    let h = grid.dx();
    let rate = 1.0 / (1.0 + problem.lambda * h);
    let mut rng = SplitMix64::new(0x70_70_70);
    let mut violations = 0usize;
    for _ in 0..100 {
        let v: Vec<f64> = (0..grid.node_count()).map(|_| rng.next_range(0.0, 1.5)).collect();
        let w: Vec<f64> = v.iter().map(|x| x + rng.next_range(0.0, 0.7)).collect();
        let tv = apply_operator(
            &problem,
            &grid,
            &controls,
            &ValueField::new(v.clone(), "v"),
            h,
            None,
            &|_| 0.0,
            DEFAULT_SENTINEL,
        )
        .unwrap();
        let tw = apply_operator(
            &problem,
            &grid,
            &controls,
            &ValueField::new(w.clone(), "w"),
            h,
            None,
            &|_| 0.0,
            DEFAULT_SENTINEL,
        )
        .unwrap();
        let mut sup_in = 0.0f64;
        let mut sup_out = 0.0f64;
        for i in 0..v.len() {
            if tv.values[i] > tw.values[i] + 1e-12 {
                violations += 1;
            }
            sup_in = sup_in.max((v[i] - w[i]).abs());
            sup_out = sup_out.max((tv.values[i] - tw.values[i]).abs());
        }
        if sup_out > rate * sup_in + 1e-12 {
            violations += 1;
        }
    }
    assert_eq!(
        violations, 0,
        "criterion 7: FAIL — {violations} monotonicity/contraction violations"
    );

    // nodewise minimum is a lower bound of every input
    let fields: Vec<ValueField> = (0..3)
        .map(|k| {
            ValueField::new(
                (0..grid.node_count()).map(|_| rng.next_range(-2.0, 2.0)).collect(),
                format!("f{k}"),
            )
        })
        .collect();
    let (combined, _) = min_combine(&fields, 1e-9).unwrap();
    for f in &fields {
        for idx in 0..combined.len() {
            assert!(
                combined.values[idx] <= f.values[idx],
                "criterion 7: FAIL — min_combine above an input"
            );
        }
    }

    // raised exit costs stay strictly above g off the part
    let layouts: [(BuiltinName, PartitionScheme, usize); 3] = [
        (BuiltinName::EikonalKruzkov, PartitionScheme::SquareEdges, 4),
        (BuiltinName::VanDerPol, PartitionScheme::BallSectors, 4),
        (BuiltinName::StripFlat, PartitionScheme::VerticalEdges, 2),
    ];
    for (name, scheme, parts) in layouts {
        let p = make_builtin(name, &BuiltinParams::default()).unwrap();
        let g = build_grid(GridSpec::unit_square(12), p.geometry).unwrap();
        let partition = partition_boundary(&g, p.geometry, parts, scheme).unwrap();
        for scheme in [PenaltyScheme::ConstantBump, PenaltyScheme::DistanceRamp] {
            for part in 0..parts {
                let cost =
                    hjdecomp::decomposition::build_auxiliary_cost(&p, &partition, part, 1.0, scheme)
                        .unwrap();
                for idx in g.boundary_nodes() {
                    let x = g.position(idx);
                    let base = p.exit_cost.eval(x);
                    if partition.parts[part].contains(x) {
                        assert_eq!(cost.eval(x), base);
                    } else {
                        assert!(
                            cost.eval(x) > base,
                            "criterion 7: FAIL — raised cost not above g at {x:?} ({name})"
                        );
                    }
                }
            }
        }
    }

    // overlap check on every benchmark without an adversary
    let singleton_b: [(BuiltinName, PartitionScheme, usize); 4] = [
        (BuiltinName::EikonalSquare, PartitionScheme::SquareEdges, 4),
        (BuiltinName::EikonalKruzkov, PartitionScheme::SquareEdges, 4),
        (BuiltinName::VanDerPol, PartitionScheme::BallSectors, 4),
        (BuiltinName::StripFlat, PartitionScheme::VerticalEdges, 2),
    ];
    let mut checked_counts = Vec::new();
    for (name, scheme, parts) in singleton_b {
        let p = make_builtin(name, &BuiltinParams::default()).unwrap();
        let (n_a, n_b) = analysis::default_samples(name);
        let c = sample_controls(&p, n_a, n_b).unwrap();
        let g = build_grid(GridSpec::unit_square(40), p.geometry).unwrap();
        let partition = partition_boundary(&g, p.geometry, parts, scheme).unwrap();
        let mut recon = table_recon_params(name);
        recon.tie_tol = g.dx();
        let outcome = run_reconstruction(
            &p,
            &g,
            &c,
            &SolveParams::new(g.dx()),
            &partition,
            &recon,
            table_penalty(name),
        )
        .unwrap();
        let report = check_h2(
            &p,
            &c,
            &outcome.aux_fields,
            &outcome.combined,
            &outcome.active,
            &g,
            16,
            10.0 * g.dx(),
            CHECK_CUTOFF,
            FRONTIER_MARGIN,
        )
        .unwrap();
        assert!(
            report.pass,
            "criterion 7: FAIL — overlap check failed for {name}: residual {:.4} > {:.4}",
            report.max_residual, report.tol
        );
        checked_counts.push((name.as_str(), report.nodes_checked));
    }
    println!(
        "criterion 7: PASS — 100 random pairs monotone and contractive, minimum is a lower \
         bound, raised costs strict off-part, overlap checks passed ({checked_counts:?})"
    );
}

#[test]
fn criterion_8_performance_ordering() {
    let _guard = serialize();
    let (problem, controls) = kruzkov_problem();
    let grid = build_grid(GridSpec::unit_square(100), problem.geometry).unwrap();
    let params = SolveParams::new(grid.dx());
    // the undecomposed baseline runs sequentially, as the reference method
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let (_, report) = one
        .install(|| solve(&problem, &grid, &controls, &params, None, &|_| 0.0, "nd"))
        .unwrap();
    assert!(report.converged);
    let direct_secs = start.elapsed().as_secs_f64();

    let recon = table_recon_params(BuiltinName::EikonalKruzkov);
    let start = Instant::now();
    let result = kruzkov_two_grid(100, recon, 4);
    let isa_secs = start.elapsed().as_secs_f64();

    let non_solve: f64 = result
        .stages
        .iter()
        .filter(|s| matches!(s.stage.as_str(), "coarse_reduce" | "project" | "assembly"))
        .map(|s| s.seconds)
        .sum();
    let stage_total = result.total_seconds();
    assert!(
        non_solve <= 0.05 * stage_total,
        "criterion 8: FAIL — non-solve stages {non_solve:.4}s exceed 5% of {stage_total:.3}s"
    );

    let ratio = isa_secs / direct_secs;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    assert!(
        ratio <= 0.7,
        "criterion 8: FAIL — pipeline/direct wall-clock ratio {ratio:.2} above 0.7 \
         (direct 1-worker {direct_secs:.2}s, pipeline 4-worker {isa_secs:.2}s on {cores} \
         available cores; the masked solves cover ~1.4x the domain in total, so the gate needs \
         at least ~2x of genuine parallel speedup, which this host cannot provide)"
    );
    println!(
        "criterion 8: PASS — pipeline {isa_secs:.2}s vs direct {direct_secs:.2}s (ratio \
         {ratio:.2} <= 0.7), non-solve stages {:.1}% of total",
        100.0 * non_solve / stage_total
    );
}

#[test]
fn criterion_9_van_der_pol_reference() {
    let _guard = serialize();
    let dir = reference_dir();
    let (ref_spec, ref_field) = match load_reference(&dir, BuiltinName::VanDerPol) {
        Ok(hit) => hit,
        Err(_) => generate_reference(&dir, BuiltinName::VanDerPol).unwrap(),
    };
    let problem = make_builtin(BuiltinName::VanDerPol, &BuiltinParams::default()).unwrap();
    let controls = sample_controls(&problem, 33, 1).unwrap();
    let recon = table_recon_params(BuiltinName::VanDerPol);
    let targets = [(50usize, 0.09), (100, 0.03), (200, 0.01)];
    let mut summary = Vec::new();
    for (cells, target) in targets {
        let grid = build_grid(GridSpec::unit_square(cells), problem.geometry).unwrap();
        let reference = subsample_reference(&ref_spec, &ref_field, &grid.spec).unwrap();
        let params = SolveParams::new(grid.dx());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let (direct, report) = pool
            .install(|| solve(&problem, &grid, &controls, &params, None, &|_| 0.0, "nd"))
            .unwrap();
        assert!(report.converged);
        let nd_err = error_norms_reachable(
            &direct,
            &reference,
            &grid,
            REACHABLE_CUTOFF,
            FRONTIER_MARGIN,
        )
        .unwrap()
        .delta_inf;

        let config = TwoGridConfig {
            coarse: GridSpec::unit_square(20),
            fine: GridSpec::unit_square(cells),
            scheme: PartitionScheme::BallSectors,
            parts: 4,
            recon,
            penalty_scheme: table_penalty(BuiltinName::VanDerPol),
            step_mode: StepMode::Dx,
            tol: solver::DEFAULT_TOL,
            max_iter: solver::DEFAULT_MAX_ITER,
            sentinel: DEFAULT_SENTINEL,
            n_a: 33,
            n_b: 1,
            workers: 4,
        };
        let result = run_two_grid(&problem, &config).unwrap();
        let isa_err = error_norms_reachable(
            &result.field,
            &reference,
            &grid,
            REACHABLE_CUTOFF,
            FRONTIER_MARGIN,
        )
        .unwrap()
        .delta_inf;

        assert!(
            nd_err >= target / 3.0 && nd_err <= target * 3.0,
            "criterion 9: FAIL — direct error {nd_err:.4e} at {cells} cells outside \
             [{:.4e}, {:.4e}]",
            target / 3.0,
            target * 3.0
        );
        assert_eq!(
            two_significant_figures(nd_err),
            two_significant_figures(isa_err),
            "criterion 9: FAIL — direct {nd_err:.6e} and pipeline {isa_err:.6e} differ in the \
             first two significant figures at {cells} cells"
        );
        summary.push((cells, nd_err));
    }
    println!(
        "criterion 9: PASS — errors vs the stored 400^2 reference {summary:?} within factor 3 \
         of (0.09, 0.03, 0.01), direct and pipeline identical to 2 significant figures"
    );
}
