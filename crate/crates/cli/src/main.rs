//! Command-line entry point wiring scenario configs to the solvers,
//! caches, and reports.
//!
//! Exit codes: 0 success, 1 a mathematical assertion suite failed,
//! 2 invalid input (config, validation, or grid construction).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use isaacslab::artifacts::{
    config_hash, write_field_cache, write_field_csv, write_json, write_samples_csv, RunManifest,
};
use isaacslab::chain::build_kernel;
use isaacslab::counterexample::{
    default_candidates, gap_report, weak_side_summary, CounterexampleParams,
};
use isaacslab::diagnostics::{bsde_apriori, check_bounds, modulus_report};
use isaacslab::dpp::{dpp_consistency, gap_stats, solve_game, Side};
use isaacslab::hamiltonian::isaacs_check;
use isaacslab::model::{build_grid, validate_spec, GameSpec, Grid, GridRequest, ScenarioConfig, SchemeBudget};
use isaacslab::pdefd::{cross_check, refinement_study, solve_pde, CrossCheckOptions, PdeProblem, PdeSide};
use isaacslab::saddle;
use isaacslab::tolerances::{ISAACS_DEFAULT_TOL, WEAK_DUALITY_TOL};
use isaacslab::LabError;

const EXIT_ASSERTION: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "isaacslab", version, about = "Zero-sum stochastic differential game laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory root; artifacts land under <out>/<config-hash>/.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed for all sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the number of time steps.
    #[arg(long)]
    nt: Option<usize>,
    /// Override the spatial resolution (repeat per axis).
    #[arg(long, num_args = 1..)]
    resolution: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the lower and upper games, export fields and policies,
    /// and run one dpp refinement for the origin-gap study.
    Solve {
        #[command(flatten)]
        config: ConfigArg,
        /// Skip the refined second solve.
        #[arg(long)]
        skip_refinement: bool,
    },
    /// Sample the Isaacs condition and report the worst gap.
    IsaacsCheck {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = ISAACS_DEFAULT_TOL)]
        tolerance: f64,
    },
    /// Reproduce the strong-formulation value-gap experiment.
    Counterexample {
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        /// Terminal offset `a`.
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Also solve the weak-formulation game on the lattice.
        #[arg(long)]
        weak: bool,
        /// Weak-side spatial resolution per axis.
        #[arg(long, default_value_t = 101)]
        weak_resolution: usize,
        /// Refine the weak solve once to report the gap trend.
        #[arg(long)]
        weak_refine: bool,
    },
    /// Extract the candidate saddle pair and verify the deviation
    /// inequalities.
    Saddle {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 100)]
        deviations: usize,
    },
    /// Split-recompose consistency of the backward recursion.
    DppCheck {
        #[command(flatten)]
        config: ConfigArg,
        /// Split slice (defaults to n_t / 2).
        #[arg(long)]
        split: Option<usize>,
    },
    /// Bound, regularity, and a-priori estimate suites, plus the
    /// FD cross-check when the Isaacs condition holds.
    Diagnose {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 2000)]
        probes: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Cross-oracle pass tolerance; defaults to 5e-3 in one dimension
        /// and 5e-2 in two (both schemes are first order and the planar
        /// grids are necessarily coarser).
        #[arg(long)]
        cross_tolerance: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not configure {} threads: {e}", cli.threads);
            return ExitCode::from(EXIT_INVALID);
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

struct Loaded {
    spec: GameSpec,
    config: ScenarioConfig,
    hash: String,
    dir: PathBuf,
}

fn load(cli: &Cli, arg: &ConfigArg, subcommand: &str) -> Result<Loaded, LabError> {
    let (config, text) = ScenarioConfig::load(&arg.config)?;
    let spec = config.to_spec()?;
    let hash = config_hash(&text);
    let dir = cli.out.join(&hash).join(subcommand);
    std::fs::create_dir_all(&dir)?;
    Ok(Loaded { spec, config, hash, dir })
}

fn grid_for(
    loaded: &Loaded,
    arg: &ConfigArg,
    scheme: SchemeBudget,
) -> Result<Grid, LabError> {
    let mut req: GridRequest = loaded.config.grid_request(&loaded.spec, scheme);
    if let Some(nt) = arg.nt {
        req.n_t = if nt == 0 { None } else { Some(nt) };
    }
    if let Some(res) = &arg.resolution {
        req.resolution = res.clone();
    }
    build_grid(&loaded.spec, &req)
}

/// Validation gate: a failing assumption suite is invalid input, not a
/// failed mathematical assertion.
fn validate_gate(loaded: &Loaded, seed: u64) -> Result<Option<ExitCode>, LabError> {
    let report = validate_spec(&loaded.spec, loaded.config.validation_samples(), seed)?;
    let path = loaded.dir.join("validation.json");
    write_json(&path, &report)?;
    if !report.passed {
        eprintln!(
            "scenario '{}' fails its assumption suite; see {}",
            loaded.spec.name,
            path.display()
        );
        return Ok(Some(ExitCode::from(EXIT_INVALID)));
    }
    Ok(None)
}

fn run(cli: &Cli) -> Result<ExitCode, LabError> {
    match &cli.command {
        Command::Solve { config, skip_refinement } => {
            let started = Instant::now();
            let loaded = load(cli, config, "solve")?;
            if let Some(code) = validate_gate(&loaded, cli.seed)? {
                return Ok(code);
            }
            let grid = grid_for(&loaded, config, SchemeBudget::Kernel)?;
            let kernel = build_kernel(&loaded.spec, &grid)?;
            let lower = solve_game(&loaded.spec, &grid, &kernel, Side::Lower);
            let upper = solve_game(&loaded.spec, &grid, &kernel, Side::Upper);
            let stats = gap_stats(&lower.field, &upper.field, &grid);

            let mut manifest = RunManifest::new(loaded.hash.clone(), "solve");
            manifest
                .param("seed", cli.seed)
                .param("config", config.config.display())
                .param("n_t", grid.n_t)
                .param("origin_gap", stats.origin_gap);
            for (name, sol) in [("lower", &lower), ("upper", &upper)] {
                let csv = loaded.dir.join(format!("{name}.csv"));
                write_field_csv(
                    &csv,
                    &loaded.spec,
                    &grid,
                    &sol.field,
                    Some((&sol.u_policy, &sol.v_policy)),
                )?;
                manifest.artifact(&csv);
                let cache = loaded.dir.join(format!("{name}.field"));
                write_field_cache(&cache, &loaded.hash, &sol.field)?;
                manifest.artifact(&cache);
            }

            #[derive(serde::Serialize)]
            struct LevelRow {
                resolution: Vec<usize>,
                n_t: usize,
                lower_at_origin: f64,
                upper_at_origin: f64,
                origin_gap: f64,
            }
            #[derive(serde::Serialize)]
            struct SolveReport {
                scenario: String,
                weak_duality_violation: f64,
                levels: Vec<LevelRow>,
                gap_shrink_factor: Option<f64>,
            }
            let mut levels = vec![LevelRow {
                resolution: grid.axes[..grid.spatial_dim].iter().map(|a| a.count).collect(),
                n_t: grid.n_t,
                lower_at_origin: lower.field.at_origin(&grid),
                upper_at_origin: upper.field.at_origin(&grid),
                origin_gap: stats.origin_gap,
            }];
            if !skip_refinement {
                let mut req = loaded.config.grid_request(&loaded.spec, SchemeBudget::Kernel);
                req.resolution = levels[0].resolution.iter().map(|r| (r - 1) * 2 + 1).collect();
                req.n_t = None;
                let fine = build_grid(&loaded.spec, &req)?;
                let fine_kernel = build_kernel(&loaded.spec, &fine)?;
                let flo = solve_game(&loaded.spec, &fine, &fine_kernel, Side::Lower);
                let fup = solve_game(&loaded.spec, &fine, &fine_kernel, Side::Upper);
                let fstats = gap_stats(&flo.field, &fup.field, &fine);
                levels.push(LevelRow {
                    resolution: req.resolution.clone(),
                    n_t: fine.n_t,
                    lower_at_origin: flo.field.at_origin(&fine),
                    upper_at_origin: fup.field.at_origin(&fine),
                    origin_gap: fstats.origin_gap,
                });
            }
            let gap_shrink_factor = (levels.len() == 2 && levels[1].origin_gap > 0.0)
                .then(|| levels[0].origin_gap / levels[1].origin_gap);
            let report = SolveReport {
                scenario: loaded.spec.name.clone(),
                weak_duality_violation: stats.max_duality_violation,
                levels,
                gap_shrink_factor,
            };
            let path = loaded.dir.join("refinement.json");
            write_json(&path, &report)?;
            manifest.artifact(&path);
            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            manifest.write(&loaded.dir)?;

            if stats.max_duality_violation > WEAK_DUALITY_TOL {
                eprintln!(
                    "weak duality violated by {}",
                    stats.max_duality_violation
                );
                return Ok(ExitCode::from(EXIT_ASSERTION));
            }
            println!(
                "solve: origin lower {} upper {} gap {}",
                report.levels[0].lower_at_origin,
                report.levels[0].upper_at_origin,
                report.levels[0].origin_gap
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::IsaacsCheck { config, samples, tolerance } => {
            let started = Instant::now();
            let loaded = load(cli, config, "isaacs-check")?;
            if let Some(code) = validate_gate(&loaded, cli.seed)? {
                return Ok(code);
            }
            let report = isaacs_check(&loaded.spec, *samples, *tolerance, cli.seed)?;
            let path = loaded.dir.join("isaacs.json");
            write_json(&path, &report)?;
            let mut manifest = RunManifest::new(loaded.hash.clone(), "isaacs-check");
            manifest
                .param("samples", samples)
                .param("tolerance", tolerance)
                .param("seed", cli.seed)
                .artifact(&path);
            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            manifest.write(&loaded.dir)?;
            println!(
                "isaacs-check: max gap {} (tolerance {}) -> {}",
                report.max_gap,
                tolerance,
                if report.passed { "pass" } else { "FAIL" }
            );
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            })
        }

        Command::Counterexample { alpha, a, t, paths, weak, weak_resolution, weak_refine } => {
            let started = Instant::now();
            let params = CounterexampleParams::new(*alpha, *a, *t, *paths, cli.seed)?;
            let candidates = default_candidates(&params);
            let weak_side = if *weak {
                Some(weak_side_summary(&params, 5, 5, *weak_resolution, *weak_refine)?)
            } else {
                None
            };
            let report = gap_report(&params, &candidates, weak_side)?;
            let text = serde_json::to_string(&params)
                .map_err(|e| LabError::Config(e.to_string()))?;
            let hash = config_hash(&text);
            let dir = cli.out.join(&hash).join("counterexample");
            std::fs::create_dir_all(&dir)?;
            let json_path = dir.join("gap_report.json");
            write_json(&json_path, &report)?;
            let csv_path = dir.join("candidate_payoffs.csv");
            write_samples_csv(
                &csv_path,
                "payoff,std_error",
                report
                    .strong_upper
                    .per_candidate
                    .iter()
                    .map(|c| (c.payoff.value, c.payoff.std_error)),
            )?;
            let mut manifest = RunManifest::new(hash, "counterexample");
            manifest
                .param("alpha", alpha)
                .param("a", a)
                .param("T", t)
                .param("paths", paths)
                .param("seed", cli.seed)
                .artifact(&json_path)
                .artifact(&csv_path);
            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            manifest.write(&dir)?;
            println!(
                "counterexample: strong lower {} (stated bound {}), gap {}{}",
                report.strong_lower.estimate.value,
                report.strong_lower.stated_bound,
                report.strong_gap,
                if report.in_gap_regime { "" } else { " [outside gap regime]" }
            );
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            })
        }

        Command::Saddle { config, deviations } => {
            let started = Instant::now();
            let loaded = load(cli, config, "saddle")?;
            if let Some(code) = validate_gate(&loaded, cli.seed)? {
                return Ok(code);
            }
            let grid = grid_for(&loaded, config, SchemeBudget::Kernel)?;
            let kernel = build_kernel(&loaded.spec, &grid)?;
            let lower = solve_game(&loaded.spec, &grid, &kernel, Side::Lower);
            let upper = solve_game(&loaded.spec, &grid, &kernel, Side::Upper);
            let (u_star, v_star, epsilon) = saddle::extract(&grid, &lower, &upper);
            let cert = saddle::verify(
                &loaded.spec,
                &grid,
                &kernel,
                &u_star,
                &v_star,
                epsilon,
                *deviations,
                cli.seed,
            )?;
            let path = loaded.dir.join("certificate.json");
            write_json(&path, &cert)?;
            let mut manifest = RunManifest::new(loaded.hash.clone(), "saddle");
            manifest
                .param("deviations", deviations)
                .param("seed", cli.seed)
                .param("epsilon", epsilon)
                .artifact(&path);
            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            manifest.write(&loaded.dir)?;
            println!(
                "saddle: epsilon {} max violation {} -> {}",
                cert.epsilon,
                cert.max_violation,
                if cert.passed { "pass" } else { "FAIL" }
            );
            Ok(if cert.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            })
        }

        Command::DppCheck { config, split } => {
            let started = Instant::now();
            let loaded = load(cli, config, "dpp-check")?;
            if let Some(code) = validate_gate(&loaded, cli.seed)? {
                return Ok(code);
            }
            let grid = grid_for(&loaded, config, SchemeBudget::Kernel)?;
            let kernel = build_kernel(&loaded.spec, &grid)?;
            let split = split.unwrap_or(grid.n_t / 2).max(1).min(grid.n_t - 1);
            let deviation = dpp_consistency(&loaded.spec, &grid, &kernel, split)?;
            #[derive(serde::Serialize)]
            struct DppCheckReport {
                split: usize,
                n_t: usize,
                deviation: f64,
                passed: bool,
            }
            let report = DppCheckReport {
                split,
                n_t: grid.n_t,
                deviation,
                passed: deviation == 0.0,
            };
            let path = loaded.dir.join("dpp_check.json");
            write_json(&path, &report)?;
            let mut manifest = RunManifest::new(loaded.hash.clone(), "dpp-check");
            manifest.param("split", split).artifact(&path);
            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            manifest.write(&loaded.dir)?;
            println!("dpp-check: split {split}, deviation {deviation}");
            Ok(if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            })
        }

        Command::Diagnose { config, probes, trials, cross_tolerance } => {
            let started = Instant::now();
            let loaded = load(cli, config, "diagnose")?;
            if let Some(code) = validate_gate(&loaded, cli.seed)? {
                return Ok(code);
            }
            let grid = grid_for(&loaded, config, SchemeBudget::Kernel)?;
            let kernel = build_kernel(&loaded.spec, &grid)?;
            let lower = solve_game(&loaded.spec, &grid, &kernel, Side::Lower);

            let bound_report = check_bounds(&lower.field, &loaded.spec);
            let reg_report =
                modulus_report(&lower.field, &loaded.spec, &grid, *probes, cli.seed)?;
            let apriori = bsde_apriori(&loaded.spec, &grid, &kernel, *trials, cli.seed)?;

            let mut manifest = RunManifest::new(loaded.hash.clone(), "diagnose");
            let bounds_path = loaded.dir.join("bounds.json");
            write_json(&bounds_path, &bound_report)?;
            manifest.artifact(&bounds_path);
            let reg_path = loaded.dir.join("regularity.json");
            write_json(&reg_path, &reg_report)?;
            manifest.artifact(&reg_path);
            let cloud_path = loaded.dir.join("modulus_samples.csv");
            write_samples_csv(
                &cloud_path,
                "distance,value_gap",
                reg_report
                    .spatial_samples
                    .iter()
                    .chain(&reg_report.temporal_samples)
                    .map(|s| (s.distance, s.value_gap)),
            )?;
            manifest.artifact(&cloud_path);
            let apriori_path = loaded.dir.join("apriori.json");
            write_json(&apriori_path, &apriori)?;
            manifest.artifact(&apriori_path);

            // Cross-oracle and FD exports, when the Isaacs condition holds.
            let mut cross_ok = true;
            let isaacs = isaacs_check(&loaded.spec, 2000, ISAACS_DEFAULT_TOL, cli.seed)?;
            if isaacs.passed {
                let grid_pde = grid_for(&loaded, config, SchemeBudget::UpwindFd)?;
                let tolerance = cross_tolerance
                    .unwrap_or(if loaded.spec.dim == 1 { 5e-3 } else { 5e-2 });
                let cross = cross_check(
                    &loaded.spec,
                    &grid,
                    &grid_pde,
                    &CrossCheckOptions {
                        tolerance,
                        seed: cli.seed,
                        ..Default::default()
                    },
                )?;
                let cross_path = loaded.dir.join("cross_check.json");
                write_json(&cross_path, &cross)?;
                manifest.artifact(&cross_path);
                cross_ok = cross.passed;
                println!("diagnose: cross-check max deviation {}", cross.max_deviation);

                let problem = PdeProblem::from_spec(&loaded.spec);
                let pde = solve_pde(&problem, &loaded.spec, &grid_pde, PdeSide::Isaacs)?;
                let pde_csv = loaded.dir.join("pde_solution.csv");
                write_field_csv(&pde_csv, &loaded.spec, &grid_pde, &pde.field, None)?;
                manifest.artifact(&pde_csv);

                let base = loaded.config.grid_request(&loaded.spec, SchemeBudget::UpwindFd);
                let study = refinement_study(&loaded.spec, &problem, &base, 2, None)?;
                let study_path = loaded.dir.join("pde_refinement.json");
                write_json(&study_path, &study)?;
                manifest.artifact(&study_path);
            } else {
                println!(
                    "diagnose: Isaacs gap {} -> cross-check skipped",
                    isaacs.max_gap
                );
            }

            manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
            manifest.write(&loaded.dir)?;
            let passed = bound_report.passed && apriori.passed && cross_ok;
            println!(
                "diagnose: bounds {} | apriori {} | fitted C (spatial {}, temporal {})",
                bound_report.passed, apriori.passed,
                reg_report.fitted_c_spatial, reg_report.fitted_c_temporal
            );
            Ok(if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_ASSERTION)
            })
        }
    }
}
