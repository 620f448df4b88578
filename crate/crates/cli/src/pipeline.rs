//! Subcommands: `solve`, `verify`, `analyze` and `all`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pgrad_core::boundary::rescale;
use pgrad_core::solver::{solve_interior, CharGrid, SolveSummary};
use pgrad_core::vacuum::{self, DecayFit, FitWindow, RaySampler};
use pgrad_core::verify::{self, ResidualField, ViolationKind};

use crate::config::{parse_list, RunConfig};
use crate::error::{CliError, CliResult};
use crate::format::{num, to_json};
use crate::gridio::{parse_grid_csv, write_grid_csv, COLUMNS};
use crate::plots;

pub const SCHEMA_VERSION: u32 = 1;
/// Rays sampled for `levels.csv` and `levels.svg`.
pub const LEVEL_RAYS: usize = 361;
/// Extra levels drawn above the configured ones in `levels.svg`.
const DISPLAY_LEVELS: [f64; 5] = [0.8, 0.5, 0.2, 0.1, 0.05];

#[derive(Debug, Parser)]
#[command(name = "pgrad", version, about = "Characteristic-net solver for the quadrant-into-vacuum pressure gradient problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve the net and write grid.csv and meta.json.
    Solve,
    /// Check a solved grid.csv and write verify.json.
    Verify,
    /// Decay fit, level curves, shrinkage report and figures.
    Analyze,
    /// Solve, verify and analyze.
    All,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (output_dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seeds per arc; the net has n x n nodes.
    #[arg(long, global = true, value_name = "N")]
    pub n_seeds: Option<usize>,
    /// Pressure below which marching stops as vacuum.
    #[arg(long, global = true, value_name = "X")]
    pub p_floor: Option<f64>,
    /// Rescale the solved net to constant-state pressure p1.
    #[arg(long, global = true, value_name = "X")]
    pub p1: Option<f64>,
    /// Shrinkage-report levels, comma-separated and descending.
    #[arg(long, global = true, value_name = "A,B,C")]
    pub epsilons: Option<String>,
    /// Skip the SVG figures.
    #[arg(long, global = true)]
    pub no_plots: bool,
}

impl Overrides {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(n) = self.n_seeds {
            cfg.n_seeds = n;
        }
        if let Some(x) = self.p_floor {
            cfg.p_floor = x;
        }
        if let Some(x) = self.p1 {
            cfg.p1 = x;
        }
        if let Some(e) = &self.epsilons {
            cfg.epsilons = parse_list("epsilons", e)?;
        }
        if self.no_plots {
            cfg.plots = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn load_grid(cfg: &RunConfig) -> CliResult<CharGrid> {
    let path = cfg.output_dir.join("grid.csv");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    parse_grid_csv(&text, cfg.solver()).map_err(|e| CliError::io(&path, format!("schema error: {e}")))
}

// ---------------------------------------------------------------------------
// solve

#[derive(Serialize)]
struct Summary {
    solved: usize,
    boundary: usize,
    stopped_vacuum: usize,
    stopped_sonic: usize,
    stopped_domain: usize,
    max_corrector_iterations: usize,
    max_p_mismatch: f64,
}

impl From<SolveSummary> for Summary {
    fn from(s: SolveSummary) -> Self {
        Self {
            solved: s.solved,
            boundary: s.boundary,
            stopped_vacuum: s.stopped_vacuum,
            stopped_sonic: s.stopped_sonic,
            stopped_domain: s.stopped_domain,
            max_corrector_iterations: s.max_iterations,
            max_p_mismatch: s.max_p_mismatch,
        }
    }
}

#[derive(Serialize)]
struct Meta {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    grid_columns: [&'static str; 8],
    config: BTreeMap<&'static str, String>,
    n_seeds: usize,
    theta_min: f64,
    scale: f64,
    deepest_diagonal_p: f64,
    min_pressure: MinP,
    diagnostics: Summary,
}

#[derive(Serialize)]
struct MinP {
    value: f64,
    i: usize,
    j: usize,
    r: f64,
    theta: f64,
}

impl From<vacuum::MinPressure> for MinP {
    fn from(m: vacuum::MinPressure) -> Self {
        Self {
            value: m.value,
            i: m.i,
            j: m.j,
            r: m.r,
            theta: m.theta,
        }
    }
}

pub fn solve(cfg: &RunConfig) -> CliResult<CharGrid> {
    let grid = solve_interior(&cfg.solver())?;
    Ok(if cfg.p1 == 1.0 { grid } else { rescale(&grid, cfg.p1)? })
}

pub fn run_solve(cfg: &RunConfig) -> CliResult<CharGrid> {
    let grid = solve(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    write(&cfg.output_dir, "grid.csv", &write_grid_csv(&grid))?;
    let n = grid.n;
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        tool: "pgrad",
        version: env!("CARGO_PKG_VERSION"),
        core_version: pgrad_core::VERSION,
        grid_columns: COLUMNS,
        config: cfg.entries().into_iter().collect(),
        n_seeds: n,
        theta_min: grid.seeds_lower[n - 1].theta,
        scale: grid.scale,
        deepest_diagonal_p: grid.node(n - 1, n - 1).p,
        min_pressure: vacuum::min_pressure(&grid).into(),
        diagnostics: grid.summary().into(),
    };
    write(&cfg.output_dir, "meta.json", &to_json(&meta))?;
    Ok(grid)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Serialize)]
struct Norms {
    norm_inf: f64,
    norm_l2: f64,
    samples: usize,
    skipped: usize,
}

impl From<&ResidualField> for Norms {
    fn from(f: &ResidualField) -> Self {
        Self {
            norm_inf: f.norm_inf,
            norm_l2: f.norm_l2,
            samples: f.samples.len(),
            skipped: f.skipped,
        }
    }
}

#[derive(Serialize)]
struct SignCounts {
    checked: usize,
    dp_plus: usize,
    dp_minus: usize,
    radial_monotonicity: usize,
    hyperbolicity: usize,
    nodes: Vec<(usize, usize, &'static str)>,
}

#[derive(Serialize)]
struct Decomposition {
    m_form: Norms,
    q_form: Norms,
    max_form_difference: f64,
}

#[derive(Serialize)]
struct Integral {
    checks: usize,
    median_rel_err: f64,
    max_rel_err: f64,
    sign_mismatches: usize,
}

#[derive(Serialize)]
struct Sup {
    value: f64,
    i: usize,
    j: usize,
    r: f64,
    theta: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    schema_version: u32,
    violations: usize,
    signs: SignCounts,
    min_pressure: MinP,
    residual_net: Norms,
    residual_raster: Option<Norms>,
    decomposition: Decomposition,
    integral: Option<Integral>,
    sup_ratio: Sup,
}

fn kind_name(k: ViolationKind) -> &'static str {
    match k {
        ViolationKind::DpPlus => "dp_plus",
        ViolationKind::DpMinus => "dp_minus",
        ViolationKind::RadialMonotonicity => "radial_monotonicity",
        ViolationKind::Hyperbolicity => "hyperbolicity",
    }
}

/// Writes `verify.json` and `residual_net.csv`; fails with an invariant
/// violation after writing if any sign, positivity or hyperbolicity check fails.
pub fn run_verify(cfg: &RunConfig, grid: &CharGrid) -> CliResult<()> {
    ensure_dir(&cfg.output_dir)?;
    let signs = verify::check_signs_and_monotonicity(grid);
    let net = verify::residual_net(grid, 1);
    let raster = verify::resample_to_polar(grid, cfg.raster_n_r, cfg.raster_n_theta)
        .and_then(|r| verify::residual_pde(&r))
        .ok();
    let dec = verify::check_decomposition(grid);
    let integral = verify::integral_summary(grid).ok();
    let sup = verify::sup_ratio(grid, 0.0)?;
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        violations: signs.violations.len(),
        signs: SignCounts {
            checked: signs.checked,
            dp_plus: signs.count(ViolationKind::DpPlus),
            dp_minus: signs.count(ViolationKind::DpMinus),
            radial_monotonicity: signs.count(ViolationKind::RadialMonotonicity),
            hyperbolicity: signs.count(ViolationKind::Hyperbolicity),
            nodes: signs.violations.iter().map(|v| (v.i, v.j, kind_name(v.kind))).collect(),
        },
        min_pressure: vacuum::min_pressure(grid).into(),
        residual_net: (&net).into(),
        residual_raster: raster.as_ref().map(Norms::from),
        decomposition: Decomposition {
            m_form: (&dec.m_form).into(),
            q_form: (&dec.q_form).into(),
            max_form_difference: dec.max_form_difference,
        },
        integral: integral.map(|s| Integral {
            checks: s.checks,
            median_rel_err: s.median_rel_err,
            max_rel_err: s.max_rel_err,
            sign_mismatches: s.sign_mismatches,
        }),
        sup_ratio: Sup {
            value: sup.value,
            i: sup.i,
            j: sup.j,
            r: sup.r,
            theta: sup.theta,
        },
    };
    write(&cfg.output_dir, "verify.json", &to_json(&report))?;
    let mut csv = String::from("r,theta,residual,width\n");
    for s in &net.samples {
        let _ = writeln!(csv, "{},{},{},{}", num(s.r), num(s.theta), num(s.value), num(s.width));
    }
    write(&cfg.output_dir, "residual_net.csv", &csv)?;
    if signs.is_clean() {
        Ok(())
    } else {
        let list: Vec<String> = report.signs.nodes.iter().map(|(i, j, k)| format!("({i}, {j}) {k}")).collect();
        Err(CliError::Invariant(format!("{} violation(s): {}", list.len(), list.join(", "))))
    }
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Serialize)]
struct Fit {
    theta: f64,
    c: f64,
    m0: f64,
    r_range: (f64, f64),
    r_squared: f64,
    n_points: usize,
}

#[derive(Serialize)]
struct Row {
    epsilon: f64,
    sup_r: Option<f64>,
    theta_at_sup: Option<f64>,
    covered_rays: usize,
    model_r: Option<f64>,
    rel_err: Option<f64>,
}

#[derive(Serialize)]
struct BubbleJson {
    schema_version: u32,
    delta: f64,
    decay_fit: Option<Fit>,
    decay_fit_error: Option<String>,
    min_pressure: MinP,
    rows: Vec<Row>,
    model_m0: Option<f64>,
    model_c: Option<f64>,
    strictly_decreasing: bool,
    max_rel_err: Option<f64>,
    decades: f64,
}

pub fn run_analyze(cfg: &RunConfig, grid: &CharGrid) -> CliResult<()> {
    ensure_dir(&cfg.output_dir)?;
    let dir = &cfg.output_dir;

    let diagonal: Vec<(f64, f64)> = (0..grid.n)
        .map(|k| grid.node(k, k))
        .filter(|nd| nd.status.is_valid())
        .map(|nd| (nd.r, nd.p))
        .collect();
    let mut csv = String::from("r,p,ln_p,inv_r\n");
    for &(r, p) in &diagonal {
        let _ = writeln!(csv, "{},{},{},{}", num(r), num(p), num(p.ln()), num(1.0 / r));
    }
    write(dir, "decay.csv", &csv)?;

    let sampler = RaySampler::new(grid);
    let fit: Result<DecayFit, _> = vacuum::decay_fit_on(&sampler, FRAC_PI_4, FitWindow::LowestDecade);

    let rays = vacuum::ray_angles(LEVEL_RAYS);
    let curves = cfg
        .epsilons
        .iter()
        .map(|&e| vacuum::level_curve_on(&sampler, e, &rays))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("epsilon,theta,r\n");
    for c in &curves {
        for &(t, r) in &c.points {
            let _ = writeln!(csv, "{},{},{}", num(c.epsilon), num(t), num(r));
        }
    }
    write(dir, "levels.csv", &csv)?;

    let rep = vacuum::bubble_report(grid, &cfg.epsilons, cfg.delta)?;
    let bubble = BubbleJson {
        schema_version: SCHEMA_VERSION,
        delta: rep.delta,
        decay_fit: fit.as_ref().ok().map(|f| Fit {
            theta: FRAC_PI_4,
            c: f.c,
            m0: f.m0,
            r_range: f.r_range,
            r_squared: f.r_squared,
            n_points: f.n_points,
        }),
        decay_fit_error: fit.as_ref().err().map(|e| e.to_string()),
        min_pressure: vacuum::min_pressure(grid).into(),
        rows: rep
            .rows
            .iter()
            .map(|r| Row {
                epsilon: r.epsilon,
                sup_r: r.sup_r,
                theta_at_sup: r.theta_at_sup,
                covered_rays: r.covered_rays,
                model_r: r.model_r,
                rel_err: r.rel_err,
            })
            .collect(),
        model_m0: rep.model_m0,
        model_c: rep.model_c,
        strictly_decreasing: rep.strictly_decreasing,
        max_rel_err: rep.max_rel_err,
        decades: rep.decades(),
    };
    write(dir, "bubble.json", &to_json(&bubble))?;

    if cfg.plots {
        let (w, h) = (cfg.canvas_width, cfg.canvas_height);
        write(dir, "characteristics.svg", &plots::characteristics_svg(grid, w, h))?;
        // shallow levels first so the figure shows the nesting
        let mut shown = DISPLAY_LEVELS
            .iter()
            .filter(|&&e| cfg.epsilons.first().is_none_or(|&top| e > top))
            .map(|&e| vacuum::level_curve_on(&sampler, e, &rays))
            .collect::<Result<Vec<_>, _>>()?;
        shown.extend(curves.iter().cloned());
        write(dir, "levels.svg", &plots::levels_svg(grid, &shown, w, h))?;
        write(dir, "decay.svg", &plots::decay_svg(&diagonal, fit.as_ref().ok(), w, h))?;
        write(dir, "field.svg", &plots::field_svg(grid, cfg.field_cells, w, h))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn execute(command: Command, cfg: &RunConfig) -> CliResult<()> {
    match command {
        Command::Solve => run_solve(cfg).map(|_| ()),
        Command::Verify => run_verify(cfg, &load_grid(cfg)?),
        Command::Analyze => run_analyze(cfg, &load_grid(cfg)?),
        Command::All => {
            run_solve(cfg)?;
            let grid = load_grid(cfg)?;
            // analysis still runs when verification reports violations
            let verified = run_verify(cfg, &grid);
            run_analyze(cfg, &grid)?;
            verified
        }
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("PGRAD_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("PGRAD_THREADS = {v:?} must be a positive integer")))?;
    // a pool installed earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = init_threads()
        .and_then(|_| cli.overrides.resolve())
        .and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pgrad: {e}");
            e.exit_code()
        }
    }
}
