//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pgrad_cli::gridio::{parse_grid_csv, write_grid_csv};
use pgrad_core::boundary::{exterior_field, rescale};
use pgrad_core::coords::{decomposition_rhs_m, decomposition_rhs_q, lambda};
use pgrad_core::solver::{solve_interior, CharGrid, SolverConfig};
use pgrad_core::vacuum::{self, FitWindow, DEFAULT_DELTA};
use pgrad_core::verify;
use rand::{rngs::StdRng, Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn critical(n: usize) -> CharGrid {
    solve_interior(&SolverConfig::with_seeds(n)).expect("default solve")
}

fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

// 1. Seeded arc nodes against the data and a finite-difference oracle.
fn boundary_exactness() -> Outcome {
    let g = critical(65);
    let h = 1e-5;
    let lower_p = |t: f64| 4.0 * t.sin().powi(4);
    let upper_p = |t: f64| 4.0 * t.cos().powi(4);
    let (mut value_err, mut fd_err) = (0.0f64, 0.0f64);
    for k in 0..g.n {
        let (lo, up) = (g.node(k, 0), g.node(0, k));
        value_err = value_err
            .max((lo.p - lower_p(lo.theta)).abs())
            .max((lo.r - 2.0 * lo.theta.sin()).abs())
            .max((up.p - upper_p(up.theta)).abs())
            .max((up.r - 2.0 * up.theta.cos()).abs());
        let fd_lo = (lower_p(lo.theta + h) - lower_p(lo.theta - h)) / (2.0 * h);
        let fd_up = (upper_p(up.theta + h) - upper_p(up.theta - h)) / (2.0 * h);
        let (s, c) = lo.theta.sin_cos();
        let (su, cu) = up.theta.sin_cos();
        for (stored, closed, fd) in [
            (lo.dp_plus, 16.0 * s.powi(3) * c, fd_lo),
            (up.dp_minus, -16.0 * cu.powi(3) * su, fd_up),
        ] {
            value_err = value_err.max((stored - closed).abs() / closed.abs());
            fd_err = fd_err.max((stored - fd).abs() / fd.abs());
        }
    }
    check(
        value_err <= 1e-15 && fd_err <= 1e-8,
        format!("max data error {value_err:.2e} (tol 1e-15), FD relative {fd_err:.2e} (tol 1e-8)"),
    )
}

// 2. The data arcs are characteristics.
fn arc_characteristics() -> Outcome {
    let m = 10_000;
    let (mut lower, mut upper, mut slope) = (0.0f64, 0.0f64, 0.0f64);
    // stay clear of the vacuum endpoint, where λ is guarded
    let lo = 1e-2;
    for k in 0..=m {
        let t = lo + (FRAC_PI_4 - lo) * k as f64 / m as f64;
        let (r, p) = (2.0 * t.sin(), 4.0 * t.sin().powi(4));
        lower = lower.max((2.0 * t.cos() - 1.0 / lambda(r, p).unwrap()).abs());
        let t = FRAC_PI_4 + (FRAC_PI_4 - lo) * k as f64 / m as f64;
        let (r, p) = (2.0 * t.cos(), 4.0 * t.cos().powi(4));
        let lam = lambda(r, p).unwrap();
        upper = upper.max((-2.0 * t.sin() + 1.0 / lam).abs());
        slope = slope.max((lam - 1.0 / (2.0 * t.sin())).abs());
    }
    check(
        lower <= 1e-12 && upper <= 1e-12 && slope <= 1e-12,
        format!("lower {lower:.2e}, upper {upper:.2e}, upper lambda vs 1/(2 sin) {slope:.2e} (tol 1e-12)"),
    )
}

// 3. Both algebraic forms of the transport right sides.
fn decomposition_forms() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let r: f64 = rng.gen_range(0.05..2.0);
        let p = r * r * rng.gen_range(1e-6..1.0 - 1e-6);
        let a: f64 = rng.gen_range(1e-6..10.0);
        let b: f64 = -rng.gen_range(1e-6..10.0);
        let (m1, m2) = decomposition_rhs_m(r, p, a, b);
        let (q1, q2) = decomposition_rhs_q(r, p, a, b);
        worst = worst
            .max((m1 - q1).abs() / m1.abs().max(q1.abs()))
            .max((m2 - q2).abs() / m2.abs().max(q2.abs()));
    }
    check(worst <= 1e-12, format!("max relative difference {worst:.2e} on 1e4 states (tol 1e-12)"))
}

// 4. Second-order convergence of a reference value and of the PDE residual.
fn convergence() -> Outcome {
    let grids: Vec<CharGrid> = [33, 65, 129]
        .iter()
        .map(|&n| solve_interior(&SolverConfig::uniform(n, 0.5)).unwrap())
        .collect();
    let p: Vec<f64> = grids
        .iter()
        .map(|g| {
            let m = (g.n - 1) / 32;
            g.node(16 * m, 8 * m).p
        })
        .collect();
    let p_order = observed_order((p[0] - p[1]).abs(), (p[1] - p[2]).abs());
    let res: Vec<f64> = grids
        .iter()
        .map(|g| verify::residual_net(g, (g.n - 1) / 32).norm_inf)
        .collect();
    let (o1, o2) = (observed_order(res[0], res[1]), observed_order(res[1], res[2]));
    check(
        p_order >= 1.8 && o1 >= 1.8 && o2 >= 1.8,
        format!("reference p order {p_order:.2}; residual [{}] orders {o1:.2}, {o2:.2} (min 1.8)", sci(&res)),
    )
}

// 5. Signs, radial monotonicity and hyperbolicity on every grid.
fn invariants() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for n in [2, 3, 5, 9, 17, 33, 65, 129, 257] {
        let rep = verify::check_signs_and_monotonicity(&critical(n));
        ok &= rep.is_clean();
        details.push(format!("{n}:{}", rep.violations.len()));
    }
    check(ok, format!("violations per n_seeds {}", details.join(" ")))
}

// 6. Integral representation of the derivatives.
fn integral_oracle() -> Outcome {
    let mut med = Vec::new();
    let mut degenerate = 0.0f64;
    let mut mismatches = 0;
    for n in [33, 65, 129] {
        let g = critical(n);
        let s = verify::integral_summary(&g).map_err(|e| e.to_string())?;
        mismatches += s.sign_mismatches;
        med.push(s.median_rel_err);
        if n == 129 {
            for k in 0..n {
                let a = verify::integral_formula_plus(&g, k, 0).map_err(|e| e.to_string())?;
                let (s, c) = a.node.theta.sin_cos();
                degenerate = degenerate.max((a.rhs - 16.0 * s.powi(3) * c).abs() / a.rhs);
                let b = verify::integral_formula_minus(&g, 0, k).map_err(|e| e.to_string())?;
                let (s, c) = b.node.theta.sin_cos();
                degenerate = degenerate.max((b.rhs - 16.0 * c.powi(3) * s).abs() / b.rhs);
            }
        }
    }
    check(
        med[2] <= 1e-3 && med[1] < med[0] && med[2] < med[1] && degenerate <= 1e-12 && mismatches == 0,
        format!(
            "median rel err [{}] (tol 1e-3 at 129, decreasing); degenerate paths {degenerate:.2e} (tol 1e-12); sign mismatches {mismatches}",
            sci(&med)
        ),
    )
}

// 7. The p^{-1/2} bound.
fn sup_ratio() -> Outcome {
    let a = verify::sup_ratio(&critical(129), 0.0).map_err(|e| e.to_string())?;
    let b = verify::sup_ratio(&critical(257), 0.0).map_err(|e| e.to_string())?;
    let change = (a.value - b.value).abs() / a.value;
    check(
        a.value.is_finite() && b.value.is_finite() && a.value >= 4.0 && b.value >= 4.0 && change < 0.05,
        format!("sup ratio {:.6} (129) and {:.6} (257), change {change:.2e} (tol 5%)", a.value, b.value),
    )
}

// 8. Exponential decay along the diagonal.
fn decay_law() -> Outcome {
    let mut fits = Vec::new();
    let mut min_ok = true;
    for n in [65, 129, 257] {
        let g = critical(n);
        min_ok &= vacuum::min_pressure(&g).value > 0.0;
        fits.push(vacuum::decay_fit(&g, FRAC_PI_4, FitWindow::LowestDecade).map_err(|e| e.to_string())?);
    }
    let r2 = fits.iter().map(|f| f.r_squared).fold(1.0, f64::min);
    let m0: Vec<f64> = fits.iter().map(|f| f.m0).collect();
    let drift = m0.windows(2).map(|w| (w[0] - w[1]).abs() / w[1]).fold(0.0, f64::max);
    check(
        r2 >= 0.999 && drift <= 0.05 && m0.iter().all(|&m| m > 0.0) && min_ok,
        format!("r_squared min {r2:.6} (tol 0.999); M0 {m0:.4?}, max refinement change {drift:.2e} (tol 5%); min pressure > 0: {min_ok}"),
    )
}

// 9. Shrinkage of the low-pressure region.
fn no_bubble() -> Outcome {
    let eps: Vec<f64> = (2..=10).map(|k| 10f64.powi(-k)).collect();
    let rep = vacuum::bubble_report(&critical(129), &eps, DEFAULT_DELTA).map_err(|e| e.to_string())?;
    let err = rep.max_rel_err.unwrap_or(f64::INFINITY);
    check(
        rep.strictly_decreasing && err <= 0.10 && rep.decades() >= 3.0,
        format!(
            "strictly decreasing: {}; max relative model error {err:.2e} (tol 10%) over {:.0} decades; M0 {:.4}",
            rep.strictly_decreasing,
            rep.decades(),
            rep.model_m0.unwrap_or(f64::NAN)
        ),
    )
}

// 10. The scaling symmetry p -> p1·p(·/√p1).
fn scaling() -> Outcome {
    let p1 = 4.0;
    let g1 = critical(65);
    let g4 = rescale(&g1, p1).map_err(|e| e.to_string())?;
    let mut data_err = 0.0f64;
    for k in 0..g4.n {
        for nd in [g4.node(k, 0), g4.node(0, k)] {
            let (xi, eta) = (nd.r * nd.theta.cos(), nd.r * nd.theta.sin());
            let s = p1.sqrt();
            let fresh = exterior_field(xi / s, eta / s)
                .map_err(|e| e.to_string())?
                .pressure()
                .ok_or("arc point classified as interior")?
                * p1;
            data_err = data_err.max((nd.p - fresh).abs() / fresh);
        }
    }
    let (r1, r4) = (verify::residual_net(&g1, 1), verify::residual_net(&g4, 1));
    let same_points = r1.samples.len() == r4.samples.len();
    let res_err = r1
        .samples
        .iter()
        .zip(&r4.samples)
        .map(|(a, b)| (a.value - b.value).abs() / a.value.abs().max(1.0))
        .fold(0.0, f64::max);
    check(
        data_err <= 1e-12 && same_points && res_err <= 1e-12,
        format!("arc data vs fresh exterior {data_err:.2e}; residual change {res_err:.2e} over {} samples (tol 1e-12)", r1.samples.len()),
    )
}

// 11. Determinism, round trip and exit codes of the binary.
fn determinism_and_format() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_pgrad");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = |name: &str| tmp.path().join(name);
    let run = |args: &[&str]| -> Result<i32, String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        Ok(out.status.code().unwrap_or(-1))
    };
    let path = |p: &Path| p.to_str().unwrap().to_owned();
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let mut notes = Vec::new();

    // the config echo includes the output directory, so repeat in place
    let a = dir("a");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let code = run(&["solve", "--out", &path(&a), "--n-seeds", "33"])?;
        if code != 0 {
            return Err(format!("solve exited {code}"));
        }
        runs.push((read(&a.join("grid.csv"))?, read(&a.join("meta.json"))?));
    }
    let identical = runs[0] == runs[1];
    let ga = runs.swap_remove(0).0;
    notes.push(format!("repeat identical: {identical}"));
    let parsed = parse_grid_csv(&ga, SolverConfig::with_seeds(33)).map_err(|e| e.to_string())?;
    let round_trip = write_grid_csv(&parsed) == ga;
    notes.push(format!("round trip: {round_trip}"));

    let small = dir("small");
    run(&["solve", "--out", &path(&small), "--n-seeds", "2"])?;
    let rows = read(&small.join("grid.csv"))?.lines().count() - 1;
    notes.push(format!("n_seeds=2 rows: {rows}"));

    let scaled = dir("scaled");
    run(&["solve", "--out", &path(&scaled), "--n-seeds", "33", "--p1", "4"])?;
    let g4 = parse_grid_csv(&read(&scaled.join("grid.csv"))?, SolverConfig::with_seeds(33)).map_err(|e| e.to_string())?;
    let exact_scaling = parsed
        .nodes
        .iter()
        .zip(&g4.nodes)
        .all(|(u, v)| v.p == 4.0 * u.p && v.r == 2.0 * u.r && v.theta == u.theta);
    notes.push(format!("p1=4 exact: {exact_scaling}"));

    let full = dir("full");
    let code = run(&["all", "--out", &path(&full), "--n-seeds", "33"])?;
    let mut svg_ok = code == 0;
    for name in ["characteristics", "levels", "decay", "field"] {
        let text = read(&full.join(format!("{name}.svg")))?;
        let doc = roxmltree::Document::parse(&text).map_err(|e| format!("{name}.svg: {e}"))?;
        let root = doc.root_element();
        svg_ok &= root.tag_name().name() == "svg" && root.attribute("width") == Some("800") && root.attribute("height") == Some("800");
    }
    let bubble: serde_json::Value =
        serde_json::from_str(&read(&full.join("bubble.json"))?).map_err(|e| e.to_string())?;
    let decay = read(&full.join("decay.svg"))?;
    let doc = roxmltree::Document::parse(&decay).map_err(|e| e.to_string())?;
    let fit = doc.descendants().find(|nd| nd.attribute("id") == Some("fit"));
    let attr = |k: &str| fit.and_then(|f| f.attribute(k)).and_then(|v| v.parse::<f64>().ok());
    let fit_matches = attr("data-c") == bubble["decay_fit"]["c"].as_f64()
        && attr("data-m0") == bubble["decay_fit"]["m0"].as_f64()
        && attr("data-m0").is_some();
    notes.push(format!("plots well-formed: {svg_ok}, fit annotation matches: {fit_matches}"));

    // injected failures
    let cfg_bad = dir("bad.cfg");
    fs::write(&cfg_bad, "n_seeds = 9\nno_such_key = 1\n").map_err(|e| e.to_string())?;
    let c_config = run(&["solve", "--config", &path(&cfg_bad), "--out", &path(&dir("x"))])?;
    let cfg_iter = dir("iter.cfg");
    fs::write(&cfg_iter, "n_seeds = 9\nmax_corrector_iters = 1\n").map_err(|e| e.to_string())?;
    let c_solver = run(&["solve", "--config", &path(&cfg_iter), "--out", &path(&dir("y"))])?;
    let corrupt = dir("corrupt");
    fs::create_dir_all(&corrupt).map_err(|e| e.to_string())?;
    let mut g = parsed.clone();
    let k = g.idx(7, 3);
    g.nodes[k].dp_plus = -g.nodes[k].dp_plus;
    fs::write(corrupt.join("grid.csv"), write_grid_csv(&g)).map_err(|e| e.to_string())?;
    let c_invariant = run(&["verify", "--out", &path(&corrupt), "--n-seeds", "33"])?;
    let report: serde_json::Value =
        serde_json::from_str(&read(&corrupt.join("verify.json"))?).map_err(|e| e.to_string())?;
    let listed = report["signs"]["nodes"]
        .as_array()
        .is_some_and(|v| v.contains(&serde_json::json!([7, 3, "dp_plus"])));
    let blocker = dir("file");
    fs::write(&blocker, "not a directory").map_err(|e| e.to_string())?;
    let c_io = run(&["solve", "--out", &path(&blocker.join("sub")), "--n-seeds", "5"])?;
    let c_ok = run(&["verify", "--out", &path(&a), "--n-seeds", "33"])?;
    let codes = [c_ok, c_config, c_solver, c_invariant, c_io];
    notes.push(format!("exit codes ok/config/solver/invariant/io = {codes:?}, corrupted node listed: {listed}"));

    check(
        identical && round_trip && svg_ok && fit_matches && rows == 4 && exact_scaling && codes == [0, 1, 2, 3, 4] && listed,
        notes.join("; "),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 11] = [
        ("boundary exactness", boundary_exactness, Some(Duration::from_secs(1))),
        ("arc-characteristic identity", arc_characteristics, Some(Duration::from_secs(1))),
        ("decomposition-form equivalence", decomposition_forms, Some(Duration::from_secs(1))),
        ("convergence", convergence, Some(Duration::from_secs(60))),
        ("invariants", invariants, Some(Duration::from_secs(120))),
        ("integral-formula oracle", integral_oracle, None),
        ("sup-ratio bound", sup_ratio, None),
        ("decay law", decay_law, None),
        ("no-bubble shrinkage", no_bubble, None),
        ("scaling invariance", scaling, None),
        ("determinism and format", determinism_and_format, None),
    ];
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(d), Some(l)) if elapsed > *l => Err(format!("{d}; took {elapsed:.2?}, limit {l:.0?}")),
            (o, _) => o,
        };
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} [{name}]: {status} ({elapsed:.2?}) {detail}", k + 1);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
