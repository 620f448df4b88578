//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; every other line must be a known
//! key. Command-line flags are applied on top of the file.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pgrad_core::solver::{Grading, SeedLayout, SolverConfig, DEFAULT_FLOOR_MULTIPLE};
use pgrad_core::vacuum::DEFAULT_DELTA;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    Critical,
    Graded,
    Uniform,
}

impl LayoutKind {
    fn as_str(self) -> &'static str {
        match self {
            LayoutKind::Critical => "critical",
            LayoutKind::Graded => "graded",
            LayoutKind::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_seeds: usize,
    pub seed_layout: LayoutKind,
    /// Last seed angle for the graded and uniform layouts.
    pub theta_min: f64,
    pub total_ratio: f64,
    pub knee: f64,
    pub floor_multiple: f64,
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    pub p_floor: f64,
    pub sonic_margin: f64,
    pub param_switch_lambda: f64,
    pub output_dir: PathBuf,
    /// Descending levels for the shrinkage report.
    pub epsilons: Vec<f64>,
    pub delta: f64,
    pub raster_n_r: usize,
    pub raster_n_theta: usize,
    pub field_cells: usize,
    pub plots: bool,
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub p1: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        let g = Grading::default();
        Self {
            n_seeds: s.n_seeds,
            seed_layout: LayoutKind::Critical,
            theta_min: 0.5,
            total_ratio: g.total_ratio,
            knee: g.knee,
            floor_multiple: DEFAULT_FLOOR_MULTIPLE,
            corrector_tol: s.corrector_tol,
            max_corrector_iters: s.max_corrector_iters,
            p_floor: s.p_floor,
            sonic_margin: s.sonic_margin,
            param_switch_lambda: s.param_switch_lambda,
            output_dir: PathBuf::from("pgrad-out"),
            epsilons: (2..=10).map(|k| 10f64.powi(-k)).collect(),
            delta: DEFAULT_DELTA,
            raster_n_r: 100,
            raster_n_theta: 100,
            field_cells: 120,
            plots: true,
            canvas_width: 800,
            canvas_height: 800,
            p1: 1.0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "n_seeds",
    "seed_layout",
    "theta_min",
    "total_ratio",
    "knee",
    "floor_multiple",
    "corrector_tol",
    "max_corrector_iters",
    "p_floor",
    "sonic_margin",
    "param_switch_lambda",
    "output_dir",
    "epsilons",
    "delta",
    "raster_n_r",
    "raster_n_theta",
    "field_cells",
    "plots",
    "canvas_width",
    "canvas_height",
    "p1",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_list(key: &str, v: &str) -> CliResult<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, v: &str) -> CliResult<()> {
        let v = v.trim();
        match key {
            "n_seeds" => self.n_seeds = parse_num(key, v)?,
            "seed_layout" => {
                self.seed_layout = match v {
                    "critical" => LayoutKind::Critical,
                    "graded" => LayoutKind::Graded,
                    "uniform" => LayoutKind::Uniform,
                    _ => return Err(CliError::Config(format!("seed_layout: unknown layout {v:?}"))),
                }
            }
            "theta_min" => self.theta_min = parse_num(key, v)?,
            "total_ratio" => self.total_ratio = parse_num(key, v)?,
            "knee" => self.knee = parse_num(key, v)?,
            "floor_multiple" => self.floor_multiple = parse_num(key, v)?,
            "corrector_tol" => self.corrector_tol = parse_num(key, v)?,
            "max_corrector_iters" => self.max_corrector_iters = parse_num(key, v)?,
            "p_floor" => self.p_floor = parse_num(key, v)?,
            "sonic_margin" => self.sonic_margin = parse_num(key, v)?,
            "param_switch_lambda" => self.param_switch_lambda = parse_num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "epsilons" => self.epsilons = parse_list(key, v)?,
            "delta" => self.delta = parse_num(key, v)?,
            "raster_n_r" => self.raster_n_r = parse_num(key, v)?,
            "raster_n_theta" => self.raster_n_theta = parse_num(key, v)?,
            "field_cells" => self.field_cells = parse_num(key, v)?,
            "plots" => self.plots = parse_num(key, v)?,
            "canvas_width" => self.canvas_width = parse_num(key, v)?,
            "canvas_height" => self.canvas_height = parse_num(key, v)?,
            "p1" => self.p1 = parse_num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a configuration text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// The configuration as `key = value` text; `apply_text` reads it back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let f = crate::format::num;
        vec![
            ("n_seeds", self.n_seeds.to_string()),
            ("seed_layout", self.seed_layout.as_str().into()),
            ("theta_min", f(self.theta_min)),
            ("total_ratio", f(self.total_ratio)),
            ("knee", f(self.knee)),
            ("floor_multiple", f(self.floor_multiple)),
            ("corrector_tol", f(self.corrector_tol)),
            ("max_corrector_iters", self.max_corrector_iters.to_string()),
            ("p_floor", f(self.p_floor)),
            ("sonic_margin", f(self.sonic_margin)),
            ("param_switch_lambda", f(self.param_switch_lambda)),
            ("output_dir", self.output_dir.display().to_string()),
            ("epsilons", self.epsilons.iter().map(|&e| f(e)).collect::<Vec<_>>().join(",")),
            ("delta", f(self.delta)),
            ("raster_n_r", self.raster_n_r.to_string()),
            ("raster_n_theta", self.raster_n_theta.to_string()),
            ("field_cells", self.field_cells.to_string()),
            ("plots", self.plots.to_string()),
            ("canvas_width", self.canvas_width.to_string()),
            ("canvas_height", self.canvas_height.to_string()),
            ("p1", f(self.p1)),
        ]
    }

    pub fn solver(&self) -> SolverConfig {
        let grading = Grading {
            total_ratio: self.total_ratio,
            knee: self.knee,
        };
        let seeds = match self.seed_layout {
            LayoutKind::Critical => SeedLayout::Critical {
                grading,
                floor_multiple: self.floor_multiple,
            },
            LayoutKind::Graded => SeedLayout::Graded {
                theta_min: self.theta_min,
                grading,
            },
            LayoutKind::Uniform => SeedLayout::Uniform { theta_min: self.theta_min },
        };
        SolverConfig {
            n_seeds: self.n_seeds,
            seeds,
            corrector_tol: self.corrector_tol,
            max_corrector_iters: self.max_corrector_iters,
            p_floor: self.p_floor,
            sonic_margin: self.sonic_margin,
            param_switch_lambda: self.param_switch_lambda,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.solver().validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.p1 > 0.0 && self.p1.is_finite()) {
            return bad(format!("p1 = {} must be positive", self.p1));
        }
        if self.epsilons.is_empty() {
            return bad("epsilons must not be empty".into());
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("epsilons must lie in (0, 1)".into());
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("epsilons must be strictly descending".into());
        }
        if !(self.delta >= 0.0 && self.delta < FRAC_PI_4) {
            return bad(format!("delta = {} must lie in [0, pi/4)", self.delta));
        }
        if self.raster_n_r < 3 || self.raster_n_theta < 3 || self.field_cells < 1 {
            return bad("raster needs at least 3 points per axis and field_cells >= 1".into());
        }
        if self.canvas_width < 64 || self.canvas_height < 64 {
            return bad("canvas must be at least 64 x 64".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("n_seeds = 33\nseed_layout = uniform # trailing\n\n# comment\nepsilons = 1e-2, 1e-4\np1=4").unwrap();
        assert_eq!((cfg.n_seeds, cfg.seed_layout, cfg.p1), (33, LayoutKind::Uniform, 4.0));
        assert_eq!(cfg.epsilons, vec![1e-2, 1e-4]);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.entries().len(), KEYS.len());
        assert!(cfg.entries().iter().zip(KEYS).all(|(e, k)| e.0 == *k));
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.apply_text("n_sedes = 3"), Err(CliError::Config(_))));
        assert!(matches!(cfg.apply_text("n_seeds 3"), Err(CliError::Config(_))));
        assert!(matches!(cfg.apply_text("n_seeds = three"), Err(CliError::Config(_))));
    }

    #[test]
    fn ranges_are_validated() {
        assert!(RunConfig::default().validate().is_ok());
        let cases: Vec<fn(&mut RunConfig)> = vec![
            |c| c.n_seeds = 1,
            |c| c.p1 = 0.0,
            |c| c.epsilons = vec![1e-3, 1e-2],
            |c| c.epsilons = vec![1.5],
            |c| c.epsilons.clear(),
            |c| c.delta = 1.0,
            |c| c.p_floor = -1.0,
            |c| c.raster_n_r = 2,
            |c| {
                c.seed_layout = LayoutKind::Uniform;
                c.theta_min = 1.0
            },
        ];
        for f in cases {
            let mut c = RunConfig::default();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
