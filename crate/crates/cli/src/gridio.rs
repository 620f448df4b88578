//! `grid.csv`: one row per node in row-major order.

use pgrad_core::boundary::{self, rescale_seed};
use pgrad_core::solver::{CharGrid, NodeDiagnostics, NodeStatus, SolverConfig, StateNode};

use crate::format::num;

pub const COLUMNS: [&str; 8] = ["i", "j", "r", "theta", "p", "dp_plus", "dp_minus", "status"];

pub fn write_grid_csv(grid: &CharGrid) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for (k, nd) in grid.nodes.iter().enumerate() {
        let (i, j) = (k / grid.n, k % grid.n);
        w.write_record([
            i.to_string(),
            j.to_string(),
            num(nd.r),
            num(nd.theta),
            num(nd.p),
            num(nd.dp_plus),
            num(nd.dp_minus),
            nd.status.as_str().to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("grid.csv line {line}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

/// Parse `grid.csv` back into a net. Arc seeds are rebuilt from the first row
/// and column, the pressure scale from the corner; per-node diagnostics are
/// not stored and come back empty.
pub fn parse_grid_csv(text: &str, config: SolverConfig) -> Result<CharGrid, SchemaError> {
    let err = |line: usize, message: String| SchemaError { line, message };
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().ne(COLUMNS) {
        return Err(err(1, format!("expected header {}", COLUMNS.join(","))));
    }
    let mut nodes = Vec::new();
    let mut index = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let line = row + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != COLUMNS.len() {
            return Err(err(line, format!("expected {} fields, found {}", COLUMNS.len(), rec.len())));
        }
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| err(line, format!("bad {}: {:?}", COLUMNS[k], &rec[k])));
        let float = |k: usize| rec[k].parse::<f64>().map_err(|_| err(line, format!("bad {}: {:?}", COLUMNS[k], &rec[k])));
        index.push((int(0)?, int(1)?));
        nodes.push(StateNode {
            r: float(2)?,
            theta: float(3)?,
            p: float(4)?,
            dp_plus: float(5)?,
            dp_minus: float(6)?,
            status: NodeStatus::parse(&rec[7]).ok_or_else(|| err(line, format!("bad status: {:?}", &rec[7])))?,
        });
    }
    let n = (nodes.len() as f64).sqrt().round() as usize;
    if n < 2 || n * n != nodes.len() {
        return Err(err(0, format!("{} rows do not form an n x n net with n >= 2", nodes.len())));
    }
    for (k, &(i, j)) in index.iter().enumerate() {
        if (i, j) != (k / n, k % n) {
            return Err(err(k + 2, format!("node ({i}, {j}) out of row-major order")));
        }
    }
    let scale = nodes[0].p;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(err(2, "corner pressure must be positive".into()));
    }
    let sqrt_p1 = scale.sqrt();
    let seed = |k: usize, lower: bool| {
        let nd = if lower { &nodes[k * n] } else { &nodes[k] };
        let theta = if k == 0 { std::f64::consts::FRAC_PI_4 } else { nd.theta };
        let s = if lower { boundary::lower_arc(theta) } else { boundary::upper_arc(theta) };
        s.map(|s| if scale == 1.0 { s } else { rescale_seed(&s, sqrt_p1, scale) })
            .map_err(|e| err(if lower { k * n + 2 } else { k + 2 }, e.to_string()))
    };
    let seeds_lower = (0..n).map(|k| seed(k, true)).collect::<Result<Vec<_>, _>>()?;
    let seeds_upper = (0..n).map(|k| seed(k, false)).collect::<Result<Vec<_>, _>>()?;
    Ok(CharGrid {
        n,
        nodes,
        seeds_lower,
        seeds_upper,
        config,
        diagnostics: vec![NodeDiagnostics::default(); n * n],
        scale,
    })
}
