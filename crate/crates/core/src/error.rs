use thiserror::Error;

/// Why a state left the strictly hyperbolic regime `0 < p < r²`.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum Degeneracy {
    #[error("vacuum: p = {p:e} at r = {r} is at or below the pressure floor")]
    Vacuum { r: f64, p: f64 },
    #[error("sonic: r^2 - p = {:e} at r = {r} is at or below the sonic margin", r * r - p)]
    Sonic { r: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Degenerate(#[from] Degeneracy),
    #[error("corrector did not converge at node ({i}, {j}): last change {last_change:e}")]
    NoConvergence { i: usize, j: usize, last_change: f64 },
    #[error("characteristic through node ({i}, {j}) does not reach its arc anchor")]
    AnchorMissing { i: usize, j: usize },
    #[error("empty: {0}")]
    Empty(String),
    #[error("no seed layout reaches the target pressure {p_target:e}")]
    Unreachable { p_target: f64 },
    #[error("too few samples: {found} usable, {needed} required")]
    TooFewSamples { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
