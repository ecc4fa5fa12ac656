use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("basis is singular or numerically rank deficient (|det| = {det:e})")]
    SingularBasis { det: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("window would hold about {predicted} points, above the cap of {cap}")]
    WindowTooLarge { predicted: u64, cap: u64 },
    #[error("radius {radius} exceeds the generated window radius {gen_radius}")]
    RadiusExceedsWindow { radius: f64, gen_radius: f64 },
    #[error("grid has {nodes} nodes, above the cap of {cap}")]
    GridTooLarge { nodes: u64, cap: u64 },
    #[error("sequence length {got} does not match the {expected} lattice points of the window")]
    LengthMismatch { expected: usize, got: usize },
    #[error("density grids differ")]
    GridMismatch,
    #[error("no ascent from the start point")]
    NoAscent { lambda: Vec<f64>, value: (f64, f64) },
    #[error("only {found} linearly independent peaks, need {needed}")]
    RankDeficient { found: usize, needed: usize },
    #[error("peak {peak:?} is not an integer combination of the extracted basis")]
    NotALattice { peak: Vec<f64> },
    #[error("generator peak {index} has |value| = {magnitude}, too weak to read a phase")]
    PhaseUnidentifiable { index: usize, magnitude: f64 },
    #[error("need at least {needed} usable peaks, found {found}")]
    InsufficientPeaks { found: usize, needed: usize },
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoAscent { .. }
                | Error::RankDeficient { .. }
                | Error::NotALattice { .. }
                | Error::PhaseUnidentifiable { .. }
                | Error::InsufficientPeaks { .. }
        )
    }
}
