use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported derivative order {0} (expected -1, 1, 2 or 3)")]
    UnsupportedOrder(i32),

    #[error("grid of {grid_size} points cannot dealias {n_modes} modes (need a power of two > 3·n_modes)")]
    Dealiasing { n_modes: usize, grid_size: usize },

    #[error("fields have different mode counts ({0} vs {1})")]
    ModeMismatch(usize, usize),

    #[error("step stability bound violated at t = {time}: |dt|·6·max|u|·2πK = {courant} > {limit}")]
    Stability { time: f64, courant: f64, limit: f64 },

    #[error("integration blew up (non-finite state) at t = {time}")]
    Blowup { time: f64 },

    #[error("norm ceiling exceeded at t = {time}: ‖u‖_p = {norm} > {ceiling}")]
    NormCeiling { time: f64, norm: f64, ceiling: f64 },

    #[error("horizon t_end = {t_end} exceeds the safety horizon {limit}")]
    HorizonExceeded { t_end: f64, limit: f64 },

    #[error("negative action I_{index} = {value}")]
    NegativeAction { index: usize, value: f64 },

    #[error("action I_{k} = {action} is below the angle threshold; its angle is undefined")]
    ActionBelowThreshold { k: usize, action: f64 },

    #[error("Hill discriminant step unstable at lambda = {lambda}")]
    DiscriminantUnstable { lambda: f64 },

    #[error("no root of the discriminant equation found in [{lo}, {hi}]")]
    RootBracket { lo: f64, hi: f64 },

    #[error("unresolved spectral gaps: {0:?}")]
    UnresolvedGaps(Vec<usize>),

    #[error("resonant harmonic k = {k:?}: |k·ω| = {value}")]
    Resonance { k: Vec<i64>, value: f64 },

    #[error("slow-time range mismatch: trajectory reaches tau = {needed}, averaged solution only {available}")]
    RangeMismatch { needed: f64, available: f64 },

    #[error("clipping of negative actions removed {fraction} of |J|_p at tau = {tau}")]
    ClipExceeded { tau: f64, fraction: f64 },

    #[error("perturbation map fails the smoothing check: {0}")]
    NotSmoothing(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidArgument(_)
                | Error::UnsupportedOrder(_)
                | Error::Dealiasing { .. }
                | Error::ModeMismatch(..)
                | Error::NegativeAction { .. }
                | Error::NotSmoothing(_)
        )
    }
}
