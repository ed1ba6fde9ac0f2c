use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("region III input (gamma_y < gamma_c, gamma_x > gamma_y); canonicalize the parameters first")]
    RegionIII,

    #[error("rho = {rho} is outside the energy-surface domain 0 <= rho^2 <= N = {n_atoms}")]
    SurfaceDomain { rho: f64, n_atoms: usize },

    #[error("numeric minimizer did not converge within {iterations} refinement steps")]
    NoConvergence { iterations: usize },

    #[error("truncated solution is singular at the transition (distance to gamma_c = {distance:e})")]
    SingularAtTransition { distance: f64 },

    #[error("deformed-phase coefficients are singular at gamma_x = gamma_y = {gamma}")]
    DegenerateCouplings { gamma: f64 },

    #[error("expected gamma_y = gamma_c = {gamma_c}, got gamma_y = {gamma_y}")]
    NotSpecialLine { gamma_y: f64, gamma_c: f64 },

    #[error("expected gamma_x < gamma_c = {gamma_c}, got gamma_x = {gamma_x}")]
    NotDeformed { gamma_x: f64, gamma_c: f64 },

    #[error("N = {n_atoms} exceeds the configured cap {cap}{hint}")]
    SizeCap {
        n_atoms: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("eigensolver failed to converge in the {block} block at N = {n_atoms}")]
    Eigensolver { block: Parity, n_atoms: usize },

    #[error("ground-state parity changes between the two parameter points ({left} vs {right})")]
    ParityMismatch { left: Parity, right: Parity },

    #[error("resolvent is ill-conditioned: in-block gap E1 - E0 = {gap:e} in the {block} block")]
    IllConditioned { gap: f64, block: Parity },

    #[error("power-law fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("power-law fit requires positive data, got value {value} at N = {n}")]
    NonPositive { n: f64, value: f64 },

    #[error("scaling bracket vanishes at gamma = gamma_c with alpha = {alpha}")]
    ScalingDomain { alpha: f64 },

    #[error("empty search window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },
}

/// Parity sector of the `J_z` basis. `Even` is the block that contains `m = -j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Parity::Even => f.write_str("even"),
            Parity::Odd => f.write_str("odd"),
        }
    }
}
