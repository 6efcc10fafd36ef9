use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid coin parameters: {0}")]
    InvalidParams(String),

    #[error("coin {} is not unitary (max |C*C - I| = {defect:.3e})", site_label(*.site))]
    NotUnitary { site: Option<i64>, defect: f64 },

    #[error("coin at site {site} has |a| = {modulus:.6e}, below the lower bound delta = {delta:.6e}")]
    AmplitudeBound { site: i64, modulus: f64, delta: f64 },

    #[error("quasi-energy {theta:.12} lies within {margin:.3e} rad of a band threshold")]
    Threshold { theta: f64, margin: f64 },

    #[error("quasi-energy {theta:.12} is not inside a band")]
    NotInBand { theta: f64 },

    #[error("dispersion determinant vanishes at xi = {xi:.12} (|p| = {modulus:.3e})")]
    OnShell { xi: f64, modulus: f64 },

    #[error("eigenvalues of the symbol are degenerate at xi = {xi:.12}")]
    Degenerate { xi: f64 },

    #[error("near-resonant linear system: solver residual {residual:.3e}")]
    NearResonance { residual: f64 },

    #[error("window error: {0}")]
    Window(String),

    #[error("probe inconclusive: {overlap:.3e} of the probability is still near the scatterer")]
    InconclusiveProbe { overlap: f64 },

    #[error("config error: {0}")]
    Config(String),
}

fn site_label(site: Option<i64>) -> String {
    match site {
        Some(x) => format!("at site {x}"),
        None => "matrix".to_string(),
    }
}

impl Error {
    /// Stable machine-readable code, used by the CLI for exit reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid-params",
            Error::NotUnitary { .. } => "not-unitary",
            Error::AmplitudeBound { .. } => "amplitude-bound",
            Error::Threshold { .. } => "threshold",
            Error::NotInBand { .. } => "not-in-band",
            Error::OnShell { .. } => "on-shell",
            Error::Degenerate { .. } => "degenerate",
            Error::NearResonance { .. } => "near-resonance",
            Error::Window(_) => "window",
            Error::InconclusiveProbe { .. } => "inconclusive-probe",
            Error::Config(_) => "config",
        }
    }
}
