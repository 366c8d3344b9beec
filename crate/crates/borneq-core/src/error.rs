use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by geometry construction, functionals and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("box half-width {half_width} does not contain the domain (circumradius {circumradius})")]
    BoxTooSmall { half_width: f64, circumradius: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mollification radius {epsilon} below resolvable limit 2h = {min} (grid spacing h = {h})")]
    UnresolvableMollifier { epsilon: f64, min: f64, h: f64 },

    #[error("gradient constraint violated at cell {cell:?} (index {index}): |grad phi| = {magnitude} > 1")]
    ConstraintViolation {
        index: usize,
        cell: [usize; 3],
        magnitude: f64,
    },

    #[error("singular integrand: |grad phi| = {magnitude} >= 1 at cell index {index}")]
    SingularIntegrand { index: usize, magnitude: f64 },

    #[error("singular flux density: |normal derivative| = {magnitude} >= 1 at boundary point {index}")]
    SingularFlux { index: usize, magnitude: f64 },

    #[error("plateau level {lambda} infeasible: no 1-Lipschitz function connects it to 0 over distance {distance} (boundary to box)")]
    InfeasiblePlateau { lambda: f64, distance: f64 },

    #[error("normal-derivative stencil exits the grid at boundary point {index}")]
    StencilOutsideGrid { index: usize },

    #[error("zero quadrature weight at boundary point {index}")]
    ZeroWeight { index: usize },

    #[error("series order {0} outside supported range 1..=200")]
    OrderOutOfRange(usize),

    #[error("quadrature failed to reach tolerance {requested} (achieved {achieved})")]
    QuadratureFailure { requested: f64, achieved: f64 },

    #[error("root bracket not found: {0}")]
    BracketNotFound(String),

    #[error("total-mass map is not increasing across sampled levels ({lambda_lo}, {mass_lo}) vs ({lambda_hi}, {mass_hi}); this signals a solver bug")]
    UpsilonNotMonotone {
        lambda_lo: f64,
        mass_lo: f64,
        lambda_hi: f64,
        mass_hi: f64,
    },

    #[error("NaN detected during solve at iteration {iteration}")]
    NanDetected { iteration: usize },

    #[error("solver did not converge within {max_iterations} iterations (residual {residual})")]
    NotConverged {
        max_iterations: usize,
        residual: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
