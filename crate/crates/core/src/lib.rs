//! Lattice operator toolkit for discrete holomorphicity in the Ising,
//! Ashkin-Teller and loop O(n) models.
//!
//! The crate bundles the pieces needed to study s-holomorphic observables on
//! small lattice domains numerically:
//!
//! * [`lattice`] — finite square and honeycomb (brick-wall) domains, dual
//!   intervals and Riemann boundary phases;
//! * [`sholo`] — massive/massless s-holomorphicity residuals, Riemann
//!   boundary checks and discrete residues;
//! * [`propagate`] — the six row-to-row propagation matrices, their spectra
//!   and block decompositions;
//! * [`transfer`] — spin-basis transfer matrices, Clifford-type generators,
//!   induced rotations and duality maps;
//! * [`fock`] — Pfaffians, Wick's formula, polarizations and the Fock
//!   spectrum identity;
//! * [`observables`] — path-sum parafermionic observables and fermion
//!   correlators, with the two-point/multipoint identity checks;
//! * [`rps`] — Riemann-Poincaré-Steklov boundary operators and s-holomorphic
//!   kernel extensions;
//! * [`oracle`] — brute-force exact enumeration of all of the above models
//!   at desk scale, used as ground truth everywhere else;
//! * [`verify`] — named cross-module check suites with pass/fail reporting.
//!
//! Everything is dense, deterministic and sized for exact desk-scale
//! verification rather than production simulation.

pub mod export;
pub mod fock;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod propagate;
pub mod rps;
pub mod sholo;
pub mod transfer;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Grid dimensions must be strictly positive.
    #[error("invalid dimension: width and height must be >= 1 (got {width} x {height})")]
    InvalidDimension { width: i64, height: i64 },

    /// Interval endpoints must satisfy b > a (or a size constraint).
    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    /// Requested a boundary-only quantity on an interior edge.
    #[error("edge {0} is not a boundary edge")]
    NotBoundary(usize),

    /// Parameters outside the validity range of a formula.
    #[error("parameter domain error: {0}")]
    Domain(String),

    /// Dense-size guard tripped.
    #[error("size guard exceeded: {what} = {got}, limit {limit}")]
    SizeGuard {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    /// A coupling made a formula singular (e.g. sinh(2 beta) = 0).
    #[error("singular parameter: {0}")]
    SingularParameter(String),

    /// Vector/matrix dimensions do not match.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A documented precondition was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The local extension solve near a residue edge was singular.
    #[error("singular extension solve: {0}")]
    SingularExtension(String),

    /// Eigen-solver or linear-algebra backend failure.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Path enumeration would exceed its budget.
    #[error("enumeration budget exceeded: at least {bound} paths")]
    EnumerationBudget { bound: usize },

    /// No dual coupling exists in the searched bracket.
    #[error("duality domain error: {0}")]
    DualityDomain(String),

    /// T_V has a unit-modulus eigenvalue; no physical polarization exists.
    #[error("cannot polarize: eigenvalue with |lambda| = 1 within tolerance {0}")]
    CannotPolarize(f64),

    /// SS block of the propagator power is numerically singular.
    #[error("singular SS block: condition estimate {cond:.3e} exceeds {limit:.1e}")]
    SingularBlock { cond: f64, limit: f64 },

    /// Propagation blew past the overflow guard.
    #[error("instability: field norm {0:.3e} exceeded overflow guard")]
    Instability(f64),

    /// Conjugation by V does not preserve the generator span.
    #[error("non-quadratic form: conjugation leaves generator span, defect {0:.3e}")]
    NonQuadraticForm(f64),

    /// I/O or serialization failure.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// lambda = exp(i pi / 4), the octant phase entering every square-lattice relation.
pub fn lambda() -> C64 {
    C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)
}

/// Critical inverse temperature of the square-lattice Ising model,
/// beta_c = log(sqrt(2) + 1) / 2.
pub fn beta_critical() -> f64 {
    0.5 * (std::f64::consts::SQRT_2 + 1.0).ln()
}

/// Critical coupling of the two-color Ashkin-Teller model on the self-dual
/// line, J = U = log(3) / 4.
pub fn at_critical_coupling() -> f64 {
    0.25 * 3.0f64.ln()
}

/// Critical loop weight x_c(n) = 1 / sqrt(2 + sqrt(2 - n)) for 0 <= n <= 2.
pub fn loop_x_critical(n: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&n) {
        return Err(Error::Domain(format!(
            "x_c(n) requires 0 <= n <= 2, got n = {n}"
        )));
    }
    Ok(1.0 / (2.0 + (2.0 - n).sqrt()).sqrt())
}
