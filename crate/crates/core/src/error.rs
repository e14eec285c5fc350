use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by meshing, assembly, solvers and inversion drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidArgument(&'static str),
    /// A deformation state with `det F` at or below the admissibility guard.
    Domain { det: f64 },
    /// An iterative solver ran out of iterations.
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// Conjugate gradients hit a non-positive curvature direction.
    Breakdown { solver: &'static str, iteration: usize },
    UnknownTag,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Domain { det } => write!(f, "inadmissible deformation (det F = {det:e})"),
            Error::NotConverged {
                solver,
                iterations,
                residual,
            } => write!(
                f,
                "{solver} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Breakdown { solver, iteration } => {
                write!(f, "{solver} broke down at iteration {iteration}")
            }
            Error::UnknownTag => write!(f, "boundary tag not present on mesh"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
