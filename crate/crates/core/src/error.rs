use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain: {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("shooting bracket [{lo}, {hi}] does not enclose the decaying solution")]
    Bracket { lo: f64, hi: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {error:e})")]
    Quadrature { a: f64, b: f64, error: f64 },
    #[error("root finding failed: {0}")]
    Root(String),
    #[error("radial grid does not cover r = {r} (covered [{r_min}, {r_max}])")]
    GridExhausted { r: f64, r_min: f64, r_max: f64 },
    #[error("density total mass {mass} is below the hole mass 1/2")]
    InsufficientMass { mass: f64 },
    #[error("positions {0} and {1} coincide")]
    CoincidentPositions(usize, usize),
    #[error("shape function is not normalized: integral of g^2 = {0}")]
    ShapeNotNormalized(f64),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_domain(
    ok: bool,
    name: &'static str,
    value: f64,
    expected: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected,
        })
    }
}
