//! Scalar primitives shared by the rate and threshold code: a checked
//! probability type, the binary entropy and a bracketed bisection solver.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default argument tolerance for [`find_root_bisect`].
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Hard iteration cap for [`find_root_bisect`].
pub const MAX_BISECTION_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NumericError {
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("function returned NaN at x = {0}")]
    NotANumber(f64),
    #[error("bisection did not converge within {iterations} iterations (last x = {last_x})")]
    IterationLimit { iterations: usize, last_x: f64 },
}

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const HALF: Probability = Probability(0.5);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self, NumericError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(NumericError::OutOfRange(value))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - p`.
    #[inline]
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = NumericError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary Shannon entropy `H2(x) = -x log2 x - (1-x) log2 (1-x)` in bits.
///
/// The endpoints return exactly 0 through an explicit branch so that
/// `0 * log 0` never produces NaN.
pub fn binary_entropy(x: Probability) -> f64 {
    let x = x.value();
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let y = 1.0 - x;
    -x * x.log2() - y * y.log2()
}

/// [`binary_entropy`] on a raw float, rejecting values outside `[0, 1]`.
pub fn binary_entropy_checked(x: f64) -> Result<f64, NumericError> {
    Probability::new(x).map(binary_entropy)
}

/// Bisection on a bracket `[lo, hi]` whose endpoints have opposite signs.
///
/// Stops once the bracket is no wider than `tol` and returns its midpoint,
/// so the result lies within `tol / 2` of a sign change. An endpoint or
/// midpoint where `f` is exactly zero is returned immediately.
pub fn find_root_bisect<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericError>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(NumericError::InvalidTolerance(tol));
    }
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = eval(&f, lo)?;
    let f_hi = eval(&f, hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(NumericError::NoSignChange { lo, hi, f_lo, f_hi });
    }

    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= tol {
            return Ok(mid);
        }
        let f_mid = eval(&f, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(NumericError::IterationLimit {
        iterations: MAX_BISECTION_ITERATIONS,
        last_x: lo + 0.5 * (hi - lo),
    })
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, NumericError> {
    let y = f(x);
    if y.is_nan() {
        Err(NumericError::NotANumber(x))
    } else {
        Ok(y)
    }
}
