//! Zero-rate boundary in the (transmittance, detection error) plane.
//!
//! For each transmittance on a grid the largest detection error that still
//! yields a nonnegative key rate is located by bisection on `e_d`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{find_root_bisect, NumericError, Probability, DEFAULT_TOLERANCE};
use crate::rates::{key_rate, RateError, SourceModel};

/// Upper end of the `e_d` bracket.
pub const MAX_DETECTION_ERROR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ThresholdError {
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("transmittance {0} is outside (0, 1]")]
    InvalidTransmittance(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("rate is positive at e_d = 1/2 for eta = {eta}; the model is not monotone in e_d")]
    NonMonotone { eta: f64 },
    #[error("no grid point of the {0} curve tolerates any detection error")]
    EmptyCurve(CurveFamily),
}

/// One curve of the tolerable-error plot.
///
/// The memory variant with a basis-independent source reuses the single
/// photon formulas with the readout probability in place of `eta`, and is
/// kept as its own family so that output files list all four curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CurveFamily {
    SinglePhoton,
    Coherent { mu: f64 },
    CoherentMemory { mu: f64, eta_c: f64 },
    MemoryBasisIndependent,
}

impl std::fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl CurveFamily {
    /// The four families with the default coherent settings (`mu = 0.5`,
    /// `eta_c = 0.01`).
    pub fn all_default() -> [CurveFamily; 4] {
        [
            CurveFamily::SinglePhoton,
            CurveFamily::Coherent { mu: 0.5 },
            CurveFamily::CoherentMemory {
                mu: 0.5,
                eta_c: 0.01,
            },
            CurveFamily::MemoryBasisIndependent,
        ]
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CurveFamily::SinglePhoton => "single-photon",
            CurveFamily::Coherent { .. } => "coherent",
            CurveFamily::CoherentMemory { .. } => "coherent-memory",
            CurveFamily::MemoryBasisIndependent => "memory-basis-independent",
        }
    }

    /// Source model at a point of the plane. `eta` is the readout
    /// probability for the memory families.
    pub fn model(&self, eta: f64, e_d: f64) -> Result<SourceModel, RateError> {
        match *self {
            CurveFamily::SinglePhoton | CurveFamily::MemoryBasisIndependent => {
                SourceModel::single_photon(eta, e_d)
            }
            CurveFamily::Coherent { mu } => SourceModel::coherent(mu, eta, e_d),
            CurveFamily::CoherentMemory { mu, eta_c } => {
                SourceModel::coherent_memory(mu, eta_c, eta, e_d)
            }
        }
    }

    /// Raw key rate at `(eta, e_d)`.
    pub fn rate(&self, eta: f64, e_d: f64) -> Result<f64, RateError> {
        key_rate(&self.model(eta, e_d)?).map(|r| r.rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub eta: Probability,
    /// Largest tolerable detection error, to within the solver tolerance.
    pub e_d_max: Probability,
    pub family: CurveFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub eta_min: f64,
    pub eta_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            eta_min: 0.5,
            eta_max: 1.0,
            step: 0.005,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(ThresholdError::InvalidGrid("step must be positive"));
        }
        if !(self.eta_min > 0.0 && self.eta_max <= 1.0) {
            return Err(ThresholdError::InvalidGrid("eta range must lie in (0, 1]"));
        }
        if self.eta_min > self.eta_max {
            return Err(ThresholdError::InvalidGrid("eta_min exceeds eta_max"));
        }
        Ok(())
    }

    /// Grid abscissae `eta_min + i * step`, endpoint included when it falls
    /// on the grid.
    pub fn points(&self) -> Vec<f64> {
        let span = (self.eta_max - self.eta_min) / self.step;
        let n = (span + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| (self.eta_min + i as f64 * self.step).min(self.eta_max))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub family: CurveFamily,
    pub grid: GridSpec,
    pub points: Vec<ThresholdPoint>,
}

/// Largest `e_d` in `[0, 1/2]` with a nonnegative rate at transmittance `eta`.
///
/// Returns `None` when no detection error admits a strictly positive rate,
/// which is the case for every `eta <= 1/2`.
pub fn solve_threshold_ed(
    family: CurveFamily,
    eta: f64,
    tol: f64,
) -> Result<Option<ThresholdPoint>, ThresholdError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ThresholdError::InvalidTransmittance(eta));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(NumericError::InvalidTolerance(tol).into());
    }
    let at_zero = family.rate(eta, 0.0)?;
    if at_zero <= 0.0 {
        return Ok(None);
    }
    if family.rate(eta, MAX_DETECTION_ERROR)? > 0.0 {
        return Err(ThresholdError::NonMonotone { eta });
    }
    // Rates are strictly decreasing in e_d here, so the closure never fails.
    let root = find_root_bisect(
        |e_d| family.rate(eta, e_d).unwrap_or(f64::NAN),
        0.0,
        MAX_DETECTION_ERROR,
        tol,
    )?;
    Ok(Some(ThresholdPoint {
        eta: Probability::new(eta)?,
        e_d_max: Probability::saturating(root),
        family,
    }))
}

/// Evaluates the boundary at every grid point, dropping points without a
/// tolerable error. Points are solved in parallel and kept in grid order.
pub fn sweep_curve(
    family: CurveFamily,
    grid: GridSpec,
    tol: f64,
) -> Result<ThresholdCurve, ThresholdError> {
    grid.validate()?;
    let solved: Result<Vec<Option<ThresholdPoint>>, ThresholdError> = grid
        .points()
        .into_par_iter()
        .map(|eta| solve_threshold_ed(family, eta, tol))
        .collect();
    let points: Vec<ThresholdPoint> = solved?.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(ThresholdError::EmptyCurve(family));
    }
    Ok(ThresholdCurve {
        family,
        grid,
        points,
    })
}

/// Sweeps the default grid at the default tolerance.
pub fn sweep_default(family: CurveFamily) -> Result<ThresholdCurve, ThresholdError> {
    sweep_curve(family, GridSpec::default(), DEFAULT_TOLERANCE)
}

pub const CSV_HEADER: &str = "model,eta,e_d_max";

/// Renders curves as CSV: `model,eta,e_d_max`, nine decimals, LF endings.
pub fn curves_to_csv<'a>(curves: impl IntoIterator<Item = &'a ThresholdCurve>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for curve in curves {
        for p in &curve.points {
            let _ = writeln!(
                out,
                "{},{:.9},{:.9}",
                curve.family.tag(),
                p.eta.value(),
                p.e_d_max.value()
            );
        }
    }
    out
}
