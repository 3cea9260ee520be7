//! Closed-form key rates for the modified pre-processing, where no-clicks
//! and double clicks are given random bits and only the single-click string
//! is distilled into key.
//!
//! Three source configurations are covered: a basis-independent single
//! photon source, a weak coherent source with decoy states, and a coherent
//! source whose photons are heralded by a quantum memory. Rates are in bits
//! per pulse (per heralded event for the memory model) and are returned
//! unfloored, so negative values mean no key.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{binary_entropy, NumericError, Probability};

/// Error rate of a randomly assigned bit.
pub const RANDOM_ASSIGNMENT_ERROR: Probability = Probability::HALF;

/// Largest phase-error fraction fed to the entropy. At or above one half
/// the privacy-amplification cost is already total.
const PHASE_CLAMP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RateError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("intensity mu must be positive and finite, got {0}")]
    InvalidIntensity(f64),
    #[error("channel transmittance to the memory must be positive")]
    ZeroChannelTransmittance,
    #[error("single-click rate is zero; the phase-error bound is vacuous")]
    VacuousBound,
    #[error("dark counts ({0}) are not part of the analytic model")]
    DarkCountsUnsupported(f64),
    #[error("random-assignment error rate is fixed at 1/2, got {0}")]
    FixedAssignmentError(f64),
}

/// Physical parameters shared by all source models.
///
/// Fields a model does not use keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Overall transmittance, channel times detection efficiency.
    pub eta: Probability,
    /// Intrinsic detection error probability.
    pub e_d: Probability,
    /// Error rate of randomly assigned bits. Always 1/2.
    pub e_0: Probability,
    /// Mean photon number of the coherent source.
    pub mu: f64,
    /// Channel transmittance up to the quantum memory.
    pub eta_c: Probability,
    /// Readout probability of the quantum memory given a trigger.
    pub eta_m: Probability,
    /// Per-detector dark count probability. Only the simulator honours it.
    pub dark_count: Probability,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            eta: Probability::ONE,
            e_d: Probability::ZERO,
            e_0: RANDOM_ASSIGNMENT_ERROR,
            mu: 0.5,
            eta_c: Probability::saturating(0.01),
            eta_m: Probability::ONE,
            dark_count: Probability::ZERO,
        }
    }
}

impl SystemParams {
    /// Checks the invariants the closed-form model relies on.
    pub fn check_analytic(&self) -> Result<(), RateError> {
        if self.e_0 != RANDOM_ASSIGNMENT_ERROR {
            return Err(RateError::FixedAssignmentError(self.e_0.value()));
        }
        if self.dark_count.value() != 0.0 {
            return Err(RateError::DarkCountsUnsupported(self.dark_count.value()));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(RateError::InvalidIntensity(self.mu));
        }
        Ok(())
    }
}

/// The three simulated source configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SourceModel {
    SinglePhoton {
        eta: Probability,
        e_d: Probability,
    },
    #[serde(rename = "coherent")]
    CoherentDecoy {
        mu: f64,
        eta: Probability,
        e_d: Probability,
    },
    #[serde(rename = "coherent-memory")]
    CoherentDecoyMemory {
        mu: f64,
        eta_c: Probability,
        eta_m: Probability,
        e_d: Probability,
    },
}

impl SourceModel {
    pub fn single_photon(eta: f64, e_d: f64) -> Result<Self, RateError> {
        Ok(SourceModel::SinglePhoton {
            eta: Probability::new(eta)?,
            e_d: Probability::new(e_d)?,
        })
    }

    pub fn coherent(mu: f64, eta: f64, e_d: f64) -> Result<Self, RateError> {
        check_intensity(mu)?;
        Ok(SourceModel::CoherentDecoy {
            mu,
            eta: Probability::new(eta)?,
            e_d: Probability::new(e_d)?,
        })
    }

    pub fn coherent_memory(mu: f64, eta_c: f64, eta_m: f64, e_d: f64) -> Result<Self, RateError> {
        check_intensity(mu)?;
        let eta_c = Probability::new(eta_c)?;
        if eta_c.value() == 0.0 {
            return Err(RateError::ZeroChannelTransmittance);
        }
        Ok(SourceModel::CoherentDecoyMemory {
            mu,
            eta_c,
            eta_m: Probability::new(eta_m)?,
            e_d: Probability::new(e_d)?,
        })
    }

    /// Short name used in CLI flags and output files.
    pub fn tag(&self) -> &'static str {
        match self {
            SourceModel::SinglePhoton { .. } => "single-photon",
            SourceModel::CoherentDecoy { .. } => "coherent",
            SourceModel::CoherentDecoyMemory { .. } => "coherent-memory",
        }
    }

    pub fn e_d(&self) -> Probability {
        match *self {
            SourceModel::SinglePhoton { e_d, .. }
            | SourceModel::CoherentDecoy { e_d, .. }
            | SourceModel::CoherentDecoyMemory { e_d, .. } => e_d,
        }
    }

    /// Expands the model into the full parameter set.
    pub fn params(&self) -> SystemParams {
        let base = SystemParams::default();
        match *self {
            SourceModel::SinglePhoton { eta, e_d } => SystemParams { eta, e_d, ..base },
            SourceModel::CoherentDecoy { mu, eta, e_d } => SystemParams {
                mu,
                eta,
                e_d,
                ..base
            },
            SourceModel::CoherentDecoyMemory {
                mu,
                eta_c,
                eta_m,
                e_d,
            } => SystemParams {
                mu,
                eta_c,
                eta_m,
                e_d,
                ..base
            },
        }
    }
}

fn check_intensity(mu: f64) -> Result<(), RateError> {
    if mu.is_finite() && mu > 0.0 {
        Ok(())
    } else {
        Err(RateError::InvalidIntensity(mu))
    }
}

/// Observed single-click rate `q_s` and the error rate `e_s` among single clicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub q_s: Probability,
    pub e_s: Probability,
}

impl DetectionStats {
    pub fn new(q_s: f64, e_s: f64) -> Result<Self, NumericError> {
        Ok(DetectionStats {
            q_s: Probability::new(q_s)?,
            e_s: Probability::new(e_s)?,
        })
    }
}

/// Single-photon quantities entering the coherent-source rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePhotonTerms {
    /// Fraction of pulses carrying exactly one photon.
    pub p_1: Probability,
    /// Single-click yield of single-photon pulses.
    pub y_1: Probability,
    /// Error rate of single-photon pulses, random assignments included.
    pub delta_1: Probability,
}

/// A key rate with the terms it is assembled from.
///
/// `rate == signal - ec_cost - pa_cost` for every model. For the single
/// photon model `signal` is `Q_s`; for coherent sources it is `P_1 Y_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateBreakdown {
    pub rate: f64,
    /// Overall bit error rate after random assignment.
    pub delta: Probability,
    /// Unclamped phase-error bound; `None` when the bound is vacuous.
    pub phase_bound: Option<f64>,
    pub signal: f64,
    /// Error-correction cost.
    pub ec_cost: f64,
    /// Privacy-amplification cost.
    pub pa_cost: f64,
    pub p_1: Option<Probability>,
    pub y_1: Option<Probability>,
    pub delta_1: Option<Probability>,
}

impl KeyRateBreakdown {
    /// The rate actually extractable, `max(rate, 0)`.
    pub fn operational_rate(&self) -> f64 {
        self.rate.max(0.0)
    }

    pub fn recombined(&self) -> f64 {
        self.signal - self.ec_cost - self.pa_cost
    }
}

/// Overall error rate when every non-single-click is randomly assigned:
/// `E_s Q_s + e_0 (1 - Q_s)`.
pub fn qber(stats: DetectionStats, e_0: Probability) -> Probability {
    let q = stats.q_s.value();
    Probability::saturating(stats.e_s.value() * q + e_0.value() * (1.0 - q))
}

/// Basis-independent rate with no click information, `1 - 2 H2(delta)`.
pub fn rate_basis_independent_baseline(delta: Probability) -> f64 {
    let clamped = Probability::saturating(delta.value().min(PHASE_CLAMP));
    1.0 - 2.0 * binary_entropy(clamped)
}

/// Upper bound `delta / Q_s` on the phase error rate of the single-click
/// string, clamped to 1/2.
pub fn phase_error_single_bound(delta: Probability, q_s: Probability) -> Result<f64, RateError> {
    if q_s.value() <= 0.0 {
        return Err(RateError::VacuousBound);
    }
    Ok((delta.value() / q_s.value()).min(PHASE_CLAMP))
}

/// Key rate distilled from the single-click string,
/// `Q_s [1 - H2(E_s) - H2(delta / Q_s)]`.
pub fn key_rate_single_click(stats: DetectionStats, e_0: Probability) -> KeyRateBreakdown {
    let delta = qber(stats, e_0);
    let q = stats.q_s.value();
    let Ok(bound) = phase_error_single_bound(delta, stats.q_s) else {
        return KeyRateBreakdown {
            rate: 0.0,
            delta,
            phase_bound: None,
            signal: 0.0,
            ec_cost: 0.0,
            pa_cost: 0.0,
            p_1: None,
            y_1: None,
            delta_1: None,
        };
    };
    let signal = q;
    let ec_cost = q * binary_entropy(stats.e_s);
    let pa_cost = q * binary_entropy(Probability::saturating(bound));
    KeyRateBreakdown {
        rate: signal - ec_cost - pa_cost,
        delta,
        phase_bound: Some(delta.value() / q),
        signal,
        ec_cost,
        pa_cost,
        p_1: None,
        y_1: None,
        delta_1: None,
    }
}

/// Single photon source: `Q_s = eta`, `E_s = e_d`.
pub fn single_photon_stats(params: &SystemParams) -> Result<DetectionStats, RateError> {
    params.check_analytic()?;
    Ok(DetectionStats {
        q_s: params.eta,
        e_s: params.e_d,
    })
}

fn delta_with_assignment(e_d: Probability, yield_: Probability, e_0: Probability) -> Probability {
    let y = yield_.value();
    Probability::saturating(e_d.value() * y + e_0.value() * (1.0 - y))
}

/// Coherent source with decoy states over a known channel, double clicks
/// neglected: `Q_s = 1 - exp(-eta mu)`, `P_1 = mu exp(-mu)`, `Y_1 = eta`.
pub fn coherent_stats(
    params: &SystemParams,
) -> Result<(DetectionStats, SinglePhotonTerms), RateError> {
    params.check_analytic()?;
    check_intensity(params.mu)?;
    let mu = params.mu;
    let eta = params.eta;
    let q_s = Probability::saturating(-(-eta.value() * mu).exp_m1());
    let p_1 = Probability::saturating(mu * (-mu).exp());
    let terms = SinglePhotonTerms {
        p_1,
        y_1: eta,
        delta_1: delta_with_assignment(params.e_d, eta, params.e_0),
    };
    Ok((
        DetectionStats {
            q_s,
            e_s: params.e_d,
        },
        terms,
    ))
}

/// Coherent source heralded by a quantum memory. Every quantity is
/// conditioned on the memory trigger:
/// `P_1 = eta_c mu exp(-mu) / (1 - exp(-eta_c mu))`, `Q_s = Y_1 = eta_M`.
pub fn coherent_memory_stats(
    params: &SystemParams,
) -> Result<(DetectionStats, SinglePhotonTerms), RateError> {
    params.check_analytic()?;
    check_intensity(params.mu)?;
    let eta_c = params.eta_c.value();
    if eta_c <= 0.0 {
        return Err(RateError::ZeroChannelTransmittance);
    }
    let mu = params.mu;
    let trigger = -(-eta_c * mu).exp_m1();
    let p_1 = Probability::saturating(eta_c * mu * (-mu).exp() / trigger);
    let terms = SinglePhotonTerms {
        p_1,
        y_1: params.eta_m,
        delta_1: delta_with_assignment(params.e_d, params.eta_m, params.e_0),
    };
    Ok((
        DetectionStats {
            q_s: params.eta_m,
            e_s: params.e_d,
        },
        terms,
    ))
}

/// Coherent-source rate `-Q_s H2(E_s) + P_1 Y_1 [1 - H2(delta_1 / Y_1)]`.
///
/// With `Y_1 = 0` only the error-correction cost remains.
pub fn key_rate_coherent(stats: DetectionStats, terms: SinglePhotonTerms) -> KeyRateBreakdown {
    let SinglePhotonTerms { p_1, y_1, delta_1 } = terms;
    let ec_cost = stats.q_s.value() * binary_entropy(stats.e_s);
    let (signal, pa_cost, phase_bound) = if y_1.value() > 0.0 {
        let ratio = delta_1.value() / y_1.value();
        let signal = p_1.value() * y_1.value();
        let pa = signal * binary_entropy(Probability::saturating(ratio.min(PHASE_CLAMP)));
        (signal, pa, Some(ratio))
    } else {
        (0.0, 0.0, None)
    };
    KeyRateBreakdown {
        rate: signal - ec_cost - pa_cost,
        delta: qber(stats, RANDOM_ASSIGNMENT_ERROR),
        phase_bound,
        signal,
        ec_cost,
        pa_cost,
        p_1: Some(p_1),
        y_1: Some(y_1),
        delta_1: Some(delta_1),
    }
}

/// Analytic detection statistics a model predicts.
pub fn predicted_stats(model: &SourceModel) -> Result<DetectionStats, RateError> {
    let params = model.params();
    match model {
        SourceModel::SinglePhoton { .. } => single_photon_stats(&params),
        SourceModel::CoherentDecoy { .. } => coherent_stats(&params).map(|(s, _)| s),
        SourceModel::CoherentDecoyMemory { .. } => coherent_memory_stats(&params).map(|(s, _)| s),
    }
}

/// Key rate of a source model.
pub fn key_rate(model: &SourceModel) -> Result<KeyRateBreakdown, RateError> {
    let params = model.params();
    match model {
        SourceModel::SinglePhoton { .. } => {
            let stats = single_photon_stats(&params)?;
            Ok(key_rate_single_click(stats, params.e_0))
        }
        SourceModel::CoherentDecoy { .. } => {
            let (stats, terms) = coherent_stats(&params)?;
            Ok(key_rate_coherent(stats, terms))
        }
        SourceModel::CoherentDecoyMemory { .. } => {
            let (stats, terms) = coherent_memory_stats(&params)?;
            Ok(key_rate_coherent(stats, terms))
        }
    }
}
