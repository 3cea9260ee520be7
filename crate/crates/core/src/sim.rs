//! Monte Carlo model of a two-detector receiver under the modified
//! pre-processing.
//!
//! Each pulse is followed through a classical outcome tree: Alice picks a
//! bit and a basis, photons are lost or routed to one of Bob's two
//! threshold detectors, and the detectors report no click, a single click
//! or a double click. That click flag plays the role of the squashing
//! model's classical flag. Non-single outcomes receive a random bit and
//! form the random-assignment string; single clicks form the key string.
//!
//! Statistics are tallied separately for basis-matched (sifted) and
//! mismatched pulses. `Q_s` and `E_s` are always taken from the sifted
//! population.
//!
//! Pulses are generated in fixed-size shards. Shard `i` draws from a
//! ChaCha8 stream seeded with the batch seed and stream number `i`, so a
//! batch is reproducible from its seed regardless of how many threads
//! process the shards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Probability;
use crate::rates::{
    coherent_memory_stats, coherent_stats, key_rate, key_rate_coherent, key_rate_single_click,
    predicted_stats, DetectionStats, RateError, SourceModel, RANDOM_ASSIGNMENT_ERROR,
};

/// Pulses per RNG stream.
pub const SHARD_SIZE: u64 = 1 << 16;

/// Photon count of the strong pulse attack unless configured otherwise.
pub const DEFAULT_STRONG_PULSE_PHOTONS: u32 = 20;

/// Agreement threshold, in standard errors, used by [`compare_to_analytic`].
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SimError {
    #[error("at least one pulse is required")]
    NoPulses,
    #[error("strong pulse attack needs at least one photon")]
    EmptyStrongPulse,
    #[error("analytic comparison is only defined for honest channels")]
    AdversarialBatch,
    #[error("batch was produced by a different source model")]
    ModelMismatch,
    #[error(transparent)]
    Rate(#[from] RateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random() {
            Basis::X
        } else {
            Basis::Z
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClickOutcome {
    NoClick,
    SingleClick { bit: bool },
    DoubleClick,
}

/// Which of Bob's detectors received light during a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectorHits {
    pub zero: bool,
    pub one: bool,
}

impl DetectorHits {
    pub fn fires(&self, bit: bool) -> bool {
        if bit {
            self.one
        } else {
            self.zero
        }
    }

    fn hit(&mut self, bit: bool) {
        if bit {
            self.one = true;
        } else {
            self.zero = true;
        }
    }

    pub fn outcome(&self) -> ClickOutcome {
        match (self.zero, self.one) {
            (false, false) => ClickOutcome::NoClick,
            (true, false) => ClickOutcome::SingleClick { bit: false },
            (false, true) => ClickOutcome::SingleClick { bit: true },
            (true, true) => ClickOutcome::DoubleClick,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    None,
    /// Eve makes one random detector fully efficient and blinds the other.
    ExtremeTimeShift,
    /// Intercept in a random basis and resend `n_photons` copies of the result.
    StrongPulse {
        n_photons: u32,
    },
}

impl AdversaryStrategy {
    pub fn strong_pulse(n_photons: u32) -> Result<Self, SimError> {
        if n_photons == 0 {
            Err(SimError::EmptyStrongPulse)
        } else {
            Ok(AdversaryStrategy::StrongPulse { n_photons })
        }
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            AdversaryStrategy::None => Scenario::Honest,
            AdversaryStrategy::ExtremeTimeShift => Scenario::TimeShift,
            AdversaryStrategy::StrongPulse { .. } => Scenario::StrongPulse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Honest,
    TimeShift,
    StrongPulse,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::TimeShift => "time_shift",
            Scenario::StrongPulse => "strong_pulse",
        }
    }
}

/// Simulator knobs outside the analytic model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimOptions {
    /// Independent per-detector dark count probability per pulse.
    pub dark_count: Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub alice_bit: bool,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    pub outcome: ClickOutcome,
    /// Bit kept by Bob after pre-processing.
    pub assigned_bit: bool,
    /// Whether the bit belongs to the random-assignment string.
    pub from_random_assignment: bool,
    /// Photons in Alice's pulse (stored in the memory, for the memory model).
    pub photons_emitted: u32,
}

impl TrialRecord {
    pub fn sifted(&self) -> bool {
        self.alice_basis == self.bob_basis
    }
}

/// Outcome counts for one population of pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub n_pulses: u64,
    pub n_single: u64,
    pub n_double: u64,
    pub n_none: u64,
    /// Single clicks whose bit differs from Alice's.
    pub n_single_errors: u64,
    /// Random assignments (no-click or double click) that differ from Alice's bit.
    pub n_random_errors: u64,
    /// Double clicks whose random bit differs from Alice's.
    pub n_double_errors: u64,
    /// Pulses with exactly one emitted (or stored) photon.
    pub n_single_photon: u64,
}

impl Tally {
    pub fn record(&mut self, rec: &TrialRecord) {
        self.n_pulses += 1;
        if rec.photons_emitted == 1 {
            self.n_single_photon += 1;
        }
        let wrong = rec.assigned_bit != rec.alice_bit;
        match rec.outcome {
            ClickOutcome::NoClick => {
                self.n_none += 1;
                self.n_random_errors += wrong as u64;
            }
            ClickOutcome::SingleClick { .. } => {
                self.n_single += 1;
                self.n_single_errors += wrong as u64;
            }
            ClickOutcome::DoubleClick => {
                self.n_double += 1;
                self.n_random_errors += wrong as u64;
                self.n_double_errors += wrong as u64;
            }
        }
    }

    pub fn merge(&self, other: &Tally) -> Tally {
        Tally {
            n_pulses: self.n_pulses + other.n_pulses,
            n_single: self.n_single + other.n_single,
            n_double: self.n_double + other.n_double,
            n_none: self.n_none + other.n_none,
            n_single_errors: self.n_single_errors + other.n_single_errors,
            n_random_errors: self.n_random_errors + other.n_random_errors,
            n_double_errors: self.n_double_errors + other.n_double_errors,
            n_single_photon: self.n_single_photon + other.n_single_photon,
        }
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn single_rate(&self) -> f64 {
        Self::ratio(self.n_single, self.n_pulses)
    }

    pub fn double_rate(&self) -> f64 {
        Self::ratio(self.n_double, self.n_pulses)
    }

    pub fn none_rate(&self) -> f64 {
        Self::ratio(self.n_none, self.n_pulses)
    }

    /// Error rate over all pulses with random assignment, the empirical
    /// counterpart of `E_s Q_s + e_0 (1 - Q_s)`.
    pub fn overall_error_rate(&self) -> f64 {
        Self::ratio(self.n_single_errors + self.n_random_errors, self.n_pulses)
    }

    /// Error rate of the conventional pre-processing, where no-clicks are
    /// dropped and double clicks keep their random bit.
    pub fn conventional_error_rate(&self) -> f64 {
        Self::ratio(
            self.n_single_errors + self.n_double_errors,
            self.n_single + self.n_double,
        )
    }
}

/// Tallies of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub model: SourceModel,
    pub adversary: AdversaryStrategy,
    pub options: SimOptions,
    pub seed: u64,
    /// Pulses sent, sifted or not.
    pub n_sent: u64,
    /// Basis-matched pulses.
    pub sifted: Tally,
    /// Basis-mismatched pulses.
    pub unsifted: Tally,
}

impl TrialBatch {
    pub fn scenario(&self) -> Scenario {
        self.adversary.scenario()
    }

    pub fn n_pulses(&self) -> u64 {
        self.sifted.n_pulses
    }

    pub fn n_single(&self) -> u64 {
        self.sifted.n_single
    }

    pub fn n_double(&self) -> u64 {
        self.sifted.n_double
    }

    pub fn n_none(&self) -> u64 {
        self.sifted.n_none
    }

    pub fn n_single_errors(&self) -> u64 {
        self.sifted.n_single_errors
    }
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda >= 30.0 {
        return Poisson::new(lambda).map_or(0, |d| d.sample(rng) as u32);
    }
    // Inversion.
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Poisson conditioned on at least one event.
fn sample_zero_truncated_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut k = 1u32;
    let mut p = lambda * (-lambda).exp() / -(-lambda).exp_m1();
    let mut cdf = p;
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Photons leaving the source and photons reaching Bob's detectors. With
/// `lossless`, every transmittance after the source is replaced by 1.
fn photon_arrivals<R: Rng + ?Sized>(
    model: &SourceModel,
    lossless: bool,
    rng: &mut R,
) -> (u32, u32) {
    match *model {
        SourceModel::SinglePhoton { eta, .. } => {
            let arrived = lossless || rng.random_bool(eta.value());
            (1, arrived as u32)
        }
        SourceModel::CoherentDecoy { mu, eta, .. } => {
            let eta = if lossless { 1.0 } else { eta.value() };
            // Poisson thinning: arrivals and losses are independent.
            let arrived = sample_poisson(eta * mu, rng);
            let lost = sample_poisson((1.0 - eta) * mu, rng);
            (arrived + lost, arrived)
        }
        SourceModel::CoherentDecoyMemory {
            mu, eta_c, eta_m, ..
        } => {
            // Every simulated event is a memory trigger.
            let stored = sample_zero_truncated_poisson(eta_c.value() * mu, rng);
            let lost = sample_poisson((1.0 - eta_c.value()) * mu, rng);
            let read = lossless || rng.random_bool(eta_m.value());
            (stored + lost, read as u32)
        }
    }
}

fn route_photons<R: Rng + ?Sized>(
    arrived: u32,
    alice_bit: bool,
    matched: bool,
    e_d: Probability,
    rng: &mut R,
) -> DetectorHits {
    let mut hits = DetectorHits::default();
    for _ in 0..arrived {
        let bit = if matched {
            alice_bit ^ rng.random_bool(e_d.value())
        } else {
            rng.random()
        };
        hits.hit(bit);
    }
    hits
}

/// Extreme time-shift attack: one detector, chosen uniformly by Eve, is
/// fully efficient and the other is blind.
pub fn apply_extreme_time_shift<R: Rng + ?Sized>(hits: DetectorHits, rng: &mut R) -> ClickOutcome {
    let active: bool = rng.random();
    if hits.fires(active) {
        ClickOutcome::SingleClick { bit: active }
    } else {
        ClickOutcome::NoClick
    }
}

/// Strong pulse attack. Eve measures in a random basis and resends
/// `n_photons` copies of her result without loss. When Bob measures in
/// Eve's basis every photon lands in one detector; otherwise each photon
/// picks a detector at random.
pub fn apply_strong_pulse<R: Rng + ?Sized>(
    alice_bit: bool,
    alice_basis: Basis,
    bob_basis: Basis,
    n_photons: u32,
    rng: &mut R,
) -> ClickOutcome {
    let eve_basis = Basis::random(rng);
    let eve_bit = if eve_basis == alice_basis {
        alice_bit
    } else {
        rng.random()
    };
    if bob_basis == eve_basis {
        return ClickOutcome::SingleClick { bit: eve_bit };
    }
    // All n photons pick the same detector with probability 2^(1-n).
    let exponent = n_photons.saturating_sub(1).min(2000) as i32;
    if rng.random_bool(0.5f64.powi(exponent)) {
        ClickOutcome::SingleClick { bit: rng.random() }
    } else {
        ClickOutcome::DoubleClick
    }
}

/// Simulates a single pulse.
pub fn simulate_pulse<R: Rng + ?Sized>(
    model: &SourceModel,
    adversary: AdversaryStrategy,
    options: &SimOptions,
    rng: &mut R,
) -> TrialRecord {
    let alice_bit: bool = rng.random();
    let alice_basis = Basis::random(rng);
    let bob_basis = Basis::random(rng);
    let matched = alice_basis == bob_basis;

    let add_dark = |mut hits: DetectorHits, rng: &mut R| {
        let p = options.dark_count.value();
        if p > 0.0 {
            hits.zero |= rng.random_bool(p);
            hits.one |= rng.random_bool(p);
        }
        hits
    };

    let (photons_emitted, outcome) = match adversary {
        AdversaryStrategy::None => {
            let (emitted, arrived) = photon_arrivals(model, false, rng);
            let hits = route_photons(arrived, alice_bit, matched, model.e_d(), rng);
            (emitted, add_dark(hits, rng).outcome())
        }
        AdversaryStrategy::ExtremeTimeShift => {
            let (emitted, arrived) = photon_arrivals(model, true, rng);
            let hits = route_photons(arrived, alice_bit, matched, model.e_d(), rng);
            (emitted, apply_extreme_time_shift(add_dark(hits, rng), rng))
        }
        AdversaryStrategy::StrongPulse { n_photons } => {
            let (emitted, _) = photon_arrivals(model, true, rng);
            let outcome = apply_strong_pulse(alice_bit, alice_basis, bob_basis, n_photons, rng);
            (emitted, outcome)
        }
    };

    let (assigned_bit, from_random_assignment) = match outcome {
        ClickOutcome::SingleClick { bit } => (bit, false),
        ClickOutcome::NoClick | ClickOutcome::DoubleClick => (rng.random(), true),
    };

    TrialRecord {
        alice_bit,
        alice_basis,
        bob_basis,
        outcome,
        assigned_bit,
        from_random_assignment,
        photons_emitted,
    }
}

/// Random stream for shard `index` of a batch.
pub fn shard_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_trials(
    model: &SourceModel,
    adversary: AdversaryStrategy,
    n_pulses: u64,
    seed: u64,
) -> Result<TrialBatch, SimError> {
    run_trials_with(model, adversary, &SimOptions::default(), n_pulses, seed)
}

pub fn run_trials_with(
    model: &SourceModel,
    adversary: AdversaryStrategy,
    options: &SimOptions,
    n_pulses: u64,
    seed: u64,
) -> Result<TrialBatch, SimError> {
    if n_pulses == 0 {
        return Err(SimError::NoPulses);
    }
    if adversary == (AdversaryStrategy::StrongPulse { n_photons: 0 }) {
        return Err(SimError::EmptyStrongPulse);
    }
    let n_shards = n_pulses.div_ceil(SHARD_SIZE);
    let (sifted, unsifted) = (0..n_shards)
        .into_par_iter()
        .map(|shard| {
            let len = SHARD_SIZE.min(n_pulses - shard * SHARD_SIZE);
            let mut rng = shard_rng(seed, shard);
            let mut sifted = Tally::default();
            let mut unsifted = Tally::default();
            for _ in 0..len {
                let rec = simulate_pulse(model, adversary, options, &mut rng);
                if rec.sifted() {
                    sifted.record(&rec);
                } else {
                    unsifted.record(&rec);
                }
            }
            (sifted, unsifted)
        })
        .reduce(
            || (Tally::default(), Tally::default()),
            |a, b| (a.0.merge(&b.0), a.1.merge(&b.1)),
        );
    Ok(TrialBatch {
        model: *model,
        adversary,
        options: *options,
        seed,
        n_sent: n_pulses,
        sifted,
        unsifted,
    })
}

/// Empirical `(Q_s, E_s)` of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub stats: DetectionStats,
    /// No single clicks were observed, so `E_s` is undefined (reported as 0).
    pub degenerate: bool,
}

pub fn empirical_stats(batch: &TrialBatch) -> EmpiricalStats {
    let t = &batch.sifted;
    let q_s = Probability::saturating(t.single_rate());
    let e_s = Probability::saturating(t.n_single_errors as f64 / t.n_single.max(1) as f64);
    EmpiricalStats {
        stats: DetectionStats { q_s, e_s },
        degenerate: t.n_single == 0,
    }
}

/// JSON summary of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: Scenario,
    pub model: String,
    pub n_pulses: u64,
    pub seed: u64,
    pub n_single: u64,
    pub n_double: u64,
    pub n_none: u64,
    pub n_single_errors: u64,
    pub q_s: f64,
    pub e_s: f64,
    /// Single-click key rate evaluated on the empirical statistics.
    pub rate: f64,
}

impl BatchSummary {
    pub fn from_batch(batch: &TrialBatch) -> Self {
        let emp = empirical_stats(batch);
        let rate = key_rate_single_click(emp.stats, RANDOM_ASSIGNMENT_ERROR).rate;
        BatchSummary {
            scenario: batch.scenario(),
            model: batch.model.tag().to_string(),
            n_pulses: batch.n_pulses(),
            seed: batch.seed,
            n_single: batch.n_single(),
            n_double: batch.n_double(),
            n_none: batch.n_none(),
            n_single_errors: batch.n_single_errors(),
            q_s: emp.stats.q_s.value(),
            e_s: emp.stats.e_s.value(),
            rate,
        }
    }
}

/// Largest systematic deviations of the simulated `(Q_s, E_s)` from the
/// closed-form values, which neglect double clicks.
///
/// For the coherent source with `k >= 2` detected photons the closed form
/// counts a single click with error `e_d`, while the simulator may see a
/// double click. The gain deficit is therefore at most `P(k >= 2)`, and the
/// error-mass difference at most `e_d P(k >= 2)`, divided by a single-click
/// rate no smaller than `P(k = 1)`.
pub fn double_click_offset_bounds(model: &SourceModel) -> (f64, f64) {
    match *model {
        SourceModel::CoherentDecoy { mu, eta, e_d } => {
            let lambda = eta.value() * mu;
            let p0 = (-lambda).exp();
            let p1 = lambda * p0;
            let p_multi = (1.0 - p0 - p1).max(0.0);
            let e_bound = if p1 > 0.0 {
                e_d.value() * p_multi / p1
            } else {
                0.0
            };
            (p_multi, e_bound)
        }
        SourceModel::SinglePhoton { .. } | SourceModel::CoherentDecoyMemory { .. } => (0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatCheck {
    pub empirical: f64,
    pub expected: f64,
    pub sigma: f64,
    /// `None` when the standard error is zero but the values differ.
    pub z_score: Option<f64>,
    pub offset_bound: f64,
    pub pass: bool,
}

impl StatCheck {
    fn new(empirical: f64, expected: f64, n: u64, offset_bound: f64) -> Self {
        let sigma = if n == 0 {
            0.0
        } else {
            (expected * (1.0 - expected) / n as f64).sqrt()
        };
        let diff = empirical - expected;
        let z_score = if sigma > 0.0 {
            Some(diff / sigma)
        } else if diff == 0.0 {
            Some(0.0)
        } else {
            None
        };
        let pass = diff.abs() <= Z_THRESHOLD * sigma + offset_bound;
        StatCheck {
            empirical,
            expected,
            sigma,
            z_score,
            offset_bound,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: String,
    pub n_pulses: u64,
    pub seed: u64,
    pub q_s: StatCheck,
    pub e_s: StatCheck,
    pub rate_empirical: f64,
    pub rate_analytic: f64,
    pub rate_gap: f64,
    pub pass: bool,
}

/// Checks an honest batch against the closed-form statistics of `model`.
///
/// `Q_s` and `E_s` pass when within three binomial standard errors of the
/// prediction, widened by [`double_click_offset_bounds`].
pub fn compare_to_analytic(
    model: &SourceModel,
    batch: &TrialBatch,
) -> Result<ComparisonReport, SimError> {
    if batch.adversary != AdversaryStrategy::None {
        return Err(SimError::AdversarialBatch);
    }
    if batch.model != *model {
        return Err(SimError::ModelMismatch);
    }
    let params = model.params();
    let dark = batch.options.dark_count.value();
    if dark != 0.0 {
        return Err(RateError::DarkCountsUnsupported(dark).into());
    }
    let expected = predicted_stats(model)?;
    let emp = empirical_stats(batch);
    let (q_offset, e_offset) = double_click_offset_bounds(model);

    let q_s = StatCheck::new(
        emp.stats.q_s.value(),
        expected.q_s.value(),
        batch.n_pulses(),
        q_offset,
    );
    let e_s = StatCheck::new(
        emp.stats.e_s.value(),
        expected.e_s.value(),
        batch.n_single(),
        e_offset,
    );

    let rate_analytic = key_rate(model)?.rate;
    let rate_empirical = match model {
        SourceModel::SinglePhoton { .. } => {
            key_rate_single_click(emp.stats, RANDOM_ASSIGNMENT_ERROR).rate
        }
        SourceModel::CoherentDecoy { .. } => {
            key_rate_coherent(emp.stats, coherent_stats(&params)?.1).rate
        }
        SourceModel::CoherentDecoyMemory { .. } => {
            key_rate_coherent(emp.stats, coherent_memory_stats(&params)?.1).rate
        }
    };

    Ok(ComparisonReport {
        model: model.tag().to_string(),
        n_pulses: batch.n_pulses(),
        seed: batch.seed,
        pass: q_s.pass && e_s.pass && !emp.degenerate,
        q_s,
        e_s,
        rate_empirical,
        rate_analytic,
        rate_gap: (rate_empirical - rate_analytic).abs(),
    })
}
