//! Command options, merged from flags and an optional JSON config file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use lfqkd::numerics::DEFAULT_TOLERANCE;
use lfqkd::sim::{AdversaryStrategy, DEFAULT_STRONG_PULSE_PHOTONS};
use lfqkd::threshold::{CurveFamily, GridSpec};
use lfqkd::SourceModel;

use crate::Failure;

pub const DEFAULT_MU: f64 = 0.5;
pub const DEFAULT_ETA_C: f64 = 0.01;
pub const DEFAULT_N_PULSES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    SinglePhoton,
    Coherent,
    CoherentMemory,
    /// Basis-independent source behind a quantum memory (threshold and rate only).
    MemoryBasisIndependent,
    /// All four curves (threshold only).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryArg {
    None,
    TimeShift,
    StrongPulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Any flag may instead come from
/// `--config`; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Overall transmittance.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Intrinsic detection error probability.
    #[arg(long)]
    pub ed: Option<f64>,
    /// Mean photon number of the coherent source [default: 0.5].
    #[arg(long)]
    pub mu: Option<f64>,
    /// Channel transmittance to the quantum memory [default: 0.01].
    #[arg(long)]
    pub eta_c: Option<f64>,
    /// Quantum memory readout probability.
    #[arg(long)]
    pub eta_m: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pulses to simulate [default: 1000000].
    #[arg(long)]
    pub n_pulses: Option<u64>,
    #[arg(long, value_enum)]
    pub adversary: Option<AdversaryArg>,
    /// Photons per resent pulse in the strong pulse attack [default: 20].
    #[arg(long)]
    pub n_photons: Option<u32>,
    /// Smallest transmittance of the threshold grid [default: 0.5].
    #[arg(long)]
    pub eta_min: Option<f64>,
    /// Largest transmittance of the threshold grid [default: 1.0].
    #[arg(long)]
    pub eta_max: Option<f64>,
    /// Threshold grid step [default: 0.005].
    #[arg(long)]
    pub step: Option<f64>,
    /// Bisection tolerance on e_d [default: 1e-9].
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON file with any of the above fields, named as the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        Options {
            $($field: $flags.$field.or($file.$field),)*
            config: $flags.config,
        }
    };
}

impl Options {
    /// Loads `--config` if present and fills in whatever the flags left unset.
    pub fn resolve(self) -> Result<Options, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = load_config(&path)?;
        Ok(merge_fields!(
            self, file, model, eta, ed, mu, eta_c, eta_m, seed, n_pulses, adversary, n_photons,
            eta_min, eta_max, step, tol, out, format
        ))
    }

    fn require(value: Option<f64>, flag: &str) -> Result<f64, Failure> {
        value.ok_or_else(|| Failure::invalid(format!("--{flag} is required for this model")))
    }

    fn model_arg(&self) -> Result<ModelArg, Failure> {
        self.model
            .ok_or_else(|| Failure::invalid("--model is required".to_string()))
    }

    /// Source model for rate, simulate and compare.
    pub fn source_model(
        &self,
        allow_memory_basis_independent: bool,
    ) -> Result<SourceModel, Failure> {
        let ed = Self::require(self.ed, "ed")?;
        let mu = self.mu.unwrap_or(DEFAULT_MU);
        let eta_c = self.eta_c.unwrap_or(DEFAULT_ETA_C);
        let built = match self.model_arg()? {
            ModelArg::SinglePhoton => {
                SourceModel::single_photon(Self::require(self.eta, "eta")?, ed)
            }
            ModelArg::Coherent => SourceModel::coherent(mu, Self::require(self.eta, "eta")?, ed),
            ModelArg::CoherentMemory => {
                SourceModel::coherent_memory(mu, eta_c, Self::require(self.eta_m, "eta-m")?, ed)
            }
            ModelArg::MemoryBasisIndependent if allow_memory_basis_independent => {
                SourceModel::single_photon(Self::require(self.eta_m, "eta-m")?, ed)
            }
            other => {
                return Err(Failure::invalid(format!(
                    "--model {} is not supported by this command",
                    other
                        .to_possible_value()
                        .map_or_else(String::new, |v| v.get_name().to_string())
                )))
            }
        };
        built.map_err(|e| Failure::invalid(format!("invalid model parameters: {e}")))
    }

    /// Curve families for the threshold command.
    pub fn curve_families(&self) -> Result<Vec<CurveFamily>, Failure> {
        let mu = self.mu.unwrap_or(DEFAULT_MU);
        let eta_c = self.eta_c.unwrap_or(DEFAULT_ETA_C);
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Failure::invalid(format!(
                "invalid --mu {mu}: must be positive"
            )));
        }
        if !(eta_c > 0.0 && eta_c <= 1.0) {
            return Err(Failure::invalid(format!(
                "invalid --eta-c {eta_c}: must lie in (0, 1]"
            )));
        }
        let coherent = CurveFamily::Coherent { mu };
        let memory = CurveFamily::CoherentMemory { mu, eta_c };
        Ok(match self.model.unwrap_or(ModelArg::All) {
            ModelArg::SinglePhoton => vec![CurveFamily::SinglePhoton],
            ModelArg::Coherent => vec![coherent],
            ModelArg::CoherentMemory => vec![memory],
            ModelArg::MemoryBasisIndependent => vec![CurveFamily::MemoryBasisIndependent],
            ModelArg::All => vec![
                CurveFamily::SinglePhoton,
                coherent,
                memory,
                CurveFamily::MemoryBasisIndependent,
            ],
        })
    }

    pub fn grid(&self) -> Result<GridSpec, Failure> {
        let d = GridSpec::default();
        let grid = GridSpec {
            eta_min: self.eta_min.unwrap_or(d.eta_min),
            eta_max: self.eta_max.unwrap_or(d.eta_max),
            step: self.step.unwrap_or(d.step),
        };
        grid.validate()
            .map_err(|e| Failure::invalid(format!("{e}")))?;
        Ok(grid)
    }

    pub fn tolerance(&self) -> Result<f64, Failure> {
        let tol = self.tol.unwrap_or(DEFAULT_TOLERANCE);
        if tol > 0.0 && tol.is_finite() {
            Ok(tol)
        } else {
            Err(Failure::invalid(format!(
                "invalid --tol {tol}: must be positive"
            )))
        }
    }

    pub fn adversary(&self) -> Result<AdversaryStrategy, Failure> {
        Ok(match self.adversary.unwrap_or(AdversaryArg::None) {
            AdversaryArg::None => AdversaryStrategy::None,
            AdversaryArg::TimeShift => AdversaryStrategy::ExtremeTimeShift,
            AdversaryArg::StrongPulse => AdversaryStrategy::strong_pulse(
                self.n_photons.unwrap_or(DEFAULT_STRONG_PULSE_PHOTONS),
            )
            .map_err(|e| Failure::invalid(format!("invalid --n-photons: {e}")))?,
        })
    }

    pub fn n_pulses(&self) -> Result<u64, Failure> {
        match self.n_pulses.unwrap_or(DEFAULT_N_PULSES) {
            0 => Err(Failure::invalid(
                "invalid --n-pulses 0: must be positive".to_string(),
            )),
            n => Ok(n),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn load_config(path: &Path) -> Result<Options, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("invalid config {}: {e}", path.display())))
}
