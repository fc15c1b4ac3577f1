//! JSON run configuration, flag overrides and parse-time validation.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sreels_core::excitation::{randomized_positions, Pathway};
use sreels_core::{units, ElectronParams, EmitterEnsemble, LadderState};

use crate::error::CliError;

/// Demo transition wavelength (nm); with `dz = 10 nm` and `n = 1.5` it puts
/// three hybrid resonances inside `[0°, 90°]`.
pub const DEFAULT_LAMBDA0: f64 = 4.5;
pub const DEFAULT_DZ: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Coupling,
    Spectrum,
    Sweep,
    Dynamics,
    Reconstruct,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Coupling => "coupling",
            Experiment::Spectrum => "spectrum",
            Experiment::Sweep => "sweep",
            Experiment::Dynamics => "dynamics",
            Experiment::Reconstruct => "reconstruct",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Must match the subcommand when present.
    pub experiment: Option<Experiment>,
    /// Seed for every random draw of the run; required whenever one is made.
    pub seed: Option<u64>,
    pub electron: ElectronBlock,
    pub ensemble: EnsembleBlock,
    /// Ladder state met by the electron in `spectrum` (ignored when `pulse` is set).
    pub state: StateSpec,
    /// Excitation pulse preparing the emitters in `spectrum`.
    pub pulse: Option<PulseBlock>,
    pub sweep: SweepBlock,
    pub dynamics: DynamicsBlock,
    pub reconstruct: ReconstructBlock,
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            seed: None,
            electron: ElectronBlock::default(),
            ensemble: EnsembleBlock::default(),
            state: StateSpec::Ground,
            pulse: None,
            sweep: SweepBlock::default(),
            dynamics: DynamicsBlock::default(),
            reconstruct: ReconstructBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectronBlock {
    pub beta: f64,
}

impl Default for ElectronBlock {
    fn default() -> Self {
        Self { beta: 0.7 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleBlock {
    #[serde(rename = "N")]
    pub emitters: usize,
    /// Transition wavelength in nm (exclusive with `hbar_omega0`).
    pub lambda0: Option<f64>,
    /// Transition energy in eV.
    pub hbar_omega0: Option<f64>,
    /// Spacing in nm of an equally spaced chain.
    pub dz: Option<f64>,
    /// Explicit emitter positions in nm.
    pub positions: Option<Vec<f64>>,
    /// Draw positions uniformly over this many nm (needs a seed).
    pub random_span: Option<f64>,
    pub r_perp: f64,
    pub d_perp: f64,
    pub d_z: f64,
    /// Refractive index of the excitation medium.
    #[serde(rename = "n")]
    pub refr_index: f64,
    /// Uniform coupling magnitude; `null` derives couplings from geometry.
    pub g: Option<f64>,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self {
            emitters: 10,
            lambda0: None,
            hbar_omega0: None,
            dz: None,
            positions: None,
            random_span: None,
            r_perp: 10.0,
            d_perp: 0.1,
            d_z: 0.0,
            refr_index: 1.5,
            g: Some(0.5),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Ground,
    Excited,
    Fock { m: usize },
    /// Phase-matched spin-coherent state of pulse area `area` (rad).
    Pulse { area: f64 },
    Diagonal { p: Vec<f64> },
    Pure { re: Vec<f64>, im: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    pub theta_deg: f64,
    pub area: Option<f64>,
    pub tau_fs: Option<f64>,
    /// Rabi rate in rad/fs.
    pub rabi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PathwayChoice {
    ExactFull,
    LadderFast,
}

impl From<PathwayChoice> for Pathway {
    fn from(p: PathwayChoice) -> Self {
        match p {
            PathwayChoice::ExactFull => Pathway::ExactFull,
            PathwayChoice::LadderFast => Pathway::LadderFast,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub theta_step_deg: f64,
    /// Pulse durations; the pulse area is `tau_fs · rabi`.
    pub tau_fs: Vec<f64>,
    pub rabi: f64,
    pub pathway: PathwayChoice,
    /// Experimental carrier-jitter averaging with this many samples (needs a seed).
    pub jitter_samples: Option<usize>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            theta_min_deg: 0.0,
            theta_max_deg: 90.0,
            theta_step_deg: 0.25,
            tau_fs: vec![std::f64::consts::FRAC_PI_2],
            rabi: 1.0,
            pathway: PathwayChoice::ExactFull,
            jitter_samples: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Rate equations down the Dicke ladder.
    Dicke,
    /// Truncated-Wigner spin trajectories of a long sample.
    Twa,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsBlock {
    pub model: Model,
    /// Single-emitter decay rate in 1/fs.
    pub gamma: f64,
    pub trajectories: usize,
    pub t_max_fs: f64,
    pub dt_fs: f64,
    pub delays_fs: Vec<f64>,
    /// Mix the two neighbouring ladder levels instead of rounding (TWA spectra).
    pub interpolate: bool,
    /// Initial ladder state of the rate-equation model.
    pub initial: StateSpec,
    /// Initial tipping angle of each TWA spin from the excited pole (rad).
    pub trigger_angle: f64,
    /// TWA step as a fraction of `1/(NΓ)`.
    pub step_fraction: f64,
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        Self {
            model: Model::Dicke,
            gamma: sreels_core::dynamics::DEFAULT_GAMMA,
            trajectories: 100,
            t_max_fs: 20_000.0,
            dt_fs: 50.0,
            delays_fs: vec![0.0, 1000.0, 2000.0, 4000.0],
            interpolate: false,
            initial: StateSpec::Excited,
            trigger_angle: sreels_core::dynamics::DEFAULT_TRIGGER_ANGLE,
            step_fraction: sreels_core::dynamics::TWA_STEP_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructBlock {
    /// Energy-loss CSV to invert.
    pub input: Option<PathBuf>,
    pub lambda_reg: f64,
    /// Relative noise level; selects the regularisation by the discrepancy principle.
    pub noise: Option<f64>,
    /// Picks one delay out of a per-delay spectra CSV.
    pub delay_fs: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Reads a configuration file; field errors carry their JSON path.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|source| CliError::Parse { file: path.to_path_buf(), source })
}

/// Physical inputs shared by every experiment.
#[derive(Debug, Clone)]
pub struct Physics {
    pub electron: ElectronParams,
    pub ensemble: EmitterEnsemble,
    pub hbar_omega0: f64,
}

fn positive(path: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(path, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    pub fn check_experiment(&self, wanted: Experiment) -> Result<(), CliError> {
        match self.experiment {
            Some(e) if e != wanted => Err(CliError::invalid(
                "experiment",
                format!("config is for `{}` but `{}` was requested", e.name(), wanted.name()),
            )),
            _ => Ok(()),
        }
    }

    /// True when the run draws random numbers.
    pub fn is_stochastic(&self, exp: Experiment) -> bool {
        let positions = self.ensemble.random_span.is_some() && exp != Experiment::Reconstruct;
        let twa = exp == Experiment::Dynamics && self.dynamics.model == Model::Twa;
        let jitter = exp == Experiment::Sweep && self.sweep.jitter_samples.is_some_and(|s| s > 0);
        positions || twa || jitter
    }

    pub fn require_seed(&self, exp: Experiment) -> Result<Option<u64>, CliError> {
        if self.is_stochastic(exp) && self.seed.is_none() {
            return Err(CliError::invalid(
                "seed",
                format!("`{}` with these settings is stochastic; pass --seed", exp.name()),
            ));
        }
        Ok(self.seed)
    }

    pub fn physics(&self) -> Result<Physics, CliError> {
        let electron = ElectronParams::new(self.electron.beta).map_err(|e| CliError::invalid("electron.beta", e))?;
        let ens = &self.ensemble;
        if ens.emitters == 0 {
            return Err(CliError::invalid("ensemble.N", "need at least one emitter"));
        }
        if ens.emitters > sreels_core::ladder::MAX_LADDER_N {
            return Err(CliError::invalid(
                "ensemble.N",
                format!("at most {} emitters are supported", sreels_core::ladder::MAX_LADDER_N),
            ));
        }
        let lambda0 = match (ens.lambda0, ens.hbar_omega0) {
            (Some(_), Some(_)) => {
                return Err(CliError::invalid("ensemble.hbar_omega0", "give either lambda0 or hbar_omega0, not both"))
            }
            (Some(l), None) => positive("ensemble.lambda0", l)?,
            (None, Some(e)) => units::wavelength_from_energy(positive("ensemble.hbar_omega0", e)?),
            (None, None) => DEFAULT_LAMBDA0,
        };
        let given = [ens.dz.is_some(), ens.positions.is_some(), ens.random_span.is_some()];
        if given.iter().filter(|x| **x).count() > 1 {
            return Err(CliError::invalid("ensemble.positions", "give only one of dz, positions and random_span"));
        }
        let positions = if let Some(p) = &ens.positions {
            if p.len() != ens.emitters {
                return Err(CliError::invalid(
                    "ensemble.positions",
                    format!("{} positions for N = {}", p.len(), ens.emitters),
                ));
            }
            if p.iter().any(|z| !z.is_finite()) || p.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::invalid("ensemble.positions", "positions must be finite and strictly increasing"));
            }
            p.clone()
        } else if let Some(span) = ens.random_span {
            let span = positive("ensemble.random_span", span)?;
            let seed = self.seed.ok_or_else(|| CliError::invalid("seed", "random positions need --seed"))?;
            let z = randomized_positions(ens.emitters, span, seed);
            if z.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::invalid("ensemble.random_span", "drawn positions coincide; widen the span"));
            }
            z
        } else {
            let dz = positive("ensemble.dz", ens.dz.unwrap_or(DEFAULT_DZ))?;
            (0..ens.emitters).map(|i| i as f64 * dz).collect()
        };
        let r_perp = positive("ensemble.r_perp", ens.r_perp)?;
        let d_perp = finite("ensemble.d_perp", ens.d_perp)?;
        let d_z = finite("ensemble.d_z", ens.d_z)?;
        if !(ens.refr_index >= 1.0 && ens.refr_index.is_finite()) {
            return Err(CliError::invalid("ensemble.n", format!("refractive index must be >= 1, got {}", ens.refr_index)));
        }
        if let Some(g) = ens.g {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(CliError::invalid("ensemble.g", format!("coupling magnitude must be >= 0, got {g}")));
            }
        }
        let ensemble = EmitterEnsemble::from_wavelength(
            lambda0,
            positions,
            vec![r_perp; ens.emitters],
            d_perp,
            d_z,
            ens.refr_index,
        )
        .map_err(|e| CliError::invalid("ensemble", e))?;
        Ok(Physics { electron, ensemble, hbar_omega0: units::energy_from_wavelength(lambda0) })
    }
}

impl StateSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            StateSpec::Ground => "ground",
            StateSpec::Excited => "excited",
            StateSpec::Fock { .. } => "fock",
            StateSpec::Pulse { .. } => "pulse",
            StateSpec::Diagonal { .. } => "diagonal",
            StateSpec::Pure { .. } => "pure",
        }
    }

    /// Ladder state of `n` emitters; `path` names the config field in errors.
    pub fn build(&self, n: usize, path: &str) -> Result<LadderState, CliError> {
        let st = match self {
            StateSpec::Ground => LadderState::ground(n),
            StateSpec::Excited => LadderState::fully_excited(n),
            StateSpec::Fock { m } => {
                if *m > n {
                    return Err(CliError::invalid(format!("{path}.m"), format!("level {m} above N = {n}")));
                }
                LadderState::fock(n, *m)
            }
            StateSpec::Pulse { area } => {
                sreels_core::ladder::ladder_from_pulse(n, finite(&format!("{path}.area"), *area)?)
            }
            StateSpec::Diagonal { p } => {
                if p.len() != n + 1 {
                    return Err(CliError::invalid(format!("{path}.p"), format!("{} entries for N + 1 = {}", p.len(), n + 1)));
                }
                LadderState::diagonal(p.clone())
            }
            StateSpec::Pure { re, im } => {
                if re.len() != n + 1 || im.len() != n + 1 {
                    return Err(CliError::invalid(format!("{path}.re"), format!("re and im need N + 1 = {} entries", n + 1)));
                }
                LadderState::pure(re.iter().zip(im).map(|(a, b)| Complex::new(*a, *b)).collect())
            }
        };
        st.map_err(|e| CliError::invalid(path, e))
    }
}
