//! JSON run configuration with per-command defaults.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::estimation::{FitBasis, GridRule, Parity};
use crate::model::{coherent_cutoff, ElectronicAmplitudes, ModelParams, MotionalSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Run,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fig1 => "fig1",
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
            Command::Run => "run",
        }
    }
}

/// Stage selection for [`Command::Run`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Exact `σ₂₂` over the time and coupling grids.
    Simulate,
    /// Binomial records over the time and coupling grids.
    Sample,
    /// Parity fits of an external records CSV.
    Fit,
    /// Both sides of `ħΔω[σ₂₂(t) − σ₂₂(0)] = ⟨Ĥ_int,I⟩(t) − ⟨Ĥ_int,I⟩(0)`.
    Analyze,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectronicSpec {
    Ground,
    Excited,
    /// `(i|1⟩ + |2⟩)/√2`.
    Superposition,
    Amplitudes {
        gamma1: C64,
        gamma2: C64,
    },
}

impl ElectronicSpec {
    pub fn amplitudes(&self) -> crate::Result<ElectronicAmplitudes> {
        match *self {
            ElectronicSpec::Ground => Ok(ElectronicAmplitudes::ground()),
            ElectronicSpec::Excited => Ok(ElectronicAmplitudes::excited()),
            ElectronicSpec::Superposition => {
                Ok(ElectronicAmplitudes::quarter_phase_superposition())
            }
            ElectronicSpec::Amplitudes { gamma1, gamma2 } => {
                ElectronicAmplitudes::new(gamma1, gamma2)
            }
        }
    }

    /// `|γ2|²`, exact for the named states.
    pub fn excited_population(&self) -> f64 {
        match *self {
            ElectronicSpec::Ground => 0.0,
            ElectronicSpec::Excited => 1.0,
            ElectronicSpec::Superposition => 0.5,
            ElectronicSpec::Amplitudes { gamma2, .. } => gamma2.norm_sqr(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelSection>,
    pub input_state: Option<InputSection>,
    pub sampling: Option<SamplingSection>,
    pub fit: Option<FitSection>,
    pub output: Option<OutputSection>,
    pub run: Option<RunSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sideband_order: Option<u32>,
    /// Sidebands scanned by `fig4`.
    pub sideband_orders: Option<Vec<u32>>,
    pub lamb_dicke: Option<f64>,
    pub detuning: Option<f64>,
    pub base_coupling: Option<f64>,
    /// Coupling scale for `run` modes that do not scan `g`.
    pub coupling_scale: Option<f64>,
    pub laser_phase: Option<f64>,
    pub trap_position_phase: Option<f64>,
    pub trap_frequency: Option<f64>,
    /// Fixed `N_max`; chosen per input state when absent.
    pub fock_cutoff: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub electronic: Option<ElectronicSpec>,
    pub motional: Option<MotionalSpec>,
    /// Fock states scanned by `fig2`.
    pub fock_states: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub shots_per_point: Option<u64>,
    pub master_seed: Option<u64>,
    pub replicates: Option<u32>,
    pub times: Option<Vec<f64>>,
    /// Evenly spaced times `0, …, time_max` (both ends included).
    pub time_points: Option<usize>,
    pub time_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub parity: Option<Parity>,
    pub max_power: Option<u32>,
    pub offset: Option<f64>,
    pub g_points: Option<usize>,
    /// Fixed largest coupling scale; overrides the time-scaled rule.
    pub g_max: Option<f64>,
    pub g_cap: Option<f64>,
    pub phase_budget: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Samples of the fitted curve over `[0, g_max]`.
    pub curve_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Option<RunMode>,
    pub records_path: Option<PathBuf>,
}

/// Values supplied on the command line; they win over the file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<u32>,
}

/// Fully resolved settings of one command.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub command: Command,
    pub model: ModelParams,
    /// Whether `model.fock_cutoff` is chosen per input state.
    pub auto_cutoff: bool,
    pub sideband_orders: Vec<u32>,
    pub electronic: ElectronicSpec,
    pub motional: MotionalSpec,
    pub fock_states: Vec<usize>,
    pub shots_per_point: u64,
    pub master_seed: u64,
    pub replicates: u32,
    pub times: Vec<f64>,
    pub grid: GridRule,
    pub basis: FitBasis,
    pub offset: f64,
    pub curve_points: usize,
    pub mode: RunMode,
    pub records_path: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn linspace(max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![max];
    }
    (0..points)
        .map(|i| max * i as f64 / (points - 1) as f64)
        .collect()
}

impl Settings {
    pub fn defaults(command: Command) -> Self {
        let sqrt12 = MotionalSpec::Coherent(C64::new(12f64.sqrt(), 0.0));
        let (k, electronic, motional, shots, times, parity) = match command {
            Command::Fig1 | Command::Fig2 | Command::Run => (
                0,
                ElectronicSpec::Superposition,
                MotionalSpec::Fock(0),
                1000,
                vec![10.0],
                Parity::Odd,
            ),
            Command::Fig3 => (
                2,
                ElectronicSpec::Ground,
                sqrt12.clone(),
                10_000,
                vec![40.0],
                Parity::Even,
            ),
            Command::Fig4 => {
                let period = 2.0 * std::f64::consts::PI / 0.2;
                (
                    2,
                    ElectronicSpec::Ground,
                    sqrt12.clone(),
                    20_000,
                    linspace(period, 40),
                    Parity::Even,
                )
            }
        };
        let shots = if command == Command::Fig2 {
            5000
        } else {
            shots
        };
        let basis = match parity {
            Parity::Odd => FitBasis::hamiltonian_default(),
            Parity::Even => FitBasis::commutator_default(),
        };
        Self {
            command,
            model: ModelParams::trapped_ion(k),
            auto_cutoff: true,
            sideband_orders: if command == Command::Fig4 {
                vec![0, 2]
            } else {
                vec![k]
            },
            electronic,
            motional,
            fock_states: (0..=6).collect(),
            shots_per_point: shots,
            master_seed: DEFAULT_SEED,
            replicates: 1,
            times,
            grid: GridRule::default(),
            basis,
            offset: if parity == Parity::Odd { 0.5 } else { 0.0 },
            curve_points: 101,
            mode: RunMode::Simulate,
            records_path: None,
        }
    }

    /// Reads and resolves a config file; relative `records_path` entries are
    /// taken relative to the file.
    pub fn load(
        command: Command,
        path: &Path,
        overrides: Overrides,
    ) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut settings = Self::from_json_str(command, &text, overrides)?;
        if let (Some(rel), Some(dir)) = (settings.records_path.as_ref(), path.parent()) {
            if rel.is_relative() {
                settings.records_path = Some(dir.join(rel));
            }
        }
        Ok(settings)
    }

    pub fn from_json_str(
        command: Command,
        text: &str,
        overrides: Overrides,
    ) -> Result<Self, PipelineError> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| config_error(format!("config: {e}")))?;
        Self::resolve(command, file, overrides)
    }

    pub fn resolve(
        command: Command,
        file: ConfigFile,
        overrides: Overrides,
    ) -> Result<Self, PipelineError> {
        let mut s = Self::defaults(command);

        let model = file.model.unwrap_or_default();
        let explicit_orders = model.sideband_orders.is_some();
        if let Some(k) = model.sideband_order {
            s.model.sideband_order = k;
            if !explicit_orders {
                s.sideband_orders = vec![k];
            }
        }
        if let Some(orders) = model.sideband_orders {
            if command != Command::Fig4 {
                return Err(config_error(
                    "model.sideband_orders: only fig4 scans sidebands",
                ));
            }
            if orders.is_empty() {
                return Err(config_error("model.sideband_orders: must not be empty"));
            }
            s.sideband_orders = orders;
        }
        macro_rules! take {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        take!(model.lamb_dicke => s.model.lamb_dicke);
        take!(model.detuning => s.model.detuning);
        take!(model.base_coupling => s.model.base_coupling);
        take!(model.coupling_scale => s.model.coupling_scale);
        take!(model.laser_phase => s.model.laser_phase);
        take!(model.trap_position_phase => s.model.trap_position_phase);
        take!(model.trap_frequency => s.model.trap_frequency);
        if let Some(n) = model.fock_cutoff {
            s.model.fock_cutoff = n;
            s.auto_cutoff = false;
        }
        s.model
            .validate()
            .map_err(|e| config_error(format!("model: {e}")))?;

        let input = file.input_state.unwrap_or_default();
        let electronic_given = input.electronic.is_some();
        take!(input.electronic => s.electronic);
        take!(input.motional => s.motional);
        if let Some(states) = input.fock_states {
            if command != Command::Fig2 {
                return Err(config_error(
                    "input_state.fock_states: only fig2 scans Fock states",
                ));
            }
            if states.is_empty() {
                return Err(config_error("input_state.fock_states: must not be empty"));
            }
            s.fock_states = states;
        }
        let electronic = s
            .electronic
            .amplitudes()
            .map_err(|e| config_error(format!("input_state.electronic: {e}")))?;

        let sampling = file.sampling.unwrap_or_default();
        take!(sampling.shots_per_point => s.shots_per_point);
        take!(sampling.master_seed => s.master_seed);
        take!(sampling.replicates => s.replicates);
        match (sampling.times, sampling.time_points, sampling.time_max) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(config_error(
                    "sampling: give either times or time_points/time_max",
                ));
            }
            (Some(times), None, None) => s.times = times,
            (None, None, None) => {
                if command == Command::Fig4 {
                    s.times = linspace(
                        2.0 * std::f64::consts::PI / s.model.detuning.abs(),
                        s.times.len(),
                    );
                }
            }
            (None, points, max) => {
                let points = points.unwrap_or(s.times.len());
                let max = max.unwrap_or(2.0 * std::f64::consts::PI / s.model.detuning.abs());
                if points == 0 {
                    return Err(config_error("sampling.time_points: must be >= 1"));
                }
                s.times = linspace(max, points);
            }
        }
        if let Some(seed) = overrides.seed {
            s.master_seed = seed;
        }
        if let Some(r) = overrides.replicates {
            s.replicates = r;
        }
        if s.shots_per_point == 0 {
            return Err(config_error("sampling.shots_per_point: must be >= 1"));
        }
        if s.replicates == 0 {
            return Err(config_error("sampling.replicates: must be >= 1"));
        }
        if s.times.is_empty() || s.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(config_error(
                "sampling.times: need at least one finite time >= 0",
            ));
        }
        if matches!(command, Command::Fig1 | Command::Fig2 | Command::Fig3) && s.times.len() != 1 {
            return Err(config_error(format!(
                "sampling.times: {} takes a single time",
                command.name()
            )));
        }

        let fit = file.fit.unwrap_or_default();
        if command == Command::Run && fit.parity.is_none() && electronic_given {
            // Ground-state input carries no odd orders.
            if electronic.gamma2.norm_sqr() == 0.0 || electronic.gamma1.norm_sqr() == 0.0 {
                s.basis = FitBasis::commutator_default();
            }
        }
        let parity = fit.parity.unwrap_or(s.basis.parity);
        let max_power = fit.max_power.unwrap_or(match parity {
            Parity::Odd => FitBasis::hamiltonian_default().max_power,
            Parity::Even => FitBasis::commutator_default().max_power,
        });
        s.basis =
            FitBasis::new(parity, max_power).map_err(|e| config_error(format!("fit: {e}")))?;
        s.offset = fit.offset.unwrap_or(s.electronic.excited_population());
        take!(fit.g_points => s.grid.points);
        take!(fit.g_cap => s.grid.cap);
        take!(fit.phase_budget => s.grid.phase_budget);
        s.grid.fixed_max = fit.g_max;
        if s.grid.points == 0 {
            return Err(config_error("fit.g_points: must be >= 1"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(s.grid.cap)
            || !positive(s.grid.phase_budget)
            || s.grid.fixed_max.is_some_and(|g| !positive(g))
        {
            return Err(config_error(
                "fit: g_max, g_cap and phase_budget must be finite and > 0",
            ));
        }
        if !s.offset.is_finite() {
            return Err(config_error("fit.offset: must be finite"));
        }

        let output = file.output.unwrap_or_default();
        take!(output.curve_points => s.curve_points);
        if s.curve_points < 2 {
            return Err(config_error("output.curve_points: must be >= 2"));
        }

        let run = file.run.unwrap_or_default();
        if command != Command::Run && (run.mode.is_some() || run.records_path.is_some()) {
            return Err(config_error("run: section only applies to the run command"));
        }
        take!(run.mode => s.mode);
        s.records_path = run.records_path;
        if s.mode == RunMode::Fit && s.records_path.is_none() {
            return Err(config_error("run.records_path: required in fit mode"));
        }
        Ok(s)
    }

    /// Model parameters for sideband `k` and the given motional input, with
    /// the cutoff chosen from the input unless fixed by the config.
    pub fn params_for(&self, k: u32, motional: &MotionalSpec) -> ModelParams {
        let mut p = self.model.clone();
        p.sideband_order = k;
        if self.auto_cutoff {
            p.fock_cutoff = auto_cutoff(motional, k);
        }
        p
    }
}

/// Cutoff for an input state: the coherent-state tail rule, or the highest
/// occupied level plus `k + 1` so that every occupied level keeps its partner.
pub fn auto_cutoff(motional: &MotionalSpec, k: u32) -> usize {
    let k = k as usize;
    match motional {
        MotionalSpec::Coherent(alpha) => coherent_cutoff(alpha.norm()),
        MotionalSpec::Fock(n) => n + k + 1,
        MotionalSpec::NumberDistribution(p) => p.len() + k,
    }
}
