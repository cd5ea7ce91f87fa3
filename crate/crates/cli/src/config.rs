//! Versioned JSON experiment configuration.
//!
//! Unknown keys are rejected everywhere. [`ExperimentConfig::resolve`] fills
//! every default, so the echoed `config.resolved.json` re-parses to the same
//! value and re-serializes to the same bytes.

use std::path::{Path, PathBuf};

use landau_core::dispersion::PenroseOptions;
use landau_core::equilibria::EquilibriumSpec;
use landau_core::gevrey::{GevreyParams, SchurOptions, DEFAULT_NOISE_FLOOR};
use landau_core::interaction::InteractionKernel;
use landau_core::linear::PhaseSpaceGrid;
use landau_core::nonlinear::{EchoParams, Envelope, ModeRecipe, Recording, SimSetup};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Experiments known to `run`, with one-line descriptions.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("transport", "free-transport density of spectral packets (Orr focusing) and the kinetic transport estimate"),
    ("linear", "linearized Vlasov-Poisson density by the Volterra solver, with fitted rates and dispersion roots"),
    ("simulate", "nonlinear split-step Vlasov-Poisson run with conservation, linear comparison and bootstrap monitors"),
    ("echo", "plasma echo: driver + seed run, burst detection and amplitude sweep"),
    ("penrose", "Penrose stability margin per mode, with an optional two-stream separation sweep"),
    ("diagnose", "Gevrey lemma suite: triangle inequalities, product-rule constant and Schur kernel sums"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: String,
    #[serde(default = "default_equilibrium")]
    pub equilibrium: EquilibriumSpec,
    #[serde(default)]
    pub interaction: InteractionKernel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<PhaseSpaceGrid>,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub gevrey: GevreyParams,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub filter: bool,
    #[serde(default = "default_boundary_limit")]
    pub boundary_limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo: Option<EchoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penrose: Option<PenroseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<DiagnoseConfig>,
}

fn default_equilibrium() -> EquilibriumSpec {
    EquilibriumSpec::maxwellian(1.0, 1.0)
}

fn default_boundary_limit() -> f64 {
    1e-8
}

/// Initial perturbation: cosine modes, or a checkpoint to resume from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub modes: Vec<ModeRecipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Relative paths resolve against the working directory.
    pub dir: Option<PathBuf>,
    pub density_every: usize,
    pub diagnostics_every: usize,
    pub snapshot_every: usize,
    /// Write `checkpoint.bin` at the end of a simulation.
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        let r = Recording::default();
        Self {
            dir: None,
            density_every: r.density_every,
            diagnostics_every: r.diagnostics_every,
            snapshot_every: r.snapshot_every,
            checkpoint: false,
        }
    }
}

impl OutputConfig {
    pub fn recording(&self) -> Recording {
        Recording {
            density_every: self.density_every,
            diagnostics_every: self.diagnostics_every,
            snapshot_every: self.snapshot_every,
        }
    }
}

/// Spectral packet `a·shape(η - η₀)` on mode `k`, mirrored onto `-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub k: i64,
    pub amplitude: f64,
    #[serde(default)]
    pub eta0: f64,
    #[serde(default)]
    pub shape: PacketShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PacketShape {
    /// `e^{-rate|η|}`.
    Exponential { rate: f64 },
    /// `e^{-η²/2w²}`.
    Gaussian { width: f64 },
}

impl Default for PacketShape {
    fn default() -> Self {
        PacketShape::Exponential { rate: 1.0 }
    }
}

impl PacketShape {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PacketShape::Exponential { rate } => (-rate * x.abs()).exp(),
            PacketShape::Gaussian { width } => (-0.5 * (x / width).powi(2)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportConfig {
    /// Packets; when empty the cosine modes of `initial` are used.
    #[serde(default)]
    pub packets: Vec<Packet>,
    /// Modes whose density is recorded.
    #[serde(default = "first_mode")]
    pub modes: Vec<i64>,
    /// Evaluate the kinetic free-transport estimate with the Gevrey weights.
    #[serde(default = "yes")]
    pub estimate: bool,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            packets: Vec::new(),
            modes: first_mode(),
            estimate: true,
        }
    }
}

fn first_mode() -> Vec<i64> {
    vec![1]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootGuess {
    pub k: i64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    /// Positive modes to evolve; empty evolves every lattice mode.
    #[serde(default)]
    pub modes: Vec<i64>,
    /// Starting points for the dispersion-root search; missing modes use the Bohm–Gross frequency.
    #[serde(default)]
    pub root_guesses: Vec<RootGuess>,
    /// Fits start at this time.
    #[serde(default)]
    pub fit_t_min: f64,
    /// Checkpoints of the scattering integral (0 skips it).
    #[serde(default)]
    pub scattering_checkpoints: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub multiple: f64,
    pub noise_floor: f64,
    /// Defaults to the largest recipe amplitude.
    pub epsilon: Option<f64>,
    /// Profile snapshots per run when `output.snapshot_every` is zero.
    pub snapshots: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            multiple: 10.0,
            noise_floor: DEFAULT_NOISE_FLOOR,
            epsilon: None,
            snapshots: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Run the linear solver on the same data and report the relative ‖E‖ gap.
    #[serde(default)]
    pub compare_linear: bool,
    /// ‖E‖ below which the comparison is skipped.
    #[serde(default = "comparison_floor")]
    pub comparison_floor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
}

fn comparison_floor() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoConfig {
    pub eps_drv: f64,
    pub eps_seed: f64,
    #[serde(default = "one_i64")]
    pub k_seed: i64,
    /// Defaults to `k_seed + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_drv: Option<i64>,
    pub eta0: f64,
    #[serde(default = "one")]
    pub driver_width: f64,
    /// Extra driver amplitudes for the linearity sweep (the base run is always included).
    #[serde(default)]
    pub sweep: Vec<f64>,
    /// Toy constant for the echo-chain prediction.
    #[serde(default = "one")]
    pub chain_constant: f64,
}

fn one() -> f64 {
    1.0
}

fn one_i64() -> i64 {
    1
}

impl EchoConfig {
    pub fn params(&self, eps_drv: f64) -> EchoParams {
        EchoParams {
            eps_drv,
            eps_seed: self.eps_seed,
            k_seed: self.k_seed,
            k_drv: self.k_drv,
            eta0: self.eta0,
            driver_width: self.driver_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenroseConfig {
    #[serde(default = "default_penrose_modes")]
    pub modes: Vec<Vec<f64>>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_n_omega")]
    pub n_omega: usize,
    #[serde(default = "yes")]
    pub check_refinement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SeparationSweep>,
}

impl Default for PenroseConfig {
    fn default() -> Self {
        Self {
            modes: default_penrose_modes(),
            delta: 0.0,
            omega_max: default_omega_max(),
            n_omega: default_n_omega(),
            check_refinement: true,
            sweep: None,
        }
    }
}

impl PenroseConfig {
    pub fn options(&self) -> PenroseOptions {
        PenroseOptions {
            delta: self.delta,
            omega_max: self.omega_max,
            n_omega: self.n_omega,
            check_refinement: self.check_refinement,
        }
    }
}

fn default_penrose_modes() -> Vec<Vec<f64>> {
    vec![vec![1.0], vec![2.0], vec![3.0]]
}

fn default_omega_max() -> f64 {
    PenroseOptions::default().omega_max
}

fn default_n_omega() -> usize {
    PenroseOptions::default().n_omega
}

/// Symmetric two-stream family `n/2·M(±u/2, T)`, scanned over the separation `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationSweep {
    pub density: f64,
    pub temperature: f64,
    pub separations: Vec<f64>,
    #[serde(default = "threshold_tolerance")]
    pub threshold_tolerance: f64,
}

fn threshold_tolerance() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default = "triangle_samples")]
    pub triangle_samples: usize,
    #[serde(default = "triangle_k")]
    pub triangle_k: f64,
    #[serde(default = "product_trials")]
    pub product_trials: usize,
    #[serde(default = "product_band")]
    pub product_band: usize,
    #[serde(default = "product_lambda")]
    pub product_lambda: f64,
    #[serde(default)]
    pub schur: SchurOptions,
    /// Extra regularity indices for the Schur scan.
    #[serde(default = "schur_compare")]
    pub schur_compare: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            triangle_samples: triangle_samples(),
            triangle_k: triangle_k(),
            product_trials: product_trials(),
            product_band: product_band(),
            product_lambda: product_lambda(),
            schur: SchurOptions::default(),
            schur_compare: schur_compare(),
            seed: 0,
        }
    }
}

fn triangle_samples() -> usize {
    1_000_000
}

fn triangle_k() -> f64 {
    2.0
}

fn product_trials() -> usize {
    1000
}

fn product_band() -> usize {
    6
}

fn product_lambda() -> f64 {
    1.0
}

fn schur_compare() -> Vec<f64> {
    vec![0.2]
}

/// Field-by-field validation failures, or a parse error.
#[derive(Debug)]
pub struct ConfigError(pub Vec<String>);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![format!("{}: {e}", path.display())]))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(vec![e.to_string()]))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Fills the experiment's section with defaults and validates everything.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let mut errs = Vec::new();
        if self.version != SCHEMA_VERSION {
            errs.push(format!("version: expected {SCHEMA_VERSION}, found {}", self.version));
        }
        if !EXPERIMENTS.iter().any(|(n, _)| *n == self.experiment) {
            let names: Vec<&str> = EXPERIMENTS.iter().map(|(n, _)| *n).collect();
            return Err(ConfigError(vec![format!(
                "experiment: unknown experiment `{}` (known: {})",
                self.experiment,
                names.join(", ")
            )]));
        }
        let needs_grid = matches!(self.experiment.as_str(), "transport" | "linear" | "simulate" | "echo");
        match self.experiment.as_str() {
            "transport" => {
                self.transport.get_or_insert_with(TransportConfig::default);
            }
            "linear" => {
                self.linear.get_or_insert_with(LinearConfig::default);
            }
            "simulate" => {
                self.simulate.get_or_insert_with(SimulateConfig::default);
            }
            "echo" => {
                if self.echo.is_none() {
                    errs.push("echo: required for experiment `echo`".into());
                }
            }
            "penrose" => {
                self.penrose.get_or_insert_with(PenroseConfig::default);
            }
            "diagnose" => {
                self.diagnose.get_or_insert_with(DiagnoseConfig::default);
            }
            _ => unreachable!(),
        }
        if let Err(e) = self.equilibrium.validate() {
            errs.push(format!("equilibrium: {e}"));
        }
        if let Err(e) = self.interaction.validate() {
            errs.push(format!("interaction: {e}"));
        }
        if let Err(e) = self.gevrey.validate() {
            errs.push(format!("gevrey: {e}"));
        }
        if !(self.boundary_limit > 0.0) {
            errs.push("boundary_limit: must be positive".into());
        }
        if self.output.density_every == 0 {
            errs.push("output.density_every: must be at least 1".into());
        }
        match (&self.grid, needs_grid) {
            (None, true) => errs.push(format!("grid: required for experiment `{}`", self.experiment)),
            (Some(g), _) => {
                if let Err(e) = g.validate() {
                    errs.push(format!("grid: {e}"));
                } else if g.d != self.equilibrium.dim {
                    errs.push(format!("grid.d: {} differs from equilibrium.dim {}", g.d, self.equilibrium.dim));
                }
                self.check_recipes(g, &mut errs);
            }
            _ => {}
        }
        if self.initial.checkpoint.is_some() && !self.initial.modes.is_empty() {
            errs.push("initial: give either modes or checkpoint, not both".into());
        }
        if self.initial.checkpoint.is_some() && self.experiment != "simulate" {
            errs.push("initial.checkpoint: only the simulate experiment resumes from checkpoints".into());
        }
        if let (Some(g), Some(e)) = (&self.grid, &self.echo) {
            let p = &e.params(e.eps_drv);
            let kd = p.driver_mode();
            if p.k_seed == 0 || kd == 0 || p.k_seed == kd {
                errs.push("echo.k_seed / echo.k_drv: must be distinct and non-zero".into());
            } else if !(p.eta0 > 0.0) || p.eta0 / (p.k_seed.unsigned_abs() as f64) >= g.t_final {
                errs.push("echo.eta0: need 0 < eta0 / k_seed < grid.t_final".into());
            } else if p.eta0 >= g.d_eta() * (g.n_v / 2) as f64 {
                errs.push(format!("echo.eta0: outside the η lattice (|η| < {})", g.d_eta() * (g.n_v / 2) as f64));
            }
            if !(p.driver_width > 0.0) {
                errs.push("echo.driver_width: must be positive".into());
            }
            if e.sweep.iter().any(|x| !x.is_finite()) {
                errs.push("echo.sweep: amplitudes must be finite".into());
            }
        }
        if let Some(t) = &self.transport {
            for (i, p) in t.packets.iter().enumerate() {
                let bad = match p.shape {
                    PacketShape::Exponential { rate } => !(rate > 0.0),
                    PacketShape::Gaussian { width } => !(width > 0.0),
                };
                if bad {
                    errs.push(format!("transport.packets[{i}].shape: rate/width must be positive"));
                }
                if let Some(g) = &self.grid {
                    if p.k == 0 || p.k.unsigned_abs() as usize >= g.n_x / 2 {
                        errs.push(format!("transport.packets[{i}].k: {} is zero or outside the lattice", p.k));
                    }
                }
            }
            if self.grid.as_ref().is_some_and(|g| g.d != 1) {
                errs.push("grid.d: transport works in d = 1".into());
            }
        }
        if let Some(p) = &self.penrose {
            if p.modes.is_empty() || p.modes.iter().any(|k| k.len() != self.equilibrium.dim || k.iter().all(|x| *x == 0.0)) {
                errs.push("penrose.modes: need non-zero modes with equilibrium.dim components".into());
            }
            if let Some(s) = &p.sweep {
                if s.separations.len() < 2 || !(s.density > 0.0 && s.temperature > 0.0) {
                    errs.push("penrose.sweep: need density, temperature > 0 and at least two separations".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError(errs))
        }
    }

    fn check_recipes(&self, g: &PhaseSpaceGrid, errs: &mut Vec<String>) {
        for (i, r) in self.initial.modes.iter().enumerate() {
            if r.k.len() != g.d {
                errs.push(format!("initial.modes[{i}].k: needs {} components", g.d));
            } else if r.k.iter().any(|k| k.unsigned_abs() as usize >= g.n_x / 2) || r.k.iter().all(|&k| k == 0) {
                errs.push(format!("initial.modes[{i}].k: {:?} is zero or outside the lattice", r.k));
            }
            if !r.amplitude.is_finite() {
                errs.push(format!("initial.modes[{i}].amplitude: must be finite"));
            }
            if let Envelope::Gaussian { width, .. } = r.envelope {
                if !(width > 0.0) {
                    errs.push(format!("initial.modes[{i}].envelope.width: must be positive"));
                }
            }
        }
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        self.grid.as_ref().expect("grid validated")
    }

    pub fn sim_setup(&self) -> SimSetup {
        SimSetup {
            grid: self.grid().clone(),
            equilibrium: self.equilibrium.clone(),
            interaction: self.interaction.clone(),
            filter: self.filter,
            boundary_limit: self.boundary_limit,
        }
    }
}
