//! JSON experiment configuration.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use scbf_mppi_core::barrier::narrow_passage;
use scbf_mppi_core::complexity::{ComplexityInputs, CostScaling};
use scbf_mppi_core::{
    AlphaForm, BarrierFunction, ControlMatrix, ControlVec, CostSpec, MppiConfig, SafetyParams, SamplingMode,
    StateVec, TerminalCost, Unicycle,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub controller: ControllerConfig,
    pub cost: CostConfig,
    pub safety: SafetyConfig,
    pub complexity: ComplexityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    /// Vertical width: the passage is `sin(f·x) < y < sin(f·x) + width`.
    pub passage_width: f64,
    pub passage_frequency: f64,
    /// `(x, y, θ)`
    pub start: [f64; 3],
    pub goal: [f64; 2],
    pub vicinity_radius: f64,
    pub max_steps: usize,
    /// Process noise `σ = scale · I₃`.
    pub process_noise_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Plain,
    Scbf,
}

impl Mode {
    pub fn sampling(self) -> SamplingMode {
        match self {
            Mode::Plain => SamplingMode::Plain,
            Mode::Scbf => SamplingMode::Scbf,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Plain => "plain",
            Mode::Scbf => "scbf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "scbf" => Ok(Mode::Scbf),
            other => bail!("unknown algorithm `{other}` (expected plain or scbf)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub mode: Mode,
    pub samples: usize,
    pub horizon: usize,
    pub dt: f64,
    pub temperature: f64,
    /// Standard deviations of the nominal perturbation `(v, ω)`.
    pub nominal_sigma: [f64; 2],
    pub u_init: [f64; 2],
    pub shared_shaping: bool,
    pub likelihood_ratio: bool,
    pub seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub state_weight: f64,
    pub obstacle_penalty: f64,
    /// Diagonal of `R`.
    pub control_weight: [f64; 2],
    pub variance_ratio: f64,
    pub terminal_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaFormName {
    Variance,
    StdDev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyConfig {
    /// `1 − δ`
    pub safety_probability: f64,
    pub alpha_form: AlphaFormName,
    pub shaper_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostScalingName {
    Raw,
    Baseline,
    Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComplexityConfig {
    pub step: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Cost rescaling before `exp(−S/λ)` in the `Ê₁` estimate.
    pub cost_scaling: CostScalingName,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            passage_width: 1.0,
            passage_frequency: FRAC_PI_2,
            start: [0.0, 0.5, 0.0],
            goal: [4.0, 0.5],
            vicinity_radius: 0.15,
            max_steps: 250,
            process_noise_scale: 0.03,
        }
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Scbf,
            samples: 500,
            horizon: 20,
            dt: 0.05,
            temperature: 1.0,
            nominal_sigma: [1.5, 2.0],
            u_init: [0.0, 0.0],
            shared_shaping: false,
            likelihood_ratio: false,
            seed: 0,
            trials: 10,
        }
    }
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            state_weight: 1.0,
            obstacle_penalty: 1000.0,
            control_weight: [0.5, 0.5],
            variance_ratio: 1.0,
            terminal_weight: 0.0,
        }
    }
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self { safety_probability: 0.997, alpha_form: AlphaFormName::Variance, shaper_tolerance: 1e-8 }
    }
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        Self { step: 50, eps1: 0.05, eps2: 0.1, rho1: 0.05, rho2: 0.1, cost_scaling: CostScalingName::Range }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.environment;
        if !(env.vicinity_radius > 0.0) {
            bail!("environment.vicinity_radius must be positive");
        }
        if !(env.passage_width > 0.0) {
            bail!("environment.passage_width must be positive");
        }
        if !(env.process_noise_scale >= 0.0) {
            bail!("environment.process_noise_scale must be nonnegative");
        }
        if self.controller.trials == 0 {
            bail!("controller.trials must be at least 1");
        }
        let start = self.start_state();
        if !scbf_mppi_core::barrier::is_safe(&start, &self.barriers()) {
            bail!("environment.start must lie inside the passage");
        }
        self.mppi_config(self.controller.mode, self.controller.samples, self.controller.seed)?;
        self.cost_spec().validate()?;
        self.complexity_inputs().validate()?;
        if self.complexity.step == 0 {
            bail!("complexity.step must be at least 1");
        }
        Ok(())
    }

    pub fn model(&self) -> Unicycle {
        Unicycle { sigma_scale: self.environment.process_noise_scale }
    }

    pub fn barriers(&self) -> Vec<BarrierFunction> {
        narrow_passage(self.environment.passage_width, self.environment.passage_frequency, 3).to_vec()
    }

    pub fn start_state(&self) -> StateVec {
        StateVec::new(&self.environment.start)
    }

    pub fn safety_params(&self) -> Result<SafetyParams> {
        let p = self.safety.safety_probability;
        if !(p > 0.0 && p < 1.0) {
            bail!("safety.safety_probability must lie in (0, 1)");
        }
        let form = match self.safety.alpha_form {
            AlphaFormName::Variance => AlphaForm::Variance,
            AlphaFormName::StdDev => AlphaForm::StdDev,
        };
        Ok(SafetyParams::from_delta(1.0 - p, form)?)
    }

    pub fn cost_spec(&self) -> CostSpec {
        let c = &self.cost;
        CostSpec {
            goal: self.environment.goal,
            state_weight: c.state_weight,
            obstacle_penalty: c.obstacle_penalty,
            control_weight: ControlMatrix::diagonal(&c.control_weight),
            variance_ratio: c.variance_ratio,
            terminal: if c.terminal_weight > 0.0 {
                TerminalCost::GoalDistance { weight: c.terminal_weight }
            } else {
                TerminalCost::Zero
            },
        }
    }

    pub fn mppi_config(&self, mode: Mode, samples: usize, seed: u64) -> Result<MppiConfig> {
        let c = &self.controller;
        let config = MppiConfig {
            samples,
            horizon: c.horizon,
            dt: c.dt,
            temperature: c.temperature,
            nominal_sigma: ControlVec::new(&c.nominal_sigma),
            mode: mode.sampling(),
            seed,
            safety: self.safety_params()?,
            shaper_tolerance: self.safety.shaper_tolerance,
            shared_shaping: c.shared_shaping,
            likelihood_ratio: c.likelihood_ratio,
            u_init: ControlVec::new(&c.u_init),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn complexity_inputs(&self) -> ComplexityInputs {
        let k = &self.complexity;
        ComplexityInputs { eps1: k.eps1, eps2: k.eps2, rho1: k.rho1, rho2: k.rho2, temperature: self.controller.temperature }
    }

    pub fn cost_scaling(&self) -> CostScaling {
        match self.complexity.cost_scaling {
            CostScalingName::Raw => CostScaling::Raw,
            CostScalingName::Baseline => CostScaling::Baseline,
            CostScalingName::Range => CostScaling::Range,
        }
    }
}
