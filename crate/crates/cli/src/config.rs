//! Experiment configuration: one TOML file drives the whole pipeline.
//! Every field has a sensible default, so a partial (or absent) file works;
//! validation collects every problem into a single aggregated error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hvacopt_core::plant::{Adjacency, PlantConfig};
use hvacopt_core::rnn::TrainConfig;
use hvacopt_core::schedule::{ScheduleProfile, SECONDS_PER_DAY};
use hvacopt_core::schema::Bounds;

use crate::error::{PipelineError, PipelineResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub data: DataSection,
    pub rnn: RnnSection,
    pub opt: OptSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub n_zones: usize,
    pub capacitance: Vec<f64>,
    pub r_outdoor: Vec<f64>,
    /// Zone adjacency edges (a, b, resistance °C/W).
    pub adjacency: Vec<AdjacencyEdge>,
    pub hvac_gain: f64,
    pub hvac_power_limit: f64,
    pub power_curve_exponent: f64,
    pub power_scale: f64,
    pub occupancy_heat: f64,
    pub occupant_power: f64,
    pub temp_noise_std: f64,
    pub power_noise_std: f64,
    pub dt_s: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdjacencyEdge {
    pub a: usize,
    pub b: usize,
    pub r: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        let cfg = PlantConfig::default_four_zone();
        PlantSection {
            n_zones: cfg.n_zones,
            capacitance: cfg.capacitance.clone(),
            r_outdoor: cfg.r_outdoor.clone(),
            adjacency: cfg
                .adjacency
                .edges()
                .iter()
                .map(|&(a, b, r)| AdjacencyEdge { a, b, r })
                .collect(),
            hvac_gain: cfg.hvac_gain,
            hvac_power_limit: cfg.hvac_power_limit,
            power_curve_exponent: cfg.power_curve_exponent,
            power_scale: cfg.power_scale,
            occupancy_heat: cfg.occupancy_heat,
            occupant_power: cfg.occupant_power,
            temp_noise_std: cfg.temp_noise_std,
            power_noise_std: cfg.power_noise_std,
            dt_s: cfg.dt_s,
        }
    }
}

impl PlantSection {
    pub fn to_core(&self) -> PipelineResult<PlantConfig> {
        let edges: Vec<(usize, usize, f64)> =
            self.adjacency.iter().map(|e| (e.a, e.b, e.r)).collect();
        let adjacency = Adjacency::new(&edges).map_err(PipelineError::from)?;
        let cfg = PlantConfig {
            n_zones: self.n_zones,
            capacitance: self.capacitance.clone(),
            r_outdoor: self.r_outdoor.clone(),
            adjacency,
            hvac_gain: self.hvac_gain,
            hvac_power_limit: self.hvac_power_limit,
            power_curve_exponent: self.power_curve_exponent,
            power_scale: self.power_scale,
            occupancy_heat: self.occupancy_heat,
            occupant_power: self.occupant_power,
            temp_noise_std: self.temp_noise_std,
            power_noise_std: self.power_noise_std,
            dt_s: self.dt_s,
        };
        cfg.validate().map_err(PipelineError::from)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Simulated days in the training corpus.
    pub days: usize,
    /// Master seed: schedules, plant noise, splits derive from it.
    pub seed: u64,
    pub profile: String,
    pub test_fraction: f64,
    /// Lookback and control horizon T (10-minute steps; 24 = 4 hours).
    pub horizon_steps: usize,
    /// Baseline operating policy levels, °C.
    pub occupied_setpoint: f64,
    pub setback_setpoint: f64,
    /// Amplitude of the training-corpus setpoint dither, °C (excitation).
    pub dither: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            days: 365,
            seed: 42,
            profile: "weekday-office".into(),
            test_fraction: 1.0 / 6.0,
            horizon_steps: 24,
            occupied_setpoint: 22.0,
            setback_setpoint: 20.0,
            dither: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RnnSection {
    pub hidden_dim: usize,
    pub head_widths: Vec<usize>,
    pub learning_rate: f64,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl Default for RnnSection {
    fn default() -> Self {
        RnnSection {
            hidden_dim: 32,
            head_widths: vec![16, 8],
            learning_rate: 0.05,
            lr_decay_every: 15,
            lr_decay_factor: 0.5,
            batch_size: 64,
            epochs: 40,
            dropout: 0.0,
            grad_clip_norm: 5.0,
            seed: 7,
        }
    }
}

impl RnnSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            lr_decay_every: self.lr_decay_every,
            lr_decay_factor: self.lr_decay_factor,
            batch_size: self.batch_size,
            epochs: self.epochs,
            dropout_rate: self.dropout,
            seed: self.seed,
            grad_clip_norm: self.grad_clip_norm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OptSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_iters: usize,
    pub lambda: f64,
    pub backtrack_shrink: f64,
    pub stall_iters: usize,
    pub stall_tol: f64,
    /// Comfort band [lower, upper] °C for the main comparison.
    pub comfort: [f64; 2],
    /// Constraint-sweep bound sets, widest to tightest.
    pub sweep: Vec<[f64; 2]>,
    /// Evaluated days of the closed-loop comparison episode.
    pub eval_days: usize,
    /// Evaluated days per constraint-sweep episode.
    pub sweep_days: usize,
    /// Seed for the evaluation schedules and plant noise.
    pub eval_seed: u64,
    /// Optional duplicate of data.horizon_steps; must agree when present.
    pub horizon_steps: Option<usize>,
}

impl Default for OptSection {
    fn default() -> Self {
        OptSection {
            learning_rate: 0.02,
            momentum: 0.9,
            max_iters: 200,
            lambda: 1e-3,
            backtrack_shrink: 0.5,
            stall_iters: 25,
            stall_tol: 1e-9,
            comfort: [18.0, 26.0],
            sweep: vec![[18.0, 26.0], [19.0, 24.0], [21.8, 22.2]],
            eval_days: 5,
            sweep_days: 1,
            eval_seed: 1042,
            horizon_steps: None,
        }
    }
}

impl OptSection {
    pub fn opt_config(&self) -> hvacopt_core::barrier::OptConfig {
        hvacopt_core::barrier::OptConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            max_iters: self.max_iters,
            lambda: self.lambda,
            backtrack_shrink: self.backtrack_shrink,
            stall_iters: self.stall_iters,
            stall_tol: self.stall_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub workspace: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            workspace: PathBuf::from("runs/default"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> PipelineResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Collect every configuration problem into one error message.
    pub fn validate(&self) -> PipelineResult<()> {
        let mut problems: Vec<String> = Vec::new();

        if let Err(e) = self.plant.to_core() {
            problems.push(e.message);
        }
        if let Err(e) = ScheduleProfile::parse(&self.data.profile) {
            problems.push(e.to_string());
        }
        if self.data.days == 0 {
            problems.push("data.days must be >= 1".into());
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            problems.push("data.test_fraction must lie in (0, 1)".into());
        }
        if self.data.horizon_steps == 0 {
            problems.push("data.horizon_steps must be >= 1".into());
        }
        if let Some(t) = self.opt.horizon_steps {
            if t != self.data.horizon_steps {
                problems.push(format!(
                    "horizon mismatch: data.horizon_steps = {}, opt.horizon_steps = {t}",
                    self.data.horizon_steps
                ));
            }
        }
        if self.plant.dt_s == 0 || SECONDS_PER_DAY % self.plant.dt_s.max(1) != 0 {
            problems.push("plant.dt_s must divide 86400".into());
        }
        for (name, pair) in std::iter::once(("opt.comfort", &self.opt.comfort))
            .chain(self.opt.sweep.iter().map(|b| ("opt.sweep", b)))
        {
            if Bounds::new(pair[0], pair[1]).is_err() {
                problems.push(format!("{name}: [{}, {}] is not a valid band", pair[0], pair[1]));
            }
        }
        for (name, p) in [
            ("data.occupied_setpoint", self.data.occupied_setpoint),
            ("data.setback_setpoint", self.data.setback_setpoint),
        ] {
            if !(self.opt.comfort[0] <= p && p <= self.opt.comfort[1]) {
                problems.push(format!("{name} {p} lies outside opt.comfort"));
            }
        }
        if let Err(e) = self.rnn.train_config().validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.opt.opt_config().validate() {
            problems.push(e.to_string());
        }
        if self.opt.eval_days == 0 || self.opt.sweep_days == 0 {
            problems.push("opt.eval_days and opt.sweep_days must be >= 1".into());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::config(problems.join("; ")))
        }
    }

    pub fn comfort(&self) -> Bounds {
        Bounds::new(self.opt.comfort[0], self.opt.comfort[1]).expect("validated")
    }

    pub fn profile(&self) -> ScheduleProfile {
        ScheduleProfile::parse(&self.data.profile).expect("validated")
    }
}
