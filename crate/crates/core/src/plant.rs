//! Synthetic ground-truth building: a multi-zone RC thermal network driven by
//! setpoint-tracking HVAC, extended with a superlinear electrical power map
//! and occupancy heat gains so the plant is strictly richer than what a
//! first-order RC fit can capture.
//!
//! Zone dynamics (forward Euler at `dt`):
//!
//! ```text
//! C_i·dT_i/dt = (T_out − T_i)/R_i + Σ_j (T_j − T_i)/R_ij + P_i + q_occ_i
//! P_i = clamp(gain·(set_i − T_i), ±P_max)
//! ```
//!
//! Metered electrical power:
//!
//! ```text
//! P = scale·Σ_i |P_i|^exponent + Σ_i appliance_i + w_person·Σ_i occ_i + noise,
//! clamped at 0.
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;
use crate::linalg::Mat;
use crate::profile::ProfileLog;
use crate::rng::SplitMix64;
use crate::schedule::{ScheduleRow, ScheduleSet};
use crate::schema::{Block, Bounds, Feature, FeatureSchema};

/// Symmetric zone adjacency with thermal resistances; stored as canonical
/// (low, high, resistance) edges.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Adjacency {
    edges: Vec<(usize, usize, f64)>,
}

impl Adjacency {
    pub fn new(edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut canon: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(a, b, r) in edges {
            if a == b {
                return Err(Error::InvalidConfig(format!(
                    "adjacency self-loop on zone {a}"
                )));
            }
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "adjacency resistance between {a} and {b} must be positive"
                )));
            }
            let key = (a.min(b), a.max(b));
            if canon.iter().any(|&(x, y, _)| (x, y) == key) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate adjacency edge between {a} and {b}"
                )));
            }
            canon.push((key.0, key.1, r));
        }
        Ok(Adjacency { edges: canon })
    }

    pub fn ring(n_zones: usize, resistance: f64) -> Result<Self> {
        if n_zones < 2 {
            return Adjacency::new(&[]);
        }
        let mut edges = Vec::new();
        for i in 0..n_zones {
            let j = (i + 1) % n_zones;
            if i < j || n_zones > 2 {
                edges.push((i, j, resistance));
            }
        }
        Adjacency::new(&edges)
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn resistance(&self, a: usize, b: usize) -> Option<f64> {
        let key = (a.min(b), a.max(b));
        self.edges
            .iter()
            .find(|&&(x, y, _)| (x, y) == key)
            .map(|&(_, _, r)| r)
    }

    pub fn max_zone(&self) -> Option<usize> {
        self.edges.iter().map(|&(_, b, _)| b).max()
    }
}

/// Physical parameters of the synthetic plant.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantConfig {
    pub n_zones: usize,
    /// Thermal capacitance per zone, J/°C.
    pub capacitance: Vec<f64>,
    /// Zone-to-outdoor resistance per zone, °C/W.
    pub r_outdoor: Vec<f64>,
    /// Zone-to-zone resistances, °C/W.
    pub adjacency: Adjacency,
    /// HVAC thermal response, W per °C of setpoint tracking error.
    pub hvac_gain: f64,
    /// Actuator clip, W (symmetric ±limit per zone).
    pub hvac_power_limit: f64,
    /// Superlinear electrical draw exponent, ≥ 1.
    pub power_curve_exponent: f64,
    /// Metered W per (thermal W)^exponent.
    pub power_scale: f64,
    /// Thermal gain per occupant, W.
    pub occupancy_heat: f64,
    /// Metered electrical draw per occupant, W.
    pub occupant_power: f64,
    /// Process noise on zone temperatures, °C (std).
    pub temp_noise_std: f64,
    /// Measurement noise on metered power, W (std).
    pub power_noise_std: f64,
    /// Timestep, s.
    pub dt_s: u64,
}

impl PlantConfig {
    /// Desk-scale default: four identical coupled zones.
    pub fn default_four_zone() -> Self {
        PlantConfig {
            n_zones: 4,
            capacitance: vec![8.0e6; 4],
            r_outdoor: vec![4.0e-3; 4],
            adjacency: Adjacency::ring(4, 2.0e-3).expect("static ring is valid"),
            hvac_gain: 2500.0,
            hvac_power_limit: 12_000.0,
            power_curve_exponent: 1.5,
            power_scale: 0.02,
            occupancy_heat: 100.0,
            occupant_power: 120.0,
            temp_noise_std: 0.05,
            power_noise_std: 50.0,
            dt_s: 600,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        if self.n_zones == 0 {
            problems.push("n_zones must be >= 1".into());
        }
        if self.capacitance.len() != self.n_zones || self.r_outdoor.len() != self.n_zones {
            problems.push(format!(
                "capacitance/r_outdoor must have {} entries",
                self.n_zones
            ));
        }
        if self.capacitance.iter().any(|&c| !(c.is_finite() && c > 0.0)) {
            problems.push("capacitance must be positive".into());
        }
        if self.r_outdoor.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            problems.push("r_outdoor must be positive".into());
        }
        if let Some(max_zone) = self.adjacency.max_zone() {
            if max_zone >= self.n_zones {
                problems.push(format!(
                    "adjacency references zone {max_zone}, but there are {} zones",
                    self.n_zones
                ));
            }
        }
        if !(self.power_curve_exponent.is_finite() && self.power_curve_exponent >= 1.0) {
            problems.push("power_curve_exponent must be >= 1".into());
        }
        if !(self.hvac_power_limit.is_finite() && self.hvac_power_limit > 0.0) {
            problems.push("hvac_power_limit must be positive".into());
        }
        for (name, v) in [
            ("hvac_gain", self.hvac_gain),
            ("power_scale", self.power_scale),
            ("occupancy_heat", self.occupancy_heat),
            ("occupant_power", self.occupant_power),
            ("temp_noise_std", self.temp_noise_std),
            ("power_noise_std", self.power_noise_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name} must be >= 0"));
            }
        }
        if self.dt_s == 0 {
            problems.push("dt_s must be positive".into());
        }
        // Forward-Euler stability margin: dt below half of every RC time
        // constant in the network.
        if self.capacitance.len() == self.n_zones && self.r_outdoor.len() == self.n_zones {
            let dt = self.dt_s as f64;
            for i in 0..self.n_zones {
                let rc = self.r_outdoor[i] * self.capacitance[i];
                if dt >= rc / 2.0 {
                    problems.push(format!(
                        "dt {dt} s too large for zone {i} outdoor RC constant {rc} s"
                    ));
                }
            }
            for &(a, b, r) in self.adjacency.edges() {
                if a < self.n_zones && b < self.n_zones {
                    let rc = r * self.capacitance[a].min(self.capacitance[b]);
                    if dt >= rc / 2.0 {
                        problems.push(format!(
                            "dt {dt} s too large for adjacency RC constant {rc} s ({a}-{b})"
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// Canonical feature schema for logs from this plant: per-zone measured
    /// temperatures (paired to setpoints) and occupancies as uncontrollable,
    /// per-zone setpoints as controllable, outdoor temperature and solar as
    /// physical. `comfort` bounds both the setpoints and the paired
    /// temperature measurements.
    pub fn schema(&self, comfort: Bounds) -> FeatureSchema {
        let n = self.n_zones;
        let mut features = Vec::with_capacity(3 * n + 2);
        for z in 0..n {
            features.push(Feature {
                name: format!("temp_{z}"),
                block: Block::Uncontrollable,
                bounds: Some(comfort),
                pairing: Some(2 * n + z),
            });
        }
        for z in 0..n {
            features.push(Feature {
                name: format!("occ_{z}"),
                block: Block::Uncontrollable,
                bounds: None,
                pairing: None,
            });
        }
        for z in 0..n {
            features.push(Feature {
                name: format!("set_{z}"),
                block: Block::Controllable,
                bounds: Some(comfort),
                pairing: None,
            });
        }
        features.push(Feature {
            name: "outdoor".into(),
            block: Block::Physical,
            bounds: None,
            pairing: None,
        });
        features.push(Feature {
            name: "solar".into(),
            block: Block::Physical,
            bounds: None,
            pairing: None,
        });
        FeatureSchema::new(features).expect("canonical plant schema is valid")
    }
}

/// Instantaneous plant state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub zone_temps: Vec<f64>,
    pub time_index: u64,
}

impl PlantState {
    pub fn uniform(n_zones: usize, temp_c: f64) -> Self {
        PlantState {
            zone_temps: vec![temp_c; n_zones],
            time_index: 0,
        }
    }
}

/// Advance the plant one step under the given setpoints and exogenous row.
/// Noise is derived from `(seed, state.time_index)`, so a step is a pure
/// function of its arguments. Returns the next state and the metered power.
pub fn plant_step(
    state: &PlantState,
    setpoints: &[f64],
    exog: ScheduleRow<'_>,
    cfg: &PlantConfig,
    seed: u64,
) -> Result<(PlantState, f64)> {
    let n = cfg.n_zones;
    if state.zone_temps.len() != n {
        return Err(Error::DimMismatch {
            what: "plant state",
            expected: n,
            got: state.zone_temps.len(),
        });
    }
    if setpoints.len() != n {
        return Err(Error::DimMismatch {
            what: "setpoints",
            expected: n,
            got: setpoints.len(),
        });
    }
    if exog.occupancy.len() != n || exog.appliance_w.len() != n {
        return Err(Error::DimMismatch {
            what: "schedule row",
            expected: n,
            got: exog.occupancy.len().min(exog.appliance_w.len()),
        });
    }
    let finite = state.zone_temps.iter().all(|v| v.is_finite())
        && setpoints.iter().all(|v| v.is_finite())
        && exog.outdoor_c.is_finite();
    if !finite {
        return Err(Error::NonFinite("plant step inputs"));
    }

    let dt = cfg.dt_s as f64;
    let mut rng = SplitMix64::from_seed_stream(seed, state.time_index);
    let temps = &state.zone_temps;

    let mut next = vec![0.0; n];
    let mut hvac_thermal_sum = 0.0;
    let mut occupants = 0.0;
    let mut appliances = 0.0;
    for i in 0..n {
        let p_hvac = (cfg.hvac_gain * (setpoints[i] - temps[i]))
            .clamp(-cfg.hvac_power_limit, cfg.hvac_power_limit);
        let mut flux = (exog.outdoor_c - temps[i]) / cfg.r_outdoor[i] + p_hvac;
        for j in 0..n {
            if let Some(r) = cfg.adjacency.resistance(i, j) {
                flux += (temps[j] - temps[i]) / r;
            }
        }
        flux += cfg.occupancy_heat * exog.occupancy[i];
        let noise = if cfg.temp_noise_std > 0.0 {
            cfg.temp_noise_std * rng.next_normal()
        } else {
            0.0
        };
        next[i] = temps[i] + dt * flux / cfg.capacitance[i] + noise;

        hvac_thermal_sum += float::powf(p_hvac.abs(), cfg.power_curve_exponent);
        occupants += exog.occupancy[i];
        appliances += exog.appliance_w[i];
    }

    let power_noise = if cfg.power_noise_std > 0.0 {
        cfg.power_noise_std * rng.next_normal()
    } else {
        0.0
    };
    let metered = cfg.power_scale * hvac_thermal_sum
        + appliances
        + cfg.occupant_power * occupants
        + power_noise;

    Ok((
        PlantState {
            zone_temps: next,
            time_index: state.time_index + 1,
        },
        metered.max(0.0),
    ))
}

/// Run the plant over a full schedule under a given setpoint policy and
/// collect the profile log (feature rows per the canonical schema plus
/// metered power). `comfort` only annotates the schema; it does not affect
/// the dynamics.
pub fn simulate(
    cfg: &PlantConfig,
    schedules: &ScheduleSet,
    policy: &Mat,
    comfort: Bounds,
    seed: u64,
) -> Result<ProfileLog> {
    cfg.validate()?;
    schedules.validate()?;
    if policy.rows() != schedules.len() {
        return Err(Error::LengthMismatch {
            what: "setpoint policy",
            expected: schedules.len(),
            got: policy.rows(),
        });
    }
    if schedules.n_zones() != cfg.n_zones || policy.cols() != cfg.n_zones {
        return Err(Error::DimMismatch {
            what: "zones",
            expected: cfg.n_zones,
            got: schedules.n_zones().min(policy.cols()),
        });
    }

    let schema = cfg.schema(comfort);
    let mut log = ProfileLog::new(schema);
    if schedules.is_empty() {
        return Ok(log);
    }

    let mut state = initial_state(cfg, policy.row(0));
    let mut row = vec![0.0; log.schema().len()];
    for step in 0..schedules.len() {
        let exog = schedules.row(step);
        let setpoints = policy.row(step);
        assemble_feature_row(cfg.n_zones, &state, setpoints, &exog, &mut row);
        let (next, power) = plant_step(&state, setpoints, exog, cfg, seed)?;
        log.push(step as u64 * cfg.dt_s, &row, power)?;
        state = next;
    }
    Ok(log)
}

/// Start every zone at its first commanded setpoint.
pub fn initial_state(cfg: &PlantConfig, first_setpoints: &[f64]) -> PlantState {
    debug_assert_eq!(first_setpoints.len(), cfg.n_zones);
    PlantState {
        zone_temps: first_setpoints.to_vec(),
        time_index: 0,
    }
}

/// Fill `row` with the canonical feature layout:
/// temps[0..n], occ[0..n], set[0..n], outdoor, solar.
pub fn assemble_feature_row(
    n_zones: usize,
    state: &PlantState,
    setpoints: &[f64],
    exog: &ScheduleRow<'_>,
    row: &mut [f64],
) {
    row[..n_zones].copy_from_slice(&state.zone_temps);
    row[n_zones..2 * n_zones].copy_from_slice(exog.occupancy);
    row[2 * n_zones..3 * n_zones].copy_from_slice(setpoints);
    row[3 * n_zones] = exog.outdoor_c;
    row[3 * n_zones + 1] = exog.solar_wm2;
}
