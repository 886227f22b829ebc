//! Rolling-horizon closed-loop execution against the synthetic plant and the
//! experiment suite: controller comparisons, constraint sweeps, and
//! model-fit reports.
//!
//! Every episode starts with T burn-in steps under the fixed baseline
//! schedule to populate the history window; burn-in steps are excluded from
//! all metrics. Exactly one plan row is applied per plant step (receding
//! horizon). Comfort is accounted, not enforced: measured zone temperatures
//! outside the comfort band are reported in the metrics while the barrier
//! only guarantees the commands themselves stay strictly inside.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::barrier::{
    optimize_inputs, BarrierProblem, OptConfig, PairMap, SolveReport, SurrogateModel,
};
use crate::dataset::{Scaler, SequenceSample};
use crate::error::{Error, Result};
use crate::float;
use crate::linalg::Mat;
use crate::plant::{assemble_feature_row, initial_state, plant_step, PlantConfig};
use crate::schedule::ScheduleSet;
use crate::schema::{Block, Bounds, FeatureSchema};

/// Everything an episode needs besides the controller.
#[derive(Clone)]
pub struct Scenario<'a> {
    pub plant: &'a PlantConfig,
    pub schedules: &'a ScheduleSet,
    /// Baseline setpoint schedule (steps × zones, °C): burn-in policy,
    /// fixed-schedule controller, and the comparison reference.
    pub baseline_policy: &'a Mat,
    /// Comfort band (°C) bounding setpoint commands and, through pairing,
    /// the predicted zone temperatures.
    pub comfort: Bounds,
    /// Lookback and planning horizon T, in steps.
    pub horizon: usize,
    pub plant_seed: u64,
    pub schema: &'a FeatureSchema,
    pub scaler: &'a Scaler,
    /// Identifies the (schedules, seeds, horizon) combination so reports can
    /// refuse to compare episodes from different scenarios.
    pub id: String,
}

/// Which controller drives an episode.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ControllerKind {
    FixedSchedule,
    RcMpc,
    RnnBarrier,
}

impl ControllerKind {
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::FixedSchedule => "fixed-schedule",
            ControllerKind::RcMpc => "rc-mpc",
            ControllerKind::RnnBarrier => "rnn-barrier",
        }
    }
}

/// Controller: a kind plus (for the optimizing kinds) the frozen surrogate
/// and optimizer settings.
pub struct ControllerSpec<'a> {
    pub kind: ControllerKind,
    pub model: Option<&'a dyn SurrogateModel>,
    pub opt: OptConfig,
}

impl<'a> ControllerSpec<'a> {
    pub fn fixed() -> Self {
        ControllerSpec {
            kind: ControllerKind::FixedSchedule,
            model: None,
            opt: OptConfig::default(),
        }
    }

    pub fn rc_mpc(model: &'a dyn SurrogateModel, opt: OptConfig) -> Self {
        ControllerSpec {
            kind: ControllerKind::RcMpc,
            model: Some(model),
            opt,
        }
    }

    pub fn rnn_barrier(model: &'a dyn SurrogateModel, opt: OptConfig) -> Self {
        ControllerSpec {
            kind: ControllerKind::RnnBarrier,
            model: Some(model),
            opt,
        }
    }
}

/// Post-burn-in episode results and per-step logs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeMetrics {
    pub scenario_id: String,
    pub controller: String,
    pub comfort_lower: f64,
    pub comfort_upper: f64,
    pub horizon: usize,
    pub eval_steps: usize,
    /// Σ P over evaluated steps (W·steps).
    pub total_energy: f64,
    /// Σ P² over evaluated steps (the optimizer's objective, measured).
    pub sum_squared_power: f64,
    /// Zone-steps with a measured temperature outside the comfort band.
    pub comfort_violations: usize,
    /// Largest temperature excursion beyond the band, °C.
    pub max_violation: f64,
    /// Steps where the optimizer stalled and the previous command was reused.
    pub fallback_steps: usize,
    /// eval_steps × zones, °C.
    pub setpoints: Mat,
    /// eval_steps × zones, °C (measured at decision time).
    pub zone_temps: Mat,
    /// eval_steps metered power, W.
    pub power: Vec<f64>,
    /// The first optimizer solve of the episode, for inspection (None for
    /// the fixed-schedule controller).
    pub first_solve: Option<SolveReport>,
}

/// Scaled per-feature bounds for the barrier: the comfort band on every
/// setpoint and on every paired temperature measurement.
pub fn barrier_bounds(
    schema: &FeatureSchema,
    scaler: &Scaler,
    comfort: Bounds,
) -> Vec<Option<Bounds>> {
    (0..schema.len())
        .map(|i| match schema.block(i) {
            Block::Controllable => Some(scaler.scale_bounds(i, comfort)),
            Block::Uncontrollable if schema.pairing(i).is_some() => {
                Some(scaler.scale_bounds(i, comfort))
            }
            _ => None,
        })
        .collect()
}

/// Unit maps carrying each control's scaled values into its paired
/// measurement's scaled units (the two columns normalize differently).
pub fn pair_maps(schema: &FeatureSchema, scaler: &Scaler) -> Vec<Option<PairMap>> {
    (0..schema.len())
        .map(|f| match (schema.block(f), schema.pairing(f)) {
            (Block::Uncontrollable, Some(c)) => Some(PairMap {
                scale: scaler.scale[c] / scaler.scale[f],
                offset: (scaler.shift[c] - scaler.shift[f]) / scaler.scale[f],
            }),
            _ => None,
        })
        .collect()
}

/// Run one closed-loop episode: burn in on the baseline schedule for T
/// steps, then at each step solve for the horizon plan, apply only its first
/// row, advance the plant, and re-solve. Deterministic for fixed seeds.
pub fn run_episode(scenario: &Scenario<'_>, controller: &ControllerSpec<'_>) -> Result<EpisodeMetrics> {
    let t = scenario.horizon;
    let total = scenario.schedules.len();
    let nz = scenario.plant.n_zones;
    let n = scenario.schema.len();
    if total < t {
        return Err(Error::LengthMismatch {
            what: "episode schedules",
            expected: t,
            got: total,
        });
    }
    if scenario.baseline_policy.rows() != total || scenario.baseline_policy.cols() != nz {
        return Err(Error::DimMismatch {
            what: "baseline policy",
            expected: total,
            got: scenario.baseline_policy.rows(),
        });
    }
    if controller.kind != ControllerKind::FixedSchedule && controller.model.is_none() {
        return Err(Error::InvalidConfig(
            "optimizing controller needs a model reference".into(),
        ));
    }
    let bounds = barrier_bounds(scenario.schema, scenario.scaler, scenario.comfort);
    let maps = pair_maps(scenario.schema, scenario.scaler);
    let control_features = scenario.schema.indices_of(Block::Controllable);
    if control_features.len() != nz {
        return Err(Error::SchemaMismatch(alloc::format!(
            "expected {nz} controllable features, found {}",
            control_features.len()
        )));
    }

    let eval_steps = total - t;
    let mut metrics = EpisodeMetrics {
        scenario_id: scenario.id.clone(),
        controller: controller.kind.label().into(),
        comfort_lower: scenario.comfort.lower,
        comfort_upper: scenario.comfort.upper,
        horizon: t,
        eval_steps,
        total_energy: 0.0,
        sum_squared_power: 0.0,
        comfort_violations: 0,
        max_violation: 0.0,
        fallback_steps: 0,
        setpoints: Mat::zeros(eval_steps, nz),
        zone_temps: Mat::zeros(eval_steps, nz),
        power: Vec::with_capacity(eval_steps),
        first_solve: None,
    };

    let mut state = initial_state(scenario.plant, scenario.baseline_policy.row(0));
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut raw_row = vec![0.0; n];
    let mut prev_setpoints: Vec<f64> = scenario.baseline_policy.row(0).to_vec();

    for step in 0..total {
        let exog = scenario.schedules.row(step);
        let setpoints: Vec<f64> = if step < t || controller.kind == ControllerKind::FixedSchedule {
            scenario.baseline_policy.row(step).to_vec()
        } else {
            let model = controller.model.expect("validated above");
            // History: the last T scaled profile rows.
            let mut hist = Mat::zeros(t, n);
            for (i, row) in history[step - t..step].iter().enumerate() {
                hist.row_mut(i).copy_from_slice(row);
            }
            // Forecast rows for steps step..=step+T: physical and unpaired
            // uncontrollable features from the schedules (held at the final
            // row past the end), controls/paired slots defaulting to the
            // previous command and current measurements.
            let mut exog_mat = Mat::zeros(t + 1, n);
            let mut future_raw = vec![0.0; n];
            for tau in 0..=t {
                let idx = (step + tau).min(total - 1);
                let row = scenario.schedules.row(idx);
                assemble_feature_row(nz, &state, &prev_setpoints, &row, &mut future_raw);
                scenario.scaler.apply_row(&future_raw, exog_mat.row_mut(tau));
            }
            let problem = BarrierProblem::with_pair_maps(
                model,
                hist,
                exog_mat,
                scenario.schema,
                bounds.clone(),
                maps.clone(),
                controller.opt.lambda,
                t,
            )?;
            // Warm start from the last applied setpoints, pushed strictly
            // inside the box.
            let warm: Vec<f64> = control_features
                .iter()
                .zip(&prev_setpoints)
                .map(|(&f, &sp)| scenario.scaler.apply_feature(f, sp))
                .collect();
            let mut init = problem.constant_plan(&warm)?;
            problem.project_interior(&mut init, 0.01);
            match optimize_inputs(&problem, init, &controller.opt) {
                Ok(plan) => {
                    if metrics.first_solve.is_none() {
                        metrics.first_solve = Some(SolveReport::from_plan(&problem, &plan));
                    }
                    plan.first_action()
                        .iter()
                        .zip(&control_features)
                        .map(|(&v, &f)| scenario.scaler.invert_feature(f, v))
                        .collect()
                }
                Err(Error::Stall) => {
                    metrics.fallback_steps += 1;
                    prev_setpoints.clone()
                }
                Err(e) => return Err(e),
            }
        };

        assemble_feature_row(nz, &state, &setpoints, &exog, &mut raw_row);
        let mut scaled = vec![0.0; n];
        scenario.scaler.apply_row(&raw_row, &mut scaled);
        history.push(scaled);

        let (next, power) = plant_step(&state, &setpoints, exog, scenario.plant, scenario.plant_seed)?;

        if step >= t {
            let r = step - t;
            metrics.setpoints.row_mut(r).copy_from_slice(&setpoints);
            metrics.zone_temps.row_mut(r).copy_from_slice(&state.zone_temps);
            metrics.power.push(power);
            metrics.total_energy += power;
            metrics.sum_squared_power += power * power;
            for &temp in &state.zone_temps {
                let excess = (scenario.comfort.lower - temp).max(temp - scenario.comfort.upper);
                if excess > 0.0 {
                    metrics.comfort_violations += 1;
                    metrics.max_violation = metrics.max_violation.max(excess);
                }
            }
        }
        prev_setpoints = setpoints;
        state = next;
    }
    Ok(metrics)
}

/// Percentage reduction of `candidate` relative to `reference`.
pub fn reduction_pct(reference: f64, candidate: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        100.0 * (reference - candidate) / reference
    }
}

/// Head-to-head episode comparison against a named reference.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub scenario_id: String,
    pub reference: String,
    pub candidate: String,
    pub energy_reduction_pct: f64,
    pub sum_squared_reduction_pct: f64,
    pub comfort_violation_delta: i64,
}

pub fn compare(reference: &EpisodeMetrics, candidate: &EpisodeMetrics) -> Result<ComparisonReport> {
    if reference.scenario_id != candidate.scenario_id
        || reference.eval_steps != candidate.eval_steps
        || reference.comfort_lower != candidate.comfort_lower
        || reference.comfort_upper != candidate.comfort_upper
    {
        return Err(Error::InvalidConfig(alloc::format!(
            "cannot compare `{}` against `{}`: different scenarios",
            candidate.scenario_id,
            reference.scenario_id
        )));
    }
    Ok(ComparisonReport {
        scenario_id: reference.scenario_id.clone(),
        reference: reference.controller.clone(),
        candidate: candidate.controller.clone(),
        energy_reduction_pct: reduction_pct(reference.total_energy, candidate.total_energy),
        sum_squared_reduction_pct: reduction_pct(
            reference.sum_squared_power,
            candidate.sum_squared_power,
        ),
        comfort_violation_delta: candidate.comfort_violations as i64
            - reference.comfort_violations as i64,
    })
}

/// One episode per comfort band, identical seeds and schedules.
pub fn constraint_sweep(
    scenario: &Scenario<'_>,
    controller: &ControllerSpec<'_>,
    bound_sets: &[Bounds],
) -> Result<Vec<EpisodeMetrics>> {
    bound_sets
        .iter()
        .map(|&comfort| {
            let sc = Scenario {
                comfort,
                id: alloc::format!(
                    "{}#band=[{},{}]",
                    scenario.id,
                    comfort.lower,
                    comfort.upper
                ),
                ..scenario.clone()
            };
            run_episode(&sc, controller)
        })
        .collect()
}

/// Normalized per-window residual for plotting.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitPoint {
    pub origin_index: usize,
    pub actual: f64,
    pub rnn: f64,
    pub rc: f64,
}

/// Test-set accuracy of the two models over a shared test set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub rnn_rmse: f64,
    pub rc_rmse: f64,
    /// 100·(rc − rnn)/rc: how much the recurrent model improves on RC.
    pub improvement_pct: f64,
    pub residuals: Vec<FitPoint>,
}

/// How much `candidate` improves on `reference` in percent of `reference`.
pub fn improvement_pct(reference_rmse: f64, candidate_rmse: f64) -> f64 {
    reduction_pct(reference_rmse, candidate_rmse)
}

pub fn model_fit_report(
    rnn: &dyn SurrogateModel,
    rc: &dyn SurrogateModel,
    test: &[SequenceSample],
) -> Result<FitReport> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test samples"));
    }
    let mut sq_rnn = 0.0;
    let mut sq_rc = 0.0;
    let mut residuals = Vec::with_capacity(test.len());
    for s in test {
        let p_rnn = rnn.predict(&s.inputs)?;
        let p_rc = rc.predict(&s.inputs)?;
        sq_rnn += (p_rnn - s.target) * (p_rnn - s.target);
        sq_rc += (p_rc - s.target) * (p_rc - s.target);
        residuals.push(FitPoint {
            origin_index: s.origin_index,
            actual: s.target,
            rnn: p_rnn,
            rc: p_rc,
        });
    }
    let rnn_rmse = float::sqrt(sq_rnn / test.len() as f64);
    let rc_rmse = float::sqrt(sq_rc / test.len() as f64);
    Ok(FitReport {
        rnn_rmse,
        rc_rmse,
        improvement_pct: improvement_pct(rc_rmse, rnn_rmse),
        residuals,
    })
}
