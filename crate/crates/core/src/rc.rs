//! First-order RC baseline: least-squares identification of the discretized
//! thermal network from logged data, a power predictor built on the
//! identified dynamics, and an MPC controller that reuses the same barrier
//! optimizer as the recurrent surrogate (so model quality is the only
//! difference between the two controllers).
//!
//! Only products of the physical parameters are identifiable from
//! temperature data (1/(R·C), gain/C), so the fitted parameters are stored
//! in that per-unit-capacitance form. The power map is a regression of
//! metered power on two aggregate thermal inputs evaluated at the window's
//! final row: the tracking aggregate Σ_i |ĝ_i·(set_i − T_i)| and the
//! exchange aggregate Σ_i |α_i·(T_out − T_i) + Σ_j α_ij·(T_j − T_i)|, plus an
//! intercept for non-HVAC base load.

use alloc::vec;
use alloc::vec::Vec;

use crate::barrier::{optimize_inputs, BarrierProblem, ControlPlan, OptConfig, SurrogateModel};
use crate::dataset::{Scaler, SequenceSample};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, Mat};
use crate::schema::{Block, Bounds, FeatureSchema};

/// Identified RC parameters (per-unit-capacitance form) and the fitted
/// power map.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RcParams {
    pub n_zones: usize,
    /// 1/(R_i·C_i) per zone, 1/s.
    pub alpha_outdoor: Vec<f64>,
    /// 1/(R_ij·C) adjacency matrix, symmetric, 0 where zones do not touch.
    pub alpha_adjacent: Mat,
    /// HVAC tracking gain per unit capacitance, g_i/C_i, 1/s.
    pub tracking_gain: Vec<f64>,
    /// Scaled-power units per tracking-aggregate unit.
    pub power_scale: f64,
    /// Scaled-power units per exchange-aggregate unit.
    pub exchange_scale: f64,
    /// Scaled-power intercept (base load).
    pub power_offset: f64,
}

/// Resolved positions of the per-zone features inside a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneLayout {
    /// Feature index of each zone's temperature measurement.
    pub temp: Vec<usize>,
    /// Feature index of each zone's setpoint.
    pub setpoint: Vec<usize>,
    /// Feature index of the outdoor temperature.
    pub outdoor: usize,
}

impl ZoneLayout {
    /// Derive the layout from pairing (temperature → setpoint) and the
    /// `outdoor` physical feature.
    pub fn from_schema(schema: &FeatureSchema) -> Result<Self> {
        let mut temp = Vec::new();
        let mut setpoint = Vec::new();
        for i in 0..schema.len() {
            if schema.block(i) == Block::Uncontrollable {
                if let Some(c) = schema.pairing(i) {
                    temp.push(i);
                    setpoint.push(c);
                }
            }
        }
        if temp.is_empty() {
            return Err(Error::SchemaMismatch(
                "no paired temperature/setpoint features".into(),
            ));
        }
        let outdoor = schema
            .index_of("outdoor")
            .filter(|&i| schema.block(i) == Block::Physical)
            .ok_or_else(|| Error::SchemaMismatch("no physical `outdoor` feature".into()))?;
        Ok(ZoneLayout {
            temp,
            setpoint,
            outdoor,
        })
    }

    pub fn n_zones(&self) -> usize {
        self.temp.len()
    }
}

/// Fit the discretized zone dynamics and the power map from training
/// windows. Stage 1 regresses each zone's one-step temperature change on the
/// temperature differences and the setpoint tracking error; stage 2
/// regresses the scaled power target on the two aggregate thermal inputs.
pub fn fit_rc(
    train: &[SequenceSample],
    schema: &FeatureSchema,
    scaler: &Scaler,
    dt_s: u64,
) -> Result<RcParams> {
    if train.is_empty() {
        return Err(Error::EmptyInput("rc training samples"));
    }
    let layout = ZoneLayout::from_schema(schema)?;
    let nz = layout.n_zones();
    let dt = dt_s as f64;
    let width = schema.len();

    // Unscale the final transition (rows T−1, T) of every window; each
    // window contributes exactly one distinct transition.
    let t_rows = train[0].inputs.rows();
    if t_rows < 2 {
        return Err(Error::LengthMismatch {
            what: "rc fit window",
            expected: 2,
            got: t_rows,
        });
    }
    let n_obs = train.len();
    let mut prev_raw = vec![0.0; width];
    let mut last_raw = vec![0.0; width];

    // Stage 1: per-zone regression ΔT_i = Σ coef·(dt·regressor).
    // Regressors: (T_out − T_i), (T_j − T_i) for every other zone j, and
    // (set_i − T_i). Coefficients are α_out, α_adj.., gain/C directly.
    let n_reg = 1 + (nz - 1) + 1;
    let mut alpha_outdoor = vec![0.0; nz];
    let mut tracking = vec![0.0; nz];
    let mut adj_raw = Mat::zeros(nz, nz);
    for zone in 0..nz {
        let mut a = Mat::zeros(n_obs, n_reg);
        let mut y = vec![0.0; n_obs];
        for (row, sample) in train.iter().enumerate() {
            unscale_row(scaler, sample.inputs.row(t_rows - 2), &mut prev_raw);
            unscale_row(scaler, sample.inputs.row(t_rows - 1), &mut last_raw);
            let t_i = prev_raw[layout.temp[zone]];
            let mut col = 0;
            a.set(row, col, dt * (prev_raw[layout.outdoor] - t_i));
            col += 1;
            for other in 0..nz {
                if other == zone {
                    continue;
                }
                a.set(row, col, dt * (prev_raw[layout.temp[other]] - t_i));
                col += 1;
            }
            a.set(row, col, dt * (prev_raw[layout.setpoint[zone]] - t_i));
            y[row] = last_raw[layout.temp[zone]] - t_i;
        }
        let coefs = lstsq(&a, &y)?;
        alpha_outdoor[zone] = coefs[0];
        let mut col = 1;
        for other in 0..nz {
            if other == zone {
                continue;
            }
            adj_raw.set(zone, other, coefs[col]);
            col += 1;
        }
        tracking[zone] = coefs[col];
    }

    for zone in 0..nz {
        if alpha_outdoor[zone] <= 0.0 {
            return Err(Error::NonPositiveEstimate("alpha_outdoor"));
        }
        if tracking[zone] <= 0.0 {
            return Err(Error::NonPositiveEstimate("tracking_gain"));
        }
    }

    // Symmetrize the adjacency and prune entries that are tiny or negative
    // relative to the outdoor coupling (absent edges, regression noise).
    let mut alpha_adjacent = Mat::zeros(nz, nz);
    let floor = 0.05 * alpha_outdoor.iter().cloned().fold(f64::MAX, f64::min);
    for i in 0..nz {
        for j in (i + 1)..nz {
            let sym = 0.5 * (adj_raw.get(i, j) + adj_raw.get(j, i));
            let v = if sym > floor { sym } else { 0.0 };
            alpha_adjacent.set(i, j, v);
            alpha_adjacent.set(j, i, v);
        }
    }

    let params_dyn = RcParams {
        n_zones: nz,
        alpha_outdoor,
        alpha_adjacent,
        tracking_gain: tracking,
        power_scale: 0.0,
        exchange_scale: 0.0,
        power_offset: 0.0,
    };

    // Stage 2: scaled power on [tracking aggregate, exchange aggregate, 1].
    let mut a = Mat::zeros(n_obs, 3);
    let mut y = vec![0.0; n_obs];
    for (row, sample) in train.iter().enumerate() {
        unscale_row(scaler, sample.inputs.row(t_rows - 1), &mut last_raw);
        let (u_track, u_exch) = aggregates(&params_dyn, &layout, &last_raw);
        a.set(row, 0, u_track);
        a.set(row, 1, u_exch);
        a.set(row, 2, 1.0);
        y[row] = sample.target;
    }
    let coefs = lstsq(&a, &y)?;

    Ok(RcParams {
        power_scale: coefs[0],
        exchange_scale: coefs[1],
        power_offset: coefs[2],
        ..params_dyn
    })
}

fn unscale_row(scaler: &Scaler, scaled: &[f64], raw: &mut [f64]) {
    for (i, (&s, r)) in scaled.iter().zip(raw.iter_mut()).enumerate() {
        *r = scaler.invert_feature(i, s);
    }
}

/// Per-zone thermal input estimates at one raw feature row, aggregated as
/// magnitudes: (tracking aggregate, exchange aggregate) in °C/s.
fn aggregates(params: &RcParams, layout: &ZoneLayout, raw: &[f64]) -> (f64, f64) {
    let mut u_track = 0.0;
    let mut u_exch = 0.0;
    for i in 0..layout.n_zones() {
        let t_i = raw[layout.temp[i]];
        u_track += (params.tracking_gain[i] * (raw[layout.setpoint[i]] - t_i)).abs();
        let mut exch = params.alpha_outdoor[i] * (raw[layout.outdoor] - t_i);
        for j in 0..layout.n_zones() {
            let a = params.alpha_adjacent.get(i, j);
            if a != 0.0 {
                exch += a * (raw[layout.temp[j]] - t_i);
            }
        }
        u_exch += exch.abs();
    }
    (u_track, u_exch)
}

/// RC predictor over scaled windows: unscale the final row, evaluate the
/// aggregates, map to scaled power.
#[derive(Debug, Clone)]
pub struct RcSurrogate {
    pub params: RcParams,
    pub layout: ZoneLayout,
    pub scaler: Scaler,
}

impl RcSurrogate {
    pub fn new(params: RcParams, schema: &FeatureSchema, scaler: Scaler) -> Result<Self> {
        let layout = ZoneLayout::from_schema(schema)?;
        if layout.n_zones() != params.n_zones {
            return Err(Error::DimMismatch {
                what: "rc zones",
                expected: params.n_zones,
                got: layout.n_zones(),
            });
        }
        Ok(RcSurrogate {
            params,
            layout,
            scaler,
        })
    }

    fn check(&self, window: &Mat) -> Result<()> {
        if window.cols() != self.scaler.n_features() {
            return Err(Error::DimMismatch {
                what: "rc window width",
                expected: self.scaler.n_features(),
                got: window.cols(),
            });
        }
        if window.rows() == 0 {
            return Err(Error::EmptyInput("rc window"));
        }
        if !window.is_finite() {
            return Err(Error::NonFinite("rc window"));
        }
        Ok(())
    }
}

/// Predicted scaled power for a scaled window.
pub fn rc_predict(model: &RcSurrogate, window: &Mat) -> Result<f64> {
    model.check(window)?;
    let mut raw = vec![0.0; window.cols()];
    unscale_row(&model.scaler, window.row(window.rows() - 1), &mut raw);
    let (u_track, u_exch) = aggregates(&model.params, &model.layout, &raw);
    Ok(model.params.power_scale * u_track
        + model.params.exchange_scale * u_exch
        + model.params.power_offset)
}

impl SurrogateModel for RcSurrogate {
    fn predict(&self, window: &Mat) -> Result<f64> {
        rc_predict(self, window)
    }

    fn value_and_grad(&self, window: &Mat) -> Result<(f64, Mat)> {
        self.check(window)?;
        let p = &self.params;
        let lay = &self.layout;
        let last = window.rows() - 1;
        let mut raw = vec![0.0; window.cols()];
        unscale_row(&self.scaler, window.row(last), &mut raw);

        let mut value = p.power_offset;
        let mut grad_raw = vec![0.0; window.cols()];
        for i in 0..lay.n_zones() {
            let t_i = raw[lay.temp[i]];
            let track = p.tracking_gain[i] * (raw[lay.setpoint[i]] - t_i);
            value += p.power_scale * track.abs();
            let s_track = p.power_scale * sign(track) * p.tracking_gain[i];
            grad_raw[lay.setpoint[i]] += s_track;
            grad_raw[lay.temp[i]] -= s_track;

            let mut exch = p.alpha_outdoor[i] * (raw[lay.outdoor] - t_i);
            let mut alpha_sum = p.alpha_outdoor[i];
            for j in 0..lay.n_zones() {
                let a = p.alpha_adjacent.get(i, j);
                if a != 0.0 {
                    exch += a * (raw[lay.temp[j]] - t_i);
                    alpha_sum += a;
                }
            }
            value += p.exchange_scale * exch.abs();
            let s_exch = p.exchange_scale * sign(exch);
            grad_raw[lay.outdoor] += s_exch * p.alpha_outdoor[i];
            grad_raw[lay.temp[i]] -= s_exch * alpha_sum;
            for j in 0..lay.n_zones() {
                let a = p.alpha_adjacent.get(i, j);
                if a != 0.0 {
                    grad_raw[lay.temp[j]] += s_exch * a;
                }
            }
        }

        // Chain through the affine scaler: d raw_f / d scaled_f = scale_f.
        let mut grad = Mat::zeros(window.rows(), window.cols());
        for f in 0..window.cols() {
            grad.set(last, f, grad_raw[f] * self.scaler.scale[f]);
        }
        Ok((value, grad))
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Rolling-horizon MPC step on the RC model: identical barrier + momentum
/// machinery as the recurrent controller, different predictive model.
#[allow(clippy::too_many_arguments)]
pub fn rc_mpc_solve(
    model: &RcSurrogate,
    history: Mat,
    exog: Mat,
    schema: &FeatureSchema,
    bounds: Vec<Option<Bounds>>,
    horizon: usize,
    init: ControlPlan,
    cfg: &OptConfig,
) -> Result<ControlPlan> {
    let problem = BarrierProblem::new(model, history, exog, schema, bounds, cfg.lambda, horizon)?;
    optimize_inputs(&problem, init, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::barrier_loss;
    use crate::dataset::{fit_scaler, make_windows, split};
    use crate::plant::{simulate, Adjacency, PlantConfig};
    use crate::schedule::{baseline_policy, dithered_policy, generate_schedules, ScheduleProfile};

    /// Bounds for the barrier: controls and paired measurements only.
    fn comfort_bounds(schema: &FeatureSchema, b: Bounds) -> Vec<Option<Bounds>> {
        (0..schema.len())
            .map(|i| match schema.block(i) {
                Block::Controllable => Some(b),
                Block::Uncontrollable if schema.pairing(i).is_some() => Some(b),
                _ => None,
            })
            .collect()
    }

    fn pure_rc_plant() -> PlantConfig {
        PlantConfig {
            power_curve_exponent: 1.0,
            occupancy_heat: 0.0,
            occupant_power: 0.0,
            temp_noise_std: 0.0,
            power_noise_std: 0.0,
            hvac_power_limit: 100_000.0, // never clips
            ..PlantConfig::default_four_zone()
        }
    }

    fn comfort() -> Bounds {
        Bounds::new(15.0, 29.0).unwrap()
    }

    fn pure_rc_corpus(days: usize) -> (crate::profile::ProfileLog, PlantConfig) {
        let cfg = pure_rc_plant();
        let schedules = generate_schedules(days, 4, 600, 31, ScheduleProfile::Constant).unwrap();
        let base = baseline_policy(days, 4, 600, 22.0, 20.0).unwrap();
        let policy = dithered_policy(&base, 2.0, 16.0, 28.0, 77);
        let log = simulate(&cfg, &schedules, &policy, comfort(), 31).unwrap();
        (log, cfg)
    }

    #[test]
    fn identifiability_on_pure_rc_data() {
        let (log, cfg) = pure_rc_corpus(20);
        let scaler = fit_scaler(&log).unwrap();
        let samples = make_windows(&log, 4, &scaler).unwrap();
        let params = fit_rc(&samples, log.schema(), &scaler, 600).unwrap();

        for z in 0..4 {
            let truth = 1.0 / (cfg.r_outdoor[z] * cfg.capacitance[z]);
            let rel = (params.alpha_outdoor[z] - truth).abs() / truth;
            assert!(rel < 0.01, "zone {z}: alpha {} vs {truth}", params.alpha_outdoor[z]);

            let g_truth = cfg.hvac_gain / cfg.capacitance[z];
            let rel_g = (params.tracking_gain[z] - g_truth).abs() / g_truth;
            assert!(rel_g < 0.01, "zone {z}: gain {}", params.tracking_gain[z]);
        }
        // Ring adjacency: direct neighbors recovered, non-neighbors pruned.
        for i in 0..4usize {
            for j in 0..4usize {
                let got = params.alpha_adjacent.get(i, j);
                match cfg.adjacency.resistance(i, j) {
                    Some(r) => {
                        let truth = 1.0 / (r * cfg.capacitance[i]);
                        let rel = (got - truth).abs() / truth;
                        assert!(rel < 0.01, "edge {i}-{j}: {got} vs {truth}");
                    }
                    None => {
                        if i != j {
                            assert_eq!(got, 0.0, "phantom edge {i}-{j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn self_prediction_rmse_is_tiny_on_pure_rc_data() {
        let (log, _) = pure_rc_corpus(12);
        let scaler = fit_scaler(&log).unwrap();
        let samples = make_windows(&log, 4, &scaler).unwrap();
        let (train, test) = split(samples, 1.0 / 6.0, 5).unwrap();
        let params = fit_rc(&train, log.schema(), &scaler, 600).unwrap();
        let model = RcSurrogate::new(params, log.schema(), scaler).unwrap();
        let mut acc = 0.0;
        for s in &test {
            let pred = rc_predict(&model, &s.inputs).unwrap();
            acc += (pred - s.target) * (pred - s.target);
        }
        let rmse = crate::float::sqrt(acc / test.len() as f64);
        assert!(rmse < 1e-3, "self RMSE {rmse}");
    }

    #[test]
    fn degenerate_duplicate_rows_are_rank_deficient() {
        let (log, _) = pure_rc_corpus(2);
        let scaler = fit_scaler(&log).unwrap();
        let samples = make_windows(&log, 2, &scaler).unwrap();
        // Every window replaced by copies of one constant window.
        let frozen: Vec<SequenceSample> = samples
            .iter()
            .map(|s| {
                let mut c = samples[0].clone();
                c.origin_index = s.origin_index;
                c
            })
            .collect();
        assert!(matches!(
            fit_rc(&frozen, log.schema(), &scaler, 600),
            Err(Error::RankDeficient)
        ));
    }

    fn hand_params() -> (RcParams, FeatureSchema, Scaler) {
        let cfg = PlantConfig {
            n_zones: 2,
            capacitance: vec![8.0e6; 2],
            r_outdoor: vec![4.0e-3; 2],
            adjacency: Adjacency::new(&[(0, 1, 2.0e-3)]).unwrap(),
            ..pure_rc_plant()
        };
        let schema = cfg.schema(comfort());
        // Identity scaler.
        let scaler = Scaler {
            shift: vec![0.0; schema.len()],
            scale: vec![1.0; schema.len()],
            power_shift: 0.0,
            power_scale: 1.0,
        };
        let mut adj = Mat::zeros(2, 2);
        let a01 = 1.0 / (2.0e-3 * 8.0e6);
        adj.set(0, 1, a01);
        adj.set(1, 0, a01);
        let params = RcParams {
            n_zones: 2,
            alpha_outdoor: vec![1.0 / (4.0e-3 * 8.0e6); 2],
            alpha_adjacent: adj,
            tracking_gain: vec![2500.0 / 8.0e6; 2],
            power_scale: 3.0,
            exchange_scale: 2.0,
            power_offset: 0.25,
        };
        (params, schema, scaler)
    }

    /// Raw feature row for the 2-zone hand schema:
    /// [temp_0, temp_1, occ_0, occ_1, set_0, set_1, outdoor, solar].
    fn row2(t0: f64, t1: f64, s0: f64, s1: f64, out: f64) -> Vec<f64> {
        vec![t0, t1, 0.0, 0.0, s0, s1, out, 0.0]
    }

    #[test]
    fn equal_temps_and_no_error_leave_only_the_offset() {
        let (params, schema, scaler) = hand_params();
        let model = RcSurrogate::new(params, &schema, scaler).unwrap();
        let w = Mat::from_rows(&[row2(21.0, 21.0, 21.0, 21.0, 21.0)]).unwrap();
        let pred = rc_predict(&model, &w).unwrap();
        assert!((pred - 0.25).abs() < 1e-12);
    }

    #[test]
    fn doubling_outdoor_gap_doubles_the_exchange_contribution() {
        let (params, schema, scaler) = hand_params();
        let model = RcSurrogate::new(params.clone(), &schema, scaler).unwrap();
        // No tracking error, equal zone temps: prediction = offset + exchange.
        let w1 = Mat::from_rows(&[row2(20.0, 20.0, 20.0, 20.0, 24.0)]).unwrap();
        let w2 = Mat::from_rows(&[row2(20.0, 20.0, 20.0, 20.0, 28.0)]).unwrap();
        let e1 = rc_predict(&model, &w1).unwrap() - params.power_offset;
        let e2 = rc_predict(&model, &w2).unwrap() - params.power_offset;
        assert!(e1 > 0.0);
        assert!((e2 - 2.0 * e1).abs() < 1e-12, "{e2} vs 2×{e1}");
    }

    #[test]
    fn two_zone_window_matches_hand_computed_aggregate() {
        let (params, schema, scaler) = hand_params();
        let model = RcSurrogate::new(params.clone(), &schema, scaler).unwrap();
        // 3-row window (T = 2); only the last row matters.
        let w = Mat::from_rows(&[
            row2(20.0, 21.0, 21.0, 22.0, 10.0),
            row2(20.2, 21.1, 21.0, 22.0, 10.5),
            row2(20.4, 21.2, 21.5, 22.5, 11.0),
        ])
        .unwrap();
        let pred = rc_predict(&model, &w).unwrap();

        // By hand, per zone i: track_i = g/C·(set_i − T_i);
        // exch_i = α_out·(T_out − T_i) + α_adj·(T_other − T_i).
        let g_c: f64 = 2500.0 / 8.0e6;
        let a_out: f64 = 1.0 / (4.0e-3 * 8.0e6);
        let a_adj: f64 = 1.0 / (2.0e-3 * 8.0e6);
        let track0: f64 = g_c * (21.5 - 20.4);
        let track1: f64 = g_c * (22.5 - 21.2);
        let exch0: f64 = a_out * (11.0 - 20.4) + a_adj * (21.2 - 20.4);
        let exch1: f64 = a_out * (11.0 - 21.2) + a_adj * (20.4 - 21.2);
        let expected = 3.0 * (track0.abs() + track1.abs())
            + 2.0 * (exch0.abs() + exch1.abs())
            + 0.25;
        assert!((pred - expected).abs() < 1e-12, "{pred} vs {expected}");
    }

    #[test]
    fn prediction_is_affine_on_sign_stable_windows() {
        let (params, schema, scaler) = hand_params();
        let model = RcSurrogate::new(params.clone(), &schema, scaler).unwrap();
        // Heating regime everywhere: setpoints above temps, outdoor below.
        let w1 = Mat::from_rows(&[row2(19.0, 20.0, 21.0, 22.0, 5.0)]).unwrap();
        let w2 = Mat::from_rows(&[row2(20.0, 20.5, 22.0, 23.0, 8.0)]).unwrap();
        let offset = params.power_offset;
        for &alpha in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let mut blend = Mat::zeros(1, w1.cols());
            for c in 0..w1.cols() {
                blend.set(0, c, alpha * w1.get(0, c) + (1.0 - alpha) * w2.get(0, c));
            }
            let lhs = rc_predict(&model, &blend).unwrap() - offset;
            let p1 = rc_predict(&model, &w1).unwrap() - offset;
            let p2 = rc_predict(&model, &w2).unwrap() - offset;
            let rhs = alpha * p1 + (1.0 - alpha) * p2;
            assert!((lhs - rhs).abs() < 1e-12, "alpha {alpha}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn rc_gradient_matches_finite_differences() {
        let (params, schema, _) = hand_params();
        // Non-identity scaler to exercise the chain rule.
        let scaler = Scaler {
            shift: vec![10.0; schema.len()],
            scale: vec![2.5; schema.len()],
            power_shift: 0.0,
            power_scale: 4.0,
        };
        let model = RcSurrogate::new(params, &schema, scaler).unwrap();
        let w = Mat::from_rows(&[
            vec![4.0, 4.4, 0.0, 0.0, 4.6, 4.9, 0.2, 0.0],
            vec![4.1, 4.5, 0.0, 0.0, 4.7, 5.0, 0.3, 0.0],
        ])
        .unwrap();
        let (_, analytic) = model.value_and_grad(&w).unwrap();
        let eps = 1e-6;
        for r in 0..w.rows() {
            for c in 0..w.cols() {
                let mut wp = w.clone();
                wp.set(r, c, w.get(r, c) + eps);
                let mut wm = w.clone();
                wm.set(r, c, w.get(r, c) - eps);
                let fd =
                    (rc_predict(&model, &wp).unwrap() - rc_predict(&model, &wm).unwrap()) / (2.0 * eps);
                let a = analytic.get(r, c);
                assert!(
                    (a - fd).abs() / (a.abs() + 1e-8) < 1e-5,
                    "({r},{c}): {a} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn mpc_on_linear_model_reaches_the_analytic_minimizer() {
        // Single zone, offset 0: prediction = w_track·g·|set − T|, so
        // Σ f² over one window is a smooth convex quadratic minimized at
        // set = T exactly.
        let cfg = PlantConfig {
            n_zones: 1,
            capacitance: vec![8.0e6],
            r_outdoor: vec![4.0e-3],
            adjacency: Adjacency::new(&[]).unwrap(),
            ..pure_rc_plant()
        };
        let schema = cfg.schema(Bounds::new(0.0, 40.0).unwrap());
        let scaler = Scaler {
            shift: vec![0.0; schema.len()],
            scale: vec![1.0; schema.len()],
            power_shift: 0.0,
            power_scale: 1.0,
        };
        let mut adj = Mat::zeros(1, 1);
        adj.set(0, 0, 0.0);
        let params = RcParams {
            n_zones: 1,
            alpha_outdoor: vec![1.0 / (4.0e-3 * 8.0e6)],
            alpha_adjacent: adj,
            tracking_gain: vec![2500.0 / 8.0e6],
            power_scale: 40.0,
            exchange_scale: 0.0,
            power_offset: 0.0,
        };
        let model = RcSurrogate::new(params, &schema, scaler).unwrap();

        let t_meas = 21.3; // measured, but eliminated by the substitution below
        // History row: temp, occ, set, outdoor, solar.
        let history = Mat::from_rows(&[vec![t_meas, 0.0, 21.0, 10.0, 0.0]]).unwrap();
        let mut exog = Mat::zeros(2, schema.len());
        exog.set(0, 3, 10.0);
        exog.set(1, 3, 10.0);
        let bounds = comfort_bounds(&schema, Bounds::new(0.0, 40.0).unwrap());
        let opt = OptConfig {
            learning_rate: 2e3,
            momentum: 0.9,
            max_iters: 4000,
            lambda: 1e-12,
            stall_iters: 0,
            ..OptConfig::default()
        };
        let problem =
            BarrierProblem::new(&model, history.clone(), exog.clone(), &schema, bounds.clone(), opt.lambda, 1)
                .unwrap();
        let init = problem.constant_plan(&[20.0]).unwrap();
        let out = rc_mpc_solve(&model, history, exog, &schema, bounds, 1, init, &opt).unwrap();
        // Propagation substitutes temp_{t} ← set_{t−1} = 21.0 and
        // temp_{t+1} ← plan row 0, so the objective is
        // a²(s₀ − 21)² + a²(s₁ − s₀)², minimized exactly at s₀ = s₁ = 21.
        let _ = t_meas;
        assert!(
            (out.controls.get(0, 0) - 21.0).abs() < 1e-4,
            "got {}",
            out.controls.get(0, 0)
        );
        assert!(
            (out.controls.get(1, 0) - 21.0).abs() < 1e-4,
            "got {}",
            out.controls.get(1, 0)
        );
    }

    #[test]
    fn collapsed_bounds_pin_the_plan() {
        let (params, schema, scaler) = hand_params();
        let model = RcSurrogate::new(params, &schema, scaler).unwrap();
        let history = Mat::from_rows(&[row2(21.0, 21.0, 21.0, 21.0, 10.0)]).unwrap();
        let mut exog = Mat::zeros(2, schema.len());
        exog.set(0, 6, 10.0);
        exog.set(1, 6, 10.0);
        // Near-point interval: every iterate stays pinned at its center.
        let tight = Bounds::new(20.999, 21.001).unwrap();
        let bounds = comfort_bounds(&schema, tight);
        let opt = OptConfig {
            max_iters: 50,
            ..OptConfig::default()
        };
        let problem = BarrierProblem::new(&model, history.clone(), exog.clone(), &schema, bounds.clone(), opt.lambda, 1).unwrap();
        let mut init = problem.constant_plan(&[21.0, 21.0]).unwrap();
        problem.project_interior(&mut init, 0.01);
        let out = rc_mpc_solve(&model, history, exog, &schema, bounds, 1, init, &opt).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((out.controls.get(r, c) - 21.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn mpc_matches_grid_search_on_two_zone_toy() {
        let (mut params, schema, scaler) = hand_params();
        // Pure tracking objective: smooth squared loss around the measured
        // temperatures, so the dense grid and the optimizer must agree.
        params.exchange_scale = 0.0;
        params.power_offset = 0.0;
        let model = RcSurrogate::new(params, &schema, scaler).unwrap();
        let history: Mat = Mat::zeros(0, schema.len());
        let mut exog = Mat::zeros(1, schema.len());
        // temp features come from exog when T = 0 (no history to source the
        // propagation rule from).
        exog.set(0, 0, 20.6);
        exog.set(0, 1, 21.4);
        exog.set(0, 6, 9.0);
        let span = Bounds::new(20.2, 21.8).unwrap();
        let bounds: Vec<Option<Bounds>> = (0..schema.len())
            .map(|i| match schema.block(i) {
                Block::Controllable => Some(span),
                _ => None,
            })
            .collect();
        let opt = OptConfig {
            learning_rate: 1e5,
            momentum: 0.9,
            max_iters: 20_000,
            lambda: 1e-6,
            stall_iters: 0,
            ..OptConfig::default()
        };
        let problem = BarrierProblem::new(&model, history, exog, &schema, bounds, opt.lambda, 0).unwrap();
        let init = problem.constant_plan(&[21.0, 21.0]).unwrap();
        let out = optimize_inputs(&problem, init, &opt).unwrap();

        // Dense grid over the two setpoints at 1e-3 resolution.
        let step = 1e-3;
        let n_grid = (span.width() / step) as usize;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let mut probe = problem.constant_plan(&[21.0, 21.0]).unwrap();
        for a in 1..n_grid {
            for bb in 1..n_grid {
                let s0 = span.lower + a as f64 * step;
                let s1 = span.lower + bb as f64 * step;
                probe.controls.set(0, 0, s0);
                probe.controls.set(0, 1, s1);
                let l = barrier_loss(&problem, &probe).unwrap();
                if l < best.0 {
                    best = (l, s0, s1);
                }
            }
        }
        assert!(
            (out.controls.get(0, 0) - best.1).abs() <= step,
            "{} vs grid {}",
            out.controls.get(0, 0),
            best.1
        );
        assert!(
            (out.controls.get(0, 1) - best.2).abs() <= step,
            "{} vs grid {}",
            out.controls.get(0, 1),
            best.2
        );
    }
}
