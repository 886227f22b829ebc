//! The five pipeline commands. Each consumes the experiment config plus the
//! artifacts of earlier stages, writes its outputs under the workspace
//! directory, and records a manifest of content hashes so later stages (and
//! humans) can tell when an input changed.

use std::path::PathBuf;

use hvacopt_core::barrier::OptConfig;
use hvacopt_core::control::{
    compare, constraint_sweep, model_fit_report, run_episode, ControllerSpec, EpisodeMetrics,
    Scenario,
};
use hvacopt_core::dataset::{fit_scaler, make_windows, split, Scaler, SequenceSample};
use hvacopt_core::plant::{simulate, PlantConfig};
use hvacopt_core::profile::ProfileLog;
use hvacopt_core::rc::{fit_rc, RcSurrogate};
use hvacopt_core::rnn::{train, RnnModel};
use hvacopt_core::schedule::{
    baseline_policy, dithered_policy, generate_schedules, ScheduleSet, SECONDS_PER_DAY,
};
use hvacopt_core::schema::{Bounds, FeatureSchema};
use hvacopt_core::Mat;

use crate::artifacts::{
    fnv1a_hex, load_json, save_json, Checkpoint, RcParamsFile, RunManifest, SplitManifest,
};
use crate::config::ExperimentConfig;
use crate::csvio::{episode_to_csv, long_format_csv, read_profile, write_profile};
use crate::error::{PipelineError, PipelineResult};
use crate::svg::line_chart;

/// Resolved output directory plus the config that drives every command.
pub struct Workspace {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    config_hash: String,
}

impl Workspace {
    pub fn new(config: ExperimentConfig, dir: PathBuf) -> PipelineResult<Self> {
        config.validate()?;
        std::fs::create_dir_all(&dir)?;
        let serialized = toml::to_string(&config)
            .map_err(|e| PipelineError::config(format!("cannot serialize config: {e}")))?;
        Ok(Workspace {
            dir,
            config_hash: fnv1a_hex(serialized.as_bytes()),
            config,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.config_hash.clone())
    }
}

pub const PROFILE_CSV: &str = "profile.csv";
pub const CHECKPOINT_JSON: &str = "model.json";
pub const HISTORY_JSON: &str = "train_history.json";
pub const SPLIT_JSON: &str = "split.json";
pub const RC_JSON: &str = "rc_params.json";

fn steps_per_day(cfg: &ExperimentConfig) -> usize {
    (SECONDS_PER_DAY / cfg.plant.dt_s) as usize
}

/// Training-corpus policy: the baseline office schedule with a seeded
/// excitation dither, kept inside the comfort band.
fn corpus_policy(cfg: &ExperimentConfig, days: usize) -> PipelineResult<Mat> {
    let base = baseline_policy(
        days,
        cfg.plant.n_zones,
        cfg.plant.dt_s,
        cfg.data.occupied_setpoint,
        cfg.data.setback_setpoint,
    )?;
    let comfort = cfg.comfort();
    Ok(dithered_policy(
        &base,
        cfg.data.dither,
        comfort.lower + 0.2,
        comfort.upper - 0.2,
        cfg.data.seed.wrapping_add(1),
    ))
}

/// Generate the training corpus and write the profile CSV.
pub fn cmd_simulate(ws: &Workspace) -> PipelineResult<()> {
    let cfg = &ws.config;
    let plant = cfg.plant.to_core()?;
    let schedules = generate_schedules(
        cfg.data.days,
        cfg.plant.n_zones,
        cfg.plant.dt_s,
        cfg.data.seed,
        cfg.profile(),
    )?;
    let policy = corpus_policy(cfg, cfg.data.days)?;
    let log = simulate(&plant, &schedules, &policy, cfg.comfort(), cfg.data.seed)?;

    let path = ws.path(PROFILE_CSV);
    write_profile(&path, &log)?;

    let mean_power = if log.is_empty() {
        0.0
    } else {
        log.powers().iter().sum::<f64>() / log.len() as f64
    };
    println!(
        "simulate: {} rows ({} days at {} s), mean power {:.1} W -> {}",
        log.len(),
        cfg.data.days,
        cfg.plant.dt_s,
        mean_power,
        path.display()
    );

    let mut manifest = ws.manifest("simulate");
    manifest.seed("data", cfg.data.seed);
    manifest.output(&path)?;
    manifest.write(&ws.dir)?;
    Ok(())
}

/// Corpus → scaler → windows → split, identically re-derivable by every
/// stage that needs the dataset.
pub fn load_dataset(
    ws: &Workspace,
) -> PipelineResult<(ProfileLog, Scaler, Vec<SequenceSample>, Vec<SequenceSample>)> {
    let cfg = &ws.config;
    let log = read_profile(&ws.path(PROFILE_CSV))?;
    let scaler = fit_scaler(&log)?;
    let samples = make_windows(&log, cfg.data.horizon_steps, &scaler)?;
    let (train_set, test_set) = split(samples, cfg.data.test_fraction, cfg.data.seed)?;
    Ok((log, scaler, train_set, test_set))
}

/// Train the recurrent surrogate and write the checkpoint + loss history.
pub fn cmd_train(ws: &Workspace) -> PipelineResult<()> {
    let cfg = &ws.config;
    let (log, scaler, train_set, test_set) = load_dataset(ws)?;

    let split_path = ws.path(SPLIT_JSON);
    save_json(
        &split_path,
        &SplitManifest {
            seed: cfg.data.seed,
            test_fraction: cfg.data.test_fraction,
            train_origins: train_set.iter().map(|s| s.origin_index).collect(),
            test_origins: test_set.iter().map(|s| s.origin_index).collect(),
        },
    )?;

    let model = RnnModel::init(
        log.schema().len(),
        cfg.rnn.hidden_dim,
        &cfg.rnn.head_widths,
        cfg.rnn.dropout,
        cfg.rnn.seed,
    )?;
    let train_cfg = cfg.rnn.train_config();
    let (best, report) = train(model, &train_set, &test_set, &train_cfg)?;

    let ckpt_path = ws.path(CHECKPOINT_JSON);
    save_json(
        &ckpt_path,
        &Checkpoint::from_model(&best, cfg.rnn.seed, log.schema(), &scaler),
    )?;
    let hist_path = ws.path(HISTORY_JSON);
    save_json(&hist_path, &report)?;

    let first = report.train_loss.first().copied().unwrap_or(0.0);
    let last = report.train_loss.last().copied().unwrap_or(0.0);
    println!(
        "train: {} epochs over {} samples; train loss {:.6} -> {:.6} ({}), best val RMSE {:.6} (epoch {})",
        report.train_loss.len(),
        train_set.len(),
        first,
        last,
        if last <= first { "improved" } else { "worsened" },
        report.best_val_loss.max(0.0).sqrt(),
        report.best_epoch
    );

    let mut manifest = ws.manifest("train");
    manifest.seed("data", cfg.data.seed);
    manifest.seed("rnn", cfg.rnn.seed);
    manifest.input(&ws.path(PROFILE_CSV))?;
    manifest.output(&ckpt_path)?;
    manifest.output(&hist_path)?;
    manifest.output(&split_path)?;
    manifest.write(&ws.dir)?;
    Ok(())
}

/// Fit the RC baseline on the training split and write its parameters.
pub fn cmd_fit_rc(ws: &Workspace) -> PipelineResult<()> {
    let cfg = &ws.config;
    let (log, scaler, train_set, _) = load_dataset(ws)?;
    let params = fit_rc(&train_set, log.schema(), &scaler, cfg.plant.dt_s)?;

    let path = ws.path(RC_JSON);
    save_json(&path, &RcParamsFile::new(params.clone()))?;
    println!(
        "fit-rc: {} zones; alpha_outdoor[0] {:.3e} 1/s, tracking_gain[0] {:.3e} 1/s, power scale {:.4} -> {}",
        params.n_zones,
        params.alpha_outdoor[0],
        params.tracking_gain[0],
        params.power_scale,
        path.display()
    );

    let mut manifest = ws.manifest("fit-rc");
    manifest.seed("data", cfg.data.seed);
    manifest.input(&ws.path(PROFILE_CSV))?;
    manifest.output(&path)?;
    manifest.write(&ws.dir)?;
    Ok(())
}

/// Everything loaded once for closed-loop work.
pub struct EvalContext {
    pub plant: PlantConfig,
    pub schema: FeatureSchema,
    pub scaler: Scaler,
    pub model: RnnModel,
    pub rc: RcSurrogate,
    pub opt: OptConfig,
}

pub fn load_eval_context(ws: &Workspace) -> PipelineResult<EvalContext> {
    let cfg = &ws.config;
    let plant = cfg.plant.to_core()?;
    let schema = plant.schema(cfg.comfort());

    let ckpt: Checkpoint = load_json(&ws.path(CHECKPOINT_JSON))?;
    if ckpt.feature_names != schema.prefixed_names() {
        return Err(PipelineError::data(
            "checkpoint feature layout does not match the configured plant".to_string(),
        ));
    }
    let model = ckpt.to_model()?;
    let scaler = ckpt.scaler.clone();

    let rc_file: RcParamsFile = load_json(&ws.path(RC_JSON))?;
    let rc = RcSurrogate::new(rc_file.params, &schema, scaler.clone())?;

    Ok(EvalContext {
        plant,
        schema,
        scaler,
        model,
        rc,
        opt: cfg.opt.opt_config(),
    })
}

/// Evaluation scenario pieces for a given number of days and comfort band.
pub struct EvalScenario {
    pub schedules: ScheduleSet,
    pub baseline: Mat,
    pub id: String,
}

pub fn eval_scenario(cfg: &ExperimentConfig, days: usize, comfort: Bounds) -> PipelineResult<EvalScenario> {
    let schedules = generate_schedules(
        days,
        cfg.plant.n_zones,
        cfg.plant.dt_s,
        cfg.opt.eval_seed,
        cfg.profile(),
    )?;
    let baseline = baseline_policy(
        days,
        cfg.plant.n_zones,
        cfg.plant.dt_s,
        cfg.data.occupied_setpoint,
        cfg.data.setback_setpoint,
    )?;
    Ok(EvalScenario {
        schedules,
        baseline,
        id: format!(
            "days={days},seed={},T={},comfort=[{},{}]",
            cfg.opt.eval_seed, cfg.data.horizon_steps, comfort.lower, comfort.upper
        ),
    })
}

fn metrics_file(label: &str) -> String {
    format!("metrics_{}.json", label.replace('-', "_"))
}

fn episode_file(label: &str) -> String {
    format!("episode_{}.csv", label.replace('-', "_"))
}

/// Closed-loop comparison: fixed-schedule, rc-mpc, rnn-barrier on identical
/// seeds and schedules.
pub fn cmd_control(ws: &Workspace) -> PipelineResult<()> {
    let cfg = &ws.config;
    let ctx = load_eval_context(ws)?;
    let comfort = cfg.comfort();
    let ev = eval_scenario(cfg, cfg.opt.eval_days, comfort)?;
    let scenario = Scenario {
        plant: &ctx.plant,
        schedules: &ev.schedules,
        baseline_policy: &ev.baseline,
        comfort,
        horizon: cfg.data.horizon_steps,
        plant_seed: cfg.opt.eval_seed,
        schema: &ctx.schema,
        scaler: &ctx.scaler,
        id: ev.id.clone(),
    };

    let controllers: [ControllerSpec<'_>; 3] = [
        ControllerSpec::fixed(),
        ControllerSpec::rc_mpc(&ctx.rc, ctx.opt.clone()),
        ControllerSpec::rnn_barrier(&ctx.model, ctx.opt.clone()),
    ];

    let mut manifest = ws.manifest("control");
    manifest.seed("eval", cfg.opt.eval_seed);
    manifest.input(&ws.path(CHECKPOINT_JSON))?;
    manifest.input(&ws.path(RC_JSON))?;
    for controller in &controllers {
        let metrics = run_episode(&scenario, controller)?;
        let label = metrics.controller.clone();
        println!(
            "control[{label}]: total energy {:.0} W·steps, sum P^2 {:.3e}, comfort violations {} (max {:.2} C), fallbacks {}",
            metrics.total_energy,
            metrics.sum_squared_power,
            metrics.comfort_violations,
            metrics.max_violation,
            metrics.fallback_steps
        );
        let mpath = ws.path(&metrics_file(&label));
        save_json(&mpath, &metrics)?;
        let cpath = ws.path(&episode_file(&label));
        std::fs::write(&cpath, episode_to_csv(&metrics, cfg.plant.dt_s))?;
        manifest.output(&mpath)?;
        manifest.output(&cpath)?;
    }
    manifest.write(&ws.dir)?;
    Ok(())
}

/// Reports: model-fit comparison, energy-reduction comparisons, constraint
/// sweep, and the four plot-ready tables (plus SVG renders).
pub fn cmd_report(ws: &Workspace) -> PipelineResult<()> {
    let cfg = &ws.config;
    let ctx = load_eval_context(ws)?;
    let mut manifest = ws.manifest("report");
    manifest.seed("eval", cfg.opt.eval_seed);
    manifest.input(&ws.path(CHECKPOINT_JSON))?;
    manifest.input(&ws.path(RC_JSON))?;

    // Model fit on the shared test split.
    let (_, _, _, test_set) = load_dataset(ws)?;
    let fit = model_fit_report(&ctx.model, &ctx.rc, &test_set)?;
    println!(
        "report[fit]: RNN RMSE {:.4}, RC RMSE {:.4}, improvement {:.2}%",
        fit.rnn_rmse, fit.rc_rmse, fit.improvement_pct
    );
    let fit_path = ws.path("fit_report.json");
    save_json(&fit_path, &fit)?;
    manifest.output(&fit_path)?;

    // Fig: predictions vs measurements over the earliest test windows
    // (three days' worth of samples), ordered by window origin.
    let mut residuals = fit.residuals.clone();
    residuals.sort_by_key(|p| p.origin_index);
    let take = residuals.len().min(3 * steps_per_day(cfg));
    let fig_fit = [
        (
            "measured".to_string(),
            residuals[..take].iter().map(|p| p.actual).collect::<Vec<_>>(),
        ),
        (
            "rnn".to_string(),
            residuals[..take].iter().map(|p| p.rnn).collect::<Vec<_>>(),
        ),
        (
            "rc".to_string(),
            residuals[..take].iter().map(|p| p.rc).collect::<Vec<_>>(),
        ),
    ];
    write_fig(ws, &mut manifest, "fig_fit", "Model fit on test windows", "normalized power", &fig_fit)?;

    // Energy comparison of the stored closed-loop episodes.
    let fixed: EpisodeMetrics = load_json(&ws.path(&metrics_file("fixed-schedule")))?;
    let rc_m: EpisodeMetrics = load_json(&ws.path(&metrics_file("rc-mpc")))?;
    let rnn_m: EpisodeMetrics = load_json(&ws.path(&metrics_file("rnn-barrier")))?;
    for m in [&fixed, &rc_m, &rnn_m] {
        manifest.input(&ws.path(&metrics_file(&m.controller)))?;
    }
    let cmp_rnn = compare(&fixed, &rnn_m)?;
    let cmp_rc = compare(&fixed, &rc_m)?;
    println!(
        "report[energy]: rnn-barrier {:.2}% reduction, rc-mpc {:.2}% reduction (vs fixed-schedule)",
        cmp_rnn.energy_reduction_pct, cmp_rc.energy_reduction_pct
    );
    let cmp_rnn_path = ws.path("compare_rnn_barrier.json");
    save_json(&cmp_rnn_path, &cmp_rnn)?;
    manifest.output(&cmp_rnn_path)?;
    let cmp_rc_path = ws.path("compare_rc_mpc.json");
    save_json(&cmp_rc_path, &cmp_rc)?;
    manifest.output(&cmp_rc_path)?;

    let fig_energy = [
        ("fixed-schedule".to_string(), fixed.power.clone()),
        ("rc-mpc".to_string(), rc_m.power.clone()),
        ("rnn-barrier".to_string(), rnn_m.power.clone()),
    ];
    write_fig(ws, &mut manifest, "fig_energy", "Closed-loop power", "W", &fig_energy)?;

    // Per-zone setpoint profiles chosen by the recurrent controller.
    let zones = rnn_m.setpoints.cols();
    let fig_setpoints: Vec<(String, Vec<f64>)> = (0..zones)
        .map(|z| {
            (
                format!("zone_{z}"),
                (0..rnn_m.eval_steps).map(|r| rnn_m.setpoints.get(r, z)).collect(),
            )
        })
        .collect();
    write_fig(
        ws,
        &mut manifest,
        "fig_setpoints",
        "Optimized setpoint schedule",
        "deg C",
        &fig_setpoints,
    )?;

    // Constraint-interval sweep with the recurrent controller.
    let bound_sets: Vec<Bounds> = cfg
        .opt
        .sweep
        .iter()
        .map(|b| Bounds::new(b[0], b[1]).map_err(PipelineError::from))
        .collect::<PipelineResult<_>>()?;
    let ev = eval_scenario(cfg, cfg.opt.sweep_days, cfg.comfort())?;
    let scenario = Scenario {
        plant: &ctx.plant,
        schedules: &ev.schedules,
        baseline_policy: &ev.baseline,
        comfort: cfg.comfort(),
        horizon: cfg.data.horizon_steps,
        plant_seed: cfg.opt.eval_seed,
        schema: &ctx.schema,
        scaler: &ctx.scaler,
        id: ev.id.clone(),
    };
    let controller = ControllerSpec::rnn_barrier(&ctx.model, ctx.opt.clone());
    let sweep_metrics = constraint_sweep(&scenario, &controller, &bound_sets)?;

    let mut sweep_csv = String::from("lower,upper,total_energy,sum_squared_power,comfort_violations,fallback_steps\n");
    let mut fig_sweep: Vec<(String, Vec<f64>)> = Vec::new();
    for m in &sweep_metrics {
        use std::fmt::Write as _;
        let _ = writeln!(
            sweep_csv,
            "{},{},{},{},{},{}",
            m.comfort_lower,
            m.comfort_upper,
            m.total_energy,
            m.sum_squared_power,
            m.comfort_violations,
            m.fallback_steps
        );
        println!(
            "report[sweep [{}, {}]]: total energy {:.0} W·steps",
            m.comfort_lower, m.comfort_upper, m.total_energy
        );
        fig_sweep.push((
            format!("[{},{}]", m.comfort_lower, m.comfort_upper),
            m.power.clone(),
        ));
    }
    let sweep_path = ws.path("sweep.csv");
    std::fs::write(&sweep_path, sweep_csv)?;
    manifest.output(&sweep_path)?;
    write_fig(
        ws,
        &mut manifest,
        "fig_sweep",
        "Constraint interval sweep",
        "W",
        &fig_sweep,
    )?;

    manifest.write(&ws.dir)?;
    Ok(())
}

fn write_fig(
    ws: &Workspace,
    manifest: &mut RunManifest,
    stem: &str,
    title: &str,
    y_label: &str,
    series: &[(String, Vec<f64>)],
) -> PipelineResult<()> {
    let csv_path = ws.path(&format!("{stem}.csv"));
    std::fs::write(&csv_path, long_format_csv(series))?;
    manifest.output(&csv_path)?;
    let svg_path = ws.path(&format!("{stem}.svg"));
    std::fs::write(&svg_path, line_chart(title, y_label, series))?;
    manifest.output(&svg_path)?;
    Ok(())
}

/// The whole default pipeline, in order.
pub fn run_all(ws: &Workspace) -> PipelineResult<()> {
    cmd_simulate(ws)?;
    cmd_train(ws)?;
    cmd_fit_rc(ws)?;
    cmd_control(ws)?;
    cmd_report(ws)?;
    Ok(())
}
