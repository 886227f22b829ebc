//! CSV formats: the profile log (header `time,P,<prefixed feature names>`),
//! per-step episode logs, and long-format plot tables. All floats print in
//! Rust's shortest round-trip form, so identical data gives identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use hvacopt_core::control::EpisodeMetrics;
use hvacopt_core::profile::ProfileLog;
use hvacopt_core::schema::FeatureSchema;

use crate::error::{PipelineError, PipelineResult};

/// Serialize a profile log; the schema is recoverable from the header.
pub fn profile_to_csv(log: &ProfileLog) -> String {
    let mut out = String::new();
    out.push_str("time,P");
    for name in log.schema().prefixed_names() {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for r in 0..log.len() {
        let _ = write!(out, "{},{}", log.time(r), log.power(r));
        for v in log.row(r) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_profile(path: &Path, log: &ProfileLog) -> PipelineResult<()> {
    std::fs::write(path, profile_to_csv(log))?;
    Ok(())
}

/// Parse a profile CSV back into a log. Bounds and pairing come from the
/// header naming convention; callers re-apply configured bounds afterwards.
pub fn read_profile(path: &Path) -> PipelineResult<ProfileLog> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::data(format!("cannot read {}: {e}", path.display())))?;
    parse_profile(&text).map_err(|e| PipelineError::data(format!("{}: {e}", path.display())))
}

fn parse_profile(text: &str) -> Result<ProfileLog, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let mut cols = header.split(',');
    if cols.next() != Some("time") || cols.next() != Some("P") {
        return Err("header must start with `time,P`".into());
    }
    let names: Vec<&str> = cols.collect();
    let schema = FeatureSchema::from_prefixed_names(&names).map_err(|e| e.to_string())?;
    let width = schema.len();
    let mut log = ProfileLog::new(schema);
    let mut features = vec![0.0; width];
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let time: u64 = parts
            .next()
            .ok_or_else(|| format!("line {}: missing time", lineno + 2))?
            .parse()
            .map_err(|e| format!("line {}: bad time: {e}", lineno + 2))?;
        let power: f64 = parts
            .next()
            .ok_or_else(|| format!("line {}: missing power", lineno + 2))?
            .parse()
            .map_err(|e| format!("line {}: bad power: {e}", lineno + 2))?;
        for (i, slot) in features.iter_mut().enumerate() {
            *slot = parts
                .next()
                .ok_or_else(|| format!("line {}: missing feature {i}", lineno + 2))?
                .parse()
                .map_err(|e| format!("line {}: bad feature {i}: {e}", lineno + 2))?;
        }
        if parts.next().is_some() {
            return Err(format!("line {}: too many columns", lineno + 2));
        }
        log.push(time, &features, power).map_err(|e| e.to_string())?;
    }
    Ok(log)
}

/// Per-step episode log: plant-format power and states plus controller
/// columns (commands and the per-step comfort violation count).
pub fn episode_to_csv(metrics: &EpisodeMetrics, dt_s: u64) -> String {
    let zones = metrics.setpoints.cols();
    let mut out = String::new();
    out.push_str("time,P");
    for z in 0..zones {
        let _ = write!(out, ",uc:temp_{z}");
    }
    for z in 0..zones {
        let _ = write!(out, ",c:set_{z}");
    }
    out.push_str(",ctl:violations\n");
    for r in 0..metrics.eval_steps {
        let _ = write!(out, "{},{}", (metrics.horizon + r) as u64 * dt_s, metrics.power[r]);
        for z in 0..zones {
            let _ = write!(out, ",{}", metrics.zone_temps.get(r, z));
        }
        for z in 0..zones {
            let _ = write!(out, ",{}", metrics.setpoints.get(r, z));
        }
        let violations = (0..zones)
            .filter(|&z| {
                let t = metrics.zone_temps.get(r, z);
                t < metrics.comfort_lower || t > metrics.comfort_upper
            })
            .count();
        let _ = writeln!(out, ",{violations}");
    }
    out
}

/// Long-format table for plots: one `(series, step, value)` row per point.
pub fn long_format_csv(series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::from("series,step,value\n");
    for (name, values) in series {
        for (step, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{name},{step},{v}");
        }
    }
    out
}
