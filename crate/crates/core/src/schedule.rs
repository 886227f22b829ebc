//! Seeded weather, occupancy, and setpoint schedule generators.
//!
//! These stand in for recorded weather files and building management logs:
//! a diurnal (plus slow seasonal) outdoor temperature sinusoid with noise, a
//! daylight solar curve, and a weekday office occupancy shape with the
//! characteristic lunch-hour dip. Day 0 is a Monday.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float;
use crate::linalg::Mat;
use crate::rng::SplitMix64;

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Named schedule shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleProfile {
    /// Office building: daytime occupancy with a noon dip on weekdays,
    /// near-empty nights and weekends, diurnal weather.
    WeekdayOffice,
    /// Every series constant (useful for equilibrium and decay tests).
    Constant,
}

impl ScheduleProfile {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "weekday-office" => Ok(ScheduleProfile::WeekdayOffice),
            "constant" => Ok(ScheduleProfile::Constant),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleProfile::WeekdayOffice => "weekday-office",
            ScheduleProfile::Constant => "constant",
        }
    }
}

/// Exogenous driving series for a simulation, all sharing one timestep and
/// length: outdoor dry-bulb temperature, solar irradiance, per-zone occupancy
/// and per-zone appliance load.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSet {
    pub dt_s: u64,
    pub outdoor_c: Vec<f64>,
    pub solar_wm2: Vec<f64>,
    /// steps × zones, persons.
    pub occupancy: Mat,
    /// steps × zones, W.
    pub appliance_w: Mat,
}

/// Borrowed view of one schedule step.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleRow<'a> {
    pub outdoor_c: f64,
    pub solar_wm2: f64,
    pub occupancy: &'a [f64],
    pub appliance_w: &'a [f64],
}

impl ScheduleSet {
    pub fn len(&self) -> usize {
        self.outdoor_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outdoor_c.is_empty()
    }

    pub fn n_zones(&self) -> usize {
        self.occupancy.cols()
    }

    pub fn row(&self, step: usize) -> ScheduleRow<'_> {
        ScheduleRow {
            outdoor_c: self.outdoor_c[step],
            solar_wm2: self.solar_wm2[step],
            occupancy: self.occupancy.row(step),
            appliance_w: self.appliance_w.row(step),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.solar_wm2.len() != n {
            return Err(Error::LengthMismatch {
                what: "solar series",
                expected: n,
                got: self.solar_wm2.len(),
            });
        }
        if self.occupancy.rows() != n || self.appliance_w.rows() != n {
            return Err(Error::LengthMismatch {
                what: "occupancy/appliance series",
                expected: n,
                got: self.occupancy.rows().min(self.appliance_w.rows()),
            });
        }
        if self.occupancy.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("occupancy must be >= 0".into()));
        }
        if self.solar_wm2.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("solar must be >= 0".into()));
        }
        Ok(())
    }
}

/// Weekday occupancy fraction by hour of day: ramp in, full morning, lunch
/// dip, full afternoon, ramp out.
fn office_occupancy_fraction(hour: f64) -> f64 {
    if !(7.0..19.0).contains(&hour) {
        0.0
    } else if hour < 9.0 {
        (hour - 7.0) / 2.0
    } else if hour < 12.0 {
        1.0
    } else if hour < 13.0 {
        0.4
    } else if hour < 17.0 {
        1.0
    } else {
        (19.0 - hour) / 2.0
    }
}

const PEAK_OCCUPANTS: f64 = 10.0;
const APPLIANCE_BASE_W: f64 = 200.0;
const APPLIANCE_PER_PERSON_W: f64 = 90.0;

/// Generate exogenous schedules. Deterministic for fixed `(days, n_zones,
/// dt_s, seed, profile)`.
pub fn generate_schedules(
    days: usize,
    n_zones: usize,
    dt_s: u64,
    seed: u64,
    profile: ScheduleProfile,
) -> Result<ScheduleSet> {
    if days == 0 {
        return Err(Error::InvalidConfig("days must be >= 1".into()));
    }
    if dt_s == 0 || SECONDS_PER_DAY % dt_s != 0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "dt {dt_s} s must divide a day"
        )));
    }
    let steps_per_day = (SECONDS_PER_DAY / dt_s) as usize;
    let steps = steps_per_day * days;

    let mut outdoor = Vec::with_capacity(steps);
    let mut solar = Vec::with_capacity(steps);
    let mut occupancy = Mat::zeros(steps, n_zones);
    let mut appliance = Mat::zeros(steps, n_zones);

    match profile {
        ScheduleProfile::Constant => {
            for _ in 0..steps {
                outdoor.push(10.0);
                solar.push(0.0);
            }
            for r in 0..steps {
                appliance.row_mut(r).iter_mut().for_each(|v| *v = APPLIANCE_BASE_W);
            }
        }
        ScheduleProfile::WeekdayOffice => {
            let mut weather_rng = SplitMix64::from_seed_stream(seed, 0x57454154);
            let mut occ_rng = SplitMix64::from_seed_stream(seed, 0x4f434355);
            for step in 0..steps {
                let day = step / steps_per_day;
                let hour = (step % steps_per_day) as f64 * dt_s as f64 / 3600.0;
                let weekday = day % 7 < 5;
                let season = float::cos(2.0 * core::f64::consts::PI * day as f64 / 365.0);

                // Mild maritime climate: cold Januaries, warm Julys, afternoon peak.
                let t_out = 11.0 - 7.0 * season
                    - 4.0 * float::cos(2.0 * core::f64::consts::PI * (hour - 15.0) / 24.0)
                    + 0.6 * weather_rng.next_normal();
                outdoor.push(t_out);

                let daylight = float::sin(core::f64::consts::PI * (hour - 6.0) / 12.0).max(0.0);
                let s = daylight * (280.0 + 200.0 * (1.0 - season) * 0.5)
                    * (0.85 + 0.15 * weather_rng.next_f64());
                solar.push(s.max(0.0));

                let base_frac = if weekday {
                    office_occupancy_fraction(hour)
                } else {
                    0.0
                };
                for z in 0..n_zones {
                    let jitter = if base_frac > 0.0 {
                        (1.0 + 0.08 * occ_rng.next_normal()).max(0.0)
                    } else {
                        0.0
                    };
                    let occ = PEAK_OCCUPANTS * base_frac * jitter;
                    occupancy.set(step, z, occ);
                    appliance.set(step, z, APPLIANCE_BASE_W + APPLIANCE_PER_PERSON_W * occ);
                }
            }
        }
    }

    let set = ScheduleSet {
        dt_s,
        outdoor_c: outdoor,
        solar_wm2: solar,
        occupancy,
        appliance_w: appliance,
    };
    set.validate()?;
    Ok(set)
}

/// Baseline operating policy: `occupied_c` during weekday business hours,
/// `setback_c` at night and on weekends. Returns steps × zones setpoints.
pub fn baseline_policy(
    days: usize,
    n_zones: usize,
    dt_s: u64,
    occupied_c: f64,
    setback_c: f64,
) -> Result<Mat> {
    if days == 0 {
        return Err(Error::InvalidConfig("days must be >= 1".into()));
    }
    if dt_s == 0 || SECONDS_PER_DAY % dt_s != 0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "dt {dt_s} s must divide a day"
        )));
    }
    let steps_per_day = (SECONDS_PER_DAY / dt_s) as usize;
    let steps = steps_per_day * days;
    let mut policy = Mat::zeros(steps, n_zones);
    for step in 0..steps {
        let day = step / steps_per_day;
        let hour = (step % steps_per_day) as f64 * dt_s as f64 / 3600.0;
        let occupied = day % 7 < 5 && (7.0..19.0).contains(&hour);
        let sp = if occupied { occupied_c } else { setback_c };
        policy.row_mut(step).iter_mut().for_each(|v| *v = sp);
    }
    Ok(policy)
}

/// Overlay a slow, per-zone random walk on a base policy, clamped to
/// [lo, hi]. Used to excite the training corpus so the surrogate sees
/// setpoint/temperature combinations beyond the nominal schedule.
pub fn dithered_policy(base: &Mat, amplitude_c: f64, lo: f64, hi: f64, seed: u64) -> Mat {
    let mut out = base.clone();
    let zones = base.cols();
    for z in 0..zones {
        let mut rng = SplitMix64::from_seed_stream(seed, 0x44495448 + z as u64);
        let mut offset = 0.0_f64;
        for step in 0..base.rows() {
            // AR(1) walk: slow drift, pulled back toward zero.
            offset = 0.98 * offset + 0.2 * amplitude_c * rng.next_normal();
            let centered = offset.clamp(-amplitude_c, amplitude_c);
            let v = (base.get(step, z) + centered).clamp(lo, hi);
            out.set(step, z, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_is_constant() {
        let s = generate_schedules(1, 2, 600, 9, ScheduleProfile::Constant).unwrap();
        assert_eq!(s.len(), 144);
        assert!(s.outdoor_c.iter().all(|&v| v == s.outdoor_c[0]));
        assert!(s.solar_wm2.iter().all(|&v| v == 0.0));
        assert!(s.occupancy.data().iter().all(|&v| v == 0.0));
        assert!(s.appliance_w.data().iter().all(|&v| v == APPLIANCE_BASE_W));
    }

    #[test]
    fn same_seed_reproduces_series() {
        let a = generate_schedules(3, 4, 600, 123, ScheduleProfile::WeekdayOffice).unwrap();
        let b = generate_schedules(3, 4, 600, 123, ScheduleProfile::WeekdayOffice).unwrap();
        assert_eq!(a, b);
        let c = generate_schedules(3, 4, 600, 124, ScheduleProfile::WeekdayOffice).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn weekend_noon_is_far_below_weekday_morning() {
        // Day 0 is Monday, so Wednesday is day 2 and Saturday is day 5.
        let s = generate_schedules(7, 1, 600, 5, ScheduleProfile::WeekdayOffice).unwrap();
        let steps_per_day = 144;
        let wed_10 = s.occupancy.get(2 * steps_per_day + 60, 0);
        let sat_12 = s.occupancy.get(5 * steps_per_day + 72, 0);
        assert!(wed_10 > 0.0);
        assert!(sat_12 < 0.1 * wed_10, "sat {sat_12} vs wed {wed_10}");
    }

    #[test]
    fn weekday_noon_dips_below_morning() {
        let s = generate_schedules(1, 1, 600, 5, ScheduleProfile::WeekdayOffice).unwrap();
        let at_10 = s.occupancy.get(60, 0);
        let at_1230 = s.occupancy.get(75, 0);
        assert!(at_1230 < 0.6 * at_10, "noon {at_1230} vs morning {at_10}");
    }

    #[test]
    fn unknown_profile_name_errors() {
        assert!(matches!(
            ScheduleProfile::parse("three-day-week"),
            Err(Error::UnknownProfile(_))
        ));
    }

    #[test]
    fn zero_days_rejected() {
        assert!(generate_schedules(0, 1, 600, 1, ScheduleProfile::Constant).is_err());
    }

    #[test]
    fn baseline_policy_switches_between_levels() {
        let p = baseline_policy(7, 2, 600, 22.0, 19.5).unwrap();
        // Monday 10:00 occupied; Monday 03:00 and Saturday 10:00 set back.
        assert_eq!(p.get(60, 0), 22.0);
        assert_eq!(p.get(18, 0), 19.5);
        assert_eq!(p.get(5 * 144 + 60, 1), 19.5);
    }

    #[test]
    fn dithered_policy_stays_inside_limits() {
        let base = baseline_policy(7, 2, 600, 22.0, 19.5).unwrap();
        let d = dithered_policy(&base, 1.5, 18.2, 25.8, 77);
        for step in 0..d.rows() {
            for z in 0..d.cols() {
                let v = d.get(step, z);
                assert!((18.2..=25.8).contains(&v));
            }
        }
        // Actually perturbs something.
        assert_ne!(base, d);
        // Deterministic.
        assert_eq!(d, dithered_policy(&base, 1.5, 18.2, 25.8, 77));
    }
}
