//! Seeded kinematic flight generator: climb, cruise with optional constant
//! rate turns, descent, sampled every 20 s.
//!
//! On straight legs the longitude/latitude rates in degrees per second are
//! held fixed, so positions are exactly affine in time there. Reported
//! east/north speeds are those rates converted at the current latitude.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::track::FlightTrack;
use super::DataError;
use crate::codec::{TrajectoryPoint, STEP_SECONDS};
use crate::geo::{kmh_to_rates, rates_to_kmh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    /// total flights, assigned to days round-robin
    pub flights: usize,
    pub days: usize,
    /// UTC midnight of the first day
    pub start_epoch: i64,
    pub lon_range: [f64; 2],
    pub lat_range: [f64; 2],
    pub start_alt_m: [f64; 2],
    pub cruise_alt_m: [f64; 2],
    pub end_alt_m: [f64; 2],
    /// m/s; `[0, 0]` starts flights at cruise altitude
    pub climb_rate_ms: [f64; 2],
    /// m/s; `[0, 0]` ends flights at the end of cruise
    pub descent_rate_ms: [f64; 2],
    /// largest change of vertical rate per step, m/s
    pub vertical_accel_ms: f64,
    pub cruise_speed_kmh: [f64; 2],
    pub cruise_steps: [usize; 2],
    pub max_turns: usize,
    /// deg/s; `[0, 0]` disables turns
    pub turn_rate_dps: [f64; 2],
    pub turn_steps: [usize; 2],
    /// standard deviations for lon, lat (deg), alt (m), vx, vy, vz (km/h)
    pub noise_std: [f64; 6],
    pub max_steps: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            flights: 360,
            days: 9,
            start_epoch: 1_613_692_800,
            lon_range: [94.616, 113.689],
            lat_range: [19.305, 37.275],
            start_alt_m: [600.0, 1500.0],
            cruise_alt_m: [7000.0, 11000.0],
            end_alt_m: [600.0, 1500.0],
            climb_rate_ms: [6.0, 12.0],
            descent_rate_ms: [5.0, 10.0],
            vertical_accel_ms: 1.5,
            cruise_speed_kmh: [650.0, 900.0],
            cruise_steps: [30, 90],
            max_turns: 3,
            turn_rate_dps: [0.2, 0.5],
            turn_steps: [3, 12],
            noise_std: [0.0; 6],
            max_steps: 400,
        }
    }
}

impl SynthConfig {
    /// Level, straight, noiseless flights at constant speed.
    pub fn constant_velocity() -> Self {
        Self {
            climb_rate_ms: [0.0, 0.0],
            descent_rate_ms: [0.0, 0.0],
            turn_rate_dps: [0.0, 0.0],
            max_turns: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: String| Err(DataError::Config(m));
        let ranges = [
            ("lon_range", self.lon_range),
            ("lat_range", self.lat_range),
            ("start_alt_m", self.start_alt_m),
            ("cruise_alt_m", self.cruise_alt_m),
            ("end_alt_m", self.end_alt_m),
            ("climb_rate_ms", self.climb_rate_ms),
            ("descent_rate_ms", self.descent_rate_ms),
            ("cruise_speed_kmh", self.cruise_speed_kmh),
            ("turn_rate_dps", self.turn_rate_dps),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return fail(format!("{name} must be an ordered finite range, got [{lo}, {hi}]"));
            }
            if lo < 0.0 {
                return fail(format!("{name} must be nonnegative"));
            }
        }
        for (name, [lo, hi]) in [("cruise_steps", self.cruise_steps), ("turn_steps", self.turn_steps)] {
            if lo > hi || hi == 0 {
                return fail(format!("{name} must be an ordered positive range"));
            }
        }
        if self.lat_range[1] >= 85.0 || self.lon_range[1] > 180.0 {
            return fail("ROI must lie within lon [0, 180] and lat [0, 85)".into());
        }
        if self.cruise_alt_m[1] > 20_000.0 || self.cruise_speed_kmh[1] > 1000.0 {
            return fail("cruise altitude or speed outside the representable envelope".into());
        }
        if self.noise_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return fail("noise standard deviations must be nonnegative".into());
        }
        if self.days == 0 {
            return fail("days must be positive".into());
        }
        if !(self.vertical_accel_ms.is_finite() && self.vertical_accel_ms > 0.0) {
            return fail("vertical_accel_ms must be positive".into());
        }
        if self.max_steps == 0 || self.max_steps as i64 * STEP_SECONDS >= 86_400 {
            return fail("max_steps must fit within one day".into());
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn uniform_steps(rng: &mut ChaCha8Rng, [lo, hi]: [usize; 2]) -> usize {
    rng.gen_range(lo..=hi)
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Climb,
    Cruise,
    Descent,
}

/// First-order tracking of a target altitude with bounded vertical rate and
/// bounded change of rate per step.
fn vertical_rate(alt: f64, target: f64, vz: f64, max_up: f64, max_down: f64, accel: f64) -> f64 {
    let wanted = (0.02 * (target - alt)).clamp(-max_down, max_up);
    vz + (wanted - vz).clamp(-accel, accel)
}

fn settled(alt: f64, target: f64, vz: f64) -> bool {
    (alt - target).abs() < 5.0 && vz.abs() < 0.5
}

/// One flight, fully determined by the config seed and the flight index.
pub fn synth_flight(cfg: &SynthConfig, index: usize) -> FlightTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let dt = STEP_SECONDS as f64;
    let callsign = format!("SYN{index:05}");

    let speed = uniform(&mut rng, cfg.cruise_speed_kmh);
    let cruise_alt = uniform(&mut rng, cfg.cruise_alt_m);
    let climb = uniform(&mut rng, cfg.climb_rate_ms);
    let descent = uniform(&mut rng, cfg.descent_rate_ms);
    let end_alt = uniform(&mut rng, cfg.end_alt_m);
    let mut alt = if climb > 0.0 {
        uniform(&mut rng, cfg.start_alt_m)
    } else {
        cruise_alt
    };
    let inner = |[lo, hi]: [f64; 2]| [lo + 0.15 * (hi - lo), hi - 0.15 * (hi - lo)];
    let mut lon = uniform(&mut rng, inner(cfg.lon_range));
    let mut lat = uniform(&mut rng, inner(cfg.lat_range));
    let target_lon = uniform(&mut rng, inner(cfg.lon_range));
    let target_lat = uniform(&mut rng, inner(cfg.lat_range));
    let mut heading = ((target_lon - lon) * lat.to_radians().cos()).atan2(target_lat - lat);

    let cruise_steps = uniform_steps(&mut rng, cfg.cruise_steps);
    let turns = if cfg.turn_rate_dps[1] > 0.0 {
        rng.gen_range(0..=cfg.max_turns)
    } else {
        0
    };
    // turn i starts at the beginning of cruise slot i + 1
    let slot = cruise_steps / (turns + 1);
    let schedule: Vec<(usize, usize, f64)> = (0..turns)
        .map(|i| {
            let len = uniform_steps(&mut rng, cfg.turn_steps).min(slot.max(1));
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (slot * (i + 1), len, sign * uniform(&mut rng, cfg.turn_rate_dps))
        })
        .collect();

    let day = (index % cfg.days) as i64;
    let latest_start = (86_400 - cfg.max_steps as i64 * STEP_SECONDS) / STEP_SECONDS;
    let start = cfg.start_epoch + day * 86_400 + rng.gen_range(0..latest_start) * STEP_SECONDS;

    let noise: Vec<Option<Normal<f64>>> = cfg
        .noise_std
        .iter()
        .map(|&s| (s > 0.0).then(|| Normal::new(0.0, s).expect("valid deviation")))
        .collect();

    let rates_for = |heading: f64, lat: f64| {
        kmh_to_rates(lat, speed * heading.sin(), speed * heading.cos())
    };
    let (mut lon_rate, mut lat_rate) = rates_for(heading, lat);
    let mut phase = if climb > 0.0 { Phase::Climb } else { Phase::Cruise };
    let mut vz = 0.0;
    let mut cruise_step = 0;
    let mut points = Vec::new();

    for step in 0..cfg.max_steps {
        // controls for the step that starts at this point
        match phase {
            Phase::Climb => {
                vz = vertical_rate(alt, cruise_alt, vz, climb, descent.max(climb), cfg.vertical_accel_ms);
            }
            Phase::Cruise => {
                if climb > 0.0 || vz != 0.0 {
                    vz = vertical_rate(alt, cruise_alt, vz, climb, descent.max(climb), cfg.vertical_accel_ms);
                }
                let turning = schedule
                    .iter()
                    .find(|(s, len, _)| cruise_step >= *s && cruise_step < s + len)
                    .map(|t| t.2);
                if let Some(rate) = turning {
                    heading += rate.to_radians() * dt;
                    (lon_rate, lat_rate) = rates_for(heading, lat);
                }
            }
            Phase::Descent => {
                vz = vertical_rate(alt, end_alt, vz, climb.max(descent), descent, cfg.vertical_accel_ms);
            }
        }

        if !(cfg.lon_range[0]..=cfg.lon_range[1]).contains(&lon) || !(cfg.lat_range[0]..=cfg.lat_range[1]).contains(&lat) {
            break;
        }
        let (vx, vy) = rates_to_kmh(lat, lon_rate, lat_rate);
        let mut values = [lon, lat, alt, vx, vy, vz * 3.6];
        for (v, n) in values.iter_mut().zip(&noise) {
            if let Some(n) = n {
                *v += n.sample(&mut rng);
            }
        }
        let [plon, plat, palt, pvx, pvy, pvz] = values;
        points.push(TrajectoryPoint {
            timestamp: start + step as i64 * STEP_SECONDS,
            callsign: callsign.clone(),
            lon: plon,
            lat: plat,
            alt: palt.max(0.0),
            vx: pvx,
            vy: pvy,
            vz: pvz,
        });

        lon += lon_rate * dt;
        lat += lat_rate * dt;
        alt += vz * dt;

        match phase {
            Phase::Climb if settled(alt, cruise_alt, vz) => phase = Phase::Cruise,
            Phase::Cruise => {
                cruise_step += 1;
                if cruise_step >= cruise_steps {
                    if descent > 0.0 {
                        phase = Phase::Descent;
                    } else {
                        break;
                    }
                }
            }
            Phase::Descent if settled(alt, end_alt, vz) => break,
            _ => {}
        }
    }
    FlightTrack { callsign, points }
}

/// Every flight of the config, in index order.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<FlightTrack>, DataError> {
    cfg.validate()?;
    Ok((0..cfg.flights).map(|i| synth_flight(cfg, i)).collect())
}
