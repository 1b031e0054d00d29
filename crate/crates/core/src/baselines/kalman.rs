//! Constant-velocity Kalman filter over geodetic positions.
//!
//! State: lon, lat (degrees), alt (meters) and their rates per second.
//! Measurements are positions only.

use nalgebra::{Matrix3x6, Matrix6, Matrix6x3, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::codec::TrajectoryPoint;
use crate::geo::rates_to_kmh;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// horizontal process noise, degrees squared per step
    pub q_horizontal: f64,
    /// vertical process noise, meters squared per step
    pub q_vertical: f64,
    /// horizontal measurement noise, degrees squared
    pub r_horizontal: f64,
    /// vertical measurement noise, meters squared
    pub r_vertical: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            q_horizontal: 1e-6,
            q_vertical: 1.0,
            r_horizontal: 1e-6,
            r_vertical: 1.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        let all = [self.q_horizontal, self.q_vertical, self.r_horizontal, self.r_vertical];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(BaselineError::Config(format!("noise scales must be finite and nonnegative: {self:?}")))
        }
    }

    fn q_axis(&self, axis: usize) -> f64 {
        if axis < 2 {
            self.q_horizontal
        } else {
            self.q_vertical
        }
    }

    fn r_axis(&self, axis: usize) -> f64 {
        if axis < 2 {
            self.r_horizontal
        } else {
            self.r_vertical
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    /// lon, lat, alt, then their rates per second
    pub x: Vector6<f64>,
    pub p: Matrix6<f64>,
    pub config: KalmanConfig,
    /// time of the last update
    pub timestamp: i64,
    pub callsign: String,
}

fn transition(dt: f64) -> Matrix6<f64> {
    let mut f = Matrix6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(cfg: &KalmanConfig, dt: f64) -> Matrix6<f64> {
    let mut q = Matrix6::zeros();
    for i in 0..3 {
        let s = cfg.q_axis(i);
        q[(i, i)] = s / 4.0;
        q[(i, i + 3)] = s / (2.0 * dt);
        q[(i + 3, i)] = s / (2.0 * dt);
        q[(i + 3, i + 3)] = s / (dt * dt);
    }
    q
}

fn observation() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

fn position(p: &TrajectoryPoint) -> Vector3<f64> {
    Vector3::new(p.lon, p.lat, p.alt)
}

impl KalmanState {
    pub fn trace(&self) -> f64 {
        self.p.trace()
    }

    pub fn predict(&mut self, dt: f64) {
        let f = transition(dt);
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + process_noise(&self.config, dt);
    }

    pub fn update(&mut self, z: &Vector3<f64>) -> Result<(), BaselineError> {
        let h = observation();
        let r = SMatrix::<f64, 3, 3>::from_diagonal(&Vector3::from_fn(|i, _| self.config.r_axis(i)));
        let innovation = z - h * self.x;
        let s = h * self.p * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(BaselineError::SingularInnovation)?;
        let k: Matrix6x3<f64> = self.p * h.transpose() * s_inv;
        self.x += k * innovation;
        // Joseph form keeps the covariance symmetric positive semidefinite
        let i_kh = Matrix6::identity() - k * h;
        self.p = i_kh * self.p * i_kh.transpose() + k * r * k.transpose();
        self.p = (self.p + self.p.transpose()) * 0.5;
        Ok(())
    }
}

/// Initializes at the second observation by two-point differencing and
/// filters the rest.
pub fn kf_fit(observations: &[TrajectoryPoint], dt: f64, config: KalmanConfig) -> Result<KalmanState, BaselineError> {
    config.validate()?;
    if observations.len() < 2 {
        return Err(BaselineError::TooShort {
            got: observations.len(),
            need: 2,
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(BaselineError::Config(format!("time step must be positive, got {dt}")));
    }
    let p1 = position(&observations[1]);
    let v1 = (p1 - position(&observations[0])) / dt;
    let mut x = Vector6::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&p1);
    x.fixed_rows_mut::<3>(3).copy_from(&v1);
    let mut p = Matrix6::zeros();
    for i in 0..3 {
        let r = config.r_axis(i);
        p[(i, i)] = r;
        p[(i, i + 3)] = r / dt;
        p[(i + 3, i)] = r / dt;
        p[(i + 3, i + 3)] = 2.0 * r / (dt * dt);
    }
    let mut state = KalmanState {
        x,
        p,
        config,
        timestamp: observations[1].timestamp,
        callsign: observations[1].callsign.clone(),
    };
    for obs in &observations[2..] {
        state.predict(dt);
        state.update(&position(obs))?;
        state.timestamp = obs.timestamp;
    }
    Ok(state)
}

/// `n` prediction-only steps with constant velocity.
pub fn kf_rollout(state: &KalmanState, n: usize, dt: f64) -> Vec<TrajectoryPoint> {
    let v = state.x.fixed_rows::<3>(3);
    (1..=n)
        .map(|j| {
            let t = j as f64 * dt;
            let lat = state.x[1] + t * v[1];
            let (vx, vy) = rates_to_kmh(lat, v[0], v[1]);
            TrajectoryPoint {
                timestamp: state.timestamp + (j as f64 * dt).round() as i64,
                callsign: state.callsign.clone(),
                lon: state.x[0] + t * v[0],
                lat,
                alt: state.x[2] + t * v[2],
                vx,
                vy,
                vz: v[2] * 3.6,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(len: usize, rate: [f64; 3]) -> Vec<TrajectoryPoint> {
        (0..len)
            .map(|i| {
                let t = i as f64 * 20.0;
                TrajectoryPoint {
                    timestamp: 1_000 + 20 * i as i64,
                    callsign: "T1".into(),
                    lon: 100.0 + rate[0] * t,
                    lat: 30.0 + rate[1] * t,
                    alt: 9000.0 + rate[2] * t,
                    vx: 0.0,
                    vy: 0.0,
                    vz: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn exact_on_constant_velocity() {
        let rate = [0.0021, -0.0013, 4.0];
        let obs = track(9, rate);
        let st = kf_fit(&obs, 20.0, KalmanConfig::default()).unwrap();
        for i in 0..3 {
            assert!((st.x[i + 3] - rate[i]).abs() < 1e-9);
        }
        let pred = kf_rollout(&st, 15, 20.0);
        let truth = track(24, rate);
        for (j, p) in pred.iter().enumerate() {
            let t = &truth[9 + j];
            assert_eq!(p.timestamp, t.timestamp);
            assert!((p.lon - t.lon).abs() < 1e-9 && (p.lat - t.lat).abs() < 1e-9);
            assert!((p.alt - t.alt).abs() < 1e-6);
            assert!((p.vz - 14.4).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_and_zero_velocity() {
        let st = kf_fit(&track(9, [0.0; 3]), 20.0, KalmanConfig::default()).unwrap();
        assert!(st.x.fixed_rows::<3>(3).norm() < 1e-9);
        let pred = kf_rollout(&st, 4, 20.0);
        assert!(pred.iter().all(|p| p.lon == 100.0 && p.lat == 30.0 && p.alt == 9000.0));
    }

    #[test]
    fn rollout_is_affine() {
        let st = kf_fit(&track(5, [0.001, 0.002, -3.0]), 20.0, KalmanConfig::default()).unwrap();
        let pred = kf_rollout(&st, 15, 20.0);
        for j in 1..15 {
            let expected = st.x[0] + (j + 1) as f64 * 20.0 * st.x[3];
            assert!((pred[j].lon - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn covariance_is_symmetric() {
        let mut obs = track(9, [0.001, 0.001, 1.0]);
        for (i, p) in obs.iter_mut().enumerate() {
            p.lon += 1e-4 * ((i * 7 % 5) as f64 - 2.0);
            p.alt += 3.0 * ((i * 3 % 4) as f64 - 1.5);
        }
        let st = kf_fit(&obs, 20.0, KalmanConfig::default()).unwrap();
        assert!((st.p - st.p.transpose()).abs().max() < 1e-9);
        assert!((0..6).all(|i| st.p[(i, i)] >= 0.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kf_fit(&track(1, [0.0; 3]), 20.0, KalmanConfig::default()),
            Err(BaselineError::TooShort { got: 1, .. })
        ));
        let singular = KalmanConfig {
            q_horizontal: 0.0,
            q_vertical: 0.0,
            r_horizontal: 0.0,
            r_vertical: 0.0,
        };
        assert!(matches!(
            kf_fit(&track(4, [0.0; 3]), 20.0, singular),
            Err(BaselineError::SingularInnovation)
        ));
    }
}
