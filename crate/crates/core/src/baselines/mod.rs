//! Reference predictors: a constant-velocity Kalman filter, and the network
//! run either directly or autoregressively behind one interface.

mod kalman;

pub use kalman::{kf_fit, kf_rollout, KalmanConfig, KalmanState};

use thiserror::Error;

use crate::codec::{TrajectoryPoint, STEP_SECONDS};
use crate::model::{Model, ModelError, PredictMode, Scalar};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("{got} observations given, at least {need} needed")]
    TooShort { got: usize, need: usize },
    #[error("invalid baseline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anything that maps an observation window to `n` future points.
pub trait Predictor {
    fn name(&self) -> &str;
    fn predict(&self, observed: &[TrajectoryPoint], n: usize) -> Result<Vec<TrajectoryPoint>, BaselineError>;
}

#[derive(Debug, Clone, Default)]
pub struct KalmanPredictor {
    pub config: KalmanConfig,
}

impl Predictor for KalmanPredictor {
    fn name(&self) -> &str {
        "kf"
    }

    fn predict(&self, observed: &[TrajectoryPoint], n: usize) -> Result<Vec<TrajectoryPoint>, BaselineError> {
        let dt = STEP_SECONDS as f64;
        let state = kf_fit(observed, dt, self.config)?;
        Ok(kf_rollout(&state, n, dt))
    }
}

/// The network in one inference mode.
pub struct NetworkPredictor<'a, T> {
    pub model: &'a Model<T>,
    pub mode: PredictMode,
}

impl<'a, T: Scalar> NetworkPredictor<'a, T> {
    pub fn direct(model: &'a Model<T>) -> Self {
        Self {
            model,
            mode: PredictMode::Direct,
        }
    }

    pub fn autoregressive(model: &'a Model<T>) -> Self {
        Self {
            model,
            mode: PredictMode::Autoregressive,
        }
    }
}

impl<T: Scalar> Predictor for NetworkPredictor<'_, T> {
    fn name(&self) -> &str {
        match self.mode {
            PredictMode::Direct => "direct",
            PredictMode::Autoregressive => "autoregressive",
        }
    }

    fn predict(&self, observed: &[TrajectoryPoint], n: usize) -> Result<Vec<TrajectoryPoint>, BaselineError> {
        Ok(self.model.predict(observed, n, self.mode)?)
    }
}
