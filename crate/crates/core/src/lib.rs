pub mod baselines;
pub mod codec;
pub mod data;
pub mod geo;
pub mod harness;
pub mod model;
