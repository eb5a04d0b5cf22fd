//! Randomized Kaczmarz iteration for noisy consistent systems, with an
//! optimal relaxation schedule and its Lambert-W error bound.

pub mod experiments;
pub mod generators;
pub mod lambert_w;
pub mod linalg;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod solver;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    LambertW(#[from] lambert_w::LambertWError),
    #[error(transparent)]
    Schedule(#[from] schedule::ScheduleError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    Sampler(#[from] sampler::SamplerError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Generator(#[from] generators::GenError),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
