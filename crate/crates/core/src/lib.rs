//! Decision-focused training for economic dispatch and DC optimal power flow.
//!
//! Load and PTDF predictors are trained by differentiating a real-time-market
//! regret through a log-barrier LP solver. Everything in this crate is pure
//! computation over `alloc`; file formats, data ingestion and the command
//! line live in the `dispatchlearn` companion crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod grid;
pub mod linalg;
pub mod market;
pub mod opt;
pub mod predictor;
pub mod regret;
pub mod training;

mod math;

pub use grid::{GeneratorFleet, GridError, Line, NetworkTopology, PtdfMatrix};
pub use linalg::Matrix;
pub use opt::{
    BarrierSettings, BarrierSolution, DispatchInstance, DispatchSolution, LinearProgram, OptError,
    Param,
};
pub use predictor::{ContextSample, OutputHead, PredictionModel};
pub use regret::{PenaltySetting, PriceBook, RampCorrection, RegretValue};
pub use training::{CaseKind, Pipeline, TrainingConfig, TrainingHistory};
