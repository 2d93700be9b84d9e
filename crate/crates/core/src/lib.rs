//! Deterministic scenario fuzzing for perception testing.
//!
//! The crate simulates an ego car driving a straight two-lane road among
//! pedestrians, vehicles and animals, runs a configurable perception stack
//! on every tick, and compares what was perceived with what was there. A
//! queue-based evolutionary fuzzer mutates scenes to find ones where
//! perception degrades, guided either by neuron coverage of a small
//! detector network or by the number of missed obstacles.
//!
//! The pipeline, module by module:
//!
//! - [`scenario`]: scenes, validity rules and the TOML scene format
//! - [`mutation`]: the Add / Remove / Swap / Move / ModifyVelocity / Rotate operators
//! - [`sim`] and [`trace`]: the fixed-step simulator, ego planner and trace files
//! - [`perception`]: detectors, fusion and the activation-tracked network
//! - [`matching`] and [`hungarian`]: frame pairing, obstacle assignment and metrics
//! - [`fuzz`](mod@fuzz): the seed queue, fitness functions and campaign loop
//! - [`outcome`]: collision / unnecessary stop / wrong destination verdicts
//! - [`campaign`]: configuration, on-disk layout and the `fuzz`, `replay`
//!   and `report` commands

pub mod campaign;
pub mod frames;
pub mod fuzz;
pub mod geometry;
pub mod hungarian;
pub mod matching;
pub mod mutation;
pub mod outcome;
pub mod perception;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use frames::{Detection, DetectionFrame, Frame, GtObstacle, Sensor};
pub use geometry::{Extents, Vec2};
pub use matching::{MatchReport, Ratio};
pub use mutation::{MutationKind, MutationOp};
pub use perception::{DetectorProfile, DetectorStack};
pub use scenario::{Category, ObstacleSpec, Scenario};
pub use sim::{RoundTrace, SimConfig};
pub use fuzz::{fuzz, FitnessFn, FuzzConfig, FuzzRun};
pub use outcome::{classify, OutcomeReport, Verdict};
