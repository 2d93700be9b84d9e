//! The six scene mutation operators.
//!
//! Sampling and application are split: [`sample_operator`] draws an operator
//! and all of its parameters from an explicit [`Rng`],
//! retrying placements until the child would be valid, while
//! [`apply_mutation`] is a pure function of `(parent, op)`.

use crate::geometry::{normalize_heading, Vec2};
use crate::rng::Rng;
use crate::scenario::{
    prototypes_of, validate, Category, ObstacleId, ObstacleSpec, Scenario, Violation,
    MAX_OBSTACLES,
};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use thiserror::Error;

/// Sensor range of the ego car, shared by `Add` placement and the simulator.
pub const DETECTION_RANGE: f64 = 60.0;
/// Closest an added obstacle may be placed to the ego center.
pub const MIN_ADD_DISTANCE: f64 = 2.0;
pub const PLACEMENT_RETRIES: usize = 100;
/// Chance that `ModifyVelocity` stops the obstacle outright.
const STOP_PROBABILITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationKind {
    Add,
    Remove,
    Swap,
    Move,
    ModifyVelocity,
    Rotate,
}

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::Add,
        MutationKind::Remove,
        MutationKind::Swap,
        MutationKind::Move,
        MutationKind::ModifyVelocity,
        MutationKind::Rotate,
    ];

    /// Whether the operator can act on a scene with `count` obstacles.
    pub fn applicable(self, count: usize) -> bool {
        match self {
            MutationKind::Add => count < MAX_OBSTACLES,
            MutationKind::Swap => count >= 2,
            _ => count >= 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn unit(self) -> Vec2 {
        match self {
            Direction::North => Vec2::new(0.0, 1.0),
            Direction::South => Vec2::new(0.0, -1.0),
            Direction::East => Vec2::new(1.0, 0.0),
            Direction::West => Vec2::new(-1.0, 0.0),
        }
    }
}

/// An operator together with its sampled parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum MutationOp {
    Add { obstacle: ObstacleSpec },
    Remove { id: ObstacleId },
    Swap { a: ObstacleId, b: ObstacleId },
    Move { id: ObstacleId, direction: Direction },
    ModifyVelocity { id: ObstacleId, speed: f64 },
    Rotate { id: ObstacleId },
}

impl MutationOp {
    pub fn kind(&self) -> MutationKind {
        match self {
            MutationOp::Add { .. } => MutationKind::Add,
            MutationOp::Remove { .. } => MutationKind::Remove,
            MutationOp::Swap { .. } => MutationKind::Swap,
            MutationOp::Move { .. } => MutationKind::Move,
            MutationOp::ModifyVelocity { .. } => MutationKind::ModifyVelocity,
            MutationOp::Rotate { .. } => MutationKind::Rotate,
        }
    }

    /// Samples an `Add` on `parent`, falling back to a placement far down the
    /// road if every attempt collides. Used to build seed scenes.
    pub(crate) fn sample_add(rng: &mut Rng, parent: &Scenario) -> MutationOp {
        sample_params(rng, parent, MutationKind::Add).unwrap_or_else(|_| {
            let mut obstacle = random_obstacle(rng, parent.next_obstacle_id());
            obstacle.position = parent.ego.position + Vec2::new(40.0, 5.0);
            MutationOp::Add { obstacle }
        })
    }
}

impl fmt::Display for MutationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MutationOp::Add { obstacle } => write!(
                f,
                "add({} {} at {:.2},{:.2})",
                obstacle.id, obstacle.prototype, obstacle.position.x, obstacle.position.y
            ),
            MutationOp::Remove { id } => write!(f, "remove({id})"),
            MutationOp::Swap { a, b } => write!(f, "swap({a},{b})"),
            MutationOp::Move { id, direction } => write!(f, "move({id},{direction:?})"),
            MutationOp::ModifyVelocity { id, speed } => write!(f, "velocity({id},{speed:.3})"),
            MutationOp::Rotate { id } => write!(f, "rotate({id})"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MutationError {
    #[error("no mutation operator applies to a scene with {0} obstacles")]
    NoApplicableOperator(usize),
    #[error("no valid placement for {kind:?} after {attempts} attempts")]
    PlacementExhausted { kind: MutationKind, attempts: usize },
    #[error("{kind:?} does not apply: obstacle {id} not in scene")]
    UnknownObstacle { kind: MutationKind, id: ObstacleId },
    #[error("{0:?} does not apply to this scene")]
    NotApplicable(MutationKind),
    #[error("mutation produced an invalid scene: {0:?}")]
    InvalidChild(Vec<Violation>),
}

/// Picks an operator uniformly among those applicable to `parent`, then draws
/// its parameters.
pub fn sample_operator(rng: &mut Rng, parent: &Scenario) -> Result<MutationOp, MutationError> {
    let count = parent.obstacles.len();
    let kinds: Vec<MutationKind> = MutationKind::ALL
        .into_iter()
        .filter(|k| k.applicable(count))
        .collect();
    let kind = *kinds
        .choose(rng)
        .ok_or(MutationError::NoApplicableOperator(count))?;
    sample_params(rng, parent, kind)
}

/// Draws parameters for a fixed operator kind, retrying any placement that
/// would yield an invalid child.
pub fn sample_params(
    rng: &mut Rng,
    parent: &Scenario,
    kind: MutationKind,
) -> Result<MutationOp, MutationError> {
    if !kind.applicable(parent.obstacles.len()) {
        return Err(MutationError::NotApplicable(kind));
    }
    let ids: Vec<ObstacleId> = parent.obstacles.iter().map(|o| o.id).collect();
    let pick = |rng: &mut Rng| *ids.choose(rng).expect("applicable ops have obstacles");

    match kind {
        MutationKind::Remove => Ok(MutationOp::Remove { id: pick(rng) }),
        MutationKind::Rotate => Ok(MutationOp::Rotate { id: pick(rng) }),
        MutationKind::ModifyVelocity => {
            let id = pick(rng);
            let cat = parent.obstacle(id).expect("picked from parent").category;
            let speed = if rng.gen_bool(STOP_PROBABILITY) {
                0.0
            } else {
                rng.gen_range(0.0..=cat.max_speed())
            };
            Ok(MutationOp::ModifyVelocity { id, speed })
        }
        MutationKind::Add | MutationKind::Swap | MutationKind::Move => {
            for _ in 0..PLACEMENT_RETRIES {
                let op = match kind {
                    MutationKind::Add => {
                        let mut obstacle = random_obstacle(rng, parent.next_obstacle_id());
                        obstacle.position = sample_in_range(rng, parent.ego.position);
                        MutationOp::Add { obstacle }
                    }
                    MutationKind::Swap => {
                        let mut two = ids.choose_multiple(rng, 2);
                        let (a, b) = (*two.next().unwrap(), *two.next().unwrap());
                        MutationOp::Swap { a, b }
                    }
                    _ => MutationOp::Move {
                        id: pick(rng),
                        direction: *Direction::ALL.choose(rng).unwrap(),
                    },
                };
                if apply_mutation(parent, &op).is_ok() {
                    return Ok(op);
                }
            }
            Err(MutationError::PlacementExhausted {
                kind,
                attempts: PLACEMENT_RETRIES,
            })
        }
    }
}

/// A fresh obstacle: category uniform, prototype uniform within it, random
/// heading and speed. Its position is left at the origin for the caller.
fn random_obstacle(rng: &mut Rng, id: ObstacleId) -> ObstacleSpec {
    let category = *Category::ALL.choose(rng).unwrap();
    let protos: Vec<_> = prototypes_of(category).collect();
    let proto = protos.choose(rng).unwrap();
    let mut o = ObstacleSpec::from_prototype(id, proto, Vec2::default());
    o.heading = normalize_heading(rng.gen_range(0.0..TAU));
    o.speed = rng.gen_range(0.0..=category.max_speed());
    o
}

/// Uniform over the annulus `[MIN_ADD_DISTANCE, DETECTION_RANGE]` around `center`.
fn sample_in_range(rng: &mut Rng, center: Vec2) -> Vec2 {
    let (r0, r1) = (MIN_ADD_DISTANCE, DETECTION_RANGE);
    let r = (rng.gen_range(0.0..1.0) * (r1 * r1 - r0 * r0) + r0 * r0).sqrt();
    let theta = rng.gen_range(0.0..TAU);
    center + Vec2::from_heading(theta) * r
}

/// Applies `op` to `parent`. Pure; fails if the operator does not fit the
/// scene or the child would break a scenario invariant.
pub fn apply_mutation(parent: &Scenario, op: &MutationOp) -> Result<Scenario, MutationError> {
    let kind = op.kind();
    let mut child = parent.clone();
    let index_of = |id: ObstacleId| {
        child_index(&parent.obstacles, id).ok_or(MutationError::UnknownObstacle { kind, id })
    };

    match op {
        MutationOp::Add { obstacle } => {
            if !kind.applicable(parent.obstacles.len()) {
                return Err(MutationError::NotApplicable(kind));
            }
            if obstacle.position.distance(parent.ego.position) > DETECTION_RANGE {
                return Err(MutationError::NotApplicable(kind));
            }
            child.obstacles.push(obstacle.clone());
            child.canonicalize();
        }
        MutationOp::Remove { id } => {
            let i = index_of(*id)?;
            child.obstacles.remove(i);
        }
        MutationOp::Swap { a, b } => {
            let (i, j) = (index_of(*a)?, index_of(*b)?);
            if i == j {
                return Err(MutationError::NotApplicable(kind));
            }
            let pa = child.obstacles[i].position;
            child.obstacles[i].position = child.obstacles[j].position;
            child.obstacles[j].position = pa;
        }
        MutationOp::Move { id, direction } => {
            let i = index_of(*id)?;
            let o = &mut child.obstacles[i];
            o.position = o.position + direction.unit();
        }
        MutationOp::ModifyVelocity { id, speed } => {
            let i = index_of(*id)?;
            child.obstacles[i].speed = *speed;
        }
        MutationOp::Rotate { id } => {
            let i = index_of(*id)?;
            let o = &mut child.obstacles[i];
            o.heading = normalize_heading(o.heading - FRAC_PI_2);
        }
    }

    let violations = validate(&child);
    if violations.is_empty() {
        Ok(child)
    } else {
        Err(MutationError::InvalidChild(violations))
    }
}

fn child_index(obstacles: &[ObstacleSpec], id: ObstacleId) -> Option<usize> {
    obstacles.iter().position(|o| o.id == id)
}

/// Samples and applies one mutation.
pub fn mutate(rng: &mut Rng, parent: &Scenario) -> Result<(MutationOp, Scenario), MutationError> {
    let op = sample_operator(rng, parent)?;
    let child = apply_mutation(parent, &op)?;
    Ok((op, child))
}
