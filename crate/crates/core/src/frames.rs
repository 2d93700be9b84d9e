//! Timestamped obstacle snapshots: ground truth from the simulator and
//! per-sensor detections from the perception stack.

use crate::geometry::{Extents, Vec2};
use crate::scenario::{Category, ObstacleId};
use serde::{Deserialize, Serialize};

/// One obstacle as the simulator knows it at a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObstacle {
    pub id: ObstacleId,
    pub category: Category,
    pub position: Vec2,
    pub speed: f64,
    pub heading: f64,
    pub footprint: Extents,
}

/// Ground truth at one tick, restricted to obstacles within sensor range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub index: u32,
    pub timestamp: f64,
    pub obstacles: Vec<GtObstacle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensor {
    Lidar,
    Camera,
    Fusion,
}

impl Sensor {
    pub const ALL: [Sensor; 3] = [Sensor::Lidar, Sensor::Camera, Sensor::Fusion];

    pub fn code(self) -> u64 {
        match self {
            Sensor::Lidar => 1,
            Sensor::Camera => 2,
            Sensor::Fusion => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sensor::Lidar => "lidar",
            Sensor::Camera => "camera",
            Sensor::Fusion => "fusion",
        }
    }
}

/// Detection ids at or above this value are phantoms with no ground-truth source.
pub const PHANTOM_ID_BASE: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: u32,
    pub category: Category,
    pub position: Vec2,
    pub speed: f64,
}

impl Detection {
    pub fn is_phantom(&self) -> bool {
        self.id >= PHANTOM_ID_BASE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionFrame {
    pub sensor: Sensor,
    pub timestamp: f64,
    pub detections: Vec<Detection>,
    pub source_frame_index: u32,
}
