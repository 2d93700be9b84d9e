//! The perception stack under test: per-sensor detectors, a fusion stage,
//! and an activation-tracked neural network over an occupancy grid.
//!
//! Detection is stochastic but reproducible. Whether a sensor sees obstacle
//! `o` at frame `k` is decided by hashing `(round seed, k, o, sensor)`, so the
//! same scenario and seed always yield the same streams while an obstacle
//! near the edge of reliability flickers in and out across frames.

use crate::frames::{Detection, DetectionFrame, Frame, Sensor, PHANTOM_ID_BASE};
use crate::geometry::{Pose, Vec2};
use crate::mutation::DETECTION_RANGE;
use crate::rng::{hash_words, rng_from_seed, unit_from_hash};
use crate::scenario::Category;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PerceptionError {
    #[error("fusion inputs come from different frames: lidar {lidar}, camera {camera}")]
    FrameMismatch { lidar: u32, camera: u32 },
    #[error("detector profile error: {0}")]
    Profile(String),
}

/// Detection model of one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SensorProfile {
    /// Detection probability for a vehicle at zero distance.
    pub base: f64,
    /// Probability lost between zero distance and the sensor range limit.
    pub distance_slope: f64,
    pub pedestrian_penalty: f64,
    pub vehicle_penalty: f64,
    pub animal_penalty: f64,
    /// Beyond this distance (meters) nothing is detected.
    pub max_range: f64,
    /// Half-width of the uniform position noise per axis, meters.
    pub noise: f64,
    /// Per-frame probability of reporting an obstacle that does not exist.
    pub phantom_rate: f64,
    /// Phantoms appear this far ahead of the ego, meters.
    pub phantom_ahead: [f64; 2],
    /// and within this lateral offset of its heading line.
    pub phantom_lateral: f64,
}

impl SensorProfile {
    pub fn lidar() -> Self {
        Self {
            base: 0.95,
            distance_slope: 0.3,
            pedestrian_penalty: 0.15,
            vehicle_penalty: 0.0,
            animal_penalty: 0.3,
            max_range: DETECTION_RANGE,
            noise: 0.2,
            phantom_rate: 0.005,
            phantom_ahead: [6.0, 14.0],
            phantom_lateral: 1.0,
        }
    }

    pub fn camera() -> Self {
        Self {
            base: 0.75,
            distance_slope: 0.4,
            ..Self::lidar()
        }
    }

    /// Sees everything in range, exactly, and never hallucinates.
    pub fn perfect() -> Self {
        Self {
            base: 1.0,
            distance_slope: 0.0,
            pedestrian_penalty: 0.0,
            vehicle_penalty: 0.0,
            animal_penalty: 0.0,
            max_range: DETECTION_RANGE,
            noise: 0.0,
            phantom_rate: 0.0,
            phantom_ahead: [6.0, 14.0],
            phantom_lateral: 1.0,
        }
    }

    pub fn blind() -> Self {
        Self {
            base: 0.0,
            ..Self::perfect()
        }
    }

    pub fn penalty(&self, category: Category) -> f64 {
        match category {
            Category::Pedestrian => self.pedestrian_penalty,
            Category::Vehicle => self.vehicle_penalty,
            Category::Animal => self.animal_penalty,
        }
    }

    /// `clamp(base − slope·d/R − penalty, 0, 1)`, zero past `max_range`.
    pub fn probability(&self, distance: f64, category: Category) -> f64 {
        if distance > self.max_range {
            return 0.0;
        }
        (self.base - self.distance_slope * distance / DETECTION_RANGE - self.penalty(category))
            .clamp(0.0, 1.0)
    }

    fn check(&self, name: &str) -> Result<(), PerceptionError> {
        let bad = |what: &str| Err(PerceptionError::Profile(format!("{name}.{what}")));
        let values = [
            self.base,
            self.distance_slope,
            self.pedestrian_penalty,
            self.vehicle_penalty,
            self.animal_penalty,
            self.max_range,
            self.noise,
            self.phantom_rate,
            self.phantom_ahead[0],
            self.phantom_ahead[1],
            self.phantom_lateral,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if self.noise < 0.0 {
            return bad("noise must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.phantom_rate) {
            return bad("phantomRate must be in [0, 1]");
        }
        if self.phantom_ahead[0] > self.phantom_ahead[1] {
            return bad("phantomAhead must be [near, far]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FusionPolicy {
    /// Union of both sensors; camera detections that agree in category with
    /// a lidar detection inside the dedup radius are dropped.
    UnionDedup,
    /// Lidar alone, falling back to the camera when lidar reports nothing.
    LidarPriority,
}

/// Full perception configuration; stored as a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DetectorProfile {
    pub lidar: SensorProfile,
    pub camera: SensorProfile,
    pub fusion: FusionPolicy,
    pub dedup_radius: f64,
    /// Seconds between a ground-truth tick and its detection frames.
    pub latency: f64,
    /// Seeds the network weights and is mixed into detection hashes.
    #[serde(with = "crate::scenario::seed_serde")]
    pub seed: u64,
    /// Neuron activation threshold on the per-channel spatial mean.
    pub threshold: f64,
    pub track_neurons: bool,
}

impl Default for DetectorProfile {
    fn default() -> Self {
        Self {
            lidar: SensorProfile::lidar(),
            camera: SensorProfile::camera(),
            fusion: FusionPolicy::UnionDedup,
            dedup_radius: 1.0,
            latency: 0.02,
            seed: 0x5eed,
            threshold: 0.1,
            track_neurons: true,
        }
    }
}

impl DetectorProfile {
    pub fn perfect() -> Self {
        Self {
            lidar: SensorProfile::perfect(),
            camera: SensorProfile::perfect(),
            ..Self::default()
        }
    }

    pub fn blind() -> Self {
        Self {
            lidar: SensorProfile::blind(),
            camera: SensorProfile::blind(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        self.lidar.check("lidar")?;
        self.camera.check("camera")?;
        if !(self.latency > 0.0 && self.latency.is_finite()) {
            return Err(PerceptionError::Profile("latency must be > 0".into()));
        }
        if !(self.dedup_radius >= 0.0 && self.dedup_radius.is_finite()) {
            return Err(PerceptionError::Profile("dedupRadius must be >= 0".into()));
        }
        if !self.threshold.is_finite() {
            return Err(PerceptionError::Profile("threshold must be finite".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PerceptionError> {
        let p: Self = toml::from_str(text).map_err(|e| PerceptionError::Profile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn build(&self) -> DetectorStack {
        DetectorStack {
            lidar: Detector::new(Sensor::Lidar, self.lidar.clone()),
            camera: Detector::new(Sensor::Camera, self.camera.clone()),
            fusion: self.fusion,
            dedup_radius: self.dedup_radius,
            latency: self.latency,
            tracker: self
                .track_neurons
                .then(|| NeuralTracker::new(Network::random(self.seed), self.threshold)),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Detector {
    pub sensor: Sensor,
    pub profile: SensorProfile,
}

impl Detector {
    pub fn new(sensor: Sensor, profile: SensorProfile) -> Self {
        Self { sensor, profile }
    }

    /// Produces this sensor's detections for a range-filtered ground-truth frame.
    pub fn detect(&self, gt: &Frame, ego: Pose, round_seed: u64, latency: f64) -> DetectionFrame {
        let p = &self.profile;
        let sensor = self.sensor.code();
        let draw = |id: u64, purpose: u64| {
            unit_from_hash(hash_words(&[round_seed, gt.index as u64, id, sensor, purpose]))
        };

        let mut detections = Vec::new();
        for o in &gt.obstacles {
            let distance = o.position.distance(ego.position);
            if draw(o.id as u64, 0) >= p.probability(distance, o.category) {
                continue;
            }
            let jitter = |purpose| (2.0 * draw(o.id as u64, purpose) - 1.0) * p.noise;
            detections.push(Detection {
                id: o.id,
                category: o.category,
                position: o.position + Vec2::new(jitter(1), jitter(2)),
                speed: o.speed,
            });
        }

        let phantom_key = u64::MAX;
        if draw(phantom_key, 0) < p.phantom_rate {
            let [near, far] = p.phantom_ahead;
            let ahead = near + (far - near) * draw(phantom_key, 1);
            let lateral = (2.0 * draw(phantom_key, 2) - 1.0) * p.phantom_lateral;
            let category = Category::ALL[(draw(phantom_key, 3) * 3.0) as usize % 3];
            detections.push(Detection {
                id: phantom_id(self.sensor, gt.index),
                category,
                position: ego.to_map(Vec2::new(ahead, lateral)),
                speed: 0.0,
            });
        }

        DetectionFrame {
            sensor: self.sensor,
            timestamp: gt.timestamp + latency,
            detections,
            source_frame_index: gt.index,
        }
    }
}

fn phantom_id(sensor: Sensor, frame: u32) -> u32 {
    let lane = match sensor {
        Sensor::Lidar => 0,
        Sensor::Camera => 1,
        Sensor::Fusion => 2,
    };
    PHANTOM_ID_BASE + lane * 100_000_000 + frame
}

/// Merges one lidar and one camera frame of the same tick.
pub fn fuse(
    lidar: &DetectionFrame,
    camera: &DetectionFrame,
    policy: FusionPolicy,
    dedup_radius: f64,
) -> Result<DetectionFrame, PerceptionError> {
    if lidar.source_frame_index != camera.source_frame_index {
        return Err(PerceptionError::FrameMismatch {
            lidar: lidar.source_frame_index,
            camera: camera.source_frame_index,
        });
    }
    let detections = match policy {
        FusionPolicy::LidarPriority => {
            if lidar.detections.is_empty() {
                camera.detections.clone()
            } else {
                lidar.detections.clone()
            }
        }
        FusionPolicy::UnionDedup => {
            let mut out = lidar.detections.clone();
            for c in &camera.detections {
                let duplicate = lidar.detections.iter().any(|l| {
                    l.category == c.category && l.position.distance(c.position) <= dedup_radius
                });
                if !duplicate && out.iter().all(|d| d.id != c.id) {
                    out.push(c.clone());
                }
            }
            out.sort_by_key(|d| d.id);
            out
        }
    };
    Ok(DetectionFrame {
        sensor: Sensor::Fusion,
        timestamp: lidar.timestamp.max(camera.timestamp),
        detections,
        source_frame_index: lidar.source_frame_index,
    })
}

/// The configured perception stack of one simulation.
#[derive(Debug, Clone)]
pub struct DetectorStack {
    pub lidar: Detector,
    pub camera: Detector,
    pub fusion: FusionPolicy,
    pub dedup_radius: f64,
    pub latency: f64,
    pub tracker: Option<NeuralTracker>,
    pub seed: u64,
}

impl DetectorStack {
    /// Lidar, camera and fused frames for one ground-truth frame, in [`Sensor::ALL`] order.
    pub fn perceive(
        &self,
        gt: &Frame,
        ego: Pose,
        round_seed: u64,
    ) -> Result<[DetectionFrame; 3], PerceptionError> {
        let lidar = self.lidar.detect(gt, ego, round_seed, self.latency);
        let camera = self.camera.detect(gt, ego, round_seed, self.latency);
        let fused = fuse(&lidar, &camera, self.fusion, self.dedup_radius)?;
        Ok([lidar, camera, fused])
    }
}

// ---------------------------------------------------------------------------
// Neural detector with activation tracking

pub const GRID: usize = 16;
pub const INPUT_CHANNELS: usize = 4;
pub const HIDDEN: usize = 32;
/// Neurons are the channels of both hidden layers.
pub const NEURON_COUNT: usize = 2 * HIDDEN;
const CELL_FORWARD: f64 = 4.0;
const CELL_LATERAL: f64 = 2.0;
const GRID_BEHIND: f64 = 8.0;

pub type NeuronId = u16;

/// A fixed feed-forward network over an ego-centric occupancy grid:
/// 3×3 convolution to 32 channels, 1×1 convolution to 32 channels, and a
/// per-cell sigmoid score head. All hidden units use ReLU.
#[derive(Debug, Clone)]
pub struct Network {
    conv: Vec<f32>, // [HIDDEN][INPUT_CHANNELS][3][3]
    conv_bias: [f32; HIDDEN],
    mix: Vec<f32>, // [HIDDEN][HIDDEN]
    mix_bias: [f32; HIDDEN],
    head: [f32; HIDDEN],
    head_bias: f32,
}

/// Per-layer outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct Activations {
    /// Mean over grid cells for each neuron id.
    pub channel_means: [f32; NEURON_COUNT],
    /// Score per grid cell, row-major.
    pub scores: Vec<f32>,
}

impl Network {
    pub fn random(seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut uniform = |n: usize, a: f32| -> Vec<f32> { (0..n).map(|_| rng.gen_range(-a..a)).collect() };
        let conv = uniform(HIDDEN * INPUT_CHANNELS * 9, 1.5);
        let conv_bias: [f32; HIDDEN] = uniform(HIDDEN, 0.25).iter().map(|b| b - 0.15).collect::<Vec<_>>().try_into().unwrap();
        let mix = uniform(HIDDEN * HIDDEN, 0.6);
        let mix_bias: [f32; HIDDEN] = uniform(HIDDEN, 0.25).iter().map(|b| b - 0.2).collect::<Vec<_>>().try_into().unwrap();
        let head: [f32; HIDDEN] = uniform(HIDDEN, 0.5).try_into().unwrap();
        let head_bias = uniform(1, 0.5)[0];
        Self { conv, conv_bias, mix, mix_bias, head, head_bias }
    }

    pub fn without_biases(mut self) -> Self {
        self.conv_bias = [0.0; HIDDEN];
        self.mix_bias = [0.0; HIDDEN];
        self.head_bias = 0.0;
        self
    }

    /// `input` is `[INPUT_CHANNELS][GRID][GRID]`.
    pub fn forward(&self, input: &[f32]) -> Activations {
        assert_eq!(input.len(), INPUT_CHANNELS * GRID * GRID);
        let cells = GRID * GRID;

        // First layer by scattering the (sparse) non-zero inputs.
        let mut pre1 = vec![0f32; HIDDEN * cells];
        let mut touched = vec![false; cells];
        for ch in 0..INPUT_CHANNELS {
            for r in 0..GRID {
                for c in 0..GRID {
                    let v = input[(ch * GRID + r) * GRID + c];
                    if v == 0.0 {
                        continue;
                    }
                    for dr in 0..3 {
                        for dc in 0..3 {
                            // output (r + 1 - dr, c + 1 - dc) reads this input through tap (dr, dc)
                            let (orow, ocol) = (r as isize + 1 - dr as isize, c as isize + 1 - dc as isize);
                            if orow < 0 || ocol < 0 || orow >= GRID as isize || ocol >= GRID as isize {
                                continue;
                            }
                            let cell = orow as usize * GRID + ocol as usize;
                            touched[cell] = true;
                            for h in 0..HIDDEN {
                                pre1[h * cells + cell] += self.conv[((h * INPUT_CHANNELS + ch) * 3 + dr) * 3 + dc] * v;
                            }
                        }
                    }
                }
            }
        }

        let idle1: Vec<f32> = self.conv_bias.iter().map(|b| b.max(0.0)).collect();
        let idle2 = self.mix_layer(&idle1);
        let idle_score = self.score(&idle2);

        let mut sums = [0f32; NEURON_COUNT];
        let mut scores = vec![idle_score; cells];
        let mut idle_cells = 0usize;
        let mut h1 = vec![0f32; HIDDEN];
        for cell in 0..cells {
            if !touched[cell] {
                idle_cells += 1;
                continue;
            }
            for h in 0..HIDDEN {
                h1[h] = (pre1[h * cells + cell] + self.conv_bias[h]).max(0.0);
            }
            let h2 = self.mix_layer(&h1);
            for h in 0..HIDDEN {
                sums[h] += h1[h];
                sums[HIDDEN + h] += h2[h];
            }
            scores[cell] = self.score(&h2);
        }
        let idle = idle_cells as f32;
        for h in 0..HIDDEN {
            sums[h] += idle * idle1[h];
            sums[HIDDEN + h] += idle * idle2[h];
        }
        let channel_means = sums.map(|s| s / cells as f32);
        Activations { channel_means, scores }
    }

    fn mix_layer(&self, h1: &[f32]) -> Vec<f32> {
        (0..HIDDEN)
            .map(|o| {
                let row = &self.mix[o * HIDDEN..(o + 1) * HIDDEN];
                (row.iter().zip(h1).map(|(w, x)| w * x).sum::<f32>() + self.mix_bias[o]).max(0.0)
            })
            .collect()
    }

    fn score(&self, h2: &[f32]) -> f32 {
        let z: f32 = self.head.iter().zip(h2).map(|(w, x)| w * x).sum::<f32>() + self.head_bias;
        1.0 / (1.0 + (-z).exp())
    }
}

/// Rasterizes a ground-truth frame into the network input, in the ego's
/// frame: rows run forward from 8 m behind to 56 m ahead in 4 m cells,
/// columns span ±16 m laterally in 2 m cells. Channels are pedestrian,
/// vehicle and animal occupancy plus a speed map.
pub fn rasterize(frame: &Frame, ego: Pose) -> Vec<f32> {
    let mut grid = vec![0f32; INPUT_CHANNELS * GRID * GRID];
    let half_lat = CELL_LATERAL * GRID as f64 / 2.0;
    for o in &frame.obstacles {
        let local = ego.to_local(o.position);
        let ext = o.footprint.half_length.max(o.footprint.half_width);
        let row_of = |x: f64| ((x + GRID_BEHIND) / CELL_FORWARD).floor();
        let col_of = |y: f64| ((y + half_lat) / CELL_LATERAL).floor();
        let (r0, r1) = (row_of(local.x - ext), row_of(local.x + ext));
        let (c0, c1) = (col_of(local.y - ext), col_of(local.y + ext));
        let ch = match o.category {
            Category::Pedestrian => 0,
            Category::Vehicle => 1,
            Category::Animal => 2,
        };
        let mut r = r0.max(0.0);
        while r <= r1.min(GRID as f64 - 1.0) {
            let mut c = c0.max(0.0);
            while c <= c1.min(GRID as f64 - 1.0) {
                let (ri, ci) = (r as usize, c as usize);
                grid[(ch * GRID + ri) * GRID + ci] = 1.0;
                grid[(3 * GRID + ri) * GRID + ci] += (o.speed / 15.0) as f32;
                c += 1.0;
            }
            r += 1.0;
        }
    }
    grid
}

/// Tracks which neurons a round (and the whole campaign) has activated.
#[derive(Debug, Clone)]
pub struct NeuralTracker {
    pub network: Network,
    pub threshold: f64,
    pub activated_ever: BTreeSet<NeuronId>,
    pub activated_this_round: BTreeSet<NeuronId>,
}

impl NeuralTracker {
    pub fn new(network: Network, threshold: f64) -> Self {
        Self {
            network,
            threshold,
            activated_ever: BTreeSet::new(),
            activated_this_round: BTreeSet::new(),
        }
    }

    /// Runs the network on one frame. A neuron is activated when its mean
    /// output over the grid exceeds the threshold.
    pub fn forward_and_track(&mut self, frame: &Frame, ego: Pose) -> (Vec<f32>, BTreeSet<NeuronId>) {
        let act = self.network.forward(&rasterize(frame, ego));
        let activated: BTreeSet<NeuronId> = act
            .channel_means
            .iter()
            .enumerate()
            .filter(|(_, &m)| m as f64 > self.threshold)
            .map(|(i, _)| i as NeuronId)
            .collect();
        self.activated_this_round.extend(activated.iter().copied());
        self.activated_ever.extend(activated.iter().copied());
        (act.scores, activated)
    }

    /// Starts a new round; cumulative coverage is kept.
    pub fn begin_round(&mut self) {
        self.activated_this_round.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::GtObstacle;
    use crate::geometry::Extents;

    fn gt(index: u32, obstacles: Vec<GtObstacle>) -> Frame {
        Frame {
            index,
            timestamp: index as f64 / 10.0,
            obstacles,
        }
    }

    fn obstacle(id: u32, category: Category, x: f64, y: f64) -> GtObstacle {
        GtObstacle {
            id,
            category,
            position: Vec2::new(x, y),
            speed: 1.0,
            heading: 0.0,
            footprint: category.nominal_extents(),
        }
    }

    fn ego() -> Pose {
        Pose::new(Vec2::new(0.0, -1.75), 0.0)
    }

    #[test]
    fn perfect_sensor_mirrors_ground_truth() {
        let det = Detector::new(Sensor::Lidar, SensorProfile::perfect());
        let f = gt(3, vec![obstacle(1, Category::Vehicle, 30.0, -1.75), obstacle(2, Category::Animal, 55.0, 4.0)]);
        let out = det.detect(&f, ego(), 11, 0.02);
        assert_eq!(out.detections.len(), 2);
        for (d, o) in out.detections.iter().zip(&f.obstacles) {
            assert_eq!((d.id, d.category, d.position), (o.id, o.category, o.position));
        }
        assert!(out.timestamp > f.timestamp);
        assert_eq!(out.source_frame_index, 3);
    }

    #[test]
    fn blind_sensor_sees_nothing() {
        let det = Detector::new(Sensor::Camera, SensorProfile::blind());
        for k in 0..50 {
            let f = gt(k, vec![obstacle(1, Category::Vehicle, 5.0, -1.75)]);
            assert!(det.detect(&f, ego(), 3, 0.02).detections.is_empty());
        }
    }

    #[test]
    fn probability_formula() {
        let p = SensorProfile::lidar();
        assert!((p.probability(40.0, Category::Animal) - (0.95 - 0.2 - 0.3)).abs() < 1e-12);
        assert!((p.probability(40.0, Category::Vehicle) - 0.75).abs() < 1e-12);
        assert_eq!(p.probability(61.0, Category::Vehicle), 0.0);
        assert_eq!(SensorProfile::perfect().probability(59.0, Category::Animal), 1.0);
    }

    #[test]
    fn animals_flicker_more_than_vehicles_at_forty_meters() {
        let det = Detector::new(Sensor::Lidar, SensorProfile { phantom_rate: 0.0, ..SensorProfile::lidar() });
        let mut seen = [0usize; 2];
        for k in 0..50 {
            let f = gt(k, vec![obstacle(1, Category::Animal, 40.0, -1.75), obstacle(2, Category::Vehicle, 40.0, 4.0)]);
            for d in det.detect(&f, ego(), 99, 0.02).detections {
                seen[(d.id - 1) as usize] += 1;
            }
        }
        assert!(seen[0] < seen[1], "{seen:?}");
    }

    #[test]
    fn noise_is_bounded() {
        let det = Detector::new(Sensor::Lidar, SensorProfile { base: 1.0, distance_slope: 0.0, pedestrian_penalty: 0.0, ..SensorProfile::lidar() });
        for k in 0..100 {
            let f = gt(k, vec![obstacle(1, Category::Pedestrian, 12.0, 0.0)]);
            for d in det.detect(&f, ego(), 5, 0.02).detections.iter().filter(|d| !d.is_phantom()) {
                assert!((d.position.x - 12.0).abs() <= 0.2 && d.position.y.abs() <= 0.2);
            }
        }
    }

    #[test]
    fn detection_is_reproducible() {
        let det = Detector::new(Sensor::Camera, SensorProfile::camera());
        let f = gt(8, vec![obstacle(1, Category::Pedestrian, 22.0, 3.0)]);
        assert_eq!(det.detect(&f, ego(), 77, 0.02), det.detect(&f, ego(), 77, 0.02));
    }

    #[test]
    fn forced_phantom_lies_ahead_of_ego() {
        let det = Detector::new(Sensor::Lidar, SensorProfile { phantom_rate: 1.0, ..SensorProfile::blind() });
        let out = det.detect(&gt(0, vec![]), ego(), 1, 0.02);
        assert_eq!(out.detections.len(), 1);
        let p = out.detections[0].clone();
        assert!(p.is_phantom());
        let local = ego().to_local(p.position);
        assert!((6.0..=14.0).contains(&local.x) && local.y.abs() <= 1.0);
    }

    fn frame(sensor: Sensor, index: u32, dets: Vec<Detection>) -> DetectionFrame {
        DetectionFrame { sensor, timestamp: index as f64 / 10.0 + 0.02, detections: dets, source_frame_index: index }
    }

    fn det(id: u32, x: f64) -> Detection {
        Detection { id, category: Category::Vehicle, position: Vec2::new(x, 0.0), speed: 0.0 }
    }

    #[test]
    fn fusion_union_with_empty() {
        let l = frame(Sensor::Lidar, 0, vec![det(1, 10.0)]);
        let c = frame(Sensor::Camera, 0, vec![]);
        let f = fuse(&l, &c, FusionPolicy::UnionDedup, 1.0).unwrap();
        assert_eq!(f.detections, vec![det(1, 10.0)]);
        assert_eq!(f.sensor, Sensor::Fusion);
    }

    #[test]
    fn fusion_dedups_and_prefers_lidar() {
        let l = frame(Sensor::Lidar, 0, vec![det(1, 10.0)]);
        let c = frame(Sensor::Camera, 0, vec![det(1, 10.3)]);
        let f = fuse(&l, &c, FusionPolicy::UnionDedup, 1.0).unwrap();
        assert_eq!(f.detections, vec![det(1, 10.0)]);
    }

    #[test]
    fn fusion_keeps_distant_phantom() {
        let l = frame(Sensor::Lidar, 0, vec![det(1, 10.0)]);
        let c = frame(Sensor::Camera, 0, vec![det(PHANTOM_ID_BASE + 7, 30.0)]);
        let f = fuse(&l, &c, FusionPolicy::UnionDedup, 1.0).unwrap();
        assert_eq!(f.detections.len(), 2);
    }

    #[test]
    fn fusion_rejects_mismatched_frames() {
        let l = frame(Sensor::Lidar, 1, vec![]);
        let c = frame(Sensor::Camera, 2, vec![]);
        assert_eq!(
            fuse(&l, &c, FusionPolicy::UnionDedup, 1.0),
            Err(PerceptionError::FrameMismatch { lidar: 1, camera: 2 })
        );
    }

    #[test]
    fn lidar_priority_falls_back_to_camera() {
        let l = frame(Sensor::Lidar, 0, vec![]);
        let c = frame(Sensor::Camera, 0, vec![det(4, 3.0)]);
        assert_eq!(fuse(&l, &c, FusionPolicy::LidarPriority, 1.0).unwrap().detections.len(), 1);
    }

    #[test]
    fn zero_input_zero_bias_activates_nothing() {
        let mut t = NeuralTracker::new(Network::random(1).without_biases(), 0.1);
        let (scores, active) = t.forward_and_track(&gt(0, vec![]), ego());
        assert!(active.is_empty());
        assert!(scores.iter().all(|&s| (s - 0.5).abs() < 1e-6));
    }

    #[test]
    fn forward_is_pure() {
        let mut t = NeuralTracker::new(Network::random(4), 0.1);
        let f = gt(0, vec![obstacle(1, Category::Vehicle, 12.0, -1.75), obstacle(2, Category::Pedestrian, 20.0, 4.0)]);
        let a = t.forward_and_track(&f, ego());
        let b = t.forward_and_track(&f, ego());
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn round_coverage_is_union_of_frames() {
        let mut t = NeuralTracker::new(Network::random(4), 0.1);
        let frames: Vec<Frame> = (0..6)
            .map(|k| gt(k, (0..k).map(|i| obstacle(i, Category::ALL[i as usize % 3], 4.0 + 7.0 * i as f64, -4.0 + 2.0 * i as f64)).collect()))
            .collect();
        let mut union = BTreeSet::new();
        let mut last = 0;
        for f in &frames {
            let (_, a) = t.forward_and_track(f, ego());
            union.extend(a);
            assert!(t.activated_this_round.len() >= last);
            last = t.activated_this_round.len();
        }
        assert_eq!(t.activated_this_round, union);
        assert!(t.activated_ever.is_superset(&t.activated_this_round));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn sparse_forward_matches_dense_reference() {
        let net = Network::random(9);
        let f = gt(0, vec![obstacle(1, Category::Vehicle, 12.0, -1.75), obstacle(2, Category::Animal, 0.5, 15.5)]);
        let input = rasterize(&f, ego());
        let fast = net.forward(&input);

        // plain dense evaluation
        let cells = GRID * GRID;
        let mut sums = [0f64; NEURON_COUNT];
        for r in 0..GRID {
            for c in 0..GRID {
                let mut h1 = vec![0f32; HIDDEN];
                for h in 0..HIDDEN {
                    let mut z = net.conv_bias[h];
                    for ch in 0..INPUT_CHANNELS {
                        for dr in 0..3 {
                            for dc in 0..3 {
                                let (ir, ic) = (r as isize + dr as isize - 1, c as isize + dc as isize - 1);
                                if ir < 0 || ic < 0 || ir >= GRID as isize || ic >= GRID as isize {
                                    continue;
                                }
                                z += net.conv[((h * INPUT_CHANNELS + ch) * 3 + dr) * 3 + dc]
                                    * input[(ch * GRID + ir as usize) * GRID + ic as usize];
                            }
                        }
                    }
                    h1[h] = z.max(0.0);
                }
                let h2 = net.mix_layer(&h1);
                for h in 0..HIDDEN {
                    sums[h] += h1[h] as f64;
                    sums[HIDDEN + h] += h2[h] as f64;
                }
            }
        }
        for n in 0..NEURON_COUNT {
            assert!((sums[n] / cells as f64 - fast.channel_means[n] as f64).abs() < 1e-4, "neuron {n}");
        }
    }

    #[test]
    fn rasterize_places_obstacle_in_ego_frame() {
        let f = gt(0, vec![GtObstacle {
            id: 1,
            category: Category::Pedestrian,
            position: Vec2::new(10.0, -1.75),
            speed: 0.0,
            heading: 0.0,
            footprint: Extents::new(0.3, 0.3),
        }]);
        let g = rasterize(&f, ego());
        // 10 m ahead: row (10 + 8) / 4 = 4; centered laterally: column 8 (and 7 via the footprint)
        assert_eq!(g[4 * GRID + 8], 1.0);
        assert_eq!(g[4 * GRID + 7], 1.0);
        assert_eq!(g.iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn profile_toml_round_trip() {
        let p = DetectorProfile::default();
        assert_eq!(DetectorProfile::from_toml(&p.to_toml()).unwrap(), p);
        let bad = p.to_toml().replace("latency = 0.02", "latency = -1.0");
        assert!(DetectorProfile::from_toml(&bad).is_err());
    }
}
