//! Fixed-step simulation of one round.
//!
//! Each tick emits a range-filtered ground-truth [`Frame`], runs the
//! detector stack on it, lets the ego planner react to the most recent
//! detections it could have received, and advances all kinematics. The
//! round ends at its duration, on a collision, or when the ego arrives.

use crate::frames::{DetectionFrame, Frame, GtObstacle, Sensor};
use crate::geometry::{normalize_heading, polyline_length, Aabb, Extents, Pose, Vec2};
use crate::mutation::DETECTION_RANGE;
use crate::perception::{DetectorStack, NeuronId, PerceptionError};
use crate::rng::hash_words;
use crate::scenario::{validate, MapSpec, ObstacleId, Scenario, Violation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

pub const DEFAULT_FRAME_RATE: f64 = 10.0;
/// Fuzzing rounds.
pub const SHORT_ROUND: f64 = 5.0;
/// Re-runs of ranked scenarios.
pub const LONG_ROUND: f64 = 45.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlannerConfig {
    pub cruise_speed: f64,
    pub acceleration: f64,
    pub deceleration: f64,
    /// Clearance added on each side of the swept ego footprint.
    pub corridor_margin: f64,
    /// Blocking detections closer than this trigger braking; farther ones
    /// trigger a lateral detour.
    pub stop_distance: f64,
    /// Longitudinal length of the lateral shift in and out of a detour.
    pub detour_ramp: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            cruise_speed: 10.0,
            acceleration: 2.0,
            deceleration: 6.0,
            corridor_margin: 0.5,
            stop_distance: 15.0,
            detour_ramp: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimConfig {
    pub duration: f64,
    pub frame_rate: f64,
    /// The ego has arrived once its center is this close to the destination.
    pub arrival_tolerance: f64,
    pub sensor_range: f64,
    pub planner: PlannerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: SHORT_ROUND,
            frame_rate: DEFAULT_FRAME_RATE,
            arrival_tolerance: 2.0,
            sensor_range: DETECTION_RANGE,
            planner: PlannerConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn tick_count(&self) -> u32 {
        (self.duration * self.frame_rate - 1e-9).ceil().max(0.0) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EgoState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Polyline from the current position to the destination.
    pub planned_trajectory: Vec<Vec2>,
    pub brake_flag: bool,
    /// Detection id that caused braking.
    pub brake_cause: Option<u32>,
    /// Fused frame the planner acted on, if any had arrived yet.
    pub consumed_frame: Option<u32>,
}

impl EgoState {
    pub fn initial(scenario: &Scenario) -> Self {
        let ego = &scenario.ego;
        Self {
            position: ego.position,
            heading: ego.heading,
            speed: ego.speed,
            planned_trajectory: vec![ego.position, ego.destination],
            brake_flag: false,
            brake_cause: None,
            consumed_frame: None,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum EventKind {
    Collision { obstacle: ObstacleId },
    BrakeStart { cause: Option<u32> },
    BrakeEnd,
    Arrived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub timestamp: f64,
    /// Tick during which the event was observed.
    pub tick: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Per-sensor detection streams, one frame per ground-truth frame each.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionStreams {
    pub lidar: Vec<DetectionFrame>,
    pub camera: Vec<DetectionFrame>,
    pub fusion: Vec<DetectionFrame>,
}

impl DetectionStreams {
    pub fn get(&self, sensor: Sensor) -> &[DetectionFrame] {
        match sensor {
            Sensor::Lidar => &self.lidar,
            Sensor::Camera => &self.camera,
            Sensor::Fusion => &self.fusion,
        }
    }
}

/// The complete record of one simulated round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub scenario: Scenario,
    pub frame_rate: f64,
    pub gt_frames: Vec<Frame>,
    pub det_frames: DetectionStreams,
    pub ego_states: Vec<EgoState>,
    /// Neurons activated by each frame; empty when no tracker is attached.
    pub activations: Vec<BTreeSet<NeuronId>>,
    pub events: Vec<Event>,
    /// Simulated time actually covered.
    pub duration: f64,
}

impl RoundTrace {
    pub fn collision(&self) -> Option<(&Event, ObstacleId)> {
        self.events.iter().find_map(|e| match e.kind {
            EventKind::Collision { obstacle } => Some((e, obstacle)),
            _ => None,
        })
    }

    pub fn arrived(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Arrived)
    }

    /// Union of per-frame activations.
    pub fn activated_neurons(&self) -> BTreeSet<NeuronId> {
        self.activations.iter().flatten().copied().collect()
    }

    /// Ego position at the end of the trace.
    pub fn final_ego_position(&self) -> Option<Vec2> {
        self.ego_states.last().map(|s| {
            let dt = 1.0 / self.frame_rate;
            advance_along(&s.planned_trajectory, s.speed * dt).0
        })
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario is invalid: {0:?}")]
    InvalidScenario(Vec<Violation>),
    #[error("bad simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// Returns the first ground-truth obstacle whose footprint intersects the
/// ego's; edge contact is not a collision.
pub fn check_collision<'a, I>(ego: &Aabb, obstacles: I) -> Option<ObstacleId>
where
    I: IntoIterator<Item = &'a GtObstacle>,
{
    obstacles
        .into_iter()
        .find(|o| ego.overlaps(&Aabb::new(o.position, o.footprint)))
        .map(|o| o.id)
}

/// Moves `distance` along `line`, returning the new point, the heading of the
/// segment reached, and the remaining polyline starting at the new point.
pub fn advance_along(line: &[Vec2], distance: f64) -> (Vec2, Option<f64>, Vec<Vec2>) {
    let Some(&start) = line.first() else {
        return (Vec2::default(), None, Vec::new());
    };
    let mut left = distance.max(0.0);
    let mut here = start;
    let mut heading = None;
    for (i, &next) in line.iter().enumerate().skip(1) {
        let seg = next - here;
        let len = seg.norm();
        if len > 1e-9 {
            heading = Some(normalize_heading(seg.y.atan2(seg.x)));
        }
        if left < len {
            let p = here + seg * (left / len);
            let mut rest = vec![p];
            rest.extend_from_slice(&line[i..]);
            return (p, heading, rest);
        }
        left -= len;
        here = next;
    }
    (here, heading, vec![here])
}

/// Distance along `line` at which a detection's footprint first enters the
/// corridor swept by the ego footprint, if it does.
pub fn corridor_entry(
    line: &[Vec2],
    ego: Extents,
    margin: f64,
    center: Vec2,
    extents: Extents,
) -> Option<f64> {
    let mut travelled = 0.0;
    for w in line.windows(2) {
        let seg = w[1] - w[0];
        let len = seg.norm();
        let Some(dir) = seg.normalized() else { continue };
        let normal = dir.perp();
        let rel = center - w[0];
        let along = rel.dot(dir);
        let across = rel.dot(normal);
        let reach_along = extents.support(dir) + ego.support(dir);
        let reach_across = extents.support(normal) + ego.support(normal) + margin;
        if across.abs() < reach_across && along > -reach_along && along < len + reach_along {
            return Some(travelled + along.max(0.0));
        }
        travelled += len;
    }
    None
}

/// Speed and trajectory decisions of the ego for one tick, using detections only.
#[derive(Debug, Clone)]
pub struct Planner {
    pub config: PlannerConfig,
    pub ego_extents: Extents,
    pub drivable: Aabb,
    pub dt: f64,
}

impl Planner {
    pub fn new(config: PlannerConfig, ego_extents: Extents, map: &MapSpec, dt: f64) -> Self {
        Self {
            config,
            ego_extents,
            drivable: map.drivable,
            dt,
        }
    }

    /// One planning step. Blocking detections farther than the stop distance
    /// are passed with a lateral detour when one fits; closer ones make the
    /// ego brake.
    pub fn plan_step(
        &self,
        ego: &EgoState,
        detections: Option<&DetectionFrame>,
        destination: Vec2,
    ) -> EgoState {
        let cfg = &self.config;
        let empty = Vec::new();
        let dets = detections.map(|f| &f.detections).unwrap_or(&empty);

        let mut trajectory = if ego.planned_trajectory.len() >= 2
            && ego.planned_trajectory.last() == Some(&destination)
        {
            let mut t = ego.planned_trajectory.clone();
            t[0] = ego.position;
            t
        } else {
            vec![ego.position, destination]
        };

        let blocking = |line: &[Vec2]| -> Vec<(f64, u32)> {
            dets.iter()
                .filter(|d| {
                    corridor_entry(
                        line,
                        self.ego_extents,
                        cfg.corridor_margin,
                        d.position,
                        d.category.nominal_extents(),
                    )
                    .is_some()
                })
                .map(|d| (d.position.distance(ego.position), d.id))
                .collect()
        };

        let mut blockers = blocking(&trajectory);
        if !blockers.is_empty() && blockers.iter().all(|&(dist, _)| dist > cfg.stop_distance) {
            if let Some(detour) = self.detour(ego.position, destination, dets) {
                if blocking(&detour).is_empty() {
                    trajectory = detour;
                    blockers.clear();
                }
            }
        }

        let nearest_close = blockers
            .iter()
            .filter(|&&(dist, _)| dist <= cfg.stop_distance)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let (brake_flag, brake_cause, speed) = match nearest_close {
            Some(&(_, id)) => (true, Some(id), (ego.speed - cfg.deceleration * self.dt).max(0.0)),
            None => (false, None, (ego.speed + cfg.acceleration * self.dt).min(cfg.cruise_speed)),
        };

        EgoState {
            position: ego.position,
            heading: ego.heading,
            speed,
            planned_trajectory: trajectory,
            brake_flag,
            brake_cause,
            consumed_frame: detections.map(|f| f.source_frame_index),
        }
    }

    /// A path that shifts sideways past every detection blocking the straight
    /// line to `destination`, or `None` when no shift fits the road.
    fn detour(
        &self,
        from: Vec2,
        destination: Vec2,
        dets: &[crate::frames::Detection],
    ) -> Option<Vec<Vec2>> {
        let cfg = &self.config;
        let straight = [from, destination];
        let dir = (destination - from).normalized()?;
        let normal = dir.perp();
        let total = from.distance(destination);
        let ego_side = self.ego_extents.support(normal);

        let blockers: Vec<(f64, f64, f64)> = dets
            .iter()
            .filter_map(|d| {
                let ext = d.category.nominal_extents();
                corridor_entry(&straight, self.ego_extents, cfg.corridor_margin, d.position, ext)?;
                let rel = d.position - from;
                Some((rel.dot(dir), rel.dot(normal), ext.support(normal)))
            })
            .collect();
        if blockers.is_empty() {
            return None;
        }
        let clearance = |ext: f64| ego_side + ext + cfg.corridor_margin + 0.3;
        let mut candidates: Vec<f64> = blockers
            .iter()
            .flat_map(|&(_, l, ext)| [l + clearance(ext), l - clearance(ext)])
            .filter(|&off| blockers.iter().all(|&(_, l, ext)| (off - l).abs() >= clearance(ext) - 1e-9))
            .collect();
        candidates.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));

        let s_min = blockers.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
        let s_max = blockers.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
        let at = |s: f64, l: f64| from + dir * s + normal * l;
        let fits = |p: Vec2| self.drivable.contains_rect(&Aabb::new(p, self.ego_extents));

        for off in candidates {
            let enter = (s_min - cfg.detour_ramp - 2.0).max(0.5);
            let leave = s_max + cfg.detour_ramp;
            let mut line = vec![from, at(enter, off), at(leave.min(total), off)];
            if leave + cfg.detour_ramp < total {
                line.push(at(leave + cfg.detour_ramp, 0.0));
            }
            line.push(destination);
            if line.iter().all(|&p| fits(p)) {
                return Some(line);
            }
        }
        None
    }
}

fn advance_obstacle(o: &mut GtObstacle, target: Option<Vec2>, dt: f64) {
    if o.speed <= 0.0 {
        return;
    }
    let step = o.speed * dt;
    match target {
        Some(t) => {
            let to = t - o.position;
            let d = to.norm();
            if d <= step {
                o.position = t;
            } else {
                o.position = o.position + to * (step / d);
            }
        }
        None => o.position = o.position + Vec2::from_heading(o.heading) * step,
    }
}

/// Seed of the detection hash stream for one round.
pub fn round_seed(scenario: &Scenario, stack: &DetectorStack) -> u64 {
    hash_words(&[scenario.rng_seed, stack.seed])
}

/// Simulates `scenario` with `stack` as the perception under test.
pub fn simulate_round(
    scenario: &Scenario,
    stack: &mut DetectorStack,
    config: &SimConfig,
) -> Result<RoundTrace, SimError> {
    let violations = validate(scenario);
    if !violations.is_empty() {
        return Err(SimError::InvalidScenario(violations));
    }
    if !(config.frame_rate > 0.0 && config.frame_rate.is_finite()) {
        return Err(SimError::Config("frame rate must be > 0".into()));
    }
    if !(config.duration > 0.0 && config.duration.is_finite()) {
        return Err(SimError::Config("duration must be > 0".into()));
    }
    let map = scenario.map().expect("validated scenarios have a known map");
    let dt = 1.0 / config.frame_rate;
    let planner = Planner::new(config.planner.clone(), scenario.ego.footprint, &map, dt);
    let seed = round_seed(scenario, stack);
    let destination = scenario.ego.destination;
    if let Some(t) = stack.tracker.as_mut() {
        t.begin_round();
    }

    let mut obstacles: Vec<(GtObstacle, Option<Vec2>)> = scenario
        .obstacles
        .iter()
        .map(|o| {
            (
                GtObstacle {
                    id: o.id,
                    category: o.category,
                    position: o.position,
                    speed: o.speed,
                    heading: o.heading,
                    footprint: o.footprint,
                },
                o.target,
            )
        })
        .collect();

    let mut trace = RoundTrace {
        scenario: scenario.clone(),
        frame_rate: config.frame_rate,
        gt_frames: Vec::new(),
        det_frames: DetectionStreams::default(),
        ego_states: Vec::new(),
        activations: Vec::new(),
        events: Vec::new(),
        duration: 0.0,
    };
    let mut ego = EgoState::initial(scenario);
    let mut braking = false;

    for tick in 0..config.tick_count() {
        let t = tick as f64 * dt;
        let gt = Frame {
            index: tick,
            timestamp: t,
            obstacles: obstacles
                .iter()
                .filter(|(o, _)| o.position.distance(ego.position) <= config.sensor_range)
                .map(|(o, _)| o.clone())
                .collect(),
        };
        let [lidar, camera, fused] = stack.perceive(&gt, ego.pose(), seed)?;
        let activated = match stack.tracker.as_mut() {
            Some(tracker) => tracker.forward_and_track(&gt, ego.pose()).1,
            None => BTreeSet::new(),
        };

        // Only frames stamped no later than now have reached the planner.
        let latest = trace
            .det_frames
            .fusion
            .iter()
            .rev()
            .find(|f| f.timestamp <= t + 1e-12);
        let planned = planner.plan_step(&ego, latest, destination);
        if planned.brake_flag != braking {
            braking = planned.brake_flag;
            trace.events.push(Event {
                timestamp: t,
                tick,
                kind: if braking {
                    EventKind::BrakeStart {
                        cause: planned.brake_cause,
                    }
                } else {
                    EventKind::BrakeEnd
                },
            });
        }

        trace.gt_frames.push(gt);
        trace.det_frames.lidar.push(lidar);
        trace.det_frames.camera.push(camera);
        trace.det_frames.fusion.push(fused);
        trace.activations.push(activated);
        trace.ego_states.push(planned.clone());
        trace.duration = (tick + 1) as f64 * dt;

        let (position, heading, rest) = advance_along(&planned.planned_trajectory, planned.speed * dt);
        ego = EgoState {
            position,
            heading: heading.unwrap_or(planned.heading),
            planned_trajectory: rest,
            ..planned
        };
        for (o, target) in obstacles.iter_mut() {
            advance_obstacle(o, *target, dt);
        }

        let ego_box = Aabb::new(ego.position, scenario.ego.footprint);
        if let Some(id) = check_collision(&ego_box, obstacles.iter().map(|(o, _)| o)) {
            trace.events.push(Event {
                timestamp: t + dt,
                tick,
                kind: EventKind::Collision { obstacle: id },
            });
            break;
        }
        if ego.position.distance(destination) <= config.arrival_tolerance {
            trace.events.push(Event {
                timestamp: t + dt,
                tick,
                kind: EventKind::Arrived,
            });
            break;
        }
    }
    Ok(trace)
}

/// Length of the remaining planned path of an ego state.
pub fn remaining_path(state: &EgoState) -> f64 {
    polyline_length(&state.planned_trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Detection;
    use crate::perception::DetectorProfile;
    use crate::scenario::{prototype, Category, ObstacleSpec};

    fn planner() -> Planner {
        Planner::new(
            PlannerConfig::default(),
            Extents::new(2.3, 1.0),
            &MapSpec::straight_two_lane(),
            0.1,
        )
    }

    fn ego_at(x: f64, speed: f64) -> EgoState {
        EgoState {
            position: Vec2::new(x, -1.75),
            heading: 0.0,
            speed,
            planned_trajectory: vec![Vec2::new(x, -1.75), Vec2::new(150.0, -1.75)],
            brake_flag: false,
            brake_cause: None,
            consumed_frame: None,
        }
    }

    fn pedestrian_frame(x: f64) -> DetectionFrame {
        DetectionFrame {
            sensor: Sensor::Fusion,
            timestamp: 0.02,
            detections: vec![Detection {
                id: 5,
                category: Category::Pedestrian,
                position: Vec2::new(x, -1.75),
                speed: 0.0,
            }],
            source_frame_index: 0,
        }
    }

    #[test]
    fn no_detections_straight_line_no_brake() {
        let s = planner().plan_step(&ego_at(0.0, 5.0), None, Vec2::new(150.0, -1.75));
        assert!(!s.brake_flag);
        assert_eq!(s.planned_trajectory, vec![Vec2::new(0.0, -1.75), Vec2::new(150.0, -1.75)]);
        assert!((s.speed - 5.2).abs() < 1e-12);
    }

    #[test]
    fn far_pedestrian_on_path_gets_a_detour() {
        let f = pedestrian_frame(20.0);
        let s = planner().plan_step(&ego_at(0.0, 10.0), Some(&f), Vec2::new(150.0, -1.75));
        assert!(!s.brake_flag);
        assert!(s.planned_trajectory.len() > 2);
        assert_eq!(s.planned_trajectory[0], Vec2::new(0.0, -1.75));
        let ped = Extents::new(0.3, 0.3);
        assert!(corridor_entry(&s.planned_trajectory, Extents::new(2.3, 1.0), 0.5, Vec2::new(20.0, -1.75), ped).is_none());
    }

    #[test]
    fn near_pedestrian_on_path_triggers_braking() {
        let f = pedestrian_frame(10.0);
        let s = planner().plan_step(&ego_at(0.0, 10.0), Some(&f), Vec2::new(150.0, -1.75));
        assert!(s.brake_flag);
        assert_eq!(s.brake_cause, Some(5));
        assert!((s.speed - 9.4).abs() < 1e-12);
    }

    #[test]
    fn off_path_detection_is_ignored() {
        let mut f = pedestrian_frame(10.0);
        f.detections[0].position.y = 5.0;
        let s = planner().plan_step(&ego_at(0.0, 10.0), Some(&f), Vec2::new(150.0, -1.75));
        assert!(!s.brake_flag);
        assert_eq!(s.planned_trajectory.len(), 2);
    }

    #[test]
    fn collision_checks() {
        let ego = Aabb::new(Vec2::new(0.0, 0.0), Extents::new(2.0, 1.0));
        let far = GtObstacle {
            id: 1,
            category: Category::Vehicle,
            position: Vec2::new(10.0, 10.0),
            speed: 0.0,
            heading: 0.0,
            footprint: Extents::new(1.0, 1.0),
        };
        assert_eq!(check_collision(&ego, [&far]), None);
        let inside = GtObstacle { id: 2, position: Vec2::new(0.0, 0.0), ..far.clone() };
        assert_eq!(check_collision(&ego, [&far, &inside]), Some(2));
        let touching = GtObstacle { id: 3, position: Vec2::new(3.0, 0.0), ..far.clone() };
        assert_eq!(check_collision(&ego, [&touching]), None);
    }

    #[test]
    fn advance_along_crosses_vertices() {
        let line = [Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0)];
        let (p, h, rest) = advance_along(&line, 5.0);
        assert_eq!(p, Vec2::new(3.0, 2.0));
        assert!((h.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(rest, vec![Vec2::new(3.0, 2.0), Vec2::new(3.0, 4.0)]);
        let (end, _, rest) = advance_along(&line, 50.0);
        assert_eq!(end, Vec2::new(3.0, 4.0));
        assert_eq!(rest.len(), 1);
    }

    #[test]
    fn five_second_round_has_fifty_frames() {
        let mut stack = DetectorProfile::default().build();
        let s = Scenario::empty(3);
        let trace = simulate_round(&s, &mut stack, &SimConfig::default()).unwrap();
        assert_eq!(trace.gt_frames.len(), 50);
        for sensor in Sensor::ALL {
            assert_eq!(trace.det_frames.get(sensor).len(), 50);
        }
        assert!((trace.duration - 5.0).abs() < 1e-9);
    }

    #[test]
    fn arrival_matches_closed_form_kinematics() {
        let mut s = Scenario::empty(3);
        s.ego.destination = Vec2::new(10.0, -1.75);
        let mut stack = DetectorProfile::perfect().build();
        let cfg = SimConfig::default();
        let trace = simulate_round(&s, &mut stack, &cfg).unwrap();
        let arrived = trace.events.iter().find(|e| e.kind == EventKind::Arrived).expect("arrives");
        assert!(trace.collision().is_none());

        // Independent integration of the discrete speed law: v_{k} = min(v0 + a(k+1)dt, vc),
        // x_{k+1} = x_k + v_k dt; arrival once within the tolerance.
        let (dt, mut x, mut v, mut k) = (0.1, 0.0, 5.0f64, 0u32);
        while 10.0 - x > cfg.arrival_tolerance {
            v = (v + 2.0 * dt).min(10.0);
            x += v * dt;
            k += 1;
        }
        assert!((arrived.timestamp - k as f64 * dt).abs() < 1e-9, "{} vs {}", arrived.timestamp, k as f64 * dt);
        // continuous-time: 5t + t² = 8  →  t ≈ 1.275 s
        let t_cont = (-5.0 + (25.0f64 + 32.0).sqrt()) / 2.0;
        assert!((arrived.timestamp - t_cont).abs() <= dt);
    }

    #[test]
    fn undetected_obstacle_on_path_is_hit() {
        let deer = ObstacleSpec::from_prototype(0, prototype("deer").unwrap(), Vec2::new(25.0, -1.75));
        let s = Scenario::empty(3).with_obstacles(vec![deer]);
        let mut stack = DetectorProfile::blind().build();
        let trace = simulate_round(&s, &mut stack, &SimConfig::default()).unwrap();
        let (event, id) = trace.collision().expect("collision");
        assert_eq!(id, 0);
        assert!(!trace.arrived());
        // no frames after the collision tick
        assert_eq!(trace.gt_frames.last().unwrap().index, event.tick);
        assert!(trace.gt_frames.len() < 50);
    }

    #[test]
    fn planner_only_sees_frames_already_delivered() {
        let mut stack = DetectorProfile::default().build();
        let trace = simulate_round(&Scenario::empty(1), &mut stack, &SimConfig::default()).unwrap();
        assert_eq!(trace.ego_states[0].consumed_frame, None);
        for (k, state) in trace.ego_states.iter().enumerate().skip(1) {
            let consumed = state.consumed_frame.unwrap() as usize;
            assert!(trace.det_frames.fusion[consumed].timestamp <= trace.gt_frames[k].timestamp + 1e-12);
        }
    }

    #[test]
    fn ground_truth_is_range_filtered() {
        let near = ObstacleSpec::from_prototype(0, prototype("sedan").unwrap(), Vec2::new(30.0, 4.0));
        let far = ObstacleSpec::from_prototype(1, prototype("sedan").unwrap(), Vec2::new(100.0, 4.0));
        let s = Scenario::empty(1).with_obstacles(vec![near, far]);
        let mut stack = DetectorProfile::default().build();
        let trace = simulate_round(&s, &mut stack, &SimConfig::default()).unwrap();
        let first = &trace.gt_frames[0];
        assert_eq!(first.obstacles.iter().map(|o| o.id).collect::<Vec<_>>(), vec![0]);
        // by the end the ego has closed in on the far car
        assert!(trace.gt_frames.last().unwrap().obstacles.iter().any(|o| o.id == 1));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut stack = DetectorProfile::default().build();
        let bad = SimConfig { frame_rate: 0.0, ..SimConfig::default() };
        assert!(matches!(simulate_round(&Scenario::empty(1), &mut stack, &bad), Err(SimError::Config(_))));
        let mut s = Scenario::empty(1);
        s.map_id = "x".into();
        assert!(matches!(simulate_round(&s, &mut stack, &SimConfig::default()), Err(SimError::InvalidScenario(_))));
    }

    #[test]
    fn obstacles_stop_at_their_target() {
        let mut o = GtObstacle {
            id: 1,
            category: Category::Pedestrian,
            position: Vec2::new(0.0, 0.0),
            speed: 2.0,
            heading: 0.0,
            footprint: Extents::new(0.3, 0.3),
        };
        for _ in 0..20 {
            advance_obstacle(&mut o, Some(Vec2::new(0.0, 3.0)), 0.1);
        }
        assert_eq!(o.position, Vec2::new(0.0, 3.0));
    }
}
