//! Scenarios, obstacles, maps and their validity rules, plus the scenario
//! text format.
//!
//! A [`Scenario`] is the unit of fuzzing: the map it lives on, the ego car's
//! initial state and destination, and up to [`MAX_OBSTACLES`] obstacles. The
//! on-disk form is TOML with obstacles written in ascending id order, so a
//! scenario always serializes to the same bytes.

use crate::geometry::{Aabb, Extents, Vec2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use thiserror::Error;

/// Upper bound on obstacles in one scene.
pub const MAX_OBSTACLES: usize = 15;

pub type ObstacleId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Pedestrian,
    Vehicle,
    Animal,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Pedestrian, Category::Vehicle, Category::Animal];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Pedestrian => "pedestrian",
            Category::Vehicle => "vehicle",
            Category::Animal => "animal",
        }
    }

    /// Footprint the planner assumes for a detection of this category.
    pub fn nominal_extents(self) -> Extents {
        match self {
            Category::Pedestrian => Extents::new(0.3, 0.3),
            Category::Vehicle => Extents::new(2.3, 1.0),
            Category::Animal => Extents::new(0.8, 0.3),
        }
    }

    /// Largest speed a mutation may assign.
    pub fn max_speed(self) -> f64 {
        match self {
            Category::Vehicle => 15.0,
            Category::Pedestrian | Category::Animal => 3.0,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named obstacle model: its category and footprint preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prototype {
    pub name: &'static str,
    pub category: Category,
    pub extents: Extents,
}

const fn proto(name: &'static str, category: Category, hl: f64, hw: f64) -> Prototype {
    Prototype {
        name,
        category,
        extents: Extents::new(hl, hw),
    }
}

// Footprints are conventions; only the size class matters to the detectors.
pub const PROTOTYPES: &[Prototype] = &[
    proto("adult-tall", Category::Pedestrian, 0.3, 0.3),
    proto("adult-medium", Category::Pedestrian, 0.3, 0.3),
    proto("adult-short", Category::Pedestrian, 0.28, 0.28),
    proto("adult-coat", Category::Pedestrian, 0.32, 0.32),
    proto("adult-backpack", Category::Pedestrian, 0.32, 0.3),
    proto("elderly", Category::Pedestrian, 0.3, 0.3),
    proto("jogger", Category::Pedestrian, 0.3, 0.25),
    proto("worker", Category::Pedestrian, 0.3, 0.3),
    proto("teen", Category::Pedestrian, 0.27, 0.27),
    proto("child", Category::Pedestrian, 0.22, 0.22),
    proto("toddler", Category::Pedestrian, 0.18, 0.18),
    proto("sedan", Category::Vehicle, 2.3, 0.95),
    proto("suv", Category::Vehicle, 2.4, 1.0),
    proto("jeep", Category::Vehicle, 2.1, 0.95),
    proto("hatchback", Category::Vehicle, 2.0, 0.9),
    proto("schoolbus", Category::Vehicle, 5.5, 1.3),
    proto("deer", Category::Animal, 0.8, 0.3),
    proto("turkey", Category::Animal, 0.3, 0.2),
];

pub fn prototypes_of(category: Category) -> impl Iterator<Item = &'static Prototype> {
    PROTOTYPES.iter().filter(move |p| p.category == category)
}

pub fn prototype(name: &str) -> Option<&'static Prototype> {
    PROTOTYPES.iter().find(|p| p.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObstacleSpec {
    pub id: ObstacleId,
    pub category: Category,
    pub prototype: String,
    pub position: Vec2,
    /// Radians in `[0, 2π)`, counter-clockwise from east.
    pub heading: f64,
    pub speed: f64,
    #[serde(with = "extents_serde")]
    pub footprint: Extents,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec2>,
}

impl ObstacleSpec {
    /// A stationary obstacle built from a named prototype.
    pub fn from_prototype(id: ObstacleId, proto: &Prototype, position: Vec2) -> Self {
        Self {
            id,
            category: proto.category,
            prototype: proto.name.to_string(),
            position,
            heading: 0.0,
            speed: 0.0,
            footprint: proto.extents,
            target: None,
        }
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.position, self.footprint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EgoSpec {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub destination: Vec2,
    #[serde(with = "extents_serde")]
    pub footprint: Extents,
}

impl EgoSpec {
    pub fn bounds(&self) -> Aabb {
        Aabb::new(self.position, self.footprint)
    }
}

/// A straight lane segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub start: Vec2,
    pub end: Vec2,
    pub width: f64,
}

impl Lane {
    pub fn contains(&self, p: Vec2) -> bool {
        let Some(dir) = (self.end - self.start).normalized() else {
            return false;
        };
        let rel = p - self.start;
        let along = rel.dot(dir);
        let across = rel.dot(dir.perp());
        along >= 0.0 && along <= self.start.distance(self.end) && across.abs() <= self.width / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub id: &'static str,
    pub drivable: Aabb,
    pub lanes: Vec<Lane>,
    pub sidewalk_margin: f64,
}

pub const DEFAULT_MAP_ID: &str = "straight-two-lane";

impl MapSpec {
    /// Looks up a built-in map by id.
    pub fn builtin(id: &str) -> Option<MapSpec> {
        match id {
            DEFAULT_MAP_ID => Some(Self::straight_two_lane()),
            _ => None,
        }
    }

    /// A 280 m straight road with one lane per direction and 3 m sidewalks.
    pub fn straight_two_lane() -> MapSpec {
        let lane_width = 3.5;
        let (x0, x1) = (-40.0, 240.0);
        let sidewalk_margin = 3.0;
        let half_road = lane_width + sidewalk_margin + 1.5;
        MapSpec {
            id: DEFAULT_MAP_ID,
            drivable: Aabb::new(
                Vec2::new((x0 + x1) / 2.0, 0.0),
                Extents::new((x1 - x0) / 2.0, half_road),
            ),
            lanes: vec![
                Lane {
                    start: Vec2::new(x0, -lane_width / 2.0),
                    end: Vec2::new(x1, -lane_width / 2.0),
                    width: lane_width,
                },
                Lane {
                    start: Vec2::new(x1, lane_width / 2.0),
                    end: Vec2::new(x0, lane_width / 2.0),
                    width: lane_width,
                },
            ],
            sidewalk_margin,
        }
    }

    pub fn lanes_within_region(&self) -> bool {
        self.lanes
            .iter()
            .all(|l| self.drivable.contains_point(l.start) && self.drivable.contains_point(l.end))
    }

    pub fn in_any_lane(&self, p: Vec2) -> bool {
        self.lanes.iter().any(|l| l.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub map_id: String,
    #[serde(with = "seed_serde")]
    pub rng_seed: u64,
    pub ego: EgoSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
}

impl Scenario {
    /// An obstacle-free scene on the default map: ego in the eastbound lane
    /// at the origin, driving toward a destination 150 m ahead.
    pub fn empty(rng_seed: u64) -> Self {
        Self {
            map_id: DEFAULT_MAP_ID.to_string(),
            rng_seed,
            ego: EgoSpec {
                position: Vec2::new(0.0, -1.75),
                heading: 0.0,
                speed: 5.0,
                destination: Vec2::new(150.0, -1.75),
                footprint: Extents::new(2.3, 1.0),
            },
            obstacles: Vec::new(),
        }
    }

    pub fn with_obstacles(mut self, obstacles: Vec<ObstacleSpec>) -> Self {
        self.obstacles = obstacles;
        self.canonicalize();
        self
    }

    /// Orders obstacles by id, the canonical order used on disk.
    pub fn canonicalize(&mut self) {
        self.obstacles.sort_by_key(|o| o.id);
    }

    pub fn map(&self) -> Option<MapSpec> {
        MapSpec::builtin(&self.map_id)
    }

    pub fn obstacle(&self, id: ObstacleId) -> Option<&ObstacleSpec> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    pub fn next_obstacle_id(&self) -> ObstacleId {
        self.obstacles.iter().map(|o| o.id + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    CountExceeded { count: usize },
    DuplicateId { id: ObstacleId },
    Overlap { a: ObstacleId, b: ObstacleId },
    OverlapsEgo { id: ObstacleId },
    NegativeSpeed { id: ObstacleId },
    BadFootprint { id: ObstacleId },
    HeadingOutOfRange { id: ObstacleId },
    NonFinite { id: ObstacleId },
    OutsideDrivable { id: ObstacleId },
    UnknownMap { map_id: String },
    /// Problems with the ego block itself.
    BadEgo,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CountExceeded { count } => {
                write!(f, "count-exceeded: {count} obstacles (max {MAX_OBSTACLES})")
            }
            Violation::DuplicateId { id } => write!(f, "duplicate-id({id})"),
            Violation::Overlap { a, b } => write!(f, "overlap({a}, {b})"),
            Violation::OverlapsEgo { id } => write!(f, "overlaps-ego({id})"),
            Violation::NegativeSpeed { id } => write!(f, "negative-speed({id})"),
            Violation::BadFootprint { id } => write!(f, "bad-footprint({id})"),
            Violation::HeadingOutOfRange { id } => write!(f, "heading-out-of-range({id})"),
            Violation::NonFinite { id } => write!(f, "non-finite({id})"),
            Violation::OutsideDrivable { id } => write!(f, "outside-drivable({id})"),
            Violation::UnknownMap { map_id } => write!(f, "unknown-map({map_id})"),
            Violation::BadEgo => f.write_str("bad-ego"),
        }
    }
}

fn finite(o: &ObstacleSpec) -> bool {
    let mut values = vec![
        o.position.x,
        o.position.y,
        o.heading,
        o.speed,
        o.footprint.half_length,
        o.footprint.half_width,
    ];
    if let Some(t) = o.target {
        values.extend([t.x, t.y]);
    }
    values.iter().all(|v| v.is_finite())
}

/// Checks every scenario invariant. An empty result means the scenario is valid.
pub fn validate(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let map = scenario.map();
    if map.is_none() {
        out.push(Violation::UnknownMap {
            map_id: scenario.map_id.clone(),
        });
    }

    let ego = &scenario.ego;
    let ego_ok = [ego.position.x, ego.position.y, ego.heading, ego.speed, ego.destination.x, ego.destination.y]
        .iter()
        .all(|v| v.is_finite())
        && ego.speed >= 0.0
        && ego.footprint.is_positive()
        && (0.0..TAU).contains(&ego.heading);
    if !ego_ok {
        out.push(Violation::BadEgo);
    }

    let n = scenario.obstacles.len();
    if n > MAX_OBSTACLES {
        out.push(Violation::CountExceeded { count: n });
    }

    let mut seen = BTreeSet::new();
    for o in &scenario.obstacles {
        if !seen.insert(o.id) {
            out.push(Violation::DuplicateId { id: o.id });
        }
        if !finite(o) {
            out.push(Violation::NonFinite { id: o.id });
            continue;
        }
        if o.speed < 0.0 {
            out.push(Violation::NegativeSpeed { id: o.id });
        }
        if !o.footprint.is_positive() {
            out.push(Violation::BadFootprint { id: o.id });
        }
        if !(0.0..TAU).contains(&o.heading) {
            out.push(Violation::HeadingOutOfRange { id: o.id });
        }
        if let Some(map) = &map {
            if !map.drivable.contains_rect(&o.bounds()) {
                out.push(Violation::OutsideDrivable { id: o.id });
            }
        }
        if ego_ok && o.bounds().overlaps(&ego.bounds()) {
            out.push(Violation::OverlapsEgo { id: o.id });
        }
    }

    for (i, a) in scenario.obstacles.iter().enumerate() {
        for b in &scenario.obstacles[i + 1..] {
            if a.bounds().overlaps(&b.bounds()) {
                out.push(Violation::Overlap { a: a.id, b: b.id });
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario serialization failed: {0}")]
    Serialize(String),
    #[error("scenario is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))]
    Invalid(Vec<Violation>),
}

/// Parses a scenario document. Syntax and schema problems are reported with
/// the offending line and key; semantic rules are left to [`validate`].
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let mut s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    s.canonicalize();
    Ok(s)
}

/// Parses and validates in one step, keeping the two failure kinds distinct.
pub fn load_valid_scenario(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    let s = load_scenario(bytes)?;
    let violations = validate(&s);
    if violations.is_empty() {
        Ok(s)
    } else {
        Err(ScenarioError::Invalid(violations))
    }
}

pub fn save_scenario(scenario: &Scenario) -> Result<Vec<u8>, ScenarioError> {
    let mut canonical = scenario.clone();
    canonical.canonicalize();
    toml::to_string(&canonical)
        .map(String::into_bytes)
        .map_err(|e| ScenarioError::Serialize(e.to_string()))
}

/// Builds `count` one-obstacle seed scenes: each gets one random obstacle
/// placed like a fresh `Add` mutation on an empty scene.
pub fn one_obstacle_seeds(count: usize, master_seed: u64) -> Vec<Scenario> {
    use crate::mutation::{apply_mutation, MutationOp};
    use crate::rng::{derive_seed, rng_from_seed};

    (0..count)
        .map(|i| {
            let seed = derive_seed(master_seed, i as u64);
            let mut rng = rng_from_seed(seed);
            let base = Scenario::empty(seed);
            let op = MutationOp::sample_add(&mut rng, &base);
            apply_mutation(&base, &op).expect("an empty scene always admits an added obstacle")
        })
        .collect()
}

mod extents_serde {
    use super::Extents;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "camelCase", deny_unknown_fields)]
    struct Repr {
        half_length: f64,
        half_width: f64,
    }

    pub fn serialize<S: Serializer>(e: &Extents, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            half_length: e.half_length,
            half_width: e.half_width,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Extents, D::Error> {
        let r = Repr::deserialize(d)?;
        Ok(Extents::new(r.half_length, r.half_width))
    }
}

/// TOML integers are signed 64-bit; seeds above `i64::MAX` are written as
/// decimal strings.
pub(crate) mod seed_serde {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(serde::de::Error::custom),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ped(id: ObstacleId, x: f64, y: f64) -> ObstacleSpec {
        ObstacleSpec::from_prototype(id, prototype("adult-tall").unwrap(), Vec2::new(x, y))
    }

    #[test]
    fn empty_scene_is_valid() {
        assert!(validate(&Scenario::empty(1)).is_empty());
    }

    #[test]
    fn sixteen_obstacles_exceed_the_cap() {
        let obstacles = (0..16).map(|i| ped(i, 10.0 + 2.0 * i as f64, 4.0)).collect();
        let s = Scenario::empty(1).with_obstacles(obstacles);
        assert_eq!(validate(&s), vec![Violation::CountExceeded { count: 16 }]);
    }

    #[test]
    fn coincident_obstacles_overlap() {
        let s = Scenario::empty(1).with_obstacles(vec![ped(3, 20.0, 4.0), ped(7, 20.0, 4.0)]);
        assert_eq!(validate(&s), vec![Violation::Overlap { a: 3, b: 7 }]);
    }

    #[test]
    fn obstacle_on_ego_is_reported() {
        let s = Scenario::empty(1).with_obstacles(vec![ped(0, 0.5, -1.75)]);
        assert_eq!(validate(&s), vec![Violation::OverlapsEgo { id: 0 }]);
    }

    #[test]
    fn per_obstacle_rules() {
        let mut bad = ped(1, 20.0, 4.0);
        bad.speed = -1.0;
        bad.heading = 7.0;
        bad.footprint = Extents::new(0.0, 0.3);
        let mut dup = ped(1, 30.0, 4.0);
        dup.position = Vec2::new(500.0, 0.0);
        let s = Scenario::empty(1).with_obstacles(vec![bad, dup]);
        let v = validate(&s);
        assert!(v.contains(&Violation::NegativeSpeed { id: 1 }));
        assert!(v.contains(&Violation::HeadingOutOfRange { id: 1 }));
        assert!(v.contains(&Violation::BadFootprint { id: 1 }));
        assert!(v.contains(&Violation::DuplicateId { id: 1 }));
        assert!(v.contains(&Violation::OutsideDrivable { id: 1 }));
    }

    #[test]
    fn unknown_map() {
        let mut s = Scenario::empty(1);
        s.map_id = "nowhere".into();
        assert_eq!(
            validate(&s),
            vec![Violation::UnknownMap {
                map_id: "nowhere".into()
            }]
        );
    }

    #[test]
    fn save_is_canonical_and_round_trips() {
        let mut walker = ped(9, 30.0, 5.0);
        walker.target = Some(Vec2::new(30.0, -5.0));
        walker.speed = 1.25;
        let s = Scenario::empty(u64::MAX).with_obstacles(vec![walker, ped(2, 12.0, 4.0)]);
        let bytes = save_scenario(&s).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("mapId"));
        assert!(text.contains("rngSeed = \"18446744073709551615\""));
        assert!(text.find("id = 2").unwrap() < text.find("id = 9").unwrap());
        let back = load_scenario(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(save_scenario(&back).unwrap(), bytes);
    }

    #[test]
    fn truncated_input_is_a_parse_error() {
        let bytes = save_scenario(&Scenario::empty(5).with_obstacles(vec![ped(0, 20.0, 4.0)])).unwrap();
        let cut = &bytes[..bytes.len() / 2];
        match load_scenario(cut) {
            Err(ScenarioError::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_and_validation_errors_are_separate() {
        let obstacles = (0..16).map(|i| ped(i, 10.0 + 2.0 * i as f64, 4.0)).collect();
        let s = Scenario::empty(1).with_obstacles(obstacles);
        let bytes = save_scenario(&s).unwrap();
        let loaded = load_scenario(&bytes).expect("syntax is fine");
        assert_eq!(validate(&loaded), vec![Violation::CountExceeded { count: 16 }]);
        assert!(matches!(load_valid_scenario(&bytes), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn default_map_lanes_inside_region() {
        let m = MapSpec::straight_two_lane();
        assert!(m.lanes_within_region());
        assert!(m.in_any_lane(Vec2::new(10.0, -1.75)));
        assert!(!m.in_any_lane(Vec2::new(10.0, -6.0)));
    }

    #[test]
    fn prototype_catalogue() {
        assert_eq!(prototypes_of(Category::Pedestrian).count(), 11);
        assert_eq!(prototypes_of(Category::Vehicle).count(), 5);
        assert_eq!(prototypes_of(Category::Animal).count(), 2);
        assert_eq!(prototype("deer").unwrap().category, Category::Animal);
    }
}
