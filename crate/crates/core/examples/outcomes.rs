//! The three adverse outcomes, each from a small hand-built scene run for
//! 45 seconds.

use scenefuzz::fuzz::fusion_reports;
use scenefuzz::geometry::Vec2;
use scenefuzz::outcome::classify;
use scenefuzz::perception::{DetectorProfile, SensorProfile};
use scenefuzz::scenario::{prototype, ObstacleSpec, Scenario};
use scenefuzz::sim::{simulate_round, SimConfig};

fn show(name: &str, scene: &Scenario, profile: &DetectorProfile) {
    let trace = simulate_round(scene, &mut profile.build(), &SimConfig::default().with_duration(45.0)).unwrap();
    let report = classify(&trace, &fusion_reports(&trace).unwrap()).unwrap();
    println!("{name}: {} after {:.1} s", report.verdict, trace.duration);
    for e in report.evidence.iter() {
        println!("    t={:.1} {} ({} frames)", e.timestamp, e.description, e.frames.len());
    }
    if let Some(c) = &report.contributing_perception {
        println!("    perception rate {:?}, precision {:?}", c.perception_rate.map(|r| r.to_string()), c.mean_precision);
    }
}

fn main() {
    let deer = ObstacleSpec::from_prototype(0, prototype("deer").unwrap(), Vec2::new(30.0, -1.75));
    let mut no_animals = DetectorProfile::default();
    no_animals.lidar.animal_penalty = 1.0;
    no_animals.camera.animal_penalty = 1.0;
    show("deer, animal-blind sensors", &Scenario::empty(1).with_obstacles(vec![deer]), &no_animals);

    let ghost = DetectorProfile {
        lidar: SensorProfile { phantom_rate: 1.0, phantom_lateral: 0.0, ..SensorProfile::perfect() },
        ..DetectorProfile::perfect()
    };
    show("empty road, hallucinating lidar", &Scenario::empty(2), &ghost);

    let mut walker = ObstacleSpec::from_prototype(0, prototype("adult-medium").unwrap(), Vec2::new(60.0, 5.5));
    walker.speed = 1.4;
    walker.heading = 1.5 * std::f64::consts::PI;
    walker.target = Some(Vec2::new(60.0, -1.75));
    let near_sighted = SensorProfile { max_range: 14.0, ..SensorProfile::perfect() };
    let late = DetectorProfile { lidar: near_sighted.clone(), camera: near_sighted, ..DetectorProfile::perfect() };
    show("pedestrian stops in lane, 14 m sensors", &Scenario::empty(3).with_obstacles(vec![walker]), &late);

    show("empty road, perfect sensors", &Scenario::empty(4), &DetectorProfile::perfect());
}
