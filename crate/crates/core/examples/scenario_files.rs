//! Build a scene, write it as TOML, read it back, and see what validation
//! rejects.

use scenefuzz::geometry::Vec2;
use scenefuzz::scenario::{load_scenario, prototype, save_scenario, validate, ObstacleSpec, Scenario};

fn main() {
    let mut walker = ObstacleSpec::from_prototype(1, prototype("adult-medium").unwrap(), Vec2::new(35.0, 5.0));
    walker.speed = 1.2;
    walker.heading = 1.5 * std::f64::consts::PI;
    walker.target = Some(Vec2::new(35.0, -1.75));
    let bus = ObstacleSpec::from_prototype(0, prototype("schoolbus").unwrap(), Vec2::new(60.0, 1.75));
    let scene = Scenario::empty(42).with_obstacles(vec![walker, bus]);

    let bytes = save_scenario(&scene).unwrap();
    println!("{}", String::from_utf8_lossy(&bytes));
    let back = load_scenario(&bytes).unwrap();
    assert_eq!(back, scene);
    println!("round trip ok, {} violations", validate(&back).len());

    // a deer parked on the ego car is not a valid scene
    let deer = ObstacleSpec::from_prototype(2, prototype("deer").unwrap(), Vec2::new(1.0, -1.75));
    let bad = scene.clone().with_obstacles(vec![deer]);
    for v in validate(&bad) {
        println!("invalid: {v}");
    }
}
