//! Searching for scenes that a pedestrian-shy detector misses.

use scenefuzz::fuzz::{fuzz, FitnessFn, FuzzConfig};
use scenefuzz::perception::DetectorProfile;
use scenefuzz::scenario::{one_obstacle_seeds, Category};
use scenefuzz::sim::SimConfig;

fn main() {
    let mut detector = DetectorProfile { track_neurons: false, ..DetectorProfile::default() };
    detector.lidar.pedestrian_penalty = 0.5;
    detector.camera.pedestrian_penalty = 0.6;
    let config = FuzzConfig {
        fitness: FitnessFn::Undetected,
        max_rounds: 200,
        sim: SimConfig::default(),
        detector,
        master_seed: 5,
    };
    let run = fuzz(&one_obstacle_seeds(10, 5), &config).unwrap();
    println!("{} scenes accepted", run.generated.len());
    let best = run
        .generated
        .iter()
        .max_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("something accepted");
    let peds = best.scenario.obstacles.iter().filter(|o| o.category == Category::Pedestrian).count();
    println!(
        "largest single gain: +{:.2} undetected per frame from {} ({} obstacles, {peds} pedestrians)",
        best.fitness,
        best.op,
        best.scenario.obstacles.len()
    );
}
