//! Which neurons of the tracker network fire, frame by frame and per round.

use scenefuzz::perception::{DetectorProfile, NEURON_COUNT};
use scenefuzz::scenario::one_obstacle_seeds;
use scenefuzz::sim::{simulate_round, SimConfig};
use std::collections::BTreeSet;

fn main() {
    let profile = DetectorProfile::default();
    let mut total = BTreeSet::new();
    for (i, scene) in one_obstacle_seeds(10, 3).iter().enumerate() {
        let trace = simulate_round(scene, &mut profile.build(), &SimConfig::default()).unwrap();
        let round = trace.activated_neurons();
        let first = trace.activations.first().map_or(0, |s| s.len());
        let before = total.len();
        total.extend(round.iter().copied());
        println!(
            "seed {i} ({}): {} neurons this round ({first} in frame 0), +{} new, {}/{NEURON_COUNT} overall",
            scene.obstacles[0].prototype,
            round.len(),
            total.len() - before,
            total.len()
        );
    }
}
