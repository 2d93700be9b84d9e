//! A 300-round campaign guided by newly activated neurons, kept in memory.

use scenefuzz::fuzz::{fuzz, rank_generated, FitnessFn, FuzzConfig, RoundOutcome};
use scenefuzz::perception::DetectorProfile;
use scenefuzz::scenario::one_obstacle_seeds;
use scenefuzz::sim::SimConfig;

fn main() {
    let config = FuzzConfig {
        fitness: FitnessFn::NeuronNovelty,
        max_rounds: 300,
        sim: SimConfig::default(),
        detector: DetectorProfile::default(),
        master_seed: 2024,
    };
    let run = fuzz(&one_obstacle_seeds(10, 2024), &config).unwrap();
    println!(
        "accepted {} rejected {} errors {}",
        run.count(RoundOutcome::Accepted),
        run.count(RoundOutcome::Rejected),
        run.count(RoundOutcome::Error)
    );
    for r in (0..300).step_by(50).chain([299]) {
        println!("after round {r:>3}: {} neurons covered", run.ledger.cumulative_sizes[r]);
    }
    for g in run.generated.iter().take(5) {
        println!("child {} of {} via {} (+{} neurons)", g.id, g.parent, g.op, g.fitness);
    }
    let ranked = rank_generated(run.generated.iter().filter_map(|g| run.trace_of(g.id).map(|t| (g.id, t)))).unwrap();
    for r in ranked.iter().take(3) {
        println!("most dangerous: {} danger={} caution={}", r.id, r.severity.danger, r.severity.caution);
    }
}
