//! Every mutation operator, sampled from a fixed seed and applied to the
//! same parent.

use scenefuzz::mutation::{apply_mutation, sample_params, MutationKind};
use scenefuzz::rng::rng_from_seed;
use scenefuzz::scenario::one_obstacle_seeds;

fn main() {
    let mut rng = rng_from_seed(7);
    let mut parent = one_obstacle_seeds(1, 7).remove(0);
    // Swap needs two obstacles.
    let add = sample_params(&mut rng, &parent, MutationKind::Add).unwrap();
    parent = apply_mutation(&parent, &add).unwrap();

    for o in &parent.obstacles {
        println!("parent: {} {} at ({:.1}, {:.1}) {:.2} m/s", o.id, o.prototype, o.position.x, o.position.y, o.speed);
    }
    for kind in MutationKind::ALL {
        match sample_params(&mut rng, &parent, kind) {
            Ok(op) => {
                let child = apply_mutation(&parent, &op).unwrap();
                println!("{op:<40} -> {} obstacles", child.obstacles.len());
            }
            Err(e) => println!("{kind:?}: {e}"),
        }
    }
}
