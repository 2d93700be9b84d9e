//! One five-second round with the default detector stack: frame streams,
//! ego motion, and the JSONL trace.

use scenefuzz::frames::Sensor;
use scenefuzz::perception::DetectorProfile;
use scenefuzz::scenario::one_obstacle_seeds;
use scenefuzz::sim::{simulate_round, SimConfig};
use scenefuzz::trace::trace_to_bytes;

fn main() {
    let scene = one_obstacle_seeds(3, 1).remove(2);
    let mut stack = DetectorProfile::default().build();
    let trace = simulate_round(&scene, &mut stack, &SimConfig::default()).unwrap();

    println!("{} ground-truth frames over {:.1} s", trace.gt_frames.len(), trace.duration);
    for sensor in Sensor::ALL {
        let n: usize = trace.det_frames.get(sensor).iter().map(|f| f.detections.len()).sum();
        println!("{:>7}: {n} detections", sensor.as_str());
    }
    for k in (0..trace.ego_states.len()).step_by(10) {
        let e = &trace.ego_states[k];
        println!(
            "t={:.1} ego ({:.1}, {:.2}) {:.1} m/s brake={}",
            trace.gt_frames[k].timestamp, e.position.x, e.position.y, e.speed, e.brake_flag
        );
    }
    for e in &trace.events {
        println!("event at {:.1}s: {:?}", e.timestamp, e.kind);
    }
    println!("trace: {} bytes of JSON Lines", trace_to_bytes(&trace).len());
}
