//! Precision, recall and perception rate on a hand-built three-frame
//! stream, plus the assignment that matching picks.

use scenefuzz::frames::{Detection, DetectionFrame, Frame, GtObstacle, Sensor};
use scenefuzz::geometry::Vec2;
use scenefuzz::matching::{evaluate_stream, format_metric, perception_rate, write_frame_csv, Ratio, DEFAULT_GATE};
use scenefuzz::scenario::Category;

fn gt(id: u32, category: Category, x: f64, y: f64) -> GtObstacle {
    GtObstacle { id, category, position: Vec2::new(x, y), speed: 0.0, heading: 0.0, footprint: category.nominal_extents() }
}

fn det(id: u32, category: Category, x: f64, y: f64) -> Detection {
    Detection { id, category, position: Vec2::new(x, y), speed: 0.0 }
}

fn main() {
    let gts: Vec<Frame> = vec![
        vec![gt(0, Category::Pedestrian, 10.0, 3.0), gt(1, Category::Vehicle, 20.0, -1.75),
             gt(2, Category::Pedestrian, 40.0, 5.0), gt(3, Category::Vehicle, 50.0, 1.75)],
        vec![gt(0, Category::Pedestrian, 11.0, 3.0), gt(1, Category::Vehicle, 21.0, -1.75)],
        vec![gt(0, Category::Pedestrian, 12.0, 3.0), gt(1, Category::Vehicle, 22.0, -1.75)],
    ]
    .into_iter()
    .enumerate()
    .map(|(i, obstacles)| Frame { index: i as u32, timestamp: i as f64 * 0.1, obstacles })
    .collect();
    let dets: Vec<DetectionFrame> = vec![
        vec![det(10, Category::Pedestrian, 10.1, 3.0), det(11, Category::Vehicle, 20.0, -1.6)],
        vec![det(12, Category::Pedestrian, 11.0, 3.1), det(99, Category::Animal, 15.0, 0.0)],
        vec![det(13, Category::Pedestrian, 12.0, 3.0), det(14, Category::Vehicle, 22.2, -1.75)],
    ]
    .into_iter()
    .enumerate()
    .map(|(i, detections)| DetectionFrame { sensor: Sensor::Fusion, timestamp: i as f64 * 0.1 + 0.02, detections, source_frame_index: i as u32 })
    .collect();

    let reports = evaluate_stream(&gts, &dets, DEFAULT_GATE).unwrap();
    for r in &reports {
        let show = |x: Option<Ratio>| x.map_or("NA".to_string(), |r| format!("{r} = {}", format_metric(Some(r.value()))));
        println!("frame {}: precision {}, recall {}", r.frame_index, show(r.precision()), show(r.recall()));
        for p in &r.pairs {
            println!("    gt {} <-> det {} ({:.2} m)", p.gt_id, p.det_id, p.distance);
        }
    }
    println!("perception rate of the car: {}", perception_rate(&reports, 1).unwrap());
    write_frame_csv(&reports, std::io::stdout()).unwrap();
}
