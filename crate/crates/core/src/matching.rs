//! Perception evaluation against ground truth.
//!
//! Matching runs in two steps. Frames are paired first: every ground-truth
//! frame has exactly one later-stamped detection frame per sensor, tied by
//! `source_frame_index`. Obstacles inside each frame pair are then matched
//! per category with a minimum-total Manhattan-distance assignment, and pairs
//! farther apart than a gating radius are split back into a miss and a false
//! alarm.

use crate::frames::{Detection, DetectionFrame, Frame, GtObstacle};
use crate::hungarian;
use crate::scenario::{Category, ObstacleId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const DEFAULT_GATE: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("ground-truth frame {0} has no detection counterpart")]
    MissingCounterpart(u32),
    #[error("detection frame for ground-truth frame {0} appears more than once")]
    DuplicateCounterpart(u32),
    #[error("detection frame {0} has no ground-truth frame")]
    OrphanDetectionFrame(u32),
    #[error("detection frame {0} is not stamped after its ground truth")]
    NotLater(u32),
    #[error("obstacle {0} never appears in the ground truth")]
    UnknownObstacle(ObstacleId),
}

/// An exact, unreduced ratio of counts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    /// `None` for a zero denominator.
    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den != 0).then_some(Self { num, den })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchedPair {
    pub gt_id: ObstacleId,
    pub det_id: u32,
    pub category: Category,
    pub distance: f64,
}

/// Outcome of matching one frame pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchReport {
    pub frame_index: u32,
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<ObstacleId>,
    pub unmatched_det: Vec<u32>,
}

impl MatchReport {
    pub fn detection_count(&self) -> usize {
        self.pairs.len() + self.unmatched_det.len()
    }

    pub fn gt_count(&self) -> usize {
        self.pairs.len() + self.unmatched_gt.len()
    }

    pub fn precision(&self) -> Option<Ratio> {
        precision(self)
    }

    pub fn recall(&self) -> Option<Ratio> {
        recall(self)
    }

    pub fn is_matched_gt(&self, id: ObstacleId) -> bool {
        self.pairs.iter().any(|p| p.gt_id == id)
    }

    pub fn contains_gt(&self, id: ObstacleId) -> bool {
        self.is_matched_gt(id) || self.unmatched_gt.contains(&id)
    }
}

/// `|pairs| / (|pairs| + |unmatched detections|)`; undefined without detections.
pub fn precision(report: &MatchReport) -> Option<Ratio> {
    Ratio::new(report.pairs.len() as u64, report.detection_count() as u64)
}

/// `|pairs| / (|pairs| + |unmatched ground truth|)`; undefined without ground truth.
pub fn recall(report: &MatchReport) -> Option<Ratio> {
    Ratio::new(report.pairs.len() as u64, report.gt_count() as u64)
}

#[derive(Debug, Clone, Copy)]
pub struct FramePair<'a> {
    pub gt: &'a Frame,
    pub det: &'a DetectionFrame,
}

/// Pairs every ground-truth frame with its detection frame from one sensor stream.
pub fn match_frames<'a>(
    gt_frames: &'a [Frame],
    det_frames: &'a [DetectionFrame],
) -> Result<Vec<FramePair<'a>>, MatchError> {
    let mut by_index: BTreeMap<u32, &DetectionFrame> = BTreeMap::new();
    for d in det_frames {
        if by_index.insert(d.source_frame_index, d).is_some() {
            return Err(MatchError::DuplicateCounterpart(d.source_frame_index));
        }
    }
    let mut pairs = Vec::with_capacity(gt_frames.len());
    for gt in gt_frames {
        let det = by_index
            .remove(&gt.index)
            .ok_or(MatchError::MissingCounterpart(gt.index))?;
        if det.timestamp <= gt.timestamp {
            return Err(MatchError::NotLater(gt.index));
        }
        pairs.push(FramePair { gt, det });
    }
    if let Some((&orphan, _)) = by_index.iter().next() {
        return Err(MatchError::OrphanDetectionFrame(orphan));
    }
    Ok(pairs)
}

/// Minimum-cost Manhattan assignment within one category, then gating.
///
/// Both inputs are taken in ascending id order; among equally cheap
/// assignments the lexicographically smallest `(gtId, detId)` pairing wins.
pub fn hungarian_match(
    detected: &[Detection],
    ground_truth: &[GtObstacle],
    gate: f64,
) -> (Vec<MatchedPair>, Vec<ObstacleId>, Vec<u32>) {
    let mut gts: Vec<&GtObstacle> = ground_truth.iter().collect();
    gts.sort_by_key(|g| g.id);
    let mut dets: Vec<&Detection> = detected.iter().collect();
    dets.sort_by_key(|d| d.id);

    let costs: Vec<f64> = gts
        .iter()
        .flat_map(|g| dets.iter().map(move |d| g.position.manhattan(d.position)))
        .collect();
    let (assignment, _) = hungarian::solve_lexicographic(&costs, gts.len(), dets.len());

    let mut pairs = Vec::new();
    let mut det_used = vec![false; dets.len()];
    let mut unmatched_gt = Vec::new();
    for (gi, col) in assignment.iter().enumerate() {
        match *col {
            Some(di) if costs[gi * dets.len() + di] <= gate => {
                det_used[di] = true;
                pairs.push(MatchedPair {
                    gt_id: gts[gi].id,
                    det_id: dets[di].id,
                    category: gts[gi].category,
                    distance: costs[gi * dets.len() + di],
                });
            }
            _ => unmatched_gt.push(gts[gi].id),
        }
    }
    let unmatched_det = dets
        .iter()
        .zip(&det_used)
        .filter(|(_, &used)| !used)
        .map(|(d, _)| d.id)
        .collect();
    (pairs, unmatched_gt, unmatched_det)
}

/// Matches one frame pair across all categories.
pub fn match_obstacles(pair: FramePair<'_>, gate: f64) -> MatchReport {
    let mut report = MatchReport {
        frame_index: pair.gt.index,
        pairs: Vec::new(),
        unmatched_gt: Vec::new(),
        unmatched_det: Vec::new(),
    };
    for category in Category::ALL {
        let gts: Vec<GtObstacle> = pair
            .gt
            .obstacles
            .iter()
            .filter(|o| o.category == category)
            .cloned()
            .collect();
        let dets: Vec<Detection> = pair
            .det
            .detections
            .iter()
            .filter(|d| d.category == category)
            .cloned()
            .collect();
        let (pairs, ug, ud) = hungarian_match(&dets, &gts, gate);
        report.pairs.extend(pairs);
        report.unmatched_gt.extend(ug);
        report.unmatched_det.extend(ud);
    }
    report.pairs.sort_by_key(|p| (p.gt_id, p.det_id));
    report.unmatched_gt.sort_unstable();
    report.unmatched_det.sort_unstable();
    report
}

/// Frame pairing plus obstacle matching for a whole stream.
pub fn evaluate_stream(
    gt_frames: &[Frame],
    det_frames: &[DetectionFrame],
    gate: f64,
) -> Result<Vec<MatchReport>, MatchError> {
    Ok(match_frames(gt_frames, det_frames)?
        .into_iter()
        .map(|p| match_obstacles(p, gate))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerceptionRate {
    pub frames_present: u64,
    pub frames_detected: u64,
}

impl PerceptionRate {
    pub fn ratio(&self) -> Ratio {
        Ratio::new(self.frames_detected, self.frames_present).expect("present in at least one frame")
    }
}

/// Fraction of frames containing obstacle `id` in which it was matched.
pub fn perception_rate(reports: &[MatchReport], id: ObstacleId) -> Result<Ratio, MatchError> {
    let present = reports.iter().filter(|r| r.contains_gt(id)).count() as u64;
    let detected = reports.iter().filter(|r| r.is_matched_gt(id)).count() as u64;
    Ratio::new(detected, present).ok_or(MatchError::UnknownObstacle(id))
}

/// Perception rates for every obstacle seen in the reports.
pub fn perception_rates(reports: &[MatchReport]) -> BTreeMap<ObstacleId, PerceptionRate> {
    let mut out: BTreeMap<ObstacleId, PerceptionRate> = BTreeMap::new();
    for r in reports {
        for p in &r.pairs {
            let e = out.entry(p.gt_id).or_insert(PerceptionRate { frames_present: 0, frames_detected: 0 });
            e.frames_present += 1;
            e.frames_detected += 1;
        }
        for &g in &r.unmatched_gt {
            out.entry(g)
                .or_insert(PerceptionRate { frames_present: 0, frames_detected: 0 })
                .frames_present += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DangerLabel {
    Danger,
    Caution,
    None,
}

pub const DANGER_DISTANCE: f64 = 1.0;
pub const CAUTION_DISTANCE: f64 = 2.0;

pub fn danger_label(distance_to_ego: f64) -> DangerLabel {
    if distance_to_ego <= DANGER_DISTANCE {
        DangerLabel::Danger
    } else if distance_to_ego <= CAUTION_DISTANCE {
        DangerLabel::Caution
    } else {
        DangerLabel::None
    }
}

/// Unweighted mean over frames where the metric is defined.
pub fn mean_defined<I: IntoIterator<Item = Option<Ratio>>>(values: I) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), r| (s + r.value(), n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean number of missed in-range obstacles per frame.
pub fn average_undetected(reports: &[MatchReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.unmatched_gt.len()).sum::<usize>() as f64 / reports.len() as f64
}

pub fn format_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.6}"),
        None => "NA".to_string(),
    }
}

/// Writes one CSV row per frame: index, precision, recall, unmatched counts.
pub fn write_frame_csv<W: std::io::Write>(reports: &[MatchReport], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "precision", "recall", "matched", "unmatched_gt", "unmatched_det"])?;
    for r in reports {
        w.write_record([
            r.frame_index.to_string(),
            format_metric(r.precision().map(Ratio::value)),
            format_metric(r.recall().map(Ratio::value)),
            r.pairs.len().to_string(),
            r.unmatched_gt.len().to_string(),
            r.unmatched_det.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Sensor;
    use crate::geometry::Vec2;

    fn g(id: u32, category: Category, x: f64, y: f64) -> GtObstacle {
        GtObstacle {
            id,
            category,
            position: Vec2::new(x, y),
            speed: 0.0,
            heading: 0.0,
            footprint: category.nominal_extents(),
        }
    }

    fn d(id: u32, category: Category, x: f64, y: f64) -> Detection {
        Detection { id, category, position: Vec2::new(x, y), speed: 0.0 }
    }

    fn frames(n: u32) -> (Vec<Frame>, Vec<DetectionFrame>) {
        let gt = (0..n).map(|i| Frame { index: i, timestamp: i as f64 / 10.0, obstacles: vec![] }).collect();
        let det = (0..n)
            .map(|i| DetectionFrame { sensor: Sensor::Fusion, timestamp: i as f64 / 10.0 + 0.02, detections: vec![], source_frame_index: i })
            .collect();
        (gt, det)
    }

    #[test]
    fn frame_pairing() {
        let (gt, det) = frames(50);
        assert_eq!(match_frames(&gt, &det).unwrap().len(), 50);
        assert!(match_frames(&[], &[]).unwrap().is_empty());

        let mut missing = det.clone();
        missing.remove(7);
        assert_eq!(match_frames(&gt, &missing).unwrap_err(), MatchError::MissingCounterpart(7));

        let mut dup = det.clone();
        dup.push(det[3].clone());
        assert_eq!(match_frames(&gt, &dup).unwrap_err(), MatchError::DuplicateCounterpart(3));

        let mut early = det.clone();
        early[2].timestamp = 0.1;
        assert_eq!(match_frames(&gt, &early).unwrap_err(), MatchError::NotLater(2));

        assert_eq!(match_frames(&gt[..3], &det[..4]).unwrap_err(), MatchError::OrphanDetectionFrame(3));
    }

    #[test]
    fn nothing_detected() {
        let (pairs, ug, ud) = hungarian_match(&[], &[g(1, Category::Vehicle, 0.0, 0.0)], DEFAULT_GATE);
        assert!(pairs.is_empty());
        assert_eq!(ug, vec![1]);
        assert!(ud.is_empty());
    }

    #[test]
    fn manhattan_cost() {
        let (pairs, _, _) = hungarian_match(&[d(7, Category::Vehicle, 0.0, 0.0)], &[g(1, Category::Vehicle, 3.0, 4.0)], 10.0);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].gt_id, pairs[0].det_id, pairs[0].distance), (1, 7, 7.0));
    }

    #[test]
    fn crossing_instance_beats_greedy() {
        // both possible assignments: {d1-g1, d2-g2} = 3 + 1, {d1-g2, d2-g1} = 5 + 1
        let dets = [d(1, Category::Pedestrian, 0.0, 0.0), d(2, Category::Pedestrian, 0.0, 4.0)];
        let gts = [g(1, Category::Pedestrian, 0.0, 3.0), g(2, Category::Pedestrian, 0.0, 5.0)];
        let brute = [3.0 + 1.0, 5.0 + 1.0].into_iter().fold(f64::INFINITY, f64::min);
        let (pairs, _, _) = hungarian_match(&dets, &gts, DEFAULT_GATE);
        let total: f64 = pairs.iter().map(|p| p.distance).sum();
        assert_eq!(total, brute);
        assert_eq!(total, 4.0);
    }

    #[test]
    fn gate_demotes_far_pairs() {
        let (pairs, ug, ud) = hungarian_match(&[d(1, Category::Vehicle, 50.0, 0.0)], &[g(3, Category::Vehicle, 0.0, 0.0)], DEFAULT_GATE);
        assert!(pairs.is_empty());
        assert_eq!((ug, ud), (vec![3], vec![1]));
    }

    #[test]
    fn categories_never_cross() {
        let gt = Frame { index: 0, timestamp: 0.0, obstacles: vec![g(1, Category::Pedestrian, 0.0, 0.0), g(2, Category::Vehicle, 10.0, 0.0)] };
        let det = DetectionFrame {
            sensor: Sensor::Fusion,
            timestamp: 0.02,
            detections: vec![d(1, Category::Vehicle, 0.0, 0.0), d(2, Category::Pedestrian, 10.0, 0.0)],
            source_frame_index: 0,
        };
        let r = match_obstacles(FramePair { gt: &gt, det: &det }, DEFAULT_GATE);
        assert!(r.pairs.is_empty());
        assert_eq!(r.unmatched_gt, vec![1, 2]);
        assert_eq!(r.unmatched_det, vec![1, 2]);
    }

    #[test]
    fn metrics_worked_examples() {
        let gt = Frame {
            index: 0,
            timestamp: 0.0,
            obstacles: vec![
                g(1, Category::Pedestrian, 5.0, 2.0),
                g(2, Category::Vehicle, 20.0, -1.75),
                g(3, Category::Pedestrian, 30.0, 5.0),
                g(4, Category::Vehicle, 40.0, 1.75),
            ],
        };
        let det = DetectionFrame {
            sensor: Sensor::Fusion,
            timestamp: 0.02,
            detections: vec![d(1, Category::Pedestrian, 5.1, 2.0), d(2, Category::Vehicle, 20.0, -1.6)],
            source_frame_index: 0,
        };
        let r = match_obstacles(FramePair { gt: &gt, det: &det }, DEFAULT_GATE);
        assert_eq!(precision(&r), Ratio::new(2, 2));
        assert_eq!(recall(&r), Ratio::new(1, 2));
        assert_eq!(recall(&r).unwrap().to_string(), "2/4");
    }

    #[test]
    fn zero_detections_precision_undefined() {
        let r = MatchReport { frame_index: 0, pairs: vec![], unmatched_gt: vec![1, 2, 3], unmatched_det: vec![] };
        assert_eq!(precision(&r), None);
        assert_eq!(recall(&r), Ratio::new(0, 3));
        assert_eq!(format_metric(precision(&r).map(Ratio::value)), "NA");
    }

    #[test]
    fn perception_rate_counts_frames() {
        let matched = |f| MatchReport {
            frame_index: f,
            pairs: vec![MatchedPair { gt_id: 9, det_id: 9, category: Category::Vehicle, distance: 0.1 }],
            unmatched_gt: vec![],
            unmatched_det: vec![],
        };
        let missed = |f| MatchReport { frame_index: f, pairs: vec![], unmatched_gt: vec![9], unmatched_det: vec![] };
        let reports = vec![matched(0), missed(1), matched(2)];
        assert_eq!(perception_rate(&reports, 9).unwrap(), Ratio::new(2, 3).unwrap());
        assert_eq!(perception_rate(&reports[..1], 9).unwrap().value(), 1.0);
        assert_eq!(perception_rate(&reports[1..2], 9).unwrap().value(), 0.0);
        assert_eq!(perception_rate(&reports, 4), Err(MatchError::UnknownObstacle(4)));
        assert_eq!(perception_rates(&reports)[&9], PerceptionRate { frames_present: 3, frames_detected: 2 });
    }

    #[test]
    fn danger_labels() {
        assert_eq!(danger_label(0.5), DangerLabel::Danger);
        assert_eq!(danger_label(1.0), DangerLabel::Danger);
        assert_eq!(danger_label(1.5), DangerLabel::Caution);
        assert_eq!(danger_label(2.0), DangerLabel::Caution);
        assert_eq!(danger_label(5.0), DangerLabel::None);
    }

    #[test]
    fn averages_skip_undefined_frames() {
        assert_eq!(mean_defined([Ratio::new(1, 2), None, Ratio::new(1, 1)]), Some(0.75));
        assert_eq!(mean_defined([None, None]), None);
    }

    #[test]
    fn frame_csv_layout() {
        let r = MatchReport { frame_index: 4, pairs: vec![], unmatched_gt: vec![1], unmatched_det: vec![] };
        let mut buf = Vec::new();
        write_frame_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "frame,precision,recall,matched,unmatched_gt,unmatched_det\n4,NA,0.000000,0,1,0\n");
    }
}
