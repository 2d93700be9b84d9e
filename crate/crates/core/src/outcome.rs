//! Adverse-outcome classification of finished rounds.
//!
//! Verdicts are checked in a fixed order — collision, unnecessary stop,
//! wrong destination — and the first that holds wins; a round matching none
//! is nominal.

use crate::matching::{mean_defined, MatchReport, Ratio};
use crate::scenario::ObstacleId;
use crate::sim::RoundTrace;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Seconds of history attributed to a collision.
pub const ATTRIBUTION_WINDOW: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    Collision,
    UnnecessaryStop,
    WrongDestination,
    Nominal,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Collision => "collision",
            Verdict::UnnecessaryStop => "unnecessaryStop",
            Verdict::WrongDestination => "wrongDestination",
            Verdict::Nominal => "nominal",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evidence {
    pub timestamp: f64,
    pub description: String,
    pub frames: Vec<u32>,
}

/// How well perception did around the deciding event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContributingPerception {
    pub obstacle: Option<ObstacleId>,
    /// `[from, to]` in seconds.
    pub window: [f64; 2],
    /// Frames in the window where the obstacle was detected, over frames
    /// where it was in range. `None` if it was never in range.
    pub perception_rate: Option<Ratio>,
    /// Mean per-frame precision over the window's defined frames.
    pub mean_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutcomeReport {
    pub verdict: Verdict,
    pub evidence: Vec<Evidence>,
    pub contributing_perception: Option<ContributingPerception>,
    pub final_distance: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum OutcomeError {
    #[error("no match report for frame {0}")]
    MissingReport(u32),
    #[error("{reports} match reports for {frames} frames")]
    CountMismatch { reports: usize, frames: usize },
}

/// Classifies `trace` using the fused-stream `reports`, one per frame.
pub fn classify(trace: &RoundTrace, reports: &[MatchReport]) -> Result<OutcomeReport, OutcomeError> {
    if reports.len() != trace.gt_frames.len() {
        return Err(OutcomeError::CountMismatch {
            reports: reports.len(),
            frames: trace.gt_frames.len(),
        });
    }
    for (r, gt) in reports.iter().zip(&trace.gt_frames) {
        if r.frame_index != gt.index {
            return Err(OutcomeError::MissingReport(gt.index));
        }
    }
    let destination = trace.scenario.ego.destination;
    let final_position = trace.final_ego_position().unwrap_or(trace.scenario.ego.position);
    let final_distance = final_position.distance(destination);

    if let Some((event, obstacle)) = trace.collision() {
        let from = event.timestamp - ATTRIBUTION_WINDOW;
        let window: Vec<&MatchReport> = reports
            .iter()
            .zip(&trace.gt_frames)
            .filter(|(_, gt)| gt.timestamp >= from - 1e-9 && gt.timestamp <= event.timestamp)
            .map(|(r, _)| r)
            .collect();
        let present: Vec<u32> = window
            .iter()
            .filter(|r| r.contains_gt(obstacle))
            .map(|r| r.frame_index)
            .collect();
        let detected = window.iter().filter(|r| r.is_matched_gt(obstacle)).count() as u64;
        let missed: Vec<u32> = window
            .iter()
            .filter(|r| r.unmatched_gt.contains(&obstacle))
            .map(|r| r.frame_index)
            .collect();
        let mut evidence = vec![Evidence {
            timestamp: event.timestamp,
            description: format!("ego struck obstacle {obstacle}"),
            frames: vec![event.tick],
        }];
        if !missed.is_empty() {
            evidence.push(Evidence {
                timestamp: event.timestamp,
                description: format!(
                    "obstacle {obstacle} undetected in {} of {} frames before impact",
                    missed.len(),
                    present.len()
                ),
                frames: missed,
            });
        }
        return Ok(OutcomeReport {
            verdict: Verdict::Collision,
            evidence,
            contributing_perception: Some(ContributingPerception {
                obstacle: Some(obstacle),
                window: [from.max(0.0), event.timestamp],
                perception_rate: Ratio::new(detected, present.len() as u64),
                mean_precision: mean_defined(window.iter().map(|r| r.precision())),
            }),
            final_distance,
        });
    }

    let phantom_brakes = phantom_brakes(trace, reports);
    if !phantom_brakes.is_empty() {
        let (first_tick, _, cause) = phantom_brakes[0];
        let t = trace.gt_frames[first_tick as usize].timestamp;
        let frames: Vec<u32> = phantom_brakes.iter().map(|&(_, f, _)| f).collect();
        let from = (t - ATTRIBUTION_WINDOW).max(0.0);
        let window = reports
            .iter()
            .zip(&trace.gt_frames)
            .filter(|(_, gt)| gt.timestamp >= from && gt.timestamp <= t)
            .map(|(r, _)| r.precision());
        return Ok(OutcomeReport {
            verdict: Verdict::UnnecessaryStop,
            evidence: vec![Evidence {
                timestamp: t,
                description: format!(
                    "braked for detection {cause}, which matches no ground-truth obstacle"
                ),
                frames,
            }],
            contributing_perception: Some(ContributingPerception {
                obstacle: None,
                window: [from, t],
                perception_rate: None,
                mean_precision: mean_defined(window),
            }),
            final_distance,
        });
    }

    let tolerance = crate::sim::SimConfig::default().arrival_tolerance;
    if !trace.arrived() && final_distance > tolerance {
        let last = trace.gt_frames.last().map(|f| f.index);
        let mut evidence = vec![Evidence {
            timestamp: trace.duration,
            description: format!("round ended {final_distance:.2} m from the destination"),
            frames: last.into_iter().collect(),
        }];
        if let Some(map) = trace.scenario.map() {
            if !map.in_any_lane(final_position) {
                evidence.push(Evidence {
                    timestamp: trace.duration,
                    description: format!(
                        "lane deviation: ego ended outside every lane at ({:.2}, {:.2})",
                        final_position.x, final_position.y
                    ),
                    frames: last.into_iter().collect(),
                });
            }
        }
        return Ok(OutcomeReport {
            verdict: Verdict::WrongDestination,
            evidence,
            contributing_perception: None,
            final_distance,
        });
    }

    Ok(OutcomeReport {
        verdict: Verdict::Nominal,
        evidence: Vec::new(),
        contributing_perception: None,
        final_distance,
    })
}

/// `(tick, consumed frame, detection id)` for every tick where the ego
/// braked for a detection left unmatched in the frame it was planning from.
fn phantom_brakes(trace: &RoundTrace, reports: &[MatchReport]) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for (tick, state) in trace.ego_states.iter().enumerate() {
        if !state.brake_flag {
            continue;
        }
        if let (Some(cause), Some(frame)) = (state.brake_cause, state.consumed_frame) {
            let unmatched = reports
                .get(frame as usize)
                .is_some_and(|r| r.unmatched_det.contains(&cause));
            if unmatched {
                out.push((tick as u32, frame, cause));
            }
        }
    }
    out
}

/// One CSV row per classified round.
pub fn write_outcome_csv<'a, W, I>(rows: I, out: W) -> csv::Result<()>
where
    W: std::io::Write,
    I: IntoIterator<Item = (u64, &'a RoundTrace, &'a OutcomeReport)>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "verdict", "event_time", "end_time", "final_distance"])?;
    for (id, trace, report) in rows {
        let event_time = report
            .evidence
            .first()
            .filter(|_| report.verdict != Verdict::WrongDestination)
            .map_or("NA".to_string(), |e| format!("{:.3}", e.timestamp));
        w.write_record([
            id.to_string(),
            report.verdict.to_string(),
            event_time,
            format!("{:.3}", trace.duration),
            format!("{:.3}", report.final_distance),
        ])?;
    }
    w.flush()?;
    Ok(())
}
