//! Round traces on disk: JSON Lines, one header record, one record per tick,
//! and a closing footer.

use crate::frames::{DetectionFrame, Frame};
use crate::perception::NeuronId;
use crate::scenario::Scenario;
use crate::sim::{DetectionStreams, EgoState, Event, RoundTrace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Header {
    scenario: Scenario,
    frame_rate: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TickRecord {
    tick: u32,
    gt: Frame,
    lidar: DetectionFrame,
    camera: DetectionFrame,
    fusion: DetectionFrame,
    ego: EgoState,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    activated: BTreeSet<NeuronId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    events: Vec<Event>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Footer {
    duration: f64,
    ticks: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "camelCase")]
enum Record {
    Header(Header),
    Tick(Box<TickRecord>),
    Footer(Footer),
}

pub fn write_trace<W: Write>(trace: &RoundTrace, mut out: W) -> Result<(), TraceError> {
    let mut line = |r: &Record| -> Result<(), TraceError> {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    line(&Record::Header(Header {
        scenario: trace.scenario.clone(),
        frame_rate: trace.frame_rate,
    }))?;
    for (k, gt) in trace.gt_frames.iter().enumerate() {
        let events = trace
            .events
            .iter()
            .filter(|e| e.tick as usize == k)
            .cloned()
            .collect();
        line(&Record::Tick(Box::new(TickRecord {
            tick: k as u32,
            gt: gt.clone(),
            lidar: trace.det_frames.lidar[k].clone(),
            camera: trace.det_frames.camera[k].clone(),
            fusion: trace.det_frames.fusion[k].clone(),
            ego: trace.ego_states[k].clone(),
            activated: trace.activations.get(k).cloned().unwrap_or_default(),
            events,
        })))?;
    }
    line(&Record::Footer(Footer {
        duration: trace.duration,
        ticks: trace.gt_frames.len(),
    }))
}

pub fn trace_to_bytes(trace: &RoundTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory cannot fail");
    buf
}

pub fn read_trace<R: BufRead>(input: R) -> Result<RoundTrace, TraceError> {
    let mut header: Option<Header> = None;
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut footer: Option<Footer> = None;
    let mut last_line = 0;

    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        last_line = n;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| TraceError::Parse { line: n, message };
        if footer.is_some() {
            return Err(err("content after footer".into()));
        }
        match serde_json::from_str::<Record>(&line).map_err(|e| err(e.to_string()))? {
            Record::Header(h) if header.is_none() => header = Some(h),
            Record::Header(_) => return Err(err("duplicate header".into())),
            Record::Tick(_) if header.is_none() => return Err(err("tick before header".into())),
            Record::Tick(t) => {
                if t.tick as usize != ticks.len() {
                    return Err(err(format!("expected tick {}, found {}", ticks.len(), t.tick)));
                }
                ticks.push(*t);
            }
            Record::Footer(f) => {
                if f.ticks != ticks.len() {
                    return Err(err(format!("footer counts {} ticks, read {}", f.ticks, ticks.len())));
                }
                footer = Some(f);
            }
        }
    }
    let header = header.ok_or(TraceError::Parse {
        line: last_line,
        message: "missing header".into(),
    })?;
    let footer = footer.ok_or(TraceError::Parse {
        line: last_line,
        message: "missing footer (truncated trace?)".into(),
    })?;

    let mut trace = RoundTrace {
        scenario: header.scenario,
        frame_rate: header.frame_rate,
        gt_frames: Vec::with_capacity(ticks.len()),
        det_frames: DetectionStreams::default(),
        ego_states: Vec::with_capacity(ticks.len()),
        activations: Vec::with_capacity(ticks.len()),
        events: Vec::new(),
        duration: footer.duration,
    };
    for t in ticks {
        trace.gt_frames.push(t.gt);
        trace.det_frames.lidar.push(t.lidar);
        trace.det_frames.camera.push(t.camera);
        trace.det_frames.fusion.push(t.fusion);
        trace.ego_states.push(t.ego);
        trace.activations.push(t.activated);
        trace.events.extend(t.events);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::perception::DetectorProfile;
    use crate::scenario::{prototype, ObstacleSpec};
    use crate::sim::{simulate_round, SimConfig};

    fn sample() -> RoundTrace {
        let o = ObstacleSpec::from_prototype(0, prototype("deer").unwrap(), Vec2::new(25.0, -1.75));
        let s = crate::scenario::Scenario::empty(8).with_obstacles(vec![o]);
        simulate_round(&s, &mut DetectorProfile::blind().build(), &SimConfig::default()).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let t = sample();
        let bytes = trace_to_bytes(&t);
        let back = read_trace(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(trace_to_bytes(&back), bytes);
    }

    #[test]
    fn truncated_trace_is_rejected() {
        let bytes = trace_to_bytes(&sample());
        let text = String::from_utf8(bytes).unwrap();
        let cut: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        match read_trace(cut.as_bytes()) {
            Err(TraceError::Parse { message, .. }) => assert!(message.contains("footer")),
            other => panic!("{other:?}"),
        }
        let garbled = text.replacen("\"tick\":2", "\"tick\":\"x\"", 1);
        assert!(matches!(read_trace(garbled.as_bytes()), Err(TraceError::Parse { line: 4, .. })));
    }
}
