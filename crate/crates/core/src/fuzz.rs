//! Mutation-based scene generation: a FIFO seed queue, one mutation per
//! round, and a child-versus-parent fitness test deciding acceptance.
//!
//! A round dequeues a parent, mutates it, simulates the child and scores it
//! against the parent. Accepted children join the generated set and the tail
//! of the queue; on rejection (or error) the parent goes back to the tail.
//! Either way exactly one scenario is enqueued per round.

use crate::frames::Sensor;
use crate::geometry::{point_polyline_distance, Aabb};
use crate::matching::{
    average_undetected, danger_label, evaluate_stream, DangerLabel, MatchError, MatchReport,
    DEFAULT_GATE,
};
use crate::mutation::{mutate, MutationError, MutationOp};
use crate::perception::{DetectorProfile, NeuronId};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scenario::{validate, Scenario};
use crate::sim::{simulate_round, RoundTrace, SimConfig, SimError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Campaign-local scenario id. Seeds take `0..n`; the child built in round
/// `r` takes `n + r`, whether or not it is accepted.
pub type ScenarioId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "camelCase")]
pub enum FitnessFn {
    /// Neurons the child activates that its parent did not.
    NeuronNovelty,
    /// Increase in the mean number of undetected obstacles per fused frame.
    Undetected,
    /// Fixed score regardless of the rounds; for exercising the search loop.
    Constant(f64),
}

impl FitnessFn {
    pub fn needs_tracker(self) -> bool {
        matches!(self, FitnessFn::NeuronNovelty)
    }

    pub fn score(self, child: &RoundSummary, parent: &RoundSummary) -> Result<f64, FuzzError> {
        match self {
            FitnessFn::NeuronNovelty => {
                if !(child.tracked && parent.tracked) {
                    return Err(FuzzError::Config(
                        "neuron novelty needs a detector profile with trackNeurons".into(),
                    ));
                }
                Ok(neuron_novelty(&child.activated, &parent.activated) as f64)
            }
            FitnessFn::Undetected => Ok(child.avg_undetected - parent.avg_undetected),
            FitnessFn::Constant(c) => Ok(c),
        }
    }
}

/// `|child \ parent|`.
pub fn neuron_novelty(child: &BTreeSet<NeuronId>, parent: &BTreeSet<NeuronId>) -> usize {
    child.difference(parent).count()
}

pub fn fitness_neuron_novelty(child: &RoundTrace, parent: &RoundTrace) -> usize {
    neuron_novelty(&child.activated_neurons(), &parent.activated_neurons())
}

pub fn fitness_undetected(child: &[MatchReport], parent: &[MatchReport]) -> f64 {
    average_undetected(child) - average_undetected(parent)
}

/// What fitness needs from a simulated round; kept per scenario so a
/// parent is never simulated twice.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub activated: BTreeSet<NeuronId>,
    pub tracked: bool,
    pub avg_undetected: f64,
}

impl RoundSummary {
    pub fn of(trace: &RoundTrace, tracked: bool) -> Result<(Self, Vec<MatchReport>), MatchError> {
        let reports = fusion_reports(trace)?;
        let summary = RoundSummary {
            activated: trace.activated_neurons(),
            tracked,
            avg_undetected: average_undetected(&reports),
        };
        Ok((summary, reports))
    }
}

/// Per-frame match reports of the fused stream.
pub fn fusion_reports(trace: &RoundTrace) -> Result<Vec<MatchReport>, MatchError> {
    evaluate_stream(&trace.gt_frames, trace.det_frames.get(Sensor::Fusion), DEFAULT_GATE)
}

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("campaign configuration: {0}")]
    Config(String),
    #[error("seed {index} is invalid: {reason}")]
    InvalidSeed { index: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum RoundError {
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Fitness(#[from] FuzzError),
}

/// How a scenario entered the campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Lineage {
    pub parent: Option<ScenarioId>,
    pub op: Option<MutationOp>,
    pub fitness: Option<f64>,
    pub round: Option<usize>,
}

/// FIFO of scenario ids plus everything known about each id.
#[derive(Debug, Clone, Default)]
pub struct SeedQueue {
    queue: VecDeque<ScenarioId>,
    scenarios: BTreeMap<ScenarioId, Scenario>,
    lineage: BTreeMap<ScenarioId, Lineage>,
}

impl SeedQueue {
    pub fn enqueue_new(&mut self, id: ScenarioId, scenario: Scenario, lineage: Lineage) {
        debug_assert!(validate(&scenario).is_empty());
        self.scenarios.insert(id, scenario);
        self.lineage.insert(id, lineage);
        self.queue.push_back(id);
    }

    pub fn requeue(&mut self, id: ScenarioId) {
        debug_assert!(self.scenarios.contains_key(&id));
        self.queue.push_back(id);
    }

    pub fn dequeue(&mut self) -> Option<ScenarioId> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Queue contents, front first.
    pub fn ids(&self) -> Vec<ScenarioId> {
        self.queue.iter().copied().collect()
    }

    pub fn scenario(&self, id: ScenarioId) -> Option<&Scenario> {
        self.scenarios.get(&id)
    }

    pub fn lineage(&self, id: ScenarioId) -> Option<&Lineage> {
        self.lineage.get(&id)
    }
}

/// Neuron coverage by round. `cumulative` is always the union of `per_round`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageLedger {
    pub per_round: Vec<BTreeSet<NeuronId>>,
    pub cumulative: BTreeSet<NeuronId>,
    /// `|cumulative|` after each round.
    pub cumulative_sizes: Vec<usize>,
}

impl CoverageLedger {
    pub fn record(&mut self, activated: BTreeSet<NeuronId>) {
        self.cumulative.extend(activated.iter().copied());
        self.per_round.push(activated);
        self.cumulative_sizes.push(self.cumulative.len());
    }

    pub fn is_consistent(&self) -> bool {
        let mut acc = BTreeSet::new();
        for (set, &size) in self.per_round.iter().zip(&self.cumulative_sizes) {
            acc.extend(set.iter().copied());
            if acc.len() != size {
                return false;
            }
        }
        acc == self.cumulative && self.per_round.len() == self.cumulative_sizes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RoundOutcome {
    Accepted,
    Rejected,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundRecord {
    pub round: usize,
    pub parent: ScenarioId,
    pub child: ScenarioId,
    pub op: Option<MutationOp>,
    pub fitness: Option<f64>,
    pub outcome: RoundOutcome,
    pub error: Option<String>,
    /// The queue length after the round's enqueue.
    pub queue_len: usize,
}

/// An accepted child.
#[derive(Debug, Clone)]
pub struct Generated {
    pub id: ScenarioId,
    pub parent: ScenarioId,
    pub round: usize,
    pub op: MutationOp,
    pub fitness: f64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub fitness: FitnessFn,
    pub max_rounds: usize,
    pub sim: SimConfig,
    pub detector: DetectorProfile,
    pub master_seed: u64,
}

/// Everything a campaign produced. `child_traces` holds the trace of every
/// child that was simulated, keyed by round; `seed_traces` those of the seeds.
#[derive(Debug)]
pub struct FuzzRun {
    pub seeds: Vec<Scenario>,
    pub generated: Vec<Generated>,
    pub rounds: Vec<RoundRecord>,
    pub ledger: CoverageLedger,
    pub queue: SeedQueue,
    pub seed_traces: BTreeMap<ScenarioId, RoundTrace>,
    pub child_traces: BTreeMap<usize, RoundTrace>,
}

impl FuzzRun {
    pub fn count(&self, outcome: RoundOutcome) -> usize {
        self.rounds.iter().filter(|r| r.outcome == outcome).count()
    }

    /// Trace of an accepted child or a seed.
    pub fn trace_of(&self, id: ScenarioId) -> Option<&RoundTrace> {
        let n = self.seeds.len() as u64;
        if id < n {
            self.seed_traces.get(&id)
        } else {
            self.child_traces.get(&((id - n) as usize))
        }
    }
}

/// Runs the search for `config.max_rounds` rounds.
///
/// Per-round failures (no valid placement, simulator or matching errors) are
/// recorded against the round and the parent is re-enqueued; only problems
/// with the campaign's inputs are returned as errors.
pub fn fuzz(seeds: &[Scenario], config: &FuzzConfig) -> Result<FuzzRun, FuzzError> {
    if seeds.is_empty() {
        return Err(FuzzError::Config("at least one seed scenario is required".into()));
    }
    if config.max_rounds == 0 {
        return Err(FuzzError::Config("maxRounds must be at least 1".into()));
    }
    if config.fitness.needs_tracker() && !config.detector.track_neurons {
        return Err(FuzzError::Config(
            "neuron novelty needs a detector profile with trackNeurons".into(),
        ));
    }
    config
        .detector
        .validate()
        .map_err(|e| FuzzError::Config(e.to_string()))?;
    for (index, s) in seeds.iter().enumerate() {
        let violations = validate(s);
        if let Some(v) = violations.first() {
            return Err(FuzzError::InvalidSeed {
                index,
                reason: v.to_string(),
            });
        }
    }

    let mut stack = config.detector.build();
    let tracked = stack.tracker.is_some();
    let n = seeds.len() as u64;
    let mut queue = SeedQueue::default();
    for (i, s) in seeds.iter().enumerate() {
        let lineage = Lineage {
            parent: None,
            op: None,
            fitness: None,
            round: None,
        };
        queue.enqueue_new(i as u64, s.clone(), lineage);
    }

    let mut summaries: BTreeMap<ScenarioId, RoundSummary> = BTreeMap::new();
    let mut run = FuzzRun {
        seeds: seeds.to_vec(),
        generated: Vec::new(),
        rounds: Vec::with_capacity(config.max_rounds),
        ledger: CoverageLedger::default(),
        queue: SeedQueue::default(),
        seed_traces: BTreeMap::new(),
        child_traces: BTreeMap::new(),
    };

    for round in 0..config.max_rounds {
        let Some(parent_id) = queue.dequeue() else { break };
        let child_id = n + round as u64;
        let parent = queue.scenario(parent_id).expect("queued ids are known").clone();
        let mut activated = BTreeSet::new();

        // The operator is kept outside the step so failed rounds can report it.
        let mut drawn: Option<MutationOp> = None;
        let mut step = || -> Result<(Scenario, RoundTrace, f64), RoundError> {
            if let std::collections::btree_map::Entry::Vacant(slot) = summaries.entry(parent_id) {
                let trace = simulate_round(&parent, &mut stack, &config.sim)?;
                let (summary, _) = RoundSummary::of(&trace, tracked)?;
                activated.extend(summary.activated.iter().copied());
                slot.insert(summary);
                run.seed_traces.insert(parent_id, trace);
            }
            let mut rng = rng_from_seed(derive_seed(config.master_seed, round as u64));
            let (op, child) = mutate(&mut rng, &parent)?;
            drawn = Some(op);
            let trace = simulate_round(&child, &mut stack, &config.sim)?;
            let (summary, _) = RoundSummary::of(&trace, tracked)?;
            activated.extend(summary.activated.iter().copied());
            let score = config.fitness.score(&summary, &summaries[&parent_id])?;
            summaries.insert(child_id, summary);
            Ok((child, trace, score))
        };

        let result = step();
        let record = match result {
            Ok((child, trace, score)) => {
                let op = drawn.expect("a successful round drew an operator");
                run.child_traces.insert(round, trace);
                let accepted = score > 0.0;
                if accepted {
                    queue.enqueue_new(
                        child_id,
                        child.clone(),
                        Lineage {
                            parent: Some(parent_id),
                            op: Some(op.clone()),
                            fitness: Some(score),
                            round: Some(round),
                        },
                    );
                    run.generated.push(Generated {
                        id: child_id,
                        parent: parent_id,
                        round,
                        op: op.clone(),
                        fitness: score,
                        scenario: child,
                    });
                } else {
                    summaries.remove(&child_id);
                    queue.requeue(parent_id);
                }
                RoundRecord {
                    round,
                    parent: parent_id,
                    child: child_id,
                    op: Some(op),
                    fitness: Some(score),
                    outcome: if accepted { RoundOutcome::Accepted } else { RoundOutcome::Rejected },
                    error: None,
                    queue_len: queue.len(),
                }
            }
            Err(e) => {
                queue.requeue(parent_id);
                RoundRecord {
                    round,
                    parent: parent_id,
                    child: child_id,
                    op: drawn,
                    fitness: None,
                    outcome: RoundOutcome::Error,
                    error: Some(e.to_string()),
                    queue_len: queue.len(),
                }
            }
        };
        run.ledger.record(activated);
        run.rounds.push(record);
    }
    run.queue = queue;
    Ok(run)
}

/// Perception mismatches of one round, graded by proximity to the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Severity {
    pub danger: usize,
    pub caution: usize,
    /// Closest any mismatched obstacle came to the ego's planned path;
    /// `None` when the round had no mismatches.
    pub min_corridor_distance: Option<f64>,
}

/// Grades every mismatch (missed ground truth or unmatched detection) in the
/// fused stream by its footprint gap to the ego at that frame.
pub fn severity(trace: &RoundTrace, reports: &[MatchReport]) -> Severity {
    let ego_extents = trace.scenario.ego.footprint;
    let mut out = Severity {
        danger: 0,
        caution: 0,
        min_corridor_distance: None,
    };
    for (k, report) in reports.iter().enumerate() {
        let (Some(gt), Some(det), Some(ego)) = (
            trace.gt_frames.get(k),
            trace.det_frames.fusion.get(k),
            trace.ego_states.get(k),
        ) else {
            continue;
        };
        let ego_box = Aabb::new(ego.position, ego_extents);
        let missed = report.unmatched_gt.iter().filter_map(|id| {
            gt.obstacles
                .iter()
                .find(|o| o.id == *id)
                .map(|o| Aabb::new(o.position, o.footprint))
        });
        let phantom = report.unmatched_det.iter().filter_map(|id| {
            det.detections
                .iter()
                .find(|d| d.id == *id)
                .map(|d| Aabb::new(d.position, d.category.nominal_extents()))
        });
        for b in missed.chain(phantom) {
            match danger_label(ego_box.gap(&b)) {
                DangerLabel::Danger => out.danger += 1,
                DangerLabel::Caution => out.caution += 1,
                DangerLabel::None => {}
            }
            let mut path = vec![ego.position];
            path.extend(ego.planned_trajectory.iter().copied());
            let d = point_polyline_distance(b.center, &path);
            out.min_corridor_distance = Some(out.min_corridor_distance.map_or(d, |m| m.min(d)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ranked {
    pub id: ScenarioId,
    #[serde(flatten)]
    pub severity: Severity,
}

/// Orders scenarios most dangerous first: danger-zone mismatches, then
/// caution-zone mismatches, then closeness to the ego path; ties by id.
pub fn rank_generated<'a, I>(rounds: I) -> Result<Vec<Ranked>, MatchError>
where
    I: IntoIterator<Item = (ScenarioId, &'a RoundTrace)>,
{
    let mut ranked = Vec::new();
    for (id, trace) in rounds {
        let reports = fusion_reports(trace)?;
        ranked.push(Ranked {
            id,
            severity: severity(trace, &reports),
        });
    }
    ranked.sort_by(rank_order);
    Ok(ranked)
}

fn rank_order(a: &Ranked, b: &Ranked) -> std::cmp::Ordering {
    let (x, y) = (&a.severity, &b.severity);
    let corridor = |s: &Severity| s.min_corridor_distance.unwrap_or(f64::INFINITY);
    y.danger
        .cmp(&x.danger)
        .then(y.caution.cmp(&x.caution))
        .then(corridor(x).total_cmp(&corridor(y)))
        .then(a.id.cmp(&b.id))
}
