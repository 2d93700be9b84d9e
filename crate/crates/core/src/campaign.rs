//! Campaigns on disk: configuration, the output directory layout, and the
//! `fuzz` / `replay` / `report` / `seeds` commands behind the binary.
//!
//! Layout of a campaign directory:
//!
//! ```text
//! manifest.json        config snapshot, timestamps, round counts
//! config.toml          the resolved configuration
//! detector.toml        the detector profile used
//! scenarios/NNNNN.toml seeds (ids 0..n) and accepted children
//! traces/seed-NNNNN.jsonl, traces/round-NNNNN.jsonl
//! rounds.csv           one row per round
//! generated.csv        accepted children with lineage and fitness
//! ledger.json          per-round and cumulative neuron coverage
//! ranking.csv          accepted children, most dangerous first
//! outcomes/            long re-runs of the top-ranked children, classified
//! ```
//!
//! Everything except the manifest's timestamps is a pure function of the
//! configuration, so two runs with the same config produce identical bytes.

use crate::fuzz::{fuzz, fusion_reports, rank_generated, FitnessFn, FuzzConfig, FuzzRun, RoundOutcome};
use crate::geometry::Aabb;
use crate::matching::{danger_label, format_metric, mean_defined, perception_rates, DangerLabel, Ratio};
use crate::outcome::{classify, write_outcome_csv, OutcomeReport};
use crate::perception::DetectorProfile;
use crate::scenario::{load_valid_scenario, one_obstacle_seeds, save_scenario, Category, Scenario};
use crate::sim::{simulate_round, RoundTrace, SimConfig, DEFAULT_FRAME_RATE, LONG_ROUND, SHORT_ROUND};
use crate::trace::{read_trace, write_trace};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

/// Default output root when neither `--out` nor the config names a directory.
pub const OUT_ENV: &str = "SCENEFUZZ_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("campaign: {0}")]
    Campaign(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Campaign(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitnessKind {
    /// Neurons newly activated relative to the parent.
    Neuron,
    /// Increase in undetected obstacles per frame.
    Undetected,
}

impl From<FitnessKind> for FitnessFn {
    fn from(k: FitnessKind) -> Self {
        match k {
            FitnessKind::Neuron => FitnessFn::NeuronNovelty,
            FitnessKind::Undetected => FitnessFn::Undetected,
        }
    }
}

/// Campaign configuration. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CampaignConfig {
    /// A scenario file, or a directory whose `*.toml` files are the seeds.
    pub seeds: PathBuf,
    pub fitness: FitnessKind,
    pub max_rounds: usize,
    #[serde(default, with = "crate::scenario::seed_serde")]
    pub master_seed: u64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    /// Detector profile; the built-in default profile when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// How many top-ranked children get a long re-run and a verdict.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_long_duration")]
    pub long_duration: f64,
}

fn default_duration() -> f64 {
    SHORT_ROUND
}
fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}
fn default_top_k() -> usize {
    5
}
fn default_long_duration() -> f64 {
    LONG_ROUND
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.seeds = base.join(&config.seeds);
        config.detector = config.detector.map(|d| base.join(d));
        config.out = config.out.map(|o| base.join(o));
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.max_rounds == 0 {
            return bad("maxRounds must be at least 1");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be > 0");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frameRate must be > 0");
        }
        if !(self.long_duration > 0.0 && self.long_duration.is_finite()) {
            return bad("longDuration must be > 0");
        }
        Ok(())
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            frame_rate: self.frame_rate,
            ..SimConfig::default().with_duration(self.duration)
        }
    }
}

/// Command-line overrides for [`cmd_fuzz`].
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rounds: Option<usize>,
    pub seed: Option<u64>,
    pub fitness: Option<FitnessKind>,
    pub duration: Option<f64>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub rounds_run: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub errors: usize,
}

impl Counts {
    pub fn reconciles(&self) -> bool {
        self.accepted + self.rejected + self.errors == self.rounds_run
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CampaignManifest {
    pub config: CampaignConfig,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: u64,
    pub seeds: usize,
    pub counts: Counts,
    pub coverage: usize,
    pub outputs: BTreeMap<String, String>,
}

impl CampaignManifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| {
            CliError::Campaign(format!("{} is not a campaign ({}: {e})", dir.display(), path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Campaign(format!("{}: {e}", path.display())))
    }
}

/// Reads seeds from a scenario file or a directory of them (sorted by name).
pub fn load_seeds(path: &Path) -> Result<Vec<Scenario>, CliError> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::Config(format!("seeds {}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(CliError::Config(format!("no seed scenarios in {}", path.display())));
    }
    files
        .iter()
        .map(|f| {
            let bytes = fs::read(f).map_err(|e| CliError::Config(format!("seed {}: {e}", f.display())))?;
            load_valid_scenario(&bytes).map_err(|e| CliError::Config(format!("seed {}: {e}", f.display())))
        })
        .collect()
}

pub fn load_profile(path: Option<&Path>) -> Result<DetectorProfile, CliError> {
    match path {
        None => Ok(DetectorProfile::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("detector profile {}: {e}", p.display())))?;
            DetectorProfile::from_toml(&text)
                .map_err(|e| CliError::Config(format!("detector profile {}: {e}", p.display())))
        }
    }
}

/// Output directory: `--out`, else the config's `out`, else
/// `$SCENEFUZZ_OUT/<config file stem>`.
pub fn resolve_out(config_path: &Path, config: &CampaignConfig, over: Option<&Path>) -> Result<PathBuf, CliError> {
    if let Some(o) = over.map(Path::to_path_buf).or_else(|| config.out.clone()) {
        return Ok(o);
    }
    match std::env::var_os(OUT_ENV) {
        Some(root) => {
            let stem = config_path.file_stem().unwrap_or_default();
            Ok(PathBuf::from(root).join(stem))
        }
        None => Err(CliError::Config(format!(
            "no output directory: pass --out, set `out` in the config, or set {OUT_ENV}"
        ))),
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn write_trace_file(path: &Path, trace: &RoundTrace) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_trace(trace, &mut w).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    w.flush().map_err(io_err(path))
}

pub fn load_trace(path: &Path) -> Result<RoundTrace, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_trace(BufReader::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn scenario_file(id: u64) -> String {
    format!("{id:05}.toml")
}

pub fn round_trace_file(round: usize) -> String {
    format!("round-{round:05}.jsonl")
}

pub fn seed_trace_file(id: u64) -> String {
    format!("seed-{id:05}.jsonl")
}

/// Runs a campaign and writes its directory. Nothing is created on disk
/// until the config, seeds and detector profile have all been validated.
pub fn cmd_fuzz(config_path: &Path, over: &Overrides) -> Result<(PathBuf, CampaignManifest), CliError> {
    let started = now();
    let mut config = CampaignConfig::load(config_path)?;
    if let Some(r) = over.rounds {
        config.max_rounds = r;
    }
    if let Some(s) = over.seed {
        config.master_seed = s;
    }
    if let Some(f) = over.fitness {
        config.fitness = f;
    }
    if let Some(d) = over.duration {
        config.duration = d;
    }
    config.check()?;
    let seeds = load_seeds(&config.seeds)?;
    let profile = load_profile(config.detector.as_deref())?;
    let out = resolve_out(config_path, &config, over.out.as_deref())?;
    if out.exists() {
        if !over.force {
            return Err(CliError::Config(format!(
                "{} already exists; pass --force to overwrite it",
                out.display()
            )));
        }
        fs::remove_dir_all(&out).map_err(io_err(&out))?;
    }

    let fuzz_config = FuzzConfig {
        fitness: config.fitness.into(),
        max_rounds: config.max_rounds,
        sim: config.sim(),
        detector: profile.clone(),
        master_seed: config.master_seed,
    };
    let run = fuzz(&seeds, &fuzz_config).map_err(|e| CliError::Config(e.to_string()))?;

    for sub in ["scenarios", "traces", "outcomes"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let mut snapshot = config.clone();
    snapshot.out = None;
    write_file(&out.join("config.toml"), toml::to_string(&snapshot).expect("config serializes").as_bytes())?;
    write_file(&out.join("detector.toml"), profile.to_toml().as_bytes())?;
    write_run(&out, &run)?;
    write_outcomes(&out, &run, &config, &profile, &fuzz_config)?;

    let counts = Counts {
        rounds_run: run.rounds.len(),
        accepted: run.count(RoundOutcome::Accepted),
        rejected: run.count(RoundOutcome::Rejected),
        errors: run.count(RoundOutcome::Error),
    };
    debug_assert!(counts.reconciles());
    let outputs = [
        ("scenarios", "scenarios/"),
        ("traces", "traces/"),
        ("rounds", "rounds.csv"),
        ("generated", "generated.csv"),
        ("ledger", "ledger.json"),
        ("ranking", "ranking.csv"),
        ("outcomes", "outcomes/outcomes.csv"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    let manifest = CampaignManifest {
        config: snapshot,
        started,
        finished: now(),
        seeds: seeds.len(),
        counts,
        coverage: run.ledger.cumulative.len(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out.join("manifest.json"), text.as_bytes())?;
    Ok((out, manifest))
}

fn write_run(out: &Path, run: &FuzzRun) -> Result<(), CliError> {
    let scenarios = out.join("scenarios");
    let traces = out.join("traces");
    for (id, s) in run.seeds.iter().enumerate() {
        let bytes = save_scenario(s).map_err(|e| CliError::Campaign(e.to_string()))?;
        write_file(&scenarios.join(scenario_file(id as u64)), &bytes)?;
    }
    for g in &run.generated {
        let bytes = save_scenario(&g.scenario).map_err(|e| CliError::Campaign(e.to_string()))?;
        write_file(&scenarios.join(scenario_file(g.id)), &bytes)?;
    }
    for (id, t) in &run.seed_traces {
        write_trace_file(&traces.join(seed_trace_file(*id)), t)?;
    }
    for (round, t) in &run.child_traces {
        write_trace_file(&traces.join(round_trace_file(*round)), t)?;
    }

    let path = out.join("rounds.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["round", "parent", "child", "operator", "fitness", "outcome", "coverage", "queue", "error"])
        .map_err(csv_err(&path))?;
    for (r, size) in run.rounds.iter().zip(&run.ledger.cumulative_sizes) {
        let outcome = serde_json::to_value(&r.outcome).expect("serializes");
        w.write_record([
            r.round.to_string(),
            r.parent.to_string(),
            r.child.to_string(),
            r.op.as_ref().map_or(String::new(), |o| o.to_string()),
            r.fitness.map_or("NA".into(), |f| format!("{f}")),
            outcome.as_str().unwrap_or_default().to_string(),
            size.to_string(),
            r.queue_len.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = out.join("generated.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["id", "parent", "round", "operator", "fitness"]).map_err(csv_err(&path))?;
    for g in &run.generated {
        w.write_record([
            g.id.to_string(),
            g.parent.to_string(),
            g.round.to_string(),
            g.op.to_string(),
            format!("{}", g.fitness),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let ledger = serde_json::to_string(&run.ledger).expect("ledger serializes");
    write_file(&out.join("ledger.json"), ledger.as_bytes())
}

fn write_outcomes(
    out: &Path,
    run: &FuzzRun,
    config: &CampaignConfig,
    profile: &DetectorProfile,
    fuzz_config: &FuzzConfig,
) -> Result<(), CliError> {
    let traces = run
        .generated
        .iter()
        .filter_map(|g| run.trace_of(g.id).map(|t| (g.id, t)));
    let ranked = rank_generated(traces).map_err(|e| CliError::Campaign(e.to_string()))?;

    let path = out.join("ranking.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["rank", "id", "danger", "caution", "min_corridor_distance"]).map_err(csv_err(&path))?;
    for (rank, r) in ranked.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            r.id.to_string(),
            r.severity.danger.to_string(),
            r.severity.caution.to_string(),
            format_metric(r.severity.min_corridor_distance),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    // Long re-runs do not need coverage tracking.
    let long_profile = DetectorProfile {
        track_neurons: false,
        ..profile.clone()
    };
    let long_sim = SimConfig {
        frame_rate: config.frame_rate,
        ..fuzz_config.sim.clone().with_duration(config.long_duration)
    };
    let dir = out.join("outcomes");
    let mut classified: Vec<(u64, RoundTrace, OutcomeReport)> = Vec::new();
    for r in ranked.iter().take(config.top_k) {
        let scenario = &run
            .generated
            .iter()
            .find(|g| g.id == r.id)
            .expect("ranked ids are generated")
            .scenario;
        let trace = simulate_round(scenario, &mut long_profile.build(), &long_sim)
            .map_err(|e| CliError::Campaign(format!("long re-run of {}: {e}", r.id)))?;
        let reports = fusion_reports(&trace).map_err(|e| CliError::Campaign(e.to_string()))?;
        let report = classify(&trace, &reports).map_err(|e| CliError::Campaign(e.to_string()))?;
        write_trace_file(&dir.join(format!("{:05}.jsonl", r.id)), &trace)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&dir.join(format!("{:05}.json", r.id)), json.as_bytes())?;
        classified.push((r.id, trace, report));
    }
    let path = dir.join("outcomes.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_outcome_csv(classified.iter().map(|(id, t, o)| (*id, t, o)), file).map_err(csv_err(&path))
}

/// Per-frame table of a trace, optionally limited to frames `range`,
/// followed by the round's verdict.
pub fn cmd_replay(trace_path: &Path, range: Option<(u32, u32)>) -> Result<String, CliError> {
    let trace = load_trace(trace_path)?;
    let reports = fusion_reports(&trace).map_err(|e| CliError::Config(format!("{}: {e}", trace_path.display())))?;
    let mut out = String::new();
    writeln!(
        out,
        "{:>5} {:>7} {:>3} {:>3} {:>9} {:>9} {:>6} {:>7}",
        "frame", "time", "gt", "det", "precision", "recall", "danger", "caution"
    )
    .unwrap();
    let ego_extents = trace.scenario.ego.footprint;
    for (k, r) in reports.iter().enumerate() {
        let gt = &trace.gt_frames[k];
        if range.is_some_and(|(a, b)| gt.index < a || gt.index > b) {
            continue;
        }
        let ego = Aabb::new(trace.ego_states[k].position, ego_extents);
        let mut labels = [0usize; 2];
        for o in &gt.obstacles {
            match danger_label(ego.gap(&Aabb::new(o.position, o.footprint))) {
                DangerLabel::Danger => labels[0] += 1,
                DangerLabel::Caution => labels[1] += 1,
                DangerLabel::None => {}
            }
        }
        writeln!(
            out,
            "{:>5} {:>7.2} {:>3} {:>3} {:>9} {:>9} {:>6} {:>7}",
            gt.index,
            gt.timestamp,
            r.gt_count(),
            r.detection_count(),
            format_metric(r.precision().map(Ratio::value)),
            format_metric(r.recall().map(Ratio::value)),
            labels[0],
            labels[1],
        )
        .unwrap();
    }
    let verdict = classify(&trace, &reports).map_err(|e| CliError::Campaign(e.to_string()))?;
    writeln!(out, "verdict: {}", verdict.verdict).unwrap();
    for e in &verdict.evidence {
        writeln!(out, "  t={:.2} {} (frames {:?})", e.timestamp, e.description, e.frames).unwrap();
    }
    Ok(out)
}

/// Writes `report/rounds.csv`, `report/polar.csv` into a finished campaign
/// directory; both recompute from the stored traces. Returns the number of
/// rounds reported.
pub fn cmd_report(dir: &Path) -> Result<usize, CliError> {
    let manifest = CampaignManifest::load(dir)?;
    let rounds_path = dir.join("rounds.csv");
    let mut errored = Vec::new();
    let mut rdr = csv::Reader::from_path(&rounds_path).map_err(|e| CliError::Campaign(format!("{}: {e}", rounds_path.display())))?;
    for row in rdr.records() {
        let row = row.map_err(|e| CliError::Campaign(format!("{}: {e}", rounds_path.display())))?;
        errored.push(row.get(5) == Some("error"));
    }
    let n = manifest.counts.rounds_run;
    let missing: Vec<usize> = (0..n)
        .filter(|&r| errored.get(r).is_none() || (!errored[r] && !dir.join("traces").join(round_trace_file(r)).is_file()))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Campaign(format!("incomplete campaign; missing rounds {missing:?}")));
    }

    let report_dir = dir.join("report");
    fs::create_dir_all(&report_dir).map_err(io_err(&report_dir))?;
    let rounds_out = report_dir.join("rounds.csv");
    let polar_out = report_dir.join("polar.csv");
    let mut rw = csv::Writer::from_path(&rounds_out).map_err(csv_err(&rounds_out))?;
    let mut pw = csv::Writer::from_path(&polar_out).map_err(csv_err(&polar_out))?;
    rw.write_record([
        "round", "frames", "avg_precision", "avg_recall", "avg_undetected",
        "rate_pedestrian", "rate_vehicle", "rate_animal",
    ])
    .map_err(csv_err(&rounds_out))?;
    pw.write_record(["round", "frame", "obstacle", "category", "distance", "bearing_deg", "detected"])
        .map_err(csv_err(&polar_out))?;

    for (r, &was_error) in errored.iter().enumerate().take(n) {
        if was_error {
            let mut row = vec![r.to_string(), "0".into()];
            row.extend(std::iter::repeat_n("NA".to_string(), 6));
            rw.write_record(&row).map_err(csv_err(&rounds_out))?;
            continue;
        }
        let trace = load_trace(&dir.join("traces").join(round_trace_file(r)))
            .map_err(|e| CliError::Campaign(e.to_string()))?;
        let reports = fusion_reports(&trace).map_err(|e| CliError::Campaign(e.to_string()))?;
        let rates = perception_rates(&reports);
        let mut by_category: BTreeMap<Category, Vec<Option<Ratio>>> = BTreeMap::new();
        for frame in &trace.gt_frames {
            for o in &frame.obstacles {
                by_category.entry(o.category).or_default();
            }
        }
        for (id, rate) in &rates {
            let category = trace
                .gt_frames
                .iter()
                .flat_map(|f| &f.obstacles)
                .find(|o| o.id == *id)
                .map(|o| o.category)
                .expect("rated obstacles appear in ground truth");
            by_category.entry(category).or_default().push(Some(rate.ratio()));
        }
        let rate = |c: Category| format_metric(by_category.get(&c).and_then(|v| mean_defined(v.iter().copied())));
        rw.write_record([
            r.to_string(),
            reports.len().to_string(),
            format_metric(mean_defined(reports.iter().map(|x| x.precision()))),
            format_metric(mean_defined(reports.iter().map(|x| x.recall()))),
            format!("{:.6}", crate::matching::average_undetected(&reports)),
            rate(Category::Pedestrian),
            rate(Category::Vehicle),
            rate(Category::Animal),
        ])
        .map_err(csv_err(&rounds_out))?;

        for (k, report) in reports.iter().enumerate() {
            let ego = trace.ego_states[k].pose();
            for o in &trace.gt_frames[k].obstacles {
                let local = ego.to_local(o.position);
                pw.write_record([
                    r.to_string(),
                    report.frame_index.to_string(),
                    o.id.to_string(),
                    o.category.as_str().to_string(),
                    format!("{:.3}", local.norm()),
                    format!("{:.2}", local.y.atan2(local.x).to_degrees()),
                    u8::from(report.is_matched_gt(o.id)).to_string(),
                ])
                .map_err(csv_err(&polar_out))?;
            }
        }
    }
    rw.flush().map_err(io_err(&rounds_out))?;
    pw.flush().map_err(io_err(&polar_out))?;
    Ok(n)
}

/// Writes `count` one-obstacle seed scenarios into `dir`.
pub fn cmd_seeds(dir: &Path, count: usize, master_seed: u64, force: bool) -> Result<Vec<PathBuf>, CliError> {
    if count == 0 {
        return Err(CliError::Config("count must be at least 1".into()));
    }
    if dir.exists() && !force && fs::read_dir(dir).map_err(io_err(dir))?.next().is_some() {
        return Err(CliError::Config(format!(
            "{} is not empty; pass --force to write into it",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (i, s) in one_obstacle_seeds(count, master_seed).iter().enumerate() {
        let path = dir.join(format!("seed-{i:02}.toml"));
        let bytes = save_scenario(s).map_err(|e| CliError::Campaign(e.to_string()))?;
        write_file(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let c = CampaignConfig::from_toml("seeds = \"s\"\nfitness = \"neuron\"\nmaxRounds = 3\n").unwrap();
        assert_eq!(c.duration, 5.0);
        assert_eq!(c.long_duration, 45.0);
        assert_eq!(c.top_k, 5);
        let e = CampaignConfig::from_toml("seeds = \"s\"\nfitness = \"neuron\"\nmaxRounds = 3\nbogus = 1\n");
        assert_eq!(e.unwrap_err().exit_code(), 2);
    }

    #[test]
    fn exit_codes_are_distinct() {
        let io = CliError::Io {
            path: "x".into(),
            source: std::io::Error::other("x"),
        };
        let codes = [CliError::Config(String::new()).exit_code(), io.exit_code(), CliError::Campaign(String::new()).exit_code()];
        assert_eq!(codes, [2, 3, 4]);
    }

    #[test]
    fn counts_reconcile() {
        let c = Counts { rounds_run: 5, accepted: 2, rejected: 2, errors: 1 };
        assert!(c.reconciles());
        assert!(!Counts { errors: 0, ..c }.reconciles());
    }
}
