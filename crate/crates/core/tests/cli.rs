use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scenefuzz"));
    c.env_remove("SCENEFUZZ_OUT");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn setup(rounds: usize) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["seeds", "--out", "seeds", "--count", "3", "--seed", "5"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let config = tmp.path().join("campaign.toml");
    fs::write(
        &config,
        format!("seeds = \"seeds\"\nfitness = \"undetected\"\nmaxRounds = {rounds}\nmasterSeed = 3\ntopK = 2\n"),
    )
    .unwrap();
    (tmp, config)
}

#[test]
fn fuzz_writes_a_complete_campaign() {
    let (tmp, _) = setup(10);
    let out = run(&["fuzz", "--config", "campaign.toml", "--out", "camp"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let camp = tmp.path().join("camp");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(camp.join("manifest.json")).unwrap()).unwrap();
    let counts = &manifest["counts"];
    assert_eq!(counts["roundsRun"], 10);
    let sum = ["accepted", "rejected", "errors"].iter().map(|k| counts[k].as_u64().unwrap()).sum::<u64>();
    assert_eq!(sum, 10);
    for f in ["rounds.csv", "generated.csv", "ledger.json", "ranking.csv", "outcomes/outcomes.csv", "config.toml", "detector.toml"] {
        assert!(camp.join(f).is_file(), "{f} missing");
    }
    let rounds = fs::read_to_string(camp.join("rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 11);

    let report = run(&["report", "camp"], tmp.path());
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let csv = fs::read_to_string(camp.join("report/rounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.lines().next().unwrap().contains("rate_pedestrian"));
    assert!(camp.join("report/polar.csv").is_file());
}

#[test]
fn existing_directory_needs_force() {
    let (tmp, _) = setup(2);
    assert!(run(&["fuzz", "--config", "campaign.toml", "--out", "camp"], tmp.path()).status.success());
    let again = run(&["fuzz", "--config", "campaign.toml", "--out", "camp"], tmp.path());
    assert_eq!(again.status.code(), Some(2));
    let forced = run(&["fuzz", "--config", "campaign.toml", "--out", "camp", "--force", "--rounds", "3"], tmp.path());
    assert!(forced.status.success());
    let rounds = fs::read_to_string(tmp.path().join("camp/rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 4);
}

#[test]
fn missing_seeds_is_a_config_error_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "seeds = \"nope\"\nfitness = \"neuron\"\nmaxRounds = 3\n").unwrap();
    let out = run(&["fuzz", "--config", "c.toml", "--out", "camp"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("camp").exists());
}

#[test]
fn output_root_from_environment() {
    let (tmp, _) = setup(2);
    let out = bin()
        .args(["fuzz", "--config", "campaign.toml"])
        .env("SCENEFUZZ_OUT", tmp.path().join("root"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("root/campaign/manifest.json").is_file());
    let none = run(&["fuzz", "--config", "campaign.toml"], tmp.path());
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn replay_prints_one_row_per_frame() {
    let (tmp, _) = setup(2);
    assert!(run(&["fuzz", "--config", "campaign.toml", "--out", "camp"], tmp.path()).status.success());
    let trace = "camp/traces/seed-00000.jsonl";
    let frames = fs::read_to_string(tmp.path().join(trace)).unwrap().lines().count() - 2;
    let out = run(&["replay", trace], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = text.lines().take_while(|l| !l.starts_with("verdict")).count() - 1;
    assert_eq!(rows, frames);
    assert!(text.contains("verdict: "));

    let empty = run(&["replay", trace, "--from", "500", "--to", "600"], tmp.path());
    let text = String::from_utf8(empty.stdout).unwrap();
    assert_eq!(text.lines().take_while(|l| !l.starts_with("verdict")).count(), 1);
}

#[test]
fn corrupt_trace_and_incomplete_campaign() {
    let (tmp, _) = setup(3);
    fs::write(tmp.path().join("bad.jsonl"), "{\"record\":\"header\"\n").unwrap();
    assert_eq!(run(&["replay", "bad.jsonl"], tmp.path()).status.code(), Some(2));

    assert!(run(&["fuzz", "--config", "campaign.toml", "--out", "camp"], tmp.path()).status.success());
    let rounds = fs::read_to_string(tmp.path().join("camp/rounds.csv")).unwrap();
    let ok_round = rounds
        .lines()
        .skip(1)
        .position(|l| !l.contains(",error,"))
        .expect("a round without error");
    fs::remove_file(tmp.path().join(format!("camp/traces/round-{ok_round:05}.jsonl"))).unwrap();
    let out = run(&["report", "camp"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("[{ok_round}]")));
}
