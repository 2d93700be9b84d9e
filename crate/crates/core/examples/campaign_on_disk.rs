//! The full artifact pipeline the binary drives: seeds, a campaign
//! directory, and the plot-ready report.

use scenefuzz::campaign::{cmd_fuzz, cmd_replay, cmd_report, cmd_seeds, Overrides};
use std::fs;

fn main() {
    let root = std::env::temp_dir().join(format!("scenefuzz-example-{}", std::process::id()));
    let _ = fs::remove_dir_all(&root);
    cmd_seeds(&root.join("seeds"), 10, 11, false).unwrap();
    let config = root.join("campaign.toml");
    fs::write(&config, "seeds = \"seeds\"\nfitness = \"neuron\"\nmaxRounds = 60\nmasterSeed = 11\ntopK = 3\n").unwrap();

    let over = Overrides { out: Some(root.join("campaign")), ..Overrides::default() };
    let (dir, manifest) = cmd_fuzz(&config, &over).unwrap();
    println!("{}: {:?}, {} neurons covered", dir.display(), manifest.counts, manifest.coverage);
    println!("{}", fs::read_to_string(dir.join("ranking.csv")).unwrap());
    println!("{}", fs::read_to_string(dir.join("outcomes/outcomes.csv")).unwrap());

    let rows = cmd_report(&dir).unwrap();
    let report = fs::read_to_string(dir.join("report/rounds.csv")).unwrap();
    println!("report for {rows} rounds; first lines:");
    for line in report.lines().take(4) {
        println!("    {line}");
    }
    print!("{}", cmd_replay(&dir.join("traces/round-00000.jsonl"), Some((0, 4))).unwrap());
    fs::remove_dir_all(&root).unwrap();
}
