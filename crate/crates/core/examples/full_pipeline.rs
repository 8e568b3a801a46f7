//! Every batch command in sequence over a simulated corpus, writing artifacts
//! to a directory (default: a fresh temp dir).
//!
//! `cargo run --release --example full_pipeline [out_dir]`

use liketally::pipeline::{run, Command, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("liketally-pipeline"));

    let mut config = RunConfig::new(&out);
    config.simulate_tweets = 300;
    run(Command::Simulate, &config)?;

    config.tweets = Some(out.join("tweets.jsonl"));
    config.followers = Some(out.join("followers.csv"));
    config.k = 3;
    for command in [
        Command::Summarize,
        Command::Label,
        Command::Fit,
        Command::Select,
        Command::Effects,
        Command::Rank,
        Command::PlotData,
    ] {
        for path in run(command, &config)? {
            println!("{command:<10} {}", path.display());
        }
    }
    let rank: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("rank.json"))?)?;
    for r in rank["ranking"].as_array().into_iter().flatten() {
        println!("{} {} {:.2}", r["rank"], r["candidate"], r["score"].as_f64().unwrap_or(f64::NAN));
    }
    Ok(())
}
