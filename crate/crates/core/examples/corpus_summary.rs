//! Summary statistics and plot data for a tweet corpus.
//!
//! `cargo run --example corpus_summary [tweets.jsonl followers.csv]`
//! (defaults to a synthetic corpus)

use liketally::corpus::{self, FollowerSeries};
use liketally::labeler::RuleSet;
use liketally::synth::{campaign_scenario, generate_corpus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (tweets, followers) = match args.as_slice() {
        [t, f] => (corpus::parse_tweets(t)?, FollowerSeries::parse(f)?),
        _ => {
            let synth = generate_corpus(&campaign_scenario(1, 200), &RuleSet::default_rules())?;
            (synth.tweets, synth.followers)
        }
    };
    println!("candidate   mean      sd   min    max   n");
    for c in corpus::candidates(&tweets) {
        let s = corpus::summarize_likes(&tweets, &c)?;
        println!("{c:<10}{:>6.1}{:>8.1}{:>6}{:>7}{:>4}", s.mean, s.sd, s.min, s.max, s.n);
    }
    let dir = plot_dir();
    let written = corpus::emit_plot_data(&tweets, &followers, &dir)?;
    println!("plot data in {}: {written:?}", dir.display());
    Ok(())
}

fn plot_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("liketally-plotdata");
    std::fs::create_dir_all(&dir).expect("temp dir is writable");
    dir
}
