//! Seeded synthetic data: a regression design with known coefficients and a
//! full tweet corpus with follower snapshots.
//!
//! `cargo run --example synthetic_data`

use liketally::labeler::RuleSet;
use liketally::synth::{campaign_scenario, draw_count, generate, generate_corpus, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<u64> = (0..10_000).map(|_| draw_count(10.0, 0.5, &mut rng)).collect();
    let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
    let var = draws.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    println!("NB(mu=10, alpha=0.5): mean {mean:.2} (10), variance {var:.1} (60)");

    let spec = SynthSpec {
        n: 8,
        beta: vec![1.0, 0.05, 0.02, -0.2, 0.1, 0.6],
        alpha: 0.3,
        controls: SynthSpec::tweet_controls(),
        topic_prevalences: vec![0.5],
        topic_names: vec![],
        seed: 3,
    };
    let (design, y) = generate(&spec)?;
    println!("{}", design.column_names.join(","));
    for (i, count) in y.iter().enumerate() {
        let row: Vec<String> = design.x.row(i).iter().map(|v| format!("{v:.2}")).collect();
        println!("{} -> {count}", row.join(","));
    }

    let corpus = generate_corpus(&campaign_scenario(5, 3), &RuleSet::default_rules())?;
    for t in corpus.tweets.iter().take(6) {
        println!("{} {:>5} likes  {}", t.candidate, t.likes, t.text);
    }
    Ok(())
}
