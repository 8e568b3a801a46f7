//! Forward-stepwise topic selection on a synthetic design where two of six
//! topics matter.
//!
//! `cargo run --release --example stepwise_selection`

use liketally::negbin::FitOptions;
use liketally::stepwise::{forward_stepwise, trace_report};
use liketally::synth::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topics = ["trump", "isis", "economy", "women", "guns", "iran"];
    let mut beta = vec![1.5, 0.08, 0.01, -0.3, 0.1];
    beta.extend([0.0, 0.9, 0.0, -0.5, 0.05, 0.0]);
    let spec = SynthSpec {
        n: 3000,
        beta,
        alpha: 0.5,
        controls: SynthSpec::tweet_controls(),
        topic_prevalences: vec![0.25; topics.len()],
        topic_names: topics.iter().map(|s| s.to_string()).collect(),
        seed: 7,
    };
    let (design, _) = generate(&spec)?;
    let trace = forward_stepwise(&design, 4, &FitOptions::default())?;
    println!("controls only: lnL {:.2}", trace.base.loglik);
    for step in trace_report(&trace) {
        println!("step {}: + {:<8} lnL {:.2}  AIC {:.2}", step.step, step.topic, step.loglik, step.aic);
    }
    let (columns, fit) = trace.final_model();
    println!("final model {columns:?}, alpha {:.3}", fit.alpha);
    Ok(())
}
