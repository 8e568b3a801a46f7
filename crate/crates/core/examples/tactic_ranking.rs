//! Marginal effects, conditional topic probabilities and the resulting
//! candidate ranking.
//!
//! `cargo run --release --example tactic_ranking`

use liketally::features::candidate_topic_universe;
use liketally::labeler::RuleSet;
use liketally::negbin::FitOptions;
use liketally::pipeline::Analysis;
use liketally::synth::{campaign_scenario, generate_corpus};
use liketally::tactics::{rank_candidates, tactic_reports, CandidateTactics, EffectMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rules = RuleSet::default_rules();
    let corpus = generate_corpus(&campaign_scenario(20160209, 400), &rules)?;
    let analysis = Analysis::new(corpus.tweets, Some(corpus.followers), rules);

    let mut tactics = Vec::new();
    for candidate in analysis.candidates(&[])? {
        let design = analysis.design(&candidate)?;
        let fit = analysis.fit(&design, &FitOptions::default())?;
        let universe = candidate_topic_universe(&analysis.rules, &candidate);
        let labels = analysis.own_labels(&candidate);
        tactics.push(CandidateTactics::evaluate(&fit, &design, labels, &universe, EffectMethod::Discrete)?);
    }
    for (candidate, report) in tactic_reports(&tactics) {
        println!("{candidate}: score {:.2}, rank {}", report.score, report.rank);
        for (topic, e) in &report.effects {
            let p = report.probs.get(topic).copied().unwrap_or(0.0);
            println!("    {topic:<14} f {:>8.2} [{:>8.2}, {:>8.2}]  p {p:.3}", e.effect, e.ci_low, e.ci_high);
        }
    }

    // ranking works from scores alone too
    let published = [("Clinton", 89.81), ("Cruz", 117.88), ("Rubio", 147.69), ("Sanders", 295.46), ("Trump", 236.63)];
    for r in rank_candidates(published) {
        println!("{}. {} ({:.2})", r.rank, r.candidate, r.score);
    }
    Ok(())
}
