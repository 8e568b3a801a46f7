//! Label a few tweets with the shipped keyword rules.
//!
//! `cargo run --example label_tweets`

use liketally::labeler::RuleSet;

fn main() {
    let rules = RuleSet::default_rules();
    println!(
        "{} figure rules, {} issue rules",
        rules.figures().count(),
        rules.issues().count()
    );
    for text in [
        "Thank you Obama",
        "Defund Planned Parenthood now",
        ".@marcorubio is wrong",
        "MARCORUBIO",
        "Bernie on Wall Street and the economy",
    ] {
        let topics: Vec<String> = rules.label(text).into_iter().collect();
        println!("{text:<40} -> {topics:?}");
    }
}
