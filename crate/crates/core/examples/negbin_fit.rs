//! Fit Poisson and negative binomial models to simulated counts and test for
//! over-dispersion.
//!
//! `cargo run --release --example negbin_fit`

use liketally::negbin::{fit_negbin, fit_poisson, lr_overdispersion, FitOptions};
use liketally::synth::{generate, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec {
        n: 5000,
        beta: vec![1.0, 0.08, 0.01, -0.3, 0.1, 0.5, -0.4],
        alpha: 0.6,
        controls: SynthSpec::tweet_controls(),
        topic_prevalences: vec![0.3, 0.2],
        topic_names: vec!["obama".into(), "immigration".into()],
        seed: 20160209,
    };
    let (design, y) = generate(&spec)?;
    let nb = fit_negbin(&y, &design.x, &FitOptions::default())?;
    let pois = fit_poisson(&y, &design.x)?;
    let lr = lr_overdispersion(&nb, &pois)?;

    println!("{:<16}{:>8}{:>9}{:>9}{:>9}", "column", "true", "beta", "se", "p");
    for (j, name) in design.column_names.iter().enumerate() {
        println!(
            "{name:<16}{:>8.3}{:>9.3}{:>9.3}{:>9.1e}",
            spec.beta[j], nb.coefficients[j], nb.se[j], nb.p_values[j]
        );
    }
    println!("alpha {:.3} (se {:.3}), true {}", nb.alpha, nb.alpha_se, spec.alpha);
    println!("lnL NB {:.2}, Poisson {:.2}, AIC NB {:.2}", nb.loglik, pois.loglik, nb.aic);
    println!("LR statistic {:.1}, boundary p-value {:.2e}", lr.statistic, lr.p_value);
    Ok(())
}
