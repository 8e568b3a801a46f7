#![allow(dead_code)]

use std::path::PathBuf;

use liketally::synth::{ControlDist, ControlSpec, SynthSpec};
use statrs::function::gamma::ln_gamma;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// NB2 log-pmf written straight from the Gamma-function form.
pub fn nb_logpmf_direct(y: u64, mu: f64, alpha: f64) -> f64 {
    let y = y as f64;
    let m = 1.0 / alpha;
    let p = 1.0 / (1.0 + alpha * mu);
    ln_gamma(m + y) - ln_gamma(y + 1.0) - ln_gamma(m) + m * p.ln() + y * (1.0 - p).ln()
}

pub fn poisson_logpmf_direct(y: u64, mu: f64) -> f64 {
    let y = y as f64;
    y * mu.ln() - mu - ln_gamma(y + 1.0)
}

/// Intercept, a standard normal, a uniform on [0, 2] and a Bernoulli(0.4)
/// control, then one binary topic per prevalence.
pub fn mixed_spec(n: usize, beta: Vec<f64>, alpha: f64, prevalences: Vec<f64>, seed: u64) -> SynthSpec {
    SynthSpec {
        n,
        beta,
        alpha,
        controls: vec![
            ControlSpec {
                name: "x_normal".into(),
                dist: ControlDist::Normal { mean: 0.0, sd: 1.0 },
            },
            ControlSpec {
                name: "x_uniform".into(),
                dist: ControlDist::Uniform { low: 0.0, high: 2.0 },
            },
            ControlSpec {
                name: "x_flag".into(),
                dist: ControlDist::Bernoulli { p: 0.4 },
            },
        ],
        topic_prevalences: prevalences,
        topic_names: vec![],
        seed,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Greedy forward selection by refitting every same-step model from scratch
/// on columns picked out of `x` by index.
pub fn brute_force_greedy(
    y: &[u64],
    x: &nalgebra::DMatrix<f64>,
    names: &[String],
    n_controls: usize,
    k: usize,
) -> Vec<String> {
    use liketally::negbin::{fit_negbin, FitOptions};
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..k {
        let mut best: Option<(f64, &str, usize)> = None;
        for t in n_controls..names.len() {
            if chosen.contains(&t) {
                continue;
            }
            let mut cols: Vec<usize> = (0..n_controls).collect();
            cols.extend(&chosen);
            cols.push(t);
            let sub = x.select_columns(cols.iter());
            let Ok(fit) = fit_negbin(y, &sub, &FitOptions::default()) else {
                continue;
            };
            if !fit.converged {
                continue;
            }
            let better = match best {
                None => true,
                Some((ll, name, _)) => fit.loglik > ll || (fit.loglik == ll && names[t].as_str() < name),
            };
            if better {
                best = Some((fit.loglik, names[t].as_str(), t));
            }
        }
        chosen.push(best.expect("some topic fits").2);
    }
    chosen.into_iter().map(|i| names[i].clone()).collect()
}
