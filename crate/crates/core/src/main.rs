use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use liketally::negbin::FitOptions;
use liketally::pipeline::{run, Command, EvalModel, OutputFormat, RunConfig};
use liketally::stepwise::DEFAULT_K;
use liketally::tactics::EffectMethod;

#[derive(Parser)]
#[command(name = "liketally", version, about = "Topic tallies and tactic scores for campaign tweets")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    args: Args,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Like-count statistics per candidate
    Summarize,
    /// Per-tweet topic labels and topic frequencies
    Label,
    /// Full-model negative binomial fit and over-dispersion test
    Fit,
    /// Forward-stepwise topic selection
    Select,
    /// Topic marginal effects with 95% intervals
    Effects,
    /// Tactic scores and ranks
    Rank,
    /// Log-like histograms and daily follower series
    Plotdata,
    /// Emit a synthetic corpus with known parameters
    Simulate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Discrete,
    BetaMu,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Full,
    Selected,
}

#[derive(clap::Args)]
struct Args {
    #[arg(long, global = true)]
    tweets: Option<PathBuf>,
    #[arg(long, global = true)]
    followers: Option<PathBuf>,
    /// Keyword rule file; the built-in rules when omitted
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Restrict to this candidate (repeatable)
    #[arg(long = "candidate", global = true)]
    candidates: Vec<String>,
    #[arg(long, global = true, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, global = true, default_value_t = FitOptions::default().tol)]
    tol: f64,
    #[arg(long, global = true, default_value_t = FitOptions::default().max_iter)]
    max_iter: usize,
    #[arg(long, global = true, value_enum, default_value = "discrete")]
    effect_method: Method,
    #[arg(long, global = true, value_enum, default_value = "full")]
    eval_model: Model,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, global = true, default_value_t = 20160209)]
    seed: u64,
    /// Original tweets per simulated candidate
    #[arg(long, global = true, default_value_t = 400)]
    n_tweets: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LIKETALLY_LOG", "warn")).init();
    let cli = Cli::parse();
    let a = cli.args;
    let command = match cli.command {
        Cmd::Summarize => Command::Summarize,
        Cmd::Label => Command::Label,
        Cmd::Fit => Command::Fit,
        Cmd::Select => Command::Select,
        Cmd::Effects => Command::Effects,
        Cmd::Rank => Command::Rank,
        Cmd::Plotdata => Command::PlotData,
        Cmd::Simulate => Command::Simulate,
    };
    let mut config = RunConfig::new(a.out);
    config.tweets = a.tweets;
    config.followers = a.followers;
    config.rules = a.rules;
    config.candidates = a.candidates;
    config.k = a.k;
    config.fit = FitOptions {
        tol: a.tol,
        max_iter: a.max_iter,
    };
    config.effect_method = match a.effect_method {
        Method::Discrete => EffectMethod::Discrete,
        Method::BetaMu => EffectMethod::BetaMu,
    };
    config.eval_model = match a.eval_model {
        Model::Full => EvalModel::Full,
        Model::Selected => EvalModel::Selected,
    };
    config.format = match a.format {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    };
    config.seed = a.seed;
    config.simulate_tweets = a.n_tweets;

    match run(command, &config) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::json!({
                "error": { "module": e.module(), "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
