//! `maxent-fusion` command line.
//!
//! Data goes to files under `--out`; progress and diagnostics go to stderr.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::csvio::{load_marginal, load_selection, save_joint, save_marginal};
use crate::dist::{tv_error, Marginal, ObservedHistogram, DEFAULT_BINS};
use crate::error::Error;
use crate::report::{write_json, BenchmarkReport};
use crate::sentiment::{
    build_population, load_corpus, population_histogram, run_corpus_benchmark, score_corpus, synthesize_corpus,
    synthetic_lexicon, write_corpus, write_scored, CorpusConfig, Lexicon, DEFAULT_POLARIZATION,
};
use crate::simgen::{censored_demo, run_benchmark, CensoredDemoConfig, Range, ReplicaConfig};
use crate::solver::{
    censored_estimate, estimate_population, threshold_mask, CensoredEstimate, Estimate, MomentConstraint,
};

#[derive(Debug, Parser)]
#[command(
    name = "maxent-fusion",
    version,
    about = "Maximum-entropy population estimates from biased samples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian-mixture benchmark of the three estimators.
    Simulate(SimulateArgs),
    /// Estimate a population histogram from a sample, a selection function and moments.
    Estimate(EstimateArgs),
    /// Estimate a population whose sample covers only part of the domain.
    Censored(CensoredArgs),
    /// Score a corpus and run the polarized-users benchmark.
    Sentiment(SentimentArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Master seed; every replica derives its own streams from it.
    #[arg(long)]
    pub seed: u64,
    /// Number of population/sample replicas.
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
    /// Individuals per synthetic population.
    #[arg(long, default_value_t = 10_000)]
    pub population: usize,
    /// Gaussian components per population.
    #[arg(long, default_value_t = 4)]
    pub components: usize,
    /// Range the component means are drawn from, `lo,hi`.
    #[arg(long, default_value = "-5,5", allow_hyphen_values = true)]
    pub mean_range: Range,
    /// Range the component standard deviations are drawn from, `lo,hi`.
    #[arg(long, default_value = "0,1")]
    pub std_range: Range,
    /// Range the inclusion probabilities are drawn from, `lo,hi`.
    #[arg(long, default_value = "0,1")]
    pub selection_range: Range,
    /// Histogram bins along the observed variable.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Also write errors.svg.
    #[arg(long)]
    pub svg: bool,
    /// Exit nonzero if any replica failed.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    /// Known population mean.
    #[arg(long, allow_hyphen_values = true)]
    pub mean: Option<f64>,
    /// Known population standard deviation (requires --mean).
    #[arg(long, requires = "mean")]
    pub std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sample histogram, `bin_lo,bin_hi,mass`.
    #[arg(long)]
    pub observed: PathBuf,
    /// Selection probabilities, `bin_lo,bin_hi,category,prob`.
    #[arg(long)]
    pub selection: PathBuf,
    /// Sample size over population size.
    #[arg(long)]
    pub inclusion_rate: f64,
    #[command(flatten)]
    pub moments: MomentArgs,
}

#[derive(Debug, Args)]
pub struct CensoredArgs {
    #[command(flatten)]
    pub common: Common,
    /// Shape of the sample over the observable bins, `bin_lo,bin_hi,mass`.
    #[arg(long, required_unless_present = "demo")]
    pub observed: Option<PathBuf>,
    /// Bins with midpoint below this value are observable.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "observable_above")]
    pub observable_below: Option<f64>,
    /// Bins with midpoint above this value are observable.
    #[arg(long, allow_hyphen_values = true)]
    pub observable_above: Option<f64>,
    #[command(flatten)]
    pub moments: MomentArgs,
    /// Population histogram to score the estimate against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Synthetic population censored above the threshold, estimated with mean
    /// and with mean+std.
    #[arg(long, conflicts_with_all = ["observed", "truth"])]
    pub demo: bool,
    /// Seed for the demo population and sample.
    #[arg(long, required_if_eq("demo", "true"))]
    pub seed: Option<u64>,
    /// Demo population size.
    #[arg(long, default_value_t = 10_000)]
    pub population: usize,
    /// Histogram bins for the demo grid.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct SentimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Master seed for corpus synthesis and replicas.
    #[arg(long)]
    pub seed: u64,
    /// Corpus, `doc_id<TAB>user_id<TAB>text` per line.
    #[arg(long, required_unless_present = "synthesize", requires = "lexicon")]
    pub corpus: Option<PathBuf>,
    /// Lexicon, CSV `word,score`.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Generate a synthetic corpus and lexicon instead of reading files.
    #[arg(long, conflicts_with_all = ["corpus", "lexicon"])]
    pub synthesize: bool,
    /// Synthetic users.
    #[arg(long, default_value_t = 20)]
    pub users: usize,
    /// Synthetic documents per user.
    #[arg(long, default_value_t = 600)]
    pub docs_per_user: usize,
    /// Spread of synthetic user means, in units of 0.15.
    #[arg(long, default_value_t = DEFAULT_POLARIZATION)]
    pub polarization: f64,
    /// Number of selection replicas.
    #[arg(long, default_value_t = 600)]
    pub replicas: usize,
    /// Minimum scored documents for a user to be kept.
    #[arg(long, default_value_t = 100)]
    pub min_docs: usize,
    /// Users kept at each end of the mean-score ranking.
    #[arg(long, default_value_t = 5)]
    pub tails: usize,
    /// Include every document (inclusion probability 1 for all users).
    #[arg(long)]
    pub census: bool,
    /// Histogram bins over the score range [-1, 1].
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Also write errors.svg.
    #[arg(long)]
    pub svg: bool,
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let jobs = match &cli.command {
        Command::Simulate(a) => a.common.jobs,
        Command::Estimate(a) => a.common.jobs,
        Command::Censored(a) => a.common.jobs,
        Command::Sentiment(a) => a.common.jobs,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            bail!("--jobs must be positive");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Censored(a) => cmd_censored(a),
        Command::Sentiment(a) => cmd_sentiment(a),
    })
}

fn report_failures(report: &BenchmarkReport, strict: bool) -> anyhow::Result<()> {
    if report.failed > 0 {
        eprintln!(
            "warning: {} of {} replicas failed",
            report.failed,
            report.replicas.len()
        );
        for r in report.replicas.iter().filter(|r| !r.complete()) {
            for o in r.outcomes.iter().filter(|o| o.failure.is_some()) {
                eprintln!(
                    "  replica {} {}: {}",
                    r.replica,
                    o.estimator.name(),
                    o.failure.as_deref().unwrap_or("")
                );
            }
        }
        if strict {
            bail!("{} replicas failed", report.failed);
        }
    }
    Ok(())
}

fn print_summary(report: &BenchmarkReport) {
    for row in &report.summary {
        eprintln!(
            "{:<14} mean {:.4}  q25 {:.4}  median {:.4}  q75 {:.4}",
            row.estimator.label(),
            row.mean,
            row.q25,
            row.median,
            row.q75
        );
    }
    for g in &report.gains {
        eprintln!(
            "gain of {} over {}: mean {:.1}%, quartiles {:.1}% / {:.1}%",
            g.model.label(),
            g.baseline.label(),
            100.0 * g.mean,
            100.0 * g.best_quartile,
            100.0 * g.worst_quartile
        );
    }
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let cfg = ReplicaConfig {
        n_replicas: a.replicas,
        population_size: a.population,
        components: a.components,
        mean_range: a.mean_range,
        std_range: a.std_range,
        selection_range: a.selection_range,
        bins: a.bins,
        rng_seed: a.seed,
    };
    let report = run_benchmark(&cfg)?;
    report.write_dir(
        &a.common.out,
        json!({ "command": "simulate", "replica_config": cfg }),
        a.svg.then_some("simulate"),
    )?;
    print_summary(&report);
    report_failures(&report, a.strict)
}

fn moment_constraints(grid: &crate::dist::Grid, m: &MomentArgs) -> crate::Result<Vec<MomentConstraint>> {
    match m.mean {
        Some(mean) => MomentConstraint::mean_std(grid, mean, m.std),
        None => Ok(Vec::new()),
    }
}

fn error_record(e: &Error) -> serde_json::Value {
    let mut v = json!({ "status": e.kind(), "message": e.to_string() });
    match *e {
        Error::Infeasible {
            iterations,
            lambda_norm,
            max_gradient,
        } => {
            v["iterations"] = json!(iterations);
            v["lambda_norm"] = json!(lambda_norm);
            v["max_gradient"] = json!(max_gradient);
        }
        Error::NotConverged {
            iterations,
            max_gradient,
        } => {
            v["iterations"] = json!(iterations);
            v["max_gradient"] = json!(max_gradient);
        }
        _ => {}
    }
    v
}

fn estimate_record(est: &Estimate) -> serde_json::Value {
    json!({
        "status": if est.converged { "converged" } else { "not_converged" },
        "iterations": est.iterations,
        "max_residual": est.max_residual(),
        "moment_residuals": est.moment_residuals,
        "observation_residuals": est.observation_residuals,
        "multipliers": est.dual,
    })
}

/// Writes the diagnostics of a failed solve and returns the error.
fn fail_with_diagnostics(out: &Path, e: Error) -> anyhow::Result<()> {
    write_json(&out.join("diagnostics.json"), &error_record(&e))?;
    Err(e.into())
}

fn cmd_estimate(a: &EstimateArgs) -> anyhow::Result<()> {
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    let shape = load_marginal(&a.observed).with_context(|| format!("reading {}", a.observed.display()))?;
    let selection = load_selection(&a.selection).with_context(|| format!("reading {}", a.selection.display()))?;
    let observed = ObservedHistogram::new(shape, a.inclusion_rate)?;
    let moments = moment_constraints(selection.grid(), &a.moments)?;
    let est = match estimate_population(&observed, &selection, &moments) {
        Ok(est) => est,
        Err(e) => return fail_with_diagnostics(out, e),
    };
    save_marginal(out.join("estimate.csv"), &est.marginal)?;
    save_joint(out.join("joint.csv"), &est.joint)?;
    write_json(&out.join("diagnostics.json"), &estimate_record(&est))?;
    eprintln!(
        "converged in {} iterations, max residual {:.2e}",
        est.iterations,
        est.max_residual()
    );
    Ok(())
}

fn censored_record(c: &CensoredEstimate) -> serde_json::Value {
    let mut v = estimate_record(&c.estimate);
    v["sample_weight"] = json!(c.sample_weight);
    v
}

fn cmd_censored(a: &CensoredArgs) -> anyhow::Result<()> {
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    if a.demo {
        return censored_demo_cmd(a);
    }
    let path = a.observed.as_ref().expect("clap enforces --observed");
    let shape = load_marginal(path).with_context(|| format!("reading {}", path.display()))?;
    let mask = match (a.observable_below, a.observable_above) {
        (Some(t), None) => threshold_mask(shape.edges(), t, true),
        (None, Some(t)) => threshold_mask(shape.edges(), t, false),
        _ => vec![true; shape.bins()],
    };
    let grid = crate::dist::Grid::new(shape.edges().to_vec(), 1)?;
    let moments = moment_constraints(&grid, &a.moments)?;
    let est = match censored_estimate(&shape, &mask, &moments) {
        Ok(est) => est,
        Err(e) => return fail_with_diagnostics(out, e),
    };
    save_marginal(out.join("estimate.csv"), &est.estimate.marginal)?;
    let mut diag = censored_record(&est);
    diag["observable"] = json!(mask);
    if let Some(t) = &a.truth {
        let truth = load_marginal(t).with_context(|| format!("reading {}", t.display()))?;
        diag["errors"] = json!({
            "pure_sample": tv_error(&shape, &truth)?,
            "estimate": tv_error(&est.estimate.marginal, &truth)?,
        });
    }
    write_json(&out.join("diagnostics.json"), &diag)?;
    eprintln!(
        "sample weight {:.4}, max residual {:.2e}",
        est.sample_weight,
        est.estimate.max_residual()
    );
    Ok(())
}

fn censored_demo_cmd(a: &CensoredArgs) -> anyhow::Result<()> {
    let out = &a.common.out;
    let mut cfg = CensoredDemoConfig {
        population_size: a.population,
        bins: a.bins,
        rng_seed: a.seed.expect("clap enforces --seed with --demo"),
        ..CensoredDemoConfig::default()
    };
    if let Some(t) = a.observable_below {
        cfg.threshold = t;
    }
    if a.observable_above.is_some() {
        bail!("the demo censors above its threshold; use --observable-below");
    }
    let demo = censored_demo(&cfg)?;
    let (mean_only, mean_std) = match demo.estimates() {
        Ok(pair) => pair,
        Err(e) => return fail_with_diagnostics(out, e),
    };
    save_marginal(out.join("truth.csv"), &demo.truth)?;
    save_marginal(out.join("sample.csv"), &demo.sample)?;
    save_marginal(out.join("estimate_mean.csv"), &mean_only.estimate.marginal)?;
    save_marginal(out.join("estimate_mean_std.csv"), &mean_std.estimate.marginal)?;
    let errors = json!({
        "pure_sample": tv_error(&demo.sample, &demo.truth)?,
        "mean_only": tv_error(&mean_only.estimate.marginal, &demo.truth)?,
        "mean_std": tv_error(&mean_std.estimate.marginal, &demo.truth)?,
    });
    eprintln!("TV errors: {errors}");
    let diag = json!({
        "config": cfg,
        "population_mean": demo.population_mean,
        "population_std": demo.population_std,
        "true_weight": demo.true_weight,
        "errors": errors,
        "mean_only": censored_record(&mean_only),
        "mean_std": censored_record(&mean_std),
    });
    write_json(&out.join("diagnostics.json"), &diag)?;
    Ok(())
}

fn cmd_sentiment(a: &SentimentArgs) -> anyhow::Result<()> {
    let out = &a.common.out;
    std::fs::create_dir_all(out)?;
    let (corpus, lexicon) = if a.synthesize {
        let synth = synthesize_corpus(a.users, a.docs_per_user, a.polarization, a.seed)?;
        let lexicon = synthetic_lexicon();
        write_corpus(
            std::io::BufWriter::new(std::fs::File::create(out.join("corpus.tsv"))?),
            &synth.records,
        )?;
        lexicon.write_csv(std::fs::File::create(out.join("lexicon.csv"))?)?;
        (synth.records, lexicon)
    } else {
        let corpus_path = a.corpus.as_ref().expect("clap enforces --corpus");
        let lexicon_path = a.lexicon.as_ref().expect("clap enforces --lexicon");
        (
            load_corpus(corpus_path).with_context(|| format!("reading {}", corpus_path.display()))?,
            Lexicon::load(lexicon_path).with_context(|| format!("reading {}", lexicon_path.display()))?,
        )
    };
    let cfg = CorpusConfig {
        min_docs_per_user: a.min_docs,
        extreme_users_per_tail: a.tails,
        n_replicas: a.replicas,
        rng_seed: a.seed,
        bins: a.bins,
        selection_range: if a.census {
            Range::new(1.0, 1.0)
        } else {
            Range::new(0.0, 1.0)
        },
    };
    cfg.validate()?;

    let scored = score_corpus(&corpus, &lexicon);
    if scored.unmatched > 0 {
        eprintln!(
            "{} of {} documents match no lexicon word and are skipped",
            scored.unmatched,
            corpus.len()
        );
    }
    if scored.documents.is_empty() {
        bail!("no document matches the lexicon");
    }
    write_scored(
        std::io::BufWriter::new(std::fs::File::create(out.join("scored.csv"))?),
        &scored.documents,
    )?;

    let pop = build_population(&corpus, &lexicon, &cfg)?;
    let hist: Marginal = population_histogram(&pop, cfg.bins)?;
    save_marginal(out.join("population.csv"), &hist)?;
    let report = run_corpus_benchmark(&pop, &cfg)?;
    let config = json!({
        "command": "sentiment",
        "corpus_config": cfg,
        "documents": corpus.len(),
        "unmatched": scored.unmatched,
        "eligible_users": pop.eligible_users,
        "users": pop.users,
        "user_means": pop.user_means,
        "population_size": pop.scores.len(),
    });
    report.write_dir(out, config, a.svg.then_some("sentiment"))?;
    print_summary(&report);
    report_failures(&report, false)
}
