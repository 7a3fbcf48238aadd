//! Polarized-corpus benchmark on a synthetic corpus, or on a real one.
//!
//! ```text
//! cargo run --release --example sentiment_corpus -- [polarization] [replicas] [seed]
//! cargo run --release --example sentiment_corpus -- --corpus docs.tsv --lexicon lexicon.csv
//! ```

use maxent_fusion::report::Estimator;
use maxent_fusion::sentiment::{
    build_population, load_corpus, run_corpus_benchmark, synthesize_corpus, synthetic_lexicon, CorpusConfig, Lexicon,
};

fn main() -> maxent_fusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = CorpusConfig::default();
    let (corpus, lexicon) = if args.first().map(String::as_str) == Some("--corpus") {
        cfg.rng_seed = 1;
        (load_corpus(&args[1])?, Lexicon::load(&args[3])?)
    } else {
        let polarization = args
            .first()
            .map(|s| s.parse().expect("polarization"))
            .unwrap_or(maxent_fusion::sentiment::DEFAULT_POLARIZATION);
        cfg.n_replicas = args.get(1).map(|s| s.parse().expect("replicas")).unwrap_or(600);
        cfg.rng_seed = args.get(2).map(|s| s.parse().expect("seed")).unwrap_or(1);
        let synth = synthesize_corpus(20, 600, polarization, cfg.rng_seed)?;
        (synth.records, synthetic_lexicon())
    };

    let pop = build_population(&corpus, &lexicon, &cfg)?;
    println!(
        "{} documents ({} unmatched), {} eligible users, kept {:?}",
        corpus.len(),
        pop.unmatched,
        pop.eligible_users,
        pop.users
    );
    let means: Vec<String> = pop.user_means.iter().map(|m| format!("{m:.3}")).collect();
    println!("user means: {}", means.join(" "));

    let report = run_corpus_benchmark(&pop, &cfg)?;
    println!("{} replicas, {} failed", cfg.n_replicas, report.failed);
    for row in &report.summary {
        println!(
            "{:<14} mean {:.4} median {:.4}",
            row.estimator.label(),
            row.mean,
            row.median
        );
    }
    if let Some(g) = report.gain(Estimator::PriorSample, Estimator::PureSample) {
        println!(
            "gain: mean {:.1}%, best quartile {:.1}%, worst quartile {:.1}%",
            100.0 * g.mean,
            100.0 * g.best_quartile,
            100.0 * g.worst_quartile
        );
    }
    Ok(())
}
