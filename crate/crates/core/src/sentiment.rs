//! Lexicon sentiment scoring and the polarized-corpus benchmark.
//!
//! A document's score is the mean lexicon score of its tokens that appear in
//! the lexicon, counted with multiplicity. Tokens are lowercase runs of
//! alphabetic characters. Documents with no lexicon token are unmatched and
//! excluded.
//!
//! The benchmark population keeps the users with enough scored documents,
//! ranks them by mean score, and retains the most negative and most positive
//! tails. User identity is the selection category: each replica gives every
//! user a random inclusion probability and thins that user's documents.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{bin_samples, Grid, Marginal, ObservedHistogram, OutOfRange, SelectionFunction, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::report::{BenchmarkReport, Estimator, ReplicaRecord};
use crate::rng::sub_rng;
use crate::simgen::{draw_sample, evaluate_estimators, Range, MAX_ATTEMPTS};

/// Word → score in `[-1, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    scores: BTreeMap<String, f64>,
}

pub fn normalize_word(w: &str) -> String {
    w.trim().to_lowercase()
}

impl Lexicon {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut scores = BTreeMap::new();
        for (word, score) in entries {
            let word = normalize_word(word.as_ref());
            if word.is_empty() {
                return Err(Error::Parse("empty lexicon word".into()));
            }
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::Parse(format!("score {score} for `{word}` outside [-1, 1]")));
            }
            if let Some(prev) = scores.insert(word.clone(), score) {
                if prev != score {
                    return Err(Error::Parse(format!("conflicting scores for `{word}`")));
                }
            }
        }
        Ok(Lexicon { scores })
    }

    pub fn get(&self, word: &str) -> Option<f64> {
        self.scores.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.scores.iter().map(|(w, s)| (w.as_str(), *s))
    }

    /// CSV with header `word,score`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            word: String,
            score: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(["word", "score"]) {
            return Err(Error::Parse("lexicon header must be `word,score`".into()));
        }
        let rows: Vec<Row> = rdr.deserialize().collect::<Result<_, _>>()?;
        Lexicon::new(rows.into_iter().map(|r| (r.word, r.score)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["word", "score"])?;
        for (word, score) in self.iter() {
            wtr.write_record([word.to_string(), score.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Lexicon::read_csv(std::fs::File::open(path)?)
    }
}

/// Lowercased maximal runs of alphabetic characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DocumentScore {
    pub matched_word_count: usize,
    pub score: f64,
}

/// No token of the document is in the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unmatched;

impl std::fmt::Display for Unmatched {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no token matches the lexicon")
    }
}

impl std::error::Error for Unmatched {}

pub fn score_document(text: &str, lexicon: &Lexicon) -> std::result::Result<DocumentScore, Unmatched> {
    let (sum, n) = tokenize(text)
        .filter_map(|t| lexicon.get(&t))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Unmatched);
    }
    Ok(DocumentScore {
        matched_word_count: n,
        score: (sum / n as f64).clamp(-1.0, 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub user_id: String,
    pub text: String,
}

/// One record per line: `doc_id<TAB>user_id<TAB>text`.
pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(u), Some(t)) if !d.is_empty() && !u.is_empty() => out.push(CorpusRecord {
                doc_id: d.to_string(),
                user_id: u.to_string(),
                text: t.to_string(),
            }),
            _ => {
                return Err(Error::Parse(format!(
                    "corpus line {}: expected doc_id<TAB>user_id<TAB>text",
                    n + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut w: W, corpus: &[CorpusRecord]) -> Result<()> {
    for r in corpus {
        let text = r.text.replace(['\t', '\n', '\r'], " ");
        writeln!(w, "{}\t{}\t{}", r.doc_id, r.user_id, text)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    read_corpus(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredDocument {
    pub doc_id: String,
    pub user_id: String,
    pub matched_word_count: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCorpus {
    pub documents: Vec<ScoredDocument>,
    pub unmatched: usize,
}

pub fn score_corpus(corpus: &[CorpusRecord], lexicon: &Lexicon) -> ScoredCorpus {
    let scored: Vec<Option<ScoredDocument>> = corpus
        .par_iter()
        .map(|r| {
            score_document(&r.text, lexicon).ok().map(|s| ScoredDocument {
                doc_id: r.doc_id.clone(),
                user_id: r.user_id.clone(),
                matched_word_count: s.matched_word_count,
                score: s.score,
            })
        })
        .collect();
    let unmatched = scored.iter().filter(|d| d.is_none()).count();
    ScoredCorpus {
        documents: scored.into_iter().flatten().collect(),
        unmatched,
    }
}

pub fn write_scored<W: Write>(w: W, docs: &[ScoredDocument]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for d in docs {
        wtr.serialize(d)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusConfig {
    pub min_docs_per_user: usize,
    pub extreme_users_per_tail: usize,
    pub n_replicas: usize,
    pub rng_seed: u64,
    pub bins: usize,
    /// Range of the per-user inclusion probabilities.
    pub selection_range: Range,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_docs_per_user: 100,
            extreme_users_per_tail: 5,
            n_replicas: 600,
            rng_seed: 0,
            bins: DEFAULT_BINS,
            selection_range: Range::new(0.0, 1.0),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_docs_per_user == 0 || self.extreme_users_per_tail == 0 || self.n_replicas == 0 || self.bins == 0 {
            return Err(Error::Config("corpus counts must be positive".into()));
        }
        let r = self.selection_range;
        if !(r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi) {
            return Err(Error::Config("selection range must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Document scores of the retained users, labelled by user.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPopulation {
    pub scores: Vec<f64>,
    pub user_labels: Vec<usize>,
    /// User id for each label: the negative tail (most negative first), then
    /// the positive tail (most positive last).
    pub users: Vec<String>,
    pub user_means: Vec<f64>,
    pub unmatched: usize,
    pub eligible_users: usize,
}

/// Users with at least `min_docs_per_user` scored documents, ranked by mean
/// score (ties by user id); keeps both tails.
pub fn build_population(corpus: &[CorpusRecord], lexicon: &Lexicon, cfg: &CorpusConfig) -> Result<CorpusPopulation> {
    cfg.validate()?;
    let scored = score_corpus(corpus, lexicon);
    population_from_scores(&scored, cfg)
}

/// A user id with its mean score and `(doc_id, score)` pairs.
type RankedUser<'a> = (&'a str, f64, Vec<(&'a str, f64)>);

pub fn population_from_scores(scored: &ScoredCorpus, cfg: &CorpusConfig) -> Result<CorpusPopulation> {
    let mut per_user: HashMap<&str, Vec<(&str, f64)>> = HashMap::new();
    for d in &scored.documents {
        per_user.entry(&d.user_id).or_default().push((&d.doc_id, d.score));
    }
    let mut ranked: Vec<RankedUser> = per_user
        .into_iter()
        .filter(|(_, docs)| docs.len() >= cfg.min_docs_per_user)
        .map(|(u, mut docs)| {
            // fixed summation order keeps the mean independent of record order
            docs.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
            let mean = docs.iter().map(|d| d.1).sum::<f64>() / docs.len() as f64;
            (u, mean, docs)
        })
        .collect();
    let tails = cfg.extreme_users_per_tail;
    let eligible_users = ranked.len();
    if eligible_users < 2 * tails {
        return Err(Error::InsufficientUsers {
            required: 2 * tails,
            found: eligible_users,
        });
    }
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let n = ranked.len();
    let keep = (0..tails).chain(n - tails..n);

    let mut pop = CorpusPopulation {
        scores: Vec::new(),
        user_labels: Vec::new(),
        users: Vec::new(),
        user_means: Vec::new(),
        unmatched: scored.unmatched,
        eligible_users,
    };
    for (label, idx) in keep.enumerate() {
        let (user, mean, docs) = &ranked[idx];
        pop.users.push(user.to_string());
        pop.user_means.push(*mean);
        for (_, s) in docs {
            pop.scores.push(*s);
            pop.user_labels.push(label);
        }
    }
    Ok(pop)
}

pub const CORPUS_ESTIMATORS: [Estimator; 2] = [Estimator::PureSample, Estimator::PriorSample];

const STREAM_SELECTION: u64 = 1;
const STREAM_SAMPLE: u64 = 2;

/// Score grid: default binning over `[-1, 1]`.
pub fn score_grid(bins: usize, categories: usize) -> Result<Grid> {
    Grid::padded(-1.0, 1.0, bins, categories)
}

fn corpus_replica(
    pop: &CorpusPopulation,
    cfg: &CorpusConfig,
    grid: &Grid,
    truth: &Marginal,
    replica: usize,
) -> ReplicaRecord {
    let n_users = pop.users.len();
    let prior_mean = truth.mean();
    let mut last_err = Error::EmptySample;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = sub_rng(cfg.rng_seed, replica as u64, attempt as u64, STREAM_SELECTION);
        let dist = Uniform::new_inclusive(cfg.selection_range.lo, cfg.selection_range.hi);
        let probs: Vec<f64> = (0..n_users).map(|_| dist.sample(&mut rng)).collect();
        let mut rng = sub_rng(cfg.rng_seed, replica as u64, attempt as u64, STREAM_SAMPLE);
        let sample = match draw_sample(&pop.scores, &pop.user_labels, &probs, &mut rng) {
            Ok(s) => s,
            Err(e) => {
                last_err = e;
                continue;
            }
        };
        let built = bin_samples(&sample.values, grid.edges(), OutOfRange::Clamp).and_then(|b| {
            let rate = sample.values.len() as f64 / pop.scores.len() as f64;
            Ok((
                ObservedHistogram::new(b.histogram, rate)?,
                SelectionFunction::per_category(grid.clone(), &probs)?,
            ))
        });
        let outcomes = match built {
            Ok((obs, sel)) => evaluate_estimators(grid, truth, &obs, &sel, prior_mean, &CORPUS_ESTIMATORS),
            Err(e) => failed_all(&e),
        };
        return ReplicaRecord {
            replica,
            redraws: attempt,
            outcomes,
        };
    }
    ReplicaRecord {
        replica,
        redraws: MAX_ATTEMPTS,
        outcomes: failed_all(&last_err),
    }
}

fn failed_all(e: &Error) -> Vec<crate::report::EstimatorOutcome> {
    CORPUS_ESTIMATORS
        .iter()
        .map(|&estimator| crate::report::EstimatorOutcome {
            estimator,
            error: None,
            converged: false,
            max_residual: None,
            failure: Some(e.to_string()),
        })
        .collect()
}

/// Pure Sample vs Prior+Sample over random per-user inclusion probabilities.
pub fn run_corpus_benchmark(pop: &CorpusPopulation, cfg: &CorpusConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    if pop.scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let grid = score_grid(cfg.bins, pop.users.len())?;
    let truth = population_histogram(pop, cfg.bins)?;
    let records: Vec<ReplicaRecord> = (0..cfg.n_replicas)
        .into_par_iter()
        .map(|i| corpus_replica(pop, cfg, &grid, &truth, i))
        .collect();
    BenchmarkReport::from_records(CORPUS_ESTIMATORS.to_vec(), records)
}

pub fn population_histogram(pop: &CorpusPopulation, bins: usize) -> Result<Marginal> {
    let grid = score_grid(bins, 1)?;
    Ok(bin_samples(&pop.scores, grid.edges(), OutOfRange::Clamp)?.histogram)
}

/// Spread of user mean sentiment per unit of polarization.
pub const SPREAD_PER_POLARIZATION: f64 = 0.15;
/// Polarization used for the benchmark corpora.
pub const DEFAULT_POLARIZATION: f64 = 3.0;
const WORD_NOISE: f64 = 0.35;
const LEXICON_STEPS: usize = 200;
const FILLER: [&str; 8] = ["the", "and", "of", "a", "to", "in", "is", "it"];

/// Letters-only word for lexicon slot `j`.
fn lexicon_word(j: usize) -> String {
    let mut s = String::from("w");
    let mut k = j;
    for _ in 0..2 {
        s.push((b'a' + (k % 26) as u8) as char);
        k /= 26;
    }
    s
}

/// Lexicon matching [`synthesize_corpus`]: `LEXICON_STEPS + 1` words with
/// scores evenly spaced over `[-1, 1]`.
pub fn synthetic_lexicon() -> Lexicon {
    let entries = (0..=LEXICON_STEPS).map(|j| (lexicon_word(j), -1.0 + 2.0 * j as f64 / LEXICON_STEPS as f64));
    Lexicon::new(entries).expect("synthetic lexicon is valid")
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub records: Vec<CorpusRecord>,
    /// Configured latent mean of each user (`u000`, `u001`, ...).
    pub user_means: Vec<f64>,
}

/// Users with mean sentiment `N(0, (0.15·polarization)²)` clamped to ±0.9;
/// each document mixes filler words with 1–6 lexicon words scored around the
/// user mean. Uses [`synthetic_lexicon`].
pub fn synthesize_corpus(
    n_users: usize,
    docs_per_user: usize,
    polarization: f64,
    seed: u64,
) -> Result<SyntheticCorpus> {
    if n_users == 0 || docs_per_user == 0 || !(polarization >= 0.0 && polarization.is_finite()) {
        return Err(Error::Config(
            "need positive counts and nonnegative polarization".into(),
        ));
    }
    let spread = SPREAD_PER_POLARIZATION * polarization;
    let mut rng = sub_rng(seed, u64::MAX, 0, 0);
    let user_means: Vec<f64> = (0..n_users)
        .map(|_| (spread * rng.sample::<f64, _>(StandardNormal)).clamp(-0.9, 0.9))
        .collect();
    let mut records = Vec::with_capacity(n_users * docs_per_user);
    for (u, &mu) in user_means.iter().enumerate() {
        let mut rng = sub_rng(seed, u as u64, 0, 1);
        for d in 0..docs_per_user {
            let n_words = rng.gen_range(1..=6);
            let mut words: Vec<String> = Vec::with_capacity(2 * n_words);
            for _ in 0..n_words {
                let target = (mu + WORD_NOISE * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0);
                let j = ((target + 1.0) / 2.0 * LEXICON_STEPS as f64).round() as usize;
                words.push(lexicon_word(j.min(LEXICON_STEPS)));
                if rng.gen_bool(0.5) {
                    words.push(FILLER[rng.gen_range(0..FILLER.len())].to_string());
                }
            }
            records.push(CorpusRecord {
                doc_id: format!("d{u:03}_{d:05}"),
                user_id: format!("u{u:03}"),
                text: words.join(" "),
            });
        }
    }
    Ok(SyntheticCorpus { records, user_means })
}
