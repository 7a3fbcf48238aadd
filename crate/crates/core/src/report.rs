//! Benchmark reports: per-replica errors, summary statistics, relative gains,
//! and their CSV / JSON / SVG renderings.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PurePrior,
    PureSample,
    PriorSample,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::PurePrior => "pure_prior",
            Estimator::PureSample => "pure_sample",
            Estimator::PriorSample => "prior_sample",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Estimator::PurePrior => "Pure Prior",
            Estimator::PureSample => "Pure Sample",
            Estimator::PriorSample => "Prior+Sample",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Estimator::PurePrior, Estimator::PureSample, Estimator::PriorSample]
            .into_iter()
            .find(|e| e.name() == s)
    }
}

/// Outcome of one estimator on one replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    /// Total-variation error against the ground truth; `None` on failure.
    pub error: Option<f64>,
    pub converged: bool,
    /// Largest constraint residual of the solved estimate, when one was solved.
    pub max_residual: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaRecord {
    pub replica: usize,
    /// Number of redraws needed because of empty samples.
    pub redraws: usize,
    pub outcomes: Vec<EstimatorOutcome>,
}

impl ReplicaRecord {
    pub fn error(&self, est: Estimator) -> Option<f64> {
        self.outcomes.iter().find(|o| o.estimator == est).and_then(|o| o.error)
    }

    pub fn complete(&self) -> bool {
        self.outcomes.iter().all(|o| o.converged && o.error.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Relative error reduction `1 − err(model) / err(baseline)` per replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub model: Estimator,
    pub baseline: Estimator,
    pub count: usize,
    pub mean: f64,
    /// 75th percentile of the per-replica gains.
    pub best_quartile: f64,
    /// 25th percentile of the per-replica gains.
    pub worst_quartile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub estimators: Vec<Estimator>,
    pub replicas: Vec<ReplicaRecord>,
    pub summary: Vec<SummaryRow>,
    pub gains: Vec<GainRow>,
    /// Replicas with at least one failed estimator; excluded from the summary.
    pub failed: usize,
    pub redraws: usize,
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and quartiles of one error list.
pub fn summarize_errors(estimator: Estimator, errors: &[f64]) -> Result<SummaryRow> {
    if errors.is_empty() {
        return Err(Error::Config(format!(
            "no errors to summarize for {}",
            estimator.name()
        )));
    }
    let s = sorted(errors);
    Ok(SummaryRow {
        estimator,
        count: errors.len(),
        mean: mean(errors),
        q25: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q75: quantile_sorted(&s, 0.75),
    })
}

/// Relative gains of `model` over `baseline`, paired by replica. Pairs with a
/// zero baseline error are skipped.
pub fn relative_gains(model: Estimator, baseline: Estimator, pairs: &[(f64, f64)]) -> Option<GainRow> {
    let gains: Vec<f64> = pairs
        .iter()
        .filter(|(_, b)| *b > 0.0)
        .map(|(a, b)| 1.0 - a / b)
        .collect();
    if gains.is_empty() {
        return None;
    }
    let s = sorted(&gains);
    Some(GainRow {
        model,
        baseline,
        count: gains.len(),
        mean: mean(&gains),
        best_quartile: quantile_sorted(&s, 0.75),
        worst_quartile: quantile_sorted(&s, 0.25),
    })
}

/// Summary rows for each estimator plus the gains of every later estimator in
/// `estimators` over every earlier one, over the complete replicas.
pub fn summarize(estimators: &[Estimator], records: &[ReplicaRecord]) -> Result<(Vec<SummaryRow>, Vec<GainRow>)> {
    let complete: Vec<&ReplicaRecord> = records.iter().filter(|r| r.complete()).collect();
    let column = |e: Estimator| -> Vec<f64> { complete.iter().filter_map(|r| r.error(e)).collect() };
    if complete.is_empty() {
        let first = records
            .iter()
            .flat_map(|r| &r.outcomes)
            .find_map(|o| o.failure.as_deref());
        return Err(Error::Config(format!(
            "all {} replicas failed (first failure: {})",
            records.len(),
            first.unwrap_or("none recorded")
        )));
    }
    let summary = estimators
        .iter()
        .map(|&e| summarize_errors(e, &column(e)))
        .collect::<Result<Vec<_>>>()?;
    let mut gains = Vec::new();
    for (j, &model) in estimators.iter().enumerate().rev() {
        for &baseline in estimators[..j].iter().rev() {
            let pairs: Vec<(f64, f64)> = column(model).into_iter().zip(column(baseline)).collect();
            gains.extend(relative_gains(model, baseline, &pairs));
        }
    }
    Ok((summary, gains))
}

impl BenchmarkReport {
    /// Builds the report from records in any order; records are sorted by
    /// replica index first so the result does not depend on completion order.
    pub fn from_records(estimators: Vec<Estimator>, mut replicas: Vec<ReplicaRecord>) -> Result<Self> {
        replicas.sort_by_key(|r| r.replica);
        let (summary, gains) = summarize(&estimators, &replicas)?;
        Ok(BenchmarkReport {
            failed: replicas.iter().filter(|r| !r.complete()).count(),
            redraws: replicas.iter().map(|r| r.redraws).sum(),
            estimators,
            replicas,
            summary,
            gains,
        })
    }

    pub fn summary_for(&self, e: Estimator) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.estimator == e)
    }

    pub fn gain(&self, model: Estimator, baseline: Estimator) -> Option<&GainRow> {
        self.gains.iter().find(|g| g.model == model && g.baseline == baseline)
    }

    /// Largest residual over every solved estimate in the report.
    pub fn max_residual(&self) -> f64 {
        self.replicas
            .iter()
            .flat_map(|r| &r.outcomes)
            .filter_map(|o| o.max_residual)
            .fold(0.0, f64::max)
    }

    /// `replica,estimator,error,converged`, one row per replica and estimator.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["replica", "estimator", "error", "converged"])?;
        for r in &self.replicas {
            for o in &r.outcomes {
                wtr.write_record([
                    r.replica.to_string(),
                    o.estimator.name().to_string(),
                    o.error.map(|e| e.to_string()).unwrap_or_default(),
                    o.converged.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary_json(&self, config: serde_json::Value) -> serde_json::Value {
        serde_json::json!({
            "config": config,
            "replicas": self.replicas.len(),
            "failed": self.failed,
            "redraws": self.redraws,
            "max_residual": self.max_residual(),
            "summary": self.summary,
            "gains": self.gains,
        })
    }

    /// Overlaid error histograms, one series per estimator.
    pub fn svg(&self, title: &str) -> String {
        const BINS: usize = 50;
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const M: f64 = 40.0;
        let colors = ["#d62728", "#1f77b4", "#2ca02c"];
        let hists: Vec<(Estimator, Vec<f64>)> = self
            .estimators
            .iter()
            .map(|&e| {
                let mut counts = vec![0.0; BINS];
                let mut n = 0.0;
                for r in self.replicas.iter().filter(|r| r.complete()) {
                    if let Some(err) = r.error(e) {
                        counts[((err * BINS as f64) as usize).min(BINS - 1)] += 1.0;
                        n += 1.0;
                    }
                }
                if n > 0.0 {
                    counts.iter_mut().for_each(|c| *c /= n);
                }
                (e, counts)
            })
            .collect();
        let peak = hists
            .iter()
            .flat_map(|(_, h)| h.iter().copied())
            .fold(0.0, f64::max)
            .max(1e-12);
        let x = |v: f64| M + v * (W - 2.0 * M);
        let y = |v: f64| H - M - v / peak * (H - 2.0 * M);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            W / 2.0,
            xml_escape(title)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{M}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
            H - M,
            W - M
        );
        for t in 0..=10 {
            let v = t as f64 / 10.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="middle">{v:.1}</text>"#,
                x(v),
                H - M + 14.0
            );
        }
        for (k, (e, h)) in hists.iter().enumerate() {
            let color = colors[k % colors.len()];
            let mut points = format!("{:.2},{:.2}", x(0.0), y(0.0));
            for (b, v) in h.iter().enumerate() {
                let (x0, x1) = (b as f64 / BINS as f64, (b + 1) as f64 / BINS as f64);
                let _ = write!(points, " {:.2},{:.2} {:.2},{:.2}", x(x0), y(*v), x(x1), y(*v));
            }
            let _ = write!(points, " {:.2},{:.2}", x(1.0), y(0.0));
            let _ = writeln!(
                s,
                r#"<polyline points="{points}" fill="{color}" fill-opacity="0.25" stroke="{color}"/>"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
                W - M - 120.0,
                M + 16.0 * k as f64,
                e.label()
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// Writes `replicas.csv`, `summary.json` and optionally `errors.svg`.
    pub fn write_dir(&self, dir: &Path, config: serde_json::Value, svg_title: Option<&str>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(
            dir.join("replicas.csv"),
        )?))?;
        write_json(&dir.join("summary.json"), &self.summary_json(config))?;
        if let Some(title) = svg_title {
            std::fs::write(dir.join("errors.svg"), self.svg(title))?;
        }
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Parsed row of a per-replica CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub replica: usize,
    pub estimator: Estimator,
    pub error: Option<f64>,
    pub converged: bool,
}

pub fn read_replica_csv<R: std::io::Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse(format!("missing column {i}")));
        let estimator = Estimator::parse(field(1)?)
            .ok_or_else(|| Error::Parse(format!("unknown estimator {}", field(1).unwrap_or(""))))?;
        let error = match field(2)? {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?),
        };
        out.push(CsvRow {
            replica: field(0)?
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?,
            estimator,
            error,
            converged: field(3)? == "true",
        });
    }
    Ok(out)
}
