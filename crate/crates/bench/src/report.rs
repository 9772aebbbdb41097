//! CSV sample files and the summary report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::runner::BenchSample;
use crate::stats::{percent_diff, qq_data, render_qq, summarize, wilcoxon_rank_sum};
use crate::BenchError;

pub const CSV_HEADER: &str = "algorithm,iteration,duration_ns";

pub fn write_csv(samples: &[BenchSample], path: &Path) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchSample>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(BenchError::Config(format!("unexpected CSV header '{header}'")));
    }
    let samples = r.deserialize().collect::<Result<Vec<BenchSample>, _>>()?;
    if let Some(s) = samples.iter().find(|s| s.duration_ns == 0) {
        return Err(BenchError::Config(format!("zero duration for {} iteration {}", s.algorithm, s.iteration)));
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStats {
    pub name: String,
    pub count: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub algorithm: String,
    pub baseline: String,
    pub rank_sum_w: f64,
    /// Alternative: `algorithm` is faster than `baseline`.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    pub method: String,
    /// Positive when `algorithm` is faster.
    pub percent_diff: f64,
    pub qq_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub baseline: String,
    #[serde(rename = "algorithm")]
    pub algorithms: Vec<AlgorithmStats>,
    #[serde(rename = "comparison", default)]
    pub comparisons: Vec<Comparison>,
}

/// Algorithm names in order of first appearance.
fn algorithm_order(samples: &[BenchSample]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for s in samples {
        if !names.contains(&s.algorithm) {
            names.push(s.algorithm.clone());
        }
    }
    names
}

/// Default baseline: the first classical DH algorithm, else the first one.
pub fn default_baseline(names: &[String]) -> Option<String> {
    names.iter().find(|n| n.starts_with("dh-")).or(names.first()).cloned()
}

pub fn millis_for(samples: &[BenchSample], name: &str) -> Vec<f64> {
    samples.iter().filter(|s| s.algorithm == name).map(BenchSample::millis).collect()
}

/// (x, y) quantile pairs for one comparison.
pub type QqPairs = Vec<(f64, f64)>;

/// Builds the report and the QQ pairs for each comparison (same order).
pub fn build_report(samples: &[BenchSample], baseline: Option<&str>) -> Result<(BenchReport, Vec<QqPairs>), BenchError> {
    let names = algorithm_order(samples);
    let baseline = match baseline {
        Some(b) if names.iter().any(|n| n == b) => b.to_string(),
        Some(b) => return Err(BenchError::Config(format!("baseline '{b}' has no samples"))),
        None => default_baseline(&names).ok_or(BenchError::Config("no samples".into()))?,
    };
    let mut algorithms = Vec::new();
    for name in &names {
        let s = summarize(&millis_for(samples, name))?;
        algorithms.push(AlgorithmStats { name: name.clone(), count: s.count, mean_ms: s.mean, stddev_ms: s.stddev });
    }
    let base_ms = millis_for(samples, &baseline);
    let base_mean = algorithms.iter().find(|a| a.name == baseline).unwrap().mean_ms;
    let mut comparisons = Vec::new();
    let mut qq = Vec::new();
    for a in algorithms.iter().filter(|a| a.name != baseline) {
        let xs = millis_for(samples, &a.name);
        let w = wilcoxon_rank_sum(&xs, &base_ms)?;
        comparisons.push(Comparison {
            algorithm: a.name.clone(),
            baseline: baseline.clone(),
            rank_sum_w: w.rank_sum_w,
            p_one_sided: w.p_one_sided,
            p_two_sided: w.p_two_sided,
            method: w.method.name().to_string(),
            percent_diff: percent_diff(a.mean_ms, base_mean)?,
            qq_file: None,
        });
        qq.push(qq_data(&xs, &base_ms)?);
    }
    Ok((BenchReport { baseline, algorithms, comparisons }, qq))
}

fn qq_path(report_path: &Path, c: &Comparison) -> PathBuf {
    let stem = report_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    report_path.with_file_name(format!("{stem}.qq-{}-vs-{}.txt", c.algorithm, c.baseline))
}

/// Writes the TOML report plus one QQ data file per comparison next to it.
pub fn write_report(report: &BenchReport, qq: &[QqPairs], path: &Path) -> Result<BenchReport, BenchError> {
    let mut report = report.clone();
    for (c, pairs) in report.comparisons.iter_mut().zip(qq) {
        let p = qq_path(path, c);
        fs::write(&p, render_qq(pairs))?;
        c.qq_file = p.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    let text = toml::to_string(&report).map_err(|e| BenchError::Config(e.to_string()))?;
    fs::write(path, text)?;
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<BenchReport, BenchError> {
    toml::from_str(&fs::read_to_string(path)?).map_err(|e| BenchError::Config(format!("report: {e}")))
}

/// Fixed six decimals, or scientific notation below 1e-4.
pub fn format_p(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.6}")
    }
}

/// Plain-text table: one row per algorithm, then the tests.
pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>8} {:>14} {:>14}", "algorithm", "n", "mean (ms)", "stddev (ms)");
    for a in &report.algorithms {
        let _ = writeln!(out, "{:<16} {:>8} {:>14.3} {:>14.3}", a.name, a.count, a.mean_ms, a.stddev_ms);
    }
    for c in &report.comparisons {
        let _ = writeln!(
            out,
            "{} vs {}: W={} p(one-sided, {} faster)={} p(two-sided)={} [{}] diff={:+.3}%",
            c.algorithm,
            c.baseline,
            c.rank_sum_w,
            c.algorithm,
            format_p(c.p_one_sided),
            format_p(c.p_two_sided),
            c.method,
            c.percent_diff
        );
    }
    out
}
