//! Summary statistics, the Wilcoxon rank-sum test and QQ data.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("standard deviation needs at least 2 samples, got {0}")]
    TooFewForStddev(usize),
    #[error("baseline mean must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("sample contains a non-finite value")]
    NonFinite,
}

fn check(xs: &[f64]) -> Result<(), StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> Result<f64, StatsError> {
    check(xs)?;
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// n-1 denominator. Two-pass to keep cancellation error down.
pub fn sample_stddev(xs: &[f64]) -> Result<f64, StatsError> {
    check(xs)?;
    if xs.len() < 2 {
        return Err(StatsError::TooFewForStddev(xs.len()));
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (xs.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub stddev: f64,
}

pub fn summarize(xs: &[f64]) -> Result<Summary, StatsError> {
    Ok(Summary { count: xs.len(), mean: mean(xs)?, stddev: sample_stddev(xs)? })
}

/// 100 * (baseline - new) / baseline. Positive means the new algorithm is
/// faster.
pub fn percent_diff(mean_new: f64, mean_baseline: f64) -> Result<f64, StatsError> {
    if mean_baseline.is_nan() || mean_baseline <= 0.0 {
        return Err(StatsError::NonPositiveBaseline(mean_baseline));
    }
    Ok(100.0 * (mean_baseline - mean_new) / mean_baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sided {
    /// Alternative: x tends to be smaller than y.
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::NormalApprox => "normal-approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the (mid)ranks of x in the pooled sample.
    pub rank_sum_w: f64,
    /// P(W <= observed): evidence that x is smaller.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    pub method: Method,
}

impl WilcoxonResult {
    pub fn p(&self, sided: Sided) -> f64 {
        match sided {
            Sided::One => self.p_one_sided,
            Sided::Two => self.p_two_sided,
        }
    }
}

/// Largest per-sample size that gets the exact null distribution.
pub const EXACT_MAX: usize = 12;

/// Midranks of the pooled sample, x first then y.
pub fn midranks(x: &[f64], y: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share rank ((i+1)+(j+1))/2.
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of each group of tied values in the pooled sample.
fn tie_groups(ranks: &[f64]) -> Vec<usize> {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|r| **r == sorted[i]).count();
        groups.push(j);
        i += j;
    }
    groups
}

/// Exact when both samples have at most [`EXACT_MAX`] values, normal
/// approximation otherwise.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, StatsError> {
    let method = if x.len() <= EXACT_MAX && y.len() <= EXACT_MAX { Method::Exact } else { Method::NormalApprox };
    wilcoxon_rank_sum_with(x, y, method)
}

/// Forces a method. Exact gets slow well before n = m = 30.
pub fn wilcoxon_rank_sum_with(x: &[f64], y: &[f64], method: Method) -> Result<WilcoxonResult, StatsError> {
    check(x)?;
    check(y)?;
    let ranks = midranks(x, y);
    let w: f64 = ranks[..x.len()].iter().sum();
    Ok(match method {
        Method::Exact => exact(&ranks, x.len(), w),
        Method::NormalApprox => normal_approx(&ranks, x.len(), y.len(), w),
    })
}

/// Distribution of the rank sum over all C(N, n) ways to pick x's ranks,
/// by dynamic programming on doubled (integer) midranks.
fn exact(ranks: &[f64], n: usize, w: f64) -> WilcoxonResult {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; n + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                upper[0][s] += lower[k - 1][s - r];
            }
        }
    }
    let dist = &counts[n];
    let total: f64 = dist.iter().sum();
    let obs = (w * 2.0).round() as usize;
    let mean2 = n as f64 * (ranks.len() as f64 + 1.0); // doubled mean
    let dev = (obs as f64 - mean2).abs();
    let mut lower = 0.0;
    let mut extreme = 0.0;
    for (s, &c) in dist.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if s <= obs {
            lower += c;
        }
        if (s as f64 - mean2).abs() >= dev - 1e-9 {
            extreme += c;
        }
    }
    WilcoxonResult { rank_sum_w: w, p_one_sided: lower / total, p_two_sided: (extreme / total).min(1.0), method: Method::Exact }
}

fn normal_approx(ranks: &[f64], n: usize, m: usize, w: f64) -> WilcoxonResult {
    let (nf, mf) = (n as f64, m as f64);
    let big_n = nf + mf;
    let mu = nf * (big_n + 1.0) / 2.0;
    let tie_term: f64 = tie_groups(ranks).iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (big_n * (big_n - 1.0));
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term);
    if var.is_nan() || var <= 0.0 {
        // Every value tied: no evidence either way.
        return WilcoxonResult { rank_sum_w: w, p_one_sided: 1.0, p_two_sided: 1.0, method: Method::NormalApprox };
    }
    let sd = var.sqrt();
    let phi = Normal::new(0.0, 1.0).expect("standard normal");
    let p_lower = phi.cdf((w - mu + 0.5) / sd);
    let p_upper = phi.sf((w - mu - 0.5) / sd);
    WilcoxonResult {
        rank_sum_w: w,
        p_one_sided: p_lower.min(1.0),
        p_two_sided: (2.0 * p_lower.min(p_upper)).min(1.0),
        method: Method::NormalApprox,
    }
}

/// Sample quantile at probability `p` with position p*(n+1), linearly
/// interpolated and clamped to the sample range. `sorted` must be sorted.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (p * (n as f64 + 1.0)).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let a = sorted[lo - 1];
    if frac == 0.0 || lo >= n {
        a
    } else {
        a + frac * (sorted[lo] - a)
    }
}

/// (x-quantile, y-quantile) pairs at k/(min(n,m)+1), k = 1..=min(n,m).
pub fn qq_data(x: &[f64], y: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    check(x)?;
    check(y)?;
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let k = xs.len().min(ys.len());
    Ok((1..=k)
        .map(|i| {
            let p = i as f64 / (k as f64 + 1.0);
            (quantile(&xs, p), quantile(&ys, p))
        })
        .collect())
}

/// Two whitespace-separated columns, one pair per line.
pub fn render_qq(pairs: &[(f64, f64)]) -> String {
    pairs.iter().map(|(a, b)| format!("{a:.6} {b:.6}\n")).collect()
}
