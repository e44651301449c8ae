//! Empirical distributions, geometric/exponential maximum-likelihood fits,
//! KL divergence and tenant profit summaries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Smallest sample for which a fit is reported as converged.
pub const MIN_FIT_SAMPLES: usize = 10;
/// Sample size below which a geometric fit never counts as a success.
pub const SUCCESS_MIN_SAMPLES: usize = 30;
/// KL divergence gate for a successful geometric fit.
pub const SUCCESS_MAX_KLD: f64 = 0.25;
/// Tail diagnostic above which a sample is flagged fat-tailed.
pub const FAT_TAIL_RATIO: f64 = 1.5;

/// Counts over the non-negative integers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalPmf {
    pub fn from_samples(samples: &[u64]) -> Self {
        let mut pmf = Self::default();
        for &s in samples {
            pmf.add(s);
        }
        pmf
    }

    pub fn add(&mut self, k: u64) {
        let k = k as usize;
        if self.counts.len() <= k {
            self.counts.resize(k + 1, 0);
        }
        self.counts[k] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn prob(&self, k: usize) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(k).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn mean(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| k as f64 * c as f64)
            .sum::<f64>()
            / self.total as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|k| self.prob(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// `p` for the geometric law, the rate for the exponential law.
    pub estimate: f64,
    pub converged: bool,
    /// All samples identical at the lower support bound.
    pub degenerate: bool,
    pub n: usize,
    pub log_likelihood: f64,
    /// KL divergence of the empirical law from the fitted model (geometric fits).
    pub kld: Option<f64>,
    /// Empirical over fitted 99th percentile (exponential fits).
    pub tail_ratio: Option<f64>,
}

impl FitResult {
    /// Geometric-fit success gate: converged, enough samples and a small KLD.
    pub fn is_success(&self) -> bool {
        self.converged && self.n >= SUCCESS_MIN_SAMPLES && self.kld.is_some_and(|k| k <= SUCCESS_MAX_KLD)
    }

    pub fn is_fat_tailed(&self) -> bool {
        self.tail_ratio.is_some_and(|r| r > FAT_TAIL_RATIO)
    }
}

/// `D_KL(P_emp || Geom(p))` with the geometric law on `{0, 1, 2, ...}`, natural log.
pub fn kld_vs_geometric(pmf: &EmpiricalPmf, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("geometric parameter {p} outside (0, 1]")));
    }
    let log_p = p.ln();
    let log_q = (1.0 - p).ln();
    let mut kld = 0.0;
    for (k, &c) in pmf.counts().iter().enumerate() {
        if c == 0 {
            continue;
        }
        let pe = c as f64 / pmf.total() as f64;
        let log_model = if k == 0 { log_p } else { k as f64 * log_q + log_p };
        kld += pe * (pe.ln() - log_model);
    }
    // Rounding can leave a tiny negative value for an exact match.
    Ok(kld.max(0.0))
}

/// Maximum-likelihood geometric fit on `{0, 1, 2, ...}`: `p = 1 / (1 + mean)`.
pub fn fit_geometric(samples: &[u64]) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(invalid("cannot fit an empty sample"));
    }
    let pmf = EmpiricalPmf::from_samples(samples);
    fit_geometric_pmf(&pmf)
}

pub fn fit_geometric_pmf(pmf: &EmpiricalPmf) -> Result<FitResult> {
    if pmf.total() == 0 {
        return Err(invalid("cannot fit an empty sample"));
    }
    let n = pmf.total() as usize;
    let mean = pmf.mean();
    let p = 1.0 / (1.0 + mean);
    let degenerate = mean == 0.0;
    let log_likelihood = if degenerate {
        0.0
    } else {
        n as f64 * (p.ln() + mean * (1.0 - p).ln())
    };
    Ok(FitResult {
        estimate: p,
        converged: !degenerate && n >= MIN_FIT_SAMPLES,
        degenerate,
        n,
        log_likelihood,
        kld: Some(kld_vs_geometric(pmf, p)?),
        tail_ratio: None,
    })
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Maximum-likelihood exponential fit with a tail-weight diagnostic.
///
/// The diagnostic is the empirical 99th percentile over the fitted one,
/// `ln(100) / rate`; values well above 1 indicate a heavier tail than exponential.
pub fn fit_exponential(samples: &[f64]) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(invalid("cannot fit an empty sample"));
    }
    if let Some(x) = samples.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(invalid(format!("exponential fit needs positive samples, got {x}")));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let rate = 1.0 / mean;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let fitted_p99 = 100f64.ln() / rate;
    Ok(FitResult {
        estimate: rate,
        converged: n >= 2,
        degenerate: false,
        n,
        log_likelihood: n as f64 * (rate.ln() - 1.0),
        kld: None,
        tail_ratio: Some(quantile(&sorted, 0.99) / fitted_p99),
    })
}

/// Per-type tenant profit summary over issued requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfitSummary {
    pub issued: usize,
    pub total_profit: f64,
    pub mean_profit: f64,
    /// Fraction of issued requests with positive end-profit.
    pub profiting_chance: f64,
    pub empty: bool,
}

impl ProfitSummary {
    /// Summarizes the end-profits of issued requests.
    pub fn from_profits(profits: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut total, mut positive) = (0usize, 0.0, 0usize);
        for p in profits {
            n += 1;
            total += p;
            if p > 0.0 {
                positive += 1;
            }
        }
        if n == 0 {
            return Self {
                empty: true,
                ..Self::default()
            };
        }
        Self {
            issued: n,
            total_profit: total,
            mean_profit: total / n as f64,
            profiting_chance: positive as f64 / n as f64,
            empty: false,
        }
    }

    /// Combines summaries of disjoint record sets.
    pub fn merge(&self, other: &Self) -> Self {
        let issued = self.issued + other.issued;
        if issued == 0 {
            return Self {
                empty: true,
                ..Self::default()
            };
        }
        let positive = self.profiting_chance * self.issued as f64 + other.profiting_chance * other.issued as f64;
        let total = self.total_profit + other.total_profit;
        Self {
            issued,
            total_profit: total,
            mean_profit: total / issued as f64,
            profiting_chance: positive / issued as f64,
            empty: false,
        }
    }
}

/// A record that may or may not carry an end-profit (balked requests do not).
pub trait ProfitRecord {
    fn slice_type(&self) -> usize;
    fn end_profit(&self) -> Option<f64>;
}

/// Profit summary per slice type; requests without an end-profit are skipped.
pub fn profit_summary<R: ProfitRecord>(records: &[R], n_types: usize) -> Vec<ProfitSummary> {
    (0..n_types)
        .map(|t| {
            ProfitSummary::from_profits(
                records
                    .iter()
                    .filter(|r| r.slice_type() == t)
                    .filter_map(|r| r.end_profit()),
            )
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
