//! Single-queue results with Poisson arrivals, exogenous Poisson acceptance,
//! exponential balking and exponential reneging.
//!
//! The impatient queue is a birth-death chain on the number of waiting
//! requests `l`: an arrival that finds `l - 1` requests joins with
//! probability `delta^l` (`delta = exp(-beta / mu)`), and the queue shrinks at
//! rate `mu + l alpha` because every waiting request, the head included, may
//! renege.

mod density;
pub mod quadrature;

pub use density::{wait_densities, WaitDensities};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    pub arrival_rate: f64,
    pub service_rate: f64,
    #[serde(default)]
    pub reneging_rate: f64,
    #[serde(default)]
    pub balking_exponent: f64,
}

impl QueueParams {
    pub fn new(arrival_rate: f64, service_rate: f64, reneging_rate: f64, balking_exponent: f64) -> Result<Self> {
        let p = Self {
            arrival_rate,
            service_rate,
            reneging_rate,
            balking_exponent,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn patient(arrival_rate: f64, service_rate: f64) -> Result<Self> {
        Self::new(arrival_rate, service_rate, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return Err(invalid("arrival rate must be positive"));
        }
        if !(self.service_rate > 0.0 && self.service_rate.is_finite()) {
            return Err(invalid("service rate must be positive"));
        }
        if !(self.reneging_rate >= 0.0) || !(self.balking_exponent >= 0.0) {
            return Err(invalid("reneging rate and balking exponent must be non-negative"));
        }
        Ok(())
    }

    /// Workload `lambda / mu`.
    pub fn rho(&self) -> f64 {
        self.arrival_rate / self.service_rate
    }

    /// `exp(-beta / mu)`.
    pub fn delta(&self) -> f64 {
        (-self.balking_exponent / self.service_rate).exp()
    }

    /// `mu / alpha`; infinite without reneging.
    pub fn gamma(&self) -> f64 {
        if self.reneging_rate > 0.0 {
            self.service_rate / self.reneging_rate
        } else {
            f64::INFINITY
        }
    }

    pub fn is_patient(&self) -> bool {
        self.reneging_rate == 0.0 && self.balking_exponent == 0.0
    }

    fn require_stable_patient(&self) -> Result<()> {
        self.validate()?;
        if !self.is_patient() {
            return Err(invalid("plain M/M/1 result requested for an impatient queue"));
        }
        if self.rho() >= 1.0 {
            return Err(Error::DivergentQueue { rho: self.rho() });
        }
        Ok(())
    }
}

/// Numerical knobs for series truncation and quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Stop once the bounded series tail is below this fraction of the running sum.
    pub series_tail_tol: f64,
    pub max_terms: usize,
    pub quadrature_abs_tol: f64,
    pub quadrature_max_depth: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            series_tail_tol: 1e-16,
            max_terms: 1_000_000,
            quadrature_abs_tol: 1e-10,
            quadrature_max_depth: 40,
        }
    }
}

impl TruncationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_tail_tol > 0.0 && self.quadrature_abs_tol > 0.0) || self.max_terms == 0 {
            return Err(invalid("truncation tolerances must be positive"));
        }
        Ok(())
    }
}

/// `(1 - rho) rho^l`.
pub fn mm1_pmf(params: &QueueParams, l: usize) -> Result<f64> {
    params.require_stable_patient()?;
    let rho = params.rho();
    Ok((1.0 - rho) * rho.powi(l as i32))
}

/// Little's law, `L = lambda W`.
pub fn little_mean_length(arrival_rate: f64, mean_wait: f64) -> f64 {
    arrival_rate * mean_wait
}

/// Mean M/M/1 waiting time `1 / (mu - lambda)`.
pub fn mm1_mean_wait(params: &QueueParams) -> Result<f64> {
    params.require_stable_patient()?;
    Ok(1.0 / (params.service_rate - params.arrival_rate))
}

/// Waiting-time density `(mu - lambda) exp(-(mu - lambda) w)` for `w >= 0`.
pub fn wait_pdf(params: &QueueParams, w: f64) -> Result<f64> {
    params.require_stable_patient()?;
    if w < 0.0 {
        return Ok(0.0);
    }
    let d = params.service_rate - params.arrival_rate;
    Ok(d * (-d * w).exp())
}

/// Waiting-time CDF `1 - exp(-(mu - lambda) w)` for `w >= 0`.
pub fn wait_cdf(params: &QueueParams, w: f64) -> Result<f64> {
    params.require_stable_patient()?;
    if w < 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - (-(params.service_rate - params.arrival_rate) * w).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BalkingModel {
    /// `b = 1 - l / l_max`.
    Linear { l_max: Option<f64> },
    /// `b = 1` on an empty queue, else `min(beta / l, 1)`.
    Hyperbolic,
    /// `b = exp(-beta l / mu)`.
    Exponential,
}

/// Probability that an arrival facing queue length `l` joins.
pub fn balking_prob(model: BalkingModel, params: &QueueParams, l: usize) -> Result<f64> {
    let lf = l as f64;
    let beta = params.balking_exponent;
    Ok(match model {
        BalkingModel::Linear { l_max } => {
            let l_max = l_max.ok_or_else(|| invalid("linear balking needs a truncation length"))?;
            if !(l_max > 0.0) {
                return Err(invalid("linear balking truncation length must be positive"));
            }
            (1.0 - lf / l_max).clamp(0.0, 1.0)
        }
        BalkingModel::Hyperbolic => {
            if l == 0 {
                1.0
            } else {
                (beta / lf).min(1.0)
            }
        }
        BalkingModel::Exponential => (-beta * lf / params.service_rate).exp(),
    })
}

/// Steady-state distribution of the queue length, truncated where the tail is negligible.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePmf {
    probs: Vec<f64>,
}

impl QueuePmf {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p(&self, l: usize) -> f64 {
        self.probs.get(l).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(l, p)| l as f64 * p).sum()
    }

    /// Total-variation distance to another distribution on `0, 1, 2, ...`.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        let n = self.probs.len().max(other.len());
        0.5 * (0..n)
            .map(|l| (self.p(l) - other.get(l).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }
}

/// Steady-state queue-length PMF under exponential balking and reneging.
///
/// `p(l) = p(0) prod_{i=1..l} lambda delta^i / (mu + i alpha)`, normalized.
/// Without impatience this is the geometric M/M/1 law.
pub fn impatient_pmf(params: &QueueParams, cfg: &TruncationConfig) -> Result<QueuePmf> {
    params.validate()?;
    cfg.validate()?;
    if params.is_patient() && params.rho() >= 1.0 {
        return Err(Error::DivergentQueue { rho: params.rho() });
    }
    let lambda = params.arrival_rate;
    let mu = params.service_rate;
    let alpha = params.reneging_rate;
    let delta = params.delta();
    let ratio = |i: usize| lambda * delta.powi(i as i32) / (mu + i as f64 * alpha);

    let mut terms = vec![1.0];
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut i = 1;
    loop {
        if i > cfg.max_terms {
            return Err(Error::Truncation {
                max_terms: cfg.max_terms,
            });
        }
        term *= ratio(i);
        terms.push(term);
        sum += term;
        if sum > 1e250 {
            terms.iter_mut().for_each(|t| *t /= sum);
            term /= sum;
            sum = 1.0;
        }
        // Ratios are non-increasing in i, so the tail is bounded by a geometric series.
        let next = ratio(i + 1);
        if next < 1.0 {
            let tail = term * next / (1.0 - next);
            if tail <= cfg.series_tail_tol * sum {
                break;
            }
        }
        i += 1;
    }
    while terms.len() > 1 && *terms.last().unwrap() == 0.0 {
        terms.pop();
    }
    let total: f64 = terms.iter().sum();
    Ok(QueuePmf {
        probs: terms.into_iter().map(|t| t / total).collect(),
    })
}

/// Join and acceptance probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoinAccept {
    pub p_join: f64,
    pub p_accept: f64,
    pub p_accept_and_join: f64,
    pub p_accept_given_join: f64,
    /// Set when nobody joins and the conditional is reported as 1.
    pub degenerate: bool,
}

impl JoinAccept {
    fn from_parts(p_join: f64, p_accept_and_join: f64, p_accept: f64) -> Self {
        let degenerate = p_join <= 0.0;
        Self {
            p_join,
            p_accept,
            p_accept_and_join,
            p_accept_given_join: if degenerate { 1.0 } else { p_accept_and_join / p_join },
            degenerate,
        }
    }
}

fn acceptance_factor(gamma: f64, j: f64) -> f64 {
    if gamma.is_infinite() {
        1.0
    } else {
        gamma / (gamma + j)
    }
}

/// Join/accept probabilities in the closed form that weights queue length `j`
/// by `p(j) delta^j` and treats arrivals to an empty queue as accepted at once:
///
/// `P(J) = sum_{j>=1} p(j) delta^j`,
/// `P(A, J) = sum_{j>=1} p(j) delta^j gamma / (gamma + j)`,
/// `P(A) = p(0) + P(A, J)`.
pub fn join_accept_probs(params: &QueueParams, cfg: &TruncationConfig) -> Result<JoinAccept> {
    let pmf = impatient_pmf(params, cfg)?;
    let delta = params.delta();
    let gamma = params.gamma();
    let (mut pj, mut paj) = (0.0, 0.0);
    for (j, &p) in pmf.probs().iter().enumerate().skip(1) {
        let w = p * delta.powi(j as i32);
        pj += w;
        paj += w * acceptance_factor(gamma, j as f64);
    }
    Ok(JoinAccept::from_parts(pj, paj, pmf.p(0) + paj))
}

/// Per-arrival join/accept probabilities of the birth-death model itself.
///
/// By PASTA an arrival finds `l` waiting requests with probability `p(l)`,
/// joins with probability `delta^(l+1)` and, at position `k = l + 1`, is
/// accepted before reneging with probability `gamma / (gamma + k)`. Nobody
/// bypasses the queue, so `P(A) = P(A, J)`.
pub fn join_accept_probs_per_arrival(params: &QueueParams, cfg: &TruncationConfig) -> Result<JoinAccept> {
    let pmf = impatient_pmf(params, cfg)?;
    let delta = params.delta();
    let gamma = params.gamma();
    let (mut pj, mut paj) = (0.0, 0.0);
    for (l, &p) in pmf.probs().iter().enumerate() {
        let k = l + 1;
        let w = p * delta.powi(k as i32);
        pj += w;
        paj += w * acceptance_factor(gamma, k as f64);
    }
    Ok(JoinAccept::from_parts(pj, paj, paj))
}
