//! Rational balking and reneging of tenants.
//!
//! A tenant issues a request when the expected lifetime profit covers the
//! issue cost plus the expected waiting cost, and keeps waiting while the
//! profit still covers the expected remaining waiting cost. What "expected
//! waiting time" means depends on how much the operator discloses about its
//! queues, captured by [`KnowledgeRegime`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Business parameters of one request: `[u0, u, zeta, tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TenantRequest {
    pub issue_cost: f64,
    pub waiting_cost_rate: f64,
    pub profit_rate: f64,
    /// Realized slice lifetime in periods.
    pub lifetime: f64,
}

impl TenantRequest {
    /// `zeta * tau`.
    pub fn lifetime_profit(&self) -> f64 {
        self.profit_rate * self.lifetime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalkDecision {
    Issue,
    Balk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RenegeDecision {
    Wait,
    Renege,
}

impl RenegeDecision {
    fn from_wait(wait: bool) -> Self {
        if wait {
            Self::Wait
        } else {
            Self::Renege
        }
    }
}

/// What the operator tells waiting tenants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "knowledge", rename_all = "snake_case")]
pub enum KnowledgeRegime {
    /// Never balks or reneges.
    Patient,
    /// Knows nothing; reneges after a wait fixed at entrance.
    Blind { risk_factor: f64 },
    /// Observes its own position only and learns the serving rate while waiting.
    #[serde(rename = "position")]
    PositionOnly { delta_k: usize },
    /// Told the running average accepted wait; decides once at entrance.
    AvgWait,
    /// Told the serving rate and observes its position.
    ServingRate,
    /// Told the serving rate and per-position reneging rates, observes its position.
    Full,
}

impl KnowledgeRegime {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Patient => "patient",
            Self::Blind { .. } => "blind",
            Self::PositionOnly { .. } => "position",
            Self::AvgWait => "avg_wait",
            Self::ServingRate => "serving_rate",
            Self::Full => "full",
        }
    }

    /// Parses a regime name with the parameters it needs.
    pub fn parse(name: &str, risk_factor: Option<f64>, delta_k: Option<usize>) -> Result<Self> {
        Ok(match name {
            "patient" => Self::Patient,
            "blind" => {
                let risk_factor = risk_factor.ok_or_else(|| invalid("blind regime needs a risk factor"))?;
                if !(risk_factor >= 0.0) {
                    return Err(invalid("risk factor must be non-negative"));
                }
                Self::Blind { risk_factor }
            }
            "position" | "position_only" => {
                let delta_k = delta_k.ok_or_else(|| invalid("position regime needs delta_k"))?;
                if delta_k < 1 {
                    return Err(invalid("delta_k must be at least 1"));
                }
                Self::PositionOnly { delta_k }
            }
            "avg_wait" => Self::AvgWait,
            "serving_rate" => Self::ServingRate,
            "full" => Self::Full,
            other => return Err(invalid(format!("unknown knowledge regime {other:?}"))),
        })
    }

    /// Whether tenants can estimate their wait before issuing.
    pub fn can_balk(&self) -> bool {
        matches!(self, Self::AvgWait | Self::ServingRate | Self::Full)
    }

    pub fn is_patient(&self) -> bool {
        match self {
            Self::Patient => true,
            Self::Blind { risk_factor } => risk_factor.is_infinite(),
            _ => false,
        }
    }
}

/// Queue information the operator publishes; fields outside the regime stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueInfoView {
    pub position: Option<usize>,
    pub queue_length: Option<usize>,
    pub serving_rate: Option<f64>,
    /// `omega[i]` is the reneging-rate estimate at position `i`; `omega[0] = 0`.
    pub reneging_rates: Option<Vec<f64>>,
    pub avg_wait: Option<f64>,
}

impl QueueInfoView {
    /// Restricts a fully populated view to what `regime` may observe.
    pub fn restricted(full: &QueueInfoView, regime: &KnowledgeRegime) -> Self {
        match regime {
            KnowledgeRegime::Patient | KnowledgeRegime::Blind { .. } => Self::default(),
            KnowledgeRegime::PositionOnly { .. } => Self {
                position: full.position,
                queue_length: full.queue_length,
                ..Self::default()
            },
            KnowledgeRegime::AvgWait => Self {
                avg_wait: full.avg_wait,
                ..Self::default()
            },
            KnowledgeRegime::ServingRate => Self {
                position: full.position,
                queue_length: full.queue_length,
                serving_rate: full.serving_rate,
                ..Self::default()
            },
            KnowledgeRegime::Full => full.clone(),
        }
    }
}

/// Issue iff `zeta tau - u0 - u l / mu >= 0`.
pub fn balk_decision(req: &TenantRequest, l: usize, mu: f64) -> BalkDecision {
    let expected_wait = l as f64 / mu;
    if req.lifetime_profit() - req.issue_cost - req.waiting_cost_rate * expected_wait >= 0.0 {
        BalkDecision::Issue
    } else {
        BalkDecision::Balk
    }
}

/// Distribution of the slice lifetime as perceived by tenants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LifetimeDistribution {
    Uniform { max: f64 },
    /// Density `1 / (t + 1)^2`.
    Rational,
    /// Pareto with scale 1 and shape 1.
    Pareto,
    Exponential { rate: f64 },
}

impl LifetimeDistribution {
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { max } => (t / max).min(1.0),
            Self::Rational => 1.0 - 1.0 / (t + 1.0),
            Self::Pareto => {
                if t <= 1.0 {
                    0.0
                } else {
                    1.0 - 1.0 / t
                }
            }
            Self::Exponential { rate } => 1.0 - (-rate * t).exp(),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform { max } => {
                if t <= max {
                    1.0 / max
                } else {
                    0.0
                }
            }
            Self::Rational => 1.0 / ((t + 1.0) * (t + 1.0)),
            Self::Pareto => {
                if t < 1.0 {
                    0.0
                } else {
                    1.0 / (t * t)
                }
            }
            Self::Exponential { rate } => rate * (-rate * t).exp(),
        }
    }

    /// Inverse-CDF sample from a uniform draw in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Self::Uniform { max } => p * max,
            Self::Rational => 1.0 / (1.0 - p) - 1.0,
            Self::Pareto => 1.0 / (1.0 - p),
            Self::Exponential { rate } => -(1.0 - p).ln() / rate,
        }
    }
}

/// Probability that a tenant joins a queue of length `l`.
///
/// Integrates the issue decision over the lifetime distribution:
/// `b(l) = 1 - F_tau((u0 mu + u l) / (mu zeta))`.
pub fn balking_chance(dist: &LifetimeDistribution, l: usize, mu: f64, u: f64, zeta: f64, u0: f64) -> f64 {
    let threshold = (u0 * mu + u * l as f64) / (mu * zeta);
    if threshold <= 0.0 {
        // A zero-length lifetime still ties the inequality.
        return 1.0;
    }
    (1.0 - dist.cdf(threshold)).clamp(0.0, 1.0)
}

/// Closed forms of [`balking_chance`] for `u0 = 0`.
pub fn balking_chance_closed_form(dist: &LifetimeDistribution, l: usize, mu: f64, u: f64, zeta: f64) -> f64 {
    let l = l as f64;
    match *dist {
        LifetimeDistribution::Uniform { max } => (1.0 - u * l / (mu * zeta * max)).clamp(0.0, 1.0),
        LifetimeDistribution::Rational => mu * zeta / (u * l + mu * zeta),
        LifetimeDistribution::Pareto => {
            if l == 0.0 {
                1.0
            } else {
                (mu * zeta / (u * l)).min(1.0)
            }
        }
        LifetimeDistribution::Exponential { rate } => (-rate * u * l / (zeta * mu)).exp(),
    }
}

/// Expected remaining wait at position `k` given per-position reneging rates.
///
/// `E{w_k} = sum_{i<k} 1 / (mu + sum_{j<=i} omega_j)`, with `omega_0 = 0` and
/// missing entries read as zero.
pub fn expected_wait_full(k: usize, mu: f64, omega: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut cumulative = 0.0;
    for i in 0..k {
        if i > 0 {
            cumulative += omega.get(i).copied().unwrap_or(0.0);
        }
        acc += 1.0 / (mu + cumulative);
    }
    acc
}

/// Prefix table of [`expected_wait_full`] for positions `0..=k_max`.
pub fn expected_wait_table(k_max: usize, mu: f64, omega: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(0.0);
    let mut cumulative = 0.0;
    for i in 0..k_max {
        if i > 0 {
            cumulative += omega.get(i).copied().unwrap_or(0.0);
        }
        let prev = out[i];
        out.push(prev + 1.0 / (mu + cumulative));
    }
    out
}

/// Full knowledge: wait iff `zeta tau - u E{w_k} >= 0`.
pub fn renege_full(req: &TenantRequest, k: usize, mu: f64, omega: &[f64]) -> RenegeDecision {
    let ew = expected_wait_full(k, mu, omega);
    RenegeDecision::from_wait(req.lifetime_profit() - req.waiting_cost_rate * ew >= 0.0)
}

/// Serving-rate knowledge: wait iff `k <= mu zeta tau / u`.
pub fn renege_serving_rate(req: &TenantRequest, k: usize, mu: f64) -> RenegeDecision {
    RenegeDecision::from_wait(req.waiting_cost_rate * k as f64 <= mu * req.lifetime_profit())
}

/// Outcome of the position-only rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionVerdict {
    pub decision: RenegeDecision,
    /// Elapsed time since entrance at which the request reneges if its
    /// position does not change first. `None` while the estimator is off.
    pub deadline: Option<f64>,
}

/// Position-only knowledge with an online serving-rate estimate.
///
/// `l` is the queue length at entrance, `k` the current position and
/// `elapsed` the time since entrance. The estimate `(l - k) / elapsed` is
/// trusted only once `l - k >= delta_k`.
pub fn renege_position(req: &TenantRequest, k: usize, l: usize, elapsed: f64, delta_k: usize) -> Result<PositionVerdict> {
    if k > l {
        return Err(invalid(format!("position {k} beyond entrance length {l}")));
    }
    if l - k < delta_k {
        return Ok(PositionVerdict {
            decision: RenegeDecision::Wait,
            deadline: None,
        });
    }
    if k == 0 {
        return Ok(PositionVerdict {
            decision: RenegeDecision::Wait,
            deadline: None,
        });
    }
    let zt = req.lifetime_profit();
    let u = req.waiting_cost_rate;
    let (l_f, k_f) = (l as f64, k as f64);
    // k <= l zt / (u T + zt), rearranged to avoid dividing by a zero denominator.
    let wait = k_f * (u * elapsed + zt) <= l_f * zt;
    let deadline = if u > 0.0 {
        Some(zt * (l_f - k_f) / (u * k_f))
    } else {
        None
    };
    Ok(PositionVerdict {
        decision: RenegeDecision::from_wait(wait),
        deadline,
    })
}

/// Average-wait knowledge: wait iff `zeta tau - u w_bar >= 0`; fixed for the whole stay.
pub fn renege_avg_wait(req: &TenantRequest, avg_wait: f64) -> RenegeDecision {
    RenegeDecision::from_wait(req.lifetime_profit() - req.waiting_cost_rate * avg_wait >= 0.0)
}

/// Blind reneging: maximal wait `t_max = (risk zeta tau - u0) / u`, floored at zero.
pub fn renege_blind(req: &TenantRequest, risk_factor: f64) -> f64 {
    if risk_factor.is_infinite() {
        return f64::INFINITY;
    }
    let t = (risk_factor * req.lifetime_profit() - req.issue_cost) / req.waiting_cost_rate;
    if t.is_nan() {
        // u = 0 with zero numerator: waiting is free.
        return f64::INFINITY;
    }
    t.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Accepted { wait: f64 },
    Reneged { wait: f64 },
}

/// Realized tenant profit of an issued request.
pub fn end_profit(req: &TenantRequest, outcome: Outcome) -> f64 {
    match outcome {
        Outcome::Accepted { wait } => req.lifetime_profit() - req.issue_cost - req.waiting_cost_rate * wait,
        Outcome::Reneged { wait } => -req.issue_cost - req.waiting_cost_rate * wait,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn req(u0: f64, u: f64, zeta: f64, tau: f64) -> TenantRequest {
        TenantRequest {
            issue_cost: u0,
            waiting_cost_rate: u,
            profit_rate: zeta,
            lifetime: tau,
        }
    }

    #[test]
    fn balk_decision_examples() {
        assert_eq!(balk_decision(&req(0.0, 1.0, 8.0, 5.0), 10, 1.0), BalkDecision::Issue);
        assert_eq!(balk_decision(&req(0.0, 1.0, 8.0, 5.0), 0, 1.0), BalkDecision::Issue);
        assert_eq!(balk_decision(&req(50.0, 1.0, 8.0, 5.0), 0, 1.0), BalkDecision::Balk);
        // 40 = 0 + 1 * 40 / 1 exactly.
        assert_eq!(balk_decision(&req(0.0, 1.0, 8.0, 5.0), 40, 1.0), BalkDecision::Issue);
        assert_eq!(balk_decision(&req(0.0, 1.0, 8.0, 5.0), 41, 1.0), BalkDecision::Balk);
    }

    #[test]
    fn balking_chance_examples() {
        let exp = LifetimeDistribution::Exponential { rate: 0.2 };
        assert_eq!(balking_chance_closed_form(&exp, 0, 1.0, 1.0, 8.0), 1.0);
        assert_abs_diff_eq!(
            balking_chance_closed_form(&LifetimeDistribution::Rational, 8, 1.0, 1.0, 8.0),
            0.5
        );
        let uni = LifetimeDistribution::Uniform { max: 5.0 };
        assert_eq!(balking_chance_closed_form(&uni, 40, 1.0, 1.0, 8.0), 0.0);
    }

    #[test]
    fn closed_forms_match_cdf_route() {
        let dists = [
            LifetimeDistribution::Uniform { max: 5.0 },
            LifetimeDistribution::Rational,
            LifetimeDistribution::Pareto,
            LifetimeDistribution::Exponential { rate: 0.2 },
        ];
        for d in dists {
            for l in 0..60 {
                let a = balking_chance(&d, l, 1.3, 1.0, 8.0, 0.0);
                let b = balking_chance_closed_form(&d, l, 1.3, 1.0, 8.0);
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn full_knowledge_expected_wait() {
        assert_abs_diff_eq!(expected_wait_full(3, 1.0, &[0.0, 1.0, 1.0, 1.0]), 1.0 + 0.5 + 1.0 / 3.0);
        assert_abs_diff_eq!(expected_wait_full(7, 2.0, &[]), 3.5);
        let table = expected_wait_table(5, 1.0, &[0.0, 1.0, 1.0, 1.0, 1.0]);
        for (k, v) in table.iter().enumerate() {
            assert_abs_diff_eq!(*v, expected_wait_full(k, 1.0, &[0.0, 1.0, 1.0, 1.0, 1.0]), epsilon = 1e-12);
        }
    }

    #[test]
    fn serving_rate_threshold() {
        let r = req(0.0, 1.0, 8.0, 5.0);
        assert_eq!(renege_serving_rate(&r, 40, 1.0), RenegeDecision::Wait);
        assert_eq!(renege_serving_rate(&r, 41, 1.0), RenegeDecision::Renege);
        assert_eq!(renege_serving_rate(&r, 0, 1.0), RenegeDecision::Wait);
        assert_eq!(renege_serving_rate(&req(0.0, 1e300, 8.0, 5.0), 1, 1.0), RenegeDecision::Renege);
    }

    #[test]
    fn position_rule() {
        let r = req(0.0, 1.0, 8.0, 5.0);
        let v = renege_position(&r, 9, 10, 100.0, 2).unwrap();
        assert_eq!(v.decision, RenegeDecision::Wait);
        assert!(v.deadline.is_none());
        let v = renege_position(&r, 5, 10, 1.0, 2).unwrap();
        assert_eq!(v.decision, RenegeDecision::Wait);
        assert_abs_diff_eq!(v.deadline.unwrap(), 40.0);
        let v = renege_position(&r, 5, 10, 1e9, 2).unwrap();
        assert_eq!(v.decision, RenegeDecision::Renege);
        assert!(renege_position(&r, 11, 10, 1.0, 2).is_err());
    }

    #[test]
    fn avg_wait_rule() {
        let r = req(0.0, 1.0, 8.0, 5.0);
        assert_eq!(renege_avg_wait(&r, 0.0), RenegeDecision::Wait);
        assert_eq!(renege_avg_wait(&r, 40.0), RenegeDecision::Wait);
        assert_eq!(renege_avg_wait(&r, 41.0), RenegeDecision::Renege);
    }

    #[test]
    fn blind_deadline() {
        let r = req(0.0, 1.0, 8.0, 5.0);
        assert_abs_diff_eq!(renege_blind(&r, 0.1), 4.0, epsilon = 1e-12);
        assert_eq!(renege_blind(&r, 0.0), 0.0);
        assert_eq!(renege_blind(&r, f64::INFINITY), f64::INFINITY);
        assert_eq!(renege_blind(&req(10.0, 1.0, 8.0, 5.0), 0.1), 0.0);
    }

    #[test]
    fn end_profit_examples() {
        assert_abs_diff_eq!(end_profit(&req(0.0, 1.0, 8.0, 5.0), Outcome::Accepted { wait: 2.0 }), 38.0);
        assert_abs_diff_eq!(end_profit(&req(0.0, 1.5, 8.0, 5.0), Outcome::Reneged { wait: 4.0 }), -6.0);
        assert_abs_diff_eq!(end_profit(&req(0.0, 1.0, 8.0, 5.0), Outcome::Accepted { wait: 0.0 }), 40.0);
    }

    #[test]
    fn regime_parsing() {
        assert_eq!(KnowledgeRegime::parse("full", None, None).unwrap(), KnowledgeRegime::Full);
        assert!(KnowledgeRegime::parse("blind", None, None).is_err());
        assert_eq!(
            KnowledgeRegime::parse("position", None, Some(2)).unwrap(),
            KnowledgeRegime::PositionOnly { delta_k: 2 }
        );
        assert!(KnowledgeRegime::parse("psychic", None, None).is_err());
        assert!(!KnowledgeRegime::PositionOnly { delta_k: 2 }.can_balk());
        assert!(KnowledgeRegime::Blind { risk_factor: f64::INFINITY }.is_patient());
    }

    #[test]
    fn view_restriction() {
        let full = QueueInfoView {
            position: Some(3),
            queue_length: Some(5),
            serving_rate: Some(2.0),
            reneging_rates: Some(vec![0.0, 0.1]),
            avg_wait: Some(1.0),
        };
        let v = QueueInfoView::restricted(&full, &KnowledgeRegime::ServingRate);
        assert!(v.reneging_rates.is_none() && v.avg_wait.is_none());
        assert_eq!(v.serving_rate, Some(2.0));
        let v = QueueInfoView::restricted(&full, &KnowledgeRegime::AvgWait);
        assert!(v.position.is_none());
        assert_eq!(QueueInfoView::restricted(&full, &KnowledgeRegime::Patient), QueueInfoView::default());
    }
}
