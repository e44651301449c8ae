//! Operator-side running estimates published to waiting tenants.

use crate::tenant::{expected_wait_table, KnowledgeRegime, TenantRequest};

/// Acceptances from a busy queue needed before the serving rate is published.
pub const MIN_SERVED: u64 = 10;

/// Running statistics of one controller queue.
#[derive(Debug, Clone, Default)]
pub struct QueueEstimator {
    /// Acceptances of requests that had been waiting.
    served: u64,
    /// `len_time[l]`: time spent with exactly `l` requests queued.
    len_time: Vec<f64>,
    /// `reneges_at[k]`: reneges from 1-based position `k`.
    reneges_at: Vec<u64>,
    accepted: u64,
    accepted_wait_sum: f64,
}

impl QueueEstimator {
    pub fn advance(&mut self, len: usize, dt: f64) {
        if self.len_time.len() <= len {
            self.len_time.resize(len + 1, 0.0);
        }
        self.len_time[len] += dt;
    }

    pub fn on_accept(&mut self, wait: f64, had_waited: bool) {
        self.accepted += 1;
        self.accepted_wait_sum += wait;
        if had_waited {
            self.served += 1;
        }
    }

    pub fn on_renege(&mut self, position: usize) {
        if self.reneges_at.len() <= position {
            self.reneges_at.resize(position + 1, 0);
        }
        self.reneges_at[position] += 1;
    }

    /// Head acceptances per unit of time the queue was non-empty.
    pub fn serving_rate(&self) -> Option<f64> {
        if self.served < MIN_SERVED {
            return None;
        }
        let busy: f64 = self.len_time.iter().skip(1).sum();
        (busy > 0.0).then(|| self.served as f64 / busy)
    }

    /// `omega[k]` for `k in 0..=k_max`: reneges at position `k` per unit of
    /// time position `k` was occupied; `omega[0] = 0`.
    pub fn reneging_rates(&self, k_max: usize) -> Vec<f64> {
        let mut omega = vec![0.0; k_max + 1];
        let mut occupied: f64 = self.len_time.iter().skip(k_max + 1).sum();
        for k in (1..=k_max).rev() {
            occupied += self.len_time.get(k).copied().unwrap_or(0.0);
            let count = self.reneges_at.get(k).copied().unwrap_or(0);
            if occupied > 0.0 {
                omega[k] = count as f64 / occupied;
            }
        }
        omega
    }

    /// Running average wait of accepted requests, 0 before the first one.
    pub fn avg_wait(&self) -> f64 {
        if self.accepted == 0 {
            0.0
        } else {
            self.accepted_wait_sum / self.accepted as f64
        }
    }

    /// Expected waits by position, `table[k] = E{w_k}`, for the regimes that
    /// evaluate them; `None` while the serving rate is unpublished.
    pub fn wait_table(&self, regime: &KnowledgeRegime, k_max: usize) -> Option<Vec<f64>> {
        let mu = self.serving_rate()?;
        Some(match regime {
            KnowledgeRegime::Full => expected_wait_table(k_max, mu, &self.reneging_rates(k_max)),
            _ => (0..=k_max).map(|k| k as f64 / mu).collect(),
        })
    }

    /// Whether a tenant issues into a queue it would join at length `len`.
    pub fn issues(&self, regime: &KnowledgeRegime, req: &TenantRequest, len: usize) -> bool {
        let budget = req.lifetime_profit() - req.issue_cost;
        match regime {
            KnowledgeRegime::AvgWait => budget - req.waiting_cost_rate * self.avg_wait() >= 0.0,
            KnowledgeRegime::ServingRate | KnowledgeRegime::Full => match self.wait_table(regime, len) {
                None => true,
                Some(table) => budget - req.waiting_cost_rate * table[len] >= 0.0,
            },
            _ => true,
        }
    }
}
