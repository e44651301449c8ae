//! A single impatient queue with exogenous exponential service, simulated on
//! its own as a check on the closed-form queue analytics.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{stream, STREAM_ISOLATED};
use crate::error::Result;
use crate::queueing::QueueParams;

use std::collections::VecDeque;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IsolatedMetrics {
    pub horizon: f64,
    pub events: u64,
    pub arrivals: u64,
    pub balked: u64,
    pub joined: u64,
    pub accepted: u64,
    pub reneged: u64,
    /// Time spent at each queue length.
    pub occupancy_time: Vec<f64>,
    pub accepted_waits: Vec<f64>,
    pub reneged_waits: Vec<f64>,
}

impl IsolatedMetrics {
    /// Time-weighted queue-length distribution.
    pub fn occupancy_pmf(&self) -> Vec<f64> {
        let total: f64 = self.occupancy_time.iter().sum();
        self.occupancy_time.iter().map(|t| t / total).collect()
    }

    pub fn mean_length(&self) -> f64 {
        self.occupancy_pmf().iter().enumerate().map(|(l, p)| l as f64 * p).sum()
    }

    /// Mean time in queue over joined requests that left.
    pub fn mean_wait(&self) -> f64 {
        let n = self.accepted_waits.len() + self.reneged_waits.len();
        if n == 0 {
            return 0.0;
        }
        (self.accepted_waits.iter().sum::<f64>() + self.reneged_waits.iter().sum::<f64>()) / n as f64
    }

    /// Joined requests per unit time.
    pub fn effective_arrival_rate(&self) -> f64 {
        self.joined as f64 / self.horizon
    }
}

/// Simulates the queue up to `horizon`.
///
/// An arrival that finds `l` requests joins with probability `delta^(l+1)`,
/// every queued request (the head included) reneges at rate `alpha`, and the
/// head is accepted at rate `mu`. Exponential patience is memoryless, so a
/// renege picks a uniformly random queued request.
pub fn isolated_queue_sim(params: &QueueParams, horizon: f64, seed: u64) -> Result<IsolatedMetrics> {
    params.validate()?;
    let QueueParams {
        arrival_rate: lambda,
        service_rate: mu,
        reneging_rate: alpha,
        ..
    } = *params;
    let delta = params.delta();
    let mut rng = stream(seed, STREAM_ISOLATED);
    let mut queue: VecDeque<f64> = VecDeque::new();
    let mut m = IsolatedMetrics {
        horizon,
        ..Default::default()
    };
    let mut now = 0.0;
    loop {
        let l = queue.len();
        let service = if l > 0 { mu } else { 0.0 };
        let renege = alpha * l as f64;
        let total = lambda + service + renege;
        let dt = if total > 0.0 {
            rng.sample::<f64, _>(Exp1) / total
        } else {
            f64::INFINITY
        };
        let next = (now + dt).min(horizon);
        if m.occupancy_time.len() <= l {
            m.occupancy_time.resize(l + 1, 0.0);
        }
        m.occupancy_time[l] += next - now;
        now = next;
        if now >= horizon {
            break;
        }
        m.events += 1;
        let u = rng.random::<f64>() * total;
        if u < lambda {
            m.arrivals += 1;
            if rng.random::<f64>() < delta.powi(l as i32 + 1) {
                m.joined += 1;
                queue.push_back(now);
            } else {
                m.balked += 1;
            }
        } else if u < lambda + service {
            let enter = queue.pop_front().expect("busy queue");
            m.accepted += 1;
            m.accepted_waits.push(now - enter);
        } else {
            let victim = rng.random_range(0..l);
            let enter = queue.remove(victim).expect("victim index in range");
            m.reneged += 1;
            m.reneged_waits.push(now - enter);
        }
    }
    Ok(m)
}
