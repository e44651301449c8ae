//! Per-replication measurements and their Monte-Carlo aggregation.

use serde::{Deserialize, Serialize};

use crate::controller::EventRecord;
use crate::region::RegionIndex;
use crate::scenario::Scenario;
use crate::stats::{fit_geometric, mean_and_stderr, profit_summary, FitResult, ProfitRecord, ProfitSummary};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestOutcome {
    Accepted,
    Reneged,
    Balked,
    CapRejected,
    /// Still queued when the horizon was reached.
    Waiting,
}

impl RequestOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::Reneged => "reneged",
            Self::Balked => "balked",
            Self::CapRejected => "cap_rejected",
            Self::Waiting => "waiting",
        }
    }
}

/// Fate of one tenant request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: u64,
    /// Zero-based slice type.
    pub slice_type: usize,
    pub arrival_time: f64,
    pub lifetime: f64,
    pub outcome: RequestOutcome,
    /// Time spent queued; `None` for balked and still-waiting requests.
    pub wait: Option<f64>,
    /// Tenant end-profit; `None` unless the request was issued and resolved.
    pub end_profit: Option<f64>,
}

impl ProfitRecord for RequestRecord {
    fn slice_type(&self) -> usize {
        self.slice_type
    }

    fn end_profit(&self) -> Option<f64> {
        self.end_profit
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub arrivals: u64,
    pub balks: u64,
    pub reneges: u64,
    pub accepted: u64,
    pub cap_rejected: u64,
    pub waiting: u64,
}

impl TypeCounts {
    /// Every arrival is accounted for exactly once.
    pub fn is_conserved(&self) -> bool {
        self.arrivals == self.balks + self.reneges + self.accepted + self.cap_rejected + self.waiting
    }
}

/// Everything measured in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub horizon: f64,
    /// Length of the window after warm-up used for time averages.
    pub observed_time: f64,
    pub counts: Vec<TypeCounts>,
    /// Acceptance instants per slice type, after warm-up.
    pub acceptance_times: Vec<Vec<f64>>,
    /// Waits of reneged requests per slice type.
    pub renege_waits: Vec<Vec<f64>>,
    pub requests: Vec<RequestRecord>,
    /// Time spent in each feasible state, after warm-up.
    pub occupancy: Vec<f64>,
    /// Integral of the instant utility rate, after warm-up.
    pub utility_integral: f64,
    /// Per controller queue: integral of the queue length, after warm-up.
    pub queue_length_integral: Vec<f64>,
    /// Per controller queue: requests that joined.
    pub joined: Vec<u64>,
    /// Per controller queue: summed waits of joined requests that left.
    pub wait_sum: Vec<f64>,
    /// Per controller queue: joined requests that left (accepted or reneged).
    pub departed: Vec<u64>,
    /// Component-wise maximum of the assigned resources over the run.
    pub max_resource_use: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub events: Option<Vec<EventRecord>>,
}

impl RunMetrics {
    pub fn type_count(&self) -> usize {
        self.counts.len()
    }

    pub fn is_conserved(&self) -> bool {
        self.counts.iter().all(TypeCounts::is_conserved)
    }

    /// Inter-acceptance times of `slice_type` binned to whole periods.
    pub fn iat_periods(&self, slice_type: usize) -> Vec<u64> {
        self.acceptance_times[slice_type]
            .windows(2)
            .map(|w| (w[1] - w[0]).floor() as u64)
            .collect()
    }

    /// Geometric fit of the binned inter-acceptance times; `None` with fewer than two gaps.
    pub fn iat_fit(&self, slice_type: usize) -> Option<FitResult> {
        let iat = self.iat_periods(slice_type);
        if iat.len() < 2 {
            return None;
        }
        fit_geometric(&iat).ok()
    }

    pub fn profit_summary(&self) -> Vec<ProfitSummary> {
        profit_summary(&self.requests, self.type_count())
    }

    /// Time-averaged overall utility rate.
    pub fn mean_utility_rate(&self) -> f64 {
        if self.observed_time > 0.0 {
            self.utility_integral / self.observed_time
        } else {
            0.0
        }
    }

    /// Time-averaged number of live slices per type.
    pub fn mean_state(&self, region: &RegionIndex) -> Vec<f64> {
        let mut out = vec![0.0; region.type_count()];
        if self.observed_time <= 0.0 {
            return out;
        }
        for (t, s) in self.occupancy.iter().zip(region.feasible()) {
            for (acc, &c) in out.iter_mut().zip(s.counts()) {
                *acc += t * c as f64 / self.observed_time;
            }
        }
        out
    }

    /// Acceptances per period of `slice_type` after warm-up.
    pub fn acceptance_rate(&self, slice_type: usize) -> f64 {
        if self.observed_time > 0.0 {
            self.acceptance_times[slice_type].len() as f64 / self.observed_time
        } else {
            0.0
        }
    }

    pub fn mean_queue_length(&self, q: usize) -> f64 {
        if self.observed_time > 0.0 {
            self.queue_length_integral[q] / self.observed_time
        } else {
            0.0
        }
    }

    /// Mean time in queue of joined requests that left queue `q`.
    pub fn mean_wait(&self, q: usize) -> f64 {
        if self.departed[q] > 0 {
            self.wait_sum[q] / self.departed[q] as f64
        } else {
            0.0
        }
    }

    /// Queue-length weighted mean time in queue over all queues.
    pub fn weighted_mean_wait(&self) -> f64 {
        let total: f64 = self.queue_length_integral.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        (0..self.queue_length_integral.len())
            .map(|q| self.mean_wait(q) * self.queue_length_integral[q])
            .sum::<f64>()
            / total
    }

    /// Fraction of arrivals that were eventually accepted, over all types.
    pub fn admission_rate(&self) -> f64 {
        let arrivals: u64 = self.counts.iter().map(|c| c.arrivals).sum();
        let accepted: u64 = self.counts.iter().map(|c| c.accepted).sum();
        if arrivals == 0 {
            0.0
        } else {
            accepted as f64 / arrivals as f64
        }
    }

    /// Mean wait over accepted requests of all types.
    pub fn mean_accepted_wait(&self) -> f64 {
        let waits: Vec<f64> = self
            .requests
            .iter()
            .filter(|r| r.outcome == RequestOutcome::Accepted)
            .filter_map(|r| r.wait)
            .collect();
        if waits.is_empty() {
            0.0
        } else {
            waits.iter().sum::<f64>() / waits.len() as f64
        }
    }

    /// Named scalar metrics of this run; slice types are 1-based in the names.
    pub fn summary_row(&self) -> Vec<(String, f64)> {
        let mut row = vec![
            ("u_sigma".to_string(), self.mean_utility_rate()),
            ("mean_wait".to_string(), self.weighted_mean_wait()),
            ("admission".to_string(), self.admission_rate()),
            ("mean_accepted_wait".to_string(), self.mean_accepted_wait()),
        ];
        let profits = self.profit_summary();
        for (n, (c, p)) in self.counts.iter().zip(&profits).enumerate() {
            let t = n + 1;
            row.extend([
                (format!("arrivals_{t}"), c.arrivals as f64),
                (format!("accepted_{t}"), c.accepted as f64),
                (format!("balks_{t}"), c.balks as f64),
                (format!("reneges_{t}"), c.reneges as f64),
                (format!("cap_rejected_{t}"), c.cap_rejected as f64),
                (format!("waiting_{t}"), c.waiting as f64),
                (format!("acceptance_rate_{t}"), self.acceptance_rate(n)),
                (format!("total_profit_{t}"), p.total_profit),
                (format!("mean_profit_{t}"), p.mean_profit),
                (format!("profiting_chance_{t}"), p.profiting_chance),
            ]);
        }
        row
    }
}

/// Mean and standard error of one metric across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Aggregates the summary rows of several runs, keeping the row order.
pub fn aggregate(runs: &[RunMetrics]) -> Vec<MetricStat> {
    let rows: Vec<Vec<(String, f64)>> = runs.iter().map(RunMetrics::summary_row).collect();
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let xs: Vec<f64> = rows.iter().map(|r| r[i].1).collect();
            let (mean, stderr) = mean_and_stderr(&xs);
            MetricStat {
                name: name.clone(),
                mean,
                stderr,
                n: xs.len(),
            }
        })
        .collect()
}

/// Looks up an aggregated metric by name.
pub fn stat<'a>(agg: &'a [MetricStat], name: &str) -> Option<&'a MetricStat> {
    agg.iter().find(|s| s.name == name)
}

/// Pools the profit summaries of several runs per slice type.
pub fn pooled_profit(runs: &[RunMetrics]) -> Vec<ProfitSummary> {
    let n = runs.first().map_or(0, RunMetrics::type_count);
    let mut acc = vec![ProfitSummary::from_profits([]); n];
    for r in runs {
        for (a, p) in acc.iter_mut().zip(r.profit_summary()) {
            *a = a.merge(&p);
        }
    }
    acc
}

/// Checks the resource-safety invariant of a run.
pub fn within_capacity(scenario: &Scenario, metrics: &RunMetrics) -> Result<bool> {
    Ok(metrics
        .max_resource_use
        .iter()
        .zip(scenario.resources.values())
        .all(|(used, cap)| *used <= cap + crate::scenario::FEASIBILITY_SLACK))
}
