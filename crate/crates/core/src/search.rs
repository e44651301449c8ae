//! Strategy evaluation and random strategy search.
//!
//! A strategy is scored either by Monte-Carlo simulation or by the analytic
//! pipeline: per-queue service rates feed the impatient queue model, whose
//! empty-queue probabilities drive the embedded state chain, whose long-run
//! occupancy yields acceptance rates through flow balance.

use std::cmp::Ordering;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{
    build_transition_matrix, estimate_acceptance_rates, long_run_distribution, utility_metrics, LongRun,
    QueueSummary, StateDistribution, UtilityMetrics,
};
use crate::queueing::{impatient_pmf, join_accept_probs_per_arrival, QueueParams, TruncationConfig};
use crate::region::RegionIndex;
use crate::scenario::{Scenario, SliceTypeSpec};
use crate::sim::{replication_seed, run_monte_carlo, run_replication, stat, stream, Discipline, MetricStat, SimConfig};
use crate::strategy::{naive_strategy, random_strategy, PreferenceVector, Strategy};

/// Label attached to every analytic result.
pub const ANALYTIC_LABEL: &str = "embedded-chain approximation";

const STREAM_STRATEGY: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConfig {
    pub truncation: TruncationConfig,
    /// Queue length assumed for a queue whose model diverges.
    pub queue_cap: usize,
    /// Alternate service rates and chain occupancy until they agree.
    pub refine: bool,
    pub max_rounds: usize,
    /// Weight of the new estimate in each refinement round.
    pub damping: f64,
    /// L1 tolerance of the long-run power iteration.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self {
            truncation: TruncationConfig::default(),
            queue_cap: 100,
            refine: false,
            max_rounds: 20,
            damping: 0.5,
            tol: 1e-10,
            max_iters: 200_000,
        }
    }
}

/// Steady-state model of one queue at a given service rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueModel {
    pub p_empty: f64,
    pub mean_length: f64,
    pub mean_wait: f64,
    pub p_accept: f64,
    /// The queue model has no steady state; capped fallback values are reported.
    pub divergent: bool,
}

/// Queue model for `spec` served at rate `mu`.
///
/// A queue without a steady state is reported as never empty, holding
/// `cap` requests, admitting a fraction `min(1, mu / lambda)` of arrivals.
pub fn queue_model(spec: &SliceTypeSpec, mu: f64, cap: usize, cfg: &TruncationConfig) -> Result<QueueModel> {
    let lambda = spec.arrival_rate;
    if lambda == 0.0 {
        return Ok(QueueModel {
            p_empty: 1.0,
            mean_length: 0.0,
            mean_wait: 0.0,
            p_accept: 1.0,
            divergent: false,
        });
    }
    let fallback = |mu: f64| QueueModel {
        p_empty: 0.0,
        mean_length: cap as f64,
        mean_wait: if mu > 0.0 { cap as f64 / mu } else { f64::INFINITY },
        p_accept: (mu / lambda).min(1.0),
        divergent: true,
    };
    if !(mu > 0.0) {
        return Ok(fallback(0.0));
    }
    let params = QueueParams::new(lambda, mu, spec.reneging_rate, spec.balking_exponent)?;
    let pmf = match impatient_pmf(&params, cfg) {
        Ok(pmf) => pmf,
        Err(Error::DivergentQueue { .. }) => return Ok(fallback(mu)),
        Err(e) => return Err(e),
    };
    let ja = join_accept_probs_per_arrival(&params, cfg)?;
    let mean_length = pmf.mean();
    let joined = lambda * ja.p_join;
    Ok(QueueModel {
        p_empty: pmf.p(0),
        mean_length,
        mean_wait: if joined > 0.0 { mean_length / joined } else { 0.0 },
        p_accept: ja.p_accept,
        divergent: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    /// Service rates fed to the queue models in the final round.
    pub mu_hat: Vec<f64>,
    pub empty_probs: Vec<f64>,
    pub long_run: LongRun,
    /// Acceptance rates from the long-run occupancy.
    pub mu: Vec<f64>,
    pub queues: Vec<QueueModel>,
    pub metrics: UtilityMetrics,
    pub rounds: usize,
    /// Refinement settled within the round limit; always set without refinement.
    pub refine_converged: bool,
    pub label: String,
}

impl AnalyticReport {
    pub fn any_divergent(&self) -> bool {
        self.queues.iter().any(|q| q.divergent)
    }
}

/// Per-type acceptance rates of one simulated replication, used to seed the analytic pipeline.
pub fn bootstrap_service_rates(
    scenario: &Scenario,
    region: &RegionIndex,
    strategy: &Strategy,
    config: &SimConfig,
) -> Result<Vec<f64>> {
    let run = run_replication(scenario, region, Discipline::Strategy(strategy), config, config.seed)?;
    Ok((0..scenario.type_count()).map(|n| run.acceptance_rate(n)).collect())
}

fn analytic_round(
    scenario: &Scenario,
    region: &RegionIndex,
    strategy: &Strategy,
    mu_hat: &[f64],
    cfg: &AnalyticConfig,
) -> Result<(Vec<QueueModel>, LongRun, Vec<f64>)> {
    let queues = scenario
        .slice_types
        .iter()
        .zip(mu_hat)
        .map(|(spec, &mu)| queue_model(spec, mu, cfg.queue_cap, &cfg.truncation))
        .collect::<Result<Vec<_>>>()?;
    let empty: Vec<f64> = queues.iter().map(|q| q.p_empty).collect();
    let psi = build_transition_matrix(strategy, region, &empty)?;
    let init = StateDistribution::point_mass(region.feasible_len(), region.zero_index());
    let long_run = long_run_distribution(&psi, &init, cfg.tol, cfg.max_iters)?;
    let eta: Vec<f64> = scenario.slice_types.iter().map(SliceTypeSpec::release_rate).collect();
    let mu = estimate_acceptance_rates(&long_run.distribution, region, &eta);
    Ok((queues, long_run, mu))
}

/// Evaluates `strategy` analytically starting from the service rates `mu_hat`.
pub fn analytic_evaluation(
    scenario: &Scenario,
    region: &RegionIndex,
    strategy: &Strategy,
    mu_hat: &[f64],
    cfg: &AnalyticConfig,
) -> Result<AnalyticReport> {
    if mu_hat.len() != scenario.type_count() {
        return Err(invalid("one service rate per slice type is needed"));
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(invalid("damping must lie in (0, 1]"));
    }
    let mut mu_hat = mu_hat.to_vec();
    let mut rounds = 1;
    let (mut queues, mut long_run, mut mu) = analytic_round(scenario, region, strategy, &mu_hat, cfg)?;
    let mut refine_converged = !cfg.refine;
    if cfg.refine {
        while rounds < cfg.max_rounds {
            let next: Vec<f64> = mu_hat
                .iter()
                .zip(&mu)
                .map(|(old, new)| (1.0 - cfg.damping) * old + cfg.damping * new)
                .collect();
            let change = next.iter().zip(&mu_hat).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change < 1e-9 {
                refine_converged = true;
                break;
            }
            mu_hat = next;
            (queues, long_run, mu) = analytic_round(scenario, region, strategy, &mu_hat, cfg)?;
            rounds += 1;
        }
    }
    let summaries: Vec<QueueSummary> = scenario
        .slice_types
        .iter()
        .zip(&queues)
        .zip(&mu)
        .map(|((spec, q), &acc)| QueueSummary {
            acceptance_rate: acc,
            release_rate: spec.release_rate(),
            utility_rate: spec.utility_rate(),
            mean_length: q.mean_length,
            mean_wait: q.mean_wait,
            arrival_rate: spec.arrival_rate,
            p_accept: q.p_accept,
        })
        .collect();
    let metrics = utility_metrics(&summaries)?;
    Ok(AnalyticReport {
        empty_probs: queues.iter().map(|q| q.p_empty).collect(),
        mu_hat,
        long_run,
        mu,
        queues,
        metrics,
        rounds,
        refine_converged,
        label: ANALYTIC_LABEL.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    Simulation,
    Analytic,
}

impl Evaluator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulation => "simulation",
            Self::Analytic => ANALYTIC_LABEL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize the average overall utility rate.
    Utility,
    /// Minimize the mean waiting time.
    Wait,
    /// Maximize the overall admission rate.
    Admission,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Utility => "utility",
            Self::Wait => "wait",
            Self::Admission => "admission",
        }
    }

    pub fn value(&self, row: &SearchRow) -> f64 {
        match self {
            Self::Utility => row.u_sigma,
            Self::Wait => row.mean_wait,
            Self::Admission => row.admission,
        }
    }

    /// `Less` when `a` is better than `b`.
    pub fn compare(&self, a: &SearchRow, b: &SearchRow) -> Ordering {
        let (x, y) = (self.value(a), self.value(b));
        match self {
            Self::Wait => x.total_cmp(&y),
            _ => y.total_cmp(&x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Random,
    /// The same preference vector in every admissible state.
    Naive,
    /// One mixed FIFO queue.
    Greedy,
}

impl RowKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Naive => "naive",
            Self::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub strategy_id: String,
    pub kind: RowKind,
    pub evaluator: String,
    pub u_sigma: f64,
    pub mean_wait: f64,
    pub admission: f64,
    /// Some queue model diverged (analytic rows only).
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_strategies: usize,
    /// Keep the reserve element last in every random preference vector.
    pub reserve_last: bool,
    pub evaluator: Evaluator,
    pub objective: Objective,
    /// Monte-Carlo settings; its seed is the master seed of the search.
    pub sim: SimConfig,
    pub analytic: AnalyticConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    /// Random strategies, best first.
    pub ranked: Vec<SearchRow>,
    /// Naive prefer-type strategies followed by the greedy single queue.
    pub benchmarks: Vec<SearchRow>,
    pub best: Option<Strategy>,
}

impl SearchReport {
    pub fn best_row(&self) -> Option<&SearchRow> {
        self.ranked.first()
    }

    pub fn greedy_row(&self) -> Option<&SearchRow> {
        self.benchmarks.iter().find(|r| r.kind == RowKind::Greedy)
    }
}

/// Random strategy number `i` of a search with master seed `seed`.
pub fn search_strategy(region: &RegionIndex, seed: u64, i: u64, reserve_last: bool) -> Strategy {
    let mut rng: ChaCha8Rng = stream(replication_seed(seed, i), STREAM_STRATEGY);
    random_strategy(region, &mut rng, reserve_last)
}

fn mean_of(agg: &[MetricStat], name: &str) -> f64 {
    stat(agg, name).map_or(0.0, |s| s.mean)
}

fn simulate_row(
    scenario: &Scenario,
    region: &RegionIndex,
    discipline: Discipline<'_>,
    config: &SimConfig,
    strategy_id: String,
    kind: RowKind,
) -> Result<SearchRow> {
    let mc = run_monte_carlo(scenario, region, discipline, config)?;
    Ok(SearchRow {
        strategy_id,
        kind,
        evaluator: Evaluator::Simulation.name().to_string(),
        u_sigma: mean_of(&mc.aggregate, "u_sigma"),
        mean_wait: mean_of(&mc.aggregate, "mean_wait"),
        admission: mean_of(&mc.aggregate, "admission"),
        divergent: false,
    })
}

/// Scores one strategy with the configured evaluator.
pub fn evaluate_strategy(
    scenario: &Scenario,
    region: &RegionIndex,
    strategy: &Strategy,
    config: &SearchConfig,
    strategy_id: String,
    kind: RowKind,
) -> Result<SearchRow> {
    match config.evaluator {
        Evaluator::Simulation => {
            simulate_row(scenario, region, Discipline::Strategy(strategy), &config.sim, strategy_id, kind)
        }
        Evaluator::Analytic => {
            let mu_hat = bootstrap_service_rates(scenario, region, strategy, &config.sim)?;
            let report = analytic_evaluation(scenario, region, strategy, &mu_hat, &config.analytic)?;
            Ok(SearchRow {
                strategy_id,
                kind,
                evaluator: ANALYTIC_LABEL.to_string(),
                u_sigma: report.metrics.u_sigma,
                mean_wait: report.metrics.mean_wait,
                admission: report.metrics.admission,
                divergent: report.any_divergent(),
            })
        }
    }
}

/// Scores `n_strategies` random strategies plus the benchmarks.
///
/// Every strategy is simulated with the same replication seeds, so the
/// comparison uses common random numbers. The greedy single-queue baseline
/// has no chain model and is always simulated.
pub fn strategy_search(scenario: &Scenario, region: &RegionIndex, config: &SearchConfig) -> Result<SearchReport> {
    if config.n_strategies == 0 {
        return Err(invalid("at least one strategy is needed"));
    }
    config.sim.validate()?;
    let seed = config.sim.seed;
    let mut scored = (0..config.n_strategies as u64)
        .into_par_iter()
        .map(|i| {
            let s = search_strategy(region, seed, i, config.reserve_last);
            let row = evaluate_strategy(scenario, region, &s, config, format!("random-{i}"), RowKind::Random)?;
            Ok((i, row))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|(ia, a), (ib, b)| config.objective.compare(a, b).then(ia.cmp(ib)));
    let best = scored
        .first()
        .map(|&(i, _)| search_strategy(region, seed, i, config.reserve_last));
    let ranked = scored.into_iter().map(|(_, r)| r).collect();

    let n = scenario.type_count();
    let mut benchmarks = (1..=n as u16)
        .map(|k| {
            let s = naive_strategy(region, &PreferenceVector::prefer(k, n)?)?;
            evaluate_strategy(scenario, region, &s, config, format!("prefer-{k}"), RowKind::Naive)
        })
        .collect::<Result<Vec<_>>>()?;
    benchmarks.push(simulate_row(
        scenario,
        region,
        Discipline::GreedySingleQueue,
        &config.sim,
        "greedy-single-queue".to_string(),
        RowKind::Greedy,
    )?);
    Ok(SearchReport {
        ranked,
        benchmarks,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::enumerate_regions;
    use crate::tenant::KnowledgeRegime;
    use approx::assert_abs_diff_eq;

    fn small_config(n: usize, evaluator: Evaluator) -> SearchConfig {
        SearchConfig {
            n_strategies: n,
            reserve_last: true,
            evaluator,
            objective: Objective::Utility,
            sim: SimConfig {
                horizon: 50.0,
                seed: 3,
                replications: 2,
                ..SimConfig::default()
            },
            analytic: AnalyticConfig::default(),
        }
    }

    #[test]
    fn one_strategy_comes_with_every_benchmark() {
        let sc = Scenario::case_study();
        let region = enumerate_regions(&sc).unwrap();
        let rep = strategy_search(&sc, &region, &small_config(1, Evaluator::Simulation)).unwrap();
        assert_eq!(rep.ranked.len(), 1);
        assert_eq!(rep.benchmarks.len(), 3);
        let ids: Vec<&str> = rep.benchmarks.iter().map(|r| r.strategy_id.as_str()).collect();
        assert_eq!(ids, ["prefer-1", "prefer-2", "greedy-single-queue"]);
        assert!(rep.best.is_some());
    }

    #[test]
    fn search_is_reproducible_and_ranked() {
        let sc = Scenario::case_study();
        let region = enumerate_regions(&sc).unwrap();
        let cfg = small_config(6, Evaluator::Simulation);
        let a = strategy_search(&sc, &region, &cfg).unwrap();
        let b = strategy_search(&sc, &region, &cfg).unwrap();
        assert_eq!(a, b);
        for w in a.ranked.windows(2) {
            assert!(w[0].u_sigma >= w[1].u_sigma);
        }
    }

    #[test]
    fn wait_objective_ranks_ascending() {
        let sc = Scenario::case_study();
        let region = enumerate_regions(&sc).unwrap();
        let mut cfg = small_config(5, Evaluator::Simulation);
        cfg.objective = Objective::Wait;
        let rep = strategy_search(&sc, &region, &cfg).unwrap();
        for w in rep.ranked.windows(2) {
            assert!(w[0].mean_wait <= w[1].mean_wait);
        }
    }

    #[test]
    fn analytic_rows_are_labelled() {
        let sc = Scenario::case_study();
        let region = enumerate_regions(&sc).unwrap();
        let rep = strategy_search(&sc, &region, &small_config(2, Evaluator::Analytic)).unwrap();
        assert!(rep.ranked.iter().all(|r| r.evaluator == ANALYTIC_LABEL));
        assert_eq!(rep.greedy_row().unwrap().evaluator, "simulation");
    }

    #[test]
    fn stable_queue_model_matches_mm1() {
        let mut spec = Scenario::case_study().slice_types[0].clone();
        spec.arrival_rate = 0.5;
        let q = queue_model(&spec, 1.0, 100, &TruncationConfig::default()).unwrap();
        assert!(!q.divergent);
        assert_abs_diff_eq!(q.p_empty, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(q.mean_length, 1.0, epsilon = 1e-9);
        // Queue length excludes the one being served, so W = L / lambda = 2.
        assert_abs_diff_eq!(q.mean_wait, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(q.p_accept, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn overloaded_queue_falls_back_to_cap() {
        let spec = Scenario::reference().slice_types[0].clone();
        let q = queue_model(&spec, 3.0, 100, &TruncationConfig::default()).unwrap();
        assert!(q.divergent);
        assert_eq!(q.p_empty, 0.0);
        assert_eq!(q.mean_length, 100.0);
        assert_abs_diff_eq!(q.p_accept, 0.5);
    }

    #[test]
    fn always_empty_queues_fill_the_system() {
        // Unserved-when-empty queues push the chain to the boundary under its preferred type.
        let sc = Scenario::case_study();
        let region = enumerate_regions(&sc).unwrap();
        let s = naive_strategy(&region, &PreferenceVector::prefer(2, 2).unwrap()).unwrap();
        let rep = analytic_evaluation(&sc, &region, &s, &[0.0, 0.0], &AnalyticConfig::default()).unwrap();
        assert!(rep.any_divergent());
        assert!(rep.long_run.converged);
        let top = rep.long_run.distribution.top(1)[0];
        assert_eq!(region.index_to_state(top.0).counts(), &[0, 5]);
        assert_abs_diff_eq!(top.1, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(rep.mu[1], 5.0, epsilon = 1e-6);
    }

    #[test]
    fn refinement_reaches_a_fixed_point() {
        let mut sc = Scenario::case_study();
        for t in &mut sc.slice_types {
            t.reneging_rate = 1.0;
            t.balking_exponent = 0.5;
        }
        let region = enumerate_regions(&sc).unwrap();
        let s = naive_strategy(&region, &PreferenceVector::identity(2)).unwrap();
        let cfg = AnalyticConfig {
            refine: true,
            ..AnalyticConfig::default()
        };
        let rep = analytic_evaluation(&sc, &region, &s, &[1.0, 1.0], &cfg).unwrap();
        assert!(rep.rounds <= cfg.max_rounds);
        assert!(rep.metrics.u_sigma >= 0.0);
        assert_eq!(rep.label, ANALYTIC_LABEL);
    }

    #[test]
    fn bootstrap_rates_are_non_negative() {
        let sc = Scenario::reference();
        let region = enumerate_regions(&sc).unwrap();
        let s = naive_strategy(&region, &PreferenceVector::identity(2)).unwrap();
        let cfg = SimConfig {
            horizon: 30.0,
            regime: KnowledgeRegime::Full,
            ..SimConfig::default()
        };
        let mu = bootstrap_service_rates(&sc, &region, &s, &cfg).unwrap();
        assert_eq!(mu.len(), 2);
        assert!(mu.iter().all(|m| *m >= 0.0));
    }
}
