//! Evaluation campaigns on the reference scenario: profit by knowledge
//! regime, inter-acceptance fits, reneging-time fits and strategy search.
//!
//! Campaign sizes are given at full scale; [`scaled`] shrinks strategy and
//! repetition counts without touching rates, horizons or the scenario.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::region::RegionIndex;
use crate::scenario::Scenario;
use crate::search::{search_strategy, strategy_search, AnalyticConfig, Evaluator, Objective, SearchConfig, SearchReport};
use crate::sim::{replication_seed, run_monte_carlo, run_replication, Discipline, InitialState, SimConfig};
use crate::stats::{fit_exponential, FitResult, ProfitSummary};
use crate::strategy::{naive_strategy, PreferenceVector, Strategy};
use crate::tenant::KnowledgeRegime;

/// Per-queue length limit used by every campaign.
pub const QUEUE_CAP: usize = 100;
pub const PROFIT_STRATEGIES: usize = 1000;
pub const PROFIT_HORIZON: f64 = 1000.0;
pub const IAT_STRATEGIES: usize = 1000;
pub const RENEGE_STRATEGIES: usize = 1000;
pub const RENEGE_REPEATS: usize = 1000;
pub const SEARCH_STRATEGIES: usize = 10_000;
/// Monte-Carlo rounds per strategy in the short-horizon campaigns.
pub const ROUNDS: usize = 25;
pub const ROUND_PERIODS: f64 = 40.0;

/// `max(1, round(base * scale))` for `scale` in `(0, 1]`.
pub fn scaled(base: usize, scale: f64) -> Result<usize> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(invalid(format!("scale must lie in (0, 1], got {scale}")));
    }
    Ok(((base as f64 * scale).round() as usize).max(1))
}

/// A named knowledge regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCase {
    pub label: String,
    pub regime: KnowledgeRegime,
}

/// The patient benchmark followed by the seven knowledge regimes.
pub fn profit_cases() -> Vec<RegimeCase> {
    let case = |label: &str, regime| RegimeCase {
        label: label.to_string(),
        regime,
    };
    vec![
        case("patient", KnowledgeRegime::Patient),
        case("blind_1", KnowledgeRegime::Blind { risk_factor: 1.0 }),
        case("blind_0.1", KnowledgeRegime::Blind { risk_factor: 0.1 }),
        case("blind_0.01", KnowledgeRegime::Blind { risk_factor: 0.01 }),
        case("position_dk2", KnowledgeRegime::PositionOnly { delta_k: 2 }),
        case("avg_wait", KnowledgeRegime::AvgWait),
        case("serving_rate", KnowledgeRegime::ServingRate),
        case("full", KnowledgeRegime::Full),
    ]
}

/// Profits of one strategy under one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitRun {
    pub case: String,
    pub strategy: usize,
    pub seed: u64,
    pub per_type: Vec<ProfitSummary>,
}

/// One line of the profit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitRow {
    pub case: String,
    pub runs: usize,
    /// Total profit per run, averaged over runs.
    pub total_profit: Vec<f64>,
    /// Mean end-profit over all issued requests of the type.
    pub mean_profit: Vec<f64>,
    pub profiting_chance: Vec<f64>,
    /// Mean end-profit over all issued requests of every type.
    pub overall_mean_profit: f64,
    /// Total profit of every type per run, averaged over runs.
    pub overall_total_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitTable {
    pub rows: Vec<ProfitRow>,
    pub runs: Vec<ProfitRun>,
}

impl ProfitTable {
    pub fn row(&self, case: &str) -> Option<&ProfitRow> {
        self.rows.iter().find(|r| r.case == case)
    }
}

fn profit_config(regime: KnowledgeRegime, seed: u64) -> SimConfig {
    SimConfig {
        horizon: PROFIT_HORIZON,
        seed,
        replications: 1,
        queue_cap: Some(QUEUE_CAP),
        regime,
        initial: InitialState::Empty,
        warmup_fraction: 0.0,
        trace: false,
    }
}

/// Tenant profits under every regime of [`profit_cases`].
///
/// Strategy `i` is a random reserve-last strategy; all regimes replay it with
/// the same seed, so regimes differ only in tenant behaviour.
pub fn profit_table(scenario: &Scenario, region: &RegionIndex, n_strategies: usize, seed: u64) -> Result<ProfitTable> {
    let cases = profit_cases();
    let jobs: Vec<(usize, usize)> = (0..n_strategies)
        .flat_map(|i| (0..cases.len()).map(move |c| (i, c)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(i, c)| {
            let strategy = search_strategy(region, seed, i as u64, true);
            let run_seed = replication_seed(seed, i as u64);
            let cfg = profit_config(cases[c].regime, run_seed);
            let m = run_replication(scenario, region, Discipline::Strategy(&strategy), &cfg, run_seed)?;
            Ok(ProfitRun {
                case: cases[c].label.clone(),
                strategy: i,
                seed: run_seed,
                per_type: m.profit_summary(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_types = scenario.type_count();
    let rows = cases
        .iter()
        .map(|case| {
            let mine: Vec<&ProfitRun> = runs.iter().filter(|r| r.case == case.label).collect();
            let count = mine.len().max(1) as f64;
            let mut pooled = vec![ProfitSummary::from_profits([]); n_types];
            for r in &mine {
                for (p, s) in pooled.iter_mut().zip(&r.per_type) {
                    *p = p.merge(s);
                }
            }
            let all = pooled.iter().fold(ProfitSummary::from_profits([]), |a, p| a.merge(p));
            ProfitRow {
                case: case.label.clone(),
                runs: mine.len(),
                total_profit: pooled.iter().map(|p| p.total_profit / count).collect(),
                mean_profit: pooled.iter().map(|p| p.mean_profit).collect(),
                profiting_chance: pooled.iter().map(|p| p.profiting_chance).collect(),
                overall_mean_profit: all.mean_profit,
                overall_total_profit: all.total_profit / count,
            }
        })
        .collect();
    Ok(ProfitTable { rows, runs })
}

fn round_config(regime: KnowledgeRegime, initial: InitialState, seed: u64, rounds: usize) -> SimConfig {
    SimConfig {
        horizon: ROUND_PERIODS,
        seed,
        replications: rounds,
        queue_cap: Some(QUEUE_CAP),
        regime,
        initial,
        warmup_fraction: 0.0,
        trace: false,
    }
}

/// Geometric fit of one queue's inter-acceptance times in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IatRecord {
    pub regime: String,
    pub strategy: usize,
    pub round: usize,
    /// One-based slice type.
    pub slice_type: usize,
    pub acceptances: usize,
    /// `None` with fewer than two acceptances.
    pub fit: Option<FitResult>,
}

impl IatRecord {
    pub fn is_success(&self) -> bool {
        self.fit.as_ref().is_some_and(FitResult::is_success)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IatSummary {
    pub regime: String,
    pub records: usize,
    /// Records with at least two acceptances, the denominator of the success rate.
    pub fitted: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub degenerate: usize,
}

pub fn summarize_iat(regime: &str, records: &[IatRecord]) -> IatSummary {
    let mine: Vec<&IatRecord> = records.iter().filter(|r| r.regime == regime).collect();
    let fitted = mine.iter().filter(|r| r.fit.is_some()).count();
    let successes = mine.iter().filter(|r| r.is_success()).count();
    let degenerate = mine.iter().filter(|r| r.fit.as_ref().is_some_and(|f| f.degenerate)).count();
    IatSummary {
        regime: regime.to_string(),
        records: mine.len(),
        fitted,
        successes,
        success_rate: if fitted > 0 { successes as f64 / fitted as f64 } else { 0.0 },
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IatCampaign {
    pub records: Vec<IatRecord>,
    pub summaries: Vec<IatSummary>,
}

/// Inter-acceptance fits for patient and fully informed tenants.
///
/// Every round starts from a random state with no room left and runs for
/// [`ROUND_PERIODS`].
pub fn iat_campaign(
    scenario: &Scenario,
    region: &RegionIndex,
    n_strategies: usize,
    rounds: usize,
    seed: u64,
) -> Result<IatCampaign> {
    let regimes = [("patient", KnowledgeRegime::Patient), ("full", KnowledgeRegime::Full)];
    let per_strategy = (0..n_strategies)
        .into_par_iter()
        .map(|i| {
            let strategy = search_strategy(region, seed, i as u64, true);
            let mut out = Vec::new();
            for (label, regime) in regimes {
                let cfg = round_config(regime, InitialState::RandomFull, replication_seed(seed, i as u64), rounds);
                let mc = run_monte_carlo(scenario, region, Discipline::Strategy(&strategy), &cfg)?;
                for (round, run) in mc.runs.iter().enumerate() {
                    for n in 0..scenario.type_count() {
                        out.push(IatRecord {
                            regime: label.to_string(),
                            strategy: i,
                            round,
                            slice_type: n + 1,
                            acceptances: run.acceptance_times[n].len(),
                            fit: run.iat_fit(n),
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<IatRecord> = per_strategy.into_iter().flatten().collect();
    let summaries = regimes.iter().map(|(l, _)| summarize_iat(l, &records)).collect();
    Ok(IatCampaign { records, summaries })
}

/// Wait of one reneged request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegeSample {
    pub campaign: String,
    pub repeat: usize,
    /// One-based slice type.
    pub slice_type: usize,
    pub wait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegeFit {
    pub campaign: String,
    /// One-based slice type; `None` pools all types.
    pub slice_type: Option<usize>,
    pub samples: usize,
    /// `None` without samples.
    pub fit: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenegeCampaign {
    pub samples: Vec<RenegeSample>,
    pub fits: Vec<RenegeFit>,
}

impl RenegeCampaign {
    pub fn fit(&self, campaign: &str, slice_type: Option<usize>) -> Option<&FitResult> {
        self.fits
            .iter()
            .find(|f| f.campaign == campaign && f.slice_type == slice_type)
            .and_then(|f| f.fit.as_ref())
    }
}

fn renege_samples(
    scenario: &Scenario,
    region: &RegionIndex,
    strategy: &Strategy,
    campaign: &str,
    repeat: usize,
    seed: u64,
    rounds: usize,
) -> Result<Vec<RenegeSample>> {
    let cfg = round_config(KnowledgeRegime::Full, InitialState::RandomFull, seed, rounds);
    let mc = run_monte_carlo(scenario, region, Discipline::Strategy(strategy), &cfg)?;
    let mut out = Vec::new();
    for run in &mc.runs {
        for (n, waits) in run.renege_waits.iter().enumerate() {
            out.extend(waits.iter().map(|&wait| RenegeSample {
                campaign: campaign.to_string(),
                repeat,
                slice_type: n + 1,
                wait,
            }));
        }
    }
    Ok(out)
}

fn exp_fit(campaign: &str, slice_type: Option<usize>, waits: Vec<f64>) -> RenegeFit {
    let positive: Vec<f64> = waits.into_iter().filter(|w| *w > 0.0).collect();
    RenegeFit {
        campaign: campaign.to_string(),
        slice_type,
        samples: positive.len(),
        fit: fit_exponential(&positive).ok(),
    }
}

/// Reneging times of fully informed tenants under random strategies and under
/// the fixed strategy that always prefers the last slice type.
pub fn renege_campaign(
    scenario: &Scenario,
    region: &RegionIndex,
    n_random: usize,
    n_fixed: usize,
    rounds: usize,
    seed: u64,
) -> Result<RenegeCampaign> {
    let n = scenario.type_count();
    let fixed = naive_strategy(region, &PreferenceVector::prefer(n as u16, n)?)?;
    let fixed_label = format!("prefer_{n}");
    let fixed_master = replication_seed(seed, u64::MAX);
    let random = (0..n_random)
        .into_par_iter()
        .map(|i| {
            let s = search_strategy(region, seed, i as u64, true);
            renege_samples(scenario, region, &s, "random", i, replication_seed(seed, i as u64), rounds)
        })
        .collect::<Result<Vec<_>>>()?;
    let fixed_runs = (0..n_fixed)
        .into_par_iter()
        .map(|j| {
            let run_seed = replication_seed(fixed_master, j as u64);
            renege_samples(scenario, region, &fixed, &fixed_label, j, run_seed, rounds)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<RenegeSample> = random.into_iter().chain(fixed_runs).flatten().collect();
    let mut fits = Vec::new();
    for campaign in ["random", fixed_label.as_str()] {
        let of = |t: Option<usize>| {
            samples
                .iter()
                .filter(|s| s.campaign == campaign && t.is_none_or(|t| s.slice_type == t))
                .map(|s| s.wait)
                .collect::<Vec<_>>()
        };
        fits.push(exp_fit(campaign, None, of(None)));
        for t in 1..=n {
            fits.push(exp_fit(campaign, Some(t), of(Some(t))));
        }
    }
    Ok(RenegeCampaign { samples, fits })
}

/// Search settings of the strategy campaign: fully informed tenants, random
/// starting states, [`ROUNDS`] rounds of [`ROUND_PERIODS`] per strategy.
pub fn search_campaign_config(n_strategies: usize, seed: u64) -> SearchConfig {
    SearchConfig {
        n_strategies,
        reserve_last: true,
        evaluator: Evaluator::Simulation,
        objective: Objective::Utility,
        sim: round_config(KnowledgeRegime::Full, InitialState::RandomFeasible, seed, ROUNDS),
        analytic: AnalyticConfig::default(),
    }
}

pub fn search_campaign(scenario: &Scenario, region: &RegionIndex, n_strategies: usize, seed: u64) -> Result<SearchReport> {
    strategy_search(scenario, region, &search_campaign_config(n_strategies, seed))
}
