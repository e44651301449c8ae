use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use mqsac::markov::{build_transition_matrix, estimate_acceptance_rates, long_run_distribution, StateDistribution};
use mqsac::queueing::{impatient_pmf, join_accept_probs_per_arrival, wait_densities, QueueParams, TruncationConfig};
use mqsac::search::{
    analytic_evaluation, bootstrap_service_rates, strategy_search, AnalyticConfig, Evaluator, Objective, SearchConfig,
    SearchReport, SearchRow, ANALYTIC_LABEL,
};
use mqsac::sim::{run_monte_carlo, Discipline, SimConfig};
use mqsac::stats::{fit_exponential, fit_geometric};
use mqsac::strategy::{naive_strategy, random_strategy, StrategyFile};
use mqsac::tenant::KnowledgeRegime;
use mqsac::{enumerate_regions, PreferenceVector, RegionIndex, Scenario, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::output::{self, num, opt, Manifest};
use crate::{GlobalArgs, InitialArg};

/// `reference`, `case-study` or a path to a scenario JSON file.
pub fn load_scenario(spec: &str) -> anyhow::Result<Scenario> {
    Ok(match spec {
        "reference" => Scenario::reference(),
        "case-study" => Scenario::case_study(),
        path => Scenario::load(path).with_context(|| format!("loading scenario {path}"))?,
    })
}

/// `naive:1,2,0`, `random`, `random:any` or a strategy file.
pub fn load_strategy(spec: &str, scenario: &Scenario, region: &RegionIndex, seed: u64) -> anyhow::Result<Strategy> {
    if let Some(order) = spec.strip_prefix("naive:") {
        return Ok(naive_strategy(region, &order.parse::<PreferenceVector>()?)?);
    }
    match spec {
        "random" | "random:any" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(random_strategy(region, &mut rng, spec == "random"))
        }
        path => Ok(StrategyFile::load(path)
            .with_context(|| format!("loading strategy {path}"))?
            .into_strategy(scenario, region)?),
    }
}

#[derive(Args, Debug, Clone)]
pub struct KnowledgeArgs {
    /// patient, blind, position, avg_wait, serving_rate or full.
    #[arg(long, default_value = "patient")]
    pub knowledge: String,
    /// Risk factor of blind tenants.
    #[arg(long)]
    pub risk_factor: Option<f64>,
    /// Position threshold of position-only tenants.
    #[arg(long)]
    pub delta_k: Option<usize>,
}

impl KnowledgeArgs {
    pub fn regime(&self) -> anyhow::Result<KnowledgeRegime> {
        Ok(KnowledgeRegime::parse(&self.knowledge, self.risk_factor, self.delta_k)?)
    }
}

#[derive(Args, Debug)]
pub struct RegionsArgs {
    #[arg(long, default_value = "reference")]
    pub scenario: String,
    /// List every feasible state.
    #[arg(long)]
    pub dump: bool,
}

pub fn regions(_g: &GlobalArgs, a: &RegionsArgs) -> anyhow::Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let region = enumerate_regions(&scenario)?;
    let mut report = json!({
        "scenario_fingerprint": scenario.fingerprint(),
        "feasible": region.feasible_len(),
        "admissible": region.admissible_len(),
        "boundary": region.feasible_len() - region.admissible_len(),
    });
    if a.dump {
        let states: Vec<_> = region
            .feasible()
            .iter()
            .enumerate()
            .map(|(i, s)| json!({"index": i, "state": s.counts(), "admissible": region.is_admissible_index(i)}))
            .collect();
        report["states"] = states.into();
    }
    output::emit_json(&report)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    /// Reneging rate.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Balking exponent.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Number of leading PMF entries to print.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
}

pub fn analyze(_g: &GlobalArgs, a: &AnalyzeArgs) -> anyhow::Result<()> {
    let params = QueueParams::new(a.lambda, a.mu, a.alpha, a.beta)?;
    let cfg = TruncationConfig::default();
    let pmf = impatient_pmf(&params, &cfg)?;
    let ja = join_accept_probs_per_arrival(&params, &cfg)?;
    let joined = params.arrival_rate * ja.p_join;
    let mean_wait = if joined > 0.0 { pmf.mean() / joined } else { 0.0 };
    let (w_a, w_r) = if params.reneging_rate > 0.0 {
        let d = wait_densities(&params, &cfg)?;
        (d.mean_accepted, (ja.p_accept_given_join < 1.0).then_some(d.mean_reneged))
    } else {
        (mean_wait, None)
    };
    let head: Vec<f64> = (0..a.k).map(|l| pmf.p(l)).collect();
    let report = json!({
        "params": params,
        "pmf": head,
        "mean_length": pmf.mean(),
        "p_join": ja.p_join,
        "p_accept": ja.p_accept,
        "p_accept_given_join": ja.p_accept_given_join,
        "mean_wait_accepted": w_a,
        "mean_wait_reneged": w_r,
        "mean_wait": mean_wait,
        "degenerate": ja.degenerate,
    });
    output::emit_json(&report)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value = "reference")]
    pub scenario: String,
    /// `naive:1,2,0`, `random`, `random:any`, `greedy` or a strategy file.
    #[arg(long, default_value = "random")]
    pub strategy: String,
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
    #[command(flatten)]
    pub knowledge: KnowledgeArgs,
    /// Per-queue length limit; 0 disables it.
    #[arg(long, default_value_t = 100)]
    pub queue_cap: usize,
    #[arg(long, value_enum, default_value_t = InitialArg::Empty)]
    pub initial: InitialArg,
    /// Fraction of the horizon excluded from time averages.
    #[arg(long, default_value_t = 0.0)]
    pub warmup: f64,
    /// Also write the full event log.
    #[arg(long)]
    pub trace: bool,
}

const REQUEST_HEADER: [&str; 8] = [
    "replication",
    "id",
    "slice_type",
    "arrival_time",
    "lifetime",
    "outcome",
    "wait",
    "end_profit",
];

pub fn simulate(g: &GlobalArgs, a: &SimulateArgs) -> anyhow::Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let region = enumerate_regions(&scenario)?;
    let config = SimConfig {
        horizon: a.horizon,
        seed: g.seed,
        replications: a.replications,
        queue_cap: (a.queue_cap > 0).then_some(a.queue_cap),
        regime: a.knowledge.regime()?,
        initial: a.initial.into(),
        warmup_fraction: a.warmup,
        trace: a.trace,
    };
    let strategy;
    let discipline = if a.strategy == "greedy" {
        Discipline::GreedySingleQueue
    } else {
        strategy = load_strategy(&a.strategy, &scenario, &region, g.seed)?;
        Discipline::Strategy(&strategy)
    };
    let mc = run_monte_carlo(&scenario, &region, discipline, &config)?;
    if let Some(dir) = &g.out {
        output::prepare_dir(dir, g.force)?;
        let names: Vec<String> = mc.runs[0].summary_row().into_iter().map(|(n, _)| n).collect();
        let mut header = vec!["replication", "seed"];
        header.extend(names.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = mc
            .runs
            .iter()
            .enumerate()
            .map(|(r, m)| {
                let mut row = vec![r.to_string(), m.seed.to_string()];
                row.extend(m.summary_row().into_iter().map(|(_, v)| num(v)));
                row
            })
            .collect();
        let mut manifest = Manifest::new(
            "simulate",
            std::env::args().collect::<Vec<_>>().join(" "),
            g.seed,
            1.0,
            scenario.fingerprint(),
        );
        manifest.parameters = json!({"config": config, "strategy": a.strategy});
        manifest.files.push(output::write_csv(dir, "metrics.csv", &header, &rows)?);
        let requests: Vec<Vec<String>> = mc
            .runs
            .iter()
            .enumerate()
            .flat_map(|(r, m)| {
                m.requests.iter().map(move |q| {
                    vec![
                        r.to_string(),
                        q.id.to_string(),
                        (q.slice_type + 1).to_string(),
                        num(q.arrival_time),
                        num(q.lifetime),
                        q.outcome.name().to_string(),
                        opt(q.wait),
                        opt(q.end_profit),
                    ]
                })
            })
            .collect();
        manifest.files.push(output::write_csv(dir, "requests.csv", &REQUEST_HEADER, &requests)?);
        if a.trace {
            #[derive(Serialize)]
            struct Line<'a> {
                replication: usize,
                #[serde(flatten)]
                event: &'a mqsac::controller::EventRecord,
            }
            let lines: Vec<Line> = mc
                .runs
                .iter()
                .enumerate()
                .flat_map(|(r, m)| {
                    m.events
                        .iter()
                        .flatten()
                        .map(move |event| Line { replication: r, event })
                })
                .collect();
            manifest.files.push(output::write_jsonl(dir, "events.jsonl", &lines)?);
        }
        output::write_manifest(dir, &manifest)?;
    }
    output::emit_json(&mc.aggregate)?;
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitDist {
    /// Values are floored to whole periods.
    Geometric,
    Exponential,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub column: String,
    #[arg(long, value_enum)]
    pub dist: FitDist,
    /// Keep only rows where `COLUMN=VALUE`; repeatable.
    #[arg(long = "where", value_name = "COLUMN=VALUE")]
    pub filters: Vec<String>,
}

pub fn fit(_g: &GlobalArgs, a: &FitArgs) -> anyhow::Result<()> {
    let mut reader = csv::Reader::from_path(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let headers = reader.headers()?.clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow::anyhow!("column {name:?} not found in {}", a.input.display()))
    };
    let col = index(&a.column)?;
    let filters = a
        .filters
        .iter()
        .map(|f| {
            let (c, v) = f.split_once('=').ok_or_else(|| anyhow::anyhow!("filter {f:?} is not COLUMN=VALUE"))?;
            Ok((index(c)?, v.to_string()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if filters.iter().any(|(c, v)| rec.get(*c) != Some(v.as_str())) {
            continue;
        }
        let cell = rec.get(col).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        values.push(cell.parse::<f64>().with_context(|| format!("bad number {cell:?}"))?);
    }
    let result = match a.dist {
        FitDist::Geometric => {
            if values.iter().any(|v| !(*v >= 0.0)) {
                bail!("geometric fit needs non-negative values");
            }
            fit_geometric(&values.iter().map(|v| v.floor() as u64).collect::<Vec<_>>())?
        }
        FitDist::Exponential => fit_exponential(&values)?,
    };
    let report = json!({
        "dist": format!("{:?}", a.dist).to_lowercase(),
        "fit": result,
        "success": result.is_success(),
        "fat_tailed": result.is_fat_tailed(),
    });
    output::emit_json(&report)?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct MarkovArgs {
    #[arg(long, default_value = "reference")]
    pub scenario: String,
    #[arg(long, default_value = "random")]
    pub strategy: String,
    /// Comma-separated empty-queue probabilities, or `bootstrap` to derive
    /// them from a simulated run.
    #[arg(long, default_value = "bootstrap")]
    pub empty_probs: String,
    /// Alternate service rates and occupancy to a fixed point.
    #[arg(long)]
    pub refine: bool,
    /// Most likely states to report.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Horizon of the bootstrap run.
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub knowledge: KnowledgeArgs,
}

pub fn markov(g: &GlobalArgs, a: &MarkovArgs) -> anyhow::Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let region = enumerate_regions(&scenario)?;
    let strategy = load_strategy(&a.strategy, &scenario, &region, g.seed)?;
    let cfg = AnalyticConfig {
        refine: a.refine,
        ..AnalyticConfig::default()
    };
    let top = |dist: &StateDistribution| -> Vec<serde_json::Value> {
        dist.top(a.top)
            .into_iter()
            .map(|(i, p)| json!({"state": region.index_to_state(i).counts(), "prob": p}))
            .collect()
    };
    let report = if a.empty_probs == "bootstrap" {
        let sim = SimConfig {
            horizon: a.horizon,
            seed: g.seed,
            regime: a.knowledge.regime()?,
            ..SimConfig::default()
        };
        let mu_hat = bootstrap_service_rates(&scenario, &region, &strategy, &sim)?;
        let r = analytic_evaluation(&scenario, &region, &strategy, &mu_hat, &cfg)?;
        json!({
            "label": r.label,
            "empty_probs": r.empty_probs,
            "mu_hat": r.mu_hat,
            "mu": r.mu,
            "u_sigma": r.metrics.u_sigma,
            "mean_wait": r.metrics.mean_wait,
            "admission": r.metrics.admission,
            "long_run": {"iterations": r.long_run.iterations, "top": top(&r.long_run.distribution)},
            "flags": {
                "converged": r.long_run.converged,
                "divergent_queues": r.queues.iter().map(|q| q.divergent).collect::<Vec<_>>(),
                "refine_rounds": r.rounds,
                "refine_converged": r.refine_converged,
                "empty_queues": r.metrics.empty,
            },
        })
    } else {
        let probs = a
            .empty_probs
            .split(',')
            .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad probability {t:?}")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let psi = build_transition_matrix(&strategy, &region, &probs)?;
        let init = StateDistribution::point_mass(region.feasible_len(), region.zero_index());
        let lr = long_run_distribution(&psi, &init, cfg.tol, cfg.max_iters)?;
        let eta: Vec<f64> = scenario.slice_types.iter().map(|t| t.release_rate()).collect();
        let mu = estimate_acceptance_rates(&lr.distribution, &region, &eta);
        let u_sigma: f64 = scenario
            .slice_types
            .iter()
            .zip(&mu)
            .map(|(t, m)| m * t.utility_rate() / t.release_rate())
            .sum();
        json!({
            "label": ANALYTIC_LABEL,
            "empty_probs": probs,
            "mu": mu,
            "u_sigma": u_sigma,
            "long_run": {"iterations": lr.iterations, "top": top(&lr.distribution)},
            "flags": {"converged": lr.converged},
        })
    };
    output::emit_json(&report)?;
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorArg {
    Simulation,
    Analytic,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveArg {
    Utility,
    Wait,
    Admission,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long, default_value = "reference")]
    pub scenario: String,
    /// Random strategies at full scale.
    #[arg(long, default_value_t = 100)]
    pub strategies: usize,
    /// Monte-Carlo rounds per strategy at full scale.
    #[arg(long, default_value_t = 25)]
    pub replications: usize,
    #[arg(long, default_value_t = 40.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub knowledge: KnowledgeArgs,
    #[arg(long, value_enum, default_value_t = InitialArg::RandomFeasible)]
    pub initial: InitialArg,
    #[arg(long, default_value_t = 100)]
    pub queue_cap: usize,
    #[arg(long, value_enum, default_value_t = EvaluatorArg::Simulation)]
    pub evaluator: EvaluatorArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Utility)]
    pub objective: ObjectiveArg,
    /// Let the reserve element take any position in random strategies.
    #[arg(long)]
    pub any_reserve: bool,
    /// Fixed-point refinement for the analytic evaluator.
    #[arg(long)]
    pub refine: bool,
}

pub const SEARCH_HEADER: [&str; 9] = [
    "rank",
    "strategy_id",
    "kind",
    "evaluator",
    "u_sigma",
    "mean_wait",
    "admission",
    "divergent",
    "objective",
];

/// Ranked random rows followed by the benchmark rows, which carry no rank.
pub fn search_rows(report: &SearchReport, objective: Objective) -> Vec<Vec<String>> {
    let row = |rank: String, r: &SearchRow| {
        vec![
            rank,
            r.strategy_id.clone(),
            r.kind.name().to_string(),
            r.evaluator.clone(),
            num(r.u_sigma),
            num(r.mean_wait),
            num(r.admission),
            r.divergent.to_string(),
            num(objective.value(r)),
        ]
    };
    report
        .ranked
        .iter()
        .enumerate()
        .map(|(i, r)| row((i + 1).to_string(), r))
        .chain(report.benchmarks.iter().map(|r| row(String::new(), r)))
        .collect()
}

pub fn search(g: &GlobalArgs, a: &SearchArgs) -> anyhow::Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    let region = enumerate_regions(&scenario)?;
    let objective = match a.objective {
        ObjectiveArg::Utility => Objective::Utility,
        ObjectiveArg::Wait => Objective::Wait,
        ObjectiveArg::Admission => Objective::Admission,
    };
    let config = SearchConfig {
        n_strategies: mqsac::experiments::scaled(a.strategies, g.scale)?,
        reserve_last: !a.any_reserve,
        evaluator: match a.evaluator {
            EvaluatorArg::Simulation => Evaluator::Simulation,
            EvaluatorArg::Analytic => Evaluator::Analytic,
        },
        objective,
        sim: SimConfig {
            horizon: a.horizon,
            seed: g.seed,
            replications: mqsac::experiments::scaled(a.replications, g.scale)?,
            queue_cap: (a.queue_cap > 0).then_some(a.queue_cap),
            regime: a.knowledge.regime()?,
            initial: a.initial.into(),
            warmup_fraction: 0.0,
            trace: false,
        },
        analytic: AnalyticConfig {
            refine: a.refine,
            ..AnalyticConfig::default()
        },
    };
    let report = strategy_search(&scenario, &region, &config)?;
    let bytes = output::render_csv(&SEARCH_HEADER, &search_rows(&report, objective))?;
    match &g.out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?,
        None => output::emit(&String::from_utf8(bytes)?)?,
    }
    Ok(())
}
