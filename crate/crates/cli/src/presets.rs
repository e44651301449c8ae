use clap::{Args, ValueEnum};
use serde_json::json;

use mqsac::experiments::{
    iat_campaign, profit_table, renege_campaign, scaled, search_campaign, IAT_STRATEGIES, PROFIT_HORIZON,
    PROFIT_STRATEGIES, QUEUE_CAP, RENEGE_REPEATS, RENEGE_STRATEGIES, ROUNDS, ROUND_PERIODS, SEARCH_STRATEGIES,
};
use mqsac::search::Objective;
use mqsac::strategy::StrategyFile;
use mqsac::{enumerate_regions, Scenario};

use crate::commands::{load_scenario, search_rows, SEARCH_HEADER};
use crate::output::{self, num, opt, FileEntry, Manifest};
use crate::GlobalArgs;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
#[value(rename_all = "snake_case")]
pub enum PresetName {
    /// Tenant profits per knowledge regime.
    Table3,
    /// Geometric fits of inter-acceptance times.
    Fig4Iat,
    /// Exponential fits of reneging times.
    Fig5Reneging,
    /// Random strategy search against the benchmarks.
    Fig6Search,
    /// Feasible and admissible states.
    Regions,
}

impl PresetName {
    fn name(&self) -> &'static str {
        match self {
            Self::Table3 => "table3",
            Self::Fig4Iat => "fig4_iat",
            Self::Fig5Reneging => "fig5_reneging",
            Self::Fig6Search => "fig6_search",
            Self::Regions => "regions",
        }
    }
}

#[derive(Args, Debug)]
pub struct PresetArgs {
    #[arg(value_enum)]
    pub name: PresetName,
    #[arg(long, default_value = "reference")]
    pub scenario: String,
}

pub fn preset(g: &GlobalArgs, a: &PresetArgs) -> anyhow::Result<()> {
    let scenario = load_scenario(&a.scenario)?;
    // Validate the scale before touching the file system.
    scaled(1, g.scale)?;
    let dir = g
        .out
        .clone()
        .unwrap_or_else(|| format!("{}-seed{}", a.name.name(), g.seed).into());
    output::prepare_dir(&dir, g.force)?;
    let reproduce = format!(
        "mqsac preset {} --scenario {} --seed {} --scale {}",
        a.name.name(),
        a.scenario,
        g.seed,
        g.scale
    );
    let mut manifest = Manifest::new(a.name.name(), reproduce, g.seed, g.scale, scenario.fingerprint());
    let (parameters, files) = match a.name {
        PresetName::Table3 => table3(&scenario, g, &dir)?,
        PresetName::Fig4Iat => fig4(&scenario, g, &dir)?,
        PresetName::Fig5Reneging => fig5(&scenario, g, &dir)?,
        PresetName::Fig6Search => fig6(&scenario, g, &dir)?,
        PresetName::Regions => regions(&scenario, &dir)?,
    };
    manifest.parameters = parameters;
    manifest.files = files;
    output::write_manifest(&dir, &manifest)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

type PresetOutput = (serde_json::Value, Vec<FileEntry>);

fn per_type_header(n_types: usize, fields: &[&str]) -> Vec<String> {
    fields
        .iter()
        .flat_map(|f| (1..=n_types).map(move |t| format!("{f}_{t}")))
        .collect()
}

fn table3(scenario: &Scenario, g: &GlobalArgs, dir: &std::path::Path) -> anyhow::Result<PresetOutput> {
    let region = enumerate_regions(scenario)?;
    let n = scaled(PROFIT_STRATEGIES, g.scale)?;
    let table = profit_table(scenario, &region, n, g.seed)?;
    let k = scenario.type_count();

    let mut header = vec!["case".to_string(), "runs".to_string()];
    header.extend(per_type_header(k, &["total_profit", "mean_profit", "profiting_chance"]));
    header.extend(["overall_total_profit".to_string(), "overall_mean_profit".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.case.clone(), r.runs.to_string()];
            for v in [&r.total_profit, &r.mean_profit, &r.profiting_chance] {
                row.extend(v.iter().copied().map(num));
            }
            row.extend([num(r.overall_total_profit), num(r.overall_mean_profit)]);
            row
        })
        .collect();

    let mut run_header = vec!["case".to_string(), "strategy".to_string(), "seed".to_string()];
    run_header.extend(per_type_header(k, &["issued", "total_profit", "mean_profit", "profiting_chance"]));
    let run_header: Vec<&str> = run_header.iter().map(String::as_str).collect();
    let mut runs = table.runs.clone();
    runs.sort_by(|a, b| a.case.cmp(&b.case).then(a.strategy.cmp(&b.strategy)));
    let run_rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let mut row = vec![r.case.clone(), r.strategy.to_string(), r.seed.to_string()];
            row.extend(r.per_type.iter().map(|p| p.issued.to_string()));
            row.extend(r.per_type.iter().map(|p| num(p.total_profit)));
            row.extend(r.per_type.iter().map(|p| num(p.mean_profit)));
            row.extend(r.per_type.iter().map(|p| num(p.profiting_chance)));
            row
        })
        .collect();
    let files = vec![
        output::write_csv(dir, "table3.csv", &header, &rows)?,
        output::write_csv(dir, "table3_runs.csv", &run_header, &run_rows)?,
    ];
    let params = json!({
        "strategies": n,
        "horizon": PROFIT_HORIZON,
        "queue_cap": QUEUE_CAP,
        "initial": "empty",
        "reserve_last": true,
    });
    Ok((params, files))
}

fn fig4(scenario: &Scenario, g: &GlobalArgs, dir: &std::path::Path) -> anyhow::Result<PresetOutput> {
    let region = enumerate_regions(scenario)?;
    let n = scaled(IAT_STRATEGIES, g.scale)?;
    let c = iat_campaign(scenario, &region, n, ROUNDS, g.seed)?;
    let header = [
        "regime",
        "strategy",
        "round",
        "slice_type",
        "acceptances",
        "samples",
        "p_hat",
        "kld",
        "converged",
        "degenerate",
        "success",
    ];
    let rows: Vec<Vec<String>> = c
        .records
        .iter()
        .map(|r| {
            let f = r.fit.as_ref();
            vec![
                r.regime.clone(),
                r.strategy.to_string(),
                r.round.to_string(),
                r.slice_type.to_string(),
                r.acceptances.to_string(),
                f.map(|f| f.n.to_string()).unwrap_or_default(),
                opt(f.map(|f| f.estimate)),
                opt(f.and_then(|f| f.kld)),
                f.map(|f| f.converged.to_string()).unwrap_or_default(),
                f.map(|f| f.degenerate.to_string()).unwrap_or_default(),
                r.is_success().to_string(),
            ]
        })
        .collect();
    let summary_header = ["regime", "records", "fitted", "successes", "success_rate", "degenerate"];
    let summary: Vec<Vec<String>> = c
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.regime.clone(),
                s.records.to_string(),
                s.fitted.to_string(),
                s.successes.to_string(),
                num(s.success_rate),
                s.degenerate.to_string(),
            ]
        })
        .collect();
    let files = vec![
        output::write_csv(dir, "iat_fits.csv", &header, &rows)?,
        output::write_csv(dir, "iat_summary.csv", &summary_header, &summary)?,
    ];
    let params = json!({
        "strategies": n,
        "rounds": ROUNDS,
        "round_periods": ROUND_PERIODS,
        "queue_cap": QUEUE_CAP,
        "initial": "random_full",
        "regimes": ["patient", "full"],
    });
    Ok((params, files))
}

fn fig5(scenario: &Scenario, g: &GlobalArgs, dir: &std::path::Path) -> anyhow::Result<PresetOutput> {
    let region = enumerate_regions(scenario)?;
    let n_random = scaled(RENEGE_STRATEGIES, g.scale)?;
    let n_fixed = scaled(RENEGE_REPEATS, g.scale)?;
    let c = renege_campaign(scenario, &region, n_random, n_fixed, ROUNDS, g.seed)?;
    let header = ["campaign", "repeat", "slice_type", "wait"];
    let rows: Vec<Vec<String>> = c
        .samples
        .iter()
        .map(|s| vec![s.campaign.clone(), s.repeat.to_string(), s.slice_type.to_string(), num(s.wait)])
        .collect();
    let fit_header = ["campaign", "slice_type", "samples", "rate", "log_likelihood", "tail_ratio", "fat_tailed"];
    let fit_rows: Vec<Vec<String>> = c
        .fits
        .iter()
        .map(|f| {
            let r = f.fit.as_ref();
            vec![
                f.campaign.clone(),
                f.slice_type.map_or_else(|| "all".to_string(), |t| t.to_string()),
                f.samples.to_string(),
                opt(r.map(|r| r.estimate)),
                opt(r.map(|r| r.log_likelihood)),
                opt(r.and_then(|r| r.tail_ratio)),
                r.map(|r| r.is_fat_tailed().to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let files = vec![
        output::write_csv(dir, "reneging_times.csv", &header, &rows)?,
        output::write_csv(dir, "reneging_fits.csv", &fit_header, &fit_rows)?,
    ];
    let params = json!({
        "random_strategies": n_random,
        "fixed_repeats": n_fixed,
        "fixed_strategy": format!("prefer_{}", scenario.type_count()),
        "rounds": ROUNDS,
        "round_periods": ROUND_PERIODS,
        "queue_cap": QUEUE_CAP,
        "knowledge": "full",
        "initial": "random_full",
    });
    Ok((params, files))
}

fn fig6(scenario: &Scenario, g: &GlobalArgs, dir: &std::path::Path) -> anyhow::Result<PresetOutput> {
    let region = enumerate_regions(scenario)?;
    let n = scaled(SEARCH_STRATEGIES, g.scale)?;
    let report = search_campaign(scenario, &region, n, g.seed)?;
    let rows = search_rows(&report, Objective::Utility);
    let mut files = vec![output::write_csv(dir, "search.csv", &SEARCH_HEADER, &rows)?];
    if let Some(best) = &report.best {
        files.push(output::write_json(dir, "best_strategy.json", &StrategyFile::from_strategy(scenario, best))?);
    }
    let params = json!({
        "strategies": n,
        "rounds": ROUNDS,
        "round_periods": ROUND_PERIODS,
        "queue_cap": QUEUE_CAP,
        "knowledge": "full",
        "initial": "random_feasible",
        "objective": "utility",
        "reserve_last": true,
    });
    Ok((params, files))
}

fn regions(scenario: &Scenario, dir: &std::path::Path) -> anyhow::Result<PresetOutput> {
    let region = enumerate_regions(scenario)?;
    let k = scenario.type_count();
    let mut header = vec!["index".to_string()];
    header.extend((1..=k).map(|t| format!("s_{t}")));
    header.push("admissible".to_string());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = region
        .feasible()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![i.to_string()];
            row.extend(s.counts().iter().map(u32::to_string));
            row.push(region.is_admissible_index(i).to_string());
            row
        })
        .collect();
    let files = vec![output::write_csv(dir, "states.csv", &header, &rows)?];
    let params = json!({
        "feasible": region.feasible_len(),
        "admissible": region.admissible_len(),
    });
    Ok((params, files))
}
