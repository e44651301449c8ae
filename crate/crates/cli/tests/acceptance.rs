//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The lines go straight to the process stderr so they appear in the test log
//! whether or not output capture is on.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mqsac::controller::{AdmissionControl, MultiQueueController, PendingRequest};
use mqsac::experiments::{iat_campaign, profit_table, renege_campaign, search_campaign, ROUNDS};
use mqsac::queueing::{impatient_pmf, QueueParams, TruncationConfig};
use mqsac::scenario::{ResourceVector, SliceTypeSpec};
use mqsac::sim::{isolated_queue_sim, run_replication, Discipline, InitialState, SimConfig};
use mqsac::strategy::random_strategy;
use mqsac::tenant::{KnowledgeRegime, TenantRequest};
use mqsac::{enumerate_regions, RegionIndex, Scenario, Strategy, SystemState};

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance criterion {criterion}: {verdict} | {detail}");
}

fn conclude(criterion: u32, checks: &[(bool, String)], elapsed: Duration, limit: Duration) {
    let mut all = Vec::from(checks);
    all.push((elapsed <= limit, format!("runtime {:.2?} (limit {:.0?})", elapsed, limit)));
    let pass = all.iter().all(|(ok, _)| *ok);
    let detail = all
        .iter()
        .map(|(ok, d)| format!("{}{d}", if *ok { "" } else { "[x] " }))
        .collect::<Vec<_>>()
        .join("; ");
    report(criterion, pass, &detail);
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn reference() -> (Scenario, RegionIndex) {
    let sc = Scenario::reference();
    let region = enumerate_regions(&sc).unwrap();
    (sc, region)
}

#[test]
fn criterion_1_region_count() {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_mqsac"))
        .args(["regions", "--scenario", "reference"])
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    assert!(out.status.success(), "regions failed: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let admissible = v["admissible"].as_u64().unwrap();
    conclude(
        1,
        &[(admissible == 341, format!("admissible states {admissible} (expected 341)"))],
        elapsed,
        Duration::from_secs(1),
    );
}

/// Stationary law of the truncated birth-death chain by a dense linear solve.
///
/// Births from `l` occur at `lambda delta^(l+1)`, deaths at `mu + l alpha`.
fn balance_solve(lambda: f64, mu: f64, alpha: f64, beta: f64, k: usize) -> Vec<f64> {
    let delta = (-beta / mu).exp();
    let n = k + 1;
    let mut q = DMatrix::<f64>::zeros(n, n);
    for l in 0..n {
        if l + 1 < n {
            let b = lambda * delta.powi(l as i32 + 1);
            q[(l, l + 1)] = b;
            q[(l, l)] -= b;
        }
        if l > 0 {
            let d = mu + l as f64 * alpha;
            q[(l, l - 1)] = d;
            q[(l, l)] -= d;
        }
    }
    // pi Q = 0 with the last equation replaced by normalization.
    let mut a = q.transpose();
    let mut rhs = DVector::<f64>::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let pi = a.lu().solve(&rhs).expect("non-singular balance system");
    pi.iter().copied().collect()
}

#[test]
fn criterion_2_pmf_matches_balance_equations() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for lambda in [0.5, 1.0, 2.0] {
        for mu in [0.5, 1.0, 2.0] {
            for alpha in [0.1, 1.0] {
                for beta in [0.0, 0.5, 2.0] {
                    let params = QueueParams::new(lambda, mu, alpha, beta).unwrap();
                    let pmf = impatient_pmf(&params, &TruncationConfig::default()).unwrap();
                    let oracle = balance_solve(lambda, mu, alpha, beta, 600);
                    worst = worst.max(pmf.tv_distance(&oracle));
                    points += 1;
                }
            }
        }
    }
    conclude(
        2,
        &[
            (points == 54, format!("{points} grid points (full product)")),
            (worst <= 1e-8, format!("max TV {worst:.3e} (limit 1e-8)")),
        ],
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_3_simulation_matches_pmf() {
    let start = Instant::now();
    let params = QueueParams::new(1.0, 1.0, 1.0, 0.5).unwrap();
    let sim = isolated_queue_sim(&params, 700_000.0, 31).unwrap();
    let pmf = impatient_pmf(&params, &TruncationConfig::default()).unwrap();
    let tv = pmf.tv_distance(&sim.occupancy_pmf());

    // Without balking p(l) is proportional to 1/(l+1)!, so p(0) = 1/(e-1).
    let plain = QueueParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
    let sim0 = isolated_queue_sim(&plain, 600_000.0, 32).unwrap();
    let p0 = sim0.occupancy_pmf()[0];
    let want = 1.0 / (std::f64::consts::E - 1.0);
    conclude(
        3,
        &[
            (sim.events >= 1_000_000, format!("{} events", sim.events)),
            (tv <= 0.02, format!("TV {tv:.4} (limit 0.02)")),
            (sim0.events >= 1_000_000, format!("{} events without balking", sim0.events)),
            ((p0 - want).abs() <= 0.01, format!("p(0) {p0:.4} vs {want:.4}")),
        ],
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_4_mm1_sanity() {
    let start = Instant::now();
    let params = QueueParams::patient(0.5, 1.0).unwrap();
    let sim = isolated_queue_sim(&params, 1_100_000.0, 41).unwrap();
    let l = sim.mean_length();
    let little = sim.effective_arrival_rate() * sim.mean_wait();
    let rel = (l - little).abs() / l;
    // Geometric(1/2) on {0, 1, ...}: p(l) = 2^-(l+1).
    let occ = sim.occupancy_pmf();
    let n = occ.len().max(64);
    let tv = 0.5
        * (0..n)
            .map(|i| (occ.get(i).copied().unwrap_or(0.0) - 0.5f64.powi(i as i32 + 1)).abs())
            .sum::<f64>();
    conclude(
        4,
        &[
            (sim.events >= 1_000_000, format!("{} events", sim.events)),
            (rel <= 0.05, format!("L {l:.4} vs lambda W {little:.4} ({:.2}%)", rel * 100.0)),
            (tv <= 0.01, format!("TV to geometric {tv:.4} (limit 0.01)")),
        ],
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_5_iat_geometric_contrast() {
    let start = Instant::now();
    let (sc, region) = reference();
    let c = iat_campaign(&sc, &region, 100, ROUNDS, 0).unwrap();
    let rate = |regime: &str| c.summaries.iter().find(|s| s.regime == regime).unwrap().success_rate;
    let (patient, full) = (rate("patient"), rate("full"));
    conclude(
        5,
        &[
            (patient >= 0.95, format!("patient success {:.1}% (need >= 95%)", patient * 100.0)),
            (
                full <= patient - 0.25,
                format!("full success {:.1}% (need <= patient - 25 points)", full * 100.0),
            ),
        ],
        start.elapsed(),
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_6_knowledge_regime_ordering() {
    let start = Instant::now();
    let (sc, region) = reference();
    let seeds: Vec<u64> = (0..10).collect();
    let tables: Vec<_> = seeds.iter().map(|&s| profit_table(&sc, &region, 10, s).unwrap()).collect();
    let mean = |t: &mqsac::experiments::ProfitTable, case: &str| t.row(case).unwrap().overall_mean_profit;
    let total = |t: &mqsac::experiments::ProfitTable, case: &str| t.row(case).unwrap().overall_total_profit;
    let wins = |hi: &str, lo: &str, strict: bool| {
        tables
            .iter()
            .filter(|t| if strict { mean(t, hi) > mean(t, lo) } else { mean(t, hi) >= mean(t, lo) })
            .count()
    };
    let avg = |case: &str| tables.iter().map(|t| mean(t, case)).sum::<f64>() / tables.len() as f64;

    let full_sr = wins("full", "serving_rate", false);
    let sr_aw = wins("serving_rate", "avg_wait", true);
    let aw_pos = wins("avg_wait", "position_dk2", true);
    let ratio = avg("position_dk2") / avg("patient");
    let blind = tables.iter().filter(|t| total(t, "blind_0.01") > total(t, "patient")).count();
    conclude(
        6,
        &[
            (
                full_sr >= 8,
                format!(
                    "full >= serving_rate in {full_sr}/10 seeds (means {:.3} vs {:.3})",
                    avg("full"),
                    avg("serving_rate")
                ),
            ),
            (sr_aw >= 8, format!("serving_rate > avg_wait in {sr_aw}/10 seeds")),
            (aw_pos >= 8, format!("avg_wait > position in {aw_pos}/10 seeds")),
            (
                (ratio - 1.0).abs() <= 0.15,
                format!(
                    "position/patient mean profit {ratio:.3} ({:.3} vs {:.3})",
                    avg("position_dk2"),
                    avg("patient")
                ),
            ),
            (blind >= 8, format!("blind(0.01) total > patient total in {blind}/10 seeds")),
        ],
        start.elapsed(),
        Duration::from_secs(900),
    );
}

#[test]
fn criterion_7_multi_queue_beats_greedy() {
    let start = Instant::now();
    let (sc, region) = reference();
    let mut wins = 0;
    let mut margins = Vec::new();
    for seed in 0..10 {
        let report = search_campaign(&sc, &region, 200, seed).unwrap();
        let best = report.best_row().unwrap().u_sigma;
        let greedy = report.greedy_row().unwrap().u_sigma;
        if best > greedy {
            wins += 1;
        }
        margins.push(format!("{:+.2}", best - greedy));
    }
    conclude(
        7,
        &[(
            wins >= 9,
            format!("best random beats greedy in {wins}/10 seeds (margins {})", margins.join(" ")),
        )],
        start.elapsed(),
        Duration::from_secs(900),
    );
}

#[test]
fn criterion_8_reneging_time_shape() {
    let start = Instant::now();
    let (sc, region) = reference();
    let c = renege_campaign(&sc, &region, 20, 20, ROUNDS, 0).unwrap();
    let tail = |campaign: &str, t: Option<usize>| c.fit(campaign, t).and_then(|f| f.tail_ratio);
    let pooled = tail("random", None);
    let non_preferred = tail("prefer_2", Some(1));
    let preferred = tail("prefer_2", Some(2));
    let fmt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.3}"));
    conclude(
        8,
        &[
            (
                pooled.is_some_and(|r| r < 1.5),
                format!("pooled random tail ratio {} (limit 1.5)", fmt(pooled)),
            ),
            (
                matches!((non_preferred, preferred), (Some(a), Some(b)) if a > b),
                format!(
                    "prefer-2 tail ratios: type 1 {} vs type 2 {}",
                    fmt(non_preferred),
                    fmt(preferred)
                ),
            ),
        ],
        start.elapsed(),
        Duration::from_secs(900),
    );
}

fn small_scenario(resources: Vec<f64>, costs: &[Vec<f64>]) -> Scenario {
    let types = costs
        .iter()
        .map(|c| SliceTypeSpec {
            cost: ResourceVector::new(c.clone()).unwrap(),
            arrival_rate: 1.0,
            mean_lifetime: 1.0,
            issue_cost: 0.0,
            waiting_cost_rate: 1.0,
            profit_rate: 1.0,
            utility_rate: None,
            balking_exponent: 0.0,
            reneging_rate: 0.0,
        })
        .collect();
    Scenario::new(ResourceVector::new(resources).unwrap(), types).unwrap()
}

/// Acceptance order `(type, position in its queue)` of the literal loop:
/// passes read the column of their start state and admit each fitting head
/// in order, until a pass admits nothing or no slice fits.
fn reference_serve(sc: &Scenario, region: &RegionIndex, strategy: &Strategy, start: &SystemState, depths: &[usize]) -> Vec<(usize, usize)> {
    let mut s = start.clone();
    let mut served = vec![0usize; depths.len()];
    let mut out = Vec::new();
    while (0..sc.type_count()).any(|n| sc.is_feasible(&s.incremented(n))) {
        let col = strategy.column(region.state_to_index(&s).unwrap()).entries().to_vec();
        let mut changed = false;
        for v in col.into_iter().take_while(|&v| v != 0) {
            let n = v as usize - 1;
            if served[n] < depths[n] && sc.is_feasible(&s.incremented(n)) {
                out.push((n, served[n]));
                served[n] += 1;
                s = s.incremented(n);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    out
}

#[test]
fn criterion_9_serve_queues_and_invariants() {
    let start = Instant::now();
    let scenarios = [
        Scenario::case_study(),
        small_scenario(vec![1.0], &[vec![0.5], vec![0.3], vec![0.2]]),
        small_scenario(vec![1.0, 1.0], &[vec![0.3, 0.1], vec![0.1, 0.3]]),
        small_scenario(vec![1.0, 0.8], &[vec![0.4, 0.2], vec![0.2, 0.35], vec![0.25, 0.25]]),
    ];
    let mut configs = 0usize;
    let mut mismatches = 0usize;
    let mut largest = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for sc in &scenarios {
        let region = enumerate_regions(sc).unwrap();
        largest = largest.max(region.feasible_len());
        let n = sc.type_count();
        for k in 0..8 {
            let strategy = random_strategy(&region, &mut rng, k % 2 == 0);
            for idx in 0..region.feasible_len() {
                for code in 0..5usize.pow(n as u32) {
                    let depths: Vec<usize> = (0..n).map(|t| code / 5usize.pow(t as u32) % 5).collect();
                    let mut ctrl = MultiQueueController::new(&region, &strategy, None);
                    ctrl.set_state_index(idx);
                    for (t, &d) in depths.iter().enumerate() {
                        for pos in 0..d {
                            ctrl.queue_mut(t).push_back(PendingRequest {
                                id: (t * 10 + pos) as u64,
                                slice_type: t,
                                enter_time: 0.0,
                                tenant: TenantRequest {
                                    issue_cost: 0.0,
                                    waiting_cost_rate: 1.0,
                                    profit_rate: 1.0,
                                    lifetime: 1.0,
                                },
                                regime: KnowledgeRegime::Patient,
                                entry_queue_length: pos + 1,
                                deadline: None,
                            });
                        }
                    }
                    let got: Vec<(usize, usize)> = ctrl
                        .serve_queues()
                        .iter()
                        .map(|a| (a.queue, a.request.id as usize - a.queue * 10))
                        .collect();
                    let want = reference_serve(sc, &region, &strategy, region.index_to_state(idx), &depths);
                    if got != want {
                        mismatches += 1;
                    }
                    configs += 1;
                }
            }
        }
    }

    // Simulation invariants on the reference scenario across regimes.
    let (sc, region) = reference();
    let regimes = [
        KnowledgeRegime::Patient,
        KnowledgeRegime::Blind { risk_factor: 0.1 },
        KnowledgeRegime::PositionOnly { delta_k: 2 },
        KnowledgeRegime::AvgWait,
        KnowledgeRegime::ServingRate,
        KnowledgeRegime::Full,
    ];
    let mut violations = Vec::new();
    for (i, regime) in regimes.into_iter().enumerate() {
        let strategy = random_strategy(&region, &mut rng, true);
        let cfg = SimConfig {
            horizon: 100.0,
            regime,
            initial: InitialState::RandomFeasible,
            ..SimConfig::default()
        };
        let a = run_replication(&sc, &region, Discipline::Strategy(&strategy), &cfg, i as u64).unwrap();
        let b = run_replication(&sc, &region, Discipline::Strategy(&strategy), &cfg, i as u64).unwrap();
        if !a.is_conserved() {
            violations.push(format!("{} conservation", regime.name()));
        }
        if a != b {
            violations.push(format!("{} determinism", regime.name()));
        }
        if a.max_resource_use.iter().zip(sc.resources.values()).any(|(u, r)| *u > r + 1e-9) {
            violations.push(format!("{} resource safety", regime.name()));
        }
    }
    conclude(
        9,
        &[
            (largest <= 50, format!("largest region {largest} states")),
            (
                mismatches == 0 && configs > 10_000,
                format!("{mismatches} serve_queues mismatches over {configs} configurations"),
            ),
            (violations.is_empty(), format!("simulation invariant violations: {violations:?}")),
        ],
        start.elapsed(),
        Duration::from_secs(600),
    );
}
