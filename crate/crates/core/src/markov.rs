//! Embedded transition chain of a preference-matrix strategy, long-run state
//! occupancy and the MNO-side performance metrics derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::region::{RegionIndex, SystemState};
use crate::strategy::{PreferenceVector, Strategy};

const ROW_SUM_TOL: f64 = 1e-12;

/// Row-stochastic transition matrix over the feasible region, stored as
/// sparse rows (each row has at most `N + 1` nonzeros).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionMatrix {
    /// Builds from explicit sparse rows, checking stochasticity.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(j, p) in row {
                if j >= n || !(0.0..=1.0 + ROW_SUM_TOL).contains(&p) {
                    return Err(invalid(format!("row {i}: bad entry ({j}, {p})")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_dense(m: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            m.iter()
                .map(|r| r.iter().enumerate().filter(|(_, &p)| p != 0.0).map(|(j, &p)| (j, p)).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().filter(|(k, _)| *k == j).map(|(_, p)| p).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|(_, p)| p).sum()
    }

    /// `x * P` for a row vector `x`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += xi * p;
            }
        }
        out
    }
}

/// Row of the transition matrix for one state under one preference vector.
///
/// Walking the column, position `n` receives `prod_{k<n} p_k(0) * (1 - p_n(0))`
/// when its target is feasible; everything else stays on the self-loop.
fn transition_row(region: &RegionIndex, idx: usize, column: Option<&PreferenceVector>, empty: &[f64]) -> Vec<(usize, f64)> {
    let mut row = Vec::new();
    let mut all_empty_so_far = 1.0;
    let mut moved = 0.0;
    if let Some(column) = column {
        for n in column.served_types() {
            let p = all_empty_so_far * (1.0 - empty[n]);
            if p > 0.0 {
                if let Some(target) = region.step_up(idx, n) {
                    row.push((target, p));
                    moved += p;
                }
            }
            all_empty_so_far *= empty[n];
        }
    }
    row.push((idx, (1.0 - moved).max(0.0)));
    row
}

/// Transition matrix of `strategy` given each type's queue-empty probability.
///
/// States outside the admissible region are absorbing.
pub fn build_transition_matrix(strategy: &Strategy, region: &RegionIndex, empty_probs: &[f64]) -> Result<TransitionMatrix> {
    if empty_probs.len() != region.type_count() {
        return Err(invalid(format!(
            "{} empty probabilities for {} slice types",
            empty_probs.len(),
            region.type_count()
        )));
    }
    if let Some(p) = empty_probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid(format!("empty probability {p} outside [0, 1]")));
    }
    if strategy.len() != region.admissible_len() {
        return Err(invalid("strategy does not match the region"));
    }
    let rows = (0..region.feasible_len())
        .map(|idx| {
            let column = region.is_admissible_index(idx).then(|| strategy.column(idx));
            transition_row(region, idx, column, empty_probs)
        })
        .collect();
    TransitionMatrix::from_rows(rows)
}

/// Probability distribution over the feasible region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    probs: Vec<f64>,
}

impl StateDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("state distribution has a negative or NaN entry"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL * probs.len().max(1) as f64 {
            return Err(invalid(format!("state distribution sums to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn point_mass(len: usize, idx: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[idx] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }

    /// The `k` most likely states as `(index, probability)`, most likely first.
    pub fn top(&self, k: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.probs.iter().copied().enumerate().filter(|(_, p)| *p > 0.0).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRun {
    pub distribution: StateDistribution,
    pub iterations: usize,
    pub converged: bool,
}

/// Long-run (Cesàro) occupancy `lim (1/K) sum_k P_init Psi^k`.
///
/// The limit is obtained by power iteration on the lazy chain `(I + Psi) / 2`,
/// which has the same invariant projection as `Psi` but no periodicity, so the
/// iterates themselves converge. Iteration stops once successive iterates are
/// within `tol` in L1; hitting `max_iters` clears the `converged` flag.
pub fn long_run_distribution(psi: &TransitionMatrix, init: &StateDistribution, tol: f64, max_iters: usize) -> Result<LongRun> {
    if init.probs.len() != psi.len() {
        return Err(invalid("initial distribution does not match the matrix size"));
    }
    let mut x = init.probs.clone();
    for it in 1..=max_iters {
        let moved = psi.left_multiply(&x);
        let next: Vec<f64> = x.iter().zip(&moved).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if diff < tol {
            return Ok(LongRun {
                distribution: normalized(x),
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(LongRun {
        distribution: normalized(x),
        iterations: max_iters,
        converged: false,
    })
}

fn normalized(mut x: Vec<f64>) -> StateDistribution {
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|p| *p /= s);
    }
    StateDistribution { probs: x }
}

/// Mean number of live slices of each type under `dist`.
pub fn mean_occupancy(dist: &StateDistribution, region: &RegionIndex) -> Vec<f64> {
    let mut sbar = vec![0.0; region.type_count()];
    for (p, s) in dist.probs.iter().zip(region.feasible()) {
        for (acc, &c) in sbar.iter_mut().zip(s.counts()) {
            *acc += p * c as f64;
        }
    }
    sbar
}

/// Per-type acceptance rate by flow balance: `mu_n = s_bar_n * eta_n`.
pub fn estimate_acceptance_rates(dist: &StateDistribution, region: &RegionIndex, release_rates: &[f64]) -> Vec<f64> {
    mean_occupancy(dist, region)
        .into_iter()
        .zip(release_rates)
        .map(|(s, eta)| s * eta)
        .collect()
}

/// Per-queue inputs to [`utility_metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub acceptance_rate: f64,
    pub release_rate: f64,
    pub utility_rate: f64,
    pub mean_length: f64,
    pub mean_wait: f64,
    pub arrival_rate: f64,
    pub p_accept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityMetrics {
    /// Average overall utility rate.
    pub u_sigma: f64,
    /// Length-weighted mean waiting time over all queues.
    pub mean_wait: f64,
    /// Arrival-weighted admission probability.
    pub admission: f64,
    /// All queues empty on average, so `mean_wait` is reported as 0.
    pub empty: bool,
}

pub fn utility_metrics(queues: &[QueueSummary]) -> Result<UtilityMetrics> {
    for q in queues {
        let fields = [
            q.acceptance_rate,
            q.release_rate,
            q.utility_rate,
            q.mean_length,
            q.mean_wait,
            q.arrival_rate,
            q.p_accept,
        ];
        if fields.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("utility metrics need non-negative inputs"));
        }
        if q.release_rate == 0.0 {
            return Err(invalid("release rate must be positive"));
        }
    }
    let u_sigma = queues.iter().map(|q| q.acceptance_rate * q.utility_rate / q.release_rate).sum();
    let total_len: f64 = queues.iter().map(|q| q.mean_length).sum();
    let (mean_wait, empty) = if total_len > 0.0 {
        (queues.iter().map(|q| q.mean_wait * q.mean_length).sum::<f64>() / total_len, false)
    } else {
        (0.0, true)
    };
    let total_lambda: f64 = queues.iter().map(|q| q.arrival_rate).sum();
    let admission = if total_lambda > 0.0 {
        queues.iter().map(|q| q.arrival_rate * q.p_accept).sum::<f64>() / total_lambda
    } else {
        0.0
    };
    Ok(UtilityMetrics {
        u_sigma,
        mean_wait,
        admission,
        empty,
    })
}

/// Overall utility rate at one instant, `sum_n s_n u_n`.
pub fn instant_utility(state: &SystemState, utility_rates: &[f64]) -> f64 {
    state.counts().iter().zip(utility_rates).map(|(&s, u)| s as f64 * u).sum()
}

/// Largest admissible region for which exhaustive strategy enumeration runs.
pub const EXHAUSTIVE_MAX_ADMISSIBLE: usize = 12;

/// Every strategy over `region`, refusing regions with more than twelve
/// admissible states or more than `2^((N+1)|A|)` strategies.
pub fn exhaustive_strategies(region: &RegionIndex) -> Result<impl Iterator<Item = Strategy> + '_> {
    let a = region.admissible_len();
    let n = region.type_count();
    if a > EXHAUSTIVE_MAX_ADMISSIBLE {
        return Err(invalid(format!(
            "exhaustive search needs at most {EXHAUSTIVE_MAX_ADMISSIBLE} admissible states, region has {a}"
        )));
    }
    let columns = permutations(n as u16);
    let per_state = columns.len() as f64;
    let count = per_state.powi(a as i32);
    let guard = 2f64.powi(((n + 1) * a) as i32);
    if count > guard {
        return Err(invalid(format!("{count} strategies exceed the enumeration guard of {guard}")));
    }
    let total = count as usize;
    Ok((0..total).map(move |mut code| {
        let cols = (0..a)
            .map(|_| {
                let c = columns[code % columns.len()].clone();
                code /= columns.len();
                c
            })
            .collect();
        Strategy::new(region, cols).expect("enumerated columns match the region")
    }))
}

fn permutations(n: u16) -> Vec<PreferenceVector> {
    fn rec(prefix: &mut Vec<u16>, rest: &mut Vec<u16>, out: &mut Vec<PreferenceVector>) {
        if rest.is_empty() {
            out.push(PreferenceVector::new(prefix.clone()).expect("permutation"));
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..=n).collect(), &mut out);
    out
}
