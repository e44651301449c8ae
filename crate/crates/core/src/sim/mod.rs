//! Discrete-event simulation of the admission system.
//!
//! Requests of each type arrive as a Poisson stream, every tenant draws its
//! slice lifetime on arrival, and the admission discipline decides when the
//! request is accepted. Tenants balk and renege according to the configured
//! knowledge regime, using running estimates published by the operator.

mod estimators;
mod isolated;
mod metrics;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{
    AcceptanceRecord, AdmissionControl, Disposition, EventKind, EventRecord, GreedySingleQueue,
    MultiQueueController, PendingRequest,
};
use crate::error::{invalid, Result};
use crate::markov::instant_utility;
use crate::region::RegionIndex;
use crate::scenario::{assigned_resources, Scenario};
use crate::strategy::Strategy;
use crate::tenant::{end_profit, renege_blind, renege_position, KnowledgeRegime, Outcome, RenegeDecision, TenantRequest};

pub use estimators::{QueueEstimator, MIN_SERVED};
pub use isolated::{isolated_queue_sim, IsolatedMetrics};
pub use metrics::{
    aggregate, pooled_profit, stat, within_capacity, MetricStat, RequestOutcome, RequestRecord, RunMetrics,
    TypeCounts,
};

/// State the system starts from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Empty,
    /// Uniform over the feasible region.
    RandomFeasible,
    /// Uniform over states where no further slice fits.
    RandomFull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Simulated periods.
    pub horizon: f64,
    pub seed: u64,
    pub replications: usize,
    /// Per-queue length limit applied at enqueue.
    pub queue_cap: Option<usize>,
    pub regime: KnowledgeRegime,
    pub initial: InitialState,
    /// Fraction of the horizon excluded from time averages and acceptance instants.
    pub warmup_fraction: f64,
    /// Keep the full event log.
    pub trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            seed: 0,
            replications: 1,
            queue_cap: Some(100),
            regime: KnowledgeRegime::Patient,
            initial: InitialState::Empty,
            warmup_fraction: 0.0,
            trace: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.replications == 0 {
            return Err(invalid("at least one replication is needed"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(invalid("warm-up fraction must lie in [0, 1)"));
        }
        if self.queue_cap == Some(0) {
            return Err(invalid("queue cap must be at least 1"));
        }
        Ok(())
    }
}

/// Admission discipline driven by the simulator.
#[derive(Debug, Clone, Copy)]
pub enum Discipline<'a> {
    Strategy(&'a Strategy),
    /// One mixed FIFO queue with head-of-line blocking.
    GreedySingleQueue,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `r` derived from the master seed.
pub fn replication_seed(master: u64, r: u64) -> u64 {
    splitmix64(splitmix64(master) ^ r.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Independent random stream for one purpose within a replication.
pub(crate) fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

const STREAM_INITIAL: u64 = 1;
const STREAM_INITIAL_LIFETIMES: u64 = 2;
pub(crate) const STREAM_ISOLATED: u64 = 3;
const STREAM_ARRIVALS: u64 = 0x100;
const STREAM_LIFETIMES: u64 = 0x200;

#[derive(Debug, Clone, Copy, PartialEq)]
enum SimEvent {
    Release { slice_type: usize },
    Arrival { slice_type: usize },
    RenegeDeadline { queue: usize, request: u64 },
    HorizonEnd,
}

impl SimEvent {
    /// Tie order at equal times.
    fn priority(&self) -> u8 {
        match self {
            Self::Release { .. } => 0,
            Self::Arrival { .. } => 1,
            Self::RenegeDeadline { .. } => 2,
            Self::HorizonEnd => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: SimEvent,
}

impl Scheduled {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.event.priority(), self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    /// Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, pa, sa) = self.key();
        let (tb, pb, sb) = other.key();
        tb.total_cmp(&ta).then(pb.cmp(&pa)).then(sb.cmp(&sa))
    }
}

#[derive(Default)]
struct Calendar {
    heap: BinaryHeap<Scheduled>,
    seq: u64,
}

impl Calendar {
    fn push(&mut self, time: f64, event: SimEvent) {
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop()
    }
}

struct Engine<'a, C: AdmissionControl> {
    scenario: &'a Scenario,
    config: &'a SimConfig,
    ctrl: C,
    calendar: Calendar,
    now: f64,
    warmup: f64,
    arrivals: Vec<(ChaCha8Rng, Option<Exp<f64>>)>,
    lifetimes: Vec<(ChaCha8Rng, Exp<f64>)>,
    estimators: Vec<QueueEstimator>,
    utility_rates: Vec<f64>,
    visited: Vec<bool>,
    metrics: RunMetrics,
    next_id: u64,
}

impl<'a, C: AdmissionControl> Engine<'a, C> {
    fn new(scenario: &'a Scenario, config: &'a SimConfig, ctrl: C, seed: u64) -> Result<Self> {
        let n = scenario.type_count();
        let arrivals = scenario
            .slice_types
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let exp = (t.arrival_rate > 0.0).then(|| Exp::new(t.arrival_rate).expect("positive rate"));
                (stream(seed, STREAM_ARRIVALS + i as u64), exp)
            })
            .collect();
        let lifetimes = scenario
            .slice_types
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let exp = Exp::new(t.release_rate()).map_err(|e| invalid(format!("slice type {}: {e}", i + 1)))?;
                Ok((stream(seed, STREAM_LIFETIMES + i as u64), exp))
            })
            .collect::<Result<Vec<_>>>()?;
        let queues = ctrl.queue_count();
        let feasible = ctrl.region().feasible_len();
        Ok(Self {
            scenario,
            config,
            ctrl,
            calendar: Calendar::default(),
            now: 0.0,
            warmup: config.warmup_fraction * config.horizon,
            arrivals,
            lifetimes,
            estimators: vec![QueueEstimator::default(); queues],
            utility_rates: scenario.slice_types.iter().map(|t| t.utility_rate()).collect(),
            visited: vec![false; feasible],
            metrics: RunMetrics {
                seed,
                horizon: config.horizon,
                observed_time: config.horizon - config.warmup_fraction * config.horizon,
                counts: vec![TypeCounts::default(); n],
                acceptance_times: vec![Vec::new(); n],
                renege_waits: vec![Vec::new(); n],
                requests: Vec::new(),
                occupancy: vec![0.0; feasible],
                utility_integral: 0.0,
                queue_length_integral: vec![0.0; queues],
                joined: vec![0; queues],
                wait_sum: vec![0.0; queues],
                departed: vec![0; queues],
                max_resource_use: vec![0.0; scenario.resource_dim()],
                events: config.trace.then(Vec::new),
            },
            next_id: 0,
        })
    }

    fn log(&mut self, kind: EventKind, slice_type: usize, request_id: Option<u64>) {
        if let Some(events) = self.metrics.events.as_mut() {
            events.push(EventRecord {
                time: self.now,
                kind,
                slice_type: slice_type + 1,
                request_id,
                queue_lengths: self.ctrl.queue_lengths(),
                state: self.ctrl.state().clone(),
            });
        }
    }

    fn initialize(&mut self, seed: u64) {
        let region = self.ctrl.region();
        let candidates: Vec<usize> = match self.config.initial {
            InitialState::Empty => vec![region.zero_index()],
            InitialState::RandomFeasible => (0..region.feasible_len()).collect(),
            InitialState::RandomFull => {
                let b: Vec<usize> = (region.admissible_len()..region.feasible_len()).collect();
                if b.is_empty() {
                    vec![region.zero_index()]
                } else {
                    b
                }
            }
        };
        let mut rng = stream(seed, STREAM_INITIAL);
        let idx = candidates[rng.random_range(0..candidates.len())];
        self.ctrl.set_state_index(idx);
        self.visited[idx] = true;
        let counts = self.ctrl.region().index_to_state(idx).counts().to_vec();
        let mut rng = stream(seed, STREAM_INITIAL_LIFETIMES);
        for (n, &c) in counts.iter().enumerate() {
            let exp = self.lifetimes[n].1;
            for _ in 0..c {
                self.calendar.push(exp.sample(&mut rng), SimEvent::Release { slice_type: n });
            }
        }
        for n in 0..self.arrivals.len() {
            self.schedule_arrival(n);
        }
        self.calendar.push(self.config.horizon, SimEvent::HorizonEnd);
    }

    fn schedule_arrival(&mut self, n: usize) {
        let (rng, exp) = &mut self.arrivals[n];
        if let Some(exp) = exp {
            let t = self.now + exp.sample(rng);
            self.calendar.push(t, SimEvent::Arrival { slice_type: n });
        }
    }

    /// Integrates time-weighted quantities up to `t`.
    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        if dt > 0.0 {
            for q in 0..self.estimators.len() {
                let len = self.ctrl.queue(q).len();
                self.estimators[q].advance(len, dt);
            }
            let lo = self.now.max(self.warmup);
            let window = t - lo;
            if window > 0.0 {
                let idx = self.ctrl.state_index();
                self.metrics.occupancy[idx] += window;
                self.metrics.utility_integral += window * instant_utility(self.ctrl.state(), &self.utility_rates);
                for q in 0..self.metrics.queue_length_integral.len() {
                    self.metrics.queue_length_integral[q] += window * self.ctrl.queue(q).len() as f64;
                }
            }
        }
        self.now = t;
    }

    fn run(mut self) -> Result<RunMetrics> {
        while let Some(ev) = self.calendar.pop() {
            if ev.time > self.config.horizon {
                break;
            }
            self.advance(ev.time);
            match ev.event {
                SimEvent::HorizonEnd => break,
                SimEvent::Arrival { slice_type } => self.on_arrival(slice_type),
                SimEvent::Release { slice_type } => {
                    let accepted = self.ctrl.on_release(slice_type)?;
                    self.log(EventKind::Release, slice_type, None);
                    self.process_acceptances(accepted);
                }
                SimEvent::RenegeDeadline { queue, request } => self.on_deadline(ev.time, queue, request),
            }
            self.visited[self.ctrl.state_index()] = true;
        }
        self.advance(self.config.horizon);
        self.finish()
    }

    fn on_arrival(&mut self, n: usize) {
        self.schedule_arrival(n);
        let spec = &self.scenario.slice_types[n];
        let (rng, exp) = &mut self.lifetimes[n];
        let tenant = TenantRequest {
            issue_cost: spec.issue_cost,
            waiting_cost_rate: spec.waiting_cost_rate,
            profit_rate: spec.profit_rate,
            lifetime: exp.sample(rng),
        };
        let id = self.next_id;
        self.next_id += 1;
        self.metrics.counts[n].arrivals += 1;
        self.metrics.requests.push(RequestRecord {
            id,
            slice_type: n,
            arrival_time: self.now,
            lifetime: tenant.lifetime,
            outcome: RequestOutcome::Waiting,
            wait: None,
            end_profit: None,
        });
        self.log(EventKind::Request, n, Some(id));

        let regime = self.config.regime;
        let q = self.ctrl.queue_for(n);
        let req = PendingRequest {
            id,
            slice_type: n,
            enter_time: self.now,
            tenant,
            regime,
            entry_queue_length: 0,
            deadline: None,
        };
        let estimator = &self.estimators[q];
        let (disposition, accepted) = self
            .ctrl
            .on_request(req, |len| estimator.issues(&regime, &tenant, len));
        match disposition {
            Disposition::Balked => {
                self.metrics.counts[n].balks += 1;
                self.metrics.requests[id as usize].outcome = RequestOutcome::Balked;
                self.log(EventKind::Balk, n, Some(id));
                return;
            }
            Disposition::RejectedCap => {
                self.metrics.counts[n].cap_rejected += 1;
                let rec = &mut self.metrics.requests[id as usize];
                rec.outcome = RequestOutcome::CapRejected;
                rec.wait = Some(0.0);
                rec.end_profit = Some(-tenant.issue_cost);
                self.log(EventKind::CapReject, n, Some(id));
                return;
            }
            Disposition::Queued | Disposition::AcceptedImmediately => {}
        }
        self.metrics.joined[q] += 1;
        if disposition == Disposition::Queued {
            if let KnowledgeRegime::Blind { risk_factor } = regime {
                let t_max = renege_blind(&tenant, risk_factor);
                if t_max.is_finite() {
                    let deadline = self.now + t_max;
                    if let Some(r) = self.ctrl.queue_mut(q).iter_mut().find(|r| r.id == id) {
                        r.deadline = Some(deadline);
                    }
                    self.calendar.push(deadline, SimEvent::RenegeDeadline { queue: q, request: id });
                }
            }
        }
        self.process_acceptances(accepted);
    }

    fn on_deadline(&mut self, t: f64, q: usize, id: u64) {
        let queue = self.ctrl.queue(q);
        let Some(pos) = queue.iter().position(|r| r.id == id) else {
            return;
        };
        if queue[pos].deadline != Some(t) {
            return;
        }
        self.renege(q, id, pos + 1);
        self.reevaluate(q);
    }

    fn renege(&mut self, q: usize, id: u64, position: usize) {
        let req = self.ctrl.remove(q, id).expect("reneging request is queued");
        let n = req.slice_type;
        let wait = self.now - req.enter_time;
        self.estimators[q].on_renege(position);
        self.metrics.counts[n].reneges += 1;
        self.metrics.renege_waits[n].push(wait);
        self.metrics.wait_sum[q] += wait;
        self.metrics.departed[q] += 1;
        let rec = &mut self.metrics.requests[id as usize];
        rec.outcome = RequestOutcome::Reneged;
        rec.wait = Some(wait);
        rec.end_profit = Some(end_profit(&req.tenant, Outcome::Reneged { wait }));
        self.log(EventKind::Renege, n, Some(id));
    }

    fn process_acceptances(&mut self, accepted: Vec<AcceptanceRecord>) {
        if accepted.is_empty() {
            return;
        }
        let mut touched = vec![false; self.estimators.len()];
        for a in accepted {
            let req = a.request;
            let n = req.slice_type;
            let wait = self.now - req.enter_time;
            self.estimators[a.queue].on_accept(wait, req.enter_time < self.now);
            touched[a.queue] = true;
            self.metrics.counts[n].accepted += 1;
            if self.now >= self.warmup {
                self.metrics.acceptance_times[n].push(self.now);
            }
            self.metrics.wait_sum[a.queue] += wait;
            self.metrics.departed[a.queue] += 1;
            let rec = &mut self.metrics.requests[req.id as usize];
            rec.outcome = RequestOutcome::Accepted;
            rec.wait = Some(wait);
            rec.end_profit = Some(end_profit(&req.tenant, Outcome::Accepted { wait }));
            self.calendar
                .push(self.now + req.tenant.lifetime, SimEvent::Release { slice_type: n });
            self.visited[a.state_after] = true;
            self.log(EventKind::Accept, n, Some(req.id));
        }
        for (q, t) in touched.into_iter().enumerate() {
            if t {
                self.reevaluate(q);
            }
        }
    }

    /// Re-decides every waiting request of position-aware regimes in queue `q`.
    fn reevaluate(&mut self, q: usize) {
        let regime = self.config.regime;
        let mut leaving: Vec<(u64, usize)> = Vec::new();
        match regime {
            KnowledgeRegime::Full | KnowledgeRegime::ServingRate => {
                let len = self.ctrl.queue(q).len();
                let Some(table) = self.estimators[q].wait_table(&regime, len) else {
                    return;
                };
                let mut ahead = 0;
                for r in self.ctrl.queue(q) {
                    let k = ahead + 1;
                    let t = &r.tenant;
                    if t.lifetime_profit() - t.waiting_cost_rate * table[k] >= 0.0 {
                        ahead += 1;
                    } else {
                        leaving.push((r.id, k));
                    }
                }
            }
            KnowledgeRegime::PositionOnly { delta_k } => {
                let now = self.now;
                let mut ahead = 0;
                let mut new_deadlines = Vec::new();
                for r in self.ctrl.queue_mut(q).iter_mut() {
                    let k = ahead + 1;
                    let verdict = renege_position(&r.tenant, k, r.entry_queue_length, now - r.enter_time, delta_k)
                        .expect("positions never grow");
                    if verdict.decision == RenegeDecision::Renege {
                        leaving.push((r.id, k));
                        continue;
                    }
                    ahead += 1;
                    let deadline = verdict.deadline.map(|d| r.enter_time + d);
                    if deadline != r.deadline {
                        r.deadline = deadline;
                        if let Some(d) = deadline {
                            new_deadlines.push((d, r.id));
                        }
                    }
                }
                for (d, id) in new_deadlines {
                    self.calendar.push(d, SimEvent::RenegeDeadline { queue: q, request: id });
                }
            }
            _ => return,
        }
        for (id, k) in leaving {
            self.renege(q, id, k);
        }
    }

    fn finish(mut self) -> Result<RunMetrics> {
        for q in 0..self.ctrl.queue_count() {
            for r in self.ctrl.queue(q) {
                self.metrics.counts[r.slice_type].waiting += 1;
            }
        }
        let costs = self.scenario.cost_matrix();
        for (idx, _) in self.visited.iter().enumerate().filter(|(_, v)| **v) {
            let used = assigned_resources(&costs, self.ctrl.region().index_to_state(idx))?;
            for (m, u) in self.metrics.max_resource_use.iter_mut().zip(used.values()) {
                *m = m.max(*u);
            }
        }
        Ok(self.metrics)
    }
}

fn check_inputs(scenario: &Scenario, region: &RegionIndex, discipline: Discipline<'_>, config: &SimConfig) -> Result<()> {
    config.validate()?;
    if region.type_count() != scenario.type_count() {
        return Err(invalid("region does not belong to the scenario"));
    }
    if let Discipline::Strategy(s) = discipline {
        if s.len() != region.admissible_len() || s.columns().iter().any(|c| c.type_count() != scenario.type_count()) {
            return Err(invalid("strategy does not match the scenario"));
        }
    }
    Ok(())
}

/// Simulates one replication with the given seed.
pub fn run_replication(
    scenario: &Scenario,
    region: &RegionIndex,
    discipline: Discipline<'_>,
    config: &SimConfig,
    seed: u64,
) -> Result<RunMetrics> {
    check_inputs(scenario, region, discipline, config)?;
    match discipline {
        Discipline::Strategy(strategy) => {
            let ctrl = MultiQueueController::new(region, strategy, config.queue_cap);
            simulate(scenario, config, ctrl, seed)
        }
        Discipline::GreedySingleQueue => {
            // One shared queue holds as many requests as the per-type queues together.
            let cap = config.queue_cap.map(|c| c * scenario.type_count());
            simulate(scenario, config, GreedySingleQueue::new(region, cap), seed)
        }
    }
}

fn simulate<C: AdmissionControl>(scenario: &Scenario, config: &SimConfig, ctrl: C, seed: u64) -> Result<RunMetrics> {
    let mut engine = Engine::new(scenario, config, ctrl, seed)?;
    engine.initialize(seed);
    engine.run()
}

/// Replications plus their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub runs: Vec<RunMetrics>,
    pub aggregate: Vec<MetricStat>,
}

/// Runs `config.replications` independent replications in parallel.
pub fn run_monte_carlo(
    scenario: &Scenario,
    region: &RegionIndex,
    discipline: Discipline<'_>,
    config: &SimConfig,
) -> Result<MonteCarlo> {
    check_inputs(scenario, region, discipline, config)?;
    let runs = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(scenario, region, discipline, config, replication_seed(config.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&runs);
    Ok(MonteCarlo { runs, aggregate })
}

/// One replication of the greedy single-queue baseline.
pub fn greedy_single_queue_baseline(
    scenario: &Scenario,
    region: &RegionIndex,
    config: &SimConfig,
    seed: u64,
) -> Result<RunMetrics> {
    run_replication(scenario, region, Discipline::GreedySingleQueue, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::enumerate_regions;
    use crate::scenario::{ResourceVector, SliceTypeSpec};
    use crate::strategy::{naive_strategy, PreferenceVector};

    fn reference_setup() -> (Scenario, RegionIndex, Strategy) {
        let sc = Scenario::reference();
        let region = enumerate_regions(&sc).unwrap();
        let s = naive_strategy(&region, &PreferenceVector::identity(2)).unwrap();
        (sc, region, s)
    }

    fn cfg(horizon: f64, regime: KnowledgeRegime) -> SimConfig {
        SimConfig {
            horizon,
            regime,
            ..SimConfig::default()
        }
    }

    #[test]
    fn event_order_breaks_ties_by_kind_then_sequence() {
        let mut c = Calendar::default();
        c.push(1.0, SimEvent::RenegeDeadline { queue: 0, request: 0 });
        c.push(1.0, SimEvent::Arrival { slice_type: 0 });
        c.push(1.0, SimEvent::Release { slice_type: 1 });
        c.push(0.5, SimEvent::HorizonEnd);
        c.push(1.0, SimEvent::Release { slice_type: 0 });
        let order: Vec<SimEvent> = std::iter::from_fn(|| c.pop().map(|s| s.event)).collect();
        assert_eq!(
            order,
            vec![
                SimEvent::HorizonEnd,
                SimEvent::Release { slice_type: 1 },
                SimEvent::Release { slice_type: 0 },
                SimEvent::Arrival { slice_type: 0 },
                SimEvent::RenegeDeadline { queue: 0, request: 0 },
            ]
        );
    }

    #[test]
    fn no_arrivals_means_no_events() {
        let (mut sc, region, s) = reference_setup();
        for t in &mut sc.slice_types {
            t.arrival_rate = 0.0;
        }
        let mut c = cfg(100.0, KnowledgeRegime::Patient);
        c.trace = true;
        let m = run_replication(&sc, &region, Discipline::Strategy(&s), &c, 1).unwrap();
        assert!(m.requests.is_empty());
        assert!(m.events.unwrap().is_empty());
        assert_eq!(m.utility_integral, 0.0);
        assert_eq!(m.occupancy[region.zero_index()], 100.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (sc, region, s) = reference_setup();
        let mut c = cfg(200.0, KnowledgeRegime::Full);
        c.trace = true;
        let a = run_replication(&sc, &region, Discipline::Strategy(&s), &c, 9).unwrap();
        let b = run_replication(&sc, &region, Discipline::Strategy(&s), &c, 9).unwrap();
        assert_eq!(a, b);
        let d = run_replication(&sc, &region, Discipline::Strategy(&s), &c, 10).unwrap();
        assert_ne!(a.requests, d.requests);
    }

    #[test]
    fn counts_are_conserved_in_every_regime() {
        let (sc, region, s) = reference_setup();
        for regime in [
            KnowledgeRegime::Patient,
            KnowledgeRegime::Blind { risk_factor: 0.01 },
            KnowledgeRegime::PositionOnly { delta_k: 1 },
            KnowledgeRegime::AvgWait,
            KnowledgeRegime::ServingRate,
            KnowledgeRegime::Full,
        ] {
            let m = run_replication(&sc, &region, Discipline::Strategy(&s), &cfg(300.0, regime), 4).unwrap();
            assert!(m.is_conserved(), "{regime:?}: {:?}", m.counts);
            assert!(within_capacity(&sc, &m).unwrap());
            let g = greedy_single_queue_baseline(&sc, &region, &cfg(300.0, regime), 4).unwrap();
            assert!(g.is_conserved(), "{regime:?}: {:?}", g.counts);
        }
    }

    #[test]
    fn bottleneck_acceptance_rate_approaches_release_rate() {
        // One type using the whole pool: at most one live slice, so acceptances
        // happen at the release rate when requests are plentiful.
        let t = SliceTypeSpec {
            cost: ResourceVector::new(vec![1.0]).unwrap(),
            arrival_rate: 50.0,
            mean_lifetime: 2.0,
            issue_cost: 0.0,
            waiting_cost_rate: 1.0,
            profit_rate: 1.0,
            utility_rate: None,
            balking_exponent: 0.0,
            reneging_rate: 0.0,
        };
        let sc = Scenario::new(ResourceVector::new(vec![1.0]).unwrap(), vec![t]).unwrap();
        let region = enumerate_regions(&sc).unwrap();
        let s = naive_strategy(&region, &PreferenceVector::identity(1)).unwrap();
        let m = run_replication(&sc, &region, Discipline::Strategy(&s), &cfg(20_000.0, KnowledgeRegime::Patient), 3).unwrap();
        let rate = m.acceptance_rate(0);
        assert!((rate - 0.5).abs() / 0.5 < 0.05, "{rate}");
    }

    #[test]
    fn zero_risk_blind_tenants_never_wait() {
        let (sc, region, s) = reference_setup();
        let m = run_replication(
            &sc,
            &region,
            Discipline::Strategy(&s),
            &cfg(300.0, KnowledgeRegime::Blind { risk_factor: 0.0 }),
            5,
        )
        .unwrap();
        assert!(m
            .requests
            .iter()
            .filter_map(|r| r.wait)
            .all(|w| w == 0.0));
        assert!(m.counts.iter().all(|c| c.waiting == 0));
    }

    #[test]
    fn random_full_start_has_no_room() {
        let (sc, region, s) = reference_setup();
        let mut c = cfg(1.0, KnowledgeRegime::Patient);
        c.initial = InitialState::RandomFull;
        c.trace = true;
        for seed in 0..20 {
            let mut sc0 = sc.clone();
            for t in &mut sc0.slice_types {
                t.arrival_rate = 0.0;
                t.mean_lifetime = 1e9;
            }
            let m = run_replication(&sc0, &region, Discipline::Strategy(&s), &c, seed).unwrap();
            let idx = m.occupancy.iter().position(|&t| t > 0.0).unwrap();
            assert!(!region.is_admissible_index(idx));
        }
    }

    #[test]
    fn monte_carlo_is_ordered_and_deterministic() {
        let (sc, region, s) = reference_setup();
        let mut c = cfg(100.0, KnowledgeRegime::Patient);
        c.replications = 6;
        c.seed = 42;
        let a = run_monte_carlo(&sc, &region, Discipline::Strategy(&s), &c).unwrap();
        let b = run_monte_carlo(&sc, &region, Discipline::Strategy(&s), &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs.len(), 6);
        assert!(a.aggregate.iter().all(|m| m.n == 6));
        for (r, run) in a.runs.iter().enumerate() {
            assert_eq!(run.seed, replication_seed(42, r as u64));
        }
    }

    #[test]
    fn rejects_mismatched_strategy() {
        let (sc, _, _) = reference_setup();
        let other = Scenario::case_study();
        let region = enumerate_regions(&other).unwrap();
        let s = naive_strategy(&region, &PreferenceVector::identity(2)).unwrap();
        let big = enumerate_regions(&sc).unwrap();
        assert!(run_replication(&sc, &big, Discipline::Strategy(&s), &SimConfig::default(), 0).is_err());
        let bad = SimConfig {
            horizon: 0.0,
            ..SimConfig::default()
        };
        assert!(run_replication(&sc, &big, Discipline::GreedySingleQueue, &bad, 0).is_err());
    }
}
