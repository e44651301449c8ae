//! Heterogeneous multi-queue FCFS admission controller.
//!
//! The controller owns the active-slice state and one FIFO queue per slice
//! type. After every release or arrival it serves the queues in the order
//! given by the strategy column of the current state, repeating passes until
//! a pass accepts nothing or the state leaves the admissibility region.
//!
//! [`GreedySingleQueue`] is the baseline: one mixed FIFO queue whose head is
//! accepted whenever it fits and otherwise blocks everyone behind it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{RegionIndex, SystemState};
use crate::strategy::Strategy;
use crate::tenant::{KnowledgeRegime, TenantRequest};

/// A tenant request waiting for admission.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingRequest {
    pub id: u64,
    /// Zero-based slice type.
    pub slice_type: usize,
    pub enter_time: f64,
    pub tenant: TenantRequest,
    pub regime: KnowledgeRegime,
    /// Queue length seen at join, including this request.
    pub entry_queue_length: usize,
    /// Pending renege deadline, if the regime scheduled one.
    pub deadline: Option<f64>,
}

/// One atomic acceptance.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceRecord {
    pub request: PendingRequest,
    pub queue: usize,
    /// Feasible-region index after the acceptance.
    pub state_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Queued,
    Balked,
    AcceptedImmediately,
    RejectedCap,
}

/// Common surface of the admission disciplines driven by the simulator.
pub trait AdmissionControl {
    fn region(&self) -> &RegionIndex;

    /// Feasible-region index of the current state.
    fn state_index(&self) -> usize;

    fn queue_count(&self) -> usize;

    /// Queue that holds requests of `slice_type`.
    fn queue_for(&self, slice_type: usize) -> usize;

    fn queue(&self, q: usize) -> &VecDeque<PendingRequest>;

    fn queue_mut(&mut self, q: usize) -> &mut VecDeque<PendingRequest>;

    fn queue_cap(&self) -> Option<usize>;

    /// Repeats acceptance passes until blocked.
    fn serve_queues(&mut self) -> Vec<AcceptanceRecord>;

    /// Installs a state directly, e.g. a random initial state.
    fn set_state_index(&mut self, idx: usize);

    fn state(&self) -> &SystemState {
        self.region().index_to_state(self.state_index())
    }

    fn queue_lengths(&self) -> Vec<usize> {
        (0..self.queue_count()).map(|q| self.queue(q).len()).collect()
    }

    /// Releases one slice of type `n`, then serves the queues.
    fn on_release(&mut self, n: usize) -> Result<Vec<AcceptanceRecord>> {
        let idx = self.state_index();
        let next = self.region().step_down(idx, n).ok_or_else(|| {
            Error::ProtocolViolation(format!(
                "release of type {} in state {} with no active slice of that type",
                n + 1,
                self.state()
            ))
        })?;
        self.set_state_index(next);
        Ok(self.serve_queues())
    }

    /// Offers a new request to its queue.
    ///
    /// `join` receives the queue length the request would see after joining
    /// (itself included) and returns whether the tenant issues the request.
    fn on_request<F>(&mut self, mut req: PendingRequest, join: F) -> (Disposition, Vec<AcceptanceRecord>)
    where
        F: FnOnce(usize) -> bool,
        Self: Sized,
    {
        let q = self.queue_for(req.slice_type);
        let len = self.queue(q).len() + 1;
        if !join(len) {
            return (Disposition::Balked, Vec::new());
        }
        if self.queue_cap().is_some_and(|cap| len > cap) {
            return (Disposition::RejectedCap, Vec::new());
        }
        let id = req.id;
        req.entry_queue_length = len;
        self.queue_mut(q).push_back(req);
        let accepted = self.serve_queues();
        let disposition = if accepted.iter().any(|a| a.request.id == id) {
            Disposition::AcceptedImmediately
        } else {
            Disposition::Queued
        };
        (disposition, accepted)
    }

    /// Removes a waiting request (reneging). Resources are untouched.
    fn remove(&mut self, q: usize, id: u64) -> Option<PendingRequest> {
        let queue = self.queue_mut(q);
        let pos = queue.iter().position(|r| r.id == id)?;
        queue.remove(pos)
    }
}

/// N heterogeneous FIFO queues served by a preference-matrix strategy.
#[derive(Debug, Clone)]
pub struct MultiQueueController<'a> {
    region: &'a RegionIndex,
    strategy: &'a Strategy,
    state: usize,
    queues: Vec<VecDeque<PendingRequest>>,
    queue_cap: Option<usize>,
}

impl<'a> MultiQueueController<'a> {
    pub fn new(region: &'a RegionIndex, strategy: &'a Strategy, queue_cap: Option<usize>) -> Self {
        Self {
            region,
            strategy,
            state: region.zero_index(),
            queues: vec![VecDeque::new(); region.type_count()],
            queue_cap,
        }
    }

    pub fn strategy(&self) -> &Strategy {
        self.strategy
    }
}

impl AdmissionControl for MultiQueueController<'_> {
    fn region(&self) -> &RegionIndex {
        self.region
    }

    fn state_index(&self) -> usize {
        self.state
    }

    fn queue_count(&self) -> usize {
        self.queues.len()
    }

    fn queue_for(&self, slice_type: usize) -> usize {
        slice_type
    }

    fn queue(&self, q: usize) -> &VecDeque<PendingRequest> {
        &self.queues[q]
    }

    fn queue_mut(&mut self, q: usize) -> &mut VecDeque<PendingRequest> {
        &mut self.queues[q]
    }

    fn queue_cap(&self) -> Option<usize> {
        self.queue_cap
    }

    fn set_state_index(&mut self, idx: usize) {
        self.state = idx;
    }

    fn serve_queues(&mut self) -> Vec<AcceptanceRecord> {
        let mut accepted = Vec::new();
        while self.region.is_admissible_index(self.state) {
            let pass_start = self.state;
            // The column is fetched once per pass; feasibility uses the live state.
            for n in self.strategy.column(pass_start).served_types() {
                if self.queues[n].is_empty() {
                    continue;
                }
                let Some(next) = self.region.step_up(self.state, n) else {
                    continue;
                };
                let request = self.queues[n].pop_front().expect("non-empty queue");
                self.state = next;
                accepted.push(AcceptanceRecord {
                    request,
                    queue: n,
                    state_after: next,
                });
            }
            if self.state == pass_start {
                break;
            }
        }
        accepted
    }
}

/// One mixed FIFO queue; the head is admitted iff it fits, and blocks otherwise.
#[derive(Debug, Clone)]
pub struct GreedySingleQueue<'a> {
    region: &'a RegionIndex,
    state: usize,
    queue: VecDeque<PendingRequest>,
    queue_cap: Option<usize>,
}

impl<'a> GreedySingleQueue<'a> {
    pub fn new(region: &'a RegionIndex, queue_cap: Option<usize>) -> Self {
        Self {
            region,
            state: region.zero_index(),
            queue: VecDeque::new(),
            queue_cap,
        }
    }
}

impl AdmissionControl for GreedySingleQueue<'_> {
    fn region(&self) -> &RegionIndex {
        self.region
    }

    fn state_index(&self) -> usize {
        self.state
    }

    fn queue_count(&self) -> usize {
        1
    }

    fn queue_for(&self, _slice_type: usize) -> usize {
        0
    }

    fn queue(&self, _q: usize) -> &VecDeque<PendingRequest> {
        &self.queue
    }

    fn queue_mut(&mut self, _q: usize) -> &mut VecDeque<PendingRequest> {
        &mut self.queue
    }

    fn queue_cap(&self) -> Option<usize> {
        self.queue_cap
    }

    fn set_state_index(&mut self, idx: usize) {
        self.state = idx;
    }

    fn serve_queues(&mut self) -> Vec<AcceptanceRecord> {
        let mut accepted = Vec::new();
        while let Some(head) = self.queue.front() {
            let Some(next) = self.region.step_up(self.state, head.slice_type) else {
                break;
            };
            let request = self.queue.pop_front().expect("non-empty queue");
            self.state = next;
            accepted.push(AcceptanceRecord {
                request,
                queue: 0,
                state_after: next,
            });
        }
        accepted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Request,
    Accept,
    Release,
    Balk,
    Renege,
    CapReject,
}

/// One line of the JSON-lines event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    /// 1-based slice type.
    pub slice_type: usize,
    pub request_id: Option<u64>,
    pub queue_lengths: Vec<usize>,
    pub state: SystemState,
}
