//! System states and the feasibility/admissibility regions.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, FEASIBILITY_SLACK};

/// Number of active slices of every type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SystemState(Vec<u32>);

impl SystemState {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `s + Δs_n`.
    pub fn incremented(&self, n: usize) -> Self {
        let mut c = self.0.clone();
        c[n] += 1;
        Self(c)
    }

    /// `s - Δs_n`, or `None` when `s_n = 0`.
    pub fn decremented(&self, n: usize) -> Option<Self> {
        let mut c = self.0.clone();
        c[n] = c[n].checked_sub(1)?;
        Some(Self(c))
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Enumerated feasibility region with the admissible states indexed first.
///
/// Index `i < admissible_len()` is both the feasible index and the admissible
/// index of the same state, so strategy columns can be addressed directly by
/// the feasible index. Both groups are in lexicographic order.
#[derive(Debug, Clone)]
pub struct RegionIndex {
    states: Vec<SystemState>,
    admissible_len: usize,
    lookup: HashMap<SystemState, usize>,
    up: Vec<Vec<Option<usize>>>,
    down: Vec<Vec<Option<usize>>>,
}

impl RegionIndex {
    /// All feasible states: admissible ones first, then the saturated boundary.
    pub fn feasible(&self) -> &[SystemState] {
        &self.states
    }

    pub fn admissible(&self) -> &[SystemState] {
        &self.states[..self.admissible_len]
    }

    pub fn boundary(&self) -> &[SystemState] {
        &self.states[self.admissible_len..]
    }

    pub fn feasible_len(&self) -> usize {
        self.states.len()
    }

    pub fn admissible_len(&self) -> usize {
        self.admissible_len
    }

    pub fn type_count(&self) -> usize {
        self.up.first().map(|u| u.len()).unwrap_or(0)
    }

    pub fn state_to_index(&self, s: &SystemState) -> Option<usize> {
        self.lookup.get(s).copied()
    }

    pub fn index_to_state(&self, idx: usize) -> &SystemState {
        &self.states[idx]
    }

    pub fn is_admissible_index(&self, idx: usize) -> bool {
        idx < self.admissible_len
    }

    /// Index of `s + Δs_n` when that state is feasible.
    pub fn step_up(&self, idx: usize, n: usize) -> Option<usize> {
        self.up[idx][n]
    }

    /// Index of `s - Δs_n` when `s_n > 0`.
    pub fn step_down(&self, idx: usize, n: usize) -> Option<usize> {
        self.down[idx][n]
    }

    pub fn zero_index(&self) -> usize {
        // The empty system is always feasible.
        self.lookup[&SystemState::zeros(self.type_count())]
    }
}

/// Enumerates the feasibility and admissibility regions of `scenario`.
pub fn enumerate_regions(scenario: &Scenario) -> Result<RegionIndex> {
    let n_types = scenario.type_count();
    if let Some(n) = scenario.slice_types.iter().position(|t| t.cost.is_zero()) {
        return Err(Error::UnboundedRegion(n + 1));
    }
    let r = scenario.resources.values();
    let costs: Vec<&[f64]> = scenario.slice_types.iter().map(|t| t.cost.values()).collect();

    let mut feasible = Vec::new();
    let mut counts = vec![0u32; n_types];
    walk(0, &mut counts, r, &costs, &mut feasible);

    let lex_lookup: HashMap<SystemState, usize> =
        feasible.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let is_adm = |s: &SystemState| (0..n_types).any(|n| lex_lookup.contains_key(&s.incremented(n)));
    let (admissible, boundary): (Vec<_>, Vec<_>) = feasible.into_iter().partition(is_adm);
    let admissible_len = admissible.len();
    let states: Vec<SystemState> = admissible.into_iter().chain(boundary).collect();
    let lookup: HashMap<SystemState, usize> =
        states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();

    let up = states
        .iter()
        .map(|s| (0..n_types).map(|n| lookup.get(&s.incremented(n)).copied()).collect())
        .collect();
    let down = states
        .iter()
        .map(|s| {
            (0..n_types)
                .map(|n| s.decremented(n).and_then(|d| lookup.get(&d).copied()))
                .collect()
        })
        .collect();

    Ok(RegionIndex {
        states,
        admissible_len,
        lookup,
        up,
        down,
    })
}

// Depth-first walk over types in order; emits states lexicographically.
// Feasibility is recomputed from the counts so repeated additions never drift.
fn walk(n: usize, counts: &mut Vec<u32>, r: &[f64], costs: &[&[f64]], out: &mut Vec<SystemState>) {
    if n == costs.len() {
        out.push(SystemState(counts.clone()));
        return;
    }
    loop {
        walk(n + 1, counts, r, costs, out);
        counts[n] += 1;
        let fits = (0..r.len()).all(|m| {
            let a: f64 = counts
                .iter()
                .zip(costs)
                .map(|(&k, c)| f64::from(k) * c[m])
                .sum();
            r[m] - a >= -FEASIBILITY_SLACK
        });
        if !fits {
            break;
        }
    }
    counts[n] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ResourceVector, SliceTypeSpec};

    #[test]
    fn case_study_region_sizes() {
        let idx = enumerate_regions(&Scenario::case_study()).unwrap();
        assert_eq!(idx.feasible_len(), 9);
        assert_eq!(idx.admissible_len(), 7);
    }

    #[test]
    fn reference_counts_match_integer_oracle() {
        // Costs in hundredths: s1 + 5 s2 <= 100 and 5 s1 + s2 <= 100, exactly.
        let fits = |a: u32, b: u32| a + 5 * b <= 100 && 5 * a + b <= 100;
        let feasible: Vec<(u32, u32)> = (0..=100u32)
            .flat_map(|a| (0..=100u32).map(move |b| (a, b)))
            .filter(|&(a, b)| fits(a, b))
            .collect();
        let admissible = feasible
            .iter()
            .filter(|&&(a, b)| fits(a + 1, b) || fits(a, b + 1))
            .count();
        let idx = enumerate_regions(&Scenario::reference()).unwrap();
        assert_eq!(idx.feasible_len(), feasible.len());
        assert_eq!(idx.admissible_len(), admissible);
        assert_eq!((feasible.len(), admissible), (357, 348));
    }

    #[test]
    fn zero_capacity_has_only_empty_state() {
        let mut s = Scenario::case_study();
        s.resources = ResourceVector::new(vec![0.0]).unwrap();
        let idx = enumerate_regions(&s).unwrap();
        assert_eq!(idx.feasible(), &[SystemState::zeros(2)]);
        assert_eq!(idx.admissible_len(), 0);
    }

    #[test]
    fn zero_cost_is_unbounded() {
        let mut s = Scenario::case_study();
        s.slice_types[1] = SliceTypeSpec {
            cost: ResourceVector::new(vec![0.0]).unwrap(),
            ..s.slice_types[1].clone()
        };
        assert!(matches!(enumerate_regions(&s), Err(Error::UnboundedRegion(2))));
    }

    #[test]
    fn groups_are_lexicographic() {
        let idx = enumerate_regions(&Scenario::reference()).unwrap();
        assert!(idx.admissible().windows(2).all(|w| w[0] < w[1]));
        assert!(idx.boundary().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn neighbour_tables_agree_with_feasibility() {
        let sc = Scenario::case_study();
        let idx = enumerate_regions(&sc).unwrap();
        for i in 0..idx.feasible_len() {
            let s = idx.index_to_state(i);
            for n in 0..2 {
                let up = s.incremented(n);
                assert_eq!(idx.step_up(i, n).is_some(), sc.is_feasible(&up));
                if let Some(j) = idx.step_up(i, n) {
                    assert_eq!(idx.index_to_state(j), &up);
                    assert_eq!(idx.step_down(j, n), Some(i));
                }
            }
        }
    }
}
