//! Resource pool, slice-type catalog and the feasibility test.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::region::SystemState;

/// Absolute slack on `r_m - a_m`; absorbs decimal-fraction rounding in costs.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// A vector of non-negative abstract resource units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("resource vector must have at least one entry"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid(format!("resource entry {v} is not a non-negative number")));
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

/// `M x N` matrix whose column `n` is the resource bundle of slice type `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    columns: Vec<ResourceVector>,
}

impl CostMatrix {
    pub fn from_columns(columns: Vec<ResourceVector>) -> Result<Self> {
        let m = columns.first().map(|c| c.len()).unwrap_or(0);
        if columns.iter().any(|c| c.len() != m) {
            return Err(invalid("cost columns have different resource dimensions"));
        }
        Ok(Self { columns })
    }

    /// Builds the matrix from `M` rows of `N` entries each.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("cost rows have different lengths"));
        }
        let columns = (0..n)
            .map(|j| ResourceVector::new(rows.iter().map(|r| r[j]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(columns)
    }

    pub fn resource_dim(&self) -> usize {
        self.columns.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn type_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, n: usize) -> &ResourceVector {
        &self.columns[n]
    }
}

/// Resources held by the active slices, `a = C s`.
pub fn assigned_resources(costs: &CostMatrix, state: &SystemState) -> Result<ResourceVector> {
    if state.len() != costs.type_count() {
        return Err(invalid(format!(
            "state has {} entries but cost matrix has {} slice types",
            state.len(),
            costs.type_count()
        )));
    }
    let mut a = vec![0.0; costs.resource_dim()];
    for (n, &count) in state.counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        for (slot, c) in a.iter_mut().zip(costs.column(n).values()) {
            *slot += c * f64::from(count);
        }
    }
    Ok(ResourceVector(a))
}

/// One slice type of the catalog, in the on-disk field naming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTypeSpec {
    pub cost: ResourceVector,
    /// Requests per period.
    pub arrival_rate: f64,
    /// Mean slice lifetime in periods (`1 / release_rate`).
    pub mean_lifetime: f64,
    /// One-time cost to issue a request.
    #[serde(default)]
    pub issue_cost: f64,
    /// Tenant's cost per period spent waiting.
    pub waiting_cost_rate: f64,
    /// Tenant's profit per period of slice lifetime.
    pub profit_rate: f64,
    /// Operator-side utility per active slice per period; defaults to the waiting cost rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_rate: Option<f64>,
    #[serde(default)]
    pub balking_exponent: f64,
    #[serde(default)]
    pub reneging_rate: f64,
}

impl SliceTypeSpec {
    pub fn release_rate(&self) -> f64 {
        1.0 / self.mean_lifetime
    }

    pub fn utility_rate(&self) -> f64 {
        self.utility_rate.unwrap_or(self.waiting_cost_rate)
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |what: &str| invalid(format!("slice type {}: {what}", idx + 1));
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(bad("arrival_rate must be a non-negative number"));
        }
        if !(self.mean_lifetime > 0.0 && self.mean_lifetime.is_finite()) {
            return Err(bad("mean_lifetime must be positive"));
        }
        if !(self.profit_rate > 0.0) {
            return Err(bad("profit_rate must be positive"));
        }
        if self.issue_cost < 0.0 || self.waiting_cost_rate < 0.0 {
            return Err(bad("costs must be non-negative"));
        }
        if self.utility_rate.is_some_and(|u| u < 0.0) {
            return Err(bad("utility_rate must be non-negative"));
        }
        if self.balking_exponent < 0.0 || self.reneging_rate < 0.0 {
            return Err(bad("balking_exponent and reneging_rate must be non-negative"));
        }
        Ok(())
    }
}

/// Resource pool plus slice-type catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub resources: ResourceVector,
    pub slice_types: Vec<SliceTypeSpec>,
}

impl Scenario {
    pub fn new(resources: ResourceVector, slice_types: Vec<SliceTypeSpec>) -> Result<Self> {
        let s = Self {
            resources,
            slice_types,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slice_types.is_empty() {
            return Err(invalid("scenario defines no slice types"));
        }
        let m = self.resources.len();
        if m == 0 {
            return Err(invalid("resource pool must have at least one dimension"));
        }
        for (i, t) in self.slice_types.iter().enumerate() {
            if t.cost.len() != m {
                return Err(invalid(format!(
                    "slice type {} cost has {} entries, pool has {m}",
                    i + 1,
                    t.cost.len()
                )));
            }
            t.validate(i)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        // ResourceVector is transparent, so re-check entries that bypassed `new`.
        ResourceVector::new(s.resources.0.clone())?;
        for t in &s.slice_types {
            ResourceVector::new(t.cost.0.clone())?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn type_count(&self) -> usize {
        self.slice_types.len()
    }

    pub fn resource_dim(&self) -> usize {
        self.resources.len()
    }

    pub fn cost_matrix(&self) -> CostMatrix {
        CostMatrix {
            columns: self.slice_types.iter().map(|t| t.cost.clone()).collect(),
        }
    }

    /// `r_m - a_m >= 0` for every resource dimension, up to [`FEASIBILITY_SLACK`].
    pub fn is_feasible(&self, state: &SystemState) -> bool {
        match assigned_resources(&self.cost_matrix(), state) {
            Ok(a) => self
                .resources
                .values()
                .iter()
                .zip(a.values())
                .all(|(r, a)| r - a >= -FEASIBILITY_SLACK),
            Err(_) => false,
        }
    }

    /// Stable content hash used to bind strategy files to their scenario.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..16])
    }

    /// Two-type, two-resource scenario used throughout the evaluation campaigns.
    pub fn reference() -> Self {
        let t = |cost: [f64; 2], lambda: f64, life: f64, u: f64, zeta: f64| SliceTypeSpec {
            cost: ResourceVector(cost.to_vec()),
            arrival_rate: lambda,
            mean_lifetime: life,
            issue_cost: 0.0,
            waiting_cost_rate: u,
            profit_rate: zeta,
            utility_rate: None,
            balking_exponent: 0.0,
            reneging_rate: 0.0,
        };
        Self {
            resources: ResourceVector(vec![1.0, 1.0]),
            slice_types: vec![
                t([0.01, 0.05], 6.0, 5.0, 1.0, 8.0),
                t([0.05, 0.01], 10.0, 3.0, 1.5, 12.0),
            ],
        }
    }

    /// One-dimensional pool with a large and a small slice type.
    pub fn case_study() -> Self {
        let t = |c: f64| SliceTypeSpec {
            cost: ResourceVector(vec![c]),
            arrival_rate: 1.0,
            mean_lifetime: 1.0,
            issue_cost: 0.0,
            waiting_cost_rate: 1.0,
            profit_rate: 1.0,
            utility_rate: None,
            balking_exponent: 0.0,
            reneging_rate: 0.0,
        };
        Self {
            resources: ResourceVector(vec![1.0]),
            slice_types: vec![t(0.6), t(0.2)],
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_json(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn case_study_assignment() {
        let c = CostMatrix::from_rows(&[vec![0.6, 0.2]]).unwrap();
        let a = assigned_resources(&c, &SystemState::new(vec![1, 2])).unwrap();
        assert_abs_diff_eq!(a.values()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_state_assigns_nothing() {
        let c = Scenario::reference().cost_matrix();
        let a = assigned_resources(&c, &SystemState::zeros(2)).unwrap();
        assert!(a.is_zero());
    }

    #[test]
    fn two_resource_assignment() {
        let c = CostMatrix::from_rows(&[vec![0.01, 0.05], vec![0.05, 0.01]]).unwrap();
        let a = assigned_resources(&c, &SystemState::new(vec![10, 10])).unwrap();
        assert_abs_diff_eq!(a.values()[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(a.values()[1], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let c = CostMatrix::from_rows(&[vec![0.6, 0.2]]).unwrap();
        let err = assigned_resources(&c, &SystemState::new(vec![1, 2, 3])).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn case_study_feasibility() {
        let s = Scenario::case_study();
        assert!(s.is_feasible(&SystemState::new(vec![1, 2])));
        assert!(!s.is_feasible(&SystemState::new(vec![2, 0])));
        assert!(s.is_feasible(&SystemState::zeros(2)));
    }

    #[test]
    fn json_round_trip_keeps_fingerprint() {
        let s = Scenario::reference();
        let text = serde_json::to_string_pretty(&s).unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fingerprint(), s.fingerprint());
        assert_ne!(Scenario::case_study().fingerprint(), s.fingerprint());
    }

    #[test]
    fn rejects_non_positive_profit() {
        let mut s = Scenario::reference();
        s.slice_types[0].profit_rate = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn utility_rate_defaults_to_waiting_cost() {
        let s = Scenario::reference();
        assert_eq!(s.slice_types[1].utility_rate(), 1.5);
        assert_abs_diff_eq!(s.slice_types[0].release_rate(), 0.2);
    }
}
