//! Preference vectors and the preference-matrix admission strategy.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::region::RegionIndex;
use crate::scenario::Scenario;

/// Permutation of `{0, 1, ..., N}`; `0` reserves resources and stops the walk.
///
/// Entries `k > 0` name slice type `k` (1-based, as on disk).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u16>", into = "Vec<u16>")]
pub struct PreferenceVector(Vec<u16>);

impl PreferenceVector {
    pub fn new(order: Vec<u16>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &v in &order {
            let slot = seen
                .get_mut(v as usize)
                .ok_or_else(|| invalid(format!("preference entry {v} out of range 0..{}", order.len())))?;
            if *slot {
                return Err(invalid(format!("preference entry {v} repeated")));
            }
            *slot = true;
        }
        if order.len() < 2 {
            return Err(invalid("preference vector needs at least one slice type"));
        }
        Ok(Self(order))
    }

    /// `[1, 2, ..., N, 0]`.
    pub fn identity(n_types: usize) -> Self {
        Self((1..=n_types as u16).chain(std::iter::once(0)).collect())
    }

    /// Prefer type `first` (1-based), then the remaining types in order, reserve last.
    pub fn prefer(first: u16, n_types: usize) -> Result<Self> {
        if first == 0 || first as usize > n_types {
            return Err(invalid(format!("slice type {first} out of range 1..={n_types}")));
        }
        let rest = (1..=n_types as u16).filter(|&k| k != first);
        Ok(Self(std::iter::once(first).chain(rest).chain(std::iter::once(0)).collect()))
    }

    pub fn entries(&self) -> &[u16] {
        &self.0
    }

    pub fn type_count(&self) -> usize {
        self.0.len() - 1
    }

    /// Zero-based slice types in preference order, up to the reserve element.
    pub fn served_types(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .take_while(|&&v| v != 0)
            .map(|&v| v as usize - 1)
    }
}

impl TryFrom<Vec<u16>> for PreferenceVector {
    type Error = Error;

    fn try_from(v: Vec<u16>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PreferenceVector> for Vec<u16> {
    fn from(p: PreferenceVector) -> Self {
        p.0
    }
}

impl std::str::FromStr for PreferenceVector {
    type Err = Error;

    /// Parses `"1,2,0"`.
    fn from_str(s: &str) -> Result<Self> {
        let order = s
            .split(',')
            .map(|t| t.trim().parse::<u16>().map_err(|e| invalid(format!("bad preference entry {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }
}

/// One preference vector per admissible state (the `(N+1) x |A|` matrix).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    columns: Vec<PreferenceVector>,
}

impl Strategy {
    pub fn new(region: &RegionIndex, columns: Vec<PreferenceVector>) -> Result<Self> {
        if columns.len() != region.admissible_len() {
            return Err(invalid(format!(
                "strategy has {} columns, region has {} admissible states",
                columns.len(),
                region.admissible_len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.type_count() != region.type_count()) {
            return Err(invalid(format!(
                "preference vector {:?} does not cover {} slice types",
                c.entries(),
                region.type_count()
            )));
        }
        Ok(Self { columns })
    }

    /// Column for admissible index `idx`.
    pub fn column(&self, idx: usize) -> &PreferenceVector {
        &self.columns[idx]
    }

    pub fn columns(&self) -> &[PreferenceVector] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// The same preference vector in every admissible state.
pub fn naive_strategy(region: &RegionIndex, order: &PreferenceVector) -> Result<Strategy> {
    Strategy::new(region, vec![order.clone(); region.admissible_len()])
}

/// Independently uniform preference vector per admissible state.
///
/// With `reserve_last` the reserve element is pinned to the final position and
/// only the slice types are shuffled.
pub fn random_strategy<R: Rng + ?Sized>(region: &RegionIndex, rng: &mut R, reserve_last: bool) -> Strategy {
    let n = region.type_count() as u16;
    let columns = (0..region.admissible_len())
        .map(|_| {
            let mut v: Vec<u16> = if reserve_last { (1..=n).collect() } else { (0..=n).collect() };
            v.shuffle(rng);
            if reserve_last {
                v.push(0);
            }
            PreferenceVector(v)
        })
        .collect();
    Strategy { columns }
}

/// On-disk strategy: columns plus the fingerprint of the scenario they belong to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyFile {
    pub scenario_fingerprint: String,
    pub columns: Vec<PreferenceVector>,
}

impl StrategyFile {
    pub fn from_strategy(scenario: &Scenario, strategy: &Strategy) -> Self {
        Self {
            scenario_fingerprint: scenario.fingerprint(),
            columns: strategy.columns.clone(),
        }
    }

    /// Validates the fingerprint and shape against `scenario`.
    pub fn into_strategy(self, scenario: &Scenario, region: &RegionIndex) -> Result<Strategy> {
        let expected = scenario.fingerprint();
        if self.scenario_fingerprint != expected {
            return Err(Error::FingerprintMismatch {
                expected,
                found: self.scenario_fingerprint,
            });
        }
        Strategy::new(region, self.columns)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
