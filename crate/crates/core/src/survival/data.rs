use serde::{Deserialize, Serialize};

use crate::error::{GmcError, Result};
use crate::regression::Source;

/// Right-censored survival data on the rescaled time axis `(0, 1]`.
///
/// `z[i]` holds subject `i`'s binary treatment indicators, in the order of
/// `treatments`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub treatments: Vec<String>,
    pub z: Vec<Vec<bool>>,
    pub source: Vec<Source>,
}

impl SurvivalDataset {
    pub fn new(
        time: Vec<f64>,
        event: Vec<bool>,
        treatments: Vec<String>,
        z: Vec<Vec<bool>>,
        source: Vec<Source>,
    ) -> Result<Self> {
        let n = time.len();
        for len in [event.len(), z.len(), source.len()] {
            if len != n {
                return Err(GmcError::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(&t) = time.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
            return Err(GmcError::InvalidData(format!("time {t} outside (0, 1]")));
        }
        for (i, row) in z.iter().enumerate() {
            if row.len() != treatments.len() {
                return Err(GmcError::DimensionMismatch {
                    expected: treatments.len(),
                    actual: row.len(),
                });
            }
            if source[i] == Source::Supplemental && row.iter().any(|&v| v) {
                return Err(GmcError::InvalidData(format!(
                    "supplemental row {i} has a nonzero treatment indicator"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = treatments.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(GmcError::InvalidData(format!("duplicate treatment `{dup}`")));
        }
        Ok(Self {
            time,
            event,
            treatments,
            z,
            source,
        })
    }

    /// One source, no treatment indicators.
    pub fn single(time: Vec<f64>, event: Vec<bool>, source: Source) -> Result<Self> {
        let n = time.len();
        Self::new(time, event, Vec::new(), vec![Vec::new(); n], vec![source; n])
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    pub fn subset(&self, idx: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            time: idx.iter().map(|&i| self.time[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
            treatments: self.treatments.clone(),
            z: idx.iter().map(|&i| self.z[i].clone()).collect(),
            source: idx.iter().map(|&i| self.source[i]).collect(),
        }
    }

    /// Rows from one source.
    pub fn select(&self, source: Source) -> SurvivalDataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.source[i] == source).collect();
        self.subset(&idx)
    }

    /// Row concatenation; both sets must carry the same treatments.
    pub fn concat(&self, other: &SurvivalDataset) -> Result<SurvivalDataset> {
        if self.treatments != other.treatments {
            return Err(GmcError::InvalidData(
                "cannot concatenate datasets with different treatments".into(),
            ));
        }
        let mut out = self.clone();
        out.time.extend_from_slice(&other.time);
        out.event.extend_from_slice(&other.event);
        out.z.extend(other.z.iter().cloned());
        out.source.extend_from_slice(&other.source);
        Ok(out)
    }

    /// Copy with every row relabelled as `source`.
    pub fn relabel(&self, source: Source) -> SurvivalDataset {
        let mut out = self.clone();
        out.source = vec![source; self.len()];
        out
    }

    /// Copy without treatment indicators.
    pub fn without_treatments(&self) -> SurvivalDataset {
        let mut out = self.clone();
        out.treatments.clear();
        out.z = vec![Vec::new(); self.len()];
        out
    }
}
