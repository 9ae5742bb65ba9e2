use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GmcError, Result};

/// Which data source an observation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Primary,
    Supplemental,
}

impl FromStr for Source {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" => Ok(Source::Primary),
            "supplemental" => Ok(Source::Supplemental),
            other => Err(GmcError::InvalidData(format!("unknown source `{other}`"))),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Primary => "primary",
            Source::Supplemental => "supplemental",
        })
    }
}

/// Tissue type of a CTp reading. Cancerous tissue is the primary source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tissue {
    Cancerous,
    Noncancerous,
}

impl Tissue {
    /// Short label used in parameter names.
    pub fn code(self) -> &'static str {
        match self {
            Tissue::Cancerous => "T",
            Tissue::Noncancerous => "N",
        }
    }
}

impl FromStr for Tissue {
    type Err = GmcError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cancerous" | "T" => Ok(Tissue::Cancerous),
            "noncancerous" | "N" => Ok(Tissue::Noncancerous),
            other => Err(GmcError::InvalidData(format!("unknown tissue `{other}`"))),
        }
    }
}

impl fmt::Display for Tissue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tissue::Cancerous => "cancerous",
            Tissue::Noncancerous => "noncancerous",
        })
    }
}

/// Individual / region / tissue labels for hierarchical CTp data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub individual: Vec<i64>,
    pub region: Vec<i64>,
    pub tissue: Vec<Tissue>,
}

/// Gaussian-response observations `(y, t)` tagged by source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub source: Vec<Source>,
    pub hierarchy: Option<Hierarchy>,
}

impl RegressionDataset {
    pub fn new(
        y: Vec<f64>,
        t: Vec<f64>,
        source: Vec<Source>,
        hierarchy: Option<Hierarchy>,
    ) -> Result<Self> {
        let n = y.len();
        for len in [t.len(), source.len()] {
            if len != n {
                return Err(GmcError::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(h) = &hierarchy {
            for len in [h.individual.len(), h.region.len(), h.tissue.len()] {
                if len != n {
                    return Err(GmcError::DimensionMismatch {
                        expected: n,
                        actual: len,
                    });
                }
            }
        }
        if let Some(&v) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(GmcError::DomainError { value: v });
        }
        if let Some(&v) = y.iter().find(|v| !v.is_finite()) {
            return Err(GmcError::InvalidData(format!("non-finite response {v}")));
        }
        Ok(Self {
            y,
            t,
            source,
            hierarchy,
        })
    }

    /// All rows from one source, no hierarchy.
    pub fn single(y: Vec<f64>, t: Vec<f64>, source: Source) -> Result<Self> {
        let n = y.len();
        Self::new(y, t, vec![source; n], None)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Rows with the given source label.
    pub fn select(&self, source: Source) -> RegressionDataset {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.source[i] == source).collect();
        self.subset(&keep)
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> RegressionDataset {
        RegressionDataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            source: idx.iter().map(|&i| self.source[i]).collect(),
            hierarchy: self.hierarchy.as_ref().map(|h| Hierarchy {
                individual: idx.iter().map(|&i| h.individual[i]).collect(),
                region: idx.iter().map(|&i| h.region[i]).collect(),
                tissue: idx.iter().map(|&i| h.tissue[i]).collect(),
            }),
        }
    }

    /// Concatenation of `self` and `other`; hierarchy is kept only if both have it.
    pub fn concat(&self, other: &RegressionDataset) -> RegressionDataset {
        let cat = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        let hierarchy = match (&self.hierarchy, &other.hierarchy) {
            (Some(a), Some(b)) => Some(Hierarchy {
                individual: a.individual.iter().chain(&b.individual).copied().collect(),
                region: a.region.iter().chain(&b.region).copied().collect(),
                tissue: a.tissue.iter().chain(&b.tissue).copied().collect(),
            }),
            _ => None,
        };
        RegressionDataset {
            y: cat(&self.y, &other.y),
            t: cat(&self.t, &other.t),
            source: self.source.iter().chain(&other.source).copied().collect(),
            hierarchy,
        }
    }
}
