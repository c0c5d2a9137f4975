use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named observables sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    /// Columns in insertion order.
    pub columns: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            columns: Vec::new(),
        }
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.times.len() {
            return Err(Error::Shape(format!(
                "column '{name}' has {} values for {} times",
                values.len(),
                self.times.len()
            )));
        }
        if self.column(&name).is_some() {
            return Err(Error::Parameter(format!("duplicate column '{name}'")));
        }
        self.columns.push((name, values));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.times.windows(2).all(|w| w[0] < w[1])
    }
}

/// Column name for the mass carried by `|v| > eps`.
pub fn region_column(eps: f64) -> String {
    format!("region_mass({eps})")
}
