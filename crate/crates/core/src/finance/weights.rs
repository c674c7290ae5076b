use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MrcError, Result};

const DAX_2010: &str = include_str!("../../data/dax_weights.csv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub name: String,
    pub weight_percent: f64,
}

/// Index composition in percent, as published (rounded).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketWeights {
    pub entries: Vec<WeightEntry>,
}

impl MarketWeights {
    /// DAX composition of 4 October 2010.
    pub fn dax_2010() -> Self {
        parse_weights(DAX_2010.as_bytes()).expect("bundled weights parse")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_percent(&self) -> f64 {
        self.entries.iter().map(|e| e.weight_percent).sum()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.weight_percent)
    }

    /// Weights rescaled to fractions summing to one.
    pub fn fractions(&self) -> Vec<f64> {
        let total = self.total_percent();
        self.entries.iter().map(|e| e.weight_percent / total).collect()
    }
}

/// Parses `name,weight_percent` CSV with a header row.
pub fn parse_weights<R: Read>(reader: R) -> Result<MarketWeights> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let entries = rdr
        .deserialize::<WeightEntry>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| MrcError::Parse(format!("weights: {e}")))?;
    if entries.is_empty() {
        return Err(MrcError::Parse("weights: no entries".into()));
    }
    if let Some(e) = entries.iter().find(|e| !(e.weight_percent >= 0.0 && e.weight_percent.is_finite())) {
        return Err(MrcError::Parse(format!("weights: invalid weight {} for {}", e.weight_percent, e.name)));
    }
    let w = MarketWeights { entries };
    let total = w.total_percent();
    if (total - 100.0).abs() > 0.5 {
        return Err(MrcError::WeightSum(total));
    }
    Ok(w)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<MarketWeights> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| MrcError::Parse(format!("cannot open weights file {}: {e}", path.display())))?;
    parse_weights(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_dax() {
        let w = MarketWeights::dax_2010();
        assert_eq!(w.len(), 30);
        assert_eq!(w.get("SIEMENS"), Some(9.91));
        assert_eq!(w.get("MERCK"), Some(0.74));
        let t = w.total_percent();
        assert!((99.98 - 1e-9..=100.02 + 1e-9).contains(&t), "{t}");
        assert!((w.fractions().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn malformed_files() {
        assert!(matches!(parse_weights("".as_bytes()), Err(MrcError::Parse(_))));
        assert!(matches!(parse_weights("name,weight_percent\n".as_bytes()), Err(MrcError::Parse(_))));
        assert!(matches!(parse_weights("name,weight_percent\nA,x\n".as_bytes()), Err(MrcError::Parse(_))));
        assert!(matches!(parse_weights("name,weight_percent\nA,60\nB,30\n".as_bytes()), Err(MrcError::WeightSum(_))));
        assert!(matches!(load_weights("/nonexistent/weights.csv"), Err(MrcError::Parse(_))));
    }
}
