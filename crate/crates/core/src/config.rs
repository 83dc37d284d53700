//! JSON configuration files for single instances and sweeps.
//!
//! Instance:
//!
//! ```json
//! {"sigma2": 1.0, "rates": [1, 1], "gains": [[3, 1], [1, 2]],
//!  "efficiency": {"kind": "exponential", "M": 100}}
//! ```
//!
//! Unknown keys are rejected. Parse errors carry the line and column.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::channel::ChannelMatrix;
use crate::efficiency::{EfficiencyKind, EfficiencyModel};
use crate::error::{Error, Result};
use crate::game::GameInstance;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub sigma2: f64,
    pub rates: [f64; 2],
    /// One row of per-carrier gains per user.
    pub gains: [Vec<f64>; 2],
    pub efficiency: EfficiencyKind,
}

impl InstanceConfig {
    pub fn into_instance(self) -> Result<GameInstance> {
        let [g1, g2] = self.gains;
        let channel = ChannelMatrix::new(g1, g2)?;
        GameInstance::new(channel, self.sigma2, self.rates, EfficiencyModel::new(self.efficiency)?)
    }
}

/// Parses JSON text, reporting syntax and schema errors as [`Error::Config`].
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
    })
}

/// Reads and validates an instance file.
pub fn load_instance(path: &std::path::Path) -> Result<GameInstance> {
    let text = read(path)?;
    parse_json::<InstanceConfig>(&text)?.into_instance()
}

pub(crate) fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"sigma2": 1.0, "rates": [1, 1], "gains": [[3, 1], [1, 2]],
        "efficiency": {"kind": "exponential", "M": 100}}"#;

    #[test]
    fn parses_fixture() {
        let inst = parse_json::<InstanceConfig>(GOOD).unwrap().into_instance().unwrap();
        assert_eq!(inst.carriers(), 2);
        assert!((inst.gamma_star() - 6.4).abs() < 0.1);
        let cx = r#"{"sigma2": 2, "rates": [1, 3], "gains": [[100, 1], [100, 1]],
            "efficiency": {"kind": "counterexample"}}"#;
        let inst = parse_json::<InstanceConfig>(cx).unwrap().into_instance().unwrap();
        assert!((inst.gamma_star() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let missing = r#"{"rates": [1, 1], "gains": [[3, 1], [1, 2]],
            "efficiency": {"kind": "exponential", "M": 100}}"#;
        let err = parse_json::<InstanceConfig>(missing).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("sigma2") && m.contains("line")));

        let unknown = GOOD.replace("\"rates\"", "\"noise\": 1, \"rates\"");
        assert!(matches!(parse_json::<InstanceConfig>(&unknown), Err(Error::Config(_))));

        let ragged = GOOD.replace("[1, 2]]", "[1, 2, 3]]");
        let cfg = parse_json::<InstanceConfig>(&ragged).unwrap();
        assert!(matches!(cfg.into_instance(), Err(Error::Validation(_))));

        let bad_m = GOOD.replace("100", "1");
        let cfg = parse_json::<InstanceConfig>(&bad_m).unwrap();
        assert!(cfg.into_instance().is_err());
    }
}
