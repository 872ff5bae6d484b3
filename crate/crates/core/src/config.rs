//! Key-value configuration files shared by the command-line tools.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashcore::DifficultyTarget;
use crate::ledger::{LedgerParams, DEFAULT_MIN_EDIT_FEE};
use crate::redaction::{ParamsError, PolicyParams, Ratio};

/// Chain family a config applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    #[default]
    Single,
    Ext,
    Ledger,
}

impl ChainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChainKind::Single => "single",
            ChainKind::Ext => "ext",
            ChainKind::Ledger => "ledger",
        }
    }
}

impl std::str::FromStr for ChainKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(ChainKind::Single),
            "ext" => Ok(ChainKind::Ext),
            "ledger" => Ok(ChainKind::Ledger),
            _ => Err(format!("unknown mode {s:?}; expected single, ext or ledger")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot write config: {0}")]
    Write(#[from] toml::ser::Error),
    #[error("rho: {0}")]
    Rho(String),
    #[error("difficulty_hex: {0}")]
    Difficulty(#[from] crate::hashcore::HexError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// `rho` may be written as a decimal number or as a string (`"3/5"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum RhoValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawConfig {
    k: usize,
    ell: usize,
    rho: RhoValue,
    difficulty_hex: String,
    #[serde(default = "default_fee")]
    min_edit_fee: u64,
    #[serde(default)]
    mode: ChainKind,
}

fn default_fee() -> u64 {
    DEFAULT_MIN_EDIT_FEE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Config {
    pub policy: PolicyParams,
    pub difficulty: DifficultyTarget,
    pub min_edit_fee: u64,
    pub mode: ChainKind,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            policy: PolicyParams::new(6, 5, Ratio::new(3, 5).expect("non-zero")).expect("non-zero"),
            difficulty: DifficultyTarget::pow2(248),
            min_edit_fee: DEFAULT_MIN_EDIT_FEE,
            mode: ChainKind::Single,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let rho = match raw.rho {
            RhoValue::Number(x) => x.to_string().parse::<Ratio>(),
            RhoValue::Text(s) => s.parse::<Ratio>(),
        }
        .map_err(|e| ConfigError::Rho(e.to_string()))?;
        Ok(Config {
            policy: PolicyParams::new(raw.k, raw.ell, rho)?,
            difficulty: DifficultyTarget::from_hex(&raw.difficulty_hex)?,
            min_edit_fee: raw.min_edit_fee,
            mode: raw.mode,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        let raw = RawConfig {
            k: self.policy.k,
            ell: self.policy.ell,
            rho: RhoValue::Text(self.policy.rho.to_string()),
            difficulty_hex: self.difficulty.to_hex(),
            min_edit_fee: self.min_edit_fee,
            mode: self.mode,
        };
        Ok(toml::to_string(&raw)?)
    }

    pub fn ledger_params(&self) -> LedgerParams {
        LedgerParams { policy: self.policy, min_edit_fee: self.min_edit_fee }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_rho() {
        let text = "k = 6\nell = 5\nrho = 0.6\ndifficulty_hex = \"00ffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffff\"\n";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.policy.rho, Ratio::new(3, 5).unwrap());
        assert_eq!(c.mode, ChainKind::Single);
        assert_eq!(c.min_edit_fee, DEFAULT_MIN_EDIT_FEE);
        let c2 = Config::parse(&text.replace("0.6", "\"3/5\"")).unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn roundtrips_through_toml() {
        let c = Config { mode: ChainKind::Ext, ..Config::default() };
        assert_eq!(Config::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let base = "k = 6\nell = 5\nrho = 0.6\ndifficulty_hex = \"ff\"\n";
        assert!(matches!(Config::parse(base), Err(ConfigError::Difficulty(_))));
        assert!(matches!(Config::parse("k = 6\n"), Err(ConfigError::Parse(_))));
        let zero = "k = 0\nell = 5\nrho = 0.6\ndifficulty_hex = \"00ff000000000000000000000000000000000000000000000000000000000000\"\n";
        assert!(matches!(Config::parse(zero), Err(ConfigError::Params(_))));
    }
}
