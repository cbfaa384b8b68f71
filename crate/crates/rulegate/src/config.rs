//! Run configuration shared by every subcommand.
//!
//! Values come from defaults, then an optional TOML (or JSON) file, then
//! command-line flags. The resolved configuration is echoed into every
//! artifact. Execution settings that cannot change results (thread count,
//! output directory) are kept out of it so artifacts stay byte-identical
//! across machines and thread counts.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rulegate_core::labeler::{Breadth, Depth, LabelConfig, LabelKind};
use rulegate_core::RuleId;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instance shape `J x M`, written as `"10x10"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scale {
    pub jobs: usize,
    pub machines: usize,
}

impl Scale {
    pub const fn new(jobs: usize, machines: usize) -> Self {
        Scale { jobs, machines }
    }

    /// The three benchmark shapes.
    pub const STANDARD: [Scale; 3] = [Scale::new(6, 6), Scale::new(10, 10), Scale::new(15, 10)];
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.jobs, self.machines)
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("scale must look like 10x10, got {s:?}"));
        let (j, m) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let jobs: usize = j.trim().parse().map_err(|_| bad())?;
        let machines: usize = m.trim().parse().map_err(|_| bad())?;
        if jobs == 0 || machines == 0 {
            return Err(bad());
        }
        Ok(Scale { jobs, machines })
    }
}

/// Serde through `Display` / `FromStr`.
pub(crate) mod as_string {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

pub(crate) mod as_string_vec {
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};
    use std::fmt::Display;
    use std::str::FromStr;

    pub fn serialize<T: Display, S: Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&x.to_string())?;
        }
        seq.end()
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        // accept both ["full", "3"] and [3, "full"]
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        raw.into_iter()
            .map(|v| {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                s.parse().map_err(D::Error::custom)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "as_string")]
    pub scale: Scale,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub states_per_instance: usize,
    pub trajectories_per_instance: usize,
    #[serde(with = "as_string")]
    pub depth: Depth,
    #[serde(with = "as_string")]
    pub breadth: Breadth,
    pub label_kinds: Vec<LabelKind>,
    pub subset_includes_default: bool,
    pub k: usize,
    pub epsilon: f64,
    pub lambda: f64,
    /// Extra policy specs for `eval`; empty means the standard method set.
    pub policies: Vec<String>,
    pub random_hh_seeds: usize,
    pub oracle_includes_random: bool,
    pub ablation_lambdas: Vec<f64>,
    #[serde(with = "as_string_vec")]
    pub sweep_depths: Vec<Depth>,
    #[serde(with = "as_string_vec")]
    pub sweep_breadths: Vec<Breadth>,
    pub sweep_train_count: usize,
    #[serde(with = "as_string")]
    pub probe_test_scale: Scale,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scale: Scale::new(10, 10),
            train_count: 150,
            test_count: 40,
            seed: 0,
            states_per_instance: 25,
            trajectories_per_instance: 3,
            depth: Depth::Full,
            breadth: Breadth::Full,
            label_kinds: vec![LabelKind::Regret, LabelKind::Normalized],
            subset_includes_default: true,
            k: rulegate_core::knn::DEFAULT_K,
            epsilon: rulegate_core::knn::DEFAULT_EPSILON,
            lambda: 1.0,
            policies: Vec::new(),
            random_hh_seeds: 5,
            oracle_includes_random: false,
            ablation_lambdas: vec![0.5, 1.0, 2.0],
            sweep_depths: vec![Depth::Full, Depth::Steps(1), Depth::Steps(3), Depth::Steps(5), Depth::Steps(10)],
            sweep_breadths: vec![Breadth::Full, Breadth::Count(3), Breadth::Count(5)],
            sweep_train_count: 48,
            probe_test_scale: Scale::new(15, 10),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file (JSON when the extension is `.json`); missing keys
    /// keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("train_count", self.train_count),
            ("test_count", self.test_count),
            ("states_per_instance", self.states_per_instance),
            ("trajectories_per_instance", self.trajectories_per_instance),
            ("k", self.k),
            ("random_hh_seeds", self.random_hh_seeds),
            ("sweep_train_count", self.sweep_train_count),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.lambda >= 0.0) || self.ablation_lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config("lambda values must be non-negative".into()));
        }
        if self.label_kinds.is_empty() {
            return Err(Error::Config("label_kinds must name at least one kind".into()));
        }
        self.label_config(RuleId::Fifo, LabelKind::Regret).validate()?;
        Ok(())
    }

    pub fn label_config(&self, default_rule: RuleId, kind: LabelKind) -> LabelConfig {
        LabelConfig {
            states_per_instance: self.states_per_instance,
            trajectories_per_instance: self.trajectories_per_instance,
            depth: self.depth,
            breadth: self.breadth,
            label_kind: kind,
            default_rule,
            subset_includes_default: self.subset_includes_default,
            seed: self.seed,
        }
    }

    /// The configuration as embedded in artifacts.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_parsing() {
        assert_eq!("15x10".parse::<Scale>().unwrap(), Scale::new(15, 10));
        assert!("15".parse::<Scale>().is_err());
        assert!("0x3".parse::<Scale>().is_err());
        assert_eq!(Scale::new(6, 6).to_string(), "6x6");
    }

    #[test]
    fn toml_overrides_defaults() {
        let text = r#"
            scale = "6x6"
            test_count = 10
            depth = "3"
            sweep_depths = ["full", 1]
            label_kinds = ["regret"]
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.scale, Scale::new(6, 6));
        assert_eq!(cfg.test_count, 10);
        assert_eq!(cfg.train_count, 150);
        assert_eq!(cfg.depth, Depth::Steps(3));
        assert_eq!(cfg.sweep_depths, vec![Depth::Full, Depth::Steps(1)]);
        assert_eq!(cfg.label_kinds, vec![LabelKind::Regret]);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::default();
        let back: RunConfig = serde_json::from_value(cfg.echo()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn zero_counts_are_rejected() {
        let cfg = RunConfig { test_count: 0, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
