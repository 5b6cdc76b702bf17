//! Complete run configuration, one document for every stage.

use serde::{Deserialize, Serialize};

use crate::backtest::BacktestConfig;
use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::indicators::IndicatorConfig;
use crate::labeling::LabelConfig;
use crate::marketdata::{LoadOptions, DEFAULT_SPLIT};
use crate::qasa::{TokenMode, Variant};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub window: usize,
    pub n_layers: usize,
    pub token_mode: TokenMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Sequence,
            window: 8,
            n_layers: 2,
            token_mode: TokenMode::LogReturns,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let (train, val, test) = DEFAULT_SPLIT;
        Self { train, val, test }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: LoadOptions,
    pub indicators: IndicatorConfig,
    pub labels: LabelConfig,
    pub split: SplitConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub backtest: BacktestConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.data.bar_interval <= 0 {
            return Err(Error::param("bar_interval", "must be positive"));
        }
        self.indicators.validate()?;
        self.labels.validate()?;
        let s = self.split;
        if [s.train, s.val, s.test].iter().any(|f| !(*f > 0.0)) || (s.train + s.val + s.test - 1.0).abs() > 1e-9 {
            return Err(Error::param("split", "fractions must be positive and sum to 1"));
        }
        if self.model.window < 2 {
            return Err(Error::param("window", "must be >= 2"));
        }
        if self.model.n_layers == 0 {
            return Err(Error::param("n_layers", "must be >= 1"));
        }
        self.train.validate()?;
        self.backtest.validate()
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            variant: self.model.variant,
            window: self.model.window,
            token_mode: self.model.token_mode,
            label_warmup: self.labels.warmup(),
            split: (self.split.train, self.split.val, self.split.test),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_fill_defaults_and_unknown_keys_fail() {
        let cfg: RunConfig = serde_json::from_str(r#"{"model": {"variant": "hybrid"}}"#).unwrap();
        assert_eq!(cfg.model.variant, Variant::Hybrid);
        assert_eq!(cfg.model.window, 8);
        assert!(serde_json::from_str::<RunConfig>(r#"{"model": {"qubits": 3}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = RunConfig::default();
        cfg.split.test = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.backtest.fee_bps = -1.0;
        assert!(cfg.validate().is_err());
    }
}
