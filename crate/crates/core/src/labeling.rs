//! Rebalance labels from the moving-average deviation rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::ma_ratio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// `P/MA - 1 > tau`
    UpperOnly,
    /// `|P/MA - 1| > tau`
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    pub ma_window: usize,
    pub tau: f64,
    pub mode: LabelMode,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            ma_window: 20,
            tau: 0.02,
            mode: LabelMode::UpperOnly,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::param("tau", "must be positive"));
        }
        if self.ma_window < 2 {
            return Err(Error::param("ma_window", "must be >= 2"));
        }
        Ok(())
    }

    /// First bar index carrying a meaningful label.
    pub fn warmup(&self) -> usize {
        self.ma_window - 1
    }
}

/// One label per bar; bars inside the MA warm-up are labelled 0.
/// The comparison is strict: a deviation of exactly `tau` is not a signal.
pub fn label_series(prices: &[f64], cfg: &LabelConfig) -> Result<Vec<u8>> {
    cfg.validate()?;
    let ratio = ma_ratio(prices, cfg.ma_window)?;
    Ok(ratio
        .iter()
        .map(|&r| {
            let dev = match cfg.mode {
                LabelMode::UpperOnly => r,
                LabelMode::TwoSided => r.abs(),
            };
            u8::from(dev > cfg.tau)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A 20-bar window whose mean is exactly 100 and whose last price is
    /// `last`.
    fn with_ma_100(last: f64) -> Vec<f64> {
        let mut p = vec![100.0; 18];
        p.push(200.0 - last);
        p.push(last);
        p
    }

    #[test]
    fn threshold_examples() {
        let cfg = LabelConfig::default();
        assert_eq!(*label_series(&with_ma_100(103.0), &cfg).unwrap().last().unwrap(), 1);
        assert_eq!(*label_series(&with_ma_100(102.0), &cfg).unwrap().last().unwrap(), 0);
        assert!(label_series(&[50.0; 40], &cfg).unwrap().iter().all(|&y| y == 0));
        assert!(label_series(&[50.0; 19], &cfg).is_err());
    }

    #[test]
    fn exact_boundary_is_not_a_signal() {
        let ratio = ma_ratio(&with_ma_100(102.0), 20).unwrap();
        assert_eq!(ratio[19], 0.02);

        let cfg = LabelConfig {
            ma_window: 2,
            tau: 0.25,
            mode: LabelMode::UpperOnly,
        };
        // MA of [1, 2] = 1.5 -> 2/1.5 - 1 = 1/3 > 0.25
        assert_eq!(label_series(&[1.0, 2.0], &cfg).unwrap()[1], 1);
        // MA of [3, 5] = 4 -> 5/4 - 1 = 0.25 exactly, strict inequality
        assert_eq!(label_series(&[3.0, 5.0], &cfg).unwrap()[1], 0);
    }

    #[test]
    fn two_sided_catches_drops() {
        let cfg = LabelConfig {
            mode: LabelMode::TwoSided,
            ..LabelConfig::default()
        };
        assert_eq!(*label_series(&with_ma_100(97.0), &cfg).unwrap().last().unwrap(), 1);
        let upper = LabelConfig::default();
        assert_eq!(*label_series(&with_ma_100(97.0), &upper).unwrap().last().unwrap(), 0);
    }

    proptest! {
        #[test]
        fn labels_scale_invariant_causal_and_monotone(
            p in proptest::collection::vec(50.0f64..150.0, 20..80),
            c in 0.5f64..4.0,
            cut in 20usize..80,
        ) {
            let cfg = LabelConfig::default();
            let y = label_series(&p, &cfg).unwrap();
            // powers of two keep the scaled ratios bit-identical
            let scale = c.log2().round().exp2();
            let scaled: Vec<f64> = p.iter().map(|v| v * scale).collect();
            prop_assert_eq!(&label_series(&scaled, &cfg).unwrap(), &y);

            let cut = cut.min(p.len());
            prop_assert_eq!(&label_series(&p[..cut], &cfg).unwrap()[..], &y[..cut]);

            let loose = LabelConfig { tau: 0.01, ..cfg.clone() };
            let tight = LabelConfig { tau: 0.05, ..cfg };
            let count = |c: &LabelConfig| label_series(&p, c).unwrap().iter().map(|&v| v as usize).sum::<usize>();
            prop_assert!(count(&loose) >= y.iter().map(|&v| v as usize).sum::<usize>());
            prop_assert!(y.iter().map(|&v| v as usize).sum::<usize>() >= count(&tight));
        }
    }
}
