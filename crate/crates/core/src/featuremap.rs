//! Channel aggregation, train-only min-max scaling, and the six-qubit
//! rotation encoding used by the hybrid model.

use std::f64::consts::TAU;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{col, FeatureFrame};
use crate::qsim::Statevector;

pub const N_CHANNELS: usize = 8;
pub const HYBRID_QUBITS: usize = 6;
pub const CHANNEL_NAMES: [&str; N_CHANNELS] = ["s1", "s2", "s3", "s4a", "s4b", "s5", "s6a", "s6b"];

/// Per-bar channel values, in the order of [`CHANNEL_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixScalars {
    /// Momentum.
    pub s1: f64,
    /// Price / MA ratio.
    pub s2: f64,
    /// Volatility regime `ln(ewma / long-run)`.
    pub s3: f64,
    /// RSI / 100.
    pub s4a: f64,
    /// MACD histogram.
    pub s4b: f64,
    /// Volume ratio.
    pub s5: f64,
    /// Bollinger %b.
    pub s6a: f64,
    /// Relative ATR.
    pub s6b: f64,
}

impl SixScalars {
    pub fn to_array(&self) -> [f64; N_CHANNELS] {
        [
            self.s1, self.s2, self.s3, self.s4a, self.s4b, self.s5, self.s6a, self.s6b,
        ]
    }

    pub fn from_array(a: [f64; N_CHANNELS]) -> Self {
        Self {
            s1: a[0],
            s2: a[1],
            s3: a[2],
            s4a: a[3],
            s4b: a[4],
            s5: a[5],
            s6a: a[6],
            s6b: a[7],
        }
    }
}

/// Channel rows for bars `start..start + rows.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    pub start: usize,
    pub rows: Vec<SixScalars>,
}

impl Channels {
    pub fn get(&self, bar: usize) -> Option<&SixScalars> {
        bar.checked_sub(self.start).and_then(|i| self.rows.get(i))
    }

    /// Maps a bar range onto row indices of `rows`.
    pub fn rows_for(&self, bars: Range<usize>) -> Result<Range<usize>> {
        if bars.start < self.start || bars.end > self.start + self.rows.len() {
            return Err(Error::Dimension(format!(
                "bars {bars:?} outside channel rows {}..{}",
                self.start,
                self.start + self.rows.len()
            )));
        }
        Ok(bars.start - self.start..bars.end - self.start)
    }
}

/// Builds the eight channel values for every bar from `frame.valid_from()` on.
///
/// When either volatility in the regime channel is zero the channel reads 0.
pub fn six_scalar_channels(frame: &FeatureFrame) -> Result<Channels> {
    let momentum = frame.column(col::MOMENTUM)?;
    let ratio = frame.column(col::MA_RATIO)?;
    let ewma = frame.column(col::EWMA_VOL)?;
    let lr = frame.column(col::LR_VOL)?;
    let rsi = frame.column(col::RSI)?;
    let macd = frame.column(col::MACD_HIST)?;
    let vol_ratio = frame.column(col::VOL_RATIO)?;
    let pct_b = frame.column(col::BB_PCT_B)?;
    let atr_rel = frame.column(col::ATR_REL)?;

    let start = frame.valid_from();
    let mut degenerate = 0usize;
    let rows = (start..frame.len())
        .map(|t| {
            let s3 = if ewma[t] > 0.0 && lr[t] > 0.0 {
                (ewma[t] / lr[t]).ln()
            } else {
                degenerate += 1;
                0.0
            };
            SixScalars {
                s1: momentum[t],
                s2: ratio[t],
                s3,
                s4a: rsi[t] / 100.0,
                s4b: macd[t],
                s5: vol_ratio[t],
                s6a: pct_b[t],
                s6b: atr_rel[t],
            }
        })
        .collect::<Vec<_>>();
    if degenerate > 0 {
        log::warn!("volatility regime channel set to 0 on {degenerate} bars with zero volatility");
    }
    if let Some(bad) = rows.iter().position(|r| r.to_array().iter().any(|v| !v.is_finite())) {
        return Err(Error::Dimension(format!("non-finite channel value at bar {}", start + bad)));
    }
    Ok(Channels { start, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelBounds {
    pub a: f64,
    pub b: f64,
}

impl ChannelBounds {
    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    /// `clip((z - a) / (b - a), 0, 1)`; a degenerate channel maps to 0.5.
    pub fn unit(&self, z: f64) -> f64 {
        if self.is_degenerate() {
            0.5
        } else {
            ((z - self.a) / (self.b - self.a)).clamp(0.0, 1.0)
        }
    }
}

/// Per-channel train-split minimum and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinMaxScaler {
    pub s1: ChannelBounds,
    pub s2: ChannelBounds,
    pub s3: ChannelBounds,
    pub s4a: ChannelBounds,
    pub s4b: ChannelBounds,
    pub s5: ChannelBounds,
    pub s6a: ChannelBounds,
    pub s6b: ChannelBounds,
}

impl MinMaxScaler {
    pub fn bounds(&self) -> [ChannelBounds; N_CHANNELS] {
        [
            self.s1, self.s2, self.s3, self.s4a, self.s4b, self.s5, self.s6a, self.s6b,
        ]
    }

    pub fn from_bounds(b: [ChannelBounds; N_CHANNELS]) -> Self {
        Self {
            s1: b[0],
            s2: b[1],
            s3: b[2],
            s4a: b[3],
            s4b: b[4],
            s5: b[5],
            s6a: b[6],
            s6b: b[7],
        }
    }

    /// Names of channels whose train values were constant.
    pub fn degenerate_channels(&self) -> Vec<&'static str> {
        self.bounds()
            .iter()
            .zip(CHANNEL_NAMES)
            .filter(|(b, _)| b.is_degenerate())
            .map(|(_, n)| n)
            .collect()
    }
}

/// Fits the scaler on `channels[train]` only.
pub fn fit_minmax(channels: &[SixScalars], train: Range<usize>) -> Result<MinMaxScaler> {
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if train.end > channels.len() {
        return Err(Error::Dimension(format!(
            "train range {train:?} exceeds {} channel rows",
            channels.len()
        )));
    }
    let mut bounds = [ChannelBounds {
        a: f64::INFINITY,
        b: f64::NEG_INFINITY,
    }; N_CHANNELS];
    for row in &channels[train] {
        for (bd, v) in bounds.iter_mut().zip(row.to_array()) {
            bd.a = bd.a.min(v);
            bd.b = bd.b.max(v);
        }
    }
    let scaler = MinMaxScaler::from_bounds(bounds);
    let degenerate = scaler.degenerate_channels();
    if !degenerate.is_empty() {
        log::warn!("constant train channels {degenerate:?} will encode to pi");
    }
    Ok(scaler)
}

/// Rotation angles in channel order; RY slots are s1, s2, s3, s4a, s5, s6a
/// and RZ slots are s4b, s6b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleVector(pub [f64; N_CHANNELS]);

impl AngleVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `theta = 2 pi * mm(z; a, b)` per channel.
pub fn encode_angles(scalars: &SixScalars, scaler: &MinMaxScaler) -> AngleVector {
    let mut out = [0.0; N_CHANNELS];
    for ((o, z), b) in out.iter_mut().zip(scalars.to_array()).zip(scaler.bounds()) {
        *o = TAU * b.unit(z);
    }
    AngleVector(out)
}

/// `U_enc |000000>`: one RY per qubit, followed by an RZ on qubits 4 and 6
/// (indices 3 and 5).
pub fn prepare_hybrid_state(angles: &[f64]) -> Result<Statevector> {
    if angles.len() != N_CHANNELS {
        return Err(Error::Dimension(format!(
            "hybrid encoding takes {N_CHANNELS} angles, got {}",
            angles.len()
        )));
    }
    let mut s = Statevector::zero(HYBRID_QUBITS)?;
    s.apply_ry(0, angles[0])?;
    s.apply_ry(1, angles[1])?;
    s.apply_ry(2, angles[2])?;
    s.apply_ry(3, angles[3])?;
    s.apply_rz(3, angles[4])?;
    s.apply_ry(4, angles[5])?;
    s.apply_ry(5, angles[6])?;
    s.apply_rz(5, angles[7])?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn row(v: f64) -> SixScalars {
        SixScalars::from_array([v; N_CHANNELS])
    }

    fn frame_with(ewma: f64, lr: f64, rsi: f64) -> FeatureFrame {
        let mut f = FeatureFrame::new(2);
        for name in col::BASE {
            let v = match name {
                col::EWMA_VOL => ewma,
                col::LR_VOL => lr,
                col::RSI => rsi,
                _ => 0.1,
            };
            f.push(name, vec![v; 2]).unwrap();
        }
        f
    }

    #[test]
    fn channel_examples() {
        let ch = six_scalar_channels(&frame_with(0.02, 0.02, 100.0)).unwrap();
        assert_eq!(ch.rows.len(), 2);
        assert_eq!(ch.rows[0].s3, 0.0);
        assert_eq!(ch.rows[0].s4a, 1.0);
        assert!(ch.rows[0].to_array().iter().all(|v| v.is_finite()));

        let zero_lr = six_scalar_channels(&frame_with(0.02, 0.0, 50.0)).unwrap();
        assert_eq!(zero_lr.rows[1].s3, 0.0);

        let mut missing = FeatureFrame::new(2);
        missing.push(col::MOMENTUM, vec![0.0; 2]).unwrap();
        assert!(matches!(six_scalar_channels(&missing), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn fit_examples() {
        let rows = vec![row(1.0), row(3.0), row(100.0)];
        let sc = fit_minmax(&rows, 0..2).unwrap();
        assert_eq!(sc.s1, ChannelBounds { a: 1.0, b: 3.0 });
        let constant = fit_minmax(&[row(2.0), row(2.0)], 0..2).unwrap();
        assert_eq!(constant.degenerate_channels().len(), N_CHANNELS);
        assert!(fit_minmax(&rows, 1..1).is_err());
        assert!(fit_minmax(&rows, 0..4).is_err());
    }

    #[test]
    fn angle_examples() {
        let sc = fit_minmax(&[row(-1.0), row(2.0)], 0..2).unwrap();
        assert!(encode_angles(&row(-1.0), &sc).0.iter().all(|&t| t == 0.0));
        assert!(encode_angles(&row(2.0), &sc).0.iter().all(|&t| t == TAU));
        assert!(encode_angles(&row(-101.0), &sc).0.iter().all(|&t| t == 0.0));
        assert!(encode_angles(&row(1e9), &sc).0.iter().all(|&t| t == TAU));
        let flat = fit_minmax(&[row(4.0)], 0..1).unwrap();
        assert!(encode_angles(&row(-3.0), &flat).0.iter().all(|&t| t == PI));
    }

    #[test]
    fn hybrid_state_examples() {
        let s = prepare_hybrid_state(&[0.0; 8]).unwrap();
        assert_eq!(s, Statevector::zero(6).unwrap());
        let mut a = [0.0; 8];
        a[0] = PI;
        let s = prepare_hybrid_state(&a).unwrap();
        assert!((s.amplitudes()[0b100000].norm() - 1.0).abs() < 1e-15);
        assert!(prepare_hybrid_state(&[0.0; 6]).is_err());
    }

    #[test]
    fn rz_slot_follows_ry() {
        // RZ after RY changes the relative phase of qubit 4's superposition
        let mut a = [0.0; 8];
        a[3] = PI / 2.0;
        a[4] = PI / 2.0;
        let s = prepare_hybrid_state(&a).unwrap();
        let amps = s.amplitudes();
        let rel = amps[0b000100] / amps[0];
        assert!((rel.arg() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn scaler_json_is_flat() {
        let sc = fit_minmax(&[row(0.0), row(1.0)], 0..2).unwrap();
        let json = serde_json::to_value(sc).unwrap();
        assert_eq!(json["s4b"]["a"], 0.0);
        assert_eq!(json["s6a"]["b"], 1.0);
        let back: MinMaxScaler = serde_json::from_value(json).unwrap();
        assert_eq!(back, sc);
    }

    proptest! {
        #[test]
        fn angles_monotone_and_bounded(
            lo in -5.0f64..0.0, width in 0.01f64..5.0, z1 in -10.0f64..10.0, z2 in -10.0f64..10.0,
        ) {
            let sc = fit_minmax(&[row(lo), row(lo + width)], 0..2).unwrap();
            let (a1, a2) = (encode_angles(&row(z1), &sc), encode_angles(&row(z2), &sc));
            for (x, y) in a1.0.iter().zip(&a2.0) {
                prop_assert!((0.0..=TAU).contains(x));
                if z1 <= z2 { prop_assert!(x <= y); }
            }
        }

        #[test]
        fn hybrid_state_unit_norm(angles in proptest::array::uniform8(0.0f64..TAU)) {
            let s = prepare_hybrid_state(&angles).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn refit_idempotent(vals in proptest::collection::vec(-3.0f64..3.0, 2..30)) {
            let rows: Vec<_> = vals.iter().map(|&v| row(v)).collect();
            let a = fit_minmax(&rows, 0..rows.len()).unwrap();
            let b = fit_minmax(&rows, 0..rows.len()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
