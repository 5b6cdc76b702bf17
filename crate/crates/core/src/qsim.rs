//! Dense statevector simulator.
//!
//! Qubit 0 is the most significant bit of the basis index, so on three
//! qubits `|100>` is index 4. User-facing text numbers qubits from 1.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum GateOp {
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |q: usize| {
            if q < n_qubits {
                Ok(())
            } else {
                Err(Error::QubitOutOfRange { index: q, n_qubits })
            }
        };
        match *self {
            GateOp::Ry { target, .. } | GateOp::Rz { target, .. } => check(target),
            GateOp::Cnot { control, target } => {
                check(control)?;
                check(target)?;
                if control == target {
                    return Err(Error::SameQubit(control));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::param(
                "n_qubits",
                format!("must be in 1..={MAX_QUBITS}, got {n_qubits}"),
            ));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, n_qubits })
    }

    /// Wraps raw amplitudes; length must be a power of two and the vector
    /// must have unit norm.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::Dimension(format!(
                "amplitude vector length {len} is not a power of two in 2..={}",
                1 << MAX_QUBITS
            )));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Dimension(format!("state norm {norm} is not 1")));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(1 << (self.n_qubits - 1 - qubit))
    }

    /// `RY(theta) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]`.
    pub fn apply_ry(&mut self, qubit: usize, theta: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let (s, c) = (theta / 2.0).sin_cos();
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a0, a1) = (self.amps[i], self.amps[j]);
                self.amps[i] = a0 * c - a1 * s;
                self.amps[j] = a0 * s + a1 * c;
            }
        }
        Ok(())
    }

    /// `RZ(theta) = diag(e^{-i t/2}, e^{+i t/2})`.
    pub fn apply_rz(&mut self, qubit: usize, theta: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let minus = Complex64::from_polar(1.0, -theta / 2.0);
        let plus = Complex64::from_polar(1.0, theta / 2.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & mask == 0 { minus } else { plus };
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(Error::SameQubit(control));
        }
        let cm = self.mask(control)?;
        let tm = self.mask(target)?;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        match *op {
            GateOp::Ry { target, angle } => self.apply_ry(target, angle),
            GateOp::Rz { target, angle } => self.apply_rz(target, angle),
            GateOp::Cnot { control, target } => self.apply_cnot(control, target),
        }
    }

    /// Applies `ops` in order. All ops are validated before any is applied.
    pub fn run(&mut self, ops: &[GateOp]) -> Result<()> {
        for op in ops {
            op.validate(self.n_qubits)?;
        }
        for op in ops {
            self.apply(op)?;
        }
        Ok(())
    }

    /// Exact `<Z>` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        let mask = self.mask(qubit)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// Exact `<Z_i>` for every qubit in one pass.
    pub fn expectations_z(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut out = vec![0.0; n];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, e) in out.iter_mut().enumerate() {
                if i & (1 << (n - 1 - q)) == 0 {
                    *e += p;
                } else {
                    *e -= p;
                }
            }
        }
        out
    }

    /// Draws `shots` computational-basis samples.
    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        (0..shots)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(self.amps.len() - 1)
            })
            .collect()
    }

    /// Shot-based estimate of every `<Z_i>`.
    pub fn sampled_expectations_z<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<f64> {
        let n = self.n_qubits;
        let mut out = vec![0.0; n];
        if shots == 0 {
            return out;
        }
        for idx in self.sample(shots, rng) {
            for (q, e) in out.iter_mut().enumerate() {
                *e += if idx & (1 << (n - 1 - q)) == 0 { 1.0 } else { -1.0 };
            }
        }
        out.iter_mut().for_each(|e| *e /= shots as f64);
        out
    }
}

/// Real amplitude encoding `x / ||x||`, zero-padded to the next power of two
/// (at least two amplitudes).
pub fn amplitude_encode(x: &[f64]) -> Result<Statevector> {
    if x.is_empty() {
        return Err(Error::Dimension("empty input".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dimension("non-finite input".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let len = x.len().next_power_of_two().max(2);
    if len > 1 << MAX_QUBITS {
        return Err(Error::Dimension(format!("{} amplitudes exceed {MAX_QUBITS} qubits", x.len())));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); len];
    for (a, v) in amps.iter_mut().zip(x) {
        *a = Complex64::new(v / norm, 0.0);
    }
    Ok(Statevector {
        n_qubits: len.trailing_zeros() as usize,
        amps,
    })
}

/// Qubits needed to amplitude-encode `d` values: `ceil(log2 d)`, at least 1.
pub fn qubits_for_dim(d: usize) -> usize {
    d.next_power_of_two().max(2).trailing_zeros() as usize
}

/// Runs `ops` on a copy of `state`.
pub fn run_circuit(state: &Statevector, ops: &[GateOp]) -> Result<Statevector> {
    let mut out = state.clone();
    out.run(ops)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_state(s: &Statevector, expected: &[Complex64]) {
        for (a, b) in s.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < 1e-12, "{:?} vs {:?}", s.amplitudes(), expected);
        }
    }

    #[test]
    fn amplitude_encoding_examples() {
        let s = amplitude_encode(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.n_qubits(), 2);
        assert_state(&s, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_state(&amplitude_encode(&[3.0, 4.0]).unwrap(), &[c(0.6, 0.0), c(0.8, 0.0)]);
        let r = 1.0 / 3f64.sqrt();
        let s = amplitude_encode(&[1.0, 1.0, 1.0]).unwrap();
        assert_state(&s, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(0.0, 0.0)]);
        assert!(matches!(amplitude_encode(&[0.0, 0.0]), Err(Error::ZeroVector)));
        assert_eq!(qubits_for_dim(8), 3);
        assert_eq!(qubits_for_dim(5), 3);
        assert_eq!(qubits_for_dim(1), 1);
    }

    #[test]
    fn ry_examples() {
        let mut s = Statevector::zero(1).unwrap();
        s.apply_ry(0, 0.0).unwrap();
        assert_state(&s, &[c(1.0, 0.0), c(0.0, 0.0)]);
        s.apply_ry(0, PI).unwrap();
        assert_state(&s, &[c(0.0, 0.0), c(1.0, 0.0)]);
        let mut s = Statevector::zero(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        assert_state(&s, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]);
        assert!(matches!(s.apply_ry(1, 0.1), Err(Error::QubitOutOfRange { .. })));
    }

    #[test]
    fn rz_examples() {
        let mut s = Statevector::zero(2).unwrap();
        s.apply_ry(1, 0.7).unwrap();
        let before = s.expectations_z();
        s.apply_rz(0, 1.3).unwrap();
        s.apply_rz(1, -0.4).unwrap();
        for (a, b) in before.iter().zip(s.expectations_z()) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut s = Statevector::zero(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        let plus = s.clone();
        s.apply_rz(0, 0.0).unwrap();
        assert_eq!(s, plus);
        s.apply_rz(0, PI).unwrap();
        assert_state(&s, &[c(0.0, -FRAC_1_SQRT_2), c(0.0, FRAC_1_SQRT_2)]);
    }

    #[test]
    fn cnot_truth_table() {
        // |10> with qubit 0 as control
        let mut s = Statevector::zero(2).unwrap();
        s.apply_ry(0, PI).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert!((s.amplitudes()[3].norm() - 1.0).abs() < 1e-15);
        let mut z = Statevector::zero(2).unwrap();
        z.apply_cnot(0, 1).unwrap();
        assert_eq!(z, Statevector::zero(2).unwrap());
        let mut t = Statevector::zero(3).unwrap();
        t.apply_ry(0, 1.1).unwrap();
        t.apply_ry(2, 0.3).unwrap();
        let orig = t.clone();
        t.apply_cnot(0, 2).unwrap();
        t.apply_cnot(0, 2).unwrap();
        assert_eq!(t, orig);
        assert!(matches!(t.apply_cnot(1, 1), Err(Error::SameQubit(1))));
    }

    #[test]
    fn expectation_examples() {
        let mut s = Statevector::zero(1).unwrap();
        assert_eq!(s.expectation_z(0).unwrap(), 1.0);
        s.apply_ry(0, PI).unwrap();
        assert!((s.expectation_z(0).unwrap() + 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let theta = rng.random_range(-2.0 * PI..2.0 * PI);
            let mut s = Statevector::zero(1).unwrap();
            s.apply_ry(0, theta).unwrap();
            assert!((s.expectation_z(0).unwrap() - theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_order_msb_first() {
        let mut s = Statevector::zero(3).unwrap();
        s.apply_ry(0, PI).unwrap();
        assert!((s.amplitudes()[0b100].norm() - 1.0).abs() < 1e-15);
        let e = s.expectations_z();
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        let enc = amplitude_encode(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(enc.expectations_z(), vec![1.0, -1.0]);
    }

    #[test]
    fn run_validates_before_applying() {
        let s = Statevector::zero(2).unwrap();
        assert_eq!(run_circuit(&s, &[]).unwrap(), s);
        let ops = [
            GateOp::Ry { target: 0, angle: 1.0 },
            GateOp::Cnot { control: 0, target: 5 },
        ];
        assert!(run_circuit(&s, &ops).is_err());
    }

    #[test]
    fn shots_converge() {
        let mut s = Statevector::zero(2).unwrap();
        s.apply_ry(0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = s.sampled_expectations_z(200_000, &mut rng);
        assert!((est[0] - 1f64.cos()).abs() < 0.01);
        assert_eq!(est[1], 1.0);
    }

    fn random_ops(n: usize, seed: u64, count: usize) -> Vec<GateOp> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| match rng.random_range(0..3) {
                0 => GateOp::Ry { target: rng.random_range(0..n), angle: rng.random_range(-PI..PI) },
                1 => GateOp::Rz { target: rng.random_range(0..n), angle: rng.random_range(-PI..PI) },
                _ => {
                    let control = rng.random_range(0..n);
                    let target = (control + rng.random_range(1..n)) % n;
                    GateOp::Cnot { control, target }
                }
            })
            .collect()
    }

    #[test]
    fn norm_after_thousand_gates() {
        let s = Statevector::zero(4).unwrap();
        let out = run_circuit(&s, &random_ops(4, 3, 1000)).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn unitary_and_bounded(
            raw in proptest::collection::vec(-1.0f64..1.0, 8),
            seed in any::<u64>(),
            depth in 0usize..40,
        ) {
            prop_assume!(raw.iter().any(|v| v.abs() > 1e-3));
            let s = amplitude_encode(&raw).unwrap();
            let out = run_circuit(&s, &random_ops(3, seed, depth)).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-10);
            for e in out.expectations_z() {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&e));
            }
        }
    }
}
