//! Layered variational circuit: encoding, `L` layers of per-qubit RY
//! rotations each followed by an open CNOT chain, and Pauli-Z readout.
//! Gradients use the two-term parameter-shift rule.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{prepare_hybrid_state, HYBRID_QUBITS, N_CHANNELS};
use crate::qsim::{amplitude_encode, GateOp, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// Real input normalized onto the amplitudes, zero-padded to `2^n`.
    Amplitude,
    /// Input values are rotation angles. Eight angles on six qubits use the
    /// hybrid channel map; `n` angles on `n` qubits apply one RY each.
    Angle,
}

/// Rotation angles of one circuit, row-major `n_layers x n_qubits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqcParams {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub encoding: Encoding,
    pub thetas: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl VqcParams {
    pub fn new(n_qubits: usize, n_layers: usize, encoding: Encoding, thetas: Vec<f64>) -> Result<Self> {
        let p = Self {
            n_qubits,
            n_layers,
            encoding,
            thetas,
            seed: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Uniform angles in `[-pi, pi)`, deterministic per seed.
    pub fn init(n_qubits: usize, n_layers: usize, encoding: Encoding, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas = (0..n_qubits * n_layers)
            .map(|_| rng.random_range(-PI..PI))
            .collect();
        let mut p = Self::new(n_qubits, n_layers, encoding, thetas)?;
        p.seed = Some(seed);
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_layers == 0 {
            return Err(Error::param("vqc", "n_qubits and n_layers must be >= 1"));
        }
        if self.thetas.len() != self.n_qubits * self.n_layers {
            return Err(Error::Dimension(format!(
                "{} angles for a {}x{} circuit",
                self.thetas.len(),
                self.n_layers,
                self.n_qubits
            )));
        }
        if self.thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("thetas", "angles must be finite"));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.thetas.len()
    }

    pub fn theta(&self, layer: usize, qubit: usize) -> f64 {
        self.thetas[layer * self.n_qubits + qubit]
    }

    /// Prepares the input state for `x` under this circuit's encoding.
    pub fn encode(&self, x: &[f64]) -> Result<Statevector> {
        let n = self.n_qubits;
        match self.encoding {
            Encoding::Amplitude => {
                let dim = 1usize << n;
                if x.len() > dim {
                    return Err(Error::Dimension(format!(
                        "{} values do not fit {n} qubits",
                        x.len()
                    )));
                }
                let mut padded = x.to_vec();
                padded.resize(dim, 0.0);
                amplitude_encode(&padded)
            }
            Encoding::Angle if n == HYBRID_QUBITS && x.len() == N_CHANNELS => prepare_hybrid_state(x),
            Encoding::Angle if x.len() == n => {
                let mut s = Statevector::zero(n)?;
                for (q, &theta) in x.iter().enumerate() {
                    s.apply_ry(q, theta)?;
                }
                Ok(s)
            }
            Encoding::Angle => Err(Error::Dimension(format!(
                "angle encoding on {n} qubits takes {n} angles (or 8 on 6 qubits), got {}",
                x.len()
            ))),
        }
    }

    /// Gate list of layer `layer` with the given angles substituted.
    fn layer_ops(&self, layer: usize, thetas: &[f64]) -> Vec<GateOp> {
        let n = self.n_qubits;
        let mut ops = Vec::with_capacity(2 * n);
        for q in 0..n {
            ops.push(GateOp::Ry {
                target: q,
                angle: thetas[layer * n + q],
            });
        }
        for q in 0..n.saturating_sub(1) {
            ops.push(GateOp::Cnot {
                control: q,
                target: q + 1,
            });
        }
        ops
    }

    /// The full variational unitary as a gate list.
    pub fn ansatz_ops(&self) -> Vec<GateOp> {
        (0..self.n_layers)
            .flat_map(|l| self.layer_ops(l, &self.thetas))
            .collect()
    }

    fn run_layers(&self, state: &mut Statevector, layers: std::ops::Range<usize>, thetas: &[f64]) -> Result<()> {
        for l in layers {
            state.run(&self.layer_ops(l, thetas))?;
        }
        Ok(())
    }

    fn check_state(&self, state: &Statevector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "state has {} qubits, circuit has {}",
                state.n_qubits(),
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// `<Z_i>` for every qubit after the ansatz acts on an encoded state.
    pub fn expectations_from_state(&self, state: &Statevector) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let mut s = state.clone();
        self.run_layers(&mut s, 0..self.n_layers, &self.thetas)?;
        Ok(s.expectations_z())
    }

    /// Adjoint-weighted parameter-shift gradient from an encoded state:
    /// `sum_k adjoint[k] * d<Z_k>/d theta`, row-major like `thetas`.
    pub fn shift_grad_from_state(&self, state: &Statevector, adjoint: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        if adjoint.len() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "adjoint has {} entries for {} qubits",
                adjoint.len(),
                self.n_qubits
            )));
        }
        let n = self.n_qubits;
        let mut grad = vec![0.0; self.n_params()];
        let mut prefix = state.clone();
        let mut shifted = self.thetas.clone();
        for l in 0..self.n_layers {
            for q in 0..n {
                let idx = l * n + q;
                let mut eval = |delta: f64| -> Result<f64> {
                    shifted[idx] = self.thetas[idx] + delta;
                    let mut s = prefix.clone();
                    self.run_layers(&mut s, l..self.n_layers, &shifted)?;
                    shifted[idx] = self.thetas[idx];
                    Ok(s.expectations_z().iter().zip(adjoint).map(|(e, a)| e * a).sum())
                };
                let plus = eval(FRAC_PI_2)?;
                let minus = eval(-FRAC_PI_2)?;
                grad[idx] = (plus - minus) / 2.0;
            }
            self.run_layers(&mut prefix, l..l + 1, &self.thetas)?;
        }
        Ok(grad)
    }
}

/// Encodes `x`, runs the ansatz and reads `(<Z_1>, ..., <Z_n>)`.
pub fn vqc_forward(x: &[f64], params: &VqcParams) -> Result<Vec<f64>> {
    params.expectations_from_state(&params.encode(x)?)
}

/// Shot-sampled variant of [`vqc_forward`].
pub fn vqc_forward_sampled<R: Rng + ?Sized>(
    x: &[f64],
    params: &VqcParams,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut s = params.encode(x)?;
    s.run(&params.ansatz_ops())?;
    Ok(s.sampled_expectations_z(shots, rng))
}

/// Parameter-shift gradient of `adjoint . VQC(x)` with respect to the angles.
pub fn parameter_shift_grad(x: &[f64], params: &VqcParams, adjoint: &[f64]) -> Result<Vec<f64>> {
    params.shift_grad_from_state(&params.encode(x)?, adjoint)
}
