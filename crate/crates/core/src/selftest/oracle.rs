//! Dense reference implementations: full `2^n x 2^n` gate matrices built by
//! Kronecker products and multiplied into one circuit unitary.

use num_complex::Complex64;

use crate::qsim::{GateOp, Statevector};

type C = Complex64;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub dim: usize,
    pub data: Vec<C>,
}

impl Dense {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![C::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    fn from_2x2(m: [[C; 2]; 2]) -> Self {
        Self {
            dim: 2,
            data: vec![m[0][0], m[0][1], m[1][0], m[1][1]],
        }
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        let dim = self.dim * other.dim;
        let mut data = vec![C::new(0.0, 0.0); dim * dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.data[i * self.dim + j];
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        data[(i * other.dim + k) * dim + j * other.dim + l] = a * other.data[k * other.dim + l];
                    }
                }
            }
        }
        Dense { dim, data }
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        let n = self.dim;
        let mut data = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Dense { dim: n, data }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.data[i * self.dim + j] * v[j]).sum())
            .collect()
    }
}

pub fn ry(theta: f64) -> [[C; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C::new(c, 0.0), C::new(-s, 0.0)], [C::new(s, 0.0), C::new(c, 0.0)]]
}

pub fn rz(theta: f64) -> [[C; 2]; 2] {
    let zero = C::new(0.0, 0.0);
    [[C::from_polar(1.0, -theta / 2.0), zero], [zero, C::from_polar(1.0, theta / 2.0)]]
}

/// `I (x) ... (x) U (x) ... (x) I` with qubit 0 as the leftmost factor.
pub fn embed_single(u: [[C; 2]; 2], target: usize, n: usize) -> Dense {
    (0..n).fold(Dense::identity(1), |acc, q| {
        acc.kron(&if q == target {
            Dense::from_2x2(u)
        } else {
            Dense::identity(2)
        })
    })
}

/// `|0><0| (x) I + |1><1| (x) X` on the chosen pair.
pub fn embed_cnot(control: usize, target: usize, n: usize) -> Dense {
    let zero = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    let p0 = [[one, zero], [zero, zero]];
    let p1 = [[zero, zero], [zero, one]];
    let x = [[zero, one], [one, zero]];
    let build = |on_control: [[C; 2]; 2], on_target: Option<[[C; 2]; 2]>| {
        (0..n).fold(Dense::identity(1), |acc, q| {
            let f = if q == control {
                Dense::from_2x2(on_control)
            } else if q == target && on_target.is_some() {
                Dense::from_2x2(on_target.unwrap())
            } else {
                Dense::identity(2)
            };
            acc.kron(&f)
        })
    };
    let a = build(p0, None);
    let b = build(p1, Some(x));
    Dense {
        dim: a.dim,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
    }
}

pub fn gate_matrix(op: &GateOp, n: usize) -> Dense {
    match *op {
        GateOp::Ry { target, angle } => embed_single(ry(angle), target, n),
        GateOp::Rz { target, angle } => embed_single(rz(angle), target, n),
        GateOp::Cnot { control, target } => embed_cnot(control, target, n),
    }
}

/// `G_k ... G_2 G_1` for ops applied in order.
pub fn circuit_matrix(ops: &[GateOp], n: usize) -> Dense {
    ops.iter()
        .fold(Dense::identity(1 << n), |acc, op| gate_matrix(op, n).matmul(&acc))
}

pub fn run(input: &Statevector, ops: &[GateOp], n: usize) -> Statevector {
    let out = circuit_matrix(ops, n).apply(input.amplitudes());
    Statevector::from_amplitudes(out).expect("unitary keeps the norm")
}

/// `<Z_i>` by summing `+-|a_k|^2` over basis states, qubit 0 most significant.
pub fn expectations_z(state: &Statevector, n: usize) -> Vec<f64> {
    (0..n)
        .map(|q| {
            state
                .amplitudes()
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let bit = (k >> (n - 1 - q)) & 1;
                    if bit == 0 {
                        a.norm_sqr()
                    } else {
                        -a.norm_sqr()
                    }
                })
                .sum()
        })
        .collect()
}
