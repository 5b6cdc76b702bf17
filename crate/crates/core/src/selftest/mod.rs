//! Built-in verification suites.
//!
//! Each suite compares a production routine against an independent
//! reference and reports the worst deviation seen. The simulator suite takes
//! the circuit runner as a parameter so that a deliberately broken runner can
//! be checked to fail.

pub mod oracle;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::backtest::{max_drawdown, sharpe, sharpe_from_returns, simulate, BacktestConfig};
use crate::error::Result;
use crate::featuremap::{encode_angles, ChannelBounds, MinMaxScaler, SixScalars};
use crate::qasa::attention_weights;
use crate::qsim::{run_circuit, GateOp, Statevector};
use crate::vqc::{parameter_shift_grad, vqc_forward, Encoding, VqcParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteReport {
    fn new(name: &'static str, cases: usize, max_error: f64, tolerance: f64, failures: Vec<String>) -> Self {
        let passed = failures.is_empty() && max_error <= tolerance;
        let detail = if failures.is_empty() {
            format!("{cases} cases, max error {max_error:.3e} (tol {tolerance:.0e})")
        } else {
            format!("{cases} cases, {} failures; first: {}", failures.len(), failures[0])
        };
        Self {
            name,
            passed,
            cases,
            max_error,
            tolerance,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn random_circuit<R: Rng + ?Sized>(n: usize, depth: usize, rng: &mut R) -> Vec<GateOp> {
    (0..depth)
        .map(|_| {
            let kinds = if n > 1 { 3 } else { 2 };
            let target = rng.random_range(0..n);
            let angle = rng.random_range(-TAU..TAU);
            match rng.random_range(0..kinds) {
                0 => GateOp::Ry { target, angle },
                1 => GateOp::Rz { target, angle },
                _ => {
                    let mut control = rng.random_range(0..n - 1);
                    if control >= target {
                        control += 1;
                    }
                    GateOp::Cnot { control, target }
                }
            }
        })
        .collect()
}

pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Statevector {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    Statevector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).expect("normalized")
}

/// Simulator against the dense matrix chain, using the production runner.
pub fn check_simulator(cases: usize, seed: u64) -> SuiteReport {
    check_simulator_with(cases, seed, run_circuit)
}

pub fn check_simulator_with<F>(cases: usize, seed: u64, runner: F) -> SuiteReport
where
    F: Fn(&Statevector, &[GateOp]) -> Result<Statevector>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..cases {
        let n = rng.random_range(1..=3);
        let depth = rng.random_range(1..=30);
        let ops = random_circuit(n, depth, &mut rng);
        let input = if rng.random::<f64>() < 0.5 {
            Statevector::zero(n).expect("small register")
        } else {
            random_state(n, &mut rng)
        };
        let want = oracle::run(&input, &ops, n);
        match runner(&input, &ops) {
            Ok(got) => {
                let err = got
                    .amplitudes()
                    .iter()
                    .zip(want.amplitudes())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                worst = worst.max(err);
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    SuiteReport::new("simulator vs dense oracle", cases, worst, 1e-10, failures)
}

/// Parameter-shift gradients against central differences.
pub fn check_gradients(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();

    // single qubit: <Z> = cos(theta), derivative -sin(theta)
    for _ in 0..10 {
        let theta = rng.random_range(-PI..PI);
        let p = VqcParams::new(1, 1, Encoding::Angle, vec![theta]).expect("valid");
        match (vqc_forward(&[0.0], &p), parameter_shift_grad(&[0.0], &p, &[1.0])) {
            (Ok(z), Ok(g)) => {
                worst = worst.max((z[0] - theta.cos()).abs()).max((g[0] + theta.sin()).abs());
            }
            (Err(e), _) | (_, Err(e)) => failures.push(e.to_string()),
        }
    }

    for case in 0..cases {
        let n = rng.random_range(1..=4);
        let layers = rng.random_range(1..=3);
        let (encoding, x): (Encoding, Vec<f64>) = if rng.random::<f64>() < 0.5 {
            (Encoding::Angle, (0..n).map(|_| rng.random_range(0.0..TAU)).collect())
        } else {
            (Encoding::Amplitude, (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect())
        };
        let p = VqcParams::init(n, layers, encoding, rng.random()).expect("valid");
        for k in 0..n {
            let mut adj = vec![0.0; n];
            adj[k] = 1.0;
            let g = match parameter_shift_grad(&x, &p, &adj) {
                Ok(g) => g,
                Err(e) => {
                    failures.push(format!("case {case}: {e}"));
                    continue;
                }
            };
            for (i, gi) in g.iter().enumerate() {
                let mut up = p.clone();
                up.thetas[i] += h;
                let mut dn = p.clone();
                dn.thetas[i] -= h;
                let fd = match (vqc_forward(&x, &up), vqc_forward(&x, &dn)) {
                    (Ok(a), Ok(b)) => (a[k] - b[k]) / (2.0 * h),
                    (Err(e), _) | (_, Err(e)) => {
                        failures.push(format!("case {case}: {e}"));
                        continue;
                    }
                };
                worst = worst.max((fd - gi).abs());
            }
        }
    }
    SuiteReport::new("parameter shift vs finite differences", cases, worst, 1e-6, failures)
}

/// Softmax attention row sums, positivity and the two closed-form cases.
pub fn check_attention(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let rows = |t: usize, n: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..t).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    for case in 0..cases {
        let t = rng.random_range(1..=8);
        let n = rng.random_range(1..=6);
        let q = rows(t, n, &mut rng);
        let mut k = rows(t, n, &mut rng);
        let v = rows(t, n, &mut rng);
        let w = match attention_weights(&q, &k, n) {
            Ok(w) => w,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        for row in &w {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            if row.iter().any(|x| *x < 0.0) {
                failures.push(format!("case {case}: negative weight"));
            }
        }
        let out = crate::qasa::attention(&q, &k, &v).expect("shapes checked");
        if t == 1 && out != v {
            failures.push(format!("case {case}: single token does not return V"));
        }
        let shared = k[0].clone();
        k.iter_mut().for_each(|r| r.clone_from(&shared));
        let out = crate::qasa::attention(&q, &k, &v).expect("shapes checked");
        for c in 0..n {
            let mean = v.iter().map(|r| r[c]).sum::<f64>() / t as f64;
            for r in &out {
                worst = worst.max((r[c] - mean).abs());
            }
        }
    }
    SuiteReport::new("attention invariants", cases, worst, 1e-12, failures)
}

/// Circuit outputs inside `[-1, 1]` and angles inside `[0, 2 pi]`.
pub fn check_bounds(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..cases {
        let n = rng.random_range(1..=4);
        let layers = rng.random_range(1..=3);
        let p = VqcParams::init(n, layers, Encoding::Amplitude, rng.random()).expect("valid");
        let x: Vec<f64> = (0..1usize << n).map(|_| rng.random_range(-5.0..5.0)).collect();
        match vqc_forward(&x, &p) {
            Ok(z) => {
                for v in z {
                    worst = worst.max(v.abs() - 1.0);
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    let bounds = [ChannelBounds { a: -1.0, b: 1.0 }; 8];
    let scaler = MinMaxScaler::from_bounds(bounds);
    for case in 0..cases {
        let raw: [f64; 8] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
        let angles = encode_angles(&SixScalars::from_array(raw), &scaler);
        for (z, a) in raw.iter().zip(angles.0) {
            if !(0.0..=TAU).contains(&a) {
                failures.push(format!("angle case {case}: {a} outside [0, 2pi]"));
            }
            if (*z <= -1.0 && a != 0.0) || (*z >= 1.0 && a != TAU) {
                failures.push(format!("angle case {case}: {z} not clipped ({a})"));
            }
        }
    }
    worst = worst.max(0.0);
    SuiteReport::new("expectation and angle bounds", cases, worst, 1e-12, failures)
}

/// Backtest metrics against closed forms and a direct recomputation.
pub fn check_metrics(seed: u64) -> SuiteReport {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut expect = |label: &str, got: Result<f64>, want: f64| match got {
        Ok(g) => worst = worst.max((g - want).abs()),
        Err(e) => failures.push(format!("{label}: {e}")),
    };
    expect("max drawdown [1,2,1]", max_drawdown(&[1.0, 2.0, 1.0]), -0.5);
    expect("max drawdown [2,1,3]", max_drawdown(&[2.0, 1.0, 3.0]), -0.5);
    expect("max drawdown monotone", max_drawdown(&[1.0, 1.5, 2.0]), 0.0);
    expect(
        "sharpe alternating",
        sharpe_from_returns(&[0.01, -0.01, 0.01, -0.01], 252.0).map(|s| s.value),
        0.0,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut equity = vec![1.0];
    for _ in 0..49 {
        let last = *equity.last().unwrap();
        equity.push(last * (1.0 + rng.random_range(-0.03..0.03)));
    }
    let rets: Vec<f64> = equity.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let mut sum = 0.0;
    for r in &rets {
        sum += r;
    }
    let mean = sum / rets.len() as f64;
    let mut ss = 0.0;
    for r in &rets {
        ss += (r - mean) * (r - mean);
    }
    let sd = (ss / (rets.len() - 1) as f64).sqrt();
    expect("sharpe recomputation", sharpe(&equity, 252.0).map(|s| s.value), mean / sd * 252f64.sqrt());

    let prices: Vec<f64> = (0..=20).map(|i| 4f64.powf(i as f64 / 20.0)).collect();
    let quiet = vec![0.0; prices.len()];
    expect(
        "lp value under 4x price",
        simulate(&prices, &quiet, &BacktestConfig::default()).map(|r| *r.equity.last().unwrap()),
        2.0,
    );
    SuiteReport::new("backtest metrics", 7, worst, 1e-10, failures)
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        check_simulator(1000, seed),
        check_gradients(100, seed.wrapping_add(1)),
        check_attention(10_000, seed.wrapping_add(2)),
        check_bounds(10_000, seed.wrapping_add(3)),
        check_metrics(seed.wrapping_add(4)),
    ]
}
