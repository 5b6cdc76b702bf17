//! Quantum self-attention block.
//!
//! Three variational circuits turn each token into query, key and value
//! rows of Pauli-Z expectations. Classical scaled dot-product attention mixes
//! the value rows, the result is mean-pooled over tokens, and an affine head
//! with a sigmoid yields the rebalance probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{AngleVector, MinMaxScaler, HYBRID_QUBITS};
use crate::qsim::{qubits_for_dim, Statevector};
use crate::vqc::{Encoding, VqcParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Price-window tokens, amplitude encoded.
    Sequence,
    /// Engineered-feature tokens, angle encoded on six qubits.
    Hybrid,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Sequence => "sequence",
            Variant::Hybrid => "hybrid",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Sequence => "QASA Sequence",
            Variant::Hybrid => "QASA Hybrid",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sequence" => Ok(Variant::Sequence),
            "hybrid" => Ok(Variant::Hybrid),
            other => Err(format!("unknown variant `{other}` (expected sequence or hybrid)")),
        }
    }
}

/// What a sequence token holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TokenMode {
    #[default]
    LogReturns,
    RawPrices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenOrigin {
    PriceWindow,
    EngineeredFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBatch {
    pub tokens: Vec<Vec<f64>>,
    pub origin: TokenOrigin,
}

/// Token for bar `t`: the `w` log-returns ending at `t` (or the `w` raw
/// prices ending at `t`). `None` while history is too short.
pub fn sequence_token(prices: &[f64], t: usize, w: usize, mode: TokenMode) -> Option<Vec<f64>> {
    if t >= prices.len() || w == 0 {
        return None;
    }
    match mode {
        TokenMode::LogReturns => {
            (t >= w).then(|| (t + 1 - w..=t).map(|s| prices[s].ln() - prices[s - 1].ln()).collect())
        }
        TokenMode::RawPrices => (t + 1 >= w).then(|| prices[t + 1 - w..=t].to_vec()),
    }
}

/// One log-return token per bar from `t = w` on; `len - w` tokens.
pub fn make_tokens_sequence(prices: &[f64], w: usize) -> Result<TokenBatch> {
    if w == 0 {
        return Err(Error::param("window", "must be >= 1"));
    }
    if prices.len() <= w {
        return Err(Error::TooShort {
            needed: w + 1,
            actual: prices.len(),
        });
    }
    let tokens = (w..prices.len())
        .filter_map(|t| sequence_token(prices, t, w, TokenMode::LogReturns))
        .collect();
    Ok(TokenBatch {
        tokens,
        origin: TokenOrigin::PriceWindow,
    })
}

/// Row-major dense matrix as nested rows.
pub type Rows = Vec<Vec<f64>>;

fn check_rows(m: &Rows, cols: usize, what: &str) -> Result<()> {
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension(format!("{what} rows must have {cols} columns")));
    }
    Ok(())
}

/// Row-wise `softmax(Q K^T / sqrt(d_v))`.
pub fn attention_weights(q: &Rows, k: &Rows, d_v: usize) -> Result<Rows> {
    let d = q.first().map_or(0, Vec::len);
    if q.is_empty() || k.is_empty() {
        return Err(Error::Dimension("attention needs at least one query and key".into()));
    }
    check_rows(q, d, "Q")?;
    check_rows(k, d, "K")?;
    if d_v == 0 {
        return Err(Error::Dimension("d_v must be positive".into()));
    }
    let scale = 1.0 / (d_v as f64).sqrt();
    Ok(q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale)
                .collect();
            softmax(&logits)
        })
        .collect())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn mix(weights: &Rows, v: &Rows) -> Rows {
    let dv = v[0].len();
    weights
        .iter()
        .map(|w| {
            let mut out = vec![0.0; dv];
            for (wij, vj) in w.iter().zip(v) {
                for (o, x) in out.iter_mut().zip(vj) {
                    *o += wij * x;
                }
            }
            out
        })
        .collect()
}

/// `softmax(Q K^T / sqrt(d_v)) V` with `d_v` the value width.
pub fn attention(q: &Rows, k: &Rows, v: &Rows) -> Result<Rows> {
    if v.len() != k.len() || v.is_empty() {
        return Err(Error::Dimension(format!("{} keys but {} values", k.len(), v.len())));
    }
    let dv = v[0].len();
    check_rows(v, dv, "V")?;
    let w = attention_weights(q, k, dv)?;
    Ok(mix(&w, v))
}

/// Affine map on the pooled attention output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Head {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QasaModel {
    pub variant: Variant,
    /// Tokens per prediction; for sequence models also the token width.
    pub window: usize,
    #[serde(default)]
    pub token_mode: TokenMode,
    pub vqc_q: VqcParams,
    pub vqc_k: VqcParams,
    pub vqc_v: VqcParams,
    pub head: Head,
    /// Scaler used to build hybrid tokens.
    #[serde(default)]
    pub scaler: Option<MinMaxScaler>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub states: Vec<Statevector>,
    pub q: Rows,
    pub k: Rows,
    pub v: Rows,
    pub weights: Rows,
    pub pooled: Vec<f64>,
    pub logit: f64,
}

impl ForwardCache {
    pub fn probability(&self) -> f64 {
        sigmoid(self.logit)
    }
}

/// Gradient of a scalar loss with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrad {
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    pub head_weights: Vec<f64>,
    pub head_bias: f64,
}

impl ModelGrad {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.q.len() * 3 + self.head_weights.len() + 1);
        out.extend(&self.q);
        out.extend(&self.k);
        out.extend(&self.v);
        out.extend(&self.head_weights);
        out.push(self.head_bias);
        out
    }
}

impl QasaModel {
    /// Fresh model with circuits and head drawn from `seed`.
    ///
    /// Sequence models use `ceil(log2 window)` qubits; hybrid models use six.
    pub fn init(variant: Variant, window: usize, n_layers: usize, seed: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::param("window", "must be >= 1"));
        }
        let (n_qubits, encoding) = match variant {
            Variant::Sequence => (qubits_for_dim(window), Encoding::Amplitude),
            Variant::Hybrid => (HYBRID_QUBITS, Encoding::Angle),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sub: [u64; 3] = [rng.random(), rng.random(), rng.random()];
        let weights = (0..n_qubits).map(|_| rng.random_range(-0.5..0.5)).collect();
        Ok(Self {
            variant,
            window,
            token_mode: TokenMode::LogReturns,
            vqc_q: VqcParams::init(n_qubits, n_layers, encoding, sub[0])?,
            vqc_k: VqcParams::init(n_qubits, n_layers, encoding, sub[1])?,
            vqc_v: VqcParams::init(n_qubits, n_layers, encoding, sub[2])?,
            head: Head { weights, bias: 0.0 },
            scaler: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.vqc_q, &self.vqc_k, &self.vqc_v] {
            p.validate()?;
        }
        let shape = |p: &VqcParams| (p.n_qubits, p.n_layers, p.encoding);
        if shape(&self.vqc_q) != shape(&self.vqc_k) || shape(&self.vqc_q) != shape(&self.vqc_v) {
            return Err(Error::Dimension("Q/K/V circuits must share shape and encoding".into()));
        }
        if self.head.weights.len() != self.n_qubits() {
            return Err(Error::Dimension(format!(
                "head takes {} inputs, circuits measure {} qubits",
                self.head.weights.len(),
                self.n_qubits()
            )));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.vqc_q.n_qubits
    }

    pub fn n_params(&self) -> usize {
        3 * self.vqc_q.n_params() + self.head.weights.len() + 1
    }

    /// Flattened parameters: Q, K, V angles, head weights, head bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend(&self.vqc_q.thetas);
        out.extend(&self.vqc_k.thetas);
        out.extend(&self.vqc_v.thetas);
        out.extend(&self.head.weights);
        out.push(self.head.bias);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "{} parameters for a model with {}",
                flat.len(),
                self.n_params()
            )));
        }
        let m = self.vqc_q.n_params();
        self.vqc_q.thetas.copy_from_slice(&flat[..m]);
        self.vqc_k.thetas.copy_from_slice(&flat[m..2 * m]);
        self.vqc_v.thetas.copy_from_slice(&flat[2 * m..3 * m]);
        let h = self.head.weights.len();
        self.head.weights.copy_from_slice(&flat[3 * m..3 * m + h]);
        self.head.bias = flat[3 * m + h];
        Ok(())
    }

    /// Encodes one token. An all-zero amplitude token (flat prices) has no
    /// direction and is mapped to `|0...0>`.
    pub fn encode_token(&self, token: &[f64]) -> Result<Statevector> {
        match self.vqc_q.encode(token) {
            Err(Error::ZeroVector) => Statevector::zero(self.n_qubits()),
            other => other,
        }
    }

    /// Rows of Q, K and V for a token sequence.
    pub fn qkv(&self, tokens: &[Vec<f64>]) -> Result<(Rows, Rows, Rows)> {
        let c = self.forward_cached(tokens)?;
        Ok((c.q, c.k, c.v))
    }

    pub fn forward_cached(&self, tokens: &[Vec<f64>]) -> Result<ForwardCache> {
        if tokens.is_empty() {
            return Err(Error::Dimension("empty token sequence".into()));
        }
        let states = tokens
            .iter()
            .map(|t| self.encode_token(t))
            .collect::<Result<Vec<_>>>()?;
        let read = |p: &VqcParams| -> Result<Rows> {
            states.iter().map(|s| p.expectations_from_state(s)).collect()
        };
        let (q, k, v) = (read(&self.vqc_q)?, read(&self.vqc_k)?, read(&self.vqc_v)?);
        let weights = attention_weights(&q, &k, self.n_qubits())?;
        let out = mix(&weights, &v);
        let t = out.len() as f64;
        let mut pooled = vec![0.0; self.n_qubits()];
        for row in &out {
            for (p, x) in pooled.iter_mut().zip(row) {
                *p += x / t;
            }
        }
        let logit = self
            .head
            .weights
            .iter()
            .zip(&pooled)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.head.bias;
        Ok(ForwardCache {
            states,
            q,
            k,
            v,
            weights,
            pooled,
            logit,
        })
    }

    /// Probability of a rebalance given the token sequence.
    pub fn forward(&self, tokens: &[Vec<f64>]) -> Result<f64> {
        Ok(self.forward_cached(tokens)?.probability())
    }

    /// Hybrid forward over a context of per-bar angle vectors.
    pub fn forward_hybrid(&self, angles: &[AngleVector]) -> Result<f64> {
        if self.variant != Variant::Hybrid {
            return Err(Error::VariantMismatch {
                expected: Variant::Hybrid.name(),
                actual: self.variant.name(),
            });
        }
        let tokens: Vec<Vec<f64>> = angles.iter().map(|a| a.0.to_vec()).collect();
        self.forward(&tokens)
    }

    /// Forward pass with shot-sampled readout instead of exact expectations.
    pub fn forward_sampled<R: Rng + ?Sized>(&self, tokens: &[Vec<f64>], shots: usize, rng: &mut R) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::Dimension("empty token sequence".into()));
        }
        let mut rows = [Vec::new(), Vec::new(), Vec::new()];
        for token in tokens {
            let state = self.encode_token(token)?;
            for (out, p) in rows.iter_mut().zip([&self.vqc_q, &self.vqc_k, &self.vqc_v]) {
                let mut s = state.clone();
                s.run(&p.ansatz_ops())?;
                out.push(s.sampled_expectations_z(shots, rng));
            }
        }
        let [q, k, v] = rows;
        let out = attention(&q, &k, &v)?;
        let t = out.len() as f64;
        let logit = self
            .head
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * out.iter().map(|r| r[i]).sum::<f64>() / t)
            .sum::<f64>()
            + self.head.bias;
        Ok(sigmoid(logit))
    }

    /// Backpropagates `d loss / d logit` through the head, pooling and
    /// attention, then through each circuit by parameter shift.
    pub fn backward(&self, cache: &ForwardCache, dlogit: f64) -> Result<ModelGrad> {
        let n = self.n_qubits();
        let t = cache.q.len();
        let scale = 1.0 / (n as f64).sqrt();
        let head_weights: Vec<f64> = cache.pooled.iter().map(|p| dlogit * p).collect();
        // every attention output row receives the same upstream gradient
        let d_out: Vec<f64> = self.head.weights.iter().map(|w| dlogit * w / t as f64).collect();

        let mut dv = vec![vec![0.0; n]; t];
        for wi in &cache.weights {
            for (j, wij) in wi.iter().enumerate() {
                for (d, g) in dv[j].iter_mut().zip(&d_out) {
                    *d += wij * g;
                }
            }
        }
        // dA_ij = d_out . v_j, identical for every i
        let da: Vec<f64> = cache
            .v
            .iter()
            .map(|vj| vj.iter().zip(&d_out).map(|(a, b)| a * b).sum())
            .collect();
        let mut dq = vec![vec![0.0; n]; t];
        let mut dk = vec![vec![0.0; n]; t];
        for i in 0..t {
            let wi = &cache.weights[i];
            let inner: f64 = wi.iter().zip(&da).map(|(w, d)| w * d).sum();
            for j in 0..t {
                let ds = wi[j] * (da[j] - inner) * scale;
                for c in 0..n {
                    dq[i][c] += ds * cache.k[j][c];
                    dk[j][c] += ds * cache.q[i][c];
                }
            }
        }

        let accumulate = |p: &VqcParams, adj: &Rows| -> Result<Vec<f64>> {
            let mut g = vec![0.0; p.n_params()];
            for (state, a) in cache.states.iter().zip(adj) {
                if a.iter().all(|x| *x == 0.0) {
                    continue;
                }
                for (gi, x) in g.iter_mut().zip(p.shift_grad_from_state(state, a)?) {
                    *gi += x;
                }
            }
            Ok(g)
        };
        Ok(ModelGrad {
            q: accumulate(&self.vqc_q, &dq)?,
            k: accumulate(&self.vqc_k, &dk)?,
            v: accumulate(&self.vqc_v, &dv)?,
            head_weights,
            head_bias: dlogit,
        })
    }
}
