//! Exact stationary analysis of the slotted CSMA/CA chain on a conflict
//! graph.
//!
//! The on-off state distribution has the product form
//!
//! ```text
//! p(x) = (1/E) * gamma^h(x) * prod_{k in S(x)} T_k * prod_i p_i^{x_i} q_i^{1-x_i}
//! ```
//!
//! where `T_k` is the mean transmission length of link `k`, `S(x)` the
//! successful links and `h(x)` the collision number of `x`. Everything here
//! is computed in log space so large length exponents do not overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{classify_mask, ConflictGraph, DEFAULT_ENUM_CAP};

/// Fixed protocol parameters: attempt probabilities, collision length,
/// per-success overhead, and the reference payload length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Per-link attempt probabilities, each in (0,1).
    pub p: Vec<f64>,
    /// Length of a collision (the probe length), in slots.
    pub gamma: u32,
    /// Fixed overhead of a successful transmission, in slots.
    pub tau_prime: u32,
    /// Reference payload length; the mean payload of link k is `t0 * exp(r_k)`.
    pub t0: f64,
}

impl ProtocolParams {
    /// Same attempt probability on every link.
    pub fn uniform(num_links: usize, p: f64, gamma: u32, tau_prime: u32, t0: f64) -> Self {
        Self {
            p: vec![p; num_links],
            gamma,
            tau_prime,
            t0,
        }
    }

    pub fn num_links(&self) -> usize {
        self.p.len()
    }

    pub fn validate(&self, num_links: usize) -> Result<()> {
        if self.p.len() != num_links {
            return Err(Error::DimensionMismatch {
                what: "attempt probabilities",
                expected: num_links,
                got: self.p.len(),
            });
        }
        for (k, &p) in self.p.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain(format!(
                    "attempt probability p[{}] = {p} must lie in (0,1)",
                    k + 1
                )));
            }
        }
        if self.gamma < 1 {
            return Err(Error::Domain("collision length gamma must be >= 1".into()));
        }
        if self.tau_prime < 1 {
            return Err(Error::Domain("overhead tau' must be >= 1".into()));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Domain(format!(
                "reference payload length t0 = {} must be positive",
                self.t0
            )));
        }
        Ok(())
    }
}

/// Log payload-length exponents; the mean payload of link k is
/// `t0 * exp(r[k])` slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthExponents(pub Vec<f64>);

impl LengthExponents {
    pub fn uniform(num_links: usize, r: f64) -> Self {
        Self(vec![r; num_links])
    }

    /// Exponents that give the requested mean payload lengths.
    pub fn from_payload_means(t0: f64, means: &[f64]) -> Self {
        Self(means.iter().map(|&m| (m / t0).ln()).collect())
    }

    pub fn validate(&self, num_links: usize) -> Result<()> {
        if self.0.len() != num_links {
            return Err(Error::DimensionMismatch {
                what: "length exponents",
                expected: num_links,
                got: self.0.len(),
            });
        }
        if let Some(bad) = self.0.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite length exponent {bad}")));
        }
        Ok(())
    }
}

/// Mean payload length of link k: `t0 * exp(r_k)`.
pub fn payload_means(params: &ProtocolParams, r: &LengthExponents) -> Vec<f64> {
    r.0.iter().map(|&rk| params.t0 * rk.exp()).collect()
}

/// Mean total transmission length of link k: `tau' + t0 * exp(r_k)`.
pub fn mean_lengths(params: &ProtocolParams, r: &LengthExponents) -> Vec<f64> {
    r.0.iter()
        .map(|&rk| params.tau_prime as f64 + params.t0 * rk.exp())
        .collect()
}

/// Fraction of a successful transmission spent on payload:
/// `t0 e^r / (tau' + t0 e^r)`, evaluated without overflow.
pub fn payload_fraction(tau_prime: u32, t0: f64, r: f64) -> f64 {
    // logistic(r - ln(tau'/t0))
    let u = (tau_prime as f64 / t0).ln() - r;
    1.0 / (1.0 + u.exp())
}

/// One detailed state `(x, z)`: the on-off mask plus the mask of successful
/// links currently sending payload rather than overhead. Invariant:
/// `z` is a subset of the successful links of `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DetailedState {
    pub x: u64,
    pub z: u64,
}

/// Stationary distribution over on-off states, indexed by bitmask.
#[derive(Debug, Clone)]
pub struct OnOffDistribution {
    probs: Vec<f64>,
    log_normalizer: f64,
}

impl OnOffDistribution {
    pub fn prob(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The normalizing constant E. May overflow to infinity for extreme
    /// exponents; use [`log_normalizer`](Self::log_normalizer) then.
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }
}

/// Stationary distribution over detailed states.
#[derive(Debug, Clone)]
pub struct DetailedDistribution {
    pub states: Vec<DetailedState>,
    pub probs: Vec<f64>,
    log_normalizer: f64,
}

impl DetailedDistribution {
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn prob_of(&self, x: u64, z: u64) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s.x == x && s.z == z)
            .map(|i| self.probs[i])
    }
}

/// Precomputed per-mask classification plus protocol parameters; the entry
/// point for repeated evaluations at different exponent vectors.
pub struct Analyzer {
    num_links: usize,
    params: ProtocolParams,
    /// Successful-link mask per on-off mask.
    s_mask: Vec<u64>,
    /// Collision number per on-off mask.
    h: Vec<u32>,
    /// log p_k and log q_k.
    log_p: Vec<f64>,
    log_q: Vec<f64>,
}

impl Analyzer {
    pub fn new(graph: &ConflictGraph, params: ProtocolParams) -> Result<Self> {
        Self::with_cap(graph, params, DEFAULT_ENUM_CAP)
    }

    pub fn with_cap(graph: &ConflictGraph, params: ProtocolParams, cap: usize) -> Result<Self> {
        let k = graph.num_links();
        if k > cap {
            return Err(Error::CapacityExceeded {
                what: "stationary analysis links",
                cap,
                requested: k,
            });
        }
        params.validate(k)?;
        let n = 1usize << k;
        let mut s_mask = vec![0u64; n];
        let mut h = vec![0u32; n];
        for mask in 0..n as u64 {
            let (s, hh) = classify_mask(graph.neighbor_masks(), mask);
            s_mask[mask as usize] = s;
            h[mask as usize] = hh;
        }
        let log_p = params.p.iter().map(|&p| p.ln()).collect();
        let log_q = params.p.iter().map(|&p| (1.0 - p).ln()).collect();
        Ok(Self {
            num_links: k,
            params,
            s_mask,
            h,
            log_p,
            log_q,
        })
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn successful_mask(&self, x: u64) -> u64 {
        self.s_mask[x as usize]
    }

    pub fn collision_number(&self, x: u64) -> u32 {
        self.h[x as usize]
    }

    /// log of `g(x) = gamma^h(x) prod p_i^{x_i} q_i^{1-x_i}` — the part of
    /// the product form that does not depend on the exponents.
    fn log_g(&self, mask: u64) -> f64 {
        let mut lg = self.h[mask as usize] as f64 * (self.params.gamma as f64).ln();
        for k in 0..self.num_links {
            lg += if mask & (1 << k) != 0 {
                self.log_p[k]
            } else {
                self.log_q[k]
            };
        }
        lg
    }

    /// Log-weights of the product form at mean lengths `t_mean[k]`,
    /// and the log normalizer.
    fn log_weights_from_means(&self, log_t: &[f64]) -> (Vec<f64>, f64) {
        let n = 1usize << self.num_links;
        let mut lw = Vec::with_capacity(n);
        for mask in 0..n as u64 {
            let mut v = self.log_g(mask);
            let mut s = self.s_mask[mask as usize];
            while s != 0 {
                let k = s.trailing_zeros() as usize;
                s &= s - 1;
                v += log_t[k];
            }
            lw.push(v);
        }
        let log_e = log_sum_exp(&lw);
        (lw, log_e)
    }

    fn log_mean_lengths(&self, r: &LengthExponents) -> Vec<f64> {
        let log_tau = (self.params.tau_prime as f64).ln();
        let log_t0 = self.params.t0.ln();
        r.0.iter()
            .map(|&rk| log_add_exp(log_tau, log_t0 + rk))
            .collect()
    }

    /// Stationary on-off distribution at exponents `r`.
    pub fn onoff_distribution(&self, r: &LengthExponents) -> Result<OnOffDistribution> {
        r.validate(self.num_links)?;
        let log_t = self.log_mean_lengths(r);
        let (mut lw, log_e) = self.log_weights_from_means(&log_t);
        for v in &mut lw {
            *v = (*v - log_e).exp();
        }
        Ok(OnOffDistribution {
            probs: lw,
            log_normalizer: log_e,
        })
    }

    /// Per-link stationary payload-transmission probabilities (service rates).
    pub fn service_rates(&self, r: &LengthExponents) -> Result<Vec<f64>> {
        let dist = self.onoff_distribution(r)?;
        Ok(self.service_rates_from(&dist, r))
    }

    /// Service rates given an already computed on-off distribution.
    pub fn service_rates_from(&self, dist: &OnOffDistribution, r: &LengthExponents) -> Vec<f64> {
        let mut success_prob = vec![0.0f64; self.num_links];
        for (mask, &p) in dist.probs().iter().enumerate() {
            let mut s = self.s_mask[mask];
            while s != 0 {
                let k = s.trailing_zeros() as usize;
                s &= s - 1;
                success_prob[k] += p;
            }
        }
        (0..self.num_links)
            .map(|k| payload_fraction(self.params.tau_prime, self.params.t0, r.0[k]) * success_prob[k])
            .collect()
    }

    /// Log-likelihood objective `L(r; lambda) = sum_k lambda_k r_k - log E(r)`
    /// and its gradient `lambda - s(r)`.
    pub fn log_likelihood(&self, r: &LengthExponents, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        if lambda.len() != self.num_links {
            return Err(Error::DimensionMismatch {
                what: "arrival rates",
                expected: self.num_links,
                got: lambda.len(),
            });
        }
        for (k, &l) in lambda.iter().enumerate() {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Domain(format!(
                    "arrival rate lambda[{}] = {l} must lie in (0,1)",
                    k + 1
                )));
            }
        }
        let dist = self.onoff_distribution(r)?;
        let s = self.service_rates_from(&dist, r);
        let value = lambda
            .iter()
            .zip(&r.0)
            .map(|(&l, &rk)| l * rk)
            .sum::<f64>()
            - dist.log_normalizer();
        let grad = lambda.iter().zip(&s).map(|(&l, &sk)| l - sk).collect();
        Ok((value, grad))
    }

    /// Enumerate all detailed states `(x, z)` with `z` ranging over subsets
    /// of the successful links of `x`.
    pub fn detailed_states(&self) -> Result<Vec<DetailedState>> {
        let n = 1usize << self.num_links;
        let mut count: usize = 0;
        for mask in 0..n {
            count = count.saturating_add(1usize << self.s_mask[mask].count_ones());
            if count > MAX_DETAILED_STATES {
                return Err(Error::CapacityExceeded {
                    what: "detailed-state enumeration",
                    cap: MAX_DETAILED_STATES,
                    requested: count,
                });
            }
        }
        let mut states = Vec::with_capacity(count);
        for mask in 0..n as u64 {
            let s = self.s_mask[mask as usize];
            // Iterate all submasks of s, ascending.
            let mut z = 0u64;
            loop {
                states.push(DetailedState { x: mask, z });
                if z == s {
                    break;
                }
                z = (z.wrapping_sub(s)) & s;
            }
        }
        Ok(states)
    }

    /// log of `g(x, z) = g(x) * tau'^(|S(x)|-|z|) * t0^|z|`.
    pub fn log_g_detailed(&self, state: &DetailedState) -> f64 {
        let s_count = self.s_mask[state.x as usize].count_ones();
        let z_count = state.z.count_ones();
        self.log_g(state.x)
            + (s_count - z_count) as f64 * (self.params.tau_prime as f64).ln()
            + z_count as f64 * self.params.t0.ln()
    }

    /// Stationary distribution over detailed states at exponents `r`:
    /// `p((x,z); r) = g(x,z) exp(sum_k z_k r_k) / E(r)`.
    pub fn detailed_distribution(&self, r: &LengthExponents) -> Result<DetailedDistribution> {
        r.validate(self.num_links)?;
        let states = self.detailed_states()?;
        let mut lw = Vec::with_capacity(states.len());
        for st in &states {
            let mut v = self.log_g_detailed(st);
            let mut z = st.z;
            while z != 0 {
                let k = z.trailing_zeros() as usize;
                z &= z - 1;
                v += r.0[k];
            }
            lw.push(v);
        }
        let log_e = log_sum_exp(&lw);
        let probs = lw.iter().map(|&v| (v - log_e).exp()).collect();
        Ok(DetailedDistribution {
            states,
            probs,
            log_normalizer: log_e,
        })
    }

    /// Hessian of `log E(r)`: the covariance matrix of the payload indicator
    /// `z` under the detailed-state distribution. Positive definite.
    pub fn log_e_hessian(&self, r: &LengthExponents) -> Result<Vec<Vec<f64>>> {
        let dist = self.onoff_distribution(r)?;
        let k = self.num_links;
        let sigma: Vec<f64> = (0..k)
            .map(|i| payload_fraction(self.params.tau_prime, self.params.t0, r.0[i]))
            .collect();
        // m[i]   = P(i in S(x)); mm[i][j] = P(i, j in S(x))
        let mut m = vec![0.0f64; k];
        let mut mm = vec![vec![0.0f64; k]; k];
        for (mask, &p) in dist.probs().iter().enumerate() {
            let s = self.s_mask[mask];
            let mut si = s;
            while si != 0 {
                let i = si.trailing_zeros() as usize;
                si &= si - 1;
                m[i] += p;
                let mut sj = s;
                while sj != 0 {
                    let j = sj.trailing_zeros() as usize;
                    sj &= sj - 1;
                    mm[i][j] += p;
                }
            }
        }
        let s_rate: Vec<f64> = (0..k).map(|i| sigma[i] * m[i]).collect();
        let mut hess = vec![vec![0.0f64; k]; k];
        for i in 0..k {
            for j in 0..k {
                let ezizj = if i == j {
                    sigma[i] * m[i]
                } else {
                    sigma[i] * sigma[j] * mm[i][j]
                };
                hess[i][j] = ezizj - s_rate[i] * s_rate[j];
            }
        }
        Ok(hess)
    }
}

/// Guard on the size of detailed-state enumerations.
pub const MAX_DETAILED_STATES: usize = 1 << 22;

/// Stationary on-off distribution of the chain (one-shot convenience).
pub fn onoff_distribution(
    graph: &ConflictGraph,
    params: &ProtocolParams,
    r: &LengthExponents,
) -> Result<OnOffDistribution> {
    Analyzer::new(graph, params.clone())?.onoff_distribution(r)
}

/// Product form evaluated directly from mean transmission lengths, without
/// the overhead/payload split. Used to cross-check against the exact chain
/// oracle, which works with arbitrary length distributions.
pub fn onoff_distribution_from_means(
    graph: &ConflictGraph,
    p: &[f64],
    gamma: u32,
    means: &[f64],
) -> Result<OnOffDistribution> {
    let params = ProtocolParams {
        p: p.to_vec(),
        gamma,
        tau_prime: 1,
        t0: 1.0,
    };
    let analyzer = Analyzer::new(graph, params)?;
    if means.len() != graph.num_links() {
        return Err(Error::DimensionMismatch {
            what: "mean lengths",
            expected: graph.num_links(),
            got: means.len(),
        });
    }
    for &t in means {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("mean length {t} must be positive")));
        }
    }
    let log_t: Vec<f64> = means.iter().map(|&t| t.ln()).collect();
    let (mut lw, log_e) = analyzer.log_weights_from_means(&log_t);
    for v in &mut lw {
        *v = (*v - log_e).exp();
    }
    Ok(OnOffDistribution {
        probs: lw,
        log_normalizer: log_e,
    })
}

/// Per-link service rates (one-shot convenience).
pub fn service_rates(
    graph: &ConflictGraph,
    params: &ProtocolParams,
    r: &LengthExponents,
) -> Result<Vec<f64>> {
    Analyzer::new(graph, params.clone())?.service_rates(r)
}

/// Detailed-state distribution (one-shot convenience).
pub fn detailed_distribution(
    graph: &ConflictGraph,
    params: &ProtocolParams,
    r: &LengthExponents,
) -> Result<DetailedDistribution> {
    Analyzer::new(graph, params.clone())?.detailed_distribution(r)
}

/// Log-likelihood and gradient (one-shot convenience).
pub fn log_likelihood(
    graph: &ConflictGraph,
    params: &ProtocolParams,
    r: &LengthExponents,
    lambda: &[f64],
) -> Result<(f64, Vec<f64>)> {
    Analyzer::new(graph, params.clone())?.log_likelihood(r, lambda)
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
