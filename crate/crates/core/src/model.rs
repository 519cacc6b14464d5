//! The equicorrelated Gaussian stream model.
//!
//! Each time step produces a vector `X_n ~ MVN_K(mu_vec, M_K(rho))` where
//! `M_K(rho)` has unit diagonal and `rho` off the diagonal, and
//! `mu_vec[i] = mu` for signal streams and `0` otherwise. Draws are realized
//! through the shared-factor decomposition `X_n = Z_n + V_n * 1`, with
//! `Z_in ~ N(mu_i, 1 - rho)` independent across streams and `V_n ~ N(0, rho)`.
//!
//! Only the cumulative sums `S_i,n` are kept as state. The common factor cancels
//! from every pairwise difference of sums, so the ordered-sum gaps carry all the
//! information the rules need.
//!
//! Stream indices are zero-based throughout the library. Ranks (`m`, `l`, `u`,
//! the `k` of [`SufficientStats::gap_statistic`]) are one-based counts.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Parameters of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    k: usize,
    rho: f64,
    mu: f64,
    signal_set: BTreeSet<usize>,
}

impl ModelParams {
    /// Builds and validates a parameter set. `signal_set` holds zero-based
    /// indices of the streams where the alternative is true.
    pub fn new(
        k: usize,
        rho: f64,
        mu: f64,
        signal_set: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        validate_params(Self {
            k,
            rho,
            mu,
            signal_set: signal_set.into_iter().collect(),
        })
    }

    /// Model with the first `m` streams carrying signal.
    pub fn with_leading_signals(k: usize, rho: f64, mu: f64, m: usize) -> Result<Self> {
        Self::new(k, rho, mu, 0..m)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn signal_set(&self) -> &BTreeSet<usize> {
        &self.signal_set
    }

    pub fn num_signals(&self) -> usize {
        self.signal_set.len()
    }

    pub fn is_signal(&self, i: usize) -> bool {
        self.signal_set.contains(&i)
    }

    /// Per-stream means `mu_i = mu * 1{i in A}`.
    pub fn means(&self) -> Vec<f64> {
        (0..self.k)
            .map(|i| if self.is_signal(i) { self.mu } else { 0.0 })
            .collect()
    }

    /// The implied covariance matrix `M_K(rho)`, row-major.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| {
                (0..self.k)
                    .map(|j| if i == j { 1.0 } else { self.rho })
                    .collect()
            })
            .collect()
    }

    /// Same model with a different correlation.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        validate_params(Self {
            rho,
            ..self.clone()
        })
    }
}

/// Checks every model invariant, returning the parameters unchanged on success.
pub fn validate_params(params: ModelParams) -> Result<ModelParams> {
    if params.k < 2 {
        return Err(Error::TooFewStreams(params.k));
    }
    if !(0.0..1.0).contains(&params.rho) {
        return Err(Error::RhoOutOfRange(params.rho));
    }
    if !(params.mu > 0.0 && params.mu.is_finite()) {
        return Err(Error::NonPositiveMu(params.mu));
    }
    if let Some(&index) = params.signal_set.iter().find(|&&i| i >= params.k) {
        return Err(Error::SignalOutOfRange { index, k: params.k });
    }
    Ok(params)
}

/// One time step of observations across all `K` streams.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    values: Vec<f64>,
}

impl ObservationBatch {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Adds the shared factor `v` to every idiosyncratic component.
pub fn combine_latents(z: &[f64], v: f64, k: usize) -> Result<ObservationBatch> {
    if z.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            got: z.len(),
        });
    }
    Ok(ObservationBatch::new(z.iter().map(|zi| zi + v).collect()))
}

/// Draws observation vectors for one parameter set.
///
/// Each step consumes exactly `K + 1` standard normals from the generator:
/// the `K` idiosyncratic draws in stream order, then the common factor. Runs
/// that share a seed therefore share their underlying normals even when `rho`
/// or `mu` differ, which is what the common-random-numbers sweeps rely on.
#[derive(Debug, Clone)]
pub struct Sampler {
    means: Vec<f64>,
    idio_sd: f64,
    common_sd: f64,
    latent: Vec<f64>,
}

impl Sampler {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            means: params.means(),
            idio_sd: (1.0 - params.rho).sqrt(),
            common_sd: params.rho.sqrt(),
            latent: vec![0.0; params.k],
        }
    }

    /// Writes one draw of `X_n` into `out`.
    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.means.len());
        for (z, m) in self.latent.iter_mut().zip(&self.means) {
            let eps: f64 = rng.sample(StandardNormal);
            *z = m + self.idio_sd * eps;
        }
        let eps: f64 = rng.sample(StandardNormal);
        let v = self.common_sd * eps;
        for (x, z) in out.iter_mut().zip(&self.latent) {
            *x = z + v;
        }
    }
}

/// One draw from `MVN_K(mu_vec, M_K(rho))`.
pub fn sample_increment<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> ObservationBatch {
    let mut sampler = Sampler::new(params);
    let mut out = vec![0.0; params.k];
    sampler.fill(rng, &mut out);
    ObservationBatch::new(out)
}

/// Time index and per-stream cumulative sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    n: u64,
    sums: Vec<f64>,
}

impl SufficientStats {
    /// Zero state for `k` streams.
    pub fn new(k: usize) -> Self {
        Self {
            n: 0,
            sums: vec![0.0; k],
        }
    }

    pub fn from_parts(n: u64, sums: Vec<f64>) -> Self {
        Self { n, sums }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn k(&self) -> usize {
        self.sums.len()
    }

    /// Folds one observation vector into the sums.
    pub fn update(&mut self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.sums.len() {
            return Err(Error::LengthMismatch {
                expected: self.sums.len(),
                got: obs.len(),
            });
        }
        for (s, x) in self.sums.iter_mut().zip(obs) {
            *s += x;
        }
        self.n += 1;
        Ok(())
    }

    /// Stream indices sorted by sum, largest first; ties go to the lower index.
    pub fn order_into(&self, order: &mut Vec<usize>) {
        order.clear();
        order.extend(0..self.sums.len());
        order.sort_by(|&a, &b| self.sums[b].total_cmp(&self.sums[a]).then(a.cmp(&b)));
    }

    /// `(stream index, sum)` pairs in nonincreasing order of sum.
    pub fn ordered_sums(&self) -> Vec<(usize, f64)> {
        let mut order = Vec::with_capacity(self.sums.len());
        self.order_into(&mut order);
        order.into_iter().map(|i| (i, self.sums[i])).collect()
    }

    /// `S_(k) - S_(k+1)` for a one-based rank `k` in `1..K`.
    pub fn gap_statistic(&self, k: usize) -> Result<f64> {
        let max = self.sums.len().saturating_sub(1);
        if k == 0 || k > max {
            return Err(Error::RankOutOfRange { rank: k, max });
        }
        let mut order = Vec::with_capacity(self.sums.len());
        self.order_into(&mut order);
        Ok(ranked_gap(&self.sums, &order, k))
    }

    /// `mu / (1 - rho) * (S_i - n mu / 2)`: the latent-stream log-likelihood
    /// ratio evaluated on the observable sum.
    pub fn llr_star(&self, i: usize, params: &ModelParams) -> f64 {
        llr_star_value(self.sums[i], self.n, params.mu, params.rho)
    }

    /// All `K` values of [`Self::llr_star`].
    pub fn llrs_star(&self, params: &ModelParams) -> Vec<f64> {
        self.sums
            .iter()
            .map(|&s| llr_star_value(s, self.n, params.mu, params.rho))
            .collect()
    }
}

pub(crate) fn llr_star_value(sum: f64, n: u64, mu: f64, rho: f64) -> f64 {
    mu / (1.0 - rho) * (sum - n as f64 * mu / 2.0)
}

/// Gap between ranks `k` and `k + 1` given a precomputed descending order.
pub(crate) fn ranked_gap(sums: &[f64], order: &[usize], k: usize) -> f64 {
    sums[order[k - 1]] - sums[order[k]]
}

/// Functional form of [`SufficientStats::update`].
pub fn update_stats(mut stats: SufficientStats, obs: &ObservationBatch) -> Result<SufficientStats> {
    stats.update(obs.values())?;
    Ok(stats)
}
