//! Exact (non-asymptotic) quantities of `H_n`: the mean recurrence, the
//! distribution by dynamic programming, and the Poisson transform
//! `h(x) = sum_n E(H_n) x^n / n! e^{-x}` evaluated two independent ways.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, CompensatedSum};
use crate::params::SplitParams;

/// Rows up to this size use exact binomial coefficients; larger rows go through log-factorials.
const DIRECT_BINOMIAL_MAX: usize = 50;

/// Tail mass below which the distribution table stops growing in `k`.
pub const CDF_TAIL_CUTOFF: f64 = 1e-15;

/// Binomial(n, p) probability rows, built on demand.
#[derive(Debug, Clone)]
pub struct BinomialRows {
    p: f64,
    q: f64,
    ln_fact: Vec<f64>,
}

impl BinomialRows {
    pub fn new(params: &SplitParams) -> Self {
        Self {
            p: params.p(),
            q: params.q(),
            ln_fact: alloc::vec![0.0],
        }
    }

    fn ln_factorial(&mut self, n: usize) -> f64 {
        while self.ln_fact.len() <= n {
            let m = self.ln_fact.len();
            self.ln_fact.push(math::lgamma(m as f64 + 1.0));
        }
        self.ln_fact[n]
    }

    /// `P(S_n = j)` for `j = 0..=n`.
    pub fn row(&mut self, n: usize) -> Vec<f64> {
        let (p, q) = (self.p, self.q);
        if n <= DIRECT_BINOMIAL_MAX {
            let mut coef = 1.0;
            (0..=n)
                .map(|j| {
                    if j > 0 {
                        coef = coef * (n - j + 1) as f64 / j as f64;
                    }
                    coef * math::powi(p, j as i32) * math::powi(q, (n - j) as i32)
                })
                .collect()
        } else {
            let (lp, lq) = (math::ln(p), math::ln(q));
            let lfn = self.ln_factorial(n);
            (0..=n)
                .map(|j| {
                    let lc = lfn - self.ln_factorial(j) - self.ln_factorial(n - j);
                    math::exp(lc + j as f64 * lp + (n - j) as f64 * lq)
                })
                .collect()
        }
    }
}

/// `E(H_0), ..., E(H_N)` for one bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTable {
    p: f64,
    values: Vec<f64>,
}

impl MeanTable {
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Largest `n` in the table.
    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.values.get(n).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Solves the mean recurrence
/// `E(H_n) = (1 + sum_{j=1}^{n-1} C(n,j) p^j q^{n-j} E(H_j)) / (1 - p^n - q^n)`
/// with `E(H_0) = E(H_1) = 0`.
pub fn exact_mean_table(max_n: usize, params: &SplitParams) -> Result<MeanTable> {
    if max_n < 1 {
        return Err(Error::InvalidArgument("mean table needs N >= 1"));
    }
    let (p, q) = (params.p(), params.q());
    let mut rows = BinomialRows::new(params);
    let mut values = alloc::vec![0.0; max_n + 1];
    for n in 2..=max_n {
        let w = rows.row(n);
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for j in 2..n {
            acc.add(w[j] * values[j]);
        }
        let stay = math::powi(p, n as i32) + math::powi(q, n as i32);
        values[n] = acc.value() / (1.0 - stay);
    }
    Ok(MeanTable { p, values })
}

/// `P(H_n <= k)` for `n <= max_n`, `k <= k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    p: f64,
    max_n: usize,
    /// `rows[k][n]`
    rows: Vec<Vec<f64>>,
    /// Whether the last row reached `1 - P <= CDF_TAIL_CUTOFF` for every `n`.
    saturated: bool,
}

impl CdfTable {
    /// Builds rows `k = 0, 1, ...` until `k_limit` or until every `n`
    /// satisfies `1 - P(H_n <= k) <= CDF_TAIL_CUTOFF`, whichever comes first.
    pub fn build(max_n: usize, k_limit: usize, params: &SplitParams) -> Self {
        let q = params.q();
        let mut bin = BinomialRows::new(params);
        let weights: Vec<Vec<f64>> = (0..=max_n).map(|n| bin.row(n)).collect();
        let stay: Vec<f64> = (0..=max_n).map(|n| math::powi(q, n as i32)).collect();

        let first: Vec<f64> = (0..=max_n).map(|n| if n <= 1 { 1.0 } else { 0.0 }).collect();
        let mut rows = alloc::vec![first];
        let mut saturated = max_n <= 1;
        while rows.len() <= k_limit && !saturated {
            let prev = rows.last().expect("at least one row");
            let next: Vec<f64> = (0..=max_n)
                .map(|n| {
                    if n <= 1 {
                        return 1.0;
                    }
                    let mut acc = CompensatedSum::new();
                    for j in 1..=n {
                        acc.add(weights[n][j] * prev[j]);
                    }
                    acc.add(stay[n] * prev[n]);
                    acc.value().min(1.0)
                })
                .collect();
            saturated = next.iter().all(|&v| 1.0 - v <= CDF_TAIL_CUTOFF);
            rows.push(next);
        }
        Self {
            p: params.p(),
            max_n,
            rows,
            saturated,
        }
    }

    /// Builds until saturation.
    pub fn build_saturated(max_n: usize, params: &SplitParams) -> Self {
        Self::build(max_n, usize::MAX - 1, params)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    /// Largest `k` stored.
    pub fn k_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// `P(H_n <= k)`. Past a saturated table's last row the stored value is
    /// within `CDF_TAIL_CUTOFF` of the truth and is returned as is.
    pub fn cdf(&self, n: usize, k: usize) -> Option<f64> {
        if n > self.max_n {
            return None;
        }
        match self.rows.get(k) {
            Some(row) => Some(row[n]),
            None if self.saturated => Some(self.rows[self.k_max()][n]),
            None => None,
        }
    }

    /// `sum_k (1 - P(H_n <= k))` over the stored rows.
    pub fn tail_sum(&self, n: usize) -> Option<f64> {
        if n > self.max_n {
            return None;
        }
        Some(math::compensated_sum(self.rows.iter().map(|r| 1.0 - r[n])))
    }
}

/// `P(H_n <= k)` by conditioning on the number of 1-flippers in the first round.
pub fn exact_cdf_dp(n: usize, k: usize, params: &SplitParams) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    CdfTable::build(n, k, params)
        .cdf(n, k)
        .expect("table covers n and saturates or reaches k")
}

/// `1 - (1 + x) e^{-x}`, the forcing term of the functional equation.
pub fn forcing_term(x: f64) -> f64 {
    -math::expm1(-x) - x * math::exp(-x)
}

#[inline]
fn ln_poisson_pmf(n: usize, x: f64) -> f64 {
    n as f64 * math::ln(x) - x - math::lgamma(n as f64 + 1.0)
}

fn series_with_table(x: f64, table: &MeanTable, tol: f64) -> Option<f64> {
    if x == 0.0 {
        return Some(0.0);
    }
    let mut acc = CompensatedSum::new();
    for n in 2..=table.max_n() {
        let term = table.values()[n] * math::exp(ln_poisson_pmf(n, x));
        acc.add(term);
        let ratio = x / (n as f64 + 1.0);
        if ratio < 1.0 {
            // Poisson weights decay geometrically from here on and E(H_n) grows
            // sublinearly, so the tail is below term * (r/(1-r) + r/(1-r)^2).
            let bound = term * (ratio / (1.0 - ratio) + ratio / ((1.0 - ratio) * (1.0 - ratio)));
            let sum = acc.value();
            if bound <= tol * sum || (sum == 0.0 && term == 0.0 && n as f64 > x + 1.0) {
                return Some(sum);
            }
        }
    }
    None
}

/// `h(x)` by direct summation of the Poisson-weighted mean table.
pub fn poisson_transform_series(x: f64, params: &SplitParams, tol: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument("Poisson transform needs finite x >= 0"));
    }
    let mut max_n = (x + 10.0 * math::sqrt(x) + 30.0) as usize;
    loop {
        let table = exact_mean_table(max_n, params)?;
        if let Some(v) = series_with_table(x, &table, tol) {
            return Ok(v);
        }
        max_n *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixpointConfig {
    /// Arguments at or below this are evaluated by the series.
    pub base_threshold: f64,
    pub max_depth: u32,
}

impl Default for FixpointConfig {
    fn default() -> Self {
        Self {
            base_threshold: 0.5,
            max_depth: 64,
        }
    }
}

/// `h(x)` by unrolling `h(x) = h(px) + h(qx) e^{-px} + 1 - (1 + x) e^{-x}`
/// until every argument is below the base threshold.
pub fn poisson_transform_fixpoint(
    x: f64,
    params: &SplitParams,
    config: &FixpointConfig,
) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument("Poisson transform needs finite x >= 0"));
    }
    if config.base_threshold.is_nan() || config.base_threshold <= 0.0 {
        return Err(Error::InvalidArgument("base threshold must be positive"));
    }
    let base_n = (config.base_threshold + 10.0 * math::sqrt(config.base_threshold) + 30.0) as usize;
    let table = exact_mean_table(base_n.max(2), params)?;
    let base = |arg: f64| {
        series_with_table(arg, &table, 1e-17)
            .ok_or(Error::InvalidArgument("base threshold too large for the base series"))
    };
    unroll(x, params, config, config.max_depth, &base)
}

fn unroll<B>(x: f64, params: &SplitParams, config: &FixpointConfig, depth: u32, base: &B) -> Result<f64>
where
    B: Fn(f64) -> Result<f64>,
{
    if x <= config.base_threshold {
        return base(x);
    }
    if depth == 0 {
        return Err(Error::DepthExhausted {
            depth: config.max_depth,
            x,
        });
    }
    let left = unroll(params.p() * x, params, config, depth - 1, base)?;
    let right = unroll(params.q() * x, params, config, depth - 1, base)?;
    Ok(left + right * math::exp(-params.p() * x) + forcing_term(x))
}
