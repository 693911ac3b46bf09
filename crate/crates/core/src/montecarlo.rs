//! Stochastic estimators of the mean cost, the Lemma decomposition, the
//! Gamma(2, 1) functionals of the asymptotic expansion, and the exponential
//! moment of `tau(x, x)`.
//!
//! Trials are grouped in fixed chunks of [`CHUNK_TRIALS`]; trial `t` always
//! draws from stream `t` of the run seed, and chunk results are merged in
//! chunk order, so every estimate is bit-identical under any [`Executor`].

use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::asymptotics::{lemma_terms, LemmaTerms};
use crate::chain::{jump_indices, walk_covering, Exit, SplitStep};
use crate::error::{Error, Result};
use crate::math::{self, CompensatedSum};
use crate::params::SplitParams;
use crate::protocol::election_cost;
use crate::rng::{TrialRng, TrialSeeder};

pub const CHUNK_TRIALS: u64 = 1024;

/// Streams of grid point `g` in [`mc_conjecture`] start at `g << GRID_STREAM_SHIFT`.
pub const GRID_STREAM_SHIFT: u32 = 40;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sample standard deviation over `sqrt(completed trials)`.
    pub stderr: f64,
    pub trials: u64,
    /// Trials that hit a step cap; excluded from `value`.
    pub truncated_count: u64,
    pub seed: u64,
}

impl Estimate {
    pub fn is_reliable(&self) -> bool {
        self.truncated_count == 0
    }

    /// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * math::sqrt(self.stderr * self.stderr + other.stderr * other.stderr)
    }

    /// `|value - target| <= k * stderr`.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Welford mean and variance with a compensated total and the running max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
    total: CompensatedSum,
    max: f64,
    truncated: u64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self::new()
    }
}

impl RunningStats {
    pub const fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            total: CompensatedSum::new(),
            max: f64::NEG_INFINITY,
            truncated: 0,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        self.total.add(x);
        if x > self.max {
            self.max = x;
        }
    }

    pub fn push_truncated(&mut self) {
        self.truncated += 1;
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &RunningStats) {
        self.truncated += other.truncated;
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            let truncated = self.truncated;
            *self = *other;
            self.truncated = truncated;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.mean += d * other.count as f64 / n;
        self.count += other.count;
        self.total.merge(&other.total);
        self.max = self.max.max(other.max);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn truncated(&self) -> u64 {
        self.truncated
    }

    /// Compensated sum divided by the count.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.total.value() / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn stderr(&self) -> f64 {
        math::sqrt(self.variance() / self.count as f64)
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn estimate(&self, seed: u64) -> Estimate {
        Estimate {
            value: self.mean(),
            stderr: self.stderr(),
            trials: self.count + self.truncated,
            truncated_count: self.truncated,
            seed,
        }
    }
}

/// Runs chunk jobs, possibly in parallel; results come back in chunk order.
pub trait Executor {
    fn map_chunks<T, F>(&self, chunks: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_chunks<T, F>(&self, chunks: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..chunks).map(job).collect()
    }
}

fn chunk_range(chunk: usize, trials: u64) -> Range<u64> {
    let lo = chunk as u64 * CHUNK_TRIALS;
    lo..(lo + CHUNK_TRIALS).min(trials)
}

fn chunk_count(trials: u64) -> usize {
    trials.div_ceil(CHUNK_TRIALS) as usize
}

/// Folds `trial(rng) -> acc` over `trials` trials on streams `offset + t`,
/// then merges the chunk accumulators left to right.
pub fn fold_trials<E, A, F, M>(exec: &E, seed: u64, offset: u64, trials: u64, trial: F, merge: M) -> Result<A>
where
    E: Executor,
    A: Default + Send,
    F: Fn(&mut A, &mut TrialRng) -> Result<()> + Sync + Send,
    M: Fn(&mut A, A),
{
    let seeder = TrialSeeder::new(seed);
    let parts = exec.map_chunks(chunk_count(trials), |c| -> Result<A> {
        let mut acc = A::default();
        for t in chunk_range(c, trials) {
            let mut rng = seeder.stream(offset + t);
            trial(&mut acc, &mut rng)?;
        }
        Ok(acc)
    });
    let mut total = A::default();
    for part in parts {
        merge(&mut total, part?);
    }
    Ok(total)
}

fn fold_stats<E, F>(exec: &E, seed: u64, offset: u64, trials: u64, trial: F) -> Result<RunningStats>
where
    E: Executor,
    F: Fn(&mut TrialRng) -> Result<Option<f64>> + Sync + Send,
{
    fold_trials(
        exec,
        seed,
        offset,
        trials,
        |acc: &mut RunningStats, rng| {
            match trial(rng)? {
                Some(v) => acc.push(v),
                None => acc.push_truncated(),
            }
            Ok(())
        },
        |a, b| a.merge(&b),
    )
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1"));
    }
    Ok(())
}

/// Sampling settings shared by the chain-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McRun {
    pub trials: u64,
    pub seed: u64,
    pub max_steps: u64,
}

impl McRun {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            max_steps: crate::chain::DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }
}

/// `(U_{1,n}, U_{2,n})`, the two smallest of `n` i.i.d. uniforms, from
/// exponential spacings: `U_1 = E_1 / S`, `U_2 = (E_1 + E_2) / S` with
/// `S = E_1 + E_2 + Gamma(n - 1, 1)`.
pub fn sample_order_stats_pair<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidArgument("order statistics pair needs n >= 2"));
    }
    let rest = Gamma::new((n - 1) as f64, 1.0).map_err(|_| Error::InvalidArgument("gamma shape"))?;
    loop {
        let e1: f64 = Exp1.sample(rng);
        let e2: f64 = Exp1.sample(rng);
        let r: f64 = rest.sample(rng);
        let s = e1 + e2 + r;
        let (u1, u2) = (e1 / s, (e1 + e2) / s);
        // Reject the measure-zero ties and endpoint roundings.
        if u1 > 0.0 && u1 < u2 && u2 < 1.0 {
            return Ok((u1, u2));
        }
    }
}

/// `sum_{i < tau(x, y)} 1/pi_i` along one fresh chain, or `None` if truncated.
pub fn cost_to_tau<R: Rng + ?Sized>(params: &SplitParams, x: f64, y: f64, rng: &mut R, max_steps: u64) -> Result<Option<f64>> {
    let mut acc = CompensatedSum::new();
    let exit = walk_covering(params, x, y, rng, max_steps, |state, _| {
        acc.add(state.inv_pi()?);
        Ok(())
    })?;
    Ok(exit.tau().map(|_| acc.value()))
}

/// `E(H_n)` as `E(sum_{i < tau(U_1, U_2)} 1/pi_i)`.
pub fn mc_mean_cost_via_tau<E: Executor>(n: u64, params: &SplitParams, run: &McRun, exec: &E) -> Result<Estimate> {
    check_trials(run.trials)?;
    if n < 2 {
        return Err(Error::InvalidArgument("hitting-time representation needs n >= 2"));
    }
    let stats = fold_stats(exec, run.seed, 0, run.trials, |rng| {
        let (u1, u2) = sample_order_stats_pair(n, rng)?;
        cost_to_tau(params, u1, u2, rng, run.max_steps)
    })?;
    Ok(stats.estimate(run.seed))
}

/// Mean number of coin-flip rounds of the protocol itself.
pub fn mc_protocol_mean<E: Executor>(n: u32, params: &SplitParams, trials: u64, seed: u64, max_rounds: u64, exec: &E) -> Result<Estimate> {
    check_trials(trials)?;
    let stats = fold_stats(exec, seed, 0, trials, |rng| Ok(election_cost(n, params, rng, max_rounds).map(|r| r as f64)))?;
    Ok(stats.estimate(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub terms: LemmaTerms,
    /// Direct estimate of `E(sum_{i < tau} 1/pi_i)`.
    pub lhs: Estimate,
    /// Deterministic terms plus the sampled remainder, on the same chains.
    pub rhs: Estimate,
    /// Paired `lhs - rhs`.
    pub difference: Estimate,
    /// Variance of the paired difference.
    pub paired_variance: f64,
    /// `Var(lhs) + Var(rhs)`: the difference variance under independent sampling.
    pub independent_variance: f64,
}

impl LemmaCheck {
    /// Difference within `k` standard errors of zero.
    pub fn holds(&self, k: f64) -> bool {
        self.difference.covers(0.0, k)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LemmaAcc {
    lhs: RunningStats,
    rhs: RunningStats,
    diff: RunningStats,
}

/// One chain, both sides: `Ok(None)` when truncated.
fn lemma_trial<R: Rng + ?Sized>(
    params: &SplitParams,
    x: f64,
    y: f64,
    terms: &LemmaTerms,
    rng: &mut R,
    max_steps: u64,
) -> Result<Option<(f64, f64)>> {
    let mut lhs = CompensatedSum::new();
    let mut tail = CompensatedSum::new();
    let mut steps: Vec<SplitStep> = Vec::new();
    let exit = walk_covering(params, x, y, rng, max_steps, |state, step| {
        let w = state.inv_pi()?;
        lhs.add(w);
        if state.index() > terms.gamma1 {
            tail.add(w);
        }
        if let Some(s) = step {
            steps.push(s);
        }
        Ok(())
    })?;
    if matches!(exit, Exit::Truncated(_)) {
        return Ok(None);
    }
    let mut rhs = terms.first + terms.second;
    if terms.omega {
        let jumps = jump_indices(&steps);
        let gated = jumps.first() == Some(&terms.gamma0) && jumps.get(1) == Some(&terms.gamma1);
        if gated {
            rhs += tail.value();
        }
    }
    Ok(Some((lhs.value(), rhs)))
}

/// Checks the Lemma decomposition at `(x, y)` with common random numbers.
pub fn mc_lemma_check<E: Executor>(x: f64, y: f64, params: &SplitParams, run: &McRun, exec: &E) -> Result<LemmaCheck> {
    check_trials(run.trials)?;
    let terms = lemma_terms(x, y, params)?;
    let acc = fold_trials(
        exec,
        run.seed,
        0,
        run.trials,
        |acc: &mut LemmaAcc, rng| {
            match lemma_trial(params, x, y, &terms, rng, run.max_steps)? {
                Some((l, r)) => {
                    acc.lhs.push(l);
                    acc.rhs.push(r);
                    acc.diff.push(l - r);
                }
                None => {
                    acc.lhs.push_truncated();
                    acc.rhs.push_truncated();
                    acc.diff.push_truncated();
                }
            }
            Ok(())
        },
        |a, b| {
            a.lhs.merge(&b.lhs);
            a.rhs.merge(&b.rhs);
            a.diff.merge(&b.diff);
        },
    )?;
    Ok(LemmaCheck {
        terms,
        lhs: acc.lhs.estimate(run.seed),
        rhs: acc.rhs.estimate(run.seed),
        difference: acc.diff.estimate(run.seed),
        paired_variance: acc.diff.variance(),
        independent_variance: acc.lhs.variance() + acc.rhs.variance(),
    })
}

/// `t_2 ~ Gamma(2, 1)` as a sum of two unit exponentials.
fn sample_t2<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    a + b
}

/// Monte Carlo of `E(ceil(log_p t_2))`.
pub fn mc_const_term<E: Executor>(params: &SplitParams, trials: u64, seed: u64, exec: &E) -> Result<Estimate> {
    check_trials(trials)?;
    let lp = math::ln(params.p());
    let stats = fold_stats(exec, seed, 0, trials, |rng| Ok(Some(math::ceil(math::ln(sample_t2(rng)) / lp))))?;
    Ok(stats.estimate(seed))
}

/// Monte Carlo of `F(z)`: the integrand against `y e^{-y} dy` is the
/// expectation of its remaining factor at `y = t_2`.
pub fn mc_big_f<E: Executor>(z: f64, params: &SplitParams, trials: u64, seed: u64, exec: &E) -> Result<Estimate> {
    check_trials(trials)?;
    let p = params.p();
    let lp = math::ln(p);
    let stats = fold_stats(exec, seed, 0, trials, |rng| {
        let w = math::ln(sample_t2(rng)) / lp - z;
        let fl = math::floor(w);
        let m = 1.0 - libm::pow(p, 1.0 - (w - fl));
        if m <= 0.0 {
            return Ok(Some(0.0));
        }
        let c = math::ceil(math::ln(m / (1.0 - p)) / lp + w);
        Ok(Some(m * (c - fl)))
    })?;
    Ok(stats.estimate(seed))
}

/// Log-space accumulator for a mean of `exp(l_t)`, with `l_t` possibly far
/// beyond the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogMeanExp {
    count: u64,
    /// Largest `l_t` seen; both sums are scaled by `exp(-shift)`.
    shift: f64,
    sum: f64,
    /// Sum of `exp(2 (l_t - shift))`.
    sum_sq: f64,
}

impl Default for LogMeanExp {
    fn default() -> Self {
        Self {
            count: 0,
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }
}

impl LogMeanExp {
    fn rescale(&mut self, shift: f64) {
        if shift > self.shift {
            let r = math::exp(self.shift - shift);
            self.sum *= r;
            self.sum_sq *= r * r;
            self.shift = shift;
        }
    }

    pub fn push(&mut self, l: f64) {
        self.rescale(l);
        self.count += 1;
        let e = math::exp(l - self.shift);
        self.sum += e;
        self.sum_sq += e * e;
    }

    pub fn merge(&mut self, other: &LogMeanExp) {
        if other.count == 0 {
            return;
        }
        self.rescale(other.shift);
        let r = math::exp(other.shift - self.shift);
        self.sum += other.sum * r;
        self.sum_sq += other.sum_sq * r * r;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `ln` of the sample mean.
    pub fn ln_mean(&self) -> f64 {
        self.shift + math::ln(self.sum / self.count as f64)
    }

    /// Standard error of `ln(mean)` by the delta method.
    pub fn ln_stderr(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return f64::NAN;
        }
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        math::sqrt(var / n) / mean
    }

    /// Share of the total carried by the single largest term.
    pub fn top_share(&self) -> f64 {
        1.0 / self.sum
    }
}

/// Estimates for one grid point of the exponential-moment study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjecturePoint {
    pub x: f64,
    /// `log10 E(delta^{-2 tau(x, x)})`.
    pub log10_moment: f64,
    /// Delta-method standard error of `log10_moment`.
    pub log10_moment_stderr: f64,
    pub mean_tau: Estimate,
    pub max_tau: u64,
    /// Fraction of the moment estimate contributed by the largest trial.
    pub top_share: f64,
}

impl ConjecturePoint {
    /// Set when one trial carries more than half of the moment estimate.
    pub fn tail_dominated(&self) -> bool {
        self.top_share > 0.5
    }

    pub fn truncated(&self) -> u64 {
        self.mean_tau.truncated_count
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ConjectureAcc {
    tau: RunningStats,
    moment: LogMeanExp,
}

/// `E(delta^{-2 tau(x, x)})` and `E(tau(x, x))` for each `x`; truncated chains are
/// excluded from both and counted.
pub fn mc_conjecture<E: Executor>(xgrid: &[f64], params: &SplitParams, run: &McRun, exec: &E) -> Result<Vec<ConjecturePoint>> {
    check_trials(run.trials)?;
    if xgrid.is_empty() {
        return Err(Error::InvalidArgument("x grid is empty"));
    }
    let rate = -2.0 * math::ln(params.delta());
    let mut out = Vec::with_capacity(xgrid.len());
    for (g, &x) in xgrid.iter().enumerate() {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidArgument("x grid must lie in (0, 1)"));
        }
        let acc = fold_trials(
            exec,
            run.seed,
            (g as u64) << GRID_STREAM_SHIFT,
            run.trials,
            |acc: &mut ConjectureAcc, rng| {
                match walk_covering(params, x, x, rng, run.max_steps, |_, _| Ok(()))?.tau() {
                    Some(t) => {
                        acc.tau.push(t as f64);
                        acc.moment.push(rate * t as f64);
                    }
                    None => acc.tau.push_truncated(),
                }
                Ok(())
            },
            |a, b| {
                a.tau.merge(&b.tau);
                a.moment.merge(&b.moment);
            },
        )?;
        let ln10 = core::f64::consts::LN_10;
        out.push(ConjecturePoint {
            x,
            log10_moment: acc.moment.ln_mean() / ln10,
            log10_moment_stderr: acc.moment.ln_stderr() / ln10,
            mean_tau: acc.tau.estimate(run.seed),
            max_tau: if acc.tau.count() > 0 { acc.tau.max() as u64 } else { 0 },
            top_share: acc.moment.top_share(),
        });
    }
    Ok(out)
}
