//! Exact distribution of `H_n` through the binary decomposition of `[0, 1]`
//! in base `(p_0, p_1) = (p, q)`.
//!
//! Level `k` has `2^k` intervals; interval `i` has length `prod p_{a_j}` over
//! the binary digits `a_j` of `i`, and interval `i` at level `k + 1` is the
//! `i mod 2` child of interval `i / 2` at level `k`. The measure `mu_k` puts
//! each interval's length at its right end, and
//! `P(H_n <= k) = n * integral (1 - t)^{n-1} dmu_k(t)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, CompensatedSum};
use crate::params::SplitParams;

/// Deepest level that is materialised (two arrays of `2^k` doubles).
pub const MAX_LEVEL: u32 = 25;

/// Deepest level accepted by the streaming evaluators.
pub const MAX_STREAMING_LEVEL: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDecomposition {
    level: u32,
    rights: Vec<f64>,
    lengths: Vec<f64>,
}

fn check_level(k: u32, cap: u32) -> Result<()> {
    if k > cap {
        Err(Error::LevelTooDeep { k, cap })
    } else {
        Ok(())
    }
}

fn prefix_sums(lengths: &[f64]) -> Vec<f64> {
    let mut acc = CompensatedSum::new();
    lengths
        .iter()
        .map(|&l| {
            acc.add(l);
            acc.value()
        })
        .collect()
}

impl IntervalDecomposition {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rights(&self) -> &[f64] {
        &self.rights
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Left end of interval `i`.
    pub fn left(&self, i: usize) -> f64 {
        self.rights[i] - self.lengths[i]
    }

    pub fn measure(&self) -> DiscreteMeasure {
        DiscreteMeasure {
            atoms: self
                .lengths
                .iter()
                .zip(&self.rights)
                .map(|(&w, &t)| Atom { weight: w, location: t })
                .collect(),
        }
    }
}

/// Level `k` by the level-to-level recursion: each right end is the previous
/// right end plus `p_{i mod 2}` times the parent length.
pub fn build_intervals(k: u32, params: &SplitParams) -> Result<IntervalDecomposition> {
    check_level(k, MAX_LEVEL)?;
    let base = [params.p(), params.q()];
    let mut lengths = alloc::vec![1.0];
    for _ in 0..k {
        lengths = (0..lengths.len() * 2)
            .map(|i| base[i & 1] * lengths[i >> 1])
            .collect();
    }
    Ok(IntervalDecomposition {
        level: k,
        rights: prefix_sums(&lengths),
        lengths,
    })
}

/// Level `k` with each length computed from the binary digits of its index.
pub fn build_intervals_by_digits(k: u32, params: &SplitParams) -> Result<IntervalDecomposition> {
    check_level(k, MAX_LEVEL)?;
    let (lp, lq) = (math::ln(params.p()), math::ln(params.q()));
    let lengths: Vec<f64> = (0..1usize << k)
        .map(|i| {
            let ones = i.count_ones();
            math::exp(ones as f64 * lq + (k - ones) as f64 * lp)
        })
        .collect();
    Ok(IntervalDecomposition {
        level: k,
        rights: prefix_sums(&lengths),
        lengths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub weight: f64,
    pub location: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn total_mass(&self) -> f64 {
        math::compensated_sum(self.atoms.iter().map(|a| a.weight))
    }

    /// `integral g dmu`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        math::compensated_sum(self.atoms.iter().map(|a| a.weight * g(a.location)))
    }
}

/// The atomic measure `mu_k`.
pub fn measure(k: u32, params: &SplitParams) -> Result<DiscreteMeasure> {
    Ok(build_intervals(k, params)?.measure())
}

/// `integral g dmu_k` by depth-first traversal, without materialising the level.
pub fn integrate_streaming<G: Fn(f64) -> f64>(k: u32, params: &SplitParams, g: G) -> Result<f64> {
    check_level(k, MAX_STREAMING_LEVEL)?;
    fn visit<G: Fn(f64) -> f64>(
        left: f64,
        len: f64,
        depth: u32,
        p: f64,
        g: &G,
        acc: &mut CompensatedSum,
    ) {
        if depth == 0 {
            acc.add(len * g(left + len));
            return;
        }
        let split = len * p;
        visit(left, split, depth - 1, p, g, acc);
        visit(left + split, len - split, depth - 1, p, g, acc);
    }
    let mut acc = CompensatedSum::new();
    visit(0.0, 1.0, k, params.p(), &g, &mut acc);
    Ok(acc.value())
}

fn cdf_kernel(n: usize) -> impl Fn(f64) -> f64 {
    move |t: f64| n as f64 * math::powi(1.0 - t, n as i32 - 1)
}

fn poisson_kernel(x: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| x * math::exp(-x * t)
}

fn tail_kernel(n: usize) -> impl Fn(f64) -> f64 {
    // P(U_{2,n} < t) = 1 - (1-t)^n - n t (1-t)^{n-1}
    move |t: f64| {
        let s = 1.0 - t;
        let sn1 = math::powi(s, n as i32 - 1);
        1.0 - s * sn1 - n as f64 * t * sn1
    }
}

/// `P(H_n <= k) = n * sum_i |I_i| (1 - (I_i)_+)^{n-1}`.
pub fn cdf_exact(n: usize, k: u32, params: &SplitParams) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("interval formula needs n >= 2"));
    }
    Ok(measure(k, params)?.integrate(cdf_kernel(n)))
}

/// [`cdf_exact`] for levels up to [`MAX_STREAMING_LEVEL`].
pub fn cdf_exact_streaming(n: usize, k: u32, params: &SplitParams) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("interval formula needs n >= 2"));
    }
    integrate_streaming(k, params, cdf_kernel(n))
}

/// `P(H_{N_x} <= k) = e^{-x} + x sum_i |I_i| e^{-x (I_i)_+}` for a Poisson(x) population.
pub fn poisson_cdf(x: f64, k: u32, params: &SplitParams) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument("Poisson population needs finite x >= 0"));
    }
    Ok(math::exp(-x) + measure(k, params)?.integrate(poisson_kernel(x)))
}

/// [`poisson_cdf`] for levels up to [`MAX_STREAMING_LEVEL`].
pub fn poisson_cdf_streaming(x: f64, k: u32, params: &SplitParams) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::InvalidArgument("Poisson population needs finite x >= 0"));
    }
    Ok(math::exp(-x) + integrate_streaming(k, params, poisson_kernel(x))?)
}

/// `integral P(U_{2,n} < t) dmu_k(t)`, the large-`n` equivalent of `P(H_n > k)`.
pub fn tail_approx(n: usize, k: u32, params: &SplitParams) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("tail approximation needs n >= 2"));
    }
    Ok(measure(k, params)?.integrate(tail_kernel(n)))
}
