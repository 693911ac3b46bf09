//! The random interval chain driven by i.i.d. copies of the pair `(A, B)`.
//!
//! State `i` is the interval `[alpha_i, alpha_i + pi_i]`. A left step keeps
//! the left part of length `p * pi`; a right step keeps the right part of
//! length `q * pi`. `nu(x)` is the first index `i >= 1` with `alpha_i > x`,
//! `mu(y)` the first with `alpha_i + pi_i < y`, and `tau = min(nu, mu)`, so
//! states `0..tau` are exactly the intervals that still contain `[x, y]`.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::params::SplitParams;

/// Default cap on chain length.
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;

/// Below this, `pi` is carried in log form only.
const LINEAR_PI_FLOOR: f64 = 1e-300;

/// One realisation of the pair `(A, B)`: `Left = (p, 0)`, `Right = (q, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitStep {
    Left,
    Right,
}

impl SplitStep {
    /// Multiplicative factor `A`.
    #[inline]
    pub fn factor(self, params: &SplitParams) -> f64 {
        match self {
            SplitStep::Left => params.p(),
            SplitStep::Right => params.q(),
        }
    }

    /// Additive increment `B`.
    #[inline]
    pub fn increment(self, params: &SplitParams) -> f64 {
        match self {
            SplitStep::Left => 0.0,
            SplitStep::Right => params.p(),
        }
    }

    #[inline]
    pub fn is_jump(self) -> bool {
        self == SplitStep::Right
    }
}

/// Draws `(p, 0)` with probability `p` and `(q, p)` with probability `q`.
#[inline]
pub fn sample_step<R: Rng + ?Sized>(params: &SplitParams, rng: &mut R) -> SplitStep {
    if rng.random_bool(params.p()) {
        SplitStep::Left
    } else {
        SplitStep::Right
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChain {
    index: u64,
    pi: f64,
    ln_pi: f64,
    alpha: f64,
    /// Kept separately so that right steps leave it bit-identical.
    upper: f64,
}

impl Default for SplitChain {
    fn default() -> Self {
        Self::new()
    }
}

impl SplitChain {
    /// `i = 0`, `pi = 1`, `alpha = 0`.
    pub const fn new() -> Self {
        Self {
            index: 0,
            pi: 1.0,
            ln_pi: 0.0,
            alpha: 0.0,
            upper: 1.0,
        }
    }

    #[inline]
    pub fn index(&self) -> u64 {
        self.index
    }

    /// Interval length. Returns 0 once it has dropped below `1e-300`; use
    /// [`SplitChain::ln_pi`] there.
    #[inline]
    pub fn pi(&self) -> f64 {
        self.pi
    }

    #[inline]
    pub fn ln_pi(&self) -> f64 {
        self.ln_pi
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Right end `alpha + pi` of the current interval.
    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `1 / pi_i`, or [`Error::Overflow`] when it leaves the double range.
    pub fn inv_pi(&self) -> Result<f64> {
        let v = math::exp(-self.ln_pi);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { step: self.index })
        }
    }

    #[must_use]
    pub fn advance(&self, step: SplitStep, params: &SplitParams) -> SplitChain {
        let a = step.factor(params);
        let alpha = self.alpha + self.pi * step.increment(params);
        let ln_pi = self.ln_pi + math::ln(a);
        let pi = if self.pi == 0.0 {
            0.0
        } else {
            let next = self.pi * a;
            if next < LINEAR_PI_FLOOR {
                0.0
            } else {
                next
            }
        };
        let upper = match step {
            SplitStep::Left => self.alpha + self.pi * a,
            SplitStep::Right => self.upper,
        };
        SplitChain {
            index: self.index + 1,
            pi,
            ln_pi,
            alpha,
            upper,
        }
    }

    /// True while the interval still contains `[x, y]` (the state precedes `tau(x, y)`).
    #[inline]
    pub fn covers(&self, x: f64, y: f64) -> bool {
        self.alpha <= x && self.upper() >= y
    }
}

/// Infinite iterator over `(step, state_after_step)` of a freshly sampled chain.
pub struct ChainPath<'a, R: Rng + ?Sized> {
    params: SplitParams,
    state: SplitChain,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> ChainPath<'a, R> {
    pub fn new(params: SplitParams, rng: &'a mut R) -> Self {
        Self {
            params,
            state: SplitChain::new(),
            rng,
        }
    }
}

impl<R: Rng + ?Sized> Iterator for ChainPath<'_, R> {
    type Item = (SplitStep, SplitChain);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        let step = sample_step(&self.params, self.rng);
        self.state = self.state.advance(step, &self.params);
        Some((step, self.state))
    }
}

/// Outcome of one hitting index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    At(u64),
    /// The walk stopped (at `tau`) before this time fired.
    Unresolved,
    /// The step cap was reached first.
    Truncated,
}

impl Hit {
    pub fn index(self) -> Option<u64> {
        match self {
            Hit::At(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HittingTimes {
    pub nu: Hit,
    pub mu: Hit,
    pub tau: Hit,
}

/// How a walk left the set of intervals covering `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    /// `alpha_i > x` first, at index `i`.
    Nu(u64),
    /// `alpha_i + pi_i < y` first, at index `i`.
    Mu(u64),
    /// Still covering after this many steps.
    Truncated(u64),
}

impl Exit {
    pub fn tau(self) -> Option<u64> {
        match self {
            Exit::Nu(i) | Exit::Mu(i) => Some(i),
            Exit::Truncated(_) => None,
        }
    }
}

fn check_window(x: f64, y: f64, max_steps: u64) -> Result<()> {
    if !(x > 0.0 && x <= y && y < 1.0) {
        return Err(Error::InvalidArgument("hitting window needs 0 < x <= y < 1"));
    }
    if max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be at least 1"));
    }
    Ok(())
}

/// Samples a chain and calls `visit(state, step_into_state)` for every state
/// `0..tau(x, y)`; state 0 is reported with `None`.
pub fn walk_covering<R, F>(
    params: &SplitParams,
    x: f64,
    y: f64,
    rng: &mut R,
    max_steps: u64,
    mut visit: F,
) -> Result<Exit>
where
    R: Rng + ?Sized,
    F: FnMut(&SplitChain, Option<SplitStep>) -> Result<()>,
{
    check_window(x, y, max_steps)?;
    let start = SplitChain::new();
    visit(&start, None)?;
    for (step, state) in ChainPath::new(*params, rng) {
        let i = state.index();
        if state.alpha() > x {
            return Ok(Exit::Nu(i));
        }
        if state.upper() < y {
            return Ok(Exit::Mu(i));
        }
        if i >= max_steps {
            return Ok(Exit::Truncated(i));
        }
        visit(&state, Some(step))?;
    }
    unreachable!("chain path is infinite")
}

/// Walks one chain to `tau(x, y)`. The hitting time that did not fire is
/// left [`Hit::Unresolved`].
pub fn hitting_times<R: Rng + ?Sized>(
    params: &SplitParams,
    x: f64,
    y: f64,
    rng: &mut R,
    max_steps: u64,
) -> Result<HittingTimes> {
    let exit = walk_covering(params, x, y, rng, max_steps, |_, _| Ok(()))?;
    Ok(match exit {
        Exit::Nu(i) => HittingTimes {
            nu: Hit::At(i),
            mu: Hit::Unresolved,
            tau: Hit::At(i),
        },
        Exit::Mu(i) => HittingTimes {
            nu: Hit::Unresolved,
            mu: Hit::At(i),
            tau: Hit::At(i),
        },
        Exit::Truncated(_) => HittingTimes {
            nu: Hit::Truncated,
            mu: Hit::Truncated,
            tau: Hit::Truncated,
        },
    })
}

/// Like [`hitting_times`] but keeps walking past `tau` until both `nu` and
/// `mu` have fired (or the cap is hit).
pub fn resolve_hitting_times<R: Rng + ?Sized>(
    params: &SplitParams,
    x: f64,
    y: f64,
    rng: &mut R,
    max_steps: u64,
) -> Result<HittingTimes> {
    check_window(x, y, max_steps)?;
    let mut nu = None;
    let mut mu = None;
    for (_, state) in ChainPath::new(*params, rng) {
        let i = state.index();
        if nu.is_none() && state.alpha() > x {
            nu = Some(i);
        }
        if mu.is_none() && state.upper() < y {
            mu = Some(i);
        }
        if (nu.is_some() && mu.is_some()) || i >= max_steps {
            break;
        }
    }
    let as_hit = |h: Option<u64>| h.map_or(Hit::Truncated, Hit::At);
    let tau = match (nu, mu) {
        (Some(a), Some(b)) => Hit::At(a.min(b)),
        (Some(a), None) | (None, Some(a)) => Hit::At(a),
        (None, None) => Hit::Truncated,
    };
    Ok(HittingTimes {
        nu: as_hit(nu),
        mu: as_hit(mu),
        tau,
    })
}

/// Indices `j` with `B_j = p` in a step prefix, i.e. the realised jump times `gamma_i`.
pub fn jump_indices(steps: &[SplitStep]) -> Vec<u64> {
    steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_jump())
        .map(|(j, _)| j as u64)
        .collect()
}
