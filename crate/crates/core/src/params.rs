use crate::error::{Error, Result};

/// Bias of the splitting coin.
///
/// `p` is the probability that a candidate flips 1 (is sent to the left
/// subgroup, which continues); `q = 1 - p`; `delta = min(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    p: f64,
    q: f64,
    delta: f64,
}

impl SplitParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        let q = 1.0 - p;
        Ok(Self {
            p,
            q,
            delta: p.min(q),
        })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Parameters with the roles of `p` and `q` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
            delta: self.delta,
        }
    }

    /// Bit pattern of `p`, usable as an exact cache key.
    pub fn key(&self) -> u64 {
        self.p.to_bits()
    }
}
