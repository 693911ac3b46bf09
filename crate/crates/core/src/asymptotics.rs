//! Periodic asymptotic expansion of the mean cost:
//! `E(H_n) ~ -log_p n + E(ceil(log_p t_2)) + F(log_p n) + R(n)`, with
//! `t_2 ~ Gamma(2, 1)`, the oscillation `F` of period 1, and `R(n)` the
//! remainder whose decay exponent is `beta = log_p(1 - delta)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::{forcing_term, MeanTable};
use crate::math::{self, frac, log_base, CompensatedSum};
use crate::params::SplitParams;
use crate::quadrature::{self, QuadConfig};

/// `rho(z) = (1 - p^{1 - {z}}) / (1 - p)`; period 1, `rho(0) = 1`, decreasing to 0 as `{z} -> 1`.
pub fn rho(z: f64, params: &SplitParams) -> f64 {
    let p = params.p();
    (1.0 - math::powf(p, 1.0 - frac(z))) / (1.0 - p)
}

/// `beta = log_p(1 - delta) = ln(1 - delta) / ln p`, always positive.
pub fn residual_exponent(params: &SplitParams) -> f64 {
    math::ln(1.0 - params.delta()) / math::ln(params.p())
}

/// Whether `ceil(log_p x) = ceil(log_p y)`.
pub fn omega_indicator(x: f64, y: f64, params: &SplitParams) -> Result<bool> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(Error::InvalidArgument("omega needs x and y in (0, 1)"));
    }
    let p = params.p();
    Ok(math::ceil(log_base(x, p)) == math::ceil(log_base(y, p)))
}

/// Closed-form pieces of the first-two-jumps decomposition of
/// `E(sum_{i < tau(x, y)} 1/pi_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaTerms {
    /// `ceil(log_p y)`.
    pub first: f64,
    /// `(ceil(log_p(rho(log_p y) y)) - floor(log_p y)) * 1_Omega`.
    pub second: f64,
    pub omega: bool,
    /// Required first jump index, `floor(log_p y)`.
    pub gamma0: u64,
    /// Required second jump index, `ceil(log_p(rho(log_p y) y))`.
    pub gamma1: u64,
}

pub fn lemma_terms(x: f64, y: f64, params: &SplitParams) -> Result<LemmaTerms> {
    if !(x > 0.0 && x < y && y < 1.0) {
        return Err(Error::InvalidArgument("lemma needs 0 < x < y < 1"));
    }
    let p = params.p();
    let ly = log_base(y, p);
    let omega = omega_indicator(x, y, params)?;
    let gamma0 = math::floor(ly);
    let gamma1 = math::ceil(log_base(rho(ly, params) * y, p));
    Ok(LemmaTerms {
        first: math::ceil(ly),
        second: if omega { gamma1 - gamma0 } else { 0.0 },
        omega,
        gamma0: gamma0 as u64,
        gamma1: gamma1 as u64,
    })
}

/// Upper tail `P(t_2 > s) = (1 + s) e^{-s}` of `Gamma(2, 1)`.
pub fn gamma2_upper_tail(s: f64) -> f64 {
    (1.0 + s) * math::exp(-s)
}

/// `P(ceil(log_p t_2 + shift) = k)`: `t_2` in `[p^{k - shift}, p^{k - 1 - shift})`.
fn ceiling_cell_mass(k: i64, shift: f64, p: f64) -> f64 {
    let lo = math::powf(p, k as f64 - shift);
    let hi = math::powf(p, k as f64 - 1.0 - shift);
    if hi <= 1.0 {
        forcing_term(hi) - forcing_term(lo)
    } else {
        gamma2_upper_tail(lo) - gamma2_upper_tail(hi)
    }
}

/// `(E ceil(log_p t_2 + shift), total mass summed)`, truncated once the
/// remaining cells can move the mean by less than `tol`.
fn shifted_ceiling_moments(shift: f64, params: &SplitParams, tol: f64) -> (f64, f64) {
    let p = params.p();
    let centre = math::ceil(shift) as i64;
    let mut mean = CompensatedSum::new();
    let mut mass = CompensatedSum::new();
    let mut add = |k: i64| {
        let m = ceiling_cell_mass(k, shift, p);
        mean.add(k as f64 * m);
        mass.add(m);
    };
    add(centre);
    // Cells with k above the centre: t_2 below p^{k - shift}, mass ~ t^2/2.
    let mut k = centre + 1;
    loop {
        add(k);
        let rest = forcing_term(math::powf(p, k as f64 - shift));
        if rest * (k.unsigned_abs() as f64 + 1.0 / (1.0 - p)) < tol {
            break;
        }
        k += 1;
    }
    // Cells below: t_2 above p^{k - 1 - shift}, mass ~ t e^{-t}.
    let mut k = centre - 1;
    loop {
        add(k);
        let rest = gamma2_upper_tail(math::powf(p, k as f64 - 1.0 - shift));
        if rest * (k.unsigned_abs() as f64 + 1.0) < tol {
            break;
        }
        k -= 1;
    }
    (mean.value(), mass.value())
}

/// `E(ceil(log_p t_2))`.
pub fn const_term(params: &SplitParams, tol: f64) -> f64 {
    shifted_ceiling_moments(0.0, params, tol).0
}

/// Total probability summed by [`const_term`]; 1 up to truncation.
pub fn const_term_mass(params: &SplitParams, tol: f64) -> f64 {
    shifted_ceiling_moments(0.0, params, tol).1
}

/// `D(z) = E ceil(log_p t_2 + z) - E ceil(log_p t_2) - z`.
///
/// Periodic in `z` and zero at integers. It is the gap between
/// `E ceil(log_p U_{2,n})` in the large-`n` limit and `-log_p n + E ceil(log_p t_2)`,
/// so it vanishes only when `log_p n` is an integer.
pub fn ceiling_shift_defect(z: f64, params: &SplitParams, tol: f64) -> f64 {
    let shifted = shifted_ceiling_moments(z, params, tol).0;
    shifted - const_term(params, tol) - z
}

/// `(1 - p^{1-f}) * ceil(log_p rho(f) + f)` for a fractional part `f` in `[0, 1)`.
///
/// This is the `F` integrand without the `y e^{-y}` weight; it depends on
/// `y` and `z` only through `f = {log_p y - z}`.
pub fn oscillation_factor(f: f64, params: &SplitParams) -> f64 {
    let p = params.p();
    let mass = 1.0 - math::powf(p, 1.0 - f);
    if mass <= 0.0 {
        return 0.0;
    }
    let jump = math::ceil(log_base(mass / (1.0 - p), p) + f);
    mass * jump
}

/// Full `F` integrand at `y`.
pub fn oscillation_integrand(y: f64, z: f64, params: &SplitParams) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let f = frac(log_base(y, params.p()) - z);
    y * math::exp(-y) * oscillation_factor(f, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationConfig {
    pub quad: QuadConfig,
    /// Upper cut-off: integrate up to `y` with `(1 + y) e^{-y}` below this.
    pub tail_mass: f64,
    /// Mass bound for the dropped neighbourhoods of accumulation points.
    pub sliver_tol: f64,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        Self {
            quad: QuadConfig::default(),
            tail_mass: 1e-14,
            sliver_tol: 1e-17,
        }
    }
}

fn upper_cutoff(tail_mass: f64) -> f64 {
    let mut y = 1.0;
    while gamma2_upper_tail(y) > tail_mass {
        y += 0.5;
    }
    y
}

/// One smooth panel of the `F` integrand: on `[lo, hi]` the ceiling equals `jump`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
    /// Value of `ceil(log_p rho + w) - floor(w)` on the panel.
    pub jump: u32,
    /// `y` at the bottom of the enclosing cell: `1 - p^{1-f} = 1 - cell_floor / y`.
    pub cell_floor: f64,
}

/// Breakpoints of the `F` integrand on `(0, y_max]`.
///
/// With `u = y p^{-{z}}`, cell `m` is `u` in `(p^{m+1}, p^m]`; inside it the
/// ceiling equals `j - m` on `u` in `[p^{m+1} + (1-p) p^j, p^{m+1} + (1-p) p^{j-1})`.
/// Pieces accumulate at the bottom of each cell and cells accumulate at 0; both
/// are cut where the dropped mass falls below `sliver_tol`.
pub fn oscillation_panels(z: f64, params: &SplitParams, config: &OscillationConfig) -> Vec<Panel> {
    let p = params.p();
    let zf = frac(z);
    let scale = math::powf(p, zf);
    let y_max = upper_cutoff(config.tail_mass);
    let ln_p = math::ln(p);
    let pow = |e: f64| math::exp(e * ln_p);

    let mut panels = Vec::new();
    let mut m = math::floor(log_base(y_max / scale, p));
    loop {
        let top = scale * pow(m);
        // Everything below this cell: integrand <= 4 y e^{-y}.
        if 2.0 * top * top < config.sliver_tol {
            break;
        }
        let floor_y = scale * pow(m + 1.0);
        let mut j = m + 1.0;
        loop {
            let hi = floor_y + scale * (1.0 - p) * pow(j - 1.0);
            let lo = floor_y + scale * (1.0 - p) * pow(j);
            if lo < y_max {
                panels.push(Panel {
                    lo,
                    hi: hi.min(y_max),
                    jump: (j - m) as u32,
                    cell_floor: floor_y,
                });
            }
            let sliver = scale * (1.0 - p) * pow(j);
            if (j - m + 2.0) * sliver * sliver / (1.0 - p * p) < config.sliver_tol {
                break;
            }
            j += 1.0;
        }
        m += 1.0;
    }
    panels
}

/// `F(z)` by Gauss–Kronrod on every smooth panel, summed with compensation.
pub fn big_f(z: f64, params: &SplitParams, config: &OscillationConfig) -> Result<f64> {
    let zf = frac(z);
    let mut acc = CompensatedSum::new();
    for panel in oscillation_panels(zf, params, config) {
        let g = |y: f64| oscillation_integrand(y, zf, params);
        acc.add(quadrature::integrate(&g, panel.lo, panel.hi, &config.quad)?);
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticDecomposition {
    pub n: u64,
    /// `-log_p n`
    pub leading: f64,
    /// `E ceil(log_p t_2)`
    pub constant: f64,
    /// `F(log_p n)`
    pub oscillation: f64,
    pub predicted: f64,
    pub exact: Option<f64>,
    /// `exact - predicted`
    pub residual: Option<f64>,
}

impl AsymptoticDecomposition {
    /// `residual * n^beta`.
    pub fn scaled_residual(&self, beta: f64) -> Option<f64> {
        self.residual.map(|r| r * math::powf(self.n as f64, beta))
    }
}

/// Caches the `n`-independent pieces of the expansion for one bias.
#[derive(Debug, Clone)]
pub struct AsymptoticModel {
    params: SplitParams,
    constant: f64,
    config: OscillationConfig,
}

impl AsymptoticModel {
    pub fn new(params: SplitParams, config: OscillationConfig) -> Self {
        Self {
            params,
            constant: const_term(&params, 1e-16),
            config,
        }
    }

    pub fn params(&self) -> &SplitParams {
        &self.params
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn oscillation(&self, z: f64) -> Result<f64> {
        big_f(z, &self.params, &self.config)
    }

    /// Assembles the expansion at `n`; `exact` is filled when `table` reaches `n`.
    pub fn decompose(&self, n: u64, table: Option<&MeanTable>) -> Result<AsymptoticDecomposition> {
        if n < 2 {
            return Err(Error::InvalidArgument("asymptotic expansion needs n >= 2"));
        }
        let z = log_base(n as f64, self.params.p());
        let leading = -z;
        let oscillation = self.oscillation(z)?;
        let predicted = leading + self.constant + oscillation;
        let exact = table.and_then(|t| t.get(n as usize));
        Ok(AsymptoticDecomposition {
            n,
            leading,
            constant: self.constant,
            oscillation,
            predicted,
            exact,
            residual: exact.map(|e| e - predicted),
        })
    }
}

/// One-shot [`AsymptoticModel::decompose`] with default settings.
pub fn asymptotic_mean(
    n: u64,
    params: &SplitParams,
    table: Option<&MeanTable>,
) -> Result<AsymptoticDecomposition> {
    AsymptoticModel::new(*params, OscillationConfig::default()).decompose(n, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_mean_table;

    fn params(p: f64) -> SplitParams {
        SplitParams::new(p).unwrap()
    }

    // Independent route to F: on each panel the integrand is
    // jump * (y - cell_floor) e^{-y}, which integrates in closed form.
    fn big_f_closed_form(z: f64, s: &SplitParams) -> f64 {
        let antiderivative = |y: f64, c: f64| -(y - c + 1.0) * (-y).exp();
        oscillation_panels(z, s, &OscillationConfig::default())
            .iter()
            .map(|pl| {
                pl.jump as f64 * (antiderivative(pl.hi, pl.cell_floor) - antiderivative(pl.lo, pl.cell_floor))
            })
            .sum()
    }

    #[test]
    fn rho_values() {
        let s = params(0.25);
        assert_eq!(rho(0.0, &s), 1.0);
        assert!((rho(0.5, &s) - 2.0 / 3.0).abs() < 1e-15);
        for z in [0.1, 0.45, 0.99, 3.7] {
            assert!((rho(z + 1.0, &s) - rho(z, &s)).abs() < 1e-12);
            let r = rho(z, &s);
            assert!(r > 0.0 && r <= 1.0);
        }
    }

    #[test]
    fn residual_exponent_values() {
        assert!((residual_exponent(&params(0.5)) - 1.0).abs() < 1e-15);
        let b = residual_exponent(&params(0.2));
        assert!((b - 0.8f64.ln() / 0.2f64.ln()).abs() < 1e-15);
        assert!((b - 0.1386).abs() < 1e-4);
        for p in [0.01, 0.3, 0.7, 0.99] {
            assert!(residual_exponent(&params(p)) > 0.0);
        }
    }

    #[test]
    fn omega_by_hand() {
        let s = params(0.5);
        assert!(omega_indicator(0.3, 0.3, &s).unwrap());
        assert!(omega_indicator(0.6, 0.7, &s).unwrap());
        assert!(!omega_indicator(0.4, 0.6, &s).unwrap());
        assert!(omega_indicator(0.0, 0.6, &s).is_err());
    }

    #[test]
    fn lemma_first_term_near_p() {
        let t = lemma_terms(0.3, 0.51, &params(0.5)).unwrap();
        assert_eq!(t.first, 1.0);
    }

    #[test]
    fn lemma_terms_vanish_off_omega() {
        let t = lemma_terms(0.4, 0.6, &params(0.5)).unwrap();
        assert!(!t.omega);
        assert_eq!(t.second, 0.0);
    }

    #[test]
    fn constant_mass_telescopes() {
        for p in [0.2, 0.5, 0.8] {
            assert!((const_term_mass(&params(p), 1e-16) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_defect_is_periodic_and_vanishes_at_integers() {
        let s = params(0.3);
        for z in [-2.0, 0.0, 1.0, 5.0] {
            assert!(ceiling_shift_defect(z, &s, 1e-16).abs() < 1e-12);
        }
        let a = ceiling_shift_defect(0.4, &s, 1e-16);
        let b = ceiling_shift_defect(1.4, &s, 1e-16);
        assert!((a - b).abs() < 1e-12);
        assert!(a.abs() > 1e-6);
    }

    #[test]
    fn factor_one_sided_limits_at_cell_boundary() {
        for p in [0.3, 0.5] {
            let s = params(p);
            assert_eq!(oscillation_factor(0.0, &s), 0.0);
            let right = oscillation_factor(1e-12, &s);
            assert!((right - (1.0 - p)).abs() < 1e-9);
            let left = oscillation_factor(1.0 - 1e-12, &s);
            assert!(left.abs() < 1e-9);
        }
    }

    #[test]
    fn quadrature_matches_closed_form_panels() {
        for p in [0.2, 0.5, 0.8] {
            let s = params(p);
            for z in [0.0, 0.1, 0.37, 0.9] {
                let q = big_f(z, &s, &OscillationConfig::default()).unwrap();
                let c = big_f_closed_form(z, &s);
                assert!((q - c).abs() < 1e-11, "p = {p}, z = {z}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn panels_are_disjoint_and_ordered_within_cells() {
        let s = params(0.5);
        let panels = oscillation_panels(0.37, &s, &OscillationConfig::default());
        assert!(!panels.is_empty());
        for pl in &panels {
            assert!(pl.lo < pl.hi);
            assert!(pl.lo > pl.cell_floor);
            let mid = 0.5 * (pl.lo + pl.hi);
            let f = frac(log_base(mid, 0.5) - 0.37);
            let mass = 1.0 - 0.5f64.powf(1.0 - f);
            assert!((oscillation_factor(f, &s) - mass * pl.jump as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn f_is_periodic_and_bounded() {
        for p in [0.3, 0.5] {
            let s = params(p);
            for z in [0.1, 0.37, 0.9] {
                let a = big_f(z, &s, &OscillationConfig::default()).unwrap();
                let b = big_f(z + 1.0, &s, &OscillationConfig::default()).unwrap();
                let c = big_f(z - 3.0, &s, &OscillationConfig::default()).unwrap();
                assert!((a - b).abs() < 1e-8 && (a - c).abs() < 1e-8);
                assert!(a.abs() <= 4.0);
            }
        }
    }

    #[test]
    fn leading_term_and_exact_column() {
        let s = params(0.5);
        let table = exact_mean_table(64, &s).unwrap();
        let d = asymptotic_mean(2, &s, Some(&table)).unwrap();
        assert!((d.leading - 1.0).abs() < 1e-15);
        assert_eq!(d.predicted, d.leading + d.constant + d.oscillation);
        assert_eq!(d.exact, Some(2.0));
        let far = asymptotic_mean(1000, &s, Some(&table)).unwrap();
        assert_eq!(far.exact, None);
        assert_eq!(far.residual, None);
        assert!(asymptotic_mean(1, &s, None).is_err());
    }
}
