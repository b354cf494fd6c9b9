//! Actuarial and preference mathematics.
//!
//! Mortality follows the Gompertz-Makeham law
//!
//! ```text
//! λ(x) = λ0 + (1/b)·exp((x − m)/b)
//! tpx  = exp(−λ0·t + (1 − e^{t/b})·e^{(x−m)/b})
//! ```
//!
//! Annuity factors are deterministic quadratures of discounted survival, a
//! DIA is priced as a `Q`-blend of the no-refund and full-refund contracts,
//! and preferences are CRRA.

use crate::error::{Error, Result};
use crate::fmath;
use alloc::format;

/// Survival level below which quadrature tails are truncated.
const SURVIVAL_CUTOFF: f64 = 1e-12;

/// Gompertz-Makeham mortality law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MortalityModel {
    /// Accidental (age-independent) hazard rate, per year.
    pub lambda0: f64,
    /// Modal life parameter, years.
    pub m: f64,
    /// Dispersion coefficient, years.
    pub b: f64,
}

impl MortalityModel {
    pub fn new(lambda0: f64, m: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("dispersion b must be > 0, got {b}")));
        }
        if !(lambda0 >= 0.0) || !lambda0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "accidental hazard lambda0 must be >= 0, got {lambda0}"
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidParameter(format!("modal life m must be finite, got {m}")));
        }
        Ok(Self { lambda0, m, b })
    }

    /// Instantaneous force of mortality `λ(x) = λ0 + (1/b)·e^{(x−m)/b}`.
    #[inline]
    pub fn hazard(&self, age: f64) -> f64 {
        self.lambda0 + fmath::exp((age - self.m) / self.b) / self.b
    }

    /// `t`-year survival probability of an `x`-year-old,
    /// `exp(−λ0·t + (1 − e^{t/b})·e^{(x−m)/b})`.
    pub fn survival(&self, x: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::OutOfRange(format!("survival horizon t must be >= 0, got {t}")));
        }
        Ok(self.survival_unchecked(x, t))
    }

    #[inline]
    pub(crate) fn survival_unchecked(&self, x: f64, t: f64) -> f64 {
        let g = (1.0 - fmath::exp(t / self.b)) * fmath::exp((x - self.m) / self.b);
        fmath::exp(-self.lambda0 * t + g)
    }

    /// Smallest horizon at which survival drops below the quadrature cutoff.
    pub(crate) fn truncation_horizon(&self, x: f64) -> f64 {
        let mut hi = 1.0;
        while self.survival_unchecked(x, hi) > SURVIVAL_CUTOFF {
            hi *= 2.0;
            if hi > 1e6 {
                return hi; // λ0 = 0 and x far below m; cap the tail
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.survival_unchecked(x, mid) > SURVIVAL_CUTOFF {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Inverse-transform sample of the remaining lifetime of an
    /// `x`-year-old: the `t` with `tpx = u`, for `u ∈ (0, 1)`.
    pub fn sample_lifetime(&self, x: f64, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::OutOfRange(format!("lifetime quantile u must be in (0,1), got {u}")));
        }
        if self.lambda0 == 0.0 {
            // closed-form inverse of the pure Gompertz survival function
            let z = 1.0 - fmath::ln(u) * fmath::exp((self.m - x) / self.b);
            return Ok(self.b * fmath::ln(z));
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.survival_unchecked(x, hi) > u {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.survival_unchecked(x, mid) > u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Capital-market and cash-flow assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    /// Risky-asset drift, per year.
    pub mu: f64,
    /// Risky-asset volatility, per year^½.
    pub sigma: f64,
    /// Risk-free rate, per year.
    pub r: f64,
    /// Subjective discount rate, per year.
    pub rho: f64,
    /// Pre-retirement savings rate (currency per year).
    pub nu: f64,
    /// Exogenous pension rate (currency per year); wealth is expressed in
    /// multiples of it.
    pub pi: f64,
}

impl MarketModel {
    pub fn new(mu: f64, sigma: f64, r: f64, rho: f64, nu: f64, pi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        if !(pi > 0.0) || !pi.is_finite() {
            return Err(Error::InvalidParameter(format!("pension rate pi must be > 0, got {pi}")));
        }
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("savings rate nu must be >= 0, got {nu}")));
        }
        for (name, v) in [("mu", mu), ("r", r), ("rho", rho)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(Self { mu, sigma, r, rho, nu, pi })
    }
}

/// A deferred income annuity contract: income starts `tau` years after the
/// start age `x`, with refund weight `q` blending the no-refund (`q = 0`)
/// and fully refundable (`q = 1`) designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiaContract {
    /// Refund weight in `[0, 1]`.
    pub q: f64,
    /// Years from contract start to retirement.
    pub tau: f64,
    /// Start age, years.
    pub x: f64,
}

impl DiaContract {
    pub fn new(q: f64, tau: f64, x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!("refund weight Q must be in [0,1], got {q}")));
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("deferral tau must be >= 0, got {tau}")));
        }
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("start age must be finite, got {x}")));
        }
        Ok(Self { q, tau, x })
    }
}

/// CRRA preferences, `U(c) = c^{1−γ}/(1−γ)` with `γ > 0`, `γ ≠ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preferences {
    pub gamma: f64,
}

impl Preferences {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        if gamma == 1.0 {
            return Err(Error::InvalidParameter(
                "gamma = 1 (log utility) is outside the supported domain".into(),
            ));
        }
        Ok(Self { gamma })
    }

    /// CRRA utility `c^{1−γ}/(1−γ)`; rejects `c ≤ 0`.
    pub fn utility(&self, c: f64) -> Result<f64> {
        if !(c > 0.0) {
            return Err(Error::OutOfRange(format!("utility argument must be > 0, got {c}")));
        }
        Ok(self.utility_unchecked(c))
    }

    #[inline]
    pub(crate) fn utility_unchecked(&self, c: f64) -> f64 {
        fmath::powf(c, 1.0 - self.gamma) / (1.0 - self.gamma)
    }

    /// Marginal utility `U'(c) = c^{−γ}`.
    #[inline]
    pub fn marginal_utility(&self, c: f64) -> f64 {
        fmath::powf(c, -self.gamma)
    }

    /// Optimal consumption from the first-order condition `U'(c) = jw`,
    /// i.e. `c* = jw^{−1/γ}`; rejects `jw ≤ 0` (a non-monotone value
    /// function upstream).
    pub fn inverse_marginal_utility(&self, jw: f64) -> Result<f64> {
        if !(jw > 0.0) {
            return Err(Error::Numerical(format!(
                "marginal value must be > 0 for c* = jw^(-1/gamma), got {jw}"
            )));
        }
        Ok(fmath::powf(jw, -1.0 / self.gamma))
    }
}

/// Immediate pension annuity factor `ā_x = ∫_0^∞ e^{−rs}·spx ds`,
/// computed by adaptive Simpson quadrature truncated where survival falls
/// below `1e-12`.
pub fn immediate_annuity_factor(model: &MortalityModel, market: &MarketModel, x: f64) -> f64 {
    let upper = model.truncation_horizon(x);
    let f = |s: f64| fmath::exp(-market.r * s) * model.survival_unchecked(x, s);
    adaptive_simpson(&f, 0.0, upper, 1e-12)
}

/// DIA price per $1/year of income, `t` years after contract start:
///
/// ```text
/// (τ−t)ã(x+t) = ā_{x+τ}·e^{−r(τ−t)}·[(τ−t)p_{x+t}·(1−Q) + Q]
/// ```
pub fn dia_factor(
    contract: &DiaContract,
    model: &MortalityModel,
    market: &MarketModel,
    t: f64,
) -> Result<f64> {
    check_contract_time(contract, t)?;
    let a_ret = immediate_annuity_factor(model, market, contract.x + contract.tau);
    Ok(dia_factor_with(contract, model, market, t, a_ret))
}

/// As [`dia_factor`] with the retirement-age factor `ā_{x+τ}` precomputed.
pub(crate) fn dia_factor_with(
    contract: &DiaContract,
    model: &MortalityModel,
    market: &MarketModel,
    t: f64,
    a_ret: f64,
) -> f64 {
    let remaining = contract.tau - t;
    let p = model.survival_unchecked(contract.x + t, remaining);
    a_ret * fmath::exp(-market.r * remaining) * (p * (1.0 - contract.q) + contract.q)
}

/// Refund per $1/year of DIA held, `K_t = ā_{x+τ}·e^{−r(τ−t)}·Q`.
pub fn refund_per_unit(
    contract: &DiaContract,
    model: &MortalityModel,
    market: &MarketModel,
    t: f64,
) -> Result<f64> {
    check_contract_time(contract, t)?;
    let a_ret = immediate_annuity_factor(model, market, contract.x + contract.tau);
    Ok(refund_per_unit_with(contract, market, t, a_ret))
}

pub(crate) fn refund_per_unit_with(
    contract: &DiaContract,
    market: &MarketModel,
    t: f64,
    a_ret: f64,
) -> f64 {
    a_ret * fmath::exp(-market.r * (contract.tau - t)) * contract.q
}

fn check_contract_time(contract: &DiaContract, t: f64) -> Result<()> {
    if !(0.0..=contract.tau).contains(&t) {
        return Err(Error::OutOfRange(format!(
            "contract time {t} outside [0, {}]",
            contract.tau
        )));
    }
    Ok(())
}

/// Adaptive composite Simpson quadrature of a smooth integrand.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || fmath::abs(delta) <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
