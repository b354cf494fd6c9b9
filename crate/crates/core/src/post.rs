//! Post-retirement HJB solver.
//!
//! Solves, backward from a terminal age at which survival is negligible
//! down to retirement,
//!
//! ```text
//! 0 = J_t + (μ̂w + I + π − c*)J_w + ½(σ̂w)²J_ww
//!     + λ·U(w+π) + U(c*) − (ρ+λ)J,        c* = J_w^{−1/γ}
//! ```
//!
//! per DIA-income slice `I` (no purchases happen in retirement, so slices
//! decouple). The scheme is implicit in the linear operator with `c*` and
//! `α*` lagged one step, central in the drift where the cell Peclet
//! number allows (falling back to monotone upwinding), and a Thomas
//! solve per slice. The `w = 0` row drops the `w`-scaled terms and the
//! top row is pinned to the large-wealth asymptotic expansion
//! `w_m^{1−γ}·[h·U(W) + δ·k·U'(W)]`.

use crate::error::{Error, Result};
use crate::fmath;
use crate::model::{MarketModel, MortalityModel, Preferences};
use crate::numerics::{integrate_hk, AsymptoticCoeffs, Grid2D, TridiagonalSystem};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Whether the risky-asset weight is exogenous or chosen optimally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationMode {
    /// Everything stays invested at the market drift/volatility.
    Fixed,
    /// Per-node clamped first-order optimum `α* ∈ [0, 1]`.
    Dynamic,
}

/// Discretized value function with per-node optimal controls, stored on a
/// (possibly strided) subset of the time axis.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub grid: Grid2D,
    /// Age at `t = 0` of the grid's time axis (retirement age).
    pub age0: f64,
    /// Stored time values, increasing.
    pub times: Vec<f64>,
    /// `values[s][q * n_w + k]` = J at stored slice `s`, income node `q`,
    /// wealth node `k`.
    pub values: Vec<Vec<f64>>,
    /// Optimal consumption per node at each stored slice.
    pub consumption: Vec<Vec<f64>>,
    /// Optimal risky weight per node (dynamic mode only).
    pub alpha: Option<Vec<Vec<f64>>>,
}

struct SliceDerivs {
    jw: Vec<f64>,
    jww: Vec<f64>,
}

/// One-sided differences at the edges, central in the interior.
fn derivs(j: &[f64], dw: f64) -> SliceDerivs {
    let n = j.len();
    let mut jw = vec![0.0; n];
    let mut jww = vec![0.0; n];
    jw[0] = (j[1] - j[0]) / dw;
    jw[n - 1] = (j[n - 1] - j[n - 2]) / dw;
    jww[0] = (j[2] - 2.0 * j[1] + j[0]) / (dw * dw);
    jww[n - 1] = (j[n - 1] - 2.0 * j[n - 2] + j[n - 3]) / (dw * dw);
    for k in 1..n - 1 {
        jw[k] = (j[k + 1] - j[k - 1]) / (2.0 * dw);
        jww[k] = (j[k + 1] - 2.0 * j[k] + j[k - 1]) / (dw * dw);
    }
    SliceDerivs { jw, jww }
}

/// Clamped first-order risky weight `α* = −(J_w/J_ww)·(μ−r)/(wσ²)`; where
/// the surface is locally linear (`J_ww ≈ 0`) the constraint binds at 1.
fn alpha_star(jw: f64, jww: f64, w: f64, market: &MarketModel) -> f64 {
    if w <= 0.0 {
        return merton_alpha_raw(market, 1.0).min(1.0).max(0.0);
    }
    if jww >= -1e-300 {
        return 1.0;
    }
    let a = -(jw / jww) * (market.mu - market.r) / (w * market.sigma * market.sigma);
    a.min(1.0).max(0.0)
}

fn merton_alpha_raw(market: &MarketModel, gamma: f64) -> f64 {
    (market.mu - market.r) / (gamma * market.sigma * market.sigma)
}

/// Merton constant clamped to the leverage constraint.
pub fn merton_alpha(market: &MarketModel, gamma: f64) -> f64 {
    merton_alpha_raw(market, gamma).min(1.0).max(0.0)
}

pub(crate) fn effective_drift_vol(market: &MarketModel, alpha: f64) -> (f64, f64) {
    (alpha * market.mu + (1.0 - alpha) * market.r, alpha * market.sigma)
}

/// Solves the post-retirement problem on `grid` (time axis measured in
/// years after retirement), storing every `store_stride`-th slice.
pub fn solve_post(
    grid: &Grid2D,
    pref: &Preferences,
    market: &MarketModel,
    mortality: &MortalityModel,
    age_retire: f64,
    mode: AllocationMode,
    store_stride: usize,
) -> Result<ValueSurface> {
    if grid.t_nodes[0] != 0.0 {
        return Err(Error::InvalidParameter(
            "post-retirement grid must start at t = 0 (retirement)".into(),
        ));
    }
    let stride = store_stride.max(1);
    let gamma = pref.gamma;
    let pi = market.pi;
    let n_w = grid.n_w();
    let n_i = grid.n_i();
    let n_steps = grid.n_steps();
    let dw = grid.dw;
    let dt = grid.dt;
    let w_max = grid.w_max();
    let horizon = *grid.t_nodes.last().unwrap();

    // effective boundary-row market exposure
    let alpha_top = match mode {
        AllocationMode::Fixed => 1.0,
        AllocationMode::Dynamic => merton_alpha(market, gamma),
    };
    let (mu_top, sigma_top) = effective_drift_vol(market, alpha_top);
    let coeffs: AsymptoticCoeffs =
        integrate_hk(pref, market, mortality, mu_top, sigma_top, age_retire, horizon)?;

    // first-order large-wealth expansion h·U + δ·k·U', resummed as
    // h·U(w + (π+I)·k/h): identical to first order in δ = (π+I)/w_max but
    // bounded; the raw linear form changes sign once δ·k/h grows past the
    // leading term, which happens well inside the default domain
    let top_value = |t: f64, i_level: f64| -> f64 {
        let h = coeffs.h_at(t);
        let k = coeffs.k_at(t);
        h * pref.utility_unchecked(w_max + (pi + i_level) * k / h)
    };

    // terminal condition J(T, w, I) = U(w + π)
    let mut current: Vec<f64> = Vec::with_capacity(n_i * n_w);
    for _q in 0..n_i {
        for k in 0..n_w {
            current.push(pref.utility_unchecked(grid.w_nodes[k] + pi));
        }
    }

    let mut stored: Vec<(usize, Vec<f64>)> = Vec::new();
    let record = |n: usize| n % stride == 0 || n == n_steps;
    if record(n_steps) {
        stored.push((n_steps, current.clone()));
    }

    let mut sys = TridiagonalSystem::zeroed(n_w);
    let mut c_stars = vec![0.0; n_i * n_w];
    let mut drifts = vec![0.0; n_i * n_w];
    let mut sig2w2s = vec![0.0; n_i * n_w];
    let mut central_ok = vec![false; n_w];
    for n in (0..n_steps).rev() {
        let t_new = grid.t_nodes[n];
        let lambda = mortality.hazard(age_retire + t_new);
        let mut next = vec![0.0; n_i * n_w];

        // first pass: controls and advection coefficients for every slice,
        // so the stencil choice below can be made per w-node across all
        // income levels at once
        for q in 0..n_i {
            let i_level = grid.i_nodes[q];
            let prev = &current[q * n_w..(q + 1) * n_w];
            let d = derivs(prev, dw);
            for k in 1..n_w - 1 {
                let w = grid.w_nodes[k];
                let jw = d.jw[k];
                if jw <= 0.0 && k <= guarded_hi(n_w) {
                    return Err(Error::Numerical(format!(
                        "value surface lost monotonicity in w at step {n}, I-node {q}, w-node {k}"
                    )));
                }
                // in the excluded boundary layer a lagged slope can dip
                // non-positive; fall back to wealth-neutral consumption there
                let c_star = if jw > 0.0 {
                    pref.inverse_marginal_utility(jw)?
                } else {
                    i_level + pi
                };
                let (mu_eff, sigma_eff) = match mode {
                    AllocationMode::Fixed => (market.mu, market.sigma),
                    AllocationMode::Dynamic => {
                        effective_drift_vol(market, alpha_star(jw, d.jww[k], w, market))
                    }
                };
                let idx = q * n_w + k;
                c_stars[idx] = c_star;
                drifts[idx] = mu_eff * w + i_level + pi - c_star;
                sig2w2s[idx] = sigma_eff * sigma_eff * w * w;
            }
        }

        // near the terminal date `c* → w + π`, so the drift is strongly
        // leftward everywhere and any top-pin kink would disperse inward
        // under central differencing; keep the monotone stencil inside
        // that consumption layer
        let terminal_layer = horizon - t_new < 2.0;
        // a w-node uses the second-order central stencil only when every
        // income slice satisfies the cell Peclet bound there; a per-slice
        // switch would let adjacent slices disagree and imprint an O(dw)
        // kink on the I-direction, while forcing upwind on a slice whose
        // own drift is small costs only |drift|·dw/2 of extra diffusion
        for k in 1..n_w - 1 {
            central_ok[k] = !terminal_layer
                && (0..n_i).all(|q| {
                    let idx = q * n_w + k;
                    fmath::abs(drifts[idx]) * dw <= sig2w2s[idx]
                });
        }

        // second pass: assemble and solve each slice
        for q in 0..n_i {
            let i_level = grid.i_nodes[q];
            let prev = &current[q * n_w..(q + 1) * n_w];
            for k in 0..n_w {
                let w = grid.w_nodes[k];
                if k == n_w - 1 {
                    sys.sub[k] = 0.0;
                    sys.sup[k] = 0.0;
                    sys.diag[k] = 1.0;
                    sys.rhs[k] = top_value(t_new, i_level);
                    continue;
                }
                if k == 0 {
                    // min-wealth balance row: drop w-scaled terms, keep
                    // wealth non-negative by capping consumption
                    let jw = (prev[1] - prev[0]) / dw;
                    let c_star = if jw > 0.0 {
                        pref.inverse_marginal_utility(jw)?.min(i_level + pi)
                    } else {
                        i_level + pi
                    };
                    let drift = i_level + pi - c_star;
                    sys.sub[k] = 0.0;
                    sys.sup[k] = -drift / dw;
                    sys.diag[k] = 1.0 / dt + market.rho + lambda + drift / dw;
                    sys.rhs[k] = prev[k] / dt
                        + lambda * pref.utility_unchecked(pi)
                        + pref.utility_unchecked(c_star);
                    continue;
                }
                let idx = q * n_w + k;
                let drift = drifts[idx];
                let diff = 0.5 * sig2w2s[idx] / (dw * dw);
                if central_ok[k] {
                    // cell Peclet ≤ 1 on every slice: central differencing
                    // keeps the M-matrix property and is second order in dw
                    let adv = drift / (2.0 * dw);
                    sys.sub[k] = -(diff - adv);
                    sys.sup[k] = -(diff + adv);
                    sys.diag[k] = 1.0 / dt + market.rho + lambda + 2.0 * diff;
                } else {
                    // advection dominated (small w): monotone upwinding
                    let up = drift.max(0.0) / dw;
                    let dn = (-drift).max(0.0) / dw;
                    sys.sub[k] = -(diff + dn);
                    sys.sup[k] = -(diff + up);
                    sys.diag[k] = 1.0 / dt + market.rho + lambda + 2.0 * diff + up + dn;
                }
                sys.rhs[k] = prev[k] / dt
                    + lambda * pref.utility_unchecked(w + pi)
                    + pref.utility_unchecked(c_stars[idx]);
            }
            let sol = sys.solve()?;
            next[q * n_w..(q + 1) * n_w].copy_from_slice(&sol);
        }
        check_shape(&next, n_w, n_i, n)?;
        current = next;
        if record(n) {
            stored.push((n, current.clone()));
        }
    }

    stored.reverse();
    let mut times = Vec::with_capacity(stored.len());
    let mut values = Vec::with_capacity(stored.len());
    let mut consumption = Vec::with_capacity(stored.len());
    let mut alphas = Vec::with_capacity(stored.len());
    for (n, j) in stored {
        times.push(grid.t_nodes[n]);
        let (c, a) = extract_controls(&j, grid, pref, market, mode)?;
        values.push(j);
        consumption.push(c);
        alphas.push(a);
    }
    Ok(ValueSurface {
        grid: grid.clone(),
        age0: age_retire,
        times,
        values,
        consumption,
        alpha: match mode {
            AllocationMode::Fixed => None,
            AllocationMode::Dynamic => Some(alphas),
        },
    })
}

/// Monotonicity and concavity guards; violation beyond tolerance signals
/// an unstable scheme rather than a modelling feature.
/// Last w-node covered by the shape guards. The outer 5% of the wealth
/// axis sits in the boundary layer induced by the approximate Dirichlet
/// pin (first-order in δ, O(dt) against the interior scheme) and is
/// excluded.
fn guarded_hi(n_w: usize) -> usize {
    (n_w - 1) - (n_w / 20).max(1)
}

fn check_shape(j: &[f64], n_w: usize, n_i: usize, step: usize) -> Result<()> {
    let scale = j.iter().fold(0.0f64, |m, &v| m.max(fmath::abs(v)));
    let tol_mono = 1e-10 * scale;
    let tol_conc = 1e-4 * scale;
    let k_hi = guarded_hi(n_w);
    for q in 0..n_i {
        let row = &j[q * n_w..(q + 1) * n_w];
        for k in 0..k_hi {
            if row[k + 1] - row[k] <= -tol_mono {
                return Err(Error::Numerical(format!(
                    "J not increasing in w at step {step} (I-node {q}, w-node {k})"
                )));
            }
        }
        for k in 1..k_hi {
            if row[k + 1] - 2.0 * row[k] + row[k - 1] > tol_conc {
                return Err(Error::Numerical(format!(
                    "J lost concavity in w at step {step} (I-node {q}, w-node {k})"
                )));
            }
        }
        if q > 0 {
            let below = &j[(q - 1) * n_w..q * n_w];
            for k in 0..=k_hi {
                if row[k] - below[k] <= -tol_mono {
                    return Err(Error::Numerical(format!(
                        "J not increasing in I at step {step} (I-node {q}, w-node {k}, drop {:.3e}, scale {:.3e})",
                        below[k] - row[k],
                        scale
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Per-node controls recomputed from a finished slice's own derivatives.
fn extract_controls(
    j: &[f64],
    grid: &Grid2D,
    pref: &Preferences,
    market: &MarketModel,
    mode: AllocationMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_w = grid.n_w();
    let n_i = grid.n_i();
    let mut c = vec![0.0; n_i * n_w];
    let mut a = vec![0.0; n_i * n_w];
    for q in 0..n_i {
        let row = &j[q * n_w..(q + 1) * n_w];
        let d = derivs(row, grid.dw);
        for k in 0..n_w {
            let jw = d.jw[k].max(1e-300);
            let mut cs = pref.inverse_marginal_utility(jw)?;
            if k == 0 {
                cs = cs.min(grid.i_nodes[q] + market.pi);
            }
            c[q * n_w + k] = cs;
            a[q * n_w + k] = match mode {
                AllocationMode::Fixed => 1.0,
                AllocationMode::Dynamic => {
                    if k == n_w - 1 {
                        merton_alpha(market, pref.gamma)
                    } else {
                        alpha_star(jw, d.jww[k], grid.w_nodes[k], market)
                    }
                }
            };
        }
    }
    Ok((c, a))
}

impl ValueSurface {
    /// Index of the stored slice nearest to `t`.
    pub fn nearest_slice(&self, t: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (s, &ts) in self.times.iter().enumerate() {
            let d = fmath::abs(ts - t);
            if d < dist {
                dist = d;
                best = s;
            }
        }
        best
    }

    fn bilinear(&self, field: &[f64], w: f64, i: f64) -> Result<f64> {
        let n_w = self.grid.n_w();
        let (k, q, s, u) = self.grid.locate(w, i)?;
        let f00 = field[q * n_w + k];
        let f10 = field[q * n_w + k + 1];
        let f01 = field[(q + 1) * n_w + k];
        let f11 = field[(q + 1) * n_w + k + 1];
        Ok((1.0 - u) * ((1.0 - s) * f00 + s * f10) + u * ((1.0 - s) * f01 + s * f11))
    }

    /// Value `J` at `(t, w, I)` (nearest stored time, bilinear in state).
    pub fn value_at(&self, t: f64, w: f64, i: f64) -> Result<f64> {
        self.bilinear(&self.values[self.nearest_slice(t)], w, i)
    }

    /// Optimal consumption at `(t, w, I)`.
    pub fn consumption_policy(&self, t: f64, w: f64, i: f64) -> Result<f64> {
        self.bilinear(&self.consumption[self.nearest_slice(t)], w, i)
    }

    /// Optimal risky weight at `(t, w, I)`; 1 in fixed mode.
    pub fn alpha_policy(&self, t: f64, w: f64, i: f64) -> Result<f64> {
        match &self.alpha {
            None => Ok(1.0),
            Some(a) => self.bilinear(&a[self.nearest_slice(t)], w, i),
        }
    }

    /// The `t = 0` (retirement) slice, used to seed the pre-retirement
    /// solve.
    pub fn retirement_slice(&self) -> &[f64] {
        &self.values[0]
    }
}
