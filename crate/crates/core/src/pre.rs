//! Pre-retirement variational solver with the free annuitization boundary.
//!
//! Backward from retirement, each time step does three things:
//!
//! 1. advances the no-purchase PDE branch `J⁽¹⁾` explicitly (drift
//!    `μ̂w + ν` differenced centrally where the cell Peclet number allows,
//!    upwind otherwise; diffusion `½(σ̂w)²`; bequest source
//!    `λ·U(w + K_t·I + ν)`), sub-stepped to satisfy the CFL bound;
//! 2. builds the purchase branch `J⁽²⁾` by sweeping the advection relation
//!    `J_I = ã·J_w` in decreasing `I`, tracing the purchase characteristic
//!    `(I, w) → (I + ΔI, w − ã·ΔI)` into the already-updated higher-`I`
//!    row with linear interpolation in `w`;
//!
//! 3. takes `J = max(J⁽¹⁾, J⁽²⁾)` node-wise; the flag set is the
//!    annuitization region and its lower envelope the boundary `w*(I)`.
//!
//! The `w = 0` row is always non-annuitizing and drops the `w`-scaled
//! terms; the top row follows the separable ansatz `J = U(w_max)·V(t, I)`.

use crate::error::{Error, Result};
use crate::fmath;
use crate::model::{
    dia_factor_with, immediate_annuity_factor, refund_per_unit_with, DiaContract, MarketModel,
    MortalityModel, Preferences,
};
use crate::numerics::Grid2D;
use crate::post::{effective_drift_vol, merton_alpha, AllocationMode, ValueSurface};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Which time steps of the pre-retirement solve are retained.
#[derive(Debug, Clone)]
pub enum Record {
    All,
    /// Explicit step indices (0 = start age, `n_t` = retirement).
    Steps(Vec<usize>),
}

impl Record {
    fn keep(&self, step: usize) -> bool {
        match self {
            Record::All => true,
            Record::Steps(s) => s.contains(&step),
        }
    }
}

/// One recorded `(w, I)` slice of the pre-retirement solve.
#[derive(Debug, Clone)]
pub struct PreSolveSlice {
    /// Step index on the pre-retirement time axis.
    pub step: usize,
    /// Years since the start age.
    pub t: f64,
    /// DIA price per $1/year at this time.
    pub a_tilde: f64,
    /// No-annuitization PDE branch, `[q * n_w + k]`.
    pub j1: Vec<f64>,
    /// Annuitization advection branch.
    pub j2: Vec<f64>,
    /// `j2 ≥ j1` (forced false on the `w = 0` row, which cannot cover a
    /// purchase, and on the top `I` row, where the income cap leaves no
    /// headroom to buy).
    pub annuitize: Vec<bool>,
    /// Clamped optimal risky weight (dynamic mode only).
    pub alpha: Option<Vec<f64>>,
}

impl PreSolveSlice {
    /// Stored value `J = max(j1, j2)` at a node.
    #[inline]
    pub fn value(&self, idx: usize) -> f64 {
        self.j1[idx].max(self.j2[idx])
    }
}

/// Time-indexed pre-retirement slices plus the shared grid and contract.
#[derive(Debug, Clone)]
pub struct PreSolution {
    pub grid: Grid2D,
    pub contract: DiaContract,
    /// `slices[n]` is `Some` iff step `n` was recorded; index `n_t` is the
    /// retirement slice (post-retirement seed after the purchase sweep).
    pub slices: Vec<Option<PreSolveSlice>>,
}

impl PreSolution {
    pub fn slice_at_step(&self, step: usize) -> Result<&PreSolveSlice> {
        self.slices
            .get(step)
            .and_then(|s| s.as_ref())
            .ok_or_else(|| Error::OutOfRange(format!("pre-retirement step {step} not recorded")))
    }

    /// Recorded slice nearest to `t` years after the start age.
    pub fn nearest_slice(&self, t: f64) -> Result<&PreSolveSlice> {
        let step = self.grid.nearest_step(self.grid.t_nodes[0] + t);
        // walk outward to the nearest recorded step
        for off in 0..self.slices.len() {
            if step >= off {
                if let Some(s) = &self.slices[step - off] {
                    return Ok(s);
                }
            }
            if step + off < self.slices.len() {
                if let Some(s) = &self.slices[step + off] {
                    return Ok(s);
                }
            }
        }
        Err(Error::OutOfRange("no recorded pre-retirement slices".into()))
    }

    /// Bilinear interpolation of `J = max(j1, j2)` on a recorded slice.
    pub fn value_at(&self, slice: &PreSolveSlice, w: f64, i: f64) -> Result<f64> {
        let n_w = self.grid.n_w();
        let (k, q, s, u) = self.grid.locate(w, i)?;
        let f = |qq: usize, kk: usize| slice.value(qq * n_w + kk);
        Ok((1.0 - u) * ((1.0 - s) * f(q, k) + s * f(q, k + 1))
            + u * ((1.0 - s) * f(q + 1, k) + s * f(q + 1, k + 1)))
    }

    /// True iff the nearest node of the slice is flagged for purchase
    /// (discrete test `J_I/ã ≥ J_w`).
    pub fn annuitization_indicator(&self, slice: &PreSolveSlice, w: f64, i: f64) -> Result<bool> {
        let (k, q, s, u) = self.grid.locate(w, i)?;
        let kk = if s > 0.5 { k + 1 } else { k };
        let qq = if u > 0.5 { q + 1 } else { q };
        Ok(slice.annuitize[qq * self.grid.n_w() + kk])
    }
}

/// Purchase-branch sweep: traces the characteristic of `J_I = ã·J_w` one
/// `ΔI` forward to the already-updated higher-`I` row, so the candidate
/// value at `(w, I_q)` is the value after buying `ΔI` of income for
/// `ã·ΔI` of wealth. Interpolating in `w` keeps the stencil monotone for
/// any `ã` (a one-sided difference would need `ã·ΔI ≤ Δw`). Returns
/// `(j2, flags)`.
fn advection_sweep(
    j1: &[f64],
    n_w: usize,
    n_i: usize,
    dw: f64,
    di: f64,
    a_tilde: f64,
) -> (Vec<f64>, Vec<bool>) {
    let mut j = j1.to_vec(); // progressively maxed values feed the stencil
    let mut j2 = j1.to_vec();
    let mut flags = vec![false; n_w * n_i];
    let shift = a_tilde * di / dw; // purchase cost in w-cells
    for q in (0..n_i - 1).rev() {
        for k in 1..n_w {
            let pos = k as f64 - shift;
            if pos < 0.0 {
                continue; // cannot afford a full ΔI of income
            }
            let k0 = fmath::floor(pos) as usize;
            let frac = pos - k0 as f64;
            let above = &j[(q + 1) * n_w..(q + 2) * n_w];
            let cand = if k0 + 1 < n_w {
                (1.0 - frac) * above[k0] + frac * above[k0 + 1]
            } else {
                above[n_w - 1]
            };
            let idx = q * n_w + k;
            j2[idx] = cand;
            if cand >= j1[idx] {
                flags[idx] = true;
                j[idx] = cand;
            }
        }
    }
    (j2, flags)
}

/// Solves the pre-retirement problem backward from the post-retirement
/// seed. The grid's time axis runs from 0 (start age `contract.x`) to
/// `contract.tau` (retirement); its wealth/income axes must match the
/// seed surface.
pub fn solve_pre(
    grid: &Grid2D,
    pref: &Preferences,
    market: &MarketModel,
    mortality: &MortalityModel,
    contract: &DiaContract,
    seed: &ValueSurface,
    mode: AllocationMode,
    record: &Record,
) -> Result<PreSolution> {
    let n_w = grid.n_w();
    let n_i = grid.n_i();
    let n_t = grid.n_steps();
    let dw = grid.dw;
    let di = grid.di;
    if grid.t_nodes[0] != 0.0 || fmath::abs(*grid.t_nodes.last().unwrap() - contract.tau) > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "pre-retirement grid must span [0, tau = {}]",
            contract.tau
        )));
    }
    if seed.grid.n_w() != n_w
        || seed.grid.n_i() != n_i
        || fmath::abs(seed.grid.dw - dw) > 1e-12
        || fmath::abs(seed.grid.di - di) > 1e-12
    {
        return Err(Error::InvalidParameter(
            "seed surface grid does not match the pre-retirement grid".into(),
        ));
    }
    if seed.times[0] != 0.0 {
        return Err(Error::InvalidParameter(
            "seed surface must include the retirement (t = 0) slice".into(),
        ));
    }

    let gamma = pref.gamma;
    let nu = market.nu;
    let a_ret = immediate_annuity_factor(mortality, market, contract.x + contract.tau);
    let a_tilde_at = |t: f64| dia_factor_with(contract, mortality, market, t, a_ret);
    let refund_at = |t: f64| refund_per_unit_with(contract, market, t, a_ret);

    let u_top = pref.utility_unchecked(grid.w_max());
    let merton = merton_alpha(market, gamma);

    let mut slices: Vec<Option<PreSolveSlice>> = vec![None; n_t + 1];

    // retirement slice: purchase sweep applied to the seed (the last
    // opportunity to buy: the region changes abruptly here)
    let mut current = seed.retirement_slice().to_vec();
    {
        let a_tau = a_tilde_at(contract.tau);
        let (j2, flags) = advection_sweep(&current, n_w, n_i, dw, di, a_tau);
        let j1 = current.clone();
        for idx in 0..current.len() {
            current[idx] = j1[idx].max(j2[idx]);
        }
        if record.keep(n_t) {
            slices[n_t] = Some(PreSolveSlice {
                step: n_t,
                t: contract.tau,
                a_tilde: a_tau,
                j1,
                j2,
                annuitize: flags,
                alpha: match mode {
                    AllocationMode::Fixed => None,
                    AllocationMode::Dynamic => {
                        Some(alpha_field(&current, grid, market, merton))
                    }
                },
            });
        }
    }

    // CFL bound for the explicit diffusion/advection update
    let drift_max = market.mu.max(market.r).max(0.0) * grid.w_max() + nu;
    let dt_stab = 0.9 * dw * dw
        / (market.sigma * market.sigma * grid.w_max() * grid.w_max() + dw * drift_max);
    let n_sub = crate::fmath::ceil(grid.dt / dt_stab).max(1.0) as usize;
    let dt_sub = grid.dt / n_sub as f64;

    let mut j1 = vec![0.0; n_w * n_i];
    for n in (0..n_t).rev() {
        let t_hi = grid.t_nodes[n + 1];

        // lagged controls for the whole step
        let alpha = match mode {
            AllocationMode::Fixed => None,
            AllocationMode::Dynamic => Some(alpha_field(&current, grid, market, merton)),
        };

        j1.copy_from_slice(&current);
        let mut field = core::mem::take(&mut j1);
        let mut scratch = vec![0.0; n_w * n_i];
        for s in 0..n_sub {
            let t_s = t_hi - s as f64 * dt_sub;
            let lambda = mortality.hazard(contract.x + t_s);
            let k_refund = refund_at(t_s);
            for q in 0..n_i {
                let i_level = grid.i_nodes[q];
                let bequest_base = k_refund * i_level + nu;
                let row = &field[q * n_w..(q + 1) * n_w];
                let out = &mut scratch[q * n_w..(q + 1) * n_w];
                // w = 0 balance row
                out[0] = row[0]
                    + dt_sub
                        * (nu * (row[1] - row[0]) / dw
                            + lambda * pref.utility_unchecked(bequest_base)
                            - (market.rho + lambda) * row[0]);
                for k in 1..n_w - 1 {
                    let w = grid.w_nodes[k];
                    let (mu_eff, sigma_eff) = match &alpha {
                        None => (market.mu, market.sigma),
                        Some(a) => effective_drift_vol(market, a[q * n_w + k]),
                    };
                    let drift = mu_eff * w + nu;
                    let sig2w2 = sigma_eff * sigma_eff * w * w;
                    // central drift where the cell Peclet allows (second
                    // order); monotone upwinding near w = 0
                    let jw = if crate::fmath::abs(drift) * dw <= sig2w2 {
                        (row[k + 1] - row[k - 1]) / (2.0 * dw)
                    } else if drift >= 0.0 {
                        (row[k + 1] - row[k]) / dw
                    } else {
                        (row[k] - row[k - 1]) / dw
                    };
                    let jww = (row[k + 1] - 2.0 * row[k] + row[k - 1]) / (dw * dw);
                    out[k] = row[k]
                        + dt_sub
                            * (drift * jw
                                + 0.5 * sigma_eff * sigma_eff * w * w * jww
                                + lambda * pref.utility_unchecked(w + bequest_base)
                                - (market.rho + lambda) * row[k]);
                }
                // top row: separable ansatz J = U(w_max)·V(t, I)
                let (mu_top, sigma_top) = match &alpha {
                    None => (market.mu, market.sigma),
                    Some(a) => effective_drift_vol(market, a[q * n_w + n_w - 1]),
                };
                let v = row[n_w - 1] / u_top;
                let coeff = mu_top * (1.0 - gamma)
                    - 0.5 * gamma * (1.0 - gamma) * sigma_top * sigma_top
                    - (market.rho + lambda);
                // backward step of V_t + coeff·V + λ = 0
                out[n_w - 1] = (v + dt_sub * (coeff * v + lambda)) * u_top;
            }
            core::mem::swap(&mut field, &mut scratch);
        }
        j1 = field;

        let t_new = grid.t_nodes[n];
        let a_tilde = a_tilde_at(t_new);
        let (j2, flags) = advection_sweep(&j1, n_w, n_i, dw, di, a_tilde);
        for idx in 0..current.len() {
            current[idx] = j1[idx].max(j2[idx]);
        }
        if !current.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "pre-retirement solve produced non-finite values at step {n}"
            )));
        }
        if record.keep(n) {
            slices[n] = Some(PreSolveSlice {
                step: n,
                t: t_new,
                a_tilde,
                j1: j1.clone(),
                j2,
                annuitize: flags,
                alpha: match mode {
                    AllocationMode::Fixed => None,
                    AllocationMode::Dynamic => {
                        Some(alpha_field(&current, grid, market, merton))
                    }
                },
            });
        }
    }

    Ok(PreSolution {
        grid: grid.clone(),
        contract: *contract,
        slices,
    })
}

/// Clamped first-order `α*` per node from central differences of the
/// current surface; the top row uses the Merton constant.
fn alpha_field(j: &[f64], grid: &Grid2D, market: &MarketModel, merton: f64) -> Vec<f64> {
    let n_w = grid.n_w();
    let n_i = grid.n_i();
    let dw = grid.dw;
    let mut a = vec![0.0; n_w * n_i];
    for q in 0..n_i {
        let row = &j[q * n_w..(q + 1) * n_w];
        for k in 0..n_w {
            a[q * n_w + k] = if k == 0 {
                1.0 // σ̂w vanishes at w = 0; value is irrelevant
            } else if k == n_w - 1 {
                merton
            } else {
                let jw = (row[k + 1] - row[k - 1]) / (2.0 * dw);
                let jww = (row[k + 1] - 2.0 * row[k] + row[k - 1]) / (dw * dw);
                if jww >= -1e-300 {
                    1.0
                } else {
                    (-(jw / jww) * (market.mu - market.r)
                        / (grid.w_nodes[k] * market.sigma * market.sigma))
                        .min(1.0)
                        .max(0.0)
                }
            };
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::post::solve_post;

    fn baseline() -> (Preferences, MarketModel, MortalityModel) {
        (
            Preferences::new(3.0).unwrap(),
            MarketModel::new(0.08, 0.16, 0.0325, 0.0325, 1.0, 1.0).unwrap(),
            MortalityModel::new(0.0, 89.335, 9.5).unwrap(),
        )
    }

    fn solve_small(
        q: f64,
        mode: AllocationMode,
        record: Record,
    ) -> (PreSolution, ValueSurface, Grid2D) {
        let (p, mk, mo) = baseline();
        let contract = DiaContract::new(q, 10.0, 55.0).unwrap();
        // w_max well beyond the plotted range: the capitalized-income
        // scale is tens of pension units, so a domain capped at 30 puts
        // the whole plotted range inside the top boundary layer
        let post_grid = Grid2D::uniform(0.0, 55.0, 55 * 12, 120.0, 301, 6.0, 61).unwrap();
        let post = solve_post(&post_grid, &p, &mk, &mo, 65.0, AllocationMode::Fixed, 12).unwrap();
        let pre_grid = Grid2D::uniform(0.0, 10.0, 120, 120.0, 301, 6.0, 61).unwrap();
        let pre =
            solve_pre(&pre_grid, &p, &mk, &mo, &contract, &post, mode, &record).unwrap();
        (pre, post, pre_grid)
    }

    /// Last w-node of the economically plausible display range `w ≤ 30`,
    /// on which the region-geometry claims are asserted.
    fn k30(grid: &Grid2D) -> usize {
        (30.0 / grid.dw) as usize
    }

    #[test]
    fn retirement_slice_reproduces_seed_outside_region() {
        let (pre, post, grid) = solve_small(1.0, AllocationMode::Fixed, Record::All);
        let s = pre.slice_at_step(grid.n_steps()).unwrap();
        let seed = post.retirement_slice();
        let n_w = grid.n_w();
        for idx in 0..seed.len() {
            assert!(s.value(idx) >= seed[idx] - 1e-12 * seed[idx].abs());
            if !s.annuitize[idx] {
                assert_eq!(s.j1[idx], seed[idx]);
            }
        }
        // min-wealth row and the capped top income row never flagged
        for q in 0..grid.n_i() {
            assert!(!s.annuitize[q * n_w]);
        }
        for k in 0..n_w {
            assert!(!s.annuitize[(grid.n_i() - 1) * n_w + k]);
        }
    }

    #[test]
    fn region_upward_closed_in_wealth() {
        let (pre, _, grid) = solve_small(1.0, AllocationMode::Fixed, Record::All);
        let n_w = grid.n_w();
        for step in [60, 96, 108, 120] {
            let s = pre.slice_at_step(step).unwrap();
            for q in 0..grid.n_i() {
                let mut seen = false;
                for k in 0..=k30(&grid) {
                    let f = s.annuitize[q * n_w + k];
                    if seen {
                        assert!(
                            f || k == 0,
                            "region not upward-closed at step {step}, q={q}, k={k}"
                        );
                    }
                    seen |= f;
                }
            }
        }
    }

    #[test]
    fn age_nesting_at_baseline() {
        // region at age 63 ⊆ region at 65, asserted on w ≤ 30
        let (pre, _, grid) = solve_small(1.0, AllocationMode::Fixed, Record::All);
        let s63 = pre.slice_at_step(8 * 12).unwrap();
        let s65 = pre.slice_at_step(grid.n_steps()).unwrap();
        let n_w = grid.n_w();
        let mut in63 = 0;
        for q in 0..grid.n_i() {
            for k in 0..=k30(&grid) {
                let idx = q * n_w + k;
                if s63.annuitize[idx] {
                    in63 += 1;
                    assert!(s65.annuitize[idx], "age-63 region escapes age-65 region at {idx}");
                }
            }
        }
        assert!(in63 > 0, "age-63 region empty on the display range");
    }

    #[test]
    fn abrupt_enlargement_at_retirement() {
        let (pre, _, grid) = solve_small(1.0, AllocationMode::Fixed, Record::All);
        let s_last = pre.slice_at_step(grid.n_steps()).unwrap();
        let s_prev = pre.slice_at_step(grid.n_steps() - 1).unwrap();
        let count = |s: &PreSolveSlice| s.annuitize.iter().filter(|&&f| f).count();
        let a_last = count(s_last) as f64;
        let a_prev = count(s_prev) as f64;
        assert!(
            a_last > 1.2 * a_prev.max(1.0),
            "no abrupt region change at retirement: {a_prev} -> {a_last}"
        );
    }

    #[test]
    fn lower_q_has_larger_region() {
        let (pre07, _, grid) = solve_small(0.7, AllocationMode::Fixed, Record::All);
        let (pre10, _, _) = solve_small(1.0, AllocationMode::Fixed, Record::All);
        // age 62 = step 7·12 on the 120-step axis; asserted on w ≤ 30
        let s07 = pre07.slice_at_step(84).unwrap();
        let s10 = pre10.slice_at_step(84).unwrap();
        let n_w = grid.n_w();
        let (mut c07, mut c10) = (0usize, 0usize);
        for q in 0..grid.n_i() {
            for k in 0..=k30(&grid) {
                let idx = q * n_w + k;
                c07 += s07.annuitize[idx] as usize;
                c10 += s10.annuitize[idx] as usize;
                if s10.annuitize[idx] {
                    assert!(s07.annuitize[idx], "Q=1 region escapes Q=0.7 region at node {idx}");
                }
            }
        }
        assert!(c07 > c10, "mortality credits do not enlarge the region: {c07} vs {c10}");
    }

    #[test]
    fn level_curve_along_characteristic() {
        // inside the region J is constant along lines of slope −ã
        let (pre, _, grid) = solve_small(1.0, AllocationMode::Fixed, Record::All);
        let s = pre.slice_at_step(grid.n_steps()).unwrap();
        let n_w = grid.n_w();
        let mut checked = 0;
        for q in 1..grid.n_i() - 1 {
            for k in (1..n_w - 1).step_by(7) {
                if !s.annuitize[q * n_w + k] {
                    continue;
                }
                let w = grid.w_nodes[k];
                let i = grid.i_nodes[q];
                // step one ΔI along the characteristic
                let (w2, i2) = (w - s.a_tilde * grid.di, i + grid.di);
                if w2 < 0.0 {
                    continue;
                }
                if !pre.annuitization_indicator(s, w2, i2).unwrap_or(false) {
                    continue;
                }
                let ja = pre.value_at(s, w, i).unwrap();
                let jb = pre.value_at(s, w2, i2).unwrap();
                assert!(
                    ((ja - jb) / ja).abs() < 0.005,
                    "level-curve violation at (w={w}, I={i}): {ja} vs {jb}"
                );
                checked += 1;
            }
        }
        assert!(checked > 10, "too few characteristic checks ({checked})");
    }

    #[test]
    fn smooth_pasting_on_boundary() {
        // retirement-slice property: apply the purchase sweep directly to
        // the post-retirement seed on a fine wealth grid (the backward
        // pre evolution is not involved)
        let (p, mk, mo) = baseline();
        // fine ΔI: the discrete boundary is where a full ΔI purchase
        // breaks even, which sits O(ã·ΔI) above the infinitesimal
        // indifference curve
        let grid = Grid2D::uniform(0.0, 55.0, 55 * 12, 120.0, 1201, 6.0, 121).unwrap();
        let post = solve_post(&grid, &p, &mk, &mo, 65.0, AllocationMode::Fixed, 660).unwrap();
        let j1 = post.retirement_slice();
        let a_tilde =
            crate::model::immediate_annuity_factor(&mo, &mk, 65.0);
        let n_w = grid.n_w();
        let n_i = grid.n_i();
        let (j2, flags) = advection_sweep(j1, n_w, n_i, grid.dw, grid.di, a_tilde);
        let mut checked = 0;
        // smooth pasting is the indifference condition J_I = ã·J_w on the
        // smooth hold branch j1 at the boundary: evaluate the residual by
        // central differences at the two nodes straddling the refined
        // boundary and interpolate to the sign change of (j2 − j1)
        for q in 1..n_i - 1 {
            let k = (2..n_w - 1).find(|&k| flags[q * n_w + k]);
            let Some(k) = k else { continue };
            let d = |kk: usize| j2[q * n_w + kk] - j1[q * n_w + kk];
            let (d0, d1) = (d(k - 1), d(k));
            if d0 >= 0.0 || d1 < d0 {
                continue; // no clean sign change to refine
            }
            let frac = -d0 / (d1 - d0);
            let res = |kk: usize| {
                let ji = (j1[(q + 1) * n_w + kk] - j1[(q - 1) * n_w + kk]) / (2.0 * grid.di);
                let jw = (j1[q * n_w + kk + 1] - j1[q * n_w + kk - 1]) / (2.0 * grid.dw);
                (ji - a_tilde * jw, ji.abs() + (a_tilde * jw).abs())
            };
            let (r0, m0) = res(k - 1);
            let (r1, m1) = res(k);
            let r = (1.0 - frac) * r0 + frac * r1;
            let m = (1.0 - frac) * m0 + frac * m1;
            let ratio = r.abs() / m;
            assert!(ratio < 0.02, "smooth-pasting residual {ratio} at q={q}, k={k}");
            checked += 1;
        }
        assert!(checked > 5, "too few boundary columns checked ({checked})");
    }

    #[test]
    fn rejects_mismatched_seed() {
        let (p, mk, mo) = baseline();
        let contract = DiaContract::new(1.0, 10.0, 55.0).unwrap();
        let post_grid = Grid2D::uniform(0.0, 55.0, 660, 30.0, 151, 6.0, 31).unwrap();
        let post = solve_post(&post_grid, &p, &mk, &mo, 65.0, AllocationMode::Fixed, 660).unwrap();
        let bad_grid = Grid2D::uniform(0.0, 10.0, 120, 30.0, 101, 6.0, 31).unwrap();
        assert!(solve_pre(
            &bad_grid,
            &p,
            &mk,
            &mo,
            &contract,
            &post,
            AllocationMode::Fixed,
            &Record::All
        )
        .is_err());
    }
}
