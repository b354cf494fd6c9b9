//! Grids, tridiagonal solves, and the large-wealth asymptotic ODEs.

use crate::error::{Error, Result};
use crate::fmath;
use crate::model::{MarketModel, MortalityModel, Preferences};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Uniform discretization of the `(t, w, I)` computational box. The state
/// space is two-dimensional (wealth and DIA income); time is the marching
/// axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub t_nodes: Vec<f64>,
    pub w_nodes: Vec<f64>,
    pub i_nodes: Vec<f64>,
    pub dt: f64,
    pub dw: f64,
    pub di: f64,
}

impl Grid2D {
    /// Uniform grid over `[t_start, t_end] × [0, w_max] × [0, i_max]` with
    /// the given node counts (`n_t` counts time *steps*, so there are
    /// `n_t + 1` time nodes).
    pub fn uniform(
        t_start: f64,
        t_end: f64,
        n_t: usize,
        w_max: f64,
        n_w: usize,
        i_max: f64,
        n_i: usize,
    ) -> Result<Self> {
        if !(t_end > t_start) || n_t == 0 {
            return Err(Error::InvalidParameter(format!(
                "time axis needs t_end > t_start and n_t > 0 (got [{t_start}, {t_end}], {n_t})"
            )));
        }
        if !(w_max > 0.0) || n_w < 3 {
            return Err(Error::InvalidParameter(format!(
                "wealth axis needs w_max > 0 and at least 3 nodes (got {w_max}, {n_w})"
            )));
        }
        if !(i_max > 0.0) || n_i < 3 {
            return Err(Error::InvalidParameter(format!(
                "income axis needs i_max > 0 and at least 3 nodes (got {i_max}, {n_i})"
            )));
        }
        let dt = (t_end - t_start) / n_t as f64;
        let dw = w_max / (n_w - 1) as f64;
        let di = i_max / (n_i - 1) as f64;
        Ok(Self {
            t_nodes: (0..=n_t).map(|n| t_start + n as f64 * dt).collect(),
            w_nodes: (0..n_w).map(|k| k as f64 * dw).collect(),
            i_nodes: (0..n_i).map(|q| q as f64 * di).collect(),
            dt,
            dw,
            di,
        })
    }

    pub fn n_w(&self) -> usize {
        self.w_nodes.len()
    }

    pub fn n_i(&self) -> usize {
        self.i_nodes.len()
    }

    pub fn n_steps(&self) -> usize {
        self.t_nodes.len() - 1
    }

    pub fn w_max(&self) -> f64 {
        *self.w_nodes.last().unwrap()
    }

    /// Index of the time node nearest to `t`.
    pub fn nearest_step(&self, t: f64) -> usize {
        let rel = (t - self.t_nodes[0]) / self.dt;
        let idx = fmath::round(rel);
        (idx.max(0.0) as usize).min(self.n_steps())
    }

    /// Bilinear interpolation weights for a `(w, i)` point inside the hull:
    /// `(k, q, s, u)` with `s`, `u` the fractional offsets in w and I.
    pub fn locate(&self, w: f64, i: f64) -> Result<(usize, usize, f64, f64)> {
        if !(0.0..=self.w_max()).contains(&w) || !(0.0..=*self.i_nodes.last().unwrap()).contains(&i)
        {
            return Err(Error::OutOfRange(format!(
                "point (w={w}, I={i}) outside the grid hull"
            )));
        }
        let kf = (w / self.dw).min((self.n_w() - 1) as f64);
        let qf = (i / self.di).min((self.n_i() - 1) as f64);
        let k = (fmath::floor(kf) as usize).min(self.n_w() - 2);
        let q = (fmath::floor(qf) as usize).min(self.n_i() - 2);
        Ok((k, q, kf - k as f64, qf - q as f64))
    }
}

/// Tridiagonal linear system `A·x = rhs` with `sub`/`diag`/`super`
/// diagonals; `sub[0]` and `sup[n−1]` are ignored.
#[derive(Debug, Clone)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn zeroed(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    /// Thomas-algorithm solve. Assumes the assembled scheme is diagonally
    /// dominant; rejects a vanishing pivot.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if fmath::abs(pivot) < 1e-300 {
            return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
        }
        c[0] = self.sup[0] / pivot;
        d[0] = self.rhs[0] / pivot;
        for j in 1..n {
            pivot = self.diag[j] - self.sub[j] * c[j - 1];
            if fmath::abs(pivot) < 1e-300 {
                return Err(Error::Numerical(format!("zero pivot in tridiagonal solve at row {j}")));
            }
            c[j] = self.sup[j] / pivot;
            d[j] = (self.rhs[j] - self.sub[j] * d[j - 1]) / pivot;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for j in (0..n - 1).rev() {
            x[j] = d[j] - c[j] * x[j + 1];
        }
        Ok(x)
    }
}

/// Time-indexed coefficients `h(t)`, `k(t)` of the large-wealth expansion
/// `J ≈ w_m^{1−γ}·[h(t)·U(W) + δ·k(t)·U'(W)]`, integrated on an internal
/// fine time step so finite-difference residuals of the ODEs stay small.
#[derive(Debug, Clone)]
pub struct AsymptoticCoeffs {
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    /// Internal step of the stored arrays (years).
    pub dt: f64,
    /// Horizon `T` (years); arrays run from `t = 0` to `t = T`.
    pub horizon: f64,
}

impl AsymptoticCoeffs {
    #[inline]
    fn index(&self, t: f64) -> usize {
        let idx = fmath::round(t / self.dt);
        (idx.max(0.0) as usize).min(self.h.len() - 1)
    }

    pub fn h_at(&self, t: f64) -> f64 {
        self.h[self.index(t)]
    }

    pub fn k_at(&self, t: f64) -> f64 {
        self.k[self.index(t)]
    }
}

/// Right-hand sides of the coupled asymptotic ODEs:
///
/// ```text
/// dh/dt = [(γ−1)μ + ρ + λ + γ(1−γ)σ²/2]·h − γ·h^{(γ−1)/γ} − λ
/// dk/dt = [γμ − γ·h^{−1/γ} + ρ + λ − γ(1+γ)σ²/2]·k − λ − h
/// ```
///
/// with `λ = λ(x+t)` the force of mortality at the retiree's age.
fn hk_rhs(
    gamma: f64,
    mu: f64,
    sigma: f64,
    rho: f64,
    lambda: f64,
    h: f64,
    k: f64,
) -> Result<(f64, f64)> {
    if h <= 0.0 {
        return Err(Error::Numerical(format!(
            "asymptotic coefficient h became non-positive ({h})"
        )));
    }
    let dh = ((gamma - 1.0) * mu + rho + lambda + gamma * (1.0 - gamma) * sigma * sigma / 2.0) * h
        - gamma * fmath::powf(h, (gamma - 1.0) / gamma)
        - lambda;
    let dk = (gamma * mu - gamma * fmath::powf(h, -1.0 / gamma)
        + rho
        + lambda
        - sigma * sigma / 2.0 * gamma * (1.0 + gamma))
        * k
        - lambda
        - h;
    Ok((dh, dk))
}

/// Integrates the asymptotic ODEs backward from `h(T) = k(T) = 1` with
/// classical RK4 on a fine internal step. `mu`/`sigma` are the effective
/// portfolio drift and volatility at the large-wealth boundary (raw market
/// values in fixed-allocation mode, Merton-α values in dynamic mode).
/// `x` is the age at `t = 0` (retirement).
pub fn integrate_hk(
    pref: &Preferences,
    market: &MarketModel,
    model: &MortalityModel,
    mu: f64,
    sigma: f64,
    x: f64,
    horizon: f64,
) -> Result<AsymptoticCoeffs> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be > 0, got {horizon}")));
    }
    let gamma = pref.gamma;
    let rho = market.rho;
    let dt = 2e-4;
    let n = crate::fmath::ceil(horizon / dt) as usize;
    let dt = horizon / n as f64;
    let mut h = vec![0.0; n + 1];
    let mut k = vec![0.0; n + 1];
    h[n] = 1.0;
    k[n] = 1.0;
    for i in (0..n).rev() {
        let t1 = (i + 1) as f64 * dt;
        let step = -dt; // backward in time
        let f = |t: f64, hv: f64, kv: f64| {
            hk_rhs(gamma, mu, sigma, rho, model.hazard(x + t), hv, kv)
        };
        let (k1h, k1k) = f(t1, h[i + 1], k[i + 1])?;
        let (k2h, k2k) = f(t1 + step / 2.0, h[i + 1] + step / 2.0 * k1h, k[i + 1] + step / 2.0 * k1k)?;
        let (k3h, k3k) = f(t1 + step / 2.0, h[i + 1] + step / 2.0 * k2h, k[i + 1] + step / 2.0 * k2k)?;
        let (k4h, k4k) = f(t1 + step, h[i + 1] + step * k3h, k[i + 1] + step * k3k)?;
        h[i] = h[i + 1] + step / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
        k[i] = k[i + 1] + step / 6.0 * (k1k + 2.0 * k2k + 2.0 * k3k + k4k);
        if h[i] <= 0.0 || k[i] <= 0.0 {
            return Err(Error::Numerical(format!(
                "asymptotic coefficients lost positivity at t={:.4} (h={}, k={})",
                t1 - dt,
                h[i],
                k[i]
            )));
        }
    }
    Ok(AsymptoticCoeffs { h, k, dt, horizon })
}

/// Maximum finite-difference residuals of the two ODEs over the stored
/// arrays (central differences at interior points).
pub fn hk_residuals(
    coeffs: &AsymptoticCoeffs,
    pref: &Preferences,
    market: &MarketModel,
    model: &MortalityModel,
    mu: f64,
    sigma: f64,
    x: f64,
) -> Result<(f64, f64)> {
    let n = coeffs.h.len();
    let dt = coeffs.dt;
    let mut max_h = 0.0f64;
    let mut max_k = 0.0f64;
    for i in 1..n - 1 {
        let t = i as f64 * dt;
        let dh_fd = (coeffs.h[i + 1] - coeffs.h[i - 1]) / (2.0 * dt);
        let dk_fd = (coeffs.k[i + 1] - coeffs.k[i - 1]) / (2.0 * dt);
        let (dh, dk) = hk_rhs(
            pref.gamma,
            mu,
            sigma,
            market.rho,
            model.hazard(x + t),
            coeffs.h[i],
            coeffs.k[i],
        )?;
        max_h = max_h.max(fmath::abs(dh_fd - dh));
        max_k = max_k.max(fmath::abs(dk_fd - dk));
    }
    Ok((max_h, max_k))
}
