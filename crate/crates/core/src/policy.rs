//! Actionable output: annuitization frontiers and purchase
//! recommendations along the characteristic line of slope `−ã`.

use crate::error::{Error, Result};
use crate::pre::{PreSolution, PreSolveSlice};
use alloc::format;
use alloc::vec::Vec;

/// Per-age annuitization boundary `w*(I)`.
#[derive(Debug, Clone)]
pub struct PolicyFrontier {
    /// Age in years.
    pub age: f64,
    /// One entry per I-node: `Some(w*)` or `None` where it is never
    /// optimal to purchase at that income level.
    pub boundary: Vec<Option<f64>>,
    /// I-node coordinates matching `boundary`.
    pub i_nodes: Vec<f64>,
    /// DIA price per $1/year at this age.
    pub a_tilde: f64,
}

/// A purchase recommendation: buy `delta_i` units now, ending at the
/// post-trade state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub delta_i: f64,
    pub wealth_after: f64,
    pub income_after: f64,
}

/// Extracts the frontier from a recorded slice: per I-column, the smallest
/// flagged w-node, linearly refined by the sign change of `j2 − j1`.
pub fn frontier_from_slice(
    solution: &PreSolution,
    slice: &PreSolveSlice,
    age: f64,
) -> PolicyFrontier {
    let grid = &solution.grid;
    let n_w = grid.n_w();
    let mut boundary = Vec::with_capacity(grid.n_i());
    for q in 0..grid.n_i() {
        let row_flag = |k: usize| slice.annuitize[q * n_w + k];
        let first = (0..n_w).find(|&k| row_flag(k));
        boundary.push(first.map(|k| {
            if k == 0 {
                return 0.0;
            }
            let d_lo = slice.j2[q * n_w + k - 1] - slice.j1[q * n_w + k - 1];
            let d_hi = slice.j2[q * n_w + k] - slice.j1[q * n_w + k];
            if d_lo < 0.0 && d_hi >= d_lo + 1e-300 {
                grid.w_nodes[k - 1] + grid.dw * (-d_lo) / (d_hi - d_lo)
            } else {
                grid.w_nodes[k]
            }
        }));
    }
    PolicyFrontier {
        age,
        boundary,
        i_nodes: grid.i_nodes.clone(),
        a_tilde: slice.a_tilde,
    }
}

/// Frontier at a given age (nearest recorded pre-retirement slice).
pub fn extract_frontier(solution: &PreSolution, age: f64) -> Result<PolicyFrontier> {
    let start = solution.contract.x;
    let t = age - start;
    if !(0.0..=solution.contract.tau + 1e-9).contains(&t) {
        return Err(Error::OutOfRange(format!(
            "age {age} outside the solved span [{start}, {}]",
            start + solution.contract.tau
        )));
    }
    let slice = solution.nearest_slice(t)?;
    Ok(frontier_from_slice(solution, slice, age))
}

impl PolicyFrontier {
    /// Piecewise-linear boundary wealth at income `i`; `None` where either
    /// bracketing node is marked never-annuitize.
    pub fn boundary_at(&self, i: f64) -> Option<f64> {
        let di = self.i_nodes[1] - self.i_nodes[0];
        let qf = (i - self.i_nodes[0]) / di;
        if qf < 0.0 || qf > (self.i_nodes.len() - 1) as f64 {
            return None;
        }
        let q = (qf.min((self.i_nodes.len() - 2) as f64)) as usize;
        let s = qf - q as f64;
        match (self.boundary[q], self.boundary[q + 1]) {
            (Some(lo), Some(hi)) => Some((1.0 - s) * lo + s * hi),
            (Some(lo), None) if s == 0.0 => Some(lo),
            _ => None,
        }
    }

    /// True iff `(w, i)` lies in the annuitization region (at or above the
    /// boundary).
    pub fn in_region(&self, w: f64, i: f64) -> bool {
        match self.boundary_at(i) {
            Some(ws) => w >= ws,
            None => false,
        }
    }

    /// Purchase recommendation: from a state inside the region, move along
    /// the characteristic `(i + s, w − ã·s)` to its first intersection
    /// with the frontier; otherwise buy nothing ("DIAs cannot be
    /// shorted"). Ties break toward the smallest purchase.
    pub fn recommend(&self, w: f64, i: f64) -> Result<Recommendation> {
        if !(w >= 0.0 && i >= 0.0) {
            return Err(Error::OutOfRange(format!("state (w={w}, I={i}) must be non-negative")));
        }
        let none = Recommendation { delta_i: 0.0, wealth_after: w, income_after: i };
        if !self.in_region(w, i) {
            return Ok(none);
        }
        // march the characteristic segment by segment over the I-nodes
        let di = self.i_nodes[1] - self.i_nodes[0];
        let f = |s: f64| -> Option<f64> {
            self.boundary_at(i + s).map(|ws| (w - self.a_tilde * s) - ws)
        };
        let mut s_lo = 0.0f64;
        let mut f_lo = match f(0.0) {
            Some(v) => v,
            None => return Ok(none),
        };
        if f_lo <= 0.0 {
            return Ok(none); // already at the boundary
        }
        let i_max = *self.i_nodes.last().unwrap();
        loop {
            let next_node = {
                // first I-node strictly beyond i + s_lo
                let pos = (i + s_lo - self.i_nodes[0]) / di;
                let q = crate::fmath::floor(pos) as usize + 1;
                self.i_nodes.get(q).copied().unwrap_or(i_max)
            };
            let s_hi = (next_node - i).min(i_max - i);
            if s_hi <= s_lo + 1e-15 {
                // the characteristic runs off the top of the I-axis while
                // still inside the region: clamp the purchase at the edge
                return self.finish(w, i, s_lo);
            }
            match f(s_hi) {
                Some(f_hi) if f_hi <= 0.0 => {
                    // linear root inside [s_lo, s_hi]
                    let s_star = s_lo + (s_hi - s_lo) * f_lo / (f_lo - f_hi);
                    return self.finish(w, i, s_star);
                }
                Some(f_hi) => {
                    s_lo = s_hi;
                    f_lo = f_hi;
                }
                None => {
                    // boundary absent past this column: clamp to the edge
                    return self.finish(w, i, s_hi);
                }
            }
        }
    }

    fn finish(&self, w: f64, i: f64, s_star: f64) -> Result<Recommendation> {
        let wealth_after = w - self.a_tilde * s_star;
        if wealth_after < -1e-9 {
            return Err(Error::Numerical(format!(
                "purchase from (w={w}, I={i}) exhausts wealth before the frontier; \
                 frontier extraction is inconsistent with the min-wealth row"
            )));
        }
        Ok(Recommendation {
            delta_i: s_star,
            wealth_after: wealth_after.max(0.0),
            income_after: i + s_star,
        })
    }
}
