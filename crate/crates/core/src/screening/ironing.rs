//! Quantile-space ironing table.
//!
//! `Φ(q) = ∫₀^q h(t) dt` with `h(q) = γ(F⁻¹(q))` is tabulated on a uniform
//! grid, replaced by its greatest convex minorant, and differentiated. Hull
//! segments spanning several cells whose slope differs from the cell averages
//! are the ironed (flat) regions; everywhere else the raw map is kept and only
//! clamped between the neighbouring flat levels.

use crate::numerics::convex_minorant_slopes;

#[derive(Debug)]
pub(crate) struct IronedTable {
    cells: usize,
    /// Flat level of each cell, NaN where the raw map is kept.
    flat: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IronedTable {
    pub(crate) fn build<H: Fn(f64) -> f64>(h: H, cells: usize) -> Self {
        let dq = 1.0 / cells as f64;
        let mut qs = Vec::with_capacity(cells + 1);
        let mut phi = Vec::with_capacity(cells + 1);
        qs.push(0.0);
        phi.push(0.0);
        let mut acc = 0.0;
        let mut h_left = h(0.0);
        for i in 0..cells {
            let a = i as f64 * dq;
            let b = if i + 1 == cells { 1.0 } else { (i + 1) as f64 * dq };
            let h_mid = h(0.5 * (a + b));
            let h_right = h(b);
            acc += (b - a) / 6.0 * (h_left + 4.0 * h_mid + h_right);
            h_left = h_right;
            qs.push(b);
            phi.push(acc);
        }
        let slopes = convex_minorant_slopes(&qs, &phi);

        let mut flat = vec![f64::NAN; cells];
        let mut i = 0;
        while i < cells {
            let mut j = i + 1;
            while j < cells && slopes[j] == slopes[i] {
                j += 1;
            }
            if j - i >= 2 {
                let s = slopes[i];
                let deviates = (i..j).any(|k| {
                    let avg = (phi[k + 1] - phi[k]) / (qs[k + 1] - qs[k]);
                    (avg - s).abs() > 1e-9 * s.abs().max(1.0)
                });
                if deviates {
                    for slot in &mut flat[i..j] {
                        *slot = s;
                    }
                }
            }
            i = j;
        }

        let mut lower = vec![f64::NEG_INFINITY; cells];
        let mut running = f64::NEG_INFINITY;
        for k in 0..cells {
            if !flat[k].is_nan() {
                running = running.max(flat[k]);
            }
            lower[k] = running;
        }
        let mut upper = vec![f64::INFINITY; cells];
        let mut running = f64::INFINITY;
        for k in (0..cells).rev() {
            if !flat[k].is_nan() {
                running = running.min(flat[k]);
            }
            upper[k] = running;
        }
        Self {
            cells,
            flat,
            lower,
            upper,
        }
    }

    /// Quantile intervals `[q_lo, q_hi]` of the flat runs.
    pub(crate) fn flat_runs(&self) -> Vec<(f64, f64)> {
        let n = self.cells as f64;
        let mut runs = Vec::new();
        let mut i = 0;
        while i < self.cells {
            if self.flat[i].is_nan() {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < self.cells && self.flat[j] == self.flat[i] {
                j += 1;
            }
            runs.push((i as f64 / n, j as f64 / n));
            i = j;
        }
        runs
    }

    pub(crate) fn eval<R: FnOnce() -> f64>(&self, q: f64, raw: R) -> f64 {
        let i = ((q * self.cells as f64) as usize).min(self.cells - 1);
        let level = self.flat[i];
        if !level.is_nan() {
            return level;
        }
        raw().clamp(self.lower[i], self.upper[i])
    }
}
