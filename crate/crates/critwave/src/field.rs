//! Radial grids, sampled fields, synchronized wave states and the midpoint
//! quadrature shared by every other module.
//!
//! Nodes are staggered half a cell off the origin, `r_j = (j + 1/2) dr`, so
//! the radial Laplacian never sees the coordinate singularity at `r = 0` and
//! the inner flux vanishes identically.

use serde::Serialize;

use crate::error::{CritError, Result};

pub const MIN_CELLS: usize = 8;

/// Uniform staggered radial grid on `[0, R_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialGrid {
    pub dr: f64,
    pub n_cells: usize,
}

impl RadialGrid {
    /// Node radius `r_j = (j + 1/2) dr`.
    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr
    }

    /// Outer radius `R_max = n_cells * dr`.
    #[inline]
    pub fn r_max(&self) -> f64 {
        self.n_cells as f64 * self.dr
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(move |j| self.node(j))
    }
}

/// Build a grid covering `[0, R_max]` with cell width `dr`.
pub fn make_grid(r_max: f64, dr: f64) -> Result<RadialGrid> {
    if !r_max.is_finite() || !dr.is_finite() || r_max <= 0.0 || dr <= 0.0 {
        return Err(CritError::InvalidInput(format!(
            "grid extents must be positive and finite, got R_max = {r_max}, dr = {dr}"
        )));
    }
    let n_cells = (r_max / dr).round() as usize;
    if n_cells < MIN_CELLS {
        return Err(CritError::InvalidInput(format!(
            "grid too coarse: R_max/dr rounds to {n_cells} cells, need at least {MIN_CELLS}"
        )));
    }
    Ok(RadialGrid { dr, n_cells })
}

/// A radially symmetric scalar field sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: RadialGrid,
    pub samples: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n_cells {
            return Err(CritError::InvalidInput(format!(
                "sample count {} does not match grid with {} cells",
                samples.len(),
                grid.n_cells
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(CritError::InvalidInput(
                "field samples must be finite".into(),
            ));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n_cells],
        }
    }

    /// Sample a radial profile at the grid nodes.
    pub fn from_profile(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples = grid.nodes().map(f).collect();
        Self { grid, samples }
    }

    /// Linear interpolation at radius `r`, with even extension across `r = 0`
    /// and zero extension beyond the outer node.
    pub fn interpolate(&self, r: f64) -> f64 {
        let dr = self.grid.dr;
        let n = self.grid.n_cells;
        // position in node index space
        let s = r / dr - 0.5;
        if s <= 0.0 {
            // between the mirrored node at -dr/2 and the first node: the even
            // extension is flat to first order
            return self.samples[0];
        }
        let j = s.floor() as usize;
        if j + 1 >= n {
            if j >= n {
                return 0.0;
            }
            // taper linearly to the Dirichlet value 0 at R_max + dr/2
            let w = s - j as f64;
            return self.samples[j] * (1.0 - w);
        }
        let w = s - j as f64;
        self.samples[j] * (1.0 - w) + self.samples[j + 1] * w
    }
}

/// Midpoint-rule evaluation of the 2D integral of a radially symmetric
/// function: `2 pi sum_j f_j r_j dr`.
pub fn integrate_radial(f: &RadialField) -> f64 {
    let dr = f.grid.dr;
    let mut acc = 0.0;
    for (j, v) in f.samples.iter().enumerate() {
        acc += v * (j as f64 + 0.5);
    }
    2.0 * std::f64::consts::PI * acc * dr * dr
}

/// Same quadrature applied to a pointwise map of the samples.
pub fn integrate_radial_map(f: &RadialField, map: impl Fn(f64) -> f64) -> f64 {
    let dr = f.grid.dr;
    let mut acc = 0.0;
    for (j, v) in f.samples.iter().enumerate() {
        acc += map(*v) * (j as f64 + 0.5);
    }
    2.0 * std::f64::consts::PI * acc * dr * dr
}

/// Field `u` and its time derivative `w` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub u: RadialField,
    pub w: RadialField,
}

impl WaveState {
    pub fn new(t: f64, u: RadialField, w: RadialField) -> Result<Self> {
        if u.grid != w.grid {
            return Err(CritError::GridMismatch);
        }
        if !(t >= 0.0) {
            return Err(CritError::InvalidInput(format!("state time {t} < 0")));
        }
        Ok(Self { t, u, w })
    }

    pub fn zeros(grid: RadialGrid, t: f64) -> Self {
        Self {
            t,
            u: RadialField::zeros(grid),
            w: RadialField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.u.grid
    }
}

/// Cadenced history of states; the basis for interpolation at arbitrary
/// `(t, r)` and for every space-time diagnostic.
#[derive(Debug, Clone)]
pub struct SpacetimeRecord {
    pub dt_rec: f64,
    pub snapshots: Vec<WaveState>,
    pub fingerprint: String,
}

impl SpacetimeRecord {
    pub fn new(dt_rec: f64, fingerprint: String) -> Self {
        Self {
            dt_rec,
            snapshots: Vec::new(),
            fingerprint,
        }
    }

    pub fn push(&mut self, state: WaveState) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if state.t <= last.t {
                return Err(CritError::InvalidInput(format!(
                    "snapshot times must increase: {} after {}",
                    state.t, last.t
                )));
            }
        }
        self.snapshots.push(state);
        Ok(())
    }

    pub fn t_first(&self) -> f64 {
        self.snapshots.first().map_or(0.0, |s| s.t)
    }

    pub fn t_last(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }

    pub fn grid(&self) -> Option<&RadialGrid> {
        self.snapshots.first().map(|s| s.grid())
    }

    /// Index of the snapshot closest in time to `t`.
    pub fn nearest(&self, t: f64) -> Option<usize> {
        if self.snapshots.is_empty() {
            return None;
        }
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (i, s) in self.snapshots.iter().enumerate() {
            let d = (s.t - t).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        Some(best)
    }

    /// Bracketing snapshot pair for time `t`, with the interpolation weight.
    pub fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        let n = self.snapshots.len();
        if n == 0 || t < self.t_first() - 1e-12 || t > self.t_last() + 1e-12 {
            return Err(CritError::OutOfCoverage(format!(
                "t = {t} outside record range [{}, {}]",
                self.t_first(),
                self.t_last()
            )));
        }
        let t = t.clamp(self.t_first(), self.t_last());
        // snapshots are nearly uniformly spaced; guess then fix up
        let mut k = (((t - self.t_first()) / self.dt_rec) as usize).min(n - 1);
        while k + 1 < n && self.snapshots[k + 1].t <= t {
            k += 1;
        }
        while k > 0 && self.snapshots[k].t > t {
            k -= 1;
        }
        if k + 1 >= n {
            return Ok((n - 1, n - 1, 0.0));
        }
        let t0 = self.snapshots[k].t;
        let t1 = self.snapshots[k + 1].t;
        Ok(((k), (k + 1), (t - t0) / (t1 - t0)))
    }

    /// Bilinear interpolation of `(u, w)` at `(t, r)`.
    pub fn sample(&self, t: f64, r: f64) -> Result<(f64, f64)> {
        let (a, b, w) = self.bracket(t)?;
        let sa = &self.snapshots[a];
        let sb = &self.snapshots[b];
        Ok((
            sa.u.interpolate(r) * (1.0 - w) + sb.u.interpolate(r) * w,
            sa.w.interpolate(r) * (1.0 - w) + sb.w.interpolate(r) * w,
        ))
    }

    /// Interpolated radial derivative of `u` at `(t, r)`.
    ///
    /// Difference quotients live at the integer positions `r = j dr`
    /// (vanishing at `r = 0` by symmetry), interpolated linearly in between.
    pub fn sample_du_dr(&self, t: f64, r: f64) -> Result<f64> {
        let (a, b, w) = self.bracket(t)?;
        let g = |s: &WaveState| -> f64 {
            let dr = s.grid().dr;
            let n = s.grid().n_cells;
            let u = &s.u.samples;
            let slope_at = |j: usize| -> f64 {
                // derivative at r = j*dr
                if j == 0 {
                    0.0
                } else if j < n {
                    (u[j] - u[j - 1]) / dr
                } else if j == n {
                    (0.0 - u[n - 1]) / dr
                } else {
                    0.0
                }
            };
            let s_idx = r / dr;
            let j = s_idx.floor() as usize;
            let frac = s_idx - j as f64;
            slope_at(j) * (1.0 - frac) + slope_at(j + 1) * frac
        };
        Ok(g(&self.snapshots[a]) * (1.0 - w) + g(&self.snapshots[b]) * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = make_grid(1.0, 0.125).unwrap();
        assert_eq!(g.n_cells, 8);
        assert_eq!(g.node(0), 1.0 / 16.0);

        let g = make_grid(60.0, 1.0 / 256.0).unwrap();
        assert_eq!(g.n_cells, 15360);

        assert!(make_grid(1.0, 1.0).is_err());
        assert!(make_grid(-1.0, 0.1).is_err());
        assert!(make_grid(1.0, 0.0).is_err());
        assert!(make_grid(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn quadrature_zero_and_disk() {
        let g = make_grid(2.0, 1.0 / 64.0).unwrap();
        let zero = RadialField::zeros(g);
        assert_eq!(integrate_radial(&zero), 0.0);

        let one = RadialField::from_profile(g, |_| 1.0);
        let area = integrate_radial(&one);
        let exact = std::f64::consts::PI * g.r_max() * g.r_max();
        assert!((area - exact).abs() / exact < 1e-12, "midpoint rule is exact for constants");
    }

    #[test]
    fn quadrature_gaussian() {
        let g = make_grid(8.0, 1.0 / 128.0).unwrap();
        let f = RadialField::from_profile(g, |r| (-2.0 * r * r).exp());
        let v = integrate_radial(&f);
        let exact = std::f64::consts::PI / 2.0;
        // midpoint error here is (dr^2/24) |f'(0)| ~ 1.6e-5
        assert!((v - exact).abs() < 5e-5, "got {v}, want {exact}");
    }

    #[test]
    fn quadrature_convergence_order() {
        // measured order >= 1.8 on the Gaussian under dr -> dr/2
        let exact = std::f64::consts::PI / 2.0;
        let err = |dr: f64| {
            let g = make_grid(10.0, dr).unwrap();
            let f = RadialField::from_profile(g, |r| (-2.0 * r * r).exp());
            (integrate_radial(&f) - exact).abs()
        };
        let e1 = err(1.0 / 32.0);
        let e2 = err(1.0 / 64.0);
        let order = (e1 / e2).log2();
        assert!(order >= 1.8, "convergence order {order} too low");
    }

    #[test]
    fn quadrature_linear_and_monotone() {
        let g = make_grid(4.0, 1.0 / 32.0).unwrap();
        let f = RadialField::from_profile(g, |r| (1.0 + r).sin());
        let h = RadialField::from_profile(g, |r| 1.0 / (1.0 + r * r));
        let fg = RadialField::new(
            g,
            f.samples
                .iter()
                .zip(&h.samples)
                .map(|(a, b)| 2.0 * a + 3.0 * b)
                .collect(),
        )
        .unwrap();
        let lhs = integrate_radial(&fg);
        let rhs = 2.0 * integrate_radial(&f) + 3.0 * integrate_radial(&h);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));

        // monotone: h + |f| >= h pointwise
        let bigger = RadialField::new(
            g,
            h.samples
                .iter()
                .zip(&f.samples)
                .map(|(a, b)| a + b.abs())
                .collect(),
        )
        .unwrap();
        assert!(integrate_radial(&bigger) >= integrate_radial(&h));
    }

    #[test]
    fn interpolation_hits_nodes() {
        let g = make_grid(2.0, 0.25).unwrap();
        let f = RadialField::from_profile(g, |r| r * r);
        for j in 0..g.n_cells {
            let r = g.node(j);
            assert!((f.interpolate(r) - r * r).abs() < 1e-14);
        }
        // beyond the grid
        assert_eq!(f.interpolate(10.0), 0.0);
    }

    #[test]
    fn record_rejects_non_increasing_times() {
        let g = make_grid(1.0, 0.125).unwrap();
        let mut rec = SpacetimeRecord::new(0.1, "test".into());
        rec.push(WaveState::zeros(g, 0.0)).unwrap();
        rec.push(WaveState::zeros(g, 0.1)).unwrap();
        assert!(rec.push(WaveState::zeros(g, 0.1)).is_err());
    }
}
