//! Physical-frame functionals: energy pieces, homogeneous pair norms, the
//! space-time norm monitor, the L1-in-time ledger for the nonlinear term
//! with dyadic windows, the sharp-exponent exponential functional, annulus
//! amplitude bounds and support radii.

use crate::error::{CritError, Result};
use crate::field::{integrate_radial_map, RadialField, SpacetimeRecord, WaveState};
use crate::nonlin::{nonlinearity, potential_density, NonlinearityVariant, SeriesPolicy};

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub gradient: f64,
    pub potential: f64,
    pub total: f64,
}

/// `1/2 integral of |du/dr|^2` in the Dirichlet form matched to the
/// Laplacian's flux stencil: differences live on cell edges, the outer edge
/// sees the Dirichlet zero.
fn gradient_energy(u: &RadialField) -> f64 {
    let g = u.grid;
    let n = g.n_cells;
    let mut acc = 0.0;
    for j in 0..n {
        let up = if j + 1 < n { u.samples[j + 1] } else { 0.0 };
        let d = up - u.samples[j];
        acc += (j as f64 + 1.0) * d * d;
    }
    // the two dr factors of the quadrature cancel one 1/dr^2 of the square
    std::f64::consts::PI * acc
}

pub fn energy(
    state: &WaveState,
    variant: NonlinearityVariant,
    policy: &SeriesPolicy,
) -> Result<EnergyBreakdown> {
    let kinetic = 0.5 * integrate_radial_map(&state.w, |v| v * v);
    let gradient = gradient_energy(&state.u);
    let mut pot = 0.0;
    let dr = state.grid().dr;
    for (j, &v) in state.u.samples.iter().enumerate() {
        pot += potential_density(v, variant, policy)? * (j as f64 + 0.5);
    }
    let potential = 0.5 * 2.0 * std::f64::consts::PI * pot * dr * dr;
    Ok(EnergyBreakdown {
        kinetic,
        gradient,
        potential,
        total: kinetic + gradient + potential,
    })
}

/// Homogeneous-H1-by-L2 distance between two states on one grid.
pub fn pair_norm(a: &WaveState, b: &WaveState) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(CritError::GridMismatch);
    }
    let du = RadialField {
        grid: *a.grid(),
        samples: a
            .u
            .samples
            .iter()
            .zip(&b.u.samples)
            .map(|(x, y)| x - y)
            .collect(),
    };
    let grad2 = 2.0 * gradient_energy(&du);
    let mut kin2 = 0.0;
    let dr = a.grid().dr;
    for (j, (x, y)) in a.w.samples.iter().zip(&b.w.samples).enumerate() {
        let d = x - y;
        kin2 += d * d * (j as f64 + 0.5);
    }
    kin2 *= 2.0 * std::f64::consts::PI * dr * dr;
    Ok((grad2 + kin2).sqrt())
}

/// `(integral of |u|^p)^{1/p}` by the radial quadrature.
pub fn lp_norm(u: &RadialField, p: f64) -> f64 {
    integrate_radial_map(u, |v| v.abs().powf(p)).powf(1.0 / p)
}

/// Accumulates the two space-time norms whose sum is the small-data monitor:
/// `f(T) = ||u||_{L^{40/9}_t L^20_x} + ||u||_{L^5_t L^10_x}` over `[0, T)`,
/// with composite-trapezoid time quadrature on the snapshot cadence.
#[derive(Debug, Clone, Default)]
pub struct StrichartzMonitor {
    /// running `integral ||u||_{L^20}^{40/9} dt`
    pub i1: f64,
    /// running `integral ||u||_{L^10}^5 dt`
    pub i2: f64,
    last: Option<(f64, f64, f64)>,
    /// `(t, f(t))` after each update
    pub samples: Vec<(f64, f64)>,
}

impl StrichartzMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> f64 {
        self.i1.powf(9.0 / 40.0) + self.i2.powf(0.2)
    }

    pub fn update(&mut self, state: &WaveState) -> Result<()> {
        let a = integrate_radial_map(&state.u, |v| v.abs().powf(20.0)).powf(1.0 / 20.0);
        let b = integrate_radial_map(&state.u, |v| v.abs().powf(10.0)).powf(1.0 / 10.0);
        let (a, b) = (a.powf(40.0 / 9.0), b.powi(5));
        if let Some((t_prev, a_prev, b_prev)) = self.last {
            if state.t <= t_prev {
                return Err(CritError::InvalidInput(format!(
                    "monitor updates must be time-ordered: {} after {t_prev}",
                    state.t
                )));
            }
            let h = state.t - t_prev;
            self.i1 += 0.5 * h * (a_prev + a);
            self.i2 += 0.5 * h * (b_prev + b);
        }
        self.last = Some((state.t, a, b));
        self.samples.push((state.t, self.value()));
        Ok(())
    }
}

/// Per-snapshot `||N(u(t))||_{L^2}`, its running time integral, and dyadic
/// window sums over `[t0 2^n, t0 2^{n+1})`.
#[derive(Debug, Clone)]
pub struct NLedger {
    pub t0: f64,
    pub entries: Vec<(f64, f64)>,
    pub cumulative: f64,
    pub windows: Vec<f64>,
}

impl NLedger {
    pub fn new(t0: f64) -> Result<Self> {
        if !(t0 > 0.0) {
            return Err(CritError::InvalidInput(format!(
                "dyadic base time must be positive, got {t0}"
            )));
        }
        Ok(Self {
            t0,
            entries: Vec::new(),
            cumulative: 0.0,
            windows: Vec::new(),
        })
    }

    fn window_of(&self, t: f64) -> Option<usize> {
        if t < self.t0 {
            None
        } else {
            Some((t / self.t0).log2().floor() as usize)
        }
    }

    fn deposit(&mut self, n: usize, v: f64) {
        if self.windows.len() <= n {
            self.windows.resize(n + 1, 0.0);
        }
        self.windows[n] += v;
    }

    /// Add a trapezoid segment `[ta, tb]` with endpoint integrand values,
    /// split at dyadic window edges so each window gets exactly its share.
    fn add_segment(&mut self, ta: f64, va: f64, tb: f64, vb: f64) {
        self.cumulative += 0.5 * (tb - ta) * (va + vb);
        let mut t = ta;
        let mut v = va;
        let lerp = |t_at: f64| va + (vb - va) * (t_at - ta) / (tb - ta);
        while t < tb {
            let (end, win) = match self.window_of(t) {
                None => (self.t0.min(tb), None),
                Some(n) => ((self.t0 * 2f64.powi(n as i32 + 1)).min(tb), Some(n)),
            };
            let v_end = if end >= tb { vb } else { lerp(end) };
            if let Some(n) = win {
                self.deposit(n, 0.5 * (end - t) * (v + v_end));
            }
            t = end;
            v = v_end;
        }
    }

    pub fn update(
        &mut self,
        state: &WaveState,
        variant: NonlinearityVariant,
        policy: &SeriesPolicy,
    ) -> Result<()> {
        let dr = state.grid().dr;
        let mut acc = 0.0;
        for (j, &v) in state.u.samples.iter().enumerate() {
            let n = nonlinearity(v, variant, policy)?;
            acc += n * n * (j as f64 + 0.5);
        }
        let nl2 = (2.0 * std::f64::consts::PI * acc * dr * dr).sqrt();
        if let Some(&(t_prev, v_prev)) = self.entries.last() {
            if state.t <= t_prev {
                return Err(CritError::InvalidInput(format!(
                    "ledger updates must be time-ordered: {} after {t_prev}",
                    state.t
                )));
            }
            self.add_segment(t_prev, v_prev, state.t, nl2);
        }
        self.entries.push((state.t, nl2));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SmallDataReport {
    pub epsilon: f64,
    pub f_infinity: f64,
    pub ratio: f64,
    pub n_l1l2_total: f64,
}

/// Run the monitor and ledger over a full record.
pub fn small_data_report(
    record: &SpacetimeRecord,
    variant: NonlinearityVariant,
    policy: &SeriesPolicy,
) -> Result<SmallDataReport> {
    let first = record
        .snapshots
        .first()
        .ok_or_else(|| CritError::InvalidInput("empty record".into()))?;
    let zero = WaveState::zeros(*first.grid(), first.t);
    let epsilon = pair_norm(first, &zero)?;
    let mut monitor = StrichartzMonitor::new();
    let mut ledger = NLedger::new(first.t.max(1.0))?;
    for s in &record.snapshots {
        monitor.update(s)?;
        ledger.update(s, variant, policy)?;
    }
    let f_infinity = monitor.value();
    Ok(SmallDataReport {
        epsilon,
        f_infinity,
        ratio: if epsilon > 0.0 {
            f_infinity / epsilon
        } else {
            0.0
        },
        n_l1l2_total: ledger.cumulative,
    })
}

/// `integral of (e^{4 pi u^2} - 1) dx`; the sharp exponential-integrability
/// exponent for unit Dirichlet energy in 2D.
pub fn trudinger_moser(u: &RadialField, _policy: &SeriesPolicy) -> Result<f64> {
    const ALPHA: f64 = 4.0 * std::f64::consts::PI;
    let dr = u.grid.dr;
    let mut acc = 0.0;
    for (j, &v) in u.samples.iter().enumerate() {
        let x = ALPHA * v * v;
        if x > crate::nonlin::EXP_ARG_BUDGET {
            return Err(CritError::Saturation {
                arg: x,
                budget: crate::nonlin::EXP_ARG_BUDGET,
            });
        }
        acc += x.exp_m1() * (j as f64 + 0.5);
    }
    Ok(2.0 * std::f64::consts::PI * acc * dr * dr)
}

/// Largest node radius where `|f| > threshold`, else 0.
pub fn support_radius(f: &RadialField, threshold: f64) -> f64 {
    f.samples
        .iter()
        .rposition(|v| v.abs() > threshold)
        .map_or(0.0, |j| f.grid.node(j))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct AnnulusReport {
    pub c_fitted: f64,
    pub worst_ratio: f64,
    /// `(t, max |u| over [t - d, t], bound)` per snapshot past the fit
    pub rows: Vec<(f64, f64, f64)>,
}

/// Amplitude on the trailing annulus `r in [t - d, t]` against the shape
/// `C sqrt(E) log^{1/2}(t/(t-d))`, with `C` fitted on the first admissible
/// snapshot. Verifies the logarithmic shape, not an absolute constant.
pub fn annulus_bound_check(
    record: &SpacetimeRecord,
    d: f64,
    t_from: f64,
    variant: NonlinearityVariant,
    policy: &SeriesPolicy,
) -> Result<AnnulusReport> {
    if !(d > 0.0) || t_from <= d {
        return Err(CritError::InvalidInput(format!(
            "annulus needs 0 < d < t_from, got d = {d}, t_from = {t_from}"
        )));
    }
    let first = record
        .snapshots
        .first()
        .ok_or_else(|| CritError::InvalidInput("empty record".into()))?;
    let e_total = energy(first, variant, policy)?.total;
    let sqrt_e = e_total.sqrt();
    let mut c_fitted = 0.0;
    let mut fitted = false;
    let mut worst_ratio: f64 = 0.0;
    let mut rows = Vec::new();
    for s in &record.snapshots {
        let t = s.t;
        if t < t_from {
            continue;
        }
        let g = s.grid();
        let lo = ((t - d) / g.dr - 0.5).ceil().max(0.0) as usize;
        let hi = ((t / g.dr - 0.5).floor() as usize).min(g.n_cells.saturating_sub(1));
        if lo > hi {
            return Err(CritError::InvalidInput(format!(
                "annulus [{}, {t}] misses every grid node",
                t - d
            )));
        }
        let max_u = s.u.samples[lo..=hi]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let shape = sqrt_e * (t / (t - d)).ln().sqrt();
        if !fitted {
            // fit so the first admissible snapshot sits exactly on the bound
            c_fitted = if shape > 0.0 { max_u / shape } else { 0.0 };
            fitted = true;
            rows.push((t, max_u, c_fitted * shape));
            continue;
        }
        let bound = c_fitted * shape;
        rows.push((t, max_u, bound));
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(max_u / bound);
        } else if max_u > 0.0 {
            worst_ratio = f64::INFINITY;
        }
    }
    if !fitted {
        return Err(CritError::OutOfCoverage(format!(
            "no snapshot at or after t = {t_from}"
        )));
    }
    Ok(AnnulusReport {
        c_fitted,
        worst_ratio,
        rows,
    })
}
