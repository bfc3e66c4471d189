//! Verification suites: one per headline property, each returning every
//! measured quantity next to the tolerance it was judged against. The CLI
//! `verify` subcommand and the acceptance test both run these; nothing here
//! is allowed to hide a number behind a bare boolean.

use std::f64::consts::SQRT_2;

use crate::conformal::{
    cone_balance, cone_integrals, dg_conformality, evolve_conformal, hyperboloid_n_decay,
    kelvin_map, mantle_flux, transform_slice, ConformalDynamics, ConformalField, HyperboloidSpec,
    Provenance,
};
use crate::diagnostics::{
    annulus_bound_check, energy, pair_norm, small_data_report, support_radius, trudinger_moser,
    NLedger,
};
use crate::error::Result;
use crate::evolve::{
    evolve_record, hankel_propagate, Dynamics, InitialDataSpec, IntegratorConfig,
};
use crate::field::{make_grid, RadialField, SpacetimeRecord, WaveState};
use crate::nonlin::{
    comparison_residual, pointwise_bound, remainder_density, NonlinearityVariant, SeriesPolicy,
};

const POLICY: SeriesPolicy = SeriesPolicy {
    switch_threshold: 0.5,
    taylor_terms: 30,
};

const MASSLESS: Dynamics = Dynamics::Nonlinear(NonlinearityVariant::Massless);

/// One measured quantity against its pinned tolerance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub op: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn at_most(label: &str, measured: f64, threshold: f64) -> Self {
        Self {
            label: label.to_string(),
            measured,
            threshold,
            op: "<=",
            pass: measured <= threshold,
        }
    }

    pub fn at_least(label: &str, measured: f64, threshold: f64) -> Self {
        Self {
            label: label.to_string(),
            measured,
            threshold,
            op: ">=",
            pass: measured >= threshold,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl SuiteResult {
    fn new(name: &str, checks: Vec<Check>) -> Self {
        Self {
            name: name.to_string(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

pub const SUITE_NAMES: [&str; 9] = [
    "linear-oracle",
    "energy",
    "nonlin-inequalities",
    "conformal-identities",
    "cone-ledger",
    "decay-exponents",
    "scattering",
    "small-data",
    "sign-obstruction",
];

pub fn run_suite(name: &str) -> Result<SuiteResult> {
    match name {
        "linear-oracle" => linear_oracle(),
        "energy" => energy_suite(),
        "nonlin-inequalities" => nonlin_inequalities(),
        "conformal-identities" => conformal_identities(),
        "cone-ledger" => cone_ledger(),
        "decay-exponents" => decay_exponents(),
        "scattering" => scattering(),
        "small-data" => small_data(),
        "sign-obstruction" => sign_obstruction(),
        other => Err(crate::error::CritError::InvalidInput(format!(
            "unknown suite {other:?}; known: {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

fn rel_l2(a: &RadialField, oracle: &RadialField) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..a.grid.n_cells {
        let w = j as f64 + 0.5;
        num += (a.samples[j] - oracle.samples[j]).powi(2) * w;
        den += oracle.samples[j].powi(2) * w;
    }
    (num / den).sqrt()
}

// ---------------------------------------------------------------- suite 1

fn linear_oracle_error(dr: f64, r_max: f64) -> Result<f64> {
    let grid = make_grid(r_max, dr)?;
    let cfg = IntegratorConfig::new(dr, 0.5, 1.0, 1e-12)?;
    let rec = evolve_record(
        &InitialDataSpec::bump(1.0, 1.0),
        Dynamics::Linear,
        &cfg,
        grid,
        0.0,
        1.0,
    )?;
    let first = &rec.snapshots[0];
    let oracle = hankel_propagate(&first.u, &first.w, 1.0)?;
    let last = rec.snapshots.last().unwrap();
    Ok(rel_l2(&last.u, &oracle.u))
}

/// Time stepper against the Hankel-transform propagator for the free
/// equation, plus the measured convergence order under grid refinement.
fn linear_oracle() -> Result<SuiteResult> {
    let e256 = linear_oracle_error(1.0 / 256.0, 8.0)?;
    // the oracle has its own quadrature floor that shrinks with the domain
    // radius; the order measurement needs that floor well below the finest
    // solver error, hence the wider domain
    let c64 = linear_oracle_error(1.0 / 64.0, 24.0)?;
    let c128 = linear_oracle_error(1.0 / 128.0, 24.0)?;
    let c256 = linear_oracle_error(1.0 / 256.0, 24.0)?;
    let order = 0.5 * ((c64 / c128).log2() + (c128 / c256).log2());
    Ok(SuiteResult::new(
        "linear-oracle",
        vec![
            Check::at_most("relative L2 error at dr = 1/256", e256, 1e-3),
            Check::at_least("convergence order over dr = 1/64..1/256", order, 1.8),
        ],
    ))
}

// ---------------------------------------------------------------- suite 2

/// Energy conservation and finite propagation speed on a moderate-energy
/// run. The drift of the leapfrog scheme is O(dt^2); at this grid the
/// tolerance needs cfl = 0.125, which trades runtime for the tighter dt.
fn energy_suite() -> Result<SuiteResult> {
    let dr = 1.0 / 256.0;
    let t_final = 20.0;
    // dispersive tails run ahead of the light cone by about 1.55x at the
    // 1e-12 support threshold; the grid has to hold them
    let grid = make_grid(0.8 + 1.55 * t_final + 1.0, dr)?;
    let cfg = IntegratorConfig::new(dr, 0.125, 0.25, 1e-12)?;
    let rec = evolve_record(
        &InitialDataSpec::bump(1.75, 0.4),
        MASSLESS,
        &cfg,
        grid,
        0.0,
        t_final,
    )?;
    let e0 = energy(&rec.snapshots[0], NonlinearityVariant::Massless, &POLICY)?.total;
    let mut drift = 0.0f64;
    for s in &rec.snapshots {
        let e = energy(s, NonlinearityVariant::Massless, &POLICY)?.total;
        drift = drift.max(((e - e0) / e0).abs());
    }
    let steps_between = (rec.dt_rec / cfg.dt).round();
    let allowed = steps_between * (cfg.dt + dr);
    let mut worst_growth_excess = f64::NEG_INFINITY;
    for pair in rec.snapshots.windows(2) {
        let a = support_radius(&pair[0].u, 1e-12);
        let b = support_radius(&pair[1].u, 1e-12);
        worst_growth_excess = worst_growth_excess.max(b - a - allowed);
    }
    Ok(SuiteResult::new(
        "energy",
        vec![
            Check::at_most("initial energy distance from 10", (e0 - 10.0).abs(), 0.25),
            Check::at_most("worst relative energy drift", drift, 2e-5),
            Check::at_most(
                "support growth beyond (dt + dr) per step",
                worst_growth_excess,
                1e-9,
            ),
        ],
    ))
}

// ---------------------------------------------------------------- suite 3

struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Randomized pointwise inequalities of the nonlinearity: the two-branch
/// growth bound, nonnegativity of the remainder density, and symmetry plus
/// sign cases of the mantle comparison function.
fn nonlin_inequalities() -> Result<SuiteResult> {
    const SAMPLES: usize = 10_000;
    let mut rng = Lcg(0x9e3779b97f4a7c15);
    let mut bound_violations = 0u32;
    let mut remainder_violations = 0u32;
    let mut symmetry_violations = 0u32;
    let mut sign_violations = 0u32;
    for _ in 0..SAMPLES {
        let u = rng.in_range(-6.0, 6.0);
        if !pointwise_bound(u, &POLICY)?.holds {
            bound_violations += 1;
        }

        let uc = rng.in_range(-8.0, 8.0);
        let om = rng.in_range(0.0, 1.0);
        if remainder_density(uc, om, &POLICY)? < 0.0 {
            remainder_violations += 1;
        }

        let a = rng.in_range(-4.0, 4.0);
        let b = rng.in_range(-4.0, 4.0);
        let omf = rng.in_range(0.0, 1.0);
        let f = comparison_residual(a, b, omf, &POLICY)?;
        let g = comparison_residual(-a, -b, omf, &POLICY)?;
        if f.to_bits() != g.to_bits() {
            symmetry_violations += 1;
        }
        if a * b <= 0.0 && f > 1e-14 * f.abs().max(1.0) {
            sign_violations += 1;
        }
    }
    Ok(SuiteResult::new(
        "nonlin-inequalities",
        vec![
            Check::at_most("growth bound violations", bound_violations.into(), 0.0),
            Check::at_most(
                "remainder negativity violations",
                remainder_violations.into(),
                0.0,
            ),
            Check::at_most(
                "comparison symmetry violations",
                symmetry_violations.into(),
                0.0,
            ),
            Check::at_most(
                "comparison opposite-sign violations",
                sign_violations.into(),
                0.0,
            ),
        ],
    ))
}

// ---------------------------------------------------------------- suite 4

/// Worst interior disagreement between the directly evolved inverted-frame
/// field and the slice pulled back from the physical record.
fn cross_error(dr: f64) -> Result<f64> {
    let rec = physical_record(1.0, dr, 8.0, 0.4 + 1.5 * 7.0 + 0.3, dr)?;
    let cgrid = make_grid(1.0, dr)?;
    let init = transform_slice(&rec, 0.9, cgrid, 0.6)?;
    let cfg = IntegratorConfig::new(dr, 0.5, 10.0, 1e-9)?;
    let slices = evolve_conformal(&init, 0.87, ConformalDynamics::Massless, &cfg)?;
    let evolved = slices.last().unwrap();
    let target = transform_slice(&rec, evolved.t_conf, cgrid, 0.6)?;
    let mut worst = 0.0f64;
    for j in 0..cgrid.n_cells {
        if cgrid.node(j) >= 0.86 {
            break;
        }
        worst = worst.max((evolved.u.samples[j] - target.u.samples[j]).abs());
    }
    Ok(worst)
}

/// Exact identities of the inversion plus convergence of the two independent
/// routes to the inverted-frame solution.
fn conformal_identities() -> Result<SuiteResult> {
    const SAMPLES: usize = 10_000;
    let mut rng = Lcg(0x2545f4914f6cdd1d);
    let mut worst_involution = 0.0f64;
    let mut worst_conformality = 0.0f64;
    for _ in 0..SAMPLES {
        let t = rng.in_range(0.2, 5.0);
        let r = t * rng.in_range(0.0, 0.95);
        let p = kelvin_map(t, r)?;
        let q = kelvin_map(p.t_conf, p.r_conf)?;
        worst_involution = worst_involution
            .max((q.t_conf - t).abs() / t)
            .max((q.r_conf - r).abs() / t);

        // x keeps a dominant timelike or spacelike component: near the null
        // cone the identity is exact but catastrophically ill-conditioned
        let x = loop {
            let head = rng.in_range(0.5, 4.0);
            let a = rng.in_range(-0.2, 0.2);
            let b = rng.in_range(-0.2, 0.2);
            let c = if rng.next_f64() < 0.5 {
                [head, a, b]
            } else {
                [a, head, b]
            };
            let xx = c[0] * c[0] - c[1] * c[1] - c[2] * c[2];
            if xx.abs() > 0.05 {
                break c;
            }
        };
        let y = [
            rng.in_range(-2.0, 2.0),
            rng.in_range(-2.0, 2.0),
            rng.in_range(-2.0, 2.0),
        ];
        let (lhs, rhs) = dg_conformality(x, y)?;
        // the identity cancels catastrophically when dG_x y is near null,
        // so the error is judged against the unit scale there
        let scale = rhs.abs().max(1.0);
        worst_conformality = worst_conformality.max((lhs - rhs).abs() / scale);
    }
    let e128 = cross_error(1.0 / 128.0)?;
    let e256 = cross_error(1.0 / 256.0)?;
    Ok(SuiteResult::new(
        "conformal-identities",
        vec![
            Check::at_most("worst involution relative error", worst_involution, 1e-12),
            Check::at_most(
                "worst differential conformality relative error",
                worst_conformality,
                1e-12,
            ),
            Check::at_least(
                "cross-agreement gain under joint dr halving",
                e128 / e256,
                3.0,
            ),
        ],
    ))
}

// ---------------------------------------------------------------- suite 5

fn physical_record(
    amplitude: f64,
    dr: f64,
    t_final: f64,
    r_max: f64,
    cadence: f64,
) -> Result<SpacetimeRecord> {
    let grid = make_grid(r_max, dr)?;
    let cfg = IntegratorConfig::new(dr, 0.5, cadence, 1e-12)?;
    evolve_record(
        &InitialDataSpec::bump(amplitude, 0.4),
        MASSLESS,
        &cfg,
        grid,
        1.0,
        t_final,
    )
}

/// The standard truncated-cone run: a unit bump pulled back through the
/// inversion at T = 0.9 and integrated down to T = 0.1. The wave crosses the
/// mantle on the retarded scale dR * 2 T^2, so slices come out every couple
/// of integrator steps or the flux integral misses the crossing spike.
pub fn deep_conformal_slices() -> Result<Vec<ConformalField>> {
    let rec = physical_record(1.0, 1.0 / 256.0, 4.3, 0.4 + 1.5 * 3.3 + 0.3, 1.0 / 256.0)?;
    let cgrid = make_grid(2.0, 1.0 / 512.0)?;
    let init = transform_slice(&rec, 0.9, cgrid, 0.6)?;
    let cfg = IntegratorConfig::new(1.0 / 512.0, 0.5, 0.002, 1e-9)?;
    evolve_conformal(&init, 0.1, ConformalDynamics::Massless, &cfg)
}

/// Energy accounting on the truncated cone: the balance inequalities, the
/// dyadic monotonicity of truncated energy and mantle flux, and the growth
/// ratio of the exponential cone integral.
fn cone_ledger() -> Result<SuiteResult> {
    let slices = deep_conformal_slices()?;
    let b = cone_balance(&slices, 0.2, &POLICY)?;
    let scale = b.e_a;
    let balance_defect = (b.e_t0 + b.flux / SQRT_2 - b.e_a) / scale;
    let pt_defect = (b.pt_integral - b.e_a) / scale;

    let e_08 = cone_balance(&slices, 0.8, &POLICY)?.e_t0;
    let e_04 = cone_balance(&slices, 0.4, &POLICY)?.e_t0;
    let e_02 = b.e_t0;
    let ladder_increase = (e_04 - e_08).max(e_02 - e_04) / scale;

    let f_08 = mantle_flux(&slices, 0.4, 0.8, &POLICY)? / SQRT_2;
    let f_04 = mantle_flux(&slices, 0.2, 0.4, &POLICY)? / SQRT_2;
    let f_02 = mantle_flux(&slices, 0.1, 0.2, &POLICY)? / SQRT_2;
    let flux_increase = (f_04 - f_08).max(f_02 - f_04) / scale;

    let rep = cone_integrals(&slices, 0.85, &POLICY)?;
    let g_08 = rep.exp_cone_at(0.8).unwrap();
    let g_04 = rep.exp_cone_at(0.4).unwrap();
    let g_02 = rep.exp_cone_at(0.2).unwrap();
    let r_top = g_08 / g_04;
    let r_bot = g_04 / g_02;

    Ok(SuiteResult::new(
        "cone-ledger",
        vec![
            Check::at_most("relative balance defect at T0 = 0.2", balance_defect, 1e-3),
            Check::at_most("relative remainder-integral excess", pt_defect, 1e-3),
            Check::at_most(
                "truncated-energy increase down the dyadic ladder",
                ladder_increase,
                1e-3,
            ),
            Check::at_most(
                "dyadic mantle-flux increase toward the apex",
                flux_increase,
                1e-3,
            ),
            Check::at_least("exponential cone ratio G(0.8)/G(0.4)", r_top, 1.5),
            Check::at_most("exponential cone ratio G(0.8)/G(0.4)", r_top, 2.5),
            Check::at_least("exponential cone ratio G(0.4)/G(0.2)", r_bot, 1.5),
            Check::at_most("exponential cone ratio G(0.4)/G(0.2)", r_bot, 2.5),
        ],
    ))
}

// ---------------------------------------------------------------- suite 6

pub(crate) fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Dyadic decay rates of the nonlinearity, in both frames, plus the
/// logarithmic amplitude bound on the trailing annulus. The grid must be at
/// least this fine: on coarser grids numerical dispersion parks a slowly
/// growing tail at the inner edge of the hyperboloid region and buries the
/// decay. The fit starts at t = 8, past the window where the region's inner
/// boundary still slides toward the wave tail.
fn decay_exponents() -> Result<SuiteResult> {
    let t_final = 65.0;
    let rec = physical_record(1.0, 1.0 / 128.0, t_final, 0.4 + 1.5 * 64.0 + 0.5, 0.125)?;

    let spec = HyperboloidSpec::new(0.25, 2.1, 8.0, t_final)?;
    let hyper = hyperboloid_n_decay(&rec, &spec, &POLICY)?;

    let mut ledger = NLedger::new(1.0)?;
    for s in &rec.snapshots {
        ledger.update(s, NonlinearityVariant::Massless, &POLICY)?;
    }
    // only windows the run fully covers enter the fit
    let points: Vec<(f64, f64)> = ledger
        .windows
        .iter()
        .enumerate()
        .filter(|&(n, &w)| w > 0.0 && 2f64.powi(n as i32 + 1) <= rec.t_last())
        .map(|(n, &w)| (n as f64, w.log2()))
        .collect();
    let ledger_slope = fit_slope(&points);

    // the annulus bound wants the moderate-energy data; d = 1.0 keeps the
    // annulus on the pulse peak (it lags the light cone by about one unit)
    let arec = physical_record(1.75, 1.0 / 256.0, 20.0, 0.4 + 1.5 * 19.0 + 0.5, 0.125)?;
    let annulus = annulus_bound_check(&arec, 1.0, 2.0, NonlinearityVariant::Massless, &POLICY)?;

    Ok(SuiteResult::new(
        "decay-exponents",
        vec![
            Check::at_most("hyperboloid dyadic window slope", hyper.slope, -1.5),
            Check::at_most("physical-frame ledger dyadic slope", ledger_slope, -0.4),
            Check::at_most(
                "worst annulus amplitude ratio after calibration",
                annulus.worst_ratio,
                1.0,
            ),
        ],
    ))
}

// ---------------------------------------------------------------- suite 7

/// Scattering at moderate energy: stability of the extracted profile in the
/// horizon, decay of the distance to the free evolution, and domination of
/// that distance by the Duhamel tail plus scheme error.
fn scattering() -> Result<SuiteResult> {
    use crate::scatter::{decay_curve, extract_profile, scheme_error_estimate};

    let dr = 1.0 / 256.0;
    let t_final = 100.0;
    let grid = make_grid(110.0, dr)?;
    // 1e-6 support threshold: the grid cannot hold the 1e-12 dispersive
    // tails over this horizon, and the scattering functionals do not see
    // amplitudes at that floor
    let cfg = IntegratorConfig::new(dr, 0.5, 0.25, 1e-6)?;
    let data = InitialDataSpec::bump(1.75, 0.4);
    let rec = evolve_record(&data, MASSLESS, &cfg, grid, 0.0, t_final)?;
    let e0 = energy(&rec.snapshots[0], NonlinearityVariant::Massless, &POLICY)?.total;

    let mut ledger = NLedger::new(1.0)?;
    for s in &rec.snapshots {
        ledger.update(s, NonlinearityVariant::Massless, &POLICY)?;
    }

    let p40 = extract_profile(&rec, 40.0, NonlinearityVariant::Massless, &cfg)?;
    let p80 = extract_profile(&rec, 80.0, NonlinearityVariant::Massless, &cfg)?;
    let a = WaveState::new(0.0, p40.v0.clone(), p40.v1.clone())?;
    let b = WaveState::new(0.0, p80.v0.clone(), p80.v1.clone())?;
    let profile_gap = pair_norm(&a, &b)?;

    let curve = decay_curve(&rec, &p80, &ledger, &cfg)?;
    // past the extraction horizon the truncated Duhamel tail regrows by
    // construction, so monotonicity is judged on [t_final/2, T_star]
    let window: Vec<f64> = curve
        .times
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| (50.0..=80.0).contains(*t))
        .map(|(_, v)| *v)
        .collect();
    let mut worst_increase = f64::NEG_INFINITY;
    for pair in window.windows(2) {
        worst_increase = worst_increase.max(pair[1] / pair[0] - 1.0);
    }

    // one coarse-vs-fine comparison at the end, with only endpoint snapshots
    // retained so the fine run fits in memory
    let sc_cfg = IntegratorConfig::new(dr, 0.5, t_final, 1e-6)?;
    let scheme = scheme_error_estimate(&data, MASSLESS, grid, &sc_cfg, 0.0, t_final)?;
    let excess = curve.excess(50.0, 80.0, scheme);

    Ok(SuiteResult::new(
        "scattering",
        vec![
            Check::at_most("initial energy distance from 10", (e0 - 10.0).abs(), 0.25),
            Check::at_most(
                "profile distance between horizons 40 and 80",
                profile_gap,
                1e-3 * e0.sqrt(),
            ),
            Check::at_most(
                "worst relative increase of the decay curve on [50, 80]",
                worst_increase,
                1e-6,
            ),
            Check::at_most("decay curve excess over tail + scheme error", excess, 0.0),
        ],
    ))
}

// ---------------------------------------------------------------- suite 8

fn small_data_run(epsilon_target: f64) -> Result<(f64, f64, f64, f64)> {
    let dr = 1.0 / 128.0;
    let t_final = 8.0;
    let grid = make_grid(0.4 + 1.5 * t_final + 0.5, dr)?;
    let cfg = IntegratorConfig::new(dr, 0.5, 0.25, 1e-14)?;
    // the data norm is linear in the amplitude; calibrate on a unit bump
    let unit = InitialDataSpec::bump(1.0, 0.4).realize(grid, 0.0)?;
    let unit_norm = pair_norm(&unit, &WaveState::zeros(grid, 0.0))?;
    let amp = epsilon_target / unit_norm;
    let rec = evolve_record(
        &InitialDataSpec::bump(amp, 0.4),
        MASSLESS,
        &cfg,
        grid,
        0.0,
        t_final,
    )?;
    let report = small_data_report(&rec, NonlinearityVariant::Massless, &POLICY)?;
    let mut c_tm = 0.0f64;
    for s in &rec.snapshots {
        c_tm = c_tm.max(trudinger_moser(&s.u, &POLICY)?);
    }
    Ok((report.epsilon, report.f_infinity, report.n_l1l2_total, c_tm))
}

/// Small-data bootstrap behavior: the space-time monitor stays finite and
/// proportional to the data size, and the measured ledger obeys the Hoelder
/// chain with the run's own exponential-integrability constant.
fn small_data() -> Result<SuiteResult> {
    let (eps_a, f_a, total_a, tm_a) = small_data_run(1e-2)?;
    let (eps_b, f_b, total_b, tm_b) = small_data_run(1e-3)?;
    let ratio_a = f_a / eps_a;
    let ratio_b = f_b / eps_b;
    let stability = ratio_a.max(ratio_b) / ratio_a.min(ratio_b);
    let chain_a = total_a - (tm_a * f_a.powf(40.0 / 9.0) + std::f64::consts::E * f_a.powi(5));
    let chain_b = total_b - (tm_b * f_b.powf(40.0 / 9.0) + std::f64::consts::E * f_b.powi(5));
    Ok(SuiteResult::new(
        "small-data",
        vec![
            Check::at_most("monitor at epsilon = 1e-2", f_a, 1e3),
            Check::at_most("monitor at epsilon = 1e-3", f_b, 1e3),
            Check::at_most("monitor-to-data ratio spread", stability, 2.0),
            Check::at_most("ledger total at epsilon = 1e-2", total_a, 1e3),
            Check::at_most("ledger total at epsilon = 1e-3", total_b, 1e3),
            Check::at_most("chain inequality margin at epsilon = 1e-2", chain_a, 0.0),
            Check::at_most("chain inequality margin at epsilon = 1e-3", chain_b, 0.0),
        ],
    ))
}

// ---------------------------------------------------------------- suite 9

/// The sign obstruction that forces dropping the mass term: the energy-law
/// source is one-signed for the massless variant and changes sign on a slice
/// once the mass term is kept.
fn sign_obstruction() -> Result<SuiteResult> {
    use crate::conformal::energy_law_probe;

    let d_r = 1.0 / 1024.0;
    let cgrid = make_grid(0.6, d_r)?;
    let bump = InitialDataSpec::bump(3.0, 0.3).realize(cgrid, 0.9)?;
    let init = ConformalField {
        t_conf: 0.9,
        u: bump.u.clone(),
        u_t: RadialField::zeros(cgrid),
        provenance: Provenance::DirectlyEvolved,
    };
    let dt = 0.5 * d_r;
    let cfg = IntegratorConfig::new(d_r, 0.5, dt, 1e-12)?;
    let t_end = 0.9 - 10.0 * dt;

    let massless = evolve_conformal(&init, t_end, ConformalDynamics::Massless, &cfg)?;
    let ml = energy_law_probe(
        &massless[6],
        &massless[5],
        &massless[4],
        NonlinearityVariant::Massless,
        &POLICY,
    )?;
    let ml_rhs_min = ml.iter().map(|s| s.rhs).fold(f64::INFINITY, f64::min);

    let massive = evolve_conformal(&init, t_end, ConformalDynamics::MassiveNoCubic, &cfg)?;
    let mv = energy_law_probe(
        &massive[6],
        &massive[5],
        &massive[4],
        NonlinearityVariant::MassiveNoCubic,
        &POLICY,
    )?;
    let mv_rhs_min = mv.iter().map(|s| s.rhs).fold(f64::INFINITY, f64::min);
    let mv_rhs_max = mv.iter().map(|s| s.rhs).fold(f64::NEG_INFINITY, f64::max);

    Ok(SuiteResult::new(
        "sign-obstruction",
        vec![
            Check::at_least("massless source minimum on the probe slice", ml_rhs_min, 0.0),
            Check::at_most("massive source minimum on the probe slice", mv_rhs_min, -1e-12),
            Check::at_least("massive source maximum on the probe slice", mv_rhs_max, 1e-12),
        ],
    ))
}
