//! Cancellation-safe evaluation of the exponential nonlinearity, the
//! potential density, the conformal remainder density and the mantle
//! comparison function, together with their sign properties.
//!
//! The direct expressions all contain differences like `e^{u^2} - 1 - u^2`
//! that lose essentially every digit for small arguments, so each quantity
//! switches to its truncated power series below a threshold.

use crate::error::{CritError, Result};

/// Natural-log exponent budget; `exp` of anything larger is treated as
/// overflow rather than silently returning infinity.
pub const EXP_ARG_BUDGET: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NonlinearityVariant {
    /// `N(u) = u (e^{u^2} - 1 - u^2)`: massless, cubic term removed.
    Massless,
    /// `N(u) = u e^{u^2}`.
    FullExponential,
    /// `N(u) = u (e^{u^2} - u^2)`: mass term kept, cubic removed.
    MassiveNoCubic,
}

/// Controls the series/direct switch for all evaluations in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy {
    pub switch_threshold: f64,
    pub taylor_terms: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        // 30 terms at threshold 0.5 put the truncation error far below
        // machine epsilon: 0.5^60 / 31! ~ 1e-52.
        Self {
            switch_threshold: 0.5,
            taylor_terms: 30,
        }
    }
}

impl SeriesPolicy {
    pub fn new(switch_threshold: f64, taylor_terms: usize) -> Result<Self> {
        if !(switch_threshold > 0.0 && switch_threshold <= 1.0) || taylor_terms < 10 {
            return Err(CritError::InvalidInput(format!(
                "series policy out of range: threshold {switch_threshold}, terms {taylor_terms}"
            )));
        }
        Ok(Self {
            switch_threshold,
            taylor_terms,
        })
    }
}

#[inline]
fn check_exp_arg(x: f64) -> Result<()> {
    if x > EXP_ARG_BUDGET {
        Err(CritError::Saturation {
            arg: x,
            budget: EXP_ARG_BUDGET,
        })
    } else {
        Ok(())
    }
}

/// `e^x - 1 - x`, stable for small `x` (series in the tail-sum form).
#[inline]
fn expm1m(x: f64, policy: &SeriesPolicy) -> f64 {
    if x.abs() <= policy.switch_threshold {
        // x^2 sum_{k>=0} x^k / (k+2)!
        let mut term = 0.5; // 1/2!
        let mut acc = term;
        for k in 1..policy.taylor_terms {
            term *= x / (k as f64 + 2.0);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        x * x * acc
    } else {
        x.exp_m1() - x
    }
}

/// `e^x - 1 - x - x^2/2`, stable for small `x`.
#[inline]
fn expm1m2(x: f64, policy: &SeriesPolicy) -> f64 {
    if x.abs() <= policy.switch_threshold {
        // x^3 sum_{k>=0} x^k / (k+3)!
        let mut term = 1.0 / 6.0;
        let mut acc = term;
        for k in 1..policy.taylor_terms {
            term *= x / (k as f64 + 3.0);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        x * x * x * acc
    } else {
        x.exp_m1() - x - 0.5 * x * x
    }
}

/// The nonlinear term `N(u)` of the wave equation, by variant.
pub fn nonlinearity(u: f64, variant: NonlinearityVariant, policy: &SeriesPolicy) -> Result<f64> {
    if !u.is_finite() {
        return Err(CritError::InvalidInput(format!("non-finite argument {u}")));
    }
    let x = u * u;
    check_exp_arg(x)?;
    let massless = if u.abs() <= policy.switch_threshold {
        // u^3 sum_{k>=1} u^{2k} / (k+1)!
        let mut term = x / 2.0;
        let mut acc = term;
        for k in 2..=policy.taylor_terms {
            term *= x / (k as f64 + 1.0);
            acc += term;
            if term < 1e-18 * acc {
                break;
            }
        }
        u * u * u * acc
    } else {
        u * (x.exp_m1() - x)
    };
    Ok(match variant {
        NonlinearityVariant::Massless => massless,
        NonlinearityVariant::FullExponential => u * x.exp(),
        NonlinearityVariant::MassiveNoCubic => massless + u,
    })
}

/// Integrand of the potential part of the energy, by variant:
/// `e^{u^2}-1-u^2-u^4/2` (massless), `e^{u^2}-1` (full), `e^{u^2}-1-u^4/2`
/// (massive without cubic). Nonnegative and even in every case, and equal to
/// twice the antiderivative of the matching `N`.
pub fn potential_density(
    u: f64,
    variant: NonlinearityVariant,
    policy: &SeriesPolicy,
) -> Result<f64> {
    if !u.is_finite() {
        return Err(CritError::InvalidInput(format!("non-finite argument {u}")));
    }
    let x = u * u;
    check_exp_arg(x)?;
    Ok(match variant {
        NonlinearityVariant::Massless => {
            if u.abs() <= policy.switch_threshold {
                // u^6 sum_{k>=0} u^{2k} / (k+3)!
                let mut term = 1.0 / 6.0;
                let mut acc = term;
                for k in 1..policy.taylor_terms {
                    term *= x / (k as f64 + 3.0);
                    acc += term;
                    if term < 1e-18 * acc {
                        break;
                    }
                }
                x * x * x * acc
            } else {
                x.exp_m1() - x - 0.5 * x * x
            }
        }
        NonlinearityVariant::FullExponential => x.exp_m1(),
        NonlinearityVariant::MassiveNoCubic => {
            let massless = potential_density(u, NonlinearityVariant::Massless, policy)?;
            massless + x
        }
    })
}

/// The remainder density `P` of the conformal energy law,
/// `P = U^8 sum_{k>=0} (Omega U^2)^k (k+1)/(k+4)! >= 0`.
pub fn remainder_density(u_conf: f64, omega: f64, policy: &SeriesPolicy) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(CritError::InvalidInput(format!(
            "remainder density needs Omega >= 0, got {omega}"
        )));
    }
    let x = omega * u_conf * u_conf;
    check_exp_arg(x)?;
    if x <= policy.switch_threshold {
        let u2 = u_conf * u_conf;
        let u8 = u2 * u2 * u2 * u2;
        // sum_{k>=0} x^k (k+1)/(k+4)!
        let mut pow = 1.0 / 24.0; // x^0 / 4!
        let mut acc = pow; // (k+1) factor is 1 at k = 0
        for k in 1..policy.taylor_terms {
            pow *= x / (k as f64 + 4.0);
            let term = pow * (k as f64 + 1.0);
            acc += term;
            if term < 1e-18 * acc {
                break;
            }
        }
        Ok(u8 * acc)
    } else {
        // Omega^{-4} [ x (e^x - 1 - x) - 3 (e^x - 1 - x - x^2/2) ]
        let w = x * expm1m(x, policy) - 3.0 * expm1m2(x, policy);
        Ok(w / (omega * omega * omega * omega))
    }
}

/// Integrand of the conformal energy-law source by variant. Massless gives
/// the sign-definite `P`; keeping the mass term adds `-2 Omega^{-2} U^2`,
/// which destroys the sign.
pub fn remainder_integrand(
    u_conf: f64,
    omega: f64,
    variant: NonlinearityVariant,
    policy: &SeriesPolicy,
) -> Result<f64> {
    let p = remainder_density(u_conf, omega, policy)?;
    match variant {
        NonlinearityVariant::Massless => Ok(p),
        NonlinearityVariant::MassiveNoCubic => {
            if omega <= 0.0 {
                return Err(CritError::InvalidInput(
                    "mass correction needs Omega > 0".into(),
                ));
            }
            Ok(p - 2.0 * u_conf * u_conf / (omega * omega))
        }
        NonlinearityVariant::FullExponential => Err(CritError::InvalidInput(
            "no conformal remainder for the variant with cubic term".into(),
        )),
    }
}

/// The comparison function `f(U, Vbar)` that appears when the nonlinear term
/// is recentered at the mantle average:
/// `f = 3/2 sum_{k>=3} Omega^{k-3} (U^{2k} - Vbar^{2k})/k!
///    - 1/2 U (U - Vbar) sum_{k>=2} Omega^{k-2} U^{2k}/k!`.
///
/// Evaluated as one uniform per-order series; the sign cases live in the
/// tests, not here.
pub fn comparison_residual(
    u_conf: f64,
    vbar: f64,
    omega: f64,
    policy: &SeriesPolicy,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(CritError::InvalidInput(format!(
            "comparison residual needs Omega in [0, 1], got {omega}"
        )));
    }
    let u2 = u_conf * u_conf;
    let v2 = vbar * vbar;
    check_exp_arg(omega * u2.max(v2))?;
    let uu = u_conf * (u_conf - vbar); // even under (U, Vbar) -> (-U, -Vbar)

    // k = 2 carries only the second series: Omega^0 U^4 / 2!
    let mut acc = -0.5 * uu * (u2 * u2 / 2.0);
    // running values at order k: pu = U^{2k}/k!, pv = Vbar^{2k}/k!, om3 = Omega^{k-3}
    let mut pu = u2 * u2 / 2.0;
    let mut pv = v2 * v2 / 2.0;
    let max_k = policy.taylor_terms.max(60) * 4;
    for k in 3..max_k {
        pu *= u2 / k as f64;
        pv *= v2 / k as f64;
        let om3 = omega.powi(k as i32 - 3);
        let term = 1.5 * om3 * (pu - pv) - 0.5 * uu * om3 * omega * pu;
        acc += term;
        if term.abs() < 1e-18 * acc.abs().max(1e-300) && k > 8 {
            break;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy)]
pub struct PointwiseBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// The two-branch pointwise bound on the massless nonlinearity:
/// `|N(u)| <= |u|^{40/9} (e^{u^2}-1)` for `|u| >= 1`, else `e |u|^5`.
pub fn pointwise_bound(u: f64, policy: &SeriesPolicy) -> Result<PointwiseBound> {
    let lhs = nonlinearity(u, NonlinearityVariant::Massless, policy)?.abs();
    let a = u.abs();
    let rhs = if a >= 1.0 {
        check_exp_arg(u * u)?;
        a.powf(40.0 / 9.0) * (u * u).exp_m1()
    } else {
        std::f64::consts::E * a.powi(5)
    };
    Ok(PointwiseBound {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Nonlinear forcing of the transformed equation,
/// `Omega^{-2} U (e^{Omega U^2} - 1 - Omega U^2) = U^5 sum_{k>=0} x^k/(k+2)!`.
///
/// The series form is regular through `Omega = 0` (value `U^5/2`) and for the
/// negative `Omega` seen beyond the mantle on a fixed grid.
pub fn conformal_force(u_conf: f64, omega: f64, policy: &SeriesPolicy) -> Result<f64> {
    let x = omega * u_conf * u_conf;
    check_exp_arg(x)?;
    if x.abs() <= policy.switch_threshold {
        let u2 = u_conf * u_conf;
        let mut term = 0.5;
        let mut acc = term;
        for k in 1..policy.taylor_terms {
            term *= x / (k as f64 + 2.0);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        Ok(u_conf * u2 * u2 * acc)
    } else {
        Ok(u_conf * (x.exp_m1() - x) / (omega * omega))
    }
}

/// Scaled potential of the conformal energy density,
/// `Omega^{-3} (e^{Omega U^2} - 1 - Omega U^2 - Omega^2 U^4 / 2)
///  = U^6 sum_{k>=0} x^k/(k+3)!`, regular through `Omega = 0` (value `U^6/6`).
pub fn scaled_potential(u_conf: f64, omega: f64, policy: &SeriesPolicy) -> Result<f64> {
    let x = omega * u_conf * u_conf;
    check_exp_arg(x)?;
    if x.abs() <= policy.switch_threshold {
        let u2 = u_conf * u_conf;
        let mut term = 1.0 / 6.0;
        let mut acc = term;
        for k in 1..policy.taylor_terms {
            term *= x / (k as f64 + 3.0);
            acc += term;
            if term.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        Ok(u2 * u2 * u2 * acc)
    } else {
        Ok(expm1m2(x, policy) / (omega * omega * omega))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const POLICY: SeriesPolicy = SeriesPolicy {
        switch_threshold: 0.5,
        taylor_terms: 30,
    };

    // --- double-double oracle -------------------------------------------
    //
    // Independent extended-precision route used only to pin expected values:
    // (hi, lo) pairs with exact two-sum/two-product arithmetic, series summed
    // to far more terms than the shipped path.
    mod dd {
        #[derive(Clone, Copy)]
        pub struct Dd {
            pub hi: f64,
            pub lo: f64,
        }

        pub fn from(x: f64) -> Dd {
            Dd { hi: x, lo: 0.0 }
        }

        fn two_sum(a: f64, b: f64) -> Dd {
            let s = a + b;
            let bb = s - a;
            let err = (a - (s - bb)) + (b - bb);
            Dd { hi: s, lo: err }
        }

        fn two_prod(a: f64, b: f64) -> Dd {
            let p = a * b;
            let err = a.mul_add(b, -p);
            Dd { hi: p, lo: err }
        }

        pub fn add(a: Dd, b: Dd) -> Dd {
            let s = two_sum(a.hi, b.hi);
            let lo = s.lo + a.lo + b.lo;
            two_sum(s.hi, lo)
        }

        pub fn mul(a: Dd, b: Dd) -> Dd {
            let p = two_prod(a.hi, b.hi);
            let lo = p.lo + a.hi * b.lo + a.lo * b.hi;
            two_sum(p.hi, lo)
        }

        pub fn div_u64(a: Dd, d: u64) -> Dd {
            let q1 = a.hi / d as f64;
            let r = add(a, mul(from(-q1), from(d as f64)));
            let q2 = (r.hi + r.lo) / d as f64;
            two_sum(q1, q2)
        }
    }

    /// Oracle for `sum_{k>=k0} c(k) x^k / k!` at double-double precision.
    fn dd_series(x: f64, k0: u64, coeff: impl Fn(u64) -> f64, terms: u64) -> f64 {
        use dd::*;
        // term at k0: x^{k0}/k0!
        let mut term = from(1.0);
        for k in 1..=k0 {
            term = div_u64(mul(term, from(x)), k);
        }
        let mut acc = mul(term, from(coeff(k0)));
        for k in (k0 + 1)..(k0 + terms) {
            term = div_u64(mul(term, from(x)), k);
            acc = add(acc, mul(term, from(coeff(k))));
        }
        acc.hi + acc.lo
    }

    #[test]
    fn nonlinearity_examples() {
        let n = |u: f64| nonlinearity(u, NonlinearityVariant::Massless, &POLICY).unwrap();
        assert_eq!(n(0.0), 0.0);
        // e - 2
        let e = std::f64::consts::E;
        assert!((n(1.0) - (e - 2.0)).abs() < 1e-15);
        // small argument against the double-double oracle: N = u * sum_{k>=2} u^{2k}/k!
        let u = 0.01;
        let want = u * dd_series(u * u, 2, |_| 1.0, 40);
        assert!((want - 5.000166670833417e-11).abs() < 1e-24); // frozen
        assert!((n(u) - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn nonlinearity_oracle_sweep() {
        // series and direct paths against the oracle over |u| <= 6
        for i in 0..200 {
            let u = 1e-8 * (6.0f64 / 1e-8).powf(i as f64 / 199.0);
            let want = u * dd_series(u * u, 2, |_| 1.0, 300);
            let got = nonlinearity(u, NonlinearityVariant::Massless, &POLICY).unwrap();
            assert!(
                (got - want).abs() <= 1e-12 * want.abs(),
                "u = {u}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn nonlinearity_variants() {
        let e = std::f64::consts::E;
        let full = nonlinearity(1.0, NonlinearityVariant::FullExponential, &POLICY).unwrap();
        assert!((full - e).abs() < 1e-15);
        let massive = nonlinearity(1.0, NonlinearityVariant::MassiveNoCubic, &POLICY).unwrap();
        assert!((massive - (e - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn nonlinearity_overflow() {
        let r = nonlinearity(27.0, NonlinearityVariant::Massless, &POLICY);
        assert!(matches!(r, Err(crate::error::CritError::Saturation { .. })));
    }

    #[test]
    fn potential_examples() {
        let p = |u: f64| potential_density(u, NonlinearityVariant::Massless, &POLICY).unwrap();
        assert_eq!(p(0.0), 0.0);
        let e = std::f64::consts::E;
        assert!((p(1.0) - (e - 2.5)).abs() < 1e-15);
        // u = 0.1 from the oracle: sum_{k>=3} u^{2k}/k!
        let want = dd_series(0.01, 3, |_| 1.0, 40);
        assert!((want - 1.6708416805754217e-7).abs() < 1e-20); // frozen
        assert!((p(0.1) - want).abs() <= 1e-13 * want);
    }

    #[test]
    fn remainder_examples() {
        assert_eq!(remainder_density(0.0, 0.5, &POLICY).unwrap(), 0.0);
        let k0 = remainder_density(1.0, 0.0, &POLICY).unwrap();
        assert!((k0 - 1.0 / 24.0).abs() < 1e-17);
        // P(1, 1) = 5.5 - 2e, cross-checked against the series oracle
        let want = dd_series(1.0, 4, |k| (k - 3) as f64, 60);
        // the closed form is only as accurate as the f64 constant for e
        assert!((want - (5.5 - 2.0 * std::f64::consts::E)).abs() < 1e-15);
        let got = remainder_density(1.0, 1.0, &POLICY).unwrap();
        assert!((got - want).abs() <= 1e-13 * want);
    }

    #[test]
    fn comparison_residual_examples() {
        assert_eq!(comparison_residual(0.0, 0.0, 0.5, &POLICY).unwrap(), 0.0);
        let opp = comparison_residual(1.0, -1.0, 0.3, &POLICY).unwrap();
        assert!(opp <= 0.0, "opposite signs must give f <= 0, got {opp}");
        // frozen from the extended-precision series oracle
        let want = -10.875831296833161;
        let got = comparison_residual(2.0, 0.1, 0.7, &POLICY).unwrap();
        assert!(
            (got - want).abs() <= 1e-10 * want.abs(),
            "got {got}, want {want}"
        );
    }

    #[test]
    fn pointwise_bound_examples() {
        let b = pointwise_bound(0.0, &POLICY).unwrap();
        assert_eq!((b.lhs, b.rhs), (0.0, 0.0));
        assert!(b.holds);

        let e = std::f64::consts::E;
        let b = pointwise_bound(1.0, &POLICY).unwrap();
        assert!((b.lhs - (e - 2.0)).abs() < 1e-14);
        assert!((b.rhs - (e - 1.0)).abs() < 1e-14);
        assert!(b.holds);

        let b = pointwise_bound(0.5, &POLICY).unwrap();
        assert!((b.lhs - 0.017012708343870742).abs() < 1e-15);
        assert!((b.rhs - e / 32.0).abs() < 1e-15);
        assert!(b.holds);
    }

    #[test]
    fn conformal_force_at_vanishing_weight() {
        // exactly U^5/2 on the series path at Omega = 0
        let u = 1.3;
        let got = conformal_force(u, 0.0, &POLICY).unwrap();
        assert_eq!(got, u * u * u * u * u * 0.5);
        // scaled potential limit U^6/6
        let sp = scaled_potential(u, 0.0, &POLICY).unwrap();
        assert!((sp - u.powi(6) / 6.0).abs() < 1e-16 * u.powi(6));
    }

    #[test]
    fn mass_correction_sign() {
        // small U: the mass correction dominates and the integrand is negative
        let small =
            remainder_integrand(0.3, 0.8, NonlinearityVariant::MassiveNoCubic, &POLICY).unwrap();
        assert!(small < 0.0);
        // large U: P dominates
        let large =
            remainder_integrand(2.0, 0.8, NonlinearityVariant::MassiveNoCubic, &POLICY).unwrap();
        assert!(large > 0.0);
        // massless is P itself
        let p = remainder_integrand(0.3, 0.8, NonlinearityVariant::Massless, &POLICY).unwrap();
        assert!(p >= 0.0);
    }

    proptest! {
        #[test]
        fn oddness_bit_for_bit(u in -6.0f64..6.0) {
            let plus = nonlinearity(u, NonlinearityVariant::Massless, &POLICY).unwrap();
            let minus = nonlinearity(-u, NonlinearityVariant::Massless, &POLICY).unwrap();
            prop_assert_eq!(plus.to_bits(), (-minus).to_bits());
        }

        #[test]
        fn evenness(u in -6.0f64..6.0) {
            let plus = potential_density(u, NonlinearityVariant::Massless, &POLICY).unwrap();
            let minus = potential_density(-u, NonlinearityVariant::Massless, &POLICY).unwrap();
            prop_assert_eq!(plus.to_bits(), minus.to_bits());
            prop_assert!(plus >= 0.0);
        }

        #[test]
        fn remainder_nonnegative(u in -8.0f64..8.0, om in 0.0f64..1.0) {
            prop_assert!(remainder_density(u, om, &POLICY).unwrap() >= 0.0);
        }

        #[test]
        fn pointwise_bound_holds(u in -6.0f64..6.0) {
            let b = pointwise_bound(u, &POLICY).unwrap();
            prop_assert!(b.holds, "bound violated at u = {}: {} > {}", u, b.lhs, b.rhs);
            // intermediate line: |N| <= |u|^3 (e^{u^2} - 1)
            let mid = u.abs().powi(3) * (u * u).exp_m1();
            prop_assert!(b.lhs <= mid * (1.0 + 1e-14));
        }

        #[test]
        fn comparison_symmetry_and_signs(u in -4.0f64..4.0, v in -4.0f64..4.0, om in 0.0f64..1.0) {
            let f = comparison_residual(u, v, om, &POLICY).unwrap();
            let g = comparison_residual(-u, -v, om, &POLICY).unwrap();
            prop_assert_eq!(f.to_bits(), g.to_bits());
            if u * v <= 0.0 {
                prop_assert!(f <= 1e-14 * f.abs().max(1.0), "f must be <= 0 for opposite signs");
            }
        }

        #[test]
        fn comparison_tail_negative(u in 0.01f64..4.0, alpha in 0.001f64..0.2499, om in 0.0f64..1.0) {
            // with Vbar = alpha U, alpha < 1/4, the series past the leading
            // (U^6 - Vbar^6)/4 term is negative
            let v = alpha * u;
            let f = comparison_residual(u, v, om, &POLICY).unwrap();
            let leading = 0.25 * (u.powi(6) - v.powi(6));
            prop_assert!(f - leading <= 1e-12 * leading.abs().max(1.0));
        }

        #[test]
        fn series_direct_consistency(i in 0usize..400) {
            // log-spaced sweep over [1e-8, 6]; compare the shipped evaluation
            // against the direct closed form wherever the latter is evaluable
            let u = 1e-8 * (6.0f64/1e-8).powf(i as f64 / 399.0);
            let got = nonlinearity(u, NonlinearityVariant::Massless, &POLICY).unwrap();
            let direct = u * ((u*u).exp_m1() - u*u);
            if direct != 0.0 && u > 1e-4 {
                // below u ~ 1e-4 the direct expression has no digits left
                let tol = if u > 0.05 { 1e-10 } else { 1e-7 };
                prop_assert!((got - direct).abs() <= tol * direct.abs().max(1e-300));
            }
        }
    }
}
