//! Local behavioural exchange between stressed (`P`) and non-stressed (`N`)
//! densities: intrinsic transitions plus dominant-behaviour imitation.

use crate::error::{Error, Result};
use crate::grid::Field;

/// Default guard added to denominators of the density ratios.
pub const DEFAULT_EPS_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneKineticsParams {
    /// Rate of spontaneous N -> P transition.
    pub a: f64,
    /// Rate of spontaneous P -> N transition.
    pub b: f64,
    pub alpha_p: f64,
    pub alpha_n: f64,
    pub eps_guard: f64,
}

impl ZoneKineticsParams {
    pub fn new(a: f64, b: f64, alpha_p: f64, alpha_n: f64, eps_guard: f64) -> Result<Self> {
        let p = ZoneKineticsParams {
            a,
            b,
            alpha_p,
            alpha_n,
            eps_guard,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("alpha_P", self.alpha_p),
            ("alpha_N", self.alpha_n),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.eps_guard > 0.0 && self.eps_guard < 1.0) {
            return Err(Error::param(
                "eps_guard",
                format!("must lie in (0, 1), got {}", self.eps_guard),
            ));
        }
        Ok(())
    }

    /// Upper bound on the linearized local exchange rate.
    pub fn rate_bound(&self) -> f64 {
        self.a + self.b + self.alpha_p + self.alpha_n
    }
}

/// `xi(s) = s^2 / (1 + s^2)`.
#[inline]
pub fn xi(s: f64) -> f64 {
    let s2 = s * s;
    s2 / (1.0 + s2)
}

/// `xi(num / den)` written as `num^2 / (num^2 + den^2)`; one division, no
/// overflow of the squared ratio when `den` is tiny.
#[inline(always)]
fn xi_ratio(num: f64, den: f64) -> f64 {
    let n2 = num * num;
    let s = n2 + den * den;
    if s == 0.0 {
        0.0
    } else {
        n2 / s
    }
}

/// Imitation coefficient
/// `f = alpha_P xi(uP / (uN + eps)) - alpha_N xi(uN / (uP + eps))`.
///
/// Bounded by `[-alpha_N, alpha_P]`.
#[inline]
pub fn imitation_coefficient(u_p: f64, u_n: f64, p: &ZoneKineticsParams) -> f64 {
    p.alpha_p * xi_ratio(u_p, u_n + p.eps_guard) - p.alpha_n * xi_ratio(u_n, u_p + p.eps_guard)
}

/// Pointwise `a uN - b uP + f(uP, uN) uN uP`, the net N -> P exchange rate.
#[inline]
pub fn exchange_rate(u_p: f64, u_n: f64, p: &ZoneKineticsParams) -> f64 {
    p.a * u_n - p.b * u_p + imitation_coefficient(u_p, u_n, p) * u_n * u_p
}

/// Reaction contributions to `(dP/dt, dN/dt)`; the second is the exact
/// negation of the first.
pub fn reaction_rhs(u_p: &Field, u_n: &Field, p: &ZoneKineticsParams) -> Result<(Field, Field)> {
    u_p.ensure_same_grid(u_n, "reaction_rhs")?;
    let mut dp = Field::zeros(*u_p.grid());
    let mut dn = Field::zeros(*u_p.grid());
    add_reaction(u_p.values(), u_n.values(), p, dp.values_mut(), dn.values_mut());
    Ok((dp, dn))
}

pub(crate) fn add_reaction(u_p: &[f64], u_n: &[f64], p: &ZoneKineticsParams, dp: &mut [f64], dn: &mut [f64]) {
    for k in 0..u_p.len() {
        let r = exchange_rate(u_p[k], u_n[k], p);
        dp[k] += r;
        dn[k] -= r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, ZoneId};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn zone1() -> ZoneKineticsParams {
        ZoneKineticsParams::new(0.01, 0.005, 0.7, 0.4, DEFAULT_EPS_GUARD).unwrap()
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi(0.0), 0.0);
        assert_eq!(xi(1.0), 0.5);
        assert_eq!(xi(3.0), 0.9);
    }

    #[test]
    fn imitation_symmetric_case_vanishes() {
        let p = ZoneKineticsParams::new(0.0, 0.0, 0.6, 0.6, 1e-6).unwrap();
        assert_eq!(imitation_coefficient(0.25, 0.25, &p), 0.0);
    }

    #[test]
    fn imitation_without_stress() {
        let p = zone1();
        let f = imitation_coefficient(0.0, 0.3, &p);
        assert_relative_eq!(f, -0.4 * xi(0.3 / 1e-6), max_relative = 1e-15);
        assert_relative_eq!(f, -0.4, max_relative = 1e-9);
    }

    #[test]
    fn imitation_zone1_reference_value() {
        // 0.7 * xi(3) - 0.4 * xi(1/3) = 0.63 - 0.04; the guard shifts it by ~1e-6.
        let f = imitation_coefficient(0.3, 0.1, &zone1());
        assert!((f - 0.59).abs() < 1e-5, "{f}");
        // direct scalar evaluation, frozen
        assert_relative_eq!(f, 0.589_998_979_995_18, max_relative = 1e-12);
    }

    #[test]
    fn reaction_vanishes_at_zero() {
        let g = Grid::unit_square(4, ZoneId::One).unwrap();
        let z = Field::zeros(g);
        let (dp, dn) = reaction_rhs(&z, &z, &zone1()).unwrap();
        assert!(dp.values().iter().chain(dn.values()).all(|&v| v == 0.0));
    }

    #[test]
    fn reaction_uniform_reference() {
        // a uN - b uP + f uN uP at (0.2, 0.3), frozen from a scalar evaluation.
        let g = Grid::unit_square(4, ZoneId::One).unwrap();
        let (dp, dn) = reaction_rhs(&Field::constant(g, 0.2), &Field::constant(g, 0.3), &zone1()).unwrap();
        for (&p, &n) in dp.values().iter().zip(dn.values()) {
            assert_relative_eq!(p, -0.001_692_316_212_871_369, max_relative = 1e-12);
            assert_eq!(n, -p);
        }
    }

    #[test]
    fn reaction_rejects_grid_mismatch() {
        let a = Field::zeros(Grid::unit_square(4, ZoneId::One).unwrap());
        let b = Field::zeros(Grid::unit_square(5, ZoneId::One).unwrap());
        assert!(reaction_rhs(&a, &b, &zone1()).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ZoneKineticsParams::new(-0.1, 0.0, 0.0, 0.0, 1e-6).is_err());
        assert!(ZoneKineticsParams::new(0.0, 0.0, 0.0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn imitation_is_bounded(up in 0.0f64..10.0, un in 0.0f64..10.0,
                                ap in 0.0f64..2.0, an in 0.0f64..2.0) {
            let p = ZoneKineticsParams::new(0.0, 0.0, ap, an, 1e-6).unwrap();
            let f = imitation_coefficient(up, un, &p);
            prop_assert!(f >= -an - 1e-15 && f <= ap + 1e-15);
        }

        #[test]
        fn exchange_is_quasi_positive(u in 0.0f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0,
                                      ap in 0.0f64..2.0, an in 0.0f64..2.0) {
            let p = ZoneKineticsParams::new(a, b, ap, an, 1e-6).unwrap();
            // no stressed mass: P can only gain
            prop_assert!(exchange_rate(0.0, u, &p) >= 0.0);
            // no calm mass: N can only gain
            prop_assert!(-exchange_rate(u, 0.0, &p) >= 0.0);
        }

        #[test]
        fn xi_monotone(s in 0.0f64..100.0, ds in 0.0f64..10.0) {
            prop_assert!(xi(s + ds) >= xi(s));
            prop_assert!(xi(s) < 1.0 || s > 1e8);
        }
    }
}
