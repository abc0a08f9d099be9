//! Local control terms that convert stressed people into non-stressed ones,
//! switched on with a cosine ramp.
//!
//! * departure control (zone 1): `u1 = K1(t) p(x) u_P1(x)`
//! * arrival control (zone 2): `u2 = K2(t) eps(y) m I`, where `I` is by
//!   default the stressed flux leaving zone 1 (see [`ArrivalIntegrand`]).
//!
//! Each control is subtracted from the stressed equation and added to the
//! non-stressed one of its own zone, so zone mass is unchanged.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{dot_in_order, Field};
use crate::migration::MigrationKernel;
use crate::stepper::NetworkState;

/// Cosine ease-in: 0 before `t0`, `1/2 - cos(pi (t - t0) / (t1 - t0)) / 2`
/// on `[t0, t1]`, 1 afterwards.
pub fn ramp(t: f64, t0: f64, t1: f64) -> Result<f64> {
    if !(t0 < t1) {
        return Err(Error::param(
            "T0",
            format!("activation time {t0} must precede {t1}"),
        ));
    }
    Ok(ramp_unchecked(t, t0, t1))
}

#[inline]
fn ramp_unchecked(t: f64, t0: f64, t1: f64) -> f64 {
    if t < t0 {
        0.0
    } else if t <= t1 {
        0.5 - 0.5 * (std::f64::consts::PI * (t - t0) / (t1 - t0)).cos()
    } else {
        1.0
    }
}

/// Gain `K` together with its activation window `[T0, T1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSchedule {
    gain: f64,
    t_start: f64,
    t_full: f64,
}

impl ControlSchedule {
    pub fn new(gain: f64, t_start: f64, t_full: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gain) {
            return Err(Error::param(
                "K",
                format!("control rate must lie in [0, 1], got {gain}"),
            ));
        }
        if !(t_start >= 0.0 && t_start < t_full && t_full.is_finite()) {
            return Err(Error::param(
                "T0",
                format!("need 0 <= T0 < T1, got T0={t_start}, T1={t_full}"),
            ));
        }
        Ok(ControlSchedule {
            gain,
            t_start,
            t_full,
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.t_full)
    }

    /// `K(t) = K zeta(t, T0, T1)`.
    #[inline]
    pub fn intensity(&self, t: f64) -> f64 {
        self.gain * ramp_unchecked(t, self.t_start, self.t_full)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    Off,
    Departure,
    Arrival,
    Both,
}

impl ControlMode {
    pub fn departure_active(self) -> bool {
        matches!(self, ControlMode::Departure | ControlMode::Both)
    }

    pub fn arrival_active(self) -> bool {
        matches!(self, ControlMode::Arrival | ControlMode::Both)
    }
}

impl fmt::Display for ControlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlMode::Off => "off",
            ControlMode::Departure => "departure",
            ControlMode::Arrival => "arrival",
            ControlMode::Both => "both",
        })
    }
}

impl FromStr for ControlMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "off" => Ok(ControlMode::Off),
            "departure" => Ok(ControlMode::Departure),
            "arrival" => Ok(ControlMode::Arrival),
            "both" => Ok(ControlMode::Both),
            _ => Err(format!("expected off|departure|arrival|both, got `{s}`")),
        }
    }
}

/// What the arrival control integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalIntegrand {
    /// `integral over zone 1 of p u_P1`: the stressed inflow, calmed on arrival.
    Inflow,
    /// `integral over zone 2 of eps u_P2`. Not positivity preserving; meant
    /// for sensitivity checks only.
    Local,
}

impl fmt::Display for ArrivalIntegrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArrivalIntegrand::Inflow => "inflow",
            ArrivalIntegrand::Local => "local",
        })
    }
}

impl FromStr for ArrivalIntegrand {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "inflow" => Ok(ArrivalIntegrand::Inflow),
            "local" => Ok(ArrivalIntegrand::Local),
            _ => Err(format!("expected inflow|local, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub mode: ControlMode,
    pub departure: ControlSchedule,
    pub arrival: ControlSchedule,
    pub arrival_integrand: ArrivalIntegrand,
}

impl ControlParams {
    pub fn off() -> Self {
        ControlParams {
            mode: ControlMode::Off,
            ..ControlParams::default()
        }
    }

    /// Active departure intensity at `t` (zero when the mode excludes it).
    #[inline]
    pub fn departure_intensity(&self, t: f64) -> f64 {
        if self.mode.departure_active() {
            self.departure.intensity(t)
        } else {
            0.0
        }
    }

    #[inline]
    pub fn arrival_intensity(&self, t: f64) -> f64 {
        if self.mode.arrival_active() {
            self.arrival.intensity(t)
        } else {
            0.0
        }
    }

    /// Largest gain that can act on a zone, for step-size bounds.
    pub fn max_gain(&self) -> f64 {
        let d = if self.mode.departure_active() {
            self.departure.gain
        } else {
            0.0
        };
        let a = if self.mode.arrival_active() {
            self.arrival.gain
        } else {
            0.0
        };
        d.max(a)
    }
}

impl Default for ControlParams {
    /// Departure window `[5, 20]`, arrival window `[10, 20]`, both gains 1,
    /// mode off.
    fn default() -> Self {
        ControlParams {
            mode: ControlMode::Off,
            departure: ControlSchedule {
                gain: 1.0,
                t_start: 5.0,
                t_full: 20.0,
            },
            arrival: ControlSchedule {
                gain: 1.0,
                t_start: 10.0,
                t_full: 20.0,
            },
            arrival_integrand: ArrivalIntegrand::Inflow,
        }
    }
}

/// Control contributions `[dP1, dN1, dP2, dN2]` at time `t`.
///
/// `channel` is the zone-1 to zone-2 migration channel supplying the
/// departure kernel, reception kernel and proportion.
pub fn control_rhs(
    t: f64,
    state: &NetworkState,
    controls: &ControlParams,
    channel: &MigrationKernel,
) -> Result<[Field; 4]> {
    if !state.zone1().stressed.grid().same_as(channel.source())
        || !state.zone2().stressed.grid().same_as(channel.destination())
    {
        return Err(Error::GridMismatch("state vs migration channel".into()));
    }
    let g1 = *state.zone1().stressed.grid();
    let g2 = *state.zone2().stressed.grid();
    let mut out = [
        Field::zeros(g1),
        Field::zeros(g1),
        Field::zeros(g2),
        Field::zeros(g2),
    ];
    let [p1, n1, p2, n2] = &mut out;
    add_controls(
        t,
        state.zone1().stressed.values(),
        state.zone2().stressed.values(),
        controls,
        channel,
        [p1.values_mut(), n1.values_mut(), p2.values_mut(), n2.values_mut()],
    );
    Ok(out)
}

pub(crate) fn add_controls(
    t: f64,
    stressed1: &[f64],
    stressed2: &[f64],
    controls: &ControlParams,
    channel: &MigrationKernel,
    out: [&mut [f64]; 4],
) {
    let [dp1, dn1, dp2, dn2] = out;
    let k1 = controls.departure_intensity(t);
    if k1 != 0.0 {
        let p = channel.departure().values();
        for k in 0..stressed1.len() {
            let u = k1 * p[k] * stressed1[k];
            dp1[k] -= u;
            dn1[k] += u;
        }
    }
    let k2 = controls.arrival_intensity(t);
    if k2 != 0.0 {
        let eps = channel.reception().values();
        let integral = match controls.arrival_integrand {
            ArrivalIntegrand::Inflow => channel.departing_integral(stressed1),
            ArrivalIntegrand::Local => channel.destination().cell_area() * dot_in_order(eps, stressed2),
        };
        let rate = k2 * channel.proportion() * integral;
        if rate != 0.0 {
            for k in 0..eps.len() {
                let u = eps[k] * rate;
                dp2[k] -= u;
                dn2[k] += u;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, Grid, ZoneId};
    use crate::migration::{gaussian_kernel, normalize_reception};
    use crate::stepper::ZoneState;

    #[test]
    fn ramp_anchor_values() {
        assert_eq!(ramp(5.0, 5.0, 20.0).unwrap(), 0.0);
        assert!((ramp(12.5, 5.0, 20.0).unwrap() - 0.5).abs() <= 1e-15);
        assert_eq!(ramp(20.0, 5.0, 20.0).unwrap(), 1.0);
        assert_eq!(ramp(300.0, 5.0, 20.0).unwrap(), 1.0);
        assert_eq!(ramp(1.0, 5.0, 20.0).unwrap(), 0.0);
        assert!(ramp(1.0, 20.0, 20.0).is_err());
    }

    #[test]
    fn ramp_is_monotone_and_bounded() {
        let mut prev = 0.0;
        for k in 0..=400 {
            let z = ramp(k as f64 * 0.1, 10.0, 20.0).unwrap();
            assert!((0.0..=1.0).contains(&z));
            assert!(z >= prev);
            prev = z;
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(ControlSchedule::new(1.5, 0.0, 1.0).is_err());
        assert!(ControlSchedule::new(0.5, 2.0, 1.0).is_err());
        assert!(ControlSchedule::new(0.5, -1.0, 1.0).is_err());
    }

    fn setup() -> (NetworkState, MigrationKernel) {
        let g1 = Grid::unit_square(16, ZoneId::One).unwrap();
        let g2 = Grid::unit_square(12, ZoneId::Two).unwrap();
        let p = gaussian_kernel(&g1, (0.8, 0.5), 0.15).unwrap();
        let eps = normalize_reception(&gaussian_kernel(&g2, (0.2, 0.5), 0.15).unwrap()).unwrap();
        let channel = MigrationKernel::new(p, eps, 0.2).unwrap();
        let z1 = ZoneState {
            stressed: g1.sample(|x, y| 0.3 + 0.2 * x * y),
            unstressed: g1.sample(|x, _| 0.1 * x),
        };
        let z2 = ZoneState {
            stressed: g2.sample(|_, y| 0.05 * y),
            unstressed: Field::constant(g2, 0.4),
        };
        (NetworkState::new(30.0, z1, z2).unwrap(), channel)
    }

    #[test]
    fn off_and_before_activation_give_zero() {
        let (state, channel) = setup();
        let all_zero = |out: &[Field; 4]| out.iter().all(|f| f.values().iter().all(|&v| v == 0.0));
        let mut c = ControlParams::default();
        c.mode = ControlMode::Off;
        assert!(all_zero(&control_rhs(30.0, &state, &c, &channel).unwrap()));
        c.mode = ControlMode::Both;
        assert!(all_zero(&control_rhs(2.0, &state, &c, &channel).unwrap()));
        c.departure = ControlSchedule::new(0.0, 5.0, 20.0).unwrap();
        c.arrival = ControlSchedule::new(0.0, 10.0, 20.0).unwrap();
        assert!(all_zero(&control_rhs(30.0, &state, &c, &channel).unwrap()));
    }

    #[test]
    fn departure_control_at_full_strength() {
        let (state, channel) = setup();
        let mut c = ControlParams::default();
        c.mode = ControlMode::Departure;
        let [dp1, dn1, dp2, dn2] = control_rhs(25.0, &state, &c, &channel).unwrap();
        for k in 0..dp1.values().len() {
            let expect = -channel.departure().values()[k] * state.zone1().stressed.values()[k];
            assert_eq!(dp1.values()[k], expect);
            assert_eq!(dn1.values()[k], -expect);
        }
        assert!(dp2.values().iter().chain(dn2.values()).all(|&v| v == 0.0));
    }

    #[test]
    fn arrival_control_cancels_stressed_inflow() {
        let (state, channel) = setup();
        let mut c = ControlParams::default();
        c.mode = ControlMode::Arrival;
        let [dp1, _, dp2, dn2] = control_rhs(25.0, &state, &c, &channel).unwrap();
        assert!(dp1.values().iter().all(|&v| v == 0.0));
        let inflow = channel.proportion() * channel.departing_integral(state.zone1().stressed.values());
        assert!((integrate(&dp2) + inflow).abs() < 1e-14);
        for (a, b) in dp2.values().iter().zip(dn2.values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn controls_conserve_zone_mass() {
        let (state, channel) = setup();
        for integrand in [ArrivalIntegrand::Inflow, ArrivalIntegrand::Local] {
            let c = ControlParams {
                mode: ControlMode::Both,
                arrival_integrand: integrand,
                ..ControlParams::default()
            };
            let [dp1, dn1, dp2, dn2] = control_rhs(15.0, &state, &c, &channel).unwrap();
            assert!((integrate(&dp1) + integrate(&dn1)).abs() < 1e-15);
            assert!((integrate(&dp2) + integrate(&dn2)).abs() < 1e-15);
            assert!(integrate(&dp1) < 0.0 && integrate(&dp2) < 0.0);
        }
    }
}
