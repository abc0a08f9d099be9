//! Spatially homogeneous reduction of the network model, integrated with
//! classic RK4.
//!
//! With uniform initial densities, constant departure and reception kernels
//! and no drift, every cell of a zone follows the same ODE: diffusion and
//! advection vanish and the migration and control terms reduce to scalars.
//! This module evaluates that ODE from the configuration alone, sharing only
//! the pointwise kinetics and the control ramp with the PDE solver.

use std::path::Path;

use crate::control::ArrivalIntegrand;
use crate::control::ControlParams;
use crate::error::{Error, Result};
use crate::io::config::{InitialProfile, KernelShape, SimulationConfig};
use crate::io::csv::format_table;
use crate::kinetics::{exchange_rate, ZoneKineticsParams};
use crate::observables::ObservableRecord;

/// Relative deviation the PDE may show against the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-4;

/// Masses below this are compared in absolute rather than relative terms.
pub const DEVIATION_FLOOR: f64 = 1e-6;

/// The oracle integrates with this fraction of the PDE step.
pub const STEP_RATIO: f64 = 100.0;

pub const ORACLE_CSV_HEADER: &str = "t,P1,N1,P2,N2";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousState {
    pub p1: f64,
    pub n1: f64,
    pub p2: f64,
    pub n2: f64,
    pub t: f64,
}

impl HomogeneousState {
    pub fn as_array(&self) -> [f64; 4] {
        [self.p1, self.n1, self.p2, self.n2]
    }

    fn from_array(t: f64, [p1, n1, p2, n2]: [f64; 4]) -> Self {
        HomogeneousState { p1, n1, p2, n2, t }
    }
}

/// Scalars of the homogeneous system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    pub kinetics: [ZoneKineticsParams; 2],
    pub areas: [f64; 2],
    /// Constant departure probability of each source zone.
    pub departure: [f64; 2],
    /// Migration proportions `[m_12, m_21]`, zero for inactive directions.
    pub proportion: [f64; 2],
    pub controls: ControlParams,
}

impl OracleParams {
    /// Extracts the homogeneous parameters, refusing configurations whose
    /// solution is not spatially uniform. The error names the offending key.
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.coupling.kernels != KernelShape::Uniform {
            return Err(Error::param(
                "coupling.kernels",
                "the oracle needs `uniform` kernels; localized kernels break spatial uniformity",
            ));
        }
        for (zone, z) in [("zone1", &cfg.zone1), ("zone2", &cfg.zone2)] {
            for (key, v) in [("v_P_max", z.v_p_max), ("v_N_max", z.v_n_max)] {
                if v != 0.0 {
                    return Err(Error::param(
                        format!("{zone}.{key}"),
                        format!("the oracle needs no drift, got {v}"),
                    ));
                }
            }
            if z.initial != InitialProfile::Uniform {
                return Err(Error::param(
                    format!("{zone}.initial"),
                    "the oracle needs `uniform` initial data",
                ));
            }
        }
        let dir = cfg.coupling.direction;
        let kin = |z: &crate::io::config::ZoneConfig| {
            ZoneKineticsParams::new(z.a, z.b, z.alpha_p, z.alpha_n, z.eps_guard)
        };
        Ok(OracleParams {
            kinetics: [kin(&cfg.zone1)?, kin(&cfg.zone2)?],
            areas: [
                cfg.zone1.size.0 * cfg.zone1.size.1,
                cfg.zone2.size.0 * cfg.zone2.size.1,
            ],
            departure: [cfg.coupling.uniform_departure; 2],
            proportion: [
                if dir.forward() { cfg.coupling.m_1to2 } else { 0.0 },
                if dir.reverse() { cfg.coupling.m_2to1 } else { 0.0 },
            ],
            controls: cfg.control,
        })
    }
}

/// Initial densities: each zone's mass spread evenly, split by the stressed
/// fraction.
pub fn initial_state(cfg: &SimulationConfig) -> HomogeneousState {
    let dens = |z: &crate::io::config::ZoneConfig| {
        let rho = z.mass / (z.size.0 * z.size.1);
        (rho * z.stressed_fraction, rho * (1.0 - z.stressed_fraction))
    };
    let (p1, n1) = dens(&cfg.zone1);
    let (p2, n2) = dens(&cfg.zone2);
    HomogeneousState {
        p1,
        n1,
        p2,
        n2,
        t: 0.0,
    }
}

/// Time derivative of the homogeneous densities.
///
/// A channel from zone `s` to zone `d` removes `m p u_s` from every cell of
/// `s`; the departing total `m p u_s |s|` is spread evenly over `d`.
pub fn ode_rhs(s: &HomogeneousState, params: &OracleParams) -> [f64; 4] {
    let [p1, n1, p2, n2] = s.as_array();
    let [k1, k2] = &params.kinetics;
    let [a1, a2] = params.areas;
    let [q12, q21] = params.departure;
    let [m12, m21] = params.proportion;

    let r1 = exchange_rate(p1, n1, k1);
    let r2 = exchange_rate(p2, n2, k2);
    let mut d = [r1, -r1, r2, -r2];

    // zone 1 -> zone 2
    let (out_p, out_n) = (m12 * q12 * p1, m12 * q12 * n1);
    d[0] -= out_p;
    d[1] -= out_n;
    d[2] += out_p * a1 / a2;
    d[3] += out_n * a1 / a2;
    // zone 2 -> zone 1
    let (back_p, back_n) = (m21 * q21 * p2, m21 * q21 * n2);
    d[2] -= back_p;
    d[3] -= back_n;
    d[0] += back_p * a2 / a1;
    d[1] += back_n * a2 / a1;

    let c = &params.controls;
    let u1 = c.departure_intensity(s.t) * q12 * p1;
    d[0] -= u1;
    d[1] += u1;
    let k2 = c.arrival_intensity(s.t);
    if k2 != 0.0 {
        // reception density is 1/|zone 2|
        let integral = match c.arrival_integrand {
            ArrivalIntegrand::Inflow => q12 * p1 * a1,
            ArrivalIntegrand::Local => p2,
        };
        let u2 = k2 * m12 * integral / a2;
        d[2] -= u2;
        d[3] += u2;
    }
    d
}

fn rk4_step(s: &HomogeneousState, dt: f64, params: &OracleParams) -> HomogeneousState {
    let y = s.as_array();
    let at = |t: f64, y: [f64; 4]| ode_rhs(&HomogeneousState::from_array(t, y), params);
    let shift = |k: &[f64; 4], h: f64| std::array::from_fn::<f64, 4, _>(|i| y[i] + h * k[i]);
    let k1 = at(s.t, y);
    let k2 = at(s.t + 0.5 * dt, shift(&k1, 0.5 * dt));
    let k3 = at(s.t + 0.5 * dt, shift(&k2, 0.5 * dt));
    let k4 = at(s.t + dt, shift(&k3, dt));
    let next = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    HomogeneousState::from_array(s.t + dt, next)
}

/// Classic RK4 from `s0` to `t_end`, emitting a state every
/// `record_interval` (and at `t_end`). Steps are shortened evenly inside
/// each interval so the output times are hit exactly.
pub fn integrate_rk4(
    s0: HomogeneousState,
    dt: f64,
    t_end: f64,
    record_interval: f64,
    params: &OracleParams,
) -> Result<Vec<HomogeneousState>> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be > 0, got {dt}")));
    }
    if !(record_interval > 0.0) {
        return Err(Error::param("record_interval", "must be > 0"));
    }
    let mut out = vec![s0];
    let mut s = s0;
    let mut k = 1usize;
    while s.t < t_end {
        let target = (k as f64 * record_interval).min(t_end);
        let span = target - s.t;
        let n = (span / dt).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for _ in 0..n {
            s = rk4_step(&s, h, params);
        }
        s.t = target;
        out.push(s);
        k += 1;
    }
    Ok(out)
}

/// One explicit Heun step of the homogeneous system; the PDE takes exactly
/// this step in every cell of a uniform state.
pub fn heun_step(s: &HomogeneousState, dt: f64, params: &OracleParams) -> HomogeneousState {
    let y = s.as_array();
    let k1 = ode_rhs(s, params);
    let stage = HomogeneousState::from_array(s.t + dt, std::array::from_fn(|i| y[i] + dt * k1[i]));
    let k2 = ode_rhs(&stage, params);
    let st = stage.as_array();
    HomogeneousState::from_array(
        s.t + dt,
        std::array::from_fn(|i| 0.5 * (y[i] + st[i] + dt * k2[i])),
    )
}

/// Area-weighted total population.
pub fn total_mass(s: &HomogeneousState, params: &OracleParams) -> f64 {
    params.areas[0] * (s.p1 + s.n1) + params.areas[1] * (s.p2 + s.n2)
}

pub fn trajectory_to_csv(traj: &[HomogeneousState]) -> String {
    format_table(
        ORACLE_CSV_HEADER,
        traj.iter().map(|s| vec![s.t, s.p1, s.n1, s.p2, s.n2]),
    )
}

pub fn write_trajectory(path: &Path, traj: &[HomogeneousState]) -> Result<()> {
    std::fs::write(path, trajectory_to_csv(traj)).map_err(|e| Error::io(path, e))
}

/// Largest deviation between PDE masses and area-weighted oracle densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub max_relative: f64,
    pub t: f64,
    /// Which mass: `M_P1`, `M_N1`, `M_P2` or `M_N2`.
    pub quantity: &'static str,
}

impl Deviation {
    pub fn passes(&self) -> bool {
        self.max_relative <= ORACLE_TOLERANCE
    }
}

/// Compares records with oracle states at matching times. Each mass is
/// measured relative to the oracle value, or to [`DEVIATION_FLOOR`] if the
/// oracle value is smaller.
pub fn compare(
    records: &[ObservableRecord],
    traj: &[HomogeneousState],
    params: &OracleParams,
) -> Result<Deviation> {
    if records.len() != traj.len() {
        return Err(Error::Parse(format!(
            "{} PDE records vs {} oracle states",
            records.len(),
            traj.len()
        )));
    }
    let mut worst = Deviation {
        max_relative: 0.0,
        t: 0.0,
        quantity: "M_P1",
    };
    let [a1, a2] = params.areas;
    for (r, s) in records.iter().zip(traj) {
        if (r.t - s.t).abs() > 1e-9 * r.t.max(1.0) {
            return Err(Error::Parse(format!(
                "time mismatch: PDE t={} vs oracle t={}",
                r.t, s.t
            )));
        }
        for (q, pde, ode) in [
            ("M_P1", r.m_p1, a1 * s.p1),
            ("M_N1", r.m_n1, a1 * s.n1),
            ("M_P2", r.m_p2, a2 * s.p2),
            ("M_N2", r.m_n2, a2 * s.n2),
        ] {
            let rel = (pde - ode).abs() / ode.abs().max(DEVIATION_FLOOR);
            if rel > worst.max_relative || rel.is_nan() {
                worst = Deviation {
                    max_relative: rel,
                    t: r.t,
                    quantity: q,
                };
            }
        }
    }
    Ok(worst)
}

/// Result of [`check`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub deviation: Deviation,
    pub records: Vec<ObservableRecord>,
    pub trajectory: Vec<HomogeneousState>,
    pub pde_dt: f64,
    pub oracle_dt: f64,
}

/// Runs the PDE solver and the oracle on `cfg` and compares them.
pub fn check(cfg: &SimulationConfig) -> Result<OracleReport> {
    let params = OracleParams::from_config(cfg)?;
    let model = crate::stepper::Model::from_config(cfg)?;
    let initial = model.initial_state(cfg)?;
    let pde_dt = model.compute_dt(&initial);
    let schedule = crate::stepper::RunSchedule {
        t_end: cfg.numerics.t_end,
        record_interval: cfg.output.record_interval,
        snapshot_times: Vec::new(),
    };
    let records = crate::stepper::run(&model, initial, &schedule)?.records;
    let oracle_dt = pde_dt / STEP_RATIO;
    let trajectory = integrate_rk4(
        initial_state(cfg),
        oracle_dt,
        cfg.numerics.t_end,
        cfg.output.record_interval,
        &params,
    )?;
    let deviation = compare(&records, &trajectory, &params)?;
    Ok(OracleReport {
        deviation,
        records,
        trajectory,
        pde_dt,
        oracle_dt,
    })
}

/// The default configuration made admissible: uniform kernels and data, no
/// drift, everything else unchanged apart from 16x16 grids. A uniform state
/// stays uniform on any mesh, and the coarse grid relaxes the diffusive step
/// limit so the check runs in seconds.
pub fn uniform_config() -> SimulationConfig {
    let mut cfg = SimulationConfig::default();
    cfg.coupling.kernels = KernelShape::Uniform;
    for z in [&mut cfg.zone1, &mut cfg.zone2] {
        z.nx = 16;
        z.ny = 16;
        z.v_p_max = 0.0;
        z.v_n_max = 0.0;
        z.initial = InitialProfile::Uniform;
    }
    cfg
}
