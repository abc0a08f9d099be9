//! Sectioned key-value configuration.
//!
//! ```text
//! # comment
//! [zone1]
//! d_P = 0.2
//! target = (0.8, 0.5)
//! clusters = (0.25, 0.3, 0.15, 1); (0.3, 0.75, 0.15, 1)
//! ```
//!
//! Every key is optional; missing keys take the defaults of
//! [`SimulationConfig::default`]. Unknown sections or keys, duplicate keys and
//! malformed values are errors carrying a line number.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::control::{ArrivalIntegrand, ControlParams, ControlSchedule};
use crate::error::ConfigError;
use crate::kinetics::DEFAULT_EPS_GUARD;

/// One Gaussian bump of initial density, weighted relative to its siblings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub center: (f64, f64),
    pub radius: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Clusters(Vec<Cluster>),
    Uniform,
    /// `1 + cos(pi (x - x0) / Lx) / 2`: the slowest decaying Neumann mode on
    /// top of a constant, used for diffusion convergence studies.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneConfig {
    pub nx: usize,
    pub ny: usize,
    pub origin: (f64, f64),
    pub size: (f64, f64),
    pub d_p: f64,
    pub d_n: f64,
    pub v_p_max: f64,
    pub v_n_max: f64,
    pub a: f64,
    pub b: f64,
    pub alpha_p: f64,
    pub alpha_n: f64,
    pub eps_guard: f64,
    /// Point the desired-direction field aims at.
    pub target: (f64, f64),
    pub initial: InitialProfile,
    /// Share of the zone's initial mass that is stressed.
    pub stressed_fraction: f64,
    /// Share of the network's unit mass placed in this zone initially.
    pub mass: f64,
}

impl ZoneConfig {
    /// Zone 1 with the low-risk-culture rates: everybody stressed at first,
    /// drifting toward a departure area on the east side.
    pub fn default_zone1() -> Self {
        ZoneConfig {
            nx: 64,
            ny: 64,
            origin: (0.0, 0.0),
            size: (1.0, 1.0),
            d_p: 0.2,
            d_n: 0.1,
            v_p_max: 0.025,
            v_n_max: 0.015,
            a: 0.01,
            b: 0.005,
            alpha_p: 0.7,
            alpha_n: 0.4,
            eps_guard: DEFAULT_EPS_GUARD,
            target: (0.8, 0.5),
            initial: InitialProfile::Clusters(vec![
                Cluster {
                    center: (0.25, 0.25),
                    radius: 0.15,
                    weight: 1.0,
                },
                Cluster {
                    center: (0.3, 0.75),
                    radius: 0.15,
                    weight: 1.0,
                },
                Cluster {
                    center: (0.55, 0.45),
                    radius: 0.15,
                    weight: 1.0,
                },
            ]),
            stressed_fraction: 1.0,
            mass: 0.5,
        }
    }

    /// Zone 2: no advection, everybody calm at first.
    pub fn default_zone2() -> Self {
        ZoneConfig {
            d_p: 0.15,
            d_n: 0.05,
            v_p_max: 0.0,
            v_n_max: 0.0,
            a: 0.005,
            b: 0.0005,
            alpha_p: 0.5,
            alpha_n: 0.4,
            target: (0.5, 0.5),
            initial: InitialProfile::Clusters(vec![
                Cluster {
                    center: (0.35, 0.25),
                    radius: 0.15,
                    weight: 1.0,
                },
                Cluster {
                    center: (0.7, 0.75),
                    radius: 0.15,
                    weight: 1.0,
                },
                Cluster {
                    center: (0.75, 0.3),
                    radius: 0.15,
                    weight: 1.0,
                },
            ]),
            stressed_fraction: 0.0,
            ..ZoneConfig::default_zone1()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MigrationDirection {
    OneToTwo,
    TwoToOne,
    Both,
}

impl MigrationDirection {
    pub fn forward(self) -> bool {
        matches!(self, MigrationDirection::OneToTwo | MigrationDirection::Both)
    }

    pub fn reverse(self) -> bool {
        matches!(self, MigrationDirection::TwoToOne | MigrationDirection::Both)
    }
}

impl std::fmt::Display for MigrationDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MigrationDirection::OneToTwo => "1to2",
            MigrationDirection::TwoToOne => "2to1",
            MigrationDirection::Both => "both",
        })
    }
}

impl FromStr for MigrationDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1to2" => Ok(MigrationDirection::OneToTwo),
            "2to1" => Ok(MigrationDirection::TwoToOne),
            "both" => Ok(MigrationDirection::Both),
            _ => Err(format!("expected 1to2|2to1|both, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelShape {
    Gaussian,
    /// Constant departure probability and constant (normalized) reception.
    Uniform,
}

impl std::fmt::Display for KernelShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelShape::Gaussian => "gaussian",
            KernelShape::Uniform => "uniform",
        })
    }
}

impl FromStr for KernelShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(KernelShape::Gaussian),
            "uniform" => Ok(KernelShape::Uniform),
            _ => Err(format!("expected gaussian|uniform, got `{s}`")),
        }
    }
}

/// A Gaussian area: center and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Area {
    pub center: (f64, f64),
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub direction: MigrationDirection,
    pub kernels: KernelShape,
    pub m_1to2: f64,
    pub m_2to1: f64,
    pub departure1: Area,
    pub reception2: Area,
    pub departure2: Area,
    pub reception1: Area,
    /// Departure probability used everywhere when `kernels = uniform`.
    pub uniform_departure: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            direction: MigrationDirection::OneToTwo,
            kernels: KernelShape::Gaussian,
            m_1to2: 0.2,
            m_2to1: 0.8,
            departure1: Area {
                center: (0.8, 0.5),
                radius: 0.15,
            },
            reception2: Area {
                center: (0.2, 0.5),
                radius: 0.15,
            },
            departure2: Area {
                center: (0.2, 0.5),
                radius: 0.15,
            },
            reception1: Area {
                center: (0.8, 0.5),
                radius: 0.15,
            },
            uniform_departure: 0.5,
        }
    }
}

/// Which density enters the speed closure `v_max (1 - u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedDensity {
    /// `u = u_P + u_N` of the zone.
    Total,
    /// The advected species alone.
    Species,
}

impl std::fmt::Display for SpeedDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpeedDensity::Total => "total",
            SpeedDensity::Species => "species",
        })
    }
}

impl FromStr for SpeedDensity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total" => Ok(SpeedDensity::Total),
            "species" => Ok(SpeedDensity::Species),
            _ => Err(format!("expected total|species, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsParams {
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub conservation_tol: f64,
    pub positivity_tol: f64,
    pub speed_density: SpeedDensity,
}

impl Default for NumericsParams {
    fn default() -> Self {
        NumericsParams {
            dt_max: 0.01,
            cfl_safety: 0.9,
            t_end: 400.0,
            conservation_tol: 1e-6,
            positivity_tol: 1e-10,
            speed_density: SpeedDensity::Total,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub record_interval: f64,
    pub snapshot_times: Vec<f64>,
    pub output_dir: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            record_interval: 1.0,
            snapshot_times: vec![0.0, 10.0, 20.0, 100.0, 250.0, 400.0],
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub zone1: ZoneConfig,
    pub zone2: ZoneConfig,
    pub coupling: CouplingConfig,
    pub control: ControlParams,
    pub numerics: NumericsParams,
    pub output: OutputConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            zone1: ZoneConfig::default_zone1(),
            zone2: ZoneConfig::default_zone2(),
            coupling: CouplingConfig::default(),
            control: ControlParams::default(),
            numerics: NumericsParams::default(),
            output: OutputConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn zone(&self, index: usize) -> &ZoneConfig {
        if index == 0 {
            &self.zone1
        } else {
            &self.zone2
        }
    }

    /// Checks every range constraint, naming the offending dotted key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |key: &str, msg: String| Err(ConfigError::at_key(None, key, msg));
        for (name, z) in [("zone1", &self.zone1), ("zone2", &self.zone2)] {
            let key = |k: &str| format!("{name}.{k}");
            if z.nx < crate::grid::MIN_CELLS {
                return err(&key("nx"), format!("must be >= 4, got {}", z.nx));
            }
            if z.ny < crate::grid::MIN_CELLS {
                return err(&key("ny"), format!("must be >= 4, got {}", z.ny));
            }
            if !(z.size.0 > 0.0 && z.size.1 > 0.0 && z.size.0.is_finite() && z.size.1.is_finite()) {
                return err(&key("size"), "extents must be positive".into());
            }
            if !(z.origin.0.is_finite() && z.origin.1.is_finite()) {
                return err(&key("origin"), "must be finite".into());
            }
            for (k, v) in [
                ("d_P", z.d_p),
                ("d_N", z.d_n),
                ("v_P_max", z.v_p_max),
                ("v_N_max", z.v_n_max),
                ("a", z.a),
                ("b", z.b),
                ("alpha_P", z.alpha_p),
                ("alpha_N", z.alpha_n),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return err(&key(k), format!("must be finite and >= 0, got {v}"));
                }
            }
            if !(z.eps_guard > 0.0 && z.eps_guard < 1.0) {
                return err(
                    &key("eps_guard"),
                    format!("must lie in (0, 1), got {}", z.eps_guard),
                );
            }
            if !inside(z, z.target) {
                return err(&key("target"), "must lie inside the zone".into());
            }
            if let InitialProfile::Clusters(cs) = &z.initial {
                if z.mass > 0.0 && cs.is_empty() {
                    return err(
                        &key("clusters"),
                        "need at least one cluster for a populated zone".into(),
                    );
                }
                for c in cs {
                    if !(c.radius > 0.0 && c.weight >= 0.0 && c.radius.is_finite() && c.weight.is_finite()) {
                        return err(&key("clusters"), "radius must be > 0 and weight >= 0".into());
                    }
                }
                if z.mass > 0.0 && cs.iter().all(|c| c.weight == 0.0) {
                    return err(&key("clusters"), "all cluster weights are zero".into());
                }
            }
            if !(0.0..=1.0).contains(&z.stressed_fraction) {
                return err(&key("stressed_fraction"), "must lie in [0, 1]".into());
            }
            if !(0.0..=1.0).contains(&z.mass) {
                return err(&key("mass"), "must lie in [0, 1]".into());
            }
        }
        let total = self.zone1.mass + self.zone2.mass;
        if (total - 1.0).abs() > 1e-12 && total != 0.0 {
            return err("zone2.mass", format!("zone masses must sum to 1, got {total}"));
        }

        let c = &self.coupling;
        for (k, m) in [("coupling.m_1to2", c.m_1to2), ("coupling.m_2to1", c.m_2to1)] {
            if !(0.0..=1.0).contains(&m) {
                return err(k, format!("must lie in [0, 1], got {m}"));
            }
        }
        for (k, area, zone) in [
            ("coupling.departure1", c.departure1, &self.zone1),
            ("coupling.reception2", c.reception2, &self.zone2),
            ("coupling.departure2", c.departure2, &self.zone2),
            ("coupling.reception1", c.reception1, &self.zone1),
        ] {
            if !(area.radius > 0.0 && area.radius.is_finite()) {
                return err(
                    &format!("{k}_radius"),
                    format!("must be > 0, got {}", area.radius),
                );
            }
            if !inside(zone, area.center) {
                return err(k, "center must lie inside its zone".into());
            }
        }
        if !(0.0..=1.0).contains(&c.uniform_departure) {
            return err("coupling.uniform_departure", "must lie in [0, 1]".into());
        }

        for (k, s) in [
            ("control.K1", self.control.departure),
            ("control.K2", self.control.arrival),
        ] {
            if !(0.0..=1.0).contains(&s.gain()) {
                return err(k, "must lie in [0, 1]".into());
            }
        }

        let n = &self.numerics;
        for (k, v) in [
            ("numerics.dt_max", n.dt_max),
            ("numerics.conservation_tol", n.conservation_tol),
            ("numerics.positivity_tol", n.positivity_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(k, format!("must be > 0, got {v}"));
            }
        }
        if !(n.cfl_safety > 0.0 && n.cfl_safety <= 1.0) {
            return err(
                "numerics.cfl_safety",
                format!("must lie in (0, 1], got {}", n.cfl_safety),
            );
        }
        if !(n.t_end >= 0.0 && n.t_end.is_finite()) {
            return err("numerics.t_end", format!("must be >= 0, got {}", n.t_end));
        }
        if !(self.output.record_interval > 0.0 && self.output.record_interval.is_finite()) {
            return err("output.record_interval", "must be > 0".into());
        }
        for &s in &self.output.snapshot_times {
            if !(s >= 0.0 && s <= n.t_end) {
                return err(
                    "output.snapshot_times",
                    format!("{s} lies outside [0, t_end = {}]", n.t_end),
                );
            }
        }
        Ok(())
    }

    /// Emits every key; `parse_config` of the result reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for (name, z) in [("zone1", &self.zone1), ("zone2", &self.zone2)] {
            let _ = writeln!(s, "[{name}]");
            let _ = writeln!(s, "nx = {}", z.nx);
            let _ = writeln!(s, "ny = {}", z.ny);
            let _ = writeln!(s, "origin = {}", point(z.origin));
            let _ = writeln!(s, "size = {}", point(z.size));
            for (k, v) in [
                ("d_P", z.d_p),
                ("d_N", z.d_n),
                ("v_P_max", z.v_p_max),
                ("v_N_max", z.v_n_max),
                ("a", z.a),
                ("b", z.b),
                ("alpha_P", z.alpha_p),
                ("alpha_N", z.alpha_n),
                ("eps_guard", z.eps_guard),
            ] {
                let _ = writeln!(s, "{k} = {v:?}");
            }
            let _ = writeln!(s, "target = {}", point(z.target));
            match &z.initial {
                InitialProfile::Uniform => {
                    let _ = writeln!(s, "initial = uniform");
                }
                InitialProfile::Cosine => {
                    let _ = writeln!(s, "initial = cosine");
                }
                InitialProfile::Clusters(cs) => {
                    let _ = writeln!(s, "initial = clusters");
                    let list: Vec<String> = cs
                        .iter()
                        .map(|c| {
                            format!(
                                "({:?}, {:?}, {:?}, {:?})",
                                c.center.0, c.center.1, c.radius, c.weight
                            )
                        })
                        .collect();
                    let _ = writeln!(
                        s,
                        "clusters = {}",
                        if list.is_empty() {
                            "none".to_string()
                        } else {
                            list.join("; ")
                        }
                    );
                }
            }
            let _ = writeln!(s, "stressed_fraction = {:?}", z.stressed_fraction);
            let _ = writeln!(s, "mass = {:?}", z.mass);
            s.push('\n');
        }
        let c = &self.coupling;
        let _ = writeln!(s, "[coupling]");
        let _ = writeln!(s, "direction = {}", c.direction);
        let _ = writeln!(s, "kernels = {}", c.kernels);
        let _ = writeln!(s, "m_1to2 = {:?}", c.m_1to2);
        let _ = writeln!(s, "m_2to1 = {:?}", c.m_2to1);
        for (k, a) in [
            ("departure1", c.departure1),
            ("reception2", c.reception2),
            ("departure2", c.departure2),
            ("reception1", c.reception1),
        ] {
            let _ = writeln!(s, "{k} = {}", point(a.center));
            let _ = writeln!(s, "{k}_radius = {:?}", a.radius);
        }
        let _ = writeln!(s, "uniform_departure = {:?}", c.uniform_departure);
        s.push('\n');
        let ctl = &self.control;
        let _ = writeln!(s, "[control]");
        let _ = writeln!(s, "mode = {}", ctl.mode);
        let (t0, t1) = ctl.departure.window();
        let _ = writeln!(s, "K1 = {:?}", ctl.departure.gain());
        let _ = writeln!(s, "T0_1 = {t0:?}");
        let _ = writeln!(s, "T1_1 = {t1:?}");
        let (t0, t1) = ctl.arrival.window();
        let _ = writeln!(s, "K2 = {:?}", ctl.arrival.gain());
        let _ = writeln!(s, "T0_2 = {t0:?}");
        let _ = writeln!(s, "T1_2 = {t1:?}");
        let _ = writeln!(s, "u2_integrand = {}", ctl.arrival_integrand);
        s.push('\n');
        let n = &self.numerics;
        let _ = writeln!(s, "[numerics]");
        let _ = writeln!(s, "dt_max = {:?}", n.dt_max);
        let _ = writeln!(s, "cfl_safety = {:?}", n.cfl_safety);
        let _ = writeln!(s, "t_end = {:?}", n.t_end);
        let _ = writeln!(s, "conservation_tol = {:?}", n.conservation_tol);
        let _ = writeln!(s, "positivity_tol = {:?}", n.positivity_tol);
        let _ = writeln!(s, "speed_density = {}", n.speed_density);
        s.push('\n');
        let o = &self.output;
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "record_interval = {:?}", o.record_interval);
        let times: Vec<String> = o.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(
            s,
            "snapshot_times = {}",
            if times.is_empty() {
                "none".to_string()
            } else {
                times.join(", ")
            }
        );
        if let Some(dir) = &o.output_dir {
            let _ = writeln!(s, "output_dir = {dir}");
        }
        s
    }
}

fn inside(z: &ZoneConfig, p: (f64, f64)) -> bool {
    p.0 >= z.origin.0 && p.0 <= z.origin.0 + z.size.0 && p.1 >= z.origin.1 && p.1 <= z.origin.1 + z.size.1
}

fn point(p: (f64, f64)) -> String {
    format!("({:?}, {:?})", p.0, p.1)
}

struct Entry<'a> {
    section: &'a str,
    key: &'a str,
    value: &'a str,
    line: usize,
}

const SECTIONS: [&str; 6] = ["zone1", "zone2", "coupling", "control", "numerics", "output"];

/// Parses and validates a configuration text.
pub fn parse_config(text: &str) -> Result<SimulationConfig, ConfigError> {
    let entries = scan(text)?;
    let mut cfg = SimulationConfig::default();
    // control windows are assembled after all keys are read
    let mut windows = [
        {
            let (a, b) = cfg.control.departure.window();
            [cfg.control.departure.gain(), a, b]
        },
        {
            let (a, b) = cfg.control.arrival.window();
            [cfg.control.arrival.gain(), a, b]
        },
    ];
    let mut window_lines = [None, None];
    let mut initial_kind: [Option<&str>; 2] = [None, None];
    let mut cluster_lists: [Option<Vec<Cluster>>; 2] = [None, None];
    for e in &entries {
        let v = Value { e };
        match e.section {
            "zone1" | "zone2" => {
                let z = if e.section == "zone1" {
                    &mut cfg.zone1
                } else {
                    &mut cfg.zone2
                };
                match e.key {
                    "nx" => z.nx = v.uint()?,
                    "ny" => z.ny = v.uint()?,
                    "origin" => z.origin = v.point()?,
                    "size" => z.size = v.point()?,
                    "d_P" => z.d_p = v.num()?,
                    "d_N" => z.d_n = v.num()?,
                    "v_P_max" => z.v_p_max = v.num()?,
                    "v_N_max" => z.v_n_max = v.num()?,
                    "a" => z.a = v.num()?,
                    "b" => z.b = v.num()?,
                    "alpha_P" => z.alpha_p = v.num()?,
                    "alpha_N" => z.alpha_n = v.num()?,
                    "eps_guard" => z.eps_guard = v.num()?,
                    "target" => z.target = v.point()?,
                    "initial" => {
                        initial_kind[zone_slot(e.section)] = Some(match e.value {
                            kind @ ("uniform" | "clusters" | "cosine") => kind,
                            other => {
                                return Err(v.bad(format!("expected clusters|uniform|cosine, got `{other}`")))
                            }
                        })
                    }
                    "clusters" => cluster_lists[zone_slot(e.section)] = Some(v.clusters()?),
                    "stressed_fraction" => z.stressed_fraction = v.num()?,
                    "mass" => z.mass = v.num()?,
                    _ => return Err(v.unknown()),
                }
            }
            "coupling" => {
                let c = &mut cfg.coupling;
                match e.key {
                    "direction" => c.direction = v.parsed()?,
                    "kernels" => c.kernels = v.parsed()?,
                    "m_1to2" => c.m_1to2 = v.num()?,
                    "m_2to1" => c.m_2to1 = v.num()?,
                    "departure1" => c.departure1.center = v.point()?,
                    "departure1_radius" => c.departure1.radius = v.num()?,
                    "reception2" => c.reception2.center = v.point()?,
                    "reception2_radius" => c.reception2.radius = v.num()?,
                    "departure2" => c.departure2.center = v.point()?,
                    "departure2_radius" => c.departure2.radius = v.num()?,
                    "reception1" => c.reception1.center = v.point()?,
                    "reception1_radius" => c.reception1.radius = v.num()?,
                    "uniform_departure" => c.uniform_departure = v.num()?,
                    _ => return Err(v.unknown()),
                }
            }
            "control" => {
                let slot = |w: usize,
                            i: usize,
                            windows: &mut [[f64; 3]; 2],
                            lines: &mut [Option<usize>; 2]|
                 -> Result<(), ConfigError> {
                    windows[w][i] = v.num()?;
                    lines[w] = Some(e.line);
                    Ok(())
                };
                match e.key {
                    "mode" => cfg.control.mode = v.parsed()?,
                    "K1" => slot(0, 0, &mut windows, &mut window_lines)?,
                    "T0_1" => slot(0, 1, &mut windows, &mut window_lines)?,
                    "T1_1" => slot(0, 2, &mut windows, &mut window_lines)?,
                    "K2" => slot(1, 0, &mut windows, &mut window_lines)?,
                    "T0_2" => slot(1, 1, &mut windows, &mut window_lines)?,
                    "T1_2" => slot(1, 2, &mut windows, &mut window_lines)?,
                    "u2_integrand" => cfg.control.arrival_integrand = v.parsed::<ArrivalIntegrand>()?,
                    _ => return Err(v.unknown()),
                }
            }
            "numerics" => {
                let n = &mut cfg.numerics;
                match e.key {
                    "dt_max" => n.dt_max = v.num()?,
                    "cfl_safety" => n.cfl_safety = v.num()?,
                    "t_end" => n.t_end = v.num()?,
                    "conservation_tol" => n.conservation_tol = v.num()?,
                    "positivity_tol" => n.positivity_tol = v.num()?,
                    "speed_density" => n.speed_density = v.parsed()?,
                    _ => return Err(v.unknown()),
                }
            }
            "output" => {
                let o = &mut cfg.output;
                match e.key {
                    "record_interval" => o.record_interval = v.num()?,
                    "snapshot_times" => o.snapshot_times = v.num_list()?,
                    "output_dir" => o.output_dir = Some(e.value.to_string()),
                    _ => return Err(v.unknown()),
                }
            }
            _ => unreachable!("sections are checked while scanning"),
        }
    }
    for (slot, z) in [&mut cfg.zone1, &mut cfg.zone2].into_iter().enumerate() {
        let kind = initial_kind[slot].unwrap_or(match z.initial {
            InitialProfile::Uniform => "uniform",
            InitialProfile::Cosine => "cosine",
            InitialProfile::Clusters(_) => "clusters",
        });
        z.initial = match kind {
            "uniform" => InitialProfile::Uniform,
            "cosine" => InitialProfile::Cosine,
            _ => match (cluster_lists[slot].take(), &z.initial) {
                (Some(cs), _) => InitialProfile::Clusters(cs),
                (None, InitialProfile::Clusters(cs)) => InitialProfile::Clusters(cs.clone()),
                (None, _) => InitialProfile::Clusters(Vec::new()),
            },
        };
    }
    for (w, (gain_key, suffix)) in [("control.K1", "1"), ("control.K2", "2")].into_iter().enumerate() {
        let [k, t0, t1] = windows[w];
        let schedule = ControlSchedule::new(k, t0, t1).map_err(|err| {
            let key = if (0.0..=1.0).contains(&k) {
                format!("control.T0_{suffix}")
            } else {
                gain_key.to_string()
            };
            ConfigError::at_key(window_lines[w], key, err.to_string())
        })?;
        if w == 0 {
            cfg.control.departure = schedule;
        } else {
            cfg.control.arrival = schedule;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn zone_slot(section: &str) -> usize {
    usize::from(section == "zone2")
}

fn scan(text: &str) -> Result<Vec<Entry<'_>>, ConfigError> {
    let mut entries = Vec::new();
    let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
    let mut section: Option<&str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::syntax(line, format!("unterminated section header `{body}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::syntax(
                    line,
                    format!(
                        "unknown section `[{name}]` (expected one of {})",
                        SECTIONS.join(", ")
                    ),
                ));
            }
            section = Some(name);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::syntax(line, format!("expected `key = value`, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::syntax(line, "empty key"));
        }
        let Some(sec) = section else {
            return Err(ConfigError::syntax(
                line,
                format!("key `{key}` appears before any [section]"),
            ));
        };
        if value.is_empty() {
            return Err(ConfigError::at_key(
                Some(line),
                format!("{sec}.{key}"),
                "empty value",
            ));
        }
        if let Some(first) = seen.insert((sec, key), line) {
            return Err(ConfigError::at_key(
                Some(line),
                format!("{sec}.{key}"),
                format!("duplicate key (first defined on line {first}, again on line {line})"),
            ));
        }
        entries.push(Entry {
            section: sec,
            key,
            value,
            line,
        });
    }
    Ok(entries)
}

struct Value<'a, 'b> {
    e: &'b Entry<'a>,
}

impl Value<'_, '_> {
    fn key(&self) -> String {
        format!("{}.{}", self.e.section, self.e.key)
    }

    fn bad(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::at_key(Some(self.e.line), self.key(), msg)
    }

    fn unknown(&self) -> ConfigError {
        self.bad("unknown key")
    }

    fn num(&self) -> Result<f64, ConfigError> {
        parse_num(self.e.value).ok_or_else(|| self.bad(format!("expected a number, got `{}`", self.e.value)))
    }

    fn uint(&self) -> Result<usize, ConfigError> {
        self.e
            .value
            .parse()
            .map_err(|_| self.bad(format!("expected a nonnegative integer, got `{}`", self.e.value)))
    }

    fn parsed<T: FromStr<Err = String>>(&self) -> Result<T, ConfigError> {
        self.e.value.parse().map_err(|m: String| self.bad(m))
    }

    fn tuple(&self, text: &str, arity: usize) -> Result<Vec<f64>, ConfigError> {
        let t = text.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| self.bad(format!("expected a parenthesized {arity}-tuple, got `{t}`")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != arity {
            return Err(self.bad(format!("expected {arity} components, got {}", parts.len())));
        }
        parts
            .iter()
            .map(|p| parse_num(p).ok_or_else(|| self.bad(format!("`{p}` is not a number"))))
            .collect()
    }

    fn point(&self) -> Result<(f64, f64), ConfigError> {
        let v = self.tuple(self.e.value, 2)?;
        Ok((v[0], v[1]))
    }

    fn clusters(&self) -> Result<Vec<Cluster>, ConfigError> {
        if self.e.value == "none" {
            return Ok(Vec::new());
        }
        self.e
            .value
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                let v = self.tuple(s, 4)?;
                Ok(Cluster {
                    center: (v[0], v[1]),
                    radius: v[2],
                    weight: v[3],
                })
            })
            .collect()
    }

    fn num_list(&self) -> Result<Vec<f64>, ConfigError> {
        if self.e.value == "none" {
            return Ok(Vec::new());
        }
        self.e
            .value
            .split(',')
            .map(|p| {
                let p = p.trim();
                parse_num(p).ok_or_else(|| self.bad(format!("`{p}` is not a number")))
            })
            .collect()
    }
}

fn parse_num(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}
