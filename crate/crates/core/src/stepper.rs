//! Method-of-lines integration of the coupled two-zone system.
//!
//! [`Model`] assembles the right-hand side from the transport, kinetics,
//! migration and control pieces. Time stepping uses Heun's method in its
//! strong-stability-preserving form,
//!
//! ```text
//! u*    = u + dt F(t, u)
//! u_new = (u + u* + dt F(t + dt, u*)) / 2
//! ```
//!
//! so each stage is a forward-Euler step and positivity carries over from the
//! forward-Euler step-size bounds used by [`Model::compute_dt`].

use std::fmt;

use crate::control::{add_controls, ControlParams};
use crate::error::{Error, Result};
use crate::grid::{integrate, Field, Grid, ZoneId};
use crate::io::config::{
    InitialProfile, KernelShape, MigrationDirection, NumericsParams, SimulationConfig, SpeedDensity,
    ZoneConfig,
};
use crate::kinetics::{add_reaction, exchange_rate, ZoneKineticsParams};
use crate::migration::{gaussian_kernel, normalize_reception, MigrationKernel};
use crate::observables::{record, ObservableRecord};
use crate::operators::{
    add_advection, add_advection_pair, add_laplacian, advective_dt_bound, build_direction_field,
    diffusive_dt_bound, AdvectionParams, DirectionField,
};

/// Relative per-step mass drift tolerated before a step is rejected.
pub const STEP_DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneState {
    pub stressed: Field,
    pub unstressed: Field,
}

impl ZoneState {
    pub fn zeros(grid: Grid) -> Self {
        ZoneState {
            stressed: Field::zeros(grid),
            unstressed: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.stressed.grid()
    }

    pub fn mass(&self) -> f64 {
        integrate(&self.stressed) + integrate(&self.unstressed)
    }
}

/// The four densities `(u_P1, u_N1, u_P2, u_N2)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub t: f64,
    zones: [ZoneState; 2],
}

impl NetworkState {
    pub fn new(t: f64, zone1: ZoneState, zone2: ZoneState) -> Result<Self> {
        for (z, id) in [(&zone1, ZoneId::One), (&zone2, ZoneId::Two)] {
            z.stressed.ensure_same_grid(&z.unstressed, "zone densities")?;
            if z.grid().zone() != id {
                return Err(Error::GridMismatch(format!(
                    "{} grid passed as {id}",
                    z.grid().zone()
                )));
            }
        }
        Ok(NetworkState {
            t,
            zones: [zone1, zone2],
        })
    }

    pub fn zeros(g1: Grid, g2: Grid) -> Result<Self> {
        NetworkState::new(0.0, ZoneState::zeros(g1), ZoneState::zeros(g2))
    }

    pub fn zone(&self, id: ZoneId) -> &ZoneState {
        &self.zones[id.index()]
    }

    pub fn zone_mut(&mut self, id: ZoneId) -> &mut ZoneState {
        &mut self.zones[id.index()]
    }

    pub fn zone1(&self) -> &ZoneState {
        &self.zones[0]
    }

    pub fn zone2(&self) -> &ZoneState {
        &self.zones[1]
    }

    pub fn fields(&self) -> [&Field; 4] {
        let [z1, z2] = &self.zones;
        [&z1.stressed, &z1.unstressed, &z2.stressed, &z2.unstressed]
    }

    fn fields_mut(&mut self) -> [&mut Field; 4] {
        let [z1, z2] = &mut self.zones;
        [
            &mut z1.stressed,
            &mut z1.unstressed,
            &mut z2.stressed,
            &mut z2.unstressed,
        ]
    }

    /// Total population over both zones.
    pub fn total_mass(&self) -> f64 {
        self.zones[0].mass() + self.zones[1].mass()
    }
}

/// Names the four unknowns in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldId {
    P1,
    N1,
    P2,
    N2,
}

impl FieldId {
    pub const ALL: [FieldId; 4] = [FieldId::P1, FieldId::N1, FieldId::P2, FieldId::N2];

    pub fn zone(self) -> ZoneId {
        match self {
            FieldId::P1 | FieldId::N1 => ZoneId::One,
            FieldId::P2 | FieldId::N2 => ZoneId::Two,
        }
    }

    pub fn is_stressed(self) -> bool {
        matches!(self, FieldId::P1 | FieldId::P2)
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldId::P1 => "u_P1",
            FieldId::N1 => "u_N1",
            FieldId::P2 => "u_P2",
            FieldId::N2 => "u_N2",
        })
    }
}

/// Per-term right-hand-side values at one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TermBreakdown {
    pub diffusion: f64,
    pub advection: f64,
    pub reaction: f64,
    pub migration: f64,
    pub control: f64,
}

impl TermBreakdown {
    pub fn total(&self) -> f64 {
        self.diffusion + self.advection + self.reaction + self.migration + self.control
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    Positivity,
    Conservation,
    NonFinite,
}

/// Why a step was rejected, down to the offending cell.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub kind: InvariantKind,
    /// Time at the start of the failing step.
    pub t: f64,
    pub dt: f64,
    pub field: Option<FieldId>,
    pub cell: Option<(usize, usize)>,
    pub value: f64,
    pub tolerance: f64,
    /// Right-hand side terms at the offending cell, evaluated on the state
    /// the step started from.
    pub breakdown: Option<TermBreakdown>,
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            InvariantKind::Positivity => write!(
                f,
                "positivity violated in step t={} dt={}: {} = {:e} < -{:e}",
                self.t,
                self.dt,
                self.field.map(|x| x.to_string()).unwrap_or_default(),
                self.value,
                self.tolerance
            )?,
            InvariantKind::NonFinite => write!(
                f,
                "non-finite value in step t={} dt={}: {} = {}",
                self.t,
                self.dt,
                self.field.map(|x| x.to_string()).unwrap_or_default(),
                self.value
            )?,
            InvariantKind::Conservation => write!(
                f,
                "mass conservation violated in step t={} dt={}: drift {:e} exceeds {:e}",
                self.t, self.dt, self.value, self.tolerance
            )?,
        }
        if let Some((i, j)) = self.cell {
            write!(f, " at cell ({i}, {j})")?;
        }
        if let Some(b) = &self.breakdown {
            write!(
                f,
                "; rhs terms: diffusion {:e}, advection {:e}, reaction {:e}, migration {:e}, control {:e}",
                b.diffusion, b.advection, b.reaction, b.migration, b.control
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ZoneModel {
    grid: Grid,
    d_p: f64,
    d_n: f64,
    adv_p: AdvectionParams,
    adv_n: AdvectionParams,
    directions: DirectionField,
    kinetics: ZoneKineticsParams,
}

/// Everything needed to evaluate the right-hand side, built once per run.
#[derive(Debug, Clone)]
pub struct Model {
    zones: [ZoneModel; 2],
    /// Zone 1 to zone 2 channel; also supplies the control kernels.
    forward: MigrationKernel,
    reverse: MigrationKernel,
    direction: MigrationDirection,
    controls: ControlParams,
    numerics: NumericsParams,
}

impl Model {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let g1 = zone_grid(&cfg.zone1, ZoneId::One)?;
        let g2 = zone_grid(&cfg.zone2, ZoneId::Two)?;
        let c = &cfg.coupling;
        let (forward, reverse) = match c.kernels {
            KernelShape::Gaussian => (
                MigrationKernel::new(
                    gaussian_kernel(&g1, c.departure1.center, c.departure1.radius)?,
                    normalize_reception(&gaussian_kernel(&g2, c.reception2.center, c.reception2.radius)?)?,
                    c.m_1to2,
                )?,
                MigrationKernel::new(
                    gaussian_kernel(&g2, c.departure2.center, c.departure2.radius)?,
                    normalize_reception(&gaussian_kernel(&g1, c.reception1.center, c.reception1.radius)?)?,
                    c.m_2to1,
                )?,
            ),
            KernelShape::Uniform => (
                MigrationKernel::new(
                    Field::constant(g1, c.uniform_departure),
                    normalize_reception(&Field::constant(g2, 1.0))?,
                    c.m_1to2,
                )?,
                MigrationKernel::new(
                    Field::constant(g2, c.uniform_departure),
                    normalize_reception(&Field::constant(g1, 1.0))?,
                    c.m_2to1,
                )?,
            ),
        };
        Ok(Model {
            zones: [zone_model(&cfg.zone1, g1)?, zone_model(&cfg.zone2, g2)?],
            forward,
            reverse,
            direction: c.direction,
            controls: cfg.control,
            numerics: cfg.numerics,
        })
    }

    pub fn grid(&self, id: ZoneId) -> &Grid {
        &self.zones[id.index()].grid
    }

    pub fn numerics(&self) -> &NumericsParams {
        &self.numerics
    }

    pub fn controls(&self) -> &ControlParams {
        &self.controls
    }

    pub fn forward_channel(&self) -> &MigrationKernel {
        &self.forward
    }

    pub fn reverse_channel(&self) -> &MigrationKernel {
        &self.reverse
    }

    pub fn direction_field(&self, id: ZoneId) -> &DirectionField {
        &self.zones[id.index()].directions
    }

    pub fn zone_kinetics(&self, id: ZoneId) -> &ZoneKineticsParams {
        &self.zones[id.index()].kinetics
    }

    fn check_state(&self, state: &NetworkState) -> Result<()> {
        for (id, z) in [(ZoneId::One, state.zone1()), (ZoneId::Two, state.zone2())] {
            if !z.grid().same_as(self.grid(id)) {
                return Err(Error::GridMismatch(format!(
                    "state {id} does not match the model grid"
                )));
            }
        }
        Ok(())
    }

    /// `[dP1, dN1, dP2, dN2]` at `(t, state)`.
    pub fn rhs(&self, t: f64, state: &NetworkState) -> Result<[Field; 4]> {
        self.check_state(state)?;
        let mut ws = Workspace::new(self);
        self.rhs_into(t, state, &mut ws.scratch, &mut ws.k1);
        let [a, b, c, d] = ws.k1;
        let g1 = *self.grid(ZoneId::One);
        let g2 = *self.grid(ZoneId::Two);
        Ok([
            Field::from_values(g1, a)?,
            Field::from_values(g1, b)?,
            Field::from_values(g2, c)?,
            Field::from_values(g2, d)?,
        ])
    }

    fn rhs_into(&self, t: f64, state: &NetworkState, scratch: &mut Scratch, out: &mut [Vec<f64>; 4]) {
        let adv_buf = &mut scratch.advection;
        for o in out.iter_mut() {
            o.iter_mut().for_each(|v| *v = 0.0);
        }
        let [dp1, dn1, dp2, dn2] = out;
        let pairs: [(&mut Vec<f64>, &mut Vec<f64>); 2] = [(dp1, dn1), (dp2, dn2)];
        for ((zm, zs), ((dp, dn), total)) in self
            .zones
            .iter()
            .zip(&state.zones)
            .zip(pairs.into_iter().zip(scratch.totals.iter_mut()))
        {
            let (p, n) = (zs.stressed.values(), zs.unstressed.values());
            add_laplacian(&zm.grid, p, zm.d_p, dp);
            add_laplacian(&zm.grid, n, zm.d_n, dn);
            if zm.adv_p.v_max != 0.0 || zm.adv_n.v_max != 0.0 {
                match self.numerics.speed_density {
                    SpeedDensity::Total => {
                        for ((t, &a), &b) in total.iter_mut().zip(p).zip(n) {
                            *t = a + b;
                        }
                        add_advection_pair(
                            &zm.directions,
                            total,
                            (p, zm.adv_p.v_max, dp),
                            (n, zm.adv_n.v_max, dn),
                            adv_buf,
                        );
                    }
                    SpeedDensity::Species => {
                        add_advection(&zm.directions, p, p, zm.adv_p.v_max, dp, adv_buf);
                        add_advection(&zm.directions, n, n, zm.adv_n.v_max, dn, adv_buf);
                    }
                }
            }
            add_reaction(p, n, &zm.kinetics, dp, dn);
        }
        let [z1, z2] = &state.zones;
        if self.direction.forward() {
            for (u, (src, dst)) in [(&z1.stressed, (0usize, 2usize)), (&z1.unstressed, (1, 3))] {
                self.forward.add_outflow(u.values(), &mut out[src]);
                let i = self.forward.departing_integral(u.values());
                self.forward.add_inflow(i, &mut out[dst]);
            }
        }
        if self.direction.reverse() {
            for (u, (src, dst)) in [(&z2.stressed, (2usize, 0usize)), (&z2.unstressed, (3, 1))] {
                self.reverse.add_outflow(u.values(), &mut out[src]);
                let i = self.reverse.departing_integral(u.values());
                self.reverse.add_inflow(i, &mut out[dst]);
            }
        }
        let [dp1, dn1, dp2, dn2] = out;
        add_controls(
            t,
            z1.stressed.values(),
            z2.stressed.values(),
            &self.controls,
            &self.forward,
            [dp1, dn1, dp2, dn2],
        );
    }

    /// Right-hand side of one unknown at one cell, split by term.
    pub fn term_breakdown(
        &self,
        t: f64,
        state: &NetworkState,
        field: FieldId,
        cell: (usize, usize),
    ) -> TermBreakdown {
        let zone = field.zone();
        let zm = &self.zones[zone.index()];
        let k = zm.grid.index(cell.0, cell.1);
        let zs = state.zone(zone);
        let (p, n) = (zs.stressed.values(), zs.unstressed.values());
        let own = if field.is_stressed() { p } else { n };
        let len = p.len();
        let mut buf = vec![0.0; len];

        let d = if field.is_stressed() { zm.d_p } else { zm.d_n };
        add_laplacian(&zm.grid, own, d, &mut buf);
        let diffusion = buf[k];

        buf.iter_mut().for_each(|v| *v = 0.0);
        let v_max = if field.is_stressed() {
            zm.adv_p.v_max
        } else {
            zm.adv_n.v_max
        };
        let total: Vec<f64> = match self.numerics.speed_density {
            SpeedDensity::Total => p.iter().zip(n).map(|(a, b)| a + b).collect(),
            SpeedDensity::Species => own.to_vec(),
        };
        add_advection(&zm.directions, own, &total, v_max, &mut buf, &mut Vec::new());
        let advection = buf[k];

        let r = exchange_rate(p[k], n[k], &zm.kinetics);
        let reaction = if field.is_stressed() { r } else { -r };

        let species = |z: &ZoneState| -> Vec<f64> {
            if field.is_stressed() {
                z.stressed.values().to_vec()
            } else {
                z.unstressed.values().to_vec()
            }
        };
        let mut migration = 0.0;
        let (src_fwd, src_rev) = (species(state.zone1()), species(state.zone2()));
        if self.direction.forward() {
            let i = self.forward.departing_integral(&src_fwd);
            migration += match zone {
                ZoneId::One => -self.forward.proportion() * self.forward.departure().values()[k] * src_fwd[k],
                ZoneId::Two => self.forward.reception().values()[k] * self.forward.proportion() * i,
            };
        }
        if self.direction.reverse() {
            let i = self.reverse.departing_integral(&src_rev);
            migration += match zone {
                ZoneId::Two => -self.reverse.proportion() * self.reverse.departure().values()[k] * src_rev[k],
                ZoneId::One => self.reverse.reception().values()[k] * self.reverse.proportion() * i,
            };
        }

        let g1 = *self.grid(ZoneId::One);
        let g2 = *self.grid(ZoneId::Two);
        let mut ctl = [
            vec![0.0; g1.len()],
            vec![0.0; g1.len()],
            vec![0.0; g2.len()],
            vec![0.0; g2.len()],
        ];
        let [a, b, c, dd] = &mut ctl;
        add_controls(
            t,
            state.zone1().stressed.values(),
            state.zone2().stressed.values(),
            &self.controls,
            &self.forward,
            [a, b, c, dd],
        );
        let slot = FieldId::ALL.iter().position(|f| *f == field).unwrap_or(0);
        let control = ctl[slot][k];

        TermBreakdown {
            diffusion,
            advection,
            reaction,
            migration,
            control,
        }
    }

    /// Stable explicit step: `cfl_safety` times the smallest of the
    /// diffusive, advective and local-rate bounds over both zones, and
    /// `dt_max`. The bounds use worst-case speeds and rates, so the result
    /// does not depend on the state.
    pub fn compute_dt(&self, _state: &NetworkState) -> f64 {
        self.stable_dt()
    }

    pub fn stable_dt(&self) -> f64 {
        let mut bound = self.numerics.dt_max;
        for (idx, zm) in self.zones.iter().enumerate() {
            bound = bound.min(diffusive_dt_bound(&zm.grid, zm.d_p.max(zm.d_n)));
            bound = bound.min(advective_dt_bound(&zm.grid, zm.adv_p.v_max.max(zm.adv_n.v_max)));
            let (m, p_max) = if idx == 0 {
                (
                    if self.direction.forward() {
                        self.forward.proportion()
                    } else {
                        0.0
                    },
                    self.forward.max_departure(),
                )
            } else {
                (
                    if self.direction.reverse() {
                        self.reverse.proportion()
                    } else {
                        0.0
                    },
                    self.reverse.max_departure().max(self.forward.max_departure()),
                )
            };
            let rate = zm.kinetics.rate_bound() + m + self.controls.max_gain() * p_max;
            if rate > 0.0 {
                bound = bound.min(1.0 / rate);
            }
        }
        self.numerics.cfl_safety * bound
    }

    /// One Heun step of size `dt`, checking positivity, finiteness and
    /// per-step conservation.
    pub fn step(&self, state: &NetworkState, dt: f64) -> Result<NetworkState> {
        self.check_state(state)?;
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        let mut ws = Workspace::new(self);
        let mut next = state.clone();
        self.step_in_place(&mut next, dt, &mut ws)?;
        Ok(next)
    }

    fn step_in_place(&self, state: &mut NetworkState, dt: f64, ws: &mut Workspace) -> Result<()> {
        let t = state.t;
        let mass_before = ws.mass.take().unwrap_or_else(|| state.total_mass());
        self.rhs_into(t, state, &mut ws.scratch, &mut ws.k1);
        ws.stage.t = t + dt;
        for ((dst, src), k1) in ws.stage.fields_mut().into_iter().zip(state.fields()).zip(&ws.k1) {
            for ((d, &u), &f) in dst.values_mut().iter_mut().zip(src.values()).zip(k1) {
                *d = u + dt * f;
            }
        }
        self.rhs_into(t + dt, &ws.stage, &mut ws.scratch, &mut ws.k2);
        if let Some(report) = self.check_stage(&ws.stage, t, dt) {
            return Err(self.enrich(report, state));
        }
        {
            let stage_fields = ws.stage.fields();
            for ((dst, st), k2) in state.fields_mut().into_iter().zip(stage_fields).zip(&ws.k2) {
                for ((u, &s), &f) in dst.values_mut().iter_mut().zip(st.values()).zip(k2) {
                    *u = 0.5 * (*u + s + dt * f);
                }
            }
        }
        state.t = t + dt;
        if let Some(mut report) = self.check_stage(state, t, dt) {
            report.t = t;
            return Err(self.enrich_from_stage(report, &ws.stage, t + dt));
        }
        let mass_after = state.total_mass();
        let drift = (mass_after - mass_before).abs();
        let allowed = STEP_DRIFT_TOL * mass_before.abs().max(f64::MIN_POSITIVE);
        if drift > allowed {
            return Err(Error::Invariant(Box::new(InvariantReport {
                kind: InvariantKind::Conservation,
                t,
                dt,
                field: None,
                cell: None,
                value: drift,
                tolerance: allowed,
                breakdown: None,
            })));
        }
        ws.mass = Some(mass_after);
        Ok(())
    }

    fn check_stage(&self, state: &NetworkState, t: f64, dt: f64) -> Option<InvariantReport> {
        let tol = self.numerics.positivity_tol;
        for (field, f) in FieldId::ALL.into_iter().zip(state.fields()) {
            if all_admissible(f.values(), tol) {
                continue;
            }
            let (kind, k) = match f.values().iter().position(|v| !v.is_finite()) {
                Some(k) => (InvariantKind::NonFinite, k),
                None => (InvariantKind::Positivity, f.min_with_index().1),
            };
            return Some(InvariantReport {
                kind,
                t,
                dt,
                field: Some(field),
                cell: Some(f.grid().cell_of(k)),
                value: f.values()[k],
                tolerance: tol,
                breakdown: None,
            });
        }
        None
    }

    fn enrich(&self, mut report: InvariantReport, at: &NetworkState) -> Error {
        if let (Some(field), Some(cell)) = (report.field, report.cell) {
            report.breakdown = Some(self.term_breakdown(at.t, at, field, cell));
        }
        Error::Invariant(Box::new(report))
    }

    fn enrich_from_stage(&self, report: InvariantReport, stage: &NetworkState, t: f64) -> Error {
        let mut s = stage.clone();
        s.t = t;
        self.enrich(report, &s)
    }

    /// Builds the initial state: each zone's profile is scaled to its share
    /// of the unit network mass and split into stressed/non-stressed parts.
    pub fn initial_state(&self, cfg: &SimulationConfig) -> Result<NetworkState> {
        let z1 = initial_zone(&cfg.zone1, self.grid(ZoneId::One))?;
        let z2 = initial_zone(&cfg.zone2, self.grid(ZoneId::Two))?;
        NetworkState::new(0.0, z1, z2)
    }
}

fn zone_grid(z: &ZoneConfig, id: ZoneId) -> Result<Grid> {
    Grid::covering(z.nx, z.ny, z.origin, z.size, id)
}

fn zone_model(z: &ZoneConfig, grid: Grid) -> Result<ZoneModel> {
    let directions = if z.v_p_max == 0.0 && z.v_n_max == 0.0 {
        DirectionField::zero(grid)
    } else {
        build_direction_field(&grid, z.target)?
    };
    Ok(ZoneModel {
        grid,
        d_p: z.d_p,
        d_n: z.d_n,
        adv_p: AdvectionParams::new(z.v_p_max)?,
        adv_n: AdvectionParams::new(z.v_n_max)?,
        directions,
        kinetics: ZoneKineticsParams::new(z.a, z.b, z.alpha_p, z.alpha_n, z.eps_guard)?,
    })
}

fn initial_zone(z: &ZoneConfig, grid: &Grid) -> Result<ZoneState> {
    if z.mass == 0.0 {
        return Ok(ZoneState::zeros(*grid));
    }
    let mut profile = match &z.initial {
        InitialProfile::Uniform => Field::constant(*grid, 1.0),
        InitialProfile::Cosine => {
            let (x0, lx) = (z.origin.0, z.size.0);
            grid.sample(|x, _| 1.0 + 0.5 * (std::f64::consts::PI * (x - x0) / lx).cos())
        }
        InitialProfile::Clusters(cs) => grid.sample(|x, y| {
            cs.iter()
                .map(|c| {
                    let d2 = (x - c.center.0).powi(2) + (y - c.center.1).powi(2);
                    c.weight * (-d2 / (c.radius * c.radius)).exp()
                })
                .sum()
        }),
    };
    let mass = integrate(&profile);
    if !(mass > 0.0) {
        return Err(Error::param(
            format!("{}.clusters", grid.zone()),
            "initial profile has no mass",
        ));
    }
    profile.scale(z.mass / mass);
    let mut stressed = profile.clone();
    stressed.scale(z.stressed_fraction);
    let mut unstressed = profile;
    unstressed.scale(1.0 - z.stressed_fraction);
    Ok(ZoneState { stressed, unstressed })
}

struct Scratch {
    totals: [Vec<f64>; 2],
    advection: Vec<f64>,
}

/// Preallocated buffers for repeated steps.
struct Workspace {
    k1: [Vec<f64>; 4],
    k2: [Vec<f64>; 4],
    scratch: Scratch,
    stage: NetworkState,
    /// Network mass after the previous step, reused as the next step's baseline.
    mass: Option<f64>,
}

impl Workspace {
    fn new(model: &Model) -> Self {
        let n1 = model.grid(ZoneId::One).len();
        let n2 = model.grid(ZoneId::Two).len();
        let bufs = || [vec![0.0; n1], vec![0.0; n1], vec![0.0; n2], vec![0.0; n2]];
        Workspace {
            k1: bufs(),
            k2: bufs(),
            scratch: Scratch {
                totals: [vec![0.0; n1], vec![0.0; n2]],
                advection: Vec::new(),
            },
            stage: NetworkState {
                t: 0.0,
                zones: [
                    ZoneState::zeros(*model.grid(ZoneId::One)),
                    ZoneState::zeros(*model.grid(ZoneId::Two)),
                ],
            },
            mass: None,
        }
    }
}

/// Field snapshot taken during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: NetworkState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    /// Largest accumulated density seen at a record time; values above 1
    /// mean the speed closure was clamped somewhere.
    pub max_total_density: f64,
    pub final_state: NetworkState,
}

impl RunOutput {
    pub fn last(&self) -> &ObservableRecord {
        self.records
            .last()
            .expect("a run always records its initial state")
    }
}

/// Output cadence of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSchedule {
    pub t_end: f64,
    pub record_interval: f64,
    pub snapshot_times: Vec<f64>,
}

impl RunSchedule {
    pub fn from_config(cfg: &SimulationConfig) -> Self {
        RunSchedule {
            t_end: cfg.numerics.t_end,
            record_interval: cfg.output.record_interval,
            snapshot_times: cfg.output.snapshot_times.clone(),
        }
    }

    /// Sorted, deduplicated times at which the run must land exactly.
    fn events(&self) -> Vec<(f64, bool, bool)> {
        let mut times: Vec<(f64, bool, bool)> = Vec::new();
        let n = (self.t_end / self.record_interval).floor() as usize;
        for k in 1..=n {
            let t = k as f64 * self.record_interval;
            if t <= self.t_end {
                times.push((t, true, false));
            }
        }
        if self.t_end > 0.0 {
            times.push((self.t_end, true, false));
        }
        for &s in &self.snapshot_times {
            if s > 0.0 && s <= self.t_end {
                times.push((s, false, true));
            }
        }
        times.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, bool, bool)> = Vec::new();
        for (t, r, s) in times {
            match merged.last_mut() {
                Some(last) if (last.0 - t).abs() <= 1e-9 * t.max(1.0) => {
                    last.1 |= r;
                    last.2 |= s;
                }
                _ => merged.push((t, r, s)),
            }
        }
        merged
    }
}

/// Integrates `initial` to `schedule.t_end`.
///
/// Records are emitted at `t = 0` and every `record_interval` (plus `t_end`);
/// steps are shortened to land exactly on record and snapshot times. The
/// network mass is checked against its initial value at every record.
pub fn run(model: &Model, initial: NetworkState, schedule: &RunSchedule) -> Result<RunOutput> {
    model.check_state(&initial)?;
    let mut state = initial;
    let mut ws = Workspace::new(model);
    let dt_stable = model.compute_dt(&state);
    let v0 = state.total_mass();
    let tol = model.numerics.conservation_tol;
    let mut records = vec![record(&state, 0.0)];
    let mut snapshots = Vec::new();
    if schedule.snapshot_times.contains(&0.0) {
        snapshots.push(Snapshot {
            t: 0.0,
            state: state.clone(),
        });
    }
    let mut max_total_density = max_density(&state);
    let mut steps = 0usize;
    for (target, is_record, is_snapshot) in schedule.events() {
        let mut last_dt = 0.0;
        while state.t < target {
            let remaining = target - state.t;
            let (dt, lands) = if remaining <= dt_stable * (1.0 + 1e-12) {
                (remaining, true)
            } else {
                (dt_stable, false)
            };
            model.step_in_place(&mut state, dt, &mut ws)?;
            if lands {
                state.t = target;
            }
            last_dt = dt;
            steps += 1;
        }
        if is_record {
            let rec = record(&state, last_dt);
            if (rec.v - v0).abs() > tol {
                return Err(Error::Invariant(Box::new(InvariantReport {
                    kind: InvariantKind::Conservation,
                    t: state.t,
                    dt: last_dt,
                    field: None,
                    cell: None,
                    value: (rec.v - v0).abs(),
                    tolerance: tol,
                    breakdown: None,
                })));
            }
            max_total_density = max_total_density.max(max_density(&state));
            records.push(rec);
        }
        if is_snapshot {
            snapshots.push(Snapshot {
                t: state.t,
                state: state.clone(),
            });
        }
    }
    Ok(RunOutput {
        records,
        snapshots,
        steps,
        max_total_density,
        final_state: state,
    })
}

/// True when every value is finite and `>= -tol`. Branch-free so the common
/// all-good case stays cheap.
fn all_admissible(values: &[f64], tol: f64) -> bool {
    let mut ok = true;
    for &v in values {
        ok &= v >= -tol && v < f64::INFINITY;
    }
    ok
}

fn max_density(state: &NetworkState) -> f64 {
    state
        .zones
        .iter()
        .flat_map(|z| {
            z.stressed
                .values()
                .iter()
                .zip(z.unstressed.values())
                .map(|(a, b)| a + b)
        })
        .fold(0.0, f64::max)
}

/// Convenience: build the model and initial state from a config and run it.
pub fn simulate(cfg: &SimulationConfig) -> Result<RunOutput> {
    let model = Model::from_config(cfg)?;
    let initial = model.initial_state(cfg)?;
    run(&model, initial, &RunSchedule::from_config(cfg))
}
