//! Grid self-convergence studies.
//!
//! Level `k` refines both zones of the base configuration by `2^k` in each
//! direction; the step size follows from the stability bound, so it shrinks
//! with the mesh. Successive terminal `u_P1` fields are compared after
//! averaging the finer one onto the coarser grid, and three consecutive
//! levels give an observed order `log2(d_k / d_{k+1})`.

use crate::error::{Error, Result};
use crate::grid::{integrate, Field, Grid};
use crate::io::config::SimulationConfig;
use crate::stepper::{run, Model, RunSchedule};

pub const MIN_LEVELS: usize = 3;

/// Order required of the first-order scheme.
pub const REQUIRED_ORDER: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub terminal_m_p1: f64,
    pub terminal_p1: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<Level>,
    /// `L1` distance between level `k` and level `k + 1` averaged onto `k`.
    pub differences: Vec<f64>,
    /// Observed order from each triple of consecutive levels.
    pub orders: Vec<f64>,
    /// `|M_P1(k) - M_P1(finest)|` for every coarser level.
    pub mass_errors: Vec<f64>,
}

impl ConvergenceReport {
    /// Order from the three finest levels.
    pub fn observed_order(&self) -> f64 {
        *self.orders.last().expect("at least three levels")
    }
}

/// Averages each 2x2 block of `fine` onto a grid with half the cells.
pub fn restrict(fine: &Field) -> Result<Field> {
    let g = fine.grid();
    if !g.nx().is_multiple_of(2) || !g.ny().is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "cannot coarsen {}x{}: odd dimension",
            g.nx(),
            g.ny()
        )));
    }
    let (nx, ny) = (g.nx() / 2, g.ny() / 2);
    let (x0, y0) = g.origin();
    let coarse = Grid::new(nx, ny, x0, y0, 2.0 * g.hx(), 2.0 * g.hy(), g.zone())?;
    Ok(coarse.sample_cells(|i, j| {
        0.25 * (fine.at(2 * i, 2 * j)
            + fine.at(2 * i + 1, 2 * j)
            + fine.at(2 * i, 2 * j + 1)
            + fine.at(2 * i + 1, 2 * j + 1))
    }))
}

fn refined(cfg: &SimulationConfig, factor: usize) -> SimulationConfig {
    let mut c = cfg.clone();
    for z in [&mut c.zone1, &mut c.zone2] {
        z.nx *= factor;
        z.ny *= factor;
    }
    c
}

fn run_level(cfg: &SimulationConfig) -> Result<Level> {
    let model = Model::from_config(cfg)?;
    let initial = model.initial_state(cfg)?;
    let dt = model.compute_dt(&initial);
    let schedule = RunSchedule {
        t_end: cfg.numerics.t_end,
        record_interval: cfg.numerics.t_end.max(f64::MIN_POSITIVE),
        snapshot_times: Vec::new(),
    };
    let out = run(&model, initial, &schedule)?;
    let p1 = out.final_state.zone1().stressed.clone();
    Ok(Level {
        nx: cfg.zone1.nx,
        ny: cfg.zone1.ny,
        dt,
        terminal_m_p1: integrate(&p1),
        terminal_p1: p1,
    })
}

/// Runs `levels` refinements of `cfg`, coarsest first.
pub fn study(cfg: &SimulationConfig, levels: usize) -> Result<ConvergenceReport> {
    if levels < MIN_LEVELS {
        return Err(Error::param(
            "levels",
            format!("need at least {MIN_LEVELS} levels for an observed order, got {levels}"),
        ));
    }
    let mut runs = Vec::with_capacity(levels);
    for k in 0..levels {
        runs.push(run_level(&refined(cfg, 1 << k))?);
    }
    let mut differences = Vec::with_capacity(levels - 1);
    for w in runs.windows(2) {
        let avg = restrict(&w[1].terminal_p1)?;
        let diff = w[0].terminal_p1.axpy(-1.0, &avg)?;
        differences.push(diff.abs_sum() * diff.grid().cell_area());
    }
    let orders = differences.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
    let finest = runs.last().map(|l| l.terminal_m_p1).unwrap_or(0.0);
    let mass_errors = runs[..levels - 1]
        .iter()
        .map(|l| (l.terminal_m_p1 - finest).abs())
        .collect();
    Ok(ConvergenceReport {
        levels: runs,
        differences,
        orders,
        mass_errors,
    })
}

/// Pure diffusion of a cosine profile in zone 1: no kinetics, drift,
/// migration or control. Zone 2 stays empty.
pub fn diffusion_config(n: usize, t_end: f64) -> SimulationConfig {
    let mut cfg = SimulationConfig::default();
    for z in [&mut cfg.zone1, &mut cfg.zone2] {
        z.nx = n;
        z.ny = n;
        z.v_p_max = 0.0;
        z.v_n_max = 0.0;
        z.a = 0.0;
        z.b = 0.0;
        z.alpha_p = 0.0;
        z.alpha_n = 0.0;
        z.initial = crate::io::config::InitialProfile::Cosine;
    }
    cfg.zone1.mass = 1.0;
    cfg.zone2.mass = 0.0;
    cfg.coupling.m_1to2 = 0.0;
    cfg.coupling.m_2to1 = 0.0;
    cfg.control = crate::control::ControlParams::off();
    cfg.numerics.t_end = t_end;
    cfg.output.snapshot_times = Vec::new();
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ZoneId;

    #[test]
    fn restriction_preserves_integrals() {
        let g = Grid::unit_square(8, ZoneId::One).unwrap();
        let f = g.sample(|x, y| x * x + (3.0 * y).sin());
        let c = restrict(&f).unwrap();
        assert_eq!(c.grid().nx(), 4);
        assert!((integrate(&c) - integrate(&f)).abs() < 1e-15);
    }

    #[test]
    fn restriction_of_linear_data_is_exact() {
        let g = Grid::unit_square(8, ZoneId::One).unwrap();
        let c = restrict(&g.sample(|x, y| 2.0 * x - y)).unwrap();
        for j in 0..4 {
            for i in 0..4 {
                let (x, y) = c.grid().cell_center(i, j);
                assert!((c.at(i, j) - (2.0 * x - y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn too_few_levels() {
        let err = study(&diffusion_config(8, 0.01), 2).unwrap_err();
        assert!(err.to_string().contains("levels"));
    }

    #[test]
    fn coarse_diffusion_is_second_order() {
        let r = study(&diffusion_config(8, 0.05), 3).unwrap();
        assert_eq!(r.levels.iter().map(|l| l.nx).collect::<Vec<_>>(), vec![8, 16, 32]);
        assert!(r.observed_order() > 1.8, "{:?}", r.orders);
        // pure diffusion conserves mass at every level
        assert!(r.mass_errors.iter().all(|&e| e < 1e-12));
    }
}
