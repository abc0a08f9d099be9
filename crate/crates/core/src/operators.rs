//! Spatial transport operators: 5-point diffusion and first-order upwind
//! advection with the linear speed closure `v(u) = v_max (1 - u)`.
//!
//! Both operators are written in flux form over cell faces. Each interior
//! face flux is added to one cell and subtracted from its neighbour, and
//! boundary faces carry no flux, so the discrete integral of the output
//! vanishes up to round-off.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Desired-direction field: a unit vector (or zero) per cell.
///
/// Face-normal components (the average of the two adjacent cells) are
/// precomputed because the upwind kernel only ever reads those.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    grid: Grid,
    fx: Vec<f64>,
    fy: Vec<f64>,
    x_faces: Vec<f64>,
    y_faces: Vec<f64>,
}

const UNIT_TOL: f64 = 1e-12;

impl DirectionField {
    /// All-zero directions (no advection at all).
    pub fn zero(grid: Grid) -> Self {
        Self::assemble(grid, vec![0.0; grid.len()], vec![0.0; grid.len()])
    }

    /// Builds a field from explicit components; every cell must be a unit
    /// vector or exactly zero.
    pub fn from_components(grid: Grid, fx: Vec<f64>, fy: Vec<f64>) -> Result<Self> {
        if fx.len() != grid.len() || fy.len() != grid.len() {
            return Err(Error::GridMismatch("direction components vs grid".into()));
        }
        for (k, (&a, &b)) in fx.iter().zip(&fy).enumerate() {
            let n2 = a * a + b * b;
            let ok = (a == 0.0 && b == 0.0) || (n2 - 1.0).abs() <= UNIT_TOL;
            if !ok {
                let (i, j) = grid.cell_of(k);
                return Err(Error::param(
                    "direction",
                    format!("cell ({i},{j}) has |nu|^2 = {n2}, expected 0 or 1"),
                ));
            }
        }
        Ok(Self::assemble(grid, fx, fy))
    }

    fn assemble(grid: Grid, fx: Vec<f64>, fy: Vec<f64>) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut x_faces = Vec::with_capacity((nx - 1) * ny);
        for j in 0..ny {
            for i in 0..nx - 1 {
                let k = j * nx + i;
                x_faces.push(0.5 * (fx[k] + fx[k + 1]));
            }
        }
        let mut y_faces = Vec::with_capacity(nx * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx {
                let k = j * nx + i;
                y_faces.push(0.5 * (fy[k] + fy[k + nx]));
            }
        }
        DirectionField {
            grid,
            fx,
            fy,
            x_faces,
            y_faces,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.index(i, j);
        (self.fx[k], self.fy[k])
    }

    pub fn components(&self) -> (&[f64], &[f64]) {
        (&self.fx, &self.fy)
    }

    pub fn is_zero(&self) -> bool {
        self.fx.iter().chain(&self.fy).all(|&v| v == 0.0)
    }
}

/// Unit vectors pointing from each cell center toward `target`.
///
/// Cells touching the boundary get the zero vector (no desired motion on the
/// wall), as does the cell that contains the target itself.
pub fn build_direction_field(grid: &Grid, target: (f64, f64)) -> Result<DirectionField> {
    let Some(target_cell) = grid.locate(target) else {
        let ((xa, xb), (ya, yb)) = grid.extent();
        return Err(Error::param(
            format!("{}.target", grid.zone()),
            format!(
                "({}, {}) lies outside [{xa}, {xb}] x [{ya}, {yb}]",
                target.0, target.1
            ),
        ));
    };
    let mut fx = vec![0.0; grid.len()];
    let mut fy = vec![0.0; grid.len()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            if grid.is_boundary_adjacent(i, j) || (i, j) == target_cell {
                continue;
            }
            let (x, y) = grid.cell_center(i, j);
            let (dx, dy) = (target.0 - x, target.1 - y);
            let r = dx.hypot(dy);
            if r > 0.0 {
                let k = grid.index(i, j);
                fx[k] = dx / r;
                fy[k] = dy / r;
            }
        }
    }
    Ok(DirectionField::assemble(*grid, fx, fy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvectionParams {
    pub v_max: f64,
}

impl AdvectionParams {
    pub fn new(v_max: f64) -> Result<Self> {
        if !(v_max >= 0.0 && v_max.is_finite()) {
            return Err(Error::param(
                "v_max",
                format!("must be finite and >= 0, got {v_max}"),
            ));
        }
        Ok(AdvectionParams { v_max })
    }
}

/// `d * Laplacian(f)` with homogeneous Neumann boundaries.
pub fn laplacian(f: &Field, d: f64) -> Result<Field> {
    check_diffusivity(d)?;
    let mut out = Field::zeros(*f.grid());
    add_laplacian(f.grid(), f.values(), d, out.values_mut());
    Ok(out)
}

pub(crate) fn check_diffusivity(d: f64) -> Result<()> {
    if d >= 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "d",
            format!("diffusivity must be finite and >= 0, got {d}"),
        ))
    }
}

/// Accumulates `d * Laplacian(f)` into `out`.
///
/// Each cell adds the differences of its face fluxes. Boundary faces carry
/// zero flux, which is the 5-point stencil on the mirror-extended field.
pub(crate) fn add_laplacian(grid: &Grid, f: &[f64], d: f64, out: &mut [f64]) {
    if d == 0.0 {
        return;
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let cx = d / (grid.hx() * grid.hx());
    let cy = d / (grid.hy() * grid.hy());
    for j in 0..ny {
        let row = j * nx;
        let c = &f[row..row + nx];
        let o = &mut out[row..row + nx];
        o[0] += cx * (c[1] - c[0]);
        for i in 1..nx - 1 {
            o[i] += cx * (c[i + 1] - c[i]) - cx * (c[i] - c[i - 1]);
        }
        o[nx - 1] -= cx * (c[nx - 1] - c[nx - 2]);
        if j > 0 {
            let below = &f[row - nx..row];
            for ((o, &c), &b) in o.iter_mut().zip(c).zip(below) {
                *o -= cy * (c - b);
            }
        }
        if j + 1 < ny {
            let above = &f[row + nx..row + 2 * nx];
            for ((o, &c), &a) in o.iter_mut().zip(c).zip(above) {
                *o += cy * (a - c);
            }
        }
    }
}

/// `-div(v(total) * nu * f)` by first-order upwinding of face fluxes.
///
/// `total` is the density that enters the speed closure (the accumulated
/// density `u_P + u_N` of the zone, or the species itself).
pub fn advective_divergence(
    f: &Field,
    total: &Field,
    dir: &DirectionField,
    p: AdvectionParams,
) -> Result<Field> {
    f.ensure_same_grid(total, "advected density vs speed density")?;
    if !f.grid().same_as(dir.grid()) {
        return Err(Error::GridMismatch("advected density vs direction field".into()));
    }
    let mut out = Field::zeros(*f.grid());
    add_advection(
        dir,
        f.values(),
        total.values(),
        p.v_max,
        out.values_mut(),
        &mut Vec::new(),
    );
    Ok(out)
}

/// Accumulates the upwind advective divergence into `out`. `buf` is
/// scratch space, grown as needed.
pub(crate) fn add_advection(
    dir: &DirectionField,
    f: &[f64],
    total: &[f64],
    v_max: f64,
    out: &mut [f64],
    buf: &mut Vec<f64>,
) {
    if v_max == 0.0 {
        return;
    }
    advect(dir, total, [(f, v_max, out)], buf);
}

/// Both species of a zone in one sweep; the face speeds depend only on
/// `total` and are computed once.
pub(crate) fn add_advection_pair(
    dir: &DirectionField,
    total: &[f64],
    (p, v_p, dp): (&[f64], f64, &mut [f64]),
    (n, v_n, dn): (&[f64], f64, &mut [f64]),
    buf: &mut Vec<f64>,
) {
    if v_p == 0.0 && v_n == 0.0 {
        return;
    }
    advect(dir, total, [(p, v_p, dp), (n, v_n, dn)], buf);
}

/// Face weights `max(1 - avg total, 0) * nu / h` are split into their
/// positive and negative parts so upwinding needs no branch; face fluxes of
/// one row are staged in `buf` and then differenced.
fn advect<const S: usize>(
    dir: &DirectionField,
    total: &[f64],
    mut species: [(&[f64], f64, &mut [f64]); S],
    buf: &mut Vec<f64>,
) {
    let grid = &dir.grid;
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv_hx = 1.0 / grid.hx();
    let inv_hy = 1.0 / grid.hy();
    buf.resize(3 * nx, 0.0);
    let (wp, rest) = buf.split_at_mut(nx);
    let (wm, flux) = rest.split_at_mut(nx);

    for j in 0..ny {
        let row = j * nx;
        let faces = &dir.x_faces[j * (nx - 1)..(j + 1) * (nx - 1)];
        let t = &total[row..row + nx];
        for (((p, m), &nu), (&tl, &tr)) in wp
            .iter_mut()
            .zip(wm.iter_mut())
            .zip(faces)
            .zip(t.iter().zip(&t[1..]))
        {
            let w = (1.0 - 0.5 * (tl + tr)).max(0.0) * nu * inv_hx;
            *p = w.max(0.0);
            *m = w.min(0.0);
        }
        for (f, v, out) in species.iter_mut() {
            let f = &f[row..row + nx];
            let out = &mut out[row..row + nx];
            for ((((fl, &p), &m), &a), &b) in flux.iter_mut().zip(&*wp).zip(&*wm).zip(f).zip(&f[1..]) {
                *fl = *v * (p * a + m * b);
            }
            out[0] -= flux[0];
            for ((o, &l), &r) in out[1..nx - 1]
                .iter_mut()
                .zip(&flux[..nx - 2])
                .zip(&flux[1..nx - 1])
            {
                *o += l - r;
            }
            out[nx - 1] += flux[nx - 2];
        }
    }
    for j in 0..ny - 1 {
        let row = j * nx;
        let faces = &dir.y_faces[row..row + nx];
        let (tb, tt) = (&total[row..row + nx], &total[row + nx..row + 2 * nx]);
        for (((p, m), &nu), (&b, &t)) in wp.iter_mut().zip(wm.iter_mut()).zip(faces).zip(tb.iter().zip(tt)) {
            let w = (1.0 - 0.5 * (b + t)).max(0.0) * nu * inv_hy;
            *p = w.max(0.0);
            *m = w.min(0.0);
        }
        for (f, v, out) in species.iter_mut() {
            let (fb, ft) = (&f[row..row + nx], &f[row + nx..row + 2 * nx]);
            let (lo, hi) = out.split_at_mut(row + nx);
            let (ob, ot) = (&mut lo[row..], &mut hi[..nx]);
            for (((((ob, ot), &p), &m), &a), &b) in ob
                .iter_mut()
                .zip(ot.iter_mut())
                .zip(&*wp)
                .zip(&*wm)
                .zip(fb)
                .zip(ft)
            {
                let fl = *v * (p * a + m * b);
                *ob -= fl;
                *ot += fl;
            }
        }
    }
    let _ = flux;
}

/// Largest step for which a forward-Euler advection update stays
/// nonnegative: up to four faces can drain a cell, each at speed <= `v_max`.
pub fn advective_dt_bound(grid: &Grid, v_max: f64) -> f64 {
    if v_max == 0.0 {
        f64::INFINITY
    } else {
        grid.hx().min(grid.hy()) / (4.0 * v_max)
    }
}

/// Largest forward-Euler step keeping explicit diffusion positive.
pub fn diffusive_dt_bound(grid: &Grid, d: f64) -> f64 {
    if d == 0.0 {
        return f64::INFINITY;
    }
    let (hx2, hy2) = (grid.hx() * grid.hx(), grid.hy() * grid.hy());
    hx2 * hy2 / (2.0 * d * (hx2 + hy2))
}
