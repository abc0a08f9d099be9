//! Nonlocal coupling between the two zones.
//!
//! One [`MigrationKernel`] describes one directed channel (source zone to
//! destination zone). A density `u` on the source loses `m p(x) u(x)`
//! locally, and the destination gains `eps(y) m I` with
//! `I = integral of p u over the source`. Because `eps` integrates to one on
//! the destination grid, whatever leaves one zone arrives in the other.
//! The same channel is applied to each species independently.

use crate::error::{Error, Result};
use crate::grid::{dot_in_order, integrate, sum_in_order, Field, Grid};

/// Tolerance on the discrete normalization of a reception kernel.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// `exp(-|x - center|^2 / radius^2)` sampled at cell centers.
pub fn gaussian_kernel(grid: &Grid, center: (f64, f64), radius: f64) -> Result<Field> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    let r2 = radius * radius;
    Ok(grid.sample(|x, y| {
        let d2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        (-d2 / r2).exp()
    }))
}

/// Scales `raw` so that its discrete integral is exactly one (to round-off).
pub fn normalize_reception(raw: &Field) -> Result<Field> {
    let total = integrate(raw);
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::param(
            "reception",
            format!("kernel integral must be positive, got {total}"),
        ));
    }
    let mut out = raw.clone();
    out.scale(1.0 / total);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MigrationKernel {
    departure: Field,
    reception: Field,
    proportion: f64,
}

impl MigrationKernel {
    /// `departure` lives on the source grid with values in `[0, 1]`,
    /// `reception` on the destination grid, nonnegative with unit integral.
    pub fn new(departure: Field, reception: Field, proportion: f64) -> Result<Self> {
        if departure.grid().zone() == reception.grid().zone() {
            return Err(Error::GridMismatch(format!(
                "departure and reception kernels both on {}",
                departure.grid().zone()
            )));
        }
        if let Some(v) = departure.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(
                "departure",
                format!("probability {v} outside [0, 1]"),
            ));
        }
        if let Some(v) = reception.values().iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::param(
                "reception",
                format!("negative or non-finite value {v}"),
            ));
        }
        let mass = integrate(&reception);
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::param(
                "reception",
                format!("kernel integrates to {mass}, expected 1"),
            ));
        }
        if !(0.0..=1.0).contains(&proportion) {
            return Err(Error::param(
                "m",
                format!("migrating proportion must lie in [0, 1], got {proportion}"),
            ));
        }
        Ok(MigrationKernel {
            departure,
            reception,
            proportion,
        })
    }

    pub fn departure(&self) -> &Field {
        &self.departure
    }

    pub fn reception(&self) -> &Field {
        &self.reception
    }

    pub fn proportion(&self) -> f64 {
        self.proportion
    }

    pub fn source(&self) -> &Grid {
        self.departure.grid()
    }

    pub fn destination(&self) -> &Grid {
        self.reception.grid()
    }

    /// `I = integral of p u` over the source.
    pub fn departing_integral(&self, u_src: &[f64]) -> f64 {
        self.source().cell_area() * dot_in_order(self.departure.values(), u_src)
    }

    /// Adds `-m p u` to `out` on the source grid.
    pub(crate) fn add_outflow(&self, u_src: &[f64], out: &mut [f64]) {
        let m = self.proportion;
        if m == 0.0 {
            return;
        }
        for ((o, &p), &u) in out.iter_mut().zip(self.departure.values()).zip(u_src) {
            *o -= m * p * u;
        }
    }

    /// Adds `eps m I` to `out` on the destination grid.
    pub(crate) fn add_inflow(&self, departing: f64, out: &mut [f64]) {
        let rate = self.proportion * departing;
        if rate == 0.0 {
            return;
        }
        for (o, &e) in out.iter_mut().zip(self.reception.values()) {
            *o += e * rate;
        }
    }

    pub fn max_departure(&self) -> f64 {
        self.departure.max()
    }

    pub fn max_reception(&self) -> f64 {
        self.reception.max()
    }

    /// Total departure mass `sum p` (no cell area), exposed for diagnostics.
    pub fn departure_weight(&self) -> f64 {
        sum_in_order(self.departure.values())
    }
}

/// Migration contributions `(on source grid, on destination grid)`.
///
/// With `reverse` set (bidirectional coupling), the channel from the
/// destination back to the source is added as well.
pub fn migration_rhs(
    u_src: &Field,
    u_dst: &Field,
    forward: &MigrationKernel,
    reverse: Option<&MigrationKernel>,
) -> Result<(Field, Field)> {
    if !u_src.grid().same_as(forward.source()) {
        return Err(Error::GridMismatch("source density vs departure kernel".into()));
    }
    if !u_dst.grid().same_as(forward.destination()) {
        return Err(Error::GridMismatch(
            "destination density vs reception kernel".into(),
        ));
    }
    if let Some(rev) = reverse {
        if !rev.source().same_as(forward.destination()) || !rev.destination().same_as(forward.source()) {
            return Err(Error::GridMismatch(
                "reverse channel does not mirror forward".into(),
            ));
        }
    }
    let mut src_out = Field::zeros(*u_src.grid());
    let mut dst_out = Field::zeros(*u_dst.grid());
    forward.add_outflow(u_src.values(), src_out.values_mut());
    forward.add_inflow(forward.departing_integral(u_src.values()), dst_out.values_mut());
    if let Some(rev) = reverse {
        rev.add_outflow(u_dst.values(), dst_out.values_mut());
        rev.add_inflow(rev.departing_integral(u_dst.values()), src_out.values_mut());
    }
    Ok((src_out, dst_out))
}
