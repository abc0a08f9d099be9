//! Uniform cell-centered grids and the scalar fields that live on them.
//!
//! Cells are stored row-major with `x` varying fastest, so cell `(i, j)` sits
//! at flat index `j * nx + i`. This is also the point order of the VTK
//! structured-points writer.

use std::fmt;

use crate::error::{Error, Result};

/// Which of the two zones a grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZoneId {
    One,
    Two,
}

impl ZoneId {
    pub fn number(self) -> u8 {
        match self {
            ZoneId::One => 1,
            ZoneId::Two => 2,
        }
    }

    pub fn index(self) -> usize {
        self.number() as usize - 1
    }

    pub fn other(self) -> ZoneId {
        match self {
            ZoneId::One => ZoneId::Two,
            ZoneId::Two => ZoneId::One,
        }
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zone{}", self.number())
    }
}

/// A uniform rectangular mesh with `nx * ny` cells.
///
/// Each zone lives in its own coordinate frame; two grids are never related
/// geometrically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
    zone: ZoneId,
}

pub const MIN_CELLS: usize = 4;

impl Grid {
    pub fn new(nx: usize, ny: usize, x0: f64, y0: f64, hx: f64, hy: f64, zone: ZoneId) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "{zone}: need at least {MIN_CELLS}x{MIN_CELLS} cells, got {nx}x{ny}"
            )));
        }
        if !(hx > 0.0 && hx.is_finite() && hy > 0.0 && hy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "{zone}: spacings must be positive and finite, got hx={hx}, hy={hy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid(format!("{zone}: non-finite origin")));
        }
        Ok(Grid {
            nx,
            ny,
            x0,
            y0,
            hx,
            hy,
            zone,
        })
    }

    /// Grid covering the rectangle `[x0, x0 + width] x [y0, y0 + height]`.
    pub fn covering(
        nx: usize,
        ny: usize,
        origin: (f64, f64),
        size: (f64, f64),
        zone: ZoneId,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!("{zone}: zero cell count")));
        }
        Grid::new(
            nx,
            ny,
            origin.0,
            origin.1,
            size.0 / nx as f64,
            size.1 / ny as f64,
            zone,
        )
    }

    /// Unit square `[0,1]^2` with `n x n` cells.
    pub fn unit_square(n: usize, zone: ZoneId) -> Result<Self> {
        Grid::covering(n, n, (0.0, 0.0), (1.0, 1.0), zone)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    pub fn zone(&self) -> ZoneId {
        self.zone
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Total area of the rectangle.
    pub fn area(&self) -> f64 {
        self.cell_area() * self.len() as f64
    }

    pub fn extent(&self) -> ((f64, f64), (f64, f64)) {
        (
            (self.x0, self.x0 + self.nx as f64 * self.hx),
            (self.y0, self.y0 + self.ny as f64 * self.hy),
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn cell_of(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x0 + (i as f64 + 0.5) * self.hx,
            self.y0 + (j as f64 + 0.5) * self.hy,
        )
    }

    /// The cell whose closed rectangle contains `p`, or `None` outside the domain.
    pub fn locate(&self, p: (f64, f64)) -> Option<(usize, usize)> {
        let ((xa, xb), (ya, yb)) = self.extent();
        if !(p.0 >= xa && p.0 <= xb && p.1 >= ya && p.1 <= yb) {
            return None;
        }
        let i = (((p.0 - self.x0) / self.hx).floor() as usize).min(self.nx - 1);
        let j = (((p.1 - self.y0) / self.hy).floor() as usize).min(self.ny - 1);
        Some((i, j))
    }

    #[inline]
    pub fn is_boundary_adjacent(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Same discretization (shape, frame and zone).
    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }

    /// Field sampled from `f(x, y)` at every cell center.
    pub fn sample(&self, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Field { grid: *self, values }
    }

    /// Field built from cell indices.
    pub fn sample_cells(&self, mut f: impl FnMut(usize, usize) -> f64) -> Field {
        let mut values = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                values.push(f(i, j));
            }
        }
        Field { grid: *self, values }
    }
}

/// Cell-centered scalar density on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Smallest value together with its flat index.
    pub fn min_with_index(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (k, &v) in self.values.iter().enumerate() {
            if v < best.0 || v.is_nan() {
                best = (v, k);
                if v.is_nan() {
                    break;
                }
            }
        }
        best
    }

    pub fn min(&self) -> f64 {
        self.min_with_index().0
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plain (unweighted) l1 norm of the cell values.
    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn ensure_same_grid(&self, other: &Field, what: &str) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {} {}x{} vs {} {}x{}",
                self.grid.zone(),
                self.grid.nx(),
                self.grid.ny(),
                other.grid.zone(),
                other.grid.nx(),
                other.grid.ny()
            )))
        }
    }

    /// `self + s * other`, pointwise.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other, "axpy")?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }
}

/// Midpoint quadrature of `f` over its grid.
///
/// The summation order is fixed so results are reproducible bit for bit.
pub fn integrate(f: &Field) -> f64 {
    f.grid.cell_area() * sum_in_order(&f.values)
}

/// Sum with four interleaved accumulators combined in a fixed order, so the
/// result is reproducible bit for bit.
#[inline]
pub(crate) fn sum_in_order(values: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = values.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for v in rest {
        s += v;
    }
    s
}

/// `sum a_k b_k` with the same fixed accumulation order as [`sum_in_order`].
#[inline]
pub(crate) fn dot_in_order(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut k = 0;
    while k + 4 <= n {
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
        k += 4;
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    while k < n {
        s += a[k] * b[k];
        k += 1;
    }
    s
}

/// A field padded with one layer of ghost cells, `(nx + 2) x (ny + 2)`.
///
/// Corner ghosts are filled too (they copy the corner cell) although the
/// 5-point stencil never reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostedField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl GhostedField {
    /// Value at padded coordinates; interior cell `(i, j)` is `(i + 1, j + 1)`.
    #[inline]
    pub fn at_padded(&self, ip: usize, jp: usize) -> f64 {
        self.values[jp * (self.nx + 2) + ip]
    }

    /// Value at interior-relative coordinates, accepting `-1` and `n` for ghosts.
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.at_padded((i + 1) as usize, (j + 1) as usize)
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        (self.nx + 2, self.ny + 2)
    }
}

/// Mirror extension implementing a homogeneous Neumann condition: every ghost
/// equals its adjacent interior cell.
pub fn neumann_extend(f: &Field) -> GhostedField {
    let (nx, ny) = (f.grid.nx(), f.grid.ny());
    let w = nx + 2;
    let mut values = vec![0.0; w * (ny + 2)];
    for jp in 0..ny + 2 {
        let j = jp.saturating_sub(1).min(ny - 1);
        for ip in 0..nx + 2 {
            let i = ip.saturating_sub(1).min(nx - 1);
            values[jp * w + ip] = f.values[j * nx + i];
        }
    }
    GhostedField { nx, ny, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_rejects_tiny_or_degenerate() {
        assert!(Grid::unit_square(3, ZoneId::One).is_err());
        assert!(Grid::new(4, 4, 0.0, 0.0, 0.0, 0.1, ZoneId::One).is_err());
        assert!(Grid::new(4, 4, 0.0, 0.0, 0.1, -1.0, ZoneId::One).is_err());
    }

    #[test]
    fn cell_centers_and_area() {
        let g = Grid::new(8, 5, -1.0, 2.0, 0.25, 0.5, ZoneId::Two).unwrap();
        assert_eq!(g.cell_center(0, 0), (-0.875, 2.25));
        assert_eq!(g.cell_center(7, 4), (-1.0 + 7.5 * 0.25, 2.0 + 4.5 * 0.5));
        assert_eq!(g.cell_area(), 0.125);
        assert_eq!(g.locate((-0.9, 2.1)), Some((0, 0)));
        assert_eq!(g.locate((1.0, 4.5)), Some((7, 4)));
        assert_eq!(g.locate((1.01, 3.0)), None);
    }

    #[test]
    fn integrate_constant_and_zero() {
        let g = Grid::new(10, 10, 0.0, 0.0, 0.1, 0.1, ZoneId::One).unwrap();
        assert_relative_eq!(integrate(&Field::constant(g, 1.0)), 1.0, max_relative = 1e-14);
        assert_eq!(integrate(&Field::zeros(g)), 0.0);
    }

    #[test]
    fn integrate_gaussian_matches_fine_quadrature() {
        // Frozen from a 1024x1024 midpoint sum of exp(-|x-(0.5,0.5)|^2/0.01) on [0,1]^2,
        // computed outside the crate.
        const FINE: f64 = 0.031_415_926_535_801_35;
        let g = Grid::unit_square(64, ZoneId::One).unwrap();
        let f = g.sample(|x, y| (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / 0.01).exp());
        assert_relative_eq!(integrate(&f), FINE, max_relative = 1e-4);
    }

    #[test]
    fn integrate_is_linear() {
        let g = Grid::unit_square(16, ZoneId::One).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = g.sample(|_, _| rng.gen::<f64>());
        let h = g.sample(|_, _| rng.gen::<f64>() - 0.5);
        let combo = f.axpy(-2.5, &h).unwrap();
        assert_relative_eq!(
            integrate(&combo),
            integrate(&f) - 2.5 * integrate(&h),
            epsilon = 1e-14
        );
    }

    #[test]
    fn neumann_ghosts_mirror_interior() {
        let g = Grid::unit_square(6, ZoneId::One).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = g.sample(|_, _| rng.gen::<f64>());
        let e = neumann_extend(&f);
        let (n, m) = (6isize, 6isize);
        for j in 0..m {
            assert_eq!(e.at(-1, j), e.at(0, j));
            assert_eq!(e.at(n, j), e.at(n - 1, j));
        }
        for i in 0..n {
            assert_eq!(e.at(i, -1), e.at(i, 0));
            assert_eq!(e.at(i, m), e.at(i, m - 1));
        }
        for j in 0..6 {
            for i in 0..6 {
                assert_eq!(e.at(i as isize, j as isize), f.at(i, j));
            }
        }
    }

    #[test]
    fn neumann_linear_field_has_zero_boundary_difference() {
        let g = Grid::unit_square(8, ZoneId::One).unwrap();
        let f = g.sample(|x, _| 3.0 * x + 1.0);
        let e = neumann_extend(&f);
        for j in 0..8 {
            assert_eq!(e.at(-1, j) - e.at(0, j), 0.0);
            assert_eq!(e.at(8, j) - e.at(7, j), 0.0);
        }
    }

    #[test]
    fn neumann_constant_ghosts() {
        let g = Grid::unit_square(5, ZoneId::Two).unwrap();
        let e = neumann_extend(&Field::constant(g, 2.5));
        let (w, h) = e.padded_dims();
        for jp in 0..h {
            for ip in 0..w {
                assert_eq!(e.at_padded(ip, jp), 2.5);
            }
        }
    }
}
