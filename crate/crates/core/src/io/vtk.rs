//! Legacy ASCII VTK snapshots (`STRUCTURED_POINTS`), one file per zone.
//!
//! Points sit at cell centers, so `ORIGIN` is the first center and
//! `SPACING` the cell size. Values are x-fastest, matching [`Grid::index`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, ZoneId};
use crate::stepper::ZoneState;

/// `zone{1,2}_t{t}.vtk`.
pub fn snapshot_file_name(zone: ZoneId, t: f64) -> String {
    format!("zone{}_t{}.vtk", zone.number(), t)
}

pub fn snapshot_to_string(state: &ZoneState, t: f64) -> String {
    let g = state.grid();
    let (cx, cy) = g.cell_center(0, 0);
    let mut out = String::with_capacity(64 * g.len());
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{} densities at t={}", g.zone(), t);
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(out, "DIMENSIONS {} {} 1", g.nx(), g.ny());
    let _ = writeln!(out, "ORIGIN {cx:?} {cy:?} 0");
    let _ = writeln!(out, "SPACING {:?} {:?} 1", g.hx(), g.hy());
    let _ = writeln!(out, "POINT_DATA {}", g.len());
    for (name, f) in [("u_P", &state.stressed), ("u_N", &state.unstressed)] {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in f.values() {
            let _ = writeln!(out, "{v:.16e}");
        }
    }
    out
}

/// Writes `state` into `dir` and returns the file path.
pub fn write_snapshot(dir: &Path, state: &ZoneState, t: f64) -> Result<PathBuf> {
    let path = dir.join(snapshot_file_name(state.grid().zone(), t));
    std::fs::write(&path, snapshot_to_string(state, t)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads back a file produced by [`snapshot_to_string`].
pub fn snapshot_from_str(text: &str, zone: ZoneId) -> Result<ZoneState> {
    let bad = |m: &str| Error::Parse(format!("vtk: {m}"));
    let mut dims = None;
    let mut origin = None;
    let mut spacing = None;
    let mut scalars: Vec<(String, Vec<f64>)> = Vec::new();
    let mut lines = text.lines().skip(1);
    while let Some(line) = lines.next() {
        let mut w = line.split_whitespace();
        let nums = |w: std::str::SplitWhitespace| -> Result<Vec<f64>> {
            w.map(|s| s.parse::<f64>().map_err(|e| bad(&e.to_string())))
                .collect()
        };
        match w.next() {
            Some("DIMENSIONS") => dims = Some(nums(w)?),
            Some("ORIGIN") => origin = Some(nums(w)?),
            Some("SPACING") => spacing = Some(nums(w)?),
            Some("SCALARS") => {
                let name = w.next().ok_or_else(|| bad("unnamed SCALARS"))?.to_string();
                lines.next();
                let n = match &dims {
                    Some(d) if d.len() >= 2 => d[0] as usize * d[1] as usize,
                    _ => return Err(bad("SCALARS before DIMENSIONS")),
                };
                let vals = lines
                    .by_ref()
                    .take(n)
                    .map(|s| s.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                scalars.push((name, vals));
            }
            _ => {}
        }
    }
    let (d, o, s) = match (dims, origin, spacing) {
        (Some(d), Some(o), Some(s)) if d.len() == 3 && o.len() == 3 && s.len() == 3 => (d, o, s),
        _ => return Err(bad("missing or malformed geometry")),
    };
    let grid = Grid::new(
        d[0] as usize,
        d[1] as usize,
        o[0] - 0.5 * s[0],
        o[1] - 0.5 * s[1],
        s[0],
        s[1],
        zone,
    )?;
    let mut take = |name: &str| -> Result<Field> {
        let idx = scalars
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| bad(&format!("no {name} array")))?;
        Field::from_values(grid, scalars.swap_remove(idx).1)
    };
    let stressed = take("u_P")?;
    let unstressed = take("u_N")?;
    Ok(ZoneState { stressed, unstressed })
}

pub fn read_snapshot(path: &Path, zone: ZoneId) -> Result<ZoneState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    snapshot_from_str(&text, zone)
}
