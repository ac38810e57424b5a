use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::assembly::ElementContext;
use crate::imex::Simulation;

use super::DriverError;

/// Header row then one record per row.
pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<(), DriverError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| DriverError::Io(path.to_path_buf(), e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DriverError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Data attached to a VTK snapshot besides the fields.
pub struct VtkFields<'a> {
    /// Per-element estimator values.
    pub eta: Option<&'a [f64]>,
}

/// Legacy ASCII unstructured grid. Each element is split into `s^2`
/// sub-triangles with `s` its mass order, and the fields are evaluated at
/// the sub-triangle vertices, which are not shared between elements.
pub fn vtk_string(sim: &Simulation<'_>, extra: &VtkFields<'_>) -> Result<String, DriverError> {
    let mesh = &sim.problem().mesh;
    let d = sim.discretization();
    let cur = sim.current();
    let ns = cur.m.len();
    let mut points = Vec::new();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    let mut owner = Vec::new();
    let mut mass = vec![Vec::new(); ns];
    let mut flux = vec![Vec::new(); ns];
    for k in 0..mesh.n_elements() {
        let ctx = ElementContext::new(mesh, &d.orders, k)?;
        let s = d.orders.mass_order(k).max(1);
        let fl = d.dofs.element_flux_dofs(mesh, k);
        let local: Vec<Vec<f64>> = cur.h.iter().map(|h| fl.iter().map(|&g| h[g]).collect()).collect();
        let mut row_start = Vec::with_capacity(s + 1);
        let mut n = points.len();
        for j in 0..=s {
            row_start.push(n);
            for i in 0..=(s - j) {
                let xi = [i as f64 / s as f64, j as f64 / s as f64];
                points.push(ctx.geom.to_physical(xi));
                for sp in 0..ns {
                    mass[sp].push(ctx.mass_value(&cur.m[sp][d.dofs.mass_dofs(k)], xi));
                    flux[sp].push(ctx.flux_value(&local[sp], xi).0);
                }
                n += 1;
            }
        }
        let at = |i: usize, j: usize| row_start[j] + i;
        for j in 0..s {
            for i in 0..(s - j) {
                cells.push([at(i, j), at(i + 1, j), at(i, j + 1)]);
                owner.push(k);
                if i + j + 1 < s {
                    cells.push([at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                    owner.push(k);
                }
            }
        }
    }
    let mut o = String::new();
    let w = &mut o;
    let _ = writeln!(w, "# vtk DataFile Version 3.0\nrdmix t={}\nASCII\nDATASET UNSTRUCTURED_GRID", cur.t);
    let _ = writeln!(w, "POINTS {} double", points.len());
    for p in &points {
        let _ = writeln!(w, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(w, "CELLS {} {}", cells.len(), 4 * cells.len());
    for c in &cells {
        let _ = writeln!(w, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(w, "CELL_TYPES {}", cells.len());
    for _ in &cells {
        let _ = writeln!(w, "5");
    }
    let _ = writeln!(w, "CELL_DATA {}", cells.len());
    let _ = writeln!(w, "SCALARS region int 1\nLOOKUP_TABLE default");
    for &k in &owner {
        let _ = writeln!(w, "{}", mesh.region(k));
    }
    let _ = writeln!(w, "SCALARS order int 1\nLOOKUP_TABLE default");
    for &k in &owner {
        let _ = writeln!(w, "{}", d.orders.mass_order(k));
    }
    if let Some(eta) = extra.eta {
        let _ = writeln!(w, "SCALARS eta double 1\nLOOKUP_TABLE default");
        for &k in &owner {
            let _ = writeln!(w, "{}", eta[k]);
        }
    }
    let _ = writeln!(w, "POINT_DATA {}", points.len());
    for sp in 0..ns {
        let _ = writeln!(w, "SCALARS m{sp} double 1\nLOOKUP_TABLE default");
        for v in &mass[sp] {
            let _ = writeln!(w, "{v}");
        }
        let _ = writeln!(w, "VECTORS h{sp} double");
        for v in &flux[sp] {
            let _ = writeln!(w, "{} {} 0", v[0], v[1]);
        }
    }
    Ok(o)
}

pub fn write_vtk(path: impl AsRef<Path>, sim: &Simulation<'_>, eta: Option<&[f64]>) -> Result<(), DriverError> {
    let path = path.as_ref();
    let text = vtk_string(sim, &VtkFields { eta })?;
    std::fs::write(path, text).map_err(|e| DriverError::Io(path.to_path_buf(), e))
}
