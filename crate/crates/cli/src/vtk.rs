//! Legacy ASCII VTK (version 3.0) snapshots of a discrete state.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mhd_core::diagnostics::{cell_divergences, format_float};
use mhd_core::geom::{self, Vec3};
use mhd_core::{MhdState, Result};

const REFERENCE_VERTICES: [Vec3; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
const CENTROID: Vec3 = [0.25, 0.25, 0.25];

fn vector_line(out: &mut String, v: &Vec3) {
    let _ = writeln!(out, "{} {} {}", format_float(v[0]), format_float(v[1]), format_float(v[2]));
}

/// Renders `state` as an unstructured tetrahedral grid: velocity and
/// pressure at the vertices, cell averages of B and E and the divergence of
/// B per cell.
pub fn render_vtk(state: &MhdState) -> Result<String> {
    let mesh = state.u.space().mesh().clone();
    let (nv, nc) = (mesh.num_vertices(), mesh.num_cells());

    let mut velocity = vec![[0.0; 3]; nv];
    let mut pressure = vec![0.0; nv];
    let mut b_avg = Vec::with_capacity(nc);
    let mut e_avg = Vec::with_capacity(nc);
    for (cell, verts) in mesh.cells().iter().enumerate() {
        let geo = mesh.cell_geometry(cell)?;
        let u = state.u.evaluate(cell, &REFERENCE_VERTICES);
        let p = state.p.evaluate(cell, &REFERENCE_VERTICES);
        for (k, xr) in REFERENCE_VERTICES.iter().enumerate() {
            let x = geo.map(xr);
            let v = *verts
                .iter()
                .min_by(|a, b| {
                    let da = geom::norm(&geom::sub(&mesh.vertex(**a), &x));
                    let db = geom::norm(&geom::sub(&mesh.vertex(**b), &x));
                    da.total_cmp(&db)
                })
                .expect("cells have four vertices");
            velocity[v] = u.values[k];
            pressure[v] = p.values[k][0];
        }
        // B and E are linear on each cell, so the centroid value is the average
        b_avg.push(state.b.evaluate(cell, &[CENTROID]).values[0]);
        e_avg.push(state.e.evaluate(cell, &[CENTROID]).values[0]);
    }
    let div = cell_divergences(&state.b)?;

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "MHD state step {} t {}", state.step, format_float(state.time));
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for v in mesh.vertices() {
        vector_line(&mut out, v);
    }
    let _ = writeln!(out, "CELLS {nc} {}", 5 * nc);
    for c in mesh.cells() {
        let _ = writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("10\n");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    out.push_str("VECTORS u double\n");
    for v in &velocity {
        vector_line(&mut out, v);
    }
    out.push_str("SCALARS p double 1\nLOOKUP_TABLE default\n");
    for p in &pressure {
        let _ = writeln!(out, "{}", format_float(*p));
    }
    let _ = writeln!(out, "CELL_DATA {nc}");
    out.push_str("VECTORS B double\n");
    for v in &b_avg {
        vector_line(&mut out, v);
    }
    out.push_str("VECTORS E double\n");
    for v in &e_avg {
        vector_line(&mut out, v);
    }
    out.push_str("SCALARS divB double 1\nLOOKUP_TABLE default\n");
    for d in &div {
        let _ = writeln!(out, "{}", format_float(*d));
    }
    Ok(out)
}

pub fn write_vtk(state: &MhdState, path: &Path) -> Result<()> {
    fs::write(path, render_vtk(state)?)?;
    Ok(())
}
