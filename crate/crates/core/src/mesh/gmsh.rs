//! Gmsh MSH 2.2 ASCII import (linear tetrahedra only).

use std::collections::HashMap;
use std::io::BufRead;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geom::Vec3;

const GMSH_TETRAHEDRON: usize = 4;

/// Reads a tetrahedral mesh of the unit cube. Elements of other types are
/// ignored; nodes not referenced by a tetrahedron are dropped.
pub fn read_gmsh_v2<R: BufRead>(reader: R) -> Result<Mesh> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut nodes: HashMap<usize, Vec3> = HashMap::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut saw_format = false;

    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((no, Ok(l))) => Ok((no, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file while reading {what}"),
            }),
        }
    };

    loop {
        let (no, line) = match next("section header") {
            Ok(l) => l,
            Err(Error::Parse { .. }) => break,
            Err(e) => return Err(e),
        };
        match line.trim() {
            "$MeshFormat" => {
                let (no, header) = next("$MeshFormat")?;
                let version = header.split_whitespace().next().unwrap_or("");
                if !version.starts_with('2') {
                    return Err(parse_err(no, format!("unsupported MSH version `{version}`")));
                }
                if header.split_whitespace().nth(1) != Some("0") {
                    return Err(parse_err(no, "binary MSH files are not supported"));
                }
                expect_end(&mut next, "$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let count = parse_count(next("node count")?)?;
                for _ in 0..count {
                    let (no, l) = next("node")?;
                    let fields: Vec<&str> = l.split_whitespace().collect();
                    if fields.len() < 4 {
                        return Err(parse_err(no, "node line needs id x y z"));
                    }
                    let id = parse_num::<usize>(no, fields[0])?;
                    let mut x = [0.0; 3];
                    for (k, f) in fields[1..4].iter().enumerate() {
                        x[k] = parse_num::<f64>(no, f)?;
                    }
                    nodes.insert(id, x);
                }
                expect_end(&mut next, "$EndNodes")?;
            }
            "$Elements" => {
                let count = parse_count(next("element count")?)?;
                for _ in 0..count {
                    let (no, l) = next("element")?;
                    let fields: Vec<usize> = l
                        .split_whitespace()
                        .map(|f| parse_num::<usize>(no, f))
                        .collect::<Result<_>>()?;
                    if fields.len() < 3 {
                        return Err(parse_err(no, "element line too short"));
                    }
                    if fields[1] != GMSH_TETRAHEDRON {
                        continue;
                    }
                    let start = 3 + fields[2];
                    if fields.len() != start + 4 {
                        return Err(parse_err(no, "tetrahedron needs exactly four nodes"));
                    }
                    tets.push([fields[start], fields[start + 1], fields[start + 2], fields[start + 3]]);
                }
                expect_end(&mut next, "$EndElements")?;
            }
            "" => {}
            other if other.starts_with("$End") => {
                return Err(parse_err(no, format!("unmatched `{other}`")));
            }
            other if other.starts_with('$') => {
                // skip unknown sections ($PhysicalNames, $NodeData, ...)
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = next(other)?;
                    if l.trim() == end {
                        break;
                    }
                }
            }
            _ => return Err(parse_err(no, format!("unexpected line `{line}`"))),
        }
    }

    if !saw_format {
        return Err(parse_err(1, "missing $MeshFormat section"));
    }
    if tets.is_empty() {
        return Err(Error::InvalidMesh("no tetrahedra (element type 4) found".into()));
    }

    let mut ids: Vec<usize> = tets.iter().flatten().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut renumber = HashMap::with_capacity(ids.len());
    let mut vertices = Vec::with_capacity(ids.len());
    for id in ids {
        let x = *nodes
            .get(&id)
            .ok_or_else(|| Error::InvalidMesh(format!("element references unknown node {id}")))?;
        if x.iter().any(|c| !(-1e-12..=1.0 + 1e-12).contains(c)) {
            return Err(Error::InvalidMesh(format!("node {id} at {x:?} lies outside the unit cube")));
        }
        renumber.insert(id, vertices.len());
        vertices.push(x);
    }
    let cells = tets
        .iter()
        .map(|t| [renumber[&t[0]], renumber[&t[1]], renumber[&t[2]], renumber[&t[3]]])
        .collect();
    let mesh = Mesh::from_cells(vertices, cells)?;
    check_covers_unit_cube(&mesh)?;
    Ok(mesh)
}

fn check_covers_unit_cube(mesh: &Mesh) -> Result<()> {
    let volume: f64 = mesh.geometries().iter().map(|g| g.volume()).sum();
    if (volume - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidMesh(format!(
            "cells cover a volume of {volume}, not the unit cube"
        )));
    }
    // A boundary face away from the cube surface means a hanging node or a gap.
    for f in mesh.boundary_entities().faces {
        let [a, b, c] = mesh.faces()[f];
        let (pa, pb, pc) = (mesh.vertex(a), mesh.vertex(b), mesh.vertex(c));
        let on_side = (0..3).any(|k| {
            [0.0, 1.0]
                .iter()
                .any(|&s| [pa[k], pb[k], pc[k]].iter().all(|x| (x - s).abs() < 1e-12))
        });
        if !on_side {
            return Err(Error::InvalidMesh(format!(
                "non-conforming mesh: face {:?} is unmatched but not on the cube boundary",
                [a, b, c]
            )));
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, format!("invalid number `{s}`")))
}

fn parse_count((no, l): (usize, String)) -> Result<usize> {
    parse_num(no, l.trim())
}

fn expect_end(next: &mut impl FnMut(&str) -> Result<(usize, String)>, tag: &str) -> Result<()> {
    let (no, l) = next(tag)?;
    if l.trim() != tag {
        return Err(parse_err(no, format!("expected `{tag}`, found `{}`", l.trim())));
    }
    Ok(())
}
