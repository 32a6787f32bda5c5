use std::path::Path;

use myovox_core::tetmesh::{MeshTags, TetMesh};
use myovox_core::{Error as CoreError, Vec3};
use serde::{Deserialize, Serialize};

use super::{read_json, read_text};
use crate::error::{Result, WithPath};
use crate::json::fmt_f64;

/// Tags JSON. Vertex and tet ids are 0-based positions in file order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagsFile {
    #[serde(default)]
    pub skin_vertices: Vec<usize>,
    #[serde(default)]
    pub bone_surface_vertices: Vec<usize>,
    #[serde(default)]
    pub open_boundary_vertices: Vec<usize>,
    #[serde(default)]
    pub bone_tets: Vec<usize>,
}

impl From<TagsFile> for MeshTags {
    fn from(t: TagsFile) -> Self {
        MeshTags {
            skin_vertices: t.skin_vertices,
            bone_surface_vertices: t.bone_surface_vertices,
            open_boundary_vertices: t.open_boundary_vertices,
            bone_tets: t.bone_tets,
        }
    }
}

impl From<MeshTags> for TagsFile {
    fn from(t: MeshTags) -> Self {
        TagsFile {
            skin_vertices: t.skin_vertices,
            bone_surface_vertices: t.bone_surface_vertices,
            open_boundary_vertices: t.open_boundary_vertices,
            bone_tets: t.bone_tets,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> CoreError {
    CoreError::Parse { line, message: message.into() }
}

/// Non-empty lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let fields: Vec<&str> = l.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> std::result::Result<T, CoreError> {
    s.parse().map_err(|_| parse_err(line, format!("bad {what} '{s}'")))
}

/// Vertex positions and the index base (0 or 1) of a `.node` file.
pub fn parse_node(text: &str) -> std::result::Result<(Vec<Vec3>, usize), CoreError> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    if header.len() < 2 {
        return Err(parse_err(hl, "header needs '<count> 3 <attributes> <markers>'"));
    }
    let count: usize = num(hl, header[0], "vertex count")?;
    let dim: usize = num(hl, header[1], "dimension")?;
    if dim != 3 {
        return Err(parse_err(hl, format!("dimension must be 3, got {dim}")));
    }
    let mut verts = Vec::with_capacity(count);
    let mut base = 0;
    for (ln, f) in lines.by_ref().take(count) {
        if f.len() < 4 {
            return Err(parse_err(ln, "expected '<id> <x> <y> <z>'"));
        }
        let id: usize = num(ln, f[0], "vertex id")?;
        if verts.is_empty() {
            if id > 1 {
                return Err(parse_err(ln, format!("first vertex id must be 0 or 1, got {id}")));
            }
            base = id;
        }
        if id != verts.len() + base {
            return Err(parse_err(ln, format!("expected vertex id {}, got {id}", verts.len() + base)));
        }
        let p = Vec3::new(num(ln, f[1], "coordinate")?, num(ln, f[2], "coordinate")?, num(ln, f[3], "coordinate")?);
        if !p.is_finite() {
            return Err(parse_err(ln, "non-finite coordinate"));
        }
        verts.push(p);
    }
    if verts.len() != count {
        return Err(parse_err(hl, format!("header announces {count} vertices, found {}", verts.len())));
    }
    Ok((verts, base))
}

/// Tets of an `.ele` file as 0-based vertex indices. Tet ids may start at
/// 0 or 1; vertex references use `node_base`.
pub fn parse_ele(text: &str, num_vertices: usize, node_base: usize) -> std::result::Result<Vec<[usize; 4]>, CoreError> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    if header.len() < 2 {
        return Err(parse_err(hl, "header needs '<count> 4 <attributes>'"));
    }
    let count: usize = num(hl, header[0], "tet count")?;
    let per: usize = num(hl, header[1], "nodes per tet")?;
    if per != 4 {
        return Err(parse_err(hl, format!("only linear tets are supported, got {per} nodes per tet")));
    }
    let mut tets = Vec::with_capacity(count);
    let mut base = 0;
    for (ln, f) in lines.by_ref().take(count) {
        if f.len() < 5 {
            return Err(parse_err(ln, "expected '<id> <v1> <v2> <v3> <v4>'"));
        }
        let id: usize = num(ln, f[0], "tet id")?;
        if tets.is_empty() {
            if id > 1 {
                return Err(parse_err(ln, format!("first tet id must be 0 or 1, got {id}")));
            }
            base = id;
        }
        if id != tets.len() + base {
            return Err(parse_err(ln, format!("expected tet id {}, got {id}", tets.len() + base)));
        }
        let mut tet = [0; 4];
        for k in 0..4 {
            let v: usize = num(ln, f[k + 1], "vertex index")?;
            if v < node_base || v - node_base >= num_vertices {
                return Err(parse_err(ln, format!("vertex index {v} out of range")));
            }
            tet[k] = v - node_base;
        }
        tets.push(tet);
    }
    if tets.len() != count {
        return Err(parse_err(hl, format!("header announces {count} tets, found {}", tets.len())));
    }
    Ok(tets)
}

pub fn write_node(vertices: &[Vec3]) -> String {
    let mut s = format!("{} 3 0 0\n", vertices.len());
    for (i, p) in vertices.iter().enumerate() {
        s.push_str(&format!("{i} {} {} {}\n", fmt_f64(p.x()), fmt_f64(p.y()), fmt_f64(p.z())));
    }
    s
}

pub fn write_ele(tets: &[[usize; 4]]) -> String {
    let mut s = format!("{} 4 0\n", tets.len());
    for (i, t) in tets.iter().enumerate() {
        s.push_str(&format!("{i} {} {} {} {}\n", t[0], t[1], t[2], t[3]));
    }
    s
}

/// Build a mesh from in-memory `.node`/`.ele` text.
pub fn mesh_from_text(node: &str, ele: &str, tags: Option<TagsFile>) -> std::result::Result<TetMesh, CoreError> {
    let (verts, base) = parse_node(node)?;
    let tets = parse_ele(ele, verts.len(), base)?;
    TetMesh::new(verts, tets, &tags.unwrap_or_default().into())
}

pub fn load_tetmesh(node_path: &Path, ele_path: &Path, tags_path: Option<&Path>) -> Result<TetMesh> {
    let (verts, base) = parse_node(&read_text(node_path)?).at(node_path)?;
    let tets = parse_ele(&read_text(ele_path)?, verts.len(), base).at(ele_path)?;
    let tags: TagsFile = match tags_path {
        Some(p) => read_json(p)?,
        None => TagsFile::default(),
    };
    // Topology problems belong to the element file, tag problems to the tags.
    TetMesh::new(verts, tets, &tags.into()).map_err(|e| {
        let at = match (e.kind(), tags_path) {
            (myovox_core::ErrorKind::Input, Some(p)) => p,
            _ => ele_path,
        };
        crate::Error::InFile { path: at.to_path_buf(), source: e }
    })
}
