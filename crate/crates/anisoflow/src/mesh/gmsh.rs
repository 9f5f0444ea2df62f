//! Reader for Gmsh MSH ASCII version 2.2 files.
//!
//! Only the `$MeshFormat`, `$Nodes` and `$Elements` sections are consumed.
//! Element type 2 (3-node triangle) becomes mesh connectivity; every other
//! element type is skipped. Clockwise triangles are reordered to CCW.

use super::{MeshError, TriMesh};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GmshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported MSH version '{0}' (expected 2.2 ASCII)")]
    UnsupportedVersion(String),
    #[error("mesh contains no triangles")]
    EmptyMesh,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Import a triangle mesh from an MSH v2.2 ASCII file. The declared target
/// size of the result is the longest edge found in the file.
pub fn import_gmsh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = std::fs::read_to_string(path).map_err(GmshError::Io)?;
    parse_msh(&text).map_err(MeshError::from)
}

pub(crate) fn parse_msh(text: &str) -> Result<TriMesh, GmshError> {
    let lines: Vec<&str> = text.lines().collect();
    let err = |line: usize, msg: &str| GmshError::Parse {
        line: line + 1,
        msg: msg.to_string(),
    };

    let mut node_ids: HashMap<u64, u32> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut version_seen = false;

    let mut i = 0usize;
    while i < lines.len() {
        let line = lines[i].trim();
        match line {
            "$MeshFormat" => {
                let l = *lines.get(i + 1).ok_or_else(|| err(i, "truncated $MeshFormat"))?;
                let version = l
                    .split_whitespace()
                    .next()
                    .ok_or_else(|| err(i + 1, "empty format line"))?;
                if version != "2.2" {
                    return Err(GmshError::UnsupportedVersion(version.to_string()));
                }
                version_seen = true;
                i += 2;
                while i < lines.len() && lines[i].trim() != "$EndMeshFormat" {
                    i += 1;
                }
                i += 1;
            }
            "$Nodes" => {
                let count: usize = lines
                    .get(i + 1)
                    .and_then(|l| l.trim().parse().ok())
                    .ok_or_else(|| err(i + 1, "bad node count"))?;
                for k in 0..count {
                    let li = i + 2 + k;
                    let l = *lines.get(li).ok_or_else(|| err(li, "truncated $Nodes"))?;
                    let mut it = l.split_whitespace();
                    let id: u64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(li, "bad node id"))?;
                    let x: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(li, "bad node x coordinate"))?;
                    let y: f64 = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err(li, "bad node y coordinate"))?;
                    node_ids.insert(id, nodes.len() as u32);
                    nodes.push([x, y]);
                }
                i += 2 + count;
                if lines.get(i).map(|l| l.trim()) != Some("$EndNodes") {
                    return Err(err(i, "expected $EndNodes"));
                }
                i += 1;
            }
            "$Elements" => {
                let count: usize = lines
                    .get(i + 1)
                    .and_then(|l| l.trim().parse().ok())
                    .ok_or_else(|| err(i + 1, "bad element count"))?;
                for k in 0..count {
                    let li = i + 2 + k;
                    let l = *lines.get(li).ok_or_else(|| err(li, "truncated $Elements"))?;
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    if toks.len() < 3 {
                        return Err(err(li, "short element line"));
                    }
                    let etype: u32 = toks[1]
                        .parse()
                        .map_err(|_| err(li, "bad element type"))?;
                    if etype != 2 {
                        continue;
                    }
                    let ntags: usize = toks[2]
                        .parse()
                        .map_err(|_| err(li, "bad tag count"))?;
                    let base = 3 + ntags;
                    if toks.len() < base + 3 {
                        return Err(err(li, "triangle with fewer than 3 nodes"));
                    }
                    let mut tri = [0u32; 3];
                    for (slot, tok) in tri.iter_mut().zip(&toks[base..base + 3]) {
                        let id: u64 = tok.parse().map_err(|_| err(li, "bad node reference"))?;
                        *slot = *node_ids
                            .get(&id)
                            .ok_or_else(|| err(li, "element references unknown node"))?;
                    }
                    triangles.push(tri);
                }
                i += 2 + count;
                if lines.get(i).map(|l| l.trim()) != Some("$EndElements") {
                    return Err(err(i, "expected $EndElements"));
                }
                i += 1;
            }
            _ => i += 1,
        }
    }

    if !version_seen {
        return Err(GmshError::UnsupportedVersion("missing".to_string()));
    }
    if nodes.is_empty() || triangles.is_empty() {
        return Err(GmshError::EmptyMesh);
    }

    // Fix orientation to CCW.
    for tri in &mut triangles {
        let a = nodes[tri[0] as usize];
        let b = nodes[tri[1] as usize];
        let c = nodes[tri[2] as usize];
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if area2 < 0.0 {
            tri.swap(1, 2);
        }
    }

    let mesh = TriMesh::from_parts(nodes, triangles, 0.0).map_err(|e| GmshError::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    let h = mesh.max_edge_length();
    let nodes = mesh.nodes().to_vec();
    let tris = mesh.triangles().to_vec();
    TriMesh::from_parts(nodes, tris, h).map_err(|e| GmshError::Parse {
        line: 0,
        msg: e.to_string(),
    })
}
