//! Legacy ASCII VTK writer for field snapshots (UNSTRUCTURED_GRID with
//! POINT_DATA scalars, vectors and tensors).

use super::{FieldKind, MeshError, NodalField, TriMesh};
use std::io::Write;
use std::path::Path;

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &TriMesh,
    fields: &[(&str, &NodalField)],
) -> Result<(), MeshError> {
    for (_, f) in fields {
        f.expect_on(mesh)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);

    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "anisoflow snapshot")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.node_count())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    let nt = mesh.triangle_count();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for tri in mesh.triangles() {
        writeln!(w, "3 {} {} {}", tri[0], tri[1], tri[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    if !fields.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.node_count())?;
    }
    for (name, f) in fields {
        match f.kind() {
            FieldKind::Scalar => {
                writeln!(w, "SCALARS {name} double 1")?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for v in f.comp(0) {
                    writeln!(w, "{v}")?;
                }
            }
            FieldKind::Vector2 => {
                writeln!(w, "VECTORS {name} double")?;
                for i in 0..f.len() {
                    writeln!(w, "{} {} 0", f.comp(0)[i], f.comp(1)[i])?;
                }
            }
            FieldKind::SymTensor2 => {
                writeln!(w, "TENSORS {name} double")?;
                for i in 0..f.len() {
                    let (xx, yy, xy) = (f.comp(0)[i], f.comp(1)[i], f.comp(2)[i]);
                    writeln!(w, "{xx} {xy} 0")?;
                    writeln!(w, "{xy} {yy} 0")?;
                    writeln!(w, "0 0 0")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rect_mesh;

    #[test]
    fn writes_all_field_kinds() {
        let mesh = generate_rect_mesh(1.0, 1.0, 0.5).unwrap();
        let n = mesh.node_count();
        let s = NodalField::scalar(vec![1.0; n]).unwrap();
        let v = NodalField::vector2(vec![0.5; n], vec![-0.5; n]).unwrap();
        let t = NodalField::sym_tensor2(vec![1.0; n], vec![2.0; n], vec![0.1; n]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.vtk");
        write_vtk(&path, &mesh, &[("phi", &s), ("n", &v), ("d", &t)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 8 32"));
        assert!(text.contains("SCALARS phi double 1"));
        assert!(text.contains("VECTORS n double"));
        assert!(text.contains("TENSORS d double"));
        assert_eq!(text.lines().filter(|l| *l == "5").count(), 8); // cell types
    }
}
