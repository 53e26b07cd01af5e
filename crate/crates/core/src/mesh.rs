//! Mixed-dimensional output mesh: triangles for sheets, segments for curves.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Frame;
use crate::geom::{Aabb, Point};
use crate::io::fmt_g9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            other => Err(Error::InvalidInput(format!("unsupported mesh extension {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Per-vertex sphere radius, when the mesh came out of the medial complex.
    pub radii: Option<Vec<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub segments: Vec<[usize; 2]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty() && self.segments.is_empty()
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Applies `frame.to_world` to vertices and rescales radii.
    pub fn to_world(&self, frame: &Frame) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|p| frame.to_world(p)).collect(),
            radii: self.radii.as_ref().map(|r| r.iter().map(|r| r / frame.scale).collect()),
            triangles: self.triangles.clone(),
            segments: self.segments.clone(),
        }
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", fmt_g9(v.x), fmt_g9(v.y), fmt_g9(v.z))?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        for s in &self.segments {
            writeln!(w, "l {} {}", s[0] + 1, s[1] + 1)?;
        }
        Ok(())
    }

    pub fn write_ply<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.vertices.len())?;
        writeln!(w, "property double x")?;
        writeln!(w, "property double y")?;
        writeln!(w, "property double z")?;
        if self.radii.is_some() {
            writeln!(w, "property double radius")?;
        }
        writeln!(w, "element face {}", self.triangles.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "element edge {}", self.segments.len())?;
        writeln!(w, "property int vertex1")?;
        writeln!(w, "property int vertex2")?;
        writeln!(w, "end_header")?;
        for (i, v) in self.vertices.iter().enumerate() {
            write!(w, "{} {} {}", fmt_g9(v.x), fmt_g9(v.y), fmt_g9(v.z))?;
            if let Some(r) = &self.radii {
                write!(w, " {}", fmt_g9(r[i]))?;
            }
            writeln!(w)?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        for s in &self.segments {
            writeln!(w, "{} {}", s[0], s[1])?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path, format: MeshFormat) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        match format {
            MeshFormat::Obj => self.write_obj(&mut w)?,
            MeshFormat::Ply => self.write_ply(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }
}
