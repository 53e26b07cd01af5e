//! Readers and writers for XYZ, OBJ and PLY files.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::mesh::Mesh;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Formats with 9 significant digits, `%.9g` style.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".to_string() } else { format!("{x}") };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| parse_err(path, line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite number '{tok}'")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// OBJ

#[derive(Debug, Default)]
struct ObjData {
    vertices: Vec<Point>,
    faces: Vec<Vec<usize>>,
    lines: Vec<Vec<usize>>,
}

fn read_obj(path: &Path) -> Result<ObjData> {
    let reader = BufReader::new(File::open(path)?);
    let mut data = ObjData::default();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = no + 1;
        let mut toks = line.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<&str> = toks.collect();
                if coords.len() < 3 {
                    return Err(parse_err(path, lineno, "vertex needs three coordinates"));
                }
                data.vertices.push(Point::new(
                    parse_f64(coords[0], path, lineno)?,
                    parse_f64(coords[1], path, lineno)?,
                    parse_f64(coords[2], path, lineno)?,
                ));
            }
            "f" | "l" => {
                let mut idx = Vec::new();
                for t in toks {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| parse_err(path, lineno, format!("invalid index '{t}'")))?;
                    let n = data.vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(parse_err(path, lineno, format!("index {i} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                let min = if tag == "f" { 3 } else { 2 };
                if idx.len() < min {
                    return Err(parse_err(path, lineno, format!("'{tag}' needs at least {min} indices")));
                }
                if tag == "f" {
                    data.faces.push(idx);
                } else {
                    data.lines.push(idx);
                }
            }
            _ => {}
        }
    }
    Ok(data)
}

fn fan(face: &[usize]) -> impl Iterator<Item = [usize; 3]> + '_ {
    (1..face.len() - 1).map(move |k| [face[0], face[k], face[k + 1]])
}

// ---------------------------------------------------------------------------
// PLY

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum PropKind {
    Scalar(Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct PlyProperty {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
enum PlyValue {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
    rows: Vec<Vec<PlyValue>>,
}

impl PlyElement {
    fn prop_index(&self, name: &str) -> Option<usize> {
        self.props.iter().position(|p| p.name == name)
    }
}

struct PlyData {
    elements: Vec<PlyElement>,
}

impl PlyData {
    fn element(&self, name: &str) -> Option<&PlyElement> {
        self.elements.iter().find(|e| e.name == name)
    }
}

fn read_ply(path: &Path) -> Result<PlyData> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut lineno = 0usize;
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut binary = false;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(parse_err(path, lineno, "missing end_header"));
        }
        lineno += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 {
            if toks.first() != Some(&"ply") {
                return Err(parse_err(path, 1, "not a PLY file"));
            }
            continue;
        }
        match toks.first().copied() {
            Some("format") => match toks.get(1).copied() {
                Some("ascii") => binary = false,
                Some("binary_little_endian") => binary = true,
                other => {
                    return Err(parse_err(path, lineno, format!("unsupported PLY format {other:?}")));
                }
            },
            Some("element") => {
                if toks.len() != 3 {
                    return Err(parse_err(path, lineno, "malformed element line"));
                }
                let count = toks[2].parse().map_err(|_| parse_err(path, lineno, "invalid element count"))?;
                elements.push(PlyElement { name: toks[1].to_string(), count, props: Vec::new(), rows: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| parse_err(path, lineno, "property before element"))?;
                let bad = || parse_err(path, lineno, "malformed property line");
                let prop = if toks.get(1) == Some(&"list") {
                    if toks.len() != 5 {
                        return Err(bad());
                    }
                    let c = Scalar::parse(toks[2]).ok_or_else(bad)?;
                    let v = Scalar::parse(toks[3]).ok_or_else(bad)?;
                    PlyProperty { name: toks[4].to_string(), kind: PropKind::List(c, v) }
                } else {
                    if toks.len() != 3 {
                        return Err(bad());
                    }
                    let s = Scalar::parse(toks[1]).ok_or_else(bad)?;
                    PlyProperty { name: toks[2].to_string(), kind: PropKind::Scalar(s) }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    if binary {
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if pos + n > payload.len() {
                return Err(parse_err(path, lineno, format!("truncated binary payload in {what}")));
            }
            let s = &payload[pos..pos + n];
            pos += n;
            Ok(s)
        };
        for el in &mut elements {
            el.rows.reserve(el.count);
            for _ in 0..el.count {
                let mut row = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    match p.kind {
                        PropKind::Scalar(s) => row.push(PlyValue::Scalar(s.decode(take(s.size(), &el.name)?))),
                        PropKind::List(c, v) => {
                            let n = c.decode(take(c.size(), &el.name)?);
                            if n < 0.0 {
                                return Err(parse_err(path, lineno, "negative list length"));
                            }
                            let mut vals = Vec::with_capacity(n as usize);
                            for _ in 0..n as usize {
                                vals.push(v.decode(take(v.size(), &el.name)?));
                            }
                            row.push(PlyValue::List(vals));
                        }
                    }
                }
                el.rows.push(row);
            }
        }
    } else {
        let mut lines = reader.lines();
        for el in &mut elements {
            el.rows.reserve(el.count);
            for _ in 0..el.count {
                let text = loop {
                    lineno += 1;
                    match lines.next() {
                        Some(l) => {
                            let l = l?;
                            if !l.trim().is_empty() {
                                break l;
                            }
                        }
                        None => return Err(parse_err(path, lineno, format!("missing {} record", el.name))),
                    }
                };
                let toks: Vec<&str> = text.split_whitespace().collect();
                let mut t = 0usize;
                let mut next = |what: &str| -> Result<f64> {
                    let tok =
                        toks.get(t).ok_or_else(|| parse_err(path, lineno, format!("missing value for {what}")))?;
                    t += 1;
                    parse_f64(tok, path, lineno)
                };
                let mut row = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    match p.kind {
                        PropKind::Scalar(_) => row.push(PlyValue::Scalar(next(&p.name)?)),
                        PropKind::List(..) => {
                            let n = next(&p.name)?;
                            if n < 0.0 || n.fract() != 0.0 {
                                return Err(parse_err(path, lineno, "invalid list length"));
                            }
                            let mut vals = Vec::with_capacity(n as usize);
                            for _ in 0..n as usize {
                                vals.push(next(&p.name)?);
                            }
                            row.push(PlyValue::List(vals));
                        }
                    }
                }
                el.rows.push(row);
            }
        }
    }
    Ok(PlyData { elements })
}

fn ply_vertices(path: &Path, ply: &PlyData) -> Result<Vec<Point>> {
    let v = ply.element("vertex").ok_or_else(|| parse_err(path, 0, "no vertex element"))?;
    let ix = ["x", "y", "z"].map(|n| v.prop_index(n));
    let [Some(ix), Some(iy), Some(iz)] = ix else {
        return Err(parse_err(path, 0, "vertex element lacks x/y/z"));
    };
    let get = |row: &[PlyValue], i: usize| match row[i] {
        PlyValue::Scalar(s) => Ok(s),
        PlyValue::List(_) => Err(parse_err(path, 0, "vertex coordinate is a list")),
    };
    v.rows.iter().map(|row| Ok(Point::new(get(row, ix)?, get(row, iy)?, get(row, iz)?))).collect()
}

fn ply_scalar_column(el: &PlyElement, name: &str) -> Option<Vec<f64>> {
    let i = el.prop_index(name)?;
    el.rows
        .iter()
        .map(|row| match row[i] {
            PlyValue::Scalar(s) => Some(s),
            PlyValue::List(_) => None,
        })
        .collect()
}

fn ply_faces(path: &Path, ply: &PlyData, n_vertices: usize) -> Result<Vec<Vec<usize>>> {
    let Some(f) = ply.element("face") else { return Ok(Vec::new()) };
    let i = f
        .prop_index("vertex_indices")
        .or_else(|| f.prop_index("vertex_index"))
        .ok_or_else(|| parse_err(path, 0, "face element lacks vertex_indices"))?;
    f.rows
        .iter()
        .map(|row| match &row[i] {
            PlyValue::List(v) => v
                .iter()
                .map(|&x| {
                    if x < 0.0 || x as usize >= n_vertices {
                        Err(parse_err(path, 0, format!("face index {x} out of range")))
                    } else {
                        Ok(x as usize)
                    }
                })
                .collect(),
            PlyValue::Scalar(_) => Err(parse_err(path, 0, "vertex_indices is not a list")),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// public readers

/// Reads a vertex list from XYZ, OBJ or PLY.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let pts = match extension(path).as_str() {
        "obj" => read_obj(path)?.vertices,
        "ply" => ply_vertices(path, &read_ply(path)?)?,
        _ => {
            let reader = BufReader::new(File::open(path)?);
            let mut pts = Vec::new();
            for (no, line) in reader.lines().enumerate() {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                let toks: Vec<&str> =
                    t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
                if toks.len() < 3 {
                    return Err(parse_err(path, no + 1, "expected 'x y z'"));
                }
                pts.push(Point::new(
                    parse_f64(toks[0], path, no + 1)?,
                    parse_f64(toks[1], path, no + 1)?,
                    parse_f64(toks[2], path, no + 1)?,
                ));
            }
            pts
        }
    };
    if pts.is_empty() {
        return Err(parse_err(path, 0, "file contains no points"));
    }
    Ok(pts)
}

/// Reads triangles (larger polygons fan-triangulated) from OBJ or PLY.
pub fn read_triangles(path: &Path) -> Result<Vec<[Point; 3]>> {
    let (vertices, faces) = match extension(path).as_str() {
        "obj" => {
            let d = read_obj(path)?;
            (d.vertices, d.faces)
        }
        "ply" => {
            let ply = read_ply(path)?;
            let v = ply_vertices(path, &ply)?;
            let f = ply_faces(path, &ply, v.len())?;
            (v, f)
        }
        ext => return Err(Error::InvalidInput(format!("unsupported triangle soup format '.{ext}'"))),
    };
    let tris: Vec<[Point; 3]> = faces
        .iter()
        .filter(|f| f.len() >= 3)
        .flat_map(|f| fan(f).collect::<Vec<_>>())
        .map(|[a, b, c]| [vertices[a], vertices[b], vertices[c]])
        .collect();
    if tris.is_empty() {
        return Err(Error::InvalidInput(format!("{} has no faces; load it as a point cloud instead", path.display())));
    }
    Ok(tris)
}

/// Reads a mixed triangle/segment mesh from OBJ or PLY.
pub fn read_mesh(path: &Path) -> Result<Mesh> {
    match extension(path).as_str() {
        "obj" => {
            let d = read_obj(path)?;
            let triangles = d.faces.iter().flat_map(|f| fan(f).collect::<Vec<_>>()).collect();
            let segments =
                d.lines.iter().flat_map(|l| l.windows(2).map(|w| [w[0], w[1]]).collect::<Vec<_>>()).collect();
            Ok(Mesh { vertices: d.vertices, radii: None, triangles, segments })
        }
        "ply" => {
            let ply = read_ply(path)?;
            let vertices = ply_vertices(path, &ply)?;
            let radii = ply.element("vertex").and_then(|v| ply_scalar_column(v, "radius"));
            let faces = ply_faces(path, &ply, vertices.len())?;
            let triangles = faces.iter().flat_map(|f| fan(f).collect::<Vec<_>>()).collect();
            let mut segments = Vec::new();
            if let Some(e) = ply.element("edge") {
                let (Some(a), Some(b)) = (ply_scalar_column(e, "vertex1"), ply_scalar_column(e, "vertex2")) else {
                    return Err(parse_err(path, 0, "edge element lacks vertex1/vertex2"));
                };
                for (a, b) in a.into_iter().zip(b) {
                    if a < 0.0 || b < 0.0 || a as usize >= vertices.len() || b as usize >= vertices.len() {
                        return Err(parse_err(path, 0, "edge index out of range"));
                    }
                    segments.push([a as usize, b as usize]);
                }
            }
            Ok(Mesh { vertices, radii, triangles, segments })
        }
        ext => Err(Error::InvalidInput(format!("unsupported mesh format '.{ext}'"))),
    }
}

/// Oriented sample dump: positions, normals and (optionally) raw gradients.
pub struct SampleDump {
    pub positions: Vec<Point>,
    pub normals: Vec<crate::geom::Vec3>,
    pub gradients: Option<Vec<crate::geom::Vec3>>,
    pub weights: Option<Vec<f64>>,
}

pub fn read_sample_dump(path: &Path) -> Result<SampleDump> {
    let ply = read_ply(path)?;
    let positions = ply_vertices(path, &ply)?;
    let v = ply.element("vertex").expect("vertex element checked above");
    let vec3 = |names: [&str; 3]| -> Option<Vec<crate::geom::Vec3>> {
        let [a, b, c] = names.map(|n| ply_scalar_column(v, n));
        Some(a?.into_iter().zip(b?).zip(c?).map(|((x, y), z)| crate::geom::Vec3::new(x, y, z)).collect())
    };
    let normals = vec3(["nx", "ny", "nz"]).ok_or_else(|| parse_err(path, 0, "sample dump lacks nx/ny/nz"))?;
    let gradients = vec3(["gx", "gy", "gz"]);
    let weights = ply_scalar_column(v, "weight");
    Ok(SampleDump { positions, normals, gradients, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(1.0), "1");
        assert_eq!(fmt_g9(-0.5), "-0.5");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(123456.789123), "123456.789");
        assert_eq!(fmt_g9(1.5e-7), "1.5e-07");
        assert_eq!(fmt_g9(2.0e12), "2e+12");
    }

    #[test]
    fn xyz_parse_error_has_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.xyz");
        std::fs::write(&p, "0 0 0\n1 2\n").unwrap();
        match read_points(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&p, "").unwrap();
        assert!(read_points(&p).is_err());
    }

    #[test]
    fn obj_faces_fan_and_negative_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("quad.obj");
        std::fs::write(&p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf -4/1 -3/2 -2/3 -1/4\nl 1 3\n").unwrap();
        let m = read_mesh(&p).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.segments, vec![[0, 2]]);
    }

    #[test]
    fn binary_ply_vertices_and_faces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tri.ply");
        let mut f = std::fs::File::create(&p).unwrap();
        write!(
            f,
            "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n"
        )
        .unwrap();
        for v in [[0f32, 0., 0.], [1., 0., 0.], [0., 1., 0.]] {
            for c in v {
                f.write_all(&c.to_le_bytes()).unwrap();
            }
        }
        f.write_all(&[3u8]).unwrap();
        for i in [0i32, 1, 2] {
            f.write_all(&i.to_le_bytes()).unwrap();
        }
        drop(f);
        let tris = read_triangles(&p).unwrap();
        assert_eq!(tris.len(), 1);
        assert_eq!(tris[0][1], Point::new(1.0, 0.0, 0.0));
    }
}
