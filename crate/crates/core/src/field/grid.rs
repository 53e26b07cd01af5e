use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point, Vec3};

const MAGIC: &str = "UDFGRID 1";

/// Regular grid of sampled distance values, interpolated trilinearly.
///
/// Values are stored x-fastest: index = i + nx * (j + ny * k).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    dims: [usize; 3],
    origin: Point,
    spacing: Vec3,
    values: Vec<f32>,
}

impl GridField {
    pub fn new(dims: [usize; 3], origin: Point, spacing: Vec3, values: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Format(format!("grid dims must be positive, got {dims:?}")));
        }
        if (0..3).any(|k| !(spacing[k].is_finite() && spacing[k] > 0.0)) {
            return Err(Error::Format(format!("grid spacing must be positive, got {spacing:?}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::Format("grid origin must be finite".into()));
        }
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(Error::Format(format!("grid header declares {n} values, payload has {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Format(format!("grid value {i} is negative or non-finite")));
        }
        Ok(GridField { dims, origin, spacing, values })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn(&Point) -> f64>(dims: [usize; 3], origin: Point, spacing: Vec3, f: F) -> Result<Self> {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f(&Self::node_at(origin, spacing, [i, j, k])).max(0.0) as f32);
                }
            }
        }
        Self::new(dims, origin, spacing, values)
    }

    fn node_at(origin: Point, spacing: Vec3, ijk: [usize; 3]) -> Point {
        Point::new(
            origin.x + ijk[0] as f64 * spacing.x,
            origin.y + ijk[1] as f64 * spacing.y,
            origin.z + ijk[2] as f64 * spacing.z,
        )
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn node(&self, ijk: [usize; 3]) -> Point {
        Self::node_at(self.origin, self.spacing, ijk)
    }

    pub fn value(&self, ijk: [usize; 3]) -> f32 {
        self.values[ijk[0] + self.dims[0] * (ijk[1] + self.dims[1] * ijk[2])]
    }

    pub fn domain(&self) -> Aabb {
        let far = [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1];
        Aabb::new(self.origin, self.node(far))
    }

    /// Box around the nodes that lie (up to half a cell diagonal) on the zero
    /// set; falls back to the whole domain when no node qualifies.
    pub fn zero_set_bounds(&self) -> Aabb {
        let tol = 0.5 * self.spacing.norm();
        let mut b = Aabb::empty();
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    if f64::from(self.value([i, j, k])) <= tol {
                        b.grow(&self.node([i, j, k]));
                    }
                }
            }
        }
        if b.is_empty() {
            self.domain()
        } else {
            b
        }
    }

    /// Trilinear interpolation inside the domain; outside, the value at the
    /// clamped point plus the distance to it.
    pub fn distance(&self, p: &Point) -> f64 {
        let domain = self.domain();
        let q = domain.clamp(p);
        let outside = (p - q).norm();
        let mut base = [0usize; 3];
        let mut t = [0f64; 3];
        for k in 0..3 {
            let n = self.dims[k];
            if n == 1 {
                continue;
            }
            let u = (q[k] - self.origin[k]) / self.spacing[k];
            let mut i = u.floor();
            let mut f = u - i;
            // snap so that queries at nodes reproduce the stored value
            if f < 1e-9 {
                f = 0.0;
            } else if f > 1.0 - 1e-9 {
                f = 0.0;
                i += 1.0;
            }
            let mut ii = (i.max(0.0) as usize).min(n - 1);
            if ii == n - 1 {
                ii = n - 2;
                f = if f == 0.0 { 1.0 } else { f };
            }
            base[k] = ii;
            t[k] = f;
        }
        let mut acc = 0.0;
        for dz in 0..2 {
            let wz = if dz == 0 { 1.0 - t[2] } else { t[2] };
            if wz == 0.0 {
                continue;
            }
            for dy in 0..2 {
                let wy = if dy == 0 { 1.0 - t[1] } else { t[1] };
                if wy == 0.0 {
                    continue;
                }
                for dx in 0..2 {
                    let wx = if dx == 0 { 1.0 - t[0] } else { t[0] };
                    if wx == 0.0 {
                        continue;
                    }
                    let idx = [base[0] + dx, base[1] + dy, base[2] + dz];
                    acc += wx * wy * wz * f64::from(self.value(idx));
                }
            }
        }
        acc + outside
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "dims {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        writeln!(w, "origin {} {} {}", self.origin.x, self.origin.y, self.origin.z)?;
        writeln!(w, "spacing {} {} {}", self.spacing.x, self.spacing.y, self.spacing.z)?;
        let mut buf = Vec::with_capacity(4 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        let mut next_line = |expect: &str| -> Result<Vec<String>> {
            line.clear();
            r.read_line(&mut line)?;
            let fields: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if fields.first().map(String::as_str) != Some(expect) {
                return Err(Error::Format(format!("expected '{expect}' line, found '{}'", line.trim_end())));
            }
            Ok(fields)
        };
        let magic = next_line("UDFGRID")?;
        if magic.get(1).map(String::as_str) != Some("1") {
            return Err(Error::Format("unsupported grid version".into()));
        }
        let dims_f = next_line("dims")?;
        let origin_f = next_line("origin")?;
        let spacing_f = next_line("spacing")?;
        fn three<T: std::str::FromStr>(f: &[String], what: &str) -> Result<[T; 3]> {
            if f.len() != 4 {
                return Err(Error::Format(format!("'{what}' needs three values")));
            }
            let p = |s: &String| s.parse::<T>().map_err(|_| Error::Format(format!("bad {what} value '{s}'")));
            Ok([p(&f[1])?, p(&f[2])?, p(&f[3])?])
        }
        let dims: [usize; 3] = three(&dims_f, "dims")?;
        let o: [f64; 3] = three(&origin_f, "origin")?;
        let s: [f64; 3] = three(&spacing_f, "spacing")?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Format("grid dims overflow".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != 4 * n {
            return Err(Error::Format(format!(
                "grid header declares {n} values ({} bytes), payload has {} bytes",
                4 * n,
                payload.len()
            )));
        }
        let values = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::new(dims, Point::from(o), Vec3::from(s), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_grid_center() {
        let g = GridField::new([2, 2, 2], Point::origin(), Vec3::repeat(1.0), vec![0.5; 8]).unwrap();
        assert_eq!(g.distance(&Point::new(0.5, 0.5, 0.5)), 0.5);
    }

    #[test]
    fn node_queries_are_exact() {
        let g = GridField::from_fn([16, 16, 16], Point::new(-1.0, -1.0, -1.0), Vec3::repeat(2.0 / 15.0), |p| p.z.abs())
            .unwrap();
        for (i, j, k) in [(0, 0, 0), (3, 7, 11), (15, 15, 15), (8, 0, 15)] {
            let v = g.distance(&g.node([i, j, k]));
            assert_eq!(v, f64::from(g.value([i, j, k])));
        }
    }

    #[test]
    fn outside_adds_distance_to_domain() {
        let g = GridField::new([2, 2, 2], Point::origin(), Vec3::repeat(1.0), vec![0.5; 8]).unwrap();
        assert!((g.distance(&Point::new(3.0, 0.5, 0.5)) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(GridField::new([2, 2, 2], Point::origin(), Vec3::repeat(1.0), vec![0.5; 7]).is_err());
        let mut bytes = Vec::new();
        GridField::new([2, 2, 2], Point::origin(), Vec3::repeat(1.0), vec![0.5; 8]).unwrap().write(&mut bytes).unwrap();
        bytes.truncate(bytes.len() - 4);
        assert!(matches!(GridField::read(&bytes[..]), Err(Error::Format(_))));
    }
}
