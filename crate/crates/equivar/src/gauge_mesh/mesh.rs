use crate::{Error, Result};
use nalgebra::Vector3;
use rand::Rng;
use std::collections::{HashMap, HashSet};
use std::path::Path;

/// Oriented manifold triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Validates manifoldness, orientation and face areas.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let m = TriMesh { vertices, faces };
        m.validate()?;
        Ok(m)
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    }

    /// Unnormalized face normal `(b−a)×(c−a)`.
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb - pa).cross(&(pc - pa))
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let bad = |m: String| Err(Error::NonManifold(m));
        let mut directed = HashSet::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return bad(format!("face {fi} references a missing vertex"));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return bad(format!("face {fi} repeats a vertex"));
            }
            if self.face_area(fi) <= 1e-12 {
                return bad(format!("face {fi} is degenerate"));
            }
            for k in 0..3 {
                if !directed.insert((f[k], f[(k + 1) % 3])) {
                    return bad(format!("edge {}-{} is shared inconsistently", f[k], f[(k + 1) % 3]));
                }
            }
        }
        for (v, fan) in self.fans().into_iter().enumerate() {
            if fan.is_empty() {
                return bad(format!("vertex {v} is isolated"));
            }
            let mut next = HashMap::new();
            let mut ends = HashSet::new();
            for &(a, b) in &fan {
                next.insert(a, b);
                ends.insert(b);
            }
            let starts: Vec<usize> = fan.iter().map(|e| e.0).filter(|a| !ends.contains(a)).collect();
            if starts.len() > 1 {
                return bad(format!("vertex {v} has a pinched one-ring"));
            }
            let start = starts.first().copied().unwrap_or(fan[0].0);
            let mut seen = 1;
            let mut cur = start;
            while let Some(&b) = next.get(&cur) {
                if b == start {
                    break;
                }
                seen += 1;
                cur = b;
            }
            let expected = if starts.is_empty() { fan.len() } else { fan.len() + 1 };
            if seen != expected {
                return bad(format!("vertex {v} has a disconnected one-ring"));
            }
        }
        Ok(())
    }

    /// Per vertex, the edges `a → b` of incident faces `(v, a, b)` in face order.
    pub(crate) fn fans(&self) -> Vec<Vec<(usize, usize)>> {
        let mut fans = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                fans[f[k]].push((f[(k + 1) % 3], f[(k + 2) % 3]));
            }
        }
        fans
    }

    /// One-ring neighbours in counter-clockwise order and whether the fan closes.
    pub fn one_ring(&self, v: usize) -> (Vec<usize>, bool) {
        let fan = &self.fans()[v];
        ring_from_fan(fan)
    }

    pub fn read_off(path: impl AsRef<Path>) -> Result<Self> {
        parse_off(&std::fs::read_to_string(path)?)
    }

    pub fn read_obj(path: impl AsRef<Path>) -> Result<Self> {
        parse_obj(&std::fs::read_to_string(path)?)
    }

    /// Dispatches on the file extension.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        match p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "off" => Self::read_off(p),
            Some(e) if e == "obj" => Self::read_obj(p),
            _ => Err(Error::Parse(format!("unknown mesh format: {}", p.display()))),
        }
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            s += &format!("{} {} {}\n", v.x, v.y, v.z);
        }
        for f in &self.faces {
            s += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
        }
        s
    }

    /// Regular icosahedron on the unit sphere.
    pub fn icosahedron() -> Self {
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        let raw = [
            (-1.0, p, 0.0),
            (1.0, p, 0.0),
            (-1.0, -p, 0.0),
            (1.0, -p, 0.0),
            (0.0, -1.0, p),
            (0.0, 1.0, p),
            (0.0, -1.0, -p),
            (0.0, 1.0, -p),
            (p, 0.0, -1.0),
            (p, 0.0, 1.0),
            (-p, 0.0, -1.0),
            (-p, 0.0, 1.0),
        ];
        let vertices = raw.iter().map(|&(x, y, z)| Vector3::new(x, y, z).normalize()).collect();
        let faces = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        let mut m = TriMesh { vertices, faces };
        m.orient_outward();
        m
    }

    /// Convex hull of `n` uniform random points on the unit sphere.
    pub fn random_sphere(n: usize, rng: &mut impl Rng) -> Result<Self> {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                let (t, p) = crate::rng::sphere_point(rng);
                crate::harmonics::sphere_vector(t, p)
            })
            .collect();
        let faces = convex_hull(&pts)?;
        let mut m = TriMesh { vertices: pts, faces };
        m.orient_outward();
        m.validate()?;
        Ok(m)
    }

    /// Planar triangular lattice with `n × n` vertices and unit edges; interior
    /// vertices have six neighbours at multiples of π/3.
    pub fn triangular_grid(n: usize) -> Self {
        let h = 3f64.sqrt() / 2.0;
        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push(Vector3::new(i as f64 + 0.5 * j as f64, h * j as f64, 0.0));
            }
        }
        let id = |i: usize, j: usize| j * n + i;
        let mut faces = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        TriMesh { vertices, faces }
    }

    /// Flips faces whose normal points towards the origin.
    fn orient_outward(&mut self) {
        for f in 0..self.faces.len() {
            let [a, b, c] = self.faces[f];
            let centre = (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0;
            if self.face_normal(f).dot(&centre) < 0.0 {
                self.faces[f] = [a, c, b];
            }
        }
    }
}

pub(crate) fn ring_from_fan(fan: &[(usize, usize)]) -> (Vec<usize>, bool) {
    let next: HashMap<usize, usize> = fan.iter().copied().collect();
    let ends: HashSet<usize> = fan.iter().map(|e| e.1).collect();
    let open_start = fan.iter().map(|e| e.0).find(|a| !ends.contains(a));
    let start = open_start.unwrap_or_else(|| fan.iter().map(|e| e.0).min().unwrap());
    let mut ring = vec![start];
    let mut cur = start;
    while let Some(&b) = next.get(&cur) {
        if b == start {
            break;
        }
        ring.push(b);
        cur = b;
    }
    (ring, open_start.is_none())
}

fn parse_off(text: &str) -> Result<TriMesh> {
    let mut toks = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace());
    let bad = |m: &str| Error::Parse(format!("off: {m}"));
    if toks.next() != Some("OFF") {
        return Err(bad("missing OFF header"));
    }
    let mut num = || -> Result<f64> {
        toks.next()
            .ok_or_else(|| bad("unexpected end of file"))?
            .parse::<f64>()
            .map_err(|_| bad("not a number"))
    };
    let (nv, nf, _) = (num()? as usize, num()? as usize, num()?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(Vector3::new(num()?, num()?, num()?));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = num()? as usize;
        let idx: Vec<usize> = (0..k).map(|_| num().map(|v| v as usize)).collect::<Result<_>>()?;
        if k < 3 {
            return Err(bad("face with fewer than three vertices"));
        }
        for t in 1..k - 1 {
            faces.push([idx[0], idx[t], idx[t + 1]]);
        }
    }
    TriMesh::new(vertices, faces)
}

fn parse_obj(text: &str) -> Result<TriMesh> {
    let bad = |m: String| Error::Parse(format!("obj: {m}"));
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad coordinate", ln + 1))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad(format!("line {}: vertex needs three coordinates", ln + 1)));
                }
                vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| bad(format!("line {}: bad index", ln + 1)))?;
                        let i = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        usize::try_from(i).map_err(|_| bad(format!("line {}: index out of range", ln + 1)))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(bad(format!("line {}: face needs three vertices", ln + 1)));
                }
                for t in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[t], idx[t + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Incremental 3D convex hull; faces wound counter-clockwise seen from outside.
pub fn convex_hull(pts: &[Vector3<f64>]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    let fail = || Error::NonManifold("points are degenerate for a hull".into());
    if n < 4 {
        return Err(fail());
    }
    let eps = 1e-12;
    let i1 = (1..n).find(|&i| (pts[i] - pts[0]).norm() > 1e-9).ok_or_else(fail)?;
    let i2 = (1..n)
        .find(|&i| (pts[i1] - pts[0]).cross(&(pts[i] - pts[0])).norm() > 1e-9)
        .ok_or_else(fail)?;
    let vol = |a: usize, b: usize, c: usize, p: &Vector3<f64>| {
        (pts[b] - pts[a]).cross(&(pts[c] - pts[a])).dot(&(p - pts[a]))
    };
    let i3 = (1..n).find(|&i| vol(0, i1, i2, &pts[i]).abs() > 1e-9).ok_or_else(fail)?;
    let mut faces: Vec<[usize; 3]> = vec![[0, i1, i2], [0, i2, i3], [0, i3, i1], [i1, i3, i2]];
    let inner = (pts[0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
    for f in &mut faces {
        if vol(f[0], f[1], f[2], &inner) > 0.0 {
            f.swap(1, 2);
        }
    }
    for p in 0..n {
        if [0, i1, i2, i3].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| vol(f[0], f[1], f[2], &pts[p]) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges = HashSet::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for k in 0..3 {
                edges.insert((f[k], f[(k + 1) % 3]));
            }
        }
        let mut next: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        for &(a, b) in &edges {
            if !edges.contains(&(b, a)) {
                next.push([a, b, p]);
            }
        }
        faces = next;
    }
    Ok(faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_shape() {
        let m = TriMesh::icosahedron();
        assert!(m.validate().is_ok());
        for v in 0..12 {
            let (ring, closed) = m.one_ring(v);
            assert!(closed);
            assert_eq!(ring.len(), 5);
        }
    }

    #[test]
    fn random_sphere_is_closed() {
        let mut r = crate::rng::seeded(1);
        let m = TriMesh::random_sphere(200, &mut r).unwrap();
        assert_eq!(m.vertices.len(), 200);
        assert_eq!(m.faces.len(), 2 * 200 - 4);
    }

    #[test]
    fn off_round_trip_and_errors() {
        let m = TriMesh::icosahedron();
        let back = parse_off(&m.to_off()).unwrap();
        assert_eq!(back.faces, m.faces);
        assert!(matches!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_off("NOPE"), Err(Error::Parse(_))));
        let pinched = "OFF\n5 2 0\n0 0 0\n1 0 0\n0 1 0\n-1 0 0\n0 -1 0\n3 0 1 2\n3 0 3 4\n";
        assert!(matches!(parse_off(pinched), Err(Error::NonManifold(_))));
        let flipped = "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n3 0 1 2\n3 1 2 3\n";
        assert!(matches!(parse_off(flipped), Err(Error::NonManifold(_))));
    }

    #[test]
    fn obj_quads() {
        let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n";
        let m = parse_obj(obj).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }
}
