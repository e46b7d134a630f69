use super::mesh::{ring_from_fan, TriMesh};
use crate::Result;
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::TAU;

/// Orthonormal tangent frame `(e1, e2 = n × e1, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub n: Vector3<f64>,
}

impl Frame {
    /// Frame with `θ' = θ + g` for every tangent direction.
    pub fn rotated(&self, g: f64) -> Frame {
        let (s, c) = g.sin_cos();
        Frame {
            e1: self.e1 * c - self.e2 * s,
            e2: self.e1 * s + self.e2 * c,
            n: self.n,
        }
    }

    pub fn angle_of(&self, v: &Vector3<f64>) -> f64 {
        self.e2.dot(v).atan2(self.e1.dot(v))
    }
}

/// Neighbour `j` of a vertex `i`, seen from `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub j: usize,
    pub r: f64,
    /// Polar angle in `[0, 2π)` in the frame at `i`.
    pub theta: f64,
    /// Transport angle `φ_ji`: features move from `j` to `i` by `e^{imφ_ji}`.
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentAtlas {
    pub frames: Vec<Frame>,
    pub neighbours: Vec<Vec<Neighbour>>,
    /// `w_j = (1/3) Σ` areas of incident faces.
    pub weights: Vec<f64>,
}

/// Area-weighted normals; `e1` projects `x̂`, or `ŷ` when that is nearly normal.
pub fn default_frames(mesh: &TriMesh) -> Vec<Frame> {
    let mut normals = vec![Vector3::zeros(); mesh.vertices.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let n = mesh.face_normal(f);
        for &v in face {
            normals[v] += n;
        }
    }
    normals
        .into_iter()
        .map(|n| {
            let n = n.normalize();
            let project = |a: Vector3<f64>| a - n * n.dot(&a);
            let mut e1 = project(Vector3::x());
            if e1.norm() < 1e-6 {
                e1 = project(Vector3::y());
            }
            let e1 = e1.normalize();
            Frame { e1, e2: n.cross(&e1), n }
        })
        .collect()
}

/// Smallest rotation taking unit `a` to unit `b`.
fn minimal_rotation(a: &Vector3<f64>, b: &Vector3<f64>) -> Matrix3<f64> {
    let v = a.cross(b);
    let c = a.dot(b);
    if c < -1.0 + 1e-12 {
        let axis = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let u = a.cross(&axis).normalize();
        return 2.0 * u * u.transpose() - Matrix3::identity();
    }
    let k = v.cross_matrix();
    Matrix3::identity() + k + k * k / (1.0 + c)
}

pub fn build_atlas(mesh: &TriMesh) -> Result<TangentAtlas> {
    build_atlas_with_frames(mesh, default_frames(mesh))
}

/// Log map and transport for given frames.
pub fn build_atlas_with_frames(mesh: &TriMesh, frames: Vec<Frame>) -> Result<TangentAtlas> {
    let nv = mesh.vertices.len();
    let mut weights = vec![0.0; nv];
    for (f, face) in mesh.faces.iter().enumerate() {
        let a = mesh.face_area(f) / 3.0;
        for &v in face {
            weights[v] += a;
        }
    }
    let fans = mesh.fans();
    let mut neighbours = Vec::with_capacity(nv);
    for i in 0..nv {
        let (ring, closed) = ring_from_fan(&fans[i]);
        let x = mesh.vertices[i];
        let edge = |j: usize| mesh.vertices[j] - x;
        let k = ring.len();
        let pairs = if closed { k } else { k - 1 };
        let angles: Vec<f64> = (0..pairs)
            .map(|a| edge(ring[a]).angle(&edge(ring[(a + 1) % k])))
            .collect();
        let scale = if closed { TAU / angles.iter().sum::<f64>() } else { 1.0 };
        let fr = frames[i];
        let start = fr.angle_of(&edge(ring[0]));
        let mut acc = 0.0;
        let mut list = Vec::with_capacity(k);
        for (a, &j) in ring.iter().enumerate() {
            if a > 0 {
                acc += angles[a - 1] * scale;
            }
            let rot = minimal_rotation(&frames[j].n, &fr.n);
            let phi = fr.angle_of(&(rot * frames[j].e1));
            list.push(Neighbour {
                j,
                r: edge(j).norm(),
                theta: (start + acc).rem_euclid(TAU),
                phi,
            });
        }
        neighbours.push(list);
    }
    Ok(TangentAtlas {
        frames,
        neighbours,
        weights,
    })
}

impl TangentAtlas {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(j, r_ij, θ_ij)` for the one-ring of `i`.
    pub fn log_map(&self, i: usize) -> Vec<(usize, f64, f64)> {
        self.neighbours[i].iter().map(|n| (n.j, n.r, n.theta)).collect()
    }

    pub fn transport_angle(&self, j: usize, i: usize) -> Option<f64> {
        self.neighbours[i].iter().find(|n| n.j == j).map(|n| n.phi)
    }

    /// Rebuilds the atlas after a gauge change `θ'_i = θ_i + g_i`.
    pub fn with_gauge(&self, mesh: &TriMesh, gauge: &[f64]) -> Result<TangentAtlas> {
        let frames = self.frames.iter().zip(gauge).map(|(f, &g)| f.rotated(g)).collect();
        build_atlas_with_frames(mesh, frames)
    }

    /// Max of `|e^{iφ_ij} − conj(e^{iφ_ji})|` over directed edges.
    pub fn transport_antisymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, ns) in self.neighbours.iter().enumerate() {
            for n in ns {
                if let Some(back) = self.transport_angle(i, n.j) {
                    let d = crate::C64::from_polar(1.0, back) - crate::C64::from_polar(1.0, -n.phi);
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    /// Max deviation of frames from orthonormality.
    pub fn frame_defect(&self) -> f64 {
        self.frames
            .iter()
            .map(|f| {
                let m = Matrix3::from_columns(&[f.e1, f.e2, f.n]);
                (m.transpose() * m - Matrix3::identity()).amax()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_grid() {
        let m = TriMesh::triangular_grid(5);
        let a = build_atlas(&m).unwrap();
        for f in &a.frames {
            assert!((f.n - Vector3::z()).norm() < 1e-14);
        }
        let centre = 2 * 5 + 2;
        let lm = a.log_map(centre);
        assert_eq!(lm.len(), 6);
        let th: Vec<f64> = lm.iter().map(|x| x.2).collect();
        for k in 0..6 {
            let want = k as f64 * PI / 3.0;
            let hit = th.iter().any(|t| {
                let d = (t - want).rem_euclid(TAU);
                d.min(TAU - d) < 1e-12
            });
            assert!(hit, "{th:?}");
        }
        for (j, r, _) in lm {
            assert!((r - (m.vertices[j] - m.vertices[centre]).norm()).abs() < 1e-15);
        }
        for ns in &a.neighbours {
            for n in ns {
                assert!(n.phi.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sphere_atlas() {
        let mut r = crate::rng::seeded(2);
        let m = TriMesh::random_sphere(200, &mut r).unwrap();
        let a = build_atlas(&m).unwrap();
        assert!(a.frame_defect() < 1e-12);
        assert!(a.transport_antisymmetry() < 1e-12);
        assert_eq!(a, build_atlas(&m).unwrap());
        assert!(a.weights.iter().all(|&w| w > 0.0));
        for ns in &a.neighbours {
            assert!(ns.iter().all(|n| (0.0..TAU).contains(&n.theta)));
        }
    }

    #[test]
    fn frame_rotation_shifts_angles() {
        let m = TriMesh::icosahedron();
        let a = build_atlas(&m).unwrap();
        let mut g = vec![0.0; 12];
        g[3] = 0.7;
        let b = a.with_gauge(&m, &g).unwrap();
        for n in &a.neighbours[3] {
            let nb = b.neighbours[3].iter().find(|x| x.j == n.j).unwrap();
            assert!(((nb.theta - n.theta - 0.7).rem_euclid(TAU) + 1e-12) % TAU < 2e-12);
        }
        // rotating the frame at j by δ shifts φ_ji by −δ
        for (i, ns) in a.neighbours.iter().enumerate() {
            for n in ns.iter().filter(|n| n.j == 3) {
                let after = b.transport_angle(3, i).unwrap();
                let d = C64exp(after) / C64exp(n.phi - 0.7);
                assert!((d - 1.0).norm() < 1e-12);
            }
        }
    }

    #[allow(non_snake_case)]
    fn C64exp(a: f64) -> crate::C64 {
        crate::C64::from_polar(1.0, a)
    }
}
