use super::atlas::TangentAtlas;
use super::mesh::TriMesh;
use crate::steerable::{so2_constraint_residual, CircularHarmonic, NeighbourKernel, RadialProfile, So2SteerableKernel, So2Type};
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One complex value of rotation order `m` per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFeature {
    pub order: i64,
    pub values: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct FeatureRecord {
    vertex: usize,
    m: i64,
    value: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct FeatureFile {
    vertices: usize,
    features: Vec<FeatureRecord>,
}

impl MeshFeature {
    pub fn random(rng: &mut impl Rng, order: i64, n: usize) -> Self {
        MeshFeature {
            order,
            values: (0..n).map(|_| crate::rng::complex(rng)).collect(),
        }
    }

    /// Components in the gauge `θ' = θ + g_i`.
    pub fn gauge_transformed(&self, gauge: &[f64]) -> Self {
        MeshFeature {
            order: self.order,
            values: self
                .values
                .iter()
                .zip(gauge)
                .map(|(v, &g)| v * C64::from_polar(1.0, self.order as f64 * g))
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = FeatureFile {
            vertices: self.values.len(),
            features: self
                .values
                .iter()
                .enumerate()
                .map(|(vertex, v)| FeatureRecord {
                    vertex,
                    m: self.order,
                    value: [v.re, v.im],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FeatureFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let order = file.features.first().map(|r| r.m).unwrap_or(0);
        let mut values = vec![None; file.vertices];
        for r in file.features {
            if r.m != order {
                return Err(Error::Parse("mixed orders in one feature file".into()));
            }
            let slot = values
                .get_mut(r.vertex)
                .ok_or_else(|| Error::Parse(format!("vertex {} out of range", r.vertex)))?;
            *slot = Some(C64::new(r.value[0], r.value[1]));
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("vertex {i} missing"))))
            .collect::<Result<_>>()?;
        Ok(MeshFeature { order, values })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `out_i = Σ_j w_j κ_m(r_ij, θ_ij) e^{im'φ_ji} f_j`, of order `m + m'`.
pub fn harmonic_conv(atlas: &TangentAtlas, kernel: &CircularHarmonic, f: &MeshFeature) -> Result<MeshFeature> {
    if f.values.len() != atlas.len() {
        return Err(Error::ShapeMismatch(format!(
            "feature has {} vertices, mesh has {}",
            f.values.len(),
            atlas.len()
        )));
    }
    let mp = f.order as f64;
    let values = atlas
        .neighbours
        .iter()
        .map(|ns| {
            ns.iter()
                .map(|n| atlas.weights[n.j] * kernel.eval(n.r, n.theta) * C64::from_polar(1.0, mp * n.phi) * f.values[n.j])
                .sum()
        })
        .collect();
    Ok(MeshFeature {
        order: kernel.m + f.order,
        values,
    })
}

/// Real feature fields: `dim` values per vertex, vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedField {
    pub ty: So2Type,
    pub values: Vec<f64>,
}

impl TypedField {
    pub fn random(rng: &mut impl Rng, ty: So2Type, n: usize) -> Self {
        let values = (0..n * ty.dim()).map(|_| crate::rng::uniform(rng)).collect();
        TypedField { ty, values }
    }

    pub fn vertices(&self) -> usize {
        self.values.len() / self.ty.dim().max(1)
    }

    pub fn at(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        let d = self.ty.dim();
        nalgebra::DVectorView::from_slice(&self.values[i * d..(i + 1) * d], d)
    }

    /// `f'_i = ρ(g_i) f_i`.
    pub fn gauge_transformed(&self, gauge: &[f64]) -> Self {
        let d = self.ty.dim();
        let mut values = Vec::with_capacity(self.values.len());
        for (i, &g) in gauge.iter().enumerate().take(self.vertices()) {
            values.extend((self.ty.representation(g) * self.at(i)).iter());
        }
        debug_assert_eq!(values.len(), self.vertices() * d);
        TypedField { ty: self.ty.clone(), values }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Max of `‖ρ_out(g) K − K ρ_in(g)‖` over sample angles.
pub fn self_kernel_residual(k: &DMatrix<f64>, input: &So2Type, output: &So2Type) -> f64 {
    (0..7)
        .map(|a| {
            let g = 0.41 + 0.89 * a as f64;
            (output.representation(g) * k - k * input.representation(g)).amax()
        })
        .fold(0.0, f64::max)
}

/// `out_i = K_self f_i + Σ_j w_j κ(θ_ij) ρ_in(φ_ji) f_j`.
pub fn gem_conv(
    atlas: &TangentAtlas,
    f: &TypedField,
    self_kernel: &DMatrix<f64>,
    neighbour: &dyn NeighbourKernel,
) -> Result<TypedField> {
    let (ti, to) = (neighbour.in_type(), neighbour.out_type());
    if &f.ty != ti || f.vertices() != atlas.len() || f.values.len() != atlas.len() * ti.dim() {
        return Err(Error::ShapeMismatch("feature does not match kernel input or mesh".into()));
    }
    if self_kernel.nrows() != to.dim() || self_kernel.ncols() != ti.dim() {
        return Err(Error::ShapeMismatch("self-interaction shape".into()));
    }
    let r = so2_constraint_residual(neighbour);
    if r > 1e-8 {
        return Err(Error::KernelConstraintViolated(r));
    }
    let r = self_kernel_residual(self_kernel, ti, to);
    if r > 1e-8 {
        return Err(Error::KernelConstraintViolated(r));
    }
    let mut values = Vec::with_capacity(atlas.len() * to.dim());
    for (i, ns) in atlas.neighbours.iter().enumerate() {
        let mut acc = self_kernel * f.at(i);
        for n in ns {
            acc += atlas.weights[n.j] * neighbour.eval(n.theta) * (ti.representation(n.phi) * f.at(n.j));
        }
        values.extend(acc.iter());
    }
    Ok(TypedField { ty: to.clone(), values })
}

/// Equivariant self-interaction: blocks between equal orders commute with rotation.
pub fn random_self_kernel(rng: &mut impl Rng, input: &So2Type, output: &So2Type) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(output.dim(), input.dim());
    for (no, oo) in output.blocks() {
        for &(_, oi) in input.blocks().iter().filter(|b| b.0 == no) {
            if no == 0 {
                k[(oo, oi)] = crate::rng::uniform(rng);
            } else {
                let (a, b) = (crate::rng::uniform(rng), crate::rng::uniform(rng));
                k[(oo, oi)] = a;
                k[(oo, oi + 1)] = -b;
                k[(oo + 1, oi)] = b;
                k[(oo + 1, oi + 1)] = a;
            }
        }
    }
    k
}

/// Max relative mismatch of `harmonic_conv` under random gauges, over `trials`.
pub fn harmonic_gauge_audit(mesh: &TriMesh, atlas: &TangentAtlas, rng: &mut impl Rng, trials: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in 0..trials {
        let m = (t as i64 % 5) - 2;
        let mp = ((t as i64 * 3) % 5) - 2;
        let kernel = CircularHarmonic::new(
            m,
            RadialProfile::Gaussian {
                center: 0.3,
                sigma: 0.4,
            },
            rng.gen_range(0.0..std::f64::consts::TAU),
        );
        let f = MeshFeature::random(rng, mp, atlas.len());
        let gauge: Vec<f64> = (0..atlas.len()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let out = harmonic_conv(atlas, &kernel, &f)?;
        let moved = atlas.with_gauge(mesh, &gauge)?;
        let out2 = harmonic_conv(&moved, &kernel, &f.gauge_transformed(&gauge))?;
        let scale = out.values.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        worst = worst.max(out2.max_abs_diff(&out.gauge_transformed(&gauge)) / scale);
    }
    Ok(worst)
}

/// Same for `gem_conv` with random steerable kernels.
pub fn gem_gauge_audit(mesh: &TriMesh, atlas: &TangentAtlas, rng: &mut impl Rng, trials: usize) -> Result<f64> {
    let input = So2Type::new(&[(0, 1), (1, 1), (2, 1)]);
    let output = So2Type::new(&[(0, 1), (1, 2)]);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let nb = So2SteerableKernel::random(rng, input.clone(), output.clone());
        let ks = random_self_kernel(rng, &input, &output);
        let f = TypedField::random(rng, input.clone(), atlas.len());
        let gauge: Vec<f64> = (0..atlas.len()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let out = gem_conv(atlas, &f, &ks, &nb)?;
        let moved = atlas.with_gauge(mesh, &gauge)?;
        let out2 = gem_conv(&moved, &f.gauge_transformed(&gauge), &ks, &nb)?;
        let scale = out.values.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        worst = worst.max(out2.max_abs_diff(&out.gauge_transformed(&gauge)) / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge_mesh::build_atlas;
    use crate::steerable::IsotropicKernel;

    #[test]
    fn gauge_audits_on_sphere() {
        let mut r = crate::rng::seeded(5);
        let m = TriMesh::random_sphere(200, &mut r).unwrap();
        let a = build_atlas(&m).unwrap();
        assert!(harmonic_gauge_audit(&m, &a, &mut r, 5).unwrap() < 1e-10);
        assert!(gem_gauge_audit(&m, &a, &mut r, 3).unwrap() < 1e-10);
    }

    #[test]
    fn scalar_isotropic_is_graph_conv() {
        let m = TriMesh::icosahedron();
        let a = build_atlas(&m).unwrap();
        let s = So2Type::new(&[(0, 1)]);
        let mut r = crate::rng::seeded(6);
        let f = TypedField::random(&mut r, s.clone(), 12);
        let nb = IsotropicKernel {
            input: s.clone(),
            output: s.clone(),
            k: DMatrix::from_element(1, 1, 2.0),
        };
        let out = gem_conv(&a, &f, &DMatrix::from_element(1, 1, 0.5), &nb).unwrap();
        for i in 0..12 {
            let want: f64 = 0.5 * f.values[i] + a.neighbours[i].iter().map(|n| 2.0 * a.weights[n.j] * f.values[n.j]).sum::<f64>();
            assert!((out.values[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_kernels_rejected() {
        let m = TriMesh::icosahedron();
        let a = build_atlas(&m).unwrap();
        let v = So2Type::new(&[(1, 1)]);
        let mut r = crate::rng::seeded(7);
        let f = TypedField::random(&mut r, v.clone(), 12);
        let nb = IsotropicKernel {
            input: v.clone(),
            output: v.clone(),
            k: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        };
        let id = DMatrix::identity(2, 2);
        assert!(matches!(gem_conv(&a, &f, &id, &nb), Err(Error::KernelConstraintViolated(_))));
        let good = So2SteerableKernel::random(&mut r, v.clone(), v.clone());
        let bad_self = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(gem_conv(&a, &f, &bad_self, &good), Err(Error::KernelConstraintViolated(_))));
        assert!(gem_conv(&a, &f, &id, &good).is_ok());
    }

    #[test]
    fn feature_json_round_trip() {
        let mut r = crate::rng::seeded(8);
        let f = MeshFeature::random(&mut r, -2, 7);
        assert_eq!(MeshFeature::from_json(&f.to_json().unwrap()).unwrap(), f);
        assert!(MeshFeature::from_json("{\"vertices\":2,\"features\":[]}").is_err());
    }

    #[test]
    fn flat_rotation_of_input() {
        // on a flat lattice a global gauge is a pure relabelling of angles
        let m = TriMesh::triangular_grid(5);
        let a = build_atlas(&m).unwrap();
        let k = CircularHarmonic::new(1, RadialProfile::Constant { value: 1.0 }, 0.0);
        let f = MeshFeature {
            order: 0,
            values: vec![C64::new(1.0, 0.0); 25],
        };
        let out = harmonic_conv(&a, &k, &f).unwrap();
        // a full symmetric ring of constant input cancels the order-1 kernel
        assert!(out.values[12].norm() < 1e-12);
        assert_eq!(out.order, 1);
    }
}
