//! Steerable kernels for SE(3) and SE(2).
//!
//! A kernel `κ: ℝ³ → Hom(V_θ, V_λ)` between real irreps is steerable when
//! `κ(Ry) = ρ_λ(R) κ(y) ρ_θ(R)ᵀ`. Row-major vectorization turns this into
//! `vec κ(Ry) = (ρ_λ ⊗ ρ_θ)(R) vec κ(y)`, and the Clebsch–Gordan change of basis
//! splits the tensor product into blocks `D^J`, each solved by `conj(Y^J)`.

use crate::harmonics::{
    real_basis_change, CGTable, rotation_matrix, sph_harm_all, sph_index, sphere_angles,
    EulerZYZ,
};
use crate::repr::{cg_change_of_basis, FeatureType};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Gaussian shells `φ^k(r) = exp(−(r−kΔ)²/2σ²)`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialShells {
    pub count: usize,
    pub delta: f64,
    pub sigma: f64,
}

impl RadialShells {
    /// `Δ = h`, `σ = 0.6Δ`.
    pub fn new(count: usize, h: f64) -> Self {
        RadialShells {
            count,
            delta: h,
            sigma: 0.6 * h,
        }
    }

    pub fn eval(&self, k: usize, r: f64) -> f64 {
        let d = r - k as f64 * self.delta;
        (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Real spherical harmonics of degrees `0..=lmax` at a unit vector, `2ℓ+1` per degree.
pub fn real_sph_all(lmax: usize, dir: &Vector3<f64>) -> Vec<f64> {
    let (t, p) = sphere_angles(dir);
    let y = sph_harm_all(lmax, t, p, true);
    let mut out = Vec::with_capacity((lmax + 1) * (lmax + 1));
    for l in 0..=lmax {
        out.push(y[sph_index(l, 0)].re);
        for m in 1..=l as i64 {
            let v = y[sph_index(l, m)];
            out.push(v.re);
            out.push(v.im);
        }
    }
    out
}

/// The single steerable angular profile of degree `J` for the pair `(λ, θ)`.
#[derive(Debug, Clone)]
pub struct AngularSolution {
    pub j: usize,
    /// `vec κ(ŷ) = map · conj(Y^J(ŷ))`, real by choice of phase.
    map: DMatrix<C64>,
}

impl AngularSolution {
    /// Row-major `(2λ+1)(2θ+1)` vector at the unit direction `dir`.
    pub fn eval(&self, dir: &Vector3<f64>) -> DVector<f64> {
        let (t, p) = sphere_angles(dir);
        let y = sph_harm_all(self.j, t, p, true);
        let l = self.j as i64;
        let z = DVector::from_iterator(
            2 * self.j + 1,
            (-l..=l).map(|m| y[sph_index(self.j, m)].conj()),
        );
        (&self.map * z).map(|c| c.re)
    }

    /// Largest imaginary part left at `dir` after phase fixing.
    pub fn imaginary_defect(&self, dir: &Vector3<f64>) -> f64 {
        let (t, p) = sphere_angles(dir);
        let y = sph_harm_all(self.j, t, p, true);
        let l = self.j as i64;
        let z = DVector::from_iterator(
            2 * self.j + 1,
            (-l..=l).map(|m| y[sph_index(self.j, m)].conj()),
        );
        (&self.map * z).iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

/// One angular solution per `J ∈ |λ−θ| ..= λ+θ`.
pub fn solve_angular_basis(lambda_out: usize, theta_in: usize) -> Vec<AngularSolution> {
    let wl = real_basis_change(lambda_out);
    let wt = real_basis_change(theta_in);
    let u = cg_change_of_basis(lambda_out, theta_in).map(|x| C64::new(x, 0.0));
    // z = T vec κ block-diagonalizes the constraint.
    let t = u * wl.kronecker(&wt).adjoint();
    let td = t.adjoint();
    let probe = Vector3::new(0.31, 0.52, 0.79).normalize();
    let mut out = Vec::new();
    let mut offset = 0;
    for j in lambda_out.abs_diff(theta_in)..=lambda_out + theta_in {
        let d = 2 * j + 1;
        let map = td.columns(offset, d).into_owned();
        offset += d;
        let mut sol = AngularSolution { j, map };
        let (th, ph) = sphere_angles(&probe);
        let y = sph_harm_all(j, th, ph, true);
        let l = j as i64;
        let z = DVector::from_iterator(d, (-l..=l).map(|m| y[sph_index(j, m)].conj()));
        let v = &sol.map * z;
        let big = v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).copied().unwrap();
        let phase = C64::from_polar(1.0, -big.arg());
        sol.map *= phase;
        out.push(sol);
    }
    out
}

/// Dimension of the real solution space of the constraint among kernels whose
/// entries are degree-`J` harmonics, by SVD of the discretized constraint.
pub fn constraint_nullity(lambda_out: usize, theta_in: usize, j: usize, rng: &mut impl Rng) -> usize {
    let fo = FeatureType::new(&[(lambda_out, 1)]);
    let fi = FeatureType::new(&[(theta_in, 1)]);
    let n = fo.dim() * fi.dim();
    let nj = 2 * j + 1;
    let unknowns = n * nj;
    let design = |dir: &Vector3<f64>| {
        let y = real_sph_all(j, dir);
        let yj = &y[j * j..];
        let mut a = DMatrix::zeros(n, unknowns);
        for r in 0..n {
            for (m, v) in yj.iter().enumerate() {
                a[(r, r * nj + m)] = *v;
            }
        }
        a
    };
    let mut rows = Vec::new();
    for _ in 0..12 {
        let g = crate::rng::rotation(rng);
        let rm = rotation_matrix(&g);
        let rep = fo.representation(&g).kronecker(&fi.representation(&g));
        for _ in 0..6 {
            let (t, p) = crate::rng::sphere_point(rng);
            let y = crate::harmonics::sphere_vector(t, p);
            rows.push(design(&(rm * y)) - &rep * design(&y));
        }
    }
    let mut m = DMatrix::zeros(rows.len() * n, unknowns);
    for (i, b) in rows.iter().enumerate() {
        m.view_mut((i * n, 0), (n, unknowns)).copy_from(b);
    }
    let sv = m.svd(false, false).singular_values;
    let top = sv.max().max(1.0);
    sv.iter().filter(|&&s| s < 1e-9 * top).count() + unknowns.saturating_sub(sv.len())
}

/// Angular solutions paired with radial shells.
#[derive(Debug, Clone)]
pub struct SteerableKernelBasis {
    pub lambda_out: usize,
    pub theta_in: usize,
    pub j_list: Vec<usize>,
    pub angular: Vec<AngularSolution>,
    pub radial: RadialShells,
}

impl SteerableKernelBasis {
    pub fn new(lambda_out: usize, theta_in: usize, radial: RadialShells) -> Self {
        let angular = solve_angular_basis(lambda_out, theta_in);
        SteerableKernelBasis {
            lambda_out,
            theta_in,
            j_list: angular.iter().map(|a| a.j).collect(),
            angular,
            radial,
        }
    }

    /// Number of `(J, k)` elements.
    pub fn len(&self) -> usize {
        self.angular.len() * self.radial.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Σ_J (2J+1)`: one angular component per `(J, m)`.
    pub fn angular_element_count(&self) -> usize {
        self.j_list.iter().map(|j| 2 * j + 1).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.j_list.iter().copied().max().unwrap_or(0)
    }

    pub fn feature_types(&self) -> (FeatureType, FeatureType) {
        (
            FeatureType::new(&[(self.theta_in, 1)]),
            FeatureType::new(&[(self.lambda_out, 1)]),
        )
    }

    /// Element `(J_index, k)` at `y`; entries with `J > 0` vanish at the origin.
    pub fn eval_element(&self, ji: usize, k: usize, y: &Vector3<f64>) -> DMatrix<f64> {
        let (o, i) = (2 * self.lambda_out + 1, 2 * self.theta_in + 1);
        let r = y.norm();
        let sol = &self.angular[ji];
        if r < 1e-12 {
            if sol.j > 0 {
                return DMatrix::zeros(o, i);
            }
            let v = sol.eval(&Vector3::z()) * self.radial.eval(k, 0.0);
            return DMatrix::from_row_slice(o, i, v.as_slice());
        }
        let v = sol.eval(&(y / r)) * self.radial.eval(k, r);
        DMatrix::from_row_slice(o, i, v.as_slice())
    }

    /// `Σ w_{J,k} κ^{J,k}(y)`, weights indexed `J_index·count + k`.
    pub fn eval(&self, weights: &[f64], y: &Vector3<f64>) -> Result<DMatrix<f64>> {
        if weights.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} basis elements",
                weights.len(),
                self.len()
            )));
        }
        let mut out = DMatrix::zeros(2 * self.lambda_out + 1, 2 * self.theta_in + 1);
        for ji in 0..self.angular.len() {
            for k in 0..self.radial.count {
                let w = weights[ji * self.radial.count + k];
                if w != 0.0 {
                    out += self.eval_element(ji, k, y) * w;
                }
            }
        }
        Ok(out)
    }

    /// Max of `‖κ(Ry) − ρ_λ(R)κ(y)ρ_θ(R)ᵀ‖` over the given rotations and points.
    pub fn continuous_residual(&self, weights: &[f64], rotations: &[EulerZYZ], points: &[Vector3<f64>]) -> Result<f64> {
        let (fi, fo) = self.feature_types();
        let mut worst = 0.0f64;
        for g in rotations {
            let rm = rotation_matrix(g);
            let (ri, ro) = (fi.representation(g), fo.representation(g));
            for y in points {
                let lhs = self.eval(weights, &(rm * y))?;
                let rhs = &ro * self.eval(weights, y)? * ri.transpose();
                worst = worst.max((lhs - rhs).amax());
            }
        }
        Ok(worst)
    }

    /// Samples the kernel on a centred cubic lattice, zero outside the inscribed ball.
    pub fn to_lattice(&self, weights: &[f64], side: usize, spacing: f64) -> Result<VolumetricKernel> {
        self.to_lattice_with_radius(weights, side, spacing, (side / 2) as f64 * spacing)
    }

    /// As [`Self::to_lattice`] with an explicit support radius.
    pub fn to_lattice_with_radius(
        &self,
        weights: &[f64],
        side: usize,
        spacing: f64,
        radius: f64,
    ) -> Result<VolumetricKernel> {
        if side % 2 == 0 {
            return Err(Error::ShapeMismatch("lattice side must be odd".into()));
        }
        let used: usize = self
            .angular
            .iter()
            .enumerate()
            .filter(|(ji, _)| (0..self.radial.count).any(|k| weights.get(ji * self.radial.count + k).is_some_and(|w| *w != 0.0)))
            .map(|(_, a)| a.j)
            .max()
            .unwrap_or(0);
        if used > side / 2 {
            return Err(Error::BandlimitOverflow {
                needed: used,
                available: side / 2,
            });
        }
        let mut k = VolumetricKernel::zeros(side, spacing, 2 * self.lambda_out + 1, 2 * self.theta_in + 1);
        k.angular_degree = used;
        let per = k.out_dim * k.in_dim;
        let vals: Vec<Vec<f64>> = (0..side * side * side)
            .into_par_iter()
            .map(|p| {
                let y = k.point(p);
                if y.norm() > radius + 1e-9 * spacing {
                    return Ok(vec![0.0; per]);
                }
                let m = self.eval(weights, &y)?;
                Ok(m.transpose().as_slice().to_vec())
            })
            .collect::<Result<_>>()?;
        k.values = vals.concat();
        Ok(k)
    }
}

/// Kernel samples on a centred cubic lattice of odd side.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumetricKernel {
    pub side: usize,
    pub spacing: f64,
    pub out_dim: usize,
    pub in_dim: usize,
    /// Harmonic degree bound of the angular part on each shell.
    pub angular_degree: usize,
    /// Point-major, each point a row-major `out_dim × in_dim` block.
    pub values: Vec<f64>,
}

impl VolumetricKernel {
    pub fn zeros(side: usize, spacing: f64, out_dim: usize, in_dim: usize) -> Self {
        VolumetricKernel {
            side,
            spacing,
            out_dim,
            in_dim,
            angular_degree: 0,
            values: vec![0.0; side * side * side * out_dim * in_dim],
        }
    }

    pub fn random(rng: &mut impl Rng, side: usize, spacing: f64, out_dim: usize, in_dim: usize, angular_degree: usize) -> Self {
        let mut k = Self::zeros(side, spacing, out_dim, in_dim);
        k.angular_degree = angular_degree;
        for v in &mut k.values {
            *v = crate::rng::uniform(rng);
        }
        k
    }

    /// `profile(r)·I` for square kernels.
    pub fn isotropic(side: usize, spacing: f64, dim: usize, profile: impl Fn(f64) -> f64) -> Self {
        let mut k = Self::zeros(side, spacing, dim, dim);
        for p in 0..side * side * side {
            let v = profile(k.point(p).norm());
            for a in 0..dim {
                k.values[p * dim * dim + a * dim + a] = v;
            }
        }
        k
    }

    /// Identity at the centre, zero elsewhere.
    pub fn delta(side: usize, dim: usize) -> Self {
        Self::isotropic(side, 1.0, dim, |r| if r < 1e-12 { 1.0 } else { 0.0 })
    }

    fn half(&self) -> i64 {
        (self.side / 2) as i64
    }

    /// Integer offset of point `p`.
    pub fn offset(&self, p: usize) -> [i64; 3] {
        lattice_offset(self.side, p)
    }

    pub fn point(&self, p: usize) -> Vector3<f64> {
        let o = self.offset(p);
        Vector3::new(o[0] as f64, o[1] as f64, o[2] as f64) * self.spacing
    }

    pub fn at(&self, p: usize) -> DMatrix<f64> {
        let per = self.out_dim * self.in_dim;
        DMatrix::from_row_slice(self.out_dim, self.in_dim, &self.values[p * per..(p + 1) * per])
    }
}

fn lattice_offset(side: usize, p: usize) -> [i64; 3] {
    let c = (side / 2) as i64;
    let s = side;
    [
        (p / (s * s)) as i64 - c,
        ((p / s) % s) as i64 - c,
        (p % s) as i64 - c,
    ]
}

fn lattice_index(side: usize, o: [i64; 3]) -> Option<usize> {
    let c = (side / 2) as i64;
    let s = side as i64;
    let idx: Vec<i64> = o.iter().map(|v| v + c).collect();
    if idx.iter().all(|&v| (0..s).contains(&v)) {
        Some(((idx[0] * s + idx[1]) * s + idx[2]) as usize)
    } else {
        None
    }
}

/// Outcome of the lattice constraint check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeResidual {
    pub residual: f64,
    /// Shells on which the angular fit was well posed and hence checked.
    pub shells_used: usize,
    pub shells_total: usize,
}

/// Checks `κ(Ry) = ρ_out(R)κ(y)ρ_in(R)ᵀ` on a lattice kernel. Each shell of
/// equal radius is fitted by real harmonics up to the kernel's angular degree,
/// which resamples it at the rotated points; shells too small for a full-rank
/// fit are skipped. The centre is checked directly.
pub fn constraint_residual(
    kernel: &VolumetricKernel,
    rho_in: &FeatureType,
    rho_out: &FeatureType,
    rotations: &[EulerZYZ],
) -> Result<LatticeResidual> {
    if rho_in.dim() != kernel.in_dim || rho_out.dim() != kernel.out_dim {
        return Err(Error::ShapeMismatch("feature types do not match kernel blocks".into()));
    }
    let reps: Vec<(Matrix3<f64>, DMatrix<f64>, DMatrix<f64>)> = rotations
        .iter()
        .map(|g| (rotation_matrix(g), rho_in.representation(g), rho_out.representation(g)))
        .collect();
    let c = kernel.half();
    let mut shells: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for p in 0..kernel.side.pow(3) {
        let o = kernel.offset(p);
        let r2 = o.iter().map(|v| v * v).sum::<i64>();
        if r2 <= c * c {
            shells.entry(r2).or_default().push(p);
        }
    }
    let deg = kernel.angular_degree;
    let nf = (deg + 1) * (deg + 1);
    let per = kernel.out_dim * kernel.in_dim;
    let mut worst = 0.0f64;
    let mut used = 0;
    let total = shells.len();
    for (r2, pts) in &shells {
        if *r2 == 0 {
            let k0 = kernel.at(pts[0]);
            for (_, ri, ro) in &reps {
                worst = worst.max((ro * &k0 * ri.transpose() - &k0).amax());
            }
            used += 1;
            continue;
        }
        if pts.len() < nf {
            continue;
        }
        let mut a = DMatrix::zeros(pts.len(), nf);
        let mut b = DMatrix::zeros(pts.len(), per);
        for (row, &p) in pts.iter().enumerate() {
            let y = kernel.point(p);
            for (col, v) in real_sph_all(deg, &y.normalize()).into_iter().enumerate() {
                a[(row, col)] = v;
            }
            for q in 0..per {
                b[(row, q)] = kernel.values[p * per + q];
            }
        }
        let sv = a.clone().svd(false, false).singular_values;
        if sv.min() < 1e-8 * sv.max() {
            continue;
        }
        let qr = a.qr();
        let coef = qr
            .r()
            .solve_upper_triangular(&(qr.q().transpose() * &b))
            .ok_or_else(|| Error::ShapeMismatch("singular shell fit".into()))?;
        used += 1;
        for (rm, ri, ro) in &reps {
            for &p in pts {
                let y = kernel.point(p);
                let basis = DMatrix::from_row_slice(1, nf, &real_sph_all(deg, &(rm * y).normalize()));
                let fit = basis * &coef;
                let lhs = DMatrix::from_row_slice(kernel.out_dim, kernel.in_dim, fit.as_slice());
                // from_row_slice on a 1×per row reads in order, so lhs is row-major.
                let rhs = ro * kernel.at(p) * ri.transpose();
                worst = worst.max((lhs - rhs).amax());
            }
        }
    }
    Ok(LatticeResidual {
        residual: worst,
        shells_used: used,
        shells_total: total,
    })
}

/// Vector features on a centred cubic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub side: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(side: usize, dim: usize) -> Self {
        LatticeField {
            side,
            dim,
            values: vec![0.0; side.pow(3) * dim],
        }
    }

    pub fn random(rng: &mut impl Rng, side: usize, dim: usize) -> Self {
        let mut f = Self::zeros(side, dim);
        for v in &mut f.values {
            *v = crate::rng::uniform(rng);
        }
        f
    }

    /// Samples `f` at integer offsets times `spacing`.
    pub fn from_fn(side: usize, dim: usize, spacing: f64, f: impl Fn(&Vector3<f64>) -> DVector<f64> + Sync) -> Self {
        let vals: Vec<Vec<f64>> = (0..side.pow(3))
            .into_par_iter()
            .map(|p| {
                let o = lattice_offset(side, p);
                let x = Vector3::new(o[0] as f64, o[1] as f64, o[2] as f64) * spacing;
                f(&x).as_slice().to_vec()
            })
            .collect();
        LatticeField {
            side,
            dim,
            values: vals.concat(),
        }
    }

    pub fn at(&self, p: usize) -> &[f64] {
        &self.values[p * self.dim..(p + 1) * self.dim]
    }

    /// `f'(x) = ρ f(R⁻¹x)` for a rotation mapping the lattice to itself.
    pub fn rotated(&self, r: &Matrix3<f64>, rho: &DMatrix<f64>) -> Result<Self> {
        if r.iter().any(|v| (v - v.round()).abs() > 1e-9) {
            return Err(Error::UnsupportedAction("rotation is not a lattice symmetry".into()));
        }
        let ri = r.transpose().map(|v| v.round() as i64);
        let mut out = Self::zeros(self.side, self.dim);
        for p in 0..self.side.pow(3) {
            let o = lattice_offset(self.side, p);
            let src = [0, 1, 2].map(|a| (0..3).map(|b| ri[(a, b)] * o[b]).sum::<i64>());
            let q = lattice_index(self.side, src).expect("cube maps to itself");
            let v = rho * DVector::from_column_slice(self.at(q));
            out.values[p * self.dim..(p + 1) * self.dim].copy_from_slice(v.as_slice());
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `out(y) = Σ_t κ(y−t) f(t)` over the lattice, zero outside.
pub fn semidirect_conv(kernel: &VolumetricKernel, f: &LatticeField) -> Result<LatticeField> {
    if f.dim != kernel.in_dim {
        return Err(Error::ShapeMismatch(format!(
            "field dimension {} but kernel input {}",
            f.dim, kernel.in_dim
        )));
    }
    let vals: Vec<Vec<f64>> = (0..f.side.pow(3))
        .into_par_iter()
        .map(|p| conv_point(kernel, f, p))
        .collect();
    Ok(LatticeField {
        side: f.side,
        dim: kernel.out_dim,
        values: vals.concat(),
    })
}

/// One output sample of [`semidirect_conv`].
pub fn semidirect_conv_at(kernel: &VolumetricKernel, f: &LatticeField, p: usize) -> Result<Vec<f64>> {
    if f.dim != kernel.in_dim {
        return Err(Error::ShapeMismatch("field and kernel dimensions differ".into()));
    }
    Ok(conv_point(kernel, f, p))
}

fn conv_point(kernel: &VolumetricKernel, f: &LatticeField, p: usize) -> Vec<f64> {
    let y = lattice_offset(f.side, p);
    let per = kernel.out_dim * kernel.in_dim;
    let mut acc = vec![0.0; kernel.out_dim];
    for q in 0..kernel.side.pow(3) {
        let d = kernel.offset(q);
        let Some(t) = lattice_index(f.side, [y[0] - d[0], y[1] - d[1], y[2] - d[2]]) else {
            continue;
        };
        let kv = &kernel.values[q * per..(q + 1) * per];
        let fv = f.at(t);
        for (o, a) in acc.iter_mut().enumerate() {
            for i in 0..kernel.in_dim {
                *a += kv[o * kernel.in_dim + i] * fv[i];
            }
        }
    }
    acc
}

/// Relative equivariance defect at the lattice centre for a generic rotation,
/// at spacings `h, h/2, …`. The kernel uses shells `k ≥ 1` fixed in physical
/// units with support radius `4h`; the input is a smooth analytic field.
pub fn refinement_study(
    lambda_out: usize,
    theta_in: usize,
    rotation: &EulerZYZ,
    h: f64,
    levels: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let basis = SteerableKernelBasis::new(lambda_out, theta_in, RadialShells::new(3, h));
    let weights: Vec<f64> = (0..basis.len())
        .map(|i| if i % basis.radial.count == 0 { 0.0 } else { crate::rng::uniform(rng) })
        .collect();
    let (fi, fo) = basis.feature_types();
    let din = fi.dim();
    let a = Vector3::new(0.4, -0.3, 0.5) * h;
    let b = DVector::from_fn(din, |_, _| crate::rng::uniform(rng));
    let cm = DMatrix::from_fn(din, 3, |_, _| crate::rng::uniform(rng));
    let s = 1.5 * h;
    let field = move |x: &Vector3<f64>| {
        let g = (-(x - a).norm_squared() / (2.0 * s * s)).exp();
        (&b + &cm * (x / h)) * g
    };
    let rm = rotation_matrix(rotation);
    let (ri, ro) = (fi.representation(rotation), fo.representation(rotation));
    let mut out = Vec::with_capacity(levels);
    for lvl in 0..levels {
        let hh = h / (1 << lvl) as f64;
        let half = 4 << lvl;
        let side = 2 * half + 1;
        let kernel = basis.to_lattice_with_radius(&weights, side, hh, 4.0 * h)?;
        let fld = |x: &Vector3<f64>| field(x);
        let f = LatticeField::from_fn(side, din, hh, fld);
        let rot = |x: &Vector3<f64>| &ri * field(&(rm.transpose() * x));
        let fr = LatticeField::from_fn(side, din, hh, rot);
        let centre = side.pow(3) / 2;
        let o = DVector::from_vec(semidirect_conv_at(&kernel, &f, centre)?);
        let orot = DVector::from_vec(semidirect_conv_at(&kernel, &fr, centre)?);
        out.push((orot - &ro * &o).amax() / o.amax());
    }
    Ok(out)
}

/// Radial profile of planar kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    Constant { value: f64 },
    Gaussian { center: f64, sigma: f64 },
    /// Piecewise linear through `(r, value)` pairs, constant beyond the ends.
    Table { r: Vec<f64>, values: Vec<f64> },
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Constant { value } => *value,
            RadialProfile::Gaussian { center, sigma } => (-(r - center).powi(2) / (2.0 * sigma * sigma)).exp(),
            RadialProfile::Table { r: rs, values } => {
                if rs.is_empty() {
                    return 0.0;
                }
                let i = rs.partition_point(|&x| x <= r);
                if i == 0 {
                    values[0]
                } else if i == rs.len() {
                    values[rs.len() - 1]
                } else {
                    let t = (r - rs[i - 1]) / (rs[i] - rs[i - 1]);
                    values[i - 1] * (1.0 - t) + values[i] * t
                }
            }
        }
    }
}

/// `κ_m(r, θ; β) = R(r) e^{i(mθ+β)}`; satisfies `κ_m(r, θ−φ) = e^{−imφ} κ_m(r, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularHarmonic {
    pub m: i64,
    pub radial: RadialProfile,
    pub beta: f64,
}

impl CircularHarmonic {
    pub fn new(m: i64, radial: RadialProfile, beta: f64) -> Self {
        CircularHarmonic { m, radial, beta }
    }

    pub fn eval(&self, r: f64, theta: f64) -> C64 {
        C64::from_polar(self.radial.eval(r), self.m as f64 * theta + self.beta)
    }
}

/// Real SO(2) irrep of order `n`: `[1]` or the rotation by `nθ`.
pub fn so2_irrep(n: usize, theta: f64) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    let (s, c) = (n as f64 * theta).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Multiplicities of real SO(2) irreps, ordered by ascending order `n`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct So2Type {
    pub mult: BTreeMap<usize, usize>,
}

impl So2Type {
    pub fn new(pairs: &[(usize, usize)]) -> Self {
        let mut mult = BTreeMap::new();
        for &(n, c) in pairs {
            if c > 0 {
                *mult.entry(n).or_insert(0) += c;
            }
        }
        So2Type { mult }
    }

    pub fn dim(&self) -> usize {
        self.mult.iter().map(|(&n, &c)| c * if n == 0 { 1 } else { 2 }).sum()
    }

    /// `(order, offset)` per copy.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (&n, &c) in &self.mult {
            for _ in 0..c {
                out.push((n, off));
                off += if n == 0 { 1 } else { 2 };
            }
        }
        out
    }

    pub fn representation(&self, theta: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (n, off) in self.blocks() {
            let b = so2_irrep(n, theta);
            m.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(&b);
        }
        m
    }
}

/// An angular neighbour kernel `κ(θ): V_in → V_out` on a tangent plane.
pub trait NeighbourKernel: Send + Sync {
    fn in_type(&self) -> &So2Type;
    fn out_type(&self) -> &So2Type;
    fn eval(&self, theta: f64) -> DMatrix<f64>;
}

/// `κ(θ) = ρ_out(θ) K ρ_in(−θ)`; its entries are circular harmonics of
/// orders `n_out ± n_in`, and it satisfies the gauge condition for any `K`.
#[derive(Debug, Clone)]
pub struct So2SteerableKernel {
    pub input: So2Type,
    pub output: So2Type,
    pub k: DMatrix<f64>,
}

impl So2SteerableKernel {
    pub fn new(input: So2Type, output: So2Type, k: DMatrix<f64>) -> Result<Self> {
        if k.nrows() != output.dim() || k.ncols() != input.dim() {
            return Err(Error::ShapeMismatch("kernel matrix shape".into()));
        }
        Ok(So2SteerableKernel { input, output, k })
    }

    pub fn random(rng: &mut impl Rng, input: So2Type, output: So2Type) -> Self {
        let k = DMatrix::from_fn(output.dim(), input.dim(), |_, _| crate::rng::uniform(rng));
        So2SteerableKernel { input, output, k }
    }
}

impl NeighbourKernel for So2SteerableKernel {
    fn in_type(&self) -> &So2Type {
        &self.input
    }

    fn out_type(&self) -> &So2Type {
        &self.output
    }

    fn eval(&self, theta: f64) -> DMatrix<f64> {
        self.output.representation(theta) * &self.k * self.input.representation(-theta)
    }
}

/// A kernel independent of angle.
#[derive(Debug, Clone)]
pub struct IsotropicKernel {
    pub input: So2Type,
    pub output: So2Type,
    pub k: DMatrix<f64>,
}

impl NeighbourKernel for IsotropicKernel {
    fn in_type(&self) -> &So2Type {
        &self.input
    }

    fn out_type(&self) -> &So2Type {
        &self.output
    }

    fn eval(&self, _theta: f64) -> DMatrix<f64> {
        self.k.clone()
    }
}

/// Max of `‖κ(θ−φ) − ρ_out(−φ) κ(θ) ρ_in(φ)‖` over a fixed set of angle pairs.
pub fn so2_constraint_residual(k: &dyn NeighbourKernel) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..7 {
        for b in 0..5 {
            let theta = 0.37 + 0.91 * a as f64;
            let phi = -1.3 + 0.77 * b as f64;
            let lhs = k.eval(theta - phi);
            let rhs = k.out_type().representation(-phi) * k.eval(theta) * k.in_type().representation(phi);
            worst = worst.max((lhs - rhs).amax());
        }
    }
    worst
}

/// Serializable basis with residual certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisExport {
    pub lambda_out: usize,
    pub theta_in: usize,
    pub side: usize,
    pub spacing: f64,
    pub radial: RadialShells,
    pub j_list: Vec<usize>,
    pub angular_elements: usize,
    pub elements: Vec<ExportedElement>,
    pub continuous_residual: f64,
    pub lattice_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExportedElement {
    pub j: usize,
    pub k: usize,
    /// Point-major lattice samples, each a row-major block.
    pub values: Vec<f64>,
    pub continuous_residual: f64,
    pub lattice_residual: f64,
}

/// Builds, certifies and flattens every `(J, k)` element on a lattice.
pub fn export_basis(
    lambda_out: usize,
    theta_in: usize,
    side: usize,
    spacing: f64,
    shells: usize,
    rng: &mut impl Rng,
) -> Result<BasisExport> {
    CGTable::shared(lambda_out.max(theta_in));
    let basis = SteerableKernelBasis::new(lambda_out, theta_in, RadialShells::new(shells, spacing));
    let (fi, fo) = basis.feature_types();
    let rotations: Vec<EulerZYZ> = (0..10).map(|_| crate::rng::rotation(rng)).collect();
    let points: Vec<Vector3<f64>> = (0..10)
        .map(|_| {
            let (t, p) = crate::rng::sphere_point(rng);
            crate::harmonics::sphere_vector(t, p) * (spacing * (0.5 + 2.0 * rng.gen::<f64>()))
        })
        .collect();
    let mut elements = Vec::new();
    for (ji, sol) in basis.angular.iter().enumerate() {
        for k in 0..shells {
            let mut w = vec![0.0; basis.len()];
            w[ji * shells + k] = 1.0;
            let cont = basis.continuous_residual(&w, &rotations, &points)?;
            let lat = basis.to_lattice(&w, side, spacing)?;
            let lr = constraint_residual(&lat, &fi, &fo, &rotations)?;
            elements.push(ExportedElement {
                j: sol.j,
                k,
                values: lat.values,
                continuous_residual: cont,
                lattice_residual: lr.residual,
            });
        }
    }
    Ok(BasisExport {
        lambda_out,
        theta_in,
        side,
        spacing,
        radial: basis.radial,
        j_list: basis.j_list.clone(),
        angular_elements: basis.angular_element_count(),
        continuous_residual: elements.iter().map(|e| e.continuous_residual).fold(0.0, f64::max),
        lattice_residual: elements.iter().map(|e| e.lattice_residual).fold(0.0, f64::max),
        elements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample(r: &mut impl Rng, n: usize) -> (Vec<EulerZYZ>, Vec<Vector3<f64>>) {
        let rots = (0..n).map(|_| rng::rotation(r)).collect();
        let pts = (0..n)
            .map(|_| {
                let (t, p) = rng::sphere_point(r);
                crate::harmonics::sphere_vector(t, p) * (0.3 + 2.0 * r.gen::<f64>())
            })
            .collect();
        (rots, pts)
    }

    #[test]
    fn j_ranges() {
        assert_eq!(SteerableKernelBasis::new(0, 0, RadialShells::new(1, 1.0)).j_list, vec![0]);
        assert_eq!(SteerableKernelBasis::new(1, 0, RadialShells::new(1, 1.0)).j_list, vec![1]);
        let b = SteerableKernelBasis::new(1, 1, RadialShells::new(1, 1.0));
        assert_eq!(b.j_list, vec![0, 1, 2]);
        assert_eq!(b.angular_element_count(), 9);
    }

    #[test]
    fn continuous_constraint_every_element() {
        let mut r = rng::seeded(11);
        let (rots, pts) = sample(&mut r, 50);
        for l in 0..=2 {
            for t in 0..=2 {
                let b = SteerableKernelBasis::new(l, t, RadialShells::new(2, 1.0));
                for e in 0..b.len() {
                    let mut w = vec![0.0; b.len()];
                    w[e] = 1.0;
                    let res = b.continuous_residual(&w, &rots, &pts).unwrap();
                    assert!(res < 1e-9, "({l},{t}) element {e}: {res}");
                    let v = b.eval(&w, &pts[0]).unwrap();
                    assert!(v.amax() > 1e-3);
                }
                for a in &b.angular {
                    assert!(a.imaginary_defect(&pts[1].normalize()) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn one_real_solution_per_degree() {
        let mut r = rng::seeded(12);
        for (l, t) in [(0usize, 0usize), (1, 0), (1, 1), (2, 1)] {
            for j in l.abs_diff(t)..=l + t {
                assert_eq!(constraint_nullity(l, t, j, &mut r), 1, "({l},{t};{j})");
            }
            assert_eq!(constraint_nullity(l, t, l + t + 1, &mut r), 0);
        }
    }

    #[test]
    fn first_degree_is_direction() {
        let b = SteerableKernelBasis::new(1, 0, RadialShells::new(1, 1.0));
        let y = Vector3::new(0.2, -0.5, 0.7);
        let v = b.eval(&[1.0], &y).unwrap();
        // the ℓ=1 real basis is (y, z, x)
        let u = Vector3::new(y.y, y.z, y.x).normalize();
        let w = DVector::from_column_slice(v.as_slice()).normalize();
        assert!((w.dot(&DVector::from_column_slice(u.as_slice())).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_residuals() {
        let mut r = rng::seeded(13);
        let rots: Vec<_> = (0..5).map(|_| rng::rotation(&mut r)).collect();
        let b = SteerableKernelBasis::new(1, 1, RadialShells::new(3, 1.0));
        let (fi, fo) = b.feature_types();
        let w: Vec<f64> = (0..b.len()).map(|_| rng::uniform(&mut r)).collect();
        let k = b.to_lattice(&w, 9, 1.0).unwrap();
        let res = constraint_residual(&k, &fi, &fo, &rots).unwrap();
        assert!(res.residual < 1e-6 && res.shells_used > 1, "{res:?}");

        let bad = VolumetricKernel::random(&mut r, 9, 1.0, 3, 3, 2);
        let res = constraint_residual(&bad, &fi, &fo, &rots).unwrap();
        assert!(res.residual > 0.1, "{res:?}");

        let iso = VolumetricKernel::isotropic(9, 1.0, 1, |r| (-r * r).exp());
        let s = FeatureType::scalars(1);
        assert!(constraint_residual(&iso, &s, &s, &rots).unwrap().residual < 1e-9);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut r = rng::seeded(14);
        let f = LatticeField::random(&mut r, 7, 3);
        let out = semidirect_conv(&VolumetricKernel::delta(5, 3), &f).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn quarter_turns_are_exact() {
        let mut r = rng::seeded(15);
        let b = SteerableKernelBasis::new(1, 2, RadialShells::new(2, 1.0));
        let (fi, fo) = b.feature_types();
        let w: Vec<f64> = (0..b.len()).map(|_| rng::uniform(&mut r)).collect();
        let k = b.to_lattice(&w, 7, 1.0).unwrap();
        let f = LatticeField::random(&mut r, 7, fi.dim());
        let out = semidirect_conv(&k, &f).unwrap();
        use std::f64::consts::FRAC_PI_2;
        for g in [
            EulerZYZ::new(FRAC_PI_2, 0.0, 0.0),
            EulerZYZ::new(0.0, FRAC_PI_2, 0.0),
            EulerZYZ::new(FRAC_PI_2, FRAC_PI_2, 0.0),
        ] {
            let rm = rotation_matrix(&g);
            let lhs = semidirect_conv(&k, &f.rotated(&rm, &fi.representation(&g)).unwrap()).unwrap();
            let rhs = out.rotated(&rm, &fo.representation(&g)).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
        let generic = rotation_matrix(&rng::rotation(&mut r));
        assert!(matches!(f.rotated(&generic, &fi.representation(&EulerZYZ::identity())), Err(Error::UnsupportedAction(_))));
    }

    #[test]
    fn refinement_decreases() {
        let mut r = rng::seeded(16);
        let g = rng::rotation(&mut r);
        let res = refinement_study(1, 1, &g, 1.0, 3, &mut r).unwrap();
        assert!(res[0] > res[1] && res[1] > res[2], "{res:?}");
    }

    #[test]
    fn circular_harmonics() {
        let ch = CircularHarmonic::new(3, RadialProfile::Gaussian { center: 1.0, sigma: 0.5 }, 0.4);
        for (t, p) in [(0.3, 1.1), (2.0, -0.7)] {
            let lhs = ch.eval(0.8, t - p);
            let rhs = C64::from_polar(1.0, -3.0 * p) * ch.eval(0.8, t);
            assert!((lhs - rhs).norm() < 1e-12);
        }
        let iso = CircularHarmonic::new(0, RadialProfile::Constant { value: 2.0 }, 0.0);
        assert_eq!(iso.eval(1.0, 0.3), iso.eval(1.0, 2.9));
    }

    #[test]
    fn so2_kernels() {
        let mut r = rng::seeded(17);
        let k = So2SteerableKernel::random(&mut r, So2Type::new(&[(0, 1), (1, 2)]), So2Type::new(&[(2, 1), (0, 1)]));
        assert!(so2_constraint_residual(&k) < 1e-12);
        let iso = IsotropicKernel {
            input: So2Type::new(&[(1, 1)]),
            output: So2Type::new(&[(1, 1)]),
            k: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        };
        assert!(so2_constraint_residual(&iso) > 0.1);
    }

    #[test]
    fn table_profile() {
        let p = RadialProfile::Table { r: vec![0.0, 1.0], values: vec![1.0, 3.0] };
        assert_eq!(p.eval(0.5), 2.0);
        assert_eq!(p.eval(4.0), 3.0);
        assert_eq!(p.eval(-1.0), 1.0);
    }
}
