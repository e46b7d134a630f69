//! Brute-force quadrature evaluation of the spatial convolution integrals.

use super::{KernelS2, KernelSO3};
use crate::grids::{
    rotate_spectral_s2, s2_synthesis, so3_analysis, so3_synthesis, S2Grid, SO3Grid,
    SpectralS2Signal, SpectralSO3Signal,
};
use crate::harmonics::EulerZYZ;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// A representation given by its real matrices.
pub type RepFn<'a> = &'a (dyn Fn(&EulerZYZ) -> DMatrix<f64> + Sync);

fn identity(n: usize) -> impl Fn(&EulerZYZ) -> DMatrix<f64> + Sync {
    move |_| DMatrix::identity(n, n)
}

/// `(κ⋆f)(R) = ∫ κ(R⁻¹x) f(x) dx` by quadrature, for each rotation; `[rotation][out channel]`.
pub fn s2_conv_scalar_spatial(
    kappa: &KernelS2,
    f: &SpectralS2Signal,
    grid: &S2Grid,
    rotations: &[EulerZYZ],
) -> Result<Vec<Vec<C64>>> {
    let r1 = identity(kappa.in_channels);
    let r2 = identity(kappa.out_channels);
    s2_conv_general_spatial(&r1, &r2, kappa, f, grid, rotations)
}

/// `(κ⋆f)(R) = ∫ ρ₂(R) κ(R⁻¹x) ρ₁(R⁻¹) f(x) dx`, evaluated as
/// `ρ₂(R) ∫ κ(y) ρ₁(R⁻¹) f(Ry) dy`. Exact when `2·L_grid > L_κ + L_f - 2`.
pub fn s2_conv_general_spatial(
    rho1: RepFn,
    rho2: RepFn,
    kappa: &KernelS2,
    f: &SpectralS2Signal,
    grid: &S2Grid,
    rotations: &[EulerZYZ],
) -> Result<Vec<Vec<C64>>> {
    let (d2, d1) = (kappa.out_channels, kappa.in_channels);
    if f.channels != d1 {
        return Err(Error::ShapeMismatch("signal channels differ from kernel input".into()));
    }
    let kv = s2_synthesis(&kappa.spec, grid)?;
    let nk = d1 * d2;
    let weights = grid.weights();
    rotations
        .par_iter()
        .map(|r| {
            let rinv = r.inverse();
            let fv = s2_synthesis(&rotate_spectral_s2(f, &rinv), grid)?;
            let a = rho1(&rinv);
            let b = rho2(r);
            let mut g = vec![C64::new(0.0, 0.0); d2];
            for (node, &w) in weights.iter().enumerate() {
                let fx = &fv[node * d1..(node + 1) * d1];
                let v: Vec<C64> = (0..d1)
                    .map(|s| (0..d1).map(|t| fx[t] * a[(s, t)]).sum())
                    .collect();
                for (nu, gn) in g.iter_mut().enumerate() {
                    for (s, vs) in v.iter().enumerate() {
                        *gn += kv[node * nk + nu * d1 + s] * vs * w;
                    }
                }
            }
            Ok((0..d2)
                .map(|mu| (0..d2).map(|nu| g[nu] * b[(mu, nu)]).sum())
                .collect())
        })
        .collect()
}

/// Spectrum of the quadrature S² convolution: evaluates it on every node of
/// an SO(3) grid of bandlimit `out_bandlimit` and analyses the samples.
pub fn s2_oracle_spectral(
    rho1: RepFn,
    rho2: RepFn,
    kappa: &KernelS2,
    f: &SpectralS2Signal,
    out_bandlimit: usize,
) -> Result<SpectralSO3Signal> {
    let sgrid = S2Grid::new(kappa.bandlimit().max(f.bandlimit));
    let ogrid = SO3Grid::new(out_bandlimit);
    let nodes: Vec<EulerZYZ> = (0..ogrid.len()).map(|i| ogrid.node(i)).collect();
    let vals = s2_conv_general_spatial(rho1, rho2, kappa, f, &sgrid, &nodes)?;
    so3_analysis(&ogrid, &vals.concat(), kappa.out_channels)
}

/// `(κ⋆f)(S) = ∫ ρ₂(R) κ(R⁻¹S) ρ₁(R⁻¹) f(R) dR` by quadrature over `grid`, at
/// each output rotation `S`; `[rotation][out channel]`.
pub fn so3_conv_general_spatial(
    rho1: RepFn,
    rho2: RepFn,
    kappa: &KernelSO3,
    f: &SpectralSO3Signal,
    grid: &SO3Grid,
    outputs: &[EulerZYZ],
) -> Result<Vec<Vec<C64>>> {
    let (d2, d1) = (kappa.out_channels, kappa.in_channels);
    if f.channels != d1 {
        return Err(Error::ShapeMismatch("signal channels differ from kernel input".into()));
    }
    let fv = so3_synthesis(f, grid)?;
    let pre: Vec<(f64, EulerZYZ, Vec<C64>, DMatrix<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let r = grid.node(i);
            let a = rho1(&r.inverse());
            let fx = &fv[i * d1..(i + 1) * d1];
            let v = (0..d1)
                .map(|s| (0..d1).map(|t| fx[t] * a[(s, t)]).sum())
                .collect();
            (grid.weight(i), r.inverse(), v, rho2(&r))
        })
        .collect();
    Ok(outputs
        .par_iter()
        .map(|s| {
            let mut out = vec![C64::new(0.0, 0.0); d2];
            for (w, rinv, v, b) in &pre {
                let k = kappa.spec.eval(&rinv.compose(s));
                for nu in 0..d2 {
                    let kv: C64 = (0..d1).map(|sg| k[nu * d1 + sg] * v[sg]).sum();
                    for (mu, o) in out.iter_mut().enumerate() {
                        *o += kv * b[(mu, nu)] * *w;
                    }
                }
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::spectral_conv::{s2_conv_scalar, so3_conv_scalar};

    #[test]
    fn y00_against_itself() {
        let mut k = KernelS2::zeros(1, 1, 1);
        let mut f = SpectralS2Signal::zeros(1, 1);
        k.spec.set(0, 0, 0, C64::new(1.0, 0.0));
        f.set(0, 0, 0, C64::new(1.0, 0.0));
        let mut r = rng::seeded(91);
        let rots: Vec<_> = (0..3).map(|_| rng::rotation(&mut r)).collect();
        let v = s2_conv_scalar_spatial(&k, &f, &S2Grid::new(2), &rots).unwrap();
        for x in v {
            assert!((x[0] - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn eq12_matches_quadrature_small() {
        let mut r = rng::seeded(92);
        let k = KernelS2::random(&mut r, 3, 2, 2);
        let f = SpectralS2Signal::random_real(&mut r, 3, 2);
        let id2 = identity(2);
        let oracle = s2_oracle_spectral(&id2, &id2, &k, &f, 3).unwrap();
        assert!(oracle.max_abs_diff(&s2_conv_scalar(&k, &f).unwrap()) < 1e-10);
    }

    #[test]
    fn so3_scalar_matches_quadrature_small() {
        let mut r = rng::seeded(93);
        let k = KernelSO3::random(&mut r, 3, 1, 2);
        let f = SpectralSO3Signal::random(&mut r, 3, 2);
        let spec = so3_conv_scalar(&k, &f).unwrap();
        let pts: Vec<_> = (0..4).map(|_| rng::rotation(&mut r)).collect();
        let (i2, i1) = (identity(2), identity(1));
        let o = so3_conv_general_spatial(&i2, &i1, &k, &f, &SO3Grid::new(3), &pts).unwrap();
        for (p, v) in pts.iter().zip(o) {
            assert!((spec.eval(p)[0] - v[0]).norm() < 1e-10);
        }
    }
}
