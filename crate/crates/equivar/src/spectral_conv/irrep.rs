//! Convolutions with features split into irreps.
//!
//! Features are given in the complex irrep basis of their [`FeatureType`]
//! (component `ν` of copy `μ` of degree `λ`), so the representations act as
//! plain Wigner matrices and never need to be Fourier transformed: the
//! factors `D^λ_{νρ}(R)` and `D^θ_{τπ}(R⁻¹) = (-1)^{π-τ} D^θ_{-π,-τ}(R)` enter
//! as single Wigner functions coupled by Clebsch–Gordan coefficients.

use super::general::so3_product_acc;
use super::scalar::{s2_pair, so3_pair};
use super::{ConvOptions, KernelS2, KernelSO3};
use crate::grids::{SpectralS2Signal, SpectralSO3Signal};
use crate::harmonics::parity;
use crate::repr::FeatureType;
use crate::{Error, Result, C64};

/// The Wigner function `R ↦ D^l_{ab}(R)` as a one-hot spectrum.
fn wigner_element(l: usize, a: i64, b: i64) -> SpectralSO3Signal {
    let mut s = SpectralSO3Signal::zeros(l + 1, 1);
    s.set(0, l, a, b, C64::new(1.0, 0.0));
    s
}

fn check(ft_out: &FeatureType, ft_in: &FeatureType, ko: usize, ki: usize, fc: usize) -> Result<()> {
    if ko != ft_out.dim() || ki != ft_in.dim() || fc != ft_in.dim() {
        return Err(Error::ShapeMismatch(format!(
            "kernel {ko}×{ki} and signal {fc} channels do not match feature types {}/{}",
            ft_out.dim(),
            ft_in.dim()
        )));
    }
    Ok(())
}

/// `Σ_π (-1)^{π-τ} D^θ_{-π,-τ} · x_{off+π+θ}` accumulated into `out[oc]`.
#[allow(clippy::too_many_arguments)]
fn inverse_action(
    out: &mut SpectralSO3Signal,
    oc: usize,
    theta: usize,
    tau: i64,
    pi: i64,
    x: &SpectralSO3Signal,
    xc: usize,
    cg: &crate::harmonics::CGTable,
) {
    let w = wigner_element(theta, -pi, -tau);
    so3_product_acc(out, oc, &w, 0, x, xc, C64::new(parity(pi - tau), 0.0), cg);
}

/// S² → SO(3) convolution between irrep-typed features.
///
/// `F^{λμ}_ν = Σ D^λ_{νρ} (-1)^{π-τ} D^θ_{-π,-τ} (κ^{λμ;θσ}_{ρτ} ⋆ f^{θσ}_π)`, with the
/// scalar S² convolutions in their complex-signal form. Natural output
/// bandlimit: `min(L_κ, L_f) + θ_max + λ_max`.
pub fn irrep_s2_conv(
    ft_out: &FeatureType,
    ft_in: &FeatureType,
    kappa: &KernelS2,
    f: &SpectralS2Signal,
    opts: &ConvOptions,
) -> Result<SpectralSO3Signal> {
    check(ft_out, ft_in, kappa.out_channels, kappa.in_channels, f.channels)?;
    let lg = kappa.bandlimit().min(f.bandlimit);
    let (tmax, lmax) = (ft_in.max_degree(), ft_out.max_degree());
    let lout = opts.out_bandlimit(lg + tmax + lmax);
    let cg = opts.table((lg - 1 + tmax).max(lmax))?;
    let one = C64::new(1.0, 0.0);
    let mut out = SpectralSO3Signal::zeros(lout, ft_out.dim());
    let mut g = SpectralSO3Signal::zeros(lg, 1);
    for bo in ft_out.blocks() {
        let (lam, li) = (bo.lambda, bo.lambda as i64);
        for bi in ft_in.blocks() {
            let (th, ti) = (bi.lambda, bi.lambda as i64);
            let mut h = SpectralSO3Signal::zeros(lg + th, 2 * lam + 1);
            for rho in -li..=li {
                for tau in -ti..=ti {
                    let kc = kappa.component(bo.offset + (rho + li) as usize, bi.offset + (tau + ti) as usize);
                    for pi in -ti..=ti {
                        g.coeffs.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                        s2_pair(&kappa.spec, kc, f, bi.offset + (pi + ti) as usize, true, &mut g, 0, one);
                        inverse_action(&mut h, (rho + li) as usize, th, tau, pi, &g, 0, &cg);
                    }
                }
            }
            for nu in -li..=li {
                for rho in -li..=li {
                    let w = wigner_element(lam, nu, rho);
                    so3_product_acc(&mut out, bo.offset + (nu + li) as usize, &w, 0, &h, (rho + li) as usize, one, &cg);
                }
            }
        }
    }
    Ok(out)
}

/// SO(3) → SO(3) convolution between irrep-typed features.
///
/// `F^{λμ}_ν = Σ κ^{λμ;θσ}_{ρτ} ⋆ (D^λ_{νρ} (-1)^{π-τ} D^θ_{-π,-τ} f^{θσ}_π)`. Natural
/// output bandlimit: `min(L_κ, L_f + θ_max + λ_max)`.
pub fn irrep_so3_conv(
    ft_out: &FeatureType,
    ft_in: &FeatureType,
    kappa: &KernelSO3,
    f: &SpectralSO3Signal,
    opts: &ConvOptions,
) -> Result<SpectralSO3Signal> {
    check(ft_out, ft_in, kappa.out_channels, kappa.in_channels, f.channels)?;
    let (tmax, lmax) = (ft_in.max_degree(), ft_out.max_degree());
    let lout = opts.out_bandlimit(kappa.bandlimit().min(f.bandlimit + tmax + lmax));
    let cg = opts.table((f.bandlimit - 1 + tmax).max(lmax))?;
    let one = C64::new(1.0, 0.0);
    let mut out = SpectralSO3Signal::zeros(lout, ft_out.dim());
    for bi in ft_in.blocks() {
        let (th, ti) = (bi.lambda, bi.lambda as i64);
        // k_τ = Σ_π (-1)^{π-τ} D^θ_{-π,-τ} f_π
        let mut k = SpectralSO3Signal::zeros(f.bandlimit + th, 2 * th + 1);
        for tau in -ti..=ti {
            for pi in -ti..=ti {
                inverse_action(&mut k, (tau + ti) as usize, th, tau, pi, f, bi.offset + (pi + ti) as usize, &cg);
            }
        }
        let mut h = SpectralSO3Signal::zeros(lout, 2 * th + 1);
        for bo in ft_out.blocks() {
            let (lam, li) = (bo.lambda, bo.lambda as i64);
            for nu in -li..=li {
                for rho in -li..=li {
                    let w = wigner_element(lam, nu, rho);
                    h.coeffs.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                    for tau in 0..2 * th + 1 {
                        so3_product_acc(&mut h, tau, &w, 0, &k, tau, one, &cg);
                    }
                    for tau in -ti..=ti {
                        let kc = kappa.component(bo.offset + (rho + li) as usize, bi.offset + (tau + ti) as usize);
                        so3_pair(&kappa.spec, kc, &h, (tau + ti) as usize, &mut out, bo.offset + (nu + li) as usize, one);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::spectral_conv::{s2_conv_scalar_complex, so3_conv_scalar};

    #[test]
    fn scalar_types_reduce_to_scalar_conv() {
        let mut r = rng::seeded(81);
        let ft = FeatureType::scalars(1);
        let k = KernelS2::random(&mut r, 4, 1, 1);
        let f = SpectralS2Signal::random(&mut r, 4, 1);
        let a = irrep_s2_conv(&ft, &ft, &k, &f, &Default::default()).unwrap();
        assert!(a.max_abs_diff(&s2_conv_scalar_complex(&k, &f).unwrap()) < 1e-13);
        let k = KernelSO3::random(&mut r, 3, 1, 1);
        let f = SpectralSO3Signal::random(&mut r, 3, 1);
        let a = irrep_so3_conv(&ft, &ft, &k, &f, &Default::default()).unwrap();
        assert!(a.max_abs_diff(&so3_conv_scalar(&k, &f).unwrap()) < 1e-13);
    }
}
