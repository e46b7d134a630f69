use super::scalar::{s2_pair, so3_pair};
use super::{ConvOptions, KernelS2, KernelSO3, RepSpectral};
use crate::grids::{SpectralS2Signal, SpectralSO3Signal};
use crate::harmonics::CGTable;
use crate::{Error, Result, C64};

fn nonzero_blocks(s: &SpectralSO3Signal, c: usize) -> Vec<usize> {
    (0..s.bandlimit)
        .filter(|&l| s.block(c, l).iter().any(|z| z.norm() != 0.0))
        .collect()
}

/// `out[oc] += scale · a[ac]·b[bc]`, the pointwise product of two SO(3)
/// functions, via `D^{l1}_{m1n1} D^{l2}_{m2n2} = Σ_J C^{JM}_{l1m1;l2m2} C^{JN}_{l1n1;l2n2} D^J_{MN}`.
/// Output degrees at or above `out.bandlimit` are dropped.
#[allow(clippy::too_many_arguments)]
pub fn so3_product_acc(
    out: &mut SpectralSO3Signal,
    oc: usize,
    a: &SpectralSO3Signal,
    ac: usize,
    b: &SpectralSO3Signal,
    bc: usize,
    scale: C64,
    cg: &CGTable,
) {
    let la = nonzero_blocks(a, ac);
    if la.is_empty() {
        return;
    }
    let lb = nonzero_blocks(b, bc);
    let lout = out.bandlimit as i64;
    for &l1 in &la {
        let ab = a.block(ac, l1);
        let i1 = l1 as i64;
        for &l2 in &lb {
            let bb = b.block(bc, l2);
            let i2 = l2 as i64;
            let jmin = (i1 - i2).abs();
            let jmax = (i1 + i2).min(lout - 1);
            if jmin > jmax {
                continue;
            }
            for m1 in -i1..=i1 {
                for n1 in -i1..=i1 {
                    let av = ab[((m1 + i1) * (2 * i1 + 1) + n1 + i1) as usize] * scale;
                    if av.norm() == 0.0 {
                        continue;
                    }
                    for m2 in -i2..=i2 {
                        for n2 in -i2..=i2 {
                            let bv = bb[((m2 + i2) * (2 * i2 + 1) + n2 + i2) as usize];
                            if bv.norm() == 0.0 {
                                continue;
                            }
                            let (mm, nn) = (m1 + m2, n1 + n2);
                            let prod = av * bv;
                            for j in jmin.max(mm.abs()).max(nn.abs())..=jmax {
                                let ju = j as usize;
                                let c = cg.get_unchecked(l1, m1, l2, m2, ju)
                                    * cg.get_unchecked(l1, n1, l2, n2, ju);
                                out.add(oc, ju, mm, nn, prod * c);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// S² → SO(3) convolution with representations `ρ₁` (input) and `ρ₂` (output).
///
/// Computed as `F_μ = Σ_ν ρ₂_{μν} · Σ_{στ} (κ_{νσ} ⋆ f_τ) · ρ₁(R⁻¹)_{στ}`, where
/// the scalar convolutions are pairwise conjugate products and the
/// pointwise products on SO(3) are Clebsch–Gordan contractions. Expanding
/// both products gives the full four-CG sum. The natural output bandlimit
/// is `min(L_κ, L_f) + L_ρ₁ + L_ρ₂ - 2`.
pub fn s2_conv_general(
    rho1: &RepSpectral,
    rho2: &RepSpectral,
    kappa: &KernelS2,
    f: &SpectralS2Signal,
    opts: &ConvOptions,
) -> Result<SpectralSO3Signal> {
    let (d1, d2) = (rho1.dim, rho2.dim);
    if kappa.in_channels != d1 || kappa.out_channels != d2 || f.channels != d1 {
        return Err(Error::ShapeMismatch(format!(
            "kernel {}×{}, signal {} channels, representations {d2}/{d1}",
            kappa.out_channels, kappa.in_channels, f.channels
        )));
    }
    let lg = kappa.bandlimit().min(f.bandlimit);
    let lp = lg + rho1.bandlimit() - 1;
    let lout = opts.out_bandlimit(lp + rho2.bandlimit() - 1);
    let needed = (lp - 1).max(rho2.bandlimit() - 1);
    let cg = opts.table(needed)?;
    let mut p = SpectralSO3Signal::zeros(lp, d2);
    let mut g = SpectralSO3Signal::zeros(lg, 1);
    for nu in 0..d2 {
        for sigma in 0..d1 {
            for tau in 0..d1 {
                if nonzero_blocks(&rho1.rho_inv, sigma * d1 + tau).is_empty() {
                    continue;
                }
                g.coeffs.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                s2_pair(&kappa.spec, kappa.component(nu, sigma), f, tau, false, &mut g, 0, one());
                so3_product_acc(&mut p, nu, &g, 0, &rho1.rho_inv, sigma * d1 + tau, one(), &cg);
            }
        }
    }
    let mut out = SpectralSO3Signal::zeros(lout, d2);
    for mu in 0..d2 {
        for nu in 0..d2 {
            so3_product_acc(&mut out, mu, &rho2.rho, mu * d2 + nu, &p, nu, one(), &cg);
        }
    }
    Ok(out)
}

/// SO(3) → SO(3) convolution with representations `ρ₁`, `ρ₂`.
///
/// Computed as `F_μ = Σ_{νσ} κ_{νσ} ⋆ (ρ₂_{μν} · Σ_τ ρ₁(R⁻¹)_{στ} f_τ)`; the
/// natural output bandlimit is `min(L_κ, L_f + L_ρ₁ + L_ρ₂ - 2)`.
pub fn so3_conv_general(
    rho1: &RepSpectral,
    rho2: &RepSpectral,
    kappa: &KernelSO3,
    f: &SpectralSO3Signal,
    opts: &ConvOptions,
) -> Result<SpectralSO3Signal> {
    let (d1, d2) = (rho1.dim, rho2.dim);
    if kappa.in_channels != d1 || kappa.out_channels != d2 || f.channels != d1 {
        return Err(Error::ShapeMismatch(format!(
            "kernel {}×{}, signal {} channels, representations {d2}/{d1}",
            kappa.out_channels, kappa.in_channels, f.channels
        )));
    }
    let ly = f.bandlimit + rho1.bandlimit() - 1;
    let lh = ly + rho2.bandlimit() - 1;
    let lout = opts.out_bandlimit(kappa.bandlimit().min(lh));
    let needed = (ly - 1).max(rho2.bandlimit() - 1);
    let cg = opts.table(needed)?;
    let mut y = SpectralSO3Signal::zeros(ly, d1);
    for sigma in 0..d1 {
        for tau in 0..d1 {
            so3_product_acc(&mut y, sigma, &rho1.rho_inv, sigma * d1 + tau, f, tau, one(), &cg);
        }
    }
    let mut out = SpectralSO3Signal::zeros(lout, d2);
    let mut h = SpectralSO3Signal::zeros(lout, d1);
    for mu in 0..d2 {
        for nu in 0..d2 {
            if nonzero_blocks(&rho2.rho, mu * d2 + nu).is_empty() {
                continue;
            }
            h.coeffs.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for sigma in 0..d1 {
                so3_product_acc(&mut h, sigma, &rho2.rho, mu * d2 + nu, &y, sigma, one(), &cg);
            }
            for sigma in 0..d1 {
                so3_pair(&kappa.spec, kappa.component(nu, sigma), &h, sigma, &mut out, mu, one());
            }
        }
    }
    Ok(out)
}
