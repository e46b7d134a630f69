use super::{KernelS2, KernelSO3};
use crate::grids::{SpectralS2Signal, SpectralSO3Signal};
use crate::harmonics::parity;
use crate::{Error, Result, C64};
use std::f64::consts::PI;

fn check_s2(kappa: &KernelS2, f: &SpectralS2Signal) -> Result<()> {
    if kappa.in_channels != f.channels {
        return Err(Error::ShapeMismatch(format!(
            "kernel expects {} input channels, signal has {}",
            kappa.in_channels, f.channels
        )));
    }
    if kappa.bandlimit() != f.bandlimit {
        return Err(Error::ShapeMismatch(format!(
            "kernel bandlimit {} differs from signal bandlimit {}",
            kappa.bandlimit(),
            f.bandlimit
        )));
    }
    Ok(())
}

/// S² → SO(3) convolution of real signals:
/// `[(κ⋆f)_μ]^l_{mn} = Σ_ν (κ̂_{μν})^l_n conj((f̂_ν)^l_m)`.
///
/// The conjugate form relies on `f` being real-valued; use
/// [`s2_conv_scalar_complex`] for complex signals.
pub fn s2_conv_scalar(kappa: &KernelS2, f: &SpectralS2Signal) -> Result<SpectralSO3Signal> {
    check_s2(kappa, f)?;
    Ok(s2_pairwise(kappa, f, |f, c, l, m| f.get(c, l, m).conj()))
}

/// S² → SO(3) convolution valid for complex signals:
/// `[(κ⋆f)_μ]^l_{mn} = Σ_ν (κ̂_{μν})^l_n (-1)^m (f̂_ν)^l_{-m}`.
pub fn s2_conv_scalar_complex(kappa: &KernelS2, f: &SpectralS2Signal) -> Result<SpectralSO3Signal> {
    check_s2(kappa, f)?;
    Ok(s2_pairwise(kappa, f, |f, c, l, m| f.get(c, l, -m) * parity(m)))
}

fn s2_pairwise(
    kappa: &KernelS2,
    f: &SpectralS2Signal,
    fac: impl Fn(&SpectralS2Signal, usize, usize, i64) -> C64,
) -> SpectralSO3Signal {
    let l = f.bandlimit;
    let mut out = SpectralSO3Signal::zeros(l, kappa.out_channels);
    for mu in 0..kappa.out_channels {
        for nu in 0..kappa.in_channels {
            let k = kappa.component(mu, nu);
            for ll in 0..l {
                let li = ll as i64;
                for m in -li..=li {
                    let a = fac(f, nu, ll, m);
                    for n in -li..=li {
                        out.add(mu, ll, m, n, kappa.spec.get(k, ll, n) * a);
                    }
                }
            }
        }
    }
    out
}

/// One S² convolution pair `κ̂_n · conj(f̂_m)` or its complex-signal form.
pub(crate) fn s2_pair(
    kappa: &SpectralS2Signal,
    kc: usize,
    f: &SpectralS2Signal,
    fc: usize,
    complex: bool,
    out: &mut SpectralSO3Signal,
    oc: usize,
    scale: C64,
) {
    let l = kappa.bandlimit.min(f.bandlimit).min(out.bandlimit);
    for ll in 0..l {
        let li = ll as i64;
        for m in -li..=li {
            let a = if complex {
                f.get(fc, ll, -m) * parity(m)
            } else {
                f.get(fc, ll, m).conj()
            } * scale;
            if a.norm() == 0.0 {
                continue;
            }
            for n in -li..=li {
                out.add(oc, ll, m, n, kappa.get(kc, ll, n) * a);
            }
        }
    }
}

/// SO(3) → SO(3) convolution: `(κ⋆f)^l_{mn} = 8π²/(2l+1) Σ_p f̂^l_{mp} κ̂^l_{pn}`,
/// summed over input channels.
pub fn so3_conv_scalar(kappa: &KernelSO3, f: &SpectralSO3Signal) -> Result<SpectralSO3Signal> {
    if kappa.in_channels != f.channels {
        return Err(Error::ShapeMismatch(format!(
            "kernel expects {} input channels, signal has {}",
            kappa.in_channels, f.channels
        )));
    }
    let l = kappa.bandlimit().min(f.bandlimit);
    let mut out = SpectralSO3Signal::zeros(l, kappa.out_channels);
    for mu in 0..kappa.out_channels {
        for nu in 0..kappa.in_channels {
            so3_pair(&kappa.spec, kappa.component(mu, nu), f, nu, &mut out, mu, C64::new(1.0, 0.0));
        }
    }
    Ok(out)
}

/// `out[oc] += scale · (κ[kc] ⋆ f[fc])` on SO(3).
pub(crate) fn so3_pair(
    kappa: &SpectralSO3Signal,
    kc: usize,
    f: &SpectralSO3Signal,
    fc: usize,
    out: &mut SpectralSO3Signal,
    oc: usize,
    scale: C64,
) {
    let l = kappa.bandlimit.min(f.bandlimit).min(out.bandlimit);
    for ll in 0..l {
        let d = 2 * ll + 1;
        let fb = f.block(fc, ll);
        if fb.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let kb = kappa.block(kc, ll);
        let w = scale * (8.0 * PI * PI / d as f64);
        let ob = out.block_mut(oc, ll);
        for m in 0..d {
            for p in 0..d {
                let a = fb[m * d + p] * w;
                if a.norm() == 0.0 {
                    continue;
                }
                for n in 0..d {
                    ob[m * d + n] += a * kb[p * d + n];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn single_coefficient_pair() {
        let mut k = KernelS2::zeros(2, 1, 1);
        let mut f = SpectralS2Signal::zeros(2, 1);
        k.spec.set(0, 1, -1, C64::new(2.0, 1.0));
        f.set(0, 1, 1, C64::new(0.5, -3.0));
        let out = s2_conv_scalar(&k, &f).unwrap();
        let want = C64::new(2.0, 1.0) * C64::new(0.5, 3.0);
        for (i, z) in out.coeffs.iter().enumerate() {
            let w = if i == out.index(0, 1, 1, -1) { want } else { C64::new(0.0, 0.0) };
            assert_eq!(*z, w);
        }
    }

    #[test]
    fn real_and_complex_forms_agree_on_real_signals() {
        let mut r = rng::seeded(61);
        let k = KernelS2::random(&mut r, 5, 2, 3);
        let f = SpectralS2Signal::random_real(&mut r, 5, 3);
        let a = s2_conv_scalar(&k, &f).unwrap();
        let b = s2_conv_scalar_complex(&k, &f).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn so3_delta_kernel_is_identity() {
        let mut r = rng::seeded(62);
        let l = 5;
        let f = SpectralSO3Signal::random(&mut r, l, 1);
        let mut k = KernelSO3::zeros(l, 1, 1);
        for ll in 0..l {
            for p in -(ll as i64)..=ll as i64 {
                k.spec.set(0, ll, p, p, C64::new((2 * ll + 1) as f64 / (8.0 * PI * PI), 0.0));
            }
        }
        let out = so3_conv_scalar(&k, &f).unwrap();
        assert!(out.max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn zero_kernels_give_zero() {
        let mut r = rng::seeded(63);
        let f = SpectralS2Signal::random_real(&mut r, 4, 2);
        let out = s2_conv_scalar(&KernelS2::zeros(4, 3, 2), &f).unwrap();
        assert!(out.max_abs() == 0.0);
        let g = SpectralSO3Signal::random(&mut r, 4, 2);
        assert!(so3_conv_scalar(&KernelSO3::zeros(4, 1, 2), &g).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn shape_errors() {
        let f = SpectralS2Signal::zeros(4, 2);
        assert!(s2_conv_scalar(&KernelS2::zeros(4, 1, 3), &f).is_err());
        assert!(s2_conv_scalar(&KernelS2::zeros(3, 1, 2), &f).is_err());
    }
}
