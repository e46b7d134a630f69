use super::parity;
use crate::C64;
use std::f64::consts::PI;

/// Flat index of `(l, m)` in a degree-major harmonic array: `l² + l + m`.
#[inline]
pub fn sph_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Orthonormal associated Legendre functions `P̄_l^m(cos θ)` for `0 ≤ m ≤ l ≤ lmax`,
/// stored at `l(l+1)/2 + m`, so that `Y^l_m = P̄_l^m e^{imφ}` for `m ≥ 0`.
pub fn legendre_normalized_all(lmax: usize, theta: f64, cs_phase: bool) -> Vec<f64> {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut p = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    let (s, c) = theta.sin_cos();
    let sign = if cs_phase { -1.0 } else { 1.0 };
    p[0] = 0.5 / PI.sqrt();
    for m in 1..=lmax {
        let mf = m as f64;
        p[idx(m, m)] = sign * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[idx(m - 1, m - 1)];
    }
    for m in 0..lmax {
        p[idx(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * c * p[idx(m, m)];
    }
    let a = |l: usize, m: usize| {
        let (lf, mf) = (l as f64, m as f64);
        ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt()
    };
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            p[idx(l, m)] = a(l, m) * (c * p[idx(l - 1, m)] - p[idx(l - 2, m)] / a(l - 1, m));
        }
    }
    p
}

/// All `Y^l_m(θ, φ)` with `l ≤ lmax`, indexed by [`sph_index`].
///
/// With `cs_phase = false` the Condon–Shortley factor is dropped; the result
/// is still orthonormal but no longer matches the Wigner-D convention. This
/// exists for mutation testing only.
pub fn sph_harm_all(lmax: usize, theta: f64, phi: f64, cs_phase: bool) -> Vec<C64> {
    let p = legendre_normalized_all(lmax, theta, cs_phase);
    let mut y = vec![C64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)];
    for l in 0..=lmax {
        for m in 0..=l {
            let v = C64::from_polar(p[l * (l + 1) / 2 + m], m as f64 * phi);
            y[sph_index(l, m as i64)] = v;
            if m > 0 {
                let f = if cs_phase { parity(m as i64) } else { 1.0 };
                y[sph_index(l, -(m as i64))] = v.conj() * f;
            }
        }
    }
    y
}

/// `Y^l_m(θ, φ)`, orthonormal with Condon–Shortley phase.
pub fn sph_harm(ell: usize, m: i64, theta: f64, phi: f64) -> C64 {
    assert!(m.unsigned_abs() as usize <= ell, "|m| must not exceed l");
    let p = legendre_normalized_all(ell, theta, true);
    let a = m.unsigned_abs() as usize;
    let v = C64::from_polar(p[ell * (ell + 1) / 2 + a], a as f64 * phi);
    if m >= 0 {
        v
    } else {
        v.conj() * parity(m)
    }
}
