use super::{log_factorial, parity, EulerZYZ};
use crate::C64;
use nalgebra::DMatrix;

/// A Wigner D-matrix `D^l(g)`, rows indexed by `m + l`, columns by `n + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerBlock {
    pub ell: usize,
    pub entries: DMatrix<C64>,
}

impl WignerBlock {
    pub fn get(&self, m: i64, n: i64) -> C64 {
        let l = self.ell as i64;
        self.entries[((m + l) as usize, (n + l) as usize)]
    }
}

/// Single entry `d^j_{m'm}(β)` by the explicit factorial sum.
fn d_entry_direct(j: i64, mp: i64, m: i64, beta: f64) -> f64 {
    let (s, c) = (beta / 2.0).sin_cos();
    let lf = |n: i64| log_factorial(n as usize);
    let pre = 0.5 * (lf(j + mp) + lf(j - mp) + lf(j + m) + lf(j - m));
    let kmin = 0.max(m - mp);
    let kmax = (j + m).min(j - mp);
    let mut acc = 0.0;
    for k in kmin..=kmax {
        let den = lf(j + m - k) + lf(k) + lf(mp - m + k) + lf(j - mp - k);
        let cp = (2 * j + m - mp - 2 * k) as i32;
        let sp = (mp - m + 2 * k) as i32;
        acc += parity(mp - m + k) * (pre - den).exp() * c.powi(cp) * s.powi(sp);
    }
    acc
}

/// `d^l(β)` from the explicit factorial formula; used for seeding and cross-checks.
pub fn wigner_d_direct(ell: usize, beta: f64) -> DMatrix<f64> {
    let l = ell as i64;
    DMatrix::from_fn(2 * ell + 1, 2 * ell + 1, |i, k| {
        d_entry_direct(l, i as i64 - l, k as i64 - l, beta)
    })
}

/// `d^l(β)` for all `l ≤ lmax` by the three-term recurrence in `l`.
pub fn wigner_d_all(lmax: usize, beta: f64) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = (0..=lmax)
        .map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1))
        .collect();
    let cb = beta.cos();
    let lm = lmax as i64;
    for m in -lm..=lm {
        for n in -lm..=lm {
            let l0 = m.abs().max(n.abs());
            let mut prev = 0.0;
            let mut cur = d_entry_direct(l0, m, n, beta);
            out[l0 as usize][((m + l0) as usize, (n + l0) as usize)] = cur;
            for l in l0..lm {
                let lf = l as f64;
                let l1 = lf + 1.0;
                let mn = (m * n) as f64;
                let (mf, nf) = (m as f64, n as f64);
                let a = l1 * (2.0 * lf + 1.0) / ((l1 * l1 - mf * mf) * (l1 * l1 - nf * nf)).sqrt();
                let shift = if l == 0 { 0.0 } else { mn / (lf * l1) };
                let back = if l == 0 {
                    0.0
                } else {
                    ((lf * lf - mf * mf) * (lf * lf - nf * nf)).sqrt() / (lf * (2.0 * lf + 1.0))
                };
                let next = a * ((cb - shift) * cur - back * prev);
                prev = cur;
                cur = next;
                let lu = (l + 1) as usize;
                out[lu][((m + l + 1) as usize, (n + l + 1) as usize)] = cur;
            }
        }
    }
    out
}

/// `d^l(β)`, a real orthogonal matrix.
pub fn wigner_d_small(ell: usize, beta: f64) -> DMatrix<f64> {
    wigner_d_all(ell, beta).pop().unwrap()
}

fn assemble(ell: usize, d: &DMatrix<f64>, g: &EulerZYZ) -> DMatrix<C64> {
    let l = ell as i64;
    DMatrix::from_fn(2 * ell + 1, 2 * ell + 1, |i, k| {
        let m = (i as i64 - l) as f64;
        let n = (k as i64 - l) as f64;
        C64::from_polar(d[(i, k)], -m * g.alpha - n * g.gamma)
    })
}

/// `D^l_{mn}(α,β,γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}`.
#[allow(non_snake_case)]
pub fn wigner_D(ell: usize, g: &EulerZYZ) -> WignerBlock {
    let d = wigner_d_small(ell, g.beta);
    WignerBlock {
        ell,
        entries: assemble(ell, &d, g),
    }
}

/// `D^l(g)` for every `l ≤ lmax`.
#[allow(non_snake_case)]
pub fn wigner_D_all(lmax: usize, g: &EulerZYZ) -> Vec<DMatrix<C64>> {
    wigner_d_all(lmax, g.beta)
        .iter()
        .enumerate()
        .map(|(l, d)| assemble(l, d, g))
        .collect()
}

/// Unitary `W` with `W D^l(R) W†` real orthogonal for every rotation.
///
/// Rows follow the real spherical harmonics of order `-l..=l`; for `l = 1`
/// these are proportional to `(y, z, x)`, so `W D^1(R) W† = P R Pᵀ` with the
/// cyclic permutation `P`.
pub fn real_basis_change(ell: usize) -> DMatrix<C64> {
    let l = ell as i64;
    let dim = 2 * ell + 1;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // Q maps complex harmonics to real ones; S is the signed antidiagonal with conj(D) = S D S.
    let mut q = DMatrix::<C64>::zeros(dim, dim);
    for m in -l..=l {
        let r = (m + l) as usize;
        let a = m.abs();
        if m > 0 {
            q[(r, (a + l) as usize)] = C64::new(parity(a) * h, 0.0);
            q[(r, (-a + l) as usize)] = C64::new(h, 0.0);
        } else if m < 0 {
            q[(r, (-a + l) as usize)] = C64::new(0.0, h);
            q[(r, (a + l) as usize)] = C64::new(0.0, -parity(a) * h);
        } else {
            q[(r, l as usize)] = C64::new(1.0, 0.0);
        }
    }
    let mut s = DMatrix::<C64>::zeros(dim, dim);
    for m in -l..=l {
        s[((m + l) as usize, (-m + l) as usize)] = C64::new(parity(m), 0.0);
    }
    q * s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::rotation_matrix;
    use crate::rng;

    fn max_abs(m: &DMatrix<C64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn degree_zero_is_one() {
        assert_eq!(wigner_d_small(0, 1.234)[(0, 0)], 1.0);
    }

    #[test]
    fn degree_one_closed_form() {
        for &b in &[0.0, 0.3, 1.2, 2.9, std::f64::consts::PI] {
            let d = wigner_d_small(1, b);
            let (s, c) = b.sin_cos();
            let r = std::f64::consts::SQRT_2;
            #[rustfmt::skip]
            let want = DMatrix::from_row_slice(3, 3, &[
                (1.0 + c) / 2.0, s / r, (1.0 - c) / 2.0,
                -s / r, c, s / r,
                (1.0 - c) / 2.0, -s / r, (1.0 + c) / 2.0,
            ]);
            assert!((d - want).abs().max() < 1e-14);
        }
    }

    #[test]
    fn recurrence_matches_direct_formula() {
        let mut r = rng::seeded(1);
        for _ in 0..20 {
            let b = rand::Rng::gen_range(&mut r, 0.0..std::f64::consts::PI);
            for (l, d) in wigner_d_all(8, b).iter().enumerate() {
                assert!((d - wigner_d_direct(l, b)).abs().max() < 1e-12, "l={l}");
            }
        }
    }

    #[test]
    fn identity_at_zero_beta() {
        for l in 0..10 {
            let d = wigner_d_small(l, 0.0);
            assert!((d - DMatrix::identity(2 * l + 1, 2 * l + 1)).abs().max() < 1e-14);
        }
    }

    #[test]
    fn unitary_and_homomorphic() {
        let mut r = rng::seeded(2);
        for _ in 0..20 {
            let g = rng::rotation(&mut r);
            let h = rng::rotation(&mut r);
            let gh = g.compose(&h);
            let (dg, dh, dgh) = (wigner_D_all(16, &g), wigner_D_all(16, &h), wigner_D_all(16, &gh));
            for l in 0..=16 {
                let id = DMatrix::<C64>::identity(2 * l + 1, 2 * l + 1);
                assert!(max_abs(&(&dg[l] * dg[l].adjoint() - id)) < 1e-12);
                assert!(max_abs(&(&dgh[l] - &dg[l] * &dh[l])) < 1e-11);
            }
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let mut r = rng::seeded(4);
        let g = rng::rotation(&mut r);
        let d = wigner_D(5, &g);
        for m in -5..=5i64 {
            for n in -5..=5i64 {
                let lhs = d.get(m, n).conj();
                let rhs = d.get(-m, -n) * parity(n - m);
                assert!((lhs - rhs).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn real_basis_degree_one_is_permuted_rotation() {
        let mut r = rng::seeded(5);
        let w = real_basis_change(1);
        let p = nalgebra::Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        for _ in 0..10 {
            let g = rng::rotation(&mut r);
            let rho = &w * wigner_D(1, &g).entries * w.adjoint();
            let want = p * rotation_matrix(&g) * p.transpose();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((rho[(i, j)] - C64::new(want[(i, j)], 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn real_basis_is_real_for_higher_degrees() {
        let mut r = rng::seeded(6);
        let g = rng::rotation(&mut r);
        for l in 0..6 {
            let w = real_basis_change(l);
            let rho = &w * wigner_D(l, &g).entries * w.adjoint();
            assert!(rho.iter().all(|z| z.im.abs() < 1e-13));
        }
    }
}
