//! Wigner matrices, spherical harmonics, Clebsch–Gordan coefficients and
//! Euler-angle rotations.

mod cg;
mod sph;
mod wigner;

pub use cg::{clebsch_gordan, CGTable};
pub use sph::{legendre_normalized_all, sph_harm, sph_harm_all, sph_index};
pub use wigner::{
    real_basis_change, wigner_D, wigner_D_all, wigner_d_all, wigner_d_direct, wigner_d_small,
    WignerBlock,
};

use crate::{Error, Result};
use nalgebra::Matrix3;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

/// Irrep label ℓ.
pub type Degree = usize;

/// Active ZYZ Euler angles: `R = Rz(alpha) Ry(beta) Rz(gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EulerZYZ {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl EulerZYZ {
    /// Wraps α, γ into [0, 2π); β must already lie in [0, π].
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        EulerZYZ {
            alpha: wrap(alpha),
            beta: beta.clamp(0.0, PI),
            gamma: wrap(gamma),
        }
    }

    pub fn identity() -> Self {
        EulerZYZ {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        rotation_matrix(self)
    }

    pub fn from_matrix(r: &Matrix3<f64>) -> Result<Self> {
        rotation_from_matrix(r)
    }

    /// The rotation `self · other`.
    pub fn compose(&self, other: &EulerZYZ) -> EulerZYZ {
        let m = self.to_matrix() * other.to_matrix();
        rotation_from_matrix(&m).expect("product of rotations")
    }

    pub fn inverse(&self) -> EulerZYZ {
        EulerZYZ::new(PI - self.gamma, self.beta, PI - self.alpha)
    }

    /// Rotation by `angle` about the z axis.
    pub fn about_z(angle: f64) -> Self {
        EulerZYZ::new(angle, 0.0, 0.0)
    }
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_matrix(g: &EulerZYZ) -> Matrix3<f64> {
    rot_z(g.alpha) * rot_y(g.beta) * rot_z(g.gamma)
}

/// Euler angles of a rotation matrix. At gimbal lock (sin β < 1e-9) γ is set to 0.
pub fn rotation_from_matrix(r: &Matrix3<f64>) -> Result<EulerZYZ> {
    let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    let err = orth.max(det);
    if !(err <= 1e-9) {
        return Err(Error::NotARotation(err));
    }
    let sb = (r[(0, 2)].powi(2) + r[(1, 2)].powi(2)).sqrt();
    let beta = sb.atan2(r[(2, 2)]);
    if sb < 1e-9 {
        let alpha = if r[(2, 2)] > 0.0 {
            r[(1, 0)].atan2(r[(0, 0)])
        } else {
            (-r[(1, 0)]).atan2(r[(1, 1)])
        };
        let beta = if r[(2, 2)] > 0.0 { 0.0 } else { PI };
        return Ok(EulerZYZ::new(alpha, beta, 0.0));
    }
    let alpha = r[(1, 2)].atan2(r[(0, 2)]);
    let gamma = r[(2, 1)].atan2(-r[(2, 0)]);
    Ok(EulerZYZ::new(alpha, beta, gamma))
}

/// Unit vector at colatitude θ, longitude φ.
pub fn sphere_vector(theta: f64, phi: f64) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// (θ, φ) of a nonzero vector, φ in [0, 2π).
pub fn sphere_angles(v: &nalgebra::Vector3<f64>) -> (f64, f64) {
    let n = v.norm();
    let theta = (v.z / n).clamp(-1.0, 1.0).acos();
    (theta, wrap(v.y.atan2(v.x)))
}

const LOG_FACT_LEN: usize = 1024;

/// ln(n!) for n < 1024.
pub fn log_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut v = vec![0.0; LOG_FACT_LEN];
        for k in 1..LOG_FACT_LEN {
            v[k] = v[k - 1] + (k as f64).ln();
        }
        v
    });
    t[n]
}

#[inline]
pub fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn identity_matrix_gives_zero_angles() {
        let g = rotation_from_matrix(&Matrix3::identity()).unwrap();
        assert_eq!((g.alpha, g.beta, g.gamma), (0.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let g = rotation_from_matrix(&rot_z(PI / 2.0)).unwrap();
        assert!((g.alpha - PI / 2.0).abs() < 1e-12);
        assert!(g.beta.abs() < 1e-12 && g.gamma == 0.0);
        // R e_x = e_y
        let v = g.to_matrix() * nalgebra::Vector3::x();
        assert!((v - nalgebra::Vector3::y()).norm() < 1e-12);
    }

    #[test]
    fn random_round_trip() {
        let mut r = rng::seeded(7);
        for _ in 0..200 {
            let g = rng::rotation(&mut r);
            let m = g.to_matrix();
            let back = rotation_from_matrix(&m).unwrap().to_matrix();
            assert!((m - back).abs().max() < 1e-9);
        }
    }

    #[test]
    fn gimbal_lock_at_pi() {
        let m = rot_z(0.3) * rot_y(PI) * rot_z(1.1);
        let g = rotation_from_matrix(&m).unwrap();
        assert_eq!(g.gamma, 0.0);
        assert!((g.to_matrix() - m).abs().max() < 1e-9);
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(rotation_from_matrix(&m), Err(Error::NotARotation(_))));
        let m = Matrix3::identity() * 1.01;
        assert!(rotation_from_matrix(&m).is_err());
    }

    #[test]
    fn inverse_and_compose() {
        let mut r = rng::seeded(3);
        for _ in 0..50 {
            let g = rng::rotation(&mut r);
            let e = g.compose(&g.inverse()).to_matrix();
            assert!((e - Matrix3::identity()).abs().max() < 1e-12);
        }
    }
}
