//! Seeded random inputs shared by tests, the audit and the CLI.

use crate::harmonics::EulerZYZ;
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in [-1, 1).
pub fn uniform(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

pub fn complex(rng: &mut impl Rng) -> C64 {
    C64::new(uniform(rng), uniform(rng))
}

/// Haar-random rotation via a uniformly random unit quaternion.
pub fn rotation(rng: &mut impl Rng) -> EulerZYZ {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let q = [
        (1.0 - u1).sqrt() * (tau * u2).sin(),
        (1.0 - u1).sqrt() * (tau * u2).cos(),
        u1.sqrt() * (tau * u3).sin(),
        u1.sqrt() * (tau * u3).cos(),
    ];
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let m = nalgebra::Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    );
    EulerZYZ::from_matrix(&m).expect("quaternion matrix is a rotation")
}

/// Random point on the sphere as (θ, φ).
pub fn sphere_point(rng: &mut impl Rng) -> (f64, f64) {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (z.acos(), phi)
}
