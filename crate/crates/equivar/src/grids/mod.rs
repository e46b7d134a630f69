//! Equiangular quadrature grids on S² and SO(3) and the Fourier transforms
//! between grid samples and spectral coefficients.
//!
//! Both grids use `2L` colatitudes `β_j = π(2j+1)/(4L)` whose weights are
//! obtained by solving the exactness system `Σ_j w_j P_k(cos β_j) = 2δ_{k0}`
//! for `k < 2L`; with `2L` equispaced azimuths this integrates every
//! polynomial of degree `< 2L` exactly. Analysis costs O(L³) on S² and
//! O(L⁴) on SO(3) by separation of variables.

mod io;
mod signal;
mod transform;

pub use io::{read_samples_csv, write_samples_csv, SampleKind, SignalFile};
pub use signal::{so3_block_offset, so3_channel_len, SpectralS2Signal, SpectralSO3Signal};
pub use transform::{
    rotate_spectral_s2, rotate_spectral_so3, s2_analysis, s2_synthesis, so3_analysis,
    so3_synthesis,
};

use crate::harmonics::{legendre_normalized_all, wigner_d_all, EulerZYZ};
use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Quadrature weights for the `2L` equiangular colatitudes (cached per `L`).
pub fn beta_weights(bandlimit: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(w) = cache.lock().unwrap().get(&bandlimit) {
        return w.clone();
    }
    let n = 2 * bandlimit;
    let betas = beta_nodes(bandlimit);
    // a[k][j] = P_k(cos β_j)
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (j, &b) in betas.iter().enumerate() {
        let x = b.cos();
        let (mut p0, mut p1) = (1.0, x);
        for k in 0..n {
            let pk = if k == 0 {
                1.0
            } else if k == 1 {
                x
            } else {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
                p2
            };
            a[(k, j)] = pk;
        }
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[0] = 2.0;
    let w = a.lu().solve(&rhs).expect("equiangular Legendre system is nonsingular");
    let w = Arc::new(w.iter().copied().collect::<Vec<_>>());
    cache.lock().unwrap().insert(bandlimit, w.clone());
    w
}

pub fn beta_nodes(bandlimit: usize) -> Vec<f64> {
    let l = bandlimit as f64;
    (0..2 * bandlimit)
        .map(|j| PI * (2 * j + 1) as f64 / (4.0 * l))
        .collect()
}

pub fn azimuth_nodes(bandlimit: usize) -> Vec<f64> {
    (0..2 * bandlimit)
        .map(|k| PI * k as f64 / bandlimit as f64)
        .collect()
}

/// Equiangular 2L×2L grid on the sphere; nodes ordered θ-major.
#[derive(Debug, Clone)]
pub struct S2Grid {
    pub bandlimit: usize,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Per-colatitude weights, already multiplied by the azimuth spacing.
    pub ring_weights: Vec<f64>,
    pub cs_phase: bool,
    /// `P̄_l^m(cos θ_j)` for each ring, indexed `l(l+1)/2 + m`.
    legendre: Vec<Vec<f64>>,
}

impl S2Grid {
    pub fn new(bandlimit: usize) -> Self {
        Self::with_convention(bandlimit, true)
    }

    /// A grid whose transforms use (`cs_phase = true`) or drop the Condon–Shortley phase.
    pub fn with_convention(bandlimit: usize, cs_phase: bool) -> Self {
        assert!(bandlimit > 0, "bandlimit must be positive");
        let thetas = beta_nodes(bandlimit);
        let dphi = PI / bandlimit as f64;
        let ring_weights = beta_weights(bandlimit).iter().map(|w| w * dphi).collect();
        let legendre = thetas
            .iter()
            .map(|&t| legendre_normalized_all(bandlimit - 1, t, cs_phase))
            .collect();
        S2Grid {
            bandlimit,
            thetas,
            phis: azimuth_nodes(bandlimit),
            ring_weights,
            cs_phase,
            legendre,
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (θ, φ) of node `i`.
    pub fn node(&self, i: usize) -> (f64, f64) {
        let n = self.phis.len();
        (self.thetas[i / n], self.phis[i % n])
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.ring_weights[i / self.phis.len()]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub(crate) fn legendre(&self, ring: usize) -> &[f64] {
        &self.legendre[ring]
    }
}

/// Equiangular 2L×2L×2L grid on SO(3); node `((a·2L)+b)·2L + c` is `(α_a, β_b, γ_c)`.
#[derive(Debug, Clone)]
pub struct SO3Grid {
    pub bandlimit: usize,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Per-β weights including both azimuth spacings.
    pub beta_weights: Vec<f64>,
    dtables: Vec<Vec<DMatrix<f64>>>,
}

impl SO3Grid {
    pub fn new(bandlimit: usize) -> Self {
        assert!(bandlimit > 0, "bandlimit must be positive");
        let betas = beta_nodes(bandlimit);
        let da = PI / bandlimit as f64;
        let beta_w = beta_weights(bandlimit).iter().map(|w| w * da * da).collect();
        let dtables = betas
            .iter()
            .map(|&b| wigner_d_all(bandlimit - 1, b))
            .collect();
        SO3Grid {
            bandlimit,
            alphas: azimuth_nodes(bandlimit),
            betas,
            gammas: azimuth_nodes(bandlimit),
            beta_weights: beta_w,
            dtables,
        }
    }

    pub fn side(&self) -> usize {
        2 * self.bandlimit
    }

    pub fn len(&self) -> usize {
        self.side().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> EulerZYZ {
        let s = self.side();
        let (a, b, c) = (i / (s * s), (i / s) % s, i % s);
        EulerZYZ {
            alpha: self.alphas[a],
            beta: self.betas[b],
            gamma: self.gammas[c],
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        let s = self.side();
        self.beta_weights[(i / s) % s]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub(crate) fn dtable(&self, b: usize) -> &[DMatrix<f64>] {
        &self.dtables[b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{sph_harm_all, sph_index, wigner_D};
    use crate::C64;

    #[test]
    fn weights_sum_to_measure() {
        for l in [1, 2, 5, 8, 16] {
            let s: f64 = S2Grid::new(l).weights().iter().sum();
            assert!((s - 4.0 * PI).abs() < 1e-10);
            let g = SO3Grid::new(l.min(8));
            let s: f64 = g.weights().iter().sum();
            assert!((s - 8.0 * PI * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn s2_quadrature_exactness() {
        let l = 6;
        let grid = S2Grid::new(l);
        let ys: Vec<_> = (0..grid.len())
            .map(|i| {
                let (t, p) = grid.node(i);
                sph_harm_all(l - 1, t, p, true)
            })
            .collect();
        for a in 0..l * l {
            for b in 0..l * l {
                let s: C64 = (0..grid.len())
                    .map(|i| ys[i][a].conj() * ys[i][b] * grid.weight(i))
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn so3_quadrature_orthogonality() {
        let l = 3;
        let grid = SO3Grid::new(l);
        let ds: Vec<Vec<_>> = (0..grid.len())
            .map(|i| (0..l).map(|k| wigner_D(k, &grid.node(i))).collect())
            .collect();
        for l1 in 0..l {
            for l2 in 0..l {
                let (i1, i2) = (l1 as i64, l2 as i64);
                for (m1, n1, m2, n2) in [(0, 0, 0, 0), (i1, -i1, i2, -i2), (-i1, 0, -i2, 0)] {
                    let s: C64 = (0..grid.len())
                        .map(|i| ds[i][l1].get(m1, n1).conj() * ds[i][l2].get(m2, n2) * grid.weight(i))
                        .sum();
                    let same = l1 == l2 && m1 == m2 && n1 == n2;
                    let want = if same { 8.0 * PI * PI / (2 * l1 + 1) as f64 } else { 0.0 };
                    assert!((s - want).norm() < 1e-9);
                }
            }
        }
    }

    /// d¹ cross-check: conj(D¹_{mn}(R)) = ∫ Y_m(Rx) conj(Y_n(x)) dx.
    #[test]
    fn degree_one_wigner_by_integration() {
        let grid = S2Grid::new(4);
        let g = EulerZYZ::new(0.4, 1.1, 2.3);
        let rm = g.to_matrix();
        let d = wigner_D(1, &g);
        for m in -1..=1i64 {
            for n in -1..=1i64 {
                let s: C64 = (0..grid.len())
                    .map(|i| {
                        let (t, p) = grid.node(i);
                        let (tr, pr) =
                            crate::harmonics::sphere_angles(&(rm * crate::harmonics::sphere_vector(t, p)));
                        let yr = sph_harm_all(1, tr, pr, true)[sph_index(1, m)];
                        let y = sph_harm_all(1, t, p, true)[sph_index(1, n)];
                        yr * y.conj() * grid.weight(i)
                    })
                    .sum();
                assert!((s - d.get(m, n).conj()).norm() < 1e-12);
            }
        }
    }
}
