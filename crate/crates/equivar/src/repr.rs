//! Feature typing by irrep multiplicities, tensor-product decomposition,
//! SE(3) output typing and the intensity-equivariance pair.

use crate::grids::SO3Grid;
use crate::harmonics::{real_basis_change, wigner_D, CGTable, EulerZYZ};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Multiplicities of SO(3) irreps; basis order is ascending λ, then copy μ,
/// then ν = -λ..=λ.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureType {
    pub mult: BTreeMap<usize, usize>,
}

/// One irrep copy inside a feature type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub lambda: usize,
    pub copy: usize,
    pub offset: usize,
}

impl Block {
    pub fn dim(&self) -> usize {
        2 * self.lambda + 1
    }
}

impl FeatureType {
    pub fn new(pairs: &[(usize, usize)]) -> Self {
        let mut mult = BTreeMap::new();
        for &(l, c) in pairs {
            if c > 0 {
                *mult.entry(l).or_insert(0) += c;
            }
        }
        FeatureType { mult }
    }

    pub fn scalars(n: usize) -> Self {
        Self::new(&[(0, n)])
    }

    pub fn dim(&self) -> usize {
        self.mult.iter().map(|(l, c)| (2 * l + 1) * c).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.mult.keys().copied().max().unwrap_or(0)
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (&lambda, &count) in &self.mult {
            for copy in 0..count {
                out.push(Block {
                    lambda,
                    copy,
                    offset,
                });
                offset += 2 * lambda + 1;
            }
        }
        out
    }

    /// `⊕ D^λ(g)` in the complex irrep basis.
    pub fn complex_representation(&self, g: &EulerZYZ) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for b in self.blocks() {
            let d = wigner_D(b.lambda, g).entries;
            m.view_mut((b.offset, b.offset), (b.dim(), b.dim())).copy_from(&d);
        }
        m
    }

    /// Block-diagonal unitary `W` taking complex irrep coordinates to real ones.
    pub fn basis_change(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for b in self.blocks() {
            let w = real_basis_change(b.lambda);
            m.view_mut((b.offset, b.offset), (b.dim(), b.dim())).copy_from(&w);
        }
        m
    }

    /// Real orthogonal `ρ(g) = W (⊕ D^λ(g)) W†`.
    pub fn representation(&self, g: &EulerZYZ) -> DMatrix<f64> {
        let w = self.basis_change();
        let c = &w * self.complex_representation(g) * w.adjoint();
        c.map(|z| z.re)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("feature type serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Degrees `J` in `D^{l1} ⊗ D^{l2}`.
pub fn tensor_product_degrees(l1: usize, l2: usize) -> Vec<usize> {
    (l1.abs_diff(l2)..=l1 + l2).collect()
}

/// Matrix of `Q ↦ R Q Rᵀ` acting on row-major vectorized 3×3 matrices: `R ⊗ R`.
pub fn vectorize_similarity(r: &Matrix3<f64>) -> DMatrix<f64> {
    let r = DMatrix::from_iterator(3, 3, r.iter().copied());
    r.kronecker(&r)
}

/// Row-major vectorization of a 3×3 matrix.
pub fn vrize(q: &Matrix3<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(9, q.transpose().iter().copied())
}

/// Orthogonal `U` with `U (D^{l1} ⊗ D^{l2}) Uᵀ = ⊕_J D^J`, rows ordered by
/// ascending `J` then `M`, columns by `(m1, m2)` in Kronecker order.
pub fn cg_change_of_basis(l1: usize, l2: usize) -> DMatrix<f64> {
    let cg = CGTable::shared(l1.max(l2));
    let n = (2 * l1 + 1) * (2 * l2 + 1);
    let mut u = DMatrix::zeros(n, n);
    let (i1, i2) = (l1 as i64, l2 as i64);
    let mut row = 0;
    for j in tensor_product_degrees(l1, l2) {
        for mm in -(j as i64)..=j as i64 {
            for m1 in -i1..=i1 {
                let m2 = mm - m1;
                if m2.abs() <= i2 {
                    let col = ((m1 + i1) * (2 * i2 + 1) + m2 + i2) as usize;
                    u[(row, col)] = cg.get(l1, m1, l2, m2, j, mm);
                }
            }
            row += 1;
        }
    }
    u
}

/// Irrep content of the output of an SE(3) detector for `num_classes` classes:
/// class probabilities, size and a scalar from the orientation as `λ=0`,
/// position and orientation vector parts as `λ=1`, and the orientation's
/// symmetric traceless part as `λ=2`.
pub fn se3_output_feature_type(num_classes: usize) -> FeatureType {
    FeatureType::new(&[(0, num_classes + 4), (1, 2), (2, 1)])
}

/// Multiplicities of a real representation by character inner products over
/// an SO(3) quadrature grid; `max_degree` bounds the irreps present.
pub fn multiplicities(
    rep: impl Fn(&EulerZYZ) -> DMatrix<f64>,
    max_degree: usize,
) -> Result<FeatureType> {
    let grid = SO3Grid::new(max_degree + 1);
    let vol = 8.0 * std::f64::consts::PI * std::f64::consts::PI;
    let mut mult = BTreeMap::new();
    let chars: Vec<(f64, f64, Vec<f64>)> = (0..grid.len())
        .map(|i| {
            let g = grid.node(i);
            let chi = rep(&g).trace();
            let irr = (0..=max_degree)
                .map(|l| wigner_D(l, &g).entries.trace().re)
                .collect();
            (grid.weight(i), chi, irr)
        })
        .collect();
    for l in 0..=max_degree {
        let s: f64 = chars.iter().map(|(w, chi, irr)| w * chi * irr[l]).sum::<f64>() / vol;
        let k = s.round();
        if (s - k).abs() > 1e-6 || k < 0.0 {
            return Err(Error::ShapeMismatch(format!(
                "non-integral multiplicity {s} at degree {l}"
            )));
        }
        if k > 0.0 {
            mult.insert(l, k as usize);
        }
    }
    Ok(FeatureType { mult })
}

/// Per-point complex scale factors `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityField {
    pub psi: Vec<C64>,
}

impl IntensityField {
    pub fn constant(n: usize, c: C64) -> Self {
        IntensityField { psi: vec![c; n] }
    }

    /// Bump `exp(1 - 1/(1 - (d/ε)²))` for `|d| < ε`, zero outside, centred at `center`.
    pub fn bump_1d(n: usize, center: usize, eps: f64) -> Self {
        let psi = (0..n)
            .map(|i| {
                let d = (i as f64 - center as f64) / eps;
                let v = if d.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - d * d)).exp()
                } else {
                    0.0
                };
                C64::new(v, 0.0)
            })
            .collect();
        IntensityField { psi }
    }
}

/// `(S(ψ) f)(x) = ψ(x) f(x)`; `f` holds `dim` values per point.
pub fn intensity_scale(psi: &IntensityField, f: &[C64], dim: usize) -> Result<Vec<C64>> {
    if f.len() != psi.psi.len() * dim {
        return Err(Error::ShapeMismatch("intensity field and feature map differ".into()));
    }
    Ok(f.iter()
        .enumerate()
        .map(|(i, v)| v * psi.psi[i / dim])
        .collect())
}

/// `(φ_T f)(x) = T f(x)` for a `dim_out × dim_in` matrix `T`.
pub fn pointwise_map(t: &DMatrix<C64>, f: &[C64]) -> Result<Vec<C64>> {
    let (dout, din) = t.shape();
    if din == 0 || f.len() % din != 0 {
        return Err(Error::ShapeMismatch("feature length is not a multiple of T's input dimension".into()));
    }
    let mut out = Vec::with_capacity(f.len() / din * dout);
    for chunk in f.chunks(din) {
        for r in 0..dout {
            out.push((0..din).map(|c| t[(r, c)] * chunk[c]).sum());
        }
    }
    Ok(out)
}

/// Periodic 1-d correlation of scalar samples with a centred odd-width kernel.
pub fn correlate_1d_periodic(kernel: &[C64], f: &[C64]) -> Vec<C64> {
    let n = f.len() as i64;
    let h = (kernel.len() / 2) as i64;
    (0..n)
        .map(|x| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * f[(x + k as i64 - h).rem_euclid(n) as usize])
                .sum()
        })
        .collect()
}
