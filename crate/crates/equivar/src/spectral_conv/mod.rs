//! Spherical convolutions in Fourier space, with spatial quadrature oracles.
//!
//! Convolutions on S² (output on SO(3)):
//! `(κ⋆f)(R) = ∫ ρ₂(R) κ(R⁻¹x) ρ₁(R⁻¹) f(x) dx`;
//! on SO(3): `(κ⋆f)(S) = ∫ ρ₂(R) κ(R⁻¹S) ρ₁(R⁻¹) f(R) dR`.
//! Feature maps with representation content are handled either through the
//! Fourier blocks of `ρ₁,₂` ([`general`]) or by splitting features into
//! irreps ([`irrep`]).

pub mod general;
pub mod irrep;
pub mod oracle;
pub mod scalar;
pub mod variants;

pub use general::{s2_conv_general, so3_conv_general, so3_product_acc};
pub use irrep::{irrep_s2_conv, irrep_so3_conv};
pub use oracle::{
    s2_conv_general_spatial, s2_conv_scalar_spatial, s2_oracle_spectral, so3_conv_general_spatial,
};
pub use scalar::{s2_conv_scalar, s2_conv_scalar_complex, so3_conv_scalar};
pub use variants::{
    equivariance_residual, ConvJob, ConvRegistry, ConvVariant, Domain, GeneralConv, IrrepConv,
    KernelData, ScalarConv, SignalData,
};

use crate::grids::{so3_analysis, SO3Grid, SignalFile, SpectralS2Signal, SpectralSO3Signal};
use crate::harmonics::{CGTable, EulerZYZ};
use crate::repr::FeatureType;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use rand::Rng;
use std::sync::Arc;

macro_rules! kernel_type {
    ($name:ident, $sig:ty, $from:ident, $to:ident) => {
        /// Operator-valued kernel; component `(o, i)` is channel `o·in + i` of `spec`.
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub out_channels: usize,
            pub in_channels: usize,
            pub spec: $sig,
        }

        impl $name {
            pub fn zeros(bandlimit: usize, out_channels: usize, in_channels: usize) -> Self {
                $name {
                    out_channels,
                    in_channels,
                    spec: <$sig>::zeros(bandlimit, out_channels * in_channels),
                }
            }

            pub fn new(out_channels: usize, in_channels: usize, spec: $sig) -> Result<Self> {
                if spec.channels != out_channels * in_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "kernel has {} channels, expected {}×{}",
                        spec.channels, out_channels, in_channels
                    )));
                }
                Ok($name {
                    out_channels,
                    in_channels,
                    spec,
                })
            }

            pub fn random(rng: &mut impl Rng, bandlimit: usize, out_channels: usize, in_channels: usize) -> Self {
                $name {
                    out_channels,
                    in_channels,
                    spec: <$sig>::random(rng, bandlimit, out_channels * in_channels),
                }
            }

            pub fn random_real(rng: &mut impl Rng, bandlimit: usize, out_channels: usize, in_channels: usize) -> Self {
                $name {
                    out_channels,
                    in_channels,
                    spec: <$sig>::random_real(rng, bandlimit, out_channels * in_channels),
                }
            }

            pub fn bandlimit(&self) -> usize {
                self.spec.bandlimit
            }

            #[inline]
            pub fn component(&self, o: usize, i: usize) -> usize {
                o * self.in_channels + i
            }

            /// `L κ R` applied to every Fourier coefficient.
            pub fn sandwich(&self, left: &DMatrix<C64>, right: &DMatrix<C64>) -> Self {
                let (no, ni) = (left.nrows(), right.ncols());
                let per = self.spec.coeffs.len() / self.spec.channels.max(1);
                let mut out = Self::zeros(self.bandlimit(), no, ni);
                for o in 0..no {
                    for i in 0..ni {
                        for a in 0..self.out_channels {
                            for b in 0..self.in_channels {
                                let w = left[(o, a)] * right[(b, i)];
                                if w.norm() == 0.0 {
                                    continue;
                                }
                                let src = self.component(a, b) * per;
                                let dst = (o * ni + i) * per;
                                for k in 0..per {
                                    out.spec.coeffs[dst + k] += w * self.spec.coeffs[src + k];
                                }
                            }
                        }
                    }
                }
                out
            }

            pub fn to_file(&self) -> SignalFile {
                let mut f = SignalFile::$from(&self.spec);
                f.channels = self.in_channels;
                f.out_channels = Some(self.out_channels);
                f
            }

            pub fn from_file(file: &SignalFile) -> Result<Self> {
                let spec = file.$to()?;
                let out = file.out_channels.unwrap_or(1);
                Self::new(out, file.channels, spec)
            }
        }
    };
}

kernel_type!(KernelS2, SpectralS2Signal, from_s2, to_s2);
kernel_type!(KernelSO3, SpectralSO3Signal, from_so3, to_so3);

/// Fourier blocks of the matrix elements of a representation `ρ` and of `R ↦ ρ(R⁻¹)`.
#[derive(Debug, Clone)]
pub struct RepSpectral {
    pub dim: usize,
    /// Channel `i·dim + j` holds `ρ_{ij}`.
    pub rho: SpectralSO3Signal,
    /// Channel `i·dim + j` holds `(ρ(R⁻¹))_{ij}`.
    pub rho_inv: SpectralSO3Signal,
}

impl RepSpectral {
    /// `dim` copies of the trivial representation.
    pub fn trivial(dim: usize) -> Self {
        let mut rho = SpectralSO3Signal::zeros(1, dim * dim);
        for i in 0..dim {
            rho.set(i * dim + i, 0, 0, 0, C64::new(1.0, 0.0));
        }
        RepSpectral {
            dim,
            rho: rho.clone(),
            rho_inv: rho,
        }
    }

    /// Analyses the matrix elements of `rep`, assumed to contain degrees `≤ max_degree` only.
    pub fn from_fn(dim: usize, max_degree: usize, rep: impl Fn(&EulerZYZ) -> DMatrix<f64> + Sync) -> Self {
        let grid = SO3Grid::new(max_degree + 1);
        let sample = |inv: bool| {
            let mut vals = Vec::with_capacity(grid.len() * dim * dim);
            for k in 0..grid.len() {
                let g = grid.node(k);
                let m = if inv { rep(&g.inverse()) } else { rep(&g) };
                for i in 0..dim {
                    for j in 0..dim {
                        vals.push(C64::new(m[(i, j)], 0.0));
                    }
                }
            }
            so3_analysis(&grid, &vals, dim * dim).expect("grid-shaped samples")
        };
        RepSpectral {
            dim,
            rho: sample(false),
            rho_inv: sample(true),
        }
    }

    /// The real representation assembled from a feature type.
    pub fn from_feature_type(ft: &FeatureType) -> Self {
        if ft.mult.keys().all(|&l| l == 0) {
            return Self::trivial(ft.dim());
        }
        let ft2 = ft.clone();
        Self::from_fn(ft.dim(), ft.max_degree(), move |g| ft2.representation(g))
    }

    pub fn bandlimit(&self) -> usize {
        self.rho.bandlimit
    }
}

/// Optional controls shared by the general and irrep convolutions.
#[derive(Debug, Clone, Default)]
pub struct ConvOptions {
    /// Truncate the output below this bandlimit.
    pub out_bandlimit: Option<usize>,
    /// Use this Clebsch–Gordan table instead of the shared one.
    pub cg: Option<Arc<CGTable>>,
}

impl ConvOptions {
    pub(crate) fn table(&self, needed: usize) -> Result<Arc<CGTable>> {
        match &self.cg {
            Some(t) => {
                t.require(needed)?;
                Ok(t.clone())
            }
            None => Ok(CGTable::shared(needed)),
        }
    }

    pub(crate) fn out_bandlimit(&self, natural: usize) -> usize {
        self.out_bandlimit.map_or(natural, |l| l.min(natural))
    }
}

/// `out_c = Σ_c' M_{cc'} s_c'` on S² coefficients.
pub fn mix_channels_s2(s: &SpectralS2Signal, m: &DMatrix<C64>) -> SpectralS2Signal {
    let per = s.bandlimit * s.bandlimit;
    let mut out = SpectralS2Signal::zeros(s.bandlimit, m.nrows());
    for c in 0..m.nrows() {
        for k in 0..m.ncols() {
            let w = m[(c, k)];
            if w.norm() == 0.0 {
                continue;
            }
            for i in 0..per {
                out.coeffs[c * per + i] += w * s.coeffs[k * per + i];
            }
        }
    }
    out
}

/// `out_c = Σ_c' M_{cc'} s_c'` on SO(3) coefficients.
pub fn mix_channels_so3(s: &SpectralSO3Signal, m: &DMatrix<C64>) -> SpectralSO3Signal {
    let per = crate::grids::so3_channel_len(s.bandlimit);
    let mut out = SpectralSO3Signal::zeros(s.bandlimit, m.nrows());
    for c in 0..m.nrows() {
        for k in 0..m.ncols() {
            let w = m[(c, k)];
            if w.norm() == 0.0 {
                continue;
            }
            for i in 0..per {
                out.coeffs[c * per + i] += w * s.coeffs[k * per + i];
            }
        }
    }
    out
}

pub(crate) fn real_to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}
