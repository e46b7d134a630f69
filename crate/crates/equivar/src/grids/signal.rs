use crate::harmonics::{parity, sph_harm_all, sph_index, wigner_D_all, EulerZYZ};
use crate::{Error, Result, C64};
use rand::Rng;

/// Number of SO(3) coefficients per channel below bandlimit `L`: `L(4L²-1)/3`.
pub fn so3_channel_len(bandlimit: usize) -> usize {
    (4 * bandlimit * bandlimit * bandlimit - bandlimit) / 3
}

/// Offset of the degree-`l` block inside one channel.
pub fn so3_block_offset(l: usize) -> usize {
    so3_channel_len(l)
}

/// Spherical-harmonic coefficients `f̂^l_m` per channel, `l < L`.
///
/// Layout: `c·L² + l² + l + m`, i.e. lexicographic `(channel, l, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralS2Signal {
    pub bandlimit: usize,
    pub channels: usize,
    pub coeffs: Vec<C64>,
}

impl SpectralS2Signal {
    pub fn zeros(bandlimit: usize, channels: usize) -> Self {
        SpectralS2Signal {
            bandlimit,
            channels,
            coeffs: vec![C64::new(0.0, 0.0); channels * bandlimit * bandlimit],
        }
    }

    pub fn from_coeffs(bandlimit: usize, channels: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != channels * bandlimit * bandlimit {
            return Err(Error::ShapeMismatch(format!(
                "expected {} S2 coefficients, got {}",
                channels * bandlimit * bandlimit,
                coeffs.len()
            )));
        }
        Ok(SpectralS2Signal {
            bandlimit,
            channels,
            coeffs,
        })
    }

    #[inline]
    pub fn index(&self, c: usize, l: usize, m: i64) -> usize {
        c * self.bandlimit * self.bandlimit + sph_index(l, m)
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64) -> C64 {
        self.coeffs[self.index(c, l, m)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, v: C64) {
        let i = self.index(c, l, m);
        self.coeffs[i] = v;
    }

    pub fn channel(&self, c: usize) -> &[C64] {
        let n = self.bandlimit * self.bandlimit;
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Random coefficients in the unit box.
    pub fn random(rng: &mut impl Rng, bandlimit: usize, channels: usize) -> Self {
        let mut s = Self::zeros(bandlimit, channels);
        for z in s.coeffs.iter_mut() {
            *z = crate::rng::complex(rng);
        }
        s
    }

    /// Random coefficients of a real-valued signal: `f̂_{-m} = (-1)^m conj(f̂_m)`.
    pub fn random_real(rng: &mut impl Rng, bandlimit: usize, channels: usize) -> Self {
        let mut s = Self::zeros(bandlimit, channels);
        for c in 0..channels {
            for l in 0..bandlimit {
                s.set(c, l, 0, C64::new(crate::rng::uniform(rng), 0.0));
                for m in 1..=l as i64 {
                    let v = crate::rng::complex(rng);
                    s.set(c, l, m, v);
                    s.set(c, l, -m, v.conj() * parity(m));
                }
            }
        }
        s
    }

    /// Largest violation of the real-signal symmetry.
    pub fn real_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.channels {
            for l in 0..self.bandlimit {
                for m in 0..=l as i64 {
                    let d = self.get(c, l, -m) - self.get(c, l, m).conj() * parity(m);
                    worst = worst.max(d.norm());
                }
            }
        }
        worst
    }

    /// Point evaluation `Σ f̂^l_m Y^l_m(θ, φ)` per channel.
    pub fn eval(&self, theta: f64, phi: f64) -> Vec<C64> {
        if self.bandlimit == 0 {
            return vec![C64::new(0.0, 0.0); self.channels];
        }
        let y = sph_harm_all(self.bandlimit - 1, theta, phi, true);
        (0..self.channels)
            .map(|c| self.channel(c).iter().zip(&y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Same coefficients at a different bandlimit (truncating or zero-padding).
    pub fn with_bandlimit(&self, bandlimit: usize) -> Self {
        let mut out = Self::zeros(bandlimit, self.channels);
        for c in 0..self.channels {
            for l in 0..bandlimit.min(self.bandlimit) {
                for m in -(l as i64)..=l as i64 {
                    out.set(c, l, m, self.get(c, l, m));
                }
            }
        }
        out
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut s = self.clone();
        s.coeffs.iter_mut().for_each(|z| *z *= a);
        s
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.coeffs, &other.coeffs)
    }
}

/// Wigner coefficients `f̂^l_{mn}` per channel, `l < L`.
///
/// Layout: `c·L(4L²-1)/3 + l(4l²-1)/3 + (m+l)(2l+1) + (n+l)`, i.e.
/// lexicographic `(channel, l, m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSO3Signal {
    pub bandlimit: usize,
    pub channels: usize,
    pub coeffs: Vec<C64>,
}

impl SpectralSO3Signal {
    pub fn zeros(bandlimit: usize, channels: usize) -> Self {
        SpectralSO3Signal {
            bandlimit,
            channels,
            coeffs: vec![C64::new(0.0, 0.0); channels * so3_channel_len(bandlimit)],
        }
    }

    pub fn from_coeffs(bandlimit: usize, channels: usize, coeffs: Vec<C64>) -> Result<Self> {
        let want = channels * so3_channel_len(bandlimit);
        if coeffs.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "expected {want} SO3 coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(SpectralSO3Signal {
            bandlimit,
            channels,
            coeffs,
        })
    }

    #[inline]
    pub fn index(&self, c: usize, l: usize, m: i64, n: i64) -> usize {
        let li = l as i64;
        c * so3_channel_len(self.bandlimit)
            + so3_block_offset(l)
            + ((m + li) * (2 * li + 1) + n + li) as usize
    }

    #[inline]
    pub fn get(&self, c: usize, l: usize, m: i64, n: i64) -> C64 {
        self.coeffs[self.index(c, l, m, n)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, l: usize, m: i64, n: i64, v: C64) {
        let i = self.index(c, l, m, n);
        self.coeffs[i] = v;
    }

    #[inline]
    pub fn add(&mut self, c: usize, l: usize, m: i64, n: i64, v: C64) {
        let i = self.index(c, l, m, n);
        self.coeffs[i] += v;
    }

    /// The `(2l+1)²` block of channel `c`, row-major in `(m, n)`.
    pub fn block(&self, c: usize, l: usize) -> &[C64] {
        let start = self.index(c, l, -(l as i64), -(l as i64));
        &self.coeffs[start..start + (2 * l + 1) * (2 * l + 1)]
    }

    pub fn block_mut(&mut self, c: usize, l: usize) -> &mut [C64] {
        let start = self.index(c, l, -(l as i64), -(l as i64));
        &mut self.coeffs[start..start + (2 * l + 1) * (2 * l + 1)]
    }

    pub fn random(rng: &mut impl Rng, bandlimit: usize, channels: usize) -> Self {
        let mut s = Self::zeros(bandlimit, channels);
        for z in s.coeffs.iter_mut() {
            *z = crate::rng::complex(rng);
        }
        s
    }

    /// Random coefficients of a real function: `f̂_{-m,-n} = (-1)^{m-n} conj(f̂_{mn})`.
    pub fn random_real(rng: &mut impl Rng, bandlimit: usize, channels: usize) -> Self {
        let mut s = Self::random(rng, bandlimit, channels);
        s.make_real();
        s
    }

    /// Projects onto coefficients of real-valued functions.
    pub fn make_real(&mut self) {
        for c in 0..self.channels {
            for l in 0..self.bandlimit {
                let li = l as i64;
                for m in -li..=li {
                    for n in -li..=li {
                        let a = self.get(c, l, m, n);
                        let b = self.get(c, l, -m, -n).conj() * parity(m - n);
                        self.set(c, l, m, n, (a + b) * 0.5);
                    }
                }
            }
        }
    }

    pub fn real_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.channels {
            for l in 0..self.bandlimit {
                let li = l as i64;
                for m in -li..=li {
                    for n in -li..=li {
                        let d = self.get(c, l, -m, -n) - self.get(c, l, m, n).conj() * parity(m - n);
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }

    /// Point evaluation `Σ f̂^l_{mn} D^l_{mn}(g)` per channel.
    pub fn eval(&self, g: &EulerZYZ) -> Vec<C64> {
        if self.bandlimit == 0 {
            return vec![C64::new(0.0, 0.0); self.channels];
        }
        let d = wigner_D_all(self.bandlimit - 1, g);
        (0..self.channels)
            .map(|c| {
                (0..self.bandlimit)
                    .map(|l| {
                        self.block(c, l)
                            .iter()
                            .zip(d[l].transpose().iter())
                            .map(|(a, b)| a * b)
                            .sum::<C64>()
                    })
                    .sum()
            })
            .collect()
    }

    pub fn with_bandlimit(&self, bandlimit: usize) -> Self {
        let mut out = Self::zeros(bandlimit, self.channels);
        for c in 0..self.channels {
            for l in 0..bandlimit.min(self.bandlimit) {
                out.block_mut(c, l).copy_from_slice(self.block(c, l));
            }
        }
        out
    }

    pub fn scale(&self, a: C64) -> Self {
        let mut s = self.clone();
        s.coeffs.iter_mut().for_each(|z| *z *= a);
        s
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let l = self.bandlimit.max(other.bandlimit);
        max_abs_diff(&self.with_bandlimit(l).coeffs, &other.with_bandlimit(l).coeffs)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
