//! Equivariant nonlinearities.

use crate::gcnn::{rot_offset, ImageZ2, P4Feature};
use crate::grids::{rotate_spectral_s2, s2_analysis, s2_synthesis, S2Grid, SpectralS2Signal};
use crate::harmonics::EulerZYZ;
use crate::repr::FeatureType;
use crate::{Error, Result, C64};
use nalgebra::DMatrix;
use rand::Rng;

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `η(f)(x) = η̄(f(x))` on every value.
pub fn pointwise(eta: impl Fn(f64) -> f64, f: &[f64]) -> Vec<f64> {
    f.iter().map(|&v| eta(v)).collect()
}

/// Softmax over consecutive groups of `width` values.
pub fn softmax_rows(f: &[f64], width: usize) -> Vec<f64> {
    let mut out = f.to_vec();
    for row in out.chunks_mut(width) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

fn check_len(ft: &FeatureType, f: &[f64]) -> Result<usize> {
    let d = ft.dim();
    if d == 0 || f.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!("{} values for feature dimension {d}", f.len())));
    }
    Ok(f.len() / d)
}

/// `α(‖v‖) v` on every irrep copy `v` of every point; `f` is point-major.
pub fn norm_nonlinearity(alpha: impl Fn(f64) -> f64, ft: &FeatureType, f: &[f64]) -> Result<Vec<f64>> {
    check_len(ft, f)?;
    let blocks = ft.blocks();
    let mut out = f.to_vec();
    for point in out.chunks_mut(ft.dim()) {
        for b in &blocks {
            let v = &mut point[b.offset..b.offset + b.dim()];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a = alpha(n);
            v.iter_mut().for_each(|x| *x *= a);
        }
    }
    Ok(out)
}

/// `σ(s) v` per irrep copy, one gate per copy and point.
pub fn gated(gates: &[f64], ft: &FeatureType, f: &[f64]) -> Result<Vec<f64>> {
    let points = check_len(ft, f)?;
    let blocks = ft.blocks();
    if gates.len() != points * blocks.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} gates for {} points with {} blocks",
            gates.len(),
            points,
            blocks.len()
        )));
    }
    let mut out = f.to_vec();
    for (p, point) in out.chunks_mut(ft.dim()).enumerate() {
        for (bi, b) in blocks.iter().enumerate() {
            let s = sigmoid(gates[p * blocks.len() + bi]);
            point[b.offset..b.offset + b.dim()].iter_mut().for_each(|x| *x *= s);
        }
    }
    Ok(out)
}

/// Applies the block representation `ρ(g)` to every point of a point-major field.
pub fn act_blocks(ft: &FeatureType, g: &EulerZYZ, f: &[f64]) -> Result<Vec<f64>> {
    check_len(ft, f)?;
    let rho = ft.representation(g);
    let mut out = Vec::with_capacity(f.len());
    for point in f.chunks(ft.dim()) {
        let v = &rho * nalgebra::DVector::from_column_slice(point);
        out.extend_from_slice(v.as_slice());
    }
    Ok(out)
}

/// Scalar features on C₄⋉ℤ².
pub type GroupLatticeFeature = P4Feature;

/// `(cos, sin)` of `kπ/2` without rounding error.
pub fn quarter_turn(k: usize) -> (f64, f64) {
    match k % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

/// `ρ₂(k) = [[c, −s], [s, c]]` at a quarter turn.
pub fn rho2(k: usize, v: [f64; 2]) -> [f64; 2] {
    let (c, s) = quarter_turn(k);
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Planar vector field on a square window, one `[f64; 2]` per pixel at `y·S + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub size: usize,
    pub values: Vec<[f64; 2]>,
    /// Pixels where the argmax was not unique.
    pub ties: Vec<usize>,
}

impl VectorField {
    /// Surfaces ties as an error value without discarding the output.
    pub fn tie_error(&self) -> Option<Error> {
        (!self.ties.is_empty()).then(|| Error::TieDetected(self.ties.len()))
    }

    /// `(π₂(t, k) v)(x) = ρ₂(k) v(R_k⁻¹(x − t))`, periodic.
    pub fn transformed(&self, t: (i64, i64), k: usize) -> Self {
        let s = self.size as i64;
        let mut values = vec![[0.0; 2]; self.values.len()];
        for y in 0..s {
            for x in 0..s {
                let (sx, sy) = rot_offset(4 - k % 4, x - t.0, y - t.1);
                let src = (sy.rem_euclid(s) * s + sx.rem_euclid(s)) as usize;
                values[(y * s + x) as usize] = rho2(k, self.values[src]);
            }
        }
        VectorField {
            size: self.size,
            values,
            ties: Vec::new(),
        }
    }
}

/// `η(f)(x) = max_k f(k, x) · ρ₂(argmax_k f(k, x)) v₀` for scalar `f`. Ties pick the
/// smallest rotation index and are recorded.
pub fn vector_field_nonlinearity(f: &GroupLatticeFeature, v0: [f64; 2]) -> Result<VectorField> {
    if f.channels != 1 {
        return Err(Error::ShapeMismatch("vector field nonlinearity needs scalar features".into()));
    }
    let n = f.size;
    let mut values = Vec::with_capacity(n * n);
    let mut ties = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let vals: Vec<f64> = (0..4).map(|k| f.get(k, x, y, 0)).collect();
            let mut best = 0;
            for k in 1..4 {
                if vals[k] > vals[best] {
                    best = k;
                }
            }
            if (0..4).filter(|&k| vals[k] == vals[best]).count() > 1 {
                ties.push(y * n + x);
            }
            let v = rho2(best, v0);
            values.push([vals[best] * v[0], vals[best] * v[1]]);
        }
    }
    Ok(VectorField { size: n, values, ties })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Max,
    Mean,
}

/// Pools the rotation axis: `η(f)(x) = η̄({f(k, x) | k ∈ C₄})`.
pub fn subgroup_pool(f: &P4Feature, pool: Pool) -> ImageZ2 {
    let mut out = ImageZ2::zeros(f.size, f.size, f.channels);
    for y in 0..f.size {
        for x in 0..f.size {
            for c in 0..f.channels {
                let vals = (0..4).map(|k| f.get(k, x, y, c));
                let v = match pool {
                    Pool::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                    Pool::Mean => vals.sum::<f64>() / 4.0,
                };
                out.set(x, y, c, v);
            }
        }
    }
    out
}

/// Relative defect (max coefficient) of grid-sampled ReLU under a rotation.
/// ReLU is applied to samples on a grid of bandlimit `2L`, re-analysed and
/// truncated to `L`; aliasing of the unbounded ReLU spectrum is what breaks
/// exact equivariance.
pub fn spherical_relu_residual(bandlimit: usize, rng: &mut impl Rng) -> Result<f64> {
    spherical_relu_residual_with(bandlimit, 2, rng)
}

/// As [`spherical_relu_residual`] on a grid of bandlimit `oversample·L`.
pub fn spherical_relu_residual_with(bandlimit: usize, oversample: usize, rng: &mut impl Rng) -> Result<f64> {
    let mut f = SpectralS2Signal::random_real(rng, bandlimit, 1);
    // zero mean keeps the signal sign-changing, so the ReLU kink is always present
    f.set(0, 0, 0, C64::new(0.0, 0.0));
    for l in 1..bandlimit {
        for m in -(l as i64)..=l as i64 {
            let v = f.get(0, l, m) / (1.0 + l as f64).powi(2);
            f.set(0, l, m, v);
        }
    }
    let grid = S2Grid::new(bandlimit * oversample);
    let eta = |s: &SpectralS2Signal| -> Result<SpectralS2Signal> {
        let v: Vec<C64> = s2_synthesis(&s.with_bandlimit(grid.bandlimit), &grid)?
            .into_iter()
            .map(|z| C64::new(z.re.max(0.0), 0.0))
            .collect();
        Ok(s2_analysis(&grid, &v, 1)?.with_bandlimit(bandlimit))
    };
    let g = crate::rng::rotation(rng);
    let base = eta(&f)?;
    let lhs = eta(&rotate_spectral_s2(&f, &g))?;
    let rhs = rotate_spectral_s2(&base, &g);
    let scale = base.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(lhs.max_abs_diff(&rhs) / scale)
}

/// Max `‖η(ρ(g)f) − ρ(g)η(f)‖` of the norm nonlinearity over random rotations.
pub fn norm_equivariance_residual(ft: &FeatureType, points: usize, rng: &mut impl Rng) -> Result<f64> {
    let f: Vec<f64> = (0..points * ft.dim()).map(|_| crate::rng::uniform(rng)).collect();
    let alpha = |n: f64| relu(n - 0.5) / (n + 1e-12);
    let base = norm_nonlinearity(alpha, ft, &f)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let g = crate::rng::rotation(rng);
        let a = norm_nonlinearity(alpha, ft, &act_blocks(ft, &g, &f)?)?;
        let b = act_blocks(ft, &g, &base)?;
        worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Dense block representation, for callers holding complex features.
pub fn complex_blocks(ft: &FeatureType, g: &EulerZYZ) -> DMatrix<C64> {
    ft.complex_representation(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn simple_maps() {
        assert_eq!(pointwise(relu, &[-1.0, 2.0]), vec![0.0, 2.0]);
        let s = softmax_rows(&[1.0, 2.0, 3.0, 0.0, 0.0, 0.0], 3);
        assert!((s[..3].iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((s[3] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pointwise_commutes_with_shift() {
        let mut r = rng::seeded(1);
        let im = ImageZ2::random(&mut r, 6, 5, 1);
        let mut a = im.shifted(2, 3);
        a.values = pointwise(relu, &a.values);
        let mut b = im.clone();
        b.values = pointwise(relu, &b.values);
        assert_eq!(a, b.shifted(2, 3));
    }

    #[test]
    fn norm_and_gate() {
        let ft = FeatureType::new(&[(0, 1), (1, 2), (2, 1)]);
        let mut r = rng::seeded(2);
        let f: Vec<f64> = (0..3 * ft.dim()).map(|_| rng::uniform(&mut r)).collect();
        assert_eq!(norm_nonlinearity(|_| 1.0, &ft, &f).unwrap(), f);
        let z = vec![0.0; ft.dim()];
        assert_eq!(norm_nonlinearity(|n| n + 2.0, &ft, &z).unwrap(), z);
        assert!(norm_equivariance_residual(&ft, 4, &mut r).unwrap() < 1e-10);

        let nb = ft.blocks().len();
        let half = gated(&vec![0.0; 3 * nb], &ft, &f).unwrap();
        assert!(half.iter().zip(&f).all(|(a, b)| (a - b / 2.0).abs() < 1e-15));
        let full = gated(&vec![50.0; 3 * nb], &ft, &f).unwrap();
        assert!(full.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-12));
        let gates: Vec<f64> = (0..3 * nb).map(|_| rng::uniform(&mut r)).collect();
        let g = rng::rotation(&mut r);
        let lhs = gated(&gates, &ft, &act_blocks(&ft, &g, &f).unwrap()).unwrap();
        let rhs = act_blocks(&ft, &g, &gated(&gates, &ft, &f).unwrap()).unwrap();
        assert!(lhs.iter().zip(&rhs).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    fn pixel(vals: [f64; 4]) -> P4Feature {
        let mut f = P4Feature::zeros(1, 1);
        for (k, v) in vals.iter().enumerate() {
            f.set(k, 0, 0, 0, *v);
        }
        f
    }

    #[test]
    fn vector_field_examples() {
        let a = vector_field_nonlinearity(&pixel([3.0, 1.0, 0.0, 2.0]), [1.0, 0.0]).unwrap();
        assert_eq!(a.values[0], [3.0, 0.0]);
        let b = vector_field_nonlinearity(&pixel([2.0, 3.0, 1.0, 0.0]), [1.0, 0.0]).unwrap();
        assert_eq!(b.values[0], [0.0, 3.0]);
        let c = vector_field_nonlinearity(&pixel([1.0; 4]), [1.0, 0.0]).unwrap();
        assert!(matches!(c.tie_error(), Some(Error::TieDetected(1))));
        assert!(a.tie_error().is_none());
    }

    #[test]
    fn vector_field_equivariance() {
        let mut r = rng::seeded(3);
        for _ in 0..20 {
            let f = P4Feature::random(&mut r, 5, 1);
            let base = vector_field_nonlinearity(&f, [0.7, -0.2]).unwrap();
            assert!(base.ties.is_empty());
            let (t, k) = ((r.gen_range(0..5), r.gen_range(0..5)), r.gen_range(0..4));
            let moved = vector_field_nonlinearity(&f.transformed(t, k), [0.7, -0.2]).unwrap();
            assert_eq!(moved.values, base.transformed(t, k).values);
        }
    }

    #[test]
    fn pooling() {
        let f = pixel([3.0, 1.0, 0.0, 2.0]);
        assert_eq!(subgroup_pool(&f, Pool::Max).values, vec![3.0]);
        assert_eq!(subgroup_pool(&f, Pool::Mean).values, vec![1.5]);
        let mut r = rng::seeded(4);
        let g = P4Feature::random(&mut r, 4, 2);
        for pool in [Pool::Max, Pool::Mean] {
            let a = subgroup_pool(&g.transformed((1, 3), 3), pool);
            let b = subgroup_pool(&g, pool).transformed((1, 3), 3).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-15);
        }
    }

    #[test]
    fn spherical_relu_is_approximate() {
        let mut r = rng::seeded(5);
        let res = spherical_relu_residual(16, &mut r).unwrap();
        assert!(res > 1e-10 && res < 1e-2, "{res}");
    }
}
