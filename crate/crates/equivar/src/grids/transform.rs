use super::signal::{so3_channel_len, SpectralS2Signal, SpectralSO3Signal};
use super::{S2Grid, SO3Grid};
use crate::harmonics::{parity, wigner_D_all, EulerZYZ};
use crate::{Error, Result, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Table `e^{sign·i m x_k}` for `m = -(L-1)..=L-1`, indexed `[(m + L - 1) * n + k]`.
fn phase_table(bandlimit: usize, xs: &[f64], sign: f64) -> Vec<C64> {
    let lm = bandlimit as i64 - 1;
    let mut t = Vec::with_capacity((2 * lm as usize + 1) * xs.len());
    for m in -lm..=lm {
        for &x in xs {
            t.push(C64::from_polar(1.0, sign * m as f64 * x));
        }
    }
    t
}

fn check_len(samples: &[C64], nodes: usize, channels: usize) -> Result<()> {
    if samples.len() != nodes * channels {
        return Err(Error::ShapeMismatch(format!(
            "expected {} samples ({nodes} nodes × {channels} channels), got {}",
            nodes * channels,
            samples.len()
        )));
    }
    Ok(())
}

/// Phase factor relating `Y^l_{-|m|}` to `P̄_l^{|m|}`.
#[inline]
fn neg_order_factor(grid_cs: bool, m: i64) -> f64 {
    if m < 0 && grid_cs {
        parity(m)
    } else {
        1.0
    }
}

/// `f̂^l_m = ∫ f conj(Y^l_m)` by quadrature; `samples[node·channels + c]`.
pub fn s2_analysis(grid: &S2Grid, samples: &[C64], channels: usize) -> Result<SpectralS2Signal> {
    check_len(samples, grid.len(), channels)?;
    let l = grid.bandlimit;
    let lm = l as i64 - 1;
    let np = grid.phis.len();
    let ex = phase_table(l, &grid.phis, -1.0);
    let per_channel: Vec<Vec<C64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut out = vec![zero(); l * l];
            let mut f = vec![zero(); 2 * l - 1];
            for (j, &w) in grid.ring_weights.iter().enumerate() {
                for (mi, fm) in f.iter_mut().enumerate() {
                    let row = &ex[mi * np..(mi + 1) * np];
                    *fm = (0..np).map(|k| samples[(j * np + k) * channels + c] * row[k]).sum();
                }
                let p = grid.legendre(j);
                for ll in 0..l {
                    for m in -(ll as i64)..=ll as i64 {
                        let a = m.unsigned_abs() as usize;
                        let coef = w * neg_order_factor(grid.cs_phase, m) * p[ll * (ll + 1) / 2 + a];
                        out[ll * ll + (ll as i64 + m) as usize] += f[(m + lm) as usize] * coef;
                    }
                }
            }
            out
        })
        .collect();
    SpectralS2Signal::from_coeffs(l, channels, per_channel.concat())
}

/// Evaluates `Σ f̂^l_m Y^l_m` at every grid node; returns `samples[node·channels + c]`.
pub fn s2_synthesis(spec: &SpectralS2Signal, grid: &S2Grid) -> Result<Vec<C64>> {
    if spec.bandlimit > grid.bandlimit {
        return Err(Error::ShapeMismatch(format!(
            "signal bandlimit {} exceeds grid bandlimit {}",
            spec.bandlimit, grid.bandlimit
        )));
    }
    let spec = spec.with_bandlimit(grid.bandlimit);
    let l = grid.bandlimit;
    let lm = l as i64 - 1;
    let np = grid.phis.len();
    let nr = grid.thetas.len();
    let channels = spec.channels;
    let ex = phase_table(l, &grid.phis, 1.0);
    let per_channel: Vec<Vec<C64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut vals = vec![zero(); nr * np];
            let mut g = vec![zero(); 2 * l - 1];
            for j in 0..nr {
                let p = grid.legendre(j);
                for m in -lm..=lm {
                    let a = m.unsigned_abs() as usize;
                    let f = neg_order_factor(grid.cs_phase, m);
                    g[(m + lm) as usize] = (a..l)
                        .map(|ll| spec.get(c, ll, m) * (f * p[ll * (ll + 1) / 2 + a]))
                        .sum();
                }
                for k in 0..np {
                    vals[j * np + k] = (0..g.len()).map(|mi| g[mi] * ex[mi * np + k]).sum();
                }
            }
            vals
        })
        .collect();
    let mut out = vec![zero(); nr * np * channels];
    for (c, vals) in per_channel.iter().enumerate() {
        for (i, v) in vals.iter().enumerate() {
            out[i * channels + c] = *v;
        }
    }
    Ok(out)
}

/// `f̂^l_{mn} = (2l+1)/(8π²) ∫ f(R) conj(D^l_{mn}(R)) dR` by quadrature.
pub fn so3_analysis(grid: &SO3Grid, samples: &[C64], channels: usize) -> Result<SpectralSO3Signal> {
    check_len(samples, grid.len(), channels)?;
    let l = grid.bandlimit;
    let lm = l as i64 - 1;
    let s = grid.side();
    let nm = 2 * l - 1;
    let eg = phase_table(l, &grid.gammas, 1.0);
    let ea = phase_table(l, &grid.alphas, 1.0);
    let per_channel: Vec<Vec<C64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            // f1[(a·s + b)·nm + n] = Σ_c f e^{inγ}
            let mut f1 = vec![zero(); s * s * nm];
            for a in 0..s {
                for b in 0..s {
                    let base = (a * s + b) * s;
                    for ni in 0..nm {
                        f1[(a * s + b) * nm + ni] = (0..s)
                            .map(|k| samples[(base + k) * channels + c] * eg[ni * s + k])
                            .sum();
                    }
                }
            }
            // f2[(b·nm + m)·nm + n] = Σ_a f1 e^{imα}
            let mut f2 = vec![zero(); s * nm * nm];
            for b in 0..s {
                for mi in 0..nm {
                    for ni in 0..nm {
                        f2[(b * nm + mi) * nm + ni] =
                            (0..s).map(|a| f1[(a * s + b) * nm + ni] * ea[mi * s + a]).sum();
                    }
                }
            }
            let mut out = vec![zero(); so3_channel_len(l)];
            for ll in 0..l {
                let li = ll as i64;
                let norm = (2 * ll + 1) as f64 / (8.0 * PI * PI);
                let off = so3_channel_len(ll);
                for m in -li..=li {
                    for n in -li..=li {
                        let (mi, ni) = ((m + lm) as usize, (n + lm) as usize);
                        let mut acc = zero();
                        for b in 0..s {
                            let d = grid.dtable(b)[ll][((m + li) as usize, (n + li) as usize)];
                            acc += f2[(b * nm + mi) * nm + ni] * (grid.beta_weights[b] * d);
                        }
                        out[off + ((m + li) * (2 * li + 1) + n + li) as usize] = acc * norm;
                    }
                }
            }
            out
        })
        .collect();
    SpectralSO3Signal::from_coeffs(l, channels, per_channel.concat())
}

/// Evaluates `Σ f̂^l_{mn} D^l_{mn}` at every grid node; returns `samples[node·channels + c]`.
pub fn so3_synthesis(spec: &SpectralSO3Signal, grid: &SO3Grid) -> Result<Vec<C64>> {
    if spec.bandlimit > grid.bandlimit {
        return Err(Error::ShapeMismatch(format!(
            "signal bandlimit {} exceeds grid bandlimit {}",
            spec.bandlimit, grid.bandlimit
        )));
    }
    let spec = spec.with_bandlimit(grid.bandlimit);
    let l = grid.bandlimit;
    let lm = l as i64 - 1;
    let s = grid.side();
    let nm = 2 * l - 1;
    let channels = spec.channels;
    let eg = phase_table(l, &grid.gammas, -1.0);
    let ea = phase_table(l, &grid.alphas, -1.0);
    let per_channel: Vec<Vec<C64>> = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut f2 = vec![zero(); s * nm * nm];
            for b in 0..s {
                for m in -lm..=lm {
                    for n in -lm..=lm {
                        let lo = m.unsigned_abs().max(n.unsigned_abs()) as usize;
                        let v: C64 = (lo..l)
                            .map(|ll| {
                                let li = ll as i64;
                                spec.get(c, ll, m, n)
                                    * grid.dtable(b)[ll][((m + li) as usize, (n + li) as usize)]
                            })
                            .sum();
                        f2[(b * nm + (m + lm) as usize) * nm + (n + lm) as usize] = v;
                    }
                }
            }
            let mut g = vec![zero(); s * s * nm];
            for a in 0..s {
                for b in 0..s {
                    for ni in 0..nm {
                        g[(a * s + b) * nm + ni] =
                            (0..nm).map(|mi| f2[(b * nm + mi) * nm + ni] * ea[mi * s + a]).sum();
                    }
                }
            }
            let mut vals = vec![zero(); s * s * s];
            for a in 0..s {
                for b in 0..s {
                    for k in 0..s {
                        vals[(a * s + b) * s + k] =
                            (0..nm).map(|ni| g[(a * s + b) * nm + ni] * eg[ni * s + k]).sum();
                    }
                }
            }
            vals
        })
        .collect();
    let mut out = vec![zero(); s * s * s * channels];
    for (c, vals) in per_channel.iter().enumerate() {
        for (i, v) in vals.iter().enumerate() {
            out[i * channels + c] = *v;
        }
    }
    Ok(out)
}

/// Coefficients of `x ↦ f(g⁻¹x)`: `f̂'^l = D^l(g) f̂^l`.
pub fn rotate_spectral_s2(spec: &SpectralS2Signal, g: &EulerZYZ) -> SpectralS2Signal {
    let mut out = SpectralS2Signal::zeros(spec.bandlimit, spec.channels);
    if spec.bandlimit == 0 {
        return out;
    }
    let d = wigner_D_all(spec.bandlimit - 1, g);
    for c in 0..spec.channels {
        for l in 0..spec.bandlimit {
            let li = l as i64;
            for m in -li..=li {
                let v: C64 = (-li..=li)
                    .map(|n| d[l][((m + li) as usize, (n + li) as usize)] * spec.get(c, l, n))
                    .sum();
                out.set(c, l, m, v);
            }
        }
    }
    out
}

/// Coefficients of the left translate `R ↦ f(g⁻¹R)`: `f̂'^l = conj(D^l(g)) f̂^l`.
pub fn rotate_spectral_so3(spec: &SpectralSO3Signal, g: &EulerZYZ) -> SpectralSO3Signal {
    let mut out = SpectralSO3Signal::zeros(spec.bandlimit, spec.channels);
    if spec.bandlimit == 0 {
        return out;
    }
    let d = wigner_D_all(spec.bandlimit - 1, g);
    for c in 0..spec.channels {
        for l in 0..spec.bandlimit {
            let li = l as i64;
            for k in -li..=li {
                for n in -li..=li {
                    let v: C64 = (-li..=li)
                        .map(|m| {
                            d[l][((k + li) as usize, (m + li) as usize)].conj() * spec.get(c, l, m, n)
                        })
                        .sum();
                    out.set(c, l, k, n, v);
                }
            }
        }
    }
    out
}
