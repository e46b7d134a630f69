use super::{log_factorial, parity};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

/// `C^{JM}_{l1 m1; l2 m2}` by the Racah closed form in log-factorials.
///
/// Accurate to ~1e-13 for degrees up to 16; cancellation in the alternating
/// sum degrades precision slowly beyond that.
pub fn clebsch_gordan(l1: i64, m1: i64, l2: i64, m2: i64, j: i64, m: i64) -> f64 {
    if m != m1 + m2
        || m1.abs() > l1
        || m2.abs() > l2
        || m.abs() > j
        || j < (l1 - l2).abs()
        || j > l1 + l2
    {
        return 0.0;
    }
    let lf = |n: i64| log_factorial(n as usize);
    let pre = 0.5
        * (((2 * j + 1) as f64).ln() + lf(j + l1 - l2) + lf(j - l1 + l2) + lf(l1 + l2 - j)
            - lf(l1 + l2 + j + 1)
            + lf(j + m)
            + lf(j - m)
            + lf(l1 - m1)
            + lf(l1 + m1)
            + lf(l2 - m2)
            + lf(l2 + m2));
    let kmin = 0.max(l2 - j - m1).max(l1 - j + m2);
    let kmax = (l1 + l2 - j).min(l1 - m1).min(l2 + m2);
    let mut acc = 0.0;
    for k in kmin..=kmax {
        let den = lf(k)
            + lf(l1 + l2 - j - k)
            + lf(l1 - m1 - k)
            + lf(l2 + m2 - k)
            + lf(j - l2 + m1 + k)
            + lf(j - l1 - m2 + k);
        acc += parity(k) * (pre - den).exp();
    }
    acc
}

/// Dense table of Clebsch–Gordan coefficients for `l1, l2 ≤ max_degree`.
///
/// Only entries with `M = m1 + m2` and `|l1-l2| ≤ J ≤ l1+l2` are stored.
#[derive(Debug, Clone)]
pub struct CGTable {
    max_degree: usize,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl CGTable {
    pub fn new(max_degree: usize) -> Self {
        let (offsets, len) = Self::layout(max_degree);
        let mut data = vec![0.0; len];
        let l = max_degree as i64;
        for l1 in 0..=l {
            for l2 in 0..=l {
                let base = offsets[(l1 * (l + 1) + l2) as usize];
                let block = ((2 * l1 + 1) * (2 * l2 + 1)) as usize;
                for j in (l1 - l2).abs()..=(l1 + l2) {
                    for m1 in -l1..=l1 {
                        for m2 in -l2..=l2 {
                            let i = base
                                + (j - (l1 - l2).abs()) as usize * block
                                + ((m1 + l1) * (2 * l2 + 1) + m2 + l2) as usize;
                            data[i] = clebsch_gordan(l1, m1, l2, m2, j, m1 + m2);
                        }
                    }
                }
            }
        }
        CGTable {
            max_degree,
            offsets,
            data,
        }
    }

    fn layout(max_degree: usize) -> (Vec<usize>, usize) {
        let l = max_degree;
        let mut offsets = Vec::with_capacity((l + 1) * (l + 1));
        let mut len = 0;
        for l1 in 0..=l {
            for l2 in 0..=l {
                offsets.push(len);
                let nj = 2 * l1.min(l2) + 1;
                len += nj * (2 * l1 + 1) * (2 * l2 + 1);
            }
        }
        (offsets, len)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `C^{JM}_{l1 m1; l2 m2}`; zero outside the selection rules.
    #[inline]
    pub fn get(&self, l1: usize, m1: i64, l2: usize, m2: i64, j: usize, m: i64) -> f64 {
        if m != m1 + m2 || l1 > self.max_degree || l2 > self.max_degree {
            return 0.0;
        }
        let (i1, i2) = (l1 as i64, l2 as i64);
        let jmin = (i1 - i2).unsigned_abs() as usize;
        if j < jmin || j > l1 + l2 || m1.abs() > i1 || m2.abs() > i2 || m.abs() > j as i64 {
            return 0.0;
        }
        self.get_unchecked(l1, m1, l2, m2, j)
    }

    /// Lookup without selection-rule checks; caller guarantees validity.
    #[inline]
    pub fn get_unchecked(&self, l1: usize, m1: i64, l2: usize, m2: i64, j: usize) -> f64 {
        let base = self.offsets[l1 * (self.max_degree + 1) + l2];
        let jmin = (l1 as i64 - l2 as i64).unsigned_abs() as usize;
        let block = (2 * l1 + 1) * (2 * l2 + 1);
        let (i1, i2) = (l1 as i64, l2 as i64);
        self.data[base + (j - jmin) * block + ((m1 + i1) * (2 * i2 + 1) + m2 + i2) as usize]
    }

    /// Fails with `BandlimitOverflow` unless the table covers degree `needed`.
    pub fn require(&self, needed: usize) -> crate::Result<()> {
        if needed > self.max_degree {
            Err(crate::Error::BandlimitOverflow {
                needed,
                available: self.max_degree,
            })
        } else {
            Ok(())
        }
    }

    /// Process-wide table covering at least `max_degree`, built once and shared.
    ///
    /// When `EQUIVAR_CACHE_DIR` is set the raw coefficients are also persisted
    /// there as little-endian f64.
    pub fn shared(max_degree: usize) -> Arc<CGTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<CGTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        if let Some(t) = guard
            .iter()
            .filter(|(k, _)| **k >= max_degree)
            .min_by_key(|(k, _)| **k)
            .map(|(_, t)| t.clone())
        {
            return t;
        }
        let table = Arc::new(Self::load_or_build(max_degree));
        guard.insert(max_degree, table.clone());
        table
    }

    fn cache_path(max_degree: usize) -> Option<PathBuf> {
        std::env::var_os("EQUIVAR_CACHE_DIR")
            .map(|d| PathBuf::from(d).join(format!("cg_{max_degree}.f64le")))
    }

    fn load_or_build(max_degree: usize) -> CGTable {
        let (offsets, len) = Self::layout(max_degree);
        if let Some(path) = Self::cache_path(max_degree) {
            if let Ok(bytes) = std::fs::read(&path) {
                if bytes.len() == len * 8 {
                    let data = bytes
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    return CGTable {
                        max_degree,
                        offsets,
                        data,
                    };
                }
            }
            let table = CGTable::new(max_degree);
            let bytes: Vec<u8> = table.data.iter().flat_map(|x| x.to_le_bytes()).collect();
            if let Some(dir) = path.parent() {
                let _ = std::fs::create_dir_all(dir);
            }
            let _ = std::fs::write(&path, bytes);
            return table;
        }
        CGTable::new(max_degree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::wigner_D;
    use crate::rng;
    use crate::C64;

    #[test]
    fn selection_rule_and_trivial_coupling() {
        assert_eq!(clebsch_gordan(1, 1, 1, 0, 2, 0), 0.0);
        for l in 0..5i64 {
            for m in -l..=l {
                for j in 0..6i64 {
                    for mm in -j..=j {
                        let want = if j == l && mm == m { 1.0 } else { 0.0 };
                        assert!((clebsch_gordan(l, m, 0, 0, j, mm) - want).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn known_values() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((clebsch_gordan(1, 1, 1, -1, 1, 0) - h).abs() < 1e-14);
        assert!((clebsch_gordan(1, 0, 1, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-14);
        assert!((clebsch_gordan(1, 0, 1, 0, 2, 0) - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn orthogonality() {
        let t = CGTable::new(8);
        for l1 in 0..=8usize {
            for l2 in 0..=8usize {
                let (i1, i2) = (l1 as i64, l2 as i64);
                let jmin = (i1 - i2).unsigned_abs() as usize;
                for j in jmin..=l1 + l2 {
                    for jp in jmin..=l1 + l2 {
                        for m in -(j.min(jp) as i64)..=j.min(jp) as i64 {
                            let mut s = 0.0;
                            for m1 in -i1..=i1 {
                                let m2 = m - m1;
                                s += t.get(l1, m1, l2, m2, j, m) * t.get(l1, m1, l2, m2, jp, m);
                            }
                            let want = if j == jp { 1.0 } else { 0.0 };
                            assert!((s - want).abs() < 1e-12, "{l1} {l2} {j} {jp} {m}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn product_of_wigner_matrices() {
        let t = CGTable::new(4);
        let mut r = rng::seeded(21);
        let g = rng::rotation(&mut r);
        let d: Vec<_> = (0..=8).map(|l| wigner_D(l, &g)).collect();
        for l1 in 0..=4usize {
            for l2 in 0..=4usize {
                let (i1, i2) = (l1 as i64, l2 as i64);
                for m1 in -i1..=i1 {
                    for n1 in -i1..=i1 {
                        for m2 in -i2..=i2 {
                            for n2 in -i2..=i2 {
                                let lhs = d[l1].get(m1, n1) * d[l2].get(m2, n2);
                                let mut rhs = C64::new(0.0, 0.0);
                                for j in (i1 - i2).unsigned_abs() as usize..=l1 + l2 {
                                    let ji = j as i64;
                                    if (m1 + m2).abs() > ji || (n1 + n2).abs() > ji {
                                        continue;
                                    }
                                    let cm = t.get(l1, m1, l2, m2, j, m1 + m2);
                                    let cn = t.get(l1, n1, l2, n2, j, n1 + n2);
                                    rhs += d[j].get(m1 + m2, n1 + n2) * (cm * cn);
                                }
                                assert!((lhs - rhs).norm() < 1e-11);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn table_matches_direct() {
        let t = CGTable::new(5);
        assert_eq!(t.get(2, 1, 3, -1, 4, 0), clebsch_gordan(2, 1, 3, -1, 4, 0));
        assert_eq!(t.get(2, 1, 3, -1, 4, 1), 0.0);
        assert!(t.require(6).is_err());
    }
}
