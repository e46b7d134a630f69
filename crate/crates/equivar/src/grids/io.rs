use super::signal::{SpectralS2Signal, SpectralSO3Signal};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// On-disk spectral signal: coefficients as `[re, im]` pairs in lexicographic
/// `(channel, l, m[, n])` order, or `(out, in, l, m[, n])` for kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFile {
    pub kind: String,
    pub bandlimit: usize,
    pub channels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_channels: Option<usize>,
    pub coeffs: Vec<[f64; 2]>,
}

fn pairs(c: &[C64]) -> Vec<[f64; 2]> {
    c.iter().map(|z| [z.re, z.im]).collect()
}

fn complexes(p: &[[f64; 2]]) -> Vec<C64> {
    p.iter().map(|[a, b]| C64::new(*a, *b)).collect()
}

impl SignalFile {
    pub fn from_s2(s: &SpectralS2Signal) -> Self {
        SignalFile {
            kind: "s2".into(),
            bandlimit: s.bandlimit,
            channels: s.channels,
            out_channels: None,
            coeffs: pairs(&s.coeffs),
        }
    }

    pub fn from_so3(s: &SpectralSO3Signal) -> Self {
        SignalFile {
            kind: "so3".into(),
            bandlimit: s.bandlimit,
            channels: s.channels,
            out_channels: None,
            coeffs: pairs(&s.coeffs),
        }
    }

    /// Total channel count stored (`out·in` for kernels).
    pub fn stored_channels(&self) -> usize {
        self.channels * self.out_channels.unwrap_or(1)
    }

    pub fn to_s2(&self) -> Result<SpectralS2Signal> {
        if self.kind != "s2" {
            return Err(Error::Parse(format!("expected kind \"s2\", found {:?}", self.kind)));
        }
        SpectralS2Signal::from_coeffs(self.bandlimit, self.stored_channels(), complexes(&self.coeffs))
    }

    pub fn to_so3(&self) -> Result<SpectralSO3Signal> {
        if self.kind != "so3" {
            return Err(Error::Parse(format!("expected kind \"so3\", found {:?}", self.kind)));
        }
        SpectralSO3Signal::from_coeffs(self.bandlimit, self.stored_channels(), complexes(&self.coeffs))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    S2,
    SO3,
}

impl SampleKind {
    fn coords(self) -> &'static [&'static str] {
        match self {
            SampleKind::S2 => &["theta", "phi"],
            SampleKind::SO3 => &["alpha", "beta", "gamma"],
        }
    }
}

/// Writes one row per node: coordinates then `c0..cN`; `c{k}_im` columns are
/// added when any imaginary part exceeds `1e-14` in magnitude.
pub fn write_samples_csv(
    path: impl AsRef<Path>,
    kind: SampleKind,
    coords: &[Vec<f64>],
    values: &[C64],
    channels: usize,
) -> Result<()> {
    if values.len() != coords.len() * channels {
        return Err(Error::ShapeMismatch("sample count does not match nodes".into()));
    }
    let complex = values.iter().any(|z| z.im.abs() > 1e-14);
    let mut out = kind.coords().join(",");
    for c in 0..channels {
        write!(out, ",c{c}").unwrap();
    }
    if complex {
        for c in 0..channels {
            write!(out, ",c{c}_im").unwrap();
        }
    }
    out.push('\n');
    for (i, xs) in coords.iter().enumerate() {
        let row = &values[i * channels..(i + 1) * channels];
        let mut fields: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
        fields.extend(row.iter().map(|z| z.re.to_string()));
        if complex {
            fields.extend(row.iter().map(|z| z.im.to_string()));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parsed sample file: kind, per-node coordinates, values `[node·channels + c]`, channels.
pub type Samples = (SampleKind, Vec<Vec<f64>>, Vec<C64>, usize);

pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Samples> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty sample file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let kind = if header.starts_with(&["theta", "phi"]) {
        SampleKind::S2
    } else if header.starts_with(&["alpha", "beta", "gamma"]) {
        SampleKind::SO3
    } else {
        return Err(Error::Parse(format!("unrecognised sample header {header:?}")));
    };
    let nc = kind.coords().len();
    let rest = &header[nc..];
    let channels = rest.iter().filter(|h| !h.ends_with("_im")).count();
    let has_im = rest.len() == 2 * channels;
    for (c, h) in rest.iter().enumerate() {
        let want = if c < channels {
            format!("c{c}")
        } else {
            format!("c{}_im", c - channels)
        };
        if *h != want {
            return Err(Error::Parse(format!("unexpected column {h:?}, wanted {want:?}")));
        }
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in lines.enumerate() {
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", ln + 2)))?;
        if f.len() != header.len() {
            return Err(Error::Parse(format!("row {} has {} fields", ln + 2, f.len())));
        }
        coords.push(f[..nc].to_vec());
        for c in 0..channels {
            let im = if has_im { f[nc + channels + c] } else { 0.0 };
            values.push(C64::new(f[nc + c], im));
        }
    }
    Ok((kind, coords, values, channels))
}
