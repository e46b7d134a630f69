//! Discrete convolutions on ℤ² and C₄⋉ℤ².
//!
//! Rotation `r ∈ C₄` acts on pixel offsets by `R_r(x, y) = (−y, x)` applied `r`
//! times. A group element is `(t, r)` with product
//! `(t₁, r₁)(t₂, r₂) = (t₁ + R_{r₁} t₂, r₁ + r₂)`, acting on features by
//! `(L_{(t,r)} f)(s, x) = f(s − r, R_r⁻¹(x − t))`.

use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    #[default]
    Periodic,
    Zero,
}

/// `R_r (x, y)`.
pub fn rot_offset(r: usize, x: i64, y: i64) -> (i64, i64) {
    match r % 4 {
        0 => (x, y),
        1 => (-y, x),
        2 => (-x, -y),
        _ => (y, -x),
    }
}

/// Multi-channel image, values at `(y·W + x)·C + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageZ2 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl ImageZ2 {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        ImageZ2 {
            width,
            height,
            channels,
            values: vec![0.0; width * height * channels],
        }
    }

    pub fn random(rng: &mut impl Rng, width: usize, height: usize, channels: usize) -> Self {
        let mut im = Self::zeros(width, height, channels);
        for v in &mut im.values {
            *v = crate::rng::uniform(rng);
        }
        im
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.values[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.values[(y * self.width + x) * self.channels + c] = v;
    }

    fn fetch(&self, x: i64, y: i64, c: usize, pad: Padding) -> f64 {
        let (w, h) = (self.width as i64, self.height as i64);
        match pad {
            Padding::Periodic => self.get(x.rem_euclid(w) as usize, y.rem_euclid(h) as usize, c),
            Padding::Zero if (0..w).contains(&x) && (0..h).contains(&y) => self.get(x as usize, y as usize, c),
            Padding::Zero => 0.0,
        }
    }

    /// `(T_t f)(x) = f(x − t)`, periodic.
    pub fn shifted(&self, tx: i64, ty: i64) -> Self {
        let mut out = Self::zeros(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(x, y, c, self.fetch(x as i64 - tx, y as i64 - ty, c, Padding::Periodic));
                }
            }
        }
        out
    }

    /// `f(R_r⁻¹(x − t))` on a square periodic window.
    pub fn transformed(&self, t: (i64, i64), r: usize) -> Result<Self> {
        if self.width != self.height {
            return Err(Error::UnsupportedAction("rotation needs a square window".into()));
        }
        let mut out = Self::zeros(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, sy) = rot_offset(4 - r % 4, x as i64 - t.0, y as i64 - t.1);
                for c in 0..self.channels {
                    out.set(x, y, c, self.fetch(sx, sy, c, Padding::Periodic));
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_diff(&self.values, &other.values)
    }

    /// ASCII PGM (one channel) or PPM (three channels), scaled to `[0, 1]`.
    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let toks: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .collect();
        let bad = |m: &str| Error::Parse(format!("pnm: {m}"));
        let channels = match toks.first() {
            Some(&"P2") => 1,
            Some(&"P3") => 3,
            _ => return Err(bad("expected P2 or P3")),
        };
        let num = |i: usize| -> Result<f64> {
            toks.get(i)
                .ok_or_else(|| bad("truncated"))?
                .parse::<f64>()
                .map_err(|_| bad("not a number"))
        };
        let (w, h, maxv) = (num(1)? as usize, num(2)? as usize, num(3)?);
        if maxv <= 0.0 {
            return Err(bad("bad maxval"));
        }
        let n = w * h * channels;
        if toks.len() != 4 + n {
            return Err(bad("pixel count mismatch"));
        }
        let values = (0..n).map(|i| num(4 + i).map(|v| v / maxv)).collect::<Result<_>>()?;
        Ok(ImageZ2 {
            width: w,
            height: h,
            channels,
            values,
        })
    }

    /// CSV with header `x,y,c0..`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut lines = file.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))??;
        let cols = header.split(',').count();
        if cols < 3 || !header.starts_with("x,y") {
            return Err(Error::Parse("csv header must be x,y,c0,...".into()));
        }
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`"))))
                .collect::<Result<_>>()?;
            if r.len() != cols {
                return Err(Error::Parse("ragged csv".into()));
            }
            rows.push(r);
        }
        let w = rows.iter().map(|r| r[0] as usize + 1).max().unwrap_or(0);
        let h = rows.iter().map(|r| r[1] as usize + 1).max().unwrap_or(0);
        let mut im = Self::zeros(w, h, cols - 2);
        for r in rows {
            for c in 0..cols - 2 {
                im.set(r[0] as usize, r[1] as usize, c, r[2 + c]);
            }
        }
        Ok(im)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Planar kernel; entry `(dx, dy, o, i)` sits at offset `(dx − ox, dy − oy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel2D {
    pub size: usize,
    pub origin: (usize, usize),
    pub out_channels: usize,
    pub in_channels: usize,
    pub values: Vec<f64>,
}

impl Kernel2D {
    pub fn zeros(size: usize, origin: (usize, usize), out_channels: usize, in_channels: usize) -> Self {
        Kernel2D {
            size,
            origin,
            out_channels,
            in_channels,
            values: vec![0.0; size * size * out_channels * in_channels],
        }
    }

    /// Centred odd-size random kernel.
    pub fn random(rng: &mut impl Rng, size: usize, out_channels: usize, in_channels: usize) -> Self {
        let mut k = Self::zeros(size, (size / 2, size / 2), out_channels, in_channels);
        for v in &mut k.values {
            *v = crate::rng::uniform(rng);
        }
        k
    }

    /// `1×1` identity.
    pub fn identity(channels: usize) -> Self {
        let mut k = Self::zeros(1, (0, 0), channels, channels);
        for c in 0..channels {
            k.values[c * channels + c] = 1.0;
        }
        k
    }

    fn idx(&self, dx: usize, dy: usize, o: usize, i: usize) -> usize {
        ((dy * self.size + dx) * self.out_channels + o) * self.in_channels + i
    }

    pub fn get(&self, dx: usize, dy: usize, o: usize, i: usize) -> f64 {
        self.values[self.idx(dx, dy, o, i)]
    }

    pub fn set(&mut self, dx: usize, dy: usize, o: usize, i: usize, v: f64) {
        let j = self.idx(dx, dy, o, i);
        self.values[j] = v;
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize, i64, i64)> + '_ {
        let (ox, oy) = (self.origin.0 as i64, self.origin.1 as i64);
        (0..self.size).flat_map(move |dy| (0..self.size).map(move |dx| (dx, dy, dx as i64 - ox, dy as i64 - oy)))
    }
}

/// `out(x) = Σ_d κ(d) f(x + d)`.
pub fn z2_conv(kernel: &Kernel2D, image: &ImageZ2, padding: Padding) -> Result<ImageZ2> {
    if kernel.in_channels != image.channels {
        return Err(Error::ShapeMismatch("kernel input channels differ from image".into()));
    }
    let mut out = ImageZ2::zeros(image.width, image.height, kernel.out_channels);
    for y in 0..image.height {
        for x in 0..image.width {
            for (dx, dy, ex, ey) in kernel.offsets() {
                for i in 0..kernel.in_channels {
                    let f = image.fetch(x as i64 + ex, y as i64 + ey, i, padding);
                    if f == 0.0 {
                        continue;
                    }
                    for o in 0..kernel.out_channels {
                        let j = (y * image.width + x) * out.channels + o;
                        out.values[j] += kernel.get(dx, dy, o, i) * f;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Feature on C₄⋉ℤ² over a square window, values at `((r·S + y)·S + x)·C + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P4Feature {
    pub size: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl P4Feature {
    pub fn zeros(size: usize, channels: usize) -> Self {
        P4Feature {
            size,
            channels,
            values: vec![0.0; 4 * size * size * channels],
        }
    }

    pub fn random(rng: &mut impl Rng, size: usize, channels: usize) -> Self {
        let mut f = Self::zeros(size, channels);
        for v in &mut f.values {
            *v = crate::rng::uniform(rng);
        }
        f
    }

    pub fn index(&self, r: usize, x: usize, y: usize, c: usize) -> usize {
        ((r * self.size + y) * self.size + x) * self.channels + c
    }

    pub fn get(&self, r: usize, x: usize, y: usize, c: usize) -> f64 {
        self.values[self.index(r, x, y, c)]
    }

    pub fn set(&mut self, r: usize, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(r, x, y, c);
        self.values[i] = v;
    }

    fn fetch(&self, r: usize, x: i64, y: i64, c: usize, pad: Padding) -> f64 {
        let s = self.size as i64;
        match pad {
            Padding::Periodic => self.get(r % 4, x.rem_euclid(s) as usize, y.rem_euclid(s) as usize, c),
            Padding::Zero if (0..s).contains(&x) && (0..s).contains(&y) => self.get(r % 4, x as usize, y as usize, c),
            Padding::Zero => 0.0,
        }
    }

    /// `(L_{(t,k)} f)(r, x) = f(r − k, R_k⁻¹(x − t))`, periodic.
    pub fn transformed(&self, t: (i64, i64), k: usize) -> Self {
        let mut out = Self::zeros(self.size, self.channels);
        for r in 0..4 {
            for y in 0..self.size {
                for x in 0..self.size {
                    let (sx, sy) = rot_offset(4 - k % 4, x as i64 - t.0, y as i64 - t.1);
                    for c in 0..self.channels {
                        out.set(r, x, y, c, self.fetch((r + 4 - k % 4) % 4, sx, sy, c, Padding::Periodic));
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_diff(&self.values, &other.values)
    }
}

/// `out(r, x) = Σ_d κ(d) f(x + R_r d)`.
pub fn lifting_conv(kernel: &Kernel2D, image: &ImageZ2, padding: Padding) -> Result<P4Feature> {
    if image.width != image.height {
        return Err(Error::ShapeMismatch("lifting needs a square image".into()));
    }
    if kernel.in_channels != image.channels {
        return Err(Error::ShapeMismatch("kernel input channels differ from image".into()));
    }
    let s = image.width;
    let mut out = P4Feature::zeros(s, kernel.out_channels);
    for r in 0..4 {
        for y in 0..s {
            for x in 0..s {
                for (dx, dy, ex, ey) in kernel.offsets() {
                    let (rx, ry) = rot_offset(r, ex, ey);
                    for i in 0..kernel.in_channels {
                        let f = image.fetch(x as i64 + rx, y as i64 + ry, i, padding);
                        for o in 0..kernel.out_channels {
                            let j = out.index(r, x, y, o);
                            out.values[j] += kernel.get(dx, dy, o, i) * f;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Kernel on C₄⋉ℤ², entry `(s, dx, dy, o, i)` at rotation `s` and offset `(dx − ox, dy − oy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupKernel {
    pub size: usize,
    pub origin: (usize, usize),
    pub out_channels: usize,
    pub in_channels: usize,
    pub values: Vec<f64>,
}

impl GroupKernel {
    pub fn zeros(size: usize, origin: (usize, usize), out_channels: usize, in_channels: usize) -> Self {
        GroupKernel {
            size,
            origin,
            out_channels,
            in_channels,
            values: vec![0.0; 4 * size * size * out_channels * in_channels],
        }
    }

    pub fn random(rng: &mut impl Rng, size: usize, out_channels: usize, in_channels: usize) -> Self {
        let mut k = Self::zeros(size, (size / 2, size / 2), out_channels, in_channels);
        for v in &mut k.values {
            *v = crate::rng::uniform(rng);
        }
        k
    }

    /// Delta at the identity element.
    pub fn identity(channels: usize) -> Self {
        let mut k = Self::zeros(1, (0, 0), channels, channels);
        for c in 0..channels {
            k.set(0, 0, 0, c, c, 1.0);
        }
        k
    }

    fn idx(&self, s: usize, dx: usize, dy: usize, o: usize, i: usize) -> usize {
        (((s * self.size + dy) * self.size + dx) * self.out_channels + o) * self.in_channels + i
    }

    pub fn get(&self, s: usize, dx: usize, dy: usize, o: usize, i: usize) -> f64 {
        self.values[self.idx(s, dx, dy, o, i)]
    }

    pub fn set(&mut self, s: usize, dx: usize, dy: usize, o: usize, i: usize, v: f64) {
        let j = self.idx(s, dx, dy, o, i);
        self.values[j] = v;
    }
}

/// `out(r, x) = Σ_{s,d} κ(s, d) f(r + s, x + R_r d)`, i.e. `Σ_h κ(g⁻¹h) f(h)`.
pub fn group_conv(kernel: &GroupKernel, f: &P4Feature, padding: Padding) -> Result<P4Feature> {
    if kernel.in_channels != f.channels {
        return Err(Error::ShapeMismatch("kernel input channels differ from feature".into()));
    }
    let n = f.size;
    let (ox, oy) = (kernel.origin.0 as i64, kernel.origin.1 as i64);
    let mut out = P4Feature::zeros(n, kernel.out_channels);
    for r in 0..4 {
        for y in 0..n {
            for x in 0..n {
                for s in 0..4 {
                    for dy in 0..kernel.size {
                        for dx in 0..kernel.size {
                            let (rx, ry) = rot_offset(r, dx as i64 - ox, dy as i64 - oy);
                            for i in 0..kernel.in_channels {
                                let v = f.fetch(r + s, x as i64 + rx, y as i64 + ry, i, padding);
                                if v == 0.0 {
                                    continue;
                                }
                                for o in 0..kernel.out_channels {
                                    let j = out.index(r, x, y, o);
                                    out.values[j] += kernel.get(s, dx, dy, o, i) * v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Dense linear map on single-channel C₄⋉ℤ²_n features, averaged over the group
/// so it commutes with every `L_g`.
pub fn group_average(map: &nalgebra::DMatrix<f64>, size: usize) -> nalgebra::DMatrix<f64> {
    let dim = 4 * size * size;
    let perm = |t: (i64, i64), k: usize| {
        let mut p = nalgebra::DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut e = P4Feature::zeros(size, 1);
            e.values[j] = 1.0;
            let moved = e.transformed(t, k);
            for (i, v) in moved.values.iter().enumerate() {
                p[(i, j)] = *v;
            }
        }
        p
    };
    let mut acc = nalgebra::DMatrix::zeros(dim, dim);
    for k in 0..4 {
        for tx in 0..size as i64 {
            for ty in 0..size as i64 {
                let p = perm((tx, ty), k);
                acc += &p * map * p.transpose();
            }
        }
    }
    acc / (4 * size * size) as f64
}

/// Reads off `κ(s, d) = (Φ δ_{(d,s)})(e)` from an equivariant map on a periodic window.
pub fn recover_group_kernel(map: &nalgebra::DMatrix<f64>, size: usize) -> GroupKernel {
    let mut k = GroupKernel::zeros(size, (0, 0), 1, 1);
    let probe = P4Feature::zeros(size, 1);
    let e = probe.index(0, 0, 0, 0);
    for s in 0..4 {
        for dy in 0..size {
            for dx in 0..size {
                k.set(s, dx, dy, 0, 0, map[(e, probe.index(s, dx, dy, 0))]);
            }
        }
    }
    k
}

/// Max error between a recovered group convolution and a random equivariant
/// map on a periodic `size × size` window.
pub fn convolution_recovery_error(rng: &mut impl Rng, size: usize, trials: usize) -> Result<f64> {
    let dim = 4 * size * size;
    let raw = nalgebra::DMatrix::from_fn(dim, dim, |_, _| crate::rng::uniform(rng));
    let map = group_average(&raw, size);
    let k = recover_group_kernel(&map, size);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f = P4Feature::random(rng, size, 1);
        let want = &map * nalgebra::DVector::from_column_slice(&f.values);
        let got = group_conv(&k, &f, Padding::Periodic)?;
        worst = worst.max(max_diff(want.as_slice(), &got.values));
    }
    Ok(worst)
}

/// Row-wise softmax over channels.
pub fn softmax_channels(im: &ImageZ2) -> ImageZ2 {
    let mut out = im.clone();
    for px in out.values.chunks_mut(im.channels) {
        let m = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in px.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in px.iter_mut() {
            *v /= z;
        }
    }
    out
}

/// Conv → ReLU → 1×1 conv → softmax, periodic padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationNet {
    pub conv1: Kernel2D,
    pub conv2: Kernel2D,
}

impl SegmentationNet {
    pub fn random(rng: &mut impl Rng, in_channels: usize, hidden: usize, classes: usize) -> Self {
        SegmentationNet {
            conv1: Kernel2D::random(rng, 3, hidden, in_channels),
            conv2: Kernel2D::random(rng, 1, classes, hidden),
        }
    }

    pub fn run(&self, image: &ImageZ2) -> Result<ImageZ2> {
        let mut h = z2_conv(&self.conv1, image, Padding::Periodic)?;
        for v in &mut h.values {
            *v = v.max(0.0);
        }
        Ok(softmax_channels(&z2_conv(&self.conv2, &h, Padding::Periodic)?))
    }
}

/// Per-pixel class distributions.
pub fn segmentation_pipeline(net: &SegmentationNet, image: &ImageZ2) -> Result<ImageZ2> {
    net.run(image)
}

/// A candidate detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detection {
    Box { x: f64, y: f64, w: f64, h: f64, c: f64 },
    /// Corner `a` and edge vectors `v1`, `v2` of a parallelogram, class scores `p`.
    Oriented { a: [f64; 2], v1: [f64; 2], v2: [f64; 2], p: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionField {
    pub records: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaneAction {
    Translate { dx: f64, dy: f64 },
    /// Rotation by `k` quarter turns.
    Rotate { k: usize },
}

/// The SO(2) fundamental representation `[[cos φ, sin φ], [−sin φ, cos φ]]` at `φ = kπ/2`.
fn quarter(k: usize) -> [[f64; 2]; 2] {
    let (c, s) = match k % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    };
    [[c, s], [-s, c]]
}

fn apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

impl DetectionField {
    pub fn validate(&self) -> Result<()> {
        for d in &self.records {
            match d {
                Detection::Box { c, .. } if !(0.0..=1.0).contains(c) => {
                    return Err(Error::Parse(format!("confidence {c} outside [0, 1]")));
                }
                Detection::Oriented { p, .. } if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 => {
                    return Err(Error::Parse("class scores must sum to 1".into()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// One JSON record per line.
    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        let f = DetectionField { records };
        f.validate()?;
        Ok(f)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            writeln!(w, "{}", serde_json::to_string(r)?)?;
        }
        Ok(())
    }
}

/// Applies a plane action to every record. Translations move anchors; rotations
/// act on `a`, `v1`, `v2` by the fundamental representation and are not
/// defined for axis-aligned boxes.
pub fn detection_head_transform(field: &DetectionField, g: &PlaneAction) -> Result<DetectionField> {
    let records = field
        .records
        .iter()
        .map(|d| match (d, g) {
            (Detection::Box { x, y, w, h, c }, PlaneAction::Translate { dx, dy }) => Ok(Detection::Box {
                x: x + dx,
                y: y + dy,
                w: *w,
                h: *h,
                c: *c,
            }),
            (Detection::Box { .. }, PlaneAction::Rotate { .. }) => Err(Error::UnsupportedAction(
                "axis-aligned boxes do not carry a rotation action".into(),
            )),
            (Detection::Oriented { a, v1, v2, p }, PlaneAction::Translate { dx, dy }) => Ok(Detection::Oriented {
                a: [a[0] + dx, a[1] + dy],
                v1: *v1,
                v2: *v2,
                p: p.clone(),
            }),
            (Detection::Oriented { a, v1, v2, p }, PlaneAction::Rotate { k }) => {
                let m = quarter(*k);
                Ok(Detection::Oriented {
                    a: apply(&m, *a),
                    v1: apply(&m, *v1),
                    v2: apply(&m, *v2),
                    p: p.clone(),
                })
            }
        })
        .collect::<Result<_>>()?;
    Ok(DetectionField { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn box_from_delta() {
        let mut im = ImageZ2::zeros(7, 7, 1);
        im.set(3, 3, 0, 1.0);
        let mut k = Kernel2D::zeros(3, (1, 1), 1, 1);
        k.values.iter_mut().for_each(|v| *v = 1.0);
        let out = z2_conv(&k, &im, Padding::Zero).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                let want = if (2..=4).contains(&x) && (2..=4).contains(&y) { 1.0 } else { 0.0 };
                assert_eq!(out.get(x, y, 0), want);
            }
        }
        assert_eq!(z2_conv(&Kernel2D::identity(1), &im, Padding::Zero).unwrap(), im);
    }

    #[test]
    fn translation_exact() {
        let mut r = rng::seeded(1);
        let im = ImageZ2::random(&mut r, 9, 6, 2);
        let k = Kernel2D::random(&mut r, 3, 3, 2);
        let a = z2_conv(&k, &im.shifted(2, -1), Padding::Periodic).unwrap();
        let b = z2_conv(&k, &im, Padding::Periodic).unwrap().shifted(2, -1);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_padding_interior() {
        let mut r = rng::seeded(2);
        let im = ImageZ2::random(&mut r, 12, 12, 1);
        let k = Kernel2D::random(&mut r, 3, 1, 1);
        let a = z2_conv(&k, &im.shifted(1, 0), Padding::Zero).unwrap();
        let b = z2_conv(&k, &im, Padding::Zero).unwrap().shifted(1, 0);
        for y in 2..10 {
            for x in 2..10 {
                assert_eq!(a.get(x, y, 0), b.get(x, y, 0));
            }
        }
    }

    #[test]
    fn p4_exact_equivariance() {
        let mut r = rng::seeded(3);
        let im = ImageZ2::random(&mut r, 5, 5, 2);
        let k1 = Kernel2D::random(&mut r, 3, 2, 2);
        let k2 = GroupKernel::random(&mut r, 3, 2, 2);
        let lift = lifting_conv(&k1, &im, Padding::Periodic).unwrap();
        let deep = group_conv(&k2, &lift, Padding::Periodic).unwrap();
        for k in 0..4 {
            for tx in 0..5 {
                for ty in 0..5 {
                    let moved = im.transformed((tx, ty), k).unwrap();
                    let l2 = lifting_conv(&k1, &moved, Padding::Periodic).unwrap();
                    assert_eq!(l2, lift.transformed((tx, ty), k));
                    let d2 = group_conv(&k2, &l2, Padding::Periodic).unwrap();
                    assert_eq!(d2, deep.transformed((tx, ty), k));
                }
            }
        }
    }

    #[test]
    fn group_delta_is_identity() {
        let mut r = rng::seeded(4);
        let f = P4Feature::random(&mut r, 5, 2);
        assert_eq!(group_conv(&GroupKernel::identity(2), &f, Padding::Periodic).unwrap(), f);
    }

    #[test]
    fn transformed_is_an_action() {
        let mut r = rng::seeded(5);
        let f = P4Feature::random(&mut r, 4, 1);
        // (t1, k1)(t2, k2) = (t1 + R_{k1} t2, k1 + k2)
        let (t1, k1, t2, k2) = ((1, 2), 1, (3, 0), 3);
        let (rx, ry) = rot_offset(k1, t2.0, t2.1);
        let lhs = f.transformed(t2, k2).transformed(t1, k1);
        let rhs = f.transformed((t1.0 + rx, t1.1 + ry), k1 + k2);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn recovery() {
        let mut r = rng::seeded(6);
        assert!(convolution_recovery_error(&mut r, 4, 5).unwrap() < 1e-12);
    }

    #[test]
    fn segmentation() {
        let mut r = rng::seeded(7);
        let net = SegmentationNet::random(&mut r, 3, 4, 5);
        let im = ImageZ2::random(&mut r, 8, 8, 3);
        let out = segmentation_pipeline(&net, &im).unwrap();
        for px in out.values.chunks(5) {
            assert!((px.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let a = segmentation_pipeline(&net, &im.shifted(3, 5)).unwrap();
        assert_eq!(a, out.shifted(3, 5));
        let mut flat = ImageZ2::zeros(6, 6, 3);
        flat.values.iter_mut().enumerate().for_each(|(i, v)| *v = (i % 3) as f64);
        let o = segmentation_pipeline(&net, &flat).unwrap();
        for px in o.values.chunks(5) {
            assert_eq!(px, &o.values[..5]);
        }
    }

    #[test]
    fn detections() {
        let f = DetectionField {
            records: vec![
                Detection::Box { x: 1.0, y: 2.0, w: 3.0, h: 4.0, c: 0.5 },
                Detection::Oriented { a: [1.0, 0.0], v1: [1.0, 0.0], v2: [0.0, 2.0], p: vec![0.25, 0.75] },
            ],
        };
        let t = detection_head_transform(&f, &PlaneAction::Translate { dx: 3.0, dy: -2.0 }).unwrap();
        assert_eq!(t.records[0], Detection::Box { x: 4.0, y: 0.0, w: 3.0, h: 4.0, c: 0.5 });
        let rot = DetectionField { records: vec![f.records[1].clone()] };
        let q = detection_head_transform(&rot, &PlaneAction::Rotate { k: 1 }).unwrap();
        assert_eq!(q.records[0], Detection::Oriented { a: [0.0, -1.0], v1: [0.0, -1.0], v2: [2.0, 0.0], p: vec![0.25, 0.75] });
        assert_eq!(detection_head_transform(&rot, &PlaneAction::Rotate { k: 0 }).unwrap(), rot);
        assert!(matches!(
            detection_head_transform(&f, &PlaneAction::Rotate { k: 1 }),
            Err(Error::UnsupportedAction(_))
        ));
    }

    #[test]
    fn pnm_and_csv() {
        let dir = std::env::temp_dir().join(format!("equivar-gcnn-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("a.pgm");
        std::fs::write(&p, "P2\n# c\n2 1\n4\n0 4\n").unwrap();
        let im = ImageZ2::read_pnm(&p).unwrap();
        assert_eq!(im.values, vec![0.0, 1.0]);
        let c = dir.join("a.csv");
        std::fs::write(&c, "x,y,c0\n0,0,1.5\n1,0,2\n").unwrap();
        assert_eq!(ImageZ2::read_csv(&c).unwrap().values, vec![1.5, 2.0]);
        std::fs::write(&p, "P5\n").unwrap();
        assert!(ImageZ2::read_pnm(&p).is_err());
    }
}
