//! Named equivariance checks and the report they produce.
//!
//! Every check returns a non-negative residual; it passes when the residual
//! does not exceed its tolerance. Negative controls (constructions that must
//! *fail* a property by a margin) report `threshold / measured`, so they pass
//! exactly when the measured defect reaches the threshold.

use crate::gauge_mesh::{build_atlas, gem_gauge_audit, harmonic_gauge_audit, TriMesh};
use crate::gcnn::{
    convolution_recovery_error, group_conv, lifting_conv, segmentation_pipeline, z2_conv, GroupKernel, ImageZ2,
    Kernel2D, P4Feature, Padding, SegmentationNet,
};
use crate::grids::{
    rotate_spectral_s2, s2_analysis, s2_synthesis, so3_analysis, so3_synthesis, S2Grid, SO3Grid, SpectralS2Signal,
    SpectralSO3Signal,
};
use crate::harmonics::{
    parity, sph_harm_all, sph_index, sphere_angles, sphere_vector, wigner_D, wigner_D_all, CGTable, EulerZYZ,
};
use crate::nonlin::{act_blocks, norm_equivariance_residual, spherical_relu_residual, vector_field_nonlinearity};
use crate::repr::{
    correlate_1d_periodic, intensity_scale, multiplicities, pointwise_map, FeatureType, IntensityField,
};
use crate::rng::{self, SeededRng};
use crate::spectral_conv::{
    equivariance_residual, irrep_s2_conv, irrep_so3_conv, mix_channels_s2, mix_channels_so3, s2_conv_general,
    so3_conv_general, ConvJob, ConvRegistry, ConvVariant, KernelData, KernelS2, KernelSO3, RepSpectral, SignalData,
};
use crate::steerable::{
    constraint_nullity, constraint_residual, refinement_study, so2_constraint_residual, RadialShells,
    SteerableKernelBasis, So2SteerableKernel, So2Type, VolumetricKernel,
};
use crate::{Error, Result, C64};
use nalgebra::{DMatrix, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

/// Settings shared by every check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditContext {
    pub bandlimit: usize,
    pub seed: u64,
    /// Convention switch for mutation testing; `false` drops the Condon–Shortley phase.
    pub cs_phase: bool,
}

impl Default for AuditContext {
    fn default() -> Self {
        AuditContext {
            bandlimit: 8,
            seed: 0,
            cs_phase: true,
        }
    }
}

impl AuditContext {
    /// Per-check stream, independent of run order.
    pub fn rng_for(&self, name: &str) -> SeededRng {
        // FNV-1a keeps the stream stable across platforms and releases
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        rng::seeded(self.seed ^ h)
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &str;
    fn module(&self) -> &str;
    /// Short description of the property under test.
    fn anchor(&self) -> &str;
    fn tolerance(&self) -> f64;
    fn run(&self, ctx: &AuditContext, rng: &mut SeededRng) -> Result<f64>;
}

type CheckFn = dyn Fn(&AuditContext, &mut SeededRng) -> Result<f64> + Send + Sync;

/// A check backed by a closure.
pub struct FnCheck {
    name: String,
    module: String,
    anchor: String,
    tolerance: f64,
    body: Box<CheckFn>,
}

impl FnCheck {
    pub fn new(
        module: &str,
        short: &str,
        anchor: &str,
        tolerance: f64,
        body: impl Fn(&AuditContext, &mut SeededRng) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        FnCheck {
            name: format!("{module}.{short}"),
            module: module.into(),
            anchor: anchor.into(),
            tolerance,
            body: Box::new(body),
        }
    }
}

impl Check for FnCheck {
    fn name(&self) -> &str {
        &self.name
    }

    fn module(&self) -> &str {
        &self.module
    }

    fn anchor(&self) -> &str {
        &self.anchor
    }

    fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn run(&self, ctx: &AuditContext, rng: &mut SeededRng) -> Result<f64> {
        (self.body)(ctx, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConvProperty {
    Oracle,
    Equivariance,
    Linearity,
}

/// One property of one registered convolution variant.
pub struct ConvCheck {
    variant: Arc<dyn ConvVariant>,
    property: ConvProperty,
    name: String,
}

impl ConvCheck {
    fn new(variant: Arc<dyn ConvVariant>, property: ConvProperty) -> Self {
        let suffix = match property {
            ConvProperty::Oracle => "oracle",
            ConvProperty::Equivariance => "equivariance",
            ConvProperty::Linearity => "linearity",
        };
        let name = format!("spectral_conv.{}.{suffix}", variant.name());
        ConvCheck { variant, property, name }
    }

    fn is_scalar(&self) -> bool {
        self.variant.name().ends_with("_scalar")
    }
}

impl Check for ConvCheck {
    fn name(&self) -> &str {
        &self.name
    }

    fn module(&self) -> &str {
        "spectral_conv"
    }

    fn anchor(&self) -> &str {
        match self.property {
            ConvProperty::Oracle => "spectral result equals quadrature oracle",
            ConvProperty::Equivariance => "conv commutes with rotations at 10 random g",
            ConvProperty::Linearity => "conv is linear in kernel and signal",
        }
    }

    fn tolerance(&self) -> f64 {
        match self.property {
            ConvProperty::Oracle if self.is_scalar() => 1e-8,
            ConvProperty::Oracle | ConvProperty::Equivariance => 1e-7,
            ConvProperty::Linearity => 1e-12,
        }
    }

    fn run(&self, ctx: &AuditContext, rng: &mut SeededRng) -> Result<f64> {
        let v = self.variant.as_ref();
        match self.property {
            ConvProperty::Oracle => {
                let l = if self.is_scalar() { ctx.bandlimit } else { ctx.bandlimit.min(4) };
                let job = v.random_job(rng, l);
                v.oracle_residual(&job, rng)
            }
            ConvProperty::Equivariance => {
                let job = v.random_job(rng, ctx.bandlimit.min(4));
                let mut worst = 0.0f64;
                for _ in 0..10 {
                    let g = rng::rotation(rng);
                    worst = worst.max(equivariance_residual(v, &job, &g)?);
                }
                Ok(worst)
            }
            ConvProperty::Linearity => linearity_residual(v, ctx.bandlimit.min(4), rng),
        }
    }
}

fn lincomb(a: C64, x: &[C64], b: C64, y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}

fn linearity_residual(v: &dyn ConvVariant, l: usize, rng: &mut SeededRng) -> Result<f64> {
    let j1 = v.random_job(rng, l);
    let j2 = v.random_job(rng, l);
    // real weights: the S2 real-basis variants are defined on real fields only
    let (a, b) = (C64::new(rng::uniform(rng), 0.0), C64::new(rng::uniform(rng), 0.0));
    let kernel = match (&j1.kernel, &j2.kernel) {
        (KernelData::S2(x), KernelData::S2(y)) => {
            let mut k = x.clone();
            k.spec.coeffs = lincomb(a, &x.spec.coeffs, b, &y.spec.coeffs);
            KernelData::S2(k)
        }
        (KernelData::SO3(x), KernelData::SO3(y)) => {
            let mut k = x.clone();
            k.spec.coeffs = lincomb(a, &x.spec.coeffs, b, &y.spec.coeffs);
            KernelData::SO3(k)
        }
        _ => return Err(Error::ShapeMismatch("jobs differ in domain".into())),
    };
    let input = match (&j1.input, &j2.input) {
        (SignalData::S2(x), SignalData::S2(y)) => {
            let mut s = x.clone();
            s.coeffs = lincomb(a, &x.coeffs, b, &y.coeffs);
            SignalData::S2(s)
        }
        (SignalData::SO3(x), SignalData::SO3(y)) => {
            let mut s = x.clone();
            s.coeffs = lincomb(a, &x.coeffs, b, &y.coeffs);
            SignalData::SO3(s)
        }
        _ => return Err(Error::ShapeMismatch("jobs differ in domain".into())),
    };
    let one = C64::new(1.0, 0.0);
    let mut worst = 0.0f64;
    // kernel slot, then signal slot
    for (mixed, first, second) in [
        (
            ConvJob { kernel, ..j1.clone() },
            j1.clone(),
            ConvJob {
                kernel: j2.kernel.clone(),
                ..j1.clone()
            },
        ),
        (
            ConvJob { input, ..j1.clone() },
            j1.clone(),
            ConvJob {
                input: j2.input.clone(),
                ..j1.clone()
            },
        ),
    ] {
        let m = v.run(&mixed)?;
        let (p, q) = (v.run(&first)?, v.run(&second)?);
        let want = lincomb(a, &p.coeffs, b, &q.coeffs);
        let scale = want.iter().map(|z| z.norm()).fold(0.0, f64::max).max(one.norm());
        let d = m.coeffs.iter().zip(&want).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        worst = worst.max(d / scale);
    }
    Ok(worst)
}

/// Checks addressable by name.
pub struct CheckRegistry {
    checks: HashMap<String, Arc<dyn Check>>,
}

impl CheckRegistry {
    pub fn empty() -> Self {
        CheckRegistry { checks: HashMap::new() }
    }

    pub fn register(&mut self, c: Arc<dyn Check>) {
        self.checks.insert(c.name().to_string(), c);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Check>> {
        self.checks
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName(format!("check `{name}`")))
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.checks.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    /// Checks whose module equals `filter` or whose name starts with it.
    pub fn select(&self, filter: Option<&str>) -> Vec<Arc<dyn Check>> {
        let mut v: Vec<Arc<dyn Check>> = self
            .checks
            .values()
            .filter(|c| filter.is_none_or(|f| c.module() == f || c.name().starts_with(f)))
            .cloned()
            .collect();
        v.sort_by(|a, b| a.name().cmp(b.name()));
        v
    }

    /// Every built-in check, with one set of spectral checks per conv variant.
    pub fn with_convs(convs: &ConvRegistry) -> Self {
        let mut r = Self::empty();
        for c in builtin_checks() {
            r.register(c);
        }
        for name in convs.names() {
            let v = convs.get(&name).expect("listed name");
            for p in [ConvProperty::Oracle, ConvProperty::Equivariance, ConvProperty::Linearity] {
                r.register(Arc::new(ConvCheck::new(v.clone(), p)));
            }
        }
        r
    }
}

impl Default for CheckRegistry {
    fn default() -> Self {
        Self::with_convs(&ConvRegistry::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub module: String,
    pub anchor: String,
    /// `null` in JSON when the check errored.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub version: String,
    pub config: AuditContext,
    pub filter: Option<String>,
    pub summary: AuditSummary,
    pub checks: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn failures(&self) -> Vec<&AuditEntry> {
        self.checks.iter().filter(|e| !e.pass).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,module,anchor,residual,tolerance,pass\n");
        for e in &self.checks {
            let r = e.residual.map(|r| format!("{r:e}")).unwrap_or_default();
            s += &format!(
                "{},{},\"{}\",{},{:e},{}\n",
                e.name,
                e.module,
                e.anchor.replace('"', "\"\""),
                r,
                e.tolerance,
                e.pass
            );
        }
        s
    }
}

/// Runs the selected checks concurrently; entries come back sorted by name.
pub fn run_audit(registry: &CheckRegistry, ctx: &AuditContext, filter: Option<&str>) -> AuditReport {
    let checks = registry.select(filter);
    let mut entries: Vec<AuditEntry> = checks
        .par_iter()
        .map(|c| {
            let mut rng = ctx.rng_for(c.name());
            let (residual, error) = match c.run(ctx, &mut rng) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            AuditEntry {
                name: c.name().into(),
                module: c.module().into(),
                anchor: c.anchor().into(),
                residual,
                tolerance: c.tolerance(),
                pass: residual.is_some_and(|r| r <= c.tolerance()),
                error,
            }
        })
        .collect();
    entries.sort_by(|a, b| a.name.cmp(&b.name));
    let passed = entries.iter().filter(|e| e.pass).count();
    AuditReport {
        version: env!("CARGO_PKG_VERSION").into(),
        config: *ctx,
        filter: filter.map(String::from),
        summary: AuditSummary {
            total: entries.len(),
            passed,
            failed: entries.len() - passed,
        },
        checks: entries,
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `threshold / measured`, at most 1 exactly when `measured ≥ threshold`.
fn inverse_margin(threshold: f64, measured: f64) -> f64 {
    if measured > 0.0 {
        threshold / measured
    } else {
        f64::INFINITY
    }
}

fn builtin_checks() -> Vec<Arc<dyn Check>> {
    let mut v: Vec<Arc<dyn Check>> = Vec::new();
    let mut add = |c: FnCheck| v.push(Arc::new(c));

    add(FnCheck::new("harmonics", "wigner_unitarity", "D D† = I for l ≤ 16", 1e-12, |_, r| {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let d = wigner_D_all(16, &rng::rotation(r));
            for m in d {
                let n = m.nrows();
                worst = worst.max(max_abs(&(&m * m.adjoint() - DMatrix::identity(n, n))));
            }
        }
        Ok(worst)
    }));
    add(FnCheck::new("harmonics", "wigner_homomorphism", "D(gh) = D(g) D(h) for l ≤ 16", 1e-11, |_, r| {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (g, h) = (rng::rotation(r), rng::rotation(r));
            let (dg, dh, dgh) = (wigner_D_all(16, &g), wigner_D_all(16, &h), wigner_D_all(16, &g.compose(&h)));
            for l in 0..=16 {
                worst = worst.max(max_abs(&(&dgh[l] - &dg[l] * &dh[l])));
            }
        }
        Ok(worst)
    }));
    add(FnCheck::new(
        "harmonics",
        "wigner_conjugation",
        "conj D_mn = (-1)^(m-n) D_-m-n",
        1e-12,
        |_, r| {
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let g = rng::rotation(r);
                for l in 0..=8usize {
                    let d = wigner_D(l, &g);
                    let li = l as i64;
                    for m in -li..=li {
                        for n in -li..=li {
                            worst = worst.max((d.get(m, n).conj() - d.get(-m, -n) * parity(m - n)).norm());
                        }
                    }
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "harmonics",
        "harmonic_conjugation",
        "conj Y_m = (-1)^m Y_-m",
        1e-12,
        |ctx, r| {
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let (t, p) = rng::sphere_point(r);
                let y = sph_harm_all(16, t, p, ctx.cs_phase);
                for l in 0..=16usize {
                    for m in -(l as i64)..=l as i64 {
                        let d = y[sph_index(l, m)].conj() - y[sph_index(l, -m)] * parity(m);
                        worst = worst.max(d.norm());
                    }
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "harmonics",
        "rotation_rule",
        "Y_m(Rx) = sum_n conj D_mn(R) Y_n(x)",
        1e-11,
        |ctx, r| {
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let g = rng::rotation(r);
                let (t, p) = rng::sphere_point(r);
                let (tr, pr) = sphere_angles(&(g.to_matrix() * sphere_vector(t, p)));
                let y = sph_harm_all(8, t, p, ctx.cs_phase);
                let yr = sph_harm_all(8, tr, pr, ctx.cs_phase);
                for l in 0..=8usize {
                    let d = wigner_D(l, &g);
                    let li = l as i64;
                    for m in -li..=li {
                        let rhs: C64 = (-li..=li).map(|n| d.get(m, n).conj() * y[sph_index(l, n)]).sum();
                        worst = worst.max((yr[sph_index(l, m)] - rhs).norm());
                    }
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new("harmonics", "cg_orthogonality", "CG rows orthonormal, l1,l2 ≤ 8", 1e-12, |_, _| {
        let t = CGTable::shared(8);
        let mut worst = 0.0f64;
        for l1 in 0..=8usize {
            for l2 in 0..=8usize {
                let (i1, i2) = (l1 as i64, l2 as i64);
                let jmin = (i1 - i2).unsigned_abs() as usize;
                for j in jmin..=l1 + l2 {
                    for jp in jmin..=l1 + l2 {
                        let top = j.min(jp) as i64;
                        for m in -top..=top {
                            let s: f64 = (-i1..=i1)
                                .map(|m1| t.get(l1, m1, l2, m - m1, j, m) * t.get(l1, m1, l2, m - m1, jp, m))
                                .sum();
                            let want = if j == jp { 1.0 } else { 0.0 };
                            worst = worst.max((s - want).abs());
                        }
                    }
                }
            }
        }
        Ok(worst)
    }));
    add(FnCheck::new(
        "harmonics",
        "product_decomposition",
        "D^l1 D^l2 = sum_J CG CG D^J, l1,l2 ≤ 4",
        1e-11,
        |_, r| {
            let t = CGTable::shared(4);
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let g = rng::rotation(r);
                let d = wigner_D_all(8, &g);
                let get = |l: usize, m: i64, n: i64| d[l][((m + l as i64) as usize, (n + l as i64) as usize)];
                for l1 in 0..=4usize {
                    for l2 in 0..=4usize {
                        let (i1, i2) = (l1 as i64, l2 as i64);
                        for m1 in -i1..=i1 {
                            for n1 in -i1..=i1 {
                                for m2 in -i2..=i2 {
                                    for n2 in -i2..=i2 {
                                        let lhs = get(l1, m1, n1) * get(l2, m2, n2);
                                        let mut rhs = C64::new(0.0, 0.0);
                                        for j in (i1 - i2).unsigned_abs() as usize..=l1 + l2 {
                                            let ji = j as i64;
                                            if (m1 + m2).abs() > ji || (n1 + n2).abs() > ji {
                                                continue;
                                            }
                                            let c = t.get(l1, m1, l2, m2, j, m1 + m2) * t.get(l1, n1, l2, n2, j, n1 + n2);
                                            rhs += get(j, m1 + m2, n1 + n2) * c;
                                        }
                                        worst = worst.max((lhs - rhs).norm());
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(worst)
        },
    ));

    add(FnCheck::new(
        "grids",
        "s2_quadrature",
        "grid analysis of Y^l_m gives a unit coefficient",
        1e-10,
        |ctx, _| {
            let l = ctx.bandlimit;
            let grid = S2Grid::with_convention(l, ctx.cs_phase);
            let nodes: Vec<(f64, f64)> = (0..grid.len()).map(|i| grid.node(i)).collect();
            let tables: Vec<Vec<C64>> = nodes.iter().map(|&(t, p)| sph_harm_all(l - 1, t, p, true)).collect();
            let mut worst = 0.0f64;
            for idx in 0..l * l {
                let samples: Vec<C64> = tables.iter().map(|y| y[idx]).collect();
                let spec = s2_analysis(&grid, &samples, 1)?;
                for (k, z) in spec.coeffs.iter().enumerate() {
                    let want = if k == idx { 1.0 } else { 0.0 };
                    worst = worst.max((z - want).norm());
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new("grids", "s2_round_trip", "S2 synthesis then analysis at 2L", 1e-10, |ctx, r| {
        let l = 2 * ctx.bandlimit;
        let grid = S2Grid::with_convention(l, ctx.cs_phase);
        let spec = SpectralS2Signal::random(r, l, 2);
        Ok(s2_analysis(&grid, &s2_synthesis(&spec, &grid)?, 2)?.max_abs_diff(&spec))
    }));
    add(FnCheck::new("grids", "so3_round_trip", "SO3 synthesis then analysis at L", 1e-9, |ctx, r| {
        let grid = SO3Grid::new(ctx.bandlimit);
        let spec = SpectralSO3Signal::random(r, ctx.bandlimit, 1);
        Ok(so3_analysis(&grid, &so3_synthesis(&spec, &grid)?, 1)?.max_abs_diff(&spec))
    }));
    add(FnCheck::new("grids", "parseval_s2", "spectral and spatial energy agree on S2", 1e-9, |ctx, r| {
        let grid = S2Grid::with_convention(ctx.bandlimit, ctx.cs_phase);
        let spec = SpectralS2Signal::random(r, ctx.bandlimit, 1);
        let vals = s2_synthesis(&spec, &grid)?;
        let spatial: f64 = vals.iter().enumerate().map(|(i, v)| v.norm_sqr() * grid.weight(i)).sum();
        let spectral: f64 = spec.coeffs.iter().map(|z| z.norm_sqr()).sum();
        Ok((spatial - spectral).abs() / spectral.max(1.0))
    }));
    add(FnCheck::new("grids", "parseval_so3", "spectral and spatial energy agree on SO3", 1e-9, |ctx, r| {
        let l = ctx.bandlimit;
        let grid = SO3Grid::new(l);
        let spec = SpectralSO3Signal::random(r, l, 1);
        let vals = so3_synthesis(&spec, &grid)?;
        let spatial: f64 = vals.iter().enumerate().map(|(i, v)| v.norm_sqr() * grid.weight(i)).sum();
        let spectral: f64 = (0..l)
            .map(|k| 8.0 * PI * PI / (2 * k + 1) as f64 * spec.block(0, k).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        Ok((spatial - spectral).abs() / spectral.max(1.0))
    }));
    add(FnCheck::new(
        "grids",
        "analysis_equivariance",
        "analysis of rotated samples equals rotated coefficients",
        1e-10,
        |ctx, r| {
            let l = ctx.bandlimit;
            let grid = S2Grid::with_convention(l, ctx.cs_phase);
            let spec = SpectralS2Signal::random(r, l, 1);
            let mut worst = 0.0f64;
            for _ in 0..3 {
                let g = rng::rotation(r);
                let inv = g.inverse().to_matrix();
                let samples: Vec<C64> = (0..grid.len())
                    .map(|i| {
                        let (t, p) = grid.node(i);
                        let (tr, pr) = sphere_angles(&(inv * sphere_vector(t, p)));
                        spec.eval(tr, pr)[0]
                    })
                    .collect();
                let a = s2_analysis(&grid, &samples, 1)?;
                worst = worst.max(a.max_abs_diff(&rotate_spectral_s2(&spec, &g)));
            }
            Ok(worst)
        },
    ));

    add(FnCheck::new(
        "spectral_conv",
        "irrep_vs_general",
        "irrep-decomposed conv equals assembled general conv",
        1e-7,
        |ctx, r| {
            let l = ctx.bandlimit.min(4);
            let fin = FeatureType::new(&[(0, 2), (1, 1)]);
            let fout = FeatureType::new(&[(0, 1), (1, 1), (2, 1)]);
            let (wi, wo) = (fin.basis_change(), fout.basis_change());
            let (ri, ro) = (RepSpectral::from_feature_type(&fin), RepSpectral::from_feature_type(&fout));
            let k = KernelS2::random(r, l, fout.dim(), fin.dim());
            let f = SpectralS2Signal::random_real(r, l, fin.dim());
            let gen = s2_conv_general(&ri, &ro, &k, &f, &Default::default())?;
            let ir = irrep_s2_conv(&fout, &fin, &k.sandwich(&wo.adjoint(), &wi), &mix_channels_s2(&f, &wi.adjoint()), &Default::default())?;
            let a = mix_channels_so3(&ir, &wo).max_abs_diff(&gen);
            let k = KernelSO3::random(r, l, fout.dim(), fin.dim());
            let f = SpectralSO3Signal::random_real(r, l.saturating_sub(1).max(1), fin.dim());
            let gen = so3_conv_general(&ri, &ro, &k, &f, &Default::default())?;
            let ir = irrep_so3_conv(&fout, &fin, &k.sandwich(&wo.adjoint(), &wi), &mix_channels_so3(&f, &wi.adjoint()), &Default::default())?;
            Ok(a.max(mix_channels_so3(&ir, &wo).max_abs_diff(&gen)))
        },
    ));

    add(FnCheck::new(
        "repr",
        "multiplicity_round_trip",
        "feature type to block matrices and back",
        0.0,
        |_, _| {
            let ft = FeatureType::new(&[(0, 3), (1, 2), (2, 1)]);
            let back = multiplicities(|g| ft.representation(g), 3)?;
            Ok(if back == ft { 0.0 } else { 1.0 })
        },
    ));
    add(FnCheck::new(
        "repr",
        "intensity_pointwise",
        "pointwise maps commute with intensity scaling",
        1e-12,
        |_, r| {
            let (n, dim) = (32, 3);
            let f: Vec<C64> = (0..n * dim).map(|_| rng::complex(r)).collect();
            let psi = IntensityField {
                psi: (0..n).map(|_| rng::complex(r)).collect(),
            };
            let t = DMatrix::from_fn(2, dim, |_, _| rng::complex(r));
            let lhs = pointwise_map(&t, &intensity_scale(&psi, &f, dim)?)?;
            let rhs = intensity_scale(&psi, &pointwise_map(&t, &f)?, 2)?;
            Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
        },
    ));
    add(FnCheck::new(
        "repr",
        "intensity_convolution_control",
        "width-3 conv fails intensity commutation by 0.1 (inverse margin)",
        1.0,
        |_, _| {
            let n = 32;
            let k = [0.25, 0.5, 0.25].map(|x| C64::new(x, 0.0));
            let ones = vec![C64::new(1.0, 0.0); n];
            let bump = IntensityField::bump_1d(n, n / 2, 1.5);
            let a = correlate_1d_periodic(&k, &intensity_scale(&bump, &ones, 1)?);
            let b = intensity_scale(&bump, &correlate_1d_periodic(&k, &ones), 1)?;
            let res = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            Ok(inverse_margin(0.1, res))
        },
    ));

    add(FnCheck::new(
        "steerable_kernels",
        "continuous_constraint",
        "every basis element satisfies the kernel constraint, degrees ≤ 2",
        1e-9,
        |_, r| {
            let rots: Vec<EulerZYZ> = (0..50).map(|_| rng::rotation(r)).collect();
            let pts: Vec<Vector3<f64>> = (0..50)
                .map(|_| {
                    let (t, p) = rng::sphere_point(r);
                    sphere_vector(t, p) * (0.3 + 2.0 * r.gen::<f64>())
                })
                .collect();
            let mut worst = 0.0f64;
            for l in 0..=2 {
                for t in 0..=2 {
                    let b = SteerableKernelBasis::new(l, t, RadialShells::new(2, 1.0));
                    for e in 0..b.len() {
                        let mut w = vec![0.0; b.len()];
                        w[e] = 1.0;
                        worst = worst.max(b.continuous_residual(&w, &rots, &pts)?);
                    }
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "steerable_kernels",
        "lattice_constraint",
        "every basis element on a 9^3 lattice, degrees ≤ 2",
        1e-6,
        |_, r| {
            let rots: Vec<EulerZYZ> = (0..5).map(|_| rng::rotation(r)).collect();
            let mut worst = 0.0f64;
            for l in 0..=2 {
                for t in 0..=2 {
                    let b = SteerableKernelBasis::new(l, t, RadialShells::new(3, 1.0));
                    let (fi, fo) = b.feature_types();
                    for e in 0..b.len() {
                        let mut w = vec![0.0; b.len()];
                        w[e] = 1.0;
                        let k = b.to_lattice(&w, 9, 1.0)?;
                        worst = worst.max(constraint_residual(&k, &fi, &fo, &rots)?.residual);
                    }
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "steerable_kernels",
        "random_kernel_control",
        "random lattice kernel violates the constraint by 0.1 (inverse margin)",
        1.0,
        |_, r| {
            let rots: Vec<EulerZYZ> = (0..5).map(|_| rng::rotation(r)).collect();
            let b = SteerableKernelBasis::new(1, 1, RadialShells::new(3, 1.0));
            let (fi, fo) = b.feature_types();
            let bad = VolumetricKernel::random(r, 9, 1.0, 3, 3, 2);
            Ok(inverse_margin(0.1, constraint_residual(&bad, &fi, &fo, &rots)?.residual))
        },
    ));
    add(FnCheck::new(
        "steerable_kernels",
        "refinement_monotone",
        "constraint defect shrinks over h, h/2, h/4 (largest ratio)",
        1.0,
        |_, r| {
            let g = rng::rotation(r);
            let res = refinement_study(1, 1, &g, 1.0, 3, r)?;
            Ok(res.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max))
        },
    ));
    add(FnCheck::new(
        "steerable_kernels",
        "solution_count",
        "one real angular solution per admissible degree",
        0.0,
        |_, r| {
            let mut worst = 0usize;
            for l in 0..=2usize {
                for t in 0..=2usize {
                    for j in l.abs_diff(t)..=l + t {
                        worst = worst.max(constraint_nullity(l, t, j, r).abs_diff(1));
                    }
                    worst = worst.max(constraint_nullity(l, t, l + t + 1, r));
                }
            }
            Ok(worst as f64)
        },
    ));
    add(FnCheck::new(
        "steerable_kernels",
        "so2_kernel_constraint",
        "planar steerable kernels satisfy the gauge condition",
        1e-12,
        |_, r| {
            let k = So2SteerableKernel::random(r, So2Type::new(&[(0, 1), (1, 2)]), So2Type::new(&[(2, 1), (0, 1)]));
            Ok(so2_constraint_residual(&k))
        },
    ));

    add(FnCheck::new(
        "nonlin",
        "vector_field_equivariance",
        "vector-field nonlinearity on 100 tie-free inputs",
        0.0,
        |_, r| {
            let v0 = [0.7, -0.2];
            let mut worst = 0.0f64;
            let mut done = 0;
            while done < 100 {
                let f = P4Feature::random(r, 5, 1);
                let base = vector_field_nonlinearity(&f, v0)?;
                if !base.ties.is_empty() {
                    continue;
                }
                let (t, k) = ((r.gen_range(0..5), r.gen_range(0..5)), r.gen_range(0..4));
                let moved = vector_field_nonlinearity(&f.transformed(t, k), v0)?;
                let want = base.transformed(t, k);
                for (a, b) in moved.values.iter().zip(&want.values) {
                    worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
                }
                done += 1;
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "nonlin",
        "vector_field_ties",
        "constant input reports a tie at every pixel",
        0.0,
        |_, _| {
            let mut f = P4Feature::zeros(3, 1);
            f.values.iter_mut().for_each(|v| *v = 1.0);
            let out = vector_field_nonlinearity(&f, [1.0, 0.0])?;
            Ok(if out.ties.len() == 9 && out.tie_error().is_some() { 0.0 } else { 1.0 })
        },
    ));
    add(FnCheck::new(
        "nonlin",
        "norm_invariance",
        "block norms unchanged by rotation",
        1e-12,
        |_, r| {
            let ft = FeatureType::new(&[(0, 1), (1, 2), (2, 1)]);
            let f: Vec<f64> = (0..ft.dim()).map(|_| rng::uniform(r)).collect();
            let mut worst = 0.0f64;
            for _ in 0..10 {
                let g = rng::rotation(r);
                let h = act_blocks(&ft, &g, &f)?;
                for b in ft.blocks() {
                    let n = 2 * b.lambda + 1;
                    let na: f64 = f[b.offset..b.offset + n].iter().map(|x| x * x).sum::<f64>().sqrt();
                    let nb: f64 = h[b.offset..b.offset + n].iter().map(|x| x * x).sum::<f64>().sqrt();
                    worst = worst.max((na - nb).abs());
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "nonlin",
        "norm_equivariance",
        "norm nonlinearity commutes with block rotations",
        1e-10,
        |_, r| norm_equivariance_residual(&FeatureType::new(&[(0, 1), (1, 2), (2, 1)]), 4, r),
    ));
    add(FnCheck::new(
        "nonlin",
        "spherical_relu",
        "pointwise relu on S2 samples is only approximately equivariant at 2L",
        1e-2,
        |ctx, r| spherical_relu_residual(2 * ctx.bandlimit, r),
    ));

    add(FnCheck::new(
        "gauge_mesh",
        "harmonic_icosahedron",
        "harmonic conv phase law under frame rotations, icosahedron",
        1e-10,
        |_, r| {
            let m = TriMesh::icosahedron();
            harmonic_gauge_audit(&m, &build_atlas(&m)?, r, 20)
        },
    ));
    add(FnCheck::new(
        "gauge_mesh",
        "harmonic_sphere",
        "harmonic conv phase law, 200-vertex sphere",
        1e-10,
        |_, r| {
            let m = TriMesh::random_sphere(200, r)?;
            harmonic_gauge_audit(&m, &build_atlas(&m)?, r, 20)
        },
    ));
    add(FnCheck::new(
        "gauge_mesh",
        "gem_icosahedron",
        "mesh conv gauge equivariance, icosahedron",
        1e-10,
        |_, r| {
            let m = TriMesh::icosahedron();
            gem_gauge_audit(&m, &build_atlas(&m)?, r, 20)
        },
    ));
    add(FnCheck::new(
        "gauge_mesh",
        "gem_sphere",
        "mesh conv gauge equivariance, 200-vertex sphere",
        1e-10,
        |_, r| {
            let m = TriMesh::random_sphere(200, r)?;
            gem_gauge_audit(&m, &build_atlas(&m)?, r, 20)
        },
    ));
    add(FnCheck::new(
        "gauge_mesh",
        "transport_antisymmetry",
        "transport j→i inverts transport i→j",
        1e-12,
        |_, r| {
            let m = TriMesh::random_sphere(200, r)?;
            Ok(build_atlas(&m)?.transport_antisymmetry())
        },
    ));
    add(FnCheck::new(
        "gauge_mesh",
        "atlas_determinism",
        "rebuilding the atlas gives identical frames and angles",
        0.0,
        |_, r| {
            let m = TriMesh::random_sphere(200, r)?;
            Ok(if build_atlas(&m)? == build_atlas(&m)? { 0.0 } else { 1.0 })
        },
    ));

    add(FnCheck::new(
        "gcnn_discrete",
        "z2_equivariance",
        "periodic planar conv commutes with every shift",
        0.0,
        |_, r| {
            let im = ImageZ2::random(r, 9, 6, 2);
            let k = Kernel2D::random(r, 3, 3, 2);
            let out = z2_conv(&k, &im, Padding::Periodic)?;
            let mut worst = 0.0f64;
            for tx in 0..9 {
                for ty in 0..6 {
                    let a = z2_conv(&k, &im.shifted(tx, ty), Padding::Periodic)?;
                    worst = worst.max(a.max_abs_diff(&out.shifted(tx, ty)));
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "gcnn_discrete",
        "p4_equivariance",
        "lifting and group conv commute with every rototranslation",
        0.0,
        |_, r| {
            let im = ImageZ2::random(r, 5, 5, 2);
            let k1 = Kernel2D::random(r, 3, 2, 2);
            let k2 = GroupKernel::random(r, 3, 2, 2);
            let lift = lifting_conv(&k1, &im, Padding::Periodic)?;
            let deep = group_conv(&k2, &lift, Padding::Periodic)?;
            let mut worst = 0.0f64;
            for k in 0..4 {
                for tx in 0..5 {
                    for ty in 0..5 {
                        let l2 = lifting_conv(&k1, &im.transformed((tx, ty), k)?, Padding::Periodic)?;
                        worst = worst.max(l2.max_abs_diff(&lift.transformed((tx, ty), k)));
                        let d2 = group_conv(&k2, &l2, Padding::Periodic)?;
                        worst = worst.max(d2.max_abs_diff(&deep.transformed((tx, ty), k)));
                    }
                }
            }
            Ok(worst)
        },
    ));
    add(FnCheck::new(
        "gcnn_discrete",
        "kernel_recovery",
        "group-averaged equivariant map is a group convolution",
        1e-12,
        |_, r| convolution_recovery_error(r, 4, 5),
    ));
    add(FnCheck::new(
        "gcnn_discrete",
        "segmentation_translation",
        "segmentation pipeline commutes with shifts",
        0.0,
        |_, r| {
            let net = SegmentationNet::random(r, 3, 4, 5);
            let im = ImageZ2::random(r, 8, 8, 3);
            let out = segmentation_pipeline(&net, &im)?;
            let a = segmentation_pipeline(&net, &im.shifted(3, 5))?;
            Ok(a.max_abs_diff(&out.shifted(3, 5)))
        },
    ));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lookup_and_filter() {
        let reg = CheckRegistry::default();
        assert!(reg.len() > 30);
        assert!(matches!(reg.get("nope"), Err(Error::UnknownName(_))));
        let h = reg.select(Some("harmonics"));
        assert!(!h.is_empty() && h.iter().all(|c| c.module() == "harmonics"));
        let names: Vec<_> = reg.select(None).iter().map(|c| c.name().to_string()).collect();
        assert_eq!(names, reg.names());
    }

    #[test]
    fn report_is_deterministic_and_sorted() {
        let reg = CheckRegistry::default();
        let ctx = AuditContext::default();
        let a = run_audit(&reg, &ctx, Some("repr"));
        let b = run_audit(&reg, &ctx, Some("repr"));
        assert_eq!(a, b);
        assert!(a.all_passed(), "{a:#?}");
        assert!(a.checks.windows(2).all(|w| w[0].name < w[1].name));
        let back: AuditReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
        assert_eq!(a.to_csv().lines().count(), a.checks.len() + 1);
    }

    #[test]
    fn errors_fail_the_check() {
        let mut reg = CheckRegistry::empty();
        reg.register(Arc::new(FnCheck::new("x", "boom", "always errors", 1.0, |_, _| {
            Err(Error::Parse("boom".into()))
        })));
        let rep = run_audit(&reg, &AuditContext::default(), None);
        assert_eq!(rep.summary.failed, 1);
        assert!(rep.checks[0].residual.is_none() && rep.checks[0].error.is_some());
    }
}
