//! Named convolution strategies behind a common trait, for the CLI and the audit.

use super::*;
use crate::grids::{rotate_spectral_s2, rotate_spectral_so3};
use crate::rng::SeededRng;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    S2,
    SO3,
}

#[derive(Debug, Clone)]
pub enum KernelData {
    S2(KernelS2),
    SO3(KernelSO3),
}

#[derive(Debug, Clone)]
pub enum SignalData {
    S2(SpectralS2Signal),
    SO3(SpectralSO3Signal),
}

impl SignalData {
    pub fn domain(&self) -> Domain {
        match self {
            SignalData::S2(_) => Domain::S2,
            SignalData::SO3(_) => Domain::SO3,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            SignalData::S2(s) => s.channels,
            SignalData::SO3(s) => s.channels,
        }
    }
}

impl KernelData {
    pub fn domain(&self) -> Domain {
        match self {
            KernelData::S2(_) => Domain::S2,
            KernelData::SO3(_) => Domain::SO3,
        }
    }
}

/// Everything a convolution variant consumes.
///
/// For irrep variants the kernel and signal are in the complex irrep basis
/// of `rho_in`/`rho_out`; otherwise in the real basis.
#[derive(Debug, Clone)]
pub struct ConvJob {
    pub kernel: KernelData,
    pub input: SignalData,
    pub rho_in: FeatureType,
    pub rho_out: FeatureType,
    pub options: ConvOptions,
}

impl ConvJob {
    fn with_input(&self, input: SignalData) -> Self {
        ConvJob {
            input,
            ..self.clone()
        }
    }

    fn check(&self, domain: Domain) -> Result<()> {
        if self.kernel.domain() != domain || self.input.domain() != domain {
            return Err(Error::ShapeMismatch("kernel or signal on the wrong domain".into()));
        }
        if self.input.channels() != self.rho_in.dim() {
            return Err(Error::ShapeMismatch(format!(
                "signal has {} channels, input type has dimension {}",
                self.input.channels(),
                self.rho_in.dim()
            )));
        }
        Ok(())
    }
}

pub trait ConvVariant: Send + Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> Domain;
    fn run(&self, job: &ConvJob) -> Result<SpectralSO3Signal>;
    /// `π₁(g)` applied to the job's input.
    fn act_on_input(&self, job: &ConvJob, g: &EulerZYZ) -> SignalData;
    /// `π₂(g)` applied to an output of this variant.
    fn act_on_output(&self, job: &ConvJob, out: &SpectralSO3Signal, g: &EulerZYZ) -> SpectralSO3Signal;
    /// Max deviation from a spatial quadrature evaluation of the same convolution.
    fn oracle_residual(&self, job: &ConvJob, rng: &mut SeededRng) -> Result<f64>;
    fn random_job(&self, rng: &mut SeededRng, bandlimit: usize) -> ConvJob;
}

/// `max |conv(π₁(g)f) − π₂(g)conv(f)|`.
pub fn equivariance_residual(v: &dyn ConvVariant, job: &ConvJob, g: &EulerZYZ) -> Result<f64> {
    let out = v.run(job)?;
    let lhs = v.run(&job.with_input(v.act_on_input(job, g)))?;
    Ok(lhs.max_abs_diff(&v.act_on_output(job, &out, g)))
}

fn rep_matrix(ft: &FeatureType, g: &EulerZYZ, complex: bool) -> DMatrix<C64> {
    if complex {
        ft.complex_representation(g)
    } else {
        real_to_complex(&ft.representation(g))
    }
}

fn act_input(job: &ConvJob, g: &EulerZYZ, complex: bool) -> SignalData {
    let m = rep_matrix(&job.rho_in, g, complex);
    match &job.input {
        SignalData::S2(f) => SignalData::S2(mix_channels_s2(&rotate_spectral_s2(f, g), &m)),
        SignalData::SO3(f) => SignalData::SO3(mix_channels_so3(&rotate_spectral_so3(f, g), &m)),
    }
}

fn act_output(job: &ConvJob, out: &SpectralSO3Signal, g: &EulerZYZ, complex: bool) -> SpectralSO3Signal {
    mix_channels_so3(&rotate_spectral_so3(out, g), &rep_matrix(&job.rho_out, g, complex))
}

/// Real-basis kernel and signal plus the map taking variant outputs to the real basis.
fn real_basis(job: &ConvJob, complex: bool) -> (KernelData, SignalData, Option<DMatrix<C64>>) {
    if !complex {
        return (job.kernel.clone(), job.input.clone(), None);
    }
    let (wi, wo) = (job.rho_in.basis_change(), job.rho_out.basis_change());
    let k = match &job.kernel {
        KernelData::S2(k) => KernelData::S2(k.sandwich(&wo, &wi.adjoint())),
        KernelData::SO3(k) => KernelData::SO3(k.sandwich(&wo, &wi.adjoint())),
    };
    let f = match &job.input {
        SignalData::S2(f) => SignalData::S2(mix_channels_s2(f, &wi)),
        SignalData::SO3(f) => SignalData::SO3(mix_channels_so3(f, &wi)),
    };
    (k, f, Some(wo))
}

fn oracle(job: &ConvJob, out: &SpectralSO3Signal, complex: bool, rng: &mut SeededRng) -> Result<f64> {
    let (k, f, wo) = real_basis(job, complex);
    let out = match wo {
        Some(w) => mix_channels_so3(out, &w),
        None => out.clone(),
    };
    let (fi, fo) = (&job.rho_in, &job.rho_out);
    let r1 = |g: &EulerZYZ| fi.representation(g);
    let r2 = |g: &EulerZYZ| fo.representation(g);
    match (&k, &f) {
        (KernelData::S2(k), SignalData::S2(f)) => {
            let o = s2_oracle_spectral(&r1, &r2, k, f, out.bandlimit)?;
            Ok(o.max_abs_diff(&out))
        }
        (KernelData::SO3(k), SignalData::SO3(f)) => {
            let budget = k.bandlimit() + f.bandlimit + fi.max_degree() + fo.max_degree();
            let grid = SO3Grid::new(budget / 2 + 1);
            let pts: Vec<EulerZYZ> = (0..6).map(|_| crate::rng::rotation(rng)).collect();
            let vals = so3_conv_general_spatial(&r1, &r2, k, f, &grid, &pts)?;
            let mut worst = 0.0f64;
            for (p, v) in pts.iter().zip(vals) {
                for (a, b) in out.eval(p).iter().zip(v) {
                    worst = worst.max((a - b).norm());
                }
            }
            Ok(worst)
        }
        _ => Err(Error::ShapeMismatch("kernel and signal domains differ".into())),
    }
}

fn random_job(
    rng: &mut SeededRng,
    domain: Domain,
    bandlimit: usize,
    rho_in: FeatureType,
    rho_out: FeatureType,
) -> ConvJob {
    let (din, dout) = (rho_in.dim(), rho_out.dim());
    let (kernel, input) = match domain {
        Domain::S2 => (
            KernelData::S2(KernelS2::random(rng, bandlimit, dout, din)),
            SignalData::S2(SpectralS2Signal::random_real(rng, bandlimit, din)),
        ),
        Domain::SO3 => (
            KernelData::SO3(KernelSO3::random(rng, bandlimit, dout, din)),
            SignalData::SO3(SpectralSO3Signal::random_real(rng, bandlimit, din)),
        ),
    };
    ConvJob {
        kernel,
        input,
        rho_in,
        rho_out,
        options: ConvOptions::default(),
    }
}

macro_rules! variant_common {
    ($complex:expr) => {
        fn act_on_input(&self, job: &ConvJob, g: &EulerZYZ) -> SignalData {
            act_input(job, g, $complex)
        }

        fn act_on_output(&self, job: &ConvJob, out: &SpectralSO3Signal, g: &EulerZYZ) -> SpectralSO3Signal {
            act_output(job, out, g, $complex)
        }

        fn oracle_residual(&self, job: &ConvJob, rng: &mut SeededRng) -> Result<f64> {
            let out = self.run(job)?;
            oracle(job, &out, $complex, rng)
        }
    };
}

/// Scalar feature channels; the S² form is the literal conjugate formula and expects real signals.
pub struct ScalarConv(pub Domain);

impl ConvVariant for ScalarConv {
    fn name(&self) -> &str {
        match self.0 {
            Domain::S2 => "s2_scalar",
            Domain::SO3 => "so3_scalar",
        }
    }

    fn domain(&self) -> Domain {
        self.0
    }

    fn run(&self, job: &ConvJob) -> Result<SpectralSO3Signal> {
        job.check(self.0)?;
        if job.rho_in.max_degree() > 0 || job.rho_out.max_degree() > 0 {
            return Err(Error::ShapeMismatch("scalar convolution needs scalar feature types".into()));
        }
        match (&job.kernel, &job.input) {
            (KernelData::S2(k), SignalData::S2(f)) => s2_conv_scalar(k, f),
            (KernelData::SO3(k), SignalData::SO3(f)) => so3_conv_scalar(k, f),
            _ => unreachable!(),
        }
    }

    variant_common!(false);

    fn random_job(&self, rng: &mut SeededRng, bandlimit: usize) -> ConvJob {
        random_job(rng, self.0, bandlimit, FeatureType::scalars(2), FeatureType::scalars(3))
    }
}

/// Real representation content handled through Fourier blocks of `ρ₁`, `ρ₂`.
pub struct GeneralConv(pub Domain);

impl ConvVariant for GeneralConv {
    fn name(&self) -> &str {
        match self.0 {
            Domain::S2 => "s2_general",
            Domain::SO3 => "so3_general",
        }
    }

    fn domain(&self) -> Domain {
        self.0
    }

    fn run(&self, job: &ConvJob) -> Result<SpectralSO3Signal> {
        job.check(self.0)?;
        let r1 = RepSpectral::from_feature_type(&job.rho_in);
        let r2 = RepSpectral::from_feature_type(&job.rho_out);
        match (&job.kernel, &job.input) {
            (KernelData::S2(k), SignalData::S2(f)) => s2_conv_general(&r1, &r2, k, f, &job.options),
            (KernelData::SO3(k), SignalData::SO3(f)) => so3_conv_general(&r1, &r2, k, f, &job.options),
            _ => unreachable!(),
        }
    }

    variant_common!(false);

    fn random_job(&self, rng: &mut SeededRng, bandlimit: usize) -> ConvJob {
        random_job(
            rng,
            self.0,
            bandlimit,
            FeatureType::new(&[(0, 1), (1, 1)]),
            FeatureType::new(&[(1, 1), (0, 1)]),
        )
    }
}

/// Features split into complex irreps; no representation Fourier blocks needed.
pub struct IrrepConv(pub Domain);

impl ConvVariant for IrrepConv {
    fn name(&self) -> &str {
        match self.0 {
            Domain::S2 => "s2_irrep",
            Domain::SO3 => "so3_irrep",
        }
    }

    fn domain(&self) -> Domain {
        self.0
    }

    fn run(&self, job: &ConvJob) -> Result<SpectralSO3Signal> {
        job.check(self.0)?;
        match (&job.kernel, &job.input) {
            (KernelData::S2(k), SignalData::S2(f)) => {
                irrep_s2_conv(&job.rho_out, &job.rho_in, k, f, &job.options)
            }
            (KernelData::SO3(k), SignalData::SO3(f)) => {
                irrep_so3_conv(&job.rho_out, &job.rho_in, k, f, &job.options)
            }
            _ => unreachable!(),
        }
    }

    variant_common!(true);

    fn random_job(&self, rng: &mut SeededRng, bandlimit: usize) -> ConvJob {
        let mut job = random_job(
            rng,
            self.0,
            bandlimit,
            FeatureType::new(&[(0, 2), (1, 1)]),
            FeatureType::new(&[(0, 1), (1, 1), (2, 1)]),
        );
        let wi = job.rho_in.basis_change();
        job.input = match job.input {
            SignalData::S2(f) => SignalData::S2(mix_channels_s2(&f, &wi.adjoint())),
            SignalData::SO3(f) => SignalData::SO3(mix_channels_so3(&f, &wi.adjoint())),
        };
        job
    }
}

/// Variants addressable by name.
pub struct ConvRegistry {
    variants: HashMap<String, Arc<dyn ConvVariant>>,
}

impl ConvRegistry {
    pub fn empty() -> Self {
        ConvRegistry {
            variants: HashMap::new(),
        }
    }

    pub fn register(&mut self, v: Arc<dyn ConvVariant>) {
        self.variants.insert(v.name().to_string(), v);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ConvVariant>> {
        self.variants
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName(format!("conv variant `{name}`")))
    }

    /// Sorted names.
    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.variants.keys().cloned().collect();
        v.sort();
        v
    }
}

impl Default for ConvRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        for d in [Domain::S2, Domain::SO3] {
            r.register(Arc::new(ScalarConv(d)));
            r.register(Arc::new(GeneralConv(d)));
            r.register(Arc::new(IrrepConv(d)));
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_six() {
        let r = ConvRegistry::default();
        assert_eq!(r.names().len(), 6);
        assert!(matches!(r.get("nope"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn wrong_domain_rejected() {
        let r = ConvRegistry::default();
        let mut rng = crate::rng::seeded(0);
        let job = r.get("so3_scalar").unwrap().random_job(&mut rng, 2);
        assert!(matches!(r.get("s2_scalar").unwrap().run(&job), Err(Error::ShapeMismatch(_))));
    }
}
