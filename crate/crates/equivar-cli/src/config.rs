//! TOML run configs for `equivar conv`.

use anyhow::{bail, Context, Result};
use equivar::grids::SignalFile;
use equivar::repr::FeatureType;
use equivar::rng;
use equivar::spectral_conv::{
    ConvJob, ConvOptions, ConvRegistry, Domain, KernelData, KernelS2, KernelSO3, SignalData,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Paths are relative to the config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: String,
    pub kernel: PathBuf,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    /// `[[degree, multiplicity], ...]`; scalars matching the kernel when absent.
    pub rho_in: Option<Vec<(usize, usize)>>,
    pub rho_out: Option<Vec<(usize, usize)>>,
    pub out_bandlimit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn run_conv(path: &Path, out: Option<&Path>, oracle: bool) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let registry = ConvRegistry::default();
    let variant = registry.get(&cfg.variant)?;

    let kpath = resolve(base, &cfg.kernel);
    let kfile = SignalFile::read(&kpath).with_context(|| format!("reading kernel {}", kpath.display()))?;
    let ipath = resolve(base, &cfg.input);
    let ifile = SignalFile::read(&ipath).with_context(|| format!("reading input {}", ipath.display()))?;
    let (kernel, input, kin, kout) = match variant.domain() {
        Domain::S2 => {
            let k = KernelS2::from_file(&kfile)?;
            let (i, o) = (k.in_channels, k.out_channels);
            (KernelData::S2(k), SignalData::S2(ifile.to_s2()?), i, o)
        }
        Domain::SO3 => {
            let k = KernelSO3::from_file(&kfile)?;
            let (i, o) = (k.in_channels, k.out_channels);
            (KernelData::SO3(k), SignalData::SO3(ifile.to_so3()?), i, o)
        }
    };
    let ft = |pairs: &Option<Vec<(usize, usize)>>, n: usize| match pairs {
        Some(p) => FeatureType::new(p),
        None => FeatureType::scalars(n),
    };
    let job = ConvJob {
        kernel,
        input,
        rho_in: ft(&cfg.rho_in, kin),
        rho_out: ft(&cfg.rho_out, kout),
        options: ConvOptions {
            out_bandlimit: cfg.out_bandlimit,
            cg: None,
        },
    };
    if job.rho_in.dim() != kin || job.rho_out.dim() != kout {
        bail!(
            "feature types have dimensions {}→{}, the kernel is {}→{}",
            job.rho_in.dim(),
            job.rho_out.dim(),
            kin,
            kout
        );
    }
    let result = variant.run(&job)?;
    let target = out.map(Path::to_path_buf).or_else(|| cfg.output.as_ref().map(|p| resolve(base, p)));
    if let Some(t) = &target {
        SignalFile::from_so3(&result)
            .write(t)
            .with_context(|| format!("writing {}", t.display()))?;
    }
    let mut summary = serde_json::json!({
        "variant": variant.name(),
        "bandlimit": result.bandlimit,
        "channels": result.channels,
    });
    if oracle {
        let mut r = rng::seeded(cfg.seed);
        summary["oracle_residual"] = variant.oracle_residual(&job, &mut r)?.into();
    }
    println!("{summary}");
    Ok(())
}
