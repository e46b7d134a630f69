use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use equivar::audit::{run_audit, AuditContext, CheckRegistry};
use equivar::gauge_mesh::{build_atlas, gem_gauge_audit, harmonic_conv, harmonic_gauge_audit, MeshFeature, TriMesh};
use equivar::grids::{
    read_samples_csv, s2_analysis, s2_synthesis, so3_analysis, so3_synthesis, write_samples_csv, S2Grid, SO3Grid,
    SampleKind, SignalFile,
};
use equivar::rng;
use equivar::steerable::{export_basis, CircularHarmonic, RadialProfile};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod config;

#[derive(Parser)]
#[command(name = "equivar", version, about = "Equivariant convolutions and their audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between grid samples (CSV) and spectral coefficients (JSON).
    Transform {
        #[arg(value_enum)]
        direction: Direction,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Grid bandlimit; required for analysis, defaults to the file's for synthesis.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=64))]
        bandlimit: Option<u32>,
    },
    /// Run a spectral convolution described by a TOML run config.
    Conv {
        #[arg(long)]
        config: PathBuf,
        /// Output file; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also compare against the quadrature oracle and print the residual.
        #[arg(long)]
        oracle: bool,
    },
    /// Run the equivariance audit.
    Check {
        /// Module name or check-name prefix.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..=16))]
        bandlimit: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, value_enum, hide = true)]
        mutate: Option<Mutation>,
        /// List check names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Export a certified steerable kernel basis as JSON.
    Kernels {
        #[arg(long)]
        lambda: usize,
        #[arg(long)]
        theta: usize,
        #[arg(long, default_value_t = 9)]
        side: usize,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[arg(long, default_value_t = 3)]
        shells: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Harmonic convolution on a mesh plus gauge audits.
    Mesh {
        /// OFF or OBJ file; a built-in mesh is used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Builtin::Icosahedron)]
        builtin: Builtin,
        /// Vertex count of the random sphere mesh.
        #[arg(long, default_value_t = 200)]
        vertices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rotation order of the kernel.
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        m: i64,
        /// Input features (JSON); random order-0 features when absent.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Where to write the convolved features.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Analysis,
    Synthesis,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mutation {
    CsPhase,
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Icosahedron,
    Sphere,
}

/// Errors that mean "ran fine, but a check failed".
#[derive(Debug)]
struct ChecksFailed;

impl std::fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("checks failed")
    }
}

impl std::error::Error for ChecksFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ChecksFailed>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Transform {
            direction,
            input,
            output,
            bandlimit,
        } => transform(direction, &input, &output, bandlimit.map(|b| b as usize)),
        Command::Conv { config, out, oracle } => config::run_conv(&config, out.as_deref(), oracle),
        Command::Check {
            filter,
            bandlimit,
            seed,
            out,
            format,
            mutate,
            list,
        } => check(filter, bandlimit as usize, seed, out, format, mutate, list),
        Command::Kernels {
            lambda,
            theta,
            side,
            spacing,
            shells,
            seed,
            out,
        } => kernels(lambda, theta, side, spacing, shells, seed, &out),
        Command::Mesh {
            input,
            builtin,
            vertices,
            seed,
            m,
            features,
            out,
        } => mesh(input, builtin, vertices, seed, m, features, out),
    }
}

fn transform(direction: Direction, input: &Path, output: &Path, bandlimit: Option<usize>) -> Result<()> {
    match direction {
        Direction::Analysis => {
            let l = bandlimit.ok_or_else(|| anyhow!("--bandlimit is required for analysis"))?;
            let (kind, coords, values, channels) =
                read_samples_csv(input).with_context(|| format!("reading {}", input.display()))?;
            let file = match kind {
                SampleKind::S2 => {
                    let grid = S2Grid::new(l);
                    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| {
                        let (t, p) = grid.node(i);
                        vec![t, p]
                    }).collect();
                    check_nodes(&coords, &nodes, l)?;
                    SignalFile::from_s2(&s2_analysis(&grid, &values, channels)?)
                }
                SampleKind::SO3 => {
                    let grid = SO3Grid::new(l);
                    let nodes: Vec<Vec<f64>> = (0..grid.len()).map(|i| {
                        let g = grid.node(i);
                        vec![g.alpha, g.beta, g.gamma]
                    }).collect();
                    check_nodes(&coords, &nodes, l)?;
                    SignalFile::from_so3(&so3_analysis(&grid, &values, channels)?)
                }
            };
            file.write(output).with_context(|| format!("writing {}", output.display()))?;
        }
        Direction::Synthesis => {
            let file = SignalFile::read(input).with_context(|| format!("reading {}", input.display()))?;
            let l = bandlimit.unwrap_or(file.bandlimit);
            if l < file.bandlimit {
                bail!("grid bandlimit {l} is below the signal bandlimit {}", file.bandlimit);
            }
            match file.kind.as_str() {
                "s2" => {
                    let spec = file.to_s2()?.with_bandlimit(l);
                    let grid = S2Grid::new(l);
                    let coords: Vec<Vec<f64>> = (0..grid.len()).map(|i| {
                        let (t, p) = grid.node(i);
                        vec![t, p]
                    }).collect();
                    let vals = s2_synthesis(&spec, &grid)?;
                    write_samples_csv(output, SampleKind::S2, &coords, &vals, spec.channels)?;
                }
                "so3" => {
                    let spec = file.to_so3()?.with_bandlimit(l);
                    let grid = SO3Grid::new(l);
                    let coords: Vec<Vec<f64>> = (0..grid.len()).map(|i| {
                        let g = grid.node(i);
                        vec![g.alpha, g.beta, g.gamma]
                    }).collect();
                    let vals = so3_synthesis(&spec, &grid)?;
                    write_samples_csv(output, SampleKind::SO3, &coords, &vals, spec.channels)?;
                }
                k => bail!("unknown signal kind {k:?}"),
            }
        }
    }
    Ok(())
}

fn check_nodes(coords: &[Vec<f64>], nodes: &[Vec<f64>], l: usize) -> Result<()> {
    if coords.len() != nodes.len() {
        bail!("bandlimit {l} expects {} grid nodes, the file has {}", nodes.len(), coords.len());
    }
    for (i, (a, b)) in coords.iter().zip(nodes).enumerate() {
        if a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-9) {
            bail!("row {} is not at grid node {i} of bandlimit {l}", i + 2);
        }
    }
    Ok(())
}

fn check(
    filter: Option<String>,
    bandlimit: usize,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
    mutate: Option<Mutation>,
    list: bool,
) -> Result<()> {
    let registry = CheckRegistry::default();
    if list {
        for c in registry.select(filter.as_deref()) {
            println!("{}", c.name());
        }
        return Ok(());
    }
    let ctx = AuditContext {
        bandlimit,
        seed,
        cs_phase: !matches!(mutate, Some(Mutation::CsPhase)),
    };
    let report = run_audit(&registry, &ctx, filter.as_deref());
    if report.summary.total == 0 {
        bail!("no checks match filter {:?}", filter.unwrap_or_default());
    }
    let text = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    match out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    for e in report.failures() {
        eprintln!("FAIL {} residual {:?} tolerance {:e}", e.name, e.residual, e.tolerance);
    }
    eprintln!(
        "{} checks, {} passed, {} failed",
        report.summary.total, report.summary.passed, report.summary.failed
    );
    if report.all_passed() {
        Ok(())
    } else {
        Err(ChecksFailed.into())
    }
}

fn kernels(
    lambda: usize,
    theta: usize,
    side: usize,
    spacing: f64,
    shells: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    if lambda > 4 || theta > 4 {
        bail!("degrees above 4 are not supported");
    }
    if side % 2 == 0 || side < 3 {
        bail!("--side must be odd and at least 3");
    }
    let mut r = rng::seeded(seed);
    let export = export_basis(lambda, theta, side, spacing, shells, &mut r)?;
    std::fs::write(out, serde_json::to_string(&export)?).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}",
        serde_json::json!({
            "angular_elements": export.angular_elements,
            "elements": export.elements.len(),
            "j_list": export.j_list,
            "continuous_residual": export.continuous_residual,
            "lattice_residual": export.lattice_residual,
        })
    );
    if export.continuous_residual > 1e-9 || export.lattice_residual > 1e-6 {
        return Err(ChecksFailed.into());
    }
    Ok(())
}

fn mesh(
    input: Option<PathBuf>,
    builtin: Builtin,
    vertices: usize,
    seed: u64,
    m: i64,
    features: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut r = rng::seeded(seed);
    let mesh = match (&input, builtin) {
        (Some(p), _) => TriMesh::read(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Builtin::Icosahedron) => TriMesh::icosahedron(),
        (None, Builtin::Sphere) => TriMesh::random_sphere(vertices, &mut r)?,
    };
    let atlas = build_atlas(&mesh)?;
    let f = match &features {
        Some(p) => MeshFeature::read(p).with_context(|| format!("reading {}", p.display()))?,
        None => MeshFeature::random(&mut r, 0, mesh.vertices.len()),
    };
    let kernel = CircularHarmonic::new(
        m,
        RadialProfile::Gaussian {
            center: 0.3,
            sigma: 0.4,
        },
        0.0,
    );
    let conv = harmonic_conv(&atlas, &kernel, &f)?;
    if let Some(p) = &out {
        conv.write(p).with_context(|| format!("writing {}", p.display()))?;
    }
    let harmonic = harmonic_gauge_audit(&mesh, &atlas, &mut r, 20)?;
    let gem = gem_gauge_audit(&mesh, &atlas, &mut r, 20)?;
    let pass = harmonic <= 1e-10 && gem <= 1e-10;
    println!(
        "{}",
        serde_json::json!({
            "vertices": mesh.vertices.len(),
            "faces": mesh.faces.len(),
            "output_order": conv.order,
            "harmonic_gauge_residual": harmonic,
            "gem_gauge_residual": gem,
            "tolerance": 1e-10,
            "pass": pass,
        })
    );
    if pass {
        Ok(())
    } else {
        Err(ChecksFailed.into())
    }
}
