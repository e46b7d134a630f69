//! One line per acceptance criterion; fails at the end if any line is FAIL.

use equivar::audit::{run_audit, AuditContext, CheckRegistry};
use std::process::Command;
use std::time::{Duration, Instant};

struct Line {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

/// Runs the named checks at the default context under a time budget.
fn criterion(id: usize, title: &'static str, names: &[&str], budget: Duration) -> Line {
    let all = CheckRegistry::default();
    let mut reg = CheckRegistry::empty();
    for n in names {
        reg.register(all.get(n).unwrap_or_else(|e| panic!("{e}")));
    }
    let start = Instant::now();
    let report = run_audit(&reg, &AuditContext::default(), None);
    let elapsed = start.elapsed();
    let mut detail: Vec<String> = report
        .checks
        .iter()
        .map(|e| match (&e.residual, &e.error) {
            (Some(r), _) => format!("{}={r:.2e}/{:.0e}", e.name, e.tolerance),
            (None, err) => format!("{}=error({})", e.name, err.clone().unwrap_or_default()),
        })
        .collect();
    detail.push(format!("{:.1}s/{}s", elapsed.as_secs_f64(), budget.as_secs()));
    Line {
        id,
        title,
        pass: report.all_passed() && report.checks.len() == names.len() && elapsed < budget,
        detail: detail.join(" "),
    }
}

fn cli_criterion() -> Line {
    let bin = env!("CARGO_BIN_EXE_equivar");
    let clean = Command::new(bin).arg("check").output().expect("spawn");
    let mutated = Command::new(bin).args(["check", "--mutate", "cs-phase"]).output().expect("spawn");
    let named: Vec<String> = String::from_utf8_lossy(&mutated.stderr)
        .lines()
        .filter_map(|l| l.strip_prefix("FAIL ").and_then(|r| r.split_whitespace().next()).map(String::from))
        .collect();
    let pass = clean.status.code() == Some(0) && mutated.status.code() == Some(1) && named.len() >= 3;
    Line {
        id: 11,
        title: "cli check exit codes",
        pass,
        detail: format!(
            "clean exit {:?}, mutated exit {:?}, failures [{}]",
            clean.status.code(),
            mutated.status.code(),
            named.join(", ")
        ),
    }
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let lines = vec![
        criterion(
            1,
            "harmonics identities",
            &[
                "harmonics.wigner_unitarity",
                "harmonics.wigner_homomorphism",
                "harmonics.wigner_conjugation",
                "harmonics.harmonic_conjugation",
                "harmonics.rotation_rule",
                "harmonics.cg_orthogonality",
                "harmonics.product_decomposition",
            ],
            s(30),
        ),
        criterion(
            2,
            "transform round trips",
            &["grids.s2_round_trip", "grids.so3_round_trip", "grids.parseval_s2", "grids.parseval_so3"],
            s(60),
        ),
        criterion(
            3,
            "convolution oracles",
            &[
                "spectral_conv.s2_scalar.oracle",
                "spectral_conv.so3_scalar.oracle",
                "spectral_conv.s2_general.oracle",
                "spectral_conv.so3_general.oracle",
            ],
            s(300),
        ),
        criterion(4, "irrep equals general", &["spectral_conv.irrep_vs_general"], s(300)),
        criterion(
            5,
            "equivariance audits",
            &[
                "spectral_conv.s2_scalar.equivariance",
                "spectral_conv.so3_scalar.equivariance",
                "spectral_conv.s2_general.equivariance",
                "spectral_conv.so3_general.equivariance",
                "spectral_conv.s2_irrep.equivariance",
                "spectral_conv.so3_irrep.equivariance",
                "gcnn_discrete.z2_equivariance",
                "gcnn_discrete.p4_equivariance",
            ],
            s(300),
        ),
        criterion(6, "kernel recovery", &["gcnn_discrete.kernel_recovery"], s(60)),
        criterion(
            7,
            "intensity pair",
            &["repr.intensity_pointwise", "repr.intensity_convolution_control"],
            s(60),
        ),
        criterion(
            8,
            "steerable kernels",
            &[
                "steerable_kernels.continuous_constraint",
                "steerable_kernels.lattice_constraint",
                "steerable_kernels.random_kernel_control",
                "steerable_kernels.refinement_monotone",
            ],
            s(120),
        ),
        criterion(
            9,
            "vector field nonlinearity",
            &["nonlin.vector_field_equivariance", "nonlin.vector_field_ties"],
            s(60),
        ),
        criterion(
            10,
            "mesh gauge audit",
            &[
                "gauge_mesh.harmonic_icosahedron",
                "gauge_mesh.harmonic_sphere",
                "gauge_mesh.gem_icosahedron",
                "gauge_mesh.gem_sphere",
            ],
            s(60),
        ),
        cli_criterion(),
    ];
    for l in &lines {
        println!(
            "criterion {:>2} {} {}: {}",
            l.id,
            if l.pass { "PASS" } else { "FAIL" },
            l.title,
            l.detail
        );
    }
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
