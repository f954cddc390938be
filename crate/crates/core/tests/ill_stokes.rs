//! Qualitative α-trend on an externally supplied ill-conditioned Stokes
//! matrix. Set `SHIFTSPLIT_ILL_STOKES=path,n,m` to run it; skipped otherwise.

use shiftsplit::bench::{sweep_alpha, AlphaMode, ExperimentConfig, Problem};
use shiftsplit::precond::PrecondKind;

#[test]
fn ss_iterations_fall_as_alpha_shrinks() {
    let Ok(spec) = std::env::var("SHIFTSPLIT_ILL_STOKES") else {
        eprintln!("SHIFTSPLIT_ILL_STOKES not set, skipping");
        return;
    };
    let parts: Vec<&str> = spec.split(',').collect();
    assert_eq!(parts.len(), 3, "expected path,n,m");
    let problem = Problem::External {
        path: parts[0].into(),
        n: parts[1].parse().unwrap(),
        m: parts[2].parse().unwrap(),
    };
    let cfg = ExperimentConfig::new(
        problem,
        Some(PrecondKind::Ss),
        AlphaMode::Sweep(vec![0.1, 0.01, 0.001, 0.0001]),
    );
    let rows = sweep_alpha(&cfg).unwrap();
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    assert!(last.converged);
    assert!(
        !first.converged || last.iters < first.iters,
        "iterations at α=1e-4 ({}) not below α=0.1 ({})",
        last.iters,
        first.iters
    );
}
