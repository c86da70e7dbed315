//! End-to-end checks of the sweep harness on small configurations.

use chsweep_core::penalty::PenaltyScheme;
use chsweep_core::sweep::{self, SweepConfig};
use chsweep_core::SolveStatus;

fn tiny_config() -> SweepConfig {
    let mut cfg = SweepConfig::default();
    cfg.eps = 0.1;
    cfg.n0 = 4;
    cfg.cycles = 1;
    cfg.s_explicit = Some(vec![1e2, 1e3]);
    cfg
}

#[test]
fn single_s_lumped_produces_one_converged_record() {
    let mut cfg = tiny_config();
    cfg.s_explicit = Some(vec![1e3]);
    let records = sweep::run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert_eq!(r.status, SolveStatus::Converged);
    assert_eq!(r.scheme, PenaltyScheme::Lumped);
    assert!(r.linf.unwrap() > 0.0);
    assert!(r.l1.unwrap() > 0.0);
    assert!(r.mass_error.unwrap() <= 1e-8);
}

#[test]
fn sweep_is_deterministic_apart_from_wall_time() {
    let cfg = tiny_config();
    let a = sweep::run_sweep(&cfg).unwrap();
    let b = sweep::run_sweep(&cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra.s, rb.s);
        assert_eq!(ra.dofs, rb.dofs);
        assert_eq!(ra.cells, rb.cells);
        assert_eq!(ra.newton_iterations, rb.newton_iterations);
        assert_eq!(ra.status, rb.status);
        assert_eq!(ra.linf, rb.linf);
        assert_eq!(ra.l1, rb.l1);
        assert_eq!(ra.structural_k, rb.structural_k);
        assert_eq!(ra.h1_phi, rb.h1_phi);
        assert_eq!(ra.h1_mu, rb.h1_mu);
        assert_eq!(ra.mass_error, rb.mass_error);
    }
}

#[test]
fn violation_decreases_with_s_and_mesh_is_reused() {
    let mut cfg = tiny_config();
    cfg.s_explicit = Some(vec![1e2, 1e3, 1e4]);
    let records = sweep::run_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r.converged()));
    for w in records.windows(2) {
        assert!(w[1].linf.unwrap() <= w[0].linf.unwrap() * 1.05);
        // Mesh reuse: refinement only ever grows the mesh along the sweep.
        assert!(w[1].cells >= w[0].cells);
    }
}

#[test]
fn outputs_are_written_and_consistent() {
    let dir = std::env::temp_dir().join(format!("chsweep-smoke-{}", std::process::id()));
    let mut cfg = tiny_config();
    cfg.out_dir = dir.clone();
    let records = sweep::run_sweep(&cfg).unwrap();
    sweep::write_outputs(&cfg, &records).unwrap();
    let csv = std::fs::read_to_string(dir.join("records.csv")).unwrap();
    assert!(csv.starts_with(sweep::CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + records.len());
    let plot = std::fs::read_to_string(dir.join("plot.gp")).unwrap();
    assert!(plot.contains("records.csv"));
    let slopes = std::fs::read_to_string(dir.join("slopes.txt")).unwrap();
    assert!(slopes.contains("metric=linf"));
    std::fs::remove_dir_all(&dir).ok();
}

