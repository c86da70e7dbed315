//! Shared fixtures for the criterion benchmarks.

use std::num::NonZeroUsize;
use std::sync::Arc;

use chsweep_core::adapt::{adaptive_cycle, MarkParams};
use chsweep_core::chstep::{NewtonConfig, SphereProfile, StepProblem};
use chsweep_core::mesh::{unit_square_mesh, Mesh};
use chsweep_core::penalty::{PenaltyPower, PenaltyScheme};
use chsweep_core::P1Function;

pub const EPS: f64 = 0.04;
pub const TAU: f64 = 0.01;

pub fn profile() -> SphereProfile {
    SphereProfile {
        eps: EPS,
        center: [0.5, 0.5],
        radius: 0.25,
    }
}

/// Interface-adapted mesh with a solution on it, produced by a short
/// continuation run of the adaptive solver (s ascending with warm starts,
/// exactly like the sweep); the benchmarks then measure single operations on
/// a realistic mesh instead of a structured one.
pub fn adapted_state(s_target: f64) -> (Arc<Mesh>, P1Function, P1Function) {
    let mut mesh = Arc::new(unit_square_mesh(NonZeroUsize::new(8).unwrap()));
    let profile = profile();
    let mut warm: Option<(P1Function, P1Function)> = None;
    let mut s: f64 = 1e2;
    loop {
        let s_run = s.min(s_target);
        let problem = StepProblem::new(
            EPS,
            TAU,
            s_run,
            PenaltyPower::K2,
            PenaltyScheme::Lumped,
            profile.field(&mesh),
        )
        .unwrap();
        let out = adaptive_cycle(
            &problem,
            &profile,
            3,
            &MarkParams::new(0.5),
            &NewtonConfig::default(),
            warm.take(),
        )
        .unwrap();
        mesh = out.mesh().clone();
        if s_run >= s_target {
            return (mesh, out.solution.phi, out.solution.mu);
        }
        warm = Some((out.solution.phi, out.solution.mu));
        s *= 10.0;
    }
}

pub fn step_problem_on(mesh: &Arc<Mesh>, s: f64, scheme: PenaltyScheme) -> StepProblem {
    StepProblem::new(EPS, TAU, s, PenaltyPower::K2, scheme, profile().field(mesh)).unwrap()
}
