//! Structural invariants of the step solver: reflection symmetry on
//! symmetric meshes and interface-tracking refinement.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::Arc;

use chsweep_core::adapt::{adaptive_cycle, MarkParams};
use chsweep_core::chstep::{
    initial_phase_field, newton_solve, NewtonConfig, SolveStatus, SphereProfile, StepProblem,
};
use chsweep_core::mesh::unit_square_mesh;
use chsweep_core::penalty::{PenaltyPower, PenaltyScheme};
use chsweep_core::P1Function;

#[test]
fn solution_inherits_the_reflection_symmetries_of_the_data() {
    // Uniform symmetric mesh (even n0), radially symmetric initial state:
    // the discrete solution must be invariant under the four reflections of
    // the square up to solver roundoff.
    let mesh = Arc::new(unit_square_mesh(NonZeroUsize::new(8).unwrap()));
    let eps = 0.1;
    let phi_prev = initial_phase_field(&mesh, eps, [0.5, 0.5], 0.25);
    let p = StepProblem::new(
        eps,
        0.01,
        1e3,
        PenaltyPower::K2,
        PenaltyScheme::Lumped,
        phi_prev.clone(),
    )
    .unwrap();
    let zero = P1Function::zeros(&mesh);
    let sol = newton_solve(&p, (&phi_prev, &zero), &NewtonConfig::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Converged);

    let key = |x: f64, y: f64| ((x * 1e9).round() as i64, (y * 1e9).round() as i64);
    let index: HashMap<(i64, i64), usize> = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| (key(v[0], v[1]), i))
        .collect();
    let reflections: [fn(f64, f64) -> (f64, f64); 4] = [
        |x, y| (1.0 - x, y),
        |x, y| (x, 1.0 - y),
        |x, y| (y, x),
        |x, y| (1.0 - y, 1.0 - x),
    ];
    for (i, v) in mesh.vertices().iter().enumerate() {
        for reflect in reflections {
            let (rx, ry) = reflect(v[0], v[1]);
            let j = index[&key(rx, ry)];
            let diff = (sol.phi.values()[i] - sol.phi.values()[j]).abs();
            assert!(diff <= 1e-8, "phi asymmetry {diff} at vertex {i}");
            let diff_mu = (sol.mu.values()[i] - sol.mu.values()[j]).abs();
            assert!(diff_mu <= 1e-6, "mu asymmetry {diff_mu} at vertex {i}");
        }
    }
}

#[test]
fn adaptive_refinement_concentrates_on_the_interface() {
    let eps = 0.04;
    let mesh = Arc::new(unit_square_mesh(NonZeroUsize::new(8).unwrap()));
    let profile = SphereProfile {
        eps,
        center: [0.5, 0.5],
        radius: 0.25,
    };
    let p = StepProblem::new(
        eps,
        0.01,
        1e3,
        PenaltyPower::K2,
        PenaltyScheme::Lumped,
        profile.field(&mesh),
    )
    .unwrap();
    let out = adaptive_cycle(
        &p,
        &profile,
        3,
        &MarkParams::new(0.5),
        &NewtonConfig::default(),
        None,
    )
    .unwrap();
    let fine = out.mesh();
    assert!(fine.num_cells() > mesh.num_cells());

    // A cell counts as interface-touching when any vertex lies in the band
    // |dist - r| <= pi*eps where the transition profile lives.
    let band = std::f64::consts::PI * eps;
    let in_band = |v: [f64; 2]| {
        let d = ((v[0] - 0.5f64).powi(2) + (v[1] - 0.5f64).powi(2)).sqrt();
        (d - 0.25).abs() <= band
    };
    let touching = fine
        .cells()
        .iter()
        .filter(|idx| idx.iter().any(|&v| in_band(fine.vertices()[v])))
        .count();
    let fraction = touching as f64 / fine.num_cells() as f64;
    assert!(
        fraction >= 0.6,
        "only {:.0}% of cells touch the interface band",
        100.0 * fraction
    );
}
