//! Residual-type error estimation from gradient jumps across edges, Doerfler
//! marking, and the solve-estimate-mark-refine cycle.

use std::sync::Arc;

use thiserror::Error;

use crate::chstep::{
    newton_solve, NewtonConfig, SolveStatus, SphereProfile, StepError, StepProblem, StepSolution,
};
use crate::fem::P1Function;
use crate::mesh::{refine, MarkedSet, Mesh, MeshError};

/// Per-cell squared error indicators.
#[derive(Clone, Debug)]
pub struct IndicatorField {
    eta_sq: Vec<f64>,
}

impl IndicatorField {
    pub fn new(eta_sq: Vec<f64>) -> Self {
        assert!(
            eta_sq.iter().all(|v| v.is_finite() && *v >= 0.0),
            "indicators must be finite and nonnegative"
        );
        IndicatorField { eta_sq }
    }

    /// Squared indicator of each cell.
    pub fn squared(&self) -> &[f64] {
        &self.eta_sq
    }

    pub fn len(&self) -> usize {
        self.eta_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta_sq.is_empty()
    }

    pub fn total_squared(&self) -> f64 {
        self.eta_sq.iter().sum()
    }
}

/// Doerfler marking parameters.
#[derive(Clone, Copy, Debug)]
pub struct MarkParams {
    /// Fraction of the total squared indicator the marked set must carry,
    /// strictly between 0 and 1.
    pub theta: f64,
}

impl MarkParams {
    pub fn new(theta: f64) -> Self {
        assert!(theta > 0.0 && theta < 1.0, "theta must lie in (0, 1)");
        MarkParams { theta }
    }
}

/// Edge-jump error indicators for the pair (phi, mu).
///
/// Interior edges contribute the squared jump of the normal derivative times
/// h_E^2, weighted eps^2 for phi and tau^2 for mu and shared evenly by the
/// two incident cells. Boundary edges carry the homogeneous-Neumann residual
/// (the flux itself against zero) with full weight on their single cell.
pub fn estimate(
    mesh: &Mesh,
    phi: &P1Function,
    mu: &P1Function,
    eps: f64,
    tau: f64,
) -> IndicatorField {
    let n_cells = mesh.num_cells();
    let grad_phi: Vec<[f64; 2]> = (0..n_cells)
        .map(|c| mesh.cell_gradient(c, phi.values()).expect("valid mesh"))
        .collect();
    let grad_mu: Vec<[f64; 2]> = (0..n_cells)
        .map(|c| mesh.cell_gradient(c, mu.values()).expect("valid mesh"))
        .collect();
    let mut eta_sq = vec![0.0; n_cells];
    for edge in mesh.edges() {
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        let tangent = [b[0] - a[0], b[1] - a[1]];
        let h = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        let normal = [tangent[1] / h, -tangent[0] / h];
        match edge.cells {
            [Some(c0), Some(c1)] => {
                let jump_phi = (grad_phi[c0][0] - grad_phi[c1][0]) * normal[0]
                    + (grad_phi[c0][1] - grad_phi[c1][1]) * normal[1];
                let jump_mu = (grad_mu[c0][0] - grad_mu[c1][0]) * normal[0]
                    + (grad_mu[c0][1] - grad_mu[c1][1]) * normal[1];
                let contrib =
                    (eps * eps * jump_phi * jump_phi + tau * tau * jump_mu * jump_mu) * h * h;
                eta_sq[c0] += 0.5 * contrib;
                eta_sq[c1] += 0.5 * contrib;
            }
            [Some(c0), None] => {
                let flux_phi = grad_phi[c0][0] * normal[0] + grad_phi[c0][1] * normal[1];
                let flux_mu = grad_mu[c0][0] * normal[0] + grad_mu[c0][1] * normal[1];
                eta_sq[c0] +=
                    (eps * eps * flux_phi * flux_phi + tau * tau * flux_mu * flux_mu) * h * h;
            }
            _ => unreachable!("edge without incident cell"),
        }
    }
    IndicatorField::new(eta_sq)
}

/// Greedy Doerfler marking: the smallest set of cells (by count) whose
/// squared indicators reach the fraction `theta` of the total, ties broken
/// by ascending cell index. An all-zero field yields the empty set.
pub fn doerfler_mark(eta: &IndicatorField, params: &MarkParams) -> MarkedSet {
    let total = eta.total_squared();
    if total <= 0.0 {
        return MarkedSet::default();
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| {
        eta.squared()[b]
            .partial_cmp(&eta.squared()[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let target = params.theta * total;
    let mut acc = 0.0;
    let mut chosen = Vec::new();
    for c in order {
        chosen.push(c);
        acc += eta.squared()[c];
        if acc >= target {
            break;
        }
    }
    MarkedSet::new(chosen)
}

/// Diagnostics of one solve-estimate-mark-refine round.
#[derive(Clone, Copy, Debug)]
pub struct CycleInfo {
    pub cells: usize,
    pub dofs: usize,
    pub newton_iterations: usize,
    pub estimator: f64,
    pub marked: usize,
}

/// Result of the adaptive cycle: the problem re-anchored on the final mesh,
/// the final solution, and per-cycle diagnostics.
#[derive(Clone, Debug)]
pub struct AdaptiveOutcome {
    pub problem: StepProblem,
    pub solution: StepSolution,
    pub cycles: Vec<CycleInfo>,
}

impl AdaptiveOutcome {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.problem.mesh()
    }
}

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("newton did not converge at cycle {cycle} ({status:?} after {iterations} iterations)")]
    NewtonFailed {
        cycle: usize,
        status: SolveStatus,
        iterations: usize,
        /// Problem (and with it the mesh) on which the failure occurred.
        problem: Box<StepProblem>,
        solution: Box<StepSolution>,
    },
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Run `cycles` rounds of solve-estimate-mark-refine and one final solve.
///
/// The previous phase field is re-evaluated analytically on every refined
/// mesh, while Newton warm starts are transported by linear prolongation of
/// the previous solution. An empty marked set leaves the mesh unchanged and
/// turns the remaining rounds into plain re-solves.
pub fn adaptive_cycle(
    base: &StepProblem,
    profile: &SphereProfile,
    cycles: usize,
    mark: &MarkParams,
    newton: &NewtonConfig,
    warm: Option<(P1Function, P1Function)>,
) -> Result<AdaptiveOutcome, AdaptiveError> {
    assert!(cycles >= 1, "at least one cycle required");
    let mut problem = base.clone();
    let (mut phi_guess, mut mu_guess) = match warm {
        Some((phi, mu)) => (phi, mu),
        None => (base.phi_prev.clone(), P1Function::zeros(base.mesh())),
    };
    let mut infos = Vec::with_capacity(cycles);

    let fail = |cycle: usize, problem: StepProblem, solution: StepSolution| {
        AdaptiveError::NewtonFailed {
            cycle,
            status: solution.status,
            iterations: solution.iterations,
            problem: Box::new(problem),
            solution: Box::new(solution),
        }
    };

    for cycle in 0..cycles {
        let solution = newton_solve(&problem, (&phi_guess, &mu_guess), newton)?;
        if solution.status != SolveStatus::Converged {
            return Err(fail(cycle, problem, solution));
        }
        let eta = estimate(
            problem.mesh(),
            &solution.phi,
            &solution.mu,
            problem.eps,
            problem.tau,
        );
        let marked = doerfler_mark(&eta, mark);
        infos.push(CycleInfo {
            cells: problem.mesh().num_cells(),
            dofs: problem.mesh().num_vertices(),
            newton_iterations: solution.iterations,
            estimator: eta.total_squared().sqrt(),
            marked: marked.len(),
        });
        if marked.is_empty() {
            phi_guess = solution.phi;
            mu_guess = solution.mu;
            continue;
        }
        let (fine, prolongation) = refine(problem.mesh(), &marked)?;
        let fine = Arc::new(fine);
        phi_guess = P1Function::new(fine.clone(), prolongation.prolong(solution.phi.values()));
        mu_guess = P1Function::new(fine.clone(), prolongation.prolong(solution.mu.values()));
        problem = StepProblem {
            phi_prev: profile.field(&fine),
            ..problem
        };
    }

    let solution = newton_solve(&problem, (&phi_guess, &mu_guess), newton)?;
    if solution.status != SolveStatus::Converged {
        return Err(fail(cycles, problem, solution));
    }
    Ok(AdaptiveOutcome {
        problem,
        solution,
        cycles: infos,
    })
}
