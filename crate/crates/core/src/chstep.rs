//! One implicit time step of the penalised Cahn-Hilliard system, solved by a
//! semismooth Newton method, and the violation metrics taken on the result.
//!
//! With mass matrix M, stiffness K and penalty load P the nonlinear residual
//! in the unknowns (phi, mu) reads
//!
//!   F1 = M phi + tau K mu - M phi_prev
//!   F2 = eps K phi + eps^-1 P(phi) - eps^-1 M phi_prev - M mu
//!
//! and the Newton matrix is [[M, tau K], [eps K + eps^-1 P', -M]]. The linear
//! systems are solved by a sparse direct LU factorization.

use std::sync::Arc;

use thiserror::Error;

use crate::fem::{assemble_mass, assemble_stiffness, P1Function, SparseMatrix};
use crate::mesh::Mesh;
use crate::penalty::{self, PenaltyError, PenaltyPower, PenaltyScheme};

#[derive(Debug, Error)]
pub enum StepError {
    #[error("eps and tau must be positive, s nonnegative (eps={eps}, tau={tau}, s={s})")]
    InvalidParameters { eps: f64, tau: f64, s: f64 },
    #[error("functions live on different mesh instances")]
    MeshMismatch,
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
}

#[derive(Debug, Error)]
pub enum LinearSolveError {
    #[error("matrix is {nrows}x{ncols}, rhs has length {rhs}")]
    ShapeMismatch {
        nrows: usize,
        ncols: usize,
        rhs: usize,
    },
    #[error("sparse LU factorization failed: {0}")]
    Factorization(String),
    #[error("numerically singular system: residual {achieved:.3e} exceeds {bound:.3e}")]
    ResidualContract { achieved: f64, bound: f64 },
    #[error("solution contains non-finite entries")]
    NonFinite,
}

/// Parameters of one relaxed time step.
///
/// `s = 0` switches the penalty off entirely, which makes the system linear;
/// useful as a diagnostic even though sweeps always run with s > 0.
#[derive(Clone, Debug)]
pub struct StepProblem {
    pub eps: f64,
    pub tau: f64,
    pub s: f64,
    pub k: PenaltyPower,
    pub scheme: PenaltyScheme,
    pub phi_prev: P1Function,
}

impl StepProblem {
    pub fn new(
        eps: f64,
        tau: f64,
        s: f64,
        k: PenaltyPower,
        scheme: PenaltyScheme,
        phi_prev: P1Function,
    ) -> Result<Self, StepError> {
        if !(eps > 0.0) || !(tau > 0.0) || !(s >= 0.0) {
            return Err(StepError::InvalidParameters { eps, tau, s });
        }
        scheme.check_compatible(k)?;
        Ok(StepProblem {
            eps,
            tau,
            s,
            k,
            scheme,
            phi_prev,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.phi_prev.mesh()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverged,
    MaxIterations,
}

/// Newton iteration controls. Defaults follow the solver contract: max-norm
/// residual, absolute tolerance 1e-10, relative 1e-12, at most 50 steps, no
/// damping, divergence declared at 1e4-fold residual growth.
#[derive(Clone, Copy, Debug)]
pub struct NewtonConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub divergence_growth: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_iterations: 50,
            damping: 1.0,
            divergence_growth: 1e4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepSolution {
    pub phi: P1Function,
    pub mu: P1Function,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Failure detail when the status is not `Converged`.
    pub diagnostic: Option<String>,
}

/// Violation metrics of a converged step.
#[derive(Clone, Copy, Debug)]
pub struct ViolationReport {
    /// max |lambda(phi)| over the domain (attained at a vertex).
    pub linf: f64,
    /// Exact integral of |lambda(phi_h)|.
    pub l1: f64,
    /// |(phi - phi_prev, 1)|: mass defect of the step.
    pub mass_error: f64,
    /// Empirical structural constant: max over sampled balls of
    /// s * integral_{B_R} |lambda| / R^2.
    pub structural_k: f64,
}

/// Radii used for the structural-constant samples.
pub const STRUCTURAL_RADII: [f64; 3] = [0.05, 0.1, 0.2];

/// Centers used for the structural-constant samples: a 5x5 interior lattice.
pub fn structural_centers() -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(25);
    for j in 1..=5 {
        for i in 1..=5 {
            centers.push([i as f64 / 6.0, j as f64 / 6.0]);
        }
    }
    centers
}

/// Sinusoidal circular interface profile used as the initial phase field.
#[derive(Clone, Copy, Debug)]
pub struct SphereProfile {
    pub eps: f64,
    pub center: [f64; 2],
    pub radius: f64,
}

impl SphereProfile {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        let dist = ((x - self.center[0]).powi(2) + (y - self.center[1]).powi(2)).sqrt();
        let z = (dist - self.radius) / self.eps;
        if z >= std::f64::consts::FRAC_PI_2 {
            1.0
        } else if z <= -std::f64::consts::FRAC_PI_2 {
            -1.0
        } else {
            z.sin()
        }
    }

    pub fn field(&self, mesh: &Arc<Mesh>) -> P1Function {
        P1Function::from_fn(mesh, |x, y| self.value(x, y))
    }
}

/// Nodal interpolation of the circular interface profile; values lie in
/// [-1, 1], with -1 inside the circle and +1 far outside.
pub fn initial_phase_field(
    mesh: &Arc<Mesh>,
    eps: f64,
    center: [f64; 2],
    radius: f64,
) -> P1Function {
    assert!(eps > 0.0, "eps must be positive");
    assert!(radius > 0.0 && radius < 0.5, "radius must be in (0, 0.5)");
    SphereProfile {
        eps,
        center,
        radius,
    }
    .field(mesh)
}

/// Assembled operators of one mesh, shared by all Newton iterations.
struct Operators {
    mass: SparseMatrix,
    stiffness: SparseMatrix,
}

impl Operators {
    fn assemble(mesh: &Mesh) -> Self {
        Operators {
            mass: assemble_mass(mesh),
            stiffness: assemble_stiffness(mesh),
        }
    }
}

fn residual_with(
    ops: &Operators,
    p: &StepProblem,
    phi: &P1Function,
    mu: &P1Function,
) -> Result<Vec<f64>, PenaltyError> {
    let n = phi.values().len();
    let m_phi = ops.mass.matvec(phi.values());
    let m_mu = ops.mass.matvec(mu.values());
    let m_prev = ops.mass.matvec(p.phi_prev.values());
    let k_phi = ops.stiffness.matvec(phi.values());
    let k_mu = ops.stiffness.matvec(mu.values());
    let pen = penalty::assemble_penalty_vector(phi, p.s, p.k, p.scheme)?;
    let inv_eps = 1.0 / p.eps;
    let mut f = vec![0.0; 2 * n];
    for i in 0..n {
        f[i] = m_phi[i] + p.tau * k_mu[i] - m_prev[i];
        f[n + i] = p.eps * k_phi[i] + inv_eps * pen[i] - inv_eps * m_prev[i] - m_mu[i];
    }
    Ok(f)
}

fn jacobian_with(
    ops: &Operators,
    p: &StepProblem,
    phi: &P1Function,
) -> Result<SparseMatrix, PenaltyError> {
    let n = phi.values().len();
    let pen_jac = penalty::assemble_penalty_jacobian(phi, p.s, p.k, p.scheme)?;
    let inv_eps = 1.0 / p.eps;
    let mut triplets =
        Vec::with_capacity(2 * ops.mass.nnz() + 2 * ops.stiffness.nnz() + pen_jac.nnz());
    for (i, j, v) in ops.mass.iter() {
        triplets.push((i, j, v));
        triplets.push((n + i, n + j, -v));
    }
    for (i, j, v) in ops.stiffness.iter() {
        triplets.push((i, n + j, p.tau * v));
        triplets.push((n + i, j, p.eps * v));
    }
    for (i, j, v) in pen_jac.iter() {
        triplets.push((n + i, j, inv_eps * v));
    }
    Ok(SparseMatrix::from_triplets(2 * n, 2 * n, &triplets))
}

fn check_same_mesh(p: &StepProblem, f: &P1Function) -> Result<(), StepError> {
    if f.same_mesh(&p.phi_prev) {
        Ok(())
    } else {
        Err(StepError::MeshMismatch)
    }
}

/// Nonlinear residual F = [F1; F2] of the step equations at (phi, mu).
pub fn residual(p: &StepProblem, phi: &P1Function, mu: &P1Function) -> Result<Vec<f64>, StepError> {
    check_same_mesh(p, phi)?;
    check_same_mesh(p, mu)?;
    let ops = Operators::assemble(p.mesh());
    Ok(residual_with(&ops, p, phi, mu)?)
}

/// Newton matrix [[M, tau K], [eps K + eps^-1 P'(phi), -M]] as one sparse
/// 2N x 2N matrix.
pub fn jacobian(p: &StepProblem, phi: &P1Function) -> Result<SparseMatrix, StepError> {
    check_same_mesh(p, phi)?;
    let ops = Operators::assemble(p.mesh());
    Ok(jacobian_with(&ops, p, phi)?)
}

/// Direct sparse solve of A x = b (LU with pivoting). The result honours the
/// residual contract ||Ax - b||_inf <= 1e-9 (||A||_max ||x||_inf + ||b||_inf)
/// or an error is returned.
pub fn linear_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    use faer::prelude::Solve;
    use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
    use faer::sparse::{SparseColMat, Triplet};

    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinearSolveError::ShapeMismatch {
            nrows: a.nrows(),
            ncols: a.ncols(),
            rhs: b.len(),
        });
    }
    let triplets: Vec<Triplet<usize, usize, f64>> =
        a.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
    let symbolic = SymbolicLu::try_new(mat.symbolic())
        .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
        .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
    let rhs = faer::Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let sol = lu.solve(&rhs);
    let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if !x.iter().all(|v| v.is_finite()) {
        return Err(LinearSolveError::NonFinite);
    }
    let ax = a.matvec(&x);
    let achieved = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0f64, f64::max);
    let x_inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_inf = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = 1e-9 * (a.max_abs() * x_inf + b_inf);
    if achieved > bound {
        return Err(LinearSolveError::ResidualContract { achieved, bound });
    }
    Ok(x)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solve the step equations by a semismooth Newton iteration from the given
/// initial guess. Divergence and stagnation are reported in the status, not
/// as errors; `Err` is reserved for structurally invalid inputs.
pub fn newton_solve(
    p: &StepProblem,
    guess: (&P1Function, &P1Function),
    config: &NewtonConfig,
) -> Result<StepSolution, StepError> {
    check_same_mesh(p, guess.0)?;
    check_same_mesh(p, guess.1)?;
    let mesh = p.mesh().clone();
    let n = mesh.num_vertices();
    let ops = Operators::assemble(&mesh);

    let mut phi = guess.0.clone();
    let mut mu = guess.1.clone();
    let mut f = residual_with(&ops, p, &phi, &mu)?;
    let r0 = max_abs(&f);
    let mut history = vec![r0];
    let mut diagnostic = None;

    let converged = |r: f64| r <= config.abs_tol || r <= config.rel_tol * r0;

    let mut status = if converged(r0) {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    let mut iterations = 0;

    while status == SolveStatus::MaxIterations && iterations < config.max_iterations {
        let jac = jacobian_with(&ops, p, &phi)?;
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = match linear_solve(&jac, &rhs) {
            Ok(d) => d,
            Err(e) => {
                status = SolveStatus::Diverged;
                diagnostic = Some(format!("linear solve failed: {e}"));
                break;
            }
        };
        let mut phi_vals = phi.values().to_vec();
        let mut mu_vals = mu.values().to_vec();
        for i in 0..n {
            phi_vals[i] += config.damping * delta[i];
            mu_vals[i] += config.damping * delta[n + i];
        }
        iterations += 1;
        if !phi_vals.iter().chain(&mu_vals).all(|v| v.is_finite()) {
            status = SolveStatus::Diverged;
            diagnostic = Some("iterate left the finite range".to_string());
            history.push(f64::INFINITY);
            break;
        }
        phi = P1Function::new(mesh.clone(), phi_vals);
        mu = P1Function::new(mesh.clone(), mu_vals);
        f = residual_with(&ops, p, &phi, &mu)?;
        let r = max_abs(&f);
        history.push(r);
        if !r.is_finite() {
            status = SolveStatus::Diverged;
            diagnostic = Some("residual left the finite range".to_string());
            break;
        }
        // Growth-based divergence needs two signals: runaway size relative
        // to the initial residual and no progress against the previous
        // iterate. A cold start at an inactive penalty always takes one
        // unpenalised step whose overshoot inflates the residual for an
        // iteration or two before the active-set correction pulls it back,
        // and higher penalty powers amplify that spike; killing those
        // recoverable trajectories would misreport them as failures.
        let r_prev = history[history.len() - 2];
        if iterations >= 2 && r > config.divergence_growth * r0 && r >= r_prev {
            status = SolveStatus::Diverged;
            diagnostic = Some(format!(
                "residual grew to {r:.3e} from initial {r0:.3e} without progress"
            ));
            break;
        }
        if converged(r) {
            status = SolveStatus::Converged;
        }
    }
    if status == SolveStatus::MaxIterations {
        diagnostic = Some(format!(
            "no convergence within {} iterations (residual {:.3e})",
            config.max_iterations,
            history.last().copied().unwrap_or(f64::NAN)
        ));
    }

    Ok(StepSolution {
        phi,
        mu,
        status,
        iterations,
        residual_history: history,
        diagnostic,
    })
}

/// Violation metrics of a solution: vertex maximum and exact integral of the
/// violation, the mass defect, and the sampled structural constant.
pub fn violation_report(
    p: &StepProblem,
    sol: &StepSolution,
    sample_radii: &[f64],
    sample_centers: &[[f64; 2]],
) -> ViolationReport {
    debug_assert_eq!(sol.status, SolveStatus::Converged);
    let phi = &sol.phi;
    let mesh = phi.mesh();
    let linf = penalty::lambda_linf(phi);
    let l1 = penalty::lambda_l1(phi);

    let mass = assemble_mass(mesh);
    let diff: Vec<f64> = phi
        .values()
        .iter()
        .zip(p.phi_prev.values())
        .map(|(a, b)| a - b)
        .collect();
    let mass_error = mass.matvec(&diff).iter().sum::<f64>().abs();

    let mut structural_k: f64 = 0.0;
    if linf > 0.0 {
        for center in sample_centers {
            for &radius in sample_radii {
                let integral = ball_violation_integral(phi, *center, radius, 1e-10);
                structural_k = structural_k.max(p.s * integral / (radius * radius));
            }
        }
    }

    ViolationReport {
        linf,
        l1,
        mass_error,
        structural_k,
    }
}

/// Integral of |lambda(phi_h)| over the intersection of a disc with the
/// domain. Cells entirely inside the disc are integrated exactly by
/// clipping; cells straddling the disc boundary are handled by recursive
/// subdivision to the given absolute tolerance.
pub fn ball_violation_integral(
    phi: &P1Function,
    center: [f64; 2],
    radius: f64,
    tol: f64,
) -> f64 {
    let mesh = phi.mesh();
    let values = phi.values();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let idx = mesh.cells()[c];
        let local = [values[idx[0]], values[idx[1]], values[idx[2]]];
        if local.iter().all(|v| v.abs() <= 1.0) {
            continue;
        }
        let p = [
            mesh.vertices()[idx[0]],
            mesh.vertices()[idx[1]],
            mesh.vertices()[idx[2]],
        ];
        total += ball_cell_integral(&p, &local, center, radius, tol, 30);
    }
    total
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len_sq > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn point_in_triangle(p: [f64; 2], t: &[[f64; 2]; 3]) -> bool {
    let sign = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d0 = sign(t[0], t[1], p);
    let d1 = sign(t[1], t[2], p);
    let d2 = sign(t[2], t[0], p);
    let has_neg = d0 < 0.0 || d1 < 0.0 || d2 < 0.0;
    let has_pos = d0 > 0.0 || d1 > 0.0 || d2 > 0.0;
    !(has_neg && has_pos)
}

fn triangle_area(p: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]))
        .abs()
}

/// In/out classification of a triangle against the disc boundary.
enum DiscSide {
    Inside,
    Outside,
    Straddling,
}

fn classify_disc(p: &[[f64; 2]; 3], center: [f64; 2], radius: f64) -> DiscSide {
    let d_max = p.iter().map(|&q| dist(q, center)).fold(0.0f64, f64::max);
    if d_max <= radius {
        return DiscSide::Inside;
    }
    let d_min = if point_in_triangle(center, p) {
        0.0
    } else {
        (0..3)
            .map(|i| point_segment_distance(center, p[i], p[(i + 1) % 3]))
            .fold(f64::INFINITY, f64::min)
    };
    if d_min >= radius {
        DiscSide::Outside
    } else {
        DiscSide::Straddling
    }
}

/// Leaf estimate for a disc-straddling triangle: clip against the linear
/// interpolant of the signed circle distance (a secant approximation of the
/// arc) and integrate |lambda| exactly over the inside polygon. The error is
/// O(lambda * h^3 / R) per leaf, so a few subdivision levels suffice.
fn secant_clipped_estimate(
    p: &[[f64; 2]; 3],
    vals: &[f64; 3],
    center: [f64; 2],
    radius: f64,
) -> f64 {
    let g = [
        radius - dist(p[0], center),
        radius - dist(p[1], center),
        radius - dist(p[2], center),
    ];
    let area = triangle_area(p);
    let clip = crate::geom::clip_triangle(g, 0.0);
    let mut total = 0.0;
    if let Some(region) = clip.region(crate::geom::Side::Above) {
        for tri in region.triangles() {
            let sub_area = area * crate::geom::subtri_area_fraction(&tri);
            let sub_vals = [
                tri[0].bary[0] * vals[0] + tri[0].bary[1] * vals[1] + tri[0].bary[2] * vals[2],
                tri[1].bary[0] * vals[0] + tri[1].bary[1] * vals[1] + tri[1].bary[2] * vals[2],
                tri[2].bary[0] * vals[0] + tri[2].bary[1] * vals[1] + tri[2].bary[2] * vals[2],
            ];
            total += penalty::cell_lambda_l1(sub_vals, sub_area);
        }
    }
    total
}

fn ball_cell_integral(
    p: &[[f64; 2]; 3],
    vals: &[f64; 3],
    center: [f64; 2],
    radius: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    if vals.iter().all(|v| v.abs() <= 1.0) {
        return 0.0;
    }
    let shallow = |q: &[[f64; 2]; 3], w: &[f64; 3]| match classify_disc(q, center, radius) {
        DiscSide::Inside => penalty::cell_lambda_l1(*w, triangle_area(q)),
        DiscSide::Outside => 0.0,
        DiscSide::Straddling => secant_clipped_estimate(q, w, center, radius),
    };
    match classify_disc(p, center, radius) {
        DiscSide::Inside => return penalty::cell_lambda_l1(*vals, triangle_area(p)),
        DiscSide::Outside => return 0.0,
        DiscSide::Straddling => {}
    }
    let coarse = secant_clipped_estimate(p, vals, center, radius);
    if depth == 0 {
        return coarse;
    }
    let mid = |i: usize, j: usize| [0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1])];
    let vmid = |i: usize, j: usize| 0.5 * (vals[i] + vals[j]);
    let kids: [([[f64; 2]; 3], [f64; 3]); 4] = [
        ([p[0], mid(0, 1), mid(2, 0)], [vals[0], vmid(0, 1), vmid(2, 0)]),
        ([mid(0, 1), p[1], mid(1, 2)], [vmid(0, 1), vals[1], vmid(1, 2)]),
        ([mid(2, 0), mid(1, 2), p[2]], [vmid(2, 0), vmid(1, 2), vals[2]]),
        (
            [mid(0, 1), mid(1, 2), mid(2, 0)],
            [vmid(0, 1), vmid(1, 2), vmid(2, 0)],
        ),
    ];
    let fine: f64 = kids.iter().map(|(q, w)| shallow(q, w)).sum();
    if (fine - coarse).abs() <= tol {
        return fine;
    }
    kids.iter()
        .map(|(q, w)| ball_cell_integral(q, w, center, radius, 0.5 * tol, depth - 1))
        .sum()
}
