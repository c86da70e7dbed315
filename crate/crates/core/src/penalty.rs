//! The penalty functions enforcing the obstacle bound |phi| <= 1, their
//! generalized derivatives, and the three discrete realisations of the
//! penalty form: exact integration by triangle clipping, nodal
//! interpolation, and mass lumping.

use thiserror::Error;

use crate::fem::{P1Function, SparseMatrix};
use crate::geom::Side;

pub use crate::geom::{clip_triangle, BaryPoint, ClipRegion, ClippedTriangle};

#[derive(Debug, Error)]
pub enum PenaltyError {
    #[error("penalty power k = {0} is outside the supported range 2..=4")]
    UnsupportedPower(u32),
    #[error("the exact scheme is only available for k = 2 (got k = {0})")]
    ExactRequiresK2(u32),
}

/// Exponent of the penalty function; k = 2 is the plain violation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PenaltyPower(u32);

impl PenaltyPower {
    pub const K2: PenaltyPower = PenaltyPower(2);
    pub const K3: PenaltyPower = PenaltyPower(3);
    pub const K4: PenaltyPower = PenaltyPower(4);

    pub fn new(k: u32) -> Result<Self, PenaltyError> {
        if (2..=4).contains(&k) {
            Ok(PenaltyPower(k))
        } else {
            Err(PenaltyError::UnsupportedPower(k))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for PenaltyPower {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Numerical treatment of the penalty form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyScheme {
    /// Exact integration of the piecewise-linear violation (k = 2 only).
    Exact,
    /// Nodal interpolation of the violation before integrating.
    Interpolated,
    /// Lumped-mass evaluation at the vertices.
    Lumped,
}

impl PenaltyScheme {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyScheme::Exact => "exact",
            PenaltyScheme::Interpolated => "interpolated",
            PenaltyScheme::Lumped => "lumped",
        }
    }

    /// The exact scheme is restricted to the piecewise-linear case k = 2.
    pub fn check_compatible(self, k: PenaltyPower) -> Result<(), PenaltyError> {
        if self == PenaltyScheme::Exact && k.get() != 2 {
            return Err(PenaltyError::ExactRequiresK2(k.get()));
        }
        Ok(())
    }
}

impl std::fmt::Display for PenaltyScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PenaltyScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(PenaltyScheme::Exact),
            "interpolated" | "interpolation" => Ok(PenaltyScheme::Interpolated),
            "lumped" | "lumping" => Ok(PenaltyScheme::Lumped),
            other => Err(format!("unknown penalty scheme '{other}'")),
        }
    }
}

/// Constraint violation: max(0, v-1) + min(0, v+1). Zero on [-1, 1],
/// monotone nondecreasing, 1-Lipschitz.
pub fn lambda(v: f64) -> f64 {
    (v - 1.0).max(0.0) + (v + 1.0).min(0.0)
}

/// Higher-power violation lambda * |lambda|^(k-2); odd about the obstacle
/// interval, and identical to `lambda` for k = 2.
pub fn lambda_k(v: f64, k: PenaltyPower) -> f64 {
    let l = lambda(v);
    match k.get() {
        2 => l,
        3 => l * l.abs(),
        _ => l * l.abs().powi(k.get() as i32 - 2),
    }
}

/// Generalized derivative of `lambda_k`: (k-1)|lambda(v)|^(k-2) outside the
/// obstacle interval, 0 inside and at the kinks |v| = 1.
pub fn dlambda_k(v: f64, k: PenaltyPower) -> f64 {
    if v.abs() <= 1.0 {
        return 0.0;
    }
    let l = lambda(v).abs();
    match k.get() {
        2 => 1.0,
        3 => 2.0 * l,
        _ => (k.get() - 1) as f64 * l.powi(k.get() as i32 - 2),
    }
}

/// Assemble the penalty load vector P with P_i = Lambda(phi, hat_i)
/// according to the chosen scheme, including the factor `s`.
pub fn assemble_penalty_vector(
    phi: &P1Function,
    s: f64,
    k: PenaltyPower,
    scheme: PenaltyScheme,
) -> Result<Vec<f64>, PenaltyError> {
    scheme.check_compatible(k)?;
    let mesh = phi.mesh();
    let values = phi.values();
    let n = mesh.num_vertices();
    let mut out = vec![0.0; n];
    match scheme {
        PenaltyScheme::Lumped => {
            // s * d_i * lambda_k(phi_i) with d accumulated cell-wise.
            for c in 0..mesh.num_cells() {
                let area = mesh.cell_area(c);
                for &v in &mesh.cells()[c] {
                    out[v] += s * area / 3.0 * lambda_k(values[v], k);
                }
            }
        }
        PenaltyScheme::Interpolated => {
            // s * M * (nodal lambda_k values), assembled cell-wise.
            for c in 0..mesh.num_cells() {
                let area = mesh.cell_area(c);
                let idx = mesh.cells()[c];
                let g = [
                    lambda_k(values[idx[0]], k),
                    lambda_k(values[idx[1]], k),
                    lambda_k(values[idx[2]], k),
                ];
                for i in 0..3 {
                    let mut acc = 0.0;
                    for j in 0..3 {
                        let w = if i == j { 2.0 } else { 1.0 };
                        acc += w * g[j];
                    }
                    out[idx[i]] += s * area / 12.0 * acc;
                }
            }
        }
        PenaltyScheme::Exact => {
            for c in 0..mesh.num_cells() {
                let area = mesh.cell_area(c);
                let idx = mesh.cells()[c];
                let local = [values[idx[0]], values[idx[1]], values[idx[2]]];
                let cell = exact_cell_penalty(local, area, s);
                for i in 0..3 {
                    out[idx[i]] += cell[i];
                }
            }
        }
    }
    Ok(out)
}

/// Assemble the derivative P' = dP/dphi of the penalty load vector.
///
/// Lumped and exact variants are symmetric positive semidefinite; the
/// interpolated variant is M * diag(dlambda_k) and used as given.
pub fn assemble_penalty_jacobian(
    phi: &P1Function,
    s: f64,
    k: PenaltyPower,
    scheme: PenaltyScheme,
) -> Result<SparseMatrix, PenaltyError> {
    scheme.check_compatible(k)?;
    let mesh = phi.mesh();
    let values = phi.values();
    let n = mesh.num_vertices();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    match scheme {
        PenaltyScheme::Lumped => {
            for c in 0..mesh.num_cells() {
                let area = mesh.cell_area(c);
                for &v in &mesh.cells()[c] {
                    let d = dlambda_k(values[v], k);
                    if d != 0.0 {
                        triplets.push((v, v, s * area / 3.0 * d));
                    }
                }
            }
        }
        PenaltyScheme::Interpolated => {
            for c in 0..mesh.num_cells() {
                let area = mesh.cell_area(c);
                let idx = mesh.cells()[c];
                let d = [
                    dlambda_k(values[idx[0]], k),
                    dlambda_k(values[idx[1]], k),
                    dlambda_k(values[idx[2]], k),
                ];
                for i in 0..3 {
                    for j in 0..3 {
                        if d[j] == 0.0 {
                            continue;
                        }
                        let w = if i == j { 2.0 } else { 1.0 };
                        triplets.push((idx[i], idx[j], s * area / 12.0 * w * d[j]));
                    }
                }
            }
        }
        PenaltyScheme::Exact => {
            // s * integral over {|phi_h| > 1} of hat_i hat_j.
            for c in 0..mesh.num_cells() {
                let area = mesh.cell_area(c);
                let idx = mesh.cells()[c];
                let local = [values[idx[0]], values[idx[1]], values[idx[2]]];
                if local.iter().all(|v| v.abs() <= 1.0) {
                    continue;
                }
                let mut add_region = |region: &ClipRegion| {
                    for i in 0..3 {
                        for j in 0..3 {
                            let v = crate::geom::integrate_hat_pair(region, area, i, j);
                            if v != 0.0 {
                                triplets.push((idx[i], idx[j], s * v));
                            }
                        }
                    }
                };
                if local.iter().any(|&v| v > 1.0) {
                    if let Some(region) = clip_triangle(local, 1.0).region(Side::Above) {
                        add_region(region);
                    }
                }
                if local.iter().any(|&v| v < -1.0) {
                    // The region below -1: clip at -1 and keep the Below side.
                    if let Some(region) = clip_triangle(local, -1.0).region(Side::Below) {
                        add_region(region);
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, &triplets))
}

/// Exact penalty load of a single triangle: the integrals of
/// s * lambda(phi_h) * hat_i over the cell, where phi_h is the affine
/// interpolant of `values`. The cell is clipped at the level lines +-1 and
/// the quadratic integrands are integrated in closed form; the geometry
/// enters only through the cell area.
pub fn exact_cell_penalty(values: [f64; 3], area: f64, s: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    if values.iter().all(|v| v.abs() <= 1.0) {
        return out;
    }
    if values.iter().any(|&v| v > 1.0) {
        let shifted = values.map(|v| v - 1.0);
        if let Some(region) = clip_triangle(shifted, 0.0).region(Side::Above) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += s * crate::geom::integrate_affine_times_hat(region, area, i);
            }
        }
    }
    if values.iter().any(|&v| v < -1.0) {
        let shifted = values.map(|v| v + 1.0);
        if let Some(region) = clip_triangle(shifted, 0.0).region(Side::Below) {
            for (i, o) in out.iter_mut().enumerate() {
                *o += s * crate::geom::integrate_affine_times_hat(region, area, i);
            }
        }
    }
    out
}

/// Exact L1 norm of the violation lambda(phi_h) of a P1 function, clipping
/// every cell at the level lines +-1 and integrating the affine pieces in
/// closed form.
pub fn lambda_l1(phi: &P1Function) -> f64 {
    let mesh = phi.mesh();
    let values = phi.values();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let idx = mesh.cells()[c];
        let local = [values[idx[0]], values[idx[1]], values[idx[2]]];
        total += cell_lambda_l1(local, mesh.cell_area(c));
    }
    total
}

/// Exact integral of |lambda| of the affine interpolant over one triangle.
pub(crate) fn cell_lambda_l1(local: [f64; 3], area: f64) -> f64 {
    if local.iter().all(|v| v.abs() <= 1.0) {
        return 0.0;
    }
    let mut total = 0.0;
    if local.iter().any(|&v| v > 1.0) {
        let shifted = [local[0] - 1.0, local[1] - 1.0, local[2] - 1.0];
        if let Some(region) = clip_triangle(shifted, 0.0).region(Side::Above) {
            total += crate::geom::integrate_affine(region, area);
        }
    }
    if local.iter().any(|&v| v < -1.0) {
        let shifted = [local[0] + 1.0, local[1] + 1.0, local[2] + 1.0];
        if let Some(region) = clip_triangle(shifted, 0.0).region(Side::Below) {
            total -= crate::geom::integrate_affine(region, area);
        }
    }
    total
}

/// L-infinity norm of the violation of a P1 function; lambda composed with
/// an affine function is monotone along lines, so the maximum sits at a
/// vertex.
pub fn lambda_linf(phi: &P1Function) -> f64 {
    phi.values().iter().fold(0.0, |m, &v| m.max(lambda(v).abs()))
}
