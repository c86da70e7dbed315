//! Recursive triangle-subdivision quadrature.
//!
//! Each triangle is estimated with the three-point edge-midpoint rule (exact
//! for quadratics) and split into four congruent children; a branch stops
//! when the refined estimate agrees with the coarse one to its share of the
//! tolerance. The tolerance halves per level: the integrands this faces are
//! polynomial away from level lines, so only the O(2^d) cells crossing a
//! line keep refining, and a budget of tol/2 per child keeps the summed
//! error of those cells at O(tol) without forcing unbounded depth on them.

type Point = [f64; 2];

fn midpoint(a: &Point, b: &Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn triangle_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]))
        .abs()
}

fn edge_midpoint_rule<F: Fn(f64, f64) -> f64>(p: &[Point; 3], f: &F) -> f64 {
    let area = triangle_area(p);
    let mut sum = 0.0;
    for e in 0..3 {
        let m = midpoint(&p[e], &p[(e + 1) % 3]);
        sum += f(m[0], m[1]);
    }
    area * sum / 3.0
}

fn children(p: &[Point; 3]) -> [[Point; 3]; 4] {
    let m01 = midpoint(&p[0], &p[1]);
    let m12 = midpoint(&p[1], &p[2]);
    let m20 = midpoint(&p[2], &p[0]);
    [
        [p[0], m01, m20],
        [m01, p[1], m12],
        [m20, m12, p[2]],
        [m01, m12, m20],
    ]
}

/// Degree-2 estimate on an irrational lattice: the triangle is split along
/// edge `e` at the ratio 1/sqrt(2) and the edge-midpoint rule is applied to
/// both halves. All rational lattices can conspire to carry the same mass
/// and first moment on either side of a straight kink over a whole interval
/// of kink positions; nodes at irrational coordinates cannot join such a
/// conspiracy except at isolated positions. The irrational offset is blind
/// to kinks parallel to the split edge, so callers check two distinct edges.
fn split_rule<F: Fn(f64, f64) -> f64>(p: &[Point; 3], f: &F, e: usize) -> f64 {
    const ALPHA: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b, c) = (p[e], p[(e + 1) % 3], p[(e + 2) % 3]);
    let m = [a[0] + ALPHA * (b[0] - a[0]), a[1] + ALPHA * (b[1] - a[1])];
    edge_midpoint_rule(&[a, m, c], f) + edge_midpoint_rule(&[m, b, c], f)
}

/// Degree-2 rule sampling the vertices and the centroid:
/// area * (f(v0) + f(v1) + f(v2)) / 12 + area * 3/4 * f(centroid).
/// The interior rules above never sample near corners, so a kink sliver
/// cutting off a corner is invisible to all of them; the vertex sample sits
/// at the deepest point of any such sliver.
fn vertex_rule<F: Fn(f64, f64) -> f64>(p: &[Point; 3], f: &F) -> f64 {
    let area = triangle_area(p);
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    let corner_sum: f64 = p.iter().map(|q| f(q[0], q[1])).sum();
    area * corner_sum / 12.0 + area * 0.75 * f(centroid[0], centroid[1])
}

/// Estimate over the nine congruent thirds-subdivision triangles. Its sample
/// lattice shares no alignment with the dyadic one, which makes it a cheap
/// cross-check against kinks sliding through the midpoint samples.
fn ninth_rule<F: Fn(f64, f64) -> f64>(p: &[Point; 3], f: &F) -> f64 {
    let u = [(p[1][0] - p[0][0]) / 3.0, (p[1][1] - p[0][1]) / 3.0];
    let v = [(p[2][0] - p[0][0]) / 3.0, (p[2][1] - p[0][1]) / 3.0];
    let at = |i: usize, j: usize| {
        [
            p[0][0] + i as f64 * u[0] + j as f64 * v[0],
            p[0][1] + i as f64 * u[1] + j as f64 * v[1],
        ]
    };
    let mut sum = 0.0;
    for i in 0..3 {
        for j in 0..3 - i {
            sum += edge_midpoint_rule(&[at(i, j), at(i + 1, j), at(i, j + 1)], f);
            if i + j < 2 {
                sum += edge_midpoint_rule(&[at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)], f);
            }
        }
    }
    sum
}

fn recurse<F: Fn(f64, f64) -> f64>(
    p: &[Point; 3],
    f: &F,
    coarse: f64,
    tol: f64,
    depth: u32,
    prev_ok: bool,
) -> f64 {
    let kids = children(p);
    let fine: f64 = kids.iter().map(|k| edge_midpoint_rule(k, f)).sum();
    // Require two consecutive agreeing levels plus agreement with two
    // further disjoint sample lattices: along a kink every rule degrades to
    // first order in the cross-kink coordinate, so individual small
    // differences can be coincidences of the lattice positions.
    let ok = (fine - coarse).abs() <= tol;
    if ok
        && prev_ok
        && (vertex_rule(p, f) - fine).abs() <= 4.0 * tol
        && (split_rule(p, f, 0) - fine).abs() <= 4.0 * tol
        && (split_rule(p, f, 1) - fine).abs() <= 4.0 * tol
        && (ninth_rule(p, f) - fine).abs() <= 4.0 * tol
    {
        return fine;
    }
    if depth == 0 {
        return fine;
    }
    kids.iter()
        .map(|k| recurse(k, f, edge_midpoint_rule(k, f), 0.5 * tol, depth - 1, ok))
        .sum()
}

/// Integrate `f` over the triangle `(p0, p1, p2)` by recursive subdivision
/// until successive refinement levels of each branch differ by less than its
/// share of `tol`.
pub fn integrate_triangle<F: Fn(f64, f64) -> f64>(
    p0: Point,
    p1: Point,
    p2: Point,
    f: &F,
    tol: f64,
    max_depth: u32,
) -> f64 {
    let tri = [p0, p1, p2];
    recurse(&tri, f, edge_midpoint_rule(&tri, f), tol, max_depth, false)
}

fn rule3<F: Fn(f64, f64) -> [f64; 3]>(p: &[Point; 3], f: &F) -> [f64; 3] {
    let area = triangle_area(p);
    let mut sum = [0.0; 3];
    for e in 0..3 {
        let m = midpoint(&p[e], &p[(e + 1) % 3]);
        let v = f(m[0], m[1]);
        for k in 0..3 {
            sum[k] += v[k];
        }
    }
    sum.map(|s| area * s / 3.0)
}

fn recurse3<F: Fn(f64, f64) -> [f64; 3]>(
    p: &[Point; 3],
    f: &F,
    coarse: [f64; 3],
    tol: f64,
    depth: u32,
    min_depth: u32,
    prev_ok: bool,
) -> [f64; 3] {
    let kids = children(p);
    let mut fine = [0.0; 3];
    let parts: Vec<[f64; 3]> = kids.iter().map(|k| rule3(k, f)).collect();
    for part in &parts {
        for k in 0..3 {
            fine[k] += part[k];
        }
    }
    let diff: f64 = (0..3).map(|k| (fine[k] - coarse[k]).abs()).sum();
    let ok = diff <= tol;
    if min_depth == 0 && ok && prev_ok {
        let agree = |alt: [f64; 3]| {
            (0..3).map(|k| (alt[k] - fine[k]).abs()).sum::<f64>() <= 4.0 * tol
        };
        if agree(vertex_rule3(p, f))
            && agree(split_rule3(p, f, 0))
            && agree(split_rule3(p, f, 1))
            && agree(ninth_rule3(p, f))
        {
            return fine;
        }
    }
    if depth == 0 {
        return fine;
    }
    let mut total = [0.0; 3];
    for (kid, part) in kids.iter().zip(parts) {
        let sub = recurse3(
            kid,
            f,
            part,
            0.5 * tol,
            depth - 1,
            min_depth.saturating_sub(1),
            ok,
        );
        for k in 0..3 {
            total[k] += sub[k];
        }
    }
    total
}

fn vertex_rule3<F: Fn(f64, f64) -> [f64; 3]>(p: &[Point; 3], f: &F) -> [f64; 3] {
    let area = triangle_area(p);
    let centroid = [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ];
    let mut out = f(centroid[0], centroid[1]).map(|v| area * 0.75 * v);
    for q in p {
        let v = f(q[0], q[1]);
        for k in 0..3 {
            out[k] += area * v[k] / 12.0;
        }
    }
    out
}

fn split_rule3<F: Fn(f64, f64) -> [f64; 3]>(p: &[Point; 3], f: &F, e: usize) -> [f64; 3] {
    const ALPHA: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b, c) = (p[e], p[(e + 1) % 3], p[(e + 2) % 3]);
    let m = [a[0] + ALPHA * (b[0] - a[0]), a[1] + ALPHA * (b[1] - a[1])];
    let u = rule3(&[a, m, c], f);
    let v = rule3(&[m, b, c], f);
    [u[0] + v[0], u[1] + v[1], u[2] + v[2]]
}

fn ninth_rule3<F: Fn(f64, f64) -> [f64; 3]>(p: &[Point; 3], f: &F) -> [f64; 3] {
    let u = [(p[1][0] - p[0][0]) / 3.0, (p[1][1] - p[0][1]) / 3.0];
    let v = [(p[2][0] - p[0][0]) / 3.0, (p[2][1] - p[0][1]) / 3.0];
    let at = |i: usize, j: usize| {
        [
            p[0][0] + i as f64 * u[0] + j as f64 * v[0],
            p[0][1] + i as f64 * u[1] + j as f64 * v[1],
        ]
    };
    let mut sum = [0.0; 3];
    let mut add = |tri: &[Point; 3]| {
        let part = rule3(tri, f);
        for k in 0..3 {
            sum[k] += part[k];
        }
    };
    for i in 0..3 {
        for j in 0..3 - i {
            add(&[at(i, j), at(i + 1, j), at(i, j + 1)]);
            if i + j < 2 {
                add(&[at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
            }
        }
    }
    sum
}

/// Component-wise variant of [`integrate_triangle`] for three integrands
/// sharing the evaluation points; the termination test uses the summed
/// component differences. `min_depth` forces that many uniform subdivision
/// levels before any branch may terminate, which guards against features too
/// small for the coarse sample lattices to notice.
pub fn integrate_triangle3<F: Fn(f64, f64) -> [f64; 3]>(
    p0: Point,
    p1: Point,
    p2: Point,
    f: &F,
    tol: f64,
    max_depth: u32,
    min_depth: u32,
) -> [f64; 3] {
    let tri = [p0, p1, p2];
    recurse3(&tri, f, rule3(&tri, f), tol, max_depth, min_depth, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: ([f64; 2], [f64; 2], [f64; 2]) = ([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);

    #[test]
    fn exact_for_quadratics_without_refinement() {
        // x^2 over the reference triangle: 1/12.
        let got = integrate_triangle(UNIT.0, UNIT.1, UNIT.2, &|x, _| x * x, 1e-14, 0);
        assert!((got - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn kinked_integrand_converges() {
        // |x - 1/3| over the reference triangle:
        // ∫_0^1 |x-1/3| (1-x) dx = 4/81 + 4/81 = 8/81.
        let exact = 8.0 / 81.0;
        let got = integrate_triangle(UNIT.0, UNIT.1, UNIT.2, &|x, _| (x - 1.0 / 3.0).abs(), 1e-11, 26);
        assert!((got - exact).abs() < 1e-9, "got {got}, want {exact}");
    }

    #[test]
    fn indicator_integrand_converges() {
        // Quarter disc of radius 1/2 centred at the origin inside the
        // reference triangle: area pi/16. A jump integrand limits the
        // attainable rate, so only moderate accuracy is demanded.
        let f = |x: f64, y: f64| if x * x + y * y <= 0.25 { 1.0 } else { 0.0 };
        let got = integrate_triangle(UNIT.0, UNIT.1, UNIT.2, &f, 1e-7, 24);
        assert!(
            (got - std::f64::consts::PI / 16.0).abs() < 1e-3,
            "got {got}"
        );
    }

    #[test]
    fn vector_variant_matches_scalar() {
        let f3 = |x: f64, y: f64| [x * x, (x - 1.0 / 3.0).abs(), y];
        let got = integrate_triangle3(UNIT.0, UNIT.1, UNIT.2, &f3, 1e-10, 24, 3);
        assert!((got[0] - 1.0 / 12.0).abs() < 1e-12);
        assert!((got[1] - 8.0 / 81.0).abs() < 1e-9);
        assert!((got[2] - 1.0 / 6.0).abs() < 1e-12);
    }
}
