//! Barycentric triangle geometry: clipping an affine interpolant against a
//! level line and exact integration over the resulting sub-polygons.
//!
//! Everything here is expressed in barycentric coordinates of the parent
//! triangle, so results are independent of the physical placement of the
//! cell; callers multiply by the physical cell area where needed.

/// A point of the parent triangle in barycentric coordinates, together with
/// the value of the affine interpolant there.
#[derive(Clone, Copy, Debug)]
pub struct BaryPoint {
    pub bary: [f64; 3],
    pub value: f64,
}

impl BaryPoint {
    fn vertex(i: usize, value: f64) -> Self {
        let mut bary = [0.0; 3];
        bary[i] = 1.0;
        BaryPoint { bary, value }
    }

    /// Point on the segment from `a` to `b` where the interpolant equals `level`.
    ///
    /// Requires `a.value != b.value`; callers only invoke this on edges whose
    /// endpoints straddle the level.
    fn crossing(a: &BaryPoint, b: &BaryPoint, level: f64) -> Self {
        let t = (level - a.value) / (b.value - a.value);
        let t = t.clamp(0.0, 1.0);
        let mut bary = [0.0; 3];
        for d in 0..3 {
            bary[d] = a.bary[d] + t * (b.bary[d] - a.bary[d]);
        }
        BaryPoint { bary, value: level }
    }
}

/// Which side of the level line a clip region lies on. `Above` means the
/// interpolant is >= the level on the region (points exactly on the level
/// line are assigned to `Above`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Convex sub-polygon (triangle or quadrilateral) of the parent triangle on
/// which the interpolant does not cross the level.
#[derive(Clone, Debug)]
pub struct ClipRegion {
    pub side: Side,
    /// Corner points in the cyclic order of the parent triangle; 3 or 4 of them.
    pub corners: Vec<BaryPoint>,
}

impl ClipRegion {
    /// Fan triangulation of the region.
    pub fn triangles(&self) -> impl Iterator<Item = [BaryPoint; 3]> + '_ {
        (1..self.corners.len().saturating_sub(1))
            .map(move |i| [self.corners[0], self.corners[i], self.corners[i + 1]])
    }

    /// Area of the region as a fraction of the parent triangle area.
    pub fn area_fraction(&self) -> f64 {
        self.triangles().map(|t| subtri_area_fraction(&t)).sum()
    }
}

/// Result of clipping one triangle against one level line.
#[derive(Clone, Debug)]
pub struct ClippedTriangle {
    /// One region if the level line misses the triangle, two otherwise.
    pub regions: Vec<ClipRegion>,
}

impl ClippedTriangle {
    pub fn region(&self, side: Side) -> Option<&ClipRegion> {
        self.regions.iter().find(|r| r.side == side)
    }
}

/// Partition a triangle into the regions where the affine interpolant of the
/// nodal `values` is >= `level` and where it is <= `level`.
///
/// The region areas sum to the triangle area; a vertex lying exactly on the
/// level line belongs to the `Above` region (which may then have zero area).
pub fn clip_triangle(values: [f64; 3], level: f64) -> ClippedTriangle {
    let corners = [
        BaryPoint::vertex(0, values[0]),
        BaryPoint::vertex(1, values[1]),
        BaryPoint::vertex(2, values[2]),
    ];
    let above = [values[0] >= level, values[1] >= level, values[2] >= level];
    let n_above = above.iter().filter(|&&a| a).count();

    let whole = |side: Side| ClippedTriangle {
        regions: vec![ClipRegion {
            side,
            corners: corners.to_vec(),
        }],
    };
    match n_above {
        3 => whole(Side::Above),
        0 => whole(Side::Below),
        1 => {
            // One vertex at or above the level; cut off the corner at it.
            let a = (0..3).position(|i| above[i]).unwrap();
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let p_ab = BaryPoint::crossing(&corners[a], &corners[b], level);
            let p_ca = BaryPoint::crossing(&corners[c], &corners[a], level);
            ClippedTriangle {
                regions: vec![
                    ClipRegion {
                        side: Side::Above,
                        corners: vec![corners[a], p_ab, p_ca],
                    },
                    ClipRegion {
                        side: Side::Below,
                        corners: vec![p_ab, corners[b], corners[c], p_ca],
                    },
                ],
            }
        }
        2 => {
            // One vertex strictly below the level; cut off the corner at it.
            let c = (0..3).position(|i| !above[i]).unwrap();
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            let p_bc = BaryPoint::crossing(&corners[b], &corners[c], level);
            let p_ca = BaryPoint::crossing(&corners[c], &corners[a], level);
            ClippedTriangle {
                regions: vec![
                    ClipRegion {
                        side: Side::Above,
                        corners: vec![corners[a], corners[b], p_bc, p_ca],
                    },
                    ClipRegion {
                        side: Side::Below,
                        corners: vec![p_bc, corners[c], p_ca],
                    },
                ],
            }
        }
        _ => unreachable!(),
    }
}

/// Area of a barycentric sub-triangle as a fraction of the parent area.
pub fn subtri_area_fraction(c: &[BaryPoint; 3]) -> f64 {
    // Parametrise the parent by (bary[1], bary[2]); the Jacobian of that map
    // has determinant 2*A_parent, so the fraction is the parameter-space cross
    // product itself.
    let u1 = [c[1].bary[1] - c[0].bary[1], c[1].bary[2] - c[0].bary[2]];
    let u2 = [c[2].bary[1] - c[0].bary[1], c[2].bary[2] - c[0].bary[2]];
    (u1[0] * u2[1] - u1[1] * u2[0]).abs()
}

/// Integral over a clip region of the affine function carried in the corner
/// values, given the physical area of the parent triangle.
pub fn integrate_affine(region: &ClipRegion, tri_area: f64) -> f64 {
    region
        .triangles()
        .map(|t| {
            let frac = subtri_area_fraction(&t);
            tri_area * frac * (t[0].value + t[1].value + t[2].value) / 3.0
        })
        .sum()
}

/// Integral over a clip region of `f * hat_i`, where `f` is the affine
/// function in the corner values and `hat_i` is the i-th barycentric hat
/// function of the parent triangle.
///
/// Uses the edge-midpoint rule on each fan triangle, exact for quadratics.
pub fn integrate_affine_times_hat(region: &ClipRegion, tri_area: f64, hat: usize) -> f64 {
    region
        .triangles()
        .map(|t| {
            let area = tri_area * subtri_area_fraction(&t);
            let mut sum = 0.0;
            for e in 0..3 {
                let (p, q) = (&t[e], &t[(e + 1) % 3]);
                let f_mid = 0.5 * (p.value + q.value);
                let h_mid = 0.5 * (p.bary[hat] + q.bary[hat]);
                sum += f_mid * h_mid;
            }
            area * sum / 3.0
        })
        .sum()
}

/// Integral over a clip region of `hat_i * hat_j` (parent-triangle hat
/// functions). Edge-midpoint rule, exact for quadratics.
pub fn integrate_hat_pair(region: &ClipRegion, tri_area: f64, i: usize, j: usize) -> f64 {
    region
        .triangles()
        .map(|t| {
            let area = tri_area * subtri_area_fraction(&t);
            let mut sum = 0.0;
            for e in 0..3 {
                let (p, q) = (&t[e], &t[(e + 1) % 3]);
                let hi = 0.5 * (p.bary[i] + q.bary[i]);
                let hj = 0.5 * (p.bary[j] + q.bary[j]);
                sum += hi * hj;
            }
            area * sum / 3.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_area_fraction(clip: &ClippedTriangle) -> f64 {
        clip.regions.iter().map(|r| r.area_fraction()).sum()
    }

    #[test]
    fn all_above_keeps_whole_triangle() {
        let clip = clip_triangle([2.0, 3.0, 4.0], 1.0);
        assert_eq!(clip.regions.len(), 1);
        assert_eq!(clip.regions[0].side, Side::Above);
        assert!((clip.regions[0].area_fraction() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_below_keeps_whole_triangle() {
        let clip = clip_triangle([-2.0, 0.0, 0.5], 1.0);
        assert_eq!(clip.regions.len(), 1);
        assert_eq!(clip.regions[0].side, Side::Below);
    }

    #[test]
    fn corner_cut_area_is_similarity_squared() {
        // Values (0, 0, 2) against level 1: the interpolant reaches 1 at the
        // midpoints of the edges into vertex 2, so the above region is the
        // sub-triangle at vertex 2 with (1/2)^2 of the area.
        let clip = clip_triangle([0.0, 0.0, 2.0], 1.0);
        let above = clip.region(Side::Above).unwrap();
        assert!((above.area_fraction() - 0.25).abs() < 1e-13);
        let below = clip.region(Side::Below).unwrap();
        assert!((below.area_fraction() - 0.75).abs() < 1e-13);
        assert_eq!(below.corners.len(), 4);
    }

    #[test]
    fn vertex_exactly_on_level_gives_zero_area_above() {
        let clip = clip_triangle([1.0, 0.0, -1.0], 1.0);
        let above = clip.region(Side::Above).unwrap();
        assert!(above.area_fraction().abs() < 1e-15);
        assert!((total_area_fraction(&clip) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn affine_integral_over_whole_triangle_is_mean() {
        let clip = clip_triangle([1.0, 2.0, 3.0], -10.0);
        let integral = integrate_affine(&clip.regions[0], 0.5);
        assert!((integral - 0.5 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn hat_pair_integrals_match_mass_matrix() {
        // On the whole triangle the hat-pair integrals are the P1 mass matrix
        // entries: area/6 on the diagonal, area/12 off it.
        let clip = clip_triangle([0.0, 0.0, 0.0], -1.0);
        let region = &clip.regions[0];
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { area / 6.0 } else { area / 12.0 };
                let got = integrate_hat_pair(region, area, i, j);
                assert!((got - expect).abs() < 1e-14, "({i},{j}): {got} vs {expect}");
            }
        }
    }

    #[test]
    fn split_areas_sum_to_one_for_random_like_inputs() {
        // A few deterministic awkward configurations, including degenerate
        // levels through vertices.
        let cases = [
            ([0.3, -0.9, 2.7], 1.0),
            ([1.0, 1.0, -1.0], 1.0),
            ([-1.0, -1.0, -1.0], -1.0),
            ([5.0, -5.0, 0.1], 0.0),
            ([1e-16, -1e-16, 1.0], 0.0),
        ];
        for (values, level) in cases {
            let clip = clip_triangle(values, level);
            assert!(
                (total_area_fraction(&clip) - 1.0).abs() < 1e-13,
                "values {values:?} level {level}"
            );
        }
    }
}
