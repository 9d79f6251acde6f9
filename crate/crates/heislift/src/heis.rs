//! Heisenberg group arithmetic: group law, Korányi metric, exact
//! horizontal lifts of planar polylines, and constructive point-to-point
//! horizontal connections.
//!
//! A point of the group is kept in exponential coordinates
//! `(x_1, y_1, ..., x_n, y_n, t)`. Heights of paths are always stored as
//! lifted values derived from the planar polyline, never as free
//! coordinates, so horizontality holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lipschitz constant achieved by [`connect_points`]: the supremum of
/// `(rho + 2*tau) / (rho^4 + tau^4)^{1/4}` over planar offset `rho` and
/// height scale `tau = sqrt(|dt|)`, attained at `tau = 2^{1/3} rho`.
pub fn connect_gamma() -> f64 {
    (1.0 + 2f64.powf(4.0 / 3.0)).powf(0.75)
}

/// A point of the Heisenberg group in exponential coordinates.
///
/// `xy` interleaves the horizontal coordinates as `[x_1, y_1, ..., x_n, y_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPoint {
    xy: Vec<f64>,
    t: f64,
}

impl HPoint {
    pub fn new(xy: Vec<f64>, t: f64) -> Result<Self> {
        if xy.len() % 2 != 0 || xy.is_empty() {
            return Err(Error::invalid(
                "heis_core",
                format!("horizontal coordinate count {} is not even and positive", xy.len()),
            ));
        }
        if !t.is_finite() || xy.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("heis_core", "non-finite coordinate"));
        }
        Ok(HPoint { xy, t })
    }

    /// Origin of the group (the identity element).
    pub fn origin(n: usize) -> Self {
        HPoint {
            xy: vec![0.0; 2 * n],
            t: 0.0,
        }
    }

    /// Parse from the flat coordinate form `[x_1, y_1, ..., x_n, y_n, t]`.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len() % 2 == 0 {
            return Err(Error::invalid(
                "heis_core",
                format!("flat Heisenberg point needs 2n+1 coordinates, got {}", coords.len()),
            ));
        }
        HPoint::new(coords[..coords.len() - 1].to_vec(), coords[coords.len() - 1])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.xy.clone();
        v.push(self.t);
        v
    }

    pub fn n(&self) -> usize {
        self.xy.len() / 2
    }

    pub fn x(&self, j: usize) -> f64 {
        self.xy[2 * j]
    }

    pub fn y(&self, j: usize) -> f64 {
        self.xy[2 * j + 1]
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn xy(&self) -> &[f64] {
        &self.xy
    }

    /// Korányi gauge `(|(x,y)|^4 + t^2)^{1/4}`.
    pub fn koranyi_norm(&self) -> f64 {
        let q: f64 = self.xy.iter().map(|c| c * c).sum();
        q.hypot(self.t).sqrt()
    }

    /// Anisotropic dilation `(x, y, t) -> (λx, λy, λ²t)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        HPoint {
            xy: self.xy.iter().map(|c| lambda * c).collect(),
            t: lambda * lambda * self.t,
        }
    }
}

fn check_same_n(p: &HPoint, q: &HPoint) -> Result<()> {
    if p.n() != q.n() {
        return Err(Error::DimensionMismatch {
            module: "heis_core",
            expected: p.n(),
            got: q.n(),
        });
    }
    Ok(())
}

/// Group product `p * q`.
///
/// The vertical component picks up `2 Σ_j (x'_j y_j - x_j y'_j)` where the
/// primed coordinates belong to `q`.
pub fn group_mul(p: &HPoint, q: &HPoint) -> Result<HPoint> {
    check_same_n(p, q)?;
    let n = p.n();
    let mut xy = Vec::with_capacity(2 * n);
    let mut twist = 0.0;
    for j in 0..n {
        xy.push(p.x(j) + q.x(j));
        xy.push(p.y(j) + q.y(j));
        twist += q.x(j) * p.y(j) - p.x(j) * q.y(j);
    }
    Ok(HPoint {
        xy,
        t: p.t + q.t + 2.0 * twist,
    })
}

/// Group inverse; in these coordinates, coordinate negation.
pub fn group_inv(p: &HPoint) -> HPoint {
    HPoint {
        xy: p.xy.iter().map(|c| -c).collect(),
        t: -p.t,
    }
}

/// Korányi distance `‖q⁻¹ * p‖_K`.
pub fn koranyi_dist(p: &HPoint, q: &HPoint) -> Result<f64> {
    let r = group_mul(&group_inv(q), p)?;
    Ok(r.koranyi_norm())
}

/// Exact height increment of the horizontal lift along the straight
/// planar segment from `a` to `b` (both interleaved `[x_1, y_1, ...]`).
///
/// The lift integrand `2 Σ (y_j x'_j - x_j y'_j)` is constant along a
/// straight segment, and its integral collapses to the closed form
/// `2 Σ_j (b_{x_j} a_{y_j} - a_{x_j} b_{y_j})`.
pub fn lift_increment(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(a.len() % 2, 0);
    let n = a.len() / 2;
    let mut s = 0.0;
    for j in 0..n {
        s += b[2 * j] * a[2 * j + 1] - a[2 * j] * b[2 * j + 1];
    }
    2.0 * s
}

/// A horizontal polyline: planar vertices plus the height at the first
/// vertex. Heights at later vertices are derived by exact segment lifts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizontalPath {
    t0: f64,
    vertices: Vec<Vec<f64>>,
    lifted_t: Vec<f64>,
}

impl HorizontalPath {
    /// Lift the planar polyline starting at height `t0`.
    pub fn new(vertices: Vec<Vec<f64>>, t0: f64) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::invalid("heis_core", "path needs at least one vertex"));
        }
        let w = vertices[0].len();
        if w == 0 || w % 2 != 0 {
            return Err(Error::invalid(
                "heis_core",
                format!("planar vertices must have 2n coordinates, got {w}"),
            ));
        }
        if vertices.iter().any(|v| v.len() != w) {
            return Err(Error::invalid("heis_core", "ragged planar vertex list"));
        }
        let mut lifted_t = Vec::with_capacity(vertices.len());
        let mut t = t0;
        lifted_t.push(t);
        for seg in vertices.windows(2) {
            t += lift_increment(&seg[0], &seg[1]);
            lifted_t.push(t);
        }
        Ok(HorizontalPath {
            t0,
            vertices,
            lifted_t,
        })
    }

    pub fn n(&self) -> usize {
        self.vertices[0].len() / 2
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn lifted_t(&self) -> &[f64] {
        &self.lifted_t
    }

    pub fn start(&self) -> HPoint {
        HPoint {
            xy: self.vertices[0].clone(),
            t: self.t0,
        }
    }

    pub fn end(&self) -> HPoint {
        HPoint {
            xy: self.vertices[self.vertices.len() - 1].clone(),
            t: self.lifted_t[self.lifted_t.len() - 1],
        }
    }

    /// Horizontal length; equals the Euclidean length of the planar
    /// projection.
    pub fn length(&self) -> f64 {
        self.vertices
            .windows(2)
            .map(|seg| planar_dist(&seg[0], &seg[1]))
            .sum()
    }

    /// Cumulative planar arclength at each vertex.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.vertices.len());
        out.push(0.0);
        for seg in self.vertices.windows(2) {
            acc += planar_dist(&seg[0], &seg[1]);
            out.push(acc);
        }
        out
    }

    /// Point at planar arclength `s` from the start (clamped to the path).
    ///
    /// Partial lifts along a segment are exact: the increment to the point
    /// at parameter `u` of a segment is `u` times the full increment.
    pub fn point_at_arclength(&self, s: f64) -> HPoint {
        let cum = self.cumulative_lengths();
        let total = cum[cum.len() - 1];
        let s = s.clamp(0.0, total);
        // Find the segment containing s.
        let mut i = 0;
        while i + 1 < cum.len() - 1 && cum[i + 1] < s {
            i += 1;
        }
        if self.segment_count() == 0 {
            return self.start();
        }
        let seg_len = cum[i + 1] - cum[i];
        let u = if seg_len > 0.0 { (s - cum[i]) / seg_len } else { 0.0 };
        let a = &self.vertices[i];
        let b = &self.vertices[i + 1];
        let xy: Vec<f64> = a.iter().zip(b).map(|(pa, pb)| pa + u * (pb - pa)).collect();
        let t = self.lifted_t[i] + u * lift_increment(a, b);
        HPoint { xy, t }
    }
}

impl<'de> Deserialize<'de> for HorizontalPath {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            t0: f64,
            vertices: Vec<Vec<f64>>,
            lifted_t: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let path = HorizontalPath::new(raw.vertices, raw.t0).map_err(serde::de::Error::custom)?;
        // Stored heights must match the recomputed lift.
        if raw.lifted_t.len() != path.lifted_t.len()
            || raw
                .lifted_t
                .iter()
                .zip(&path.lifted_t)
                .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(serde::de::Error::custom(
                "stored lifted_t disagrees with the recomputed horizontal lift",
            ));
        }
        Ok(path)
    }
}

/// Max absolute coordinate difference; the right scale for "equals up to
/// float rounding" checks (the Korányi gauge square-roots t-errors).
pub fn coord_dist(p: &HPoint, q: &HPoint) -> f64 {
    let mut d = (p.t - q.t).abs();
    for (a, b) in p.xy.iter().zip(&q.xy) {
        d = d.max((a - b).abs());
    }
    d
}

pub fn planar_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(pa, pb)| (pa - pb) * (pa - pb))
        .sum::<f64>()
        .sqrt()
}

/// Horizontal length of a path (alias for [`HorizontalPath::length`];
/// mirrors the planar-projection identity).
pub fn path_length(path: &HorizontalPath) -> f64 {
    path.length()
}

/// Construct a horizontal path from `p` to `q`.
///
/// Left-translate so the start is the origin and the end is `r = p⁻¹ q`,
/// traverse the straight planar segment to `(r_x, r_y)` (which lifts with
/// zero height gain from the origin), then close the remaining height
/// deficit `r_t` with an axis-aligned square loop in the `(x_1, y_1)`
/// plane of signed area `-r_t / 4`, and translate back. The endpoint is
/// exact up to float rounding, and
/// `length <= |(r_x, r_y)| + 2 sqrt(|r_t|) <= connect_gamma() * d_K(p, q)`.
pub fn connect_points(p: &HPoint, q: &HPoint) -> Result<HorizontalPath> {
    check_same_n(p, q)?;
    let r = group_mul(&group_inv(p), q)?;
    let n = p.n();
    let origin = vec![0.0; 2 * n];
    let rxy = r.xy().to_vec();

    let mut verts: Vec<Vec<f64>> = vec![origin.clone()];
    let planar_len: f64 = rxy.iter().map(|c| c * c).sum::<f64>().sqrt();
    if planar_len > 0.0 {
        verts.push(rxy.clone());
    }

    if r.t() != 0.0 {
        // Square of side sqrt(|r_t|)/2 encloses area |r_t|/4; a closed loop
        // of signed area A lifts by -4A, so orientation follows sign(r_t).
        let side = r.t().abs().sqrt() / 2.0;
        let base = verts[verts.len() - 1].clone();
        let corner = |dx: f64, dy: f64| {
            let mut v = base.clone();
            v[0] += dx;
            v[1] += dy;
            v
        };
        let loop_verts = if r.t() < 0.0 {
            // Counterclockwise in the (x_1, y_1) plane: area +side², lift -4·area.
            [corner(side, 0.0), corner(side, side), corner(0.0, side), corner(0.0, 0.0)]
        } else {
            [corner(0.0, side), corner(side, side), corner(side, 0.0), corner(0.0, 0.0)]
        };
        verts.extend(loop_verts);
    }

    // Translate the planar polyline back; the lift of the translated
    // polyline from p.t() is exactly the left-translate of the path.
    for v in &mut verts {
        for (vi, pi) in v.iter_mut().zip(p.xy()) {
            *vi += pi;
        }
    }
    HorizontalPath::new(verts, p.t())
}

/// Measured group-arithmetic audit over seeded random tuples: group
/// axioms, left invariance, dilation homogeneity, quadrature cross-check
/// of the exact lift, and the connection's length/metric ratio.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GroupAuditReport {
    pub tuples: usize,
    /// worst coordinate error of p * p^{-1} relative to scale
    pub max_inverse_error: f64,
    /// worst relative associativity defect (coordinatewise)
    pub max_associativity_error: f64,
    /// worst relative left-invariance defect of d_K
    pub max_left_invariance_error: f64,
    /// worst relative dilation-homogeneity defect of d_K
    pub max_dilation_error: f64,
    /// worst |closed-form lift - 128-step quadrature|
    pub max_lift_quadrature_error: f64,
    /// worst connect_points endpoint coordinate error
    pub max_endpoint_error: f64,
    /// measured sup of length / d_K over the connections
    pub gamma_measured: f64,
    /// the recorded constant the measurement must stay below
    pub gamma_bound: f64,
    pub ok: bool,
}

/// Run the arithmetic audit at `tuples` random samples (n = 1).
pub fn group_audit(seed: u64, tuples: usize) -> GroupAuditReport {
    use rand::Rng;
    let mut rng = crate::rng::stream_rng(seed, 0);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let xy: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t = rng.gen_range(-5.0..5.0);
        HPoint::new(xy, t).unwrap()
    };
    let quadrature = |a: &[f64], b: &[f64]| -> f64 {
        let steps = 128;
        let mut acc = 0.0;
        for k in 0..steps {
            let u = (k as f64 + 0.5) / steps as f64;
            let x = a[0] + u * (b[0] - a[0]);
            let y = a[1] + u * (b[1] - a[1]);
            acc += 2.0 * (y * (b[0] - a[0]) - x * (b[1] - a[1])) / steps as f64;
        }
        acc
    };
    let mut rep = GroupAuditReport {
        tuples,
        max_inverse_error: 0.0,
        max_associativity_error: 0.0,
        max_left_invariance_error: 0.0,
        max_dilation_error: 0.0,
        max_lift_quadrature_error: 0.0,
        max_endpoint_error: 0.0,
        gamma_measured: 0.0,
        gamma_bound: connect_gamma(),
        ok: false,
    };
    for _ in 0..tuples {
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let g = draw(&mut rng);

        let z = group_mul(&p, &group_inv(&p)).unwrap();
        rep.max_inverse_error = rep
            .max_inverse_error
            .max(coord_dist(&z, &HPoint::origin(1)) / (1.0 + p.t().abs()));

        let l = group_mul(&group_mul(&g, &p).unwrap(), &q).unwrap();
        let r = group_mul(&g, &group_mul(&p, &q).unwrap()).unwrap();
        rep.max_associativity_error = rep
            .max_associativity_error
            .max(coord_dist(&l, &r) / (1.0 + l.t().abs()));

        let d = koranyi_dist(&p, &q).unwrap();
        let dl = koranyi_dist(&group_mul(&g, &p).unwrap(), &group_mul(&g, &q).unwrap()).unwrap();
        rep.max_left_invariance_error = rep
            .max_left_invariance_error
            .max((d - dl).abs() / (1.0 + d));

        for lambda in [0.5, 2.0] {
            let dd = koranyi_dist(&p.dilate(lambda), &q.dilate(lambda)).unwrap();
            rep.max_dilation_error = rep
                .max_dilation_error
                .max((dd - lambda * d).abs() / (1.0 + lambda * d));
        }

        rep.max_lift_quadrature_error = rep.max_lift_quadrature_error.max(
            (lift_increment(p.xy(), q.xy()) - quadrature(p.xy(), q.xy())).abs()
                / (1.0 + lift_increment(p.xy(), q.xy()).abs()),
        );

        let path = connect_points(&p, &q).unwrap();
        rep.max_endpoint_error = rep.max_endpoint_error.max(coord_dist(&path.end(), &q));
        if d > 1e-12 {
            rep.gamma_measured = rep.gamma_measured.max(path.length() / d);
        }
    }
    rep.ok = rep.max_inverse_error <= 1e-12
        && rep.max_associativity_error <= 1e-12
        && rep.max_left_invariance_error <= 1e-10
        && rep.max_dilation_error <= 1e-10
        && rep.max_lift_quadrature_error <= 1e-9
        && rep.max_endpoint_error <= 1e-9
        && rep.gamma_measured <= rep.gamma_bound + 1e-9;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use crate::rng::stream_rng;
    use rand::Rng;

    fn hp(coords: &[f64]) -> HPoint {
        HPoint::from_flat(coords).unwrap()
    }

    fn random_point(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> HPoint {
        let xy: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t = rng.gen_range(-5.0..5.0);
        HPoint::new(xy, t).unwrap()
    }

    #[test]
    fn identity_and_inverse() {
        let p = hp(&[1.0, 2.0, 3.0]);
        let e = HPoint::origin(1);
        assert_eq!(group_mul(&p, &e).unwrap(), p);
        assert_eq!(group_mul(&e, &p).unwrap(), p);
        assert_eq!(group_inv(&e), e);
        assert_eq!(group_inv(&hp(&[1.0, 1.0, -2.0])), hp(&[-1.0, -1.0, 2.0]));
        let mut rng = stream_rng(11, 0);
        for _ in 0..100 {
            let p = random_point(&mut rng, 1);
            let z = group_mul(&p, &group_inv(&p)).unwrap();
            assert!(z.koranyi_norm() < 1e-12);
            assert_eq!(group_inv(&group_inv(&p)), p);
        }
    }

    #[test]
    fn group_law_twist() {
        // t = 0 + 0 + 2 (x' y - x y') = 2 (0*0 - 1*1) = -2
        let r = group_mul(&hp(&[1.0, 0.0, 0.0]), &hp(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(r, hp(&[1.0, 1.0, -2.0]));
    }

    #[test]
    fn associativity() {
        let mut rng = stream_rng(12, 0);
        for _ in 0..200 {
            let (a, b, c) = (
                random_point(&mut rng, 2),
                random_point(&mut rng, 2),
                random_point(&mut rng, 2),
            );
            let l = group_mul(&group_mul(&a, &b).unwrap(), &c).unwrap();
            let r = group_mul(&a, &group_mul(&b, &c).unwrap()).unwrap();
            let scale = 1.0 + l.t().abs();
            assert!(coord_dist(&l, &r) < 1e-12 * scale);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = hp(&[1.0, 0.0, 0.0]);
        let q = hp(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(group_mul(&p, &q).is_err());
    }

    #[test]
    fn koranyi_examples() {
        let z = HPoint::origin(1);
        let p = hp(&[3.0, 4.0, 0.0]);
        assert_abs_diff_eq!(koranyi_dist(&p, &z).unwrap(), 5.0, epsilon = 1e-12);
        let v = hp(&[0.0, 0.0, 9.0]);
        assert_abs_diff_eq!(koranyi_dist(&v, &z).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(koranyi_dist(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn koranyi_symmetry_and_triangle() {
        let mut rng = stream_rng(13, 0);
        for _ in 0..500 {
            let (a, b, c) = (
                random_point(&mut rng, 1),
                random_point(&mut rng, 1),
                random_point(&mut rng, 1),
            );
            let dab = koranyi_dist(&a, &b).unwrap();
            let dba = koranyi_dist(&b, &a).unwrap();
            assert_abs_diff_eq!(dab, dba, epsilon = 1e-10 * (1.0 + dab));
            let dac = koranyi_dist(&a, &c).unwrap();
            let dcb = koranyi_dist(&c, &b).unwrap();
            assert!(dab <= dac + dcb + 1e-10);
        }
    }

    #[test]
    fn left_invariance_and_dilation() {
        let mut rng = stream_rng(14, 0);
        for _ in 0..500 {
            let (g, p, q) = (
                random_point(&mut rng, 1),
                random_point(&mut rng, 1),
                random_point(&mut rng, 1),
            );
            let d = koranyi_dist(&p, &q).unwrap();
            let dl = koranyi_dist(&group_mul(&g, &p).unwrap(), &group_mul(&g, &q).unwrap()).unwrap();
            assert!((d - dl).abs() <= 1e-10 * (1.0 + d));
            for lambda in [0.5, 2.0, 3.7] {
                let dd = koranyi_dist(&p.dilate(lambda), &q.dilate(lambda)).unwrap();
                assert!((dd - lambda * d).abs() <= 1e-10 * (1.0 + lambda * d));
            }
        }
    }

    #[test]
    fn lift_increment_examples() {
        assert_eq!(lift_increment(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(lift_increment(&[1.0, 0.0], &[1.0, 1.0]), -2.0);
        // Closed unit square, counterclockwise: total lift -4 * area.
        let square = [
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
        ];
        let total: f64 = square.windows(2).map(|s| lift_increment(&s[0], &s[1])).sum();
        assert_eq!(total, -4.0);
    }

    /// Quadrature oracle: integrate dt = 2 Σ (y_j dx_j - x_j dy_j) along a
    /// segment with composite midpoint steps, independent of the closed form.
    fn lift_by_quadrature(a: &[f64], b: &[f64], steps: usize) -> f64 {
        let n = a.len() / 2;
        let mut acc = 0.0;
        for k in 0..steps {
            let u = (k as f64 + 0.5) / steps as f64;
            let mut integrand = 0.0;
            for j in 0..n {
                let x = a[2 * j] + u * (b[2 * j] - a[2 * j]);
                let y = a[2 * j + 1] + u * (b[2 * j + 1] - a[2 * j + 1]);
                let dx = b[2 * j] - a[2 * j];
                let dy = b[2 * j + 1] - a[2 * j + 1];
                integrand += y * dx - x * dy;
            }
            acc += 2.0 * integrand / steps as f64;
        }
        acc
    }

    #[test]
    fn lift_matches_quadrature() {
        let mut rng = stream_rng(15, 0);
        for _ in 0..200 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let exact = lift_increment(&a, &b);
            let quad = lift_by_quadrature(&a, &b, 128);
            assert!((exact - quad).abs() <= 1e-9 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn path_length_examples() {
        let seg = HorizontalPath::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]], 0.0).unwrap();
        assert_eq!(path_length(&seg), 5.0);
        let point = HorizontalPath::new(vec![vec![1.0, 1.0]], 2.0).unwrap();
        assert_eq!(path_length(&point), 0.0);
        let square = HorizontalPath::new(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![0.0, 1.0],
                vec![0.0, 0.0],
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(path_length(&square), 4.0);
        assert_eq!(square.end().t(), -4.0);
    }

    #[test]
    fn connect_examples() {
        let z = HPoint::origin(1);
        let a = hp(&[1.0, 0.0, 0.0]);
        let p = connect_points(&z, &a).unwrap();
        assert_eq!(p.segment_count(), 1);
        assert_eq!(p.length(), 1.0);
        assert!(koranyi_dist(&p.end(), &a).unwrap() < 1e-12);

        let b = hp(&[0.0, 0.0, -4.0]);
        let p = connect_points(&z, &b).unwrap();
        assert_eq!(p.length(), 4.0);
        assert!(koranyi_dist(&p.end(), &b).unwrap() < 1e-12);

        let q = hp(&[0.3, -0.7, 1.9]);
        let p = connect_points(&q, &q).unwrap();
        assert_eq!(p.length(), 0.0);
        assert_eq!(p.segment_count(), 0);
    }

    #[test]
    fn connect_endpoint_and_gamma_bound() {
        let gamma = connect_gamma();
        let mut rng = stream_rng(16, 0);
        let mut worst_ratio: f64 = 0.0;
        for _ in 0..10_000 {
            let p = random_point(&mut rng, 1);
            let q = random_point(&mut rng, 1);
            let path = connect_points(&p, &q).unwrap();
            assert!(coord_dist(&path.start(), &p) == 0.0);
            assert!(coord_dist(&path.end(), &q) <= 1e-9);
            let d = koranyi_dist(&p, &q).unwrap();
            if d > 1e-12 {
                worst_ratio = worst_ratio.max(path.length() / d);
            }
        }
        assert!(worst_ratio <= gamma + 1e-9, "measured {worst_ratio} > gamma {gamma}");
        // The bound is nearly attained, so gamma is not slack.
        assert!(worst_ratio > 0.9 * gamma);
    }

    #[test]
    fn koranyi_height_term_bound() {
        // |t-term|^{1/2} <= d_K exactly, by definition of the gauge.
        let mut rng = stream_rng(17, 0);
        let mut measured: f64 = 0.0;
        for _ in 0..2000 {
            let p = random_point(&mut rng, 1);
            let q = random_point(&mut rng, 1);
            let r = group_mul(&group_inv(&q), &p).unwrap();
            let d = koranyi_dist(&p, &q).unwrap();
            if d > 1e-12 {
                measured = measured.max(r.t().abs().sqrt() / d);
            }
        }
        assert!(measured <= 1.0 + 1e-12);
    }

    #[test]
    fn group_audit_passes() {
        let rep = group_audit(99, 2000);
        assert!(rep.ok, "{rep:?}");
        assert!(rep.gamma_measured > 2.0);
    }

    #[test]
    fn path_serde_roundtrip_and_cross_check() {
        let path = connect_points(&hp(&[0.2, 0.4, -1.0]), &hp(&[1.0, -0.3, 2.0])).unwrap();
        let json = serde_json::to_string(&path).unwrap();
        let back: HorizontalPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, path);

        // Corrupting lifted_t must fail the cross-check on load.
        let mut val: serde_json::Value = serde_json::from_str(&json).unwrap();
        val["lifted_t"][1] = serde_json::json!(999.0);
        assert!(serde_json::from_value::<HorizontalPath>(val).is_err());
    }

    #[test]
    fn point_at_arclength_is_exact_on_vertices() {
        let path = connect_points(&HPoint::origin(1), &hp(&[1.0, 1.0, 3.0])).unwrap();
        let cum = path.cumulative_lengths();
        for (i, s) in cum.iter().enumerate() {
            let p = path.point_at_arclength(*s);
            assert!(planar_dist(p.xy(), &path.vertices()[i]) < 1e-12);
            assert!((p.t() - path.lifted_t()[i]).abs() < 1e-12);
        }
    }

    proptest! {
        /// Reversing a segment negates its lift increment.
        #[test]
        fn reversal_negates_lift(ax in -3.0..3.0f64, ay in -3.0..3.0f64,
                                 bx in -3.0..3.0f64, by in -3.0..3.0f64) {
            let a = [ax, ay];
            let b = [bx, by];
            prop_assert!((lift_increment(&a, &b) + lift_increment(&b, &a)).abs() < 1e-12);
        }

        /// Total lift of a closed planar polygon equals -4 times its
        /// shoelace signed area.
        #[test]
        fn closed_polygon_green_oracle(pts in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 3..10)) {
            let mut poly: Vec<Vec<f64>> = pts.iter().map(|(x, y)| vec![*x, *y]).collect();
            poly.push(poly[0].clone());
            let total: f64 = poly.windows(2).map(|s| lift_increment(&s[0], &s[1])).sum();
            let shoelace: f64 = 0.5 * poly.windows(2)
                .map(|s| s[0][0] * s[1][1] - s[1][0] * s[0][1])
                .sum::<f64>();
            prop_assert!((total + 4.0 * shoelace).abs() < 1e-9);
        }
    }
}
