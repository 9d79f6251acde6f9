//! The extension construction: nearest-site vertex assignment, inductive
//! Lipschitz extension over the n-skeleton via connectivity fills, radial
//! projection of each m-simplex onto its n-skeleton, and evaluation of
//! the composite field on the whole domain.
//!
//! The field is total: points within the collar radius of `Z` (and the
//! truncated region the unresolved cubes leave behind) evaluate to the
//! value at the nearest site, and points that radially project into an
//! eps-ball around a projection center evaluate to a fixed constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{CellMap, TargetSpace};
use crate::triangulate::SimplicialComplex;
use crate::whitney::{BoxRegion, CompactSet};

/// Sites with their target values and the measured Lipschitz constant of
/// the data (max pair ratio, exact for a finite site set).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryData {
    pub sites: CompactSet,
    pub values: Vec<Vec<f64>>,
    pub l_measured: f64,
}

impl BoundaryData {
    pub fn new(sites: CompactSet, values: Vec<Vec<f64>>, target: &TargetSpace) -> Result<Self> {
        if values.len() != sites.len() {
            return Err(Error::invalid(
                "extend",
                format!("{} sites but {} values", sites.len(), values.len()),
            ));
        }
        let mut l: f64 = 0.0;
        for i in 0..sites.len() {
            for j in (i + 1)..sites.len() {
                let dz: f64 = sites
                    .point(i)
                    .iter()
                    .zip(sites.point(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let dv = target.dist(&values[i], &values[j])?;
                if dz < 1e-14 {
                    if dv > 1e-12 {
                        return Err(Error::invalid(
                            "extend",
                            format!("sites {i} and {j} coincide with different values"),
                        ));
                    }
                    continue;
                }
                l = l.max(dv / dz);
            }
        }
        Ok(BoundaryData {
            sites,
            values,
            l_measured: l,
        })
    }

    /// Same sites with target values scaled by `lambda` (the anisotropic
    /// dilation for Heisenberg targets).
    pub fn scaled(&self, target: &TargetSpace, lambda: f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|v| target.scale_point(v, lambda))
            .collect::<Result<Vec<_>>>()?;
        BoundaryData::new(self.sites.clone(), values, target)
    }
}

/// The extension on the n-skeleton: per-vertex site witnesses plus cell
/// maps on every k-simplex for k = 1..=n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonMap {
    pub n: usize,
    /// site index assigned to each complex vertex
    pub vertex_site: Vec<u32>,
    /// cell_maps[k-1][simplex id] for k = 1..=n
    pub cell_maps: Vec<Vec<CellMap>>,
    /// max over n-simplices of (cell Lipschitz bound) / L
    pub c_tilde_measured: f64,
}

/// Assign to every complex vertex a nearest site (lowest index on ties).
/// The witness is exact: it comes from the same distance comparisons as
/// the brute-force minimum.
pub fn assign_vertices(cx: &SimplicialComplex, data: &BoundaryData) -> Result<Vec<u32>> {
    if data.sites.is_empty() {
        return Err(Error::invalid("extend", "empty site set"));
    }
    Ok((0..cx.vertex_count())
        .map(|v| data.sites.nearest(cx.vertex(v as u32)).0 as u32)
        .collect())
}

/// Extend the vertex data over the skeleton dimensions 1..=n by filling
/// each simplex's boundary sphere through the target's connectivity
/// oracle. Shared faces are filled once (cells are indexed by simplex
/// id). Unsupported (kind, k) pairs surface as `UnsupportedFill`.
pub fn extend_skeleton(
    cx: &SimplicialComplex,
    vertex_site: &[u32],
    data: &BoundaryData,
    target: &TargetSpace,
    n: usize,
) -> Result<SkeletonMap> {
    if n < 1 || n >= cx.m {
        return Err(Error::invalid(
            "extend",
            format!("skeleton dimension n={n} must satisfy 1 <= n < m={}", cx.m),
        ));
    }
    let value_of = |v: u32| -> &Vec<f64> { &data.values[vertex_site[v as usize] as usize] };
    let mut cell_maps: Vec<Vec<CellMap>> = Vec::with_capacity(n);
    for k in 1..=n {
        let count = cx.simplex_count(k);
        let mut maps = Vec::with_capacity(count);
        for id in 0..count as u32 {
            let tuple = cx.simplex(k, id);
            let verts: Vec<Vec<f64>> = tuple.iter().map(|&v| cx.vertex(v).to_vec()).collect();
            let vals: Vec<Vec<f64>> = tuple.iter().map(|&v| value_of(v).clone()).collect();
            // Boundary constant fed to the fill: the worst vertex-pair
            // ratio, the quantity the oracle's gamma is calibrated to.
            let mut l_bd: f64 = 0.0;
            for i in 0..tuple.len() {
                for j in (i + 1)..tuple.len() {
                    let dx: f64 = verts[i]
                        .iter()
                        .zip(&verts[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if dx > 0.0 {
                        l_bd = l_bd.max(target.dist(&vals[i], &vals[j])? / dx);
                    }
                }
            }
            maps.push(target.fill_sphere(k - 1, &verts, &vals, l_bd)?);
        }
        cell_maps.push(maps);
    }
    let c_tilde = if data.l_measured > 0.0 {
        cell_maps[n - 1]
            .iter()
            .map(|c| c.lip_bound())
            .fold(0.0f64, f64::max)
            / data.l_measured
    } else {
        0.0
    };
    Ok(SkeletonMap {
        n,
        vertex_site: vertex_site.to_vec(),
        cell_maps,
        c_tilde_measured: c_tilde,
    })
}

/// Result of radially projecting a point of an m-simplex onto the
/// n-skeleton: the target n-face (vertex tuple), barycentric coordinates
/// there, and the similar-triangles factor `diam(σ)/|x - c|` per stage.
#[derive(Debug, Clone)]
pub struct RadialProjection {
    pub face_tuple: Vec<u32>,
    pub bary: Vec<f64>,
    pub stage_factors: Vec<f64>,
}

/// Radial homogenization inside one m-simplex, on barycentric
/// coordinates. For stage dimension j from m down to n+1, the point's
/// supporting face is identified (zero coordinates drop out) and the
/// point `x = c + t (z - c)` is replaced by its radial image `z` on the
/// face boundary. Points closer than `eps_sing * diam` to a stage center
/// raise `SingularProximity`.
pub fn radial_project(
    cx: &SimplicialComplex,
    sid: u32,
    bary: &[f64],
    n: usize,
    eps_sing: f64,
    diam: f64,
) -> Result<RadialProjection> {
    let m = cx.m;
    let tuple = cx.simplex(m, sid);
    let mut lam: Vec<f64> = bary.iter().map(|l| l.max(0.0)).collect();
    let mut support: Vec<usize> = (0..lam.len()).filter(|&i| lam[i] > 0.0).collect();
    let mut factors = Vec::new();

    while support.len() > n + 1 {
        let stage = support.len() - 1; // current stage dimension
        let center = 1.0 / support.len() as f64;
        // Euclidean distance from the point to the face barycenter.
        let mut d2 = 0.0;
        for axis in 0..m {
            let mut diff = 0.0;
            for &i in &support {
                diff += (lam[i] - center) * cx.vertex(tuple[i])[axis];
            }
            d2 += diff * diff;
        }
        let dist_c = d2.sqrt();
        if dist_c < eps_sing * diam {
            return Err(Error::SingularProximity { stage });
        }
        factors.push(diam / dist_c);
        // Exit scaling: smallest t >= 1 at which a coordinate hits zero.
        let mut tstar = f64::INFINITY;
        let mut arg = usize::MAX;
        for &i in &support {
            if lam[i] < center {
                let t = center / (center - lam[i]);
                if t < tstar {
                    tstar = t;
                    arg = i;
                }
            }
        }
        if arg == usize::MAX {
            return Err(Error::SingularProximity { stage });
        }
        for &i in &support {
            lam[i] = (center + tstar * (lam[i] - center)).max(0.0);
        }
        lam[arg] = 0.0;
        support.retain(|&i| lam[i] > 0.0);
    }

    let total: f64 = support.iter().map(|&i| lam[i]).sum();
    // Pad up to an n-face with the lowest-index remaining vertices.
    let mut face: Vec<usize> = support.clone();
    let mut cursor = 0;
    while face.len() < n + 1 {
        if !face.contains(&cursor) {
            face.push(cursor);
        }
        cursor += 1;
    }
    face.sort_unstable();
    let face_tuple: Vec<u32> = face.iter().map(|&i| tuple[i]).collect();
    let out_bary: Vec<f64> = face
        .iter()
        .map(|&i| if support.contains(&i) { lam[i] / total } else { 0.0 })
        .collect();
    Ok(RadialProjection {
        face_tuple,
        bary: out_bary,
        stage_factors: factors,
    })
}

/// How a point was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalFlag {
    /// Through the simplicial construction.
    Regular,
    /// Nearest-site fallback (within the collar or in truncated cells).
    Collar,
    /// Constant policy value (radial projection hit a singular center).
    Singular,
}

/// Evaluation policies of a field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldPolicy {
    /// Relative singular-proximity threshold (fraction of simplex diameter).
    pub eps_sing: f64,
    /// Distance to Z below which evaluation falls back to the nearest site.
    pub collar_radius: f64,
}

/// The composite extension `F`: evaluable at any point of the domain box.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    complex: SimplicialComplex,
    boundary: BoundaryData,
    skeleton: SkeletonMap,
    target: TargetSpace,
    omega: BoxRegion,
    policy: FieldPolicy,
    constant_value: Vec<f64>,
    /// cached m-simplex diameters
    diams: Vec<f64>,
}

impl ExtensionField {
    /// Assemble a field. The constant value on the singular set is the
    /// value at the witness of the globally first vertex; the default
    /// collar radius is `2 sqrt(m)` finest cube sides, which covers every
    /// unresolved cube.
    pub fn new(
        complex: SimplicialComplex,
        boundary: BoundaryData,
        target: TargetSpace,
        omega: BoxRegion,
        n: usize,
        eps_sing: f64,
        collar_radius: Option<f64>,
    ) -> Result<Self> {
        if let Some(bad) = boundary
            .values
            .iter()
            .find(|v| v.len() != target.point_dim())
        {
            return Err(Error::DimensionMismatch {
                module: "extend",
                expected: target.point_dim(),
                got: bad.len(),
            });
        }
        let vertex_site = assign_vertices(&complex, &boundary)?;
        let skeleton = extend_skeleton(&complex, &vertex_site, &boundary, &target, n)?;
        let dec = complex.decomposition();
        let collar = collar_radius
            .unwrap_or_else(|| 2.0 * (dec.m as f64).sqrt() * dec.side(dec.max_generation));
        let constant_value = boundary.values[skeleton.vertex_site[0] as usize].clone();
        let diams = (0..complex.simplex_count(complex.m) as u32)
            .map(|id| complex.simplex_diameter(complex.m, id))
            .collect();
        Ok(ExtensionField {
            complex,
            boundary,
            skeleton,
            target,
            omega,
            policy: FieldPolicy {
                eps_sing,
                collar_radius: collar,
            },
            constant_value,
            diams,
        })
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn skeleton(&self) -> &SkeletonMap {
        &self.skeleton
    }

    pub fn target(&self) -> &TargetSpace {
        &self.target
    }

    pub fn omega(&self) -> &BoxRegion {
        &self.omega
    }

    pub fn policy(&self) -> &FieldPolicy {
        &self.policy
    }

    pub fn m(&self) -> usize {
        self.complex.m
    }

    pub fn l_measured(&self) -> f64 {
        self.boundary.l_measured
    }

    pub fn c_tilde(&self) -> f64 {
        self.skeleton.c_tilde_measured
    }

    /// The value `g` takes on the collar and the singular set:
    /// `L (C~ + 4)`, the trace-inequality constant.
    pub fn collar_slope_value(&self) -> f64 {
        self.boundary.l_measured * (self.skeleton.c_tilde_measured + 4.0)
    }

    pub fn simplex_diameter(&self, sid: u32) -> f64 {
        self.diams[sid as usize]
    }

    /// Evaluate `F(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.evaluate_flagged(x).map(|(v, _)| v)
    }

    /// Evaluate `F(x)` with the policy path taken.
    pub fn evaluate_flagged(&self, x: &[f64]) -> Result<(Vec<f64>, EvalFlag)> {
        if x.len() != self.complex.m {
            return Err(Error::DimensionMismatch {
                module: "extend",
                expected: self.complex.m,
                got: x.len(),
            });
        }
        if !self.omega.contains(x) {
            return Err(Error::invalid("extend", "point outside the domain box"));
        }
        let (site, d2) = self.boundary.sites.nearest(x);
        if d2.sqrt() <= self.policy.collar_radius {
            return Ok((self.boundary.values[site].clone(), EvalFlag::Collar));
        }
        let (sid, bary) = match self.complex.locate(x) {
            Ok(hit) => hit,
            Err(Error::NotCovered) => {
                // Truncated region: nearest-site policy.
                return Ok((self.boundary.values[site].clone(), EvalFlag::Collar));
            }
            Err(e) => return Err(e),
        };
        self.evaluate_in_simplex(sid, &bary)
    }

    /// Evaluate through a specific m-simplex (used by the shared-face
    /// well-definedness checks).
    pub fn evaluate_in_simplex(&self, sid: u32, bary: &[f64]) -> Result<(Vec<f64>, EvalFlag)> {
        let n = self.skeleton.n;
        let proj = match radial_project(
            &self.complex,
            sid,
            bary,
            n,
            self.policy.eps_sing,
            self.diams[sid as usize],
        ) {
            Ok(p) => p,
            Err(Error::SingularProximity { .. }) => {
                return Ok((self.constant_value.clone(), EvalFlag::Singular));
            }
            Err(e) => return Err(e),
        };
        let fid = self
            .complex
            .simplex_id(n, &proj.face_tuple)
            .ok_or_else(|| Error::Construction {
                detail: format!("n-face {:?} missing from the complex", proj.face_tuple),
            })?;
        let value = self.skeleton.cell_maps[n - 1][fid as usize].eval(&proj.bary);
        Ok((value, EvalFlag::Regular))
    }

    /// Evaluate along the segment `[a, b]` at `steps + 1` equispaced
    /// points.
    pub fn eval_on_segment(&self, a: &[f64], b: &[f64], steps: usize) -> Result<SampledPath> {
        let steps = if a == b { 0 } else { steps };
        let mut points = Vec::with_capacity(steps + 1);
        let mut flags = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let t = if steps == 0 { 0.0 } else { i as f64 / steps as f64 };
            let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
            let (v, f) = self.evaluate_flagged(&x)?;
            points.push(v);
            flags.push(f);
        }
        Ok(SampledPath { points, flags })
    }

    /// Serializable snapshot sufficient to reload and evaluate
    /// bit-identically.
    pub fn to_bundle(&self) -> FieldBundle {
        FieldBundle {
            complex: self.complex.clone(),
            boundary: self.boundary.clone(),
            skeleton: self.skeleton.clone(),
            target: self.target.clone(),
            omega: self.omega.clone(),
            policy: self.policy.clone(),
            constant_value: self.constant_value.clone(),
        }
    }

    pub fn from_bundle(bundle: FieldBundle) -> Result<Self> {
        let mut boundary = bundle.boundary;
        boundary.sites.ensure_index();
        let diams = (0..bundle.complex.simplex_count(bundle.complex.m) as u32)
            .map(|id| bundle.complex.simplex_diameter(bundle.complex.m, id))
            .collect();
        Ok(ExtensionField {
            complex: bundle.complex,
            boundary,
            skeleton: bundle.skeleton,
            target: bundle.target,
            omega: bundle.omega,
            policy: bundle.policy,
            constant_value: bundle.constant_value,
            diams,
        })
    }
}

/// Samples of `F` along a segment with their evaluation flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledPath {
    pub points: Vec<Vec<f64>>,
    pub flags: Vec<EvalFlag>,
}

/// On-disk form of a field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldBundle {
    pub complex: SimplicialComplex,
    pub boundary: BoundaryData,
    pub skeleton: SkeletonMap,
    pub target: TargetSpace,
    pub omega: BoxRegion,
    pub policy: FieldPolicy,
    pub constant_value: Vec<f64>,
}


#[cfg(test)]
mod tests {
    use super::testkit::random_instance;
    use super::*;
    use crate::rng::stream_rng;
    use crate::triangulate::{build_complex, quality_report};
    use crate::whitney::decompose;
    use rand::Rng;

    #[test]
    fn vertex_assignment_is_exact_nearest() {
        let field = random_instance(41, 2, 12, 5, TargetSpace::heisenberg(1), 1);
        let cx = field.complex();
        let sites = &field.boundary().sites;
        for v in 0..cx.vertex_count() as u32 {
            let assigned = field.skeleton().vertex_site[v as usize] as usize;
            let (brute, d2) = crate::whitney::brute_nearest(sites.points(), cx.vertex(v));
            assert_eq!(assigned, brute);
            let d2a: f64 = sites
                .point(assigned)
                .iter()
                .zip(cx.vertex(v))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert_eq!(d2a, d2);
        }
    }

    #[test]
    fn tie_breaks_to_lowest_site() {
        let z = CompactSet::new(vec![vec![0.5, 0.0], vec![-0.5, 0.0]]).unwrap();
        let (idx, _) = z.nearest(&[0.0, 0.0]);
        assert_eq!(idx, 0);
    }

    #[test]
    fn vertex_edge_ratio_bound() {
        // Per-edge ratio <= L (D2 (12 sqrt m + 1) + 1), with D2 measured.
        let field = random_instance(42, 2, 15, 6, TargetSpace::heisenberg(1), 1);
        let cx = field.complex();
        let q = quality_report(cx, Some(&field.boundary().sites), 1);
        let m = cx.m as f64;
        let c0 = q.d2_observed * (12.0 * m.sqrt() + 1.0) + 1.0;
        let l = field.l_measured();
        let data = field.boundary();
        let vs = &field.skeleton().vertex_site;
        for id in 0..cx.simplex_count(1) as u32 {
            let t = cx.simplex(1, id);
            let a = cx.vertex(t[0]);
            let b = cx.vertex(t[1]);
            let dx: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let dv = field
                .target()
                .dist(
                    &data.values[vs[t[0] as usize] as usize],
                    &data.values[vs[t[1] as usize] as usize],
                )
                .unwrap();
            assert!(
                dv <= l * c0 * dx * (1.0 + 1e-9),
                "edge {id}: ratio {} exceeds L*C0 {}",
                dv / dx,
                l * c0
            );
        }
    }

    #[test]
    fn skeleton_edges_interpolate_vertex_values() {
        let field = random_instance(43, 2, 8, 5, TargetSpace::heisenberg(1), 1);
        let cx = field.complex();
        let vs = &field.skeleton().vertex_site;
        let values = &field.boundary().values;
        for id in 0..cx.simplex_count(1) as u32 {
            let t = cx.simplex(1, id);
            let cell = &field.skeleton().cell_maps[0][id as usize];
            assert_eq!(cell.eval(&[1.0, 0.0]), values[vs[t[0] as usize] as usize]);
            assert_eq!(cell.eval(&[0.0, 1.0]), values[vs[t[1] as usize] as usize]);
        }
    }

    #[test]
    fn per_edge_constant_bounded_by_gamma() {
        let field = random_instance(44, 2, 10, 5, TargetSpace::heisenberg(1), 1);
        let cx = field.complex();
        let target = field.target();
        let vs = &field.skeleton().vertex_site;
        let values = &field.boundary().values;
        for id in 0..cx.simplex_count(1) as u32 {
            let t = cx.simplex(1, id);
            let a = cx.vertex(t[0]);
            let b = cx.vertex(t[1]);
            let edge: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let dk = target
                .dist(
                    &values[vs[t[0] as usize] as usize],
                    &values[vs[t[1] as usize] as usize],
                )
                .unwrap();
            let lip = field.skeleton().cell_maps[0][id as usize].lip_bound();
            assert!(lip * edge <= target.gamma * dk * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn euclidean_constant_data_gives_constant_field() {
        let m = 2;
        let mut rng = stream_rng(45, 0);
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let z = CompactSet::new(pts).unwrap();
        let omega = BoxRegion::new(vec![-1.0; m], vec![1.0; m]).unwrap();
        let dec = decompose(&z, &omega, 5).unwrap();
        let cx = build_complex(&dec).unwrap();
        let target = TargetSpace::euclidean(1);
        // Zero data maps to exactly zero; nonzero constants only up to
        // the drift of the barycentric sum.
        let boundary = BoundaryData::new(z.clone(), vec![vec![0.0]; 6], &target).unwrap();
        let field = ExtensionField::new(
            cx.clone(), boundary, target.clone(), omega.clone(), 1, 1e-6, None,
        ).unwrap();
        let c = vec![0.25];
        let shifted = BoundaryData::new(z, vec![c.clone(); 6], &target).unwrap();
        let field_c = ExtensionField::new(cx, shifted, target, omega, 1, 1e-6, None).unwrap();
        let mut rng = stream_rng(46, 0);
        for _ in 0..500 {
            let x = [rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95)];
            assert_eq!(field.evaluate(&x).unwrap(), vec![0.0]);
            assert!((field_c.evaluate(&x).unwrap()[0] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_projection_identity_on_skeleton_and_midpoint_example() {
        let field = random_instance(47, 2, 6, 4, TargetSpace::heisenberg(1), 1);
        let cx = field.complex();
        let sid = 0u32;
        let diam = field.simplex_diameter(sid);
        // Identity on the 1-skeleton: a point on an edge stays put.
        let proj = radial_project(cx, sid, &[0.3, 0.7, 0.0], 1, 1e-6, diam).unwrap();
        assert_eq!(proj.stage_factors.len(), 0);
        assert!((proj.bary[0] - 0.3).abs() < 1e-12 && (proj.bary[1] - 0.7).abs() < 1e-12);

        // Midpoint of [c, edge-midpoint] projects to the edge midpoint:
        // solving c + t (z - c) = x gives t = 1/2, z = the midpoint.
        let bary = [
            0.5 * (1.0 / 3.0) + 0.5 * 0.5,
            0.5 * (1.0 / 3.0) + 0.5 * 0.5,
            0.5 * (1.0 / 3.0),
        ];
        let proj = radial_project(cx, sid, &bary, 1, 1e-6, diam).unwrap();
        assert_eq!(proj.stage_factors.len(), 1);
        assert!((proj.bary[0] - 0.5).abs() < 1e-12 && (proj.bary[1] - 0.5).abs() < 1e-12);

        // The barycenter is singular.
        let center = [1.0 / 3.0; 3];
        match radial_project(cx, sid, &center, 1, 1e-6, diam) {
            Err(Error::SingularProximity { stage }) => assert_eq!(stage, 2),
            other => panic!("expected singular proximity, got {other:?}"),
        }
    }

    #[test]
    fn evaluate_at_sites_and_vertices() {
        let field = random_instance(48, 2, 10, 6, TargetSpace::heisenberg(1), 1);
        let data = field.boundary();
        for i in 0..data.sites.len() {
            let x = data.sites.point(i).to_vec();
            let (v, flag) = field.evaluate_flagged(&x).unwrap();
            assert_eq!(flag, EvalFlag::Collar);
            assert_eq!(v, data.values[i]);
        }
        // Complex vertices evaluate to their witness values.
        let cx = field.complex();
        let vs = &field.skeleton().vertex_site;
        let mut checked = 0;
        for v in (0..cx.vertex_count() as u32).step_by(3) {
            let x = cx.vertex(v).to_vec();
            if !field.omega().contains(&x) {
                continue;
            }
            let (val, flag) = field.evaluate_flagged(&x).unwrap();
            if flag == EvalFlag::Regular {
                assert_eq!(val, data.values[vs[v as usize] as usize]);
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn well_defined_on_shared_faces() {
        let field = random_instance(49, 2, 9, 5, TargetSpace::heisenberg(1), 1);
        let cx = field.complex();
        let mut incident: std::collections::HashMap<u32, Vec<u32>> = Default::default();
        for sid in 0..cx.simplex_count(2) as u32 {
            for &f in cx.simplex_facets(2, sid) {
                incident.entry(f).or_default().push(sid);
            }
        }
        let mut keys: Vec<u32> = incident.keys().copied().collect();
        keys.sort_unstable();
        let mut tested = 0;
        for f in keys {
            let sids = &incident[&f];
            if sids.len() != 2 {
                continue;
            }
            let t = cx.simplex(1, f);
            let a = cx.vertex(t[0]);
            let b = cx.vertex(t[1]);
            let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.61 * p + 0.39 * q).collect();
            let via: Vec<Vec<f64>> = sids
                .iter()
                .map(|&sid| {
                    let bary = cx.barycentric(sid, &mid);
                    field.evaluate_in_simplex(sid, &bary).unwrap().0
                })
                .collect();
            let diff: f64 = via[0]
                .iter()
                .zip(&via[1])
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-9, "facet {f}: values differ by {diff}");
            tested += 1;
            if tested > 200 {
                break;
            }
        }
        assert!(tested > 50);
    }

    #[test]
    fn trace_inequality_near_sites() {
        let field = random_instance(50, 2, 12, 6, TargetSpace::heisenberg(1), 1);
        let bound = field.collar_slope_value();
        let collar = field.policy().collar_radius;
        let mut rng = stream_rng(51, 0);
        let mut checked = 0;
        for _ in 0..10_000 {
            let x = [rng.gen_range(-0.99..0.99), rng.gen_range(-0.99..0.99)];
            let (site, d2) = field.boundary().sites.nearest(&x);
            let d = d2.sqrt();
            if d < collar || d > 10.0 * collar {
                continue;
            }
            let (v, flag) = field.evaluate_flagged(&x).unwrap();
            if flag == EvalFlag::Singular {
                continue;
            }
            let dv = field
                .target()
                .dist(&v, &field.boundary().values[site])
                .unwrap();
            assert!(
                dv <= bound * d * (1.0 + 1e-9),
                "trace ratio {} exceeds {}",
                dv / d,
                bound
            );
            checked += 1;
        }
        assert!(checked > 1000, "only {checked} samples in the trace band");
    }

    #[test]
    fn eval_on_segment_flags_and_degenerate() {
        let field = random_instance(52, 2, 8, 5, TargetSpace::heisenberg(1), 1);
        let a = [0.9, 0.9];
        let path = field.eval_on_segment(&a, &a, 10).unwrap();
        assert_eq!(path.points.len(), 1);
        let b = [-0.9, -0.85];
        let path = field.eval_on_segment(&a, &b, 64).unwrap();
        assert_eq!(path.points.len(), 65);
        assert_eq!(path.flags.len(), 65);
    }

    #[test]
    fn dilation_equivariance_of_field() {
        let target = TargetSpace::heisenberg(1);
        let field = random_instance(53, 2, 8, 5, target.clone(), 1);
        for lambda in [0.5, 2.0] {
            let scaled = field.boundary().scaled(&target, lambda).unwrap();
            let dilated = ExtensionField::new(
                field.complex().clone(),
                scaled,
                target.clone(),
                field.omega().clone(),
                1,
                field.policy().eps_sing,
                Some(field.policy().collar_radius),
            )
            .unwrap();
            let mut rng = stream_rng(54, 0);
            for _ in 0..300 {
                let x = [rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95)];
                let (a, fa) = field.evaluate_flagged(&x).unwrap();
                let (b, fb) = dilated.evaluate_flagged(&x).unwrap();
                assert_eq!(fa, fb);
                let da = target.scale_point(&a, lambda).unwrap();
                let diff: f64 = da
                    .iter()
                    .zip(&b)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max);
                assert!(diff <= 1e-8, "x={x:?} diff={diff}");
            }
        }
    }

    #[test]
    fn bundle_roundtrip_evaluates_identically() {
        let field = random_instance(55, 2, 7, 5, TargetSpace::heisenberg(1), 1);
        let json = serde_json::to_string(&field.to_bundle()).unwrap();
        let back = ExtensionField::from_bundle(serde_json::from_str(&json).unwrap()).unwrap();
        let mut rng = stream_rng(56, 0);
        for _ in 0..500 {
            let x = [rng.gen_range(-0.99..0.99), rng.gen_range(-0.99..0.99)];
            assert_eq!(field.evaluate(&x).unwrap(), back.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn heisenberg_n2_skeleton_unsupported() {
        let target = TargetSpace::heisenberg(1);
        let mut rng = stream_rng(57, 0);
        let pts: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let vals: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect())
            .collect();
        let z = CompactSet::new(pts).unwrap();
        let omega = BoxRegion::new(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let dec = decompose(&z, &omega, 3).unwrap();
        let cx = build_complex(&dec).unwrap();
        let boundary = BoundaryData::new(z, vals, &target).unwrap();
        match ExtensionField::new(cx, boundary, target, omega, 2, 1e-6, None) {
            Err(Error::UnsupportedFill { k, .. }) => assert_eq!(k, 1),
            other => panic!("expected UnsupportedFill, got {:?}", other.map(|_| ())),
        }
    }
}
