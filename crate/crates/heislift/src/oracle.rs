//! Target-space abstraction: distance and Lipschitz connectivity fills.
//!
//! Shipped targets are Euclidean space (fills for every sphere dimension)
//! and the Heisenberg group (fills for k = 0 only, via the constructive
//! horizontal connection). Higher-dimensional Heisenberg fills are
//! declared unsupported rather than approximated.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heis::{self, HPoint, HorizontalPath};
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    Euclidean { dim: usize },
    Heisenberg { n: usize },
}

impl TargetKind {
    pub fn name(&self) -> String {
        match self {
            TargetKind::Euclidean { dim } => format!("euclidean({dim})"),
            TargetKind::Heisenberg { n } => format!("heisenberg({n})"),
        }
    }
}

/// A target space together with the connectivity constant `gamma` its
/// fills achieve. The constant is recorded at construction and every fill
/// is checked against it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpace {
    pub kind: TargetKind,
    pub gamma: f64,
}

impl TargetSpace {
    /// Euclidean target. The default gamma covers barycentric cone fills
    /// on the simplex shapes produced by the cube subdivision for m <= 3;
    /// the achieved constants are measured in the test suite.
    pub fn euclidean(dim: usize) -> Self {
        TargetSpace {
            kind: TargetKind::Euclidean { dim },
            gamma: 2.5,
        }
    }

    /// Heisenberg target. Gamma is the exact constant of the
    /// segment-plus-square-loop connection.
    pub fn heisenberg(n: usize) -> Self {
        TargetSpace {
            kind: TargetKind::Heisenberg { n },
            gamma: heis::connect_gamma(),
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Dimension of a target point's coordinate vector.
    pub fn point_dim(&self) -> usize {
        match self.kind {
            TargetKind::Euclidean { dim } => dim,
            TargetKind::Heisenberg { n } => 2 * n + 1,
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.point_dim() {
            return Err(Error::DimensionMismatch {
                module: "metric_oracle",
                expected: self.point_dim(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Distance in the target metric: Euclidean norm or Korányi distance.
    pub fn dist(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_point(a)?;
        self.check_point(b)?;
        match self.kind {
            TargetKind::Euclidean { .. } => {
                Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
            TargetKind::Heisenberg { .. } => {
                let p = HPoint::from_flat(a)?;
                let q = HPoint::from_flat(b)?;
                heis::koranyi_dist(&p, &q)
            }
        }
    }

    /// Scale a target point: plain scaling for Euclidean targets, the
    /// anisotropic dilation `(x, y, t) -> (λx, λy, λ²t)` for Heisenberg.
    pub fn scale_point(&self, p: &[f64], lambda: f64) -> Result<Vec<f64>> {
        self.check_point(p)?;
        match self.kind {
            TargetKind::Euclidean { .. } => Ok(p.iter().map(|c| lambda * c).collect()),
            TargetKind::Heisenberg { .. } => Ok(HPoint::from_flat(p)?.dilate(lambda).to_flat()),
        }
    }

    /// Fill a (k+1)-cell from boundary data on its sphere `∂cell ≅ S^k`.
    ///
    /// `cell_vertices` are the k+2 simplex vertices in the domain and
    /// `vertex_values` their assigned target points; `l_bd` is the
    /// Lipschitz constant of the boundary map. Euclidean targets get the
    /// barycentric cone over the cell barycenter (whose value is the mean
    /// of the vertex values); the Heisenberg target supports only k = 0,
    /// where the fill is the horizontal connection of the two endpoint
    /// values at constant planar speed.
    pub fn fill_sphere(
        &self,
        k: usize,
        cell_vertices: &[Vec<f64>],
        vertex_values: &[Vec<f64>],
        l_bd: f64,
    ) -> Result<CellMap> {
        if cell_vertices.len() != k + 2 || vertex_values.len() != k + 2 {
            return Err(Error::invalid(
                "metric_oracle",
                format!(
                    "filling a {}-cell needs {} vertices/values, got {}/{}",
                    k + 1,
                    k + 2,
                    cell_vertices.len(),
                    vertex_values.len()
                ),
            ));
        }
        for v in vertex_values {
            self.check_point(v)?;
        }
        match self.kind {
            TargetKind::Euclidean { .. } => {
                let lip = affine_lipschitz(cell_vertices, vertex_values);
                let cell = CellMap::Affine {
                    values: vertex_values.to_vec(),
                    lip_bound: lip,
                };
                self.check_fill_bound(&cell, l_bd)?;
                Ok(cell)
            }
            TargetKind::Heisenberg { .. } => {
                if k != 0 {
                    return Err(Error::UnsupportedFill {
                        kind: self.kind.name(),
                        k,
                    });
                }
                let a = HPoint::from_flat(&vertex_values[0])?;
                let b = HPoint::from_flat(&vertex_values[1])?;
                let path = heis::connect_points(&a, &b)?;
                let edge_len = dist_eucl(&cell_vertices[0], &cell_vertices[1]);
                let lip = if edge_len > 0.0 { path.length() / edge_len } else { 0.0 };
                let cum = path.cumulative_lengths();
                let cell = CellMap::EdgePath {
                    endpoints: [vertex_values[0].clone(), vertex_values[1].clone()],
                    path,
                    cum,
                    lip_bound: lip,
                };
                self.check_fill_bound(&cell, l_bd)?;
                Ok(cell)
            }
        }
    }

    fn check_fill_bound(&self, cell: &CellMap, l_bd: f64) -> Result<()> {
        let bound = self.gamma * l_bd * (1.0 + 1e-6) + 1e-12;
        if cell.lip_bound() > bound {
            return Err(Error::invalid(
                "metric_oracle",
                format!(
                    "fill constant {} exceeds gamma * L_bd = {}",
                    cell.lip_bound(),
                    bound
                ),
            ));
        }
        Ok(())
    }
}

fn dist_eucl(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Lipschitz constant of the affine interpolant of `values` over the
/// simplex `vertices`: the operator norm of the affine map restricted to
/// the simplex's affine hull.
fn affine_lipschitz(vertices: &[Vec<f64>], values: &[Vec<f64>]) -> f64 {
    let r = vertices.len() - 1;
    if r == 0 {
        return 0.0;
    }
    let m = vertices[0].len();
    let d = values[0].len();
    let dmat = DMatrix::from_fn(m, r, |i, j| vertices[j + 1][i] - vertices[0][i]);
    let fmat = DMatrix::from_fn(d, r, |i, j| values[j + 1][i] - values[0][i]);
    // |F w| / |D w| maximized over w: with D = QR, equals ||F R^{-1}||_2.
    let qr = dmat.qr();
    let rmat = qr.r();
    let rinv = match rmat.try_inverse() {
        Some(inv) => inv,
        None => return f64::INFINITY, // degenerate cell
    };
    (fmat * rinv).svd(false, false).singular_values[0]
}

/// A map on one simplicial cell, evaluated in barycentric coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "snake_case")]
pub enum CellMap {
    /// Barycentric interpolation of vertex values (Euclidean targets).
    Affine { values: Vec<Vec<f64>>, lip_bound: f64 },
    /// An edge carrying a horizontal path at constant planar speed
    /// (Heisenberg targets, k = 1 cells of the skeleton).
    EdgePath {
        endpoints: [Vec<f64>; 2],
        path: HorizontalPath,
        cum: Vec<f64>,
        lip_bound: f64,
    },
}

impl CellMap {
    /// Recorded Lipschitz bound of the evaluation.
    pub fn lip_bound(&self) -> f64 {
        match self {
            CellMap::Affine { lip_bound, .. } => *lip_bound,
            CellMap::EdgePath { lip_bound, .. } => *lip_bound,
        }
    }

    /// Number of vertices of the supporting cell.
    pub fn vertex_count(&self) -> usize {
        match self {
            CellMap::Affine { values, .. } => values.len(),
            CellMap::EdgePath { .. } => 2,
        }
    }

    /// Evaluate at barycentric coordinates (must sum to 1).
    ///
    /// Evaluation at a cell vertex returns the assigned vertex value
    /// exactly.
    pub fn eval(&self, bary: &[f64]) -> Vec<f64> {
        match self {
            CellMap::Affine { values, .. } => {
                debug_assert_eq!(bary.len(), values.len());
                // Exact at vertices.
                if let Some(i) = bary.iter().position(|l| *l == 1.0) {
                    return values[i].clone();
                }
                let d = values[0].len();
                let mut out = vec![0.0; d];
                for (l, v) in bary.iter().zip(values) {
                    for (o, c) in out.iter_mut().zip(v) {
                        *o += l * c;
                    }
                }
                out
            }
            CellMap::EdgePath {
                endpoints,
                path,
                cum,
                ..
            } => {
                debug_assert_eq!(bary.len(), 2);
                let s = bary[1];
                if s <= 0.0 {
                    return endpoints[0].clone();
                }
                if s >= 1.0 {
                    return endpoints[1].clone();
                }
                let total = cum[cum.len() - 1];
                path.point_at_arclength(s * total).to_flat()
            }
        }
    }
}

/// Measured Lipschitz constant of a cell map over random barycentric
/// pairs, in the target metric, relative to domain positions given by
/// `cell_vertices`.
pub fn measured_lipschitz(
    cell: &CellMap,
    space: &TargetSpace,
    cell_vertices: &[Vec<f64>],
    pairs: usize,
    seed: u64,
) -> f64 {
    let r = cell_vertices.len();
    let mut rng = stream_rng(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let a = random_barycentric(&mut rng, r);
        let b = random_barycentric(&mut rng, r);
        let pa = barycentric_point(cell_vertices, &a);
        let pb = barycentric_point(cell_vertices, &b);
        let dx = dist_eucl(&pa, &pb);
        if dx < 1e-12 {
            continue;
        }
        let dv = space.dist(&cell.eval(&a), &cell.eval(&b)).unwrap_or(f64::INFINITY);
        worst = worst.max(dv / dx);
    }
    worst
}

fn random_barycentric(rng: &mut rand_chacha::ChaCha8Rng, r: usize) -> Vec<f64> {
    // Exponential spacings give the uniform distribution on the simplex.
    let mut v: Vec<f64> = (0..r)
        .map(|_| -f64::ln(rng.gen_range(f64::MIN_POSITIVE..1.0)))
        .collect();
    let s: f64 = v.iter().sum();
    for c in &mut v {
        *c /= s;
    }
    v
}

fn barycentric_point(vertices: &[Vec<f64>], bary: &[f64]) -> Vec<f64> {
    let m = vertices[0].len();
    let mut out = vec![0.0; m];
    for (l, v) in bary.iter().zip(vertices) {
        for (o, c) in out.iter_mut().zip(v) {
            *o += l * c;
        }
    }
    out
}

/// Solve for barycentric coordinates of `x` in the simplex `vertices`.
pub fn barycentric_coords(vertices: &[Vec<f64>], x: &[f64]) -> Option<Vec<f64>> {
    let r = vertices.len() - 1;
    let m = vertices[0].len();
    let dmat = DMatrix::from_fn(m, r, |i, j| vertices[j + 1][i] - vertices[0][i]);
    let rhs = DVector::from_fn(m, |i, _| x[i] - vertices[0][i]);
    let sol = dmat.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let mut bary = Vec::with_capacity(r + 1);
    bary.push(1.0 - sol.iter().sum::<f64>());
    bary.extend(sol.iter().copied());
    Some(bary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dist_dispatch() {
        let e2 = TargetSpace::euclidean(2);
        assert_eq!(e2.dist(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        let h1 = TargetSpace::heisenberg(1);
        let p = [0.4, -0.2, 1.0];
        assert_eq!(h1.dist(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(h1.dist(&[0.0, 0.0, 9.0], &[0.0, 0.0, 0.0]).unwrap(), 3.0, epsilon = 1e-12);
        assert!(h1.dist(&[0.0, 0.0], &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn euclidean_edge_fill_is_linear_interpolation() {
        let e1 = TargetSpace::euclidean(1);
        let verts = [vec![0.0, 0.0], vec![2.0, 0.0]];
        let vals = [vec![0.0], vec![1.0]];
        let cell = e1.fill_sphere(0, &verts, &vals, 0.5).unwrap();
        assert_abs_diff_eq!(cell.lip_bound(), 0.5, epsilon = 1e-12);
        assert_eq!(cell.eval(&[1.0, 0.0]), vec![0.0]);
        assert_eq!(cell.eval(&[0.0, 1.0]), vec![1.0]);
        assert_abs_diff_eq!(cell.eval(&[0.5, 0.5])[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn heisenberg_square_loop_fill() {
        let h1 = TargetSpace::heisenberg(1);
        let verts = [vec![0.0, 0.0], vec![1.0, 0.0]];
        let vals = [vec![0.0, 0.0, 0.0], vec![0.0, 0.0, -4.0]];
        let l_bd = h1.dist(&vals[0], &vals[1]).unwrap(); // d_K = sqrt(2)... gauge (16)^{1/4} = 2
        let cell = h1.fill_sphere(0, &verts, &vals, l_bd).unwrap();
        match &cell {
            CellMap::EdgePath { path, .. } => assert_eq!(path.length(), 4.0),
            _ => panic!("expected edge path"),
        }
        assert_eq!(cell.eval(&[1.0, 0.0]), vals[0]);
        assert_eq!(cell.eval(&[0.0, 1.0]), vals[1]);
    }

    #[test]
    fn heisenberg_higher_fill_unsupported() {
        let h1 = TargetSpace::heisenberg(1);
        let verts = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let vals = [vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]];
        match h1.fill_sphere(1, &verts, &vals, 1.0) {
            Err(Error::UnsupportedFill { kind, k }) => {
                assert_eq!(kind, "heisenberg(1)");
                assert_eq!(k, 1);
            }
            other => panic!("expected UnsupportedFill, got {other:?}"),
        }
    }

    #[test]
    fn fill_restricted_to_boundary_reproduces_it() {
        let h1 = TargetSpace::heisenberg(1);
        let verts = [vec![0.2, 0.4], vec![1.3, -0.5]];
        let vals = [vec![0.1, 0.2, 0.3], vec![-0.4, 0.9, -1.1]];
        let l_bd = h1.dist(&vals[0], &vals[1]).unwrap() / dist_eucl(&verts[0], &verts[1]);
        let cell = h1.fill_sphere(0, &verts, &vals, l_bd).unwrap();
        assert_eq!(cell.eval(&[1.0, 0.0]), vals[0]);
        assert_eq!(cell.eval(&[0.0, 1.0]), vals[1]);
        // Interior evaluation approaches the endpoints continuously.
        let near_end = cell.eval(&[1e-9, 1.0 - 1e-9]);
        assert!(h1.dist(&near_end, &vals[1]).unwrap() < 1e-6);
    }

    #[test]
    fn euclidean_constant_fill_is_constant() {
        let e3 = TargetSpace::euclidean(3);
        let verts = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let c = vec![0.3, -0.4, 0.5];
        let vals = [c.clone(), c.clone(), c.clone()];
        let cell = e3.fill_sphere(1, &verts, &vals, 0.0).unwrap();
        assert_eq!(cell.lip_bound(), 0.0);
        assert_eq!(cell.eval(&[0.2, 0.3, 0.5]), c);
    }

    #[test]
    fn heisenberg_fill_is_dilation_equivariant() {
        let h1 = TargetSpace::heisenberg(1);
        let verts = [vec![0.0, 0.0], vec![1.0, 0.0]];
        let vals = [vec![0.2, -0.3, 0.7], vec![-0.5, 0.8, -0.2]];
        let l_bd = h1.dist(&vals[0], &vals[1]).unwrap();
        let cell = h1.fill_sphere(0, &verts, &vals, l_bd).unwrap();
        let lambda = 1.7;
        let dvals = [
            h1.scale_point(&vals[0], lambda).unwrap(),
            h1.scale_point(&vals[1], lambda).unwrap(),
        ];
        let dcell = h1.fill_sphere(0, &verts, &dvals, lambda * l_bd).unwrap();
        for s in [0.0, 0.17, 0.5, 0.83, 1.0] {
            let a = h1.scale_point(&cell.eval(&[1.0 - s, s]), lambda).unwrap();
            let b = dcell.eval(&[1.0 - s, s]);
            let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max);
            assert!(worst <= 1e-9, "s={s} diff={worst}");
        }
    }

    #[test]
    fn measured_lipschitz_below_recorded_bound() {
        let h1 = TargetSpace::heisenberg(1);
        let verts = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let vals = [vec![0.4, 0.1, -0.9], vec![-0.3, 0.6, 1.2]];
        let l_bd = h1.dist(&vals[0], &vals[1]).unwrap() / dist_eucl(&verts[0], &verts[1]);
        let cell = h1.fill_sphere(0, &verts, &vals, l_bd).unwrap();
        let measured = measured_lipschitz(&cell, &h1, &verts, 1000, 42);
        assert!(measured <= cell.lip_bound() * (1.0 + 1e-9));

        let e2 = TargetSpace::euclidean(2);
        let verts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.5]];
        let vals = [vec![0.0, 0.0], vec![1.0, -0.5], vec![0.25, 0.8]];
        let cell = e2.fill_sphere(1, &verts, &vals, 2.0).unwrap();
        let measured = measured_lipschitz(&cell, &e2, &verts, 1000, 43);
        assert!(measured <= cell.lip_bound() * (1.0 + 1e-9));
    }
}
