//! Distance oracle for a compact point cloud `Z` and the dyadic Whitney
//! cube decomposition of its complement, restricted to cubes meeting a
//! bounded box `omega`.
//!
//! A cube is accepted when `diam(Q) <= d(Q, Z)` while its parent violates
//! the same test; the parent's failure forces `d(Q, Z) < 4 diam(Q)`, so
//! accepted cubes satisfy the two-sided Whitney inequality with constants
//! 1 and 4 without any tolerance. Cubes still failing at the maximum
//! generation are reported as unresolved; they hug `Z` and are excluded
//! from the complex.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Axis-aligned closed box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoxRegion {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::invalid("whitney", "box min/max dimension mismatch"));
        }
        if min.iter().zip(&max).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("whitney", "box must have positive extent"));
        }
        Ok(BoxRegion { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn contains_strict(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (lo, hi))| x > lo && x < hi)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (lo, hi))| x >= lo && x <= hi)
    }

    pub fn diameter(&self) -> f64 {
        self.min
            .iter()
            .zip(&self.max)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

// ---------------------------------------------------------------------------
// Compact set with exact nearest-site queries
// ---------------------------------------------------------------------------

/// A compact set modeled as a finite point cloud with a kd-tree for
/// nearest-neighbor queries. Ties are broken by the lowest site index, so
/// witnesses are deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactSet {
    m: usize,
    points: Vec<Vec<f64>>,
    #[serde(skip)]
    tree: Option<KdTree>,
}

impl PartialEq for CompactSet {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.points == other.points
    }
}

impl CompactSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("whitney", "compact set needs at least one point"));
        }
        let m = points[0].len();
        if m == 0 || points.iter().any(|p| p.len() != m) {
            return Err(Error::invalid("whitney", "ragged or empty site coordinates"));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("whitney", "non-finite site coordinate"));
        }
        let tree = KdTree::build(&points);
        Ok(CompactSet {
            m,
            points,
            tree: Some(tree),
        })
    }

    /// Rebuild the spatial index (needed after deserialization).
    pub fn ensure_index(&mut self) {
        if self.tree.is_none() {
            self.tree = Some(KdTree::build(&self.points));
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Index of a nearest site (lowest index among ties) and the squared
    /// distance to it.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        match &self.tree {
            Some(tree) => tree.nearest(&self.points, x),
            None => brute_nearest(&self.points, x),
        }
    }

    /// Distance to the set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.nearest(x).1.sqrt()
    }

    /// Exact distance from the set to a closed box, as a minimum of
    /// point-to-box distances over the cloud.
    pub fn distance_to_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.sq_distance_to_box(lo, hi).sqrt()
    }

    pub fn sq_distance_to_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for p in &self.points {
            let mut d2 = 0.0;
            for i in 0..self.m {
                let c = p[i].clamp(lo[i], hi[i]);
                d2 += (p[i] - c) * (p[i] - c);
            }
            best = best.min(d2);
        }
        best
    }
}

pub(crate) fn brute_nearest(points: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

#[derive(Debug, Clone)]
struct KdNode {
    point: usize,
    split_dim: usize,
    left: i32,
    right: i32,
}

#[derive(Debug, Clone)]
struct KdTree {
    nodes: Vec<KdNode>,
    root: i32,
}

impl KdTree {
    fn build(points: &[Vec<f64>]) -> KdTree {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let m = points[0].len();
        let root = Self::build_rec(points, &mut idx[..], 0, m, &mut nodes);
        KdTree { nodes, root }
    }

    fn build_rec(
        points: &[Vec<f64>],
        idx: &mut [usize],
        depth: usize,
        m: usize,
        nodes: &mut Vec<KdNode>,
    ) -> i32 {
        if idx.is_empty() {
            return -1;
        }
        let dim = depth % m;
        // Sort by (coordinate, index) so the median choice is deterministic.
        idx.sort_by(|a, b| {
            points[*a][dim]
                .partial_cmp(&points[*b][dim])
                .unwrap()
                .then(a.cmp(b))
        });
        let mid = idx.len() / 2;
        let point = idx[mid];
        let node_id = nodes.len() as i32;
        nodes.push(KdNode {
            point,
            split_dim: dim,
            left: -1,
            right: -1,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, depth + 1, m, nodes);
        let right = Self::build_rec(points, hi, depth + 1, m, nodes);
        nodes[node_id as usize].left = left;
        nodes[node_id as usize].right = right;
        node_id
    }

    fn nearest(&self, points: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, points, x, &mut best);
        best
    }

    fn search(&self, node: i32, points: &[Vec<f64>], x: &[f64], best: &mut (usize, f64)) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &points[n.point];
        let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 < best.1 || (d2 == best.1 && n.point < best.0) {
            *best = (n.point, d2);
        }
        let diff = x[n.split_dim] - p[n.split_dim];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.search(near, points, x, best);
        // Visit the far side on exact ties too, so the lowest-index witness wins.
        if diff * diff <= best.1 {
            self.search(far, points, x, best);
        }
    }
}

// ---------------------------------------------------------------------------
// Dyadic cubes
// ---------------------------------------------------------------------------

/// A dyadic cube within the root cube: generation `k` and integer lattice
/// coordinates in `[0, 2^k)^m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WhitneyCube {
    pub generation: u32,
    pub lattice: Vec<i64>,
}

/// Result of [`decompose`]: the root cube frame plus the accepted and
/// unresolved cube lists in canonical `(generation, lattice)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub m: usize,
    pub root_corner: Vec<f64>,
    pub root_side: f64,
    pub max_generation: u32,
    pub cubes: Vec<WhitneyCube>,
    pub unresolved: Vec<WhitneyCube>,
}

impl Decomposition {
    pub fn side(&self, generation: u32) -> f64 {
        self.root_side / (1u64 << generation) as f64
    }

    /// Closed box of a cube in world coordinates.
    pub fn cube_box(&self, cube: &WhitneyCube) -> (Vec<f64>, Vec<f64>) {
        let s = self.side(cube.generation);
        let lo: Vec<f64> = cube
            .lattice
            .iter()
            .zip(&self.root_corner)
            .map(|(l, c)| c + *l as f64 * s)
            .collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + s).collect();
        (lo, hi)
    }

    /// Cube box in exact integer units of the finest-generation lattice.
    pub fn cube_int_box(&self, cube: &WhitneyCube) -> Vec<(i64, i64)> {
        let scale = 1i64 << (self.max_generation - cube.generation);
        cube.lattice
            .iter()
            .map(|l| (l * scale, (l + 1) * scale))
            .collect()
    }

    /// World coordinate of an integer point at the doubled finest lattice
    /// (doubled so that cell centers are integers too).
    pub fn doubled_unit(&self) -> f64 {
        self.root_side / (1u64 << (self.max_generation + 1)) as f64
    }

    pub fn diam(&self, cube: &WhitneyCube) -> f64 {
        self.side(cube.generation) * (self.m as f64).sqrt()
    }

    /// Build a reusable lattice lookup table.
    pub fn lattice_index(&self) -> HashMap<(u32, Vec<i64>), usize> {
        self.cubes
            .iter()
            .enumerate()
            .map(|(i, c)| ((c.generation, c.lattice.clone()), i))
            .collect()
    }

    /// Precompute a point-location index over the accepted cubes.
    pub fn locator(&self) -> CubeLocator {
        let mut gens: Vec<u32> = self.cubes.iter().map(|c| c.generation).collect();
        gens.sort_unstable();
        gens.dedup();
        CubeLocator {
            lookup: self.lattice_index(),
            generations: gens,
        }
    }

    /// Find the accepted cube whose closed box contains `x`, preferring
    /// the canonical (lowest-index) one on shared boundaries.
    pub fn cube_containing(&self, loc: &CubeLocator, x: &[f64]) -> Option<usize> {
        let mut best: Option<usize> = None;
        let mut lattice = vec![0i64; self.m];
        for &g in &loc.generations {
            let side = self.side(g);
            let cells = 1i64 << g;
            // The point may sit on a lattice plane; check both adjacent
            // cells per axis.
            let bases: Vec<i64> = (0..self.m)
                .map(|i| ((x[i] - self.root_corner[i]) / side).floor() as i64)
                .collect();
            'cand: for mask in 0..(1usize << self.m) {
                for i in 0..self.m {
                    let l = bases[i] - ((mask >> i) & 1) as i64;
                    if !(0..cells).contains(&l) {
                        continue 'cand;
                    }
                    lattice[i] = l;
                }
                if let Some(&idx) = loc.lookup.get(&(g, lattice.clone())) {
                    let (lo, hi) = self.cube_box(&self.cubes[idx]);
                    let inside = x
                        .iter()
                        .zip(lo.iter().zip(&hi))
                        .all(|(xev, (l, h))| *xev >= *l && *xev <= *h);
                    if inside && best.map_or(true, |b| idx < b) {
                        best = Some(idx);
                    }
                }
            }
        }
        best
    }
}

/// Point-location index over a decomposition's accepted cubes.
#[derive(Debug, Clone)]
pub struct CubeLocator {
    lookup: HashMap<(u32, Vec<i64>), usize>,
    generations: Vec<u32>,
}

impl CubeLocator {
    pub fn generations(&self) -> &[u32] {
        &self.generations
    }

    pub fn get(&self, generation: u32, lattice: &[i64]) -> Option<usize> {
        // Key by (gen, lattice) without allocating when possible.
        self.lookup.get(&(generation, lattice.to_vec())).copied()
    }
}

/// Smallest power-of-two side `s` with `s >= (4/3) * extent`, giving the
/// root cube a margin of at least `s/8` around `omega` on every axis.
fn root_side_for(extent: f64) -> f64 {
    let target = extent * 4.0 / 3.0;
    let mut s = 1.0f64;
    while s < target {
        s *= 2.0;
    }
    while s * 0.5 >= target {
        s *= 0.5;
    }
    s
}

/// Whitney decomposition of the complement of `z` inside the root cube,
/// keeping cubes that intersect `omega`.
pub fn decompose(z: &CompactSet, omega: &BoxRegion, max_generation: u32) -> Result<Decomposition> {
    if z.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            module: "whitney",
            expected: omega.dim(),
            got: z.dim(),
        });
    }
    for i in 0..z.len() {
        if !omega.contains_strict(z.point(i)) {
            return Err(Error::invalid(
                "whitney",
                format!("site {i} is not strictly inside omega"),
            ));
        }
    }
    let m = omega.dim();
    let extent = omega
        .min
        .iter()
        .zip(&omega.max)
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max);
    let root_side = root_side_for(extent);
    let center = omega.center();
    let root_corner: Vec<f64> = center.iter().map(|c| c - root_side / 2.0).collect();

    let mut dec = Decomposition {
        m,
        root_corner,
        root_side,
        max_generation,
        cubes: Vec::new(),
        unresolved: Vec::new(),
    };

    let mut stack: Vec<WhitneyCube> = vec![WhitneyCube {
        generation: 0,
        lattice: vec![0; m],
    }];
    while let Some(cube) = stack.pop() {
        let (lo, hi) = dec.cube_box(&cube);
        let meets_omega = lo
            .iter()
            .zip(hi.iter())
            .zip(omega.min.iter().zip(&omega.max))
            .all(|((l, h), (omin, omax))| *l <= *omax && *h >= *omin);
        let side = dec.side(cube.generation);
        // diam(Q) <= d(Q, Z), compared in squares: both sides exact dyadics
        // up to the float rounding of the site distances.
        let passes = m as f64 * side * side <= z.sq_distance_to_box(&lo, &hi);
        if passes {
            // The parent failed (the root never passes since Z is inside),
            // so the two-sided Whitney bound holds.
            if meets_omega {
                dec.cubes.push(cube);
            }
        } else if cube.generation == max_generation {
            if meets_omega {
                dec.unresolved.push(cube);
            }
        } else {
            for child in 0..(1usize << m) {
                let lattice: Vec<i64> = cube
                    .lattice
                    .iter()
                    .enumerate()
                    .map(|(i, l)| 2 * l + ((child >> i) & 1) as i64)
                    .collect();
                stack.push(WhitneyCube {
                    generation: cube.generation + 1,
                    lattice,
                });
            }
        }
    }
    dec.cubes.sort_by(|a, b| {
        a.generation
            .cmp(&b.generation)
            .then_with(|| a.lattice.cmp(&b.lattice))
    });
    dec.unresolved.sort_by(|a, b| {
        a.generation
            .cmp(&b.generation)
            .then_with(|| a.lattice.cmp(&b.lattice))
    });
    Ok(dec)
}

/// Verification report for a decomposition: the two-sided ratio range,
/// the neighbor bound, and the generation jump between touching cubes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhitneyReport {
    pub cube_count: usize,
    pub unresolved_count: usize,
    /// min over cubes of d(Q,Z)/diam(Q); must be >= 1.
    pub min_ratio: f64,
    /// max over cubes of d(Q,Z)/diam(Q); must be <= 4.
    pub max_ratio: f64,
    /// max number of other accepted cubes touching one cube; must be <= 12^m.
    pub max_neighbors: usize,
    /// max generation difference between touching cubes; must be <= 1.
    pub max_generation_jump: u32,
    pub ok: bool,
}

/// Check (A2)-style inequalities and the neighbor structure of a
/// decomposition against the cloud.
pub fn verify_whitney(dec: &Decomposition, z: &CompactSet) -> WhitneyReport {
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for cube in &dec.cubes {
        let (lo, hi) = dec.cube_box(cube);
        let ratio = z.distance_to_box(&lo, &hi) / dec.diam(cube);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }

    let pairs = crate::triangulate::touching_pairs(dec);
    let mut neighbor_counts = vec![0usize; dec.cubes.len()];
    let mut max_jump = 0u32;
    for &(i, j) in &pairs {
        neighbor_counts[i] += 1;
        neighbor_counts[j] += 1;
        max_jump = max_jump.max(dec.cubes[i].generation.abs_diff(dec.cubes[j].generation));
    }
    let max_neighbors = neighbor_counts.iter().copied().max().unwrap_or(0);

    let ok = min_ratio >= 1.0
        && max_ratio <= 4.0
        && max_neighbors <= 12usize.pow(dec.m as u32)
        && max_jump <= 1;
    WhitneyReport {
        cube_count: dec.cubes.len(),
        unresolved_count: dec.unresolved.len(),
        min_ratio,
        max_ratio,
        max_neighbors,
        max_generation_jump: max_jump,
        ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_sites(seed: u64, m: usize, count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, 0);
        (0..count)
            .map(|_| (0..m).map(|_| rng.gen_range(lo..hi)).collect())
            .collect()
    }

    #[test]
    fn nearest_matches_brute_force_with_ties() {
        let mut pts = random_sites(21, 3, 200, -1.0, 1.0);
        // Duplicate some points to force exact ties.
        pts.push(pts[5].clone());
        pts.push(pts[17].clone());
        let z = CompactSet::new(pts.clone()).unwrap();
        let mut rng = stream_rng(22, 0);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
            assert_eq!(z.nearest(&x), brute_nearest(&pts, &x));
        }
        // Query at a duplicated site: lowest index must win.
        assert_eq!(z.nearest(&pts[5].clone()).0, 5);
    }

    #[test]
    fn distance_is_one_lipschitz() {
        let z = CompactSet::new(random_sites(23, 2, 50, -1.0, 1.0)).unwrap();
        let mut rng = stream_rng(24, 0);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let dxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!((z.distance(&x) - z.distance(&y)).abs() <= dxy + 1e-12);
        }
    }

    #[test]
    fn single_point_origin_annuli() {
        let z = CompactSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let dec = decompose(&z, &omega, 8).unwrap();
        assert!(!dec.cubes.is_empty());
        for cube in &dec.cubes {
            let (lo, hi) = dec.cube_box(cube);
            let d = z.distance_to_box(&lo, &hi);
            let diam = dec.diam(cube);
            assert!(diam <= d + 1e-12, "lower Whitney bound violated");
            assert!(d <= 4.0 * diam + 1e-12, "upper Whitney bound violated");
        }
    }

    #[test]
    fn root_centered_site_max_gen_zero() {
        let z = CompactSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let dec = decompose(&z, &omega, 0).unwrap();
        assert!(dec.cubes.is_empty());
        assert_eq!(dec.unresolved.len(), 1);
        assert_eq!(dec.unresolved[0].generation, 0);
    }

    #[test]
    fn coverage_of_far_points() {
        let z = CompactSet::new(vec![vec![-0.4, 0.2], vec![0.5, -0.3]]).unwrap();
        let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let max_gen = 7;
        let dec = decompose(&z, &omega, max_gen).unwrap();
        let margin = dec.side(max_gen) * 4.0 * (2.0f64).sqrt();
        let boxes: Vec<_> = dec.cubes.iter().map(|c| dec.cube_box(c)).collect();
        let mut rng = stream_rng(25, 0);
        let mut tested = 0;
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.999..0.999)).collect();
            if z.distance(&x) <= margin {
                continue;
            }
            tested += 1;
            let holders = boxes
                .iter()
                .filter(|(lo, hi)| {
                    x.iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(xi, (l, h))| *xi >= *l && *xi <= *h)
                })
                .count();
            // Interior points lie in exactly one closed cube; points on a
            // shared dyadic facet lie in more.
            assert!(holders >= 1, "uncovered point {x:?}");
        }
        assert!(tested > 50_000);
    }

    #[test]
    fn site_outside_omega_rejected() {
        let z = CompactSet::new(vec![vec![2.0, 0.0]]).unwrap();
        let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(decompose(&z, &omega, 4).is_err());
    }

    #[test]
    fn determinism_and_refinement_monotonicity() {
        let z = CompactSet::new(random_sites(26, 2, 30, -0.8, 0.8)).unwrap();
        let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let a = decompose(&z, &omega, 5).unwrap();
        let b = decompose(&z, &omega, 5).unwrap();
        assert_eq!(a, b);
        let deeper = decompose(&z, &omega, 7).unwrap();
        for cube in &a.cubes {
            assert!(deeper.cubes.contains(cube), "refinement dropped a cube");
        }
        assert!(deeper.cubes.len() >= a.cubes.len());
    }

    #[test]
    fn verify_report_bounds() {
        for (seed, m) in [(27u64, 2usize), (28, 3)] {
            let sites = random_sites(seed, m, 12, -0.7, 0.7);
            let z = CompactSet::new(sites).unwrap();
            let omega = BoxRegion::new(vec![-1.0; m], vec![1.0; m]).unwrap();
            let dec = decompose(&z, &omega, 5).unwrap();
            let report = verify_whitney(&dec, &z);
            assert!(report.ok, "{report:?}");
            assert!(report.min_ratio >= 1.0);
            assert!(report.max_ratio <= 4.0);
            assert!(report.max_neighbors <= 12usize.pow(m as u32));
            assert!(report.max_generation_jump <= 1);
        }
    }

    #[test]
    fn cube_containing_finds_host() {
        let z = CompactSet::new(vec![vec![0.1, -0.2]]).unwrap();
        let omega = BoxRegion::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let dec = decompose(&z, &omega, 6).unwrap();
        let loc = dec.locator();
        let mut rng = stream_rng(29, 0);
        for _ in 0..500 {
            let x = [rng.gen_range(-0.99..0.99), rng.gen_range(-0.99..0.99)];
            if z.distance(&x) < 4.0 * dec.side(6) {
                continue;
            }
            let idx = dec.cube_containing(&loc, &x).expect("covered point");
            let (lo, hi) = dec.cube_box(&dec.cubes[idx]);
            assert!(x.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| v >= l && v <= h));
        }
    }
}
