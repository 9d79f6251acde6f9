//! Simplicial subdivision of the accepted Whitney cubes.
//!
//! Every face of every cube (all dimensions) is identified by its exact
//! integer box at the finest-generation lattice. A face is *split* when a
//! retained finer cube contributes one of its same-dimension sub-boxes;
//! the triangulation of a region then recurses into the sub-boxes, and is
//! otherwise the cone of the region's boundary triangulation over its
//! center. Triangulations are memoized per box, so faces shared between
//! cubes are subdivided once and the complex is conforming by
//! construction. Edge midpoints of a coarse cube coincide with fine-cube
//! vertices, which is what makes the shared subdivisions match.
//!
//! Vertices are deduplicated by exact integer coordinates at the doubled
//! finest lattice (box centers are integers there), so conformity never
//! depends on float proximity.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::whitney::{CompactSet, CubeLocator, Decomposition};

/// Axis-aligned integer box at the finest lattice: per-axis `(lo, hi)`
/// with `hi == lo` on degenerate axes.
type IntBox = Vec<(i64, i64)>;

fn box_dim(b: &IntBox) -> usize {
    b.iter().filter(|(lo, hi)| hi > lo).count()
}

/// Center of a box in doubled integer units.
fn box_center_key(b: &IntBox) -> Vec<i64> {
    b.iter().map(|(lo, hi)| lo + hi).collect()
}

/// The 2^dim same-dimension children obtained by halving every
/// non-degenerate axis. Empty when a side is a single unit.
fn box_children(b: &IntBox) -> Vec<IntBox> {
    let axes: Vec<usize> = (0..b.len()).filter(|&i| b[i].1 > b[i].0).collect();
    if axes.iter().any(|&i| (b[i].1 - b[i].0) % 2 != 0) {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(1 << axes.len());
    for mask in 0..(1usize << axes.len()) {
        let mut child = b.clone();
        for (bit, &i) in axes.iter().enumerate() {
            let mid = (b[i].0 + b[i].1) / 2;
            child[i] = if (mask >> bit) & 1 == 0 { (b[i].0, mid) } else { (mid, b[i].1) };
        }
        out.push(child);
    }
    out
}

/// Boundary faces of a box: per non-degenerate axis, the lo and hi side.
fn box_boundary(b: &IntBox) -> Vec<IntBox> {
    let mut out = Vec::new();
    for i in 0..b.len() {
        if b[i].1 > b[i].0 {
            let mut lo_face = b.clone();
            lo_face[i] = (b[i].0, b[i].0);
            out.push(lo_face);
            let mut hi_face = b.clone();
            hi_face[i] = (b[i].1, b[i].1);
            out.push(hi_face);
        }
    }
    out
}

/// All 3^m faces of a cube box (per axis: lo side, hi side, or full).
fn all_faces(b: &IntBox) -> Vec<IntBox> {
    let m = b.len();
    let mut out = Vec::with_capacity(3usize.pow(m as u32));
    let mut stack: Vec<IntBox> = vec![Vec::with_capacity(m)];
    for i in 0..m {
        let mut next = Vec::new();
        for prefix in &stack {
            for choice in [(b[i].0, b[i].0), (b[i].1, b[i].1), (b[i].0, b[i].1)] {
                let mut p = prefix.clone();
                p.push(choice);
                next.push(p);
            }
        }
        stack = next;
    }
    out.extend(stack);
    out
}

/// The Whitney triangulation: a simplicial complex whose m-simplices
/// partition the accepted cubes, with face-incidence tables, per-simplex
/// parent cubes, and a point locator.
#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    pub m: usize,
    dec: Decomposition,
    /// world coordinates, m-stride
    coords: Vec<f64>,
    /// exact integer vertex keys (doubled finest lattice), m-stride
    vertex_keys: Vec<i64>,
    /// simplices[k]: flat (k+1)-stride vertex tuples, ascending per simplex
    simplices: Vec<Vec<u32>>,
    /// facets[k]: flat (k+1)-stride ids of the (k-1)-facets, k >= 1
    facets: Vec<Vec<u32>>,
    /// parent_cube[k][i]: cube that first created simplex i of dimension k
    parent_cube: Vec<Vec<u32>>,
    /// tuple -> id per dimension
    index: Vec<HashMap<Vec<u32>, u32>>,
    /// per m-simplex: row-major inverse of [v1-v0 ... vm-v0]
    bary_inv: Vec<f64>,
    /// m-simplex ids per cube, in cube order
    cube_simplices: Vec<Vec<u32>>,
    locator: CubeLocator,
}

struct Builder<'a> {
    dec: &'a Decomposition,
    present: HashSet<IntBox>,
    tri_memo: HashMap<IntBox, Vec<u32>>,
    region_memo: HashMap<IntBox, Vec<u32>>,
    vertex_ids: HashMap<Vec<i64>, u32>,
    cx: SimplicialComplex,
    current_cube: u32,
}

impl<'a> Builder<'a> {
    fn vertex(&mut self, key: Vec<i64>) -> u32 {
        if let Some(&id) = self.vertex_ids.get(&key) {
            return id;
        }
        let id = self.vertex_ids.len() as u32;
        let unit = self.dec.doubled_unit();
        for (i, k) in key.iter().enumerate() {
            self.cx.coords.push(self.dec.root_corner[i] + *k as f64 * unit);
        }
        self.cx.vertex_keys.extend_from_slice(&key);
        self.vertex_ids.insert(key, id);
        id
    }

    /// Insert a simplex (sorted vertex tuple) with all of its faces.
    fn add_simplex(&mut self, tuple: &[u32]) -> u32 {
        let k = tuple.len() - 1;
        if let Some(&id) = self.cx.index[k].get(tuple) {
            return id;
        }
        let mut facet_ids = Vec::new();
        if k >= 1 {
            for drop in 0..tuple.len() {
                let facet: Vec<u32> = tuple
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != drop)
                    .map(|(_, v)| *v)
                    .collect();
                facet_ids.push(self.add_simplex(&facet));
            }
        }
        let id = (self.cx.simplices[k].len() / (k + 1)) as u32;
        self.cx.simplices[k].extend_from_slice(tuple);
        self.cx.facets[k].extend_from_slice(&facet_ids);
        self.cx.parent_cube[k].push(self.current_cube);
        self.cx.index[k].insert(tuple.to_vec(), id);
        id
    }

    fn is_split(&self, b: &IntBox) -> bool {
        if box_dim(b) == 0 {
            return false;
        }
        box_children(b).iter().any(|c| self.present.contains(c))
    }

    /// Simplices of dimension `dim(b)` triangulating the region of `b`,
    /// descending into sub-boxes where finer cubes impose them.
    fn tri_region(&mut self, b: &IntBox) -> Vec<u32> {
        if let Some(ids) = self.region_memo.get(b) {
            return ids.clone();
        }
        let ids = if self.is_split(b) {
            let mut out = Vec::new();
            for child in box_children(b) {
                out.extend(self.tri_region(&child));
            }
            out
        } else {
            self.tri_box(b)
        };
        self.region_memo.insert(b.clone(), ids.clone());
        ids
    }

    /// Cone triangulation of a single box over its center.
    fn tri_box(&mut self, b: &IntBox) -> Vec<u32> {
        if let Some(ids) = self.tri_memo.get(b) {
            return ids.clone();
        }
        let k = box_dim(b);
        let ids = if k == 0 {
            let v = self.vertex(box_center_key(b));
            vec![self.add_simplex(&[v])]
        } else {
            let center = self.vertex(box_center_key(b));
            let mut out = Vec::new();
            for face in box_boundary(b) {
                for fid in self.tri_region(&face) {
                    let fk = k - 1;
                    let start = fid as usize * (fk + 1);
                    let mut tuple: Vec<u32> =
                        self.cx.simplices[fk][start..start + fk + 1].to_vec();
                    tuple.push(center);
                    tuple.sort_unstable();
                    out.push(self.add_simplex(&tuple));
                }
            }
            out
        };
        self.tri_memo.insert(b.clone(), ids.clone());
        ids
    }
}

/// Build the simplicial complex of a decomposition's accepted cubes.
///
/// Fails if two touching cubes differ by more than one generation, or if
/// the built complex does not pass its structural checks (facet pairing,
/// positive volumes, volume partition of each cube).
pub fn build_complex(dec: &Decomposition) -> Result<SimplicialComplex> {
    let m = dec.m;
    if dec.cubes.is_empty() {
        return Err(Error::invalid("triangulate", "no accepted cubes to triangulate"));
    }
    let pairs = touching_pairs(dec);
    for &(i, j) in &pairs {
        let jump = dec.cubes[i].generation.abs_diff(dec.cubes[j].generation);
        if jump > 1 {
            return Err(Error::invalid(
                "triangulate",
                format!("touching cubes {i} and {j} differ by {jump} generations"),
            ));
        }
    }

    let boxes: Vec<IntBox> = dec.cubes.iter().map(|c| dec.cube_int_box(c)).collect();
    let mut present: HashSet<IntBox> = HashSet::new();
    for b in &boxes {
        for f in all_faces(b) {
            present.insert(f);
        }
    }

    let cx = SimplicialComplex {
        m,
        dec: dec.clone(),
        coords: Vec::new(),
        vertex_keys: Vec::new(),
        simplices: vec![Vec::new(); m + 1],
        facets: vec![Vec::new(); m + 1],
        parent_cube: vec![Vec::new(); m + 1],
        index: vec![HashMap::new(); m + 1],
        bary_inv: Vec::new(),
        cube_simplices: Vec::new(),
        locator: dec.locator(),
    };
    let mut builder = Builder {
        dec,
        present,
        tri_memo: HashMap::new(),
        region_memo: HashMap::new(),
        vertex_ids: HashMap::new(),
        cx,
        current_cube: 0,
    };

    for (ci, b) in boxes.iter().enumerate() {
        builder.current_cube = ci as u32;
        let ids = builder.tri_region(b);
        builder.cx.cube_simplices.push(ids);
    }

    let mut cx = builder.cx;
    cx.compute_barycentric_inverses()?;
    cx.structural_check()?;
    Ok(cx)
}

/// Canonical list of touching cube pairs `(i, j)`, `i < j`. The scan
/// covers every generation present, so it stays correct on inputs that
/// violate the bounded-jump property.
pub fn touching_pairs(dec: &Decomposition) -> Vec<(usize, usize)> {
    let boxes: Vec<IntBox> = dec.cubes.iter().map(|c| dec.cube_int_box(c)).collect();
    let lookup = dec.lattice_index();
    let mut gens: Vec<u32> = dec.cubes.iter().map(|c| c.generation).collect();
    gens.sort_unstable();
    gens.dedup();
    let mut pairs = Vec::new();
    for (i, _cube) in dec.cubes.iter().enumerate() {
        for &g2 in &gens {
            let step = 1i64 << (dec.max_generation - g2);
            let ranges: Vec<(i64, i64)> = boxes[i]
                .iter()
                .map(|(lo, hi)| (lo / step - 1, hi / step))
                .collect();
            let mut lats: Vec<Vec<i64>> = vec![Vec::new()];
            for (a, b) in &ranges {
                let mut next = Vec::new();
                for pre in &lats {
                    for v in *a..=*b {
                        let mut p = pre.clone();
                        p.push(v);
                        next.push(p);
                    }
                }
                lats = next;
            }
            for lat in lats {
                if let Some(&j) = lookup.get(&(g2, lat)) {
                    if j <= i {
                        continue;
                    }
                    let touch = boxes[i]
                        .iter()
                        .zip(&boxes[j])
                        .all(|((a0, a1), (b0, b1))| a0 <= b1 && b0 <= a1);
                    if touch {
                        pairs.push((i, j));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

impl SimplicialComplex {
    pub fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.m
    }

    pub fn vertex(&self, i: u32) -> &[f64] {
        let i = i as usize;
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    pub fn simplex_count(&self, dim: usize) -> usize {
        self.simplices[dim].len() / (dim + 1)
    }

    /// Vertex tuple (ascending) of a simplex.
    pub fn simplex(&self, dim: usize, id: u32) -> &[u32] {
        let s = id as usize * (dim + 1);
        &self.simplices[dim][s..s + dim + 1]
    }

    /// Ids of the (dim-1)-facets of a simplex.
    pub fn simplex_facets(&self, dim: usize, id: u32) -> &[u32] {
        let s = id as usize * (dim + 1);
        &self.facets[dim][s..s + dim + 1]
    }

    pub fn simplex_id(&self, dim: usize, tuple: &[u32]) -> Option<u32> {
        self.index[dim].get(tuple).copied()
    }

    pub fn parent_cube(&self, dim: usize, id: u32) -> u32 {
        self.parent_cube[dim][id as usize]
    }

    pub fn cube_simplices(&self, cube: usize) -> &[u32] {
        &self.cube_simplices[cube]
    }

    pub fn simplex_vertices(&self, dim: usize, id: u32) -> Vec<Vec<f64>> {
        self.simplex(dim, id)
            .iter()
            .map(|&v| self.vertex(v).to_vec())
            .collect()
    }

    pub fn simplex_diameter(&self, dim: usize, id: u32) -> f64 {
        let verts = self.simplex(dim, id);
        let mut d2max: f64 = 0.0;
        for i in 0..verts.len() {
            for j in (i + 1)..verts.len() {
                let d2: f64 = self
                    .vertex(verts[i])
                    .iter()
                    .zip(self.vertex(verts[j]))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2max = d2max.max(d2);
            }
        }
        d2max.sqrt()
    }

    pub fn simplex_centroid(&self, dim: usize, id: u32) -> Vec<f64> {
        let verts = self.simplex(dim, id);
        let mut c = vec![0.0; self.m];
        for &v in verts {
            for (ci, x) in c.iter_mut().zip(self.vertex(v)) {
                *ci += x;
            }
        }
        for ci in &mut c {
            *ci /= verts.len() as f64;
        }
        c
    }

    /// Unsigned volume of an m-simplex.
    pub fn simplex_volume(&self, id: u32) -> f64 {
        let verts = self.simplex(self.m, id);
        let v0 = self.vertex(verts[0]);
        let mat = DMatrix::from_fn(self.m, self.m, |r, c| self.vertex(verts[c + 1])[r] - v0[r]);
        let mut fact = 1.0;
        for k in 2..=self.m {
            fact *= k as f64;
        }
        mat.determinant().abs() / fact
    }

    fn compute_barycentric_inverses(&mut self) -> Result<()> {
        let m = self.m;
        let count = self.simplex_count(m);
        self.bary_inv = Vec::with_capacity(count * m * m);
        for id in 0..count as u32 {
            let verts = self.simplex(m, id);
            let v0 = self.vertex(verts[0]);
            let mat = DMatrix::from_fn(m, m, |r, c| self.vertex(verts[c + 1])[r] - v0[r]);
            let inv = mat.try_inverse().ok_or_else(|| Error::Construction {
                detail: format!("degenerate m-simplex {id}"),
            })?;
            for r in 0..m {
                for c in 0..m {
                    self.bary_inv.push(inv[(r, c)]);
                }
            }
        }
        Ok(())
    }

    /// Barycentric coordinates of `x` in m-simplex `id` (fast path using
    /// the precomputed inverse).
    pub fn barycentric(&self, id: u32, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let verts = self.simplex(m, id);
        let v0 = self.vertex(verts[0]);
        let inv = &self.bary_inv[id as usize * m * m..(id as usize + 1) * m * m];
        let mut bary = vec![0.0; m + 1];
        let mut sum = 0.0;
        for r in 0..m {
            let mut acc = 0.0;
            for c in 0..m {
                acc += inv[r * m + c] * (x[c] - v0[c]);
            }
            bary[r + 1] = acc;
            sum += acc;
        }
        bary[0] = 1.0 - sum;
        bary
    }

    /// Point from barycentric coordinates of a simplex.
    pub fn point_from_barycentric(&self, dim: usize, id: u32, bary: &[f64]) -> Vec<f64> {
        let verts = self.simplex(dim, id);
        let mut out = vec![0.0; self.m];
        for (&v, l) in verts.iter().zip(bary) {
            for (o, c) in out.iter_mut().zip(self.vertex(v)) {
                *o += l * c;
            }
        }
        out
    }

    /// Locate `x` in the complex: the containing m-simplex (lowest id on
    /// shared faces) and its barycentric coordinates.
    pub fn locate(&self, x: &[f64]) -> Result<(u32, Vec<f64>)> {
        const TOL: f64 = -1e-12;
        let mut best: Option<(u32, Vec<f64>)> = None;
        // Collect every cube whose closed box contains x.
        let mut lattice = vec![0i64; self.m];
        let visit = |cube_idx: usize, best: &mut Option<(u32, Vec<f64>)>| {
            for &sid in &self.cube_simplices[cube_idx] {
                if best.as_ref().map_or(false, |(b, _)| sid >= *b) {
                    continue;
                }
                let bary = self.barycentric(sid, x);
                if bary.iter().all(|l| *l >= TOL) {
                    *best = Some((sid, bary));
                }
            }
        };
        let loc = &self.locator;
        for &g in loc.generations() {
            let side = self.dec.side(g);
            let cells = 1i64 << g;
            let bases: Vec<i64> = (0..self.m)
                .map(|i| ((x[i] - self.dec.root_corner[i]) / side).floor() as i64)
                .collect();
            'cand: for mask in 0..(1usize << self.m) {
                for i in 0..self.m {
                    let l = bases[i] - ((mask >> i) & 1) as i64;
                    if !(0..cells).contains(&l) {
                        continue 'cand;
                    }
                    lattice[i] = l;
                }
                if let Some(idx) = loc.get(g, &lattice) {
                    let (lo, hi) = self.dec.cube_box(&self.dec.cubes[idx]);
                    let inside = x
                        .iter()
                        .zip(lo.iter().zip(&hi))
                        .all(|(xv, (l, h))| *xv >= *l && *xv <= *h);
                    if inside {
                        visit(idx, &mut best);
                    }
                }
            }
        }
        best.ok_or(Error::NotCovered)
    }

    /// Structural validity: closure is by construction; check facet
    /// pairing, non-degeneracy, and the volume partition of every cube.
    pub fn structural_check(&self) -> Result<()> {
        let m = self.m;
        // Facet incidence: an (m-1)-simplex bounds at most two m-simplices.
        let mut incident = vec![0u8; self.simplex_count(m - 1)];
        for id in 0..self.simplex_count(m) as u32 {
            for &f in self.simplex_facets(m, id) {
                let c = &mut incident[f as usize];
                *c = c.saturating_add(1);
                if *c > 2 {
                    return Err(Error::Construction {
                        detail: format!("facet {f} bounds more than two m-simplices"),
                    });
                }
            }
        }
        // Volume partition per cube.
        for (ci, sids) in self.cube_simplices.iter().enumerate() {
            let cube = &self.dec.cubes[ci];
            let side = self.dec.side(cube.generation);
            let cube_vol = side.powi(m as i32);
            let sum: f64 = sids.iter().map(|&s| self.simplex_volume(s)).sum();
            if ((sum - cube_vol) / cube_vol).abs() > 1e-9 {
                return Err(Error::Construction {
                    detail: format!(
                        "cube {ci}: simplex volumes sum to {sum}, cube volume {cube_vol}"
                    ),
                });
            }
            for &s in sids {
                if self.simplex_volume(s) <= 0.0 {
                    return Err(Error::Construction {
                        detail: format!("degenerate simplex {s} in cube {ci}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Sampled cross-cube conformity probe: for nearby m-simplex pairs,
    /// points interior to one simplex must not lie interior to another.
    pub fn overlap_probe(&self, pairs: usize, seed: u64) -> Result<()> {
        let touching = touching_pairs(&self.dec);
        let mut rng = stream_rng(seed, 0);
        let mut checked = 0usize;
        'outer: for (ci, cj) in touching {
            for &si in &self.cube_simplices[ci] {
                for &sj in &self.cube_simplices[cj] {
                    if checked >= pairs {
                        break 'outer;
                    }
                    checked += 1;
                    // A strictly interior point of sj must not be strictly
                    // interior to si (cells have disjoint interiors).
                    let mut bary = vec![0.0; self.m + 1];
                    let mut s = 0.0;
                    for b in bary.iter_mut() {
                        *b = rng.gen_range(0.05..1.0);
                        s += *b;
                    }
                    for b in bary.iter_mut() {
                        *b /= s;
                    }
                    let p = self.point_from_barycentric(self.m, sj, &bary);
                    let other = self.barycentric(si, &p);
                    if other.iter().all(|l| *l > 1e-9) {
                        return Err(Error::Construction {
                            detail: format!("simplices {si} and {sj} overlap in their interiors"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Export the 2-skeleton in OFF format (m <= 3).
    pub fn export_off(&self) -> Result<String> {
        if self.m < 2 || self.m > 3 {
            return Err(Error::invalid("triangulate", "OFF export supports m in {2, 3}"));
        }
        let nv = self.vertex_count();
        let nt = self.simplex_count(2);
        let mut s = String::from("OFF\n");
        s.push_str(&format!("{nv} {nt} 0\n"));
        for i in 0..nv as u32 {
            let v = self.vertex(i);
            let z = if self.m == 3 { v[2] } else { 0.0 };
            s.push_str(&format!("{} {} {}\n", v[0], v[1], z));
        }
        for i in 0..nt as u32 {
            let t = self.simplex(2, i);
            s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
        }
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// Quality measurement
// ---------------------------------------------------------------------------

/// Shape-quality summary of the complex: flatness extremes, similarity
/// classes, the corner factor, and the distance-to-Z band when `Z` is
/// supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    pub m: usize,
    pub m_simplex_count: usize,
    pub similarity_classes: usize,
    /// min over m-simplices of diam/B (lower flatness bound D1)
    pub d1_observed: f64,
    /// max over m-simplices of diam/beta (upper flatness bound D2)
    pub d2_observed: f64,
    /// corner factor: max over sampled facet pairs of (|x-v|+|v-y|)/|x-y|
    pub corner_factor: f64,
    /// min and max of d(σ, Z)/diam(σ) over m-simplices (with Z)
    pub size_min: Option<f64>,
    pub size_max: Option<f64>,
    /// 12 sqrt(m), the admissible ceiling for size_max
    pub size_ceiling: f64,
}

/// Distance from the barycenter of the simplex spanned by `sub` to the
/// affine hull of `sub` minus one vertex... (distances from face
/// barycenters to their facet planes). Returns (beta, big_b) for one face.
fn face_flatness(verts: &[Vec<f64>]) -> (f64, f64) {
    let l = verts.len() - 1; // face dimension
    let m = verts[0].len();
    let mut c = vec![0.0; m];
    for v in verts {
        for (ci, x) in c.iter_mut().zip(v) {
            *ci += x;
        }
    }
    for ci in &mut c {
        *ci /= verts.len() as f64;
    }
    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for drop in 0..verts.len() {
        let sub: Vec<&Vec<f64>> = verts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != drop)
            .map(|(_, v)| v)
            .collect();
        let d = dist_to_affine_hull(&c, &sub);
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let _ = l;
    (dmin, dmax)
}

fn dist_to_affine_hull(p: &[f64], pts: &[&Vec<f64>]) -> f64 {
    let m = p.len();
    let r = pts.len() - 1;
    let base = pts[0];
    let diff = DVector::from_fn(m, |i, _| p[i] - base[i]);
    if r == 0 {
        return diff.norm();
    }
    let dmat = DMatrix::from_fn(m, r, |i, j| pts[j + 1][i] - base[i]);
    let sol = dmat
        .clone()
        .svd(true, true)
        .solve(&diff, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(r));
    (diff - dmat * sol).norm()
}

/// `beta_sigma` and `B_sigma`: extreme barycenter-to-facet-plane
/// distances over all faces of dimension >= 1 of the m-simplex.
fn simplex_flatness(cx: &SimplicialComplex, id: u32) -> (f64, f64) {
    let tuple = cx.simplex(cx.m, id);
    let verts: Vec<Vec<f64>> = tuple.iter().map(|&v| cx.vertex(v).to_vec()).collect();
    let n = verts.len();
    let mut beta = f64::INFINITY;
    let mut big = 0.0f64;
    // Every subset of size >= 2 is a face of the simplex.
    for mask in 1u32..(1 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let face: Vec<Vec<f64>> = (0..n)
            .filter(|i| (mask >> i) & 1 == 1)
            .map(|i| verts[i].clone())
            .collect();
        let (lo, hi) = face_flatness(&face);
        beta = beta.min(lo);
        big = big.max(hi);
    }
    (beta, big)
}

/// Scale-normalized, quantized edge-length fingerprint of a simplex.
fn similarity_fingerprint(cx: &SimplicialComplex, id: u32) -> Vec<u64> {
    let tuple = cx.simplex(cx.m, id);
    let mut lens = Vec::new();
    for i in 0..tuple.len() {
        for j in (i + 1)..tuple.len() {
            let d: f64 = cx
                .vertex(tuple[i])
                .iter()
                .zip(cx.vertex(tuple[j]))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            lens.push(d);
        }
    }
    let max = lens.iter().cloned().fold(0.0f64, f64::max);
    let mut q: Vec<u64> = lens.iter().map(|l| (l / max / 1e-9).round() as u64).collect();
    q.sort_unstable();
    q
}

/// Exact distance from a point to a closed simplex.
fn point_to_simplex(p: &[f64], verts: &[Vec<f64>]) -> f64 {
    let n = verts.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let face: Vec<&Vec<f64>> = (0..n)
            .filter(|i| (mask >> i) & 1 == 1)
            .map(|i| &verts[i])
            .collect();
        if face.len() == 1 {
            let d: f64 = face[0]
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
            continue;
        }
        // Project onto the affine hull; accept when the projection has
        // nonnegative barycentric coordinates within the face.
        let m = p.len();
        let r = face.len() - 1;
        let base = face[0];
        let dmat = DMatrix::from_fn(m, r, |i, j| face[j + 1][i] - base[i]);
        let rhs = DVector::from_fn(m, |i, _| p[i] - base[i]);
        if let Ok(sol) = dmat.clone().svd(true, true).solve(&rhs, 1e-14) {
            let lam0 = 1.0 - sol.iter().sum::<f64>();
            if lam0 >= -1e-12 && sol.iter().all(|l| *l >= -1e-12) {
                let d = (rhs - dmat * sol).norm();
                best = best.min(d);
            }
        }
    }
    best
}

/// Exact distance from the cloud to a closed m-simplex, pruned by
/// centroid distance.
pub fn simplex_distance_to_set(cx: &SimplicialComplex, id: u32, z: &CompactSet) -> f64 {
    let verts = cx.simplex_vertices(cx.m, id);
    let centroid = cx.simplex_centroid(cx.m, id);
    let diam = cx.simplex_diameter(cx.m, id);
    let (_, d2c) = z.nearest(&centroid);
    let mut best = d2c.sqrt(); // distance via centroid is an upper bound...
    let cutoff = best + diam;
    for i in 0..z.len() {
        let site = z.point(i);
        let dc: f64 = site
            .iter()
            .zip(&centroid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dc > cutoff {
            continue;
        }
        best = best.min(point_to_simplex(site, &verts));
    }
    best
}

/// Measure flatness, similarity classes, the corner factor, and (with Z)
/// the size band of the complex.
pub fn quality_report(cx: &SimplicialComplex, z: Option<&CompactSet>, seed: u64) -> QualityReport {
    let m = cx.m;
    let count = cx.simplex_count(m);
    let mut d1 = f64::INFINITY;
    let mut d2: f64 = 0.0;
    let mut classes: HashSet<Vec<u64>> = HashSet::new();
    let mut size_min = f64::INFINITY;
    let mut size_max: f64 = 0.0;
    for id in 0..count as u32 {
        let diam = cx.simplex_diameter(m, id);
        let (beta, big) = simplex_flatness(cx, id);
        d1 = d1.min(diam / big);
        d2 = d2.max(diam / beta);
        classes.insert(similarity_fingerprint(cx, id));
        if let Some(z) = z {
            let ratio = simplex_distance_to_set(cx, id, z) / diam;
            size_min = size_min.min(ratio);
            size_max = size_max.max(ratio);
        }
    }
    let corner = corner_factor(cx, seed);
    QualityReport {
        m,
        m_simplex_count: count,
        similarity_classes: classes.len(),
        d1_observed: d1,
        d2_observed: d2,
        corner_factor: corner,
        size_min: z.map(|_| size_min),
        size_max: z.map(|_| size_max),
        size_ceiling: 12.0 * (m as f64).sqrt(),
    }
}

/// Corner factor of the complex: for sampled pairs of facets of a common
/// simplex, the worst detour `(|x-v| + |v-y|)/|x-y|` through the best
/// point `v` of the shared face.
fn corner_factor(cx: &SimplicialComplex, seed: u64) -> f64 {
    let mut rng = stream_rng(seed, 1);
    let mut mu: f64 = 1.0;
    for dim in 2..=cx.m {
        let count = cx.simplex_count(dim);
        let step = (count / 64).max(1);
        for id in (0..count).step_by(step) {
            let tuple = cx.simplex(dim, id as u32);
            let verts: Vec<Vec<f64>> = tuple.iter().map(|&v| cx.vertex(v).to_vec()).collect();
            // Facet pairs share dim-1 vertices.
            for a in 0..tuple.len() {
                for b in (a + 1)..tuple.len() {
                    // Facet A omits vertex a; facet B omits vertex b.
                    let fa: Vec<usize> = (0..tuple.len()).filter(|i| *i != a).collect();
                    let fb: Vec<usize> = (0..tuple.len()).filter(|i| *i != b).collect();
                    let shared: Vec<usize> =
                        (0..tuple.len()).filter(|i| *i != a && *i != b).collect();
                    for _ in 0..8 {
                        let x = random_point_in(&verts, &fa, &mut rng);
                        let y = random_point_in(&verts, &fb, &mut rng);
                        let dxy: f64 = x
                            .iter()
                            .zip(&y)
                            .map(|(p, q)| (p - q) * (p - q))
                            .sum::<f64>()
                            .sqrt();
                        if dxy < 1e-12 {
                            continue;
                        }
                        let shared_pts: Vec<Vec<f64>> =
                            shared.iter().map(|&i| verts[i].clone()).collect();
                        let vx = nearest_point_in_simplex(&x, &shared_pts);
                        let vy = nearest_point_in_simplex(&y, &shared_pts);
                        let detour = |v: &Vec<f64>| {
                            let d1: f64 = x
                                .iter()
                                .zip(v)
                                .map(|(p, q)| (p - q) * (p - q))
                                .sum::<f64>()
                                .sqrt();
                            let d2: f64 = y
                                .iter()
                                .zip(v)
                                .map(|(p, q)| (p - q) * (p - q))
                                .sum::<f64>()
                                .sqrt();
                            (d1 + d2) / dxy
                        };
                        mu = mu.max(detour(&vx).min(detour(&vy)));
                    }
                }
            }
        }
    }
    mu
}

fn random_point_in(verts: &[Vec<f64>], idxs: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    let mut w: Vec<f64> = idxs.iter().map(|_| rng.gen_range(1e-6..1.0)).collect();
    let s: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= s;
    }
    let m = verts[0].len();
    let mut p = vec![0.0; m];
    for (wi, &i) in w.iter().zip(idxs) {
        for (pc, vc) in p.iter_mut().zip(&verts[i]) {
            *pc += wi * vc;
        }
    }
    p
}

fn nearest_point_in_simplex(p: &[f64], verts: &[Vec<f64>]) -> Vec<f64> {
    // Enumerate faces; keep the admissible projection closest to p.
    let n = verts.len();
    let m = p.len();
    let mut best = (f64::INFINITY, verts[0].clone());
    for mask in 1u32..(1 << n) {
        let face: Vec<&Vec<f64>> = (0..n)
            .filter(|i| (mask >> i) & 1 == 1)
            .map(|i| &verts[i])
            .collect();
        let proj = if face.len() == 1 {
            face[0].clone()
        } else {
            let r = face.len() - 1;
            let base = face[0];
            let dmat = DMatrix::from_fn(m, r, |i, j| face[j + 1][i] - base[i]);
            let rhs = DVector::from_fn(m, |i, _| p[i] - base[i]);
            match dmat.clone().svd(true, true).solve(&rhs, 1e-14) {
                Ok(sol) => {
                    let lam0 = 1.0 - sol.iter().sum::<f64>();
                    if lam0 < -1e-12 || sol.iter().any(|l| *l < -1e-12) {
                        continue;
                    }
                    let q = dmat * sol;
                    (0..m).map(|i| base[i] + q[i]).collect()
                }
                Err(_) => continue,
            }
        };
        let d: f64 = p
            .iter()
            .zip(&proj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d < best.0 {
            best = (d, proj);
        }
    }
    best.1
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawComplex {
    m: usize,
    dec: Decomposition,
    vertices: Vec<Vec<f64>>,
    vertex_keys: Vec<Vec<i64>>,
    simplices: Vec<Vec<u32>>,
    parent_cube: Vec<Vec<u32>>,
}

impl Serialize for SimplicialComplex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = RawComplex {
            m: self.m,
            dec: self.dec.clone(),
            vertices: (0..self.vertex_count() as u32)
                .map(|i| self.vertex(i).to_vec())
                .collect(),
            vertex_keys: (0..self.vertex_count())
                .map(|i| self.vertex_keys[i * self.m..(i + 1) * self.m].to_vec())
                .collect(),
            simplices: self.simplices.clone(),
            parent_cube: self.parent_cube.clone(),
        };
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SimplicialComplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawComplex::deserialize(d)?;
        SimplicialComplex::from_raw(raw).map_err(serde::de::Error::custom)
    }
}

impl SimplicialComplex {
    fn from_raw(raw: RawComplex) -> Result<Self> {
        let m = raw.m;
        let mut cx = SimplicialComplex {
            m,
            locator: raw.dec.locator(),
            dec: raw.dec,
            coords: raw.vertices.iter().flatten().copied().collect(),
            vertex_keys: raw.vertex_keys.iter().flatten().copied().collect(),
            simplices: raw.simplices,
            facets: vec![Vec::new(); m + 1],
            parent_cube: raw.parent_cube,
            index: vec![HashMap::new(); m + 1],
            bary_inv: Vec::new(),
            cube_simplices: Vec::new(),
        };
        cx.rebuild_tables()?;
        Ok(cx)
    }

    fn rebuild_tables(&mut self) -> Result<()> {
        let m = self.m;
        for k in 0..=m {
            let count = self.simplex_count(k);
            for id in 0..count as u32 {
                let tuple = self.simplex(k, id).to_vec();
                self.index[k].insert(tuple, id);
            }
        }
        for k in 1..=m {
            let count = self.simplex_count(k);
            let mut facets = Vec::with_capacity(count * (k + 1));
            for id in 0..count as u32 {
                let tuple = self.simplex(k, id).to_vec();
                for drop in 0..tuple.len() {
                    let facet: Vec<u32> = tuple
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != drop)
                        .map(|(_, v)| *v)
                        .collect();
                    let fid = self.index[k - 1].get(&facet).ok_or_else(|| Error::Construction {
                        detail: "missing facet during rebuild (complex not closed)".into(),
                    })?;
                    facets.push(*fid);
                }
            }
            self.facets[k] = facets;
        }
        // Cube membership from parent data is not enough (shared faces);
        // recover m-simplex grouping by geometric containment.
        let mut cube_simplices = vec![Vec::new(); self.dec.cubes.len()];
        let boxes: Vec<(Vec<f64>, Vec<f64>)> =
            self.dec.cubes.iter().map(|c| self.dec.cube_box(c)).collect();
        for id in 0..self.simplex_count(m) as u32 {
            let c = self.simplex_centroid(m, id);
            let mut placed = false;
            let parent = self.parent_cube[m][id as usize] as usize;
            let inside = |b: &(Vec<f64>, Vec<f64>)| {
                c.iter()
                    .zip(b.0.iter().zip(&b.1))
                    .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
            };
            if parent < boxes.len() && inside(&boxes[parent]) {
                cube_simplices[parent].push(id);
                placed = true;
            }
            if !placed {
                for (ci, b) in boxes.iter().enumerate() {
                    if inside(b) {
                        cube_simplices[ci].push(id);
                        placed = true;
                        break;
                    }
                }
            }
            if !placed {
                return Err(Error::Construction {
                    detail: format!("m-simplex {id} lies in no cube"),
                });
            }
        }
        self.cube_simplices = cube_simplices;
        self.compute_barycentric_inverses()?;
        Ok(())
    }
}
