//! Masked lattice domains, directed intrinsic distances d_lambda, the ambient
//! path distance d_U, geodesic extraction and intrinsic cone fields.
//!
//! Distances are graph shortest paths: edges follow a configurable stencil and
//! a directed edge x -> y costs L_lambda(midpoint, y - x). The 16-neighborhood
//! (8-neighborhood plus knight moves) keeps the metrication error of isotropic
//! distances near 1.3%.

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::math::Vec2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::PathBuf;

pub type NodeId = usize;
const NO_PARENT: u32 = u32::MAX;

/// Neighbor stencil choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stencil {
    N8,
    N16,
    /// Every lattice offset with 0 < dx^2 + dy^2 <= radius^2. Used where the
    /// dynamic programs need fine velocity resolution.
    Disk { radius: u32 },
}

impl Default for Stencil {
    fn default() -> Self {
        Stencil::N16
    }
}

impl Stencil {
    pub fn offsets(self) -> Vec<(i32, i32)> {
        match self {
            Stencil::N8 => vec![
                (1, 0), (-1, 0), (0, 1), (0, -1),
                (1, 1), (1, -1), (-1, 1), (-1, -1),
            ],
            Stencil::N16 => {
                let mut v = Stencil::N8.offsets();
                v.extend_from_slice(&[
                    (2, 1), (1, 2), (-1, 2), (-2, 1),
                    (-2, -1), (-1, -2), (1, -2), (2, -1),
                ]);
                v
            }
            Stencil::Disk { radius } => {
                let r = radius.max(1) as i32;
                let mut v = Vec::new();
                for dy in -r..=r {
                    for dx in -r..=r {
                        if (dx, dy) != (0, 0) && dx * dx + dy * dy <= r * r {
                            v.push((dx, dy));
                        }
                    }
                }
                v
            }
        }
    }
}

/// One stencil offset with cached geometry.
#[derive(Debug, Clone)]
pub struct Offset {
    pub dx: i32,
    pub dy: i32,
    /// |(dx, dy)| in cells.
    pub norm: f64,
    /// Index of the opposite offset in the stencil list.
    pub opposite: usize,
    /// Intermediate lattice offsets the straight edge passes through; all must
    /// be inside for the edge to exist (prevents hopping across thin walls).
    pub intermediates: Vec<(i32, i32)>,
}

/// Geometric description of the domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Box { min: Vec2, max: Vec2 },
    Disk { center: Vec2, radius: f64 },
    /// r_in < |x| < r_out, centered at the origin.
    Annulus { r_in: f64, r_out: f64 },
    Polygon { vertices: Vec<Vec2> },
    /// PGM bitmap, 0 = outside; pixel grid must match the lattice.
    MaskFile { path: PathBuf, min: Vec2, max: Vec2 },
}

impl DomainSpec {
    fn bbox(&self) -> Result<(Vec2, Vec2)> {
        Ok(match self {
            DomainSpec::Box { min, max } => (*min, *max),
            DomainSpec::Disk { center, radius } => (
                Vec2::new(center.x - radius, center.y - radius),
                Vec2::new(center.x + radius, center.y + radius),
            ),
            DomainSpec::Annulus { r_out, .. } => {
                (Vec2::new(-r_out, -r_out), Vec2::new(*r_out, *r_out))
            }
            DomainSpec::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::Config("polygon needs at least 3 vertices".into()));
                }
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo.x = lo.x.min(v.x);
                    lo.y = lo.y.min(v.y);
                    hi.x = hi.x.max(v.x);
                    hi.y = hi.y.max(v.y);
                }
                (lo, hi)
            }
            DomainSpec::MaskFile { min, max, .. } => (*min, *max),
        })
    }

    fn contains(&self, p: Vec2, mask: Option<&(usize, usize, Vec<u8>)>, grid_info: (Vec2, f64)) -> bool {
        match self {
            DomainSpec::Box { min, max } => {
                p.x >= min.x - 1e-12 && p.x <= max.x + 1e-12 && p.y >= min.y - 1e-12 && p.y <= max.y + 1e-12
            }
            DomainSpec::Disk { center, radius } => (p - *center).norm() < *radius,
            DomainSpec::Annulus { r_in, r_out } => {
                let r = p.norm();
                r > *r_in && r < *r_out
            }
            DomainSpec::Polygon { vertices } => {
                // even-odd rule
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if (a.y > p.y) != (b.y > p.y) {
                        let t = (p.y - a.y) / (b.y - a.y);
                        if p.x < a.x + t * (b.x - a.x) {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
            DomainSpec::MaskFile { .. } => {
                let (w, h, data) = mask.expect("mask preloaded");
                let (origin, step) = grid_info;
                let i = ((p.x - origin.x) / step).round() as isize;
                let j = ((p.y - origin.y) / step).round() as isize;
                if i < 0 || j < 0 || i as usize >= *w || j as usize >= *h {
                    return false;
                }
                data[(h - 1 - j as usize) * w + i as usize] > 0
            }
        }
    }
}

/// A masked rectangular lattice with a directed neighbor graph.
#[derive(Debug, Clone)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    pub h: f64,
    pub origin: Vec2,
    inside: Vec<bool>,
    boundary: Vec<bool>,
    offsets: Vec<Offset>,
    pub stencil: Stencil,
    /// Nodes dropped because they had no inside neighbor.
    pub pruned_isolated: usize,
}

/// Build the lattice for a domain spec; nodes whose positions satisfy the
/// inside predicate are kept.
pub fn build_grid(spec: &DomainSpec, h: f64, stencil: Stencil) -> Result<GridDomain> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
    }
    let (lo, hi) = spec.bbox()?;
    let nx = ((hi.x - lo.x) / h).round() as usize + 1;
    let ny = ((hi.y - lo.y) / h).round() as usize + 1;
    if nx < 2 || ny < 2 {
        return Err(Error::Config("bounding box smaller than one cell".into()));
    }
    let mask = match spec {
        DomainSpec::MaskFile { path, .. } => {
            let m = crate::io::read_pgm(path)?;
            if m.0 != nx || m.1 != ny {
                return Err(Error::Config(format!(
                    "mask file is {}x{}, lattice is {}x{}",
                    m.0, m.1, nx, ny
                )));
            }
            Some(m)
        }
        _ => None,
    };

    let mut inside = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = Vec2::new(lo.x + i as f64 * h, lo.y + j as f64 * h);
            inside[i + nx * j] = spec.contains(p, mask.as_ref(), (lo, h));
        }
    }
    if !inside.iter().any(|b| *b) {
        return Err(Error::Config("empty interior: no lattice node is inside".into()));
    }

    let raw: Vec<(i32, i32)> = stencil.offsets();
    let offsets: Vec<Offset> = raw
        .iter()
        .map(|&(dx, dy)| {
            let opposite = raw.iter().position(|&(ox, oy)| (ox, oy) == (-dx, -dy)).unwrap();
            let m = dx.abs().max(dy.abs());
            let mut intermediates = Vec::new();
            for k in 1..m {
                let t = k as f64 / m as f64;
                let ix = (t * dx as f64).round() as i32;
                let iy = (t * dy as f64).round() as i32;
                if (ix, iy) != (0, 0) && (ix, iy) != (dx, dy) && !intermediates.contains(&(ix, iy)) {
                    intermediates.push((ix, iy));
                }
            }
            Offset {
                dx,
                dy,
                norm: ((dx * dx + dy * dy) as f64).sqrt(),
                opposite,
                intermediates,
            }
        })
        .collect();

    let mut grid = GridDomain {
        nx,
        ny,
        h,
        origin: lo,
        inside,
        boundary: vec![false; nx * ny],
        offsets,
        stencil,
        pruned_isolated: 0,
    };

    // prune isolated nodes until stable
    loop {
        let mut pruned = 0;
        for node in 0..grid.nx * grid.ny {
            if !grid.inside[node] {
                continue;
            }
            let has_neighbor = (0..grid.offsets.len()).any(|k| grid.neighbor(node, k).is_some());
            if !has_neighbor {
                grid.inside[node] = false;
                pruned += 1;
            }
        }
        grid.pruned_isolated += pruned;
        if pruned == 0 {
            break;
        }
    }
    if !grid.inside.iter().any(|b| *b) {
        return Err(Error::Config("empty interior after pruning isolated nodes".into()));
    }

    for node in 0..grid.nx * grid.ny {
        if !grid.inside[node] {
            continue;
        }
        let (i, j) = grid.coords(node);
        let mut on_boundary = false;
        for o in &grid.offsets {
            let ni = i as i64 + o.dx as i64;
            let nj = j as i64 + o.dy as i64;
            if ni < 0 || nj < 0 || ni >= grid.nx as i64 || nj >= grid.ny as i64 {
                on_boundary = true;
                break;
            }
            if !grid.inside[ni as usize + grid.nx * nj as usize] {
                on_boundary = true;
                break;
            }
        }
        grid.boundary[node] = on_boundary;
    }
    Ok(grid)
}

impl GridDomain {
    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn idx(&self, i: usize, j: usize) -> NodeId {
        i + self.nx * j
    }

    pub fn coords(&self, node: NodeId) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn pos(&self, node: NodeId) -> Vec2 {
        let (i, j) = self.coords(node);
        Vec2::new(self.origin.x + i as f64 * self.h, self.origin.y + j as f64 * self.h)
    }

    pub fn is_inside(&self, node: NodeId) -> bool {
        self.inside[node]
    }

    pub fn is_boundary(&self, node: NodeId) -> bool {
        self.boundary[node]
    }

    pub fn inside_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nx * self.ny).filter(move |n| self.inside[*n])
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nx * self.ny).filter(move |n| self.boundary[*n])
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    /// Nearest lattice node to a point, if inside.
    pub fn node_at(&self, p: Vec2) -> Option<NodeId> {
        let i = ((p.x - self.origin.x) / self.h).round();
        let j = ((p.y - self.origin.y) / self.h).round();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        let node = self.idx(i as usize, j as usize);
        self.inside[node].then_some(node)
    }

    /// Neighbor via offset k, or None when the edge leaves the mask or crosses
    /// an outside cell.
    pub fn neighbor(&self, node: NodeId, k: usize) -> Option<NodeId> {
        let o = &self.offsets[k];
        let (i, j) = self.coords(node);
        let ni = i as i64 + o.dx as i64;
        let nj = j as i64 + o.dy as i64;
        if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
            return None;
        }
        let n = ni as usize + self.nx * nj as usize;
        if !self.inside[n] {
            return None;
        }
        for &(ix, iy) in &o.intermediates {
            let mi = i as i64 + ix as i64;
            let mj = j as i64 + iy as i64;
            if mi < 0 || mj < 0 || mi >= self.nx as i64 || mj >= self.ny as i64 {
                return None;
            }
            if !self.inside[mi as usize + self.nx * mj as usize] {
                return None;
            }
        }
        Some(n)
    }

    /// Midpoint of the edge (a, b), computed from the canonical (smaller-index)
    /// endpoint so both traversal directions agree bitwise.
    pub fn edge_midpoint(&self, a: NodeId, b: NodeId) -> Vec2 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let pl = self.pos(lo);
        let ph = self.pos(hi);
        Vec2::new(pl.x + (ph.x - pl.x) * 0.5, pl.y + (ph.y - pl.y) * 0.5)
    }

    /// Inside nodes at Chebyshev distance > margin cells from any outside node.
    pub fn interior_mask(&self, margin_cells: usize) -> Vec<bool> {
        let mut cur: Vec<bool> = (0..self.node_count())
            .map(|n| self.inside[n] && !self.boundary_touches_outside_8(n))
            .collect();
        for _ in 1..margin_cells.max(1) {
            let prev = cur.clone();
            for node in 0..self.node_count() {
                if !prev[node] {
                    continue;
                }
                let (i, j) = self.coords(node);
                let mut keep = true;
                'ring: for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let ni = i as i64 + di;
                        let nj = j as i64 + dj;
                        if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                            keep = false;
                            break 'ring;
                        }
                        if !prev[ni as usize + self.nx * nj as usize] {
                            keep = false;
                            break 'ring;
                        }
                    }
                }
                if !keep {
                    cur[node] = false;
                }
            }
        }
        cur
    }

    fn boundary_touches_outside_8(&self, node: NodeId) -> bool {
        let (i, j) = self.coords(node);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if (di, dj) == (0, 0) {
                    continue;
                }
                let ni = i as i64 + di;
                let nj = j as i64 + dj;
                if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                    return true;
                }
                if !self.inside[ni as usize + self.nx * nj as usize] {
                    return true;
                }
            }
        }
        false
    }
}

// ---------------------------------------------------------------------------
// Shortest paths
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceDirection {
    /// d(source, .) — paths leaving the source.
    FromSource,
    /// d(., source) — paths entering the source (edge-reversed graph).
    ToSource,
}

/// Directed intrinsic distances from/to one source, with geodesic back-pointers.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub source: NodeId,
    pub direction: DistanceDirection,
    /// None for the ambient euclidean distance d_U.
    pub lambda: Option<f64>,
    pub values: Vec<f64>,
    parents: Vec<u32>,
    /// Edges whose weight evaluated below zero and were clamped (floating-point
    /// underflow on zero-set-aligned edges).
    pub clamped_edges: usize,
}

impl DistanceField {
    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        let p = self.parents[node];
        (p != NO_PARENT).then_some(p as usize)
    }
}

struct HeapEntry {
    dist: f64,
    node: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on dist, ties on node id for determinism
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Dijkstra over the grid graph. `weight(from, to, offset_index)` is evaluated
/// on original-graph edges; `ToSource` runs on the edge-reversed graph.
/// `relax_into`: when given, relaxation may only settle nodes with
/// `relax_into[node]` (seeds are exempt); used by the patching operator to
/// keep chain interiors inside the small-slope region.
pub fn dijkstra<W>(
    grid: &GridDomain,
    seeds: &[(NodeId, f64)],
    direction: DistanceDirection,
    relax_into: Option<&[bool]>,
    mut weight: W,
) -> (Vec<f64>, Vec<u32>, usize)
where
    W: FnMut(NodeId, NodeId, usize) -> f64,
{
    let n = grid.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut parents = vec![NO_PARENT; n];
    let mut heap = BinaryHeap::new();
    let mut clamped = 0usize;
    for (s, v) in seeds {
        if dist[*s] > *v {
            dist[*s] = *v;
            heap.push(HeapEntry {
                dist: *v,
                node: *s as u32,
            });
        }
    }
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        let u = node as usize;
        if d > dist[u] {
            continue;
        }
        for k in 0..grid.offsets().len() {
            let Some(v) = grid.neighbor(u, k) else { continue };
            if let Some(mask) = relax_into {
                if !mask[v] {
                    continue;
                }
            }
            let mut w = match direction {
                DistanceDirection::FromSource => weight(u, v, k),
                // reversed graph: moving u -> v relaxes the original edge v -> u
                DistanceDirection::ToSource => weight(v, u, grid.offsets()[k].opposite),
            };
            if w < 0.0 {
                w = 0.0;
                clamped += 1;
            }
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                parents[v] = u as u32;
                heap.push(HeapEntry {
                    dist: nd,
                    node: v as u32,
                });
            }
        }
    }
    (dist, parents, clamped)
}

/// Euclidean path distance d_U from a source, restricted to the mask.
pub fn distance_du(grid: &GridDomain, source: NodeId) -> Result<DistanceField> {
    if !grid.is_inside(source) {
        return Err(Error::Domain("distance_du: source is outside the domain".into()));
    }
    let h = grid.h;
    let (values, parents, clamped) = dijkstra(
        grid,
        &[(source, 0.0)],
        DistanceDirection::FromSource,
        None,
        |_, _, k| grid.offsets()[k].norm * h,
    );
    Ok(DistanceField {
        source,
        direction: DistanceDirection::FromSource,
        lambda: None,
        values,
        parents,
        clamped_edges: clamped,
    })
}

/// Directed intrinsic distance at level lambda: d_lambda(source, .) or
/// d_lambda(., source), with edge weight L_lambda(midpoint, y - x).
pub fn distance_dlambda(
    grid: &GridDomain,
    spec: &Hamiltonian,
    lambda: f64,
    source: NodeId,
    direction: DistanceDirection,
) -> Result<DistanceField> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "distance_dlambda: lambda must be positive, got {lambda}"
        )));
    }
    if !grid.is_inside(source) {
        return Err(Error::Domain("distance_dlambda: source is outside the domain".into()));
    }
    let h = grid.h;
    let mut failure: Option<Error> = None;
    let (values, parents, clamped) = dijkstra(
        grid,
        &[(source, 0.0)],
        direction,
        None,
        |a, b, k| {
            let o = &grid.offsets()[k];
            let mid = grid.edge_midpoint(a, b);
            let q = Vec2::new(o.dx as f64 * h, o.dy as f64 * h);
            match spec.sublevel_support(mid, lambda, q) {
                Ok(w) => w,
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                    f64::INFINITY
                }
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(DistanceField {
        source,
        direction,
        lambda: Some(lambda),
        values,
        parents,
        clamped_edges: clamped,
    })
}

/// Intrinsic cone field d_lambda(vertex, .) + c or d_lambda(., vertex) + c.
pub fn cone_function(
    grid: &GridDomain,
    spec: &Hamiltonian,
    lambda: f64,
    vertex: NodeId,
    direction: DistanceDirection,
    c: f64,
) -> Result<Vec<f64>> {
    let field = distance_dlambda(grid, spec, lambda, vertex, direction)?;
    Ok(field.values.iter().map(|v| v + c).collect())
}

/// A source-to-target geodesic recovered from back-pointers.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    /// Ordered from source to target.
    pub nodes: Vec<NodeId>,
    pub length: f64,
}

pub fn extract_geodesic(field: &DistanceField, target: NodeId) -> Result<GeodesicPath> {
    if !field.values[target].is_finite() {
        return Err(Error::Reachability(format!(
            "extract_geodesic: target {target} is unreachable"
        )));
    }
    let mut nodes = vec![target];
    let mut cur = target;
    while let Some(p) = field.parent(cur) {
        nodes.push(p);
        cur = p;
        if nodes.len() > field.values.len() {
            return Err(Error::Reachability("extract_geodesic: parent cycle".into()));
        }
    }
    if cur != field.source {
        return Err(Error::Reachability(
            "extract_geodesic: back-pointers do not reach the source".into(),
        ));
    }
    nodes.reverse();
    Ok(GeodesicPath {
        nodes,
        length: field.values[target],
    })
}
