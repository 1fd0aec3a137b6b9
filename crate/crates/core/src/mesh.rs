//! Triangle meshes with one or two faces per edge.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Vector3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type VertexId = usize;
/// Oriented index triple.
pub type Triangle = [VertexId; 3];
/// Ordered vertex pair.
pub type Edge = (VertexId, VertexId);

pub const DEGENERACY_RATIO: f64 = 1e-12;
pub const WELD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Interior,
    Boundary,
}

/// Area below `DEGENERACY_RATIO * longest_edge^2` counts as degenerate.
pub fn is_degenerate(p: &Point3, q: &Point3, r: &Point3) -> bool {
    let l2 = (q - p)
        .norm_squared()
        .max((r - q).norm_squared())
        .max((p - r).norm_squared());
    let area = 0.5 * (q - p).cross(&(r - p)).norm();
    !(area >= DEGENERACY_RATIO * l2) || l2 == 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialSurface {
    positions: Vec<Point3>,
    triangles: Vec<Triangle>,
}

fn edge_key(a: VertexId, b: VertexId) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SimplicialSurface {
    /// Builds a surface and checks every invariant.
    pub fn new(positions: Vec<Point3>, triangles: Vec<Triangle>) -> Result<Self> {
        let s = SimplicialSurface { positions, triangles };
        s.validate()?;
        Ok(s)
    }

    /// No validation. Callers are expected to weld or validate later.
    pub fn from_parts_unchecked(positions: Vec<Point3>, triangles: Vec<Triangle>) -> Self {
        SimplicialSurface { positions, triangles }
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn position(&self, v: VertexId) -> Point3 {
        self.positions[v]
    }

    /// Same connectivity, new positions.
    pub fn with_positions(&self, positions: Vec<Point3>) -> Self {
        assert_eq!(positions.len(), self.positions.len());
        SimplicialSurface {
            positions,
            triangles: self.triangles.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<Point3>, Vec<Triangle>) {
        (self.positions, self.triangles)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        for (i, p) in self.positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidArgument(format!("vertex {i} is not finite")));
            }
        }
        for t in &self.triangles {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidArgument(format!("triangle {t:?} out of range")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Degenerate(format!("triangle {t:?} repeats a vertex")));
            }
            if is_degenerate(&self.positions[t[0]], &self.positions[t[1]], &self.positions[t[2]]) {
                return Err(Error::Degenerate(format!("triangle {t:?} has no area")));
            }
        }
        self.check_edges()?;
        let reps = cluster(&self.positions, WELD_TOLERANCE);
        if let Some(i) = reps.iter().enumerate().position(|(i, &r)| r != i) {
            return Err(Error::Degenerate(format!("vertices {} and {} coincide", reps[i], i)));
        }
        Ok(())
    }

    fn check_edges(&self) -> Result<()> {
        let mut dir: HashMap<Edge, usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *dir.entry((a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &c) in &dir {
            let rev = dir.get(&(b, a)).copied().unwrap_or(0);
            if c + rev > 2 {
                let (x, y) = edge_key(a, b);
                return Err(Error::NonManifold(x, y, c + rev));
            }
            if c > 1 {
                let (x, y) = edge_key(a, b);
                return Err(Error::Orientation(x, y));
            }
        }
        Ok(())
    }

    /// Triangles incident to each unordered edge.
    pub fn edge_faces(&self) -> BTreeMap<Edge, Vec<usize>> {
        let mut m: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                m.entry(edge_key(t[k], t[(k + 1) % 3])).or_default().push(i);
            }
        }
        m
    }

    /// Triangles containing `p`, each rotated so that `p` comes first.
    pub fn star(&self, p: VertexId) -> Result<Vec<Triangle>> {
        if p >= self.positions.len() {
            return Err(Error::InvalidArgument(format!("unknown vertex {p}")));
        }
        Ok(self
            .triangles
            .iter()
            .filter_map(|t| {
                let k = t.iter().position(|&v| v == p)?;
                Some([t[k], t[(k + 1) % 3], t[(k + 2) % 3]])
            })
            .collect())
    }

    /// Edges with exactly one incident triangle, directed as in that triangle.
    pub fn boundary(&self) -> Vec<Edge> {
        let counts = self.edge_faces();
        let mut edges: Vec<Edge> = Vec::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if counts[&edge_key(a, b)].len() == 1 {
                    edges.push((a, b));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    pub fn classify_vertices(&self) -> Vec<VertexKind> {
        let mut kind = vec![VertexKind::Interior; self.positions.len()];
        for (a, b) in self.boundary() {
            kind[a] = VertexKind::Boundary;
            kind[b] = VertexKind::Boundary;
        }
        kind
    }

    /// Interior vertices that belong to at least one triangle.
    pub fn interior_vertices(&self) -> Vec<VertexId> {
        let mut used = vec![false; self.positions.len()];
        for t in &self.triangles {
            for &v in t {
                used[v] = true;
            }
        }
        self.classify_vertices()
            .into_iter()
            .enumerate()
            .filter(|&(i, k)| k == VertexKind::Interior && used[i])
            .map(|(i, _)| i)
            .collect()
    }

    /// True when the link of `p` is one closed cycle.
    pub fn star_is_closed_fan(&self, p: VertexId) -> bool {
        let star = match self.star(p) {
            Ok(s) if !s.is_empty() => s,
            _ => return false,
        };
        let mut next: HashMap<VertexId, VertexId> = HashMap::new();
        for t in &star {
            if next.insert(t[1], t[2]).is_some() {
                return false;
            }
        }
        let start = star[0][1];
        let mut cur = start;
        for steps in 1..=star.len() {
            match next.get(&cur) {
                Some(&n) => cur = n,
                None => return false,
            }
            if cur == start {
                return steps == star.len();
            }
        }
        false
    }

    pub fn longest_edge(&self) -> f64 {
        let mut l: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                l = l.max((self.positions[t[k]] - self.positions[t[(k + 1) % 3]]).norm());
            }
        }
        l
    }

    /// Axis-aligned bounds of the vertices; `None` when empty.
    pub fn bbox(&self) -> Option<(Point3, Point3)> {
        let first = *self.positions.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Some((lo, hi))
    }

    pub fn reversed(&self) -> Self {
        SimplicialSurface {
            positions: self.positions.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
        }
    }

    /// Disjoint union without welding.
    pub fn concat(parts: &[SimplicialSurface]) -> Self {
        let mut positions = Vec::new();
        let mut triangles = Vec::new();
        for s in parts {
            let off = positions.len();
            positions.extend_from_slice(&s.positions);
            triangles.extend(s.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        }
        SimplicialSurface { positions, triangles }
    }

    /// Only the listed triangles, with unused vertices dropped.
    pub fn subsurface(&self, faces: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.positions.len()];
        let mut positions = Vec::new();
        let mut triangles = Vec::new();
        for &f in faces {
            let t = self.triangles[f];
            let mut nt = [0; 3];
            for k in 0..3 {
                if map[t[k]] == usize::MAX {
                    map[t[k]] = positions.len();
                    positions.push(self.positions[t[k]]);
                }
                nt[k] = map[t[k]];
            }
            triangles.push(nt);
        }
        SimplicialSurface { positions, triangles }
    }
}

/// Representative (smallest index) of each point's tolerance cluster.
pub(crate) fn cluster(points: &[Point3], tol: f64) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let cell = |p: &Point3| -> [i64; 3] {
        [
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in list {
                            if (points[j] - p).norm() <= tol {
                                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                                if a != b {
                                    parent[a.max(b)] = a.min(b);
                                }
                            }
                        }
                    }
                }
            }
        }
        grid.entry(c).or_default().push(i);
    }
    (0..points.len()).map(|i| find(&mut parent, i)).collect()
}

fn lex_cmp(a: &Point3, b: &Point3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

/// Merges coincident vertices, collapses duplicate triangles and orients
/// the result. Vertices are relabelled in lexicographic position order.
pub fn weld(surface: &SimplicialSurface, tol: f64) -> Result<SimplicialSurface> {
    weld_with_map(surface, tol).map(|(s, _)| s)
}

/// As `weld`, also returning the new index of every input vertex.
pub fn weld_with_map(surface: &SimplicialSurface, tol: f64) -> Result<(SimplicialSurface, Vec<usize>)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("weld tolerance must be positive".into()));
    }
    let reps = cluster(&surface.positions, tol);
    let mut roots: Vec<usize> = reps.clone();
    roots.sort_unstable();
    roots.dedup();
    roots.sort_by(|&a, &b| lex_cmp(&surface.positions[a], &surface.positions[b]).then(a.cmp(&b)));
    let mut new_of_root = HashMap::new();
    for (k, &r) in roots.iter().enumerate() {
        new_of_root.insert(r, k);
    }
    let map: Vec<usize> = reps.iter().map(|r| new_of_root[r]).collect();
    let positions: Vec<Point3> = roots.iter().map(|&r| surface.positions[r]).collect();

    let mut seen = std::collections::HashSet::new();
    let mut triangles = Vec::new();
    for t in &surface.triangles {
        let nt = [map[t[0]], map[t[1]], map[t[2]]];
        if nt[0] == nt[1] || nt[1] == nt[2] || nt[0] == nt[2] {
            return Err(Error::Degenerate(format!("welding collapsed triangle {t:?}")));
        }
        let mut key = nt;
        key.sort_unstable();
        if seen.insert(key) {
            if is_degenerate(&positions[nt[0]], &positions[nt[1]], &positions[nt[2]]) {
                return Err(Error::Degenerate(format!("triangle {nt:?} has no area")));
            }
            triangles.push(nt);
        }
    }
    let s = SimplicialSurface { positions, triangles };
    for (&(a, b), f) in &s.edge_faces() {
        if f.len() > 2 {
            return Err(Error::NonManifold(a, b, f.len()));
        }
    }
    Ok((orient_consistently(&s)?, map))
}

/// Flips triangles so that every interior edge is traversed in opposite
/// directions. The lowest-indexed triangle of each component keeps its order.
pub fn orient_consistently(surface: &SimplicialSurface) -> Result<SimplicialSurface> {
    let ef = surface.edge_faces();
    let n = surface.triangles.len();
    let mut flip: Vec<Option<bool>> = vec![None; n];
    let mut tris = surface.triangles.clone();
    let directed = |t: &Triangle, a: usize, b: usize| -> bool { (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b) };
    for s in 0..n {
        if flip[s].is_some() {
            continue;
        }
        flip[s] = Some(false);
        let mut queue = VecDeque::from([s]);
        while let Some(f) = queue.pop_front() {
            let t = tris[f];
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                for &g in &ef[&edge_key(a, b)] {
                    if g == f {
                        continue;
                    }
                    // neighbour must traverse b -> a
                    let need_flip = directed(&surface.triangles[g], a, b);
                    match flip[g] {
                        None => {
                            flip[g] = Some(need_flip);
                            let o = surface.triangles[g];
                            tris[g] = if need_flip { [o[0], o[2], o[1]] } else { o };
                            queue.push_back(g);
                        }
                        Some(_) => {
                            if directed(&tris[g], a, b) {
                                return Err(Error::NonOrientable);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(SimplicialSurface {
        positions: surface.positions.clone(),
        triangles: tris,
    })
}
