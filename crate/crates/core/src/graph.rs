//! Finite graphs, hypercubic boxes and their boundary extensions.
//!
//! Interior vertices carry ids `0..n_interior`; boundary vertices follow.
//! Interior edges carry ids `0..n_interior_edges`; boundary edges follow and
//! are stored as `[interior, boundary]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Coordinates of a box `{lo, ..., lo + side - 1}^dim`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeInfo {
    pub side: usize,
    pub dim: usize,
    pub lo: i64,
}

/// A closed walk used by the cycle link move. Boundary vertices are merged
/// into a single ghost vertex, so a cycle may leave through one boundary edge
/// and come back through another.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortCycle {
    /// Edges in walk order.
    pub edges: Vec<EdgeId>,
    /// Interior vertices where two consecutive cycle edges meet, with the two
    /// edges joined there.
    pub joints: Vec<(VertexId, EdgeId, EdgeId)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    n_interior: usize,
    n_boundary: usize,
    edges: Vec<[VertexId; 2]>,
    n_interior_edges: usize,
    incidence: Vec<Vec<EdgeId>>,
    coords: Option<Vec<Vec<i64>>>,
    lattice: Option<LatticeInfo>,
    cycles: Vec<ShortCycle>,
}

/// Wire form of a [`Graph`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<[VertexId; 2]>,
    #[serde(default)]
    pub boundary_vertices: Vec<VertexId>,
    #[serde(default)]
    pub boundary_edges: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeInfo>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;

    fn try_from(j: GraphJson) -> Result<Self> {
        let n = j.vertices.len();
        if j.vertices.iter().enumerate().any(|(i, &v)| i != v) {
            return Err(Error::InvalidGraph("vertex ids must be 0..n in order".into()));
        }
        let nb = j.boundary_vertices.len();
        if j.boundary_vertices.iter().enumerate().any(|(i, &v)| v != n + i) {
            return Err(Error::InvalidGraph(
                "boundary vertex ids must follow the interior ids".into(),
            ));
        }
        let mut g = Graph::with_boundary(n, &j.edges, nb, &j.boundary_edges)?;
        if let Some(c) = j.coords {
            if c.len() != n + nb {
                return Err(Error::InvalidGraph("coords length mismatch".into()));
            }
            g.coords = Some(c);
        }
        g.lattice = j.lattice;
        Ok(g)
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson {
            vertices: (0..g.n_interior).collect(),
            edges: g.edges[..g.n_interior_edges].to_vec(),
            boundary_vertices: (g.n_interior..g.n_interior + g.n_boundary).collect(),
            boundary_edges: g.edges[g.n_interior_edges..].to_vec(),
            coords: g.coords,
            lattice: g.lattice,
        }
    }
}

impl Graph {
    /// Graph without boundary from an explicit edge list.
    pub fn from_edges(n_vertices: usize, edges: &[[VertexId; 2]]) -> Result<Self> {
        Self::with_boundary(n_vertices, edges, 0, &[])
    }

    /// Graph with boundary. Boundary vertex ids are `n_interior..n_interior + n_boundary`
    /// and every boundary edge is `[interior, boundary]`.
    pub fn with_boundary(
        n_interior: usize,
        edges: &[[VertexId; 2]],
        n_boundary: usize,
        boundary_edges: &[[VertexId; 2]],
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &[a, b] in edges {
            if a >= n_interior || b >= n_interior {
                return Err(Error::InvalidGraph(format!(
                    "edge {{{a},{b}}} has an endpoint that is not an interior vertex"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidGraph(format!("duplicate edge {{{a},{b}}}")));
            }
        }
        for &[a, b] in boundary_edges {
            if a >= n_interior || b < n_interior || b >= n_interior + n_boundary {
                return Err(Error::InvalidGraph(format!(
                    "boundary edge ({a},{b}) must join an interior and a boundary vertex"
                )));
            }
            if !seen.insert((a, b)) {
                return Err(Error::InvalidGraph(format!("duplicate boundary edge ({a},{b})")));
            }
        }
        let mut all = edges.to_vec();
        all.extend_from_slice(boundary_edges);
        let mut incidence = vec![Vec::new(); n_interior + n_boundary];
        for (id, &[a, b]) in all.iter().enumerate() {
            incidence[a].push(id);
            incidence[b].push(id);
        }
        let mut g = Graph {
            n_interior,
            n_boundary,
            edges: all,
            n_interior_edges: edges.len(),
            incidence,
            coords: None,
            lattice: None,
            cycles: Vec::new(),
        };
        g.cycles = g.find_short_cycles();
        Ok(g)
    }

    pub fn single_edge() -> Self {
        Self::from_edges(2, &[[0, 1]]).expect("valid fixture")
    }

    /// Path on `n_edges + 1` vertices.
    pub fn path(n_edges: usize) -> Self {
        let edges: Vec<_> = (0..n_edges).map(|i| [i, i + 1]).collect();
        Self::from_edges(n_edges + 1, &edges).expect("valid fixture")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least three vertices");
        let edges: Vec<_> = (0..n).map(|i| [i, (i + 1) % n]).collect();
        Self::from_edges(n, &edges).expect("valid fixture")
    }

    pub fn triangle() -> Self {
        Self::cycle(3)
    }

    pub fn square() -> Self {
        Self::cycle(4)
    }

    /// `Λ_L = {-L, ..., L}^d` with nearest-neighbour edges.
    pub fn hypercubic(l: usize, d: usize) -> Result<Self> {
        Self::lattice_box(2 * l + 1, d, -(l as i64), false)
    }

    /// `Λ_L` together with its exterior sites at distance one.
    pub fn hypercubic_with_boundary(l: usize, d: usize) -> Result<Self> {
        Self::lattice_box(2 * l + 1, d, -(l as i64), true)
    }

    /// Box `{0, ..., side-1}^d`, optionally with its exterior boundary.
    pub fn cube(side: usize, d: usize, boundary: bool) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidGraph("box side must be positive".into()));
        }
        Self::lattice_box(side, d, 0, boundary)
    }

    fn lattice_box(side: usize, d: usize, lo: i64, boundary: bool) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        let n = side
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidGraph("box too large".into()))?;
        let coords: Vec<Vec<i64>> = (0..n)
            .map(|mut id| {
                (0..d)
                    .map(|_| {
                        let c = (id % side) as i64 + lo;
                        id /= side;
                        c
                    })
                    .collect()
            })
            .collect();
        let stride = |axis: usize| side.pow(axis as u32);
        let mut edges = Vec::new();
        for (id, c) in coords.iter().enumerate() {
            for axis in 0..d {
                if c[axis] - lo + 1 < side as i64 {
                    edges.push([id, id + stride(axis)]);
                }
            }
        }
        let mut all_coords = coords.clone();
        let mut boundary_edges = Vec::new();
        if boundary {
            for (id, c) in coords.iter().enumerate() {
                for axis in 0..d {
                    for step in [-1i64, 1] {
                        let v = c[axis] + step;
                        if v < lo || v >= lo + side as i64 {
                            let mut y = c.clone();
                            y[axis] = v;
                            boundary_edges.push([id, all_coords.len()]);
                            all_coords.push(y);
                        }
                    }
                }
            }
        }
        let mut g = Self::with_boundary(n, &edges, all_coords.len() - n, &boundary_edges)?;
        g.coords = Some(all_coords);
        g.lattice = Some(LatticeInfo { side, dim: d, lo });
        Ok(g)
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.n_interior + self.n_boundary
    }

    pub fn n_interior_edges(&self) -> usize {
        self.n_interior_edges
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.len() - self.n_interior_edges
    }

    /// Total number of edge ids, interior and boundary.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_boundary(&self) -> bool {
        self.n_boundary > 0
    }

    pub fn is_interior(&self, v: VertexId) -> bool {
        v < self.n_interior
    }

    pub fn is_boundary_edge(&self, e: EdgeId) -> bool {
        e >= self.n_interior_edges
    }

    pub fn endpoints(&self, e: EdgeId) -> [VertexId; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[VertexId; 2]] {
        &self.edges
    }

    /// The endpoint of `e` other than `v`.
    pub fn other(&self, e: EdgeId, v: VertexId) -> VertexId {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Which side (0 or 1) of edge `e` sits at `v`.
    pub fn side_at(&self, e: EdgeId, v: VertexId) -> usize {
        if self.edges[e][0] == v {
            0
        } else {
            1
        }
    }

    /// Edge ids containing `x`, ascending.
    pub fn incident_edges(&self, x: VertexId) -> Result<&[EdgeId]> {
        self.incidence
            .get(x)
            .map(Vec::as_slice)
            .ok_or(Error::UnknownVertex(x))
    }

    /// Unchecked version of [`Graph::incident_edges`] for hot loops.
    #[inline]
    pub fn incident(&self, x: VertexId) -> &[EdgeId] {
        &self.incidence[x]
    }

    pub fn degree(&self, x: VertexId) -> usize {
        self.incidence[x].len()
    }

    pub fn lattice(&self) -> Option<&LatticeInfo> {
        self.lattice.as_ref()
    }

    pub fn coords(&self, v: VertexId) -> Option<&[i64]> {
        self.coords.as_ref().map(|c| c[v].as_slice())
    }

    /// Vertex with the given coordinates, if the graph is a lattice box.
    pub fn vertex_at(&self, c: &[i64]) -> Option<VertexId> {
        let lat = self.lattice.as_ref()?;
        if c.len() != lat.dim {
            return None;
        }
        let mut id = 0usize;
        for (axis, &x) in c.iter().enumerate() {
            let k = x - lat.lo;
            if k < 0 || k >= lat.side as i64 {
                return None;
            }
            id += k as usize * lat.side.pow(axis as u32);
        }
        Some(id)
    }

    /// The origin for `Λ_L`; the lowest-index site nearest the centre for other boxes.
    pub fn center(&self) -> VertexId {
        match &self.lattice {
            Some(lat) => {
                let mid = lat.lo + (lat.side as i64 - 1) / 2;
                self.vertex_at(&vec![mid; lat.dim]).unwrap_or(0)
            }
            None => 0,
        }
    }

    /// Elementary cycles of length at most four, with all boundary vertices merged.
    pub fn short_cycles(&self) -> &[ShortCycle] {
        &self.cycles
    }

    fn find_short_cycles(&self) -> Vec<ShortCycle> {
        let ghost = self.n_interior;
        let node = |v: VertexId| if v >= self.n_interior { ghost } else { v };
        let n_nodes = self.n_interior + usize::from(self.n_boundary > 0);
        let mut adj: Vec<Vec<(EdgeId, usize)>> = vec![Vec::new(); n_nodes];
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            adj[node(a)].push((e, node(b)));
            adj[node(b)].push((e, node(a)));
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut path_nodes = Vec::with_capacity(5);
        let mut path_edges = Vec::with_capacity(4);
        for start in 0..n_nodes {
            path_nodes.clear();
            path_edges.clear();
            path_nodes.push(start);
            self.extend_cycles(
                &adj,
                start,
                &mut path_nodes,
                &mut path_edges,
                &mut seen,
                &mut out,
            );
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_cycles(
        &self,
        adj: &[Vec<(EdgeId, usize)>],
        start: usize,
        nodes: &mut Vec<usize>,
        edges: &mut Vec<EdgeId>,
        seen: &mut BTreeSet<Vec<EdgeId>>,
        out: &mut Vec<ShortCycle>,
    ) {
        let here = *nodes.last().unwrap();
        for &(e, next) in &adj[here] {
            if edges.contains(&e) {
                continue;
            }
            if next == start && !edges.is_empty() {
                let mut cyc = edges.clone();
                cyc.push(e);
                let mut key = cyc.clone();
                key.sort_unstable();
                if seen.insert(key) {
                    let k = cyc.len();
                    let joints = (0..k)
                        .map(|i| (nodes[(i + 1) % k], cyc[i], cyc[(i + 1) % k]))
                        .filter(|&(v, _, _)| v < self.n_interior)
                        .collect();
                    out.push(ShortCycle { edges: cyc, joints });
                }
                continue;
            }
            if next <= start || nodes.contains(&next) || edges.len() >= 3 {
                continue;
            }
            nodes.push(next);
            edges.push(e);
            self.extend_cycles(adj, start, nodes, edges, seen, out);
            nodes.pop();
            edges.pop();
        }
    }
}
