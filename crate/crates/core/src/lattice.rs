//! Finite lattice domains: square grids and honeycomb grids in a brick-wall
//! embedding, plus the primal/dual intervals and boundary orientation data
//! everything else is built on.
//!
//! Edge midpoints are addressed by half-integer coordinates stored as doubled
//! integers `(x2, y2) = (2x, 2y)`, so exactly one of `x2`, `y2` is odd for
//! every edge. This keeps indexing exact; floating-point positions only enter
//! through the true honeycomb embedding carried as metadata.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::{Error, Result, C64};

pub type EdgeId = usize;
pub type FaceId = usize;
pub type VertexId = usize;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Hexagonal,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Which wall of a rectangular domain a boundary edge sits on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Wall {
    Left,
    Right,
    Bottom,
    Top,
}

/// An edge, identified by the doubled coordinates of its midpoint.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub x2: i64,
    pub y2: i64,
}

impl Edge {
    pub fn orientation(&self) -> Orientation {
        debug_assert!((self.x2 & 1) != (self.y2 & 1));
        if self.x2 & 1 == 1 {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        }
    }

    /// Midpoint embedded in the complex plane (brick coordinates).
    pub fn midpoint(&self) -> C64 {
        C64::new(self.x2 as f64 / 2.0, self.y2 as f64 / 2.0)
    }

    /// Integer endpoints of the edge in vertex coordinates.
    pub fn endpoints(&self) -> [(i64, i64); 2] {
        match self.orientation() {
            Orientation::Horizontal => [
                ((self.x2 - 1) / 2, self.y2 / 2),
                ((self.x2 + 1) / 2, self.y2 / 2),
            ],
            Orientation::Vertical => [
                (self.x2 / 2, (self.y2 - 1) / 2),
                (self.x2 / 2, (self.y2 + 1) / 2),
            ],
        }
    }
}

/// A face together with its incident edges.
///
/// Square faces expose exactly four edges labeled E, N, W, S. Honeycomb
/// (brick) faces expose all six incident edges plus a distinguished four-edge
/// cyclic view used by the literal four-term loop relations; reports that
/// consume the four-edge view carry a discrepancy flag because the honeycomb
/// face really has six sides.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Face {
    pub id: FaceId,
    /// Lower-left corner of the face in vertex coordinates.
    pub corner: (i64, i64),
    /// All incident edges, deterministic order.
    pub edges: Vec<EdgeId>,
    /// Square: `[E, N, W, S]`. Hexagonal: the four-edge cyclic view
    /// `[W, NW, NE, E]`.
    pub cycle: [EdgeId; 4],
}

/// Finite lattice domain.
#[derive(Clone, Debug)]
pub struct DomainGrid {
    pub kind: LatticeKind,
    pub width: usize,
    pub height: usize,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    /// Edge ids with fewer than two incident faces, ascending.
    pub boundary: Vec<EdgeId>,
    edge_index: HashMap<(i64, i64), EdgeId>,
    faces_of_edge: Vec<Vec<FaceId>>,
    vertices: Vec<(i64, i64)>,
    vertex_index: HashMap<(i64, i64), VertexId>,
    edges_of_vertex: Vec<Vec<EdgeId>>,
    /// True honeycomb embedding of each vertex; identity-ish for square grids.
    true_vertex_pos: Vec<C64>,
}

impl DomainGrid {
    /// Rectangular domain of `width x height` square faces.
    pub fn square(width: usize, height: usize) -> Result<Self> {
        if width < 1 || height < 1 {
            return Err(Error::InvalidDimension {
                width: width as i64,
                height: height as i64,
            });
        }
        let mut builder = GridBuilder::default();
        for fy in 0..height as i64 {
            for fx in 0..width as i64 {
                let e = builder.edge(2 * fx + 2, 2 * fy + 1);
                let n = builder.edge(2 * fx + 1, 2 * fy + 2);
                let w = builder.edge(2 * fx, 2 * fy + 1);
                let s = builder.edge(2 * fx + 1, 2 * fy);
                builder.face((fx, fy), vec![e, n, w, s], [e, n, w, s]);
            }
        }
        Ok(builder.finish(LatticeKind::Square, width, height, |v| {
            C64::new(v.0 as f64, v.1 as f64)
        }))
    }

    /// Honeycomb domain of `width x height` hexagons, brick-wall embedded.
    ///
    /// A hexagon in row `r` is the brick spanning `x in [x0, x0+2]`,
    /// `y in [r, r+1]` with `x0 = 2c + (r mod 2)`; vertical edges exist at
    /// `(x, r + 1/2)` exactly when `x ≡ r (mod 2)`. Brick coordinates keep
    /// every midpoint half-integer; the unit-edge honeycomb positions are
    /// carried per vertex for geometry-dependent factors.
    pub fn hexagonal(width: usize, height: usize) -> Result<Self> {
        if width < 1 || height < 1 {
            return Err(Error::InvalidDimension {
                width: width as i64,
                height: height as i64,
            });
        }
        let mut builder = GridBuilder::default();
        for r in 0..height as i64 {
            for c in 0..width as i64 {
                let x0 = 2 * c + (r & 1);
                let s1 = builder.edge(2 * x0 + 1, 2 * r);
                let s2 = builder.edge(2 * x0 + 3, 2 * r);
                let n1 = builder.edge(2 * x0 + 1, 2 * r + 2);
                let n2 = builder.edge(2 * x0 + 3, 2 * r + 2);
                let w = builder.edge(2 * x0, 2 * r + 1);
                let e = builder.edge(2 * x0 + 4, 2 * r + 1);
                builder.face((x0, r), vec![e, n1, n2, w, s1, s2], [w, n1, n2, e]);
            }
        }
        Ok(builder.finish(LatticeKind::Hexagonal, width, height, |v| {
            let (x, y) = v;
            let s = if (x + y) % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(x as f64 * 3f64.sqrt() / 2.0, 1.5 * y as f64 + 0.25 * s)
        }))
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn edge_at(&self, x2: i64, y2: i64) -> Option<EdgeId> {
        self.edge_index.get(&(x2, y2)).copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[(i64, i64)] {
        &self.vertices
    }

    pub fn vertex_at(&self, x: i64, y: i64) -> Option<VertexId> {
        self.vertex_index.get(&(x, y)).copied()
    }

    pub fn edges_of_vertex(&self, v: VertexId) -> &[EdgeId] {
        &self.edges_of_vertex[v]
    }

    pub fn faces_of_edge(&self, e: EdgeId) -> &[FaceId] {
        &self.faces_of_edge[e]
    }

    pub fn is_boundary(&self, e: EdgeId) -> bool {
        self.faces_of_edge[e].len() < 2
    }

    /// True (unit-edge) embedding of a vertex.
    pub fn true_vertex_pos(&self, v: VertexId) -> C64 {
        self.true_vertex_pos[v]
    }

    /// True embedding of an edge midpoint.
    pub fn true_edge_midpoint(&self, e: EdgeId) -> C64 {
        let [a, b] = self.edges[e].endpoints();
        let va = self.vertex_index[&a];
        let vb = self.vertex_index[&b];
        0.5 * (self.true_vertex_pos[va] + self.true_vertex_pos[vb])
    }

    /// Wall classification of a boundary edge on a rectangular square grid.
    pub fn wall(&self, e: EdgeId) -> Option<Wall> {
        if self.kind != LatticeKind::Square || !self.is_boundary(e) {
            return None;
        }
        let edge = self.edges[e];
        match edge.orientation() {
            Orientation::Vertical if edge.x2 == 0 => Some(Wall::Left),
            Orientation::Vertical => Some(Wall::Right),
            Orientation::Horizontal if edge.y2 == 0 => Some(Wall::Bottom),
            Orientation::Horizontal => Some(Wall::Top),
        }
    }

    /// The clockwise boundary phase tau_cw of a boundary edge.
    ///
    /// Vertical edges carry values in {+1, -1} and horizontal edges values in
    /// {+i, -i}. The sign within each class is fixed by counterclockwise
    /// traversal of the rectangle: left wall +1, bottom wall +i, right wall
    /// -1, top wall -i. Honeycomb boundaries reuse the orientation classes
    /// with the positive representative.
    pub fn boundary_phase(&self, e: EdgeId) -> Result<BoundaryPhase> {
        if !self.is_boundary(e) {
            return Err(Error::NotBoundary(e));
        }
        let value = match self.wall(e) {
            Some(Wall::Left) => C64::new(1.0, 0.0),
            Some(Wall::Right) => C64::new(-1.0, 0.0),
            Some(Wall::Bottom) => C64::new(0.0, 1.0),
            Some(Wall::Top) => C64::new(0.0, -1.0),
            None => match self.edges[e].orientation() {
                Orientation::Vertical => C64::new(1.0, 0.0),
                Orientation::Horizontal => C64::new(0.0, 1.0),
            },
        };
        Ok(BoundaryPhase { edge: e, value })
    }

    /// JSON-serializable view with doubled-integer coordinates.
    pub fn to_schema(&self) -> GridSchema {
        GridSchema {
            lattice: self.kind,
            width: self.width,
            height: self.height,
            edges: self.edges.clone(),
            faces: self.faces.clone(),
            boundary: self.boundary.clone(),
        }
    }
}

/// Serialization schema: `{lattice, width, height, edges:[{id,x2,y2}], faces, boundary}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSchema {
    pub lattice: LatticeKind,
    pub width: usize,
    pub height: usize,
    pub edges: Vec<Edge>,
    pub faces: Vec<Face>,
    pub boundary: Vec<EdgeId>,
}

#[derive(Default)]
struct GridBuilder {
    edges: Vec<Edge>,
    edge_index: HashMap<(i64, i64), EdgeId>,
    faces: Vec<Face>,
}

impl GridBuilder {
    fn edge(&mut self, x2: i64, y2: i64) -> EdgeId {
        if let Some(&id) = self.edge_index.get(&(x2, y2)) {
            return id;
        }
        let id = self.edges.len();
        self.edges.push(Edge { id, x2, y2 });
        self.edge_index.insert((x2, y2), id);
        id
    }

    fn face(&mut self, corner: (i64, i64), edges: Vec<EdgeId>, cycle: [EdgeId; 4]) {
        let id = self.faces.len();
        self.faces.push(Face {
            id,
            corner,
            edges,
            cycle,
        });
    }

    fn finish(
        self,
        kind: LatticeKind,
        width: usize,
        height: usize,
        embed: fn((i64, i64)) -> C64,
    ) -> DomainGrid {
        let mut faces_of_edge = vec![Vec::new(); self.edges.len()];
        for f in &self.faces {
            for &e in &f.edges {
                faces_of_edge[e].push(f.id);
            }
        }
        let boundary: Vec<EdgeId> = (0..self.edges.len())
            .filter(|&e| faces_of_edge[e].len() < 2)
            .collect();

        let mut vertex_index = HashMap::new();
        let mut vertices = Vec::new();
        let mut edges_of_vertex: Vec<Vec<EdgeId>> = Vec::new();
        for e in &self.edges {
            for v in e.endpoints() {
                let vid = *vertex_index.entry(v).or_insert_with(|| {
                    vertices.push(v);
                    edges_of_vertex.push(Vec::new());
                    vertices.len() - 1
                });
                edges_of_vertex[vid].push(e.id);
            }
        }
        for edges in &mut edges_of_vertex {
            edges.sort_unstable();
        }
        let true_vertex_pos = vertices.iter().map(|&v| embed(v)).collect();

        DomainGrid {
            kind,
            width,
            height,
            edges: self.edges,
            faces: self.faces,
            boundary,
            edge_index: self.edge_index,
            faces_of_edge,
            vertices,
            vertex_index,
            edges_of_vertex,
            true_vertex_pos,
        }
    }
}

/// Riemann boundary phase attached to one boundary edge.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPhase {
    pub edge: EdgeId,
    pub value: C64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    /// I = {a, a+1, ..., b} on the integers.
    Primal,
    /// I* = {a+1/2, ..., b-1/2}, dual to I.
    Dual,
    /// I** on the hexagonal lattice; same half-integer sites as I*, endpoints
    /// flagged as mid-edge positions.
    HexDual,
}

/// A primal or dual interval with its endpoint markers.
#[derive(Clone, Debug)]
pub struct DualInterval {
    pub a: i64,
    pub b: i64,
    pub kind: IntervalKind,
    /// Site positions as doubled integers (so dual sites are odd).
    pub sites2: Vec<i64>,
}

impl DualInterval {
    pub fn new(a: i64, b: i64, kind: IntervalKind) -> Result<Self> {
        if b <= a {
            return Err(Error::InvalidInterval(format!(
                "need b > a, got a = {a}, b = {b}"
            )));
        }
        let sites2 = match kind {
            IntervalKind::Primal => (a..=b).map(|k| 2 * k).collect(),
            IntervalKind::Dual | IntervalKind::HexDual => {
                (a..b).map(|k| 2 * k + 1).collect()
            }
        };
        Ok(DualInterval { a, b, kind, sites2 })
    }

    pub fn len(&self) -> usize {
        self.sites2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites2.is_empty()
    }

    /// Left endpoint k_L (as a doubled integer).
    pub fn k_left2(&self) -> i64 {
        self.sites2[0]
    }

    /// Right endpoint k_R (as a doubled integer).
    pub fn k_right2(&self) -> i64 {
        *self.sites2.last().unwrap()
    }

    /// Sites as f64 positions.
    pub fn sites(&self) -> Vec<f64> {
        self.sites2.iter().map(|&s| s as f64 / 2.0).collect()
    }
}

/// Build a square domain; see [`DomainGrid::square`].
pub fn build_square_domain(width: usize, height: usize) -> Result<DomainGrid> {
    DomainGrid::square(width, height)
}

/// Build a honeycomb domain; see [`DomainGrid::hexagonal`].
pub fn build_hex_domain(width: usize, height: usize) -> Result<DomainGrid> {
    DomainGrid::hexagonal(width, height)
}

/// Build a primal/dual interval; see [`DualInterval::new`].
pub fn build_dual_interval(a: i64, b: i64, kind: IntervalKind) -> Result<DualInterval> {
    DualInterval::new(a, b, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_square_domain() {
        let g = DomainGrid::square(1, 1).unwrap();
        assert_eq!(g.n_faces(), 1);
        assert_eq!(g.n_edges(), 4);
        assert_eq!(g.boundary.len(), 4);
    }

    #[test]
    fn two_by_two_counts_match_euler_formula() {
        // V - E + F = 1 for a disc: 9 - 12 + 4 = 1.
        let g = DomainGrid::square(2, 2).unwrap();
        assert_eq!(g.n_faces(), 4);
        assert_eq!(g.n_edges(), 12);
        assert_eq!(g.n_vertices(), 9);
        assert_eq!(g.boundary.len(), 8);
    }

    #[test]
    fn three_by_one_incidence_count() {
        let g = DomainGrid::square(3, 1).unwrap();
        assert_eq!(g.n_faces(), 3);
        assert_eq!(g.n_edges(), 10);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            DomainGrid::square(0, 3),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn face_edge_incidence_is_symmetric() {
        for g in [
            DomainGrid::square(3, 2).unwrap(),
            DomainGrid::hexagonal(2, 2).unwrap(),
        ] {
            for f in &g.faces {
                for &e in &f.edges {
                    assert!(g.faces_of_edge(e).contains(&f.id));
                }
            }
            for e in 0..g.n_edges() {
                for &f in g.faces_of_edge(e) {
                    assert!(g.faces[f].edges.contains(&e));
                }
            }
        }
    }

    #[test]
    fn square_faces_have_four_edges_hex_vertices_have_at_most_three() {
        let g = DomainGrid::square(3, 3).unwrap();
        for f in &g.faces {
            assert_eq!(f.edges.len(), 4);
        }
        let h = DomainGrid::hexagonal(3, 2).unwrap();
        for f in &h.faces {
            assert_eq!(f.edges.len(), 6);
        }
        for v in 0..h.n_vertices() {
            assert!(h.edges_of_vertex(v).len() <= 3);
        }
    }

    #[test]
    fn hex_edges_have_unit_true_length() {
        let h = DomainGrid::hexagonal(2, 3).unwrap();
        for e in &h.edges {
            let [a, b] = e.endpoints();
            let pa = h.true_vertex_pos(h.vertex_at(a.0, a.1).unwrap());
            let pb = h.true_vertex_pos(h.vertex_at(b.0, b.1).unwrap());
            assert!(((pa - pb).norm() - 1.0).abs() < 1e-12, "edge {:?}", e);
        }
    }

    #[test]
    fn dual_interval_sites() {
        let i = DualInterval::new(0, 3, IntervalKind::Dual).unwrap();
        assert_eq!(i.sites(), vec![0.5, 1.5, 2.5]);
        assert_eq!(i.len(), 3);
        assert_eq!(i.k_left2(), 1);
        assert_eq!(i.k_right2(), 5);

        let degenerate = DualInterval::new(0, 1, IntervalKind::Dual).unwrap();
        assert_eq!(degenerate.sites(), vec![0.5]);
        assert_eq!(degenerate.k_left2(), degenerate.k_right2());

        let primal = DualInterval::new(0, 3, IntervalKind::Primal).unwrap();
        assert_eq!(primal.sites(), vec![0.0, 1.0, 2.0, 3.0]);

        assert!(DualInterval::new(2, 2, IntervalKind::Dual).is_err());
    }

    #[test]
    fn dual_interval_length_is_b_minus_a() {
        for a in -3..3 {
            for b in (a + 1)..5 {
                let i = DualInterval::new(a, b, IntervalKind::Dual).unwrap();
                assert_eq!(i.len() as i64, b - a);
            }
        }
    }

    #[test]
    fn boundary_phase_conventions() {
        let g = DomainGrid::square(2, 2).unwrap();
        let left = g.edge_at(0, 1).unwrap();
        assert_eq!(g.boundary_phase(left).unwrap().value, C64::new(1.0, 0.0));
        let bottom = g.edge_at(1, 0).unwrap();
        assert_eq!(g.boundary_phase(bottom).unwrap().value, C64::new(0.0, 1.0));
        let right = g.edge_at(4, 3).unwrap();
        assert_eq!(g.boundary_phase(right).unwrap().value, C64::new(-1.0, 0.0));
        let top = g.edge_at(3, 4).unwrap();
        assert_eq!(g.boundary_phase(top).unwrap().value, C64::new(0.0, -1.0));

        // Interior edge: the vertical edge between the two left faces.
        let interior = g.edge_at(2, 1).unwrap();
        assert!(matches!(
            g.boundary_phase(interior),
            Err(Error::NotBoundary(_))
        ));
    }

    #[test]
    fn phases_constant_per_wall_and_valued_by_orientation() {
        let g = DomainGrid::square(3, 2).unwrap();
        let mut per_wall: HashMap<&'static str, Vec<C64>> = HashMap::new();
        for &e in &g.boundary {
            let phase = g.boundary_phase(e).unwrap().value;
            match g.edge(e).orientation() {
                Orientation::Vertical => assert_eq!(phase.im, 0.0),
                Orientation::Horizontal => assert_eq!(phase.re, 0.0),
            }
            let wall = match g.wall(e).unwrap() {
                Wall::Left => "left",
                Wall::Right => "right",
                Wall::Bottom => "bottom",
                Wall::Top => "top",
            };
            per_wall.entry(wall).or_default().push(phase);
        }
        for (_, phases) in per_wall {
            assert!(phases.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn grid_schema_roundtrip() {
        let g = DomainGrid::square(2, 1).unwrap();
        let json = serde_json::to_string(&g.to_schema()).unwrap();
        let back: GridSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back.edges.len(), g.n_edges());
        assert_eq!(back.boundary, g.boundary);
    }
}
