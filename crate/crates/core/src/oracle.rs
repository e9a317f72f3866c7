//! Brute-force exact enumeration of the Ising, Ashkin-Teller, random-cluster
//! and loop O(n) measures on small volumes, plus the model correspondences
//! and critical-point formulas. Ground truth for every other module.
//!
//! Sign conventions are ferromagnetic throughout: positive couplings give
//! larger weight to aligned spins. The convention is recorded in every
//! result envelope because the source displays are not consistent about it.

use serde::Serialize;
use std::collections::BTreeMap;

use crate::lattice::{DomainGrid, LatticeKind};
use crate::{Error, Result};

const MAX_ISING_SITES: usize = 20;
const MAX_AT_SITES: usize = 10;
const MAX_RC_EDGES: usize = 22;
const MAX_LOOP_EDGES: usize = 22;
const MAX_LOOP_SPINS: usize = 18;

/// Boundary condition for spin enumerations on a rectangular site grid.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpinBc {
    /// No constraint.
    Free,
    /// Every site on the outer ring of the rectangle is forced to +1.
    Plus,
    /// Only the first and last rows are forced to +1 (strip boundary used by
    /// the transfer-matrix correspondence; the side columns stay free).
    PlusTopBottom,
}

/// Result envelope of an enumeration.
#[derive(Clone, Debug, Serialize)]
pub struct EnumerationResult {
    pub z: f64,
    pub observables: BTreeMap<String, f64>,
    /// Sign convention in force: "ferromagnetic".
    pub convention: &'static str,
}

impl EnumerationResult {
    fn new(z: f64) -> Self {
        EnumerationResult {
            z,
            observables: BTreeMap::new(),
            convention: "ferromagnetic",
        }
    }
}

/// Rectangular grid of spin sites with nearest-neighbour bonds, no wrap.
#[derive(Clone, Copy, Debug)]
pub struct SiteGrid {
    pub width: usize,
    pub height: usize,
}

impl SiteGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 1 || height < 1 {
            return Err(Error::InvalidDimension {
                width: width as i64,
                height: height as i64,
            });
        }
        Ok(SiteGrid { width, height })
    }

    pub fn n_sites(&self) -> usize {
        self.width * self.height
    }

    pub fn site(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Nearest-neighbour bonds, +x first then +y, row-major.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if x + 1 < self.width {
                    bonds.push((self.site(x, y), self.site(x + 1, y)));
                }
                if y + 1 < self.height {
                    bonds.push((self.site(x, y), self.site(x, y + 1)));
                }
            }
        }
        bonds
    }

    pub fn is_boundary_site(&self, s: usize) -> bool {
        let x = s % self.width;
        let y = s / self.width;
        x == 0 || y == 0 || x == self.width - 1 || y == self.height - 1
    }

    fn forced_mask(&self, bc: SpinBc) -> Vec<bool> {
        (0..self.n_sites())
            .map(|s| match bc {
                SpinBc::Free => false,
                SpinBc::Plus => self.is_boundary_site(s),
                SpinBc::PlusTopBottom => {
                    let y = s / self.width;
                    y == 0 || y == self.height - 1
                }
            })
            .collect()
    }
}

fn spin(bits: u64, site: usize) -> i32 {
    if bits >> site & 1 == 1 {
        -1
    } else {
        1
    }
}

/// Sweep all Ising configurations compatible with `bc`, calling `f` with the
/// spin bits and Boltzmann weight `exp(beta * sum sigma_i sigma_j)`.
fn ising_sweep(grid: SiteGrid, beta: f64, bc: SpinBc, mut f: impl FnMut(u64, f64)) {
    let n = grid.n_sites();
    let bonds = grid.bonds();
    let forced = grid.forced_mask(bc);
    let free: Vec<usize> = (0..n).filter(|&s| !forced[s]).collect();
    for assignment in 0u64..(1 << free.len()) {
        let mut bits = 0u64;
        for (i, &s) in free.iter().enumerate() {
            if assignment >> i & 1 == 1 {
                bits |= 1 << s;
            }
        }
        let mut energy = 0.0;
        for &(a, b) in &bonds {
            energy += (spin(bits, a) * spin(bits, b)) as f64;
        }
        f(bits, (beta * energy).exp());
    }
}

/// Exact Ising enumeration on a `width x height` site grid.
pub struct IsingOracle {
    pub grid: SiteGrid,
    pub beta: f64,
    pub bc: SpinBc,
}

impl IsingOracle {
    pub fn new(width: usize, height: usize, beta: f64, bc: SpinBc) -> Result<Self> {
        let grid = SiteGrid::new(width, height)?;
        if grid.n_sites() > MAX_ISING_SITES {
            return Err(Error::SizeGuard {
                what: "ising sites",
                got: grid.n_sites(),
                limit: MAX_ISING_SITES,
            });
        }
        Ok(IsingOracle { grid, beta, bc })
    }

    pub fn partition(&self) -> f64 {
        let mut z = 0.0;
        ising_sweep(self.grid, self.beta, self.bc, |_, w| z += w);
        z
    }

    /// Two-point function < sigma_a sigma_b >.
    pub fn correlation(&self, a: usize, b: usize) -> f64 {
        let mut z = 0.0;
        let mut num = 0.0;
        ising_sweep(self.grid, self.beta, self.bc, |bits, w| {
            z += w;
            num += w * (spin(bits, a) * spin(bits, b)) as f64;
        });
        num / z
    }

    pub fn magnetization(&self, a: usize) -> f64 {
        let mut z = 0.0;
        let mut num = 0.0;
        ising_sweep(self.grid, self.beta, self.bc, |bits, w| {
            z += w;
            num += w * spin(bits, a) as f64;
        });
        num / z
    }

    pub fn result(&self) -> EnumerationResult {
        let mut r = EnumerationResult::new(self.partition());
        if self.grid.n_sites() >= 2 {
            r.observables
                .insert("corr_0_1".into(), self.correlation(0, 1));
        }
        r.observables.insert("mag_0".into(), self.magnetization(0));
        r
    }
}

/// Exact two-color Ashkin-Teller enumeration; spins (tau, tau') per site,
/// weight `exp(sum_bonds [J (tau tau + tau' tau') + U tau tau tau' tau'])`.
pub struct AtOracle {
    pub grid: SiteGrid,
    pub j: f64,
    pub u: f64,
    pub bc: SpinBc,
}

impl AtOracle {
    pub fn new(width: usize, height: usize, j: f64, u: f64, bc: SpinBc) -> Result<Self> {
        let grid = SiteGrid::new(width, height)?;
        if grid.n_sites() > MAX_AT_SITES {
            return Err(Error::SizeGuard {
                what: "ashkin-teller sites",
                got: grid.n_sites(),
                limit: MAX_AT_SITES,
            });
        }
        Ok(AtOracle { grid, j, u, bc })
    }

    fn sweep(&self, mut f: impl FnMut(u64, u64, f64)) {
        let n = self.grid.n_sites();
        let bonds = self.grid.bonds();
        let forced = self.grid.forced_mask(self.bc);
        let free: Vec<usize> = (0..n).filter(|&s| !forced[s]).collect();
        let m = free.len();
        for assignment in 0u64..(1 << (2 * m)) {
            let mut tau = 0u64;
            let mut tau_p = 0u64;
            for (i, &s) in free.iter().enumerate() {
                if assignment >> i & 1 == 1 {
                    tau |= 1 << s;
                }
                if assignment >> (m + i) & 1 == 1 {
                    tau_p |= 1 << s;
                }
            }
            let mut h = 0.0;
            for &(a, b) in &bonds {
                let tt = (spin(tau, a) * spin(tau, b)) as f64;
                let tptp = (spin(tau_p, a) * spin(tau_p, b)) as f64;
                h += self.j * (tt + tptp) + self.u * tt * tptp;
            }
            f(tau, tau_p, h.exp());
        }
    }

    pub fn partition(&self) -> f64 {
        let mut z = 0.0;
        self.sweep(|_, _, w| z += w);
        z
    }

    /// < tau_a tau_b >.
    pub fn tau_correlation(&self, a: usize, b: usize) -> f64 {
        let mut z = 0.0;
        let mut num = 0.0;
        self.sweep(|tau, _, w| {
            z += w;
            num += w * (spin(tau, a) * spin(tau, b)) as f64;
        });
        num / z
    }

    pub fn result(&self) -> EnumerationResult {
        let mut r = EnumerationResult::new(self.partition());
        if self.grid.n_sites() >= 2 {
            r.observables
                .insert("tau_corr_0_1".into(), self.tau_correlation(0, 1));
        }
        r
    }
}

/// Boundary condition for the random-cluster model.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RcBc {
    /// Free (0) boundary.
    Free,
    /// Wired (1) boundary: all boundary sites count as one cluster.
    Wired,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, a: usize) -> usize {
        let mut a = a;
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Exact random-cluster enumeration: weight `p^o (1-p)^c q^k` over bond
/// configurations, `k` counting clusters including isolated sites.
pub struct RcOracle {
    pub grid: SiteGrid,
    pub p: f64,
    pub q: f64,
    pub bc: RcBc,
    bonds: Vec<(usize, usize)>,
}

impl RcOracle {
    pub fn new(width: usize, height: usize, p: f64, q: f64, bc: RcBc) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("p must be in [0,1], got {p}")));
        }
        if q <= 0.0 {
            return Err(Error::Domain(format!("q must be > 0, got {q}")));
        }
        let grid = SiteGrid::new(width, height)?;
        let bonds = grid.bonds();
        if bonds.len() > MAX_RC_EDGES {
            return Err(Error::SizeGuard {
                what: "random-cluster edges",
                got: bonds.len(),
                limit: MAX_RC_EDGES,
            });
        }
        Ok(RcOracle {
            grid,
            p,
            q,
            bc,
            bonds,
        })
    }

    fn sweep(&self, mut f: impl FnMut(&mut UnionFind, f64)) {
        let n = self.grid.n_sites();
        let m = self.bonds.len();
        for omega in 0u64..(1 << m) {
            let open = omega.count_ones() as i32;
            let mut uf = UnionFind::new(n);
            for (i, &(a, b)) in self.bonds.iter().enumerate() {
                if omega >> i & 1 == 1 {
                    uf.union(a, b);
                }
            }
            if self.bc == RcBc::Wired {
                let mut prev = None;
                for s in 0..n {
                    if self.grid.is_boundary_site(s) {
                        if let Some(p) = prev {
                            uf.union(p, s);
                        }
                        prev = Some(s);
                    }
                }
            }
            let mut k = 0usize;
            for s in 0..n {
                if uf.find(s) == s {
                    k += 1;
                }
            }
            let w = self.p.powi(open)
                * (1.0 - self.p).powi(m as i32 - open)
                * self.q.powf(k as f64);
            f(&mut uf, w);
        }
    }

    pub fn partition(&self) -> f64 {
        let mut z = 0.0;
        self.sweep(|_, w| z += w);
        z
    }

    /// Connectivity probability phi(a <-> b).
    pub fn connectivity(&self, a: usize, b: usize) -> f64 {
        let mut z = 0.0;
        let mut num = 0.0;
        self.sweep(|uf, w| {
            z += w;
            if uf.find(a) == uf.find(b) {
                num += w;
            }
        });
        num / z
    }

    pub fn result(&self) -> EnumerationResult {
        let mut r = EnumerationResult::new(self.partition());
        if self.grid.n_sites() >= 2 {
            r.observables
                .insert("connect_0_1".into(), self.connectivity(0, 1));
        }
        r
    }
}

/// A bare graph given by vertex count and edge list; used for even-subgraph
/// (loop) enumerations on honeycomb patches and transfer-strip graphs.
#[derive(Clone, Debug)]
pub struct EdgeGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl EdgeGraph {
    pub fn from_domain(grid: &DomainGrid) -> Self {
        let edges = grid
            .edges
            .iter()
            .map(|e| {
                let [a, b] = e.endpoints();
                (
                    grid.vertex_at(a.0, a.1).unwrap(),
                    grid.vertex_at(b.0, b.1).unwrap(),
                )
            })
            .collect();
        EdgeGraph {
            n_vertices: grid.n_vertices(),
            edges,
        }
    }
}

/// Visit every edge subset whose induced degree is even at each vertex not
/// listed in `odd_ok`. The callback receives the subset as a bitmask.
pub fn for_each_even_subgraph(
    graph: &EdgeGraph,
    odd_ok: &[bool],
    mut f: impl FnMut(u64),
) -> Result<()> {
    let m = graph.edges.len();
    if m > MAX_LOOP_EDGES {
        return Err(Error::SizeGuard {
            what: "loop edges",
            got: m,
            limit: MAX_LOOP_EDGES,
        });
    }
    'outer: for subset in 0u64..(1 << m) {
        let mut degree = vec![0u8; graph.n_vertices];
        for (i, &(a, b)) in graph.edges.iter().enumerate() {
            if subset >> i & 1 == 1 {
                degree[a] += 1;
                degree[b] += 1;
            }
        }
        for v in 0..graph.n_vertices {
            if degree[v] % 2 == 1 && !odd_ok[v] {
                continue 'outer;
            }
        }
        f(subset);
    }
    Ok(())
}

/// Count the closed loops in an edge subset: connected components in which
/// every vertex has degree exactly two.
pub fn count_loops(graph: &EdgeGraph, subset: u64) -> usize {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); graph.n_vertices];
    for (i, &(a, b)) in graph.edges.iter().enumerate() {
        if subset >> i & 1 == 1 {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; graph.n_vertices];
    let mut loops = 0;
    for start in 0..graph.n_vertices {
        if seen[start] || adj[start].is_empty() {
            continue;
        }
        let mut stack = vec![start];
        let mut component = Vec::new();
        seen[start] = true;
        while let Some(v) = stack.pop() {
            component.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if component.iter().all(|&v| adj[v].len() == 2) {
            loops += 1;
        }
    }
    loops
}

/// Exact loop O(n) enumeration on a honeycomb patch: even-degree edge subsets
/// weighted `x^edges * n^loops`.
pub fn enumerate_loop(grid: &DomainGrid, x: f64, n: f64) -> Result<EnumerationResult> {
    if grid.kind != LatticeKind::Hexagonal {
        return Err(Error::Domain(
            "loop enumeration requires a hexagonal domain".into(),
        ));
    }
    let graph = EdgeGraph::from_domain(grid);
    let odd_ok = vec![false; graph.n_vertices];
    let mut z = 0.0;
    let mut mean_edges = 0.0;
    let mut mean_loops = 0.0;
    for_each_even_subgraph(&graph, &odd_ok, |subset| {
        let edges = subset.count_ones() as f64;
        let loops = count_loops(&graph, subset) as f64;
        let w = x.powf(edges) * n.powf(loops);
        z += w;
        mean_edges += w * edges;
        mean_loops += w * loops;
    })?;
    let mut r = EnumerationResult::new(z);
    r.observables.insert("mean_edges".into(), mean_edges / z);
    r.observables.insert("mean_loops".into(), mean_loops / z);
    Ok(r)
}

/// High-temperature spin form of the loop measure: spins on the faces of the
/// honeycomb patch plus a single outer face, weight
/// `n^k(sigma) x^e(sigma) exp(h r(sigma) + h' r'(sigma))` where `e` counts
/// domain-wall edges, `k` wall loops, `r` the sum of inner-face spins and
/// `r'` the number of monochromatic face triples around a vertex.
pub fn enumerate_loop_hte(
    grid: &DomainGrid,
    x: f64,
    n: f64,
    h: f64,
    h_prime: f64,
) -> Result<EnumerationResult> {
    if grid.kind != LatticeKind::Hexagonal {
        return Err(Error::Domain(
            "loop enumeration requires a hexagonal domain".into(),
        ));
    }
    let n_faces = grid.n_faces();
    let n_spins = n_faces + 1; // inner faces + outer face
    if n_spins > MAX_LOOP_SPINS {
        return Err(Error::SizeGuard {
            what: "loop spins",
            got: n_spins,
            limit: MAX_LOOP_SPINS,
        });
    }
    let outer = n_faces;
    // Face pair separated by each edge; the outer face stands in when an edge
    // has fewer than two inner faces.
    let edge_faces: Vec<(usize, usize)> = (0..grid.n_edges())
        .map(|e| {
            let fs = grid.faces_of_edge(e);
            match fs.len() {
                2 => (fs[0], fs[1]),
                1 => (fs[0], outer),
                _ => (outer, outer),
            }
        })
        .collect();
    // Faces around each vertex (padded with the outer face), for r'.
    let mut faces_of_vertex: Vec<Vec<usize>> = vec![Vec::new(); grid.n_vertices()];
    for f in &grid.faces {
        let mut vs = Vec::new();
        for &e in &f.edges {
            for (vx, vy) in grid.edge(e).endpoints() {
                let v = grid.vertex_at(vx, vy).unwrap();
                if !vs.contains(&v) {
                    vs.push(v);
                }
            }
        }
        for v in vs {
            faces_of_vertex[v].push(f.id);
        }
    }
    for v in 0..grid.n_vertices() {
        while faces_of_vertex[v].len() < 3 {
            faces_of_vertex[v].push(outer);
        }
    }
    let graph = EdgeGraph::from_domain(grid);

    let mut z = 0.0;
    let mut mean_e = 0.0;
    for sigma in 0u64..(1 << n_spins) {
        let mut wall = 0u64;
        for (i, &(fa, fb)) in edge_faces.iter().enumerate() {
            if spin(sigma, fa) != spin(sigma, fb) {
                wall |= 1 << i;
            }
        }
        let e = wall.count_ones() as f64;
        let k = count_loops(&graph, wall) as f64;
        let mut r = 0.0;
        for f in 0..n_faces {
            r += spin(sigma, f) as f64;
        }
        let mut r_prime = 0.0;
        for v in 0..grid.n_vertices() {
            let fs = &faces_of_vertex[v];
            let s0 = spin(sigma, fs[0]);
            if fs.iter().all(|&f| spin(sigma, f) == s0) {
                r_prime += 1.0;
            }
        }
        let w = n.powf(k) * x.powf(e) * (h * r + h_prime * r_prime).exp();
        z += w;
        mean_e += w * e;
    }
    let mut res = EnumerationResult::new(z);
    res.observables.insert("mean_wall_edges".into(), mean_e / z);
    Ok(res)
}

/// Self-dual point of the random-cluster model, p_sd(q) = sqrt(q) / (sqrt(q) + 1).
pub fn p_self_dual(q: f64) -> f64 {
    q.sqrt() / (q.sqrt() + 1.0)
}

/// Planar dual coupling p*(p, q) = (1-p) q / ((1-p) q + p).
pub fn p_dual(p: f64, q: f64) -> f64 {
    (1.0 - p) * q / ((1.0 - p) * q + p)
}

/// Evaluated table of the critical-point formulas with self-consistency
/// residuals for the fixed-point and involution identities.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoints {
    pub beta_c: f64,
    pub at_coupling: f64,
    pub p_sd: BTreeMap<String, f64>,
    pub x_c: BTreeMap<String, f64>,
    /// max over q in {1,2,3,4} of |p*(p_sd(q), q) - p_sd(q)|.
    pub p_sd_fixed_point_defect: f64,
    /// max over sampled p of |p* p / ((1-p*)(1-p)) - q|.
    pub p_dual_product_defect: f64,
}

pub fn critical_points() -> CriticalPoints {
    let mut p_sd = BTreeMap::new();
    let mut fixed_defect: f64 = 0.0;
    let mut product_defect: f64 = 0.0;
    for q in [1.0, 2.0, 3.0, 4.0] {
        let psd = p_self_dual(q);
        p_sd.insert(format!("q={q}"), psd);
        fixed_defect = fixed_defect.max((p_dual(psd, q) - psd).abs());
        for p in [0.15, 0.4, 0.7, 0.9] {
            let pd = p_dual(p, q);
            product_defect = product_defect.max((pd * p / ((1.0 - pd) * (1.0 - p)) - q).abs());
        }
    }
    let mut x_c = BTreeMap::new();
    for n in [0.0, 1.0, 2.0] {
        x_c.insert(format!("n={n}"), crate::loop_x_critical(n).unwrap());
    }
    CriticalPoints {
        beta_c: crate::beta_critical(),
        at_coupling: crate::at_critical_coupling(),
        p_sd,
        x_c,
        p_sd_fixed_point_defect: fixed_defect,
        p_dual_product_defect: product_defect,
    }
}

/// Finite-n slope table -(1/n) log phi0(0 <-> (n,0)) on a site grid.
#[derive(Clone, Debug, Serialize)]
pub struct SlopeTable {
    pub p: f64,
    pub q: f64,
    /// (n, slope); slope is +inf when the connectivity vanishes.
    pub slopes: Vec<(usize, f64)>,
}

pub fn correlation_length_slope(
    width: usize,
    height: usize,
    p: f64,
    q: f64,
    max_n: usize,
) -> Result<SlopeTable> {
    let oracle = RcOracle::new(width, height, p, q, RcBc::Free)?;
    let mut slopes = Vec::new();
    for n in 1..=max_n.min(width - 1) {
        let phi = oracle.connectivity(oracle.grid.site(0, 0), oracle.grid.site(n, 0));
        let slope = if phi > 0.0 {
            -phi.ln() / n as f64
        } else {
            f64::INFINITY
        };
        slopes.push((n, slope));
    }
    Ok(SlopeTable { p, q, slopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_hex_domain;
    use crate::Error;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_site_free_ising() {
        let o = IsingOracle::new(1, 1, 0.7, SpinBc::Free).unwrap();
        assert_abs_diff_eq!(o.partition(), 2.0);
        assert_abs_diff_eq!(o.magnetization(0), 0.0);
    }

    #[test]
    fn beta_zero_decorrelates() {
        let o = IsingOracle::new(3, 2, 0.0, SpinBc::Free).unwrap();
        assert_abs_diff_eq!(o.correlation(0, 4), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(o.partition(), 64.0);
    }

    #[test]
    fn two_site_ising_hand_value() {
        // Z = 2 e^beta + 2 e^-beta on a 2x1 grid.
        let beta = 0.37;
        let o = IsingOracle::new(2, 1, beta, SpinBc::Free).unwrap();
        assert_abs_diff_eq!(
            o.partition(),
            2.0 * beta.exp() + 2.0 * (-beta).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn at_factorizes_at_u_zero() {
        let j = 0.41;
        let at = AtOracle::new(2, 2, j, 0.0, SpinBc::Free).unwrap();
        let ising = IsingOracle::new(2, 2, j, SpinBc::Free).unwrap();
        let zi = ising.partition();
        assert_abs_diff_eq!(at.partition(), zi * zi, epsilon = zi * zi * 1e-12);
    }

    #[test]
    fn at_j_u_zero_counts_states() {
        let at = AtOracle::new(2, 2, 0.0, 0.0, SpinBc::Free).unwrap();
        assert_abs_diff_eq!(at.partition(), 4f64.powi(4));
    }

    #[test]
    fn rc_extreme_p() {
        let o = RcOracle::new(2, 2, 0.0, 2.0, RcBc::Free).unwrap();
        assert_abs_diff_eq!(o.connectivity(0, 3), 0.0);
        let o = RcOracle::new(2, 2, 1.0, 2.0, RcBc::Free).unwrap();
        assert_abs_diff_eq!(o.connectivity(0, 3), 1.0);
    }

    #[test]
    fn rc_partition_is_one_at_q_one() {
        // At q = 1 the cluster factor disappears and the bond weights are a
        // product of Bernoulli normalizations.
        let o = RcOracle::new(2, 2, 0.35, 1.0, RcBc::Free).unwrap();
        assert_abs_diff_eq!(o.partition(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn edwards_sokal_coupling_small() {
        // E_free[sigma_0 sigma_a] = phi^0_{p,2}(0 <-> a), p = 1 - exp(-2 beta).
        let beta = 0.55f64;
        let p = 1.0 - (-2.0 * beta).exp();
        let ising = IsingOracle::new(2, 2, beta, SpinBc::Free).unwrap();
        let rc = RcOracle::new(2, 2, p, 2.0, RcBc::Free).unwrap();
        for a in 1..4 {
            assert_abs_diff_eq!(
                ising.correlation(0, a),
                rc.connectivity(0, a),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn single_hexagon_loop_partition() {
        let g = build_hex_domain(1, 1).unwrap();
        let r = enumerate_loop(&g, 0.5, 2.0).unwrap();
        // Only even subgraph besides empty is the full hexagon: 1 + 2 x^6.
        assert_abs_diff_eq!(r.z, 1.03125, epsilon = 1e-14);
    }

    #[test]
    fn loop_x_zero_is_empty() {
        let g = build_hex_domain(2, 1).unwrap();
        let r = enumerate_loop(&g, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.z, 1.0);
    }

    #[test]
    fn hte_matches_wall_expansion_at_n_one() {
        // Spin form with weight x^{walls} double counts each wall configuration
        // (global flip), so Z_hte / Z_loop = 2 for all x when n = 1, h = h' = 0.
        let g = build_hex_domain(2, 1).unwrap();
        for x in [0.3, 0.5] {
            let z_loop = enumerate_loop(&g, x, 1.0).unwrap().z;
            let z_hte = enumerate_loop_hte(&g, x, 1.0, 0.0, 0.0).unwrap().z;
            assert_abs_diff_eq!(z_hte / z_loop, 2.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn critical_point_table() {
        let t = critical_points();
        assert_abs_diff_eq!(t.p_sd["q=2"], 0.5857864376269049, epsilon = 1e-12);
        assert_abs_diff_eq!(t.x_c["n=1"], 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            t.x_c["n=0"],
            1.0 / (2.0 + 2f64.sqrt()).sqrt(),
            epsilon = 1e-14
        );
        assert!(t.p_sd_fixed_point_defect <= 1e-14);
        assert!(t.p_dual_product_defect <= 1e-12);
        assert_abs_diff_eq!(t.beta_c, 0.4406867935097715, epsilon = 1e-12);
        assert_abs_diff_eq!(t.at_coupling, 0.25 * 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn slope_table_extremes_and_monotonicity() {
        let t = correlation_length_slope(4, 3, 1.0, 2.0, 3).unwrap();
        for &(_, s) in &t.slopes {
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        }
        let t = correlation_length_slope(4, 3, 0.0, 2.0, 3).unwrap();
        assert!(t.slopes.iter().all(|&(_, s)| s.is_infinite()));

        let p_sd = p_self_dual(2.0);
        let below = correlation_length_slope(4, 3, p_sd - 0.15, 2.0, 3).unwrap();
        let above = correlation_length_slope(4, 3, p_sd + 0.15, 2.0, 3).unwrap();
        for (b, a) in below.slopes.iter().zip(above.slopes.iter()) {
            assert!(b.1 > a.1, "slope(p_below) > slope(p_above) at n = {}", b.0);
        }
    }

    #[test]
    fn size_guards() {
        assert!(matches!(
            IsingOracle::new(6, 4, 0.3, SpinBc::Free),
            Err(Error::SizeGuard { .. })
        ));
        assert!(matches!(
            AtOracle::new(4, 3, 0.3, 0.1, SpinBc::Free),
            Err(Error::SizeGuard { .. })
        ));
    }
}
