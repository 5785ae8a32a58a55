//! Polyline design boundaries, layered annulus meshes and the measures the
//! model functionals are built from.
//!
//! Coordinates are two-dimensional. Slices of flattened coordinates are laid
//! out node-major: `[x0, y0, x1, y1, ...]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::linalg::Mat;
use crate::math::{cos, hypot, sin};

pub const DIM: usize = 2;
const MIN_EDGE: f64 = 1e-14;

pub type Point = [f64; 2];

/// The design boundary: a closed (implicit closing edge) or open polyline.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    nodes: Vec<Point>,
    closed: bool,
    /// Per-node angle in `[0, 2π)` for closed curves or chord fraction in
    /// `[0, 1]` for open ones.
    reference: Vec<f64>,
}

impl SurfaceMesh {
    pub fn new(nodes: Vec<Point>, closed: bool, reference: Vec<f64>) -> Result<Self> {
        check_len("surface reference coordinates", nodes.len(), reference.len())?;
        let mesh = Self {
            nodes,
            closed,
            reference,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Closed curve with reference angles taken from the node positions.
    pub fn closed_from_nodes(nodes: Vec<Point>) -> Result<Self> {
        let reference = nodes
            .iter()
            .map(|p| {
                let a = crate::math::atan2(p[1], p[0]);
                if a < 0.0 {
                    a + 2.0 * PI
                } else {
                    a
                }
            })
            .collect();
        Self::new(nodes, true, reference)
    }

    /// Open curve along `y = 0` with the given chord fractions.
    pub fn open_chord(chords: &[f64]) -> Result<Self> {
        let nodes = chords.iter().map(|&x| [x, 0.0]).collect();
        Self::new(nodes, false, chords.to_vec())
    }

    /// Regular `n_s`-gon inscribed in a circle: node `i` at angle `2πi/n_s`.
    pub fn unit_circle(n_s: usize, radius: f64) -> Result<Self> {
        if n_s < 3 {
            return Err(Error::InvalidMesh(format!(
                "a closed surface needs at least 3 nodes, got {n_s}"
            )));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidMesh(format!("radius must be positive, got {radius}")));
        }
        let angles: Vec<f64> = (0..n_s).map(|i| 2.0 * PI * i as f64 / n_s as f64).collect();
        let nodes = angles.iter().map(|&a| [radius * cos(a), radius * sin(a)]).collect();
        Self::new(nodes, true, angles)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let min = if self.closed { 3 } else { 2 };
        if n < min {
            return Err(Error::InvalidMesh(format!("{n} nodes, need at least {min}")));
        }
        if self.nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh("non-finite coordinate".into()));
        }
        for (i, j) in self.edges() {
            let l = edge_length(self.nodes[i], self.nodes[j]);
            if l <= MIN_EDGE {
                return Err(Error::InvalidMesh(format!("degenerate edge ({i}, {j})")));
            }
        }
        if self.closed && signed_area_of(&self.nodes) <= 0.0 {
            return Err(Error::InvalidMesh("closed surface is not counter-clockwise".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    /// Edge index pairs, including the closing edge for closed curves.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.nodes.len();
        let count = if self.closed { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (i, (i + 1) % n))
    }

    pub fn coords(&self) -> Vec<f64> {
        self.nodes.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Copy with new coordinates and the same topology and references. The
    /// result is not validated; deformed shapes may be checked separately.
    pub fn with_coords(&self, coords: &[f64]) -> Result<Self> {
        check_len("surface coordinates", DIM * self.nodes.len(), coords.len())?;
        Ok(Self {
            nodes: coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            closed: self.closed,
            reference: self.reference.clone(),
        })
    }

    /// Node order reversed; the reference coordinates follow their nodes.
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        let mut reference = self.reference.clone();
        nodes.reverse();
        reference.reverse();
        Self {
            nodes,
            closed: self.closed,
            reference,
        }
    }

    pub fn perimeter(&self) -> f64 {
        perimeter(&self.coords(), self.closed)
    }

    pub fn signed_area(&self) -> Result<f64> {
        if !self.closed {
            return Err(Error::Unsupported("signed area of an open curve"));
        }
        Ok(signed_area_of(&self.nodes))
    }

    pub fn node_radius(&self, center: Point) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|p| hypot(p[0] - center[0], p[1] - center[1]))
            .collect()
    }

    /// Unit outward normals per node: the normalized sum of the adjacent edge
    /// normals (single edge at the ends of open curves). Open curves use the
    /// left-hand normal of the direction of travel.
    pub fn vertex_normals(&self) -> Vec<Point> {
        let n = self.nodes.len();
        let mut acc = vec![[0.0, 0.0]; n];
        for (i, j) in self.edges() {
            let (a, b) = (self.nodes[i], self.nodes[j]);
            let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
            let l = hypot(tx, ty);
            // Right-hand normal points outward for CCW curves.
            let nrm = [ty / l, -tx / l];
            for k in [i, j] {
                acc[k][0] += nrm[0];
                acc[k][1] += nrm[1];
            }
        }
        if !self.closed {
            for v in &mut acc {
                v[0] = -v[0];
                v[1] = -v[1];
            }
        }
        acc.into_iter()
            .map(|v| {
                let l = hypot(v[0], v[1]);
                [v[0] / l, v[1] / l]
            })
            .collect()
    }
}

fn edge_length(a: Point, b: Point) -> f64 {
    hypot(b[0] - a[0], b[1] - a[1])
}

fn signed_area_of(nodes: &[Point]) -> f64 {
    let n = nodes.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (nodes[i], nodes[(i + 1) % n]);
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

fn edge_count(n: usize, closed: bool) -> usize {
    if closed {
        n
    } else {
        n.saturating_sub(1)
    }
}

/// Polyline length of flattened coordinates.
pub fn perimeter(coords: &[f64], closed: bool) -> f64 {
    let n = coords.len() / DIM;
    (0..edge_count(n, closed))
        .map(|i| {
            let j = (i + 1) % n;
            hypot(coords[2 * j] - coords[2 * i], coords[2 * j + 1] - coords[2 * i + 1])
        })
        .sum()
}

/// Gradient of [`perimeter`] with respect to the coordinates.
pub fn perimeter_gradient(coords: &[f64], closed: bool) -> Vec<f64> {
    let n = coords.len() / DIM;
    let mut g = vec![0.0; coords.len()];
    for i in 0..edge_count(n, closed) {
        let j = (i + 1) % n;
        let (dx, dy) = (coords[2 * j] - coords[2 * i], coords[2 * j + 1] - coords[2 * i + 1]);
        let l = hypot(dx, dy);
        let (ex, ey) = (dx / l, dy / l);
        g[2 * j] += ex;
        g[2 * j + 1] += ey;
        g[2 * i] -= ex;
        g[2 * i + 1] -= ey;
    }
    g
}

/// Analytic Hessian of [`perimeter`]: per edge the block `(I − e eᵀ)/ℓ`
/// with signs `[[+, −], [−, +]]`.
pub fn perimeter_hessian(coords: &[f64], closed: bool) -> Mat {
    let n = coords.len() / DIM;
    let mut h = Mat::zeros(coords.len(), coords.len());
    for i in 0..edge_count(n, closed) {
        let j = (i + 1) % n;
        let (dx, dy) = (coords[2 * j] - coords[2 * i], coords[2 * j + 1] - coords[2 * i + 1]);
        let l = hypot(dx, dy);
        let e = [dx / l, dy / l];
        for a in 0..2 {
            for b in 0..2 {
                let delta = if a == b { 1.0 } else { 0.0 };
                let v = (delta - e[a] * e[b]) / l;
                h[(2 * i + a, 2 * i + b)] += v;
                h[(2 * j + a, 2 * j + b)] += v;
                h[(2 * i + a, 2 * j + b)] -= v;
                h[(2 * j + a, 2 * i + b)] -= v;
            }
        }
    }
    h
}

/// Shoelace area of a closed polyline from flattened coordinates.
pub fn signed_area(coords: &[f64]) -> f64 {
    let n = coords.len() / DIM;
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += coords[2 * i] * coords[2 * j + 1] - coords[2 * j] * coords[2 * i + 1];
    }
    0.5 * s
}

pub fn signed_area_gradient(coords: &[f64]) -> Vec<f64> {
    let n = coords.len() / DIM;
    let mut g = vec![0.0; coords.len()];
    for i in 0..n {
        let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
        g[2 * i] = 0.5 * (coords[2 * next + 1] - coords[2 * prev + 1]);
        g[2 * i + 1] = 0.5 * (coords[2 * prev] - coords[2 * next]);
    }
    g
}

/// Layered annulus mesh. Node `(i, k)` (surface node `i`, layer `k`) sits at
/// flat index `k·n_s + i`; layer 0 is the design surface and layer `L` the
/// fixed outer boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeMesh {
    nodes: Vec<Point>,
    n_s: usize,
    layer_fractions: Vec<f64>,
    edges: Vec<(usize, usize)>,
    outer_nodes: Vec<Point>,
}

impl VolumeMesh {
    pub(crate) fn new(
        nodes: Vec<Point>,
        n_s: usize,
        layer_fractions: Vec<f64>,
        outer_nodes: Vec<Point>,
    ) -> Result<Self> {
        let layers = layer_fractions.len();
        check_len("volume mesh nodes", n_s * layers, nodes.len())?;
        check_len("outer nodes", n_s, outer_nodes.len())?;
        if layers < 2 || layer_fractions[0] != 0.0 || layer_fractions[layers - 1] != 1.0 {
            return Err(Error::InvalidMesh("layer fractions must run from 0 to 1".into()));
        }
        if layer_fractions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh("layer fractions must increase strictly".into()));
        }
        let mut edges = Vec::with_capacity(2 * n_s * layers);
        for k in 0..layers {
            for i in 0..n_s {
                edges.push((k * n_s + i, k * n_s + (i + 1) % n_s));
                if k + 1 < layers {
                    edges.push((k * n_s + i, (k + 1) * n_s + i));
                }
            }
        }
        Ok(Self {
            nodes,
            n_s,
            layer_fractions,
            edges,
            outer_nodes,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn surface_len(&self) -> usize {
        self.n_s
    }

    /// Number of layers including surface and outer boundary (`L + 1`).
    pub fn layer_count(&self) -> usize {
        self.layer_fractions.len()
    }

    pub fn layer_fractions(&self) -> &[f64] {
        &self.layer_fractions
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn outer_nodes(&self) -> &[Point] {
        &self.outer_nodes
    }

    pub fn index(&self, surface_node: usize, layer: usize) -> usize {
        layer * self.n_s + surface_node
    }

    pub fn layer_of(&self, node: usize) -> usize {
        node / self.n_s
    }

    pub fn is_outer(&self, node: usize) -> bool {
        self.layer_of(node) + 1 == self.layer_count()
    }

    pub fn coords(&self) -> Vec<f64> {
        self.nodes.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    /// Copy with new node coordinates; topology, fractions and the recorded
    /// outer nodes are kept.
    pub fn with_coords(&self, coords: &[f64]) -> Result<Self> {
        check_len("volume coordinates", DIM * self.nodes.len(), coords.len())?;
        let mut out = self.clone();
        out.nodes = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Ok(out)
    }

    /// Triangles of the quad cells between consecutive layers, each quad
    /// `(i,k),(i+1,k),(i+1,k+1),(i,k+1)` split along its first diagonal.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut tris = Vec::with_capacity(2 * self.n_s * (self.layer_count() - 1));
        for k in 0..self.layer_count() - 1 {
            for i in 0..self.n_s {
                let i1 = (i + 1) % self.n_s;
                let (a, b) = (self.index(i, k), self.index(i1, k));
                let (c, d) = (self.index(i1, k + 1), self.index(i, k + 1));
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            }
        }
        tris
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sqrt;

    fn unit_square() -> SurfaceMesh {
        SurfaceMesh::closed_from_nodes(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn circle_node_positions() {
        let m = SurfaceMesh::unit_circle(4, 1.0).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (p, e) in m.nodes().iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15);
        }
        assert!((m.reference()[1] - PI / 2.0).abs() < 1e-15);
        let tri = SurfaceMesh::unit_circle(3, 1.0).unwrap();
        let side = sqrt(3.0);
        for (i, j) in tri.edges() {
            assert!((edge_length(tri.nodes()[i], tri.nodes()[j]) - side).abs() < 1e-14);
        }
        assert!(matches!(SurfaceMesh::unit_circle(2, 1.0), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn measures() {
        assert!((unit_square().perimeter() - 4.0).abs() < 1e-15);
        assert!((unit_square().signed_area().unwrap() - 1.0).abs() < 1e-15);
        let c4 = SurfaceMesh::unit_circle(4, 1.0).unwrap();
        assert!((c4.perimeter() - 4.0 * sqrt(2.0)).abs() < 1e-14);
        assert!((c4.signed_area().unwrap() - 2.0).abs() < 1e-15);
        let c64 = SurfaceMesh::unit_circle(64, 1.0).unwrap();
        assert!((c64.perimeter() - 128.0 * sin(PI / 64.0)).abs() < 1e-13);
        // Reversal flips the sign only (validation would reject the result).
        let sq = unit_square();
        let rev = sq.reversed();
        assert!((signed_area_of(rev.nodes()) + 1.0).abs() < 1e-15);
        assert!((rev.perimeter() - 4.0).abs() < 1e-15);
        assert!(SurfaceMesh::new(rev.nodes().to_vec(), true, rev.reference().to_vec()).is_err());
        let open = SurfaceMesh::open_chord(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(open.signed_area(), Err(Error::Unsupported("signed area of an open curve")));
        assert!((open.perimeter() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radii() {
        let c = SurfaceMesh::unit_circle(16, 1.0).unwrap();
        assert!(c.node_radius([0.0, 0.0]).iter().all(|r| (r - 1.0).abs() < 1e-15));
        let m = SurfaceMesh::open_chord(&[0.0, 1.0]).unwrap().with_coords(&[3.0, 4.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.node_radius([0.0, 0.0])[0], 5.0);
        assert_eq!(m.node_radius([3.0, 4.0])[0], 0.0);
    }

    #[test]
    fn degenerate_edge_rejected() {
        let err = SurfaceMesh::closed_from_nodes(vec![[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn perimeter_derivatives_match_finite_differences() {
        let c = SurfaceMesh::unit_circle(7, 1.3).unwrap();
        let mut x = c.coords();
        for (k, v) in x.iter_mut().enumerate() {
            *v += 0.05 * sin(3.0 * k as f64);
        }
        let g = perimeter_gradient(&x, true);
        let h = perimeter_hessian(&x, true);
        let step = 1e-5;
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += step;
            xm[k] -= step;
            let fd = (perimeter(&xp, true) - perimeter(&xm, true)) / (2.0 * step);
            assert!((fd - g[k]).abs() < 1e-9);
            let gp = perimeter_gradient(&xp, true);
            let gm = perimeter_gradient(&xm, true);
            for j in 0..x.len() {
                assert!(((gp[j] - gm[j]) / (2.0 * step) - h[(j, k)]).abs() < 1e-8);
            }
            let fa = (signed_area(&xp) - signed_area(&xm)) / (2.0 * step);
            assert!((fa - signed_area_gradient(&x)[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_normals_are_radial() {
        let c = SurfaceMesh::unit_circle(9, 2.0).unwrap();
        for (n, p) in c.vertex_normals().iter().zip(c.nodes()) {
            assert!((n[0] - p[0] / 2.0).abs() < 1e-14 && (n[1] - p[1] / 2.0).abs() < 1e-14);
        }
        let open = SurfaceMesh::open_chord(&[0.0, 0.5, 1.0]).unwrap();
        assert!(open.vertex_normals().iter().all(|n| (n[1] - 1.0).abs() < 1e-15));
    }
}
