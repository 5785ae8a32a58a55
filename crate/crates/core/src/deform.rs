//! Surface-to-volume mesh deformation `V(s)` and the composed design map
//! `M(p) = V(S(p))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::geometry::{Point, SurfaceMesh, VolumeMesh, DIM};
use crate::linalg::Mat;
use crate::math::{atan2, cos, hypot, sin};
use crate::param::SurfaceParameterization;

/// Contract of a surface-to-volume deformation.
pub trait MeshDeformation {
    fn surface_len(&self) -> usize;
    fn mesh_len(&self) -> usize;
    fn deform(&self, s: &[f64]) -> Result<Vec<f64>>;
    fn deform_jvp(&self, s: &[f64], ds: &[f64]) -> Result<Vec<f64>>;
    fn deform_vjp(&self, s: &[f64], wm: &[f64]) -> Result<Vec<f64>>;
    /// `Σ_k wm_k D_ss V_k(s)` as a `d·n_s × d·n_s` matrix, `None` when the
    /// deformation is affine (the sum vanishes).
    fn curvature_contraction(&self, s: &[f64], wm: &[f64]) -> Result<Option<Mat>>;
    /// Rejects surfaces this deformation cannot mesh (for example ones that
    /// cross the fixed outer boundary).
    fn admissible(&self, s: &[f64]) -> Result<()> {
        let _ = s;
        Ok(())
    }
}

/// `m(i, k) = (1 − t_k)·s_i + t_k·outer_i`
#[derive(Clone, Debug, PartialEq)]
pub struct RadialBlendDeformer {
    n_s: usize,
    layer_fractions: Vec<f64>,
    outer: Vec<Point>,
}

/// Builds the layered annulus around a closed surface: `layers + 1` node
/// rings with uniform fractions `k/layers`, the outer ring on the circle of
/// `outer_radius` (about the origin) at the surface nodes' angles.
pub fn build_volume(
    surface: &SurfaceMesh,
    layers: usize,
    outer_radius: f64,
) -> Result<(VolumeMesh, RadialBlendDeformer)> {
    if !surface.is_closed() {
        return Err(Error::Unsupported("volume mesh around an open curve"));
    }
    if layers < 1 {
        return Err(Error::InvalidMesh("at least one layer is required".into()));
    }
    let rmax = surface
        .node_radius([0.0, 0.0])
        .into_iter()
        .fold(0.0, f64::max);
    if !(outer_radius > rmax) {
        return Err(Error::InvalidMesh(format!(
            "outer radius {outer_radius} does not enclose the surface (max radius {rmax})"
        )));
    }
    let n_s = surface.len();
    let outer: Vec<Point> = surface
        .nodes()
        .iter()
        .map(|p| {
            let a = atan2(p[1], p[0]);
            [outer_radius * cos(a), outer_radius * sin(a)]
        })
        .collect();
    let fractions: Vec<f64> = (0..=layers).map(|k| k as f64 / layers as f64).collect();
    let deformer = RadialBlendDeformer {
        n_s,
        layer_fractions: fractions.clone(),
        outer: outer.clone(),
    };
    let m = deformer.deform(&surface.coords())?;
    let nodes = m.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let volume = VolumeMesh::new(nodes, n_s, fractions, outer)?;
    Ok((volume, deformer))
}

impl RadialBlendDeformer {
    pub fn layer_fractions(&self) -> &[f64] {
        &self.layer_fractions
    }

    pub fn outer_nodes(&self) -> &[Point] {
        &self.outer
    }

    fn check_surface(&self, what: &'static str, len: usize) -> Result<()> {
        check_len(what, DIM * self.n_s, len)
    }
}

impl MeshDeformation for RadialBlendDeformer {
    fn surface_len(&self) -> usize {
        DIM * self.n_s
    }

    fn mesh_len(&self) -> usize {
        DIM * self.n_s * self.layer_fractions.len()
    }

    fn deform(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_surface("surface coordinates", s.len())?;
        let mut m = Vec::with_capacity(self.mesh_len());
        for &t in &self.layer_fractions {
            for i in 0..self.n_s {
                for c in 0..DIM {
                    // The end layers are copied so they stay bit-exact.
                    m.push(if t == 0.0 {
                        s[DIM * i + c]
                    } else if t == 1.0 {
                        self.outer[i][c]
                    } else {
                        (1.0 - t) * s[DIM * i + c] + t * self.outer[i][c]
                    });
                }
            }
        }
        Ok(m)
    }

    fn deform_jvp(&self, s: &[f64], ds: &[f64]) -> Result<Vec<f64>> {
        self.check_surface("surface coordinates", s.len())?;
        self.check_surface("surface direction", ds.len())?;
        let mut dm = Vec::with_capacity(self.mesh_len());
        for &t in &self.layer_fractions {
            dm.extend(ds.iter().map(|v| (1.0 - t) * v));
        }
        Ok(dm)
    }

    fn deform_vjp(&self, s: &[f64], wm: &[f64]) -> Result<Vec<f64>> {
        self.check_surface("surface coordinates", s.len())?;
        check_len("mesh covector", self.mesh_len(), wm.len())?;
        let ns = DIM * self.n_s;
        let mut ws = vec![0.0; ns];
        for (k, &t) in self.layer_fractions.iter().enumerate() {
            if t == 1.0 {
                continue;
            }
            for (w, v) in ws.iter_mut().zip(&wm[k * ns..(k + 1) * ns]) {
                *w += (1.0 - t) * v;
            }
        }
        Ok(ws)
    }

    fn curvature_contraction(&self, s: &[f64], wm: &[f64]) -> Result<Option<Mat>> {
        self.check_surface("surface coordinates", s.len())?;
        check_len("mesh covector", self.mesh_len(), wm.len())?;
        Ok(None)
    }

    fn admissible(&self, s: &[f64]) -> Result<()> {
        self.check_surface("surface coordinates", s.len())?;
        for (i, o) in self.outer.iter().enumerate() {
            let r = hypot(s[DIM * i], s[DIM * i + 1]);
            if !(r < hypot(o[0], o[1])) {
                return Err(Error::InvalidMesh(format!("surface node {i} at radius {r} leaves the annulus")));
            }
        }
        Ok(())
    }
}

/// The design map `M = V ∘ S` with composed Jacobian products.
#[derive(Clone, Copy, Debug)]
pub struct Design<'a, P, V> {
    pub param: &'a P,
    pub deformer: &'a V,
}

impl<'a, P: SurfaceParameterization, V: MeshDeformation> Design<'a, P, V> {
    pub fn new(param: &'a P, deformer: &'a V) -> Result<Self> {
        check_len("deformer surface size", param.surface_len(), deformer.surface_len())?;
        Ok(Self { param, deformer })
    }

    pub fn n_params(&self) -> usize {
        self.param.n_params()
    }

    pub fn mesh_len(&self) -> usize {
        self.deformer.mesh_len()
    }

    pub fn surface(&self, p: &[f64]) -> Result<SurfaceMesh> {
        self.param.apply(p)
    }

    pub fn mesh(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.deformer.deform(&self.param.apply(p)?.coords())
    }

    /// `D_p M(p) dp`
    pub fn jvp(&self, p: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
        let s = self.param.apply(p)?.coords();
        self.deformer.deform_jvp(&s, &self.param.jvp(p, dp)?)
    }

    /// `D_p M(p)ᵀ wm`
    pub fn vjp(&self, p: &[f64], wm: &[f64]) -> Result<Vec<f64>> {
        let s = self.param.apply(p)?.coords();
        self.param.vjp(p, &self.deformer.deform_vjp(&s, wm)?)
    }

    pub fn surface_jacobian(&self, p: &[f64]) -> Result<Mat> {
        self.param.jacobian(p)
    }

    /// Dense `D_p M(p) = D_s V · D_p S`, built from forward products of the
    /// surface Jacobian's columns.
    pub fn mesh_jacobian(&self, p: &[f64]) -> Result<Mat> {
        let s = self.param.apply(p)?.coords();
        let js = self.param.jacobian(p)?;
        let columns = (0..js.cols())
            .map(|j| self.deformer.deform_jvp(&s, &js.column(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mat::from_columns(self.mesh_len(), &columns))
    }

    /// `Σ_k wm_k D_pp M_k(p)`: the deformation curvature term
    /// `D_p Sᵀ (Σ_k wm_k D_ss V_k) D_p S` plus the surface term
    /// `Σ_l (D_s Vᵀ wm)_l D_pp S_l`.
    pub fn second_derivative_contraction(&self, p: &[f64], wm: &[f64]) -> Result<Mat> {
        let s = self.param.apply(p)?.coords();
        let ws = self.deformer.deform_vjp(&s, wm)?;
        let mut h = self.param.second_derivative_contraction(p, &ws)?;
        if let Some(c) = self.deformer.curvature_contraction(&s, wm)? {
            h = h.add(&self.param.jacobian(p)?.congruence(&c));
        }
        Ok(h)
    }
}
