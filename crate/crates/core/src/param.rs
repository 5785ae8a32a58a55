//! Surface parameterizations `S(p)` with analytic forward (JVP) and reverse
//! (VJP) Jacobian products and second-derivative contractions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::geometry::{Point, SurfaceMesh, DIM};
use crate::linalg::Mat;
use crate::math::{cos, ln, powf, powi, sin};

/// Contract shared by every design-to-surface map.
pub trait SurfaceParameterization {
    fn n_params(&self) -> usize;

    fn baseline(&self) -> &SurfaceMesh;

    /// Deformed copy of the baseline.
    fn apply(&self, p: &[f64]) -> Result<SurfaceMesh>;

    /// `D_p S(p) · dp`, flattened surface displacement.
    fn jvp(&self, p: &[f64], dp: &[f64]) -> Result<Vec<f64>>;

    /// `D_p S(p)ᵀ · w`
    fn vjp(&self, p: &[f64], w: &[f64]) -> Result<Vec<f64>>;

    /// `Σ_k w_k D_pp S_k(p)`, an `n_p × n_p` symmetric matrix.
    fn second_derivative_contraction(&self, p: &[f64], w: &[f64]) -> Result<Mat>;

    /// True when `S` is affine in `p`.
    fn is_linear(&self) -> bool;

    fn surface_len(&self) -> usize {
        DIM * self.baseline().len()
    }

    /// Dense `D_p S(p)` assembled column by column from forward products.
    fn jacobian(&self, p: &[f64]) -> Result<Mat> {
        let n = self.n_params();
        let mut e = vec![0.0; n];
        let mut columns = Vec::with_capacity(n);
        for j in 0..n {
            e[j] = 1.0;
            columns.push(self.jvp(p, &e)?);
            e[j] = 0.0;
        }
        Ok(Mat::from_columns(self.surface_len(), &columns))
    }
}

/// Affine map `S(p) = s₀ + J p` with a constant dense Jacobian.
#[derive(Clone, Debug, PartialEq)]
struct AffineSurfaceMap {
    baseline: SurfaceMesh,
    jac: Mat,
}

impl AffineSurfaceMap {
    fn apply(&self, p: &[f64]) -> Result<SurfaceMesh> {
        check_len("parameter vector", self.jac.cols(), p.len())?;
        let mut s = self.baseline.coords();
        for (si, di) in s.iter_mut().zip(self.jac.matvec(p)) {
            *si += di;
        }
        self.baseline.with_coords(&s)
    }

    fn jvp(&self, p: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
        check_len("parameter vector", self.jac.cols(), p.len())?;
        check_len("parameter direction", self.jac.cols(), dp.len())?;
        Ok(self.jac.matvec(dp))
    }

    fn vjp(&self, p: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        check_len("parameter vector", self.jac.cols(), p.len())?;
        check_len("surface covector", self.jac.rows(), w.len())?;
        Ok(self.jac.tmatvec(w))
    }

    fn second_derivative_contraction(&self, p: &[f64], w: &[f64]) -> Result<Mat> {
        check_len("parameter vector", self.jac.cols(), p.len())?;
        check_len("surface covector", self.jac.rows(), w.len())?;
        Ok(Mat::zeros(self.jac.cols(), self.jac.cols()))
    }
}

macro_rules! affine_impl {
    ($t:ty) => {
        impl SurfaceParameterization for $t {
            fn n_params(&self) -> usize {
                self.map.jac.cols()
            }
            fn baseline(&self) -> &SurfaceMesh {
                &self.map.baseline
            }
            fn apply(&self, p: &[f64]) -> Result<SurfaceMesh> {
                self.map.apply(p)
            }
            fn jvp(&self, p: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
                self.map.jvp(p, dp)
            }
            fn vjp(&self, p: &[f64], w: &[f64]) -> Result<Vec<f64>> {
                self.map.vjp(p, w)
            }
            fn second_derivative_contraction(&self, p: &[f64], w: &[f64]) -> Result<Mat> {
                self.map.second_derivative_contraction(p, w)
            }
            fn is_linear(&self) -> bool {
                true
            }
            fn jacobian(&self, p: &[f64]) -> Result<Mat> {
                check_len("parameter vector", self.map.jac.cols(), p.len())?;
                Ok(self.map.jac.clone())
            }
        }
    };
}

/// `b(x) = sin(π x^{ln 0.5 / ln x_peak})^t`
pub fn hicks_henne_bump(x: f64, x_peak: f64, t: f64) -> Result<f64> {
    if !(x_peak > 0.0 && x_peak < 1.0) {
        return Err(Error::Domain(format!("bump peak {x_peak} outside (0, 1)")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("chord fraction {x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let e = ln(0.5) / ln(x_peak);
    let s = sin(PI * powf(x, e));
    Ok(if s <= 0.0 { 0.0 } else { powf(s, t) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub peak: f64,
    pub side: Side,
}

pub const DEFAULT_HICKS_HENNE_EXPONENT: f64 = 3.0;

/// Hicks–Henne bumps. On closed curves the chord fraction of a node at angle
/// θ is `(1 + cos θ)/2` (leading edge at θ = π), upper bumps act on nodes with
/// `sin θ > 0` and lower bumps on `sin θ < 0`, both along the baseline's
/// outward normal. On open chord curves every node is displaced, upper bumps
/// along +y and lower bumps along −y.
#[derive(Clone, Debug, PartialEq)]
pub struct HicksHenneParam {
    bumps: Vec<Bump>,
    exponent: f64,
    map: AffineSurfaceMap,
}

impl HicksHenneParam {
    pub fn new(baseline: SurfaceMesh, bumps: Vec<Bump>, exponent: f64) -> Result<Self> {
        if !(exponent >= 1.0) {
            return Err(Error::Domain(format!("Hicks-Henne exponent {exponent} < 1")));
        }
        let n = baseline.len();
        let normals = baseline.vertex_normals();
        let mut jac = Mat::zeros(DIM * n, bumps.len());
        for (j, bump) in bumps.iter().enumerate() {
            for i in 0..n {
                let r = baseline.reference()[i];
                let (x, dir) = if baseline.is_closed() {
                    let s = sin(r);
                    let on_side = match bump.side {
                        Side::Upper => s > 1e-12,
                        Side::Lower => s < -1e-12,
                    };
                    if !on_side {
                        continue;
                    }
                    ((1.0 + cos(r)) * 0.5, normals[i])
                } else {
                    let dy = match bump.side {
                        Side::Upper => 1.0,
                        Side::Lower => -1.0,
                    };
                    (r, [0.0, dy])
                };
                let b = hicks_henne_bump(x.clamp(0.0, 1.0), bump.peak, exponent)?;
                jac[(DIM * i, j)] = b * dir[0];
                jac[(DIM * i + 1, j)] = b * dir[1];
            }
        }
        Ok(Self {
            bumps,
            exponent,
            map: AffineSurfaceMap { baseline, jac },
        })
    }

    /// `per_side` upper and `per_side` lower bumps with peaks at
    /// `k/(per_side + 1)`, upper bumps first.
    pub fn uniform(baseline: SurfaceMesh, per_side: usize, exponent: f64) -> Result<Self> {
        let peaks: Vec<f64> = (1..=per_side).map(|k| k as f64 / (per_side + 1) as f64).collect();
        let bumps = [Side::Upper, Side::Lower]
            .into_iter()
            .flat_map(|side| peaks.iter().map(move |&peak| Bump { peak, side }))
            .collect();
        Self::new(baseline, bumps, exponent)
    }

    /// 19 upper and 19 lower bumps at chord fractions 0.05, 0.10, …, 0.95.
    pub fn airfoil_preset(baseline: SurfaceMesh) -> Result<Self> {
        Self::uniform(baseline, 19, DEFAULT_HICKS_HENNE_EXPONENT)
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

affine_impl!(HicksHenneParam);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Axis-aligned 2D control box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlBox {
    pub min: Point,
    pub max: Point,
    pub nx: usize,
    pub ny: usize,
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn bernstein(n: usize, k: usize, t: f64) -> f64 {
    binomial(n, k) * powi(t, k as i32) * powi(1.0 - t, (n - k) as i32)
}

/// Free-form deformation with a Bernstein tensor-product lattice. One
/// parameter per control point (index `ix·ny + iy`), each moving along
/// `movable_axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct FfdParam {
    control: ControlBox,
    movable_axis: Axis,
    map: AffineSurfaceMap,
}

impl FfdParam {
    pub fn new(baseline: SurfaceMesh, control: ControlBox, movable_axis: Axis) -> Result<Self> {
        let ControlBox { min, max, nx, ny } = control;
        if nx < 2 || ny < 2 {
            return Err(Error::Domain(format!("control lattice {nx}x{ny} needs at least 2x2")));
        }
        if !(max[0] > min[0] && max[1] > min[1]) {
            return Err(Error::Domain("control box has no interior".into()));
        }
        let n = baseline.len();
        let mut jac = Mat::zeros(DIM * n, nx * ny);
        let comp = match movable_axis {
            Axis::X => 0,
            Axis::Y => 1,
        };
        for (i, p) in baseline.nodes().iter().enumerate() {
            let s = (p[0] - min[0]) / (max[0] - min[0]);
            let t = (p[1] - min[1]) / (max[1] - min[1]);
            if !((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t)) {
                return Err(Error::Domain(format!("baseline node {i} lies outside the control box")));
            }
            for ix in 0..nx {
                let bx = bernstein(nx - 1, ix, s);
                for iy in 0..ny {
                    jac[(DIM * i + comp, ix * ny + iy)] = bx * bernstein(ny - 1, iy, t);
                }
            }
        }
        Ok(Self {
            control,
            movable_axis,
            map: AffineSurfaceMap { baseline, jac },
        })
    }

    /// Box around the baseline's bounding box enlarged by `margin` on every
    /// side.
    pub fn around(baseline: SurfaceMesh, nx: usize, ny: usize, margin: f64, axis: Axis) -> Result<Self> {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in baseline.nodes() {
            for c in 0..2 {
                min[c] = min[c].min(p[c]);
                max[c] = max[c].max(p[c]);
            }
        }
        let control = ControlBox {
            min: [min[0] - margin, min[1] - margin],
            max: [max[0] + margin, max[1] + margin],
            nx,
            ny,
        };
        Self::new(baseline, control, axis)
    }

    pub fn control_box(&self) -> &ControlBox {
        &self.control
    }

    pub fn movable_axis(&self) -> Axis {
        self.movable_axis
    }
}

affine_impl!(FfdParam);

/// Identity on surface degrees of freedom: `S(p) = s₀ + p`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalDisplacementParam {
    map: AffineSurfaceMap,
}

impl NodalDisplacementParam {
    pub fn new(baseline: SurfaceMesh) -> Self {
        let jac = Mat::identity(DIM * baseline.len());
        Self {
            map: AffineSurfaceMap { baseline, jac },
        }
    }
}

affine_impl!(NodalDisplacementParam);

/// Angular basis functions for [`NonlinearRadialParam`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularBasis {
    /// `1, cos θ, sin θ, cos 2θ, sin 2θ, …` truncated to the given count.
    Fourier(usize),
    /// Periodic hat functions on the baseline angles: one radial degree of
    /// freedom per surface node (free-node parameterization).
    Nodal,
}

/// `node_i = c + (r₀ᵢ + Σ_j (p_j + α p_j²) φ_j(θ_i)) · (cos θ_i, sin θ_i)`
///
/// θ_i and r₀ᵢ are the polar coordinates of baseline node `i` about `c`, so
/// `p = 0` reproduces the baseline exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearRadialParam {
    baseline: SurfaceMesh,
    center: Point,
    alpha: f64,
    basis: AngularBasis,
    /// `phi[(i, j)] = φ_j(θ_i)`
    phi: Mat,
    base_radius: Vec<f64>,
    dirs: Vec<Point>,
}

impl NonlinearRadialParam {
    pub fn new(baseline: SurfaceMesh, center: Point, basis: AngularBasis, alpha: f64) -> Result<Self> {
        if !baseline.is_closed() {
            return Err(Error::Unsupported("radial parameterization of an open curve"));
        }
        if !(alpha >= 0.0) {
            return Err(Error::Domain(format!("nonlinearity alpha {alpha} < 0")));
        }
        let n = baseline.len();
        let base_radius = baseline.node_radius(center);
        if base_radius.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Domain("a baseline node coincides with the center".into()));
        }
        let theta: Vec<f64> = baseline
            .nodes()
            .iter()
            .map(|q| crate::math::atan2(q[1] - center[1], q[0] - center[0]))
            .collect();
        let phi = match basis {
            AngularBasis::Fourier(count) => Mat::from_fn(n, count, |i, j| {
                if j == 0 {
                    1.0
                } else {
                    let k = j.div_ceil(2) as f64;
                    if j % 2 == 1 {
                        cos(k * theta[i])
                    } else {
                        sin(k * theta[i])
                    }
                }
            }),
            AngularBasis::Nodal => Mat::identity(n),
        };
        let dirs = theta.iter().map(|&t| [cos(t), sin(t)]).collect();
        Ok(Self {
            baseline,
            center,
            alpha,
            basis,
            phi,
            base_radius,
            dirs,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn basis(&self) -> AngularBasis {
        self.basis
    }

    pub fn center(&self) -> Point {
        self.center
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        check_len("parameter vector", self.phi.cols(), p.len())
    }
}

impl SurfaceParameterization for NonlinearRadialParam {
    fn n_params(&self) -> usize {
        self.phi.cols()
    }

    fn baseline(&self) -> &SurfaceMesh {
        &self.baseline
    }

    fn apply(&self, p: &[f64]) -> Result<SurfaceMesh> {
        self.check(p)?;
        let q: Vec<f64> = p.iter().map(|v| v + self.alpha * v * v).collect();
        let dr = self.phi.matvec(&q);
        let coords: Vec<f64> = (0..self.baseline.len())
            .flat_map(|i| {
                let r = self.base_radius[i] + dr[i];
                [self.center[0] + r * self.dirs[i][0], self.center[1] + r * self.dirs[i][1]]
            })
            .collect();
        self.baseline.with_coords(&coords)
    }

    fn jvp(&self, p: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        check_len("parameter direction", p.len(), dp.len())?;
        let q: Vec<f64> = p
            .iter()
            .zip(dp)
            .map(|(v, d)| (1.0 + 2.0 * self.alpha * v) * d)
            .collect();
        let dr = self.phi.matvec(&q);
        Ok((0..self.baseline.len())
            .flat_map(|i| [dr[i] * self.dirs[i][0], dr[i] * self.dirs[i][1]])
            .collect())
    }

    fn vjp(&self, p: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        check_len("surface covector", self.surface_len(), w.len())?;
        let radial = self.radial_part(w);
        let g = self.phi.tmatvec(&radial);
        Ok(g.iter()
            .zip(p)
            .map(|(gj, pj)| (1.0 + 2.0 * self.alpha * pj) * gj)
            .collect())
    }

    fn second_derivative_contraction(&self, p: &[f64], w: &[f64]) -> Result<Mat> {
        self.check(p)?;
        check_len("surface covector", self.surface_len(), w.len())?;
        let g = self.phi.tmatvec(&self.radial_part(w));
        Ok(Mat::diag(&g.iter().map(|gj| 2.0 * self.alpha * gj).collect::<Vec<_>>()))
    }

    fn is_linear(&self) -> bool {
        self.alpha == 0.0
    }
}

impl NonlinearRadialParam {
    fn radial_part(&self, w: &[f64]) -> Vec<f64> {
        (0..self.baseline.len())
            .map(|i| w[DIM * i] * self.dirs[i][0] + w[DIM * i + 1] * self.dirs[i][1])
            .collect()
    }
}

/// Runtime choice among the supported parameterizations.
#[derive(Clone, Debug, PartialEq)]
pub enum Parameterization {
    HicksHenne(HicksHenneParam),
    Ffd(FfdParam),
    NonlinearRadial(NonlinearRadialParam),
    NodalDisplacement(NodalDisplacementParam),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Parameterization::HicksHenne($p) => $e,
            Parameterization::Ffd($p) => $e,
            Parameterization::NonlinearRadial($p) => $e,
            Parameterization::NodalDisplacement($p) => $e,
        }
    };
}

impl SurfaceParameterization for Parameterization {
    fn n_params(&self) -> usize {
        dispatch!(self, q => q.n_params())
    }
    fn baseline(&self) -> &SurfaceMesh {
        dispatch!(self, q => q.baseline())
    }
    fn apply(&self, p: &[f64]) -> Result<SurfaceMesh> {
        dispatch!(self, q => q.apply(p))
    }
    fn jvp(&self, p: &[f64], dp: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, q => q.jvp(p, dp))
    }
    fn vjp(&self, p: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, q => q.vjp(p, w))
    }
    fn second_derivative_contraction(&self, p: &[f64], w: &[f64]) -> Result<Mat> {
        dispatch!(self, q => q.second_derivative_contraction(p, w))
    }
    fn is_linear(&self) -> bool {
        dispatch!(self, q => q.is_linear())
    }
    fn jacobian(&self, p: &[f64]) -> Result<Mat> {
        dispatch!(self, q => q.jacobian(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::dot;

    #[test]
    fn bump_values() {
        assert!((hicks_henne_bump(0.5, 0.5, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(hicks_henne_bump(0.0, 0.3, 3.0).unwrap(), 0.0);
        assert!(hicks_henne_bump(1.0, 0.3, 3.0).unwrap().abs() < 1e-40);
        assert!(matches!(hicks_henne_bump(0.5, 1.0, 3.0), Err(Error::Domain(_))));
        assert!(matches!(hicks_henne_bump(0.5, 0.0, 3.0), Err(Error::Domain(_))));
        // Peak location.
        let peak = hicks_henne_bump(0.2, 0.2, 2.0).unwrap();
        assert!((peak - 1.0).abs() < 1e-14);
        assert!(hicks_henne_bump(0.19, 0.2, 2.0).unwrap() < peak);
    }

    #[test]
    fn apply_zero_is_baseline() {
        let c = SurfaceMesh::unit_circle(16, 1.0).unwrap();
        let params: [Parameterization; 4] = [
            Parameterization::HicksHenne(HicksHenneParam::uniform(c.clone(), 3, 3.0).unwrap()),
            Parameterization::Ffd(FfdParam::around(c.clone(), 3, 3, 0.1, Axis::Y).unwrap()),
            Parameterization::NonlinearRadial(
                NonlinearRadialParam::new(c.clone(), [0.0, 0.0], AngularBasis::Fourier(5), 0.5).unwrap(),
            ),
            Parameterization::NodalDisplacement(NodalDisplacementParam::new(c.clone())),
        ];
        for q in &params {
            let s = q.apply(&vec![0.0; q.n_params()]).unwrap();
            for (a, b) in s.coords().iter().zip(c.coords()) {
                assert!((a - b).abs() < 1e-15);
            }
            assert!(matches!(q.apply(&[0.0]), Err(Error::Dimension { .. })));
        }
    }

    #[test]
    fn single_bump_at_its_peak_moves_node_by_one() {
        let chord = SurfaceMesh::open_chord(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let hh = HicksHenneParam::new(chord, vec![Bump { peak: 0.5, side: Side::Upper }], 3.0).unwrap();
        let s = hh.apply(&[1.0]).unwrap();
        assert!((s.nodes()[2][1] - 1.0).abs() < 1e-15);
        assert_eq!(s.nodes()[2][0], 0.5);
    }

    #[test]
    fn radial_example_values() {
        let c = SurfaceMesh::unit_circle(10, 2.0).unwrap();
        let r = NonlinearRadialParam::new(c, [0.0, 0.0], AngularBasis::Fourier(3), 1.0).unwrap();
        let s = r.apply(&[0.1, 0.0, 0.0]).unwrap();
        assert!(s.node_radius([0.0, 0.0]).iter().all(|v| (v - 2.11).abs() < 1e-14));
        let p = [0.3, -0.2, 0.1];
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            let d = r.jvp(&p, &e).unwrap();
            for i in 0..10 {
                let th = crate::math::atan2(r.baseline().nodes()[i][1], r.baseline().nodes()[i][0]);
                let radial = d[2 * i] * cos(th) + d[2 * i + 1] * sin(th);
                assert!((radial - (1.0 + 2.0 * p[j]) * r.phi[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn radial_second_derivative_is_diagonal() {
        let c = SurfaceMesh::unit_circle(12, 1.0).unwrap();
        let alpha = 0.7;
        let r = NonlinearRadialParam::new(c, [0.0, 0.0], AngularBasis::Fourier(4), alpha).unwrap();
        let w: Vec<f64> = (0..24).map(|k| sin(0.3 * k as f64 + 0.2)).collect();
        let h = r.second_derivative_contraction(&[0.1, 0.2, -0.3, 0.05], &w).unwrap();
        for j in 0..4 {
            let expect: f64 = (0..12).map(|i| 2.0 * alpha * (w[2 * i] * r.dirs[i][0] + w[2 * i + 1] * r.dirs[i][1]) * r.phi[(i, j)]).sum();
            assert!((h[(j, j)] - expect).abs() < 1e-13);
            for k in 0..4 {
                if k != j {
                    assert_eq!(h[(j, k)], 0.0);
                }
            }
        }
        let linear = NonlinearRadialParam::new(SurfaceMesh::unit_circle(12, 1.0).unwrap(), [0.0, 0.0], AngularBasis::Fourier(4), 0.0).unwrap();
        assert!(linear.is_linear());
        assert!(linear.second_derivative_contraction(&[0.1; 4], &w).unwrap().is_zero());
    }

    #[test]
    fn closed_hicks_henne_sides_are_disjoint() {
        let c = SurfaceMesh::unit_circle(32, 1.0).unwrap();
        let hh = HicksHenneParam::uniform(c, 6, 3.0).unwrap();
        let jac = hh.jacobian(&[0.0; 12]).unwrap();
        for i in 0..32 {
            let upper = (0..6).any(|j| jac[(2 * i, j)] != 0.0 || jac[(2 * i + 1, j)] != 0.0);
            let lower = (6..12).any(|j| jac[(2 * i, j)] != 0.0 || jac[(2 * i + 1, j)] != 0.0);
            assert!(!(upper && lower), "node {i}");
        }
        let w = vec![0.0; 64];
        assert!(dot(&hh.vjp(&[0.0; 12], &w).unwrap(), &[1.0; 12]) == 0.0);
    }

    #[test]
    fn airfoil_preset_layout() {
        let chord: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let hh = HicksHenneParam::airfoil_preset(SurfaceMesh::open_chord(&chord).unwrap()).unwrap();
        assert_eq!(hh.bumps().len(), 38);
        assert_eq!(hh.bumps().iter().filter(|b| b.side == Side::Upper).count(), 19);
        for (k, b) in hh.bumps()[..19].iter().enumerate() {
            assert!((b.peak - 0.05 * (k + 1) as f64).abs() < 1e-12);
        }
        assert_eq!(hh.exponent(), 3.0);
    }

    #[test]
    fn ffd_rejects_nodes_outside_box() {
        let c = SurfaceMesh::unit_circle(8, 1.0).unwrap();
        let bx = ControlBox { min: [-0.5, -0.5], max: [0.5, 0.5], nx: 3, ny: 3 };
        assert!(matches!(FfdParam::new(c.clone(), bx, Axis::Y), Err(Error::Domain(_))));
        // Partition of unity: moving every control point by 1 moves every node by 1.
        let ffd = FfdParam::around(c, 4, 3, 0.2, Axis::Y).unwrap();
        let s = ffd.apply(&[1.0; 12]).unwrap();
        for (a, b) in s.nodes().iter().zip(ffd.baseline().nodes()) {
            assert!((a[1] - b[1] - 1.0).abs() < 1e-14 && a[0] == b[0]);
        }
    }
}
